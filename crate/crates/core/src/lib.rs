//! Optimal privacy-utility tradeoffs for data made of independent components,
//! each carrying a private feature that is a deterministic function of it.
//!
//! All information measures are in bits; differential-privacy epsilons are
//! in nats.

pub mod allocation;
pub mod channel;
pub mod dp;
pub mod error;
pub mod frl;
pub mod funnel;
pub mod infotheory;
pub mod json;
pub mod model;
pub mod oracle;
pub mod parallelize;
pub mod simplex;
pub mod verify;

pub use allocation::{
    solve_allocation, solve_and_synthesize, Allocation, AllocationStatus, MechanismBundle,
};
pub use channel::{
    evaluate_mechanism, evaluate_parallel, product_channel, Channel, MechanismMetrics,
};
pub use dp::{epsilon, verify_dp_parallelization, DpReport};
pub use error::{Error, Result};
pub use funnel::{synthesize, threshold, ComponentSolution};
pub use model::{load_model, ComponentModel, DataModel, Target};
pub use parallelize::{
    parallelize_compression, parallelize_privatization, ParallelizationReport, ParallelizedChannel,
};
