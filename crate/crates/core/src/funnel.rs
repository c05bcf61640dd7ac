//! Per-component privacy funnel with a deterministic private feature.
//!
//! With `S = f(X)` the least leakage compatible with `I(X;Y) >= alpha` is
//! `max(0, alpha - tau)` where `tau = H(X) - H(S)`. Below the threshold the
//! leakage-free privatizer achieves it; above, the privatizer is released
//! with probability `p = (H(X) - alpha) / H(S)` and the raw symbol otherwise.

use serde::Serialize;

use crate::channel::{mixture_channel, Channel};
use crate::error::{Error, Result};
use crate::frl::leakage_free_privatizer;
use crate::model::{ComponentModel, PMF_TOLERANCE};

/// `tau = H(X) - H(S)`, the most information releasable with zero leakage.
pub fn threshold(comp: &ComponentModel) -> f64 {
    (comp.entropy_x() - comp.entropy_s()).max(0.0)
}

/// Minimum leakage for released information `alpha` and threshold `tau`.
pub fn funnel_leakage(alpha: f64, tau: f64) -> f64 {
    if alpha <= tau {
        0.0
    } else {
        alpha - tau
    }
}

/// Optimal mechanism for one component together with its bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentSolution {
    pub alpha_bits: f64,
    pub tau_bits: f64,
    pub leakage_bits: f64,
    /// Probability of releasing the leakage-free output; absent below the threshold.
    pub mix_p: Option<f64>,
    pub channel: Channel,
}

/// Synthesizes the canonical optimal channel for `alpha` bits of released information.
pub fn synthesize(comp: &ComponentModel, alpha: f64) -> Result<ComponentSolution> {
    let h_x = comp.entropy_x();
    let h_s = comp.entropy_s();
    let tau = threshold(comp);
    if !alpha.is_finite() || alpha < -PMF_TOLERANCE {
        return Err(Error::OutOfRange(format!("alpha = {alpha}")));
    }
    if alpha > h_x + PMF_TOLERANCE {
        return Err(Error::UnachievableAlpha {
            alpha,
            entropy: h_x,
        });
    }
    let alpha = alpha.clamp(0.0, h_x);
    let privatizer = leakage_free_privatizer(comp)?;

    if alpha <= tau || h_s <= 0.0 {
        return Ok(ComponentSolution {
            alpha_bits: alpha,
            tau_bits: tau,
            leakage_bits: 0.0,
            mix_p: None,
            channel: privatizer,
        });
    }

    let p = ((h_x - alpha) / h_s).clamp(0.0, 1.0);
    let raw = Channel::identity(comp.alphabet_x());
    Ok(ComponentSolution {
        alpha_bits: alpha,
        tau_bits: tau,
        leakage_bits: funnel_leakage(alpha, tau),
        mix_p: Some(p),
        channel: mixture_channel(&privatizer, &raw, p)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::component_information;
    use crate::model::DataModel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn parity() -> ComponentModel {
        ComponentModel::from_indices(vec![0.25; 4], vec![0, 1, 0, 1]).unwrap()
    }

    fn info(comp: &ComponentModel, ch: &Channel) -> (f64, f64) {
        let model = DataModel::new(vec![comp.clone()], vec![]).unwrap();
        component_information(&model, 0, ch).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let same = ComponentModel::from_indices(vec![0.3, 0.7], vec![0, 1]).unwrap();
        assert_eq!(threshold(&same), 0.0);
        let hidden = ComponentModel::from_indices(vec![0.3, 0.7], vec![0, 0]).unwrap();
        assert_eq!(threshold(&hidden), hidden.entropy_x());
        assert_eq!(threshold(&parity()), 1.0);
    }

    #[test]
    fn leakage_examples() {
        assert_eq!(funnel_leakage(0.5, 1.0), 0.0);
        assert_eq!(funnel_leakage(1.5, 1.0), 0.5);
        assert_eq!(funnel_leakage(1.0, 1.0), 0.0);
    }

    #[test]
    fn synthesize_at_threshold() {
        let sol = synthesize(&parity(), 1.0).unwrap();
        assert_eq!(sol.mix_p, None);
        assert_eq!(sol.leakage_bits, 0.0);
        let (leak, rate) = info(&parity(), &sol.channel);
        assert!(leak < 1e-12);
        assert!((rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn synthesize_above_threshold() {
        let sol = synthesize(&parity(), 1.5).unwrap();
        assert_eq!(sol.mix_p, Some(0.5));
        assert_eq!(sol.leakage_bits, 0.5);
        let (leak, rate) = info(&parity(), &sol.channel);
        assert!((leak - 0.5).abs() < 1e-12);
        assert!((rate - 1.5).abs() < 1e-12);
    }

    #[test]
    fn synthesize_full_release() {
        let comp =
            ComponentModel::from_indices(vec![0.1, 0.2, 0.3, 0.4], vec![0, 1, 1, 2]).unwrap();
        let sol = synthesize(&comp, comp.entropy_x()).unwrap();
        assert_eq!(sol.mix_p, Some(0.0));
        assert_eq!(
            sol.channel.probs(),
            Channel::identity(comp.alphabet_x()).probs()
        );
        let (leak, _) = info(&comp, &sol.channel);
        assert!((leak - comp.entropy_s()).abs() < 1e-12);
    }

    #[test]
    fn synthesize_rejects_excess_alpha() {
        assert!(matches!(
            synthesize(&parity(), 2.1),
            Err(Error::UnachievableAlpha { .. })
        ));
        assert!(synthesize(&parity(), 2.0 + 1e-12).is_ok());
    }

    #[test]
    fn constant_feature_is_always_leakage_free() {
        let comp = ComponentModel::from_indices(vec![0.5, 0.5], vec![0, 0]).unwrap();
        let sol = synthesize(&comp, 1.0).unwrap();
        assert_eq!(sol.mix_p, None);
        let (leak, rate) = info(&comp, &sol.channel);
        assert_eq!(leak, 0.0);
        assert!((rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn achievability_on_random_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(1..=6);
            let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-2).collect();
            let t: f64 = w.iter().sum();
            let n_s = rng.random_range(1..=n);
            let map: Vec<usize> = (0..n)
                .map(|j| if j < n_s { j } else { rng.random_range(0..n_s) })
                .collect();
            let comp =
                ComponentModel::from_indices(w.iter().map(|x| x / t).collect(), map).unwrap();
            let tau = threshold(&comp);
            for step in 0..=4 {
                let alpha = comp.entropy_x() * step as f64 / 4.0;
                let sol = synthesize(&comp, alpha).unwrap();
                let (leak, rate) = info(&comp, &sol.channel);
                assert!(rate >= alpha - 1e-9);
                assert!((leak - funnel_leakage(alpha, tau)).abs() <= 1e-9);
                if let Some(p) = sol.mix_p {
                    assert!((0.0..=1.0).contains(&p));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn leakage_is_monotone_and_lipschitz(a in 0.0f64..8.0, b in 0.0f64..8.0, tau in 0.0f64..4.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (l_lo, l_hi) = (funnel_leakage(lo, tau), funnel_leakage(hi, tau));
            prop_assert!(l_lo <= l_hi);
            prop_assert!(l_hi - l_lo <= hi - lo + 1e-15);
        }
    }
}
