//! JSON emission and mechanism-file loading.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use funnelkit::{Channel, MechanismMetrics};
use serde::Serialize;
use serde_json::Value;

/// Significant digits kept for every float written to stdout.
pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn round_significant(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .unwrap_or(v)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_significant(n.as_f64().unwrap_or_default());
            if let Some(num) = serde_json::Number::from_f64(r) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes with floats rounded to [`SIGNIFICANT_DIGITS`].
pub fn to_rounded_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    Ok(serde_json::to_string_pretty(&v)?)
}

/// Prints rounded JSON; a closed stdout (e.g. `| head`) is not an error.
pub fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = to_rounded_json(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// A mechanism read from disk.
pub enum Mechanism {
    /// One channel over the joint alphabet.
    Joint(Channel),
    /// Independent per-component channels.
    Parallel(Vec<Channel>),
}

/// A mechanism plus whatever metrics were stored next to it.
pub struct MechanismFile {
    pub mechanism: Mechanism,
    pub recorded: Option<MechanismMetrics>,
}

/// Accepts a bare channel, a solver bundle (`product`, falling back to the
/// per-component `solutions`) or a parallelized channel (`components`).
pub fn load_mechanism(path: &Path) -> Result<MechanismFile> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let recorded = match value.get("metrics") {
        Some(m) => Some(serde_json::from_value(m.clone()).context("reading recorded metrics")?),
        None => None,
    };
    let channel = |v: &Value| -> Result<Channel> { Ok(serde_json::from_value(v.clone())?) };
    let mechanism = if value.get("rows").is_some() {
        Mechanism::Joint(channel(&value)?)
    } else if let Some(product) = value.get("product").filter(|p| !p.is_null()) {
        Mechanism::Joint(channel(product).context("reading product channel")?)
    } else if let Some(solutions) = value.get("solutions").and_then(Value::as_array) {
        let chans = solutions
            .iter()
            .map(|s| {
                s.get("channel")
                    .context("solution without channel")
                    .and_then(channel)
            })
            .collect::<Result<Vec<_>>>()?;
        Mechanism::Parallel(chans)
    } else if let Some(components) = value.get("components").and_then(Value::as_array) {
        Mechanism::Parallel(components.iter().map(channel).collect::<Result<Vec<_>>>()?)
    } else {
        bail!(
            "{}: expected a channel, a mechanism bundle or a parallelized channel",
            path.display()
        );
    };
    Ok(MechanismFile {
        mechanism,
        recorded,
    })
}
