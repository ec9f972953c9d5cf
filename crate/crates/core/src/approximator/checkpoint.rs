//! Plain-text parameter checkpoints.
//!
//! ```text
//! cgmpinn-checkpoint v1
//! activation tanh
//! layers 1 50 50 50 50 1
//! values 7801
//! -1.2345678901234567e-1
//! ...
//! ```
//!
//! One value per line in the flat layout order, written with 17 significant
//! digits so a read-back reproduces the parameters bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Activation, ApproximatorParams};

pub const CHECKPOINT_MAGIC: &str = "cgmpinn-checkpoint v1";

pub fn format_checkpoint(params: &ApproximatorParams) -> String {
    let mut out = String::with_capacity(26 * params.len() + 64);
    let layers: Vec<String> = params.layer_sizes().iter().map(|n| n.to_string()).collect();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(out, "activation {}", params.activation().tag());
    let _ = writeln!(out, "layers {}", layers.join(" "));
    let _ = writeln!(out, "values {}", params.len());
    for v in params.values() {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

pub fn parse_checkpoint(text: &str) -> Result<ApproximatorParams> {
    let bad = |msg: &str| Error::Input(format!("malformed checkpoint: {msg}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CHECKPOINT_MAGIC) {
        return Err(bad("missing header"));
    }
    let mut field = |name: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad(&format!("missing `{name}` line")))?;
        line.strip_prefix(name)
            .map(|rest| rest.trim().to_string())
            .ok_or_else(|| bad(&format!("expected `{name}`, found `{line}`")))
    };
    let activation = Activation::from_tag(&field("activation")?).ok_or_else(|| bad("unknown activation"))?;
    let layers = field("layers")?
        .split_whitespace()
        .map(|s| s.parse::<usize>().map_err(|_| bad("bad layer width")))
        .collect::<Result<Vec<_>>>()?;
    let count: usize = field("values")?.parse().map_err(|_| bad("bad value count"))?;
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|_| bad(&format!("bad value `{l}`"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != count {
        return Err(bad(&format!("declared {count} values, found {}", values.len())));
    }
    ApproximatorParams::new(layers, values, activation)
}

pub fn write_checkpoint(path: &Path, params: &ApproximatorParams) -> Result<()> {
    std::fs::write(path, format_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<ApproximatorParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximator::init_network;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>(), width in 1usize..6) {
            let mut p = init_network(&[2, width, 1], seed).unwrap();
            // exercise extreme magnitudes as well
            p.values_mut()[0] = f64::MIN_POSITIVE * 3.0;
            let back = parse_checkpoint(&format_checkpoint(&p)).unwrap();
            prop_assert_eq!(back, p);
        }
    }

    #[test]
    fn rejects_truncated_file() {
        let p = init_network(&[1, 2, 1], 0).unwrap();
        let text = format_checkpoint(&p);
        let cut: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(parse_checkpoint(&cut).is_err());
        assert!(parse_checkpoint("nonsense").is_err());
    }
}
