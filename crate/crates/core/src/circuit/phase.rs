use std::f64::consts::PI;

use super::LogicalGate;
use crate::error::{Error, Result};

/// A single-qubit phase angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Angle {
    /// `numerator * pi / 2^denom_exp`, exactly.
    Dyadic { numerator: i64, denom_exp: u32 },
    Radians(f64),
}

/// Expand `R_Z(angle) = diag(1, e^{i angle})` into `R_Z(pi / 2^d)` gates with
/// `d <= max_denom_exp`.
///
/// The angle is rounded to the grid `pi / 2^max_denom_exp` (exact when it
/// already lies on it), reduced modulo `2 pi`, and each set bit `j` of the
/// grid numerator contributes one `R_Z(pi / 2^{max_denom_exp - j})`. The
/// composed phase is within `pi / 2^{max_denom_exp + 1}` of the target.
pub fn decompose_phase(qubit: usize, angle: Angle, max_denom_exp: u32) -> Result<Vec<LogicalGate>> {
    if max_denom_exp > 62 {
        return Err(Error::InvalidParameter("phase precision above 2^62".into()));
    }
    let scale = max_denom_exp;
    let grid: i128 = match angle {
        Angle::Dyadic { numerator, denom_exp } => {
            if denom_exp <= scale {
                numerator as i128 * (1i128 << (scale - denom_exp))
            } else {
                let shift = denom_exp - scale;
                if shift > 100 {
                    0
                } else {
                    // round half away from zero
                    let d = 1i128 << shift;
                    let n = numerator as i128;
                    (2 * n + n.signum() * d) / (2 * d)
                }
            }
        }
        Angle::Radians(theta) => {
            if !theta.is_finite() {
                return Err(Error::InvalidParameter("non-finite angle".into()));
            }
            let turns = theta.rem_euclid(2.0 * PI) / PI;
            (turns * (1u64 << scale) as f64).round() as i128
        }
    };
    let modulus = 1i128 << (scale + 1);
    let reduced = grid.rem_euclid(modulus) as u64;
    let mut out = Vec::new();
    for j in (0..=scale).rev() {
        if (reduced >> j) & 1 == 1 {
            out.push(LogicalGate::Phase {
                qubit,
                denom_exp: scale - j,
                negative: false,
            });
        }
    }
    Ok(out)
}
