//! Optimality-criteria update for a single volume constraint `sum x = V`.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Floor on the current density in the multiplicative update, so that
/// variables sitting at zero can still grow.
pub const OC_DENSITY_FLOOR: f64 = 1e-3;

/// Relative tolerance of the multiplier bisection, in units of `x.len()`.
const VOLUME_TOLERANCE: f64 = 1e-9;

/// One fixed-point step `x_new = clamp(max(x, 1e-3) * sqrt(-s / lambda))`
/// within `[lower, upper]` and a move limit, with `lambda` found by
/// bisection so that `sum x_new` meets `volume_target`.
///
/// Positive sensitivities (material would increase compliance, which only
/// happens through filtering) are clamped to zero. If the target exceeds
/// what the update can reach, the largest reachable point is returned.
pub fn oc_update(
    x: &[f64],
    sensitivities: &[f64],
    volume_target: f64,
    move_limit: f64,
    lower: &[f64],
    upper: &[f64],
) -> Result<Vec<f64>> {
    let n = x.len();
    for (what, len) in [
        ("sensitivities", sensitivities.len()),
        ("lower bounds", lower.len()),
        ("upper bounds", upper.len()),
    ] {
        if len != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                actual: len,
            });
        }
    }
    if sensitivities.iter().chain(x).any(|v| !v.is_finite()) || !volume_target.is_finite() {
        return Err(Error::NonFinite {
            what: "optimality-criteria input",
        });
    }
    if !(move_limit > 0.0) {
        return Err(Error::config("move_limit", "must be positive"));
    }

    let lo: Vec<f64> = (0..n).map(|j| (x[j] - move_limit).max(lower[j])).collect();
    let hi: Vec<f64> = (0..n)
        .map(|j| (x[j] + move_limit).min(upper[j]).max(lo[j]))
        .collect();
    let base: Vec<f64> = (0..n).map(|j| x[j].max(OC_DENSITY_FLOOR)).collect();
    let drive: Vec<f64> = sensitivities.iter().map(|s| (-s).max(0.0)).collect();

    let min_volume: f64 = lo.iter().sum();
    let max_volume: f64 = hi.iter().sum();
    let tol = VOLUME_TOLERANCE * (n.max(1) as f64);
    if volume_target < min_volume - tol {
        return Err(Error::Bracketing {
            target: volume_target,
            low: min_volume,
            high: max_volume,
        });
    }

    let mut out = vec![0.0; n];
    let apply = |lambda: f64, out: &mut [f64]| -> f64 {
        let mut total = 0.0;
        for j in 0..n {
            let v = if drive[j] == 0.0 {
                lo[j]
            } else {
                (base[j] * libm::sqrt(drive[j] / lambda)).clamp(lo[j], hi[j])
            };
            out[j] = v;
            total += v;
        }
        total
    };

    // Volume is non-increasing in lambda. Reachable maximum is the limit
    // lambda -> 0.
    let reachable: f64 = (0..n).map(|j| if drive[j] > 0.0 { hi[j] } else { lo[j] }).sum();
    if volume_target >= reachable - tol {
        for j in 0..n {
            out[j] = if drive[j] > 0.0 { hi[j] } else { lo[j] };
        }
        return Ok(out);
    }
    if volume_target <= min_volume + tol {
        out.copy_from_slice(&lo);
        return Ok(out);
    }

    let scale = drive.iter().cloned().fold(0.0, f64::max);
    let mut l1 = scale;
    let mut l2 = scale;
    while apply(l1, &mut out) < volume_target {
        l1 *= 0.5;
        if l1 < f64::MIN_POSITIVE {
            break;
        }
    }
    while apply(l2, &mut out) > volume_target {
        l2 *= 2.0;
        if !l2.is_finite() {
            return Err(Error::Bracketing {
                target: volume_target,
                low: min_volume,
                high: reachable,
            });
        }
    }
    // Bisect in log space: the multiplier can span many decades.
    for _ in 0..300 {
        let mid = libm::sqrt(l1 * l2);
        if !(mid > l1 && mid < l2) {
            break;
        }
        let v = apply(mid, &mut out);
        if (v - volume_target).abs() <= tol {
            return Ok(out);
        }
        if v > volume_target {
            l1 = mid;
        } else {
            l2 = mid;
        }
    }
    apply(l2, &mut out);
    Ok(out)
}
