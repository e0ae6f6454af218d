//! Erlang-C delay probability for M/M/c and its inverse in the offered load.

use crate::error::{Error, Result};

/// Absolute bisection tolerance on the offered load returned by
/// [`max_load_for_target`].
pub const LOAD_TOLERANCE: f64 = 1e-10;

/// Steady-state probability that an arriving customer waits, for offered load
/// `r = λ/μ` and `c` servers.
///
/// Evaluated through the Erlang-B recursion `B(k) = r·B(k−1) / (k + r·B(k−1))`
/// and `C = B(c) / (1 − ρ(1 − B(c)))`, which never forms `r^c` or `c!`.
pub fn erlang_c_delay(r: f64, c: u32) -> Result<f64> {
    if c == 0 {
        return Err(Error::Domain {
            func: "erlang_c_delay",
            detail: "server count must be >= 1".into(),
        });
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain {
            func: "erlang_c_delay",
            detail: format!("offered load must be finite and > 0, got {r}"),
        });
    }
    if r >= c as f64 {
        return Err(Error::Unstable { r, c });
    }
    Ok(erlang_c_unchecked(r, c))
}

pub(crate) fn erlang_c_unchecked(r: f64, c: u32) -> f64 {
    let mut b = 1.0;
    for k in 1..=c {
        b = r * b / (k as f64 + r * b);
    }
    let rho = r / c as f64;
    b / (1.0 - rho * (1.0 - b))
}

/// The offered load `r*(c, α) ∈ (0, c)` at which the delay probability equals
/// `alpha`. For every `r ≤ r*` the delay probability is at most `alpha`.
pub fn max_load_for_target(c: u32, alpha: f64) -> Result<f64> {
    if c == 0 {
        return Err(Error::Domain {
            func: "max_load_for_target",
            detail: "server count must be >= 1".into(),
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain {
            func: "max_load_for_target",
            detail: format!("alpha must lie in (0, 1), got {alpha}"),
        });
    }
    let (mut lo, mut hi) = (0.0_f64, c as f64);
    while hi - lo > LOAD_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if erlang_c_unchecked(mid, c) <= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
