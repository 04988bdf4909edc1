//! Bisection root finding.

use crate::error::{Error, Result};

/// Root of `f` on `[lo, hi]` to absolute tolerance `tol`; requires a sign
/// change on the bracket.
pub fn bisect_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "bisection tol must be > 0, got {tol}"
        )));
    }
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo * fhi > 0.0 {
        return Err(Error::Bracket {
            f_lo: flo,
            f_hi: fhi,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket exhausted at float resolution
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if flo * fmid < 0.0 {
            hi = mid;
            fhi = fmid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    let _ = fhi;
    Ok(0.5 * (lo + hi))
}
