//! Spectrum slicing by bisection on a counting function.
//!
//! Every pole equation in this crate can be turned into a nondecreasing integer count on a
//! pole-free interval: the number of positive eigenvalues of a matrix-monotone function
//! (`f(w)`, `F(w)` or the Hermitian matrix `F(w)`). Its jumps are the roots, with multiplicity,
//! so closely spaced or degenerate roots are never lost to a missing sign change.

use crate::bath::{BandStructure, Interval};
use crate::error::Result;

/// Absolute bisection tolerance on root positions.
pub(crate) const ROOT_TOL: f64 = 1e-12;

/// Offset used to step off a band edge (a pole of `G_B`) into the gap; scaled by
/// `max(1, |edge|)` and kept clear of the on-shell window of the Green functions.
const EDGE_OFFSET: f64 = 4e-12;

/// Finds all jumps of `count` on `[lo, hi]`. Returns each jump position repeated by its size.
pub(crate) fn count_jumps<F>(lo: f64, hi: f64, count: &F, tol: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<usize>,
{
    let mut out = Vec::new();
    if !(hi > lo) {
        return Ok(out);
    }
    let c_lo = count(lo)?;
    let c_hi = count(hi)?;
    bisect(lo, hi, c_lo, c_hi, count, tol, &mut out)?;
    Ok(out)
}

fn bisect<F>(
    lo: f64,
    hi: f64,
    c_lo: usize,
    c_hi: usize,
    count: &F,
    tol: f64,
    out: &mut Vec<f64>,
) -> Result<()>
where
    F: Fn(f64) -> Result<usize>,
{
    if c_hi <= c_lo {
        return Ok(());
    }
    let mid = 0.5 * (lo + hi);
    if hi - lo <= tol || mid <= lo || mid >= hi {
        out.extend(std::iter::repeat(mid).take(c_hi - c_lo));
        return Ok(());
    }
    let c_mid = count(mid)?.clamp(c_lo, c_hi);
    bisect(lo, mid, c_lo, c_mid, count, tol, out)?;
    bisect(mid, hi, c_mid, c_hi, count, tol, out)
}

/// Pole-free search window inside `gap`, with semi-infinite sides clipped to `[floor, ceil]`.
pub(crate) fn gap_window(gap: &Interval, floor: f64, ceil: f64) -> Option<(f64, f64)> {
    let lo = if gap.lower.is_finite() {
        gap.lower + EDGE_OFFSET * gap.lower.abs().max(1.0)
    } else {
        floor
    };
    let hi = if gap.upper.is_finite() {
        gap.upper - EDGE_OFFSET * gap.upper.abs().max(1.0)
    } else {
        ceil
    };
    (hi > lo).then_some((lo, hi))
}

/// Roots of a counting function in every gap of `bands`.
pub(crate) fn roots_in_gaps<F>(
    bands: &BandStructure,
    floor: f64,
    ceil: f64,
    count: &F,
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<usize>,
{
    let mut roots = Vec::new();
    for gap in &bands.gaps {
        if let Some((lo, hi)) = gap_window(gap, floor, ceil) {
            roots.extend(count_jumps(lo, hi, count, ROOT_TOL)?);
        }
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_and_double_roots() {
        // roots of a step count at 0.3 (single) and 0.7 (double)
        let count = |w: f64| -> Result<usize> {
            Ok((w > 0.3) as usize + 2 * (w > 0.7) as usize)
        };
        let r = count_jumps(0.0, 1.0, &count, 1e-13).unwrap();
        assert_eq!(r.len(), 3);
        assert!((r[0] - 0.3).abs() < 1e-12);
        assert!((r[1] - 0.7).abs() < 1e-12 && (r[2] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn monotone_function_root() {
        let f = |w: f64| w * w * w - 2.0;
        let count = |w: f64| -> Result<usize> { Ok((f(w) > 0.0) as usize) };
        let r = count_jumps(-5.0, 5.0, &count, ROOT_TOL).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn windows_skip_edges() {
        let g = Interval {
            lower: 1.0,
            upper: f64::INFINITY,
        };
        let (lo, hi) = gap_window(&g, -10.0, 10.0).unwrap();
        assert!(lo > 1.0 && lo < 1.0 + 1e-11);
        assert_eq!(hi, 10.0);
        let empty = Interval {
            lower: 1.0,
            upper: 1.0,
        };
        assert!(gap_window(&empty, -10.0, 10.0).is_none());
    }
}
