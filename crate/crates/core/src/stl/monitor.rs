//! Quantitative and Boolean semantics over sampled traces.

use std::ops::Range;

use super::formula::{Formula, Interval, Predicate};
use super::trace::{TimeGrid, Trace};
use super::StlError;

const ROUNDING_SLACK: f64 = 1e-9;

/// Sample indices `k` with `t + a <= k*dt <= t + b`, clipped to the grid.
///
/// The lower endpoint is rounded up and the upper one down, so a non-aligned
/// interval is approximated from the inside.
pub fn interval_to_indices(iv: Interval, grid: TimeGrid, t_index: usize) -> Range<usize> {
    let lo = t_index + (iv.a() / grid.dt - ROUNDING_SLACK).ceil().max(0.0) as usize;
    let hi = t_index + (iv.b() / grid.dt + ROUNDING_SLACK).floor().max(0.0) as usize;
    let end = (hi + 1).min(grid.steps);
    if lo >= end {
        lo..lo
    } else {
        lo..end
    }
}

/// Value of the affine predicate at sample `k`.
pub fn predicate_value(p: &Predicate, trace: &Trace, k: usize) -> Result<f64, StlError> {
    let mut acc = 0.0;
    for (name, c) in p.coeffs() {
        let d = trace
            .dim_index(name)
            .ok_or_else(|| StlError::UnknownDimension(name.clone()))?;
        acc += c * trace.value(k, d);
    }
    Ok(acc + p.offset())
}

/// Robustness of `f` on `trace` at sample `t_index`.
pub fn robustness(f: &Formula, trace: &Trace, t_index: usize) -> Result<f64, StlError> {
    if t_index >= trace.len() {
        return Err(StlError::IndexOutOfRange { index: t_index, steps: trace.len() });
    }
    rho(f, trace, t_index)
}

fn rho(f: &Formula, trace: &Trace, t: usize) -> Result<f64, StlError> {
    Ok(match f {
        Formula::True => f64::INFINITY,
        Formula::Pred(p) => predicate_value(p, trace, t)?,
        Formula::Not(g) => -rho(g, trace, t)?,
        Formula::And(a, b) => rho(a, trace, t)?.min(rho(b, trace, t)?),
        Formula::Or(a, b) => rho(a, trace, t)?.max(rho(b, trace, t)?),
        Formula::Always(iv, g) => {
            let mut acc = f64::INFINITY;
            for k in window(*iv, trace, t)? {
                acc = acc.min(rho(g, trace, k)?);
            }
            acc
        }
        Formula::Eventually(iv, g) => {
            let mut acc = f64::NEG_INFINITY;
            for k in window(*iv, trace, t)? {
                acc = acc.max(rho(g, trace, k)?);
            }
            acc
        }
    })
}

fn window(iv: Interval, trace: &Trace, t: usize) -> Result<Range<usize>, StlError> {
    let r = interval_to_indices(iv, trace.grid(), t);
    if r.is_empty() {
        return Err(StlError::EmptyWindow { a: iv.a(), b: iv.b(), t_index: t });
    }
    Ok(r)
}

/// Boolean satisfaction; zero robustness counts as satisfied.
pub fn satisfies(f: &Formula, trace: &Trace, t_index: usize) -> Result<bool, StlError> {
    Ok(robustness(f, trace, t_index)? >= 0.0)
}

/// Checks that every dimension used by `f` exists in `trace`.
pub fn check_dims(f: &Formula, trace: &Trace) -> Result<(), StlError> {
    for d in f.dims() {
        if trace.dim_index(&d).is_none() {
            return Err(StlError::UnknownDimension(d));
        }
    }
    Ok(())
}
