//! Central finite differences for gradient verification.
//!
//! These helpers only ever call a user-supplied forward evaluation, so they
//! stay independent of the tape's backward path and can serve as its oracle.

/// Central difference df/dx at one coordinate: (f(x+h) - f(x-h)) / 2h.
pub fn central_diff<G: FnMut(f64) -> f64>(mut eval_at: G, x0: f64, step: f64) -> f64 {
    let fp = eval_at(x0 + step);
    let fm = eval_at(x0 - step);
    (fp - fm) / (2.0 * step)
}

/// Relative disagreement between an analytic and a finite-difference value.
///
/// Differences below `abs_floor` count as exact agreement: central
/// differences carry ~1e-10 of roundoff noise at f64, so comparisons under
/// the floor carry no signal.
pub fn rel_error(analytic: f64, numeric: f64, abs_floor: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff <= abs_floor {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs())
}

/// Worst relative disagreement between an analytic gradient vector and the
/// central-difference gradient of `loss`, probing every coordinate of a
/// parameter buffer accessed through `get`/`set`.
pub fn max_rel_error_over<LossFn, GetFn, SetFn>(
    n_coords: usize,
    analytic: &[f64],
    mut loss: LossFn,
    get: GetFn,
    mut set: SetFn,
    step: f64,
    abs_floor: f64,
) -> f64
where
    LossFn: FnMut() -> f64,
    GetFn: Fn(usize) -> f64,
    SetFn: FnMut(usize, f64),
{
    assert_eq!(n_coords, analytic.len());
    let mut worst = 0.0f64;
    for i in 0..n_coords {
        let x0 = get(i);
        set(i, x0 + step);
        let fp = loss();
        set(i, x0 - step);
        let fm = loss();
        set(i, x0);
        let fd = (fp - fm) / (2.0 * step);
        worst = worst.max(rel_error(analytic[i], fd, abs_floor));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_diff_of_square() {
        // d/dx x^2 at 3 = 6
        let d = central_diff(|x| x * x, 3.0, 1e-5);
        assert!((d - 6.0).abs() < 1e-9);
    }

    #[test]
    fn rel_error_floor() {
        assert_eq!(rel_error(1e-12, -1e-12, 1e-8), 0.0);
        assert!(rel_error(1.0, 1.1, 1e-8) > 0.09);
    }
}
