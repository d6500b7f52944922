//! One-dimensional minimization by dense grid scan followed by
//! golden-section refinement of the best grid cell.
//!
//! The objectives here are pointwise minima of smooth functions, so they
//! can have kinks; a grid pass first makes the search robust against the
//! resulting local structure, and the golden-section pass sharpens the
//! winner cheaply.

/// Location and value of a minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9; // (sqrt(5) - 1) / 2

/// Minimize `f` on `[lo, hi]` with `grid_points` samples and a
/// golden-section pass that stops once the bracket is narrower than
/// `x_tol` (absolute).
pub fn minimize<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    grid_points: usize,
    x_tol: f64,
) -> Minimum {
    assert!(lo.is_finite() && hi.is_finite() && grid_points >= 2);
    if hi <= lo {
        let value = f(lo);
        return Minimum { x: lo, value };
    }

    let step = (hi - lo) / (grid_points - 1) as f64;
    let mut best = Minimum {
        x: lo,
        value: f(lo),
    };
    for i in 1..grid_points {
        let x = if i == grid_points - 1 {
            hi
        } else {
            lo + step * i as f64
        };
        let value = f(x);
        if value < best.value {
            best = Minimum { x, value };
        }
    }

    // Refine inside the two cells around the best sample.
    let mut a = (best.x - step).max(lo);
    let mut b = (best.x + step).min(hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if b - a <= x_tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        let inner = if f1 <= f2 {
            Minimum { x: x1, value: f1 }
        } else {
            Minimum { x: x2, value: f2 }
        };
        if inner.value < best.value {
            best = inner;
        }
    }
    // On a flat-bottomed objective the value stops discriminating before
    // the bracket stops shrinking; the bracket midpoint then locates the
    // minimizer better than the last strict improvement.
    let mid = 0.5 * (a + b);
    let f_mid = f(mid);
    if f_mid <= best.value {
        best = Minimum { x: mid, value: f_mid };
    }
    best
}

/// Maximize `f` on `[lo, hi]`; same scheme as [`minimize`].
pub fn maximize<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    grid_points: usize,
    x_tol: f64,
) -> Minimum {
    let m = minimize(|x| -f(x), lo, hi, grid_points, x_tol);
    Minimum {
        x: m.x,
        value: -m.value,
    }
}
