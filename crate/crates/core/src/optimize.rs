//! One-dimensional minimization: coarse grid bracketing followed by Brent's
//! method.

const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Minimum {
    pub x: f64,
    pub fx: f64,
}

/// Brent's parabolic-interpolation/golden-section minimizer on `[a, b]`.
pub(crate) fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    xtol: f64,
    max_iter: usize,
) -> Minimum {
    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = xtol + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum { x, fx }
}

/// Evaluate `f` on `grid` (increasing), then refine around the best node with
/// Brent. Non-finite values count as `+∞`. Ties keep the first node.
pub(crate) fn grid_then_brent<F: FnMut(f64) -> f64>(
    mut f: F,
    grid: &[f64],
    xtol: f64,
) -> Minimum {
    let values: Vec<f64> = grid
        .iter()
        .map(|&x| {
            let y = f(x);
            if y.is_finite() {
                y
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut best = 0;
    for (i, &y) in values.iter().enumerate() {
        if y < values[best] {
            best = i;
        }
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let refined = brent(
        |x| {
            let y = f(x);
            if y.is_finite() {
                y
            } else {
                f64::INFINITY
            }
        },
        lo,
        hi,
        xtol,
        200,
    );
    if refined.fx <= values[best] {
        refined
    } else {
        Minimum {
            x: grid[best],
            fx: values[best],
        }
    }
}

/// `n` points from `lo` to `hi` (inclusive), evenly spaced.
pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_quadratic_and_nonsymmetric_minima() {
        let m = brent(|x| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-10, 200);
        assert!((m.x - 0.3).abs() < 1e-8);
        assert!((m.fx - 1.0).abs() < 1e-15);
        let m = brent(|x: f64| x.exp() - 2.0 * x, 0.0, 3.0, 1e-12, 200);
        assert!((m.x - 2f64.ln()).abs() < 1e-7);
    }

    #[test]
    fn grid_picks_global_basin() {
        let f = |x: f64| (3.0 * x).sin() + 0.1 * x;
        let grid = linspace(-4.0, 4.0, 81);
        let m = grid_then_brent(f, &grid, 1e-10);
        // Global minimum of sin(3x) + 0.1x on [−4, 4] sits near x = −2.629.
        assert!((m.x + 2.6291).abs() < 1e-3, "{}", m.x);
    }

    #[test]
    fn non_finite_values_are_avoided() {
        let f = |x: f64| if x < 1.0 { f64::NAN } else { (x - 1.5).powi(2) };
        let m = grid_then_brent(f, &linspace(0.0, 3.0, 31), 1e-10);
        assert!((m.x - 1.5).abs() < 1e-7);
    }
}
