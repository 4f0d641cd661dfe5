//! Small derivative-free minimizers used by the fitting routines.

/// Outcome of a scalar minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Brent's method on `[a, b]`: golden-section steps with parabolic
/// interpolation whenever the parabola is trustworthy.
///
/// Stops when the bracket shrinks below `rel_tol·|x| + abs_tol`.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_iter: usize,
) -> ScalarMinimum {
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut evaluations = 1;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for iter in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = rel_tol * x.abs() + abs_tol;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return ScalarMinimum {
                x,
                fx,
                iterations: iter,
                evaluations,
                converged: true,
            };
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
            let etemp = e;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = f(u);
        evaluations += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
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
    ScalarMinimum {
        x,
        fx,
        iterations: max_iter,
        evaluations,
        converged: false,
    }
}

/// Scans `grid` for its lowest point, then refines with [`brent`] between
/// the neighbouring grid nodes. The grid must be sorted.
pub fn bracketed_minimum<F: FnMut(f64) -> f64>(
    mut f: F,
    grid: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> ScalarMinimum {
    assert!(grid.len() >= 2, "bracketing grid needs at least two nodes");
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let mut refined = brent(&mut f, lo, hi, rel_tol, abs_tol, 200);
    refined.evaluations += grid.len();
    // Brent never probes the bracket ends; keep a grid node if it is better.
    if values[best] < refined.fx {
        refined.x = grid[best];
        refined.fx = values[best];
    }
    refined
}

/// Result of a Nelder–Mead run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexMinimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective after each iteration; non-increasing.
    pub trace: Vec<f64>,
}

/// Nelder–Mead simplex with standard coefficients.
///
/// Converges when the spread of objective values across the simplex falls
/// below `f_tol·(|f_best| + f_tol)`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    f_tol: f64,
    max_iter: usize,
) -> SimplexMinimum {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let mut evaluations = dim + 1;
    let mut trace = Vec::new();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for iter in 0..max_iter {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        trace.push(values[0]);

        let spread = (values[dim] - values[0]).abs();
        if values[0].is_finite() && spread <= f_tol * (values[0].abs() + f_tol) {
            return SimplexMinimum {
                x: simplex[0].clone(),
                fx: values[0],
                iterations: iter,
                evaluations,
                converged: true,
                trace,
            };
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|p| p[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-alpha);
        let fr = f(&xr);
        evaluations += 1;
        if fr < values[0] {
            let xe = along(-gamma);
            let fe = f(&xe);
            evaluations += 1;
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[dim] {
            let xc = along(-rho);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(rho);
            let fc = f(&xc);
            (xc, fc)
        };
        evaluations += 1;
        if fc < values[dim].min(fr) {
            simplex[dim] = xc;
            values[dim] = fc;
            continue;
        }
        for i in 1..=dim {
            let shrunk: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, p)| b + sigma * (p - b))
                .collect();
            values[i] = f(&shrunk);
            simplex[i] = shrunk;
            evaluations += 1;
        }
    }
    let best = (0..=dim)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    trace.push(values[best]);
    SimplexMinimum {
        x: simplex[best].clone(),
        fx: values[best],
        iterations: max_iter,
        evaluations,
        converged: false,
        trace,
    }
}

/// Central (or one-sided near a lower bound) second derivative.
pub(crate) fn second_derivative<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64, lower: f64) -> f64 {
    if x - h >= lower {
        (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
    } else {
        let x0 = lower.max(x);
        (f(x0 + 2.0 * h) - 2.0 * f(x0 + h) + f(x0)) / (h * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_parabola_vertex() {
        let m = brent(
            |x| (x - 1.234).powi(2) + 3.0,
            -10.0,
            10.0,
            1e-10,
            1e-12,
            200,
        );
        assert!(m.converged);
        assert!((m.x - 1.234).abs() < 1e-7, "{}", m.x);
    }

    #[test]
    fn brent_handles_boundary_minimum() {
        let m = bracketed_minimum(|x| x + 1.0, &[0.0, 1.0, 2.0], 1e-10, 1e-14);
        assert_eq!(m.x, 0.0);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let rosen = |p: &[f64]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2);
        let m = nelder_mead(rosen, &[-1.2, 1.0], &[0.5, 0.5], 1e-14, 5000);
        assert!(m.converged);
        assert!(
            (m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3,
            "{:?}",
            m.x
        );
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
