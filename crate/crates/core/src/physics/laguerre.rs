//! Generalized Laguerre polynomials and displaced number-state overlaps.

use statrs::function::factorial::ln_factorial;

use crate::error::{invalid, Error, Result};

/// Largest natural log representable by an `f64` before overflow.
const LN_MAX: f64 = 709.0;
const RESCALE: f64 = 1e200;

/// Sign and natural log of |L_n^{(k)}(x)|.
///
/// The three-term recurrence in `n` is run with periodic rescaling so that
/// large orders do not overflow before the final logarithm is taken. A zero
/// of the polynomial returns `(0.0, -inf)`.
pub fn ln_abs_laguerre(n: usize, k: usize, x: f64) -> Result<(f64, f64)> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(invalid(
            "x",
            format!("Laguerre argument must be finite and >= 0, got {x}"),
        ));
    }
    let k = k as f64;
    let mut prev = 1.0_f64;
    if n == 0 {
        return Ok((1.0, 0.0));
    }
    let mut cur = 1.0 + k - x;
    let mut ln_scale = 0.0_f64;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * cur - (jf + k) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            ln_scale += RESCALE.ln();
        }
        if !cur.is_finite() {
            return Err(Error::OutOfRange(format!(
                "L_{n}^({k})({x}) recurrence diverged"
            )));
        }
    }
    if cur == 0.0 {
        return Ok((0.0, f64::NEG_INFINITY));
    }
    Ok((cur.signum(), cur.abs().ln() + ln_scale))
}

/// L_n^{(k)}(x) for integer order and degree.
///
/// Returns [`Error::OutOfRange`] rather than an infinite or NaN value when
/// the result does not fit in an `f64`.
pub fn laguerre(n: usize, k: usize, x: f64) -> Result<f64> {
    let (sign, ln_abs) = ln_abs_laguerre(n, k, x)?;
    if ln_abs > LN_MAX {
        return Err(Error::OutOfRange(format!(
            "L_{n}^({k})({x}) exceeds f64 range (ln|L| = {ln_abs:.1})"
        )));
    }
    Ok(sign * ln_abs.exp())
}

/// |⟨m|D(α)|n⟩|² as a function of |α|².
///
/// Evaluated as (n!/m!)·|α|^{2(m−n)}·e^{−|α|²}·[L_n^{(m−n)}(|α|²)]² for
/// m ≥ n, with the factorial ratio taken in log space. The expression is
/// symmetric, p_m(n) = p_n(m), so either argument order is accepted.
pub fn displaced_fock_prob(n: usize, m: usize, alpha_sq: f64) -> Result<f64> {
    if !(alpha_sq >= 0.0 && alpha_sq.is_finite()) {
        return Err(invalid(
            "alpha_sq",
            format!("must be finite and >= 0, got {alpha_sq}"),
        ));
    }
    let (lo, hi) = if n <= m { (n, m) } else { (m, n) };
    if alpha_sq == 0.0 {
        return Ok(if lo == hi { 1.0 } else { 0.0 });
    }
    let d = hi - lo;
    let (sign, ln_l) = ln_abs_laguerre(lo, d, alpha_sq)?;
    if sign == 0.0 {
        return Ok(0.0);
    }
    let ln_p = ln_factorial(lo as u64) - ln_factorial(hi as u64) + d as f64 * alpha_sq.ln()
        - alpha_sq
        + 2.0 * ln_l;
    Ok(ln_p.exp())
}

/// |⟨j|D(α)|k⟩|² for j < `rows`, k < `cols`, row-major.
///
/// Runs the Laguerre recurrence once per diagonal d = |k − j| on the
/// normalized amplitude A_i = √(i!/(i+d)!)·|α|^d·e^{−|α|²/2}·L_i^{(d)}(|α|²):
/// √((i+1)(i+1+d))·A_{i+1} = (2i+1+d−|α|²)·A_i − √(i(i+d))·A_{i−1}.
pub fn displaced_fock_table(alpha_sq: f64, rows: usize, cols: usize) -> Result<Vec<f64>> {
    if !(alpha_sq >= 0.0 && alpha_sq.is_finite()) {
        return Err(invalid(
            "alpha_sq",
            format!("must be finite and >= 0, got {alpha_sq}"),
        ));
    }
    let mut out = vec![0.0; rows * cols];
    if alpha_sq == 0.0 {
        for j in 0..rows.min(cols) {
            out[j * cols + j] = 1.0;
        }
        return Ok(out);
    }
    let x = alpha_sq;
    let ln_x = x.ln();
    let top = rows.max(cols);
    for d in 0..top {
        // Lower index i pairs with i + d; i < rows always holds.
        let len = rows.min(top - d);
        if len == 0 {
            continue;
        }
        let df = d as f64;
        let mut ln_scale = 0.5 * (df * ln_x - ln_factorial(d as u64)) - 0.5 * x;
        let mut prev = 0.0;
        let mut cur = 1.0;
        for i in 0..len {
            if i > 0 {
                let fi = (i - 1) as f64;
                let next = ((2.0 * fi + 1.0 + df - x) * cur - (fi * (fi + df)).sqrt() * prev)
                    / ((fi + 1.0) * (fi + 1.0 + df)).sqrt();
                prev = cur;
                cur = next;
                let mag = cur.abs();
                if mag > 1e150 || (mag < 1e-150 && mag > 0.0) {
                    let shift = mag.ln();
                    ln_scale += shift;
                    prev /= mag;
                    cur /= mag;
                }
            }
            let p = if cur == 0.0 {
                0.0
            } else {
                (2.0 * (cur.abs().ln() + ln_scale)).exp()
            };
            let (j, k) = (i, i + d);
            if k < cols {
                out[j * cols + k] = p;
            }
            if d > 0 && k < rows && i < cols {
                out[k * cols + i] = p;
            }
        }
    }
    Ok(out)
}
