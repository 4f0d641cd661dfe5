//! Two-mode carrier Rabi flops of a thermal state and the (Ω₀, n̄_x) fit.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::data::{FlopDataset, ProbeKind};
use crate::error::{invalid, Error, Result};
use crate::fit::{FitParameter, FitResult};
use crate::optim::nelder_mead;
use crate::physics::FockDistribution;

const LANES: usize = 8;
/// Phase spacing of the cosine table, rad.
const TABLE_STEP: f64 = 0.01;
const RESTART: usize = 512;

/// Default ceiling on the per-mode Fock truncation.
pub const DEFAULT_CARRIER_CEILING: usize = 4000;

/// Debye–Waller factors e^{−η²/2}L_n(η²) for n = 0..=n_max.
pub fn debye_waller_factors(eta: f64, n_max: usize) -> Vec<f64> {
    let x = eta * eta;
    let mut out = Vec::with_capacity(n_max + 1);
    let (mut prev, mut cur) = (0.0, 1.0);
    for n in 0..=n_max {
        out.push(cur);
        let next =
            ((2 * n + 1) as f64 - x) * cur / (n + 1) as f64 - n as f64 * prev / (n + 1) as f64;
        prev = cur;
        cur = next;
    }
    let dw = (-0.5 * x).exp();
    out.iter_mut().for_each(|v| *v *= dw);
    out
}

/// Carrier model for the x mode with a co-driven y mode at n̄_y = r·n̄_x.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierModel {
    pub eta_x: f64,
    pub eta_y: f64,
    pub ratio: f64,
    /// Thermal weight allowed to fall outside the truncated sum.
    pub omitted_weight: f64,
    pub ceiling: usize,
    dw_x: Vec<f64>,
    dw_y: Vec<f64>,
}

/// Signal values and the thermal weight left out of the sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierSignal {
    pub values: Vec<f64>,
    pub omitted: f64,
}

/// Thermal weights up to the level where the remaining tail is below `tail`.
fn truncated_thermal(nbar: f64, eta: f64, tail: f64, ceiling: usize) -> Result<(Vec<f64>, f64)> {
    if eta == 0.0 || nbar == 0.0 {
        return Ok((vec![1.0], 0.0));
    }
    let q = nbar / (1.0 + nbar);
    // q^{N+1} ≤ tail
    let required = (tail.ln() / q.ln()).ceil().max(1.0) as usize - 1;
    if required > ceiling {
        return Err(Error::Truncation { required, ceiling });
    }
    let mut w = Vec::with_capacity(required + 1);
    let mut p = 1.0 - q;
    for _ in 0..=required {
        w.push(p);
        p *= q;
    }
    Ok((w, q.powi(required as i32 + 1)))
}

/// G(u) = Σ_j w_j cos(f_j·u) on the grid u_k = k·h, |f_j| ≤ 1.
struct CosineTable {
    values: Vec<f64>,
}

impl CosineTable {
    fn new(weights: &[f64], freqs: &[f64], len: usize) -> Self {
        let m = weights.len().div_ceil(LANES) * LANES;
        let mut w = vec![0.0; m];
        w[..weights.len()].copy_from_slice(weights);
        let (mut prev, mut cur, mut two_c) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let mut values = vec![0.0; len];
        for (k, v) in values.iter_mut().enumerate() {
            // Restart the recurrence from exact values to bound round-off growth.
            if k % RESTART == 0 {
                for j in 0..freqs.len() {
                    let step = freqs[j] * TABLE_STEP;
                    cur[j] = (step * k as f64).cos();
                    prev[j] = (step * (k as f64 - 1.0)).cos();
                    two_c[j] = 2.0 * step.cos();
                }
            }
            let mut acc = [0.0; LANES];
            for (((w, c), p), tc) in w
                .chunks_exact(LANES)
                .zip(cur.chunks_exact_mut(LANES))
                .zip(prev.chunks_exact_mut(LANES))
                .zip(two_c.chunks_exact(LANES))
            {
                for l in 0..LANES {
                    acc[l] += w[l] * c[l];
                    let next = tc[l] * c[l] - p[l];
                    p[l] = c[l];
                    c[l] = next;
                }
            }
            *v = acc.iter().sum();
        }
        Self { values }
    }

    /// Four-point Lagrange interpolation; G is even in u.
    #[inline]
    fn eval(&self, u: f64) -> f64 {
        let x = u.abs() / TABLE_STEP;
        let k = x.floor() as usize;
        let f = x - k as f64;
        let g = |i: isize| self.values[i.unsigned_abs()];
        let k = k as isize;
        let (a, b, c, d) = (g(k - 1), g(k), g(k + 1), g(k + 2));
        -f * (f - 1.0) * (f - 2.0) / 6.0 * a + (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0 * b
            - (f + 1.0) * f * (f - 2.0) / 2.0 * c
            + (f + 1.0) * f * (f - 1.0) / 6.0 * d
    }
}

impl CarrierModel {
    pub fn new(eta_x: f64, eta_y: f64, ratio: f64) -> Result<Self> {
        for (name, v) in [("eta_x", eta_x), ("eta_y", eta_y)] {
            if !(0.0..1.0).contains(&v) {
                return Err(invalid(name, format!("must lie in [0, 1), got {v}")));
            }
        }
        if !(ratio >= 0.0 && ratio.is_finite()) {
            return Err(invalid(
                "ratio",
                format!("must be finite and >= 0, got {ratio}"),
            ));
        }
        Ok(Self {
            eta_x,
            eta_y,
            ratio,
            omitted_weight: 1e-6,
            ceiling: DEFAULT_CARRIER_CEILING,
            dw_x: Vec::new(),
            dw_y: Vec::new(),
        })
    }

    pub fn with_truncation(mut self, omitted_weight: f64, ceiling: usize) -> Self {
        self.omitted_weight = omitted_weight;
        self.ceiling = ceiling;
        self.dw_x.clear();
        self.dw_y.clear();
        self
    }

    fn factors(&self, eta: f64, cached: &[f64], n: usize) -> Vec<f64> {
        if cached.len() > n {
            cached[..=n].to_vec()
        } else {
            debye_waller_factors(eta, n)
        }
    }

    /// Caches Debye–Waller factors up to the ceiling.
    pub fn precompute(&mut self) {
        self.dw_x = debye_waller_factors(self.eta_x, self.ceiling);
        self.dw_y = debye_waller_factors(self.eta_y, self.ceiling);
    }

    /// Bright fraction Σ p_{n_x}p_{n_y} sin²(Ω_{n_x n_y}t/2) at each time.
    pub fn signal(&self, nbar_x: f64, omega0: f64, times: &[f64]) -> Result<CarrierSignal> {
        if !(nbar_x >= 0.0 && nbar_x.is_finite()) {
            return Err(invalid(
                "nbar_x",
                format!("must be finite and >= 0, got {nbar_x}"),
            ));
        }
        let half = 0.5 * self.omitted_weight;
        let (wx, ox) = truncated_thermal(nbar_x, self.eta_x, half, self.ceiling)?;
        let (wy, oy) = truncated_thermal(self.ratio * nbar_x, self.eta_y, half, self.ceiling)?;
        let ax = self.factors(self.eta_x, &self.dw_x, wx.len() - 1);
        let ay = self.factors(self.eta_y, &self.dw_y, wy.len() - 1);
        let omitted = 1.0 - (1.0 - ox) * (1.0 - oy);

        let values = flop_sum(&wx, &ax, &wy, &ay, omega0, times);
        Ok(CarrierSignal { values, omitted })
    }

    /// Flop of an arbitrary x-mode distribution, with the y mode thermal
    /// at r times its mean.
    pub fn signal_for(
        &self,
        px: &FockDistribution,
        omega0: f64,
        times: &[f64],
    ) -> Result<CarrierSignal> {
        let half = 0.5 * self.omitted_weight;
        let (wy, oy) = truncated_thermal(self.ratio * px.mean(), self.eta_y, half, self.ceiling)?;
        let wx = px.probabilities();
        let ax = self.factors(self.eta_x, &self.dw_x, wx.len() - 1);
        let ay = self.factors(self.eta_y, &self.dw_y, wy.len() - 1);
        let values = flop_sum(wx, &ax, &wy, &ay, omega0, times);
        Ok(CarrierSignal {
            values,
            omitted: 1.0 - (1.0 - px.deficit()) * (1.0 - oy),
        })
    }
}

fn flop_sum(
    wx: &[f64],
    ax: &[f64],
    wy: &[f64],
    ay: &[f64],
    omega0: f64,
    times: &[f64],
) -> Vec<f64> {
    // Σ w cos(Ωt), then P = (W − Σ w cos)/2 with W the retained weight.
    let retained: f64 = wx.iter().sum::<f64>() * wy.iter().sum::<f64>();
    // Tabulate the mode with fewer levels as a function of phase and
    // look it up once per level of the other mode.
    let (small_w, small_f, big_w, big_f) = if wx.len() <= wy.len() {
        (wx, ax, wy, ay)
    } else {
        (wy, ay, wx, ax)
    };
    let u_max = omega0 * times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let table_len = (u_max / TABLE_STEP).ceil() as usize + 3;
    let direct_cost = wx.len() * wy.len() * times.len();
    let mut cos_sum = vec![0.0; times.len()];
    if direct_cost <= 4 * (table_len * small_w.len() + big_w.len() * times.len()) {
        for (px, fx) in wx.iter().zip(ax) {
            for (py, fy) in wy.iter().zip(ay) {
                let (w, theta) = (px * py, omega0 * fx * fy);
                for (s, &t) in cos_sum.iter_mut().zip(times) {
                    *s += w * (theta * t).cos();
                }
            }
        }
    } else {
        let table = CosineTable::new(small_w, small_f, table_len);
        for (pb, fb) in big_w.iter().zip(big_f) {
            for (s, &t) in cos_sum.iter_mut().zip(times) {
                *s += pb * table.eval(omega0 * fb * t);
            }
        }
    }
    cos_sum
        .iter()
        .map(|c| (0.5 * (retained - c)).clamp(0.0, 1.0))
        .collect()
}

/// Single-time convenience wrapper around [`CarrierModel::signal`].
pub fn carrier_signal_two_mode(
    nbar_x: f64,
    ratio: f64,
    omega0: f64,
    eta_x: f64,
    eta_y: f64,
    t: f64,
    ceiling: usize,
) -> Result<f64> {
    let model = CarrierModel::new(eta_x, eta_y, ratio)?.with_truncation(1e-6, ceiling);
    Ok(model.signal(nbar_x, omega0, &[t])?.values[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarrierFitOptions {
    /// Relative spread of the simplex objective at convergence.
    pub f_tol: f64,
    pub max_iter: usize,
    /// Multiplicative offsets of the Ω₀ starting points.
    pub starts: Vec<f64>,
    /// Levenberg–Marquardt polish steps after the simplex.
    pub polish_steps: usize,
}

impl Default for CarrierFitOptions {
    fn default() -> Self {
        Self {
            f_tol: 1e-6,
            max_iter: 400,
            starts: vec![0.8, 1.0, 1.2],
            polish_steps: 20,
        }
    }
}

/// Angular frequency of the strongest Fourier component of `y` on the
/// given schedule.
pub fn periodogram_peak(times: &[f64], y: &[f64]) -> Option<f64> {
    let span = times.last()? - times.first()?;
    if span <= 0.0 || times.len() < 4 {
        return None;
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let min_gap = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let w_lo = PI / span;
    let w_hi = PI / min_gap;
    let n = 4 * times.len() * 8;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..=n {
        let w = w_lo + (w_hi - w_lo) * k as f64 / n as f64;
        let (mut c, mut s) = (0.0, 0.0);
        for (&t, &v) in times.iter().zip(y) {
            let (sn, cs) = (w * t).sin_cos();
            c += (v - mean) * cs;
            s += (v - mean) * sn;
        }
        let p = c * c + s * s;
        if p > best.1 {
            best = (w, p);
        }
    }
    Some(best.0)
}

struct CarrierObjective<'a> {
    model: &'a CarrierModel,
    times: &'a [f64],
    y: Vec<f64>,
    sigma: Vec<f64>,
}

impl CarrierObjective<'_> {
    fn residuals(&self, omega0: f64, nbar: f64) -> Option<Vec<f64>> {
        if !(omega0 > 0.0 && nbar >= 0.0) {
            return None;
        }
        let s = self.model.signal(nbar, omega0, self.times).ok()?;
        Some(
            s.values
                .iter()
                .zip(&self.y)
                .zip(&self.sigma)
                .map(|((m, y), s)| (m - y) / s)
                .collect(),
        )
    }

    fn chi2(&self, omega0: f64, nbar: f64) -> f64 {
        self.residuals(omega0, nbar)
            .map_or(f64::INFINITY, |r| r.iter().map(|v| v * v).sum())
    }

    /// Forward-difference Jacobian of the residuals in (Ω₀, n̄).
    fn jacobian(&self, omega0: f64, nbar: f64, r0: &[f64]) -> Option<Vec<[f64; 2]>> {
        let h0 = 1e-6 * omega0;
        let h1 = 1e-6 * nbar.max(1e-2);
        let r_o = self.residuals(omega0 + h0, nbar)?;
        let r_n = self.residuals(omega0, nbar + h1)?;
        Some(
            r0.iter()
                .enumerate()
                .map(|(i, r)| [(r_o[i] - r) / h0, (r_n[i] - r) / h1])
                .collect(),
        )
    }
}

fn normal_equations(jac: &[[f64; 2]], r: &[f64]) -> (Matrix2<f64>, Vector2<f64>) {
    let mut jtj = Matrix2::zeros();
    let mut jtr = Vector2::zeros();
    for (j, &ri) in jac.iter().zip(r) {
        let v = Vector2::new(j[0], j[1]);
        jtj += v * v.transpose();
        jtr += v * ri;
    }
    (jtj, jtr)
}

/// Weighted least-squares fit of (Ω₀, n̄_x) to carrier flop data.
///
/// Starts the simplex at the periodogram peak (or the Rabi prior) scaled
/// by each entry of `options.starts`, keeps the best run, polishes it with
/// damped Gauss–Newton steps and takes uncertainties from (JᵀJ)⁻¹.
pub fn fit_carrier_nbar(
    data: &FlopDataset,
    model: &CarrierModel,
    options: &CarrierFitOptions,
) -> Result<FitResult> {
    if data.kind != ProbeKind::Carrier {
        return Err(invalid("data", "carrier fit needs carrier data"));
    }
    if data.len() < 10 {
        return Err(invalid(
            "data",
            format!("need at least 10 points, got {}", data.len()),
        ));
    }
    let mut model = model.clone();
    if model.dw_x.is_empty() {
        model.precompute();
    }
    let y = data.fractions();
    let objective = CarrierObjective {
        model: &model,
        times: &data.durations,
        y,
        sigma: data.std_errs(),
    };
    let center = match data.rabi_prior {
        Some(w) => w,
        None => periodogram_peak(&data.durations, &objective.y)
            .ok_or_else(|| invalid("data", "durations do not span a positive interval"))?,
    };

    let mut best: Option<(Vec<f64>, f64, Vec<f64>)> = None;
    let (mut iterations, mut evaluations) = (0, 0);
    for &factor in &options.starts {
        let w0 = center * factor;
        // Coarse n̄ scan at this Ω₀ for the simplex start.
        let nbar0 = [0.0, 1.0, 3.0, 8.0, 20.0, 50.0]
            .into_iter()
            .min_by(|a, b| objective.chi2(w0, *a).total_cmp(&objective.chi2(w0, *b)))
            .unwrap();
        evaluations += 6;
        // Simplex coordinates: Ω₀ relative to the start, √n̄.
        let run = nelder_mead(
            |x| objective.chi2(w0 * x[0], x[1] * x[1]),
            &[1.0, nbar0.sqrt()],
            &[0.02, 0.5],
            options.f_tol,
            options.max_iter,
        );
        iterations += run.iterations;
        evaluations += run.evaluations;
        let x = vec![w0 * run.x[0], run.x[1] * run.x[1]];
        if best.as_ref().is_none_or(|b| run.fx < b.1) {
            best = Some((x, run.fx, run.trace));
        }
    }
    let (mut x, mut fx, mut trace) = best.expect("at least one start");
    if !fx.is_finite() {
        return Err(Error::NonConvergence {
            best_objective: fx,
            reason: "no start gave a finite objective".into(),
        });
    }

    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..options.polish_steps {
        let r = objective.residuals(x[0], x[1]).expect("finite point");
        let Some(jac) = objective.jacobian(x[0], x[1], &r) else {
            break;
        };
        evaluations += 3;
        let (jtj, jtr) = normal_equations(&jac, &r);
        let mut damped = jtj;
        damped[(0, 0)] *= 1.0 + lambda;
        damped[(1, 1)] *= 1.0 + lambda;
        let Some(step) = damped.lu().solve(&(-jtr)) else {
            break;
        };
        let trial = [x[0] + step[0], (x[1] + step[1]).max(0.0)];
        let ft = objective.chi2(trial[0], trial[1]);
        evaluations += 1;
        if ft < fx {
            let gain = fx - ft;
            x = trial.to_vec();
            fx = ft;
            trace.push(fx);
            lambda *= 0.3;
            if gain <= 1e-10 * (fx + 1e-10) {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e8 {
                converged = true;
                break;
            }
        }
    }

    let residuals = objective.residuals(x[0], x[1]).expect("finite point");
    let jac = objective
        .jacobian(x[0], x[1], &residuals)
        .ok_or_else(|| Error::NonConvergence {
            best_objective: fx,
            reason: "Jacobian left the admissible region".into(),
        })?;
    let (jtj, jtr) = normal_equations(&jac, &residuals);
    let cov = jtj
        .try_inverse()
        .unwrap_or_else(|| Matrix2::from_element(f64::NAN));
    let sigma = [cov[(0, 0)].max(0.0).sqrt(), cov[(1, 1)].max(0.0).sqrt()];
    // ∇χ² = 2Jᵀr, expressed per 1σ of each parameter and projected onto
    // the feasible side of n̄ = 0.
    let dn = if x[1] == 0.0 && jtr[1] > 0.0 {
        0.0
    } else {
        jtr[1]
    };
    let grad = 2.0 * Vector2::new(jtr[0] * sigma[0], dn * sigma[1]);
    Ok(FitResult {
        parameters: vec![
            FitParameter {
                name: "omega0".into(),
                value: x[0],
                uncertainty: sigma[0],
            },
            FitParameter {
                name: "nbar_x".into(),
                value: x[1],
                uncertainty: sigma[1],
            },
        ],
        residuals,
        objective: fx,
        converged,
        iterations,
        evaluations,
        objective_trace: trace,
        gradient_norm: Some(grad.norm()),
    })
}
