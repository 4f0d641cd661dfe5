//! Single phase-space histories.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use super::kicks::{gaussian_kick, Kicker};
use super::NoiseSource;
use crate::error::{invalid, Result};

/// Stream `index` of the generator seeded by `master`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrajectorySeed {
    pub master: u64,
    pub index: u64,
}

impl TrajectorySeed {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        crate::rng::stream_rng(self.master, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KickKind {
    Field,
    Scatter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KickRecord {
    pub time: f64,
    pub kick: Complex64,
    pub kind: KickKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub alpha: Complex64,
    pub n_eff: f64,
    /// Scattering events up to this time.
    pub scatter_events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: TrajectorySeed,
    pub n_init: f64,
    /// Displacement at the last sample time.
    pub alpha_total: Complex64,
    pub n_eff: f64,
    pub samples: Vec<TrajectorySample>,
    pub events: Option<Vec<KickRecord>>,
}

fn check_times(t_final: f64, sample_times: &[f64]) -> Result<()> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(invalid(
            "t_final",
            format!("must be finite and >= 0, got {t_final}"),
        ));
    }
    let mut prev = f64::NEG_INFINITY;
    for &t in sample_times {
        if !(t >= 0.0 && t <= t_final) {
            return Err(invalid(
                "sample_times",
                format!("{t} lies outside [0, {t_final}]"),
            ));
        }
        if t < prev {
            return Err(invalid("sample_times", "must be non-decreasing"));
        }
        prev = t;
    }
    Ok(())
}

/// Validated sources plus the per-run constants.
pub(crate) struct Propagator {
    field_step: Option<(f64, f64)>,
    scatter: Option<(Exp<f64>, Kicker)>,
}

impl Propagator {
    pub(crate) fn new(source: &NoiseSource) -> Result<Self> {
        let field_step = source.continuous().map(|c| (c.step, c.mean_kick_sq()));
        let scatter = match source.discrete() {
            Some(d) if d.event_rate()? > 0.0 => {
                let rate = d.event_rate()?;
                let exp = Exp::new(rate).map_err(|e| invalid("scattering_rate", e.to_string()))?;
                Some((exp, d.kicker()?))
            }
            _ => None,
        };
        Ok(Self {
            field_step,
            scatter,
        })
    }

    /// Visits the state at each sample time.
    pub(crate) fn run<R: Rng, F: FnMut(usize, Complex64, u64)>(
        &self,
        rng: &mut R,
        n_init: f64,
        sample_times: &[f64],
        mut log: Option<&mut Vec<KickRecord>>,
        mut visit: F,
    ) {
        let mut alpha = Complex64::new(0.0, 0.0);
        let mut field_done: u64 = 0;
        let mut events: u64 = 0;
        let mut next_scatter = match &self.scatter {
            Some((exp, _)) => rng.sample(exp),
            None => f64::INFINITY,
        };
        for (i, &ts) in sample_times.iter().enumerate() {
            let field_due = match self.field_step {
                Some((step, _)) => (ts / step * (1.0 + 1e-12)).floor() as u64,
                None => 0,
            };
            loop {
                let t_field = match self.field_step {
                    Some((step, _)) if field_done < field_due => (field_done + 1) as f64 * step,
                    _ => f64::INFINITY,
                };
                let scatter_due = next_scatter <= ts;
                if t_field.is_infinite() && !scatter_due {
                    break;
                }
                if scatter_due && next_scatter < t_field {
                    let (exp, kicker) =
                        self.scatter.as_ref().expect("scatter event without source");
                    let t = next_scatter;
                    let k = kicker.kick(rng, n_init + alpha.norm_sqr(), t);
                    alpha += k;
                    events += 1;
                    if let Some(log) = log.as_deref_mut() {
                        log.push(KickRecord {
                            time: t,
                            kick: k,
                            kind: KickKind::Scatter,
                        });
                    }
                    next_scatter = t + rng.sample(exp);
                } else {
                    let (_, var) = self.field_step.expect("field kick without source");
                    let k = gaussian_kick(rng, var);
                    alpha += k;
                    field_done += 1;
                    if let Some(log) = log.as_deref_mut() {
                        log.push(KickRecord {
                            time: t_field,
                            kick: k,
                            kind: KickKind::Field,
                        });
                    }
                }
            }
            visit(i, alpha, events);
        }
    }
}

/// Runs one trajectory and records it at `sample_times`.
///
/// `n_init` is the phonon number the Doppler term sees before any kick.
pub fn run_trajectory(
    n_init: f64,
    source: &NoiseSource,
    t_final: f64,
    sample_times: &[f64],
    seed: TrajectorySeed,
    log_events: bool,
) -> Result<Trajectory> {
    if !(n_init >= 0.0 && n_init.is_finite()) {
        return Err(invalid(
            "n_init",
            format!("must be finite and >= 0, got {n_init}"),
        ));
    }
    check_times(t_final, sample_times)?;
    let prop = Propagator::new(source)?;
    let mut rng = seed.rng();
    let mut log = log_events.then(Vec::new);
    let mut samples = Vec::with_capacity(sample_times.len());
    prop.run(
        &mut rng,
        n_init,
        sample_times,
        log.as_mut(),
        |i, alpha, events| {
            samples.push(TrajectorySample {
                time: sample_times[i],
                alpha,
                n_eff: n_init + alpha.norm_sqr(),
                scatter_events: events,
            });
        },
    );
    let alpha_total = samples.last().map_or(Complex64::new(0.0, 0.0), |s| s.alpha);
    Ok(Trajectory {
        seed,
        n_init,
        alpha_total,
        n_eff: n_init + alpha_total.norm_sqr(),
        samples,
        events: log,
    })
}

pub(crate) fn validate_grid(t_grid: &[f64]) -> Result<()> {
    let t_final = t_grid.last().copied().unwrap_or(0.0);
    check_times(t_final, t_grid)
}
