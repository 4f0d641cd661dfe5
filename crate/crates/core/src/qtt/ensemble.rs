//! Trajectory averaging.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trajectory::{validate_grid, Propagator, TrajectorySeed};
use super::NoiseSource;
use crate::error::{invalid, Result};
use crate::physics::{displaced_fock_table, FockDistribution};

/// Initial levels lighter than this are skipped in the readout.
const INITIAL_WEIGHT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleOptions {
    /// Levels 0..readout_levels are reconstructed per sample.
    pub readout_levels: usize,
    /// `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Trajectories per work unit; fixes the summation order.
    pub chunk: usize,
    /// Readout weight missing from the reconstructed levels that raises
    /// the truncation flag.
    pub deficit_warning: f64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            readout_levels: 40,
            workers: None,
            chunk: 50,
            deficit_warning: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    /// Trajectory-averaged populations of levels 0..readout_levels.
    pub populations: Vec<FockDistribution>,
    pub population_se: Vec<Vec<f64>>,
    /// n̄₀ + ⟨|α|²⟩.
    pub nbar: Vec<f64>,
    pub nbar_se: Vec<f64>,
    /// Mean scattering event count per time.
    pub mean_events: Vec<f64>,
    pub n_traj: usize,
    /// Largest per-time mean readout deficit.
    pub max_deficit: f64,
    pub truncation_flag: bool,
}

#[derive(Clone)]
struct Moments {
    pop: Vec<f64>,
    pop_sq: Vec<f64>,
    nbar: Vec<f64>,
    nbar_sq: Vec<f64>,
    events: Vec<f64>,
}

impl Moments {
    fn zeros(times: usize, levels: usize) -> Self {
        Self {
            pop: vec![0.0; times * levels],
            pop_sq: vec![0.0; times * levels],
            nbar: vec![0.0; times],
            nbar_sq: vec![0.0; times],
            events: vec![0.0; times],
        }
    }

    fn add(&mut self, other: &Self) {
        for (a, b) in [
            (&mut self.pop, &other.pop),
            (&mut self.pop_sq, &other.pop_sq),
            (&mut self.nbar, &other.nbar),
            (&mut self.nbar_sq, &other.nbar_sq),
            (&mut self.events, &other.events),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

fn mean_se(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Averages `n_traj` trajectories started from `initial`.
///
/// Trajectory `i` draws from stream `i` of the generator seeded by
/// `master_seed`, and partial sums are combined in index order, so the
/// result does not depend on the worker count. The Doppler term of a
/// scattering source starts from the mean of `initial`.
pub fn ensemble_average(
    initial: &FockDistribution,
    source: &NoiseSource,
    t_grid: &[f64],
    n_traj: usize,
    master_seed: u64,
    options: &EnsembleOptions,
) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(invalid("n_traj", "need at least one trajectory"));
    }
    if options.readout_levels == 0 {
        return Err(invalid("readout_levels", "must be >= 1"));
    }
    if options.chunk == 0 {
        return Err(invalid("chunk", "must be >= 1"));
    }
    validate_grid(t_grid)?;
    let prop = Propagator::new(source)?;
    let levels = options.readout_levels;
    let n_t = t_grid.len();
    let n0 = initial.mean();
    let support: Vec<(usize, f64)> = initial
        .probabilities()
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, p)| *p > INITIAL_WEIGHT_FLOOR)
        .collect();
    let cols = support.last().map_or(1, |&(m, _)| m + 1);

    let run_chunk = |c: usize| -> Result<Moments> {
        let mut acc = Moments::zeros(n_t, levels);
        let mut row = vec![0.0; levels];
        let mut err = None;
        let start = c * options.chunk;
        let end = (start + options.chunk).min(n_traj);
        for idx in start..end {
            let mut rng = TrajectorySeed::new(master_seed, idx as u64).rng();
            prop.run(&mut rng, n0, t_grid, None, |i, alpha, events| {
                let a2 = alpha.norm_sqr();
                row.iter_mut().for_each(|x| *x = 0.0);
                match displaced_fock_table(a2, levels, cols) {
                    Ok(table) => {
                        for (n, r) in row.iter_mut().enumerate() {
                            let t = &table[n * cols..(n + 1) * cols];
                            *r = support.iter().map(|&(m, pm)| pm * t[m]).sum();
                        }
                    }
                    Err(e) => err = Some(e),
                }
                let base = i * levels;
                for (n, &r) in row.iter().enumerate() {
                    acc.pop[base + n] += r;
                    acc.pop_sq[base + n] += r * r;
                }
                let nb = n0 + a2;
                acc.nbar[i] += nb;
                acc.nbar_sq[i] += nb * nb;
                acc.events[i] += events as f64;
            });
            if let Some(e) = err.take() {
                return Err(e);
            }
        }
        Ok(acc)
    };

    let chunks = n_traj.div_ceil(options.chunk);
    let partials: Vec<Result<Moments>> = match options.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| invalid("workers", e.to_string()))?;
            pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect())
        }
        None => (0..chunks).into_par_iter().map(run_chunk).collect(),
    };
    let mut total = Moments::zeros(n_t, levels);
    for p in partials {
        total.add(&p?);
    }

    let mut populations = Vec::with_capacity(n_t);
    let mut population_se = Vec::with_capacity(n_t);
    let mut max_deficit: f64 = 0.0;
    let (mut nbar, mut nbar_se) = (Vec::with_capacity(n_t), Vec::with_capacity(n_t));
    for i in 0..n_t {
        let (mut probs, mut se) = (Vec::with_capacity(levels), Vec::with_capacity(levels));
        for n in 0..levels {
            let (m, s) = mean_se(
                total.pop[i * levels + n],
                total.pop_sq[i * levels + n],
                n_traj,
            );
            probs.push(m.max(0.0));
            se.push(s);
        }
        let dist = FockDistribution::with_tolerance(probs, 1e-9)?;
        max_deficit = max_deficit.max(dist.deficit());
        populations.push(dist);
        population_se.push(se);
        let (m, s) = mean_se(total.nbar[i], total.nbar_sq[i], n_traj);
        nbar.push(m);
        nbar_se.push(s);
    }
    Ok(EnsembleResult {
        times: t_grid.to_vec(),
        populations,
        population_se,
        nbar,
        nbar_se,
        mean_events: total.events.iter().map(|e| e / n_traj as f64).collect(),
        n_traj,
        max_deficit,
        truncation_flag: max_deficit > options.deficit_warning,
    })
}
