//! The `ionheat` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::bath::{bath_propagate, fit_bath_rate, BathFitOptions, BathParams};
use crate::config::{RunConfig, TruthKind};
use crate::data::ProbeKind;
use crate::io::{fmt_f64, CsvError, InputTable, Table, SCHEMA_VERSION};
use crate::physics::FockDistribution;
use crate::qtt::{
    ensemble_average, ContinuousNoise, DiscreteNoise, EnsembleOptions, EnsembleResult, NoiseSource,
};
use crate::scattering::{detuning_scan, linear_heating_rate, DetuningEntry, ScanOptions};
use crate::synth::{generate_dataset, ExperimentSchedule, ProbeParams, TruthModel};
use crate::thermometry::{
    fit_carrier_nbar, fit_thermal_from_levels, svd_populations, CarrierFitOptions, CarrierModel,
    LevelEstimate, SvdOptions,
};

/// Floor on Monte Carlo standard errors entering the thermal fit.
const MIN_SE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numeric(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        Self::Numeric(e.to_string())
    }
}

impl From<CsvError> for CliError {
    fn from(e: CsvError) -> Self {
        Self::Io(e.to_string())
    }
}

fn config_err(e: crate::Error) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "ionheat",
    version,
    about = "Trapped-ion motional heating: simulation and thermometry fits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bath model and field-noise trajectories under ambient heating.
    AmbientSim,
    /// Dark and bright qubit-state branches during detection.
    MeasureSim,
    /// Rate-equation heating curves for a list of detunings.
    DetuningScan,
    /// Fit measured data.
    Fit {
        #[command(subcommand)]
        kind: FitCommand,
    },
    /// Synthetic flop datasets with shot noise.
    Synth,
    /// Print the effective configuration.
    ShowConfig,
}

#[derive(Debug, Subcommand)]
pub enum FitCommand {
    /// Heating rate from level populations (`time_s, counts, shots, level`).
    Bath {
        #[arg(long)]
        input: PathBuf,
    },
    /// Thermal n̄ per time from level populations.
    Thermal {
        #[arg(long)]
        input: PathBuf,
    },
    /// (Ω₀, n̄_x) from a carrier flop (`time_s, counts, shots`).
    Carrier {
        #[arg(long)]
        input: PathBuf,
    },
    /// Fock populations from blue-sideband flops, one file per delay.
    Svd {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
    },
}

/// Loaded configuration plus the metadata written into every file.
pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub config_hash: String,
}

impl Context {
    pub fn load(global: &GlobalArgs) -> Result<Self, CliError> {
        let mut config = match &global.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                RunConfig::from_toml(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = global.seed {
            config.run.seed = seed;
        }
        if let Some(w) = global.workers {
            config.run.workers = w;
        }
        config.validate().map_err(config_err)?;
        let mut hashed = config.clone();
        hashed.run.workers = 0;
        let config_hash = Sha256::digest(hashed.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Ok(Self {
            seed: config.run.seed,
            config,
            out: global.out.clone(),
            config_hash,
        })
    }

    fn table<S: Into<String>>(&self, command: &str, header: impl IntoIterator<Item = S>) -> Table {
        let mut t = Table::new(header);
        t.meta("schema_version", SCHEMA_VERSION)
            .meta("tool", concat!("ionheat ", env!("CARGO_PKG_VERSION")))
            .meta("command", command)
            .meta("seed", self.seed)
            .meta("config_sha256", &self.config_hash);
        t
    }

    fn write(&self, name: &str, table: &Table) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        table.write(&path)?;
        Ok(path)
    }

    fn ensemble_options(&self, readout_levels: usize) -> EnsembleOptions {
        EnsembleOptions {
            readout_levels,
            workers: None,
            chunk: self.config.run.chunk.max(1),
            ..Default::default()
        }
    }
}

fn linspace(end: f64, points: usize) -> Vec<f64> {
    ExperimentSchedule::uniform_durations(end, points)
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

/// Runs the parsed command; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let ctx = Context::load(&cli.global)?;
    let workers = ctx.config.run.workers;
    if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Config(format!("workers: {e}")))?;
        pool.install(|| dispatch(&cli.command, &ctx))
    } else {
        dispatch(&cli.command, &ctx)
    }
}

fn dispatch(command: &Command, ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::AmbientSim => ambient_sim(ctx),
        Command::MeasureSim => measure_sim(ctx),
        Command::DetuningScan => scan(ctx),
        Command::Fit { kind } => fit(ctx, kind),
        Command::Synth => synth(ctx),
        Command::ShowConfig => {
            print!("{}", ctx.config.to_toml());
            Ok(Vec::new())
        }
    }
}

fn continuous(ctx: &Context, rate: f64, step: f64) -> Result<ContinuousNoise, CliError> {
    let trap = ctx.config.trap().map_err(config_err)?;
    let species = ctx.config.species().map_err(config_err)?;
    ContinuousNoise::from_heating_rate(rate, step, trap.secular_frequency, species.mass)
        .map_err(config_err)
}

fn ambient_sim(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let c = &ctx.config.ambient;
    let initial = ctx.config.initial.distribution().map_err(config_err)?;
    let grid = linspace(c.t_max_s, c.points);
    let source = NoiseSource::Continuous(continuous(ctx, c.heating_rate, c.step_s)?);
    let qtt = ensemble_average(
        &initial,
        &source,
        &grid,
        c.trajectories,
        ctx.seed,
        &ctx.ensemble_options(c.readout_levels),
    )?;
    let bath = grid
        .iter()
        .map(|&t| Ok(bath_propagate(&initial, BathParams::new(c.heating_rate, t)?)?.distribution))
        .collect::<crate::Result<Vec<FockDistribution>>>()?;

    let mut pops = ctx.table(
        "ambient-sim",
        [
            "time_s",
            "level",
            "bath_population",
            "qtt_population",
            "qtt_std_err",
        ],
    );
    pops.meta("trajectories", c.trajectories)
        .meta("heating_rate_per_s", f(c.heating_rate));
    for (i, &t) in grid.iter().enumerate() {
        for n in 0..c.readout_levels {
            pops.push(vec![
                f(t),
                n.to_string(),
                f(bath[i].get(n)),
                f(qtt.populations[i].get(n)),
                f(qtt.population_se[i][n]),
            ]);
        }
    }
    let mut nbar = ctx.table(
        "ambient-sim",
        [
            "time_s",
            "bath_nbar",
            "qtt_nbar",
            "qtt_nbar_std_err",
            "linear_nbar",
        ],
    );
    nbar.meta("trajectories", c.trajectories)
        .meta("heating_rate_per_s", f(c.heating_rate));
    for (i, &t) in grid.iter().enumerate() {
        nbar.push(vec![
            f(t),
            f(bath[i].mean()),
            f(qtt.nbar[i]),
            f(qtt.nbar_se[i]),
            f(initial.mean() + c.heating_rate * t),
        ]);
    }
    Ok(vec![
        ctx.write("ambient_populations.csv", &pops)?,
        ctx.write("ambient_nbar.csv", &nbar)?,
    ])
}

fn thermal_column(r: &EnsembleResult, i: usize, levels: usize) -> (f64, f64) {
    let obs: Vec<LevelEstimate> = (0..levels.min(r.populations[i].len()))
        .map(|n| {
            LevelEstimate::new(
                n,
                r.populations[i].get(n),
                r.population_se[i][n].max(MIN_SE),
            )
        })
        .collect();
    match fit_thermal_from_levels(&obs) {
        Ok(fit) => (fit.value("nbar"), fit.uncertainty("nbar")),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

fn measure_sim(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let c = &ctx.config.measure;
    let initial = ctx.config.initial.distribution().map_err(config_err)?;
    let grid = linspace(c.t_max_s, c.points);
    let field = continuous(ctx, c.dark_heating_rate, c.step_s)?;
    let trap = ctx.config.trap().map_err(config_err)?;
    let model = ctx.config.scatter_model().map_err(config_err)?;
    let mut scatter = DiscreteNoise::new(model, trap);
    scatter.emission = c.emission;
    let levels = c.readout_levels.max(c.thermal_levels).max(3);
    let opts = ctx.ensemble_options(levels);
    let branches = [
        ("dark", NoiseSource::Continuous(field)),
        (
            "bright",
            NoiseSource::Combined {
                continuous: field,
                discrete: scatter,
            },
        ),
    ];
    let mut written = Vec::new();
    for (name, source) in branches {
        let r = ensemble_average(&initial, &source, &grid, c.trajectories, ctx.seed, &opts)?;
        let slope = source.initial_heating_rate()?;
        let mut t = ctx.table(
            "measure-sim",
            [
                "time_s",
                "p0",
                "p0_std_err",
                "p1",
                "p1_std_err",
                "p2",
                "p2_std_err",
                "nbar",
                "nbar_std_err",
                "thermal_nbar",
                "thermal_nbar_std_err",
                "linear_nbar",
                "mean_scatter_events",
            ],
        );
        t.meta("branch", name)
            .meta("trajectories", c.trajectories)
            .meta("initial_slope_per_s", f(slope))
            .meta(
                "scattering_linear_rate_per_s",
                f(linear_heating_rate(&model, &trap)?),
            );
        for (i, &time) in grid.iter().enumerate() {
            let (tn, ts) = thermal_column(&r, i, c.thermal_levels);
            let p = &r.populations[i];
            let se = &r.population_se[i];
            t.push(vec![
                f(time),
                f(p.get(0)),
                f(se[0]),
                f(p.get(1)),
                f(se[1]),
                f(p.get(2)),
                f(se[2]),
                f(r.nbar[i]),
                f(r.nbar_se[i]),
                f(tn),
                f(ts),
                f(initial.mean() + slope * time),
                f(r.mean_events[i]),
            ]);
        }
        written.push(ctx.write(&format!("measure_{name}.csv"), &t)?);
    }
    Ok(written)
}

fn scan(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let c = &ctx.config.scan;
    let model = ctx.config.scatter_model().map_err(config_err)?;
    let trap = ctx.config.trap().map_err(config_err)?;
    let initial = ctx.config.initial.distribution().map_err(config_err)?;
    let entries: Vec<DetuningEntry> = c
        .detunings
        .iter()
        .enumerate()
        .map(|(i, d)| DetuningEntry {
            detuning: d.rad_per_s(),
            saturation: c.saturations.get(i).copied(),
        })
        .collect();
    let options = ScanOptions {
        band: c.band.rad_per_s(),
        band_samples: c.band_samples,
        axis: c.axis,
        ceiling: c.ceiling,
    };
    let grid = linspace(c.axis_max, c.points);
    let curves = detuning_scan(&model, &entries, &trap, initial.mean(), &grid, &options)?;
    let mut header = vec![
        "detuning_hz",
        "saturation",
        "scattering_rate_hz",
        "axis",
        "time_s",
        "nbar",
        "nbar_low",
        "nbar_high",
        "doppler_warning",
        "above_ceiling",
    ];
    if c.trajectories > 0 {
        header.extend(["qtt_nbar", "qtt_nbar_std_err"]);
    }
    let mut t = ctx.table("detuning-scan", header);
    t.meta("axis", format!("{:?}", c.axis).to_lowercase()).meta(
        "band_hz",
        f(c.band.rad_per_s() / (2.0 * std::f64::consts::PI)),
    );
    for (k, curve) in curves.iter().enumerate() {
        let qtt = if c.trajectories > 0 {
            let m = model.with_laser(
                model
                    .laser
                    .with_detuning(curve.detuning)
                    .with_saturation(curve.saturation),
            )?;
            let source = NoiseSource::Discrete(DiscreteNoise::new(m, trap));
            let seed = ctx.seed.wrapping_add(k as u64);
            Some(ensemble_average(
                &initial,
                &source,
                &curve.times,
                c.trajectories,
                seed,
                &ctx.ensemble_options(c.readout_levels.max(1)),
            )?)
        } else {
            None
        };
        for i in 0..curve.times.len() {
            let mut row = vec![
                f(curve.detuning / (2.0 * std::f64::consts::PI)),
                f(curve.saturation),
                f(curve.scattering_rate / (2.0 * std::f64::consts::PI)),
                f(curve.curve.times[i]),
                f(curve.times[i]),
                f(curve.curve.values[i]),
                f(curve.curve.ci_low[i]),
                f(curve.curve.ci_high[i]),
                curve.doppler_warning.to_string(),
                curve.above_ceiling.to_string(),
            ];
            if let Some(q) = &qtt {
                row.extend([f(q.nbar[i]), f(q.nbar_se[i])]);
            }
            t.push(row);
        }
    }
    Ok(vec![ctx.write("detuning_scan.csv", &t)?])
}

fn fit_table(ctx: &Context, kind: &str, input: &Path, fit: &crate::fit::FitResult) -> Table {
    let mut t = ctx.table(
        &format!("fit {kind}"),
        [
            "parameter",
            "value",
            "uncertainty",
            "residual_norm",
            "objective",
            "converged",
            "gradient_norm",
        ],
    );
    t.meta("input", input.display());
    for p in &fit.parameters {
        t.push(vec![
            p.name.clone(),
            f(p.value),
            f(p.uncertainty),
            f(fit.residual_norm()),
            f(fit.objective),
            fit.converged.to_string(),
            fit.gradient_norm.map_or("nan".into(), f),
        ]);
    }
    t
}

fn fit(ctx: &Context, kind: &FitCommand) -> Result<Vec<PathBuf>, CliError> {
    let c = &ctx.config.fit;
    let trap = ctx.config.trap().map_err(config_err)?;
    match kind {
        FitCommand::Bath { input } => {
            let data = InputTable::read(input)?.population_dataset()?;
            let initial = ctx.config.initial.distribution().map_err(config_err)?;
            let opts = BathFitOptions {
                levels: c.levels.clone(),
                weighting: c.weighting,
                ..Default::default()
            };
            let fit = fit_bath_rate(&data, &initial, &opts)?;
            println!(
                "heating_rate = {} ± {} quanta/s",
                fit.value("heating_rate"),
                fit.uncertainty("heating_rate")
            );
            Ok(vec![ctx.write(
                "fit_bath.csv",
                &fit_table(ctx, "bath", input, &fit),
            )?])
        }
        FitCommand::Thermal { input } => {
            let data = InputTable::read(input)?.population_dataset()?;
            let mut t = ctx.table(
                "fit thermal",
                [
                    "time_s",
                    "nbar",
                    "uncertainty",
                    "residual_norm",
                    "converged",
                ],
            );
            t.meta("input", input.display());
            for time in data.times() {
                let obs: Vec<LevelEstimate> = data
                    .points
                    .iter()
                    .filter(|p| p.time == time)
                    .map(|p| LevelEstimate::new(p.level, p.population, p.std_err))
                    .collect();
                let fit = fit_thermal_from_levels(&obs)
                    .map_err(|e| CliError::Numeric(format!("time {time}: {e}")))?;
                println!(
                    "t = {time} s: nbar = {} ± {}",
                    fit.value("nbar"),
                    fit.uncertainty("nbar")
                );
                t.push(vec![
                    f(time),
                    f(fit.value("nbar")),
                    f(fit.uncertainty("nbar")),
                    f(fit.residual_norm()),
                    fit.converged.to_string(),
                ]);
            }
            Ok(vec![ctx.write("fit_thermal.csv", &t)?])
        }
        FitCommand::Carrier { input } => {
            let mut data = InputTable::read(input)?.flop_dataset(ProbeKind::Carrier)?;
            if c.rabi_prior {
                data = data.with_rabi_prior(c.rabi_frequency.rad_per_s());
            }
            let model = CarrierModel::new(
                trap.lamb_dicke_x,
                trap.lamb_dicke_y,
                trap.mode_frequency_ratio,
            )?;
            let opts = CarrierFitOptions {
                f_tol: c.f_tol,
                ..Default::default()
            };
            let fit = fit_carrier_nbar(&data, &model, &opts)?;
            println!(
                "nbar_x = {} ± {}",
                fit.value("nbar_x"),
                fit.uncertainty("nbar_x")
            );
            Ok(vec![ctx.write(
                "fit_carrier.csv",
                &fit_table(ctx, "carrier", input, &fit),
            )?])
        }
        FitCommand::Svd { input } => {
            let opts = SvdOptions {
                threshold: c.svd_threshold,
                bootstrap: c.bootstrap,
                seed: ctx.seed,
            };
            let mut t = ctx.table(
                "fit svd",
                [
                    "time_s",
                    "level",
                    "population",
                    "std_err",
                    "low",
                    "high",
                    "point",
                    "residual_norm",
                ],
            );
            t.meta("levels", c.svd_levels)
                .meta("bootstrap", c.bootstrap);
            for path in input {
                let table = InputTable::read(path)?;
                let delay: f64 = match table.metadata.get("delay_s") {
                    Some(v) => v.parse().map_err(|_| {
                        CliError::Io(format!("{}: bad delay_s `{v}`", path.display()))
                    })?,
                    None => 0.0,
                };
                let data = table.flop_dataset(ProbeKind::BlueSideband)?;
                let est = svd_populations(
                    &data,
                    c.svd_levels,
                    c.rabi_frequency.rad_per_s(),
                    trap.lamb_dicke_x,
                    &opts,
                )
                .map_err(|e| CliError::Numeric(format!("{}: {e}", path.display())))?;
                for n in 0..est.levels() {
                    t.push(vec![
                        f(delay),
                        n.to_string(),
                        f(est.median[n]),
                        f(0.5 * (est.high[n] - est.low[n])),
                        f(est.low[n]),
                        f(est.high[n]),
                        f(est.point[n]),
                        f(est.residual_norm),
                    ]);
                }
            }
            Ok(vec![ctx.write("fit_svd.csv", &t)?])
        }
    }
}

fn synth(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let c = &ctx.config.synth;
    let initial = ctx.config.initial.distribution().map_err(config_err)?;
    let trap = ctx.config.trap().map_err(config_err)?;
    let model = ctx.config.scatter_model().map_err(config_err)?;
    let truth = match c.truth {
        TruthKind::Bath => TruthModel::Bath {
            initial: initial.clone(),
            heating_rate: c.heating_rate,
        },
        TruthKind::Qtt => {
            let discrete = DiscreteNoise::new(model, trap);
            let source = if c.heating_rate > 0.0 {
                NoiseSource::Combined {
                    continuous: continuous(ctx, c.heating_rate, 1e-6)?,
                    discrete,
                }
            } else {
                NoiseSource::Discrete(discrete)
            };
            TruthModel::Qtt {
                initial: initial.clone(),
                source,
                trajectories: c.trajectories,
                options: ctx.ensemble_options(c.readout_levels),
            }
        }
        TruthKind::Eq7 => TruthModel::Eq7 {
            model,
            nbar0: initial.mean(),
            n_max: ctx.config.initial.n_max,
        },
    };
    let schedule = ExperimentSchedule {
        delays: c.delays_s.clone(),
        probe: c.probe,
        durations: linspace(c.pulse_t_max_s, c.pulse_points),
        shots: (c.shots > 0).then_some(c.shots),
        seed: ctx.seed,
    };
    let probe = ProbeParams {
        rabi_frequency: c.rabi_frequency.rad_per_s(),
        trap,
    };
    let sets = generate_dataset(&truth, &schedule, &probe)?;
    let probe_name = match c.probe {
        ProbeKind::Carrier => "carrier",
        ProbeKind::BlueSideband => "blue_sideband",
    };
    let mut written = Vec::new();
    let mut truth_table = ctx.table(
        "synth",
        ["delay_index", "delay_s", "nbar", "p0", "p1", "p2"],
    );
    truth_table
        .meta("truth", format!("{:?}", c.truth).to_lowercase())
        .meta("probe", probe_name);
    for (i, s) in sets.iter().enumerate() {
        let mut t = ctx.table("synth", ["time_s", "counts", "shots"]);
        t.meta("delay_index", i)
            .meta("delay_s", f(s.delay))
            .meta("probe", probe_name);
        for k in 0..s.data.len() {
            t.push(vec![
                f(s.data.durations[k]),
                s.data.counts[k].to_string(),
                s.data.shots[k].to_string(),
            ]);
        }
        written.push(ctx.write(&format!("synth_flop_{i:03}.csv"), &t)?);
        truth_table.push(vec![
            i.to_string(),
            f(s.delay),
            f(s.nbar),
            f(s.populations.get(0)),
            f(s.populations.get(1)),
            f(s.populations.get(2)),
        ]);
    }
    written.push(ctx.write("synth_truth.csv", &truth_table)?);
    Ok(written)
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(files) => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
