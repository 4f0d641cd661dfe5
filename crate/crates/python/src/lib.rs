//! Python bindings for the `ion_heating` library.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ion_heating::bath::{self, BathParams};
use ion_heating::constants::hz_to_rad;
use ion_heating::data::{FlopDataset, ProbeKind};
use ion_heating::physics::{self, FockDistribution, IonSpecies, LaserConfig, TrapConfig};
use ion_heating::qtt::{self, ContinuousNoise, EnsembleOptions, NoiseSource};
use ion_heating::scattering::{self, ScatterModel};
use ion_heating::thermometry::{self, CarrierFitOptions, CarrierModel, SvdOptions};

fn py_err(e: ion_heating::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn model(detuning_hz: f64, saturation: f64) -> PyResult<ScatterModel> {
    let laser = LaserConfig::default()
        .with_detuning(hz_to_rad(detuning_hz))
        .with_saturation(saturation);
    ScatterModel::new(IonSpecies::yb171(), laser).map_err(py_err)
}

/// Photon scattering rate Γ in 1/s for ¹⁷¹Yb⁺.
#[pyfunction]
#[pyo3(signature = (detuning_hz = 0.0, saturation = 1.27))]
fn scattering_rate(detuning_hz: f64, saturation: f64) -> PyResult<f64> {
    model(detuning_hz, saturation)?
        .scattering_rate()
        .map_err(py_err)
}

/// Doppler-limited n̄, or None when the detuning heats without bound.
#[pyfunction]
#[pyo3(signature = (detuning_hz, saturation = 1.27))]
fn steady_state_nbar(detuning_hz: f64, saturation: f64) -> PyResult<Option<f64>> {
    scattering::steady_state_nbar(&model(detuning_hz, saturation)?, &TrapConfig::default())
        .map_err(py_err)
}

#[pyfunction]
fn displaced_fock_prob(n: usize, m: usize, alpha_sq: f64) -> PyResult<f64> {
    physics::displaced_fock_prob(n, m, alpha_sq).map_err(py_err)
}

#[pyfunction]
fn thermal_distribution(nbar: f64, n_max: usize) -> PyResult<Vec<f64>> {
    Ok(physics::thermal_distribution(nbar, n_max)
        .map_err(py_err)?
        .into_probabilities())
}

/// Fock populations after `t` seconds of heating at `heating_rate` quanta/s.
#[pyfunction]
fn bath_propagate(initial: Vec<f64>, heating_rate: f64, t: f64) -> PyResult<Vec<f64>> {
    let init = FockDistribution::new(initial).map_err(py_err)?;
    let params = BathParams::new(heating_rate, t).map_err(py_err)?;
    Ok(bath::bath_propagate(&init, params)
        .map_err(py_err)?
        .distribution
        .into_probabilities())
}

/// Field-noise trajectory ensemble started in the ground state.
#[pyfunction]
#[pyo3(signature = (heating_rate, times, trajectories = 1000, seed = 0, readout_levels = 40))]
fn ambient_ensemble<'py>(
    py: Python<'py>,
    heating_rate: f64,
    times: Vec<f64>,
    trajectories: usize,
    seed: u64,
    readout_levels: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let trap = TrapConfig::default();
    let noise = ContinuousNoise::from_heating_rate(
        heating_rate,
        qtt::DEFAULT_STEP,
        trap.secular_frequency,
        IonSpecies::yb171().mass,
    )
    .map_err(py_err)?;
    let options = EnsembleOptions {
        readout_levels,
        ..Default::default()
    };
    let r = qtt::ensemble_average(
        &FockDistribution::ground(0),
        &NoiseSource::Continuous(noise),
        &times,
        trajectories,
        seed,
        &options,
    )
    .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("times", r.times)?;
    out.set_item("nbar", r.nbar)?;
    out.set_item("nbar_se", r.nbar_se)?;
    let pops: Vec<Vec<f64>> = r
        .populations
        .into_iter()
        .map(|p| p.into_probabilities())
        .collect();
    out.set_item("populations", pops)?;
    out.set_item("population_se", r.population_se)?;
    Ok(out)
}

fn flop(
    times: Vec<f64>,
    counts: Vec<u64>,
    shots: Vec<u64>,
    kind: ProbeKind,
) -> PyResult<FlopDataset> {
    FlopDataset::new(times, counts, shots, kind).map_err(py_err)
}

/// Fock populations from one blue-sideband flop.
#[pyfunction]
#[pyo3(signature = (times, counts, shots, levels, omega0, eta, bootstrap = 1000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn svd_populations<'py>(
    py: Python<'py>,
    times: Vec<f64>,
    counts: Vec<u64>,
    shots: Vec<u64>,
    levels: usize,
    omega0: f64,
    eta: f64,
    bootstrap: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let data = flop(times, counts, shots, ProbeKind::BlueSideband)?;
    let options = SvdOptions {
        bootstrap,
        seed,
        ..Default::default()
    };
    let est = thermometry::svd_populations(&data, levels, omega0, eta, &options).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("point", est.point)?;
    out.set_item("median", est.median)?;
    out.set_item("low", est.low)?;
    out.set_item("high", est.high)?;
    out.set_item("residual_norm", est.residual_norm)?;
    Ok(out)
}

/// (Ω₀, n̄_x) from a carrier flop with the default two-mode trap.
#[pyfunction]
fn fit_carrier<'py>(
    py: Python<'py>,
    times: Vec<f64>,
    counts: Vec<u64>,
    shots: Vec<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let data = flop(times, counts, shots, ProbeKind::Carrier)?;
    let trap = TrapConfig::default();
    let model = CarrierModel::new(
        trap.lamb_dicke_x,
        trap.lamb_dicke_y,
        trap.mode_frequency_ratio,
    )
    .map_err(py_err)?;
    let fit = thermometry::fit_carrier_nbar(&data, &model, &CarrierFitOptions::default())
        .map_err(py_err)?;
    let out = PyDict::new(py);
    for p in &fit.parameters {
        out.set_item(p.name.as_str(), (p.value, p.uncertainty))?;
    }
    out.set_item("converged", fit.converged)?;
    Ok(out)
}

#[pymodule]
pub fn ion_heating_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(scattering_rate, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state_nbar, m)?)?;
    m.add_function(wrap_pyfunction!(displaced_fock_prob, m)?)?;
    m.add_function(wrap_pyfunction!(thermal_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(bath_propagate, m)?)?;
    m.add_function(wrap_pyfunction!(ambient_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(svd_populations, m)?)?;
    m.add_function(wrap_pyfunction!(fit_carrier, m)?)?;
    Ok(())
}
