//! Browser front end for the `ris-isac` simulator.
//!
//! Every export takes a JSON object of scenario overrides (any subset of the
//! scenario keys) layered on top of a browser-sized preset, and returns a
//! JSON string. Errors come back as `"<kind>: <message>"` strings.

use serde_json::{json, Map, Value};
use wasm_bindgen::prelude::*;

use ris_isac::harness::{Scenario, Scheme};
use ris_isac::numerics::hermitian_eig;
use ris_isac::ScenarioConfig;

/// Small arrays and short Monte Carlo runs so a sweep finishes in seconds
/// on a single browser thread.
pub fn preset() -> ScenarioConfig {
    ScenarioConfig {
        tx_horizontal: 4,
        tx_vertical: 4,
        ris_horizontal: 6,
        ris_vertical: 6,
        alpha: 0.01,
        trials_calibration: 5_000,
        trials_detection: 1_000,
        scattering_samples: 10_000,
        snr_grid_db: (0..7).map(|i| -50.0 + 5.0 * i as f64).collect(),
        ..ScenarioConfig::default()
    }
}

fn fail(e: ris_isac::Error) -> String {
    format!("{}: {e}", e.kind())
}

fn merged_config(overrides: &str) -> Result<ScenarioConfig, String> {
    let mut base = serde_json::to_value(preset()).expect("preset serializes");
    if !overrides.trim().is_empty() {
        let patch: Map<String, Value> =
            serde_json::from_str(overrides).map_err(|e| format!("json: {e}"))?;
        let obj = base.as_object_mut().expect("config is an object");
        for (k, v) in patch {
            obj.insert(k, v);
        }
    }
    let cfg: ScenarioConfig = serde_json::from_value(base).map_err(|e| format!("config: {e}"))?;
    cfg.validate().map_err(fail)?;
    Ok(cfg)
}

#[wasm_bindgen]
pub fn demo_defaults() -> String {
    serde_json::to_string(&preset()).expect("preset serializes")
}

/// Sensing gain `pᴴCp` and communication SNR of every scheme at one SNR.
#[wasm_bindgen]
pub fn compare_schemes(overrides: &str, snr_db: f64) -> Result<String, String> {
    let cfg = merged_config(overrides)?;
    let scenario = Scenario::build(&cfg).map_err(fail)?;
    let mut rows = Vec::new();
    let mut phases = Vec::new();
    for scheme in [Scheme::NoRis, Scheme::RandomRis, Scheme::Optimized] {
        let setup = scenario.configure(scheme, snr_db).map_err(fail)?;
        if scheme == Scheme::Optimized {
            phases = setup.phases.as_slice().to_vec();
        }
        rows.push(json!({
            "scheme": scheme.name(),
            "sensing_gain": setup.precoder.objective,
            "comm_snr": setup.precoder.comm_snr,
            "case_fired": setup.precoder.case_fired,
        }));
    }
    Ok(json!({
        "snr_db": snr_db,
        "gamma_th": cfg.gamma_th,
        "ris_shape": [cfg.ris_horizontal, cfg.ris_vertical],
        "optimized_phases": phases,
        "schemes": rows,
    })
    .to_string())
}

/// Eigenvalues of the clutter correlation, largest first, and the rank the
/// detector keeps.
#[wasm_bindgen]
pub fn clutter_spectrum(overrides: &str) -> Result<String, String> {
    let cfg = merged_config(overrides)?;
    let scenario = Scenario::build(&cfg).map_err(fail)?;
    let eig = hermitian_eig(&scenario.template.clutter_corr).map_err(fail)?;
    let values: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    Ok(json!({
        "eigenvalues": values,
        "rank": scenario.subspace.rank(),
        "capped": scenario.subspace.capped,
        "energy_fraction": cfg.clutter_energy_frac,
    })
    .to_string())
}

/// Detection probability of all four schemes over the configured SNR grid.
#[wasm_bindgen]
pub fn detection_curve(overrides: &str) -> Result<String, String> {
    let cfg = merged_config(overrides)?;
    let table = ris_isac::run_curve(&cfg).map_err(fail)?;
    Ok(json!({ "alpha": cfg.alpha, "rows": table.rows }).to_string())
}
