use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, Direction, ScatteringModel};
use crate::detector::RankRule;
use crate::error::{Error, Result};
use crate::sensing::RcsVariances;

/// How detector thresholds are tied to sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// One threshold per (scheme, sweep point), each calibrated to alpha.
    #[default]
    PerPoint,
    /// One threshold per scheme from the pooled null statistics of all sweep
    /// points, so the false-alarm rate averaged over the sweep equals alpha.
    Pooled,
}

/// Every scalar of a simulation run. Serialized as a flat JSON object;
/// directions are `[azimuth, elevation]` in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub tx_horizontal: usize,
    pub tx_vertical: usize,
    pub ris_horizontal: usize,
    pub ris_vertical: usize,
    /// Symbols per detection decision (L).
    pub symbols: usize,
    pub sigma2: f64,
    pub tx_power: f64,
    /// Communication SNR requirement (linear).
    pub gamma_th: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub alpha: f64,
    pub cnr_db: f64,
    pub snr_grid_db: Vec<f64>,
    pub rician_kappa_db: f64,
    pub clutter_energy_frac: f64,
    /// Fixed clutter subspace dimension; overrides the energy rule when set.
    pub clutter_rank: Option<usize>,
    pub trials_calibration: usize,
    pub trials_detection: usize,
    pub master_seed: u64,
    /// Per-element gain of the RIS cascade relative to the static path.
    pub ris_element_gain_db: f64,
    /// `P_t · gain / σ²` of the static UE channel.
    pub ue_snr_db: f64,
    pub ue_from_tx_deg: [f64; 2],
    pub target_from_tx_deg: [f64; 2],
    pub ue_from_ris_deg: [f64; 2],
    pub target_from_ris_deg: [f64; 2],
    pub ris_from_tx_deg: [f64; 2],
    pub tx_from_ris_deg: [f64; 2],
    pub sensing_clusters: usize,
    pub sensing_az_spread_deg: f64,
    pub sensing_el_spread_deg: f64,
    pub sensing_asd_deg: f64,
    pub clutter_clusters: usize,
    pub clutter_az_spread_deg: f64,
    pub clutter_el_spread_deg: f64,
    pub clutter_asd_deg: f64,
    pub scattering_samples: usize,
    pub threshold_mode: ThresholdMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            tx_horizontal: 6,
            tx_vertical: 6,
            ris_horizontal: 8,
            ris_vertical: 8,
            symbols: 5,
            sigma2: 1.0,
            tx_power: 1.0,
            gamma_th: 10.0,
            beta1: 0.1,
            beta2: 4.0,
            beta3: 1.0,
            alpha: 1e-3,
            cnr_db: 20.0,
            snr_grid_db: (0..11).map(|i| -60.0 + 5.0 * i as f64).collect(),
            rician_kappa_db: 10.0,
            clutter_energy_frac: 0.99,
            clutter_rank: None,
            trials_calibration: 200_000,
            trials_detection: 10_000,
            master_seed: 2024,
            ris_element_gain_db: -10.0,
            ue_snr_db: 0.0,
            ue_from_tx_deg: [60.0, -36.0],
            target_from_tx_deg: [30.0, -36.0],
            ue_from_ris_deg: [0.0, -36.0],
            target_from_ris_deg: [-45.0, -36.0],
            ris_from_tx_deg: [-45.0, 0.0],
            tx_from_ris_deg: [45.0, 0.0],
            sensing_clusters: 6,
            sensing_az_spread_deg: 40.0,
            sensing_el_spread_deg: 20.0,
            sensing_asd_deg: 10.0,
            clutter_clusters: 6,
            clutter_az_spread_deg: 20.0,
            clutter_el_spread_deg: 10.0,
            clutter_asd_deg: 5.0,
            scattering_samples: 100_000,
            threshold_mode: ThresholdMode::PerPoint,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("tx_horizontal", self.tx_horizontal),
            ("tx_vertical", self.tx_vertical),
            ("ris_horizontal", self.ris_horizontal),
            ("ris_vertical", self.ris_vertical),
            ("symbols", self.symbols),
            ("trials_calibration", self.trials_calibration),
            ("trials_detection", self.trials_detection),
            ("sensing_clusters", self.sensing_clusters),
            ("clutter_clusters", self.clutter_clusters),
            ("scattering_samples", self.scattering_samples),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("sigma2", self.sigma2),
            ("tx_power", self.tx_power),
            ("sensing_asd_deg", self.sensing_asd_deg),
            ("clutter_asd_deg", self.clutter_asd_deg),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.gamma_th >= 0.0 && self.gamma_th.is_finite()) {
            return fail(format!("gamma_th must be nonnegative, got {}", self.gamma_th));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if [self.beta1, self.beta2, self.beta3]
            .iter()
            .any(|b| !(*b >= 0.0 && b.is_finite()))
        {
            return fail("RCS variances must be nonnegative".into());
        }
        if !(self.clutter_energy_frac > 0.0 && self.clutter_energy_frac <= 1.0) {
            return fail("clutter_energy_frac must lie in (0, 1]".into());
        }
        if self.snr_grid_db.iter().any(|x| !x.is_finite()) {
            return fail("snr_grid_db entries must be finite".into());
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return fail("snr_grid_db must be strictly increasing".into());
        }
        if let Some(r) = self.clutter_rank {
            if r == 0 || r >= self.antennas() {
                return fail(format!("clutter_rank must lie in [1, K-1], got {r}"));
            }
        }
        for d in [
            self.ue_from_tx_deg,
            self.target_from_tx_deg,
            self.ue_from_ris_deg,
            self.target_from_ris_deg,
            self.ris_from_tx_deg,
            self.tx_from_ris_deg,
        ] {
            self.direction(d)?;
        }
        Ok(())
    }

    pub fn antennas(&self) -> usize {
        self.tx_horizontal * self.tx_vertical
    }

    pub fn ris_elements(&self) -> usize {
        self.ris_horizontal * self.ris_vertical
    }

    pub fn tx_geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.tx_horizontal, self.tx_vertical, 0.5)
    }

    pub fn ris_geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.ris_horizontal, self.ris_vertical, 0.5)
    }

    pub fn direction(&self, deg: [f64; 2]) -> Result<Direction> {
        Direction::from_degrees(deg[0], deg[1])
    }

    pub fn betas(&self) -> RcsVariances {
        RcsVariances::new(self.beta1, self.beta2, self.beta3)
    }

    pub fn kappa(&self) -> f64 {
        db_to_linear(self.rician_kappa_db)
    }

    pub fn rank_rule(&self) -> RankRule {
        match self.clutter_rank {
            Some(r) => RankRule::Fixed(r),
            None => RankRule::EnergyFraction(self.clutter_energy_frac),
        }
    }

    pub fn sensing_scattering(&self) -> ScatteringModel {
        ScatteringModel {
            clusters: self.sensing_clusters,
            azimuth_spread: self.sensing_az_spread_deg.to_radians(),
            elevation_spread: self.sensing_el_spread_deg.to_radians(),
            angular_std: self.sensing_asd_deg.to_radians(),
            samples: self.scattering_samples,
        }
    }

    pub fn clutter_scattering(&self) -> ScatteringModel {
        ScatteringModel {
            clusters: self.clutter_clusters,
            azimuth_spread: self.clutter_az_spread_deg.to_radians(),
            elevation_spread: self.clutter_el_spread_deg.to_radians(),
            angular_std: self.clutter_asd_deg.to_radians(),
            samples: self.scattering_samples,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        let back = ScenarioConfig::from_json_str(&c.to_json_pretty()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.antennas(), 36);
        assert_eq!(c.ris_elements(), 64);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = ScenarioConfig::from_json_str(r#"{"cnr_db": 40, "symbols": 3}"#).unwrap();
        assert_eq!(c.cnr_db, 40.0);
        assert_eq!(c.symbols, 3);
        assert_eq!(c.beta2, 4.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ScenarioConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
        let bad = [
            ScenarioConfig { snr_grid_db: vec![-40.0, -50.0], ..Default::default() },
            ScenarioConfig { alpha: 1.0, ..Default::default() },
            ScenarioConfig { clutter_rank: Some(36), ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}
