//! Scenario assembly and SNR sweeps comparing four transmit/detect schemes.

pub mod config;
pub mod output;
pub mod selftest;

pub use config::{db_to_linear, ScenarioConfig, ThresholdMode};
pub use output::{emit_csv, emit_json, format_sig, CurveRow, CurveTable, SchemePoint, CSV_HEADER};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelGains, ChannelSet, ChannelTemplate, RisPhases};
use crate::detector::{
    build_test_matrix, calibrate_threshold, empirical_threshold_with_ties,
    estimate_clutter_subspace, validate_threshold, Calibration, ClutterModel, ClutterSubspace,
    StatisticSampler,
};
use crate::error::{Error, Result};
use crate::montecarlo::{count_hits, derive_seed, sample_stats};
use crate::numerics::CMatrix;
use crate::optimizer::{optimize_phases, optimize_precoder, PrecoderSolution};
use crate::sensing::{gain_matrix, target_covariance};

const TAG_TEMPLATE: u64 = 1;
const TAG_RANDOM_PHASES: u64 = 2;
const TAG_CALIBRATION: u64 = 10;
const TAG_VALIDATION: u64 = 11;
const TAG_DETECTION: u64 = 12;

/// Gain budget for one sweep point.
///
/// The swept quantity is the two-way static SNR `P_t β1 ‖h̄_s2‖⁴ / σ²` with
/// `‖h̄_s2‖² = g_s K`. Each RIS element sees `g_s` scaled by
/// `ris_element_gain_db`; the UE path is fixed by `ue_snr_db`.
pub fn apply_snr_point(config: &ScenarioConfig, snr_db: f64) -> ChannelGains {
    let k = config.antennas() as f64;
    // with beta1 = 0 the static echo vanishes; normalize as if beta1 = 1
    let beta1 = if config.beta1 > 0.0 { config.beta1 } else { 1.0 };
    let static_target =
        (db_to_linear(snr_db) * config.sigma2 / (config.tx_power * beta1)).sqrt() / k;
    let element = db_to_linear(config.ris_element_gain_db);
    let ue_static = config.sigma2 * db_to_linear(config.ue_snr_db) / config.tx_power;
    ChannelGains {
        static_target,
        ris_target: static_target * element,
        ue_static,
        ue_ris: ue_static * element,
        tx_ris: 1.0,
        nlos_fraction: 1.0 / config.kappa(),
    }
}

/// The compared transmit/detect combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// RIS removed, optimized precoder, clutter-aware detector.
    NoRis,
    /// Fixed random RIS phases, optimized precoder, clutter-aware detector.
    RandomRis,
    /// Co-phased RIS, optimized precoder, clutter-aware detector.
    Optimized,
    /// Same transmit side as `Optimized`, clutter-unaware detector.
    ClutterUnaware,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::NoRis,
        Scheme::RandomRis,
        Scheme::Optimized,
        Scheme::ClutterUnaware,
    ];

    pub fn id(self) -> u64 {
        self as u64
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::NoRis => "no_ris",
            Scheme::RandomRis => "random_ris",
            Scheme::Optimized => "optimized",
            Scheme::ClutterUnaware => "clutter_unaware",
        }
    }

    pub fn clutter_aware(self) -> bool {
        self != Scheme::ClutterUnaware
    }
}

/// Everything that stays fixed across the sweep: channel shapes, clutter
/// subspace and the random RIS configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub template: ChannelTemplate,
    pub subspace: ClutterSubspace,
    pub random_phases: RisPhases,
}

/// One scheme configured at one sweep point.
#[derive(Debug, Clone)]
pub struct SchemeSetup {
    pub scheme: Scheme,
    pub channels: ChannelSet,
    pub phases: RisPhases,
    pub precoder: PrecoderSolution,
    pub test_matrix: CMatrix,
    pub sampler: StatisticSampler,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed, &[TAG_TEMPLATE]));
        let template = ChannelTemplate::build(config, &mut rng)?;
        let subspace = estimate_clutter_subspace(&template.clutter_corr, config.rank_rule())?;
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed, &[TAG_RANDOM_PHASES]));
        let random_phases = RisPhases::random(config.ris_elements(), &mut rng);
        Ok(Self {
            config: config.clone(),
            template,
            subspace,
            random_phases,
        })
    }

    pub fn channels(&self, snr_db: f64) -> ChannelSet {
        self.template.channels(&apply_snr_point(&self.config, snr_db))
    }

    /// Phases, precoder, test matrix and statistic sampler of `scheme`.
    pub fn configure(&self, scheme: Scheme, snr_db: f64) -> Result<SchemeSetup> {
        let cfg = &self.config;
        let full = self.channels(snr_db);
        let (channels, phases) = match scheme {
            Scheme::NoRis => (full.without_ris(), RisPhases::zeros(cfg.ris_elements())),
            Scheme::RandomRis => (full, self.random_phases.clone()),
            Scheme::Optimized | Scheme::ClutterUnaware => {
                let phases = optimize_phases(&full.b_t, &full.hbar_r2)?;
                (full, phases)
            }
        };
        let betas = cfg.betas();
        let c = gain_matrix(&channels, &phases, betas)?;
        let h1 = channels.ue_channel(&phases)?;
        let precoder = optimize_precoder(&c, &h1, cfg.tx_power, cfg.gamma_th, cfg.sigma2)
            .map_err(|e| match e {
                Error::Infeasible { .. } => Error::SweepPoint {
                    snr_db,
                    source: Box::new(e),
                },
                other => other,
            })?;
        let r = target_covariance(&channels, &phases, &precoder.p, betas)?;
        let subspace = scheme.clutter_aware().then_some(&self.subspace);
        let test_matrix = build_test_matrix(&r, subspace, cfg.sigma2)?;
        let clutter = ClutterModel::new(&self.subspace, cfg.cnr_db, cfg.sigma2);
        let sampler = StatisticSampler::new(
            &channels,
            &phases,
            &precoder.p,
            betas,
            &clutter,
            cfg.sigma2,
            cfg.symbols,
            &test_matrix,
        )?;
        Ok(SchemeSetup {
            scheme,
            channels,
            phases,
            precoder,
            test_matrix,
            sampler,
        })
    }

    fn seed(&self, scheme: Scheme, point: usize, purpose: u64) -> u64 {
        derive_seed(self.config.master_seed, &[scheme.id(), point as u64, purpose])
    }

    /// Calibrates the threshold of `setup` at sweep index `point`.
    pub fn calibrate(&self, setup: &SchemeSetup, point: usize) -> Result<Calibration> {
        let s = &setup.sampler;
        calibrate_threshold(
            |rng| s.null_statistic(rng),
            self.config.alpha,
            self.config.trials_calibration,
            self.seed(setup.scheme, point, TAG_CALIBRATION),
            self.seed(setup.scheme, point, TAG_VALIDATION),
        )
    }

    /// Fraction of target-present decisions declared as detections.
    pub fn detection_rate(&self, setup: &SchemeSetup, point: usize, cal: &Calibration) -> f64 {
        let trials = self.config.trials_detection;
        let s = &setup.sampler;
        let hits = count_hits(trials, self.seed(setup.scheme, point, TAG_DETECTION), |rng| {
            let t = s.target_statistic(rng);
            cal.decide(t, rng)
        });
        hits as f64 / trials as f64
    }

    fn pooled_threshold(&self, scheme: Scheme, setups: &[SchemeSetup]) -> (f64, f64) {
        let trials = self.config.trials_calibration;
        let mut pooled = Vec::with_capacity(trials * setups.len());
        for (point, setup) in setups.iter().enumerate() {
            let s = &setup.sampler;
            pooled.extend(sample_stats(trials, self.seed(scheme, point, TAG_CALIBRATION), |rng| {
                s.null_statistic(rng)
            }));
        }
        empirical_threshold_with_ties(&mut pooled, self.config.alpha)
    }

    /// Full sweep: for every SNR point and scheme, configure, calibrate to
    /// `alpha` under clutter plus noise, then estimate the detection rate.
    pub fn run_curve(&self) -> Result<CurveTable> {
        let cfg = &self.config;
        if cfg.trials_calibration < crate::detector::min_calibration_trials(cfg.alpha) {
            return Err(Error::InsufficientTrials {
                trials: cfg.trials_calibration,
                alpha: cfg.alpha,
                required: crate::detector::min_calibration_trials(cfg.alpha),
            });
        }
        let grid = &cfg.snr_grid_db;
        let mut setups: Vec<Vec<SchemeSetup>> = Vec::with_capacity(grid.len());
        for &snr in grid {
            setups.push(
                Scheme::ALL
                    .iter()
                    .map(|&s| self.configure(s, snr))
                    .collect::<Result<Vec<_>>>()?,
            );
        }

        let mut results: Vec<Vec<SchemePoint>> = vec![Vec::new(); grid.len()];
        for (j, &scheme) in Scheme::ALL.iter().enumerate() {
            let pooled = match cfg.threshold_mode {
                ThresholdMode::Pooled => {
                    let column: Vec<SchemeSetup> = setups.iter().map(|row| row[j].clone()).collect();
                    Some(self.pooled_threshold(scheme, &column))
                }
                ThresholdMode::PerPoint => None,
            };
            for (point, row) in setups.iter().enumerate() {
                let setup = &row[j];
                let cal = match pooled {
                    Some((threshold, ties)) => {
                        let s = &setup.sampler;
                        validate_threshold(
                            |rng| s.null_statistic(rng),
                            threshold,
                            ties,
                            cfg.trials_calibration,
                            self.seed(scheme, point, TAG_VALIDATION),
                        )
                    }
                    None => self.calibrate(setup, point)?,
                };
                let pd = self.detection_rate(setup, point, &cal);
                results[point].push(SchemePoint {
                    scheme,
                    threshold: cal.threshold,
                    realized_pfa: cal.realized_pfa,
                    ci_halfwidth: cal.ci_halfwidth(),
                    pd,
                    case_fired: setup.precoder.case_fired,
                    comm_snr: setup.precoder.comm_snr,
                    sensing_gain: setup.precoder.objective,
                });
            }
        }

        let rows = grid
            .iter()
            .zip(results)
            .map(|(&snr_db, schemes)| CurveRow::from_schemes(snr_db, schemes))
            .collect();
        Ok(CurveTable { rows })
    }
}

/// Builds the scenario and runs the sweep.
pub fn run_curve(config: &ScenarioConfig) -> Result<CurveTable> {
    Scenario::build(config)?.run_curve()
}

/// Runs `f` on a worker pool of `threads` threads (all cores when `None`).
#[cfg(feature = "parallel")]
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}
