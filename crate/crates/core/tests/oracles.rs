//! Independent numerical oracles for the scenario-level behaviour.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_isac::channel::{ChannelTemplate, RisPhases};
use ris_isac::detector::{
    build_test_matrix, estimate_clutter_subspace, simulate_received, test_statistic, ClutterModel,
    Hypothesis, StatisticSampler,
};
use ris_isac::harness::{run_curve, Scenario, Scheme};
use ris_isac::montecarlo::{binomial_std_error, derive_seed};
use ris_isac::numerics::{CMatrix, CVector};
use ris_isac::optimizer::{optimize_phases, optimize_precoder};
use ris_isac::sensing::{gain_matrix, target_covariance, RcsVariances};
use ris_isac::testutil::{random_channel_set, random_vector};
use ris_isac::ScenarioConfig;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn reduced_config() -> ScenarioConfig {
    ScenarioConfig {
        scattering_samples: 20_000,
        trials_calibration: 2_000,
        trials_detection: 1_000,
        alpha: 0.05,
        snr_grid_db: vec![-50.0, -40.0, -30.0, -20.0],
        ..ScenarioConfig::default()
    }
}

/// Random feasible precoder (see the acceptance suite), then greedy local
/// refinement on the feasible set.
fn hill_climb(c: &CMatrix, h1: &CVector, tx_power: f64, x1_min: f64, r: &mut ChaCha8Rng) -> f64 {
    let e1 = h1.conjugate().unscale(h1.norm());
    let project = |p: CVector| -> CVector {
        let p = p.unscale(p.norm()).scale(tx_power.sqrt());
        let along = e1.dotc(&p);
        if along.norm() >= x1_min {
            return p;
        }
        let rest = &p - &e1 * along;
        let phase = if along.norm() > 0.0 { along / along.norm() } else { 1.0.into() };
        let scale = (tx_power - x1_min * x1_min).sqrt() / rest.norm();
        &e1 * (phase * x1_min) + rest.scale(scale)
    };
    let value = |p: &CVector| p.dotc(&(c * p)).re;
    let mut best_p = project(random_vector(h1.len(), r));
    let mut best = value(&best_p);
    for _ in 0..20 {
        let cand = project(random_vector(h1.len(), r));
        let v = value(&cand);
        if v > best {
            best = v;
            best_p = cand;
        }
    }
    let mut step = 0.5;
    while step > 1e-7 {
        let mut improved = false;
        for _ in 0..200 {
            let cand = project(&best_p + random_vector(h1.len(), r).scale(step));
            let v = value(&cand);
            if v > best {
                best = v;
                best_p = cand;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

#[test]
fn precoder_matches_local_search_optimum() {
    let mut r = rng(1);
    for s in 0..6 {
        let ch = random_channel_set(4, 3, &mut r);
        let phases = RisPhases::random(3, &mut r);
        let betas = RcsVariances::new(0.5, 2.0, 1.0);
        let c = gain_matrix(&ch, &phases, betas).unwrap();
        let h1 = ch.ue_channel(&phases).unwrap();
        let gamma = [0.2, 0.8][s % 2] * h1.norm_squared();
        let sol = optimize_precoder(&c, &h1, 1.0, gamma, 1.0).unwrap();
        let x1_min = gamma.sqrt() / h1.norm();
        let searched = hill_climb(&c, &h1, 1.0, x1_min, &mut r);
        assert!(sol.objective >= searched * (1.0 - 1e-9), "scenario {s}");
        assert!((sol.objective - searched) / sol.objective < 1e-3, "scenario {s}: {} vs {searched}", sol.objective);
    }
}

#[test]
fn full_size_precoder_constraint_audit() {
    let scenario = Scenario::build(&reduced_config()).unwrap();
    let cfg = &scenario.config;
    for &snr in &cfg.snr_grid_db {
        for scheme in Scheme::ALL {
            let setup = scenario.configure(scheme, snr).unwrap();
            let sol = &setup.precoder;
            assert!((sol.p.norm_squared() - cfg.tx_power).abs() < 1e-10 * cfg.tx_power);
            assert!(sol.comm_snr >= cfg.gamma_th * (1.0 - 1e-8));
            assert!(sol.kkt_residual < 1e-8);
            // the precoder lies in the span of the UE channel and the gain matrix
            let c = gain_matrix(&setup.channels, &setup.phases, cfg.betas()).unwrap();
            let h1 = setup.channels.ue_channel(&setup.phases).unwrap();
            let mut a = CMatrix::zeros(h1.len(), h1.len() + 1);
            a.columns_mut(1, h1.len()).copy_from(&c.unscale(c.norm()));
            a.set_column(0, &h1.conjugate().unscale(h1.norm()));
            let svd = a.svd(true, false);
            let u = svd.u.unwrap();
            let rank = svd.singular_values.iter().filter(|&&s| s > 1e-12).count();
            let basis = u.columns(0, rank);
            let residual = &sol.p - basis * (basis.adjoint() * &sol.p);
            assert!(residual.norm() < 1e-6 * sol.p.norm(), "{scheme:?} at {snr}: {}", residual.norm());
        }
    }
}

#[test]
fn optimized_phases_beat_random_phases() {
    let scenario = Scenario::build(&reduced_config()).unwrap();
    let cfg = &scenario.config;
    let mut r = rng(2);
    for &snr in &cfg.snr_grid_db {
        let ch = scenario.channels(snr);
        let objective = |phases: &RisPhases| {
            let c = gain_matrix(&ch, phases, cfg.betas()).unwrap();
            let h1 = ch.ue_channel(phases).unwrap();
            optimize_precoder(&c, &h1, cfg.tx_power, cfg.gamma_th, cfg.sigma2).unwrap().objective
        };
        let best = objective(&optimize_phases(&ch.b_t, &ch.hbar_r2).unwrap());
        for _ in 0..20 {
            assert!(best >= objective(&RisPhases::random(ch.ris_elements(), &mut r)));
        }
    }
}

#[test]
fn clutter_subspace_is_reproducible_and_semi_unitary() {
    let cfg = ScenarioConfig::default();
    let build = || {
        let mut r = rng(derive_seed(cfg.master_seed, &[1]));
        let t = ChannelTemplate::build(&cfg, &mut r).unwrap();
        estimate_clutter_subspace(&t.clutter_corr, cfg.rank_rule()).unwrap()
    };
    let a = build();
    let b = build();
    assert_eq!(a.rank(), b.rank());
    assert_eq!(a.basis(), b.basis());
    assert!(a.rank() < cfg.antennas());
    let gram = a.basis().adjoint() * a.basis();
    assert!((gram - CMatrix::identity(a.rank(), a.rank())).norm() < 1e-10);
}

#[test]
fn received_clutter_power_at_20db() {
    let scenario = Scenario::build(&ScenarioConfig::default()).unwrap();
    let model = ClutterModel::new(&scenario.subspace, 20.0, 1.0);
    let mut r = rng(3);
    let n = 100_000;
    let total: f64 = (0..n).map(|_| model.sample(&mut r).norm_squared()).sum();
    let ratio = total / n as f64 / 36.0;
    assert!((ratio / 100.0 - 1.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn high_snr_echo_is_detected_more_often_than_noise() {
    let scenario = Scenario::build(&reduced_config()).unwrap();
    let setup = scenario.configure(Scheme::Optimized, -20.0).unwrap();
    let cal = scenario.calibrate(&setup, 3).unwrap();
    let pd = scenario.detection_rate(&setup, 3, &cal);
    assert!(pd > cal.realized_pfa + 0.5);
}

#[test]
fn fast_and_literal_samplers_agree_on_detection_rate() {
    let scenario = Scenario::build(&ScenarioConfig {
        tx_horizontal: 3,
        tx_vertical: 3,
        ris_horizontal: 4,
        ris_vertical: 4,
        scattering_samples: 5_000,
        ..reduced_config()
    })
    .unwrap();
    let cfg = &scenario.config;
    let setup = scenario.configure(Scheme::Optimized, -35.0).unwrap();
    let cal = scenario.calibrate(&setup, 0).unwrap();
    let clutter = ClutterModel::new(&scenario.subspace, cfg.cnr_db, cfg.sigma2);
    let mut r = rng(4);
    let n = 20_000;
    let literal = (0..n)
        .filter(|_| {
            let y = simulate_received(
                &setup.channels,
                &setup.phases,
                &setup.precoder.p,
                cfg.betas(),
                Hypothesis::H1,
                &clutter,
                cfg.sigma2,
                cfg.symbols,
                &mut r,
            )
            .unwrap();
            test_statistic(&y, &setup.test_matrix).unwrap() >= cal.threshold
        })
        .count() as f64
        / n as f64;
    let fast = (0..n).filter(|_| setup.sampler.target_statistic(&mut r) >= cal.threshold).count() as f64 / n as f64;
    let se = (binomial_std_error(literal, n).powi(2) + binomial_std_error(fast, n).powi(2)).sqrt();
    assert!((literal - fast).abs() < 4.0 * se + 1e-9, "literal {literal} fast {fast}");
}

#[test]
fn statistic_sampler_handles_clutter_unaware_matrix() {
    let mut r = rng(5);
    let ch = random_channel_set(5, 3, &mut r);
    let phases = RisPhases::random(3, &mut r);
    let p = random_vector(5, &mut r);
    let betas = RcsVariances::new(0.2, 0.5, 0.3);
    let sub = estimate_clutter_subspace(&ch.r_clutter, ris_isac::detector::RankRule::Fixed(2)).unwrap();
    let rm = target_covariance(&ch, &phases, &p, betas).unwrap();
    let t = build_test_matrix(&rm, None, 1.0).unwrap();
    let clutter = ClutterModel::new(&sub, 10.0, 1.0);
    let s = StatisticSampler::new(&ch, &phases, &p, betas, &clutter, 1.0, 2, &t).unwrap();
    let n = 20_000;
    let mean = (0..n).map(|_| s.null_statistic(&mut r)).sum::<f64>() / n as f64;
    let cc = clutter.scaled_basis() * clutter.scaled_basis().adjoint();
    let expected = 2.0 * (&t * (cc + CMatrix::identity(5, 5))).trace().re;
    assert!((mean - expected).abs() < 0.05 * expected.abs().max(1.0), "{mean} vs {expected}");
}

#[test]
fn zero_rcs_gives_false_alarm_level_detection() {
    let cfg = ScenarioConfig {
        beta1: 0.0,
        beta2: 0.0,
        beta3: 0.0,
        trials_calibration: 4_000,
        trials_detection: 4_000,
        snr_grid_db: vec![-30.0, -20.0],
        ..reduced_config()
    };
    let table = run_curve(&cfg).unwrap();
    for row in &table.rows {
        for s in &row.schemes {
            let se = binomial_std_error(cfg.alpha, cfg.trials_detection);
            assert!((s.pd - cfg.alpha).abs() < 4.0 * se + 0.01, "{:?}: {}", s.scheme, s.pd);
        }
    }
}

#[test]
fn detection_rate_rises_with_snr() {
    let table = run_curve(&reduced_config()).unwrap();
    let n = reduced_config().trials_detection;
    for scheme in Scheme::ALL {
        let pd: Vec<f64> = table.rows.iter().map(|r| r.get(scheme).unwrap().pd).collect();
        for w in pd.windows(2) {
            // independent estimates: compare against the standard error of the difference
            let se = (binomial_std_error(w[0], n).powi(2) + binomial_std_error(w[1], n).powi(2)).sqrt();
            assert!(w[1] >= w[0] - 2.0 * se - 1e-12, "{scheme:?}: {pd:?}");
        }
    }
}

#[test]
fn template_draws_are_seed_determined() {
    let cfg = reduced_config();
    let a = ChannelTemplate::build(&cfg, &mut rng(9)).unwrap();
    let b = ChannelTemplate::build(&cfg, &mut rng(9)).unwrap();
    let c = ChannelTemplate::build(&cfg, &mut rng(10)).unwrap();
    assert_eq!(a.target_corr_tx, b.target_corr_tx);
    assert_eq!(a.ue_nlos_ris, b.ue_nlos_ris);
    assert_ne!(a.target_corr_tx, c.target_corr_tx);
    let mut r = rng(11);
    let _: f64 = r.random();
}
