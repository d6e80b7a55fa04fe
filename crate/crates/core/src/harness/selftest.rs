//! Fast internal consistency checks run by the `selftest` subcommand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{cascade_gain, RisPhases};
use crate::detector::{build_test_matrix, estimate_clutter_subspace, RankRule};
use crate::numerics::{
    gram_schmidt_qr, hermitian_eig, hermitian_part, relative_frobenius, standard_complex_normal,
    CMatrix,
};
use crate::optimizer::{optimize_phases, optimize_precoder, solve_norm_constrained_qp, Lemma1Problem};
use crate::sensing::{gain_matrix, target_covariance, RcsVariances};
use crate::testutil::{random_channel_set, random_psd, random_vector};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error measure.
    pub worst: f64,
    pub tolerance: f64,
}

fn check(name: &'static str, worst: f64, tolerance: f64) -> Check {
    Check {
        name,
        passed: worst.is_finite() && worst <= tolerance,
        worst,
        tolerance,
    }
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    hermitian_part(&CMatrix::from_fn(n, n, |_, _| standard_complex_normal(rng)))
}

pub fn run(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut worst = 0.0_f64;
    for n in [2, 7, 36] {
        let m = random_hermitian(n, &mut rng);
        let e = match hermitian_eig(&m) {
            Ok(e) => e,
            Err(_) => {
                worst = f64::INFINITY;
                continue;
            }
        };
        worst = worst.max(relative_frobenius(&e.reconstruct(), &m));
    }
    out.push(check("eigendecomposition_reconstruction", worst, 1e-12));

    let a = CMatrix::from_fn(36, 12, |_, _| standard_complex_normal(&mut rng));
    let qr_err = gram_schmidt_qr(&a)
        .map(|(q, r)| relative_frobenius(&(&q * r), &a).max((q.adjoint() * &q - CMatrix::identity(12, 12)).norm()))
        .unwrap_or(f64::INFINITY);
    out.push(check("gram_schmidt_qr", qr_err, 1e-12));

    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let ch = random_channel_set(6, 4, &mut rng);
        let phases = RisPhases::random(4, &mut rng);
        let p = random_vector(6, &mut rng);
        let betas = RcsVariances::new(0.3, 1.7, 0.9);
        let err = target_covariance(&ch, &phases, &p, betas)
            .and_then(|r| {
                let c = gain_matrix(&ch, &phases, betas)?;
                let tr = r.trace().re;
                Ok((p.dotc(&(&c * &p)).re - tr).abs() / tr)
            })
            .unwrap_or(f64::INFINITY);
        worst = worst.max(err);
    }
    out.push(check("trace_identity", worst, 1e-10));

    let mut worst = 0.0_f64;
    for n in 2..=8 {
        let prob = Lemma1Problem {
            a_bar: random_psd(n, n, n as f64, &mut rng),
            b_bar: random_vector(n, &mut rng),
            c_bar: 1.3,
        };
        let err = solve_norm_constrained_qp(&prob)
            .map(|s| s.kkt_residual.max((s.x.norm_squared() - 1.3).abs() / 1.3))
            .unwrap_or(f64::INFINITY);
        worst = worst.max(err);
    }
    out.push(check("sphere_qp_kkt", worst, 1e-8));

    let b = random_vector(64, &mut rng);
    let h = random_vector(64, &mut rng);
    let bound: f64 = b.iter().zip(h.iter()).map(|(x, y)| x.norm() * y.norm()).sum();
    let err = optimize_phases(&b, &h)
        .and_then(|ph| cascade_gain(&b, &ph, &h))
        .map(|g| (g.norm() - bound).abs() / bound)
        .unwrap_or(f64::INFINITY);
    out.push(check("phase_alignment", err, 1e-12));

    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let c = random_psd(6, 3, 6.0, &mut rng);
        let h1 = random_vector(6, &mut rng);
        let gamma = 0.5 * h1.norm_squared();
        let err = optimize_precoder(&c, &h1, 1.0, gamma, 1.0)
            .map(|s| ((s.p.norm_squared() - 1.0).abs()).max(((gamma - s.comm_snr) / gamma).max(0.0)))
            .unwrap_or(f64::INFINITY);
        worst = worst.max(err);
    }
    out.push(check("precoder_constraints", worst, 1e-8));

    let r = random_psd(6, 3, 20.0, &mut rng);
    let cl = random_psd(6, 2, 6.0, &mut rng);
    let err = estimate_clutter_subspace(&cl, RankRule::Fixed(2))
        .and_then(|sub| {
            let t = build_test_matrix(&r, Some(&sub), 1.0)?;
            Ok((&t * sub.basis()).norm() / t.norm())
        })
        .unwrap_or(f64::INFINITY);
    out.push(check("clutter_annihilation", err, 1e-8));

    out
}
