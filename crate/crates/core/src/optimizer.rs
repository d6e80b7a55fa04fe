//! Joint RIS phase and transmit precoder configuration.
//!
//! Phases are chosen first, in closed form, to co-phase the cascaded target
//! path. The precoder then maximizes the sensing gain `p^H C p` subject to
//! `‖p‖² = P_t` and a minimum communication SNR, by restricting `p` to the
//! span of `[h1*, B]` (`C = B B^H`) and splitting into an interior case (top
//! eigenvector) and a boundary case (sphere-constrained quadratic program).

use num_complex::Complex64;

use crate::channel::RisPhases;
use crate::error::{ensure_len, Error, Result};
use crate::numerics::{
    bilinear, gram_schmidt_basis, hermitian_eig, hermitian_part, psd_factor, CMatrix, CVector,
    DEFAULT_RANK_TOL, QR_RANK_TOL,
};

/// Phases that make every term of `b_t^T D_ψ h_r` real and nonnegative.
pub fn optimize_phases(b_t: &CVector, hbar_r2: &CVector) -> Result<RisPhases> {
    ensure_len("RIS target channel", hbar_r2.len(), b_t.len())?;
    let psi = b_t
        .iter()
        .zip(hbar_r2.iter())
        .map(|(b, h)| {
            let prod = b * h;
            if prod.norm() == 0.0 {
                0.0
            } else {
                -prod.arg()
            }
        })
        .collect();
    Ok(RisPhases::new(psi))
}

/// `|h1^T p|² / σ²`.
pub fn communication_snr(h1: &CVector, p: &CVector, sigma2: f64) -> Result<f64> {
    ensure_len("precoder", p.len(), h1.len())?;
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::Config(format!("noise variance must be positive, got {sigma2}")));
    }
    Ok(bilinear(h1, p).norm_sqr() / sigma2)
}

/// `maximize x^H A x + 2 Re(x^H b)  s.t.  ‖x‖² = c`.
#[derive(Debug, Clone)]
pub struct Lemma1Problem {
    pub a_bar: CMatrix,
    pub b_bar: CVector,
    pub c_bar: f64,
}

#[derive(Debug, Clone)]
pub struct Lemma1Solution {
    pub x: CVector,
    /// Lagrange multiplier `γ*` with `(γ* I − A) x = b`.
    pub multiplier: f64,
    /// The secular equation had no root above `λ1`; the solution was
    /// completed along the top eigenvector.
    pub hard_case: bool,
    /// `‖(γ* I − A) x − b‖ / max(‖b‖, γ*‖x‖)`.
    pub kkt_residual: f64,
}

impl Lemma1Problem {
    pub fn objective(&self, x: &CVector) -> f64 {
        x.dotc(&(&self.a_bar * x)).re + 2.0 * x.dotc(&self.b_bar).re
    }

    fn validate(&self) -> Result<()> {
        let n = self.a_bar.nrows();
        if self.a_bar.ncols() != n {
            return Err(Error::DimensionMismatch("A must be square".into()));
        }
        ensure_len("b", self.b_bar.len(), n)?;
        if !(self.c_bar >= 0.0 && self.c_bar.is_finite()) {
            return Err(Error::Config(format!("c must be nonnegative, got {}", self.c_bar)));
        }
        Ok(())
    }
}

/// Solves the sphere-constrained quadratic program through its secular
/// equation `Σ |u_i^H b|² / (γ − λ_i)² = c`, bisected in `δ = γ − λ1` so the
/// gaps `λ1 − λ_i` keep full precision.
pub fn solve_norm_constrained_qp(prob: &Lemma1Problem) -> Result<Lemma1Solution> {
    prob.validate()?;
    let n = prob.b_bar.len();
    let c = prob.c_bar;
    if n == 0 || c == 0.0 {
        return Ok(Lemma1Solution {
            x: CVector::zeros(n),
            multiplier: 0.0,
            hard_case: false,
            kkt_residual: 0.0,
        });
    }
    let eig = hermitian_eig(&prob.a_bar)?;
    let lambda1 = eig.values[0];
    let coords: Vec<Complex64> = (0..n).map(|i| eig.vectors.column(i).dotc(&prob.b_bar)).collect();
    let weights: Vec<f64> = coords.iter().map(|z| z.norm_sqr()).collect();
    let gaps: Vec<f64> = eig.values.iter().map(|l| (lambda1 - l).max(0.0)).collect();
    let b_norm = prob.b_bar.norm();
    let trace: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();

    let u1 = eig.vectors.column(0).into_owned();
    if b_norm < 1e-14 || b_norm < 1e-12 * (trace * c).sqrt() {
        return Ok(finish(prob, u1.scale(c.sqrt()), lambda1, false));
    }

    // directions sharing the top eigenvalue act as one
    let top_tol = 1e-12 * lambda1.abs().max(b_norm / c.sqrt());
    let top_weight: f64 = (0..n).filter(|&i| gaps[i] <= top_tol).map(|i| weights[i]).sum();
    let interior = |delta: f64| -> CVector {
        let mut x = CVector::zeros(n);
        for i in 0..n {
            let d = delta + gaps[i];
            if d > 0.0 {
                x += eig.vectors.column(i) * (coords[i] / d);
            }
        }
        x
    };

    if top_weight <= (1e-14 * b_norm).powi(2) {
        let x0 = interior(0.0);
        let rest = c - x0.norm_squared();
        if rest >= 0.0 {
            let x = x0 + u1.scale(rest.sqrt());
            return Ok(finish(prob, x, lambda1, true));
        }
    }

    let secular = |delta: f64| -> f64 {
        weights
            .iter()
            .zip(&gaps)
            .map(|(w, g)| w / (delta + g).powi(2))
            .sum::<f64>()
            - c
    };
    let lo = (top_weight / c).sqrt().max(f64::MIN_POSITIVE);
    let hi = b_norm / c.sqrt();
    let delta = if secular(hi) >= 0.0 {
        hi
    } else if secular(lo) <= 0.0 {
        lo
    } else {
        crate::numerics::bisection_root(secular, lo, hi, 0.0)?
    };
    Ok(finish(prob, interior(delta), lambda1 + delta, false))
}

fn finish(prob: &Lemma1Problem, x: CVector, multiplier: f64, hard_case: bool) -> Lemma1Solution {
    let n = x.len();
    let residual = (CMatrix::identity(n, n).scale(multiplier) - &prob.a_bar) * &x - &prob.b_bar;
    let scale = prob.b_bar.norm().max(multiplier.abs() * x.norm()).max(f64::MIN_POSITIVE);
    Lemma1Solution {
        kkt_residual: residual.norm() / scale,
        x,
        multiplier,
        hard_case,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderCase {
    /// Communication constraint inactive: dominant eigenvector.
    EigenvectorInterior,
    /// Communication constraint tight: sphere-constrained quadratic program.
    BoundaryLemma1,
}

#[derive(Debug, Clone)]
pub struct PrecoderSolution {
    pub p: CVector,
    pub comm_snr: f64,
    /// `p^H C p`.
    pub objective: f64,
    pub case_fired: PrecoderCase,
    pub kkt_residual: f64,
    /// `[h1*, B]` had dependent columns and was reduced to a basis of its span.
    pub basis_rank_deficient: bool,
    pub hard_case: bool,
}

/// Maximizes `p^H C p` subject to `‖p‖² = P_t` and `|h1^T p|²/σ² ≥ γ_th`.
pub fn optimize_precoder(
    c: &CMatrix,
    h1: &CVector,
    tx_power: f64,
    gamma_th: f64,
    sigma2: f64,
) -> Result<PrecoderSolution> {
    let k = h1.len();
    if c.nrows() != k || c.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "gain matrix is {}x{}, expected {k}x{k}",
            c.nrows(),
            c.ncols()
        )));
    }
    if !(tx_power > 0.0 && sigma2 > 0.0 && gamma_th >= 0.0) {
        return Err(Error::Config("need P_t > 0, sigma2 > 0, gamma_th >= 0".into()));
    }
    let h_norm = h1.norm();
    let available = tx_power * h_norm * h_norm;
    let required = gamma_th * sigma2;
    if available < required || h_norm == 0.0 {
        return Err(Error::Infeasible {
            available,
            required,
        });
    }

    let b = psd_factor(&hermitian_part(c), DEFAULT_RANK_TOL)?;
    // columns are normalized per group so dropping decisions do not depend on
    // the relative scale of the sensing and UE channels
    let b_scale = (0..b.ncols()).map(|j| b.column(j).norm()).fold(0.0_f64, f64::max);
    let mut a = CMatrix::zeros(k, 1 + b.ncols());
    a.set_column(0, &h1.conjugate().unscale(h_norm));
    if b_scale > 0.0 {
        a.columns_mut(1, b.ncols()).copy_from(&b.unscale(b_scale));
    }
    let gs = gram_schmidt_basis(&a, QR_RANK_TOL)?;
    let q = gs.q;
    let dim = q.ncols();
    let f = q.adjoint() * &b;
    let x1_min = required.sqrt() / h_norm;

    let (x, case_fired, kkt_residual, hard_case) = if dim == 1 {
        (CVector::from_element(1, Complex64::new(tx_power.sqrt(), 0.0)), PrecoderCase::EigenvectorInterior, 0.0, false)
    } else {
        let ff = hermitian_part(&(&f * f.adjoint()));
        let eig = hermitian_eig(&ff)?;
        let mut x: CVector = eig.vectors.column(0).scale(tx_power.sqrt());
        let x1 = x[0];
        if x1.norm() > 0.0 {
            let rot = x1.conj() / x1.norm();
            x *= rot;
            x[0] = Complex64::new(x[0].re, 0.0);
        }
        if x[0].norm() > 0.0 && x[0].re >= x1_min {
            let lambda = eig.values[0];
            let res = (&ff * &x - x.scale(lambda)).norm() / (lambda * x.norm()).max(f64::MIN_POSITIVE);
            (x, PrecoderCase::EigenvectorInterior, res, false)
        } else {
            let r_first: CVector = f.row(0).adjoint();
            let r_rest = f.rows(1, dim - 1).into_owned();
            let prob = Lemma1Problem {
                a_bar: hermitian_part(&(&r_rest * r_rest.adjoint())),
                b_bar: (&r_rest * r_first).scale(x1_min),
                c_bar: (tx_power - x1_min * x1_min).max(0.0),
            };
            let sol = solve_norm_constrained_qp(&prob)?;
            let mut x = CVector::zeros(dim);
            x[0] = Complex64::new(x1_min, 0.0);
            x.rows_mut(1, dim - 1).copy_from(&sol.x);
            (x, PrecoderCase::BoundaryLemma1, sol.kkt_residual, sol.hard_case)
        }
    };

    let p = &q * x;
    let objective = p.dotc(&(c * &p)).re;
    Ok(PrecoderSolution {
        comm_snr: communication_snr(h1, &p, sigma2)?,
        objective,
        case_fired,
        kkt_residual,
        basis_rank_deficient: !gs.dropped.is_empty(),
        hard_case,
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::cascade_gain;
    use crate::numerics::{c, outer};
    use crate::testutil::{random_psd, random_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn real_positive_channels_need_no_shift() {
        let b = CVector::from_element(4, c(0.5, 0.0));
        let h = CVector::from_element(4, c(2.0, 0.0));
        let psi = optimize_phases(&b, &h).unwrap();
        assert!(psi.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_element_conjugation() {
        let b = CVector::from_element(1, Complex64::from_polar(1.0, PI / 3.0));
        let h = CVector::from_element(1, Complex64::from_polar(1.0, PI / 6.0));
        let psi = optimize_phases(&b, &h).unwrap();
        assert!((psi.as_slice()[0] - 1.5 * PI).abs() < 1e-12);
        let g = cascade_gain(&b, &psi, &h).unwrap();
        assert!((g - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn phase_rule_dominates_random_configurations() {
        let mut r = rng(1);
        let b = random_vector(64, &mut r);
        let h = random_vector(64, &mut r);
        let best = cascade_gain(&b, &optimize_phases(&b, &h).unwrap(), &h).unwrap();
        let bound: f64 = b.iter().zip(h.iter()).map(|(x, y)| x.norm() * y.norm()).sum();
        assert!((best.norm() - bound).abs() < 1e-12 * bound);
        assert!(best.im.abs() < 1e-10 * bound && best.re > 0.0);
        for _ in 0..1000 {
            let other = cascade_gain(&b, &RisPhases::random(64, &mut r), &h).unwrap();
            assert!(other.norm() <= best.norm());
        }
    }

    #[test]
    fn zero_entries_get_zero_phase() {
        let b = CVector::from_vec(vec![c(0.0, 0.0), c(0.0, 1.0)]);
        let h = CVector::from_vec(vec![c(1.0, 1.0), c(1.0, 0.0)]);
        let psi = optimize_phases(&b, &h).unwrap();
        assert_eq!(psi.as_slice()[0], 0.0);
    }

    #[test]
    fn snr_examples() {
        let mut r = rng(2);
        let h = random_vector(5, &mut r);
        let p = h.conjugate().unscale(h.norm()).scale(2.0f64.sqrt());
        let snr = communication_snr(&h, &p, 0.5).unwrap();
        assert!((snr - 2.0 * h.norm_squared() / 0.5).abs() < 1e-12 * snr);
        // p orthogonal to h*
        let h2 = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let p2 = CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(communication_snr(&h2, &p2, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_quadratic_aligns_with_linear_term() {
        let b = CVector::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 0.3)]);
        let prob = Lemma1Problem {
            a_bar: CMatrix::zeros(3, 3),
            b_bar: b.clone(),
            c_bar: 2.0,
        };
        let sol = solve_norm_constrained_qp(&prob).unwrap();
        assert!((sol.multiplier - b.norm() / 2f64.sqrt()).abs() < 1e-12);
        let expected = b.unscale(b.norm()).scale(2f64.sqrt());
        assert!((sol.x - expected).norm() < 1e-12);
        assert!(!sol.hard_case);
    }

    #[test]
    fn zero_linear_term_uses_top_eigenvector() {
        let mut r = rng(3);
        let a = random_psd(4, 4, 4.0, &mut r);
        let prob = Lemma1Problem {
            a_bar: a.clone(),
            b_bar: CVector::zeros(4),
            c_bar: 3.0,
        };
        let sol = solve_norm_constrained_qp(&prob).unwrap();
        let lambda1 = hermitian_eig(&a).unwrap().values[0];
        assert!((prob.objective(&sol.x) - 3.0 * lambda1).abs() < 1e-10);
        assert!((sol.x.norm_squared() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hard_case_completion() {
        // b orthogonal to the top eigenvector, c large
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.0, 0.0), c(1.0, 0.0)]));
        let b = CVector::from_vec(vec![c(0.0, 0.0), c(0.5, 0.0)]);
        let prob = Lemma1Problem {
            a_bar: a,
            b_bar: b,
            c_bar: 4.0,
        };
        let sol = solve_norm_constrained_qp(&prob).unwrap();
        assert!(sol.hard_case);
        assert!((sol.multiplier - 2.0).abs() < 1e-12);
        assert!((sol.x.norm_squared() - 4.0).abs() < 1e-12);
        assert!(sol.kkt_residual < 1e-12);
        // brute force on the circle of radius 2 (real coordinates suffice)
        let best = (0..200_000)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / 200_000.0;
                let x = CVector::from_vec(vec![c(2.0 * t.cos(), 0.0), c(2.0 * t.sin(), 0.0)]);
                prob.objective(&x)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(prob.objective(&sol.x) >= best - 1e-9);
    }

    #[test]
    fn kkt_holds_on_random_instances() {
        let mut r = rng(4);
        for n in 1..=8 {
            let prob = Lemma1Problem {
                a_bar: random_psd(n, n, n as f64, &mut r),
                b_bar: random_vector(n, &mut r),
                c_bar: 0.7,
            };
            let sol = solve_norm_constrained_qp(&prob).unwrap();
            assert!(sol.kkt_residual < 1e-8, "n={n} residual {}", sol.kkt_residual);
            assert!((sol.x.norm_squared() - 0.7).abs() < 1e-8 * 0.7);
            let lambda1 = hermitian_eig(&prob.a_bar).unwrap().values[0];
            assert!(sol.multiplier > lambda1);
        }
    }

    #[test]
    fn vacuous_constraint_gives_dominant_eigenvector() {
        let mut r = rng(5);
        let cm = random_psd(5, 3, 5.0, &mut r);
        let h = random_vector(5, &mut r);
        let sol = optimize_precoder(&cm, &h, 2.0, 0.0, 1.0).unwrap();
        assert_eq!(sol.case_fired, PrecoderCase::EigenvectorInterior);
        let lambda1 = hermitian_eig(&cm).unwrap().values[0];
        assert!((sol.objective - 2.0 * lambda1).abs() < 1e-10 * sol.objective);
        assert!((sol.p.norm_squared() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn aligned_channels_give_matched_precoder() {
        let mut r = rng(6);
        let h = random_vector(4, &mut r);
        let cm = outer(&h.conjugate(), &h.conjugate());
        let sol = optimize_precoder(&cm, &h, 1.5, 1.0, 1.0).unwrap();
        let matched = h.conjugate().unscale(h.norm()).scale(1.5f64.sqrt());
        let overlap = matched.dotc(&sol.p).norm() / 1.5;
        assert!((overlap - 1.0).abs() < 1e-10);
        assert!((sol.comm_snr - 1.5 * h.norm_squared()).abs() < 1e-10 * sol.comm_snr);
    }

    #[test]
    fn infeasible_requirement_is_rejected() {
        let h = CVector::from_element(2, c(0.1, 0.0));
        let err = optimize_precoder(&CMatrix::identity(2, 2), &h, 1.0, 10.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }

    #[test]
    fn binding_constraint_is_met_with_equality() {
        let mut r = rng(7);
        let cm = random_psd(6, 2, 6.0, &mut r);
        let h = random_vector(6, &mut r);
        // demand nearly all the power toward the UE
        let gamma = 0.9 * h.norm_squared();
        let sol = optimize_precoder(&cm, &h, 1.0, gamma, 1.0).unwrap();
        assert_eq!(sol.case_fired, PrecoderCase::BoundaryLemma1);
        assert!((sol.comm_snr - gamma).abs() < 1e-8 * gamma);
        assert!((sol.p.norm_squared() - 1.0).abs() < 1e-10);
        assert!(!sol.basis_rank_deficient);
    }

    #[test]
    fn full_rank_gain_matrix_uses_reduced_basis() {
        let mut r = rng(8);
        let cm = random_psd(4, 4, 4.0, &mut r);
        let h = random_vector(4, &mut r);
        let gamma = 0.8 * h.norm_squared();
        let sol = optimize_precoder(&cm, &h, 1.0, gamma, 1.0).unwrap();
        assert!(sol.basis_rank_deficient);
        assert!(sol.comm_snr >= gamma * (1.0 - 1e-8));
        assert!((sol.p.norm_squared() - 1.0).abs() < 1e-10);
    }
}
