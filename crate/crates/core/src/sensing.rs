//! Target-present channel statistics.
//!
//! The target echo is the sum of a direct path, a via-surface path and the two
//! mixed paths, each built from LOS and NLOS components. [`target_covariance`]
//! assembles its covariance in closed form, [`gain_matrix`] the quadratic form
//! `C` with `p^H C p = tr(R)`, and [`EffectiveChannelSampler`] draws the echo
//! itself so both closed forms can be checked by Monte Carlo.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{ChannelSet, RisPhases};
use crate::error::{ensure_len, Error, Result};
use crate::numerics::{
    bilinear, hermitian_eig, hermitian_part, outer, standard_complex_normal, CMatrix, CVector,
    GaussianSampler,
};

/// Variances of the direct, via-surface and mixed-path RCS coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcsVariances {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl RcsVariances {
    pub fn new(beta1: f64, beta2: f64, beta3: f64) -> Self {
        Self { beta1, beta2, beta3 }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    fn validate(&self) -> Result<()> {
        if [self.beta1, self.beta2, self.beta3]
            .iter()
            .any(|b| !(*b >= 0.0 && b.is_finite()))
        {
            return Err(Error::Config(format!("invalid RCS variances {self:?}")));
        }
        Ok(())
    }
}

/// Covariance `R` of the target echo and the gain matrix `C` for one
/// precoder/phase pair.
#[derive(Debug, Clone)]
pub struct SensingCovariance {
    pub r: CMatrix,
    pub c: CMatrix,
}

impl SensingCovariance {
    pub fn assemble(
        ch: &ChannelSet,
        phases: &RisPhases,
        p: &CVector,
        betas: RcsVariances,
    ) -> Result<Self> {
        Ok(Self {
            r: target_covariance(ch, phases, p, betas)?,
            c: gain_matrix(ch, phases, betas)?,
        })
    }
}

fn check_inputs(ch: &ChannelSet, phases: &RisPhases, p: Option<&CVector>) -> Result<()> {
    ch.validate()?;
    ensure_len("RIS phases", phases.len(), ch.ris_elements())?;
    if let Some(p) = p {
        ensure_len("precoder", p.len(), ch.antennas())?;
    }
    Ok(())
}

// Terms of R that pair the LOS vector `h` with an NLOS correlation `r`:
// h h^H (p^H r^T p) + h h^H p^* p^T r + r p^* p^T h h^H + |h^T p|^2 r.
fn los_nlos_terms(h: &CVector, r: &CMatrix, h_nlos_coef: f64, p: &CVector) -> CMatrix {
    let pc = p.conjugate();
    let hh = outer(h, h);
    let quad = (p.adjoint() * r.transpose() * p)[(0, 0)];
    let left = &hh * &pc; // h h^H p^*
    let right = p.transpose() * r; // p^T r
    let mixed = &left * &right;
    let rp = r * &pc; // r p^*
    let row = p.transpose() * &hh; // p^T h h^H
    let mixed_t = &rp * &row;
    hh * quad + mixed + mixed_t + r.scale(h_nlos_coef)
}

/// Closed-form covariance `E[h_2 h_2^H]` of the target echo.
pub fn target_covariance(
    ch: &ChannelSet,
    phases: &RisPhases,
    p: &CVector,
    betas: RcsVariances,
) -> Result<CMatrix> {
    check_inputs(ch, phases, Some(p))?;
    betas.validate()?;
    let k = ch.antennas();
    let hs = &ch.hbar_s2;
    let hc = ch.hbar_c2(phases)?;
    let rs = &ch.r_s2;
    let rc = ch.r_c2(phases)?;
    let hs_p = bilinear(hs, p);
    let hc_p = bilinear(&hc, p);

    let mut r = CMatrix::zeros(k, k);
    if betas.beta1 > 0.0 {
        let direct = outer(hs, hs).scale(hs_p.norm_sqr()) + los_nlos_terms(hs, rs, hs_p.norm_sqr(), p);
        r += direct.scale(betas.beta1);
    }
    if betas.beta2 > 0.0 {
        let surface =
            outer(&hc, &hc).scale(hc_p.norm_sqr()) + los_nlos_terms(&hc, &rc, hc_p.norm_sqr(), p);
        r += surface.scale(betas.beta2);
    }
    if betas.beta3 > 0.0 {
        let v = hs * hc_p + &hc * hs_p;
        let mixed = outer(&v, &v)
            + los_nlos_terms(hs, &rc, hs_p.norm_sqr(), p)
            + los_nlos_terms(&hc, rs, hc_p.norm_sqr(), p);
        r += mixed.scale(betas.beta3);
    }
    clean_psd(r)
}

/// Symmetrizes and floors round-off negative eigenvalues.
fn clean_psd(r: CMatrix) -> Result<CMatrix> {
    let r = hermitian_part(&r);
    if r.norm() == 0.0 {
        return Ok(r);
    }
    let eig = hermitian_eig(&r)?;
    let max = eig.max_eigenvalue().max(0.0);
    let min = eig.min_eigenvalue();
    if min >= 0.0 {
        return Ok(r);
    }
    if min < -1e-10 * max {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    Ok(hermitian_part(&eig.reconstruct_with(|x| x.max(0.0))))
}

// weight · h_o^* h_o^T + los_norm · r^T + h_c^* h_c^T r^T + r^T h_c^* h_c^T
fn gain_block(h_outer: &CVector, weight: f64, los_norm: f64, h_corr: &CVector, r: &CMatrix) -> CMatrix {
    let hh_outer = h_outer.conjugate() * h_outer.transpose();
    let hh_corr = h_corr.conjugate() * h_corr.transpose();
    let rt = r.transpose();
    hh_outer.scale(weight) + rt.scale(los_norm) + &hh_corr * &rt + &rt * &hh_corr
}

/// Gain matrix `C` of the sensing objective, satisfying `p^H C p = tr(R(p))`.
pub fn gain_matrix(ch: &ChannelSet, phases: &RisPhases, betas: RcsVariances) -> Result<CMatrix> {
    check_inputs(ch, phases, None)?;
    betas.validate()?;
    let k = ch.antennas();
    let hs = &ch.hbar_s2;
    let hc = ch.hbar_c2(phases)?;
    let rs = &ch.r_s2;
    let rc = ch.r_c2(phases)?;
    let ns = hs.norm_squared();
    let nc = hc.norm_squared();
    let tr_s = rs.trace().re;
    let tr_c = rc.trace().re;

    let mut c = CMatrix::zeros(k, k);
    if betas.beta1 > 0.0 {
        c += gain_block(hs, ns + tr_s, ns, hs, rs).scale(betas.beta1);
    }
    if betas.beta2 > 0.0 {
        c += gain_block(&hc, nc + tr_c, nc, &hc, &rc).scale(betas.beta2);
    }
    if betas.beta3 > 0.0 {
        let s_then_c = gain_block(&hc, ns + tr_s, ns, hs, &rc)
            + (hc.conjugate() * hs.transpose()) * hs.dotc(&hc);
        let c_then_s = gain_block(hs, nc + tr_c, nc, &hc, rs)
            + (hs.conjugate() * hc.transpose()) * hc.dotc(hs);
        c += (s_then_c + c_then_s).scale(betas.beta3);
    }
    Ok(hermitian_part(&c))
}

/// Draws target-echo realizations `h_2[l]` (precoder included) path by path.
///
/// The NLOS RIS-target channel is drawn in full and pushed through the
/// cascade, and all three RCS coefficients are independent per draw.
#[derive(Debug, Clone)]
pub struct EffectiveChannelSampler {
    hs: CVector,
    hc: CVector,
    a_t: CVector,
    reflected_b: CVector,
    hs_p: Complex64,
    hc_p: Complex64,
    p: CVector,
    nlos_tx: GaussianSampler,
    nlos_ris: GaussianSampler,
    amp: [f64; 3],
}

impl EffectiveChannelSampler {
    pub fn new(ch: &ChannelSet, phases: &RisPhases, p: &CVector, betas: RcsVariances) -> Result<Self> {
        check_inputs(ch, phases, Some(p))?;
        betas.validate()?;
        let hc = ch.hbar_c2(phases)?;
        Ok(Self {
            hs_p: bilinear(&ch.hbar_s2, p),
            hc_p: bilinear(&hc, p),
            hs: ch.hbar_s2.clone(),
            hc,
            a_t: ch.a_t.clone(),
            reflected_b: ch.b_t.component_mul(&phases.reflection()),
            p: p.clone(),
            nlos_tx: GaussianSampler::new(&ch.r_s2)?,
            nlos_ris: GaussianSampler::new(&ch.r_r2)?,
            amp: [betas.beta1.sqrt(), betas.beta2.sqrt(), betas.beta3.sqrt()],
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let a1 = standard_complex_normal(rng) * self.amp[0];
        let a2 = standard_complex_normal(rng) * self.amp[1];
        let a3 = standard_complex_normal(rng) * self.amp[2];
        let hs_nlos = self.nlos_tx.sample(rng);
        let hr_nlos = self.nlos_ris.sample(rng);
        let hc_nlos = &self.a_t * bilinear(&self.reflected_b, &hr_nlos);
        let hs_nlos_p = bilinear(&hs_nlos, &self.p);
        let hc_nlos_p = bilinear(&hc_nlos, &self.p);
        let (hs, hc) = (&self.hs, &self.hc);
        let (hs_p, hc_p) = (self.hs_p, self.hc_p);

        let direct = hs * (hs_p + hs_nlos_p) + &hs_nlos * hs_p;
        let surface = hc * (hc_p + hc_nlos_p) + &hc_nlos * hc_p;
        let s_then_c = hs * (hc_p + hc_nlos_p) + &hs_nlos * hc_p;
        let c_then_s = hc * (hs_p + hs_nlos_p) + &hc_nlos * hs_p;
        direct * a1 + surface * a2 + (s_then_c + c_then_s) * a3
    }
}

/// One draw of the target echo; see [`EffectiveChannelSampler`].
pub fn sample_effective_channel<R: Rng + ?Sized>(
    ch: &ChannelSet,
    phases: &RisPhases,
    p: &CVector,
    betas: RcsVariances,
    rng: &mut R,
) -> Result<CVector> {
    Ok(EffectiveChannelSampler::new(ch, phases, p, betas)?.sample(rng))
}
