//! Clutter-aware GLRT detection.
//!
//! Clutter is confined to the column space of a semi-unitary `U`. Maximizing
//! the likelihoods over the clutter coordinates leaves the quadratic statistic
//! `Σ_l y[l]^H T y[l]` with
//!
//! ```text
//! T = Σ⁻¹U (U^H Σ⁻¹ U)⁻¹ U^H Σ⁻¹ + σ⁻²(I − U U^H) − Σ⁻¹,   Σ = R + σ² I
//! ```
//!
//! and `T U = 0`, so anything inside the clutter subspace is ignored. The
//! clutter-unaware detector is the same formula with `U` empty.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_2};

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{cascade_variance, ChannelSet, RisPhases};
use crate::error::{ensure_len, Error, Result};
use crate::montecarlo::{count_hits, sample_stats, wilson_interval};
use crate::numerics::{
    bilinear, hermitian_eig, hermitian_part, psd_factor, standard_complex_normal, CMatrix, CVector,
    EigenDecomposition, DEFAULT_RANK_TOL,
};
use crate::sensing::{EffectiveChannelSampler, RcsVariances};

/// How many clutter eigenvectors to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankRule {
    /// Smallest `r` capturing this fraction of the trace, capped at `K - 1`.
    EnergyFraction(f64),
    Fixed(usize),
}

impl Default for RankRule {
    fn default() -> Self {
        RankRule::EnergyFraction(0.99)
    }
}

/// Semi-unitary basis of the clutter subspace.
#[derive(Debug, Clone)]
pub struct ClutterSubspace {
    basis: CMatrix,
    /// Clutter-correlation eigenvalues of the retained directions.
    eigenvalues: Vec<f64>,
    /// Set when the energy rule wanted `r >= K` and was clamped to `K - 1`.
    pub capped: bool,
}

impl ClutterSubspace {
    pub fn from_basis(basis: CMatrix, eigenvalues: Vec<f64>) -> Result<Self> {
        ensure_len("clutter eigenvalues", eigenvalues.len(), basis.ncols())?;
        Ok(Self {
            basis,
            eigenvalues,
            capped: false,
        })
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

pub fn estimate_clutter_subspace(r_clutter: &CMatrix, rule: RankRule) -> Result<ClutterSubspace> {
    let eig = hermitian_eig(r_clutter)?;
    let k = eig.dim();
    let max = eig.max_eigenvalue();
    let min = eig.min_eigenvalue();
    if max.is_nan() || max <= 1e-300 {
        return Err(Error::ZeroClutter);
    }
    if min < -DEFAULT_RANK_TOL * max {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    let values: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let trace: f64 = values.iter().sum();
    if trace.is_nan() || trace <= 1e-300 {
        return Err(Error::ZeroClutter);
    }

    let cap = k.saturating_sub(1).max(1);
    let (wanted, capped) = match rule {
        RankRule::Fixed(r) => {
            if r == 0 || r >= k {
                return Err(Error::Config(format!("clutter rank {r} outside [1, {}]", k - 1)));
            }
            (r, false)
        }
        RankRule::EnergyFraction(frac) => {
            let target = frac * trace * (1.0 - 1e-12);
            let mut cum = 0.0;
            let mut r = k;
            for (i, v) in values.iter().enumerate() {
                cum += v;
                if cum >= target {
                    r = i + 1;
                    break;
                }
            }
            if r > cap {
                (cap, true)
            } else {
                (r, false)
            }
        }
    };
    Ok(ClutterSubspace {
        basis: eig.vectors.columns(0, wanted).into_owned(),
        eigenvalues: values[..wanted].to_vec(),
        capped,
    })
}

/// Builds the GLRT test matrix. `subspace = None` gives the clutter-unaware
/// matrix `σ⁻² I − Σ⁻¹`.
pub fn build_test_matrix(
    r: &CMatrix,
    subspace: Option<&ClutterSubspace>,
    sigma2: f64,
) -> Result<CMatrix> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Config(format!("noise variance must be positive, got {sigma2}")));
    }
    let k = r.nrows();
    let eig = hermitian_eig(r)?;
    let max = eig.max_eigenvalue().max(0.0);
    if eig.min_eigenvalue() < -1e-10 * max.max(sigma2) {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min_eigenvalue(),
            max_eigenvalue: max,
        });
    }
    let sigma_inv = eig.reconstruct_with(|x| 1.0 / (x.max(0.0) + sigma2));
    let mut t = CMatrix::identity(k, k).scale(1.0 / sigma2) - &sigma_inv;

    if let Some(sub) = subspace.filter(|s| s.rank() > 0) {
        let u = sub.basis();
        if u.nrows() != k {
            return Err(Error::DimensionMismatch(format!(
                "clutter basis has {} rows, expected {k}",
                u.nrows()
            )));
        }
        let g = &sigma_inv * u;
        let inner = hermitian_part(&(u.adjoint() * &g));
        let chol = Cholesky::new(inner.clone()).ok_or(Error::SingularInnerBlock)?;
        let diag = chol.l_dirty().diagonal();
        let (dmin, dmax) = diag
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(d.re), hi.max(d.re)));
        if dmin.is_nan() || dmin <= 1e-8 * dmax {
            return Err(Error::SingularInnerBlock);
        }
        let solved = chol.solve(&g.adjoint());
        t += &g * solved - (u * u.adjoint()).scale(1.0 / sigma2);
    }
    Ok(hermitian_part(&t))
}

/// `Σ_l y[l]^H T y[l]` with `T` taken as its Hermitian part.
pub fn test_statistic(y: &[CVector], t: &CMatrix) -> Result<f64> {
    let th = hermitian_part(t);
    let mut total = 0.0;
    for v in y {
        ensure_len("received vector", v.len(), th.nrows())?;
        total += v.dotc(&(&th * v)).re;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Clutter plus noise.
    H0,
    /// Target echo plus clutter plus noise.
    H1,
}

/// Gaussian clutter living in the retained subspace with total received power
/// `CNR · σ² · K`, split in proportion to the retained eigenvalues.
#[derive(Debug, Clone)]
pub struct ClutterModel {
    /// Columns `√power_i · u_i`.
    scaled_basis: CMatrix,
}

impl ClutterModel {
    pub fn new(subspace: &ClutterSubspace, cnr_db: f64, sigma2: f64) -> Self {
        let k = subspace.basis().nrows();
        let total = if cnr_db == f64::NEG_INFINITY {
            0.0
        } else {
            10f64.powf(cnr_db / 10.0) * sigma2 * k as f64
        };
        let sum: f64 = subspace.eigenvalues().iter().sum();
        let mut scaled = subspace.basis().clone();
        for (j, &lambda) in subspace.eigenvalues().iter().enumerate() {
            let power = if sum > 0.0 { total * lambda / sum } else { 0.0 };
            scaled.column_mut(j).scale_mut(power.sqrt());
        }
        Self {
            scaled_basis: scaled,
        }
    }

    pub fn scaled_basis(&self) -> &CMatrix {
        &self.scaled_basis
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let z = CVector::from_fn(self.scaled_basis.ncols(), |_, _| standard_complex_normal(rng));
        &self.scaled_basis * z
    }
}

/// Unit-modulus QPSK symbol.
pub fn qpsk_symbol<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let k = rng.random_range(0..4u32) as f64;
    Complex64::from_polar(1.0, FRAC_PI_4 + k * FRAC_PI_2)
}

/// Draws the `L` received vectors of one decision window.
#[allow(clippy::too_many_arguments)]
pub fn simulate_received<R: Rng + ?Sized>(
    ch: &ChannelSet,
    phases: &RisPhases,
    p: &CVector,
    betas: RcsVariances,
    hypothesis: Hypothesis,
    clutter: &ClutterModel,
    sigma2: f64,
    symbols: usize,
    rng: &mut R,
) -> Result<Vec<CVector>> {
    let k = ch.antennas();
    ensure_len("clutter basis rows", clutter.scaled_basis().nrows(), k)?;
    let echo = match hypothesis {
        Hypothesis::H1 => Some(EffectiveChannelSampler::new(ch, phases, p, betas)?),
        Hypothesis::H0 => None,
    };
    let noise_std = sigma2.sqrt();
    Ok((0..symbols)
        .map(|_| {
            let mut y = clutter.sample(rng);
            y += CVector::from_fn(k, |_, _| standard_complex_normal(rng) * noise_std);
            if let Some(echo) = &echo {
                let s = qpsk_symbol(rng);
                y += echo.sample(rng) * s;
            }
            y
        })
        .collect())
}

/// Calibrated GLRT: test matrix plus threshold.
#[derive(Debug, Clone)]
pub struct DetectorSpec {
    pub t: CMatrix,
    pub threshold: f64,
    pub alpha: f64,
    pub symbols: usize,
}

impl DetectorSpec {
    pub fn detect(&self, y: &[CVector]) -> Result<bool> {
        Ok(test_statistic(y, &self.t)? >= self.threshold)
    }
}

pub fn detect(y: &[CVector], spec: &DetectorSpec) -> Result<bool> {
    spec.detect(y)
}

/// Result of a false-alarm calibration run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub threshold: f64,
    /// Probability of declaring a target when the statistic equals the
    /// threshold exactly. 1 unless the null statistic has an atom there.
    pub tie_probability: f64,
    /// False-alarm rate measured on an independent set of null decisions.
    pub realized_pfa: f64,
    /// 95% Wilson interval of `realized_pfa`.
    pub ci: (f64, f64),
    pub trials: usize,
}

impl Calibration {
    pub fn ci_halfwidth(&self) -> f64 {
        0.5 * (self.ci.1 - self.ci.0)
    }

    /// Decision for one statistic. Ties are broken at random so that a
    /// degenerate (e.g. identically zero) statistic still yields `α`; the
    /// generator is only consulted on exact ties.
    pub fn decide<R: Rng + ?Sized>(&self, statistic: f64, rng: &mut R) -> bool {
        statistic > self.threshold
            || (statistic == self.threshold
                && (self.tie_probability >= 1.0 || rng.random::<f64>() < self.tie_probability))
    }
}

pub fn min_calibration_trials(alpha: f64) -> usize {
    (50.0 / alpha).ceil() as usize
}

/// `k`-th largest sample with `k = round(α n)`, so a fraction `α` of the
/// samples lies at or above it.
pub fn empirical_threshold(stats: &mut [f64], alpha: f64) -> f64 {
    empirical_threshold_with_ties(stats, alpha).0
}

/// Threshold plus the tie probability that makes exactly `k = round(α n)`
/// samples count as detections.
pub fn empirical_threshold_with_ties(stats: &mut [f64], alpha: f64) -> (f64, f64) {
    assert!(!stats.is_empty(), "empty statistic sample");
    stats.sort_by(|a, b| a.total_cmp(b));
    let n = stats.len();
    let k = ((alpha * n as f64).round() as usize).clamp(1, n);
    let threshold = stats[n - k];
    let above = stats.iter().rev().take_while(|&&x| x > threshold).count();
    let ties = stats.iter().filter(|&&x| x == threshold).count();
    (threshold, (k - above) as f64 / ties as f64)
}

/// Re-measures the false-alarm rate of a fixed threshold on `trials` fresh
/// null decisions.
pub fn validate_threshold<F>(
    null_statistic: F,
    threshold: f64,
    tie_probability: f64,
    trials: usize,
    seed: u64,
) -> Calibration
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let mut cal = Calibration {
        threshold,
        tie_probability,
        realized_pfa: 0.0,
        ci: (0.0, 1.0),
        trials,
    };
    let hits = count_hits(trials, seed, |rng| {
        let t = null_statistic(rng);
        cal.decide(t, rng)
    });
    cal.realized_pfa = hits as f64 / trials as f64;
    cal.ci = wilson_interval(hits, trials);
    cal
}

/// Sets the threshold to the empirical `(1 − α)` quantile of `trials` null
/// statistics drawn from `seed`, then re-measures the false-alarm rate on
/// `trials` fresh decisions from `validation_seed`.
pub fn calibrate_threshold<F>(
    null_statistic: F,
    alpha: f64,
    trials: usize,
    seed: u64,
    validation_seed: u64,
) -> Result<Calibration>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let required = min_calibration_trials(alpha);
    if trials < required {
        return Err(Error::InsufficientTrials {
            trials,
            alpha,
            required,
        });
    }
    let mut stats = sample_stats(trials, seed, &null_statistic);
    let (threshold, ties) = empirical_threshold_with_ties(&mut stats, alpha);
    Ok(validate_threshold(null_statistic, threshold, ties, trials, validation_seed))
}

/// Fast statistic generator for one (scenario, precoder, phases, detector)
/// tuple.
///
/// Works in the eigenbasis `T = W diag(w) W^H`, where the statistic is
/// `Σ_k w_k |(W^H y)_k|²`. Noise is white in any unitary basis, the NLOS
/// cascade enters only through the scalar `b_t^T D_ψ h̃_r`, and directions
/// with `w_k ≈ 0` (the clutter subspace of the aware detector) are skipped,
/// so one symbol costs `O(K (r_s + r_c))` instead of `O(K²)`. The draws have
/// the same distribution as [`simulate_received`] followed by
/// [`test_statistic`].
#[derive(Debug, Clone)]
pub struct StatisticSampler {
    weights: Vec<f64>,
    clutter: CMatrix,
    noise_std: f64,
    hs: CVector,
    hc: CVector,
    a_t: CVector,
    nlos_tx: CMatrix,
    nlos_tx_p: CVector,
    hs_p: Complex64,
    hc_p: Complex64,
    at_p: Complex64,
    cascade_std: f64,
    amp: [f64; 3],
    symbols: usize,
}

impl StatisticSampler {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ch: &ChannelSet,
        phases: &RisPhases,
        p: &CVector,
        betas: RcsVariances,
        clutter: &ClutterModel,
        sigma2: f64,
        symbols: usize,
        t: &CMatrix,
    ) -> Result<Self> {
        let k = ch.antennas();
        ensure_len("precoder", p.len(), k)?;
        ensure_len("RIS phases", phases.len(), ch.ris_elements())?;
        let eig: EigenDecomposition = hermitian_eig(&hermitian_part(t))?;
        let wmax = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let keep: Vec<usize> = (0..k).filter(|&i| eig.values[i].abs() > 1e-13 * wmax).collect();
        let mut w = CMatrix::zeros(k, keep.len());
        for (dst, &src) in keep.iter().enumerate() {
            w.set_column(dst, &eig.vectors.column(src));
        }
        let wh = w.adjoint();

        let hc = ch.hbar_c2(phases)?;
        let nlos_factor = psd_factor(&ch.r_s2, DEFAULT_RANK_TOL)?;
        Ok(Self {
            weights: keep.iter().map(|&i| eig.values[i]).collect(),
            clutter: &wh * clutter.scaled_basis(),
            noise_std: sigma2.sqrt(),
            hs: &wh * &ch.hbar_s2,
            hs_p: bilinear(&ch.hbar_s2, p),
            hc_p: bilinear(&hc, p),
            hc: &wh * &hc,
            a_t: &wh * &ch.a_t,
            at_p: bilinear(&ch.a_t, p),
            nlos_tx_p: nlos_factor.transpose() * p,
            nlos_tx: &wh * &nlos_factor,
            cascade_std: cascade_variance(&ch.b_t, phases, &ch.r_r2)?.sqrt(),
            amp: [betas.beta1.sqrt(), betas.beta2.sqrt(), betas.beta3.sqrt()],
            symbols,
        })
    }

    fn accumulate<R: Rng + ?Sized>(&self, y: &mut CVector, rng: &mut R) -> f64 {
        for v in y.iter_mut() {
            *v += standard_complex_normal(rng) * self.noise_std;
        }
        if self.clutter.ncols() > 0 {
            let z = CVector::from_fn(self.clutter.ncols(), |_, _| standard_complex_normal(rng));
            y.gemv(Complex64::new(1.0, 0.0), &self.clutter, &z, Complex64::new(1.0, 0.0));
        }
        y.iter()
            .zip(&self.weights)
            .map(|(v, w)| w * v.norm_sqr())
            .sum()
    }

    /// One null-hypothesis decision statistic.
    pub fn null_statistic<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut total = 0.0;
        for _ in 0..self.symbols {
            let mut y = CVector::zeros(self.weights.len());
            total += self.accumulate(&mut y, rng);
        }
        total
    }

    /// One target-present decision statistic.
    pub fn target_statistic<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut total = 0.0;
        for _ in 0..self.symbols {
            let mut y = self.echo(rng) * qpsk_symbol(rng);
            total += self.accumulate(&mut y, rng);
        }
        total
    }

    fn echo<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let a1 = standard_complex_normal(rng) * self.amp[0];
        let a2 = standard_complex_normal(rng) * self.amp[1];
        let a3 = standard_complex_normal(rng) * self.amp[2];
        let z = CVector::from_fn(self.nlos_tx.ncols(), |_, _| standard_complex_normal(rng));
        let xi = standard_complex_normal(rng) * self.cascade_std;

        let hs_nlos = &self.nlos_tx * &z;
        let hs_nlos_p = bilinear(&self.nlos_tx_p, &z);
        let hc_nlos_p = self.at_p * xi;
        let (hs_p, hc_p) = (self.hs_p, self.hc_p);

        // coefficients of h̄_s, h̃_s, h̄_c and a_t (carrier of h̃_c)
        let c_hs = a1 * (hs_p + hs_nlos_p) + a3 * (hc_p + hc_nlos_p);
        let c_hs_nlos = a1 * hs_p + a3 * hc_p;
        let c_hc = a2 * (hc_p + hc_nlos_p) + a3 * (hs_p + hs_nlos_p);
        let c_at = (a2 * hc_p + a3 * hs_p) * xi;

        &self.hs * c_hs + hs_nlos * c_hs_nlos + &self.hc * c_hc + &self.a_t * c_at
    }
}
