//! Array geometry, steering vectors, local-scattering correlation and the
//! transceiver-RIS cascade.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_len, Error, Result};
use crate::harness::ScenarioConfig;
use crate::numerics::{bilinear, hermitian_part, CMatrix, CVector, GaussianSampler};

/// Uniform planar array, elements indexed row-major with the horizontal index
/// running fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub horizontal: usize,
    pub vertical: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl ArrayGeometry {
    pub fn new(horizontal: usize, vertical: usize, spacing: f64) -> Result<Self> {
        if horizontal == 0 || vertical == 0 {
            return Err(Error::Config("array dimensions must be positive".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Config(format!("array spacing must be positive, got {spacing}")));
        }
        Ok(Self {
            horizontal,
            vertical,
            spacing,
        })
    }

    pub fn half_wavelength(horizontal: usize, vertical: usize) -> Self {
        Self {
            horizontal,
            vertical,
            spacing: 0.5,
        }
    }

    pub fn len(&self) -> usize {
        self.horizontal * self.vertical
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(horizontal, vertical)` grid position of element `m`.
    pub fn position(&self, m: usize) -> (usize, usize) {
        (m % self.horizontal, m / self.horizontal)
    }
}

/// Azimuth/elevation pair in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !(azimuth > -PI && azimuth <= PI) {
            return Err(Error::Config(format!("azimuth {azimuth} outside (-pi, pi]")));
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&elevation) {
            return Err(Error::Config(format!(
                "elevation {elevation} outside [-pi/2, pi/2]"
            )));
        }
        Ok(Self { azimuth, elevation })
    }

    pub fn from_degrees(azimuth: f64, elevation: f64) -> Result<Self> {
        Self::new(azimuth.to_radians(), elevation.to_radians())
    }

    /// Direction cosines `(sin φ cos θ, sin θ)` seen by the planar array.
    fn spatial_frequencies(azimuth: f64, elevation: f64) -> (f64, f64) {
        (azimuth.sin() * elevation.cos(), elevation.sin())
    }
}

/// Array response with unit-modulus entries
/// `exp(j 2π d [p sin φ cos θ + q sin θ])`.
pub fn upa_steering(geom: &ArrayGeometry, dir: Direction) -> CVector {
    steering_raw(geom, dir.azimuth, dir.elevation)
}

fn steering_raw(geom: &ArrayGeometry, azimuth: f64, elevation: f64) -> CVector {
    let (u, v) = Direction::spatial_frequencies(azimuth, elevation);
    let k = TAU * geom.spacing;
    CVector::from_fn(geom.len(), |m, _| {
        let (p, q) = geom.position(m);
        Complex64::from_polar(1.0, k * (p as f64 * u + q as f64 * v))
    })
}

/// Parameters of the clustered local-scattering model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringModel {
    pub clusters: usize,
    /// Full width (radians) of the azimuth window in which cluster centres are drawn.
    pub azimuth_spread: f64,
    /// Full width (radians) of the elevation window for cluster centres.
    pub elevation_spread: f64,
    /// Per-cluster angular standard deviation (radians).
    pub angular_std: f64,
    pub samples: usize,
}

/// Spatial correlation `E[a(φ,θ) a(φ,θ)^H]` under clustered Gaussian angular
/// spread, estimated by Monte Carlo and normalized to trace = element count.
///
/// Cluster centres are drawn uniformly around `nominal`, then sample `i` is
/// attributed to cluster `i mod clusters` so every cluster carries equal power.
/// The UPA correlation only depends on element-position differences, so the
/// average is accumulated on the `(2H-1) x (2V-1)` difference grid.
pub fn local_scattering_correlation<R: Rng + ?Sized>(
    geom: &ArrayGeometry,
    nominal: Direction,
    model: &ScatteringModel,
    rng: &mut R,
) -> Result<CMatrix> {
    if model.clusters == 0 || model.samples == 0 {
        return Err(Error::Config("scattering model needs clusters and samples".into()));
    }
    if model.angular_std.is_nan() || model.angular_std <= 0.0 {
        return Err(Error::Config("angular standard deviation must be positive".into()));
    }

    let centres: Vec<(f64, f64)> = (0..model.clusters)
        .map(|_| {
            let da = (rng.random::<f64>() - 0.5) * model.azimuth_spread;
            let de = (rng.random::<f64>() - 0.5) * model.elevation_spread;
            (nominal.azimuth + da, nominal.elevation + de)
        })
        .collect();

    let (h, v) = (geom.horizontal, geom.vertical);
    let (dh, dv) = (2 * h - 1, 2 * v - 1);
    let k = TAU * geom.spacing;
    let mut acc = vec![Complex64::new(0.0, 0.0); dh * dv];
    let mut ph = vec![Complex64::new(0.0, 0.0); dh];
    let mut pv = vec![Complex64::new(0.0, 0.0); dv];

    for i in 0..model.samples {
        let (ca, ce) = centres[i % model.clusters];
        let za: f64 = rng.sample(StandardNormal);
        let ze: f64 = rng.sample(StandardNormal);
        let (u, w) = Direction::spatial_frequencies(
            ca + model.angular_std * za,
            ce + model.angular_std * ze,
        );
        for (idx, slot) in ph.iter_mut().enumerate() {
            let d = idx as f64 - (h as f64 - 1.0);
            *slot = Complex64::from_polar(1.0, k * d * u);
        }
        for (idx, slot) in pv.iter_mut().enumerate() {
            let d = idx as f64 - (v as f64 - 1.0);
            *slot = Complex64::from_polar(1.0, k * d * w);
        }
        for (jq, eq) in pv.iter().enumerate() {
            let row = &mut acc[jq * dh..(jq + 1) * dh];
            for (slot, ep) in row.iter_mut().zip(&ph) {
                *slot += ep * eq;
            }
        }
    }

    let n = geom.len();
    let scale = 1.0 / model.samples as f64;
    let mut r = CMatrix::from_fn(n, n, |a, b| {
        let (pa, qa) = geom.position(a);
        let (pb, qb) = geom.position(b);
        let ip = pa + h - 1 - pb;
        let iq = qa + v - 1 - qb;
        acc[iq * dh + ip] * scale
    });
    r = hermitian_part(&r);
    let trace: f64 = (0..n).map(|i| r[(i, i)].re).sum();
    Ok(r.scale(n as f64 / trace))
}

/// Continuous RIS phase shifts, each wrapped into `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPhases {
    psi: Vec<f64>,
}

impl RisPhases {
    pub fn new(psi: Vec<f64>) -> Self {
        Self {
            psi: psi.into_iter().map(wrap_phase).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self { psi: vec![0.0; n] }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self::new((0..n).map(|_| rng.random::<f64>() * TAU).collect())
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.psi
    }

    /// Diagonal of the reflection matrix `D_ψ`.
    pub fn reflection(&self) -> CVector {
        CVector::from_iterator(self.psi.len(), self.psi.iter().map(|&p| Complex64::from_polar(1.0, p)))
    }
}

pub(crate) fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// `b_t^T D_ψ` as a vector (element-wise product of `b_t` with the reflection).
fn reflected_row(b_t: &CVector, phases: &RisPhases) -> Result<CVector> {
    ensure_len("RIS phases", phases.len(), b_t.len())?;
    Ok(b_t.component_mul(&phases.reflection()))
}

/// Complex scalar `b_t^T D_ψ h_r`.
pub fn cascade_gain(b_t: &CVector, phases: &RisPhases, h_r: &CVector) -> Result<Complex64> {
    let row = reflected_row(b_t, phases)?;
    ensure_len("RIS-side channel", h_r.len(), b_t.len())?;
    Ok(bilinear(&row, h_r))
}

/// Cascaded channel `a_t b_t^T D_ψ h_r`.
pub fn cascaded_channel(
    a_t: &CVector,
    b_t: &CVector,
    phases: &RisPhases,
    h_r: &CVector,
) -> Result<CVector> {
    Ok(a_t * cascade_gain(b_t, phases, h_r)?)
}

/// Variance of the scalar `b_t^T D_ψ h̃_r` for `h̃_r ~ CN(0, R_r)`.
pub fn cascade_variance(b_t: &CVector, phases: &RisPhases, r_r: &CMatrix) -> Result<f64> {
    let g = reflected_row(b_t, phases)?;
    if r_r.shape() != (g.len(), g.len()) {
        return Err(Error::DimensionMismatch(format!(
            "RIS correlation is {}x{}, expected {n}x{n}",
            r_r.nrows(),
            r_r.ncols(),
            n = g.len()
        )));
    }
    // g^T R g^*
    let rg = r_r * g.conjugate();
    Ok(bilinear(&g, &rg).re.max(0.0))
}

/// Rank-one correlation `a_t b_t^T D_ψ R_r D_ψ^* b_t^* a_t^H`.
pub fn cascaded_correlation(
    a_t: &CVector,
    b_t: &CVector,
    phases: &RisPhases,
    r_r: &CMatrix,
) -> Result<CMatrix> {
    let s = cascade_variance(b_t, phases, r_r)?;
    Ok((a_t * a_t.adjoint()).scale(s))
}

/// Deterministic channel quantities of one scenario.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// Static transceiver-to-UE channel (LOS + one NLOS realization).
    pub h_s1: CVector,
    /// RIS-to-UE channel.
    pub h_r1: CVector,
    /// Transceiver side of the transceiver-RIS LOS link.
    pub a_t: CVector,
    /// RIS side of the transceiver-RIS LOS link.
    pub b_t: CVector,
    /// LOS transceiver-to-target channel.
    pub hbar_s2: CVector,
    /// LOS RIS-to-target channel.
    pub hbar_r2: CVector,
    /// NLOS transceiver-target correlation.
    pub r_s2: CMatrix,
    /// NLOS RIS-target correlation.
    pub r_r2: CMatrix,
    /// Clutter spatial correlation (trace normalized to K).
    pub r_clutter: CMatrix,
}

impl ChannelSet {
    pub fn antennas(&self) -> usize {
        self.h_s1.len()
    }

    pub fn ris_elements(&self) -> usize {
        self.b_t.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.antennas();
        let n = self.ris_elements();
        ensure_len("h_r1", self.h_r1.len(), n)?;
        ensure_len("a_t", self.a_t.len(), k)?;
        ensure_len("hbar_s2", self.hbar_s2.len(), k)?;
        ensure_len("hbar_r2", self.hbar_r2.len(), n)?;
        for (name, m, d) in [
            ("R_s2", &self.r_s2, k),
            ("R_r2", &self.r_r2, n),
            ("R_clutter", &self.r_clutter, k),
        ] {
            if m.shape() != (d, d) {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {d}x{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(())
    }

    /// End-to-end UE channel `h_1 = h_s1 + a_t b_t^T D_ψ h_r1`.
    pub fn ue_channel(&self, phases: &RisPhases) -> Result<CVector> {
        Ok(&self.h_s1 + cascaded_channel(&self.a_t, &self.b_t, phases, &self.h_r1)?)
    }

    /// LOS cascaded target channel `h̄_c2`.
    pub fn hbar_c2(&self, phases: &RisPhases) -> Result<CVector> {
        cascaded_channel(&self.a_t, &self.b_t, phases, &self.hbar_r2)
    }

    /// NLOS cascaded target correlation `R_c2`.
    pub fn r_c2(&self, phases: &RisPhases) -> Result<CMatrix> {
        cascaded_correlation(&self.a_t, &self.b_t, phases, &self.r_r2)
    }

    /// Same scenario with the RIS removed (`b_t = 0`).
    pub fn without_ris(&self) -> Self {
        let mut out = self.clone();
        out.b_t.fill(Complex64::new(0.0, 0.0));
        out
    }
}

/// Per-scenario gain budget applied to the unit-gain template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGains {
    /// Per-antenna gain of the static transceiver-target LOS path.
    pub static_target: f64,
    /// Per-element gain of the RIS-target LOS path.
    pub ris_target: f64,
    /// Per-antenna gain of the static transceiver-UE path.
    pub ue_static: f64,
    /// Per-element gain of the RIS-UE path.
    pub ue_ris: f64,
    /// Per-element gain of the transceiver-RIS link, carried by `b_t`.
    pub tx_ris: f64,
    /// NLOS trace budget relative to the LOS gain (`1/κ`).
    pub nlos_fraction: f64,
}

/// Unit-gain channel shapes of a scenario: steering vectors, normalized
/// correlation matrices and the fixed UE NLOS realizations.
#[derive(Debug, Clone)]
pub struct ChannelTemplate {
    pub tx_array: ArrayGeometry,
    pub ris_array: ArrayGeometry,
    pub a_t: CVector,
    pub b_t: CVector,
    pub ue_los_tx: CVector,
    pub ue_nlos_tx: CVector,
    pub ue_los_ris: CVector,
    pub ue_nlos_ris: CVector,
    pub target_los_tx: CVector,
    pub target_corr_tx: CMatrix,
    pub target_los_ris: CVector,
    pub target_corr_ris: CMatrix,
    pub clutter_corr: CMatrix,
}

impl ChannelTemplate {
    /// Draws the scattering clusters and UE NLOS realizations. The RNG is
    /// consumed in a fixed order so a seed pins the whole template.
    pub fn build<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Self> {
        let tx = config.tx_geometry()?;
        let ris = config.ris_geometry()?;
        let sensing = config.sensing_scattering();
        let clutter = config.clutter_scattering();

        let target_tx = config.direction(config.target_from_tx_deg)?;
        let target_ris = config.direction(config.target_from_ris_deg)?;
        let ue_tx = config.direction(config.ue_from_tx_deg)?;
        let ue_ris = config.direction(config.ue_from_ris_deg)?;
        let ris_tx = config.direction(config.ris_from_tx_deg)?;
        let tx_ris = config.direction(config.tx_from_ris_deg)?;

        let target_corr_tx = local_scattering_correlation(&tx, target_tx, &sensing, rng)?;
        let target_corr_ris = local_scattering_correlation(&ris, target_ris, &sensing, rng)?;
        let ue_corr_tx = local_scattering_correlation(&tx, ue_tx, &sensing, rng)?;
        let ue_corr_ris = local_scattering_correlation(&ris, ue_ris, &sensing, rng)?;
        let clutter_corr = local_scattering_correlation(&tx, ris_tx, &clutter, rng)?;
        let ue_nlos_tx = GaussianSampler::new(&ue_corr_tx)?.sample(rng);
        let ue_nlos_ris = GaussianSampler::new(&ue_corr_ris)?.sample(rng);

        Ok(Self {
            tx_array: tx,
            ris_array: ris,
            a_t: upa_steering(&tx, ris_tx),
            b_t: upa_steering(&ris, tx_ris),
            ue_los_tx: upa_steering(&tx, ue_tx),
            ue_nlos_tx,
            ue_los_ris: upa_steering(&ris, ue_ris),
            ue_nlos_ris,
            target_los_tx: upa_steering(&tx, target_tx),
            target_corr_tx,
            target_los_ris: upa_steering(&ris, target_ris),
            target_corr_ris,
            clutter_corr,
        })
    }

    /// Scales the template into a [`ChannelSet`]: LOS vectors get `√gain`,
    /// NLOS correlations a trace of `gain · elements / κ`.
    pub fn channels(&self, gains: &ChannelGains) -> ChannelSet {
        let nlos_amp = gains.nlos_fraction.sqrt();
        ChannelSet {
            h_s1: (&self.ue_los_tx + self.ue_nlos_tx.scale(nlos_amp)).scale(gains.ue_static.sqrt()),
            h_r1: (&self.ue_los_ris + self.ue_nlos_ris.scale(nlos_amp)).scale(gains.ue_ris.sqrt()),
            a_t: self.a_t.clone(),
            b_t: self.b_t.scale(gains.tx_ris.sqrt()),
            hbar_s2: self.target_los_tx.scale(gains.static_target.sqrt()),
            hbar_r2: self.target_los_ris.scale(gains.ris_target.sqrt()),
            r_s2: self.target_corr_tx.scale(gains.static_target * gains.nlos_fraction),
            r_r2: self.target_corr_ris.scale(gains.ris_target * gains.nlos_fraction),
            r_clutter: self.clutter_corr.clone(),
        }
    }
}

/// Template plus gains for one sweep point.
pub fn build_scenario_channels<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    snr_db: f64,
    rng: &mut R,
) -> Result<ChannelSet> {
    let template = ChannelTemplate::build(config, rng)?;
    Ok(template.channels(&crate::harness::apply_snr_point(config, snr_db)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{hermitian_eig, outer, relative_frobenius, standard_complex_normal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cvec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| standard_complex_normal(rng))
    }

    #[test]
    fn broadside_is_all_ones() {
        let a = upa_steering(&ArrayGeometry::half_wavelength(6, 6), Direction::new(0.0, 0.0).unwrap());
        assert!(a.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn endfire_two_elements() {
        let a = upa_steering(
            &ArrayGeometry::half_wavelength(2, 1),
            Direction::new(PI / 2.0, 0.0).unwrap(),
        );
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_has_unit_modulus_entries() {
        let a = upa_steering(
            &ArrayGeometry::half_wavelength(6, 6),
            Direction::new(PI / 6.0, -PI / 5.0).unwrap(),
        );
        assert!((a.norm_squared() - 36.0).abs() < 1e-12);
        assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn steering_index_order_is_horizontal_fastest() {
        let geom = ArrayGeometry::half_wavelength(3, 2);
        let dir = Direction::new(0.3, 0.2).unwrap();
        let a = upa_steering(&geom, dir);
        let (u, v) = (0.3f64.sin() * 0.2f64.cos(), 0.2f64.sin());
        // element 4 sits at p = 1, q = 1
        let expected = Complex64::from_polar(1.0, PI * (u + v));
        assert!((a[4] - expected).norm() < 1e-14);
    }

    #[test]
    fn direction_validation() {
        assert!(Direction::new(-PI, 0.0).is_err());
        assert!(Direction::new(PI, 0.0).is_ok());
        assert!(Direction::new(0.0, 1.6).is_err());
    }

    #[test]
    fn scattering_trace_and_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let geom = ArrayGeometry::half_wavelength(4, 3);
        let model = ScatteringModel {
            clusters: 6,
            azimuth_spread: 40f64.to_radians(),
            elevation_spread: 20f64.to_radians(),
            angular_std: 10f64.to_radians(),
            samples: 20_000,
        };
        let r = local_scattering_correlation(&geom, Direction::new(0.4, -0.3).unwrap(), &model, &mut rng)
            .unwrap();
        let trace: f64 = (0..12).map(|i| r[(i, i)].re).sum();
        assert!((trace - 12.0).abs() < 1e-9);
        assert!((&r - r.adjoint()).norm() < 1e-12);
        let eig = hermitian_eig(&r).unwrap();
        assert!(eig.min_eigenvalue() > -1e-10 * eig.max_eigenvalue());
    }

    #[test]
    fn scattering_matches_direct_outer_product_average() {
        // Same RNG stream, accumulated as a^H a explicitly.
        let geom = ArrayGeometry::half_wavelength(3, 2);
        let nominal = Direction::new(0.2, 0.1).unwrap();
        let model = ScatteringModel {
            clusters: 2,
            azimuth_spread: 0.5,
            elevation_spread: 0.2,
            angular_std: 0.1,
            samples: 500,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fast = local_scattering_correlation(&geom, nominal, &model, &mut rng).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let centres: Vec<(f64, f64)> = (0..2)
            .map(|_| {
                let da = (rng.random::<f64>() - 0.5) * 0.5;
                let de = (rng.random::<f64>() - 0.5) * 0.2;
                (0.2 + da, 0.1 + de)
            })
            .collect();
        let mut acc = CMatrix::zeros(6, 6);
        for i in 0..500 {
            let (ca, ce) = centres[i % 2];
            let za: f64 = rng.sample(StandardNormal);
            let ze: f64 = rng.sample(StandardNormal);
            let a = steering_raw(&geom, ca + 0.1 * za, ce + 0.1 * ze);
            acc += outer(&a, &a);
        }
        let slow = acc.unscale(500.0);
        assert!(relative_frobenius(&fast, &slow) < 1e-12);
    }

    #[test]
    fn zero_spread_limit_is_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let geom = ArrayGeometry::half_wavelength(6, 6);
        let nominal = Direction::new(PI / 6.0, -PI / 5.0).unwrap();
        let model = ScatteringModel {
            clusters: 1,
            azimuth_spread: 0.0,
            elevation_spread: 0.0,
            angular_std: 1e-6,
            samples: 10_000,
        };
        let r = local_scattering_correlation(&geom, nominal, &model, &mut rng).unwrap();
        let eig = hermitian_eig(&r).unwrap();
        assert!(eig.max_eigenvalue() / 36.0 > 0.99);
        let a = upa_steering(&geom, nominal);
        assert!(relative_frobenius(&r, &outer(&a, &a)) < 1e-3);
    }

    #[test]
    fn cascade_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a_t = cvec(&mut rng, 3);
        let b = CVector::from_element(1, Complex64::new(1.0, 0.0));
        let h = CVector::from_element(1, Complex64::new(1.0, 0.0));
        let flipped = cascaded_channel(&a_t, &b, &RisPhases::new(vec![PI]), &h).unwrap();
        assert!((flipped + &a_t).norm() < 1e-14);

        let zero = cascaded_channel(&a_t, &cvec(&mut rng, 4), &RisPhases::zeros(4), &CVector::zeros(4))
            .unwrap();
        assert_eq!(zero, CVector::zeros(3));
    }

    #[test]
    fn cascade_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a_t, b_t, h_r) = (cvec(&mut rng, 5), cvec(&mut rng, 4), cvec(&mut rng, 4));
        let phases = RisPhases::random(4, &mut rng);
        let d = CMatrix::from_diagonal(&phases.reflection());
        let dense = &a_t * b_t.transpose() * &d * &h_r;
        let fast = cascaded_channel(&a_t, &b_t, &phases, &h_r).unwrap();
        assert!((dense - fast).norm() < 1e-12);

        let g = cvec(&mut rng, 4);
        let r_r = outer(&g, &g) + CMatrix::identity(4, 4);
        let dense = &a_t * b_t.transpose() * &d * &r_r * d.conjugate() * b_t.conjugate() * a_t.adjoint();
        let fast = cascaded_correlation(&a_t, &b_t, &phases, &r_r).unwrap();
        assert!(relative_frobenius(&fast, &dense) < 1e-10);
    }

    #[test]
    fn cascaded_correlation_identity_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a_t = cvec(&mut rng, 3);
        let b_t = upa_steering(&ArrayGeometry::half_wavelength(2, 2), Direction::new(0.3, 0.1).unwrap());
        let phases = RisPhases::random(4, &mut rng);
        assert!((cascade_variance(&b_t, &phases, &CMatrix::identity(4, 4)).unwrap() - 4.0).abs() < 1e-12);
        let zero = cascaded_correlation(&a_t, &b_t, &phases, &CMatrix::zeros(4, 4)).unwrap();
        assert_eq!(zero, CMatrix::zeros(3, 3));
    }

    #[test]
    fn cascade_dimension_mismatch() {
        let v = CVector::zeros(3);
        assert!(matches!(
            cascaded_channel(&v, &v, &RisPhases::zeros(2), &v),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn phases_wrap_into_range() {
        let p = RisPhases::new(vec![-PI / 2.0, 3.0 * TAU + 0.5, TAU]);
        let s = p.as_slice();
        assert!((s[0] - 1.5 * PI).abs() < 1e-12);
        assert!((s[1] - 0.5).abs() < 1e-9);
        assert!(s[2].abs() < 1e-12);
    }
}
