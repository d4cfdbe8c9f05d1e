//! Narrowband channel model for the AP → RIS → user downlink.
//!
//! Every link follows a Rician model scaled by its free-space amplitude gain.
//! The direct AP–user link carries no line-of-sight component; the two
//! RIS-side links use the planar-array steering vector as their LoS part.
//! The RIS is indexed row-major with the horizontal (`y`) index running
//! fastest, so element `n = row * n_y + column`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rician K-factors above this are treated as pure line of sight.
pub const K_FACTOR_CAP: f64 = 1e9;

/// The three links of the downlink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Link {
    ApUser,
    ApRis,
    RisUser,
}

impl Link {
    pub fn label(self) -> &'static str {
        match self {
            Link::ApUser => "A-U",
            Link::ApRis => "A-R",
            Link::RisUser => "R-U",
        }
    }
}

/// Distance and arrival/departure angles of one link, seen from the RIS for
/// the RIS-side links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub link: Link,
    /// Metres.
    pub distance: f64,
    /// Elevation in radians, within `[-π/2, π/2]`.
    pub elevation: f64,
    /// Azimuth in radians, within `(-π, π]`.
    pub azimuth: f64,
}

impl LinkGeometry {
    pub fn new(link: Link, distance: f64, elevation: f64, azimuth: f64) -> Result<Self> {
        if !(distance > 0.0) || !distance.is_finite() {
            return Err(Error::domain(format!(
                "{} distance must be positive, got {distance}",
                link.label()
            )));
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&elevation) {
            return Err(Error::domain(format!("elevation {elevation} outside [-π/2, π/2]")));
        }
        if !(azimuth > -PI && azimuth <= PI) {
            return Err(Error::domain(format!("azimuth {azimuth} outside (-π, π]")));
        }
        Ok(Self {
            link,
            distance,
            elevation,
            azimuth,
        })
    }
}

/// Uniform planar array layout of the RIS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    /// Elements along the horizontal axis (number of independently tunable columns).
    pub n_y: usize,
    /// Elements along the vertical axis (elements per column).
    pub n_z: usize,
    /// Horizontal spacing in metres.
    pub d_y: f64,
    /// Vertical spacing in metres.
    pub d_z: f64,
    /// Carrier wavelength in metres.
    pub wavelength: f64,
}

impl Default for ArraySpec {
    /// 30 × 25 elements at 60 GHz with 0.45 λ spacing.
    fn default() -> Self {
        let wavelength = 5e-3;
        Self {
            n_y: 30,
            n_z: 25,
            d_y: 0.45 * wavelength,
            d_z: 0.45 * wavelength,
            wavelength,
        }
    }
}

impl ArraySpec {
    pub fn new(n_y: usize, n_z: usize, d_y: f64, d_z: f64, wavelength: f64) -> Result<Self> {
        let spec = Self {
            n_y,
            n_z,
            d_y,
            d_z,
            wavelength,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_y == 0 || self.n_z == 0 {
            return Err(Error::domain("array must have at least one element per axis"));
        }
        if !(self.d_y > 0.0 && self.d_z > 0.0 && self.wavelength > 0.0) {
            return Err(Error::domain("array spacing and wavelength must be positive"));
        }
        Ok(())
    }

    /// Total element count `N`.
    pub fn len(&self) -> usize {
        self.n_y * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of independently tunable columns.
    pub fn columns(&self) -> usize {
        self.n_y
    }

    /// Column index of element `n`.
    #[inline]
    pub fn column_of(&self, n: usize) -> usize {
        n % self.n_y
    }

    pub fn wave_number(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Aperture gain `η = √(4π d_y d_z) / λ` applied to the cascaded RIS path.
    pub fn eta(&self) -> f64 {
        (4.0 * PI * self.d_y * self.d_z).sqrt() / self.wavelength
    }
}

/// Complex channel of one link in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannel {
    pub link: Link,
    /// One coefficient for the AP–user link, `N` for the RIS-side links.
    pub coeffs: Vec<Complex64>,
    /// Large-scale amplitude gain.
    pub gain: f64,
    pub k_factor: f64,
}

impl LinkChannel {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// The scalar coefficient of a single-antenna link.
    pub fn scalar(&self) -> Complex64 {
        self.coeffs[0]
    }
}

/// Per-element reflection phases with unit amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    phases: Vec<f64>,
}

impl PhaseVector {
    /// Wraps per-element phases, rejecting values outside `[0, max_phase]`.
    pub fn new(phases: Vec<f64>, max_phase: f64) -> Result<Self> {
        if let Some((n, w)) = phases
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w >= 0.0 && **w <= max_phase))
        {
            return Err(Error::domain(format!(
                "phase {w} of element {n} outside [0, {max_phase}]"
            )));
        }
        Ok(Self { phases })
    }

    /// Expands one phase per column to every element of that column.
    pub fn from_columns(columns: &[f64], spec: &ArraySpec, max_phase: f64) -> Result<Self> {
        Error::check_dim("column phases", spec.columns(), columns.len())?;
        let phases = (0..spec.len()).map(|n| columns[spec.column_of(n)]).collect();
        Self::new(phases, max_phase)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// Free-space amplitude gain `λ / (4π d)`.
pub fn path_gain(distance: f64, wavelength: f64) -> Result<f64> {
    if !(distance > 0.0) || !(wavelength > 0.0) {
        return Err(Error::domain(format!(
            "path gain needs positive distance and wavelength, got d={distance}, λ={wavelength}"
        )));
    }
    Ok(wavelength / (4.0 * PI * distance))
}

/// Planar-array response `a_z ⊗ a_y` for elevation `theta` and azimuth `phi`.
pub fn steering_vector(spec: &ArraySpec, theta: f64, phi: f64) -> Vec<Complex64> {
    let kappa = spec.wave_number();
    let step_z = kappa * spec.d_z * theta.sin();
    let step_y = kappa * spec.d_y * phi.sin() * theta.cos();
    let a_y: Vec<Complex64> = (0..spec.n_y).map(|m| Complex64::cis(step_y * m as f64)).collect();
    let mut out = Vec::with_capacity(spec.len());
    for k in 0..spec.n_z {
        let z = Complex64::cis(step_z * k as f64);
        out.extend(a_y.iter().map(|y| z * y));
    }
    out
}

/// Draws `len` i.i.d. circularly-symmetric complex Gaussian entries of
/// variance `variance`.
pub fn sample_nlos<R: Rng + ?Sized>(len: usize, variance: f64, rng: &mut R) -> Result<Vec<Complex64>> {
    if !(variance >= 0.0) {
        return Err(Error::domain(format!(
            "NLoS variance must be non-negative, got {variance}"
        )));
    }
    let std = (variance / 2.0).sqrt();
    Ok((0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(std * re, std * im)
        })
        .collect())
}

/// Combines a precomputed NLoS draw with the link's LoS component.
///
/// The AP–user link ignores `k_factor` and is pure NLoS.
pub fn build_channel_from_nlos(
    geom: &LinkGeometry,
    spec: &ArraySpec,
    k_factor: f64,
    nlos: Vec<Complex64>,
) -> Result<LinkChannel> {
    if !(k_factor >= 0.0) {
        return Err(Error::domain(format!("K-factor must be non-negative, got {k_factor}")));
    }
    let gain = path_gain(geom.distance, spec.wavelength)?;
    let (k, expected_len) = match geom.link {
        Link::ApUser => (0.0, 1),
        Link::ApRis | Link::RisUser => (k_factor.min(K_FACTOR_CAP), spec.len()),
    };
    Error::check_dim("NLoS draw", expected_len, nlos.len())?;

    let nlos_weight = gain * (1.0 / (k + 1.0)).sqrt();
    let coeffs = if k == 0.0 {
        nlos.into_iter().map(|h| h * nlos_weight).collect()
    } else {
        let los_weight = gain * (k / (k + 1.0)).sqrt();
        steering_vector(spec, geom.elevation, geom.azimuth)
            .into_iter()
            .zip(nlos)
            .map(|(los, h)| los * los_weight + h * nlos_weight)
            .collect()
    };
    Ok(LinkChannel {
        link: geom.link,
        coeffs,
        gain,
        k_factor: k,
    })
}

/// Samples a fresh Rician channel for one link.
pub fn build_channel<R: Rng + ?Sized>(
    geom: &LinkGeometry,
    spec: &ArraySpec,
    k_factor: f64,
    nlos_variance: f64,
    rng: &mut R,
) -> Result<LinkChannel> {
    let len = match geom.link {
        Link::ApUser => 1,
        _ => spec.len(),
    };
    let nlos = sample_nlos(len, nlos_variance, rng)?;
    build_channel_from_nlos(geom, spec, k_factor, nlos)
}

/// RIS-reflected channel `η Σ_n h_RU[n] e^{jω_n} h_AR[n]`.
pub fn effective_channel(
    ap_ris: &LinkChannel,
    ris_user: &LinkChannel,
    phases: &PhaseVector,
    spec: &ArraySpec,
) -> Result<Complex64> {
    Error::check_dim("A-R channel", spec.len(), ap_ris.len())?;
    Error::check_dim("R-U channel", spec.len(), ris_user.len())?;
    Error::check_dim("phase vector", spec.len(), phases.len())?;
    Ok(cascaded_sum(&ap_ris.coeffs, &ris_user.coeffs, phases.as_slice()) * spec.eta())
}

/// `Σ_n h_RU[n] e^{jω_n} h_AR[n]` without the aperture factor.
pub(crate) fn cascaded_sum(ap_ris: &[Complex64], ris_user: &[Complex64], phases: &[f64]) -> Complex64 {
    ap_ris
        .iter()
        .zip(ris_user)
        .zip(phases)
        .map(|((a, r), w)| a * r * Complex64::cis(*w))
        .sum()
}

/// Upper bound `|h_AU| + η Σ_n |h_RU[n]||h_AR[n]|` on the combined amplitude,
/// attained by co-phasing every RIS path with the direct path.
pub fn coherent_bound(ap_user: Complex64, ap_ris: &LinkChannel, ris_user: &LinkChannel, spec: &ArraySpec) -> f64 {
    let ris: f64 = ap_ris
        .coeffs
        .iter()
        .zip(&ris_user.coeffs)
        .map(|(a, r)| a.norm() * r.norm())
        .sum();
    ap_user.norm() + spec.eta() * ris
}

/// Received power `P_t |h_AU + h_eff|²` in watts.
pub fn received_power(ap_user: Complex64, effective: Complex64, tx_power: f64) -> Result<f64> {
    if !(tx_power > 0.0) {
        return Err(Error::domain(format!(
            "transmit power must be positive, got {tx_power}"
        )));
    }
    Ok(tx_power * (ap_user + effective).norm_sqr())
}

/// Linear SNR `P_t |h_AU + h_eff|² / σ²`.
pub fn snr(ap_user: Complex64, effective: Complex64, tx_power: f64, noise_power: f64) -> Result<f64> {
    if !(noise_power > 0.0) {
        return Err(Error::domain(format!(
            "noise power must be positive, got {noise_power}"
        )));
    }
    Ok(received_power(ap_user, effective, tx_power)? / noise_power)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geom(link: Link, d: f64, theta: f64, phi: f64) -> LinkGeometry {
        LinkGeometry::new(link, d, theta, phi).unwrap()
    }

    #[test]
    fn path_gain_values() {
        let g = path_gain(34.1, 5e-3).unwrap();
        assert!((g - 1.1669e-5).abs() < 1e-9, "{g}");
        let unit = path_gain(5e-3 / (4.0 * PI), 5e-3).unwrap();
        assert!((unit - 1.0).abs() < 1e-15);
        let g1 = path_gain(7.0, 0.01).unwrap();
        let g2 = path_gain(14.0, 0.01).unwrap();
        assert!((g1 / g2 - 2.0).abs() < 1e-15);
        assert!(path_gain(0.0, 5e-3).is_err());
        assert!(path_gain(1.0, -1.0).is_err());
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let spec = ArraySpec::default();
        let a = steering_vector(&spec, 0.0, 0.0);
        assert_eq!(a.len(), 750);
        for z in a {
            assert_eq!(z, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn half_wavelength_pair_at_endfire() {
        let spec = ArraySpec::new(2, 1, 0.5, 0.5, 1.0).unwrap();
        let a = steering_vector(&spec, 0.0, PI / 2.0);
        assert_eq!(a[0], Complex64::new(1.0, 0.0));
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_variance_nlos_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = sample_nlos(16, 0.0, &mut rng).unwrap();
        assert!(h.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert!(sample_nlos(4, -1.0, &mut rng).is_err());
    }

    #[test]
    fn nlos_is_deterministic_per_seed() {
        let a = sample_nlos(32, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_nlos(32, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nlos_unit_power_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = sample_nlos(1_000_000, 1.0, &mut rng).unwrap();
        let mean = h.iter().map(|z| z.norm_sqr()).sum::<f64>() / h.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn huge_k_recovers_steering_vector() {
        let spec = ArraySpec::default();
        let g = geom(Link::RisUser, 12.0, 0.1, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = build_channel(&g, &spec, 1e12, 1.0, &mut rng).unwrap();
        assert_eq!(ch.k_factor, K_FACTOR_CAP);
        let a = steering_vector(&spec, 0.1, 0.4);
        for (h, s) in ch.coeffs.iter().zip(&a) {
            assert!((h / ch.gain - s).norm() < 1e-4);
        }
    }

    #[test]
    fn zero_k_is_scaled_nlos() {
        let spec = ArraySpec::default();
        let g = geom(Link::ApRis, 34.1, 0.0, 0.0);
        let nlos = sample_nlos(spec.len(), 1.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let ch = build_channel_from_nlos(&g, &spec, 0.0, nlos.clone()).unwrap();
        for (h, w) in ch.coeffs.iter().zip(&nlos) {
            assert_eq!(*h, w * ch.gain);
        }
    }

    #[test]
    fn ap_user_link_is_scalar_nlos() {
        let spec = ArraySpec::default();
        let g = geom(Link::ApUser, 25.0, 0.0, 0.0);
        let nlos = vec![Complex64::new(0.3, -0.2)];
        let ch = build_channel_from_nlos(&g, &spec, 20.0, nlos).unwrap();
        assert_eq!(ch.len(), 1);
        assert_eq!(ch.k_factor, 0.0);
        assert_eq!(ch.scalar(), Complex64::new(0.3, -0.2) * ch.gain);
    }

    #[test]
    fn negative_k_rejected() {
        let spec = ArraySpec::default();
        let g = geom(Link::ApRis, 34.1, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(build_channel(&g, &spec, -1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn rician_power_normalisation() {
        // 10^5 draws of a 4-element link, pooled per element.
        let spec = ArraySpec::new(4, 1, 2.25e-3, 2.25e-3, 5e-3).unwrap();
        let g = geom(Link::ApRis, 10.0, 0.2, -0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut acc = [0.0; 4];
        for _ in 0..draws {
            let ch = build_channel(&g, &spec, 20.0, 1.0, &mut rng).unwrap();
            for (a, h) in acc.iter_mut().zip(&ch.coeffs) {
                *a += (h / ch.gain).norm_sqr();
            }
        }
        for a in acc {
            let p = a / draws as f64;
            assert!((p - 1.0).abs() < 0.02, "{p}");
        }
    }

    #[test]
    fn eta_at_045_wavelength() {
        let spec = ArraySpec::default();
        assert!((spec.eta() - 1.5952).abs() < 1e-4, "{}", spec.eta());
    }

    #[test]
    fn single_element_effective_channel_is_eta() {
        let spec = ArraySpec::new(1, 1, 2.25e-3, 2.25e-3, 5e-3).unwrap();
        let one = |link| LinkChannel {
            link,
            coeffs: vec![Complex64::new(1.0, 0.0)],
            gain: 1.0,
            k_factor: 0.0,
        };
        let phases = PhaseVector::new(vec![0.0], 2.0 * PI).unwrap();
        let h = effective_channel(&one(Link::ApRis), &one(Link::RisUser), &phases, &spec).unwrap();
        assert!((h - Complex64::new(spec.eta(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn effective_channel_rejects_length_mismatch() {
        let spec = ArraySpec::new(2, 1, 2.25e-3, 2.25e-3, 5e-3).unwrap();
        let ch = LinkChannel {
            link: Link::ApRis,
            coeffs: vec![Complex64::new(1.0, 0.0); 3],
            gain: 1.0,
            k_factor: 0.0,
        };
        let phases = PhaseVector::new(vec![0.0, 0.0], 2.0 * PI).unwrap();
        assert!(effective_channel(&ch, &ch, &phases, &spec).is_err());
    }

    #[test]
    fn snr_values() {
        assert_eq!(
            snr(Complex64::default(), Complex64::default(), 1e3, 1e-13).unwrap(),
            0.0
        );
        // -117.4 dBW received at 30 dBW transmit and -130 dBW noise.
        let amp = db_to_linear(-147.4).sqrt();
        let s = snr(Complex64::new(amp, 0.0), Complex64::default(), 1e3, 1e-13).unwrap();
        assert!((linear_to_db(s) - 12.6).abs() < 1e-9);
        let s2 = snr(Complex64::new(2.0 * amp, 0.0), Complex64::default(), 1e3, 1e-13).unwrap();
        assert!((s2 / s - 4.0).abs() < 1e-12);
        assert!(snr(Complex64::default(), Complex64::default(), 0.0, 1.0).is_err());
        assert!(snr(Complex64::default(), Complex64::default(), 1.0, 0.0).is_err());
    }

    #[test]
    fn phase_vector_range_checked() {
        assert!(PhaseVector::new(vec![0.0, 7.0], 2.0 * PI).is_err());
        let spec = ArraySpec::new(3, 2, 1.0, 1.0, 1.0).unwrap();
        let p = PhaseVector::from_columns(&[0.1, 0.2, 0.3], &spec, 2.0 * PI).unwrap();
        assert_eq!(p.as_slice(), &[0.1, 0.2, 0.3, 0.1, 0.2, 0.3]);
    }
}
