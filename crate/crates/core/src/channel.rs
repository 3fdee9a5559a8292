//! Scenario generation: user drops, path loss, SINR targets and channels.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::CMatrix;

/// Path-loss ratio at which the SINR target is 0 dB.
pub const DEFAULT_SINR_REFERENCE: f64 = 4.86e-14;

/// Independent random stream for one Monte-Carlo realization: the master
/// seed picks the key, the index picks the ChaCha stream.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Annular cell in which users are dropped uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub u_min: f64,
    pub u_max: f64,
}

impl CellGeometry {
    pub fn new(u_min: f64, u_max: f64) -> Result<Self> {
        if !(u_min > 0.0 && u_min < u_max && u_max.is_finite()) {
            return Err(Error::Domain(format!("need 0 < u_min < u_max, got {u_min}, {u_max}")));
        }
        Ok(Self { u_min, u_max })
    }

    pub fn reference() -> Self {
        Self { u_min: 35.0, u_max: 250.0 }
    }

    /// Distance whose CDF value is `v`; the CDF is the annulus area ratio.
    pub fn inverse_cdf(&self, v: f64) -> f64 {
        let (a, b) = (self.u_min * self.u_min, self.u_max * self.u_max);
        (a + v * (b - a)).sqrt()
    }

    pub fn cdf(&self, u: f64) -> f64 {
        let (a, b) = (self.u_min * self.u_min, self.u_max * self.u_max);
        ((u * u - a) / (b - a)).clamp(0.0, 1.0)
    }
}

/// Per-user SINR targets and the noise level they are defined against.
#[derive(Debug, Clone, PartialEq)]
pub struct QosTargets {
    pub gamma: Vec<f64>,
    pub noise_power: f64,
    pub subcarriers: usize,
}

impl QosTargets {
    pub fn new(gamma: Vec<f64>, noise_power: f64, subcarriers: usize) -> Result<Self> {
        if gamma.is_empty() || gamma.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::Domain("SINR targets must be positive".into()));
        }
        if !(noise_power > 0.0) {
            return Err(Error::Domain(format!("noise power must be positive, got {noise_power}")));
        }
        if subcarriers == 0 {
            return Err(Error::Domain("at least one subcarrier is required".into()));
        }
        Ok(Self { gamma, noise_power, subcarriers })
    }

    pub fn users(&self) -> usize {
        self.gamma.len()
    }

    pub fn sigma(&self) -> f64 {
        self.noise_power.sqrt()
    }

    /// Per-subcarrier targets `gamma_k / Q`.
    pub fn normalized(&self) -> Vec<f64> {
        let q = self.subcarriers as f64;
        self.gamma.iter().map(|g| g / q).collect()
    }

    /// Diagonal of the right-hand side of the ZF constraint,
    /// `(gamma_k / Q)^(1/2) * sigma`.
    pub fn zf_targets(&self) -> Vec<f64> {
        let s = self.sigma();
        self.normalized().iter().map(|g| g.sqrt() * s).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Rayleigh,
    Los,
}

/// Channel matrices `H_q` (K x M), one per subcarrier.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub per_subcarrier: Vec<CMatrix>,
    pub large_scale: Vec<f64>,
    pub kind: ChannelKind,
}

impl ChannelRealization {
    pub fn new(per_subcarrier: Vec<CMatrix>, large_scale: Vec<f64>, kind: ChannelKind) -> Result<Self> {
        let Some(first) = per_subcarrier.first() else {
            return Err(Error::Dimension("channel needs at least one subcarrier".into()));
        };
        let (k, m) = first.shape();
        if k == 0 || m == 0 {
            return Err(Error::Dimension("empty channel matrix".into()));
        }
        if let Some(q) = per_subcarrier.iter().position(|h| h.shape() != (k, m)) {
            return Err(Error::Dimension(format!(
                "subcarrier {q} has shape {:?}, expected ({k}, {m})",
                per_subcarrier[q].shape()
            )));
        }
        if large_scale.len() != k {
            return Err(Error::Dimension(format!("{} large-scale coefficients for {k} users", large_scale.len())));
        }
        Ok(Self { per_subcarrier, large_scale, kind })
    }

    /// Single-subcarrier, single-user channel from an antenna vector.
    pub fn from_vector(h: &[Complex64], kind: ChannelKind) -> Result<Self> {
        Self::new(vec![CMatrix::from_row_slice(1, h.len(), h)], vec![1.0], kind)
    }

    pub fn antennas(&self) -> usize {
        self.per_subcarrier[0].ncols()
    }

    pub fn users(&self) -> usize {
        self.per_subcarrier[0].nrows()
    }

    pub fn subcarriers(&self) -> usize {
        self.per_subcarrier.len()
    }
}

/// Optional frequency correlation across subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FrequencyCorrelation {
    /// Independent draws on every subcarrier.
    #[default]
    Independent,
    /// `taps` delay taps with powers proportional to `decay^l`, mapped to
    /// the subcarriers by a DFT.
    ExponentialPdp { taps: usize, decay: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LosPhase {
    #[default]
    Random,
    Zero,
}

/// Users of one drop: distance, large-scale fading and SINR target.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDrop {
    pub distances: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

pub fn draw_user_distances<R: Rng + ?Sized>(k: usize, geometry: &CellGeometry, rng: &mut R) -> Vec<f64> {
    (0..k).map(|_| geometry.inverse_cdf(rng.random::<f64>())).collect()
}

/// Linear large-scale fading, `beta_dB = -35.3 - 37.6 log10(u)`.
pub fn large_scale_fading(u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {u}")));
    }
    Ok(10f64.powf((-35.3 - 37.6 * u.log10()) / 10.0))
}

/// Linear SINR target, `gamma_dB = 5 log10(beta / reference)`.
pub fn target_sinr(beta: f64, reference: f64) -> f64 {
    let gamma_db = 5.0 * (beta / reference).log10();
    10f64.powf(gamma_db / 10.0)
}

pub fn draw_users<R: Rng + ?Sized>(k: usize, geometry: &CellGeometry, sinr_reference: f64, rng: &mut R) -> UserDrop {
    let distances = draw_user_distances(k, geometry, rng);
    let beta: Vec<f64> =
        distances.iter().map(|u| large_scale_fading(*u).expect("cell distances are positive")).collect();
    let gamma = beta.iter().map(|b| target_sinr(*b, sinr_reference)).collect();
    UserDrop { distances, beta, gamma }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

fn check_counts(m: usize, k: usize, q: usize) -> Result<()> {
    if m == 0 || k == 0 || q == 0 {
        return Err(Error::Dimension(format!("M, K, Q must be >= 1 (got {m}, {k}, {q})")));
    }
    Ok(())
}

/// Uncorrelated Rayleigh channel `H_q = D_beta^(1/2) G_q`.
pub fn draw_rayleigh_channel<R: Rng + ?Sized>(
    m: usize,
    k: usize,
    q: usize,
    beta: &[f64],
    correlation: FrequencyCorrelation,
    rng: &mut R,
) -> Result<ChannelRealization> {
    check_counts(m, k, q)?;
    if beta.len() != k {
        return Err(Error::Dimension(format!("{} large-scale coefficients for {k} users", beta.len())));
    }
    if let Some(b) = beta.iter().find(|b| !(**b > 0.0)) {
        return Err(Error::Domain(format!("large-scale fading must be positive, got {b}")));
    }
    let scale: Vec<f64> = beta.iter().map(|b| b.sqrt()).collect();

    let small_scale: Vec<CMatrix> = match correlation {
        FrequencyCorrelation::Independent => {
            (0..q).map(|_| CMatrix::from_fn(k, m, |_, _| complex_normal(rng))).collect()
        }
        FrequencyCorrelation::ExponentialPdp { taps, decay } => {
            if taps == 0 || !(decay > 0.0 && decay <= 1.0) {
                return Err(Error::Domain(format!("invalid delay profile: {taps} taps, decay {decay}")));
            }
            let weights: Vec<f64> = (0..taps).map(|l| decay.powi(l as i32)).collect();
            let total: f64 = weights.iter().sum();
            let amplitudes: Vec<f64> = weights.iter().map(|w| (w / total).sqrt()).collect();
            let impulse: Vec<CMatrix> =
                amplitudes.iter().map(|a| CMatrix::from_fn(k, m, |_, _| complex_normal(rng) * *a)).collect();
            (0..q)
                .map(|sub| {
                    let mut g = CMatrix::zeros(k, m);
                    for (l, tap) in impulse.iter().enumerate() {
                        let phase = -2.0 * PI * (sub * l) as f64 / q as f64;
                        g += tap * Complex64::from_polar(1.0, phase);
                    }
                    g
                })
                .collect()
        }
    };

    let per_subcarrier = small_scale
        .into_iter()
        .map(|mut g| {
            for (row, s) in scale.iter().enumerate() {
                g.row_mut(row).scale_mut(*s);
            }
            g
        })
        .collect();
    ChannelRealization::new(per_subcarrier, beta.to_vec(), ChannelKind::Rayleigh)
}

/// Pure line-of-sight channel with unit-modulus entries.
pub fn draw_los_channel<R: Rng + ?Sized>(
    m: usize,
    k: usize,
    q: usize,
    phase: LosPhase,
    rng: &mut R,
) -> Result<ChannelRealization> {
    check_counts(m, k, q)?;
    let per_subcarrier = (0..q)
        .map(|_| {
            CMatrix::from_fn(k, m, |_, _| match phase {
                LosPhase::Random => Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI),
                LosPhase::Zero => Complex64::new(1.0, 0.0),
            })
        })
        .collect();
    ChannelRealization::new(per_subcarrier, vec![1.0; k], ChannelKind::Los)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_cdf_examples() {
        let g = CellGeometry::reference();
        assert_eq!(g.inverse_cdf(0.0), 35.0);
        assert_relative_eq!(g.inverse_cdf(1.0), 250.0, epsilon = 1e-12);
        assert_relative_eq!(g.inverse_cdf(0.5), 178.500_700_28, epsilon = 1e-6);
        assert!(CellGeometry::new(0.0, 1.0).is_err());
        assert!(CellGeometry::new(5.0, 4.0).is_err());
    }

    #[test]
    fn path_loss_examples() {
        let db = |u: f64| crate::linear_to_db(large_scale_fading(u).unwrap());
        assert_relative_eq!(db(1.0), -35.3, epsilon = 1e-12);
        assert_relative_eq!(db(35.0), -93.356_956, epsilon = 1e-5);
        assert_relative_eq!(db(250.0), -125.462_544, epsilon = 1e-5);
        assert!(large_scale_fading(0.0).is_err());
    }

    #[test]
    fn sinr_examples() {
        assert_relative_eq!(target_sinr(DEFAULT_SINR_REFERENCE, DEFAULT_SINR_REFERENCE), 1.0, epsilon = 1e-12);
        let near = crate::linear_to_db(target_sinr(large_scale_fading(35.0).unwrap(), DEFAULT_SINR_REFERENCE));
        let far = crate::linear_to_db(target_sinr(large_scale_fading(250.0).unwrap(), DEFAULT_SINR_REFERENCE));
        assert!((near - 19.89).abs() < 0.01, "{near}");
        assert!((far - 3.84).abs() < 0.01, "{far}");
    }

    #[test]
    fn distance_ks_statistic() {
        let g = CellGeometry::reference();
        let mut rng = stream_rng(7, 0);
        let mut u = draw_user_distances(10_000, &g, &mut rng);
        u.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = u.len() as f64;
        let ks = u
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = g.cdf(*x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS statistic {ks}");
    }

    #[test]
    fn rayleigh_variance() {
        let mut rng = stream_rng(11, 0);
        let h = draw_rayleigh_channel(100, 10, 100, &[1.0; 10], FrequencyCorrelation::Independent, &mut rng).unwrap();
        let n = 100.0 * 10.0 * 100.0;
        let var: f64 = h.per_subcarrier.iter().flat_map(|m| m.iter()).map(|z| z.norm_sqr()).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.02, "{var}");

        let mut acc = 0.0;
        for i in 0..20_000 {
            let mut rng = stream_rng(3, i);
            let h = draw_rayleigh_channel(1, 1, 1, &[4.0], FrequencyCorrelation::Independent, &mut rng).unwrap();
            acc += h.per_subcarrier[0][(0, 0)].norm_sqr();
        }
        let mean = acc / 20_000.0;
        assert!((mean - 4.0).abs() < 0.12, "{mean}");
    }

    #[test]
    fn rayleigh_spatial_covariance_is_identity() {
        // rows scaled by beta^(-1/2) should be white over the antennas
        let m = 4;
        let beta = [2.0, 0.5];
        let mut cov = CMatrix::zeros(m, m);
        let draws = 10_000;
        let mut rng = stream_rng(5, 0);
        for _ in 0..draws {
            let h = draw_rayleigh_channel(m, 2, 1, &beta, FrequencyCorrelation::Independent, &mut rng).unwrap();
            let row = h.per_subcarrier[0].row(1).transpose().unscale(beta[1].sqrt());
            cov += &row * row.adjoint();
        }
        cov /= Complex64::new(draws as f64, 0.0);
        for i in 0..m {
            assert!((cov[(i, i)].re - 1.0).abs() < 0.05);
            for j in 0..m {
                if i != j {
                    assert!(cov[(i, j)].norm() < 0.05, "{}", cov[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn single_tap_profile_is_flat() {
        let mut rng = stream_rng(1, 0);
        let pdp = FrequencyCorrelation::ExponentialPdp { taps: 1, decay: 0.5 };
        let h = draw_rayleigh_channel(3, 2, 8, &[1.0, 1.0], pdp, &mut rng).unwrap();
        for hq in &h.per_subcarrier[1..] {
            assert!((hq - &h.per_subcarrier[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn correlated_profile_keeps_unit_variance() {
        let mut rng = stream_rng(2, 0);
        let pdp = FrequencyCorrelation::ExponentialPdp { taps: 4, decay: 0.6 };
        let h = draw_rayleigh_channel(64, 8, 32, &[1.0; 8], pdp, &mut rng).unwrap();
        let n = (64 * 8 * 32) as f64;
        let var: f64 = h.per_subcarrier.iter().flat_map(|m| m.iter()).map(|z| z.norm_sqr()).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.08, "{var}");
    }

    #[test]
    fn los_examples() {
        let mut rng = stream_rng(1, 0);
        let h = draw_los_channel(8, 3, 4, LosPhase::Random, &mut rng).unwrap();
        assert!(h.per_subcarrier.iter().flat_map(|m| m.iter()).all(|z| (z.norm() - 1.0).abs() < 1e-15));
        let h = draw_los_channel(4, 1, 1, LosPhase::Zero, &mut rng).unwrap();
        assert!(h.per_subcarrier[0].iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        let power: f64 = h.per_subcarrier[0].iter().map(|z| z.norm_sqr()).sum();
        assert_eq!(power, 4.0);
    }
}
