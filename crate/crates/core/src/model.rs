//! Power-consumption models for the PAs and for the whole base station.
//!
//! All quantities are linear Watts. The PA model follows the class-B
//! square-root efficiency law `eta(p) = eta_sat * (p / p_sat)^(1/2)`, which
//! makes the consumed power of antenna `m` equal to `alpha * p_m^(1/2)` with
//! `alpha = p_max^(1/2) / eta_max`.

use crate::error::{Error, Result};
use crate::CMatrix;

/// Default power below which an antenna is considered switched off.
pub const DEFAULT_ACTIVE_THRESHOLD: f64 = 1e-9;

/// Square-root efficiency power amplifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaModel {
    p_max: f64,
    backoff: f64,
    eta_max: f64,
}

impl PaModel {
    /// Builds a PA model from its maximal (backed-off) output power, the
    /// efficiency reached at that power and the linear back-off ratio.
    pub fn new(p_max: f64, eta_max: f64, backoff: f64) -> Result<Self> {
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(Error::Domain(format!("p_max must be positive, got {p_max}")));
        }
        if !(eta_max > 0.0 && eta_max <= 1.0) {
            return Err(Error::Domain(format!("eta_max must lie in (0, 1], got {eta_max}")));
        }
        if !(backoff >= 1.0 && backoff.is_finite()) {
            return Err(Error::Domain(format!("back-off must be >= 1, got {backoff}")));
        }
        Ok(Self { p_max, backoff, eta_max })
    }

    /// Builds the model from the saturation power instead of `p_max`.
    pub fn from_saturation(p_sat: f64, eta_max: f64, backoff: f64) -> Result<Self> {
        if !(backoff >= 1.0) {
            return Err(Error::Domain(format!("back-off must be >= 1, got {backoff}")));
        }
        Self::new(p_sat / backoff, eta_max, backoff)
    }

    /// Reference amplifier: 1 W maximal power, 22% efficiency, 10 dB back-off.
    pub fn reference() -> Self {
        Self { p_max: 1.0, backoff: 10.0, eta_max: 0.22 }
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn p_sat(&self) -> f64 {
        self.p_max * self.backoff
    }

    pub fn backoff(&self) -> f64 {
        self.backoff
    }

    pub fn eta_max(&self) -> f64 {
        self.eta_max
    }

    /// Efficiency at saturation, `eta_max * BO^(1/2)`.
    pub fn eta_sat(&self) -> f64 {
        self.eta_max * self.backoff.sqrt()
    }

    /// Consumption scale `p_max^(1/2) / eta_max`, in W^(1/2).
    pub fn alpha(&self) -> f64 {
        self.p_max.sqrt() / self.eta_max
    }
}

/// Static and per-antenna circuit consumption of the base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsModel {
    pub p_fix: f64,
    pub circuit_per_antenna: f64,
    pub active_power_threshold: f64,
}

impl BsModel {
    pub fn new(p_fix: f64, circuit_per_antenna: f64, active_power_threshold: f64) -> Result<Self> {
        if !(p_fix >= 0.0 && circuit_per_antenna >= 0.0 && active_power_threshold >= 0.0) {
            return Err(Error::Domain(format!(
                "BS model parameters must be nonnegative (p_fix={p_fix}, circuit={circuit_per_antenna}, threshold={active_power_threshold})"
            )));
        }
        Ok(Self { p_fix, circuit_per_antenna, active_power_threshold })
    }

    /// Reference base station: 15 W static, 0.7 W per active antenna.
    pub fn reference() -> Self {
        Self { p_fix: 15.0, circuit_per_antenna: 0.7, active_power_threshold: DEFAULT_ACTIVE_THRESHOLD }
    }
}

/// Breakdown of the power spent by one precoder solution.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub per_antenna: Vec<f64>,
    pub p_tx: f64,
    pub p_pas: f64,
    pub p_bs: f64,
    pub m_active: usize,
    /// Fractions of `p_bs` spent in the PAs, the circuits and the static part.
    pub shares: (f64, f64, f64),
}

fn check_powers(powers: &[f64]) -> Result<()> {
    match powers.iter().position(|p| !(*p >= 0.0)) {
        Some(i) => Err(Error::Domain(format!("antenna {i} has negative or NaN power {}", powers[i]))),
        None => Ok(()),
    }
}

/// Transmit power per antenna, summed over users and subcarriers.
pub fn per_antenna_powers(matrices: &[CMatrix], m: usize) -> Result<Vec<f64>> {
    let Some(first) = matrices.first() else {
        return Err(Error::Dimension("no precoding matrices".into()));
    };
    let k = first.ncols();
    let mut powers = vec![0.0; m];
    for (q, w) in matrices.iter().enumerate() {
        if w.nrows() != m || w.ncols() != k {
            return Err(Error::Dimension(format!(
                "subcarrier {q}: expected {m}x{k} precoder, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        for (row, p) in powers.iter_mut().enumerate() {
            *p += w.row(row).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }
    Ok(powers)
}

/// Power drawn by the square-root-efficiency PAs: `alpha * sum_m p_m^(1/2)`.
pub fn pa_consumed_power(powers: &[f64], pa: &PaModel) -> Result<f64> {
    check_powers(powers)?;
    Ok(pa.alpha() * powers.iter().map(|p| p.sqrt()).sum::<f64>())
}

/// Power drawn by fixed-efficiency PAs: `p_tx / eta`.
pub fn ideal_pa_consumed_power(powers: &[f64], eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("efficiency must lie in (0, 1], got {eta}")));
    }
    check_powers(powers)?;
    Ok(powers.iter().sum::<f64>() / eta)
}

/// Instantaneous efficiency of one PA delivering `p` Watts.
pub fn pa_efficiency(p: f64, pa: &PaModel) -> Result<f64> {
    if !(p > 0.0 && p <= pa.p_sat()) {
        return Err(Error::Domain(format!("output power {p} outside (0, p_sat={}]", pa.p_sat())));
    }
    Ok(pa.eta_sat() * (p / pa.p_sat()).sqrt())
}

/// Full consumption breakdown of a power allocation.
pub fn bs_consumed_power(powers: &[f64], pa: &PaModel, bs: &BsModel) -> Result<PowerReport> {
    let p_pas = pa_consumed_power(powers, pa)?;
    let p_tx = powers.iter().sum::<f64>();
    let m_active = powers.iter().filter(|p| **p > bs.active_power_threshold).count();
    let circuits = bs.circuit_per_antenna * m_active as f64;
    let p_bs = p_pas + bs.p_fix + circuits;
    let shares = if p_bs > 0.0 {
        let pa_share = p_pas / p_bs;
        let circuit_share = circuits / p_bs;
        (pa_share, circuit_share, 1.0 - pa_share - circuit_share)
    } else {
        (0.0, 0.0, 0.0)
    };
    Ok(PowerReport { per_antenna: powers.to_vec(), p_tx, p_pas, p_bs, m_active, shares })
}

/// Consumption gains of `candidate` over `reference`: `(gain_pas, gain_bs)`.
pub fn gain_metrics(reference: &PowerReport, candidate: &PowerReport) -> Result<(f64, f64)> {
    if !(candidate.p_pas > 0.0 && candidate.p_bs > 0.0) {
        return Err(Error::ZeroConsumption(format!(
            "candidate consumption p_pas={}, p_bs={}",
            candidate.p_pas, candidate.p_bs
        )));
    }
    Ok((reference.p_pas / candidate.p_pas, reference.p_bs / candidate.p_bs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Wideband,
    Narrowband,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Proposed,
    Conventional,
}

/// Complex flop count of one precoder computation.
///
/// For [`SystemKind::Asymptotic`] pass the number of active antennas as `m`
/// for the proposed solver; there is no iteration factor in that regime.
pub fn estimate_flops(system: SystemKind, solver: SolverKind, k: usize, m: usize, q: usize, iterations: usize) -> f64 {
    let (k, m, i) = (k as f64, m as f64, iterations as f64);
    let q = match system {
        SystemKind::Narrowband => 1.0,
        _ => q as f64,
    };
    let base = k.powi(3) * q / 3.0 + 3.0 * k * k * m * q + 2.0 * k * m * q + k * q;
    match (system, solver) {
        (SystemKind::Asymptotic, _) | (_, SolverKind::Conventional) => base,
        (_, SolverKind::Proposed) => (base + k * q * m + k * m + q * m - 2.0 * m) * i,
    }
}
