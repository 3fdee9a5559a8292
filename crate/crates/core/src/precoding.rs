//! Zero-forcing precoders.
//!
//! Every precoder here satisfies the same zero-forcing QoS constraint
//! `H_q W_q = diag((gamma_k / Q)^(1/2)) * sigma` on every subcarrier; they
//! differ in the cost they minimize. [`zf_precoder`] minimizes the transmit
//! power, [`min_pa_precoder`] minimizes the power consumed by the PAs through
//! a fixed-point iteration on the per-antenna powers, and the remaining
//! functions are closed forms for single-user and line-of-sight channels.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{ChannelKind, ChannelRealization, QosTargets};
use crate::error::{Error, Result};
use crate::linalg::solve_hermitian;
use crate::model::{self, BsModel, PaModel, PowerReport, DEFAULT_ACTIVE_THRESHOLD};
use crate::CMatrix;

/// Subcarrier count above which the per-subcarrier solves run on the pool.
const PARALLEL_SUBCARRIERS: usize = 16;

/// A precoder together with the per-antenna powers it produces.
#[derive(Debug, Clone)]
pub struct PrecoderSolution {
    /// One M x K matrix per subcarrier.
    pub matrices: Vec<CMatrix>,
    pub powers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Last max-absolute power change (0 for closed forms).
    pub residual: f64,
    /// Max-absolute power change after every iteration.
    pub residual_history: Vec<f64>,
    pub active_set: Vec<usize>,
}

impl PrecoderSolution {
    fn closed_form(matrices: Vec<CMatrix>) -> Result<Self> {
        let m = matrices[0].nrows();
        let powers = model::per_antenna_powers(&matrices, m)?;
        Ok(Self {
            active_set: active_set(&powers, DEFAULT_ACTIVE_THRESHOLD),
            matrices,
            powers,
            iterations: 0,
            converged: true,
            residual: 0.0,
            residual_history: Vec::new(),
        })
    }

    pub fn antennas(&self) -> usize {
        self.powers.len()
    }

    pub fn p_tx(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn report(&self, pa: &PaModel, bs: &BsModel) -> Result<PowerReport> {
        model::bs_consumed_power(&self.powers, pa, bs)
    }
}

fn active_set(powers: &[f64], threshold: f64) -> Vec<usize> {
    powers.iter().enumerate().filter(|(_, p)| **p > threshold).map(|(i, _)| i).collect()
}

/// Fixed-point iteration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Stop once the max absolute power change falls to this many Watts.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_power: f64,
    /// Powers below this are clamped to zero and the antenna is dropped.
    pub dead_antenna_floor: f64,
    /// Ridge added to the Gram diagonal, relative to its trace.
    pub regularization: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 2000,
            initial_power: 1.0,
            dead_antenna_floor: 1e-12,
            regularization: 0.0,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Domain(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be >= 1".into()));
        }
        if !(self.initial_power > 0.0) {
            return Err(Error::Domain(format!("initial power must be positive, got {}", self.initial_power)));
        }
        if !(self.dead_antenna_floor >= 0.0) || !(0.0..=1e-10).contains(&self.regularization) {
            return Err(Error::Domain("dead-antenna floor must be >= 0 and regularization in [0, 1e-10]".into()));
        }
        Ok(())
    }
}

fn check_shapes(h: &ChannelRealization, qos: &QosTargets) -> Result<()> {
    if qos.users() != h.users() {
        return Err(Error::Dimension(format!("{} SINR targets for {} users", qos.users(), h.users())));
    }
    if qos.subcarriers != h.subcarriers() {
        return Err(Error::Dimension(format!(
            "QoS normalized for {} subcarriers, channel has {}",
            qos.subcarriers,
            h.subcarriers()
        )));
    }
    if h.antennas() < h.users() {
        return Err(Error::Precondition(format!("ZF needs M >= K (M={}, K={})", h.antennas(), h.users())));
    }
    Ok(())
}

fn diagonal(values: &[f64]) -> CMatrix {
    CMatrix::from_fn(values.len(), values.len(), |i, j| {
        if i == j {
            Complex64::new(values[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Largest entrywise deviation of `H_q W_q` from the ZF target.
pub fn zf_residual(h: &ChannelRealization, qos: &QosTargets, solution: &PrecoderSolution) -> f64 {
    let target = diagonal(&qos.zf_targets());
    h.per_subcarrier
        .iter()
        .zip(&solution.matrices)
        .map(|(hq, wq)| (hq * wq - &target).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// Conventional per-subcarrier ZF, `W_q = H_q^H (H_q H_q^H)^-1 D`.
pub fn zf_precoder(h: &ChannelRealization, qos: &QosTargets) -> Result<PrecoderSolution> {
    check_shapes(h, qos)?;
    let target = diagonal(&qos.zf_targets());
    let matrices = h
        .per_subcarrier
        .iter()
        .map(|hq| {
            let x = solve_hermitian(hq * hq.adjoint(), &target)?;
            Ok(hq.adjoint() * x)
        })
        .collect::<Result<Vec<_>>>()?;
    PrecoderSolution::closed_form(matrices)
}

/// Per-subcarrier solve of the weighted problem: returns, for the active
/// antennas, `V = H_a^H (H_a D_p^(1/2) H_a^H)^-1 D` so that the precoder rows
/// are `p_m^(1/2) V_m`.
fn weighted_solve(
    hq: &CMatrix,
    active: &[usize],
    sqrt_p: &[f64],
    target: &CMatrix,
    regularization: f64,
) -> Result<CMatrix> {
    let k = hq.nrows();
    let h_active = hq.select_columns(active);
    let mut scaled = h_active.clone();
    for (col, m) in active.iter().enumerate() {
        scaled.column_mut(col).scale_mut(sqrt_p[*m].sqrt());
    }
    let mut gram = &scaled * scaled.adjoint();
    if regularization > 0.0 {
        let ridge = regularization * gram.trace().re;
        for i in 0..k {
            gram[(i, i)] += ridge;
        }
    }
    let x = solve_hermitian(gram, target)?;
    Ok(h_active.adjoint() * x)
}

fn fixed_point_update(
    h: &ChannelRealization,
    target: &CMatrix,
    powers: &[f64],
    regularization: f64,
) -> Result<Vec<f64>> {
    let m = powers.len();
    let active: Vec<usize> = (0..m).filter(|i| powers[*i] > 0.0).collect();
    if active.len() < h.users() {
        return Err(Error::SingularChannel(format!(
            "only {} active antennas left for {} users",
            active.len(),
            h.users()
        )));
    }
    let sqrt_p: Vec<f64> = powers.iter().map(|p| p.sqrt()).collect();
    let per_subcarrier = |hq: &CMatrix| -> Result<Vec<f64>> {
        let v = weighted_solve(hq, &active, &sqrt_p, target, regularization)?;
        Ok((0..active.len()).map(|row| v.row(row).iter().map(|z| z.norm_sqr()).sum()).collect())
    };
    let contributions: Vec<Vec<f64>> = if h.subcarriers() >= PARALLEL_SUBCARRIERS {
        h.per_subcarrier.par_iter().map(per_subcarrier).collect::<Result<_>>()?
    } else {
        h.per_subcarrier.iter().map(per_subcarrier).collect::<Result<_>>()?
    };
    let mut next = vec![0.0; m];
    for contribution in &contributions {
        for (slot, c) in active.iter().zip(contribution) {
            next[*slot] += c;
        }
    }
    for slot in &active {
        next[*slot] *= powers[*slot];
    }
    Ok(next)
}

fn weighted_precoder(
    h: &ChannelRealization,
    target: &CMatrix,
    powers: &[f64],
    regularization: f64,
) -> Result<Vec<CMatrix>> {
    let m = powers.len();
    let active: Vec<usize> = (0..m).filter(|i| powers[*i] > 0.0).collect();
    let sqrt_p: Vec<f64> = powers.iter().map(|p| p.sqrt()).collect();
    h.per_subcarrier
        .iter()
        .map(|hq| {
            let v = weighted_solve(hq, &active, &sqrt_p, target, regularization)?;
            let mut w = CMatrix::zeros(m, hq.nrows());
            for (row, slot) in active.iter().enumerate() {
                w.set_row(*slot, &(v.row(row) * Complex64::new(sqrt_p[*slot], 0.0)));
            }
            Ok(w)
        })
        .collect()
}

/// Precoder minimizing the PA consumption `alpha * sum_m p_m^(1/2)`.
pub fn min_pa_precoder(h: &ChannelRealization, qos: &QosTargets, cfg: &FixedPointConfig) -> Result<PrecoderSolution> {
    min_pa_precoder_observed(h, qos, cfg, |_, _, _| {})
}

/// Same as [`min_pa_precoder`], calling `observer(iteration, powers,
/// residual)` after every fixed-point update.
pub fn min_pa_precoder_observed<F>(
    h: &ChannelRealization,
    qos: &QosTargets,
    cfg: &FixedPointConfig,
    mut observer: F,
) -> Result<PrecoderSolution>
where
    F: FnMut(usize, &[f64], f64),
{
    check_shapes(h, qos)?;
    cfg.validate()?;
    let target = diagonal(&qos.zf_targets());
    let mut powers = vec![cfg.initial_power; h.antennas()];
    let mut residual = f64::INFINITY;
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < cfg.max_iterations && residual > cfg.tolerance {
        let mut next = fixed_point_update(h, &target, &powers, cfg.regularization)?;
        for p in next.iter_mut() {
            if *p < cfg.dead_antenna_floor {
                *p = 0.0;
            }
        }
        residual = next.iter().zip(&powers).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        powers = next;
        iterations += 1;
        history.push(residual);
        observer(iterations, &powers, residual);
    }

    let matrices = weighted_precoder(h, &target, &powers, cfg.regularization)?;
    let powers = model::per_antenna_powers(&matrices, h.antennas())?;
    Ok(PrecoderSolution {
        active_set: active_set(&powers, DEFAULT_ACTIVE_THRESHOLD),
        matrices,
        powers,
        iterations,
        converged: residual <= cfg.tolerance,
        residual,
        residual_history: history,
    })
}

/// Narrowband (single subcarrier) form of [`min_pa_precoder`].
pub fn min_pa_precoder_narrowband(
    h: &CMatrix,
    gamma: &[f64],
    noise_power: f64,
    cfg: &FixedPointConfig,
) -> Result<PrecoderSolution> {
    let channel = ChannelRealization::new(vec![h.clone()], vec![1.0; h.nrows()], ChannelKind::Rayleigh)?;
    let qos = QosTargets::new(gamma.to_vec(), noise_power, 1)?;
    min_pa_precoder(&channel, &qos, cfg)
}

fn strongest_antenna(h: &[Complex64]) -> Option<usize> {
    // strict comparison keeps the lowest index on ties
    let mut best: Option<(usize, f64)> = None;
    for (i, z) in h.iter().enumerate() {
        let g = z.norm();
        if g > 0.0 && best.is_none_or(|(_, b)| g > b) {
            best = Some((i, g));
        }
    }
    best.map(|(i, _)| i)
}

fn column(values: Vec<Complex64>) -> CMatrix {
    CMatrix::from_vec(values.len(), 1, values)
}

/// Single-user narrowband optimum: all power on the strongest antenna.
pub fn single_user_narrowband_precoder(h: &[Complex64], gamma: f64, sigma: f64) -> Result<PrecoderSolution> {
    let best = strongest_antenna(h).ok_or_else(|| Error::Infeasible("all-zero channel".into()))?;
    let mut w = vec![Complex64::new(0.0, 0.0); h.len()];
    w[best] = h[best].conj() * (sigma * gamma.sqrt() / h[best].norm_sqr());
    PrecoderSolution::closed_form(vec![column(w)])
}

/// Single-user narrowband precoder under a per-antenna cap: saturates the
/// strongest antennas one by one until the SINR target is met.
pub fn single_user_saturating_precoder(
    h: &[Complex64],
    gamma: f64,
    sigma: f64,
    p_max: f64,
) -> Result<PrecoderSolution> {
    if !(p_max > 0.0) {
        return Err(Error::Domain(format!("p_max must be positive, got {p_max}")));
    }
    let target = sigma * gamma.sqrt();
    let mut order: Vec<usize> = (0..h.len()).filter(|i| h[*i].norm() > 0.0).collect();
    order.sort_by(|a, b| h[*b].norm().total_cmp(&h[*a].norm()));

    let amplitude_max = p_max.sqrt();
    let mut amplitudes = vec![0.0; h.len()];
    let mut reached = 0.0;
    for m in order {
        let gain = h[m].norm();
        if reached + gain * amplitude_max >= target * (1.0 - 1e-12) {
            amplitudes[m] = ((target - reached) / gain).min(amplitude_max);
            reached = target;
            break;
        }
        amplitudes[m] = amplitude_max;
        reached += gain * amplitude_max;
    }
    if reached < target {
        return Err(Error::Infeasible(format!(
            "SINR target needs amplitude gain {target:.6e}, saturating every antenna reaches {reached:.6e} (deficit {:.6e})",
            target - reached
        )));
    }
    let w = h
        .iter()
        .zip(&amplitudes)
        .map(|(z, a)| if *a > 0.0 { z.conj() / z.norm() * *a } else { Complex64::new(0.0, 0.0) })
        .collect();
    PrecoderSolution::closed_form(vec![column(w)])
}

/// Single-user line-of-sight precoder for a prescribed split of the
/// amplitude budget: `p_m^(1/2) = weights_m * sigma * gamma^(1/2)`. Every
/// such split consumes the same PA power.
pub fn los_allocation_precoder(
    h: &ChannelRealization,
    gamma: f64,
    sigma: f64,
    weights: &[f64],
) -> Result<PrecoderSolution> {
    if h.users() != 1 {
        return Err(Error::Precondition(format!("LOS allocation is single-user, got K={}", h.users())));
    }
    if h.per_subcarrier.iter().flat_map(|m| m.iter()).any(|z| (z.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::Precondition("channel entries must have unit modulus".into()));
    }
    if weights.len() != h.antennas() {
        return Err(Error::Dimension(format!("{} weights for {} antennas", weights.len(), h.antennas())));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("weights must be nonnegative and sum to 1 (sum {total})")));
    }
    let q = h.subcarriers() as f64;
    let amplitude = sigma * gamma.sqrt();
    let sqrt_p: Vec<f64> = weights.iter().map(|w| w * amplitude).collect();
    let matrices = h
        .per_subcarrier
        .iter()
        .map(|hq| {
            let norm: f64 = hq.row(0).iter().zip(&sqrt_p).map(|(z, s)| z.norm_sqr() * s).sum();
            let scale = amplitude / q.sqrt() / norm;
            column(hq.row(0).iter().zip(&sqrt_p).map(|(z, s)| z.conj() * (s * scale)).collect())
        })
        .collect();
    PrecoderSolution::closed_form(matrices)
}
