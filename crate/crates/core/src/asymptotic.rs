//! Large-subcarrier-count predictions and the optimal number of active
//! antennas.
//!
//! As the number of subcarriers grows, the consumption-minimizing precoder
//! spreads power uniformly over the `M_a` active antennas and every quantity
//! below depends only on the large-scale term
//! `trace = sum_k sigma^2 gamma_k / beta_k`. No instantaneous CSI is used.

use crate::error::{Error, Result};
use crate::model::{BsModel, PaModel};

/// `sum_k sigma^2 gamma_k / beta_k`.
pub fn trace_term(beta: &[f64], gamma: &[f64], noise_power: f64) -> Result<f64> {
    if beta.len() != gamma.len() {
        return Err(Error::Dimension(format!("{} path gains for {} SINR targets", beta.len(), gamma.len())));
    }
    if beta.iter().any(|b| !(*b > 0.0)) || gamma.iter().any(|g| !(*g >= 0.0)) || !(noise_power >= 0.0) {
        return Err(Error::Domain("path gains must be positive, SINR targets and noise nonnegative".into()));
    }
    Ok(beta.iter().zip(gamma).map(|(b, g)| noise_power * g / b).sum())
}

fn check_active(m_a: f64, k: usize) -> Result<()> {
    if !(m_a > k as f64) {
        return Err(Error::Domain(format!("ZF needs more active antennas than users (M_a={m_a}, K={k})")));
    }
    Ok(())
}

/// Transmit power on each of the `m_a` active antennas.
pub fn asymptotic_per_antenna_power(m_a: f64, k: usize, trace: f64) -> Result<f64> {
    check_active(m_a, k)?;
    Ok(trace / (m_a * (m_a - k as f64)))
}

/// PA consumption `alpha * (M_a / (M_a - K) * trace)^(1/2)`.
pub fn asymptotic_pa_power(m_a: f64, k: usize, trace: f64, pa: &PaModel) -> Result<f64> {
    check_active(m_a, k)?;
    Ok(pa.alpha() * (m_a / (m_a - k as f64) * trace).sqrt())
}

/// BS consumption: PA term plus fixed and per-antenna circuit power.
pub fn asymptotic_bs_power(m_a: f64, k: usize, trace: f64, pa: &PaModel, bs: &BsModel) -> Result<f64> {
    Ok(asymptotic_pa_power(m_a, k, trace, pa)? + bs.p_fix + bs.circuit_per_antenna * m_a)
}

/// Unique root `x > K` of `x (x - K)^3 = constant` for `constant > 0`.
///
/// Works on `z = x - K` so that roots close to `K` keep full precision, and
/// runs Newton steps inside a shrinking bracket, bisecting whenever a step
/// leaves it.
pub fn solve_quartic(k: usize, constant: f64) -> Result<f64> {
    if k == 0 || !(constant > 0.0) || !constant.is_finite() {
        return Err(Error::Domain(format!("need K >= 1 and a positive finite constant (K={k}, c={constant})")));
    }
    let kf = k as f64;
    let g = |z: f64| (z + kf) * z * z * z - constant;
    // (z + K) z^3 >= z^4 and >= K z^3 bound the root from above
    let mut lo = 0.0;
    let mut hi = constant.powf(0.25).min((constant / kf).cbrt());
    let mut z = 0.5 * hi;
    for _ in 0..200 {
        let value = g(z);
        if value.abs() <= 1e-12 * constant {
            break;
        }
        if value < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let slope = z * z * (4.0 * z + 3.0 * kf);
        let newton = z - value / slope;
        z = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(kf + z)
}

/// Continuous minimizer of the asymptotic BS consumption over `M_a > K`,
/// where `t = alpha * trace^(1/2)` and `circuit` is the per-antenna power.
///
/// Setting the derivative of `t (x/(x-K))^(1/2) + C x` to zero gives
/// `x (x - K)^3 = (t K / (2 C))^2`.
pub fn stationary_antenna_count(k: usize, t: f64, circuit: f64) -> Result<f64> {
    if !(t > 0.0) || !(circuit > 0.0) {
        return Err(Error::Domain(format!("t and the circuit power must be positive (t={t}, C={circuit})")));
    }
    let rhs = t * k as f64 / (2.0 * circuit);
    solve_quartic(k, rhs * rhs)
}

/// Smallest integer antenna count whose per-antenna power stays within
/// `p_max`.
pub fn min_ma_power_constraint(k: usize, trace: f64, p_max: f64) -> Result<usize> {
    if !(p_max > 0.0) {
        return Err(Error::Domain(format!("p_max must be positive, got {p_max}")));
    }
    let kf = k as f64;
    let bound = 0.5 * (kf + (kf * kf + 4.0 * trace / p_max).sqrt());
    let mut m = bound.ceil() as usize;
    // guard against the square root rounding just below an exact boundary
    while m > k && trace / (m as f64 * (m - k) as f64) > p_max {
        m += 1;
    }
    Ok(m)
}

/// Whether activating all `m` antennas respects the per-antenna cap.
pub fn feasibility_check(m: usize, k: usize, trace: f64, p_max: f64) -> Result<bool> {
    if m <= k {
        return Err(Error::Infeasible(format!("M={m} antennas cannot serve K={k} users with ZF")));
    }
    Ok(trace / (m as f64 * (m - k) as f64) <= p_max)
}

/// Picks whichever of floor and ceil of `y` gives the lower consumption,
/// the smaller count on ties.
fn ceil_floor(y: f64, k: usize, trace: f64, pa: &PaModel, bs: &BsModel) -> Result<usize> {
    let lo = y.floor();
    let hi = y.ceil();
    if lo == hi {
        return Ok(lo as usize);
    }
    let f_lo = asymptotic_bs_power(lo, k, trace, pa, bs)?;
    let f_hi = asymptotic_bs_power(hi, k, trace, pa, bs)?;
    Ok(if f_hi < f_lo { hi as usize } else { lo as usize })
}

fn check_counts(m: usize, k: usize) -> Result<()> {
    if k == 0 || m <= k {
        return Err(Error::Infeasible(format!("need K >= 1 and M >= K + 1 (M={m}, K={k})")));
    }
    Ok(())
}

/// Optimal active-antenna count ignoring the per-antenna cap.
pub fn optimal_ma_unconstrained(m: usize, k: usize, trace: f64, pa: &PaModel, bs: &BsModel) -> Result<usize> {
    check_counts(m, k)?;
    if trace == 0.0 || bs.circuit_per_antenna == 0.0 {
        // one of the two terms vanishes: the other decides
        return Ok(if trace == 0.0 { k + 1 } else { m });
    }
    let x = stationary_antenna_count(k, pa.alpha() * trace.sqrt(), bs.circuit_per_antenna)?;
    let clamped = x.clamp((k + 1) as f64, m as f64);
    ceil_floor(clamped, k, trace, pa, bs)
}

/// Outcome of the active-antenna optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticPlan {
    /// Continuous unconstrained optimum.
    pub m_tilde: f64,
    /// Fewest antennas meeting the per-antenna cap.
    pub m_hat: usize,
    /// Chosen number of active antennas.
    pub m_dagger: usize,
    pub p_bar: f64,
    pub p_pas_bar: f64,
    pub p_bs_bar: f64,
    pub feasible: bool,
}

/// Optimal active-antenna count under the per-antenna cap `p_max`.
pub fn optimal_ma_constrained(
    m: usize,
    k: usize,
    trace: f64,
    pa: &PaModel,
    bs: &BsModel,
    p_max: f64,
) -> Result<AsymptoticPlan> {
    check_counts(m, k)?;
    let m_hat = min_ma_power_constraint(k, trace, p_max)?;
    if !feasibility_check(m, k, trace, p_max)? {
        return Err(Error::PowerConstraint { m, min_feasible_m: m_hat.max(k + 1) });
    }
    let m_tilde = if trace == 0.0 {
        k as f64
    } else if bs.circuit_per_antenna == 0.0 {
        f64::INFINITY
    } else {
        stationary_antenna_count(k, pa.alpha() * trace.sqrt(), bs.circuit_per_antenna)?
    };

    let y = (m_hat as f64).max(m_tilde);
    let m_dagger = if y <= (k + 1) as f64 {
        k + 1
    } else if y >= m as f64 {
        m
    } else {
        ceil_floor(y, k, trace, pa, bs)?
    };
    let ma = m_dagger as f64;
    Ok(AsymptoticPlan {
        m_tilde,
        m_hat,
        m_dagger,
        p_bar: asymptotic_per_antenna_power(ma, k, trace)?,
        p_pas_bar: asymptotic_pa_power(ma, k, trace, pa)?,
        p_bs_bar: asymptotic_bs_power(ma, k, trace, pa, bs)?,
        feasible: true,
    })
}
