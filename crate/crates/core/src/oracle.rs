//! Slow reference solvers and statistical checks.
//!
//! Nothing here calls into [`crate::precoding`] or [`crate::asymptotic`]:
//! the brute-force solver parameterizes the feasible set through an SVD null
//! space and minimizes the PA cost directly, and the grid search re-derives
//! the consumption formula on its own. They exist to check the fast paths.

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::{ChannelRealization, QosTargets};
use crate::error::{Error, Result};
use crate::model::{BsModel, PaModel};
use crate::CMatrix;

/// Smoothing `mu` runs through 1e-1, 1e-2, ... down to 1e-9 in unit-scaled
/// precoder coordinates.
const SMOOTHING_STAGES: i32 = 9;

/// How an [`OracleResult`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    NullspaceDescent,
    Analytic,
}

/// Evidence that an oracle solution is feasible and stationary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub zf_residual: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub powers: Vec<f64>,
    /// PA consumption `alpha * sum_m p_m^(1/2)`.
    pub objective: f64,
    pub method: OracleMethod,
    pub certificate: Certificate,
}

/// Largest instance the brute-force solver accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeGuard {
    pub max_antennas: usize,
    pub max_users: usize,
    pub max_subcarriers: usize,
}

impl Default for SizeGuard {
    fn default() -> Self {
        Self { max_antennas: 8, max_users: 4, max_subcarriers: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub starts: usize,
    pub seed: u64,
    pub gradient_tolerance: f64,
    /// Iteration cap per smoothing stage, as a multiple of the variable count.
    pub steps_per_dimension: usize,
    pub guard: SizeGuard,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { starts: 8, seed: 0, gradient_tolerance: 1e-8, steps_per_dimension: 200, guard: SizeGuard::default() }
    }
}

/// Feasible set of one subcarrier: `W = W0 + N Z` for any `Z`.
struct Affine {
    particular: CMatrix,
    null: CMatrix,
}

fn affine_parameterization(hq: &CMatrix, target: &[f64]) -> Result<Affine> {
    let (k, m) = hq.shape();
    let mut padded = CMatrix::zeros(m, m);
    padded.rows_mut(0, k).copy_from(hq);
    let svd = SVD::new(padded, true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let s = &svd.singular_values;
    let s_max = s.max();
    let tol = s_max * m as f64 * 1e-13;
    let rank = s.iter().filter(|x| **x > tol).count();
    if s_max == 0.0 || rank < k || s_max / s.iter().filter(|x| **x > tol).fold(f64::INFINITY, |a, b| a.min(*b)) > 1e12 {
        return Err(Error::SingularChannel(format!("channel rank {rank} below {k} users")));
    }
    let mut particular = CMatrix::zeros(m, k);
    let mut null = CMatrix::zeros(m, m - k);
    let mut next_null = 0;
    for i in 0..m {
        let v = v_t.row(i).adjoint();
        if s[i] > tol {
            for col in 0..k {
                let coeff = u[(col, i)].conj() * (target[col] / s[i]);
                particular.column_mut(col).axpy(coeff, &v, Complex64::new(1.0, 0.0));
            }
        } else {
            null.set_column(next_null, &v);
            next_null += 1;
        }
    }
    Ok(Affine { particular, null })
}

/// Smoothed PA cost `sum_m (p_m + mu^2)^(1/2)` on the stacked null-space
/// coordinates, and its gradient.
struct SmoothedCost<'a> {
    pieces: &'a [Affine],
    m: usize,
    k: usize,
}

impl SmoothedCost<'_> {
    fn precoders(&self, x: &[f64]) -> Vec<CMatrix> {
        let mut offset = 0;
        self.pieces
            .iter()
            .map(|piece| {
                let d = piece.null.ncols();
                let z = CMatrix::from_fn(d, self.k, |r, c| {
                    let i = offset + 2 * (c * d + r);
                    Complex64::new(x[i], x[i + 1])
                });
                offset += 2 * d * self.k;
                &piece.particular + &piece.null * z
            })
            .collect()
    }

    fn powers(&self, w: &[CMatrix]) -> Vec<f64> {
        let mut p = vec![0.0; self.m];
        for wq in w {
            for (r, pr) in p.iter_mut().enumerate() {
                *pr += wq.row(r).iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
        p
    }

    fn evaluate(&self, x: &[f64], mu: f64, grad: &mut [f64]) -> f64 {
        let w = self.precoders(x);
        let p = self.powers(&w);
        let root: Vec<f64> = p.iter().map(|pm| (pm + mu * mu).sqrt()).collect();
        let mut offset = 0;
        for (piece, wq) in self.pieces.iter().zip(&w) {
            let mut g = wq.clone();
            for (r, rr) in root.iter().enumerate() {
                g.row_mut(r).unscale_mut(*rr);
            }
            let gz = piece.null.adjoint() * g;
            let d = piece.null.ncols();
            for c in 0..self.k {
                for r in 0..d {
                    let i = offset + 2 * (c * d + r);
                    grad[i] = gz[(r, c)].re;
                    grad[i + 1] = gz[(r, c)].im;
                }
            }
            offset += 2 * d * self.k;
        }
        root.iter().sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with Armijo backtracking. Stops on the gradient
/// tolerance, on `max_steps`, or once `STALL_WINDOW` steps together gain
/// less than a few ulps of the objective. Returns the final gradient norm.
fn lbfgs<F>(x: &mut [f64], mut f: F, tolerance: f64, max_steps: usize) -> f64
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    const MEMORY: usize = 12;
    const STALL_WINDOW: usize = 25;
    let n = x.len();
    let mut recent = std::collections::VecDeque::with_capacity(STALL_WINDOW + 1);
    let mut g = vec![0.0; n];
    let mut value = f(x, &mut g);
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(MEMORY);
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    for _ in 0..max_steps {
        let g_norm = dot(&g, &g).sqrt();
        if g_norm <= tolerance {
            return g_norm;
        }
        recent.push_back(value);
        if recent.len() > STALL_WINDOW {
            let old = recent.pop_front().unwrap_or(value);
            if old - value <= 1e-14 * value.abs().max(1.0) {
                return g_norm;
            }
        }
        // two-loop recursion
        let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
            alphas.push(a);
        }
        let gamma = history.last().map_or(1.0 / g_norm.max(1e-300), |(s, y, _)| dot(s, y) / dot(y, y));
        dir.iter_mut().for_each(|d| *d *= gamma);
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (a - b) * si);
        }
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            history.clear();
            dir = g.iter().map(|v| -v / g_norm).collect();
            slope = -g_norm;
        }

        let mut step = 1.0;
        let accepted = loop {
            trial.iter_mut().zip(x.iter().zip(&dir)).for_each(|(t, (xi, di))| *t = xi + step * di);
            let v = f(&trial, &mut g_trial);
            if v <= value + 1e-4 * step * slope {
                break Some(v);
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some(new_value) = accepted else {
            return g_norm;
        };
        let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == MEMORY {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }
        x.copy_from_slice(&trial);
        g.copy_from_slice(&g_trial);
        value = new_value;
    }
    dot(&g, &g).sqrt()
}

fn zf_target(qos: &QosTargets) -> Vec<f64> {
    let q = qos.subcarriers as f64;
    qos.gamma.iter().map(|g| (g / q).sqrt() * qos.sigma()).collect()
}

/// Minimizes the PA consumption over every precoder meeting the ZF
/// constraint, by smoothed quasi-Newton descent in the null space of each
/// `H_q`, from `settings.starts` starting points.
pub fn solve_min_pa_bruteforce(
    h: &ChannelRealization,
    qos: &QosTargets,
    pa: &PaModel,
    settings: &OracleSettings,
) -> Result<OracleResult> {
    let (m, k, q) = (h.antennas(), h.users(), h.subcarriers());
    let guard = settings.guard;
    if m > guard.max_antennas || k > guard.max_users || q > guard.max_subcarriers {
        return Err(Error::OracleSize(format!(
            "M={m}, K={k}, Q={q} exceeds M<={}, K<={}, Q<={}",
            guard.max_antennas, guard.max_users, guard.max_subcarriers
        )));
    }
    if qos.users() != k || qos.subcarriers != q || m < k {
        return Err(Error::Dimension(format!(
            "QoS for K={}, Q={} against channel K={k}, Q={q}, M={m}",
            qos.users(),
            qos.subcarriers
        )));
    }
    let target = zf_target(qos);

    // scaling W by a constant leaves the argmin unchanged; work at unit size
    let raw = h.per_subcarrier.iter().map(|hq| affine_parameterization(hq, &target)).collect::<Result<Vec<_>>>()?;
    let scale = raw.iter().flat_map(|a| a.particular.iter()).map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        let powers = vec![0.0; m];
        return Ok(OracleResult {
            powers,
            objective: 0.0,
            method: OracleMethod::Analytic,
            certificate: Certificate { zf_residual: 0.0, gradient_norm: 0.0 },
        });
    }
    let pieces: Vec<Affine> =
        raw.into_iter().map(|a| Affine { particular: a.particular.unscale(scale), null: a.null }).collect();
    let cost = SmoothedCost { pieces: &pieces, m, k };
    let dim: usize = pieces.iter().map(|p| 2 * p.null.ncols() * k).sum();
    let max_steps = settings.steps_per_dimension * dim.max(1);

    let run = |start: usize| -> (Vec<f64>, f64, f64) {
        let mut x = vec![0.0; dim];
        if start > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(start as u64);
            x.iter_mut().for_each(|v| *v = rng.sample::<f64, _>(StandardNormal));
        }
        let mut g_norm = f64::INFINITY;
        for stage in 1..=SMOOTHING_STAGES {
            let mu = 10f64.powi(-stage);
            let tol = if stage == SMOOTHING_STAGES {
                settings.gradient_tolerance
            } else {
                (1e-4 * mu).max(settings.gradient_tolerance)
            };
            g_norm = lbfgs(&mut x, |xv, g| cost.evaluate(xv, mu, g), tol, max_steps);
        }
        let p = cost.powers(&cost.precoders(&x));
        let objective: f64 = p.iter().map(|v| v.sqrt()).sum();
        (x, objective, g_norm)
    };
    let best = (0..settings.starts.max(1))
        .into_par_iter()
        .map(run)
        .collect::<Vec<_>>()
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one start");

    let w: Vec<CMatrix> = cost.precoders(&best.0).into_iter().map(|wq| wq * Complex64::new(scale, 0.0)).collect();
    let powers = cost.powers(&w);
    let zf_residual = h
        .per_subcarrier
        .iter()
        .zip(&w)
        .map(|(hq, wq)| {
            let hw = hq * wq;
            let mut worst: f64 = 0.0;
            for r in 0..k {
                for c in 0..k {
                    let want = if r == c { target[r] } else { 0.0 };
                    worst = worst.max((hw[(r, c)] - want).norm());
                }
            }
            worst
        })
        .fold(0.0, f64::max);
    Ok(OracleResult {
        objective: pa.alpha() * powers.iter().map(|p| p.sqrt()).sum::<f64>(),
        powers,
        method: OracleMethod::NullspaceDescent,
        certificate: Certificate { zf_residual, gradient_norm: best.2 },
    })
}

/// Closed-form single-user single-subcarrier optimum: the whole budget on
/// the antenna with the largest gain.
pub fn single_user_analytic(h: &[Complex64], gamma: f64, noise_power: f64, pa: &PaModel) -> Result<OracleResult> {
    let (best, gain) =
        h.iter().map(|z| z.norm()).enumerate().fold((0, 0.0), |acc, (i, g)| if g > acc.1 { (i, g) } else { acc });
    if gain == 0.0 {
        return Err(Error::Infeasible("all-zero channel".into()));
    }
    let mut powers = vec![0.0; h.len()];
    powers[best] = gamma * noise_power / (gain * gain);
    Ok(OracleResult {
        objective: pa.alpha() * powers[best].sqrt(),
        powers,
        method: OracleMethod::Analytic,
        certificate: Certificate { zf_residual: 0.0, gradient_norm: 0.0 },
    })
}

/// Monte-Carlo mean of `tr((H H^H)^-1 D_gamma) sigma^2` for
/// `H = D_beta^(1/2) G`, `G` with i.i.d. CN(0, 1) entries.
pub fn mc_inverse_wishart_trace<R: Rng + ?Sized>(
    m: usize,
    k: usize,
    beta: &[f64],
    gamma: &[f64],
    noise_power: f64,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if m <= k || beta.len() != k || gamma.len() != k {
        return Err(Error::Dimension(format!("need M > K and K coefficients (M={m}, K={k})")));
    }
    if draws < 100 {
        return Err(Error::Domain(format!("at least 100 draws required, got {draws}")));
    }
    let mut total = 0.0;
    for _ in 0..draws {
        let g = DMatrix::<Complex64>::from_fn(k, m, |r, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * (0.5 * beta[r]).sqrt()
        });
        let inv =
            (&g * g.adjoint()).try_inverse().ok_or_else(|| Error::SingularChannel("singular Gram matrix".into()))?;
        total += (0..k).map(|i| inv[(i, i)].re * gamma[i]).sum::<f64>() * noise_power;
    }
    Ok(total / draws as f64)
}

/// Exhaustive search for the BS-consumption-minimizing number of active
/// antennas among those meeting the per-antenna cap. Ties go to the smaller
/// count.
pub fn grid_min_bs(m: usize, k: usize, trace: f64, pa: &PaModel, bs: &BsModel, p_max: f64) -> Result<usize> {
    if m > 4096 {
        return Err(Error::OracleSize(format!("grid limited to M <= 4096, got {m}")));
    }
    let alpha = pa.alpha();
    let cost = |x: usize| {
        let xf = x as f64;
        alpha * (xf * trace / (xf - k as f64)).sqrt() + bs.p_fix + bs.circuit_per_antenna * xf
    };
    let mut best: Option<(usize, f64)> = None;
    for x in (k + 1)..=m {
        if trace / (x as f64 * (x - k) as f64) > p_max {
            continue;
        }
        let c = cost(x);
        if best.is_none_or(|(_, b)| c < b) {
            best = Some((x, c));
        }
    }
    best.map(|(x, _)| x)
        .ok_or_else(|| Error::Infeasible(format!("no antenna count in [{}, {m}] meets the per-antenna cap", k + 1)))
}

/// All four roots of `a x^4 + b x^3 + c x^2 + d x + e` by Ferrari's method
/// with a Cardano-solved resolvent cubic.
pub fn quartic_roots(a: f64, b: f64, c: f64, d: f64, e: f64) -> [Complex64; 4] {
    let (b, c, d, e) = (b / a, c / a, d / a, e / a);
    let p = c - 3.0 * b * b / 8.0;
    let q = b * b * b / 8.0 - b * c / 2.0 + d;
    let r = -3.0 * b.powi(4) / 256.0 + b * b * c / 16.0 - b * d / 4.0 + e;
    let shift = Complex64::new(-b / 4.0, 0.0);

    if q.abs() < 1e-300 {
        // biquadratic
        let disc = Complex64::new(p * p - 4.0 * r, 0.0).sqrt();
        let y2 = [(-p + disc) / 2.0, (-p - disc) / 2.0];
        return [y2[0].sqrt() + shift, -y2[0].sqrt() + shift, y2[1].sqrt() + shift, -y2[1].sqrt() + shift];
    }
    let resolvent = cubic_roots(8.0, 8.0 * p, 2.0 * p * p - 8.0 * r, -q * q);
    let m = resolvent.into_iter().max_by(|x, y| x.norm().total_cmp(&y.norm())).expect("three roots");
    let s = (m * 2.0).sqrt();
    let mut out = [Complex64::new(0.0, 0.0); 4];
    let mut i = 0;
    for s1 in [1.0, -1.0] {
        let inner = (-(2.0 * p + 2.0 * m + s1 * std::f64::consts::SQRT_2 * q / m.sqrt())).sqrt();
        for s2 in [1.0, -1.0] {
            out[i] = (s * s1 + inner * s2) / 2.0 + shift;
            i += 1;
        }
    }
    out
}

fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> [Complex64; 3] {
    let (b, c, d) = (b / a, c / a, d / a);
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = Complex64::new(q * q / 4.0 + p * p * p / 27.0, 0.0).sqrt();
    let mut u = (Complex64::new(-q / 2.0, 0.0) + disc).powf(1.0 / 3.0);
    if u.norm() < 1e-300 {
        u = (Complex64::new(-q / 2.0, 0.0) - disc).powf(1.0 / 3.0);
    }
    let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let mut out = [Complex64::new(0.0, 0.0); 3];
    let mut rot = Complex64::new(1.0, 0.0);
    for root in out.iter_mut() {
        let uk = u * rot;
        let t = if uk.norm() < 1e-300 { Complex64::new(0.0, 0.0) } else { uk - p / (3.0 * uk) };
        *root = t - b / 3.0;
        rot *= omega;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ferrari_recovers_known_roots() {
        // (x-1)(x-2)(x+3)(x-4) = x^4 - 4x^3 - 7x^2 + 34x - 24
        let mut re: Vec<f64> = quartic_roots(1.0, -4.0, -7.0, 34.0, -24.0).iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        for (got, want) in re.iter().zip([-3.0, 1.0, 2.0, 4.0]) {
            assert!((got - want).abs() < 1e-9, "{re:?}");
        }
        // x (x - 2)^3 - 32 has the root 4
        let roots = quartic_roots(1.0, -6.0, 12.0, -8.0, -32.0);
        assert!(roots.iter().any(|z| (z.re - 4.0).abs() < 1e-9 && z.im.abs() < 1e-9));
    }

    #[test]
    fn analytic_single_user() {
        let pa = PaModel::reference();
        let h = [Complex64::new(0.5, 0.0), Complex64::new(0.0, -2.0)];
        let r = single_user_analytic(&h, 4.0, 1.0, &pa).unwrap();
        assert_relative_eq!(r.powers[1], 1.0);
        assert_relative_eq!(r.objective, pa.alpha());
    }

    #[test]
    fn bruteforce_single_user_is_sparse() {
        let pa = PaModel::reference();
        let h = [Complex64::new(0.3, 0.4), Complex64::new(-1.2, 0.1), Complex64::new(0.2, 0.9)];
        let ch = ChannelRealization::from_vector(&h, crate::channel::ChannelKind::Rayleigh).unwrap();
        let qos = QosTargets::new(vec![2.0], 0.5, 1).unwrap();
        let brute = solve_min_pa_bruteforce(&ch, &qos, &pa, &OracleSettings::default()).unwrap();
        let exact = single_user_analytic(&h, 2.0, 0.5, &pa).unwrap();
        assert_relative_eq!(brute.objective, exact.objective, max_relative = 1e-6);
        assert!(brute.certificate.zf_residual < 1e-8);
    }

    #[test]
    fn guard_rejects_large_instances() {
        let pa = PaModel::reference();
        let ch = ChannelRealization::from_vector(&[Complex64::new(1.0, 0.0); 9], crate::channel::ChannelKind::Rayleigh)
            .unwrap();
        let qos = QosTargets::new(vec![1.0], 1.0, 1).unwrap();
        assert!(matches!(
            solve_min_pa_bruteforce(&ch, &qos, &pa, &OracleSettings::default()),
            Err(Error::OracleSize(_))
        ));
    }

    #[test]
    fn wishart_zero_targets_and_small_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(mc_inverse_wishart_trace(4, 2, &[1.0, 1.0], &[0.0, 0.0], 1.0, 100, &mut rng).unwrap(), 0.0);
        let est = mc_inverse_wishart_trace(6, 2, &[1.0, 2.0], &[1.0, 1.0], 1.0, 20_000, &mut rng).unwrap();
        assert_relative_eq!(est, 1.5 / 4.0, max_relative = 0.03);
    }

    #[test]
    fn grid_edges() {
        let pa = PaModel::reference();
        let free = BsModel::new(15.0, 0.0, 1e-9).unwrap();
        assert_eq!(grid_min_bs(40, 3, 2.0, &pa, &free, 1.0).unwrap(), 40);
        assert_eq!(grid_min_bs(5, 4, 1.0, &pa, &BsModel::reference(), 1.0).unwrap(), 5);
        assert!(grid_min_bs(5, 4, 100.0, &pa, &BsModel::reference(), 1.0).is_err());
    }
}
