//! Properties shared by the property suite and the acceptance run.
#![allow(dead_code)]

use energymimo::asymptotic;
use energymimo::channel::{draw_rayleigh_channel, stream_rng, ChannelRealization, FrequencyCorrelation, QosTargets};
use energymimo::config::ExperimentConfig;
use energymimo::experiment;
use energymimo::model::{self, PaModel};
use energymimo::precoding::{min_pa_precoder, FixedPointConfig, PrecoderSolution};
use energymimo::{CMatrix, Complex64};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

/// Runs `test` on `cases` deterministic draws from `strategy`.
pub fn check<S>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// Unit-scale instance: path gains in [0.1, 1], SINR targets in [1, 10].
pub fn unit_instance(seed: u64, m: usize, k: usize, q: usize) -> (ChannelRealization, Vec<f64>) {
    let mut rng = stream_rng(seed, 0);
    let beta: Vec<f64> =
        (0..k).map(|i| 0.1 + 0.9 * ((seed.wrapping_mul(31).wrapping_add(i as u64) % 97) as f64 / 96.0)).collect();
    let gamma: Vec<f64> =
        (0..k).map(|i| 1.0 + 9.0 * ((seed.wrapping_mul(17).wrapping_add(3 * i as u64) % 89) as f64 / 88.0)).collect();
    let h = draw_rayleigh_channel(m, k, q, &beta, FrequencyCorrelation::Independent, &mut rng).expect("valid sizes");
    (h, gamma)
}

/// Fixed iteration count with nothing clamped, so two runs are comparable
/// step for step.
pub fn fixed_steps() -> FixedPointConfig {
    FixedPointConfig { tolerance: f64::MIN_POSITIVE, max_iterations: 25, dead_antenna_floor: 0.0, ..Default::default() }
}

fn run_fixed(h: &ChannelRealization, gamma: &[f64], noise: f64) -> PrecoderSolution {
    let qos = QosTargets::new(gamma.to_vec(), noise, h.subcarriers()).expect("valid targets");
    min_pa_precoder(h, &qos, &fixed_steps()).expect("solvable")
}

fn max_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

pub fn instance_strategy() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 1usize..4, 1usize..5, 1usize..4).prop_map(|(seed, k, extra, q)| (seed, k + extra, k, q))
}

/// Scaling the noise amplitude by `c` scales every precoder entry by `c`.
pub fn scale_covariance(cases: u32) -> Result<(), String> {
    check(cases, (instance_strategy(), 0.1f64..10.0), |((seed, m, k, q), c)| {
        let (h, gamma) = unit_instance(seed, m, k, q);
        let base = run_fixed(&h, &gamma, 1.0);
        let scaled = run_fixed(&h, &gamma, c * c);
        let size = max_abs(base.matrices.iter().flat_map(|w| w.iter().map(|z| z.norm())));
        for (a, b) in base.matrices.iter().zip(&scaled.matrices) {
            let gap = max_abs((a * Complex64::new(c, 0.0) - b).iter().map(|z| z.norm()));
            prop_assert!(gap <= 1e-9 * c * size, "entry gap {gap}");
        }
        let pa = PaModel::reference();
        let p0 = model::pa_consumed_power(&base.powers, &pa).unwrap();
        let p1 = model::pa_consumed_power(&scaled.powers, &pa).unwrap();
        prop_assert!((p1 - c * p0).abs() <= 1e-9 * c * p0);
        Ok(())
    })
}

/// A unit-modulus factor on one user's channel rows leaves the powers
/// unchanged.
pub fn phase_covariance(cases: u32) -> Result<(), String> {
    check(cases, (instance_strategy(), 0.0f64..std::f64::consts::TAU, 0usize..8), |((seed, m, k, q), theta, row)| {
        let (h, gamma) = unit_instance(seed, m, k, q);
        let row = row % k;
        let rotated: Vec<CMatrix> = h
            .per_subcarrier
            .iter()
            .map(|hq| {
                let mut r = hq.clone();
                let phase = Complex64::from_polar(1.0, theta);
                r.row_mut(row).iter_mut().for_each(|z| *z *= phase);
                r
            })
            .collect();
        let h2 = ChannelRealization::new(rotated, h.large_scale.clone(), h.kind).unwrap();
        let a = run_fixed(&h, &gamma, 1.0);
        let b = run_fixed(&h2, &gamma, 1.0);
        let size = max_abs(a.powers.iter().copied());
        let gap = max_abs(a.powers.iter().zip(&b.powers).map(|(x, y)| (x - y).abs()));
        prop_assert!(gap <= 1e-9 * size, "power gap {gap}");
        Ok(())
    })
}

/// The antenna-count quartic is solved to 1e-9 relative residual.
pub fn quartic_residual(cases: u32) -> Result<(), String> {
    check(cases, (1usize..200, -6.0f64..12.0, -2.0f64..3.0, -2.0f64..1.0), |(k, log_c, log_t, log_circuit)| {
        let kf = k as f64;
        let c = 10f64.powf(log_c);
        let x = asymptotic::solve_quartic(k, c).unwrap();
        prop_assert!(x > kf);
        let residual = (x * (x - kf).powi(3) - c).abs();
        prop_assert!(residual <= 1e-9 * c, "residual {residual} for c={c}");

        let (t, circuit) = (10f64.powf(log_t), 10f64.powf(log_circuit));
        let x = asymptotic::stationary_antenna_count(k, t, circuit).unwrap();
        let rhs = (t * kf / (2.0 * circuit)).powi(2);
        prop_assert!((x * (x - kf).powi(3) - rhs).abs() <= 1e-9 * rhs);
        Ok(())
    })
}

/// With enough antennas to spare, the asymptotic PA consumption strictly
/// drops with every extra active antenna.
pub fn pa_power_decreasing(cases: u32) -> Result<(), String> {
    check(cases, (1usize..40, 1usize..300, -3.0f64..3.0), |(k, extra, log_trace)| {
        let pa = PaModel::reference();
        let trace = 10f64.powf(log_trace);
        let m_a = (k + extra) as f64;
        let here = asymptotic::asymptotic_pa_power(m_a, k, trace, &pa).unwrap();
        let next = asymptotic::asymptotic_pa_power(m_a + 1.0, k, trace, &pa).unwrap();
        prop_assert!(next < here);
        Ok(())
    })
}

fn run_bytes(cfg: &ExperimentConfig, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let mut out = Vec::new();
    pool.install(|| experiment::cmd_run(cfg, &mut out)).unwrap();
    out
}

/// The same seed gives the same CSV bytes whatever the thread count.
pub fn determinism_by_seed(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), instance_strategy(), 1usize..4), |(seed, (_, m, k, q), realizations)| {
        let text = format!("m = {m}\nk = {k}\nq = {q}\nrealizations = {realizations}\nseed = {seed}\n");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let a = run_bytes(&cfg, 1);
        let b = run_bytes(&cfg, 3);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.iter().filter(|c| **c == b'\n').count(), 1 + 2 * realizations);
        Ok(())
    })
}
