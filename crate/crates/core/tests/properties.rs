mod common;

use common::{check, instance_strategy, unit_instance};
use energymimo::asymptotic;
use energymimo::channel::{
    draw_los_channel, stream_rng, target_sinr, ChannelKind, ChannelRealization, LosPhase, QosTargets,
};
use energymimo::model::{self, estimate_flops, BsModel, PaModel, SolverKind, SystemKind};
use energymimo::oracle::{self, OracleSettings};
use energymimo::precoding::{self, FixedPointConfig};
use energymimo::Complex64;
use proptest::collection::vec;
use proptest::prelude::*;

#[test]
fn scale_covariance() {
    common::scale_covariance(64).unwrap();
}

#[test]
fn phase_covariance() {
    common::phase_covariance(64).unwrap();
}

#[test]
fn quartic_residual() {
    common::quartic_residual(256).unwrap();
}

#[test]
fn asymptotic_pa_power_decreasing() {
    common::pa_power_decreasing(256).unwrap();
}

#[test]
fn determinism_by_seed() {
    common::determinism_by_seed(16).unwrap();
}

#[test]
fn pa_consumption_concave_bound() {
    check(256, vec(0.0f64..2.0, 1..20), |powers| {
        let pa = PaModel::reference();
        let consumed = model::pa_consumed_power(&powers, &pa).unwrap();
        let p_tx: f64 = powers.iter().sum();
        let floor = pa.alpha() * p_tx.sqrt();
        prop_assert!(consumed >= floor * (1.0 - 1e-12));
        let active = powers.iter().filter(|p| **p > 0.0).count();
        if active == 1 {
            prop_assert!((consumed - floor).abs() <= 1e-12 * floor);
        } else if active > 1 {
            prop_assert!(consumed > floor);
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn pa_consumption_monotone_and_uniform() {
    check(256, (vec(0.0f64..2.0, 1..20), any::<prop::sample::Index>(), 0.0f64..1.0), |(powers, idx, bump)| {
        let pa = PaModel::reference();
        let before = model::pa_consumed_power(&powers, &pa).unwrap();
        let mut raised = powers.clone();
        raised[idx.index(powers.len())] += bump;
        prop_assert!(model::pa_consumed_power(&raised, &pa).unwrap() >= before);

        let uniform = vec![powers[0]; powers.len()];
        let expected = pa.alpha() * powers.len() as f64 * powers[0].sqrt();
        prop_assert!((model::pa_consumed_power(&uniform, &pa).unwrap() - expected).abs() <= 1e-12 * expected.max(1.0));
        Ok(())
    })
    .unwrap();
}

#[test]
fn report_shares_and_self_gain() {
    check(128, vec(0.0f64..1.0, 1..40), |powers| {
        let report = model::bs_consumed_power(&powers, &PaModel::reference(), &BsModel::reference()).unwrap();
        let (a, b, c) = report.shares;
        prop_assert!((a + b + c - 1.0).abs() <= 1e-12);
        prop_assert_eq!(model::gain_metrics(&report, &report).unwrap(), (1.0, 1.0));
        Ok(())
    })
    .unwrap();
}

#[test]
fn flops_monotone() {
    check(256, (1usize..16, 1usize..64, 1usize..256, 1usize..200, 0usize..4), |(k, m, q, i, which)| {
        for system in [SystemKind::Wideband, SystemKind::Narrowband, SystemKind::Asymptotic] {
            for solver in [SolverKind::Proposed, SolverKind::Conventional] {
                let base = estimate_flops(system, solver, k, m, q, i);
                let (k2, m2, q2, i2) = match which {
                    0 => (k + 1, m, q, i),
                    1 => (k, m + 1, q, i),
                    2 => (k, m, q + 1, i),
                    _ => (k, m, q, i + 1),
                };
                prop_assert!(estimate_flops(system, solver, k2, m2, q2, i2) >= base);
            }
            prop_assert!(
                estimate_flops(system, SolverKind::Proposed, k, m, q, 1)
                    >= estimate_flops(system, SolverKind::Conventional, k, m, q, 1)
            );
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn sinr_target_monotone() {
    check(256, (-14.0f64..-8.0, 0.0f64..2.0), |(log_beta, step)| {
        let b = 10f64.powf(log_beta);
        prop_assert!(target_sinr(b * (1.0 + step + 1e-6), 4.86e-14) > target_sinr(b, 4.86e-14));
        Ok(())
    })
    .unwrap();
}

#[test]
fn min_pa_never_worse_than_zf() {
    check(64, instance_strategy(), |(seed, m, k, q)| {
        let (h, gamma) = unit_instance(seed, m, k, q);
        let qos = QosTargets::new(gamma, 1.0, q).unwrap();
        let cfg = FixedPointConfig::default();
        let zf = precoding::zf_precoder(&h, &qos).unwrap();
        let opt = precoding::min_pa_precoder(&h, &qos, &cfg).unwrap();
        let pa = PaModel::reference();
        let (a, b) =
            (model::pa_consumed_power(&zf.powers, &pa).unwrap(), model::pa_consumed_power(&opt.powers, &pa).unwrap());
        prop_assert!(b <= a + cfg.tolerance, "min-PA {b} vs ZF {a}");

        let target = qos.zf_targets().iter().fold(0.0, |x: f64, y| x.max(*y));
        prop_assert!(precoding::zf_residual(&h, &qos, &opt) <= 1e-9 * target);
        let recomputed = model::per_antenna_powers(&opt.matrices, m).unwrap();
        for (x, y) in opt.powers.iter().zip(&recomputed) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300));
        }
        if opt.converged {
            prop_assert!(opt.residual <= cfg.tolerance);
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn los_allocations_share_one_consumption() {
    check(64, (1usize..12, 1usize..6, vec(0.0f64..1.0, 12), 1.0f64..100.0), |(m, q, raw, gamma)| {
        let mut rng = stream_rng(m as u64, q as u64);
        let h = draw_los_channel(m, 1, q, LosPhase::Random, &mut rng).unwrap();
        let mut weights: Vec<f64> = raw[..m].iter().map(|w| w + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let sigma = 0.3;
        let sol = precoding::los_allocation_precoder(&h, gamma, sigma, &weights).unwrap();
        let pa = PaModel::reference();
        let expected = pa.alpha() * sigma * gamma.sqrt();
        let got = model::pa_consumed_power(&sol.powers, &pa).unwrap();
        prop_assert!((got - expected).abs() <= 1e-12 * expected);
        let qos = QosTargets::new(vec![gamma], sigma * sigma, q).unwrap();
        prop_assert!(precoding::zf_residual(&h, &qos, &sol) <= 1e-12 * sigma * gamma.sqrt());
        Ok(())
    })
    .unwrap();
}

#[test]
fn saturating_respects_cap() {
    check(128, (vec((-1.0f64..1.0, -1.0f64..1.0), 1..16), 0.01f64..1.0), |(entries, fraction)| {
        let h: Vec<Complex64> = entries.iter().map(|(a, b)| Complex64::new(*a, *b)).collect();
        let reach: f64 = h.iter().map(|z| z.norm()).sum();
        prop_assume!(reach > 1e-6);
        // target amplitude a fraction of what full saturation reaches
        let target = fraction * reach;
        let sol = precoding::single_user_saturating_precoder(&h, target * target, 1.0, 1.0).unwrap();
        prop_assert!(sol.powers.iter().all(|p| *p <= 1.0 + 1e-12));
        let rx: Complex64 = h.iter().zip(sol.matrices[0].iter()).map(|(a, b)| a * b).sum();
        prop_assert!((rx.re - target).abs() <= 1e-9 * target && rx.im.abs() <= 1e-9 * target);
        Ok(())
    })
    .unwrap();
}

#[test]
fn asymptotic_bs_power_convex() {
    check(256, (1usize..40, 1usize..200, -3.0f64..3.0), |(k, extra, log_trace)| {
        let (pa, bs) = (PaModel::reference(), BsModel::reference());
        let trace = 10f64.powf(log_trace);
        let x = k as f64 + 0.5 + extra as f64 * 0.5;
        let h = 0.25;
        let f = |v: f64| asymptotic::asymptotic_bs_power(v, k, trace, &pa, &bs).unwrap();
        prop_assert!(f(x + h) - 2.0 * f(x) + f(x - h) > 0.0);
        Ok(())
    })
    .unwrap();
}

#[test]
fn plan_matches_grid_and_invariants() {
    check(256, (1usize..32, 1usize..224, -4.0f64..2.5, 0.0f64..3.0), |(k, extra, log_trace, circuit)| {
        let m = k + extra;
        let pa = PaModel::reference();
        let bs = BsModel::new(15.0, circuit, 1e-9).unwrap();
        let trace = 10f64.powf(log_trace);
        let feasible = asymptotic::feasibility_check(m, k, trace, 1.0).unwrap();
        match asymptotic::optimal_ma_constrained(m, k, trace, &pa, &bs, 1.0) {
            Ok(plan) => {
                prop_assert!(feasible);
                prop_assert!(plan.m_dagger > k && plan.m_dagger <= m);
                if plan.m_hat <= m {
                    prop_assert!(plan.m_dagger >= plan.m_hat);
                }
                prop_assert!(plan.p_bar <= 1.0);
                prop_assert_eq!(plan.m_dagger, oracle::grid_min_bs(m, k, trace, &pa, &bs, 1.0).unwrap());
            }
            Err(_) => prop_assert!(!feasible),
        }
        let m_hat = asymptotic::min_ma_power_constraint(k, trace, 1.0).unwrap();
        if m_hat > k {
            prop_assert!(asymptotic::asymptotic_per_antenna_power(m_hat as f64, k, trace).unwrap() <= 1.0);
        }
        Ok(())
    })
    .unwrap();
}

#[test]
fn oracle_bounded_by_zf_and_deterministic() {
    check(12, (any::<u64>(), 1usize..3, 1usize..3, 1usize..3), |(seed, k, extra, q)| {
        let m = k + extra;
        let (h, gamma) = unit_instance(seed, m, k, q);
        let qos = QosTargets::new(gamma, 1.0, q).unwrap();
        let pa = PaModel::reference();
        let settings = OracleSettings { starts: 3, seed, ..Default::default() };
        let a = oracle::solve_min_pa_bruteforce(&h, &qos, &pa, &settings).unwrap();
        let b = oracle::solve_min_pa_bruteforce(&h, &qos, &pa, &settings).unwrap();
        prop_assert_eq!(&a.powers, &b.powers);
        let zf = precoding::zf_precoder(&h, &qos).unwrap();
        let zf_pa = model::pa_consumed_power(&zf.powers, &pa).unwrap();
        prop_assert!(a.objective <= zf_pa * (1.0 + 1e-9));
        prop_assert!(a.certificate.zf_residual <= 1e-8);
        Ok(())
    })
    .unwrap();
}

#[test]
fn los_fixed_point_lands_on_optimal_manifold() {
    let mut rng = stream_rng(3, 0);
    let h = draw_los_channel(6, 1, 16, LosPhase::Random, &mut rng).unwrap();
    let (gamma, sigma) = (9.0, 0.5);
    let qos = QosTargets::new(vec![gamma], sigma * sigma, 16).unwrap();
    let cfg = FixedPointConfig { tolerance: 1e-12, max_iterations: 10_000, ..Default::default() };
    let sol = precoding::min_pa_precoder(&h, &qos, &cfg).unwrap();
    let amplitude: f64 = sol.powers.iter().map(|p| p.sqrt()).sum();
    assert!((amplitude - sigma * gamma.sqrt()).abs() <= 1e-6 * sigma * gamma.sqrt());
    let rebuilt = ChannelRealization::new(h.per_subcarrier.clone(), vec![1.0], ChannelKind::Los).unwrap();
    assert!(precoding::zf_residual(&rebuilt, &qos, &sol) < 1e-12);
}
