//! Statistical and trend properties of random networks at desk scale.

use abelconv::attack::{self, StepSize};
use abelconv::convop::OffsetPolicy;
use abelconv::group::GroupSpec;
use abelconv::network::{Activation, Network};
use abelconv::signal::{Signal, SignalKind};
use abelconv::verify::{self, Experiment, ExperimentConfig};
use nalgebra::DVector;

#[test]
fn hutchinson_standard_error_shrinks_like_inverse_probes() {
    let spec = GroupSpec::cyclic(8).unwrap();
    let net = Network::random(&spec, &[4, 3, 2], &[3], OffsetPolicy::Uniform, Activation::ShiftedSoftplus, 3).unwrap();
    let f = Signal::random(&spec, 4, SignalKind::BoundedUniform, 1).unwrap();
    let trace = net.forward(&f).unwrap();
    let pts: Vec<(f64, f64)> = [16usize, 64, 256, 1024, 4096]
        .iter()
        .map(|&p| {
            let est = net.frobenius_estimate(&trace, p, 77).unwrap();
            ((p as f64).ln(), (est.std_err * est.std_err).ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() < 0.15, "slope {slope}");
}

#[test]
fn m_infty_bound_holds_at_order_64() {
    let spec = GroupSpec::cyclic(64).unwrap();
    let mut passes = 0;
    for seed in 0..100 {
        let net = Network::random(&spec, &[32, 16], &[9], OffsetPolicy::Uniform, Activation::ShiftedSoftplus, seed).unwrap();
        let f = Signal::random(&spec, 32, SignalKind::BoundedUniform, 1000 + seed).unwrap();
        passes += net.m_infty_bound_check(&net.forward(&f).unwrap()).unwrap().pass as usize;
    }
    assert!(passes >= 95, "{passes}/100");
}

#[test]
fn m_infty_medians_decrease_with_group_order() {
    let stats = verify::run(&ExperimentConfig::defaults(Experiment::Robustness)).unwrap();
    let medians: Vec<f64> = [16, 32, 64, 128]
        .iter()
        .map(|g| stats.observations[&format!("median_m_infty_G{g}")])
        .collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
    assert!(stats.all_pass());
}

#[test]
fn gradient_experiment_layer_gain_and_output_moment() {
    let grad = verify::run(&ExperimentConfig::defaults(Experiment::Gradient)).unwrap();
    assert!(grad.check("layer_gain_1").unwrap().pass());
    let out = verify::run(&ExperimentConfig::defaults(Experiment::Output)).unwrap();
    assert!(out.check("second_moment").unwrap().pass());
    assert!(out.observations["second_moment"] <= 1.0);
}

#[test]
fn linear_rho_matches_closed_form() {
    // With the identity activation the gradient is the constant L^T u.
    let spec = GroupSpec::new(vec![2, 8]).unwrap();
    for seed in 0..5 {
        let net = Network::random(&spec, &[3, 2], &[4], OffsetPolicy::Uniform, Activation::Identity, seed).unwrap();
        let dense = net.layers()[0].to_dense().unwrap();
        let g = dense.transpose() * DVector::from_column_slice(net.readout());
        let f = Signal::random(&spec, 3, SignalKind::BoundedUniform, 10 + seed).unwrap();
        let a = 0.7;
        let r = attack::single_step_attack(&net, &f, StepSize::Fixed(a)).unwrap();
        let rho = 2.0 * a / g.norm() * (f.len() as f64).sqrt() / f.l2_norm();
        assert!((r.rho.unwrap() - rho).abs() < 1e-10 * rho);
    }
}

#[test]
fn attack_flip_rate_recorded_for_step_scales() {
    let mut cfg = ExperimentConfig::defaults(Experiment::Attack);
    cfg.group = GroupSpec::cyclic(32).unwrap();
    cfg.sweep_groups = vec![GroupSpec::cyclic(16), GroupSpec::cyclic(32)]
        .into_iter()
        .map(Result::unwrap)
        .collect();
    cfg.trials = 20;
    let stats = verify::run(&cfg).unwrap();
    for label in ["quarter", "half", "one", "double"] {
        let rate = stats.observations[&format!("flip_rate_a_{label}")];
        assert!((0.0..=1.0).contains(&rate));
    }
    assert!(stats.check("linear_control").unwrap().pass());
}
