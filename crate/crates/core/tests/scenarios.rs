use std::sync::OnceLock;

use qbm::limits::{attach_laws, regime_classify, tau_q, Law, Regime};
use qbm::phasespace::{evolved_components, initial_components, wigner_grid, GridSpec};
use qbm::propagation::{crossing_time, Measure};
use qbm::{ModelParams, Scenario, Simulation};

fn sim() -> &'static Simulation {
    static SIM: OnceLock<Simulation> = OnceLock::new();
    SIM.get_or_init(|| Simulation::new(ModelParams::DEFAULT))
}

#[test]
fn golden_rule_curve_tracks_exact_one() {
    let s = Scenario::coherent(16.0, 0.0).unwrap();
    let mut curve = sim().decay_curve(&s, 60.0, 601, true).unwrap();
    attach_laws(&mut curve, sim(), &s, &[Law::GoldenRule]).unwrap();
    let gr = curve.golden_rule.as_ref().unwrap();
    let worst = curve
        .indicator
        .iter()
        .zip(gr)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.03, "{worst}");
    let exact = curve.decoherence_time().unwrap();
    let law = crossing_time(&curve.times, gr, (-1.0f64).exp()).unwrap();
    assert!((exact / law - 1.0).abs() < 0.05);
}

#[test]
fn golden_rule_overestimates_lifetime_of_far_separated_packets() {
    let s = Scenario::coherent(4000.0, 0.0).unwrap();
    let mut curve = sim().decay_curve(&s, 0.008, 401, true).unwrap();
    attach_laws(&mut curve, sim(), &s, &Law::ALL).unwrap();
    let e = (-1.0f64).exp();
    let exact = curve.decoherence_time().unwrap();
    let gr = crossing_time(&curve.times, curve.golden_rule.as_ref().unwrap(), e).unwrap();
    let id2 = crossing_time(&curve.times, curve.id2.as_ref().unwrap(), e).unwrap();
    assert!(exact > 3.0 * gr);
    assert!((exact / id2 - 1.0).abs() < 0.02);
}

#[test]
fn report_agrees_with_curves() {
    let s = Scenario::coherent(200.0, 0.0).unwrap();
    let report = regime_classify(sim(), &s, Measure::Indicator).unwrap();
    assert_eq!(report.regime, Regime::InteractionDominated1);
    let curve = sim().decay_curve(&s, 0.4, 801, true).unwrap();
    let exact = curve.decoherence_time().unwrap();
    assert!((exact / report.timescales.decoherence_id1 - 1.0).abs() < 0.02);
}

#[test]
fn interference_disappears_while_humps_remain() {
    let s = Scenario::coherent(4000.0, 0.0).unwrap();
    let b2 = sim().b_squared().unwrap();
    let t = 5.0 * tau_q(b2, s.dq());
    let traj = sim().evolve(&[0.0, t]).unwrap();
    let state = &traj.states[1];

    // the fringes sit between the humps; they need a fine p grid
    let spec = GridSpec::new((-1.0, 1.0), 101, (-0.004, 0.004), 41).unwrap();
    let before = wigner_grid(&s, &traj.states[0], spec).unwrap();
    let after = wigner_grid(&s, state, spec).unwrap();
    let peak = |v: &[f64]| v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    assert!(peak(&after.values) < 1e-2 * peak(&before.values));

    let c0 = initial_components(&s);
    let ct = evolved_components(&s, state).unwrap();
    for center in [-2000.0, 2000.0] {
        let n = 2001;
        let h = 12.0 / (n - 1) as f64;
        let mass = |c: &[qbm::phasespace::GaussianComponent]| {
            (0..n)
                .map(|k| qbm::phasespace::density_from_components(c, center - 6.0 + h * k as f64))
                .sum::<f64>()
                * h
        };
        let (m0, mt) = (mass(&c0), mass(&ct));
        assert!((m0 - 0.5).abs() < 1e-6);
        assert!((mt - m0).abs() < 1e-2, "{mt} vs {m0}");
    }
}

#[test]
fn zero_coupling_keeps_full_coherence() {
    let sim = Simulation::new(ModelParams::new(0.0, 100.0, 20.0).unwrap());
    let s = Scenario::coherent(50.0, 3.0).unwrap();
    let curve = sim.decay_curve(&s, 10.0, 101, true).unwrap();
    assert!(curve.indicator.iter().all(|n| (n - 1.0).abs() < 1e-9));
    assert!(curve.decoherence_time().is_none());
}
