use cavity_sense::dynamics::{zero_spurious_coherences, Addressing, DensityMatrix, Propagator};
use cavity_sense::hilbert::{build_full_basis, build_truncated_basis};
use cavity_sense::optimizer::{Objective, OptimizerConfig};
use cavity_sense::metrology::{SensingCase, SensingScenario};
use cavity_sense::pulse::{digitize, DigitizedPulse, PulseParams};
use cavity_sense::PhysicalParamsF64;

fn ramp(t: f64) -> PulseParams<f64> {
    ramp_with_phase(t, 0.0)
}

fn ramp_with_phase(t: f64, phi: f64) -> PulseParams<f64> {
    let up: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
    PulseParams { total_time: t, omega1: up, omega2: vec![1.0; 10], phi: vec![phi; 10] }
}

#[test]
fn state_stays_physical_along_noisy_runs() {
    for (n, m) in [(2, 1), (4, 2)] {
        let basis = build_truncated_basis(n, m).unwrap();
        let params = PhysicalParamsF64::default();
        let prop = Propagator::new(&basis, &params, &Addressing::halves(n)).unwrap();
        let rho0 = DensityMatrix::pure(basis.dim(), basis.localized_state(m).unwrap());
        let pulse = digitize(&ramp(12.0), 1.0).unwrap();
        let mut worst = (0.0f64, 0.0f64, 0.0f64);
        prop.propagate_observed(&rho0, &pulse, 5, 0, |_, _, rho| {
            worst.0 = worst.0.max((rho.trace().re - 1.0).abs());
            worst.1 = worst.1.max(rho.hermiticity_defect());
            worst.2 = worst.2.min(rho.min_eigenvalue());
        })
        .unwrap();
        assert!(worst.0 < 1e-8 && worst.1 < 1e-10 && worst.2 > -1e-7, "N={n}: {worst:?}");
    }
}

#[test]
fn closed_system_keeps_a_pure_state_pure() {
    let basis = build_full_basis(2, 1).unwrap();
    let params = PhysicalParamsF64 { kappa: 0.0, gamma0: 0.0, gamma1: 0.0, ..PhysicalParamsF64::default() }.noiseless();
    let prop = Propagator::new(&basis, &params, &Addressing::halves(2)).unwrap();
    let rho0 = DensityMatrix::pure(basis.dim(), basis.localized_state(1).unwrap());
    let pulse = DigitizedPulse::constant(8, 0.7, 0.4, 1.1);
    let mut drift = 0.0f64;
    prop.propagate_observed(&rho0, &pulse, 0, 0, |_, _, rho| drift = drift.max((rho.purity() - 1.0).abs())).unwrap();
    assert!(drift < 1e-8, "{drift}");
}

#[test]
fn zeroing_keeps_trace_of_the_target_block() {
    let basis = build_truncated_basis(2, 1).unwrap();
    let prop = Propagator::new(&basis, &PhysicalParamsF64::default(), &Addressing::halves(2)).unwrap();
    let rho0 = DensityMatrix::pure(basis.dim(), basis.localized_state(1).unwrap());
    let rho = prop.propagate(&rho0, &digitize(&ramp(10.0), 1.0).unwrap(), 1).unwrap();
    let z = zero_spurious_coherences(&rho, &basis, 1);
    assert!((z.trace().re - rho.trace().re).abs() < 1e-12);
    assert!(z.hermiticity_defect() < 1e-12);
}

#[test]
fn ramp_beats_shot_noise_in_both_cases() {
    let pi = std::f64::consts::PI;
    for (case, baseline, phi) in [(SensingCase::CommonField, 2.0, 0.0), (SensingCase::Gradient, 0.5, pi)] {
        let scen = SensingScenario::new(2, 1, case).unwrap();
        let cfg = OptimizerConfig { noise_realizations: 4, ..OptimizerConfig::default() };
        let obj = Objective::new(scen, PhysicalParamsF64::default(), cfg).unwrap();
        let e = obj.evaluate(&ramp_with_phase(40.0, phi)).unwrap();
        assert!(e.f_max > baseline, "{case:?}: {}", e.f_max);
        assert!(e.discarded_population > 0.0 && e.discarded_population < 1.0);
    }
}
