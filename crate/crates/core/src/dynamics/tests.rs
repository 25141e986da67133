use super::*;
use crate::hilbert::{build_full_basis, build_truncated_basis, ProductState};
use crate::pulse::{DigitizedPulse, PulseStep};
use rand::Rng;

fn quiet(g0: f64, gamma0: f64, gamma1: f64, kappa: f64) -> PhysicalParams<f64> {
    PhysicalParams { g0, kappa, gamma0, gamma1, sigma_excited: 0.0, sigma_two_photon: 0.0 }
}

fn random_density(d: usize, seed: u64) -> DensityMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(d, d, |_, _| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let mut m = &a * a.adjoint();
    let tr = m.trace();
    m /= tr;
    DensityMatrix::from_matrix(m).unwrap()
}

fn sample(omega1: f64, omega2: f64, phi: f64, big: f64, small: f64) -> ControlSample<f64> {
    ControlSample { omega1, omega2, phi, excited_detuning: big, two_photon_detuning: small }
}

fn ramp_pulse(steps: usize) -> DigitizedPulse<f64> {
    let mut p = DigitizedPulse::constant(steps, 0.0, 1.0, 0.0);
    for (i, s) in p.steps.iter_mut().enumerate() {
        s.omega1 = (i as f64 + 0.5) / steps as f64;
    }
    p
}

fn idx(basis: &Basis, levels: &str, n: usize) -> usize {
    let atoms = levels
        .chars()
        .map(|c| match c {
            '0' => AtomLevel::G0,
            '1' => AtomLevel::G1,
            _ => AtomLevel::E,
        })
        .collect();
    basis.index_of(&ProductState::new(atoms, n)).unwrap()
}

#[test]
fn zero_controls_and_coupling_give_zero_hamiltonian() {
    let basis = build_full_basis(2, 1).unwrap();
    let h = build_hamiltonian(&ControlSample::default(), &quiet(0.0, 1.0, 1.0, 1.0), &basis, &Addressing::halves(2)).unwrap();
    assert!(h.matrix().iter().all(|z| z.norm() == 0.0));
}

#[test]
fn single_drive_couples_only_zero_and_excited() {
    let basis = build_full_basis(1, 1).unwrap();
    let h = build_hamiltonian(&sample(1.0, 0.0, 0.0, 0.0, 0.0), &quiet(0.0, 0.0, 0.0, 0.0), &basis, &Addressing::halves(1)).unwrap();
    assert_eq!(h.hermiticity_defect(), 0.0);
    for i in 0..basis.dim() {
        for j in 0..basis.dim() {
            let v = h.get(i, j);
            let (si, sj) = (basis.state(i), basis.state(j));
            let pair = [si.atoms[0], sj.atoms[0]];
            let expected = if si.photons == sj.photons
                && (pair == [AtomLevel::G0, AtomLevel::E] || pair == [AtomLevel::E, AtomLevel::G0])
            {
                1.0
            } else {
                0.0
            };
            assert_eq!(v, C::new(expected, 0.0), "({si}, {sj})");
        }
    }
}

#[test]
fn cavity_coupling_element() {
    let basis = build_full_basis(1, 1).unwrap();
    let h = build_hamiltonian(&ControlSample::default(), &quiet(4.0, 0.0, 0.0, 0.0), &basis, &Addressing::halves(1)).unwrap();
    let (a, b) = (idx(&basis, "1", 1), idx(&basis, "e", 0));
    assert_eq!(h.get(a, b), C::new(4.0, 0.0));
    assert_eq!(h.get(b, a), C::new(4.0, 0.0));
}

#[test]
fn beam_two_carries_the_phase() {
    let basis = build_full_basis(2, 1).unwrap();
    let h = build_hamiltonian(&sample(0.0, 0.5, 1.0, 0.0, 0.0), &quiet(0.0, 0.0, 0.0, 0.0), &basis, &Addressing::halves(2)).unwrap();
    let v = h.get(idx(&basis, "00", 0), idx(&basis, "0e", 0));
    assert!((v - C::from_polar(0.5, 1.0)).norm() < 1e-15);
    assert_eq!(h.get(idx(&basis, "00", 0), idx(&basis, "e0", 0)), C::new(0.0, 0.0));
}

#[test]
fn detunings_on_the_diagonal() {
    let basis = build_full_basis(2, 1).unwrap();
    let h = build_hamiltonian(&sample(0.0, 0.0, 0.0, 0.7, 0.03), &quiet(0.0, 0.0, 0.0, 0.0), &basis, &Addressing::halves(2)).unwrap();
    assert!((h.get(idx(&basis, "1e", 1), idx(&basis, "1e", 1)).re - 0.73).abs() < 1e-15);
    assert!((h.get(idx(&basis, "11", 0), idx(&basis, "11", 0)).re - 0.06).abs() < 1e-15);
}

#[test]
fn addressing_mismatch_is_an_error() {
    let basis = build_full_basis(2, 1).unwrap();
    let err = build_hamiltonian::<f64>(&ControlSample::default(), &PhysicalParams::default(), &basis, &Addressing::halves(3));
    assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
}

#[test]
fn halves_put_a_lone_atom_on_beam_one() {
    assert_eq!(Addressing::halves(1).beams(), &[Beam::One]);
    assert_eq!(Addressing::halves(3).beams(), &[Beam::One, Beam::One, Beam::Two]);
    assert_eq!(Addressing::halves(4).beams(), &[Beam::One, Beam::One, Beam::Two, Beam::Two]);
}

#[test]
fn collapse_operator_count_and_rates() {
    let basis = build_full_basis(2, 1).unwrap();
    let ops = collapse_operators(&quiet(4.0, 1.0, 2.0, 0.1), &basis).unwrap();
    assert_eq!(ops.len(), 5);
    assert_eq!(ops[0].rate, 1.0);
    assert_eq!(ops[1].rate, 2.0);
    assert_eq!(ops[4].channel, Channel::Cavity);
    assert_eq!(ops[4].rate, 0.1);
}

#[test]
fn params_json_uses_greek_names_and_defaults() {
    let p: PhysicalParams<f64> = serde_json::from_str(r#"{"kappa": 0.3, "sigma_Delta": 0.0}"#).unwrap();
    assert_eq!(p.kappa, 0.3);
    assert_eq!(p.sigma_excited, 0.0);
    assert_eq!(p.g0, 4.0);
    assert_eq!(p.gamma0, 2.875);
    assert!(serde_json::to_string(&p).unwrap().contains("sigma_delta"));
    assert!(PhysicalParams { kappa: -1.0, ..p }.validate().is_err());
}

#[test]
fn rhs_vanishes_on_identity_without_dissipation() {
    let basis = build_full_basis(2, 1).unwrap();
    let h = build_hamiltonian(&sample(0.3, 0.8, 2.0, 0.5, 0.1), &PhysicalParams::default(), &basis, &Addressing::halves(2)).unwrap();
    let rho = DensityMatrix::maximally_mixed(basis.dim());
    let d = lindblad_rhs(&rho, &h, &[]).unwrap();
    assert!(d.matrix().iter().all(|z| z.norm() < 1e-15));
}

#[test]
fn rhs_is_traceless() {
    let basis = build_full_basis(2, 1).unwrap();
    let params = PhysicalParams::default();
    let h = build_hamiltonian(&sample(0.3, 0.8, 2.0, 0.5, 0.1), &params, &basis, &Addressing::halves(2)).unwrap();
    let ops = collapse_operators(&params, &basis).unwrap();
    for seed in 0..5 {
        let rho = random_density(basis.dim(), seed);
        let d = lindblad_rhs(&rho, &h, &ops).unwrap();
        assert!(d.trace().norm() < 1e-13);
    }
}

#[test]
fn excited_population_loss_rate() {
    let basis = build_full_basis(1, 1).unwrap();
    let params = quiet(0.0, 2.5, 0.0, 0.0);
    let ops = collapse_operators(&params, &basis).unwrap();
    let e = idx(&basis, "e", 0);
    let rho = DensityMatrix::pure(basis.dim(), e);
    let h = OperatorMatrix::zeros(basis.dim());
    let d = lindblad_rhs(&rho, &h, &ops).unwrap();
    assert!((d.get(e, e).re + 2.5).abs() < 1e-15);
    assert!((d.get(idx(&basis, "0", 0), idx(&basis, "0", 0)).re - 2.5).abs() < 1e-15);
}

#[test]
fn sparse_generator_matches_dense_reference() {
    for basis in [build_full_basis(2, 1).unwrap(), build_truncated_basis(3, 1).unwrap()] {
        let params = PhysicalParams::default();
        let s = sample(0.3, 0.8, 2.0, 0.5, 0.1);
        let addressing = Addressing::halves(basis.n_atoms());
        let prop = Propagator::new(&basis, &params, &addressing).unwrap();
        let h = build_hamiltonian(&s, &params, &basis, &addressing).unwrap();
        let ops = collapse_operators(&params, &basis).unwrap();
        let rho = random_density(basis.dim(), 11);
        let dense = lindblad_rhs(&rho, &h, &ops).unwrap();
        let mut out = vec![C::new(0.0, 0.0); basis.dim() * basis.dim()];
        prop.liouvillian(&s).apply(rho.as_slice(), &mut out);
        for (a, b) in out.iter().zip(dense.matrix().iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

/// Central difference of `exp(L t) rho` at t = 0 against the generator.
#[test]
fn generator_matches_exact_exponential() {
    let basis = build_full_basis(1, 1).unwrap();
    let params = PhysicalParams::default();
    let s = sample(0.9, 0.0, 0.0, 0.4, 0.02);
    let prop = Propagator::new(&basis, &params, &Addressing::halves(1)).unwrap();
    let sup = prop.liouvillian(&s).to_superoperator();
    let rho = random_density(basis.dim(), 3);
    let v = DMatrix::from_column_slice(rho.dim() * rho.dim(), 1, rho.as_slice());
    let h = 1e-4;
    let fwd = (&sup * C::new(h, 0.0)).exp() * &v;
    let bwd = (&sup * C::new(-h, 0.0)).exp() * &v;
    let fd = (fwd - bwd) / C::new(2.0 * h, 0.0);
    let hm = build_hamiltonian(&s, &params, &basis, &Addressing::halves(1)).unwrap();
    let exact = lindblad_rhs(&rho, &hm, &collapse_operators(&params, &basis).unwrap()).unwrap();
    for (a, b) in fd.iter().zip(exact.matrix().iter()) {
        assert!((a - b).norm() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn spontaneous_decay_is_exponential() {
    let basis = build_full_basis(1, 1).unwrap();
    let params = quiet(0.0, 1.1, 0.7, 0.0);
    let prop = Propagator::new(&basis, &params, &Addressing::halves(1)).unwrap();
    let e = idx(&basis, "e", 0);
    let rho0 = DensityMatrix::pure(basis.dim(), e);
    let pulse = DigitizedPulse::constant(3, 0.0, 0.0, 0.0);
    let mut checked = 0;
    prop.propagate_observed(&rho0, &pulse, 0, 0, |_, t, rho| {
        assert!((rho.population(e) - (-1.8 * t).exp()).abs() < 1e-7);
        checked += 1;
    })
    .unwrap();
    assert_eq!(checked, 3);
}

#[test]
fn empty_pulse_returns_initial_state() {
    let basis = build_truncated_basis(4, 2).unwrap();
    let rho0 = random_density(basis.dim(), 5);
    let out = propagate(&rho0, &DigitizedPulse::empty(), &PhysicalParams::default(), 1, &basis).unwrap();
    assert_eq!(out, rho0);
}

#[test]
fn no_couplings_no_decay_no_evolution() {
    let basis = build_full_basis(2, 1).unwrap();
    let rho0 = random_density(basis.dim(), 8);
    let out = propagate(&rho0, &DigitizedPulse::constant(4, 0.0, 0.0, 0.0), &quiet(0.0, 0.0, 0.0, 0.0), 1, &basis).unwrap();
    for (a, b) in out.as_slice().iter().zip(rho0.as_slice()) {
        assert!((a - b).norm() < 1e-15);
    }
}

#[test]
fn unitary_limit_conserves_purity() {
    let basis = build_full_basis(2, 1).unwrap();
    let params = PhysicalParams { gamma0: 0.0, gamma1: 0.0, kappa: 0.0, ..PhysicalParams::default() };
    let prop = Propagator::new(&basis, &params, &Addressing::halves(2)).unwrap();
    let rho0 = DensityMatrix::pure(basis.dim(), idx(&basis, "01", 0));
    let out = prop
        .propagate_observed(&rho0, &ramp_pulse(8), 42, 0, |_, _, rho| {
            assert!((rho.purity() - 1.0).abs() < 1e-8);
        })
        .unwrap();
    assert!(out.population(idx(&basis, "01", 0)) < 0.999);
}

#[test]
fn physicality_along_noisy_propagation() {
    let basis = build_full_basis(2, 1).unwrap();
    let prop = Propagator::new(&basis, &PhysicalParams::default(), &Addressing::halves(2)).unwrap();
    let rho0 = DensityMatrix::pure(basis.dim(), idx(&basis, "01", 0));
    prop.propagate_observed(&rho0, &ramp_pulse(10), 9, 0, |_, _, rho| {
        assert!((rho.trace().re - 1.0).abs() < 1e-8);
        assert!(rho.trace().im.abs() < 1e-12);
        assert!(rho.hermiticity_defect() < 1e-10);
        assert!(rho.min_eigenvalue() > -1e-7);
    })
    .unwrap();
}

fn rk4_reference(basis: &Basis, params: &PhysicalParams<f64>, pulse: &DigitizedPulse<f64>, rho0: &DensityMatrix<f64>, dt: f64) -> DensityMatrix<f64> {
    let addressing = Addressing::halves(basis.n_atoms());
    let ops = collapse_operators(params, basis).unwrap();
    let mut rho = rho0.matrix().clone();
    for step in &pulse.steps {
        let s = sample(step.omega1, step.omega2, step.phi, 0.0, 0.0);
        let h = build_hamiltonian(&s, params, basis, &addressing).unwrap();
        let f = |m: &DMatrix<C<f64>>| {
            lindblad_rhs(&DensityMatrix::from_matrix(m.clone()).unwrap(), &h, &ops).unwrap().into_matrix()
        };
        let n = (pulse.step_duration / dt).round() as usize;
        for _ in 0..n {
            let k1 = f(&rho);
            let k2 = f(&(&rho + &k1 * C::new(dt / 2.0, 0.0)));
            let k3 = f(&(&rho + &k2 * C::new(dt / 2.0, 0.0)));
            let k4 = f(&(&rho + &k3 * C::new(dt, 0.0)));
            rho += (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4) * C::new(dt / 6.0, 0.0);
        }
    }
    DensityMatrix::from_matrix(rho).unwrap()
}

#[test]
fn adaptive_propagation_matches_fine_fixed_step_reference() {
    let basis = build_truncated_basis(2, 1).unwrap();
    let params = PhysicalParams::default().noiseless();
    let pulse = ramp_pulse(20);
    let rho0 = DensityMatrix::pure(basis.dim(), basis.localized_state(1).unwrap());
    let fast = propagate(&rho0, &pulse, &params, 0, &basis).unwrap();
    let slow = rk4_reference(&basis, &params, &pulse, &rho0, 0.005);
    for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
        assert!((a - b).norm() < 1e-6);
    }
    let target: f64 = basis.target_indices(1).iter().map(|&i| fast.population(i)).sum();
    assert!(target > 0.5 && target < 1.0, "target population {target}");
}

#[test]
fn noise_is_seeded() {
    let basis = build_truncated_basis(2, 1).unwrap();
    let rho0 = DensityMatrix::pure(basis.dim(), basis.localized_state(1).unwrap());
    let params = PhysicalParams::default();
    let a = propagate(&rho0, &ramp_pulse(5), &params, 7, &basis).unwrap();
    let b = propagate(&rho0, &ramp_pulse(5), &params, 7, &basis).unwrap();
    let c = propagate(&rho0, &ramp_pulse(5), &params, 8, &basis).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn averaging_a_noiseless_run_is_a_single_run() {
    let basis = build_truncated_basis(2, 1).unwrap();
    let rho0 = DensityMatrix::pure(basis.dim(), basis.localized_state(1).unwrap());
    let params = PhysicalParams::default().noiseless();
    let prop = Propagator::new(&basis, &params, &Addressing::halves(2)).unwrap();
    let one = prop.propagate(&rho0, &ramp_pulse(4), 3).unwrap();
    let avg = prop.propagate_averaged(&rho0, &ramp_pulse(4), 3, 8).unwrap();
    assert_eq!(one, avg);
}

#[test]
fn single_precision_propagation() {
    let basis = build_truncated_basis(2, 1).unwrap();
    let rho0 = DensityMatrix::<f32>::pure(basis.dim(), basis.localized_state(1).unwrap());
    let pulse = DigitizedPulse { step_duration: 1.0f32, total_time: 3.0, steps: vec![PulseStep { omega1: 0.5, omega2: 1.0, phi: 0.0 }; 3] };
    let out = propagate(&rho0, &pulse, &PhysicalParams::default(), 1, &basis).unwrap();
    assert!((out.trace().re - 1.0).abs() < 1e-4);
}

#[test]
fn coherences_inside_target_survive_zeroing() {
    let basis = build_truncated_basis(4, 2).unwrap();
    let t = basis.target_indices(2);
    let mut psi = vec![C::new(0.0, 0.0); basis.dim()];
    for (k, &i) in t.iter().enumerate() {
        psi[i] = C::new(1.0 + k as f64, 0.5);
    }
    let rho = DensityMatrix::from_state_vector(&psi);
    assert_eq!(zero_spurious_coherences(&rho, &basis, 2), rho);
    let mixed = DensityMatrix::<f64>::maximally_mixed(basis.dim());
    assert_eq!(zero_spurious_coherences(&mixed, &basis, 2), mixed);
}

#[test]
fn coherence_with_photon_family_is_removed() {
    let basis = build_truncated_basis(4, 2).unwrap();
    let a = idx(&basis, "0011", 0);
    let d = idx(&basis, "0111", 1);
    let mut m = DMatrix::from_element(basis.dim(), basis.dim(), C::new(0.0, 0.0));
    m[(a, a)] = C::new(0.6, 0.0);
    m[(d, d)] = C::new(0.4, 0.0);
    m[(a, d)] = C::new(0.1, 0.2);
    m[(d, a)] = C::new(0.1, -0.2);
    let out = zero_spurious_coherences(&DensityMatrix::from_matrix(m).unwrap(), &basis, 2);
    assert_eq!(out.get(a, d), C::new(0.0, 0.0));
    assert_eq!(out.get(d, a), C::new(0.0, 0.0));
    assert_eq!(out.population(a), 0.6);
    assert_eq!(out.population(d), 0.4);
    assert_eq!(out.hermiticity_defect(), 0.0);
}
