use super::*;
use crate::matcore::{partial_trace, random_unitary, sigma_x, ONE, ZERO};
use crate::quantum::uniform_state;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

fn identity_instance(d_s: usize, dil: Option<Dilation>, rho: DensityMatrix) -> ProtocolInstance {
    ProtocolInstance::new(
        plus_probe(),
        dil,
        CMatrix::identity(d_s),
        CMatrix::identity(d_s),
        rho,
        0.0,
    )
    .unwrap()
}

fn controlled_flip() -> CMatrix {
    kron(&CMatrix::basis_projector(0, 2), &CMatrix::identity(2))
        + kron(&CMatrix::basis_projector(1, 2), &sigma_x())
}

#[test]
fn upse_of_identities_is_identity() {
    let dil = Dilation::new(CMatrix::identity(6), uniform_state(3), 2).unwrap();
    let inst = identity_instance(2, Some(dil), DensityMatrix::maximally_mixed(2));
    assert_eq!(build_upse(&inst), CMatrix::identity(12));
}

#[test]
fn upse_probe_blocks() {
    for seed in 0..20 {
        let inst = ProtocolInstance::random(3, Some(2), seed).unwrap();
        let u = build_upse(&inst);
        assert!(u.unitarity_residual() <= 1e-10);
        let n = 6;
        let block0 = CMatrix::from_fn(n, n, |r, c| u[(r, c)]);
        assert!(block0.approx_eq(&kron(inst.u_s(), &CMatrix::identity(2)), 0.0));
        let block1 = CMatrix::from_fn(n, n, |r, c| u[(r + n, c + n)]);
        let expected = inst.dilation().unwrap().u_se()
            * &kron(inst.u_tilde(), &CMatrix::identity(2));
        assert!(block1.approx_eq(&expected, 1e-15));
        // block-diagonal: commutes with |0⟩⟨0| ⊗ I
        let p0 = kron(&CMatrix::basis_projector(0, 2), &CMatrix::identity(n));
        assert!((&u * &p0).approx_eq(&(&p0 * &u), 1e-15));
    }
}

#[test]
fn upse_without_environment() {
    let inst = ProtocolInstance::random(3, None, 4).unwrap();
    let u = build_upse(&inst);
    assert_eq!(u.rows(), 6);
    let block1 = CMatrix::from_fn(3, 3, |r, c| u[(r + 3, c + 3)]);
    assert_eq!(&block1, inst.u_tilde());
}

#[test]
fn instance_rejects_bad_inputs() {
    let rho = DensityMatrix::maximally_mixed(2);
    let id = CMatrix::identity(2);
    let ground = ProtocolInstance::new([ONE, ZERO], None, id.clone(), id.clone(), rho.clone(), 0.0);
    assert!(matches!(ground, Err(Error::VanishingNormalization(_))));
    let not_unitary = id.scale(C64::new(2.0, 0.0));
    assert!(ProtocolInstance::new(plus_probe(), None, not_unitary, id.clone(), rho.clone(), 0.0).is_err());
    let wrong_dim = CMatrix::identity(3);
    assert!(matches!(
        ProtocolInstance::new(plus_probe(), None, wrong_dim, id, rho, 0.0),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn identity_evolution_is_stationary() {
    let dil = Dilation::new(CMatrix::identity(4), uniform_state(2), 2).unwrap();
    let rho_s = DensityMatrix::new(crate::matcore::random_density(2, 3)).unwrap();
    let inst = identity_instance(2, Some(dil), rho_s.clone());
    let ev = evolve(&inst);
    let probe = CMatrix::outer(&plus_probe(), &plus_probe());
    let xi = uniform_state(2);
    let rho0 = kron_all(&[&probe, rho_s.mat(), &CMatrix::outer(&xi, &xi)]);
    assert!(ev.rho().mat().approx_eq(&rho0, 1e-15));
}

#[test]
fn evolved_trace_is_one() {
    for seed in 0..20 {
        let inst = ProtocolInstance::random(3, Some(3), seed).unwrap();
        let ev = evolve(&inst);
        assert!((ev.rho().mat().trace() - ONE).norm() <= 1e-12);
        assert!(DensityMatrix::new(ev.rho().mat().clone()).is_ok());
    }
}

#[test]
fn equal_branches_leave_probe_untouched() {
    let u = random_unitary(3, 9);
    let chi_v = crate::matcore::random_state(2, 1);
    let chi = [chi_v[0], chi_v[1]];
    let rho_s = DensityMatrix::new(crate::matcore::random_density(3, 2)).unwrap();
    let inst = ProtocolInstance::new(chi, None, u.clone(), u, rho_s, 0.0).unwrap();
    let ev = evolve(&inst);
    let probe = partial_trace(ev.rho().mat(), &ev.dims(), &[0]).unwrap();
    assert!(probe.approx_eq(&CMatrix::outer(&chi, &chi), 1e-12));
}

#[test]
fn default_normalization() {
    for d_e in 1..=4 {
        let dil = Dilation::new(CMatrix::identity(2 * d_e), uniform_state(d_e), 2).unwrap();
        let ev = evolve(&identity_instance(2, Some(dil), DensityMatrix::maximally_mixed(2)));
        for k in 0..d_e {
            let n = ev.normalization(Some(k)).unwrap();
            assert!((n - C64::new(1.0 / (d_e as f64).sqrt(), 0.0)).norm() < 1e-15);
        }
    }
}

#[test]
fn environment_index_must_match() {
    let inst = ProtocolInstance::random(2, Some(2), 0).unwrap();
    let ev = evolve(&inst);
    assert!(matches!(exact_expectation(&ev, 0, None), Err(Error::EnvironmentIndex(_))));
    assert!(matches!(
        exact_expectation(&ev, 0, Some(2)),
        Err(Error::IndexOutOfRange { .. })
    ));
    assert!(matches!(
        exact_expectation(&ev, 2, Some(0)),
        Err(Error::IndexOutOfRange { .. })
    ));
    let bare = evolve(&ProtocolInstance::random(2, None, 0).unwrap());
    assert!(matches!(exact_expectation(&bare, 0, Some(0)), Err(Error::EnvironmentIndex(_))));
}

#[test]
fn central_identity_random_instances() {
    for seed in 0..20 {
        for (d_s, d_e) in [(2, Some(2)), (3, Some(2)), (2, None), (4, None)] {
            let inst = ProtocolInstance::random(d_s, d_e, seed).unwrap();
            let ev = evolve(&inst);
            let ks: Vec<Option<usize>> = match d_e {
                Some(d) => (0..d).map(Some).collect(),
                None => vec![None],
            };
            for i in 0..d_s {
                for &k in &ks {
                    let rec = exact_expectation(&ev, i, k).unwrap();
                    let oracle = lhs_oracle(&inst, i, k).unwrap();
                    assert!((rec.ratio().unwrap() - oracle).norm() <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn oracle_trivial_case_reads_diagonal() {
    let rho = DensityMatrix::new(crate::matcore::random_density(3, 8)).unwrap();
    let inst = identity_instance(3, None, rho.clone());
    for i in 0..3 {
        assert!((lhs_oracle(&inst, i, None).unwrap() - rho.element(i, i)).norm() < 1e-15);
    }
}

#[test]
fn oracle_controlled_flip_closed_form() {
    // A₀ = I/√2 and ρ = |+⟩⟨+|: ⟨0|A₀|+⟩⟨+|0⟩ = 1/(2√2).
    let dil = Dilation::new(controlled_flip(), uniform_state(2), 2).unwrap();
    let rho = DensityMatrix::pure(&uniform_state(2)).unwrap();
    let inst = identity_instance(2, Some(dil), rho);
    let v = lhs_oracle(&inst, 0, Some(0)).unwrap();
    assert!((v - C64::new(0.5 * FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    let rec = exact_expectation(&evolve(&inst), 0, Some(0)).unwrap();
    assert!((rec.ratio().unwrap() - v).norm() < 1e-15);
}

#[test]
fn projector_unitary_examples() {
    assert_eq!(projector_unitary(0, 0.0, 3).unwrap(), CMatrix::identity(3));
    let z = projector_unitary(1, PI, 2).unwrap();
    assert!(z.approx_eq(&crate::matcore::sigma_z(), 1e-15));
    let u = projector_unitary(2, 0.7, 4).unwrap();
    assert!(u.unitarity_residual() < 1e-15);
    let p = CMatrix::basis_projector(2, 4);
    assert!((&u * &p).approx_eq(&(&p * &u), 0.0));
    assert!(matches!(
        projector_unitary(4, 0.7, 4),
        Err(Error::IndexOutOfRange { .. })
    ));
}

#[test]
fn sampled_is_deterministic() {
    let ev = evolve(&ProtocolInstance::random(2, Some(2), 5).unwrap());
    let a = sampled_expectation(&ev, 1, Some(0), 10_001, 42).unwrap();
    let b = sampled_expectation(&ev, 1, Some(0), 10_001, 42).unwrap();
    assert_eq!(a, b);
    let c = sampled_expectation(&ev, 1, Some(0), 10_001, 43).unwrap();
    assert_ne!(a.value, c.value);
    assert_eq!(a.mode, Mode::Sampled { shots: 10_001, seed: 42 });
}

#[test]
fn sampled_needs_two_shots() {
    let ev = evolve(&ProtocolInstance::random(2, None, 5).unwrap());
    assert!(matches!(
        sampled_expectation(&ev, 0, None, 1, 0),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn sampled_zero_variance_cases() {
    // Ground-state system measured on |1⟩: every shot contributes zero.
    let ground = DensityMatrix::pure(&[ONE, ZERO]).unwrap();
    let ev = evolve(&identity_instance(2, None, ground));
    for shots in [2, 3, 1000] {
        let rec = sampled_expectation(&ev, 1, None, shots, 7).unwrap();
        assert_eq!(rec.value, exact_expectation(&ev, 1, None).unwrap().value);
        assert_eq!(rec.std_error, (0.0, 0.0));
    }
    // One-dimensional system with the probe in |+⟩: the σ^x setting always
    // returns +1.
    let trivial = identity_instance(1, None, DensityMatrix::maximally_mixed(1));
    let ev = evolve(&trivial);
    for shots in [2, 11, 500] {
        let rec = sampled_expectation(&ev, 0, None, shots, 3).unwrap();
        assert_eq!(rec.value.re, 1.0);
        assert_eq!(rec.std_error.0, 0.0);
    }
}

#[test]
fn sampled_converges_to_exact() {
    for seed in 0..5 {
        let inst = ProtocolInstance::random(2, Some(2), seed).unwrap();
        let ev = evolve(&inst);
        for i in 0..2 {
            for k in 0..2 {
                let exact = exact_expectation(&ev, i, Some(k)).unwrap().value;
                let rec = sampled_expectation(&ev, i, Some(k), 100_000, seed * 10 + i as u64).unwrap();
                assert!((rec.value.re - exact.re).abs() <= 5.0 * rec.std_error.0);
                assert!((rec.value.im - exact.im).abs() <= 5.0 * rec.std_error.1);
            }
        }
    }
}

#[test]
fn sampled_rmse_scales_as_inverse_sqrt() {
    let inst = ProtocolInstance::random(2, Some(2), 11).unwrap();
    let ev = evolve(&inst);
    let exact = exact_expectation(&ev, 0, Some(1)).unwrap().value;
    let rmse = |shots: u64| {
        let reps = 200;
        let sum: f64 = (0..reps)
            .map(|r| {
                let rec = sampled_expectation(&ev, 0, Some(1), shots, 1000 + r).unwrap();
                (rec.value - exact).norm_sqr()
            })
            .sum();
        (sum / reps as f64).sqrt()
    };
    let ratio = rmse(4_000) / rmse(16_000);
    assert!(ratio > 2.0 / 1.5 && ratio < 2.0 * 1.5, "ratio {ratio}");
}
