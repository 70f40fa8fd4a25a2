use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use bosewitness::fock::{FockBasis, QuantumState};
use bosewitness::interferometer::{
    consistency_grid, evolve_sequence, heisenberg_measurable, m2_protocol, predict_mean, predict_variance,
    pulse_unitary, ramsey, sample_many, tomography, PulseSpec, SequenceElement, TomographyPlane,
};
use bosewitness::spin::{evaluate_frame, SpinFrame, SpinOperators};
use bosewitness::states::{binomial, noon, random_pure, random_separable, relative_phase, SamplerConfig, Structure};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn frame_of(state: &QuantumState) -> SpinFrame {
    evaluate_frame(&SpinOperators::adjacent_pairs(state.basis().clone()).unwrap(), state).unwrap()
}

fn grid5() -> (Vec<f64>, Vec<f64>) {
    ((0..5).map(|k| k as f64 * PI / 4.0).collect(), (0..5).map(|k| k as f64 * PI / 2.5 - PI).collect())
}

#[test]
fn measurable_special_cases() {
    let c = heisenberg_measurable(FRAC_PI_2, 0.0);
    assert!(c[0].abs() < 1e-15 && (c[1] - 1.0).abs() < 1e-15 && c[2].abs() < 1e-15);
    let c = heisenberg_measurable(PI, 1.234);
    assert!(c[0].abs() < 1e-15 && c[1].abs() < 1e-15 && (c[2] + 1.0).abs() < 1e-15);
    assert_eq!(heisenberg_measurable(0.0, 2.0)[2], 1.0);
}

#[test]
fn direct_evolution_agrees_on_named_states() {
    let (t, p) = grid5();
    for st in [noon(4, PI / 3.0).unwrap(), binomial(12, PI / 8.0, 0.0).unwrap()] {
        for r in consistency_grid(&st, &t, &p).unwrap() {
            assert!(r.mean_residual <= 1e-9 && r.variance_residual <= 1e-9, "{r:?}");
        }
    }
    let vac = QuantumState::vacuum(2);
    for r in consistency_grid(&vac, &t, &p).unwrap() {
        assert_eq!((r.direct_mean, r.direct_variance, r.predicted_mean, r.predicted_variance), (0.0, 0.0, 0.0, 0.0));
    }
}

#[test]
fn pulse_unitary_is_unitary_and_number_conserving() {
    let basis = FockBasis::truncated(4, 4).unwrap();
    let u = pulse_unitary(&basis, &PulseSpec::new(1.1, -0.4).unwrap()).unwrap();
    let defect = (u.adjoint() * &u - DMatrix::identity(basis.dim(), basis.dim())).camax();
    assert!(defect <= 1e-12, "{defect}");
    for i in 0..basis.dim() {
        for j in 0..basis.dim() {
            if basis.total(i) != basis.total(j) {
                assert_eq!(u[(i, j)].norm(), 0.0);
            }
        }
    }
}

#[test]
fn fock_one_zero_has_no_in_plane_mean() {
    let b = Arc::new(FockBasis::new(2, &[1]).unwrap());
    let f = frame_of(&QuantumState::fock(b, &[1, 0]).unwrap());
    for phi in [0.0, 0.5, 2.0] {
        assert!(predict_mean(&f, FRAC_PI_2, phi).abs() < 1e-15);
    }
}

#[test]
fn relative_phase_fringe_is_sinusoidal() {
    let n = 400;
    let st = relative_phase(n, 20.0).unwrap();
    let theta_p = 2.0 * PI * 20.0 / (n as f64 + 1.0);
    let f = frame_of(&st);
    let amp = predict_mean(&f, FRAC_PI_2, theta_p + FRAC_PI_2);
    assert!((amp - n as f64 * PI / 8.0).abs() / amp < 0.01);
    for k in 0..16 {
        let phi = k as f64 * PI / 8.0;
        let m = predict_mean(&f, FRAC_PI_2, phi);
        assert!((m - amp * (phi - theta_p).sin()).abs() <= 1e-9 * amp);
    }
    let v = predict_variance(&f, FRAC_PI_2, theta_p);
    let asym = 0.25 + (n as f64).ln() / 8.0;
    assert!((v - asym).abs() < 0.1 * asym, "{v} vs {asym}");
}

#[test]
fn tomography_recovers_frame() {
    let st = binomial(10, PI / 8.0, 0.0).unwrap();
    let f = frame_of(&st);
    let xy = tomography(&st, TomographyPlane::Xy).unwrap();
    assert!((xy.variances[0] - 1.25).abs() < 1e-9);
    assert!((xy.means[0] - f.x()).abs() < 1e-9 && (xy.means[1] - f.y()).abs() < 1e-9);
    assert!((xy.variances[1] - f.variance(1)).abs() < 1e-9);
    assert!((xy.covariance - f.cov[0][1]).abs() < 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let r = random_pure(Arc::new(FockBasis::truncated(2, 6).unwrap()), &mut rng).unwrap();
    let f = frame_of(&r);
    let xy = tomography(&r, TomographyPlane::Xy).unwrap();
    assert!((xy.variances[0] - f.variance(0)).abs() < 1e-9);
    assert!((xy.variances[1] - f.variance(1)).abs() < 1e-9);
    assert!((xy.covariance - f.cov[0][1]).abs() < 1e-9);
    let yz = tomography(&r, TomographyPlane::Yz).unwrap();
    assert!((yz.means[0] - f.y()).abs() < 1e-9 && (yz.means[1] - f.z()).abs() < 1e-9);
    assert!((yz.variances[1] - f.variance(2)).abs() < 1e-9);
    assert!((yz.covariance - f.cov[1][2]).abs() < 1e-9);
}

#[test]
fn second_moment_protocol() {
    let rp = relative_phase(100, 0.0).unwrap();
    let m = m2_protocol(&rp, 1e-9).unwrap();
    assert!(m.anticommutator.abs() < 1e-9, "{m:?}");
    assert!(m.second_order_correlated);

    let b = binomial(10, 0.3, 0.7).unwrap();
    let ops = SpinOperators::two_mode(b.basis().clone()).unwrap();
    let sx2 = bosewitness::fock::expectation_real(&ops.sx.mul(&ops.sx), &b).unwrap();
    let sy2 = bosewitness::fock::expectation_real(&ops.sy.mul(&ops.sy), &b).unwrap();
    let anti = bosewitness::fock::expectation_real(&ops.sx.anticommutator(&ops.sy), &b).unwrap();
    let m = m2_protocol(&b, 1e-9).unwrap();
    assert!((m.sx2 - sx2).abs() < 1e-9 && (m.sy2 - sy2).abs() < 1e-9 && (m.anticommutator - anti).abs() < 1e-9);

    let basis = FockBasis::two_mode(6);
    let f = QuantumState::fock(basis, &[3, 3]).unwrap();
    let m = m2_protocol(&f, 1e-9).unwrap();
    assert!((m.sx2 - m.sy2).abs() < 1e-12);
    assert!(!m.second_order_correlated);
}

#[test]
fn central_limit_coverage() {
    let st = binomial(10, PI / 8.0, 0.0).unwrap();
    let seq = [SequenceElement::Pulse(PulseSpec::new(FRAC_PI_2, 0.0).unwrap())];
    let seeds: Vec<u64> = (0..200).collect();
    let recs = sample_many(&st, &seq, 10_000, &seeds).unwrap();
    let inside = recs
        .iter()
        .filter(|r| (r.sample_mean - r.predicted_mean).abs() <= 5.0 * (r.predicted_variance / r.r as f64).sqrt())
        .count();
    assert!(inside as f64 >= 0.99 * recs.len() as f64, "{inside} of {}", recs.len());
    for r in &recs {
        for s in &r.samples {
            assert!((2.0 * s).fract() == 0.0 && s.abs() <= 5.0);
        }
    }
}

#[test]
fn ramsey_without_collisions() {
    let n = 12;
    let b = FockBasis::two_mode(n);
    let st = QuantumState::fock(b, &[n as u32, 0]).unwrap();
    for k in 0..8 {
        let phi2 = k as f64 * FRAC_PI_4;
        let r = ramsey(&st, 0.0, 0.0, phi2).unwrap();
        let two = evolve_sequence(
            &st,
            &[
                SequenceElement::Pulse(PulseSpec::new(FRAC_PI_2, 0.0).unwrap()),
                SequenceElement::Pulse(PulseSpec::new(FRAC_PI_2, phi2).unwrap()),
            ],
        )
        .unwrap();
        let direct: f64 = frame_of(&two).z();
        assert!((r.predicted_mean - direct).abs() < 1e-9);
        // Two π/2 pulses on all-in-a: the fringe is (N/2) cos φ₂ up to sign convention.
        assert!(
            (r.predicted_mean.abs() - 0.5 * n as f64 * phi2.cos().abs()).abs() < 1e-9,
            "{phi2}: {}",
            r.predicted_mean
        );
    }
}

#[test]
fn one_axis_twisting_squeezes() {
    let n = 20;
    let st = QuantumState::fock(FockBasis::two_mode(n), &[n as u32, 0]).unwrap();
    let none = ramsey(&st, 1.0, 0.0, 0.0).unwrap();
    assert!((none.intermediate.xi2 - 1.0).abs() < 1e-9 && !none.intermediate.squeezed);
    let best = (1..=200)
        .map(|k| ramsey(&st, 1.0, k as f64 * 0.0005, 0.0).unwrap().intermediate)
        .min_by(|a, b| a.xi2.partial_cmp(&b.xi2).unwrap())
        .unwrap();
    assert!(best.xi2 < 1.0 && best.squeezed, "{best:?}");
}

#[test]
fn separable_inputs_respect_in_plane_bound() {
    let cfg = SamplerConfig::default();
    for seed in 0..100 {
        let st = random_separable(Structure::TwoMode, &cfg, 90_000 + seed).unwrap();
        let f = frame_of(&st);
        for k in 0..24 {
            let phi = k as f64 * PI / 12.0;
            assert!(predict_variance(&f, FRAC_PI_2, phi) >= 0.5 * f.z().abs() - 1e-9);
        }
    }
}
