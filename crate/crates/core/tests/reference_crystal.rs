//! Structural checks on the 127-ion reference crystal that are not part of
//! the acceptance summary.

mod common;

use common::reference;
use ioncrystal::gate::{
    gate_maps, gate_maps_quadrature, PairSelector, QUADRATURE_SAMPLES_PER_PERIOD,
};
use ioncrystal::micromotion::self_consistent_positions;

#[test]
fn self_consistent_positions_are_a_fixed_point() {
    let r = reference();
    let again =
        self_consistent_positions(r.series.r0(), &r.trap, &r.units, &Default::default()).unwrap();
    assert_eq!(again.iterations, 1);
    assert!(again.last_shift < 1e-4, "{}", again.last_shift);
}

#[test]
fn first_harmonic_is_a_breathing_motion() {
    let r = reference();
    let (r0, r1) = (r.series.r0(), r.series.r1());
    let mut checked = 0;
    for (p, d) in r0.iter().zip(&r1) {
        if p.norm() > 5.0 {
            let cos = (p.dot(d) / (p.norm() * d.norm())).abs().min(1.0);
            assert!(cos.acos().to_degrees() < 1.0);
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn analytic_and_quadrature_maps_agree_on_reference_pairs() {
    let r = reference();
    let wz = r.omega_z();
    for pair in [PairSelector::Center, PairSelector::Edge] {
        let (problem, _) = r.gate_problems(pair);
        for f in [0.86, 0.93, 1.005] {
            let a = gate_maps(&problem, f * wz);
            let b = gate_maps_quadrature(&problem, f * wz, QUADRATURE_SAMPLES_PER_PERIOD);
            for j in 0..2 {
                let scale = a.alpha[j].iter().map(|z| z.norm()).fold(0.0, f64::max);
                let diff = (&a.alpha[j] - &b.alpha[j])
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                assert!(
                    diff <= 1e-8 * scale,
                    "{pair:?} μ = {f} ω_z: α_{j} rel {:e}",
                    diff / scale
                );
            }
            let diff = (&a.phase - &b.phase).amax();
            assert!(
                diff <= 1e-8 * a.phase.amax(),
                "{pair:?} μ = {f} ω_z: φ rel {:e}",
                diff / a.phase.amax()
            );
        }
    }
}
