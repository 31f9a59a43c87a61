//! Pure invariants, each run as a proptest with a fixed case count. Shared by
//! the `properties` target and the acceptance summary.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use ioncrystal::coulomb;
use ioncrystal::crystal::{relax, seed_hexagonal, Pseudopotential};
use ioncrystal::gate::{fidelity, gate_maps, BeamModulation, GateProblem, ThermalOccupations};
use ioncrystal::micromotion::{
    driven_mathieu_residual, normal_coordinates, quadratic_expansion, solve_driven_mathieu,
};
use ioncrystal::modes::{static_coupling, stiffness_matrix, transverse_modes};
use ioncrystal::oracles::{floquet_exponent, fock_fidelity, fock_levels};
use ioncrystal::trap::{
    characteristic_exponent, mathieu_parameters, MathieuParams, TrapConfig, X, Y, Z,
};
use ioncrystal::units::UnitSystem;
use nalgebra::{Complex, DMatrix, DVector, Vector2};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

type C = Complex<f64>;
type Property = fn(u32) -> Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn complex(max: f64) -> impl Strategy<Value = C> {
    (0.0..max, 0.0..TAU).prop_map(|(r, t)| C::from_polar(r, t))
}

/// Reference trap with `n` ions and the secular frequencies scaled by the
/// voltages; relaxed in its pseudopotential.
fn small_crystal(n: usize, dc_scale: f64) -> (TrapConfig<f64>, Vec<Vector2<f64>>) {
    let units = UnitSystem::new();
    let mut trap = TrapConfig::reference();
    trap.n_ions = n;
    trap.dc_voltage *= dc_scale;
    let p = MathieuParams::from_config(&trap, &units).unwrap();
    let pot = Pseudopotential {
        omega_x: p.omega[X],
        omega_y: p.omega[Y],
        mass: trap.ion_mass,
        coulomb: units.coulomb,
    };
    let state = relax(&seed_hexagonal(n, 7.0).unwrap(), &pot).unwrap();
    (trap, state.positions)
}

/// Laplace: Σa = Σq = 0 for any electrode voltages and anisotropy.
pub fn laplace_sum_rules(cases: u32) -> Result<(), String> {
    let units = UnitSystem::<f64>::new();
    check(
        cases,
        (-20.0..20.0, 0.0..500.0, -0.99..0.99),
        |(u0, v0, g)| {
            let cfg = TrapConfig {
                dc_voltage: u0,
                rf_voltage: v0,
                anisotropy: g,
                ..TrapConfig::reference()
            };
            let c = mathieu_parameters(&cfg, &units).unwrap();
            let scale =
                c.a.iter()
                    .chain(&c.q)
                    .fold(1e-300, |m: f64, v| m.max(v.abs()));
            prop_assert!(c.a.iter().sum::<f64>().abs() <= 1e-14 * scale);
            prop_assert!(c.q.iter().sum::<f64>().abs() <= 1e-14 * scale);
            Ok(())
        },
    )
}

/// β(a, q) = β(a, −q).
pub fn exponent_symmetric_in_q(cases: u32) -> Result<(), String> {
    check(cases, (-0.2..0.6f64, 0.0..0.5f64), |(a, q)| {
        match (
            characteristic_exponent(a, q),
            characteristic_exponent(a, -q),
        ) {
            (Ok(b1), Ok(b2)) => prop_assert!((b1 - b2).abs() < 1e-12, "{b1} vs {b2}"),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "stability differs under q → −q"),
        }
        Ok(())
    })
}

/// Undamped monodromy preserves phase-space volume.
pub fn monodromy_is_unimodular(cases: u32) -> Result<(), String> {
    check(cases, (-0.3..0.8f64, -0.8..0.8f64), |(a, q)| {
        let det = floquet_exponent(a, q).determinant;
        prop_assert!((det - 1.0).abs() < 1e-9, "det = {det}");
        Ok(())
    })
}

/// The truncated cosine series solves the driven Mathieu equation.
pub fn recurrence_residuals(cases: u32) -> Result<(), String> {
    check(cases, (0.001..0.5f64, -0.3..0.3f64), |(a, q)| {
        let Ok(c) = solve_driven_mathieu(a, q) else {
            return Err(TestCaseError::reject("unstable or resonant"));
        };
        let r = driven_mathieu_residual(a, q, &c, 512);
        prop_assert!(r < 1e-10 * c[0].abs(), "residual {r:e} vs c0 {:e}", c[0]);
        Ok(())
    })
}

/// The normal-coordinate transform Q is orthogonal.
pub fn q_orthogonality(cases: u32) -> Result<(), String> {
    let units = UnitSystem::<f64>::new();
    check(cases, (2usize..10, 0.85..1.03f64), |(n, s)| {
        let (trap, r) = small_crystal(n, s);
        let exp = quadratic_expansion(&r, &trap, &units).unwrap();
        let q = normal_coordinates(&exp, &trap, &units).q_matrix;
        let dim = q.nrows();
        let err = (&q * q.transpose() - DMatrix::<f64>::identity(dim, dim)).amax();
        prop_assert!(err < 1e-10, "|QQᵀ − I| = {err:e}");
        let err = (q.transpose() * &q - DMatrix::<f64>::identity(dim, dim)).amax();
        prop_assert!(err < 1e-10, "|QᵀQ − I| = {err:e}");
        Ok(())
    })
}

/// Transverse modes are orthonormal and complete, and Σω² = tr K / m.
pub fn mode_basis_and_sum_rule(cases: u32) -> Result<(), String> {
    let units = UnitSystem::<f64>::new();
    check(cases, (2usize..12, 0.85..1.03f64), |(n, s)| {
        let (trap, r) = small_crystal(n, s);
        let omega_z = MathieuParams::from_config(&trap, &units).unwrap().omega[Z];
        let w = static_coupling(&r).unwrap();
        let set = transverse_modes(&w, omega_z, trap.ion_mass, units.coulomb, false).unwrap();
        let b = &set.mode_matrix;
        let id = DMatrix::<f64>::identity(n, n);
        prop_assert!((b.transpose() * b - &id).amax() < 1e-10);
        prop_assert!((b * b.transpose() - &id).amax() < 1e-10);
        let k = stiffness_matrix(&w, omega_z, trap.ion_mass, units.coulomb);
        let lhs: f64 = set.frequencies.iter().map(|w| w * w).sum();
        let rhs = k.trace() / trap.ion_mass;
        prop_assert!((lhs - rhs).abs() < 1e-8 * rhs, "{lhs} vs {rhs}");
        Ok(())
    })
}

fn toy_problem(
    omega: Vec<f64>,
    g: [Vec<f64>; 2],
    disp: [Vector2<f64>; 2],
    segments: usize,
) -> GateProblem<f64> {
    let k = omega.len();
    GateProblem {
        omega: DVector::from_vec(omega),
        eta: DVector::from_element(k, 0.03),
        g: g.map(DVector::from_vec),
        modulation: disp.map(|d| BeamModulation::from_displacement(vec![d], 3.0)),
        occupations: ThermalOccupations::ground(k),
        rf_omega: 60.0,
        duration: 8.0,
        segments,
        phase_offset: 0.0,
    }
}

fn toy_strategy() -> impl Strategy<Value = (GateProblem<f64>, f64, Vec<f64>, f64)> {
    (1usize..4, 1usize..7).prop_flat_map(|(k, m)| {
        (
            prop::collection::vec(2.0..5.0f64, k),
            prop::collection::vec(-0.05..0.05f64, k),
            prop::collection::vec(-0.05..0.05f64, k),
            (-1.5..1.5f64, -1.5..1.5f64, -1.5..1.5f64, -1.5..1.5f64),
            1.5..5.5f64,
            prop::collection::vec(-3.0..3.0f64, m),
            -4.0..4.0f64,
        )
            .prop_map(move |(w, g1, g2, (x1, y1, x2, y2), mu, x, c)| {
                let disp = [Vector2::new(x1, y1), Vector2::new(x2, y2)];
                (toy_problem(w, [g1, g2], disp, m), mu, x, c)
            })
    })
}

/// α(c·x) = c·α(x) and φ₁₂(c·x) = c²·φ₁₂(x).
pub fn alpha_linear_phase_quadratic(cases: u32) -> Result<(), String> {
    check(cases, toy_strategy(), |(p, mu, x, c)| {
        let maps = gate_maps(&p, mu);
        let x = DVector::from_vec(x);
        let cx = &x * c;
        let (a, ac) = (maps.alpha_of(&x), maps.alpha_of(&cx));
        for j in 0..2 {
            for k in 0..a[j].len() {
                let d = (ac[j][k] - a[j][k] * c).norm();
                prop_assert!(d <= 1e-12 * (1.0 + (a[j][k] * c).norm()));
            }
        }
        let (ph, phc) = (maps.phase_of(&x), maps.phase_of(&cx));
        prop_assert!((phc - c * c * ph).abs() <= 1e-12 * (1.0 + (c * c * ph).abs()));
        Ok(())
    })
}

fn alpha_strategy(max: f64) -> impl Strategy<Value = Vec<[C; 2]>> {
    prop::collection::vec([complex(max), complex(max)], 1..4)
}

fn pack(alpha: &[[C; 2]]) -> [DVector<C>; 2] {
    [0, 1].map(|j| DVector::from_iterator(alpha.len(), alpha.iter().map(|a| a[j])))
}

/// 0 ≤ F ≤ 1, with F = 1 at α = 0, φ₁₂ = π/4.
pub fn fidelity_bounds(cases: u32) -> Result<(), String> {
    let strat = alpha_strategy(1.5).prop_flat_map(|a| {
        let k = a.len();
        (Just(a), -PI..PI, prop::collection::vec(0.0..5.0f64, k))
    });
    check(cases, strat, |(alpha, phi, nbar)| {
        let nbar = DVector::from_vec(nbar);
        let f = fidelity(&pack(&alpha), phi, &nbar);
        prop_assert!((-1e-15..=1.0 + 1e-15).contains(&f), "F = {f}");
        let zero = vec![[C::new(0.0, 0.0); 2]; alpha.len()];
        prop_assert!((fidelity(&pack(&zero), FRAC_PI_4, &nbar) - 1.0).abs() < 1e-15);
        Ok(())
    })
}

/// For fixed nonzero α, heating the modes never raises F. Holds near the
/// gate, where every branch overlap keeps a phase below π/2; far from it
/// (e.g. φ₁₂ = 0 with |α| ~ 1) heating can pull F up towards its ¼ floor.
pub fn temperature_monotonicity(cases: u32) -> Result<(), String> {
    let strat = alpha_strategy(0.3).prop_flat_map(|a| {
        let k = a.len();
        (
            Just(a),
            FRAC_PI_4 - 0.2..FRAC_PI_4 + 0.2,
            prop::collection::vec(1.0..20.0f64, k),
            0.1..30.0f64,
            1.0..3.0f64,
        )
    });
    check(cases, strat, |(alpha, phi, omega, t, ratio)| {
        prop_assume!(alpha.iter().any(|a| a[0].norm() + a[1].norm() > 1e-6));
        let omega = DVector::from_vec(omega);
        let cold = ThermalOccupations::new(&omega, t).nbar;
        let hot = ThermalOccupations::new(&omega, t * ratio).nbar;
        let (fc, fh) = (
            fidelity(&pack(&alpha), phi, &cold),
            fidelity(&pack(&alpha), phi, &hot),
        );
        prop_assert!(fh <= fc + 1e-15, "F(T) = {fc}, F({ratio}T) = {fh}");
        Ok(())
    })
}

fn fock_case() -> impl Strategy<Value = (Vec<[C; 2]>, f64, Vec<f64>)> {
    alpha_strategy(0.3).prop_flat_map(|a| {
        let k = a.len();
        (
            Just(a),
            0.0..FRAC_PI_4,
            prop::collection::vec(0.0..2.0f64, k),
        )
    })
}

fn fock(alpha: &[[C; 2]], phi: f64, nbar: &[f64]) -> f64 {
    let levels = alpha
        .iter()
        .zip(nbar)
        .map(|(a, &n)| fock_levels(n, a[0].norm() + a[1].norm()))
        .max()
        .unwrap();
    fock_fidelity(alpha, phi, nbar, levels).unwrap()
}

/// The closed form agrees with the truncated Fock sum.
pub fn fock_equivalence(cases: u32) -> Result<(), String> {
    check(cases, fock_case(), |(alpha, phi, nbar)| {
        let closed = fidelity(&pack(&alpha), phi, &DVector::from_vec(nbar.clone()));
        let f = fock(&alpha, phi, &nbar);
        prop_assert!((closed - f).abs() < 1e-6, "closed {closed}, Fock {f}");
        Ok(())
    })
}

/// Rotating both ions' α of every mode by a common phase leaves the Fock
/// fidelity unchanged.
pub fn fock_phase_invariance(cases: u32) -> Result<(), String> {
    check(
        cases,
        (fock_case(), 0.0..TAU),
        |((alpha, phi, nbar), theta)| {
            let rot = C::from_polar(1.0, theta);
            let turned: Vec<[C; 2]> = alpha.iter().map(|a| [a[0] * rot, a[1] * rot]).collect();
            let (f0, f1) = (fock(&alpha, phi, &nbar), fock(&turned, phi, &nbar));
            prop_assert!((f0 - f1).abs() < 1e-10, "{f0} vs {f1}");
            Ok(())
        },
    )
}

/// Coulomb forces are minus the energy gradient.
pub fn coulomb_forces_are_gradients(cases: u32) -> Result<(), String> {
    let strat = prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 2..8);
    check(cases, strat, |pts| {
        let r: Vec<Vector2<f64>> = pts.iter().map(|&(x, y)| Vector2::new(x, y)).collect();
        prop_assume!(coulomb::closest_pair(&r).is_some_and(|(_, _, d)| d > 1.0));
        let mut f = vec![Vector2::zeros(); r.len()];
        coulomb::forces(&r, 1.0, &mut f);
        let h = 1e-6;
        for i in 0..r.len() {
            for c in 0..2 {
                let (mut p, mut m) = (r.clone(), r.clone());
                p[i][c] += h;
                m[i][c] -= h;
                let g = (coulomb::energy(&p, 1.0) - coulomb::energy(&m, 1.0)) / (2.0 * h);
                prop_assert!((f[i][c] + g).abs() < 1e-6 * (1.0 + g.abs()));
            }
        }
        Ok(())
    })
}

/// Every property with its default case count.
#[allow(dead_code)]
pub fn all() -> Vec<(&'static str, Property, u32)> {
    vec![
        ("Laplace sum rules", laplace_sum_rules as Property, 256),
        ("β symmetric in q", exponent_symmetric_in_q, 256),
        ("monodromy determinant", monodromy_is_unimodular, 64),
        ("recurrence residuals", recurrence_residuals, 256),
        ("Q orthogonality", q_orthogonality, 32),
        (
            "mode orthonormality and sum rule",
            mode_basis_and_sum_rule,
            32,
        ),
        (
            "α linearity and φ quadraticity",
            alpha_linear_phase_quadratic,
            128,
        ),
        ("F in [0, 1]", fidelity_bounds, 1024),
        ("temperature monotonicity", temperature_monotonicity, 512),
        ("Fock equivalence", fock_equivalence, 128),
        ("Fock phase invariance", fock_phase_invariance, 64),
        ("Coulomb forces", coulomb_forces_are_gradients, 128),
    ]
}
