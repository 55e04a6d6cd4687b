mod common;

use common::*;
use kakinuma::diagnostics::{
    canonical_phi, energy, energy_density, energy_flux, hamiltonian_value, local_law, momentum_and_flux,
    variational_derivative_check, VariationalCheck,
};
use kakinuma::evolution::{step_canonical, Sample};
use kakinuma::field;
use kakinuma::{CanonicalState, Error, State};

fn operator_energy(s: &Setup, m: &kakinuma::elliptic::Model, st: &State) -> f64 {
    let geo = m.geometry(&st.zeta).unwrap();
    let p = &s.params;
    let l1 = geo.apply_l1(&st.phi1);
    let l2 = geo.apply_l2(&st.phi2);
    let q1: f64 = l1.iter().zip(&st.phi1).map(|(a, b)| s.sp.inner(a, b)).sum();
    let q2: f64 = l2.iter().zip(&st.phi2).map(|(a, b)| s.sp.inner(a, b)).sum();
    0.5 * p.rho1 * q1 + 0.5 * p.rho2 * q2 + 0.5 * (p.rho2 - p.rho1) * p.grav * s.sp.inner(&st.zeta, &st.zeta)
}

#[test]
fn rest_values() {
    let s = setup(32, 1, vec![0, 1], 0.1);
    let m = model(s.params.clone(), s.grid.clone(), 1e-12);
    let rest = State::rest(32, 1, 1);
    let geo = m.geometry(&rest.zeta).unwrap();
    assert_eq!(sup(&energy_density(&geo, &rest)), 0.0);
    assert_eq!(sup(&energy_flux(&geo, &rest, &rest.phi1, &rest.phi2)), 0.0);
    assert_eq!(sup(&canonical_phi(&geo, &rest)), 0.0);
    assert_eq!(hamiltonian_value(&m, &CanonicalState::rest(32)).unwrap(), 0.0);
    assert!(matches!(
        momentum_and_flux(&geo, &rest, &rest.zeta, &rest.phi1, &rest.phi2),
        Err(Error::FlatBottomRequired)
    ));
}

#[test]
fn flat_rest_momentum_is_zero() {
    let s = setup(32, 1, vec![0, 2], 0.0);
    let m = model(s.params.clone(), s.grid.clone(), 1e-12);
    let rest = State::rest(32, 1, 1);
    let geo = m.geometry(&rest.zeta).unwrap();
    let (mm, fm) = momentum_and_flux(&geo, &rest, &rest.zeta, &rest.phi1, &rest.phi2).unwrap();
    assert_eq!(sup(&mm) + sup(&fm), 0.0);
    // ζ = 0 gives m = 0 whatever the potentials are
    let mut st = rest.clone();
    let mut r = rng(70);
    st.phi1 = smooth_vec(&mut r, &s.grid, 2, 3, 0.5);
    st.phi2 = smooth_vec(&mut r, &s.grid, 2, 3, 0.5);
    let (mm, _) = momentum_and_flux(&geo, &st, &rest.zeta, &st.phi1, &st.phi2).unwrap();
    assert_eq!(sup(&mm), 0.0);
}

#[test]
fn single_surviving_term() {
    let s = setup(32, 1, vec![0, 1], 0.0);
    let m = model(s.params.clone(), s.grid.clone(), 1e-12);
    let mut st = State::rest(32, 1, 1);
    let k = s.grid.wavenumber(3);
    st.phi1[0] = s.grid.sample(|x| (k * x).sin());
    let geo = m.geometry(&st.zeta).unwrap();
    let e = energy_density(&geo, &st);
    let expect = s.grid.sample(|x| 0.5 * s.params.rho1 * s.params.h1 * (k * (k * x).cos()).powi(2));
    assert!(sup_diff(&e, &expect) < 1e-12);
    // zero rates give zero flux
    let z = State::rest(32, 1, 1);
    assert_eq!(sup(&energy_flux(&geo, &st, &z.phi1, &z.phi2)), 0.0);
}

#[test]
fn canonical_phi_of_constants() {
    let s = setup(32, 2, vec![0, 1, 3], 0.1);
    let m = model(s.params.clone(), s.grid.clone(), 1e-12);
    let mut r = rng(71);
    let mut st = State::rest(32, 2, 2);
    st.zeta = smooth(&mut r, &s.grid, 3, 0.1);
    st.phi1[0] = field::constant(32, 0.7);
    st.phi2[0] = field::constant(32, -0.3);
    let geo = m.geometry(&st.zeta).unwrap();
    let c = s.params.rho2 * -0.3 - s.params.rho1 * 0.7;
    assert!(sup_diff(&canonical_phi(&geo, &st), &field::constant(32, c)) < 1e-15);
}

#[test]
fn energy_density_matches_operator_form() {
    for (n, p, b, seed) in [(0, vec![0], 0.0, 1), (1, vec![0, 2], 0.1, 2), (2, vec![0, 1, 2], 0.15, 3)] {
        let s = setup(64, n, p, b);
        let m = model(s.params.clone(), s.grid.clone(), 1e-12);
        let mut r = rng(72 + seed);
        let nl = s.params.p_list.len();
        let st = State {
            zeta: smooth(&mut r, &s.grid, 3, 0.15),
            phi1: smooth_vec(&mut r, &s.grid, n + 1, 4, 0.5),
            phi2: smooth_vec(&mut r, &s.grid, nl, 4, 0.5),
        };
        let geo = m.geometry(&st.zeta).unwrap();
        let e = energy(&geo, &st);
        let o = operator_energy(&s, &m, &st);
        assert!(rel(e, o) < 1e-10, "N={n}: {e} vs {o}");
        assert!(e > 0.0);
    }
}

#[test]
fn energy_is_positive_away_from_rest() {
    let s = setup(32, 1, vec![0, 1, 2], 0.1);
    let m = model(s.params.clone(), s.grid.clone(), 1e-12);
    let mut r = rng(75);
    for _ in 0..20 {
        let st = State {
            zeta: smooth(&mut r, &s.grid, 3, 0.2),
            phi1: smooth_vec(&mut r, &s.grid, 2, 5, 1.0),
            phi2: smooth_vec(&mut r, &s.grid, 3, 5, 1.0),
        };
        let geo = m.geometry(&st.zeta).unwrap();
        assert!(energy(&geo, &st) > 0.0);
    }
}

#[test]
fn hamiltonian_properties() {
    let s = setup(64, 1, vec![0, 2], 0.1);
    let m = model(s.params.clone(), s.grid.clone(), 1e-13);
    let mut r = rng(76);
    let phi = smooth(&mut r, &s.grid, 3, 0.5);
    let flat = CanonicalState { zeta: field::zeros(64), phi: phi.clone() };
    let h = hamiltonian_value(&m, &flat).unwrap();
    let h3 = hamiltonian_value(&m, &CanonicalState { zeta: field::zeros(64), phi: field::scale(3.0, &phi) }).unwrap();
    assert!(rel(h3, 9.0 * h) < 1e-12, "{h3} {h}");
    let zeta = smooth(&mut r, &s.grid, 3, 0.1);
    let c = CanonicalState { zeta: zeta.clone(), phi: phi.clone() };
    let shifted = CanonicalState { zeta, phi: phi.iter().map(|v| v + 2.5).collect() };
    let (a, b) = (hamiltonian_value(&m, &c).unwrap(), hamiltonian_value(&m, &shifted).unwrap());
    assert!(rel(a, b) < 1e-12);
}

#[test]
fn prepared_round_trip_and_energy_equals_hamiltonian() {
    let s = setup(64, 1, vec![0, 1], 0.1);
    let tol = 1e-12;
    let m = model(s.params.clone(), s.grid.clone(), tol);
    let mut r = rng(77);
    let canon = CanonicalState { zeta: smooth(&mut r, &s.grid, 3, 0.1), phi: smooth(&mut r, &s.grid, 3, 0.5) };
    let st = m.prepare_initial_data(&canon).unwrap();
    let geo = m.geometry(&st.zeta).unwrap();
    let back = canonical_phi(&geo, &st);
    assert!(sup_diff(&back, &canon.phi) < 10.0 * tol * sup(&canon.phi).max(1.0));
    assert!(rel(energy(&geo, &st), hamiltonian_value(&m, &canon).unwrap()) < 1e-10);
}

#[test]
fn variational_derivatives() {
    let s = setup(64, 1, vec![0, 2], 0.1);
    let m = model(s.params.clone(), s.grid.clone(), 1e-14);
    let mut r = rng(78);
    let canon = CanonicalState { zeta: smooth(&mut r, &s.grid, 3, 0.1), phi: smooth(&mut r, &s.grid, 3, 0.5) };
    let dz = smooth(&mut r, &s.grid, 3, 1.0);
    let dp = smooth(&mut r, &s.grid, 3, 1.0);
    let steps = [1e-3, 1e-4, 1e-5, 1e-6];
    let c = variational_derivative_check(&m, &canon, &dz, &dp, &steps).unwrap();
    assert!(VariationalCheck::best(&c.phi_errors) < 1e-5, "{:?}", c.phi_errors);
    assert!(VariationalCheck::best(&c.zeta_errors) < 1e-5, "{:?}", c.zeta_errors);
    assert!(VariationalCheck::best(&c.energy_errors) < 1e-5, "{:?}", c.energy_errors);
}

#[test]
fn variational_check_at_rest_is_zero() {
    let s = setup(32, 1, vec![0, 1], 0.0);
    let m = model(s.params.clone(), s.grid.clone(), 1e-13);
    let mut r = rng(79);
    let dp = smooth(&mut r, &s.grid, 2, 1.0);
    let c = variational_derivative_check(&m, &CanonicalState::rest(32), &field::zeros(32), &dp, &[1e-3]).unwrap();
    // quadratic in φ: the centred difference at rest vanishes exactly
    assert_eq!(c.phi_errors, vec![0.0]);
}

fn local_residuals(m: &kakinuma::elliptic::Model, canon: &CanonicalState, dt: f64) -> (f64, f64) {
    let next = step_canonical(m, canon, dt).unwrap();
    let prev = step_canonical(m, canon, -dt).unwrap();
    let sample = |c: &CanonicalState, t: f64| {
        let st = m.prepare_initial_data(c).unwrap();
        Sample::new(m, t, st, 0.0).unwrap()
    };
    let law = local_law(m, &sample(&prev, -dt), &sample(canon, 0.0), &sample(&next, dt)).unwrap();
    (law.energy_residual, law.momentum_residual)
}

#[test]
fn local_laws_converge_at_second_order() {
    let s = setup(64, 1, vec![0, 2], 0.0);
    let m = model(s.params.clone(), s.grid.clone(), 1e-14);
    let mut r = rng(80);
    let canon = CanonicalState { zeta: smooth(&mut r, &s.grid, 2, 0.1), phi: smooth(&mut r, &s.grid, 2, 0.5) };
    let (e1, m1) = local_residuals(&m, &canon, 0.02);
    let (e2, m2) = local_residuals(&m, &canon, 0.01);
    assert!((e1 / e2 - 4.0).abs() < 0.5, "energy {e1} {e2}");
    assert!((m1 / m2 - 4.0).abs() < 0.5, "momentum {m1} {m2}");
}
