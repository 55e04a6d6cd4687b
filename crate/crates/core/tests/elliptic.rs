mod common;

use common::*;
use kakinuma::elliptic::{flat_symbol, EllipticRhs};
use kakinuma::field;
use kakinuma::{CanonicalState, Layer};

fn random_reduced(r: &mut rand_chacha::ChaCha8Rng, grid: &kakinuma::Grid1D, d: usize) -> Vec<kakinuma::Field> {
    smooth_vec(r, grid, d, 8, 1.0)
}

#[test]
fn p_operator_is_symmetric_and_positive() {
    let s = setup(64, 1, vec![0, 1, 2], 0.15);
    let m = model(s.params.clone(), s.grid.clone(), 1e-10);
    let mut r = rng(30);
    let zeta = smooth(&mut r, &s.grid, 4, 0.15);
    let geo = m.geometry(&zeta).unwrap();
    let d = m.reduced_dim();
    assert_eq!(d, 4);
    for _ in 0..5 {
        let u = random_reduced(&mut r, &s.grid, d);
        let v = random_reduced(&mut r, &s.grid, d);
        let pu = m.apply_p(&geo, &u);
        let pv = m.apply_p(&geo, &v);
        let a = field::vec_dot(&pu, &v);
        let b = field::vec_dot(&u, &pv);
        assert!(rel(a, b) < 1e-10, "{a} vs {b}");
    }
    let zero = m.apply_p(&geo, &vec![field::zeros(64); d]);
    assert_eq!(field::vec_max_abs(&zero), 0.0);
}

#[test]
fn p_operator_energy_identity_and_coercivity() {
    let s = setup(64, 1, vec![0, 2], 0.1);
    let m = model(s.params.clone(), s.grid.clone(), 1e-10);
    let mut r = rng(31);
    let zeta = smooth(&mut r, &s.grid, 3, 0.1);
    let geo = m.geometry(&zeta).unwrap();
    let p = &s.params;
    let mut ratios = Vec::new();
    for _ in 0..50 {
        let v = random_reduced(&mut r, &s.grid, m.reduced_dim());
        let pv = m.apply_p(&geo, &v);
        let form = s.sp.grid().spacing() * field::vec_dot(&pv, &v);
        let (phi1, phi2) = m.expand(&geo, &v, None);
        let q1: f64 = geo.apply_l1(&phi1).iter().zip(&phi1).map(|(a, b)| s.sp.inner(a, b)).sum();
        let q2: f64 = geo.apply_l2(&phi2).iter().zip(&phi2).map(|(a, b)| s.sp.inner(a, b)).sum();
        assert!(rel(form, p.rho1 * q1 + p.rho2 * q2) < 1e-10);
        // H¹ norms of the tails plus the gradient of ψ
        let mut norm = 0.0;
        for f in v[..2].iter() {
            norm += s.sp.inner(f, f) + s.sp.inner(&s.sp.derivative(f, 1), &s.sp.derivative(f, 1));
        }
        let g = s.sp.derivative(&v[2], 1);
        norm += s.sp.inner(&g, &g);
        ratios.push(form / norm);
    }
    let cmin = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(cmin > 0.0, "coercivity constant {cmin}");
}

#[test]
fn flat_symbol_is_positive_definite_away_from_zero() {
    let s = setup(16, 2, vec![0, 1, 2], 0.0);
    for k in [0.5, 1.0, 5.0, 30.0] {
        let a = flat_symbol(&s.params, k);
        assert!(a.clone().cholesky().is_some());
        assert!((&a - a.transpose()).abs().max() < 1e-12 * a.abs().max());
    }
}

#[test]
fn zero_rhs_gives_zero() {
    let s = setup(32, 1, vec![0, 1], 0.1);
    let m = model(s.params.clone(), s.grid.clone(), 1e-10);
    let rhs = EllipticRhs::zeros(32, 1, 1);
    let sol = m.solve_compatibility(&field::zeros(32), &rhs).unwrap();
    assert_eq!(field::vec_max_abs(&sol.phi1) + field::vec_max_abs(&sol.phi2), 0.0);
}

fn manufactured(m_pts: usize, seed: u64) -> (f64, usize) {
    let s = setup(m_pts, 1, vec![0, 2], 0.1);
    let model = model(s.params.clone(), s.grid.clone(), 1e-12);
    let mut r = rng(seed);
    let k1 = s.grid.wavenumber(1);
    let k2 = s.grid.wavenumber(2);
    let zeta = s.grid.sample(|x| 0.1 * s.params.h1 * (k1 * x + 0.3).cos() + 0.02 * (k2 * x).sin());
    let geo = model.geometry(&zeta).unwrap();
    let mut phi1 = smooth_vec(&mut r, &s.grid, 2, 6, 1.0);
    let mut phi2 = smooth_vec(&mut r, &s.grid, 2, 6, 1.0);
    // put the exact solution in the gauge
    let p = &s.params;
    let g: f64 = field::mean(&phi1[0]) * p.rho1 + field::mean(&phi2[0]) * p.rho2;
    let c = -g / (2.0 * p.rho1 * p.rho2);
    phi1[0].iter_mut().for_each(|v| *v += c * p.rho2);
    phi2[0].iter_mut().for_each(|v| *v += c * p.rho1);
    let c1 = geo.compat_layer(Layer::Upper, &phi1);
    let c2 = geo.compat_layer(Layer::Lower, &phi2);
    let div = field::add(&c1[0], &c2[0]);
    let rhs = EllipticRhs {
        f1p: c1[1..].to_vec(),
        f2p: c2[1..].to_vec(),
        f3: s.sp.antiderivative(&div).unwrap(),
        f4: model.canonical_phi(&geo, &phi1, &phi2),
    };
    let sol = model.solve_with_geometry(&geo, &rhs, None).unwrap();
    let err = vec_sup_diff(&sol.phi1, &phi1).max(vec_sup_diff(&sol.phi2, &phi2));
    (err, sol.iterations)
}

#[test]
fn manufactured_solution_is_recovered() {
    let (err, its) = manufactured(128, 32);
    assert!(err < 1e-8, "error {err}");
    assert!(its <= 200, "{its} iterations");
}

#[test]
fn prepared_data_satisfies_the_defining_system() {
    let s = setup(64, 1, vec![0, 1, 2], 0.1);
    let m = model(s.params.clone(), s.grid.clone(), 1e-11);
    let mut r = rng(33);
    let zeta = smooth(&mut r, &s.grid, 3, 0.1);
    let phi = smooth(&mut r, &s.grid, 5, 1.0);
    let st = m.prepare_initial_data(&CanonicalState { zeta: zeta.clone(), phi: phi.clone() }).unwrap();
    let geo = m.geometry(&zeta).unwrap();
    let mut rhs = EllipticRhs::zeros(64, 1, 2);
    rhs.f4 = phi.clone();
    let res = m.system_residual(&geo, &rhs, &st.phi1, &st.phi2);
    assert!(res < 1e-9, "residual {res}");
    let p = &s.params;
    let gauge = field::mean(&field::add(&field::scale(p.rho1, &st.phi1[0]), &field::scale(p.rho2, &st.phi2[0])));
    assert!(gauge.abs() < 1e-12);
}

#[test]
fn constant_potential_at_rest() {
    let s = setup(32, 1, vec![0, 2], 0.0);
    let m = model(s.params.clone(), s.grid.clone(), 1e-12);
    let c = 0.8;
    let st = m.prepare_initial_data(&CanonicalState { zeta: field::zeros(32), phi: field::constant(32, c) }).unwrap();
    for f in st.phi1.iter().chain(&st.phi2) {
        assert!(sup(&s.sp.derivative(f, 1)) < 1e-12);
    }
    assert!(sup(&st.phi1[1]) < 1e-12 && sup(&st.phi2[1]) < 1e-12);
    let p = &s.params;
    let comb = field::sub(&field::scale(p.rho2, &st.phi2[0]), &field::scale(p.rho1, &st.phi1[0]));
    assert!(sup_diff(&comb, &field::constant(32, c)) < 1e-12);
}

#[test]
fn single_mode_at_rest_stays_single_mode() {
    let s = setup(32, 1, vec![0, 2], 0.0);
    let m = model(s.params.clone(), s.grid.clone(), 1e-12);
    let k = s.grid.wavenumber(3);
    let phi = s.grid.sample(|x| 0.5 * (k * x).sin());
    let st = m.prepare_initial_data(&CanonicalState { zeta: field::zeros(32), phi }).unwrap();
    for f in st.phi1.iter().chain(&st.phi2) {
        let c = s.sp.forward(f);
        let off: f64 = c.iter().enumerate().filter(|(i, _)| *i != 3 && *i != 29).map(|(_, z)| z.norm()).sum();
        assert!(off < 1e-11, "off-mode content {off}");
    }
}

#[test]
fn preparation_is_linear_in_phi() {
    let s = setup(64, 1, vec![0, 1], 0.1);
    let m = model(s.params.clone(), s.grid.clone(), 1e-13);
    let mut r = rng(34);
    let zeta = smooth(&mut r, &s.grid, 3, 0.1);
    let a = smooth(&mut r, &s.grid, 5, 1.0);
    let b = smooth(&mut r, &s.grid, 5, 1.0);
    let prep = |phi: &[f64]| m.prepare_initial_data(&CanonicalState { zeta: zeta.clone(), phi: phi.to_vec() }).unwrap();
    let sa = prep(&a);
    let sb = prep(&b);
    let sab = prep(&field::add(&field::scale(2.0, &a), &field::scale(-3.0, &b)));
    for k in 0..2 {
        let comb = field::add(&field::scale(2.0, &sa.phi1[k]), &field::scale(-3.0, &sb.phi1[k]));
        assert!(sup_diff(&comb, &sab.phi1[k]) < 1e-10);
        let comb = field::add(&field::scale(2.0, &sa.phi2[k]), &field::scale(-3.0, &sb.phi2[k]));
        assert!(sup_diff(&comb, &sab.phi2[k]) < 1e-10);
    }
}

#[test]
fn gauge_shift_leaves_residuals_unchanged() {
    let s = setup(64, 1, vec![0, 2], 0.1);
    let m = model(s.params.clone(), s.grid.clone(), 1e-12);
    let mut r = rng(35);
    let zeta = smooth(&mut r, &s.grid, 3, 0.1);
    let phi = smooth(&mut r, &s.grid, 5, 1.0);
    let st = m.prepare_initial_data(&CanonicalState { zeta: zeta.clone(), phi: phi.clone() }).unwrap();
    let geo = m.geometry(&zeta).unwrap();
    let p = &s.params;
    let mut sh = st.clone();
    sh.phi1[0].iter_mut().for_each(|v| *v += 0.37 * p.rho2);
    sh.phi2[0].iter_mut().for_each(|v| *v += 0.37 * p.rho1);
    let mut rhs = EllipticRhs::zeros(64, 1, 1);
    rhs.f4 = phi;
    let a = m.system_residual(&geo, &rhs, &st.phi1, &st.phi2);
    let b = m.system_residual(&geo, &rhs, &sh.phi1, &sh.phi2);
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn solution_norm_is_stable_across_geometries() {
    let s = setup(64, 1, vec![0, 2], 0.1);
    let m = model(s.params.clone(), s.grid.clone(), 1e-10);
    let mut r = rng(36);
    let mut ratios = Vec::new();
    for _ in 0..10 {
        let zeta = smooth(&mut r, &s.grid, 3, 0.15);
        let geo = m.geometry(&zeta).unwrap();
        let rhs = EllipticRhs {
            f1p: smooth_vec(&mut r, &s.grid, 1, 4, 1.0),
            f2p: smooth_vec(&mut r, &s.grid, 1, 4, 1.0),
            f3: smooth(&mut r, &s.grid, 4, 1.0),
            f4: smooth(&mut r, &s.grid, 4, 1.0),
        };
        let sol = m.solve_with_geometry(&geo, &rhs, None).unwrap();
        assert!(sol.residual <= 1e-10);
        let out = sol.phi1[1..].iter().chain(&sol.phi2[1..]).map(|f| sup(f)).fold(0.0, f64::max);
        let inn = sup(&rhs.f1p[0]).max(sup(&rhs.f2p[0])).max(sup(&rhs.f3)).max(sup(&rhs.f4));
        ratios.push(out / inn);
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(max / min < 100.0, "{ratios:?}");
}

#[test]
fn energy_pairing_of_the_layer_operators() {
    // ρ₁⟨L₁𝝋₁,𝝋₁⟩ + ρ₂⟨L₂𝝋₂,𝝋₂⟩ = ρ₁Σ⟨f₁ᵢ,φ₁ᵢ⟩ + ρ₂Σ⟨f₂ᵢ,φ₂ᵢ⟩ − ⟨𝒇₃, ∂ₓ(ρ₁𝒍₁·𝝋₁)⟩ + ⟨(ℒ₂,₀𝝋₂), f₄⟩
    let s = setup(64, 1, vec![0, 2], 0.1);
    let m = model(s.params.clone(), s.grid.clone(), 1e-13);
    let mut r = rng(37);
    let zeta = smooth(&mut r, &s.grid, 3, 0.1);
    let geo = m.geometry(&zeta).unwrap();
    let rhs = EllipticRhs {
        f1p: smooth_vec(&mut r, &s.grid, 1, 4, 1.0),
        f2p: smooth_vec(&mut r, &s.grid, 1, 4, 1.0),
        f3: smooth(&mut r, &s.grid, 4, 1.0),
        f4: smooth(&mut r, &s.grid, 4, 1.0),
    };
    let sol = m.solve_with_geometry(&geo, &rhs, None).unwrap();
    let p = &s.params;
    let sp = &s.sp;
    let q1: f64 = geo.apply_l1(&sol.phi1).iter().zip(&sol.phi1).map(|(a, b)| sp.inner(a, b)).sum();
    let q2: f64 = geo.apply_l2(&sol.phi2).iter().zip(&sol.phi2).map(|(a, b)| sp.inner(a, b)).sum();
    let lhs = p.rho1 * q1 + p.rho2 * q2;
    let c2 = geo.compat_layer(Layer::Lower, &sol.phi2);
    let l1 = geo.l_dot(Layer::Upper, &sol.phi1);
    let rhs_val = p.rho1 * sp.inner(&rhs.f1p[0], &sol.phi1[1]) + p.rho2 * sp.inner(&rhs.f2p[0], &sol.phi2[1])
        - p.rho1 * sp.inner(&rhs.f3, &sp.derivative(&l1, 1))
        + sp.inner(&c2[0], &rhs.f4);
    assert!(rel(lhs, rhs_val) < 1e-8, "{lhs} vs {rhs_val}");
}

#[test]
fn noncavitating_geometry_is_rejected() {
    let s = setup(16, 0, vec![0], 0.0);
    let m = model(s.params.clone(), s.grid.clone(), 1e-10);
    let rhs = EllipticRhs::zeros(16, 0, 0);
    let err = m.solve_compatibility(&field::constant(16, 2.0), &rhs).unwrap_err();
    assert!(matches!(err, kakinuma::Error::NonCavitation { .. }));
}

#[test]
fn cg_error_decreases_in_the_energy_norm() {
    let s = setup(64, 1, vec![0, 2], 0.15);
    let m = model(s.params.clone(), s.grid.clone(), 1e-13);
    let mut r = rng(38);
    let zeta = smooth(&mut r, &s.grid, 3, 0.15);
    let geo = m.geometry(&zeta).unwrap();
    let mut rhs = EllipticRhs::zeros(64, 1, 1);
    rhs.f4 = smooth(&mut r, &s.grid, 6, 1.0);
    rhs.f3 = smooth(&mut r, &s.grid, 6, 1.0);
    let b = m.reduced_rhs(&geo, &rhs);
    let mut iterates = Vec::new();
    let (x, its, _) = m.pcg_traced(&geo, &b, None, &mut |x| iterates.push(x.to_vec())).unwrap();
    assert!(its > 3);
    let norms: Vec<f64> = iterates
        .iter()
        .map(|xk| {
            let e = field::vec_sub(&x, xk);
            field::vec_dot(&m.apply_p(&geo, &e), &e)
        })
        .collect();
    let scale = norms[0];
    for w in norms.windows(2) {
        assert!(w[1] <= w[0] + 1e-12 * scale, "{} > {}", w[1], w[0]);
    }
}
