//! Invariant suite run by `kakinuma selftest`. Each check uses the parameters
//! and grid of the given configuration where that makes sense and fixed
//! reference parameters otherwise.

use std::f64::consts::PI;

use crate::config::Config;
use crate::diagnostics::{energy, hamiltonian_value, variational_derivative_check, VariationalCheck};
use crate::elliptic::{EllipticRhs, Model, SolverOptions};
use crate::error::Result;
use crate::evolution::{compute_time_derivatives, step_canonical};
use crate::field::{self, Field};
use crate::lintheory::{alpha_constant, alpha_f64, convergence_order_scan, matrices_from_exponents, rat, Layer};
use crate::params::ModelParams;
use crate::spectral::Grid1D;
use crate::stability::{compute_a, frozen_roots, FrozenState};
use crate::state::{CanonicalState, State};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check { name, passed, detail }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Fractional parts of `k·φ` for the golden ratio; a deterministic spread in `[0, 1)`.
fn spread(k: usize, stride: f64) -> f64 {
    (k as f64 * stride).fract()
}

fn smooth_pair(grid: &Grid1D, amp: f64) -> (Field, Field) {
    let k1 = grid.wavenumber(1);
    let k2 = grid.wavenumber(2);
    let a = grid.sample(|x| amp * ((k1 * x + 0.3).cos() + 0.3 * (k2 * x).sin()));
    let b = grid.sample(|x| amp * ((k1 * x).sin() - 0.2 * (k2 * x + 1.0).cos()));
    (a, b)
}

/// Small smooth canonical data scaled to the configuration.
fn reference_data(cfg: &Config, grid: &Grid1D) -> CanonicalState {
    let h = cfg.h1.min(cfg.h2);
    let (z, p) = smooth_pair(grid, 1.0);
    let c = (cfg.g * h).sqrt() * cfg.length / (2.0 * PI);
    CanonicalState { zeta: field::scale(0.05 * h, &z), phi: field::scale(0.01 * c, &p) }
}

fn tight(cfg: &Config) -> Result<Model> {
    let opts = SolverOptions { cg_tol: cfg.cg_tol.min(1e-12), cg_max_iter: cfg.cg_max_iter.max(500) };
    Model::new(cfg.model_params()?, cfg.grid()?, opts, cfg.h_min_value())
}

fn alpha_check() -> Check {
    let a0 = alpha_constant(&matrices_from_exponents(Layer::Upper, &[0]));
    let a1 = alpha_constant(&matrices_from_exponents(Layer::Upper, &[0, 2]));
    let a2 = alpha_constant(&matrices_from_exponents(Layer::Lower, &[0, 1]));
    let ok = a0 == rat(1, 1) && a1 == rat(1, 6) && a2 == rat(1, 4);
    Check::new("alpha constants", ok, format!("{a0}, {a1}, {a2}"))
}

fn order_check() -> Result<Check> {
    let mut slopes = Vec::new();
    let mut ok = true;
    for (n, p, want, tol) in [(0, vec![0], 2.0, 0.2), (1, vec![0, 2], 6.0, 0.3), (1, vec![0, 1, 2], 6.0, 0.3)] {
        let params = ModelParams::flat(1.0, 2.0, 1.0, 3.0, 9.81, n, p, 8)?;
        let s = convergence_order_scan(&params, 1e-2, 1e-1, 10)?.slope;
        ok &= (s - want).abs() <= tol;
        slopes.push(format!("{s:.3}"));
    }
    Ok(Check::new("dispersion order", ok, slopes.join(", ")))
}

fn cramer_check(model: &Model, zeta: &[f64]) -> Result<Check> {
    let geo = model.geometry(zeta)?;
    let p = &model.params;
    let (a1, a2) = (alpha_f64(p, Layer::Upper), alpha_f64(p, Layer::Lower));
    let (t1, t2) = geo.thetas();
    let lv = geo.layer_vectors();
    let n1 = p.n_upper + 1;
    let mut worst = 0.0_f64;
    for x in 0..model.m() {
        let (h1, h2) = (geo.h1[x], geo.h2[x]);
        let inv = geo.block_inverse_at(x)?;
        let q0 = -h1 * h2 * a1 * a2 / (p.rho1 * h2 * a2 + p.rho2 * h1 * a1);
        let l1q1: f64 = (0..n1).map(|i| lv.l1[i][x] * inv[(1 + i, 0)]).sum();
        let l2q2: f64 = (0..p.p_list.len()).map(|i| lv.l2[i][x] * inv[(1 + n1 + i, 0)]).sum();
        worst = worst
            .max(((inv[(0, 0)] - q0) / q0).abs())
            .max(((l1q1 + t2[x] / p.rho1) * p.rho1).abs())
            .max(((l2q2 - t1[x] / p.rho2) * p.rho2).abs());
    }
    Ok(Check::new("block inverse identities", worst <= 1e-10, format!("max error {worst:.3e}")))
}

fn manufactured_check(model: &Model, zeta: &[f64]) -> Result<Check> {
    let geo = model.geometry(zeta)?;
    let grid = model.sp.grid().clone();
    let p = &model.params;
    let mk = |n: usize, shift: f64| -> Vec<Field> {
        (0..n)
            .map(|i| {
                let k = grid.wavenumber(i as i64 + 1);
                grid.sample(|x| (k * x + shift + i as f64).sin() + 0.1)
            })
            .collect()
    };
    let mut phi1 = mk(p.n_upper + 1, 0.0);
    let mut phi2 = mk(p.p_list.len(), 0.7);
    let g = field::mean(&phi1[0]) * p.rho1 + field::mean(&phi2[0]) * p.rho2;
    let c = -g / (2.0 * p.rho1 * p.rho2);
    phi1[0].iter_mut().for_each(|v| *v += c * p.rho2);
    phi2[0].iter_mut().for_each(|v| *v += c * p.rho1);
    let c1 = geo.compat_layer(Layer::Upper, &phi1);
    let c2 = geo.compat_layer(Layer::Lower, &phi2);
    let rhs = EllipticRhs {
        f1p: c1[1..].to_vec(),
        f2p: c2[1..].to_vec(),
        f3: model.sp.antiderivative_tol(&field::add(&c1[0], &c2[0]), 1e-10)?,
        f4: model.canonical_phi(&geo, &phi1, &phi2),
    };
    let sol = model.solve_with_geometry(&geo, &rhs, None)?;
    let err = field::vec_max_abs(&field::vec_sub(&sol.phi1, &phi1)).max(field::vec_max_abs(&field::vec_sub(&sol.phi2, &phi2)));
    Ok(Check::new(
        "elliptic manufactured solution",
        err <= 1e-8 && sol.iterations <= 200,
        format!("error {err:.3e}, {} iterations", sol.iterations),
    ))
}

fn energy_check(model: &Model, canon: &CanonicalState) -> Result<Check> {
    let geo = model.geometry(&canon.zeta)?;
    let st = model.prepare_initial_data(canon)?;
    let e = energy(&geo, &st);
    let h = hamiltonian_value(model, canon)?;
    let r = ((e - h) / h).abs();
    Ok(Check::new("energy equals hamiltonian", r <= 1e-10 && e > 0.0, format!("relative difference {r:.3e}")))
}

fn variational_check(model: &Model, canon: &CanonicalState) -> Result<Check> {
    let (dz, dp) = smooth_pair(model.sp.grid(), 1.0);
    let c = variational_derivative_check(model, canon, &dp, &dz, &[1e-3, 1e-4, 1e-5, 1e-6])?;
    let worst = VariationalCheck::best(&c.phi_errors)
        .max(VariationalCheck::best(&c.zeta_errors))
        .max(VariationalCheck::best(&c.energy_errors));
    Ok(Check::new("variational derivatives", worst < 1e-5, format!("worst best-step error {worst:.3e}")))
}

fn rest_check(model: &Model) -> Result<Check> {
    let p = &model.params;
    let rest = State::rest(model.m(), p.n_upper, p.n_lower());
    let geo = model.geometry(&rest.zeta)?;
    let td = compute_time_derivatives(model, &rest, 0.0)?;
    let a = compute_a(&geo, &rest, &td);
    let want = (p.rho2 - p.rho1) * p.grav;
    let ok = a.iter().all(|v| *v == want);
    Ok(Check::new("rest coefficient", ok, format!("a = {:.17e}", a[0])))
}

fn frozen_check(params: &ModelParams) -> Check {
    let (a1, a2) = (alpha_f64(params, Layer::Upper), alpha_f64(params, Layer::Lower));
    let mut mismatches = 0;
    for k in 0..200 {
        let h1 = params.h1 * (0.2 + 1.6 * spread(k, 0.618_033_988_749_895));
        let h2 = params.h2 * (0.2 + 1.6 * spread(k, 0.754_877_666_246_693));
        let v = 4.0 * (spread(k, 0.569_840_290_998_053) - 0.5);
        // a spread around the critical value so both outcomes occur
        let crit = params.rho1 * params.rho2 * v * v / (params.rho1 * h2 * a2 + params.rho2 * h1 * a1);
        let a = crit * (0.5 + spread(k, 0.412_454_033_640_107));
        let f = FrozenState { h1, h2, u1: 0.3, u2: 0.3 + v, a };
        let real = [0.1, 1.0, 10.0].iter().all(|&xi| frozen_roots(xi, &f, params).is_real());
        if real != (f.margin(params) >= 0.0) {
            mismatches += 1;
        }
    }
    Check::new("frozen roots dichotomy", mismatches == 0, format!("{mismatches} mismatches of 200"))
}

fn conservation_check(model: &Model, cfg: &Config, canon: &CanonicalState) -> Result<Check> {
    let sp = &model.sp;
    let m0 = sp.integrate(&canon.zeta);
    let h0 = hamiltonian_value(model, canon)?;
    let mut c = canon.clone();
    let dt = cfg.dt;
    for _ in 0..20 {
        c = step_canonical(model, &c, dt)?;
    }
    let dm = (sp.integrate(&c.zeta) - m0).abs();
    let dh = ((hamiltonian_value(model, &c)? - h0) / h0).abs();
    let amp = field::max_abs(&canon.zeta);
    Ok(Check::new(
        "short-run conservation",
        dm <= 1e-12 * cfg.length * amp.max(1e-300) && dh <= 1e-6,
        format!("mass drift {dm:.3e}, hamiltonian drift {dh:.3e} over 20 steps"),
    ))
}

/// Run every check. Errors from the numerics abort the suite.
pub fn run(cfg: &Config) -> Result<Vec<Check>> {
    let model = tight(cfg)?;
    let grid = cfg.grid()?;
    let canon = reference_data(cfg, &grid);
    Ok(vec![
        alpha_check(),
        order_check()?,
        cramer_check(&model, &canon.zeta)?,
        manufactured_check(&model, &canon.zeta)?,
        energy_check(&model, &canon)?,
        variational_check(&model, &canon)?,
        rest_check(&model)?,
        frozen_check(&model.params),
        conservation_check(&model, cfg, &canon)?,
    ])
}
