#![allow(dead_code)]

use kakinuma::elliptic::{Model, SolverOptions};
use kakinuma::{field, Field, Grid1D, ModelParams, Spectral};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random trigonometric polynomial with modes `1..=kmax`, amplitudes decaying
/// like `1/k²`, scaled to `amp`.
pub fn smooth(rng: &mut ChaCha8Rng, grid: &Grid1D, kmax: i64, amp: f64) -> Field {
    let coefs: Vec<(f64, f64, f64)> = (1..=kmax)
        .map(|k| {
            let w = amp / (k * k) as f64;
            (grid.wavenumber(k), w * rng.random_range(-1.0..1.0), w * rng.random_range(-1.0..1.0))
        })
        .collect();
    grid.sample(|x| coefs.iter().map(|(k, a, b)| a * (k * x).cos() + b * (k * x).sin()).sum())
}

pub fn smooth_vec(rng: &mut ChaCha8Rng, grid: &Grid1D, n: usize, kmax: i64, amp: f64) -> Vec<Field> {
    (0..n).map(|_| smooth(rng, grid, kmax, amp)).collect()
}

pub fn cosine_bottom(grid: &Grid1D, amp: f64, mode: i64) -> Field {
    let k = grid.wavenumber(mode);
    grid.sample(|x| amp * (k * x).cos())
}

pub struct Setup {
    pub grid: Grid1D,
    pub sp: Spectral,
    pub params: ModelParams,
}

pub fn setup(m: usize, n: usize, p_list: Vec<u32>, bottom_amp: f64) -> Setup {
    let grid = Grid1D::new(2.0 * std::f64::consts::PI, m).unwrap();
    let sp = Spectral::new(grid.clone());
    let bottom = cosine_bottom(&grid, bottom_amp, 1);
    let params = ModelParams::new(1.0, 2.0, 1.0, 1.5, 9.81, n, p_list, bottom).unwrap();
    Setup { grid, sp, params }
}

pub fn model(params: ModelParams, grid: Grid1D, tol: f64) -> Model {
    let h = 0.01 * params.h1.min(params.h2);
    Model::new(params, grid, SolverOptions { cg_tol: tol, cg_max_iter: 500 }, h).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn sup(f: &[f64]) -> f64 {
    f.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn vec_sup_diff(a: &[Field], b: &[Field]) -> f64 {
    a.iter().zip(b).map(|(x, y)| sup_diff(x, y)).fold(0.0, f64::max)
}

/// Independent nonlinear shallow-water rates for one term per layer.
pub fn shallow_water(s: &Setup, st: &kakinuma::State) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let sp = &s.sp;
    let p = &s.params;
    let h1: Vec<f64> = st.zeta.iter().map(|z| p.h1 - z).collect();
    let h2: Vec<f64> = st.zeta.iter().zip(&p.bottom).map(|(z, b)| p.h2 + z - b).collect();
    let u1 = sp.derivative(&st.phi1[0], 1);
    let u2 = sp.derivative(&st.phi2[0], 1);
    let dz = sp.derivative(&h1.iter().zip(&u1).map(|(a, b)| a * b).collect::<Vec<_>>(), 1);
    let b1: Vec<f64> = (0..h1.len()).map(|x| 0.5 * u1[x] * u1[x] + p.grav * st.zeta[x]).collect();
    let b2: Vec<f64> = (0..h1.len()).map(|x| 0.5 * u2[x] * u2[x] + p.grav * st.zeta[x]).collect();
    let (b1x, b2x) = (sp.derivative(&b1, 1), sp.derivative(&b2, 1));
    // (H₁/ρ₁ + H₂/ρ₂) P_x = ζ_t v − H₁B₁ₓ − H₂B₂ₓ + C with ∫P_x = 0
    let kk: Vec<f64> = (0..h1.len()).map(|x| h1[x] / p.rho1 + h2[x] / p.rho2).collect();
    let r0: Vec<f64> = (0..h1.len()).map(|x| dz[x] * (u2[x] - u1[x]) - h1[x] * b1x[x] - h2[x] * b2x[x]).collect();
    let c = -field::mean(&r0.iter().zip(&kk).map(|(a, b)| a / b).collect::<Vec<_>>())
        / field::mean(&kk.iter().map(|k| 1.0 / k).collect::<Vec<_>>());
    let px: Vec<f64> = (0..h1.len()).map(|x| (r0[x] + c) / kk[x]).collect();
    let dphi1x: Vec<f64> = (0..h1.len()).map(|x| -b1x[x] - px[x] / p.rho1).collect();
    let dphi2x: Vec<f64> = (0..h1.len()).map(|x| -b2x[x] - px[x] / p.rho2).collect();
    (dz, dphi1x, dphi2x)
}
