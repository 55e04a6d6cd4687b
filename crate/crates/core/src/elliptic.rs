//! The linear compatibility system and its symmetric positive reformulation.
//!
//! Unknowns are `ψ̃ = (𝝋₁′, 𝝋₂′, ψ)` with
//! `φ₁,₀ = ψ − Σ H₁^{2j} φ₁,ⱼ` and `φ₂,₀ = (ρ₁/ρ₂)ψ − Σ H₂^{p_j} φ₂,ⱼ + f₄/ρ₂`.
//! The operator `𝒫` acting on `ψ̃` satisfies
//! `⟨𝒫ψ̃, ψ̃⟩ = ρ₁⟨L₁𝝋₁,𝝋₁⟩ + ρ₂⟨L₂𝝋₂,𝝋₂⟩` and is solved by preconditioned CG.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{self, Field, PotentialVec};
use crate::lintheory::Layer;
use crate::operators::Geometry;
use crate::params::ModelParams;
use crate::spectral::{Grid1D, Spectral};
use crate::state::{CanonicalState, State};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative preconditioned residual at which CG stops.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { cg_tol: crate::config::default_cg_tol(), cg_max_iter: crate::config::default_cg_max_iter() }
    }
}

/// Right-hand side of
/// `ℒ_{1,i}𝝋₁ = f₁,ᵢ`, `ℒ_{2,i}𝝋₂ = f₂,ᵢ`, `ℒ_{1,0}𝝋₁ + ℒ_{2,0}𝝋₂ = ∂ₓ𝒇₃`,
/// `−ρ₁𝒍₁·𝝋₁ + ρ₂𝒍₂·𝝋₂ = f₄`.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipticRhs {
    pub f1p: Vec<Field>,
    pub f2p: Vec<Field>,
    /// flux whose derivative enters the third equation
    pub f3: Field,
    pub f4: Field,
}

impl EllipticRhs {
    pub fn zeros(m: usize, n_upper: usize, n_lower: usize) -> Self {
        EllipticRhs {
            f1p: vec![field::zeros(m); n_upper],
            f2p: vec![field::zeros(m); n_lower],
            f3: field::zeros(m),
            f4: field::zeros(m),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EllipticSolution {
    pub phi1: PotentialVec,
    pub phi2: PotentialVec,
    pub iterations: usize,
    /// final relative preconditioned residual
    pub residual: f64,
    /// the reduced unknown `(𝝋₁′, 𝝋₂′, ψ)`, usable as a warm start
    pub reduced: Vec<Field>,
}

/// Per-mode inverse of `𝒫` at flat geometry (`ζ = 0`, `b = 0`).
#[derive(Clone, Debug)]
pub struct Preconditioner {
    dim: usize,
    /// symmetric `dim × dim` blocks, one per FFT slot
    blocks: Vec<DMatrix<f64>>,
}

/// Symbol of `L_k` at constant depth `h` and wavenumber `kappa`.
fn flat_layer_symbol(exps: &[u32], h: f64, kappa: f64) -> DMatrix<f64> {
    let n = exps.len();
    DMatrix::from_fn(n, n, |i, j| {
        let (ei, ej) = (exps[i], exps[j]);
        let s = (ei + ej) as i32;
        let mut v = h.powi(s + 1) * kappa * kappa / (s + 1) as f64;
        if ei * ej != 0 {
            v += (ei * ej) as f64 / (s - 1) as f64 * h.powi(s - 1);
        }
        v
    })
}

/// Flat-geometry symbol of `𝒫` at wavenumber `kappa`.
pub fn flat_symbol(params: &ModelParams, kappa: f64) -> DMatrix<f64> {
    let e1 = params.upper_exponents();
    let e2 = &params.p_list;
    let (n, ns) = (e1.len() - 1, e2.len() - 1);
    let d = n + ns + 1;
    let mut m1 = DMatrix::zeros(n + 1, d);
    m1[(0, d - 1)] = 1.0;
    for j in 1..=n {
        m1[(0, j - 1)] = -params.h1.powi(e1[j] as i32);
        m1[(j, j - 1)] = 1.0;
    }
    let mut m2 = DMatrix::zeros(ns + 1, d);
    m2[(0, d - 1)] = params.rho1 / params.rho2;
    for j in 1..=ns {
        m2[(0, n + j - 1)] = -params.h2.powi(e2[j] as i32);
        m2[(j, n + j - 1)] = 1.0;
    }
    let s1 = flat_layer_symbol(&e1, params.h1, kappa);
    let s2 = flat_layer_symbol(e2, params.h2, kappa);
    m1.transpose() * s1 * &m1 * params.rho1 + m2.transpose() * s2 * &m2 * params.rho2
}

impl Preconditioner {
    pub fn new(params: &ModelParams, sp: &Spectral) -> Result<Self> {
        let d = params.n_upper + params.n_lower() + 1;
        let singular = || Error::InvalidParams("flat-geometry operator is singular".into());
        let blocks = (0..sp.len())
            .map(|idx| match sp.mode(idx) {
                None => Ok(DMatrix::zeros(d, d)),
                Some(0) => {
                    // constants in ψ span the kernel
                    let sym = flat_symbol(params, 0.0);
                    let mut out = DMatrix::zeros(d, d);
                    if d > 1 {
                        let sub = sym.view((0, 0), (d - 1, d - 1)).into_owned();
                        let inv = sub.cholesky().ok_or_else(singular)?.inverse();
                        out.view_mut((0, 0), (d - 1, d - 1)).copy_from(&inv);
                    }
                    Ok(out)
                }
                Some(k) => {
                    let sym = flat_symbol(params, sp.grid().wavenumber(k));
                    Ok(sym.cholesky().ok_or_else(singular)?.inverse())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Preconditioner { dim: d, blocks })
    }

    pub fn apply(&self, sp: &Spectral, r: &[Field]) -> Vec<Field> {
        let coeffs: Vec<Vec<Complex64>> = r.iter().map(|f| sp.forward(f)).collect();
        let m = sp.len();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); m]; self.dim];
        for idx in 0..m {
            let b = &self.blocks[idx];
            for i in 0..self.dim {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..self.dim {
                    acc += coeffs[j][idx] * b[(i, j)];
                }
                out[i][idx] = acc;
            }
        }
        out.into_iter().map(|c| sp.inverse(c)).collect()
    }
}

/// Parameters, discretization and solver settings shared by all solves.
#[derive(Clone, Debug)]
pub struct Model {
    pub params: ModelParams,
    pub sp: Spectral,
    pub options: SolverOptions,
    /// non-cavitation threshold
    pub h_min: f64,
    precond: Preconditioner,
}

impl Model {
    pub fn new(params: ModelParams, grid: Grid1D, options: SolverOptions, h_min: f64) -> Result<Self> {
        params.validate()?;
        if params.bottom.len() != grid.points {
            return Err(Error::InvalidParams(format!(
                "bottom has {} samples, grid has {}",
                params.bottom.len(),
                grid.points
            )));
        }
        if !(h_min.is_finite() && h_min > 0.0) {
            return Err(Error::InvalidParams(format!("h_min must be positive, got {h_min}")));
        }
        let sp = Spectral::new(grid);
        let precond = Preconditioner::new(&params, &sp)?;
        Ok(Model { params, sp, options, h_min, precond })
    }

    pub fn from_config(cfg: &crate::config::Config) -> Result<Self> {
        Model::new(cfg.model_params()?, cfg.grid()?, cfg.solver_options(), cfg.h_min_value())
    }

    pub fn m(&self) -> usize {
        self.sp.len()
    }

    /// Number of reduced unknowns, `N + N* + 1`.
    pub fn reduced_dim(&self) -> usize {
        self.params.n_upper + self.params.n_lower() + 1
    }

    /// Geometry at `ζ` after the non-cavitation check.
    pub fn geometry(&self, zeta: &[f64]) -> Result<Geometry<'_>> {
        Geometry::checked(&self.sp, &self.params, zeta, self.h_min)
    }

    /// Split `(𝝋₁′, 𝝋₂′, ψ)` into the two layer vectors, with `f₄/ρ₂` added to `φ₂,₀`.
    pub fn expand(&self, geo: &Geometry, v: &[Field], f4: Option<&[f64]>) -> (PotentialVec, PotentialVec) {
        let p = &self.params;
        let n = p.n_upper;
        let psi = &v[v.len() - 1];
        let mut phi1: PotentialVec = Vec::with_capacity(n + 1);
        let mut p0 = psi.clone();
        for j in 1..=n {
            let t = geo.mul_h_pow(Layer::Upper, 2 * j as u32, &v[j - 1]);
            field::axpy(&mut p0, -1.0, &t);
        }
        phi1.push(p0);
        phi1.extend(v[..n].iter().cloned());
        let ns = p.n_lower();
        let mut phi2: PotentialVec = Vec::with_capacity(ns + 1);
        let mut q0 = field::scale(p.rho1 / p.rho2, psi);
        for j in 1..=ns {
            let t = geo.mul_h_pow(Layer::Lower, p.p_list[j], &v[n + j - 1]);
            field::axpy(&mut q0, -1.0, &t);
        }
        if let Some(f4) = f4 {
            field::axpy(&mut q0, 1.0 / p.rho2, f4);
        }
        phi2.push(q0);
        phi2.extend(v[n..n + ns].iter().cloned());
        (phi1, phi2)
    }

    /// `𝒫(ζ, b)` applied to `(𝝋₁′, 𝝋₂′, ψ)`.
    pub fn apply_p(&self, geo: &Geometry, v: &[Field]) -> Vec<Field> {
        let (phi1, phi2) = self.expand(geo, v, None);
        self.rows(geo, &phi1, &phi2)
    }

    /// `diag(ρ₁, ρ₂, ρ₁)` times the compatibility rows.
    fn rows(&self, geo: &Geometry, phi1: &[Field], phi2: &[Field]) -> Vec<Field> {
        let p = &self.params;
        let c1 = geo.compat_layer(Layer::Upper, phi1);
        let c2 = geo.compat_layer(Layer::Lower, phi2);
        let mut out: Vec<Field> = Vec::with_capacity(self.reduced_dim());
        out.extend(c1[1..].iter().map(|f| field::scale(p.rho1, f)));
        out.extend(c2[1..].iter().map(|f| field::scale(p.rho2, f)));
        let mut last = field::add(&c1[0], &c2[0]);
        last.iter_mut().for_each(|x| *x *= p.rho1);
        out.push(last);
        out
    }

    /// Reduced right-hand side `diag(ρ₁,ρ₂,ρ₁)[(f₁′, f₂′, ∂ₓ𝒇₃) − A(0, (f₄/ρ₂)e₀)]`.
    pub fn reduced_rhs(&self, geo: &Geometry, rhs: &EllipticRhs) -> Vec<Field> {
        let p = &self.params;
        let m = self.m();
        let mut phi2 = vec![field::zeros(m); p.n_lower() + 1];
        phi2[0] = field::scale(1.0 / p.rho2, &rhs.f4);
        let phi1 = vec![field::zeros(m); p.n_upper + 1];
        let a = self.rows(geo, &phi1, &phi2);
        let mut b: Vec<Field> = Vec::with_capacity(self.reduced_dim());
        for (i, f) in rhs.f1p.iter().enumerate() {
            b.push(field::sub(&field::scale(p.rho1, f), &a[i]));
        }
        for (i, f) in rhs.f2p.iter().enumerate() {
            b.push(field::sub(&field::scale(p.rho2, f), &a[p.n_upper + i]));
        }
        let div = field::scale(p.rho1, &self.sp.derivative(&rhs.f3, 1));
        b.push(field::sub(&div, &a[self.reduced_dim() - 1]));
        b.into_iter().map(|f| self.sp.filter(&f)).collect()
    }

    fn check_rhs(&self, rhs: &EllipticRhs) -> Result<()> {
        let p = &self.params;
        if rhs.f1p.len() != p.n_upper || rhs.f2p.len() != p.n_lower() {
            return Err(Error::InvalidParams(format!(
                "right-hand side has {} + {} rows, expected {} + {}",
                rhs.f1p.len(),
                rhs.f2p.len(),
                p.n_upper,
                p.n_lower()
            )));
        }
        let all = rhs.f1p.iter().chain(&rhs.f2p).chain([&rhs.f3, &rhs.f4]);
        for f in all {
            if f.len() != self.m() || !field::is_finite(f) {
                return Err(Error::InvalidParams("right-hand side is not a finite field on the grid".into()));
            }
        }
        Ok(())
    }

    /// Solve the compatibility system at interface `ζ`.
    pub fn solve_compatibility(&self, zeta: &[f64], rhs: &EllipticRhs) -> Result<EllipticSolution> {
        let geo = self.geometry(zeta)?;
        self.solve_with_geometry(&geo, rhs, None)
    }

    pub fn solve_with_geometry(&self, geo: &Geometry, rhs: &EllipticRhs, guess: Option<&[Field]>) -> Result<EllipticSolution> {
        self.check_rhs(rhs)?;
        let b = self.reduced_rhs(geo, rhs);
        let (x, iterations, residual) = self.pcg(geo, &b, guess)?;
        let (mut phi1, mut phi2) = self.expand(geo, &x, Some(&rhs.f4));
        let p = &self.params;
        let gauge: Field = phi1[0].iter().zip(&phi2[0]).map(|(a, b)| p.rho1 * a + p.rho2 * b).collect();
        let c = -field::mean(&gauge) / (2.0 * p.rho1);
        phi1[0].iter_mut().for_each(|v| *v += c);
        phi2[0].iter_mut().for_each(|v| *v += p.rho1 / p.rho2 * c);
        let mut reduced = x;
        let last = reduced.len() - 1;
        reduced[last].iter_mut().for_each(|v| *v += c);
        Ok(EllipticSolution { phi1, phi2, iterations, residual, reduced })
    }

    /// Preconditioned conjugate gradients on `𝒫x = b`.
    pub fn pcg(&self, geo: &Geometry, b: &[Field], guess: Option<&[Field]>) -> Result<(Vec<Field>, usize, f64)> {
        self.pcg_traced(geo, b, guess, &mut |_| {})
    }

    /// [`Model::pcg`], calling `on_iterate` with every iterate.
    pub fn pcg_traced(
        &self,
        geo: &Geometry,
        b: &[Field],
        guess: Option<&[Field]>,
        on_iterate: &mut dyn FnMut(&[Field]),
    ) -> Result<(Vec<Field>, usize, f64)> {
        let d = self.reduced_dim();
        let m = self.m();
        let zb = self.precond.apply(&self.sp, b);
        let norm_b = field::vec_dot(b, &zb).max(0.0).sqrt();
        if norm_b == 0.0 {
            return Ok((vec![field::zeros(m); d], 0, 0.0));
        }
        let mut x: Vec<Field> = match guess {
            Some(g) if g.len() == d => g.to_vec(),
            _ => vec![field::zeros(m); d],
        };
        let mut r = if guess.is_some() { field::vec_sub(b, &self.apply_p(geo, &x)) } else { b.to_vec() };
        let mut z = self.precond.apply(&self.sp, &r);
        let mut rz = field::vec_dot(&r, &z);
        let mut res = rz.max(0.0).sqrt() / norm_b;
        if res <= self.options.cg_tol {
            return Ok((x, 0, res));
        }
        let mut pdir = z.clone();
        for it in 1..=self.options.cg_max_iter {
            let ap = self.apply_p(geo, &pdir);
            let pap = field::vec_dot(&pdir, &ap);
            if !(pap > 0.0) {
                return Err(Error::NoConvergence { iterations: it, residual: res });
            }
            let alpha = rz / pap;
            for (xi, pi) in x.iter_mut().zip(&pdir) {
                field::axpy(xi, alpha, pi);
            }
            for (ri, api) in r.iter_mut().zip(&ap) {
                field::axpy(ri, -alpha, api);
            }
            on_iterate(&x);
            z = self.precond.apply(&self.sp, &r);
            let rz_new = field::vec_dot(&r, &z);
            res = rz_new.max(0.0).sqrt() / norm_b;
            if !res.is_finite() {
                return Err(Error::NoConvergence { iterations: it, residual: res });
            }
            if res <= self.options.cg_tol {
                return Ok((x, it, res));
            }
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in pdir.iter_mut().zip(&z) {
                for (a, b) in pi.iter_mut().zip(zi) {
                    *a = b + beta * *a;
                }
            }
        }
        Err(Error::NoConvergence { iterations: self.options.cg_max_iter, residual: res })
    }

    /// Compatibility-consistent `(𝝓₁, 𝝓₂)` with canonical potential `φ`.
    pub fn prepare_initial_data(&self, canon: &CanonicalState) -> Result<State> {
        let geo = self.geometry(&canon.zeta)?;
        Ok(self.prepare_with_geometry(&geo, &canon.phi, None)?.0)
    }

    /// As [`Model::prepare_initial_data`], also returning the solver output.
    pub fn prepare_with_geometry(&self, geo: &Geometry, phi: &[f64], guess: Option<&[Field]>) -> Result<(State, EllipticSolution)> {
        let p = &self.params;
        let mut rhs = EllipticRhs::zeros(self.m(), p.n_upper, p.n_lower());
        rhs.f4 = phi.to_vec();
        let sol = self.solve_with_geometry(geo, &rhs, guess)?;
        let state = State { zeta: geo.zeta.clone(), phi1: sol.phi1.clone(), phi2: sol.phi2.clone() };
        Ok((state, sol))
    }

    /// Canonical potential `φ = ρ₂𝒍₂·𝝓₂ − ρ₁𝒍₁·𝝓₁`.
    pub fn canonical_phi(&self, geo: &Geometry, phi1: &[Field], phi2: &[Field]) -> Field {
        let a = geo.l_dot(Layer::Lower, phi2);
        let b = geo.l_dot(Layer::Upper, phi1);
        a.iter().zip(&b).map(|(x, y)| self.params.rho2 * x - self.params.rho1 * y).collect()
    }

    /// Residuals of the full system for a candidate solution, in the order
    /// `(f₁′, f₂′, ∂ₓ𝒇₃, f₄)`; sup norm of the difference.
    pub fn system_residual(&self, geo: &Geometry, rhs: &EllipticRhs, phi1: &[Field], phi2: &[Field]) -> f64 {
        let c = geo.apply_compat(phi1, phi2);
        let mut target: Vec<Field> = rhs.f1p.clone();
        target.extend(rhs.f2p.iter().cloned());
        target.push(self.sp.derivative(&rhs.f3, 1));
        let r1 = field::vec_max_abs(&field::vec_sub(&c, &target));
        let r2 = field::max_abs(&field::sub(&self.canonical_phi(geo, phi1, phi2), &rhs.f4));
        r1.max(r2)
    }
}
