//! Discrete layer operators `L_{k,ij}`, compatibility operators `ℒ_{k,i}`,
//! interface velocities, the `f_{k,i}` coefficients and pointwise bordered
//! block inverses.
//!
//! Both layers are handled by one routine keyed on the basis exponents
//! (`2i` above, `p_i` below). Coefficient fields such as `H^e` or `H^e b_x`
//! are formed pointwise on the grid, stripped of the Nyquist mode and padded
//! once per geometry; every product with an unknown goes through the 3/2 grid.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{self, Field, PotentialVec};
use crate::lintheory::{alpha_f64, Layer};
use crate::params::ModelParams;
use crate::spectral::Spectral;

type Padded = Vec<f64>;

/// Coefficient fields of one layer at a fixed geometry.
#[derive(Clone, Debug)]
struct LayerCoefs {
    exps: Vec<u32>,
    /// `H^e`, grid values, `e = 0..=2 max(exps) + 1`
    pow: Vec<Field>,
    /// padded `H^e`
    pad: Vec<Padded>,
    /// padded `H^e b_x`, `H^e b_xx`, `H^e (1 + b_x²)`; empty for a flat bottom
    pad_bx: Vec<Padded>,
    pad_bxx: Vec<Padded>,
    pad_bb: Vec<Padded>,
}

impl LayerCoefs {
    fn new(sp: &Spectral, exps: Vec<u32>, h: &[f64], bx: Option<(&Field, &Field)>) -> Self {
        let emax = 2 * *exps.last().unwrap() as usize + 1;
        let mut pow = Vec::with_capacity(emax + 1);
        let mut cur = field::constant(h.len(), 1.0);
        for _ in 0..=emax {
            pow.push(cur.clone());
            cur = field::pointwise(&cur, h);
        }
        let pow: Vec<Field> = pow.into_iter().map(|p| sp.filter(&p)).collect();
        let pad: Vec<Padded> = pow.iter().map(|p| sp.pad(p)).collect();
        let (mut pad_bx, mut pad_bxx, mut pad_bb) = (Vec::new(), Vec::new(), Vec::new());
        if let Some((bx, bxx)) = bx {
            // raw powers, then one filter per product coefficient
            let mut raw = field::constant(h.len(), 1.0);
            for _ in 0..=emax {
                let c_bx: Field = raw.iter().zip(bx).map(|(p, b)| p * b).collect();
                let c_bxx: Field = raw.iter().zip(bxx).map(|(p, b)| p * b).collect();
                let c_bb: Field = raw.iter().zip(bx).map(|(p, b)| p * (1.0 + b * b)).collect();
                pad_bx.push(sp.pad(&sp.filter(&c_bx)));
                pad_bxx.push(sp.pad(&sp.filter(&c_bxx)));
                pad_bb.push(sp.pad(&sp.filter(&c_bb)));
                raw = field::pointwise(&raw, h);
            }
        }
        LayerCoefs { exps, pow, pad, pad_bx, pad_bxx, pad_bb }
    }

    fn has_bottom(&self) -> bool {
        !self.pad_bx.is_empty()
    }

    /// Padded coefficient of the zeroth-order term `H^e (1 + b_x²)`.
    fn mass_coef(&self, e: usize) -> &Padded {
        if self.has_bottom() {
            &self.pad_bb[e]
        } else {
            &self.pad[e]
        }
    }
}

/// `acc += s · a ⊙ b`
fn fma(acc: &mut [f64], s: f64, a: &[f64], b: &[f64]) {
    for ((y, x), z) in acc.iter_mut().zip(a).zip(b) {
        *y += s * x * z;
    }
}

/// `p/q` with the convention `0/0 = 0`.
fn frac(p: u32, q: i64) -> f64 {
    if p == 0 {
        0.0
    } else {
        p as f64 / q as f64
    }
}

/// Geometry-dependent data shared by all operators at one interface shape.
#[derive(Clone, Debug)]
pub struct Geometry<'a> {
    pub sp: &'a Spectral,
    pub params: &'a ModelParams,
    pub zeta: Field,
    /// `H₁ = h₁ − ζ`
    pub h1: Field,
    /// `H₂ = h₂ + ζ − b`
    pub h2: Field,
    /// `b_x`
    pub bx: Field,
    upper: LayerCoefs,
    lower: LayerCoefs,
}

/// Interface velocities `u_k = ∂ₓΦ_k`, `w_k = ∂_zΦ_k` at `z = ζ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Velocities {
    pub u1: Field,
    pub u2: Field,
    pub w1: Field,
    pub w2: Field,
}

/// `𝒍_k(H_k)` and `∂_H 𝒍_k(H_k)` as fields.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerVectors {
    pub l1: PotentialVec,
    pub l2: PotentialVec,
    pub dl1: PotentialVec,
    pub dl2: PotentialVec,
}

/// First column of the inverse bordered block matrix, pointwise.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockInverse {
    pub q0: Field,
    pub q1: PotentialVec,
    pub q2: PotentialVec,
}

impl<'a> Geometry<'a> {
    /// Build without the non-cavitation check (callers that need it use
    /// [`Geometry::checked`]).
    pub fn new(sp: &'a Spectral, params: &'a ModelParams, zeta: &[f64]) -> Self {
        let m = sp.len();
        assert_eq!(zeta.len(), m, "zeta length does not match grid");
        assert_eq!(params.bottom.len(), m, "bottom length does not match grid");
        let h1: Field = zeta.iter().map(|z| params.h1 - z).collect();
        let h2: Field = zeta.iter().zip(&params.bottom).map(|(z, b)| params.h2 + z - b).collect();
        let flat = params.is_flat();
        let bx = if flat { field::zeros(m) } else { sp.derivative(&params.bottom, 1) };
        let bxx = if flat { field::zeros(m) } else { sp.derivative(&params.bottom, 2) };
        let upper = LayerCoefs::new(sp, params.upper_exponents(), &h1, None);
        let lower = LayerCoefs::new(sp, params.p_list.clone(), &h2, if flat { None } else { Some((&bx, &bxx)) });
        Geometry { sp, params, zeta: zeta.to_vec(), h1, h2, bx, upper, lower }
    }

    pub fn checked(sp: &'a Spectral, params: &'a ModelParams, zeta: &[f64], h_min: f64) -> Result<Self> {
        check_noncavitation(params, zeta, h_min)?;
        Ok(Self::new(sp, params, zeta))
    }

    pub fn m(&self) -> usize {
        self.sp.len()
    }

    fn coefs(&self, layer: Layer) -> &LayerCoefs {
        match layer {
            Layer::Upper => &self.upper,
            Layer::Lower => &self.lower,
        }
    }

    pub fn exponents(&self, layer: Layer) -> &[u32] {
        &self.coefs(layer).exps
    }

    /// Grid values of `H_k^e` (Nyquist removed).
    pub fn h_pow(&self, layer: Layer, e: u32) -> &Field {
        &self.coefs(layer).pow[e as usize]
    }

    /// Padded `H_k^e`.
    pub(crate) fn pad_pow(&self, layer: Layer, e: u32) -> &[f64] {
        &self.coefs(layer).pad[e as usize]
    }

    /// Padded `H_k^e b_x`, `None` over a flat bottom.
    pub(crate) fn pad_bx(&self, layer: Layer, e: u32) -> Option<&[f64]> {
        let c = self.coefs(layer);
        c.has_bottom().then(|| c.pad_bx[e as usize].as_slice())
    }

    /// Padded `H_k^e (1 + b_x²)`.
    pub(crate) fn pad_mass(&self, layer: Layer, e: u32) -> &[f64] {
        self.coefs(layer).mass_coef(e as usize)
    }

    /// Dealiased product `H_k^e · f`.
    pub fn mul_h_pow(&self, layer: Layer, e: u32, f: &[f64]) -> Field {
        if e == 0 {
            return f.to_vec();
        }
        let pf = self.sp.pad(f);
        let prod: Vec<f64> = self.coefs(layer).pad[e as usize].iter().zip(&pf).map(|(a, b)| a * b).collect();
        self.sp.truncate(&prod)
    }

    /// `(L_k φ)_i = Σ_j L_{k,ij} φ_j`, divergence terms in conservation form.
    pub fn apply_layer(&self, layer: Layer, phi: &[Field]) -> PotentialVec {
        let c = self.coefs(layer);
        let n = c.exps.len();
        assert_eq!(phi.len(), n, "potential vector has wrong length");
        let fine = self.sp.fine_len();
        let pphi: Vec<Padded> = phi.iter().map(|f| self.sp.pad(f)).collect();
        let pdphi: Vec<Padded> = phi.iter().map(|f| self.sp.pad_derivative(f, 1)).collect();
        (0..n)
            .map(|i| {
                let mut flux = vec![0.0; fine];
                let mut src = vec![0.0; fine];
                for j in 0..n {
                    let (ei, ej) = (c.exps[i], c.exps[j]);
                    let s = (ei + ej) as usize;
                    fma(&mut flux, 1.0 / (s as f64 + 1.0), &c.pad[s + 1], &pdphi[j]);
                    if ei * ej != 0 {
                        fma(&mut src, (ei * ej) as f64 / (s as f64 - 1.0), c.mass_coef(s - 1), &pphi[j]);
                    }
                    if c.has_bottom() && s > 0 {
                        fma(&mut flux, -frac(ej, s as i64), &c.pad_bx[s], &pphi[j]);
                        fma(&mut src, -frac(ei, s as i64), &c.pad_bx[s], &pdphi[j]);
                    }
                }
                self.sp.div_form(&flux, &src)
            })
            .collect()
    }

    pub fn apply_l1(&self, phi1: &[Field]) -> PotentialVec {
        self.apply_layer(Layer::Upper, phi1)
    }

    pub fn apply_l2(&self, phi2: &[Field]) -> PotentialVec {
        self.apply_layer(Layer::Lower, phi2)
    }

    /// `(ℒ_{k,0}φ, ℒ_{k,1}φ, …)` where `ℒ_{k,i} = Σ_j (L_{k,ij} − H^{e_i} L_{k,0j})`.
    pub fn compat_layer(&self, layer: Layer, phi: &[Field]) -> PotentialVec {
        let lphi = self.apply_layer(layer, phi);
        self.compat_from_l(layer, lphi)
    }

    /// ℒ rows from already computed `L_k φ`.
    pub fn compat_from_l(&self, layer: Layer, mut lphi: PotentialVec) -> PotentialVec {
        let c = self.coefs(layer);
        let p0 = self.sp.pad(&lphi[0]);
        for i in 1..lphi.len() {
            let prod: Vec<f64> = c.pad[c.exps[i] as usize].iter().zip(&p0).map(|(a, b)| a * b).collect();
            let t = self.sp.truncate(&prod);
            field::axpy(&mut lphi[i], -1.0, &t);
        }
        lphi
    }

    /// Compatibility residuals: `ℒ_{1,i}φ₁` (i ≥ 1), `ℒ_{2,i}φ₂` (i ≥ 1), `ℒ_{1,0}φ₁ + ℒ_{2,0}φ₂`.
    pub fn apply_compat(&self, phi1: &[Field], phi2: &[Field]) -> Vec<Field> {
        let c1 = self.compat_layer(Layer::Upper, phi1);
        let c2 = self.compat_layer(Layer::Lower, phi2);
        let mut out: Vec<Field> = c1[1..].to_vec();
        out.extend_from_slice(&c2[1..]);
        out.push(field::add(&c1[0], &c2[0]));
        out
    }

    /// Sup norm of [`Geometry::apply_compat`].
    pub fn compat_residual(&self, phi1: &[Field], phi2: &[Field]) -> f64 {
        field::vec_max_abs(&self.apply_compat(phi1, phi2))
    }

    /// `𝒍_k · φ_k = Σ_i H_k^{e_i} φ_{k,i}`.
    pub fn l_dot(&self, layer: Layer, phi: &[Field]) -> Field {
        let c = self.coefs(layer);
        let mut acc = vec![0.0; self.sp.fine_len()];
        for (i, f) in phi.iter().enumerate().skip(1) {
            fma(&mut acc, 1.0, &c.pad[c.exps[i] as usize], &self.sp.pad(f));
        }
        field::add(&phi[0], &self.sp.truncate(&acc))
    }

    /// `(∂_H 𝒍_k) · φ_k = Σ_i e_i H_k^{e_i−1} φ_{k,i}`.
    pub fn dl_dot(&self, layer: Layer, phi: &[Field]) -> Field {
        let c = self.coefs(layer);
        let mut acc = vec![0.0; self.sp.fine_len()];
        for (i, f) in phi.iter().enumerate() {
            let e = c.exps[i];
            if e > 0 {
                fma(&mut acc, e as f64, &c.pad[e as usize - 1], &self.sp.pad(f));
            }
        }
        self.sp.truncate(&acc)
    }

    pub fn layer_vectors(&self) -> LayerVectors {
        let vecs = |layer: Layer| {
            let c = self.coefs(layer);
            let l: PotentialVec = c.exps.iter().map(|&e| c.pow[e as usize].clone()).collect();
            let dl: PotentialVec = c
                .exps
                .iter()
                .map(|&e| if e == 0 { field::zeros(self.m()) } else { field::scale(e as f64, &c.pow[e as usize - 1]) })
                .collect();
            (l, dl)
        };
        let (l1, dl1) = vecs(Layer::Upper);
        let (l2, dl2) = vecs(Layer::Lower);
        LayerVectors { l1, l2, dl1, dl2 }
    }

    pub fn interface_velocities(&self, phi1: &[Field], phi2: &[Field]) -> Velocities {
        let fine = self.sp.fine_len();
        let (mut u1, mut w1) = (vec![0.0; fine], vec![0.0; fine]);
        let c = &self.upper;
        for (j, f) in phi1.iter().enumerate() {
            let e = c.exps[j] as usize;
            fma(&mut u1, 1.0, &c.pad[e], &self.sp.pad_derivative(f, 1));
            if e > 0 {
                fma(&mut w1, -(e as f64), &c.pad[e - 1], &self.sp.pad(f));
            }
        }
        let (mut u2, mut w2) = (vec![0.0; fine], vec![0.0; fine]);
        let c = &self.lower;
        for (j, f) in phi2.iter().enumerate() {
            let e = c.exps[j] as usize;
            fma(&mut u2, 1.0, &c.pad[e], &self.sp.pad_derivative(f, 1));
            if e > 0 {
                let pf = self.sp.pad(f);
                fma(&mut w2, e as f64, &c.pad[e - 1], &pf);
                if c.has_bottom() {
                    fma(&mut u2, -(e as f64), &c.pad_bx[e - 1], &pf);
                }
            }
        }
        Velocities {
            u1: self.sp.truncate(&u1),
            u2: self.sp.truncate(&u2),
            w1: self.sp.truncate(&w1),
            w2: self.sp.truncate(&w2),
        }
    }

    /// `∂ℒ_{k,i}/∂H_k` applied to `φ` as a multiplier field, `i = 1..`.
    fn dcompat_dh(&self, layer: Layer, phi: &[Field]) -> Vec<Field> {
        let c = self.coefs(layer);
        let n = c.exps.len();
        let fine = self.sp.fine_len();
        let pphi: Vec<Padded> = phi.iter().map(|f| self.sp.pad(f)).collect();
        let pd1: Vec<Padded> = phi.iter().map(|f| self.sp.pad_derivative(f, 1)).collect();
        let pd2: Vec<Padded> = phi.iter().map(|f| self.sp.pad_derivative(f, 2)).collect();
        (1..n)
            .map(|i| {
                let mut acc = vec![0.0; fine];
                let ei = c.exps[i];
                for j in 0..n {
                    let ej = c.exps[j];
                    let s = (ei + ej) as usize;
                    fma(&mut acc, ei as f64 / (ej as f64 + 1.0), &c.pad[s], &pd2[j]);
                    if ej > 0 {
                        fma(&mut acc, (ei * ej) as f64, c.mass_coef(s - 2), &pphi[j]);
                    }
                    if c.has_bottom() {
                        if ej > 0 {
                            // −p_i H^{s−1} (φ_j b_x)_x
                            fma(&mut acc, -(ei as f64), &c.pad_bx[s - 1], &pd1[j]);
                            fma(&mut acc, -(ei as f64), &c.pad_bxx[s - 1], &pphi[j]);
                        }
                        fma(&mut acc, -(ei as f64), &c.pad_bx[s - 1], &pd1[j]);
                    }
                }
                self.sp.truncate(&acc)
            })
            .collect()
    }

    /// `(f_{1,i})_{i=1..N}`, `(f_{2,i})_{i=1..N*}` with `[∂t, ℒ_{k,i}]φ_k = f_{k,i} ∂tζ`.
    pub fn commutator_f(&self, phi1: &[Field], phi2: &[Field]) -> (Vec<Field>, Vec<Field>) {
        // ∂tH₁ = −∂tζ, ∂tH₂ = ∂tζ
        let f1 = self.dcompat_dh(Layer::Upper, phi1).into_iter().map(|f| field::scale(-1.0, &f)).collect();
        let f2 = self.dcompat_dh(Layer::Lower, phi2);
        (f1, f2)
    }

    /// The `(N+N*+3)` bordered matrix at grid point `x`, unknown order
    /// `(q₀, 𝒒₁, 𝒒₂)`.
    pub fn bordered_block(&self, x: usize) -> DMatrix<f64> {
        let p = self.params;
        let (e1, e2) = (&self.upper.exps, &self.lower.exps);
        let (n1, n2) = (e1.len(), e2.len());
        let d = 1 + n1 + n2;
        let (h1, h2) = (self.h1[x], self.h2[x]);
        let mut m = DMatrix::zeros(d, d);
        for i in 0..n1 {
            let l = -p.rho1 * h1.powi(e1[i] as i32);
            m[(0, 1 + i)] = l;
            m[(1 + i, 0)] = l;
            for j in 0..n1 {
                let s = (e1[i] + e1[j]) as i32;
                m[(1 + i, 1 + j)] = p.rho1 * h1.powi(s + 1) / (s + 1) as f64;
            }
        }
        for i in 0..n2 {
            let l = p.rho2 * h2.powi(e2[i] as i32);
            m[(0, 1 + n1 + i)] = l;
            m[(1 + n1 + i, 0)] = l;
            for j in 0..n2 {
                let s = (e2[i] + e2[j]) as i32;
                m[(1 + n1 + i, 1 + n1 + j)] = p.rho2 * h2.powi(s + 1) / (s + 1) as f64;
            }
        }
        m
    }

    /// Full inverse of the bordered block at one point (exposes the `Q` blocks).
    pub fn block_inverse_at(&self, x: usize) -> Result<DMatrix<f64>> {
        let inv = self.bordered_block(x).lu().try_inverse().ok_or(Error::SingularBlock { index: x })?;
        if inv.iter().all(|v| v.is_finite()) {
            Ok(inv)
        } else {
            Err(Error::SingularBlock { index: x })
        }
    }

    pub fn block_inverse(&self) -> Result<BlockInverse> {
        let (n1, n2) = (self.upper.exps.len(), self.lower.exps.len());
        let d = 1 + n1 + n2;
        let cols: Vec<DVector<f64>> = (0..self.m())
            .into_par_iter()
            .map(|x| {
                let mut rhs = DVector::zeros(d);
                rhs[0] = 1.0;
                let sol = self.bordered_block(x).lu().solve(&rhs).ok_or(Error::SingularBlock { index: x })?;
                if sol.iter().all(|v| v.is_finite()) {
                    Ok(sol)
                } else {
                    Err(Error::SingularBlock { index: x })
                }
            })
            .collect::<Result<_>>()?;
        let pick = |k: usize| -> Field { self.sp.filter(&cols.iter().map(|c| c[k]).collect::<Field>()) };
        Ok(BlockInverse {
            q0: pick(0),
            q1: (0..n1).map(|i| pick(1 + i)).collect(),
            q2: (0..n2).map(|i| pick(1 + n1 + i)).collect(),
        })
    }

    /// `θ₁ = ρ₂H₁α₁/D`, `θ₂ = ρ₁H₂α₂/D`, `D = ρ₁H₂α₂ + ρ₂H₁α₁`.
    pub fn thetas(&self) -> (Field, Field) {
        let p = self.params;
        let (a1, a2) = (alpha_f64(p, Layer::Upper), alpha_f64(p, Layer::Lower));
        let mut t1 = Vec::with_capacity(self.m());
        let mut t2 = Vec::with_capacity(self.m());
        for (h1, h2) in self.h1.iter().zip(&self.h2) {
            let d = p.rho1 * h2 * a2 + p.rho2 * h1 * a1;
            t1.push(p.rho2 * h1 * a1 / d);
            t2.push(p.rho1 * h2 * a2 / d);
        }
        (t1, t2)
    }
}

pub fn check_noncavitation(params: &ModelParams, zeta: &[f64], h_min: f64) -> Result<()> {
    let min_h1 = zeta.iter().map(|z| params.h1 - z).fold(f64::INFINITY, f64::min);
    let min_h2 = zeta.iter().zip(&params.bottom).map(|(z, b)| params.h2 + z - b).fold(f64::INFINITY, f64::min);
    if !(min_h1 >= h_min && min_h2 >= h_min) || !field::is_finite(zeta) {
        return Err(Error::NonCavitation { min_h1, min_h2, h_min });
    }
    Ok(())
}

/// Per-layer inverse of the constant bordered matrix `Ã_{k,0}`, split as
/// `[[q, 𝒒ᵀ], [−𝒒, Q]]`; returns `(q, 𝒒, Q)`.
pub fn layer_bordered_inverse(params: &ModelParams, layer: Layer) -> (f64, DVector<f64>, DMatrix<f64>) {
    let exps = crate::lintheory::layer_exponents(params, layer);
    let n = exps.len();
    let mut b = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        b[(0, 1 + i)] = 1.0;
        b[(1 + i, 0)] = -1.0;
        for j in 0..n {
            b[(1 + i, 1 + j)] = 1.0 / (exps[i] + exps[j] + 1) as f64;
        }
    }
    let inv = b.lu().try_inverse().expect("bordered expansion matrix is nonsingular");
    let q = inv[(0, 0)];
    let qv = DVector::from_iterator(n, (0..n).map(|i| inv[(0, 1 + i)]));
    let qm = inv.view((1, 1), (n, n)).into_owned();
    (q, qv, qm)
}
