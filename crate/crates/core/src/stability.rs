//! The coefficient `a`, the stability margin and the frozen-coefficient
//! dispersion relation.

use rustfft::num_complex::Complex64;

use crate::evolution::TimeDerivatives;
use crate::field::Field;
use crate::lintheory::{alpha_f64, Layer};
use crate::operators::{Geometry, Velocities};
use crate::params::ModelParams;
use crate::state::State;

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityContext {
    pub a: Field,
    pub u1: Field,
    pub u2: Field,
    /// `θ₂u₁ + θ₁u₂`
    pub u: Field,
    /// `u₂ − u₁`
    pub v: Field,
    pub theta1: Field,
    pub theta2: Field,
    pub alpha1: f64,
    pub alpha2: f64,
    pub margin: Field,
}

impl StabilityContext {
    pub fn new(geo: &Geometry, state: &State, derivs: &TimeDerivatives) -> Self {
        let vel = geo.interface_velocities(&state.phi1, &state.phi2);
        let a = compute_a_with(geo, state, derivs, &vel);
        let (theta1, theta2) = geo.thetas();
        let p = geo.params;
        let u = (0..a.len()).map(|x| theta2[x] * vel.u1[x] + theta1[x] * vel.u2[x]).collect();
        let v: Field = vel.u2.iter().zip(&vel.u1).map(|(b, c)| b - c).collect();
        let margin = margin_from(geo, &a, &v);
        StabilityContext {
            a,
            u,
            v,
            u1: vel.u1,
            u2: vel.u2,
            theta1,
            theta2,
            alpha1: alpha_f64(p, Layer::Upper),
            alpha2: alpha_f64(p, Layer::Lower),
            margin,
        }
    }

    pub fn min_margin(&self) -> f64 {
        self.margin.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `a = −∂_z(P₂ − P₁)` at the interface with `∂tφ_{k,i}` replaced by `G_{k,i}`.
pub fn compute_a(geo: &Geometry, state: &State, derivs: &TimeDerivatives) -> Field {
    let vel = geo.interface_velocities(&state.phi1, &state.phi2);
    compute_a_with(geo, state, derivs, &vel)
}

fn compute_a_with(geo: &Geometry, state: &State, derivs: &TimeDerivatives, vel: &Velocities) -> Field {
    let p = geo.params;
    let sp = geo.sp;
    let e1 = geo.exponents(Layer::Upper).to_vec();
    let e2 = geo.exponents(Layer::Lower).to_vec();
    let d1: Vec<Field> = state.phi1.iter().map(|f| sp.derivative(f, 1)).collect();
    let d2: Vec<Field> = state.phi2.iter().map(|f| sp.derivative(f, 1)).collect();
    (0..sp.len())
        .map(|x| {
            let (h1, h2) = (geo.h1[x], geo.h2[x]);
            let (u1, u2, w1, w2) = (vel.u1[x], vel.u2[x], vel.w1[x], vel.w2[x]);
            let bx = geo.bx[x];
            let mut lower = p.grav;
            for (i, &e) in e2.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let ef = e as f64;
                lower += ef * h2.powi(e as i32 - 1) * (derivs.g2[i][x] + u2 * d2[i][x]);
                if e >= 2 {
                    lower += ef * (ef - 1.0) * h2.powi(e as i32 - 2) * (w2 - u2 * bx) * state.phi2[i][x];
                }
            }
            let mut upper = -p.grav;
            for (i, &e) in e1.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let ef = e as f64;
                upper += ef * h1.powi(e as i32 - 1) * (derivs.g1[i][x] + u1 * d1[i][x]);
                upper -= w1 * ef * (ef - 1.0) * h1.powi(e as i32 - 2) * state.phi1[i][x];
            }
            p.rho2 * lower + p.rho1 * upper
        })
        .collect()
}

fn margin_from(geo: &Geometry, a: &[f64], v: &[f64]) -> Field {
    let p = geo.params;
    let (a1, a2) = (alpha_f64(p, Layer::Upper), alpha_f64(p, Layer::Lower));
    (0..a.len())
        .map(|x| {
            let den = p.rho1 * geo.h2[x] * a2 + p.rho2 * geo.h1[x] * a1;
            a[x] - p.rho1 * p.rho2 * v[x] * v[x] / den
        })
        .collect()
}

/// `a − ρ₁ρ₂|v|²/(ρ₁H₂α₂ + ρ₂H₁α₁)` pointwise, and its minimum.
pub fn stability_margin(geo: &Geometry, state: &State, a: &[f64]) -> (Field, f64) {
    let vel = geo.interface_velocities(&state.phi1, &state.phi2);
    let v: Field = vel.u2.iter().zip(&vel.u1).map(|(b, c)| b - c).collect();
    let margin = margin_from(geo, a, &v);
    let min = margin.iter().copied().fold(f64::INFINITY, f64::min);
    (margin, min)
}

/// Constant coefficients of the frozen linearization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrozenState {
    pub h1: f64,
    pub h2: f64,
    pub u1: f64,
    pub u2: f64,
    pub a: f64,
}

impl FrozenState {
    pub fn margin(&self, params: &ModelParams) -> f64 {
        let (a1, a2) = (alpha_f64(params, Layer::Upper), alpha_f64(params, Layer::Lower));
        let v = self.u2 - self.u1;
        self.a - params.rho1 * params.rho2 * v * v / (params.rho1 * self.h2 * a2 + params.rho2 * self.h1 * a1)
    }
}

/// Roots and reduced discriminant of the frozen quadratic in `ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrozenRoots {
    pub roots: [Complex64; 2],
    /// `B′² − AC` for `Aω² − 2B′ω + C`
    pub discriminant: f64,
}

impl FrozenRoots {
    pub fn is_real(&self) -> bool {
        self.discriminant >= 0.0
    }
}

/// Roots of `(ρ₁/(H₁α₁))(ω−u₁ξ)² + (ρ₂/(H₂α₂))(ω−u₂ξ)² − aξ² = 0`.
pub fn frozen_roots(xi: f64, frozen: &FrozenState, params: &ModelParams) -> FrozenRoots {
    let (a1, a2) = (alpha_f64(params, Layer::Upper), alpha_f64(params, Layer::Lower));
    let c1 = params.rho1 / (frozen.h1 * a1);
    let c2 = params.rho2 / (frozen.h2 * a2);
    // shift ω = u₁ξ + Ω so that only the shear enters
    let vxi = (frozen.u2 - frozen.u1) * xi;
    let aa = c1 + c2;
    let bb = c2 * vxi;
    let cc = c2 * vxi * vxi - frozen.a * xi * xi;
    let disc = bb * bb - aa * cc;
    let shift = frozen.u1 * xi;
    let centre = bb / aa;
    let roots = if disc >= 0.0 {
        let s = disc.sqrt() / aa;
        [Complex64::new(shift + centre - s, 0.0), Complex64::new(shift + centre + s, 0.0)]
    } else {
        let s = (-disc).sqrt() / aa;
        [Complex64::new(shift + centre, -s), Complex64::new(shift + centre, s)]
    };
    FrozenRoots { roots, discriminant: disc }
}
