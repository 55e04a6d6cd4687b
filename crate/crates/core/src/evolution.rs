//! Time derivatives of the direct and canonical systems, RK4 stepping and the
//! simulation driver.

use crate::diagnostics::{self, DiagnosticsReport, LocalLawSample};
use crate::elliptic::{EllipticRhs, Model};
use crate::error::{Error, Result};
use crate::field::{self, Field, PotentialVec};
use crate::lintheory::Layer;
use crate::operators::{Geometry, Velocities};
use crate::stability::StabilityContext;
use crate::state::{CanonicalState, State};

/// `(G₀, 𝑮₁, 𝑮₂)`: `∂tζ − εΔζ` and `∂t𝝓_k − εΔ𝝓_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeDerivatives {
    pub g0: Field,
    pub g1: PotentialVec,
    pub g2: PotentialVec,
    pub iterations: usize,
    /// reduced solver unknowns, a warm start for the next solve
    pub reduced: Vec<Field>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// evolve `(ζ, 𝝓₁, 𝝓₂)` with the `G` system
    Direct,
    /// evolve `(ζ, φ)` through Hamilton's equations
    Canonical,
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" => Ok(Scheme::Direct),
            "canonical" => Ok(Scheme::Canonical),
            _ => Err(format!("unknown scheme `{s}`, expected direct or canonical")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub epsilon: f64,
    pub scheme: Scheme,
    /// direct scheme only; 0 disables
    pub reproject_every: usize,
    pub output_every: usize,
    /// abort when the minimum stability margin drops below this
    pub margin_min: f64,
}

impl SimConfig {
    pub fn from_config(cfg: &crate::config::Config, scheme: Scheme, reproject_every: usize) -> Self {
        SimConfig {
            dt: cfg.dt,
            t_end: cfg.t_end,
            epsilon: cfg.epsilon,
            scheme,
            reproject_every,
            output_every: cfg.output_every,
            margin_min: cfg.margin_min,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// `F = ρ₁{gζ + ½(u₁² + w₁²)} − ρ₂{gζ + ½(u₂² + w₂²)}`.
pub fn compute_f(geo: &Geometry, vel: &Velocities) -> Field {
    let p = geo.params;
    let sp = geo.sp;
    let k1: Field = field::add(&sp.mul(&vel.u1, &vel.u1), &sp.mul(&vel.w1, &vel.w1));
    let k2: Field = field::add(&sp.mul(&vel.u2, &vel.u2), &sp.mul(&vel.w2, &vel.w2));
    (0..sp.len())
        .map(|x| {
            let gz = p.grav * geo.zeta[x];
            p.rho1 * (gz + 0.5 * k1[x]) - p.rho2 * (gz + 0.5 * k2[x])
        })
        .collect()
}

pub fn compute_f_state(geo: &Geometry, state: &State) -> Field {
    compute_f(geo, &geo.interface_velocities(&state.phi1, &state.phi2))
}

/// `Σᵢ a_i ⊙ b_i`, dealiased.
fn dot_fields(geo: &Geometry, a: &[Field], b: &[Field]) -> Field {
    let sp = geo.sp;
    let mut acc = vec![0.0; sp.fine_len()];
    for (x, y) in a.iter().zip(b) {
        let (px, py) = (sp.pad(x), sp.pad(y));
        acc.iter_mut().zip(px.iter().zip(&py)).for_each(|(s, (u, v))| *s += u * v);
    }
    sp.truncate(&acc)
}

/// `G₀ = ρ₁𝒒₁·L₁𝝓₁ + ρ₂𝒒₂·L₂𝝓₂`.
pub fn compute_g0(geo: &Geometry, state: &State) -> Result<Field> {
    let p = geo.params;
    let bi = geo.block_inverse()?;
    let l1 = geo.apply_l1(&state.phi1);
    let l2 = geo.apply_l2(&state.phi2);
    let a = dot_fields(geo, &bi.q1, &l1);
    let b = dot_fields(geo, &bi.q2, &l2);
    Ok(a.iter().zip(&b).map(|(x, y)| p.rho1 * x + p.rho2 * y).collect())
}

/// `[Δ, ℒ_k]𝝓` row by row, by composition.
fn laplace_commutator(geo: &Geometry, layer: Layer, phi: &[Field]) -> PotentialVec {
    let sp = geo.sp;
    let lphi = geo.compat_layer(layer, phi);
    let dphi: PotentialVec = phi.iter().map(|f| sp.derivative(f, 2)).collect();
    let ldphi = geo.compat_layer(layer, &dphi);
    lphi.iter().zip(&ldphi).map(|(a, b)| field::sub(&sp.derivative(a, 2), b)).collect()
}

/// Right-hand side of the `G` system.
pub fn g_system_rhs(geo: &Geometry, state: &State, g0: &[f64], epsilon: f64) -> Result<EllipticRhs> {
    let sp = geo.sp;
    let (f1, f2) = geo.commutator_f(&state.phi1, &state.phi2);
    let vel = geo.interface_velocities(&state.phi1, &state.phi2);
    let v = field::sub(&vel.u2, &vel.u1);
    let mut f1p: Vec<Field> = f1.iter().map(|f| field::scale(-1.0, &sp.mul(f, g0))).collect();
    let mut f2p: Vec<Field> = f2.iter().map(|f| field::scale(-1.0, &sp.mul(f, g0))).collect();
    let mut f3 = sp.mul(&v, g0);
    if epsilon != 0.0 {
        let lap_zeta = sp.derivative(&state.zeta, 2);
        let c1 = laplace_commutator(geo, Layer::Upper, &state.phi1);
        let c2 = laplace_commutator(geo, Layer::Lower, &state.phi2);
        for (i, row) in f1p.iter_mut().enumerate() {
            let ft = field::sub(&c1[i + 1], &sp.mul(&f1[i], &lap_zeta));
            field::axpy(row, epsilon, &ft);
        }
        for (i, row) in f2p.iter_mut().enumerate() {
            let ft = field::sub(&c2[i + 1], &sp.mul(&f2[i], &lap_zeta));
            field::axpy(row, epsilon, &ft);
        }
        let div = field::add(&c1[0], &c2[0]);
        let flux = field::add(&sp.antiderivative(&div)?, &sp.mul(&v, &lap_zeta));
        field::axpy(&mut f3, epsilon, &flux);
    }
    Ok(EllipticRhs { f1p, f2p, f3, f4: compute_f(geo, &vel) })
}

pub fn compute_time_derivatives(model: &Model, state: &State, epsilon: f64) -> Result<TimeDerivatives> {
    let geo = model.geometry(&state.zeta)?;
    time_derivatives_with(model, &geo, state, epsilon, None)
}

pub fn time_derivatives_with(
    model: &Model,
    geo: &Geometry,
    state: &State,
    epsilon: f64,
    guess: Option<&[Field]>,
) -> Result<TimeDerivatives> {
    let g0 = compute_g0(geo, state)?;
    let rhs = g_system_rhs(geo, state, &g0, epsilon)?;
    let sol = model.solve_with_geometry(geo, &rhs, guess)?;
    Ok(TimeDerivatives { g0, g1: sol.phi1, g2: sol.phi2, iterations: sol.iterations, reduced: sol.reduced })
}

/// `∂t(ζ, 𝝓₁, 𝝓₂)` of the direct scheme.
pub fn rhs_direct(model: &Model, state: &State, epsilon: f64) -> Result<State> {
    let td = compute_time_derivatives(model, state, epsilon)?;
    Ok(direct_rate(model, state, td, epsilon))
}

fn direct_rate(model: &Model, state: &State, td: TimeDerivatives, epsilon: f64) -> State {
    let mut rate = State { zeta: td.g0, phi1: td.g1, phi2: td.g2 };
    if epsilon != 0.0 {
        let sp = &model.sp;
        field::axpy(&mut rate.zeta, epsilon, &sp.derivative(&state.zeta, 2));
        for (r, f) in rate.phi1.iter_mut().zip(&state.phi1).chain(rate.phi2.iter_mut().zip(&state.phi2)) {
            field::axpy(r, epsilon, &sp.derivative(f, 2));
        }
    }
    rate
}

/// Hamilton's equations: `∂tζ = −ℒ_{1,0}𝝓₁`,
/// `∂tφ = F − (ℒ_{1,0}𝝓₁)(ρ₁∂𝒍₁·𝝓₁ + ρ₂∂𝒍₂·𝝓₂)`.
pub fn rhs_canonical(model: &Model, canon: &CanonicalState) -> Result<CanonicalState> {
    let geo = model.geometry(&canon.zeta)?;
    let (state, _) = model.prepare_with_geometry(&geo, &canon.phi, None)?;
    Ok(canonical_rate(model, &geo, &state))
}

/// Canonical rates evaluated at a compatibility-consistent state.
pub fn canonical_rate(model: &Model, geo: &Geometry, state: &State) -> CanonicalState {
    let p = &model.params;
    let sp = &model.sp;
    let dzeta = field::scale(-1.0, &geo.apply_l1(&state.phi1)[0]);
    let vel = geo.interface_velocities(&state.phi1, &state.phi2);
    let f = compute_f(geo, &vel);
    let dl: Field = vel.w2.iter().zip(&vel.w1).map(|(a, b)| p.rho2 * a - p.rho1 * b).collect();
    let dphi = field::add(&f, &sp.mul(&dzeta, &dl));
    CanonicalState { zeta: dzeta, phi: dphi }
}

pub fn step_direct(model: &Model, state: &State, dt: f64, epsilon: f64) -> Result<State> {
    let k1 = rhs_direct(model, state, epsilon)?;
    let k2 = rhs_direct(model, &state.axpy(0.5 * dt, &k1), epsilon)?;
    let k3 = rhs_direct(model, &state.axpy(0.5 * dt, &k2), epsilon)?;
    let k4 = rhs_direct(model, &state.axpy(dt, &k3), epsilon)?;
    Ok(rk4_combine_state(state, dt, &k1, &k2, &k3, &k4))
}

fn rk4_combine_state(s: &State, dt: f64, k1: &State, k2: &State, k3: &State, k4: &State) -> State {
    s.axpy(dt / 6.0, k1).axpy(dt / 3.0, k2).axpy(dt / 3.0, k3).axpy(dt / 6.0, k4)
}

pub fn step_canonical(model: &Model, canon: &CanonicalState, dt: f64) -> Result<CanonicalState> {
    let k1 = rhs_canonical(model, canon)?;
    let k2 = rhs_canonical(model, &canon.axpy(0.5 * dt, &k1))?;
    let k3 = rhs_canonical(model, &canon.axpy(0.5 * dt, &k2))?;
    let k4 = rhs_canonical(model, &canon.axpy(dt, &k3))?;
    Ok(canon.axpy(dt / 6.0, &k1).axpy(dt / 3.0, &k2).axpy(dt / 3.0, &k3).axpy(dt / 6.0, &k4))
}

/// Either form of the initial data.
#[derive(Clone, Debug, PartialEq)]
pub enum Initial {
    Canonical(CanonicalState),
    Kakinuma(State),
}

/// Everything known about the solution at one time level.
#[derive(Clone, Debug)]
pub struct Sample {
    pub t: f64,
    pub state: State,
    pub derivs: TimeDerivatives,
    /// `∂t𝝓₁`, `∂t𝝓₂`, `∂tζ`
    pub dphi1: PotentialVec,
    pub dphi2: PotentialVec,
    pub dzeta: Field,
    pub margin_min: f64,
}

impl Sample {
    pub fn new(model: &Model, t: f64, state: State, epsilon: f64) -> Result<Self> {
        let geo = model.geometry(&state.zeta)?;
        let derivs = time_derivatives_with(model, &geo, &state, epsilon, None)?;
        let ctx = StabilityContext::new(&geo, &state, &derivs);
        let rate = direct_rate(model, &state, derivs.clone(), epsilon);
        Ok(Sample {
            t,
            state,
            margin_min: ctx.min_margin(),
            derivs,
            dphi1: rate.phi1,
            dphi2: rate.phi2,
            dzeta: rate.zeta,
        })
    }
}

#[derive(Debug)]
pub struct SimResult {
    pub reports: Vec<DiagnosticsReport>,
    /// pointwise local-law residuals at every output time that has both neighbours
    pub local_laws: Vec<LocalLawSample>,
    pub final_state: State,
    pub final_time: f64,
    pub steps: usize,
    /// reason the run stopped early; the final fields hold the last good state
    pub abort: Option<Error>,
}

fn monitor(cfg: &SimConfig, sample: &Sample) -> Result<()> {
    if !(sample.margin_min >= cfg.margin_min) {
        return Err(Error::StabilityViolated { t: sample.t, margin: sample.margin_min, threshold: cfg.margin_min });
    }
    Ok(())
}

/// Integrate from `initial` to `cfg.t_end`, calling `observer` at every
/// output time (including `t = 0` and the final time).
pub fn simulate(
    model: &Model,
    initial: Initial,
    cfg: &SimConfig,
    observer: &mut dyn FnMut(f64, &State),
) -> Result<SimResult> {
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(Error::InvalidParams(format!("dt must be positive, got {}", cfg.dt)));
    }
    if cfg.output_every == 0 {
        return Err(Error::InvalidParams("output_every must be at least 1".into()));
    }
    let mut canon = match &initial {
        Initial::Canonical(c) => c.clone(),
        Initial::Kakinuma(s) => {
            let geo = model.geometry(&s.zeta)?;
            let res = geo.compat_residual(&s.phi1, &s.phi2);
            let scale = field::vec_max_abs(&s.phi1).max(field::vec_max_abs(&s.phi2)).max(1.0);
            let bound = 1e3 * model.options.cg_tol * scale;
            if res > bound {
                return Err(Error::Incompatible { residual: res, bound });
            }
            CanonicalState { zeta: s.zeta.clone(), phi: model.canonical_phi(&geo, &s.phi1, &s.phi2) }
        }
    };
    let mut state = match initial {
        Initial::Canonical(c) => model.prepare_initial_data(&c)?,
        Initial::Kakinuma(s) => s,
    };
    let steps = cfg.steps();
    let mut reports: Vec<DiagnosticsReport> = Vec::new();
    let mut local_laws = Vec::new();
    let mut t = 0.0;
    let mut prev: Option<Sample> = None;
    let mut cur = Sample::new(model, 0.0, state.clone(), cfg.epsilon)?;
    reports.push(diagnostics::report(model, &cur)?);
    observer(0.0, &state);
    // index of the report for `cur` that still needs its local-law residuals
    let mut pending: Option<usize> = None;
    let mut abort = monitor(cfg, &cur).err();
    let mut done = 0;
    if abort.is_none() {
        for n in 1..=steps {
            let dt = if n == steps { cfg.t_end - t } else { cfg.dt };
            let advanced = match cfg.scheme {
                Scheme::Direct => step_direct(model, &state, dt, cfg.epsilon).and_then(|s| {
                    if cfg.reproject_every > 0 && n % cfg.reproject_every == 0 {
                        let geo = model.geometry(&s.zeta)?;
                        let phi = model.canonical_phi(&geo, &s.phi1, &s.phi2);
                        Ok((model.prepare_with_geometry(&geo, &phi, None)?.0, None))
                    } else {
                        Ok((s, None))
                    }
                }),
                Scheme::Canonical => step_canonical(model, &canon, dt)
                    .and_then(|c| Ok((model.prepare_initial_data(&c)?, Some(c)))),
            };
            let next = advanced.and_then(|(s, c)| {
                if !s.is_finite() {
                    return Err(Error::NonCavitation { min_h1: f64::NAN, min_h2: f64::NAN, h_min: model.h_min });
                }
                let sample = Sample::new(model, t + dt, s, cfg.epsilon)?;
                monitor(cfg, &sample)?;
                Ok((sample, c))
            });
            let (next, c) = match next {
                Ok(v) => v,
                Err(e) => {
                    abort = Some(e);
                    break;
                }
            };
            if let Some(c) = c {
                canon = c;
            }
            if let (Some(idx), Some(p)) = (pending.take(), prev.as_ref()) {
                let law = diagnostics::local_law(model, p, &cur, &next)?;
                reports[idx].local_energy_residual = law.energy_residual;
                reports[idx].local_momentum_residual = law.momentum_residual;
                local_laws.push(law);
            }
            t += dt;
            state = next.state.clone();
            done = n;
            prev = Some(std::mem::replace(&mut cur, next));
            if n % cfg.output_every == 0 || n == steps {
                reports.push(diagnostics::report(model, &cur)?);
                pending = Some(reports.len() - 1);
                observer(t, &state);
            }
        }
    }
    Ok(SimResult { reports, local_laws, final_state: state, final_time: t, steps: done, abort })
}
