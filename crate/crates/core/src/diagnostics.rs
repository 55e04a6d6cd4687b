//! Mass, energy and momentum with their fluxes, the Hamiltonian and
//! variational-derivative checks.

use crate::elliptic::Model;
use crate::error::{Error, Result};
use crate::evolution::{canonical_rate, Sample};
use crate::field::{self, Field};
use crate::lintheory::Layer;
use crate::operators::Geometry;
use crate::state::{CanonicalState, State};

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsReport {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    /// NaN over a non-flat bottom
    pub momentum: f64,
    pub hamiltonian: f64,
    pub margin_min: f64,
    pub compat_residual: f64,
    pub min_h1: f64,
    pub min_h2: f64,
    /// NaN where no centred difference is available
    pub local_energy_residual: f64,
    pub local_momentum_residual: f64,
}

/// Sup norms of the local conservation residuals around one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalLawSample {
    pub t: f64,
    /// time step used by the centred difference
    pub dt: f64,
    pub energy_residual: f64,
    /// NaN over a non-flat bottom
    pub momentum_residual: f64,
}

fn fma(acc: &mut [f64], s: f64, a: &[f64], b: &[f64], c: &[f64]) {
    for (((y, x), u), v) in acc.iter_mut().zip(a).zip(b).zip(c) {
        *y += s * x * u * v;
    }
}

/// Padded `½ Σ (H^{s+1}/(s+1) φᵢ′φⱼ′ + m H^{s−1}(1+b_x²)φᵢφⱼ − 2eᵢ/s H^s b_x φᵢφⱼ′)`
/// and the padded gradient part alone.
fn layer_energy(geo: &Geometry, layer: Layer, phi: &[Field]) -> (Vec<f64>, Vec<f64>) {
    let sp = geo.sp;
    let exps = geo.exponents(layer).to_vec();
    let pp: Vec<Vec<f64>> = phi.iter().map(|f| sp.pad(f)).collect();
    let pd: Vec<Vec<f64>> = phi.iter().map(|f| sp.pad_derivative(f, 1)).collect();
    let mut total = vec![0.0; sp.fine_len()];
    let mut grad = vec![0.0; sp.fine_len()];
    for (i, &ei) in exps.iter().enumerate() {
        for (j, &ej) in exps.iter().enumerate() {
            let s = ei + ej;
            let c = 1.0 / (s as f64 + 1.0);
            fma(&mut grad, c, geo.pad_pow(layer, s + 1), &pd[i], &pd[j]);
            if ei * ej != 0 {
                let m = (ei * ej) as f64 / (s as f64 - 1.0);
                fma(&mut total, 0.5 * m, geo.pad_mass(layer, s - 1), &pp[i], &pp[j]);
            }
            if let (Some(bx), true) = (geo.pad_bx(layer, s), ei != 0) {
                fma(&mut total, -(ei as f64) / s as f64, bx, &pp[i], &pd[j]);
            }
        }
    }
    total.iter_mut().zip(&grad).for_each(|(t, g)| *t += 0.5 * g);
    (total, grad)
}

/// Energy density `e^K`.
pub fn energy_density(geo: &Geometry, state: &State) -> Field {
    let p = geo.params;
    let sp = geo.sp;
    let (e1, _) = layer_energy(geo, Layer::Upper, &state.phi1);
    let (e2, _) = layer_energy(geo, Layer::Lower, &state.phi2);
    let fine: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| p.rho1 * a + p.rho2 * b).collect();
    let mut e = sp.truncate(&fine);
    field::axpy(&mut e, 0.5 * (p.rho2 - p.rho1) * p.grav, &sp.mul(&state.zeta, &state.zeta));
    e
}

/// `∫ e^K`.
pub fn energy(geo: &Geometry, state: &State) -> f64 {
    geo.sp.integrate(&energy_density(geo, state))
}

/// Energy flux `f_e^K` given `∂t𝝓₁`, `∂t𝝓₂`.
pub fn energy_flux(geo: &Geometry, state: &State, dphi1: &[Field], dphi2: &[Field]) -> Field {
    let p = geo.params;
    let sp = geo.sp;
    let mut acc = vec![0.0; sp.fine_len()];
    for (layer, phi, dphi, rho) in [(Layer::Upper, &state.phi1, dphi1, p.rho1), (Layer::Lower, &state.phi2, dphi2, p.rho2)] {
        let exps = geo.exponents(layer).to_vec();
        let pp: Vec<Vec<f64>> = phi.iter().map(|f| sp.pad(f)).collect();
        let pd: Vec<Vec<f64>> = phi.iter().map(|f| sp.pad_derivative(f, 1)).collect();
        let pt: Vec<Vec<f64>> = dphi.iter().map(|f| sp.pad(f)).collect();
        for (i, &ei) in exps.iter().enumerate() {
            for (j, &ej) in exps.iter().enumerate() {
                let s = ei + ej;
                fma(&mut acc, -rho / (s as f64 + 1.0), geo.pad_pow(layer, s + 1), &pd[j], &pt[i]);
                if let (Some(bx), true) = (geo.pad_bx(layer, s), ej != 0) {
                    fma(&mut acc, rho * ej as f64 / s as f64, bx, &pp[j], &pt[i]);
                }
            }
        }
    }
    sp.truncate(&acc)
}

/// Canonical potential `ρ₂𝒍₂·𝝓₂ − ρ₁𝒍₁·𝝓₁`.
pub fn canonical_phi(geo: &Geometry, state: &State) -> Field {
    let p = geo.params;
    let a = geo.l_dot(Layer::Lower, &state.phi2);
    let b = geo.l_dot(Layer::Upper, &state.phi1);
    a.iter().zip(&b).map(|(x, y)| p.rho2 * x - p.rho1 * y).collect()
}

/// `∂tφ` of the canonical potential from the layer rates.
pub fn canonical_phi_rate(geo: &Geometry, state: &State, dzeta: &[f64], dphi1: &[Field], dphi2: &[Field]) -> Field {
    let p = geo.params;
    let sp = geo.sp;
    let a = geo.l_dot(Layer::Lower, dphi2);
    let b = geo.l_dot(Layer::Upper, dphi1);
    let dl: Field = geo
        .dl_dot(Layer::Lower, &state.phi2)
        .iter()
        .zip(&geo.dl_dot(Layer::Upper, &state.phi1))
        .map(|(x, y)| p.rho2 * x + p.rho1 * y)
        .collect();
    let c = sp.mul(dzeta, &dl);
    (0..sp.len()).map(|x| p.rho2 * a[x] - p.rho1 * b[x] + c[x]).collect()
}

/// Momentum density `ζ∂ₓφ` and flux (flat bottom only).
pub fn momentum_and_flux(
    geo: &Geometry,
    state: &State,
    dzeta: &[f64],
    dphi1: &[Field],
    dphi2: &[Field],
) -> Result<(Field, Field)> {
    if !geo.params.is_flat() {
        return Err(Error::FlatBottomRequired);
    }
    let p = geo.params;
    let sp = geo.sp;
    let phi = canonical_phi(geo, state);
    let m = sp.mul(&state.zeta, &sp.derivative(&phi, 1));
    let dphi = canonical_phi_rate(geo, state, dzeta, dphi1, dphi2);
    let (_, g1) = layer_energy(geo, Layer::Upper, &state.phi1);
    let (_, g2) = layer_energy(geo, Layer::Lower, &state.phi2);
    let fine: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| p.rho1 * a + p.rho2 * b).collect();
    let mut flux = sp.truncate(&fine);
    field::axpy(&mut flux, -1.0, &sp.mul(&state.zeta, &dphi));
    field::axpy(&mut flux, -1.0, &energy_density(geo, state));
    Ok((m, flux))
}

/// `ℋ^K(ζ, φ)`: energy of the compatibility-consistent state with potential `φ`.
pub fn hamiltonian_value(model: &Model, canon: &CanonicalState) -> Result<f64> {
    let geo = model.geometry(&canon.zeta)?;
    let (state, _) = model.prepare_with_geometry(&geo, &canon.phi, None)?;
    Ok(energy(&geo, &state))
}

pub fn report(model: &Model, s: &Sample) -> Result<DiagnosticsReport> {
    let geo = model.geometry(&s.state.zeta)?;
    let sp = &model.sp;
    let canon = CanonicalState { zeta: s.state.zeta.clone(), phi: canonical_phi(&geo, &s.state) };
    let momentum = match momentum_and_flux(&geo, &s.state, &s.dzeta, &s.dphi1, &s.dphi2) {
        Ok((m, _)) => sp.integrate(&m),
        Err(_) => f64::NAN,
    };
    Ok(DiagnosticsReport {
        t: s.t,
        mass: sp.integrate(&s.state.zeta),
        energy: energy(&geo, &s.state),
        momentum,
        hamiltonian: hamiltonian_value(model, &canon)?,
        margin_min: s.margin_min,
        compat_residual: geo.compat_residual(&s.state.phi1, &s.state.phi2),
        min_h1: field::min(&geo.h1),
        min_h2: field::min(&geo.h2),
        local_energy_residual: f64::NAN,
        local_momentum_residual: f64::NAN,
    })
}

/// Centred residuals of `∂t e + ∂ₓ f_e = 0` and `∂t m + ∂ₓ F_m = 0` at `cur`.
pub fn local_law(model: &Model, prev: &Sample, cur: &Sample, next: &Sample) -> Result<LocalLawSample> {
    let sp = &model.sp;
    let gp = model.geometry(&prev.state.zeta)?;
    let gc = model.geometry(&cur.state.zeta)?;
    let gn = model.geometry(&next.state.zeta)?;
    let span = next.t - prev.t;
    let de = field::scale(1.0 / span, &field::sub(&energy_density(&gn, &next.state), &energy_density(&gp, &prev.state)));
    let fe = energy_flux(&gc, &cur.state, &cur.dphi1, &cur.dphi2);
    let energy_residual = field::max_abs(&field::add(&de, &sp.derivative(&fe, 1)));
    let momentum_residual = if model.params.is_flat() {
        let (mp, _) = momentum_and_flux(&gp, &prev.state, &prev.dzeta, &prev.dphi1, &prev.dphi2)?;
        let (mn, _) = momentum_and_flux(&gn, &next.state, &next.dzeta, &next.dphi1, &next.dphi2)?;
        let (_, fm) = momentum_and_flux(&gc, &cur.state, &cur.dzeta, &cur.dphi1, &cur.dphi2)?;
        let dm = field::scale(1.0 / span, &field::sub(&mn, &mp));
        field::max_abs(&field::add(&dm, &sp.derivative(&fm, 1)))
    } else {
        f64::NAN
    };
    Ok(LocalLawSample { t: cur.t, dt: 0.5 * span, energy_residual, momentum_residual })
}

/// Relative errors of centred finite differences against the variational
/// derivatives, one entry per step size.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalCheck {
    pub steps: Vec<f64>,
    /// along `(0, δφ)` against `⟨δℋ/δφ, δφ⟩`
    pub phi_errors: Vec<f64>,
    /// along `(δζ, 0)` against `⟨δℋ/δζ, δζ⟩`
    pub zeta_errors: Vec<f64>,
    /// energy along `δ𝝓₁` against `ρ₁⟨L₁𝝓₁, δ𝝓₁⟩`
    pub energy_errors: Vec<f64>,
}

impl VariationalCheck {
    pub fn best(errors: &[f64]) -> f64 {
        errors.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn rel_err(fd: f64, exact: f64) -> f64 {
    if exact == 0.0 {
        fd.abs()
    } else {
        ((fd - exact) / exact).abs()
    }
}

pub fn variational_derivative_check(
    model: &Model,
    canon: &CanonicalState,
    dzeta_dir: &[f64],
    dphi_dir: &[f64],
    steps: &[f64],
) -> Result<VariationalCheck> {
    let sp = &model.sp;
    let geo = model.geometry(&canon.zeta)?;
    let (state, _) = model.prepare_with_geometry(&geo, &canon.phi, None)?;
    let rate = canonical_rate(model, &geo, &state);
    // δℋ/δφ = ∂tζ, δℋ/δζ = −∂tφ
    let exact_phi = sp.inner(&rate.zeta, dphi_dir);
    let exact_zeta = -sp.inner(&rate.phi, dzeta_dir);
    let l1 = geo.apply_l1(&state.phi1);
    let dir1: Vec<Field> = (0..state.phi1.len())
        .map(|i| sp.derivative(&field::scale(1.0 / (i + 1) as f64, dphi_dir), i as u32 % 2))
        .collect();
    let exact_energy = model.params.rho1 * l1.iter().zip(&dir1).map(|(a, b)| sp.inner(a, b)).sum::<f64>();
    let ham = |z: &[f64], ph: &[f64]| hamiltonian_value(model, &CanonicalState { zeta: z.to_vec(), phi: ph.to_vec() });
    let mut out = VariationalCheck { steps: steps.to_vec(), phi_errors: vec![], zeta_errors: vec![], energy_errors: vec![] };
    for &h in steps {
        let fp = (ham(&canon.zeta, &field::add(&canon.phi, &field::scale(h, dphi_dir)))?
            - ham(&canon.zeta, &field::sub(&canon.phi, &field::scale(h, dphi_dir)))?)
            / (2.0 * h);
        out.phi_errors.push(rel_err(fp, exact_phi));
        let fz = (ham(&field::add(&canon.zeta, &field::scale(h, dzeta_dir)), &canon.phi)?
            - ham(&field::sub(&canon.zeta, &field::scale(h, dzeta_dir)), &canon.phi)?)
            / (2.0 * h);
        out.zeta_errors.push(rel_err(fz, exact_zeta));
        let shifted = |s: f64| {
            let mut st = state.clone();
            for (f, d) in st.phi1.iter_mut().zip(&dir1) {
                field::axpy(f, s, d);
            }
            energy(&geo, &st)
        };
        let fe = (shifted(h) - shifted(-h)) / (2.0 * h);
        out.energy_errors.push(rel_err(fe, exact_energy));
    }
    Ok(out)
}
