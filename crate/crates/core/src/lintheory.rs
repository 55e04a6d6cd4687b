//! Linear dispersion theory: expansion matrices, bordered determinants, the α
//! constants and the phase speeds of the linearized flat-bottom problem.
//!
//! Both layers share one closed form once the basis exponents `e_i` are fixed
//! (`e_i = 2i` above the interface, `e_i = p_i` below):
//! `A_0 = (1/(e_i+e_j+1))`, `A_1 = (e_i e_j/(e_i+e_j−1))` with `0/0 = 0`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::params::ModelParams;

pub type Rat = BigRational;
pub type RatMatrix = Vec<Vec<Rat>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    Upper,
    Lower,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionMatrices {
    pub layer: Layer,
    pub exponents: Vec<u32>,
    pub a0: RatMatrix,
    pub a1: RatMatrix,
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

fn ratio_or_zero(n: i64, d: i64) -> Rat {
    if n == 0 {
        Rat::zero()
    } else {
        rat(n, d)
    }
}

pub fn layer_exponents(params: &ModelParams, layer: Layer) -> Vec<u32> {
    match layer {
        Layer::Upper => params.upper_exponents(),
        Layer::Lower => params.p_list.clone(),
    }
}

pub fn matrices_from_exponents(layer: Layer, exponents: &[u32]) -> ExpansionMatrices {
    let n = exponents.len();
    let mut a0 = vec![vec![Rat::zero(); n]; n];
    let mut a1 = vec![vec![Rat::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let (ei, ej) = (exponents[i] as i64, exponents[j] as i64);
            a0[i][j] = rat(1, ei + ej + 1);
            a1[i][j] = ratio_or_zero(ei * ej, ei + ej - 1);
        }
    }
    ExpansionMatrices { layer, exponents: exponents.to_vec(), a0, a1 }
}

pub fn build_matrices(params: &ModelParams, layer: Layer) -> ExpansionMatrices {
    matrices_from_exponents(layer, &layer_exponents(params, layer))
}

/// Determinant by exact Gaussian elimination.
pub fn det(a: &[Vec<Rat>]) -> Rat {
    let n = a.len();
    let mut m: RatMatrix = a.to_vec();
    let mut d = Rat::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else {
            return Rat::zero();
        };
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        let piv = m[c][c].clone();
        d *= &piv;
        for r in c + 1..n {
            if m[r][c].is_zero() {
                continue;
            }
            let f = &m[r][c] / &piv;
            for k in c..n {
                let t = &f * &m[c][k];
                m[r][k] -= t;
            }
        }
    }
    d
}

/// `[[0, 1ᵀ], [−1, A]]`
pub fn bordered(a: &[Vec<Rat>]) -> RatMatrix {
    let n = a.len();
    let mut b = vec![vec![Rat::zero(); n + 1]; n + 1];
    for j in 0..n {
        b[0][j + 1] = Rat::one();
        b[j + 1][0] = -Rat::one();
    }
    for i in 0..n {
        for j in 0..n {
            b[i + 1][j + 1] = a[i][j].clone();
        }
    }
    b
}

pub fn bordered_det(a: &[Vec<Rat>]) -> Rat {
    det(&bordered(a))
}

/// `α = det A_0 / det Ã_0`.
pub fn alpha_constant(m: &ExpansionMatrices) -> Rat {
    det(&m.a0) / bordered_det(&m.a0)
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn alpha_f64(params: &ModelParams, layer: Layer) -> f64 {
    to_f64(&alpha_constant(&build_matrices(params, layer)))
}

/// Solve `A x = b` exactly; `A` must be nonsingular.
fn solve_exact(a: &[Vec<Rat>], b: &[Rat]) -> Vec<Rat> {
    let n = a.len();
    let mut m: RatMatrix = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !m[r][c].is_zero()).expect("singular interpolation system");
        m.swap(p, c);
        let piv = m[c][c].clone();
        for k in c..=n {
            m[c][k] = &m[c][k] / &piv;
        }
        for r in 0..n {
            if r != c && !m[r][c].is_zero() {
                let f = m[r][c].clone();
                for k in c..=n {
                    let t = &f * &m[c][k];
                    m[r][k] -= t;
                }
            }
        }
    }
    m.into_iter().map(|row| row[n].clone()).collect()
}

/// Coefficients (ascending) of the polynomial through `(s_k, v_k)`.
fn interpolate(nodes: &[Rat], values: &[Rat]) -> Vec<Rat> {
    let n = nodes.len();
    let vander: RatMatrix = nodes
        .iter()
        .map(|s| {
            let mut row = Vec::with_capacity(n);
            let mut p = Rat::one();
            for _ in 0..n {
                row.push(p.clone());
                p *= s;
            }
            row
        })
        .collect();
    solve_exact(&vander, values)
}

/// `𝒜(s) = s A_0 + A_1`, with `s = |ξ|²`.
pub fn script_a(m: &ExpansionMatrices, s: &Rat) -> RatMatrix {
    m.a0
        .iter()
        .zip(&m.a1)
        .map(|(r0, r1)| r0.iter().zip(r1).map(|(x, y)| s * x + y).collect())
        .collect()
}

/// Exact polynomial coefficients of `det 𝒜(s)/s` and `det 𝒜̃(s)` in `s = |ξ|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerPolynomials {
    pub det_over_s: Vec<Rat>,
    pub bordered: Vec<Rat>,
}

impl LayerPolynomials {
    pub fn new(m: &ExpansionMatrices) -> Self {
        let deg = m.exponents.len() - 1;
        let nodes: Vec<Rat> = (1..=deg as i64 + 1).map(|k| rat(k, 1)).collect();
        let dv: Vec<Rat> = nodes.iter().map(|s| det(&script_a(m, s)) / s).collect();
        let bv: Vec<Rat> = nodes.iter().map(|s| bordered_det(&script_a(m, s))).collect();
        LayerPolynomials { det_over_s: interpolate(&nodes, &dv), bordered: interpolate(&nodes, &bv) }
    }
}

/// Floating-point evaluation of `T(s) = det𝒜(s)/(s det𝒜̃(s))`, the model's
/// counterpart of `tanh(hξ)/(hξ)` at `s = (hξ)²`.
#[derive(Clone, Debug)]
pub struct LayerRatio {
    p: Vec<f64>,
    r: Vec<f64>,
}

impl LayerRatio {
    pub fn new(polys: &LayerPolynomials) -> Self {
        LayerRatio {
            p: polys.det_over_s.iter().map(to_f64).collect(),
            r: polys.bordered.iter().map(to_f64).collect(),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s <= 1.0 {
            horner(&self.p, s) / horner(&self.r, s)
        } else {
            // reversed polynomials in 1/s keep large arguments well scaled
            let t = 1.0 / s;
            horner_rev(&self.p, t) / horner_rev(&self.r, t)
        }
    }

    /// Value as `s → ∞`: `det A_0 / det Ã_0 = α`.
    pub fn limit(&self) -> f64 {
        self.p[self.p.len() - 1] / self.r[self.r.len() - 1]
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn horner_rev(c: &[f64], t: f64) -> f64 {
    c.iter().fold(0.0, |acc, &a| acc * t + a)
}

/// Phase speeds of the linearized flat-bottom problem for one parameter set.
#[derive(Clone, Debug)]
pub struct Dispersion {
    rho1: f64,
    rho2: f64,
    h1: f64,
    h2: f64,
    grav: f64,
    upper: LayerRatio,
    lower: LayerRatio,
}

impl Dispersion {
    pub fn new(params: &ModelParams) -> Self {
        let up = LayerPolynomials::new(&build_matrices(params, Layer::Upper));
        let lo = LayerPolynomials::new(&build_matrices(params, Layer::Lower));
        Dispersion {
            rho1: params.rho1,
            rho2: params.rho2,
            h1: params.h1,
            h2: params.h2,
            grav: params.grav,
            upper: LayerRatio::new(&up),
            lower: LayerRatio::new(&lo),
        }
    }

    fn combine(&self, t1: f64, t2: f64) -> f64 {
        (self.rho2 - self.rho1) * self.grav * self.h1 * self.h2 * t1 * t2
            / (self.rho1 * self.h2 * t2 + self.rho2 * self.h1 * t1)
    }

    pub fn c_sw2(&self) -> f64 {
        self.combine(1.0, 1.0)
    }

    /// `c_K(ξ)²`; at `ξ = 0` this is the shallow-water value.
    pub fn c_k2(&self, xi: f64) -> f64 {
        let s1 = (self.h1 * xi).powi(2);
        let s2 = (self.h2 * xi).powi(2);
        self.combine(self.upper.eval(s1), self.lower.eval(s2))
    }

    /// Limit of `c_K(ξ)²` as `h_k|ξ| → ∞`, where each layer ratio tends to `α_k`.
    pub fn c_k2_deep(&self) -> f64 {
        self.combine(self.upper.limit(), self.lower.limit())
    }

    /// `c_IW(ξ)²` of the full interfacial problem.
    pub fn c_iw2(&self, xi: f64) -> f64 {
        self.combine(tanh_ratio(self.h1 * xi), tanh_ratio(self.h2 * xi))
    }

    pub fn upper_ratio(&self, hxi: f64) -> f64 {
        self.upper.eval(hxi * hxi)
    }

    pub fn lower_ratio(&self, hxi: f64) -> f64 {
        self.lower.eval(hxi * hxi)
    }
}

/// `tanh(x)/x` with its limit at 0.
pub fn tanh_ratio(x: f64) -> f64 {
    let x = x.abs();
    if x < 1e-8 {
        1.0 - x * x / 3.0
    } else {
        x.tanh() / x
    }
}

pub fn phase_speed_kakinuma(xi: f64, params: &ModelParams) -> f64 {
    Dispersion::new(params).c_k2(xi)
}

pub fn phase_speed_full(xi: f64, params: &ModelParams) -> f64 {
    Dispersion::new(params).c_iw2(xi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionSample {
    pub xi: f64,
    pub c_k2: f64,
    pub c_iw2: f64,
    pub c_sw2: f64,
}

impl DispersionSample {
    pub fn rel_error(&self) -> f64 {
        (self.c_k2 - self.c_iw2).abs() / self.c_iw2
    }
}

pub fn dispersion_table(params: &ModelParams, xis: &[f64]) -> Vec<DispersionSample> {
    let d = Dispersion::new(params);
    xis.iter()
        .map(|&xi| DispersionSample { xi, c_k2: d.c_k2(xi), c_iw2: d.c_iw2(xi), c_sw2: d.c_sw2() })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderPoint {
    pub xi: f64,
    /// `h₁|ξ| + h₂|ξ|`
    pub scale: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderScan {
    pub points: Vec<OrderPoint>,
    pub slope: f64,
}

pub const ORDER_FLOOR: f64 = 1e-14;

/// Least-squares slope of `log|c_IW²/c_SW² − c_K²/c_SW²|` against
/// `log(h₁|ξ|+h₂|ξ|)` over `n` log-spaced wavenumbers in `[xi_min, xi_max]`.
pub fn convergence_order_scan(params: &ModelParams, xi_min: f64, xi_max: f64, n: usize) -> Result<OrderScan> {
    assert!(n >= 2 && xi_min > 0.0 && xi_max > xi_min, "invalid scan range");
    let d = Dispersion::new(params);
    let c0 = d.c_sw2();
    let points: Vec<OrderPoint> = (0..n)
        .map(|k| {
            let xi = xi_min * (xi_max / xi_min).powf(k as f64 / (n - 1) as f64);
            OrderPoint {
                xi,
                scale: (params.h1 + params.h2) * xi,
                error: ((d.c_iw2(xi) - d.c_k2(xi)) / c0).abs(),
            }
        })
        .collect();
    if points.iter().any(|p| !(p.error >= ORDER_FLOOR)) {
        return Err(Error::DegenerateFit { floor: ORDER_FLOOR });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.scale.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.error.ln()).collect();
    Ok(OrderScan { slope: ls_slope(&xs, &ys), points })
}

pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Whether a rational is strictly positive (helper for tests and checks).
pub fn is_positive(r: &Rat) -> bool {
    r.is_positive()
}
