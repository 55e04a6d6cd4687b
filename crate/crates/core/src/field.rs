//! Grid functions as plain vectors, with the handful of pointwise helpers the
//! operators need.

/// Real samples on the grid.
pub type Field = Vec<f64>;

/// One field per expansion index, `φ_{k,0..}`.
pub type PotentialVec = Vec<Field>;

pub fn zeros(m: usize) -> Field {
    vec![0.0; m]
}

pub fn constant(m: usize, c: f64) -> Field {
    vec![c; m]
}

pub fn add(a: &[f64], b: &[f64]) -> Field {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Field {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(s: f64, a: &[f64]) -> Field {
    a.iter().map(|x| s * x).collect()
}

/// `y += s x`
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn pointwise(a: &[f64], b: &[f64]) -> Field {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn min(a: &[f64]) -> f64 {
    a.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn vec_max_abs(v: &[Field]) -> f64 {
    v.iter().map(|f| max_abs(f)).fold(0.0, f64::max)
}

pub fn vec_sub(a: &[Field], b: &[Field]) -> Vec<Field> {
    a.iter().zip(b).map(|(x, y)| sub(x, y)).collect()
}

pub fn vec_add(a: &[Field], b: &[Field]) -> Vec<Field> {
    a.iter().zip(b).map(|(x, y)| add(x, y)).collect()
}

pub fn vec_scale(s: f64, a: &[Field]) -> Vec<Field> {
    a.iter().map(|x| scale(s, x)).collect()
}

/// `Σ_j ⟨a_j, b_j⟩` with plain sums (no quadrature weight).
pub fn vec_dot(a: &[Field], b: &[Field]) -> f64 {
    a.iter().zip(b).map(|(x, y)| dot(x, y)).sum()
}

pub fn is_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}
