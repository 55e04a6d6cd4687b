//! Periodic grid and Fourier-collocation calculus.
//!
//! Fields are sampled at `x_n = n L / M`. Derivatives zero the Nyquist mode for
//! every order so that the first derivative is skew-adjoint and `D∘D` is the
//! second derivative. Products are formed on a 3M/2 grid and truncated back to
//! the modes `|k| < M/2`; with that truncation the product map `f ↦ T(a·f)` is
//! symmetric in the grid inner product.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::Field;

#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D {
    pub length: f64,
    pub points: usize,
}

impl Grid1D {
    pub fn new(length: f64, points: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParams(format!("domain length must be positive, got {length}")));
        }
        if points < 8 || points % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "grid size must be even and at least 8, got {points}"
            )));
        }
        Ok(Grid1D { length, points })
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn x(&self) -> Vec<f64> {
        (0..self.points).map(|n| n as f64 * self.spacing()).collect()
    }

    /// Physical wavenumber of integer mode `k`.
    pub fn wavenumber(&self, k: i64) -> f64 {
        2.0 * PI * k as f64 / self.length
    }

    /// Evaluate `f` at the grid points.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        self.x().into_iter().map(f).collect()
    }
}

/// FFT plans for one grid plus its 3/2 padded companion.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid1D,
    fine: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_fine: Arc<dyn Fft<f64>>,
    inv_fine: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).field("fine", &self.fine).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid1D) -> Self {
        let m = grid.points;
        let fine = 3 * m / 2;
        let mut planner = FftPlanner::new();
        Spectral {
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
            fwd_fine: planner.plan_fft_forward(fine),
            inv_fine: planner.plan_fft_inverse(fine),
            grid,
            fine,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn fine_len(&self) -> usize {
        self.fine
    }

    /// Signed mode number stored in FFT slot `idx`; `None` for the Nyquist slot.
    pub fn mode(&self, idx: usize) -> Option<i64> {
        let m = self.grid.points;
        if idx < m / 2 {
            Some(idx as i64)
        } else if idx == m / 2 {
            None
        } else {
            Some(idx as i64 - m as i64)
        }
    }

    /// Fourier coefficients `c_k` with `f(x) = Σ c_k e^{ikx}`, FFT ordering.
    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let m = self.grid.points;
        assert_eq!(f.len(), m, "field length does not match grid");
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        let s = 1.0 / m as f64;
        buf.iter_mut().for_each(|c| *c *= s);
        buf
    }

    /// Inverse of [`Spectral::forward`], keeping the real part.
    pub fn inverse(&self, mut c: Vec<Complex64>) -> Field {
        self.inv.process(&mut c);
        c.into_iter().map(|z| z.re).collect()
    }

    fn derivative_symbol(&self, idx: usize, order: u32) -> Complex64 {
        match self.mode(idx) {
            None => Complex64::new(0.0, 0.0),
            Some(k) => Complex64::new(0.0, self.grid.wavenumber(k)).powu(order),
        }
    }

    pub fn derivative(&self, f: &[f64], order: u32) -> Field {
        if order == 0 {
            return f.to_vec();
        }
        let mut c = self.forward(f);
        for (idx, z) in c.iter_mut().enumerate() {
            *z *= self.derivative_symbol(idx, order);
        }
        self.inverse(c)
    }

    pub fn antiderivative(&self, f: &[f64]) -> Result<Field> {
        self.antiderivative_tol(f, 1e-12)
    }

    /// Zero-mean antiderivative; fails when `|mean f| > tol · max|f|`.
    pub fn antiderivative_tol(&self, f: &[f64], tol: f64) -> Result<Field> {
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        let norm = f.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if mean.abs() > tol * norm {
            return Err(Error::NonZeroMean { mean, norm });
        }
        let mut c = self.forward(f);
        for (idx, z) in c.iter_mut().enumerate() {
            *z = match self.mode(idx) {
                Some(k) if k != 0 => *z / Complex64::new(0.0, self.grid.wavenumber(k)),
                _ => Complex64::new(0.0, 0.0),
            };
        }
        Ok(self.inverse(c))
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.grid.length * f.iter().sum::<f64>() / f.len() as f64
    }

    /// Grid inner product `∫ f g` by the trapezoidal rule.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.grid.spacing() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Remove the Nyquist mode.
    pub fn filter(&self, f: &[f64]) -> Field {
        let mut c = self.forward(f);
        c[self.grid.points / 2] = Complex64::new(0.0, 0.0);
        self.inverse(c)
    }

    fn pad_coeffs(&self, c: &[Complex64]) -> Vec<f64> {
        let m = self.grid.points;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fine];
        for (idx, z) in c.iter().enumerate() {
            if let Some(k) = self.mode(idx) {
                let slot = if k >= 0 { k as usize } else { (self.fine as i64 + k) as usize };
                buf[slot] = *z;
            }
        }
        debug_assert_eq!(c.len(), m);
        self.inv_fine.process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Trigonometric interpolation onto the 3M/2 grid (Nyquist mode dropped).
    pub fn pad(&self, f: &[f64]) -> Vec<f64> {
        self.pad_coeffs(&self.forward(f))
    }

    /// Padded values of the `order`-th derivative.
    pub fn pad_derivative(&self, f: &[f64], order: u32) -> Vec<f64> {
        let mut c = self.forward(f);
        for (idx, z) in c.iter_mut().enumerate() {
            *z *= self.derivative_symbol(idx, order);
        }
        self.pad_coeffs(&c)
    }

    fn truncate_coeffs(&self, fine: &[f64]) -> Vec<Complex64> {
        assert_eq!(fine.len(), self.fine, "padded field length mismatch");
        let m = self.grid.points;
        let mut buf: Vec<Complex64> = fine.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd_fine.process(&mut buf);
        let s = 1.0 / self.fine as f64;
        let mut c = vec![Complex64::new(0.0, 0.0); m];
        for (idx, z) in c.iter_mut().enumerate() {
            if let Some(k) = self.mode(idx) {
                let slot = if k >= 0 { k as usize } else { (self.fine as i64 + k) as usize };
                *z = buf[slot] * s;
            }
        }
        c
    }

    /// Project padded values back to the grid, keeping modes `|k| < M/2`.
    pub fn truncate(&self, fine: &[f64]) -> Field {
        self.inverse(self.truncate_coeffs(fine))
    }

    /// `order`-th derivative of [`Spectral::truncate`].
    pub fn truncate_derivative(&self, fine: &[f64], order: u32) -> Field {
        let mut c = self.truncate_coeffs(fine);
        for (idx, z) in c.iter_mut().enumerate() {
            *z *= self.derivative_symbol(idx, order);
        }
        self.inverse(c)
    }

    /// `−∂ₓ T(flux) + T(source)` for padded `flux` and `source`.
    pub fn div_form(&self, flux: &[f64], source: &[f64]) -> Field {
        let cf = self.truncate_coeffs(flux);
        let cs = self.truncate_coeffs(source);
        let c: Vec<Complex64> = cf
            .iter()
            .zip(&cs)
            .enumerate()
            .map(|(idx, (f, s))| s - f * self.derivative_symbol(idx, 1))
            .collect();
        self.inverse(c)
    }

    /// Dealiased product by the 3/2 rule.
    pub fn mul(&self, f: &[f64], g: &[f64]) -> Field {
        let pf = self.pad(f);
        let pg = self.pad(g);
        let prod: Vec<f64> = pf.iter().zip(&pg).map(|(a, b)| a * b).collect();
        self.truncate(&prod)
    }
}

/// Dealiased product on `spectral`; convenience alias of [`Spectral::mul`].
pub fn multiply_dealiased(spectral: &Spectral, f: &[f64], g: &[f64]) -> Field {
    spectral.mul(f, g)
}
