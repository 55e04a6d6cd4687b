use crate::error::{Error, Result};
use crate::field::{self, Field};

/// Physical and expansion parameters of the two-layer model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub rho1: f64,
    pub rho2: f64,
    pub h1: f64,
    pub h2: f64,
    pub grav: f64,
    /// Number of even-power terms in the upper layer, `N`.
    pub n_upper: usize,
    /// Lower-layer exponents `p_0 = 0 < p_1 < … < p_{N*}`.
    pub p_list: Vec<u32>,
    /// Bottom topography `b(x)` on the grid; zero mean.
    pub bottom: Field,
}

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rho1: f64,
        rho2: f64,
        h1: f64,
        h2: f64,
        grav: f64,
        n_upper: usize,
        p_list: Vec<u32>,
        bottom: Field,
    ) -> Result<Self> {
        let p = ModelParams { rho1, rho2, h1, h2, grav, n_upper, p_list, bottom };
        p.validate()?;
        Ok(p)
    }

    /// Flat-bottom parameters on an `m`-point grid.
    #[allow(clippy::too_many_arguments)]
    pub fn flat(
        rho1: f64,
        rho2: f64,
        h1: f64,
        h2: f64,
        grav: f64,
        n_upper: usize,
        p_list: Vec<u32>,
        m: usize,
    ) -> Result<Self> {
        Self::new(rho1, rho2, h1, h2, grav, n_upper, p_list, field::zeros(m))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        for (name, v) in [("rho1", self.rho1), ("rho2", self.rho2), ("h1", self.h1), ("h2", self.h2), ("g", self.grav)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.rho2 <= self.rho1 {
            return bad(format!("stable stratification requires rho2 > rho1, got {} <= {}", self.rho2, self.rho1));
        }
        if self.p_list.first() != Some(&0) {
            return bad("p_list must start with 0".into());
        }
        if self.p_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("p_list must be strictly increasing, got {:?}", self.p_list));
        }
        if !field::is_finite(&self.bottom) {
            return bad("bottom contains non-finite values".into());
        }
        let bmax = field::max_abs(&self.bottom);
        if !self.bottom.is_empty() {
            let m = field::mean(&self.bottom);
            if m.abs() > 1e-12 * self.h2.max(bmax) {
                return bad(format!("bottom must have zero mean, got {m:e}"));
            }
        }
        if bmax >= self.h2 {
            return bad(format!("max|b| = {bmax} must be below h2 = {}", self.h2));
        }
        Ok(())
    }

    /// `N*`
    pub fn n_lower(&self) -> usize {
        self.p_list.len() - 1
    }

    pub fn is_flat(&self) -> bool {
        self.bottom.iter().all(|&v| v == 0.0)
    }

    /// Exponents of the upper-layer basis, `2i`.
    pub fn upper_exponents(&self) -> Vec<u32> {
        (0..=self.n_upper as u32).map(|i| 2 * i).collect()
    }

    /// Shallow-water phase speed squared, `(ρ₂−ρ₁)g h₁h₂/(ρ₁h₂+ρ₂h₁)`.
    pub fn c_sw2(&self) -> f64 {
        (self.rho2 - self.rho1) * self.grav * self.h1 * self.h2 / (self.rho1 * self.h2 + self.rho2 * self.h1)
    }
}
