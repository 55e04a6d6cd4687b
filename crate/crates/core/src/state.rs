use crate::field::{self, Field, PotentialVec};

/// Interface displacement and the expansion coefficients of both layers.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub zeta: Field,
    pub phi1: PotentialVec,
    pub phi2: PotentialVec,
}

impl State {
    pub fn rest(m: usize, n_upper: usize, n_lower: usize) -> Self {
        State {
            zeta: field::zeros(m),
            phi1: vec![field::zeros(m); n_upper + 1],
            phi2: vec![field::zeros(m); n_lower + 1],
        }
    }

    pub fn is_finite(&self) -> bool {
        field::is_finite(&self.zeta)
            && self.phi1.iter().all(|f| field::is_finite(f))
            && self.phi2.iter().all(|f| field::is_finite(f))
    }

    /// `self + s·other`, componentwise.
    pub fn axpy(&self, s: f64, other: &State) -> State {
        let comb = |a: &[Field], b: &[Field]| -> PotentialVec {
            a.iter()
                .zip(b)
                .map(|(x, y)| {
                    let mut r = x.clone();
                    field::axpy(&mut r, s, y);
                    r
                })
                .collect()
        };
        let mut zeta = self.zeta.clone();
        field::axpy(&mut zeta, s, &other.zeta);
        State { zeta, phi1: comb(&self.phi1, &other.phi1), phi2: comb(&self.phi2, &other.phi2) }
    }
}

/// Canonical pair `(ζ, φ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalState {
    pub zeta: Field,
    pub phi: Field,
}

impl CanonicalState {
    pub fn rest(m: usize) -> Self {
        CanonicalState { zeta: field::zeros(m), phi: field::zeros(m) }
    }

    pub fn axpy(&self, s: f64, other: &CanonicalState) -> CanonicalState {
        let mut zeta = self.zeta.clone();
        field::axpy(&mut zeta, s, &other.zeta);
        let mut phi = self.phi.clone();
        field::axpy(&mut phi, s, &other.phi);
        CanonicalState { zeta, phi }
    }
}
