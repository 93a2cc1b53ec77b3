//! Spectral decompositions of Hermitian and unitary matrices.

use std::f64::consts::PI;

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spin_algebra::{CMatrix, Operator, Role};

/// `H = V diag(λ) V†` for a Hermitian `H`.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianSpectrum {
    pub fn new(h: &CMatrix) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch { left: h.nrows(), right: h.ncols() });
        }
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::EigenFailure("non-finite matrix entry".into()));
        }
        let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
            .ok_or_else(|| Error::EigenFailure("Hermitian eigensolver did not converge".into()))?;
        Ok(Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(e^{i t λ}) V†`.
    pub fn exp_i(&self, t: f64) -> CMatrix {
        let phases: Vec<Complex64> = self.values.iter().map(|&l| Complex64::from_polar(1.0, t * l)).collect();
        self.vectors_scaled(&phases) * self.vectors.adjoint()
    }

    /// `V diag(d)`.
    fn vectors_scaled(&self, d: &[Complex64]) -> CMatrix {
        let mut m = self.vectors.clone();
        for (j, &dj) in d.iter().enumerate() {
            for x in m.column_mut(j).iter_mut() {
                *x *= dj;
            }
        }
        m
    }
}

/// `exp(i t h)` for Hermitian `h`, via eigendecomposition.
pub fn matrix_exponential_hermitian(h: &Operator, t: f64) -> Result<Operator> {
    if t == 0.0 {
        return Ok(Operator::identity(h.dim()));
    }
    let spec = HermitianSpectrum::new(h.matrix())?;
    Ok(Operator::from_parts(spec.exp_i(t), Role::Unitary))
}

/// `U = W diag(e^{iφ}) W†` for a unitary `U`.
///
/// Obtained through the Cayley transform `C = i(1 − M)(1 + M)⁻¹`, `M = e^{−iβ}U`,
/// which is Hermitian with eigenvalues `tan((φ − β)/2)`. The shift `β` is chosen so
/// that no eigenphase sits near the pole; phases are then refined by Rayleigh quotients.
#[derive(Debug, Clone)]
pub struct UnitarySpectrum {
    pub phases: Vec<f64>,
    pub vectors: CMatrix,
}

/// Cayley eigenvalues larger than this trigger a second pass with a better shift.
const CAYLEY_LIMIT: f64 = 200.0;

impl UnitarySpectrum {
    pub fn new(u: &CMatrix) -> Result<Self> {
        let n = u.nrows();
        if n != u.ncols() {
            return Err(Error::DimensionMismatch { left: n, right: u.ncols() });
        }
        // generic first shift, away from the symmetric points where pulse spectra cluster
        let mut beta = 0.7 * PI;
        let mut attempt = cayley_pass(u, beta);
        for _ in 0..3 {
            match &attempt {
                Ok((vals, _)) if vals.iter().all(|t| t.abs() <= CAYLEY_LIMIT) => break,
                Ok((vals, _)) => {
                    let phases: Vec<f64> = vals.iter().map(|t| beta + 2.0 * t.atan()).collect();
                    beta = gap_centre(&phases) - PI;
                }
                Err(_) => beta += 0.37,
            }
            attempt = cayley_pass(u, beta);
        }
        let (_, vectors) = attempt?;
        let uw = u * &vectors;
        let phases = (0..n)
            .map(|a| {
                let q = vectors.column(a).dotc(&uw.column(a));
                q.im.atan2(q.re)
            })
            .collect();
        Ok(Self { phases, vectors })
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// `W diag(e^{i n φ}) W†`.
    pub fn power(&self, n: u64) -> CMatrix {
        let mut m = self.vectors.clone();
        for (j, &p) in self.phases.iter().enumerate() {
            let z = Complex64::from_polar(1.0, n as f64 * p);
            for x in m.column_mut(j).iter_mut() {
                *x *= z;
            }
        }
        m * self.vectors.adjoint()
    }

    /// `‖U − W diag(e^{iφ}) W†‖_F`.
    pub fn reconstruction_error(&self, u: &CMatrix) -> f64 {
        (u - self.power(1)).norm()
    }
}

fn cayley_pass(u: &CMatrix, beta: f64) -> Result<(DVector<f64>, CMatrix)> {
    let n = u.nrows();
    let m = u * Complex64::from_polar(1.0, -beta);
    let id = CMatrix::identity(n, n);
    let plus = &id + &m;
    let minus = &id - &m;
    let lu = plus.lu();
    let x = lu
        .solve(&minus)
        .ok_or_else(|| Error::EigenFailure("singular Cayley denominator".into()))?;
    let c = x * Complex64::new(0.0, 1.0);
    if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigenFailure("non-finite Cayley transform".into()));
    }
    let c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigenFailure("Cayley eigensolver did not converge".into()))?;
    Ok((eig.eigenvalues, eig.eigenvectors))
}

/// Centre of the widest empty arc between the given phases on the unit circle.
fn gap_centre(phases: &[f64]) -> f64 {
    let mut p: Vec<f64> = phases.iter().map(|x| x.rem_euclid(2.0 * PI)).collect();
    p.sort_by(f64::total_cmp);
    let mut best = (2.0 * PI - p[p.len() - 1] + p[0], p[p.len() - 1]);
    for w in p.windows(2) {
        let gap = w[1] - w[0];
        if gap > best.0 {
            best = (gap, w[0]);
        }
    }
    best.1 + best.0 / 2.0
}

/// `U† A U`.
pub fn conjugate(a: &CMatrix, u: &CMatrix) -> CMatrix {
    u.adjoint() * a * u
}

/// Repeated squaring `U^n`, an independent route to spectral powering.
pub fn power_by_squaring(u: &CMatrix, mut n: u64) -> CMatrix {
    let dim = u.nrows();
    let mut result = CMatrix::identity(dim, dim);
    let mut base = u.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(dim: usize) -> CMatrix {
        CMatrix::from_diagonal_element(dim, dim, crate::spin_algebra::ONE)
    }
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn hermitian_exp_is_unitary_and_inverts() {
        let h = random_hermitian(16, 1);
        let s = HermitianSpectrum::new(&h).unwrap();
        let u = s.exp_i(0.8);
        let v = s.exp_i(-0.8);
        assert!((&u * &v - identity(16)).norm() < 1e-12);
        assert!((u.adjoint() * &u - identity(16)).norm() < 1e-12);
    }

    #[test]
    fn unitary_spectrum_reconstructs() {
        for seed in 0..20 {
            let h = random_hermitian(32, seed) * Complex64::new(1.0 + seed as f64, 0.0);
            let u = HermitianSpectrum::new(&h).unwrap().exp_i(1.0);
            let s = UnitarySpectrum::new(&u).unwrap();
            assert!(s.reconstruction_error(&u) < 1e-11, "seed {seed}: {}", s.reconstruction_error(&u));
            let w = &s.vectors;
            assert!((w.adjoint() * w - identity(32)).norm() < 1e-11);
        }
    }

    #[test]
    fn degenerate_unitaries() {
        for m in [identity(8), identity(8) * Complex64::new(-1.0, 0.0), identity(8) * Complex64::new(0.0, 1.0)] {
            let s = UnitarySpectrum::new(&m).unwrap();
            assert!(s.reconstruction_error(&m) < 1e-13);
        }
        let mut d = identity(6);
        d[(0, 0)] = Complex64::new(-1.0, 0.0);
        d[(3, 3)] = Complex64::new(-1.0, 0.0);
        let s = UnitarySpectrum::new(&d).unwrap();
        assert!(s.reconstruction_error(&d) < 1e-13);
    }

    #[test]
    fn powering_matches_squaring() {
        let h = random_hermitian(16, 9);
        let u = HermitianSpectrum::new(&h).unwrap().exp_i(0.3);
        let s = UnitarySpectrum::new(&u).unwrap();
        let a = s.power(2000);
        let b = power_by_squaring(&u, 2000);
        assert!((a - b).norm() < 1e-9);
    }
}
