//! Dense many-body spin-½ operators on the `2^Ns` Hilbert space.
//!
//! Basis convention: spin 0 is the most significant bit of the basis index, and a
//! cleared bit means spin up (`I_z = +½`). All Hamiltonians built here carry angular
//! frequency (rad/s); the Hz values stored on a [`SpinNetwork`] are converted on entry.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SpinNetwork;

/// Largest network handled by the dense representation (dimension 4096).
pub const MAX_SPINS: usize = 12;

pub type CMatrix = DMatrix<Complex64>;

#[cfg(test)]
pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
#[cfg(test)]
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Hamiltonian,
    Unitary,
    Density,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Action of `σ_axis / 2` on a single spin in basis state `bit`: returns the
    /// amplitude and the resulting bit.
    fn act(self, bit: usize) -> (Complex64, usize) {
        match self {
            Axis::X => (Complex64::new(0.5, 0.0), bit ^ 1),
            Axis::Y => {
                if bit == 0 {
                    (Complex64::new(0.0, 0.5), 1)
                } else {
                    (Complex64::new(0.0, -0.5), 0)
                }
            }
            Axis::Z => {
                if bit == 0 {
                    (Complex64::new(0.5, 0.0), 0)
                } else {
                    (Complex64::new(-0.5, 0.0), 1)
                }
            }
        }
    }
}

/// A dense complex operator with a role tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    role: Role,
}

impl Operator {
    pub fn new(matrix: CMatrix, role: Role) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                left: matrix.nrows(),
                right: matrix.ncols(),
            });
        }
        Ok(Self { matrix, role })
    }

    pub(crate) fn from_parts(matrix: CMatrix, role: Role) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        Self { matrix, role }
    }

    pub fn zeros(dim: usize, role: Role) -> Self {
        Self::from_parts(CMatrix::zeros(dim, dim), role)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(CMatrix::identity(dim, dim), Role::Unitary)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_spins(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Operator {
        Self::from_parts(self.matrix.adjoint(), self.role)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Largest entrywise `|A − A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `‖A†A − 1‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        (self.matrix.adjoint() * &self.matrix - CMatrix::identity(n, n)).norm()
    }

    /// Real scalar multiple, keeping the role.
    pub fn scaled(&self, factor: f64) -> Operator {
        Self::from_parts(self.matrix.map(|z| z * factor), self.role)
    }

    pub fn try_add(&self, other: &Operator) -> Result<Operator> {
        check_dims(self, other)?;
        Ok(Self::from_parts(&self.matrix + &other.matrix, self.role))
    }

    pub fn try_sub(&self, other: &Operator) -> Result<Operator> {
        check_dims(self, other)?;
        Ok(Self::from_parts(&self.matrix - &other.matrix, self.role))
    }

    pub fn try_mul(&self, other: &Operator) -> Result<Operator> {
        check_dims(self, other)?;
        Ok(Self::from_parts(&self.matrix * &other.matrix, Role::Generic))
    }

    /// Frobenius distance `‖A − B‖_F`.
    pub fn distance(&self, other: &Operator) -> Result<f64> {
        check_dims(self, other)?;
        Ok((&self.matrix - &other.matrix).norm())
    }

    /// Hermitian part `(A + A†)/2`, for scrubbing rounding asymmetry.
    pub fn hermitian_part(&self) -> Operator {
        let m = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        Self::from_parts(m, self.role)
    }
}

fn check_dims(a: &Operator, b: &Operator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

pub fn frobenius_norm(op: &Operator) -> f64 {
    op.frobenius_norm()
}

/// `[A, B] = AB − BA`.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    check_dims(a, b)?;
    let m = &a.matrix * &b.matrix - &b.matrix * &a.matrix;
    Ok(Operator::from_parts(m, Role::Generic))
}

pub(crate) fn check_capacity(ns: usize) -> Result<()> {
    if ns == 0 || ns > MAX_SPINS {
        return Err(Error::CapacityExceeded { ns, max: MAX_SPINS });
    }
    Ok(())
}

#[inline]
fn bit_of(state: usize, ns: usize, spin: usize) -> usize {
    (state >> (ns - 1 - spin)) & 1
}

#[inline]
fn with_bit(state: usize, ns: usize, spin: usize, bit: usize) -> usize {
    let shift = ns - 1 - spin;
    (state & !(1 << shift)) | (bit << shift)
}

/// Accumulates `coef · Π_f I_{spin_f, axis_f}` into `m` (spins in a product must differ).
pub(crate) fn add_product(m: &mut CMatrix, ns: usize, factors: &[(usize, Axis)], coef: Complex64) {
    let dim = 1usize << ns;
    for col in 0..dim {
        let mut amp = coef;
        let mut row = col;
        for &(spin, axis) in factors.iter().rev() {
            let (a, b) = axis.act(bit_of(row, ns, spin));
            amp *= a;
            row = with_bit(row, ns, spin, b);
        }
        m[(row, col)] += amp;
    }
}

/// Single-spin operator `I_{spin, axis}` embedded in `ns` spins.
pub fn single_spin_operator(axis: Axis, spin: usize, ns: usize) -> Result<Operator> {
    check_capacity(ns)?;
    if spin >= ns {
        return Err(Error::DimensionMismatch { left: spin, right: ns });
    }
    let mut m = CMatrix::zeros(1 << ns, 1 << ns);
    add_product(&mut m, ns, &[(spin, axis)], ONE);
    Ok(Operator::from_parts(m, Role::Hamiltonian))
}

/// Two-spin product `I_{j,a} I_{k,b}` (j ≠ k).
pub fn two_spin_operator(j: usize, a: Axis, k: usize, b: Axis, ns: usize) -> Result<Operator> {
    check_capacity(ns)?;
    if j >= ns || k >= ns || j == k {
        return Err(Error::InvalidInputs(format!("bad spin pair ({j}, {k}) for {ns} spins")));
    }
    let mut m = CMatrix::zeros(1 << ns, 1 << ns);
    add_product(&mut m, ns, &[(j, a), (k, b)], ONE);
    Ok(Operator::from_parts(m, Role::Hamiltonian))
}

/// Collective spin `Σ_j I_{j,axis}`.
pub fn collective_operator(axis: Axis, ns: usize) -> Result<Operator> {
    check_capacity(ns)?;
    let mut m = CMatrix::zeros(1 << ns, 1 << ns);
    for spin in 0..ns {
        add_product(&mut m, ns, &[(spin, axis)], ONE);
    }
    Ok(Operator::from_parts(m, Role::Hamiltonian))
}

/// Deviation density operator `ρ = I_x`.
pub fn transverse_state(ns: usize) -> Result<Operator> {
    Ok(collective_operator(Axis::X, ns)?.with_role(Role::Density))
}

/// `exp(i·angle·I_x)` as a Kronecker product of single-spin rotations.
///
/// `angle` is given in half-turns (units of π) so rational multiples of π are exact.
pub fn collective_x_rotation_halfturns(angle_halfturns: f64, ns: usize) -> Result<Operator> {
    check_capacity(ns)?;
    // exp(iφσx/2) = cos(φ/2) + i sin(φ/2) σx
    let c = crate::trig::cos_pi(angle_halfturns / 2.0);
    let s = crate::trig::sin_pi(angle_halfturns / 2.0);
    let single = [[Complex64::new(c, 0.0), Complex64::new(0.0, s)], [Complex64::new(0.0, s), Complex64::new(c, 0.0)]];
    let dim = 1usize << ns;
    let m = CMatrix::from_fn(dim, dim, |row, col| {
        let mut z = ONE;
        for spin in 0..ns {
            z *= single[bit_of(row, ns, spin)][bit_of(col, ns, spin)];
        }
        z
    });
    Ok(Operator::from_parts(m, Role::Unitary))
}

/// `exp(i·angle·I_x)` for an angle in radians.
pub fn collective_x_rotation(angle: f64, ns: usize) -> Result<Operator> {
    collective_x_rotation_halfturns(angle / PI, ns)
}

/// Builds `Σ_{j<k} w_jk · (pair operator)`, weights in Hz, result in rad/s.
fn pair_sum(network: &SpinNetwork, mut term: impl FnMut(&mut CMatrix, usize, usize, usize, Complex64)) -> Result<Operator> {
    let ns = network.num_spins();
    check_capacity(ns)?;
    let mut m = CMatrix::zeros(1 << ns, 1 << ns);
    for (j, k, d) in network.pairs() {
        if d != 0.0 {
            term(&mut m, ns, j, k, Complex64::new(2.0 * PI * d, 0.0));
        }
    }
    Ok(Operator::from_parts(m, Role::Hamiltonian))
}

/// Secular dipolar Hamiltonian `Σ_{j<k} d_jk (3 I_jz I_kz − I_j·I_k)` in rad/s.
pub fn build_dipolar(network: &SpinNetwork) -> Result<Operator> {
    pair_sum(network, |m, ns, j, k, w| {
        add_product(m, ns, &[(j, Axis::Z), (k, Axis::Z)], w * 2.0);
        add_product(m, ns, &[(j, Axis::X), (k, Axis::X)], -w);
        add_product(m, ns, &[(j, Axis::Y), (k, Axis::Y)], -w);
    })
}

/// Flip-flop sum `Σ d_jk (I_jz I_kz + I_jy I_ky)`, rad/s.
pub fn build_flip_flop(network: &SpinNetwork) -> Result<Operator> {
    pair_sum(network, |m, ns, j, k, w| {
        add_product(m, ns, &[(j, Axis::Z), (k, Axis::Z)], w);
        add_product(m, ns, &[(j, Axis::Y), (k, Axis::Y)], w);
    })
}

/// Double-quantum sum `Σ d_jk (I_jz I_kz − I_jy I_ky)`, rad/s.
pub fn build_double_quantum(network: &SpinNetwork) -> Result<Operator> {
    pair_sum(network, |m, ns, j, k, w| {
        add_product(m, ns, &[(j, Axis::Z), (k, Axis::Z)], w);
        add_product(m, ns, &[(j, Axis::Y), (k, Axis::Y)], -w);
    })
}

/// Tilted flip-flop sum `Σ d_jk (I_jz I_ky + I_jy I_kz)`, rad/s.
pub fn build_tilted_flip_flop(network: &SpinNetwork) -> Result<Operator> {
    pair_sum(network, |m, ns, j, k, w| {
        add_product(m, ns, &[(j, Axis::Z), (k, Axis::Y)], w);
        add_product(m, ns, &[(j, Axis::Y), (k, Axis::Z)], w);
    })
}

/// Isotropic sum `Σ d_jk I_j·I_k`, rad/s.
pub fn build_isotropic(network: &SpinNetwork) -> Result<Operator> {
    pair_sum(network, |m, ns, j, k, w| {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            add_product(m, ns, &[(j, axis), (k, axis)], w);
        }
    })
}

/// Weighted single-spin sum `Σ_j w_j I_{j,axis}` with weights in Hz, result in rad/s.
pub fn build_weighted_single(weights_hz: &[f64], axis: Axis) -> Result<Operator> {
    let ns = weights_hz.len();
    check_capacity(ns)?;
    let mut m = CMatrix::zeros(1 << ns, 1 << ns);
    for (spin, &w) in weights_hz.iter().enumerate() {
        if w != 0.0 {
            add_product(&mut m, ns, &[(spin, axis)], Complex64::new(2.0 * PI * w, 0.0));
        }
    }
    Ok(Operator::from_parts(m, Role::Hamiltonian))
}

/// On-site dephasing `Σ_j c_j I_jz` in rad/s.
pub fn build_dephasing(network: &SpinNetwork) -> Result<Operator> {
    build_weighted_single(&network.dephasing_c, Axis::Z)
}

/// Dipolar and dephasing parts of one manifestation's Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianPair {
    pub h_dd: Operator,
    pub h_z: Operator,
    /// `‖h_dd‖_F / ‖h_z‖_F`; infinite when `h_z` vanishes.
    pub ratio_dd_over_z: f64,
}

impl HamiltonianPair {
    pub fn new(h_dd: Operator, h_z: Operator) -> Result<Self> {
        check_dims(&h_dd, &h_z)?;
        let ratio_dd_over_z = norm_ratio(&h_dd, &h_z);
        Ok(Self { h_dd, h_z, ratio_dd_over_z })
    }

    pub fn from_network(network: &SpinNetwork) -> Result<Self> {
        Self::new(build_dipolar(network)?, build_dephasing(network)?)
    }

    pub fn dim(&self) -> usize {
        self.h_dd.dim()
    }

    pub fn num_spins(&self) -> usize {
        self.h_dd.num_spins()
    }

    /// `H = H_dd + H_z`.
    pub fn total(&self) -> Operator {
        Operator::from_parts(self.h_dd.matrix() + self.h_z.matrix(), Role::Hamiltonian)
    }

    /// Scales both parts by the same positive factor.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            h_dd: self.h_dd.scaled(factor),
            h_z: self.h_z.scaled(factor),
            ratio_dd_over_z: self.ratio_dd_over_z,
        }
    }
}

fn norm_ratio(h_dd: &Operator, h_z: &Operator) -> f64 {
    let nz = h_z.frobenius_norm();
    let nd = h_dd.frobenius_norm();
    if nz == 0.0 {
        if nd == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        nd / nz
    }
}

/// Rescales `h_dd` so that `‖h_dd‖_F / ‖h_z‖_F` equals `target_ratio`; `h_z` is untouched.
pub fn rescale_to_ratio(pair: &HamiltonianPair, target_ratio: f64) -> Result<HamiltonianPair> {
    if !(target_ratio >= 0.0) || !target_ratio.is_finite() {
        return Err(Error::InvalidInputs(format!("target ratio must be finite and >= 0, got {target_ratio}")));
    }
    let nz = pair.h_z.frobenius_norm();
    if nz == 0.0 {
        return Err(Error::ZeroDephasingNorm);
    }
    let nd = pair.h_dd.frobenius_norm();
    let h_dd = if target_ratio == 0.0 {
        Operator::zeros(pair.dim(), Role::Hamiltonian)
    } else if nd == 0.0 {
        return Err(Error::InvalidInputs("dipolar Hamiltonian has zero norm; cannot reach a positive ratio".into()));
    } else {
        let current = nd / nz;
        if current == target_ratio {
            pair.h_dd.clone()
        } else {
            pair.h_dd.scaled(target_ratio * nz / nd)
        }
    };
    HamiltonianPair::new(h_dd, pair.h_z.clone())
}

/// Dense Kronecker product, used by tests as an independent construction route.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_half(axis: Axis) -> CMatrix {
        let h = Complex64::new(0.5, 0.0);
        match axis {
            Axis::X => CMatrix::from_row_slice(2, 2, &[ZERO, h, h, ZERO]),
            Axis::Y => CMatrix::from_row_slice(2, 2, &[ZERO, -I * 0.5, I * 0.5, ZERO]),
            Axis::Z => CMatrix::from_row_slice(2, 2, &[h, ZERO, ZERO, -h]),
        }
    }

    fn embed(axis: Axis, spin: usize, ns: usize) -> CMatrix {
        let mut m = CMatrix::identity(1, 1);
        for s in 0..ns {
            let f = if s == spin { pauli_half(axis) } else { CMatrix::identity(2, 2) };
            m = kron(&m, &f);
        }
        m
    }

    #[test]
    fn single_spin_x_is_half_pauli() {
        let x = collective_operator(Axis::X, 1).unwrap();
        assert_eq!(x.matrix(), &pauli_half(Axis::X));
    }

    #[test]
    fn two_spin_z_eigenvalues() {
        let z = collective_operator(Axis::Z, 2).unwrap();
        let d: Vec<f64> = (0..4).map(|i| z.matrix()[(i, i)].re).collect();
        assert_eq!(d, vec![1.0, 0.0, 0.0, -1.0]);
        assert!(z.trace().norm() == 0.0);
    }

    #[test]
    fn bit_construction_matches_kron() {
        for ns in 1..=4 {
            for spin in 0..ns {
                for axis in [Axis::X, Axis::Y, Axis::Z] {
                    let a = single_spin_operator(axis, spin, ns).unwrap();
                    assert!((a.matrix() - embed(axis, spin, ns)).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn angular_momentum_algebra() {
        let ns = 3;
        let x = collective_operator(Axis::X, ns).unwrap();
        let y = collective_operator(Axis::Y, ns).unwrap();
        let z = collective_operator(Axis::Z, ns).unwrap();
        let c = commutator(&x, &y).unwrap();
        let iz = z.matrix() * I;
        assert!((c.matrix() - iz).norm() < 1e-14);
    }

    #[test]
    fn commutator_basics() {
        let x = collective_operator(Axis::X, 2).unwrap();
        assert_eq!(commutator(&x, &x).unwrap().frobenius_norm(), 0.0);
        let other = collective_operator(Axis::X, 3).unwrap();
        assert!(matches!(commutator(&x, &other), Err(Error::DimensionMismatch { .. })));
        assert_eq!(frobenius_norm(&Operator::identity(4)), 2.0);
    }

    #[test]
    fn dipolar_pair_spectrum() {
        let d = 1.0 / (2.0 * PI);
        let net = SpinNetwork::from_couplings(vec![vec![0.0, d], vec![d, 0.0]], vec![0.0, 0.0]).unwrap();
        let h = build_dipolar(&net).unwrap();
        let mut ev: Vec<f64> = h.matrix().clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let expect = [-1.0, 0.0, 0.5, 0.5];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
        assert!(h.trace().norm() < 1e-14);
    }

    #[test]
    fn dephasing_is_diagonal_sign_patterns() {
        let c = [100.0, 37.0, -12.5];
        let net = SpinNetwork::from_couplings(vec![vec![0.0; 3]; 3], c.to_vec()).unwrap();
        let h = build_dephasing(&net).unwrap();
        for row in 0..8 {
            let mut expect = 0.0;
            for (spin, cj) in c.iter().enumerate() {
                let sign = if bit_of(row, 3, spin) == 0 { 0.5 } else { -0.5 };
                expect += 2.0 * PI * cj * sign;
            }
            assert!((h.matrix()[(row, row)].re - expect).abs() < 1e-10);
            for col in 0..8 {
                if col != row {
                    assert_eq!(h.matrix()[(row, col)], ZERO);
                }
            }
        }
        assert_eq!(build_dipolar(&net).unwrap().frobenius_norm(), 0.0);
    }

    #[test]
    fn rescaling() {
        let net = SpinNetwork::from_couplings(
            vec![vec![0.0, 50.0, -20.0], vec![50.0, 0.0, 10.0], vec![-20.0, 10.0, 0.0]],
            vec![300.0, -200.0, 150.0],
        )
        .unwrap();
        let pair = HamiltonianPair::from_network(&net).unwrap();
        let same = rescale_to_ratio(&pair, pair.ratio_dd_over_z).unwrap();
        assert!((same.h_dd.matrix() - pair.h_dd.matrix()).norm() <= 1e-15 * pair.h_dd.frobenius_norm());
        let four = rescale_to_ratio(&pair, 4.0).unwrap();
        assert!((four.h_dd.frobenius_norm() / four.h_z.frobenius_norm() - 4.0).abs() < 1e-12);
        assert_eq!(four.h_z, pair.h_z);
        let zero = rescale_to_ratio(&pair, 0.0).unwrap();
        assert_eq!(zero.h_dd.frobenius_norm(), 0.0);
        let no_z = HamiltonianPair::new(pair.h_dd.clone(), Operator::zeros(8, Role::Hamiltonian)).unwrap();
        assert_eq!(rescale_to_ratio(&no_z, 1.0), Err(Error::ZeroDephasingNorm));
    }

    #[test]
    fn rotation_matches_closed_form() {
        let r = collective_x_rotation(PI / 2.0, 1).unwrap();
        let c = (PI / 4.0).cos();
        assert!((r.matrix()[(0, 0)].re - c).abs() < 1e-15);
        assert!((r.matrix()[(0, 1)].im - c).abs() < 1e-15);
        let full = collective_x_rotation(2.0 * PI, 3).unwrap();
        assert!((full.matrix() + CMatrix::identity(8, 8)).norm() == 0.0);
    }

    #[test]
    fn capacity_enforced() {
        assert!(matches!(collective_operator(Axis::X, 13), Err(Error::CapacityExceeded { .. })));
        assert!(matches!(collective_operator(Axis::X, 0), Err(Error::CapacityExceeded { .. })));
    }
}
