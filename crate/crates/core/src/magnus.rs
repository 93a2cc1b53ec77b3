//! Average-Hamiltonian machinery for the pulse train.
//!
//! The `N`-cycle propagator factors exactly as
//! `[e^{iϑI_x} e^{iτH}]^N = (Π_{n=1..N} e^{iτH^(n)}) · e^{iNϑI_x}` with toggling-frame
//! Hamiltonians `H^(n) = e^{inϑI_x} H e^{−inϑI_x}` and the `n = 1` factor leftmost.
//! The first two Magnus terms of that product are
//! `H̄⁰ = (1/N) Σ H^(n)` and `H̄¹ = (iτ/2N) Σ_{n<ℓ} [H^(n), H^(ℓ)]`.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SpinNetwork;
use crate::linalg::{power_by_squaring, HermitianSpectrum};
use crate::sequence::SequenceParams;
use crate::spin_algebra::{
    build_dephasing, build_double_quantum, build_flip_flop, build_isotropic, build_tilted_flip_flop,
    build_weighted_single, collective_operator, collective_x_rotation_halfturns, commutator, Axis, CMatrix,
    HamiltonianPair, Operator, Role,
};
use crate::trig::{cos_pi, sin_cos_pi, sin_pi};

/// Largest pulse count accepted by [`magnus1_direct`].
pub const MAX_DIRECT_FIRST_ORDER: usize = 512;

/// Below this `|Nε|` the grating function uses its series about `ϑ = kπ`.
const GRATING_SERIES_CUTOFF: f64 = 1e-4;

/// `G(ϑ) = sin(Nϑ) / (N sin ϑ)`, continuous through `ϑ = kπ` where it equals `(−1)^{k(N−1)}`.
pub fn grating(theta: f64, n: usize) -> f64 {
    grating_halfturns(theta / PI, n)
}

/// [`grating`] with the angle in units of π.
pub fn grating_halfturns(u: f64, n: usize) -> f64 {
    assert!(n >= 1, "grating needs n >= 1");
    if n == 1 {
        return 1.0;
    }
    let nf = n as f64;
    let k = u.round();
    let eps = (u - k) * PI;
    if (nf * eps).abs() < GRATING_SERIES_CUTOFF {
        // parity of k(N−1) decides the sign of the peak
        let k_odd = (k.rem_euclid(2.0)) == 1.0;
        let sign = if k_odd && (n - 1) % 2 == 1 { -1.0 } else { 1.0 };
        return sign * (1.0 - (nf * nf - 1.0) * eps * eps / 6.0);
    }
    sin_pi(nf * u) / (nf * sin_pi(u))
}

/// `(f1, f2, f3)` weighting the first-order dipolar commutators.
///
/// `f1 = (1/2N) Σ_{k=1}^{N} (2k−1−N) cos 2kϑ`, `f2` likewise with `sin`, and
/// `f3 = (1/2N) Σ_{m=1}^{N−1} (N−m) sin 2mϑ`; these equal the double sums over
/// ordered frame pairs.
pub fn filter_functions(theta: f64, n: usize) -> (f64, f64, f64) {
    filter_functions_halfturns(theta / PI, n)
}

pub fn filter_functions_halfturns(u: f64, n: usize) -> (f64, f64, f64) {
    let nf = n as f64;
    let (mut f1, mut f2, mut f3) = (0.0, 0.0, 0.0);
    for k in 1..=n {
        let (s, c) = sin_cos_pi(2.0 * k as f64 * u);
        let w = (2 * k) as f64 - 1.0 - nf;
        f1 += w * c;
        f2 += w * s;
        if k < n {
            f3 += (n - k) as f64 * s;
        }
    }
    let norm = 2.0 * nf;
    (f1 / norm, f2 / norm, f3 / norm)
}

fn check_dims(a: &Operator, b: &Operator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(())
}

fn conjugate_by(h: &CMatrix, r: &CMatrix) -> CMatrix {
    r * h * r.adjoint()
}

/// `H^(n) = e^{inϑI_x} H e^{−inϑI_x}`.
pub fn toggling_hamiltonian(h: &Operator, theta: f64, n: i64) -> Result<Operator> {
    let ns = h.num_spins();
    if h.dim() != 1 << ns {
        return Err(Error::DimensionMismatch { left: h.dim(), right: 1 << ns });
    }
    if n == 0 {
        return Ok(h.clone());
    }
    let r = collective_x_rotation_halfturns(n as f64 * theta / PI, ns)?;
    Ok(Operator::from_parts(conjugate_by(h.matrix(), r.matrix()), Role::Hamiltonian).hermitian_part())
}

/// Toggling frames `H^(1) .. H^(N)`.
pub fn toggling_frames(h: &Operator, theta: f64, n: usize) -> Result<Vec<CMatrix>> {
    let ns = h.num_spins();
    let u = theta / PI;
    (1..=n)
        .map(|k| {
            let r = collective_x_rotation_halfturns(k as f64 * u, ns)?;
            Ok(conjugate_by(h.matrix(), r.matrix()))
        })
        .collect()
}

/// `(1/N) Σ_{n=1}^{N} H^(n)` by explicit summation.
pub fn magnus0_direct(h: &Operator, theta: f64, n: usize) -> Result<Operator> {
    if n == 0 {
        return Err(Error::InvalidInputs("need at least one pulse".into()));
    }
    let frames = toggling_frames(h, theta, n)?;
    let mut sum = CMatrix::zeros(h.dim(), h.dim());
    for f in &frames {
        sum += f;
    }
    Ok(Operator::from_parts(sum / Complex64::new(n as f64, 0.0), Role::Hamiltonian).hermitian_part())
}

/// `(iτ/2N) Σ_{k<ℓ} [H^(k), H^(ℓ)]` by explicit summation over frames.
pub fn magnus1_direct(h: &Operator, theta: f64, n: usize, tau: f64) -> Result<Operator> {
    if n > MAX_DIRECT_FIRST_ORDER {
        return Err(Error::CapacityExceeded { ns: n, max: MAX_DIRECT_FIRST_ORDER });
    }
    if n == 0 {
        return Err(Error::InvalidInputs("need at least one pulse".into()));
    }
    let frames = toggling_frames(h, theta, n)?;
    let dim = h.dim();
    let mut acc = CMatrix::zeros(dim, dim);
    // Σ_{k<ℓ} [H_k, H_ℓ] = Σ_ℓ [S_{ℓ−1}, H_ℓ] with S the running sum
    let mut prefix = CMatrix::zeros(dim, dim);
    for f in &frames {
        acc += &prefix * f - f * &prefix;
        prefix += f;
    }
    let scale = Complex64::new(0.0, tau / (2.0 * n as f64));
    Ok(Operator::from_parts(acc * scale, Role::Hamiltonian).hermitian_part())
}

/// Two-spin building blocks of the secular dipolar Hamiltonian, rad/s.
#[derive(Debug, Clone)]
pub struct DipolarParts {
    /// `Σ d (I_zI_z + I_yI_y)`
    pub flip_flop: Operator,
    /// `Σ d (I_zI_z − I_yI_y)`
    pub double_quantum: Operator,
    /// `Σ d (I_zI_y + I_yI_z)`
    pub tilted_flip_flop: Operator,
    /// `Σ d I·I`
    pub isotropic: Operator,
}

impl DipolarParts {
    pub fn from_network(network: &SpinNetwork) -> Result<Self> {
        Ok(Self {
            flip_flop: build_flip_flop(network)?,
            double_quantum: build_double_quantum(network)?,
            tilted_flip_flop: build_tilted_flip_flop(network)?,
            isotropic: build_isotropic(network)?,
        })
    }

    /// The frame-invariant part `(3/2) H_ff − Σ d I·I`.
    pub fn invariant(&self) -> CMatrix {
        self.flip_flop.matrix() * Complex64::new(1.5, 0.0) - self.isotropic.matrix()
    }
}

/// Closed-form zeroth-order dipolar average:
/// `Σ d [(3/2)(H_ff + G cos((N+1)ϑ) H_dq + G sin((N+1)ϑ) H̃_ff) − I·I]`.
pub fn magnus0_dipolar_closed(network: &SpinNetwork, theta: f64, n: usize) -> Result<Operator> {
    let parts = DipolarParts::from_network(network)?;
    Ok(magnus0_dipolar_from_parts(&parts, theta / PI, n))
}

fn magnus0_dipolar_from_parts(parts: &DipolarParts, u: f64, n: usize) -> Operator {
    let g = grating_halfturns(u, n);
    let (s, c) = sin_cos_pi((n as f64 + 1.0) * u);
    let m = parts.invariant()
        + parts.double_quantum.matrix() * Complex64::new(1.5 * g * c, 0.0)
        + parts.tilted_flip_flop.matrix() * Complex64::new(1.5 * g * s, 0.0);
    Operator::from_parts(m, Role::Hamiltonian)
}

/// `I_z` and `I_y` sums weighted by the on-site fields, rad/s.
fn dephasing_axes(network: &SpinNetwork) -> Result<(Operator, Operator)> {
    Ok((build_dephasing(network)?, build_weighted_single(&network.dephasing_c, Axis::Y)?))
}

/// Closed-form zeroth-order dephasing average:
/// `Σ c_j G(ϑ/2) [I_jz cos((N+1)ϑ/2) + I_jy sin((N+1)ϑ/2)]`.
pub fn magnus0_dephasing_closed(network: &SpinNetwork, theta: f64, n: usize) -> Result<Operator> {
    let u = theta / PI;
    let (hz, hy) = dephasing_axes(network)?;
    let g = grating_halfturns(u / 2.0, n);
    let (s, c) = sin_cos_pi((n as f64 + 1.0) * u / 2.0);
    let m = hz.matrix() * Complex64::new(g * c, 0.0) + hy.matrix() * Complex64::new(g * s, 0.0);
    Ok(Operator::from_parts(m, Role::Hamiltonian))
}

fn comm(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Closed-form first-order dipolar term
/// `iτ [(3/2) f1 [B, D] + (3/2) f2 [B, T] + (9/4) f3 [D, T]]`,
/// with `B = (3/2) H_ff − I·I`, `D = H_dq`, `T = H̃_ff` summed over pairs.
pub fn magnus1_dipolar_closed(network: &SpinNetwork, theta: f64, n: usize, tau: f64) -> Result<Operator> {
    magnus1_dipolar_with_filters(network, filter_functions(theta, n), tau)
}

/// The first-order dipolar term for given filter values `(f1, f2, f3)`.
pub fn magnus1_dipolar_with_filters(network: &SpinNetwork, filters: (f64, f64, f64), tau: f64) -> Result<Operator> {
    let parts = DipolarParts::from_network(network)?;
    Ok(magnus1_dipolar_from_parts(&parts, filters, tau))
}

fn magnus1_dipolar_from_parts(parts: &DipolarParts, f: (f64, f64, f64), tau: f64) -> Operator {
    let (f1, f2, f3) = f;
    let b = parts.invariant();
    let d = parts.double_quantum.matrix();
    let t = parts.tilted_flip_flop.matrix();
    let m = comm(&b, d) * Complex64::new(1.5 * f1, 0.0)
        + comm(&b, t) * Complex64::new(1.5 * f2, 0.0)
        + comm(d, t) * Complex64::new(2.25 * f3, 0.0);
    Operator::from_parts(m * Complex64::new(0.0, tau), Role::Hamiltonian).hermitian_part()
}

/// Closed-form first-order dephasing term `τ Σ_j c_j² f3(ϑ/2) I_jx` (c in rad/s).
pub fn magnus1_dephasing_closed(network: &SpinNetwork, theta: f64, n: usize, tau: f64) -> Result<Operator> {
    let (_, _, f3) = filter_functions(theta / 2.0, n);
    let c2: Vec<f64> = network.dephasing_c.iter().map(|c| 2.0 * PI * c * c).collect();
    // build_weighted_single multiplies by 2π once; c_j² in rad²/s² needs one more 2π
    let x = build_weighted_single(&c2, Axis::X)?;
    Ok(x.scaled(tau * f3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MagnusOrder {
    Zeroth,
    First,
}

impl MagnusOrder {
    pub fn from_index(order: u8) -> Result<Self> {
        match order {
            0 => Ok(Self::Zeroth),
            1 => Ok(Self::First),
            _ => Err(Error::InvalidInputs(format!("Magnus order {order} not supported (0 or 1)"))),
        }
    }
}

/// Average Hamiltonians of one instance and their distance from the exact propagator.
#[derive(Debug, Clone)]
pub struct MagnusReport {
    pub h_bar_0: Operator,
    pub h_bar_1: Operator,
    pub grating_value: f64,
    pub filter_values: (f64, f64, f64),
    /// `‖[H̄⁰, I_x]‖_F`
    pub commutator_with_init: f64,
    /// `‖Π e^{iτH^(n)} − exp(iNτ Σ_{k≤order} H̄^(k))‖_F`
    pub propagator_error: f64,
    pub order: MagnusOrder,
    /// `τ ‖H‖_F`
    pub tau_norm: f64,
    /// Set when `τ‖H‖_F ≥ 1`, where the expansion is not expected to converge.
    pub divergence_warning: bool,
}

#[derive(Serialize)]
struct MatrixJson {
    dim: usize,
    /// Row-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
}

impl From<&Operator> for MatrixJson {
    fn from(op: &Operator) -> Self {
        let m = op.matrix();
        let dim = m.nrows();
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self { dim, entries }
    }
}

impl MagnusReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "order": match self.order { MagnusOrder::Zeroth => 0, MagnusOrder::First => 1 },
            "grating_value": self.grating_value,
            "filter_values": { "f1": self.filter_values.0, "f2": self.filter_values.1, "f3": self.filter_values.2 },
            "commutator_with_init": self.commutator_with_init,
            "propagator_error": self.propagator_error,
            "tau_norm": self.tau_norm,
            "divergence_warning": self.divergence_warning,
            "h_bar_0": MatrixJson::from(&self.h_bar_0),
            "h_bar_1": MatrixJson::from(&self.h_bar_1),
        })
    }
}

/// Toggling-frame product `Π_{n=1..N} e^{iτH^(n)}`, obtained from the cycle power
/// with the residual rotation `e^{iNϑI_x}` removed.
pub fn toggling_product(h: &Operator, seq: &SequenceParams) -> Result<CMatrix> {
    let ns = h.num_spins();
    let u = seq.theta_halfturns();
    let free = HermitianSpectrum::new(h.matrix())?.exp_i(seq.tau());
    let pulse = collective_x_rotation_halfturns(u, ns)?;
    let cycle = pulse.matrix() * free;
    let n = seq.n_pulses;
    let residual_inv = collective_x_rotation_halfturns(-(n as f64) * u, ns)?;
    Ok(power_by_squaring(&cycle, n as u64) * residual_inv.matrix())
}

/// Compares the truncated Magnus propagator `exp(iNτH̄)` with the exact toggling product.
///
/// Both orders are evaluated by direct frame sums on the full `H = H_dd + H_z`, so the
/// first-order term includes dipolar–dephasing cross commutators; pulse counts above
/// [`MAX_DIRECT_FIRST_ORDER`] are rejected for the first order.
pub fn compare_with_exact(pair: &HamiltonianPair, seq: &SequenceParams, order: MagnusOrder) -> Result<MagnusReport> {
    seq.validate()?;
    let h = pair.total();
    let n = seq.n_pulses;
    let tau = seq.tau();
    let tau_norm = tau * h.frobenius_norm();
    let divergence_warning = tau_norm >= 1.0;
    if divergence_warning {
        warn!("τ‖H‖ = {tau_norm:.3} >= 1: Magnus expansion not expected to converge");
    }
    let h0 = magnus0_direct(&h, seq.theta, n)?;
    let h1 = if n >= 2 && (order == MagnusOrder::First || n <= MAX_DIRECT_FIRST_ORDER) {
        magnus1_direct(&h, seq.theta, n, tau)?
    } else {
        Operator::zeros(h.dim(), Role::Hamiltonian)
    };
    let generator = match order {
        MagnusOrder::Zeroth => h0.clone(),
        MagnusOrder::First => h0.try_add(&h1)?,
    };
    let approx = HermitianSpectrum::new(generator.matrix())?.exp_i(n as f64 * tau);
    let exact = toggling_product(&h, seq)?;
    let ix = collective_operator(Axis::X, h.num_spins())?;
    Ok(MagnusReport {
        commutator_with_init: commutator(&h0, &ix)?.frobenius_norm(),
        h_bar_0: h0,
        h_bar_1: h1,
        grating_value: grating(seq.theta, n),
        filter_values: if n >= 2 { filter_functions(seq.theta, n) } else { (0.0, 0.0, 0.0) },
        propagator_error: (exact - approx).norm(),
        order,
        tau_norm,
        divergence_warning,
    })
}

/// Relative Frobenius distance `‖A − B‖ / max(‖A‖, ‖B‖)` (0 when both vanish).
pub fn relative_error(a: &Operator, b: &Operator) -> Result<f64> {
    check_dims(a, b)?;
    let scale = a.frobenius_norm().max(b.frobenius_norm());
    let d = a.distance(b)?;
    Ok(if scale == 0.0 { d } else { d / scale })
}

/// `Σ_{k=1}^{N} cos 2kϑ` and `Σ sin 2kϑ` via the grating identity.
pub fn trig_sums_closed(theta: f64, n: usize) -> (f64, f64) {
    let u = theta / PI;
    let g = n as f64 * grating_halfturns(u, n);
    let a = (n as f64 + 1.0) * u;
    (g * cos_pi(a), g * sin_pi(a))
}
