//! Exact stroboscopic propagation of the pulse train.
//!
//! Operators follow the convention `ρ_F = U† ρ_I U` with
//! `U(Nτ) = [exp(iϑI_x) exp(iτH)]^N`. With a first delay `t_1` the sampling cycle
//! becomes `K = exp(i t_1 H) exp(iϑI_x) exp(i(τ − t_1)H)`, which reduces to the
//! plain cycle when `t_1 = 0` and is what every sample `nτ` sees.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{HermitianSpectrum, UnitarySpectrum};
use crate::sequence::SequenceParams;
use crate::spin_algebra::{collective_x_rotation_halfturns, transverse_state, CMatrix, HamiltonianPair, Operator, Role};

pub use crate::linalg::matrix_exponential_hermitian;

/// Survival at or below this floor cannot be read out as a single exponential.
pub const DEFAULT_F_MIN: f64 = 1e-6;
/// Survival within this distance of 1 reads as no decay.
pub const DEFAULT_EPS_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutLimits {
    pub f_min: f64,
    pub eps_clip: f64,
}

impl Default for ReadoutLimits {
    fn default() -> Self {
        Self { f_min: DEFAULT_F_MIN, eps_clip: DEFAULT_EPS_CLIP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    /// `nτ` for `n = 1..=N`, s.
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub seq: SequenceParams,
    pub network_seed: u64,
    pub theta: f64,
}

impl DecayCurve {
    /// CSV with columns `time_s,survival`; `preamble` lines are written first as `# ` comments.
    pub fn write_csv<W: Write>(&self, mut w: W, preamble: &[String]) -> Result<()> {
        for line in preamble {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "time_s,survival")?;
        for (t, f) in self.times.iter().zip(&self.survival) {
            writeln!(w, "{},{}", format_sci(*t), format_sci(*f))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, preamble: &[String]) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, preamble).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn final_survival(&self) -> Option<f64> {
        self.survival.last().copied()
    }
}

/// Scientific notation with 12 significant digits; non-finite values spelled out.
pub fn format_sci(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 {
        // no negative zero in output files
        format!("{:.11e}", 0.0)
    } else {
        format!("{x:.11e}")
    }
}

/// `exp(iϑI_x) exp(iτH)` with `H = H_dd + H_z`.
pub fn cycle_propagator(pair: &HamiltonianPair, seq: &SequenceParams) -> Result<Operator> {
    seq.validate()?;
    let free = HermitianSpectrum::new(pair.total().matrix())?.exp_i(seq.tau());
    let pulse = collective_x_rotation_halfturns(seq.theta_halfturns(), pair.num_spins())?;
    Ok(Operator::from_parts(pulse.matrix() * free, Role::Unitary))
}

/// `Tr{ρ_I† ρ_F} / Tr{ρ_I† ρ_I}`.
pub fn survival_probability(rho_f: &Operator, rho_i: &Operator) -> Result<f64> {
    if rho_f.dim() != rho_i.dim() {
        return Err(Error::DimensionMismatch { left: rho_f.dim(), right: rho_i.dim() });
    }
    let norm2 = rho_i.matrix().norm_squared();
    if norm2 == 0.0 {
        return Err(Error::ZeroInitialState);
    }
    Ok(rho_i.matrix().dotc(rho_f.matrix()).re / norm2)
}

/// A Hamiltonian diagonalized once, reused across flip angles and timings.
#[derive(Debug, Clone)]
pub struct PreparedSystem {
    ns: usize,
    spectrum: HermitianSpectrum,
    rho: CMatrix,
    rho_norm2: f64,
}

impl PreparedSystem {
    /// Prepares `H = H_dd + H_z` with the transverse initial state `I_x`.
    pub fn new(pair: &HamiltonianPair) -> Result<Self> {
        let rho = transverse_state(pair.num_spins())?;
        Self::with_state(pair, &rho)
    }

    pub fn with_state(pair: &HamiltonianPair, rho_init: &Operator) -> Result<Self> {
        let ns = pair.num_spins();
        crate::spin_algebra::check_capacity(ns)?;
        if rho_init.dim() != pair.dim() {
            return Err(Error::DimensionMismatch { left: rho_init.dim(), right: pair.dim() });
        }
        if !rho_init.is_hermitian(1e-12) {
            return Err(Error::InvalidInputs("initial state must be Hermitian".into()));
        }
        let rho_norm2 = rho_init.matrix().norm_squared();
        if rho_norm2 == 0.0 {
            return Err(Error::ZeroInitialState);
        }
        Ok(Self {
            ns,
            spectrum: HermitianSpectrum::new(pair.total().matrix())?,
            rho: rho_init.matrix().clone(),
            rho_norm2,
        })
    }

    pub fn num_spins(&self) -> usize {
        self.ns
    }

    /// The unitary carrying the state from one sample to the next.
    pub fn sampling_cycle(&self, seq: &SequenceParams) -> Result<CMatrix> {
        seq.validate()?;
        let tau = seq.tau();
        let pulse = collective_x_rotation_halfturns(seq.theta_halfturns(), self.ns)?;
        let k = if seq.t_1 == 0.0 {
            pulse.matrix() * self.spectrum.exp_i(tau)
        } else {
            self.spectrum.exp_i(seq.t_1) * pulse.matrix() * self.spectrum.exp_i(tau - seq.t_1)
        };
        Ok(k)
    }

    fn cycle_overlaps(&self, seq: &SequenceParams) -> Result<Overlaps> {
        let k = self.sampling_cycle(seq)?;
        let spec = UnitarySpectrum::new(&k)?;
        let w = &spec.vectors;
        let rho_eig = w.adjoint() * &self.rho * w;
        let n = spec.dim();
        let mut diag = 0.0;
        let mut weights = Vec::with_capacity(n * (n - 1) / 2);
        for b in 0..n {
            diag += rho_eig[(b, b)].norm_sqr();
            for a in 0..b {
                let wgt = rho_eig[(a, b)].norm_sqr() + rho_eig[(b, a)].norm_sqr();
                if wgt > 0.0 {
                    weights.push((wgt, spec.phases[a] - spec.phases[b]));
                }
            }
        }
        Ok(Overlaps { diag, weights, norm2: self.rho_norm2 })
    }

    /// `F(nτ)` for `n = 1..=N`.
    pub fn survival_curve(&self, seq: &SequenceParams) -> Result<Vec<f64>> {
        let ov = self.cycle_overlaps(seq)?;
        Ok((1..=seq.n_pulses as u64).map(|n| ov.at(n)).collect())
    }

    /// `F(Nτ)` only.
    pub fn final_survival(&self, seq: &SequenceParams) -> Result<f64> {
        Ok(self.cycle_overlaps(seq)?.at(seq.n_pulses as u64))
    }

    pub fn decay(&self, seq: &SequenceParams, network_seed: u64) -> Result<DecayCurve> {
        Ok(DecayCurve {
            times: seq.sample_times(),
            survival: self.survival_curve(seq)?,
            seq: *seq,
            network_seed,
            theta: seq.theta,
        })
    }
}

/// `|ρ'_ab|²` weights and phase differences in the eigenbasis of the sampling cycle.
struct Overlaps {
    diag: f64,
    weights: Vec<(f64, f64)>,
    norm2: f64,
}

impl Overlaps {
    fn at(&self, n: u64) -> f64 {
        let nf = n as f64;
        let mut s = self.diag;
        for &(w, d) in &self.weights {
            s += w * (nf * d).cos();
        }
        s / self.norm2
    }
}

/// Samples `F(nτ)`, `n = 1..=N`, starting from `rho_init`.
pub fn simulate_decay(pair: &HamiltonianPair, seq: &SequenceParams, rho_init: &Operator) -> Result<DecayCurve> {
    PreparedSystem::with_state(pair, rho_init)?.decay(seq, 0)
}

/// `−Nτ / ln F(Nτ)` from the last sample of the curve.
pub fn extract_t2prime(curve: &DecayCurve) -> Result<f64> {
    extract_t2prime_with(curve, &ReadoutLimits::default())
}

pub fn extract_t2prime_with(curve: &DecayCurve, limits: &ReadoutLimits) -> Result<f64> {
    let (t, f) = match (curve.times.last(), curve.survival.last()) {
        (Some(&t), Some(&f)) => (t, f),
        _ => return Err(Error::InvalidInputs("empty decay curve".into())),
    };
    t2prime_from_survival(f, t, limits)
}

/// Single-point readout `−T / ln F`, infinite when `F ≥ 1 − ε_clip`.
pub fn t2prime_from_survival(f: f64, total_time: f64, limits: &ReadoutLimits) -> Result<f64> {
    if f.is_nan() || f <= limits.f_min {
        return Err(Error::NonPositiveSurvival { survival: f, floor: limits.f_min });
    }
    if f >= 1.0 - limits.eps_clip {
        return Ok(f64::INFINITY);
    }
    Ok(-total_time / f.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::SpinNetwork;
    use crate::sequence::{apply_case, make_sequence, SpecialCase};
    use crate::spin_algebra::{collective_operator, Axis};
    use std::f64::consts::PI;

    fn single_spin(c_hz: f64) -> HamiltonianPair {
        let net = SpinNetwork::from_couplings(vec![vec![0.0]], vec![c_hz]).unwrap();
        HamiltonianPair::from_network(&net).unwrap()
    }

    #[test]
    fn fid_single_spin_is_cosine() {
        let c = 1000.0;
        let pair = single_spin(c);
        let base = make_sequence(PI, 20e-6, 5e-6, 0.0, 50, 11.4e3).unwrap();
        let fid = apply_case(SpecialCase::Fid, &base).unwrap();
        let rho = transverse_state(1).unwrap();
        let curve = simulate_decay(&pair, &fid, &rho).unwrap();
        for (t, f) in curve.times.iter().zip(&curve.survival) {
            assert!((f - (2.0 * PI * c * t).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn survival_basics() {
        let x = transverse_state(1).unwrap();
        assert_eq!(survival_probability(&x, &x).unwrap(), 1.0);
        assert_eq!(survival_probability(&x.scaled(-1.0), &x).unwrap(), -1.0);
        let phi = 0.7;
        let z = collective_operator(Axis::Z, 1).unwrap();
        let u = matrix_exponential_hermitian(&z, phi).unwrap();
        let rf = Operator::from_parts(u.matrix() * x.matrix() * u.matrix().adjoint(), Role::Density);
        assert!((survival_probability(&rf, &x).unwrap() - phi.cos()).abs() < 1e-14);
        let zero = Operator::zeros(2, Role::Density);
        assert_eq!(survival_probability(&x, &zero), Err(Error::ZeroInitialState));
    }

    #[test]
    fn readout() {
        let lim = ReadoutLimits::default();
        assert!((t2prime_from_survival((-1.0f64).exp(), 2.0, &lim).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(t2prime_from_survival(1.0, 2.0, &lim).unwrap(), f64::INFINITY);
        assert!(matches!(t2prime_from_survival(1e-7, 2.0, &lim), Err(Error::NonPositiveSurvival { .. })));
        assert!(matches!(t2prime_from_survival(-0.5, 2.0, &lim), Err(Error::NonPositiveSurvival { .. })));
    }

    #[test]
    fn cycle_with_zero_hamiltonian_is_pulse() {
        let net = SpinNetwork::from_couplings(vec![vec![0.0; 2]; 2], vec![0.0; 2]).unwrap();
        let pair = HamiltonianPair::from_network(&net).unwrap();
        let seq = make_sequence(PI / 2.0, 10e-6, 0.0, 0.0, 1, 11.4e3).unwrap();
        let u = cycle_propagator(&pair, &seq).unwrap();
        let x = collective_operator(Axis::X, 2).unwrap();
        let expect = matrix_exponential_hermitian(&x, PI / 2.0).unwrap();
        assert!(u.distance(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn csv_format() {
        let seq = make_sequence(PI, 1e-6, 0.0, 0.0, 2, 1e5).unwrap();
        let curve = DecayCurve { times: vec![1.0, 2.0], survival: vec![0.5, f64::INFINITY], seq, network_seed: 0, theta: PI };
        let s = curve.to_csv_string(&["k=v".into()]);
        assert_eq!(s, "# k=v\ntime_s,survival\n1.00000000000e0,5.00000000000e-1\n2.00000000000e0,inf\n");
    }
}
