//! Seeded ensemble sweeps of T2′ over the flip angle.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{format_sci, t2prime_from_survival, PreparedSystem, ReadoutLimits};
use crate::error::{Error, Result};
use crate::lattice::{generate_network, LatticeConfig, DEFAULT_DEPHASING_RMS_HZ};
use crate::sequence::SequenceParams;
use crate::spin_algebra::{rescale_to_ratio, HamiltonianPair, Operator, Role};

/// Seed of manifestation `k`: the `k`-th output (0-based) of SplitMix64 started at
/// `base_seed`, i.e. `mix(base_seed + (k+1)·0x9E3779B97F4A7C15)` with the standard
/// SplitMix64 finalizer.
pub fn manifestation_seed(base_seed: u64, k: u64) -> u64 {
    let mut rng = SplitMix64::seed_from_u64(base_seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    rng.next_u64()
}

/// How the coupling strengths are set for each manifestation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingRatio {
    /// Raw lattice couplings.
    Native,
    /// `H_dd` rescaled so that `‖H_dd‖/‖H_z‖` equals the value; `H_z` untouched.
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub lattice: LatticeConfig,
    pub ns: usize,
    /// RMS of the on-site fields, Hz.
    pub dephasing_rms_hz: f64,
    pub ratio: CouplingRatio,
    /// Drop `H_z` after the ratio is applied, leaving a purely dipolar network.
    pub dephasing_off: bool,
    pub manifestations: usize,
    pub base_seed: u64,
}

impl EnsembleSpec {
    pub fn new(lattice: LatticeConfig, ns: usize, ratio: CouplingRatio, manifestations: usize, base_seed: u64) -> Self {
        Self {
            lattice,
            ns,
            dephasing_rms_hz: DEFAULT_DEPHASING_RMS_HZ,
            ratio,
            dephasing_off: false,
            manifestations,
            base_seed,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.manifestations as u64).map(|k| manifestation_seed(self.base_seed, k)).collect()
    }

    /// Hamiltonians of manifestation `k`.
    pub fn hamiltonians(&self, k: usize) -> Result<HamiltonianPair> {
        let cfg = self.lattice.with_seed(manifestation_seed(self.base_seed, k as u64));
        let net = generate_network(&cfg, self.ns, self.dephasing_rms_hz)?;
        let pair = HamiltonianPair::from_network(&net)?;
        let pair = match self.ratio {
            CouplingRatio::Native => pair,
            CouplingRatio::Value(r) => rescale_to_ratio(&pair, r)?,
        };
        if self.dephasing_off {
            let zero = Operator::zeros(pair.dim(), Role::Hamiltonian);
            return HamiltonianPair::new(pair.h_dd, zero);
        }
        Ok(pair)
    }
}

/// Treatment of runs whose final survival is at or below the readout floor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowSurvival {
    /// Recorded as missing and left out of the mean.
    #[default]
    Missing,
    /// Read out at the floor, giving the shortest representable T2′.
    Clamp,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub limits: ReadoutLimits,
    pub low_survival: LowSurvival,
    /// Worker threads; 0 means rayon's default.
    pub jobs: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { limits: ReadoutLimits::default(), low_survival: LowSurvival::Missing, jobs: 0 }
    }
}

mod json_f64 {
    //! Non-finite floats as the strings "inf", "-inf" and "nan".
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(x: f64) -> Repr {
        if x.is_finite() {
            Repr::Num(x)
        } else if x.is_nan() {
            Repr::Text("nan".into())
        } else if x > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(x) => Ok(x),
            Repr::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("unexpected number text {other:?}"))),
            },
        }
    }

    pub mod scalar {
        use super::*;

        pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
            to_repr(*x).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
            from_repr(Repr::deserialize(d)?)
        }
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|&x| to_repr(x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
        }
    }

    pub mod cells {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Vec<Option<f64>>], s: S) -> Result<S::Ok, S::Error> {
            v.iter()
                .map(|row| row.iter().map(|c| c.map(to_repr)).collect::<Vec<_>>())
                .collect::<Vec<_>>()
                .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Option<f64>>>, D::Error> {
            Vec::<Vec<Option<Repr>>>::deserialize(d)?
                .into_iter()
                .map(|row| row.into_iter().map(|c| c.map(from_repr).transpose()).collect())
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaProfile {
    /// Flip angles, rad.
    pub thetas: Vec<f64>,
    /// Ensemble mean of T2′, s. Infinite if any manifestation is; NaN if none succeeded.
    #[serde(with = "json_f64::vec")]
    pub t2prime_mean: Vec<f64>,
    #[serde(with = "json_f64::vec")]
    pub t2prime_stderr: Vec<f64>,
    /// Manifestations contributing to each mean.
    pub n_ok: Vec<usize>,
    pub manifestations: usize,
    /// Mean `‖H_dd‖/‖H_z‖` over the ensemble.
    #[serde(with = "json_f64::scalar")]
    pub ratio_dd_over_z: f64,
    /// Gaussian σ of the dips, rad, keyed by "pi" and "two_pi" once fitted.
    pub dip_widths: BTreeMap<String, f64>,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    /// Per-cell T2′ indexed `[theta][manifestation]`; `None` for missing runs.
    #[serde(with = "json_f64::cells")]
    pub values: Vec<Vec<Option<f64>>>,
}

impl ThetaProfile {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Same profile with rows ordered by increasing flip angle.
    pub fn sorted(&self) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.thetas[a].total_cmp(&self.thetas[b]));
        Self {
            thetas: idx.iter().map(|&i| self.thetas[i]).collect(),
            t2prime_mean: idx.iter().map(|&i| self.t2prime_mean[i]).collect(),
            t2prime_stderr: idx.iter().map(|&i| self.t2prime_stderr[i]).collect(),
            n_ok: idx.iter().map(|&i| self.n_ok[i]).collect(),
            values: idx.iter().map(|&i| self.values[i].clone()).collect(),
            ..self.clone()
        }
    }

    /// Index and value of the largest finite-or-infinite mean.
    pub fn argmax(&self) -> Option<(usize, f64)> {
        self.t2prime_mean
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| !v.is_nan())
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Index of the grid point closest to `theta`.
    pub fn nearest(&self, theta: f64) -> Option<usize> {
        (0..self.len()).min_by(|&a, &b| (self.thetas[a] - theta).abs().total_cmp(&(self.thetas[b] - theta).abs()))
    }

    pub fn write_csv<W: Write>(&self, mut w: W, preamble: &[String]) -> Result<()> {
        for line in preamble {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "theta_rad,t2prime_mean_s,t2prime_stderr_s,n_ok")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                format_sci(self.thetas[i]),
                format_sci(self.t2prime_mean[i]),
                format_sci(self.t2prime_stderr[i]),
                self.n_ok[i]
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, preamble: &[String]) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, preamble).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Mean and standard error of the successful runs at one flip angle.
fn aggregate(cells: &[Option<f64>]) -> (f64, f64, usize) {
    let ok: Vec<f64> = cells.iter().flatten().copied().collect();
    let n = ok.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let n_inf = ok.iter().filter(|v| v.is_infinite()).count();
    if n_inf == n {
        return (f64::INFINITY, 0.0, n);
    }
    if n_inf > 0 {
        return (f64::INFINITY, f64::INFINITY, n);
    }
    let mean = ok.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0, n);
    }
    let var = ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt(), n)
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInputs(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// T2′ over `thetas` for every manifestation of `spec`, averaged per flip angle.
///
/// Each manifestation uses the same network at every angle. Engine failures at a cell
/// are logged and recorded as missing; failures building a network abort the sweep.
pub fn sweep_theta(spec: &EnsembleSpec, template: &SequenceParams, thetas: &[f64], opts: &SweepOptions) -> Result<ThetaProfile> {
    if thetas.is_empty() {
        return Err(Error::InvalidInputs("empty flip-angle grid".into()));
    }
    if spec.manifestations == 0 {
        return Err(Error::InvalidInputs("need at least one manifestation".into()));
    }
    if thetas.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidInputs("flip angles must be finite and >= 0".into()));
    }
    let seqs: Vec<SequenceParams> = thetas.iter().map(|&t| template.with_theta(t)).collect::<Result<_>>()?;
    let m = spec.manifestations;
    let (systems, cells) = in_pool(opts.jobs, || -> Result<_> {
        let systems: Vec<(PreparedSystem, f64)> = (0..m)
            .into_par_iter()
            .map(|k| {
                let pair = spec.hamiltonians(k)?;
                Ok((PreparedSystem::new(&pair)?, pair.ratio_dd_over_z))
            })
            .collect::<Result<_>>()?;
        let cells: Vec<Option<f64>> = (0..thetas.len() * m)
            .into_par_iter()
            .map(|idx| {
                let (i, k) = (idx / m, idx % m);
                let seq = &seqs[i];
                let f = match systems[k].0.final_survival(seq) {
                    Ok(f) => f,
                    Err(e) => {
                        log::warn!("theta {} manifestation {k}: {e}", thetas[i]);
                        return None;
                    }
                };
                let f = match opts.low_survival {
                    LowSurvival::Clamp => f.max(opts.limits.f_min * (1.0 + 1e-9)),
                    LowSurvival::Missing => f,
                };
                t2prime_from_survival(f, seq.total_time(), &opts.limits).ok()
            })
            .collect();
        Ok((systems, cells))
    })??;
    let values: Vec<Vec<Option<f64>>> = cells.chunks(m).map(|c| c.to_vec()).collect();
    let mut mean = Vec::with_capacity(thetas.len());
    let mut stderr = Vec::with_capacity(thetas.len());
    let mut n_ok = Vec::with_capacity(thetas.len());
    for row in &values {
        let (a, b, c) = aggregate(row);
        mean.push(a);
        stderr.push(b);
        n_ok.push(c);
    }
    let ratio = systems.iter().map(|s| s.1).sum::<f64>() / m as f64;
    Ok(ThetaProfile {
        thetas: thetas.to_vec(),
        t2prime_mean: mean,
        t2prime_stderr: stderr,
        n_ok,
        manifestations: m,
        ratio_dd_over_z: ratio,
        dip_widths: BTreeMap::new(),
        base_seed: spec.base_seed,
        seeds: spec.seeds(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // first outputs of SplitMix64 from state 0
        assert_eq!(manifestation_seed(0, 0), 0xe220a8397b1dcdaf);
        assert_eq!(manifestation_seed(0, 1), 0x6e789e6aa1b965f4);
        assert_eq!(manifestation_seed(0, 2), 0x06c45d188009454f);
    }

    #[test]
    fn aggregation_rules() {
        assert_eq!(aggregate(&[Some(1.0), Some(3.0)]), (2.0, 1.0, 2));
        assert_eq!(aggregate(&[Some(1.0), None]), (1.0, 0.0, 1));
        assert_eq!(aggregate(&[Some(f64::INFINITY)]), (f64::INFINITY, 0.0, 1));
        assert_eq!(aggregate(&[Some(f64::INFINITY), Some(1.0)]), (f64::INFINITY, f64::INFINITY, 2));
        assert!(aggregate(&[None]).0.is_nan());
    }
}
