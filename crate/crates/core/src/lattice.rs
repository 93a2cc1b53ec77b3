//! Random ¹³C placements on a diamond lattice and their secular dipolar couplings.
//!
//! The diamond lattice is built as an FCC Bravais lattice with a two-atom basis at
//! `(0,0,0)` and `(¼,¼,¼)·a`. Each site is occupied independently with probability
//! equal to the enrichment; a network is the `ns` occupied sites closest to a randomly
//! chosen occupied anchor. Couplings are reported in Hz.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin_algebra::MAX_SPINS;

/// Gyromagnetic ratio of ¹³C in cycles per second per tesla.
pub const GAMMA_13C_HZ_PER_T: f64 = 10.7e6;

/// Conventional cubic lattice constant of diamond used by default, nm.
pub const DEFAULT_LATTICE_CONSTANT_NM: f64 = 0.35;

/// RMS on-site dephasing field, Hz (√0.4 kHz², the mean longitudinal P1 hyperfine scale).
pub const DEFAULT_DEPHASING_RMS_HZ: f64 = 632.455_532_033_675_9;

const MU0_OVER_4PI: f64 = 1e-7;
const HBAR: f64 = 1.054_571_817e-34;

const FCC_OFFSETS: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
];
const DIAMOND_BASIS: [[f64; 3]; 2] = [[0.0, 0.0, 0.0], [0.25, 0.25, 0.25]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    /// Fraction of carbon sites carrying a ¹³C nucleus.
    pub enrichment_eta: f64,
    /// Cubic lattice constant, nm.
    #[serde(default = "default_lattice_constant")]
    pub lattice_constant_a: f64,
    /// Conventional cells per axis.
    #[serde(default = "default_cell_extent")]
    pub cell_extent: usize,
    /// Unit vector along B0.
    #[serde(default = "default_field_direction")]
    pub field_direction: [f64; 3],
    #[serde(default)]
    pub seed: u64,
}

fn default_lattice_constant() -> f64 {
    DEFAULT_LATTICE_CONSTANT_NM
}

fn default_cell_extent() -> usize {
    8
}

fn default_field_direction() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl LatticeConfig {
    pub fn new(enrichment_eta: f64, seed: u64) -> Self {
        Self {
            enrichment_eta,
            lattice_constant_a: DEFAULT_LATTICE_CONSTANT_NM,
            cell_extent: default_cell_extent(),
            field_direction: default_field_direction(),
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.enrichment_eta > 0.0 && self.enrichment_eta <= 1.0) {
            return Err(Error::InvalidLattice(format!(
                "enrichment must lie in (0, 1], got {}",
                self.enrichment_eta
            )));
        }
        if !(self.lattice_constant_a > 0.0) {
            return Err(Error::InvalidLattice("lattice constant must be positive".into()));
        }
        if self.cell_extent == 0 {
            return Err(Error::InvalidLattice("cell_extent must be at least 1".into()));
        }
        if (norm3(&self.field_direction) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidLattice("field_direction must have unit norm".into()));
        }
        Ok(())
    }

    /// Nearest-neighbour bond length `a·√3/4`, nm.
    pub fn bond_length(&self) -> f64 {
        self.lattice_constant_a * 3f64.sqrt() / 4.0
    }

    /// All lattice sites of the `cell_extent³` block, in a fixed order.
    pub fn sites(&self) -> Vec<[f64; 3]> {
        let n = self.cell_extent;
        let a = self.lattice_constant_a;
        let mut out = Vec::with_capacity(8 * n * n * n);
        for cx in 0..n {
            for cy in 0..n {
                for cz in 0..n {
                    let cell = [cx as f64, cy as f64, cz as f64];
                    for f in &FCC_OFFSETS {
                        for b in &DIAMOND_BASIS {
                            out.push([
                                a * (cell[0] + f[0] + b[0]),
                                a * (cell[1] + f[1] + b[1]),
                                a * (cell[2] + f[2] + b[2]),
                            ]);
                        }
                    }
                }
            }
        }
        out
    }
}

/// One random manifestation: positions (nm), couplings (Hz) and on-site fields (Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinNetwork {
    pub positions: Vec<[f64; 3]>,
    /// Symmetric, zero diagonal, Hz.
    pub couplings_d: Vec<Vec<f64>>,
    /// On-site dephasing coefficients `c_j`, Hz.
    pub dephasing_c: Vec<f64>,
    pub field_direction: [f64; 3],
    pub seed: u64,
}

impl SpinNetwork {
    /// Builds a network from explicit positions, computing every pairwise coupling.
    pub fn from_positions(
        positions: Vec<[f64; 3]>,
        field_direction: [f64; 3],
        dephasing_c: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        if positions.len() != dephasing_c.len() {
            return Err(Error::DimensionMismatch {
                left: positions.len(),
                right: dephasing_c.len(),
            });
        }
        let ns = positions.len();
        let mut couplings_d = vec![vec![0.0; ns]; ns];
        for j in 0..ns {
            for k in (j + 1)..ns {
                let r = sub3(&positions[k], &positions[j]);
                let d = dipolar_coupling(r, field_direction)?;
                couplings_d[j][k] = d;
                couplings_d[k][j] = d;
            }
        }
        Ok(Self {
            positions,
            couplings_d,
            dephasing_c,
            field_direction,
            seed,
        })
    }

    /// Network with explicit couplings and fields; positions are left empty.
    pub fn from_couplings(couplings_d: Vec<Vec<f64>>, dephasing_c: Vec<f64>) -> Result<Self> {
        let ns = dephasing_c.len();
        if couplings_d.len() != ns || couplings_d.iter().any(|row| row.len() != ns) {
            return Err(Error::DimensionMismatch {
                left: couplings_d.len(),
                right: ns,
            });
        }
        for j in 0..ns {
            if couplings_d[j][j] != 0.0 {
                return Err(Error::InvalidInputs("couplings must have a zero diagonal".into()));
            }
            for k in 0..j {
                if couplings_d[j][k] != couplings_d[k][j] {
                    return Err(Error::InvalidInputs("couplings must be symmetric".into()));
                }
            }
        }
        Ok(Self {
            positions: Vec::new(),
            couplings_d,
            dephasing_c,
            field_direction: default_field_direction(),
            seed: 0,
        })
    }

    pub fn num_spins(&self) -> usize {
        self.dephasing_c.len()
    }

    /// Iterates over `(j, k, d_jk)` for `j < k`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let ns = self.num_spins();
        (0..ns).flat_map(move |j| ((j + 1)..ns).map(move |k| (j, k, self.couplings_d[j][k])))
    }

    /// Mean over spins of the distance to the closest other spin, nm.
    pub fn mean_nearest_neighbor_distance(&self) -> f64 {
        let ns = self.positions.len();
        if ns < 2 {
            return f64::NAN;
        }
        let total: f64 = (0..ns)
            .map(|j| {
                (0..ns)
                    .filter(|&k| k != j)
                    .map(|k| norm3(&sub3(&self.positions[j], &self.positions[k])))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        total / ns as f64
    }

    /// Absolute values of all `d_jk`, `j < k`.
    pub fn abs_couplings(&self) -> Vec<f64> {
        self.pairs().map(|(_, _, d)| d.abs()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Samples one network of `ns` spins. Deterministic in `config.seed`.
pub fn generate_network(config: &LatticeConfig, ns: usize, dephasing_scale: f64) -> Result<SpinNetwork> {
    config.validate()?;
    if ns < 2 {
        return Err(Error::InvalidLattice("a network needs at least 2 spins".into()));
    }
    if ns > MAX_SPINS {
        return Err(Error::CapacityExceeded { ns, max: MAX_SPINS });
    }
    if !(dephasing_scale >= 0.0) {
        return Err(Error::InvalidLattice("dephasing scale must be non-negative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sites = config.sites();
    let occupied: Vec<[f64; 3]> = sites
        .into_iter()
        .filter(|_| rng.random::<f64>() < config.enrichment_eta)
        .collect();
    if occupied.len() < ns {
        return Err(Error::InsufficientSites {
            found: occupied.len(),
            needed: ns,
        });
    }
    let anchor = occupied[rng.random_range(0..occupied.len())];

    let mut ranked: Vec<(f64, usize)> = occupied
        .iter()
        .enumerate()
        .map(|(i, p)| (norm3_sq(&sub3(p, &anchor)), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let positions: Vec<[f64; 3]> = ranked[..ns].iter().map(|&(_, i)| occupied[i]).collect();

    let raw: Vec<f64> = (0..ns).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let dephasing_c = rescale_rms(&raw, dephasing_scale);

    SpinNetwork::from_positions(positions, config.field_direction, dephasing_c, config.seed)
}

fn rescale_rms(values: &[f64], target: f64) -> Vec<f64> {
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt();
    if rms == 0.0 || target == 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| v * target / rms).collect()
}

/// `(μ0/4π)·ħ·γ²/r³` at `r = 1 nm`, converted from rad/s to Hz.
pub fn dipolar_prefactor_hz_nm3() -> f64 {
    let gamma = 2.0 * PI * GAMMA_13C_HZ_PER_T;
    MU0_OVER_4PI * HBAR * gamma * gamma / 1e-27 / (2.0 * PI)
}

/// Secular dipolar coupling `d_jk` in Hz for an interspin vector in nm.
pub fn dipolar_coupling(r_vec: [f64; 3], field_direction: [f64; 3]) -> Result<f64> {
    let r = norm3(&r_vec);
    if r == 0.0 {
        return Err(Error::ZeroSeparation);
    }
    let cos = dot3(&r_vec, &field_direction) / r;
    Ok(dipolar_prefactor_hz_nm3() * (3.0 * cos * cos - 1.0) / (r * r * r))
}

/// ¹³C spin density per nm³ at enrichment `eta`.
pub fn spin_density(eta: f64) -> f64 {
    0.92 * eta
}

pub(crate) fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3_sq(a: &[f64; 3]) -> f64 {
    dot3(a, a)
}

pub(crate) fn norm3(a: &[f64; 3]) -> f64 {
    norm3_sq(a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_occupancy_pair_is_a_bond() {
        let mut cfg = LatticeConfig::new(1.0, 3);
        cfg.cell_extent = 3;
        let net = generate_network(&cfg, 2, 100.0).unwrap();
        let r = norm3(&sub3(&net.positions[0], &net.positions[1]));
        assert!((r - cfg.bond_length()).abs() < 1e-12);
        assert!((cfg.bond_length() - 0.35 * 3f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = LatticeConfig::new(0.05, 99);
        let a = generate_network(&cfg, 6, DEFAULT_DEPHASING_RMS_HZ).unwrap();
        let b = generate_network(&cfg, 6, DEFAULT_DEPHASING_RMS_HZ).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = generate_network(&cfg.with_seed(100), 6, DEFAULT_DEPHASING_RMS_HZ).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn magic_angle_coupling_vanishes() {
        let s = 1.0 / 3f64.sqrt();
        let r = [(1.0 - s * s).sqrt(), 0.0, s];
        let d = dipolar_coupling(r, [0.0, 0.0, 1.0]).unwrap();
        assert!(d.abs() < 1e-12 * dipolar_prefactor_hz_nm3());
    }

    #[test]
    fn inverse_cube_scaling() {
        let z = [0.0, 0.0, 1.0];
        let d1 = dipolar_coupling([0.0, 0.0, 0.3], z).unwrap();
        let d2 = dipolar_coupling([0.0, 0.0, 0.6], z).unwrap();
        assert!((d1 / d2 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn zero_separation_rejected() {
        assert_eq!(dipolar_coupling([0.0; 3], [0.0, 0.0, 1.0]), Err(Error::ZeroSeparation));
    }

    #[test]
    fn bond_coupling_magnitude() {
        // parallel nearest-neighbour pair: 2·prefactor/r³ with r = 0.1516 nm, about 4.4 kHz
        let r = 0.35 * 3f64.sqrt() / 4.0;
        let d = dipolar_coupling([0.0, 0.0, r], [0.0, 0.0, 1.0]).unwrap();
        assert!((4000.0..4800.0).contains(&d), "{d}");
        assert!((dipolar_prefactor_hz_nm3() - 7.587).abs() < 0.01);
    }

    #[test]
    fn density_values() {
        assert!((spin_density(1.0) - 0.92).abs() < 1e-15);
        assert_eq!(spin_density(0.0), 0.0);
        assert!((spin_density(0.1) - 0.092).abs() < 1e-15);
    }

    #[test]
    fn insufficient_sites_reported() {
        let mut cfg = LatticeConfig::new(0.01, 1);
        cfg.cell_extent = 1;
        match generate_network(&cfg, 6, 1.0) {
            Err(Error::InsufficientSites { needed: 6, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = LatticeConfig::new(0.0, 1);
        assert!(cfg.validate().is_err());
        cfg.enrichment_eta = 0.5;
        cfg.field_direction = [1.0, 1.0, 0.0];
        assert!(cfg.validate().is_err());
        cfg.field_direction = [0.0, 1.0, 0.0];
        assert!(cfg.validate().is_ok());
        assert!(generate_network(&cfg, 13, 1.0).is_err());
        assert!(generate_network(&cfg, 1, 1.0).is_err());
    }

    #[test]
    fn dephasing_rms_is_exact() {
        let cfg = LatticeConfig::new(0.1, 5);
        let net = generate_network(&cfg, 6, 632.0).unwrap();
        let rms = (net.dephasing_c.iter().map(|c| c * c).sum::<f64>() / 6.0).sqrt();
        assert!((rms / 632.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let net = generate_network(&LatticeConfig::new(0.2, 17), 4, 300.0).unwrap();
        let back = SpinNetwork::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, back);
    }
}
