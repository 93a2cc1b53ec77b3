//! Command-line front end: JSON run configs, sweeps, single decays, Magnus checks and
//! grating tables.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    dip_width, fit_stretched_exp, median_decimate, manifestation_seed, sweep_theta, CouplingRatio, DipCenter, EnsembleSpec, LowSurvival,
    SweepOptions, ThetaProfile,
};
use crate::engine::{extract_t2prime, format_sci, DecayCurve, PreparedSystem};
use crate::error::{Error, Result};
use crate::lattice::{LatticeConfig, SpinNetwork, DEFAULT_DEPHASING_RMS_HZ};
use crate::magnus::{
    compare_with_exact, filter_functions, grating, magnus0_dephasing_closed, magnus0_dipolar_closed, magnus0_direct,
    magnus1_dephasing_closed, magnus1_dipolar_with_filters, magnus1_direct, MagnusOrder,
};
use crate::sequence::{apply_case, make_sequence, SequenceParams, SpecialCase};
use crate::spin_algebra::{build_dephasing, build_dipolar, HamiltonianPair, Operator};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
/// Any other runtime failure.
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ddsim", version, about = "Pulsed dynamical-decoupling simulator for dipolar spin networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Base seed; overrides the config and DDSIM_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ensemble-averaged T2′ over the configured flip-angle grid.
    Sweep,
    /// One decay curve of the first manifestation at a given flip angle.
    Decay {
        #[arg(long = "theta-deg")]
        theta_deg: f64,
    },
    /// Closed-form vs direct Magnus terms and the exact-propagator comparison.
    MagnusCheck {
        /// Negative control: flip the sign of f2 in the closed form.
        #[arg(long, hide = true)]
        inject_f2_sign_error: bool,
    },
    /// Grating function and filter functions over the flip-angle grid.
    Grating {
        /// Pulse count; defaults to the configured sequence length.
        #[arg(long)]
        n: Option<usize>,
    },
}

/// Coupling ratio as written in the config: a number or `"native"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatioSetting {
    Value(f64),
    Keyword(RatioKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioKeyword {
    Native,
}

impl RatioSetting {
    pub fn coupling(self) -> CouplingRatio {
        match self {
            RatioSetting::Value(r) => CouplingRatio::Value(r),
            RatioSetting::Keyword(RatioKeyword::Native) => CouplingRatio::Native,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceConfig {
    pub t_acq_us: f64,
    pub t_d_us: f64,
    /// Delay before the first pulse within each cycle.
    pub t_1_us: f64,
    pub n_pulses: usize,
    pub rabi_hz: f64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self { t_acq_us: 32.0, t_d_us: 6.0, t_1_us: 0.0, n_pulses: 2000, rabi_hz: 11.4e3 }
    }
}

impl SequenceConfig {
    pub fn at(&self, theta: f64) -> Result<SequenceParams> {
        make_sequence(theta, self.t_acq_us * 1e-6, self.t_d_us * 1e-6, self.t_1_us * 1e-6, self.n_pulses, self.rabi_hz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaGrid {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

impl Default for ThetaGrid {
    fn default() -> Self {
        Self { start_deg: 4.5, stop_deg: 450.0, step_deg: 4.5 }
    }
}

impl ThetaGrid {
    pub fn degrees(&self) -> Vec<f64> {
        let count = ((self.stop_deg - self.start_deg) / self.step_deg + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start_deg + i as f64 * self.step_deg).collect()
    }

    pub fn radians(&self) -> Vec<f64> {
        self.degrees().into_iter().map(|d| PI * (d / 180.0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MagnusCheckConfig {
    /// Random networks per check.
    pub instances: usize,
    pub ns: usize,
    /// Cycle period for the closed-form comparisons.
    pub tau_us: f64,
    /// `τ‖H‖_F` of the exact-propagator comparison.
    pub tau_norm: f64,
    pub tolerance: f64,
}

impl Default for MagnusCheckConfig {
    fn default() -> Self {
        Self { instances: 20, ns: 3, tau_us: 50.0, tau_norm: 0.05, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub lattice: LatticeConfig,
    pub ns: usize,
    pub dephasing_rms_hz: f64,
    /// Remove `H_z` after the ratio is applied.
    pub dephasing_off: bool,
    pub sequence: SequenceConfig,
    pub theta_grid: ThetaGrid,
    pub manifestations: usize,
    pub ratio_dd_over_z: RatioSetting,
    pub low_survival: LowSurvival,
    pub base_seed: Option<u64>,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
    pub magnus: MagnusCheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lattice: LatticeConfig::new(0.03, 0),
            ns: 6,
            dephasing_rms_hz: DEFAULT_DEPHASING_RMS_HZ,
            dephasing_off: false,
            sequence: SequenceConfig::default(),
            theta_grid: ThetaGrid::default(),
            manifestations: 50,
            ratio_dd_over_z: RatioSetting::Value(0.2),
            low_survival: LowSurvival::Missing,
            base_seed: None,
            output_dir: PathBuf::from("out"),
            emit_plots: false,
            magnus: MagnusCheckConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a JSON config, naming the offending field and position on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!("field `{path}`: {inner}"))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.theta_grid;
        if !(g.step_deg > 0.0) || !g.step_deg.is_finite() {
            return Err(Error::Config(format!("field `theta_grid.step_deg`: must be > 0, got {}", g.step_deg)));
        }
        if !(g.start_deg >= 0.0) || !(g.stop_deg >= g.start_deg) || !g.stop_deg.is_finite() {
            return Err(Error::Config(format!(
                "field `theta_grid`: need 0 <= start_deg <= stop_deg, got {} .. {}",
                g.start_deg, g.stop_deg
            )));
        }
        if self.manifestations < 1 {
            return Err(Error::Config("field `manifestations`: must be >= 1".into()));
        }
        if self.ns < 1 {
            return Err(Error::Config("field `ns`: must be >= 1".into()));
        }
        if let RatioSetting::Value(r) = self.ratio_dd_over_z {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::Config(format!("field `ratio_dd_over_z`: must be >= 0 or \"native\", got {r}")));
            }
        }
        if !(self.dephasing_rms_hz >= 0.0) || !self.dephasing_rms_hz.is_finite() {
            return Err(Error::Config("field `dephasing_rms_hz`: must be finite and >= 0".into()));
        }
        let s = &self.sequence;
        for (name, v) in [("t_acq_us", s.t_acq_us), ("t_d_us", s.t_d_us), ("t_1_us", s.t_1_us)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("field `sequence.{name}`: must be finite and >= 0, got {v}")));
            }
        }
        if !(s.rabi_hz > 0.0) || !s.rabi_hz.is_finite() {
            return Err(Error::Config(format!("field `sequence.rabi_hz`: must be > 0, got {}", s.rabi_hz)));
        }
        if s.n_pulses < 1 {
            return Err(Error::Config("field `sequence.n_pulses`: must be >= 1".into()));
        }
        self.lattice.validate().map_err(|e| Error::Config(format!("field `lattice`: {e}")))?;
        Ok(())
    }

    /// Seed precedence: `--seed`, then the config, then `DDSIM_SEED`, then 0.
    pub fn resolve_seed(&mut self, flag: Option<u64>, env: Option<&str>) -> Result<u64> {
        let seed = match (flag, self.base_seed, env) {
            (Some(s), _, _) => s,
            (None, Some(s), _) => s,
            (None, None, Some(text)) => text
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("DDSIM_SEED: not an unsigned 64-bit integer: {text:?}")))?,
            (None, None, None) => 0,
        };
        self.base_seed = Some(seed);
        Ok(seed)
    }

    /// SHA-256 of the resolved config with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    pub fn ensemble(&self) -> EnsembleSpec {
        EnsembleSpec {
            lattice: self.lattice.clone(),
            ns: self.ns,
            dephasing_rms_hz: self.dephasing_rms_hz,
            ratio: self.ratio_dd_over_z.coupling(),
            dephasing_off: self.dephasing_off,
            manifestations: self.manifestations,
            base_seed: self.base_seed.unwrap_or(0),
        }
    }

    fn preamble(&self, command: &str) -> Vec<String> {
        vec![
            format!("ddsim {} {command}", env!("CARGO_PKG_VERSION")),
            format!("config_sha256={}", self.hash()),
            format!("base_seed={}", self.base_seed.unwrap_or(0)),
        ]
    }
}

/// Output of a sweep run, for callers that want more than the files.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub profile: ThetaProfile,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

/// Runs the flip-angle sweep and writes `profile.csv`, `profile.json` and, if asked,
/// `profile.svg`; a one-point, one-manifestation sweep also writes `decay.csv`.
pub fn run_sweep(cfg: &RunConfig, jobs: usize) -> Result<SweepRun> {
    let thetas = cfg.theta_grid.radians();
    let template = cfg.sequence.at(PI)?;
    let spec = cfg.ensemble();
    let opts = SweepOptions { low_survival: cfg.low_survival, jobs, ..SweepOptions::default() };
    let mut profile = sweep_theta(&spec, &template, &thetas, &opts)?;
    for center in [DipCenter::Pi, DipCenter::TwoPi] {
        match dip_width(&profile, center) {
            Ok(w) => {
                profile.dip_widths.insert(center.key().to_string(), w);
            }
            Err(e) => log::info!("no {center} dip width: {e}"),
        }
    }
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let preamble = cfg.preamble("sweep");
    let csv_path = dir.join("profile.csv");
    write_file(&csv_path, &profile.to_csv_string(&preamble))?;
    let mut shown = cfg.clone();
    shown.output_dir = PathBuf::new();
    let json = serde_json::json!({
        "config_sha256": cfg.hash(),
        "base_seed": cfg.base_seed.unwrap_or(0),
        "config": shown,
        "profile": serde_json::from_str::<serde_json::Value>(&profile.to_json()?).map_err(|e| Error::Io(e.to_string()))?,
    });
    let json_path = dir.join("profile.json");
    write_file(&json_path, &(serde_json::to_string_pretty(&json).map_err(|e| Error::Io(e.to_string()))? + "\n"))?;
    if thetas.len() == 1 && cfg.manifestations == 1 {
        let pair = spec.hamiltonians(0)?;
        let seq = template.with_theta(thetas[0])?;
        let curve = PreparedSystem::new(&pair)?.decay(&seq, spec.seeds()[0])?;
        write_file(&dir.join("decay.csv"), &curve.to_csv_string(&preamble))?;
    }
    if cfg.emit_plots {
        let pts: Vec<(f64, f64)> = profile
            .thetas
            .iter()
            .zip(&profile.t2prime_mean)
            .map(|(t, v)| (t * 180.0 / PI, *v))
            .collect();
        write_file(&dir.join("profile.svg"), &svg_line_chart(&pts, "flip angle (deg)", "T2' (s)"))?;
    }
    Ok(SweepRun { profile, csv_path, json_path })
}

fn print_sweep_summary(run: &SweepRun) {
    let p = &run.profile;
    println!("manifestations {}  mean ratio ||H_dd||/||H_z|| {:.4}", p.manifestations, p.ratio_dd_over_z);
    if let Some((i, v)) = p.argmax() {
        println!("theta_opt {:8.3} deg   T2'(theta_opt) {} s", p.thetas[i] * 180.0 / PI, format_sci(v));
    }
    for center in [DipCenter::Pi, DipCenter::TwoPi] {
        match p.dip_widths.get(center.key()) {
            Some(w) => println!("dip width at {:<6} sigma = {:.5} rad", center.key(), w),
            None => println!("dip width at {:<6} n/a", center.key()),
        }
    }
    println!("wrote {} and {}", run.csv_path.display(), run.json_path.display());
}

/// Both T2′ estimates for one decay curve.
#[derive(Debug, Clone)]
pub struct DecayRun {
    pub curve: DecayCurve,
    pub t2prime_point: Result<f64>,
    pub t2prime_fit: Result<f64>,
}

/// One decay of manifestation 0 at `theta_deg`; `0` selects the FID preset.
pub fn run_decay(cfg: &RunConfig, theta_deg: f64) -> Result<DecayRun> {
    if !(theta_deg >= 0.0) || !theta_deg.is_finite() {
        return Err(Error::Config(format!("--theta-deg must be finite and >= 0, got {theta_deg}")));
    }
    let mut seq = cfg.sequence.at(PI * (theta_deg / 180.0))?;
    if theta_deg == 0.0 {
        seq = apply_case(SpecialCase::Fid, &seq)?;
    }
    let spec = cfg.ensemble();
    let pair = spec.hamiltonians(0)?;
    let curve = PreparedSystem::new(&pair)?.decay(&seq, spec.seeds()[0])?;
    let t2prime_point = extract_t2prime(&curve);
    let points: Vec<(f64, f64)> = curve.times.iter().copied().zip(curve.survival.iter().copied()).collect();
    let t2prime_fit = decimated(&points).and_then(|p| fit_stretched_exp(&p)).map(|f| f.t2prime_1e);
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let mut preamble = cfg.preamble("decay");
    preamble.push(format!("theta_deg={theta_deg}"));
    write_file(&dir.join("decay.csv"), &curve.to_csv_string(&preamble))?;
    if cfg.emit_plots {
        let pts: Vec<(f64, f64)> = points.iter().map(|&(t, f)| (t, f)).collect();
        write_file(&dir.join("decay.svg"), &svg_line_chart(&pts, "time (s)", "F"))?;
    }
    Ok(DecayRun { curve, t2prime_point, t2prime_fit })
}

/// Median-decimates a decay into at most `DECAY_FIT_WINDOWS` equal windows.
fn decimated(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if points.len() <= DECAY_FIT_WINDOWS {
        return Ok(points.to_vec());
    }
    let per = points.len() / DECAY_FIT_WINDOWS;
    let windows: Vec<(f64, f64)> = points
        .chunks(per)
        .filter(|c| c.len() == per)
        .map(|c| (c[0].0, c[c.len() - 1].0))
        .collect();
    median_decimate(points, &windows)
}

/// Window count used before fitting a simulated decay.
pub const DECAY_FIT_WINDOWS: usize = 100;

/// One row of the Magnus check table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    /// `true` when `value` must stay below `limit`, `false` when it must exceed it.
    pub upper: bool,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        if self.upper {
            self.value <= self.limit
        } else {
            self.value > self.limit
        }
    }
}

/// A random network with couplings in ±2 kHz and fields in ±1.5 kHz.
pub fn random_small_network(seed: u64, ns: usize) -> Result<SpinNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = vec![vec![0.0; ns]; ns];
    for j in 0..ns {
        for k in j + 1..ns {
            let v = rng.random_range(-2000.0..2000.0);
            d[j][k] = v;
            d[k][j] = v;
        }
    }
    let c = (0..ns).map(|_| rng.random_range(-1500.0..1500.0)).collect();
    SpinNetwork::from_couplings(d, c)
}

/// Distance relative to the larger operator, floored at `natural`.
fn rel_floor(a: &Operator, b: &Operator, natural: f64) -> Result<f64> {
    let scale = a.frobenius_norm().max(b.frobenius_norm()).max(natural);
    Ok(a.distance(b)? / scale)
}

pub const CHECK_THETAS: [f64; 8] = [0.3, 1.0, PI / 2.0, 2.0, PI, 4.1, 2.0 * PI, 5.5];
pub const CHECK_PULSE_COUNTS: [usize; 6] = [1, 2, 5, 8, 17, 64];

/// Closed forms against direct toggling-frame sums, recoupling identities and the
/// exact propagator. `flip_f2` corrupts the closed first-order dipolar term.
pub fn magnus_checks(cfg: &MagnusCheckConfig, base_seed: u64, flip_f2: bool) -> Result<Vec<CheckRow>> {
    let tol = cfg.tolerance;
    let tau = cfg.tau_us * 1e-6;
    let mut worst = [0.0f64; 4];
    let mut recouple = [0.0f64; 3];
    let mut halving = f64::INFINITY;
    let mut order_gain: f64 = 0.0;
    for k in 0..cfg.instances {
        let net = random_small_network(manifestation_seed(base_seed, k as u64), cfg.ns)?;
        let hdd = build_dipolar(&net)?;
        let hz = build_dephasing(&net)?;
        let (nd, nz) = (hdd.frobenius_norm(), hz.frobenius_norm());
        for &theta in &CHECK_THETAS {
            for &n in &CHECK_PULSE_COUNTS {
                let (f1, f2, f3) = filter_functions(theta, n);
                let f = if flip_f2 { (f1, -f2, f3) } else { (f1, f2, f3) };
                let errs = [
                    rel_floor(&magnus0_dipolar_closed(&net, theta, n)?, &magnus0_direct(&hdd, theta, n)?, nd)?,
                    rel_floor(&magnus0_dephasing_closed(&net, theta, n)?, &magnus0_direct(&hz, theta, n)?, nz)?,
                    rel_floor(&magnus1_dipolar_with_filters(&net, f, tau)?, &magnus1_direct(&hdd, theta, n, tau)?, tau * nd * nd)?,
                    rel_floor(&magnus1_dephasing_closed(&net, theta, n, tau)?, &magnus1_direct(&hz, theta, n, tau)?, tau * nz * nz)?,
                ];
                for (w, e) in worst.iter_mut().zip(errs) {
                    *w = w.max(e);
                }
            }
        }
        for n in [2usize, 10, 64] {
            recouple[0] = recouple[0].max(rel_floor(&magnus0_dipolar_closed(&net, PI, n)?, &hdd, nd)?);
            recouple[1] = recouple[1].max(magnus0_dephasing_closed(&net, PI, n)?.frobenius_norm() / nz.max(f64::MIN_POSITIVE));
            let full = hdd.try_add(&hz)?;
            let two_pi = magnus0_dipolar_closed(&net, 2.0 * PI, n)?.try_add(&magnus0_dephasing_closed(&net, 2.0 * PI, n)?)?;
            recouple[2] = recouple[2].max(rel_floor(&two_pi, &full, full.frobenius_norm())?);
        }
        let pair = HamiltonianPair::from_network(&net)?;
        let h_norm = pair.total().frobenius_norm();
        let tau_c = cfg.tau_norm / h_norm;
        let seq_at = |t: f64| SequenceParams { theta: 2.0, t_p: 0.0, t_acq: t, t_d: 0.0, t_1: 0.0, n_pulses: 8, rabi_omega: None };
        let e0 = compare_with_exact(&pair, &seq_at(tau_c), MagnusOrder::Zeroth)?;
        if e0.divergence_warning {
            eprintln!("warning: tau*||H|| = {:.3} >= 1; the Magnus expansion is not expected to converge", e0.tau_norm);
        }
        let e0_half = compare_with_exact(&pair, &seq_at(tau_c / 2.0), MagnusOrder::Zeroth)?;
        let e1 = compare_with_exact(&pair, &seq_at(tau_c), MagnusOrder::First)?;
        halving = halving.min(e0.propagator_error / e0_half.propagator_error);
        order_gain = order_gain.max(e1.propagator_error / e0.propagator_error);
    }
    Ok(vec![
        CheckRow { name: "zeroth order dipolar, closed vs direct", value: worst[0], limit: tol, upper: true },
        CheckRow { name: "zeroth order dephasing, closed vs direct", value: worst[1], limit: tol, upper: true },
        CheckRow { name: "first order dipolar, closed vs direct", value: worst[2], limit: tol, upper: true },
        CheckRow { name: "first order dephasing, closed vs direct", value: worst[3], limit: tol, upper: true },
        CheckRow { name: "theta=pi keeps H_dd", value: recouple[0], limit: 1e-12, upper: true },
        CheckRow { name: "theta=pi removes H_z (even n)", value: recouple[1], limit: 1e-12, upper: true },
        CheckRow { name: "theta=2pi keeps H_dd + H_z", value: recouple[2], limit: 1e-12, upper: true },
        CheckRow { name: "order-0 error ratio when tau halves", value: halving, limit: 1.5, upper: false },
        CheckRow { name: "order-1 / order-0 propagator error", value: order_gain, limit: 1.0, upper: true },
    ])
}

fn print_check_table(rows: &[CheckRow]) {
    println!("{:<44} {:>12} {:>10}  result", "check", "value", "limit");
    for r in rows {
        let cmp = if r.upper { "<=" } else { ">" };
        println!(
            "{:<44} {:>12.3e} {:>2}{:>8.1e}  {}",
            r.name,
            r.value,
            cmp,
            r.limit,
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
}

/// CSV of `G(ϑ)` and `f1..f3` over the configured grid.
pub fn grating_table(cfg: &RunConfig, n: usize) -> Result<String> {
    if n < 1 {
        return Err(Error::Config("--n must be >= 1".into()));
    }
    let mut out = String::new();
    for line in cfg.preamble("grating") {
        writeln!(out, "# {line}").unwrap();
    }
    writeln!(out, "# n_pulses={n}").unwrap();
    writeln!(out, "theta_rad,grating,f1,f2,f3").unwrap();
    for theta in cfg.theta_grid.radians() {
        let (f1, f2, f3) = if n >= 2 { filter_functions(theta, n) } else { (0.0, 0.0, 0.0) };
        writeln!(
            out,
            "{},{},{},{},{}",
            format_sci(theta),
            format_sci(grating(theta, n)),
            format_sci(f1),
            format_sci(f2),
            format_sci(f3)
        )
        .unwrap();
    }
    Ok(out)
}

/// Minimal SVG polyline; the y axis is logarithmic when all values are positive.
pub fn svg_line_chart(points: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let log_y = !finite.is_empty() && finite.iter().all(|p| p.1 > 0.0);
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(ty(y));
        y1 = y1.max(ty(y));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let mut path = String::new();
    for &(x, y) in &finite {
        let px = m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let py = h - m - (ty(y) - y0) / (y1 - y0) * (h - 2.0 * m);
        write!(path, "{px:.2},{py:.2} ").unwrap();
    }
    let y_note = if log_y { format!("log10 {y_label}: {y0:.3} .. {y1:.3}") } else { format!("{y_label}: {y0:.4e} .. {y1:.4e}") };
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n\
         <rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n\
         <polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"{}\"/>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{x_label}: {x0:.4} .. {x1:.4}</text>\n\
         <text x=\"{m}\" y=\"{}\" font-size=\"12\">{y_note}</text>\n</svg>\n",
        w - 2.0 * m,
        h - 2.0 * m,
        path.trim_end(),
        w / 2.0,
        h - 15.0,
        m - 15.0
    )
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::CapacityExceeded { .. } => EXIT_CAPACITY,
        _ => EXIT_RUNTIME,
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let env_seed = std::env::var("DDSIM_SEED").ok();
    cfg.resolve_seed(cli.seed, env_seed.as_deref())?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    let jobs = cli.jobs.unwrap_or(0);
    match cli.command {
        Command::Sweep => {
            let run = run_sweep(&cfg, jobs)?;
            print_sweep_summary(&run);
            Ok(EXIT_OK)
        }
        Command::Decay { theta_deg } => {
            let run = run_decay(&cfg, theta_deg)?;
            match &run.t2prime_point {
                Ok(v) => println!("T2' (final point)          {} s", format_sci(*v)),
                Err(e) => println!("T2' (final point)          n/a: {e}"),
            }
            match &run.t2prime_fit {
                Ok(v) => println!("T2' (stretched-exp 1/e)    {} s", format_sci(*v)),
                Err(e) => println!("T2' (stretched-exp 1/e)    n/a: {e}"),
            }
            println!("wrote {}", cfg.output_dir.join("decay.csv").display());
            Ok(EXIT_OK)
        }
        Command::MagnusCheck { inject_f2_sign_error } => {
            let rows = magnus_checks(&cfg.magnus, cfg.base_seed.unwrap_or(0), inject_f2_sign_error)?;
            print_check_table(&rows);
            Ok(if rows.iter().all(CheckRow::passed) { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Grating { n } => {
            let table = grating_table(&cfg, n.unwrap_or(cfg.sequence.n_pulses))?;
            ensure_dir(&cfg.output_dir)?;
            let path = cfg.output_dir.join("grating.csv");
            write_file(&path, &table)?;
            println!("wrote {}", path.display());
            Ok(EXIT_OK)
        }
    }
}
