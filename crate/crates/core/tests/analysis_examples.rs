use std::f64::consts::PI;

use ddsim::analysis::decimate::windows_around;
use ddsim::analysis::dip::dip_width_points;
use ddsim::analysis::fit::first_crossing;
use ddsim::analysis::*;
use ddsim::engine::PreparedSystem;
use ddsim::lattice::{LatticeConfig, SpinNetwork};
use ddsim::sequence::{apply_case, make_sequence, SpecialCase};
use ddsim::spin_algebra::HamiltonianPair;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn sampled(f: impl Fn(f64) -> f64, n: usize, span: f64) -> Vec<(f64, f64)> {
    (1..=n).map(|i| span * i as f64 / n as f64).map(|t| (t, f(t))).collect()
}

#[test]
fn decimation_shrugs_off_spikes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let clean: Vec<(f64, f64)> = (0..2100).map(|i| i as f64 * 0.005).map(|t| (t, t.cos() + noise.sample(&mut rng))).collect();
    let mut spiky = clean.clone();
    for p in spiky.iter_mut() {
        if rng.random_bool(0.01) {
            p.1 += 5.0;
        }
    }
    let windows: Vec<(f64, f64)> = (0..100).map(|k| (k as f64 * 0.105, k as f64 * 0.105 + 0.1)).collect();
    let a = median_decimate(&clean, &windows).unwrap();
    let b = median_decimate(&spiky, &windows).unwrap();
    // noise floor: scatter of the clean decimation around the noiseless median
    let floor = a.iter().map(|p| (p.1 - p.0.cos()).abs()).fold(0.0, f64::max);
    let dev = a.iter().zip(&b).map(|(x, y)| (x.1 - y.1).abs()).fold(0.0, f64::max);
    assert!(dev <= floor, "spike deviation {dev} above noise floor {floor}");
}

#[test]
fn decimation_is_idempotent() {
    let raw = sampled(|t| (3.0 * t).sin(), 300, 3.0);
    let windows: Vec<(f64, f64)> = (0..30).map(|k| (k as f64 * 0.1, k as f64 * 0.1 + 0.099)).collect();
    let once = median_decimate(&raw, &windows).unwrap();
    let times: Vec<f64> = once.iter().map(|p| p.0).collect();
    let twice = median_decimate(&once, &windows_around(&times, 0.05)).unwrap();
    assert_eq!(once, twice);
}

#[test]
fn pure_exponential_fit_is_exact() {
    let pts = sampled(|t| 2.0 * (-t / 0.3).exp(), 60, 1.5);
    let f = fit_stretched_exp(&pts).unwrap();
    assert!((f.t2prime_1e / 0.3 - 1.0).abs() < 1e-6, "{f:?}");
    assert!((f.stretch_beta.unwrap() - 1.0).abs() < 1e-6);
    assert!(f.t2prime_ci.0 <= f.t2prime_1e && f.t2prime_1e <= f.t2prime_ci.1);
    assert_eq!(f.covariance.len(), 3);
}

#[test]
fn biexponential_cases() {
    let same = fit_biexponential(&sampled(|t| (-t / 0.4).exp(), 80, 2.0)).unwrap();
    assert!((same.t2prime_1e / 0.4 - 1.0).abs() < 1e-6, "{same:?}");

    let gen = |t: f64| 0.7 * (-t / 0.1).exp() + 0.3 * (-t / 1.0).exp();
    let f = fit_biexponential(&sampled(gen, 200, 4.0)).unwrap();
    // independent root of the generating function by bisection
    let (mut lo, mut hi) = (0.0, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gen(mid) > (-1.0f64).exp() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    assert!((f.t2prime_1e / root - 1.0).abs() < 1e-6, "{} vs {root}", f.t2prime_1e);
    assert_eq!(first_crossing(gen, (-1.0f64).exp(), 0.1).map(|c| (c / root - 1.0).abs() < 1e-9), Some(true));

    let stretched = sampled(|t| (-(t / 0.5f64).powf(0.7)).exp(), 150, 3.0);
    let s = fit_stretched_exp(&stretched).unwrap();
    let b = fit_biexponential(&stretched).unwrap();
    assert!((b.t2prime_1e / s.t2prime_1e - 1.0).abs() < 0.15, "{} vs {}", b.t2prime_1e, s.t2prime_1e);
}

#[test]
fn envelope_cases() {
    let osc = sampled(|t| (2.0 * PI * 5e3 * t).cos() * (-t / 2e-3).exp(), 4000, 8e-3);
    assert!((fit_fid_envelope(&osc).unwrap() / 2e-3 - 1.0).abs() < 0.02);
    let mono = sampled(|t| (-t / 0.7).exp(), 50, 2.0);
    assert!((fit_fid_envelope(&mono).unwrap() / 0.7 - 1.0).abs() < 1e-9);
    let short = [(1.0, 1.0), (2.0, 0.5)];
    assert!(fit_fid_envelope(&short).is_err());
}

#[test]
fn single_spin_fid_never_decays() {
    let net = SpinNetwork::from_couplings(vec![vec![0.0]], vec![1000.0]).unwrap();
    let pair = HamiltonianPair::from_network(&net).unwrap();
    let base = make_sequence(PI, 32e-6, 6e-6, 0.0, 600, 11.4e3).unwrap();
    let seq = apply_case(SpecialCase::Fid, &base).unwrap();
    let curve = PreparedSystem::new(&pair).unwrap().survival_curve(&seq).unwrap();
    let pts: Vec<(f64, f64)> = seq.sample_times().into_iter().zip(curve).collect();
    assert_eq!(fit_fid_envelope(&pts).unwrap(), f64::INFINITY);
}

fn small_spec(ratio: f64, m: usize) -> EnsembleSpec {
    EnsembleSpec::new(LatticeConfig::new(0.03, 0), 6, CouplingRatio::Value(ratio), m, 99)
}

#[test]
fn sweep_examples() {
    let seq = make_sequence(PI, 32e-6, 6e-6, 0.0, 2000, 11.4e3).unwrap();
    let echo = sweep_theta(&small_spec(0.0, 1), &seq, &[PI], &SweepOptions::default()).unwrap();
    assert_eq!(echo.t2prime_mean, vec![f64::INFINITY]);

    let p = sweep_theta(&small_spec(0.2, 6), &seq, &[PI, 1.22 * PI], &SweepOptions::default()).unwrap();
    assert!(p.t2prime_mean[0] < p.t2prime_mean[1], "{:?}", p.t2prime_mean);

    let grid = [0.5, 2.0, PI, 4.0, 1.0];
    let mut shuffled = grid;
    shuffled.reverse();
    let a = sweep_theta(&small_spec(0.2, 3), &seq, &grid, &SweepOptions::default()).unwrap().sorted();
    let b = sweep_theta(&small_spec(0.2, 3), &seq, &shuffled, &SweepOptions { jobs: 2, ..Default::default() })
        .unwrap()
        .sorted();
    assert_eq!(a, b);
    assert_eq!(ThetaProfile::from_json(&a.to_json().unwrap()).unwrap(), a);
    assert!(a.to_csv_string(&[]).starts_with("theta_rad,t2prime_mean_s,t2prime_stderr_s,n_ok\n"));
}

#[test]
fn sweep_rejects_bad_inputs() {
    let seq = make_sequence(PI, 32e-6, 6e-6, 0.0, 10, 11.4e3).unwrap();
    assert!(sweep_theta(&small_spec(0.2, 1), &seq, &[], &SweepOptions::default()).is_err());
    assert!(sweep_theta(&small_spec(0.2, 0), &seq, &[1.0], &SweepOptions::default()).is_err());
}

#[test]
fn clamping_policy_keeps_every_run() {
    let seq = make_sequence(PI, 32e-6, 6e-6, 0.0, 2000, 11.4e3).unwrap();
    let opts = SweepOptions { low_survival: LowSurvival::Clamp, ..Default::default() };
    let p = sweep_theta(&small_spec(0.2, 8), &seq, &[PI, 2.0 * PI], &opts).unwrap();
    assert_eq!(p.n_ok, vec![8, 8]);
}

#[test]
fn synthetic_dip_width() {
    let thetas: Vec<f64> = (-25..=25).map(|i| PI + 0.02 * i as f64).collect();
    let t2: Vec<f64> = thetas.iter().map(|t| 1.0 - 0.6 * (-(t - PI).powi(2) / (2.0 * 0.1f64.powi(2))).exp()).collect();
    let s = dip_width_points(&thetas, &t2, PI, DipTarget::Lifetime).unwrap();
    assert!((s / 0.1 - 1.0).abs() < 0.05, "{s}");
}
