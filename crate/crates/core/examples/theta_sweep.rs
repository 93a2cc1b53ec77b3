//! A small ensemble flip-angle sweep and the width of the dip at pi.
use ddsim::analysis::*;
use ddsim::lattice::LatticeConfig;
use ddsim::sequence::make_sequence;
use std::f64::consts::PI;

fn main() -> ddsim::Result<()> {
    let spec = EnsembleSpec::new(LatticeConfig::new(0.03, 0), 5, CouplingRatio::Value(0.2), 8, 11);
    let seq = make_sequence(PI, 32e-6, 6e-6, 0.0, 2000, 11.4e3)?;
    let thetas: Vec<f64> = (-20..=20).map(|i| PI + 0.025 * i as f64).collect();
    let profile = sweep_theta(&spec, &seq, &thetas, &SweepOptions::default())?;
    for i in (0..profile.len()).step_by(4) {
        println!("{:.4} pi  T2' {:.4e} +- {:.1e} s", profile.thetas[i] / PI, profile.t2prime_mean[i], profile.t2prime_stderr[i]);
    }
    match dip_width(&profile, DipCenter::Pi) {
        Ok(w) => println!("dip width at pi: {w:.4} rad"),
        Err(e) => println!("no width: {e}"),
    }
    Ok(())
}
