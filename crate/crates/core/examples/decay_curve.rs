//! Survival of transverse magnetization under a flip-angle train, and its T2'.
use ddsim::engine::{extract_t2prime, PreparedSystem};
use ddsim::lattice::{generate_network, LatticeConfig, DEFAULT_DEPHASING_RMS_HZ};
use ddsim::sequence::make_sequence;
use ddsim::spin_algebra::HamiltonianPair;
use std::f64::consts::PI;

fn main() -> ddsim::Result<()> {
    let net = generate_network(&LatticeConfig::new(0.03, 1), 6, DEFAULT_DEPHASING_RMS_HZ)?;
    let system = PreparedSystem::new(&HamiltonianPair::from_network(&net)?)?;
    for deg in [90.0, 170.0, 180.0, 218.0] {
        let seq = make_sequence(deg * PI / 180.0, 32e-6, 6e-6, 0.0, 2000, 11.4e3)?;
        let curve = system.decay(&seq, 1)?;
        let t2 = extract_t2prime(&curve).map_or_else(|e| e.to_string(), |t| format!("{t:.4e} s"));
        println!("{deg:5.1} deg: F(N) = {:.5}  T2' = {t2}", curve.final_survival().unwrap_or(f64::NAN));
    }
    Ok(())
}
