//! Build the dipolar and dephasing Hamiltonians and rescale to a target norm ratio.
use ddsim::lattice::{generate_network, LatticeConfig, DEFAULT_DEPHASING_RMS_HZ};
use ddsim::spin_algebra::{commutator, rescale_to_ratio, HamiltonianPair};

fn main() -> ddsim::Result<()> {
    let net = generate_network(&LatticeConfig::new(0.03, 7), 6, DEFAULT_DEPHASING_RMS_HZ)?;
    let pair = HamiltonianPair::from_network(&net)?;
    let (dd, z) = (pair.h_dd.frobenius_norm(), pair.h_z.frobenius_norm());
    println!("dim {}  |H_dd| {dd:.4e}  |H_z| {z:.4e}  ratio {:.3}", pair.dim(), dd / z);
    let weak = rescale_to_ratio(&pair, 0.2)?;
    println!("rescaled ratio {:.6}", weak.h_dd.frobenius_norm() / weak.h_z.frobenius_norm());
    println!("|[H_dd, H_z]| = {:.4e}", commutator(&pair.h_dd, &pair.h_z)?.frobenius_norm());
    Ok(())
}
