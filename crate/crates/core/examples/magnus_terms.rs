//! Closed-form average Hamiltonians against the toggling-frame sums and the exact propagator.
use ddsim::cli::random_small_network;
use ddsim::magnus::*;
use ddsim::sequence::SequenceParams;
use ddsim::spin_algebra::{build_dipolar, HamiltonianPair};

fn main() -> ddsim::Result<()> {
    let net = random_small_network(3, 3)?;
    let pair = HamiltonianPair::from_network(&net)?;
    let h_dd = build_dipolar(&net)?;
    let (theta, n) = (2.3, 16);
    let tau = 0.05 / pair.total().frobenius_norm();
    let e0 = relative_error(&magnus0_dipolar_closed(&net, theta, n)?, &magnus0_direct(&h_dd, theta, n)?)?;
    let e1 = relative_error(&magnus1_dipolar_closed(&net, theta, n, tau)?, &magnus1_direct(&h_dd, theta, n, tau)?)?;
    println!("closed vs direct: order 0 {e0:.2e}, order 1 {e1:.2e}");
    println!("G = {:.4}, filters = {:?}", grating(theta, n), filter_functions(theta, n));
    let seq = SequenceParams { theta, t_p: 0.0, t_acq: tau, t_d: 0.0, t_1: 0.0, n_pulses: n, rabi_omega: None };
    for order in [MagnusOrder::Zeroth, MagnusOrder::First] {
        let r = compare_with_exact(&pair, &seq, order)?;
        println!("{order:?}: propagator error {:.3e}", r.propagator_error);
    }
    Ok(())
}
