//! Pulse-train timing, the named variants and convergence lengths.
use ddsim::sequence::{convergence_length, duty_cycle, make_sequence, special_case, Interaction};
use std::f64::consts::PI;

fn main() -> ddsim::Result<()> {
    let base = make_sequence(1.2 * PI, 32e-6, 6e-6, 0.0, 2000, 11.4e3)?;
    println!("base: t_p {:.2} us, tau {:.2} us, duty {:.3}", base.t_p * 1e6, base.tau() * 1e6, duty_cycle(&base));
    for name in ["cpmg", "waugh_ostroff", "spin_lock", "fid"] {
        let s = special_case(name, &base)?;
        println!("{name:>14}: theta/pi {:.2}  t_1 {:.1} us  tau {:.2} us", s.theta / PI, s.t_1 * 1e6, s.tau() * 1e6);
    }
    for u in [0.5, 0.99, 1.01, 1.5] {
        let dd = convergence_length(u * PI, Interaction::Dipolar)?;
        let z = convergence_length(u * PI, Interaction::Dephasing)?;
        println!("theta = {u} pi: L_dd {dd}, L_z {z}");
    }
    Ok(())
}
