//! The survival curve against brute-force propagation built from scratch.

use ddsim::engine::PreparedSystem;
use ddsim::lattice::SpinNetwork;
use ddsim::sequence::SequenceParams;
use ddsim::spin_algebra::HamiltonianPair;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

type M = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `σ/2` on spin `j` of `ns`, spin 0 as the most significant factor.
fn spin_op(j: usize, ns: usize, axis: char) -> M {
    let single = match axis {
        'x' => M::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)]),
        'y' => M::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.0, 0.0)]),
        _ => M::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]),
    };
    let mut out = M::identity(1, 1);
    for k in 0..ns {
        let f = if k == j { single.clone() } else { M::identity(2, 2) };
        out = out.kronecker(&f);
    }
    out
}

fn expi(h: &M, t: f64) -> M {
    (h * c(0.0, t)).exp()
}

#[test]
fn survival_matches_step_by_step_propagation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ns = 4;
    let dim = 1 << ns;
    let mut d = vec![vec![0.0; ns]; ns];
    for j in 0..ns {
        for k in j + 1..ns {
            d[j][k] = rng.random_range(-1500.0..1500.0);
            d[k][j] = d[j][k];
        }
    }
    let cs: Vec<f64> = (0..ns).map(|_| rng.random_range(-1000.0..1000.0)).collect();
    let net = SpinNetwork::from_couplings(d.clone(), cs.clone()).unwrap();
    let pair = HamiltonianPair::from_network(&net).unwrap();

    let mut h = M::zeros(dim, dim);
    let mut ix = M::zeros(dim, dim);
    for j in 0..ns {
        h += spin_op(j, ns, 'z') * c(2.0 * PI * cs[j], 0.0);
        ix += spin_op(j, ns, 'x');
        for k in j + 1..ns {
            let zz = spin_op(j, ns, 'z') * spin_op(k, ns, 'z');
            let xx = spin_op(j, ns, 'x') * spin_op(k, ns, 'x');
            let yy = spin_op(j, ns, 'y') * spin_op(k, ns, 'y');
            h += (zz * c(2.0, 0.0) - xx - yy) * c(2.0 * PI * d[j][k], 0.0);
        }
    }
    for (theta, t1) in [(1.3, 10e-6), (PI, 0.0), (PI / 2.0, 19e-6), (3.9, 25e-6)] {
        let seq = SequenceParams { theta, t_p: 0.0, t_acq: 32e-6, t_d: 6e-6, t_1: t1, n_pulses: 60, rabi_omega: None };
        let tau = seq.tau();
        let k = expi(&h, t1) * expi(&ix, theta) * expi(&h, tau - t1);
        let norm = (&ix * &ix).trace().re;
        let fast = PreparedSystem::new(&pair).unwrap().survival_curve(&seq).unwrap();
        let mut u = M::identity(dim, dim);
        for (n, f) in fast.iter().enumerate() {
            u = &u * &k;
            let rho = u.adjoint() * &ix * &u;
            let slow = (rho * &ix).trace().re / norm;
            assert!((f - slow).abs() < 1e-9, "theta {theta} n {}: {f} vs {slow}", n + 1);
        }
    }
}
