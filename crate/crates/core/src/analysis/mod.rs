//! Decimation, curve fits, SNR helpers and ensemble flip-angle sweeps.

pub mod decimate;
pub mod dip;
pub mod fit;
pub mod lm;
pub mod snr;
pub mod sweep;

pub use decimate::median_decimate;
pub use dip::{dip_width, dip_width_with, DipCenter, DipTarget};
pub use fit::{fit_biexponential, fit_fid_envelope, fit_stretched_exp, FitModel, FitResult};
pub use snr::{signal_yield, snr_bounds};
pub use sweep::{manifestation_seed, sweep_theta, CouplingRatio, EnsembleSpec, LowSurvival, SweepOptions, ThetaProfile};
