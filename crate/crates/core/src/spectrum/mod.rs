//! Large-deviation spectra of the workload: theoretical, from the principal
//! eigenvalue of the tilted generator, and empirical, from window averages
//! of a trace.
//!
//! Spectrum values are non-positive: `f(alpha) = -sup_q (q alpha - Lambda(q))`,
//! so that `exp(tau f(alpha))` reads as the probability of a mean workload
//! near `alpha` over a window of length `tau`.

mod band;
mod curve;
mod empirical;
mod matrix;
mod theory;

pub(crate) use curve::interpolate as curve_value;
pub use curve::{
    load_spectra_csv, read_spectra_csv, save_spectra_csv, write_spectra_csv, SpectrumCurve,
    SpectrumPoint,
};
pub use empirical::{
    empirical_spectra, empirical_spectrum, empirical_spectrum_path, spectrum_from_integrals,
};
pub use matrix::{state_count, RateMatrix, DEFAULT_STATE_LIMIT};
pub use theory::{
    default_q_grid, grid_derivative, legendre_curve, linspace, mean_workload_of, scgf, scgf_curve,
    scgf_with, stationary_distribution, theoretical_spectrum, theoretical_spectrum_of,
    workload_marginal, workload_observable, EigenMethod, PowerConfig, Scgf,
};
