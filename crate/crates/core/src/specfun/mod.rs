//! Special functions behind the closed-form amplitudes.

mod dd;
pub mod exact;
pub mod gamma;
pub mod pcf;

pub use exact::{exact_amplitudes, MAX_EXACT_BETA, exact_block_trajectory, exact_two_qubit};
pub use gamma::{gamma_complex, ln_gamma_complex, recip_gamma};
pub use pcf::{pcf_d, pcf_d_with, PcfConfig};
