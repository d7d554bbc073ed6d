//! Reference lending rate models the PID controller is compared against.

mod aave;
mod ajna;
mod morpho;

pub use aave::{aave_rate, AaveConfig};
pub use ajna::{ajna_step, AjnaConfig, AjnaState};
pub use morpho::{curve as morpho_curve, morpho_step, MorphoConfig, MorphoState};
