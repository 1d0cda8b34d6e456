use thiserror::Error;

/// Errors reported by the simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates the model's hypotheses.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// An input outside an operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Adaptive quadrature could not reach its target.
    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// The requested quantity is infinite for this regime.
    #[error("divergent quantity: {0}")]
    Divergent(String),

    /// The transverse wavenumber lies in the evanescent range.
    #[error("evanescent channel: eps * c0^2 * kappa^2 = {0} >= 1")]
    Evanescent(f64),

    /// A conserved quantity drifted past the allowed threshold.
    #[error("conservation defect {defect:.3e} at z = {z} exceeds {threshold:.1e}")]
    Conservation { defect: f64, z: f64, threshold: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
