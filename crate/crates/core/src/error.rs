use thiserror::Error;

use crate::dynamics::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("cost of player {player} evaluated to non-finite value {value}")]
    Evaluation { player: usize, value: f64 },

    #[error("unknown game `{0}` (expected decoupled-quadratic, coupled-quadratic or rastrigin-coupled)")]
    UnknownGame(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The explicit scheme produced a non-finite coordinate. The trajectory up
    /// to the last finite state is attached.
    #[error("blow-up at player {player}, particle {particle}, step {step}")]
    BlowUp {
        player: usize,
        particle: usize,
        step: usize,
        partial: Box<Trajectory>,
    },

    #[error("trajectory has no snapshots recorded")]
    MissingSnapshots,

    #[error("reference oracle unstable: batch spread {spread:e} exceeds {tolerance:e}")]
    OracleUnstable { spread: f64, tolerance: f64 },

    #[error("could not draw a measure with p-moment <= {bound} after {attempts} attempts")]
    Rejection { bound: f64, attempts: usize },
}

pub(crate) fn check_len(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Input(format!(
            "{what}: expected length {expected}, got {got}"
        )));
    }
    Ok(())
}
