//! TabQL: Q-learning whose Bellman updates are amortized into in-context
//! regression over a tabularized replay context.
//!
//! A DQN warm-up collects transitions labeled with its Q-estimates. Once a
//! quality gate on recent episode returns fires, control passes to a frozen
//! in-context regressor that predicts Q-values from the most recent
//! transitions, while the DQN keeps producing labels for newly collected
//! rows. The [`theory`] module holds exact dynamic-programming oracles and
//! the error bounds, evaluated on the same runs through an [`theory::ErrorLedger`].

pub mod engine;
pub mod env;
pub mod harness;
pub mod qnet;
pub mod regressor;
pub mod replay;
pub mod rng;
pub mod theory;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Env(#[from] env::EnvError),
    #[error(transparent)]
    Net(#[from] qnet::NetError),
    #[error(transparent)]
    Regressor(#[from] regressor::RegressorError),
    #[error(transparent)]
    Replay(#[from] replay::ReplayError),
    #[error(transparent)]
    Theory(#[from] theory::TheoryError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    let plain = format!("{v}");
    let sci = format!("{v:e}");
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_lowest_tie() {
        assert_eq!(argmax(&[1.0, 1.0, 0.0]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn float_text_round_trips() {
        for v in [0.0, -0.0, 1.0, 0.1, -13.5, 1e300, 2.5e-310, 123456789.0, f64::MAX] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_float(1e300), "1e300");
        assert_eq!(format_float(0.25), "0.25");
        assert_eq!(format_float(-20.0), "-20");
    }
}
