//! Initial predictor, log encoder and real-time update network.

mod gru;
mod initial;
mod realtime;

pub use gru::{Gru, GruMask, GruNodes};
pub use initial::{InitialConfig, InitialPredictor};
pub use realtime::{LogStep, RealtimeConfig, RealtimeMasks, RealtimeModel, StepVars};

use crate::error::{Error, Result};
use crate::gammadist::GammaParams;

/// Predictions for one outage: the onset estimate followed by one estimate per log.
#[derive(Clone, Debug)]
pub struct SequencePrediction {
    pub initial: GammaParams,
    pub updates: Vec<GammaParams>,
    /// `attention[t][head][token]`
    pub attention: Vec<Vec<Vec<f64>>>,
}

/// Run both models over an outage. Logs must be in time order.
pub fn predict_sequence(
    initial: &InitialPredictor,
    initial_features: &[f64],
    realtime: &RealtimeModel,
    realtime_features: &[f64],
    logs: &[LogStep<'_>],
) -> Result<SequencePrediction> {
    if logs.windows(2).any(|w| w[1].elapsed_hours < w[0].elapsed_hours) {
        return Err(Error::invalid("repair logs must be in time order"));
    }
    let first = initial.predict(initial_features)?;
    let steps = if logs.is_empty() {
        Vec::new()
    } else {
        realtime.predict(realtime_features, logs)?
    };
    let (updates, attention) = steps.into_iter().unzip();
    Ok(SequencePrediction {
        initial: first,
        updates,
        attention,
    })
}
