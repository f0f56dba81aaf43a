use prefbo::experiment::{ExperimentConfig, ModelSnapshot};
use prefbo::preference::{PosteriorSummary, Response};
use serde::{Deserialize, Serialize};

/// Where attribute vectors come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    /// The service evaluates the configured built-in problem itself.
    Builtin,
    /// A client measures `f(x)` and posts it back.
    Manual,
}

/// One entry of a session's append-only log. The session state is a fold
/// over these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Event {
    Created {
        id: String,
        config: ExperimentConfig,
        mode: EvaluationMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
        initial_designs: Vec<Vec<f64>>,
        posterior: PosteriorSummary,
    },
    Evaluated {
        n: usize,
        x: Vec<f64>,
        y: Vec<f64>,
    },
    QueryPosed {
        m: usize,
        pair: (usize, usize),
    },
    PreferenceRecorded {
        m: usize,
        response: Response,
        posterior: PosteriorSummary,
    },
    Proposed {
        n: usize,
        x: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        acquisition_value: Option<f64>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        flat: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model: Option<ModelSnapshot>,
    },
    /// The next design could not be computed; the session waits for a retry.
    Failed {
        message: String,
    },
}

/// An event with its 1-based position in the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}
