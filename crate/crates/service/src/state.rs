use prefbo::experiment::{pareto_front, ExperimentConfig};
use prefbo::preference::{PosteriorSummary, Response};
use serde::{Deserialize, Serialize};

use crate::event::{EvaluationMode, Event, LoggedEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initializing,
    AwaitingPreference,
    Optimizing,
    Evaluating,
    MenuReady,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Initializing => "initializing",
            Phase::AwaitingPreference => "awaiting_preference",
            Phase::Optimizing => "optimizing",
            Phase::Evaluating => "evaluating",
            Phase::MenuReady => "menu_ready",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceEntry {
    pub m: usize,
    /// Evaluation indices (0-based) of the compared designs, first then second.
    pub pair: (usize, usize),
    pub response: Response,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingQuery {
    pub m: usize,
    pub pair: (usize, usize),
}

/// The design waiting for its evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingDesign {
    pub n: usize,
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquisition_value: Option<f64>,
}

/// Everything a client can see about a session. Built only by
/// [`SessionState::apply`], so replaying the log reproduces it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub seq: u64,
    pub phase: Phase,
    pub mode: EvaluationMode,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub init_count: usize,
    pub initial_designs: Vec<Vec<f64>>,
    pub evaluations: Vec<Evaluation>,
    pub preferences: Vec<PreferenceEntry>,
    pub posterior: PosteriorSummary,
    pub pending_query: Option<PendingQuery>,
    pub pending_design: Option<PendingDesign>,
    pub error: Option<String>,
}

#[derive(Debug, thiserror::Error)]
#[error("event {seq}: {message}")]
pub struct FoldError {
    pub seq: u64,
    pub message: String,
}

impl SessionState {
    /// Starts a state from the first log entry, which must be `created`.
    pub fn from_created(entry: &LoggedEvent) -> Result<Self, FoldError> {
        let Event::Created {
            id,
            config,
            mode,
            labels,
            initial_designs,
            posterior,
        } = &entry.event
        else {
            return Err(FoldError {
                seq: entry.seq,
                message: "a log must start with a created event".into(),
            });
        };
        if entry.seq != 1 || initial_designs.is_empty() {
            return Err(FoldError {
                seq: entry.seq,
                message: "malformed created event".into(),
            });
        }
        Ok(SessionState {
            id: id.clone(),
            seq: 1,
            phase: Phase::Initializing,
            mode: *mode,
            config: config.clone(),
            labels: labels.clone(),
            init_count: initial_designs.len(),
            initial_designs: initial_designs.clone(),
            evaluations: Vec::new(),
            preferences: Vec::new(),
            posterior: posterior.clone(),
            pending_query: None,
            pending_design: Some(PendingDesign {
                n: 1,
                x: initial_designs[0].clone(),
                acquisition_value: None,
            }),
            error: None,
        })
    }

    /// Folds a whole log.
    pub fn replay(log: &[LoggedEvent]) -> Result<Self, FoldError> {
        let first = log.first().ok_or(FoldError {
            seq: 0,
            message: "empty log".into(),
        })?;
        let mut state = Self::from_created(first)?;
        for e in &log[1..] {
            state.apply(e)?;
        }
        Ok(state)
    }

    pub fn total_evaluations(&self) -> usize {
        self.init_count + self.config.evaluations
    }

    /// Applies one event. Events that do not fit the current phase are
    /// rejected so a corrupted log cannot produce an impossible state.
    pub fn apply(&mut self, entry: &LoggedEvent) -> Result<(), FoldError> {
        let fail = |message: String| FoldError {
            seq: entry.seq,
            message,
        };
        if entry.seq != self.seq + 1 {
            return Err(fail(format!("expected sequence number {}", self.seq + 1)));
        }
        match &entry.event {
            Event::Created { .. } => return Err(fail("duplicate created event".into())),
            Event::Evaluated { n, x, y } => {
                let expected = self.pending_design.as_ref().filter(|_| matches!(self.phase, Phase::Initializing | Phase::Evaluating));
                match expected {
                    Some(p) if p.n == *n && p.x == *x => {}
                    _ => return Err(fail(format!("unexpected evaluation {n}"))),
                }
                self.evaluations.push(Evaluation {
                    n: *n,
                    x: x.clone(),
                    y: y.clone(),
                });
                self.error = None;
                let done = self.evaluations.len();
                if done < self.init_count {
                    self.pending_design = Some(PendingDesign {
                        n: done + 1,
                        x: self.initial_designs[done].clone(),
                        acquisition_value: None,
                    });
                    self.phase = Phase::Initializing;
                } else {
                    self.pending_design = None;
                    self.phase = if done >= self.total_evaluations() {
                        Phase::MenuReady
                    } else {
                        Phase::AwaitingPreference
                    };
                }
            }
            Event::QueryPosed { m, pair } => {
                let n = self.evaluations.len();
                if self.phase != Phase::AwaitingPreference
                    || self.pending_query.is_some()
                    || *m != self.preferences.len() + 1
                    || pair.0 >= n
                    || pair.1 >= n
                    || pair.0 == pair.1
                {
                    return Err(fail(format!("unexpected query {m}")));
                }
                self.pending_query = Some(PendingQuery { m: *m, pair: *pair });
            }
            Event::PreferenceRecorded { m, response, posterior } => {
                let Some(q) = self.pending_query.take().filter(|q| q.m == *m) else {
                    return Err(fail(format!("preference {m} without its query")));
                };
                self.preferences.push(PreferenceEntry {
                    m: *m,
                    pair: q.pair,
                    response: *response,
                });
                self.posterior = posterior.clone();
                self.phase = Phase::Optimizing;
            }
            Event::Proposed {
                n,
                x,
                acquisition_value,
                ..
            } => {
                if self.phase != Phase::Optimizing || *n != self.evaluations.len() + 1 {
                    return Err(fail(format!("unexpected proposal {n}")));
                }
                self.pending_design = Some(PendingDesign {
                    n: *n,
                    x: x.clone(),
                    acquisition_value: *acquisition_value,
                });
                self.error = None;
                self.phase = Phase::Evaluating;
            }
            Event::Failed { message } => self.error = Some(message.clone()),
        }
        self.seq = entry.seq;
        Ok(())
    }

    /// Pareto-optimal evaluations so far.
    pub fn menu(&self) -> Menu {
        let ys: Vec<Vec<f64>> = self.evaluations.iter().map(|e| e.y.clone()).collect();
        let entries = pareto_front(&ys)
            .into_iter()
            .map(|i| MenuEntry {
                index: i,
                n: self.evaluations[i].n,
                x: self.evaluations[i].x.clone(),
                y: self.evaluations[i].y.clone(),
            })
            .collect();
        Menu {
            phase: self.phase,
            complete: self.phase == Phase::MenuReady,
            evaluated: self.evaluations.len(),
            entries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuEntry {
    /// Position in the evaluation list.
    pub index: usize,
    /// 1-based evaluation number at which the design was first seen.
    pub n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Menu {
    pub phase: Phase,
    pub complete: bool,
    pub evaluated: usize,
    pub entries: Vec<MenuEntry>,
}
