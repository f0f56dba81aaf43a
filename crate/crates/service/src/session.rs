use prefbo::experiment::{Experiment, ExperimentConfig, Proposal};
use prefbo::preference::{Channel, PosteriorSummary, Response};
use prefbo::PreferenceRecord;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::event::{EvaluationMode, Event, LoggedEvent};
use crate::state::{Phase, SessionState};
use crate::store::Store;

/// Body of `POST /sessions`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub config: ExperimentConfig,
    /// Defaults to `builtin` when the config names a problem, else `manual`.
    #[serde(default)]
    pub evaluation: Option<EvaluationMode>,
    /// Display names of the attributes, one per output.
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

impl CreateSession {
    /// Parses a request body, reporting the path of the first bad field.
    pub fn parse(body: &[u8]) -> Result<Self, ApiError> {
        let de = &mut serde_json::Deserializer::from_slice(body);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { String::new() } else { path };
            ApiError::field(field, e.into_inner().to_string())
        })
    }
}

/// A live session: the public state, its log, and the engine it folds.
#[derive(Debug)]
pub struct Session {
    state: SessionState,
    log: Vec<LoggedEvent>,
    experiment: Experiment,
    store: Store,
    /// A proposal is being computed off the request path.
    busy: bool,
    /// The last proposal failed; waits for [`retry`](Self::retry).
    halted: bool,
}

impl Session {
    /// Validates the request, writes the `created` event and, for built-in
    /// problems, evaluates the initial designs.
    pub fn create(id: String, request: CreateSession, store: Store) -> Result<Self, ApiError> {
        let CreateSession {
            config,
            evaluation,
            labels,
        } = request;
        let experiment = Experiment::new(config.clone()).map_err(|e| match e {
            prefbo::Error::InvalidField { field, message } => ApiError::field(format!("config.{field}"), message),
            other => ApiError::field("config", other.to_string()),
        })?;
        let mode = evaluation.unwrap_or(if config.problem.is_some() {
            EvaluationMode::Builtin
        } else {
            EvaluationMode::Manual
        });
        if mode == EvaluationMode::Builtin && config.problem.is_none() {
            return Err(ApiError::field("evaluation", "builtin evaluation needs config.problem"));
        }
        if let Some(l) = &labels {
            if l.len() != experiment.attributes() {
                return Err(ApiError::field(
                    "labels",
                    format!("expected {} labels, got {}", experiment.attributes(), l.len()),
                ));
            }
        }
        if store.path(&id).exists() {
            return Err(ApiError::field("id", format!("session {id} already exists")));
        }
        let created = LoggedEvent {
            seq: 1,
            event: Event::Created {
                id: id.clone(),
                config,
                mode,
                labels,
                initial_designs: experiment.initial_designs(),
                posterior: experiment.posterior().summary(),
            },
        };
        let state = SessionState::from_created(&created)?;
        store.append(&id, &created)?;
        let mut session = Session {
            state,
            log: vec![created],
            experiment,
            store,
            busy: false,
            halted: false,
        };
        session.settle()?;
        Ok(session)
    }

    /// Rebuilds a session from its log. The θ posterior is recomputed and
    /// must match the one recorded.
    pub fn restore(log: Vec<LoggedEvent>, store: Store) -> Result<Self, ApiError> {
        let state = SessionState::replay(&log)?;
        let evaluations = state.evaluations.iter().map(|e| (e.x.clone(), e.y.clone())).collect();
        let records = state
            .preferences
            .iter()
            .map(|p| PreferenceRecord {
                m: p.m,
                first: state.evaluations[p.pair.0].y.clone(),
                second: state.evaluations[p.pair.1].y.clone(),
                response: p.response,
                channel: Channel::Human,
                designs: Some(p.pair),
            })
            .collect();
        let model = log.iter().rev().find_map(|e| match &e.event {
            Event::Proposed { model, .. } => Some(model.clone()),
            _ => None,
        });
        let experiment = Experiment::restore(state.config.clone(), evaluations, records, model.flatten())?;
        if experiment.posterior().summary() != state.posterior {
            return Err(prefbo::Error::Numerical(format!("{}: replayed posterior differs from the log", state.id)).into());
        }
        let halted = state.error.is_some();
        Ok(Session {
            state,
            log,
            experiment,
            store,
            busy: false,
            halted,
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn log(&self) -> &[LoggedEvent] {
        &self.log
    }

    pub fn experiment(&self) -> &Experiment {
        &self.experiment
    }

    pub fn is_busy(&self) -> bool {
        self.busy
    }

    /// Applies `event` to a copy of the state, persists it, then commits.
    fn commit(&mut self, event: Event) -> Result<(), ApiError> {
        let entry = LoggedEvent {
            seq: self.state.seq + 1,
            event,
        };
        let mut next = self.state.clone();
        next.apply(&entry)?;
        self.store.append(&self.state.id, &entry)?;
        self.state = next;
        self.log.push(entry);
        Ok(())
    }

    /// Runs every step that needs no outside input: built-in evaluations
    /// and posing the next query.
    fn settle(&mut self) -> Result<(), ApiError> {
        loop {
            match self.state.phase {
                Phase::Initializing | Phase::Evaluating if self.state.mode == EvaluationMode::Builtin => {
                    let Some(p) = self.state.pending_design.clone() else { break };
                    let problem = self.state.config.problem.expect("builtin sessions name a problem");
                    let y = problem.evaluate(&p.x)?;
                    self.evaluate(p.x, y)?;
                }
                Phase::AwaitingPreference if self.state.pending_query.is_none() => {
                    let pair = self.experiment.query_pair()?;
                    let m = self.state.preferences.len() + 1;
                    self.commit(Event::QueryPosed { m, pair })?;
                }
                _ => break,
            }
        }
        Ok(())
    }

    fn evaluate(&mut self, x: Vec<f64>, y: Vec<f64>) -> Result<(), ApiError> {
        let mut exp = self.experiment.clone();
        exp.record_evaluation(x.clone(), y.clone())?;
        let n = self.state.evaluations.len() + 1;
        self.commit(Event::Evaluated { n, x, y })?;
        self.experiment = exp;
        Ok(())
    }

    /// Records the DM's answer to the pending query. `m`, when given, must
    /// name that query; repeating an earlier `m` is a duplicate.
    pub fn submit_preference(&mut self, m: Option<usize>, response: Response) -> Result<PosteriorSummary, ApiError> {
        let recorded = self.state.preferences.len();
        if let Some(m) = m {
            if m >= 1 && m <= recorded {
                return Err(ApiError::Duplicate { m });
            }
        }
        let query = match (&self.state.pending_query, self.state.phase) {
            (Some(q), Phase::AwaitingPreference) => q.clone(),
            _ => return Err(ApiError::phase(self.state.phase, "no query is awaiting a response")),
        };
        if let Some(m) = m {
            if m != query.m {
                return Err(ApiError::field("m", format!("the pending query is interaction {}", query.m)));
            }
        }
        let mut exp = self.experiment.clone();
        let posterior = exp.record_preference(query.pair, response, Channel::Human)?.summary();
        self.commit(Event::PreferenceRecorded {
            m: query.m,
            response,
            posterior: posterior.clone(),
        })?;
        self.experiment = exp;
        Ok(posterior)
    }

    /// Accepts a measured attribute vector for the pending design (manual
    /// mode only).
    pub fn submit_evaluation(&mut self, x: Option<Vec<f64>>, y: Vec<f64>) -> Result<(), ApiError> {
        if self.state.mode != EvaluationMode::Manual {
            return Err(ApiError::Mode("this session evaluates its built-in problem itself".into()));
        }
        let pending = match (&self.state.pending_design, self.state.phase) {
            (Some(p), Phase::Initializing | Phase::Evaluating) => p.clone(),
            _ => return Err(ApiError::phase(self.state.phase, "no design is awaiting evaluation")),
        };
        if x.as_ref().is_some_and(|x| *x != pending.x) {
            return Err(ApiError::field("x", format!("the pending design is evaluation {}", pending.n)));
        }
        let k = self.experiment.attributes();
        if y.len() != k || y.iter().any(|v| !v.is_finite()) {
            return Err(ApiError::field("y", format!("expected {k} finite attribute values")));
        }
        self.evaluate(pending.x, y)?;
        self.settle()
    }

    /// Hands out a copy of the engine to compute the next design, unless
    /// one is already running or none is due.
    pub fn begin_optimization(&mut self) -> Option<Experiment> {
        if self.busy || self.halted || self.state.phase != Phase::Optimizing {
            return None;
        }
        self.busy = true;
        Some(self.experiment.clone())
    }

    /// Lets [`begin_optimization`](Self::begin_optimization) try again
    /// after a failure.
    pub fn retry(&mut self) -> Result<(), ApiError> {
        if self.state.phase != Phase::Optimizing || !self.halted {
            return Err(ApiError::phase(self.state.phase, "nothing to retry"));
        }
        self.halted = false;
        Ok(())
    }

    pub fn finish_optimization(&mut self, experiment: Experiment, proposal: prefbo::Result<Proposal>) -> Result<(), ApiError> {
        self.busy = false;
        match proposal {
            Ok(p) => {
                let n = self.state.evaluations.len() + 1;
                self.commit(Event::Proposed {
                    n,
                    x: p.x,
                    acquisition_value: p.acquisition_value,
                    flat: p.flat,
                    model: p.model,
                })?;
                self.experiment = experiment;
                self.settle()
            }
            Err(e) => {
                self.halted = true;
                self.commit(Event::Failed { message: e.to_string() })
            }
        }
    }
}
