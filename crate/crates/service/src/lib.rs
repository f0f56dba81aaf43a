//! HTTP/JSON session layer for running the preference-learning optimization
//! loop with a human decision maker.
//!
//! Each session is an append-only event log on disk (one JSON-lines file);
//! its visible [`SessionState`] is a fold over that log, so a restarted
//! server resumes every session where it stopped.

pub mod api;
pub mod error;
pub mod event;
pub mod schema;
pub mod session;
pub mod state;
pub mod store;

pub use api::{router, AppState};
pub use error::{ApiError, FieldError};
pub use event::{EvaluationMode, Event, LoggedEvent};
pub use session::{CreateSession, Session};
pub use state::{Menu, MenuEntry, Phase, SessionState};
pub use store::Store;
