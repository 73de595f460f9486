//! Experiment harness: configuration, the per-trial simulation rig, virtual
//! users, trial scripts for each mode, batches, reports, interactive
//! sessions and the evaluation metrics.

pub mod batch;
pub mod config;
pub mod metrics;
pub mod report;
pub mod rig;
pub mod session;
pub mod trial;
pub mod users;

pub use batch::{load_run_dir, read_records, run_batch, trial_seed, write_records};
pub use config::{HarnessConfig, MapConfig, RunConfig};
pub use metrics::{membrane_containment, summarize, two_sided_t_test, Containment, ModeSummary, TTest};
pub use report::{build_report, Report};
pub use rig::{Rig, TickOutcome, TickRecord};
pub use session::{ClientCommand, ServerMessage, Session, SessionError, SessionHost, StateFrame};
pub use trial::{run_mode, run_mode_with_offset, start_position, ExperimentRecord, TrialArtifacts};
pub use users::{Strategy, UserModel, VirtualUser};
