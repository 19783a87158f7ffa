//! Online learning-to-learn of a shared regularization bias.
//!
//! Each task is solved by one pass of SGD on an empirical risk regularized by
//! `(lambda/2) |w - h|^2`. The bias `h` is learned across a stream of tasks by
//! online gradient descent on the minimum of that regularized risk, using the
//! last SGD iterate to build a cheap epsilon-subgradient. An exact ERM oracle
//! (FISTA on the dual) provides exact meta-gradients, duality-gap
//! certificates and baselines.
//!
//! Module map:
//!
//! - [`losses`]: absolute and hinge losses, conjugates and proxes.
//! - [`task_data`]: datasets and the primal/dual within-task objectives.
//! - [`within_task`]: biased SGD, its primal-dual form, certificates.
//! - [`erm_oracle`]: FISTA on the dual, meta-objective value and gradient.
//! - [`meta_learner`]: online bias estimation.
//! - [`environments`]: synthetic task generators, ratings ingestion, splits.
//! - [`evaluation`]: transfer-risk estimates, online model selection, baselines.

pub mod environments;
pub mod erm_oracle;
pub mod error;
pub mod evaluation;
pub mod losses;
pub mod meta_learner;
pub mod task_data;
pub mod within_task;

pub use error::{Error, Result};
pub use losses::LossKind;
pub use task_data::{BiasVector, TaskDataset, TaskSplit};
