//! Direct prediction of right-censored event times with small feed-forward
//! networks, with and without competing risks.
//!
//! The training objective combines a squared error that only penalises
//! censored records when their prediction falls before the censoring time,
//! and a smooth log-sigmoid lower bound of Harrell's C-index. A parametric
//! Weibull AFT regression is provided as a baseline, together with the
//! simulation designs and a replicate benchmark used to compare the two.
//!
//! ```no_run
//! use deepcent::{models, sim};
//!
//! let data = sim::simulate_noncompeting(&sim::SimConfig::standard(500, 6.0, 1))?;
//! let model = models::train_single(&data, &models::DeepCentConfig::default())?;
//! let times = model.predict(data.covariates().view())?;
//! # Ok::<(), deepcent::Error>(())
//! ```

pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod rng;
pub mod sim;
pub mod tuning;
pub mod weibull;

pub use data::{Dataset, Mode, SurvivalRecord};
pub use error::{Error, Result};
pub use io::AnyModel;
pub use losses::{CrLossParams, LossParams, Objective};
pub use models::{CrDeepCentModel, DeepCentModel, PredictionInterval, SurvivalModel};
pub use weibull::WeibullModel;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
