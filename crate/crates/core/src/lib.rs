//! Adaptive parameterization of vector-valued distributed parameters by
//! refinement indicators.
//!
//! A parameter living on the cells of a mesh is searched for as a
//! piecewise-constant function over a *zonation* (a partition of the cells).
//! Starting from a coarse zonation, the driver repeatedly proposes cuttings of
//! single zones, ranks them by the norm of the Lagrange multiplier of the
//! zero-jump constraint (the refinement indicator, obtained for free from the
//! fine gradient), trial-optimizes the most promising ones and commits the
//! best.
//!
//! The crate ships two in-process models (the identity model, which turns the
//! algorithm into a color image segmenter, and a dense linear model used as an
//! exact oracle), a line protocol for out-of-process models, PNM image I/O and
//! the `refind` command-line tool.
//!
//! Data-parallel phases (indicator evaluation and trial optimizations) run on
//! rayon when the `parallel` feature is enabled and fall back to sequential
//! loops otherwise; results are reduced in a fixed order so both paths produce
//! identical histories.
//!
//! ```
//! use refind::{run, CoarseParam, FineParam, IdentityModel, Mesh, RunConfig, StopReason, Zonation};
//!
//! let mesh = Mesh::grid(4, 1)?;
//! let data = FineParam::new(1, vec![0.0, 0.0, 10.0, 10.0])?;
//! let model = IdentityModel::observed(mesh.clone(), data)?;
//! let cfg = RunConfig::for_model(&model);
//! let history = run(&model, &mesh, &Zonation::single(4), &CoarseParam::zeros(1, 1), &cfg)?;
//! assert_eq!(history.zonation.n_zones(), 2);
//! assert_eq!(history.stop_reason, StopReason::ObjectiveFit);
//! # Ok::<(), refind::Error>(())
//! ```

pub mod config;
pub mod driver;
pub mod error;
pub mod exec;
pub mod indicators;
pub mod io;
pub mod models;
pub mod strategies;
pub mod verify;
pub mod worker;
pub mod zonation;

pub use driver::{run, IterationRecord, RunConfig, RunHistory, StopReason};
pub use error::{Error, Result};
pub use exec::Execution;
pub use indicators::IndicatorReport;
pub use models::{IdentityModel, LinearModel, Model, ObservationMask};
pub use strategies::{SignMode, StrategyConfig, StrategyKind};
pub use zonation::{CoarseParam, CutLabel, Cutting, FineParam, Mesh, Side, Zonation};
