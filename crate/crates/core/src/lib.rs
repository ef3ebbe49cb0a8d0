//! Gradient sampling descent for nonsmooth objectives, combined with a
//! local-scoring (smoother-projected) step to fit quantile additive models of
//! intraday sales panels.
//!
//! The crate is organised bottom-up:
//!
//! * [`panel`] ingests hourly sales records and arranges them into the
//!   replicated (hour, day-class) panel.
//! * [`loss`] is the pinball loss and its almost-everywhere derivative.
//! * [`smoother`] is a LOESS smoother applied separately per day class.
//! * [`minnorm`] projects the origin onto the convex hull of a gradient bundle.
//! * [`gsa`] is the generic gradient sampling engine.
//! * [`qam`] composes the above into the quantile additive model fitter.
//! * [`oracle`] holds brute-force references used by the tests.
//! * [`export`] and [`plot`] write surfaces, logs and SVG figures.
//! * [`cli`] backs the `qgsa` binary.
//!
//! The `examples/` directory of this crate has one runnable program per
//! capability; `cargo run --example fit_synthetic_panel` is a good start.

pub mod cli;
pub mod export;
pub mod gsa;
pub mod loss;
pub mod minnorm;
pub mod oracle;
pub mod panel;
pub mod plot;
pub mod qam;
pub mod smoother;

pub use gsa::{gsa_minimize, BundleMode, GsaParams, GsaResult, IterationLog, Objective};
pub use loss::PinballLoss;
pub use minnorm::{average_point, min_norm_point, GradientBundle, MinNormResult};
pub use panel::{SalesPanel, SalesRecord};
pub use qam::{qam_fit, qam_predict, QamConfig, QuantileSurface};
pub use smoother::{loess_fit, smooth_by_group, SmootherSpec};
