//! Traffic speed forecasting and route selection.
//!
//! The crate is organised as the two stages of the navigation pipeline:
//!
//! - [`datahub`] turns raw speed matrices into cleaned fields, windowed
//!   datasets and congestion labels, and generates synthetic corpora.
//! - [`gbtree`] is a second-order gradient boosted CART ensemble used for
//!   speed regression and congestion classification; [`baselines`] holds the
//!   reference predictors it is compared against.
//! - [`router`] prices a road graph on a speed snapshot and enumerates the
//!   Top-K loopless paths, and [`eopf`] re-ranks those candidates with a small
//!   neural corrector.
//! - [`metrics`], [`signal`] and [`uncertainty`] are the scalar evaluation,
//!   spectral predictability and speed-distribution helpers.

pub mod baselines;
pub mod datahub;
pub mod eopf;
pub mod gbtree;
pub mod metrics;
pub mod router;
pub mod signal;
pub mod uncertainty;

mod error;

pub use error::{Error, Result};
