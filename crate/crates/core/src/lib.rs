//! Partial multi-view clustering.
//!
//! Per-view MLP autoencoders are trained jointly with contrastive,
//! self-expression, reconstruction and alignment losses; missing views are
//! filled by KNN in latent space; view weights follow a softmax over per-view
//! losses; and the learned self-expression matrix feeds normalized spectral
//! clustering. [`experiment`] runs the seeded missing-data sweep and writes
//! mean ± std tables.

pub mod autodiff;
pub mod dataio;
pub mod error;
pub mod experiment;
pub mod impute;
pub mod kmeans;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod spectral;
pub mod trainer;

pub use error::{Error, Result};
