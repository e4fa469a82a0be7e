pub mod baselines;
pub mod bounds;
pub mod density;
pub mod error;
pub mod estimator;
pub mod measure;
pub mod oracle;
pub mod power;
pub mod rng;
pub mod synth;
pub mod types;
pub use error::{Error, Result};
