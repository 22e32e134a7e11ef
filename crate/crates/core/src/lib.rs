//! Deterministic interpreter for finite-precision transformers and the
//! machines built from them: masked diffusion models, padded looped
//! transformers and parallel chain of thought, plus compilers between them.

pub mod cli;
pub mod error;
pub mod fxp;
pub mod gadgets;
pub mod compile;
pub mod models;
pub mod oracle;
pub mod tfcore;

pub use error::{Error, Result};
pub use fxp::{Cfg, Fx, FxVec, Mat};
