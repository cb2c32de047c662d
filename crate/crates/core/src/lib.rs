//! Load flow by flexible holomorphic embedding (FFHE) with series VSC
//! devices, and a Newton-Raphson solver on the same equations.
//!
//! ```no_run
//! use ffhe::{facts::{enforce_limits, parse_devices, Method}, netmodel::parse_case, Options};
//!
//! let net = parse_case(&std::fs::read_to_string("case118.m")?)?;
//! let devices = parse_devices("sssc 49-50 p_flow=0.75")?;
//! let out = enforce_limits(&net, &devices, Method::NrWarmFfhe, &Options::default())?;
//! println!("converged with {} terms", out.solution.terms);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod error;
pub mod facts;
pub mod ffhe;
pub mod netmodel;
pub mod nr;
pub mod series;
mod serde_float;
mod solution;
pub mod study;
pub mod system;

pub use error::{Error, Result};
pub use solution::{Options, Solution, Solver, WarmStart};
pub use system::PowerSystem;
