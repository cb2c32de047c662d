use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::netmodel::InsertOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WarmStart {
    None,
    /// Run this many Newton iterations from a flat start first.
    Nr(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Options {
    /// Convergence threshold on the largest residual, p.u.
    pub tol: f64,
    /// Highest series order computed before giving up.
    pub n_max: usize,
    /// Evaluate series with diagonal Padé approximants instead of partial sums.
    pub pade: bool,
    pub warm_start: WarmStart,
    /// Newton iteration cap.
    pub max_iters: usize,
    /// Switch generator buses to fixed Q when their reactive limits are hit.
    pub q_limits: bool,
    /// Cap on re-solves while relaxing device voltage limits.
    pub limit_passes: usize,
    pub insert: InsertOptions,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            n_max: 60,
            pade: false,
            warm_start: WarmStart::Nr(3),
            max_iters: 30,
            q_limits: true,
            limit_passes: 5,
            insert: InsertOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Solver {
    Ffhe,
    Nr,
}

/// Result of a single solve. Indices follow the solved system's internal
/// bus and current numbering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub solver: Solver,
    pub voltages: Vec<Complex64>,
    pub currents: Vec<Complex64>,
    pub max_mismatch: f64,
    /// Series terms used (FFHE) or Newton iterations (NR).
    pub terms: usize,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
    /// Largest residual after each order or iteration.
    pub history: Vec<f64>,
}

impl Solution {
    /// Magnitude (p.u.) and angle (degrees) of bus k.
    pub fn polar(&self, k: usize) -> (f64, f64) {
        let v = self.voltages[k];
        (v.norm(), v.arg().to_degrees())
    }
}

/// Wall-clock timer; reads zero on targets without a clock.
pub(crate) struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub(crate) fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}
