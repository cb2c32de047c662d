use serde::{Deserialize, Serialize};

use super::SeriesDevice;
use crate::error::{Error, Result};
use crate::ffhe::{ffhe_solve, EmbeddingConstants};
use crate::netmodel::{BusKind, Network};
use crate::nr::{nr_solve_from, warm_start};
use crate::solution::{Options, Solution, Stopwatch, WarmStart};
use crate::system::PowerSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// FFHE from flat constants.
    Ffhe,
    Nr,
    /// `Options::warm_start` Newton iterations (three if unset), then FFHE.
    NrWarmFfhe,
}

/// A finished solve together with the system it was solved on (after any
/// reactive-limit switching and device relaxation).
#[derive(Debug, Clone)]
pub struct Outcome {
    pub system: PowerSystem,
    pub solution: Solution,
    /// Solves performed, including the first.
    pub passes: usize,
    /// Total wall time across passes, seconds.
    pub wall_time: f64,
}

fn solve_once(
    sys: &PowerSystem,
    method: Method,
    previous: Option<&Solution>,
    opts: &Options,
) -> Result<Solution> {
    let clock = Stopwatch::start();
    let mut sol = match (method, previous) {
        (Method::Nr, Some(p)) => nr_solve_from(sys, &p.voltages, &p.currents, opts)?,
        (Method::Nr, None) => {
            let (v, i) = sys.flat_state();
            nr_solve_from(sys, &v, &i, opts)?
        }
        (_, Some(p)) => ffhe_solve(sys, &EmbeddingConstants::from_state(&p.voltages, &p.currents), opts)?,
        (Method::Ffhe, None) => ffhe_solve(sys, &EmbeddingConstants::flat(sys), opts)?,
        (Method::NrWarmFfhe, None) => {
            let k = match opts.warm_start {
                WarmStart::Nr(k) => k,
                WarmStart::None => 3,
            };
            let consts = warm_start(sys, k)?;
            ffhe_solve(sys, &consts, opts)?
        }
    };
    sol.wall_time = clock.seconds();
    Ok(sol)
}

const Q_TOL: f64 = 1e-8;

/// Solves, then repeatedly (a) switches generator buses that exceed their
/// reactive limits to fixed Q, and (b) relaxes converter legs whose injected
/// voltage exceeds `v_se_max` to injected-voltage control at the limit,
/// re-solving from the previous state until nothing changes.
pub fn enforce_limits(net: &Network, devices: &[SeriesDevice], method: Method, opts: &Options) -> Result<Outcome> {
    let mut sys = PowerSystem::new(net, devices, opts.insert)?;
    let mut previous: Option<Solution> = None;
    let mut relax_passes = 0;
    let mut passes = 0;
    let mut wall_time = 0.0;
    let bus_limit = sys.n_bus() + 1;
    loop {
        let sol = solve_once(&sys, method, previous.as_ref(), opts)?;
        passes += 1;
        wall_time += sol.wall_time;
        if !sol.converged || passes > bus_limit + opts.limit_passes {
            return Ok(Outcome { system: sys, solution: sol, passes, wall_time });
        }
        let (v, i) = (&sol.voltages, &sol.currents);

        let mut next = sys.clone();
        let mut relaxed_any = false;
        for (d, dev) in sys.devices.iter().enumerate() {
            for (k, leg) in dev.legs.iter().enumerate() {
                let Some(vmax) = leg.v_se_max else { continue };
                if dev.relaxed[k] {
                    continue;
                }
                let v_se = (v[leg.aux] - v[dev.sending]).norm();
                if v_se > vmax + opts.tol.max(1e-9) {
                    log::info!(
                        "{} {}: |V_SE| = {v_se:.4} exceeds {vmax}; switching to injected-voltage control",
                        dev.config.kind(),
                        dev.config.label()
                    );
                    next = next.with_relaxed_leg(d, k, vmax)?;
                    relaxed_any = true;
                }
            }
        }
        if relaxed_any {
            relax_passes += 1;
            if relax_passes > opts.limit_passes {
                return Err(Error::LimitCycling(opts.limit_passes));
            }
        }

        let mut switched_any = false;
        if opts.q_limits {
            for k in 0..sys.n_bus() {
                let bus = &sys.network.buses[k];
                if bus.kind != BusKind::PV {
                    continue;
                }
                let q = sys.generator_q(k, v, i);
                let clamp = if q > bus.q_max + Q_TOL {
                    Some(bus.q_max)
                } else if q < bus.q_min - Q_TOL {
                    Some(bus.q_min)
                } else {
                    None
                };
                if let Some(limit) = clamp {
                    log::info!("bus {}: Q = {q:.4} outside limits; fixed at {limit:.4}", bus.id);
                    next = next.with_pq_bus(k, limit)?;
                    switched_any = true;
                }
            }
        }

        if !relaxed_any && !switched_any {
            return Ok(Outcome { system: sys, solution: sol, passes, wall_time });
        }
        sys = next;
        previous = Some(sol);
    }
}
