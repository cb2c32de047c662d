mod common;

use common::{case118, random_system};
use ffhe::facts::{enforce_limits, parse_devices, Method};
use ffhe::ffhe::{ffhe_solve, EmbeddingConstants};
use ffhe::nr::{nr_solve, warm_start};
use ffhe::{Options, PowerSystem};

fn max_gap(a: &[num_complex::Complex64], b: &[num_complex::Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn solution_is_a_fixed_point_of_the_embedding() {
    // started at the answer, every higher coefficient is zero
    let opts = Options::default();
    let tight = Options { tol: 1e-13, ..opts };
    let mut checked = 0;
    for seed in 0..60 {
        let Some(sys) = random_system(seed, seed % 3 == 0) else { continue };
        let Ok(nr) = nr_solve(&sys, &tight) else { continue };
        if !nr.converged {
            continue;
        }
        let consts = EmbeddingConstants::from_state(&nr.voltages, &nr.currents);
        let sol = ffhe_solve(&sys, &consts, &opts).unwrap();
        assert!(sol.converged, "seed {seed}");
        assert!(sol.terms <= 2, "seed {seed}: {} terms", sol.terms);
        let gap = max_gap(&sol.voltages, &nr.voltages);
        assert!(gap < 1e-10, "seed {seed}: {gap:e}");
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} systems solved");
}

#[test]
fn warm_started_series_agrees_with_newton() {
    let opts = Options::default();
    let mut checked = 0;
    for seed in 100..200 {
        let Some(sys) = random_system(seed, seed % 2 == 0) else { continue };
        let Ok(nr) = nr_solve(&sys, &opts) else { continue };
        let Ok(consts) = warm_start(&sys, 3) else { continue };
        let Ok(ffhe) = ffhe_solve(&sys, &consts, &opts) else { continue };
        if nr.converged && ffhe.converged {
            let gap = max_gap(&nr.voltages, &ffhe.voltages);
            assert!(gap < 1e-6, "seed {seed}: {gap:e}");
            checked += 1;
        }
    }
    assert!(checked >= 20, "only {checked} systems solved by both");
}

#[test]
fn base_case_flat_and_warm_agree() {
    let net = case118();
    let opts = Options::default();
    let flat = enforce_limits(&net, &[], Method::Ffhe, &opts).unwrap();
    let warm = enforce_limits(&net, &[], Method::NrWarmFfhe, &opts).unwrap();
    let nr = enforce_limits(&net, &[], Method::Nr, &opts).unwrap();
    assert!(flat.solution.converged && warm.solution.converged && nr.solution.converged);
    assert!(max_gap(&flat.solution.voltages, &nr.solution.voltages) < 1e-6);
    assert!(max_gap(&warm.solution.voltages, &nr.solution.voltages) < 1e-6);
}

#[test]
fn device_targets_are_met() {
    let net = case118();
    let devices = parse_devices("sssc 101-102 x_eq=0.1 init=-0.5").unwrap();
    let out = enforce_limits(&net, &devices, Method::NrWarmFfhe, &Options::default()).unwrap();
    assert!(out.solution.converged);
    let d = ffhe::facts::device_outputs(&out.system, 0, &out.solution.voltages, &out.solution.currents);
    assert!((d.targets[0].achieved - 0.1).abs() < 1e-6);
    assert!(d.exchange.abs() < 1e-7);
}

#[test]
fn solves_are_deterministic() {
    let net = case118();
    let devices = parse_devices("ipfc 49-50,49-51 p_flow.1=0.75 q_flow.1=0.01 q_flow.2=-0.03 init=0.7").unwrap();
    let opts = Options::default();
    let a = enforce_limits(&net, &devices, Method::NrWarmFfhe, &opts).unwrap();
    let b = enforce_limits(&net, &devices, Method::NrWarmFfhe, &opts).unwrap();
    assert_eq!(a.solution.voltages, b.solution.voltages);
    assert_eq!(a.solution.currents, b.solution.currents);
    assert_eq!(a.solution.history, b.solution.history);
    assert_eq!(a.passes, b.passes);
}

#[test]
fn warm_start_is_newton_truncated() {
    let net = case118();
    let sys = PowerSystem::new(&net, &[], Default::default()).unwrap();
    let opts = Options { max_iters: 3, tol: 0.0, ..Options::default() };
    let nr = nr_solve(&sys, &opts).unwrap();
    let consts = warm_start(&sys, 3).unwrap();
    assert_eq!(nr.history.len(), 4);
    assert!(max_gap(&consts.c, &nr.voltages) < 1e-12);
}
