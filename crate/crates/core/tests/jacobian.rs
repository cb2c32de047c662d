mod common;

use common::{fd_error, random_constants, random_system};
use ffhe::facts::ControlMode;
use ffhe::ffhe::assemble_coefficient_matrix;
use ffhe::netmodel::BusKind;
use ffhe::nr::jacobian;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn analytic_jacobian_matches_differences(seed in any::<u64>(), ipfc in any::<bool>()) {
        let e = fd_error(seed, ipfc);
        prop_assume!(e.is_some());
        let e = e.unwrap();
        prop_assert!(e <= 1e-5, "max entry error {e:e}");
    }

    /// The series matrix is the linearisation of the same equations at the
    /// constants, up to row scaling: bus reactive rows come from conj(S) and
    /// squared-magnitude rows carry a factor 1/2.
    #[test]
    fn coefficient_matrix_is_a_scaled_jacobian(seed in any::<u64>(), ipfc in any::<bool>()) {
        let sys = random_system(seed, ipfc);
        prop_assume!(sys.is_some());
        let sys = sys.unwrap();
        let consts = random_constants(seed, &sys);
        let a = assemble_coefficient_matrix(&sys, &consts);
        let mut j = jacobian(&sys, &consts.c, &consts.d);
        for (k, bus) in sys.network.buses.iter().enumerate() {
            let s = match bus.kind {
                BusKind::Slack => 1.0,
                BusKind::PV => 0.5,
                BusKind::PQ | BusKind::Auxiliary => -1.0,
            };
            j.row_mut(2 * k + 1).scale_mut(s);
        }
        for d in &sys.devices {
            let row0 = d.first_row(sys.n_bus());
            for (t, target) in d.targets.iter().enumerate() {
                if matches!(target.mode, ControlMode::BusVoltage { .. }) {
                    j.row_mut(row0 + 1 + t).scale_mut(0.5);
                }
            }
        }
        let e = (a - j).amax();
        prop_assert!(e <= 1e-12, "max entry difference {e:e}");
    }
}

#[test]
fn twenty_cases_pass_the_difference_check() {
    let errs: Vec<f64> = (0..200u64).filter_map(|s| fd_error(s, s % 2 == 1)).take(20).collect();
    assert_eq!(errs.len(), 20);
    assert!(errs.iter().all(|&e| e <= 1e-5), "{errs:?}");
}
