#![allow(dead_code)]

pub mod oracle;

use std::f64::consts::PI;

use ffhe::facts::{ControlMode, IpfcBranch, IpfcDevice, IpfcTarget, SeriesDevice, SsscDevice};
use ffhe::ffhe::EmbeddingConstants;
use ffhe::netmodel::{parse_case, Branch, Bus, BusKind, Network};
use ffhe::nr::jacobian;
use ffhe::PowerSystem;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn case118() -> Network {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/case118.m");
    parse_case(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn polar(rng: &mut ChaCha8Rng, lo: f64, hi: f64, ang: f64) -> Complex64 {
    Complex64::from_polar(rng.gen_range(lo..hi), rng.gen_range(-ang..ang))
}

/// A connected network of 2..=6 buses (bus 1 slack) built as a random tree
/// plus up to two extra lines.
pub fn random_network(rng: &mut ChaCha8Rng) -> Network {
    let n = rng.gen_range(2..=6);
    let mut buses = Vec::new();
    for id in 1..=n {
        let kind = if id == 1 {
            BusKind::Slack
        } else if rng.gen_bool(0.3) {
            BusKind::PV
        } else {
            BusKind::PQ
        };
        let mut b = Bus::new(id, kind);
        match kind {
            BusKind::Slack => b.v_setpoint = Some(rng.gen_range(1.0..1.05)),
            BusKind::PV => {
                b.v_setpoint = Some(rng.gen_range(0.98..1.04));
                b.p_gen = rng.gen_range(0.0..0.5);
                b.q_min = -1.0;
                b.q_max = 1.0;
                b.has_generator = true;
            }
            _ => {}
        }
        b.p_load = rng.gen_range(0.0..0.4);
        b.q_load = rng.gen_range(-0.05..0.2);
        if rng.gen_bool(0.2) {
            b.shunt_b = rng.gen_range(0.0..0.1);
        }
        buses.push(b);
    }
    let line = |rng: &mut ChaCha8Rng, from: usize, to: usize| Branch {
        from,
        to,
        series_impedance: c(rng.gen_range(0.01..0.05), rng.gen_range(0.05..0.2)),
        charging_b: rng.gen_range(0.0..0.05),
        tap: if rng.gen_bool(0.15) { c(rng.gen_range(0.95..1.05), 0.0) } else { c(1.0, 0.0) },
        origin: None,
    };
    let mut branches = Vec::new();
    for k in 1..n {
        let parent = rng.gen_range(0..k);
        branches.push(line(rng, parent, k));
    }
    for _ in 0..rng.gen_range(0..=2) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !branches.iter().any(|x: &Branch| (x.from, x.to) == (a, b) || (x.from, x.to) == (b, a)) {
            branches.push(line(rng, a, b));
        }
    }
    Network::new(100.0, buses, branches).unwrap()
}

pub fn random_mode(rng: &mut ChaCha8Rng, net: &Network) -> ControlMode {
    match rng.gen_range(0..6) {
        0 => ControlMode::ActiveFlow(rng.gen_range(-0.5..0.8)),
        1 => ControlMode::ReactiveFlow(rng.gen_range(-0.3..0.3)),
        2 => ControlMode::InjectedQ(rng.gen_range(-0.1..0.2)),
        3 => {
            let k = rng.gen_range(1..net.len());
            ControlMode::BusVoltage { bus: Some(net.buses[k].id), magnitude: rng.gen_range(0.95..1.05) }
        }
        4 => ControlMode::InjectedV(rng.gen_range(0.01..0.2)),
        _ => ControlMode::EquivReactance(rng.gen_range(-0.1..0.2)),
    }
}

/// An SSSC on a random line, or an IPFC when `ipfc` is set and some bus has
/// two lines.
pub fn random_device(rng: &mut ChaCha8Rng, net: &Network, ipfc: bool) -> SeriesDevice {
    let ends = |b: &Branch| (net.buses[b.from].id, net.buses[b.to].id);
    if ipfc {
        for start in 0..net.len() {
            let i = net.buses[start].id;
            let lines: Vec<usize> = net
                .branches
                .iter()
                .filter_map(|b| match ends(b) {
                    (a, o) if a == i => Some(o),
                    (o, a) if a == i => Some(o),
                    _ => None,
                })
                .collect();
            if lines.len() >= 2 && lines[0] != lines[1] {
                let branches = lines[..2]
                    .iter()
                    .map(|&to| {
                        let mut b = IpfcBranch::new(to, c(0.01, 0.01));
                        b.init_current = polar(rng, 0.2, 1.0, PI);
                        b
                    })
                    .collect();
                // two targets on leg 0 and one on leg 1 of distinct kinds
                let pick = |rng: &mut ChaCha8Rng| loop {
                    let m = random_mode(rng, net);
                    if !matches!(m, ControlMode::BusVoltage { .. }) {
                        return m;
                    }
                };
                let a = pick(rng);
                let b = loop {
                    let m = pick(rng);
                    if m.id() != a.id() {
                        break m;
                    }
                };
                return SeriesDevice::Ipfc(IpfcDevice {
                    sending: i,
                    branches,
                    targets: vec![
                        IpfcTarget { branch: 0, mode: a },
                        IpfcTarget { branch: 0, mode: b },
                        IpfcTarget { branch: 1, mode: pick(rng) },
                    ],
                });
            }
        }
    }
    let br = &net.branches[rng.gen_range(0..net.branches.len())];
    let (a, b) = ends(br);
    let (from, to) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
    let mut d = SsscDevice::new(from, to, c(0.01, 0.01), random_mode(rng, net));
    d.init_current = polar(rng, 0.2, 1.0, PI);
    SeriesDevice::Sssc(d)
}

/// Random small system with one device; `None` when the drawn device is
/// invalid for the drawn network (e.g. a voltage target on a bus it cannot
/// release).
pub fn random_system(seed: u64, ipfc: bool) -> Option<PowerSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = random_network(&mut rng);
    let dev = random_device(&mut rng, &net, ipfc);
    dev.validate().ok()?;
    PowerSystem::new(&net, &[dev], Default::default()).ok()
}

/// Constants scattered around a flat profile, with the configured current
/// guesses.
pub fn random_constants(seed: u64, sys: &PowerSystem) -> EmbeddingConstants {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    EmbeddingConstants {
        c: (0..sys.n_bus()).map(|_| polar(&mut rng, 0.9, 1.1, 0.3)).collect(),
        d: sys.initial_currents(),
    }
}

/// A random state for derivative checks.
pub fn random_state(seed: u64, sys: &PowerSystem) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let v = (0..sys.n_bus()).map(|_| polar(&mut rng, 0.9, 1.1, 0.3)).collect();
    let i = (0..sys.n_currents).map(|_| polar(&mut rng, 0.2, 1.0, PI)).collect();
    (v, i)
}

/// Jacobian of the residuals by central differences with step `h`.
pub fn central_difference(sys: &PowerSystem, v: &[Complex64], i: &[Complex64], h: f64) -> DMatrix<f64> {
    let dim = sys.dim();
    let nb = sys.n_bus();
    let mut fd = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let shifted = |h: f64| {
            let (mut v, mut i) = (v.to_vec(), i.to_vec());
            let z = if col < 2 * nb { &mut v[col / 2] } else { &mut i[(col - 2 * nb) / 2] };
            if col % 2 == 0 {
                z.re += h;
            } else {
                z.im += h;
            }
            sys.residuals(&v, &i)
        };
        let (plus, minus) = (shifted(h), shifted(-h));
        for r in 0..dim {
            fd[(r, col)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    fd
}

/// Largest entry gap between the analytic and differenced Jacobians at a
/// random state of a random system.
pub fn fd_error(seed: u64, ipfc: bool) -> Option<f64> {
    let sys = random_system(seed, ipfc)?;
    let (v, i) = random_state(seed, &sys);
    Some((jacobian(&sys, &v, &i) - central_difference(&sys, &v, &i, 1e-6)).amax())
}
