//! Truncated-series residuals of the embedded equations, computed from the
//! physics with plain Cauchy products. Every embedded equation reads
//! g(x(alpha)) = g(x0) + alpha (target - g(x0)), so the order-n coefficient
//! of g must be target - g(x0) at n = 1 and zero above.

use ffhe::facts::ControlMode;
use ffhe::ffhe::FfheState;
use ffhe::netmodel::BusKind;
use num_complex::Complex64;

type S = Vec<Complex64>;

fn conv(a: &[Complex64], b: &[Complex64], n: usize) -> Complex64 {
    (0..=n).map(|d| a[d] * b[n - d]).sum()
}

fn conj(a: &[Complex64]) -> S {
    a.iter().map(|z| z.conj()).collect()
}

fn sub(a: &[Complex64], b: &[Complex64]) -> S {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn product(a: &[Complex64], b: &[Complex64]) -> S {
    (0..a.len()).map(|n| conv(a, b, n)).collect()
}

/// 1/I by long division.
fn reciprocal(i: &[Complex64]) -> S {
    let mut f = vec![i[0].inv()];
    for n in 1..i.len() {
        let s: Complex64 = (1..=n).map(|q| i[q] * f[n - q]).sum();
        f.push(-s / i[0]);
    }
    f
}

/// |I| from M^2 = I conj(I).
fn magnitude(i: &[Complex64]) -> S {
    let sq = product(i, &conj(i));
    let mut m = vec![sq[0].re.sqrt()];
    for n in 1..i.len() {
        let s: f64 = (1..n).map(|q| m[q] * m[n - q]).sum();
        m.push((sq[n].re - s) / (2.0 * m[0]));
    }
    m.into_iter().map(|x| Complex64::new(x, 0.0)).collect()
}

/// Largest violation over orders 1..=order of every embedded equation,
/// divided by (1 + largest coefficient)^3 so it reads as a relative error.
pub fn embedding_residual(state: &FfheState<'_>) -> f64 {
    let sys = state.system();
    let order = state.order();
    let nb = sys.n_bus();
    let v: Vec<S> = (0..nb).map(|k| state.voltage_series(k).coeffs().to_vec()).collect();
    let i: Vec<S> = (0..sys.n_currents).map(|c| state.current_series(c).coeffs().to_vec()).collect();
    let scale = v.iter().chain(&i).flatten().fold(1.0f64, |m, z| m.max(z.norm()));

    let mut worst = 0.0f64;
    let mut check = |g: &[f64], target: f64| {
        for n in 1..=order {
            let want = if n == 1 { target - g[0] } else { 0.0 };
            worst = worst.max((g[n] - want).abs());
        }
    };
    let re = |s: &[Complex64]| s.iter().map(|z| z.re).collect::<Vec<_>>();
    let im = |s: &[Complex64]| s.iter().map(|z| z.im).collect::<Vec<_>>();

    for (k, bus) in sys.network.buses.iter().enumerate() {
        let j: S = (0..=order)
            .map(|n| {
                let mut x: Complex64 = (0..nb).map(|l| sys.ybus.get(k, l) * v[l][n]).sum();
                for &(c, s) in &sys.bus_currents[k] {
                    x += s * i[c][n];
                }
                x
            })
            .collect();
        let s = product(&v[k], &conj(&j));
        let vsq = product(&v[k], &conj(&v[k]));
        let inj = bus.injection();
        match bus.kind {
            BusKind::Slack => {
                check(&re(&v[k]), bus.v_setpoint.unwrap());
                check(&im(&v[k]), 0.0);
            }
            BusKind::PV => {
                check(&re(&s), inj.re);
                check(&re(&vsq), bus.v_setpoint.unwrap().powi(2));
            }
            BusKind::PQ | BusKind::Auxiliary => {
                check(&re(&s), inj.re);
                check(&im(&s), inj.im);
            }
        }
    }

    for d in &sys.devices {
        let vi = &v[d.sending];
        let mut pbe = vec![0.0; order + 1];
        for (k, leg) in d.legs.iter().enumerate() {
            let vse = sub(&v[leg.aux], vi);
            let p = product(&vse, &conj(&i[d.current(k)]));
            for n in 0..=order {
                pbe[n] += p[n].re;
            }
        }
        check(&pbe, 0.0);
        for t in &d.targets {
            let leg = &d.legs[t.leg];
            let cur = &i[d.current(t.leg)];
            let vse = sub(&v[leg.aux], vi);
            match t.mode {
                ControlMode::ActiveFlow(p) => check(&re(&product(vi, &conj(cur))), p),
                ControlMode::ReactiveFlow(q) => check(&im(&product(vi, &conj(cur))), q),
                ControlMode::InjectedQ(q) => check(&im(&product(&vse, &conj(cur))), q),
                ControlMode::BusVoltage { magnitude, .. } => {
                    let vb = &v[t.voltage_bus];
                    check(&re(&product(vb, &conj(vb))), magnitude * magnitude)
                }
                ControlMode::InjectedV(x) => {
                    let g = product(&product(&vse, &magnitude(cur)), &reciprocal(cur));
                    check(&im(&g), x)
                }
                ControlMode::EquivReactance(x) => check(&im(&product(&vse, &reciprocal(cur))), x),
            }
        }
    }
    worst / (1.0 + scale).powi(3)
}
