#![allow(clippy::excessive_precision)]
//! Reference integrator for the phase integral, built from the textbook
//! pulse placement and direct evaluation of the field. Shares nothing with
//! the closed form beyond the tone list.
#![allow(dead_code)]

use qlockin::physics::{AcField, Channel};

// Gauss–Kronrod 7/15 nodes and weights on [−1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive bisection with a Kronrod-vs-Gauss error estimate.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth > 40 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    rec(f, a, b, tol, 0)
}

/// Pulse instants of an `n`-cell train of cell length `tau`.
pub fn pulses(tau: f64, n: u32, channel: Channel) -> Vec<f64> {
    match channel {
        Channel::I => (0..n)
            .flat_map(|j| [(j as f64 + 0.25) * tau, (j as f64 + 0.75) * tau])
            .collect(),
        Channel::Q => (1..2 * n).map(|j| j as f64 * tau / 2.0).collect(),
    }
}

/// `γe ∫ bz(t) w(t) dt` over `[0, nτ]`, with `w` starting at +1 and
/// flipping at each pulse. Integrates each constant-sign interval
/// separately.
pub fn phase_oracle(field: &AcField, tau: f64, n: u32, channel: Channel, gamma_e: f64) -> f64 {
    let tones: Vec<(f64, f64, f64)> = field
        .tones()
        .iter()
        .map(|t| (t.amplitude, t.frequency, t.theta))
        .collect();
    let bz = move |t: f64| {
        tones
            .iter()
            .map(|&(b, f, th)| b * (2.0 * std::f64::consts::PI * f * t - th).cos())
            .sum::<f64>()
    };
    let mut edges = vec![0.0];
    edges.extend(pulses(tau, n, channel));
    edges.push(n as f64 * tau);
    let scale: f64 = field.tones().iter().map(|t| t.amplitude).sum::<f64>() * n as f64 * tau;
    let mut sign = 1.0;
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += sign * integrate(&bz, w[0], w[1], 1e-15 * scale.max(f64::MIN_POSITIVE));
        sign = -sign;
    }
    gamma_e * total
}
