//! Bessel functions `J0`, `J1` for real arguments.
//!
//! Small arguments use the trapezoid rule on Bessel's integral, which is
//! spectrally accurate for periodic integrands; large arguments use the
//! Hankel asymptotic series truncated at its smallest term.

use std::f64::consts::PI;

const SWITCH: f64 = 25.0;
const NODES: usize = 64;

fn bessel_integral(n: u32, x: f64) -> f64 {
    // J_n(x) = (1/2π) ∫_0^{2π} cos(nτ − x sin τ) dτ
    let mut s = 0.0;
    for j in 0..NODES {
        let t = 2.0 * PI * j as f64 / NODES as f64;
        s += (n as f64 * t - x * t.sin()).cos();
    }
    s / NODES as f64
}

fn hankel(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n * n) as f64;
    let (mut p, mut q) = (0.0f64, 0.0f64);
    let mut term: f64 = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60 {
        if term.abs() > last || term.abs() < 1e-18 {
            break;
        }
        last = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        let odd = (2 * k + 1) as f64;
        term *= (mu - odd * odd) / ((k + 1) as f64 * 8.0 * x);
    }
    let chi = x - (0.5 * n as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SWITCH {
        bessel_integral(0, x)
    } else {
        hankel(0, x)
    }
}

pub fn bessel_j1(x: f64) -> f64 {
    let s = x.signum();
    let x = x.abs();
    s * if x <= SWITCH { bessel_integral(1, x) } else { hankel(1, x) }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
