//! Thin 2D wrapper over `rustfft` with a process-wide plan cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned forward/inverse transforms for a row-major `ny x nx` array.
pub(crate) struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

fn cache() -> &'static Mutex<HashMap<(usize, usize), Arc<Fft2>>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, usize), Arc<Fft2>>>> = OnceLock::new();
    PLANS.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Fft2 {
    pub(crate) fn get(nx: usize, ny: usize) -> Arc<Fft2> {
        let mut map = cache().lock().expect("fft plan cache poisoned");
        map.entry((nx, ny))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Fft2 {
                    nx,
                    ny,
                    fwd_x: planner.plan_fft_forward(nx),
                    inv_x: planner.plan_fft_inverse(nx),
                    fwd_y: planner.plan_fft_forward(ny),
                    inv_y: planner.plan_fft_inverse(ny),
                })
            })
            .clone()
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd_x, &self.fwd_y);
    }

    /// Inverse transform, normalized so that `inverse(forward(a)) == a`.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv_x, &self.inv_y);
        let s = 1.0 / (self.nx * self.ny) as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn run(&self, data: &mut [Complex64], fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.nx * self.ny);
        // rows are contiguous: one call transforms all of them
        fx.process(data);
        let mut t = transpose(data, self.nx, self.ny);
        fy.process(&mut t);
        let back = transpose(&t, self.ny, self.nx);
        data.copy_from_slice(&back);
    }
}

/// Transpose a row-major `rows x cols` array (`cols` contiguous).
fn transpose(src: &[Complex64], cols: usize, rows: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    const B: usize = 32;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    out[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
    out
}

/// Angular wavenumbers in FFT order for `n` samples over period `len`.
pub(crate) fn wavenumbers(n: usize, len: f64) -> Vec<f64> {
    let dk = 2.0 * std::f64::consts::PI / len;
    (0..n)
        .map(|m| {
            let s = if m <= n / 2 { m as i64 } else { m as i64 - n as i64 };
            s as f64 * dk
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_identity() {
        let (nx, ny) = (12, 10);
        let orig: Vec<Complex64> =
            (0..nx * ny).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let mut a = orig.clone();
        let plan = Fft2::get(nx, ny);
        plan.forward(&mut a);
        plan.inverse(&mut a);
        for (x, y) in a.iter().zip(&orig) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn single_mode_lands_in_one_bin() {
        let (nx, ny) = (8, 16);
        let mut a: Vec<Complex64> = (0..nx * ny)
            .map(|i| {
                let (ix, iy) = (i % nx, i / nx);
                let ph = 2.0 * std::f64::consts::PI * (ix as f64 * 2.0 / nx as f64 + iy as f64 * 3.0 / ny as f64);
                Complex64::new(ph.cos(), ph.sin())
            })
            .collect();
        Fft2::get(nx, ny).forward(&mut a);
        for (i, v) in a.iter().enumerate() {
            let expect = if i == 3 * nx + 2 { (nx * ny) as f64 } else { 0.0 };
            assert!((v.re - expect).abs() < 1e-9 && v.im.abs() < 1e-9, "bin {i}: {v}");
        }
    }
}
