//! Banded LU factorization with partial pivoting.
//!
//! Row `i` stores the absolute columns `i - kl ..= i + kl + ku`; the extra
//! `kl` columns on the right absorb fill-in from row interchanges.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedMatrix { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku, "({i}, {j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    /// Add `v` to entry `(i, j)`, which must lie inside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// `y = A x` (before factorization).
    #[cfg(test)]
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let mut piv = vec![0usize; n];
        let reach = self.kl + self.ku;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 1e-300 * scale.max(1e-300)) || !best.is_finite() {
                return Err(Error::LinearSolveFailure(format!("singular banded matrix at column {k}")));
            }
            piv[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.slot(k, k)];
            for i in k + 1..=last_row {
                let s = self.slot(i, k);
                let l = self.data[s] / d;
                self.data[s] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let t = self.data[self.slot(k, j)];
                        let s = self.slot(i, j);
                        self.data[s] -= l * t;
                    }
                }
            }
        }
        Ok(BandedLu { m: self, piv })
    }
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    m: BandedMatrix,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + m.kl).min(n - 1) {
                    b[i] -= m.data[m.slot(i, k)] * bk;
                }
            }
        }
        let reach = m.kl + m.ku;
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                s -= m.data[m.slot(i, j)] * b[j];
            }
            b[i] = s / m.data[m.slot(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_random_banded_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (5, 1, 2), (40, 3, 3), (60, 7, 7), (30, 0, 4)] {
            let mut a = BandedMatrix::zeros(n, kl, ku);
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    // weak diagonal forces pivoting
                    let v: f64 = rng.random_range(-1.0..1.0);
                    a.add(
                        i,
                        j,
                        if i == j && kl > 0 {
                            0.1 * v
                        } else if i == j {
                            2.0 + v
                        } else {
                            v
                        },
                    );
                }
            }
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.5).collect();
            let mut b = a.mul_vec(&x);
            a.clone().factor().unwrap().solve(&mut b);
            for (u, v) in b.iter().zip(&x) {
                assert!((u - v).abs() < 1e-9, "n={n} kl={kl} ku={ku}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = BandedMatrix::zeros(4, 1, 1);
        assert!(a.factor().is_err());
    }
}
