//! Radial grids and sampled radial profiles.
//!
//! Profiles are extended past both ends with ghost values: across the origin
//! by parity (`u(-r) = ±u(r)`), beyond the last node by an [`Exterior`]
//! closure. All interpolation, differentiation and cumulative integration use
//! high-order local Lagrange stencils built from [`fornberg`] weights, which
//! work on arbitrary (not necessarily uniform) node sets.

use crate::error::{Error, Result};

/// Number of nodes in interpolation and integration stencils.
pub const STENCIL: usize = 8;
const GHOSTS: usize = STENCIL;

/// Finite-difference weights (Fornberg 1988) for derivatives `0..=m` at `z`
/// from nodes `x`. Returns `w[d][j]`, the weight of node `j` for the `d`-th
/// derivative.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Behaviour of a profile under `r -> -r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Continuation of a profile beyond its last node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exterior {
    /// Identically zero (decayed profiles).
    Zero,
    /// `c · log r`, matched at the last node (potential of a compact mass).
    LogHarmonic,
    /// `c / r`, matched at the last node.
    InverseR,
    /// Constant equal to the last value.
    Constant,
}

impl Exterior {
    fn extend(self, r_last: f64, v_last: f64, r: f64) -> f64 {
        match self {
            Exterior::Zero => 0.0,
            Exterior::LogHarmonic => v_last * r.ln() / r_last.ln(),
            Exterior::InverseR => v_last * r_last / r,
            Exterior::Constant => v_last,
        }
    }
}

/// Strictly increasing positive radii and a truncation radius.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    r: Vec<f64>,
    rmax: f64,
}

impl RadialGrid {
    /// Cell-centred uniform grid `r_i = (i + 1/2) rmax / n`.
    pub fn uniform(n: usize, rmax: f64) -> Result<Self> {
        if n < 2 * STENCIL {
            return Err(Error::InvalidGrid(format!("radial grid needs at least {} nodes", 2 * STENCIL)));
        }
        if !(rmax > 0.0 && rmax.is_finite()) {
            return Err(Error::InvalidGrid(format!("rmax must be positive, got {rmax}")));
        }
        let h = rmax / n as f64;
        let r = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        Ok(RadialGrid { r, rmax })
    }

    /// Arbitrary nodes; `rmax` must be at least the last node.
    pub fn from_nodes(r: Vec<f64>, rmax: f64) -> Result<Self> {
        if r.len() < 2 * STENCIL {
            return Err(Error::InvalidGrid(format!("radial grid needs at least {} nodes", 2 * STENCIL)));
        }
        if !(r[0] > 0.0) || r.windows(2).any(|w| !(w[1] > w[0])) || r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("radii must be positive and strictly increasing".into()));
        }
        if !(rmax >= *r.last().unwrap()) {
            return Err(Error::InvalidGrid("rmax is below the last node".into()));
        }
        Ok(RadialGrid { r, rmax })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn rmax(&self) -> f64 {
        self.rmax
    }

    /// Largest spacing between consecutive nodes.
    pub fn max_spacing(&self) -> f64 {
        self.r.windows(2).map(|w| w[1] - w[0]).fold(self.r[0], f64::max)
    }

    /// Radius of extended index `j` (negative indices mirror the origin).
    pub fn ext_node(&self, j: isize) -> f64 {
        let n = self.r.len() as isize;
        if j < 0 {
            -self.r[(-j - 1) as usize]
        } else if j < n {
            self.r[j as usize]
        } else {
            let last = self.r[(n - 1) as usize];
            let h = last - self.r[(n - 2) as usize];
            last + (j - n + 1) as f64 * h
        }
    }

    /// Index `i` with `r_i <= r < r_{i+1}` in extended numbering.
    fn bracket(&self, r: f64) -> isize {
        let n = self.r.len();
        if r < self.r[0] {
            -1
        } else if r >= self.r[n - 1] {
            n as isize - 1
        } else {
            (self.r.partition_point(|&x| x <= r) - 1) as isize
        }
    }

    /// Start of the centred `STENCIL`-point window around interval `i`.
    fn window_start(i: isize) -> isize {
        i - (STENCIL as isize / 2 - 1)
    }

    /// Quadrature weights for each interval `[r_{k-1}, r_k]` (with `r_{-1} = 0`
    /// and a final interval ending at `rmax`), as a window start in extended
    /// indices plus `STENCIL` weights.
    fn interval_weights(&self) -> Vec<(isize, [f64; STENCIL])> {
        let (gx, gw) = gauss_legendre_6();
        let n = self.r.len() as isize;
        let mut out = Vec::with_capacity(self.r.len() + 1);
        // interval k spans [left, right]; k = 0 is [0, r_0], k = n is [r_{n-1}, rmax]
        for k in 0..=n {
            let left = if k == 0 { 0.0 } else { self.r[(k - 1) as usize] };
            let right = if k == n { self.rmax } else { self.r[k as usize] };
            let start = Self::window_start(k - 1);
            let nodes: Vec<f64> = (0..STENCIL as isize).map(|m| self.ext_node(start + m)).collect();
            let mut w = [0.0; STENCIL];
            let half = 0.5 * (right - left);
            if half > 0.0 {
                for (t, q) in gx.iter().zip(&gw) {
                    let z = left + half * (1.0 + t);
                    let c = fornberg(z, &nodes, 0);
                    for m in 0..STENCIL {
                        w[m] += half * q * c[0][m];
                    }
                }
            }
            out.push((start, w));
        }
        out
    }
}

fn gauss_legendre_6() -> ([f64; 6], [f64; 6]) {
    let x = [
        -0.932_469_514_203_152,
        -0.661_209_386_466_264_5,
        -0.238_619_186_083_196_9,
        0.238_619_186_083_196_9,
        0.661_209_386_466_264_5,
        0.932_469_514_203_152,
    ];
    let w = [
        0.171_324_492_379_170_3,
        0.360_761_573_048_138_6,
        0.467_913_934_572_691,
        0.467_913_934_572_691,
        0.360_761_573_048_138_6,
        0.171_324_492_379_170_3,
    ];
    (x, w)
}

/// Sampled radial function with its continuation rules.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    grid: RadialGrid,
    values: Vec<f64>,
    parity: Parity,
    exterior: Exterior,
}

impl RadialProfile {
    /// Even profile vanishing beyond the last node.
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        Self::with_rules(grid, values, Parity::Even, Exterior::Zero)
    }

    pub fn with_rules(grid: RadialGrid, values: Vec<f64>, parity: Parity, exterior: Exterior) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("expected {} radial values, got {}", grid.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite radial value".into()));
        }
        if exterior == Exterior::LogHarmonic && !(grid.r[grid.len() - 1] > 1.0) {
            return Err(Error::InvalidArgument("log-harmonic exterior needs the last node beyond r = 1".into()));
        }
        Ok(RadialProfile { grid, values, parity, exterior })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let v = grid.r.iter().map(|&r| f(r)).collect();
        Self::new(grid, v)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn exterior(&self) -> Exterior {
        self.exterior
    }

    /// Value at extended index `j`.
    pub fn ext_value(&self, j: isize) -> f64 {
        let n = self.values.len() as isize;
        if j < 0 {
            self.parity.sign() * self.values[(-j - 1) as usize]
        } else if j < n {
            self.values[j as usize]
        } else {
            let r = self.grid.ext_node(j);
            self.exterior.extend(self.grid.r[(n - 1) as usize], self.values[(n - 1) as usize], r)
        }
    }

    fn window(&self, start: isize) -> ([f64; STENCIL], [f64; STENCIL]) {
        let mut x = [0.0; STENCIL];
        let mut v = [0.0; STENCIL];
        for m in 0..STENCIL {
            x[m] = self.grid.ext_node(start + m as isize);
            v[m] = self.ext_value(start + m as isize);
        }
        (x, v)
    }

    /// Derivatives `0..=m` at `r` by local Lagrange interpolation.
    pub fn eval_derivatives(&self, r: f64, m: usize) -> Vec<f64> {
        let r = r.abs();
        let start = RadialGrid::window_start(self.grid.bracket(r));
        let (x, v) = self.window(start);
        let c = fornberg(r, &x, m);
        c.iter().map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum()).collect()
    }

    /// Interpolated value at radius `r`.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let n = self.grid.len();
        if r > self.grid.ext_node((n + GHOSTS / 2) as isize) {
            return self.exterior.extend(self.grid.r[n - 1], self.values[n - 1], r);
        }
        self.eval_derivatives(r, 0)[0]
    }

    /// `d`-th derivative at the nodes from centred 7-point stencils.
    pub fn derivative_at_nodes(&self, d: usize) -> Vec<f64> {
        self.grid
            .r
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let start = i as isize - 3;
                let x: Vec<f64> = (0..7).map(|m| self.grid.ext_node(start + m)).collect();
                let c = fornberg(r, &x, d);
                (0..7).map(|m| c[d][m as usize] * self.ext_value(start + m)).sum()
            })
            .collect()
    }

    /// `F(r_i) = ∫_0^{r_i} u` at every node, plus `∫_0^{rmax} u` as the last
    /// entry of the second return value.
    pub fn cumulative_integral(&self) -> (Vec<f64>, f64) {
        let weights = self.grid.interval_weights();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len());
        let n = self.values.len();
        for (k, (start, w)) in weights.iter().enumerate() {
            let part: f64 = (0..STENCIL).map(|m| w[m] * self.ext_value(start + m as isize)).sum();
            acc += part;
            if k < n {
                out.push(acc);
            }
        }
        (out, acc)
    }

    /// `∫_0^{rmax} u(r) dr`.
    pub fn integral(&self) -> f64 {
        self.cumulative_integral().1
    }

    /// New profile with values `f(r_i, u_i)` and given continuation rules.
    pub fn map_with(&self, parity: Parity, exterior: Exterior, f: impl Fn(f64, f64) -> f64) -> Result<RadialProfile> {
        let v = self.grid.r.iter().zip(&self.values).map(|(&r, &u)| f(r, u)).collect();
        RadialProfile::with_rules(self.grid.clone(), v, parity, exterior)
    }

    /// `2π ∫ u² r dr`, the planar L² mass of the lifted profile.
    pub fn mass2(&self) -> f64 {
        let g = self.map_with(Parity::Odd, Exterior::Zero, |r, u| r * u * u).expect("same grid");
        2.0 * std::f64::consts::PI * g.integral()
    }

    /// `2π ∫ u'^2 r dr`.
    pub fn dirichlet2(&self) -> f64 {
        let d = self.derivative_at_nodes(1);
        let g = RadialProfile::with_rules(
            self.grid.clone(),
            self.grid.r.iter().zip(&d).map(|(r, v)| r * v * v).collect(),
            Parity::Odd,
            Exterior::Zero,
        )
        .expect("same grid");
        2.0 * std::f64::consts::PI * g.integral()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn fornberg_reproduces_polynomials() {
        let x = [0.0, 0.3, 0.7, 1.2, 1.5];
        let c = fornberg(0.5, &x, 2);
        let p = |t: f64| 1.0 + 2.0 * t - t * t * t + 0.5 * t.powi(4);
        let dp = |t: f64| 2.0 - 3.0 * t * t + 2.0 * t.powi(3);
        let d2p = |t: f64| -6.0 * t + 6.0 * t * t;
        let apply = |w: &[f64]| w.iter().zip(&x).map(|(a, &t)| a * p(t)).sum::<f64>();
        assert!((apply(&c[0]) - p(0.5)).abs() < 1e-13);
        assert!((apply(&c[1]) - dp(0.5)).abs() < 1e-12);
        assert!((apply(&c[2]) - d2p(0.5)).abs() < 1e-11);
    }

    #[test]
    fn uniform_grid_layout() {
        let g = RadialGrid::uniform(20, 2.0).unwrap();
        assert!((g.nodes()[0] - 0.05).abs() < 1e-15);
        assert_eq!(g.ext_node(-1), -g.nodes()[0]);
        assert!((g.ext_node(20) - 2.05).abs() < 1e-12);
        assert!(RadialGrid::from_nodes(vec![1.0; 20], 2.0).is_err());
    }

    #[test]
    fn interpolation_of_even_gaussian() {
        let g = RadialGrid::uniform(400, 8.0).unwrap();
        let p = RadialProfile::from_fn(g, |r| (-r * r).exp()).unwrap();
        for &r in &[0.0, 0.003, 0.5, 1.234, 3.0, 6.0] {
            assert!((p.eval(r) - (-r * r).exp()).abs() < 1e-12, "r = {r}");
        }
        assert_eq!(p.eval(100.0), 0.0);
    }

    #[test]
    fn derivative_at_nodes_matches_analytic() {
        let g = RadialGrid::uniform(800, 8.0).unwrap();
        let p = RadialProfile::from_fn(g.clone(), |r| (-r * r).exp()).unwrap();
        let d1 = p.derivative_at_nodes(1);
        let d2 = p.derivative_at_nodes(2);
        for (i, &r) in g.nodes().iter().enumerate() {
            let e = (-r * r).exp();
            assert!((d1[i] + 2.0 * r * e).abs() < 1e-9);
            assert!((d2[i] - (4.0 * r * r - 2.0) * e).abs() < 1e-8);
        }
    }

    #[test]
    fn cumulative_integral_of_gaussian_moment() {
        // ∫_0^R r e^{-r²} dr = (1 - e^{-R²})/2
        let g = RadialGrid::uniform(500, 10.0).unwrap();
        let p = RadialProfile::with_rules(
            g.clone(),
            g.nodes().iter().map(|r| r * (-r * r).exp()).collect(),
            Parity::Odd,
            Exterior::Zero,
        )
        .unwrap();
        let (cum, total) = p.cumulative_integral();
        for (i, &r) in g.nodes().iter().enumerate() {
            assert!((cum[i] - 0.5 * (1.0 - (-r * r).exp())).abs() < 1e-12);
        }
        assert!((total - 0.5).abs() < 1e-13);
    }

    #[test]
    fn mass_and_dirichlet_of_gaussian() {
        let g = RadialGrid::uniform(1000, 10.0).unwrap();
        let p = RadialProfile::from_fn(g, |r| (-r * r / 2.0).exp()).unwrap();
        // ∫ e^{-|x|²} = π ; ∫ |x|² e^{-|x|²} = π
        assert!((p.mass2() - PI).abs() < 1e-11);
        assert!((p.dirichlet2() - PI).abs() < 1e-9);
    }

    #[test]
    fn log_harmonic_exterior_is_exact() {
        let g = RadialGrid::uniform(100, 5.0).unwrap();
        let p = RadialProfile::with_rules(
            g.clone(),
            g.nodes().iter().map(|r| -0.3 * r.ln()).collect(),
            Parity::Even,
            Exterior::LogHarmonic,
        )
        .unwrap();
        assert!((p.eval(7.0) + 0.3 * 7f64.ln()).abs() < 1e-12);
        assert!((p.eval(5.01) + 0.3 * 5.01f64.ln()).abs() < 1e-9);
    }
}
