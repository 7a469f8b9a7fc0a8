//! Uniform planar grids, discrete fields, quadrature, spectral differential
//! operators and the weighted inner products of the energy space.
//!
//! Nodes sit at `x0 + (i - nx/2) * hx`, so the grid centre is always a node.
//! Differential operators treat the box as periodic and act through Fourier
//! symbols; the [`DiffBackend`] switch selects either exact spectral symbols
//! or the symbols of second-order central differences.

pub mod io;
pub mod radial;

use rand::Rng;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{wavenumbers, Fft2};
pub use radial::{Parity, RadialGrid, RadialProfile};

/// Uniform rectangular grid on a box centred at `(x0, y0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::with_center(nx, ny, lx, ly, 0.0, 0.0)
    }

    pub fn square(n: usize, l: f64) -> Result<Self> {
        Self::new(n, n, l, l)
    }

    pub fn with_center(nx: usize, ny: usize, lx: f64, ly: f64, x0: f64, y0: f64) -> Result<Self> {
        if nx < 16 || ny < 16 || !nx.is_multiple_of(2) || !ny.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("node counts must be even and >= 16, got {nx} x {ny}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!("side lengths must be positive, got {lx} x {ly}")));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::InvalidGrid("grid centre must be finite".into()));
        }
        Ok(Grid2D { nx, ny, lx, ly, x0, y0 })
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x0 + (ix as f64 - (self.nx / 2) as f64) * self.hx()
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.y0 + (iy as f64 - (self.ny / 2) as f64) * self.hy()
    }

    /// Coordinates of the node with flat (row-major) index `idx`.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        (self.x(idx % self.nx), self.y(idx / self.nx))
    }

    /// Half-widths of the box.
    pub fn half_widths(&self) -> (f64, f64) {
        (0.5 * self.lx, 0.5 * self.ly)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.x0).abs() <= 0.5 * self.lx && (y - self.y0).abs() <= 0.5 * self.ly
    }

    /// Same grid scaled by `s` about the coordinate origin.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::with_center(self.nx, self.ny, s * self.lx, s * self.ly, s * self.x0, s * self.y0)
    }

    pub fn check_same(&self, other: &Grid2D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// `log(1 + |x|)` sampled at the nodes.
    pub fn log_weight(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (x, y) = self.coords(i);
                x.hypot(y).ln_1p()
            })
            .collect()
    }
}

/// Scalar field on a [`Grid2D`], row-major with `x` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field2D {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at node {i}")));
        }
        Ok(Field2D { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Field2D { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let (x, y) = grid.coords(i);
                f(x, y)
            })
            .collect();
        Field2D { grid, values }
    }

    /// Internal constructor for values produced by our own arithmetic.
    pub(crate) fn from_raw(grid: Grid2D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field2D { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field2D {
        Field2D::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field2D, f: impl Fn(f64, f64) -> f64) -> Field2D {
        debug_assert_eq!(self.grid, other.grid);
        Field2D::from_raw(self.grid, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn scaled(&self, s: f64) -> Field2D {
        self.map(|v| s * v)
    }

    pub fn add(&self, other: &Field2D) -> Field2D {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field2D) -> Field2D {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field2D) -> Field2D {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Field2D) {
        debug_assert_eq!(self.grid, x.grid);
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    /// Discrete L² inner product.
    pub fn dot(&self, other: &Field2D) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.cell_area() * dot(&self.values, &other.values)
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Flat index of the largest value.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Same values on a relabelled grid (used for rescaling coordinates).
    pub fn with_grid(&self, grid: Grid2D) -> Result<Field2D> {
        if grid.nx != self.grid.nx || grid.ny != self.grid.ny {
            return Err(Error::GridMismatch("node counts differ".into()));
        }
        Ok(Field2D::from_raw(grid, self.values.clone()))
    }
}

/// Pairwise (tree) summation; deterministic and accurate.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    fn rec(a: &[f64], b: &[f64]) -> f64 {
        if a.len() <= 64 {
            return a.iter().zip(b).map(|(x, y)| x * y).sum();
        }
        let mid = a.len() / 2;
        rec(&a[..mid], &b[..mid]) + rec(&a[mid..], &b[mid..])
    }
    rec(a, b)
}

/// Midpoint-rule integral over the box.
pub fn integrate(f: &Field2D) -> f64 {
    f.grid.cell_area() * pairwise_sum(&f.values)
}

/// Discretization used for derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DiffBackend {
    /// Fourier collocation on the periodic box.
    #[default]
    Spectral,
    /// Second-order central differences (periodic).
    CentralDifference,
}

impl DiffBackend {
    /// Symbol of `-d²/dx²` at angular wavenumber `k` on spacing `h`.
    fn neg_second(self, k: f64, h: f64) -> f64 {
        match self {
            DiffBackend::Spectral => k * k,
            DiffBackend::CentralDifference => (2.0 - 2.0 * (k * h).cos()) / (h * h),
        }
    }

    /// Symbol of `d/dx` divided by `i`; zero at the Nyquist mode.
    fn first(self, k: f64, h: f64, nyquist: bool) -> f64 {
        if nyquist {
            return 0.0;
        }
        match self {
            DiffBackend::Spectral => k,
            DiffBackend::CentralDifference => (k * h).sin() / h,
        }
    }
}

/// Fourier symbols of the differential operators on one grid.
#[derive(Clone, Debug)]
pub struct Symbols {
    nx: usize,
    ny: usize,
    /// symbol of `-Δ`
    pub neg_lap: Vec<f64>,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl Symbols {
    pub fn new(grid: &Grid2D, backend: DiffBackend) -> Self {
        let kx = wavenumbers(grid.nx, grid.lx);
        let ky = wavenumbers(grid.ny, grid.ly);
        let (hx, hy) = (grid.hx(), grid.hy());
        let sx: Vec<f64> = kx.iter().map(|&k| backend.neg_second(k, hx)).collect();
        let sy: Vec<f64> = ky.iter().map(|&k| backend.neg_second(k, hy)).collect();
        let dx: Vec<f64> = kx.iter().enumerate().map(|(m, &k)| backend.first(k, hx, m == grid.nx / 2)).collect();
        let dy: Vec<f64> = ky.iter().enumerate().map(|(m, &k)| backend.first(k, hy, m == grid.ny / 2)).collect();
        let mut neg_lap = Vec::with_capacity(grid.len());
        for y in &sy {
            for x in &sx {
                neg_lap.push(x + y);
            }
        }
        Symbols { nx: grid.nx, ny: grid.ny, neg_lap, dx, dy }
    }

    fn to_spectrum(&self, f: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Fft2::get(self.nx, self.ny).forward(&mut buf);
        buf
    }

    fn from_spectrum(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        Fft2::get(self.nx, self.ny).inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Multiply by a real radial symbol `s(|k|²-symbol)` given per mode.
    pub fn apply_diagonal(&self, f: &[f64], sym: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut buf = self.to_spectrum(f);
        for (c, &s) in buf.iter_mut().zip(&self.neg_lap) {
            *c *= sym(s);
        }
        self.from_spectrum(buf)
    }

    pub fn neg_laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.apply_diagonal(f, |s| s)
    }

    /// Solve `(-Δ + c) u = f` on the periodic box; requires `c > 0`.
    pub fn solve_shifted(&self, f: &[f64], c: f64) -> Vec<f64> {
        self.apply_diagonal(f, |s| 1.0 / (s + c))
    }

    pub fn gradient(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let spec = self.to_spectrum(f);
        let mut gx = spec.clone();
        let mut gy = spec;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let i = iy * self.nx + ix;
                gx[i] *= Complex64::new(0.0, self.dx[ix]);
                gy[i] *= Complex64::new(0.0, self.dy[iy]);
            }
        }
        (self.from_spectrum(gx), self.from_spectrum(gy))
    }
}

/// `-Δ f` with the selected backend.
pub fn neg_laplacian(f: &Field2D, backend: DiffBackend) -> Field2D {
    let s = Symbols::new(&f.grid, backend);
    Field2D::from_raw(f.grid, s.neg_laplacian(&f.values))
}

/// `(∂x f, ∂y f)` with the selected backend.
pub fn gradient(f: &Field2D, backend: DiffBackend) -> (Field2D, Field2D) {
    let s = Symbols::new(&f.grid, backend);
    let (gx, gy) = s.gradient(&f.values);
    (Field2D::from_raw(f.grid, gx), Field2D::from_raw(f.grid, gy))
}

/// `∫|∇f|²`, evaluated as the quadratic form `<f, -Δ_h f>` of the discrete
/// Laplacian so that it is exactly consistent with [`neg_laplacian`].
pub fn gradient_sq_integral(f: &Field2D, backend: DiffBackend) -> f64 {
    let lap = neg_laplacian(f, backend);
    f.dot(&lap).max(0.0)
}

/// Weights entering the inner product of the energy space.
#[derive(Clone, Debug)]
pub struct NormWeights {
    /// `V(εx)` at the nodes; `None` means the constant 1.
    pub potential: Option<Vec<f64>>,
    pub include_log_weight: bool,
}

impl NormWeights {
    /// Weights of the plain `X` product.
    pub fn unit() -> Self {
        NormWeights { potential: None, include_log_weight: true }
    }

    pub fn h1_only() -> Self {
        NormWeights { potential: None, include_log_weight: false }
    }

    pub fn with_potential(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("potential must be positive, found {v}")));
        }
        Ok(NormWeights { potential: Some(values), include_log_weight: true })
    }

    /// Pointwise zero-order weight `P(x) + log(1+|x|)` at the nodes.
    pub fn mass_weight(&self, grid: &Grid2D) -> Result<Vec<f64>> {
        let mut w = match &self.potential {
            Some(p) if p.len() != grid.len() => {
                return Err(Error::GridMismatch("potential samples do not match grid".into()))
            }
            Some(p) => p.clone(),
            None => vec![1.0; grid.len()],
        };
        if self.include_log_weight {
            for (wi, lw) in w.iter_mut().zip(grid.log_weight()) {
                *wi += lw;
            }
        }
        Ok(w)
    }
}

/// `∫∇u·∇v + ∫P u v (+ ∫log(1+|x|) u v)`.
pub fn x_inner_product(u: &Field2D, v: &Field2D, w: &NormWeights) -> Result<f64> {
    u.grid.check_same(&v.grid)?;
    x_inner_product_with(u, v, w, DiffBackend::Spectral)
}

pub fn x_inner_product_with(u: &Field2D, v: &Field2D, w: &NormWeights, backend: DiffBackend) -> Result<f64> {
    u.grid.check_same(&v.grid)?;
    let mw = w.mass_weight(&u.grid)?;
    let lap_v = neg_laplacian(v, backend);
    let grad = u.dot(&lap_v);
    let zero: f64 = u.grid.cell_area()
        * pairwise_sum(&u.values.iter().zip(&v.values).zip(&mw).map(|((a, b), m)| a * b * m).collect::<Vec<_>>());
    Ok(grad + zero)
}

/// Result of lifting a radial profile to the plane.
#[derive(Clone, Debug)]
pub struct Lift {
    pub field: Field2D,
    /// The profile's support radius exceeds the box half-width, so part of
    /// it was cut off.
    pub rmax_exceeds_box: bool,
}

/// Sample `u(|x - center|)` on `g`; zero beyond the profile's `rmax`.
pub fn lift_radial(p: &RadialProfile, g: &Grid2D, center: (f64, f64)) -> Result<Lift> {
    if !g.contains(center.0, center.1) {
        return Err(Error::ProfileOutsideBox(format!("centre ({}, {}) lies outside the box", center.0, center.1)));
    }
    let (hwx, hwy) = g.half_widths();
    let margin = (hwx - (center.0 - g.x0).abs()).min(hwy - (center.1 - g.y0).abs());
    let rmax = p.grid().rmax();
    let rmax_exceeds_box = rmax > margin;
    if rmax_exceeds_box {
        let peak = p.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let edge = p.eval(margin.max(0.0)).abs();
        if edge > 1e-10 * peak {
            log::warn!("profile is cut at the box edge: |u({margin:.3})| = {edge:e}");
        }
    }
    let values = (0..g.len())
        .map(|i| {
            let (x, y) = g.coords(i);
            let r = (x - center.0).hypot(y - center.1);
            if r > rmax {
                0.0
            } else {
                p.eval(r)
            }
        })
        .collect();
    Ok(Lift { field: Field2D::from_raw(*g, values), rmax_exceeds_box })
}

/// A random smooth field: a Gaussian envelope of width `sigma` about the
/// grid centre times a trigonometric polynomial with uniform random
/// coefficients and at most `kmax` half-periods per `sigma` in each direction.
pub fn random_smooth_field<R: Rng + ?Sized>(g: &Grid2D, rng: &mut R, sigma: f64, kmax: usize) -> Field2D {
    let k = kmax as i64;
    let mut modes = Vec::new();
    for m in -k..=k {
        for n in -k..=k {
            modes.push((m as f64, n as f64, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        }
    }
    let w = std::f64::consts::PI / (2.0 * sigma);
    let (cx, cy) = (g.x0, g.y0);
    Field2D::from_fn(*g, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        let env = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        let s: f64 = modes
            .iter()
            .map(|&(m, n, a, b)| {
                let t = w * (m * dx + n * dy);
                a * t.cos() + b * t.sin()
            })
            .sum();
        env * s
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid2D::new(15, 16, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 16, 1.0, 1.0).is_err());
        assert!(Grid2D::new(16, 16, 0.0, 1.0).is_err());
        assert!(Grid2D::new(16, 16, 1.0, 1.0).is_ok());
    }

    #[test]
    fn centre_is_a_node() {
        let g = Grid2D::with_center(16, 20, 3.0, 4.0, 0.5, -1.0).unwrap();
        assert_eq!(g.x(8), 0.5);
        assert_eq!(g.y(10), -1.0);
        assert_eq!(g.log_weight()[10 * 16 + 8], (0.5f64.hypot(1.0)).ln_1p());
        let c = Grid2D::square(16, 2.0).unwrap();
        assert_eq!(c.log_weight()[8 * 16 + 8], 0.0);
    }

    #[test]
    fn integrate_constant_and_zero() {
        let g = Grid2D::square(16, 2.0).unwrap();
        assert!((integrate(&Field2D::from_fn(g, |_, _| 1.0)) - 4.0).abs() < 1e-14);
        assert_eq!(integrate(&Field2D::zeros(g)), 0.0);
    }

    #[test]
    fn integrate_gaussian_is_pi() {
        let g = Grid2D::square(256, 24.0).unwrap();
        let f = Field2D::from_fn(g, |x, y| (-(x * x + y * y)).exp());
        assert!((integrate(&f) - PI).abs() < 1e-10);
    }

    #[test]
    fn field_rejects_nan_and_wrong_length() {
        let g = Grid2D::square(16, 1.0).unwrap();
        assert!(Field2D::new(g, vec![0.0; 10]).is_err());
        let mut v = vec![0.0; 256];
        v[3] = f64::NAN;
        assert!(Field2D::new(g, v).is_err());
    }

    #[test]
    fn central_difference_symbol_matches_stencil() {
        let g = Grid2D::new(16, 18, 2.0, 3.0).unwrap();
        let f = Field2D::from_fn(g, |x, y| (x * 1.3).sin() * (0.7 * y).cos() + x * y * 0.1);
        let lap = neg_laplacian(&f, DiffBackend::CentralDifference);
        let (hx, hy) = (g.hx(), g.hy());
        let v = f.values();
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let at = |dx: isize, dy: isize| {
                    let jx = (ix as isize + dx).rem_euclid(g.nx as isize) as usize;
                    let jy = (iy as isize + dy).rem_euclid(g.ny as isize) as usize;
                    v[jy * g.nx + jx]
                };
                let c = at(0, 0);
                let expect =
                    (2.0 * c - at(1, 0) - at(-1, 0)) / (hx * hx) + (2.0 * c - at(0, 1) - at(0, -1)) / (hy * hy);
                assert!((lap.values()[iy * g.nx + ix] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sine_gradient_energy_both_backends() {
        let (lx, ly) = (3.0, 2.0);
        let exact = (2.0 * PI / lx).powi(2) * lx * ly / 2.0;
        let g = Grid2D::new(32, 16, lx, ly).unwrap();
        let f = Field2D::from_fn(g, |x, _| (2.0 * PI * x / lx).sin());
        let spec = gradient_sq_integral(&f, DiffBackend::Spectral);
        assert!((spec - exact).abs() < 1e-10 * exact);
        // second-order differences converge to the same value as h -> 0
        let fine = Grid2D::new(32768, 16, lx, ly).unwrap();
        let f = Field2D::from_fn(fine, |x, _| (2.0 * PI * x / lx).sin());
        let fd = gradient_sq_integral(&f, DiffBackend::CentralDifference);
        let sp = gradient_sq_integral(&f, DiffBackend::Spectral);
        assert!((fd - sp).abs() < 1e-8 * sp, "fd {fd} spectral {sp}");
        assert_eq!(gradient_sq_integral(&Field2D::zeros(g), DiffBackend::Spectral), 0.0);
    }

    #[test]
    fn spectral_gradient_of_gaussian() {
        let g = Grid2D::square(96, 16.0).unwrap();
        let f = Field2D::from_fn(g, |x, y| (-(x * x + 2.0 * y * y)).exp());
        let (gx, gy) = gradient(&f, DiffBackend::Spectral);
        let ex = Field2D::from_fn(g, |x, y| -2.0 * x * (-(x * x + 2.0 * y * y)).exp());
        let ey = Field2D::from_fn(g, |x, y| -4.0 * y * (-(x * x + 2.0 * y * y)).exp());
        assert!(gx.sub(&ex).max_abs() < 1e-10);
        assert!(gy.sub(&ey).max_abs() < 1e-10);
    }

    #[test]
    fn shifted_solve_inverts_operator() {
        let g = Grid2D::square(32, 6.0).unwrap();
        let s = Symbols::new(&g, DiffBackend::Spectral);
        let f = Field2D::from_fn(g, |x, y| (-(x * x + y * y)).exp() * (1.0 + x));
        let u = s.solve_shifted(f.values(), 1.5);
        let back: Vec<f64> = s.neg_laplacian(&u).iter().zip(&u).map(|(a, b)| a + 1.5 * b).collect();
        for (a, b) in back.iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parity_orthogonality() {
        let g = Grid2D::square(64, 12.0).unwrap();
        let even = Field2D::from_fn(g, |x, y| (-(x * x + y * y) / 2.0).exp());
        let odd = Field2D::from_fn(g, |x, y| x * (-(x * x + y * y) / 2.0).exp());
        let ip = x_inner_product(&even, &odd, &NormWeights::unit()).unwrap();
        assert!(ip.abs() < 1e-12);
    }

    #[test]
    fn translation_keeps_h1_changes_weighted_part() {
        let g = Grid2D::square(128, 16.0).unwrap();
        let bump = |cx: f64| {
            Field2D::from_fn(g, move |x, y| {
                let r2 = (x - cx).powi(2) + y * y;
                if r2 < 1.0 {
                    (-1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            })
        };
        let a = bump(0.0);
        let b = bump(2.0 * g.hx() * 8.0);
        let h1 = |f: &Field2D| x_inner_product(f, f, &NormWeights::h1_only()).unwrap();
        assert!((h1(&a) - h1(&b)).abs() < 1e-12 * h1(&a));
        let xa = x_inner_product(&a, &a, &NormWeights::unit()).unwrap();
        let xb = x_inner_product(&b, &b, &NormWeights::unit()).unwrap();
        assert!(xb > xa * 1.01);
    }
}
