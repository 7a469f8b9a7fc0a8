//! The planar Newtonian potential `Φ[ρ] = (1/2π) log(1/|·|) ⋆ ρ`.
//!
//! Free-space convolution on a box uses the truncated-kernel method: the
//! kernel is cut off at a radius `T` at least the box diameter, so that for
//! in-box points the truncated and true kernels coincide. The Fourier
//! transform of the truncated kernel is smooth and known in closed form,
//!
//! ```text
//! Ĝ_T(k) = (1 − J0(kT)) / k² − T log T · J1(kT) / k,    Ĝ_T(0) = T²(1 − 2 log T) / 4,
//! ```
//!
//! and sampling it on a periodic grid of period `P ≥ L + T` gives the exact
//! (spectrally accurate) free-space result. The band-limited kernel is then
//! restricted to the `2n × 2n` displacement window, so each convolution costs
//! one zero-padded FFT pair at twice the grid size.

use std::f64::consts::PI;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{wavenumbers, Fft2};
use crate::field::radial::Exterior;
use crate::field::{Field2D, Grid2D, Parity, RadialProfile};
use crate::special::{bessel_j0, bessel_j1, gauss_legendre};

pub const KERNEL_CACHE_MAGIC: &[u8; 4] = b"LCK1";
pub const KERNEL_VERSION: u32 = 1;
pub const CACHE_ENV: &str = "LOGCHOQUARD_CACHE";

/// Density value at the last radial node above which the tail is considered
/// unresolved.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// `Ĝ_T(k)` in closed form.
pub fn truncated_kernel_hat(k: f64, t: f64) -> f64 {
    let kt = k * t;
    if kt < 1e-4 {
        // series about k = 0 (avoids cancellation in 1 − J0)
        let lt = t.ln();
        let z = kt * kt;
        return t * t * ((1.0 - 2.0 * lt) / 4.0 - z * (1.0 - 4.0 * lt) / 64.0 + z * z * (1.0 - 6.0 * lt) / 2304.0);
    }
    (1.0 - bessel_j0(kt)) / (k * k) - t * t.ln() * bessel_j1(kt) / k
}

/// `Ĝ_T(k) = −∫_0^T r log r J0(kr) dr` by composite Gauss–Legendre
/// quadrature, graded geometrically towards the logarithmic endpoint.
pub fn truncated_kernel_hat_quadrature(k: f64, t: f64) -> f64 {
    let (gx, gw) = gauss_legendre(16);
    let mut breaks = vec![0.0];
    breaks.extend((0..=60).rev().map(|j| t * 0.5f64.powi(j)));
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let pieces = ((b - a) * k / 2.0).ceil().max(1.0) as usize;
        let h = (b - a) / pieces as f64;
        for p in 0..pieces {
            let lo = a + p as f64 * h;
            for (x, q) in gx.iter().zip(&gw) {
                let r = lo + 0.5 * h * (1.0 + x);
                total -= 0.5 * h * q * r * r.ln() * bessel_j0(k * r);
            }
        }
    }
    total
}

/// How the Fourier multipliers are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MultiplierMethod {
    #[default]
    ClosedForm,
    /// Radial quadrature at every distinct `|k|`; slow, used to cross-check.
    Quadrature,
}

#[derive(Clone, Debug, Default)]
pub struct KernelOptions {
    /// Truncation radius; defaults to the box diameter.
    pub truncation: Option<f64>,
    pub method: MultiplierMethod,
    /// Directory for the on-disk cache; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
}

impl KernelOptions {
    /// Defaults, with the cache directory taken from `LOGCHOQUARD_CACHE`.
    pub fn from_env() -> Self {
        KernelOptions { cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from), ..Default::default() }
    }
}

/// Precomputed multipliers for free-space convolution on one grid.
#[derive(Clone, Debug)]
pub struct TruncatedKernelSpectrum {
    grid: Grid2D,
    t: f64,
    /// real multipliers on the `2nx × 2ny` padded grid, FFT order
    khat: Vec<f64>,
}

/// Smallest `m >= n` of the form `2^a 3^b 5^c` with `m` even.
fn fft_friendly(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 && m.is_multiple_of(2) {
            return m;
        }
        m += 1;
    }
}

/// Build with default options (closed form, cache from the environment).
pub fn build_kernel_spectrum(g: &Grid2D) -> Result<TruncatedKernelSpectrum> {
    build_kernel_spectrum_with(g, &KernelOptions::from_env())
}

pub fn build_kernel_spectrum_with(g: &Grid2D, opts: &KernelOptions) -> Result<TruncatedKernelSpectrum> {
    let diameter = g.lx.hypot(g.ly);
    let t = opts.truncation.unwrap_or(diameter);
    if !(t >= diameter) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("truncation radius {t} is below the box diameter {diameter}")));
    }
    let cache_file = opts.cache_dir.as_ref().map(|d| d.join(cache_file_name(g, t, opts.method)));
    if let Some(path) = &cache_file {
        if path.exists() {
            match TruncatedKernelSpectrum::load(path) {
                Ok(k) if k.matches(g, t) => {
                    log::debug!("kernel spectrum loaded from {}", path.display());
                    return Ok(TruncatedKernelSpectrum { grid: *g, ..k });
                }
                Ok(_) => log::warn!("kernel cache {} does not match; rebuilding", path.display()),
                Err(e) => log::warn!("kernel cache {} unreadable ({e}); rebuilding", path.display()),
            }
        }
    }
    let k = build_uncached(g, t, opts.method)?;
    if let Some(path) = &cache_file {
        if let Err(e) = fs::create_dir_all(path.parent().unwrap_or(Path::new("."))).and_then(|_| k.save(path)) {
            log::warn!("could not write kernel cache {}: {e}", path.display());
        }
    }
    Ok(k)
}

fn build_uncached(g: &Grid2D, t: f64, method: MultiplierMethod) -> Result<TruncatedKernelSpectrum> {
    let (hx, hy) = (g.hx(), g.hy());
    let nbx = fft_friendly(((g.lx + t) / hx).ceil() as usize + 2).max(2 * g.nx);
    let nby = fft_friendly(((g.ly + t) / hy).ceil() as usize + 2).max(2 * g.ny);
    let nbig = nbx
        .checked_mul(nby)
        .filter(|n| *n <= 1 << 28)
        .ok_or_else(|| Error::Resource(format!("kernel build grid {nbx} x {nby} too large")))?;
    let kx = wavenumbers(nbx, nbx as f64 * hx);
    let ky = wavenumbers(nby, nby as f64 * hy);

    let mut big = vec![Complex64::new(0.0, 0.0); nbig];
    match method {
        MultiplierMethod::ClosedForm => {
            for (iy, ky) in ky.iter().enumerate() {
                for (ix, kx) in kx.iter().enumerate() {
                    big[iy * nbx + ix] = Complex64::new(truncated_kernel_hat(kx.hypot(*ky), t), 0.0);
                }
            }
        }
        MultiplierMethod::Quadrature => {
            let mut memo = std::collections::HashMap::new();
            for (iy, ky) in ky.iter().enumerate() {
                for (ix, kx) in kx.iter().enumerate() {
                    let k = kx.hypot(*ky);
                    let v = *memo.entry(k.to_bits()).or_insert_with(|| truncated_kernel_hat_quadrature(k, t));
                    big[iy * nbx + ix] = Complex64::new(v, 0.0);
                }
            }
        }
    }
    // band-limited kernel sampled at displacements, times the cell area
    Fft2::get(nbx, nby).inverse(&mut big);

    let (px, py) = (2 * g.nx, 2 * g.ny);
    let mut win = vec![Complex64::new(0.0, 0.0); px * py];
    for my in 0..py {
        if my == g.ny {
            continue;
        }
        let dy = if my < g.ny { my as isize } else { my as isize - py as isize };
        let by = dy.rem_euclid(nby as isize) as usize;
        for mx in 0..px {
            if mx == g.nx {
                continue;
            }
            let dx = if mx < g.nx { mx as isize } else { mx as isize - px as isize };
            let bx = dx.rem_euclid(nbx as isize) as usize;
            win[my * px + mx] = Complex64::new(big[by * nbx + bx].re, 0.0);
        }
    }
    Fft2::get(px, py).forward(&mut win);
    let khat = win.into_iter().map(|c| c.re).collect();
    Ok(TruncatedKernelSpectrum { grid: *g, t, khat })
}

fn cache_file_name(g: &Grid2D, t: f64, method: MultiplierMethod) -> String {
    // FNV-1a over the exact parameter bits
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&(g.nx as u64).to_le_bytes());
    eat(&(g.ny as u64).to_le_bytes());
    eat(&g.lx.to_bits().to_le_bytes());
    eat(&g.ly.to_bits().to_le_bytes());
    eat(&t.to_bits().to_le_bytes());
    eat(&KERNEL_VERSION.to_le_bytes());
    eat(&[method as u8]);
    format!("lck1-{}x{}-{h:016x}.bin", g.nx, g.ny)
}

impl TruncatedKernelSpectrum {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn truncation(&self) -> f64 {
        self.t
    }

    /// Dimensions of the zero-padded grid.
    pub fn padded_dims(&self) -> (usize, usize) {
        (2 * self.grid.nx, 2 * self.grid.ny)
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.khat
    }

    fn matches(&self, g: &Grid2D, t: f64) -> bool {
        self.grid.nx == g.nx && self.grid.ny == g.ny && self.grid.lx == g.lx && self.grid.ly == g.ly && self.t == t
    }

    fn check(&self, g: &Grid2D) -> Result<()> {
        if self.grid.nx == g.nx && self.grid.ny == g.ny && self.grid.lx == g.lx && self.grid.ly == g.ly {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "kernel built for {}x{} over {}x{}, field is {}x{} over {}x{}",
                self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly, g.nx, g.ny, g.lx, g.ly
            )))
        }
    }

    /// Convolve raw node values: `a` in the real part, `b` in the imaginary
    /// part, so two real densities cost one transform pair.
    fn convolve_complex(&self, a: &[f64], b: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (px, py) = self.padded_dims();
        let mut buf = vec![Complex64::new(0.0, 0.0); px * py];
        for iy in 0..ny {
            for ix in 0..nx {
                let i = iy * nx + ix;
                buf[iy * px + ix] = Complex64::new(a[i], b.map_or(0.0, |b| b[i]));
            }
        }
        let plan = Fft2::get(px, py);
        plan.forward(&mut buf);
        for (c, k) in buf.iter_mut().zip(&self.khat) {
            *c *= *k;
        }
        plan.inverse(&mut buf);
        let mut ra = Vec::with_capacity(nx * ny);
        let mut rb = Vec::with_capacity(if b.is_some() { nx * ny } else { 0 });
        for iy in 0..ny {
            for ix in 0..nx {
                let c = buf[iy * px + ix];
                ra.push(c.re);
                if b.is_some() {
                    rb.push(c.im);
                }
            }
        }
        (ra, rb)
    }

    /// `Φ[ρ]` on the grid of `ρ`.
    pub fn convolve(&self, rho: &Field2D) -> Result<Field2D> {
        self.check(rho.grid())?;
        Ok(Field2D::from_raw(*rho.grid(), self.convolve_complex(rho.values(), None).0))
    }

    /// `(Φ[a], Φ[b])` at the cost of one convolution.
    pub fn convolve_pair(&self, a: &Field2D, b: &Field2D) -> Result<(Field2D, Field2D)> {
        self.check(a.grid())?;
        a.grid().check_same(b.grid())?;
        let (ra, rb) = self.convolve_complex(a.values(), Some(b.values()));
        Ok((Field2D::from_raw(*a.grid(), ra), Field2D::from_raw(*a.grid(), rb)))
    }

    /// `B(f, g) = ∫ f Φ[g]`.
    pub fn bilinear(&self, f: &Field2D, g: &Field2D) -> Result<f64> {
        f.grid().check_same(g.grid())?;
        if f.values() == g.values() {
            let phi = self.convolve(g)?;
            return Ok(f.dot(&phi));
        }
        let (pf, pg) = self.convolve_pair(f, g)?;
        let fg = f.dot(&pg);
        let gf = g.dot(&pf);
        let scale = fg.abs().max(gf.abs()).max(f.norm_l2() * g.norm_l2() * 1e-3);
        if (fg - gf).abs() > 1e-10 * scale {
            log::warn!("bilinear form asymmetry: {fg:e} vs {gf:e}");
        }
        Ok(0.5 * (fg + gf))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut out = Vec::with_capacity(48 + 8 * self.khat.len());
        out.extend_from_slice(KERNEL_CACHE_MAGIC);
        out.extend_from_slice(&KERNEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.grid.nx as u32).to_le_bytes());
        out.extend_from_slice(&(self.grid.ny as u32).to_le_bytes());
        for v in [self.grid.lx, self.grid.ly, self.t] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.khat.len() as u64).to_le_bytes());
        for v in &self.khat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        // write-then-rename so a concurrent reader never sees a partial file
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, out)?;
        fs::rename(tmp, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let mut cur = &bytes[..];
        let bad = || Error::Format("truncated kernel cache".into());
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        cur.read_exact(&mut b4).map_err(|_| bad())?;
        if &b4 != KERNEL_CACHE_MAGIC {
            return Err(Error::Format("bad kernel cache magic".into()));
        }
        let mut u = [0u32; 3];
        for v in u.iter_mut() {
            cur.read_exact(&mut b4).map_err(|_| bad())?;
            *v = u32::from_le_bytes(b4);
        }
        if u[0] != KERNEL_VERSION {
            return Err(Error::Format(format!("kernel cache version {}", u[0])));
        }
        let mut f = [0f64; 3];
        for v in f.iter_mut() {
            cur.read_exact(&mut b8).map_err(|_| bad())?;
            *v = f64::from_le_bytes(b8);
        }
        cur.read_exact(&mut b8).map_err(|_| bad())?;
        let count = u64::from_le_bytes(b8) as usize;
        let grid = Grid2D::new(u[1] as usize, u[2] as usize, f[0], f[1])?;
        if count != 4 * grid.len() || cur.len() != 8 * count {
            return Err(Error::Format("kernel cache payload size mismatch".into()));
        }
        let khat = cur.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(TruncatedKernelSpectrum { grid, t: f[2], khat })
    }
}

/// `Φ[ρ]`.
pub fn convolve(rho: &Field2D, k: &TruncatedKernelSpectrum) -> Result<Field2D> {
    k.convolve(rho)
}

/// `B(f, g) = −(1/2π) ∫∫ log|x − y| f(x) g(y)`.
pub fn bilinear_b(f: &Field2D, g: &Field2D, k: &TruncatedKernelSpectrum) -> Result<f64> {
    k.bilinear(f, g)
}

/// Potential of a radial density: `Φ(r) = −log r · m(r) − ∫_r^∞ s log s ρ(s) ds`
/// with `m(r) = ∫_0^r s ρ(s) ds`, evaluated as
/// `Φ(r) = −log R · m(R) + ∫_r^R m(t)/t dt`.
pub fn radial_log_potential(u2: &RadialProfile) -> Result<RadialProfile> {
    radial_log_potential_with(u2, DEFAULT_TAIL_TOL)
}

pub fn radial_log_potential_with(u2: &RadialProfile, tail_tol: f64) -> Result<RadialProfile> {
    let last = *u2.values().last().expect("nonempty grid");
    if last.abs() > tail_tol {
        return Err(Error::InsufficientDecay { tol: tail_tol, value: last.abs() });
    }
    let grid = u2.grid();
    let r = grid.nodes();
    let big_r = grid.rmax();
    if !(r[r.len() - 1] > 1.0) {
        return Err(Error::InvalidArgument("radial grid must extend beyond r = 1".into()));
    }
    let sr = u2.map_with(Parity::Odd, Exterior::Zero, |s, v| s * v)?;
    let (m, m_total) = sr.cumulative_integral();
    let q = RadialProfile::with_rules(
        grid.clone(),
        m.iter().zip(r).map(|(m, t)| m / t).collect(),
        Parity::Odd,
        Exterior::InverseR,
    )?;
    let (qc, q_total) = q.cumulative_integral();
    let phi_r = -big_r.ln() * m_total;
    let w = qc.iter().map(|qi| phi_r + q_total - qi).collect();
    RadialProfile::with_rules(grid.clone(), w, Parity::Even, Exterior::LogHarmonic)
}

/// `(1/2π) ∫ ρ`, the far-field coefficient: `Φ(x) ≈ −M log|x|`.
pub fn far_field_coefficient(rho: &Field2D) -> f64 {
    crate::field::integrate(rho) / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{lift_radial, RadialGrid};

    const GAMMA: f64 = 0.577_215_664_901_532_9;

    fn opts() -> KernelOptions {
        KernelOptions::default()
    }

    #[test]
    fn small_k_series_matches_quadrature() {
        let t = 30.0;
        for &k in &[1e-7, 1e-6, 3.3e-6] {
            let series = truncated_kernel_hat(k, t);
            let quad = truncated_kernel_hat_quadrature(k, t);
            assert!((series - quad).abs() < 1e-12 * series.abs(), "{series} {quad}");
        }
        assert!((truncated_kernel_hat(0.0, t) - t * t * (1.0 - 2.0 * t.ln()) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let t = 28.5;
        for &k in &[0.0, 0.01, 0.3, 1.0, 3.7, 12.0, 40.0] {
            let a = truncated_kernel_hat(k, t);
            let b = truncated_kernel_hat_quadrature(k, t);
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "k = {k}: {a} vs {b}");
        }
    }

    #[test]
    fn multipliers_are_isotropic_on_square_grid() {
        let g = Grid2D::square(32, 8.0).unwrap();
        let k = build_kernel_spectrum_with(&g, &opts()).unwrap();
        let (px, py) = k.padded_dims();
        for my in 0..py {
            for mx in 0..px {
                let a = k.multipliers()[my * px + mx];
                let b = k.multipliers()[mx * px + my];
                assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gaussian_potential_at_origin_is_quarter_gamma() {
        let g = Grid2D::square(128, 16.0).unwrap();
        let k = build_kernel_spectrum_with(&g, &opts()).unwrap();
        let rho = Field2D::from_fn(g, |x, y| (-(x * x + y * y)).exp());
        let phi = k.convolve(&rho).unwrap();
        let c = 64 * 128 + 64;
        assert!((phi.values()[c] - GAMMA / 4.0).abs() < 1e-6 * GAMMA / 4.0, "{}", phi.values()[c]);
    }

    #[test]
    fn zero_density_and_linearity() {
        let g = Grid2D::square(32, 6.0).unwrap();
        let k = build_kernel_spectrum_with(&g, &opts()).unwrap();
        assert_eq!(k.convolve(&Field2D::zeros(g)).unwrap().max_abs(), 0.0);
        let a = Field2D::from_fn(g, |x, y| (-(x * x + y * y)).exp());
        let b = Field2D::from_fn(g, |x, y| x * (-(x - 0.5).powi(2) - y * y).exp());
        let lhs = k.convolve(&a.scaled(2.0).add(&b.scaled(-3.0))).unwrap();
        let rhs = k.convolve(&a).unwrap().scaled(2.0).add(&k.convolve(&b).unwrap().scaled(-3.0));
        assert!(lhs.sub(&rhs).max_abs() < 1e-12 * lhs.max_abs());
        let (pa, pb) = k.convolve_pair(&a, &b).unwrap();
        assert!(pa.sub(&k.convolve(&a).unwrap()).max_abs() < 1e-13);
        assert!(pb.sub(&k.convolve(&b).unwrap()).max_abs() < 1e-13);
    }

    #[test]
    fn doubling_truncation_changes_nothing() {
        let g = Grid2D::square(64, 12.0).unwrap();
        let rho = Field2D::from_fn(g, |x, y| (-(x * x + 2.0 * y * y)).exp() * (1.0 + 0.3 * x));
        let k1 = build_kernel_spectrum_with(&g, &opts()).unwrap();
        let o2 = KernelOptions { truncation: Some(2.0 * k1.truncation()), ..opts() };
        let k2 = build_kernel_spectrum_with(&g, &o2).unwrap();
        let d = k1.convolve(&rho).unwrap().sub(&k2.convolve(&rho).unwrap()).max_abs();
        assert!(d < 1e-12, "difference {d}");
    }

    #[test]
    fn quadrature_build_agrees_with_closed_form() {
        let g = Grid2D::square(16, 4.0).unwrap();
        let a = build_kernel_spectrum_with(&g, &opts()).unwrap();
        let q = KernelOptions { method: MultiplierMethod::Quadrature, ..opts() };
        let b = build_kernel_spectrum_with(&g, &q).unwrap();
        let scale = a.multipliers().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.multipliers().iter().zip(b.multipliers()) {
            assert!((x - y).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn translation_equivariance() {
        let g = Grid2D::square(64, 16.0).unwrap();
        let k = build_kernel_spectrum_with(&g, &opts()).unwrap();
        let h = g.hx();
        let bump = |cx: f64| Field2D::from_fn(g, move |x, y| (-((x - cx).powi(2) + y * y)).exp());
        let p0 = k.convolve(&bump(0.0)).unwrap();
        let p1 = k.convolve(&bump(4.0 * h)).unwrap();
        let mut worst = 0.0f64;
        for iy in 0..64 {
            for ix in 0..60 {
                worst = worst.max((p1.values()[iy * 64 + ix + 4] - p0.values()[iy * 64 + ix]).abs());
            }
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn spike_reproduces_fundamental_solution() {
        let g = Grid2D::square(256, 8.0).unwrap();
        let k = build_kernel_spectrum_with(&g, &opts()).unwrap();
        // unit mass spread over a narrow Gaussian: Φ = −log r/2π up to e^{-r²/s²}
        let s = 0.1;
        let rho = Field2D::from_fn(g, |x, y| (-(x * x + y * y) / (s * s)).exp() / (PI * s * s));
        let phi = k.convolve(&rho).unwrap();
        for i in 0..g.len() {
            let (x, y) = g.coords(i);
            let r = x.hypot(y);
            if (0.5..=2.0).contains(&r) {
                let exact = -r.ln() / (2.0 * PI);
                assert!((phi.values()[i] - exact).abs() < 1e-3 * exact.abs().max(0.05));
            }
        }
    }

    #[test]
    fn cache_roundtrip() {
        let dir = std::env::temp_dir().join(format!("lck-test-{}", std::process::id()));
        let g = Grid2D::square(16, 3.0).unwrap();
        let o = KernelOptions { cache_dir: Some(dir.clone()), ..opts() };
        let a = build_kernel_spectrum_with(&g, &o).unwrap();
        let files: Vec<_> = fs::read_dir(&dir).unwrap().collect();
        assert_eq!(files.len(), 1);
        let bytes = fs::read(files[0].as_ref().unwrap().path()).unwrap();
        assert_eq!(&bytes[..4], b"LCK1");
        let b = build_kernel_spectrum_with(&g, &o).unwrap();
        assert_eq!(a.multipliers(), b.multipliers());
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn radial_gaussian_potential() {
        let rg = RadialGrid::uniform(2000, 20.0).unwrap();
        let rho = RadialProfile::from_fn(rg.clone(), |r| (-r * r).exp()).unwrap();
        let w = radial_log_potential(&rho).unwrap();
        assert!((w.eval(0.0) - GAMMA / 4.0).abs() < 1e-12);
        // far field: total mass/2π = 1/2
        for &r in &[6.0, 10.0, 19.0] {
            assert!((w.eval(r) + 0.5 * f64::ln(r)).abs() < 1e-12, "r = {r}");
        }
        let zero = RadialProfile::from_fn(rg, |_| 0.0).unwrap();
        assert!(radial_log_potential(&zero).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn radial_rejects_undecayed_density() {
        let rg = RadialGrid::uniform(100, 5.0).unwrap();
        let rho = RadialProfile::from_fn(rg, |r| (-r).exp()).unwrap();
        assert!(matches!(radial_log_potential(&rho), Err(Error::InsufficientDecay { .. })));
    }

    #[test]
    fn radial_and_planar_agree() {
        let g = Grid2D::square(128, 16.0).unwrap();
        let k = build_kernel_spectrum_with(&g, &opts()).unwrap();
        let rg = RadialGrid::uniform(1600, 16.0).unwrap();
        let rho = RadialProfile::from_fn(rg, |r| (1.0 + r * r) * (-r * r).exp()).unwrap();
        let w = radial_log_potential(&rho).unwrap();
        let phi = k.convolve(&lift_radial(&rho, &g, (0.0, 0.0)).unwrap().field).unwrap();
        let lifted_w = lift_radial(&w, &g, (0.0, 0.0)).unwrap().field;
        // compare inside the inscribed disc where the lift is exact
        let mut worst = 0.0f64;
        for i in 0..g.len() {
            let (x, y) = g.coords(i);
            if x.hypot(y) < 7.5 {
                worst = worst.max((phi.values()[i] - lifted_w.values()[i]).abs());
            }
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn point_mass_total_matches_box_integral() {
        let g = Grid2D::square(64, 8.0).unwrap();
        let k = build_kernel_spectrum_with(&g, &opts()).unwrap();
        let mut rho = Field2D::zeros(g);
        rho.values_mut()[32 * 64 + 32] = 1.0 / g.cell_area();
        let total = crate::field::integrate(&k.convolve(&rho).unwrap());
        // ∫ over [−a, a]² of log(1/|x|)/2π
        let a: f64 = 4.0;
        let exact = -a * a * ((2.0 * a * a).ln() - 3.0 + std::f64::consts::FRAC_PI_2) / PI;
        assert!((total - exact).abs() < 2e-4 * exact.abs(), "{total} vs {exact}");
    }

    #[test]
    fn self_energy_changes_sign_under_dilation() {
        let g = Grid2D::square(128, 24.0).unwrap();
        let k = build_kernel_spectrum_with(&g, &opts()).unwrap();
        // unit-mass Gaussians of width 1/λ
        let b = |lam: f64| {
            let rho = Field2D::from_fn(g, |x, y| lam * lam / PI * (-(lam * lam) * (x * x + y * y)).exp());
            k.bilinear(&rho, &rho).unwrap()
        };
        assert!(b(4.0) > 0.0);
        assert!(b(0.5) < 0.0);
        // B(ρ_λ, ρ_λ) = B(ρ, ρ) + log λ / 2π for unit mass
        assert!((b(2.0) - b(1.0) - 2f64.ln() / (2.0 * PI)).abs() < 1e-9);
    }
}
