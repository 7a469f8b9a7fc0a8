//! Lyapunov–Schmidt reduction around the manifold of translates
//! `z_ξ = U(· − ξ)` for the rescaled energy
//!
//! ```text
//! I_ε(u) = ½(‖∇u‖² + ∫V(x₀ + εx) u²) − ¼ B(u², u²).
//! ```
//!
//! Coordinates are relative to `x₀`. Orthogonality uses the ε-dependent
//! product `⟨u, v⟩_ε = ∫∇u·∇v + ∫(V_ε + log(1+|x|)) uv` with Riesz map
//! `A_ε = −Δ + V_ε + log(1+|x|)`. A field `w` is ε-orthogonal to the tangent
//! vectors `t_i` exactly when it is L²-orthogonal to `c_i = A_ε t_i`, and the
//! ε-projection of a gradient vanishes exactly when its L² representative lies
//! in `span{c_i}`. The correction therefore solves `Q L Q w = −Q(I'_ε(z) + R)`
//! with `Q` the L² projector onto `span{c_i}^⊥`, a symmetric (indefinite)
//! system handled by MINRES.

use crate::error::{Error, Result};
use crate::field::{dot, Field2D, Grid2D, NormWeights};
use crate::groundstate::{Functional, GroundStateRecord, ZeroOrder};
use crate::linops::{minres, LinearizedOperator};
use crate::logkernel::TruncatedKernelSpectrum;
use crate::semiclassical::{Extremum, PotentialSpec};

#[derive(Clone, Debug)]
pub struct ReductionOptions {
    /// Fixed-point tolerance on `‖w_{k+1} − w_k‖_ε`.
    pub fp_tol: f64,
    pub max_fp_iter: usize,
    /// Relative MINRES tolerance.
    pub lin_tol: f64,
    pub lin_max_iter: usize,
    pub eps_max: f64,
    /// Largest admissible `|ξ|`.
    pub xi_box: f64,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        ReductionOptions {
            fp_tol: 1e-10,
            max_fp_iter: 50,
            lin_tol: 1e-12,
            lin_max_iter: 2000,
            eps_max: 0.3,
            xi_box: 2.0,
        }
    }
}

pub struct ReductionContext<'a> {
    gs: &'a GroundStateRecord,
    potential: PotentialSpec,
    eps: f64,
    functional: Functional<'a>,
    weights: NormWeights,
    riesz_weight: Vec<f64>,
    q2: Vec<f64>,
    opts: ReductionOptions,
}

/// Samples of `V(x₀ + εx)` on the rescaled grid.
pub fn sample_scaled_potential(p: &PotentialSpec, eps: f64, g: &Grid2D) -> Vec<f64> {
    (0..g.len())
        .map(|i| {
            let (x, y) = g.coords(i);
            p.value([p.x0[0] + eps * x, p.x0[1] + eps * y])
        })
        .collect()
}

impl<'a> ReductionContext<'a> {
    pub fn new(
        gs: &'a GroundStateRecord,
        potential: &PotentialSpec,
        eps: f64,
        kernel: &'a TruncatedKernelSpectrum,
        opts: ReductionOptions,
    ) -> Result<Self> {
        if !(eps > 0.0) || eps > opts.eps_max {
            return Err(Error::InvalidArgument(format!("eps = {eps} must lie in (0, {}]", opts.eps_max)));
        }
        if (gs.a - potential.v0).abs() > 1e-12 * potential.v0 {
            return Err(Error::InvalidArgument(format!(
                "ground state solved for a = {}, but V(x0) = {}",
                gs.a, potential.v0
            )));
        }
        let g = *kernel.grid();
        let v = sample_scaled_potential(potential, eps, &g);
        let weights = NormWeights::with_potential(v.clone())?;
        let riesz_weight = weights.mass_weight(&g)?;
        let functional = Functional::new(kernel, ZeroOrder::Sampled(v), Default::default())?;
        let q2 = (0..g.len())
            .map(|i| {
                let (x, y) = g.coords(i);
                potential.q2([x, y])
            })
            .collect();
        Ok(ReductionContext { gs, potential: potential.clone(), eps, functional, weights, riesz_weight, q2, opts })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn grid(&self) -> &Grid2D {
        self.functional.grid()
    }

    pub fn ground_state(&self) -> &'a GroundStateRecord {
        self.gs
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn functional(&self) -> &Functional<'a> {
        &self.functional
    }

    pub fn weights(&self) -> &NormWeights {
        &self.weights
    }

    pub fn options(&self) -> &ReductionOptions {
        &self.opts
    }

    fn riesz_raw(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.functional.symbols().neg_laplacian(u);
        for ((o, m), v) in out.iter_mut().zip(&self.riesz_weight).zip(u) {
            *o += m * v;
        }
        out
    }

    /// `⟨u, v⟩_ε`.
    pub fn eps_product(&self, u: &Field2D, v: &Field2D) -> f64 {
        self.grid().cell_area() * dot(&self.riesz_raw(u.values()), v.values())
    }

    pub fn eps_norm(&self, u: &Field2D) -> f64 {
        self.eps_product(u, u).max(0.0).sqrt()
    }

    /// `I_ε(u)`.
    pub fn energy(&self, u: &Field2D) -> Result<f64> {
        self.functional.energy(u)
    }

    /// `z_ξ` on the rescaled grid.
    pub fn translate(&self, xi: [f64; 2]) -> Result<Field2D> {
        Ok(self.gs.lift(self.grid(), (xi[0], xi[1]))?.field)
    }

    /// `Γ(ξ) = ∫ Q₂(x) z_ξ(x)²`.
    pub fn gamma(&self, z: &Field2D) -> f64 {
        let v: Vec<f64> = z.values().iter().zip(&self.q2).map(|(u, q)| q * u * u).collect();
        self.grid().cell_area() * crate::field::pairwise_sum(&v)
    }

    /// Orthonormal frame at `ξ`.
    pub fn frame(&self, xi: [f64; 2]) -> Result<Frame> {
        if !(xi[0].hypot(xi[1]) <= self.opts.xi_box) {
            return Err(Error::InvalidArgument(format!("|xi| exceeds the admissible box {}", self.opts.xi_box)));
        }
        let g = *self.grid();
        let z = self.translate(xi)?;
        let (gx, gy) = self.functional.symbols().gradient(z.values());
        // ∂_{ξ_i} z_ξ = −∂_i z_ξ
        let raw =
            [Field2D::new(g, gx.iter().map(|v| -v).collect())?, Field2D::new(g, gy.iter().map(|v| -v).collect())?];
        let tangent = self.orthonormalize(&raw)?;
        let mut with_z = vec![z.clone()];
        with_z.extend(raw.iter().cloned());
        let projector_basis = self.orthonormalize(&with_z)?;
        let mut c: Vec<Vec<f64>> = tangent.iter().map(|t| self.riesz_raw(t.values())).collect();
        for i in 0..c.len() {
            for _ in 0..2 {
                for j in 0..i {
                    let p = dot(&c[i], &c[j]);
                    let cj = c[j].clone();
                    for (a, b) in c[i].iter_mut().zip(&cj) {
                        *a -= p * b;
                    }
                }
                let n = dot(&c[i], &c[i]).sqrt();
                c[i].iter_mut().for_each(|v| *v /= n);
            }
        }
        Ok(Frame { xi, z, tangent, projector_basis, c })
    }

    /// Gram–Schmidt in the ε-product (two passes).
    fn orthonormalize(&self, fields: &[Field2D]) -> Result<Vec<Field2D>> {
        let norms: Vec<f64> = fields.iter().map(|f| self.eps_norm(f)).collect();
        let n = fields.len();
        let mut gram = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] = self.eps_product(&fields[i], &fields[j]) / (norms[i] * norms[j]);
            }
        }
        let det = gram.determinant();
        if !(det > 1e-12) {
            return Err(Error::DegenerateBasis(det));
        }
        let mut out: Vec<Field2D> = Vec::with_capacity(n);
        for f in fields {
            let mut v = f.clone();
            for _ in 0..2 {
                for e in &out {
                    let p = self.eps_product(&v, e);
                    v.axpy(-p, e);
                }
                let nv = self.eps_norm(&v);
                v = v.scaled(1.0 / nv);
            }
            out.push(v);
        }
        Ok(out)
    }

    fn q_project(&self, frame: &Frame, v: &mut [f64]) {
        for c in &frame.c {
            let p = dot(c, v);
            for (a, b) in v.iter_mut().zip(c) {
                *a -= p * b;
            }
        }
    }
}

/// The translate `z_ξ` with its tangent and projector bases.
#[derive(Clone, Debug)]
pub struct Frame {
    pub xi: [f64; 2],
    pub z: Field2D,
    /// ε-orthonormal basis of `span{∂_{ξ₁} z_ξ, ∂_{ξ₂} z_ξ}`.
    pub tangent: Vec<Field2D>,
    /// ε-orthonormal basis of `span{z_ξ, ∂_{ξ₁} z_ξ, ∂_{ξ₂} z_ξ}`.
    pub projector_basis: Vec<Field2D>,
    /// Euclidean-orthonormal basis of `span{A_ε t_i}`.
    c: Vec<Vec<f64>>,
}

/// L² gradient `−Δu + V(x₀ + εx) u − Φ[u²] u`.
pub fn grad_i_eps(u: &Field2D, ctx: &ReductionContext<'_>) -> Result<Field2D> {
    ctx.functional.gradient(u)
}

/// `R(z, w) = I'_ε(z + w) − I'_ε(z) − I''_ε(z)[w]`
/// `= −2wΦ[zw] − zΦ[w²] − wΦ[w²]`.
pub fn remainder_r(z: &Field2D, w: &Field2D, ctx: &ReductionContext<'_>) -> Result<Field2D> {
    z.grid().check_same(w.grid())?;
    let kernel = ctx.functional.kernel();
    let (pzw, pww) = kernel.convolve_pair(&z.mul(w), &w.mul(w))?;
    let vals = z
        .values()
        .iter()
        .zip(w.values())
        .zip(pzw.values().iter().zip(pww.values()))
        .map(|((zi, wi), (a, b))| -2.0 * wi * a - zi * b - wi * b)
        .collect();
    Field2D::new(*z.grid(), vals)
}

/// `P f = f − Σ⟨f, e_i⟩_ε e_i` over the tangent basis, or over
/// `{z_ξ, tangents}` when `include_z` is set.
pub fn project_orthogonal(f: &Field2D, frame: &Frame, ctx: &ReductionContext<'_>, include_z: bool) -> Field2D {
    let basis = if include_z { &frame.projector_basis } else { &frame.tangent };
    let mut out = f.clone();
    for e in basis {
        let p = ctx.eps_product(f, e);
        out.axpy(-p, e);
    }
    out
}

#[derive(Clone, Debug)]
pub struct CorrectionResult {
    pub w: Field2D,
    pub xi: [f64; 2],
    pub eps: f64,
    pub w_norm: f64,
    pub iterations: usize,
    /// `‖w_{k+1} − w_k‖_ε` per fixed-point step.
    pub contraction_trace: Vec<f64>,
    /// `α_i = ⟨I'_ε(z_ξ + w), t_i⟩` on the ε-orthonormal tangent basis.
    pub residual_tangential: [f64; 2],
    /// L² norm of the non-tangential part of `I'_ε(z_ξ + w)`; bounds the
    /// ε-norm of the projected residual up to `(inf V)^{−1/2}`.
    pub projected_residual: f64,
    /// `Θ_ε(ξ) = I_ε(z_ξ + w)`.
    pub theta: f64,
    pub linear_iterations: usize,
}

pub fn solve_correction(ctx: &ReductionContext<'_>, xi: [f64; 2]) -> Result<CorrectionResult> {
    let frame = ctx.frame(xi)?;
    solve_correction_in(ctx, &frame, None)
}

/// Fixed point of `w ↦ −(QLQ)⁻¹ Q(I'_ε(z) + R(z, w))`, optionally started
/// from (the admissible part of) `guess`.
pub fn solve_correction_in(
    ctx: &ReductionContext<'_>,
    frame: &Frame,
    guess: Option<&Field2D>,
) -> Result<CorrectionResult> {
    let g = *ctx.grid();
    let z = &frame.z;
    let opts = &ctx.opts;
    let g0 = grad_i_eps(z, ctx)?;
    let lin = LinearizedOperator::new(&ctx.functional, z.clone())?;
    let a = |v: &[f64]| {
        let mut q = v.to_vec();
        ctx.q_project(frame, &mut q);
        let mut out = lin.apply_raw(&q);
        ctx.q_project(frame, &mut out);
        out
    };
    let m = |v: &[f64]| {
        let mut q = v.to_vec();
        ctx.q_project(frame, &mut q);
        let mut out = lin.precondition_raw(&q);
        ctx.q_project(frame, &mut out);
        out
    };
    let mut w = match guess {
        Some(gw) => {
            g.check_same(gw.grid())?;
            let mut v = gw.values().to_vec();
            ctx.q_project(frame, &mut v);
            Field2D::new(g, v)?
        }
        None => Field2D::zeros(g),
    };
    let mut trace = Vec::new();
    let mut bad_ratios = 0;
    let mut lin_its = 0;
    let mut converged = false;
    for it in 0..opts.max_fp_iter {
        let r = remainder_r(z, &w, ctx)?;
        let mut rhs: Vec<f64> = g0.values().iter().zip(r.values()).map(|(p, q)| -(p + q)).collect();
        ctx.q_project(frame, &mut rhs);
        let out = minres(&a, &m, &rhs, Some(w.values()), opts.lin_tol, opts.lin_max_iter)?;
        lin_its += out.iterations;
        let mut next = out.x;
        ctx.q_project(frame, &mut next);
        let next = Field2D::new(g, next)?;
        let upd = ctx.eps_norm(&next.sub(&w));
        w = next;
        trace.push(upd);
        if let [.., prev, last] = trace[..] {
            if last >= prev && last > opts.fp_tol {
                bad_ratios += 1;
                if bad_ratios >= 3 {
                    return Err(Error::ContractionFailure { iteration: it, ratio: last / prev, trace });
                }
            } else {
                bad_ratios = 0;
            }
        }
        if upd < opts.fp_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "correction fixed point".into(),
            iterations: opts.max_fp_iter,
            residual: trace.last().copied().unwrap_or(f64::NAN),
            trace,
        });
    }
    let u = z.add(&w);
    let grad = grad_i_eps(&u, ctx)?;
    let area = g.cell_area();
    let alpha: Vec<f64> = frame.tangent.iter().map(|t| area * dot(grad.values(), t.values())).collect();
    // non-tangential part: grad − Σ α_i A_ε t_i
    let mut h = grad.values().to_vec();
    for (t, al) in frame.tangent.iter().zip(&alpha) {
        let at = ctx.riesz_raw(t.values());
        for (x, y) in h.iter_mut().zip(&at) {
            *x -= al * y;
        }
    }
    let projected_residual = (area * dot(&h, &h)).sqrt();
    let theta = ctx.energy(&u)?;
    Ok(CorrectionResult {
        w_norm: ctx.eps_norm(&w),
        w,
        xi: frame.xi,
        eps: ctx.eps,
        iterations: trace.len(),
        contraction_trace: trace,
        residual_tangential: [alpha[0], alpha[1]],
        projected_residual,
        theta,
        linear_iterations: lin_its,
    })
}

#[derive(Clone, Debug)]
pub struct ReducedEntry {
    pub xi: [f64; 2],
    pub theta: f64,
    pub gamma: f64,
    pub w_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct ReducedFunctionalTable {
    pub eps: f64,
    /// Nodes per axis.
    pub n: usize,
    pub xi_max: f64,
    /// Row-major with `ξ₁` varying fastest.
    pub entries: Vec<ReducedEntry>,
    pub b0: f64,
    pub extremum: Extremum,
    pub argmin_xi: Option<[f64; 2]>,
}

impl ReducedFunctionalTable {
    pub fn entry(&self, i: usize, j: usize) -> &ReducedEntry {
        &self.entries[j * self.n + i]
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(|e| e.converged)
    }
}

/// Grid coordinate `k` of an `n`-point axis over `[−xi_max, xi_max]`.
pub fn xi_axis(n: usize, xi_max: f64, k: usize) -> f64 {
    if n == 1 {
        0.0
    } else {
        -xi_max + 2.0 * xi_max * k as f64 / (n - 1) as f64
    }
}

/// Tabulate `Θ_ε` and `Γ` on an `n × n` grid over `[−xi_max, xi_max]²`.
/// Failed corrections are kept with `converged = false`; the minimizer is
/// located when the table is complete.
pub fn reduced_theta(ctx: &ReductionContext<'_>, n: usize, xi_max: f64) -> Result<ReducedFunctionalTable> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("xi grid needs an odd count >= 3, got {n}")));
    }
    let extremum = ctx.potential.extremum()?;
    let mut entries = Vec::with_capacity(n * n);
    let mut prev: Option<Field2D> = None;
    for j in 0..n {
        for i0 in 0..n {
            // serpentine order keeps consecutive points adjacent
            let i = if j % 2 == 0 { i0 } else { n - 1 - i0 };
            let xi = [xi_axis(n, xi_max, i), xi_axis(n, xi_max, j)];
            let frame = ctx.frame(xi)?;
            let gamma = ctx.gamma(&frame.z);
            let entry = match solve_correction_in(ctx, &frame, prev.as_ref()) {
                Ok(c) => {
                    prev = Some(c.w.clone());
                    ReducedEntry {
                        xi,
                        theta: c.theta,
                        gamma,
                        w_norm: c.w_norm,
                        iterations: c.iterations,
                        converged: true,
                    }
                }
                Err(e) => {
                    log::warn!("correction failed at xi = {xi:?}: {e}");
                    prev = None;
                    ReducedEntry { xi, theta: f64::NAN, gamma, w_norm: f64::NAN, iterations: 0, converged: false }
                }
            };
            entries.push((j * n + i, entry));
        }
    }
    entries.sort_by_key(|(k, _)| *k);
    let mut table = ReducedFunctionalTable {
        eps: ctx.eps,
        n,
        xi_max,
        entries: entries.into_iter().map(|(_, e)| e).collect(),
        b0: ctx.gs.b0,
        extremum,
        argmin_xi: None,
    };
    if table.is_complete() {
        match locate_minimizer(&table) {
            Ok(xi) => table.argmin_xi = Some(xi),
            Err(e) => log::warn!("eps = {}: {e}", ctx.eps),
        }
    }
    Ok(table)
}

/// Sub-grid extremum of `Θ_ε` from a least-squares quadratic on the 3×3
/// stencil around the best grid node (minimum or maximum per the table's
/// extremum kind).
pub fn locate_minimizer(table: &ReducedFunctionalTable) -> Result<[f64; 2]> {
    let n = table.n;
    let sign = match table.extremum {
        Extremum::Min => 1.0,
        Extremum::Max => -1.0,
    };
    let val = |i: usize, j: usize| sign * table.entry(i, j).theta;
    let mut best = (0, 0);
    for j in 0..n {
        for i in 0..n {
            let v = val(i, j);
            if !v.is_finite() {
                return Err(Error::IncompleteSweep(vec![table.eps]));
            }
            if v < val(best.0, best.1) {
                best = (i, j);
            }
        }
    }
    let (bi, bj) = best;
    if bi == 0 || bj == 0 || bi == n - 1 || bj == n - 1 {
        return Err(Error::BoundaryMinimum(bi, bj));
    }
    // f(a, b) = c0 + c1 a + c2 b + c3 a² + c4 ab + c5 b², a, b ∈ {−1, 0, 1}
    let mut m = nalgebra::DMatrix::zeros(9, 6);
    let mut rhs = nalgebra::DVector::zeros(9);
    let mut k = 0;
    for db in -1i64..=1 {
        for da in -1i64..=1 {
            let (a, b) = (da as f64, db as f64);
            let row = [1.0, a, b, a * a, a * b, b * b];
            for (c, v) in row.iter().enumerate() {
                m[(k, c)] = *v;
            }
            rhs[k] = val((bi as i64 + da) as usize, (bj as i64 + db) as usize) - val(bi, bj);
            k += 1;
        }
    }
    let coef = m.svd(true, true).solve(&rhs, 1e-14).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let (c1, c2, c3, c4, c5) = (coef[1], coef[2], coef[3], coef[4], coef[5]);
    let det = 4.0 * c3 * c5 - c4 * c4;
    let step = if n > 1 { 2.0 * table.xi_max / (n - 1) as f64 } else { 0.0 };
    let node = table.entry(bi, bj).xi;
    if !(det > 0.0 && c3 > 0.0) {
        log::warn!("quadratic fit around the grid optimum is not convex; returning the grid node");
        return Ok(node);
    }
    let a = (-2.0 * c5 * c1 + c4 * c2) / det;
    let b = (c4 * c1 - 2.0 * c3 * c2) / det;
    let (a, b) = (a.clamp(-1.0, 1.0), b.clamp(-1.0, 1.0));
    Ok([node[0] + a * step, node[1] + b * step])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_smooth_field;
    use crate::groundstate::{default_radial_grid, solve_ground_state, LimitingProblem};
    use crate::logkernel::build_kernel_spectrum;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    struct Setup {
        gs: GroundStateRecord,
        kernel: TruncatedKernelSpectrum,
    }

    fn setup() -> &'static Setup {
        static S: OnceLock<Setup> = OnceLock::new();
        S.get_or_init(|| {
            let gs =
                solve_ground_state(&LimitingProblem::default(), &default_radial_grid(), &Default::default()).unwrap();
            let kernel = build_kernel_spectrum(&Grid2D::square(96, 16.0).unwrap()).unwrap();
            Setup { gs, kernel }
        })
    }

    fn aniso() -> PotentialSpec {
        PotentialSpec::quadratic_min(1.0, 0.0, 4.0).unwrap()
    }

    #[test]
    fn constant_potential_gives_zero_correction() {
        let s = setup();
        let ctx =
            ReductionContext::new(&s.gs, &PotentialSpec::constant(1.0).unwrap(), 0.1, &s.kernel, Default::default())
                .unwrap();
        let c = solve_correction(&ctx, [0.3, -0.2]).unwrap();
        assert!(c.w_norm < 1e-6, "{}", c.w_norm);
        let g = grad_i_eps(&ctx.translate([0.0, 0.0]).unwrap(), &ctx).unwrap();
        let f = Functional::limiting(&LimitingProblem::default(), &s.kernel);
        let u = ctx.translate([0.0, 0.0]).unwrap();
        assert!(g.sub(&f.gradient(&u).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn remainder_identity_and_order() {
        let s = setup();
        let ctx = ReductionContext::new(&s.gs, &aniso(), 0.1, &s.kernel, Default::default()).unwrap();
        let z = ctx.translate([0.1, 0.2]).unwrap();
        assert_eq!(remainder_r(&z, &Field2D::zeros(*z.grid()), &ctx).unwrap().max_abs(), 0.0);
        let lin = LinearizedOperator::new(ctx.functional(), z.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dir = random_smooth_field(z.grid(), &mut rng, 1.5, 2);
        let dir = dir.scaled(1.0 / ctx.eps_norm(&dir));
        let mut pts = Vec::new();
        for s in [1e-1, 1e-2, 1e-3] {
            let w = dir.scaled(s);
            let closed = remainder_r(&z, &w, &ctx).unwrap();
            let defining =
                grad_i_eps(&z.add(&w), &ctx).unwrap().sub(&grad_i_eps(&z, &ctx).unwrap()).sub(&lin.apply(&w).unwrap());
            assert!(closed.sub(&defining).max_abs() < 1e-9, "{}", closed.sub(&defining).max_abs());
            pts.push((s.ln(), closed.norm_l2().ln()));
        }
        let slope = (pts[0].1 - pts[2].1) / (pts[0].0 - pts[2].0);
        assert!(slope >= 1.95, "{slope}");
    }

    #[test]
    fn projection_properties() {
        let s = setup();
        let ctx = ReductionContext::new(&s.gs, &aniso(), 0.1, &s.kernel, Default::default()).unwrap();
        let frame = ctx.frame([0.2, -0.1]).unwrap();
        for t in &frame.tangent {
            assert!(ctx.eps_norm(&project_orthogonal(t, &frame, &ctx, false)) < 1e-10);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = random_smooth_field(ctx.grid(), &mut rng, 2.0, 2);
        for include_z in [false, true] {
            let p1 = project_orthogonal(&f, &frame, &ctx, include_z);
            let p2 = project_orthogonal(&p1, &frame, &ctx, include_z);
            assert!(ctx.eps_norm(&p1.sub(&p2)) < 1e-12 * ctx.eps_norm(&f));
        }
    }

    #[test]
    fn correction_solves_projected_equation() {
        let s = setup();
        let ctx = ReductionContext::new(&s.gs, &aniso(), 0.2, &s.kernel, Default::default()).unwrap();
        let frame = ctx.frame([0.3, 0.1]).unwrap();
        let c = solve_correction_in(&ctx, &frame, None).unwrap();
        assert!(c.projected_residual < 1e-9, "{}", c.projected_residual);
        for t in &frame.tangent {
            assert!(ctx.eps_product(&c.w, t).abs() < 1e-10);
        }
        // the tangential part is what is left of the full gradient
        let full = grad_i_eps(&frame.z.add(&c.w), &ctx).unwrap().norm_l2();
        assert!(full > 100.0 * c.projected_residual);
        let ratios: Vec<f64> = c.contraction_trace.windows(2).map(|w| w[1] / w[0]).collect();
        assert!(ratios.iter().skip(1).all(|r| *r < 0.9), "{:?}", c.contraction_trace);
    }

    #[test]
    fn gamma_shift_identity() {
        let s = setup();
        let ctx = ReductionContext::new(&s.gs, &aniso(), 0.1, &s.kernel, Default::default()).unwrap();
        let g0 = ctx.gamma(&ctx.translate([0.0, 0.0]).unwrap());
        for xi in [[0.5, 0.0], [0.0, -0.5], [0.3, 0.4], [-0.25, 0.1], [0.7, -0.7]] {
            let g = ctx.gamma(&ctx.translate(xi).unwrap());
            let want = aniso().q2(xi) * s.gs.mass2;
            assert!((g - g0 - want).abs() < 1e-8 * want.max(1.0), "{xi:?}: {} vs {want}", g - g0);
        }
    }

    #[test]
    fn symmetric_well_is_minimized_at_origin() {
        let s = setup();
        let ctx = ReductionContext::new(
            &s.gs,
            &PotentialSpec::quadratic_min(1.0, 0.0, 1.0).unwrap(),
            0.2,
            &s.kernel,
            Default::default(),
        )
        .unwrap();
        let t = reduced_theta(&ctx, 3, 0.4).unwrap();
        let xi = t.argmin_xi.unwrap();
        assert!(xi[0].hypot(xi[1]) < 0.4, "{xi:?}");
        // the table is a pure function of ξ
        let again = solve_correction(&ctx, t.entry(2, 1).xi).unwrap();
        assert!((again.theta - t.entry(2, 1).theta).abs() < 1e-9);
    }

    #[test]
    fn locate_handles_maximum_and_boundary() {
        let mk = |f: &dyn Fn(f64, f64) -> f64, extremum| {
            let n = 5;
            let entries = (0..n * n)
                .map(|k| {
                    let xi = [xi_axis(n, 1.0, k % n), xi_axis(n, 1.0, k / n)];
                    ReducedEntry { xi, theta: f(xi[0], xi[1]), gamma: 0.0, w_norm: 0.0, iterations: 1, converged: true }
                })
                .collect();
            ReducedFunctionalTable { eps: 0.1, n, xi_max: 1.0, entries, b0: 0.0, extremum, argmin_xi: None }
        };
        let bowl = |x: f64, y: f64| (x - 0.1).powi(2) + 2.0 * (y + 0.2).powi(2) + 0.5 * x * y;
        let p = locate_minimizer(&mk(&bowl, Extremum::Min)).unwrap();
        // exact stationary point of the quadratic
        let det = 2.0 * 4.0 - 0.25;
        let want = [(0.2 * 4.0 - 0.5 * (-0.8)) / det, (2.0 * (-0.8) - 0.5 * 0.2) / det];
        assert!((p[0] - want[0]).abs() < 1e-12 && (p[1] - want[1]).abs() < 1e-12, "{p:?} vs {want:?}");
        let cap = |x: f64, y: f64| -bowl(x, y);
        let q = locate_minimizer(&mk(&cap, Extremum::Max)).unwrap();
        assert!((q[0] - p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12);
        let slope = |x: f64, _y: f64| x;
        assert!(matches!(locate_minimizer(&mk(&slope, Extremum::Min)), Err(Error::BoundaryMinimum(0, _))));
    }

    #[test]
    fn translation_modes_lift_like_eps_squared() {
        let s = setup();
        let mut lam = Vec::new();
        for eps in [0.1, 0.05, 0.025] {
            let ctx = ReductionContext::new(&s.gs, &aniso(), eps, &s.kernel, Default::default()).unwrap();
            let z = ctx.translate([0.0, 0.0]).unwrap();
            let l = LinearizedOperator::new(ctx.functional(), z.clone()).unwrap();
            let rep = crate::linops::lowest_eigenpairs(&l, 4, 1e-8).unwrap();
            assert!(rep.eigenvalues[0] < -1.0);
            // first-order oracle: ⟨(V_ε − 1) ∂_i z, ∂_i z⟩ / ‖∂_i z‖²
            let ZeroOrder::Sampled(v) = ctx.functional().zero_order() else { panic!("sampled potential expected") };
            let (gx, gy) = l.base_gradient();
            let q = |d: &Field2D| {
                let num: f64 = d.values().iter().zip(v).map(|(a, p)| (p - 1.0) * a * a).sum();
                num / d.dot(d) * d.grid().cell_area()
            };
            let mut want = [q(&gx), q(&gy)];
            want.sort_by(f64::total_cmp);
            for (got, want) in rep.eigenvalues[1..3].iter().zip(want) {
                assert!((got / want - 1.0).abs() < 0.05, "{eps}: {got} vs {want}");
            }
            lam.push(rep.eigenvalues[1]);
        }
        let slope = (lam[0] / lam[2]).ln() / 4f64.ln();
        assert!((slope - 2.0).abs() < 0.02, "{slope} {lam:?}");
    }

    #[test]
    fn linearization_is_negative_along_z_and_positive_off_the_frame() {
        let s = setup();
        let ctx = ReductionContext::new(&s.gs, &aniso(), 0.1, &s.kernel, Default::default()).unwrap();
        let frame = ctx.frame([0.2, -0.1]).unwrap();
        let l = LinearizedOperator::new(ctx.functional(), frame.z.clone()).unwrap();
        let pz = project_orthogonal(&frame.z, &frame, &ctx, false);
        assert!(l.form(&pz, &pz).unwrap() < -0.5 * ctx.eps_norm(&pz).powi(2));
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let f = random_smooth_field(ctx.grid(), &mut rng, 2.0, 2);
            let p = project_orthogonal(&f, &frame, &ctx, true);
            let q = l.form(&p, &p).unwrap() / ctx.eps_norm(&p).powi(2);
            assert!(q > 0.0, "{q}");
        }
    }

    #[test]
    fn natural_constraint_vanishes_at_the_critical_point() {
        let s = setup();
        let ctx = ReductionContext::new(&s.gs, &aniso(), 0.2, &s.kernel, Default::default()).unwrap();
        let at = solve_correction(&ctx, [0.0, 0.0]).unwrap();
        let a0 = at.residual_tangential[0].hypot(at.residual_tangential[1]);
        for xi in [[0.3, 0.0], [0.0, 0.3]] {
            let c = solve_correction(&ctx, xi).unwrap();
            let a = c.residual_tangential[0].hypot(c.residual_tangential[1]);
            assert!(a0 < 1e-6 * a, "{a0} vs {a}");
            assert!(c.projected_residual < 1e-9);
        }
        assert!(at.projected_residual < 1e-9);
    }
}
