//! Second derivatives of the energies, Krylov solvers and the spectral
//! analysis of the linearization at a critical point.
//!
//! All solvers work on raw node vectors with the plain Euclidean product,
//! which is the L² product up to the constant cell area.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{dot, random_smooth_field, Field2D, Grid2D, NormWeights, Symbols};
use crate::groundstate::{norm_weights_for, Functional, ZeroOrder};
use crate::logkernel::TruncatedKernelSpectrum;

/// `I''(u)` for a [`Functional`], as an operator on fields.
pub struct LinearizedOperator<'k> {
    base: Field2D,
    kernel: &'k TruncatedKernelSpectrum,
    zero: ZeroOrder,
    weights: NormWeights,
    mass_weight: Vec<f64>,
    cached_w: Field2D,
    symbols: Symbols,
    shift: f64,
}

impl<'k> LinearizedOperator<'k> {
    pub fn new(f: &Functional<'k>, base: Field2D) -> Result<Self> {
        f.grid().check_same(base.grid())?;
        let cached_w = f.potential_of(&base)?;
        let weights = norm_weights_for(f);
        let mass_weight = weights.mass_weight(f.grid())?;
        let shift = match f.zero_order() {
            ZeroOrder::Constant(a) => *a,
            ZeroOrder::Sampled(v) => v.iter().sum::<f64>() / v.len() as f64,
        };
        Ok(LinearizedOperator {
            base,
            kernel: f.kernel(),
            zero: f.zero_order().clone(),
            weights,
            mass_weight,
            cached_w,
            symbols: f.symbols().clone(),
            shift,
        })
    }

    pub fn base_state(&self) -> &Field2D {
        &self.base
    }

    pub fn grid(&self) -> &Grid2D {
        self.base.grid()
    }

    pub fn kernel(&self) -> &'k TruncatedKernelSpectrum {
        self.kernel
    }

    /// `Φ[u²]` at the base state.
    pub fn cached_w(&self) -> &Field2D {
        &self.cached_w
    }

    pub fn weights(&self) -> &NormWeights {
        &self.weights
    }

    fn p_at(&self, i: usize) -> f64 {
        match &self.zero {
            ZeroOrder::Constant(a) => *a,
            ZeroOrder::Sampled(v) => v[i],
        }
    }

    pub(crate) fn apply_raw(&self, phi: &[f64]) -> Vec<f64> {
        let g = *self.grid();
        let u = self.base.values();
        let uphi = Field2D::from_raw(g, u.iter().zip(phi).map(|(a, b)| a * b).collect());
        let conv = self.kernel.convolve(&uphi).expect("grid checked at construction");
        let mut out = self.symbols.neg_laplacian(phi);
        let w = self.cached_w.values();
        for (i, o) in out.iter_mut().enumerate() {
            *o += (self.p_at(i) - w[i]) * phi[i] - 2.0 * u[i] * conv.values()[i];
        }
        out
    }

    /// `−Δφ + Pφ − Φ[u²]φ − 2u Φ[uφ]`.
    pub fn apply(&self, phi: &Field2D) -> Result<Field2D> {
        self.grid().check_same(phi.grid())?;
        Ok(Field2D::from_raw(*self.grid(), self.apply_raw(phi.values())))
    }

    /// `I''(u)[φ, ψ]`.
    pub fn form(&self, phi: &Field2D, psi: &Field2D) -> Result<f64> {
        Ok(self.apply(phi)?.dot(psi))
    }

    /// `(−Δ + c)⁻¹ r` with `c` the mean of `P`; exact when `P` is constant.
    pub(crate) fn precondition_raw(&self, r: &[f64]) -> Vec<f64> {
        self.symbols.solve_shifted(r, self.shift)
    }

    /// Riesz map of the `X` product: `(−Δ + P + log(1+|x|)) φ`.
    pub(crate) fn x_operator_raw(&self, phi: &[f64]) -> Vec<f64> {
        let mut out = self.symbols.neg_laplacian(phi);
        for ((o, m), p) in out.iter_mut().zip(&self.mass_weight).zip(phi) {
            *o += m * p;
        }
        out
    }

    /// `⟨φ, ψ⟩_X` with this operator's weights.
    pub fn x_product(&self, phi: &Field2D, psi: &Field2D) -> f64 {
        self.grid().cell_area() * dot(&self.x_operator_raw(phi.values()), psi.values())
    }

    /// `(∂₁u, ∂₂u)`.
    pub fn base_gradient(&self) -> (Field2D, Field2D) {
        let (gx, gy) = self.symbols.gradient(self.base.values());
        (Field2D::from_raw(*self.grid(), gx), Field2D::from_raw(*self.grid(), gy))
    }
}

/// L² representative of `I''(u)[φ, ·]`.
pub fn apply_second_derivative(l: &LinearizedOperator<'_>, phi: &Field2D) -> Result<Field2D> {
    l.apply(phi)
}

/// Outcome of an iterative linear solve.
#[derive(Clone, Debug)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual `‖b − Ax‖ / ‖b‖`, recomputed at exit.
    pub relative_residual: f64,
}

/// Preconditioned MINRES for symmetric `A` with symmetric positive definite
/// preconditioner `M ≈ A⁻¹`. Stops when the residual estimate in the `M`
/// norm drops below `tol · ‖b‖_M`, so a good starting guess can stop at once.
pub fn minres(
    a: &dyn Fn(&[f64]) -> Vec<f64>,
    m: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<KrylovOutcome> {
    let n = b.len();
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    let mut r1: Vec<f64> = if x0.is_some() {
        let ax = a(&x);
        b.iter().zip(&ax).map(|(p, q)| p - q).collect()
    } else {
        b.to_vec()
    };
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(KrylovOutcome { x: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
    }
    let mut y = m(&r1);
    let beta1 = dot(&r1, &y);
    if beta1 < 0.0 {
        return Err(Error::LinearSolveFailure("preconditioner is not positive definite".into()));
    }
    let beta1 = beta1.sqrt();
    let target = if x0.is_some() { tol * dot(b, &m(b)).max(0.0).sqrt() } else { tol * beta1 };
    let outcome = |x: Vec<f64>, it: usize| {
        let ax = a(&x);
        let r: f64 = b.iter().zip(&ax).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        KrylovOutcome { x, iterations: it, relative_residual: r / bnorm }
    };
    if beta1 <= target {
        return Ok(outcome(x, 0));
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|t| s * t).collect();
        y = a(&v);
        if itn >= 2 {
            let c = beta / oldb;
            for (yi, ri) in y.iter_mut().zip(&r1) {
                *yi -= c * ri;
            }
        }
        let alfa = dot(&v, &y);
        let c = alfa / beta;
        for (yi, ri) in y.iter_mut().zip(&r2) {
            *yi -= c * ri;
        }
        r1 = std::mem::replace(&mut r2, y);
        y = m(&r2);
        oldb = beta;
        let bb = dot(&r2, &y);
        if bb < 0.0 {
            return Err(Error::LinearSolveFailure("preconditioner is not positive definite".into()));
        }
        beta = bb.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = v.iter().zip(&w1).zip(&w2).map(|((vi, a1), a2)| (vi - oldeps * a1 - delta * a2) / gamma).collect();
        for (xi, wi) in x.iter_mut().zip(&w) {
            *xi += phi * wi;
        }
        if phibar <= target || beta == 0.0 {
            return Ok(outcome(x, itn));
        }
    }
    let out = outcome(x, max_iter);
    Err(Error::LinearSolveFailure(format!(
        "MINRES stalled after {max_iter} iterations at relative residual {:e}",
        out.relative_residual
    )))
}

/// Symmetric eigenproblem `A x = λ B x` restricted to the `B`-orthogonal
/// complement of `constraints`.
pub struct EigenProblem<'a> {
    pub a: &'a dyn Fn(&[f64]) -> Vec<f64>,
    /// `None` is the identity.
    pub b: Option<&'a dyn Fn(&[f64]) -> Vec<f64>>,
    /// Symmetric positive definite preconditioner.
    pub t: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub constraints: &'a [Vec<f64>],
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// `B`-orthonormal eigenvectors.
    pub vectors: Vec<Vec<f64>>,
    /// `‖Ax − λBx‖ / ‖Bx‖`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn combine(basis: &[Vec<f64>], coef: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (k, v) in basis.iter().enumerate() {
        let c = coef(k);
        if c != 0.0 {
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
    }
    out
}

fn gram(s: &[Vec<f64>], t: &[Vec<f64>]) -> DMatrix<f64> {
    let n = s.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (dot(&s[i], &t[j]) + dot(&s[j], &t[i]));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Coefficients `C` with `(SC)ᵀ B (SC) = I`, dropping numerically dependent
/// directions.
fn svqb(s: &[Vec<f64>], bs: &[Vec<f64>]) -> DMatrix<f64> {
    let g = gram(s, bs);
    let n = s.len();
    let d: Vec<f64> = (0..n).map(|i| if g[(i, i)] > 0.0 { 1.0 / g[(i, i)].sqrt() } else { 0.0 }).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| d[i] * g[(i, j)] * d[j]);
    let eig = SymmetricEigen::new(scaled);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 1e-12 * top).collect();
    DMatrix::from_fn(n, keep.len(), |i, c| {
        let k = keep[c];
        d[i] * eig.eigenvectors[(i, k)] / eig.eigenvalues[k].sqrt()
    })
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Locally optimal block preconditioned conjugate gradients for the
/// `x0.len()` smallest eigenpairs; iteration stops once the leading `want`
/// pairs have converged.
pub fn lobpcg(p: &EigenProblem<'_>, x0: Vec<Vec<f64>>, want: usize, tol: f64, max_iter: usize) -> Result<EigenResult> {
    let m = x0.len();
    if m == 0 || want == 0 || want > m {
        return Err(Error::InvalidArgument(format!("bad block: {m} vectors, {want} wanted")));
    }
    let apply_b = |v: &[f64]| match p.b {
        Some(b) => b(v),
        None => v.to_vec(),
    };
    // B-orthonormal constraint basis
    let (y, by) = if p.constraints.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let by0: Vec<Vec<f64>> = p.constraints.iter().map(|c| apply_b(c)).collect();
        let c = svqb(p.constraints, &by0);
        let cols = c.ncols();
        let y: Vec<Vec<f64>> = (0..cols).map(|j| combine(p.constraints, |k| c[(k, j)])).collect();
        let by: Vec<Vec<f64>> = (0..cols).map(|j| combine(&by0, |k| c[(k, j)])).collect();
        (y, by)
    };
    let project = |mut v: Vec<f64>| {
        for (yi, byi) in y.iter().zip(&by) {
            let c = dot(byi, &v);
            for (o, t) in v.iter_mut().zip(yi) {
                *o -= c * t;
            }
        }
        v
    };

    let x: Vec<Vec<f64>> = x0.into_iter().map(&project).collect();
    let bx: Vec<Vec<f64>> = x.iter().map(|v| apply_b(v)).collect();
    let c = svqb(&x, &bx);
    if c.ncols() < m {
        return Err(Error::DegenerateBasis(c.ncols() as f64));
    }
    let mut x: Vec<Vec<f64>> = (0..m).map(|j| combine(&x, |k| c[(k, j)])).collect();
    let mut ax: Vec<Vec<f64>> = x.iter().map(|v| (p.a)(v)).collect();
    let mut bx: Vec<Vec<f64>> = x.iter().map(|v| apply_b(v)).collect();
    let h = gram(&x, &ax);
    let eig = SymmetricEigen::new(h);
    let order = sorted_order(eig.eigenvalues.as_slice());
    let mut lambda: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let z = |i: usize, j: usize| eig.eigenvectors[(i, order[j])];
    x = (0..m).map(|j| combine(&x, |k| z(k, j))).collect();
    ax = (0..m).map(|j| combine(&ax, |k| z(k, j))).collect();
    bx = (0..m).map(|j| combine(&bx, |k| z(k, j))).collect();

    let mut pdir: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut residuals = vec![f64::INFINITY; m];
    for it in 0..max_iter {
        if it > 0 && it % 16 == 0 {
            ax = x.iter().map(|v| (p.a)(v)).collect();
            bx = x.iter().map(|v| apply_b(v)).collect();
        }
        let r: Vec<Vec<f64>> =
            (0..m).map(|j| ax[j].iter().zip(&bx[j]).map(|(a, b)| a - lambda[j] * b).collect()).collect();
        for j in 0..m {
            residuals[j] = norm(&r[j]) / norm(&bx[j]);
        }
        let active: Vec<usize> = (0..m).filter(|&j| residuals[j] >= tol).collect();
        if active.iter().all(|&j| j >= want) {
            return Ok(EigenResult { values: lambda, vectors: x, residuals, iterations: it });
        }
        let w: Vec<Vec<f64>> = active.iter().map(|&j| project((p.t)(&r[j]))).collect();
        let aw: Vec<Vec<f64>> = w.iter().map(|v| (p.a)(v)).collect();
        let bw: Vec<Vec<f64>> = w.iter().map(|v| apply_b(v)).collect();

        let mut s = x.clone();
        let mut as_ = ax.clone();
        let mut bs = bx.clone();
        s.extend(w);
        as_.extend(aw);
        bs.extend(bw);
        for (v, av, bv) in &pdir {
            s.push(v.clone());
            as_.push(av.clone());
            bs.push(bv.clone());
        }
        let c = svqb(&s, &bs);
        if c.ncols() < m {
            return Err(Error::DegenerateBasis(c.ncols() as f64));
        }
        let hs = gram(&s, &as_);
        let h = c.transpose() * hs * &c;
        let eig = SymmetricEigen::new(h);
        let order = sorted_order(eig.eigenvalues.as_slice());
        let coef = &c * &eig.eigenvectors;
        lambda = order[..m].iter().map(|&k| eig.eigenvalues[k]).collect();
        let col = |j: usize| order[j];
        let new_x: Vec<Vec<f64>> = (0..m).map(|j| combine(&s, |k| coef[(k, col(j))])).collect();
        let new_ax: Vec<Vec<f64>> = (0..m).map(|j| combine(&as_, |k| coef[(k, col(j))])).collect();
        let new_bx: Vec<Vec<f64>> = (0..m).map(|j| combine(&bs, |k| coef[(k, col(j))])).collect();
        pdir = active
            .iter()
            .map(|&j| {
                let f = |k: usize| if k < m { 0.0 } else { coef[(k, col(j))] };
                (combine(&s, f), combine(&as_, f), combine(&bs, f))
            })
            .collect();
        x = new_x;
        ax = new_ax;
        bx = new_bx;
        log::trace!(
            "lobpcg it {it}: λ = {lambda:?}, worst residual {:e}",
            residuals.iter().cloned().fold(0.0, f64::max)
        );
    }
    Err(Error::NonConvergence {
        what: "LOBPCG".into(),
        iterations: max_iter,
        residual: residuals[..want].iter().cloned().fold(0.0, f64::max),
        trace: residuals,
    })
}

fn sorted_order(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

#[derive(Clone, Debug)]
pub struct SpectrumOptions {
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Extra block vectors beyond `k`, which speed up convergence of the
    /// highest wanted pair.
    pub guard: usize,
    /// Overrides the default `max(1e-6, 10 · worst residual)`.
    pub kernel_tol: Option<f64>,
    pub seed: u64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { k: 8, tol: 1e-7, max_iter: 400, guard: 2, kernel_tol: None, seed: 11 }
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    /// Ascending eigenvalues of the L²-symmetric form.
    pub eigenvalues: Vec<f64>,
    /// L²-normalized eigenfields.
    pub eigenfields: Vec<Field2D>,
    pub residuals: Vec<f64>,
    pub kernel_tol: f64,
    pub morse_index: usize,
    pub kernel_dim_numerical: usize,
    /// Smallest cosine between a near-zero eigenfield and `span{∂₁u, ∂₂u}`.
    pub kernel_alignment: f64,
    /// `min I''(u)[v,v] / ‖v‖²_X` over `v ⊥_X span{u, ∂₁u, ∂₂u}`.
    pub delta_estimate: f64,
    pub iterations: usize,
}

/// Deterministic smooth starting vectors.
fn starting_block(l: &LinearizedOperator<'_>, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = *l.grid();
    let (hx, hy) = g.half_widths();
    let sigma = 0.25 * hx.min(hy);
    let mut out = Vec::with_capacity(count);
    if l.base.max_abs() > 0.0 {
        let (gx, gy) = l.base_gradient();
        out.push(l.base.values().to_vec());
        out.push(gx.into_values());
        out.push(gy.into_values());
    }
    while out.len() < count {
        let kmax = 1 + out.len() / 3;
        out.push(random_smooth_field(&g, &mut rng, sigma, kmax).into_values());
    }
    out.truncate(count);
    out
}

/// Cosine between `v` and the span of `basis` in the L² product.
pub fn subspace_cosine(v: &Field2D, basis: &[Field2D]) -> f64 {
    let raw: Vec<Vec<f64>> = basis.iter().map(|b| b.values().to_vec()).collect();
    let c = svqb(&raw, &raw);
    let onb: Vec<Vec<f64>> = (0..c.ncols()).map(|j| combine(&raw, |k| c[(k, j)])).collect();
    let vv = dot(v.values(), v.values());
    if vv == 0.0 {
        return 0.0;
    }
    let proj: f64 = onb.iter().map(|e| dot(e, v.values()).powi(2)).sum();
    (proj / vv).sqrt().min(1.0)
}

pub fn lowest_eigenpairs(l: &LinearizedOperator<'_>, k: usize, tol: f64) -> Result<SpectrumReport> {
    lowest_eigenpairs_with(l, &SpectrumOptions { k, tol, ..Default::default() })
}

pub fn lowest_eigenpairs_with(l: &LinearizedOperator<'_>, opts: &SpectrumOptions) -> Result<SpectrumReport> {
    if opts.k < 4 {
        return Err(Error::InvalidArgument(format!("need k >= 4, got {}", opts.k)));
    }
    let g = *l.grid();
    let a = |v: &[f64]| l.apply_raw(v);
    let t = |v: &[f64]| l.precondition_raw(v);
    let prob = EigenProblem { a: &a, b: None, t: &t, constraints: &[] };
    let block = starting_block(l, opts.k + opts.guard, opts.seed);
    let res = lobpcg(&prob, block, opts.k, opts.tol, opts.max_iter)?;
    let k = opts.k;
    let h = g.cell_area().sqrt();
    let eigenvalues = res.values[..k].to_vec();
    let residuals = res.residuals[..k].to_vec();
    let eigenfields: Vec<Field2D> =
        res.vectors[..k].iter().map(|v| Field2D::from_raw(g, v.iter().map(|x| x / h).collect())).collect();
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    let kernel_tol = opts.kernel_tol.unwrap_or((10.0 * worst).max(1e-6));
    let morse_index = eigenvalues.iter().filter(|&&v| v < -kernel_tol).count();
    let near: Vec<&Field2D> =
        eigenvalues.iter().zip(&eigenfields).filter(|(v, _)| v.abs() < kernel_tol).map(|(_, f)| f).collect();
    let (gx, gy) = l.base_gradient();
    let span = [gx, gy];
    let kernel_alignment = if near.is_empty() || l.base.max_abs() == 0.0 {
        0.0
    } else {
        near.iter().map(|f| subspace_cosine(f, &span)).fold(1.0, f64::min)
    };
    let kernel_dim_numerical = near.len();
    let delta_estimate = constrained_minimum(l, opts)?;
    Ok(SpectrumReport {
        eigenvalues,
        eigenfields,
        residuals,
        kernel_tol,
        morse_index,
        kernel_dim_numerical,
        kernel_alignment,
        delta_estimate,
        iterations: res.iterations,
    })
}

/// Exact minimum of the `X`-Rayleigh quotient on the `X`-orthogonal
/// complement of `span{u, ∂₁u, ∂₂u}` (the smallest eigenvalue of the pencil
/// `(I'', Riesz_X)` there).
fn constrained_minimum(l: &LinearizedOperator<'_>, opts: &SpectrumOptions) -> Result<f64> {
    let constraints: Vec<Vec<f64>> = if l.base.max_abs() > 0.0 {
        let (gx, gy) = l.base_gradient();
        vec![l.base.values().to_vec(), gx.into_values(), gy.into_values()]
    } else {
        Vec::new()
    };
    let a = |v: &[f64]| l.apply_raw(v);
    let b = |v: &[f64]| l.x_operator_raw(v);
    let t = |v: &[f64]| l.precondition_raw(v);
    let prob = EigenProblem { a: &a, b: Some(&b), t: &t, constraints: &constraints };
    let mut block = starting_block(l, 7, opts.seed ^ 0x5eed);
    block.drain(..block.len().min(3).min(constraints.len()));
    let res = lobpcg(&prob, block, 1, opts.tol, opts.max_iter)?;
    log::debug!("constrained X-pencil: {:?} after {} iterations", res.values, res.iterations);
    Ok(res.values[0])
}

#[derive(Clone, Debug)]
pub struct CoercivityEstimate {
    /// Smallest sampled `I''(u)[v,v]` over `X`-normalized admissible `v`.
    pub delta: f64,
    pub samples: usize,
}

/// Sample `I''(u)[v,v] / ‖v‖²_X` over random smooth `v` made `X`-orthogonal to
/// `constraints`.
pub fn coercivity_sample(
    l: &LinearizedOperator<'_>,
    constraints: &[Field2D],
    samples: usize,
    seed: u64,
) -> CoercivityEstimate {
    let g = *l.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // X-orthonormal constraint basis
    let mut basis: Vec<Field2D> = Vec::new();
    for c in constraints {
        let mut v = c.clone();
        for e in &basis {
            let p = l.x_product(&v, e);
            v.axpy(-p, e);
        }
        let n = l.x_product(&v, &v).sqrt();
        if n > 1e-12 {
            basis.push(v.scaled(1.0 / n));
        }
    }
    let (hx, hy) = g.half_widths();
    let mut delta = f64::INFINITY;
    for _ in 0..samples {
        let sigma = rng.random_range(0.1..0.35) * hx.min(hy);
        let kmax = rng.random_range(0..4usize);
        let mut v = random_smooth_field(&g, &mut rng, sigma, kmax);
        for e in &basis {
            let p = l.x_product(&v, e);
            v.axpy(-p, e);
        }
        let n2 = l.x_product(&v, &v);
        if n2 <= 0.0 {
            continue;
        }
        let q = g.cell_area() * dot(&l.apply_raw(v.values()), v.values()) / n2;
        delta = delta.min(q);
    }
    CoercivityEstimate { delta, samples }
}

/// `δ̂`: sampled coercivity constant on `span{u, ∂₁u, ∂₂u}^⊥_X` (200 samples).
pub fn coercivity_estimate(l: &LinearizedOperator<'_>) -> f64 {
    let (gx, gy) = l.base_gradient();
    coercivity_sample(l, &[l.base.clone(), gx, gy], 200, 2024).delta
}
