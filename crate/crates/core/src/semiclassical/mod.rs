//! External potentials, the ε-sweep that locates concentrating solutions,
//! and the physical pair `(v_ε, E_ε)`.
//!
//! With `v_ε(x) = u_ε((x − x₀)/ε)` the physical potential is
//!
//! ```text
//! E_ε(x) = ε⁻² (1/2π) ∫ log(ε/|x − z|) v_ε(z)² dz = ε⁻² Φ[v_ε²](x) + c_ε,
//! c_ε = log ε ‖v_ε‖² / (2π ε²),
//! ```
//!
//! and `E_ε(x) = Φ[u_ε²]((x − x₀)/ε)` in rescaled variables.

mod potential;

pub use potential::{eval_potential, Extremum, PotentialKind, PotentialSpec, PotentialValue, DEFAULT_FLAT_RADIUS};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::radial::Exterior;
use crate::field::{integrate, Field2D, Grid2D, Parity, RadialGrid};
use crate::groundstate::{solve_ground_state, GroundStateOptions, GroundStateRecord, LimitingProblem};
use crate::logkernel::{build_kernel_spectrum, TruncatedKernelSpectrum};
use crate::reduction::{
    grad_i_eps, locate_minimizer, reduced_theta, solve_correction, CorrectionResult, ReducedFunctionalTable,
    ReductionContext, ReductionOptions,
};

#[derive(Clone, Debug)]
pub struct ConcentrationOptions {
    /// Nodes per axis of the rescaled grid.
    pub grid_n: usize,
    /// Side of the rescaled box.
    pub box_len: f64,
    pub xi_grid: usize,
    pub xi_max: f64,
    pub radial_n: usize,
    pub radial_rmax: f64,
    pub reduction: ReductionOptions,
    pub ground_state: GroundStateOptions,
}

impl Default for ConcentrationOptions {
    fn default() -> Self {
        ConcentrationOptions {
            grid_n: 160,
            box_len: 16.0,
            xi_grid: 9,
            xi_max: 0.5,
            radial_n: 2000,
            radial_rmax: 20.0,
            reduction: ReductionOptions::default(),
            ground_state: GroundStateOptions::default(),
        }
    }
}

impl ConcentrationOptions {
    pub fn rescaled_grid(&self) -> Result<Grid2D> {
        Grid2D::square(self.grid_n, self.box_len)
    }
}

/// Second-moment width `(∫|x − x̄|² f² / ∫f²)^{1/2}` of a field.
pub fn second_moment_width(f: &Field2D) -> f64 {
    let g = f.grid();
    let (mut m, mut mx, mut my) = (0.0, 0.0, 0.0);
    for (i, v) in f.values().iter().enumerate() {
        let (x, y) = g.coords(i);
        let d = v * v;
        m += d;
        mx += d * x;
        my += d * y;
    }
    let (cx, cy) = (mx / m, my / m);
    let s: f64 = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let (x, y) = g.coords(i);
            v * v * ((x - cx).powi(2) + (y - cy).powi(2))
        })
        .sum();
    (s / m).sqrt()
}

/// Second-moment width of the ground state from its radial profile.
pub fn ground_state_width(gs: &GroundStateRecord) -> Result<f64> {
    // the integrand r³u² is odd in r
    let m2 = gs.profile.map_with(Parity::Odd, Exterior::Zero, |r, u| r * r * r * u * u)?;
    Ok((2.0 * PI * m2.integral() / gs.mass2).sqrt())
}

#[derive(Clone, Debug)]
pub struct SolutionPair {
    pub eps: f64,
    pub v_eps: Field2D,
    pub e_eps: Field2D,
    /// `ε⁻² Φ[v_ε²]` on the physical grid, from a kernel built there.
    pub scaled_phi: Field2D,
    pub c_eps: f64,
    pub xi_phys: [f64; 2],
    pub peak_width: f64,
    /// Node of `max v_ε`.
    pub peak: [f64; 2],
    /// `max |E_ε − ε⁻²Φ[v_ε²] − c_ε| / |c_ε|`.
    pub identity_deviation: f64,
}

/// Build `(v_ε, E_ε)` from the rescaled solution `u_eps` (grid centred at
/// the origin, representing `x₀`). `physical_kernel` must live on the grid
/// `x₀ + ε · grid(u_eps)`; `xi` is the located concentration offset.
pub fn assemble_solution_pair(
    u_eps: &Field2D,
    eps: f64,
    x0: [f64; 2],
    xi: [f64; 2],
    rescaled_kernel: &TruncatedKernelSpectrum,
    physical_kernel: &TruncatedKernelSpectrum,
) -> Result<SolutionPair> {
    let g = *u_eps.grid();
    rescaled_kernel.grid().check_same(&g)?;
    let pg = physical_grid(&g, eps, x0)?;
    physical_kernel.grid().check_same(&pg)?;
    let v_eps = u_eps.with_grid(pg)?;
    let peak_width = second_moment_width(&v_eps);
    let across = 2.0 * peak_width / pg.hx().max(pg.hy());
    if across < 12.0 {
        return Err(Error::Resolution(format!("only {across:.1} nodes across the peak; need 12")));
    }
    let e_eps = rescaled_kernel.convolve(&u_eps.mul(u_eps))?.with_grid(pg)?;
    let scaled_phi = physical_kernel.convolve(&v_eps.mul(&v_eps))?.scaled(1.0 / (eps * eps));
    let mass = integrate(&v_eps.mul(&v_eps));
    let c_eps = eps.ln() * mass / (2.0 * PI * eps * eps);
    let identity_deviation =
        e_eps.values().iter().zip(scaled_phi.values()).map(|(e, p)| (e - p - c_eps).abs()).fold(0.0, f64::max)
            / c_eps.abs();
    let peak = pg.coords(v_eps.argmax());
    Ok(SolutionPair {
        eps,
        v_eps,
        e_eps,
        scaled_phi,
        c_eps,
        xi_phys: [x0[0] + eps * xi[0], x0[1] + eps * xi[1]],
        peak_width,
        peak: [peak.0, peak.1],
        identity_deviation,
    })
}

/// `x₀ + ε · g`.
pub fn physical_grid(g: &Grid2D, eps: f64, x0: [f64; 2]) -> Result<Grid2D> {
    Grid2D::with_center(g.nx, g.ny, eps * g.lx, eps * g.ly, x0[0] + eps * g.x0, x0[1] + eps * g.y0)
}

#[derive(Clone, Debug)]
pub struct EpsilonRun {
    pub eps: f64,
    pub table: ReducedFunctionalTable,
    pub xi: [f64; 2],
    pub correction: CorrectionResult,
    /// `u_ε = z_{ξ(ε)} + w`.
    pub u: Field2D,
    /// `sup |I'_ε(u_ε)|`.
    pub residual: f64,
    pub pair: SolutionPair,
}

impl EpsilonRun {
    pub fn theta_min(&self) -> f64 {
        self.correction.theta
    }
}

#[derive(Clone, Debug)]
pub struct ConcentrationReport {
    pub potential: PotentialSpec,
    pub ground_state: GroundStateRecord,
    pub runs: Vec<EpsilonRun>,
    /// `ε` values whose run failed, with the error message.
    pub failures: Vec<(f64, String)>,
    /// Tables of failed runs that got that far.
    pub partial_tables: Vec<ReducedFunctionalTable>,
}

impl ConcentrationReport {
    pub fn check_complete(&self) -> Result<()> {
        if self.failures.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompleteSweep(self.failures.iter().map(|f| f.0).collect()))
        }
    }

    /// `|ξ(ε)|` along the sweep, in sweep order.
    pub fn xi_norms(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.xi[0].hypot(r.xi[1])).collect()
    }
}

/// Solve the limiting problem with `a = V(x₀)`.
pub fn ground_state_for(p: &PotentialSpec, opts: &ConcentrationOptions) -> Result<GroundStateRecord> {
    let rg = RadialGrid::uniform(opts.radial_n, opts.radial_rmax)?;
    solve_ground_state(&LimitingProblem::new(p.v0)?, &rg, &opts.ground_state)
}

/// One ε of the sweep, given the shared ground state and rescaled kernel.
pub fn run_single_eps(
    p: &PotentialSpec,
    eps: f64,
    gs: &GroundStateRecord,
    kernel: &TruncatedKernelSpectrum,
    opts: &ConcentrationOptions,
) -> std::result::Result<EpsilonRun, (Error, Option<ReducedFunctionalTable>)> {
    let ctx = ReductionContext::new(gs, p, eps, kernel, opts.reduction.clone()).map_err(|e| (e, None))?;
    let table = reduced_theta(&ctx, opts.xi_grid, opts.xi_max).map_err(|e| (e, None))?;
    let fail = |e: Error, t: &ReducedFunctionalTable| (e, Some(t.clone()));
    if !table.is_complete() {
        return Err(fail(Error::IncompleteSweep(vec![eps]), &table));
    }
    let xi = locate_minimizer(&table).map_err(|e| fail(e, &table))?;
    let correction = solve_correction(&ctx, xi).map_err(|e| fail(e, &table))?;
    let z = ctx.translate(xi).map_err(|e| fail(e, &table))?;
    let u = z.add(&correction.w);
    let residual = grad_i_eps(&u, &ctx).map_err(|e| fail(e, &table))?.max_abs();
    let pg = physical_grid(kernel.grid(), eps, p.x0).map_err(|e| fail(e, &table))?;
    let physical_kernel = build_kernel_spectrum(&pg).map_err(|e| fail(e, &table))?;
    let pair = assemble_solution_pair(&u, eps, p.x0, xi, kernel, &physical_kernel).map_err(|e| fail(e, &table))?;
    log::info!(
        "eps = {eps}: xi = ({:.6}, {:.6}), theta = {:.12}, |w| = {:.3e}, residual = {:.3e}",
        xi[0],
        xi[1],
        correction.theta,
        correction.w_norm,
        residual
    );
    Ok(EpsilonRun { eps, table, xi, correction, u, residual, pair })
}

/// The ε-sweep: reduced functional, located critical point and assembled
/// solution pair for each ε.
pub fn run_concentration(
    p: &PotentialSpec,
    eps_list: &[f64],
    opts: &ConcentrationOptions,
) -> Result<ConcentrationReport> {
    if eps_list.is_empty() {
        return Err(Error::InvalidArgument("empty eps list".into()));
    }
    p.extremum()?;
    let gs = ground_state_for(p, opts)?;
    let kernel = build_kernel_spectrum(&opts.rescaled_grid()?)?;
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut partial_tables = Vec::new();
    for &eps in eps_list {
        match run_single_eps(p, eps, &gs, &kernel, opts) {
            Ok(r) => runs.push(r),
            Err((e, table)) => {
                log::error!("eps = {eps}: {e}");
                failures.push((eps, e.to_string()));
                partial_tables.extend(table);
            }
        }
    }
    Ok(ConcentrationReport { potential: p.clone(), ground_state: gs, runs, failures, partial_tables })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundstate::default_radial_grid;
    use std::sync::OnceLock;

    fn gs() -> &'static GroundStateRecord {
        static GS: OnceLock<GroundStateRecord> = OnceLock::new();
        GS.get_or_init(|| {
            solve_ground_state(&LimitingProblem::default(), &default_radial_grid(), &Default::default()).unwrap()
        })
    }

    fn small_opts() -> ConcentrationOptions {
        ConcentrationOptions { grid_n: 128, box_len: 12.0, xi_grid: 3, xi_max: 0.3, ..Default::default() }
    }

    #[test]
    fn radial_width_matches_lifted_width() {
        let g = Grid2D::square(128, 16.0).unwrap();
        let u = gs().lift(&g, (0.0, 0.0)).unwrap().field;
        let w = ground_state_width(gs()).unwrap();
        assert!((second_moment_width(&u) - w).abs() < 1e-8 * w);
    }

    #[test]
    fn assembled_pair_scales_with_eps() {
        let g = Grid2D::square(128, 12.0).unwrap();
        let k = build_kernel_spectrum(&g).unwrap();
        let u = gs().lift(&g, (0.0, 0.0)).unwrap().field;
        let w = ground_state_width(gs()).unwrap();
        let (eps, x0) = (0.1, [0.3, -0.2]);
        let pg = physical_grid(&g, eps, x0).unwrap();
        let pk = build_kernel_spectrum(&pg).unwrap();
        let pair = assemble_solution_pair(&u, eps, x0, [0.0, 0.0], &k, &pk).unwrap();
        let m = integrate(&pair.v_eps.mul(&pair.v_eps));
        assert!((m - eps * eps * integrate(&u.mul(&u))).abs() < 1e-12 * m);
        assert!((pair.peak_width / (eps * w) - 1.0).abs() < 1e-6);
        assert!(pair.identity_deviation < 1e-8, "{}", pair.identity_deviation);
        assert!((pair.peak[0] - x0[0]).abs() <= pg.hx() && (pair.peak[1] - x0[1]).abs() <= pg.hy());
        assert!((pair.c_eps - eps.ln() * m / (2.0 * PI * eps * eps)).abs() < 1e-12 * pair.c_eps.abs());
    }

    #[test]
    fn coarse_grid_trips_resolution_guard() {
        let g = Grid2D::square(48, 16.0).unwrap();
        let k = build_kernel_spectrum(&g).unwrap();
        let u = gs().lift(&g, (0.0, 0.0)).unwrap().field;
        let pk = build_kernel_spectrum(&physical_grid(&g, 0.1, [0.0, 0.0]).unwrap()).unwrap();
        assert!(matches!(assemble_solution_pair(&u, 0.1, [0.0, 0.0], [0.0, 0.0], &k, &pk), Err(Error::Resolution(_))));
    }

    #[test]
    fn isotropic_extrema_concentrate_at_the_critical_point() {
        let opts = small_opts();
        let kernel = build_kernel_spectrum(&opts.rescaled_grid().unwrap()).unwrap();
        for p in [
            PotentialSpec::quadratic_min(1.0, 0.0, 1.0).unwrap(),
            PotentialSpec::quadratic_max(-0.5, 0.0, -0.5).unwrap(),
        ] {
            let run = run_single_eps(&p, 0.1, gs(), &kernel, &opts).map_err(|e| e.0).unwrap();
            assert!(run.xi[0].hypot(run.xi[1]) < 1e-6, "{:?} {:?}", p.kind, run.xi);
            assert_eq!(run.table.extremum, p.extremum().unwrap());
        }
    }

    #[test]
    fn indefinite_or_empty_sweeps_are_rejected() {
        let opts = small_opts();
        let saddle =
            PotentialSpec::new(PotentialKind::CustomCoefficients, 1.0, [0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]], 0.5)
                .unwrap();
        assert!(run_concentration(&saddle, &[0.1], &opts).is_err());
        let p = PotentialSpec::quadratic_min(1.0, 0.0, 1.0).unwrap();
        assert!(matches!(run_concentration(&p, &[], &opts), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn located_value_undercuts_the_table() {
        let opts = small_opts();
        let kernel = build_kernel_spectrum(&opts.rescaled_grid().unwrap()).unwrap();
        let p = PotentialSpec::double_well(2.0, 1.0, 1.0).unwrap();
        let run = run_single_eps(&p, 0.2, gs(), &kernel, &opts).map_err(|e| e.0).unwrap();
        let best = run.table.entries.iter().map(|e| e.theta).fold(f64::INFINITY, f64::min);
        assert!(run.theta_min() <= best + 1e-9 * best.abs(), "{} vs {best}", run.theta_min());
        assert!(run.xi[0].abs() <= opts.xi_max && run.xi[1].abs() < 1e-8, "{:?}", run.xi);
    }
}
