use std::path::{Path, PathBuf};

use clap::Args;
use logchoquard::logkernel::build_kernel_spectrum;
use logchoquard::reduction::{reduced_theta, ReducedFunctionalTable, ReductionContext};
use logchoquard::semiclassical::{ground_state_for, ConcentrationOptions, PotentialSpec};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{num, refuse_overwrite, sibling, Table};
use crate::params::Params;

/// Options shared by `reduce` and `concentrate`.
#[derive(Args, Debug, Clone)]
pub struct ReductionGridArgs {
    /// Potential config (key=value: kind, v0, x0, h11, h12, h22, flat_radius, separation)
    #[arg(long)]
    pub potential: Option<PathBuf>,
    /// Points per axis of the ξ grid, odd [default: 9]
    #[arg(long)]
    pub xi_grid: Option<usize>,
    /// Half-width of the ξ grid [default: 0.5]
    #[arg(long)]
    pub xi_max: Option<f64>,
    /// Rescaled-grid nodes along x [default: 96 for reduce, 160 for concentrate]
    #[arg(long)]
    pub nx: Option<usize>,
    /// Nodes along y; must equal nx
    #[arg(long)]
    pub ny: Option<usize>,
    /// Rescaled box side [default: 16]
    #[arg(long)]
    pub lx: Option<f64>,
    /// Radial nodes for the ground state [default: 2000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Outer radius for the ground state [default: 20]
    #[arg(long)]
    pub rmax: Option<f64>,
    /// Fixed-point tolerance of the correction [default: 1e-10]
    #[arg(long)]
    pub fp_tol: Option<f64>,
}

/// Resolve the shared options; returns the potential path too.
pub fn resolve_grid(
    args: &ReductionGridArgs,
    p: &mut Params,
    default_n: usize,
    sub: &str,
) -> CliResult<(PathBuf, ConcentrationOptions)> {
    let pot = p
        .path_opt("potential", args.potential.clone())?
        .ok_or_else(|| CliError::usage(format!("{sub} needs --potential <file>")))?;
    let mut o = ConcentrationOptions::default();
    o.xi_grid = p.get("xi_grid", args.xi_grid, 9usize)?;
    if o.xi_grid < 3 || o.xi_grid % 2 == 0 {
        return Err(CliError::usage(format!("--xi-grid must be odd and at least 3, got {}", o.xi_grid)));
    }
    o.xi_max = p.positive("xi_max", args.xi_max, 0.5)?;
    o.grid_n = p.get("nx", args.nx, default_n)?;
    let ny = p.get("ny", args.ny, o.grid_n)?;
    p.guard_cells(o.grid_n, ny)?;
    if ny != o.grid_n {
        return Err(CliError::usage("the rescaled grid must be square (--ny = --nx)"));
    }
    o.box_len = p.positive("lx", args.lx, 16.0)?;
    o.radial_n = p.get("n", args.n, 2000usize)?;
    p.guard_cells(o.radial_n, 1)?;
    o.radial_rmax = p.positive("rmax", args.rmax, 20.0)?;
    o.reduction.fp_tol = p.positive("fp_tol", args.fp_tol, 1e-10)?;
    Ok((pot, o))
}

pub fn load_potential(path: &Path, m: &mut RunManifest) -> CliResult<PotentialSpec> {
    m.input(path)?;
    PotentialSpec::load(path).map_err(|e| match e {
        logchoquard::Error::Io(_) => CliError::Io(format!("{}: {e}", path.display())),
        _ => CliError::usage(format!("{}: {e}", path.display())),
    })
}

pub fn write_theta(
    path: &Path,
    table: &ReducedFunctionalTable,
    provenance: &str,
    m: &mut RunManifest,
) -> CliResult<()> {
    let mut t =
        Table::create(path, provenance, &["eps", "xi1", "xi2", "theta", "gamma", "w_norm", "iters", "converged"])?;
    for e in &table.entries {
        t.row([
            num(table.eps),
            num(e.xi[0]),
            num(e.xi[1]),
            num(e.theta),
            num(e.gamma),
            num(e.w_norm),
            e.iterations.to_string(),
            e.converged.to_string(),
        ])?;
    }
    t.finish(m)
}

/// Tabulate the reduced functional Θ_ε on a ξ grid.
#[derive(Args, Debug)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub grid: ReductionGridArgs,
    /// Semiclassical parameter [default: 0.1]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Output table [default: theta.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &ReduceArgs, p: &mut Params, m: &mut RunManifest) -> CliResult<()> {
    let out = p.path("out", args.out.clone(), "theta.csv")?;
    m.place(sibling(&out, ".manifest.json"));
    let (pot_path, opts) = resolve_grid(&args.grid, p, 96, "reduce")?;
    let eps = p.positive("eps", args.eps, 0.1)?;
    p.finish()?;
    m.config = p.snapshot.clone();
    refuse_overwrite(&[&out], &[&pot_path])?;
    let pot = load_potential(&pot_path, m)?;
    pot.extremum()?;

    let gs = m.stage("ground state", || ground_state_for(&pot, &opts))?;
    let kernel = m.stage("kernel", || build_kernel_spectrum(&opts.rescaled_grid()?))?;
    let ctx = ReductionContext::new(&gs, &pot, eps, &kernel, opts.reduction.clone())?;
    let table = m.stage("theta table", || reduced_theta(&ctx, opts.xi_grid, opts.xi_max))?;
    write_theta(&out, &table, &crate::output::provenance("reduce", &m.config), m)?;

    let failed = table.entries.iter().filter(|e| !e.converged).count();
    m.check("all corrections converged", failed == 0, true, format!("{failed} of {} failed", table.entries.len()));
    m.result("b0", table.b0);
    match table.argmin_xi {
        Some(xi) => {
            m.result("critical_xi", vec![xi[0], xi[1]]);
            println!("critical point of Theta at xi = ({:.6}, {:.6})", xi[0], xi[1]);
        }
        None => m.check("critical point located inside the grid", false, false, "none".into()),
    }
    Ok(())
}
