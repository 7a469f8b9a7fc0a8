use std::path::PathBuf;

use clap::Args;
use logchoquard::field::io::FieldMeta;
use logchoquard::field::{Grid2D, RadialGrid};
use logchoquard::groundstate::{asymptotic_windows, grad_i, solve_ground_state, GroundStateOptions, LimitingProblem};
use logchoquard::logkernel::build_kernel_spectrum;
use logchoquard::semiclassical::ground_state_width;

use crate::error::CliResult;
use crate::manifest::RunManifest;
use crate::output::{self, num, sibling};
use crate::params::Params;

/// Radial ground state of −Δu + a u = Φ[u²] u, its report and a 2D lift.
#[derive(Args, Debug)]
pub struct GroundstateArgs {
    /// Coefficient a > 0 [default: 1.0]
    #[arg(long)]
    pub a: Option<f64>,
    /// Outer radius of the radial grid [default: 20]
    #[arg(long)]
    pub rmax: Option<f64>,
    /// Radial nodes [default: 2000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Euler–Lagrange residual target [default: 1e-10]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Nodes of the 2D lift along x [default: 128]
    #[arg(long)]
    pub nx: Option<usize>,
    /// Nodes along y [default: nx]
    #[arg(long)]
    pub ny: Option<usize>,
    /// Box side along x [default: 16]
    #[arg(long)]
    pub lx: Option<f64>,
    /// Box side along y [default: lx]
    #[arg(long)]
    pub ly: Option<f64>,
    /// Radial profile CSV [default: U.csv]; the lift goes to the same stem with .lcf2
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &GroundstateArgs, p: &mut Params, m: &mut RunManifest) -> CliResult<()> {
    let out = p.path("out", args.out.clone(), "U.csv")?;
    m.place(sibling(&out, ".manifest.json"));
    let a = p.positive("a", args.a, 1.0)?;
    let rmax = p.positive("rmax", args.rmax, 20.0)?;
    let n = p.get("n", args.n, 2000usize)?;
    let tol = p.positive("tol", args.tol, 1e-10)?;
    let nx = p.get("nx", args.nx, 128usize)?;
    let ny = p.get("ny", args.ny, nx)?;
    let lx = p.positive("lx", args.lx, 16.0)?;
    let ly = p.positive("ly", args.ly, lx)?;
    p.guard_cells(nx, ny)?;
    p.guard_cells(n, 1)?;
    p.finish()?;
    m.config = p.snapshot.clone();

    let rg = RadialGrid::uniform(n, rmax)?;
    let opts = GroundStateOptions { tol, ..Default::default() };
    let gs = m.stage("solve", || solve_ground_state(&LimitingProblem::new(a)?, &rg, &opts))?;
    output::radial(&out, &gs.profile, &output::provenance("groundstate", &m.config), m)?;

    let target = tol.max(gs.residual_floor);
    m.check("radial residual", gs.el_residual <= target, true, format!("{:e} <= {target:e}", gs.el_residual));
    let v = gs.profile.values();
    let shape = v.iter().all(|x| *x > 0.0) && v.windows(2).all(|w| w[1] < w[0]);
    m.check("positive and decreasing", shape, true, String::new());
    let nehari = (gs.b_uu - gs.h1_sq()).abs() / gs.h1_sq();
    m.check("Nehari identity", nehari < 1e-8, false, format!("{nehari:e}"));
    let b0 = (gs.b0 - 0.25 * gs.h1_sq()).abs() / gs.b0.abs();
    m.check("b0 = |U|^2_H1 / 4", b0 < 1e-8, false, format!("{b0:e}"));

    let fit = m.stage("asymptotics", || asymptotic_windows(&gs));
    let width = ground_state_width(&gs)?;

    let g = Grid2D::new(nx, ny, lx, ly)?;
    let (lift, lifted_residual) = m.stage("lift", || -> logchoquard::Result<_> {
        let lift = gs.lift(&g, (0.0, 0.0))?;
        let k = build_kernel_spectrum(&g)?;
        let r = grad_i(&lift.field, &k)?.max_abs();
        Ok((lift, r))
    })?;
    m.check("lifted residual", lifted_residual < 1e-6, false, format!("{lifted_residual:e}"));
    let meta =
        FieldMeta::new("groundstate").param("a", num(a)).param("n", n).param("rmax", num(rmax)).param("b0", num(gs.b0));
    output::field(&sibling(&out, ".lcf2"), &lift.field, &meta, m)?;

    let mut entries = vec![
        ("a", num(a)),
        ("U0", num(gs.umax)),
        ("mass2", num(gs.mass2)),
        ("M", num(gs.m)),
        ("dirichlet", num(gs.dirichlet)),
        ("B_UU", num(gs.b_uu)),
        ("b0", num(gs.b0)),
        ("width", num(width)),
        ("el_residual", num(gs.el_residual)),
        ("residual_floor", num(gs.residual_floor)),
        ("nehari_residual", num(gs.nehari_residual)),
        ("newton_iterations", gs.iterations.to_string()),
        ("lifted_residual", num(lifted_residual)),
    ];
    match &fit {
        Ok(w) => {
            let last = &w[w.len() - 1];
            entries.push(("mu", num(last.mu)));
            entries.push(("fit_window", format!("{},{}", num(last.fit_window.0), num(last.fit_window.1))));
            entries.push(("drift", w.iter().map(|f| num(f.drift)).collect::<Vec<_>>().join(",")));
            m.check("asymptotic drift", last.drift < 0.05, false, format!("{:e}", last.drift));
            m.result("mu", last.mu);
        }
        Err(e) => {
            entries.push(("mu", "NaN".into()));
            m.check("asymptotic fit", false, false, e.to_string());
        }
    }
    output::text(&sibling(&out, ".report.txt"), &output::report(&entries), m)?;
    m.result("b0", gs.b0);
    m.result("mass2", gs.mass2);
    m.result("U0", gs.umax);
    println!("U(0) = {}  |U|^2 = {}  b0 = {}  residual = {:e}", gs.umax, gs.mass2, gs.b0, gs.el_residual);
    Ok(())
}
