use std::path::PathBuf;

use clap::Args;
use logchoquard::field::io::FieldMeta;
use logchoquard::logkernel::build_kernel_spectrum;
use logchoquard::semiclassical::{ground_state_for, ground_state_width, physical_grid, run_single_eps};

use crate::cmd::reduce::{load_potential, resolve_grid, write_theta, ReductionGridArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{self, num, provenance, Table};
use crate::params::Params;

/// ε-sweep: reduced functional, critical point and the physical pair (v_ε, E_ε).
#[derive(Args, Debug)]
pub struct ConcentrateArgs {
    #[command(flatten)]
    pub grid: ReductionGridArgs,
    /// Comma-separated ε values [default: 0.2,0.1,0.05]
    #[arg(long)]
    pub eps: Option<String>,
    /// Output directory [default: runs]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn eps_dir(eps: f64) -> String {
    format!("eps_{}", num(eps))
}

pub fn run(args: &ConcentrateArgs, p: &mut Params, m: &mut RunManifest) -> CliResult<()> {
    let out = p.path("out", args.out.clone(), "runs")?;
    m.place(out.join("manifest.json"));
    let (pot_path, opts) = resolve_grid(&args.grid, p, 160, "concentrate")?;
    let eps_list = p.list("eps", args.eps.clone(), "0.2,0.1,0.05")?;
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(CliError::usage("--eps must list positive values"));
    }
    p.finish()?;
    m.config = p.snapshot.clone();
    if pot_path.starts_with(&out) {
        return Err(CliError::usage("the potential file may not live inside the output directory"));
    }
    let pot = load_potential(&pot_path, m)?;
    pot.extremum()?;
    let prov = provenance("concentrate", &m.config);

    let gs = m.stage("ground state", || ground_state_for(&pot, &opts))?;
    let width = ground_state_width(&gs)?;
    let kernel = m.stage("kernel", || build_kernel_spectrum(&opts.rescaled_grid()?))?;
    let mut traj =
        Table::create(&out.join("trajectory.csv"), &prov, &["eps", "xi1", "xi2", "theta_min", "w_norm", "residual"])?;
    let mut summary: Vec<(String, String)> = vec![
        ("potential".into(), pot.kind.as_str().to_string()),
        ("x0".into(), format!("{},{}", num(pot.x0[0]), num(pot.x0[1]))),
        ("b0".into(), num(gs.b0)),
        ("ground_state_width".into(), num(width)),
    ];
    let mut failures = Vec::new();
    let mut xi_norms = Vec::new();
    for &eps in &eps_list {
        let dir = out.join(eps_dir(eps));
        let res = m.stage(&format!("eps {}", num(eps)), || run_single_eps(&pot, eps, &gs, &kernel, &opts));
        let run = match res {
            Ok(r) => r,
            Err((e, table)) => {
                log::error!("eps = {eps}: {e}");
                if let Some(t) = table {
                    write_theta(&dir.join("theta.csv"), &t, &prov, m)?;
                }
                summary.push((format!("{}.error", eps_dir(eps)), e.to_string()));
                failures.push(eps);
                continue;
            }
        };
        write_theta(&dir.join("theta.csv"), &run.table, &prov, m)?;
        let meta = |what: &str| {
            FieldMeta::new("concentrate")
                .param("eps", num(eps))
                .param("field", what)
                .param("potential", pot.kind.as_str())
        };
        output::field(&dir.join("u_eps.lcf2"), &run.u, &meta("u_eps"), m)?;
        output::field(&dir.join("v_eps.lcf2"), &run.pair.v_eps, &meta("v_eps"), m)?;
        output::field(&dir.join("E_eps.lcf2"), &run.pair.e_eps, &meta("E_eps").param("c_eps", num(run.pair.c_eps)), m)?;
        traj.row([
            num(eps),
            num(run.xi[0]),
            num(run.xi[1]),
            num(run.theta_min()),
            num(run.correction.w_norm),
            num(run.residual),
        ])?;

        let pg = physical_grid(kernel.grid(), eps, pot.x0)?;
        let off = (run.pair.peak[0] - pot.x0[0]).abs().max((run.pair.peak[1] - pot.x0[1]).abs());
        let cell = pg.hx().max(pg.hy());
        m.check(
            &format!("eps {}: peak within one cell of x0", num(eps)),
            off <= cell * (1.0 + 1e-9),
            false,
            format!("{off:e}"),
        );
        let ratio = run.pair.peak_width / (eps * width);
        m.check(&format!("eps {}: width ratio", num(eps)), (ratio - 1.0).abs() < 0.05, false, num(ratio));
        m.check(
            &format!("eps {}: E identity", num(eps)),
            run.pair.identity_deviation < 1e-8,
            false,
            format!("{:e}", run.pair.identity_deviation),
        );
        summary.push((format!("{}.xi", eps_dir(eps)), format!("{},{}", num(run.xi[0]), num(run.xi[1]))));
        summary.push((
            format!("{}.concentration_point", eps_dir(eps)),
            format!("{},{}", num(run.pair.xi_phys[0]), num(run.pair.xi_phys[1])),
        ));
        summary.push((format!("{}.theta_min", eps_dir(eps)), num(run.theta_min())));
        summary.push((format!("{}.w_norm", eps_dir(eps)), num(run.correction.w_norm)));
        summary.push((format!("{}.residual", eps_dir(eps)), num(run.residual)));
        summary.push((format!("{}.c_eps", eps_dir(eps)), num(run.pair.c_eps)));
        summary.push((format!("{}.width_ratio", eps_dir(eps)), num(ratio)));
        summary.push((format!("{}.identity_deviation", eps_dir(eps)), num(run.pair.identity_deviation)));
        println!("eps = {eps}: xi = ({:.6}, {:.6}), theta = {:.10}", run.xi[0], run.xi[1], run.theta_min());
        xi_norms.push(run.xi[0].hypot(run.xi[1]));
    }
    traj.finish(m)?;
    if xi_norms.len() > 1 {
        let mono = xi_norms.windows(2).all(|w| w[1] < w[0]);
        m.check("|xi| decreases along the sweep", mono, false, format!("{xi_norms:?}"));
    }
    output::text(&out.join("summary.txt"), &output::report(&summary), m)?;
    m.result("xi_norms", xi_norms);
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Compute(format!("sweep failed for eps = {failures:?}")))
    }
}
