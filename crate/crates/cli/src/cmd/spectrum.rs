use std::path::PathBuf;

use clap::Args;
use logchoquard::field::io::{read_field, FieldMeta};
use logchoquard::groundstate::{Functional, LimitingProblem};
use logchoquard::linops::{lowest_eigenpairs_with, LinearizedOperator, SpectrumOptions};
use logchoquard::logkernel::build_kernel_spectrum;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{self, num, refuse_overwrite, sibling, Table};
use crate::params::Params;

/// Lowest eigenpairs of the linearized operator at a state.
#[derive(Args, Debug)]
pub struct SpectrumArgs {
    /// State to linearize at (LCF2)
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Number of eigenpairs, at least 4 [default: 8]
    #[arg(long)]
    pub k: Option<usize>,
    /// Eigen-residual target [default: 1e-7]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Coefficient a [default: params.a of the state's sidecar, else 1.0]
    #[arg(long)]
    pub a: Option<f64>,
    /// Eigenvalue table [default: spectrum.csv]; eigenfields go to <stem>_<i>.lcf2
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &SpectrumArgs, p: &mut Params, m: &mut RunManifest) -> CliResult<()> {
    let out = p.path("out", args.out.clone(), "spectrum.csv")?;
    m.place(sibling(&out, ".manifest.json"));
    let state =
        p.path_opt("state", args.state.clone())?.ok_or_else(|| CliError::usage("spectrum needs --state <U.lcf2>"))?;
    let k = p.get("k", args.k, 8usize)?;
    if k < 4 {
        return Err(CliError::usage(format!("--k must be at least 4, got {k}")));
    }
    let tol = p.positive("tol", args.tol, 1e-7)?;
    let flag_a = p.get_opt("a", args.a)?;
    p.finish()?;
    refuse_overwrite(&[&out], &[&state])?;
    m.input(&state)?;
    let (u, meta) = read_field(&state)?;
    let a = match flag_a {
        Some(a) => a,
        None => match meta.as_ref().and_then(|m| m.params.get("a")) {
            Some(s) => s.parse().map_err(|_| CliError::Io(format!("sidecar params.a = `{s}` is not a number")))?,
            None => 1.0,
        },
    };
    p.snapshot.insert("a".into(), num(a));
    m.config = p.snapshot.clone();
    let g = *u.grid();
    p.guard_cells(g.nx, g.ny)?;

    let kernel = m.stage("kernel", || build_kernel_spectrum(&g))?;
    let f = Functional::limiting(&LimitingProblem::new(a)?, &kernel);
    let l = LinearizedOperator::new(&f, u)?;
    let opts = SpectrumOptions { k, tol, ..Default::default() };
    let rep = m.stage("eigensolve", || lowest_eigenpairs_with(&l, &opts))?;

    let prov = output::provenance("spectrum", &m.config);
    let mut t = Table::create(&out, &prov, &["index", "eigenvalue", "residual", "class", "field"])?;
    let near = |v: f64| v.abs() <= rep.kernel_tol;
    for (i, (val, res)) in rep.eigenvalues.iter().zip(&rep.residuals).enumerate() {
        let class = if near(*val) {
            "kernel"
        } else if *val < 0.0 {
            "negative"
        } else {
            "positive"
        };
        let path = sibling(&out, &format!("_{i}.lcf2"));
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        t.row([i.to_string(), num(*val), num(*res), class.to_string(), name])?;
        let meta = FieldMeta::new("spectrum").param("index", i).param("eigenvalue", num(*val)).param("a", num(a));
        output::field(&path, &rep.eigenfields[i], &meta, m)?;
    }
    t.finish(m)?;

    m.check("one negative eigenvalue", rep.morse_index == 1, false, rep.morse_index.to_string());
    m.check("two-dimensional kernel", rep.kernel_dim_numerical == 2, false, rep.kernel_dim_numerical.to_string());
    m.check("kernel aligned with translations", rep.kernel_alignment >= 0.99, false, num(rep.kernel_alignment));
    let rest = rep.eigenvalues.iter().filter(|v| !near(**v) && **v > 0.0).cloned().fold(f64::INFINITY, f64::min);
    m.check(
        "positive part bounded below",
        rep.delta_estimate > 0.0 && rest >= rep.delta_estimate,
        false,
        format!("{} >= {}", num(rest), num(rep.delta_estimate)),
    );
    m.result("eigenvalues", rep.eigenvalues.clone());
    m.result("kernel_tol", rep.kernel_tol);
    m.result("delta_estimate", rep.delta_estimate);
    m.result("iterations", rep.iterations);
    for (i, v) in rep.eigenvalues.iter().enumerate() {
        println!("{i:>3}  {v:+.10e}");
    }
    Ok(())
}
