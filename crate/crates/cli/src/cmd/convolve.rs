use std::path::PathBuf;

use clap::Args;
use logchoquard::field::io::{read_field, FieldMeta};
use logchoquard::logkernel::build_kernel_spectrum;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{self, refuse_overwrite, sibling};
use crate::params::Params;

/// Φ[ρ] of an LCF2 density, written as LCF2 on the same grid.
#[derive(Args, Debug)]
pub struct ConvolveArgs {
    /// Input density (LCF2)
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Output potential (LCF2) [default: phi.lcf2]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &ConvolveArgs, p: &mut Params, m: &mut RunManifest) -> CliResult<()> {
    let out = p.path("out", args.out.clone(), "phi.lcf2")?;
    m.place(sibling(&out, ".manifest.json"));
    let input =
        p.path_opt("in", args.input.clone())?.ok_or_else(|| CliError::usage("convolve needs --in <density.lcf2>"))?;
    p.finish()?;
    m.config = p.snapshot.clone();
    refuse_overwrite(&[&out], &[&input])?;
    m.input(&input)?;
    let (rho, _) = read_field(&input)?;
    let g = *rho.grid();
    p.guard_cells(g.nx, g.ny)?;
    let k = m.stage("kernel", || build_kernel_spectrum(&g))?;
    let phi = m.stage("convolve", || k.convolve(&rho))?;
    let meta = FieldMeta::new("convolve").param("input", input.display()).param("truncation", k.truncation());
    output::field(&out, &phi, &meta, m)?;
    m.result("far_field_coefficient", logchoquard::logkernel::far_field_coefficient(&rho));
    Ok(())
}
