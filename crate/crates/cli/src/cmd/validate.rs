use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use logchoquard::field::{
    gradient_sq_integral, integrate, lift_radial, random_smooth_field, DiffBackend, Field2D, Grid2D, RadialGrid,
    RadialProfile,
};
use logchoquard::groundstate::{
    default_radial_grid, energy_i, grad_i, solve_ground_state, Functional, GroundStateRecord, LimitingProblem,
};
use logchoquard::linops::{apply_second_derivative, lowest_eigenpairs, LinearizedOperator};
use logchoquard::logkernel::{
    build_kernel_spectrum, radial_log_potential, truncated_kernel_hat, truncated_kernel_hat_quadrature,
    TruncatedKernelSpectrum,
};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{num, provenance, sibling, Table};
use crate::params::Params;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Built-in oracle suite: kernel vs radial engine, finite-difference
/// derivatives and spectrum invariants at the ground state.
#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Also write the table as CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Row {
    name: &'static str,
    value: f64,
    bound: String,
    passed: bool,
    seconds: f64,
}

struct Setup {
    gs: GroundStateRecord,
    kernel: TruncatedKernelSpectrum,
    u: Field2D,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn kernel_origin(s: &Setup) -> logchoquard::Result<f64> {
    let g = *s.kernel.grid();
    let rho = Field2D::from_fn(g, |x, y| (-(x * x + y * y)).exp());
    let phi = s.kernel.convolve(&rho)?;
    let (x0, y0) = g.coords(0);
    let i = ((-x0 / g.hx()).round() as usize) + g.nx * ((-y0 / g.hy()).round() as usize);
    Ok(rel(phi.values()[i], EULER_GAMMA / 4.0))
}

fn closed_form_vs_quadrature(s: &Setup) -> logchoquard::Result<f64> {
    let t = s.kernel.truncation();
    Ok([0.0, 0.3, 1.7, 5.0, 12.5]
        .iter()
        .map(|&k| rel(truncated_kernel_hat(k, t), truncated_kernel_hat_quadrature(k, t)))
        .fold(0.0, f64::max))
}

fn kernel_vs_radial(s: &Setup) -> logchoquard::Result<f64> {
    let g = *s.kernel.grid();
    let (hx, hy) = g.half_widths();
    let rmax = hx.min(hy);
    let rg = RadialGrid::uniform((100.0 * rmax) as usize, rmax)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let (c, a) = (rng.random_range(0.5..1.5), rng.random_range(0.8..2.0));
        let rho = RadialProfile::from_fn(rg.clone(), |r| (1.0 + c * r * r) * (-a * r * r).exp())?;
        let w = radial_log_potential(&rho)?;
        let planar = s.kernel.convolve(&lift_radial(&rho, &g, (0.0, 0.0))?.field)?;
        let lifted = lift_radial(&w, &g, (0.0, 0.0))?.field;
        for i in 0..g.len() {
            let (x, y) = g.coords(i);
            if x.hypot(y) < 0.9 * rmax {
                worst = worst.max((planar.values()[i] - lifted.values()[i]).abs());
            }
        }
    }
    Ok(worst)
}

fn radial_residual(s: &Setup) -> logchoquard::Result<f64> {
    Ok(s.gs.el_residual)
}

fn nehari(s: &Setup) -> logchoquard::Result<f64> {
    Ok(rel(s.gs.b_uu, s.gs.h1_sq()))
}

fn lifted_residual(s: &Setup) -> logchoquard::Result<f64> {
    Ok(grad_i(&s.u, &s.kernel)?.max_abs())
}

fn fd_gradient(s: &Setup) -> logchoquard::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = *s.u.grid();
    let base = s.u.add(&random_smooth_field(&g, &mut rng, 2.0, 2).scaled(0.3));
    let gr = grad_i(&base, &s.kernel)?;
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let phi = random_smooth_field(&g, &mut rng, 1.5, 3);
        let d = |h: f64| -> logchoquard::Result<f64> {
            Ok((energy_i(&base.add(&phi.scaled(h)), &s.kernel)? - energy_i(&base.sub(&phi.scaled(h)), &s.kernel)?)
                / (2.0 * h))
        };
        let rich = (4.0 * d(5e-4)? - d(1e-3)?) / 3.0;
        worst = worst.max(rel(rich, gr.dot(&phi)));
    }
    Ok(worst)
}

fn fd_hessian(s: &Setup) -> logchoquard::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = *s.u.grid();
    let base = s.u.add(&random_smooth_field(&g, &mut rng, 2.0, 2).scaled(0.3));
    let f = Functional::limiting(&LimitingProblem::default(), &s.kernel);
    let l = LinearizedOperator::new(&f, base.clone())?;
    let phi = random_smooth_field(&g, &mut rng, 1.5, 2);
    let exact = apply_second_derivative(&l, &phi)?;
    let d = |h: f64| -> logchoquard::Result<Field2D> {
        Ok(grad_i(&base.add(&phi.scaled(h)), &s.kernel)?
            .sub(&grad_i(&base.sub(&phi.scaled(h)), &s.kernel)?)
            .scaled(0.5 / h))
    };
    let rich = d(5e-3)?.scaled(4.0 / 3.0).sub(&d(1e-2)?.scaled(1.0 / 3.0));
    Ok(rich.sub(&exact).max_abs() / exact.max_abs())
}

fn quadratic_form(s: &Setup) -> logchoquard::Result<f64> {
    let f = Functional::limiting(&LimitingProblem::default(), &s.kernel);
    let l = LinearizedOperator::new(&f, s.u.clone())?;
    let want = -2.0 * (gradient_sq_integral(&s.u, DiffBackend::Spectral) + integrate(&s.u.mul(&s.u)));
    Ok(rel(l.form(&s.u, &s.u)?, want))
}

/// Packs Morse index, kernel dimension and alignment into one number that
/// is zero exactly when all three hold.
fn spectrum(s: &Setup) -> logchoquard::Result<f64> {
    let f = Functional::limiting(&LimitingProblem::default(), &s.kernel);
    let l = LinearizedOperator::new(&f, s.u.clone())?;
    let rep = lowest_eigenpairs(&l, 6, 1e-7)?;
    let mut bad = 0.0;
    if rep.morse_index != 1 {
        bad += 1.0;
    }
    if rep.kernel_dim_numerical != 2 {
        bad += 1.0;
    }
    Ok(bad + (0.99 - rep.kernel_alignment).max(0.0))
}

type Oracle = fn(&Setup) -> logchoquard::Result<f64>;

pub fn run(args: &ValidateArgs, p: &mut Params, m: &mut RunManifest) -> CliResult<()> {
    let out = p.path_opt("out", args.out.clone())?;
    if let Some(o) = &out {
        m.place(sibling(o, ".manifest.json"));
    }
    p.finish()?;
    m.config = p.snapshot.clone();

    let setup = m.stage("setup", || -> logchoquard::Result<Setup> {
        let gs = solve_ground_state(&LimitingProblem::default(), &default_radial_grid(), &Default::default())?;
        let g = Grid2D::square(96, 16.0)?;
        let kernel = build_kernel_spectrum(&g)?;
        let u = gs.lift(&g, (0.0, 0.0))?.field;
        Ok(Setup { gs, kernel, u })
    })?;
    let oracles: [(&'static str, Oracle, f64); 10] = [
        ("kernel: Phi[gaussian](0) = gamma/4", kernel_origin, 1e-6),
        ("kernel: closed form vs quadrature", closed_form_vs_quadrature, 1e-10),
        ("kernel: FFT vs radial engine", kernel_vs_radial, 1e-6),
        ("ground state: radial residual", radial_residual, 1e-10),
        ("ground state: Nehari identity", nehari, 1e-8),
        ("ground state: lifted residual", lifted_residual, 1e-6),
        ("derivatives: grad_I vs FD", fd_gradient, 1e-6),
        ("derivatives: I'' vs FD of grad_I", fd_hessian, 1e-6),
        ("spectrum: I''(U)[U,U] identity", quadratic_form, 1e-6),
        ("spectrum: Morse 1, kernel 2, aligned", spectrum, 1e-12),
    ];
    let mut rows = Vec::new();
    for (name, f, tol) in oracles {
        let t = Instant::now();
        let value = f(&setup).unwrap_or(f64::NAN);
        let passed = value <= tol;
        m.check(name, passed, true, format!("{value:e} <= {tol:e}"));
        rows.push(Row { name, value, bound: format!("{tol:e}"), passed, seconds: t.elapsed().as_secs_f64() });
    }

    println!("{:<40} {:>12} {:>10} {:>8}  result", "check", "value", "bound", "time");
    for r in &rows {
        println!(
            "{:<40} {:>12.3e} {:>10} {:>7.2}s  {}",
            r.name,
            r.value,
            r.bound,
            r.seconds,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    if let Some(o) = &out {
        let mut t = Table::create(o, &provenance("validate", &m.config), &["check", "value", "bound", "passed"])?;
        for r in &rows {
            t.row([r.name.to_string(), num(r.value), r.bound.clone(), r.passed.to_string()])?;
        }
        t.finish(m)?;
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::Compute(format!("{failed} oracle checks failed")));
    }
    Ok(())
}
