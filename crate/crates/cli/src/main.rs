use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use uhm_core::bench::{
    cmd_build, cmd_gen, cmd_matvec, cmd_sweep, cmd_verify, FormatSelector, GeometryKind,
    GeometrySpec, MetricsRow, RunConfig, SweepAxis,
};
use uhm_core::clustering::Criterion;
use uhm_core::kernels::KernelKind;

#[derive(Parser)]
#[command(
    name = "uhm-kit",
    version,
    about = "Build and benchmark H and uniform H-matrices for kernel matrices on point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the point geometry as whitespace-separated `x y z w` rows.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Build the selected formats and write metrics.csv plus structure dumps.
    Build {
        #[command(flatten)]
        common: Common,
        /// Also estimate the relative spectral error of each build.
        #[arg(long)]
        error: bool,
        /// Fail when an estimated error exceeds this value (implies --error).
        #[arg(long)]
        max_rel_err: Option<f64>,
    },
    /// Time matrix-vector products.
    Matvec {
        #[command(flatten)]
        common: Common,
    },
    /// Repeat the build over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Also estimate the relative spectral error of each build.
        #[arg(long)]
        error: bool,
    },
    /// Estimate spectral errors and check the global error bound exactly
    /// when the matrix is small enough.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Fail when an estimated error exceeds this value.
        #[arg(long)]
        max_rel_err: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Geom {
    Sphere,
    Knot,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kernel {
    Laplace,
    Helmholtz,
}

#[derive(Clone, Copy, ValueEnum)]
enum Crit {
    Weak,
    Strong,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fmt {
    H,
    Uh,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Eta,
    Eps,
    N,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "sphere")]
    geometry: Geom,
    /// Point file (`x y z w` rows) for --geometry file.
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "laplace")]
    kernel: Kernel,
    /// Wavenumber times h, where h is the largest nearest-neighbour spacing
    /// of the point cloud (stands in for the largest mesh edge length).
    #[arg(long, default_value_t = 0.1)]
    kappa_h: f64,
    #[arg(long, default_value_t = 10.0)]
    eta: f64,
    #[arg(long, value_enum, default_value = "weak")]
    criterion: Crit,
    #[arg(long, default_value_t = 30)]
    nmin: usize,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, value_enum, default_value = "both")]
    format: Fmt,
    /// Worker threads; defaults to the hardware parallelism.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "uhm-out")]
    out: PathBuf,
    /// Timed matrix-vector products after one warm-up run.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
}

impl Common {
    fn config(&self) -> RunConfig {
        let defaults = RunConfig::default();
        RunConfig {
            geometry: GeometrySpec {
                kind: match self.geometry {
                    Geom::Sphere => GeometryKind::Sphere,
                    Geom::Knot => GeometryKind::Knot,
                    Geom::File => GeometryKind::File,
                },
                n: self.n,
                seed: self.seed,
                path: self.points.clone(),
            },
            kernel: match self.kernel {
                Kernel::Laplace => KernelKind::Laplace,
                Kernel::Helmholtz => KernelKind::Helmholtz,
            },
            kappa_h: self.kappa_h,
            eta: self.eta,
            criterion: match self.criterion {
                Crit::Weak => Criterion::Weak,
                Crit::Strong => Criterion::Strong,
            },
            n_min: self.nmin,
            eps: self.eps,
            workers: self.workers.unwrap_or(defaults.workers),
            format: match self.format {
                Fmt::H => FormatSelector::H,
                Fmt::Uh => FormatSelector::Uh,
                Fmt::Both => FormatSelector::Both,
            },
            out: Some(self.out.clone()),
            repeats: self.repeats,
            error_estimate: false,
        }
    }
}

fn print_rows(rows: &[MetricsRow]) {
    for r in rows {
        println!(
            "{:>2} n={} adm={} dense={} total={} k_max={} l_max={} build={:.3}s{}",
            r.format.name(),
            r.n,
            r.adm_elements,
            r.dense_elements,
            r.total_elements,
            r.k_max,
            r.l_max,
            r.build_s,
            r.rel_spec_err
                .map(|e| format!(" err={e:.3e}"))
                .unwrap_or_default()
        );
    }
}

fn check_errors<'a>(
    errors: impl Iterator<Item = (&'a str, Option<f64>)>,
    limit: Option<f64>,
) -> Result<()> {
    let Some(limit) = limit else { return Ok(()) };
    for (format, e) in errors {
        if let Some(e) = e {
            if e > limit {
                bail!("{format}: relative spectral error {e:.3e} exceeds {limit:.3e}");
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { common } => {
            let config = common.config();
            std::fs::create_dir_all(&common.out)
                .with_context(|| format!("creating {}", common.out.display()))?;
            let path = common.out.join("points.txt");
            let g = cmd_gen(&config, &path)?;
            println!("wrote {} points to {}", g.len(), path.display());
        }
        Command::Build {
            common,
            error,
            max_rel_err,
        } => {
            let mut config = common.config();
            config.error_estimate = error || max_rel_err.is_some();
            let rows = cmd_build(&config)?;
            print_rows(&rows);
            check_errors(
                rows.iter().map(|r| (r.format.name(), r.rel_spec_err)),
                max_rel_err,
            )?;
        }
        Command::Matvec { common } => {
            let config = common.config();
            let report = cmd_matvec(&config, common.repeats)?;
            for r in &report.rows {
                println!(
                    "{:>2} mean={:.6}s min={:.6}s samples={}",
                    r.format.name(),
                    r.mean_s,
                    r.min_s,
                    r.repeats
                );
            }
            if let Some(ratio) = report.h_over_uh {
                println!("h/uh time ratio {ratio:.3}");
            }
        }
        Command::Sweep {
            common,
            axis,
            values,
            error,
        } => {
            let mut config = common.config();
            config.error_estimate = error;
            let axis = match axis {
                Axis::Eta => SweepAxis::Eta,
                Axis::Eps => SweepAxis::Eps,
                Axis::N => SweepAxis::N,
            };
            let report = cmd_sweep(&config, axis, &values)?;
            print_rows(&report.rows);
            for s in &report.slopes {
                println!(
                    "{:>2} slope vs N {:.3}, vs N log N {:.3}",
                    s.format.name(),
                    s.slope_n,
                    s.slope_nlogn
                );
            }
        }
        Command::Verify {
            common,
            max_rel_err,
        } => {
            let config = common.config();
            let report = cmd_verify(&config)?;
            for e in &report.errors {
                println!(
                    "{:>2} rel_spec_err={:.3e} iters={}",
                    e.format, e.rel_spec_err, e.iters
                );
            }
            let t = &report.bound;
            match (t.lhs, t.rhs, t.holds) {
                (Some(l), Some(r), Some(h)) => println!("bound: lhs={l:.3e} rhs={r:.3e} holds={h}"),
                _ => eprintln!("warning: {}", t.note),
            }
            if !report.passed() {
                bail!("global error bound violated");
            }
            check_errors(
                report
                    .errors
                    .iter()
                    .map(|e| (e.format.as_str(), Some(e.rel_spec_err))),
                max_rel_err,
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
