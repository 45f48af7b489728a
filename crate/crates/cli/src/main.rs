//! `normsol`: solve, sweep and verify normalized solutions from the command
//! line. Exit codes: 0 success, 2 verification failure, 1 error.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use normsol::solvers::Branch;

use crate::commands::{Run, VerifyArgs};
use crate::config::{RunConfig, SweepVariableConfig};

#[derive(Debug, Parser)]
#[command(name = "normsol", version, about = "Normalized solutions with a potential: solvers and verification")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: config, then $NORMSOL_OUTPUT_DIR, then ./normsol-out].
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Seed for randomized sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// GN constant, exponents, t_mu and mu0.
    Constants {
        #[command(flatten)]
        params: ParamArgs,
        /// Skip the computation and use this GN constant.
        #[arg(long)]
        gn_value: Option<f64>,
    },
    /// Lowest eigenpairs of -Δ + V, or the Morse index at a stored record.
    Spectrum {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 4)]
        count: usize,
        /// Stored record whose linearization is analysed.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Local minimizer inside the gradient ball.
    SolveLocal {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Mountain-pass solution (solves the local minimizer first unless given).
    SolveMp {
        #[command(flatten)]
        params: ParamArgs,
        /// Start from this local-min record instead of solving for it.
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        knots: Option<usize>,
        /// Profiles sampled on the gradient sphere for the geometry check; 0 skips it.
        #[arg(long, default_value_t = 64)]
        certificate_samples: usize,
    },
    /// Continuation in mu (fractions of mu0) or rho.
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum)]
        variable: Option<VariableArg>,
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        end: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        warm_start: bool,
        #[arg(long, value_enum)]
        branch: Option<BranchArg>,
    },
    /// Re-verify stored records.
    Verify {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// Pohozaev identity on [A, B].
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
        pohozaev: Option<Vec<f64>>,
        /// Blow-up rescaling and the maxima bound.
        #[arg(long)]
        blowup: bool,
        /// Exponential decay bound with rate GAMMA beyond R/√λ.
        #[arg(long, num_args = 2, value_names = ["GAMMA", "R"])]
        decay: Option<Vec<f64>>,
        /// Constant the decay bound must hold with.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        classify_threshold: Option<f64>,
    },
    /// Limit profiles: the 1D soliton and the N-dimensional ground state.
    Profiles {
        #[arg(long)]
        q: f64,
        #[arg(long = "N")]
        dimension: Option<usize>,
        #[arg(long, default_value_t = 30.0)]
        x_max: f64,
        #[arg(long, default_value_t = 6000)]
        intervals: usize,
    },
}

/// Overrides for the `[params]` and `[grid]` sections.
#[derive(Debug, Args)]
struct ParamArgs {
    #[arg(long = "N")]
    dimension: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, conflicts_with = "mu_fraction")]
    mu: Option<f64>,
    #[arg(long)]
    mu_fraction: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    intervals: Option<usize>,
    /// `uniform` or `graded(g)`.
    #[arg(long)]
    spacing: Option<String>,
}

impl ParamArgs {
    fn apply(&self, c: &mut RunConfig) {
        let p = &mut c.params;
        if let Some(n) = self.dimension {
            p.dimension = n;
        }
        if let Some(q) = self.q {
            p.q = q;
        }
        if let Some(rho) = self.rho {
            p.rho = rho;
        }
        if let Some(mu) = self.mu {
            p.mu = Some(mu);
        }
        if let Some(f) = self.mu_fraction {
            p.mu = None;
            p.mu_fraction = f;
        }
        let g = &mut c.grid;
        if let Some(r) = self.r_max {
            g.r_max = r;
        }
        if let Some(m) = self.intervals {
            g.intervals = m;
        }
        if let Some(s) = &self.spacing {
            g.spacing = s.clone();
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum VariableArg {
    Mu,
    Rho,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum BranchArg {
    LocalMin,
    MountainPass,
}

fn pair(v: Option<Vec<f64>>) -> Option<[f64; 2]> {
    v.map(|v| [v[0], v[1]])
}

fn execute(cli: Cli) -> Result<bool> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match &cli.command {
        Command::Constants { params, gn_value } => {
            params.apply(&mut config);
            if gn_value.is_some() {
                config.gn.value = *gn_value;
            }
        }
        Command::Spectrum { params, .. } | Command::SolveLocal { params } => params.apply(&mut config),
        Command::SolveMp { params, knots, .. } => {
            params.apply(&mut config);
            if let Some(k) = knots {
                config.mountain_pass.n_knots = *k;
            }
        }
        Command::Sweep {
            params,
            variable,
            start,
            end,
            points,
            warm_start,
            branch,
        } => {
            params.apply(&mut config);
            let s = &mut config.sweep;
            if let Some(v) = variable {
                s.variable = match v {
                    VariableArg::Mu => SweepVariableConfig::Mu,
                    VariableArg::Rho => SweepVariableConfig::Rho,
                };
            }
            if let Some(b) = branch {
                s.branch = match b {
                    BranchArg::LocalMin => Branch::LocalMin,
                    BranchArg::MountainPass => Branch::MountainPass,
                };
            }
            s.start = start.unwrap_or(s.start);
            s.end = end.unwrap_or(s.end);
            s.points = points.unwrap_or(s.points);
            s.warm_start |= warm_start;
        }
        Command::Verify { .. } | Command::Profiles { .. } => {}
    }
    config.validate()?;
    let out_dir = config.output_dir(cli.output_dir.as_deref());
    let run = Run { config, out_dir };
    run.save_config()?;

    match cli.command {
        Command::Constants { .. } => commands::constants(&run),
        Command::Spectrum { count, record, .. } => commands::spectrum(&run, count, record.as_deref()),
        Command::SolveLocal { .. } => commands::solve_local(&run),
        Command::SolveMp {
            from,
            certificate_samples,
            ..
        } => commands::solve_mp(&run, from.as_deref(), certificate_samples),
        Command::Sweep { .. } => commands::sweep(&run),
        Command::Verify {
            records,
            pohozaev,
            blowup,
            decay,
            eps,
            classify_threshold,
        } => {
            let v = &run.config.verify;
            let args = VerifyArgs {
                pohozaev: pair(pohozaev).or(v.pohozaev),
                blowup: blowup || v.blowup,
                decay: pair(decay).or(v.decay),
                eps: eps.unwrap_or(v.decay_eps),
                classify_threshold: classify_threshold.unwrap_or(v.classify_threshold),
            };
            commands::verify(&run, &records, &args)
        }
        Command::Profiles {
            q,
            dimension,
            x_max,
            intervals,
        } => commands::profiles(&run, q, dimension, x_max, intervals),
    }
}

/// Parses `argv` and runs the subcommand, returning the exit code.
fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(run(["normsol", "bogus"]), 1);
        assert_eq!(run(["normsol"]), 1);
        assert_eq!(run(["normsol", "--help"]), 0);
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from(["normsol", "solve-local", "--N", "3", "--q", "3.5", "--mu", "0.2", "--spacing", "graded(0.5)"]).unwrap();
        let mut c = RunConfig::default();
        c.params.mu_fraction = 0.9;
        let Command::SolveLocal { params } = &cli.command else { panic!() };
        params.apply(&mut c);
        assert_eq!(c.params.dimension, 3);
        assert_eq!(c.params.q, 3.5);
        assert_eq!(c.params.mu, Some(0.2));
        assert_eq!(c.grid.spacing, "graded(0.5)");
        c.validate().unwrap();
    }
}
