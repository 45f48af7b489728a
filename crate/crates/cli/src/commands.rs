//! Subcommand implementations. Each returns whether its checks passed;
//! errors propagate to `main` and map to exit code 1.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use normsol::constants::{check_mp_geometry, GNConstant, MpGeometryReport};
use normsol::diagnostics::blowup::{blowup_rescale_with, decay_check};
use normsol::diagnostics::profiles::{ground_state_nd_with, ShootingOptions};
use normsol::diagnostics::{pohozaev_report, soliton_norm_relation, soliton_profile_1d, soliton_residual};
use normsol::energy::check_window;
use normsol::solvers::newton::residual_scale;
use normsol::solvers::{
    continuation_sweep, solve_local_min_with, solve_mountain_pass_with, Branch, LocalMinOptions,
    MountainPassOptions, SweepOptions, Tolerances,
};
use normsol::{
    build_grid, geometry, gn_constant, gn_quotient, lambda1, mu0, EnergyParams, Error, Functional, Geometry,
    LinearizedOperator, Potential, RadialField, RadialGrid, SolutionRecord, Spacing,
};
use serde::Serialize;

use crate::config::{RunConfig, SweepVariableConfig};

/// Where outputs go and how chatty to be.
pub struct Run {
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

impl Run {
    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }


    /// The effective configuration, flags applied.
    pub fn save_config(&self) -> Result<PathBuf> {
        self.write("run_config.toml", &self.config.to_toml()?)
    }

    fn save_record(&self, r: &SolutionRecord, stem: &str) -> Result<PathBuf> {
        let (json, _) = r.save(&self.out_dir, stem)?;
        Ok(json)
    }

    fn potential(&self) -> Result<Potential> {
        self.config.potential.build()
    }

    fn grid(&self, dimension: usize) -> Result<Arc<RadialGrid<f64>>> {
        let g = &self.config.grid;
        Ok(build_grid(dimension, g.r_max, g.intervals, g.spacing()?)?)
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            newton: self.config.tolerances.solver,
            ..Tolerances::default()
        }
    }

    fn local_min_options(&self) -> LocalMinOptions {
        LocalMinOptions {
            tolerances: self.tolerances(),
            ..LocalMinOptions::default()
        }
    }

    fn mountain_pass_options(&self) -> MountainPassOptions {
        let mp = &self.config.mountain_pass;
        MountainPassOptions {
            n_knots: mp.n_knots,
            max_iter: mp.max_iter,
            handoff: mp.handoff,
            tolerances: self.tolerances(),
            ..MountainPassOptions::default()
        }
    }

    /// `C_{N,q}`: the configured value, or computed on the GN grid.
    fn gn(&self, dimension: usize, q: f64) -> Result<GNConstant> {
        let gn = &self.config.gn;
        Ok(match gn.value {
            Some(c) => GNConstant::supplied(dimension, q, c)?,
            None => gn_constant(dimension, q, &build_grid(dimension, gn.r_max, gn.intervals, Spacing::Uniform)?)?,
        })
    }

    /// Parameters, GN constant, `μ₀` and geometry for the configured run.
    fn setup(&self, v: &Potential) -> Result<Setup> {
        let p = &self.config.params;
        check_window(p.dimension, p.q)?;
        let gap = v.gap()?;
        let gn = self.gn(p.dimension, p.q)?;
        let m0 = mu0(p.dimension, p.q, gn.value, gap)?;
        let mu = match p.mu {
            Some(mu) => mu,
            None if m0.is_finite() => p.mu_fraction * m0,
            None => bail!("mu0 is infinite for this potential; set params.mu"),
        };
        let params = EnergyParams::new(p.dimension, p.q, p.rho, mu)?;
        let geom = geometry(p.dimension, p.q, gn.value, mu, gap)?;
        Ok(Setup { params, gn, geom })
    }
}

struct Setup {
    params: EnergyParams,
    gn: GNConstant,
    geom: Geometry,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Serialize)]
struct ConstantsReport {
    #[serde(rename = "N")]
    dimension: usize,
    q: f64,
    #[serde(rename = "C")]
    c: f64,
    theta: f64,
    xi: f64,
    mu: f64,
    t_mu: f64,
    /// `null` when infinite.
    mu0: Option<f64>,
    gap: f64,
    gn: GNConstant,
    geometry: Geometry,
}

pub fn constants(ctx: &Run) -> Result<bool> {
    let v = ctx.potential()?;
    let s = ctx.setup(&v)?;
    let report = ConstantsReport {
        dimension: s.params.dimension,
        q: s.params.q,
        c: s.gn.value,
        theta: s.gn.theta,
        xi: s.gn.xi,
        mu: s.params.mu,
        t_mu: s.geom.t_mu,
        mu0: finite(s.geom.mu0),
        gap: s.geom.gap,
        gn: s.gn,
        geometry: s.geom,
    };
    emit(ctx, "constants.json", &report)?;
    Ok(true)
}

#[derive(Serialize)]
struct SpectrumReport {
    #[serde(rename = "N")]
    dimension: usize,
    potential_id: String,
    lambda1: f64,
    lambda_ess: Option<f64>,
    ess_inf: f64,
    eigenvalues: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    record: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    morse: Option<normsol::MorseIndex>,
}

pub fn spectrum(ctx: &Run, count: usize, record: Option<&Path>) -> Result<bool> {
    if count == 0 {
        bail!("--count must be at least 1");
    }
    let (v, grid, morse) = match record {
        Some(path) => {
            let r = SolutionRecord::load(path).with_context(|| format!("loading {}", path.display()))?;
            let u = r.field()?;
            let op = LinearizedOperator::at_solution(&r.params, &r.potential, &u, r.lambda)?;
            let m = op.morse_with(&u, ctx.config.tolerances.index)?;
            (r.potential.clone(), u.grid().clone(), Some(m))
        }
        None => (ctx.potential()?, ctx.grid(ctx.config.params.dimension)?, None),
    };
    let op = LinearizedOperator::schrodinger(grid.clone(), &v)?;
    let pairs = op.lowest_eigenpairs_to(count, ctx.config.tolerances.eigen)?;
    let mut csv = String::from("r");
    for k in 1..=pairs.len() {
        write!(csv, ",phi_{k}")?;
    }
    csv.push('\n');
    for (i, r) in grid.nodes().iter().enumerate() {
        write!(csv, "{r:.16e}")?;
        for (_, phi) in &pairs {
            write!(csv, ",{:.16e}", phi.values()[i])?;
        }
        csv.push('\n');
    }
    ctx.write("spectrum.csv", &csv)?;
    let report = SpectrumReport {
        dimension: grid.dimension(),
        potential_id: v.id(),
        lambda1: lambda1(&v, &grid)?,
        lambda_ess: v.essential_spectrum_floor().ok(),
        ess_inf: v.ess_inf(),
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        record: record.map(Path::to_path_buf),
        morse,
    };
    emit(ctx, "spectrum.json", &report)?;
    Ok(true)
}

#[derive(Serialize)]
struct SolveSummary {
    geometry: Geometry,
    #[serde(rename = "C")]
    c: f64,
    records: Vec<RecordSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mp_geometry: Option<MpGeometryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    path_trace: Option<PathBuf>,
}

#[derive(Serialize)]
struct RecordSummary {
    path: PathBuf,
    kind: String,
    lambda: f64,
    energy: f64,
    mass: f64,
    grad_norm: f64,
    residual_inf: f64,
    morse_index: usize,
}

impl RecordSummary {
    fn new(path: PathBuf, r: &SolutionRecord) -> Self {
        Self {
            path,
            kind: r.kind.to_string(),
            lambda: r.lambda,
            energy: r.energy,
            mass: r.mass,
            grad_norm: r.grad_norm,
            residual_inf: r.residual_inf,
            morse_index: r.morse_index,
        }
    }
}

/// Runs the local solver and saves the exit iterate when it leaves `Σ_μ`.
fn local_min(ctx: &Run, s: &Setup, v: &Potential, grid: &Arc<RadialGrid<f64>>) -> Result<SolutionRecord> {
    match solve_local_min_with(&s.params, v, &s.geom, grid, None, &ctx.local_min_options()) {
        Err(Error::LeftSigma {
            iteration,
            grad_norm,
            t_mu,
            exit_iterate,
        }) => {
            let u = RadialField::new(grid.clone(), exit_iterate)?;
            let path = ctx.write("left_sigma_iterate.csv", &field_csv(&u)?)?;
            bail!(
                "iterate {iteration} left the gradient ball (|grad u| = {grad_norm} >= t_mu = {t_mu}); exit iterate in {}",
                path.display()
            )
        }
        other => Ok(other?),
    }
}

pub fn solve_local(ctx: &Run) -> Result<bool> {
    let v = ctx.potential()?;
    let s = ctx.setup(&v)?;
    let grid = ctx.grid(s.params.dimension)?;
    let lm = local_min(ctx, &s, &v, &grid)?;
    let path = ctx.save_record(&lm, "local_min")?;
    let summary = SolveSummary {
        geometry: s.geom,
        c: s.gn.value,
        records: vec![RecordSummary::new(path, &lm)],
        mp_geometry: None,
        path_trace: None,
    };
    emit(ctx, "solve_local.json", &summary)?;
    Ok(true)
}

pub fn solve_mp(ctx: &Run, from: Option<&Path>, certificate_samples: usize) -> Result<bool> {
    let v = ctx.potential()?;
    let s = ctx.setup(&v)?;
    let mut records = Vec::new();
    let lm = match from {
        Some(path) => {
            let r = SolutionRecord::load(path).with_context(|| format!("loading {}", path.display()))?;
            if r.params != s.params {
                bail!("{} was computed for different parameters", path.display());
            }
            r
        }
        None => {
            let grid = ctx.grid(s.params.dimension)?;
            let lm = local_min(ctx, &s, &v, &grid)?;
            records.push(RecordSummary::new(ctx.save_record(&lm, "local_min")?, &lm));
            lm
        }
    };
    let grid = lm.build_grid()?;
    let certificate = if certificate_samples > 0 {
        Some(check_mp_geometry(&s.params, &v, &s.geom, &grid, certificate_samples, ctx.config.seed)?)
    } else {
        None
    };
    let mp = solve_mountain_pass_with(&s.params, &v, &s.geom, &lm, &ctx.mountain_pass_options())?;
    records.push(RecordSummary::new(ctx.save_record(&mp, "mountain_pass")?, &mp));
    let mut trace = String::from("knot,energy\n");
    for (k, e) in mp.solver.path_energies.iter().enumerate() {
        writeln!(trace, "{k},{e:.16e}")?;
    }
    let trace_path = ctx.write("mp_path.csv", &trace)?;
    let summary = SolveSummary {
        geometry: s.geom,
        c: s.gn.value,
        records,
        mp_geometry: certificate,
        path_trace: Some(trace_path),
    };
    emit(ctx, "solve_mp.json", &summary)?;
    Ok(true)
}

#[derive(Serialize)]
struct SweepSummary {
    variable: SweepVariableConfig,
    branch: Branch,
    warm_start: bool,
    #[serde(rename = "C")]
    c: f64,
    points: Vec<SweepPointSummary>,
    lambda_range: Option<(f64, f64)>,
    trace: PathBuf,
}

#[derive(Serialize)]
struct SweepPointSummary {
    index: usize,
    mu: f64,
    rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    record: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Returns `false` when any point failed; every converged point is still
/// written.
pub fn sweep(ctx: &Run) -> Result<bool> {
    let v = ctx.potential()?;
    let s = ctx.setup(&v)?;
    let sw = &ctx.config.sweep;
    let values = linspace(sw.start, sw.end, sw.points);
    let list: Vec<EnergyParams> = match sw.variable {
        SweepVariableConfig::Mu => {
            if !s.geom.mu0.is_finite() {
                bail!("mu sweeps are given as fractions of mu0, which is infinite here");
            }
            values
                .iter()
                .map(|f| EnergyParams::new(s.params.dimension, s.params.q, s.params.rho, f * s.geom.mu0))
                .collect::<normsol::Result<_>>()?
        }
        SweepVariableConfig::Rho => values
            .iter()
            .map(|&rho| EnergyParams::new(s.params.dimension, s.params.q, rho, s.params.mu))
            .collect::<normsol::Result<_>>()?,
    };
    let opts = SweepOptions {
        branch: sw.branch,
        gn_constant: s.gn.value,
        local_min: ctx.local_min_options(),
        mountain_pass: ctx.mountain_pass_options(),
    };
    let grid = ctx.grid(s.params.dimension)?;
    let result = continuation_sweep(&list, &v, &grid, sw.warm_start, &opts)?;
    let mut points = Vec::new();
    for p in &result.points {
        let (record, error) = match &p.outcome {
            Ok(r) => (Some(ctx.save_record(r, &format!("sweep_{:03}", p.index))?), None),
            Err(e) => {
                eprintln!("sweep point {}: {e}", p.index);
                (None, Some(e.clone()))
            }
        };
        points.push(SweepPointSummary {
            index: p.index,
            mu: p.params.mu,
            rho: p.params.rho,
            record,
            error,
        });
    }
    let trace = ctx.write("sweep_trace.csv", &result.trace_csv())?;
    let summary = SweepSummary {
        variable: sw.variable,
        branch: sw.branch,
        warm_start: sw.warm_start,
        c: s.gn.value,
        points,
        lambda_range: result.lambda_range(),
        trace,
    };
    emit(ctx, "sweep.json", &summary)?;
    if result.failures().next().is_some() {
        bail!("{} of {} sweep points failed", result.failures().count(), result.points.len());
    }
    Ok(true)
}

#[derive(Serialize)]
struct Check<T> {
    passed: bool,
    #[serde(flatten)]
    detail: T,
}

#[derive(Serialize)]
struct ResidualCheck {
    residual_inf: f64,
    scale: f64,
    relative: f64,
    mass_error: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct PohozaevCheck {
    #[serde(flatten)]
    report: normsol::diagnostics::PohozaevReport,
    relative: f64,
    potential_bound_holds: bool,
    tolerance: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    record: PathBuf,
    kind: String,
    passed: bool,
    residual: Check<ResidualCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pohozaev: Option<Check<PohozaevCheck>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    blowup: Option<Check<normsol::diagnostics::BlowupReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decay: Option<normsol::diagnostics::DecayReport>,
}

pub struct VerifyArgs {
    pub pohozaev: Option<[f64; 2]>,
    pub blowup: bool,
    pub decay: Option<[f64; 2]>,
    pub eps: f64,
    pub classify_threshold: f64,
}

pub fn verify(ctx: &Run, records: &[PathBuf], args: &VerifyArgs) -> Result<bool> {
    if records.is_empty() {
        bail!("verify needs at least one record");
    }
    let tol = ctx.config.tolerances.verify;
    let mut all = true;
    for path in records {
        let r = SolutionRecord::load(path).with_context(|| format!("loading {}", path.display()))?;
        let u = r.field()?;
        let f = Functional::new(r.params, &r.potential, u.grid().clone())?;
        let residual_inf = f.residual(u.values(), r.lambda).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let scale = residual_scale(u.values(), r.params.q);
        let mass_error = (u.l2_norm() - r.params.mu).abs();
        let relative = residual_inf / scale;
        let residual = Check {
            passed: relative <= tol && mass_error <= tol * r.params.mu.max(1.0),
            detail: ResidualCheck {
                residual_inf,
                scale,
                relative,
                mass_error,
                tolerance: tol,
            },
        };
        let pohozaev = match args.pohozaev {
            Some([a, b]) => {
                let rep = pohozaev_report(&r.params, &r.potential, &u, r.lambda, a, b)?;
                let tol = ctx.config.tolerances.pohozaev;
                Some(Check {
                    passed: rep.relative() <= tol,
                    detail: PohozaevCheck {
                        relative: rep.relative(),
                        potential_bound_holds: rep.potential_bound_holds(),
                        report: rep,
                        tolerance: tol,
                    },
                })
            }
            None => None,
        };
        let blow = if args.blowup || args.decay.is_some() {
            Some(blowup_rescale_with(&r, args.classify_threshold)?)
        } else {
            None
        };
        let decay = match (args.decay, &blow) {
            (Some([gamma, r_far]), Some(b)) => {
                Some(decay_check(&r, b, gamma, r_far, args.eps)?)
            }
            _ => None,
        };
        let blowup = blow.filter(|_| args.blowup).map(|b| Check {
            passed: b.maxima_bound_holds(),
            detail: b,
        });
        let passed = residual.passed
            && pohozaev.as_ref().map_or(true, |c| c.passed)
            && blowup.as_ref().map_or(true, |c| c.passed)
            && decay.as_ref().map_or(true, |d| d.passed);
        all &= passed;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("record");
        let report = VerifyReport {
            record: path.clone(),
            kind: r.kind.to_string(),
            passed,
            residual,
            pohozaev,
            blowup,
            decay,
        };
        emit(ctx, &format!("{stem}.verify.json"), &report)?;
        if !passed {
            eprintln!("verification failed for {}", path.display());
        }
    }
    Ok(all)
}

#[derive(Serialize)]
struct ProfilesReport {
    q: f64,
    soliton_peak: f64,
    soliton_residual: normsol::diagnostics::profiles::SolitonResidual,
    norm_relation: normsol::diagnostics::profiles::NormRelation,
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_state: Option<GroundStateSummary>,
}

#[derive(Serialize)]
struct GroundStateSummary {
    #[serde(rename = "N")]
    dimension: usize,
    phi0: f64,
    matching_radius: f64,
    /// GN quotient at the ground state.
    quotient: f64,
    profile: PathBuf,
}

pub fn profiles(ctx: &Run, q: f64, dimension: Option<usize>, x_max: f64, intervals: usize) -> Result<bool> {
    let line = build_grid(1, x_max, intervals, Spacing::Uniform)?;
    let u = soliton_profile_1d(q, &line)?;
    ctx.write("soliton_1d.csv", &field_csv(&u)?)?;
    let ground_state = match dimension {
        Some(n) => {
            let grid = build_grid(n, x_max, intervals, Spacing::Uniform)?;
            let gs = ground_state_nd_with(n, q, &grid, ShootingOptions::default())?;
            let profile = ctx.write(&format!("ground_state_{n}d.csv"), &field_csv(&gs.profile)?)?;
            Some(GroundStateSummary {
                dimension: n,
                phi0: gs.phi0,
                matching_radius: gs.matching_radius,
                quotient: gn_quotient(&gs.profile, q)?,
                profile,
            })
        }
        None => None,
    };
    let report = ProfilesReport {
        q,
        soliton_peak: normsol::diagnostics::profiles::soliton_peak(q),
        soliton_residual: soliton_residual(q, &line)?,
        norm_relation: soliton_norm_relation(q, &line)?,
        ground_state,
    };
    emit(ctx, "profiles.json", &report)?;
    Ok(true)
}

/// `r, u, du` for a bare field.
fn field_csv(u: &RadialField<f64>) -> Result<String> {
    let grid = u.grid();
    let du = grid.radial_derivative(u)?;
    let mut s = String::from("r,u,du\n");
    for i in 0..grid.len() {
        writeln!(s, "{:.16e},{:.16e},{:.16e}", grid.nodes()[i], u.values()[i], du.values()[i])?;
    }
    Ok(s)
}

/// Writes `value` to `name` under the output directory and prints it.
fn emit<T: Serialize>(ctx: &Run, name: &str, value: &T) -> Result<()> {
    let text = normsol::json::to_string(value)?;
    ctx.write(name, &text)?;
    println!("{text}");
    Ok(())
}
