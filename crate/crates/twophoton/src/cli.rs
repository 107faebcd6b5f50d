//! Command-line interface: argument parsing and the four subcommands.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use twophoton_core::framepipe::superpixel_pattern;
use twophoton_core::visibility::{
    check_complementarity, fit_fringe_visibility, fit_joint_visibility, FitOptions, FringeFit,
    JointFit, JointFitOptions,
};

use crate::bifr::Header;
use crate::config::{sidecar_path, ExperimentConfig};
use crate::error::{AppError, Result};
use crate::export::{
    write_counters_csv, write_fits_csv, write_histogram_csv, write_joint_csv, write_pattern_csv,
    write_pgm, FitRow,
};
use crate::model::{self, ModelPoint};
use crate::run::{self, Reduction};

#[derive(Debug, Parser)]
#[command(
    name = "twophoton",
    version,
    about = "One- and two-photon double-slit interference: model, simulation and frame analysis"
)]
pub struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Source-to-slit distance in metres; repeat for a sweep
    #[arg(long = "d", global = true)]
    pub d: Vec<f64>,
    #[arg(long, global = true)]
    pub frames: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the analytic detector patterns and visibilities
    Pattern,
    /// Simulate camera frames into a BIFR file with a .meta sidecar
    Simulate,
    /// Reduce a BIFR file to the coincidence estimate and fitted visibilities
    Analyze {
        /// Frame file; its .meta sidecar is used when --config is absent
        file: PathBuf,
    },
    /// Visibilities across source distances, with the ideal circle for comparison
    Sweep,
}

impl Cli {
    /// Builds the configuration: file (or sidecar), then flag overrides.
    pub fn resolve_config(&self) -> Result<ExperimentConfig> {
        let mut config = match (&self.config, &self.command) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Command::Analyze { file }) if sidecar_path(file).exists() => {
                ExperimentConfig::load(&sidecar_path(file))?
            }
            _ => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            config.camera.seed = seed;
        }
        if let Some(frames) = self.frames {
            config.frames = frames;
        }
        if let Some(threads) = self.threads {
            config.threads = threads;
        }
        match (&self.command, self.d.as_slice()) {
            (_, []) => {}
            (Command::Sweep, ds) => config.sweep_distances = ds.to_vec(),
            (_, [d]) => config.distance = *d,
            _ => return Err(AppError::Config("--d may repeat only for sweep".into())),
        }
        config.validate()?;
        Ok(config)
    }
}

fn out_dir(config: &ExperimentConfig) -> Result<&Path> {
    let dir = config.out_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    Ok(dir)
}

fn fit_row(id: &str, f: &FringeFit) -> FitRow {
    FitRow {
        id: id.into(),
        visibility: f.visibility,
        phase: f.phase,
        offset: f.offset,
        residual: f.residual,
    }
}

fn joint_row(id: &str, f: &JointFit) -> FitRow {
    FitRow {
        id: id.into(),
        visibility: f.v12,
        phase: 0.0,
        offset: f.a,
        residual: f.residual,
    }
}

#[derive(Debug, Clone)]
pub struct PatternReport {
    pub point: ModelPoint,
    pub v1_fit: FringeFit,
    pub v1m_fit: FringeFit,
    pub v12_fit: JointFit,
    pub files: Vec<PathBuf>,
}

pub fn cmd_pattern(config: &ExperimentConfig) -> Result<PatternReport> {
    let dir = out_dir(config)?;
    let point = model::evaluate(config, config.distance)?;
    let set = model::patterns(config, &point)?;
    let period = config.period();
    let env = if config.envelope {
        Some(model::envelope(config)?)
    } else {
        None
    };
    let options = FitOptions {
        envelope: env.as_deref(),
        ..FitOptions::default()
    };
    let v1_fit = fit_fringe_visibility(&set.intensity, period, &options)?;
    let v1m_fit = fit_fringe_visibility(&set.marginal, period, &options)?;
    let v12_fit = fit_joint_visibility(&set.excess, period, &JointFitOptions::default())?;

    let files = vec![
        dir.join("intensity.csv"),
        dir.join("coincidence.csv"),
        dir.join("marginal.csv"),
        dir.join("excess.csv"),
        dir.join("coincidence.pgm"),
        dir.join("excess.pgm"),
        dir.join("visibility.csv"),
    ];
    write_pattern_csv(&files[0], &set.intensity)?;
    write_joint_csv(&files[1], &set.coincidence)?;
    write_pattern_csv(&files[2], &set.marginal)?;
    write_joint_csv(&files[3], &set.excess)?;
    write_pgm(&files[4], set.coincidence.values())?;
    write_pgm(&files[5], set.excess.values())?;
    write_fits_csv(
        &files[6],
        &[
            fit_row("intensity", &v1_fit),
            fit_row("marginal", &v1m_fit),
            joint_row("excess", &v12_fit),
        ],
    )?;
    Ok(PatternReport {
        point,
        v1_fit,
        v1m_fit,
        v12_fit,
        files,
    })
}

impl fmt::Display for PatternReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.point;
        let v = &p.visibilities;
        writeln!(f, "d = {} m", p.distance)?;
        writeln!(f, "psi_A = {:.9}", p.psi)?;
        writeln!(f, "g1_A  = {:.9}", p.g1)?;
        writeln!(
            f,
            "direct pair ratio = {:.9}{:+.3e}i{}",
            p.direct_psi.re,
            p.direct_psi.im,
            if p.exchanged {
                " (exchanged orientation)"
            } else {
                ""
            }
        )?;
        writeln!(
            f,
            "analytic  V1 = {:.6}  V1m = {:.6}  V12 = {:.6}",
            v.v1, v.v1m, v.v12
        )?;
        writeln!(
            f,
            "fitted    V1 = {:.6}  V1m = {:.6}  V12 = {:.6}",
            self.v1_fit.signed_visibility(),
            self.v1m_fit.signed_visibility(),
            self.v12_fit.v12
        )?;
        write!(f, "wrote {} files", self.files.len())
    }
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub path: PathBuf,
    pub header: Header,
    pub seed: u64,
}

pub fn cmd_simulate(config: &ExperimentConfig) -> Result<SimulateReport> {
    let dir = out_dir(config)?;
    let path = dir.join("frames.bifr");
    let sim = run::simulator(config)?;
    let file = File::create(&path).map_err(|e| AppError::io(&path, e))?;
    let out = BufWriter::with_capacity(1 << 20, file);
    run::with_threads(config.threads, || {
        run::generate_run(&sim, config.frames, out)
    })??;
    let meta = sidecar_path(&path);
    fs::write(&meta, config.to_kv()).map_err(|e| AppError::io(&meta, e))?;
    let header = run::inspect(&path)?;
    Ok(SimulateReport {
        path,
        header,
        seed: config.camera.seed,
    })
}

impl fmt::Display for SimulateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "wrote {} frames of {}x{} to {} ({} bytes, seed {})",
            self.header.frames,
            self.header.width,
            self.header.height,
            self.path.display(),
            self.header.file_len(),
            self.seed
        )
    }
}

#[derive(Debug, Clone)]
pub struct AnalyzeReport {
    pub reduction: Reduction,
    pub files: Vec<PathBuf>,
}

/// Writes the estimate, marginals, counters and fits of a reduction.
pub fn write_reduction(
    dir: &Path,
    config: &ExperimentConfig,
    r: &Reduction,
    singles: &[u64],
) -> Result<Vec<PathBuf>> {
    let files = vec![
        dir.join("estimate.csv"),
        dir.join("estimate_marginal.csv"),
        dir.join("singles.csv"),
        dir.join("excess_estimate.csv"),
        dir.join("estimate_superpixel.pgm"),
        dir.join("excess_superpixel.pgm"),
        dir.join("counters.csv"),
        dir.join("visibility.csv"),
    ];
    write_joint_csv(&files[0], &r.estimate)?;
    write_pattern_csv(&files[1], &r.marginal)?;
    write_histogram_csv(&files[2], r.estimate.grid(), singles)?;
    write_joint_csv(&files[3], &r.excess)?;
    write_pgm(
        &files[4],
        superpixel_pattern(&r.estimate, config.superpixel)?.values(),
    )?;
    write_pgm(
        &files[5],
        superpixel_pattern(&r.excess, config.superpixel)?.values(),
    )?;
    write_counters_csv(&files[6], &r.counters)?;
    let mut rows = vec![
        fit_row("estimate_marginal", &r.v1m),
        joint_row("excess_estimate", &r.v12),
    ];
    if let Some(v1) = &r.v1_singles {
        rows.push(fit_row("singles", v1));
    }
    write_fits_csv(&files[7], &rows)?;
    Ok(files)
}

pub fn cmd_analyze(file: &Path, config: &ExperimentConfig) -> Result<AnalyzeReport> {
    let dir = out_dir(config)?;
    let acc = run::with_threads(config.threads, || run::accumulate_file(file, config))??;
    let reduction = run::reduce(&acc, config)?;
    let files = write_reduction(dir, config, &reduction, acc.singles())?;
    Ok(AnalyzeReport { reduction, files })
}

impl fmt::Display for AnalyzeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.reduction;
        let c = &r.counters;
        writeln!(
            f,
            "frames {}: empty {}, single {}, pair {}, rejected pair {}, multi {}",
            c.total, c.empty, c.single, c.pair, c.rejected, c.multi
        )?;
        writeln!(
            f,
            "fitted V1m = {:.4}  V12 = {:.4}",
            r.v1m.signed_visibility(),
            r.v12.v12
        )?;
        if let Some(v1) = &r.v1_singles {
            writeln!(f, "singles histogram V1 = {:.4}", v1.signed_visibility())?;
        }
        if let Some(t) = &r.singles_test {
            writeln!(
                f,
                "marginal vs singles: chi2 = {:.2} ({} dof), p = {:.4}",
                t.statistic, t.dof, t.p_value
            )?;
        }
        write!(f, "wrote {} files", self.files.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub distance: f64,
    pub g1: f64,
    pub psi: f64,
    pub v1: f64,
    pub v1m: f64,
    pub v12: f64,
    /// `|V1m² + V12² - 1|` of the analytic point.
    pub residual: f64,
    /// Monte Carlo `(V1m, V12)` when enabled.
    pub monte_carlo: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub files: Vec<PathBuf>,
}

/// Analytic sweep row for one distance.
pub fn sweep_point(config: &ExperimentConfig, distance: f64) -> Result<SweepRow> {
    let p = model::evaluate(config, distance)?;
    let v = p.visibilities;
    Ok(SweepRow {
        distance,
        g1: p.g1,
        psi: p.psi,
        v1: v.v1,
        v1m: v.v1m,
        v12: v.v12,
        residual: check_complementarity(&v, 0.0).residual,
        monte_carlo: None,
    })
}

/// Simulates and reduces `config.frames` frames in memory at `distance`.
pub fn monte_carlo_point(config: &ExperimentConfig, distance: f64) -> Result<Reduction> {
    let mut c = config.clone();
    c.distance = distance;
    let sim = run::simulator(&c)?;
    let acc = run::with_threads(c.threads, || run::accumulate_simulated(&sim, c.frames, &c))??;
    run::reduce(&acc, &c)
}

pub fn cmd_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    let dir = out_dir(config)?;
    let mut rows = Vec::new();
    for &d in &config.sweep_distances {
        let mut row = sweep_point(config, d)?;
        if config.sweep_monte_carlo {
            let r = monte_carlo_point(config, d)?;
            row.monte_carlo = Some((r.v1m.signed_visibility(), r.v12.v12));
        }
        rows.push(row);
    }
    let points = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&points)?;
    w.write_record([
        "d_m", "g1", "psi", "V1", "V1m", "V12", "residual", "mc_V1m", "mc_V12",
    ])?;
    for r in &rows {
        let (a, b) = r
            .monte_carlo
            .map_or((String::new(), String::new()), |(a, b)| {
                (a.to_string(), b.to_string())
            });
        w.write_record([
            r.distance.to_string(),
            r.g1.to_string(),
            r.psi.to_string(),
            r.v1.to_string(),
            r.v1m.to_string(),
            r.v12.to_string(),
            r.residual.to_string(),
            a,
            b,
        ])?;
    }
    w.flush().map_err(|e| AppError::io(&points, e))?;

    let circle = dir.join("circle.csv");
    let mut w = csv::Writer::from_path(&circle)?;
    w.write_record(["V12", "V1m"])?;
    for k in 0..=200 {
        let t = std::f64::consts::FRAC_PI_2 * k as f64 / 200.0;
        w.write_record([t.cos().to_string(), t.sin().to_string()])?;
    }
    w.flush().map_err(|e| AppError::io(&circle, e))?;
    Ok(SweepReport {
        rows,
        files: vec![points, circle],
    })
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>8} {:>9} {:>9} {:>9} {:>10}  monte carlo (V1m, V12)",
            "d [m]", "g1", "V1m", "V12", "residual"
        )?;
        for r in &self.rows {
            write!(
                f,
                "{:>8.3} {:>9.5} {:>9.5} {:>9.5} {:>10.2e}",
                r.distance, r.g1, r.v1m, r.v12, r.residual
            )?;
            match r.monte_carlo {
                Some((a, b)) => writeln!(f, "  ({a:.4}, {b:.4})")?,
                None => writeln!(f)?,
            }
        }
        write!(f, "wrote {} files", self.files.len())
    }
}

/// Runs a parsed command line and prints its report.
pub fn execute(cli: &Cli) -> Result<()> {
    let config = cli.resolve_config()?;
    match &cli.command {
        Command::Pattern => println!("{}", cmd_pattern(&config)?),
        Command::Simulate => println!("{}", cmd_simulate(&config)?),
        Command::Analyze { file } => println!("{}", cmd_analyze(file, &config)?),
        Command::Sweep => println!("{}", cmd_sweep(&config)?),
    }
    Ok(())
}
