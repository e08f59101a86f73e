//! Builds the configured problem, runs every (schedule, seed) cell and writes
//! traces plus a manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use visolve_core::analysis::compute_reference;
use visolve_core::dataset::SparseDataset;
use visolve_core::image::{synthetic_shapes, GrayImage};
use visolve_core::problems::{
    make_adversarial, make_affine_saddle, make_denoising, regularize_operator, AdversarialSpec,
    AffineSaddleSpec, DenoisingSpec,
};
use visolve_core::solver::{
    default_step_eg, default_step_vr, run_deterministic_eg, run_eg, run_vr_eg,
};
use visolve_core::trace::records_from_csv;
use visolve_core::{
    Cadence, ConstantSource, FiniteSumVI, RunTrace, Schedule, ScheduleKind, SolverConfig,
    SolverKind, StopRule, TraceMeta,
};

use crate::config::{CadenceConfig, ExperimentConfig, ProblemConfig};
use crate::error::{io_err, Error, Result};
use crate::ingest::fetch::{dataset_info, dataset_path, fetch_dataset, sha256_hex};
use crate::ingest::libsvm::{load_libsvm, LibsvmOptions};
use crate::ingest::pgm::{read_pgm, save_pgm, PgmEncoding};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const REFERENCE_FILE: &str = "reference.txt";
/// Schedule label of deterministic runs.
pub const FULL_LABEL: &str = "full";

/// A built problem plus the images of a denoising run.
pub struct Prepared {
    pub problem: FiniteSumVI,
    pub images: Option<DenoiseImages>,
}

pub struct DenoiseImages {
    /// Present for the synthetic picture only.
    pub clean: Option<GrayImage>,
    pub noisy: GrayImage,
}

fn load_dataset(cfg: &crate::config::AdversarialConfig) -> Result<SparseDataset> {
    if let Some(s) = &cfg.synthetic {
        return Ok(SparseDataset::synthetic_regression(
            s.samples, s.features, s.density, s.noise, s.seed,
        )?);
    }
    let mut opts = LibsvmOptions {
        dim: cfg.features,
        binary_labels: cfg.binary_labels,
    };
    let path = match (&cfg.data, &cfg.dataset) {
        (Some(p), _) => p.clone(),
        (None, Some(name)) => {
            let info = dataset_info(name)
                .ok_or_else(|| Error::Config(format!("unknown dataset `{name}`")))?;
            opts.dim = opts.dim.or(Some(info.features));
            let p = dataset_path(&cfg.data_dir, name);
            if !p.exists() {
                fetch_dataset(name, &cfg.data_dir)?;
            }
            p
        }
        (None, None) => return Err(Error::Config("adversarial problem has no data".into())),
    };
    load_libsvm(&path, &opts)
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Prepared> {
    let (mut problem, images) = match &cfg.problem {
        ProblemConfig::Affine(a) => {
            let p = make_affine_saddle(&AffineSaddleSpec {
                dim: a.dim,
                components: a.components,
                mu: a.mu,
                lipschitz: a.lipschitz,
                seed: a.seed,
            })?;
            (p, None)
        }
        ProblemConfig::Denoise(d) => {
            let (clean, base) = match &d.image {
                Some(path) => (None, read_pgm(path)?),
                None => {
                    let img = synthetic_shapes(d.synthetic, d.synthetic)?;
                    (Some(img.clone()), img)
                }
            };
            let noisy = base.add_gaussian_noise(d.noise_sigma, d.noise_seed)?;
            let p = make_denoising(&DenoisingSpec {
                noisy: noisy.clone(),
                lambda: d.lambda,
                block: d.block,
                h: d.h,
            })?;
            let clean = clean.or(if d.noise_sigma > 0.0 {
                Some(base)
            } else {
                None
            });
            (p, Some(DenoiseImages { clean, noisy }))
        }
        ProblemConfig::Adversarial(a) => {
            let data = load_dataset(a)?;
            let p = make_adversarial(&AdversarialSpec {
                data,
                lambda: a.lambda,
                beta: a.beta,
                radius: a.radius,
                batch: a.batch,
            })?;
            if p.constants().mu().is_none() {
                log::warn!(
                    "sampled strong monotonicity is not positive at beta = {}; bounds cannot be checked",
                    a.beta
                );
            }
            (p, None)
        }
    };
    if let Some(r) = &cfg.regularize {
        let anchor = r.anchor.clone().unwrap_or_else(|| vec![0.0; problem.dim()]);
        problem = regularize_operator(&problem, r.mu, &anchor)?;
    }
    Ok(Prepared { problem, images })
}

pub fn write_reference(path: &Path, problem: &FiniteSumVI, key: &str) -> Result<()> {
    let r = problem
        .reference()
        .ok_or(Error::Core(visolve_core::Error::MissingReference))?;
    let mut text = String::with_capacity(24 * r.point.len() + 128);
    let _ = writeln!(text, "# problem {key}");
    let _ = writeln!(text, "# tol {}", r.tolerance);
    let _ = writeln!(text, "# gamma {}", r.gamma);
    for v in &r.point {
        let _ = writeln!(text, "{v}");
    }
    fs::write(path, text).map_err(io_err(path))
}

/// `(key, point, tol, gamma)` from a file written by [`write_reference`].
pub fn read_reference(path: &Path) -> Result<(String, Vec<f64>, f64, f64)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |what: &str| Error::Manifest(format!("{}: bad {what}", path.display()));
    let mut lines = text.lines();
    let mut header = |tag: &str| {
        lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .and_then(|l| l.strip_prefix(tag))
            .map(|l| l.trim().to_string())
            .ok_or_else(|| bad(tag))
    };
    let key = header("problem")?;
    let tol = header("tol")?.parse().map_err(|_| bad("tol"))?;
    let gamma = header("gamma")?.parse().map_err(|_| bad("gamma"))?;
    let point = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse().map_err(|_| bad("value")))
        .collect::<Result<Vec<f64>>>()?;
    Ok((key, point, tol, gamma))
}

fn cached_reference(cfg: &ExperimentConfig, problem: &FiniteSumVI) -> Option<FiniteSumVI> {
    let path = cfg.output.join(REFERENCE_FILE);
    let (key, point, tol, gamma) = read_reference(&path).ok()?;
    if key != cfg.problem_hash() || point.len() != problem.dim() {
        return None;
    }
    match problem.clone().with_reference(point, tol, gamma) {
        Ok(p) => Some(p),
        Err(e) => {
            log::warn!("ignoring cached reference: {e}");
            None
        }
    }
}

/// Attaches a reference solution: the exact one when the builder knows it,
/// else the cached file in the output directory, else a fresh deterministic run.
/// With `force`, a run always happens (starting from the cached point) and the
/// file is rewritten.
pub fn ensure_reference(
    cfg: &ExperimentConfig,
    problem: FiniteSumVI,
    force: bool,
) -> Result<FiniteSumVI> {
    if problem.reference().is_some() && !force {
        return Ok(problem);
    }
    let start = cached_reference(cfg, &problem);
    if let (Some(p), false) = (&start, force) {
        log::info!("using cached reference");
        return Ok(p.clone());
    }
    let start = start.unwrap_or(problem);
    log::info!("computing reference to tolerance {:e}", cfg.reference.tol);
    let out = compute_reference(
        &start,
        cfg.reference.tol,
        cfg.reference.max_iterations,
        cfg.reference.gamma,
    )?;
    fs::create_dir_all(&cfg.output).map_err(io_err(&cfg.output))?;
    write_reference(&cfg.output.join(REFERENCE_FILE), &out, &cfg.problem_hash())?;
    Ok(out)
}

/// Solver kind and configuration with defaults resolved against the problem.
pub fn solver_config(
    cfg: &ExperimentConfig,
    problem: &FiniteSumVI,
) -> Result<(SolverKind, SolverConfig)> {
    let s = &cfg.solver;
    let kind = s.solver_kind()?;
    let n = problem.len();
    let mut sc = SolverConfig::new(1.0, s.epochs);
    if kind == SolverKind::VrEg {
        sc = sc.with_vr_defaults(n);
    }
    if let Some(a) = s.alpha {
        sc.alpha = a;
    }
    if let Some(p) = s.snapshot_prob {
        sc.snapshot_prob = p;
    }
    sc.cadence = match s.cadence {
        CadenceConfig::Epoch => Cadence::EveryEpoch,
        CadenceConfig::Iteration => Cadence::EveryIteration,
    };
    sc.stop = StopRule {
        max_oracle_calls: s.max_oracle_calls,
        residual_tol: s.residual_tol,
    };
    let c = problem.constants();
    sc.gamma = match s.gamma {
        Some(g) => g,
        None => {
            let need = |v: Option<f64>, what: &str| {
                v.filter(|x| *x > 0.0).ok_or_else(|| {
                    Error::Config(format!(
                        "no default step without a positive {what}; set solver.gamma"
                    ))
                })
            };
            let l = need(c.l(), "Lipschitz constant")?;
            match kind {
                SolverKind::Eg => default_step_eg(need(c.mu(), "strong monotonicity")?, l, n)?,
                SolverKind::VrEg => {
                    default_step_vr(need(c.mu(), "strong monotonicity")?, l, sc.alpha)?
                }
                SolverKind::DetEg => 1.0 / (6.0 * l),
            }
        }
    };
    sc.validate()?;
    Ok((kind, sc))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub schedule: Option<ScheduleKind>,
    pub seed: u64,
}

impl Cell {
    pub fn label(&self) -> &'static str {
        self.schedule.map_or(FULL_LABEL, ScheduleKind::as_str)
    }

    pub fn stem(&self) -> String {
        format!("{}_seed{}", self.label(), self.seed)
    }
}

pub fn cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let seeds = cfg.seeds();
    let schedules: Vec<Option<ScheduleKind>> = if cfg.solver.solver_kind()? == SolverKind::DetEg {
        vec![None]
    } else {
        cfg.schedules()?.into_iter().map(Some).collect()
    };
    Ok(schedules
        .iter()
        .flat_map(|&schedule| seeds.iter().map(move |&seed| Cell { schedule, seed }))
        .collect())
}

pub fn run_cell(
    problem: &FiniteSumVI,
    kind: SolverKind,
    config: &SolverConfig,
    cell: &Cell,
) -> Result<RunTrace> {
    let config = config.clone().with_seed(cell.seed);
    let trace = match (kind, cell.schedule) {
        (SolverKind::DetEg, _) => run_deterministic_eg(problem, &config)?,
        (_, None) => return Err(Error::Config("stochastic solver needs a schedule".into())),
        (k, Some(s)) => {
            let mut schedule = Schedule::new(s, problem.len(), cell.seed)?;
            if k == SolverKind::Eg {
                run_eg(problem, &mut schedule, &config)?
            } else {
                run_vr_eg(problem, &mut schedule, &config)?
            }
        }
    };
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub kind: String,
    pub dim: usize,
    pub components: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strong_monotonicity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strong_monotonicity_source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_star_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub kind: String,
    pub gamma: f64,
    pub alpha: f64,
    pub snapshot_prob: f64,
    pub epochs: usize,
    pub steps_per_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub schedule: String,
    pub seed: u64,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_calls: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_sq_dist: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
}

impl CellEntry {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub visolve_version: String,
    pub config_hash: String,
    pub environment: Environment,
    pub problem: ProblemSummary,
    pub solver: SolverSummary,
    pub cells: Vec<CellEntry>,
    pub files: Vec<FileEntry>,
    /// The resolved configuration.
    pub config: String,
}

fn source_name(s: ConstantSource) -> String {
    format!("{s:?}").to_lowercase()
}

fn summarize(kind: &str, problem: &FiniteSumVI) -> ProblemSummary {
    let c = problem.constants();
    ProblemSummary {
        kind: kind.to_string(),
        dim: problem.dim(),
        components: problem.len(),
        lipschitz: c.l(),
        lipschitz_source: c.lipschitz.map(|c| source_name(c.source)),
        strong_monotonicity: c.mu(),
        strong_monotonicity_source: c.strong_monotonicity.map(|c| source_name(c.source)),
        sigma_star_sq: c.sigma_sq(),
        reference_tol: problem.reference().map(|r| r.tolerance),
        reference_gamma: problem.reference().map(|r| r.gamma),
    }
}

struct Writer<'a> {
    root: &'a Path,
    files: Vec<FileEntry>,
}

impl Writer<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.files.push(FileEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }
}

fn reset_dir(path: &Path) -> Result<()> {
    if path.exists() {
        fs::remove_dir_all(path).map_err(io_err(path))?;
    }
    fs::create_dir_all(path).map_err(io_err(path))
}

fn image_of(z: &[f64], like: &GrayImage) -> Result<GrayImage> {
    let hw = like.height() * like.width();
    Ok(GrayImage::new(
        like.height(),
        like.width(),
        z[..hw].to_vec(),
    )?)
}

/// Runs every cell (in parallel), then writes traces, optional images and the
/// manifest from a single thread. A failing cell is recorded and the others proceed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest> {
    let Prepared { problem, images } = build_problem(cfg)?;
    let problem = ensure_reference(cfg, problem, false)?;
    let (kind, solver) = solver_config(cfg, &problem)?;
    let cells = cells(cfg)?;
    log::info!(
        "{} cells, n = {}, d = {}, gamma = {:e}",
        cells.len(),
        problem.len(),
        problem.dim(),
        solver.gamma
    );
    let results: Vec<Result<RunTrace>> = cells
        .par_iter()
        .map(|cell| {
            let r = run_cell(&problem, kind, &solver, cell);
            log::info!("cell {} done", cell.stem());
            r
        })
        .collect();

    let root = cfg.output.as_path();
    fs::create_dir_all(root).map_err(io_err(root))?;
    reset_dir(&root.join("traces"))?;
    let save_images = cfg.experiment.save_images && images.is_some();
    if save_images {
        reset_dir(&root.join("images"))?;
    }
    let mut w = Writer {
        root,
        files: Vec::new(),
    };
    let ref_path = root.join(REFERENCE_FILE);
    if ref_path.exists() {
        let bytes = fs::read(&ref_path).map_err(io_err(&ref_path))?;
        w.files.push(FileEntry {
            path: REFERENCE_FILE.into(),
            sha256: sha256_hex(&bytes),
        });
    }
    if let (true, Some(img)) = (save_images, &images) {
        w.write(
            "images/noisy.pgm",
            &save_pgm(&img.noisy, PgmEncoding::Raw, 255)?,
        )?;
        if let Some(clean) = &img.clean {
            w.write("images/clean.pgm", &save_pgm(clean, PgmEncoding::Raw, 255)?)?;
        }
    }
    let mut entries = Vec::with_capacity(cells.len());
    let mut steps_per_epoch = if kind == SolverKind::DetEg {
        1
    } else {
        problem.len()
    };
    for (cell, result) in cells.iter().zip(results) {
        let mut entry = CellEntry {
            schedule: cell.label().to_string(),
            seed: cell.seed,
            status: "ok".into(),
            trace: None,
            error: None,
            oracle_calls: None,
            final_sq_dist: None,
            final_residual: None,
            image: None,
            psnr: None,
        };
        match result {
            Ok(trace) => {
                steps_per_epoch = trace.meta.steps_per_epoch;
                let rel = format!("traces/{}.csv", cell.stem());
                w.write(&rel, trace.to_csv().as_bytes())?;
                entry.trace = Some(rel);
                entry.oracle_calls = Some(trace.oracle_calls());
                entry.final_sq_dist = trace.last().and_then(|r| r.sq_dist);
                entry.final_residual = trace.last().map(|r| r.residual);
                if let Some(img) = &images {
                    let u = image_of(&trace.final_iterate, &img.noisy)?;
                    if let Some(clean) = &img.clean {
                        entry.psnr = Some(u.psnr(clean)?);
                    }
                    if save_images {
                        let rel = format!("images/{}.pgm", cell.stem());
                        w.write(&rel, &save_pgm(&u, PgmEncoding::Raw, 255)?)?;
                        entry.image = Some(rel);
                    }
                }
            }
            Err(e) => {
                log::error!("cell {} failed: {e}", cell.stem());
                entry.status = "error".into();
                entry.error = Some(e.to_string());
            }
        }
        entries.push(entry);
    }
    let manifest = Manifest {
        visolve_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        environment: Environment {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads: rayon::current_num_threads(),
        },
        problem: summarize(cfg.problem.kind(), &problem),
        solver: SolverSummary {
            kind: kind.as_str().into(),
            gamma: solver.gamma,
            alpha: solver.alpha,
            snapshot_prob: solver.snapshot_prob,
            epochs: solver.epochs,
            steps_per_epoch,
        },
        cells: entries,
        files: w.files,
        config: cfg.to_toml(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Manifest(e.to_string()))?;
    let path = root.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    toml::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
}

/// Re-hashes every file listed in the manifest.
pub fn verify_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    for f in &manifest.files {
        let path = dir.join(&f.path);
        let got = sha256_hex(&fs::read(&path).map_err(io_err(&path))?);
        if got != f.sha256 {
            return Err(Error::Checksum {
                path,
                expected: f.sha256.clone(),
                got,
            });
        }
    }
    for c in manifest.cells.iter().filter(|c| c.is_ok()) {
        match &c.trace {
            Some(t) if manifest.files.iter().any(|f| &f.path == t) => {}
            _ => {
                return Err(Error::Manifest(format!(
                    "cell {} seed {} has no listed trace",
                    c.schedule, c.seed
                )))
            }
        }
    }
    Ok(())
}

/// Traces of the successful cells, with metadata taken from the manifest.
pub fn load_traces(dir: &Path, manifest: &Manifest) -> Result<Vec<(CellEntry, RunTrace)>> {
    let solver: SolverKind = manifest.solver.kind.parse()?;
    let mut out = Vec::new();
    for c in manifest.cells.iter().filter(|c| c.is_ok()) {
        let rel = c
            .trace
            .as_ref()
            .ok_or_else(|| Error::Manifest(format!("cell {} has no trace", c.schedule)))?;
        let path: PathBuf = dir.join(rel);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let records = records_from_csv(&text)?;
        let schedule = if c.schedule == FULL_LABEL {
            None
        } else {
            Some(c.schedule.parse()?)
        };
        out.push((
            c.clone(),
            RunTrace {
                meta: TraceMeta {
                    solver,
                    schedule,
                    gamma: manifest.solver.gamma,
                    seed: c.seed,
                    steps_per_epoch: manifest.solver.steps_per_epoch,
                },
                records,
                final_iterate: Vec::new(),
                final_snapshot: None,
                stopped: None,
            },
        ));
    }
    Ok(out)
}
