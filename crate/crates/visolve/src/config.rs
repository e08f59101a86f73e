//! Experiment configuration: one TOML file, every key overridable from the
//! command line as `--set section.key=value`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use visolve_core::{ScheduleKind, SolverKind};

use crate::error::{io_err, Error, Result};
use crate::ingest::fetch::sha256_hex;

pub const DEFAULT_FIRST_SEED: u64 = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Directory receiving traces, manifest and reference.
    pub output: PathBuf,
    pub problem: ProblemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularize: Option<RegularizeConfig>,
    pub solver: SolverSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub reference: ReferenceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemConfig {
    Affine(AffineConfig),
    Denoise(DenoiseConfig),
    Adversarial(AdversarialConfig),
}

impl ProblemConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemConfig::Affine(_) => "affine",
            ProblemConfig::Denoise(_) => "denoise",
            ProblemConfig::Adversarial(_) => "adversarial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineConfig {
    pub dim: usize,
    pub components: usize,
    pub mu: f64,
    pub lipschitz: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiseConfig {
    /// PGM file; the synthetic shapes picture of side `synthetic` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(default = "default_synthetic_side")]
    pub synthetic: usize,
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default = "default_seed")]
    pub noise_seed: u64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_block")]
    pub block: usize,
    #[serde(default = "default_h")]
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarialConfig {
    /// LIBSVM file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Known dataset name, read from `data_dir/<name>.libsvm` and fetched if missing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticData>,
    /// Declared feature count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<usize>,
    #[serde(default)]
    pub binary_labels: bool,
    pub lambda: f64,
    pub beta: f64,
    pub radius: f64,
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub samples: usize,
    pub features: usize,
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizeConfig {
    pub mu: f64,
    /// Defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CadenceConfig {
    Epoch,
    Iteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub kind: String,
    /// Step size; the default rule of the solver when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_prob: Option<f64>,
    #[serde(default = "default_cadence")]
    pub cadence: CadenceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_oracle_calls: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
}

impl SolverSection {
    pub fn solver_kind(&self) -> Result<SolverKind> {
        Ok(self.kind.parse()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_schedules")]
    pub schedules: Vec<String>,
    /// Explicit seeds; `seed_count` seeds starting at 50 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_seed_count")]
    pub seed_count: usize,
    /// Write the denoised images as PGM.
    #[serde(default)]
    pub save_images: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            schedules: default_schedules(),
            seeds: None,
            seed_count: default_seed_count(),
            save_images: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    #[serde(default = "default_reference_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Step of the reference run; `1/(6L̂)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            tol: default_reference_tol(),
            max_iterations: default_max_iterations(),
            gamma: None,
        }
    }
}

fn default_synthetic_side() -> usize {
    64
}
fn default_noise() -> f64 {
    0.05
}
fn default_seed() -> u64 {
    DEFAULT_FIRST_SEED
}
fn default_lambda() -> f64 {
    8.0
}
fn default_block() -> usize {
    8
}
fn default_h() -> f64 {
    1.0
}
fn default_density() -> f64 {
    0.2
}
fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}
fn default_cadence() -> CadenceConfig {
    CadenceConfig::Epoch
}
fn default_schedules() -> Vec<String> {
    vec!["rr".into(), "so".into(), "independent".into()]
}
fn default_seed_count() -> usize {
    1
}
fn default_reference_tol() -> f64 {
    1e-8
}
fn default_max_iterations() -> usize {
    1_000_000
}

/// Applies `a.b.c=value` overrides to a parsed table. The value is read as a
/// TOML value, falling back to a bare string.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for ov in overrides {
        let (key, raw) = ov
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{ov}` is not key=value")))?;
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
        let parts: Vec<&str> = key.trim().split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("bad override key `{key}`")));
        }
        let mut cur = &mut *table;
        for p in &parts[..parts.len() - 1] {
            let entry = cur
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a section")))?;
        }
        cur.insert(parts[parts.len() - 1].to_string(), value);
    }
    Ok(())
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        apply_overrides(&mut table, overrides)?;
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are taken relative to its directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_toml_str(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output);
        match &mut self.problem {
            ProblemConfig::Denoise(d) => {
                if let Some(p) = &mut d.image {
                    resolve(base, p);
                }
            }
            ProblemConfig::Adversarial(a) => {
                if let Some(p) = &mut a.data {
                    resolve(base, p);
                }
                resolve(base, &mut a.data_dir);
            }
            ProblemConfig::Affine(_) => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        let solver = self.solver.solver_kind()?;
        if solver != SolverKind::DetEg {
            if self.experiment.schedules.is_empty() {
                return Err(Error::Config("at least one schedule is required".into()));
            }
            self.schedules()?;
        }
        let seeds = self.seeds();
        if seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if let ProblemConfig::Adversarial(a) = &self.problem {
            let sources =
                a.data.is_some() as u8 + a.dataset.is_some() as u8 + a.synthetic.is_some() as u8;
            if sources != 1 {
                return Err(Error::Config(
                    "adversarial problem needs exactly one of `data`, `dataset`, `synthetic`"
                        .into(),
                ));
            }
        }
        Ok(())
    }

    /// Parsed schedule kinds, deduplicated in order of appearance.
    pub fn schedules(&self) -> Result<Vec<ScheduleKind>> {
        let mut out: Vec<ScheduleKind> = Vec::new();
        for s in &self.experiment.schedules {
            let k: ScheduleKind = s.parse()?;
            if out.contains(&k) {
                return Err(Error::Config(format!("schedule `{s}` listed twice")));
            }
            out.push(k);
        }
        Ok(out)
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.experiment.seeds {
            Some(s) => s.clone(),
            None => (0..self.experiment.seed_count as u64)
                .map(|k| DEFAULT_FIRST_SEED + k)
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Hash of the whole resolved configuration.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    /// Hash of the parts that determine the problem and its reference solution.
    pub fn problem_hash(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            problem: &'a ProblemConfig,
            regularize: &'a Option<RegularizeConfig>,
            reference: &'a ReferenceSection,
        }
        let text = toml::to_string(&Key {
            problem: &self.problem,
            regularize: &self.regularize,
            reference: &self.reference,
        })
        .expect("config serialises");
        sha256_hex(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const AFFINE: &str = r#"
output = "out"

[problem]
kind = "affine"
dim = 4
components = 3
mu = 1.0
lipschitz = 2.0

[solver]
kind = "eg"
epochs = 10
"#;

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::from_toml_str(AFFINE, &[]).unwrap();
        assert_eq!(cfg.seeds(), vec![50]);
        assert_eq!(cfg.schedules().unwrap().len(), 3);
        assert_eq!(cfg.reference.tol, 1e-8);
        assert_eq!(cfg.solver.cadence, CadenceConfig::Epoch);
        assert!(cfg.regularize.is_none());
    }

    #[test]
    fn overrides_reach_every_section() {
        let ov = [
            "solver.gamma=0.01",
            "experiment.seed_count=3",
            "experiment.schedules=[\"cyclic\"]",
            "problem.seed = 9",
            "regularize.mu=0.5",
            "output=elsewhere",
            "solver.cadence=iteration",
        ]
        .map(String::from);
        let cfg = ExperimentConfig::from_toml_str(AFFINE, &ov).unwrap();
        assert_eq!(cfg.solver.gamma, Some(0.01));
        assert_eq!(cfg.seeds(), vec![50, 51, 52]);
        assert_eq!(cfg.schedules().unwrap(), vec![ScheduleKind::Cyclic]);
        assert_eq!(cfg.output, PathBuf::from("elsewhere"));
        assert_eq!(cfg.solver.cadence, CadenceConfig::Iteration);
        match &cfg.problem {
            ProblemConfig::Affine(a) => assert_eq!(a.seed, 9),
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.regularize.as_ref().unwrap().mu, 0.5);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = |ov: &[&str]| {
            let ov: Vec<String> = ov.iter().map(|s| s.to_string()).collect();
            ExperimentConfig::from_toml_str(AFFINE, &ov).is_err()
        };
        assert!(bad(&["experiment.schedules=[]"]));
        assert!(bad(&["experiment.seed_count=0"]));
        assert!(bad(&["experiment.seeds=[1, 1]"]));
        assert!(bad(&["experiment.schedules=[\"rr\", \"rr\"]"]));
        assert!(bad(&["experiment.schedules=[\"random\"]"]));
        assert!(bad(&["solver.kind=sgd"]));
        assert!(bad(&["problem.kind=matrix"]));
        assert!(bad(&["problem.typo=1"]));
        assert!(bad(&["solver"]));
        assert!(bad(&["solver.kind.x=1"]));
        assert!(!bad(&["solver.kind=det-eg", "experiment.schedules=[]"]));
    }

    #[test]
    fn round_trip_and_hashes() {
        let cfg = ExperimentConfig::from_toml_str(AFFINE, &[]).unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(back, cfg);
        let other = ExperimentConfig::from_toml_str(AFFINE, &["solver.epochs=11".into()]).unwrap();
        assert_ne!(other.hash(), cfg.hash());
        assert_eq!(other.problem_hash(), cfg.problem_hash());
    }

    #[test]
    fn denoise_and_adversarial_sections() {
        let text = r#"
output = "o"
[problem]
kind = "denoise"
block = 4
[solver]
kind = "det-eg"
epochs = 5
"#;
        let cfg = ExperimentConfig::from_toml_str(text, &[]).unwrap();
        match cfg.problem {
            ProblemConfig::Denoise(d) => {
                assert_eq!((d.block, d.synthetic, d.lambda), (4, 64, 8.0));
            }
            other => panic!("{other:?}"),
        }
        let text = r#"
output = "o"
[problem]
kind = "adversarial"
lambda = 0.1
beta = 0.5
radius = 0.1
batch = 4
[problem.synthetic]
samples = 64
features = 5
[solver]
kind = "vr-eg"
epochs = 5
"#;
        let mut cfg = ExperimentConfig::from_toml_str(text, &[]).unwrap();
        cfg.resolve_paths(Path::new("/base"));
        assert_eq!(cfg.output, PathBuf::from("/base/o"));
        let both = ["problem.dataset=mushrooms".to_string()];
        assert!(ExperimentConfig::from_toml_str(text, &both).is_err());
    }
}
