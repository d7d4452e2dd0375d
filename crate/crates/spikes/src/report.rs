//! Run configuration, experiment artifacts, and the ground-state cache.
//!
//! A run is described by one TOML file. The same struct round-trips
//! through serialization unchanged, and its canonical serialization is
//! hashed into every ledger row, so a row can always be traced back to the
//! exact configuration that produced it. Ladder results land in three
//! artifacts per run directory: a CSV ledger with one row per rung (frozen
//! columns, floats at fixed precision, no timestamps, nothing
//! nondeterministic), a JSON dump of the full report, and the certificates
//! alone for quick inspection.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{Domain, Shape};
use crate::error::{Error, Result};
use crate::ground_state::{solve_ground_state, GroundState};
use crate::ladder::{LadderOptions, LadderReport};
use crate::reduction::ReduceParams;
use crate::search::DEFAULT_PACKING_DELTA;

/// Cache directory override, consulted when the config does not set one.
pub const CACHE_DIR_ENV: &str = "SPIKES_CACHE_DIR";

/// Domain descriptor as written in run files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum ShapeConfig {
    Interval { a: f64, b: f64 },
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    Disk { cx: f64, cy: f64, r: f64 },
}

impl ShapeConfig {
    pub fn shape(&self) -> Shape {
        match *self {
            ShapeConfig::Interval { a, b } => Shape::Interval { a, b },
            ShapeConfig::Rectangle { x0, x1, y0, y1 } => Shape::Rectangle { x0, x1, y0, y1 },
            ShapeConfig::Disk { cx, cy, r } => Shape::Disk { cx, cy, r },
        }
    }
}

fn default_eta() -> f64 {
    0.5
}
fn default_delta() -> f64 {
    DEFAULT_PACKING_DELTA
}
fn default_tol_fp() -> f64 {
    1e-10
}
fn default_tol_orth() -> f64 {
    1e-9
}
fn default_max_iterations() -> usize {
    60
}
fn default_max_sweeps() -> usize {
    400
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_r_max() -> f64 {
    40.0
}
fn default_tol_ode() -> f64 {
    1e-8
}

/// Everything one invocation needs. Optional fields fall back to the
/// documented defaults, so a minimal file is just the domain, p, epsilon,
/// h, and rho.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub domain: ShapeConfig,
    pub p: f64,
    pub epsilon: f64,
    /// Mesh width in rescaled units.
    pub h: f64,
    /// Separation parameter of the configuration space.
    pub rho: f64,
    /// Decay rate of the *-norm weight.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Packing budget multiplier.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Stop the ladder at this count; absent means run to exhaustion.
    #[serde(default)]
    pub k_target: Option<usize>,
    #[serde(default = "default_tol_fp")]
    pub tol_fp: f64,
    #[serde(default = "default_tol_orth")]
    pub tol_orth: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    /// Radial extent of the ground-state table.
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    /// ODE tolerance of the ground-state solve.
    #[serde(default = "default_tol_ode")]
    pub tol_ode: f64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Only perturbation experiments draw from this.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Explicit spike positions for the single-configuration commands.
    #[serde(default)]
    pub spikes: Vec<[f64; 2]>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut complaints = Vec::new();
        if !(self.p > 1.0) {
            complaints.push(format!("p = {} must exceed 1", self.p));
        }
        if !(self.epsilon > 0.0) {
            complaints.push(format!("epsilon = {} must be positive", self.epsilon));
        }
        if !(self.h > 0.0) {
            complaints.push(format!("h = {} must be positive", self.h));
        }
        if !(self.rho > 1.0) {
            complaints.push(format!("rho = {} must exceed 1", self.rho));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            complaints.push(format!("eta = {} must lie in (0, 1]", self.eta));
        }
        if !(self.delta > 0.0) {
            complaints.push(format!("delta = {} must be positive", self.delta));
        }
        if !(self.tol_fp > 0.0 && self.tol_orth > 0.0 && self.tol_ode > 0.0) {
            complaints.push("tolerances must be positive".into());
        }
        if !(self.r_max > 10.0) {
            complaints.push(format!("r_max = {} too small for a usable tail", self.r_max));
        }
        if complaints.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigParse(complaints.join("; ")))
        }
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::new(self.domain.shape(), self.epsilon)
    }

    pub fn reduce_params(&self) -> ReduceParams {
        ReduceParams {
            eta: self.eta,
            tol_fp: self.tol_fp,
            tol_orth: self.tol_orth,
            max_iterations: self.max_iterations,
        }
    }

    pub fn ladder_options(&self) -> LadderOptions {
        LadderOptions {
            rho: self.rho,
            delta: self.delta,
            k_target: self.k_target,
            max_sweeps: self.max_sweeps,
            params: self.reduce_params(),
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    /// Stable across processes, so identical configs stamp identical rows.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(16);
        for byte in &digest[..8] {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    /// Cache directory: explicit config entry, then the environment, then
    /// a dot directory beside the run outputs.
    pub fn cache_dir(&self) -> PathBuf {
        if let Some(dir) = &self.cache_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var(CACHE_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from(".spikes-cache")
    }
}

/// Frozen ladder-ledger schema. Extend by appending columns only.
pub const LADDER_CSV_HEADER: &str = "k,rho,epsilon,h,m_eps,k_i_w,boundary_sum,pair_sum,\
expansion_gap,step_margin,step_pass,min_pair,min_image,interior_pass,c_max,dominance,\
polish_iterations,residual,maxima_count,min_u,certificate_pass,config_hash";

/// Render a ladder report as the CSV ledger. Pure function of its inputs;
/// floats at fixed precision and no clocks anywhere, so identical runs
/// produce identical bytes.
pub fn ladder_csv(report: &LadderReport, config: &RunConfig) -> String {
    let hash = config.hash();
    let mut out = String::with_capacity(256 * (report.rungs.len() + 1));
    out.push_str(LADDER_CSV_HEADER);
    out.push('\n');
    for rung in &report.rungs {
        let e = &rung.energy;
        let line = format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},\
{:.12e},{:.12e},{},{:.12e},{:.12e},{},{:.12e},{},{:.12e},{},{}\n",
            rung.k,
            rung.config.rho,
            config.epsilon,
            config.h,
            e.m_eps,
            rung.k as f64 * e.i_w_ref,
            e.interactions.boundary_sum(),
            e.interactions.pair_sum(),
            e.expansion_gap,
            rung.step.margin,
            rung.step.pass,
            rung.interior.min_pair,
            rung.interior.min_image,
            rung.interior.pass,
            rung.certificate.c_max,
            rung.certificate.dominance_ratio,
            rung.certificate.polish_iterations,
            rung.certificate.residual,
            rung.certificate.maxima_count,
            rung.certificate.min_u,
            rung.certificate.pass,
            hash,
        );
        out.push_str(&line);
    }
    out
}

/// Artifact locations of one ladder run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactPaths {
    pub csv: PathBuf,
    pub report: PathBuf,
    pub certificates: PathBuf,
    pub config: PathBuf,
}

/// Write the ledger, the full report, the certificates, and the resolved
/// config into `dir`.
pub fn write_ladder_artifacts(
    dir: &Path,
    config: &RunConfig,
    report: &LadderReport,
) -> Result<ArtifactPaths> {
    fs::create_dir_all(dir)?;
    let paths = ArtifactPaths {
        csv: dir.join("ladder.csv"),
        report: dir.join("ladder.json"),
        certificates: dir.join("certificates.json"),
        config: dir.join("run-config.toml"),
    };
    fs::write(&paths.csv, ladder_csv(report, config))?;
    fs::write(&paths.report, serde_json::to_string_pretty(report)?)?;
    let certs: Vec<_> = report.rungs.iter().map(|r| &r.certificate).collect();
    fs::write(&paths.certificates, serde_json::to_string_pretty(&certs)?)?;
    fs::write(&paths.config, config.to_toml())?;
    Ok(paths)
}

fn ground_state_cache_file(dim: usize, p: f64, r_max: f64, tol: f64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(dim.to_le_bytes());
    hasher.update(p.to_bits().to_le_bytes());
    hasher.update(r_max.to_bits().to_le_bytes());
    hasher.update(tol.to_bits().to_le_bytes());
    let digest = hasher.finalize();
    let mut tag = String::with_capacity(16);
    for byte in &digest[..8] {
        tag.push_str(&format!("{byte:02x}"));
    }
    format!("gs-{dim}d-{tag}.json")
}

/// Load the ground state from the cache or solve and store it. The flag
/// reports a cache hit. A file that fails to parse or plainly disagrees
/// with the request is ignored and rebuilt.
pub fn cached_ground_state(
    dir: &Path,
    dim: usize,
    p: f64,
    r_max: f64,
    tol: f64,
) -> Result<(GroundState, bool)> {
    let path = dir.join(ground_state_cache_file(dim, p, r_max, tol));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(gs) = serde_json::from_str::<GroundState>(&text) {
            if gs.dim == dim && gs.p == p && gs.tol_ode == tol {
                return Ok((gs, true));
            }
        }
    }
    let gs = solve_ground_state(dim, p, r_max, tol)?;
    fs::create_dir_all(dir)?;
    fs::write(&path, serde_json::to_string(&gs)?)?;
    Ok((gs, false))
}
