//! Reference values cached on disk, keyed by a hash of everything that
//! influences them.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pfch::benchmarks::reference::{reference_solve, FieldPointProblem, ReferenceCertificate, REFERENCE_TOL};
use pfch::benchmarks::BenchmarkSpec;
use pfch::SolverKind;

/// Inputs that determine a reference value.
#[derive(Serialize)]
struct Key<'a> {
    model: &'a pfch::benchmarks::ModelSpec,
    domain: &'a pfch::benchmarks::DomainSpec,
    solver: &'a pfch::benchmarks::SolverSpec,
    initial: &'a pfch::benchmarks::InitialCondition,
    x: f64,
    y: f64,
    t: f64,
    seed: Option<u64>,
    max_level: u32,
}

pub fn spec_hash(spec: &BenchmarkSpec, seed: Option<u64>, max_level: u32) -> Result<String> {
    let key = Key {
        model: &spec.model,
        domain: &spec.domain,
        solver: &spec.solver,
        initial: &spec.initial,
        x: spec.reference.x,
        y: spec.reference.y,
        t: spec.reference.t,
        seed,
        max_level,
    };
    let text = toml::to_string(&key)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub name: String,
    pub spec_hash: String,
    pub certificate: ReferenceCertificate,
}

pub fn cache_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{}.toml", name.to_ascii_lowercase()))
}

/// Returns the cached entry when its stored hash matches, otherwise solves
/// and rewrites the cache file. The flag is true on a cache hit.
pub fn reference_value(
    spec: &BenchmarkSpec,
    seed: Option<u64>,
    max_level: u32,
    dir: &Path,
) -> Result<(CacheEntry, bool)> {
    let hash = spec_hash(spec, seed, max_level)?;
    let path = cache_path(dir, &spec.name);
    if let Ok(text) = std::fs::read_to_string(&path) {
        match toml::from_str::<CacheEntry>(&text) {
            Ok(entry) if entry.spec_hash == hash => {
                log::info!("{}: cached reference value {:.16e}", spec.name, entry.certificate.value);
                return Ok((entry, true));
            }
            Ok(_) => log::info!("{}: cache entry is stale, recomputing", spec.name),
            Err(e) => log::warn!("{}: unreadable cache entry ({e}), recomputing", spec.name),
        }
    }
    log::info!("{}: computing reference value", spec.name);
    let mut problem = FieldPointProblem::new(spec, spec.solver_config(SolverKind::Pagd), seed)?;
    let certificate = reference_solve(&mut problem, REFERENCE_TOL, max_level)?;
    if !certificate.certified {
        log::warn!("{}: reference value not confirmed by spatial refinement", spec.name);
    }
    let entry = CacheEntry {
        name: spec.name.clone(),
        spec_hash: hash,
        certificate,
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(&path, toml::to_string_pretty(&entry)?).with_context(|| format!("writing {}", path.display()))?;
    Ok((entry, false))
}
