//! Layered run configuration: shipped problem defaults, then a user file,
//! then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pfch::benchmarks::{BenchmarkSpec, Problem};
use pfch::controller::EstimatorKind;
use pfch::{SchemeKind, SolverKind};

/// Optional `[run]` table of a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub scheme: Option<SchemeKind>,
    pub estimator: Option<EstimatorKind>,
    pub solver: Option<SolverKind>,
    pub tol: Option<f64>,
    pub t_final: Option<f64>,
    pub snapshot_times: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl RunSection {
    /// Fields set in `over` win.
    pub fn overlay(&self, over: &RunSection) -> RunSection {
        RunSection {
            scheme: over.scheme.or(self.scheme),
            estimator: over.estimator.or(self.estimator),
            solver: over.solver.or(self.solver),
            tol: over.tol.or(self.tol),
            t_final: over.t_final.or(self.t_final),
            snapshot_times: over.snapshot_times.clone().or_else(|| self.snapshot_times.clone()),
            seed: over.seed.or(self.seed),
        }
    }
}

/// Fully determined settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub scheme: SchemeKind,
    pub estimator: EstimatorKind,
    pub solver: SolverKind,
    pub tol: f64,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    pub seed: Option<u64>,
}

/// Recorded next to every output so the run can be repeated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
}

pub fn estimator_for(name: &str, scheme: SchemeKind) -> EstimatorKind {
    match name.parse::<Problem>() {
        Ok(p) => p.default_estimator(scheme),
        Err(_) if scheme == SchemeKind::Mp => EstimatorKind::Midab2,
        Err(_) => EstimatorKind::Am3,
    }
}

pub fn comparison_scheme_for(name: &str) -> SchemeKind {
    name.parse::<Problem>()
        .map(Problem::comparison_scheme)
        .unwrap_or(SchemeKind::Bdf2)
}

impl RunSection {
    pub fn resolve(&self, spec: &BenchmarkSpec) -> RunSettings {
        let scheme = self.scheme.unwrap_or_else(|| comparison_scheme_for(&spec.name));
        RunSettings {
            scheme,
            estimator: self.estimator.unwrap_or_else(|| estimator_for(&spec.name, scheme)),
            solver: self.solver.unwrap_or_default(),
            tol: self.tol.unwrap_or(spec.stepping.tol),
            t_final: self.t_final.unwrap_or(spec.stepping.t_final),
            snapshot_times: self.snapshot_times.clone().unwrap_or_default(),
            seed: self.seed,
        }
    }
}

/// A parsed user config file.
#[derive(Debug, Clone, Default)]
pub struct UserConfig {
    pub path: Option<PathBuf>,
    /// Problem the overrides apply to (`base = "FCH1"`).
    pub base: Option<Problem>,
    pub run: RunSection,
    /// Remaining top-level keys: spec overrides, or a complete spec when
    /// there is no base.
    pub spec_table: toml::Table,
}

impl UserConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        cfg.path = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        // syntax errors carry line and column here
        let mut table: toml::Table = text.parse()?;
        let base = match table.remove("base") {
            Some(toml::Value::String(s)) => Some(s.parse::<Problem>().map_err(anyhow::Error::msg)?),
            Some(other) => bail!("`base` must be a problem name, got {other}"),
            None => None,
        };
        let run = match table.remove("run") {
            Some(v) => v.try_into::<RunSection>().context("in [run]")?,
            None => RunSection::default(),
        };
        table.remove("manifest");
        Ok(Self {
            path: None,
            base,
            run,
            spec_table: table,
        })
    }

    /// Spec for `problem` (or the file's own base) with the file's
    /// overrides applied.
    pub fn spec_for(&self, problem: Option<Problem>) -> Result<BenchmarkSpec> {
        let base = problem.or(self.base);
        let spec = match base {
            None => {
                if self.spec_table.is_empty() {
                    bail!("no problem given: pass --problem or set `base` in the config");
                }
                toml::Value::Table(self.spec_table.clone())
                    .try_into::<BenchmarkSpec>()
                    .context("config is not a complete benchmark definition (set `base` to override a shipped problem)")?
            }
            Some(p) => {
                let defaults = p.spec()?;
                if self.spec_table.is_empty() {
                    return Ok(defaults);
                }
                let mut merged = toml::Value::try_from(&defaults)?;
                merge(&mut merged, &toml::Value::Table(self.spec_table.clone()));
                let spec: BenchmarkSpec = merged
                    .try_into()
                    .with_context(|| format!("overriding {p}"))?;
                if let Err(e) = pfch::benchmarks::check_table1(p, &spec) {
                    log::info!("{e}");
                }
                spec
            }
        };
        spec.grid()?;
        spec.model()?;
        Ok(spec)
    }
}

/// Deep merge of tables; a differing `kind` replaces the whole table.
fn merge(into: &mut toml::Value, over: &toml::Value) {
    match (into, over) {
        (toml::Value::Table(a), toml::Value::Table(b)) => {
            if let (Some(ka), Some(kb)) = (a.get("kind"), b.get("kind")) {
                if ka != kb {
                    *a = b.clone();
                    return;
                }
            }
            for (k, v) in b {
                match a.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        a.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

/// Complete config as written to `resolved_config.toml`; loading it back
/// with `--config` reproduces the run.
pub fn resolved_toml(spec: &BenchmarkSpec, run: &RunSettings, manifest: &Manifest) -> Result<String> {
    let mut table = match toml::Value::try_from(spec)? {
        toml::Value::Table(t) => t,
        _ => unreachable!("a struct serializes to a table"),
    };
    table.insert("run".into(), toml::Value::try_from(run)?);
    table.insert("manifest".into(), toml::Value::try_from(manifest)?);
    Ok(toml::to_string_pretty(&table)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_on_top_of_base() {
        let cfg = UserConfig::parse(
            "base = \"FCH1\"\n[domain]\nn = 32\n[run]\nscheme = \"MP\"\ntol = 1e-3\n",
        )
        .unwrap();
        let spec = cfg.spec_for(None).unwrap();
        assert_eq!(spec.domain.n, 32);
        assert_eq!(spec.domain.length, Problem::Fch1.spec().unwrap().domain.length);
        let run = cfg.run.resolve(&spec);
        assert_eq!(run.scheme, SchemeKind::Mp);
        assert_eq!(run.estimator, EstimatorKind::Midab2);
        assert_eq!(run.tol, 1e-3);
        assert_eq!(run.t_final, 100.0);
    }

    #[test]
    fn different_initial_kind_replaces_table() {
        let cfg = UserConfig::parse("base = \"FCH2\"\n[initial]\nkind = \"constant\"\nvalue = -0.9\n").unwrap();
        let spec = cfg.spec_for(None).unwrap();
        assert_eq!(spec.initial, pfch::benchmarks::InitialCondition::Constant { value: -0.9 });
    }

    #[test]
    fn unknown_key_is_reported() {
        let cfg = UserConfig::parse("base = \"PFC1\"\n[model]\nepsilom = 0.5\n").unwrap();
        let err = format!("{:#}", cfg.spec_for(None).unwrap_err());
        assert!(err.contains("epsilom"), "{err}");
    }

    #[test]
    fn syntax_error_names_the_line() {
        let err = format!("{:#}", UserConfig::parse("base = \"FCH1\"\n[domain\nn = 3\n").unwrap_err());
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let spec = Problem::DeskFch3.spec().unwrap();
        let run = RunSection::default().resolve(&spec);
        let manifest = Manifest {
            version: "0".into(),
            command: "simulate".into(),
            config_path: None,
            out_dir: "out".into(),
        };
        let text = resolved_toml(&spec, &run, &manifest).unwrap();
        let back = UserConfig::parse(&text).unwrap();
        assert_eq!(back.spec_for(None).unwrap(), spec);
        assert_eq!(back.run.resolve(&spec), run);
    }
}
