//! Run configuration: a JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use spp_core::cvae::{CvaeConfig, GridSpec};
use spp_core::data::{AttributeKind, DecodeMode, Schema, Value};
use spp_core::panel::{Condition, StatisticSpec};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Model trained on the training split only, used for the
    /// model-vs-validation comparison when `model` was refit on all data.
    pub selection_model: Option<PathBuf>,
    /// Master seed; every random stream is derived from it.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub train_fraction: Option<f64>,
    pub cvae: CvaeConfig,
    pub grid: GridSpec,
    pub evaluation: EvaluationConfig,
    pub synth: SynthConfig,
    pub generate: GenerateConfig,
    pub panel: PanelConfig,
    pub movers: MoverConfig,
    pub bootstrap: BootstrapSettings,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Attribute subsets whose joint histograms are compared. Empty means
    /// the full preference joint.
    pub subsets: Vec<Vec<String>>,
    pub draws_per_record: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            subsets: vec![],
            draws_per_record: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// A shipped spec name or a path to a spec JSON file.
    pub spec: String,
    pub n_per_year: usize,
    /// Year offsets; all of the spec's years when absent.
    pub years: Option<Vec<usize>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            spec: "static-corr".into(),
            n_per_year: 1000,
            years: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub draws_per_profile: usize,
    pub mode: DecodeMode,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            draws_per_profile: 1,
            mode: DecodeMode::Sample,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendConfig {
    pub attribute: String,
    #[serde(default)]
    pub conditions: Vec<Condition>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelConfig {
    /// Time value of the base population, as written in the data.
    pub reference_year: Option<Json>,
    /// Panel years; every category of the time attribute when empty.
    pub years: Vec<Json>,
    pub r: usize,
    /// CSV of `individual_id,year,<external attributes>`; external values
    /// stay at base-year levels when absent.
    pub external: Option<PathBuf>,
    /// Subset for the stored joint; the full preference joint when empty.
    pub subset: Vec<String>,
    pub max_individuals: Option<usize>,
    /// Trend series to export; one per preference attribute when empty.
    pub trends: Vec<TrendConfig>,
}

impl Default for PanelConfig {
    fn default() -> Self {
        PanelConfig {
            reference_year: None,
            years: vec![],
            r: 100,
            external: None,
            subset: vec![],
            max_individuals: None,
            trends: vec![],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoverConfig {
    pub t_start: Option<Json>,
    pub t_end: Option<Json>,
    /// Histogram space of the distance; the full preference joint when empty.
    pub subset: Vec<String>,
    pub r: usize,
    /// Smallest R accepted for distribution estimates.
    pub min_r: usize,
}

impl Default for MoverConfig {
    fn default() -> Self {
        MoverConfig {
            t_start: None,
            t_end: None,
            subset: vec![],
            r: 500,
            min_r: 100,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSettings {
    pub replicates: usize,
    pub draws_per_record: usize,
    pub statistics: Vec<StatisticSpec>,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        BootstrapSettings {
            replicates: 20,
            draws_per_record: 1,
            statistics: vec![],
        }
    }
}

/// Set `path` (dot separated) in a JSON object to `raw`, parsed as JSON when
/// possible and as a string otherwise.
pub fn apply_override(root: &mut Json, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key=value"))?;
    let value: Json = serde_json::from_str(raw).unwrap_or_else(|_| Json::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            bail!("empty key in override `{assignment}`");
        }
        if !node.is_object() {
            *node = Json::Object(Default::default());
        }
        let map = node.as_object_mut().expect("object");
        if i + 1 == keys.len() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        node = map.entry(key.to_string()).or_insert_with(|| Json::Object(Default::default()));
    }
    Ok(())
}

/// Read the config file (if any), apply overrides and flag values.
pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>, out: Option<&Path>) -> Result<RunConfig> {
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => Json::Object(Default::default()),
    };
    // a run manifest carries its config snapshot; re-running from it
    // reproduces the run
    if root.get("command").is_some() {
        if let Some(snapshot) = root.get("config") {
            root = snapshot.clone();
        }
    }
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let mut cfg: RunConfig = serde_json::from_value(root).context("invalid configuration")?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(o) = out {
        cfg.out = Some(o.to_path_buf());
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| anyhow!("a seed is required (config `seed` or --seed)"))
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    pub fn require<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        let p = field.as_deref().ok_or_else(|| anyhow!("config field `{name}` is required"))?;
        if !p.exists() {
            bail!("`{name}` path {} does not exist", p.display());
        }
        Ok(p)
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction.unwrap_or(0.8)
    }
}

/// Resolve a configured time value (label, index or number) against the
/// schema's time attribute.
pub fn time_value(schema: &Schema, raw: &Json) -> Result<Value> {
    let t = schema
        .time_index()
        .ok_or_else(|| anyhow!("schema has no time attribute"))?;
    let attr = &schema.attributes[t];
    let text = match raw {
        Json::String(s) => s.clone(),
        other => other.to_string(),
    };
    if attr.is_numerical() {
        let x: f64 = text.parse().with_context(|| format!("year `{text}` is not a number"))?;
        return Ok(Value::Num(x));
    }
    if let AttributeKind::Categorical {
        labels: Some(labels), ..
    } = &attr.kind
    {
        if let Some(k) = labels.iter().position(|l| *l == text) {
            return Ok(Value::Cat(k));
        }
    }
    let k: usize = text
        .parse()
        .with_context(|| format!("year `{text}` is neither a label nor an index of `{}`", attr.name))?;
    let n = attr.n_categories().unwrap_or(0);
    if k >= n {
        bail!("year index {k} outside the {n} categories of `{}`", attr.name);
    }
    Ok(Value::Cat(k))
}
