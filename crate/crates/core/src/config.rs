//! Experiment configuration: a flat sectioned key=value text format.
//!
//! ```text
//! # full-line comments start with '#'
//! [dataset]
//! path = data/ml-100k/u.data
//! columns = user,item,rating,_
//! delimiter = tab
//! implicit = true
//!
//! [model]
//! method = fm-pair
//! learn_rate = 0.005
//! ```
//!
//! Sections are bracketed, one `key = value` per line, duplicate keys and
//! unknown keys are errors. The full grammar is documented in the README.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::FormatDescriptor;
use crate::error::{Error, Result};
use crate::features::{ContextDim, ContextSchema, CrossDomainConfig, ValueScheme};
use crate::pairwise::TrainConfig;

/// Parsed but untyped config text: section -> key -> value.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim().to_owned();
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value` or `[section]`, found `{line}`"),
                ));
            };
            let section = current.as_ref().ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    "key appears before any [section] header",
                )
            })?;
            let key = key.trim().to_owned();
            let value = value.trim().to_owned();
            let entry = sections.get_mut(section).unwrap();
            if entry.contains_key(&key) {
                return Err(Error::config(
                    format!("{section}.{key}"),
                    "duplicate key",
                ));
            }
            entry.insert(key, value);
        }
        Ok(RawConfig { sections })
    }

    fn section(&self, name: &str) -> Option<&BTreeMap<String, String>> {
        self.sections.get(name)
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(String::as_str)
    }
}

fn parse_value<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::config(
            format!("{section}.{key}"),
            format!("cannot parse `{value}`"),
        )
    })
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(Error::config(
            format!("{section}.{key}"),
            format!("expected a boolean, found `{other}`"),
        )),
    }
}

fn parse_delimiter(section: &str, key: &str, value: &str) -> Result<u8> {
    match value {
        "comma" | "," => Ok(b','),
        "tab" | "\\t" => Ok(b'\t'),
        "semicolon" | ";" => Ok(b';'),
        "space" => Ok(b' '),
        other if other.len() == 1 && other.is_ascii() => Ok(other.as_bytes()[0]),
        other => Err(Error::config(
            format!("{section}.{key}"),
            format!("unknown delimiter `{other}` (use comma, tab, semicolon, space, or one ascii char)"),
        )),
    }
}

fn delimiter_name(d: u8) -> String {
    match d {
        b',' => "comma".into(),
        b'\t' => "tab".into(),
        b';' => "semicolon".into(),
        b' ' => "space".into(),
        other => (other as char).to_string(),
    }
}

/// Experiment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FmPair,
    FmPairContext,
    FmPairCd,
    FmPairAll,
    FmMap,
    BprMf,
    MostPopular,
    FmExplicit,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FmPair => "fm-pair",
            Method::FmPairContext => "fm-pair-context",
            Method::FmPairCd => "fm-pair-cd",
            Method::FmPairAll => "fm-pair-all",
            Method::FmMap => "fm-map",
            Method::BprMf => "bpr-mf",
            Method::MostPopular => "most-popular",
            Method::FmExplicit => "fm-explicit",
        }
    }

    pub fn from_name(s: &str) -> Option<Method> {
        Some(match s {
            "fm-pair" => Method::FmPair,
            "fm-pair-context" => Method::FmPairContext,
            "fm-pair-cd" => Method::FmPairCd,
            "fm-pair-all" => Method::FmPairAll,
            "fm-map" => Method::FmMap,
            "bpr-mf" => Method::BprMf,
            "most-popular" => Method::MostPopular,
            "fm-explicit" => Method::FmExplicit,
            _ => return None,
        })
    }

    /// Methods that fit a model by SGD and therefore need a learning rate.
    pub fn needs_learn_rate(self) -> bool {
        self != Method::MostPopular
    }
}

/// Optional per-item context sidecar file; its context values are merged
/// into every interaction with that item (interaction-level values win).
#[derive(Debug, Clone)]
pub struct ItemContextConfig {
    pub path: PathBuf,
    pub columns: Vec<String>,
    pub delimiter: u8,
    pub has_header: bool,
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub columns: Vec<String>,
    pub delimiter: u8,
    pub has_header: bool,
    /// Map explicit ratings to positives (strictly above the user mean).
    pub implicit: bool,
    /// Iteratively keep users/items with at least this many interactions
    /// (0 or 1 disables).
    pub min_interactions: usize,
    pub item_context: Option<ItemContextConfig>,
}

impl DatasetConfig {
    pub fn descriptor(&self) -> Result<FormatDescriptor> {
        let names: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        FormatDescriptor::from_column_names(&names, self.delimiter, self.has_header)
    }
}

#[derive(Debug, Clone)]
pub struct SplitConfig {
    pub folds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub method: Method,
    pub train: TrainConfig,
    /// Label for sampled unobserved interactions in fm-map.
    pub neg_label: f64,
    /// Resample fm-map negatives every epoch instead of once up front.
    pub resample_negatives: bool,
}

#[derive(Debug, Clone, Default)]
pub struct FeaturesConfig {
    pub context: Option<ContextSchema>,
    pub cross_domain: Option<CrossDomainConfig>,
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Cutoffs N for Recall@N / MRR@N.
    pub ns: Vec<usize>,
    pub pool: usize,
    pub seed: u64,
    /// Emit Recall@{first N} on the test fold every this many epochs during
    /// training (0 disables).
    pub track_every: usize,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub features: FeaturesConfig,
    pub eval: EvalConfig,
}

const DATASET_KEYS: &[&str] = &[
    "path",
    "columns",
    "delimiter",
    "header",
    "implicit",
    "min_interactions",
    "item_context_path",
    "item_context_columns",
    "item_context_delimiter",
    "item_context_header",
];
const SPLIT_KEYS: &[&str] = &["folds", "seed"];
const MODEL_KEYS: &[&str] = &[
    "method",
    "factors",
    "epochs",
    "learn_rate",
    "reg_w0",
    "reg_w",
    "reg_v",
    "sigma0",
    "seed",
    "neg_label",
    "resample_negatives",
];
const FEATURES_FIXED_KEYS: &[&str] = &[
    "context_dims",
    "normalize_context",
    "cd_target",
    "cd_sources",
    "cd_scheme",
    "cd_max_per_domain",
    "cd_seed",
];
const EVAL_KEYS: &[&str] = &["n", "pool", "seed", "track_every"];

impl ExperimentConfig {
    /// Load and validate a config file; relative dataset paths resolve
    /// against the config file's directory.
    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        let raw = RawConfig::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        ExperimentConfig::from_raw(&raw, base)
    }

    pub fn from_raw(raw: &RawConfig, base_dir: &Path) -> Result<ExperimentConfig> {
        for (section, keys) in &raw.sections {
            let known: &[&str] = match section.as_str() {
                "dataset" => DATASET_KEYS,
                "split" => SPLIT_KEYS,
                "model" => MODEL_KEYS,
                "features" => FEATURES_FIXED_KEYS,
                "eval" => EVAL_KEYS,
                other => {
                    return Err(Error::config(other, "unknown section"));
                }
            };
            for key in keys.keys() {
                let dynamic = section == "features"
                    && (key.starts_with("bins.") || key.starts_with("weight."));
                if !known.contains(&key.as_str()) && !dynamic {
                    return Err(Error::config(format!("{section}.{key}"), "unknown key"));
                }
            }
        }

        // [dataset]
        let path_str = raw
            .get("dataset", "path")
            .ok_or_else(|| Error::config("dataset.path", "missing required key"))?;
        let mut path = PathBuf::from(path_str);
        if path.is_relative() {
            path = base_dir.join(path);
        }
        let columns: Vec<String> = raw
            .get("dataset", "columns")
            .ok_or_else(|| Error::config("dataset.columns", "missing required key"))?
            .split(',')
            .map(|c| c.trim().to_owned())
            .collect();
        let delimiter = match raw.get("dataset", "delimiter") {
            Some(v) => parse_delimiter("dataset", "delimiter", v)?,
            None => b',',
        };
        let has_header = match raw.get("dataset", "header") {
            Some(v) => parse_bool("dataset", "header", v)?,
            None => false,
        };
        let implicit = match raw.get("dataset", "implicit") {
            Some(v) => parse_bool("dataset", "implicit", v)?,
            None => false,
        };
        let min_interactions = match raw.get("dataset", "min_interactions") {
            Some(v) => parse_value("dataset", "min_interactions", v)?,
            None => 0,
        };
        let item_context = match raw.get("dataset", "item_context_path") {
            Some(p) => {
                let mut icp = PathBuf::from(p);
                if icp.is_relative() {
                    icp = base_dir.join(icp);
                }
                let cols = raw
                    .get("dataset", "item_context_columns")
                    .ok_or_else(|| {
                        Error::config(
                            "dataset.item_context_columns",
                            "required when item_context_path is set",
                        )
                    })?
                    .split(',')
                    .map(|c| c.trim().to_owned())
                    .collect();
                let d = match raw.get("dataset", "item_context_delimiter") {
                    Some(v) => parse_delimiter("dataset", "item_context_delimiter", v)?,
                    None => b',',
                };
                let h = match raw.get("dataset", "item_context_header") {
                    Some(v) => parse_bool("dataset", "item_context_header", v)?,
                    None => false,
                };
                Some(ItemContextConfig {
                    path: icp,
                    columns: cols,
                    delimiter: d,
                    has_header: h,
                })
            }
            None => None,
        };
        let dataset = DatasetConfig {
            path,
            columns,
            delimiter,
            has_header,
            implicit,
            min_interactions,
            item_context,
        };
        dataset
            .descriptor()
            .map_err(|e| Error::config("dataset.columns", e.to_string()))?;

        // [split]
        let folds = match raw.get("split", "folds") {
            Some(v) => parse_value("split", "folds", v)?,
            None => 4,
        };
        let split_seed: u64 = match raw.get("split", "seed") {
            Some(v) => parse_value("split", "seed", v)?,
            None => 42,
        };
        let split = SplitConfig {
            folds,
            seed: split_seed,
        };
        if split.folds < 2 {
            return Err(Error::config("split.folds", "must be >= 2"));
        }

        // [model]
        let method_str = raw
            .get("model", "method")
            .ok_or_else(|| Error::config("model.method", "missing required key"))?;
        let method = Method::from_name(method_str).ok_or_else(|| {
            Error::config(
                "model.method",
                format!(
                    "unknown method `{method_str}` (expected one of fm-pair, fm-pair-context, \
                     fm-pair-cd, fm-pair-all, fm-map, bpr-mf, most-popular, fm-explicit)"
                ),
            )
        })?;
        let mut train = TrainConfig {
            seed: split_seed,
            ..TrainConfig::default()
        };
        if let Some(v) = raw.get("model", "factors") {
            train.k = parse_value("model", "factors", v)?;
        }
        if let Some(v) = raw.get("model", "epochs") {
            train.epochs = parse_value("model", "epochs", v)?;
        }
        match raw.get("model", "learn_rate") {
            Some(v) => train.learn_rate = parse_value("model", "learn_rate", v)?,
            None => {
                if method.needs_learn_rate() {
                    return Err(Error::config(
                        "model.learn_rate",
                        format!("required for method {}", method.as_str()),
                    ));
                }
            }
        }
        if let Some(v) = raw.get("model", "reg_w0") {
            train.reg_w0 = parse_value("model", "reg_w0", v)?;
        }
        if let Some(v) = raw.get("model", "reg_w") {
            train.reg_w = parse_value("model", "reg_w", v)?;
        }
        if let Some(v) = raw.get("model", "reg_v") {
            train.reg_v = parse_value("model", "reg_v", v)?;
        }
        if let Some(v) = raw.get("model", "sigma0") {
            train.sigma0 = parse_value("model", "sigma0", v)?;
        }
        if let Some(v) = raw.get("model", "seed") {
            train.seed = parse_value("model", "seed", v)?;
        }
        train.item_bias = method != Method::BprMf;
        if method.needs_learn_rate() {
            train
                .validate()
                .map_err(|e| Error::config("model", e.to_string()))?;
        }
        let neg_label = match raw.get("model", "neg_label") {
            Some(v) => parse_value("model", "neg_label", v)?,
            None => -1.0,
        };
        let resample_negatives = match raw.get("model", "resample_negatives") {
            Some(v) => parse_bool("model", "resample_negatives", v)?,
            None => false,
        };
        let model = ModelConfig {
            method,
            train,
            neg_label,
            resample_negatives,
        };

        // [features]
        let features = Self::features_from_raw(raw, split_seed)?;
        match method {
            Method::FmPairContext if features.context.is_none() => {
                return Err(Error::config(
                    "features.context_dims",
                    "method fm-pair-context needs a context schema",
                ));
            }
            Method::FmPairCd | Method::FmPairAll if features.cross_domain.is_none() => {
                return Err(Error::config(
                    "features.cd_target",
                    format!(
                        "method {} needs a cross-domain block (cd_target, cd_sources)",
                        method.as_str()
                    ),
                ));
            }
            _ => {}
        }

        // [eval]
        let ns: Vec<usize> = match raw.get("eval", "n") {
            Some(v) => v
                .split(',')
                .map(|p| parse_value("eval", "n", p.trim()))
                .collect::<Result<_>>()?,
            None => vec![10],
        };
        if ns.is_empty() || ns.contains(&0) {
            return Err(Error::config("eval.n", "cutoffs must be positive"));
        }
        let pool = match raw.get("eval", "pool") {
            Some(v) => parse_value("eval", "pool", v)?,
            None => 1000,
        };
        if pool < 1 {
            return Err(Error::config("eval.pool", "must be >= 1"));
        }
        let eval_seed = match raw.get("eval", "seed") {
            Some(v) => parse_value("eval", "seed", v)?,
            None => split_seed,
        };
        let track_every = match raw.get("eval", "track_every") {
            Some(v) => parse_value("eval", "track_every", v)?,
            None => 0,
        };
        let eval = EvalConfig {
            ns,
            pool,
            seed: eval_seed,
            track_every,
        };

        Ok(ExperimentConfig {
            dataset,
            split,
            model,
            features,
            eval,
        })
    }

    fn features_from_raw(raw: &RawConfig, default_seed: u64) -> Result<FeaturesConfig> {
        let Some(section) = raw.section("features") else {
            return Ok(FeaturesConfig::default());
        };

        let context = match section.get("context_dims") {
            Some(list) => {
                let mut dims = Vec::new();
                for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let mut dim = match section.get(&format!("bins.{name}")) {
                        Some(bounds) => {
                            let parsed: Vec<f64> = bounds
                                .split(',')
                                .map(|b| parse_value("features", &format!("bins.{name}"), b.trim()))
                                .collect::<Result<_>>()?;
                            ContextDim::binned(name, parsed)
                        }
                        None => ContextDim::categorical(name),
                    };
                    if let Some(w) = section.get(&format!("weight.{name}")) {
                        dim.weight = parse_value("features", &format!("weight.{name}"), w)?;
                    }
                    dims.push(dim);
                }
                let mut schema = ContextSchema::new(dims)
                    .map_err(|e| Error::config("features.context_dims", e.to_string()))?;
                if let Some(v) = section.get("normalize_context") {
                    schema.normalize = parse_bool("features", "normalize_context", v)?;
                }
                Some(schema)
            }
            None => None,
        };

        let cross_domain = match section.get("cd_target") {
            Some(target) => {
                let sources: Vec<String> = section
                    .get("cd_sources")
                    .ok_or_else(|| {
                        Error::config("features.cd_sources", "required when cd_target is set")
                    })?
                    .split(',')
                    .map(|s| s.trim().to_owned())
                    .filter(|s| !s.is_empty())
                    .collect();
                let scheme = match section.get("cd_scheme").map(String::as_str) {
                    None | Some("count-normalized") => ValueScheme::CountNormalized,
                    Some("binary") => ValueScheme::Binary,
                    Some(other) => {
                        return Err(Error::config(
                            "features.cd_scheme",
                            format!("expected binary or count-normalized, found `{other}`"),
                        ))
                    }
                };
                let max_per_domain = match section.get("cd_max_per_domain") {
                    Some(v) => parse_value("features", "cd_max_per_domain", v)?,
                    None => 5,
                };
                let seed = match section.get("cd_seed") {
                    Some(v) => parse_value("features", "cd_seed", v)?,
                    None => default_seed,
                };
                let cfg = CrossDomainConfig {
                    target: target.to_owned(),
                    sources,
                    scheme,
                    max_per_domain,
                    seed,
                };
                cfg.validate()
                    .map_err(|e| Error::config("features", e.to_string()))?;
                Some(cfg)
            }
            None => None,
        };

        Ok(FeaturesConfig {
            context,
            cross_domain,
        })
    }

    /// Render the fully resolved configuration back into config syntax.
    /// Re-running from this text reproduces the experiment bit for bit.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[dataset]");
        let _ = writeln!(out, "path = {}", self.dataset.path.display());
        let _ = writeln!(out, "columns = {}", self.dataset.columns.join(","));
        let _ = writeln!(out, "delimiter = {}", delimiter_name(self.dataset.delimiter));
        let _ = writeln!(out, "header = {}", self.dataset.has_header);
        let _ = writeln!(out, "implicit = {}", self.dataset.implicit);
        let _ = writeln!(out, "min_interactions = {}", self.dataset.min_interactions);
        if let Some(ic) = &self.dataset.item_context {
            let _ = writeln!(out, "item_context_path = {}", ic.path.display());
            let _ = writeln!(out, "item_context_columns = {}", ic.columns.join(","));
            let _ = writeln!(
                out,
                "item_context_delimiter = {}",
                delimiter_name(ic.delimiter)
            );
            let _ = writeln!(out, "item_context_header = {}", ic.has_header);
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "[split]");
        let _ = writeln!(out, "folds = {}", self.split.folds);
        let _ = writeln!(out, "seed = {}", self.split.seed);
        let _ = writeln!(out);
        let _ = writeln!(out, "[model]");
        let _ = writeln!(out, "method = {}", self.model.method.as_str());
        let t = &self.model.train;
        let _ = writeln!(out, "factors = {}", t.k);
        let _ = writeln!(out, "epochs = {}", t.epochs);
        let _ = writeln!(out, "learn_rate = {}", t.learn_rate);
        let _ = writeln!(out, "reg_w0 = {}", t.reg_w0);
        let _ = writeln!(out, "reg_w = {}", t.reg_w);
        let _ = writeln!(out, "reg_v = {}", t.reg_v);
        let _ = writeln!(out, "sigma0 = {}", t.sigma0);
        let _ = writeln!(out, "seed = {}", t.seed);
        if self.model.method == Method::FmMap {
            let _ = writeln!(out, "neg_label = {}", self.model.neg_label);
            let _ = writeln!(out, "resample_negatives = {}", self.model.resample_negatives);
        }
        if self.features.context.is_some() || self.features.cross_domain.is_some() {
            let _ = writeln!(out);
            let _ = writeln!(out, "[features]");
            if let Some(schema) = &self.features.context {
                let names: Vec<&str> = schema.dims.iter().map(|d| d.name.as_str()).collect();
                let _ = writeln!(out, "context_dims = {}", names.join(","));
                for dim in &schema.dims {
                    if let crate::features::ContextKind::Binned(bounds) = &dim.kind {
                        let rendered: Vec<String> =
                            bounds.iter().map(|b| format!("{b}")).collect();
                        let _ = writeln!(out, "bins.{} = {}", dim.name, rendered.join(","));
                    }
                    if dim.weight != 1.0 {
                        let _ = writeln!(out, "weight.{} = {}", dim.name, dim.weight);
                    }
                }
                let _ = writeln!(out, "normalize_context = {}", schema.normalize);
            }
            if let Some(cd) = &self.features.cross_domain {
                let _ = writeln!(out, "cd_target = {}", cd.target);
                let _ = writeln!(out, "cd_sources = {}", cd.sources.join(","));
                let scheme = match cd.scheme {
                    ValueScheme::Binary => "binary",
                    ValueScheme::CountNormalized => "count-normalized",
                };
                let _ = writeln!(out, "cd_scheme = {scheme}");
                let _ = writeln!(out, "cd_max_per_domain = {}", cd.max_per_domain);
                let _ = writeln!(out, "cd_seed = {}", cd.seed);
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "[eval]");
        let ns: Vec<String> = self.eval.ns.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(out, "n = {}", ns.join(","));
        let _ = writeln!(out, "pool = {}", self.eval.pool);
        let _ = writeln!(out, "seed = {}", self.eval.seed);
        let _ = writeln!(out, "track_every = {}", self.eval.track_every);
        out
    }
}
