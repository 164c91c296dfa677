//! Strict TOML experiment configuration.
//!
//! Parsing reports every problem it finds, each prefixed with the dotted
//! path of the offending key. `Config::to_toml` emits a canonical form with
//! all defaults filled in; parsing that text yields an equal `Config` whose
//! emission is byte-identical.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{InitialCondition, MapParam, ReferenceSpec};
use crate::grid::GridSpec;
use crate::models::ModelPreset;
use crate::splitting::SplitConfig;
use crate::steppers::{InitialIterate, SchemeConfig, SchemeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Converge,
    M2sweep,
    Stabmap,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Converge => "converge",
            ExperimentKind::M2sweep => "m2sweep",
            ExperimentKind::Stabmap => "stabmap",
        }
    }
}

/// Box shape; exactly one of `length` and `length_pi` (multiples of π).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_pi: Option<Vec<f64>>,
    #[serde(default)]
    pub dealias: bool,
}

impl GridSection {
    pub fn spec(&self) -> GridSpec {
        let length = match (&self.length, &self.length_pi) {
            (Some(l), _) => l.clone(),
            (None, Some(p)) => p.iter().map(|m| m * PI).collect(),
            (None, None) => Vec::new(),
        };
        GridSpec {
            n: self.n.clone(),
            length,
            dealias: self.dealias,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub scheme: SchemeKind,
    #[serde(default)]
    pub initial_iterate: InitialIterate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default)]
    pub t0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "one_usize")]
    pub sample_every: usize,
    #[serde(default = "default_energy_tol")]
    pub energy_tol: f64,
}

impl RunSection {
    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            kind: self.scheme,
            initial_iterate: self.initial_iterate,
        }
    }
}

fn one_usize() -> usize {
    1
}

fn default_energy_tol() -> f64 {
    crate::diagnostics::ENERGY_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSection {
    pub scheme: SchemeKind,
    #[serde(default)]
    pub initial_iterate: InitialIterate,
    /// Falls back to the top-level `[split]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    pub h: Vec<f64>,
    pub reference: ReferenceSpec,
    /// Empty means the single case given by `[run]` and `[split]`.
    #[serde(default)]
    pub cases: Vec<CaseSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct M2SweepSection {
    /// Strictly descending.
    pub m2: Vec<f64>,
    pub schemes: Vec<SchemeKind>,
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub m1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spacing {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabmapSection {
    pub param: MapParam,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values_lin: Option<Spacing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_log: Option<Spacing>,
    pub steps: usize,
}

impl StabmapSection {
    pub fn values(&self) -> Vec<f64> {
        match (&self.values, &self.values_lin) {
            (Some(v), _) => v.clone(),
            (None, Some(s)) => crate::experiments::lin_space(s.from, s.to, s.count),
            (None, None) => Vec::new(),
        }
    }

    pub fn h(&self) -> Vec<f64> {
        match (&self.h, &self.h_log) {
            (Some(v), _) => v.clone(),
            (None, Some(s)) => crate::experiments::log_space(s.from, s.to, s.count),
            (None, None) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Cache file for prepared initial states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    pub model: ModelPreset,
    pub grid: GridSection,
    pub ic: InitialCondition,
    pub run: RunSection,
    pub split: SplitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m2sweep: Option<M2SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stabmap: Option<StabmapSection>,
}

const REQUIRED: [&str; 6] = ["experiment", "model", "grid", "ic", "run", "split"];

impl Config {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(vec![e.message().trim().to_owned()]))?;
        let mut errors = Vec::new();
        check_m2_conflicts(&table, &mut errors);
        if errors.is_empty() {
            match typed::<Config>(toml::Value::Table(table.clone()), "") {
                Ok(cfg) => {
                    cfg.validate_into(&mut errors);
                    return if errors.is_empty() {
                        Ok(cfg)
                    } else {
                        Err(Error::InvalidConfig(errors))
                    };
                }
                Err(_) => collect_section_errors(&table, &mut errors),
            }
        }
        Err(Error::InvalidConfig(errors))
    }

    /// Canonical TOML with every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.validate_into(&mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errors))
        }
    }

    fn validate_into(&self, errors: &mut Vec<String>) {
        let mut err = |path: &str, msg: String| errors.push(format!("{path}: {msg}"));
        let pos = |v: f64| v.is_finite() && v > 0.0;

        // TOML integers are i64; a larger seed could not be written back.
        if i64::try_from(self.seed).is_err() {
            err("seed", format!("must be at most {}, got {}", i64::MAX, self.seed));
        }
        let eps = self.model.epsilon();
        if !pos(eps) {
            err("model.epsilon", format!("must be positive and finite, got {eps}"));
        }
        if let ModelPreset::Chvm { omega, .. } = self.model {
            if !(omega.is_finite() && omega.abs() < 1.0) {
                err("model.omega", format!("must satisfy |omega| < 1, got {omega}"));
            }
        }

        match (&self.grid.length, &self.grid.length_pi) {
            (Some(_), Some(_)) => err("grid", "give exactly one of `length` and `length_pi`, not both".into()),
            (None, None) => err("grid", "missing `length` or `length_pi`".into()),
            _ => {}
        }
        let spec = self.grid.spec();
        if !spec.length.is_empty() {
            if let Err(e) = spec.build() {
                err("grid", e.to_string());
            }
        }

        match self.ic {
            InitialCondition::CosinePerturbed { mean, amp, mode } => {
                if !(mean.is_finite() && amp.is_finite() && mode.is_finite()) {
                    err("ic", "mean, amp and mode must be finite".into());
                }
            }
            InitialCondition::RandomPerturbed { mean, eta, .. } => {
                if !mean.is_finite() || !(eta.is_finite() && eta >= 0.0) {
                    err("ic", "mean must be finite and eta nonnegative".into());
                }
            }
            InitialCondition::FromSnapshot { .. } => {}
            InitialCondition::Manufactured { t0 } => {
                if !matches!(self.model, ModelPreset::ForcedThinFilm { .. }) {
                    err("ic.kind", "`manufactured` requires the forced_thin_film model".into());
                }
                if !t0.is_finite() {
                    err("ic.t0", format!("must be finite, got {t0}"));
                }
            }
            InitialCondition::Prepared { t_prep, h_prep } => {
                if !matches!(self.model, ModelPreset::ThinFilm { .. }) {
                    err("ic.kind", "`prepared` requires the thin_film model".into());
                }
                if !(t_prep.is_finite() && t_prep >= 0.0) {
                    err("ic.t_prep", format!("must be nonnegative, got {t_prep}"));
                }
                if !pos(h_prep) {
                    err("ic.h_prep", format!("must be positive, got {h_prep}"));
                }
            }
        }

        if let Err(e) = self.run.scheme_config().validate() {
            err("run.scheme", e.to_string());
        }
        if let Some(h) = self.run.h {
            if !pos(h) {
                err("run.h", format!("must be positive, got {h}"));
            }
        }
        if !self.run.t0.is_finite() {
            err("run.t0", format!("must be finite, got {}", self.run.t0));
        }
        if let Some(t) = self.run.t_end {
            if !(t.is_finite() && t >= self.run.t0) {
                err("run.t_end", format!("must be at least t0 = {}, got {t}", self.run.t0));
            }
        }
        if self.run.sample_every == 0 {
            err("run.sample_every", "must be at least 1".into());
        }
        if !(self.run.energy_tol.is_finite() && self.run.energy_tol >= 0.0) {
            err(
                "run.energy_tol",
                format!("must be nonnegative, got {}", self.run.energy_tol),
            );
        }
        if let Err(e) = self.split.validate() {
            err("split", e.to_string());
        }
        if self.threads == Some(0) {
            err("threads", "must be at least 1".into());
        }

        let needs_run = |err: &mut dyn FnMut(&str, String), h: bool, t_end: bool| {
            if h && self.run.h.is_none() {
                err("run.h", "required for this experiment".into());
            }
            if t_end && self.run.t_end.is_none() {
                err("run.t_end", "required for this experiment".into());
            }
        };
        let kind = self.experiment;
        let section = |present: bool, name: &str, err: &mut dyn FnMut(&str, String)| {
            let wanted = kind.name() == name;
            if wanted && !present && name != "simulate" {
                err(name, format!("section required when experiment = \"{name}\""));
            }
            if !wanted && present {
                err(name, format!("section not used when experiment = \"{}\"", kind.name()));
            }
        };
        section(self.simulate.is_some(), "simulate", &mut err);
        section(self.converge.is_some(), "converge", &mut err);
        section(self.m2sweep.is_some(), "m2sweep", &mut err);
        section(self.stabmap.is_some(), "stabmap", &mut err);

        match kind {
            ExperimentKind::Simulate => {
                needs_run(&mut err, true, true);
                if let Some(s) = &self.simulate {
                    if s.snapshot_times.iter().any(|t| !t.is_finite()) {
                        err("simulate.snapshot_times", "must be finite".into());
                    }
                }
            }
            ExperimentKind::Converge => {
                needs_run(&mut err, false, true);
                if let Some(c) = &self.converge {
                    check_positive_list(&mut err, "converge.h", &c.h);
                    check_reference(&mut err, "converge.reference", &c.reference, &self.model);
                    for (i, case) in c.cases.iter().enumerate() {
                        let path = format!("converge.cases[{i}]");
                        let sc = SchemeConfig {
                            kind: case.scheme,
                            initial_iterate: case.initial_iterate,
                        };
                        if let Err(e) = sc.validate() {
                            err(&format!("{path}.scheme"), e.to_string());
                        }
                        if let Some(s) = case.split {
                            if let Err(e) = s.validate() {
                                err(&format!("{path}.split"), e.to_string());
                            }
                        }
                    }
                }
            }
            ExperimentKind::M2sweep => {
                needs_run(&mut err, true, true);
                if let Some(s) = &self.m2sweep {
                    check_positive_list(&mut err, "m2sweep.m2", &s.m2);
                    if s.m2.windows(2).any(|w| w[1] >= w[0]) {
                        err("m2sweep.m2", "must be strictly descending".into());
                    }
                    if s.schemes.is_empty() {
                        err("m2sweep.schemes", "must not be empty".into());
                    }
                    for (i, k) in s.schemes.iter().enumerate() {
                        if let Err(e) = SchemeConfig::new(*k).validate() {
                            err(&format!("m2sweep.schemes[{i}]"), e.to_string());
                        }
                    }
                    if !(s.m1.is_finite() && s.m1 >= 0.0) {
                        err("m2sweep.m1", format!("must be nonnegative, got {}", s.m1));
                    }
                    check_reference(&mut err, "m2sweep.reference", &s.reference, &self.model);
                }
            }
            ExperimentKind::Stabmap => {
                if let Some(s) = &self.stabmap {
                    match (&s.values, &s.values_lin) {
                        (Some(_), Some(_)) => err(
                            "stabmap",
                            "give exactly one of `values` and `values_lin`, not both".into(),
                        ),
                        (None, None) => err("stabmap", "missing `values` or `values_lin`".into()),
                        _ => {}
                    }
                    match (&s.h, &s.h_log) {
                        (Some(_), Some(_)) => err("stabmap", "give exactly one of `h` and `h_log`, not both".into()),
                        (None, None) => err("stabmap", "missing `h` or `h_log`".into()),
                        _ => {}
                    }
                    if let Some(sp) = &s.values_lin {
                        check_spacing(&mut err, "stabmap.values_lin", sp, false);
                    }
                    if let Some(sp) = &s.h_log {
                        check_spacing(&mut err, "stabmap.h_log", sp, true);
                    }
                    if let Some(h) = &s.h {
                        check_positive_list(&mut err, "stabmap.h", h);
                    }
                    let values = s.values();
                    if s.values.as_ref().is_some_and(|v| v.is_empty()) {
                        err("stabmap.values", "must not be empty".into());
                    }
                    for v in &values {
                        let bad = match s.param {
                            MapParam::M1 => !(v.is_finite() && *v >= 0.0),
                            MapParam::Alpha => !(v.is_finite() && *v > 0.0),
                        };
                        if bad {
                            err("stabmap.values", format!("{} value {v} out of range", s.param.name()));
                            break;
                        }
                    }
                    if s.steps == 0 {
                        err("stabmap.steps", "must be at least 1".into());
                    }
                }
            }
        }
    }

    /// Scheme/splitting pairs for a convergence study.
    pub fn convergence_cases(&self) -> Vec<(SchemeConfig, SplitConfig)> {
        let Some(c) = &self.converge else {
            return Vec::new();
        };
        if c.cases.is_empty() {
            return vec![(self.run.scheme_config(), self.split)];
        }
        c.cases
            .iter()
            .map(|case| {
                (
                    SchemeConfig {
                        kind: case.scheme,
                        initial_iterate: case.initial_iterate,
                    },
                    case.split.unwrap_or(self.split),
                )
            })
            .collect()
    }
}

fn check_positive_list(err: &mut dyn FnMut(&str, String), path: &str, v: &[f64]) {
    if v.is_empty() {
        err(path, "must not be empty".into());
    } else if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        err(path, format!("entries must be positive, got {bad}"));
    }
}

fn check_spacing(err: &mut dyn FnMut(&str, String), path: &str, s: &Spacing, log: bool) {
    if s.count == 0 {
        err(&format!("{path}.count"), "must be at least 1".into());
    }
    if !(s.from.is_finite() && s.to.is_finite()) || (log && (s.from <= 0.0 || s.to <= 0.0)) {
        err(path, format!("invalid range {} to {}", s.from, s.to));
    }
}

fn check_reference(err: &mut dyn FnMut(&str, String), path: &str, r: &ReferenceSpec, model: &ModelPreset) {
    match *r {
        ReferenceSpec::Manufactured => {
            if !matches!(model, ModelPreset::ForcedThinFilm { .. }) {
                err(path, "`manufactured` requires the forced_thin_film model".into());
            }
        }
        ReferenceSpec::Richardson { h_fine, scheme } => {
            if !(h_fine.is_finite() && h_fine > 0.0) {
                err(
                    &format!("{path}.richardson.h_fine"),
                    format!("must be positive, got {h_fine}"),
                );
            }
            if let Err(e) = SchemeConfig::new(scheme).validate() {
                err(&format!("{path}.richardson.scheme"), e.to_string());
            }
        }
    }
}

/// Deserializes `value`, reporting failures with the path below `prefix`.
fn typed<T: DeserializeOwned>(value: toml::Value, prefix: &str) -> std::result::Result<T, String> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner == ".") {
            (true, _) => inner,
            (false, true) => prefix.to_owned(),
            (false, false) => format!("{prefix}.{inner}"),
        };
        format!("{path}: {}", e.into_inner().to_string().trim())
    })
}

/// Deserializes each top-level entry on its own so every section reports.
fn collect_section_errors(table: &toml::Table, errors: &mut Vec<String>) {
    for key in REQUIRED {
        if !table.contains_key(key) {
            errors.push(format!("{key}: missing required key"));
        }
    }
    for (key, value) in table {
        let v = value.clone();
        let res = match key.as_str() {
            "experiment" => typed::<ExperimentKind>(v, key).map(drop),
            "seed" => typed::<u64>(v, key).map(drop),
            "threads" => typed::<usize>(v, key).map(drop),
            "output_dir" | "cache" => typed::<PathBuf>(v, key).map(drop),
            "model" => typed::<ModelPreset>(v, key).map(drop),
            "grid" => typed::<GridSection>(v, key).map(drop),
            "ic" => typed::<InitialCondition>(v, key).map(drop),
            "run" => typed::<RunSection>(v, key).map(drop),
            "split" => typed::<SplitConfig>(v, key).map(drop),
            "simulate" => typed::<SimulateSection>(v, key).map(drop),
            "converge" => typed::<ConvergeSection>(v, key).map(drop),
            "m2sweep" => typed::<M2SweepSection>(v, key).map(drop),
            "stabmap" => typed::<StabmapSection>(v, key).map(drop),
            _ => Err(format!("{key}: unknown key")),
        };
        if let Err(e) = res {
            errors.push(e);
        }
    }
}

/// Flags every `m2` table that names both rules.
fn check_m2_conflicts(table: &toml::Table, errors: &mut Vec<String>) {
    let conflict = |split: &toml::Value| {
        split
            .get("m2")
            .and_then(|m| m.as_table())
            .is_some_and(|m| m.contains_key("static") && m.contains_key("dynamic_alpha"))
    };
    let msg = |path: &str| format!("{path}.m2: `static` and `dynamic_alpha` conflict; a splitting uses one m2 rule");
    if let Some(split) = table.get("split") {
        if conflict(split) {
            errors.push(msg("split"));
        }
    }
    let cases = table
        .get("converge")
        .and_then(|c| c.get("cases"))
        .and_then(|c| c.as_array());
    for (i, case) in cases.into_iter().flatten().enumerate() {
        if let Some(split) = case.get("split") {
            if conflict(split) {
                errors.push(msg(&format!("converge.cases[{i}].split")));
            }
        }
    }
}
