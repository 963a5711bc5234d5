use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::disruption::{NrMode, Variant, WindowSpec};
use crate::error::{Error, Result};
use crate::regress::{Covariate, Estimator, ModelSpec, OutlierRule, SeType, TeamSizeCoding};

/// Dimension names understood by [`UniverseSpec::resolve`].
pub const DIMENSIONS: [&str; 7] = [
    "index",
    "window",
    "citation_counts",
    "reference_counts",
    "outliers",
    "estimator",
    "nr_mode",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimension {
    pub name: String,
    pub options: Vec<String>,
    pub reference: String,
}

impl Dimension {
    pub fn reference_index(&self) -> usize {
        self.options
            .iter()
            .position(|o| *o == self.reference)
            .expect("validated reference")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeChoice {
    pub pooled: SeType,
    pub author_fixed_effects: SeType,
}

impl Default for SeChoice {
    fn default() -> Self {
        SeChoice {
            pooled: SeType::Hc1,
            author_fixed_effects: SeType::ClusterAuthor,
        }
    }
}

/// Outlier limits used when a cell sets `outliers = excluded`. The window
/// is a label such as `"5"` or `"horizon"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierLimits {
    pub max_refs: Option<u32>,
    pub max_cites: Option<u32>,
    pub window: String,
}

impl Default for OutlierLimits {
    fn default() -> Self {
        OutlierLimits {
            max_refs: Some(200),
            max_cites: Some(200),
            window: "5".into(),
        }
    }
}

/// A factorial grid of model specifications, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub dimensions: Vec<Dimension>,
    #[serde(default)]
    pub fixed_covariates: Vec<Covariate>,
    #[serde(default)]
    pub nr_mode: NrMode,
    #[serde(default)]
    pub outlier_rule: OutlierLimits,
    #[serde(default = "default_min_papers")]
    pub min_papers_per_author: u32,
    #[serde(default)]
    pub se: SeChoice,
    #[serde(default)]
    pub team_size_coding: TeamSizeCoding,
    /// Individually named specifications, dimension name to option label.
    #[serde(default)]
    pub named_models: BTreeMap<String, BTreeMap<String, String>>,
    /// Named model whose estimate anchors percent-of-benchmark.
    #[serde(default)]
    pub benchmark: Option<String>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_min_papers() -> u32 {
    2
}

fn default_alpha() -> f64 {
    0.05
}

/// One cell of the grid: option index per dimension and the resolved model,
/// or the reason it cannot be run.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// 1-based position in canonical order.
    pub model_id: usize,
    pub options: Vec<usize>,
    pub model: std::result::Result<ModelSpec, String>,
}

impl UniverseSpec {
    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let spec: UniverseSpec =
            serde_json::from_str(text).map_err(|e| Error::schema(source, e.to_string()))?;
        spec.validate().map_err(|e| match e {
            Error::Invalid(m) => Error::schema(source, m),
            other => other,
        })?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// The grid with 5 indices × 4 windows × citation counts × reference
    /// counts × outliers × estimator.
    pub fn table4() -> Self {
        Self::from_json(include_str!("../../universes/table4.json"), "table4.json")
            .expect("bundled universe is valid")
    }

    /// The reduced fixed-effects grid with citation counts always included.
    pub fn table7() -> Self {
        Self::from_json(include_str!("../../universes/table7.json"), "table7.json")
            .expect("bundled universe is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for d in &self.dimensions {
            if !DIMENSIONS.contains(&d.name.as_str()) {
                return Err(Error::Invalid(format!(
                    "unknown dimension {:?}; expected one of {}",
                    d.name,
                    DIMENSIONS.join(", ")
                )));
            }
            if !seen.insert(d.name.as_str()) {
                return Err(Error::Invalid(format!("dimension {:?} listed twice", d.name)));
            }
            if d.options.is_empty() {
                return Err(Error::Invalid(format!("dimension {:?} has no options", d.name)));
            }
            let unique: BTreeSet<&String> = d.options.iter().collect();
            if unique.len() != d.options.len() {
                return Err(Error::Invalid(format!("dimension {:?} repeats an option", d.name)));
            }
            if !d.options.contains(&d.reference) {
                return Err(Error::Invalid(format!(
                    "reference {:?} is not an option of {:?}",
                    d.reference, d.name
                )));
            }
            for o in &d.options {
                check_option(&d.name, o)?;
            }
        }
        for (name, settings) in &self.named_models {
            for (dim, o) in settings {
                if !DIMENSIONS.contains(&dim.as_str()) {
                    return Err(Error::Invalid(format!("named model {name}: unknown dimension {dim:?}")));
                }
                check_option(dim, o)?;
            }
        }
        if let Some(b) = &self.benchmark {
            if !self.named_models.contains_key(b) {
                return Err(Error::Invalid(format!("benchmark {b:?} is not a named model")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Invalid(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        check_option("window", &self.outlier_rule.window)?;
        Ok(())
    }

    /// Product of option counts.
    pub fn size(&self) -> usize {
        self.dimensions.iter().map(|d| d.options.len()).product()
    }

    /// Every cell in mixed-radix order, first dimension slowest.
    pub fn enumerate(&self, horizon: i32) -> Vec<Cell> {
        let radix: Vec<usize> = self.dimensions.iter().map(|d| d.options.len()).collect();
        let k = self.size();
        (0..k)
            .map(|i| {
                let mut rem = i;
                let mut options = vec![0; radix.len()];
                for (slot, &r) in options.iter_mut().zip(&radix).rev() {
                    *slot = rem % r;
                    rem /= r;
                }
                let settings: BTreeMap<String, String> = self
                    .dimensions
                    .iter()
                    .zip(&options)
                    .map(|(d, &o)| (d.name.clone(), d.options[o].clone()))
                    .collect();
                let model = self.resolve(&settings, horizon).map_err(|e| e.to_string());
                Cell {
                    model_id: i + 1,
                    options,
                    model,
                }
            })
            .collect()
    }

    /// Turns dimension settings into a model. Unset dimensions take the
    /// first option of the universe's dimension, or the built-in default
    /// (`DI1`, horizon, no citation or reference counts, outliers kept,
    /// fixed effects).
    pub fn resolve(&self, settings: &BTreeMap<String, String>, horizon: i32) -> Result<ModelSpec> {
        let get = |name: &str, fallback: &'static str| -> String {
            settings
                .get(name)
                .cloned()
                .or_else(|| {
                    self.dimensions
                        .iter()
                        .find(|d| d.name == name)
                        .map(|d| d.options[0].clone())
                })
                .unwrap_or_else(|| fallback.to_string())
        };
        let nr_mode = match settings.get("nr_mode") {
            Some(m) => m.parse()?,
            None => match self.dimensions.iter().find(|d| d.name == "nr_mode") {
                Some(d) => d.options[0].parse()?,
                None => self.nr_mode,
            },
        };
        let (threshold, mode_override) = parse_index(&get("index", "DI1"))?;
        let window = WindowSpec::parse_with_horizon(&get("window", "horizon"), horizon)?;
        let estimator = match get("estimator", "author_fixed_effects").as_str() {
            "pooled" => Estimator::Pooled,
            "author_fixed_effects" => Estimator::AuthorFixedEffects,
            other => return Err(Error::Invalid(format!("unknown estimator {other:?}"))),
        };
        let dv = Variant::new(threshold, window, mode_override.unwrap_or(nr_mode));
        let mut spec = ModelSpec::new(dv, estimator).with_covariates(&self.fixed_covariates);
        spec.se_type = match estimator {
            Estimator::Pooled => self.se.pooled,
            Estimator::AuthorFixedEffects => self.se.author_fixed_effects,
        };
        spec.team_size_coding = self.team_size_coding;
        spec.min_papers_per_author = self.min_papers_per_author;
        if included(&get("citation_counts", "excluded"))? {
            spec.covariates.insert(Covariate::LogCites);
        }
        if included(&get("reference_counts", "excluded"))? {
            spec.covariates.insert(Covariate::LogRefs);
        }
        if !included(&get("outliers", "included"))? {
            spec.outliers = Some(OutlierRule {
                max_refs: self.outlier_rule.max_refs,
                max_cites: self.outlier_rule.max_cites,
                window: WindowSpec::parse_with_horizon(&self.outlier_rule.window, horizon)?,
            });
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Every disruption variant the grid and the named models need.
    pub fn required_variants(&self, horizon: i32) -> Vec<Variant> {
        let mut out: Vec<Variant> = Vec::new();
        let mut push = |v: Variant| {
            if !out.contains(&v) {
                out.push(v);
            }
        };
        for cell in self.enumerate(horizon) {
            if let Ok(m) = cell.model {
                push(m.dv);
            }
        }
        for settings in self.named_models.values() {
            if let Ok(m) = self.resolve(settings, horizon) {
                push(m.dv);
            }
        }
        out
    }

    /// Every citation window a DV or an outlier rule refers to.
    pub fn required_windows(&self, horizon: i32) -> Vec<WindowSpec> {
        let mut w: Vec<WindowSpec> = self.required_variants(horizon).iter().map(|v| v.window).collect();
        w.sort_unstable();
        w.dedup();
        w
    }

    pub fn dimension_labels(&self, options: &[usize]) -> Vec<&str> {
        self.dimensions
            .iter()
            .zip(options)
            .map(|(d, &o)| d.options[o].as_str())
            .collect()
    }
}

fn parse_index(s: &str) -> Result<(u32, Option<NrMode>)> {
    let bad = || Error::Invalid(format!("bad index option {s:?}; expected DI<b>[/legacy|/consistent]"));
    let rest = s.strip_prefix("DI").ok_or_else(bad)?;
    let (b, mode) = match rest.split_once('/') {
        Some((b, m)) => (b, Some(m.parse::<NrMode>().map_err(|_| bad())?)),
        None => (rest, None),
    };
    let b: u32 = b.parse().map_err(|_| bad())?;
    if b == 0 {
        return Err(bad());
    }
    Ok((b, mode))
}

fn included(s: &str) -> Result<bool> {
    match s {
        "included" => Ok(true),
        "excluded" => Ok(false),
        other => Err(Error::Invalid(format!(
            "expected \"included\" or \"excluded\", got {other:?}"
        ))),
    }
}

fn check_option(dim: &str, o: &str) -> Result<()> {
    match dim {
        "index" => parse_index(o).map(|_| ()),
        "window" => WindowSpec::parse_with_horizon(o, 0).map(|_| ()),
        "citation_counts" | "reference_counts" | "outliers" => included(o).map(|_| ()),
        "estimator" => match o {
            "pooled" | "author_fixed_effects" => Ok(()),
            _ => Err(Error::Invalid(format!("unknown estimator {o:?}"))),
        },
        "nr_mode" => o.parse::<NrMode>().map(|_| ()),
        _ => Err(Error::Invalid(format!("unknown dimension {dim:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(dims: Vec<(&str, Vec<&str>)>) -> UniverseSpec {
        let dimensions = dims
            .into_iter()
            .map(|(n, o)| Dimension {
                name: n.into(),
                reference: o[0].into(),
                options: o.into_iter().map(String::from).collect(),
            })
            .collect();
        UniverseSpec {
            name: "t".into(),
            description: String::new(),
            dimensions,
            fixed_covariates: vec![],
            nr_mode: NrMode::Consistent,
            outlier_rule: OutlierLimits::default(),
            min_papers_per_author: 2,
            se: SeChoice::default(),
            team_size_coding: TeamSizeCoding::Continuous,
            named_models: BTreeMap::new(),
            benchmark: None,
            alpha: 0.05,
        }
    }

    #[test]
    fn bundled_sizes() {
        assert_eq!(UniverseSpec::table4().enumerate(2023).len(), 320);
        assert_eq!(UniverseSpec::table7().enumerate(2023).len(), 60);
    }

    #[test]
    fn single_cell() {
        let u = tiny(vec![("index", vec!["DI2"]), ("estimator", vec!["pooled"])]);
        let cells = u.enumerate(2023);
        assert_eq!(cells.len(), 1);
        let m = cells[0].model.as_ref().unwrap();
        assert_eq!(m.dv.threshold, 2);
        assert_eq!(m.estimator, Estimator::Pooled);
        assert_eq!(m.se_type, SeType::Hc1);
    }

    #[test]
    fn mixed_radix_first_dimension_slowest() {
        let u = tiny(vec![("index", vec!["DI1", "DI2"]), ("window", vec!["5", "10", "15"])]);
        let opts: Vec<Vec<usize>> = u.enumerate(2023).into_iter().map(|c| c.options).collect();
        assert_eq!(opts[0], vec![0, 0]);
        assert_eq!(opts[1], vec![0, 1]);
        assert_eq!(opts[3], vec![1, 0]);
        assert_eq!(opts[5], vec![1, 2]);
    }

    #[test]
    fn infeasible_cell_is_flagged() {
        let mut u = tiny(vec![("estimator", vec!["pooled", "author_fixed_effects"])]);
        u.se.author_fixed_effects = SeType::Hc1;
        let cells = u.enumerate(2023);
        assert!(cells[0].model.is_ok());
        assert!(cells[1].model.is_err());
    }

    #[test]
    fn rejects_bad_reference_and_unknown_dimension() {
        let mut u = tiny(vec![("index", vec!["DI1"])]);
        u.dimensions[0].reference = "DI9".into();
        assert!(u.validate().is_err());
        let u = tiny(vec![("colour", vec!["red"])]);
        assert!(u.validate().is_err());
    }

    #[test]
    fn horizon_resolves_against_corpus() {
        let u = tiny(vec![("window", vec!["horizon"])]);
        let m = u.enumerate(2019).remove(0).model.unwrap();
        assert_eq!(m.dv.window, WindowSpec::Horizon(2019));
    }

    #[test]
    fn outliers_excluded_sets_rule() {
        let u = tiny(vec![("outliers", vec!["included", "excluded"])]);
        let cells = u.enumerate(2023);
        assert!(cells[0].model.as_ref().unwrap().outliers.is_none());
        let rule = cells[1].model.as_ref().unwrap().outliers.unwrap();
        assert_eq!(rule.max_refs, Some(200));
        assert_eq!(rule.window, WindowSpec::Years(5));
    }
}
