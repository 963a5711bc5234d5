//! Least squares with classical, HC1 and author-clustered standard errors,
//! the within (author fixed-effects) transformation, and design matrices
//! built from a corpus and its disruption scores.

mod design;
mod model;
mod ols;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::disruption::{Variant, WindowSpec};
use crate::error::{Error, Result};

pub use design::{build_design, RowKey};
pub use model::{fit_model, ModelFit};
pub use ols::{
    fit, recover_author_effects, summarize_fit, within_transform, DesignMatrix, FitResult, GroupMeans,
    ReportRow,
};

/// Name of the team-size column under continuous coding.
pub const TEAM_SIZE: &str = "team_size";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Pooled,
    AuthorFixedEffects,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Pooled => "pooled",
            Estimator::AuthorFixedEffects => "author_fixed_effects",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeType {
    Classical,
    Hc1,
    ClusterAuthor,
}

impl SeType {
    pub fn as_str(self) -> &'static str {
        match self {
            SeType::Classical => "classical",
            SeType::Hc1 => "hc1",
            SeType::ClusterAuthor => "cluster_author",
        }
    }
}

impl fmt::Display for SeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    YearDummies,
    FieldDummies,
    /// `ln(citations)` and its square, counted in the DV window.
    LogCites,
    /// `ln(references)` and its square, linked plus unlinked.
    LogRefs,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeamSizeCoding {
    #[default]
    Continuous,
    /// One dummy per team size, size 1 (or the smallest present) as reference.
    Dummies,
}

/// Per-model outlier exclusion: a paper is dropped when it exceeds either limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutlierRule {
    pub max_refs: Option<u32>,
    pub max_cites: Option<u32>,
    /// Window in which `max_cites` is checked.
    pub window: WindowSpec,
}

/// One fully resolved regression.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dv: Variant,
    pub estimator: Estimator,
    pub covariates: BTreeSet<Covariate>,
    #[serde(default)]
    pub team_size_coding: TeamSizeCoding,
    #[serde(default)]
    pub outliers: Option<OutlierRule>,
    pub se_type: SeType,
    /// Panel threshold for the fixed-effects estimator.
    #[serde(default = "default_min_papers")]
    pub min_papers_per_author: u32,
}

fn default_min_papers() -> u32 {
    2
}

impl ModelSpec {
    pub fn new(dv: Variant, estimator: Estimator) -> Self {
        let se_type = match estimator {
            Estimator::Pooled => SeType::Hc1,
            Estimator::AuthorFixedEffects => SeType::ClusterAuthor,
        };
        ModelSpec {
            dv,
            estimator,
            covariates: BTreeSet::new(),
            team_size_coding: TeamSizeCoding::Continuous,
            outliers: None,
            se_type,
            min_papers_per_author: 2,
        }
    }

    pub fn with_covariates(mut self, covariates: &[Covariate]) -> Self {
        self.covariates.extend(covariates.iter().copied());
        self
    }

    pub fn with_outliers(mut self, rule: OutlierRule) -> Self {
        self.outliers = Some(rule);
        self
    }

    pub fn with_se(mut self, se_type: SeType) -> Self {
        self.se_type = se_type;
        self
    }

    pub fn has(&self, c: Covariate) -> bool {
        self.covariates.contains(&c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dv.threshold == 0 {
            return Err(Error::Invalid("coupling threshold must be at least 1".into()));
        }
        match (self.estimator, self.se_type) {
            (Estimator::AuthorFixedEffects, SeType::ClusterAuthor) => {}
            (Estimator::AuthorFixedEffects, se) => {
                return Err(Error::Invalid(format!(
                    "author fixed effects need author-clustered errors, got {se}"
                )))
            }
            (Estimator::Pooled, SeType::ClusterAuthor) => {
                return Err(Error::Invalid(
                    "pooled rows are papers; author clustering needs the author panel".into(),
                ))
            }
            _ => {}
        }
        if self.estimator == Estimator::AuthorFixedEffects && self.min_papers_per_author < 2 {
            return Err(Error::Invalid(
                "author fixed effects need at least two papers per author".into(),
            ));
        }
        Ok(())
    }
}
