//! Classifier families with class weighting, probability output and model files.

mod ensemble;
mod linear;
mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::FeatureTable;

pub use ensemble::{
    deviance, fit_extra_trees, fit_gradient_boosting, fit_random_forest, fit_tree, tree_rng,
    Boosted, BoostingParams, ExtraTreesParams, Forest, ForestParams, MaxFeatures,
};
pub use linear::{
    fit_linear_svm, fit_logistic, hinge_objective, logistic_gradient, logistic_objective, platt,
    LinearModel, LogisticParams, Standardizer, SvmParams,
};
pub use tree::{Node, SplitMode, Tree, TreeParams};

/// First line of every model file.
pub const MODEL_MAGIC: &str = "WETMAP-MODEL";
pub const MODEL_VERSION: u32 = 1;

/// Per-class sample weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w_pos: f64,
    pub w_neg: f64,
}

impl ClassWeights {
    pub const UNIFORM: ClassWeights = ClassWeights {
        w_pos: 1.0,
        w_neg: 1.0,
    };

    pub fn of(&self, positive: bool) -> f64 {
        if positive {
            self.w_pos
        } else {
            self.w_neg
        }
    }
}

/// `w_c = n / (2 n_c)`.
pub fn balanced_weights(labels: &[bool]) -> Result<ClassWeights> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Class(format!(
            "both classes required, got {n_pos} positive and {n_neg} negative"
        )));
    }
    let n = labels.len() as f64;
    Ok(ClassWeights {
        w_pos: n / (2.0 * n_pos as f64),
        w_neg: n / (2.0 * n_neg as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    LinearSvm,
    RandomForest,
    ExtraTrees,
    GradientBoosting,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Logistic,
        Family::LinearSvm,
        Family::RandomForest,
        Family::ExtraTrees,
        Family::GradientBoosting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::LinearSvm => "linear_svm",
            Family::RandomForest => "random_forest",
            Family::ExtraTrees => "extra_trees",
            Family::GradientBoosting => "gradient_boosting",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model family {s:?}")))
    }
}

/// A model family together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Logistic(LogisticParams),
    LinearSvm(SvmParams),
    RandomForest(ForestParams),
    ExtraTrees(ExtraTreesParams),
    GradientBoosting(BoostingParams),
}

impl ModelSpec {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Logistic => ModelSpec::Logistic(Default::default()),
            Family::LinearSvm => ModelSpec::LinearSvm(Default::default()),
            Family::RandomForest => ModelSpec::RandomForest(Default::default()),
            Family::ExtraTrees => ModelSpec::ExtraTrees(Default::default()),
            Family::GradientBoosting => ModelSpec::GradientBoosting(Default::default()),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Logistic(_) => Family::Logistic,
            ModelSpec::LinearSvm(_) => Family::LinearSvm,
            ModelSpec::RandomForest(_) => Family::RandomForest,
            ModelSpec::ExtraTrees(_) => Family::ExtraTrees,
            ModelSpec::GradientBoosting(_) => Family::GradientBoosting,
        }
    }

    /// Replace the seed of seeded families.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ModelSpec::Logistic(_) => {}
            ModelSpec::LinearSvm(p) => p.seed = seed,
            ModelSpec::RandomForest(p) => p.seed = seed,
            ModelSpec::ExtraTrees(p) => p.seed = seed,
            ModelSpec::GradientBoosting(p) => p.seed = seed,
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelBody {
    Linear(LinearModel),
    Forest(Forest),
    Boosted(Boosted),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub family: Family,
    pub feature_names: Vec<String>,
    pub spec: ModelSpec,
    pub body: ModelBody,
}

impl TrainedModel {
    /// Positive-class probability; the vector must match `feature_names`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_names.len() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.feature_names.len(),
                x.len()
            )));
        }
        Ok(self.proba_unchecked(x))
    }

    pub(crate) fn proba_unchecked(&self, x: &[f64]) -> f64 {
        match &self.body {
            ModelBody::Linear(m) => m.proba(x),
            ModelBody::Forest(m) => m.proba(x),
            ModelBody::Boosted(m) => m.proba(x),
        }
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.par_iter().map(|r| self.predict_proba(r)).collect()
    }

    pub fn to_text(&self) -> Result<String> {
        let body = serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        Ok(format!("{MODEL_MAGIC} {MODEL_VERSION}\n{body}\n"))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (head, body) = text
            .split_once('\n')
            .ok_or_else(|| Error::Format("missing header line".into()))?;
        let mut parts = head.split_whitespace();
        if parts.next() != Some(MODEL_MAGIC) {
            return Err(Error::Format("not a model file (bad magic header)".into()));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Format("missing format version".into()))?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported model version {version} (expected {MODEL_VERSION})"
            )));
        }
        let model: TrainedModel =
            serde_json::from_str(body).map_err(|e| Error::Format(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let k = self.feature_names.len();
        let trees_ok = |trees: &[Tree]| {
            trees.iter().all(|t| {
                !t.nodes.is_empty()
                    && t.max_feature().is_none_or(|f| f < k)
                    && t.nodes.iter().all(|n| match n {
                        Node::Split { left, right, .. } => {
                            *left < t.nodes.len() && *right < t.nodes.len()
                        }
                        Node::Leaf { .. } => true,
                    })
            })
        };
        let ok = match &self.body {
            ModelBody::Linear(m) => {
                m.weights.len() == k
                    && m.standardizer.mean.len() == k
                    && m.standardizer.scale.len() == k
            }
            ModelBody::Forest(m) => trees_ok(&m.trees),
            ModelBody::Boosted(m) => trees_ok(&m.trees),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Format(
                "model parameters inconsistent with feature list".into(),
            ))
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Fit `spec` on raw feature rows.
pub fn fit_rows(
    spec: &ModelSpec,
    feature_names: &[String],
    rows: &[Vec<f64>],
    labels: &[bool],
    weights: &ClassWeights,
) -> Result<TrainedModel> {
    if rows.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} rows for {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if rows.iter().any(|r| r.len() != feature_names.len()) {
        return Err(Error::Shape("rows do not match the feature list".into()));
    }
    if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
        return Err(Error::Class(
            "training data must contain both classes".into(),
        ));
    }
    let body = match spec {
        ModelSpec::Logistic(p) => ModelBody::Linear(fit_logistic(rows, labels, weights, p)?),
        ModelSpec::LinearSvm(p) => ModelBody::Linear(fit_linear_svm(rows, labels, weights, p)?),
        ModelSpec::RandomForest(p) => {
            ModelBody::Forest(fit_random_forest(rows, labels, weights, p))
        }
        ModelSpec::ExtraTrees(p) => ModelBody::Forest(fit_extra_trees(rows, labels, weights, p)),
        ModelSpec::GradientBoosting(p) => {
            ModelBody::Boosted(fit_gradient_boosting(rows, labels, weights, p))
        }
    };
    Ok(TrainedModel {
        family: spec.family(),
        feature_names: feature_names.to_vec(),
        spec: *spec,
        body,
    })
}

/// Fit `spec` on a feature table.
pub fn fit(spec: &ModelSpec, table: &FeatureTable, weights: &ClassWeights) -> Result<TrainedModel> {
    fit_rows(spec, table.names(), table.rows(), &table.labels(), weights)
}
