//! Domain types shared by every other module, plus the true-effect
//! computations on counter-factual labels.
//!
//! Effects are additive: the individual effect is `y1 - y0` and the
//! population effect is its mean over the instance.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Seven-character lowercase hexadecimal file identifier naming an
/// observation/label file pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ufid(String);

impl Ufid {
    pub const LEN: usize = 7;

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_valid(s: &str) -> bool {
        s.len() == Self::LEN && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
    }
}

impl FromStr for Ufid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if Self::is_valid(s) {
            Ok(Ufid(s.to_owned()))
        } else {
            Err(Error::Invalid(format!(
                "invalid ufid {s:?}: expected 7 lowercase hex characters"
            )))
        }
    }
}

impl fmt::Display for Ufid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Numeric feature matrix indexed by sample id (the `x.csv` role).
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    sample_ids: Vec<String>,
    feature_names: Vec<String>,
    // row-major, sample_ids.len() * feature_names.len()
    values: Vec<f64>,
    index: HashMap<String, usize>,
}

impl CovariateTable {
    pub fn new(
        sample_ids: Vec<String>,
        feature_names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != sample_ids.len() * feature_names.len() {
            return Err(Error::Invalid(format!(
                "covariate matrix has {} cells, expected {} rows x {} columns",
                values.len(),
                sample_ids.len(),
                feature_names.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite covariate value {v}")));
        }
        let mut index = HashMap::with_capacity(sample_ids.len());
        for (row, id) in sample_ids.iter().enumerate() {
            if index.insert(id.clone(), row).is_some() {
                return Err(Error::Invalid(format!("duplicate sample_id {id:?}")));
            }
        }
        Ok(CovariateTable {
            sample_ids,
            feature_names,
            values,
            index,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn row_of(&self, sample_id: &str) -> Option<usize> {
        self.index.get(sample_id).copied()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_features() + col]
    }
}

/// Observed outcome: a real value or the censoring marker (`NA` on disk).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Observed(f64),
    Censored,
}

impl Outcome {
    pub fn value(self) -> Option<f64> {
        match self {
            Outcome::Observed(y) => Some(y),
            Outcome::Censored => None,
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, Outcome::Censored)
    }
}

/// One row of an observation file.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub sample_id: String,
    pub treated: bool,
    pub y: Outcome,
}

impl ObservationRecord {
    pub fn z(&self) -> u8 {
        self.treated as u8
    }
}

/// One row of a label file: both counter-factual outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualRecord {
    pub sample_id: String,
    pub y0: f64,
    pub y1: f64,
}

impl CounterfactualRecord {
    pub fn effect(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// An observation file and its label file, sharing a ufid.
#[derive(Debug, Clone, PartialEq)]
pub struct InstancePair {
    ufid: Ufid,
    observations: Vec<ObservationRecord>,
    labels: Vec<CounterfactualRecord>,
}

impl InstancePair {
    pub fn new(
        ufid: Ufid,
        observations: Vec<ObservationRecord>,
        labels: Vec<CounterfactualRecord>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInstance(ufid.to_string()));
        }
        if let Some(r) = labels.iter().find(|r| !(r.y0.is_finite() && r.y1.is_finite())) {
            return Err(Error::Invalid(format!(
                "{ufid}: non-finite label for sample {:?}",
                r.sample_id
            )));
        }
        if let Some(r) = observations
            .iter()
            .find(|r| matches!(r.y, Outcome::Observed(y) if !y.is_finite()))
        {
            return Err(Error::Invalid(format!(
                "{ufid}: non-finite outcome for sample {:?}",
                r.sample_id
            )));
        }
        let obs_ids: HashSet<&str> = observations.iter().map(|r| r.sample_id.as_str()).collect();
        let label_ids: HashSet<&str> = labels.iter().map(|r| r.sample_id.as_str()).collect();
        if obs_ids.len() != observations.len() || label_ids.len() != labels.len() {
            return Err(Error::Invalid(format!("{ufid}: duplicate sample_id")));
        }
        if obs_ids != label_ids {
            let mut missing: Vec<String> =
                label_ids.difference(&obs_ids).map(|s| s.to_string()).collect();
            let mut extra: Vec<String> =
                obs_ids.difference(&label_ids).map(|s| s.to_string()).collect();
            missing.sort();
            extra.sort();
            return Err(Error::SampleMismatch {
                ufid: ufid.to_string(),
                missing,
                extra,
            });
        }
        Ok(InstancePair {
            ufid,
            observations,
            labels,
        })
    }

    pub fn ufid(&self) -> &Ufid {
        &self.ufid
    }

    pub fn observations(&self) -> &[ObservationRecord] {
        &self.observations
    }

    pub fn labels(&self) -> &[CounterfactualRecord] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }
}

/// One row of a population prediction file.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationPrediction {
    pub ufid: Ufid,
    pub effect_size: f64,
    /// Left CI edge; may be `-inf`.
    pub li: f64,
    /// Right CI edge; may be `+inf`.
    pub ri: f64,
}

impl PopulationPrediction {
    /// True when the point estimate lies outside its own interval. Such
    /// rows are scored anyway.
    pub fn estimate_outside_ci(&self) -> bool {
        !(self.li <= self.effect_size && self.effect_size <= self.ri)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndividualPrediction {
    pub sample_id: String,
    pub y0: f64,
    pub y1: f64,
}

/// Per-individual counter-factual predictions for one instance (`<ufid>.csv`).
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualPredictionSet {
    pub ufid: Ufid,
    pub rows: Vec<IndividualPrediction>,
}

/// Scores for one group of instances. Metrics that do not apply to a track
/// are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Metrics {
    pub enormse: Option<f64>,
    pub rmse: Option<f64>,
    pub bias: Option<f64>,
    pub coverage: Option<f64>,
    pub cic: Option<f64>,
    pub encis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsPerSize {
    pub n: usize,
    pub instance_count: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub per_size: Vec<MetricsPerSize>,
    pub aggregate: Metrics,
    /// Label instances that had no prediction and were excluded.
    pub missing: Vec<Ufid>,
    pub warnings: Vec<String>,
}

/// Mean of `y1 - y0` over the instance.
pub fn true_population_effect(labels: &[CounterfactualRecord]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInstance("labels".into()));
    }
    let sum: f64 = labels.iter().map(CounterfactualRecord::effect).sum();
    Ok(sum / labels.len() as f64)
}

pub fn true_individual_effects(labels: &[CounterfactualRecord]) -> Result<Vec<f64>> {
    if labels.is_empty() {
        return Err(Error::EmptyInstance("labels".into()));
    }
    Ok(labels.iter().map(CounterfactualRecord::effect).collect())
}
