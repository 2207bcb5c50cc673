//! Data-generating process: a random causal graph over the covariate
//! columns, with treatment, outcome and censoring nodes, and the simulation
//! of instance pairs from it.
//!
//! Every parent of every simulated node is a covariate column, so there is
//! no unmeasured confounding by construction. Binary nodes use a logistic
//! link whose intercept is calibrated to hit the configured rate.

mod config;
mod covariates;
mod tracks;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

pub use config::{load_configs, parse_configs, DgpConfig};
pub use covariates::SyntheticCovariates;
pub use tracks::{
    generate_censoring_track, generate_scaling_track, generate_track, CENSORING_SIZE,
    SCALING_SIZES,
};

use crate::data_model::{
    CounterfactualRecord, CovariateTable, InstancePair, ObservationRecord, Outcome, Ufid,
};
use crate::error::{Error, Result};

/// Clamp applied to a standardized predictor before the exp transform.
pub const EXP_CLAMP: f64 = 10.0;
const CALIBRATION_BRACKET: f64 = 40.0;
const CALIBRATION_TOLERANCE: f64 = 1e-4;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Hash of a list of integers, used to derive independent seeds.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

pub(crate) fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

/// File identifier for an instance: a hash prefix that reveals nothing
/// about the generating process.
pub fn instance_ufid(model_seed: u64, instance_seed: u64) -> Ufid {
    let mut h = Sha256::new();
    h.update(b"ufid");
    h.update(model_seed.to_le_bytes());
    h.update(instance_seed.to_le_bytes());
    let digest = h.finalize();
    let hex: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
    hex[..Ufid::LEN].parse().expect("hex prefix is a valid ufid")
}

/// Intercept `c` such that `mean(sigmoid(score + c))` is within 1e-4 of
/// `target_rate`, found by bisection over `[-40, 40]`.
pub fn calibrate_intercept(scores: &[f64], target_rate: f64) -> Result<f64> {
    if scores.is_empty() || scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Invalid(
            "calibration needs a non-empty list of finite scores".into(),
        ));
    }
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(Error::Calibration {
            target: target_rate,
        });
    }
    let rate = |c: f64| scores.iter().map(|s| sigmoid(s + c)).sum::<f64>() / scores.len() as f64;
    let (mut lo, mut hi) = (-CALIBRATION_BRACKET, CALIBRATION_BRACKET);
    if rate(lo) > target_rate || rate(hi) < target_rate {
        return Err(Error::Calibration {
            target: target_rate,
        });
    }
    let mut mid = 0.0;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let r = rate(mid);
        if r == target_rate {
            break;
        }
        if r < target_rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    if (rate(mid) - target_rate).abs() > CALIBRATION_TOLERANCE {
        return Err(Error::Calibration {
            target: target_rate,
        });
    }
    Ok(mid)
}

/// A monomial over standardized covariates: the product of the listed
/// columns (repeats allowed) times the coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub indices: Vec<usize>,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub center: f64,
    pub scale: f64,
}

impl Standardizer {
    fn fit(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let center = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - center).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        Standardizer {
            center,
            scale: if sd > 1e-12 { sd } else { 1.0 },
        }
    }

    fn apply(&self, v: f64) -> f64 {
        (v - self.center) / self.scale
    }
}

/// Polynomial predictor of one simulated node, standardized to mean 0 and
/// standard deviation 1 over the covariate table; optionally followed by a
/// clamped exp transform and a second standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFunction {
    pub terms: Vec<Term>,
    pub poly: Standardizer,
    pub exp: Option<Standardizer>,
}

impl NodeFunction {
    fn polynomial(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * t.indices.iter().map(|&i| x[i]).product::<f64>())
            .sum()
    }

    /// `x` is a row of standardized covariates.
    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        let v = self.poly.apply(self.polynomial(x));
        match &self.exp {
            Some(s) => s.apply(v.clamp(-EXP_CLAMP, EXP_CLAMP).exp()),
            None => v,
        }
    }

    fn fit(terms: Vec<Term>, use_exp: bool, rows: &[Vec<f64>]) -> Self {
        let identity = Standardizer {
            center: 0.0,
            scale: 1.0,
        };
        let mut f = NodeFunction {
            terms,
            poly: identity,
            exp: None,
        };
        if f.terms.is_empty() {
            return f;
        }
        let raw: Vec<f64> = rows.iter().map(|x| f.polynomial(x)).collect();
        f.poly = Standardizer::fit(&raw);
        if use_exp {
            let transformed: Vec<f64> = raw
                .iter()
                .map(|&v| f.poly.apply(v).clamp(-EXP_CLAMP, EXP_CLAMP).exp())
                .collect();
            f.exp = Some(Standardizer::fit(&transformed));
        }
        f
    }
}

/// An instantiated DGP: parent sets, node functions and calibrated
/// intercepts.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpModel {
    pub config: DgpConfig,
    pub treatment_parents: Vec<usize>,
    pub outcome_parents: Vec<usize>,
    pub censoring_parents: Vec<usize>,
    pub treatment: NodeFunction,
    pub outcome_base: NodeFunction,
    pub outcome_effect: NodeFunction,
    pub censoring: NodeFunction,
    pub treatment_intercept: f64,
    /// `-inf` when the config has no censoring.
    pub censoring_intercept: f64,
    /// Weight of the treatment value in the censoring predictor; zero unless
    /// censoring depends on treatment.
    pub censoring_treatment_coef: f64,
    column_scaling: Vec<Standardizer>,
}

impl DgpModel {
    /// Distinct covariates feeding any active node; censoring parents count
    /// only when the model censors.
    pub fn n_covariates_used(&self) -> usize {
        let censoring: &[usize] = if self.config.censoring_rate > 0.0 {
            &self.censoring_parents
        } else {
            &[]
        };
        let mut all: Vec<usize> = self
            .treatment_parents
            .iter()
            .chain(&self.outcome_parents)
            .chain(censoring)
            .copied()
            .collect();
        all.sort_unstable();
        all.dedup();
        all.len()
    }

    fn standardized_row(&self, covariates: &CovariateTable, row: usize) -> Vec<f64> {
        covariates
            .row(row)
            .iter()
            .zip(&self.column_scaling)
            .map(|(&v, s)| s.apply(v))
            .collect()
    }

    pub fn treatment_probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.treatment.eval(x) + self.treatment_intercept)
    }

    pub fn censoring_probability(&self, x: &[f64], treated: bool) -> f64 {
        if self.censoring_intercept == f64::NEG_INFINITY {
            return 0.0;
        }
        let z = if treated { self.censoring_treatment_coef } else { 0.0 };
        sigmoid(self.censoring.eval(x) + z + self.censoring_intercept)
    }

    /// Expected untreated outcome, before noise.
    pub fn base_outcome(&self, x: &[f64]) -> f64 {
        self.outcome_base.eval(x)
    }

    /// Expected treatment effect, before effect noise.
    pub fn effect(&self, x: &[f64]) -> f64 {
        self.config.base_effect + self.config.effect_heterogeneity * self.outcome_effect.eval(x)
    }

    pub fn metadata(&self) -> DgpMetadata {
        DgpMetadata {
            n_covariates: self.n_covariates_used(),
            n_treatment_parents: self.treatment_parents.len(),
            n_outcome_parents: self.outcome_parents.len(),
            n_censoring_parents: self.censoring_parents.len(),
            n_confounders: self.config.n_confounders,
            censoring_depends_on_treatment: self.config.censoring_depends_on_treatment,
            poly_degree: self.config.poly_degree,
            use_exp_transform: self.config.use_exp_transform,
            prevalence: self.config.treatment_prevalence,
            censoring_rate: self.config.censoring_rate,
        }
    }
}

/// What kind of simulation produced an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpMetadata {
    pub n_covariates: usize,
    pub n_treatment_parents: usize,
    pub n_outcome_parents: usize,
    pub n_censoring_parents: usize,
    pub n_confounders: usize,
    pub censoring_depends_on_treatment: bool,
    pub poly_degree: u32,
    pub use_exp_transform: bool,
    pub prevalence: f64,
    pub censoring_rate: f64,
}

fn random_terms(parents: &[usize], degree: u32, rng: &mut ChaCha8Rng) -> Vec<Term> {
    let mut terms: Vec<Term> = parents
        .iter()
        .map(|&p| Term {
            indices: vec![p],
            coefficient: rng.sample(StandardNormal),
        })
        .collect();
    if degree >= 2 {
        for _ in 0..parents.len() {
            let k = rng.random_range(2..=degree) as usize;
            let mut indices: Vec<usize> = (0..k)
                .map(|_| parents[rng.random_range(0..parents.len())])
                .collect();
            indices.sort_unstable();
            terms.push(Term {
                indices,
                coefficient: rng.sample(StandardNormal),
            });
        }
    }
    terms
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Draws the random graph and coefficients for `config` over `covariates`.
/// Deterministic in `(config.seed, covariates)`.
pub fn build_model(config: &DgpConfig, covariates: &CovariateTable) -> Result<DgpModel> {
    let p = covariates.n_features();
    config.validate(p)?;
    let mut rng = rng_for(&[config.seed, 0x6d6f_6465_6c]);

    // confounders first, then outcome-only and treatment-only columns
    let distinct = config.n_outcome_parents + config.n_treatment_parents - config.n_confounders;
    let picked = index::sample(&mut rng, p, distinct).into_vec();
    let k = config.n_confounders;
    let outcome_only = config.n_outcome_parents - k;
    let confounders = &picked[..k];
    let outcome_parents = sorted([confounders, &picked[k..k + outcome_only]].concat());
    let treatment_parents = sorted([confounders, &picked[k + outcome_only..]].concat());
    let censoring_parents = sorted(index::sample(&mut rng, p, config.n_censoring_parents).into_vec());

    let column_scaling: Vec<Standardizer> = (0..p)
        .map(|j| {
            let col: Vec<f64> = (0..covariates.n_rows()).map(|i| covariates.get(i, j)).collect();
            Standardizer::fit(&col)
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..covariates.n_rows())
        .map(|i| {
            covariates
                .row(i)
                .iter()
                .zip(&column_scaling)
                .map(|(&v, s)| s.apply(v))
                .collect()
        })
        .collect();

    let degree = config.poly_degree;
    let use_exp = config.use_exp_transform;
    let treatment = NodeFunction::fit(random_terms(&treatment_parents, degree, &mut rng), use_exp, &rows);
    let outcome_base = NodeFunction::fit(random_terms(&outcome_parents, degree, &mut rng), use_exp, &rows);
    let outcome_effect = NodeFunction::fit(random_terms(&outcome_parents, degree, &mut rng), use_exp, &rows);
    let censoring = NodeFunction::fit(random_terms(&censoring_parents, degree, &mut rng), use_exp, &rows);
    let censoring_treatment_coef: f64 = if config.censoring_depends_on_treatment {
        rng.sample(StandardNormal)
    } else {
        0.0
    };

    let treatment_scores: Vec<f64> = rows.iter().map(|x| treatment.eval(x)).collect();
    let treatment_intercept = calibrate_intercept(&treatment_scores, config.treatment_prevalence)?;

    let censoring_intercept = if config.censoring_rate > 0.0 {
        let scores: Vec<f64> = rows
            .iter()
            .zip(&treatment_scores)
            .map(|(x, &t)| {
                let treated = rng.random::<f64>() < sigmoid(t + treatment_intercept);
                censoring.eval(x) + if treated { censoring_treatment_coef } else { 0.0 }
            })
            .collect();
        calibrate_intercept(&scores, config.censoring_rate)?
    } else {
        f64::NEG_INFINITY
    };

    Ok(DgpModel {
        config: config.clone(),
        treatment_parents,
        outcome_parents,
        censoring_parents,
        treatment,
        outcome_base,
        outcome_effect,
        censoring,
        treatment_intercept,
        censoring_intercept,
        censoring_treatment_coef,
        column_scaling,
    })
}

/// Simulates one instance of `n` rows drawn without replacement from
/// `covariates`. Randomness depends only on `(model seed, instance_seed)`.
pub fn simulate_instance(
    model: &DgpModel,
    covariates: &CovariateTable,
    n: usize,
    instance_seed: u64,
) -> Result<(InstancePair, DgpMetadata)> {
    if n > covariates.n_rows() {
        return Err(Error::NotEnoughRows {
            requested: n,
            available: covariates.n_rows(),
        });
    }
    if n == 0 {
        return Err(Error::Invalid("instance size must be at least 1".into()));
    }
    if covariates.n_features() != model.column_scaling.len() {
        return Err(Error::Invalid(format!(
            "model was built on {} covariates, table has {}",
            model.column_scaling.len(),
            covariates.n_features()
        )));
    }
    let mut rng = rng_for(&[model.config.seed, instance_seed]);
    let mut rows = index::sample(&mut rng, covariates.n_rows(), n).into_vec();
    rows.sort_unstable();

    let noise_sd = model.config.noise_sd;
    let effect_noise_sd = noise_sd * model.config.effect_heterogeneity;
    let mut observations = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for &row in &rows {
        let x = model.standardized_row(covariates, row);
        let treated = rng.random::<f64>() < model.treatment_probability(&x);
        let eps: f64 = rng.sample(StandardNormal);
        let eps_effect: f64 = rng.sample(StandardNormal);
        let y0 = model.base_outcome(&x) + noise_sd * eps;
        let y1 = y0 + model.effect(&x) + effect_noise_sd * eps_effect;
        let censored = rng.random::<f64>() < model.censoring_probability(&x, treated);
        let y = if censored {
            Outcome::Censored
        } else {
            Outcome::Observed(if treated { y1 } else { y0 })
        };
        let sample_id = covariates.sample_ids()[row].clone();
        observations.push(ObservationRecord {
            sample_id: sample_id.clone(),
            treated,
            y,
        });
        labels.push(CounterfactualRecord { sample_id, y0, y1 });
    }
    let ufid = instance_ufid(model.config.seed, instance_seed);
    let pair = InstancePair::new(ufid, observations, labels)?;
    Ok((pair, model.metadata()))
}
