use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one_u32() -> u32 {
    1
}

fn one_usize() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

/// Parameters of one data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub n_outcome_parents: usize,
    pub n_treatment_parents: usize,
    #[serde(default)]
    pub n_censoring_parents: usize,
    /// Covariates shared between the treatment and outcome parent sets.
    #[serde(default)]
    pub n_confounders: usize,
    pub treatment_prevalence: f64,
    #[serde(default)]
    pub censoring_rate: f64,
    #[serde(default)]
    pub censoring_depends_on_treatment: bool,
    #[serde(default = "one_u32")]
    pub poly_degree: u32,
    #[serde(default)]
    pub use_exp_transform: bool,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub effect_heterogeneity: f64,
    /// Constant part of the treatment effect.
    #[serde(default = "one_f64")]
    pub base_effect: f64,
    #[serde(default = "one_usize")]
    pub instances_per_size: usize,
    pub seed: u64,
}

impl DgpConfig {
    /// Checks the parameter ranges and that the parent sets fit into
    /// `n_covariates` columns.
    pub fn validate(&self, n_covariates: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("seed {}: {msg}", self.seed)));
        if self.n_confounders > self.n_outcome_parents.min(self.n_treatment_parents) {
            return fail(format!(
                "n_confounders {} exceeds min(n_outcome_parents, n_treatment_parents)",
                self.n_confounders
            ));
        }
        let distinct = self.n_outcome_parents + self.n_treatment_parents - self.n_confounders;
        for (name, count) in [
            ("n_outcome_parents", self.n_outcome_parents),
            ("n_treatment_parents", self.n_treatment_parents),
            ("n_censoring_parents", self.n_censoring_parents),
            ("outcome and treatment parents combined", distinct),
        ] {
            if count > n_covariates {
                return fail(format!(
                    "{name} = {count} exceeds the {n_covariates} available covariates"
                ));
            }
        }
        if !(self.treatment_prevalence > 0.0 && self.treatment_prevalence < 1.0) {
            return fail(format!(
                "treatment_prevalence {} must lie in (0, 1)",
                self.treatment_prevalence
            ));
        }
        if !(self.censoring_rate >= 0.0 && self.censoring_rate < 1.0) {
            return fail(format!(
                "censoring_rate {} must lie in [0, 1)",
                self.censoring_rate
            ));
        }
        if self.poly_degree < 1 {
            return fail("poly_degree must be at least 1".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return fail(format!("noise_sd {} must be finite and >= 0", self.noise_sd));
        }
        if !(self.effect_heterogeneity >= 0.0 && self.effect_heterogeneity.is_finite()) {
            return fail(format!(
                "effect_heterogeneity {} must be finite and >= 0",
                self.effect_heterogeneity
            ));
        }
        if !self.base_effect.is_finite() {
            return fail("base_effect must be finite".into());
        }
        if self.instances_per_size == 0 {
            return fail("instances_per_size must be at least 1".into());
        }
        Ok(())
    }
}

/// Parses a TOML config: either a single table of `DgpConfig` keys or a
/// list of `[[dgp]]` tables.
pub fn parse_configs(text: &str) -> Result<Vec<DgpConfig>> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let configs = if table.contains_key("dgp") {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Many {
            dgp: Vec<DgpConfig>,
        }
        table
            .try_into::<Many>()
            .map_err(|e| Error::Config(e.to_string()))?
            .dgp
    } else {
        vec![table
            .try_into::<DgpConfig>()
            .map_err(|e| Error::Config(e.to_string()))?]
    };
    if configs.is_empty() {
        return Err(Error::Config("no [[dgp]] entries".into()));
    }
    Ok(configs)
}

pub fn load_configs(path: &Path) -> Result<Vec<DgpConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_configs(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
