//! Baseline estimators. All of them drop censored rows (complete-case
//! analysis), which is what makes them fail under informative censoring.

mod linalg;
mod logistic;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

pub use linalg::design_matrix;
pub use logistic::{fit_propensity, LogisticFit};

use crate::data_model::{
    CovariateTable, IndividualPrediction, IndividualPredictionSet, ObservationRecord,
    PopulationPrediction, Ufid,
};
use crate::dgp::rng_for;
use crate::error::{Error, Result};

/// Normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.96;
pub const PROPENSITY_CLIP: (f64, f64) = (0.01, 0.99);
pub const DEFAULT_BOOTSTRAP_REPS: usize = 200;
pub const OLS_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    DiffMeans,
    Ipw,
    Regression,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diff_means" => Ok(Method::DiffMeans),
            "ipw" => Ok(Method::Ipw),
            "regression" => Ok(Method::Regression),
            _ => Err(Error::Invalid(format!(
                "unknown method {s:?} (expected diff_means, ipw or regression)"
            ))),
        }
    }
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn arm_outcomes(obs: &[ObservationRecord], treated: bool) -> Vec<f64> {
    obs.iter()
        .filter(|r| r.treated == treated)
        .filter_map(|r| r.y.value())
        .collect()
}

/// Unadjusted difference of arm means over uncensored rows, with a Welch
/// normal-approximation 95% interval.
pub fn diff_means(ufid: &Ufid, obs: &[ObservationRecord]) -> Result<PopulationPrediction> {
    let treated = arm_outcomes(obs, true);
    let control = arm_outcomes(obs, false);
    for (name, arm) in [("treated", &treated), ("control", &control)] {
        if arm.len() < 2 {
            return Err(Error::DegenerateArm(format!(
                "{ufid}: {name} arm has {} uncensored samples, need 2",
                arm.len()
            )));
        }
    }
    let (m1, v1) = mean_var(&treated);
    let (m0, v0) = mean_var(&control);
    let effect = m1 - m0;
    let se = (v1 / treated.len() as f64 + v0 / control.len() as f64).sqrt();
    Ok(PopulationPrediction {
        ufid: ufid.clone(),
        effect_size: effect,
        li: effect - Z_95 * se,
        ri: effect + Z_95 * se,
    })
}

/// Self-normalized inverse-probability-weighted effect over uncensored
/// rows, given one propensity per observation (already clipped).
pub fn hajek_ate(obs: &[ObservationRecord], propensities: &[f64]) -> Result<f64> {
    if obs.len() != propensities.len() {
        return Err(Error::Invalid(format!(
            "{} propensities for {} observations",
            propensities.len(),
            obs.len()
        )));
    }
    let (mut num1, mut den1, mut num0, mut den0) = (0.0, 0.0, 0.0, 0.0);
    for (r, &p) in obs.iter().zip(propensities) {
        let Some(y) = r.y.value() else { continue };
        if r.treated {
            num1 += y / p;
            den1 += 1.0 / p;
        } else {
            num0 += y / (1.0 - p);
            den0 += 1.0 / (1.0 - p);
        }
    }
    if den1 == 0.0 || den0 == 0.0 {
        return Err(Error::DegenerateArm(
            "an arm has no uncensored samples".into(),
        ));
    }
    Ok(num1 / den1 - num0 / den0)
}

fn clip(p: f64) -> f64 {
    p.clamp(PROPENSITY_CLIP.0, PROPENSITY_CLIP.1)
}

/// IPW point estimate: logistic propensity on all rows (treatment is known
/// even when the outcome is censored), clipped, then Hájek weighting.
pub fn ipw_point_estimate(obs: &[ObservationRecord], covariates: &CovariateTable) -> Result<f64> {
    let x = design_matrix(covariates, obs.iter().map(|r| r.sample_id.as_str()))?;
    let z: Vec<bool> = obs.iter().map(|r| r.treated).collect();
    let fit = fit_propensity(&x, &z)?;
    let p: Vec<f64> = fit.predict(&x).into_iter().map(clip).collect();
    hajek_ate(obs, &p)
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// IPW estimate with a percentile-bootstrap 95% interval. Each replicate
/// resamples rows with replacement and refits the propensity model.
/// Replicates run in parallel on seeds derived from `seed`; replicates whose
/// refit fails are dropped, and fewer than half surviving is an error.
pub fn ipw_ate(
    ufid: &Ufid,
    obs: &[ObservationRecord],
    covariates: &CovariateTable,
    bootstrap_reps: usize,
    seed: u64,
) -> Result<PopulationPrediction> {
    let effect = ipw_point_estimate(obs, covariates)?;
    if bootstrap_reps == 0 {
        return Ok(PopulationPrediction {
            ufid: ufid.clone(),
            effect_size: effect,
            li: f64::NEG_INFINITY,
            ri: f64::INFINITY,
        });
    }
    let n = obs.len();
    let replicates: Vec<Option<f64>> = (0..bootstrap_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_for(&[seed, rep as u64]);
            let sample: Vec<ObservationRecord> = (0..n)
                .map(|_| obs[rng.random_range(0..n)].clone())
                .collect();
            ipw_point_estimate(&sample, covariates).ok()
        })
        .collect();
    let mut ok: Vec<f64> = replicates.into_iter().flatten().collect();
    if ok.len() * 2 < bootstrap_reps {
        return Err(Error::NonOverlap(format!(
            "{ufid}: only {} of {bootstrap_reps} bootstrap refits succeeded",
            ok.len()
        )));
    }
    ok.sort_by(f64::total_cmp);
    Ok(PopulationPrediction {
        ufid: ufid.clone(),
        effect_size: effect,
        li: percentile(&ok, 0.025),
        ri: percentile(&ok, 0.975),
    })
}

fn fit_arm(
    obs: &[ObservationRecord],
    covariates: &CovariateTable,
    treated: bool,
) -> Result<DVector<f64>> {
    let rows: Vec<&ObservationRecord> = obs
        .iter()
        .filter(|r| r.treated == treated && !r.y.is_censored())
        .collect();
    let p = covariates.n_features();
    if rows.len() < p + 2 {
        return Err(Error::DegenerateArm(format!(
            "{} arm has {} uncensored samples, need {}",
            if treated { "treated" } else { "control" },
            rows.len(),
            p + 2
        )));
    }
    let x = design_matrix(covariates, rows.iter().map(|r| r.sample_id.as_str()))?;
    let y = DVector::from_iterator(rows.len(), rows.iter().filter_map(|r| r.y.value()));
    let mut gram = x.tr_mul(&x);
    linalg::add_ridge(&mut gram, OLS_RIDGE);
    linalg::solve_spd(gram, &x.tr_mul(&y)).ok_or_else(|| {
        Error::DegenerateArm("outcome regression design is singular".into())
    })
}

/// Outcome regression per arm (ridge-stabilized least squares over
/// uncensored rows), predicting both counter-factual outcomes for every
/// sample, censored ones included.
pub fn regression_impute(
    ufid: &Ufid,
    obs: &[ObservationRecord],
    covariates: &CovariateTable,
) -> Result<IndividualPredictionSet> {
    let beta0 = fit_arm(obs, covariates, false)?;
    let beta1 = fit_arm(obs, covariates, true)?;
    let x = design_matrix(covariates, obs.iter().map(|r| r.sample_id.as_str()))?;
    let y0 = &x * beta0;
    let y1 = &x * beta1;
    let rows = obs
        .iter()
        .enumerate()
        .map(|(i, r)| IndividualPrediction {
            sample_id: r.sample_id.clone(),
            y0: y0[i],
            y1: y1[i],
        })
        .collect();
    Ok(IndividualPredictionSet {
        ufid: ufid.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::Outcome;
    use approx::assert_abs_diff_eq;

    fn ufid() -> Ufid {
        "abcdef0".parse().unwrap()
    }

    fn obs(rows: &[(bool, Option<f64>)]) -> Vec<ObservationRecord> {
        rows.iter()
            .enumerate()
            .map(|(i, &(treated, y))| ObservationRecord {
                sample_id: format!("s{i}"),
                treated,
                y: y.map_or(Outcome::Censored, Outcome::Observed),
            })
            .collect()
    }

    #[test]
    fn diff_means_zero_variance() {
        let o = obs(&[(true, Some(1.0)), (true, Some(1.0)), (false, Some(0.0)), (false, Some(0.0))]);
        let p = diff_means(&ufid(), &o).unwrap();
        assert_eq!(p.effect_size, 1.0);
        assert_eq!((p.li, p.ri), (1.0, 1.0));
    }

    #[test]
    fn diff_means_welch_interval() {
        // treated var 2 / 2 = 1, control var 0 -> se 1
        let o = obs(&[(true, Some(2.0)), (true, Some(4.0)), (false, Some(1.0)), (false, Some(1.0))]);
        let p = diff_means(&ufid(), &o).unwrap();
        assert_eq!(p.effect_size, 2.0);
        assert_abs_diff_eq!(p.li, 2.0 - 1.96, epsilon = 1e-15);
        assert_abs_diff_eq!(p.ri, 2.0 + 1.96, epsilon = 1e-15);
    }

    #[test]
    fn diff_means_drops_censored_and_rejects_degenerate() {
        let o = obs(&[(true, None), (true, None), (false, None), (false, None)]);
        assert!(matches!(diff_means(&ufid(), &o), Err(Error::DegenerateArm(_))));
        let o = obs(&[
            (true, Some(3.0)),
            (true, Some(3.0)),
            (true, None),
            (false, Some(1.0)),
            (false, Some(1.0)),
        ]);
        assert_eq!(diff_means(&ufid(), &o).unwrap().effect_size, 2.0);
    }

    #[test]
    fn hajek_with_constant_propensity_is_difference_of_means() {
        let o = obs(&[
            (true, Some(2.5)),
            (true, Some(4.0)),
            (true, None),
            (false, Some(1.0)),
            (false, Some(-0.3)),
            (false, Some(0.7)),
        ]);
        let dm = diff_means(&ufid(), &o).unwrap().effect_size;
        let h = hajek_ate(&o, &[0.5; 6]).unwrap();
        assert_abs_diff_eq!(h, dm, epsilon = 1e-12);
    }

    #[test]
    fn hajek_five_rows_by_hand() {
        let o = obs(&[
            (true, Some(3.0)),
            (true, Some(5.0)),
            (false, Some(1.0)),
            (false, Some(2.0)),
            (true, None),
        ]);
        let p = [0.2, 0.5, 0.4, 0.8, 0.9];
        // treated: (3/0.2 + 5/0.5) / (1/0.2 + 1/0.5) = 25/7
        // control: (1/0.6 + 2/0.2) / (1/0.6 + 1/0.2) = (35/3)/(20/3) = 7/4
        let expected = 25.0 / 7.0 - 7.0 / 4.0;
        assert_abs_diff_eq!(hajek_ate(&o, &p).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 0.0);
        assert_eq!(percentile(&v, 0.5), 2.0);
        assert_eq!(percentile(&v, 0.125), 0.5);
        assert_eq!(percentile(&v, 1.0), 4.0);
    }

    #[test]
    fn method_names() {
        assert_eq!("ipw".parse::<Method>().unwrap(), Method::Ipw);
        assert!("dr".parse::<Method>().is_err());
    }
}
