//! The six evaluation metrics and their aggregation across dataset sizes.
//!
//! Per-size scores are computed over `D_n`, the instances with `n` samples.
//! Squared accuracy scores (ENoRMSE, RMSE) aggregate quadratically and the
//! rest (bias, coverage, CIC, ENCIS) linearly, both weighted by `n * |D_n|`
//! so that every sample carries equal weight.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;

use crate::data_model::{
    true_population_effect, AggregateReport, IndividualPredictionSet, Metrics, MetricsPerSize,
    PopulationPrediction, Ufid,
};
use crate::error::{Error, Result};
use crate::io::{self, ManifestRow};

/// Stabilization constant added to both sides of effect-normalized ratios.
pub const DELTA: f64 = 1e-7;

/// True and predicted population effect for one instance, with the CI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationRow {
    pub truth: f64,
    pub estimate: f64,
    pub li: f64,
    pub ri: f64,
}

/// One per-size score entering an aggregate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeScore {
    pub n: usize,
    pub instances: usize,
    pub value: f64,
}

fn non_empty<T>(rows: &[T]) -> Result<()> {
    if rows.is_empty() {
        Err(Error::NothingToScore)
    } else {
        Ok(())
    }
}

fn mean(iter: impl Iterator<Item = f64>, len: usize) -> f64 {
    iter.sum::<f64>() / len as f64
}

#[inline]
fn normalized_error_sq(truth: f64, estimate: f64) -> f64 {
    let r = 1.0 - (estimate + DELTA) / (truth + DELTA);
    r * r
}

/// Effect-normalized RMSE over population estimates.
pub fn enormse_population(rows: &[PopulationRow]) -> Result<f64> {
    non_empty(rows)?;
    Ok(mean(rows.iter().map(|r| normalized_error_sq(r.truth, r.estimate)), rows.len()).sqrt())
}

/// Effect-normalized RMSE over individual effects. Each element is one
/// instance's `(true effects, estimated effects)`, aligned by sample. The
/// inner mean is taken per instance first, so instances weigh equally
/// regardless of their size.
pub fn enormse_individual(instances: &[(&[f64], &[f64])]) -> Result<f64> {
    non_empty(instances)?;
    let mut total = 0.0;
    for (truth, est) in instances {
        if truth.is_empty() || truth.len() != est.len() {
            return Err(Error::Invalid(format!(
                "individual effects misaligned: {} true vs {} estimated",
                truth.len(),
                est.len()
            )));
        }
        total += mean(
            truth.iter().zip(est.iter()).map(|(&e, &ê)| normalized_error_sq(e, ê)),
            truth.len(),
        );
    }
    Ok((total / instances.len() as f64).sqrt())
}

pub fn rmse_population(rows: &[PopulationRow]) -> Result<f64> {
    non_empty(rows)?;
    Ok(mean(rows.iter().map(|r| (r.estimate - r.truth).powi(2)), rows.len()).sqrt())
}

/// Signed: positive means over-estimation.
pub fn bias_population(rows: &[PopulationRow]) -> Result<f64> {
    non_empty(rows)?;
    Ok(mean(rows.iter().map(|r| r.estimate - r.truth), rows.len()))
}

/// Fraction of instances whose closed interval `[li, ri]` holds the truth.
pub fn coverage(rows: &[PopulationRow]) -> Result<f64> {
    non_empty(rows)?;
    let hits = rows
        .iter()
        .filter(|r| r.li <= r.truth && r.truth <= r.ri)
        .count();
    Ok(hits as f64 / rows.len() as f64)
}

/// Confidence-interval credibility: mean of `|error| / (width + DELTA)`.
/// The `DELTA` keeps zero-width intervals finite.
pub fn cic(rows: &[PopulationRow]) -> Result<f64> {
    non_empty(rows)?;
    Ok(mean(
        rows.iter()
            .map(|r| (r.estimate - r.truth).abs() / (r.ri - r.li + DELTA)),
        rows.len(),
    ))
}

/// Effect-normalized CI size: mean of `(width + DELTA) / (|truth| + DELTA)`.
pub fn encis(rows: &[PopulationRow]) -> Result<f64> {
    non_empty(rows)?;
    Ok(mean(
        rows.iter()
            .map(|r| (r.ri - r.li + DELTA) / (r.truth.abs() + DELTA)),
        rows.len(),
    ))
}

fn constant_value(per_size: &[SizeScore]) -> Option<f64> {
    let first = per_size.first()?.value;
    per_size
        .iter()
        .all(|s| s.value == first)
        .then_some(first)
}

/// `sqrt(sum(n |D_n| v^2) / sum(n |D_n|))`
pub fn aggregate_quadratic(per_size: &[SizeScore]) -> Result<f64> {
    non_empty(per_size)?;
    // equal values collapse exactly
    if let Some(v) = constant_value(per_size) {
        return Ok(v.abs());
    }
    let (num, den) = per_size.iter().fold((0.0, 0.0), |(num, den), s| {
        let w = (s.n * s.instances) as f64;
        (num + w * s.value * s.value, den + w)
    });
    Ok((num / den).sqrt())
}

/// `sum(n |D_n| v) / sum(n |D_n|)`
pub fn aggregate_linear(per_size: &[SizeScore]) -> Result<f64> {
    non_empty(per_size)?;
    if let Some(v) = constant_value(per_size) {
        return Ok(v);
    }
    let (num, den) = per_size.iter().fold((0.0, 0.0), |(num, den), s| {
        let w = (s.n * s.instances) as f64;
        (num + w * s.value, den + w)
    });
    Ok(num / den)
}

/// All six metrics for one group of population estimates.
pub fn population_metrics(rows: &[PopulationRow]) -> Result<Metrics> {
    Ok(Metrics {
        enormse: Some(enormse_population(rows)?),
        rmse: Some(rmse_population(rows)?),
        bias: Some(bias_population(rows)?),
        coverage: Some(coverage(rows)?),
        cic: Some(cic(rows)?),
        encis: Some(encis(rows)?),
    })
}

fn aggregate_metric(
    per_size: &[MetricsPerSize],
    pick: impl Fn(&Metrics) -> Option<f64>,
    agg: fn(&[SizeScore]) -> Result<f64>,
) -> Result<Option<f64>> {
    let scores: Option<Vec<SizeScore>> = per_size
        .iter()
        .map(|s| {
            pick(&s.metrics).map(|value| SizeScore {
                n: s.n,
                instances: s.instance_count,
                value,
            })
        })
        .collect();
    match scores {
        Some(s) if !s.is_empty() => agg(&s).map(Some),
        _ => Ok(None),
    }
}

/// Cross-size aggregate of every metric present in all per-size blocks.
pub fn aggregate_metrics(per_size: &[MetricsPerSize]) -> Result<Metrics> {
    Ok(Metrics {
        enormse: aggregate_metric(per_size, |m| m.enormse, aggregate_quadratic)?,
        rmse: aggregate_metric(per_size, |m| m.rmse, aggregate_quadratic)?,
        bias: aggregate_metric(per_size, |m| m.bias, aggregate_linear)?,
        coverage: aggregate_metric(per_size, |m| m.coverage, aggregate_linear)?,
        cic: aggregate_metric(per_size, |m| m.cic, aggregate_linear)?,
        encis: aggregate_metric(per_size, |m| m.encis, aggregate_linear)?,
    })
}

/// Scores population rows already grouped by dataset size.
pub fn score_population_groups(groups: &BTreeMap<usize, Vec<PopulationRow>>) -> Result<AggregateReport> {
    if groups.values().all(Vec::is_empty) {
        return Err(Error::NothingToScore);
    }
    let per_size = groups
        .iter()
        .filter(|(_, rows)| !rows.is_empty())
        .map(|(&n, rows)| {
            Ok(MetricsPerSize {
                n,
                instance_count: rows.len(),
                metrics: population_metrics(rows)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregateReport {
        aggregate: aggregate_metrics(&per_size)?,
        per_size,
        missing: Vec::new(),
        warnings: Vec::new(),
    })
}

fn manifest_index(manifest: &[ManifestRow]) -> HashMap<&Ufid, &ManifestRow> {
    manifest.iter().map(|r| (&r.ufid, r)).collect()
}

/// Label instances without a prediction. Sizes with no predictions at all
/// were simply not submitted; gaps inside a submitted size get a warning.
fn missing_instances(
    manifest: &[ManifestRow],
    predicted: &HashSet<&Ufid>,
    warnings: &mut Vec<String>,
) -> Vec<Ufid> {
    let submitted_sizes: HashSet<usize> = manifest
        .iter()
        .filter(|r| predicted.contains(&r.ufid))
        .map(|r| r.size)
        .collect();
    let mut missing: Vec<&ManifestRow> = manifest
        .iter()
        .filter(|r| !predicted.contains(&r.ufid))
        .collect();
    missing.sort_by(|a, b| (a.size, &a.ufid).cmp(&(b.size, &b.ufid)));
    let mut per_size: BTreeMap<usize, usize> = BTreeMap::new();
    for r in &missing {
        if submitted_sizes.contains(&r.size) {
            *per_size.entry(r.size).or_default() += 1;
        }
    }
    for (size, count) in per_size {
        warnings.push(format!(
            "{count} instance(s) of size {size} have no prediction and were excluded"
        ));
    }
    missing.into_iter().map(|r| r.ufid.clone()).collect()
}

/// Scores a population prediction file against the label files listed in
/// the manifest. Row order in either input does not matter.
pub fn score_population_track(
    predictions: &[PopulationPrediction],
    label_dir: &Path,
    manifest: &[ManifestRow],
) -> Result<AggregateReport> {
    if predictions.is_empty() {
        return Err(Error::NothingToScore);
    }
    let index = manifest_index(manifest);
    let mut warnings = Vec::new();
    let mut sorted: Vec<&PopulationPrediction> = predictions.iter().collect();
    sorted.sort_by(|a, b| a.ufid.cmp(&b.ufid));
    for p in &sorted {
        if !index.contains_key(&p.ufid) || !io::label_path(label_dir, &p.ufid).is_file() {
            return Err(Error::UnknownUfid(p.ufid.to_string()));
        }
        if p.estimate_outside_ci() {
            warnings.push(format!(
                "{}: effect_size {} lies outside its CI [{}, {}]",
                p.ufid, p.effect_size, p.li, p.ri
            ));
        }
    }

    let truths: Vec<f64> = sorted
        .par_iter()
        .map(|p| {
            let (_, labels) = io::read_label_file(&io::label_path(label_dir, &p.ufid))?;
            true_population_effect(&labels)
        })
        .collect::<Result<_>>()?;

    let mut groups: BTreeMap<usize, Vec<PopulationRow>> = BTreeMap::new();
    for (p, truth) in sorted.iter().zip(truths) {
        groups.entry(index[&p.ufid].size).or_default().push(PopulationRow {
            truth,
            estimate: p.effect_size,
            li: p.li,
            ri: p.ri,
        });
    }

    let predicted: HashSet<&Ufid> = predictions.iter().map(|p| &p.ufid).collect();
    let missing = missing_instances(manifest, &predicted, &mut warnings);
    let mut report = score_population_groups(&groups)?;
    report.missing = missing;
    report.warnings = warnings;
    Ok(report)
}

/// Joins one prediction set to its labels by sample_id and returns
/// `(true effects, estimated effects)` in label order.
pub fn join_individual(
    set: &IndividualPredictionSet,
    labels: &[crate::data_model::CounterfactualRecord],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let by_id: HashMap<&str, (f64, f64)> = set
        .rows
        .iter()
        .map(|r| (r.sample_id.as_str(), (r.y0, r.y1)))
        .collect();
    let label_ids: HashSet<&str> = labels.iter().map(|r| r.sample_id.as_str()).collect();
    let mut missing: Vec<String> = labels
        .iter()
        .filter(|r| !by_id.contains_key(r.sample_id.as_str()))
        .map(|r| r.sample_id.clone())
        .collect();
    let mut extra: Vec<String> = set
        .rows
        .iter()
        .filter(|r| !label_ids.contains(r.sample_id.as_str()))
        .map(|r| r.sample_id.clone())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        missing.sort();
        extra.sort();
        return Err(Error::SampleMismatch {
            ufid: set.ufid.to_string(),
            missing,
            extra,
        });
    }
    let truth = labels.iter().map(|r| r.effect()).collect();
    let est = labels
        .iter()
        .map(|r| {
            let (y0, y1) = by_id[r.sample_id.as_str()];
            y1 - y0
        })
        .collect();
    Ok((truth, est))
}

/// Per-size individual ENoRMSE from already-joined effect vectors.
pub fn score_individual_groups(
    groups: &BTreeMap<usize, Vec<(Vec<f64>, Vec<f64>)>>,
) -> Result<AggregateReport> {
    let mut per_size = Vec::new();
    for (&n, instances) in groups {
        if instances.is_empty() {
            continue;
        }
        let views: Vec<(&[f64], &[f64])> = instances
            .iter()
            .map(|(t, e)| (t.as_slice(), e.as_slice()))
            .collect();
        per_size.push(MetricsPerSize {
            n,
            instance_count: instances.len(),
            metrics: Metrics {
                enormse: Some(enormse_individual(&views)?),
                ..Metrics::default()
            },
        });
    }
    if per_size.is_empty() {
        return Err(Error::NothingToScore);
    }
    Ok(AggregateReport {
        aggregate: aggregate_metrics(&per_size)?,
        per_size,
        missing: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Scores a directory of `<ufid>.csv` individual prediction files.
/// Censored samples are scored like any other since labels exist for all.
pub fn score_individual_track(
    prediction_dir: &Path,
    label_dir: &Path,
    manifest: &[ManifestRow],
) -> Result<AggregateReport> {
    let sets = io::read_individual_predictions(prediction_dir)?;
    score_individual_sets(&sets, label_dir, manifest)
}

pub fn score_individual_sets(
    sets: &[IndividualPredictionSet],
    label_dir: &Path,
    manifest: &[ManifestRow],
) -> Result<AggregateReport> {
    if sets.is_empty() {
        return Err(Error::NothingToScore);
    }
    let index = manifest_index(manifest);
    let mut sorted: Vec<&IndividualPredictionSet> = sets.iter().collect();
    sorted.sort_by(|a, b| a.ufid.cmp(&b.ufid));
    for s in &sorted {
        if !index.contains_key(&s.ufid) || !io::label_path(label_dir, &s.ufid).is_file() {
            return Err(Error::UnknownUfid(s.ufid.to_string()));
        }
    }
    let joined: Vec<(Vec<f64>, Vec<f64>)> = sorted
        .par_iter()
        .map(|s| {
            let (_, labels) = io::read_label_file(&io::label_path(label_dir, &s.ufid))?;
            join_individual(s, &labels)
        })
        .collect::<Result<_>>()?;

    let mut groups: BTreeMap<usize, Vec<(Vec<f64>, Vec<f64>)>> = BTreeMap::new();
    for (s, effects) in sorted.iter().zip(joined) {
        groups.entry(index[&s.ufid].size).or_default().push(effects);
    }
    let mut warnings = Vec::new();
    let predicted: HashSet<&Ufid> = sets.iter().map(|s| &s.ufid).collect();
    let missing = missing_instances(manifest, &predicted, &mut warnings);
    let mut report = score_individual_groups(&groups)?;
    report.missing = missing;
    report.warnings = warnings;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Literal per-row transcriptions of the metric definitions; used to
    // produce the expected values below.
    fn oracle_enormse(pairs: &[(f64, f64)]) -> f64 {
        let d = 1e-7;
        let mut s = 0.0;
        for &(e, eh) in pairs {
            let t = 1.0 - (eh + d) / (e + d);
            s += t * t;
        }
        (s / pairs.len() as f64).sqrt()
    }

    fn row(truth: f64, estimate: f64, li: f64, ri: f64) -> PopulationRow {
        PopulationRow {
            truth,
            estimate,
            li,
            ri,
        }
    }

    fn pe(pairs: &[(f64, f64)]) -> Vec<PopulationRow> {
        pairs
            .iter()
            .map(|&(e, eh)| row(e, eh, f64::NEG_INFINITY, f64::INFINITY))
            .collect()
    }

    fn ci(rows: &[(f64, f64, f64)]) -> Vec<PopulationRow> {
        rows.iter().map(|&(e, l, r)| row(e, e, l, r)).collect()
    }

    #[test]
    fn enormse_population_examples() {
        assert_eq!(enormse_population(&pe(&[(2.0, 2.0)])).unwrap(), 0.0);
        let v = enormse_population(&pe(&[(2.0, 1.0)])).unwrap();
        assert_relative_eq!(v, oracle_enormse(&[(2.0, 1.0)]), max_relative = 1e-14);
        assert_relative_eq!(v, 0.5, epsilon = 1e-7);
        let pairs = [(1.0, 2.0), (1.0, 0.0)];
        let v = enormse_population(&pe(&pairs)).unwrap();
        assert_relative_eq!(v, oracle_enormse(&pairs), max_relative = 1e-14);
        assert_relative_eq!(v, 1.0, epsilon = 1e-6);
        assert!(enormse_population(&[]).is_err());
    }

    #[test]
    fn enormse_zero_effect_is_exact() {
        assert_eq!(enormse_population(&pe(&[(0.0, 0.0)])).unwrap(), 0.0);
    }

    #[test]
    fn enormse_individual_examples() {
        let t = [1.0, -2.0, 0.5];
        assert_eq!(enormse_individual(&[(&t, &t)]).unwrap(), 0.0);

        let v = enormse_individual(&[(&[1.0, 1.0], &[0.0, 2.0])]).unwrap();
        assert_relative_eq!(v, oracle_enormse(&[(1.0, 0.0), (1.0, 2.0)]), max_relative = 1e-14);
        assert_relative_eq!(v, 1.0, epsilon = 1e-6);

        // instance of 1 with error 1, instance of 3 perfect: inner means first
        let a_t = [1.0];
        let a_e = [0.0];
        let b = [1.0, 1.0, 1.0];
        let v = enormse_individual(&[(&a_t, &a_e), (&b, &b)]).unwrap();
        let per_instance = (oracle_enormse(&[(1.0, 0.0)]).powi(2) / 2.0).sqrt();
        let pooled = oracle_enormse(&[(1.0, 0.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0)]);
        assert_relative_eq!(v, per_instance, max_relative = 1e-14);
        assert!((v - pooled).abs() > 0.1);

        assert!(enormse_individual(&[(&[1.0], &[1.0, 2.0])]).is_err());
    }

    #[test]
    fn rmse_and_bias_examples() {
        assert_eq!(rmse_population(&pe(&[(2.0, 2.0)])).unwrap(), 0.0);
        assert_eq!(rmse_population(&pe(&[(0.0, 3.0)])).unwrap(), 3.0);
        assert_eq!(rmse_population(&pe(&[(0.0, 1.0), (0.0, -1.0)])).unwrap(), 1.0);
        assert_eq!(bias_population(&pe(&[(1.0, 1.0)])).unwrap(), 0.0);
        assert_eq!(bias_population(&pe(&[(0.0, 1.0), (0.0, 1.0)])).unwrap(), 1.0);
        assert_eq!(bias_population(&pe(&[(0.0, 1.0), (0.0, -1.0)])).unwrap(), 0.0);
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(coverage(&ci(&[(2.0, 1.0, 3.0)])).unwrap(), 1.0);
        assert_eq!(
            coverage(&ci(&[(2.0, f64::NEG_INFINITY, f64::INFINITY)])).unwrap(),
            1.0
        );
        assert_eq!(coverage(&ci(&[(2.0, 2.0, 2.0)])).unwrap(), 1.0);
        assert_eq!(coverage(&ci(&[(2.0, 2.5, 3.0), (1.0, 0.0, 1.0)])).unwrap(), 0.5);
    }

    #[test]
    fn cic_examples() {
        assert_eq!(cic(&[row(1.0, 1.0, 0.0, 2.0)]).unwrap(), 0.0);
        assert_relative_eq!(
            cic(&[row(0.0, 1.0, -1.0, 1.0)]).unwrap(),
            1.0 / (2.0 + 1e-7),
            max_relative = 1e-15
        );
        assert_relative_eq!(cic(&[row(0.0, 1.0, 1.0, 1.0)]).unwrap(), 1e7, max_relative = 1e-9);
        assert_eq!(
            cic(&[row(0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY)]).unwrap(),
            0.0
        );
    }

    #[test]
    fn encis_examples() {
        assert_relative_eq!(encis(&ci(&[(2.0, 1.0, 3.0)])).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            encis(&ci(&[(4.0, 3.0, 5.0)])).unwrap(),
            (2.0 + 1e-7) / (4.0 + 1e-7),
            max_relative = 1e-15
        );
        assert_eq!(encis(&ci(&[(0.0, 0.0, 0.0)])).unwrap(), 1.0);
    }

    fn size(n: usize, instances: usize, value: f64) -> SizeScore {
        SizeScore { n, instances, value }
    }

    #[test]
    fn aggregation_examples() {
        assert_eq!(aggregate_quadratic(&[size(2500, 3, 0.37)]).unwrap(), 0.37);
        assert_eq!(
            aggregate_quadratic(&[size(1000, 1, 0.2), size(50000, 1, 0.2)]).unwrap(),
            0.2
        );
        assert_relative_eq!(
            aggregate_quadratic(&[size(1000, 1, 0.0), size(50000, 1, 1.0)]).unwrap(),
            (50000.0f64 / 51000.0).sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            aggregate_quadratic(&[size(1000, 1, 0.0), size(50000, 1, 1.0)]).unwrap(),
            0.99015,
            epsilon = 1e-5
        );

        assert_eq!(aggregate_linear(&[size(1000, 1, 0.42)]).unwrap(), 0.42);
        assert_eq!(
            aggregate_linear(&[size(1000, 1, 1.0), size(1000, 1, 0.0)]).unwrap(),
            0.5
        );
        assert_relative_eq!(
            aggregate_linear(&[size(1000, 1, 0.0), size(50000, 1, 1.0)]).unwrap(),
            50.0 / 51.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn individual_join_reports_mismatches() {
        use crate::data_model::{CounterfactualRecord, IndividualPrediction};
        let labels: Vec<_> = (0..4)
            .map(|i| CounterfactualRecord {
                sample_id: format!("s{i}"),
                y0: 0.0,
                y1: 1.0,
            })
            .collect();
        let set = IndividualPredictionSet {
            ufid: "abc1234".parse().unwrap(),
            rows: vec![
                IndividualPrediction {
                    sample_id: "s3".into(),
                    y0: 0.0,
                    y1: 1.0,
                },
                IndividualPrediction {
                    sample_id: "s0".into(),
                    y0: 1.0,
                    y1: 2.0,
                },
            ],
        };
        match join_individual(&set, &labels) {
            Err(Error::SampleMismatch { missing, extra, .. }) => {
                assert_eq!(missing, vec!["s1", "s2"]);
                assert!(extra.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
