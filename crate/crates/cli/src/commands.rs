use std::fs;
use std::path::{Path, PathBuf};

use causal_bench_core::dgp::{self, SyntheticCovariates};
use causal_bench_core::estimators::{self, Method};
use causal_bench_core::io::{self, Track};
use causal_bench_core::{AggregateReport, CovariateTable, Error, Result};
use rayon::prelude::*;

use crate::{EstimateArgs, GenerateArgs, ScoreArgs};

fn parse_synthetic(arg: &str) -> Result<(usize, usize)> {
    let bad = || Error::Invalid(format!("--synthetic-covariates expects N,P, got {arg:?}"));
    let (n, p) = arg.split_once(',').ok_or_else(bad)?;
    Ok((
        n.trim().parse().map_err(|_| bad())?,
        p.trim().parse().map_err(|_| bad())?,
    ))
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let track: Track = args.track.parse()?;
    let configs = dgp::load_configs(&args.config)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let x_path = args.out.join(io::COVARIATE_FILE);
    let covariates = match (&args.covariates, &args.synthetic_covariates) {
        (Some(path), _) => {
            let table = io::read_covariates(path)?;
            if !same_file(path, &x_path) {
                fs::copy(path, &x_path).map_err(|e| Error::Io {
                    path: x_path.clone(),
                    source: e,
                })?;
            }
            table
        }
        (None, Some(arg)) => {
            let (n, p) = parse_synthetic(arg)?;
            let table = SyntheticCovariates::new(n, p)
                .seed(args.covariate_seed)
                .generate()?;
            io::write_covariates(&table, &x_path)?;
            table
        }
        (None, None) => {
            return Err(Error::Invalid(
                "one of --covariates or --synthetic-covariates is required".into(),
            ))
        }
    };
    let dir = track.dir(&args.out);
    let manifest = match track {
        Track::Scaling => dgp::generate_scaling_track(&configs, &covariates, &dir)?,
        Track::Censoring => dgp::generate_censoring_track(&configs, &covariates, &dir)?,
    };
    println!("{} pairs written to {}", manifest.len(), dir.display());
    Ok(())
}

fn find_covariates(args: &EstimateArgs) -> Result<PathBuf> {
    if let Some(p) = &args.covariates {
        return Ok(p.clone());
    }
    let mut candidates = vec![args.data.join(io::COVARIATE_FILE)];
    if let Some(parent) = args.data.parent() {
        candidates.push(parent.join(io::COVARIATE_FILE));
    }
    candidates
        .iter()
        .find(|p| p.is_file())
        .cloned()
        .ok_or_else(|| {
            Error::Invalid(format!(
                "no {} found in {} or its parent (use --covariates)",
                io::COVARIATE_FILE,
                args.data.display()
            ))
        })
}

enum Estimate {
    Population(causal_bench_core::PopulationPrediction),
    Individual(causal_bench_core::IndividualPredictionSet),
}

fn estimate_one(
    path: &Path,
    method: Method,
    covariates: &CovariateTable,
    args: &EstimateArgs,
) -> Result<Estimate> {
    let (ufid, obs) = io::read_observation_file(path)?;
    Ok(match method {
        Method::DiffMeans => Estimate::Population(estimators::diff_means(&ufid, &obs)?),
        Method::Ipw => {
            // per-instance seed so results do not depend on file order
            let seed = dgp::derive_seed(&[args.seed, u64::from_str_radix(ufid.as_str(), 16).unwrap_or(0)]);
            Estimate::Population(estimators::ipw_ate(
                &ufid,
                &obs,
                covariates,
                args.bootstrap_reps,
                seed,
            )?)
        }
        Method::Regression => {
            Estimate::Individual(estimators::regression_impute(&ufid, &obs, covariates)?)
        }
    })
}

pub fn estimate(args: &EstimateArgs) -> Result<()> {
    let method: Method = args.method.parse()?;
    let files = io::list_observation_files(&args.data)?;
    if files.is_empty() {
        return Err(Error::Invalid(format!(
            "no observation files found in {}",
            args.data.display()
        )));
    }
    let covariates = io::read_covariates(&find_covariates(args)?)?;
    let results: Vec<(String, Result<Estimate>)> = files
        .par_iter()
        .map(|(ufid, path)| (ufid.to_string(), estimate_one(path, method, &covariates, args)))
        .collect();

    let mut population = Vec::new();
    let mut individual = Vec::new();
    let mut failed = 0;
    for (ufid, result) in results {
        match result {
            Ok(Estimate::Population(p)) => population.push(p),
            Ok(Estimate::Individual(s)) => individual.push(s),
            Err(e) => {
                failed += 1;
                eprintln!("warning: {ufid}: skipped: {e}");
            }
        }
    }
    let succeeded = population.len() + individual.len();
    if succeeded == 0 {
        return Err(Error::Invalid(format!(
            "all {failed} instances failed to estimate"
        )));
    }
    match method {
        Method::Regression => {
            fs::create_dir_all(&args.out).map_err(|e| Error::Io {
                path: args.out.clone(),
                source: e,
            })?;
            for set in &individual {
                io::write_individual_predictions(set, &args.out)?;
            }
        }
        _ => io::write_population_predictions(&population, &args.out)?,
    }
    println!(
        "{succeeded} instances estimated, {failed} skipped; output in {}",
        args.out.display()
    );
    Ok(())
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    let track: Track = args.track.parse()?;
    let manifest: Vec<_> = io::read_manifest(&args.manifest)?
        .into_iter()
        .filter(|r| r.track == track)
        .collect();
    let report: AggregateReport = if args.individual {
        causal_bench_core::scoring::score_individual_track(&args.predictions, &args.labels, &manifest)?
    } else {
        let predictions = io::read_population_predictions(&args.predictions)?;
        causal_bench_core::scoring::score_population_track(&predictions, &args.labels, &manifest)?
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    io::write_report(&report, &args.out)?;
    let rendered = io::render_report(&report);
    println!("{}", io::REPORT_HEADER);
    if let Some(last) = rendered.lines().last() {
        println!("{last}");
    }
    Ok(())
}
