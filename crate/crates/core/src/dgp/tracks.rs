use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{build_model, derive_seed, simulate_instance, DgpConfig, DgpModel};
use crate::data_model::CovariateTable;
use crate::error::{Error, Result};
use crate::io::{self, ManifestRow, Track};

pub const SCALING_SIZES: [usize; 6] = [1_000, 2_500, 5_000, 10_000, 25_000, 50_000];
pub const CENSORING_SIZE: usize = 10_000;

fn track_tag(track: Track) -> u64 {
    match track {
        Track::Scaling => 1,
        Track::Censoring => 2,
    }
}

struct Job<'a> {
    model: &'a DgpModel,
    size: usize,
    instance_seed: u64,
}

/// Simulates `instances_per_size` instances of every size for every config,
/// writes the pairs into `out_dir` (created if needed) together with
/// `manifest.csv`, and returns the manifest rows. Instances are simulated in
/// parallel; output does not depend on scheduling.
pub fn generate_track(
    track: Track,
    configs: &[DgpConfig],
    sizes: &[usize],
    covariates: &CovariateTable,
    out_dir: &Path,
) -> Result<Vec<ManifestRow>> {
    if configs.is_empty() {
        return Err(Error::Config("no DGP configs given".into()));
    }
    let mut seeds = HashSet::new();
    for c in configs {
        if !seeds.insert(c.seed) {
            return Err(Error::Config(format!(
                "duplicate seed {}: every DGP config needs its own seed",
                c.seed
            )));
        }
    }
    if let Some(&largest) = sizes.iter().max() {
        if largest > covariates.n_rows() {
            return Err(Error::NotEnoughRows {
                requested: largest,
                available: covariates.n_rows(),
            });
        }
    }
    let models: Vec<DgpModel> = configs
        .iter()
        .map(|c| build_model(c, covariates))
        .collect::<Result<_>>()?;

    let jobs: Vec<Job> = models
        .iter()
        .flat_map(|model| {
            sizes.iter().flat_map(move |&size| {
                (0..model.config.instances_per_size).map(move |rep| Job {
                    model,
                    size,
                    instance_seed: derive_seed(&[track_tag(track), size as u64, rep as u64]),
                })
            })
        })
        .collect();

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest = jobs
        .par_iter()
        .map(|job| {
            let (pair, meta) = simulate_instance(job.model, covariates, job.size, job.instance_seed)?;
            io::write_instance_pair(&pair, out_dir)?;
            Ok(ManifestRow {
                ufid: pair.ufid().clone(),
                track,
                size: job.size,
                n_covariates: meta.n_covariates,
                n_confounders: meta.n_confounders,
                poly_degree: meta.poly_degree,
                use_exp: meta.use_exp_transform,
                prevalence: meta.prevalence,
                censoring_rate: meta.censoring_rate,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut ufids = HashSet::new();
    for row in &manifest {
        if !ufids.insert(&row.ufid) {
            return Err(Error::UfidCollision(io::observation_path(out_dir, &row.ufid)));
        }
    }
    io::write_manifest(&manifest, &out_dir.join(io::MANIFEST_FILE))?;
    Ok(manifest)
}

/// One pair per config and size in {1k, 2.5k, 5k, 10k, 25k, 50k}, with
/// censoring switched off.
pub fn generate_scaling_track(
    configs: &[DgpConfig],
    covariates: &CovariateTable,
    out_dir: &Path,
) -> Result<Vec<ManifestRow>> {
    let uncensored: Vec<DgpConfig> = configs
        .iter()
        .map(|c| DgpConfig {
            censoring_rate: 0.0,
            ..c.clone()
        })
        .collect();
    generate_track(Track::Scaling, &uncensored, &SCALING_SIZES, covariates, out_dir)
}

/// 10k-row pairs; every config must censor.
pub fn generate_censoring_track(
    configs: &[DgpConfig],
    covariates: &CovariateTable,
    out_dir: &Path,
) -> Result<Vec<ManifestRow>> {
    if let Some(c) = configs.iter().find(|c| c.censoring_rate <= 0.0) {
        return Err(Error::CensoringRequired { seed: c.seed });
    }
    generate_track(Track::Censoring, configs, &[CENSORING_SIZE], covariates, out_dir)
}
