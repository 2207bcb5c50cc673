use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{0}: empty instance")]
    EmptyInstance(String),

    #[error("invalid file name {0:?}: {1}")]
    FileName(PathBuf, &'static str),

    #[error("ufid collision: {0} already exists with different content")]
    UfidCollision(PathBuf),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("intercept calibration failed: target rate {target} unattainable within [-40, 40]")]
    Calibration { target: f64 },

    #[error("requested {requested} samples but covariate table has {available} rows")]
    NotEnoughRows { requested: usize, available: usize },

    #[error("censoring track requires censoring (config seed {seed} has censoring_rate = 0)")]
    CensoringRequired { seed: u64 },

    #[error("degenerate arm: {0}")]
    DegenerateArm(String),

    #[error("non-overlapping treatment groups: {0}")]
    NonOverlap(String),

    #[error("sample {0:?} not found in covariate table")]
    UnknownSample(String),

    #[error("prediction for unknown ufid {0}")]
    UnknownUfid(String),

    #[error("{ufid}: sample_id mismatch ({} missing, {} extra); missing: {}; extra: {}",
        missing.len(), extra.len(), preview(missing), preview(extra))]
    SampleMismatch {
        ufid: String,
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("nothing to score")]
    NothingToScore,

    #[error("{0}")]
    Invalid(String),
}

fn preview(ids: &[String]) -> String {
    const SHOWN: usize = 10;
    if ids.is_empty() {
        return "-".into();
    }
    let head = ids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(" ");
    if ids.len() > SHOWN {
        format!("{head} ...")
    } else {
        head
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
