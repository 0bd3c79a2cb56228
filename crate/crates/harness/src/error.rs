use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("invalid experiment grid: {0}")]
    InvalidGrid(String),
    #[error("existing records in {path} belong to a different experiment: {detail}")]
    ResumeMismatch { path: PathBuf, detail: String },
    #[error("config: {0}")]
    Config(String),
    #[error("nothing to plot")]
    EmptyInput,
    #[error("run λ={lambda} trial={trial} failed: {source}")]
    Run {
        lambda: usize,
        trial: usize,
        #[source]
        source: crfmnes::Error,
    },
    #[error(transparent)]
    Core(#[from] crfmnes::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn csv_err(path: &std::path::Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}
