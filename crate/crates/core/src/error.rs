use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("task {task} is not available for language {language}")]
    Unsupported { task: String, language: String },
    #[error("role {role} is not defined for task {task}")]
    UnknownRole { role: String, task: String },
    #[error("template: {0}")]
    Template(String),
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("generation of {instance} failed: {reason}")]
    Generation { instance: String, reason: String },
    #[error("dataset line {line}: {reason}")]
    Dataset { line: usize, reason: String },
    #[error("split: {0}")]
    Split(String),
    #[error("embedding: {0}")]
    Embedding(String),
    #[error("embedding file: {0}")]
    Format(String),
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("probe: {0}")]
    Probe(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
