use std::fmt;
use std::path::Path;

/// A failed command. Usage failures exit with 2, everything else with 1.
#[derive(Debug)]
pub struct Fail {
    pub usage: bool,
    pub kind: &'static str,
    pub message: String,
}

pub type R<T> = Result<T, Fail>;

impl Fail {
    pub fn usage(message: impl Into<String>) -> Fail {
        Fail {
            usage: true,
            kind: "usage",
            message: message.into(),
        }
    }

    pub fn runtime(kind: &'static str, message: impl Into<String>) -> Fail {
        Fail {
            usage: false,
            kind,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Fail {
        Fail::runtime("io", format!("{}: {e}", path.display()))
    }

    pub fn code(&self) -> i32 {
        if self.usage {
            2
        } else {
            1
        }
    }

    /// One JSON object, for standard error.
    pub fn to_json(&self) -> String {
        serde_json::json!({"error": self.kind, "message": self.message}).to_string()
    }
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<blm::Error> for Fail {
    fn from(e: blm::Error) -> Fail {
        use blm::Error::*;
        let kind = match &e {
            Unsupported { .. } | UnknownRole { .. } | Template(_) => "template",
            Lexicon(_) => "lexicon",
            Generation { .. } => "generation",
            Dataset { .. } => "dataset",
            Split(_) => "split",
            Embedding(_) | Format(_) => "embedding",
            Diverged { .. } => "training",
            Checkpoint(_) => "checkpoint",
            Config(_) => "config",
            Probe(_) => "probe",
            Io(_) => "io",
            Json(_) => "json",
        };
        Fail::runtime(kind, e.to_string())
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Fail {
        Fail::runtime("json", e.to_string())
    }
}
