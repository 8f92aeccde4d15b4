use serde_json::{json, Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    /// A verification or consensus check failed; carries the report.
    #[error("rejected")]
    Rejected(Output),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Rejected(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

pub fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Command result: a flat JSON object whose keys print in insertion order.
#[derive(Debug, Default)]
pub struct Output(pub Map<String, Value>);

impl Output {
    pub fn new() -> Self {
        Output::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn error(e: &CliError) -> Output {
        Output::new().with("error", e.to_string()).with("exit_code", json!(e.exit_code()))
    }

    pub fn print(&self, json: bool, failed: bool) {
        if json {
            println!("{}", serde_json::to_string_pretty(&Value::Object(self.0.clone())).expect("serializable"));
            return;
        }
        let text: String = self
            .0
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k}: {s}\n"),
                other => format!("{k}: {other}\n"),
            })
            .collect();
        if failed {
            eprint!("{text}");
        } else {
            print!("{text}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(usage("x").exit_code(), 1);
        assert_eq!(CliError::Rejected(Output::new()).exit_code(), 2);
        assert_eq!(CliError::Internal("x".into()).exit_code(), 3);
    }

    #[test]
    fn keys_keep_insertion_order() {
        let out = Output::new().with("z", 1).with("a", 2);
        assert_eq!(Value::Object(out.0).to_string(), r#"{"z":1,"a":2}"#);
    }
}
