use grassfire::{Error, ErrorKind};

/// A library error tagged with the pipeline stage that produced it.
#[derive(Debug, thiserror::Error)]
#[error("{}{source}", stage_prefix(*.stage))]
pub struct CliError {
    pub stage: Option<&'static str>,
    #[source]
    pub source: Error,
}

fn stage_prefix(stage: Option<&'static str>) -> String {
    match stage {
        Some(name) => format!("stage `{name}` failed: "),
        None => String::new(),
    }
}

impl CliError {
    pub fn at(stage: &'static str, source: Error) -> Self {
        Self {
            stage: Some(stage),
            source,
        }
    }

    /// Everything raised while reading and validating the configuration is a
    /// configuration error, whatever the underlying library classification.
    pub fn kind(&self) -> ErrorKind {
        if self.stage == Some(STAGE_CONFIG) {
            ErrorKind::Config
        } else {
            self.source.kind()
        }
    }

    pub fn exit_code(&self) -> u8 {
        exit_code(self.kind())
    }
}

impl From<Error> for CliError {
    fn from(source: Error) -> Self {
        Self {
            stage: None,
            source,
        }
    }
}

pub fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

pub const STAGE_CONFIG: &str = "config";

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Tags errors of a fallible expression with a stage name.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> StageExt<T> for grassfire::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::at(stage, e))
    }
}
