use std::fmt;

/// A failure tied to the module that raised it and the config field it
/// concerns.
#[derive(Debug)]
pub struct CliError {
    pub module: String,
    pub field: String,
    pub message: String,
}

impl CliError {
    pub fn new(
        module: impl Into<String>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        CliError {
            module: module.into(),
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::new("cli", field, message)
    }

    pub fn io(field: impl Into<String>, err: std::io::Error) -> Self {
        CliError::new("cli", field, err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} error in field `{}`: {}",
            self.module, self.field, self.message
        )
    }
}

impl std::error::Error for CliError {}

/// Attaches the config field to a core error.
pub trait Field<T> {
    fn field(self, name: &str) -> Result<T, CliError>;
}

impl<T> Field<T> for spectral_bm_core::Result<T> {
    fn field(self, name: &str) -> Result<T, CliError> {
        self.map_err(|e| core_error(e, name))
    }
}

pub fn core_error(e: spectral_bm_core::Error, field: &str) -> CliError {
    let module = e.module().to_string();
    let text = e.to_string();
    let message = text
        .strip_prefix(&format!("{module}: "))
        .map(str::to_string)
        .unwrap_or(text);
    CliError::new(module, field, message)
}
