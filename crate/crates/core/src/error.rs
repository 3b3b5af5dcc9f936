use thiserror::Error;

/// Errors raised while ingesting or validating scenario data.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario document is not valid TOML: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
    /// A field violates one of the model invariants. Carries the offending
    /// field and the rule it broke.
    #[error("invalid {field}: {rule}")]
    Invariant { field: String, rule: String },
    #[error("fleet is empty: the mean service target is undefined")]
    EmptyFleet,
}

impl ScenarioError {
    pub fn invariant(field: impl Into<String>, rule: impl Into<String>) -> Self {
        ScenarioError::Invariant {
            field: field.into(),
            rule: rule.into(),
        }
    }
}
