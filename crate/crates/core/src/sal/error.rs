use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SalErrorCode {
    UnresolvedLemma,
    UnknownId,
    BadTree,
}

impl SalErrorCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SalErrorCode::UnresolvedLemma => "UNRESOLVED_LEMMA",
            SalErrorCode::UnknownId => "UNKNOWN_ID",
            SalErrorCode::BadTree => "BAD_TREE",
        }
    }
}

/// Query error as a value: a code, a message and, inside call trees, the
/// position of the failing call (`root`, `root.object`, ...).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SalError {
    pub code: SalErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<String>,
}

impl SalError {
    pub fn unresolved(lemma: &str) -> Self {
        Self {
            code: SalErrorCode::UnresolvedLemma,
            message: format!("no concept has the lemma \"{lemma}\""),
            position: None,
        }
    }

    pub fn unknown_id(id: &str) -> Self {
        Self { code: SalErrorCode::UnknownId, message: format!("unknown id `{id}`"), position: None }
    }

    pub fn bad_tree(message: impl Into<String>) -> Self {
        Self { code: SalErrorCode::BadTree, message: message.into(), position: None }
    }

    pub(crate) fn at(mut self, position: &str) -> Self {
        if self.position.is_none() {
            self.position = Some(position.to_owned());
        }
        self
    }
}

impl fmt::Display for SalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code.as_str(), self.message)?;
        if let Some(p) = &self.position {
            write!(f, " (at {p})")?;
        }
        Ok(())
    }
}

impl std::error::Error for SalError {}
