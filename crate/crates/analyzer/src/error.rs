use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// Not valid JSON, or not an object.
    Malformed,
    NoInput,
    UnknownKind,
    /// Missing, mistyped or unknown fields; out-of-range values.
    Schema,
    ChannelChain,
    Spatial,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Malformed => "malformed document",
            ViolationKind::NoInput => "no input node",
            ViolationKind::UnknownKind => "unknown node kind",
            ViolationKind::Schema => "schema violation",
            ViolationKind::ChannelChain => "channel-chain error",
            ViolationKind::Spatial => "spatial error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Stage index in the document, when the problem is local to one.
    pub node: Option<usize>,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(i) => write!(f, "{} at node {i}: {}", self.kind, self.message),
            None => write!(f, "{}: {}", self.kind, self.message),
        }
    }
}

/// Every problem found in a network spec.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub violations: Vec<Violation>,
}

impl ParseError {
    pub(crate) fn single(node: Option<usize>, kind: ViolationKind, message: impl Into<String>) -> Self {
        Self {
            violations: vec![Violation {
                node,
                kind,
                message: message.into(),
            }],
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut it = self.violations.iter();
        if let Some(first) = it.next() {
            write!(f, "{first}")?;
        }
        for v in it {
            write!(f, "; {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown builtin network {0:?} (expected resnet164 or resnet50)")]
pub struct UnknownBuiltin(pub String);
