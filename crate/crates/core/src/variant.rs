use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Which of the three CPWC paths are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CpwcVariant {
    /// Plain 1×1 convolution, the unmodified baseline.
    PwcOnly,
    NoStage2,
    NoPwcNoStage2,
    NoPwc,
    Full,
}

impl CpwcVariant {
    /// Baseline first, full block last.
    pub const ALL: [CpwcVariant; 5] = [
        CpwcVariant::PwcOnly,
        CpwcVariant::NoStage2,
        CpwcVariant::NoPwcNoStage2,
        CpwcVariant::NoPwc,
        CpwcVariant::Full,
    ];

    pub fn has_pwc(self) -> bool {
        matches!(self, Self::Full | Self::NoStage2 | Self::PwcOnly)
    }

    pub fn has_stage1(self) -> bool {
        !matches!(self, Self::PwcOnly)
    }

    pub fn has_stage2(self) -> bool {
        matches!(self, Self::Full | Self::NoPwc)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::NoStage2 => "no-stage2",
            Self::NoPwc => "no-pwc",
            Self::NoPwcNoStage2 => "no-pwc-no-stage2",
            Self::PwcOnly => "pwc-only",
        }
    }

    /// Human label in the style of an ablation table row.
    pub fn label(self) -> &'static str {
        match self {
            Self::Full => "CPWC",
            Self::NoStage2 => "CPWC w/o Stage 2",
            Self::NoPwc => "CPWC w/o PWC",
            Self::NoPwcNoStage2 => "CPWC w/o PWC & Stage 2",
            Self::PwcOnly => "Baseline (PWC)",
        }
    }
}

impl fmt::Display for CpwcVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CpwcVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .or(match norm.as_str() {
                "baseline" | "pwc" => Some(Self::PwcOnly),
                _ => None,
            })
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown variant {s:?}, expected one of full, no-stage2, no-pwc, no-pwc-no-stage2, pwc-only"
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for v in CpwcVariant::ALL {
            assert_eq!(v.name().parse::<CpwcVariant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
        assert!("wide".parse::<CpwcVariant>().is_err());
        assert_eq!("NO_STAGE2".parse::<CpwcVariant>().unwrap(), CpwcVariant::NoStage2);
    }

    #[test]
    fn path_flags() {
        use CpwcVariant::*;
        assert!(Full.has_pwc() && Full.has_stage1() && Full.has_stage2());
        assert!(!PwcOnly.has_stage1() && !PwcOnly.has_stage2());
        assert!(!NoPwc.has_pwc() && NoPwc.has_stage2());
        assert!(!NoPwcNoStage2.has_pwc() && !NoPwcNoStage2.has_stage2());
        assert!(NoStage2.has_pwc() && !NoStage2.has_stage2());
    }
}
