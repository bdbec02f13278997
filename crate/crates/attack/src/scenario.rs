use std::fmt;
use std::str::FromStr;

use mvmf_core::WeightScheme;
use mvmf_federation::UpdateMode;
use mvmf_solvers::Method;

use crate::error::{AttackError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightVariant {
    ObsOnly,
    InclUnc,
}

/// Update mode crossed with weight variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AttackScenario {
    pub mode: UpdateMode,
    pub variant: WeightVariant,
}

impl AttackScenario {
    pub const ALL: [AttackScenario; 4] = [
        AttackScenario { mode: UpdateMode::SemiAls, variant: WeightVariant::ObsOnly },
        AttackScenario { mode: UpdateMode::SemiAls, variant: WeightVariant::InclUnc },
        AttackScenario { mode: UpdateMode::Sgd, variant: WeightVariant::ObsOnly },
        AttackScenario { mode: UpdateMode::Sgd, variant: WeightVariant::InclUnc },
    ];

    pub fn new(mode: UpdateMode, variant: WeightVariant) -> Self {
        Self { mode, variant }
    }

    /// Training weight scheme that produces this scenario's uploads.
    pub fn weight_scheme(&self, alpha: f64) -> WeightScheme<f64> {
        match self.variant {
            WeightVariant::ObsOnly => WeightScheme::ObsOnly,
            WeightVariant::InclUnc => WeightScheme::InclUnc { alpha },
        }
    }

    /// Best method per scenario in the solver comparison.
    pub fn default_method(&self) -> Method {
        match (self.mode, self.variant) {
            (UpdateMode::SemiAls, WeightVariant::ObsOnly) => Method::PowellHybrid,
            (UpdateMode::SemiAls, WeightVariant::InclUnc) => Method::ScalarJacobian,
            (UpdateMode::Sgd, WeightVariant::ObsOnly) => Method::Anderson { memory: mvmf_solvers::DEFAULT_ANDERSON_MEMORY },
            (UpdateMode::Sgd, WeightVariant::InclUnc) => Method::PowellHybrid,
        }
    }

    /// Rounds of uploads the attack needs.
    pub fn rounds_needed(&self) -> usize {
        match self.mode {
            UpdateMode::SemiAls => 1,
            UpdateMode::Sgd => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match (self.mode, self.variant) {
            (UpdateMode::SemiAls, WeightVariant::ObsOnly) => "semials-obsonly",
            (UpdateMode::SemiAls, WeightVariant::InclUnc) => "semials-inclunc",
            (UpdateMode::Sgd, WeightVariant::ObsOnly) => "sgd-obsonly",
            (UpdateMode::Sgd, WeightVariant::InclUnc) => "sgd-inclunc",
        }
    }
}

impl fmt::Display for AttackScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackScenario {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        AttackScenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| AttackError::Invalid(format!("unknown scenario {s:?}")))
    }
}
