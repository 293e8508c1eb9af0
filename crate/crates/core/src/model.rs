use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Grid, MpcrSpec};

/// How likelihood terms at the treatment switch are handled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    /// Keep the first treatment period, evaluated with treatment-granularity
    /// information built from the last baseline period.
    #[default]
    Include,
    /// Drop the first treatment period of every treatment group.
    Drop,
}

/// Settings shared by simulation and estimation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Model {
    pub mpcr: MpcrSpec,
    /// Number of contribution grid points on `[0, 1]`.
    pub q: usize,
    /// Multiplies every potential; estimates scale inversely with it.
    pub feature_scale: f64,
    pub boundary: BoundaryRule,
}

impl Default for Model {
    fn default() -> Self {
        Model {
            mpcr: MpcrSpec::default(),
            q: 21,
            feature_scale: 1.0,
            boundary: BoundaryRule::Include,
        }
    }
}

impl Model {
    pub fn with_q(mut self, q: usize) -> Self {
        self.q = q;
        self
    }

    pub fn with_mpcr(mut self, mpcr: MpcrSpec) -> Self {
        self.mpcr = mpcr;
        self
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.q)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.feature_scale.is_finite() && self.feature_scale > 0.0) {
            return Err(Error::Config(format!(
                "feature scale must be positive, got {}",
                self.feature_scale
            )));
        }
        Ok(())
    }
}
