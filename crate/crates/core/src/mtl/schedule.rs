//! Importance-weight trajectories over training epochs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(λ_sup, λ_in, λ_out)` at one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceWeights {
    pub supervised: f64,
    pub input: f64,
    pub output: f64,
}

impl ImportanceWeights {
    pub const SUPERVISED_ONLY: Self = Self {
        supervised: 1.0,
        input: 0.0,
        output: 0.0,
    };

    pub fn new(supervised: f64, input: f64, output: f64) -> Self {
        Self {
            supervised,
            input,
            output,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("supervised", self.supervised),
            ("input", self.input),
            ("output", self.output),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "{name} importance weight {v} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub start: f64,
    pub end: f64,
}

impl Endpoints {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    fn lerp(&self, frac: f64) -> f64 {
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Secondary tasks only before `t1`, supervised only from `t1` on.
    Stairs { t1: usize },
    /// Linear interpolation over the whole run.
    Linear { total_epochs: usize },
    /// Linear interpolation over `[0, t1]`, then held at the end values.
    AbridgedLinear { t1: usize },
    /// Secondary weights decay as `exp(-t/σ)`.
    Exponential { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    #[serde(flatten)]
    pub kind: ScheduleKind,
    #[serde(default = "default_supervised")]
    pub supervised: Endpoints,
    #[serde(default = "default_secondary")]
    pub input: Endpoints,
    #[serde(default = "default_secondary")]
    pub output: Endpoints,
}

fn default_supervised() -> Endpoints {
    Endpoints::new(0.0, 1.0)
}

fn default_secondary() -> Endpoints {
    Endpoints::new(1.0, 0.0)
}

impl ScheduleSpec {
    pub fn new(kind: ScheduleKind) -> Self {
        Self {
            kind,
            supervised: default_supervised(),
            input: default_secondary(),
            output: default_secondary(),
        }
    }

    /// Abridged linear schedule saturating after 20% of `epochs`.
    pub fn default_for(epochs: usize) -> Self {
        Self::new(ScheduleKind::AbridgedLinear {
            t1: (epochs / 5).max(1),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, e) in [
            ("supervised", self.supervised),
            ("input", self.input),
            ("output", self.output),
        ] {
            if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) {
                return Err(Error::invalid(format!(
                    "{name} schedule endpoints must lie in [0, 1]"
                )));
            }
        }
        if self.supervised.start > self.supervised.end {
            return Err(Error::invalid("supervised weight must not decrease"));
        }
        if self.input.start < self.input.end || self.output.start < self.output.end {
            return Err(Error::invalid("secondary weights must not increase"));
        }
        match self.kind {
            ScheduleKind::Stairs { t1: 0 }
            | ScheduleKind::AbridgedLinear { t1: 0 }
            | ScheduleKind::Linear { total_epochs: 0 } => {
                Err(Error::invalid("schedule horizon must be positive"))
            }
            ScheduleKind::Exponential { sigma } if !(sigma > 0.0) => {
                Err(Error::invalid("exponential schedule needs sigma > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Epoch after which every weight has reached its end value (`None` for
    /// the exponential schedule, which only approaches it).
    pub fn saturation_epoch(&self) -> Option<usize> {
        match self.kind {
            ScheduleKind::Stairs { t1 } | ScheduleKind::AbridgedLinear { t1 } => Some(t1),
            ScheduleKind::Linear { total_epochs } => Some(total_epochs),
            ScheduleKind::Exponential { .. } => None,
        }
    }

    pub fn eval(&self, t: usize) -> ImportanceWeights {
        let t_f = t as f64;
        match self.kind {
            ScheduleKind::Stairs { t1 } => {
                let before = t < t1;
                let pick = |e: Endpoints| if before { e.start } else { e.end };
                let input = pick(self.input);
                // two-task form: λ_sup + λ_r = 1
                ImportanceWeights::new(1.0 - input, input, pick(self.output))
            }
            ScheduleKind::Linear { total_epochs: horizon }
            | ScheduleKind::AbridgedLinear { t1: horizon } => {
                let frac = (t_f / horizon as f64).min(1.0);
                ImportanceWeights::new(
                    self.supervised.lerp(frac),
                    self.input.lerp(frac),
                    self.output.lerp(frac),
                )
            }
            ScheduleKind::Exponential { sigma } => {
                let decay = (-t_f / sigma).exp();
                let frac = 1.0 - decay;
                let input = self.input.lerp(frac);
                ImportanceWeights::new(1.0 - input, input, self.output.lerp(frac))
            }
        }
    }
}
