use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dynamics::ConfidenceThreshold;
use crate::noise::NoiseModel;
use crate::Error;

/// Default trailing persistence window for quasi-consensus detection.
pub const DEFAULT_DETECTION_WINDOW: u64 = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// Independent uniform draws on `[0, 1)`.
    UniformRandom,
    Explicit { values: Vec<f64> },
    AllEqual { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub epsilon: ConfidenceThreshold,
    pub noise: NoiseModel,
    pub initial: InitialCondition,
    pub horizon: u64,
    pub master_seed: u64,
    #[serde(default = "default_window")]
    pub detection_window: u64,
}

fn default_window() -> u64 {
    DEFAULT_DETECTION_WINDOW
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        self.noise.validate()?;
        match &self.initial {
            InitialCondition::UniformRandom => {}
            InitialCondition::AllEqual { value } => {
                if !(0.0..=1.0).contains(value) {
                    return Err(Error::OpinionOutOfRange { index: 0, value: *value });
                }
            }
            InitialCondition::Explicit { values } => {
                if values.len() != self.n {
                    return Err(Error::InvalidConfig(format!(
                        "explicit initial list has {} values, expected n = {}",
                        values.len(),
                        self.n
                    )));
                }
                if let Some((index, &value)) = values
                    .iter()
                    .enumerate()
                    .find(|(_, v)| !(0.0..=1.0).contains(*v))
                {
                    return Err(Error::OpinionOutOfRange { index, value });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn base() -> SimulationConfig {
        SimulationConfig {
            n: 3,
            epsilon: ConfidenceThreshold::new(0.2).unwrap(),
            noise: NoiseModel::uniform(0.02),
            initial: InitialCondition::Explicit {
                values: vec![0.1, 0.2, 0.3],
            },
            horizon: 10,
            master_seed: 1,
            detection_window: 5,
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(base().validate().is_ok());
        let mut c = base();
        c.horizon = 0;
        assert!(c.validate().is_err());
        let mut c = base();
        c.initial = InitialCondition::Explicit { values: vec![0.1] };
        assert!(c.validate().is_err());
        let mut c = base();
        c.initial = InitialCondition::Explicit {
            values: vec![0.1, 1.2, 0.3],
        };
        assert_eq!(
            c.validate(),
            Err(Error::OpinionOutOfRange { index: 1, value: 1.2 })
        );
        let mut c = base();
        c.noise = NoiseModel::uniform(-1.0);
        assert!(c.validate().is_err());
    }
}
