//! Driving-style catalog: driver-model parameters plus decision-cost weights.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::StyleError;
use crate::model::DriverParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrivingStyle {
    Aggressive,
    Normal,
    Conservative,
}

impl DrivingStyle {
    pub const ALL: [DrivingStyle; 3] = [Self::Aggressive, Self::Normal, Self::Conservative];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Aggressive => "aggressive",
            Self::Normal => "normal",
            Self::Conservative => "conservative",
        }
    }

    pub fn profile(&self) -> StyleProfile {
        let (driver, weights, time_headway) = match self {
            Self::Aggressive => (
                DriverParams::new(0.14, 1.02, 0.84, 0.24),
                CostWeights { safety: 0.10, comfort: 0.10, efficiency: 0.80 },
                1.0,
            ),
            Self::Normal => (
                DriverParams::new(0.18, 0.94, 0.75, 0.23),
                CostWeights { safety: 0.50, comfort: 0.30, efficiency: 0.20 },
                1.5,
            ),
            Self::Conservative => (
                DriverParams::new(0.24, 0.83, 0.62, 0.22),
                CostWeights { safety: 0.70, comfort: 0.20, efficiency: 0.10 },
                3.0,
            ),
        };
        StyleProfile {
            name: self.as_str().to_string(),
            driver,
            weights,
            time_headway,
        }
    }
}

impl fmt::Display for DrivingStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DrivingStyle {
    type Err = StyleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aggressive" => Ok(Self::Aggressive),
            "normal" => Ok(Self::Normal),
            "conservative" => Ok(Self::Conservative),
            _ => Err(StyleError::Unknown(s.to_string())),
        }
    }
}

/// Safety / comfort / efficiency weights of the decision cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    pub safety: f64,
    pub comfort: f64,
    pub efficiency: f64,
}

impl CostWeights {
    pub fn sum(&self) -> f64 {
        self.safety + self.comfort + self.efficiency
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleProfile {
    pub name: String,
    pub driver: DriverParams,
    pub weights: CostWeights,
    /// Time headway (s): how far ahead, in time, a slower lead car starts to matter.
    pub time_headway: f64,
}

impl StyleProfile {
    /// Checks the weight simplex and driver parameter positivity.
    pub fn validate(&self) -> Result<(), StyleError> {
        let invalid = |reason: String| StyleError::Invalid {
            name: self.name.clone(),
            reason,
        };
        let w = &self.weights;
        for (label, v) in [("safety", w.safety), ("comfort", w.comfort), ("efficiency", w.efficiency)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(format!("{label} weight {v} outside (0, 1)")));
            }
        }
        if (w.sum() - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {} instead of 1", w.sum())));
        }
        if !(self.time_headway.is_finite() && self.time_headway > 0.0) {
            return Err(invalid(format!("time headway {} must be positive", self.time_headway)));
        }
        self.driver.validate().map_err(|e| invalid(e.to_string()))
    }
}

/// Looks up one of the built-in profiles by name.
pub fn style_profile(name: &str) -> Result<StyleProfile, StyleError> {
    name.parse::<DrivingStyle>().map(|s| s.profile())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        let a = style_profile("aggressive").unwrap();
        assert_eq!(
            a.driver,
            DriverParams::new(0.14, 1.02, 0.84, 0.24)
        );
        assert_eq!((a.weights.safety, a.weights.comfort, a.weights.efficiency), (0.10, 0.10, 0.80));

        let c = style_profile("conservative").unwrap();
        assert_eq!(
            c.driver,
            DriverParams::new(0.24, 0.83, 0.62, 0.22)
        );
        assert_eq!((c.weights.safety, c.weights.comfort, c.weights.efficiency), (0.70, 0.20, 0.10));

        let n = style_profile("Normal").unwrap();
        assert_eq!((n.weights.safety, n.weights.comfort, n.weights.efficiency), (0.50, 0.30, 0.20));
        assert_eq!(n.driver.delay, 0.18);
    }

    #[test]
    fn unknown_style() {
        assert!(matches!(style_profile("sporty"), Err(StyleError::Unknown(_))));
    }

    #[test]
    fn builtins_validate_and_order() {
        let [a, n, c] = DrivingStyle::ALL.map(|s| s.profile());
        for p in [&a, &n, &c] {
            p.validate().unwrap();
            assert!((p.weights.sum() - 1.0).abs() <= 1e-12);
        }
        assert!(a.driver.delay < n.driver.delay && n.driver.delay < c.driver.delay);
        assert!(a.weights.efficiency > n.weights.efficiency && n.weights.efficiency > c.weights.efficiency);
        assert!(a.weights.safety < n.weights.safety && n.weights.safety < c.weights.safety);
    }

    #[test]
    fn custom_profile_checks_simplex() {
        let mut p = DrivingStyle::Normal.profile();
        p.name = "mine".into();
        p.weights.efficiency = 0.3;
        assert!(p.validate().is_err());
        p.weights = CostWeights { safety: 0.4, comfort: 0.3, efficiency: 0.3 };
        p.validate().unwrap();
    }
}
