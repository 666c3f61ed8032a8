//! Fluorescence-channel features.
//!
//! Relative NADH and POM are ingested from the participant table. The only
//! derivation offered here is the plain `A460 / A365` ratio, which is marked
//! experimental and is not part of any default feature set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::SensorFeatureVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluoroError {
    #[error("backscatter amplitude A365 = {0} must be positive")]
    ZeroBackscatter(f64),
    #[error("negative fluorescence amplitude {name} = {value}")]
    Negative { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NadhFormula {
    #[default]
    Ratio,
}

/// A derived value together with whether it comes from an unpublished
/// normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub value: f64,
    pub experimental: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluoroReading {
    pub a365: f64,
    pub a460: f64,
    pub anadh: Option<f64>,
    pub pom: Option<f64>,
}

impl FluoroReading {
    pub fn new(
        a365: f64,
        a460: f64,
        anadh: Option<f64>,
        pom: Option<f64>,
    ) -> Result<Self, FluoroError> {
        for (name, v) in [("a365", Some(a365)), ("a460", Some(a460)), ("pom", pom)] {
            if let Some(v) = v {
                if v < 0.0 {
                    return Err(FluoroError::Negative { name, value: v });
                }
            }
        }
        Ok(Self {
            a365,
            a460,
            anadh,
            pom,
        })
    }

    pub fn from_sensor(s: &SensorFeatureVector) -> Option<Result<Self, FluoroError>> {
        Some(Self::new(s.a365?, s.a460?, s.anadh, s.pom))
    }

    /// Ingested relative NADH when present, otherwise the experimental ratio.
    pub fn nadh(&self, policy: NadhFormula) -> Result<Derived, FluoroError> {
        match self.anadh {
            Some(v) => Ok(Derived {
                value: v,
                experimental: false,
            }),
            None => nadh_relative(self.a460, self.a365, policy),
        }
    }
}

pub fn nadh_relative(a460: f64, a365: f64, policy: NadhFormula) -> Result<Derived, FluoroError> {
    if !(a365 > 0.0) {
        return Err(FluoroError::ZeroBackscatter(a365));
    }
    match policy {
        NadhFormula::Ratio => Ok(Derived {
            value: a460 / a365,
            experimental: true,
        }),
    }
}
