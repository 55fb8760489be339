//! Named thresholds for `kappa`.
//!
//! A ladder of decades in the spirit of safety integrity levels: level `n`
//! tolerates at most one label-changing perturbation in `10^n`. These are
//! configuration shorthands, not values mandated by any standard.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One label change per hundred perturbations.
pub const KAPPA_ONE_PERCENT: f64 = 1e-2;
/// One label change per ten thousand perturbations.
pub const KAPPA_ONE_IN_TEN_THOUSAND: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SilPreset(u8);

impl SilPreset {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 5;

    pub fn new(level: u8) -> Result<Self, Error> {
        if (Self::MIN..=Self::MAX).contains(&level) {
            Ok(Self(level))
        } else {
            Err(Error::Config(format!(
                "preset level {level} outside {}..={}",
                Self::MIN,
                Self::MAX
            )))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn kappa(self) -> f64 {
        const LADDER: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
        LADDER[usize::from(self.0 - Self::MIN)]
    }

    pub fn all() -> impl Iterator<Item = SilPreset> {
        (Self::MIN..=Self::MAX).map(SilPreset)
    }
}
