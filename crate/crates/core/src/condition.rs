use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One stimulus condition: circular aperture size and nominal phosphene count.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Condition {
    pub fov_deg: f64,
    pub phosphenes: u32,
}

impl Condition {
    pub const FOVS_DEG: [f64; 3] = [20.0, 40.0, 60.0];
    pub const PHOSPHENE_COUNTS: [u32; 2] = [200, 500];

    pub fn new(fov_deg: f64, phosphenes: u32) -> Self {
        Self { fov_deg, phosphenes }
    }

    /// The 2 × 3 grid of phosphene counts × apertures used by the protocol.
    pub fn default_grid() -> Vec<Condition> {
        Self::PHOSPHENE_COUNTS
            .iter()
            .flat_map(|&n| Self::FOVS_DEG.iter().map(move |&f| Condition::new(f, n)))
            .collect()
    }

    fn key(&self) -> (u64, u32) {
        // +0.0 and -0.0 compare equal
        ((self.fov_deg + 0.0).to_bits(), self.phosphenes)
    }
}

impl PartialEq for Condition {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Condition {}

impl Hash for Condition {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl Ord for Condition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.phosphenes
            .cmp(&other.phosphenes)
            .then(self.fov_deg.total_cmp(&other.fov_deg))
    }
}

impl PartialOrd for Condition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.fov_deg, self.phosphenes)
    }
}

/// Parses `FOVxCOUNT`, e.g. `20x500`.
impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (fov, n) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected FOVxCOUNT, got {s:?}"))?;
        let fov: f64 = fov.trim().parse().map_err(|e| format!("bad FOV in {s:?}: {e}"))?;
        let n: u32 = n.trim().parse().map_err(|e| format!("bad count in {s:?}: {e}"))?;
        if fov.is_nan() || fov <= 0.0 || n == 0 {
            return Err(format!("condition {s:?} must have positive FOV and count"));
        }
        Ok(Condition::new(fov, n))
    }
}
