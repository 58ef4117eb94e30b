//! The parallel-path system model and load-dependent path costs.
//!
//! A unit traffic demand is split over two parallel paths `alpha` and `beta`;
//! the load on a path determines its cost `c = f^p`, and end-hosts observe
//! costs with a staleness delay of `T` time units. By convention the initial
//! imbalance puts the higher load on `alpha`, so `A0 >= 1/2`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Snap tolerance used when clamping loads to `[0, 1]` after arithmetic.
pub const LOAD_SNAP: f64 = 1e-12;

/// Tolerance for the profile-shares-sum-to-one invariant.
pub const PROFILE_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SystemError {
    #[error("re-evaluation rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("cost steepness must satisfy p >= 1, got {0}")]
    BadSteepness(f64),
    #[error("staleness must satisfy T >= 0, got {0}")]
    NegativeStaleness(f64),
    #[error("initial load must lie in [1/2, 1], got {0}")]
    BadInitialLoad(f64),
    #[error("load {0} outside [0, 1]")]
    LoadOutOfRange(f64),
    #[error("strategy shares must sum to 1, got {0}")]
    BadProfileSum(f64),
    #[error("strategy share for {0} is negative: {1}")]
    NegativeShare(String, f64),
    #[error("malformed system config line: {0:?}")]
    BadConfigLine(String),
}

/// One of the two parallel paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Path {
    Alpha,
    Beta,
}

impl Path {
    /// The respective other path.
    #[inline]
    pub fn other(self) -> Path {
        match self {
            Path::Alpha => Path::Beta,
            Path::Beta => Path::Alpha,
        }
    }

    /// Load on this path given the load on `alpha` (unit total demand).
    #[inline]
    pub fn load(self, f_alpha: f64) -> f64 {
        match self {
            Path::Alpha => f_alpha,
            Path::Beta => 1.0 - f_alpha,
        }
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Path::Alpha => write!(f, "alpha"),
            Path::Beta => write!(f, "beta"),
        }
    }
}

/// A path cost: `f^p` while the path is up, infinite once it has failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCost {
    pub value: f64,
    pub failed: bool,
}

impl PathCost {
    pub fn finite(value: f64) -> Self {
        PathCost {
            value,
            failed: false,
        }
    }

    pub fn failed() -> Self {
        PathCost {
            value: f64::INFINITY,
            failed: true,
        }
    }

    /// Effective cost; a failed path dominates every finite cost.
    #[inline]
    pub fn effective(self) -> f64 {
        if self.failed {
            f64::INFINITY
        } else {
            self.value
        }
    }
}

impl PartialOrd for PathCost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.effective().partial_cmp(&other.effective())
    }
}

/// Load-dependent path cost `c = f^p`.
///
/// Loads within `1e-9` outside `[0, 1]` are snapped to the boundary; anything
/// further out is a domain error.
pub fn path_cost(load: f64, steepness: f64) -> Result<PathCost, SystemError> {
    if !(steepness >= 1.0) {
        return Err(SystemError::BadSteepness(steepness));
    }
    if !(-1e-9..=1.0 + 1e-9).contains(&load) {
        return Err(SystemError::LoadOutOfRange(load));
    }
    let f = load.clamp(0.0, 1.0);
    Ok(PathCost::finite(f.powf(steepness)))
}

/// Raw cost `f^p` for a load already known to be in `[0, 1]`.
#[inline]
pub fn cost_of(load: f64, steepness: f64) -> f64 {
    if steepness == 1.0 {
        load
    } else {
        load.powf(steepness)
    }
}

/// A parallel-path system: two paths, re-evaluation rate `r`, cost steepness
/// `p`, staleness `T`, initial load `A0` on `alpha`, and the strategy profile
/// giving the adoption share of each path-selection strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelPathSystem {
    pub r: f64,
    pub p: f64,
    pub t_stale: f64,
    pub a0: f64,
    pub profile: BTreeMap<String, f64>,
}

impl ParallelPathSystem {
    pub fn new(
        r: f64,
        p: f64,
        t_stale: f64,
        a0: f64,
        profile: BTreeMap<String, f64>,
    ) -> Result<Self, SystemError> {
        if !(r > 0.0) {
            return Err(SystemError::NonPositiveRate(r));
        }
        if !(p >= 1.0) {
            return Err(SystemError::BadSteepness(p));
        }
        if !(t_stale >= 0.0) {
            return Err(SystemError::NegativeStaleness(t_stale));
        }
        let a0 = snap_load(a0);
        if !(0.5..=1.0).contains(&a0) {
            return Err(SystemError::BadInitialLoad(a0));
        }
        let mut sum = 0.0;
        for (id, &share) in &profile {
            if share < 0.0 {
                return Err(SystemError::NegativeShare(id.clone(), share));
            }
            sum += share;
        }
        if (sum - 1.0).abs() > PROFILE_TOL {
            return Err(SystemError::BadProfileSum(sum));
        }
        Ok(ParallelPathSystem {
            r,
            p,
            t_stale,
            a0,
            profile,
        })
    }

    /// Convenience constructor for a single universally adopted strategy.
    pub fn universal(
        r: f64,
        p: f64,
        t_stale: f64,
        a0: f64,
        strategy: &str,
    ) -> Result<Self, SystemError> {
        let mut profile = BTreeMap::new();
        profile.insert(strategy.to_string(), 1.0);
        Self::new(r, p, t_stale, a0, profile)
    }

    /// A system is oscillation-prone exactly when cost information is stale.
    pub fn oscillation_prone(&self) -> bool {
        self.t_stale > 0.0
    }

    /// Expected re-evaluation period of an individual end-host.
    pub fn reeval_period(&self) -> f64 {
        1.0 / self.r
    }

    /// Adoption share of a strategy (0 when absent from the profile).
    pub fn share(&self, id: &str) -> f64 {
        self.profile.get(id).copied().unwrap_or(0.0)
    }

    /// Cost of a path at a given load on `alpha`.
    pub fn cost(&self, path: Path, f_alpha: f64) -> f64 {
        cost_of(path.load(f_alpha), self.p)
    }

    /// Plain-text key-value form: `r`, `p`, `T`, `A0`, then one
    /// `strategy = share` line per profile entry.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("r = {}\n", self.r));
        out.push_str(&format!("p = {}\n", self.p));
        out.push_str(&format!("T = {}\n", self.t_stale));
        out.push_str(&format!("A0 = {}\n", self.a0));
        for (id, share) in &self.profile {
            out.push_str(&format!("{id} = {share}\n"));
        }
        out
    }

    /// Parses the key-value form produced by [`Self::to_config_string`].
    /// Keys other than `r`, `p`, `T`, `A0` are profile entries.
    pub fn from_config_str(text: &str) -> Result<Self, SystemError> {
        let mut r = None;
        let mut p = None;
        let mut t_stale = None;
        let mut a0 = None;
        let mut profile = BTreeMap::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| SystemError::BadConfigLine(raw.to_string()))?;
            let key = key.trim();
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| SystemError::BadConfigLine(raw.to_string()))?;
            match key {
                "r" => r = Some(value),
                "p" => p = Some(value),
                "T" => t_stale = Some(value),
                "A0" => a0 = Some(value),
                _ => {
                    profile.insert(key.to_string(), value);
                }
            }
        }
        let missing = |k: &str| SystemError::BadConfigLine(format!("missing key {k}"));
        Self::new(
            r.ok_or_else(|| missing("r"))?,
            p.ok_or_else(|| missing("p"))?,
            t_stale.ok_or_else(|| missing("T"))?,
            a0.ok_or_else(|| missing("A0"))?,
            profile,
        )
    }
}

/// Clamps a load to `[0, 1]`, absorbing rounding noise up to [`LOAD_SNAP`].
#[inline]
pub fn snap_load(f: f64) -> f64 {
    if (f - 0.5).abs() < LOAD_SNAP {
        // Exact balance matters for tie handling; snap to it.
        0.5
    } else {
        f.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn path_cost_examples() {
        assert_relative_eq!(path_cost(0.5, 1.0).unwrap().value, 0.5);
        assert_relative_eq!(path_cost(0.0, 3.0).unwrap().value, 0.0);
        assert_relative_eq!(path_cost(0.7, 2.0).unwrap().value, 0.49, epsilon = 1e-15);
    }

    #[test]
    fn path_cost_is_monotone_in_load() {
        let p = 2.5;
        let mut prev = -1.0;
        for i in 0..=100 {
            let f = f64::from(i) / 100.0;
            let c = path_cost(f, p).unwrap().value;
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn path_cost_rejects_out_of_domain() {
        assert!(matches!(
            path_cost(1.1, 1.0),
            Err(SystemError::LoadOutOfRange(_))
        ));
        assert!(matches!(
            path_cost(-0.2, 1.0),
            Err(SystemError::LoadOutOfRange(_))
        ));
        assert!(matches!(
            path_cost(0.5, 0.5),
            Err(SystemError::BadSteepness(_))
        ));
        // Within the 1e-9 snap band the cost is clamped, not rejected.
        assert_relative_eq!(path_cost(1.0 + 5e-10, 2.0).unwrap().value, 1.0);
    }

    #[test]
    fn failed_cost_dominates_every_finite_cost() {
        let failed = PathCost::failed();
        let cheap = PathCost::finite(0.0);
        let dear = PathCost::finite(1.0);
        assert!(failed > dear);
        assert!(failed > cheap);
        assert!(dear > cheap);
    }

    #[test]
    fn system_validation() {
        assert!(ParallelPathSystem::universal(0.3, 1.0, 2.0, 0.7, "greedy").is_ok());
        assert!(matches!(
            ParallelPathSystem::universal(0.0, 1.0, 2.0, 0.7, "greedy"),
            Err(SystemError::NonPositiveRate(_))
        ));
        assert!(matches!(
            ParallelPathSystem::universal(1.0, 0.9, 2.0, 0.7, "greedy"),
            Err(SystemError::BadSteepness(_))
        ));
        assert!(matches!(
            ParallelPathSystem::universal(1.0, 1.0, -1.0, 0.7, "greedy"),
            Err(SystemError::NegativeStaleness(_))
        ));
        assert!(matches!(
            ParallelPathSystem::universal(1.0, 1.0, 2.0, 0.4, "greedy"),
            Err(SystemError::BadInitialLoad(_))
        ));
    }

    #[test]
    fn profile_shares_must_sum_to_one() {
        let mut profile = BTreeMap::new();
        profile.insert("greedy".to_string(), 0.3);
        profile.insert("antagonist".to_string(), 0.699);
        assert!(matches!(
            ParallelPathSystem::new(1.0, 1.0, 2.0, 0.9, profile.clone()),
            Err(SystemError::BadProfileSum(_))
        ));
        profile.insert("antagonist".to_string(), 0.7);
        assert!(ParallelPathSystem::new(1.0, 1.0, 2.0, 0.9, profile).is_ok());
    }

    #[test]
    fn oscillation_prone_iff_stale() {
        let stale = ParallelPathSystem::universal(1.0, 1.0, 2.0, 0.7, "greedy").unwrap();
        let fresh = ParallelPathSystem::universal(1.0, 1.0, 0.0, 0.7, "greedy").unwrap();
        assert!(stale.oscillation_prone());
        assert!(!fresh.oscillation_prone());
    }

    #[test]
    fn config_round_trip() {
        let mut profile = BTreeMap::new();
        profile.insert("greedy".to_string(), 0.3);
        profile.insert("antagonist".to_string(), 0.7);
        let sys = ParallelPathSystem::new(0.3, 2.0, 1.5, 0.9, profile).unwrap();
        let text = sys.to_config_string();
        let back = ParallelPathSystem::from_config_str(&text).unwrap();
        assert_eq!(sys, back);
    }

    #[test]
    fn config_rejects_garbage() {
        assert!(ParallelPathSystem::from_config_str("r = 1\np = 1\nT").is_err());
        assert!(ParallelPathSystem::from_config_str("r = 1\np = 1\nT = x\nA0 = 1").is_err());
        assert!(ParallelPathSystem::from_config_str("p = 1\nT = 1\nA0 = 1").is_err());
    }
}
