//! CROSS: balancing trials with puzzle-priced backup registrations.
//!
//! Each trial re-registers every flow on a fair coin, freezing the split for
//! the trial's duration `L > T`; trials repeat until the drawn imbalance
//! falls below `epsilon`. Flows may additionally buy a *backup* registration
//! for the other path: an insurance they may use exactly once, on path
//! failure. The backup is priced by a hash puzzle: finding `s` with
//! `h(pi, t_i, e, s) <= 2^{-delta}` takes `2^delta` expected evaluations at
//! `c_h` each, so a rational end-host solves it only when its private
//! valuation `omega` of the insurance exceeds the expected effort. Picking
//!
//! ```text
//! delta = log2((L - T) / c_h)
//! ```
//!
//! puts that threshold exactly at the largest cost gain an opportunistic
//! switch could ever harvest within a trial (`L - T`), leaving no profitable
//! use of a backup short of an actual failure.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::hashing::puzzle_hash;
use crate::stats::normal_cdf;
use crate::strategy::{CostReport, StrategyCost, Verdict};
use crate::system::{cost_of, ParallelPathSystem, Path};
use crate::trajectory::{SampleKind, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum CrossError {
    #[error("trial length {trial} must exceed the staleness delay {t_stale}")]
    TrialTooShort { trial: f64, t_stale: f64 },
    #[error("approximate-equality threshold must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("hash cost must be positive, got {0}")]
    BadHashCost(f64),
    #[error("split deviation must be nonnegative, got {0}")]
    BadSplitSigma(f64),
    #[error("backup share must lie in [0, 1], got {0}")]
    BadBackupShare(f64),
    #[error("puzzle unsolved after {0} attempts")]
    NotFound(u64),
}

#[derive(Debug, Clone)]
pub struct CrossConfig {
    /// Balancing-trial length `L`; must exceed the staleness delay.
    pub trial: f64,
    /// Approximate-equality threshold `epsilon`.
    pub epsilon: f64,
    /// Registration-attempt cost `c_a`.
    pub c_attempt: f64,
    /// Penalty cost `c_p` for unregistered path use.
    pub c_penalty: f64,
    /// Cost per hash evaluation `c_h`.
    pub c_hash: f64,
    /// Standard deviation of the per-trial split (finite-population stand-in).
    pub sigma_split: f64,
    /// Share of flows holding a backup registration (used in failure replay).
    pub backup_share: f64,
    /// Scheduled path failures as `(path, time)` pairs.
    pub failures: Vec<(Path, f64)>,
}

impl CrossConfig {
    pub fn new(trial: f64, epsilon: f64, c_attempt: f64, c_hash: f64, sigma_split: f64) -> Self {
        CrossConfig {
            trial,
            epsilon,
            c_attempt,
            c_penalty: crate::floss::PENALTY_SENTINEL,
            c_hash,
            sigma_split,
            backup_share: 0.0,
            failures: Vec::new(),
        }
    }

    pub fn validate(&self, sys: &ParallelPathSystem) -> Result<(), CrossError> {
        if self.trial <= sys.t_stale {
            return Err(CrossError::TrialTooShort {
                trial: self.trial,
                t_stale: sys.t_stale,
            });
        }
        if !(self.epsilon > 0.0) {
            return Err(CrossError::BadEpsilon(self.epsilon));
        }
        if !(self.c_hash > 0.0) {
            return Err(CrossError::BadHashCost(self.c_hash));
        }
        if self.sigma_split < 0.0 {
            return Err(CrossError::BadSplitSigma(self.sigma_split));
        }
        if !(0.0..=1.0).contains(&self.backup_share) {
            return Err(CrossError::BadBackupShare(self.backup_share));
        }
        Ok(())
    }
}

/// A hash puzzle pricing one backup registration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Puzzle {
    pub path: Path,
    pub trial_start: f64,
    pub endhost: u64,
    /// Difficulty level; a solution must hash at or below `2^{-difficulty}`.
    pub difficulty: f64,
}

impl Puzzle {
    pub fn threshold(&self) -> f64 {
        (-self.difficulty).exp2()
    }

    /// One hash evaluation: accepts `s` iff `h(pi, t_i, e, s) <= 2^{-delta}`.
    pub fn verify(&self, s: u64) -> bool {
        puzzle_hash(self.path, self.trial_start, self.endhost, s) <= self.threshold()
    }

    /// Brute-force search `s = 0, 1, 2, ...`; expected `2^delta` attempts.
    pub fn solve(&self, max_attempts: u64) -> Result<u64, CrossError> {
        assert!(max_attempts >= 1);
        (0..max_attempts)
            .find(|&s| self.verify(s))
            .ok_or(CrossError::NotFound(max_attempts))
    }
}

/// One backup registration; usable for a single switch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackupRegistration {
    pub flow: u64,
    pub path: Path,
    pub consumed: bool,
}

impl BackupRegistration {
    pub fn new(flow: u64, path: Path) -> Self {
        BackupRegistration {
            flow,
            path,
            consumed: false,
        }
    }

    /// Uses the backup; only the first call succeeds ("switch once, never
    /// back").
    pub fn consume(&mut self) -> bool {
        !std::mem::replace(&mut self.consumed, true)
    }
}

/// Expected utility of one hash evaluation to an end-host valuing the backup
/// at `omega`: success probability `2^{-delta}` wins `omega`, every
/// evaluation costs `c_h`.
pub fn expected_hash_utility(difficulty: f64, omega: f64, c_hash: f64) -> f64 {
    (-difficulty).exp2() * omega - c_hash
}

/// Difficulty level making puzzle-solving rational exactly for valuations
/// above the maximal in-trial cost gain `L - T`.
///
/// Solves `2^{-delta} (L - T) = c_h` for real-valued `delta`, then nudges by
/// single ulps so that the indifference point sits at `omega = L - T` in
/// floating-point evaluation too (never strictly profitable at the bound).
/// Degenerate pricing (`c_h >= L - T`) clamps to zero difficulty.
pub fn choose_difficulty(trial: f64, t_stale: f64, c_hash: f64) -> Result<f64, CrossError> {
    if trial <= t_stale {
        return Err(CrossError::TrialTooShort { trial, t_stale });
    }
    if !(c_hash > 0.0) {
        return Err(CrossError::BadHashCost(c_hash));
    }
    let max_gain = trial - t_stale;
    let mut difficulty = (max_gain / c_hash).log2().max(0.0);
    while expected_hash_utility(difficulty, max_gain, c_hash) > 0.0 {
        difficulty = difficulty.next_up();
    }
    Ok(difficulty)
}

/// Probability that one balancing trial lands within `epsilon` of equal
/// load, approximating the drawn split as normal around 1/2.
pub fn convergence_probability(epsilon: f64, sigma_split: f64) -> Result<f64, CrossError> {
    if !(epsilon > 0.0) {
        return Err(CrossError::BadEpsilon(epsilon));
    }
    if !(sigma_split > 0.0) {
        return Err(CrossError::BadSplitSigma(sigma_split));
    }
    Ok(normal_cdf((1.0 + epsilon) / 2.0, 0.5, sigma_split)
        - normal_cdf((1.0 - epsilon) / 2.0, 0.5, sigma_split))
}

/// One balancing trial of a CROSS run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossTrial {
    pub index: usize,
    pub start: f64,
    pub f_alpha: f64,
    pub delta: f64,
    pub backup_share: f64,
}

/// A path failure replayed during a run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FailureEvent {
    pub path: Path,
    pub time: f64,
    /// Mass that switched immediately (backup holders on the failed path).
    pub immediate_mass: f64,
    /// Mass that waited for the next boundary.
    pub deferred_mass: f64,
    pub boundary: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossRun {
    #[serde(skip)]
    pub trajectory: Trajectory,
    pub trials: Vec<CrossTrial>,
    /// Number of balancing trials drawn, the successful one included.
    pub trials_used: usize,
    /// Start time of the trial whose draw satisfied `Delta < epsilon`.
    pub suspension_time: Option<f64>,
    pub failure_events: Vec<FailureEvent>,
}

/// Simulates CROSS enforcement from `t = 0` over `[0, horizon]`.
///
/// Per trial the split is drawn `Normal(1/2, sigma_split^2)` (truncated by
/// resampling; degenerate at exactly 1/2 when `sigma_split = 0`) and held
/// constant: puzzle pricing removes every incentive for in-trial migration.
/// Trials repeat until the draw lands within `epsilon`, after which the
/// split stays frozen. On a scheduled failure, backup holders on the failed
/// path switch immediately; the rest follow at the next boundary, after
/// which the run stops rebalancing (a one-path system has nothing to
/// balance).
pub fn simulate_cross(
    sys: &ParallelPathSystem,
    cfg: &CrossConfig,
    horizon: f64,
    seed: u64,
) -> Result<CrossRun, CrossError> {
    cfg.validate(sys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_trial = 64usize;
    let step = cfg.trial / per_trial as f64;
    let n_samples = (horizon / step).ceil() as usize + 1;
    let mut loads = Vec::with_capacity(n_samples);

    let mut trials = Vec::new();
    let mut suspension_time = None;
    let mut failure_events = Vec::new();
    let mut failures = cfg.failures.clone();
    failures.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut failed: Option<Path> = None;

    let mut f_alpha = 0.5;
    let mut index = 0usize;
    while loads.len() < n_samples {
        let start = loads.len() as f64 * step;
        let rebalancing = suspension_time.is_none() && failed.is_none();
        if rebalancing {
            f_alpha = draw_split(&mut rng, cfg.sigma_split);
            let delta = (2.0 * f_alpha - 1.0).abs();
            trials.push(CrossTrial {
                index,
                start,
                f_alpha,
                delta,
                backup_share: cfg.backup_share,
            });
            if delta < cfg.epsilon {
                suspension_time = Some(start);
            }
            index += 1;
        }

        let trial_end = start + cfg.trial;
        // Replay any failure scheduled inside this trial window.
        let failure = failures
            .first()
            .copied()
            .filter(|&(_, at)| failed.is_none() && at >= start && at < trial_end);
        match failure {
            Some((path, at)) => {
                failures.remove(0);
                let f_failed = path.load(f_alpha);
                let immediate = cfg.backup_share * f_failed;
                // Constant until the failure...
                fill_until(&mut loads, step, at, f_alpha, n_samples);
                // ...backup holders jump at the failure instant...
                f_alpha = shift_off(path, f_alpha, immediate);
                fill_until(&mut loads, step, trial_end, f_alpha, n_samples);
                // ...the rest follow at the boundary.
                let deferred = path.load(f_alpha);
                f_alpha = shift_off(path, f_alpha, deferred);
                failure_events.push(FailureEvent {
                    path,
                    time: at,
                    immediate_mass: immediate,
                    deferred_mass: deferred,
                    boundary: trial_end,
                });
                failed = Some(path);
            }
            None => fill_until(&mut loads, step, trial_end, f_alpha, n_samples),
        }
    }
    loads.truncate(n_samples);

    let trials_used = trials.len();
    let mut trajectory = Trajectory::from_samples(0.0, step, loads, SampleKind::Step);
    trajectory.set_history(0.5);
    Ok(CrossRun {
        trajectory,
        trials,
        trials_used,
        suspension_time,
        failure_events,
    })
}

fn draw_split(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.5;
    }
    let normal = Normal::new(0.5, sigma).expect("validated sigma");
    loop {
        let draw = normal.sample(rng);
        if (0.0..=1.0).contains(&draw) {
            return draw;
        }
    }
}

fn shift_off(path: Path, f_alpha: f64, mass: f64) -> f64 {
    match path {
        Path::Alpha => f_alpha - mass,
        Path::Beta => f_alpha + mass,
    }
}

fn fill_until(loads: &mut Vec<f64>, step: f64, until: f64, value: f64, cap: usize) {
    while loads.len() < cap && (loads.len() as f64) * step < until - 1e-12 {
        loads.push(value);
    }
}

/// Checks the three incentive legs of CROSS on a finished run, across a grid
/// of backup valuations:
///
/// - valuations at or below the maximal in-trial gain `L - T` make puzzle
///   solving unprofitable at the chosen difficulty;
/// - backup holders (valuations above `L - T`) never gain from an
///   opportunistic switch, because the realized in-trial gain never exceeds
///   `L - T` and consuming the backup forfeits the valuation;
/// - registering (cost `c_a`) always beats unregistered use (penalty `c_p`).
pub fn cross_incentive_check(
    sys: &ParallelPathSystem,
    cfg: &CrossConfig,
    run: &CrossRun,
    omegas: &[f64],
) -> Result<CostReport, CrossError> {
    cfg.validate(sys)?;
    let difficulty = choose_difficulty(cfg.trial, sys.t_stale, cfg.c_hash)?;
    let max_gain = cfg.trial - sys.t_stale;
    let mut violations = Vec::new();

    for &omega in omegas {
        let utility = expected_hash_utility(difficulty, omega, cfg.c_hash);
        if omega <= max_gain && utility > 0.0 {
            violations.push((omega, 0.0, "puzzle profitable below the gain bound"));
        }
        if omega > max_gain && utility <= 0.0 {
            violations.push((omega, 0.0, "puzzle unprofitable above the gain bound"));
        }
    }

    // Realized in-trial gain of an opportunistic backup switch: the cost
    // difference integrated from perception (t_i + T) to the trial's end.
    for trial in &run.trials {
        let (c_a, c_b) = (
            cost_of(trial.f_alpha, sys.p),
            cost_of(1.0 - trial.f_alpha, sys.p),
        );
        let realized_gain = (cfg.trial - sys.t_stale) * (c_a - c_b).abs();
        if realized_gain > max_gain + 1e-12 {
            violations.push((
                realized_gain,
                trial.start,
                "realized gain exceeds the bound",
            ));
        }
        for &omega in omegas {
            if omega > max_gain && omega < realized_gain {
                violations.push((omega, trial.start, "backup holder would switch"));
            }
        }
    }

    if cfg.c_attempt >= cfg.c_penalty {
        violations.push((cfg.c_attempt, 0.0, "registration dearer than the penalty"));
    }

    if let Some(&(omega, t, what)) = violations.first() {
        return Ok(CostReport {
            costs: vec![],
            verdict: Verdict::Deviation {
                strategy: format!("omega = {omega} at t = {t}: {what}"),
                gain: f64::NAN,
            },
        });
    }
    Ok(CostReport {
        costs: vec![StrategyCost {
            strategy: "cross-compliant".into(),
            cost: cost_of(0.5, sys.p) + cfg.c_attempt,
        }],
        verdict: Verdict::Equilibrium,
    })
}
