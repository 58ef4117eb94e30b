//! FLOSS: interval registrations with loyalty renewal and a migration
//! allowance.
//!
//! Enforcement proceeds in intervals of length `L > T`. Every flow must hold
//! a registration for exactly one path per interval; loyal flows renew for
//! free choice of their current path, while flows wanting to migrate off the
//! more expensive path are admitted only up to a *migration allowance*
//! `rho`, chosen so that the cheaper path stays (weakly) cheaper:
//!
//! ```text
//! f_cheap + rho * f_dear <= (1 - rho) * f_dear   =>   rho_max = (f_dear - f_cheap) / (2 f_dear).
//! ```
//!
//! Applying a fraction `kappa` of that bound contracts the imbalance by
//! `1 - kappa` per interval; once the imbalance stays below a stop threshold
//! for a full staleness delay, every end-host perceives balanced costs and
//! enforcement can be suspended without the system moving again.
//!
//! Mechanism-imposed costs: a registration attempt costs `c_a`; using a path
//! without a registration costs the penalty `c_p` (a dominating sentinel).

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::strategy::{CostReport, SelectionFn, Strategy, StrategyCost, Verdict};
use crate::system::{cost_of, ParallelPathSystem, Path};
use crate::trajectory::{SampleKind, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum FlossError {
    #[error("interval length {interval} must exceed the staleness delay {t_stale}")]
    IntervalTooShort { interval: f64, t_stale: f64 },
    #[error("allowance fraction must lie in (0, 1], got {0}")]
    BadAllowanceFraction(f64),
    #[error("penalty cost {c_penalty} must dominate the attempt cost {c_attempt}")]
    PenaltyTooSmall { c_attempt: f64, c_penalty: f64 },
    #[error("loads ({0}, {1}) are not a cheap/dear split of unit demand")]
    BadLoads(f64, f64),
    #[error("no equilibrium load in [0, 1] for c_a = {c_attempt} (registration cost too large)")]
    NoRoot { c_attempt: f64 },
    #[error("suspension threshold must be positive, got {0}")]
    BadStopThreshold(f64),
}

/// Default penalty sentinel: finite so cost arithmetic stays total, large
/// enough to dominate every comparison.
pub const PENALTY_SENTINEL: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct FlossConfig {
    /// Interval length `L`; must exceed the staleness delay.
    pub interval: f64,
    /// Registration-attempt cost `c_a`.
    pub c_attempt: f64,
    /// Penalty cost `c_p` for unregistered path use.
    pub c_penalty: f64,
    /// Fraction `kappa` of the maximal allowance applied per interval.
    pub kappa: f64,
    /// Suspension threshold on the imbalance.
    pub delta_stop: f64,
    /// When set, the initial registration split is drawn binomially over
    /// this many flows instead of using the injected imbalance.
    pub initial_flows: Option<u64>,
}

impl FlossConfig {
    pub fn new(interval: f64, c_attempt: f64, kappa: f64, delta_stop: f64) -> Self {
        FlossConfig {
            interval,
            c_attempt,
            c_penalty: PENALTY_SENTINEL,
            kappa,
            delta_stop,
            initial_flows: None,
        }
    }

    pub fn validate(&self, sys: &ParallelPathSystem) -> Result<(), FlossError> {
        if self.interval <= sys.t_stale {
            return Err(FlossError::IntervalTooShort {
                interval: self.interval,
                t_stale: sys.t_stale,
            });
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(FlossError::BadAllowanceFraction(self.kappa));
        }
        if self.c_penalty <= self.c_attempt || self.c_attempt < 0.0 {
            return Err(FlossError::PenaltyTooSmall {
                c_attempt: self.c_attempt,
                c_penalty: self.c_penalty,
            });
        }
        if !(self.delta_stop > 0.0) {
            return Err(FlossError::BadStopThreshold(self.delta_stop));
        }
        Ok(())
    }
}

/// Mechanism-imposed cost `c_M(pi, t | A_e, R_e)`: the attempt cost when the
/// end-host applies, plus the penalty when it ends up unregistered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismCost {
    pub c_attempt: f64,
    pub c_penalty: f64,
}

impl MechanismCost {
    /// Raw cost for explicit apply/registered outcomes.
    pub fn raw(&self, applies: bool, registered: bool) -> f64 {
        let attempt = if applies { self.c_attempt } else { 0.0 };
        let penalty = if registered { 0.0 } else { self.c_penalty };
        attempt + penalty
    }

    /// Cost after the end-host's optimal choice of whether to apply: apply
    /// exactly when entitled (`c_a`), otherwise eat the penalty (`c_p`).
    pub fn optimized(&self, entitled: bool) -> f64 {
        if entitled {
            self.c_attempt
        } else {
            self.c_penalty
        }
    }
}

/// Per-flow registration bookkeeping for one enforcement interval.
#[derive(Debug, Clone, Default)]
pub struct RegistrationState {
    assignments: HashMap<u64, Registration>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Registration {
    pub path: Path,
    pub loyal: bool,
}

impl RegistrationState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a flow on a path; a repeated registration for the same flow
    /// replaces the previous one, keeping exactly one per interval.
    pub fn register(&mut self, flow: u64, path: Path, loyal: bool) {
        self.assignments.insert(flow, Registration { path, loyal });
    }

    pub fn get(&self, flow: u64) -> Option<Registration> {
        self.assignments.get(&flow).copied()
    }

    pub fn is_registered(&self, flow: u64, path: Path) -> bool {
        self.assignments.get(&flow).is_some_and(|r| r.path == path)
    }

    pub fn count_on(&self, path: Path) -> usize {
        self.assignments.values().filter(|r| r.path == path).count()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Maximal migration allowance: the fraction of dear-path flows that can
/// move without making the cheap path the dear one.
pub fn max_allowance(f_cheap: f64, f_dear: f64) -> Result<f64, FlossError> {
    let bad = || FlossError::BadLoads(f_cheap, f_dear);
    if !(0.0..=1.0).contains(&f_cheap)
        || !(0.0..=1.0).contains(&f_dear)
        || f_cheap > f_dear
        || (f_cheap + f_dear - 1.0).abs() > 1e-9
    {
        return Err(bad());
    }
    if f_dear == 0.0 {
        return Ok(0.0);
    }
    Ok((f_dear - f_cheap) / (2.0 * f_dear))
}

/// One enforcement interval of a FLOSS run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlossInterval {
    pub index: usize,
    pub start: f64,
    /// Load on `alpha` during the interval (equals the registered share).
    pub f_alpha: f64,
    /// Imbalance during the interval.
    pub delta: f64,
    /// Allowance applied at the interval's start boundary.
    pub rho_applied: f64,
    /// Share of flows registered on `alpha`.
    pub registered_alpha: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlossRun {
    #[serde(skip)]
    pub trajectory: Trajectory,
    pub intervals: Vec<FlossInterval>,
    /// Number of enforcement intervals simulated before suspension (the
    /// suspended interval included).
    pub intervals_used: usize,
    /// Time at which enforcement was suspended: the imbalance held below the
    /// stop threshold for a full staleness delay.
    pub suspension_time: Option<f64>,
}

/// Simulates FLOSS enforcement from `t = 0` over `[0, horizon]`.
///
/// The initial registration split is the system's injected imbalance
/// (`A0`, exactly 1/2 in the fair fluid case) unless `initial_flows` asks
/// for a binomial draw over a finite flow count. Loads are constant within
/// intervals; at each boundary the cheaper path gains
/// `kappa * rho_max * f_dear`, contracting the imbalance by `1 - kappa`.
pub fn simulate_floss(
    sys: &ParallelPathSystem,
    cfg: &FlossConfig,
    horizon: f64,
    seed: u64,
) -> Result<FlossRun, FlossError> {
    cfg.validate(sys)?;

    let mut f_alpha = match cfg.initial_flows {
        Some(n) => {
            // Each flow commits to a uniformly random path.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let heads: u64 = (0..n).filter(|_| rng.gen_bool(0.5)).count() as u64;
            heads as f64 / n as f64
        }
        None => sys.a0,
    };

    let n_intervals = (horizon / cfg.interval).ceil() as usize;
    let mut intervals = Vec::with_capacity(n_intervals);
    let mut suspension_time = None;
    let mut rho_applied = 0.0;

    for index in 0..n_intervals {
        let start = index as f64 * cfg.interval;
        if suspension_time.is_none() {
            if index > 0 {
                // Migration at the boundary: the cheaper path admits up to
                // kappa * rho_max of the dear path's flows.
                let (cheap, dear) = cheaper_dearer(f_alpha);
                let (f_cheap, f_dear) = (cheap.load(f_alpha), dear.load(f_alpha));
                let rho = cfg.kappa * max_allowance(f_cheap, f_dear)?;
                rho_applied = rho;
                let migrating = rho * f_dear;
                f_alpha = match cheap {
                    Path::Alpha => f_alpha + migrating,
                    Path::Beta => f_alpha - migrating,
                };
            }
            let delta = (2.0 * f_alpha - 1.0).abs();
            if delta < cfg.delta_stop {
                // Costs stay balanced for a full delay; everyone then
                // perceives the equilibrium and enforcement can stop.
                suspension_time = Some(start + sys.t_stale);
            }
        }
        intervals.push(FlossInterval {
            index,
            start,
            f_alpha,
            delta: (2.0 * f_alpha - 1.0).abs(),
            rho_applied,
            registered_alpha: f_alpha,
        });
        if suspension_time.is_some() {
            // Load frozen for the rest of the horizon.
            break;
        }
    }

    let intervals_used = intervals.len();
    let trajectory = step_trajectory(&intervals, cfg.interval, horizon);
    Ok(FlossRun {
        trajectory,
        intervals,
        intervals_used,
        suspension_time,
    })
}

fn cheaper_dearer(f_alpha: f64) -> (Path, Path) {
    if f_alpha <= 0.5 {
        (Path::Alpha, Path::Beta)
    } else {
        (Path::Beta, Path::Alpha)
    }
}

/// Samples the piecewise-constant interval loads onto a uniform grid with
/// boundaries aligned to interval starts.
fn step_trajectory(intervals: &[FlossInterval], interval_len: f64, horizon: f64) -> Trajectory {
    let per_interval = 64usize;
    let step = interval_len / per_interval as f64;
    let n = (horizon / step).ceil() as usize;
    let loads: Vec<f64> = (0..=n)
        .map(|i| {
            let idx = (i / per_interval).min(intervals.len() - 1);
            intervals[idx].f_alpha
        })
        .collect();
    let mut traj = Trajectory::from_samples(0.0, step, loads, SampleKind::Step);
    traj.set_history(intervals[0].f_alpha);
    traj
}

/// The FLOSS-compliant path-selection strategy: register fairly at the
/// initial interval; afterwards switch exactly when entitled to the path
/// perceived as cheaper.
pub fn floss_strategy(
    entitled: Arc<dyn Fn(Path, f64) -> bool + Send + Sync>,
    t_start: f64,
    reeval_period: f64,
) -> Strategy {
    let switch = move |pi: Path, t: f64, stale_alpha: f64| -> f64 {
        if t == t_start {
            return 0.5;
        }
        let perceived_cheaper = match pi {
            Path::Alpha => stale_alpha < 0.5,
            Path::Beta => stale_alpha > 0.5,
        };
        if t > t_start && perceived_cheaper && entitled(pi, t) {
            1.0
        } else {
            0.0
        }
    };
    let u: SelectionFn = Arc::new(move |pi, t, current, stale_alpha| {
        if pi == current {
            1.0 - switch(pi.other(), t, stale_alpha)
        } else {
            switch(pi, t, stale_alpha)
        }
    });
    Strategy::custom("floss", reeval_period, u)
}

/// Verifies interval by interval that the compliant choice is cost-minimal.
///
/// At every boundary, for an end-host on the cheaper path, staying (cost
/// `c_pi + c_a`) must beat switching whether entitled (`c_dear + c_a`) or
/// not (`c_dear + c_p`); for an end-host on the dear path, switching when
/// entitled (`c_cheap + c_a`) must beat staying (`c_dear + c_a`), and
/// staying must beat an unentitled switch (`c_cheap + c_p`).
pub fn floss_incentive_check(
    sys: &ParallelPathSystem,
    cfg: &FlossConfig,
    run: &FlossRun,
) -> Result<CostReport, FlossError> {
    cfg.validate(sys)?;
    let mech = MechanismCost {
        c_attempt: cfg.c_attempt,
        c_penalty: cfg.c_penalty,
    };
    let tol = 1e-9;

    let mut compliant_total = 0.0;
    let mut weight = 0.0;
    for iv in &run.intervals {
        let (cheap, _) = cheaper_dearer(iv.f_alpha);
        let c_cheap = cost_of(cheap.load(iv.f_alpha), sys.p);
        let c_dear = cost_of(cheap.other().load(iv.f_alpha), sys.p);

        if iv.index > 0 {
            // Case 1: occupant of the cheaper path.
            let stay = c_cheap + mech.optimized(true);
            let switch_entitled = c_dear + mech.optimized(true);
            let switch_unentitled = c_dear + mech.optimized(false);
            if stay > switch_entitled + tol || stay > switch_unentitled + tol {
                return Ok(deviation_report(
                    iv.index,
                    "cheap-path occupant",
                    stay,
                    switch_entitled.min(switch_unentitled),
                ));
            }

            // Case 2: occupant of the dear path.
            let stay = c_dear + mech.optimized(true);
            let switch_entitled = c_cheap + mech.optimized(true);
            let switch_unentitled = c_cheap + mech.optimized(false);
            if switch_entitled > stay + tol {
                return Ok(deviation_report(
                    iv.index,
                    "dear-path occupant, entitled",
                    switch_entitled,
                    stay,
                ));
            }
            if stay > switch_unentitled + tol {
                return Ok(deviation_report(
                    iv.index,
                    "dear-path occupant, not entitled",
                    stay,
                    switch_unentitled,
                ));
            }
        }

        // Population-average compliant cost over the interval.
        let f_cheap = cheap.load(iv.f_alpha);
        compliant_total +=
            (f_cheap * c_cheap + (1.0 - f_cheap) * c_dear + mech.optimized(true)) * cfg.interval;
        weight += cfg.interval;
    }

    Ok(CostReport {
        costs: vec![StrategyCost {
            strategy: "floss-compliant".into(),
            cost: compliant_total / weight,
        }],
        verdict: Verdict::Equilibrium,
    })
}

fn deviation_report(interval: usize, case: &str, compliant: f64, better: f64) -> CostReport {
    CostReport {
        costs: vec![
            StrategyCost {
                strategy: format!("interval {interval}: compliant ({case})"),
                cost: compliant,
            },
            StrategyCost {
                strategy: format!("interval {interval}: deviation ({case})"),
                cost: better,
            },
        ],
        verdict: Verdict::Deviation {
            strategy: format!("interval {interval}, {case}"),
            gain: compliant - better,
        },
    }
}

/// Stable load split when the two effective egress groups pass different
/// numbers of enforcement points (`n_high >= n_low` registrations), so that
/// registration costs shift the equilibrium away from equal load:
/// solves `x^p + n_high c_a = (1 - x)^p + n_low c_a` for the
/// high-multiplicity group's load by bisection to 1e-10.
pub fn unequal_load_equilibrium(
    n: (u32, u32),
    p: f64,
    c_attempt: f64,
) -> Result<(f64, f64), FlossError> {
    let (n_high, n_low) = n;
    assert!(n_high >= n_low, "group multiplicities must be ordered");
    let bias = f64::from(n_high - n_low) * c_attempt;
    let g = |x: f64| cost_of(x, p) + bias - cost_of(1.0 - x, p);
    if g(0.0) > 0.0 {
        return Err(FlossError::NoRoot { c_attempt });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok((x, 1.0 - x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sys_injected(a0: f64) -> ParallelPathSystem {
        ParallelPathSystem::universal(1.0, 1.0, 2.0, a0, "floss").unwrap()
    }

    #[test]
    fn max_allowance_examples() {
        assert_relative_eq!(max_allowance(0.3, 0.7).unwrap(), 2.0 / 7.0, epsilon = 1e-12);
        assert_relative_eq!(max_allowance(0.5, 0.5).unwrap(), 0.0);
        assert_relative_eq!(max_allowance(0.0, 1.0).unwrap(), 0.5);
        assert!(max_allowance(0.7, 0.3).is_err());
        assert!(max_allowance(0.2, 0.7).is_err());
    }

    #[test]
    fn full_allowance_equalizes_in_one_migration() {
        // rho_max moves exactly half the surplus: loads equalize.
        let f_dear: f64 = 1.0;
        let rho = max_allowance(0.0, f_dear).unwrap();
        let moved = rho * f_dear;
        assert_relative_eq!(f_dear - moved, 0.5);
        assert_relative_eq!(0.0 + moved, 0.5);
    }

    #[test]
    fn mechanism_cost_follows_the_optimal_application_choice() {
        let mech = MechanismCost {
            c_attempt: 0.01,
            c_penalty: PENALTY_SENTINEL,
        };
        assert_eq!(mech.optimized(true), 0.01);
        assert_eq!(mech.optimized(false), PENALTY_SENTINEL);
        // The optimum over A_e of the raw cost matches.
        let best_entitled = mech.raw(true, true).min(mech.raw(false, false));
        assert_eq!(best_entitled, mech.optimized(true));
        let best_unentitled = mech.raw(true, false).min(mech.raw(false, false));
        assert_eq!(best_unentitled, mech.optimized(false));
    }

    #[test]
    fn registration_state_keeps_one_assignment_per_flow() {
        let mut reg = RegistrationState::new();
        reg.register(7, Path::Alpha, false);
        reg.register(7, Path::Beta, true);
        assert_eq!(reg.len(), 1);
        assert!(reg.is_registered(7, Path::Beta));
        assert!(!reg.is_registered(7, Path::Alpha));
        assert_eq!(reg.count_on(Path::Beta), 1);
    }

    #[test]
    fn config_rejects_short_intervals() {
        let sys = sys_injected(1.0);
        let cfg = FlossConfig::new(1.5, 0.01, 0.5, 1e-3);
        assert!(matches!(
            simulate_floss(&sys, &cfg, 20.0, 1),
            Err(FlossError::IntervalTooShort { .. })
        ));
    }

    #[test]
    fn full_imbalance_with_full_allowance_balances_in_one_interval() {
        let sys = sys_injected(1.0);
        let cfg = FlossConfig::new(3.0, 0.01, 1.0, 1e-3);
        let run = simulate_floss(&sys, &cfg, 40.0, 1).unwrap();
        assert_relative_eq!(run.intervals[0].f_alpha, 1.0);
        assert_relative_eq!(run.intervals[1].f_alpha, 0.5);
        assert!(run.suspension_time.is_some());
        assert_relative_eq!(run.suspension_time.unwrap(), 3.0 + 2.0);
    }

    #[test]
    fn half_allowance_halves_the_imbalance_each_interval() {
        let mut sys = sys_injected(0.6);
        sys.a0 = 0.6;
        let cfg = FlossConfig::new(3.0, 0.01, 0.5, 1e-3);
        let run = simulate_floss(&sys, &cfg, 100.0, 1).unwrap();
        let expected = [0.2, 0.1, 0.05, 0.025];
        for (iv, want) in run.intervals.iter().zip(expected) {
            assert_relative_eq!(iv.delta, want, epsilon = 1e-12);
        }
        // Nonincreasing throughout.
        for pair in run.intervals.windows(2) {
            assert!(pair[1].delta <= pair[0].delta + 1e-15);
        }
    }

    #[test]
    fn fair_fluid_split_needs_no_migration() {
        let sys = sys_injected(0.5);
        let cfg = FlossConfig::new(3.0, 0.01, 0.5, 1e-3);
        let run = simulate_floss(&sys, &cfg, 40.0, 1).unwrap();
        assert_eq!(run.intervals.len(), 1);
        assert_relative_eq!(run.intervals[0].delta, 0.0);
        assert!(run.suspension_time.is_some());
        for (_, f) in run.trajectory.samples() {
            assert_eq!(f, 0.5);
        }
    }

    #[test]
    fn stochastic_registration_draw_is_seeded_and_near_fair() {
        let sys = sys_injected(1.0);
        let mut cfg = FlossConfig::new(3.0, 0.01, 0.5, 1e-3);
        cfg.initial_flows = Some(10_000);
        let a = simulate_floss(&sys, &cfg, 60.0, 7).unwrap();
        let b = simulate_floss(&sys, &cfg, 60.0, 7).unwrap();
        assert_eq!(a.intervals[0].f_alpha, b.intervals[0].f_alpha);
        // Binomial split: within a few standard deviations of fair.
        assert!((a.intervals[0].f_alpha - 0.5).abs() < 0.03);
    }

    #[test]
    fn floss_strategy_selection_probabilities() {
        let entitled_all: Arc<dyn Fn(Path, f64) -> bool + Send + Sync> = Arc::new(|_, _| true);
        let s = floss_strategy(entitled_all.clone(), 0.0, 1.0);
        let u = match &s.kind {
            crate::strategy::StrategyKind::Custom { u } => u.clone(),
            _ => unreachable!(),
        };
        // Initial interval: fair coin.
        assert_eq!(u(Path::Alpha, 0.0, Path::Beta, 0.8), 0.5);
        // Entitled and perceived cheaper: switch.
        assert_eq!(u(Path::Alpha, 5.0, Path::Beta, 0.3), 1.0);
        // Perceived dearer: stay put.
        assert_eq!(u(Path::Alpha, 5.0, Path::Beta, 0.8), 0.0);
        assert_eq!(u(Path::Beta, 5.0, Path::Beta, 0.8), 1.0);
        // Not entitled: never switch, regardless of costs.
        let entitled_none: Arc<dyn Fn(Path, f64) -> bool + Send + Sync> = Arc::new(|_, _| false);
        let s = floss_strategy(entitled_none, 0.0, 1.0);
        let u = match &s.kind {
            crate::strategy::StrategyKind::Custom { u } => u.clone(),
            _ => unreachable!(),
        };
        assert_eq!(u(Path::Alpha, 5.0, Path::Beta, 0.3), 0.0);
    }

    #[test]
    fn incentive_check_passes_on_the_reference_run() {
        let sys = sys_injected(1.0);
        let cfg = FlossConfig::new(3.0, 0.01, 0.5, 1e-3);
        let run = simulate_floss(&sys, &cfg, 80.0, 1).unwrap();
        let report = floss_incentive_check(&sys, &cfg, &run).unwrap();
        assert_eq!(report.verdict, Verdict::Equilibrium);
    }

    #[test]
    fn unequal_load_reference_roots() {
        let (x, y) = unequal_load_equilibrium((2, 1), 1.0, 0.01).unwrap();
        assert_relative_eq!(x, 0.495, epsilon = 1e-9);
        assert_relative_eq!(x + y, 1.0, epsilon = 1e-12);
        // Zero cost: no asymmetry.
        let (x, _) = unequal_load_equilibrium((2, 1), 1.0, 0.0).unwrap();
        assert_relative_eq!(x, 0.5, epsilon = 1e-9);
        // Quadratic costs: x^2 + 2 c_a = (1-x)^2 + c_a reduces to
        // 2x - 1 = -c_a, the same root as the linear case.
        let (x, _) = unequal_load_equilibrium((2, 1), 2.0, 0.01).unwrap();
        assert_relative_eq!(x, 0.495, epsilon = 1e-9);
    }

    #[test]
    fn unequal_load_rejects_oversized_costs() {
        assert!(matches!(
            unequal_load_equilibrium((2, 1), 1.0, 1.5),
            Err(FlossError::NoRoot { .. })
        ));
    }
}
