//! Discrete-event simulation of `N` selfish flows with stale observations.
//!
//! Each flow re-evaluates its path at exponentially spaced clock ticks
//! (mean period `1/r`), observing the *aggregate* load as it was one
//! staleness delay ago, and applies its strategy's selection rule. The
//! empirical load `f_alpha(t) = (flows on alpha) / N` converges to the fluid
//! model as `N` grows (errors shrink like `1/sqrt(N)`), which is the
//! cross-check for every closed form in this crate.
//!
//! The simulator also carries the router-side enforcement plumbing: interval
//! registrations with hash-threshold admission (FLOSS), balancing trials
//! with backup registrations (CROSS), Bloom-filter registries for new-flow
//! handling, and sub-sampled registration checks.
//!
//! Runs are strictly sequential and fully determined by their seed; event
//! ties break in insertion order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::bloom::BloomFilter;
use crate::cross::{choose_difficulty, expected_hash_utility, BackupRegistration};
use crate::hashing::{admission_hash, flow_id, mix64};
use crate::system::{cost_of, ParallelPathSystem, Path};
use crate::trajectory::{SampleKind, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("population must hold at least 100 flows, got {0}")]
    TooFewFlows(usize),
    #[error("profile shares must sum to 1, got {0}")]
    BadProfile(f64),
    #[error("bad parameter: {0}")]
    BadParameter(String),
}

/// Per-flow path-selection behavior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgentStrategy {
    Greedy,
    Antagonist,
    Convergent { mu: f64 },
}

/// One selfish flow.
#[derive(Debug, Clone)]
pub struct Flow {
    /// Identifier derived from immutable endpoint attributes.
    pub id: u64,
    pub path: Path,
    pub next_reeval: f64,
    pub strategy: AgentStrategy,
    pub registered: Option<Path>,
    pub backup: Option<BackupRegistration>,
    /// Private valuation of a backup registration.
    pub omega: f64,
    /// Accumulated mechanism-imposed cost.
    pub mechanism_cost: f64,
    pub alive: bool,
}

/// Router-side enforcement applied to the population.
#[derive(Debug, Clone)]
pub enum Mechanism {
    None,
    Floss(FlossAgentConfig),
    Cross(CrossAgentConfig),
}

#[derive(Debug, Clone)]
pub struct FlossAgentConfig {
    pub interval: f64,
    pub kappa: f64,
    pub delta_stop: f64,
    pub c_attempt: f64,
    /// Flow churn per interval, as fractions of the initial population.
    pub churn: Option<ChurnConfig>,
    pub bloom_bits: u64,
    pub bloom_hashes: u32,
}

impl FlossAgentConfig {
    pub fn new(interval: f64, kappa: f64, delta_stop: f64) -> Self {
        FlossAgentConfig {
            interval,
            kappa,
            delta_stop,
            c_attempt: 0.01,
            churn: None,
            bloom_bits: 1 << 20,
            bloom_hashes: 7,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ChurnConfig {
    /// New flows per interval, as a fraction of the initial population.
    pub birth_rate: f64,
    /// Departures per interval, as a fraction of the initial population.
    pub death_rate: f64,
}

#[derive(Debug, Clone)]
pub struct CrossAgentConfig {
    pub trial: f64,
    pub epsilon: f64,
    pub c_attempt: f64,
    pub c_hash: f64,
    /// Fraction of flows whose backup valuation exceeds the gain bound.
    pub insured_share: f64,
    pub failures: Vec<(Path, f64)>,
}

impl CrossAgentConfig {
    pub fn new(trial: f64, epsilon: f64) -> Self {
        CrossAgentConfig {
            trial,
            epsilon,
            c_attempt: 0.01,
            c_hash: 1e-3,
            insured_share: 0.0,
            failures: Vec::new(),
        }
    }
}

/// Simulation parameters for one run.
#[derive(Debug, Clone)]
pub struct AgentSimConfig {
    pub n: usize,
    /// Strategy profile as `(strategy, share)` pairs; shares sum to 1.
    pub profile: Vec<(AgentStrategy, f64)>,
    pub mechanism: Mechanism,
    pub horizon: f64,
    pub sample_step: f64,
    /// Log every re-evaluation (verbose) instead of only path changes.
    pub log_reevals: bool,
}

impl AgentSimConfig {
    pub fn universal(n: usize, strategy: AgentStrategy, horizon: f64) -> Self {
        AgentSimConfig {
            n,
            profile: vec![(strategy, 1.0)],
            mechanism: Mechanism::None,
            horizon,
            sample_step: 0.01,
            log_reevals: false,
        }
    }
}

/// Newline-delimited event log: `time,event_kind,flow_id,detail`.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    lines: Vec<String>,
}

impl EventLog {
    fn push(&mut self, time: f64, kind: &str, flow: u64, detail: &str) {
        let mut line = String::new();
        let _ = write!(line, "{time},{kind},{flow},{detail}");
        self.lines.push(line);
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn to_text(&self) -> String {
        self.lines.join("\n")
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct RunStats {
    pub reevals: u64,
    pub switches: u64,
    pub vetoed_switches: u64,
    pub boundaries: u64,
    pub births: u64,
    pub deaths: u64,
    pub denied_registrations: u64,
}

#[derive(Debug)]
pub struct AgentRun {
    pub trajectory: Trajectory,
    pub log: EventLog,
    pub stats: RunStats,
    pub final_flows: Vec<Flow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Reevaluate(usize),
    Boundary(u64),
    Failure(Path),
    Failover,
}

struct HeapEvent {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for HeapEvent {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for HeapEvent {}
impl PartialOrd for HeapEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEvent {
    // Reversed: BinaryHeap is a max-heap, we pop the earliest event; ties in
    // insertion order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Piecewise-constant aggregate load history with exact stale lookups.
struct LoadHistory {
    steps: Vec<(f64, f64)>,
}

impl LoadHistory {
    fn new(initial: f64) -> Self {
        LoadHistory {
            steps: vec![(0.0, initial)],
        }
    }

    fn record(&mut self, t: f64, f_alpha: f64) {
        self.steps.push((t, f_alpha));
    }

    fn at(&self, t: f64) -> f64 {
        if t <= self.steps[0].0 {
            return self.steps[0].1;
        }
        let idx = self.steps.partition_point(|&(time, _)| time <= t);
        self.steps[idx - 1].1
    }
}

/// Deterministic hash-threshold admission: grant iff `h(t_i | f) < rho`.
/// End-hosts can evaluate this locally, so routers never see doomed
/// applications.
pub fn selective_admission(flow: u64, interval_start: f64, rho: f64) -> bool {
    debug_assert!((0.0..=1.0).contains(&rho));
    admission_hash(interval_start, flow) < rho
}

/// Migration allowance after router-side discounts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allowance {
    pub rho: f64,
    /// The discounts consumed the whole allowance.
    pub exhausted: bool,
}

/// Discounts the target allowance by the Bloom false-positive rate (lucky
/// unregistered flows) and the flow birth rate (new flows flocking to the
/// cheap path), so total migration stays near the target.
pub fn effective_allowance(rho_target: f64, bloom_fp_rate: f64, birth_rate: f64) -> Allowance {
    debug_assert!((0.0..=1.0).contains(&rho_target));
    debug_assert!((0.0..1.0).contains(&bloom_fp_rate));
    debug_assert!(birth_rate >= 0.0);
    let rho = rho_target - bloom_fp_rate - birth_rate;
    if rho <= 0.0 {
        Allowance {
            rho: 0.0,
            exhausted: true,
        }
    } else {
        Allowance {
            rho,
            exhausted: false,
        }
    }
}

/// Outcome of sub-sampled registration checks on one flow's packets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub delivered_fraction: f64,
    /// At least one drop landed in a 100-packet congestion window, enough
    /// to stall a congestion-controlled transfer.
    pub disrupted: bool,
}

/// Checks each packet independently with probability `check_rate`, dropping
/// checked packets of unregistered flows. Registered flows pass untouched.
pub fn subsample_enforcement(
    check_rate: f64,
    packets: u64,
    registered: bool,
    rng: &mut impl Rng,
) -> Delivery {
    assert!(check_rate > 0.0 && check_rate <= 1.0);
    if registered || packets == 0 {
        return Delivery {
            delivered_fraction: 1.0,
            disrupted: false,
        };
    }
    let mut delivered = 0u64;
    let mut disrupted = false;
    let mut window_drops = 0u64;
    for i in 0..packets {
        if i % 100 == 0 {
            window_drops = 0;
        }
        if rng.gen_bool(check_rate) {
            window_drops += 1;
            if window_drops >= 1 {
                disrupted = true;
            }
        } else {
            delivered += 1;
        }
    }
    Delivery {
        delivered_fraction: delivered as f64 / packets as f64,
        disrupted,
    }
}

/// Per-path registries of previously-active flows.
pub struct PathRegistries {
    pub alpha: BloomFilter,
    pub beta: BloomFilter,
}

impl PathRegistries {
    pub fn new(bits: u64, hashes: u32) -> Self {
        PathRegistries {
            alpha: BloomFilter::new(bits, hashes),
            beta: BloomFilter::new(bits, hashes),
        }
    }

    pub fn filter(&self, path: Path) -> &BloomFilter {
        match path {
            Path::Alpha => &self.alpha,
            Path::Beta => &self.beta,
        }
    }

    pub fn record_active(&mut self, id: u64, path: Path) {
        match path {
            Path::Alpha => self.alpha.insert(id),
            Path::Beta => self.beta.insert(id),
        }
    }

    /// A lookup hit means "previously active here": true hits expose flows
    /// pretending to be new; false positives wrongly deny truly new flows.
    pub fn previously_active(&self, id: u64, path: Path) -> bool {
        self.filter(path).contains(id)
    }
}

/// Result of applying one interval's churn.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct ChurnReport {
    pub births: usize,
    pub deaths: usize,
    /// Truly new flows denied at their first-choice path by a Bloom false
    /// positive (they registered at the other path instead).
    pub denied_first_choice: usize,
    /// Denied at both paths (needs a false positive at both registries,
    /// probability ~beta^2; such flows retry next interval).
    pub denied_everywhere: usize,
}

/// Applies births and deaths for one enforcement interval.
///
/// New flows register mid-interval after the previously-active lookup fails;
/// they flock to the perceived-cheaper path unless a false positive denies
/// them there. Departing flows simply leave.
#[allow(clippy::too_many_arguments)]
pub fn flow_churn(
    flows: &mut Vec<Flow>,
    registries: &PathRegistries,
    birth_rate: f64,
    death_rate: f64,
    n_baseline: usize,
    cheaper: Path,
    reeval_rate: f64,
    attempt_cost: f64,
    now: f64,
    rng: &mut ChaCha8Rng,
    log: &mut EventLog,
) -> ChurnReport {
    assert!(birth_rate >= 0.0 && death_rate >= 0.0);
    let mut report = ChurnReport::default();

    let deaths = (death_rate * n_baseline as f64).round() as usize;
    let mut alive: Vec<usize> = (0..flows.len()).filter(|&i| flows[i].alive).collect();
    for _ in 0..deaths.min(alive.len()) {
        let pick = rng.gen_range(0..alive.len());
        let idx = alive.swap_remove(pick);
        flows[idx].alive = false;
        report.deaths += 1;
        log.push(now, "death", flows[idx].id, "");
    }

    let births = (birth_rate * n_baseline as f64).round() as usize;
    let exp = Exp::new(reeval_rate).expect("positive rate");
    for _ in 0..births {
        let id = flow_id(rng.gen(), rng.gen());
        let (first, second) = (cheaper, cheaper.other());
        let path = if !registries.previously_active(id, first) {
            Some(first)
        } else if !registries.previously_active(id, second) {
            report.denied_first_choice += 1;
            Some(second)
        } else {
            report.denied_everywhere += 1;
            None
        };
        let Some(path) = path else {
            log.push(now, "birth_denied", id, "false positive at both paths");
            continue;
        };
        if path != first {
            log.push(now, "birth_redirected", id, &format!("registered {path}"));
        } else {
            log.push(now, "birth", id, &format!("registered {path}"));
        }
        flows.push(Flow {
            id,
            path,
            next_reeval: now + exp.sample(rng),
            strategy: AgentStrategy::Greedy,
            registered: Some(path),
            backup: None,
            omega: 0.0,
            // The mid-interval registration attempt is charged as usual.
            mechanism_cost: attempt_cost,
            alive: true,
        });
        report.births += 1;
    }
    report
}

/// Runs the discrete-event simulation.
pub fn run_agents(
    sys: &ParallelPathSystem,
    cfg: &AgentSimConfig,
    seed: u64,
) -> Result<AgentRun, AgentError> {
    if cfg.n < 100 {
        return Err(AgentError::TooFewFlows(cfg.n));
    }
    let share_sum: f64 = cfg.profile.iter().map(|&(_, s)| s).sum();
    if (share_sum - 1.0).abs() > 1e-9 {
        return Err(AgentError::BadProfile(share_sum));
    }
    if !(cfg.sample_step > 0.0) || !(cfg.horizon > 0.0) {
        return Err(AgentError::BadParameter(
            "horizon and sample step must be positive".into(),
        ));
    }
    match &cfg.mechanism {
        Mechanism::Floss(f) => {
            if f.interval <= sys.t_stale {
                return Err(AgentError::BadParameter(format!(
                    "enforcement interval {} must exceed the staleness delay {}",
                    f.interval, sys.t_stale
                )));
            }
            if !(f.kappa > 0.0 && f.kappa <= 1.0) || !(f.delta_stop > 0.0) {
                return Err(AgentError::BadParameter(
                    "allowance fraction must lie in (0, 1] and the stop threshold                      must be positive"
                        .into(),
                ));
            }
        }
        Mechanism::Cross(c) => {
            if c.trial <= sys.t_stale || !(c.epsilon > 0.0) {
                return Err(AgentError::BadParameter(
                    "trial length must exceed the staleness delay and epsilon                      must be positive"
                        .into(),
                ));
            }
            if !(0.0..=1.0).contains(&c.insured_share) {
                return Err(AgentError::BadParameter(format!(
                    "insured share must lie in [0, 1], got {}",
                    c.insured_share
                )));
            }
        }
        Mechanism::None => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flows = build_population(sys, cfg, &mut rng);
    let n0 = flows.len();
    let mut count_alpha = flows.iter().filter(|f| f.path == Path::Alpha).count();
    let mut n_alive = n0;
    let mut history = LoadHistory::new(count_alpha as f64 / n_alive as f64);
    let mut log = EventLog::default();
    let mut stats = RunStats::default();

    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    let push = |queue: &mut BinaryHeap<HeapEvent>, seq: &mut u64, time: f64, kind: EventKind| {
        *seq += 1;
        queue.push(HeapEvent {
            time,
            seq: *seq,
            kind,
        });
    };

    let exp = Exp::new(sys.r).expect("positive rate");
    for (idx, flow) in flows.iter_mut().enumerate() {
        flow.next_reeval = exp.sample(&mut rng);
        push(
            &mut queue,
            &mut seq,
            flow.next_reeval,
            EventKind::Reevaluate(idx),
        );
    }

    // Mechanism scaffolding.
    let mut registries = match &cfg.mechanism {
        Mechanism::Floss(f) => Some(PathRegistries::new(f.bloom_bits, f.bloom_hashes)),
        _ => None,
    };
    let mut suspend_at: Option<f64> = None;
    let mut failed_path: Option<Path> = None;
    let indifference = match &cfg.mechanism {
        Mechanism::Floss(f) => f.delta_stop,
        Mechanism::Cross(c) => c.epsilon,
        Mechanism::None => 0.0,
    };
    match &cfg.mechanism {
        Mechanism::Floss(f) => {
            let mut k = 1u64;
            while (k as f64) * f.interval <= cfg.horizon {
                push(
                    &mut queue,
                    &mut seq,
                    k as f64 * f.interval,
                    EventKind::Boundary(k),
                );
                k += 1;
            }
            if let Some(reg) = registries.as_mut() {
                for flow in &flows {
                    reg.record_active(flow.id, flow.path);
                }
            }
            // Registration for the initial interval is the initial path.
            for flow in &mut flows {
                flow.registered = Some(flow.path);
                flow.mechanism_cost += f.c_attempt;
            }
        }
        Mechanism::Cross(c) => {
            let mut k = 1u64;
            while (k as f64) * c.trial <= cfg.horizon {
                push(
                    &mut queue,
                    &mut seq,
                    k as f64 * c.trial,
                    EventKind::Boundary(k),
                );
                k += 1;
            }
            for &(path, at) in &c.failures {
                if at <= cfg.horizon {
                    push(&mut queue, &mut seq, at, EventKind::Failure(path));
                }
            }
            // Trial 0: fair re-registration at t = 0.
            let difficulty = choose_difficulty(c.trial, sys.t_stale, c.c_hash)
                .map_err(|e| AgentError::BadParameter(e.to_string()))?;
            cross_reregister(&mut flows, c, difficulty, sys.t_stale, &mut rng);
            count_alpha = flows
                .iter()
                .filter(|f| f.alive && f.path == Path::Alpha)
                .count();
            history.record(0.0, count_alpha as f64 / n_alive as f64);
        }
        Mechanism::None => {}
    }

    while let Some(event) = queue.pop() {
        if event.time > cfg.horizon {
            break;
        }
        let t = event.time;
        match event.kind {
            EventKind::Reevaluate(idx) => {
                let flow = &flows[idx];
                if !flow.alive {
                    continue;
                }
                let suspended = suspend_at.is_some_and(|s| t >= s);
                stats.reevals += 1;
                let stale = if t - sys.t_stale <= 0.0 {
                    history.at(0.0)
                } else {
                    history.at(t - sys.t_stale)
                };
                let target = select_path(flow, sys, stale, indifference, &mut rng);
                let mut moved = false;
                if let Some(target) = target {
                    if target != flow.path {
                        let permitted = match &cfg.mechanism {
                            Mechanism::None => true,
                            // Registrations bind for the rest of the
                            // interval; migration happens at boundaries.
                            Mechanism::Floss(_) if suspended => true,
                            Mechanism::Floss(_) => false,
                            // Backups are for failures only; a failed
                            // current path with a backup switches at once.
                            Mechanism::Cross(_) => {
                                failed_path == Some(flow.path)
                                    && flows[idx]
                                        .backup
                                        .map(|b| b.path == target && !b.consumed)
                                        .unwrap_or(false)
                            }
                        };
                        if permitted {
                            moved = true;
                        } else {
                            stats.vetoed_switches += 1;
                            if cfg.log_reevals {
                                log.push(t, "veto", flow.id, &format!("wanted {target}"));
                            }
                        }
                    }
                }
                if moved {
                    let id = flows[idx].id;
                    let current = flows[idx].path;
                    let target = current.other();
                    if let Some(b) = flows[idx].backup.as_mut() {
                        if failed_path == Some(current) && b.path == target {
                            b.consume();
                        }
                    }
                    switch_flow(&mut flows[idx], target);
                    count_alpha = match target {
                        Path::Alpha => count_alpha + 1,
                        Path::Beta => count_alpha - 1,
                    };
                    history.record(t, count_alpha as f64 / n_alive as f64);
                    stats.switches += 1;
                    log.push(t, "switch", id, &format!("to {target}"));
                } else if cfg.log_reevals {
                    log.push(t, "stay", flows[idx].id, "");
                }
                let next = t + exp.sample(&mut rng);
                flows[idx].next_reeval = next;
                if next <= cfg.horizon {
                    push(&mut queue, &mut seq, next, EventKind::Reevaluate(idx));
                }
            }
            EventKind::Boundary(k) => {
                if suspend_at.is_some() || failed_path.is_some() {
                    continue;
                }
                stats.boundaries += 1;
                match &cfg.mechanism {
                    Mechanism::Floss(f) => {
                        let report = floss_boundary(
                            &mut flows,
                            f,
                            sys,
                            t,
                            n0,
                            registries.as_mut().expect("floss registries"),
                            &mut rng,
                            &mut log,
                            &mut stats,
                        );
                        count_alpha = flows
                            .iter()
                            .filter(|fl| fl.alive && fl.path == Path::Alpha)
                            .count();
                        n_alive = flows.iter().filter(|fl| fl.alive).count();
                        history.record(t, count_alpha as f64 / n_alive as f64);
                        let delta = (2.0 * count_alpha as f64 / n_alive as f64 - 1.0).abs();
                        log.push(
                            t,
                            "boundary",
                            k,
                            &format!("delta={delta},migrated={}", report.migrated),
                        );
                        if delta < f.delta_stop {
                            // Enforcement holds for one more staleness delay
                            // so every stale observation shows the balanced
                            // interval before agents are released.
                            suspend_at = Some(t + sys.t_stale);
                            log.push(t, "suspend_pending", 0, "imbalance below threshold");
                        }
                    }
                    Mechanism::Cross(c) => {
                        let difficulty = choose_difficulty(c.trial, sys.t_stale, c.c_hash)
                            .expect("validated at setup");
                        cross_reregister(&mut flows, c, difficulty, sys.t_stale, &mut rng);
                        count_alpha = flows
                            .iter()
                            .filter(|fl| fl.alive && fl.path == Path::Alpha)
                            .count();
                        history.record(t, count_alpha as f64 / n_alive as f64);
                        let delta = (2.0 * count_alpha as f64 / n_alive as f64 - 1.0).abs();
                        log.push(t, "trial", k, &format!("delta={delta}"));
                        if delta < c.epsilon {
                            suspend_at = Some(t + sys.t_stale);
                            log.push(t, "suspend_pending", 0, "trial within epsilon");
                        }
                    }
                    Mechanism::None => {}
                }
            }
            EventKind::Failure(path) => {
                if failed_path.is_some() {
                    continue;
                }
                failed_path = Some(path);
                log.push(t, "failure", 0, &format!("{path}"));
                // Backup holders on the failed path switch immediately.
                for flow in flows.iter_mut().filter(|f| f.alive && f.path == path) {
                    if let Some(b) = flow.backup.as_mut() {
                        if b.path == path.other() && b.consume() {
                            flow.path = path.other();
                            stats.switches += 1;
                        }
                    }
                }
                count_alpha = flows
                    .iter()
                    .filter(|f| f.alive && f.path == Path::Alpha)
                    .count();
                history.record(t, count_alpha as f64 / n_alive as f64);
                // The rest re-register at the next boundary.
                if let Mechanism::Cross(c) = &cfg.mechanism {
                    let boundary = (t / c.trial).floor() * c.trial + c.trial;
                    push(&mut queue, &mut seq, boundary, EventKind::Failover);
                }
            }
            EventKind::Failover => {
                // Post-failure boundary: stragglers leave the failed path.
                if let Some(path) = failed_path {
                    for flow in flows.iter_mut().filter(|f| f.alive && f.path == path) {
                        flow.path = path.other();
                        flow.registered = Some(path.other());
                    }
                    count_alpha = flows
                        .iter()
                        .filter(|f| f.alive && f.path == Path::Alpha)
                        .count();
                    history.record(t, count_alpha as f64 / n_alive as f64);
                    log.push(t, "failover", 0, "remaining flows re-registered");
                }
            }
        }
    }

    let trajectory = sample_history(&history, sys.a0, cfg.horizon, cfg.sample_step);
    Ok(AgentRun {
        trajectory,
        log,
        stats,
        final_flows: flows,
    })
}

fn build_population(
    sys: &ParallelPathSystem,
    cfg: &AgentSimConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Flow> {
    let n = cfg.n;
    let mut flows = Vec::with_capacity(n);
    // Largest-remainder allocation of strategy counts.
    let mut counts: Vec<usize> = cfg
        .profile
        .iter()
        .map(|&(_, share)| (share * n as f64).floor() as usize)
        .collect();
    let mut assigned: usize = counts.iter().sum();
    let groups = counts.len();
    let mut i = 0;
    while assigned < n {
        counts[i % groups] += 1;
        assigned += 1;
        i += 1;
    }
    for (&(strategy, _), &count) in cfg.profile.iter().zip(&counts) {
        let on_alpha = (sys.a0 * count as f64).round() as usize;
        for j in 0..count {
            let path = if j < on_alpha {
                Path::Alpha
            } else {
                Path::Beta
            };
            flows.push(Flow {
                id: flow_id(rng.gen(), rng.gen()),
                path,
                next_reeval: 0.0,
                strategy,
                registered: None,
                backup: None,
                omega: 0.0,
                mechanism_cost: 0.0,
                alive: true,
            });
        }
    }
    // Shuffle so flow index carries no strategy/path information.
    for i in (1..flows.len()).rev() {
        let j = rng.gen_range(0..=i);
        flows.swap(i, j);
    }
    flows
}

/// Strategy decision at a re-evaluation; `None` means indifferent (stay).
fn select_path(
    flow: &Flow,
    sys: &ParallelPathSystem,
    stale_alpha: f64,
    indifference: f64,
    rng: &mut ChaCha8Rng,
) -> Option<Path> {
    let delta_stale = 2.0 * stale_alpha - 1.0;
    if delta_stale.abs() <= indifference {
        return None;
    }
    let cheaper = if stale_alpha < 0.5 {
        Path::Alpha
    } else {
        Path::Beta
    };
    match flow.strategy {
        AgentStrategy::Greedy => Some(cheaper),
        AgentStrategy::Antagonist => Some(cheaper.other()),
        AgentStrategy::Convergent { mu } => {
            if flow.path == cheaper {
                return None;
            }
            let dc = (cost_of(stale_alpha, sys.p) - cost_of(1.0 - stale_alpha, sys.p)).abs();
            if rng.gen_bool((mu * dc).clamp(0.0, 1.0)) {
                Some(cheaper)
            } else {
                None
            }
        }
    }
}

fn switch_flow(flow: &mut Flow, target: Path) {
    flow.path = target;
}

struct BoundaryReport {
    migrated: usize,
}

/// FLOSS interval boundary: loyal flows renew, dear-path flows migrate up to
/// the (discounted) allowance, churn applies, registries roll over.
#[allow(clippy::too_many_arguments)]
fn floss_boundary(
    flows: &mut Vec<Flow>,
    cfg: &FlossAgentConfig,
    sys: &ParallelPathSystem,
    now: f64,
    n_baseline: usize,
    registries: &mut PathRegistries,
    rng: &mut ChaCha8Rng,
    log: &mut EventLog,
    stats: &mut RunStats,
) -> BoundaryReport {
    let n_alive = flows.iter().filter(|f| f.alive).count();
    let on_alpha = flows
        .iter()
        .filter(|f| f.alive && f.path == Path::Alpha)
        .count();
    let f_alpha = on_alpha as f64 / n_alive as f64;
    let (cheap, dear) = if f_alpha <= 0.5 {
        (Path::Alpha, Path::Beta)
    } else {
        (Path::Beta, Path::Alpha)
    };
    let (f_cheap, f_dear) = (cheap.load(f_alpha), dear.load(f_alpha));

    let rho_max = if f_dear > 0.0 {
        (f_dear - f_cheap) / (2.0 * f_dear)
    } else {
        0.0
    };
    let (fp_rate, birth_rate) = match cfg.churn {
        Some(churn) => {
            let fp = registries.filter(cheap).analytic_fp_rate();
            (fp, churn.birth_rate)
        }
        None => (0.0, 0.0),
    };
    let allowance = effective_allowance(cfg.kappa * rho_max, fp_rate, birth_rate);
    if allowance.exhausted {
        log.push(
            now,
            "allowance_exhausted",
            0,
            "discounts consumed the allowance",
        );
    }

    // Renewal and selectively admitted migration.
    let mut migrated = 0usize;
    for flow in flows.iter_mut().filter(|f| f.alive) {
        flow.mechanism_cost += cfg.c_attempt;
        if flow.path == dear && selective_admission(flow.id, now, allowance.rho) {
            flow.path = cheap;
            flow.registered = Some(cheap);
            migrated += 1;
            stats.switches += 1;
        } else {
            flow.registered = Some(flow.path);
        }
    }

    // Churn, then roll the previously-active registries over to this
    // interval's population.
    if let Some(churn) = cfg.churn {
        let report = flow_churn(
            flows,
            registries,
            churn.birth_rate,
            churn.death_rate,
            n_baseline,
            cheap,
            sys.r,
            cfg.c_attempt,
            now,
            rng,
            log,
        );
        stats.births += report.births as u64;
        stats.deaths += report.deaths as u64;
        stats.denied_registrations += report.denied_first_choice as u64;
    }
    registries.alpha.clear();
    registries.beta.clear();
    for flow in flows.iter().filter(|f| f.alive) {
        registries.record_active(flow.id, flow.path);
    }
    BoundaryReport { migrated }
}

/// CROSS trial start: every flow re-registers on a fair coin; sufficiently
/// insured flows (valuation above the gain bound) solve a puzzle for a
/// backup on the other path.
fn cross_reregister(
    flows: &mut [Flow],
    cfg: &CrossAgentConfig,
    difficulty: f64,
    t_stale: f64,
    rng: &mut ChaCha8Rng,
) {
    let bound = cfg.trial - t_stale;
    for flow in flows.iter_mut().filter(|f| f.alive) {
        let path = if rng.gen_bool(0.5) {
            Path::Alpha
        } else {
            Path::Beta
        };
        flow.path = path;
        flow.registered = Some(path);
        flow.mechanism_cost += cfg.c_attempt;
        // Valuations are redrawn per trial: an `insured_share` of flows value
        // the insurance above the bound and solve puzzles.
        flow.omega = if rng.gen_bool(cfg.insured_share) {
            1.5 * bound
        } else {
            0.5 * bound
        };
        if expected_hash_utility(difficulty, flow.omega, cfg.c_hash) > 0.0 {
            flow.backup = Some(BackupRegistration::new(flow.id, path.other()));
            // Expected brute-force spend, charged in expectation.
            flow.mechanism_cost += difficulty.exp2() * cfg.c_hash + cfg.c_attempt;
        } else {
            flow.backup = None;
        }
    }
}

fn sample_history(history: &LoadHistory, a0: f64, horizon: f64, step: f64) -> Trajectory {
    let n = (horizon / step).ceil() as usize;
    let loads: Vec<f64> = (0..=n).map(|i| history.at(i as f64 * step)).collect();
    let mut traj = Trajectory::from_samples(0.0, step, loads, SampleKind::Step);
    traj.set_history(a0);
    traj
}

/// Derives a deterministic sub-seed for replica `k` of a master seed.
pub fn replica_seed(master: u64, k: u64) -> u64 {
    mix64(master ^ mix64(k.wrapping_add(0x5bd1_e995)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{greedy_closed_form, oscillation_params};
    use approx::assert_relative_eq;

    fn greedy_sys(r: f64, t_stale: f64, a0: f64) -> ParallelPathSystem {
        ParallelPathSystem::universal(r, 1.0, t_stale, a0, "greedy").unwrap()
    }

    #[test]
    fn selective_admission_extremes_and_fraction() {
        let granted = (0..100_000u64)
            .filter(|&i| selective_admission(mix64(i), 3.0, 0.25))
            .count();
        let fraction = granted as f64 / 100_000.0;
        // Three binomial standard errors around the threshold.
        assert!((fraction - 0.25).abs() < 0.0042, "fraction {fraction}");
        assert!((0..1000u64).all(|i| !selective_admission(mix64(i), 3.0, 0.0)));
        assert!((0..1000u64).all(|i| selective_admission(mix64(i), 3.0, 1.0)));
    }

    #[test]
    fn admission_is_locally_predictable() {
        // Same flow, same boundary: end-host and router agree.
        for i in 0..100u64 {
            let id = mix64(i);
            assert_eq!(
                selective_admission(id, 7.5, 0.3),
                selective_admission(id, 7.5, 0.3)
            );
        }
    }

    #[test]
    fn effective_allowance_discounts() {
        assert_eq!(
            effective_allowance(0.2, 0.0, 0.0),
            Allowance {
                rho: 0.2,
                exhausted: false
            }
        );
        let a = effective_allowance(0.2, 0.02, 0.03);
        assert_relative_eq!(a.rho, 0.15, epsilon = 1e-12);
        assert!(!a.exhausted);
        let a = effective_allowance(0.02, 0.02, 0.01);
        assert_eq!(a.rho, 0.0);
        assert!(a.exhausted);
    }

    #[test]
    fn subsample_lets_registered_flows_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = subsample_enforcement(0.01, 1000, true, &mut rng);
        assert_eq!(d.delivered_fraction, 1.0);
        assert!(!d.disrupted);
    }

    #[test]
    fn subsample_disrupts_long_unregistered_flows_but_spares_short_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = subsample_enforcement(0.01, 1000, false, &mut rng);
        // ~990 of 1000 delivered, and a drop lands in some window
        // with probability 1 - 0.99^1000 ~ 1.
        assert!((d.delivered_fraction - 0.99).abs() < 0.02);
        assert!(d.disrupted);
        // Short flows (e.g. DNS) usually pass: P(all 3 pass) = 0.99^3 ~ 0.97.
        let passes = (0..1000)
            .filter(|_| {
                let d = subsample_enforcement(0.01, 3, false, &mut rng);
                !d.disrupted
            })
            .count();
        assert!(passes > 930, "short flows passed {passes}/1000");
    }

    #[test]
    fn identical_seeds_reproduce_identical_logs() {
        let sys = greedy_sys(0.3, 2.0, 0.7);
        let cfg = AgentSimConfig::universal(300, AgentStrategy::Greedy, 15.0);
        let a = run_agents(&sys, &cfg, 99).unwrap();
        let b = run_agents(&sys, &cfg, 99).unwrap();
        assert_eq!(a.log.to_text(), b.log.to_text());
        assert_eq!(a.trajectory.loads(), b.trajectory.loads());
        let c = run_agents(&sys, &cfg, 100).unwrap();
        assert_ne!(a.log.to_text(), c.log.to_text());
    }

    #[test]
    fn flow_conservation_at_every_sample() {
        let sys = greedy_sys(0.3, 2.0, 0.7);
        let cfg = AgentSimConfig::universal(500, AgentStrategy::Greedy, 15.0);
        let run = run_agents(&sys, &cfg, 5).unwrap();
        for (_, f) in run.trajectory.samples() {
            let count = (f * 500.0).round();
            assert!((0.0..=500.0).contains(&count));
            assert_relative_eq!(f * 500.0, count, epsilon = 1e-9);
        }
    }

    #[test]
    fn empirical_greedy_tracks_the_fluid_oscillation() {
        let o = oscillation_params(0.3, 2.0).unwrap();
        let sys = greedy_sys(0.3, 2.0, o.amplitude);
        let horizon = 6.0 * o.half_period;
        let cfg = AgentSimConfig::universal(10_000, AgentStrategy::Greedy, horizon);
        let run = run_agents(&sys, &cfg, 12).unwrap();
        let mut worst: f64 = 0.0;
        for (t, f) in run.trajectory.samples() {
            let fluid = greedy_closed_form(&sys, t).unwrap();
            worst = worst.max((f - fluid).abs());
        }
        assert!(worst <= 0.05, "sup deviation {worst}");
    }

    #[test]
    fn empirical_mixed_profile_settles_at_the_fluid_limit() {
        let sys = greedy_sys(1.0, 2.0, 0.9);
        let mut cfg = AgentSimConfig::universal(10_000, AgentStrategy::Greedy, 20.0);
        cfg.profile = vec![
            (AgentStrategy::Greedy, 0.3),
            (AgentStrategy::Antagonist, 0.7),
        ];
        let run = run_agents(&sys, &cfg, 4).unwrap();
        // Tail imbalance near 1 - 2q = 0.4.
        let tail: Vec<f64> = run
            .trajectory
            .samples()
            .filter(|&(t, _)| t > 15.0)
            .map(|(_, f)| (2.0 * f - 1.0).abs())
            .collect();
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!((mean - 0.4).abs() < 0.05, "tail imbalance {mean}");
    }

    #[test]
    fn fresh_information_converges_and_stays() {
        let sys = greedy_sys(1.0, 0.0, 0.9);
        let cfg = AgentSimConfig::universal(1000, AgentStrategy::Greedy, 20.0);
        let run = run_agents(&sys, &cfg, 8).unwrap();
        for (t, f) in run.trajectory.samples() {
            if t > 10.0 {
                assert!((2.0 * f - 1.0).abs() < 0.01, "t = {t}: f = {f}");
            }
        }
    }

    #[test]
    fn floss_agents_freeze_load_within_intervals_and_suspend() {
        let sys = ParallelPathSystem::universal(1.0, 1.0, 2.0, 1.0, "floss").unwrap();
        let mut cfg = AgentSimConfig::universal(2000, AgentStrategy::Greedy, 60.0);
        cfg.mechanism = Mechanism::Floss(FlossAgentConfig::new(3.0, 0.5, 0.01));
        let run = run_agents(&sys, &cfg, 21).unwrap();
        // Within the first interval nothing moves despite re-evaluations.
        for (t, f) in run.trajectory.samples() {
            if t < 3.0 {
                assert_eq!(f, 1.0, "t = {t}");
            }
        }
        assert!(run.stats.vetoed_switches > 0);
        // Imbalance decays across boundaries and ends below the threshold.
        let final_delta = {
            let f = run.trajectory.load_at(59.9);
            (2.0 * f - 1.0).abs()
        };
        assert!(final_delta < 0.01, "final imbalance {final_delta}");
    }

    #[test]
    fn floss_migration_respects_the_allowance() {
        let sys = ParallelPathSystem::universal(1.0, 1.0, 2.0, 1.0, "floss").unwrap();
        let mut cfg = AgentSimConfig::universal(5000, AgentStrategy::Greedy, 12.0);
        cfg.mechanism = Mechanism::Floss(FlossAgentConfig::new(3.0, 0.5, 0.001));
        let run = run_agents(&sys, &cfg, 3).unwrap();
        // First boundary: rho = 0.5 * rho_max = 0.25 of the dear path;
        // admission noise is binomial around it.
        let f_after = run.trajectory.load_at(3.5);
        assert!(
            (f_after - 0.75).abs() < 0.03,
            "load after first boundary {f_after}"
        );
    }

    #[test]
    fn cross_agents_rebalance_by_fair_trials() {
        let sys = ParallelPathSystem::universal(1.0, 1.0, 2.0, 1.0, "cross").unwrap();
        let mut cfg = AgentSimConfig::universal(400, AgentStrategy::Greedy, 60.0);
        cfg.mechanism = Mechanism::Cross(CrossAgentConfig::new(3.0, 0.05));
        let run = run_agents(&sys, &cfg, 17).unwrap();
        // Fair coin split at N = 400: sigma = 1/(2 sqrt(400)) = 0.025, so a
        // trial succeeds with probability ~0.68; over 19 boundaries failure
        // to converge is (1-p)^19 ~ 1e-9.
        let f_end = run.trajectory.load_at(59.0);
        assert!((2.0 * f_end - 1.0).abs() < 0.05, "final imbalance");
        assert!(run.stats.vetoed_switches > 0 || run.stats.switches > 0);
    }

    #[test]
    fn cross_failure_moves_backups_then_the_rest() {
        let sys = ParallelPathSystem::universal(1.0, 1.0, 2.0, 1.0, "cross").unwrap();
        let mut cfg = AgentSimConfig::universal(1000, AgentStrategy::Greedy, 30.0);
        let mut mech = CrossAgentConfig::new(3.0, 1e-6);
        mech.insured_share = 0.1;
        mech.failures = vec![(Path::Beta, 4.5)];
        cfg.mechanism = Mechanism::Cross(mech);
        let run = run_agents(&sys, &cfg, 23).unwrap();
        let before = run.trajectory.load_at(4.4);
        let after = run.trajectory.load_at(4.6);
        // Backup holders on beta (~10% of beta's flows) jump at once.
        let jump = after - before;
        assert!(jump > 0.02 && jump < 0.2, "immediate jump {jump}");
        // After the boundary at t = 6 nobody is left on the failed path.
        assert_relative_eq!(run.trajectory.load_at(6.5), 1.0);
    }

    #[test]
    fn churn_births_flock_to_the_cheap_path_and_bloom_denials_are_rare() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut flows: Vec<Flow> = Vec::new();
        let mut registries = PathRegistries::new(1 << 16, 7);
        // A populated registry with some fill so false positives exist.
        for i in 0..5000u64 {
            registries.record_active(mix64(i), Path::Alpha);
            registries.record_active(mix64(i ^ 0xffff), Path::Beta);
        }
        let mut log = EventLog::default();
        let report = flow_churn(
            &mut flows,
            &registries,
            0.5,
            0.0,
            2000,
            Path::Beta,
            1.0,
            0.01,
            10.0,
            &mut rng,
            &mut log,
        );
        assert_eq!(report.births, 1000 - report.denied_everywhere);
        assert_eq!(report.deaths, 0);
        // Most births land on the cheap path.
        let on_beta = flows.iter().filter(|f| f.path == Path::Beta).count();
        assert!(on_beta as f64 / flows.len() as f64 > 0.95);
        // Denials happen at the Bloom false-positive rate, not wholesale.
        assert!(report.denied_first_choice < 50);
        assert_eq!(report.denied_everywhere, 0);
    }

    #[test]
    fn zero_churn_leaves_the_population_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut flows: Vec<Flow> = Vec::new();
        let registries = PathRegistries::new(1 << 12, 5);
        let mut log = EventLog::default();
        let report = flow_churn(
            &mut flows,
            &registries,
            0.0,
            0.0,
            1000,
            Path::Alpha,
            1.0,
            0.01,
            5.0,
            &mut rng,
            &mut log,
        );
        assert_eq!(report, ChurnReport::default());
        assert!(flows.is_empty());
        assert!(log.lines().is_empty());
    }

    #[test]
    fn cross_trial_splits_have_the_binomial_spread() {
        // The fluid model's sigma_split stands in for fair-coin registration
        // noise; the empirical per-trial standard deviation must come out
        // near 1/(2 sqrt(N)).
        let n = 2500usize;
        let sys = ParallelPathSystem::universal(1.0, 1.0, 2.0, 1.0, "cross").unwrap();
        let mut cfg = AgentSimConfig::universal(n, AgentStrategy::Greedy, 150.0);
        // Epsilon far below reach: trials keep redrawing for the whole run.
        cfg.mechanism = Mechanism::Cross(CrossAgentConfig::new(3.0, 1e-9));
        let run = run_agents(&sys, &cfg, 77).unwrap();
        let draws: Vec<f64> = run
            .trajectory
            .samples()
            .filter(|&(t, _)| (t / 3.0).fract() < 1e-9 && t > 0.0)
            .map(|(_, f)| f)
            .collect();
        assert!(draws.len() >= 40, "collected {} trial draws", draws.len());
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        let sigma = var.sqrt();
        let expected = 1.0 / (2.0 * (n as f64).sqrt());
        assert!(
            (sigma - expected).abs() < 0.4 * expected,
            "empirical sigma {sigma:.5} vs 1/(2 sqrt(N)) = {expected:.5}"
        );
    }

    #[test]
    fn pretenders_are_exposed_by_the_registry() {
        let mut registries = PathRegistries::new(1 << 16, 7);
        registries.record_active(42, Path::Alpha);
        // A flow active on alpha last interval cannot pose as new there.
        assert!(registries.previously_active(42, Path::Alpha));
        // But an actually new id passes (up to the FP rate).
        let fresh = (0..1000u64)
            .filter(|&i| registries.previously_active(mix64(i ^ 0xabcdef), Path::Alpha));
        assert!(fresh.count() < 20);
    }

    #[test]
    fn floss_run_with_churn_stays_conservative_and_converges() {
        let sys = ParallelPathSystem::universal(1.0, 1.0, 2.0, 1.0, "floss").unwrap();
        let mut cfg = AgentSimConfig::universal(2000, AgentStrategy::Greedy, 45.0);
        let mut mech = FlossAgentConfig::new(3.0, 0.5, 0.02);
        mech.churn = Some(ChurnConfig {
            birth_rate: 0.02,
            death_rate: 0.02,
        });
        cfg.mechanism = Mechanism::Floss(mech);
        let run = run_agents(&sys, &cfg, 31).unwrap();
        assert!(run.stats.births > 0 && run.stats.deaths > 0);
        // Population stays near its baseline (births balance deaths).
        let alive = run.final_flows.iter().filter(|f| f.alive).count();
        assert!((1800..=2200).contains(&alive), "alive {alive}");
        // The imbalance still comes down despite churn.
        let f_end = run.trajectory.load_at(44.0);
        assert!((2.0 * f_end - 1.0).abs() < 0.1, "final load {f_end}");
        // Every alive flow ends registered on its path and has been charged
        // the per-interval attempt costs.
        for flow in run.final_flows.iter().filter(|f| f.alive) {
            assert_eq!(flow.registered, Some(flow.path));
            assert!(flow.mechanism_cost > 0.0);
        }
    }

    #[test]
    fn mechanism_parameters_are_validated() {
        let sys = greedy_sys(1.0, 2.0, 0.9);
        let mut cfg = AgentSimConfig::universal(200, AgentStrategy::Greedy, 20.0);
        cfg.mechanism = Mechanism::Floss(FlossAgentConfig::new(1.5, 0.5, 0.01));
        assert!(matches!(
            run_agents(&sys, &cfg, 1),
            Err(AgentError::BadParameter(_))
        ));
        let mut mech = CrossAgentConfig::new(3.0, 0.01);
        mech.insured_share = 1.5;
        cfg.mechanism = Mechanism::Cross(mech);
        assert!(matches!(
            run_agents(&sys, &cfg, 1),
            Err(AgentError::BadParameter(_))
        ));
    }

    #[test]
    fn population_validation() {
        let sys = greedy_sys(1.0, 2.0, 0.9);
        let cfg = AgentSimConfig::universal(50, AgentStrategy::Greedy, 10.0);
        assert!(matches!(
            run_agents(&sys, &cfg, 1),
            Err(AgentError::TooFewFlows(_))
        ));
        let mut cfg = AgentSimConfig::universal(200, AgentStrategy::Greedy, 10.0);
        cfg.profile = vec![(AgentStrategy::Greedy, 0.6)];
        assert!(matches!(
            run_agents(&sys, &cfg, 1),
            Err(AgentError::BadProfile(_))
        ));
    }
}
