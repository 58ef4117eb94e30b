//! Strategy-cost calculus and equilibrium deviation tests.
//!
//! A path-selection strategy is a pair `(R, u)`: an expected re-evaluation
//! period and a selection probability `u(pi, t | pi')` for picking path `pi`
//! at a re-evaluation when currently on `pi'`. Deciding for a path at time
//! `t` costs the time-averaged path cost over the next re-evaluation window,
//!
//! ```text
//! c_u(pi, t) = (1/R) int_t^{t+R} c_pi(s) ds,
//! ```
//!
//! and the expected cost of applying a strategy weighs those usage costs by
//! the selection probabilities and by the occupation distribution
//! `y(pi' | t)` of the path the agent currently sits on. Aggregate strategy
//! cost averages that expectation over a *relevant span*: up to convergence
//! for converging systems, exactly one turning-point interval for periodic
//! ones.
//!
//! In the Wardrop regime a single deviating agent does not move the loads,
//! so deviation tests evaluate every candidate strategy against the
//! trajectory induced by universal adoption of the incumbent.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::closed_form::{
    closed_form_turning_points, mixed_profile_closed_form, oscillation_params, ClosedFormError,
};
use crate::dde::{convergent_dynamics, integrate, DdeError, History};
use crate::system::{cost_of, ParallelPathSystem, Path};
use crate::trajectory::{
    classify, Classification, ClassifyError, CumulativeCost, Trajectory, WindowError,
};

#[derive(Debug, Error)]
pub enum CostError {
    #[error("usage window out of range: {0}")]
    OutOfRange(#[from] WindowError),
    #[error(transparent)]
    Inconclusive(#[from] ClassifyError),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Dde(#[from] DdeError),
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
}

/// Selection probability of a custom strategy:
/// `u(pi, t, current_path, stale_load_on_alpha)`.
pub type SelectionFn = Arc<dyn Fn(Path, f64, Path, f64) -> f64 + Send + Sync>;

/// How a strategy selects paths and where its adherent tends to sit.
#[derive(Clone)]
pub enum StrategyKind {
    /// Deterministically selects the path perceived as cheaper; its adherent
    /// occupies that path.
    Greedy,
    /// Deterministically selects the path perceived as dearer, anticipating
    /// that greedy players will soon overload the cheap one.
    Antagonist,
    /// Plays greedy with probability `q_prime`, antagonist otherwise.
    MixedGreedyAntagonist { q_prime: f64 },
    /// Proportional rerouting with gain `mu`; its adherent's occupation
    /// distribution matches the aggregate loads.
    Convergent { mu: f64 },
    /// Arbitrary selection function; the occupation distribution is evolved
    /// from the initial split by the one-agent balance equation
    /// `dy(pi)/dt = r [u(pi,t|~pi) y(~pi) - u(~pi,t|pi) y(pi)]`.
    Custom { u: SelectionFn },
}

impl std::fmt::Debug for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StrategyKind::Greedy => write!(f, "Greedy"),
            StrategyKind::Antagonist => write!(f, "Antagonist"),
            StrategyKind::MixedGreedyAntagonist { q_prime } => {
                write!(f, "MixedGreedyAntagonist {{ q_prime: {q_prime} }}")
            }
            StrategyKind::Convergent { mu } => write!(f, "Convergent {{ mu: {mu} }}"),
            StrategyKind::Custom { .. } => write!(f, "Custom {{ .. }}"),
        }
    }
}

/// A path-selection strategy: identifier, expected re-evaluation period, and
/// selection behavior.
#[derive(Debug, Clone)]
pub struct Strategy {
    pub id: String,
    pub reeval_period: f64,
    pub kind: StrategyKind,
}

impl Strategy {
    pub fn greedy(reeval_period: f64) -> Self {
        Strategy {
            id: "greedy".into(),
            reeval_period,
            kind: StrategyKind::Greedy,
        }
    }

    pub fn antagonist(reeval_period: f64) -> Self {
        Strategy {
            id: "antagonist".into(),
            reeval_period,
            kind: StrategyKind::Antagonist,
        }
    }

    pub fn mixed(reeval_period: f64, q_prime: f64) -> Self {
        assert!((0.0..=1.0).contains(&q_prime));
        Strategy {
            id: format!("mixed(q'={q_prime})"),
            reeval_period,
            kind: StrategyKind::MixedGreedyAntagonist { q_prime },
        }
    }

    pub fn convergent(reeval_period: f64, mu: f64) -> Self {
        assert!((0.0..=1.0).contains(&mu));
        Strategy {
            id: format!("convergent(mu={mu})"),
            reeval_period,
            kind: StrategyKind::Convergent { mu },
        }
    }

    pub fn custom(id: &str, reeval_period: f64, u: SelectionFn) -> Self {
        Strategy {
            id: id.into(),
            reeval_period,
            kind: StrategyKind::Custom { u },
        }
    }
}

/// Time span over which aggregate strategy cost is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelevantSpan {
    pub t0: f64,
    pub t1: f64,
}

/// Outcome of the relevant-span selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Span {
    Window(RelevantSpan),
    /// The system sat at equal load from the start; every strategy costs
    /// exactly `(1/2)^p` and there is no span to integrate.
    AlreadyBalanced,
}

/// Picks the relevant time span for a classified trajectory: `[0, t_delta]`
/// for converging systems (the first time after which the imbalance: or its
/// distance to the limit: stays below `delta`), one turning-point interval
/// in the periodic regime for oscillating ones.
pub fn relevant_span(traj: &Trajectory, delta: f64) -> Result<Span, CostError> {
    let class = match traj.classification {
        Some(c) => c,
        None => classify(traj, delta, 0.25)?,
    };
    match class {
        Classification::Oscillating => {
            if traj.turning_points.len() < 2 {
                return Err(CostError::BadParameter(
                    "oscillating trajectory carries fewer than two turning points".into(),
                ));
            }
            Ok(Span::Window(RelevantSpan {
                t0: traj.turning_points[0],
                t1: traj.turning_points[1],
            }))
        }
        Classification::StableEqualLoad | Classification::Stable(_) => {
            let target = match class {
                Classification::Stable(d) => d,
                _ => 0.0,
            };
            // First time after which |Delta(t) - Delta*| < delta for good.
            let mut t_delta = None;
            for i in (0..traj.len()).rev() {
                let f = traj.loads()[i];
                let dist = ((2.0 * f - 1.0).abs() - target).abs();
                if dist >= delta {
                    break;
                }
                t_delta = Some(traj.time(i));
            }
            match (t_delta, target) {
                (None, _) => Err(CostError::Inconclusive(ClassifyError::Inconclusive(
                    "no converged tail within the horizon".into(),
                ))),
                // Balanced from the start: every strategy costs (1/2)^p.
                (Some(t), target) if t <= traj.t_start() && target < delta => {
                    Ok(Span::AlreadyBalanced)
                }
                // Static at a nonzero imbalance (e.g. frozen dynamics):
                // there is no transient to average over.
                (Some(t), _) if t <= traj.t_start() => Err(CostError::BadParameter(
                    "trajectory is static at a nonzero imbalance; strategy costs \
                     degenerate to constants"
                        .into(),
                )),
                (Some(t), _) => Ok(Span::Window(RelevantSpan {
                    t0: traj.t_start(),
                    t1: t,
                })),
            }
        }
    }
}

/// Usage cost of deciding for `path` at time `t`:
/// `(1/R) int_t^{t+R} c_path(s) ds` by composite Simpson over the sample grid.
pub fn usage_cost(
    traj: &Trajectory,
    p: f64,
    path: Path,
    t: f64,
    reeval_period: f64,
) -> Result<f64, CostError> {
    if !(reeval_period > 0.0) {
        return Err(CostError::BadParameter(format!(
            "re-evaluation period must be positive, got {reeval_period}"
        )));
    }
    let cum = CumulativeCost::new(traj, path, p);
    Ok(cum.window(t, t + reeval_period)? / reeval_period)
}

/// Evaluation context caching the cumulative path costs of one trajectory.
pub struct CostEvaluator<'a> {
    sys: &'a ParallelPathSystem,
    traj: &'a Trajectory,
    cum_alpha: CumulativeCost<'a>,
    cum_beta: CumulativeCost<'a>,
}

impl<'a> CostEvaluator<'a> {
    pub fn new(sys: &'a ParallelPathSystem, traj: &'a Trajectory) -> Self {
        CostEvaluator {
            sys,
            traj,
            cum_alpha: CumulativeCost::new(traj, Path::Alpha, sys.p),
            cum_beta: CumulativeCost::new(traj, Path::Beta, sys.p),
        }
    }

    pub fn usage(&self, path: Path, t: f64, reeval: f64) -> Result<f64, CostError> {
        let cum = match path {
            Path::Alpha => &self.cum_alpha,
            Path::Beta => &self.cum_beta,
        };
        Ok(cum.window(t, t + reeval)? / reeval)
    }

    fn stale(&self, t: f64) -> f64 {
        self.traj.stale_load(self.sys.t_stale, t)
    }

    /// Path perceived as cheaper at `t` (`None` at an exact tie).
    fn perceived_cheaper(&self, t: f64) -> Option<Path> {
        let f = self.stale(t);
        if f < 0.5 {
            Some(Path::Alpha)
        } else if f > 0.5 {
            Some(Path::Beta)
        } else {
            None
        }
    }

    /// Time-dependent strategy cost with the perceived-cheaper side pinned
    /// (used inside turning-point segments, where the side is constant).
    fn cost_at_with_side(
        &self,
        strategy: &Strategy,
        occupancy: Option<&Occupancy>,
        t: f64,
        side: Option<Path>,
    ) -> Result<f64, CostError> {
        let reeval = strategy.reeval_period;
        let cheaper = side.or_else(|| self.perceived_cheaper(t));
        match (&strategy.kind, cheaper) {
            (StrategyKind::Greedy, Some(path)) => self.usage(path, t, reeval),
            (StrategyKind::Antagonist, Some(path)) => self.usage(path.other(), t, reeval),
            (StrategyKind::MixedGreedyAntagonist { q_prime }, Some(path)) => {
                let g = self.usage(path, t, reeval)?;
                let a = self.usage(path.other(), t, reeval)?;
                Ok(q_prime * g + (1.0 - q_prime) * a)
            }
            // Exact tie: both paths cost the same in expectation.
            (
                StrategyKind::Greedy
                | StrategyKind::Antagonist
                | StrategyKind::MixedGreedyAntagonist { .. },
                None,
            ) => {
                let a = self.usage(Path::Alpha, t, reeval)?;
                let b = self.usage(Path::Beta, t, reeval)?;
                Ok(0.5 * (a + b))
            }
            (StrategyKind::Convergent { mu }, _) => {
                let f = self.traj.load_at(t);
                let ua = self.usage(Path::Alpha, t, reeval)?;
                let ub = self.usage(Path::Beta, t, reeval)?;
                // Occupation follows the aggregate loads; switching follows
                // the proportional rule on stale costs.
                let stale = self.stale(t);
                let (ca, cb) = (cost_of(stale, self.sys.p), cost_of(1.0 - stale, self.sys.p));
                let from_alpha = if cb < ca { mu * (ca - cb) } else { 0.0 };
                let from_beta = if ca < cb { mu * (cb - ca) } else { 0.0 };
                let cost_on_alpha = from_alpha * ub + (1.0 - from_alpha) * ua;
                let cost_on_beta = from_beta * ua + (1.0 - from_beta) * ub;
                Ok(f * cost_on_alpha + (1.0 - f) * cost_on_beta)
            }
            (StrategyKind::Custom { u }, _) => {
                let y_alpha = occupancy.map(|y| y.at(t)).unwrap_or(self.traj.load_at(t));
                let stale = self.stale(t);
                let ua = self.usage(Path::Alpha, t, reeval)?;
                let ub = self.usage(Path::Beta, t, reeval)?;
                let switch_ab = u(Path::Beta, t, Path::Alpha, stale).clamp(0.0, 1.0);
                let switch_ba = u(Path::Alpha, t, Path::Beta, stale).clamp(0.0, 1.0);
                let cost_on_alpha = switch_ab * ub + (1.0 - switch_ab) * ua;
                let cost_on_beta = switch_ba * ua + (1.0 - switch_ba) * ub;
                Ok(y_alpha * cost_on_alpha + (1.0 - y_alpha) * cost_on_beta)
            }
        }
    }
}

/// Occupation distribution of a single agent over time (probability of
/// currently sitting on `alpha`), on the trajectory grid.
pub struct Occupancy {
    t0: f64,
    step: f64,
    y_alpha: Vec<f64>,
}

impl Occupancy {
    pub fn at(&self, t: f64) -> f64 {
        let x = ((t - self.t0) / self.step).clamp(0.0, (self.y_alpha.len() - 1) as f64);
        let j = (x.floor() as usize).min(self.y_alpha.len() - 2);
        let frac = x - j as f64;
        self.y_alpha[j] * (1.0 - frac) + self.y_alpha[j + 1] * frac
    }
}

/// Evolves the one-agent occupation distribution under a selection function,
/// starting from the initial split `(A0, 1 - A0)`.
pub fn evolve_occupancy(sys: &ParallelPathSystem, traj: &Trajectory, u: &SelectionFn) -> Occupancy {
    let h = traj.step();
    let n = traj.len();
    let mut y = Vec::with_capacity(n);
    y.push(sys.a0);
    let rate = |t: f64, y_a: f64| {
        let stale = traj.stale_load(sys.t_stale, t);
        let to_alpha = u(Path::Alpha, t, Path::Beta, stale).clamp(0.0, 1.0);
        let to_beta = u(Path::Beta, t, Path::Alpha, stale).clamp(0.0, 1.0);
        sys.r * (to_alpha * (1.0 - y_a) - to_beta * y_a)
    };
    for i in 0..n - 1 {
        let t = traj.time(i);
        let cur = y[i];
        let k1 = rate(t, cur);
        let k2 = rate(t + 0.5 * h, cur + 0.5 * h * k1);
        let k3 = rate(t + 0.5 * h, cur + 0.5 * h * k2);
        let k4 = rate(t + h, cur + h * k3);
        y.push((cur + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(0.0, 1.0));
    }
    Occupancy {
        t0: traj.t_start(),
        step: h,
        y_alpha: y,
    }
}

/// Expected cost of applying a strategy at time `t` (occupation-weighted
/// usage cost of its selection).
pub fn strategy_cost_at(
    strategy: &Strategy,
    sys: &ParallelPathSystem,
    traj: &Trajectory,
    t: f64,
) -> Result<f64, CostError> {
    let eval = CostEvaluator::new(sys, traj);
    let occupancy = match &strategy.kind {
        StrategyKind::Custom { u } => Some(evolve_occupancy(sys, traj, u)),
        _ => None,
    };
    eval.cost_at_with_side(strategy, occupancy.as_ref(), t, None)
}

/// Aggregate strategy cost over a relevant span:
/// `(1/(t1-t0)) int C(sigma, t) dt`, composite Simpson split at turning
/// points (the integrand of indicator-occupation strategies jumps there).
pub fn strategy_cost(
    strategy: &Strategy,
    sys: &ParallelPathSystem,
    traj: &Trajectory,
    span: Span,
) -> Result<f64, CostError> {
    let window = match span {
        Span::AlreadyBalanced => return Ok(cost_of(0.5, sys.p)),
        Span::Window(w) => w,
    };
    if window.t1 <= window.t0 {
        return Err(CostError::BadParameter(format!(
            "relevant span is empty: [{}, {}]",
            window.t0, window.t1
        )));
    }
    if window.t1 + strategy.reeval_period > traj.t_end() + 1e-9 {
        return Err(CostError::OutOfRange(WindowError::OutOfRange {
            a: window.t0,
            b: window.t1 + strategy.reeval_period,
            lo: traj.t_start(),
            hi: traj.t_end(),
        }));
    }
    let eval = CostEvaluator::new(sys, traj);
    let occupancy = match &strategy.kind {
        StrategyKind::Custom { u } => Some(evolve_occupancy(sys, traj, u)),
        _ => None,
    };

    // Split at turning points: within each segment the perceived-cheaper
    // path is constant, so the integrand is smooth there.
    let mut cuts = vec![window.t0];
    for &tp in &traj.turning_points {
        if tp > window.t0 + 1e-12 && tp < window.t1 - 1e-12 {
            cuts.push(tp);
        }
    }
    cuts.push(window.t1);

    let mut total = 0.0;
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let side = eval.perceived_cheaper(0.5 * (a + b));
        let n = ((b - a) / traj.step()).ceil().max(4.0) as usize;
        let d = (b - a) / n as f64;
        let mut acc = 0.0;
        for j in 0..n {
            let x0 = a + j as f64 * d;
            let x1 = x0 + d;
            let g0 = eval.cost_at_with_side(strategy, occupancy.as_ref(), x0, side)?;
            let gm = eval.cost_at_with_side(strategy, occupancy.as_ref(), 0.5 * (x0 + x1), side)?;
            let g1 = eval.cost_at_with_side(strategy, occupancy.as_ref(), x1, side)?;
            acc += d / 6.0 * (g0 + 4.0 * gm + g1);
        }
        total += acc;
    }
    Ok(total / (window.t1 - window.t0))
}

/// Per-strategy aggregate cost plus the equilibrium verdict.
#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub costs: Vec<StrategyCost>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyCost {
    pub strategy: String,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verdict {
    /// No candidate undercuts the incumbent.
    Equilibrium,
    /// A deviation is profitable: the named strategy saves `gain`.
    Deviation { strategy: String, gain: f64 },
}

/// Cost differences below this threshold count as ties (quadrature noise).
pub const DEVIATION_TOL: f64 = 1e-9;

/// Builds the trajectory induced by universal adoption of a strategy.
///
/// The horizon doubles (up to a cap) until the trajectory classifies and
/// leaves room for the usage windows past the relevant span.
pub fn induced_trajectory(
    sys: &ParallelPathSystem,
    incumbent: &Strategy,
    reeval_margin: f64,
) -> Result<(Trajectory, Span), CostError> {
    let t_stale = sys.t_stale;
    let mut horizon = (20.0 * t_stale).max(30.0 / sys.r);
    let mut last_err: Option<CostError> = None;
    for _ in 0..5 {
        let step = (t_stale / 1000.0).min(horizon / 4000.0);
        let traj = match &incumbent.kind {
            StrategyKind::Convergent { mu } => integrate(
                sys,
                &convergent_dynamics(*mu),
                &History::constant(sys.a0).map_err(CostError::Dde)?,
                horizon,
                step,
            )?,
            StrategyKind::Greedy => closed_form_trajectory(sys, 1.0, horizon, step)?,
            StrategyKind::Antagonist => closed_form_trajectory(sys, 0.0, horizon, step)?,
            StrategyKind::MixedGreedyAntagonist { q_prime } => {
                closed_form_trajectory(sys, *q_prime, horizon, step)?
            }
            StrategyKind::Custom { .. } => {
                return Err(CostError::BadParameter(
                    "cannot induce aggregate dynamics from a custom strategy".into(),
                ))
            }
        };
        let mut traj = traj;
        match classify(&traj, 1e-3, 0.25) {
            Ok(class) => {
                traj.classification = Some(class);
                let span = relevant_span(&traj, 1e-3)?;
                let fits = match span {
                    Span::AlreadyBalanced => true,
                    Span::Window(w) => w.t1 + reeval_margin <= traj.t_end(),
                };
                if fits {
                    return Ok((traj, span));
                }
                last_err = Some(CostError::BadParameter(
                    "relevant span leaves no room for usage windows".into(),
                ));
            }
            Err(e) => last_err = Some(CostError::Inconclusive(e)),
        }
        horizon *= 2.0;
    }
    Err(last_err.unwrap_or_else(|| CostError::BadParameter("no horizon worked".into())))
}

fn closed_form_trajectory(
    sys: &ParallelPathSystem,
    q: f64,
    horizon: f64,
    step: f64,
) -> Result<Trajectory, CostError> {
    let mut traj = Trajectory::sample_fn(
        |t| mixed_profile_closed_form(q, sys, t).unwrap_or(0.5),
        horizon,
        step,
    );
    traj.set_history(sys.a0);
    traj.turning_points = closed_form_turning_points(q, sys, horizon)?;
    Ok(traj)
}

/// Tests whether universal adoption of `incumbent` is an equilibrium against
/// a finite list of candidate strategies.
///
/// All costs are evaluated on the incumbent-induced trajectory: a single
/// deviating agent controls negligible flow and does not move the loads.
pub fn pss_deviation_test(
    sys: &ParallelPathSystem,
    incumbent: &Strategy,
    candidates: &[Strategy],
) -> Result<CostReport, CostError> {
    let margin = candidates
        .iter()
        .map(|s| s.reeval_period)
        .fold(incumbent.reeval_period, f64::max);
    let (traj, span) = induced_trajectory(sys, incumbent, margin)?;

    let incumbent_cost = strategy_cost(incumbent, sys, &traj, span)?;
    let mut costs = vec![StrategyCost {
        strategy: incumbent.id.clone(),
        cost: incumbent_cost,
    }];
    let mut best: Option<(String, f64)> = None;
    for cand in candidates {
        let cost = strategy_cost(cand, sys, &traj, span)?;
        costs.push(StrategyCost {
            strategy: cand.id.clone(),
            cost,
        });
        let gain = incumbent_cost - cost;
        if gain > DEVIATION_TOL && best.as_ref().is_none_or(|(_, g)| gain > *g) {
            best = Some((cand.id.clone(), gain));
        }
    }
    let verdict = match best {
        Some((strategy, gain)) => Verdict::Deviation { strategy, gain },
        None => Verdict::Equilibrium,
    };
    Ok(CostReport { costs, verdict })
}

/// Analytic and finite-difference slope of the mixed-strategy cost.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeReport {
    /// Closed-form slope of `C(sigma_p(q') | O)` in `q'`.
    pub analytic: f64,
    /// Finite difference `C(1) - C(0)` from quadrature on the trajectory.
    pub numeric: f64,
    /// Numeric intercept `C(0)` (no closed form is available for it).
    pub intercept: f64,
}

/// Slope of the strategy cost `C(sigma_p(q') | O)` in the greedy weight `q'`
/// for a population with greedy share `q > 1/2`, under unit cost steepness.
///
/// The cost is evaluated over the turning-point interval during which the
/// lighter path is perceived as cheaper; it is linear in `q'` with slope
///
/// ```text
/// m = { R [ (2q-1)(W-R) + (2a/r)(e^{-rW}+1) ] + (4a/r^2)(e^{-rR}-1) } / (RW)
/// ```
///
/// where `a = A(q) + q - 1`. A positive slope means the antagonist end of
/// the mixing range is the cheaper deviation.
pub fn mixed_strategy_slope_analytic(
    q: f64,
    r: f64,
    reeval_period: f64,
    t_stale: f64,
) -> Result<f64, CostError> {
    if !(q > 0.5 && q <= 1.0) {
        return Err(CostError::BadParameter(format!(
            "greedy share must lie in (1/2, 1], got {q}"
        )));
    }
    let params = oscillation_params(r, t_stale)?;
    let w = params.half_period;
    if !(reeval_period > 0.0) || reeval_period > w * (1.0 + 1e-8) {
        return Err(CostError::BadParameter(format!(
            "re-evaluation period must lie in (0, W = {w}], got {reeval_period}"
        )));
    }
    let reeval_period = reeval_period.min(w);
    let amp = (0.5 - q) * (-r * t_stale).exp() + q;
    let a = amp + q - 1.0;
    Ok((reeval_period
        * ((2.0 * q - 1.0) * (w - reeval_period) + (2.0 * a / r) * ((-r * w).exp() + 1.0))
        + (4.0 * a / (r * r)) * ((-r * reeval_period).exp() - 1.0))
        / (reeval_period * w))
}

/// Full slope report: the closed form plus its finite-difference
/// cross-validation from quadrature on the sampled periodic trajectory.
pub fn mixed_strategy_slope(
    q: f64,
    r: f64,
    reeval_period: f64,
    t_stale: f64,
) -> Result<SlopeReport, CostError> {
    let analytic = mixed_strategy_slope_analytic(q, r, reeval_period, t_stale)?;
    let w = oscillation_params(r, t_stale)?.half_period;
    let reeval_period = reeval_period.min(w);
    let amp = (0.5 - q) * (-r * t_stale).exp() + q;

    // Finite-difference cross-check on the sampled periodic trajectory with
    // unit steepness (the regime in which the closed form holds).
    let mut profile = std::collections::BTreeMap::new();
    profile.insert("greedy".to_string(), q);
    profile.insert("antagonist".to_string(), 1.0 - q);
    let sys = ParallelPathSystem::new(r, 1.0, t_stale, amp, profile)
        .map_err(|e| CostError::BadParameter(e.to_string()))?;
    let horizon = 2.0 * w + t_stale + reeval_period + 1.0;
    let step = (w / 4000.0).min(reeval_period / 50.0);
    let traj = closed_form_trajectory(&sys, q, horizon, step)?;
    let span = Span::Window(RelevantSpan {
        t0: traj.turning_points[0],
        t1: traj.turning_points[0] + w,
    });
    let c1 = strategy_cost(&Strategy::mixed(reeval_period, 1.0), &sys, &traj, span)?;
    let c0 = strategy_cost(&Strategy::mixed(reeval_period, 0.0), &sys, &traj, span)?;
    Ok(SlopeReport {
        analytic,
        numeric: c1 - c0,
        intercept: c0,
    })
}

/// One row of the greedy-versus-convergent cost comparison.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CostComparison {
    pub reeval_period: f64,
    pub cost_greedy: f64,
    pub cost_convergent: f64,
}

/// Costs of the greedy and proportional-rerouting strategies on the
/// trajectory induced by universal proportional rerouting with gain `mu`,
/// across a grid of re-evaluation periods.
pub fn compare_greedy_vs_convergent(
    sys: &ParallelPathSystem,
    mu: f64,
    reeval_grid: &[f64],
) -> Result<Vec<CostComparison>, CostError> {
    if reeval_grid.is_empty() {
        return Err(CostError::BadParameter("empty re-evaluation grid".into()));
    }
    let margin = reeval_grid.iter().cloned().fold(0.0, f64::max);
    let incumbent = Strategy::convergent(margin, mu);
    let (traj, span) = induced_trajectory(sys, &incumbent, margin)?;
    let mut rows = Vec::with_capacity(reeval_grid.len());
    for &reeval in reeval_grid {
        if !(reeval > 0.0) {
            return Err(CostError::BadParameter(format!(
                "re-evaluation period must be positive, got {reeval}"
            )));
        }
        let cost_greedy = strategy_cost(&Strategy::greedy(reeval), sys, &traj, span)?;
        let cost_convergent = strategy_cost(&Strategy::convergent(reeval, mu), sys, &traj, span)?;
        rows.push(CostComparison {
            reeval_period: reeval,
            cost_greedy,
            cost_convergent,
        });
    }
    Ok(rows)
}

/// CSV export of a comparison table (`R,cost_greedy,cost_convergent`).
pub fn comparison_to_csv(rows: &[CostComparison]) -> String {
    let mut out = String::from("R,cost_greedy,cost_convergent\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            row.reeval_period, row.cost_greedy, row.cost_convergent
        ));
    }
    out
}
