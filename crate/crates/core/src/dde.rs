//! Delay-differential integrator for flow dynamics, by the method of steps.
//!
//! All shipped dynamics have the form `df/dt = rhs(t, f(t), f(t - T))`: the
//! current rate of change depends on the load observed one staleness delay
//! ago. With the step chosen so the delay is an integer number of steps,
//! every Runge-Kutta stage reads the delayed term from already-computed
//! samples (cubic interpolation at half-steps), which is the classical
//! method of steps.
//!
//! The greedy and mixed greedy/antagonist dynamics switch their right-hand
//! side discontinuously when the *stale* load crosses the balance point.
//! Stepping blindly across such a flip would cost the integrator its order,
//! so flips are located by bisection to 1e-10 and the step is restarted at
//! the event. Within one branch those right-hand sides depend only on the
//! current load, so the sub-steps retain full accuracy.

use thiserror::Error;

use crate::system::{cost_of, snap_load, ParallelPathSystem};
use crate::trajectory::{SampleKind, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum DdeError {
    #[error("step {step} too large; the integrator needs h <= T/100 = {max}")]
    StepTooLarge { step: f64, max: f64 },
    #[error("horizon {horizon} too short; need at least 2T = {min}")]
    HorizonTooShort { horizon: f64, min: f64 },
    #[error("state left [-0.1, 1.1] at t = {t} (value {value}); integration unstable")]
    NonFinite { t: f64, value: f64 },
    #[error("history value {0} outside [0, 1]")]
    BadHistory(f64),
}

/// Initial data for the delay equation: the load on `[-T, 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct History {
    value: f64,
}

impl History {
    /// Constant pre-history, the default initial data: `f(t) = A0` on `[-T, 0]`.
    pub fn constant(value: f64) -> Result<Self, DdeError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(DdeError::BadHistory(value));
        }
        Ok(History { value })
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Which side of the balance point the stale load is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Above,
    Below,
}

/// A flow dynamics: the right-hand side of `df_alpha/dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dynamics {
    /// Deterministic switching to the path perceived as cheaper:
    /// `-r f` while `alpha` is perceived dearer, `+r (1 - f)` while cheaper.
    Greedy,
    /// Proportional rerouting: switch toward the perceived-cheaper path with
    /// probability `mu * |perceived cost difference|`. The damped-oscillator
    /// dynamics of load-adaptive rerouting with delayed feedback.
    Convergent { mu: f64 },
    /// Gradient reallocation with step coefficient `gamma`, projected back
    /// onto the demand simplex. Aggregates to exactly the proportional
    /// rerouting dynamics with `mu = gamma / 2`.
    Mate { gamma: f64 },
    /// Population mixing a greedy share `q` with an antagonist share `1 - q`
    /// that deliberately selects the path perceived as dearer.
    MixedGreedyAntagonist { q: f64 },
}

/// Deterministic stale-cheapest-path selection.
pub fn greedy_dynamics() -> Dynamics {
    Dynamics::Greedy
}

/// Proportional rerouting with switch gain `mu` in `[0, 1]`
/// (the perceived cost difference is already normalized: loads and costs
/// live in `[0, 1]`).
pub fn convergent_dynamics(mu: f64) -> Dynamics {
    assert!((0.0..=1.0).contains(&mu), "switch gain must lie in [0, 1]");
    Dynamics::Convergent { mu }
}

/// Gradient-reallocation dynamics with step coefficient `gamma >= 0`.
///
/// Construction asserts pointwise agreement with the proportional-rerouting
/// right-hand side at `mu = gamma / 2`; the two are the same vector field.
pub fn mate_dynamics(gamma: f64) -> Dynamics {
    assert!(gamma >= 0.0, "step coefficient must be nonnegative");
    let mate = Dynamics::Mate { gamma };
    let twin = Dynamics::Convergent { mu: gamma * 0.5 };
    debug_assert!({
        let mut same = true;
        for i in 0..=20 {
            for j in 0..=20 {
                let f = f64::from(i) / 20.0;
                let fd = f64::from(j) / 20.0;
                same &= mate.rhs(1.3, 2.0, f, fd) == twin.rhs(1.3, 2.0, f, fd);
            }
        }
        same
    });
    mate
}

/// Mixed greedy/antagonist population with greedy share `q` in `[0, 1]`.
pub fn mixed_dynamics(q: f64) -> Dynamics {
    assert!((0.0..=1.0).contains(&q), "greedy share must lie in [0, 1]");
    Dynamics::MixedGreedyAntagonist { q }
}

impl Dynamics {
    /// Evaluates `df_alpha/dt` given the current load `f` and the stale load
    /// `f_delayed`. Equal stale costs always give zero drift.
    pub fn rhs(&self, r: f64, p: f64, f: f64, f_delayed: f64) -> f64 {
        match *self {
            Dynamics::Greedy => match side_of(f_delayed) {
                Some(side) => greedy_side_rhs(side, r, f),
                None => 0.0,
            },
            Dynamics::Convergent { mu } => convergent_rhs(mu, r, p, f, f_delayed),
            Dynamics::Mate { gamma } => convergent_rhs(gamma * 0.5, r, p, f, f_delayed),
            Dynamics::MixedGreedyAntagonist { q } => match side_of(f_delayed) {
                Some(side) => mixed_side_rhs(side, q, r, f),
                None => 0.0,
            },
        }
    }

    /// Whether the right-hand side jumps when the stale load crosses 1/2.
    fn has_flip(&self) -> bool {
        matches!(
            self,
            Dynamics::Greedy | Dynamics::MixedGreedyAntagonist { .. }
        )
    }

    /// Branch right-hand side for flip dynamics; depends only on the load.
    fn side_rhs(&self, side: Side, r: f64, f: f64) -> f64 {
        match *self {
            Dynamics::Greedy => greedy_side_rhs(side, r, f),
            Dynamics::MixedGreedyAntagonist { q } => mixed_side_rhs(side, q, r, f),
            _ => unreachable!("side integration only applies to flip dynamics"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Dynamics::Greedy => "greedy",
            Dynamics::Convergent { .. } => "convergent",
            Dynamics::Mate { .. } => "mate",
            Dynamics::MixedGreedyAntagonist { .. } => "mixed",
        }
    }
}

// Ties get a snap band: interpolation of an exactly balanced segment may
// come back 0.5 plus an ulp, which must not start a full-rate stampede.
fn side_of(f_delayed: f64) -> Option<Side> {
    if (f_delayed - 0.5).abs() <= 1e-12 {
        None
    } else if f_delayed > 0.5 {
        Some(Side::Above)
    } else {
        Some(Side::Below)
    }
}

fn greedy_side_rhs(side: Side, r: f64, f: f64) -> f64 {
    match side {
        // alpha perceived dearer: its users drain away.
        Side::Above => -r * f,
        // alpha perceived cheaper: users arrive from beta.
        Side::Below => r * (1.0 - f),
    }
}

fn mixed_side_rhs(side: Side, q: f64, r: f64, f: f64) -> f64 {
    match side {
        // Greedy share leaves alpha, antagonist share arrives.
        Side::Above => r * (1.0 - q - f),
        Side::Below => r * (q - f),
    }
}

fn convergent_rhs(mu: f64, r: f64, p: f64, f: f64, f_delayed: f64) -> f64 {
    let dc = cost_of(1.0 - f_delayed, p) - cost_of(f_delayed, p);
    if dc <= 0.0 {
        r * mu * dc * f
    } else {
        r * mu * dc * (1.0 - f)
    }
}

/// Integrates the dynamics over `[0, horizon]` and returns the sampled
/// trajectory.
///
/// The step is snapped to divide the delay exactly; samples are emitted at
/// every step and loads are clamped to `[0, 1]` (with a 1e-12 snap). Flip
/// events of the greedy and mixed dynamics are recorded as turning points;
/// for smooth dynamics turning points are detected from the samples
/// afterwards.
pub fn integrate(
    sys: &ParallelPathSystem,
    dynamics: &Dynamics,
    history: &History,
    horizon: f64,
    step: f64,
) -> Result<Trajectory, DdeError> {
    let t_delay = sys.t_stale;
    let max_step = t_delay / 100.0;
    if !(step > 0.0) || step > max_step * (1.0 + 1e-12) {
        return Err(DdeError::StepTooLarge {
            step,
            max: max_step,
        });
    }
    if horizon < 2.0 * t_delay {
        return Err(DdeError::HorizonTooShort {
            horizon,
            min: 2.0 * t_delay,
        });
    }

    // Snap the step so the delay is an integer number of steps; every stage
    // then reads the delayed term from stored samples.
    let n_delay = (t_delay / step).round() as usize;
    let h = t_delay / n_delay as f64;
    let n_steps = (horizon / h).ceil() as usize;

    let mut samples = vec![history.value(); n_delay + 1];
    samples.reserve(n_steps);

    // Value at absolute time `t >= -T` from the stored grid. The solution
    // has a derivative corner where the constant history meets the moving
    // solution (grid index `n_delay`, time 0); interpolation stencils must
    // not straddle it or the corner bleeds an O(h^2) error into the stages.
    let value_at = |samples: &[f64], t: f64| -> f64 {
        let x = t / h + n_delay as f64;
        if x <= 0.0 {
            return samples[0];
        }
        let j = x.floor() as usize;
        let frac = x - j as f64;
        if j + 1 >= samples.len() {
            return samples[samples.len() - 1];
        }
        if frac < 1e-12 {
            samples[j]
        } else if j < n_delay {
            // History side: constant by construction.
            samples[j]
        } else {
            cubic_interpolate_from(samples, j, frac, n_delay)
        }
    };

    let (r, p) = (sys.r, sys.p);
    let mut turning_points = Vec::new();

    for i in 0..n_steps {
        let t = i as f64 * h;
        let f = samples[n_delay + i];
        let d0 = value_at(&samples, t - t_delay);
        let d1 = value_at(&samples, t + h - t_delay);

        let next = if dynamics.has_flip() && (d0 - 0.5) * (d1 - 0.5) < 0.0 {
            // The stale load crosses the balance point inside this step:
            // bisect the flip time, then integrate each side on its branch.
            let mut lo = t;
            let mut hi = t + h;
            let g_lo = d0 - 0.5;
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                let g = value_at(&samples, mid - t_delay) - 0.5;
                if g == 0.0 {
                    lo = mid;
                    break;
                }
                if (g > 0.0) == (g_lo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let flip = 0.5 * (lo + hi);
            turning_points.push(flip);
            let side_before = side_of(d0).expect("strict sign change");
            let side_after = side_of(d1).expect("strict sign change");
            let mid = rk4_side(dynamics, side_before, r, f, flip - t);
            rk4_side(dynamics, side_after, r, mid, t + h - flip)
        } else if dynamics.has_flip() {
            // No flip inside the step; the branch is constant, so the stale
            // value is only needed for its sign.
            match side_of(d0).or_else(|| side_of(d1)) {
                Some(side) => rk4_side(dynamics, side, r, f, h),
                None => f,
            }
        } else {
            let dm = value_at(&samples, t + 0.5 * h - t_delay);
            let k1 = dynamics.rhs(r, p, f, d0);
            let k2 = dynamics.rhs(r, p, f + 0.5 * h * k1, dm);
            let k3 = dynamics.rhs(r, p, f + 0.5 * h * k2, dm);
            let k4 = dynamics.rhs(r, p, f + h * k3, d1);
            f + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        };

        if !(-0.1..=1.1).contains(&next) {
            return Err(DdeError::NonFinite {
                t: t + h,
                value: next,
            });
        }
        samples.push(snap_load(next));
    }

    let loads = samples.split_off(n_delay);
    let mut traj = Trajectory::from_samples(0.0, h, loads, SampleKind::Smooth);
    traj.set_history(history.value());
    if dynamics.has_flip() {
        traj.turning_points = turning_points;
    } else {
        traj.annotate_turning_points(t_delay);
    }
    Ok(traj)
}

/// Four-point interpolation at `j + frac` with the stencil clamped to lie at
/// or right of `lo` (the start-up corner), falling back to linear when fewer
/// than four points fit.
fn cubic_interpolate_from(values: &[f64], j: usize, frac: f64, lo: usize) -> f64 {
    let n = values.len();
    let i0 = j.saturating_sub(1).max(lo).min(n.saturating_sub(4));
    if i0 + 3 >= n || i0 > j {
        return values[j] * (1.0 - frac) + values[j + 1] * frac;
    }
    let x = j as f64 + frac - i0 as f64;
    let y = &values[i0..i0 + 4];
    let mut acc = 0.0;
    for (k, &yk) in y.iter().enumerate() {
        let mut basis = 1.0;
        for m in 0..4 {
            if m != k {
                basis *= (x - m as f64) / (k as f64 - m as f64);
            }
        }
        acc += yk * basis;
    }
    acc
}

/// One RK4 step of a branch right-hand side (load-only dependence).
fn rk4_side(dynamics: &Dynamics, side: Side, r: f64, f: f64, h: f64) -> f64 {
    if h <= 0.0 {
        return f;
    }
    let k1 = dynamics.side_rhs(side, r, f);
    let k2 = dynamics.side_rhs(side, r, f + 0.5 * h * k1);
    let k3 = dynamics.side_rhs(side, r, f + 0.5 * h * k2);
    let k4 = dynamics.side_rhs(side, r, f + h * k3);
    f + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Damping character of a trajectory around the balance point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingKind {
    /// Never crosses the balance point: monotone approach.
    Overdamped,
    /// Crosses and keeps a (near-)constant cycle amplitude.
    Undamped,
    /// Crosses with decaying overshoot.
    Underdamped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingVerdict {
    pub kind: DampingKind,
    /// Ratio of the last two imbalance peaks, when at least two exist.
    pub envelope_ratio: Option<f64>,
    /// Number of balance-point crossings after the start.
    pub crossings: usize,
}

/// Classifies damping from balance crossings and the imbalance envelope.
///
/// Overdamped: the load never crosses 1/2. Undamped: the last imbalance
/// peaks keep a ratio of at least 0.99. Underdamped: crossings exist and the
/// peaks decay. Trajectories too short to show three peaks (and not clearly
/// converged) are inconclusive.
pub fn classify_damping(
    traj: &Trajectory,
) -> Result<DampingVerdict, crate::trajectory::ClassifyError> {
    use crate::trajectory::ClassifyError;

    let loads = traj.loads();
    let crossings = loads
        .windows(2)
        .filter(|w| (w[0] - 0.5) * (w[1] - 0.5) < 0.0)
        .count();
    if crossings == 0 {
        return Ok(DampingVerdict {
            kind: DampingKind::Overdamped,
            envelope_ratio: None,
            crossings,
        });
    }

    // Interior local maxima of the imbalance, ignoring numerical dust.
    let delta: Vec<f64> = loads.iter().map(|f| (2.0 * f - 1.0).abs()).collect();
    let mut peaks = Vec::new();
    for i in 1..delta.len() - 1 {
        if delta[i] > delta[i - 1] && delta[i] >= delta[i + 1] && delta[i] > 1e-9 {
            peaks.push(delta[i]);
        }
    }

    let tail_len = delta.len() / 10;
    let tail_sup = delta[delta.len() - tail_len.max(1)..]
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    if peaks.len() < 3 {
        if tail_sup < 1e-6 {
            // Crossed the balance point, then the overshoot died out.
            return Ok(DampingVerdict {
                kind: DampingKind::Underdamped,
                envelope_ratio: None,
                crossings,
            });
        }
        return Err(ClassifyError::Inconclusive(format!(
            "only {} imbalance peaks in the horizon",
            peaks.len()
        )));
    }

    let ratio = peaks[peaks.len() - 1] / peaks[peaks.len() - 2];
    let kind = if ratio >= 0.99 {
        DampingKind::Undamped
    } else {
        DampingKind::Underdamped
    };
    Ok(DampingVerdict {
        kind,
        envelope_ratio: Some(ratio),
        crossings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sys(r: f64, p: f64, t_stale: f64, a0: f64) -> ParallelPathSystem {
        ParallelPathSystem::universal(r, p, t_stale, a0, "greedy").unwrap()
    }

    #[test]
    fn greedy_rhs_branches() {
        let g = greedy_dynamics();
        assert_relative_eq!(g.rhs(1.0, 1.0, 0.6, 0.8), -0.6);
        assert_relative_eq!(g.rhs(1.0, 1.0, 0.6, 0.5), 0.0);
        assert_relative_eq!(g.rhs(2.0, 1.0, 0.4, 0.2), 1.2);
    }

    #[test]
    fn convergent_rhs_examples() {
        let c = convergent_dynamics(1.0);
        // Perceived difference c_beta - c_alpha = 0.1 - 0.9 = -0.8.
        assert_relative_eq!(c.rhs(1.0, 1.0, 0.9, 0.9), -0.72, epsilon = 1e-15);
        assert_relative_eq!(c.rhs(1.0, 1.0, 0.3, 0.5), 0.0);
        let c = convergent_dynamics(0.5);
        // Positive difference pushes load toward alpha in proportion to f_beta.
        assert_relative_eq!(c.rhs(1.0, 1.0, 0.4, 0.3), 0.5 * 0.4 * 0.6, epsilon = 1e-15);
    }

    #[test]
    fn mate_equals_convergent_at_half_gamma() {
        let m = mate_dynamics(0.8);
        let c = convergent_dynamics(0.4);
        for i in 0..=50 {
            for j in 0..=50 {
                let f = f64::from(i) / 50.0;
                let fd = f64::from(j) / 50.0;
                assert_eq!(m.rhs(1.7, 1.0, f, fd), c.rhs(1.7, 1.0, f, fd));
                assert_eq!(m.rhs(0.9, 2.0, f, fd), c.rhs(0.9, 2.0, f, fd));
            }
        }
    }

    #[test]
    fn greedy_is_mixed_with_full_share() {
        let g = greedy_dynamics();
        let m = mixed_dynamics(1.0);
        for i in 0..=20 {
            for j in 0..=20 {
                let f = f64::from(i) / 20.0;
                let fd = f64::from(j) / 20.0;
                assert_eq!(g.rhs(1.3, 1.0, f, fd), m.rhs(1.3, 1.0, f, fd));
            }
        }
    }

    #[test]
    fn step_and_horizon_preconditions() {
        let s = sys(1.0, 1.0, 2.0, 0.9);
        let h = History::constant(0.9).unwrap();
        assert!(matches!(
            integrate(&s, &greedy_dynamics(), &h, 10.0, 0.03),
            Err(DdeError::StepTooLarge { .. })
        ));
        assert!(matches!(
            integrate(&s, &greedy_dynamics(), &h, 3.0, 0.002),
            Err(DdeError::HorizonTooShort { .. })
        ));
        // Fresh information has no delay window to integrate over.
        let fresh = sys(1.0, 1.0, 0.0, 0.9);
        assert!(matches!(
            integrate(&fresh, &greedy_dynamics(), &h, 10.0, 0.002),
            Err(DdeError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn zero_gain_freezes_the_trajectory() {
        let s = sys(1.0, 1.0, 2.0, 0.8);
        let h = History::constant(0.8).unwrap();
        let traj = integrate(&s, &convergent_dynamics(0.0), &h, 8.0, 0.02).unwrap();
        for (_, f) in traj.samples() {
            assert_eq!(f, 0.8);
        }
        let traj = integrate(&s, &mate_dynamics(0.0), &h, 8.0, 0.02).unwrap();
        for (_, f) in traj.samples() {
            assert_eq!(f, 0.8);
        }
    }

    #[test]
    fn balance_point_is_a_fixed_point_of_every_dynamics() {
        let s = sys(1.0, 2.0, 2.0, 0.5);
        let h = History::constant(0.5).unwrap();
        for dynamics in [
            greedy_dynamics(),
            convergent_dynamics(0.7),
            mate_dynamics(1.3),
            mixed_dynamics(0.3),
        ] {
            let traj = integrate(&s, &dynamics, &h, 8.0, 0.02).unwrap();
            for (_, f) in traj.samples() {
                assert_eq!(f, 0.5, "{}", dynamics.name());
            }
        }
    }

    #[test]
    fn damping_regimes_for_proportional_rerouting() {
        // r = 1, p = 1, T = 2, A0 = 1: high gain keeps a constant-amplitude
        // cycle, moderate gain overshoots and converges, low gain approaches
        // the balance point monotonically.
        let s = sys(1.0, 1.0, 2.0, 1.0);
        let h = History::constant(1.0).unwrap();

        let undamped = integrate(&s, &convergent_dynamics(1.0), &h, 80.0, 0.002).unwrap();
        let verdict = classify_damping(&undamped).unwrap();
        assert_eq!(verdict.kind, DampingKind::Undamped, "{verdict:?}");
        let ratio = verdict.envelope_ratio.unwrap();
        assert!(
            (0.99..=1.01).contains(&ratio),
            "undamped envelope ratio {ratio}"
        );

        let underdamped = integrate(&s, &convergent_dynamics(0.5), &h, 80.0, 0.002).unwrap();
        let verdict = classify_damping(&underdamped).unwrap();
        assert_eq!(verdict.kind, DampingKind::Underdamped, "{verdict:?}");

        let overdamped = integrate(&s, &convergent_dynamics(0.1), &h, 80.0, 0.002).unwrap();
        let verdict = classify_damping(&overdamped).unwrap();
        assert_eq!(verdict.kind, DampingKind::Overdamped, "{verdict:?}");
        assert_eq!(verdict.crossings, 0);
    }

    #[test]
    fn damping_inconclusive_on_short_horizons() {
        let s = sys(1.0, 1.0, 2.0, 1.0);
        let h = History::constant(1.0).unwrap();
        // Barely two delay windows: not enough structure to judge.
        let traj = integrate(&s, &convergent_dynamics(0.5), &h, 4.0, 0.002).unwrap();
        assert!(classify_damping(&traj).is_err());
    }
}
