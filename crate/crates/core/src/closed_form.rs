//! Closed-form load trajectories for greedy and mixed strategy profiles.
//!
//! Under universal greedy selection with staleness `T > 0`, the load on the
//! initially loaded path decays exponentially until the *stale* loads cross
//! the balance point; each such crossing is a turning point, after which the
//! flow direction reverses. Past the first turning point the motion is
//! periodic with turning points spaced
//!
//! ```text
//! W = ln(2 e^{rT} - 1) / r
//! ```
//!
//! apart and amplitude
//!
//! ```text
//! A = 1 - 1 / (2 e^{rT}).
//! ```
//!
//! A profile mixing a greedy share `q` with an antagonist share `1 - q`
//! (always selecting the path perceived as more expensive) converges for
//! `q <= 1/2` and oscillates with a reduced amplitude
//! `A(q) = (1/2 - q) e^{-rT} + q` for `q > 1/2`; the turning-point spacing `W`
//! is independent of `q`.

use thiserror::Error;

use crate::system::ParallelPathSystem;

#[derive(Debug, Error, PartialEq)]
pub enum ClosedFormError {
    #[error("no oscillation for r = {r}, T = {t_stale}; both must be positive")]
    NoOscillation { r: f64, t_stale: f64 },
    #[error("greedy share must lie in [0, 1], got {0}")]
    BadShare(f64),
    #[error("window root search failed: W({r}, T) = {target} has no solution in (0, {hi}]")]
    NoWindowRoot { r: f64, target: f64, hi: f64 },
}

/// Amplitude and turning-point spacing of universal-greedy oscillation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationParams {
    /// Peak load `A` reached on the swinging path.
    pub amplitude: f64,
    /// Spacing `W` between consecutive turning points (half the period).
    pub half_period: f64,
}

/// Evaluates the oscillation constants `A` and `W` for given `r`, `T`.
///
/// Uses the forms `A = 1 - e^{-rT}/2` and `W = T + ln(2 - e^{-rT})/r`, which
/// are algebraically identical to the defining expressions but remain stable
/// for large `rT`.
pub fn oscillation_params(r: f64, t_stale: f64) -> Result<OscillationParams, ClosedFormError> {
    if !(r > 0.0) || !(t_stale > 0.0) {
        return Err(ClosedFormError::NoOscillation { r, t_stale });
    }
    let decay = (-r * t_stale).exp();
    Ok(OscillationParams {
        amplitude: 1.0 - 0.5 * decay,
        half_period: t_stale + (2.0 - decay).ln() / r,
    })
}

/// First turning point of the greedy transient started from constant history
/// `A0 > 1/2`: the stale load crosses 1/2 at `ln(2 A0)/r`, one delay later the
/// flow direction flips.
pub fn first_turning_point(r: f64, t_stale: f64, a0: f64) -> f64 {
    t_stale + (2.0 * a0).ln() / r
}

/// Load on `alpha` at time `t` under universal greedy selection.
///
/// For `A0 = 1/2` the system is balanced and stays there. For `T = 0` the
/// load decays to the balance point and stops (fresh information never
/// overshoots). Otherwise the transient decays from `A0` until the first
/// turning point and the periodic regime alternates between rising and
/// decaying exponential arcs of amplitude `A`.
pub fn greedy_closed_form(sys: &ParallelPathSystem, t: f64) -> Result<f64, ClosedFormError> {
    mixed_profile_closed_form(1.0, sys, t)
}

/// Load on `alpha` at time `t` under a profile with greedy share `q` and
/// antagonist share `1 - q`.
///
/// For `q <= 1/2` the load follows the monotone exponential
/// `(A0 + q - 1) e^{-rt} + (1 - q)`. For `q > 1/2` the same exponential forms
/// the transient, after which the motion is periodic between `1 - A(q)` and
/// `A(q)` with turning points spaced `W` apart.
pub fn mixed_profile_closed_form(
    q: f64,
    sys: &ParallelPathSystem,
    t: f64,
) -> Result<f64, ClosedFormError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(ClosedFormError::BadShare(q));
    }
    let (r, t_stale, a0) = (sys.r, sys.t_stale, sys.a0);
    if a0 == 0.5 {
        return Ok(0.5);
    }
    // Transient from the initial imbalance: both strategy groups drain the
    // overloaded path, pulling the load toward 1 - q.
    let transient = |t: f64| (a0 + q - 1.0) * (-r * t).exp() + (1.0 - q);
    if q <= 0.5 {
        return Ok(transient(t));
    }
    if t_stale == 0.0 {
        // Fresh information: the load settles at the balance point as soon as
        // the transient reaches it.
        return Ok(transient(t).max(0.5));
    }
    let cross = ((a0 + q - 1.0) / (q - 0.5)).ln() / r;
    let t1 = cross + t_stale;
    if t < t1 {
        return Ok(transient(t));
    }
    let params = oscillation_params(r, t_stale)?;
    let w = params.half_period;
    // Amplitude of the mixed-profile cycle; equals the greedy amplitude at q = 1.
    let amp = (0.5 - q) * (-r * t_stale).exp() + q;
    let a = amp + q - 1.0;
    let tau = t - t1;
    let k = (tau / w).floor();
    let s = tau - k * w;
    let phase = (k as i64).rem_euclid(2);
    if phase == 0 {
        // Rising arc: from 1 - A(q) toward q.
        Ok(q - a * (-r * s).exp())
    } else {
        // Decaying arc: from A(q) toward 1 - q.
        Ok(a * (-r * s).exp() + (1.0 - q))
    }
}

/// Turning points of the greedy (or mixed, `q > 1/2`) closed form in
/// `[0, horizon]`: the first lies `T` past the stale balance crossing, the
/// rest are spaced `W` apart.
pub fn closed_form_turning_points(
    q: f64,
    sys: &ParallelPathSystem,
    horizon: f64,
) -> Result<Vec<f64>, ClosedFormError> {
    if sys.a0 == 0.5 || q <= 0.5 || sys.t_stale == 0.0 {
        return Ok(Vec::new());
    }
    let params = oscillation_params(sys.r, sys.t_stale)?;
    let t1 = sys.t_stale + ((sys.a0 + q - 1.0) / (q - 0.5)).ln() / sys.r;
    let mut points = Vec::new();
    let mut t = t1;
    while t <= horizon {
        points.push(t);
        t += params.half_period;
    }
    Ok(points)
}

/// Long-run imbalance of the mixed greedy/antagonist profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitImbalance {
    /// `Delta(t)` converges to this limit (`1 - 2q`; zero at `q = 1/2`).
    Stable(f64),
    /// No limit exists; the system oscillates.
    Oscillating,
}

/// Limit of `Delta(t) = |f_alpha - f_beta|` for greedy share `q`.
pub fn limit_imbalance(q: f64) -> Result<LimitImbalance, ClosedFormError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(ClosedFormError::BadShare(q));
    }
    if q <= 0.5 {
        Ok(LimitImbalance::Stable(1.0 - 2.0 * q))
    } else {
        Ok(LimitImbalance::Oscillating)
    }
}

/// Solves `W(r, T) = target` for the staleness `T` by bisection on
/// `(0, 100]` to a time tolerance of `1e-10`.
///
/// `W` is strictly increasing in `T` with `W -> 0` as `T -> 0`, so the root
/// is unique whenever it exists within the bracket.
pub fn solve_staleness_for_window(r: f64, target: f64) -> Result<f64, ClosedFormError> {
    let hi = 100.0;
    if !(r > 0.0) || !(target > 0.0) {
        return Err(ClosedFormError::NoWindowRoot { r, target, hi });
    }
    let window = |t: f64| {
        oscillation_params(r, t)
            .map(|o| o.half_period)
            .unwrap_or(0.0)
    };
    if window(hi) < target {
        return Err(ClosedFormError::NoWindowRoot { r, target, hi });
    }
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if window(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::ParallelPathSystem;
    use approx::assert_relative_eq;

    fn greedy_sys(r: f64, t_stale: f64, a0: f64) -> ParallelPathSystem {
        ParallelPathSystem::universal(r, 1.0, t_stale, a0, "greedy").unwrap()
    }

    // Frozen against direct evaluation of A = 1 - 1/(2 e^{rT}) and
    // W = ln(2 e^{rT} - 1)/r in extended precision.
    #[test]
    fn oscillation_params_reference_values() {
        let o = oscillation_params(0.3, 2.0).unwrap();
        assert_relative_eq!(o.amplitude, 0.7255941819529867, epsilon = 1e-12);
        assert_relative_eq!(o.half_period, 3.2412759402998508, epsilon = 1e-12);

        let o = oscillation_params(1.0, 2.0).unwrap();
        assert_relative_eq!(o.amplitude, 0.9323323583816936, epsilon = 1e-12);
        assert_relative_eq!(o.half_period, 2.623081260399664, epsilon = 1e-12);
    }

    #[test]
    fn amplitude_approaches_half_as_r_vanishes() {
        let o = oscillation_params(1e-9, 2.0).unwrap();
        assert_relative_eq!(o.amplitude, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn oscillation_params_rejects_degenerate_input() {
        assert!(oscillation_params(0.0, 2.0).is_err());
        assert!(oscillation_params(-1.0, 2.0).is_err());
        assert!(oscillation_params(0.3, 0.0).is_err());
        assert!(oscillation_params(0.3, -2.0).is_err());
    }

    #[test]
    fn greedy_periodic_regime_spot_values() {
        let o = oscillation_params(0.3, 2.0).unwrap();
        let sys = greedy_sys(0.3, 2.0, o.amplitude);
        let w = o.half_period;
        assert_relative_eq!(
            greedy_closed_form(&sys, 0.0).unwrap(),
            o.amplitude,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            greedy_closed_form(&sys, w).unwrap(),
            1.0 - o.amplitude,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            greedy_closed_form(&sys, 2.0 * w).unwrap(),
            o.amplitude,
            epsilon = 1e-12
        );
        // Mid-arc value A e^{-0.21}, frozen from direct evaluation.
        assert_relative_eq!(
            greedy_closed_form(&sys, 0.7).unwrap(),
            0.5881552128587165,
            epsilon = 1e-12
        );
    }

    #[test]
    fn greedy_transient_enters_periodic_regime_at_the_cycle_minimum() {
        let sys = greedy_sys(0.3, 2.0, 0.9);
        let o = oscillation_params(0.3, 2.0).unwrap();
        let t1 = first_turning_point(0.3, 2.0, 0.9);
        assert_relative_eq!(t1, 3.959288883007064, epsilon = 1e-12);
        // Decays as A0 e^{-rt} up to the first turning point.
        assert_relative_eq!(
            greedy_closed_form(&sys, 1.0).unwrap(),
            0.9 * (-0.3f64).exp(),
            epsilon = 1e-12
        );
        // The transient bottoms out exactly at the periodic minimum 1 - A.
        assert_relative_eq!(
            greedy_closed_form(&sys, t1).unwrap(),
            1.0 - o.amplitude,
            epsilon = 1e-10
        );
        // One half-period later the load peaks at A.
        assert_relative_eq!(
            greedy_closed_form(&sys, t1 + o.half_period).unwrap(),
            o.amplitude,
            epsilon = 1e-10
        );
    }

    #[test]
    fn greedy_is_periodic_past_the_first_turning_point() {
        let sys = greedy_sys(0.3, 2.0, 0.8);
        let o = oscillation_params(0.3, 2.0).unwrap();
        let t1 = first_turning_point(0.3, 2.0, 0.8);
        for i in 0..60 {
            let t = t1 + f64::from(i) * 0.37;
            let a = greedy_closed_form(&sys, t).unwrap();
            let b = greedy_closed_form(&sys, t + 2.0 * o.half_period).unwrap();
            assert!((a - b).abs() < 1e-12, "t = {t}: {a} vs {b}");
        }
    }

    #[test]
    fn fresh_information_trajectory_classifies_stable_at_equal_load() {
        let sys = greedy_sys(0.5, 0.0, 0.9);
        let traj = crate::trajectory::Trajectory::sample_fn(
            |t| greedy_closed_form(&sys, t).unwrap(),
            30.0,
            0.01,
        );
        assert_eq!(
            crate::trajectory::classify(&traj, 1e-3, 0.25).unwrap(),
            crate::trajectory::Classification::StableEqualLoad
        );
    }

    #[test]
    fn greedy_with_fresh_information_settles_at_balance() {
        let sys = greedy_sys(0.5, 0.0, 0.9);
        assert_relative_eq!(greedy_closed_form(&sys, 0.0).unwrap(), 0.9);
        let settle = (2.0 * 0.9f64).ln() / 0.5;
        assert!(greedy_closed_form(&sys, settle - 0.1).unwrap() > 0.5);
        assert_relative_eq!(greedy_closed_form(&sys, settle + 5.0).unwrap(), 0.5);
    }

    #[test]
    fn balanced_start_stays_balanced() {
        let sys = greedy_sys(0.3, 2.0, 0.5);
        for t in [0.0, 1.0, 10.0] {
            assert_eq!(greedy_closed_form(&sys, t).unwrap(), 0.5);
        }
    }

    #[test]
    fn mixed_profile_initial_condition_and_limit() {
        let sys = greedy_sys(1.0, 2.0, 0.9);
        assert_relative_eq!(
            mixed_profile_closed_form(0.3, &sys, 0.0).unwrap(),
            0.9,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            mixed_profile_closed_form(0.3, &sys, 30.0).unwrap(),
            0.7,
            epsilon = 1e-10
        );
        // Half greedy, half antagonist: stable at equal load.
        assert_relative_eq!(
            mixed_profile_closed_form(0.5, &sys, 40.0).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mixed_profile_is_monotone_for_small_greedy_share() {
        let sys = greedy_sys(1.0, 2.0, 0.9);
        let mut prev = 1.0;
        for i in 0..=200 {
            let f = mixed_profile_closed_form(0.3, &sys, f64::from(i) * 0.1).unwrap();
            assert!(f <= prev + 1e-15);
            prev = f;
        }
    }

    #[test]
    fn mixed_profile_oscillates_with_reduced_amplitude_for_large_greedy_share() {
        let (q, r, t_stale) = (0.8, 1.0, 2.0);
        let sys = greedy_sys(r, t_stale, 0.9);
        let w = oscillation_params(r, t_stale).unwrap().half_period;
        let amp = (0.5 - q) * (-r * t_stale).exp() + q;
        let t1 = closed_form_turning_points(q, &sys, 100.0).unwrap()[0];
        // Continuity at the regime switch, cycle extremes, periodicity.
        assert_relative_eq!(
            mixed_profile_closed_form(q, &sys, t1).unwrap(),
            1.0 - amp,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            mixed_profile_closed_form(q, &sys, t1 + w).unwrap(),
            amp,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            mixed_profile_closed_form(q, &sys, t1 + 2.7).unwrap(),
            mixed_profile_closed_form(q, &sys, t1 + 2.7 + 2.0 * w).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn mixed_profile_at_full_greedy_share_matches_greedy_form() {
        let sys = greedy_sys(0.3, 2.0, 0.8);
        for i in 0..120 {
            let t = f64::from(i) * 0.2;
            assert_eq!(
                mixed_profile_closed_form(1.0, &sys, t).unwrap(),
                greedy_closed_form(&sys, t).unwrap()
            );
        }
    }

    #[test]
    fn limit_imbalance_cases() {
        assert_eq!(limit_imbalance(0.3).unwrap(), LimitImbalance::Stable(0.4));
        assert_eq!(limit_imbalance(0.5).unwrap(), LimitImbalance::Stable(0.0));
        assert_eq!(limit_imbalance(0.8).unwrap(), LimitImbalance::Oscillating);
        assert!(limit_imbalance(1.2).is_err());
    }

    #[test]
    fn amplitude_and_window_increase_with_staleness() {
        // Finite differencing over a staleness grid at fixed r.
        for r in [0.3, 1.0] {
            let mut prev = oscillation_params(r, 0.1).unwrap();
            for i in 1..=40 {
                let t = 0.1 + f64::from(i) * 0.25;
                let next = oscillation_params(r, t).unwrap();
                assert!(next.amplitude > prev.amplitude);
                assert!(next.half_period > prev.half_period);
                prev = next;
            }
        }
    }

    #[test]
    fn staleness_root_matches_direct_inversion() {
        // ln(2 e^{rT} - 1)/r = R inverts to T = ln((e^{rR} + 1)/2)/r; the
        // bisection must agree with the algebraic route.
        for &(r, target) in &[(1.0, 1.0), (0.5, 0.2), (0.1, 0.1), (0.7, 2.3)] {
            let by_bisection = solve_staleness_for_window(r, target).unwrap();
            let algebraic = ((r * target).exp() + 1.0).ln() / r - (2.0f64).ln() / r;
            assert_relative_eq!(by_bisection, algebraic, epsilon = 1e-9);
            let w = oscillation_params(r, by_bisection).unwrap().half_period;
            assert_relative_eq!(w, target, epsilon = 1e-9);
        }
    }
}
