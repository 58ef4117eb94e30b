//! Sampled load trajectories, their classification, and cost quadrature.
//!
//! A trajectory stores the load `f_alpha` on a uniform time grid; the load on
//! the other path is implicit (`f_beta = 1 - f_alpha`), so unit demand is
//! conserved exactly. Turning points (times where the *stale* loads balance)
//! are carried as annotations because cost analysis must split integrals
//! there.

use std::fmt::Write as _;

use thiserror::Error;

use crate::system::{cost_of, snap_load, Path};

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("classification inconclusive: {0}")]
    Inconclusive(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("window [{a}, {b}] exceeds trajectory span [{lo}, {hi}]")]
    OutOfRange { a: f64, b: f64, lo: f64, hi: f64 },
}

/// How samples interpolate between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// Smooth dynamics; cubic interpolation between samples.
    Smooth,
    /// Piecewise-constant dynamics (mechanism intervals); a sample holds
    /// until the next one.
    Step,
}

/// Long-run behavior of the load imbalance `Delta(t) = |f_alpha - f_beta|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    /// No limit: the imbalance keeps cycling.
    Oscillating,
    /// The imbalance converges to this nonzero limit.
    Stable(f64),
    /// The imbalance converges to zero (Wardrop equilibrium).
    StableEqualLoad,
}

/// A time-indexed load trajectory with uniform step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    t0: f64,
    step: f64,
    loads: Vec<f64>,
    kind: SampleKind,
    /// Constant load before `t0`, used for stale lookups at `t - T < t0`.
    history: f64,
    /// Times where the stale loads balance and the flow direction flips.
    pub turning_points: Vec<f64>,
    pub classification: Option<Classification>,
}

impl Trajectory {
    pub fn from_samples(t0: f64, step: f64, loads: Vec<f64>, kind: SampleKind) -> Self {
        assert!(step > 0.0, "sample step must be positive");
        assert!(loads.len() >= 2, "a trajectory needs at least two samples");
        let history = loads[0];
        let loads = loads.into_iter().map(snap_load).collect();
        Trajectory {
            t0,
            step,
            loads,
            kind,
            history,
            turning_points: Vec::new(),
            classification: None,
        }
    }

    /// Samples a closed-form load function on `[0, horizon]`.
    pub fn sample_fn(mut f: impl FnMut(f64) -> f64, horizon: f64, step: f64) -> Self {
        let n = (horizon / step).round() as usize;
        let loads = (0..=n).map(|i| f(i as f64 * step)).collect();
        Self::from_samples(0.0, step, loads, SampleKind::Smooth)
    }

    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.step * (self.loads.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }

    pub fn kind(&self) -> SampleKind {
        self.kind
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.step * i as f64
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.loads
            .iter()
            .enumerate()
            .map(|(i, &f)| (self.time(i), f))
    }

    pub fn set_history(&mut self, value: f64) {
        self.history = value;
    }

    /// Load on `alpha` at an arbitrary time inside the span.
    pub fn load_at(&self, t: f64) -> f64 {
        let x = (t - self.t0) / self.step;
        let n = self.loads.len();
        if x <= 0.0 {
            return self.loads[0];
        }
        if x >= (n - 1) as f64 {
            return self.loads[n - 1];
        }
        let j = x.floor() as usize;
        let frac = x - j as f64;
        match self.kind {
            SampleKind::Step => self.loads[j],
            SampleKind::Smooth => {
                if frac < 1e-12 {
                    self.loads[j]
                } else {
                    cubic_interpolate(&self.loads, j, frac)
                }
            }
        }
    }

    /// Load perceived at time `t` by an observer with staleness `t_stale`;
    /// before the trajectory starts the constant history value applies.
    pub fn stale_load(&self, t_stale: f64, t: f64) -> f64 {
        let s = t - t_stale;
        if s < self.t0 {
            self.history
        } else {
            self.load_at(s)
        }
    }

    /// Cost of a path at time `t` for steepness `p`.
    pub fn cost_at(&self, path: Path, p: f64, t: f64) -> f64 {
        cost_of(path.load(self.load_at(t)), p)
    }

    /// Imbalance `Delta(t) = |f_alpha - f_beta| = |2 f_alpha - 1|`.
    pub fn delta_at(&self, t: f64) -> f64 {
        (2.0 * self.load_at(t) - 1.0).abs()
    }

    /// Detects turning points from the samples: times where the load crosses
    /// the balance point, shifted by the staleness delay. Integrators that
    /// locate flip events exactly should set annotations directly instead.
    pub fn annotate_turning_points(&mut self, t_stale: f64) {
        let mut points = Vec::new();
        let end = self.t_end();
        for i in 1..self.loads.len() {
            let (a, b) = (self.loads[i - 1] - 0.5, self.loads[i] - 0.5);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            if a.signum() != b.signum() {
                let frac = a / (a - b);
                let cross = self.time(i - 1) + frac * self.step;
                let tp = cross + t_stale;
                if tp <= end {
                    points.push(tp);
                }
            }
        }
        self.turning_points = points;
    }

    /// CSV rows in the common schema `t,f_alpha,f_beta,c_alpha,c_beta`.
    pub fn to_csv(&self, p: f64) -> String {
        let mut out = String::from("t,f_alpha,f_beta,c_alpha,c_beta\n");
        for (t, f) in self.samples() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                t,
                f,
                1.0 - f,
                cost_of(f, p),
                cost_of(1.0 - f, p)
            );
        }
        out
    }
}

/// Four-point Lagrange interpolation at `j + frac`, `frac` in `(0, 1)`.
/// Falls back to the available neighbors at the ends of the grid.
pub(crate) fn cubic_interpolate(values: &[f64], j: usize, frac: f64) -> f64 {
    let n = values.len();
    debug_assert!(j + 1 < n);
    let i0 = if j == 0 { 0 } else { j - 1 }.min(n.saturating_sub(4));
    let x = j as f64 + frac - i0 as f64;
    let y = &values[i0..(i0 + 4).min(n)];
    if y.len() < 4 {
        // Tiny trajectory: linear between the bracketing samples.
        return values[j] * (1.0 - frac) + values[j + 1] * frac;
    }
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

/// Classifies the long-run imbalance of a trajectory.
///
/// The verdict is read off the final `tail_fraction` of the horizon: the
/// system is stable at equal load when the imbalance stays below `delta`
/// there, stable at `Delta*` when the imbalance has settled (variation below
/// `delta`) at a nonzero level, and oscillating when the tail still contains
/// turning points. A tail with neither is inconclusive: the horizon ended
/// before the behavior revealed itself.
pub fn classify(
    traj: &Trajectory,
    delta: f64,
    tail_fraction: f64,
) -> Result<Classification, ClassifyError> {
    assert!(delta > 0.0 && tail_fraction > 0.0 && tail_fraction <= 1.0);
    let span = traj.t_end() - traj.t_start();
    let tail_start = traj.t_end() - tail_fraction * span;
    let tail: Vec<f64> = traj
        .samples()
        .filter(|&(t, _)| t >= tail_start)
        .map(|(_, f)| (2.0 * f - 1.0).abs())
        .collect();
    if tail.len() < 4 {
        return Err(ClassifyError::Inconclusive(format!(
            "tail holds only {} samples",
            tail.len()
        )));
    }
    let sup = tail.iter().cloned().fold(0.0, f64::max);
    if sup < delta {
        return Ok(Classification::StableEqualLoad);
    }
    let inf = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    if sup - inf < delta {
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        return if mean >= delta {
            Ok(Classification::Stable(mean))
        } else {
            Ok(Classification::StableEqualLoad)
        };
    }
    let tail_turns = traj
        .turning_points
        .iter()
        .filter(|&&tp| tp >= tail_start)
        .count();
    if tail_turns >= 2 {
        // Cycling requires a sustained envelope: a decaying one is a
        // converging system whose horizon ended too early. The envelope is
        // read from the last two imbalance peaks of the whole trajectory
        // (tail-only scans lose peaks that sit on the window boundary).
        let all: Vec<f64> = traj.loads().iter().map(|f| (2.0 * f - 1.0).abs()).collect();
        let mut peaks = Vec::new();
        for i in 1..all.len() - 1 {
            if all[i] > all[i - 1] && all[i] >= all[i + 1] && all[i] > 1e-9 {
                peaks.push(all[i]);
            }
        }
        if peaks.len() >= 2 {
            let ratio = peaks[peaks.len() - 1] / peaks[peaks.len() - 2];
            if ratio >= 0.99 {
                return Ok(Classification::Oscillating);
            }
            return Err(ClassifyError::Inconclusive(format!(
                "imbalance peaks still decaying (ratio {ratio:.4}) at the horizon"
            )));
        }
        return Err(ClassifyError::Inconclusive(
            "turning points in the tail but no measurable envelope".into(),
        ));
    }
    let monotone = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12)
        || tail.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    Err(ClassifyError::Inconclusive(if monotone {
        "imbalance still drifting monotonically at the horizon".to_string()
    } else {
        format!("tail has {tail_turns} turning points and a non-monotone envelope")
    }))
}

/// Fourth-order cumulative integral of a path cost over the sample grid.
///
/// Supports O(1) window queries `int_a^b c_pi(s) ds` for arbitrary
/// endpoints inside the span, which keeps the nested strategy-cost
/// integrals affordable. Step trajectories integrate exactly as staircase
/// functions.
pub struct CumulativeCost<'a> {
    traj: &'a Trajectory,
    path: Path,
    p: f64,
    prefix: Vec<f64>,
}

impl<'a> CumulativeCost<'a> {
    pub fn new(traj: &'a Trajectory, path: Path, p: f64) -> Self {
        let n = traj.loads.len();
        let mut prefix = Vec::with_capacity(n);
        prefix.push(0.0);
        let h = traj.step;
        let mut acc = 0.0;
        for j in 0..n - 1 {
            let cell = match traj.kind {
                SampleKind::Step => h * cost_of(path.load(traj.loads[j]), p),
                SampleKind::Smooth => {
                    let c0 = cost_of(path.load(traj.loads[j]), p);
                    let c1 = cost_of(path.load(traj.loads[j + 1]), p);
                    let fm = cubic_interpolate(&traj.loads, j, 0.5);
                    let cm = cost_of(path.load(fm), p);
                    h / 6.0 * (c0 + 4.0 * cm + c1)
                }
            };
            acc += cell;
            prefix.push(acc);
        }
        CumulativeCost {
            traj,
            path,
            p,
            prefix,
        }
    }

    fn cost_at(&self, t: f64) -> f64 {
        cost_of(self.path.load(self.traj.load_at(t)), self.p)
    }

    /// `int_{t_start}^{t} c_pi(s) ds`.
    pub fn query(&self, t: f64) -> f64 {
        let x = (t - self.traj.t0) / self.traj.step;
        let n = self.prefix.len();
        let j = (x.floor() as usize).min(n - 2);
        let base = self.prefix[j];
        let tj = self.traj.time(j);
        let d = t - tj;
        if d <= 0.0 {
            return base;
        }
        match self.traj.kind {
            SampleKind::Step => base + d * self.cost_at(tj),
            SampleKind::Smooth => {
                let c0 = self.cost_at(tj);
                let cm = self.cost_at(tj + 0.5 * d);
                let c1 = self.cost_at(t);
                base + d / 6.0 * (c0 + 4.0 * cm + c1)
            }
        }
    }

    /// `int_a^b c_pi(s) ds` with a domain check.
    pub fn window(&self, a: f64, b: f64) -> Result<f64, WindowError> {
        let (lo, hi) = (self.traj.t_start(), self.traj.t_end());
        if a < lo - 1e-9 || b > hi + 1e-9 || b < a {
            return Err(WindowError::OutOfRange { a, b, lo, hi });
        }
        Ok(self.query(b) - self.query(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ramp() -> Trajectory {
        Trajectory::sample_fn(|t| 0.5 + 0.4 * (t / 10.0), 10.0, 0.01)
    }

    #[test]
    fn loads_are_conserved_and_clamped() {
        let traj = Trajectory::from_samples(
            0.0,
            0.1,
            vec![0.5, 1.0 + 5e-13, -5e-13, 0.25],
            SampleKind::Smooth,
        );
        for (_, f) in traj.samples() {
            assert!((0.0..=1.0).contains(&f));
            let beta = 1.0 - f;
            assert_eq!(f + beta, 1.0);
        }
    }

    #[test]
    fn interpolation_reproduces_smooth_functions() {
        let traj = Trajectory::sample_fn(|t| 0.5 + 0.3 * (0.7 * t).sin(), 10.0, 0.01);
        for i in 0..200 {
            let t = 0.013 + f64::from(i) * 0.049;
            let expect = 0.5 + 0.3 * (0.7 * t).sin();
            assert!((traj.load_at(t) - expect).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn step_trajectories_hold_their_value() {
        let traj =
            Trajectory::from_samples(0.0, 1.0, vec![0.8, 0.8, 0.6, 0.6, 0.5], SampleKind::Step);
        assert_eq!(traj.load_at(0.5), 0.8);
        assert_eq!(traj.load_at(1.99), 0.8);
        assert_eq!(traj.load_at(2.0), 0.6);
        assert_eq!(traj.load_at(2.7), 0.6);
    }

    #[test]
    fn stale_lookup_uses_history_before_start() {
        let mut traj = ramp();
        traj.set_history(0.5);
        assert_eq!(traj.stale_load(2.0, 1.0), 0.5);
        assert_relative_eq!(traj.stale_load(2.0, 3.0), traj.load_at(1.0));
    }

    #[test]
    fn turning_point_detection_finds_balance_crossings() {
        // Load crosses 1/2 at t = 2 and t = 6; with staleness 1 the turning
        // points are at 3 and 7.
        let mut traj = Trajectory::sample_fn(
            |t| 0.5 + 0.2 * (std::f64::consts::PI * (t - 2.0) / 4.0).sin(),
            10.0,
            0.001,
        );
        traj.annotate_turning_points(1.0);
        assert_eq!(traj.turning_points.len(), 2);
        assert_relative_eq!(traj.turning_points[0], 3.0, epsilon = 1e-6);
        assert_relative_eq!(traj.turning_points[1], 7.0, epsilon = 1e-6);
    }

    #[test]
    fn classify_stable_equal_load() {
        let traj = Trajectory::sample_fn(|t| 0.5 + 0.4 * (-t).exp(), 40.0, 0.01);
        assert_eq!(
            classify(&traj, 1e-3, 0.25).unwrap(),
            Classification::StableEqualLoad
        );
    }

    #[test]
    fn classify_stable_at_nonzero_imbalance() {
        let traj = Trajectory::sample_fn(|t| 0.7 + 0.2 * (-t).exp(), 40.0, 0.01);
        match classify(&traj, 1e-3, 0.25).unwrap() {
            Classification::Stable(d) => assert_relative_eq!(d, 0.4, epsilon = 1e-3),
            other => panic!("expected Stable, got {other:?}"),
        }
    }

    #[test]
    fn classify_oscillating_needs_tail_turning_points() {
        let mut traj = Trajectory::sample_fn(|t| 0.5 + 0.3 * (2.0 * t).sin(), 40.0, 0.01);
        traj.annotate_turning_points(0.5);
        assert_eq!(
            classify(&traj, 1e-3, 0.25).unwrap(),
            Classification::Oscillating
        );
    }

    #[test]
    fn classify_flags_short_horizons() {
        // Still drifting at the horizon: no verdict.
        let traj = Trajectory::sample_fn(|t| 0.9 - 0.01 * t, 10.0, 0.01);
        assert!(matches!(
            classify(&traj, 1e-3, 0.25),
            Err(ClassifyError::Inconclusive(_))
        ));
    }

    #[test]
    fn cumulative_cost_matches_analytic_integral() {
        // f(t) = 0.5 + 0.4 t/10 on [0,10], p = 2:
        // int_a^b f^2 dt has a closed form; check a generic window.
        let traj = ramp();
        let cum = CumulativeCost::new(&traj, Path::Alpha, 2.0);
        let anti = |t: f64| {
            let u = 0.5 + 0.04 * t;
            u * u * u / (3.0 * 0.04)
        };
        let (a, b) = (1.234, 8.766);
        assert_relative_eq!(
            cum.window(a, b).unwrap(),
            anti(b) - anti(a),
            epsilon = 1e-10
        );
        // And the implicit beta path.
        let cumb = CumulativeCost::new(&traj, Path::Beta, 2.0);
        let antib = |t: f64| {
            let u = 0.5 - 0.04 * t;
            -u * u * u / (3.0 * 0.04)
        };
        assert_relative_eq!(
            cumb.window(a, b).unwrap(),
            antib(b) - antib(a),
            epsilon = 1e-10
        );
    }

    #[test]
    fn cumulative_cost_is_exact_for_step_trajectories() {
        let traj =
            Trajectory::from_samples(0.0, 1.0, vec![0.8, 0.8, 0.6, 0.6, 0.5], SampleKind::Step);
        let cum = CumulativeCost::new(&traj, Path::Alpha, 1.0);
        assert_relative_eq!(cum.window(0.0, 2.0).unwrap(), 1.6, epsilon = 1e-12);
        assert_relative_eq!(
            cum.window(1.5, 3.5).unwrap(),
            0.4 + 0.6 + 0.3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn window_rejects_out_of_span_requests() {
        let traj = ramp();
        let cum = CumulativeCost::new(&traj, Path::Alpha, 1.0);
        assert!(cum.window(-1.0, 2.0).is_err());
        assert!(cum.window(5.0, 11.0).is_err());
    }

    #[test]
    fn csv_has_the_common_schema() {
        let traj = Trajectory::from_samples(0.0, 0.5, vec![0.75, 0.5], SampleKind::Smooth);
        let csv = traj.to_csv(2.0);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,f_alpha,f_beta,c_alpha,c_beta");
        assert_eq!(lines.next().unwrap(), "0,0.75,0.25,0.5625,0.0625");
    }
}
