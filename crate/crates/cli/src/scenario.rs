//! Scenario files: plain-text key-value sections describing one experiment.
//!
//! ```text
//! [system]            # the parallel-path system
//! r = 0.3
//! p = 1
//! T = 2
//! A0 = amplitude      # a number, or "amplitude" for the oscillation peak A
//!
//! [profile]           # strategy -> adoption share, summing to 1
//! greedy = 1
//!
//! [run]
//! mode = closed-form  # closed-form | dde | agents | floss | cross
//! horizon = 20
//! step = 0.002
//! ```
//!
//! Optional sections parameterize the chosen mode: `[dynamics]` (dde),
//! `[agents]`, `[floss]`, `[cross]`, and `[pss]` for the equilibrium
//! analyses. Unknown sections or keys are rejected.

use std::collections::BTreeMap;

use parapath::closed_form::oscillation_params;
use parapath::cross::CrossConfig;
use parapath::floss::FlossConfig;
use parapath::system::{ParallelPathSystem, Path};

#[derive(Debug)]
pub struct ScenarioError(pub String);

impl std::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "scenario error: {}", self.0)
    }
}

impl std::error::Error for ScenarioError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    ClosedForm,
    Dde,
    Agents,
    Floss,
    Cross,
}

#[derive(Debug, Clone)]
pub struct RunSection {
    pub mode: Mode,
    pub horizon: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub enum DynamicsSection {
    Greedy,
    Convergent { mu: Vec<f64> },
    Mate { gamma: Vec<f64> },
    Mixed { q: f64 },
}

#[derive(Debug, Clone)]
pub struct AgentsSection {
    pub n: usize,
    pub sample_step: f64,
    pub convergent_mu: f64,
}

#[derive(Debug, Clone)]
pub enum PssSection {
    Deviation {
        incumbent_mu: f64,
        candidates: Vec<String>,
        reeval: f64,
    },
    Comparison {
        mu: f64,
        reeval_grid: Vec<f64>,
    },
    Slope {
        q: f64,
        reeval: f64,
    },
}

#[derive(Debug)]
pub struct Scenario {
    pub system: ParallelPathSystem,
    pub run: RunSection,
    pub dynamics: Option<DynamicsSection>,
    pub agents: Option<AgentsSection>,
    pub floss: Option<FlossConfig>,
    pub cross: Option<CrossConfig>,
    pub pss: Option<PssSection>,
}

type Section = BTreeMap<String, String>;

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>, ScenarioError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if sections.contains_key(&name) {
                return err(format!("line {}: duplicate section [{name}]", lineno + 1));
            }
            sections.insert(name.clone(), Section::new());
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!(
                "line {}: expected `key = value`, got {raw:?}",
                lineno + 1
            ));
        };
        let Some(section) = current.as_ref() else {
            return err(format!("line {}: key outside any section", lineno + 1));
        };
        let key = key.trim().to_string();
        let entry = sections.get_mut(section).unwrap();
        if entry.contains_key(&key) {
            return err(format!(
                "line {}: duplicate key {key:?} in [{section}]",
                lineno + 1
            ));
        }
        entry.insert(key, value.trim().to_string());
    }
    Ok(sections)
}

struct SectionReader {
    name: String,
    entries: Section,
}

impl SectionReader {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<f64>, ScenarioError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ScenarioError(format!("[{}] {key}: not a number: {v:?}", self.name))),
        }
    }

    fn need_f64(&mut self, key: &str) -> Result<f64, ScenarioError> {
        self.take_f64(key)?
            .ok_or_else(|| ScenarioError(format!("[{}] missing key {key:?}", self.name)))
    }

    fn take_f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ScenarioError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => {
                let mut out = Vec::new();
                for part in v.split(',') {
                    out.push(part.trim().parse().map_err(|_| {
                        ScenarioError(format!("[{}] {key}: bad list entry {part:?}", self.name))
                    })?);
                }
                Ok(Some(out))
            }
        }
    }

    fn finish(self) -> Result<(), ScenarioError> {
        if let Some(key) = self.entries.keys().next() {
            return err(format!("[{}] unknown key {key:?}", self.name));
        }
        Ok(())
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut sections = parse_sections(text)?;
        let mut reader = |name: &str| -> Option<SectionReader> {
            sections.remove(name).map(|entries| SectionReader {
                name: name.to_string(),
                entries,
            })
        };

        // [system] + [profile]
        let mut sys_section =
            reader("system").ok_or_else(|| ScenarioError("missing [system] section".into()))?;
        let r = sys_section.need_f64("r")?;
        let p = sys_section.need_f64("p")?;
        let t_stale = sys_section.need_f64("T")?;
        let a0_raw = sys_section
            .take("A0")
            .ok_or_else(|| ScenarioError("[system] missing key \"A0\"".into()))?;
        sys_section.finish()?;
        let a0 = if a0_raw == "amplitude" {
            oscillation_params(r, t_stale)
                .map_err(|e| ScenarioError(format!("A0 = amplitude: {e}")))?
                .amplitude
        } else {
            a0_raw
                .parse()
                .map_err(|_| ScenarioError(format!("[system] A0: not a number: {a0_raw:?}")))?
        };

        let profile_section =
            reader("profile").ok_or_else(|| ScenarioError("missing [profile] section".into()))?;
        let mut profile = BTreeMap::new();
        for (key, value) in &profile_section.entries {
            let share: f64 = value
                .parse()
                .map_err(|_| ScenarioError(format!("[profile] {key}: not a number: {value:?}")))?;
            profile.insert(key.clone(), share);
        }
        let system = ParallelPathSystem::new(r, p, t_stale, a0, profile)
            .map_err(|e| ScenarioError(e.to_string()))?;

        // [run]
        let mut run_section =
            reader("run").ok_or_else(|| ScenarioError("missing [run] section".into()))?;
        let mode = match run_section
            .take("mode")
            .ok_or_else(|| ScenarioError("[run] missing key \"mode\"".into()))?
            .as_str()
        {
            "closed-form" => Mode::ClosedForm,
            "dde" => Mode::Dde,
            "agents" => Mode::Agents,
            "floss" => Mode::Floss,
            "cross" => Mode::Cross,
            other => return err(format!("[run] unknown mode {other:?}")),
        };
        let horizon = run_section.need_f64("horizon")?;
        let step = run_section.take_f64("step")?.unwrap_or(t_stale / 1000.0);
        run_section.finish()?;
        if !(horizon > 0.0) {
            return err("[run] horizon must be positive");
        }
        if !(step > 0.0) {
            return err("[run] step must be positive");
        }
        let run = RunSection {
            mode,
            horizon,
            step,
        };

        // [dynamics]
        let dynamics = match reader("dynamics") {
            None => None,
            Some(mut s) => {
                let kind = s
                    .take("kind")
                    .ok_or_else(|| ScenarioError("[dynamics] missing key \"kind\"".into()))?;
                let parsed = match kind.as_str() {
                    "greedy" => DynamicsSection::Greedy,
                    "convergent" => {
                        let mu = s
                            .take_f64_list("mu")?
                            .ok_or_else(|| ScenarioError("[dynamics] missing key \"mu\"".into()))?;
                        for &m in &mu {
                            if !(0.0..=1.0).contains(&m) {
                                return err(format!("[dynamics] mu must lie in [0, 1], got {m}"));
                            }
                        }
                        DynamicsSection::Convergent { mu }
                    }
                    "mate" => {
                        let gamma = s.take_f64_list("gamma")?.ok_or_else(|| {
                            ScenarioError("[dynamics] missing key \"gamma\"".into())
                        })?;
                        for &g in &gamma {
                            if g < 0.0 {
                                return err(format!("[dynamics] gamma must be >= 0, got {g}"));
                            }
                        }
                        DynamicsSection::Mate { gamma }
                    }
                    "mixed" => {
                        let q = s.need_f64("q")?;
                        if !(0.0..=1.0).contains(&q) {
                            return err(format!("[dynamics] q must lie in [0, 1], got {q}"));
                        }
                        DynamicsSection::Mixed { q }
                    }
                    other => return err(format!("[dynamics] unknown kind {other:?}")),
                };
                s.finish()?;
                Some(parsed)
            }
        };

        // [agents]
        let agents = match reader("agents") {
            None => None,
            Some(mut s) => {
                let n = s.need_f64("n")? as usize;
                let sample_step = s.take_f64("sample_step")?.unwrap_or(0.01);
                let convergent_mu = s.take_f64("mu")?.unwrap_or(0.5);
                s.finish()?;
                Some(AgentsSection {
                    n,
                    sample_step,
                    convergent_mu,
                })
            }
        };

        // [floss]
        let floss = match reader("floss") {
            None => None,
            Some(mut s) => {
                let interval = s.need_f64("L")?;
                let c_attempt = s.need_f64("c_a")?;
                let c_penalty = s
                    .take_f64("c_p")?
                    .unwrap_or(parapath::floss::PENALTY_SENTINEL);
                let kappa = s.need_f64("kappa")?;
                let delta_stop = s.need_f64("delta_stop")?;
                let initial_flows = s.take_f64("initial_flows")?.map(|v| v as u64);
                s.finish()?;
                let mut cfg = FlossConfig::new(interval, c_attempt, kappa, delta_stop);
                cfg.c_penalty = c_penalty;
                cfg.initial_flows = initial_flows;
                Some(cfg)
            }
        };

        // [cross]
        let cross = match reader("cross") {
            None => None,
            Some(mut s) => {
                let trial = s.need_f64("L")?;
                let epsilon = s.need_f64("eps")?;
                let c_attempt = s.need_f64("c_a")?;
                let c_hash = s.need_f64("c_h")?;
                let sigma_split = s.need_f64("sigma_split")?;
                let backup_share = s.take_f64("backup_share")?.unwrap_or(0.0);
                let failures = match s.take("failures") {
                    None => Vec::new(),
                    Some(v) => parse_failures(&v)?,
                };
                s.finish()?;
                let mut cfg = CrossConfig::new(trial, epsilon, c_attempt, c_hash, sigma_split);
                cfg.backup_share = backup_share;
                cfg.failures = failures;
                Some(cfg)
            }
        };

        // [pss]
        let pss = match reader("pss") {
            None => None,
            Some(mut s) => {
                let analysis = s
                    .take("analysis")
                    .ok_or_else(|| ScenarioError("[pss] missing key \"analysis\"".into()))?;
                let parsed = match analysis.as_str() {
                    "deviation" => {
                        let incumbent_mu = s.need_f64("mu")?;
                        let reeval = s.need_f64("R")?;
                        let candidates = s
                            .take("candidates")
                            .ok_or_else(|| {
                                ScenarioError("[pss] missing key \"candidates\"".into())
                            })?
                            .split(',')
                            .map(|c| c.trim().to_string())
                            .collect();
                        PssSection::Deviation {
                            incumbent_mu,
                            candidates,
                            reeval,
                        }
                    }
                    "comparison" => {
                        let mu = s.need_f64("mu")?;
                        let grid = s
                            .take("R")
                            .ok_or_else(|| ScenarioError("[pss] missing key \"R\"".into()))?;
                        PssSection::Comparison {
                            mu,
                            reeval_grid: parse_grid(&grid)?,
                        }
                    }
                    "slope" => {
                        let q = s.need_f64("q")?;
                        let reeval = s.need_f64("R")?;
                        PssSection::Slope { q, reeval }
                    }
                    other => return err(format!("[pss] unknown analysis {other:?}")),
                };
                s.finish()?;
                Some(parsed)
            }
        };

        if let Some(name) = sections.keys().next() {
            return err(format!("unknown section [{name}]"));
        }

        // Mode-specific requirements.
        match run.mode {
            Mode::Dde if dynamics.is_none() => {
                return err("[run] mode = dde needs a [dynamics] section")
            }
            Mode::Agents if agents.is_none() => {
                return err("[run] mode = agents needs an [agents] section")
            }
            Mode::Floss if floss.is_none() => {
                return err("[run] mode = floss needs a [floss] section")
            }
            Mode::Cross if cross.is_none() => {
                return err("[run] mode = cross needs a [cross] section")
            }
            _ => {}
        }

        Ok(Scenario {
            system,
            run,
            dynamics,
            agents,
            floss,
            cross,
            pss,
        })
    }
}

fn parse_failures(text: &str) -> Result<Vec<(Path, f64)>, ScenarioError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let Some((path, at)) = part.split_once('@') else {
            return err(format!("failures: expected path@time, got {part:?}"));
        };
        let path = match path.trim() {
            "alpha" => Path::Alpha,
            "beta" => Path::Beta,
            other => return err(format!("failures: unknown path {other:?}")),
        };
        let at: f64 = at
            .trim()
            .parse()
            .map_err(|_| ScenarioError(format!("failures: bad time in {part:?}")))?;
        out.push((path, at));
    }
    Ok(out)
}

/// Grid syntax: either a comma list (`0.1,0.2,0.3`) or `start:end:count`.
fn parse_grid(text: &str) -> Result<Vec<f64>, ScenarioError> {
    if let Some((start, rest)) = text.split_once(':') {
        let Some((end, count)) = rest.split_once(':') else {
            return err(format!("grid: expected start:end:count, got {text:?}"));
        };
        let start: f64 = start
            .trim()
            .parse()
            .map_err(|_| ScenarioError("grid: bad start".into()))?;
        let end: f64 = end
            .trim()
            .parse()
            .map_err(|_| ScenarioError("grid: bad end".into()))?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| ScenarioError("grid: bad count".into()))?;
        if count < 2 || end <= start {
            return err("grid: need count >= 2 and end > start");
        }
        return Ok((0..count)
            .map(|k| start + (end - start) * k as f64 / (count - 1) as f64)
            .collect());
    }
    let mut out = Vec::new();
    for part in text.split(',') {
        out.push(
            part.trim()
                .parse()
                .map_err(|_| ScenarioError(format!("grid: bad entry {part:?}")))?,
        );
    }
    Ok(out)
}
