//! Subcommand implementations: scenario dispatch and file emission.

use std::fmt::Write as _;
use std::path::{Path as FsPath, PathBuf};

use parapath::agents::{
    run_agents, AgentSimConfig, AgentStrategy, CrossAgentConfig, FlossAgentConfig, Mechanism,
};
use parapath::closed_form::{
    closed_form_turning_points, mixed_profile_closed_form, oscillation_params,
};
use parapath::cross::{cross_incentive_check, simulate_cross, CrossRun};
use parapath::dde::{
    convergent_dynamics, greedy_dynamics, integrate, mate_dynamics, mixed_dynamics, History,
};
use parapath::floss::{floss_incentive_check, simulate_floss, FlossRun};
use parapath::strategy::{
    compare_greedy_vs_convergent, comparison_to_csv, mixed_strategy_slope, pss_deviation_test,
    Strategy,
};
use parapath::system::{cost_of, ParallelPathSystem};
use parapath::trajectory::Trajectory;

use crate::error::CliError;
use crate::scenario::{DynamicsSection, Mode, PssSection, Scenario};
use crate::OutputFormat;

pub fn cmd_params(rate: f64, staleness: f64) -> Result<(), CliError> {
    let o = oscillation_params(rate, staleness).map_err(|e| CliError::Validation(e.to_string()))?;
    println!("A = {}", o.amplitude);
    println!("W = {}", o.half_period);
    println!("period = {}", 2.0 * o.half_period);
    Ok(())
}

/// Runs the scenario's simulation mode and writes one output file per run.
pub fn cmd_simulate(
    scenario: &Scenario,
    stem: &str,
    out: &FsPath,
    seed: u64,
    format: OutputFormat,
) -> Result<Vec<PathBuf>, CliError> {
    let sys = &scenario.system;
    let run = &scenario.run;
    match run.mode {
        Mode::ClosedForm => {
            let q = greedy_share_of_profile(sys)?;
            let mut traj = Trajectory::sample_fn(
                |t| mixed_profile_closed_form(q, sys, t).unwrap_or(0.5),
                run.horizon,
                run.step,
            );
            traj.set_history(sys.a0);
            traj.turning_points = closed_form_turning_points(q, sys, run.horizon)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let file = write_trajectory(&traj, sys.p, out, stem, format)?;
            Ok(vec![file])
        }
        Mode::Dde => {
            let history = History::constant(sys.a0).map_err(CliError::from_dde)?;
            let variants: Vec<(String, parapath::dde::Dynamics)> =
                match scenario.dynamics.as_ref().expect("validated") {
                    DynamicsSection::Greedy => vec![("greedy".into(), greedy_dynamics())],
                    DynamicsSection::Convergent { mu } => mu
                        .iter()
                        .map(|&m| (format!("mu{m}"), convergent_dynamics(m)))
                        .collect(),
                    DynamicsSection::Mate { gamma } => gamma
                        .iter()
                        .map(|&g| (format!("gamma{g}"), mate_dynamics(g)))
                        .collect(),
                    DynamicsSection::Mixed { q } => vec![(format!("q{q}"), mixed_dynamics(*q))],
                };
            // Sweeps fan out over a scoped worker pool; one output per run.
            let results: Vec<Result<(String, Trajectory), CliError>> =
                std::thread::scope(|scope| {
                    let handles: Vec<_> = variants
                        .iter()
                        .map(|(tag, dynamics)| {
                            let history = &history;
                            scope.spawn(move || {
                                integrate(sys, dynamics, history, run.horizon, run.step)
                                    .map(|traj| (tag.clone(), traj))
                                    .map_err(CliError::from_dde)
                            })
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("worker panicked"))
                        .collect()
                });
            let single = results.len() == 1;
            let mut files = Vec::new();
            for result in results {
                let (tag, traj) = result?;
                let name = if single {
                    stem.to_string()
                } else {
                    format!("{stem}-{tag}")
                };
                files.push(write_trajectory(&traj, sys.p, out, &name, format)?);
            }
            Ok(files)
        }
        Mode::Agents => {
            let section = scenario.agents.as_ref().expect("validated");
            let profile = agent_profile(sys, section.convergent_mu)?;
            // Mechanism sections turn on the router-side hooks.
            let mechanism = if let Some(fl) = &scenario.floss {
                let mut m = FlossAgentConfig::new(fl.interval, fl.kappa, fl.delta_stop);
                m.c_attempt = fl.c_attempt;
                Mechanism::Floss(m)
            } else if let Some(cr) = &scenario.cross {
                let mut m = CrossAgentConfig::new(cr.trial, cr.epsilon);
                m.c_attempt = cr.c_attempt;
                m.c_hash = cr.c_hash;
                m.insured_share = cr.backup_share;
                m.failures = cr.failures.clone();
                Mechanism::Cross(m)
            } else {
                Mechanism::None
            };
            let cfg = AgentSimConfig {
                n: section.n,
                profile,
                mechanism,
                horizon: run.horizon,
                sample_step: section.sample_step,
                log_reevals: false,
            };
            let agent_run = run_agents(sys, &cfg, seed).map_err(|e| match e {
                parapath::agents::AgentError::TooFewFlows(_)
                | parapath::agents::AgentError::BadProfile(_)
                | parapath::agents::AgentError::BadParameter(_) => {
                    CliError::Validation(e.to_string())
                }
            })?;
            let file = write_trajectory(&agent_run.trajectory, sys.p, out, stem, format)?;
            let log_file = out.join(format!("{stem}-events.log"));
            std::fs::write(&log_file, agent_run.log.to_text())
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok(vec![file, log_file])
        }
        Mode::Floss => {
            let cfg = scenario.floss.as_ref().expect("validated");
            let floss_run = simulate_floss(sys, cfg, run.horizon, seed)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let file = write_floss(&floss_run, sys.p, cfg.interval, out, stem)?;
            Ok(vec![file])
        }
        Mode::Cross => {
            let cfg = scenario.cross.as_ref().expect("validated");
            let cross_run = simulate_cross(sys, cfg, run.horizon, seed)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let file = write_cross(&cross_run, sys.p, cfg.trial, out, stem)?;
            Ok(vec![file])
        }
    }
}

/// Mechanism run plus its incentive-check report.
pub fn cmd_mechanism(
    scenario: &Scenario,
    stem: &str,
    out: &FsPath,
    seed: u64,
) -> Result<Vec<PathBuf>, CliError> {
    let sys = &scenario.system;
    let horizon = scenario.run.horizon;
    match scenario.run.mode {
        Mode::Floss => {
            let cfg = scenario.floss.as_ref().ok_or_else(|| {
                CliError::Validation("mechanism run needs a [floss] section".into())
            })?;
            let run = simulate_floss(sys, cfg, horizon, seed)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let csv = write_floss(&run, sys.p, cfg.interval, out, stem)?;
            let report = floss_incentive_check(sys, cfg, &run)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let report_file = out.join(format!("{stem}-incentives.json"));
            std::fs::write(
                &report_file,
                serde_json::to_string_pretty(&report).expect("serializable"),
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok(vec![csv, report_file])
        }
        Mode::Cross => {
            let cfg = scenario.cross.as_ref().ok_or_else(|| {
                CliError::Validation("mechanism run needs a [cross] section".into())
            })?;
            let run = simulate_cross(sys, cfg, horizon, seed)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let csv = write_cross(&run, sys.p, cfg.trial, out, stem)?;
            let bound = cfg.trial - sys.t_stale;
            let omegas: Vec<f64> = (1..=100).map(|k| bound * f64::from(k) / 50.0).collect();
            let report = cross_incentive_check(sys, cfg, &run, &omegas)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let report_file = out.join(format!("{stem}-incentives.json"));
            std::fs::write(
                &report_file,
                serde_json::to_string_pretty(&report).expect("serializable"),
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok(vec![csv, report_file])
        }
        _ => Err(CliError::Validation(
            "mechanism subcommand needs [run] mode = floss or cross".into(),
        )),
    }
}

/// Equilibrium analyses: deviation test, cost comparison, or slope report.
pub fn cmd_pss_test(
    scenario: &Scenario,
    stem: &str,
    out: &FsPath,
    format: Option<OutputFormat>,
) -> Result<Vec<PathBuf>, CliError> {
    let sys = &scenario.system;
    let section = scenario
        .pss
        .as_ref()
        .ok_or_else(|| CliError::Validation("pss-test needs a [pss] section".into()))?;
    match section {
        PssSection::Deviation {
            incumbent_mu,
            candidates,
            reeval,
        } => {
            let incumbent = Strategy::convergent(*reeval, *incumbent_mu);
            let mut list = Vec::new();
            for name in candidates {
                list.push(match name.as_str() {
                    "greedy" => Strategy::greedy(*reeval),
                    "antagonist" => Strategy::antagonist(*reeval),
                    other => {
                        return Err(CliError::Validation(format!(
                            "unknown candidate strategy {other:?}"
                        )))
                    }
                });
            }
            let report = pss_deviation_test(sys, &incumbent, &list).map_err(CliError::from_cost)?;
            let file = out.join(format!("{stem}-pss.json"));
            std::fs::write(
                &file,
                serde_json::to_string_pretty(&report).expect("serializable"),
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok(vec![file])
        }
        PssSection::Comparison { mu, reeval_grid } => {
            let rows =
                compare_greedy_vs_convergent(sys, *mu, reeval_grid).map_err(CliError::from_cost)?;
            let file = match format.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Csv => {
                    let file = out.join(format!("{stem}-comparison.csv"));
                    std::fs::write(&file, comparison_to_csv(&rows))
                        .map_err(|e| CliError::Runtime(e.to_string()))?;
                    file
                }
                OutputFormat::Json => {
                    let file = out.join(format!("{stem}-comparison.json"));
                    std::fs::write(
                        &file,
                        serde_json::to_string_pretty(&rows).expect("serializable"),
                    )
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                    file
                }
            };
            Ok(vec![file])
        }
        PssSection::Slope { q, reeval } => {
            let report = mixed_strategy_slope(*q, sys.r, *reeval, sys.t_stale)
                .map_err(CliError::from_cost)?;
            let file = out.join(format!("{stem}-slope.json"));
            std::fs::write(
                &file,
                serde_json::to_string_pretty(&report).expect("serializable"),
            )
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok(vec![file])
        }
    }
}

fn greedy_share_of_profile(sys: &ParallelPathSystem) -> Result<f64, CliError> {
    let greedy = sys.share("greedy");
    let antagonist = sys.share("antagonist");
    if (greedy + antagonist - 1.0).abs() > 1e-9 {
        return Err(CliError::Validation(
            "closed-form mode needs a greedy/antagonist profile".into(),
        ));
    }
    Ok(greedy)
}

fn agent_profile(
    sys: &ParallelPathSystem,
    convergent_mu: f64,
) -> Result<Vec<(AgentStrategy, f64)>, CliError> {
    let mut profile = Vec::new();
    for (id, &share) in &sys.profile {
        if share == 0.0 {
            continue;
        }
        let strategy = match id.as_str() {
            "greedy" => AgentStrategy::Greedy,
            "antagonist" => AgentStrategy::Antagonist,
            "convergent" => AgentStrategy::Convergent { mu: convergent_mu },
            other => {
                return Err(CliError::Validation(format!(
                    "agents mode cannot play strategy {other:?}"
                )))
            }
        };
        profile.push((strategy, share));
    }
    Ok(profile)
}

fn write_trajectory(
    traj: &Trajectory,
    p: f64,
    out: &FsPath,
    stem: &str,
    format: OutputFormat,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Runtime(e.to_string()))?;
    match format {
        OutputFormat::Csv => {
            let file = out.join(format!("{stem}.csv"));
            std::fs::write(&file, traj.to_csv(p)).map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok(file)
        }
        OutputFormat::Json => {
            let mut t = Vec::new();
            let mut f_alpha = Vec::new();
            for (time, load) in traj.samples() {
                t.push(time);
                f_alpha.push(load);
            }
            let value = serde_json::json!({
                "t": t,
                "f_alpha": f_alpha,
                "p": p,
                "turning_points": traj.turning_points,
            });
            let file = out.join(format!("{stem}.json"));
            std::fs::write(&file, serde_json::to_string(&value).expect("serializable"))
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok(file)
        }
    }
}

fn write_floss(
    run: &FlossRun,
    p: f64,
    interval: f64,
    out: &FsPath,
    stem: &str,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut csv = String::from(
        "t,f_alpha,f_beta,c_alpha,c_beta,interval_index,rho_applied,registered_alpha\n",
    );
    for (t, f) in run.trajectory.samples() {
        let idx = ((t / interval).floor() as usize).min(run.intervals.len() - 1);
        let iv = &run.intervals[idx];
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            t,
            f,
            1.0 - f,
            cost_of(f, p),
            cost_of(1.0 - f, p),
            iv.index,
            iv.rho_applied,
            iv.registered_alpha
        );
    }
    let file = out.join(format!("{stem}.csv"));
    std::fs::write(&file, csv).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(file)
}

fn write_cross(
    run: &CrossRun,
    p: f64,
    trial: f64,
    out: &FsPath,
    stem: &str,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut csv =
        String::from("t,f_alpha,f_beta,c_alpha,c_beta,trial_index,delta_at_trial,backup_share\n");
    for (t, f) in run.trajectory.samples() {
        let idx = ((t / trial).floor() as usize).min(run.trials.len() - 1);
        let tr = &run.trials[idx];
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            t,
            f,
            1.0 - f,
            cost_of(f, p),
            cost_of(1.0 - f, p),
            tr.index,
            tr.delta,
            tr.backup_share
        );
    }
    let file = out.join(format!("{stem}.csv"));
    std::fs::write(&file, csv).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(file)
}
