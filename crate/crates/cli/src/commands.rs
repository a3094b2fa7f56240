use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use gait_impedance::estimator::{constraint_report, ConstraintReport};
use gait_impedance::tuning::PUSHOFF_WINDOW;
use gait_impedance::{
    build_problem, compare_sets, joint_power, load_gait_csv, metrics, multi_start, order_sweep,
    synthesize, trend_report, tune, EstimationProblem, EstimationResult, FitMetrics, GaitCycleData,
    ImpedanceParameters, ProblemOptions, SyntheticSpec, TrendReport, TuningSpec, ValidationReport,
};

use crate::config::RunConfig;
use crate::svg::{line_chart, Series};

pub const DEFAULT_STARTS: usize = 8;
const TREND_GRID: usize = 1001;

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    /// Produced output, but not converged or with constraint violations.
    Violations,
}

/// Exit status and the text to show on stdout.
#[derive(Debug, Clone)]
pub struct Done {
    pub outcome: Outcome,
    pub summary: String,
}

impl Done {
    fn clean(summary: String) -> Self {
        Done {
            outcome: Outcome::Clean,
            summary,
        }
    }

    fn flagged(clean: bool, summary: String) -> Self {
        Done {
            outcome: if clean {
                Outcome::Clean
            } else {
                Outcome::Violations
            },
            summary,
        }
    }
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Clean => 0,
            Outcome::Violations => 2,
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

fn load_data(cfg: &RunConfig) -> Result<GaitCycleData> {
    let path = cfg.require_input()?;
    Ok(load_gait_csv(path, &cfg.schema()?)?)
}

/// Parameters from `--params`, or the published set named by `--set`.
fn load_params(cfg: &RunConfig) -> Result<ImpedanceParameters> {
    match (&cfg.params, cfg.set) {
        (Some(path), _) => read_json(path),
        (None, Some(set)) => Ok(set.params()),
        (None, None) => bail!("--params or --set is required"),
    }
}

fn problem(cfg: &RunConfig, data: GaitCycleData) -> Result<EstimationProblem> {
    let spec = cfg.schedule_spec()?;
    let options = ProblemOptions {
        stiffness_order: cfg.order_k,
        damping_order: cfg.order_d,
        stance_end: cfg.stance_end,
        lipschitz_c: cfg.lipschitz,
        angle_bounds: cfg.angle_bounds(spec.sections())?,
        fit_window: cfg.fit_window()?,
        max_iters: cfg.max_iters,
        ..Default::default()
    };
    Ok(build_problem(data, spec, options)?)
}

fn fmt_angles(angles: &[f64]) -> String {
    angles
        .iter()
        .map(|a| format!("{a:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn constraint_lines(
    out: &mut String,
    validation: &ValidationReport,
    report: Option<&ConstraintReport>,
) {
    let _ = writeln!(out, "constraints (grid {})", validation.grid_n);
    for c in validation.checks() {
        let at = c.phase.map(|t| format!(" at {t:.3}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "  {:<16} {:<9} worst value {:.6e}{at}",
            c.name,
            if c.satisfied { "ok" } else { "VIOLATED" },
            c.worst_value
        );
    }
    if let Some(r) = report {
        let _ = writeln!(
            out,
            "  {:<16} {:<9} margin {:.6} (c = {:.6})",
            "torque rate <= c",
            if r.lipschitz_satisfied {
                "ok"
            } else {
                "VIOLATED"
            },
            r.lipschitz_margin,
            r.lipschitz_c
        );
    }
}

fn trend_lines(out: &mut String, t: &TrendReport) {
    let _ = writeln!(out, "trends");
    let _ = writeln!(
        out,
        "  stiffness peak   {:.4} at {:.3} (start {:.4}, inside stance {}, above start {})",
        t.stiffness_peak.value,
        t.stiffness_peak.phase,
        t.stiffness_at_start,
        t.peak_in_stance,
        t.peak_exceeds_start
    );
    let _ = writeln!(
        out,
        "  swing stiffness  {:.4} (constant)",
        t.swing_stiffness
    );
    let _ = writeln!(
        out,
        "  damping early    max {:.4} at {:.3}; at {:.2}: {:.4}; early > terminal {}",
        t.damping_early_max.value,
        t.damping_early_max.phase,
        t.damping_terminal_probe.phase,
        t.damping_terminal_probe.value,
        t.damping_early_exceeds_terminal
    );
}

fn metric_lines(out: &mut String, m: &FitMetrics) {
    let _ = writeln!(out, "metrics (full cycle)");
    let _ = writeln!(out, "  rmse             {:.6}", m.rmse);
    let _ = writeln!(
        out,
        "  peak torque      {:.4} at {:.3}",
        m.peak_torque.value, m.peak_torque.phase
    );
    let _ = writeln!(
        out,
        "  peak power       {:.4} at {:.3}",
        m.peak_power.value, m.peak_power.phase
    );
    match m.pushoff_phase {
        Some(p) => {
            let _ = writeln!(out, "  push-off         {p:.3}");
        }
        None => {
            let _ = writeln!(
                out,
                "  push-off         no samples in [{}, {}]",
                PUSHOFF_WINDOW.0, PUSHOFF_WINDOW.1
            );
        }
    }
}

fn estimate_report(
    problem: &EstimationProblem,
    result: &EstimationResult,
    starts: usize,
    seed: u64,
) -> Result<String> {
    let mut out = String::new();
    let p = &result.params;
    let window = problem.fit_window;
    let in_window = problem
        .data
        .phase()
        .iter()
        .filter(|&&t| window.contains(t))
        .count();
    let _ = writeln!(
        out,
        "schedule         {} (boundaries {})",
        p.schedule().label().unwrap_or("custom"),
        problem
            .schedule
            .boundaries
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(out, "joint            {}", problem.data.joint());
    let _ = writeln!(
        out,
        "orders           K {}, D {}",
        problem.stiffness_order, problem.damping_order
    );
    let _ = writeln!(out, "stance end       {}", problem.stance_end);
    let _ = writeln!(
        out,
        "fit window       {}:{} ({in_window} samples)",
        window.start, window.end
    );
    let _ = writeln!(out, "starts           {starts} (seed {seed})");
    let _ = writeln!(out, "cost             {:.6}", result.cost);
    let _ = writeln!(
        out,
        "rmse (window)    {:.6}",
        result.cost / (in_window as f64).sqrt()
    );
    let _ = writeln!(out, "iterations       {}", result.iterations);
    let _ = writeln!(out, "converged        {}", result.converged);
    let _ = writeln!(
        out,
        "equilibria_rad   {}",
        fmt_angles(p.schedule().angles())
    );
    constraint_lines(
        &mut out,
        &result.constraint_report.validation,
        Some(&result.constraint_report),
    );
    metric_lines(&mut out, &metrics(p, &problem.data)?);
    trend_lines(&mut out, &trend_report(p, TREND_GRID)?);
    Ok(out)
}

pub fn cmd_estimate(cfg: &RunConfig) -> Result<Done> {
    let problem = problem(cfg, load_data(cfg)?)?;
    let starts = cfg.starts.unwrap_or(DEFAULT_STARTS);
    let result = multi_start(&problem, starts, cfg.seed())?;
    let dir = cfg.out_dir()?;
    write(&dir.join("params.json"), to_json(&result.params)?)?;
    write(&dir.join("result.json"), to_json(&result)?)?;
    write(&dir.join("trace.csv"), result.trace_csv())?;
    let report = estimate_report(&problem, &result, starts, cfg.seed())?;
    write(&dir.join("report.txt"), &report)?;
    Ok(Done::flagged(result.is_clean(), report))
}

pub fn curves_csv(params: &ImpedanceParameters, data: &GaitCycleData) -> Result<String> {
    let tau = params.torque_trajectory(data)?;
    let power = joint_power(&tau, data.velocity())?;
    let mut out = String::from("phase,K,D,theta_eq,tau_model,tau_data,power\n");
    for (i, &t) in data.phase().iter().enumerate() {
        let _ = writeln!(
            out,
            "{t:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            params.stiffness().eval(t)?,
            params.damping().eval(t)?,
            params.schedule().equilibrium_at(t)?,
            tau[i],
            data.torque()[i],
            power[i]
        );
    }
    Ok(out)
}

#[derive(Serialize)]
struct Evaluation {
    metrics: FitMetrics,
    trends: TrendReport,
    validation: ValidationReport,
    constraints: Option<ConstraintReport>,
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Done> {
    let params = load_params(cfg)?;
    let data = load_data(cfg)?;
    let dir = cfg.out_dir()?;
    write(&dir.join("curves.csv"), curves_csv(&params, &data)?)?;

    let constraints = if cfg.set.is_some() || cfg.boundaries.is_some() {
        let problem = problem(cfg, data.clone())?;
        Some(constraint_report(&params, &problem)?)
    } else {
        None
    };
    let evaluation = Evaluation {
        metrics: metrics(&params, &data)?,
        trends: trend_report(&params, TREND_GRID)?,
        validation: params.validate(TREND_GRID)?,
        constraints,
    };
    write(&dir.join("metrics.json"), to_json(&evaluation)?)?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "equilibria_rad   {}",
        fmt_angles(params.schedule().angles())
    );
    constraint_lines(
        &mut text,
        &evaluation.validation,
        evaluation.constraints.as_ref(),
    );
    metric_lines(&mut text, &evaluation.metrics);
    trend_lines(&mut text, &evaluation.trends);
    if cfg.svg {
        let phase = data.phase();
        let k: Vec<f64> = phase
            .iter()
            .map(|&t| params.stiffness().eval(t))
            .collect::<Result<_, _>>()?;
        let d: Vec<f64> = phase
            .iter()
            .map(|&t| params.damping().eval(t))
            .collect::<Result<_, _>>()?;
        let tau = params.torque_trajectory(&data)?;
        write(
            &dir.join("stiffness.svg"),
            line_chart(
                "Stiffness",
                "gait phase",
                "K",
                &[Series {
                    name: "K",
                    x: phase,
                    y: &k,
                }],
            ),
        )?;
        write(
            &dir.join("damping.svg"),
            line_chart(
                "Damping",
                "gait phase",
                "D",
                &[Series {
                    name: "D",
                    x: phase,
                    y: &d,
                }],
            ),
        )?;
        write(
            &dir.join("torque.svg"),
            line_chart(
                "Torque",
                "gait phase",
                "torque",
                &[
                    Series {
                        name: "model",
                        x: phase,
                        y: &tau,
                    },
                    Series {
                        name: "data",
                        x: phase,
                        y: data.torque(),
                    },
                ],
            ),
        )?;
    }
    Ok(Done::clean(text))
}

fn tuning_spec(cfg: &RunConfig) -> Result<TuningSpec> {
    let mut spec = if cfg.published_tuning {
        match cfg.set {
            Some(set) => set.tuning(),
            None => bail!("--published-tuning needs --set"),
        }
    } else {
        TuningSpec::scale(1.0, 1.0, 0.0)
    };
    if let Some(a) = cfg.alpha {
        spec.alpha = a;
    }
    if let Some(b) = cfg.beta {
        spec.beta = b;
    }
    if let Some(g) = cfg.gamma {
        spec.gamma = g;
    }
    if let Some(angles) = &cfg.tuned_angles {
        spec.tuned_angles = Some(angles.clone());
    }
    Ok(spec)
}

pub fn cmd_tune(cfg: &RunConfig) -> Result<Done> {
    let params = load_params(cfg)?;
    let spec = tuning_spec(cfg)?;
    let tuned = tune(&params, &spec)?;
    let dir = cfg.out_dir()?;
    write(&dir.join("tuned.json"), to_json(&tuned)?)?;
    let summary = format!(
        "alpha {} beta {} gamma {}; K(0) {} -> {}; equilibria {}\n",
        spec.alpha,
        spec.beta,
        spec.gamma,
        params.stiffness().coeffs()[0],
        tuned.stiffness().coeffs()[0],
        fmt_angles(tuned.schedule().angles())
    );
    Ok(Done::clean(summary))
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<Done> {
    let spec = SyntheticSpec {
        ground_truth: load_params(cfg)?,
        kinematics: load_data(cfg)?,
        noise_std: cfg.noise.unwrap_or(0.0),
        seed: cfg.seed(),
    };
    let data = synthesize(&spec)?;
    let dir = cfg.out_dir()?;
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    write(&dir.join("synthetic.csv"), buf)?;
    Ok(Done::clean(format!(
        "{} samples, noise std {}, seed {}\n",
        data.len(),
        spec.noise_std,
        spec.seed
    )))
}

pub fn cmd_report(cfg: &RunConfig) -> Result<Done> {
    let paths = match &cfg.results {
        Some(p) if !p.is_empty() => p,
        _ => bail!("--results needs at least one result.json"),
    };
    let results: Vec<EstimationResult> =
        paths.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    let table = compare_sets(&results)?;
    let dir = cfg.out_dir()?;
    write(&dir.join("comparison.txt"), table.to_text())?;
    write(&dir.join("comparison.csv"), table.to_csv())?;
    write(&dir.join("comparison.json"), to_json(&table)?)?;
    Ok(Done::flagged(
        results.iter().all(EstimationResult::is_clean),
        table.to_text(),
    ))
}

pub fn cmd_fixture(cfg: &RunConfig) -> Result<Done> {
    let Some(set) = cfg.set else {
        bail!("--set is required");
    };
    let params = if cfg.published_tuning {
        tune(&set.params(), &set.tuning())?
    } else {
        set.params()
    };
    let dir = cfg.out_dir()?;
    write(&dir.join("params.json"), to_json(&params)?)?;
    Ok(Done::clean(format!(
        "set {set}: equilibria {}\n",
        fmt_angles(params.schedule().angles())
    )))
}

/// Cost for `m = n` over `orders`, with the relative drop from the
/// previous order.
pub fn sweep_table(sweep: &[(usize, EstimationResult)]) -> String {
    let mut out = String::from("order,cost,relative_drop,converged,feasible\n");
    let mut prev: Option<f64> = None;
    for (order, r) in sweep {
        let drop = prev
            .map(|p| format!("{:?}", (p - r.cost) / p))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{order},{:?},{drop},{},{}",
            r.cost,
            r.converged,
            r.constraint_report.feasible()
        );
        prev = Some(r.cost);
    }
    out
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Done> {
    let problem = problem(cfg, load_data(cfg)?)?;
    let (lo, hi) = match &cfg.orders {
        Some(text) => {
            let (a, b) = text
                .split_once(':')
                .with_context(|| format!("--orders expects lo:hi, got `{text}`"))?;
            (a.trim().parse::<usize>()?, b.trim().parse::<usize>()?)
        }
        None => (0, 5),
    };
    if lo > hi {
        bail!("--orders {lo}:{hi} is empty");
    }
    let sweep = order_sweep(
        &problem,
        lo..=hi,
        cfg.starts.unwrap_or(DEFAULT_STARTS),
        cfg.seed(),
    )?;
    let table = sweep_table(&sweep);
    let dir = cfg.out_dir()?;
    write(&dir.join("sweep.csv"), &table)?;
    let clean = sweep.iter().all(|(_, r)| r.is_clean());
    Ok(Done::flagged(clean, table))
}
