use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use gait_impedance::estimator::AngleBounds;
use gait_impedance::{CsvSchema, JointLabel, PhaseUnits, PhaseWindow, ReferenceSet, ScheduleSpec};

#[derive(Debug, Parser)]
#[command(
    name = "gaitimp",
    version,
    about = "Estimate, tune and evaluate phase-varying joint impedance"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit stiffness, damping and equilibria to a gait-cycle CSV.
    Estimate(RunConfig),
    /// Evaluate parameters against a gait-cycle CSV and export curves.
    Evaluate(RunConfig),
    /// Scale stiffness/damping and replace equilibria.
    Tune(RunConfig),
    /// Generate a torque channel from known parameters.
    Synth(RunConfig),
    /// Compare several estimation results.
    Report(RunConfig),
    /// Write one of the published parameter sets as params.json.
    Fixture(RunConfig),
    /// Fit every polynomial order in a range and tabulate the cost.
    Sweep(RunConfig),
}

impl Command {
    pub fn config(&self) -> &RunConfig {
        match self {
            Command::Estimate(c)
            | Command::Evaluate(c)
            | Command::Tune(c)
            | Command::Synth(c)
            | Command::Report(c)
            | Command::Fixture(c)
            | Command::Sweep(c) => c,
        }
    }
}

/// Every flag any command understands. A JSON file given by `--config`
/// may set the same keys; flags win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// JSON file with defaults for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Gait-cycle CSV (header row required).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Parameters JSON (evaluate, tune, synth).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Estimation result JSON files (report).
    #[arg(long, num_args = 1..)]
    pub results: Option<Vec<PathBuf>>,
    /// Output directory (created if missing; default `.`).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Published sectioning A, B, C or D.
    #[arg(long)]
    pub set: Option<ReferenceSet>,
    /// Custom section boundaries, e.g. 0,0.13,0.40,0.63,1.
    #[arg(long, value_delimiter = ',')]
    pub boundaries: Option<Vec<f64>>,
    /// Stiffness polynomial order (default 4).
    #[arg(long)]
    pub order_k: Option<usize>,
    /// Damping polynomial order (default 4).
    #[arg(long)]
    pub order_d: Option<usize>,
    /// Phase where stance ends and the profiles turn constant (default 0.63).
    #[arg(long)]
    pub stance_end: Option<f64>,
    /// Bound on |d tau / d phase| (default twice the data's steepest slope).
    #[arg(long)]
    pub lipschitz: Option<f64>,
    /// Equilibrium bounds for every section, lo:hi in radians.
    #[arg(long)]
    pub angle_bounds: Option<String>,
    /// Number of randomized starts (default 8).
    #[arg(long)]
    pub starts: Option<usize>,
    /// Base seed for starts and noise (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Phase interval used by the fit, a:b.
    #[arg(long)]
    pub fit_window: Option<String>,
    /// Iteration cap per start (default 200).
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Order range for sweep, lo:hi (same order for K and D).
    #[arg(long)]
    pub orders: Option<String>,

    /// ankle, knee or other.
    #[arg(long)]
    pub joint: Option<JointLabel>,
    /// CSV column names: phase,angle,velocity,torque (velocity `-` to estimate it).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    /// fraction, percent, index or auto.
    #[arg(long)]
    pub phase_units: Option<PhaseUnits>,
    /// Cycle duration in seconds for estimated velocities.
    #[arg(long)]
    pub cycle_time: Option<f64>,

    /// Stiffness scale for tune (default 1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Damping scale for tune (default 1).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Constant added to stiffness by tune (default 0).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Replacement equilibria for tune, one per section.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub tuned_angles: Option<Vec<f64>>,
    /// Use the published tuning (alpha, beta, gamma and angles) of --set.
    #[arg(long)]
    #[serde(default)]
    pub published_tuning: bool,

    /// Noise standard deviation for synth, N·m.
    #[arg(long)]
    pub noise: Option<f64>,

    /// Also write SVG line charts (evaluate).
    #[arg(long)]
    #[serde(default)]
    pub svg: bool,
}

macro_rules! overlay {
    ($flags:expr, $file:expr, $($field:ident),*) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field.take(); } )*
    };
}

impl RunConfig {
    /// Fill unset flags from the `--config` file, if any. Relative paths in
    /// the file resolve against the file's directory.
    pub fn resolve(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut file: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        rebase(&mut file.input);
        rebase(&mut file.params);
        rebase(&mut file.out);
        if let Some(rs) = &mut file.results {
            for r in rs.iter_mut() {
                if r.is_relative() {
                    *r = base.join(&*r);
                }
            }
        }
        overlay!(
            self,
            file,
            input,
            params,
            results,
            out,
            set,
            boundaries,
            order_k,
            order_d,
            stance_end,
            lipschitz,
            angle_bounds,
            starts,
            seed,
            fit_window,
            max_iters,
            orders,
            joint,
            columns,
            phase_units,
            cycle_time,
            alpha,
            beta,
            gamma,
            tuned_angles,
            noise
        );
        self.svg |= file.svg;
        self.published_tuning |= file.published_tuning;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(dir)
    }

    pub fn require_input(&self) -> Result<&Path> {
        match &self.input {
            Some(p) => Ok(p),
            None => bail!("--input is required"),
        }
    }

    pub fn schema(&self) -> Result<CsvSchema> {
        let mut schema = CsvSchema::default();
        if let Some(cols) = &self.columns {
            if cols.len() != 4 {
                bail!("--columns needs four names: phase,angle,velocity,torque");
            }
            schema.phase = cols[0].clone();
            schema.angle = cols[1].clone();
            schema.velocity = (cols[2] != "-").then(|| cols[2].clone());
            schema.torque = cols[3].clone();
        }
        if let Some(u) = self.phase_units {
            schema.phase_units = u;
        }
        if let Some(j) = self.joint {
            schema.joint = j;
        }
        if let Some(t) = self.cycle_time {
            schema.cycle_duration = t;
        }
        Ok(schema)
    }

    pub fn schedule_spec(&self) -> Result<ScheduleSpec> {
        match (&self.set, &self.boundaries) {
            (Some(_), Some(_)) => bail!("give either --set or --boundaries, not both"),
            (Some(set), None) => Ok((*set).into()),
            (None, Some(b)) => Ok(ScheduleSpec::new(b.clone(), Some("custom".into()))?),
            (None, None) => bail!("--set or --boundaries is required"),
        }
    }

    pub fn fit_window(&self) -> Result<Option<PhaseWindow>> {
        self.fit_window
            .as_deref()
            .map(|w| w.parse::<PhaseWindow>().map_err(anyhow::Error::msg))
            .transpose()
    }

    pub fn angle_bounds(&self, sections: usize) -> Result<Option<Vec<AngleBounds>>> {
        let Some(text) = &self.angle_bounds else {
            return Ok(None);
        };
        let (lo, hi) = text
            .split_once(':')
            .with_context(|| format!("--angle-bounds expects lo:hi, got `{text}`"))?;
        let b = AngleBounds {
            lo: lo
                .trim()
                .parse()
                .with_context(|| format!("bad lower bound `{lo}`"))?,
            hi: hi
                .trim()
                .parse()
                .with_context(|| format!("bad upper bound `{hi}`"))?,
        };
        Ok(Some(vec![b; sections]))
    }
}
