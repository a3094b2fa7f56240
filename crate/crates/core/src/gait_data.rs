//! Gait-cycle time series: loading, differentiation, resampling and
//! synthesis from a known impedance law.
//!
//! Phase is normalized gait time in `[0, 1]` and is the independent variable
//! everywhere. Wall-clock time only enters through the cycle duration used
//! to turn `d(angle)/d(phase)` into rad/s.

use std::fmt;
use std::fs::File;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::impedance::ImpedanceParameters;

/// Cycle duration assumed when none is configured, in seconds.
pub const DEFAULT_CYCLE_DURATION: f64 = 1.0;
pub const DEFAULT_PHASE_COLUMN: &str = "pct";
const WRITTEN_PHASE_COLUMN: &str = "phase";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointLabel {
    #[default]
    Ankle,
    Knee,
    Other,
}

impl fmt::Display for JointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JointLabel::Ankle => "ankle",
            JointLabel::Knee => "knee",
            JointLabel::Other => "other",
        })
    }
}

impl std::str::FromStr for JointLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ankle" => Ok(JointLabel::Ankle),
            "knee" => Ok(JointLabel::Knee),
            "other" => Ok(JointLabel::Other),
            _ => Err(format!(
                "unknown joint `{s}` (expected ankle, knee or other)"
            )),
        }
    }
}

/// One averaged gait cycle sampled at increasing phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaitCycle")]
pub struct GaitCycleData {
    phase: Vec<f64>,
    angle: Vec<f64>,
    velocity: Vec<f64>,
    torque: Vec<f64>,
    joint: JointLabel,
    units_note: String,
}

#[derive(Deserialize)]
struct RawGaitCycle {
    phase: Vec<f64>,
    angle: Vec<f64>,
    velocity: Vec<f64>,
    torque: Vec<f64>,
    #[serde(default)]
    joint: JointLabel,
    #[serde(default)]
    units_note: String,
}

impl TryFrom<RawGaitCycle> for GaitCycleData {
    type Error = DataError;

    fn try_from(raw: RawGaitCycle) -> Result<Self, Self::Error> {
        GaitCycleData::new(
            raw.phase,
            raw.angle,
            raw.velocity,
            raw.torque,
            raw.joint,
            raw.units_note,
        )
    }
}

impl GaitCycleData {
    pub fn new(
        phase: Vec<f64>,
        angle: Vec<f64>,
        velocity: Vec<f64>,
        torque: Vec<f64>,
        joint: JointLabel,
        units_note: impl Into<String>,
    ) -> Result<Self, DataError> {
        let n = phase.len();
        if angle.len() != n || velocity.len() != n || torque.len() != n {
            return Err(DataError::LengthMismatch {
                phase: n,
                angle: angle.len(),
                velocity: velocity.len(),
                torque: torque.len(),
            });
        }
        if n < 2 {
            return Err(DataError::TooFewSamples { needed: 2, got: n });
        }
        for (name, channel) in [
            ("phase", &phase),
            ("angle", &angle),
            ("velocity", &velocity),
            ("torque", &torque),
        ] {
            if let Some(i) = channel.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite {
                    row: i + 1,
                    column: name.to_string(),
                    value: channel[i],
                });
            }
        }
        check_monotone(&phase)?;
        if phase[0] != 0.0 || phase[n - 1] != 1.0 {
            return Err(DataError::PhaseRange {
                first: phase[0],
                last: phase[n - 1],
            });
        }
        Ok(Self {
            phase,
            angle,
            velocity,
            torque,
            joint,
            units_note: units_note.into(),
        })
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn angle(&self) -> &[f64] {
        &self.angle
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn torque(&self) -> &[f64] {
        &self.torque
    }

    pub fn joint(&self) -> JointLabel {
        self.joint
    }

    pub fn units_note(&self) -> &str {
        &self.units_note
    }

    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }

    /// Same kinematics with a different torque channel.
    pub fn with_torque(&self, torque: Vec<f64>) -> Result<Self, DataError> {
        Self::new(
            self.phase.clone(),
            self.angle.clone(),
            self.velocity.clone(),
            torque,
            self.joint,
            self.units_note.clone(),
        )
    }

    pub fn with_joint(mut self, joint: JointLabel) -> Self {
        self.joint = joint;
        self
    }

    /// Write as CSV with a fractional `phase` column.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([WRITTEN_PHASE_COLUMN, "angle", "velocity", "torque"])?;
        for i in 0..self.len() {
            w.write_record([
                fmt_f64(self.phase[i]),
                fmt_f64(self.angle[i]),
                fmt_f64(self.velocity[i]),
                fmt_f64(self.torque[i]),
            ])?;
        }
        w.flush().map_err(|source| DataError::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn check_monotone(phase: &[f64]) -> Result<(), DataError> {
    for (i, w) in phase.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(DataError::NonMonotonePhase {
                row: i + 2,
                prev: w[0],
                next: w[1],
            });
        }
    }
    Ok(())
}

/// How the phase column is expressed in a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseUnits {
    /// Fraction if max <= 1, percent if max <= 100, sample index otherwise.
    #[default]
    Auto,
    Fraction,
    Percent,
    Index,
}

impl std::str::FromStr for PhaseUnits {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(PhaseUnits::Auto),
            "fraction" => Ok(PhaseUnits::Fraction),
            "percent" | "pct" => Ok(PhaseUnits::Percent),
            "index" | "sample" | "samples" => Ok(PhaseUnits::Index),
            _ => Err(format!("unknown phase units `{s}`")),
        }
    }
}

/// Column mapping for [`load_gait_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub phase: String,
    pub angle: String,
    /// `None` estimates velocity from the angle channel.
    pub velocity: Option<String>,
    pub torque: String,
    pub phase_units: PhaseUnits,
    pub joint: JointLabel,
    /// Seconds per cycle, used only when velocity is estimated.
    pub cycle_duration: f64,
    pub units_note: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            phase: DEFAULT_PHASE_COLUMN.into(),
            angle: "angle".into(),
            velocity: Some("velocity".into()),
            torque: "torque".into(),
            phase_units: PhaseUnits::Auto,
            joint: JointLabel::Ankle,
            cycle_duration: DEFAULT_CYCLE_DURATION,
            units_note: String::new(),
        }
    }
}

impl CsvSchema {
    pub fn columns(phase: &str, angle: &str, velocity: Option<&str>, torque: &str) -> Self {
        Self {
            phase: phase.into(),
            angle: angle.into(),
            velocity: velocity.map(Into::into),
            torque: torque.into(),
            ..Self::default()
        }
    }
}

/// Read one gait cycle from a headed CSV file.
pub fn load_gait_csv(
    path: impl AsRef<Path>,
    schema: &CsvSchema,
) -> Result<GaitCycleData, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_gait_csv(file, schema)
}

pub fn read_gait_csv<R: std::io::Read>(
    reader: R,
    schema: &CsvSchema,
) -> Result<GaitCycleData, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                column: name.to_string(),
                available: headers.iter().collect::<Vec<_>>().join(","),
            })
    };
    // files written by `write_csv` carry a fraction `phase` column
    let phase_idx = find(&schema.phase).or_else(|e| {
        if schema.phase == DEFAULT_PHASE_COLUMN {
            find(WRITTEN_PHASE_COLUMN).map_err(|_| e)
        } else {
            Err(e)
        }
    })?;
    let mut wanted = vec![(schema.phase.as_str(), phase_idx)];
    wanted.push((schema.angle.as_str(), find(&schema.angle)?));
    wanted.push((schema.torque.as_str(), find(&schema.torque)?));
    if let Some(v) = &schema.velocity {
        wanted.push((v.as_str(), find(v)?));
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        for (k, &(name, idx)) in wanted.iter().enumerate() {
            let cell = record.get(idx).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| DataError::BadCell {
                row,
                column: name.to_string(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    row,
                    column: name.to_string(),
                    value,
                });
            }
            columns[k].push(value);
        }
    }
    let rows = columns[0].len();
    if rows < 2 {
        return Err(DataError::TooFewSamples {
            needed: 2,
            got: rows,
        });
    }

    let raw_phase = &columns[0];
    check_monotone(raw_phase)?;
    let phase = normalize_phase(raw_phase, schema.phase_units)?;
    let angle = columns[1].clone();
    let torque = columns[2].clone();
    let velocity = match schema.velocity {
        Some(_) => columns[3].clone(),
        None => estimate_velocity(&angle, &phase, schema.cycle_duration)?,
    };
    GaitCycleData::new(
        phase,
        angle,
        velocity,
        torque,
        schema.joint,
        schema.units_note.clone(),
    )
}

fn normalize_phase(raw: &[f64], units: PhaseUnits) -> Result<Vec<f64>, DataError> {
    let first = raw[0];
    let last = raw[raw.len() - 1];
    let units = match units {
        PhaseUnits::Auto if last <= 1.0 + 1e-9 => PhaseUnits::Fraction,
        PhaseUnits::Auto if last <= 100.0 + 1e-7 => PhaseUnits::Percent,
        PhaseUnits::Auto => PhaseUnits::Index,
        u => u,
    };
    let mut phase: Vec<f64> = match units {
        PhaseUnits::Fraction => raw.to_vec(),
        PhaseUnits::Percent => raw.iter().map(|p| p / 100.0).collect(),
        PhaseUnits::Index | PhaseUnits::Auto => {
            raw.iter().map(|p| (p - first) / (last - first)).collect()
        }
    };
    let n = phase.len();
    if phase[0].abs() > 1e-9 || (phase[n - 1] - 1.0).abs() > 1e-9 {
        return Err(DataError::PhaseRange {
            first: phase[0],
            last: phase[n - 1],
        });
    }
    phase[0] = 0.0;
    phase[n - 1] = 1.0;
    check_monotone(&phase)?;
    Ok(phase)
}

/// Angular velocity from a phase-sampled angle: central differences inside,
/// one-sided at the ends, with `dt = d(phase) * cycle_duration`.
pub fn estimate_velocity(
    angle: &[f64],
    phase: &[f64],
    cycle_duration: f64,
) -> Result<Vec<f64>, DataError> {
    let n = angle.len();
    if phase.len() != n {
        return Err(DataError::LengthMismatch {
            phase: phase.len(),
            angle: n,
            velocity: n,
            torque: n,
        });
    }
    if n < 3 {
        return Err(DataError::TooFewSamples { needed: 3, got: n });
    }
    if !(cycle_duration.is_finite() && cycle_duration > 0.0) {
        return Err(DataError::CycleDuration(cycle_duration));
    }
    let slope =
        |i: usize, j: usize| (angle[j] - angle[i]) / ((phase[j] - phase[i]) * cycle_duration);
    let mut v = Vec::with_capacity(n);
    v.push(slope(0, 1));
    for i in 1..n - 1 {
        v.push(slope(i - 1, i + 1));
    }
    v.push(slope(n - 2, n - 1));
    Ok(v)
}

/// Linear interpolation onto `n` uniformly spaced phases including both ends.
pub fn resample(data: &GaitCycleData, n: usize) -> Result<GaitCycleData, DataError> {
    if n < 2 {
        return Err(DataError::TooFewSamples { needed: 2, got: n });
    }
    let grid = uniform_grid(n);
    let interp = |channel: &[f64]| -> Vec<f64> {
        grid.iter()
            .map(|&t| interpolate(data.phase(), channel, t))
            .collect()
    };
    GaitCycleData::new(
        grid.clone(),
        interp(data.angle()),
        interp(data.velocity()),
        interp(data.torque()),
        data.joint(),
        data.units_note().to_string(),
    )
}

/// `n` points `i / (n - 1)`, with the last one exactly 1.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n).map(|i| i as f64 / last).collect()
}

fn interpolate(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    // index of the first knot strictly greater than t
    let k = xs.partition_point(|&x| x <= t);
    if k == 0 {
        return ys[0];
    }
    let i = k - 1;
    if xs[i] == t || i + 1 == xs.len() {
        return ys[i];
    }
    let w = (t - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + w * (ys[i + 1] - ys[i])
}

/// Ground truth and kinematics for a synthetic torque channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub ground_truth: ImpedanceParameters,
    /// Torque channel is ignored.
    pub kinematics: GaitCycleData,
    pub noise_std: f64,
    pub seed: u64,
}

/// Torque generated by the impedance law on the given kinematics, plus
/// seeded Gaussian noise.
pub fn synthesize(spec: &SyntheticSpec) -> Result<GaitCycleData, DataError> {
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(DataError::NegativeNoise(spec.noise_std));
    }
    let mut torque = spec.ground_truth.torque_trajectory(&spec.kinematics)?;
    if spec.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_std).expect("finite positive std");
        for tau in torque.iter_mut() {
            *tau += normal.sample(&mut rng);
        }
    }
    spec.kinematics.with_torque(torque)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impedance::{EquilibriumSchedule, ImpedanceProfile};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn csv_data(text: &str) -> Result<GaitCycleData, DataError> {
        read_gait_csv(
            text.as_bytes(),
            &CsvSchema::columns("pct", "ang", Some("vel"), "trq"),
        )
    }

    #[test]
    fn percent_phase_rescaled() {
        let mut text = String::from("pct,ang,vel,trq\n");
        for i in 0..=100 {
            text.push_str(&format!("{i},{},0,{}\n", i as f64 * 0.01, i));
        }
        let d = csv_data(&text).unwrap();
        assert_eq!(d.len(), 101);
        assert_eq!(d.phase()[0], 0.0);
        assert_eq!(d.phase()[100], 1.0);
        assert_abs_diff_eq!(d.phase()[37], 0.37, epsilon = 1e-15);
    }

    #[test]
    fn sample_index_phase() {
        let text = "pct,ang,vel,trq\n1,0,0,0\n2,0,0,0\n3,0,0,0\n";
        // max 3 <= 100 would read as percent, so force index units
        let schema = CsvSchema {
            phase_units: PhaseUnits::Index,
            ..CsvSchema::columns("pct", "ang", Some("vel"), "trq")
        };
        let d = read_gait_csv(text.as_bytes(), &schema).unwrap();
        assert_eq!(d.phase(), &[0.0, 0.5, 1.0]);
        let wide: String = std::iter::once("pct,ang,vel,trq\n".to_string())
            .chain((0..201).map(|i| format!("{i},0,0,0\n")))
            .collect();
        let d = csv_data(&wide).unwrap();
        assert_eq!(d.phase()[100], 0.5);
    }

    #[test]
    fn duplicate_phase_rejected() {
        let err = csv_data("pct,ang,vel,trq\n0,0,0,0\n0,0,0,0\n1,0,0,0\n").unwrap_err();
        assert!(
            matches!(err, DataError::NonMonotonePhase { row: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn nan_cell_names_row() {
        let err = csv_data("pct,ang,vel,trq\n0,0,0,0\n0.5,0,0,NaN\n1,0,0,0\n").unwrap_err();
        match err {
            DataError::NonFinite { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "trq");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_column_and_short_file() {
        let err = csv_data("pct,ang,trq\n0,0,0\n1,0,0\n").unwrap_err();
        assert!(matches!(err, DataError::MissingColumn { ref column, .. } if column == "vel"));
        let err = csv_data("pct,ang,vel,trq\n0,0,0,0\n").unwrap_err();
        assert!(matches!(err, DataError::TooFewSamples { got: 1, .. }));
        let err = csv_data("pct,ang,vel,trq\n0,0,x,0\n1,0,0,0\n").unwrap_err();
        assert!(matches!(err, DataError::BadCell { row: 1, .. }));
    }

    #[test]
    fn written_files_load_with_the_default_schema() {
        let text = "phase,angle,velocity,torque\n0,0.1,0,1\n1,0.2,0,2\n";
        let d = read_gait_csv(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(d.angle(), [0.1, 0.2]);
        let custom = CsvSchema::columns("t", "angle", Some("velocity"), "torque");
        let err = read_gait_csv(text.as_bytes(), &custom).unwrap_err();
        assert!(matches!(err, DataError::MissingColumn { ref column, .. } if column == "t"));
        let err = read_gait_csv(
            "x,angle,velocity,torque\n".as_bytes(),
            &CsvSchema::default(),
        )
        .unwrap_err();
        assert!(matches!(err, DataError::MissingColumn { ref column, .. } if column == "pct"));
    }

    #[test]
    fn velocity_estimated_when_absent() {
        let text = "phase,ang,trq\n0,0,0\n0.5,0.5,0\n1,1,0\n";
        let schema = CsvSchema {
            cycle_duration: 2.0,
            ..CsvSchema::columns("phase", "ang", None, "trq")
        };
        let d = read_gait_csv(text.as_bytes(), &schema).unwrap();
        for v in d.velocity() {
            assert_abs_diff_eq!(*v, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn velocity_of_linear_and_constant() {
        let phase = uniform_grid(11);
        let v = estimate_velocity(&phase, &phase, 1.0).unwrap();
        for x in v {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-12);
        }
        let v = estimate_velocity(&[0.3; 11], &phase, 1.0).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        assert!(estimate_velocity(&[0.0, 1.0], &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn velocity_of_sine_matches_derivative() {
        let phase = uniform_grid(1001);
        let angle: Vec<f64> = phase.iter().map(|t| (2.0 * PI * t).sin()).collect();
        let v = estimate_velocity(&angle, &phase, 1.0).unwrap();
        let worst = phase
            .iter()
            .zip(&v)
            .map(|(t, v)| (v - 2.0 * PI * (2.0 * PI * t).cos()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "max error {worst}");
    }

    #[test]
    fn resample_linear_interpolation() {
        let d = GaitCycleData::new(
            vec![0.0, 0.5, 1.0],
            vec![0.0; 3],
            vec![0.0; 3],
            vec![0.0, 1.0, 0.0],
            JointLabel::Ankle,
            "",
        )
        .unwrap();
        let r = resample(&d, 5).unwrap();
        assert_eq!(r.torque(), &[0.0, 0.5, 1.0, 0.5, 0.0]);
        assert!(resample(&d, 1).is_err());
    }

    #[test]
    fn resample_same_grid_is_identity() {
        let phase = uniform_grid(401);
        let angle: Vec<f64> = phase.iter().map(|t| (3.0 * t).sin()).collect();
        let d = GaitCycleData::new(
            phase,
            angle.clone(),
            angle.clone(),
            angle,
            JointLabel::Knee,
            "",
        )
        .unwrap();
        let r = resample(&d, 401).unwrap();
        for (a, b) in d.torque().iter().zip(r.torque()) {
            assert!((a - b).abs() <= 1e-12);
        }
        let twice = resample(&r, 401).unwrap();
        assert_eq!(twice, r);
    }

    #[test]
    fn invalid_construction() {
        let ok = || vec![0.0, 1.0];
        assert!(matches!(
            GaitCycleData::new(vec![0.0, 0.9], ok(), ok(), ok(), JointLabel::Ankle, ""),
            Err(DataError::PhaseRange { .. })
        ));
        assert!(matches!(
            GaitCycleData::new(ok(), vec![0.0], ok(), ok(), JointLabel::Ankle, ""),
            Err(DataError::LengthMismatch { .. })
        ));
        assert!(matches!(
            GaitCycleData::new(
                ok(),
                vec![0.0, f64::INFINITY],
                ok(),
                ok(),
                JointLabel::Ankle,
                ""
            ),
            Err(DataError::NonFinite { .. })
        ));
    }

    fn kinematics(angle: f64) -> GaitCycleData {
        let phase = uniform_grid(51);
        let n = phase.len();
        GaitCycleData::new(
            phase,
            vec![angle; n],
            vec![0.0; n],
            vec![0.0; n],
            JointLabel::Ankle,
            "",
        )
        .unwrap()
    }

    fn constant_params(k: f64, d: f64, eq: f64) -> ImpedanceParameters {
        ImpedanceParameters::new(
            ImpedanceProfile::constant(k, 0.63).unwrap(),
            ImpedanceProfile::constant(d, 0.63).unwrap(),
            EquilibriumSchedule::new(vec![0.0, 1.0], vec![eq], None).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn synthesize_by_hand() {
        let spec = SyntheticSpec {
            ground_truth: constant_params(0.0, 0.0, 0.0),
            kinematics: kinematics(0.1),
            noise_std: 0.0,
            seed: 1,
        };
        assert!(synthesize(&spec)
            .unwrap()
            .torque()
            .iter()
            .all(|&t| t == 0.0));

        let spec = SyntheticSpec {
            ground_truth: constant_params(10.0, 0.0, 0.0),
            ..spec
        };
        for t in synthesize(&spec).unwrap().torque() {
            assert_abs_diff_eq!(*t, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn synthesize_is_seeded() {
        let spec = SyntheticSpec {
            ground_truth: constant_params(10.0, 1.0, 0.0),
            kinematics: kinematics(0.1),
            noise_std: 0.5,
            seed: 7,
        };
        let a = synthesize(&spec).unwrap();
        let b = synthesize(&spec).unwrap();
        assert_eq!(a.torque(), b.torque());
        let c = synthesize(&SyntheticSpec {
            seed: 8,
            ..spec.clone()
        })
        .unwrap();
        assert_ne!(a.torque(), c.torque());
        assert!(synthesize(&SyntheticSpec {
            noise_std: -1.0,
            ..spec
        })
        .is_err());
    }
}
