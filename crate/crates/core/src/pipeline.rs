//! PLE line evaluation (ramp conversion, constrained double-Gaussian fits,
//! linewidth and spectral-wandering statistics) and saturation-rate
//! enhancement statistics.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitkit::{FitError, FitResult, LmOptions};
use crate::models::{fit_double_gaussian, Measured, ModelError, PleLineModel};
use crate::textio;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid line record: {0}")]
    InvalidLine(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("empty group: {0}")]
    EmptyGroup(String),
}

/// One frequency sweep of the excitation laser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PleLineRecord {
    pub voltages: Vec<f64>,
    pub counts: Vec<f64>,
    pub wavemeter_min_ghz: f64,
    pub wavemeter_max_ghz: f64,
    pub duration_s: f64,
    pub power_nw: f64,
    /// Ramp runs from the maximum to the minimum frequency.
    #[serde(default)]
    pub reversed: bool,
}

impl PleLineRecord {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidLine(m));
        if self.voltages.len() != self.counts.len() {
            return bad(format!("{} voltages but {} counts", self.voltages.len(), self.counts.len()));
        }
        if self.counts.len() < 2 {
            return bad("a line needs at least two samples".into());
        }
        if !(self.wavemeter_min_ghz < self.wavemeter_max_ghz) {
            return bad(format!(
                "degenerate frequency span [{}, {}] GHz",
                self.wavemeter_min_ghz, self.wavemeter_max_ghz
            ));
        }
        if !(self.duration_s > 0.0) {
            return bad(format!("line duration {} s must be positive", self.duration_s));
        }
        Ok(())
    }

    /// Header `key = value` lines followed by `voltage counts` rows.
    pub fn parse(text: &str, origin: &str) -> Result<Self, PipelineError> {
        let fmt_err = |m: String| PipelineError::Format { path: origin.to_string(), message: m };
        let mut header = std::collections::BTreeMap::new();
        let mut body = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = textio::strip_comment(raw);
            if let Some((k, v)) = line.split_once('=') {
                header.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
            } else {
                body.push_str(line);
            }
            body.push('\n');
        }
        let num = |key: &str| -> Result<f64, PipelineError> {
            let (line, v) = header.get(key).ok_or_else(|| fmt_err(format!("missing header key {key}")))?;
            v.parse().map_err(|_| fmt_err(format!("line {line}: {key} = {v:?} is not a number")))
        };
        let reversed = match header.get("reversed") {
            None => false,
            Some((line, v)) => v.parse().map_err(|_| fmt_err(format!("line {line}: reversed must be true or false")))?,
        };
        let rows = textio::parse_columns(&body, 2).map_err(|e| fmt_err(e.to_string()))?;
        let record = Self {
            voltages: rows.iter().map(|r| r[0]).collect(),
            counts: rows.iter().map(|r| r[1]).collect(),
            wavemeter_min_ghz: num("wavemeter_min_ghz")?,
            wavemeter_max_ghz: num("wavemeter_max_ghz")?,
            duration_s: num("duration_s")?,
            power_nw: num("power_nw")?,
            reversed,
        };
        record.validate().map_err(|e| fmt_err(e.to_string()))?;
        Ok(record)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "wavemeter_min_ghz = {}\nwavemeter_max_ghz = {}\nduration_s = {}\npower_nw = {}\nreversed = {}\n# voltage_v counts\n",
            self.wavemeter_min_ghz, self.wavemeter_max_ghz, self.duration_s, self.power_nw, self.reversed
        );
        for (v, c) in self.voltages.iter().zip(&self.counts) {
            s.push_str(&format!("{v} {c}\n"));
        }
        s
    }
}

/// Successive lines of one emitter at one excitation power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PleScan {
    pub emitter_id: String,
    pub lines: Vec<PleLineRecord>,
}

impl PleScan {
    pub fn new(emitter_id: impl Into<String>, lines: Vec<PleLineRecord>) -> Result<Self, PipelineError> {
        if lines.is_empty() {
            return Err(PipelineError::InsufficientData("a scan needs at least one line".into()));
        }
        Ok(Self { emitter_id: emitter_id.into(), lines })
    }

    pub fn power_nw(&self) -> f64 {
        self.lines[0].power_nw
    }

    /// Manifest: optional `emitter <id>` line, then one line-file path per
    /// line (relative to the manifest), in acquisition order.
    pub fn load_manifest(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut lines = Vec::new();
        for raw in text.lines() {
            let line = textio::strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("emitter ") {
                id = rest.trim().to_string();
                continue;
            }
            let p = PathBuf::from(line);
            let p = if p.is_absolute() { p } else { dir.join(p) };
            lines.push(PleLineRecord::load(&p)?);
        }
        Self::new(id, lines).map_err(|e| PipelineError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Sample index mapped linearly onto the wavemeter span.
pub fn ramp_to_frequency(line: &PleLineRecord) -> Result<Vec<(f64, f64)>, PipelineError> {
    line.validate()?;
    let n = line.counts.len();
    let (start, end) = if line.reversed {
        (line.wavemeter_max_ghz, line.wavemeter_min_ghz)
    } else {
        (line.wavemeter_min_ghz, line.wavemeter_max_ghz)
    };
    Ok(line
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let f = if i + 1 == n { end } else { start + (end - start) * i as f64 / (n - 1) as f64 };
            (f, c)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub centers_in_range: bool,
    pub nonneg_amplitudes_offset: bool,
    /// Minimum FWHM in units of the median frequency step.
    pub min_linewidth_steps: f64,
    pub max_amplitude_ratio: f64,
    /// Allowed relative deviation from the reference peak separation.
    pub max_separation_deviation: f64,
    pub r2_threshold: f64,
}

impl ConstraintSet {
    pub const R2_LOW: f64 = 0.46;
    pub const R2_HIGH: f64 = 0.7923;

    pub fn with_r2(r2_threshold: f64) -> Self {
        Self {
            centers_in_range: true,
            nonneg_amplitudes_offset: true,
            min_linewidth_steps: 1.0,
            max_amplitude_ratio: 10.0,
            max_separation_deviation: 0.4,
            r2_threshold,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "low" | "0.46" => Some(Self::with_r2(Self::R2_LOW)),
            "high" | "0.7923" => Some(Self::with_r2(Self::R2_HIGH)),
            _ => None,
        }
    }
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self::with_r2(Self::R2_LOW)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    NonConverged,
    Nonnegativity,
    CenterOutOfRange,
    Linewidth,
    AmplitudeRatio,
    SeparationDeviation,
    RSquared,
}

impl RejectionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectionReason::NonConverged => "non_converged",
            RejectionReason::Nonnegativity => "nonnegativity",
            RejectionReason::CenterOutOfRange => "center_out_of_range",
            RejectionReason::Linewidth => "linewidth",
            RejectionReason::AmplitudeRatio => "amplitude_ratio",
            RejectionReason::SeparationDeviation => "separation_deviation",
            RejectionReason::RSquared => "r_squared",
        }
    }
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fitted line with peaks ordered by frequency: `peaks[0]` is A1 (lower
/// frequency), `peaks[1]` is A2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PleLineFit {
    pub model: PleLineModel,
    pub fit: FitResult,
    pub a1_fwhm_ghz: f64,
    pub a2_fwhm_ghz: f64,
    pub separation_ghz: f64,
    /// Median spacing of the converted frequency axis.
    pub grid_step_ghz: f64,
    pub span_ghz: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LineOutcome {
    Accepted(PleLineFit),
    Rejected {
        reason: RejectionReason,
        /// Fitted model when the fit itself finished.
        model: Option<PleLineModel>,
        r_squared: Option<f64>,
    },
}

impl LineOutcome {
    pub fn accepted(&self) -> Option<&PleLineFit> {
        match self {
            LineOutcome::Accepted(f) => Some(f),
            LineOutcome::Rejected { .. } => None,
        }
    }

    pub fn reason(&self) -> Option<RejectionReason> {
        match self {
            LineOutcome::Accepted(_) => None,
            LineOutcome::Rejected { reason, .. } => Some(*reason),
        }
    }
}

/// First violated rule, checked in a fixed order, or `None` if the fit
/// satisfies every constraint.
pub fn check_constraints(
    fit: &PleLineFit,
    constraints: &ConstraintSet,
    reference_separation_ghz: Option<f64>,
) -> Option<RejectionReason> {
    if !fit.fit.converged {
        return Some(RejectionReason::NonConverged);
    }
    if let Some(reason) = shape_violation(&fit.model, fit.grid_step_ghz, fit.span_ghz, constraints, reference_separation_ghz) {
        return Some(reason);
    }
    if !(fit.fit.r_squared > constraints.r2_threshold) {
        return Some(RejectionReason::RSquared);
    }
    None
}

/// The rules that only need the fitted parameters. `model` must have its
/// peaks in frequency order.
fn shape_violation(
    model: &PleLineModel,
    grid_step_ghz: f64,
    (lo, hi): (f64, f64),
    constraints: &ConstraintSet,
    reference_separation_ghz: Option<f64>,
) -> Option<RejectionReason> {
    let [p1, p2] = model.peaks;
    if constraints.nonneg_amplitudes_offset && (p1.amplitude < 0.0 || p2.amplitude < 0.0 || model.offset < 0.0) {
        return Some(RejectionReason::Nonnegativity);
    }
    if constraints.centers_in_range && [p1.center, p2.center].iter().any(|&c| c < lo || c > hi) {
        return Some(RejectionReason::CenterOutOfRange);
    }
    let min_width = constraints.min_linewidth_steps * grid_step_ghz;
    if model.fwhm(0) <= min_width || model.fwhm(1) <= min_width {
        return Some(RejectionReason::Linewidth);
    }
    let (a, b) = (p1.amplitude.abs(), p2.amplitude.abs());
    if a.max(b) >= constraints.max_amplitude_ratio * a.min(b) {
        return Some(RejectionReason::AmplitudeRatio);
    }
    if let Some(reference) = reference_separation_ghz {
        let separation = p2.center - p1.center;
        if (separation - reference).abs() > constraints.max_separation_deviation * reference.abs() {
            return Some(RejectionReason::SeparationDeviation);
        }
    }
    None
}

fn frequency_ordered(mut model: PleLineModel) -> PleLineModel {
    for p in &mut model.peaks {
        p.width = p.width.abs();
    }
    if model.peaks[0].center > model.peaks[1].center {
        model.peaks.swap(0, 1);
    }
    model
}

/// Double-Gaussian fit of one line followed by the constraint checks.
pub fn fit_ple_line(
    line: &PleLineRecord,
    constraints: &ConstraintSet,
    reference_separation_ghz: Option<f64>,
) -> Result<LineOutcome, PipelineError> {
    let points = ramp_to_frequency(line)?;
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let freq: Vec<f64> = sorted.iter().map(|p| p.0).collect();
    let counts: Vec<f64> = sorted.iter().map(|p| p.1).collect();
    let mut steps: Vec<f64> = freq.windows(2).map(|w| w[1] - w[0]).collect();
    steps.sort_by(f64::total_cmp);
    let grid_step = steps[steps.len() / 2];
    let span = (line.wavemeter_min_ghz, line.wavemeter_max_ghz);
    let (model, fit) = match fit_double_gaussian(&freq, &counts, None, None, &LmOptions::default()) {
        Ok((m, f)) => (frequency_ordered(m), f),
        Err(ModelError::Fit(FitError::SingularOptimum { parameters, .. })) => {
            // no covariance, but the parameters can still break a rule
            let model = frequency_ordered(PleLineModel::from_params(&parameters));
            let reason = shape_violation(&model, grid_step, span, constraints, reference_separation_ghz)
                .unwrap_or(RejectionReason::NonConverged);
            return Ok(LineOutcome::Rejected { reason, model: Some(model), r_squared: None });
        }
        Err(_) => {
            return Ok(LineOutcome::Rejected {
                reason: RejectionReason::NonConverged,
                model: None,
                r_squared: None,
            })
        }
    };
    let result = PleLineFit {
        a1_fwhm_ghz: model.fwhm(0),
        a2_fwhm_ghz: model.fwhm(1),
        separation_ghz: model.peaks[1].center - model.peaks[0].center,
        grid_step_ghz: grid_step,
        span_ghz: span,
        model,
        fit,
    };
    Ok(match check_constraints(&result, constraints, reference_separation_ghz) {
        None => LineOutcome::Accepted(result),
        Some(reason) => LineOutcome::Rejected {
            reason,
            r_squared: Some(result.fit.r_squared),
            model: Some(result.model),
        },
    })
}

/// How the reference separation for the deviation check is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationReference {
    /// No separation check.
    None,
    /// Separation of the first line accepted by all other rules.
    FirstAccepted,
    Fixed(f64),
}

/// Fits every line of a scan. Lines are fitted in parallel; with
/// [`SeparationReference::FirstAccepted`] the separation check is applied
/// afterwards in line order.
pub fn analyze_scan(
    scan: &PleScan,
    constraints: &ConstraintSet,
    reference: SeparationReference,
) -> Result<Vec<LineOutcome>, PipelineError> {
    let fixed = match reference {
        SeparationReference::Fixed(v) => Some(v),
        _ => None,
    };
    let mut outcomes = scan
        .lines
        .par_iter()
        .map(|l| fit_ple_line(l, constraints, fixed))
        .collect::<Result<Vec<_>, _>>()?;
    if reference == SeparationReference::FirstAccepted {
        let mut reference_sep = None;
        for o in outcomes.iter_mut() {
            if let LineOutcome::Accepted(fit) = o {
                match reference_sep {
                    None => reference_sep = Some(fit.separation_ghz),
                    Some(r) => {
                        if let Some(reason) = check_constraints(fit, constraints, Some(r)) {
                            *o = LineOutcome::Rejected {
                                reason,
                                r_squared: Some(fit.fit.r_squared),
                                model: Some(fit.model),
                            };
                        }
                    }
                }
            }
        }
    }
    Ok(outcomes)
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single value.
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, count: values.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinewidthGroup {
    pub power_nw: f64,
    pub accepted: usize,
    pub rejected: usize,
    /// `None` when every line of the group was rejected.
    pub a1_fwhm_ghz: Option<MeanStd>,
    pub a2_fwhm_ghz: Option<MeanStd>,
}

/// Per-power statistics of A1/A2 linewidths over accepted lines. Groups
/// are sorted by power.
pub fn linewidth_statistics(results: &[(f64, Vec<LineOutcome>)]) -> Vec<LinewidthGroup> {
    let mut powers: Vec<f64> = results.iter().map(|r| r.0).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    powers
        .into_iter()
        .map(|p| {
            let outcomes: Vec<&LineOutcome> = results
                .iter()
                .filter(|r| r.0 == p)
                .flat_map(|r| r.1.iter())
                .collect();
            let fits: Vec<&PleLineFit> = outcomes.iter().filter_map(|o| o.accepted()).collect();
            // sort so the statistics do not depend on line order
            let mut a1: Vec<f64> = fits.iter().map(|f| f.a1_fwhm_ghz).collect();
            let mut a2: Vec<f64> = fits.iter().map(|f| f.a2_fwhm_ghz).collect();
            a1.sort_by(f64::total_cmp);
            a2.sort_by(f64::total_cmp);
            LinewidthGroup {
                power_nw: p,
                accepted: fits.len(),
                rejected: outcomes.len() - fits.len(),
                a1_fwhm_ghz: MeanStd::of(&a1),
                a2_fwhm_ghz: MeanStd::of(&a2),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WanderingSeries {
    /// `(index of the first line of the pair, rate in MHz/s)`.
    pub rates_mhz_per_s: Vec<(usize, f64)>,
    pub mean_mhz_per_s: f64,
    pub std_mhz_per_s: f64,
    pub skipped_pairs: usize,
}

/// Rate of change of the A2 center between consecutive accepted lines,
/// divided by the line duration (the mean of the pair's durations).
pub fn spectral_wandering(scan: &PleScan, outcomes: &[LineOutcome]) -> Result<WanderingSeries, PipelineError> {
    if outcomes.len() != scan.lines.len() {
        return Err(PipelineError::InsufficientData(format!(
            "{} outcomes for {} lines",
            outcomes.len(),
            scan.lines.len()
        )));
    }
    let mut rates = Vec::new();
    let mut skipped = 0;
    for i in 0..outcomes.len().saturating_sub(1) {
        match (outcomes[i].accepted(), outcomes[i + 1].accepted()) {
            (Some(a), Some(b)) => {
                let dt = 0.5 * (scan.lines[i].duration_s + scan.lines[i + 1].duration_s);
                let df_mhz = (b.model.peaks[1].center - a.model.peaks[1].center) * 1e3;
                rates.push((i, df_mhz / dt));
            }
            _ => skipped += 1,
        }
    }
    if rates.is_empty() {
        return Err(PipelineError::InsufficientData(
            "spectral wandering needs two consecutive accepted lines".into(),
        ));
    }
    let values: Vec<f64> = rates.iter().map(|r| r.1).collect();
    let stats = MeanStd::of(&values).unwrap();
    Ok(WanderingSeries {
        rates_mhz_per_s: rates,
        mean_mhz_per_s: stats.mean,
        std_mhz_per_s: stats.std,
        skipped_pairs: skipped,
    })
}

/// Saturation count rates of one group of emitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationGroup {
    pub name: String,
    /// `(I_sat, std error)` per emitter.
    pub i_sat: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEnhancement {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    /// Scatter of the group (sample standard deviation).
    pub std: f64,
    /// Error of the mean propagated from the per-fit errors.
    pub mean_error: f64,
    pub max: Measured,
    /// Group mean over bulk mean.
    pub mean_ratio: Measured,
    /// Group maximum over bulk mean.
    pub max_ratio: Measured,
}

/// Statistics of every group relative to the mean of `bulk_group`.
pub fn enhancement_statistics(groups: &[SaturationGroup], bulk_group: &str) -> Result<Vec<GroupEnhancement>, PipelineError> {
    let summarize = |g: &SaturationGroup| -> Result<(f64, f64, f64, Measured), PipelineError> {
        if g.i_sat.is_empty() {
            return Err(PipelineError::EmptyGroup(g.name.clone()));
        }
        let values: Vec<f64> = g.i_sat.iter().map(|v| v.0).collect();
        let s = MeanStd::of(&values).unwrap();
        let n = g.i_sat.len() as f64;
        let mean_error = g.i_sat.iter().map(|v| v.1 * v.1).sum::<f64>().sqrt() / n;
        let (max, err) = g
            .i_sat
            .iter()
            .copied()
            .fold((f64::NEG_INFINITY, 0.0), |acc, v| if v.0 > acc.0 { v } else { acc });
        Ok((s.mean, s.std, mean_error, Measured { value: max, error: err }))
    };
    let bulk = groups
        .iter()
        .find(|g| g.name == bulk_group)
        .ok_or_else(|| PipelineError::EmptyGroup(format!("reference group {bulk_group} not found")))?;
    let (bm, _, be, _) = summarize(bulk)?;
    if !(bm > 0.0) {
        return Err(PipelineError::InsufficientData("bulk mean saturation rate must be positive".into()));
    }
    let ratio = |v: f64, e: f64| {
        let r = v / bm;
        Measured { value: r, error: r * ((e / v).powi(2) + (be / bm).powi(2)).sqrt() }
    };
    groups
        .iter()
        .map(|g| {
            let (mean, std, mean_error, max) = summarize(g)?;
            Ok(GroupEnhancement {
                name: g.name.clone(),
                count: g.i_sat.len(),
                mean,
                std,
                mean_error,
                max,
                mean_ratio: if g.name == bulk_group { Measured { value: 1.0, error: 0.0 } } else { ratio(mean, mean_error) },
                max_ratio: ratio(max.value, max.error),
            })
        })
        .collect()
}
