use std::collections::BTreeMap;
use std::path::PathBuf;

use antenna_core::fitkit::LmOptions;
use antenna_core::models::{fit_g2, fit_odmr, fit_saturation, g2_background_correct, preselect, Measured};
use antenna_core::pipeline::{
    analyze_scan, linewidth_statistics, spectral_wandering, ConstraintSet, LineOutcome, PleScan, SeparationReference,
};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::{ensure_exists, fmt, write_csv, write_json, Table};

fn optional_sigma(t: &Table, i: usize) -> Option<Vec<f64>> {
    (t.header.len() > i).then(|| t.rows.iter().map(|r| r[i]).collect())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FitOdmrArgs {
    /// CSV with columns frequency (MHz), signal and optionally sigma
    #[arg(long)]
    pub input: PathBuf,
    /// Output JSON (stdout if omitted)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl FitOdmrArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        ensure_exists(&self.input).map(|_| ())
    }

    pub fn run(&self, config: &Value) -> Result<(), CliError> {
        let t = Table::read(&self.input)?;
        let (f, s) = (t.column(0, &self.input)?, t.column(1, &self.input)?);
        let sigma = optional_sigma(&t, 2);
        let fit = fit_odmr(&f, &s, sigma.as_deref(), None, &LmOptions::default())?;
        write_json(self.out.as_deref(), config, &fit)
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FitG2Args {
    /// CSV with columns delay (ns), g2 and optionally sigma
    #[arg(long)]
    pub input: PathBuf,
    /// Emitter share of the signal for background correction of the dip
    #[arg(long)]
    pub rho: Option<f64>,
    /// Output JSON (stdout if omitted)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl FitG2Args {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        if let Some(r) = self.rho {
            if !(r > 0.0 && r <= 1.0) {
                return Err(CliError::usage(format!("--rho must lie in (0, 1], got {r}")));
            }
        }
        ensure_exists(&self.input).map(|_| ())
    }

    pub fn run(&self, config: &Value) -> Result<(), CliError> {
        let t = Table::read(&self.input)?;
        let (tau, g2) = (t.column(0, &self.input)?, t.column(1, &self.input)?);
        let sigma = optional_sigma(&t, 2);
        let fit = fit_g2(&tau, &g2, sigma.as_deref(), None, &LmOptions::default())?;
        let corrected = match self.rho {
            Some(rho) => Some(Measured {
                value: g2_background_correct(fit.dip.value, rho)?,
                error: fit.dip.error / (rho * rho),
            }),
            None => None,
        };
        write_json(self.out.as_deref(), config, &json!({ "fit": fit, "corrected_dip": corrected }))
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FitSaturationArgs {
    /// CSV with columns power (uW), sigma_power, counts (1/s), sigma_counts
    #[arg(long)]
    pub input: PathBuf,
    /// Output JSON (stdout if omitted)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl FitSaturationArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        ensure_exists(&self.input).map(|_| ())
    }

    pub fn run(&self, config: &Value) -> Result<(), CliError> {
        let t = Table::read(&self.input)?;
        let col = |i| t.column(i, &self.input);
        let fit = fit_saturation(&col(0)?, &col(1)?, &col(2)?, &col(3)?, None, &LmOptions::default())?;
        write_json(self.out.as_deref(), config, &fit)
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PreselectArgs {
    /// CSV with columns pol1, pol2 (counts/s), one trace per row
    #[arg(long)]
    pub input: PathBuf,
    /// Acceptance threshold on |dPol|, percent
    #[arg(long, default_value_t = antenna_core::models::DELTA_POL_THRESHOLD)]
    pub threshold: f64,
    /// Output JSON (stdout if omitted)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl PreselectArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        if !(self.threshold > 0.0) {
            return Err(CliError::usage("--threshold must be positive"));
        }
        ensure_exists(&self.input).map(|_| ())
    }

    pub fn run(&self, config: &Value) -> Result<(), CliError> {
        let t = Table::read(&self.input)?;
        let (a, b) = (t.column(0, &self.input)?, t.column(1, &self.input)?);
        let traces: Vec<(f64, f64)> = a.into_iter().zip(b).collect();
        let p = preselect(&traces, self.threshold)?;
        let note = if p.negative {
            "signed dPol is negative: channel 1 carries more than half; the threshold applies to |dPol|"
        } else {
            "the threshold applies to |dPol|"
        };
        write_json(self.out.as_deref(), config, &json!({ "preselection": p, "note": note }))
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PleAnalyzeArgs {
    /// Scan manifest, repeatable (one per scan)
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    /// r2 acceptance threshold: low (0.46), high (0.7923) or a number
    #[arg(long, default_value = "low")]
    pub r2: String,
    /// Separation reference: first (first accepted line), none, or GHz
    #[arg(long, default_value = "first")]
    pub reference: String,
    /// Statistics JSON (stdout if omitted)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Per-line fit table CSV
    #[arg(long)]
    #[serde(skip)]
    pub lines_out: Option<PathBuf>,
}

impl PleAnalyzeArgs {
    fn constraints(&self) -> Result<ConstraintSet, CliError> {
        if let Some(c) = ConstraintSet::preset(&self.r2) {
            return Ok(c);
        }
        let v: f64 = self
            .r2
            .parse()
            .map_err(|_| CliError::usage(format!("bad --r2 {:?}, expected low, high or a number", self.r2)))?;
        if !(v > 0.0 && v < 1.0) {
            return Err(CliError::usage("--r2 threshold must lie in (0, 1)"));
        }
        Ok(ConstraintSet::with_r2(v))
    }

    fn reference(&self) -> Result<SeparationReference, CliError> {
        match self.reference.as_str() {
            "first" => Ok(SeparationReference::FirstAccepted),
            "none" => Ok(SeparationReference::None),
            s => s
                .parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0)
                .map(SeparationReference::Fixed)
                .ok_or_else(|| CliError::usage(format!("bad --reference {s:?}"))),
        }
    }

    pub fn resolve(&mut self) -> Result<(), CliError> {
        self.constraints()?;
        self.reference()?;
        for m in &self.manifests {
            ensure_exists(m)?;
        }
        Ok(())
    }

    pub fn run(&self, config: &Value) -> Result<(), CliError> {
        let constraints = self.constraints()?;
        let reference = self.reference()?;
        let mut rows = Vec::new();
        let mut scans = Vec::new();
        let mut by_power = Vec::new();
        for path in &self.manifests {
            let scan = PleScan::load_manifest(path)?;
            let outcomes = analyze_scan(&scan, &constraints, reference)?;
            let mut rejections: BTreeMap<&str, usize> = BTreeMap::new();
            for (i, o) in outcomes.iter().enumerate() {
                rows.push(line_row(&scan.emitter_id, i, o));
                if let Some(r) = o.reason() {
                    *rejections.entry(r.as_str()).or_default() += 1;
                }
            }
            let wandering = match spectral_wandering(&scan, &outcomes) {
                Ok(w) => json!(w),
                Err(e) => json!({ "error": e.to_string() }),
            };
            scans.push(json!({
                "emitter": scan.emitter_id,
                "power_nw": scan.power_nw(),
                "lines": outcomes.len(),
                "accepted": outcomes.iter().filter(|o| o.accepted().is_some()).count(),
                "rejections": rejections,
                "wandering": wandering,
            }));
            by_power.push((scan.power_nw(), outcomes));
        }
        if let Some(p) = &self.lines_out {
            let header = [
                "emitter", "line", "status", "reason", "a1_center_ghz", "a2_center_ghz", "a1_fwhm_ghz", "a2_fwhm_ghz",
                "separation_ghz", "r_squared",
            ];
            write_csv(Some(p), config, &header, &rows)?;
        }
        let result = json!({
            "constraints": constraints,
            "scans": scans,
            "linewidths": linewidth_statistics(&by_power),
        });
        write_json(self.out.as_deref(), config, &result)
    }
}

fn line_row(emitter: &str, i: usize, o: &LineOutcome) -> Vec<String> {
    let blank = String::new;
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_else(blank);
    match o {
        LineOutcome::Accepted(f) => {
            let [a, b] = f.model.peaks;
            vec![
                emitter.into(),
                i.to_string(),
                "accepted".into(),
                blank(),
                fmt(a.center),
                fmt(b.center),
                fmt(f.a1_fwhm_ghz),
                fmt(f.a2_fwhm_ghz),
                fmt(f.separation_ghz),
                fmt(f.fit.r_squared),
            ]
        }
        LineOutcome::Rejected { reason, model, r_squared } => {
            let m = model.as_ref();
            vec![
                emitter.into(),
                i.to_string(),
                "rejected".into(),
                reason.as_str().into(),
                opt(m.map(|m| m.peaks[0].center)),
                opt(m.map(|m| m.peaks[1].center)),
                opt(m.map(|m| m.fwhm(0))),
                opt(m.map(|m| m.fwhm(1))),
                opt(m.map(|m| m.peaks[1].center - m.peaks[0].center)),
                opt(*r_squared),
            ]
        }
    }
}
