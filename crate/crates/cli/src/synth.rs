use std::path::PathBuf;

use antenna_core::models::{G2Model, OdmrModel, Peak, PleLineModel, SaturationModel, FWHM_PER_SIGMA};
use antenna_core::synth::{
    noisy_polarization_traces, polarization_traces, G2Synth, OdmrSynth, PleLineSynth, PleScanSynth, SaturationSynth,
};
use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::{fmt, write_bytes, write_csv};

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SynthArgs {
    #[command(subcommand)]
    #[serde(flatten)]
    pub model: SynthModel,
    /// Output file (directory for ple-scan); stdout if omitted
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SynthModel {
    /// Autocorrelation histogram: CSV tau_ns,g2,sigma
    G2(G2Opts),
    /// Saturation curve with power noise: CSV power_uw,sigma_power_uw,counts,sigma_counts
    Saturation(SaturationOpts),
    /// Double-dip ODMR spectrum: CSV freq_mhz,signal,sigma
    Odmr(OdmrOpts),
    /// One PLE line record
    PleLine(PleLineOpts),
    /// Directory of PLE line records, a manifest and the injected truth
    PleScan(PleScanOpts),
    /// Two-channel polarization traces: CSV pol1,pol2
    Polarization(PolarizationOpts),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct G2Opts {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.6)]
    pub n: f64,
    #[arg(long, default_value_t = 0.6)]
    pub a: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub tau0: f64,
    #[arg(long, default_value_t = 2.0)]
    pub tau1: f64,
    #[arg(long, default_value_t = 40.0)]
    pub tau2: f64,
    #[arg(long, default_value_t = 2000.0)]
    pub counts_per_bin: f64,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
    #[arg(long, default_value_t = 100.0)]
    pub tau_max: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SaturationOpts {
    #[arg(long)]
    pub seed: u64,
    /// counts/s
    #[arg(long, default_value_t = 119.3e3)]
    pub i_sat: f64,
    /// uW
    #[arg(long, default_value_t = 600.0)]
    pub p_exc: f64,
    #[arg(long, default_value_t = 4.0)]
    pub b: f64,
    #[arg(long, default_value_t = 4000.0)]
    pub power_max: f64,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 0.03)]
    pub power_rel_noise: f64,
    #[arg(long, default_value_t = 1.5e3)]
    pub counts_noise: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OdmrOpts {
    #[arg(long)]
    pub seed: u64,
    /// Resonance centers, MHz
    #[arg(long, default_value_t = 64.2)]
    pub f1: f64,
    #[arg(long, default_value_t = 75.8)]
    pub f2: f64,
    /// Dip depths (positive), relative to the offset
    #[arg(long, default_value_t = 0.004)]
    pub depth1: f64,
    #[arg(long, default_value_t = 0.0035)]
    pub depth2: f64,
    /// FWHM, MHz
    #[arg(long, default_value_t = 5.0)]
    pub width: f64,
    #[arg(long, default_value_t = 2.5e-4)]
    pub noise: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PleShape {
    #[arg(long, default_value_t = 200.0)]
    pub a1: f64,
    #[arg(long, default_value_t = 300.0)]
    pub a2: f64,
    /// Line centers, GHz
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub c2: f64,
    #[arg(long, default_value_t = 150.0)]
    pub fwhm_mhz: f64,
    #[arg(long, default_value_t = 20.0)]
    pub offset: f64,
    /// Scan range, GHz
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    pub freq_min: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub freq_max: f64,
    #[arg(long, default_value_t = 601)]
    pub points: usize,
}

impl PleShape {
    fn synth(&self) -> PleLineSynth {
        let s = self.fwhm_mhz * 1e-3 / FWHM_PER_SIGMA;
        PleLineSynth {
            model: PleLineModel {
                peaks: [
                    Peak { amplitude: self.a1, center: self.c1, width: s },
                    Peak { amplitude: self.a2, center: self.c2, width: s },
                ],
                offset: self.offset,
            },
            freq_min_ghz: self.freq_min,
            freq_max_ghz: self.freq_max,
            points: self.points,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PleLineOpts {
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: PleShape,
    #[arg(long, default_value_t = 4.0)]
    pub duration_s: f64,
    #[arg(long, default_value_t = 50.0)]
    pub power_nw: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PleScanOpts {
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: PleShape,
    #[arg(long, default_value_t = 50)]
    pub lines: usize,
    #[arg(long, default_value_t = 4.0)]
    pub duration_s: f64,
    #[arg(long, default_value_t = 50.0)]
    pub power_nw: f64,
    /// Random-walk step of both lines per line, MHz
    #[arg(long, default_value_t = 104.0)]
    pub step_std_mhz: f64,
    /// Append one line breaking each of: amplitude ratio, center range, linewidth
    #[arg(long)]
    pub violations: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PolarizationOpts {
    #[arg(long)]
    pub seed: u64,
    /// Signed dPol of the traces, percent
    #[arg(long, allow_negative_numbers = true)]
    pub delta_pol: f64,
    #[arg(long, default_value_t = 10)]
    pub traces: usize,
    /// Counts per trace over both channels
    #[arg(long, default_value_t = 1e5)]
    pub total: f64,
    /// Add shot noise to each channel
    #[arg(long)]
    pub noisy: bool,
}

impl SynthArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(CliError::usage(format!("--{name} must be positive")))
            }
        };
        match &self.model {
            SynthModel::G2(o) => {
                G2Model::new(o.n, o.a, o.tau0, o.tau1, o.tau2).map_err(|e| CliError::usage(e.to_string()))?;
                positive(o.counts_per_bin, "counts-per-bin")?;
                positive(o.tau_max, "tau-max")?;
                if o.points < 8 {
                    return Err(CliError::usage("--points must be at least 8"));
                }
            }
            SynthModel::Saturation(o) => {
                SaturationModel::new(o.i_sat, o.p_exc, o.b).map_err(|e| CliError::usage(e.to_string()))?;
                positive(o.power_max, "power-max")?;
                positive(o.counts_noise, "counts-noise")?;
                positive(o.power_rel_noise, "power-rel-noise")?;
                if o.points < 4 {
                    return Err(CliError::usage("--points must be at least 4"));
                }
            }
            SynthModel::Odmr(o) => {
                positive(o.width, "width")?;
                positive(o.noise, "noise")?;
            }
            SynthModel::PleLine(o) => check_shape(&o.shape)?,
            SynthModel::PleScan(o) => {
                check_shape(&o.shape)?;
                positive(o.duration_s, "duration-s")?;
                if o.lines == 0 {
                    return Err(CliError::usage("--lines must be at least 1"));
                }
                if !(o.step_std_mhz >= 0.0) {
                    return Err(CliError::usage("--step-std-mhz must be non-negative"));
                }
                if self.out.is_none() {
                    return Err(CliError::usage("synth ple-scan needs --out DIR"));
                }
            }
            SynthModel::Polarization(o) => {
                positive(o.total, "total")?;
                if !(o.delta_pol.abs() <= 50.0) || o.traces == 0 {
                    return Err(CliError::usage("--delta-pol must lie in [-50, 50] with at least one trace"));
                }
            }
        }
        Ok(())
    }

    pub fn run(&self, config: &Value) -> Result<(), CliError> {
        let out = self.out.as_deref();
        match &self.model {
            SynthModel::G2(o) => {
                let g = G2Synth {
                    model: G2Model { n: o.n, a: o.a, tau0: o.tau0, tau1: o.tau1, tau2: o.tau2 },
                    tau_min_ns: -o.tau_max,
                    tau_max_ns: o.tau_max,
                    points: o.points,
                    counts_per_bin: o.counts_per_bin,
                };
                let d = g.generate(o.seed);
                write_csv(out, config, &["tau_ns", "g2", "sigma"], &columns3(&d.x, &d.y, &d.sigma_y))
            }
            SynthModel::Saturation(o) => {
                let g = SaturationSynth {
                    model: SaturationModel { i_sat: o.i_sat, p_exc: o.p_exc, b: o.b },
                    power_max: o.power_max,
                    points: o.points,
                    power_rel_noise: o.power_rel_noise,
                    counts_noise: o.counts_noise,
                };
                let d = g.generate(o.seed);
                let rows: Vec<Vec<String>> = (0..d.power.len())
                    .map(|i| vec![fmt(d.power[i]), fmt(d.sigma_power[i]), fmt(d.counts[i]), fmt(d.sigma_counts[i])])
                    .collect();
                write_csv(out, config, &["power_uw", "sigma_power_uw", "counts", "sigma_counts"], &rows)
            }
            SynthModel::Odmr(o) => {
                let g = OdmrSynth {
                    model: OdmrModel {
                        peaks: [
                            Peak { amplitude: -o.depth1, center: o.f1, width: o.width },
                            Peak { amplitude: -o.depth2, center: o.f2, width: o.width },
                        ],
                        offset: 1.0,
                    },
                    noise: o.noise,
                    ..OdmrSynth::default()
                };
                let d = g.generate(o.seed);
                write_csv(out, config, &["freq_mhz", "signal", "sigma"], &columns3(&d.x, &d.y, &d.sigma_y))
            }
            SynthModel::PleLine(o) => {
                let scan = PleScanSynth {
                    line: o.shape.synth(),
                    lines: 1,
                    duration_s: o.duration_s,
                    power_nw: o.power_nw,
                    step_std_ghz: 0.0,
                    violations: false,
                }
                .generate(o.seed);
                let text = with_config(config, &scan.scan.lines[0].to_text());
                write_bytes(out, text.as_bytes())
            }
            SynthModel::PleScan(o) => {
                let dir = out.expect("checked in resolve");
                let s = PleScanSynth {
                    line: o.shape.synth(),
                    lines: o.lines,
                    duration_s: o.duration_s,
                    power_nw: o.power_nw,
                    step_std_ghz: o.step_std_mhz * 1e-3,
                    violations: o.violations,
                }
                .generate(o.seed);
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                let mut manifest = with_config(config, &format!("emitter {}\n", s.scan.emitter_id));
                for (i, line) in s.scan.lines.iter().enumerate() {
                    let name = format!("line_{i:04}.txt");
                    write_bytes(Some(&dir.join(&name)), line.to_text().as_bytes())?;
                    manifest.push_str(&name);
                    manifest.push('\n');
                }
                write_bytes(Some(&dir.join("scan.txt")), manifest.as_bytes())?;
                let truth = json!({
                    "config": config,
                    "a2_centers_ghz": s.a2_centers_ghz,
                    "violations": s.violations,
                    "fwhm_ghz": s.fwhm_ghz,
                });
                let mut t = serde_json::to_string_pretty(&truth).unwrap();
                t.push('\n');
                write_bytes(Some(&dir.join("truth.json")), t.as_bytes())
            }
            SynthModel::Polarization(o) => {
                let traces = if o.noisy {
                    noisy_polarization_traces(o.delta_pol, o.total, o.traces, o.seed)
                } else {
                    polarization_traces(o.delta_pol, o.total, o.traces)
                };
                let rows: Vec<Vec<String>> = traces.iter().map(|&(a, b)| vec![fmt(a), fmt(b)]).collect();
                write_csv(out, config, &["pol1", "pol2"], &rows)
            }
        }
    }
}

fn check_shape(s: &PleShape) -> Result<(), CliError> {
    if !(s.freq_min < s.freq_max && s.points >= 8 && s.fwhm_mhz > 0.0 && s.a1 >= 0.0 && s.a2 >= 0.0) {
        return Err(CliError::usage(
            "PLE line needs freq-min < freq-max, at least 8 points, positive width and non-negative amplitudes",
        ));
    }
    Ok(())
}

fn columns3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<Vec<String>> {
    (0..a.len()).map(|i| vec![fmt(a[i]), fmt(b[i]), fmt(c[i])]).collect()
}

fn with_config(config: &Value, body: &str) -> String {
    format!("# config: {}\n{body}", serde_json::to_string(config).unwrap())
}
