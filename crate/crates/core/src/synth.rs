//! Seeded synthetic datasets for every model. Same seed, same bytes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::models::{G2Model, OdmrModel, Peak, PleLineModel, SaturationModel, FWHM_PER_SIGMA};
use crate::pipeline::{PleLineRecord, PleScan};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(0.0, sd).unwrap().sample(rng)
    } else {
        0.0
    }
}

fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| min + (max - min) * i as f64 / (n - 1).max(1) as f64).collect()
}

/// `x`, `y` and the one-sigma noise actually used for `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<M> {
    pub truth: M,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma_y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Synth {
    pub model: G2Model,
    pub tau_min_ns: f64,
    pub tau_max_ns: f64,
    pub points: usize,
    /// Coincidences per bin far from zero delay; sets shot noise.
    pub counts_per_bin: f64,
}

impl Default for G2Synth {
    fn default() -> Self {
        Self {
            model: G2Model { n: 1.6, a: 0.6, tau0: 0.0, tau1: 2.0, tau2: 40.0 },
            tau_min_ns: -100.0,
            tau_max_ns: 100.0,
            points: 401,
            counts_per_bin: 2000.0,
        }
    }
}

impl G2Synth {
    pub fn generate(&self, seed: u64) -> Dataset<G2Model> {
        let mut r = rng(seed);
        let x = linspace(self.tau_min_ns, self.tau_max_ns, self.points);
        let mut y = Vec::with_capacity(x.len());
        let mut sigma_y = Vec::with_capacity(x.len());
        for &t in &x {
            let g = self.model.value(t);
            // shot noise of the coincidences, floored at one count
            let sd = (g * self.counts_per_bin).max(1.0).sqrt() / self.counts_per_bin;
            y.push(g + normal(&mut r, sd));
            sigma_y.push(sd);
        }
        Dataset { truth: self.model, x, y, sigma_y }
    }
}

/// Saturation data with noise on both the power and the count rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationDataset {
    pub truth: SaturationModel,
    pub power: Vec<f64>,
    pub sigma_power: Vec<f64>,
    pub counts: Vec<f64>,
    pub sigma_counts: Vec<f64>,
    /// Powers before the x noise.
    pub true_power: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationSynth {
    pub model: SaturationModel,
    pub power_max: f64,
    pub points: usize,
    /// Relative power noise.
    pub power_rel_noise: f64,
    pub counts_noise: f64,
}

impl Default for SaturationSynth {
    fn default() -> Self {
        Self {
            model: SaturationModel { i_sat: 119.3e3, p_exc: 600.0, b: 4.0 },
            power_max: 4000.0,
            points: 20,
            power_rel_noise: 0.03,
            counts_noise: 1.5e3,
        }
    }
}

impl SaturationSynth {
    pub fn generate(&self, seed: u64) -> SaturationDataset {
        let mut r = rng(seed);
        let true_power = linspace(self.power_max / self.points as f64, self.power_max, self.points);
        let mut power = Vec::new();
        let mut sigma_power = Vec::new();
        let mut counts = Vec::new();
        for &p in &true_power {
            let sp = self.power_rel_noise * p;
            power.push(p + normal(&mut r, sp));
            sigma_power.push(sp);
            counts.push(self.model.value(p) + normal(&mut r, self.counts_noise));
        }
        SaturationDataset {
            truth: self.model,
            sigma_counts: vec![self.counts_noise; power.len()],
            power,
            sigma_power,
            counts,
            true_power,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdmrSynth {
    pub model: OdmrModel,
    pub freq_min_mhz: f64,
    pub freq_max_mhz: f64,
    pub points: usize,
    pub noise: f64,
}

impl Default for OdmrSynth {
    fn default() -> Self {
        Self {
            model: OdmrModel {
                peaks: [
                    Peak { amplitude: -0.004, center: 64.2, width: 5.0 },
                    Peak { amplitude: -0.0035, center: 75.8, width: 5.0 },
                ],
                offset: 1.0,
            },
            freq_min_mhz: 40.0,
            freq_max_mhz: 100.0,
            points: 121,
            noise: 2.5e-4,
        }
    }
}

impl OdmrSynth {
    pub fn generate(&self, seed: u64) -> Dataset<OdmrModel> {
        let mut r = rng(seed);
        let x = linspace(self.freq_min_mhz, self.freq_max_mhz, self.points);
        let y = x.iter().map(|&f| self.model.value(f) + normal(&mut r, self.noise)).collect();
        Dataset { truth: self.model, sigma_y: vec![self.noise; x.len()], x, y }
    }
}

/// One PLE line with Gaussian-approximated shot noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PleLineSynth {
    pub model: PleLineModel,
    pub freq_min_ghz: f64,
    pub freq_max_ghz: f64,
    pub points: usize,
}

impl Default for PleLineSynth {
    fn default() -> Self {
        let s = 0.15 / FWHM_PER_SIGMA;
        Self {
            model: PleLineModel {
                peaks: [
                    Peak { amplitude: 200.0, center: -0.5, width: s },
                    Peak { amplitude: 300.0, center: 0.5, width: s },
                ],
                offset: 20.0,
            },
            freq_min_ghz: -3.0,
            freq_max_ghz: 3.0,
            points: 601,
        }
    }
}

fn shot(r: &mut ChaCha8Rng, mean: f64) -> (f64, f64) {
    let sd = mean.max(1.0).sqrt();
    (mean + normal(r, sd), sd)
}

impl PleLineSynth {
    pub fn generate(&self, seed: u64) -> Dataset<PleLineModel> {
        let mut r = rng(seed);
        self.draw(&mut r)
    }

    fn draw(&self, r: &mut ChaCha8Rng) -> Dataset<PleLineModel> {
        let x = linspace(self.freq_min_ghz, self.freq_max_ghz, self.points);
        let (y, sigma_y) = x.iter().map(|&f| shot(r, self.model.value(f))).unzip();
        Dataset { truth: self.model, x, y, sigma_y }
    }

    fn record(&self, r: &mut ChaCha8Rng, duration_s: f64, power_nw: f64) -> PleLineRecord {
        let d = self.draw(r);
        PleLineRecord {
            voltages: linspace(0.0, 10.0, self.points),
            counts: d.y,
            wavemeter_min_ghz: self.freq_min_ghz,
            wavemeter_max_ghz: self.freq_max_ghz,
            duration_s,
            power_nw,
            reversed: false,
        }
    }
}

/// Kinds of deliberately broken lines appended to a synthetic scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    AmplitudeRatio,
    CenterOutOfRange,
    SubGridLinewidth,
}

impl Violation {
    pub const ALL: [Violation; 3] = [Self::AmplitudeRatio, Self::CenterOutOfRange, Self::SubGridLinewidth];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PleScanSynth {
    pub line: PleLineSynth,
    pub lines: usize,
    pub duration_s: f64,
    pub power_nw: f64,
    /// Per-line standard deviation of the common random-walk step, GHz.
    pub step_std_ghz: f64,
    pub violations: bool,
}

impl Default for PleScanSynth {
    fn default() -> Self {
        Self {
            line: PleLineSynth::default(),
            lines: 50,
            duration_s: 4.0,
            power_nw: 50.0,
            step_std_ghz: 0.104,
            violations: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthScan {
    pub scan: PleScan,
    /// True A2 center of every line, GHz.
    pub a2_centers_ghz: Vec<f64>,
    /// Line index and kind of every deliberately broken line.
    pub violations: Vec<(usize, Violation)>,
    pub fwhm_ghz: f64,
}

impl PleScanSynth {
    pub fn generate(&self, seed: u64) -> SynthScan {
        let mut r = rng(seed);
        let base = self.line.model;
        let mut shift = 0.0;
        let mut lines = Vec::new();
        let mut centers = Vec::new();
        for i in 0..self.lines {
            if i > 0 {
                shift += normal(&mut r, self.step_std_ghz);
            }
            let mut m = base;
            m.peaks[0].center += shift;
            m.peaks[1].center += shift;
            centers.push(m.peaks[1].center);
            let s = PleLineSynth { model: m, ..self.line };
            lines.push(s.record(&mut r, self.duration_s, self.power_nw));
        }
        let mut violations = Vec::new();
        if self.violations {
            for v in Violation::ALL {
                let m = self.violating(v, base);
                centers.push(m.peaks[1].center);
                let s = PleLineSynth { model: m, ..self.line };
                violations.push((lines.len(), v));
                lines.push(s.record(&mut r, self.duration_s, self.power_nw));
            }
        }
        SynthScan {
            scan: PleScan { emitter_id: format!("synthetic-{seed}"), lines },
            a2_centers_ghz: centers,
            violations,
            fwhm_ghz: base.fwhm(1),
        }
    }

    fn violating(&self, kind: Violation, base: PleLineModel) -> PleLineModel {
        let mut m = base;
        let step = (self.line.freq_max_ghz - self.line.freq_min_ghz) / (self.line.points - 1) as f64;
        match kind {
            Violation::AmplitudeRatio => m.peaks[0].amplitude = m.peaks[1].amplitude / 12.0,
            Violation::CenterOutOfRange => {
                // A2 sits just past the upper end; only its flank is scanned
                m.peaks[1].center = self.line.freq_max_ghz + 0.5 * m.peaks[1].width;
            }
            Violation::SubGridLinewidth => {
                m.peaks[1].width = 0.8 * step / FWHM_PER_SIGMA;
                m.peaks[1].center = self.line.freq_min_ghz + step * (((m.peaks[1].center - self.line.freq_min_ghz) / step).round() + 0.25);
                m.peaks[1].amplitude *= 4.0;
            }
        }
        m
    }
}

/// Constant two-channel traces with a prescribed signed ΔPol in percent.
pub fn polarization_traces(delta_pol_percent: f64, total: f64, traces: usize) -> Vec<(f64, f64)> {
    let p1 = total * (0.5 - delta_pol_percent / 100.0);
    vec![(p1, total - p1); traces]
}

/// Like [`polarization_traces`] with Poisson-like count noise on each channel.
pub fn noisy_polarization_traces(delta_pol_percent: f64, total: f64, traces: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut r = rng(seed);
    polarization_traces(delta_pol_percent, total, traces)
        .into_iter()
        .map(|(a, b)| {
            let a = (a + normal(&mut r, a.max(1.0).sqrt())).max(0.0);
            let b = (b + normal(&mut r, b.max(1.0).sqrt())).max(0.0);
            (a, b)
        })
        .collect()
}

/// `n` draws of a fitted value around `mean` with the given spread.
pub fn measured_group(mean: f64, spread: f64, error: f64, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| (mean + normal(&mut r, spread), error * (1.0 + 0.1 * r.random::<f64>())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        assert_eq!(G2Synth::default().generate(3), G2Synth::default().generate(3));
        assert_ne!(G2Synth::default().generate(3).y, G2Synth::default().generate(4).y);
        let a = PleScanSynth { violations: true, ..Default::default() }.generate(9);
        let b = PleScanSynth { violations: true, ..Default::default() }.generate(9);
        assert_eq!(a, b);
        assert_eq!(a.scan.lines.len(), 53);
    }

    #[test]
    fn polarization_traces_hit_target() {
        let t = polarization_traces(14.16, 1e4, 5);
        let d = crate::models::delta_pol(&t).unwrap();
        assert!((d - 14.16).abs() < 1e-12);
    }
}
