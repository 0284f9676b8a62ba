//! Phenomenological models for emitter characterization and their fits:
//! photon autocorrelation, saturation, ODMR, PLE lines and polarization
//! preselection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitkit::{fit_least_squares, fit_odr, FitError, FitModel, FitResult, LmOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("not enough data: {0}")]
    Data(String),
}

/// `FWHM / σ` of a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Three-level autocorrelation of `n` identical emitters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Model {
    pub n: f64,
    /// Bunching amplitude.
    pub a: f64,
    /// Zero-delay offset, ns.
    pub tau0: f64,
    /// Antibunching time, ns.
    pub tau1: f64,
    /// Bunching time, ns.
    pub tau2: f64,
}

impl G2Model {
    pub const PARAMS: [&'static str; 5] = ["n", "a", "tau0", "tau1", "tau2"];

    pub fn new(n: f64, a: f64, tau0: f64, tau1: f64, tau2: f64) -> Result<Self, ModelError> {
        if !(n >= 1.0) || !(tau1 > 0.0) || !(tau2 > 0.0) || !a.is_finite() || !tau0.is_finite() {
            return Err(ModelError::Invalid(format!(
                "g2 model needs n >= 1 and positive times (n={n}, tau1={tau1}, tau2={tau2})"
            )));
        }
        Ok(Self { n, a, tau0, tau1, tau2 })
    }

    pub fn value(&self, tau: f64) -> f64 {
        g2_formula(&[self.n, self.a, self.tau0, self.tau1, self.tau2], tau)
    }

    /// `g²(τ0) = (N - 1)/N`.
    pub fn dip(&self) -> f64 {
        (self.n - 1.0) / self.n
    }

    fn from_params(p: &[f64]) -> Self {
        Self { n: p[0], a: p[1], tau0: p[2], tau1: p[3], tau2: p[4] }
    }

    fn params(&self) -> Vec<f64> {
        vec![self.n, self.a, self.tau0, self.tau1, self.tau2]
    }
}

fn g2_formula(p: &[f64], tau: f64) -> f64 {
    let (n, a, t0, t1, t2) = (p[0], p[1], p[2], p[3], p[4]);
    let d = (tau - t0).abs();
    let (e1, e2) = ((-d / t1).exp(), (-d / t2).exp());
    (1.0 - e1 - a * (e1 - e2)) / n + (n - 1.0) / n
}

pub fn g2_value(model: &G2Model, tau: f64) -> f64 {
    model.value(tau)
}

/// Share of emitter light in the detected signal, `I_em / (I_em + I_bg)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundRatio {
    rho: f64,
}

impl BackgroundRatio {
    pub fn new(rho: f64) -> Result<Self, ModelError> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(ModelError::Invalid(format!("background ratio {rho} outside (0, 1]")));
        }
        Ok(Self { rho })
    }

    pub fn from_intensities(emitter: f64, background: f64) -> Result<Self, ModelError> {
        if !(emitter >= 0.0 && background >= 0.0) {
            return Err(ModelError::Invalid("intensities must be non-negative".into()));
        }
        Self::new(emitter / (emitter + background))
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// `(g2 - (1 - ρ²)) / ρ²`.
pub fn g2_background_correct(g2_measured: f64, rho: f64) -> Result<f64, ModelError> {
    let rho = BackgroundRatio::new(rho)?.rho;
    let r2 = rho * rho;
    Ok((g2_measured - (1.0 - r2)) / r2)
}

/// `I(P) = I_sat P / (P + P_exc) + b P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationModel {
    /// Saturation count rate, counts/s.
    pub i_sat: f64,
    /// Saturation power, µW.
    pub p_exc: f64,
    /// Linear background, counts/s per µW.
    pub b: f64,
}

impl SaturationModel {
    pub const PARAMS: [&'static str; 3] = ["i_sat", "p_exc", "b"];

    pub fn new(i_sat: f64, p_exc: f64, b: f64) -> Result<Self, ModelError> {
        if !(i_sat > 0.0 && p_exc > 0.0 && b >= 0.0) {
            return Err(ModelError::Invalid(format!(
                "saturation model needs i_sat > 0, p_exc > 0, b >= 0 (got {i_sat}, {p_exc}, {b})"
            )));
        }
        Ok(Self { i_sat, p_exc, b })
    }

    pub fn value(&self, power: f64) -> f64 {
        saturation_formula(&[self.i_sat, self.p_exc, self.b], power)
    }
}

fn saturation_formula(p: &[f64], power: f64) -> f64 {
    p[0] * power / (power + p[1]) + p[2] * power
}

pub fn saturation_value(model: &SaturationModel, power: f64) -> f64 {
    model.value(power)
}

/// Lorentzian with peak `amplitude` and full width at half maximum `fwhm`.
pub fn lorentzian(x: f64, amplitude: f64, center: f64, fwhm: f64) -> f64 {
    let hw = 0.5 * fwhm;
    amplitude * hw * hw / ((x - center).powi(2) + hw * hw)
}

pub fn gaussian(x: f64, amplitude: f64, center: f64, sigma: f64) -> f64 {
    amplitude * (-0.5 * ((x - center) / sigma).powi(2)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub amplitude: f64,
    pub center: f64,
    /// FWHM for Lorentzians, σ for Gaussians.
    pub width: f64,
}

/// Two Lorentzian resonances on a constant offset; frequencies in MHz.
/// Amplitudes are negative for fluorescence dips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdmrModel {
    pub peaks: [Peak; 2],
    pub offset: f64,
}

impl OdmrModel {
    pub const PARAMS: [&'static str; 7] = ["a1", "f1", "w1", "a2", "f2", "w2", "offset"];

    pub fn value(&self, f: f64) -> f64 {
        odmr_formula(&self.params(), f)
    }

    fn params(&self) -> Vec<f64> {
        let [p, q] = self.peaks;
        vec![p.amplitude, p.center, p.width, q.amplitude, q.center, q.width, self.offset]
    }

    fn from_params(p: &[f64]) -> Self {
        Self {
            peaks: [
                Peak { amplitude: p[0], center: p[1], width: p[2] },
                Peak { amplitude: p[3], center: p[4], width: p[5] },
            ],
            offset: p[6],
        }
    }
}

fn odmr_formula(p: &[f64], f: f64) -> f64 {
    lorentzian(f, p[0], p[1], p[2]) + lorentzian(f, p[3], p[4], p[5]) + p[6]
}

/// Two Gaussian absorption lines on a constant offset; frequencies in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PleLineModel {
    pub peaks: [Peak; 2],
    pub offset: f64,
}

impl PleLineModel {
    pub const PARAMS: [&'static str; 7] = ["a1", "c1", "s1", "a2", "c2", "s2", "offset"];

    pub fn value(&self, f: f64) -> f64 {
        ple_formula(&self.params(), f)
    }

    pub fn fwhm(&self, i: usize) -> f64 {
        FWHM_PER_SIGMA * self.peaks[i].width.abs()
    }

    pub fn params(&self) -> Vec<f64> {
        let [p, q] = self.peaks;
        vec![p.amplitude, p.center, p.width, q.amplitude, q.center, q.width, self.offset]
    }

    pub fn from_params(p: &[f64]) -> Self {
        Self {
            peaks: [
                Peak { amplitude: p[0], center: p[1], width: p[2] },
                Peak { amplitude: p[3], center: p[4], width: p[5] },
            ],
            offset: p[6],
        }
    }
}

fn ple_formula(p: &[f64], f: f64) -> f64 {
    gaussian(f, p[0], p[1], p[2]) + gaussian(f, p[3], p[4], p[5]) + p[6]
}

/// Fitted value with its one-sigma error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub error: f64,
}

fn check_xy(x: &[f64], y: &[f64], min: usize) -> Result<(), ModelError> {
    if x.len() != y.len() {
        return Err(ModelError::Data(format!("{} x values but {} y values", x.len(), y.len())));
    }
    if x.len() < min {
        return Err(ModelError::Data(format!("need at least {min} points, got {}", x.len())));
    }
    Ok(())
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Three-bin moving average (edges use the available neighbours).
pub fn smooth3(y: &[f64]) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 2).min(y.len());
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Local maxima of `y` ordered by decreasing topographic prominence.
/// Edge samples count as maxima when they exceed their single neighbour.
pub fn maxima_by_prominence(y: &[f64]) -> Vec<(usize, f64)> {
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && y[j] == y[i] {
            j += 1;
        }
        let left_ok = i == 0 || y[i - 1] < y[i];
        let right_ok = j == n || y[j] < y[i];
        if left_ok && right_ok && !(i == 0 && j == n) {
            let h = y[i];
            let left = y[..i].iter().rev().take_while(|&&v| v <= h).copied().fold(h, f64::min);
            let right = y[j..].iter().take_while(|&&v| v <= h).copied().fold(h, f64::min);
            let base = if i == 0 {
                right
            } else if j == n {
                left
            } else {
                left.max(right)
            };
            out.push(((i + j - 1) / 2, h - base));
        }
        i = j;
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// FWHM of the peak at `i` above `baseline`, by walking to half height.
fn half_width(x: &[f64], y: &[f64], i: usize, baseline: f64) -> f64 {
    let half = baseline + 0.5 * (y[i] - baseline);
    let mut l = i;
    while l > 0 && y[l] > half {
        l -= 1;
    }
    let mut r = i;
    while r + 1 < y.len() && y[r] > half {
        r += 1;
    }
    (x[r] - x[l]).abs()
}

/// Starting values for two peaks: the two most prominent maxima of the
/// 3-bin smoothed data (`sign = -1` looks for dips).
pub fn two_peak_guess(x: &[f64], y: &[f64], sign: f64) -> Option<([Peak; 2], f64)> {
    if x.len() < 5 {
        return None;
    }
    let s: Vec<f64> = smooth3(y).into_iter().map(|v| sign * v).collect();
    let baseline = {
        // lower quartile: a floor that survives peaks filling much of the scan
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        sorted[sorted.len() / 4]
    };
    let peaks = maxima_by_prominence(&s);
    let step = median(&x.windows(2).map(|w| (w[1] - w[0]).abs()).collect::<Vec<_>>());
    let first = peaks.first()?.0;
    let w1 = half_width(x, &s, first, baseline).max(2.0 * step);
    let second = match peaks.get(1) {
        Some(&(i, _)) => i,
        None => {
            // lone peak: place the second guess one width away
            let target = x[first] + w1;
            (0..x.len()).min_by(|&a, &b| (x[a] - target).abs().total_cmp(&(x[b] - target).abs()))?
        }
    };
    let w2 = half_width(x, &s, second, baseline).max(2.0 * step);
    let (i1, i2, w1, w2) = if x[first] <= x[second] { (first, second, w1, w2) } else { (second, first, w2, w1) };
    let peak = |i: usize, w: f64| Peak { amplitude: sign * (s[i] - baseline).max(0.0), center: x[i], width: w };
    Some(([peak(i1, w1), peak(i2, w2)], sign * baseline))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Fit {
    pub model: G2Model,
    pub fit: FitResult,
    /// `g²(τ0)` with its propagated error.
    pub dip: Measured,
    pub n_rounded: u32,
    /// Dip below 0.5.
    pub single_emitter: bool,
}

/// Automatic starting values from the position and depth of the dip.
pub fn g2_initial_guess(tau: &[f64], g2: &[f64]) -> Result<G2Model, ModelError> {
    check_xy(tau, g2, 6)?;
    let s = smooth3(g2);
    let (imin, &gmin) = s
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let tau0 = tau[imin];
    let plateau = {
        let mut far: Vec<(f64, f64)> = tau.iter().zip(g2).map(|(&t, &g)| ((t - tau0).abs(), g)).collect();
        far.sort_by(|a, b| b.0.total_cmp(&a.0));
        let k = (far.len() / 10).max(1);
        far[..k].iter().map(|p| p.1).sum::<f64>() / k as f64
    };
    let peak = s.iter().copied().fold(f64::MIN, f64::max).max(plateau);
    let dip = (gmin / plateau.max(1e-9)).clamp(0.0, 0.95);
    let n = (1.0 / (1.0 - dip)).clamp(1.05, 45.0);
    // antibunching time: distance to half recovery
    let half = gmin + 0.5 * (peak - gmin);
    let mut t1 = f64::INFINITY;
    for (&t, &g) in tau.iter().zip(&s) {
        if g >= half {
            t1 = t1.min((t - tau0).abs());
        }
    }
    let span = tau.iter().copied().fold(f64::MIN, f64::max) - tau.iter().copied().fold(f64::MAX, f64::min);
    let t1 = if t1.is_finite() && t1 > 0.0 { t1 / std::f64::consts::LN_2 } else { span / 50.0 };
    let a = (n * (peak / plateau.max(1e-9) - 1.0)).max(0.05) * 2.0;
    G2Model::new(n, a, tau0, t1, (20.0 * t1).min(span / 3.0).max(2.0 * t1))
}

/// Least-squares fit of [`G2Model`] with `n` free in [1, 50].
pub fn fit_g2(
    tau: &[f64],
    g2: &[f64],
    sigma: Option<&[f64]>,
    initial: Option<G2Model>,
    opts: &LmOptions,
) -> Result<G2Fit, ModelError> {
    check_xy(tau, g2, 6)?;
    let init = match initial {
        Some(m) => m,
        None => g2_initial_guess(tau, g2)?,
    };
    let model = FitModel::new(&G2Model::PARAMS, g2_formula)
        .with_bounds("n", 1.0, 50.0)?
        .with_bounds("tau1", 0.0, f64::INFINITY)?
        .with_bounds("tau2", 0.0, f64::INFINITY)?;
    let fit = fit_least_squares(&model, tau, g2, sigma, &init.params(), opts)?;
    let m = G2Model::from_params(&fit.parameters);
    let dip = Measured { value: m.dip(), error: fit.std_errors[0] / (m.n * m.n) };
    Ok(G2Fit {
        model: m,
        n_rounded: m.n.round().max(1.0) as u32,
        single_emitter: dip.value < 0.5,
        dip,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit {
    pub model: SaturationModel,
    pub fit: FitResult,
}

pub fn saturation_initial_guess(power: &[f64], counts: &[f64]) -> Result<SaturationModel, ModelError> {
    check_xy(power, counts, 4)?;
    let mut pts: Vec<(f64, f64)> = power.iter().copied().zip(counts.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (p_max, i_max) = pts.iter().fold((0.0f64, 0.0f64), |acc, p| (acc.0.max(p.0), acc.1.max(p.1)));
    if !(p_max > 0.0 && i_max > 0.0) {
        return Err(ModelError::Data("saturation data need positive powers and counts".into()));
    }
    let half = 0.5 * i_max;
    let p_half = pts.iter().find(|p| p.1 >= half).map(|p| p.0).unwrap_or(p_max / 2.0).max(p_max * 1e-3);
    SaturationModel::new(i_max, p_half, 0.02 * i_max / p_max)
}

/// Orthogonal distance regression of the saturation curve.
pub fn fit_saturation(
    power: &[f64],
    sigma_power: &[f64],
    counts: &[f64],
    sigma_counts: &[f64],
    initial: Option<SaturationModel>,
    opts: &LmOptions,
) -> Result<SaturationFit, ModelError> {
    let init = match initial {
        Some(m) => m,
        None => saturation_initial_guess(power, counts)?,
    };
    let model = FitModel::new(&SaturationModel::PARAMS, saturation_formula)
        .with_bounds("i_sat", 0.0, f64::INFINITY)?
        .with_bounds("p_exc", 0.0, f64::INFINITY)?;
    let fit = fit_odr(&model, power, sigma_power, counts, sigma_counts, &[init.i_sat, init.p_exc, init.b], opts)?;
    let p = &fit.parameters;
    Ok(SaturationFit {
        model: SaturationModel { i_sat: p[0], p_exc: p[1], b: p[2] },
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrFit {
    pub model: OdmrModel,
    pub fit: FitResult,
    /// `|f2 - f1|` with error from the full covariance.
    pub splitting: Measured,
}

pub fn odmr_initial_guess(freq: &[f64], signal: &[f64]) -> Result<OdmrModel, ModelError> {
    check_xy(freq, signal, 8)?;
    let (peaks, offset) = two_peak_guess(freq, signal, -1.0)
        .ok_or_else(|| ModelError::Data("no resonance found".into()))?;
    Ok(OdmrModel { peaks, offset })
}

/// Double-Lorentzian fit of an ODMR spectrum.
pub fn fit_odmr(
    freq: &[f64],
    signal: &[f64],
    sigma: Option<&[f64]>,
    initial: Option<OdmrModel>,
    opts: &LmOptions,
) -> Result<OdmrFit, ModelError> {
    let init = match initial {
        Some(m) => m,
        None => odmr_initial_guess(freq, signal)?,
    };
    let model = FitModel::new(&OdmrModel::PARAMS, odmr_formula)
        .with_bounds("w1", 0.0, f64::INFINITY)?
        .with_bounds("w2", 0.0, f64::INFINITY)?;
    let fit = fit_least_squares(&model, freq, signal, sigma, &init.params(), opts)?;
    let m = OdmrModel::from_params(&fit.parameters);
    let var = fit.std_errors[1].powi(2) + fit.std_errors[4].powi(2) - 2.0 * fit.covariance[1][4];
    Ok(OdmrFit {
        splitting: Measured {
            value: (m.peaks[1].center - m.peaks[0].center).abs(),
            error: var.max(0.0).sqrt(),
        },
        model: m,
        fit,
    })
}

pub fn ple_initial_guess(freq: &[f64], counts: &[f64]) -> Result<PleLineModel, ModelError> {
    check_xy(freq, counts, 8)?;
    let (mut peaks, offset) =
        two_peak_guess(freq, counts, 1.0).ok_or_else(|| ModelError::Data("no peak found".into()))?;
    for p in &mut peaks {
        p.width /= FWHM_PER_SIGMA;
    }
    // keep the stronger peak; the other goes to the largest leftover feature,
    // which may be a dip
    let strong = if peaks[0].amplitude >= peaks[1].amplitude { peaks[0] } else { peaks[1] };
    let resid: Vec<f64> = freq
        .iter()
        .zip(&smooth3(counts))
        .map(|(&f, &c)| c - offset - gaussian(f, strong.amplitude, strong.center, strong.width))
        .collect();
    let (k, &r) = resid
        .iter()
        .enumerate()
        .filter(|(i, _)| (freq[*i] - strong.center).abs() > 2.0 * strong.width)
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .ok_or_else(|| ModelError::Data("no room for a second line".into()))?;
    let level = 0.5 * r;
    let mut lo = k;
    while lo > 0 && (resid[lo - 1] - level) * r.signum() > 0.0 {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < freq.len() && (resid[hi + 1] - level) * r.signum() > 0.0 {
        hi += 1;
    }
    let step = (freq[freq.len() - 1] - freq[0]).abs() / (freq.len() - 1) as f64;
    let width = ((freq[hi] - freq[lo]).abs().max(2.0 * step)) / FWHM_PER_SIGMA;
    let weak = Peak { amplitude: r, center: freq[k], width };
    let peaks = if strong.center <= weak.center { [strong, weak] } else { [weak, strong] };
    Ok(PleLineModel { peaks, offset })
}

/// Unconstrained double-Gaussian fit; constraint checks are left to the caller.
pub fn fit_double_gaussian(
    freq: &[f64],
    counts: &[f64],
    sigma: Option<&[f64]>,
    initial: Option<PleLineModel>,
    opts: &LmOptions,
) -> Result<(PleLineModel, FitResult), ModelError> {
    let init = match initial {
        Some(m) => m,
        None => ple_initial_guess(freq, counts)?,
    };
    let model = FitModel::new(&PleLineModel::PARAMS, ple_formula);
    let fit = fit_least_squares(&model, freq, counts, sigma, &init.params(), opts)?;
    let mut m = PleLineModel::from_params(&fit.parameters);
    for p in &mut m.peaks {
        p.width = p.width.abs();
    }
    Ok((m, fit))
}

/// Default acceptance threshold on |ΔPol|, percent.
pub const DELTA_POL_THRESHOLD: f64 = 1.5;

/// `(100/N) Σ (1/2 - Pol1/(Pol1 + Pol2))`, percent, signed.
pub fn delta_pol(traces: &[(f64, f64)]) -> Result<f64, ModelError> {
    if traces.is_empty() {
        return Err(ModelError::Data("no polarization traces".into()));
    }
    let mut sum = 0.0;
    for (k, &(a, b)) in traces.iter().enumerate() {
        if !(a >= 0.0 && b >= 0.0 && a + b > 0.0) {
            return Err(ModelError::Invalid(format!(
                "trace {k}: channel counts must be non-negative with a positive sum (got {a}, {b})"
            )));
        }
        sum += 0.5 - a / (a + b);
    }
    Ok(100.0 * sum / traces.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preselection {
    /// Signed ΔPol in percent.
    pub delta_pol: f64,
    pub threshold: f64,
    /// `|ΔPol| < threshold`.
    pub accepted: bool,
    /// The signed value is negative: channel 1 carries more than half.
    pub negative: bool,
}

pub fn preselect(traces: &[(f64, f64)], threshold: f64) -> Result<Preselection, ModelError> {
    if !(threshold > 0.0) {
        return Err(ModelError::Invalid(format!("threshold {threshold} must be positive")));
    }
    let d = delta_pol(traces)?;
    Ok(Preselection {
        delta_pol: d,
        threshold,
        accepted: d.abs() < threshold,
        negative: d < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn g2_reference_values() {
        let m = G2Model::new(1.0, 0.7, 3.0, 2.0, 50.0).unwrap();
        assert_eq!(m.value(3.0), 0.0);
        let m2 = G2Model::new(2.0, 0.7, 3.0, 2.0, 50.0).unwrap();
        assert_eq!(m2.value(3.0), 0.5);
        let flat = G2Model::new(1.0, 0.0, 0.0, 2.0, 50.0).unwrap();
        assert!((flat.value(1e4) - 1.0).abs() < 1e-15);
        assert_eq!(m.value(1.0), m.value(5.0));
        assert!(G2Model::new(0.5, 0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn background_correction() {
        assert_eq!(g2_background_correct(0.37, 1.0).unwrap(), 0.37);
        let rho: f64 = 0.8;
        assert!(g2_background_correct(1.0 - rho * rho, rho).unwrap().abs() < 1e-15);
        assert!(g2_background_correct(0.38, 0.9).unwrap() < 0.38);
        assert!(g2_background_correct(0.3, 0.0).is_err());
        let r = BackgroundRatio::from_intensities(90.0, 10.0).unwrap();
        assert_relative_eq!(r.rho(), 0.9);
    }

    #[test]
    fn saturation_values() {
        let m = SaturationModel::new(119.3e3, 500.0, 0.0).unwrap();
        assert_eq!(m.value(0.0), 0.0);
        assert_eq!(m.value(500.0), 119.3e3 / 2.0);
        assert!(m.value(1e9) < 119.3e3);
    }

    #[test]
    fn delta_pol_examples() {
        assert_eq!(delta_pol(&[(5.0, 5.0), (7.0, 7.0)]).unwrap(), 0.0);
        assert_eq!(delta_pol(&[(0.0, 3.0)]).unwrap(), 50.0);
        assert!(delta_pol(&[(0.0, 0.0)]).is_err());
        // 14.16 % imbalance: Pol1 fraction 0.3584
        let p = preselect(&[(35.84, 64.16)], DELTA_POL_THRESHOLD).unwrap();
        assert_relative_eq!(p.delta_pol, 14.16, max_relative = 1e-12);
        assert!(!p.accepted);
        let p = preselect(&[(49.09, 50.91)], DELTA_POL_THRESHOLD).unwrap();
        assert_relative_eq!(p.delta_pol, 0.91, max_relative = 1e-9);
        assert!(p.accepted);
        let p = preselect(&[(60.0, 40.0)], DELTA_POL_THRESHOLD).unwrap();
        assert!(p.negative && !p.accepted);
    }

    #[test]
    fn delta_pol_scale_invariant() {
        let t = [(3.0, 4.0), (10.0, 2.0), (7.5, 7.0)];
        let scaled: Vec<(f64, f64)> = t.iter().map(|&(a, b)| (a * 13.0, b * 13.0)).collect();
        assert_relative_eq!(delta_pol(&t).unwrap(), delta_pol(&scaled).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn smoothing_and_peaks() {
        assert_eq!(smooth3(&[0.0, 3.0, 0.0]), vec![1.5, 1.0, 1.5]);
        let y = [0.0, 1.0, 0.0, 0.0, 5.0, 0.0, 2.0, 0.0];
        let p = maxima_by_prominence(&y);
        assert_eq!(p[0].0, 4);
        assert_eq!(p[1].0, 6);
        assert_eq!(p[2].0, 1);
    }

    #[test]
    fn odmr_fit_exact_data() {
        let truth = OdmrModel {
            peaks: [
                Peak { amplitude: -0.02, center: 2.0, width: 4.0 },
                Peak { amplitude: -0.015, center: 13.6, width: 4.5 },
            ],
            offset: 1.0,
        };
        let f: Vec<f64> = (0..121).map(|i| -20.0 + 0.4 * i as f64).collect();
        let y: Vec<f64> = f.iter().map(|&v| truth.value(v)).collect();
        let fit = fit_odmr(&f, &y, None, None, &LmOptions::default()).unwrap();
        assert!((fit.splitting.value - 11.6).abs() < 1e-6, "{:?}", fit.model);
    }

    #[test]
    fn ple_guess_orders_peaks_by_frequency() {
        let truth = PleLineModel {
            peaks: [
                Peak { amplitude: 50.0, center: -0.5, width: 0.05 },
                Peak { amplitude: 80.0, center: 0.5, width: 0.06 },
            ],
            offset: 2.0,
        };
        let f: Vec<f64> = (0..200).map(|i| -1.5 + 3.0 * i as f64 / 199.0).collect();
        let y: Vec<f64> = f.iter().map(|&v| truth.value(v)).collect();
        let g = ple_initial_guess(&f, &y).unwrap();
        assert!((g.peaks[0].center + 0.5).abs() < 0.05 && (g.peaks[1].center - 0.5).abs() < 0.05);
        let (m, fit) = fit_double_gaussian(&f, &y, None, None, &LmOptions::default()).unwrap();
        assert!(fit.r_squared > 1.0 - 1e-10);
        assert_relative_eq!(m.fwhm(1), FWHM_PER_SIGMA * 0.06, max_relative = 1e-6);
    }
}
