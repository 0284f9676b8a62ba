//! Spectrally weighted enhancement of the air | SiO2 | Ag | SiC | Ag | air
//! antenna, parameter sweeps and thickness optimization.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dipole::{
    bulk_reference_power, collected_power, CollectionGeometry, DipoleConfig, DipoleOrientation,
    ReferenceModel,
};
use crate::materials::{MaterialLibrary, MaterialTable};
use crate::stratified::{wavelength_grid, Layer, OpticsError, Stack};
use crate::textio;

/// Relative emission intensity versus wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpectrum {
    samples: Vec<(f64, f64)>,
}

const BUNDLED_V2: &str = include_str!("../data/spectra/v2_rt.txt");

impl EmitterSpectrum {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, OpticsError> {
        if samples.is_empty() {
            return Err(OpticsError::Config("emitter spectrum is empty".into()));
        }
        if samples.iter().any(|&(w, i)| !w.is_finite() || !i.is_finite() || i < 0.0) {
            return Err(OpticsError::Config(
                "emitter spectrum needs finite wavelengths and intensities >= 0".into(),
            ));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(OpticsError::Config(
                "emitter spectrum wavelengths must be strictly increasing".into(),
            ));
        }
        if !samples.iter().any(|&(_, i)| i > 0.0) {
            return Err(OpticsError::Config(
                "emitter spectrum has no positive intensity".into(),
            ));
        }
        Ok(Self { samples })
    }

    /// Two columns: `wavelength_nm intensity`.
    pub fn parse(text: &str) -> Result<Self, OpticsError> {
        let rows = textio::parse_columns(text, 2)
            .map_err(|e| OpticsError::Config(format!("emitter spectrum: {e}")))?;
        Self::new(rows.into_iter().map(|r| (r[0], r[1])).collect())
    }

    pub fn load(path: &Path) -> Result<Self, OpticsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OpticsError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| OpticsError::Config(format!("{}: {e}", path.display())))
    }

    /// Room-temperature V2 emission model shipped with the crate.
    pub fn bundled_v2() -> Self {
        Self::parse(BUNDLED_V2).expect("bundled emitter spectrum")
    }

    /// Narrow peak at `wavelength_nm`, zero elsewhere.
    pub fn line(wavelength_nm: f64, half_width_nm: f64) -> Result<Self, OpticsError> {
        Self::new(vec![
            (wavelength_nm - half_width_nm, 0.0),
            (wavelength_nm, 1.0),
            (wavelength_nm + half_width_nm, 0.0),
        ])
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, OpticsError> {
        Self::new(self.samples.iter().map(|&(w, i)| (w, i * factor)).collect())
    }

    /// Linear interpolation; zero outside the tabulated support.
    pub fn intensity_at(&self, wavelength_nm: f64) -> f64 {
        let s = &self.samples;
        if s.len() == 1 {
            return if s[0].0 == wavelength_nm { s[0].1 } else { 0.0 };
        }
        if wavelength_nm < s[0].0 || wavelength_nm > s[s.len() - 1].0 {
            return 0.0;
        }
        let hi = s.partition_point(|&(w, _)| w < wavelength_nm);
        if s[hi].0 == wavelength_nm {
            return s[hi].1;
        }
        let (a, b) = (s[hi - 1], s[hi]);
        a.1 + (wavelength_nm - a.0) / (b.0 - a.0) * (b.1 - a.1)
    }
}

/// Inclusive wavelength grid `min:max:step` in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub min_nm: f64,
    pub max_nm: f64,
    pub step_nm: f64,
}

impl SpectralWindow {
    /// Room-temperature detection band.
    pub const RT: SpectralWindow = SpectralWindow { min_nm: 900.0, max_nm: 1000.0, step_nm: 5.0 };
    /// Low-temperature detection band.
    pub const LT: SpectralWindow = SpectralWindow { min_nm: 925.0, max_nm: 1150.0, step_nm: 5.0 };
    /// Whole phonon sideband.
    pub const FULL: SpectralWindow = SpectralWindow { min_nm: 900.0, max_nm: 1150.0, step_nm: 5.0 };

    pub fn new(min_nm: f64, max_nm: f64, step_nm: f64) -> Result<Self, OpticsError> {
        if !(min_nm.is_finite() && max_nm.is_finite() && min_nm > 0.0 && min_nm < max_nm && step_nm > 0.0) {
            return Err(OpticsError::Config(format!(
                "invalid spectral window {min_nm}:{max_nm}:{step_nm}"
            )));
        }
        Ok(Self { min_nm, max_nm, step_nm })
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "rt" => Some(Self::RT),
            "lt" => Some(Self::LT),
            "full" | "psb" => Some(Self::FULL),
            _ => None,
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        wavelength_grid(self.min_nm, self.max_nm, self.step_nm).expect("validated window")
    }

    /// Spectrum resampled onto [`Self::grid`] and normalized to unit sum.
    pub fn weights(&self, spectrum: &EmitterSpectrum) -> Result<Vec<(f64, f64)>, OpticsError> {
        let raw: Vec<(f64, f64)> = self
            .grid()
            .into_iter()
            .map(|wl| (wl, spectrum.intensity_at(wl)))
            .collect();
        let total: f64 = raw.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return Err(OpticsError::Config(format!(
                "emitter spectrum does not overlap window {self}"
            )));
        }
        Ok(raw.into_iter().map(|(wl, w)| (wl, w / total)).collect())
    }
}

impl fmt::Display for SpectralWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min_nm, self.max_nm, self.step_nm)
    }
}

impl FromStr for SpectralWindow {
    type Err = OpticsError;

    /// `min:max:step`, `min:max` (5 nm step) or a preset name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(w) = Self::preset(s.trim()) {
            return Ok(w);
        }
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| OpticsError::Config(format!("bad window {s:?}: {p:?} is not a number")))
        };
        match parts.as_slice() {
            [a, b] => Self::new(num(a)?, num(b)?, 5.0),
            [a, b, c] => Self::new(num(a)?, num(b)?, num(c)?),
            _ => Err(OpticsError::Config(format!(
                "bad window {s:?}, expected min:max[:step] or rt|lt|full"
            ))),
        }
    }
}

/// Which SiC refractive index the membrane uses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexModel {
    /// Ordinary-ray table (`sic`).
    #[default]
    Ordinary,
    /// Extraordinary-ray table (`sic_e`).
    Extraordinary,
    /// Dispersionless isotropic index.
    Isotropic(f64),
}

impl FromStr for IndexModel {
    type Err = OpticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "ordinary" => return Ok(Self::Ordinary),
            "extraordinary" => return Ok(Self::Extraordinary),
            _ => {}
        }
        s.strip_prefix("isotropic(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|n| *n >= 1.0)
            .map(Self::Isotropic)
            .ok_or_else(|| {
                OpticsError::Config(format!(
                    "bad index model {s:?}, expected ordinary, extraordinary or isotropic(n)"
                ))
            })
    }
}

/// Material tables of the antenna layers.
#[derive(Debug, Clone)]
pub struct AntennaMaterials {
    pub air: Arc<MaterialTable>,
    pub silica: Arc<MaterialTable>,
    pub silver: Arc<MaterialTable>,
    pub sic: Arc<MaterialTable>,
}

impl AntennaMaterials {
    pub fn from_library(lib: &MaterialLibrary, model: IndexModel) -> Result<Self, OpticsError> {
        let sic = match model {
            IndexModel::Ordinary => lib.get("sic")?,
            IndexModel::Extraordinary => lib.get("sic_e")?,
            IndexModel::Isotropic(n) => {
                let (min, max) = lib.get("sic")?.span();
                Arc::new(MaterialTable::constant(format!("sic_n{n}"), Complex64::new(n, 0.0), min, max)?)
            }
        };
        Ok(Self {
            air: lib.get("air")?,
            silica: lib.get("sio2")?,
            silver: lib.get("ag")?,
            sic,
        })
    }

    pub fn bundled() -> Self {
        Self::from_library(&MaterialLibrary::bundled(), IndexModel::Ordinary).expect("bundled materials")
    }
}

/// Layer thicknesses and emitter placement of the antenna.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaDesign {
    pub silica_nm: f64,
    pub upper_silver_nm: f64,
    pub sic_nm: f64,
    pub lower_silver_nm: f64,
    /// 0 at the thick-silver interface, 1 at the thin-silver interface.
    pub dipole_rel_pos: f64,
    pub orientation: DipoleOrientation,
    #[serde(default)]
    pub index_model: IndexModel,
}

impl Default for AntennaDesign {
    fn default() -> Self {
        Self {
            silica_nm: 150.0,
            upper_silver_nm: 30.0,
            sic_nm: 145.0,
            lower_silver_nm: 200.0,
            dipole_rel_pos: 0.5,
            orientation: DipoleOrientation::Horizontal,
            index_model: IndexModel::Ordinary,
        }
    }
}

impl AntennaDesign {
    /// Index of the SiC membrane in [`Self::stack`].
    pub const HOST_LAYER: usize = 2;

    pub fn stack(&self, m: &AntennaMaterials) -> Result<Stack, OpticsError> {
        Ok(Stack::new(
            m.air.clone(),
            vec![
                Layer::new(m.silica.clone(), self.silica_nm)?,
                Layer::new(m.silver.clone(), self.upper_silver_nm)?,
                Layer::new(m.sic.clone(), self.sic_nm)?,
                Layer::new(m.silver.clone(), self.lower_silver_nm)?,
            ],
            m.air.clone(),
        ))
    }

    pub fn dipole(&self) -> Result<DipoleConfig, OpticsError> {
        if !(0.0..=1.0).contains(&self.dipole_rel_pos) {
            return Err(OpticsError::InvalidGeometry(format!(
                "relative dipole position {} outside [0, 1]",
                self.dipole_rel_pos
            )));
        }
        Ok(DipoleConfig::new(
            self.orientation,
            Self::HOST_LAYER,
            self.dipole_rel_pos * self.sic_nm,
        ))
    }

    pub fn get(&self, p: DesignParam) -> f64 {
        match p {
            DesignParam::UpperSilver => self.upper_silver_nm,
            DesignParam::Sic => self.sic_nm,
            DesignParam::DipoleRelPos => self.dipole_rel_pos,
            DesignParam::Silica => self.silica_nm,
        }
    }

    pub fn with(mut self, p: DesignParam, value: f64) -> Self {
        match p {
            DesignParam::UpperSilver => self.upper_silver_nm = value,
            DesignParam::Sic => self.sic_nm = value,
            DesignParam::DipoleRelPos => self.dipole_rel_pos = value,
            DesignParam::Silica => self.silica_nm = value,
        }
        self
    }
}

/// Design parameters that sweeps and the optimizer can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DesignParam {
    #[serde(rename = "upper_silver_nm")]
    UpperSilver,
    #[serde(rename = "sic_nm")]
    Sic,
    #[serde(rename = "dipole_rel_pos")]
    DipoleRelPos,
    #[serde(rename = "silica_nm")]
    Silica,
}

impl DesignParam {
    pub const ALL: [DesignParam; 4] = [
        DesignParam::UpperSilver,
        DesignParam::Sic,
        DesignParam::DipoleRelPos,
        DesignParam::Silica,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DesignParam::UpperSilver => "upper_silver_nm",
            DesignParam::Sic => "sic_nm",
            DesignParam::DipoleRelPos => "dipole_rel_pos",
            DesignParam::Silica => "silica_nm",
        }
    }
}

impl fmt::Display for DesignParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DesignParam {
    type Err = OpticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| {
                OpticsError::Config(format!(
                    "unknown design parameter {s:?}; expected one of upper_silver_nm, sic_nm, dipole_rel_pos, silica_nm"
                ))
            })
    }
}

/// Weighted enhancement of an arbitrary stack, normalized against the
/// host material of the dipole.
pub fn weighted_enhancement(
    stack: &Stack,
    dipole: &DipoleConfig,
    spectrum: &EmitterSpectrum,
    window: &SpectralWindow,
    geom: &CollectionGeometry,
    reference: ReferenceModel,
) -> Result<f64, OpticsError> {
    let host = stack
        .layers
        .get(dipole.host_layer)
        .ok_or_else(|| OpticsError::InvalidGeometry(format!("stack has no layer {}", dipole.host_layer)))?;
    let mut total = 0.0;
    for (wl, w) in window.weights(spectrum)? {
        if w == 0.0 {
            continue;
        }
        let p = collected_power(stack, dipole, wl, geom)?;
        let p0 = bulk_reference_power(&host.material, wl, geom, dipole.orientation, reference)?;
        total += w * p / p0;
    }
    Ok(total)
}

/// Evaluates the antenna figure of merit for many designs, sharing the
/// spectral weights and bulk reference powers.
#[derive(Debug, Clone)]
pub struct Evaluator {
    materials: AntennaMaterials,
    geometry: CollectionGeometry,
    window: SpectralWindow,
    /// `(wavelength, weight / reference power)` for every nonzero weight.
    terms: Vec<(f64, f64)>,
    orientation: DipoleOrientation,
}

impl Evaluator {
    pub fn new(
        materials: AntennaMaterials,
        spectrum: &EmitterSpectrum,
        window: SpectralWindow,
        geometry: CollectionGeometry,
        reference: ReferenceModel,
        orientation: DipoleOrientation,
    ) -> Result<Self, OpticsError> {
        let mut terms = Vec::new();
        for (wl, w) in window.weights(spectrum)? {
            if w > 0.0 {
                let p0 = bulk_reference_power(&materials.sic, wl, &geometry, orientation, reference)?;
                terms.push((wl, w / p0));
            }
        }
        Ok(Self {
            materials,
            geometry,
            window,
            terms,
            orientation,
        })
    }

    pub fn materials(&self) -> &AntennaMaterials {
        &self.materials
    }

    pub fn window(&self) -> SpectralWindow {
        self.window
    }

    pub fn evaluate(&self, design: &AntennaDesign) -> Result<f64, OpticsError> {
        if design.orientation != self.orientation {
            return Err(OpticsError::Config(
                "design orientation differs from the evaluator's reference".into(),
            ));
        }
        let stack = design.stack(&self.materials)?;
        let dipole = design.dipole()?;
        let mut total = 0.0;
        for &(wl, scale) in &self.terms {
            total += scale * collected_power(&stack, &dipole, wl, &self.geometry)?;
        }
        Ok(total)
    }

    /// Per-wavelength enhancement over the window grid.
    pub fn spectrum(&self, design: &AntennaDesign, reference: ReferenceModel) -> Result<Vec<(f64, f64)>, OpticsError> {
        let stack = design.stack(&self.materials)?;
        let dipole = design.dipole()?;
        crate::dipole::enhancement_spectrum(&stack, &dipole, &self.window.grid(), &self.geometry, reference)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: DesignParam,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl SweepAxis {
    pub fn new(param: DesignParam, min: f64, max: f64, count: usize) -> Result<Self, OpticsError> {
        if count < 2 || !(min.is_finite() && max.is_finite() && min < max) || min < 0.0 {
            return Err(OpticsError::Config(format!(
                "invalid sweep axis {param} {min}..{max} x {count}"
            )));
        }
        if param == DesignParam::DipoleRelPos && max > 1.0 {
            return Err(OpticsError::Config("dipole_rel_pos must stay within [0, 1]".into()));
        }
        Ok(Self { param, min, max, count })
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.max } else { self.min + i as f64 * step })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// One or two axes; the first varies slowest.
    pub axes: Vec<SweepAxis>,
    /// Values of every parameter that is not swept.
    pub base: AntennaDesign,
}

impl SweepSpec {
    pub fn new(axes: Vec<SweepAxis>, base: AntennaDesign) -> Result<Self, OpticsError> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(OpticsError::Config("a sweep needs one or two axes".into()));
        }
        if axes.len() == 2 && axes[0].param == axes[1].param {
            return Err(OpticsError::Config("sweep axes must differ".into()));
        }
        Ok(Self { axes, base })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgMax {
    /// Parameter values of the best cell, one per axis.
    pub coordinates: Vec<f64>,
    pub indices: Vec<usize>,
    pub value: f64,
}

/// Gridded weighted enhancement, row-major with the first axis outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancementMap {
    pub axes: Vec<SweepAxis>,
    pub values: Vec<f64>,
    pub argmax: ArgMax,
}

impl EnhancementMap {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn axis_values(&self, axis: usize) -> Vec<f64> {
        self.axes[axis].values()
    }

    /// Value at grid indices (one per axis).
    pub fn at(&self, idx: &[usize]) -> f64 {
        match idx {
            [i] => self.values[*i],
            [i, j] => self.values[i * self.axes[1].count + j],
            _ => panic!("index rank does not match map"),
        }
    }

    /// Rows of `(coordinates..., value)` in storage order.
    pub fn rows(&self) -> Vec<(Vec<f64>, f64)> {
        let grids: Vec<Vec<f64>> = self.axes.iter().map(SweepAxis::values).collect();
        let inner = if self.axes.len() == 2 { self.axes[1].count } else { 1 };
        self.values
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let coords = if grids.len() == 2 {
                    vec![grids[0][k / inner], grids[1][k % inner]]
                } else {
                    vec![grids[0][k]]
                };
                (coords, v)
            })
            .collect()
    }

    /// Maximum over the second axis for every point of the first.
    pub fn profile_max_over_second(&self) -> Vec<f64> {
        if self.axes.len() == 1 {
            return self.values.clone();
        }
        self.values
            .chunks(self.axes[1].count)
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// For every point of the second axis, the maximum over first-axis
    /// indices in `range`: the ridge of a branch.
    pub fn ridge(&self, range: std::ops::Range<usize>) -> Vec<f64> {
        let inner = self.axes[1].count;
        (0..inner)
            .map(|j| range.clone().map(|i| self.values[i * inner + j]).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// Evaluates `spec` on its full grid in parallel.
pub fn sweep(spec: &SweepSpec, evaluator: &Evaluator) -> Result<EnhancementMap, OpticsError> {
    let grids: Vec<Vec<f64>> = spec.axes.iter().map(SweepAxis::values).collect();
    let cells: Vec<Vec<usize>> = match grids.len() {
        1 => (0..grids[0].len()).map(|i| vec![i]).collect(),
        _ => (0..grids[0].len())
            .flat_map(|i| (0..grids[1].len()).map(move |j| vec![i, j]))
            .collect(),
    };
    let values = cells
        .par_iter()
        .map(|idx| {
            let mut design = spec.base;
            for (axis, &i) in spec.axes.iter().zip(idx) {
                design = design.with(axis.param, grids_value(&grids, axis, spec, i));
            }
            evaluator.evaluate(&design)
        })
        .collect::<Result<Vec<f64>, OpticsError>>()?;
    let (best, &value) = values
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |acc, (k, v)| if *v > *acc.1 { (k, v) } else { acc });
    let indices = cells[best].clone();
    let coordinates = indices.iter().zip(&grids).map(|(&i, g)| g[i]).collect();
    Ok(EnhancementMap {
        axes: spec.axes.clone(),
        values,
        argmax: ArgMax { coordinates, indices, value },
    })
}

fn grids_value(grids: &[Vec<f64>], axis: &SweepAxis, spec: &SweepSpec, i: usize) -> f64 {
    let k = spec.axes.iter().position(|a| a.param == axis.param).unwrap();
    grids[k][i]
}

/// Interior local maxima whose topographic prominence is at least
/// `min_rel_prominence` times the global maximum. Plateaus report their
/// middle index; maxima touching either end are not counted.
pub fn prominent_peaks(profile: &[f64], min_rel_prominence: f64) -> Vec<usize> {
    let n = profile.len();
    let global = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        let mut j = i + 1;
        while j < n && profile[j] == profile[i] {
            j += 1;
        }
        if j < n && profile[i - 1] < profile[i] && profile[j] < profile[i] {
            let h = profile[i];
            let left = profile[..i]
                .iter()
                .rev()
                .take_while(|&&v| v <= h)
                .copied()
                .fold(h, f64::min);
            let right = profile[j..]
                .iter()
                .take_while(|&&v| v <= h)
                .copied()
                .fold(h, f64::min);
            if h - left.max(right) >= min_rel_prominence * global {
                peaks.push((i + j - 1) / 2);
            }
        }
        i = j;
    }
    peaks
}

/// Index ranges of the profile belonging to each peak, split at the minima
/// between neighbouring peaks.
pub fn peak_regions(profile: &[f64], peaks: &[usize]) -> Vec<std::ops::Range<usize>> {
    let mut bounds = vec![0];
    for w in peaks.windows(2) {
        let valley = (w[0]..=w[1])
            .min_by(|&a, &b| profile[a].total_cmp(&profile[b]))
            .unwrap();
        bounds.push(valley);
    }
    bounds.push(profile.len());
    bounds.windows(2).map(|b| b[0]..b[1]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximizeOptions {
    /// Grid points per dimension of the initial scan.
    pub grid_points: usize,
    pub max_evaluations: usize,
    /// Simplex size below which the search stops, relative to each bound width.
    pub x_tolerance: f64,
    /// Spread of simplex values below which the search stops, relative.
    pub f_tolerance: f64,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self {
            grid_points: 9,
            max_evaluations: 400,
            x_tolerance: 1e-4,
            f_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// Best value of the initial grid scan.
    pub grid_best: f64,
}

/// Grid scan over the box followed by Nelder–Mead from the best cell,
/// with points clamped into the bounds.
pub fn maximize<F>(f: F, bounds: &[(f64, f64)], opts: &MaximizeOptions) -> Result<MaximizeResult, OpticsError>
where
    F: Fn(&[f64]) -> Result<f64, OpticsError> + Sync,
{
    let dim = bounds.len();
    if dim == 0 {
        return Err(OpticsError::Config("nothing to optimize".into()));
    }
    if bounds.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
        return Err(OpticsError::Config("optimizer bounds must satisfy lower < upper".into()));
    }
    let g = opts.grid_points.max(2);
    let cells: Vec<Vec<f64>> = (0..g.pow(dim as u32))
        .map(|mut k| {
            bounds
                .iter()
                .map(|&(lo, hi)| {
                    let i = k % g;
                    k /= g;
                    lo + (hi - lo) * i as f64 / (g - 1) as f64
                })
                .collect()
        })
        .collect();
    let scores = cells.par_iter().map(|x| f(x)).collect::<Result<Vec<f64>, _>>()?;
    let mut evaluations = cells.len();
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (k, v)| if *v > scores[b] { k } else { b });
    let grid_best = scores[best];

    let clamp = |x: &mut Vec<f64>| {
        for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(lo, hi);
        }
    };
    // minimize the negated objective
    let obj = |x: &[f64]| f(x).map(|v| -v);
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(cells[best].clone(), -grid_best)];
    for d in 0..dim {
        let (lo, hi) = bounds[d];
        let step = (hi - lo) / (g - 1) as f64 * 0.5;
        let mut x = cells[best].clone();
        x[d] = if x[d] + step <= hi { x[d] + step } else { x[d] - step };
        clamp(&mut x);
        let v = obj(&x)?;
        evaluations += 1;
        simplex.push((x, v));
    }
    let widths: Vec<f64> = bounds.iter().map(|&(lo, hi)| hi - lo).collect();
    let mut converged = false;
    while evaluations < opts.max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (fb, fw) = (simplex[0].1, simplex[dim].1);
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).zip(&widths).map(|((a, b), w)| (a - b).abs() / w))
            .fold(0.0, f64::max);
        if size < opts.x_tolerance || (fw - fb).abs() <= opts.f_tolerance * (fb.abs() + 1e-300) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..dim].iter().map(|(x, _)| x[d]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (w - c))
                .collect();
            clamp(&mut x);
            x
        };
        let xr = along(-1.0);
        let fr = obj(&xr)?;
        evaluations += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = obj(&xe)?;
            evaluations += 1;
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < fw {
                let x = along(-0.5);
                let v = obj(&x)?;
                (x, v)
            } else {
                let x = along(0.5);
                let v = obj(&x)?;
                (x, v)
            };
            evaluations += 1;
            if fc < fw.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for k in 1..=dim {
                    let mut x: Vec<f64> = x0.iter().zip(&simplex[k].0).map(|(a, b)| a + 0.5 * (b - a)).collect();
                    clamp(&mut x);
                    let v = obj(&x)?;
                    simplex[k] = (x, v);
                }
                evaluations += dim;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    Ok(MaximizeResult {
        x,
        value: -v,
        converged,
        evaluations,
        grid_best,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignOptimum {
    pub design: AntennaDesign,
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub grid_best: f64,
}

/// Maximizes the evaluator's figure of merit over `free` parameters,
/// starting from `base` for everything else.
pub fn optimize(
    evaluator: &Evaluator,
    base: &AntennaDesign,
    free: &[(DesignParam, f64, f64)],
    opts: &MaximizeOptions,
) -> Result<DesignOptimum, OpticsError> {
    let bounds: Vec<(f64, f64)> = free.iter().map(|&(_, lo, hi)| (lo, hi)).collect();
    let build = |x: &[f64]| {
        free.iter()
            .zip(x)
            .fold(*base, |d, (&(p, _, _), &v)| d.with(p, v))
    };
    let result = maximize(|x| evaluator.evaluate(&build(x)), &bounds, opts)?;
    Ok(DesignOptimum {
        design: build(&result.x),
        value: result.value,
        converged: result.converged,
        evaluations: result.evaluations,
        grid_best: result.grid_best,
    })
}

/// Weighted enhancement in `numerator` divided by that in `denominator`.
pub fn window_ratio(
    design: &AntennaDesign,
    materials: &AntennaMaterials,
    spectrum: &EmitterSpectrum,
    numerator: SpectralWindow,
    denominator: SpectralWindow,
    geometry: CollectionGeometry,
    reference: ReferenceModel,
) -> Result<f64, OpticsError> {
    let eval = |w| {
        Evaluator::new(materials.clone(), spectrum, w, geometry, reference, design.orientation)?.evaluate(design)
    };
    let den = eval(denominator)?;
    if !(den.abs() > 0.0) {
        return Err(OpticsError::Config(format!(
            "weighted enhancement in window {denominator} is zero"
        )));
    }
    Ok(eval(numerator)? / den)
}
