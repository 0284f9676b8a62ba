use std::path::PathBuf;

use antenna_core::antenna_design::{
    optimize, peak_regions, prominent_peaks, sweep, window_ratio, AntennaDesign, AntennaMaterials, DesignParam,
    EmitterSpectrum, EnhancementMap, Evaluator, IndexModel, MaximizeOptions, SpectralWindow, SweepAxis, SweepSpec,
};
use antenna_core::dipole::{enhancement_spectrum, CollectionGeometry, DipoleConfig, DipoleOrientation, ReferenceModel};
use antenna_core::materials::MaterialLibrary;
use antenna_core::stratified::{reflectivity_spectrum, wavelength_grid, PolarizationMode, Stack};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::{ensure_exists, fmt, write_csv, write_json};
use crate::textfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

impl From<Orientation> for DipoleOrientation {
    fn from(o: Orientation) -> Self {
        match o {
            Orientation::Horizontal => DipoleOrientation::Horizontal,
            Orientation::Vertical => DipoleOrientation::Vertical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    SemiInfinite,
    Homogeneous,
}

impl From<Reference> for ReferenceModel {
    fn from(r: Reference) -> Self {
        match r {
            Reference::SemiInfinite => ReferenceModel::SemiInfinite,
            Reference::Homogeneous => ReferenceModel::Homogeneous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pol {
    S,
    P,
    Avg,
}

/// Collection geometry and emitter settings shared by the design commands.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct OpticsArgs {
    /// Numerical aperture of the objective [default: 0.9]
    #[arg(long)]
    pub na: Option<f64>,
    /// Dipole orientation [default: horizontal]
    #[arg(long, value_enum)]
    pub orientation: Option<Orientation>,
    /// Normalization geometry [default: semi-infinite]
    #[arg(long, value_enum)]
    pub reference: Option<Reference>,
    /// Gauss-Legendre order of the angular integral [default: 64]
    #[arg(long)]
    pub quadrature_order: Option<usize>,
    /// Emitter spectrum file (two columns); the bundled V2 model otherwise
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
}

impl OpticsArgs {
    fn resolve(&mut self) -> Result<(), CliError> {
        self.na.get_or_insert(0.9);
        self.orientation.get_or_insert(Orientation::Horizontal);
        self.reference.get_or_insert(Reference::SemiInfinite);
        self.quadrature_order.get_or_insert(CollectionGeometry::DEFAULT_ORDER);
        if let Some(p) = &self.spectrum {
            ensure_exists(p)?;
        }
        let na = self.na.unwrap();
        if !(na > 0.0 && na <= 1.0) {
            return Err(CliError::usage(format!("--na must lie in (0, 1], got {na}")));
        }
        if self.quadrature_order.unwrap() < 2 {
            return Err(CliError::usage("--quadrature-order must be at least 2"));
        }
        Ok(())
    }

    fn geometry(&self) -> CollectionGeometry {
        CollectionGeometry::new(self.na.unwrap()).with_order(self.quadrature_order.unwrap())
    }

    fn reference_model(&self) -> ReferenceModel {
        self.reference.unwrap().into()
    }

    fn spectrum(&self) -> Result<EmitterSpectrum, CliError> {
        match &self.spectrum {
            Some(p) => Ok(EmitterSpectrum::load(p)?),
            None => Ok(EmitterSpectrum::bundled_v2()),
        }
    }
}

/// Antenna layer thicknesses; unset values take the defaults.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct DesignArgs {
    /// [default: 150]
    #[arg(long)]
    pub silica_nm: Option<f64>,
    /// [default: 30]
    #[arg(long)]
    pub upper_silver_nm: Option<f64>,
    /// [default: 145]
    #[arg(long)]
    pub sic_nm: Option<f64>,
    /// [default: 200]
    #[arg(long)]
    pub lower_silver_nm: Option<f64>,
    /// 0 at the thick mirror, 1 at the thin one [default: 0.5]
    #[arg(long)]
    pub dipole_rel_pos: Option<f64>,
    /// ordinary, extraordinary or isotropic(n) [default: ordinary]
    #[arg(long)]
    pub index_model: Option<String>,
}

impl DesignArgs {
    fn resolve(&mut self) -> Result<(), CliError> {
        let d = AntennaDesign::default();
        self.silica_nm.get_or_insert(d.silica_nm);
        self.upper_silver_nm.get_or_insert(d.upper_silver_nm);
        self.sic_nm.get_or_insert(d.sic_nm);
        self.lower_silver_nm.get_or_insert(d.lower_silver_nm);
        self.dipole_rel_pos.get_or_insert(d.dipole_rel_pos);
        self.index_model.get_or_insert_with(|| "ordinary".into());
        self.index_model()?;
        Ok(())
    }

    fn index_model(&self) -> Result<IndexModel, CliError> {
        Ok(self.index_model.as_deref().unwrap_or("ordinary").parse()?)
    }

    fn design(&self, optics: &OpticsArgs) -> Result<AntennaDesign, CliError> {
        let design = AntennaDesign {
            silica_nm: self.silica_nm.unwrap(),
            upper_silver_nm: self.upper_silver_nm.unwrap(),
            sic_nm: self.sic_nm.unwrap(),
            lower_silver_nm: self.lower_silver_nm.unwrap(),
            dipole_rel_pos: self.dipole_rel_pos.unwrap(),
            orientation: optics.orientation.unwrap().into(),
            index_model: self.index_model()?,
        };
        design.stack(&AntennaMaterials::bundled())?;
        design.dipole()?;
        Ok(design)
    }

    /// Sets a parameter by its config-file name.
    fn set(&mut self, key: &str, value: &str) -> Result<bool, CliError> {
        let num = || value.parse::<f64>().map_err(|_| CliError::usage(format!("{key} = {value:?} is not a number")));
        match key {
            "silica_nm" => self.silica_nm = Some(num()?),
            "upper_silver_nm" => self.upper_silver_nm = Some(num()?),
            "sic_nm" => self.sic_nm = Some(num()?),
            "lower_silver_nm" => self.lower_silver_nm = Some(num()?),
            "dipole_rel_pos" => self.dipole_rel_pos = Some(num()?),
            "index_model" => self.index_model = Some(value.to_string()),
            _ => return Ok(false),
        }
        Ok(true)
    }
}

fn materials(lib: &MaterialLibrary, design: &AntennaDesign) -> Result<AntennaMaterials, CliError> {
    Ok(AntennaMaterials::from_library(lib, design.index_model)?)
}

fn evaluator(
    lib: &MaterialLibrary,
    design: &AntennaDesign,
    optics: &OpticsArgs,
    window: SpectralWindow,
) -> Result<Evaluator, CliError> {
    Ok(Evaluator::new(
        materials(lib, design)?,
        &optics.spectrum()?,
        window,
        optics.geometry(),
        optics.reference_model(),
        design.orientation,
    )?)
}

fn parse_window(s: &str) -> Result<SpectralWindow, CliError> {
    Ok(s.parse::<SpectralWindow>()?)
}

/// `name=lo:hi` or `name:lo:hi`.
fn parse_bound(s: &str) -> Result<(DesignParam, f64, f64), CliError> {
    let bad = || CliError::usage(format!("bad bound {s:?}, expected name=lo:hi"));
    let (name, range) = s.split_once('=').or_else(|| s.split_once(':')).ok_or_else(bad)?;
    let (lo, hi) = range.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(bad());
    }
    Ok((name.trim().parse()?, lo, hi))
}

fn default_bounds() -> Vec<String> {
    vec!["upper_silver_nm=5:60".into(), "sic_nm=100:250".into()]
}

/// Stack either from a file or from the antenna design flags.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct StackArgs {
    /// Stack description file
    #[arg(long, conflicts_with = "antenna")]
    pub stack: Option<PathBuf>,
    /// Use the antenna stack built from the design flags
    #[arg(long)]
    pub antenna: bool,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct GridArgs {
    /// [default: 900]
    #[arg(long)]
    pub lambda_min: Option<f64>,
    /// [default: 1150]
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// [default: 5]
    #[arg(long)]
    pub lambda_step: Option<f64>,
}

impl GridArgs {
    fn resolve(&mut self) -> Result<Vec<f64>, CliError> {
        let grid = wavelength_grid(
            *self.lambda_min.get_or_insert(900.0),
            *self.lambda_max.get_or_insert(1150.0),
            *self.lambda_step.get_or_insert(5.0),
        )?;
        Ok(grid)
    }
}

fn load_stack(lib: &MaterialLibrary, s: &StackArgs, design: Option<&AntennaDesign>) -> Result<Stack, CliError> {
    match (&s.stack, design) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Ok(Stack::parse(&text, lib)?)
        }
        (None, Some(d)) => Ok(d.stack(&materials(lib, d)?)?),
        (None, None) => Err(CliError::usage("give --stack FILE or --antenna")),
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ReflectivityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub stack: StackArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Angle of incidence in the incidence medium, degrees
    #[arg(long, default_value_t = 0.0)]
    pub angle_deg: f64,
    #[arg(long, value_enum, default_value = "avg")]
    pub pol: Pol,
    /// Output CSV (stdout if omitted)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl ReflectivityArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        self.grid.resolve()?;
        if let Some(p) = &self.stack.stack {
            ensure_exists(p)?;
        } else if self.stack.antenna {
            self.design.resolve()?;
        } else {
            return Err(CliError::usage("give --stack FILE or --antenna"));
        }
        Ok(())
    }

    pub fn run(&self, lib: &MaterialLibrary, config: &Value) -> Result<(), CliError> {
        let optics = OpticsArgs { orientation: Some(Orientation::Horizontal), ..Default::default() };
        let design = if self.stack.antenna { Some(self.design.design(&optics)?) } else { None };
        let stack = load_stack(lib, &self.stack, design.as_ref())?;
        let grid = self.grid.clone().resolve()?;
        let mode = match self.pol {
            Pol::S => PolarizationMode::S,
            Pol::P => PolarizationMode::P,
            Pol::Avg => PolarizationMode::Avg,
        };
        let r = reflectivity_spectrum(&stack, &grid, self.angle_deg.to_radians(), mode)?;
        let rows: Vec<Vec<String>> = r.iter().map(|&(wl, v)| vec![fmt(wl), fmt(v)]).collect();
        write_csv(self.out.as_deref(), config, &["wavelength_nm", "R"], &rows)
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EnhanceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub stack: StackArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub optics: OpticsArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Index of the layer holding the dipole (with --stack)
    #[arg(long)]
    pub dipole_layer: Option<usize>,
    /// Dipole position inside its layer, 0 to 1 (with --stack)
    #[arg(long)]
    pub dipole_pos_rel: Option<f64>,
    /// Output CSV (stdout if omitted)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl EnhanceArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        self.optics.resolve()?;
        self.grid.resolve()?;
        if let Some(p) = &self.stack.stack {
            ensure_exists(p)?;
            if self.dipole_layer.is_none() {
                return Err(CliError::usage("--stack needs --dipole-layer"));
            }
            self.dipole_pos_rel.get_or_insert(0.5);
        } else if self.stack.antenna {
            self.design.resolve()?;
        } else {
            return Err(CliError::usage("give --stack FILE or --antenna"));
        }
        Ok(())
    }

    pub fn run(&self, lib: &MaterialLibrary, config: &Value) -> Result<(), CliError> {
        let orientation: DipoleOrientation = self.optics.orientation.unwrap().into();
        let (stack, dipole) = if self.stack.antenna {
            let d = self.design.design(&self.optics)?;
            (d.stack(&materials(lib, &d)?)?, d.dipole()?)
        } else {
            let stack = load_stack(lib, &self.stack, None)?;
            let layer = self.dipole_layer.unwrap();
            let dip = DipoleConfig::relative(&stack, orientation, layer, self.dipole_pos_rel.unwrap())?;
            (stack, dip)
        };
        let grid = self.grid.clone().resolve()?;
        let spec = enhancement_spectrum(&stack, &dipole, &grid, &self.optics.geometry(), self.optics.reference_model())?;
        let rows: Vec<Vec<String>> = spec.iter().map(|&(wl, v)| vec![fmt(wl), fmt(v)]).collect();
        write_csv(self.out.as_deref(), config, &["wavelength_nm", "enhancement"], &rows)?;
        if self.out.is_some() {
            let window = SpectralWindow::new(grid[0], *grid.last().unwrap(), self.grid.lambda_step.unwrap())?;
            let weights = window.weights(&self.optics.spectrum()?)?;
            let weighted: f64 = weights.iter().zip(&spec).map(|(w, e)| w.1 * e.1).sum();
            let summary = json!({ "weighted_enhancement": weighted, "window": window.to_string() });
            write_json(None, config, &summary)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepPreset {
    /// Upper silver 5-60 nm x SiC 100-250 nm, 900-1000 nm window
    Fig1c,
    /// SiC 100-600 nm x relative dipole position 0-1
    Fig1e,
    /// One 1-D sweep per design parameter
    SuppSweeps,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Named grid and window
    #[arg(long, value_enum)]
    pub preset: Option<SweepPreset>,
    /// Key-value sweep file; its entries override the preset
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Sweep axis name:min:max:count (first = outer); overrides spec and preset
    #[arg(long = "axis")]
    pub axes: Vec<String>,
    /// Sweep every axis on its own instead of on a joint grid
    #[arg(long)]
    pub separate: bool,
    /// Points per axis, replacing every axis count
    #[arg(long)]
    pub points: Option<usize>,
    /// Spectral window min:max:step or rt|lt|full [default: rt]
    #[arg(long)]
    pub window: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub optics: OpticsArgs,
    /// Output CSV
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Summary JSON (argmax, branches); stdout if omitted
    #[arg(long)]
    #[serde(skip)]
    pub summary: Option<PathBuf>,
}

fn preset_axes(p: SweepPreset) -> (Vec<&'static str>, bool) {
    match p {
        SweepPreset::Fig1c => (vec!["upper_silver_nm:5:60:100", "sic_nm:100:250:100"], false),
        SweepPreset::Fig1e => (vec!["sic_nm:100:600:100", "dipole_rel_pos:0:1:100"], false),
        SweepPreset::SuppSweeps => (
            vec!["upper_silver_nm:5:60:100", "sic_nm:100:600:100", "dipole_rel_pos:0:1:100", "silica_nm:0:400:100"],
            true,
        ),
    }
}

fn parse_axis(s: &str) -> Result<SweepAxis, CliError> {
    let parts: Vec<&str> = s.split(|c: char| c == ':' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
    let bad = || CliError::usage(format!("bad axis {s:?}, expected name:min:max:count"));
    let [name, min, max, count] = parts.as_slice() else {
        return Err(bad());
    };
    Ok(SweepAxis::new(
        name.parse()?,
        min.parse().map_err(|_| bad())?,
        max.parse().map_err(|_| bad())?,
        count.parse().map_err(|_| bad())?,
    )?)
}

fn axis_string(a: &SweepAxis) -> String {
    format!("{}:{}:{}:{}", a.param, a.min, a.max, a.count)
}

impl SweepArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        let mut axes: Vec<String> = Vec::new();
        let mut window = None;
        if let Some(p) = self.preset {
            let (a, sep) = preset_axes(p);
            axes = a.into_iter().map(String::from).collect();
            self.separate |= sep;
        }
        if let Some(path) = self.spec.take() {
            ensure_exists(&path)?;
            let mut spec_axes = Vec::new();
            for (line, key, value) in textfile::key_values(&path)? {
                let ctx = |e: CliError| match e {
                    CliError::Usage(m) => CliError::usage(format!("{}:{line}: {m}", path.display())),
                    other => other,
                };
                match key.as_str() {
                    "axis" => spec_axes.push(value),
                    "window" => window = Some(value),
                    "separate" => {
                        self.separate |= value.parse::<bool>().map_err(|_| ctx(CliError::usage("separate must be true or false")))?
                    }
                    "na" => {
                        self.optics.na.get_or_insert(value.parse().map_err(|_| ctx(CliError::usage("bad na")))?);
                    }
                    "quadrature_order" => {
                        let v = value.parse().map_err(|_| ctx(CliError::usage("bad quadrature_order")))?;
                        self.optics.quadrature_order.get_or_insert(v);
                    }
                    "orientation" => {
                        let v = Orientation::from_str(&value, true).map_err(|e| ctx(CliError::usage(e)))?;
                        self.optics.orientation.get_or_insert(v);
                    }
                    "reference" => {
                        let v = Reference::from_str(&value, true).map_err(|e| ctx(CliError::usage(e)))?;
                        self.optics.reference.get_or_insert(v);
                    }
                    "spectrum" => {
                        let p = PathBuf::from(&value);
                        let p = if p.is_absolute() { p } else { path.parent().unwrap_or(&PathBuf::new()).join(p) };
                        self.optics.spectrum.get_or_insert(p);
                    }
                    k => {
                        let mut probe = DesignArgs::default();
                        if !probe.set(k, &value).map_err(ctx)? {
                            return Err(ctx(CliError::usage(format!("unknown key {k:?}"))));
                        }
                        // flags win over the file
                        let d = &mut self.design;
                        d.silica_nm = d.silica_nm.or(probe.silica_nm);
                        d.upper_silver_nm = d.upper_silver_nm.or(probe.upper_silver_nm);
                        d.sic_nm = d.sic_nm.or(probe.sic_nm);
                        d.lower_silver_nm = d.lower_silver_nm.or(probe.lower_silver_nm);
                        d.dipole_rel_pos = d.dipole_rel_pos.or(probe.dipole_rel_pos);
                        d.index_model = d.index_model.take().or(probe.index_model);
                    }
                }
            }
            if !spec_axes.is_empty() {
                axes = spec_axes;
            }
        }
        if !self.axes.is_empty() {
            axes = std::mem::take(&mut self.axes);
        }
        if axes.is_empty() {
            return Err(CliError::usage("sweep needs --preset, --spec or --axis"));
        }
        let mut parsed = axes.iter().map(|a| parse_axis(a)).collect::<Result<Vec<_>, _>>()?;
        if let Some(n) = self.points.take() {
            for a in &mut parsed {
                *a = SweepAxis::new(a.param, a.min, a.max, n)?;
            }
        }
        if !self.separate {
            SweepSpec::new(parsed.clone(), AntennaDesign::default())?;
        }
        self.axes = parsed.iter().map(axis_string).collect();
        let w = parse_window(self.window.as_deref().or(window.as_deref()).unwrap_or("rt"))?;
        self.window = Some(w.to_string());
        self.design.resolve()?;
        self.optics.resolve()?;
        if self.out.is_none() {
            return Err(CliError::usage("sweep needs --out"));
        }
        Ok(())
    }

    pub fn run(&self, lib: &MaterialLibrary, config: &Value) -> Result<(), CliError> {
        let base = self.design.design(&self.optics)?;
        let window = parse_window(self.window.as_deref().unwrap())?;
        let eval = evaluator(lib, &base, &self.optics, window)?;
        let axes = self.axes.iter().map(|a| parse_axis(a)).collect::<Result<Vec<_>, _>>()?;
        if self.separate {
            let mut rows = Vec::new();
            let mut summary = Vec::new();
            for axis in &axes {
                let map = sweep(&SweepSpec::new(vec![*axis], base)?, &eval)?;
                for (c, v) in map.rows() {
                    rows.push(vec![axis.param.to_string(), fmt(c[0]), fmt(v)]);
                }
                summary.push(json!({ "parameter": axis.param, "argmax": map.argmax }));
            }
            write_csv(self.out.as_deref(), config, &["parameter", "value", "enhancement"], &rows)?;
            return write_json(self.summary.as_deref(), config, &json!({ "sweeps": summary }));
        }
        let map = sweep(&SweepSpec::new(axes.clone(), base)?, &eval)?;
        let mut header: Vec<&str> = axes.iter().map(|a| a.param.name()).collect();
        header.push("enhancement");
        let rows: Vec<Vec<String>> = map
            .rows()
            .into_iter()
            .map(|(c, v)| c.iter().map(|&x| fmt(x)).chain([fmt(v)]).collect())
            .collect();
        write_csv(self.out.as_deref(), config, &header, &rows)?;
        write_json(self.summary.as_deref(), config, &summarize(&map))
    }
}

/// Argmax plus, for 2-D maps, the branches of the profile maximized over
/// the second axis.
pub fn summarize(map: &EnhancementMap) -> Value {
    if map.axes.len() < 2 {
        return json!({ "argmax": map.argmax });
    }
    let profile = map.profile_max_over_second();
    let peaks = prominent_peaks(&profile, 0.1);
    let first = map.axis_values(0);
    let branches: Vec<Value> = peak_regions(&profile, &peaks)
        .into_iter()
        .zip(&peaks)
        .map(|(range, &p)| {
            json!({
                map.axes[0].param.name(): first[p],
                "value": profile[p],
                "range": [first[range.start], first[range.end - 1]],
            })
        })
        .collect();
    json!({ "argmax": map.argmax, "branch_count": branches.len(), "branches": branches })
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeArgs {
    /// Free parameter name=lo:hi, repeatable [default: upper_silver_nm=5:60 sic_nm=100:250]
    #[arg(long = "bounds")]
    pub bounds: Vec<String>,
    /// Spectral window min:max:step or rt|lt|full [default: rt]
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long, default_value_t = 9)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 400)]
    pub max_evaluations: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub optics: OpticsArgs,
    /// Output JSON (stdout if omitted)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn resolve_bounds(bounds: &mut Vec<String>) -> Result<Vec<(DesignParam, f64, f64)>, CliError> {
    if bounds.is_empty() {
        *bounds = default_bounds();
    }
    let parsed = bounds.iter().map(|b| parse_bound(b)).collect::<Result<Vec<_>, _>>()?;
    *bounds = parsed.iter().map(|(p, lo, hi)| format!("{p}={lo}:{hi}")).collect();
    Ok(parsed)
}

impl OptimizeArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        resolve_bounds(&mut self.bounds)?;
        self.window = Some(parse_window(self.window.as_deref().unwrap_or("rt"))?.to_string());
        if self.grid_points < 2 {
            return Err(CliError::usage("--grid-points must be at least 2"));
        }
        self.design.resolve()?;
        self.optics.resolve()
    }

    pub fn run(&self, lib: &MaterialLibrary, config: &Value) -> Result<(), CliError> {
        let base = self.design.design(&self.optics)?;
        let window = parse_window(self.window.as_deref().unwrap())?;
        let eval = evaluator(lib, &base, &self.optics, window)?;
        let free = resolve_bounds(&mut self.bounds.clone())?;
        let opts = MaximizeOptions {
            grid_points: self.grid_points,
            max_evaluations: self.max_evaluations,
            ..Default::default()
        };
        let best = optimize(&eval, &base, &free, &opts)?;
        write_json(self.out.as_deref(), config, &best)
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct WindowRatioArgs {
    /// Numerator window min:max:step or rt|lt|full
    #[arg(long)]
    pub window_a: String,
    /// Denominator window
    #[arg(long)]
    pub window_b: String,
    /// First optimize the free parameters in the denominator window
    #[arg(long)]
    pub at_optimum: bool,
    /// Free parameters for --at-optimum, name=lo:hi
    #[arg(long = "bounds")]
    pub bounds: Vec<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub optics: OpticsArgs,
    /// Output JSON (stdout if omitted)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl WindowRatioArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        self.window_a = parse_window(&self.window_a)?.to_string();
        self.window_b = parse_window(&self.window_b)?.to_string();
        if self.at_optimum {
            resolve_bounds(&mut self.bounds)?;
        } else if !self.bounds.is_empty() {
            return Err(CliError::usage("--bounds only applies with --at-optimum"));
        }
        self.design.resolve()?;
        self.optics.resolve()
    }

    pub fn run(&self, lib: &MaterialLibrary, config: &Value) -> Result<(), CliError> {
        let mut design = self.design.design(&self.optics)?;
        let (a, b) = (parse_window(&self.window_a)?, parse_window(&self.window_b)?);
        let mut optimum = None;
        if self.at_optimum {
            let eval = evaluator(lib, &design, &self.optics, b)?;
            let best = optimize(&eval, &design, &resolve_bounds(&mut self.bounds.clone())?, &MaximizeOptions::default())?;
            design = best.design;
            optimum = Some(best);
        }
        let m = materials(lib, &design)?;
        let spectrum = self.optics.spectrum()?;
        let ratio = window_ratio(&design, &m, &spectrum, a, b, self.optics.geometry(), self.optics.reference_model())?;
        let result = json!({ "ratio": ratio, "design": design, "optimum": optimum });
        write_json(self.out.as_deref(), config, &result)
    }
}
