//! Plane-wave optics of planar multilayers.
//!
//! # Conventions
//!
//! * Time dependence `e^{-iωt}`; a passive medium has `k ≥ 0` in `n + ik`.
//! * Lengths in nm, wavevectors in rad/nm. `k∥` is conserved across layers.
//! * The longitudinal wavevector `kz = sqrt((2πn/λ)² - k∥²)` takes the branch
//!   with `Im kz ≥ 0`, and `Re kz ≥ 0` when `Im kz = 0`.
//! * Every polarization is treated as a scalar problem for one transverse
//!   field component: `E_y` for s and `H_y` for p. The interface admittance is
//!   `q = kz` (s) or `q = kz / n²` (p), so both share
//!   `r = (q1 - q2)/(q1 + q2)` and `t = 2 q1/(q1 + q2)`. In this convention
//!   `r_p = -r_s` at normal incidence.
//! * Power flux along z is proportional to `Re(q)·|ψ|²`, hence
//!   `T = |t|² Re(q_exit)/Re(q_incidence)`.
//! * Layers are listed from the incidence side. Reflection amplitudes are
//!   referenced to the first interface, transmission amplitudes to the last.
//!
//! Stacks are combined with the Redheffer star product of 2×2 scattering
//! matrices, so propagation through a thick absorbing layer only ever
//! multiplies by `e^{i kz d}` with `|e^{i kz d}| ≤ 1`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::{MaterialError, MaterialLibrary, MaterialTable};
use crate::textio;

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("degenerate interface between media {n1} and {n2}: admittances cancel")]
    DegenerateInterface { n1: Complex64, n2: Complex64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("angular quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    S,
    P,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::S, Polarization::P];
}

/// Polarization handling for reflectivity spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarizationMode {
    S,
    P,
    /// Mean of the s and p reflectivities (unpolarized light).
    Avg,
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub material: Arc<MaterialTable>,
    pub thickness_nm: f64,
}

impl Layer {
    /// A layer of finite, non-negative thickness. Zero-thickness layers are
    /// allowed and are an exact no-op in every computation.
    pub fn new(material: Arc<MaterialTable>, thickness_nm: f64) -> Result<Self, OpticsError> {
        if !(thickness_nm.is_finite() && thickness_nm >= 0.0) {
            return Err(OpticsError::InvalidGeometry(format!(
                "layer of {} has invalid thickness {thickness_nm} nm",
                material.name()
            )));
        }
        Ok(Self {
            material,
            thickness_nm,
        })
    }
}

/// Finite layers between two semi-infinite media.
#[derive(Debug, Clone)]
pub struct Stack {
    pub incidence: Arc<MaterialTable>,
    pub layers: Vec<Layer>,
    pub exit: Arc<MaterialTable>,
}

impl Stack {
    pub fn new(incidence: Arc<MaterialTable>, layers: Vec<Layer>, exit: Arc<MaterialTable>) -> Self {
        Self {
            incidence,
            layers,
            exit,
        }
    }

    /// The same structure seen from the exit side.
    pub fn reversed(&self) -> Self {
        Self {
            incidence: self.exit.clone(),
            layers: self.layers.iter().rev().cloned().collect(),
            exit: self.incidence.clone(),
        }
    }

    /// Evaluates every refractive index at one wavelength.
    pub fn resolve(&self, wavelength_nm: f64) -> Result<ResolvedStack, OpticsError> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            layers.push(ResolvedLayer {
                index: l.material.refractive_index(wavelength_nm)?,
                thickness_nm: l.thickness_nm,
            });
        }
        Ok(ResolvedStack {
            incidence: self.incidence.refractive_index(wavelength_nm)?,
            layers,
            exit: self.exit.refractive_index(wavelength_nm)?,
        })
    }

    /// Parses a stack description: `incidence <name>`, `exit <name>` and one
    /// `<material> <thickness_nm>` line per layer, incidence side first.
    pub fn parse(text: &str, library: &MaterialLibrary) -> Result<Self, OpticsError> {
        let mut incidence = None;
        let mut exit = None;
        let mut layers = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = textio::strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |m: &str| OpticsError::Config(format!("stack line {}: {m}", idx + 1));
            match fields.as_slice() {
                ["incidence", name] => incidence = Some(library.get(name)?),
                ["exit", name] => exit = Some(library.get(name)?),
                [name, thickness] => {
                    let d: f64 = thickness
                        .parse()
                        .map_err(|_| bad(&format!("bad thickness {thickness:?}")))?;
                    layers.push(Layer::new(library.get(name)?, d)?);
                }
                _ => return Err(bad("expected `<material> <thickness_nm>`")),
            }
        }
        let incidence =
            incidence.ok_or_else(|| OpticsError::Config("stack has no `incidence` medium".into()))?;
        let exit = exit.ok_or_else(|| OpticsError::Config("stack has no `exit` medium".into()))?;
        Ok(Self::new(incidence, layers, exit))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("incidence {}\n", self.incidence.name());
        for l in &self.layers {
            s.push_str(&format!("{} {}\n", l.material.name(), l.thickness_nm));
        }
        s.push_str(&format!("exit {}\n", self.exit.name()));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedLayer {
    pub index: Complex64,
    pub thickness_nm: f64,
}

/// A stack with all indices evaluated at a single wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedStack {
    pub incidence: Complex64,
    pub layers: Vec<ResolvedLayer>,
    pub exit: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveContext {
    pub wavelength_nm: f64,
    /// Tangential wavevector in rad/nm.
    pub k_parallel: f64,
    pub polarization: Polarization,
}

impl PlaneWaveContext {
    pub fn new(wavelength_nm: f64, k_parallel: f64, polarization: Polarization) -> Result<Self, OpticsError> {
        if !(wavelength_nm > 0.0 && wavelength_nm.is_finite()) {
            return Err(OpticsError::InvalidGeometry(format!(
                "wavelength must be positive, got {wavelength_nm}"
            )));
        }
        if !(k_parallel >= 0.0 && k_parallel.is_finite()) {
            return Err(OpticsError::InvalidGeometry(format!(
                "k_parallel must be non-negative, got {k_parallel}"
            )));
        }
        Ok(Self {
            wavelength_nm,
            k_parallel,
            polarization,
        })
    }

    pub fn normal(wavelength_nm: f64, polarization: Polarization) -> Result<Self, OpticsError> {
        Self::new(wavelength_nm, 0.0, polarization)
    }

    /// Incidence at `angle_rad` from the normal inside a medium of real index
    /// `n_incidence`.
    pub fn from_angle(
        wavelength_nm: f64,
        n_incidence: f64,
        angle_rad: f64,
        polarization: Polarization,
    ) -> Result<Self, OpticsError> {
        let k_par = if angle_rad == 0.0 {
            0.0
        } else {
            vacuum_wavenumber(wavelength_nm) * n_incidence * angle_rad.sin()
        };
        Self::new(wavelength_nm, k_par, polarization)
    }

    pub fn k0(&self) -> f64 {
        vacuum_wavenumber(self.wavelength_nm)
    }
}

pub fn vacuum_wavenumber(wavelength_nm: f64) -> f64 {
    2.0 * PI / wavelength_nm
}

/// `kz` for index `n` with the passive branch (see module docs).
pub fn kz_for_index(n: Complex64, k0: f64, k_parallel: f64) -> Complex64 {
    kz_for_complex_kpar(n, k0, Complex64::new(k_parallel, 0.0))
}

/// As [`kz_for_index`], for a complex tangential wavevector (contour
/// integration below the real axis).
pub fn kz_for_complex_kpar(n: Complex64, k0: f64, k_parallel: Complex64) -> Complex64 {
    let k = n * k0;
    let kz = (k * k - k_parallel * k_parallel).sqrt();
    if kz.im < 0.0 || (kz.im == 0.0 && kz.re < 0.0) {
        -kz
    } else {
        kz
    }
}

pub fn longitudinal_wavevector(
    material: &MaterialTable,
    wavelength_nm: f64,
    k_parallel: f64,
) -> Result<Complex64, OpticsError> {
    let n = material.refractive_index(wavelength_nm)?;
    Ok(kz_for_index(n, vacuum_wavenumber(wavelength_nm), k_parallel))
}

#[inline]
pub(crate) fn admittance(n: Complex64, kz: Complex64, pol: Polarization) -> Complex64 {
    match pol {
        Polarization::S => kz,
        Polarization::P => kz / (n * n),
    }
}

/// Single-interface amplitudes for a wave going from medium 1 into medium 2.
pub fn fresnel(
    n1: Complex64,
    n2: Complex64,
    kz1: Complex64,
    kz2: Complex64,
    pol: Polarization,
) -> Result<(Complex64, Complex64), OpticsError> {
    let q1 = admittance(n1, kz1, pol);
    let q2 = admittance(n2, kz2, pol);
    let sum = q1 + q2;
    if sum.norm() <= f64::EPSILON * (q1.norm() + q2.norm()) || sum.norm() == 0.0 {
        return Err(OpticsError::DegenerateInterface { n1, n2 });
    }
    Ok(((q1 - q2) / sum, 2.0 * q1 / sum))
}

/// Two-port scattering matrix. `fwd` refers to waves travelling from the
/// incidence side towards the exit side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SMatrix {
    pub r_fwd: Complex64,
    pub t_fwd: Complex64,
    pub r_bwd: Complex64,
    pub t_bwd: Complex64,
}

impl SMatrix {
    pub const IDENTITY: SMatrix = SMatrix {
        r_fwd: Complex64::new(0.0, 0.0),
        t_fwd: Complex64::new(1.0, 0.0),
        r_bwd: Complex64::new(0.0, 0.0),
        t_bwd: Complex64::new(1.0, 0.0),
    };

    fn interface(q1: Complex64, q2: Complex64, n1: Complex64, n2: Complex64) -> Result<Self, OpticsError> {
        let sum = q1 + q2;
        if sum.norm() == 0.0 || sum.norm() <= f64::EPSILON * (q1.norm() + q2.norm()) {
            return Err(OpticsError::DegenerateInterface { n1, n2 });
        }
        let r = (q1 - q2) / sum;
        Ok(Self {
            r_fwd: r,
            t_fwd: 2.0 * q1 / sum,
            r_bwd: -r,
            t_bwd: 2.0 * q2 / sum,
        })
    }

    fn propagation(phase: Complex64) -> Self {
        Self {
            r_fwd: Complex64::new(0.0, 0.0),
            t_fwd: phase,
            r_bwd: Complex64::new(0.0, 0.0),
            t_bwd: phase,
        }
    }

    /// Redheffer star product: `self` followed by `next`.
    pub fn star(&self, next: &SMatrix) -> SMatrix {
        let denom = Complex64::new(1.0, 0.0) - self.r_bwd * next.r_fwd;
        SMatrix {
            r_fwd: self.r_fwd + self.t_bwd * next.r_fwd * self.t_fwd / denom,
            t_fwd: next.t_fwd * self.t_fwd / denom,
            r_bwd: next.r_bwd + next.t_fwd * self.r_bwd * next.t_bwd / denom,
            t_bwd: self.t_bwd * next.t_bwd / denom,
        }
    }
}

/// Complex amplitudes and power fractions of a stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    pub r: Complex64,
    pub t: Complex64,
    pub reflectance: f64,
    pub transmittance: f64,
}

impl ResolvedStack {
    pub fn homogeneous(index: Complex64) -> Self {
        Self {
            incidence: index,
            layers: Vec::new(),
            exit: index,
        }
    }

    /// Scattering matrix of the whole structure at `(k0, k∥)`.
    pub fn smatrix(&self, k0: f64, k_parallel: f64, pol: Polarization) -> Result<SMatrix, OpticsError> {
        self.smatrix_complex(k0, Complex64::new(k_parallel, 0.0), pol)
    }

    pub fn smatrix_complex(
        &self,
        k0: f64,
        k_parallel: Complex64,
        pol: Polarization,
    ) -> Result<SMatrix, OpticsError> {
        let mut n_prev = self.incidence;
        let mut q_prev = admittance(n_prev, kz_for_complex_kpar(n_prev, k0, k_parallel), pol);
        let mut s = SMatrix::IDENTITY;
        for layer in self.layers.iter().filter(|l| l.thickness_nm > 0.0) {
            let kz = kz_for_complex_kpar(layer.index, k0, k_parallel);
            let q = admittance(layer.index, kz, pol);
            s = s.star(&SMatrix::interface(q_prev, q, n_prev, layer.index)?);
            let phase = (Complex64::i() * kz * layer.thickness_nm).exp();
            s = s.star(&SMatrix::propagation(phase));
            n_prev = layer.index;
            q_prev = q;
        }
        let q_exit = admittance(self.exit, kz_for_complex_kpar(self.exit, k0, k_parallel), pol);
        Ok(s.star(&SMatrix::interface(q_prev, q_exit, n_prev, self.exit)?))
    }

    pub fn amplitudes(&self, k0: f64, k_parallel: f64, pol: Polarization) -> Result<Amplitudes, OpticsError> {
        let s = self.smatrix(k0, k_parallel, pol)?;
        let q_in = admittance(self.incidence, kz_for_index(self.incidence, k0, k_parallel), pol);
        let q_out = admittance(self.exit, kz_for_index(self.exit, k0, k_parallel), pol);
        let transmittance = if q_in.re > 0.0 {
            s.t_fwd.norm_sqr() * q_out.re / q_in.re
        } else {
            0.0
        };
        Ok(Amplitudes {
            r: s.r_fwd,
            t: s.t_fwd,
            reflectance: s.r_fwd.norm_sqr(),
            transmittance,
        })
    }
}

/// Reflection and transmission of `stack` for one plane wave.
pub fn stack_amplitudes(stack: &Stack, ctx: &PlaneWaveContext) -> Result<Amplitudes, OpticsError> {
    stack
        .resolve(ctx.wavelength_nm)?
        .amplitudes(ctx.k0(), ctx.k_parallel, ctx.polarization)
}

/// `(wavelength, R)` for a plane wave hitting the stack at `angle_rad` from
/// the incidence medium.
pub fn reflectivity_spectrum(
    stack: &Stack,
    wavelengths_nm: &[f64],
    angle_rad: f64,
    mode: PolarizationMode,
) -> Result<Vec<(f64, f64)>, OpticsError> {
    if wavelengths_nm.is_empty() {
        return Err(OpticsError::Config("empty wavelength list".into()));
    }
    if !(0.0..PI / 2.0).contains(&angle_rad) {
        return Err(OpticsError::InvalidGeometry(format!(
            "angle must lie in [0, π/2), got {angle_rad}"
        )));
    }
    wavelengths_nm
        .iter()
        .map(|&wl| {
            let resolved = stack.resolve(wl)?;
            let n_inc = resolved.incidence.re;
            let r = |pol| -> Result<f64, OpticsError> {
                let ctx = PlaneWaveContext::from_angle(wl, n_inc, angle_rad, pol)?;
                Ok(resolved.amplitudes(ctx.k0(), ctx.k_parallel, pol)?.reflectance)
            };
            let value = match mode {
                PolarizationMode::S => r(Polarization::S)?,
                PolarizationMode::P => r(Polarization::P)?,
                PolarizationMode::Avg => 0.5 * (r(Polarization::S)? + r(Polarization::P)?),
            };
            Ok((wl, value))
        })
        .collect()
}

/// Inclusive grid `min, min+step, ...` up to `max` (within 1e-9 of a step).
pub fn wavelength_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, OpticsError> {
    if !(step > 0.0 && min.is_finite() && max.is_finite() && max >= min) {
        return Err(OpticsError::Config(format!(
            "invalid wavelength grid {min}:{max}:{step}"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| min + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn constant(name: &str, n: Complex64) -> Arc<MaterialTable> {
        Arc::new(MaterialTable::constant(name, n, 100.0, 5000.0).unwrap())
    }

    #[test]
    fn kz_branches() {
        let k0 = 2.0 * PI / 1000.0;
        let kz = kz_for_index(c(1.0, 0.0), k0, 0.0);
        assert_eq!(kz, c(k0, 0.0));
        let kz = kz_for_index(c(1.0, 0.0), k0, k0);
        assert_eq!(kz, c(0.0, 0.0));
        let kz = kz_for_index(c(1.0, 0.0), k0, 1.5 * k0);
        assert!(kz.re.abs() < 1e-15 && kz.im > 0.0);
        assert_relative_eq!(kz.im, k0 * (1.25f64).sqrt(), max_relative = 1e-14);
        // lossy medium: decaying branch
        let kz = kz_for_index(c(0.05, 7.0), k0, 0.3 * k0);
        assert!(kz.im > 0.0);
    }

    #[test]
    fn longitudinal_wavevector_uses_table() {
        let vac = MaterialTable::constant("vac", c(1.0, 0.0), 200.0, 2000.0).unwrap();
        let kz = longitudinal_wavevector(&vac, 1000.0, 0.0).unwrap();
        assert_relative_eq!(kz.re, 2.0 * PI / 1000.0);
        assert!(longitudinal_wavevector(&vac, 3000.0, 0.0).is_err());
    }

    #[test]
    fn fresnel_no_interface() {
        let n = c(1.7, 0.0);
        let kz = kz_for_index(n, 0.01, 0.003);
        for pol in Polarization::BOTH {
            let (r, t) = fresnel(n, n, kz, kz, pol).unwrap();
            assert_eq!(r, c(0.0, 0.0));
            assert_relative_eq!(t.norm(), 1.0);
        }
    }

    #[test]
    fn fresnel_air_to_sic_normal_incidence() {
        let k0 = 0.01;
        let (n1, n2) = (c(1.0, 0.0), c(2.6, 0.0));
        let (kz1, kz2) = (kz_for_index(n1, k0, 0.0), kz_for_index(n2, k0, 0.0));
        let expected = ((2.6f64 - 1.0) / 3.6).powi(2);
        let (rs, _) = fresnel(n1, n2, kz1, kz2, Polarization::S).unwrap();
        let (rp, _) = fresnel(n1, n2, kz1, kz2, Polarization::P).unwrap();
        assert_relative_eq!(rs.norm_sqr(), expected, max_relative = 1e-14);
        assert_relative_eq!(rp.norm_sqr(), expected, max_relative = 1e-14);
        // sign convention: H_y amplitude for p
        assert_relative_eq!((rs + rp).norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(expected, 0.19753086419753085, max_relative = 1e-15);
    }

    #[test]
    fn fresnel_metallic_limit() {
        let k0 = 0.01;
        let n1 = c(1.0, 0.0);
        let mut last = 0.0;
        for k in [10.0, 100.0, 1e4, 1e7] {
            let n2 = c(1.0, k);
            let (r, _) = fresnel(n1, n2, kz_for_index(n1, k0, 0.0), kz_for_index(n2, k0, 0.0), Polarization::S).unwrap();
            assert!(r.norm_sqr() >= last);
            last = r.norm_sqr();
        }
        assert!((1.0 - last) < 1e-12);
    }

    #[test]
    fn fresnel_degenerate_denominator() {
        // q1 = -q2 cannot happen for passive media; force it with a gain medium index
        let n1 = c(1.0, 0.0);
        let kz1 = c(1.0, 0.0);
        let err = fresnel(n1, n1, kz1, -kz1, Polarization::S).unwrap_err();
        assert!(matches!(err, OpticsError::DegenerateInterface { .. }));
    }

    #[test]
    fn empty_homogeneous_stack() {
        let air = constant("air", c(1.0, 0.0));
        let stack = Stack::new(air.clone(), vec![], air);
        for pol in Polarization::BOTH {
            let a = stack_amplitudes(&stack, &PlaneWaveContext::normal(950.0, pol).unwrap()).unwrap();
            assert_eq!(a.reflectance, 0.0);
            assert_relative_eq!(a.transmittance, 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn thick_absorbing_layer_is_stable() {
        let air = constant("air", c(1.0, 0.0));
        let ag = constant("ag", c(0.04, 7.0));
        let stack = Stack::new(air.clone(), vec![Layer::new(ag, 5000.0).unwrap()], air);
        let a = stack_amplitudes(&stack, &PlaneWaveContext::normal(1000.0, Polarization::S).unwrap()).unwrap();
        assert!(a.r.re.is_finite() && a.t.re.is_finite());
        assert!(a.transmittance < 1e-100);
        assert!(a.reflectance < 1.0 && a.reflectance > 0.99);
    }

    #[test]
    fn zero_thickness_layer_is_exact_no_op() {
        let lib = MaterialLibrary::bundled();
        let air = lib.get("air").unwrap();
        let sic = lib.get("sic").unwrap();
        let ag = lib.get("ag").unwrap();
        let base = Stack::new(air.clone(), vec![Layer::new(sic.clone(), 137.0).unwrap()], air.clone());
        let mut with_zero = base.clone();
        with_zero.layers.insert(0, Layer::new(ag.clone(), 0.0).unwrap());
        with_zero.layers.push(Layer::new(ag, 0.0).unwrap());
        for pol in Polarization::BOTH {
            let ctx = PlaneWaveContext::new(950.0, 0.004, pol).unwrap();
            assert_eq!(
                stack_amplitudes(&base, &ctx).unwrap(),
                stack_amplitudes(&with_zero, &ctx).unwrap()
            );
        }
    }

    #[test]
    fn stack_file_round_trip() {
        let lib = MaterialLibrary::bundled();
        let text = "# antenna\nincidence air\nsio2 150\nag 22\nsic 137\nag 200\nexit air\n";
        let stack = Stack::parse(text, &lib).unwrap();
        assert_eq!(stack.layers.len(), 4);
        assert_eq!(stack.layers[2].thickness_nm, 137.0);
        let again = Stack::parse(&stack.to_text(), &lib).unwrap();
        assert_eq!(again.to_text(), stack.to_text());
        assert!(Stack::parse("sic 100\nexit air\n", &lib).is_err());
        assert!(Stack::parse("incidence air\nunobtainium 3\nexit air\n", &lib).is_err());
        assert!(Stack::parse("incidence air\nsic -3\nexit air\n", &lib).is_err());
    }

    #[test]
    fn reflectivity_spectrum_normal_incidence_s_equals_p() {
        let lib = MaterialLibrary::bundled();
        let stack = Stack::parse("incidence air\nsio2 150\nag 22\nsic 137\nag 200\nexit air\n", &lib).unwrap();
        let wls = wavelength_grid(900.0, 1150.0, 5.0).unwrap();
        let s = reflectivity_spectrum(&stack, &wls, 0.0, PolarizationMode::S).unwrap();
        let p = reflectivity_spectrum(&stack, &wls, 0.0, PolarizationMode::P).unwrap();
        for (a, b) in s.iter().zip(&p) {
            assert!((a.1 - b.1).abs() < 1e-12);
            assert!(a.1 <= 1.0 + 1e-12 && a.1 >= 0.0);
        }
        assert!(reflectivity_spectrum(&stack, &[], 0.0, PolarizationMode::Avg).is_err());
    }

    #[test]
    fn grid_is_inclusive() {
        let g = wavelength_grid(900.0, 1000.0, 5.0).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(*g.last().unwrap(), 1000.0);
        assert!(wavelength_grid(900.0, 1000.0, 0.0).is_err());
    }
}
