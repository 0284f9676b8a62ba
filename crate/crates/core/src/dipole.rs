//! Emission of a point dipole embedded in a planar stack.
//!
//! The dipole sits inside one lossless layer (the host). For every
//! tangential wavevector its plane-wave spectrum is split into an upward and
//! a downward wave; the lower sub-stack reflects the downward part back up
//! and the cavity formed with the upper sub-stack adds the round-trip factor
//! `1 / (1 - r_up r_down e^{2i kz d})`. The upward field leaving the host is
//! transmitted into the incidence medium, where an objective of numerical
//! aperture `NA` collects every direction with `k∥ ≤ k0·NA`.
//!
//! Powers are expressed in units of the total power the same dipole radiates
//! in vacuum, so a dipole in a homogeneous medium of index `n` radiates `n`.
//! Positions are measured from the lower (exit-side) boundary of the host.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::materials::MaterialTable;
use crate::stratified::{
    admittance, kz_for_complex_kpar, kz_for_index, vacuum_wavenumber, OpticsError, Polarization,
    ResolvedLayer, ResolvedStack, Stack,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DipoleOrientation {
    /// Parallel to the interfaces.
    Horizontal,
    /// Normal to the interfaces.
    Vertical,
}

impl DipoleOrientation {
    /// `(G, sign)` per polarization: the azimuth-integrated angular weight
    /// in terms of the host-side `cos θ`, and the ratio of downward to upward
    /// source amplitude in the scalar convention of [`crate::stratified`].
    fn channel(self, pol: Polarization, cos_h: Complex64) -> (Complex64, f64) {
        let one = Complex64::new(1.0, 0.0);
        match (self, pol) {
            (DipoleOrientation::Horizontal, Polarization::S) => (one, 1.0),
            (DipoleOrientation::Horizontal, Polarization::P) => (cos_h * cos_h, -1.0),
            (DipoleOrientation::Vertical, Polarization::S) => (Complex64::new(0.0, 0.0), 1.0),
            (DipoleOrientation::Vertical, Polarization::P) => (2.0 * (one - cos_h * cos_h), 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleConfig {
    pub orientation: DipoleOrientation,
    /// Index into `Stack::layers`.
    pub host_layer: usize,
    /// Distance from the lower boundary of the host layer, nm.
    pub position_nm: f64,
}

impl DipoleConfig {
    pub fn new(orientation: DipoleOrientation, host_layer: usize, position_nm: f64) -> Self {
        Self {
            orientation,
            host_layer,
            position_nm,
        }
    }

    /// Position given as a fraction of the host thickness (0 = lower boundary).
    pub fn relative(
        stack: &Stack,
        orientation: DipoleOrientation,
        host_layer: usize,
        relative_position: f64,
    ) -> Result<Self, OpticsError> {
        let host = stack.layers.get(host_layer).ok_or_else(|| {
            OpticsError::InvalidGeometry(format!("stack has no layer {host_layer}"))
        })?;
        if !(0.0..=1.0).contains(&relative_position) {
            return Err(OpticsError::InvalidGeometry(format!(
                "relative dipole position {relative_position} outside [0, 1]"
            )));
        }
        Ok(Self::new(
            orientation,
            host_layer,
            relative_position * host.thickness_nm,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectionGeometry {
    pub numerical_aperture: f64,
    /// Gauss–Legendre order of the polar integration in `cos θ`.
    pub quadrature_order: usize,
    /// When set, the integral is repeated at twice the order and a relative
    /// change above this tolerance is reported as a quadrature error.
    pub convergence_tolerance: Option<f64>,
}

impl CollectionGeometry {
    pub const DEFAULT_ORDER: usize = 64;

    pub fn new(numerical_aperture: f64) -> Self {
        Self {
            numerical_aperture,
            quadrature_order: Self::DEFAULT_ORDER,
            convergence_tolerance: None,
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.quadrature_order = order;
        self
    }
}

/// Geometry against which collected power is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceModel {
    /// Dipole in semi-infinite bulk below a planar bulk–air interface,
    /// collected by the same air objective.
    #[default]
    SemiInfinite,
    /// Dipole in an unbounded bulk medium; power inside the polar cone
    /// `θ ≤ arcsin(NA)` measured in the bulk.
    Homogeneous,
}

/// One wavelength of a dipole-in-cavity problem, all indices resolved.
#[derive(Debug, Clone)]
pub(crate) struct Cavity {
    k0: f64,
    /// Collection (incidence) medium, real index.
    n_top: f64,
    n_host: f64,
    host_thickness: f64,
    position: f64,
    /// Host → layers above (reversed) → incidence medium.
    upper: ResolvedStack,
    /// Host → layers below → exit medium.
    lower: ResolvedStack,
}

impl Cavity {
    pub(crate) fn new(stack: &Stack, dipole: &DipoleConfig, wavelength_nm: f64) -> Result<Self, OpticsError> {
        let host = stack.layers.get(dipole.host_layer).ok_or_else(|| {
            OpticsError::InvalidGeometry(format!("stack has no layer {}", dipole.host_layer))
        })?;
        let d = host.thickness_nm;
        if !(dipole.position_nm >= 0.0 && dipole.position_nm <= d) {
            return Err(OpticsError::InvalidGeometry(format!(
                "dipole position {} nm outside host layer of {d} nm",
                dipole.position_nm
            )));
        }
        let n_host = host.material.refractive_index(wavelength_nm)?;
        if n_host.im != 0.0 {
            return Err(OpticsError::Unsupported(format!(
                "dipole host {} absorbs at {wavelength_nm} nm (k = {})",
                host.material.name(),
                n_host.im
            )));
        }
        let n_top = stack.incidence.refractive_index(wavelength_nm)?;
        if n_top.im != 0.0 {
            return Err(OpticsError::Unsupported(format!(
                "collection medium {} absorbs at {wavelength_nm} nm",
                stack.incidence.name()
            )));
        }
        let resolve = |layers: &mut dyn Iterator<Item = &crate::stratified::Layer>| {
            layers
                .map(|l| {
                    Ok(ResolvedLayer {
                        index: l.material.refractive_index(wavelength_nm)?,
                        thickness_nm: l.thickness_nm,
                    })
                })
                .collect::<Result<Vec<_>, OpticsError>>()
        };
        let upper = ResolvedStack {
            incidence: n_host,
            layers: resolve(&mut stack.layers[..dipole.host_layer].iter().rev())?,
            exit: n_top,
        };
        let lower = ResolvedStack {
            incidence: n_host,
            layers: resolve(&mut stack.layers[dipole.host_layer + 1..].iter())?,
            exit: stack.exit.refractive_index(wavelength_nm)?,
        };
        Ok(Self {
            k0: vacuum_wavenumber(wavelength_nm),
            n_top: n_top.re,
            n_host: n_host.re,
            host_thickness: d,
            position: dipole.position_nm,
            upper,
            lower,
        })
    }

    /// Bulk host below a planar interface to a medium of index `n_top`.
    pub(crate) fn half_space(n_host: f64, n_top: f64, wavelength_nm: f64) -> Self {
        let host = Complex64::new(n_host, 0.0);
        Self {
            k0: vacuum_wavenumber(wavelength_nm),
            n_top,
            n_host,
            host_thickness: 0.0,
            position: 0.0,
            upper: ResolvedStack {
                incidence: host,
                layers: Vec::new(),
                exit: Complex64::new(n_top, 0.0),
            },
            lower: ResolvedStack::homogeneous(host),
        }
    }

    fn check_aperture(&self, na: f64) -> Result<(), OpticsError> {
        if !(na > 0.0 && na <= self.n_top) {
            return Err(OpticsError::InvalidGeometry(format!(
                "numerical aperture {na} outside (0, {}] of the collection medium",
                self.n_top
            )));
        }
        if na > self.n_host {
            return Err(OpticsError::Unsupported(format!(
                "numerical aperture {na} exceeds the host index {}; collected waves would be evanescent in the host",
                self.n_host
            )));
        }
        Ok(())
    }

    /// Azimuth-integrated `dP/d(cos θ_top)` at `cos θ_top = c`, with the
    /// in-plane dipole projections supplied by `weights(pol, cos_h)`.
    fn collected_density<W>(&self, c: f64, weights: W) -> Result<f64, OpticsError>
    where
        W: Fn(Polarization, Complex64) -> (Complex64, f64),
    {
        let sin_top = (1.0 - c * c).max(0.0).sqrt();
        let k_par = self.k0 * self.n_top * sin_top;
        let n_h = Complex64::new(self.n_host, 0.0);
        let n_t = Complex64::new(self.n_top, 0.0);
        let kz_h = kz_for_index(n_h, self.k0, k_par);
        let kz_t = kz_for_index(n_t, self.k0, k_par);
        let cos_h = kz_h / (self.k0 * self.n_host);
        let i = Complex64::i();
        let e_down = (2.0 * i * kz_h * self.position).exp();
        let e_round = (2.0 * i * kz_h * self.host_thickness).exp();
        let e_exit = (i * kz_h * (self.host_thickness - self.position)).exp();
        let mut total = 0.0;
        for pol in Polarization::BOTH {
            let (g, sign) = weights(pol, cos_h);
            if g == Complex64::new(0.0, 0.0) {
                continue;
            }
            let up = self.upper.smatrix(self.k0, k_par, pol)?;
            let down = self.lower.smatrix(self.k0, k_par, pol)?;
            let source = (1.0 + sign * down.r_fwd * e_down) / (1.0 - up.r_fwd * down.r_fwd * e_round);
            let psi = up.t_fwd * source * e_exit;
            let flux = admittance(n_t, kz_t, pol).re / admittance(n_h, kz_h, pol).re;
            let factor = 0.375 * self.n_top * self.n_top * c / (self.n_host * cos_h.re);
            total += factor * g.re * psi.norm_sqr() * flux;
        }
        Ok(total)
    }

    fn collected_with<W>(&self, geom: &CollectionGeometry, order: usize, weights: &W) -> Result<f64, OpticsError>
    where
        W: Fn(Polarization, Complex64) -> (Complex64, f64),
    {
        self.check_aperture(geom.numerical_aperture)?;
        let order = NonZeroUsize::new(order)
            .ok_or_else(|| OpticsError::Config("quadrature order must be positive".into()))?;
        let s = geom.numerical_aperture / self.n_top;
        let c_min = (1.0 - s * s).max(0.0).sqrt();
        let rule = GaussLegendre::new(order);
        let (mid, half) = (0.5 * (1.0 + c_min), 0.5 * (1.0 - c_min));
        let mut sum = 0.0;
        for &(x, w) in rule.as_node_weight_pairs() {
            sum += w * self.collected_density(mid + half * x, weights)?;
        }
        Ok(sum * half)
    }

    pub(crate) fn collected(&self, orientation: DipoleOrientation, geom: &CollectionGeometry) -> Result<f64, OpticsError> {
        let weights = |pol, cos_h| orientation.channel(pol, cos_h);
        let value = self.collected_with(geom, geom.quadrature_order, &weights)?;
        if let Some(tol) = geom.convergence_tolerance {
            let refined = self.collected_with(geom, 2 * geom.quadrature_order, &weights)?;
            let change = (refined - value).abs() / refined.abs().max(f64::MIN_POSITIVE);
            if change > tol {
                return Err(OpticsError::Quadrature(format!(
                    "order {} gives {value:.12e}, order {} gives {refined:.12e} (relative change {change:.3e} > {tol:.1e})",
                    geom.quadrature_order,
                    2 * geom.quadrature_order
                )));
            }
        }
        Ok(value)
    }

    /// Total power radiated into all channels (propagating, guided,
    /// evanescent/absorbed), from the reflected-field work integral over
    /// `s = k∥ / k_host` along a contour below the real axis.
    pub(crate) fn total(&self, orientation: DipoleOrientation) -> Result<f64, OpticsError> {
        let z_min = self.position.min(self.host_thickness - self.position);
        if z_min <= 0.0 {
            return Err(OpticsError::Unsupported(
                "total power diverges for a dipole on an interface".into(),
            ));
        }
        let k_h = self.k0 * self.n_host;
        let max_index = self
            .upper
            .layers
            .iter()
            .chain(self.lower.layers.iter())
            .map(|l| l.index.re)
            .chain([self.upper.exit.re, self.lower.exit.re, self.n_host])
            .fold(0.0, f64::max);
        // guided and plasmon poles sit below max(Re n)/n_host, plus some margin
        let s_turn = (1.5 * max_index / self.n_host).max(2.0);
        let depth = 0.2f64.min(0.25 * s_turn);
        let i = Complex64::i();
        let integrand = |s: Complex64| -> Result<Complex64, OpticsError> {
            let k_par = s * k_h;
            let kz = kz_for_complex_kpar(Complex64::new(self.n_host, 0.0), self.k0, k_par);
            let s_z = kz / k_h;
            let e_down = (2.0 * i * kz * self.position).exp();
            let e_up = (2.0 * i * kz * (self.host_thickness - self.position)).exp();
            let mut acc = Complex64::new(0.0, 0.0);
            for pol in Polarization::BOTH {
                let (g, sign) = orientation.channel(pol, s_z);
                if g == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let r_up = self.upper.smatrix_complex(self.k0, k_par, pol)?.r_fwd;
                let r_dn = self.lower.smatrix_complex(self.k0, k_par, pol)?.r_fwd;
                let x = (2.0 * r_up * r_dn * e_up * e_down + sign * (r_dn * e_down + r_up * e_up))
                    / (1.0 - r_up * r_dn * e_up * e_down);
                acc += g * x;
            }
            Ok(0.75 * s / s_z * acc)
        };
        let rule = GaussLegendre::new(NonZeroUsize::new(24).unwrap());
        let nodes = rule.as_node_weight_pairs();
        let mut sum = 0.0;
        // deformed section: s = t - i·depth·sin(π t / s_turn)
        let panels = 64;
        let width = s_turn / panels as f64;
        for p in 0..panels {
            let a = p as f64 * width;
            for &(x, w) in nodes {
                let t = a + 0.5 * width * (1.0 + x);
                let arg = PI * t / s_turn;
                let s = Complex64::new(t, -depth * arg.sin());
                let ds = Complex64::new(1.0, -depth * PI / s_turn * arg.cos());
                sum += (integrand(s)? * ds).re * w * 0.5 * width;
            }
        }
        // real-axis tail, decaying like exp(-2 k_h s z_min)
        let tail_width = (1.0 / (k_h * z_min)).max(0.25);
        let mut a = s_turn;
        let mut quiet = 0;
        while quiet < 3 {
            let mut panel = 0.0;
            for &(x, w) in nodes {
                let t = a + 0.5 * tail_width * (1.0 + x);
                panel += integrand(Complex64::new(t, 0.0))?.re * w * 0.5 * tail_width;
            }
            sum += panel;
            quiet = if panel.abs() < 1e-14 * (1.0 + sum.abs()) { quiet + 1 } else { 0 };
            a += tail_width;
            if a > 1e5 {
                return Err(OpticsError::Quadrature(format!(
                    "total-power tail not converged at s = {a}"
                )));
            }
        }
        Ok(self.n_host * (1.0 + sum))
    }
}

/// Power collected by the objective from a dipole inside `stack`.
pub fn collected_power(
    stack: &Stack,
    dipole: &DipoleConfig,
    wavelength_nm: f64,
    geom: &CollectionGeometry,
) -> Result<f64, OpticsError> {
    Cavity::new(stack, dipole, wavelength_nm)?.collected(dipole.orientation, geom)
}

/// Same as [`collected_power`] with the azimuth integrated numerically for a
/// horizontal dipole pointing at `azimuth_rad` in the plane.
pub fn collected_power_at_azimuth(
    stack: &Stack,
    dipole: &DipoleConfig,
    wavelength_nm: f64,
    geom: &CollectionGeometry,
    azimuth_rad: f64,
    azimuth_points: usize,
) -> Result<f64, OpticsError> {
    if dipole.orientation != DipoleOrientation::Horizontal {
        return Err(OpticsError::Unsupported(
            "explicit azimuth only applies to a horizontal dipole".into(),
        ));
    }
    let cavity = Cavity::new(stack, dipole, wavelength_nm)?;
    let m = azimuth_points.max(4);
    let dphi = 2.0 * PI / m as f64;
    // |p·φ̂|² = sin²(φ-α), |p·θ̂|² = cos²θ cos²(φ-α); weights are per 2π/8·3
    let (mut sin2, mut cos2) = (0.0, 0.0);
    for j in 0..m {
        let phi = j as f64 * dphi - azimuth_rad;
        sin2 += phi.sin().powi(2) * dphi;
        cos2 += phi.cos().powi(2) * dphi;
    }
    let weights = move |pol: Polarization, cos_h: Complex64| match pol {
        Polarization::S => (Complex64::new(sin2 / PI, 0.0), 1.0),
        Polarization::P => (cos_h * cos_h * (cos2 / PI), -1.0),
    };
    cavity.collected_with(geom, geom.quadrature_order, &weights)
}

/// Collected power for a dipole in `bulk`, normalizing [`collected_power`].
pub fn bulk_reference_power(
    bulk: &MaterialTable,
    wavelength_nm: f64,
    geom: &CollectionGeometry,
    orientation: DipoleOrientation,
    model: ReferenceModel,
) -> Result<f64, OpticsError> {
    let n = bulk.refractive_index(wavelength_nm)?;
    if n.im != 0.0 {
        return Err(OpticsError::Unsupported(format!(
            "bulk reference {} absorbs at {wavelength_nm} nm",
            bulk.name()
        )));
    }
    let na = geom.numerical_aperture;
    match model {
        ReferenceModel::SemiInfinite => {
            Cavity::half_space(n.re, 1.0, wavelength_nm).collected(orientation, geom)
        }
        ReferenceModel::Homogeneous => {
            if !(na > 0.0 && na <= 1.0) {
                return Err(OpticsError::InvalidGeometry(format!(
                    "numerical aperture {na} outside (0, 1]"
                )));
            }
            let c0 = (1.0 - na * na).sqrt();
            let a = 1.0 - c0;
            let b = (1.0 - c0.powi(3)) / 3.0;
            Ok(match orientation {
                DipoleOrientation::Horizontal => 0.375 * n.re * (a + b),
                DipoleOrientation::Vertical => 0.75 * n.re * (a - b),
            })
        }
    }
}

/// `(wavelength, collected / reference)` for every wavelength.
pub fn enhancement_spectrum(
    stack: &Stack,
    dipole: &DipoleConfig,
    wavelengths_nm: &[f64],
    geom: &CollectionGeometry,
    model: ReferenceModel,
) -> Result<Vec<(f64, f64)>, OpticsError> {
    let host = stack
        .layers
        .get(dipole.host_layer)
        .ok_or_else(|| OpticsError::InvalidGeometry(format!("stack has no layer {}", dipole.host_layer)))?;
    wavelengths_nm
        .iter()
        .map(|&wl| {
            let p = collected_power(stack, dipole, wl, geom)?;
            let p0 = bulk_reference_power(&host.material, wl, geom, dipole.orientation, model)?;
            Ok((wl, p / p0))
        })
        .collect()
}

/// Total radiated power (all channels, including absorption in metal
/// layers), in units of the vacuum dipole power.
pub fn total_power(stack: &Stack, dipole: &DipoleConfig, wavelength_nm: f64) -> Result<f64, OpticsError> {
    Cavity::new(stack, dipole, wavelength_nm)?.total(dipole.orientation)
}

/// Total power relative to the same dipole in the unbounded host medium.
pub fn purcell_factor(stack: &Stack, dipole: &DipoleConfig, wavelength_nm: f64) -> Result<f64, OpticsError> {
    let cavity = Cavity::new(stack, dipole, wavelength_nm)?;
    Ok(cavity.total(dipole.orientation)? / cavity.n_host)
}
