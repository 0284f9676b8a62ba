//! Tabulated complex refractive indices.
//!
//! Each material is a list of `(wavelength_nm, n, k)` samples with strictly
//! increasing wavelength. Between samples `n` and `k` are interpolated
//! linearly and independently. Tables for air, fused silica, silver and
//! 4H-SiC ship with the crate; any directory of files in the same format can
//! replace them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::textio::{self, ParseError};

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("{material}: wavelength {wavelength_nm} nm is outside the tabulated range [{min}, {max}] nm")]
    OutOfRange {
        material: String,
        wavelength_nm: f64,
        min: f64,
        max: f64,
    },
    #[error("{material}: {reason}")]
    InvalidTable { material: String, reason: String },
    #[error("material not found: {0}")]
    NotFound(String),
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: ParseError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexSample {
    pub wavelength_nm: f64,
    pub n: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTable {
    name: String,
    samples: Vec<IndexSample>,
}

impl MaterialTable {
    pub fn new(name: impl Into<String>, samples: Vec<IndexSample>) -> Result<Self, MaterialError> {
        let name = name.into();
        let invalid = |reason: String| MaterialError::InvalidTable {
            material: name.clone(),
            reason,
        };
        if samples.len() < 2 {
            return Err(invalid("at least two samples are required".into()));
        }
        for s in &samples {
            if !(s.wavelength_nm.is_finite() && s.n.is_finite() && s.k.is_finite()) {
                return Err(invalid(format!("non-finite sample at {} nm", s.wavelength_nm)));
            }
            if s.k < 0.0 {
                return Err(invalid(format!(
                    "negative extinction coefficient at {} nm (gain media are not supported)",
                    s.wavelength_nm
                )));
            }
        }
        if samples
            .windows(2)
            .any(|w| w[1].wavelength_nm <= w[0].wavelength_nm)
        {
            return Err(invalid("wavelengths must be strictly increasing".into()));
        }
        Ok(Self { name, samples })
    }

    /// A dispersionless medium valid over `[min_nm, max_nm]`.
    pub fn constant(
        name: impl Into<String>,
        index: Complex64,
        min_nm: f64,
        max_nm: f64,
    ) -> Result<Self, MaterialError> {
        let s = |w| IndexSample {
            wavelength_nm: w,
            n: index.re,
            k: index.im,
        };
        Self::new(name, vec![s(min_nm), s(max_nm)])
    }

    /// Parses the three-column `wavelength_nm n k` format.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, MaterialError> {
        let name = name.into();
        let rows = textio::parse_columns(text, 3).map_err(|source| MaterialError::Parse {
            path: name.clone(),
            source,
        })?;
        let samples = rows
            .into_iter()
            .map(|r| IndexSample {
                wavelength_nm: r[0],
                n: r[1],
                k: r[2],
            })
            .collect();
        Self::new(name, samples)
    }

    /// Loads a table from disk; the file stem becomes the material name.
    pub fn load(path: &Path) -> Result<Self, MaterialError> {
        let text = std::fs::read_to_string(path).map_err(|source| MaterialError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(name, &text).map_err(|e| match e {
            MaterialError::Parse { source, .. } => MaterialError::Parse {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[IndexSample] {
        &self.samples
    }

    pub fn span(&self) -> (f64, f64) {
        (
            self.samples[0].wavelength_nm,
            self.samples[self.samples.len() - 1].wavelength_nm,
        )
    }

    /// Complex index `n + i k` at `wavelength_nm`.
    pub fn refractive_index(&self, wavelength_nm: f64) -> Result<Complex64, MaterialError> {
        let (min, max) = self.span();
        if !(wavelength_nm >= min && wavelength_nm <= max) {
            return Err(MaterialError::OutOfRange {
                material: self.name.clone(),
                wavelength_nm,
                min,
                max,
            });
        }
        // first sample with wavelength >= target
        let hi = self
            .samples
            .partition_point(|s| s.wavelength_nm < wavelength_nm);
        let b = self.samples[hi];
        if b.wavelength_nm == wavelength_nm {
            return Ok(Complex64::new(b.n, b.k));
        }
        let a = self.samples[hi - 1];
        let t = (wavelength_nm - a.wavelength_nm) / (b.wavelength_nm - a.wavelength_nm);
        Ok(Complex64::new(
            a.n + t * (b.n - a.n),
            a.k + t * (b.k - a.k),
        ))
    }

    pub fn is_lossless_at(&self, wavelength_nm: f64) -> Result<bool, MaterialError> {
        Ok(self.refractive_index(wavelength_nm)?.im == 0.0)
    }
}

const BUNDLED: &[(&str, &str)] = &[
    ("air", include_str!("../data/materials/air.txt")),
    ("ag", include_str!("../data/materials/ag.txt")),
    ("sic", include_str!("../data/materials/sic.txt")),
    ("sic_e", include_str!("../data/materials/sic_e.txt")),
    ("sio2", include_str!("../data/materials/sio2.txt")),
];

/// Directory holding the bundled tables in the source tree.
pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/materials")
}

/// Named collection of material tables.
#[derive(Debug, Clone, Default)]
pub struct MaterialLibrary {
    tables: BTreeMap<String, Arc<MaterialTable>>,
}

impl MaterialLibrary {
    /// The tables compiled into the crate.
    pub fn bundled() -> Self {
        let mut lib = Self::default();
        for (name, text) in BUNDLED {
            let table = MaterialTable::parse(*name, text).expect("bundled material table");
            lib.insert(table);
        }
        lib
    }

    /// Every `*.txt` file in `dir`, keyed by file stem.
    pub fn load_dir(dir: &Path) -> Result<Self, MaterialError> {
        let entries = std::fs::read_dir(dir).map_err(|source| MaterialError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        let mut lib = Self::default();
        for p in paths {
            lib.insert(MaterialTable::load(&p)?);
        }
        Ok(lib)
    }

    pub fn insert(&mut self, table: MaterialTable) {
        self.tables.insert(table.name().to_string(), Arc::new(table));
    }

    pub fn get(&self, name: &str) -> Result<Arc<MaterialTable>, MaterialError> {
        self.tables
            .get(name)
            .cloned()
            .ok_or_else(|| MaterialError::NotFound(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vacuum() -> MaterialTable {
        MaterialTable::constant("vacuum", Complex64::new(1.0, 0.0), 200.0, 2000.0).unwrap()
    }

    #[test]
    fn vacuum_is_identity_medium() {
        assert_eq!(
            vacuum().refractive_index(950.0).unwrap(),
            Complex64::new(1.0, 0.0)
        );
    }

    #[test]
    fn exact_at_sample_points() {
        let lib = MaterialLibrary::bundled();
        let ag = lib.get("ag").unwrap();
        for s in ag.samples() {
            let n = ag.refractive_index(s.wavelength_nm).unwrap();
            assert_eq!(n, Complex64::new(s.n, s.k));
        }
    }

    #[test]
    fn bundled_sic_near_2_6_and_lossless() {
        let lib = MaterialLibrary::bundled();
        let n = lib.get("sic").unwrap().refractive_index(950.0).unwrap();
        assert!((n.re - 2.589295).abs() < 1e-9, "{n}");
        assert_eq!(n.im, 0.0);
        assert!((n.re - 2.6).abs() < 0.02);
    }

    #[test]
    fn silver_is_metallic_over_design_band() {
        let ag = MaterialLibrary::bundled().get("ag").unwrap();
        for wl in [900.0, 1000.0, 1150.0] {
            let n = ag.refractive_index(wl).unwrap();
            assert!(n.im > 5.0 && n.re < 0.2, "{wl}: {n}");
        }
    }

    #[test]
    fn out_of_range_names_material_and_span() {
        let err = vacuum().refractive_index(100.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("vacuum") && msg.contains("200") && msg.contains("2000"), "{msg}");
        assert!(vacuum().refractive_index(f64::NAN).is_err());
    }

    #[test]
    fn rejects_bad_tables() {
        let s = |w, k| IndexSample {
            wavelength_nm: w,
            n: 1.0,
            k,
        };
        assert!(MaterialTable::new("x", vec![s(1.0, 0.0)]).is_err());
        assert!(MaterialTable::new("x", vec![s(2.0, 0.0), s(1.0, 0.0)]).is_err());
        assert!(MaterialTable::new("x", vec![s(1.0, 0.0), s(1.0, 0.0)]).is_err());
        assert!(MaterialTable::new("x", vec![s(1.0, -0.1), s(2.0, 0.0)]).is_err());
    }

    #[test]
    fn bundled_dir_matches_compiled_tables() {
        let from_disk = MaterialLibrary::load_dir(&bundled_dir()).unwrap();
        let compiled = MaterialLibrary::bundled();
        for name in compiled.names() {
            assert_eq!(*from_disk.get(name).unwrap(), *compiled.get(name).unwrap());
        }
    }

    proptest! {
        #[test]
        fn interpolation_stays_between_neighbours(wl in 413.3f64..1937.0) {
            let ag = MaterialLibrary::bundled().get("ag").unwrap();
            let n = ag.refractive_index(wl).unwrap();
            let s = ag.samples();
            let hi = s.partition_point(|x| x.wavelength_nm < wl).max(1);
            let (a, b) = (s[hi - 1], s[hi]);
            prop_assert!(n.re >= a.n.min(b.n) - 1e-15 && n.re <= a.n.max(b.n) + 1e-15);
            prop_assert!(n.im >= a.k.min(b.k) - 1e-15 && n.im <= a.k.max(b.k) + 1e-15);
        }
    }
}
