//! Synthetic cases built from nested ellipsoids, so voxel counts and
//! surfaces are known analytically.
//!
//! Coordinates are millimetres from the centre of voxel (0, 0, 0), i.e.
//! voxel `(x, y, z)` sits at `(x*sx, y*sy, z*sz)`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::rng::{case_seed, RngStream};
use crate::case::{write_case, Case};
use crate::error::{Error, Result};
use crate::labels::LabelScheme;
use crate::volume::{Grid, Volume3D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ellipsoid {
    pub center_mm: [f64; 3],
    pub radii_mm: [f64; 3],
}

impl Ellipsoid {
    pub fn is_empty(&self) -> bool {
        self.radii_mm.iter().any(|&r| r <= 0.0)
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        if self.is_empty() {
            return false;
        }
        (0..3)
            .map(|a| ((p[a] - self.center_mm[a]) / self.radii_mm[a]).powi(2))
            .sum::<f64>()
            <= 1.0
    }

    pub fn volume_mm3(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            4.0 / 3.0 * std::f64::consts::PI * self.radii_mm.iter().product::<f64>()
        }
    }

    /// Whether `inner` lies strictly inside `self`, checked on a dense set of
    /// surface points of `inner`.
    fn encloses(&self, inner: &Ellipsoid) -> bool {
        if inner.is_empty() {
            return true;
        }
        if self.is_empty() {
            return false;
        }
        const STEPS: usize = 48;
        for i in 0..=STEPS {
            let theta = std::f64::consts::PI * i as f64 / STEPS as f64;
            for j in 0..2 * STEPS {
                let phi = std::f64::consts::PI * j as f64 / STEPS as f64;
                let dir = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
                let p = [0, 1, 2].map(|a| inner.center_mm[a] + inner.radii_mm[a] * dir[a]);
                let q: f64 = (0..3).map(|a| ((p[a] - self.center_mm[a]) / self.radii_mm[a]).powi(2)).sum();
                if q >= 1.0 {
                    return false;
                }
            }
        }
        true
    }
}

/// Nested tumour layers: NCR core inside the ET shell inside the ED rim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TumorSpec {
    pub ncr: Ellipsoid,
    pub et: Ellipsoid,
    pub ed: Ellipsoid,
}

/// Mean intensity of each tissue class in one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TissueIntensities {
    pub background: f64,
    pub brain: f64,
    pub ncr: f64,
    pub ed: f64,
    pub et: f64,
}

impl TissueIntensities {
    const fn new(background: f64, brain: f64, ncr: f64, ed: f64, et: f64) -> Self {
        Self {
            background,
            brain,
            ncr,
            ed,
            et,
        }
    }
}

/// Per-sequence intensity profiles, keyed like the file suffixes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityProfile {
    pub t1n: TissueIntensities,
    pub t1c: TissueIntensities,
    pub t2w: TissueIntensities,
    pub t2f: TissueIntensities,
}

impl Default for IntensityProfile {
    fn default() -> Self {
        Self {
            t1n: TissueIntensities::new(0.0, 100.0, 50.0, 80.0, 110.0),
            t1c: TissueIntensities::new(0.0, 100.0, 40.0, 90.0, 220.0),
            t2w: TissueIntensities::new(0.0, 100.0, 180.0, 160.0, 130.0),
            t2f: TissueIntensities::new(0.0, 100.0, 120.0, 200.0, 150.0),
        }
    }
}

impl IntensityProfile {
    fn as_array(&self) -> [TissueIntensities; 4] {
        [self.t1n, self.t1c, self.t2w, self.t2f]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub brain: Ellipsoid,
    pub tumor: TumorSpec,
    pub intensities: IntensityProfile,
    /// Gaussian noise added inside the brain.
    pub noise_std: f64,
    pub seed: u64,
    pub labels: LabelScheme,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        let c = [32.0; 3];
        let layer = |r: f64| Ellipsoid {
            center_mm: c,
            radii_mm: [r; 3],
        };
        Self {
            dims: [64; 3],
            spacing_mm: [1.0; 3],
            brain: Ellipsoid {
                center_mm: c,
                radii_mm: [28.0, 30.0, 26.0],
            },
            tumor: TumorSpec {
                ncr: layer(5.0),
                et: layer(8.0),
                ed: layer(14.0),
            },
            intensities: IntensityProfile::default(),
            noise_std: 5.0,
            seed: 0,
            labels: LabelScheme::default(),
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Phantom(m));
        if self.dims.contains(&0) {
            return bad(format!("dims must be positive, got {:?}", self.dims));
        }
        if self.spacing_mm.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return bad(format!("spacing must be positive, got {:?}", self.spacing_mm));
        }
        if !(self.noise_std >= 0.0) {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if self.brain.is_empty() {
            return bad("brain ellipsoid has a zero radius".into());
        }
        self.labels.validate()?;
        let t = &self.tumor;
        for (outer, inner, what) in [(&t.et, &t.ncr, "NCR inside ET"), (&t.ed, &t.et, "ET inside ED")] {
            if !inner.is_empty() && inner.radii_mm.iter().zip(&outer.radii_mm).any(|(i, o)| i >= o) {
                return bad(format!("{what}: radii must strictly increase outward"));
            }
            if !outer.encloses(inner) {
                return bad(format!("{what}: inner ellipsoid is not enclosed"));
            }
        }
        if !self.brain.encloses(&t.ed) || !self.brain.encloses(&t.et) || !self.brain.encloses(&t.ncr) {
            return bad("tumor does not fit inside the brain ellipsoid".into());
        }
        Ok(())
    }

    fn grid(&self) -> Result<Grid> {
        Grid::new(self.dims, self.spacing_mm)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tissue {
    Background,
    Brain,
    Ncr,
    Ed,
    Et,
}

fn tissue_at(spec: &PhantomSpec, p: [f64; 3]) -> Tissue {
    let t = &spec.tumor;
    if t.ncr.contains(p) {
        Tissue::Ncr
    } else if t.et.contains(p) {
        Tissue::Et
    } else if t.ed.contains(p) {
        Tissue::Ed
    } else if spec.brain.contains(p) {
        Tissue::Brain
    } else {
        Tissue::Background
    }
}

/// Builds one case. Labels go to the innermost containing ellipsoid; noise
/// comes from a stream keyed by `spec.seed` only, so geometry-identical specs
/// give identical images.
pub fn generate_case(case_id: &str, spec: &PhantomSpec) -> Result<Case> {
    spec.validate()?;
    let grid = spec.grid()?;
    let n = grid.len();
    let s = spec.spacing_mm;
    let scheme = &spec.labels;
    let tissues: Vec<Tissue> = (0..n)
        .map(|i| {
            let [x, y, z] = grid.coords(i);
            tissue_at(spec, [x as f64 * s[0], y as f64 * s[1], z as f64 * s[2]])
        })
        .collect();
    let seg: Vec<f64> = tissues
        .iter()
        .map(|t| {
            f64::from(match t {
                Tissue::Background | Tissue::Brain => scheme.background,
                Tissue::Ncr => scheme.ncr,
                Tissue::Ed => scheme.ed,
                Tissue::Et => scheme.et,
            })
        })
        .collect();
    let profiles = spec.intensities.as_array();
    let mut modalities = Vec::with_capacity(4);
    for (m, prof) in profiles.iter().enumerate() {
        let mut rng = RngStream::for_transform(case_seed(spec.seed, "phantom-noise", 0), m as u64);
        let data = tissues
            .iter()
            .map(|t| {
                let mean = match t {
                    Tissue::Background => return prof.background,
                    Tissue::Brain => prof.brain,
                    Tissue::Ncr => prof.ncr,
                    Tissue::Ed => prof.ed,
                    Tissue::Et => prof.et,
                };
                if spec.noise_std > 0.0 {
                    mean + spec.noise_std * rng.normal()
                } else {
                    mean
                }
            })
            .collect();
        modalities.push(Volume3D::intensity(grid.clone(), data)?);
    }
    let modalities: [Volume3D; 4] = modalities.try_into().expect("four sequences");
    Case::new(case_id, modalities, Some(Volume3D::label(grid, seg)?))
}

pub fn phantom_id(index: usize) -> String {
    format!("BraTS-PHANTOM-{index:05}-000")
}

/// Per-case geometric perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Jitter {
    /// Tumour centre shift, uniform in `[-center_mm, center_mm]` per axis.
    pub center_mm: f64,
    /// Added to every tumour radius, uniform in `[-radius_mm, radius_mm]`.
    pub radius_mm: f64,
}

impl Jitter {
    pub fn is_zero(&self) -> bool {
        self.center_mm == 0.0 && self.radius_mm == 0.0
    }
}

const JITTER_ATTEMPTS: usize = 64;

/// The spec for case `index`: `base` with a seeded tumour perturbation.
/// Draws that break nesting or leave the brain are redrawn.
pub fn jittered_spec(base: &PhantomSpec, jitter: &Jitter, index: usize) -> Result<PhantomSpec> {
    if jitter.is_zero() {
        return Ok(base.clone());
    }
    if !(jitter.center_mm >= 0.0 && jitter.radius_mm >= 0.0) {
        return Err(Error::Phantom("jitter amplitudes must be >= 0".into()));
    }
    let mut rng = RngStream::for_transform(case_seed(base.seed, &phantom_id(index), 0), 0);
    for _ in 0..JITTER_ATTEMPTS {
        let shift = [0, 1, 2].map(|_| rng.uniform(-jitter.center_mm, jitter.center_mm));
        let dr = rng.uniform(-jitter.radius_mm, jitter.radius_mm);
        let mut spec = base.clone();
        for layer in [&mut spec.tumor.ncr, &mut spec.tumor.et, &mut spec.tumor.ed] {
            if layer.is_empty() {
                continue;
            }
            for a in 0..3 {
                layer.center_mm[a] += shift[a];
                layer.radii_mm[a] = (layer.radii_mm[a] + dr).max(0.5);
            }
        }
        if spec.validate().is_ok() {
            return Ok(spec);
        }
    }
    Err(Error::Phantom(format!(
        "no valid jittered geometry for case {index} after {JITTER_ATTEMPTS} draws"
    )))
}

/// Writes `n` cases in BraTS layout. With `validation > 0` the last
/// `validation` cases go under `<output>/validation` and the rest under
/// `<output>/training`; otherwise all go directly under `output`.
pub fn generate_dataset(
    n: usize,
    base: &PhantomSpec,
    jitter: &Jitter,
    output_dir: &Path,
    validation: usize,
) -> Result<Vec<PathBuf>> {
    if n == 0 {
        return Err(Error::Phantom("case count must be >= 1".into()));
    }
    if validation >= n && validation > 0 {
        return Err(Error::Phantom(format!("validation split {validation} leaves no training cases of {n}")));
    }
    base.validate()?;
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let parent = if validation == 0 {
                output_dir.to_path_buf()
            } else if i < n - validation {
                output_dir.join("training")
            } else {
                output_dir.join("validation")
            };
            fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
            let spec = jittered_spec(base, jitter, i)?;
            let case = generate_case(&phantom_id(i), &spec)?;
            write_case(&case, &parent)
        })
        .collect()
}
