//! One subject: four co-registered MRI sequences and an optional
//! segmentation, stored on disk in the BraTS directory layout
//! (`<dir>/<id>/<id>-t1n.nii.gz`, `-t1c`, `-t2w`, `-t2f`, `-seg`).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::labels::LabelScheme;
use crate::nifti::{read_nifti, write_nifti};
use crate::volume::{Grid, Volume3D, VolumeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    T1,
    T1ce,
    T2,
    Flair,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::T1, Modality::T1ce, Modality::T2, Modality::Flair];

    pub fn suffix(self) -> &'static str {
        match self {
            Modality::T1 => "t1n",
            Modality::T1ce => "t1c",
            Modality::T2 => "t2w",
            Modality::Flair => "t2f",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::T1 => "T1",
            Modality::T1ce => "T1CE",
            Modality::T2 => "T2",
            Modality::Flair => "FLAIR",
        })
    }
}

pub const SEG_SUFFIX: &str = "seg";

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub case_id: String,
    /// Indexed by [`Modality::index`].
    pub modalities: [Volume3D; 4],
    pub segmentation: Option<Volume3D>,
}

impl Case {
    pub fn new(
        case_id: impl Into<String>,
        modalities: [Volume3D; 4],
        segmentation: Option<Volume3D>,
    ) -> Result<Self> {
        let case = Self {
            case_id: case_id.into(),
            modalities,
            segmentation,
        };
        case.check_geometry()?;
        Ok(case)
    }

    pub fn grid(&self) -> &Grid {
        self.modalities[0].grid()
    }

    pub fn modality(&self, m: Modality) -> &Volume3D {
        &self.modalities[m.index()]
    }

    fn check_geometry(&self) -> Result<()> {
        let reference = self.grid();
        for m in &Modality::ALL[1..] {
            reference.ensure_matches(self.modality(*m).grid(), &format!("{} vs {}", Modality::T1, m))?;
        }
        if let Some(seg) = &self.segmentation {
            reference.ensure_matches(seg.grid(), "T1 vs segmentation")?;
            if seg.kind() != VolumeKind::Label {
                return Err(Error::InvalidVolume("segmentation must be a label volume".into()));
            }
        }
        Ok(())
    }

    /// Applies `f` to every volume, passing whether it is the segmentation.
    pub fn map_volumes(&self, mut f: impl FnMut(&Volume3D, bool) -> Volume3D) -> Case {
        Case {
            case_id: self.case_id.clone(),
            modalities: std::array::from_fn(|i| f(&self.modalities[i], false)),
            segmentation: self.segmentation.as_ref().map(|s| f(s, true)),
        }
    }

    /// Bitwise equality of every volume; ids are ignored.
    pub fn content_eq(&self, other: &Case) -> bool {
        self.modalities
            .iter()
            .zip(&other.modalities)
            .all(|(a, b)| a.bitwise_eq(b))
            && match (&self.segmentation, &other.segmentation) {
                (Some(a), Some(b)) => a.bitwise_eq(b),
                (None, None) => true,
                _ => false,
            }
    }
}

/// Finds `<dir>/<id>-<suffix>.nii.gz` or `.nii`.
pub fn find_volume(dir: &Path, id: &str, suffix: &str) -> Option<PathBuf> {
    ["nii.gz", "nii"]
        .iter()
        .map(|ext| dir.join(format!("{id}-{suffix}.{ext}")))
        .find(|p| p.is_file())
}

pub fn case_id_of(dir: &Path) -> Result<String> {
    dir.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::Config(format!("{}: not a case directory", dir.display())))
}

pub fn load_case(dir: impl AsRef<Path>, scheme: &LabelScheme) -> Result<Case> {
    let dir = dir.as_ref();
    let id = case_id_of(dir)?;
    let mut vols = Vec::with_capacity(4);
    for m in Modality::ALL {
        let path = find_volume(dir, &id, m.suffix()).ok_or_else(|| Error::MissingModality {
            case_id: id.clone(),
            what: format!("{m} ({id}-{}.nii[.gz])", m.suffix()),
        })?;
        let mut v = read_nifti(&path)?;
        if v.kind() != VolumeKind::Intensity {
            v = Volume3D::intensity(v.grid().clone(), v.into_data())?;
        }
        vols.push(v);
    }
    let segmentation = match find_volume(dir, &id, SEG_SUFFIX) {
        Some(p) => {
            let seg = read_nifti(&p)?;
            if seg.kind() != VolumeKind::Label {
                return Err(Error::InvalidVolume(format!(
                    "{}: segmentation must hold non-negative integers",
                    p.display()
                )));
            }
            scheme.check_volume(&seg)?;
            Some(seg)
        }
        None => None,
    };
    let modalities: [Volume3D; 4] = vols.try_into().expect("four modalities");
    Case::new(id, modalities, segmentation)
}

/// Writes the case as `<parent>/<id>/<id>-*.nii.gz` and returns the case directory.
pub fn write_case(case: &Case, parent: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = parent.as_ref().join(&case.case_id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for m in Modality::ALL {
        let p = dir.join(format!("{}-{}.nii.gz", case.case_id, m.suffix()));
        write_nifti(case.modality(m), p)?;
    }
    if let Some(seg) = &case.segmentation {
        write_nifti(seg, dir.join(format!("{}-{SEG_SUFFIX}.nii.gz", case.case_id)))?;
    }
    Ok(dir)
}

/// Immediate subdirectories of `root`, sorted by name.
pub fn list_case_dirs(root: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}
