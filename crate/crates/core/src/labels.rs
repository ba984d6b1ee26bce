//! Tumour label codes and the nested evaluation regions built from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Volume3D, VolumeKind};

/// Integer codes of the base tumour labels.
///
/// Regions are composites: ET = {et}, TC = {ncr, et}, WT = {ncr, ed, et}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelScheme {
    pub background: u32,
    pub ncr: u32,
    pub ed: u32,
    pub et: u32,
}

impl Default for LabelScheme {
    fn default() -> Self {
        Self {
            background: 0,
            ncr: 1,
            ed: 2,
            et: 3,
        }
    }
}

impl LabelScheme {
    pub fn validate(&self) -> Result<()> {
        let codes = self.codes();
        for i in 0..codes.len() {
            for j in i + 1..codes.len() {
                if codes[i] == codes[j] {
                    return Err(Error::Config(format!(
                        "label scheme codes must be distinct, got {self:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `[background, ncr, ed, et]`.
    pub fn codes(&self) -> [u32; 4] {
        [self.background, self.ncr, self.ed, self.et]
    }

    /// Label codes in ascending order.
    pub fn sorted_codes(&self) -> Vec<u32> {
        let mut c = self.codes().to_vec();
        c.sort_unstable();
        c
    }

    pub fn contains(&self, value: u32) -> bool {
        self.codes().contains(&value)
    }

    pub fn composite(&self, region: Region) -> Vec<u32> {
        match region {
            Region::Et => vec![self.et],
            Region::Tc => vec![self.ncr, self.et],
            Region::Wt => vec![self.ncr, self.ed, self.et],
        }
    }

    /// Errors on the first voxel whose value is not one of the scheme codes.
    pub fn check_volume(&self, seg: &Volume3D) -> Result<()> {
        for (index, &v) in seg.data().iter().enumerate() {
            if !(v >= 0.0 && v.fract() == 0.0 && self.contains(v as u32)) {
                return Err(Error::UnknownLabel { value: v, index });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "ET")]
    Et,
    #[serde(rename = "TC")]
    Tc,
    #[serde(rename = "WT")]
    Wt,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Et, Region::Tc, Region::Wt];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Et => "ET",
            Region::Tc => "TC",
            Region::Wt => "WT",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ET" => Ok(Region::Et),
            "TC" => Ok(Region::Tc),
            "WT" => Ok(Region::Wt),
            other => Err(Error::Config(format!("unknown region `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    pub region: Region,
    pub mask: BinaryMask,
}

pub fn region_mask(seg: &Volume3D, region: Region, scheme: &LabelScheme) -> Result<RegionMask> {
    if seg.kind() != VolumeKind::Label {
        return Err(Error::InvalidVolume("region masks need a label volume".into()));
    }
    scheme.check_volume(seg)?;
    let members = scheme.composite(region);
    let data = seg
        .data()
        .iter()
        .map(|&v| members.contains(&(v as u32)))
        .collect();
    Ok(RegionMask {
        region,
        mask: BinaryMask::new(seg.dims(), data)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    fn seg(values: &[f64]) -> Volume3D {
        let g = Grid::new([values.len(), 1, 1], [1.0; 3]).unwrap();
        Volume3D::label(g, values.to_vec()).unwrap()
    }

    #[test]
    fn background_only_gives_empty_regions() {
        let s = seg(&[0.0; 8]);
        for r in Region::ALL {
            assert!(region_mask(&s, r, &LabelScheme::default()).unwrap().mask.is_empty());
        }
    }

    #[test]
    fn single_et_voxel_is_in_every_region() {
        let s = seg(&[0.0, 0.0, 3.0, 0.0]);
        for r in Region::ALL {
            let m = region_mask(&s, r, &LabelScheme::default()).unwrap().mask;
            assert_eq!(m.data(), &[false, false, true, false]);
        }
    }

    #[test]
    fn composites_nest() {
        let s = seg(&[0.0, 1.0, 2.0, 3.0]);
        let scheme = LabelScheme::default();
        let get = |r| region_mask(&s, r, &scheme).unwrap().mask.data().to_vec();
        assert_eq!(get(Region::Et), vec![false, false, false, true]);
        assert_eq!(get(Region::Tc), vec![false, true, false, true]);
        assert_eq!(get(Region::Wt), vec![false, true, true, true]);
    }

    #[test]
    fn unknown_label_rejected() {
        let s = seg(&[0.0, 4.0]);
        let err = region_mask(&s, Region::Wt, &LabelScheme::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { index: 1, .. }));
    }

    #[test]
    fn legacy_four_for_et_scheme() {
        let scheme = LabelScheme {
            et: 4,
            ..LabelScheme::default()
        };
        scheme.validate().unwrap();
        let s = seg(&[0.0, 4.0, 1.0]);
        let m = region_mask(&s, Region::Et, &scheme).unwrap().mask;
        assert_eq!(m.data(), &[false, true, false]);
    }

    #[test]
    fn duplicate_codes_rejected() {
        let scheme = LabelScheme {
            ed: 1,
            ..LabelScheme::default()
        };
        assert!(scheme.validate().is_err());
    }
}
