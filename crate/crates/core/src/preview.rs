//! Axial slice montages: T1, T1CE, T2, FLAIR and FLAIR with the
//! segmentation painted on top (ET blue, NCR red, ED green).

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::case::{Case, Modality};
use crate::error::{Error, Result};
use crate::labels::LabelScheme;
use crate::volume::Volume3D;

pub const GUTTER_PX: usize = 4;
pub const ET_COLOR: [u8; 3] = [0, 0, 255];
pub const NCR_COLOR: [u8; 3] = [255, 0, 0];
pub const ED_COLOR: [u8; 3] = [0, 255, 0];

const WINDOW_PERCENTILES: (f64, f64) = (0.5, 99.5);

/// An 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![[0; 3]; width * height],
        }
    }

    pub fn get(&self, col: usize, row: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    fn set(&mut self, col: usize, row: usize, rgb: [u8; 3]) {
        self.pixels[row * self.width + col] = rgb;
    }

    pub fn count_color(&self, rgb: [u8; 3]) -> usize {
        self.pixels.iter().filter(|&&p| p == rgb).count()
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        let bytes: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        writer.write_image_data(&bytes)?;
        writer.finish()?;
        Ok(())
    }
}

/// Intensity window at the 0.5th and 99.5th percentiles of the volume.
fn window(vol: &Volume3D) -> (f64, f64) {
    let mut v: Vec<f64> = vol.data().iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    v.sort_by(f64::total_cmp);
    let at = |p: f64| v[((p / 100.0) * (v.len() - 1) as f64).round() as usize];
    (at(WINDOW_PERCENTILES.0), at(WINDOW_PERCENTILES.1))
}

fn to_gray(value: f64, (lo, hi): (f64, f64)) -> u8 {
    if hi <= lo {
        return 0;
    }
    ((value - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Renders axial slice `slice`. Panel width is `nx`, height `ny`; rows run
/// from high to low `y`.
pub fn render_montage(case: &Case, slice: usize, scheme: &LabelScheme) -> Result<RgbImage> {
    let [nx, ny, nz] = case.grid().dims;
    if slice >= nz {
        return Err(Error::SliceOutOfRange { slice, nz });
    }
    let mut img = RgbImage::new(5 * nx + 4 * GUTTER_PX, ny);
    let panel_x = |p: usize| p * (nx + GUTTER_PX);
    let paint_gray = |img: &mut RgbImage, panel: usize, vol: &Volume3D| {
        let w = window(vol);
        for y in 0..ny {
            for x in 0..nx {
                let g = to_gray(vol.get(x, y, slice), w);
                img.set(panel_x(panel) + x, ny - 1 - y, [g; 3]);
            }
        }
    };
    for m in Modality::ALL {
        paint_gray(&mut img, m.index(), case.modality(m));
    }
    paint_gray(&mut img, 4, case.modality(Modality::Flair));
    if let Some(seg) = &case.segmentation {
        scheme.check_volume(seg)?;
        for y in 0..ny {
            for x in 0..nx {
                let v = seg.get(x, y, slice) as u32;
                let color = if v == scheme.et {
                    ET_COLOR
                } else if v == scheme.ncr {
                    NCR_COLOR
                } else if v == scheme.ed {
                    ED_COLOR
                } else {
                    continue;
                };
                img.set(panel_x(4) + x, ny - 1 - y, color);
            }
        }
    }
    Ok(img)
}

pub fn write_preview(case: &Case, slice: usize, scheme: &LabelScheme, out: impl AsRef<Path>) -> Result<RgbImage> {
    let img = render_montage(case, slice, scheme)?;
    img.write_png(out)?;
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate_case, PhantomSpec};
    use crate::volume::VolumeKind;

    fn small_spec() -> PhantomSpec {
        PhantomSpec {
            noise_std: 0.0,
            ..PhantomSpec::default()
        }
    }

    #[test]
    fn layout_and_colors() {
        let case = generate_case("p", &small_spec()).unwrap();
        let img = render_montage(&case, 32, &LabelScheme::default()).unwrap();
        assert_eq!(img.width, 5 * 64 + 4 * GUTTER_PX);
        assert_eq!(img.height, 64);
        for c in [ET_COLOR, NCR_COLOR, ED_COLOR] {
            assert!(img.count_color(c) > 0);
        }
    }

    #[test]
    fn empty_segmentation_has_no_overlay() {
        let mut case = generate_case("p", &small_spec()).unwrap();
        let seg = case.segmentation.as_ref().unwrap();
        case.segmentation = Some(Volume3D::filled(seg.grid().clone(), VolumeKind::Label, 0.0));
        let img = render_montage(&case, 32, &LabelScheme::default()).unwrap();
        for c in [ET_COLOR, NCR_COLOR, ED_COLOR] {
            assert_eq!(img.count_color(c), 0);
        }
    }

    #[test]
    fn slice_range_checked() {
        let case = generate_case("p", &small_spec()).unwrap();
        assert!(matches!(
            render_montage(&case, 64, &LabelScheme::default()),
            Err(Error::SliceOutOfRange { slice: 64, nz: 64 })
        ));
    }

    #[test]
    fn png_written() {
        let case = generate_case("p", &small_spec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("p.png");
        write_preview(&case, 10, &LabelScheme::default(), &out).unwrap();
        let bytes = std::fs::read(&out).unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
    }
}
