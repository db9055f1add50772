//! PNG output and sample grids.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::nets::ModelBundle;
use crate::tensor::Tensor;

/// Rows of a sample grid.
pub const GRID_SOURCES: usize = 4;
/// Latent-guided and reference-guided columns each.
pub const GRID_STYLES: usize = 4;

/// `[−1, 1]` → `0..=255`, rounding to nearest.
fn to_u8(v: f64) -> u8 {
    ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8
}

/// RGB image from the first three channels of a `C×H×W` buffer.
pub fn image_to_rgb8(chw: &[f64], channels: usize, size: usize) -> Result<RgbImage> {
    let plane = size * size;
    if channels < 3 || chw.len() != channels * plane {
        return Err(Error::invalid("image_to_rgb8", format!("{} values for {channels}×{size}×{size}", chw.len())));
    }
    Ok(RgbImage::from_fn(size as u32, size as u32, |x, y| {
        let i = y as usize * size + x as usize;
        Rgb([to_u8(chw[i]), to_u8(chw[plane + i]), to_u8(chw[2 * plane + i])])
    }))
}

/// Image `index` of an `N×C×H×W` tensor.
pub fn tensor_image(t: &Tensor, index: usize) -> Result<RgbImage> {
    let s = t.shape();
    if s.len() != 4 || s[2] != s[3] || index >= s[0] {
        return Err(Error::invalid("tensor_image", format!("cannot take image {index} of {s:?}")));
    }
    let len = s[1] * s[2] * s[3];
    image_to_rgb8(&t.data()[index * len..(index + 1) * len], s[1], s[2])
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

/// One row per source: the source, then `GRID_STYLES` latent-guided and
/// `GRID_STYLES` reference-guided translations into `targets[row]`.
/// `z` holds `GRID_STYLES` latent codes, `refs` `GRID_STYLES` reference
/// images (each row uses all of them).
pub fn sample_grid(bundle: &ModelBundle, sources: &Tensor, targets: &[usize], z: &Tensor, refs: &Tensor) -> Result<RgbImage> {
    let rows = sources.shape()[0];
    let size = bundle.cfg.image_size;
    if targets.len() != rows || z.shape()[0] != GRID_STYLES || refs.shape()[0] != GRID_STYLES {
        return Err(Error::invalid("sample_grid", "inconsistent grid inputs"));
    }
    let cols = 1 + 2 * GRID_STYLES;
    let mut grid = RgbImage::new((cols * size) as u32, (rows * size) as u32);
    let mut put = |img: &RgbImage, r: usize, c: usize| {
        image::imageops::replace(&mut grid, img, (c * size) as i64, (r * size) as i64);
    };
    for (r, &target) in targets.iter().enumerate() {
        let src = sources.narrow(0, r, 1)?;
        put(&tensor_image(&src, 0)?, r, 0);
        let many = Tensor::concat(&vec![src.clone(); GRID_STYLES], 0)?;
        let y = vec![target; GRID_STYLES];
        let lat = bundle.translate_latent(&many, &y, z)?;
        let rf = bundle.translate_reference(&many, refs, &y)?;
        for k in 0..GRID_STYLES {
            put(&tensor_image(&lat, k)?, r, 1 + k);
            put(&tensor_image(&rf, k)?, r, 1 + GRID_STYLES + k);
        }
    }
    Ok(grid)
}
