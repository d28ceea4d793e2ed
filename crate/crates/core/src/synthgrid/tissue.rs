use crate::error::{Error, Result};
use crate::grid::BinaryGrid;
use crate::postproc::otsu_split;

/// Interleaved 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::DimensionMismatch {
                what: "RGB image bytes",
                expected: width * height * 3,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn pixel(&self, index: usize) -> [u8; 3] {
        let p = &self.data[index * 3..index * 3 + 3];
        [p[0], p[1], p[2]]
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }
}

pub const DEFAULT_RGB_THRESHOLDS: [u8; 3] = [235, 210, 235];

/// Tissue iff every channel is strictly below its threshold.
pub fn tissue_mask_rgb(image: &RgbImage, thresholds: [u8; 3]) -> Result<BinaryGrid> {
    if image.num_pixels() == 0 {
        return Err(Error::invalid("thumbnail is empty"));
    }
    let cells = (0..image.num_pixels())
        .map(|i| {
            let p = image.pixel(i);
            p[0] < thresholds[0] && p[1] < thresholds[1] && p[2] < thresholds[2]
        })
        .collect();
    BinaryGrid::from_cells(image.width, image.height, cells)
}

/// Hue and saturation scaled to `0..=255`.
pub fn rgb_to_hs(p: [u8; 3]) -> (u8, u8) {
    let r = p[0] as f64 / 255.0;
    let g = p[1] as f64 / 255.0;
    let b = p[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let sat = if max > 0.0 { delta / max } else { 0.0 };
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    ((hue * 255.0).round() as u8, (sat * 255.0).round() as u8)
}

/// Per-channel Otsu over 8-bit values; returns `t` with background `<= t`.
fn otsu_u8(values: impl Iterator<Item = u8>, channel: &'static str) -> Result<u8> {
    let mut hist = [0u64; 256];
    for v in values {
        hist[v as usize] += 1;
    }
    match otsu_split(&hist) {
        Some(k) => Ok((k - 1) as u8),
        None => Err(Error::DegenerateChannel { channel }),
    }
}

/// Otsu thresholds on hue and saturation independently, combined with AND.
pub fn tissue_mask_hsv_otsu(image: &RgbImage) -> Result<BinaryGrid> {
    if image.num_pixels() == 0 {
        return Err(Error::invalid("thumbnail is empty"));
    }
    let hs: Vec<(u8, u8)> = (0..image.num_pixels())
        .map(|i| rgb_to_hs(image.pixel(i)))
        .collect();
    let t_h = otsu_u8(hs.iter().map(|p| p.0), "hue")?;
    let t_s = otsu_u8(hs.iter().map(|p| p.1), "saturation")?;
    let cells = hs.iter().map(|&(h, s)| h > t_h && s > t_s).collect();
    BinaryGrid::from_cells(image.width, image.height, cells)
}
