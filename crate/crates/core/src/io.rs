//! File formats: patch-feature grids, PGM masks, PPM thumbnails and heatmap
//! CSVs.
//!
//! Grid file: a header line `width height feature_dim`, then one line of
//! `feature_dim` whitespace-separated reals per cell in row-major order.
//! Masks are PGM (P2 or P5 on read, P5 on write) with 0 = negative and
//! 255 = positive. Heatmaps are CSV `col,row,score` for present cells.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{AnnotationMask, BinaryGrid, Heatmap, MaskRole, PatchGrid};
use crate::synthgrid::RgbImage;

pub fn write_grid<W: Write>(grid: &PatchGrid, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(
        out,
        "{} {} {}",
        grid.width(),
        grid.height(),
        grid.feature_dim()
    )?;
    for i in 0..grid.num_cells() {
        let mut first = true;
        for v in grid.feature(i) {
            if !first {
                out.write_all(b" ")?;
            }
            write!(out, "{v}")?;
            first = false;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads feature rows; the tissue mask comes from a separate file.
pub fn read_grid<R: Read>(input: R, tissue: BinaryGrid, source_name: &str) -> Result<PatchGrid> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(source_name, "missing header"))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(source_name, format!("bad header: {e}")))?;
    let [width, height, dim] = dims[..] else {
        return Err(Error::parse(
            source_name,
            "header must be `width height feature_dim`",
        ));
    };
    let mut features = Vec::with_capacity(width * height * dim);
    let mut rows = 0usize;
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = features.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                Error::parse(source_name, format!("line {}: bad number `{tok}`", n + 2))
            })?;
            features.push(v);
        }
        if features.len() - before != dim {
            return Err(Error::parse(
                source_name,
                format!(
                    "line {}: expected {dim} values, got {}",
                    n + 2,
                    features.len() - before
                ),
            ));
        }
        rows += 1;
    }
    if rows != width * height {
        return Err(Error::parse(
            source_name,
            format!("expected {} feature rows, got {rows}", width * height),
        ));
    }
    PatchGrid::new(width, height, dim, features, tissue)
}

struct Tokens<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next_token(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.data.len() && self.data[self.pos] == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.data[start..self.pos])
    }

    fn next_usize(&mut self, source_name: &str, what: &str) -> Result<usize> {
        let tok = self
            .next_token()
            .ok_or_else(|| Error::parse(source_name, format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(source_name, format!("bad {what}")))
    }
}

/// Netpbm header: magic, width, height, maxval; `pos` is just past the single
/// whitespace byte that ends the header.
fn parse_header<'a>(
    data: &'a [u8],
    source_name: &str,
) -> Result<(&'a [u8], usize, usize, usize, usize)> {
    let mut t = Tokens { data, pos: 0 };
    let magic = t
        .next_token()
        .ok_or_else(|| Error::parse(source_name, "empty file"))?;
    let width = t.next_usize(source_name, "width")?;
    let height = t.next_usize(source_name, "height")?;
    let maxval = t.next_usize(source_name, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::parse(source_name, "only 8-bit maxval is supported"));
    }
    Ok((magic, width, height, maxval, t.pos + 1))
}

/// Reads a P2/P5 graymap into raw 8-bit values.
pub fn read_pgm_bytes(data: &[u8], source_name: &str) -> Result<(usize, usize, Vec<u8>)> {
    let (magic, width, height, _maxval, body) = parse_header(data, source_name)?;
    let n = width * height;
    let values = match magic {
        b"P5" => {
            let raw = data
                .get(body..body + n)
                .ok_or_else(|| Error::parse(source_name, "truncated P5 raster"))?;
            raw.to_vec()
        }
        b"P2" => {
            let mut t = Tokens {
                data,
                pos: body.saturating_sub(1),
            };
            (0..n)
                .map(|_| t.next_usize(source_name, "pixel").map(|v| v.min(255) as u8))
                .collect::<Result<_>>()?
        }
        _ => return Err(Error::parse(source_name, "expected a P2 or P5 graymap")),
    };
    Ok((width, height, values))
}

pub fn read_mask_bytes(data: &[u8], role: MaskRole, source_name: &str) -> Result<AnnotationMask> {
    let (w, h, values) = read_pgm_bytes(data, source_name)?;
    let cells = values.iter().map(|&v| v != 0).collect();
    Ok(AnnotationMask::new(
        BinaryGrid::from_cells(w, h, cells)?,
        role,
    ))
}

pub fn write_mask<W: Write>(grid: &BinaryGrid, mut out: W) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", grid.width(), grid.height())?;
    let raster: Vec<u8> = grid
        .cells()
        .iter()
        .map(|&c| if c { 255 } else { 0 })
        .collect();
    out.write_all(&raster)?;
    Ok(())
}

pub fn read_ppm_bytes(data: &[u8], source_name: &str) -> Result<RgbImage> {
    let (magic, width, height, _maxval, body) = parse_header(data, source_name)?;
    if magic != b"P6" {
        return Err(Error::parse(source_name, "expected a P6 pixmap"));
    }
    let n = width * height * 3;
    let raw = data
        .get(body..body + n)
        .ok_or_else(|| Error::parse(source_name, "truncated P6 raster"))?;
    RgbImage::new(width, height, raw.to_vec())
}

pub fn write_ppm<W: Write>(image: &RgbImage, mut out: W) -> Result<()> {
    write!(out, "P6\n{} {}\n255\n", image.width, image.height)?;
    out.write_all(&image.data)?;
    Ok(())
}

pub fn write_heatmap_csv<W: Write>(map: &Heatmap, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "col,row,score")?;
    for (c, r, s) in map.present() {
        writeln!(out, "{c},{r},{s}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_heatmap_csv<R: Read>(
    input: R,
    width: usize,
    height: usize,
    source_name: &str,
) -> Result<Heatmap> {
    let mut scores = vec![None; width * height];
    for (n, line) in BufReader::new(input).lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let bad = || {
            Error::parse(
                source_name,
                format!("line {}: expected col,row,score", n + 1),
            )
        };
        if parts.len() != 3 {
            return Err(bad());
        }
        let c: usize = parts[0].trim().parse().map_err(|_| bad())?;
        let r: usize = parts[1].trim().parse().map_err(|_| bad())?;
        let s: f64 = parts[2].trim().parse().map_err(|_| bad())?;
        if c >= width || r >= height {
            return Err(bad());
        }
        scores[r * width + c] = Some(s);
    }
    Heatmap::new(width, height, scores)
}

// Path helpers.

fn name(path: &Path) -> String {
    path.display().to_string()
}

pub fn load_mask(path: &Path, role: MaskRole) -> Result<AnnotationMask> {
    read_mask_bytes(&fs::read(path)?, role, &name(path))
}

pub fn save_mask(path: &Path, grid: &BinaryGrid) -> Result<()> {
    let mut buf = Vec::new();
    write_mask(grid, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_grid(path: &Path, tissue: BinaryGrid) -> Result<PatchGrid> {
    read_grid(fs::File::open(path)?, tissue, &name(path))
}

pub fn save_grid(path: &Path, grid: &PatchGrid) -> Result<()> {
    write_grid(grid, fs::File::create(path)?)
}

pub fn load_ppm(path: &Path) -> Result<RgbImage> {
    read_ppm_bytes(&fs::read(path)?, &name(path))
}

pub fn save_heatmap(path: &Path, map: &Heatmap) -> Result<()> {
    write_heatmap_csv(map, fs::File::create(path)?)
}

pub fn load_heatmap(path: &Path, width: usize, height: usize) -> Result<Heatmap> {
    read_heatmap_csv(fs::File::open(path)?, width, height, &name(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_round_trip_is_exact() {
        let tissue = BinaryGrid::from_fn(3, 2, |x, _| x > 0);
        let feats = vec![
            0.1,
            -2.5e-17,
            1.0 / 3.0,
            f64::MAX,
            7.0,
            -0.0,
            1e300,
            2.0,
            3.0,
            4.0,
            5.0,
            6.0,
        ];
        let grid = PatchGrid::new(3, 2, 2, feats, tissue.clone()).unwrap();
        let mut buf = Vec::new();
        write_grid(&grid, &mut buf).unwrap();
        let back = read_grid(buf.as_slice(), tissue, "mem").unwrap();
        assert_eq!(back.features(), grid.features());
    }

    #[test]
    fn grid_row_count_checked() {
        let text = "2 1 2\n1 2\n";
        assert!(read_grid(text.as_bytes(), BinaryGrid::new(2, 1), "mem").is_err());
        let text = "1 1 2\n1 2 3\n";
        assert!(read_grid(text.as_bytes(), BinaryGrid::new(1, 1), "mem").is_err());
    }

    #[test]
    fn pgm_p5_round_trip_and_p2_read() {
        let g = BinaryGrid::from_fn(4, 3, |x, y| (x + y) % 2 == 0);
        let mut buf = Vec::new();
        write_mask(&g, &mut buf).unwrap();
        let m = read_mask_bytes(&buf, MaskRole::Coarse, "mem").unwrap();
        assert_eq!(m.grid, g);

        let p2 = b"P2\n# comment\n3 1\n255\n0 255 0\n";
        let m = read_mask_bytes(p2, MaskRole::GroundTruth, "mem").unwrap();
        assert_eq!(m.grid.cells(), &[false, true, false]);
    }

    #[test]
    fn truncated_pgm_rejected() {
        assert!(read_mask_bytes(b"P5\n4 4\n255\n\x00\x00", MaskRole::Coarse, "mem").is_err());
        assert!(read_mask_bytes(b"P6\n1 1\n255\n\x00\x00\x00", MaskRole::Coarse, "mem").is_err());
    }

    #[test]
    fn ppm_round_trip() {
        let img = RgbImage::from_fn(2, 2, |x, y| [x as u8 * 10, y as u8 * 20, 30]);
        let mut buf = Vec::new();
        write_ppm(&img, &mut buf).unwrap();
        assert_eq!(read_ppm_bytes(&buf, "mem").unwrap(), img);
    }

    #[test]
    fn heatmap_csv_round_trip() {
        let map = Heatmap::new(2, 2, vec![Some(0.25), None, Some(1.0 / 3.0), Some(0.0)]).unwrap();
        let mut buf = Vec::new();
        write_heatmap_csv(&map, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("col,row,score\n0,0,0.25\n"));
        let back = read_heatmap_csv(buf.as_slice(), 2, 2, "mem").unwrap();
        assert_eq!(back, map);
    }
}
