//! Path-preference heatmaps and Gaussian ground-truth rendering.

use crate::perception::ImagePath;
use std::io;
use std::path::Path;

/// Heatmap resolution is half the source image in each dimension.
pub const HEATMAP_SCALE: f64 = 0.5;

/// Dense grid of path-preference values in `[0, 1]`, at half the source image
/// resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0);
        Self {
            width,
            height,
            values: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn from_values(width: u32, height: u32, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width as usize * height as usize);
        debug_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { width, height, values }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, row: u32, col: u32) -> f64 {
        self.values[row as usize * self.width as usize + col as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Argmax column of one row with its value; ties break to the smallest
    /// column index.
    pub fn row_argmax(&self, row: u32) -> (u32, f64) {
        let base = row as usize * self.width as usize;
        let mut best = (0u32, self.values[base]);
        for c in 1..self.width as usize {
            let v = self.values[base + c];
            if v > best.1 {
                best = (c as u32, v);
            }
        }
        best
    }

    /// Persist as 16-bit single-channel PNG, value = `round(65535 * h)`.
    pub fn save_png(&self, path: &Path) -> io::Result<()> {
        let file = std::fs::File::create(path)?;
        let mut enc = png::Encoder::new(io::BufWriter::new(file), self.width, self.height);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header().map_err(io::Error::other)?;
        let mut bytes = Vec::with_capacity(self.values.len() * 2);
        for v in &self.values {
            let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
            bytes.extend_from_slice(&q.to_be_bytes());
        }
        writer.write_image_data(&bytes).map_err(io::Error::other)
    }

    pub fn load_png(path: &Path) -> io::Result<Self> {
        let file = std::fs::File::open(path)?;
        let decoder = png::Decoder::new(io::BufReader::new(file));
        let mut reader = decoder.read_info().map_err(io::Error::other)?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| io::Error::other("png too large"))?;
        let mut buf = vec![0u8; size];
        let info = reader.next_frame(&mut buf).map_err(io::Error::other)?;
        if info.bit_depth != png::BitDepth::Sixteen || info.color_type != png::ColorType::Grayscale {
            return Err(io::Error::other("expected 16-bit grayscale heatmap PNG"));
        }
        let n = (info.width * info.height) as usize;
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let q = u16::from_be_bytes([buf[2 * i], buf[2 * i + 1]]);
            values.push(q as f64 / 65535.0);
        }
        Ok(Self { width: info.width, height: info.height, values })
    }
}

/// Render the Gaussian ground-truth heatmap of an image path.
///
/// `path` is in full-resolution image coordinates and `sigma` in
/// full-resolution pixels; both are scaled by [`HEATMAP_SCALE`] before
/// rendering. The value at pixel `q` is `exp(-d(q)^2 / (2 sigma^2))` with
/// `d(q)` the exact distance from `q` to the nearest path point, so
/// overlapping contributions combine by max and the peak stays at 1.
///
/// Per column, the squared distance over rows is the lower envelope of one
/// parabola per path point, computed in `O(points + rows)`.
pub fn render_heatmap(path: &ImagePath, out_size: (u32, u32), sigma: f64) -> Heatmap {
    assert!(!path.is_empty(), "cannot render an empty path");
    assert!(sigma > 0.0);
    let (w, h) = out_size;
    let sigma_out = sigma * HEATMAP_SCALE;
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma_out * sigma_out);

    // Site coordinates in output resolution; rows strictly increasing.
    let sites_r: Vec<f64> = path.entries().iter().map(|e| e.row as f64 * HEATMAP_SCALE).collect();
    let sites_u: Vec<f64> = path.entries().iter().map(|e| e.col * HEATMAP_SCALE).collect();
    let n = sites_r.len();

    let mut values = vec![0.0f64; w as usize * h as usize];
    let mut offsets = vec![0.0f64; n];
    let mut hull = vec![0usize; n];
    let mut breaks = vec![0.0f64; n + 1];

    for c in 0..w as usize {
        let cc = c as f64;
        for i in 0..n {
            let du = cc - sites_u[i];
            offsets[i] = du * du;
        }

        let mut k = 0usize;
        hull[0] = 0;
        breaks[0] = f64::NEG_INFINITY;
        breaks[1] = f64::INFINITY;
        for i in 1..n {
            let s = loop {
                let j = hull[k];
                let s = ((offsets[i] + sites_r[i] * sites_r[i])
                    - (offsets[j] + sites_r[j] * sites_r[j]))
                    / (2.0 * (sites_r[i] - sites_r[j]));
                if s <= breaks[k] {
                    k -= 1;
                } else {
                    break s;
                }
            };
            k += 1;
            hull[k] = i;
            breaks[k] = s;
            breaks[k + 1] = f64::INFINITY;
        }

        let mut k = 0usize;
        for r in 0..h as usize {
            let rr = r as f64;
            while breaks[k + 1] < rr {
                k += 1;
            }
            let site = hull[k];
            let dr = rr - sites_r[site];
            let d_sq = dr * dr + offsets[site];
            values[r * w as usize + c] = (-d_sq * inv_two_sigma_sq).exp();
        }
    }

    Heatmap { width: w, height: h, values }
}
