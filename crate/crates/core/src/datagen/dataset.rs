use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

/// Relative tolerance for the `‖x_i‖ = √d` invariant.
pub const DATASET_NORM_TOL: f64 = 1e-8;

/// How pixel data was mapped onto the sphere, so exported images can undo it.
///
/// Pipeline: bytes / 255 → per-coordinate standardization with subset
/// statistics → per-row rescale to norm `√d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelNormalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Factor applied to each standardized row to reach norm `√d`.
    pub row_scale: Vec<f64>,
    pub channels: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    pub seed: Option<u64>,
    pub class_names: Vec<String>,
    pub normalization: Option<PixelNormalization>,
}

/// Training inputs on the radius-`√d` sphere with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DenseMatrix,
    y: DenseMatrix,
    pub meta: DatasetMeta,
}

#[derive(Serialize, Deserialize)]
struct ExportHeader {
    n: usize,
    d: usize,
    k: usize,
    meta: DatasetMeta,
}

const EXPORT_MAGIC: &[u8; 4] = b"RLDS";

impl Dataset {
    pub fn new(x: DenseMatrix, y: DenseMatrix, meta: DatasetMeta) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::shape("Dataset labels", x.rows(), y.rows()));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite("Dataset"));
        }
        let radius = (x.cols() as f64).sqrt();
        for (i, n) in x.row_norms().into_iter().enumerate() {
            if (n - radius).abs() > DATASET_NORM_TOL * radius {
                return Err(Error::InvalidArgument(format!(
                    "dataset row {i} has norm {n}, expected {radius}"
                )));
            }
        }
        Ok(Self { x, y, meta })
    }

    /// Inputs without labels, e.g. a reconstruction.
    pub fn unlabeled(x: DenseMatrix, meta: DatasetMeta) -> Result<Self> {
        let n = x.rows();
        Self::new(x, DenseMatrix::zeros(n, 0), meta)
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn k(&self) -> usize {
        self.y.cols()
    }

    /// Length-prefixed JSON header followed by `X` then `Y` as little-endian f64.
    ///
    /// ```text
    /// "RLDS" | header length u64 | header JSON | X (n×d) | Y (n×k)
    /// ```
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&ExportHeader {
            n: self.n(),
            d: self.d(),
            k: self.k(),
            meta: self.meta.clone(),
        })?;
        let mut out = Vec::with_capacity(12 + header.len() + 8 * (self.x.as_slice().len() + self.y.as_slice().len()));
        out.extend_from_slice(EXPORT_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for v in self.x.as_slice().iter().chain(self.y.as_slice()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != EXPORT_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "missing dataset magic".into(),
            });
        }
        let hlen = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let body = 12usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or(Error::Format {
            offset: 4,
            message: "header length exceeds file".into(),
        })?;
        let header: ExportHeader = serde_json::from_slice(&bytes[12..body])?;
        let (n, d, k) = (header.n, header.d, header.k);
        let payload = &bytes[body..];
        if payload.len() != 8 * (n * d + n * k) {
            return Err(Error::Format {
                offset: body,
                message: format!("payload has {} bytes, expected {}", payload.len(), 8 * (n * d + n * k)),
            });
        }
        let floats: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (xs, ys) = floats.split_at(n * d);
        Self::new(DenseMatrix::new(n, d, xs.to_vec())?, DenseMatrix::new(n, k, ys.to_vec())?, header.meta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Renders `values` (a row on this dataset's sphere) as an image.
    ///
    /// With pixel normalization the map is inverted using the row scale of
    /// training sample `scale_row`; otherwise values are min-max stretched.
    pub fn render_row(&self, values: &[f64], scale_row: usize) -> Result<Image> {
        let d = self.d();
        if values.len() != d {
            return Err(Error::shape("render_row", d, values.len()));
        }
        match &self.meta.normalization {
            Some(norm) => {
                let scale = norm.row_scale.get(scale_row).copied().ok_or_else(|| {
                    Error::InvalidArgument(format!("no row scale for sample {scale_row}"))
                })?;
                let unit: Vec<f64> = values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v / scale * norm.std[j] + norm.mean[j])
                    .collect();
                Image::from_planar(&unit, norm.channels, norm.width, norm.height)
            }
            None => {
                let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                let span = if hi > lo { hi - lo } else { 1.0 };
                let unit: Vec<f64> = values.iter().map(|v| (v - lo) / span).collect();
                let (channels, side) = square_layout(d)?;
                Image::from_planar(&unit, channels, side, side)
            }
        }
    }
}

/// `d = c·s²` with `c ∈ {3, 1}`; planar RGB preferred.
fn square_layout(d: usize) -> Result<(usize, usize)> {
    for channels in [3, 1] {
        if d.is_multiple_of(channels) {
            let side = ((d / channels) as f64).sqrt().round() as usize;
            if side * side * channels == d {
                return Ok((channels, side));
            }
        }
    }
    Err(Error::InvalidArgument(format!("dimension {d} is not an image layout")))
}

/// 8-bit RGB image.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Image {
    /// `unit` holds `channels` planes of `width × height` values in [0, 1];
    /// values outside are clamped.
    pub fn from_planar(unit: &[f64], channels: usize, width: usize, height: usize) -> Result<Self> {
        let plane = width * height;
        if unit.len() != channels * plane || !(channels == 1 || channels == 3) {
            return Err(Error::shape("Image::from_planar", channels * plane, unit.len()));
        }
        let to_byte = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
        let mut rgb = Vec::with_capacity(3 * plane);
        for px in 0..plane {
            for c in 0..3 {
                let src = if channels == 3 { c * plane + px } else { px };
                rgb.push(to_byte(unit[src]));
            }
        }
        Ok(Self { width, height, rgb })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![255; 3 * width * height],
        }
    }

    /// Binary PPM (P6).
    pub fn write_ppm(&self, out: &mut impl Write) -> Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.rgb)?;
        Ok(())
    }

    /// Tiles equally sized images row by row with a `gap`-pixel white border.
    pub fn grid(images: &[Image], columns: usize, gap: usize) -> Result<Image> {
        let first = images.first().ok_or_else(|| Error::InvalidArgument("no images to tile".into()))?;
        let (w, h) = (first.width, first.height);
        if images.iter().any(|im| im.width != w || im.height != h) {
            return Err(Error::InvalidArgument("images differ in size".into()));
        }
        let columns = columns.max(1);
        let rows = images.len().div_ceil(columns);
        let width = columns * w + (columns + 1) * gap;
        let height = rows * h + (rows + 1) * gap;
        let mut out = Image::blank(width, height);
        for (idx, im) in images.iter().enumerate() {
            let (gr, gc) = (idx / columns, idx % columns);
            let (ox, oy) = (gap + gc * (w + gap), gap + gr * (h + gap));
            for y in 0..h {
                let src = &im.rgb[3 * y * w..3 * (y + 1) * w];
                let start = 3 * ((oy + y) * width + ox);
                out.rgb[start..start + 3 * w].copy_from_slice(src);
            }
        }
        Ok(out)
    }
}
