//! Image-domain operators used below the aggregation tier: valid 3x3
//! convolution followed by ReLU, 2x2 max pooling, and windowed statistics
//! that reduce an image to a scalar.

use std::fmt;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("image {height}x{width} is too small for {op} (needs at least {min}x{min})")]
    ImageTooSmall {
        op: &'static str,
        height: usize,
        width: usize,
        min: usize,
    },
    #[error("aggregation window contains no pixels")]
    EmptyWindow,
    #[error("pixel buffer has {got} values, expected {expected}")]
    BadShape { expected: usize, got: usize },
}

/// Row-major grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 || pixels.len() != height * width {
            return Err(ImageError::BadShape {
                expected: height * width,
                got: pixels.len(),
            });
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        Self {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            pixels,
        }
    }

    /// Image with every pixel drawn uniformly from `[0, 1)`.
    pub fn random<R: Rng + ?Sized>(height: usize, width: usize, rng: &mut R) -> Self {
        Self::from_fn(height, width, |_, _| rng.gen::<f64>())
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.width + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.pixels[r * self.width + c] = v;
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }
}

/// A 3x3 convolution kernel; the only trainable parameters of a program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Filter(pub [[f64; 3]; 3]);

impl Filter {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut k = [[0.0; 3]; 3];
        for row in k.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.gen_range(-1.0..=1.0);
            }
        }
        Filter(k)
    }

    pub fn filled(v: f64) -> Self {
        Filter([[v; 3]; 3])
    }

    /// Coefficients in row-major order.
    pub fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flatten().copied()
    }

    pub fn from_slice(values: &[f64]) -> Option<Self> {
        if values.len() != 9 {
            return None;
        }
        let mut k = [[0.0; 3]; 3];
        for (i, v) in values.iter().enumerate() {
            k[i / 3][i % 3] = *v;
        }
        Some(Filter(k))
    }

    /// The kernel rotated by 180 degrees.
    pub fn flipped(&self) -> Self {
        let mut k = [[0.0; 3]; 3];
        for (a, row) in k.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = self.0[2 - a][2 - b];
            }
        }
        Filter(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowShape {
    Rectangle,
    Row,
    Column,
    Ellipse,
}

impl WindowShape {
    pub const ALL: [WindowShape; 4] = [
        WindowShape::Rectangle,
        WindowShape::Row,
        WindowShape::Column,
        WindowShape::Ellipse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WindowShape::Rectangle => "rect",
            WindowShape::Row => "row",
            WindowShape::Column => "column",
            WindowShape::Ellipse => "ellipse",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        WindowShape::ALL.into_iter().find(|w| w.name() == s)
    }
}

impl fmt::Display for WindowShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Aggregation window expressed as fractions of the image so that a
/// program applies to images of any size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub shape: WindowShape,
    pub pos_x: f64,
    pub pos_y: f64,
    pub size_w: f64,
    pub size_h: f64,
}

impl WindowSpec {
    pub fn new(shape: WindowShape, pos_x: f64, pos_y: f64, size_w: f64, size_h: f64) -> Self {
        Self {
            shape,
            pos_x,
            pos_y,
            size_w,
            size_h,
        }
    }

    pub fn full() -> Self {
        Self::new(WindowShape::Rectangle, 0.0, 0.0, 1.0, 1.0)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let shape = WindowShape::ALL[rng.gen_range(0..4)];
        // sizes in (0, 1]
        let size_w = 1.0 - rng.gen::<f64>();
        let size_h = 1.0 - rng.gen::<f64>();
        Self::new(shape, rng.gen(), rng.gen(), size_w, size_h)
    }

    pub fn is_valid(&self) -> bool {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        unit(self.pos_x)
            && unit(self.pos_y)
            && self.size_w > 0.0
            && self.size_w <= 1.0
            && self.size_h > 0.0
            && self.size_h <= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggStat {
    Min,
    Max,
    Mean,
    Std,
}

impl AggStat {
    pub const ALL: [AggStat; 4] = [AggStat::Min, AggStat::Max, AggStat::Mean, AggStat::Std];
}

/// Valid convolution (no padding, stride 1) followed by ReLU.
pub fn convolve(img: &Image, f: &Filter) -> Result<Image, ImageError> {
    let pre = convolve_linear(img, f)?;
    Ok(relu(pre))
}

/// Valid convolution without the activation. Kept separate so gradient
/// code can inspect pre-activations.
pub fn convolve_linear(img: &Image, f: &Filter) -> Result<Image, ImageError> {
    if img.height < 3 || img.width < 3 {
        return Err(ImageError::ImageTooSmall {
            op: "convolve",
            height: img.height,
            width: img.width,
            min: 3,
        });
    }
    let (oh, ow) = (img.height - 2, img.width - 2);
    let k = &f.0;
    let mut out = Vec::with_capacity(oh * ow);
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for (a, krow) in k.iter().enumerate() {
                let base = (r + a) * img.width + c;
                let row = &img.pixels[base..base + 3];
                acc += row[0] * krow[0] + row[1] * krow[1] + row[2] * krow[2];
            }
            out.push(acc);
        }
    }
    Ok(Image {
        height: oh,
        width: ow,
        pixels: out,
    })
}

fn relu(mut img: Image) -> Image {
    for v in img.pixels.iter_mut() {
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
    img
}

/// 2x2 max pooling with stride 2. A trailing odd row or column is dropped.
pub fn pool(img: &Image) -> Result<Image, ImageError> {
    if img.height < 2 || img.width < 2 {
        return Err(ImageError::ImageTooSmall {
            op: "pool",
            height: img.height,
            width: img.width,
            min: 2,
        });
    }
    let (oh, ow) = (img.height / 2, img.width / 2);
    let out = Image::from_fn(oh, ow, |r, c| {
        let (r0, c0) = (2 * r, 2 * c);
        img.get(r0, c0)
            .max(img.get(r0, c0 + 1))
            .max(img.get(r0 + 1, c0))
            .max(img.get(r0 + 1, c0 + 1))
    });
    Ok(out)
}

/// Row-major index of the winning pixel inside the 2x2 block whose top-left
/// corner is `(r0, c0)`. Ties go to the first pixel in row-major order.
pub fn pool_argmax(img: &Image, r0: usize, c0: usize) -> (usize, usize) {
    let mut best = (r0, c0);
    let mut best_v = img.get(r0, c0);
    for (r, c) in [(r0, c0 + 1), (r0 + 1, c0), (r0 + 1, c0 + 1)] {
        let v = img.get(r, c);
        if v > best_v {
            best_v = v;
            best = (r, c);
        }
    }
    best
}

/// Bounding rectangle of a window after rounding and clamping:
/// `(top, left, rows, cols)`.
pub fn window_bounds(w: &WindowSpec, h: usize, wid: usize) -> (usize, usize, usize, usize) {
    assert!(h >= 1 && wid >= 1, "image dimensions must be positive");
    let top = ((w.pos_y * h as f64).floor().max(0.0) as usize).min(h - 1);
    let left = ((w.pos_x * wid as f64).floor().max(0.0) as usize).min(wid - 1);
    let round_half_up = |v: f64| (v + 0.5).floor().max(0.0) as usize;
    let mut rows = round_half_up(w.size_h * h as f64).max(1);
    let mut cols = round_half_up(w.size_w * wid as f64).max(1);
    match w.shape {
        WindowShape::Row => rows = 1,
        WindowShape::Column => cols = 1,
        WindowShape::Rectangle | WindowShape::Ellipse => {}
    }
    rows = rows.min(h - top);
    cols = cols.min(wid - left);
    (top, left, rows, cols)
}

/// Maps a fractional window onto concrete pixel coordinates `(row, col)`,
/// listed in row-major order.
///
/// The top-left corner uses floor, extents use round-half-up with a minimum
/// of one pixel, and the result is clamped to the image. `Row` and `Column`
/// force a one-pixel extent in the corresponding axis. `Ellipse` keeps the
/// pixels whose centres fall inside the ellipse inscribed in the clamped
/// rectangle.
pub fn realize_window(w: &WindowSpec, h: usize, wid: usize) -> Vec<(usize, usize)> {
    let (top, left, rows, cols) = window_bounds(w, h, wid);
    let mut out = Vec::with_capacity(rows * cols);
    let (ry, rx) = (rows as f64 / 2.0, cols as f64 / 2.0);
    for r in top..top + rows {
        for c in left..left + cols {
            if w.shape == WindowShape::Ellipse {
                let dy = (r - top) as f64 + 0.5 - ry;
                let dx = (c - left) as f64 + 0.5 - rx;
                if (dy / ry).powi(2) + (dx / rx).powi(2) > 1.0 {
                    continue;
                }
            }
            out.push((r, c));
        }
    }
    out
}

/// Applies `stat` over the realized window. `Std` is the population
/// standard deviation.
pub fn aggregate(img: &Image, w: &WindowSpec, stat: AggStat) -> Result<f64, ImageError> {
    let coords = realize_window(w, img.height, img.width);
    aggregate_coords(img, &coords, stat)
}

pub(crate) fn aggregate_coords(
    img: &Image,
    coords: &[(usize, usize)],
    stat: AggStat,
) -> Result<f64, ImageError> {
    if coords.is_empty() {
        return Err(ImageError::EmptyWindow);
    }
    let values = coords.iter().map(|&(r, c)| img.get(r, c));
    let v = match stat {
        AggStat::Min => values.fold(f64::INFINITY, f64::min),
        AggStat::Max => values.fold(f64::NEG_INFINITY, f64::max),
        AggStat::Mean => values.sum::<f64>() / coords.len() as f64,
        AggStat::Std => {
            let n = coords.len() as f64;
            let mean = values.clone().sum::<f64>() / n;
            let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            var.sqrt()
        }
    };
    Ok(v)
}
