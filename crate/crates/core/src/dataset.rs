//! Labelled image sets: portable graymap loading, seeded stratified
//! splitting, and the synthetic bright-quadrant task.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::image_ops::Image;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("class directory {0} contains no .pgm images")]
    EmptyClass(PathBuf),
    #[error("expected exactly two class directories under {path}, found {found}")]
    Layout { path: PathBuf, found: usize },
    #[error(
        "class {class} has {count} items, too few to place at least one on each side of the split"
    )]
    TooFewItems { class: u8, count: usize },
    #[error("invalid split fraction {0}")]
    BadFraction(f64),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub class_names: [String; 2],
    pub items: Vec<Sample>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0, 0];
        for s in &self.items {
            counts[s.label as usize] += 1;
        }
        counts
    }
}

/// Parses a binary (`P5`) or ASCII (`P2`) portable graymap, scaling pixels
/// to `[0, 1]` by the declared maximum value.
pub fn parse_pgm(bytes: &[u8]) -> Result<Image, String> {
    let mut pos = 0usize;

    fn skip_ws_and_comments(bytes: &[u8], pos: &mut usize) {
        while *pos < bytes.len() {
            if bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else if bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            } else {
                break;
            }
        }
    }

    fn read_uint(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32, String> {
        skip_ws_and_comments(bytes, pos);
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if start == *pos {
            return Err(format!("expected {what} at byte {start}"));
        }
        std::str::from_utf8(&bytes[start..*pos])
            .unwrap()
            .parse()
            .map_err(|_| format!("{what} out of range"))
    }

    if bytes.len() < 2 || bytes[0] != b'P' || !matches!(bytes[1], b'2' | b'5') {
        return Err("bad magic number (expected P2 or P5)".into());
    }
    let binary = bytes[1] == b'5';
    pos += 2;
    let width = read_uint(bytes, &mut pos, "width")? as usize;
    let height = read_uint(bytes, &mut pos, "height")? as usize;
    let maxval = read_uint(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err("zero image dimension".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} out of range"));
    }
    let n = width * height;
    let scale = maxval as f64;
    let mut pixels = Vec::with_capacity(n);

    if binary {
        // exactly one whitespace byte separates the header from the raster
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err("missing whitespace after header".into());
        }
        pos += 1;
        let bpp = if maxval < 256 { 1 } else { 2 };
        let raster = &bytes[pos..];
        if raster.len() < n * bpp {
            return Err(format!(
                "raster truncated: {} of {} bytes",
                raster.len(),
                n * bpp
            ));
        }
        for i in 0..n {
            let v = if bpp == 1 {
                raster[i] as u32
            } else {
                u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as u32
            };
            if v > maxval {
                return Err(format!("pixel {i} value {v} exceeds maxval {maxval}"));
            }
            pixels.push(v as f64 / scale);
        }
    } else {
        for i in 0..n {
            let v = read_uint(bytes, &mut pos, "pixel value")?;
            if v > maxval {
                return Err(format!("pixel {i} value {v} exceeds maxval {maxval}"));
            }
            pixels.push(v as f64 / scale);
        }
    }
    Image::new(height, width, pixels).map_err(|e| e.to_string())
}

pub fn load_pgm(path: &Path) -> Result<Image, DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_pgm(&bytes).map_err(|msg| DatasetError::Format {
        path: path.to_path_buf(),
        msg,
    })
}

/// Writes an 8-bit binary graymap; pixel values are clamped to `[0, 1]`.
pub fn write_pgm(path: &Path, img: &Image) -> Result<(), DatasetError> {
    let mut buf = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    buf.extend(
        img.pixels()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&buf).map_err(io_err(path))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        out.push(entry.map_err(io_err(dir))?.path());
    }
    out.sort();
    Ok(out)
}

/// Loads `<root>/<class0>/*.pgm` and `<root>/<class1>/*.pgm`. Class
/// directories are taken in lexicographic order; the first is label 0.
pub fn load_dir(root: &Path) -> Result<LabeledDataset, DatasetError> {
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.len() != 2 {
        return Err(DatasetError::Layout {
            path: root.to_path_buf(),
            found: class_dirs.len(),
        });
    }
    let mut items = Vec::new();
    let mut class_names: [String; 2] = Default::default();
    for (label, dir) in class_dirs.iter().enumerate() {
        class_names[label] = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let files: Vec<PathBuf> = sorted_entries(dir)?
            .into_iter()
            .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
            .collect();
        if files.is_empty() {
            return Err(DatasetError::EmptyClass(dir.clone()));
        }
        for f in files {
            items.push(Sample {
                image: load_pgm(&f)?,
                label: label as u8,
            });
        }
    }
    Ok(LabeledDataset {
        name: root
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into()),
        class_names,
        items,
    })
}

/// Writes a dataset in the layout read by [`load_dir`].
pub fn save_dir(ds: &LabeledDataset, root: &Path) -> Result<(), DatasetError> {
    let mut counters = [0usize; 2];
    for name in &ds.class_names {
        let dir = root.join(name);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    for s in &ds.items {
        let i = counters[s.label as usize];
        counters[s.label as usize] += 1;
        let path = root
            .join(&ds.class_names[s.label as usize])
            .join(format!("{i:05}.pgm"));
        write_pgm(&path, &s.image)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub shuffle_seed: u64,
    pub train_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            shuffle_seed: 0,
            train_fraction: 0.5,
            stratified: true,
        }
    }
}

/// Seeded shuffle followed by a (by default stratified) train/test split.
/// Returns the item indices assigned to each side, in shuffled order.
pub fn split_indices(
    ds: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(DatasetError::BadFraction(spec.train_fraction));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.shuffle_seed));

    let counts = ds.class_counts();
    let round = |v: f64| (v + 0.5).floor() as usize;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if spec.stratified {
        let quota = counts.map(|c| round(c as f64 * spec.train_fraction));
        let mut taken = [0usize; 2];
        for i in order {
            let l = ds.items[i].label as usize;
            if taken[l] < quota[l] {
                taken[l] += 1;
                train.push(i);
            } else {
                test.push(i);
            }
        }
    } else {
        let cut = round(ds.len() as f64 * spec.train_fraction);
        train = order[..cut].to_vec();
        test = order[cut..].to_vec();
    }
    for class in 0..2u8 {
        let on_train = train
            .iter()
            .filter(|&&i| ds.items[i].label == class)
            .count();
        let on_test = test.iter().filter(|&&i| ds.items[i].label == class).count();
        if on_train == 0 || on_test == 0 {
            return Err(DatasetError::TooFewItems {
                class,
                count: counts[class as usize],
            });
        }
    }
    Ok((train, test))
}

pub fn split(
    ds: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset), DatasetError> {
    let (train, test) = split_indices(ds, spec)?;
    let subset = |idx: &[usize], tag: &str| LabeledDataset {
        name: format!("{}-{tag}", ds.name),
        class_names: ds.class_names.clone(),
        items: idx.iter().map(|&i| ds.items[i].clone()).collect(),
    };
    Ok((subset(&train, "train"), subset(&test, "test")))
}

pub const BRIGHT_LEVEL: f64 = 0.9;
pub const DARK_LEVEL: f64 = 0.2;

/// Class 0 images have a bright top-left quadrant on a dark background;
/// class 1 images are dark everywhere. Every pixel gets independent uniform
/// noise in `[-noise, noise]` and is clamped to `[0, 1]`.
pub fn synth_bright_quadrant<R: Rng + ?Sized>(
    n_per_class: usize,
    side: usize,
    noise: f64,
    rng: &mut R,
) -> LabeledDataset {
    assert!(side >= 8, "synthetic images need side >= 8");
    assert!((0.0..0.3).contains(&noise), "noise must lie in [0, 0.3)");
    let half = side / 2;
    let mut items = Vec::with_capacity(2 * n_per_class);
    for label in 0..2u8 {
        for _ in 0..n_per_class {
            let image = Image::from_fn(side, side, |r, c| {
                let base = if label == 0 && r < half && c < half {
                    BRIGHT_LEVEL
                } else {
                    DARK_LEVEL
                };
                let jitter = if noise > 0.0 {
                    rng.gen_range(-noise..=noise)
                } else {
                    0.0
                };
                (base + jitter).clamp(0.0, 1.0)
            });
            items.push(Sample { image, label });
        }
    }
    LabeledDataset {
        name: "bright-quadrant".into(),
        class_names: ["bright".into(), "dark".into()],
        items,
    }
}
