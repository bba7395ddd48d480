//! Dataset ingestion: PGM decoding, block-average downsampling with
//! normalization into tanh range, directory-per-class dataset loading, and a
//! synthetic grating generator for desk-scale experiments.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

/// One preprocessed image and its class label. Image values lie in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub image: FeatureMap,
    pub label: usize,
}

/// Where a loaded dataset came from: ordered class names and the (path,
/// class) pair of every sample, in load order.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    pub samples: Vec<(PathBuf, usize)>,
}

struct PgmParser<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmParser<'a> {
    fn header_err(&self, offset: usize, reason: &str) -> Error {
        Error::PgmHeader {
            path: self.path.to_path_buf(),
            offset,
            reason: reason.to_string(),
        }
    }

    fn payload_err(&self, offset: usize, reason: &str) -> Error {
        Error::PgmPayload {
            path: self.path.to_path_buf(),
            offset,
            reason: reason.to_string(),
        }
    }

    /// Skips whitespace and `#` comments (comments run to end of line).
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    /// Next whitespace-delimited token and the offset it starts at.
    fn next_token(&mut self) -> Option<(&'a [u8], usize)> {
        self.skip_separators();
        if self.pos >= self.bytes.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        Some((&self.bytes[start..self.pos], start))
    }

    fn next_uint(&mut self, what: &str) -> Result<(u32, usize)> {
        let eof = self.bytes.len();
        let (token, offset) = self
            .next_token()
            .ok_or_else(|| self.header_err(eof, &format!("missing {what}")))?;
        let text = std::str::from_utf8(token)
            .ok()
            .and_then(|t| t.parse::<u32>().ok())
            .ok_or_else(|| self.header_err(offset, &format!("{what} is not an unsigned integer")))?;
        Ok((text, offset))
    }
}

/// Decodes a binary (P5) or ASCII (P2) PGM file with maxval up to 255.
/// Pixel values come back raw, in [0, 255].
pub fn load_pgm(path: &Path) -> Result<FeatureMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut parser = PgmParser {
        path,
        bytes: &bytes,
        pos: 0,
    };

    let (magic, magic_offset) = parser
        .next_token()
        .ok_or_else(|| parser.header_err(0, "empty file"))?;
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(parser.header_err(magic_offset, "magic must be P2 or P5")),
    };

    let (width, w_offset) = parser.next_uint("width")?;
    let (height, h_offset) = parser.next_uint("height")?;
    if width == 0 {
        return Err(parser.header_err(w_offset, "width must be positive"));
    }
    if height == 0 {
        return Err(parser.header_err(h_offset, "height must be positive"));
    }
    let (maxval, maxval_offset) = parser.next_uint("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::PgmMaxval {
            path: path.to_path_buf(),
            offset: maxval_offset,
            maxval,
        });
    }

    let expected = width as usize * height as usize;
    let mut values = Vec::with_capacity(expected);

    if binary {
        // Exactly one whitespace byte separates the header from the payload.
        if parser.pos < bytes.len() && bytes[parser.pos].is_ascii_whitespace() {
            parser.pos += 1;
        } else {
            return Err(parser.header_err(parser.pos, "missing separator before payload"));
        }
        let available = bytes.len() - parser.pos;
        if available < expected {
            return Err(Error::PgmTruncated {
                path: path.to_path_buf(),
                offset: bytes.len(),
                expected,
                got: available,
            });
        }
        for i in 0..expected {
            let b = bytes[parser.pos + i];
            if u32::from(b) > maxval {
                return Err(parser.payload_err(parser.pos + i, "pixel exceeds maxval"));
            }
            values.push(f64::from(b));
        }
        let tail = &bytes[parser.pos + expected..];
        if tail.iter().any(|b| !b.is_ascii_whitespace()) {
            return Err(parser.payload_err(parser.pos + expected, "trailing data after payload"));
        }
    } else {
        while values.len() < expected {
            let eof = bytes.len();
            let got = values.len();
            let (token, offset) = parser.next_token().ok_or(Error::PgmTruncated {
                path: path.to_path_buf(),
                offset: eof,
                expected,
                got,
            })?;
            let pixel = std::str::from_utf8(token)
                .ok()
                .and_then(|t| t.parse::<u32>().ok())
                .ok_or_else(|| parser.payload_err(offset, "pixel is not an unsigned integer"))?;
            if pixel > maxval {
                return Err(parser.payload_err(offset, "pixel exceeds maxval"));
            }
            values.push(f64::from(pixel));
        }
        if let Some((_, offset)) = parser.next_token() {
            return Err(parser.payload_err(offset, "trailing data after payload"));
        }
    }

    Ok(FeatureMap::from_values(height as usize, width as usize, values))
}

/// Writes a normalized [-1, 1] image as a binary (P5) PGM with maxval 255.
pub fn write_pgm(path: &Path, image: &FeatureMap) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    bytes.extend(image.values().iter().map(|&v| {
        let pixel = ((v + 1.0) * 127.5).round();
        pixel.clamp(0.0, 255.0) as u8
    }));
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Downsamples to `target_size` x `target_size` by block averaging (after a
/// center crop to the largest square whose side divides evenly), then
/// normalizes raw [0, 255] pixels into [-1, 1] via v / 127.5 - 1.
pub fn preprocess(raw: &FeatureMap, target_size: usize) -> Result<FeatureMap> {
    if target_size == 0 {
        return Err(Error::config("preprocess target size must be positive"));
    }
    if target_size > raw.height() || target_size > raw.width() {
        return Err(Error::config(format!(
            "preprocess target {target_size} larger than input {}x{}",
            raw.height(),
            raw.width()
        )));
    }
    let side = {
        let side = raw.height().min(raw.width());
        side - side % target_size
    };
    let row0 = (raw.height() - side) / 2;
    let col0 = (raw.width() - side) / 2;
    let block = side / target_size;
    let block_area = (block * block) as f64;

    let mut out = FeatureMap::zeros(target_size, target_size);
    for x in 0..target_size {
        for y in 0..target_size {
            let mut sum = 0.0;
            for r in 0..block {
                for c in 0..block {
                    sum += raw.get(row0 + x * block + r, col0 + y * block + c);
                }
            }
            out.set(x, y, (sum / block_area) / 127.5 - 1.0);
        }
    }
    Ok(out)
}

/// Loads `root/<class>/*.pgm` with classes sorted lexicographically and
/// samples sorted by (class, filename), so the load order is identical
/// across runs and platforms. Every image is preprocessed to
/// `target_size` x `target_size`.
pub fn load_dataset(root: &Path, target_size: usize) -> Result<(DatasetManifest, Vec<TrainingSample>)> {
    let dataset_err = |path: &Path, reason: String| Error::Dataset {
        path: path.to_path_buf(),
        reason,
    };

    let mut class_dirs: Vec<PathBuf> = Vec::new();
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().is_dir() {
            class_dirs.push(entry.path());
        }
    }
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(dataset_err(root, "no class subdirectories".to_string()));
    }

    let mut class_names = Vec::with_capacity(class_dirs.len());
    let mut manifest_samples = Vec::new();
    let mut samples = Vec::new();
    for (label, dir) in class_dirs.iter().enumerate() {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<PathBuf> = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            if path.extension().is_some_and(|e| e == "pgm") {
                files.push(path);
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(dataset_err(dir, format!("class {name} has no .pgm images")));
        }
        for path in files {
            let raw = load_pgm(&path)?;
            let image = preprocess(&raw, target_size)?;
            manifest_samples.push((path, label));
            samples.push(TrainingSample { image, label });
        }
        class_names.push(name);
    }

    Ok((
        DatasetManifest {
            class_names,
            samples: manifest_samples,
        },
        samples,
    ))
}

/// Oriented sinusoidal grating for one class. The orientation and frequency
/// depend only on the class index, so bases are identical across seeds.
fn class_pattern(class: usize, num_classes: usize, size: usize) -> FeatureMap {
    let theta = PI * class as f64 / num_classes as f64;
    let frequency = 1.0 + (class % 4) as f64;
    let (sin_t, cos_t) = theta.sin_cos();
    let mut map = FeatureMap::zeros(size, size);
    for x in 0..size {
        for y in 0..size {
            let u = x as f64 * cos_t + y as f64 * sin_t;
            let v = 0.8 * (2.0 * PI * frequency * u / size as f64).sin();
            map.set(x, y, v);
        }
    }
    map
}

/// Synthetic labeled dataset: one deterministic grating per class plus
/// seeded uniform noise of the given amplitude, clamped to [-1, 1]. Samples
/// come back class-major, `per_class` images per class.
pub fn generate_synthetic(
    num_classes: usize,
    per_class: usize,
    size: usize,
    seed: u64,
    noise_amplitude: f64,
) -> Result<Vec<TrainingSample>> {
    if num_classes < 2 {
        return Err(Error::config("need at least two classes"));
    }
    if per_class == 0 || size == 0 {
        return Err(Error::config("per_class and size must be positive"));
    }
    if !(0.0..=1.0).contains(&noise_amplitude) {
        return Err(Error::config("noise amplitude must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(num_classes * per_class);
    for class in 0..num_classes {
        let base = class_pattern(class, num_classes, size);
        for _ in 0..per_class {
            let mut image = base.clone();
            if noise_amplitude > 0.0 {
                for v in image.values_mut() {
                    let noisy = *v + rng.gen_range(-noise_amplitude..=noise_amplitude);
                    *v = noisy.clamp(-1.0, 1.0);
                }
            }
            samples.push(TrainingSample {
                image,
                label: class,
            });
        }
    }
    Ok(samples)
}

/// Materializes samples to `root/class_NN/img_MMM.pgm`, the same layout
/// [`load_dataset`] reads, so synthetic data exercises the file ingestion
/// path end to end.
pub fn materialize_dataset(root: &Path, samples: &[TrainingSample]) -> Result<()> {
    let mut per_class_index = std::collections::BTreeMap::new();
    for sample in samples {
        let dir = root.join(format!("class_{:02}", sample.label));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let index = per_class_index.entry(sample.label).or_insert(0usize);
        let path = dir.join(format!("img_{index:03}.pgm"));
        write_pgm(&path, &sample.image)?;
        *index += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, bytes).unwrap();
        path
    }

    #[test]
    fn p2_decode_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(dir.path(), "a.pgm", b"P2 2 2 255 0 255 128 64");
        let map = load_pgm(&path).unwrap();
        assert_eq!(map.values(), &[0.0, 255.0, 128.0, 64.0]);
        assert_eq!((map.height(), map.width()), (2, 2));
    }

    #[test]
    fn p5_decode_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(dir.path(), "a.pgm", b"P5\n2 2\n255\n\x00\xff\x80\x40");
        let map = load_pgm(&path).unwrap();
        assert_eq!(map.values(), &[0.0, 255.0, 128.0, 64.0]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(
            dir.path(),
            "a.pgm",
            b"P2 # format\n# size next\n2 1\n255\n7 9",
        );
        let map = load_pgm(&path).unwrap();
        assert_eq!(map.values(), &[7.0, 9.0]);
    }

    #[test]
    fn truncated_p5_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(dir.path(), "a.pgm", b"P5\n2 2\n255\n\x00\xff\x80");
        match load_pgm(&path) {
            Err(Error::PgmTruncated { expected, got, .. }) => {
                assert_eq!(expected, 4);
                assert_eq!(got, 3);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_p2_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(dir.path(), "a.pgm", b"P2 2 2 255 0 255 128");
        assert!(matches!(
            load_pgm(&path),
            Err(Error::PgmTruncated { got: 3, .. })
        ));
    }

    #[test]
    fn sixteen_bit_maxval_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(dir.path(), "a.pgm", b"P2 1 1 65535 1000");
        assert!(matches!(
            load_pgm(&path),
            Err(Error::PgmMaxval { maxval: 65535, .. })
        ));
    }

    #[test]
    fn bad_magic_is_rejected_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(dir.path(), "a.pgm", b"P6 1 1 255 x");
        assert!(matches!(
            load_pgm(&path),
            Err(Error::PgmHeader { offset: 0, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_pgm(Path::new("/nonexistent/x.pgm")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn pgm_round_trip_through_writer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.pgm");
        let image = FeatureMap::from_values(2, 2, vec![-1.0, 1.0, 0.0, 0.5]);
        write_pgm(&path, &image).unwrap();
        let raw = load_pgm(&path).unwrap();
        assert_eq!(raw.values(), &[0.0, 255.0, 128.0, 191.0]);
    }

    #[test]
    fn preprocess_normalization_endpoints() {
        let zero = preprocess(&FeatureMap::filled(96, 96, 0.0), 32).unwrap();
        assert!(zero.values().iter().all(|&v| v == -1.0));
        let full = preprocess(&FeatureMap::filled(96, 96, 255.0), 32).unwrap();
        assert!(full.values().iter().all(|&v| v == 1.0));
        let mid = preprocess(&FeatureMap::filled(96, 96, 128.0), 32).unwrap();
        assert!(mid
            .values()
            .iter()
            .all(|&v| (v - 0.00392156862745098).abs() < 1e-12));
        assert_eq!((mid.height(), mid.width()), (32, 32));
    }

    #[test]
    fn preprocess_center_crops_non_divisible_input() {
        // 97x100 -> crop to 96x96 centered -> 32x32.
        let mut raw = FeatureMap::filled(97, 100, 10.0);
        // Mark a corner outside the crop; it must not affect the output.
        raw.set(0, 0, 255.0);
        let out = preprocess(&raw, 32).unwrap();
        assert_eq!((out.height(), out.width()), (32, 32));
        let expected = 10.0 / 127.5 - 1.0;
        assert!(out.values().iter().all(|&v| (v - expected).abs() < 1e-12));
    }

    #[test]
    fn preprocess_rejects_target_larger_than_input() {
        assert!(preprocess(&FeatureMap::zeros(16, 16), 32).is_err());
    }

    #[test]
    fn block_average_stays_within_value_range() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(40);
        let values: Vec<f64> = (0..96 * 96).map(|_| rng.gen_range(30.0..200.0)).collect();
        let raw = FeatureMap::from_values(96, 96, values);
        let out = preprocess(&raw, 32).unwrap();
        let lo = 30.0 / 127.5 - 1.0;
        let hi = 200.0 / 127.5 - 1.0;
        assert!(out.values().iter().all(|&v| v >= lo && v <= hi));
    }

    #[test]
    fn synthetic_dataset_counts_and_labels() {
        let samples = generate_synthetic(17, 8, 32, 9, 0.1).unwrap();
        assert_eq!(samples.len(), 136);
        let mut histogram = [0usize; 17];
        for s in &samples {
            histogram[s.label] += 1;
        }
        assert!(histogram.iter().all(|&n| n == 8));
        assert!(samples
            .iter()
            .all(|s| s.image.values().iter().all(|&v| (-1.0..=1.0).contains(&v))));
    }

    #[test]
    fn zero_noise_makes_class_samples_identical() {
        let samples = generate_synthetic(3, 3, 16, 9, 0.0).unwrap();
        assert_eq!(samples[0].image, samples[1].image);
        assert_eq!(samples[0].image, samples[2].image);
        assert_ne!(samples[0].image, samples[3].image);
    }

    #[test]
    fn seeds_change_noise_but_not_bases() {
        let a = generate_synthetic(3, 2, 16, 1, 0.1).unwrap();
        let b = generate_synthetic(3, 2, 16, 2, 0.1).unwrap();
        assert_ne!(a[0].image, b[0].image);
        let base_a = generate_synthetic(3, 1, 16, 1, 0.0).unwrap();
        let base_b = generate_synthetic(3, 1, 16, 2, 0.0).unwrap();
        assert_eq!(base_a, base_b);
    }

    #[test]
    fn materialized_dataset_loads_back_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let samples = generate_synthetic(3, 2, 16, 4, 0.1).unwrap();
        materialize_dataset(dir.path(), &samples).unwrap();

        let (manifest, loaded) = load_dataset(dir.path(), 16).unwrap();
        assert_eq!(manifest.class_names, vec!["class_00", "class_01", "class_02"]);
        assert_eq!(loaded.len(), 6);
        assert_eq!(
            loaded.iter().map(|s| s.label).collect::<Vec<_>>(),
            vec![0, 0, 1, 1, 2, 2]
        );

        // Loading twice gives the identical ordering and content.
        let (manifest2, loaded2) = load_dataset(dir.path(), 16).unwrap();
        assert_eq!(manifest, manifest2);
        assert_eq!(loaded, loaded2);
    }

    #[test]
    fn empty_root_is_a_dataset_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_dataset(dir.path(), 16),
            Err(Error::Dataset { .. })
        ));
    }

    #[test]
    fn class_without_images_is_a_dataset_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("empty_class")).unwrap();
        assert!(matches!(
            load_dataset(dir.path(), 16),
            Err(Error::Dataset { .. })
        ));
    }
}
