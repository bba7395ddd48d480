//! The seven-layer architecture: dimension algebra, seeded initialization,
//! parameter counting, the full forward pass, and checkpoint persistence.
//!
//! The architecture is parameterized so the reduced gradient-check network
//! and the full 32x32 face network share one code path.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backprop::{ForwardTrace, GradientSet};
use crate::error::{Error, Result};
use crate::layers::{flatten_maps, ConvLayerParams, FullLayerParams, SubsampleLayerParams};
use crate::tensor::FeatureMap;

const CHECKPOINT_MAGIC: &str = "cnnckpt";
const CHECKPOINT_VERSION: u32 = 1;

/// Integer description of the network: input side length, two
/// convolution/subsampling stages, hidden width, and class count.
///
/// `conv2_kernels == 0` disables the second stage entirely (the reduced
/// gradient-check network uses a single stage); `kernel2_size` and
/// `pool2_window` are ignored in that case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchitectureSpec {
    pub input_size: usize,
    pub conv1_kernels: usize,
    pub kernel1_size: usize,
    pub pool1_window: usize,
    pub conv2_kernels: usize,
    pub kernel2_size: usize,
    pub pool2_window: usize,
    pub hidden_units: usize,
    pub num_classes: usize,
}

impl Default for ArchitectureSpec {
    /// The full face network: 32x32 input, C1 6@5x5, S1 2x2, C2 16@5x5,
    /// S2 2x2, 170 hidden units, 17 classes.
    fn default() -> Self {
        ArchitectureSpec {
            input_size: 32,
            conv1_kernels: 6,
            kernel1_size: 5,
            pool1_window: 2,
            conv2_kernels: 16,
            kernel2_size: 5,
            pool2_window: 2,
            hidden_units: 170,
            num_classes: 17,
        }
    }
}

/// Side length of every feature map along the layer chain, plus the dense
/// layer widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerDims {
    pub input: usize,
    /// (maps, side) of C1 output.
    pub c1: (usize, usize),
    pub s1: (usize, usize),
    /// None when the second stage is disabled.
    pub c2: Option<(usize, usize)>,
    pub s2: Option<(usize, usize)>,
    pub hidden_inputs: usize,
    pub hidden_units: usize,
    pub num_classes: usize,
}

impl ArchitectureSpec {
    /// The single-stage architecture used by gradient-check tests:
    /// 8x8 input, 2 kernels 3x3, 2x2 pooling, 4 hidden units, 3 classes.
    pub fn reduced() -> Self {
        ArchitectureSpec {
            input_size: 8,
            conv1_kernels: 2,
            kernel1_size: 3,
            pool1_window: 2,
            conv2_kernels: 0,
            kernel2_size: 0,
            pool2_window: 0,
            hidden_units: 4,
            num_classes: 3,
        }
    }

    pub fn has_second_stage(&self) -> bool {
        self.conv2_kernels > 0
    }

    /// Checks the dimension chain and returns every intermediate size.
    /// Errors name the first layer whose dimensions fail.
    pub fn dims(&self) -> Result<LayerDims> {
        if self.input_size == 0 {
            return Err(Error::config("input: size must be positive"));
        }
        if self.conv1_kernels == 0 {
            return Err(Error::config("C1: must have at least one kernel"));
        }
        if self.kernel1_size == 0 || self.kernel1_size > self.input_size {
            return Err(Error::config(format!(
                "C1: kernel size {} invalid for input {}",
                self.kernel1_size, self.input_size
            )));
        }
        let c1_side = self.input_size - self.kernel1_size + 1;
        if self.pool1_window == 0 || !c1_side.is_multiple_of(self.pool1_window) {
            return Err(Error::config(format!(
                "S1: window {} does not divide map side {}",
                self.pool1_window, c1_side
            )));
        }
        let s1_side = c1_side / self.pool1_window;

        let (c2, s2, hidden_inputs) = if self.has_second_stage() {
            if self.kernel2_size == 0 || self.kernel2_size > s1_side {
                return Err(Error::config(format!(
                    "C2: kernel size {} invalid for input {}",
                    self.kernel2_size, s1_side
                )));
            }
            let c2_side = s1_side - self.kernel2_size + 1;
            if self.pool2_window == 0 || !c2_side.is_multiple_of(self.pool2_window) {
                return Err(Error::config(format!(
                    "S2: window {} does not divide map side {}",
                    self.pool2_window, c2_side
                )));
            }
            let s2_side = c2_side / self.pool2_window;
            (
                Some((self.conv2_kernels, c2_side)),
                Some((self.conv2_kernels, s2_side)),
                self.conv2_kernels * s2_side * s2_side,
            )
        } else {
            (None, None, self.conv1_kernels * s1_side * s1_side)
        };

        if self.hidden_units == 0 {
            return Err(Error::config("H: must have at least one unit"));
        }
        if self.num_classes == 0 {
            return Err(Error::config("F: must have at least one class"));
        }

        Ok(LayerDims {
            input: self.input_size,
            c1: (self.conv1_kernels, c1_side),
            s1: (self.conv1_kernels, s1_side),
            c2,
            s2,
            hidden_inputs,
            hidden_units: self.hidden_units,
            num_classes: self.num_classes,
        })
    }
}

/// All trainable weights and biases of one network, plus the architecture
/// spec and seed they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub spec: ArchitectureSpec,
    pub seed: u64,
    pub c1: ConvLayerParams,
    pub s1: SubsampleLayerParams,
    pub c2: ConvLayerParams,
    pub s2: SubsampleLayerParams,
    pub h: FullLayerParams,
    pub f: FullLayerParams,
}

/// Builds a network with weights drawn i.i.d. uniform on
/// [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer and all biases zero.
/// Deterministic for a given seed.
pub fn build(spec: &ArchitectureSpec, seed: u64) -> Result<NetworkParams> {
    let dims = spec.dims()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut draw = |values: &mut [f64], fan_in: usize| {
        let limit = 1.0 / (fan_in as f64).sqrt();
        for v in values {
            *v = rng.gen_range(-limit..=limit);
        }
    };

    let mut c1 = ConvLayerParams::zeros(1, spec.conv1_kernels, spec.kernel1_size, spec.kernel1_size);
    draw(&mut c1.kernels, spec.kernel1_size * spec.kernel1_size);

    let mut s1 = SubsampleLayerParams::zeros(spec.conv1_kernels, spec.pool1_window, spec.pool1_window);
    draw(
        &mut s1.coefficients,
        spec.pool1_window * spec.pool1_window,
    );

    let (mut c2, mut s2) = if spec.has_second_stage() {
        (
            ConvLayerParams::zeros(
                spec.conv1_kernels,
                spec.conv2_kernels,
                spec.kernel2_size,
                spec.kernel2_size,
            ),
            SubsampleLayerParams::zeros(spec.conv2_kernels, spec.pool2_window, spec.pool2_window),
        )
    } else {
        // Zero-map placeholders keep the checkpoint layout fixed.
        (
            ConvLayerParams::zeros(spec.conv1_kernels, 0, 0, 0),
            SubsampleLayerParams::zeros(0, 0, 0),
        )
    };
    if spec.has_second_stage() {
        draw(
            &mut c2.kernels,
            spec.conv1_kernels * spec.kernel2_size * spec.kernel2_size,
        );
        draw(
            &mut s2.coefficients,
            spec.pool2_window * spec.pool2_window,
        );
    }

    let mut h = FullLayerParams::zeros(dims.hidden_inputs, spec.hidden_units);
    draw(&mut h.weights, dims.hidden_inputs);

    let mut f = FullLayerParams::zeros(spec.hidden_units, spec.num_classes);
    draw(&mut f.weights, spec.hidden_units);

    Ok(NetworkParams {
        spec: *spec,
        seed,
        c1,
        s1,
        c2,
        s2,
        h,
        f,
    })
}

/// Trainable parameter count per layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterCounts {
    pub c1: usize,
    pub s1: usize,
    pub c2: usize,
    pub s2: usize,
    pub hidden: usize,
    pub output: usize,
    pub total: usize,
}

pub fn count_parameters(params: &NetworkParams) -> ParameterCounts {
    let c1 = params.c1.kernels.len() + params.c1.biases.len();
    let s1 = params.s1.coefficients.len() + params.s1.biases.len();
    let c2 = params.c2.kernels.len() + params.c2.biases.len();
    let s2 = params.s2.coefficients.len() + params.s2.biases.len();
    let hidden = params.h.weights.len() + params.h.biases.len();
    let output = params.f.weights.len() + params.f.biases.len();
    ParameterCounts {
        c1,
        s1,
        c2,
        s2,
        hidden,
        output,
        total: c1 + s1 + c2 + s2 + hidden + output,
    }
}

impl NetworkParams {
    /// Runs the whole forward chain and returns the stored activations
    /// (needed by backpropagation) together with the output vector.
    pub fn forward_full(&self, image: &FeatureMap) -> Result<(ForwardTrace, Vec<f64>)> {
        if image.height() != self.spec.input_size || image.width() != self.spec.input_size {
            return Err(Error::config(format!(
                "input image {}x{} does not match network input {}",
                image.height(),
                image.width(),
                self.spec.input_size
            )));
        }
        let c1_out = self.c1.forward(std::slice::from_ref(image))?;
        let s1_fwd = self.s1.forward(&c1_out)?;

        let (c2_out, s2_sums, s2_out, hidden_in) = if self.spec.has_second_stage() {
            let c2_out = self.c2.forward(&s1_fwd.outputs)?;
            let s2_fwd = self.s2.forward(&c2_out)?;
            let hidden_in = flatten_maps(&s2_fwd.outputs);
            (c2_out, s2_fwd.window_sums, s2_fwd.outputs, hidden_in)
        } else {
            let hidden_in = flatten_maps(&s1_fwd.outputs);
            (Vec::new(), Vec::new(), Vec::new(), hidden_in)
        };

        let hidden_out = self.h.forward(&hidden_in)?;
        let output = self.f.forward(&hidden_out)?;

        let trace = ForwardTrace {
            input: image.clone(),
            c1_out,
            s1_sums: s1_fwd.window_sums,
            s1_out: s1_fwd.outputs,
            c2_out,
            s2_sums,
            s2_out,
            hidden_in,
            hidden_out,
            output: output.clone(),
        };
        Ok((trace, output))
    }

    /// One batch gradient-descent step: every parameter moves by
    /// -learning_rate times its accumulated gradient.
    pub fn apply_update(&mut self, grads: &GradientSet, learning_rate: f64) -> Result<()> {
        let shapes_match = {
            let p = self.array_lengths();
            let g = grads.array_lengths();
            p == g
        };
        if !shapes_match {
            return Err(Error::config(
                "gradient set shape does not match network parameters".to_string(),
            ));
        }
        for (values, deltas) in self.arrays_mut().into_iter().zip(grads.arrays()) {
            for (v, d) in values.iter_mut().zip(deltas) {
                *v -= learning_rate * d;
            }
        }
        Ok(())
    }

    /// The twelve parameter arrays in canonical (checkpoint) order.
    pub(crate) fn arrays(&self) -> [&Vec<f64>; 12] {
        [
            &self.c1.kernels,
            &self.c1.biases,
            &self.s1.coefficients,
            &self.s1.biases,
            &self.c2.kernels,
            &self.c2.biases,
            &self.s2.coefficients,
            &self.s2.biases,
            &self.h.weights,
            &self.h.biases,
            &self.f.weights,
            &self.f.biases,
        ]
    }

    pub(crate) fn arrays_mut(&mut self) -> [&mut Vec<f64>; 12] {
        [
            &mut self.c1.kernels,
            &mut self.c1.biases,
            &mut self.s1.coefficients,
            &mut self.s1.biases,
            &mut self.c2.kernels,
            &mut self.c2.biases,
            &mut self.s2.coefficients,
            &mut self.s2.biases,
            &mut self.h.weights,
            &mut self.h.biases,
            &mut self.f.weights,
            &mut self.f.biases,
        ]
    }

    pub(crate) fn array_lengths(&self) -> [usize; 12] {
        let arrays = self.arrays();
        std::array::from_fn(|i| arrays[i].len())
    }

    pub fn num_params(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    /// Parameter at flat index `index` in canonical order. Used by the
    /// finite-difference gradient checks. Panics when out of range.
    pub fn param(&self, index: usize) -> f64 {
        let mut offset = index;
        for array in self.arrays() {
            if offset < array.len() {
                return array[offset];
            }
            offset -= array.len();
        }
        panic!("parameter index {index} out of range");
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let mut offset = index;
        for array in self.arrays_mut() {
            if offset < array.len() {
                array[offset] = value;
                return;
            }
            offset -= array.len();
        }
        panic!("parameter index {index} out of range");
    }

    /// Writes a versioned text checkpoint. Values render with the shortest
    /// decimal representation that parses back to the identical f64, so
    /// save/load round-trips are bit-exact.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        writeln!(text, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}").unwrap();
        let s = &self.spec;
        writeln!(
            text,
            "{} {} {} {} {} {} {} {} {}",
            s.input_size,
            s.conv1_kernels,
            s.kernel1_size,
            s.pool1_window,
            s.conv2_kernels,
            s.kernel2_size,
            s.pool2_window,
            s.hidden_units,
            s.num_classes
        )
        .unwrap();
        writeln!(text, "{}", self.seed).unwrap();
        for array in self.arrays() {
            let mut first = true;
            for v in array.iter() {
                if !first {
                    text.push(' ');
                }
                write!(text, "{v}").unwrap();
                first = false;
            }
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads a checkpoint written by [`save_checkpoint`]. The file fully
    /// describes its architecture, so no external context is needed.
    pub fn load_checkpoint(path: &Path) -> Result<NetworkParams> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, reason: &str| Error::CheckpointParse {
            path: path.to_path_buf(),
            line,
            reason: reason.to_string(),
        };

        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
        let mut header_parts = header.split_whitespace();
        if header_parts.next() != Some(CHECKPOINT_MAGIC) {
            return Err(parse_err(1, "missing magic string"));
        }
        let version = header_parts
            .next()
            .ok_or_else(|| parse_err(1, "missing format version"))?;
        if version.parse::<u32>().ok() != Some(CHECKPOINT_VERSION) {
            return Err(Error::CheckpointVersion {
                path: path.to_path_buf(),
                found: version.to_string(),
                expected: CHECKPOINT_VERSION,
            });
        }

        let spec_line = lines.next().ok_or_else(|| parse_err(2, "missing architecture line"))?;
        let ints: Vec<usize> = spec_line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(2, "architecture fields must be integers"))?;
        if ints.len() != 9 {
            return Err(parse_err(2, "architecture line must hold 9 integers"));
        }
        let spec = ArchitectureSpec {
            input_size: ints[0],
            conv1_kernels: ints[1],
            kernel1_size: ints[2],
            pool1_window: ints[3],
            conv2_kernels: ints[4],
            kernel2_size: ints[5],
            pool2_window: ints[6],
            hidden_units: ints[7],
            num_classes: ints[8],
        };
        if let Err(e) = spec.dims() {
            return Err(Error::CheckpointShape {
                path: path.to_path_buf(),
                reason: e.to_string(),
            });
        }

        let seed_line = lines.next().ok_or_else(|| parse_err(3, "missing seed line"))?;
        let seed: u64 = seed_line
            .trim()
            .parse()
            .map_err(|_| parse_err(3, "seed must be an unsigned integer"))?;

        // A zero-filled network of the right spec provides the expected
        // array shapes; the payload must match them exactly.
        let mut params = build_zeroed(&spec, seed)?;
        let expected_lengths = params.array_lengths();
        let shape_err = |reason: String| Error::CheckpointShape {
            path: path.to_path_buf(),
            reason,
        };
        let mut flat_index = 0usize;
        for (array_idx, expected_len) in expected_lengths.into_iter().enumerate() {
            let line_no = 4 + array_idx;
            let line = lines
                .next()
                .ok_or_else(|| shape_err(format!("missing parameter line {line_no}")))?;
            let mut values = Vec::with_capacity(expected_len);
            for token in line.split_whitespace() {
                let value: f64 = token
                    .parse()
                    .map_err(|_| parse_err(line_no, "parameter values must be decimal reals"))?;
                if !value.is_finite() {
                    return Err(Error::CheckpointNonFinite {
                        path: path.to_path_buf(),
                        index: flat_index + values.len(),
                    });
                }
                values.push(value);
            }
            if values.len() != expected_len {
                return Err(shape_err(format!(
                    "parameter line {line_no}: expected {expected_len} values, got {}",
                    values.len()
                )));
            }
            flat_index += expected_len;
            *params.arrays_mut()[array_idx] = values;
        }
        if lines.next().is_some() {
            return Err(Error::CheckpointShape {
                path: path.to_path_buf(),
                reason: "trailing data after parameter lines".to_string(),
            });
        }
        Ok(params)
    }
}

/// Same shapes as [`build`] but all values zero; checkpoint loading fills it.
fn build_zeroed(spec: &ArchitectureSpec, seed: u64) -> Result<NetworkParams> {
    let mut params = build(spec, seed)?;
    for array in params.arrays_mut() {
        array.fill(0.0);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_parameter_counts_match_architecture() {
        let params = build(&ArchitectureSpec::default(), 1).unwrap();
        let counts = count_parameters(&params);
        assert_eq!(counts.c1, 156);
        assert_eq!(counts.s1, 12);
        assert_eq!(counts.c2, 2416);
        assert_eq!(counts.s2, 32);
        assert_eq!(counts.hidden, 68170);
        assert_eq!(counts.output, 2907);
        assert_eq!(counts.total, 73693);
    }

    #[test]
    fn default_spec_c2_has_96_kernel_grids() {
        let params = build(&ArchitectureSpec::default(), 1).unwrap();
        assert_eq!(params.c2.input_maps, 6);
        assert_eq!(params.c2.output_maps, 16);
        assert_eq!(params.c2.kernels.len(), 96 * 25);
        assert_eq!(params.c2.biases.len(), 16);
    }

    #[test]
    fn build_is_deterministic_per_seed() {
        let spec = ArchitectureSpec::default();
        let a = build(&spec, 42).unwrap();
        let b = build(&spec, 42).unwrap();
        assert_eq!(a, b);
        let c = build(&spec, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn counts_are_independent_of_seed() {
        let spec = ArchitectureSpec::reduced();
        let a = count_parameters(&build(&spec, 0).unwrap());
        let b = count_parameters(&build(&spec, 999).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn reduced_spec_counts_match_enumeration() {
        let params = build(&ArchitectureSpec::reduced(), 5).unwrap();
        let counts = count_parameters(&params);
        // Enumerate the allocated arrays directly.
        let enumerated: usize = params.arrays().iter().map(|a| a.len()).sum();
        assert_eq!(counts.total, enumerated);
        assert_eq!(counts.c1, 2 * (3 * 3 + 1));
        assert_eq!(counts.s1, 4);
        assert_eq!(counts.c2, 0);
        assert_eq!(counts.s2, 0);
        assert_eq!(counts.hidden, 4 * (2 * 3 * 3 + 1));
        assert_eq!(counts.output, 3 * (4 + 1));
    }

    #[test]
    fn forward_full_dimension_chain() {
        let params = build(&ArchitectureSpec::default(), 7).unwrap();
        let image = FeatureMap::zeros(32, 32);
        let (trace, output) = params.forward_full(&image).unwrap();
        assert_eq!(trace.c1_out.len(), 6);
        assert_eq!((trace.c1_out[0].height(), trace.c1_out[0].width()), (28, 28));
        assert_eq!(trace.s1_out.len(), 6);
        assert_eq!((trace.s1_out[0].height(), trace.s1_out[0].width()), (14, 14));
        assert_eq!(trace.c2_out.len(), 16);
        assert_eq!((trace.c2_out[0].height(), trace.c2_out[0].width()), (10, 10));
        assert_eq!(trace.s2_out.len(), 16);
        assert_eq!((trace.s2_out[0].height(), trace.s2_out[0].width()), (5, 5));
        assert_eq!(trace.hidden_out.len(), 170);
        assert_eq!(output.len(), 17);
    }

    #[test]
    fn zero_params_give_zero_outputs() {
        let mut params = build(&ArchitectureSpec::default(), 7).unwrap();
        for array in params.arrays_mut() {
            array.fill(0.0);
        }
        let image = FeatureMap::filled(32, 32, 0.5);
        let (_, output) = params.forward_full(&image).unwrap();
        assert!(output.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn outputs_stay_strictly_inside_unit_interval() {
        let params = build(&ArchitectureSpec::default(), 21).unwrap();
        let image = FeatureMap::filled(32, 32, 0.9);
        let (_, output) = params.forward_full(&image).unwrap();
        assert!(output.iter().all(|&v| v > -1.0 && v < 1.0));
    }

    #[test]
    fn forward_rejects_wrong_image_size() {
        let params = build(&ArchitectureSpec::default(), 7).unwrap();
        assert!(params.forward_full(&FeatureMap::zeros(31, 32)).is_err());
    }

    #[test]
    fn dims_reports_failing_layer() {
        let spec = ArchitectureSpec {
            pool1_window: 3, // 28 % 3 != 0
            ..ArchitectureSpec::default()
        };
        let err = spec.dims().unwrap_err().to_string();
        assert!(err.contains("S1"), "{err}");
    }

    #[test]
    fn dimension_chain_matches_spec_algebra_for_random_valid_specs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        while checked < 25 {
            let spec = ArchitectureSpec {
                input_size: rng.gen_range(6..24),
                conv1_kernels: rng.gen_range(1..4),
                kernel1_size: rng.gen_range(1..6),
                pool1_window: rng.gen_range(1..4),
                conv2_kernels: rng.gen_range(0..3),
                kernel2_size: rng.gen_range(1..4),
                pool2_window: rng.gen_range(1..3),
                hidden_units: rng.gen_range(1..8),
                num_classes: rng.gen_range(1..6),
            };
            let dims = match spec.dims() {
                Ok(d) => d,
                Err(_) => continue,
            };
            checked += 1;
            let params = build(&spec, 3).unwrap();
            let image = FeatureMap::zeros(spec.input_size, spec.input_size);
            let (trace, output) = params.forward_full(&image).unwrap();
            assert_eq!(trace.c1_out.len(), dims.c1.0);
            assert_eq!(trace.c1_out[0].height(), dims.c1.1);
            assert_eq!(trace.s1_out[0].height(), dims.s1.1);
            if let Some((maps, side)) = dims.s2 {
                assert_eq!(trace.s2_out.len(), maps);
                assert_eq!(trace.s2_out[0].height(), side);
            } else {
                assert!(trace.s2_out.is_empty());
            }
            assert_eq!(trace.hidden_in.len(), dims.hidden_inputs);
            assert_eq!(output.len(), dims.num_classes);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.cnnckpt");
        let params = build(&ArchitectureSpec::reduced(), 77).unwrap();
        params.save_checkpoint(&path).unwrap();
        let loaded = NetworkParams::load_checkpoint(&path).unwrap();
        assert_eq!(loaded, params);
    }

    #[test]
    fn default_checkpoint_holds_exactly_73693_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.cnnckpt");
        build(&ArchitectureSpec::default(), 1)
            .unwrap()
            .save_checkpoint(&path)
            .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let value_count: usize = text
            .lines()
            .skip(3)
            .map(|line| line.split_whitespace().count())
            .sum();
        assert_eq!(value_count, 73693);
        assert_eq!(text.lines().count(), 3 + 12);
    }

    #[test]
    fn load_rejects_missing_file() {
        assert!(matches!(
            NetworkParams::load_checkpoint(Path::new("/nonexistent.cnnckpt")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn load_rejects_wrong_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v9.cnnckpt");
        std::fs::write(&path, "cnnckpt 9\n8 2 3 2 0 0 0 4 3\n0\n").unwrap();
        assert!(matches!(
            NetworkParams::load_checkpoint(&path),
            Err(Error::CheckpointVersion { .. })
        ));
    }

    #[test]
    fn load_rejects_corrupted_length_without_partial_params() {
        // Growing the hidden width in the header makes the stored payload
        // too short for the declared shape.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.cnnckpt");
        let params = build(&ArchitectureSpec::reduced(), 3).unwrap();
        params.save_checkpoint(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let corrupted = text.replacen("8 2 3 2 0 0 0 4 3", "8 2 3 2 0 0 0 5 3", 1);
        assert_ne!(text, corrupted);
        std::fs::write(&path, corrupted).unwrap();
        assert!(matches!(
            NetworkParams::load_checkpoint(&path),
            Err(Error::CheckpointShape { .. })
        ));
    }

    #[test]
    fn load_rejects_non_finite_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.cnnckpt");
        let params = build(&ArchitectureSpec::reduced(), 3).unwrap();
        params.save_checkpoint(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let first_value = text.lines().nth(3).unwrap().split_whitespace().next().unwrap();
        let corrupted = text.replacen(first_value, "NaN", 1);
        std::fs::write(&path, corrupted).unwrap();
        assert!(matches!(
            NetworkParams::load_checkpoint(&path),
            Err(Error::CheckpointNonFinite { index: 0, .. })
        ));
    }

    #[test]
    fn load_preserves_seed_and_spec() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.cnnckpt");
        let params = build(&ArchitectureSpec::reduced(), 123).unwrap();
        params.save_checkpoint(&path).unwrap();
        let loaded = NetworkParams::load_checkpoint(&path).unwrap();
        assert_eq!(loaded.seed, 123);
        assert_eq!(loaded.spec, ArchitectureSpec::reduced());
    }

    #[test]
    fn param_accessors_cover_every_array() {
        let mut params = build(&ArchitectureSpec::reduced(), 2).unwrap();
        let n = params.num_params();
        assert_eq!(n, count_parameters(&params).total);
        let last = n - 1;
        params.set_param(last, 0.123);
        assert_eq!(params.param(last), 0.123);
        assert_eq!(*params.f.biases.last().unwrap(), 0.123);
    }
}
