//! Forward passes for the four layer kinds: valid convolution, window-sum
//! subsampling with one trainable coefficient per map, and the two fully
//! connected layers. Every layer applies tanh.
//!
//! All forwards are pure functions of (inputs, params) and can run
//! concurrently on shared read-only params.

use crate::error::{Error, Result};
use crate::tensor::{tanh_activation, FeatureMap};

/// Kernels and per-map biases of a convolution layer.
///
/// Kernel grids are stored output-pattern-major: the grid for output pattern
/// `k` and input pattern `t` starts at `(k * input_maps + t) * kernel_h *
/// kernel_w`. Checkpoints and the flat parameter index rely on this order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    pub input_maps: usize,
    pub output_maps: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub kernels: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ConvLayerParams {
    pub fn zeros(input_maps: usize, output_maps: usize, kernel_h: usize, kernel_w: usize) -> Self {
        ConvLayerParams {
            input_maps,
            output_maps,
            kernel_h,
            kernel_w,
            kernels: vec![0.0; output_maps * input_maps * kernel_h * kernel_w],
            biases: vec![0.0; output_maps],
        }
    }

    /// The kernel grid connecting input pattern `t` to output pattern `k`.
    #[inline]
    pub fn kernel(&self, k: usize, t: usize) -> &[f64] {
        let size = self.kernel_h * self.kernel_w;
        let start = (k * self.input_maps + t) * size;
        &self.kernels[start..start + size]
    }

    fn check_inputs(&self, inputs: &[FeatureMap]) -> Result<(usize, usize)> {
        if inputs.len() != self.input_maps {
            return Err(Error::config(format!(
                "convolution layer expects {} input maps, got {}",
                self.input_maps,
                inputs.len()
            )));
        }
        let (h, w) = (inputs[0].height(), inputs[0].width());
        if inputs.iter().any(|m| m.height() != h || m.width() != w) {
            return Err(Error::config(
                "convolution input maps have mismatched dimensions".to_string(),
            ));
        }
        if self.kernel_h > h || self.kernel_w > w {
            return Err(Error::config(format!(
                "kernel {}x{} larger than input {}x{}",
                self.kernel_h, self.kernel_w, h, w
            )));
        }
        Ok((h, w))
    }

    /// Valid convolution (stride 1, no padding) over all input maps, then tanh.
    ///
    /// Output cell (x, y) of pattern k is
    /// tanh(sum over t, r, c of kernel[k][t](r, c) * input_t(x + r, y + c) + bias_k),
    /// so each spatial dimension shrinks by (kernel - 1). Every output map
    /// reads every input map (full connectivity).
    pub fn forward(&self, inputs: &[FeatureMap]) -> Result<Vec<FeatureMap>> {
        let (h, w) = self.check_inputs(inputs)?;
        let out_h = h - self.kernel_h + 1;
        let out_w = w - self.kernel_w + 1;
        let mut outputs = Vec::with_capacity(self.output_maps);
        for k in 0..self.output_maps {
            let mut out = FeatureMap::zeros(out_h, out_w);
            for x in 0..out_h {
                for y in 0..out_w {
                    let mut sum = self.biases[k];
                    for (t, input) in inputs.iter().enumerate() {
                        let kernel = self.kernel(k, t);
                        for r in 0..self.kernel_h {
                            let in_row = input.row(x + r);
                            let k_row = &kernel[r * self.kernel_w..(r + 1) * self.kernel_w];
                            for (c, &kv) in k_row.iter().enumerate() {
                                sum += kv * in_row[y + c];
                            }
                        }
                    }
                    out.set(x, y, tanh_activation(sum));
                }
            }
            outputs.push(out);
        }
        Ok(outputs)
    }
}

/// One trainable coefficient and one bias per feature pattern, plus the
/// pooling window size.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleLayerParams {
    pub coefficients: Vec<f64>,
    pub biases: Vec<f64>,
    pub window_h: usize,
    pub window_w: usize,
}

/// Output of a subsampling forward pass. The raw window sums feed the
/// coefficient gradient during backpropagation.
#[derive(Debug, Clone)]
pub struct SubsampleForward {
    pub window_sums: Vec<FeatureMap>,
    pub outputs: Vec<FeatureMap>,
}

impl SubsampleLayerParams {
    pub fn zeros(maps: usize, window_h: usize, window_w: usize) -> Self {
        SubsampleLayerParams {
            coefficients: vec![0.0; maps],
            biases: vec![0.0; maps],
            window_h,
            window_w,
        }
    }

    pub fn maps(&self) -> usize {
        self.coefficients.len()
    }

    /// Non-overlapping window sums scaled by the per-map coefficient, then
    /// tanh. The stride equals the window size; input dimensions must divide
    /// evenly. Pattern k maps only to pattern k.
    pub fn forward(&self, inputs: &[FeatureMap]) -> Result<SubsampleForward> {
        if inputs.len() != self.maps() {
            return Err(Error::config(format!(
                "subsampling layer expects {} input maps, got {}",
                self.maps(),
                inputs.len()
            )));
        }
        let mut window_sums = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        for (k, input) in inputs.iter().enumerate() {
            let (h, w) = (input.height(), input.width());
            if h % self.window_h != 0 || w % self.window_w != 0 {
                return Err(Error::config(format!(
                    "input {}x{} not divisible by {}x{} subsampling window",
                    h, w, self.window_h, self.window_w
                )));
            }
            let out_h = h / self.window_h;
            let out_w = w / self.window_w;
            let mut sums = FeatureMap::zeros(out_h, out_w);
            let mut out = FeatureMap::zeros(out_h, out_w);
            for x in 0..out_h {
                for y in 0..out_w {
                    let mut sum = 0.0;
                    for r in 0..self.window_h {
                        let in_row = input.row(x * self.window_h + r);
                        for c in 0..self.window_w {
                            sum += in_row[y * self.window_w + c];
                        }
                    }
                    sums.set(x, y, sum);
                    out.set(
                        x,
                        y,
                        tanh_activation(self.coefficients[k] * sum + self.biases[k]),
                    );
                }
            }
            window_sums.push(sums);
            outputs.push(out);
        }
        Ok(SubsampleForward {
            window_sums,
            outputs,
        })
    }
}

/// Dense layer weights, row-major per output neuron: weight (j, i) lives at
/// `weights[j * num_inputs + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullLayerParams {
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl FullLayerParams {
    pub fn zeros(num_inputs: usize, num_outputs: usize) -> Self {
        FullLayerParams {
            num_inputs,
            num_outputs,
            weights: vec![0.0; num_inputs * num_outputs],
            biases: vec![0.0; num_outputs],
        }
    }

    /// output_j = tanh(sum_i weight(j, i) * input_i + bias_j).
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.num_inputs {
            return Err(Error::config(format!(
                "full layer expects {} inputs, got {}",
                self.num_inputs,
                input.len()
            )));
        }
        let mut output = Vec::with_capacity(self.num_outputs);
        for j in 0..self.num_outputs {
            let row = &self.weights[j * self.num_inputs..(j + 1) * self.num_inputs];
            let mut sum = self.biases[j];
            for (wv, xv) in row.iter().zip(input) {
                sum += wv * xv;
            }
            output.push(tanh_activation(sum));
        }
        Ok(output)
    }
}

/// Flattens maps in (pattern, row, col) order: pattern-major, row-major inside
/// each map. Backprop and the checkpoint format rely on this exact order.
pub fn flatten_maps(maps: &[FeatureMap]) -> Vec<f64> {
    let mut flat = Vec::with_capacity(maps.iter().map(|m| m.values().len()).sum());
    for map in maps {
        flat.extend_from_slice(map.values());
    }
    flat
}
