//! Backward pass: exact gradients of the squared-error loss
//! E = 1/2 * sum((y - t)^2) with respect to every trainable parameter.
//!
//! Deltas propagate output -> hidden -> subsampling -> convolution, mirroring
//! the forward chain. The normative correctness contract is agreement with
//! central finite differences of the forward pass, which the test suite
//! checks parameter by parameter.

use crate::error::{Error, Result};
use crate::layers::{ConvLayerParams, FullLayerParams, SubsampleLayerParams};
use crate::network::NetworkParams;
use crate::tensor::{tanh_derivative_from_output, FeatureMap};

/// Every post-activation value of one forward pass, plus the raw window sums
/// of the subsampling layers. Backward consumes these instead of re-running
/// the forward chain.
///
/// `c2_out`, `s2_sums` and `s2_out` are empty when the network has no second
/// convolution/subsampling stage.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: FeatureMap,
    pub c1_out: Vec<FeatureMap>,
    pub s1_sums: Vec<FeatureMap>,
    pub s1_out: Vec<FeatureMap>,
    pub c2_out: Vec<FeatureMap>,
    pub s2_sums: Vec<FeatureMap>,
    pub s2_out: Vec<FeatureMap>,
    /// Final pooled maps flattened in (pattern, row, col) order.
    pub hidden_in: Vec<f64>,
    pub hidden_out: Vec<f64>,
    pub output: Vec<f64>,
}

/// Accumulated parameter gradients, shape-congruent with the NetworkParams
/// they were produced from. Array layout matches the corresponding parameter
/// arrays exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub c1_kernels: Vec<f64>,
    pub c1_biases: Vec<f64>,
    pub s1_coefficients: Vec<f64>,
    pub s1_biases: Vec<f64>,
    pub c2_kernels: Vec<f64>,
    pub c2_biases: Vec<f64>,
    pub s2_coefficients: Vec<f64>,
    pub s2_biases: Vec<f64>,
    pub h_weights: Vec<f64>,
    pub h_biases: Vec<f64>,
    pub f_weights: Vec<f64>,
    pub f_biases: Vec<f64>,
}

impl GradientSet {
    /// Zero gradients with the same shape as `params`.
    pub fn zeros_like(params: &NetworkParams) -> Self {
        let [c1k, c1b, s1c, s1b, c2k, c2b, s2c, s2b, hw, hb, fw, fb] = params.array_lengths();
        GradientSet {
            c1_kernels: vec![0.0; c1k],
            c1_biases: vec![0.0; c1b],
            s1_coefficients: vec![0.0; s1c],
            s1_biases: vec![0.0; s1b],
            c2_kernels: vec![0.0; c2k],
            c2_biases: vec![0.0; c2b],
            s2_coefficients: vec![0.0; s2c],
            s2_biases: vec![0.0; s2b],
            h_weights: vec![0.0; hw],
            h_biases: vec![0.0; hb],
            f_weights: vec![0.0; fw],
            f_biases: vec![0.0; fb],
        }
    }

    /// The twelve gradient arrays in canonical (checkpoint) order.
    pub(crate) fn arrays(&self) -> [&Vec<f64>; 12] {
        [
            &self.c1_kernels,
            &self.c1_biases,
            &self.s1_coefficients,
            &self.s1_biases,
            &self.c2_kernels,
            &self.c2_biases,
            &self.s2_coefficients,
            &self.s2_biases,
            &self.h_weights,
            &self.h_biases,
            &self.f_weights,
            &self.f_biases,
        ]
    }

    fn arrays_mut(&mut self) -> [&mut Vec<f64>; 12] {
        [
            &mut self.c1_kernels,
            &mut self.c1_biases,
            &mut self.s1_coefficients,
            &mut self.s1_biases,
            &mut self.c2_kernels,
            &mut self.c2_biases,
            &mut self.s2_coefficients,
            &mut self.s2_biases,
            &mut self.h_weights,
            &mut self.h_biases,
            &mut self.f_weights,
            &mut self.f_biases,
        ]
    }

    pub(crate) fn array_lengths(&self) -> [usize; 12] {
        let arrays = self.arrays();
        std::array::from_fn(|i| arrays[i].len())
    }

    pub fn num_entries(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    /// Gradient entry at flat index `index`, same canonical order as
    /// `NetworkParams::param`. Panics when out of range.
    pub fn entry(&self, index: usize) -> f64 {
        let mut offset = index;
        for array in self.arrays() {
            if offset < array.len() {
                return array[offset];
            }
            offset -= array.len();
        }
        panic!("gradient index {index} out of range");
    }

    /// Elementwise sum of `delta` into `self`. Callers fix the accumulation
    /// order; gradients over a batch are always folded in dataset order.
    pub fn accumulate(&mut self, delta: &GradientSet) -> Result<()> {
        if self.array_lengths() != delta.array_lengths() {
            return Err(Error::config(
                "cannot accumulate gradient sets of different shapes".to_string(),
            ));
        }
        for (acc, d) in self.arrays_mut().into_iter().zip(delta.arrays()) {
            for (a, v) in acc.iter_mut().zip(d) {
                *a += v;
            }
        }
        Ok(())
    }

    fn zero(&mut self) {
        for array in self.arrays_mut() {
            array.fill(0.0);
        }
    }
}

/// Gradient of E = 1/2 * sum((y - t)^2) with respect to the output layer's
/// pre-activations: (y_k - t_k) * (1 - y_k^2).
pub fn output_deltas(predicted: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    if predicted.len() != target.len() {
        return Err(Error::config(format!(
            "predicted length {} does not match target length {}",
            predicted.len(),
            target.len()
        )));
    }
    Ok(predicted
        .iter()
        .zip(target)
        .map(|(&y, &t)| (y - t) * tanh_derivative_from_output(y))
        .collect())
}

/// Dense-layer backward step. `d_output` holds dE/d(post-activation output);
/// weight and bias gradients go into the provided (zeroed) slices, and
/// dE/d(layer input) comes back as a vector.
fn full_backward(
    params: &FullLayerParams,
    input: &[f64],
    output: &[f64],
    d_output: &[f64],
    d_weights: &mut [f64],
    d_biases: &mut [f64],
) -> Vec<f64> {
    let n_in = params.num_inputs;
    let mut d_input = vec![0.0; n_in];
    for j in 0..params.num_outputs {
        // Through the activation: d(I_j) = phi'(v_j) * d(O_j).
        let d_in = d_output[j] * tanh_derivative_from_output(output[j]);
        d_biases[j] = d_in;
        let row = &params.weights[j * n_in..(j + 1) * n_in];
        let grad_row = &mut d_weights[j * n_in..(j + 1) * n_in];
        for i in 0..n_in {
            grad_row[i] = d_in * input[i];
            d_input[i] += d_in * row[i];
        }
    }
    d_input
}

/// Subsampling backward step. Coefficient and bias gradients go into the
/// provided (zeroed) slices; dE/d(previous layer's post-activation outputs)
/// comes back as maps.
///
/// Every cell of a pooling window contributes equally to the window sum, so
/// each delta spreads uniformly over its window, scaled by the coefficient.
fn subsample_backward(
    params: &SubsampleLayerParams,
    window_sums: &[FeatureMap],
    outputs: &[FeatureMap],
    d_outputs: &[FeatureMap],
    (prev_h, prev_w): (usize, usize),
    d_coefficients: &mut [f64],
    d_biases: &mut [f64],
) -> Vec<FeatureMap> {
    let maps = params.maps();
    let mut d_prev = Vec::with_capacity(maps);
    for k in 0..maps {
        let out = &outputs[k];
        let sums = &window_sums[k];
        let d_out = &d_outputs[k];
        let mut d_prev_map = FeatureMap::zeros(prev_h, prev_w);
        for x in 0..out.height() {
            for y in 0..out.width() {
                let d_in = d_out.get(x, y) * tanh_derivative_from_output(out.get(x, y));
                d_coefficients[k] += d_in * sums.get(x, y);
                d_biases[k] += d_in;
                let spread = d_in * params.coefficients[k];
                for r in 0..params.window_h {
                    for c in 0..params.window_w {
                        d_prev_map.set(
                            x * params.window_h + r,
                            y * params.window_w + c,
                            spread,
                        );
                    }
                }
            }
        }
        d_prev.push(d_prev_map);
    }
    d_prev
}

/// Convolution backward step. Kernel and bias gradients go into the
/// provided (zeroed) slices; dE/d(input maps) comes back as maps. Kernel
/// gradients correlate the layer's deltas with the previous layer's
/// activations; input deltas are the transposed scatter of the same
/// products.
fn conv_backward(
    params: &ConvLayerParams,
    inputs: &[FeatureMap],
    outputs: &[FeatureMap],
    d_outputs: &[FeatureMap],
    d_kernels: &mut [f64],
    d_biases: &mut [f64],
) -> Vec<FeatureMap> {
    let kernel_size = params.kernel_h * params.kernel_w;
    let mut d_inputs: Vec<FeatureMap> = inputs
        .iter()
        .map(|m| FeatureMap::zeros(m.height(), m.width()))
        .collect();
    let out_h = outputs.first().map_or(0, |m| m.height());
    let out_w = outputs.first().map_or(0, |m| m.width());

    for k in 0..params.output_maps {
        let out = &outputs[k];
        let d_out = &d_outputs[k];
        for x in 0..out_h {
            for y in 0..out_w {
                let d_in = d_out.get(x, y) * tanh_derivative_from_output(out.get(x, y));
                if d_in == 0.0 {
                    // Zero deltas contribute nothing; skipping them keeps the
                    // all-correct case cheap without changing any sum.
                    continue;
                }
                d_biases[k] += d_in;
                for (t, input) in inputs.iter().enumerate() {
                    let kernel = params.kernel(k, t);
                    let grad_base = (k * params.input_maps + t) * kernel_size;
                    let d_input = d_inputs[t].values_mut();
                    let in_w = input.width();
                    for r in 0..params.kernel_h {
                        let in_row = input.row(x + r);
                        let d_row_base = (x + r) * in_w;
                        for c in 0..params.kernel_w {
                            let idx = r * params.kernel_w + c;
                            d_kernels[grad_base + idx] += d_in * in_row[y + c];
                            d_input[d_row_base + y + c] += d_in * kernel[idx];
                        }
                    }
                }
            }
        }
    }
    d_inputs
}

/// Splits a flat (pattern, row, col) delta vector back into per-map grids.
fn unflatten_deltas(flat: &[f64], maps: usize, h: usize, w: usize) -> Vec<FeatureMap> {
    let size = h * w;
    (0..maps)
        .map(|k| FeatureMap::from_values(h, w, flat[k * size..(k + 1) * size].to_vec()))
        .collect()
}

/// Full backward pass over one sample. `trace` must come from a forward pass
/// under the same `params`; the result mirrors the parameter shapes exactly.
pub fn backward(
    trace: &ForwardTrace,
    target: &[f64],
    params: &NetworkParams,
) -> Result<GradientSet> {
    let mut grads = GradientSet::zeros_like(params);
    backward_into(trace, target, params, &mut grads)?;
    Ok(grads)
}

/// [`backward`] variant that overwrites a caller-owned gradient set, so hot
/// loops can reuse one buffer instead of reallocating per image.
pub fn backward_into(
    trace: &ForwardTrace,
    target: &[f64],
    params: &NetworkParams,
    grads: &mut GradientSet,
) -> Result<()> {
    if trace.hidden_in.len() != params.h.num_inputs
        || trace.hidden_out.len() != params.h.num_outputs
        || trace.output.len() != params.f.num_outputs
        || trace.c1_out.len() != params.c1.output_maps
    {
        return Err(Error::config(
            "forward trace shape does not match network parameters".to_string(),
        ));
    }
    if trace.output.len() != target.len() {
        return Err(Error::config(format!(
            "target length {} does not match {} outputs",
            target.len(),
            trace.output.len()
        )));
    }
    if grads.array_lengths() != params.array_lengths() {
        return Err(Error::config(
            "gradient set shape does not match network parameters".to_string(),
        ));
    }
    grads.zero();

    // Output layer F; dE/d(output) of the squared-error loss is y - t.
    let d_f_out: Vec<f64> = trace
        .output
        .iter()
        .zip(target)
        .map(|(&y, &t)| y - t)
        .collect();
    let d_hidden_out = full_backward(
        &params.f,
        &trace.hidden_out,
        &trace.output,
        &d_f_out,
        &mut grads.f_weights,
        &mut grads.f_biases,
    );

    // Hidden layer H.
    let d_hidden_in = full_backward(
        &params.h,
        &trace.hidden_in,
        &trace.hidden_out,
        &d_hidden_out,
        &mut grads.h_weights,
        &mut grads.h_biases,
    );

    // Back into the final pooled maps.
    let d_s1_out = if params.spec.has_second_stage() {
        let s2_side = trace.s2_out[0].height();
        let d_s2_out = unflatten_deltas(&d_hidden_in, trace.s2_out.len(), s2_side, s2_side);
        let c2_side = trace.c2_out[0].height();
        let d_c2_out = subsample_backward(
            &params.s2,
            &trace.s2_sums,
            &trace.s2_out,
            &d_s2_out,
            (c2_side, c2_side),
            &mut grads.s2_coefficients,
            &mut grads.s2_biases,
        );
        conv_backward(
            &params.c2,
            &trace.s1_out,
            &trace.c2_out,
            &d_c2_out,
            &mut grads.c2_kernels,
            &mut grads.c2_biases,
        )
    } else {
        let s1_side = trace.s1_out[0].height();
        unflatten_deltas(&d_hidden_in, trace.s1_out.len(), s1_side, s1_side)
    };

    // First subsampling layer S1.
    let c1_side = trace.c1_out[0].height();
    let d_c1_out = subsample_backward(
        &params.s1,
        &trace.s1_sums,
        &trace.s1_out,
        &d_s1_out,
        (c1_side, c1_side),
        &mut grads.s1_coefficients,
        &mut grads.s1_biases,
    );

    // First convolution layer C1. The input-image deltas are discarded.
    let inputs = std::slice::from_ref(&trace.input);
    conv_backward(
        &params.c1,
        inputs,
        &trace.c1_out,
        &d_c1_out,
        &mut grads.c1_kernels,
        &mut grads.c1_biases,
    );

    Ok(())
}
