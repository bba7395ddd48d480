//! Dense 2-D grids of 64-bit reals and the tanh primitives every layer
//! builds on.

/// A 2-D grid of activations, stored row-major.
///
/// One `FeatureMap` holds the output of a single feature pattern at a single
/// layer. Values are immutable within any layer operation, so maps can be
/// read concurrently.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    /// Zero-filled map.
    pub fn zeros(height: usize, width: usize) -> Self {
        FeatureMap {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    /// Map with every cell set to `value`.
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        FeatureMap {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    /// Wraps row-major values. Panics if the length is not `height * width`.
    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            height * width,
            "value count {} does not match {}x{} map",
            values.len(),
            height,
            width
        );
        FeatureMap {
            height,
            width,
            values,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Value at (row, col). An out-of-bounds index is a caller bug and panics.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(
            row < self.height && col < self.width,
            "index ({row}, {col}) out of bounds for {}x{} map",
            self.height,
            self.width
        );
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(
            row < self.height && col < self.width,
            "index ({row}, {col}) out of bounds for {}x{} map",
            self.height,
            self.width
        );
        self.values[row * self.width + col] = value;
    }

    /// Row-major backing slice.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// One row as a slice.
    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        let start = row * self.width;
        &self.values[start..start + self.width]
    }
}

/// Hyperbolic tangent, the activation of every layer in the network.
#[inline]
pub fn tanh_activation(x: f64) -> f64 {
    x.tanh()
}

/// Derivative of tanh at the pre-activation point, computed from the stored
/// post-activation value y = tanh(x): dy/dx = 1 - y^2.
#[inline]
pub fn tanh_derivative_from_output(y: f64) -> f64 {
    1.0 - y * y
}
