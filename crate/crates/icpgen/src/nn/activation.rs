//! Scaled exponential linear units and their bipolar arrangement.

/// Scale constant of the SELU nonlinearity.
pub const SELU_LAMBDA: f64 = 1.0507009873554805;
/// Negative-branch constant of the SELU nonlinearity.
pub const SELU_ALPHA: f64 = 1.6732632423543772;

/// `lambda * x` for positive `x`, `lambda * alpha * (e^x - 1)` otherwise.
#[inline]
pub fn selu(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA * x
    } else {
        SELU_LAMBDA * SELU_ALPHA * (x.exp() - 1.0)
    }
}

#[inline]
pub fn selu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp()
    }
}

/// The bipolar unit at position `index`: even positions apply `selu(x)`,
/// odd positions apply `-selu(-x)`.
#[inline]
pub fn bipolar_selu_unit(x: f64, index: usize) -> f64 {
    if index % 2 == 0 {
        selu(x)
    } else {
        -selu(-x)
    }
}

#[inline]
pub fn bipolar_selu_unit_derivative(x: f64, index: usize) -> f64 {
    if index % 2 == 0 {
        selu_derivative(x)
    } else {
        selu_derivative(-x)
    }
}

/// Applies the bipolar SELU elementwise, parity taken from the element index.
pub fn bipolar_selu(x: &[f64]) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| bipolar_selu_unit(v, i))
        .collect()
}

/// Clamps every component of a loss gradient into `[-bound, bound]`.
pub fn clip_output_gradient(g: &[f64], bound: f64) -> Vec<f64> {
    g.iter().map(|&v| v.clamp(-bound, bound)).collect()
}
