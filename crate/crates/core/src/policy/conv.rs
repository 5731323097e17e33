//! 1D valid convolution over the time axis with dilation, and the gated
//! activation `tanh(o1) * sigmoid(o2)`.
//!
//! Tensors are row-major time-by-channel slices: element `(t, c)` lives at
//! `t * channels + c`. Weights are laid out `[out_channel][tap][in_channel]`
//! so the innermost loop runs over contiguous input channels.

use crate::error::{Error, Result};

/// Output length of a valid dilated convolution.
pub fn conv_output_len(input_len: usize, kernel: usize, dilation: usize) -> Option<usize> {
    let span = dilation * (kernel - 1);
    (input_len > span).then(|| input_len - span)
}

/// Plain valid convolution; writes `l_out * c_out` values into `out`.
pub fn conv1d(
    input: &[f64],
    l_in: usize,
    c_in: usize,
    weights: &[f64],
    bias: &[f64],
    c_out: usize,
    kernel: usize,
    dilation: usize,
    out: &mut [f64],
) {
    debug_assert_eq!(input.len(), l_in * c_in);
    debug_assert_eq!(weights.len(), c_out * kernel * c_in);
    debug_assert_eq!(bias.len(), c_out);
    let l_out = conv_output_len(l_in, kernel, dilation).expect("input long enough");
    debug_assert_eq!(out.len(), l_out * c_out);

    for t in 0..l_out {
        for oc in 0..c_out {
            let mut acc = bias[oc];
            for tap in 0..kernel {
                let row = (t + tap * dilation) * c_in;
                let w_row = (oc * kernel + tap) * c_in;
                for ic in 0..c_in {
                    acc += weights[w_row + ic] * input[row + ic];
                }
            }
            out[t * c_out + oc] = acc;
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Convolution weights for one layer, borrowed from the flat parameter
/// vector. `gate` carries the second (mask) branch for gated layers.
pub struct ConvLayerWeights<'a> {
    pub main_w: &'a [f64],
    pub main_b: &'a [f64],
    pub gate: Option<(&'a [f64], &'a [f64])>,
}

/// Applies one (optionally gated) convolution layer.
///
/// Ungated layers return `tanh(conv(x))`; gated layers compute two
/// convolutions and return `tanh(o1) * sigmoid(o2)`. `scratch` holds the
/// gate branch activations.
#[allow(clippy::too_many_arguments)]
pub fn gated_conv_layer(
    input: &[f64],
    l_in: usize,
    c_in: usize,
    c_out: usize,
    kernel: usize,
    dilation: usize,
    weights: &ConvLayerWeights<'_>,
    out: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) -> Result<usize> {
    let Some(l_out) = conv_output_len(l_in, kernel, dilation) else {
        return Err(Error::Shape {
            expected: format!("time length > {}", dilation * (kernel - 1)),
            got: format!("{l_in}"),
        });
    };
    out.resize(l_out * c_out, 0.0);
    conv1d(
        input, l_in, c_in, weights.main_w, weights.main_b, c_out, kernel, dilation, out,
    );
    match weights.gate {
        Some((gate_w, gate_b)) => {
            scratch.resize(l_out * c_out, 0.0);
            conv1d(
                input, l_in, c_in, gate_w, gate_b, c_out, kernel, dilation, scratch,
            );
            for (o, g) in out.iter_mut().zip(scratch.iter()) {
                *o = o.tanh() * sigmoid(*g);
            }
        }
        None => {
            for o in out.iter_mut() {
                *o = o.tanh();
            }
        }
    }
    Ok(l_out)
}
