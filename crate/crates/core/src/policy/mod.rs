//! Controller function families over flat parameter vectors: the gated
//! dilated temporal CNN and the MLP baseline, plus observation normalization
//! and the optional low-pass action filter.

mod conv;
mod filter;
mod stats;

pub use conv::{conv1d, conv_output_len, gated_conv_layer, ConvLayerWeights};
pub use filter::{filter_signal, ActionFilter, ButterworthCoeffs};
pub use stats::{NormSnapshot, RunningStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Observation, ACTION_DIM, OBS_FEATURES, OBS_HISTORY};

/// Controller family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    GatedCnn,
    Mlp,
}

/// One temporal convolution layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnLayerSpec {
    pub channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub gated: bool,
}

/// Architecture descriptor. The defaults give the 976-parameter gated CNN
/// (channels 8/12/8, kernel 2, dilations 1/2/4, gating on the first two
/// layers) and the 50/10 hidden-layer MLP baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchSpec {
    pub kind: PolicyKind,
    pub cnn_layers: Vec<CnnLayerSpec>,
    pub mlp_hidden: Vec<usize>,
}

impl Default for ArchSpec {
    fn default() -> Self {
        ArchSpec::gated_cnn()
    }
}

impl ArchSpec {
    pub fn gated_cnn() -> Self {
        ArchSpec {
            kind: PolicyKind::GatedCnn,
            cnn_layers: vec![
                CnnLayerSpec { channels: 8, kernel: 2, dilation: 1, gated: true },
                CnnLayerSpec { channels: 12, kernel: 2, dilation: 2, gated: true },
                CnnLayerSpec { channels: 8, kernel: 2, dilation: 4, gated: false },
            ],
            mlp_hidden: vec![50, 10],
        }
    }

    pub fn mlp() -> Self {
        ArchSpec {
            kind: PolicyKind::Mlp,
            ..ArchSpec::gated_cnn()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PolicyKind::GatedCnn => {
                if self.cnn_layers.is_empty() {
                    return Err(Error::Config("gated CNN needs at least one layer".into()));
                }
                if self.cnn_layers.last().unwrap().channels != ACTION_DIM {
                    return Err(Error::Config(format!(
                        "final CNN layer must have {ACTION_DIM} channels"
                    )));
                }
                let mut len = OBS_HISTORY;
                for (i, layer) in self.cnn_layers.iter().enumerate() {
                    if layer.kernel == 0 || layer.dilation == 0 || layer.channels == 0 {
                        return Err(Error::Config(format!("CNN layer {i} has a zero dimension")));
                    }
                    len = conv_output_len(len, layer.kernel, layer.dilation).ok_or_else(|| {
                        Error::Config(format!(
                            "CNN layer {i} consumes more history than remains ({len} steps left)"
                        ))
                    })?;
                }
                if len != 1 {
                    return Err(Error::Config(format!(
                        "CNN receptive field must consume the whole history; final time length is {len}"
                    )));
                }
            }
            PolicyKind::Mlp => {
                if self.mlp_hidden.iter().any(|&h| h == 0) {
                    return Err(Error::Config("MLP hidden sizes must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Dense layer sizes of the MLP including input and output.
    fn mlp_dims(&self) -> Vec<usize> {
        let mut dims = vec![OBS_HISTORY * OBS_FEATURES];
        dims.extend_from_slice(&self.mlp_hidden);
        dims.push(ACTION_DIM);
        dims
    }

    /// Total parameter count.
    pub fn param_count(&self) -> usize {
        match self.kind {
            PolicyKind::GatedCnn => {
                let mut c_in = OBS_FEATURES;
                let mut total = 0;
                for layer in &self.cnn_layers {
                    let branch = layer.channels * layer.kernel * c_in + layer.channels;
                    total += if layer.gated { 2 * branch } else { branch };
                    c_in = layer.channels;
                }
                total
            }
            PolicyKind::Mlp => {
                let dims = self.mlp_dims();
                dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
            }
        }
    }

    /// Per-layer slices into the flat parameter vector.
    pub fn layout(&self) -> Vec<LayerLayout> {
        let mut out = Vec::new();
        let mut offset = 0;
        let mut take = |len: usize| {
            let range = ParamRange { offset, len };
            offset += len;
            range
        };
        match self.kind {
            PolicyKind::GatedCnn => {
                let mut c_in = OBS_FEATURES;
                for layer in &self.cnn_layers {
                    let w_len = layer.channels * layer.kernel * c_in;
                    let main_w = take(w_len);
                    let main_b = take(layer.channels);
                    let (gate_w, gate_b) = if layer.gated {
                        (Some(take(w_len)), Some(take(layer.channels)))
                    } else {
                        (None, None)
                    };
                    out.push(LayerLayout::Conv {
                        main_w,
                        main_b,
                        gate_w,
                        gate_b,
                        c_in,
                        c_out: layer.channels,
                        kernel: layer.kernel,
                        dilation: layer.dilation,
                    });
                    c_in = layer.channels;
                }
            }
            PolicyKind::Mlp => {
                let dims = self.mlp_dims();
                for pair in dims.windows(2) {
                    let w = take(pair[0] * pair[1]);
                    let b = take(pair[1]);
                    out.push(LayerLayout::Dense {
                        w,
                        b,
                        inputs: pair[0],
                        outputs: pair[1],
                    });
                }
            }
        }
        out
    }

    /// Zero parameter vector of the right dimension (the ES starting point;
    /// both families act as the motionless policy at zero).
    pub fn zero_params(&self) -> Vec<f64> {
        vec![0.0; self.param_count()]
    }
}

/// Half-open slice of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamRange {
    pub offset: usize,
    pub len: usize,
}

impl ParamRange {
    pub fn slice<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[self.offset..self.offset + self.len]
    }
}

/// Layout of one layer's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerLayout {
    Conv {
        main_w: ParamRange,
        main_b: ParamRange,
        gate_w: Option<ParamRange>,
        gate_b: Option<ParamRange>,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        dilation: usize,
    },
    Dense {
        w: ParamRange,
        b: ParamRange,
        inputs: usize,
        outputs: usize,
    },
}

/// Reusable forward-pass buffers; one per rollout worker.
#[derive(Debug, Default)]
pub struct PolicyScratch {
    a: Vec<f64>,
    b: Vec<f64>,
    gate: Vec<f64>,
}

impl PolicyScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

fn check_theta(spec: &ArchSpec, theta: &[f64]) -> Result<()> {
    let expected = spec.param_count();
    if theta.len() != expected {
        return Err(Error::Shape {
            expected: format!("{expected} parameters"),
            got: format!("{}", theta.len()),
        });
    }
    Ok(())
}

fn normalize_into(obs: &Observation, snapshot: &NormSnapshot, out: &mut Vec<f64>) {
    out.resize(OBS_HISTORY * OBS_FEATURES, 0.0);
    for (t, row) in obs.rows().iter().enumerate() {
        for (c, &value) in row.iter().enumerate() {
            out[t * OBS_FEATURES + c] = snapshot.normalize_feature(c, value);
        }
    }
}

/// Runs the controller on one observation. Pure function of
/// `(obs, theta, snapshot)`; dispatches on the architecture kind.
pub fn forward(
    spec: &ArchSpec,
    theta: &[f64],
    obs: &Observation,
    snapshot: &NormSnapshot,
    scratch: &mut PolicyScratch,
) -> Result<[f64; ACTION_DIM]> {
    match spec.kind {
        PolicyKind::GatedCnn => policy_forward(spec, theta, obs, snapshot, scratch),
        PolicyKind::Mlp => mlp_forward(spec, theta, obs, snapshot, scratch),
    }
}

/// Gated temporal-CNN forward pass: normalizes the observation, applies the
/// convolution stack, and returns the final length-1 time slice. The last
/// (ungated) layer's tanh bounds raw actions to (-1, 1).
pub fn policy_forward(
    spec: &ArchSpec,
    theta: &[f64],
    obs: &Observation,
    snapshot: &NormSnapshot,
    scratch: &mut PolicyScratch,
) -> Result<[f64; ACTION_DIM]> {
    check_theta(spec, theta)?;
    normalize_into(obs, snapshot, &mut scratch.a);
    let mut len = OBS_HISTORY;
    let mut channels = OBS_FEATURES;
    for layer in spec.layout() {
        let LayerLayout::Conv {
            main_w,
            main_b,
            gate_w,
            gate_b,
            c_in,
            c_out,
            kernel,
            dilation,
        } = layer
        else {
            unreachable!("CNN layout contains only conv layers");
        };
        debug_assert_eq!(c_in, channels);
        let weights = ConvLayerWeights {
            main_w: main_w.slice(theta),
            main_b: main_b.slice(theta),
            gate: gate_w
                .zip(gate_b)
                .map(|(w, b)| (w.slice(theta), b.slice(theta))),
        };
        len = gated_conv_layer(
            &scratch.a,
            len,
            channels,
            c_out,
            kernel,
            dilation,
            &weights,
            &mut scratch.b,
            &mut scratch.gate,
        )?;
        channels = c_out;
        std::mem::swap(&mut scratch.a, &mut scratch.b);
    }
    debug_assert_eq!(len, 1);
    debug_assert_eq!(channels, ACTION_DIM);
    let mut action = [0.0; ACTION_DIM];
    action.copy_from_slice(&scratch.a[..ACTION_DIM]);
    Ok(action)
}

/// MLP baseline: flattens the normalized observation, applies tanh hidden
/// layers, and a linear output layer.
pub fn mlp_forward(
    spec: &ArchSpec,
    theta: &[f64],
    obs: &Observation,
    snapshot: &NormSnapshot,
    scratch: &mut PolicyScratch,
) -> Result<[f64; ACTION_DIM]> {
    check_theta(spec, theta)?;
    normalize_into(obs, snapshot, &mut scratch.a);
    let layout = spec.layout();
    let layer_count = layout.len();
    for (idx, layer) in layout.into_iter().enumerate() {
        let LayerLayout::Dense { w, b, inputs, outputs } = layer else {
            unreachable!("MLP layout contains only dense layers");
        };
        let weights = w.slice(theta);
        let bias = b.slice(theta);
        scratch.b.resize(outputs, 0.0);
        let last = idx + 1 == layer_count;
        for o in 0..outputs {
            let mut acc = bias[o];
            let row = &weights[o * inputs..(o + 1) * inputs];
            for (wv, xv) in row.iter().zip(scratch.a.iter()) {
                acc += wv * xv;
            }
            scratch.b[o] = if last { acc } else { acc.tanh() };
        }
        std::mem::swap(&mut scratch.a, &mut scratch.b);
    }
    let mut action = [0.0; ACTION_DIM];
    action.copy_from_slice(&scratch.a[..ACTION_DIM]);
    Ok(action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn obs_from_fn(f: impl Fn(usize, usize) -> f64) -> Observation {
        let mut rows = [[0.0; OBS_FEATURES]; OBS_HISTORY];
        for (t, row) in rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = f(t, c);
            }
        }
        Observation(rows)
    }

    fn random_obs(rng: &mut impl Rng) -> Observation {
        let mut rows = [[0.0; OBS_FEATURES]; OBS_HISTORY];
        for row in rows.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.gen_range(-2.0..2.0);
            }
        }
        Observation(rows)
    }

    #[test]
    fn gated_cnn_has_976_parameters() {
        let spec = ArchSpec::gated_cnn();
        spec.validate().unwrap();
        // Per layer: (2*8*11*2 + 16) + (2*12*8*2 + 24) + (8*12*2 + 8).
        assert_eq!(spec.param_count(), 368 + 408 + 200);
        assert_eq!(spec.param_count(), 976);
    }

    #[test]
    fn cnn_layer_shapes_follow_the_dilation_schedule() {
        let spec = ArchSpec::gated_cnn();
        let mut len = OBS_HISTORY;
        let mut shapes = vec![(len, OBS_FEATURES)];
        for layer in &spec.cnn_layers {
            len = conv_output_len(len, layer.kernel, layer.dilation).unwrap();
            shapes.push((len, layer.channels));
        }
        assert_eq!(shapes, vec![(8, 11), (7, 8), (5, 12), (1, 8)]);
    }

    #[test]
    fn mlp_has_5048_parameters() {
        let spec = ArchSpec::mlp();
        spec.validate().unwrap();
        assert_eq!(spec.param_count(), 88 * 50 + 50 + 50 * 10 + 10 + 10 * 8 + 8);
        assert_eq!(spec.param_count(), 5048);
    }

    #[test]
    fn zero_theta_gives_zero_action_for_both_families() {
        let snapshot = NormSnapshot::identity();
        let mut scratch = PolicyScratch::new();
        let mut rng = crate::rng::rng_for(4, &[1]);
        let obs = random_obs(&mut rng);
        for spec in [ArchSpec::gated_cnn(), ArchSpec::mlp()] {
            let theta = spec.zero_params();
            let action = forward(&spec, &theta, &obs, &snapshot, &mut scratch).unwrap();
            assert_eq!(action, [0.0; ACTION_DIM]);
        }
    }

    #[test]
    fn theta_dimension_mismatch_is_a_shape_error() {
        let spec = ArchSpec::gated_cnn();
        let snapshot = NormSnapshot::identity();
        let mut scratch = PolicyScratch::new();
        let obs = obs_from_fn(|_, _| 0.0);
        let theta = vec![0.0; 975];
        assert!(matches!(
            forward(&spec, &theta, &obs, &snapshot, &mut scratch),
            Err(crate::Error::Shape { .. })
        ));
    }

    #[test]
    fn forward_is_pure() {
        let spec = ArchSpec::gated_cnn();
        let snapshot = NormSnapshot::identity();
        let mut rng = crate::rng::rng_for(5, &[1]);
        let theta: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let obs = random_obs(&mut rng);
        let mut s1 = PolicyScratch::new();
        let mut s2 = PolicyScratch::new();
        let a = forward(&spec, &theta, &obs, &snapshot, &mut s1).unwrap();
        let b = forward(&spec, &theta, &obs, &snapshot, &mut s2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn permuting_history_rows_changes_the_output() {
        let spec = ArchSpec::gated_cnn();
        let snapshot = NormSnapshot::identity();
        let mut scratch = PolicyScratch::new();
        let mut rng = crate::rng::rng_for(6, &[1]);
        let theta: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let obs = obs_from_fn(|t, c| (t as f64) * 0.3 + (c as f64) * 0.01);
        let mut swapped_rows = *obs.rows();
        swapped_rows.swap(0, 7);
        let swapped = Observation(swapped_rows);
        let a = forward(&spec, &theta, &obs, &snapshot, &mut scratch).unwrap();
        let b = forward(&spec, &theta, &swapped, &snapshot, &mut scratch).unwrap();
        assert_ne!(a, b, "time dimension must not be pooled away");
    }

    #[test]
    fn oldest_history_row_is_not_dead() {
        let spec = ArchSpec::gated_cnn();
        let snapshot = NormSnapshot::identity();
        let mut scratch = PolicyScratch::new();
        let mut rng = crate::rng::rng_for(7, &[1]);
        let theta: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let obs = random_obs(&mut rng);
        let mut perturbed_rows = *obs.rows();
        perturbed_rows[0][0] += 1.0;
        let perturbed = Observation(perturbed_rows);
        let a = forward(&spec, &theta, &obs, &snapshot, &mut scratch).unwrap();
        let b = forward(&spec, &theta, &perturbed, &snapshot, &mut scratch).unwrap();
        assert_ne!(a, b, "receptive field must cover the oldest row");
    }

    #[test]
    fn mlp_matches_dense_matrix_oracle() {
        let spec = ArchSpec::mlp();
        let snapshot = NormSnapshot::identity();
        let mut scratch = PolicyScratch::new();
        let mut rng = crate::rng::rng_for(9, &[1]);
        let theta: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let obs = random_obs(&mut rng);
        let action = forward(&spec, &theta, &obs, &snapshot, &mut scratch).unwrap();

        // Independent dense oracle over the documented layout.
        let mut x: Vec<f64> = obs
            .rows()
            .iter()
            .flat_map(|row| row.iter().copied())
            .collect();
        let dims = [88_usize, 50, 10, 8];
        let mut offset = 0;
        for li in 0..3 {
            let (n_in, n_out) = (dims[li], dims[li + 1]);
            let w = &theta[offset..offset + n_in * n_out];
            offset += n_in * n_out;
            let b = &theta[offset..offset + n_out];
            offset += n_out;
            let mut y = vec![0.0; n_out];
            for o in 0..n_out {
                let mut acc = b[o];
                for i in 0..n_in {
                    acc += w[o * n_in + i] * x[i];
                }
                y[o] = if li == 2 { acc } else { acc.tanh() };
            }
            x = y;
        }
        for i in 0..ACTION_DIM {
            assert!((action[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn layout_round_trip_reconstructs_theta() {
        for spec in [ArchSpec::gated_cnn(), ArchSpec::mlp()] {
            let mut rng = crate::rng::rng_for(10, &[1]);
            use rand::Rng;
            let theta: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut rebuilt = vec![f64::NAN; theta.len()];
            let mut write = |range: ParamRange| {
                rebuilt[range.offset..range.offset + range.len]
                    .copy_from_slice(range.slice(&theta));
            };
            for layer in spec.layout() {
                match layer {
                    LayerLayout::Conv { main_w, main_b, gate_w, gate_b, .. } => {
                        write(main_w);
                        write(main_b);
                        if let (Some(w), Some(b)) = (gate_w, gate_b) {
                            write(w);
                            write(b);
                        }
                    }
                    LayerLayout::Dense { w, b, .. } => {
                        write(w);
                        write(b);
                    }
                }
            }
            assert_eq!(rebuilt, theta, "layout must tile the whole vector");
        }
    }
}
