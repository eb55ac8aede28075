//! Encode-process-decode message-passing network.
//!
//! The encoder lifts node and edge features into a shared latent width. Each
//! processor block runs one message-passing step: an edge MLP over
//! `[e, v_receiver − v_sender]`, a deterministic sum of incoming edge
//! messages per node, and a node MLP over `[v, aggregate, v_encoded]` (the
//! third slot is a skip connection from the encoder output). Both updates
//! are added residually. The decoder maps node latents to a per-node
//! position change; the effector's output row is discarded by callers.
//!
//! Parameters live in a flat, ordered tensor list so the optimizer and the
//! checkpoint format can treat the model as a named tensor set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spraygnn_autodiff::{read_checkpoint, write_checkpoint, Tape, Tensor, Var};

use crate::geometry::Vec3;
use crate::graph::{NormStats, SprayGraph};
use crate::{CoreError, Scalar};

pub const SIDECAR_FORMAT: u32 = 1;

/// Network dimensions. Defaults follow the tuned configuration: latent 128,
/// six hidden layers per MLP, processor width 114, ten processor blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub latent: usize,
    pub encoder_hidden_layers: usize,
    pub processor_blocks: usize,
    pub processor_width: usize,
    pub processor_hidden_layers: usize,
    pub decoder_hidden_layers: usize,
    pub node_in: usize,
    pub edge_in: usize,
    pub out: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            latent: 128,
            encoder_hidden_layers: 6,
            processor_blocks: 10,
            processor_width: 114,
            processor_hidden_layers: 6,
            decoder_hidden_layers: 6,
            node_in: crate::graph::NODE_FEATURES,
            edge_in: crate::graph::EDGE_FEATURES,
            out: 3,
        }
    }
}

/// Layer sizes of one MLP: `input → width × hidden_layers → output`, with
/// ReLU after every hidden layer.
fn mlp_dims(input: usize, width: usize, hidden_layers: usize, output: usize) -> Vec<(usize, usize)> {
    let mut dims = Vec::with_capacity(hidden_layers + 1);
    let mut prev = input;
    for _ in 0..hidden_layers {
        dims.push((prev, width));
        prev = width;
    }
    dims.push((prev, output));
    dims
}

#[derive(Debug, Clone, Copy)]
struct MlpSpec {
    /// Index of the first tensor (w0); layers follow as w,b pairs.
    start: usize,
    layers: usize,
}

/// All trainable tensors of the network in a fixed, named order.
#[derive(Debug, Clone)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub tensors: Vec<Tensor<T>>,
    names: Vec<String>,
    node_encoder: MlpSpec,
    edge_encoder: MlpSpec,
    /// Per block: (edge update, node update).
    blocks: Vec<(MlpSpec, MlpSpec)>,
    decoder: MlpSpec,
}

impl<T: Scalar> ModelParams<T> {
    /// Build the parameter set with Glorot-uniform weights
    /// (±√(6/(fan_in+fan_out))) and zero biases, seeded.
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::new();
        let mut names = Vec::new();

        let push_mlp = |prefix: &str,
                            dims: &[(usize, usize)],
                            tensors: &mut Vec<Tensor<T>>,
                            names: &mut Vec<String>,
                            rng: &mut ChaCha8Rng| {
            let start = tensors.len();
            for (layer, &(fan_in, fan_out)) in dims.iter().enumerate() {
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let values: Vec<T> = (0..fan_in * fan_out)
                    .map(|_| T::from_f64(rng.gen_range(-bound..bound)).unwrap())
                    .collect();
                tensors.push(Tensor::from_vec(&[fan_in, fan_out], values).unwrap());
                names.push(format!("{prefix}.w{layer}"));
                tensors.push(Tensor::zeros(&[1, fan_out]));
                names.push(format!("{prefix}.b{layer}"));
            }
            MlpSpec { start, layers: dims.len() }
        };

        let c = &config;
        let node_encoder = push_mlp(
            "node_encoder",
            &mlp_dims(c.node_in, c.latent, c.encoder_hidden_layers, c.latent),
            &mut tensors,
            &mut names,
            &mut rng,
        );
        let edge_encoder = push_mlp(
            "edge_encoder",
            &mlp_dims(c.edge_in, c.latent, c.encoder_hidden_layers, c.latent),
            &mut tensors,
            &mut names,
            &mut rng,
        );
        let mut blocks = Vec::with_capacity(c.processor_blocks);
        for m in 0..c.processor_blocks {
            let edge = push_mlp(
                &format!("block{m:02}.edge"),
                &mlp_dims(2 * c.latent, c.processor_width, c.processor_hidden_layers, c.latent),
                &mut tensors,
                &mut names,
                &mut rng,
            );
            let node = push_mlp(
                &format!("block{m:02}.node"),
                &mlp_dims(3 * c.latent, c.processor_width, c.processor_hidden_layers, c.latent),
                &mut tensors,
                &mut names,
                &mut rng,
            );
            blocks.push((edge, node));
        }
        let decoder = push_mlp(
            "decoder",
            &mlp_dims(c.latent, c.latent, c.decoder_hidden_layers, c.out),
            &mut tensors,
            &mut names,
            &mut rng,
        );

        ModelParams { config, tensors, names, node_encoder, edge_encoder, blocks, decoder }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }
}

/// Record every parameter tensor as a tape leaf, in parameter order.
pub fn record_params<T: Scalar>(tape: &mut Tape<T>, params: &ModelParams<T>) -> Vec<Var> {
    params.tensors.iter().map(|t| tape.input(t)).collect()
}

fn apply_mlp<T: Scalar>(
    tape: &mut Tape<T>,
    vars: &[Var],
    spec: MlpSpec,
    mut x: Var,
) -> Result<Var, CoreError> {
    for layer in 0..spec.layers {
        let w = vars[spec.start + 2 * layer];
        let b = vars[spec.start + 2 * layer + 1];
        let z = tape.matmul(x, w)?;
        let z = tape.add(z, b)?;
        x = if layer + 1 < spec.layers { tape.relu(z)? } else { z };
    }
    Ok(x)
}

/// Latent graph produced by [`encode`]; connectivity is shared with the
/// input graph.
pub struct LatentGraph {
    pub nodes: Var,
    pub edges: Var,
}

/// Encode raw node and edge features into the latent width.
pub fn encode<T: Scalar>(
    tape: &mut Tape<T>,
    vars: &[Var],
    params: &ModelParams<T>,
    graph: &SprayGraph<T>,
) -> Result<LatentGraph, CoreError> {
    if graph.node_features.cols() != params.config.node_in {
        return Err(CoreError::Tensor(spraygnn_autodiff::TensorError::ShapeMismatch {
            op: "encode",
            detail: format!(
                "{} node features, model expects {}",
                graph.node_features.cols(),
                params.config.node_in
            ),
        }));
    }
    let node_in = tape.input(&graph.node_features);
    let edge_in = tape.input(&graph.edge_features);
    let nodes = apply_mlp(tape, vars, params.node_encoder, node_in)?;
    let edges = apply_mlp(tape, vars, params.edge_encoder, edge_in)?;
    Ok(LatentGraph { nodes, edges })
}

/// Run the message-passing blocks with residual node and edge updates.
pub fn process<T: Scalar>(
    tape: &mut Tape<T>,
    vars: &[Var],
    params: &ModelParams<T>,
    graph: &SprayGraph<T>,
    latent: LatentGraph,
) -> Result<LatentGraph, CoreError> {
    let node_count = graph.node_count();
    let skip = latent.nodes;
    let mut nodes = latent.nodes;
    let mut edges = latent.edges;
    for (edge_spec, node_spec) in &params.blocks {
        let v_send = tape.gather_rows(nodes, &graph.senders)?;
        let v_recv = tape.gather_rows(nodes, &graph.receivers)?;
        let v_diff = tape.sub(v_recv, v_send)?;
        let e_input = tape.concat_cols(&[edges, v_diff])?;
        let e_update = apply_mlp(tape, vars, *edge_spec, e_input)?;

        let aggregated = tape.segment_sum(e_update, &graph.receivers, node_count)?;
        let v_input = tape.concat_cols(&[nodes, aggregated, skip])?;
        let v_update = apply_mlp(tape, vars, *node_spec, v_input)?;

        edges = tape.add(edges, e_update)?;
        nodes = tape.add(nodes, v_update)?;
    }
    Ok(LatentGraph { nodes, edges })
}

/// Decode node latents into per-node position changes `(N+1) × 3`.
pub fn decode<T: Scalar>(
    tape: &mut Tape<T>,
    vars: &[Var],
    params: &ModelParams<T>,
    latent: &LatentGraph,
) -> Result<Var, CoreError> {
    Ok(apply_mlp(tape, vars, params.decoder, latent.nodes)?)
}

/// Full forward pass; returns the `(N+1) × 3` output node attributes.
pub fn forward<T: Scalar>(
    tape: &mut Tape<T>,
    vars: &[Var],
    params: &ModelParams<T>,
    graph: &SprayGraph<T>,
) -> Result<Var, CoreError> {
    let latent = encode(tape, vars, params, graph)?;
    let latent = process(tape, vars, params, graph, latent)?;
    decode(tape, vars, params, &latent)
}

/// Convenience inference: wall-node position changes in normalized units,
/// `N × 3`, effector row dropped.
pub fn predict_deltas<T: Scalar>(
    params: &ModelParams<T>,
    graph: &SprayGraph<T>,
) -> Result<Vec<[T; 3]>, CoreError> {
    let mut tape = Tape::new();
    let vars = record_params(&mut tape, params);
    let out = forward(&mut tape, &vars, params, graph)?;
    let values = tape.values(out)?;
    let n = graph.effector_index;
    Ok((0..n).map(|i| [values[i * 3], values[i * 3 + 1], values[i * 3 + 2]]).collect())
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct StatsDto {
    center: [f64; 3],
    length_scale: f64,
    pressure_ref: f64,
    delta_scale: [f64; 3],
}

/// JSON sidecar stored next to each binary checkpoint.
#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    format: u32,
    model: ModelConfig,
    stats: StatsDto,
    #[serde(default)]
    train: serde_json::Value,
}

/// Sidecar path for a checkpoint: same name with `.json`.
pub fn sidecar_path(checkpoint: &std::path::Path) -> std::path::PathBuf {
    checkpoint.with_extension("json")
}

/// Write the binary checkpoint plus its JSON sidecar (config, normalization
/// stats, and free-form training info).
pub fn save_checkpoint<T: Scalar>(
    path: &std::path::Path,
    params: &ModelParams<T>,
    stats: &NormStats<T>,
    train: serde_json::Value,
) -> Result<(), CoreError> {
    let named: Vec<(String, Tensor<T>)> = params
        .names
        .iter()
        .cloned()
        .zip(params.tensors.iter().cloned())
        .collect();
    write_checkpoint(path, &named)?;
    let sidecar = Sidecar {
        format: SIDECAR_FORMAT,
        model: params.config,
        stats: StatsDto {
            center: [
                stats.center.x.to_f64().unwrap(),
                stats.center.y.to_f64().unwrap(),
                stats.center.z.to_f64().unwrap(),
            ],
            length_scale: stats.length_scale.to_f64().unwrap(),
            pressure_ref: stats.pressure_ref.to_f64().unwrap(),
            delta_scale: [
                stats.delta_scale[0].to_f64().unwrap(),
                stats.delta_scale[1].to_f64().unwrap(),
                stats.delta_scale[2].to_f64().unwrap(),
            ],
        },
        train,
    };
    let file = std::fs::File::create(sidecar_path(path))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &sidecar)
        .map_err(|e| CoreError::Format(format!("sidecar: {e}")))?;
    Ok(())
}

/// Load a checkpoint and its sidecar back into a typed model.
pub fn load_checkpoint<T: Scalar>(
    path: &std::path::Path,
) -> Result<(ModelParams<T>, NormStats<T>, serde_json::Value), CoreError> {
    let sidecar_file = sidecar_path(path);
    if !sidecar_file.is_file() {
        return Err(CoreError::MissingFile(sidecar_file.display().to_string()));
    }
    let sidecar: Sidecar =
        serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(&sidecar_file)?))
            .map_err(|e| CoreError::Format(format!("sidecar: {e}")))?;
    if sidecar.format != SIDECAR_FORMAT {
        return Err(CoreError::SchemaVersionMismatch {
            found: sidecar.format,
            expected: SIDECAR_FORMAT,
        });
    }

    let mut params = ModelParams::<T>::init(sidecar.model, 0);
    let loaded: Vec<(String, Tensor<T>)> = read_checkpoint(path)?;
    let by_name: std::collections::HashMap<&str, &Tensor<T>> =
        loaded.iter().map(|(n, t)| (n.as_str(), t)).collect();
    for (name, slot) in params.names.iter().zip(params.tensors.iter_mut()) {
        let tensor = by_name
            .get(name.as_str())
            .ok_or_else(|| CoreError::Format(format!("checkpoint missing tensor {name}")))?;
        if tensor.shape() != slot.shape() {
            return Err(CoreError::Format(format!(
                "tensor {name}: checkpoint shape {:?}, model expects {:?}",
                tensor.shape(),
                slot.shape()
            )));
        }
        *slot = (*tensor).clone();
    }

    let stats = NormStats {
        center: Vec3::new(
            T::from_f64(sidecar.stats.center[0]).unwrap(),
            T::from_f64(sidecar.stats.center[1]).unwrap(),
            T::from_f64(sidecar.stats.center[2]).unwrap(),
        ),
        length_scale: T::from_f64(sidecar.stats.length_scale).unwrap(),
        pressure_ref: T::from_f64(sidecar.stats.pressure_ref).unwrap(),
        delta_scale: [
            T::from_f64(sidecar.stats.delta_scale[0]).unwrap(),
            T::from_f64(sidecar.stats.delta_scale[1]).unwrap(),
            T::from_f64(sidecar.stats.delta_scale[2]).unwrap(),
        ],
    };
    Ok((params, stats, sidecar.train))
}
