//! Weights files: one JSON document with a format version, the model kind and
//! each network's layer sizes, activations and row-major parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ddx_core::neural::{Activation, ActorCritic, Layer, Mlp};

use crate::error::{Error, Result};

pub const WEIGHTS_FORMAT_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ActorCritic,
    Classifier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerParams {
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    name: String,
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    parameters: Vec<LayerParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsDoc {
    format_version: u64,
    kind: ModelKind,
    networks: Vec<NetworkDoc>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u64,
}

fn network_doc(name: &str, mlp: &Mlp) -> NetworkDoc {
    NetworkDoc {
        name: name.into(),
        layer_sizes: mlp.layer_sizes(),
        activations: mlp.layers().iter().map(|l| l.activation).collect(),
        parameters: mlp
            .layers()
            .iter()
            .map(|l| LayerParams { weights: l.weights.clone(), bias: l.bias.clone() })
            .collect(),
    }
}

fn network_from_doc(doc: NetworkDoc, path: &Path) -> Result<Mlp> {
    let corrupt = |m: String| Error::format(path, 0, format!("network `{}`: {m}", doc.name));
    let n = doc.parameters.len();
    if doc.layer_sizes.len() != n + 1 || doc.activations.len() != n {
        return Err(corrupt(format!(
            "{} layer sizes, {} activations and {n} parameter blocks do not match",
            doc.layer_sizes.len(),
            doc.activations.len()
        )));
    }
    let mut layers = Vec::with_capacity(n);
    for (k, (p, act)) in doc.parameters.into_iter().zip(doc.activations).enumerate() {
        let layer = Layer::new(doc.layer_sizes[k], doc.layer_sizes[k + 1], p.weights, p.bias, act)
            .map_err(|e| corrupt(format!("layer {k}: {e}")))?;
        layers.push(layer);
    }
    Mlp::from_layers(layers).map_err(|e| corrupt(e.to_string()))
}

fn render(kind: ModelKind, networks: Vec<NetworkDoc>) -> String {
    let doc = WeightsDoc { format_version: WEIGHTS_FORMAT_VERSION, kind, networks };
    let mut s = serde_json::to_string(&doc).expect("weights always serialize");
    s.push('\n');
    s
}

fn parse(text: &str, path: &Path, kind: ModelKind) -> Result<Vec<Mlp>> {
    let probe: VersionProbe = serde_json::from_str(text)
        .map_err(|e| Error::format(path, e.line(), format!("corrupt weights file: {e}")))?;
    if probe.format_version != WEIGHTS_FORMAT_VERSION {
        return Err(Error::Version {
            path: path.into(),
            found: probe.format_version,
            supported: WEIGHTS_FORMAT_VERSION,
        });
    }
    let doc: WeightsDoc = serde_json::from_str(text)
        .map_err(|e| Error::format(path, e.line(), format!("corrupt weights file: {e}")))?;
    if doc.kind != kind {
        return Err(Error::format(path, 1, format!("expected a {kind:?} model, found {:?}", doc.kind)));
    }
    doc.networks.into_iter().map(|n| network_from_doc(n, path)).collect()
}

pub fn render_actor_critic(net: &ActorCritic) -> String {
    render(
        ModelKind::ActorCritic,
        vec![
            network_doc("trunk", &net.trunk),
            network_doc("policy_head", &net.policy_head),
            network_doc("value_head", &net.value_head),
        ],
    )
}

pub fn parse_actor_critic(text: &str, path: &Path) -> Result<ActorCritic> {
    let nets = parse(text, path, ModelKind::ActorCritic)?;
    let [trunk, policy_head, value_head]: [Mlp; 3] = nets
        .try_into()
        .map_err(|v: Vec<Mlp>| Error::format(path, 1, format!("actor-critic needs 3 networks, found {}", v.len())))?;
    Ok(ActorCritic::from_parts(trunk, policy_head, value_head)?)
}

pub fn render_classifier(mlp: &Mlp) -> String {
    render(ModelKind::Classifier, vec![network_doc("classifier", mlp)])
}

pub fn parse_classifier(text: &str, path: &Path) -> Result<Mlp> {
    let mut nets = parse(text, path, ModelKind::Classifier)?;
    if nets.len() != 1 {
        return Err(Error::format(path, 1, format!("classifier needs 1 network, found {}", nets.len())));
    }
    Ok(nets.remove(0))
}

pub fn save_actor_critic(net: &ActorCritic, path: &Path) -> Result<()> {
    super::write(path, &render_actor_critic(net))
}

pub fn load_actor_critic(path: &Path) -> Result<ActorCritic> {
    parse_actor_critic(&super::read(path)?, path)
}

pub fn save_classifier(mlp: &Mlp, path: &Path) -> Result<()> {
    super::write(path, &render_classifier(mlp))
}

pub fn load_classifier(path: &Path) -> Result<Mlp> {
    parse_classifier(&super::read(path)?, path)
}
