use std::path::{Path, PathBuf};

use gdt_tensor::{
    load_checkpoint_map, save_checkpoint, Tape64, Tensor64, TensorError, TensorId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{DTConfig, StateNorm};
use crate::error::ModelError;
use crate::window::TrajectoryWindow;

const LN_EPS: f64 = 1e-5;
const INIT_STD: f64 = 0.02;

// fixed parameter order: the embedding block, then 16 tensors per layer,
// then the final norm and action head
const RTG_W: usize = 0;
const RTG_B: usize = 1;
const STATE_W: usize = 2;
const STATE_B: usize = 3;
const ACT_W: usize = 4;
const ACT_B: usize = 5;
const TIME: usize = 6;
const EMBED_PARAMS: usize = 7;

const LN1_G: usize = 0;
const LN1_B: usize = 1;
const Q_W: usize = 2;
const Q_B: usize = 3;
const K_W: usize = 4;
const K_B: usize = 5;
const V_W: usize = 6;
const V_B: usize = 7;
const O_W: usize = 8;
const O_B: usize = 9;
const LN2_G: usize = 10;
const LN2_B: usize = 11;
const F1_W: usize = 12;
const F1_B: usize = 13;
const F2_W: usize = 14;
const F2_B: usize = 15;
const LAYER_PARAMS: usize = 16;

fn layer_base(layer: usize) -> usize {
    EMBED_PARAMS + LAYER_PARAMS * layer
}

fn tail_base(n_layers: usize) -> usize {
    EMBED_PARAMS + LAYER_PARAMS * n_layers
}

enum Init {
    Gauss,
    Zeros,
    Ones,
}

fn parameter_specs(cfg: &DTConfig) -> Vec<(String, Vec<usize>, Init)> {
    let d = cfg.embed_dim;
    let f = cfg.flat_state_dim();
    let a = cfg.action_dim;
    let h = 4 * d;
    let mut specs: Vec<(String, Vec<usize>, Init)> = vec![
        ("embed.rtg.w".into(), vec![1, d], Init::Gauss),
        ("embed.rtg.b".into(), vec![d], Init::Zeros),
        ("embed.state.w".into(), vec![f, d], Init::Gauss),
        ("embed.state.b".into(), vec![d], Init::Zeros),
        ("embed.action.w".into(), vec![a, d], Init::Gauss),
        ("embed.action.b".into(), vec![d], Init::Zeros),
        ("embed.timestep".into(), vec![cfg.max_timestep, d], Init::Gauss),
    ];
    for i in 0..cfg.n_layers {
        let p = |part: &str| format!("layers.{i}.{part}");
        specs.extend([
            (p("ln1.gain"), vec![d], Init::Ones),
            (p("ln1.bias"), vec![d], Init::Zeros),
            (p("attn.q.w"), vec![d, d], Init::Gauss),
            (p("attn.q.b"), vec![d], Init::Zeros),
            (p("attn.k.w"), vec![d, d], Init::Gauss),
            (p("attn.k.b"), vec![d], Init::Zeros),
            (p("attn.v.w"), vec![d, d], Init::Gauss),
            (p("attn.v.b"), vec![d], Init::Zeros),
            (p("attn.out.w"), vec![d, d], Init::Gauss),
            (p("attn.out.b"), vec![d], Init::Zeros),
            (p("ln2.gain"), vec![d], Init::Ones),
            (p("ln2.bias"), vec![d], Init::Zeros),
            (p("ff.in.w"), vec![d, h], Init::Gauss),
            (p("ff.in.b"), vec![h], Init::Zeros),
            (p("ff.out.w"), vec![h, d], Init::Gauss),
            (p("ff.out.b"), vec![d], Init::Zeros),
        ]);
    }
    specs.extend([
        ("final_norm.gain".into(), vec![d], Init::Ones),
        ("final_norm.bias".into(), vec![d], Init::Zeros),
        ("head.w".into(), vec![d, a], Init::Gauss),
        ("head.b".into(), vec![a], Init::Zeros),
    ]);
    specs
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    config: DTConfig,
    normalization: StateNorm,
}

pub enum ForwardMode<'a> {
    Eval,
    Train { rng: &'a mut ChaCha8Rng },
}

pub struct BatchOutput {
    /// Predicted actions, `[windows·K, action_dim]`, read from state tokens.
    pub predictions: TensorId,
    /// Tape leaves of the parameters, in `named_params` order.
    pub params: Vec<TensorId>,
}

pub struct DTModel {
    config: DTConfig,
    names: Vec<String>,
    tensors: Vec<Tensor64>,
}

impl DTModel {
    pub fn new(config: DTConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gauss = Normal::new(0.0, INIT_STD).expect("valid init std");
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape, init) in parameter_specs(&config) {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Gauss => (0..n).map(|_| gauss.sample(&mut rng)).collect(),
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
            };
            names.push(name);
            tensors.push(Tensor64::new(shape, data).expect("spec shapes consistent"));
        }
        Ok(Self {
            config,
            names,
            tensors,
        })
    }

    pub fn config(&self) -> &DTConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor64::numel).sum()
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&str, &Tensor64)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor64] {
        &mut self.tensors
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor64::all_finite)
    }

    /// Embeds one window into its 3K tokens: per timestep (return-to-go,
    /// state, action), each through its own linear map, plus the learned
    /// timestep embedding on all three.
    pub fn tokenize(
        &self,
        tape: &mut Tape64,
        window: &TrajectoryWindow,
    ) -> Result<TensorId, ModelError> {
        let ids = self.bind(tape, false);
        let (tokens, _) = self.embed(tape, &ids, std::slice::from_ref(window))?;
        Ok(tokens)
    }

    /// Runs the stack over a batch of windows. Training mode binds the
    /// parameters as differentiable leaves and applies dropout; evaluation
    /// binds constants and is deterministic.
    pub fn forward_batch(
        &self,
        tape: &mut Tape64,
        windows: &[TrajectoryWindow],
        mode: ForwardMode,
    ) -> Result<BatchOutput, ModelError> {
        let mut rng = match mode {
            ForwardMode::Eval => None,
            ForwardMode::Train { rng } => Some(rng),
        };
        let ids = self.bind(tape, rng.is_some());
        let (tokens, key_ok) = self.embed(tape, &ids, windows)?;
        let mut x = self.maybe_dropout(tape, tokens, &mut rng)?;
        let group = 3 * self.config.context_length;

        for layer in 0..self.config.n_layers {
            let lb = layer_base(layer);
            let h = tape.layer_norm(x, ids[lb + LN1_G], ids[lb + LN1_B], LN_EPS)?;
            let q = linear(tape, h, ids[lb + Q_W], ids[lb + Q_B])?;
            let k = linear(tape, h, ids[lb + K_W], ids[lb + K_B])?;
            let v = linear(tape, h, ids[lb + V_W], ids[lb + V_B])?;
            let att = tape.attention(q, k, v, self.config.n_heads, group, key_ok.clone())?;
            let proj = linear(tape, att, ids[lb + O_W], ids[lb + O_B])?;
            let proj = self.maybe_dropout(tape, proj, &mut rng)?;
            x = tape.add(x, proj)?;

            let h2 = tape.layer_norm(x, ids[lb + LN2_G], ids[lb + LN2_B], LN_EPS)?;
            let f1 = linear(tape, h2, ids[lb + F1_W], ids[lb + F1_B])?;
            let f1 = tape.gelu(f1);
            let f2 = linear(tape, f1, ids[lb + F2_W], ids[lb + F2_B])?;
            let f2 = self.maybe_dropout(tape, f2, &mut rng)?;
            x = tape.add(x, f2)?;
        }

        let tb = tail_base(self.config.n_layers);
        let x = tape.layer_norm(x, ids[tb], ids[tb + 1], LN_EPS)?;
        let k = self.config.context_length;
        let state_rows: Vec<usize> = (0..windows.len())
            .flat_map(|w| (0..k).map(move |t| w * 3 * k + 3 * t + 1))
            .collect();
        let rows = tape.gather_rows(x, state_rows)?;
        let logits = linear(tape, rows, ids[tb + 2], ids[tb + 3])?;
        let predictions = tape.tanh(logits);
        Ok(BatchOutput {
            predictions,
            params: ids,
        })
    }

    /// Deterministic single-window evaluation; returns `[K, action_dim]`.
    pub fn forward(
        &self,
        tape: &mut Tape64,
        window: &TrajectoryWindow,
    ) -> Result<TensorId, ModelError> {
        Ok(self
            .forward_batch(tape, std::slice::from_ref(window), ForwardMode::Eval)?
            .predictions)
    }

    pub fn save(&self, path: &Path, normalization: &StateNorm) -> Result<(), ModelError> {
        let named: Vec<(String, Tensor64)> = self
            .names
            .iter()
            .cloned()
            .zip(self.tensors.iter().cloned())
            .collect();
        save_checkpoint(path, &named)?;
        let sidecar = Sidecar {
            config: self.config.clone(),
            normalization: normalization.clone(),
        };
        std::fs::write(
            sidecar_path(path),
            serde_json::to_string_pretty(&sidecar)?,
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, StateNorm), ModelError> {
        let text = std::fs::read_to_string(sidecar_path(path))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        sidecar.config.validate()?;
        let mut map = load_checkpoint_map(path)?;
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape, _) in parameter_specs(&sidecar.config) {
            let tensor = map
                .remove(&name)
                .ok_or_else(|| ModelError::MissingParam(name.clone()))?;
            if tensor.shape() != shape {
                return Err(ModelError::ParamShape {
                    name,
                    expected: shape,
                    got: tensor.shape().to_vec(),
                });
            }
            names.push(name);
            tensors.push(tensor);
        }
        if let Some((name, _)) = map.into_iter().next() {
            return Err(ModelError::UnexpectedParam(name));
        }
        Ok((
            Self {
                config: sidecar.config,
                names,
                tensors,
            },
            sidecar.normalization,
        ))
    }

    fn bind(&self, tape: &mut Tape64, trainable: bool) -> Vec<TensorId> {
        self.tensors
            .iter()
            .map(|t| tape.leaf(t.clone(), trainable))
            .collect()
    }

    fn embed(
        &self,
        tape: &mut Tape64,
        ids: &[TensorId],
        windows: &[TrajectoryWindow],
    ) -> Result<(TensorId, Vec<bool>), ModelError> {
        if windows.is_empty() {
            return Err(ModelError::Window("empty batch".into()));
        }
        let k = self.config.context_length;
        let f = self.config.flat_state_dim();
        let a = self.config.action_dim;
        let rows = windows.len() * k;
        let mut rtg = Vec::with_capacity(rows);
        let mut states = Vec::with_capacity(rows * f);
        let mut actions = Vec::with_capacity(rows * a);
        let mut time_idx = Vec::with_capacity(rows);
        let mut key_ok = Vec::with_capacity(3 * rows);
        for w in windows {
            w.validate(&self.config)?;
            for t in 0..k {
                rtg.push(w.returns_to_go[t]);
                states.extend_from_slice(&w.states[t]);
                actions.extend_from_slice(&w.actions[t]);
                time_idx.push(w.timesteps[t]);
                key_ok.extend([w.mask[t]; 3]);
            }
        }
        let rtg_in = tape.constant(Tensor64::new(vec![rows, 1], rtg)?);
        let state_in = tape.constant(Tensor64::new(vec![rows, f], states)?);
        let act_in = tape.constant(Tensor64::new(vec![rows, a], actions)?);
        let time = tape.gather_rows(ids[TIME], time_idx)?;

        let rtg_e = linear(tape, rtg_in, ids[RTG_W], ids[RTG_B])?;
        let rtg_e = tape.add(rtg_e, time)?;
        let state_e = linear(tape, state_in, ids[STATE_W], ids[STATE_B])?;
        let state_e = tape.add(state_e, time)?;
        let act_e = linear(tape, act_in, ids[ACT_W], ids[ACT_B])?;
        let act_e = tape.add(act_e, time)?;

        let tokens = tape.interleave3(rtg_e, state_e, act_e, k)?;
        Ok((tokens, key_ok))
    }

    fn maybe_dropout(
        &self,
        tape: &mut Tape64,
        x: TensorId,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<TensorId, ModelError> {
        let Some(rng) = rng.as_deref_mut() else {
            return Ok(x);
        };
        if self.config.dropout == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - self.config.dropout;
        let n = tape.value(x).numel();
        let mask: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < keep).collect();
        Ok(tape.dropout(x, mask, keep)?)
    }
}

fn linear(
    tape: &mut Tape64,
    x: TensorId,
    w: TensorId,
    b: TensorId,
) -> Result<TensorId, TensorError> {
    let m = tape.matmul(x, w)?;
    tape.add_bias(m, b)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Mean squared error over unmasked positions; masked rows contribute
/// nothing to the value or the gradient.
pub fn action_loss(
    tape: &mut Tape64,
    predictions: TensorId,
    targets: &Tensor64,
    mask: &[bool],
) -> Result<TensorId, ModelError> {
    let shape = tape.value(predictions).shape().to_vec();
    if targets.shape() != shape.as_slice() {
        return Err(ModelError::Tensor(TensorError::ShapeMismatch {
            op: "action_loss",
            lhs: shape,
            rhs: targets.shape().to_vec(),
        }));
    }
    let (rows, a) = (shape[0], shape[1]);
    if mask.len() != rows {
        return Err(ModelError::Window(format!(
            "loss mask holds {} entries for {rows} rows",
            mask.len()
        )));
    }
    let n_real = mask.iter().filter(|&&m| m).count();
    if n_real == 0 {
        return Err(ModelError::AllMasked);
    }
    let t = tape.constant(targets.clone());
    let diff = tape.sub(predictions, t)?;
    let sq = tape.mul(diff, diff)?;
    let mut mask_data = Vec::with_capacity(rows * a);
    for &m in mask {
        mask_data.extend(std::iter::repeat(if m { 1.0 } else { 0.0 }).take(a));
    }
    let m = tape.constant(Tensor64::new(vec![rows, a], mask_data)?);
    let masked = tape.mul(sq, m)?;
    let sum = tape.sum_all(masked);
    Ok(tape.scale(sum, 1.0 / (n_real * a) as f64))
}

/// Flattens the windows' actions and mask into loss targets.
pub fn action_targets(windows: &[TrajectoryWindow]) -> (Tensor64, Vec<bool>) {
    let k = windows.first().map_or(0, |w| w.actions.len());
    let a = windows
        .first()
        .and_then(|w| w.actions.first())
        .map_or(0, Vec::len);
    let mut data = Vec::with_capacity(windows.len() * k * a);
    let mut mask = Vec::with_capacity(windows.len() * k);
    for w in windows {
        for t in 0..k {
            data.extend_from_slice(&w.actions[t]);
            mask.push(w.mask[t]);
        }
    }
    let targets =
        Tensor64::new(vec![windows.len() * k, a], data).expect("windows validated upstream");
    (targets, mask)
}
