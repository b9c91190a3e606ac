//! The neural machinery: message network, memory updaters and memory generators.

pub(crate) mod engine;
mod generator;
mod time;

pub use engine::{BatchForward, MemoryTable};
pub use generator::{GenQuery, GenerationOutput};
pub use time::TimeEncoder;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::memory::NodeMemory;
use crate::stream::TemporalEdge;
use crate::tensor::{init_uniform, Graph, ParamId, ParamStore, Shape, Var};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Updater {
    #[default]
    Gru,
    Mlp,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Generator {
    #[default]
    Tgat,
    Gat,
    Sum,
}

impl fmt::Display for Updater {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Updater::Gru => "gru",
            Updater::Mlp => "mlp",
        })
    }
}

impl FromStr for Updater {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gru" => Ok(Updater::Gru),
            "mlp" => Ok(Updater::Mlp),
            _ => Err(Error::Config(format!("unknown updater '{s}' (expected gru or mlp)"))),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::Tgat => "tgat",
            Generator::Gat => "gat",
            Generator::Sum => "sum",
        })
    }
}

impl FromStr for Generator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tgat" => Ok(Generator::Tgat),
            "gat" => Ok(Generator::Gat),
            "sum" => Ok(Generator::Sum),
            _ => Err(Error::Config(format!("unknown generator '{s}' (expected tgat, gat or sum)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub memory_dim: usize,
    pub message_dim: usize,
    pub time_dim: usize,
    /// Neighbor buffer capacity `k`.
    pub neighbors: usize,
    pub heads: usize,
    pub dropout: f64,
    pub time_alpha: f64,
    pub time_beta: f64,
    pub updater: Updater,
    pub generator: Generator,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            memory_dim: 256,
            message_dim: 128,
            time_dim: 256,
            neighbors: 20,
            heads: 2,
            dropout: 0.1,
            time_alpha: 10.0,
            time_beta: 25.6,
            updater: Updater::Gru,
            generator: Generator::Tgat,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.memory_dim == 0 || self.message_dim == 0 || self.time_dim == 0 {
            return fail("model dimensions must be positive".into());
        }
        if self.heads == 0 || !self.memory_dim.is_multiple_of(self.heads) {
            return fail(format!(
                "memory_dim {} must be divisible by heads {}",
                self.memory_dim, self.heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(self.time_alpha > 0.0 && self.time_beta > 0.0) {
            return fail("time_alpha and time_beta must be positive".into());
        }
        Ok(())
    }

    /// Width of a raw message `[s || phi(dt)]`.
    pub fn raw_message_dim(&self) -> usize {
        self.memory_dim + self.time_dim
    }

    pub fn head_dim(&self) -> usize {
        self.memory_dim / self.heads
    }
}

#[derive(Clone, Debug)]
struct Affine {
    weight: ParamId,
    bias: Option<ParamId>,
}

impl Affine {
    fn register(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        bias: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let weight = store.register(
            format!("{name}.weight"),
            init_uniform(Shape::Matrix(fan_in, fan_out), fan_in, rng),
        )?;
        let bias = if bias {
            Some(store.register(
                format!("{name}.bias"),
                init_uniform(Shape::Vector(fan_out), fan_in, rng),
            )?)
        } else {
            None
        };
        Ok(Affine { weight, bias })
    }

    fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let w = g.param(self.weight);
        let y = g.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = g.param(b);
                g.add_row(y, b)
            }
            None => Ok(y),
        }
    }
}

#[derive(Clone, Debug)]
struct GruParams {
    w_z: ParamId,
    u_z: ParamId,
    b_z: ParamId,
    w_r: ParamId,
    u_r: ParamId,
    b_r: ParamId,
    w_h: ParamId,
    u_h: ParamId,
    b_h: ParamId,
}

#[derive(Clone, Debug)]
enum UpdaterParams {
    Gru(GruParams),
    Mlp(Affine),
}

#[derive(Clone, Debug)]
struct HeadParams {
    query: Affine,
    key: ParamId,
    value: Affine,
}

#[derive(Clone, Debug)]
enum GeneratorParams {
    Attention {
        heads: Vec<HeadParams>,
        output: Affine,
    },
    Sum {
        w1: ParamId,
        w2: ParamId,
    },
}

/// Model parameters plus the fixed time encoder.
#[derive(Clone, Debug)]
pub struct Slade {
    config: ModelConfig,
    time: TimeEncoder,
    params: ParamStore,
    message: Affine,
    updater: UpdaterParams,
    generator: GeneratorParams,
}

impl Slade {
    /// Builds a model with uniformly initialised parameters.
    ///
    /// Only the layers of the configured updater and generator are created,
    /// so every stored parameter receives gradient.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (ds, dm, dt) = (config.memory_dim, config.message_dim, config.time_dim);
        let raw = config.raw_message_dim();

        let message = Affine::register(&mut store, "message", raw, dm, true, &mut rng)?;

        let updater = match config.updater {
            Updater::Gru => {
                let mut mat = |name: &str, rows: usize, rng: &mut ChaCha8Rng| {
                    store.register(
                        format!("gru.{name}"),
                        init_uniform(Shape::Matrix(rows, ds), ds, rng),
                    )
                };
                let w_z = mat("w_z", dm, &mut rng)?;
                let u_z = mat("u_z", ds, &mut rng)?;
                let w_r = mat("w_r", dm, &mut rng)?;
                let u_r = mat("u_r", ds, &mut rng)?;
                let w_h = mat("w_h", dm, &mut rng)?;
                let u_h = mat("u_h", ds, &mut rng)?;
                let mut bias = |name: &str, rng: &mut ChaCha8Rng| {
                    store.register(format!("gru.{name}"), init_uniform(Shape::Vector(ds), ds, rng))
                };
                let b_z = bias("b_z", &mut rng)?;
                let b_r = bias("b_r", &mut rng)?;
                let b_h = bias("b_h", &mut rng)?;
                UpdaterParams::Gru(GruParams {
                    w_z,
                    u_z,
                    b_z,
                    w_r,
                    u_r,
                    b_r,
                    w_h,
                    u_h,
                    b_h,
                })
            }
            Updater::Mlp => {
                UpdaterParams::Mlp(Affine::register(&mut store, "mlp_update", dm + ds, ds, true, &mut rng)?)
            }
        };

        let generator = match config.generator {
            Generator::Tgat | Generator::Gat => {
                let (dq, dkv) = if config.generator == Generator::Tgat {
                    (dt, raw)
                } else {
                    (ds, ds)
                };
                let dh = config.head_dim();
                let mut heads = Vec::with_capacity(config.heads);
                for h in 0..config.heads {
                    let query = Affine::register(&mut store, &format!("attn.{h}.query"), dq, dh, true, &mut rng)?;
                    let key = store.register(
                        format!("attn.{h}.key.weight"),
                        init_uniform(Shape::Matrix(dkv, dh), dkv, &mut rng),
                    )?;
                    let value = Affine::register(&mut store, &format!("attn.{h}.value"), dkv, dh, true, &mut rng)?;
                    heads.push(HeadParams { query, key, value });
                }
                let output = Affine::register(&mut store, "attn.output", ds, ds, true, &mut rng)?;
                GeneratorParams::Attention { heads, output }
            }
            Generator::Sum => {
                let w1 = store.register("sum.w1", init_uniform(Shape::Matrix(raw, ds), raw, &mut rng))?;
                let w2 = store.register("sum.w2", init_uniform(Shape::Matrix(ds + dt, ds), ds + dt, &mut rng))?;
                GeneratorParams::Sum { w1, w2 }
            }
        };

        Ok(Slade {
            time: TimeEncoder::new(config.time_alpha, config.time_beta, config.time_dim)?,
            config,
            params: store,
            message,
            updater,
            generator,
        })
    }

    /// Rebuilds a model around previously saved parameter values.
    ///
    /// Names and shapes must match the layout that `new` would produce.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let mut model = Slade::new(config, 0)?;
        if params.len() != model.params.len() {
            return Err(Error::Format(format!(
                "expected {} parameter tensors, found {}",
                model.params.len(),
                params.len()
            )));
        }
        for ((_, want), (_, got)) in model.params.iter().zip(params.iter()) {
            if want.name != got.name || want.shape() != got.shape() {
                return Err(Error::Format(format!(
                    "parameter mismatch: expected {} {}, found {} {}",
                    want.name,
                    want.shape(),
                    got.name,
                    got.shape()
                )));
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn time_encoder(&self) -> &TimeEncoder {
        &self.time
    }

    pub fn time_encode(&self, dt: f64) -> Result<Vec<f64>> {
        self.time.encode(dt)
    }

    /// Raw messages for both endpoints of `edge`.
    ///
    /// Each message pairs the other endpoint's memory with the encoded gap
    /// since the receiving endpoint's own last interaction (zero on first contact).
    pub fn build_raw_messages(
        &self,
        edge: &TemporalEdge,
        mem_i: &NodeMemory,
        mem_j: &NodeMemory,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let ds = self.config.memory_dim;
        if mem_i.s.len() != ds || mem_j.s.len() != ds {
            return Err(Error::dim("build_raw_messages", "memory width differs from memory_dim"));
        }
        let r_i = self.raw_message(&mem_j.s, edge.timestamp, mem_i.last_time)?;
        let r_j = self.raw_message(&mem_i.s, edge.timestamp, mem_j.last_time)?;
        Ok((r_i, r_j))
    }

    pub(crate) fn raw_message(&self, other: &[f64], t: f64, last: Option<f64>) -> Result<Vec<f64>> {
        let ds = self.config.memory_dim;
        let mut r = vec![0.0; ds + self.config.time_dim];
        r[..ds].copy_from_slice(other);
        let gap = last.map_or(0.0, |l| t - l);
        self.time.encode_into(gap, &mut r[ds..])?;
        Ok(r)
    }

    /// `relu(r W + b)` applied to each row of `r`.
    pub fn message_net(&self, g: &mut Graph<'_>, r: Var) -> Result<Var> {
        let y = self.message.forward(g, r)?;
        Ok(g.relu(y))
    }

    /// Applies the configured updater row-wise.
    pub fn update(&self, g: &mut Graph<'_>, m: Var, s: Var) -> Result<Var> {
        match &self.updater {
            UpdaterParams::Gru(p) => gru_forward(p, g, m, s),
            UpdaterParams::Mlp(a) => {
                let x = g.hcat(&[m, s])?;
                let y = a.forward(g, x)?;
                Ok(g.relu(y))
            }
        }
    }
}

fn gate(
    g: &mut Graph<'_>,
    x: Var,
    w: ParamId,
    h: Var,
    u: ParamId,
    b: ParamId,
) -> Result<Var> {
    let w = g.param(w);
    let u = g.param(u);
    let b = g.param(b);
    let xw = g.matmul(x, w)?;
    let hu = g.matmul(h, u)?;
    let sum = g.add(xw, hu)?;
    g.add_row(sum, b)
}

fn gru_forward(p: &GruParams, g: &mut Graph<'_>, m: Var, s: Var) -> Result<Var> {
    let z = gate(g, m, p.w_z, s, p.u_z, p.b_z)?;
    let z = g.sigmoid(z);
    let r = gate(g, m, p.w_r, s, p.u_r, p.b_r)?;
    let r = g.sigmoid(r);
    let rs = g.mul(r, s)?;
    let h = gate(g, m, p.w_h, rs, p.u_h, p.b_h)?;
    let h = g.tanh(h);
    // (1 - z) s + z h  ==  s + z (h - s)
    let diff = g.sub(h, s)?;
    let step = g.mul(z, diff)?;
    g.add(s, step)
}
