use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::linalg::Scalar;
use crate::error::{Error, Result};

pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub dropout: f32,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            vocab_size: 0,
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 256,
            max_len: 128,
            dropout: 0.1,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.vocab_size <= crate::corpus::NUM_SPECIALS {
            return fail(format!("vocab_size must exceed {} (got {})", crate::corpus::NUM_SPECIALS, self.vocab_size));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_ff == 0 {
            return fail("d_model, n_heads and d_ff must be positive".into());
        }
        if self.d_model % self.n_heads != 0 {
            return fail(format!("d_model {} not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.max_len < 3 {
            return fail(format!("max_len must be >= 3 (got {})", self.max_len));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1) (got {})", self.dropout));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Closed-form number of learnable scalars.
    pub fn num_parameters(&self) -> usize {
        let (v, d, f, l) = (self.vocab_size, self.d_model, self.d_ff, self.max_len);
        let embeddings = v * d + l * d + 2 * d;
        let layer = 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d) + 2 * d;
        let pooler = d * d + d;
        let head = d * d + d + 2 * d + v;
        embeddings + self.n_layers * layer + pooler + head
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    pub shape: Vec<usize>,
    pub data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![F::zero(); shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], v: F) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![v; shape.iter().product()] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| G::from_f64(v.to_f64().unwrap()).unwrap()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub wq: Tensor<F>,
    pub bq: Tensor<F>,
    pub wk: Tensor<F>,
    pub bk: Tensor<F>,
    pub wv: Tensor<F>,
    pub bv: Tensor<F>,
    pub wo: Tensor<F>,
    pub bo: Tensor<F>,
    pub ln1_gain: Tensor<F>,
    pub ln1_bias: Tensor<F>,
    pub w1: Tensor<F>,
    pub b1: Tensor<F>,
    pub w2: Tensor<F>,
    pub b2: Tensor<F>,
    pub ln2_gain: Tensor<F>,
    pub ln2_bias: Tensor<F>,
}

/// Every learnable tensor of the encoder. Weight matrices are stored
/// `[in x out]`. The MLM output projection reuses `token_emb`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<F> {
    pub token_emb: Tensor<F>,
    pub pos_emb: Tensor<F>,
    pub emb_ln_gain: Tensor<F>,
    pub emb_ln_bias: Tensor<F>,
    pub layers: Vec<LayerParams<F>>,
    pub pooler_w: Tensor<F>,
    pub pooler_b: Tensor<F>,
    pub mlm_w: Tensor<F>,
    pub mlm_b: Tensor<F>,
    pub mlm_ln_gain: Tensor<F>,
    pub mlm_ln_bias: Tensor<F>,
    pub mlm_out_bias: Tensor<F>,
}

macro_rules! layer_fields {
    ($m:ident) => {
        $m!(
            wq "attn.query.weight", bq "attn.query.bias",
            wk "attn.key.weight", bk "attn.key.bias",
            wv "attn.value.weight", bv "attn.value.bias",
            wo "attn.output.weight", bo "attn.output.bias",
            ln1_gain "attn.ln.gain", ln1_bias "attn.ln.bias",
            w1 "ffn.in.weight", b1 "ffn.in.bias",
            w2 "ffn.out.weight", b2 "ffn.out.bias",
            ln2_gain "ffn.ln.gain", ln2_bias "ffn.ln.bias"
        )
    };
}

impl<F: Scalar> LayerParams<F> {
    fn zeros(d: usize, ff: usize) -> Self {
        LayerParams {
            wq: Tensor::zeros(&[d, d]),
            bq: Tensor::zeros(&[d]),
            wk: Tensor::zeros(&[d, d]),
            bk: Tensor::zeros(&[d]),
            wv: Tensor::zeros(&[d, d]),
            bv: Tensor::zeros(&[d]),
            wo: Tensor::zeros(&[d, d]),
            bo: Tensor::zeros(&[d]),
            ln1_gain: Tensor::zeros(&[d]),
            ln1_bias: Tensor::zeros(&[d]),
            w1: Tensor::zeros(&[d, ff]),
            b1: Tensor::zeros(&[ff]),
            w2: Tensor::zeros(&[ff, d]),
            b2: Tensor::zeros(&[d]),
            ln2_gain: Tensor::zeros(&[d]),
            ln2_bias: Tensor::zeros(&[d]),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        macro_rules! push {
            ($($field:ident $name:literal),*) => { $( out.push((format!("{prefix}.{}", $name), &self.$field)); )* };
        }
        layer_fields!(push);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        macro_rules! push {
            ($($field:ident $name:literal),*) => { $( out.push((format!("{prefix}.{}", $name), &mut self.$field)); )* };
        }
        layer_fields!(push);
    }
}

impl<F: Scalar> EncoderParams<F> {
    /// All-zero tensors with the shapes implied by `config`; used as the
    /// gradient accumulator.
    pub fn zeros(config: &EncoderConfig) -> Self {
        let (v, d, ff) = (config.vocab_size, config.d_model, config.d_ff);
        EncoderParams {
            token_emb: Tensor::zeros(&[v, d]),
            pos_emb: Tensor::zeros(&[config.max_len, d]),
            emb_ln_gain: Tensor::zeros(&[d]),
            emb_ln_bias: Tensor::zeros(&[d]),
            layers: (0..config.n_layers).map(|_| LayerParams::zeros(d, ff)).collect(),
            pooler_w: Tensor::zeros(&[d, d]),
            pooler_b: Tensor::zeros(&[d]),
            mlm_w: Tensor::zeros(&[d, d]),
            mlm_b: Tensor::zeros(&[d]),
            mlm_ln_gain: Tensor::zeros(&[d]),
            mlm_ln_bias: Tensor::zeros(&[d]),
            mlm_out_bias: Tensor::zeros(&[v]),
        }
    }

    /// Deterministic initialization: weight matrices and embeddings from a
    /// normal(0, 0.02) truncated at two standard deviations, biases zero,
    /// layer-norm gains one. Values are drawn in f64, so f32 and f64
    /// parameter sets from the same seed agree up to rounding.
    pub fn init(config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut params = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        for (name, t) in params.named_tensors_mut() {
            if name.ends_with(".gain") {
                t.data.iter_mut().for_each(|v| *v = F::one());
            } else if t.shape.len() == 2 {
                for v in t.data.iter_mut() {
                    let x = loop {
                        let x: f64 = normal.sample(&mut rng);
                        if x.abs() <= 2.0 * INIT_STD {
                            break x;
                        }
                    };
                    *v = F::c(x);
                }
            }
        }
        Ok(params)
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor<F>)> {
        let mut out = vec![
            ("embeddings.token".to_string(), &self.token_emb),
            ("embeddings.position".to_string(), &self.pos_emb),
            ("embeddings.ln.gain".to_string(), &self.emb_ln_gain),
            ("embeddings.ln.bias".to_string(), &self.emb_ln_bias),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            layer.visit(&format!("layer{i}"), &mut out);
        }
        out.extend([
            ("pooler.weight".to_string(), &self.pooler_w),
            ("pooler.bias".to_string(), &self.pooler_b),
            ("mlm.transform.weight".to_string(), &self.mlm_w),
            ("mlm.transform.bias".to_string(), &self.mlm_b),
            ("mlm.ln.gain".to_string(), &self.mlm_ln_gain),
            ("mlm.ln.bias".to_string(), &self.mlm_ln_bias),
            ("mlm.output.bias".to_string(), &self.mlm_out_bias),
        ]);
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        let mut out = vec![
            ("embeddings.token".to_string(), &mut self.token_emb),
            ("embeddings.position".to_string(), &mut self.pos_emb),
            ("embeddings.ln.gain".to_string(), &mut self.emb_ln_gain),
            ("embeddings.ln.bias".to_string(), &mut self.emb_ln_bias),
        ];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.visit_mut(&format!("layer{i}"), &mut out);
        }
        out.extend([
            ("pooler.weight".to_string(), &mut self.pooler_w),
            ("pooler.bias".to_string(), &mut self.pooler_b),
            ("mlm.transform.weight".to_string(), &mut self.mlm_w),
            ("mlm.transform.bias".to_string(), &mut self.mlm_b),
            ("mlm.ln.gain".to_string(), &mut self.mlm_ln_gain),
            ("mlm.ln.bias".to_string(), &mut self.mlm_ln_bias),
            ("mlm.output.bias".to_string(), &mut self.mlm_out_bias),
        ]);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &EncoderParams<F>) {
        for ((_, a), (_, b)) in self.named_tensors_mut().into_iter().zip(other.named_tensors()) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: F) {
        for (_, t) in self.named_tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<String> {
        self.named_tensors()
            .into_iter()
            .find(|(_, t)| t.data.iter().any(|v| !v.is_finite()))
            .map(|(name, _)| name)
    }

    pub fn cast<G: Scalar>(&self) -> EncoderParams<G> {
        let cast_layer = |l: &LayerParams<F>| LayerParams {
            wq: l.wq.cast(),
            bq: l.bq.cast(),
            wk: l.wk.cast(),
            bk: l.bk.cast(),
            wv: l.wv.cast(),
            bv: l.bv.cast(),
            wo: l.wo.cast(),
            bo: l.bo.cast(),
            ln1_gain: l.ln1_gain.cast(),
            ln1_bias: l.ln1_bias.cast(),
            w1: l.w1.cast(),
            b1: l.b1.cast(),
            w2: l.w2.cast(),
            b2: l.b2.cast(),
            ln2_gain: l.ln2_gain.cast(),
            ln2_bias: l.ln2_bias.cast(),
        };
        EncoderParams {
            token_emb: self.token_emb.cast(),
            pos_emb: self.pos_emb.cast(),
            emb_ln_gain: self.emb_ln_gain.cast(),
            emb_ln_bias: self.emb_ln_bias.cast(),
            layers: self.layers.iter().map(cast_layer).collect(),
            pooler_w: self.pooler_w.cast(),
            pooler_b: self.pooler_b.cast(),
            mlm_w: self.mlm_w.cast(),
            mlm_b: self.mlm_b.cast(),
            mlm_ln_gain: self.mlm_ln_gain.cast(),
            mlm_ln_bias: self.mlm_ln_bias.cast(),
            mlm_out_bias: self.mlm_out_bias.cast(),
        }
    }
}
