use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{matmul, matmul_nt, matmul_tn, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    LinearProbe,
    Mlp,
    Nmtune,
}

impl HeadKind {
    pub const ALL: [HeadKind; 3] = [HeadKind::LinearProbe, HeadKind::Mlp, HeadKind::Nmtune];

    /// Short name used on the command line and in reports.
    pub fn as_str(&self) -> &'static str {
        match self {
            HeadKind::LinearProbe => "lp",
            HeadKind::Mlp => "mlp",
            HeadKind::Nmtune => "nmtune",
        }
    }

    pub fn has_mlp(&self) -> bool {
        !matches!(self, HeadKind::LinearProbe)
    }
}

impl std::str::FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" | "linear_probe" => Ok(HeadKind::LinearProbe),
            "mlp" => Ok(HeadKind::Mlp),
            "nmtune" => Ok(HeadKind::Nmtune),
            other => Err(Error::Usage(format!("unknown head '{other}' (expected lp, mlp or nmtune)"))),
        }
    }
}

impl std::fmt::Display for HeadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    None,
}

/// Topology of a tuning head. MLP layers are square (`input_dim` wide) so the
/// transformed features live in the same space as the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub kind: HeadKind,
    pub input_dim: usize,
    pub num_classes: usize,
    pub mlp_layers: usize,
    pub activation: Activation,
}

impl HeadSpec {
    pub fn new(kind: HeadKind, input_dim: usize, num_classes: usize) -> Self {
        Self {
            kind,
            input_dim,
            num_classes,
            mlp_layers: if kind.has_mlp() { 2 } else { 0 },
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes == 0 {
            return Err(Error::Config("input_dim and num_classes must be positive".into()));
        }
        match (self.kind.has_mlp(), self.mlp_layers) {
            (false, 0) => Ok(()),
            (false, n) => Err(Error::Config(format!("linear probe cannot have {n} MLP layers"))),
            (true, n) if n >= 2 => Ok(()),
            (true, n) => Err(Error::Config(format!("{} head needs >= 2 MLP layers, got {n}", self.kind))),
        }
    }
}

/// Affine map `x W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weight: Matrix::zeros(inputs, outputs), bias: vec![0.0; outputs] }
    }

    /// Uniform weights in `[-bound, bound]`, zero bias.
    fn uniform(inputs: usize, outputs: usize, bound: f64, rng: &mut Rng) -> Self {
        let weight = Matrix::from_fn(inputs, outputs, |_, _| rng.uniform_in(-bound, bound));
        Self { weight, bias: vec![0.0; outputs] }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = matmul(x, &self.weight)?;
        for i in 0..y.rows() {
            for (v, b) in y.row_mut(i).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub spec: HeadSpec,
    pub mlp: Vec<Dense>,
    pub classifier: Dense,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each MLP layer (`layer_inputs[0]` is F).
    pub layer_inputs: Vec<Matrix>,
    pub z: Matrix,
    pub logits: Matrix,
}

/// Gradients laid out like [`Head`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrads {
    pub mlp: Vec<Dense>,
    pub classifier: Dense,
}

impl Head {
    /// Kaiming-uniform MLP weights (`sqrt(6 / fan_in)`), classifier weights
    /// uniform in `±1/sqrt(fan_in)`, all biases zero.
    pub fn init(spec: HeadSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let d = spec.input_dim;
        let mlp = (0..spec.mlp_layers)
            .map(|_| Dense::uniform(d, d, (6.0 / d as f64).sqrt(), rng))
            .collect();
        let classifier = Dense::uniform(d, spec.num_classes, 1.0 / (d as f64).sqrt(), rng);
        Ok(Self { spec, mlp, classifier })
    }

    pub fn forward(&self, f: &Matrix) -> Result<(Matrix, Matrix)> {
        let cache = self.forward_cached(f)?;
        Ok((cache.z, cache.logits))
    }

    pub fn forward_cached(&self, f: &Matrix) -> Result<ForwardCache> {
        if f.cols() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "head expects {} input features, got {}",
                self.spec.input_dim,
                f.cols()
            )));
        }
        let mut layer_inputs = Vec::with_capacity(self.mlp.len());
        let mut x = f.clone();
        let last = self.mlp.len().saturating_sub(1);
        for (l, layer) in self.mlp.iter().enumerate() {
            let mut y = layer.forward(&x)?;
            if l < last && self.spec.activation == Activation::Relu {
                y.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            }
            layer_inputs.push(std::mem::replace(&mut x, y));
        }
        let logits = self.classifier.forward(&x)?;
        Ok(ForwardCache { layer_inputs, z: x, logits })
    }

    /// Backpropagates `d_logits` plus any extra gradient arriving directly at
    /// `Z` (the regularizers).
    pub fn backward(&self, cache: &ForwardCache, d_logits: &Matrix, d_z_extra: &Matrix) -> Result<HeadGrads> {
        let classifier = Dense {
            weight: matmul_tn(&cache.z, d_logits)?,
            bias: column_sums(d_logits),
        };
        let mut dz = matmul_nt(d_logits, &self.classifier.weight)?;
        dz.add_scaled(1.0, d_z_extra)?;

        let mut mlp = vec![Dense::zeros(0, 0); self.mlp.len()];
        let last = self.mlp.len().saturating_sub(1);
        for l in (0..self.mlp.len()).rev() {
            let input = &cache.layer_inputs[l];
            mlp[l] = Dense { weight: matmul_tn(input, &dz)?, bias: column_sums(&dz) };
            if l > 0 {
                let mut dx = matmul_nt(&dz, &self.mlp[l].weight)?;
                // `input` is the ReLU output of layer l-1; zero where it was clipped.
                if l - 1 < last && self.spec.activation == Activation::Relu {
                    for (g, a) in dx.as_mut_slice().iter_mut().zip(input.as_slice()) {
                        if *a <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
                dz = dx;
            }
        }
        Ok(HeadGrads { mlp, classifier })
    }

    /// Argmax class per row; ties go to the lower index.
    pub fn predict(&self, f: &Matrix) -> Result<Vec<u32>> {
        let (_, logits) = self.forward(f)?;
        Ok((0..logits.rows())
            .map(|i| {
                let row = logits.row(i);
                let mut best = 0;
                for (j, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = j;
                    }
                }
                best as u32
            })
            .collect())
    }

    /// Every parameter tensor with its weight-decay flag, in a fixed order:
    /// MLP layers (weight, bias) then the classifier (weight, bias).
    pub fn tensors_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        let mut out = Vec::with_capacity(2 * self.mlp.len() + 2);
        for layer in self.mlp.iter_mut().chain(std::iter::once(&mut self.classifier)) {
            out.push((layer.weight.as_mut_slice(), true));
            out.push((layer.bias.as_mut_slice(), false));
        }
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.mlp
            .iter()
            .chain(std::iter::once(&self.classifier))
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

impl HeadGrads {
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.mlp
            .iter()
            .chain(std::iter::once(&self.classifier))
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }
}

fn column_sums(x: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for (o, v) in out.iter_mut().zip(x.row(i)) {
            *o += v;
        }
    }
    out
}
