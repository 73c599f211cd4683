//! Bias-free positive homogeneous feed-forward networks and their
//! sign-split (node-doubled) nonnegative form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::par::{self, Exec};

/// Positive homogeneous, 1-Lipschitz activations with `φ(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    LeakyRelu { alpha: f64 },
    Identity,
}

impl Activation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::LeakyRelu { alpha } if !(alpha > 0.0 && alpha <= 1.0) => Err(
                Error::InvalidNetwork(format!("leaky-relu slope {alpha} outside (0, 1]")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu { alpha } => {
                if z >= 0.0 {
                    z
                } else {
                    alpha * z
                }
            }
            Activation::Identity => z,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu { .. } => "leaky-relu",
            Activation::Identity => "identity",
        }
    }
}

/// Sign of a weight; zero counts as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Pos,
    #[serde(rename = "-")]
    Neg,
}

impl Sign {
    #[inline]
    pub fn of(w: f64) -> Sign {
        if w < 0.0 {
            Sign::Neg
        } else {
            Sign::Pos
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Pos => 1.0,
            Sign::Neg => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Pos => '+',
            Sign::Neg => '-',
        }
    }

    pub fn parse(s: &str) -> Option<Sign> {
        match s {
            "+" | "pos" | "1" => Some(Sign::Pos),
            "-" | "neg" | "-1" => Some(Sign::Neg),
            _ => None,
        }
    }

    /// Offset of this copy in the doubled index layout `[+ copies, − copies]`.
    #[inline]
    pub fn doubled_index(self, i: usize, width: usize) -> usize {
        match self {
            Sign::Pos => i,
            Sign::Neg => width + i,
        }
    }
}

/// `f(x) = W_L φ(W_{L-1} φ(⋯ φ(W_1 x)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Matrix>,
    activation: Activation,
}

impl Network {
    pub fn new(layers: Vec<Matrix>, activation: Activation) -> Result<Self> {
        activation.validate()?;
        if layers.len() < 2 {
            return Err(Error::InvalidNetwork(format!(
                "need at least 2 layers, got {}",
                layers.len()
            )));
        }
        for (l, w) in layers.iter().enumerate() {
            if w.rows() == 0 || w.cols() == 0 {
                return Err(Error::InvalidNetwork(format!("layer {} is empty", l + 1)));
            }
            if !w.is_finite() {
                return Err(Error::NonFinite("network weights"));
            }
            if l > 0 && layers[l - 1].rows() != w.cols() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} expects {} inputs but layer {} has {} outputs",
                    l + 1,
                    w.cols(),
                    l,
                    layers[l - 1].rows()
                )));
            }
        }
        Ok(Network { layers, activation })
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    /// Weight matrix `W_ℓ`, 1-based.
    pub fn layer(&self, l: usize) -> &Matrix {
        &self.layers[l - 1]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Number of weight layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `[d_0, d_1, …, d_L]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].cols())
            .chain(self.layers.iter().map(Matrix::rows))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows()
    }

    /// `d_0·d_1⋯d_L` as a float (it overflows integers quickly).
    pub fn path_count(&self) -> f64 {
        self.dims().iter().map(|&d| d as f64).product()
    }

    pub fn map_layers(&self, f: impl Fn(usize, &Matrix) -> Matrix) -> Result<Network> {
        Network::new(
            self.layers.iter().enumerate().map(|(i, w)| f(i + 1, w)).collect(),
            self.activation,
        )
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
                context: "network input",
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.to_vec();
        for (l, w) in self.layers.iter().enumerate() {
            h = w.matvec(&h);
            if l < last {
                for v in &mut h {
                    *v = self.activation.apply(*v);
                }
            }
        }
        h
    }

    /// Row `i` of the result is `forward(X[i])`.
    pub fn forward_batch(&self, data: &Dataset) -> Result<Matrix> {
        self.forward_batch_with(data, Exec::default())
    }

    pub fn forward_batch_with(&self, data: &Dataset, exec: Exec) -> Result<Matrix> {
        if data.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: data.dim(),
                context: "dataset feature count",
            });
        }
        let rows = par::map_range(exec, data.len(), |i| self.forward_unchecked(data.row(i)));
        let k = self.output_dim();
        Matrix::from_vec(data.len(), k, rows.into_iter().flatten().collect())
    }

    /// Rewrites the network over doubled `(unit, sign)` indices with
    /// nonnegative weights.
    pub fn sign_split(&self) -> DoubledNetwork {
        let last = self.layers.len() - 1;
        let mut abs_layers = Vec::with_capacity(self.layers.len());
        let mut signs = Vec::with_capacity(self.layers.len());
        for (l, w) in self.layers.iter().enumerate() {
            let (rows_out, cols_in) = (w.rows(), w.cols());
            let row_copies = if l < last { 2 } else { 1 };
            let mut m = Matrix::zeros(rows_out * row_copies, 2 * cols_in);
            for j in 0..rows_out {
                for i in 0..cols_in {
                    let v = w[(j, i)];
                    let col = Sign::of(v).doubled_index(i, cols_in);
                    for c in 0..row_copies {
                        m[(j + c * rows_out, col)] = v.abs();
                    }
                }
            }
            abs_layers.push(m);
            signs.push(w.as_slice().iter().map(|&v| Sign::of(v)).collect());
        }
        DoubledNetwork {
            layers: abs_layers,
            signs,
            activation: self.activation,
            source_dims: self.dims(),
        }
    }
}

/// Nonnegative node-doubled form of a [`Network`].
///
/// Hidden units and inputs are laid out as `[(0,+)…(d-1,+), (0,−)…(d-1,−)]`.
/// Unit `(i, σ)` emits `σ·φ(z_i)` (inputs emit `σ·x_i`); the output layer is
/// not doubled.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubledNetwork {
    layers: Vec<Matrix>,
    signs: Vec<Vec<Sign>>,
    activation: Activation,
    source_dims: Vec<usize>,
}

impl DoubledNetwork {
    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    /// Per-edge sign of the original weight, row-major like `W_ℓ`.
    pub fn sign_tags(&self, l: usize) -> &[Sign] {
        &self.signs[l - 1]
    }

    /// `[2d_0, 2d_1, …, 2d_{L-1}, k]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].cols())
            .chain(self.layers.iter().map(Matrix::rows))
            .collect()
    }

    pub fn source_dims(&self) -> &[usize] {
        &self.source_dims
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.source_dims[0];
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
                context: "doubled network input",
            });
        }
        let mut h: Vec<f64> = x.iter().copied().chain(x.iter().map(|v| -v)).collect();
        let last = self.layers.len() - 1;
        for (l, w) in self.layers.iter().enumerate() {
            h = w.matvec(&h);
            if l < last {
                let half = h.len() / 2;
                for (idx, v) in h.iter_mut().enumerate() {
                    let phi = self.activation.apply(*v);
                    *v = if idx < half { phi } else { -phi };
                }
            }
        }
        Ok(h)
    }
}

/// Inputs `X` (n × d) with optional 0-based class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(x: Matrix, labels: Option<Vec<usize>>) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        if x.cols() == 0 {
            return Err(Error::InvalidDataset("dataset has no feature columns".into()));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("dataset"));
        }
        if let Some(y) = &labels {
            if y.len() != x.rows() {
                return Err(Error::DimensionMismatch {
                    expected: x.rows(),
                    got: y.len(),
                    context: "label count",
                });
            }
        }
        Ok(Dataset { x, labels })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Dataset::new(Matrix::from_rows(rows), None)
    }

    pub fn with_labels(self, labels: Vec<usize>) -> Result<Self> {
        Dataset::new(self.x, Some(labels))
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.len()).map(move |i| self.x.row(i))
    }

    pub fn features(&self) -> &Matrix {
        &self.x
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Checks every label is below `k`.
    pub fn check_labels(&self, k: usize) -> Result<()> {
        if let Some(y) = &self.labels {
            if let Some(bad) = y.iter().find(|&&c| c >= k) {
                return Err(Error::InvalidDataset(format!(
                    "label {} out of range for {k} classes (labels are 1-based)",
                    bad + 1
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{net_a, random_network};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn net_a_forward() {
        let net = net_a();
        assert_eq!(net.forward(&[0.0, 0.0]).unwrap(), vec![0.0]);
        assert_eq!(net.forward(&[1.0, 0.0]).unwrap(), vec![1.0]);
        assert_eq!(net.forward(&[0.0, 1.0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = net_a();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            net.forward(&[f64::NAN, 0.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn forward_batch_rows() {
        let net = net_a();
        let s = Dataset::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let out = net.forward_batch(&s).unwrap();
        assert_eq!(out, Matrix::from_rows(&[[1.0], [4.0]]));
        let wrong = Dataset::from_rows(&[[1.0, 0.0, 2.0]]).unwrap();
        assert!(net.forward_batch(&wrong).is_err());
        assert!(Dataset::new(Matrix::zeros(1, 0), None).is_err());
    }

    #[test]
    fn identity_activation_is_linear() {
        let net = Network::new(net_a().layers().to_vec(), Activation::Identity).unwrap();
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn validation() {
        let w = Matrix::from_rows(&[[1.0]]);
        assert!(Network::new(vec![w.clone()], Activation::Relu).is_err());
        let bad = Matrix::from_rows(&[[1.0, 2.0]]);
        assert!(Network::new(vec![w.clone(), bad], Activation::Relu).is_err());
        assert!(Network::new(vec![w.clone(), w.clone()], Activation::LeakyRelu { alpha: 0.0 }).is_err());
        let inf = Matrix::from_rows(&[[f64::INFINITY]]);
        assert!(Network::new(vec![w, inf], Activation::Relu).is_err());
    }

    #[test]
    fn sign_split_net_a() {
        let dn = net_a().sign_split();
        assert_eq!(dn.dims(), vec![4, 4, 1]);
        let w1 = &dn.layers()[0];
        // row (0,+): 1 at (0,+), 2 at (1,-)
        assert_eq!(w1.row(0), &[1.0, 0.0, 0.0, 2.0]);
        assert_eq!(w1.row(0), w1.row(2));
        assert_eq!(w1.row(1), &[0.0, 4.0, 3.0, 0.0]);
        assert_eq!(dn.forward(&[1.0, 0.0]).unwrap(), vec![1.0]);
        assert_eq!(dn.forward(&[0.0, 0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn sign_split_nonnegative_net_has_empty_negative_columns() {
        let net = Network::new(
            vec![Matrix::from_rows(&[[1.0, 0.5], [0.0, 2.0]]), Matrix::from_rows(&[[1.0, 3.0]])],
            Activation::Relu,
        )
        .unwrap();
        let dn = net.sign_split();
        for w in dn.layers() {
            let half = w.cols() / 2;
            for j in half..w.cols() {
                assert!(w.col(j).all(|v| v == 0.0));
            }
        }
    }

    #[test]
    fn single_edge_doubled() {
        let net = Network::new(
            vec![Matrix::from_rows(&[[-2.0]]), Matrix::from_rows(&[[3.0]])],
            Activation::Relu,
        )
        .unwrap();
        assert_eq!(net.sign_split().forward(&[-1.0]).unwrap(), vec![6.0]);
    }

    #[test]
    fn sign_split_equivalence_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for t in 0..100 {
            let act = match t % 3 {
                0 => Activation::Relu,
                1 => Activation::LeakyRelu { alpha: 0.1 },
                _ => Activation::Identity,
            };
            let net = random_network(&mut rng, 2 + t % 3, 5, act);
            let dn = net.sign_split();
            for w in dn.layers() {
                assert!(w.as_slice().iter().all(|&v| v >= 0.0));
            }
            for (l, w) in dn.layers().iter().enumerate().take(net.depth() - 1) {
                let h = w.rows() / 2;
                for j in 0..h {
                    assert_eq!(w.row(j), w.row(j + h), "layer {l}");
                }
            }
            let mut x: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = crate::linalg::norm_p(&x, 2.0);
            if n > 1.0 {
                x.iter_mut().for_each(|v| *v /= n);
            }
            let a = net.forward(&x).unwrap();
            let b = dn.forward(&x).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-12, "{u} vs {v}");
            }
        }
    }

    proptest! {
        #[test]
        fn positive_homogeneity(seed in 0u64..1000, alpha in 0.01f64..100.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let net = random_network(&mut rng, 3, 4, Activation::LeakyRelu { alpha: 0.2 });
            let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ax: Vec<f64> = x.iter().map(|v| v * alpha).collect();
            let f = net.forward(&x).unwrap();
            let fa = net.forward(&ax).unwrap();
            for (u, v) in f.iter().zip(&fa) {
                prop_assert!((alpha * u - v).abs() <= 1e-10 * (1.0 + v.abs()));
            }
        }

        #[test]
        fn activation_properties(z in -100.0f64..100.0, a in 0.001f64..1000.0) {
            for act in [Activation::Relu, Activation::LeakyRelu { alpha: 0.3 }, Activation::Identity] {
                prop_assert!((act.apply(a * z) - a * act.apply(z)).abs() <= 1e-12 * (1.0 + (a * z).abs()));
                prop_assert_eq!(act.apply(0.0), 0.0);
                prop_assert!((act.apply(z) - act.apply(z + 1.0)).abs() <= 1.0 + 1e-12);
            }
        }
    }
}
