//! Reference instances and random generators shared by tests, the
//! verification suites, and benchmarks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::Matrix;
use crate::net::{Activation, Dataset, Network};

/// `W_1 = [[1,−2],[−3,4]]`, `W_2 = [[1,1]]`, ReLU.
pub fn net_a() -> Network {
    Network::new(
        vec![
            Matrix::from_rows(&[[1.0, -2.0], [-3.0, 4.0]]),
            Matrix::from_rows(&[[1.0, 1.0]]),
        ],
        Activation::Relu,
    )
    .expect("valid")
}

/// `{[1,0], [0,−1], [−1,1]}`.
pub fn s_a() -> Dataset {
    Dataset::from_rows(&[[1.0, 0.0], [0.0, -1.0], [-1.0, 1.0]]).expect("valid")
}

/// Single-path 1-1-1 network with weights `(2)`, `(−3)`.
pub fn chain_111() -> Network {
    Network::new(
        vec![Matrix::from_rows(&[[2.0]]), Matrix::from_rows(&[[-3.0]])],
        Activation::Relu,
    )
    .expect("valid")
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Standard-normal weights with the given `[d_0, …, d_L]`.
pub fn network_with_dims<R: Rng + ?Sized>(rng: &mut R, dims: &[usize], act: Activation) -> Network {
    let layers = dims
        .windows(2)
        .map(|w| gaussian_matrix(rng, w[1], w[0]))
        .collect();
    Network::new(layers, act).expect("valid dims")
}

/// Depth-`depth` network, every width drawn uniformly from `1..=max_width`.
pub fn random_network<R: Rng + ?Sized>(
    rng: &mut R,
    depth: usize,
    max_width: usize,
    act: Activation,
) -> Network {
    let dims: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=max_width)).collect();
    network_with_dims(rng, &dims, act)
}

/// `n` standard-normal points in `d` dimensions.
pub fn gaussian_dataset<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Dataset {
    Dataset::new(gaussian_matrix(rng, n, d), None).expect("valid")
}

/// Labels each point with the network's own argmax decision.
pub fn self_labelled<R: Rng + ?Sized>(rng: &mut R, net: &Network, n: usize) -> Dataset {
    let data = gaussian_dataset(rng, n, net.input_dim());
    let labels = data
        .rows()
        .map(|x| argmax(&net.forward_unchecked(x)))
        .collect();
    data.with_labels(labels).expect("valid")
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
