//! Empirical checks of the approximation, likelihood, cardinality and
//! covering results.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::measures::{input_weights, InputWeighting, PathChain};
use crate::net::{Activation, Dataset, Network};
use crate::par::{self, Exec};
use crate::rng;
use crate::sampler::{
    empirical_markov, reconstruct, sample_paths_with, ConditionalSampler, EmpiricalMarkov, PathCounts,
    ReconstructedNetwork, SampleOptions,
};
use crate::scaled::LogScaled;

/// Mean, spread and normal-approximation interval of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std: f64,
    pub resamples: usize,
    pub ci95: (f64, f64),
}

impl MCEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let r = xs.len();
        let mean = xs.iter().sum::<f64>() / r as f64;
        let std = if r > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1) as f64).sqrt()
        } else {
            0.0
        };
        let half = 1.96 * std / (r as f64).sqrt();
        MCEstimate {
            mean,
            std,
            resamples: r,
            ci95: (mean - half, mean + half),
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        self.std / (self.resamples as f64).sqrt()
    }

    /// The estimate of `c·X` for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        MCEstimate {
            mean: self.mean * c,
            std: self.std * c,
            resamples: self.resamples,
            ci95: (self.ci95.0 * c, self.ci95.1 * c),
        }
    }
}

/// Mean over `R` resamples of `(1/n) Σ_x ‖f(x; W̃) − f(x; W)‖²`.
pub fn mc_error(net: &Network, data: &Dataset, q: f64, m: u64, r: usize, seed: u64) -> Result<MCEstimate> {
    if !(1.0..=2.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("q = {q} outside [1, 2]")));
    }
    let cs = ConditionalSampler::from_chain(PathChain::build(net, &input_weights(data, q)?)?)?;
    mc_error_with(&cs, data, m, r, seed, Exec::default())
}

pub fn mc_error_with(
    cs: &ConditionalSampler,
    data: &Dataset,
    m: u64,
    r: usize,
    seed: u64,
    exec: Exec,
) -> Result<MCEstimate> {
    if r < 2 {
        return Err(Error::InvalidArgument("need at least two resamples".into()));
    }
    let exact = cs.network().forward_batch_with(data, Exec::Sequential)?;
    let errors = par::map_range(exec, r, |i| resample_error(cs, data, &exact, m, rng::derive_seed(seed, i as u64)));
    let errors = errors.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MCEstimate::from_samples(&errors))
}

fn resample_error(cs: &ConditionalSampler, data: &Dataset, exact: &Matrix, m: u64, seed: u64) -> Result<f64> {
    let opts = SampleOptions {
        exec: Exec::Sequential,
        ..SampleOptions::default()
    };
    let counts = sample_paths_with(cs, m, seed, opts)?;
    let rec = ReconstructedNetwork::from_sampler(cs, &counts)?;
    let mut total = 0.0;
    for (i, x) in data.rows().enumerate() {
        let y = rec.forward(x)?;
        total += y.iter().zip(exact.row(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(total / data.len() as f64)
}

/// `(VζL/√M)²`.
pub fn theorem3_rhs(v: f64, zeta: f64, depth: usize, m: u64) -> f64 {
    (v * zeta * depth as f64).powi(2) / m as f64
}

/// Two-layer all-ones network with a balanced `±1` input, so `f(x; p) = 0`.
#[derive(Debug, Clone)]
pub struct LowerBoundInstance {
    pub net: Network,
    pub x: Vec<f64>,
    /// `½(1 + Σ_{j_1} √p_{j_1})`.
    pub xi1: f64,
}

pub fn lower_bound_instance(d: usize, d1: usize) -> Result<LowerBoundInstance> {
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("d = {d} must be even and at least 2")));
    }
    if d1 == 0 {
        return Err(Error::InvalidArgument("d1 must be positive".into()));
    }
    let net = Network::new(
        vec![Matrix::from_fn(d1, d, |_, _| 1.0), Matrix::from_fn(1, d1, |_, _| 1.0)],
        Activation::Relu,
    )?;
    let x: Vec<f64> = (0..d).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let chain = PathChain::build(&net, &InputWeighting::ones(d))?;
    let p1 = chain.marginal(1, crate::measures::Mode::Collapsed)?;
    let xi1 = 0.5 * (1.0 + crate::measures::renyi_half_exp(&p1));
    Ok(LowerBoundInstance { net, x, xi1 })
}

impl LowerBoundInstance {
    pub fn dataset(&self) -> Dataset {
        Dataset::from_rows(&[self.x.as_slice()]).expect("finite")
    }

    /// Sampler with `q = 1` weights from `{x}` (all ones).
    pub fn sampler(&self) -> Result<ConditionalSampler> {
        ConditionalSampler::from_chain(PathChain::build(&self.net, &input_weights(&self.dataset(), 1.0)?)?)
    }

    /// `E‖f(x; p̃) − f(x; p)‖²` without the `V²` factor.
    pub fn unscaled_error(&self, m: u64, r: usize, seed: u64) -> Result<MCEstimate> {
        let cs = self.sampler()?;
        let v = cs.variation().to_f64();
        Ok(mc_error_with(&cs, &self.dataset(), m, r, seed, Exec::default())?.scaled(1.0 / (v * v)))
    }
}

/// `ξ₁² / (32M)`.
pub fn lower_bound_rhs(xi1: f64, m: u64) -> f64 {
    xi1 * xi1 / (32.0 * m as f64)
}

/// Least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// A factored Markov distribution on sign-split edges: the top layer is a joint
/// over `(j_L, j_{L-1})`, lower layers are conditionals `p(j_{ℓ-1} | j_ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovCandidate {
    pub dims: Vec<usize>,
    /// `layers[ℓ-1][(target, source)]`.
    pub layers: Vec<BTreeMap<(usize, usize), f64>>,
}

impl MarkovCandidate {
    pub fn from_empirical(em: &EmpiricalMarkov) -> Self {
        MarkovCandidate {
            dims: em.dims.clone(),
            layers: em
                .layers
                .iter()
                .map(|l| l.iter().map(|e| ((e.target, e.source), e.p.value())).collect())
                .collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `Σ_ℓ ln p` along the doubled edges of a path, `-∞` on a missing edge.
    fn ln_path(&self, edges: &[(usize, usize)]) -> f64 {
        let mut total = 0.0;
        for (layer, key) in self.layers.iter().zip(edges) {
            match layer.get(key) {
                Some(&p) if p > 0.0 => total += p.ln(),
                _ => return f64::NEG_INFINITY,
            }
        }
        total
    }

    /// A random perturbation of `base`: every row becomes `(1-ε)·row + ε·Dir(1)`
    /// on its support, and one extra edge outside the support joins a random row.
    pub fn random_near<R: Rng + ?Sized>(base: &MarkovCandidate, rng: &mut R) -> Self {
        let mut layers = base.layers.clone();
        let depth = layers.len();
        let l = rng.random_range(0..depth);
        let joint = l + 1 == depth;
        let row = if joint {
            Some(rng.random_range(0..base.dims[depth]))
        } else {
            let rows = row_keys(&layers[l], false);
            (!rows.is_empty()).then(|| rows[rng.random_range(0..rows.len())])
        };
        if let Some(row) = row {
            let width = 2 * base.dims[l];
            let start = rng.random_range(0..width);
            if let Some(s) = (0..width)
                .map(|o| (start + o) % width)
                .find(|&s| !layers[l].contains_key(&(row, s)))
            {
                layers[l].insert((row, s), 0.0);
            }
        }
        for (li, layer) in layers.iter_mut().enumerate() {
            let joint = li + 1 == depth;
            for row in row_keys(layer, joint) {
                let keys: Vec<(usize, usize)> = layer
                    .keys()
                    .copied()
                    .filter(|&(t, _)| joint || t == row)
                    .collect();
                let eps: f64 = rng.random();
                let gammas: Vec<f64> = keys.iter().map(|_| Exp1.sample(rng)).collect();
                let total: f64 = gammas.iter().sum();
                for (key, g) in keys.iter().zip(gammas) {
                    let p = layer[key];
                    layer.insert(*key, (1.0 - eps) * p + eps * g / total);
                }
            }
        }
        MarkovCandidate {
            dims: base.dims.clone(),
            layers,
        }
    }
}

/// Distinct rows of a layer; the joint top layer is a single row.
fn row_keys(layer: &BTreeMap<(usize, usize), f64>, joint: bool) -> Vec<usize> {
    if joint {
        return if layer.is_empty() { vec![] } else { vec![usize::MAX] };
    }
    let mut rows: Vec<usize> = layer.keys().map(|&(t, _)| t).collect();
    rows.dedup();
    rows
}

/// `ln(M! ∏ p_path^{K} / K!)` over the observed paths.
pub fn log_likelihood(counts: &PathCounts, net: &Network, candidate: &MarkovCandidate) -> Result<f64> {
    let paths = counts
        .paths
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("log-likelihood needs recorded paths".into()))?;
    let mut total = ln_factorial(counts.m);
    for (path, &k) in paths {
        let edges = doubled_edges(net, path);
        let lp = candidate.ln_path(&edges);
        if lp == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        total += k as f64 * lp - ln_factorial(k);
    }
    Ok(total)
}

/// Doubled `(target, source)` keys of a path, layer by layer.
fn doubled_edges(net: &Network, path: &[usize]) -> Vec<(usize, usize)> {
    let depth = net.depth();
    let dims = net.dims();
    let sign = |l: usize| {
        if l == depth {
            crate::net::Sign::Pos
        } else {
            crate::net::Sign::of(net.layer(l + 1)[(path[l + 1], path[l])])
        }
    };
    (1..=depth)
        .map(|l| {
            (
                sign(l).doubled_index(path[l], dims[l]),
                sign(l - 1).doubled_index(path[l - 1], dims[l - 1]),
            )
        })
        .collect()
}

pub const REALIZED_PATH_LIMIT: f64 = 1e4;
pub const REALIZED_MULTISET_LIMIT: f64 = 1e6;
pub const PROBE_COUNT: usize = 16;
const PROBE_SEED: u64 = 0x009e_0be5;
const FINGERPRINT_TOL: f64 = 1e-9;

/// Fixed probe inputs on the unit sphere.
pub fn unit_sphere_probes(d: usize, count: usize) -> Vec<Vec<f64>> {
    let mut r = rng::stream(PROBE_SEED, d as u64);
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
            let n = dot(&v, &v).sqrt();
            if n > 0.0 {
                break v.into_iter().map(|x| x / n).collect();
            }
        })
        .collect()
}

/// `ln C(n, k)`.
fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Outcome of an exhaustive count of reconstructed functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Realized {
    /// Distinct functions `f(·; p̃)` by probe fingerprint.
    pub functions: usize,
    /// Distinct count vectors `K` (multisets of `M` paths).
    pub samples: u64,
}

/// Enumerates every count vector `K` with `ΣK = M` over the paths of positive
/// mass and counts the distinct reconstructed functions.
pub fn count_realized(net: &Network, data: &Dataset, q: f64, m: u64, probes: &[Vec<f64>]) -> Result<Realized> {
    if probes.len() < PROBE_COUNT {
        return Err(Error::InvalidArgument(format!("need at least {PROBE_COUNT} probes")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    let total = net.path_count();
    if total > REALIZED_PATH_LIMIT {
        return Err(Error::GuardExceeded {
            count: total,
            limit: REALIZED_PATH_LIMIT,
        });
    }
    let w = input_weights(data, q)?;
    let oracle = crate::measures::enumerate_paths_oracle(net, &w)?;
    let support: Vec<Vec<usize>> = oracle
        .paths
        .iter()
        .filter(|(p, weight)| *weight != 0.0 && w.w0[p[0]] > 0.0)
        .map(|(p, _)| p.clone())
        .collect();
    let p = support.len() as u64;
    if p == 0 {
        return Err(Error::DegenerateVariation);
    }
    let ln_multisets = ln_binomial(p + m - 1, m);
    if ln_multisets > REALIZED_MULTISET_LIMIT.ln() + 1e-9 {
        return Err(Error::GuardExceeded {
            count: ln_multisets.exp(),
            limit: REALIZED_MULTISET_LIMIT,
        });
    }
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut samples = 0u64;
    let mut choice = vec![0usize; m as usize];
    loop {
        let paths: Vec<Vec<usize>> = choice.iter().map(|&i| support[i].clone()).collect();
        let counts = PathCounts::from_paths(net, &paths)?;
        let rec = reconstruct(&empirical_markov(&counts), LogScaled::ONE, &w, net.activation())?;
        let mut key = Vec::with_capacity(probes.len() * net.output_dim());
        for x in probes {
            for y in rec.forward_unscaled(x)? {
                key.push((y / FINGERPRINT_TOL).round() as i64);
            }
        }
        seen.insert(key);
        samples += 1;
        // next non-decreasing sequence
        let Some(pos) = choice.iter().rposition(|&c| c + 1 < support.len()) else {
            break;
        };
        let next = choice[pos] + 1;
        choice[pos..].iter_mut().for_each(|c| *c = next);
    }
    Ok(Realized {
        functions: seen.len(),
        samples,
    })
}

/// `M (ln(de) + L ln 8)`.
pub fn cardinality_log_bound(m: u64, depth: usize, d: usize) -> Result<f64> {
    if m == 0 || depth == 0 || d == 0 {
        return Err(Error::InvalidArgument("cardinality bound needs positive M, L, d".into()));
    }
    Ok(m as f64 * ((d as f64).ln() + 1.0 + depth as f64 * 8f64.ln()))
}

/// Number of partitions of `k`.
pub fn partition_count(k: usize) -> u128 {
    let mut ways = vec![0u128; k + 1];
    ways[0] = 1;
    for part in 1..=k {
        for n in part..=k {
            ways[n] += ways[n - part];
        }
    }
    ways[k]
}

/// Every partition of `k` as a non-increasing list of parts.
pub fn enumerate_partitions(k: usize) -> Vec<Vec<usize>> {
    fn go(rest: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for part in (1..=rest.min(max)).rev() {
            cur.push(part);
            go(rest - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(k, k, &mut Vec::new(), &mut out);
    out
}

/// Covering-number size for margin `γ` and scale `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoveringSize {
    pub m_eps: u64,
    pub log_n: f64,
    /// `9V²ζ²L²(L + ln(de)) / (γ²ε²)`.
    pub closed_form: f64,
}

pub fn covering_size(v: f64, zeta: f64, depth: usize, gamma: f64, eps: f64, d: usize) -> Result<CoveringSize> {
    if !(v > 0.0 && zeta > 0.0 && gamma > 0.0 && eps > 0.0) || depth == 0 || d == 0 {
        return Err(Error::InvalidArgument("covering size needs positive arguments".into()));
    }
    let l = depth as f64;
    let m_eps = (2.0 * v * zeta * l / (gamma * eps)).powi(2).ceil();
    if !m_eps.is_finite() || m_eps > u64::MAX as f64 {
        return Err(Error::Overflow { log2: m_eps.log2() });
    }
    let m_eps = m_eps as u64;
    Ok(CoveringSize {
        m_eps,
        log_n: cardinality_log_bound(m_eps, depth, d)?,
        closed_form: 9.0 * (v * zeta * l).powi(2) * (l + (d as f64).ln() + 1.0) / (gamma * eps).powi(2),
    })
}

/// A network whose first layer only sees the span of the data.
#[derive(Debug, Clone)]
pub struct Projection {
    pub net: Network,
    /// `rank(S)`.
    pub rank: usize,
}

/// Replaces each row of `W_1` by its orthogonal projection onto `span(S)`.
pub fn effective_projection(net: &Network, data: &Dataset) -> Result<Projection> {
    if data.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: data.dim(),
            context: "projection data",
        });
    }
    let basis = orthonormal_basis(data.rows());
    let rank = basis.len();
    let projected = net.map_layers(|l, w| {
        if l != 1 {
            return w.clone();
        }
        let mut out = Matrix::zeros(w.rows(), w.cols());
        for i in 0..w.rows() {
            for b in &basis {
                let c = dot(w.row(i), b);
                for (j, bj) in b.iter().enumerate() {
                    out[(i, j)] += c * bj;
                }
            }
        }
        out
    })?;
    Ok(Projection { net: projected, rank })
}

/// Modified Gram–Schmidt; drops directions below `1e-10` of the largest row norm.
fn orthonormal_basis<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Vec<Vec<f64>> {
    let rows: Vec<&[f64]> = rows.collect();
    let scale = rows.iter().map(|r| dot(r, r).sqrt()).fold(0.0, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    if scale == 0.0 {
        return basis;
    }
    for r in rows {
        let mut v = r.to_vec();
        // two passes keep the basis orthogonal to working precision
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-10 * scale {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{chain_111, net_a, s_a};
    use crate::measures::variation;
    use crate::sampler::sample_paths;
    use rand::SeedableRng;

    #[test]
    fn mc_error_on_single_path_is_zero() {
        let one = Dataset::from_rows(&[[1.0], [-0.5]]).unwrap();
        for m in [1, 10, 100] {
            let e = mc_error(&chain_111(), &one, 1.0, m, 4, 3).unwrap();
            assert_eq!(e.mean, 0.0);
        }
        assert!(mc_error(&chain_111(), &one, 3.0, 10, 4, 3).is_err());
        assert!(mc_error(&chain_111(), &one, 1.0, 10, 1, 3).is_err());
    }

    #[test]
    fn mc_error_net_a_below_rhs() {
        let e = mc_error(&net_a(), &s_a(), 1.0, 100, 200, 1).unwrap();
        assert!(e.mean <= 5.685, "{e:?}");
        assert!(e.ci95.0 <= e.mean && e.mean <= e.ci95.1);
    }

    #[test]
    fn theorem3_rhs_examples() {
        assert!((theorem3_rhs(10.0, 1.19219, 2, 100) - 5.68534).abs() < 1e-4);
        let a = theorem3_rhs(3.0, 1.5, 3, 50);
        assert!((a / theorem3_rhs(3.0, 1.5, 3, 200) - 4.0).abs() < 1e-12);
        assert_eq!(theorem3_rhs(0.0, 1.0, 2, 10), 0.0);
    }

    #[test]
    fn lower_bound_instance_examples() {
        assert!((lower_bound_instance(4, 4).unwrap().xi1 - 1.5).abs() < 1e-15);
        assert!((lower_bound_instance(2, 1).unwrap().xi1 - 1.0).abs() < 1e-15);
        assert!(lower_bound_instance(3, 2).is_err());
        for (d, d1) in [(2, 1), (4, 4), (8, 8), (6, 3)] {
            let inst = lower_bound_instance(d, d1).unwrap();
            assert_eq!(inst.net.forward(&inst.x).unwrap(), vec![0.0]);
            assert_eq!(inst.x.iter().filter(|&&v| v > 0.0).count(), d / 2);
        }
        assert!((lower_bound_rhs(1.5, 1000) - 7.03125e-5).abs() < 1e-18);
        assert_eq!(lower_bound_rhs(1.0, 32), 1.0 / 1024.0);
    }

    #[test]
    fn ols_slope_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        assert!((ols_slope(&xs, &ys) + 0.5).abs() < 1e-15);
    }

    fn recorded(net: &Network, data: &Dataset, m: u64, seed: u64) -> (ConditionalSampler, PathCounts) {
        let cs = crate::sampler::build_sampler(net, data, 1.0).unwrap();
        let opts = SampleOptions {
            record_paths: true,
            ..SampleOptions::default()
        };
        let counts = sample_paths_with(&cs, m, seed, opts).unwrap();
        (cs, counts)
    }

    #[test]
    fn likelihood_examples() {
        let one = Dataset::from_rows(&[[1.0]]).unwrap();
        let (_, counts) = recorded(&chain_111(), &one, 7, 0);
        let best = MarkovCandidate::from_empirical(&empirical_markov(&counts));
        assert!(log_likelihood(&counts, &chain_111(), &best).unwrap().abs() < 1e-12);

        let (_, counts) = recorded(&net_a(), &s_a(), 30, 5);
        let best = MarkovCandidate::from_empirical(&empirical_markov(&counts));
        let top = log_likelihood(&counts, &net_a(), &best).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let c = MarkovCandidate::random_near(&best, &mut rng);
            assert!(log_likelihood(&counts, &net_a(), &c).unwrap() <= top + 1e-9);
        }
        let mut hole = best.clone();
        let key = *hole.layers[0].keys().next().unwrap();
        hole.layers[0].insert(key, 0.0);
        assert_eq!(log_likelihood(&counts, &net_a(), &hole).unwrap(), f64::NEG_INFINITY);
        let (_, plain) = (0, sample_paths(&crate::sampler::build_sampler(&net_a(), &s_a(), 1.0).unwrap(), 5, 1).unwrap());
        assert!(log_likelihood(&plain, &net_a(), &best).is_err());
    }

    #[test]
    fn random_candidates_are_normalised() {
        let (_, counts) = recorded(&net_a(), &s_a(), 20, 2);
        let best = MarkovCandidate::from_empirical(&empirical_markov(&counts));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let c = MarkovCandidate::random_near(&best, &mut rng);
            let depth = c.depth();
            let joint: f64 = c.layers[depth - 1].values().sum();
            assert!((joint - 1.0).abs() < 1e-12);
            for layer in &c.layers[..depth - 1] {
                let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
                for (&(t, _), &p) in layer {
                    *rows.entry(t).or_insert(0.0) += p;
                }
                assert!(rows.values().all(|s| (s - 1.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn count_realized_examples() {
        let probes = unit_sphere_probes(2, PROBE_COUNT);
        let r1 = count_realized(&net_a(), &s_a(), 1.0, 1, &probes).unwrap();
        assert_eq!(r1.samples, 4);
        assert!(r1.functions <= 4);
        let r2 = count_realized(&net_a(), &s_a(), 1.0, 2, &probes).unwrap();
        assert_eq!(r2.samples, 10);
        assert!(r2.functions <= 10);
        let one = Dataset::from_rows(&[[1.0]]).unwrap();
        let p1 = unit_sphere_probes(1, PROBE_COUNT);
        for m in 1..4 {
            assert_eq!(count_realized(&chain_111(), &one, 1.0, m, &p1).unwrap().functions, 1);
        }
        assert!(count_realized(&net_a(), &s_a(), 1.0, 1, &probes[..3]).is_err());
    }

    #[test]
    fn probes_lie_on_sphere() {
        let p = unit_sphere_probes(5, 16);
        assert_eq!(p, unit_sphere_probes(5, 16));
        assert!(p.iter().all(|v| (dot(v, v) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn cardinality_examples() {
        assert!((cardinality_log_bound(1, 2, 2).unwrap() - 5.85203).abs() < 1e-5);
        assert!((cardinality_log_bound(2275, 2, 2).unwrap() - 13313.3).abs() < 0.1);
        assert!(cardinality_log_bound(0, 2, 2).is_err());
    }

    #[test]
    fn partition_helper() {
        let known = [1u128, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42];
        for (k, &p) in known.iter().enumerate() {
            assert_eq!(partition_count(k), p);
        }
        assert_eq!(partition_count(30), 5604);
        assert_eq!(enumerate_partitions(5).len(), 7);
    }

    #[test]
    fn covering_examples() {
        let c = covering_size(10.0, 1.19219, 2, 1.0, 1.0, 2).unwrap();
        assert_eq!(c.m_eps, 2275);
        assert!((c.log_n - 13313.3).abs() < 0.1);
        assert!((c.closed_form - 18896.878284583).abs() < 1e-6);
        let half = covering_size(10.0, 1.19219, 2, 1.0, 2.0, 2).unwrap();
        assert!((c.m_eps as f64 / half.m_eps as f64 - 4.0).abs() < 0.01);
    }

    #[test]
    fn projection_examples() {
        let p = effective_projection(&net_a(), &s_a()).unwrap();
        assert_eq!(p.rank, 2);
        assert_eq!(p.net, net_a());
        let e1 = Dataset::from_rows(&[[1.0, 0.0]]).unwrap();
        let p = effective_projection(&net_a(), &e1).unwrap();
        assert_eq!(p.rank, 1);
        assert_eq!(p.net.layer(1), &Matrix::from_rows(&[[1.0, 0.0], [-3.0, 0.0]]));
    }

    #[test]
    fn projection_can_raise_variation() {
        // the projected row picks up mass on a coordinate the original row did not use
        let net = Network::new(
            vec![Matrix::from_rows(&[[1.0, 0.0, 0.0]]), Matrix::from_rows(&[[1.0]])],
            Activation::Relu,
        )
        .unwrap();
        let data = Dataset::from_rows(&[[1.0, 1.0, 0.0], [1.0, -1.0, 1.0]]).unwrap();
        let p = effective_projection(&net, &data).unwrap();
        let before = variation(&net, &data, 2.0).unwrap().to_f64();
        let after = variation(&p.net, &data, 2.0).unwrap().to_f64();
        assert!(after > before);
        for x in data.rows() {
            let a = net.forward(x).unwrap()[0];
            let b = p.net.forward(x).unwrap()[0];
            assert!((a - b).abs() < 1e-12);
        }
    }
}
