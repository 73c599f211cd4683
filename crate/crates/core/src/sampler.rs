//! Path sampling, empirical Markov estimates and sparse reconstruction.
//!
//! A path is drawn top-down: `j_L ~ a_L / V`, then
//! `j_{ℓ-1} | j_ℓ ~ |W_ℓ[j_ℓ, ·]| ⊙ a_{ℓ-1}`. Rows are turned into categorical
//! samplers the first time they are needed and cached.
//!
//! Counts are kept over sign-split nodes. Node `(j, τ)` at layer `ℓ < L` is unit
//! `j` with `τ` the sign of the sampled edge leaving it; output units always
//! carry `+`. Keys are doubled indices (`j` for `+`, `width + j` for `−`).

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::sync::OnceLock;

use serde::Serialize;

use crate::alias::Categorical;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::measures::{input_weights, InputWeighting, PathChain};
use crate::net::{Activation, Dataset, Network, Sign};
use crate::par::{self, Exec};
use crate::rng::{self, RNG_ALGORITHM};
use crate::scaled::LogScaled;

/// Draws paths from the path distribution of a network.
#[derive(Debug)]
pub struct ConditionalSampler {
    chain: PathChain,
    top: Categorical,
    /// `rows[ℓ-1][j_ℓ]`: distribution of `j_{ℓ-1}` given `j_ℓ`.
    rows: Vec<Vec<OnceLock<Option<Categorical>>>>,
}

pub fn build_sampler(net: &Network, data: &Dataset, q: f64) -> Result<ConditionalSampler> {
    ConditionalSampler::from_chain(PathChain::build(net, &input_weights(data, q)?)?)
}

impl ConditionalSampler {
    pub fn from_chain(chain: PathChain) -> Result<Self> {
        if chain.is_degenerate() {
            return Err(Error::DegenerateVariation);
        }
        let top = Categorical::new(chain.prefix(chain.depth()).values())
            .ok_or(Error::DegenerateVariation)?;
        let rows = chain
            .network()
            .dims()
            .iter()
            .skip(1)
            .map(|&w| (0..w).map(|_| OnceLock::new()).collect())
            .collect();
        Ok(ConditionalSampler { chain, top, rows })
    }

    pub fn chain(&self) -> &PathChain {
        &self.chain
    }

    pub fn network(&self) -> &Network {
        self.chain.network()
    }

    pub fn variation(&self) -> LogScaled {
        self.chain.variation()
    }

    /// `p_{j_L}`.
    pub fn top(&self) -> &[f64] {
        self.top.probs()
    }

    /// Distribution of `j_{ℓ-1}` given `j_ℓ = target`; `None` for rows with no
    /// mass (never reached by a draw).
    pub fn conditional(&self, l: usize, target: usize) -> Option<&Categorical> {
        self.rows[l - 1][target]
            .get_or_init(|| {
                let w = self.chain.abs_layer(l).row(target);
                let a = self.chain.prefix(l - 1).values();
                let weights: Vec<f64> = w.iter().zip(a).map(|(x, y)| x * y).collect();
                Categorical::new(&weights)
            })
            .as_ref()
    }

    /// Number of rows materialised so far.
    pub fn cached_rows(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.get().is_some()).count()
    }

    /// One path `(j_0, …, j_L)`.
    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R, path: &mut [usize]) {
        let depth = self.chain.depth();
        path[depth] = self.top.sample(rng);
        for l in (1..=depth).rev() {
            let row = self
                .conditional(l, path[l])
                .expect("reachable node has a nonzero row");
            path[l - 1] = row.sample(rng);
        }
    }

    /// Exact probability that a path uses doubled edge `(source → target)` at
    /// layer `ℓ`, matching the keys of [`PathCounts::pairs`].
    pub fn pair_probability(&self, l: usize, source: usize, target: usize) -> f64 {
        let net = self.network();
        let depth = net.depth();
        let dims = net.dims();
        let (i, sigma) = split_index(source, dims[l - 1]);
        let (j, tau) = if l == depth {
            (target, Sign::Pos)
        } else {
            split_index(target, dims[l])
        };
        let w = net.layer(l)[(j, i)];
        if Sign::of(w) != sigma || w == 0.0 {
            return 0.0;
        }
        let v = self.variation();
        let a = self.chain.prefix(l - 1).get(i) * LogScaled::from_f64(w.abs());
        let tail = if l == depth {
            if tau == Sign::Pos {
                LogScaled::ONE
            } else {
                LogScaled::ZERO
            }
        } else {
            let b = self.chain.suffix(l + 1);
            let next = net.layer(l + 1);
            (0..next.rows())
                .filter(|&r| Sign::of(next[(r, j)]) == tau)
                .map(|r| LogScaled::from_f64(next[(r, j)].abs()) * b.get(r))
                .sum()
        };
        (a * tail).ratio(&v)
    }
}

/// `(unit, sign)` from a doubled index.
pub fn split_index(index: usize, width: usize) -> (usize, Sign) {
    if index < width {
        (index, Sign::Pos)
    } else {
        (index - width, Sign::Neg)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SampleOptions {
    /// Draws per RNG stream; the partition plan that makes counts reproducible.
    pub chunk_size: usize,
    /// Keep full path counts (needed by the likelihood checks).
    pub record_paths: bool,
    pub exec: Exec,
}

pub const DEFAULT_CHUNK: usize = 1 << 14;

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            chunk_size: DEFAULT_CHUNK,
            record_paths: false,
            exec: Exec::default(),
        }
    }
}

/// Counts from `M` sampled paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathCounts {
    pub m: u64,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub chunk_size: usize,
    pub rng_algorithm: String,
    /// `K_{j_L}`.
    pub top: Vec<u64>,
    /// `pairs[ℓ-1][(source, target)]`: doubled-index edge counts for `W_ℓ`.
    pub pairs: Vec<BTreeMap<(usize, usize), u64>>,
    /// Full path counts `(j_0, …, j_L) → K`, when requested.
    pub paths: Option<BTreeMap<Vec<usize>, u64>>,
}

pub fn sample_paths(cs: &ConditionalSampler, m: u64, seed: u64) -> Result<PathCounts> {
    sample_paths_with(cs, m, seed, SampleOptions::default())
}

pub fn sample_paths_with(
    cs: &ConditionalSampler,
    m: u64,
    seed: u64,
    opts: SampleOptions,
) -> Result<PathCounts> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if opts.chunk_size == 0 {
        return Err(Error::InvalidArgument("chunk size must be positive".into()));
    }
    let chunk = opts.chunk_size as u64;
    let n_chunks = m.div_ceil(chunk) as usize;
    let parts = par::map_range(opts.exec, n_chunks, |c| {
        let start = c as u64 * chunk;
        let len = chunk.min(m - start);
        sample_chunk(cs, len, seed, c as u64, opts.record_paths)
    });
    let mut counts = PathCounts::empty(cs.network(), seed, opts.chunk_size, opts.record_paths);
    counts.m = m;
    for part in parts {
        counts.absorb(part);
    }
    Ok(counts)
}

struct ChunkCounts {
    top: Vec<u64>,
    pairs: Vec<Tally>,
    paths: Option<HashMap<Vec<usize>, u64>>,
}

/// Dense edge counts for layers whose doubled edge grid is small relative to
/// the chunk, a hash map otherwise.
enum Tally {
    Dense { targets: usize, counts: Vec<u64> },
    Sparse(HashMap<(usize, usize), u64>),
}

const DENSE_TALLY_MAX: usize = 1 << 20;

impl Tally {
    fn new(sources: usize, targets: usize, draws: u64) -> Self {
        let cells = sources.saturating_mul(targets);
        if cells <= DENSE_TALLY_MAX && (cells as u64) <= draws.saturating_mul(4).max(4096) {
            Tally::Dense { targets, counts: vec![0; cells] }
        } else {
            Tally::Sparse(HashMap::new())
        }
    }

    #[inline]
    fn add(&mut self, source: usize, target: usize) {
        match self {
            Tally::Dense { targets, counts } => counts[source * *targets + target] += 1,
            Tally::Sparse(map) => *map.entry((source, target)).or_insert(0) += 1,
        }
    }

    fn drain_into(self, dst: &mut BTreeMap<(usize, usize), u64>) {
        match self {
            Tally::Dense { targets, counts } => {
                for (i, k) in counts.into_iter().enumerate() {
                    if k > 0 {
                        *dst.entry((i / targets, i % targets)).or_insert(0) += k;
                    }
                }
            }
            Tally::Sparse(map) => {
                for (key, k) in map {
                    *dst.entry(key).or_insert(0) += k;
                }
            }
        }
    }
}

fn sample_chunk(cs: &ConditionalSampler, len: u64, seed: u64, stream: u64, record: bool) -> ChunkCounts {
    let net = cs.network();
    let depth = net.depth();
    let dims = net.dims();
    let mut rng = rng::stream(seed, stream);
    let mut out = ChunkCounts {
        top: vec![0; net.output_dim()],
        pairs: (1..=depth)
            .map(|l| {
                let targets = if l == depth { dims[l] } else { 2 * dims[l] };
                Tally::new(2 * dims[l - 1], targets, len)
            })
            .collect(),
        paths: record.then(HashMap::new),
    };
    let mut path = vec![0usize; depth + 1];
    let mut signs = vec![Sign::Pos; depth + 1];
    for _ in 0..len {
        cs.draw(&mut rng, &mut path);
        out.top[path[depth]] += 1;
        // signs[ℓ] is the sign of the edge leaving node j_ℓ
        signs[depth] = Sign::Pos;
        for l in 1..=depth {
            signs[l - 1] = Sign::of(net.layer(l)[(path[l], path[l - 1])]);
        }
        for l in 1..=depth {
            let source = signs[l - 1].doubled_index(path[l - 1], dims[l - 1]);
            let target = signs[l].doubled_index(path[l], dims[l]);
            out.pairs[l - 1].add(source, target);
        }
        if let Some(paths) = out.paths.as_mut() {
            *paths.entry(path.clone()).or_insert(0) += 1;
        }
    }
    out
}

impl PathCounts {
    fn empty(net: &Network, seed: u64, chunk_size: usize, record_paths: bool) -> Self {
        PathCounts {
            m: 0,
            dims: net.dims(),
            seed,
            chunk_size,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            top: vec![0; net.output_dim()],
            pairs: vec![BTreeMap::new(); net.depth()],
            paths: record_paths.then(BTreeMap::new),
        }
    }

    fn absorb(&mut self, part: ChunkCounts) {
        for (t, k) in self.top.iter_mut().zip(part.top) {
            *t += k;
        }
        for (dst, src) in self.pairs.iter_mut().zip(part.pairs) {
            src.drain_into(dst);
        }
        if let (Some(dst), Some(src)) = (self.paths.as_mut(), part.paths) {
            for (key, k) in src {
                *dst.entry(key).or_insert(0) += k;
            }
        }
    }

    /// Builds counts from explicit paths `(j_0, …, j_L)` of `net`.
    pub fn from_paths(net: &Network, paths: &[Vec<usize>]) -> Result<Self> {
        let mut counts = PathCounts::empty(net, 0, 0, true);
        let depth = net.depth();
        let dims = net.dims();
        let mut store = counts.paths.take().expect("recording");
        for path in paths {
            if path.len() != depth + 1 || path.iter().zip(&dims).any(|(&j, &d)| j >= d) {
                return Err(Error::InvalidArgument(format!("invalid path {path:?}")));
            }
            let sign = |l: usize| {
                if l == depth {
                    Sign::Pos
                } else {
                    Sign::of(net.layer(l + 1)[(path[l + 1], path[l])])
                }
            };
            counts.top[path[depth]] += 1;
            for l in 1..=depth {
                let key = (
                    sign(l - 1).doubled_index(path[l - 1], dims[l - 1]),
                    sign(l).doubled_index(path[l], dims[l]),
                );
                *counts.pairs[l - 1].entry(key).or_insert(0) += 1;
            }
            *store.entry(path.clone()).or_insert(0) += 1;
            counts.m += 1;
        }
        counts.paths = Some(store);
        Ok(counts)
    }

    pub fn depth(&self) -> usize {
        self.pairs.len()
    }

    /// Checks per-layer totals and inflow = outflow at every hidden node.
    pub fn check_flow(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Format(format!("path counts: {msg}")));
        if self.top.iter().sum::<u64>() != self.m {
            return fail("top counts do not sum to M".into());
        }
        for (l, layer) in self.pairs.iter().enumerate() {
            if layer.values().sum::<u64>() != self.m {
                return fail(format!("layer {} counts do not sum to M", l + 1));
            }
        }
        let depth = self.depth();
        let mut into_top = vec![0u64; self.top.len()];
        for (&(_, t), &k) in &self.pairs[depth - 1] {
            into_top[t] += k;
        }
        if into_top != self.top {
            return fail("top layer inflow differs from top counts".into());
        }
        for l in 1..depth {
            let mut inflow: BTreeMap<usize, u64> = BTreeMap::new();
            for (&(_, t), &k) in &self.pairs[l - 1] {
                *inflow.entry(t).or_insert(0) += k;
            }
            let mut outflow: BTreeMap<usize, u64> = BTreeMap::new();
            for (&(s, _), &k) in &self.pairs[l] {
                *outflow.entry(s).or_insert(0) += k;
            }
            if inflow != outflow {
                return fail(format!("flow not conserved at layer {l}"));
            }
        }
        Ok(())
    }

    /// Sparse CSV: `layer,source,source_sign,target,target_sign,count`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["layer", "source", "source_sign", "target", "target_sign", "count"])?;
        for (l, layer) in self.pairs.iter().enumerate() {
            let src_w = self.dims[l];
            let tgt_w = self.dims[l + 1];
            for (&(s, t), &k) in layer {
                let (si, ss) = split_index(s, src_w);
                let (ti, ts) = split_index(t, tgt_w);
                out.write_record([
                    (l + 1).to_string(),
                    si.to_string(),
                    ss.symbol().to_string(),
                    ti.to_string(),
                    ts.symbol().to_string(),
                    k.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads counts written by [`PathCounts::write_csv`] for a network with `dims`.
    pub fn read_csv<R: Read>(r: R, dims: &[usize]) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Row {
            layer: usize,
            source: usize,
            source_sign: String,
            target: usize,
            target_sign: String,
            count: u64,
        }
        let depth = dims.len().saturating_sub(1);
        if depth < 2 {
            return Err(Error::InvalidArgument("need at least two layers".into()));
        }
        let mut counts = PathCounts {
            m: 0,
            dims: dims.to_vec(),
            seed: 0,
            chunk_size: 0,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            top: vec![0; dims[depth]],
            pairs: vec![BTreeMap::new(); depth],
            paths: None,
        };
        let mut reader = csv::Reader::from_reader(r);
        for row in reader.deserialize() {
            let row: Row = row?;
            let bad = |what: &str| Error::Format(format!("path counts: bad {what} in layer {}", row.layer));
            if row.layer == 0 || row.layer > depth {
                return Err(bad("layer"));
            }
            let ss = Sign::parse(&row.source_sign).ok_or_else(|| bad("source sign"))?;
            let ts = Sign::parse(&row.target_sign).ok_or_else(|| bad("target sign"))?;
            if row.source >= dims[row.layer - 1] || row.target >= dims[row.layer] {
                return Err(bad("index"));
            }
            if row.layer == depth && ts != Sign::Pos {
                return Err(bad("output sign"));
            }
            let key = (
                ss.doubled_index(row.source, dims[row.layer - 1]),
                ts.doubled_index(row.target, dims[row.layer]),
            );
            *counts.pairs[row.layer - 1].entry(key).or_insert(0) += row.count;
            if row.layer == depth {
                counts.top[row.target] += row.count;
            }
        }
        counts.m = counts.top.iter().sum();
        counts.check_flow()?;
        Ok(counts)
    }
}

/// A probability stored as an integer ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn value(self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

/// One stored entry of `p̃`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MarkovEntry {
    /// Doubled index at layer `ℓ-1`.
    pub source: usize,
    /// Doubled index at layer `ℓ` (plain output index at `ℓ = L`).
    pub target: usize,
    pub p: Ratio,
}

/// The empirical Markov distribution `p̃`.
///
/// Layer `L` holds the joint `p̃_{j_L, j_{L-1}} = K/M`; lower layers hold the
/// conditionals `p̃_{j_{ℓ-1} | j_ℓ} = K_{j_{ℓ-1}, j_ℓ} / K_{j_ℓ}`.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalMarkov {
    pub m: u64,
    pub dims: Vec<usize>,
    /// `layers[ℓ-1]`, sorted by `(target, source)`.
    pub layers: Vec<Vec<MarkovEntry>>,
    /// Visited doubled nodes per layer `0..=L`.
    pub visited: Vec<Vec<usize>>,
}

pub fn empirical_markov(counts: &PathCounts) -> EmpiricalMarkov {
    let depth = counts.depth();
    let mut visited: Vec<Vec<usize>> = vec![Vec::new(); depth + 1];
    let mut layers = Vec::with_capacity(depth);
    for l in 1..=depth {
        let pairs = &counts.pairs[l - 1];
        let mut node: BTreeMap<usize, u64> = BTreeMap::new();
        for (&(_, t), &k) in pairs {
            *node.entry(t).or_insert(0) += k;
        }
        let mut entries: Vec<MarkovEntry> = pairs
            .iter()
            .filter(|(_, &k)| k > 0)
            .map(|(&(s, t), &k)| MarkovEntry {
                source: s,
                target: t,
                p: Ratio {
                    num: k,
                    den: if l == depth { counts.m } else { node[&t] },
                },
            })
            .collect();
        entries.sort_by_key(|e| (e.target, e.source));
        let mut sources: Vec<usize> = entries.iter().map(|e| e.source).collect();
        sources.sort_unstable();
        sources.dedup();
        visited[l - 1] = sources;
        if l == depth {
            visited[l] = node.keys().copied().collect();
        }
        layers.push(entries);
    }
    EmpiricalMarkov {
        m: counts.m,
        dims: counts.dims.clone(),
        layers,
        visited,
    }
}

impl EmpiricalMarkov {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn nnz(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Dense view of layer `ℓ` over doubled indices (rows: targets).
    pub fn dense_layer(&self, l: usize) -> Matrix {
        let rows = if l == self.depth() { self.dims[l] } else { 2 * self.dims[l] };
        let mut m = Matrix::zeros(rows, 2 * self.dims[l - 1]);
        for e in &self.layers[l - 1] {
            m[(e.target, e.source)] = e.p.value();
        }
        m
    }

    /// Probability `p̃` assigns to a path (signs read off `net`).
    pub fn path_probability(&self, net: &Network, path: &[usize]) -> f64 {
        let depth = self.depth();
        let sign = |l: usize| {
            if l == depth {
                Sign::Pos
            } else {
                Sign::of(net.layer(l + 1)[(path[l + 1], path[l])])
            }
        };
        let mut p = 1.0;
        for l in 1..=depth {
            let s = sign(l - 1).doubled_index(path[l - 1], self.dims[l - 1]);
            let t = sign(l).doubled_index(path[l], self.dims[l]);
            let layer = &self.layers[l - 1];
            let hit = layer
                .binary_search_by_key(&(t, s), |e| (e.target, e.source))
                .map(|i| layer[i].p.value())
                .unwrap_or(0.0);
            p *= hit;
            if p == 0.0 {
                break;
            }
        }
        p
    }
}

/// `f(x; W̃) = V · f(x'; p̃)` on the visited sign-split nodes.
#[derive(Debug, Clone)]
pub struct ReconstructedNetwork {
    /// `p̃` with source signs folded into the weights; hidden units are the
    /// visited sign-split nodes, inputs and outputs keep their original indices.
    pub net: Network,
    pub scale: LogScaled,
    pub weighting: InputWeighting,
    /// Doubled index of every hidden unit, per hidden layer.
    pub units: Vec<Vec<usize>>,
}

pub fn reconstruct(
    em: &EmpiricalMarkov,
    v: LogScaled,
    w: &InputWeighting,
    activation: Activation,
) -> Result<ReconstructedNetwork> {
    let depth = em.depth();
    if w.dim() != em.dims[0] {
        return Err(Error::DimensionMismatch {
            expected: em.dims[0],
            got: w.dim(),
            context: "reconstruction input weighting",
        });
    }
    let units: Vec<Vec<usize>> = (1..depth).map(|l| em.visited[l].clone()).collect();
    let position = |l: usize, index: usize| -> usize {
        if l == 0 {
            split_index(index, em.dims[0]).0
        } else if l == depth {
            index
        } else {
            units[l - 1].binary_search(&index).expect("visited node")
        }
    };
    let mut layers = Vec::with_capacity(depth);
    for l in 1..=depth {
        let rows = if l == depth { em.dims[depth] } else { units[l - 1].len() };
        let cols = if l == 1 { em.dims[0] } else { units[l - 2].len() };
        let mut m = Matrix::zeros(rows, cols);
        for e in &em.layers[l - 1] {
            let sigma = split_index(e.source, em.dims[l - 1]).1;
            m[(position(l, e.target), position(l - 1, e.source))] += sigma.value() * e.p.value();
        }
        layers.push(m);
    }
    Ok(ReconstructedNetwork {
        net: Network::new(layers, activation)?,
        scale: v,
        weighting: w.clone(),
        units,
    })
}

impl ReconstructedNetwork {
    pub fn from_sampler(cs: &ConditionalSampler, counts: &PathCounts) -> Result<Self> {
        reconstruct(
            &empirical_markov(counts),
            cs.variation(),
            cs.chain().weighting(),
            cs.network().activation(),
        )
    }

    /// `f(x'; p̃)` without the `V` factor.
    pub fn forward_unscaled(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.weighting.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.weighting.dim(),
                got: x.len(),
                context: "reconstructed forward",
            });
        }
        self.net.forward(&self.weighting.rescale(x))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .forward_unscaled(x)?
            .into_iter()
            .map(|y| scale_signed(y, self.scale))
            .collect())
    }

    pub fn forward_batch(&self, data: &Dataset) -> Result<Matrix> {
        let mut out = Matrix::zeros(data.len(), self.net.output_dim());
        for (i, x) in data.rows().enumerate() {
            for (j, y) in self.forward(x)?.into_iter().enumerate() {
                out[(i, j)] = y;
            }
        }
        Ok(out)
    }

    /// A plain network computing the same function (`V` folded into the last
    /// layer, `1/w0` into the first).
    pub fn to_network(&self) -> Result<Network> {
        let depth = self.net.depth();
        let w0 = &self.weighting.w0;
        let scale = self.scale;
        let net = self.net.map_layers(|l, m| {
            let mut m = m.clone();
            if l == 1 {
                m = Matrix::from_fn(m.rows(), m.cols(), |i, j| {
                    if w0[j] == 0.0 {
                        0.0
                    } else {
                        m[(i, j)] / w0[j]
                    }
                });
            }
            if l == depth {
                m = m.map(|x| scale_signed(x, scale));
            }
            m
        })?;
        Ok(net)
    }
}

fn scale_signed(x: f64, s: LogScaled) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * (LogScaled::from_f64(x.abs()) * s).to_f64()
    }
}

/// Size report for a compressed network.
#[derive(Debug, Clone, Serialize)]
pub struct CompressionStats {
    pub m: u64,
    pub depth: usize,
    pub nnz: usize,
    pub nnz_bound: u64,
    /// Visited sign-split nodes per layer `0..=L`.
    pub visited: Vec<usize>,
    pub precision_digits: f64,
}

pub fn compression_stats(em: &EmpiricalMarkov) -> Result<CompressionStats> {
    let nnz = em.nnz();
    let bound = em.depth() as u64 * em.m;
    if nnz as u64 > bound {
        return Err(Error::InvalidArgument(format!(
            "{nnz} nonzero parameters exceed L·M = {bound}"
        )));
    }
    Ok(CompressionStats {
        m: em.m,
        depth: em.depth(),
        nnz,
        nnz_bound: bound,
        visited: em.visited.iter().map(Vec::len).collect(),
        precision_digits: (em.m as f64).log10(),
    })
}
