//! Path variations, path complexities, marginals, path norms and the matrix
//! norms used to bound them.
//!
//! Everything is computed from absolute-value matrix chains. The prefix
//! vectors `a_ℓ = |W_ℓ| a_{ℓ-1}` (with `a_0` the input weighting) and suffix
//! vectors `b_ℓ = |W_{ℓ+1}|ᵀ b_{ℓ+1}` (with `b_L = 𝟙`) give the total path mass
//! `V = Σ a_L` and every layer marginal `a_ℓ ⊙ b_ℓ / V` without enumerating
//! paths. [`enumerate_paths_oracle`] is the brute-force reference.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_p, Matrix};
use crate::net::{Dataset, Network, Sign};
use crate::rng;
use crate::scaled::{frexp, ldexp, LogScaled, ScaledVec};

/// Per-coordinate input weights `w0` for a given `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputWeighting {
    pub q: f64,
    pub w0: Vec<f64>,
}

impl InputWeighting {
    pub fn new(q: f64, w0: Vec<f64>) -> Result<Self> {
        check_q(q)?;
        if w0.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "input weights must be finite and nonnegative".into(),
            ));
        }
        Ok(InputWeighting { q, w0 })
    }

    /// `w0 = 𝟙`.
    pub fn ones(d: usize) -> Self {
        InputWeighting {
            q: 1.0,
            w0: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.w0.len()
    }

    /// `x / w0` coordinate-wise, with `0` where `w0 = 0`.
    pub fn rescale(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.w0)
            .map(|(&v, &w)| if w == 0.0 { 0.0 } else { v / w })
            .collect()
    }
}

fn check_q(q: f64) -> Result<()> {
    if q >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("q = {q} must lie in [1, ∞]")))
    }
}

/// Conjugate exponent `q*` with `1/q + 1/q* = 1`.
pub fn conjugate(q: f64) -> f64 {
    if q == 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

/// `q = 1`: `max_x |x_j|`; otherwise `(mean_x |x_j|^{q*})^{1/q*}`.
pub fn input_weights(data: &Dataset, q: f64) -> Result<InputWeighting> {
    check_q(q)?;
    if data.is_empty() {
        return Err(Error::InvalidDataset("empty dataset".into()));
    }
    let d = data.dim();
    let n = data.len() as f64;
    let w0 = if q == 1.0 {
        (0..d)
            .map(|j| data.rows().fold(0.0f64, |m, x| m.max(x[j].abs())))
            .collect()
    } else {
        let qs = conjugate(q);
        (0..d)
            .map(|j| {
                if qs == 2.0 {
                    (data.rows().map(|x| x[j] * x[j]).sum::<f64>() / n).sqrt()
                } else {
                    (data.rows().map(|x| x[j].abs().powf(qs)).sum::<f64>() / n).powf(1.0 / qs)
                }
            })
            .collect()
    };
    Ok(InputWeighting { q, w0 })
}

/// Marginal index space: original units, or sign-split `(unit, sign)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Collapsed,
    Doubled,
}

/// Prefix/suffix absolute propagation vectors of a network.
#[derive(Debug, Clone)]
pub struct PathChain {
    net: Network,
    abs_layers: Vec<Matrix>,
    weighting: InputWeighting,
    a: Vec<ScaledVec>,
    b: Vec<ScaledVec>,
    variation: LogScaled,
}

impl PathChain {
    pub fn build(net: &Network, weighting: &InputWeighting) -> Result<Self> {
        if weighting.dim() != net.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: net.input_dim(),
                got: weighting.dim(),
                context: "input weighting",
            });
        }
        let abs_layers: Vec<Matrix> = net.layers().iter().map(Matrix::abs).collect();
        let mut a = Vec::with_capacity(abs_layers.len() + 1);
        a.push(ScaledVec::new(weighting.w0.clone()));
        for w in &abs_layers {
            let next = a.last().expect("nonempty").apply(w);
            a.push(next);
        }
        let mut b = vec![ScaledVec::ones(net.output_dim())];
        for w in abs_layers.iter().rev() {
            let next = b.last().expect("nonempty").apply_t(w);
            b.push(next);
        }
        b.reverse();
        let variation = a.last().expect("nonempty").sum();
        Ok(PathChain {
            net: net.clone(),
            abs_layers,
            weighting: weighting.clone(),
            a,
            b,
            variation,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn weighting(&self) -> &InputWeighting {
        &self.weighting
    }

    pub fn depth(&self) -> usize {
        self.abs_layers.len()
    }

    /// `|W_ℓ|`, 1-based.
    pub fn abs_layer(&self, l: usize) -> &Matrix {
        &self.abs_layers[l - 1]
    }

    /// Prefix vector `a_ℓ`, `ℓ = 0..=L`.
    pub fn prefix(&self, l: usize) -> &ScaledVec {
        &self.a[l]
    }

    /// Suffix vector `b_ℓ`, `ℓ = 0..=L`.
    pub fn suffix(&self, l: usize) -> &ScaledVec {
        &self.b[l]
    }

    pub fn variation(&self) -> LogScaled {
        self.variation
    }

    pub fn is_degenerate(&self) -> bool {
        self.variation.is_zero()
    }

    fn ensure_nondegenerate(&self) -> Result<()> {
        if self.is_degenerate() {
            Err(Error::DegenerateVariation)
        } else {
            Ok(())
        }
    }

    /// `Σ_j a_ℓ[j]·b_ℓ[j]`, which equals `V` at every layer.
    pub fn layer_mass(&self, l: usize) -> LogScaled {
        self.a[l].dot(&self.b[l])
    }

    /// Layer-`ℓ` marginal of the path distribution, `1 ≤ ℓ ≤ L-1`.
    ///
    /// Doubled marginals are laid out `[(j,+)…, (j,−)…]`; copy `(j,τ)` carries the
    /// mass of paths whose edge leaving `j` has sign `τ`.
    pub fn marginal(&self, l: usize, mode: Mode) -> Result<Vec<f64>> {
        let depth = self.depth();
        if l == 0 || l >= depth {
            return Err(Error::InvalidArgument(format!(
                "marginal layer {l} outside 1..={}",
                depth - 1
            )));
        }
        self.ensure_nondegenerate()?;
        let v = self.variation;
        let a = &self.a[l];
        match mode {
            Mode::Collapsed => {
                let b = &self.b[l];
                Ok((0..a.len()).map(|j| (a.get(j) * b.get(j)).ratio(&v)).collect())
            }
            Mode::Doubled => {
                let w_next = self.net.layer(l + 1);
                let b_next = &self.b[l + 1];
                let split = |keep: Sign| {
                    let m = w_next.map(|x| if Sign::of(x) == keep { x.abs() } else { 0.0 });
                    b_next.apply_t(&m)
                };
                let pos = split(Sign::Pos);
                let neg = split(Sign::Neg);
                let width = a.len();
                let mut out = vec![0.0; 2 * width];
                for j in 0..width {
                    out[j] = (a.get(j) * pos.get(j)).ratio(&v);
                    out[width + j] = (a.get(j) * neg.get(j)).ratio(&v);
                }
                Ok(out)
            }
        }
    }

    /// `ζ = (1/L)(1 + Σ_{ℓ=1}^{L-1} Σ_i √p_ℓ[i])`.
    pub fn complexity(&self, mode: Mode) -> Result<f64> {
        self.ensure_nondegenerate()?;
        let depth = self.depth();
        let mut total = 1.0;
        for l in 1..depth {
            total += renyi_half_exp(&self.marginal(l, mode)?);
        }
        Ok(total / depth as f64)
    }

    pub fn measures(&self, mode: Mode) -> Result<PathMeasures> {
        self.ensure_nondegenerate()?;
        let marginals = (1..self.depth())
            .map(|l| self.marginal(l, mode))
            .collect::<Result<Vec<_>>>()?;
        let zeta = (1.0 + marginals.iter().map(|p| renyi_half_exp(p)).sum::<f64>())
            / self.depth() as f64;
        Ok(PathMeasures {
            variation: self.variation,
            zeta,
            marginals,
            mode,
        })
    }
}

/// `𝒱_q`, `ζ_q` and the layer marginals they come from.
#[derive(Debug, Clone, Serialize)]
pub struct PathMeasures {
    pub variation: LogScaled,
    pub zeta: f64,
    /// Marginals for `ℓ = 1..L-1`.
    pub marginals: Vec<Vec<f64>>,
    pub mode: Mode,
}

pub fn build_chain(net: &Network, w: &InputWeighting) -> Result<PathChain> {
    PathChain::build(net, w)
}

/// `𝒱_q(net; S)`.
pub fn variation(net: &Network, data: &Dataset, q: f64) -> Result<LogScaled> {
    Ok(PathChain::build(net, &input_weights(data, q)?)?.variation())
}

pub fn marginal(net: &Network, w: &InputWeighting, l: usize, mode: Mode) -> Result<Vec<f64>> {
    PathChain::build(net, w)?.marginal(l, mode)
}

/// `e^{½H_{1/2}(p)} = Σ_i √p_i`.
pub fn renyi_half_exp(p: &[f64]) -> f64 {
    p.iter().map(|&x| x.max(0.0).sqrt()).sum()
}

/// `ζ_q(net; S)`.
pub fn path_complexity(net: &Network, data: &Dataset, q: f64, mode: Mode) -> Result<f64> {
    PathChain::build(net, &input_weights(data, q)?)?.complexity(mode)
}

/// `|W_L|⋯|W_1|` as `(mantissas, exponent)`, value `= mantissas · 2^exponent`.
pub fn product_abs_scaled(net: &Network) -> (Matrix, i64) {
    let mut p = net.layer(1).abs();
    let mut exponent = 0i64;
    for l in 1..=net.depth() {
        if l > 1 {
            p = net.layer(l).abs().matmul(&p);
        }
        let max = p.max_abs();
        if max > 0.0 {
            let (_, e) = frexp(max);
            if e != 0 {
                p = p.map(|v| ldexp(v, -e));
                exponent += e;
            }
        }
    }
    (p, exponent)
}

/// `|W_L|⋯|W_1|` rendered to floats; errors if it does not fit.
pub fn product_abs(net: &Network) -> Result<Matrix> {
    let (p, e) = product_abs_scaled(net);
    let out = p.map(|v| ldexp(v, e));
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::Overflow {
            log2: p.max_abs().log2() + e as f64,
        })
    }
}

/// Which vector norm induces the matrix norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InducedNorm {
    One,
    Two,
    Inf,
}

impl InducedNorm {
    pub fn from_q(q: f64) -> Result<Self> {
        if q == 1.0 {
            Ok(InducedNorm::One)
        } else if q == 2.0 {
            Ok(InducedNorm::Two)
        } else if q.is_infinite() {
            Ok(InducedNorm::Inf)
        } else {
            Err(Error::InvalidArgument(format!(
                "induced norm only available for q in {{1, 2, ∞}}, got {q}"
            )))
        }
    }
}

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 10_000;
const POWER_SEED: u64 = 0x5eed_0f5e_ed00;

/// Induced matrix norm: max column sum (1), spectral (2), max row sum (∞).
pub fn induced_norm(a: &Matrix, q: InducedNorm) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    match q {
        InducedNorm::One => Ok((0..a.cols())
            .map(|j| a.col(j).map(f64::abs).sum::<f64>())
            .fold(0.0, f64::max)),
        InducedNorm::Inf => Ok((0..a.rows())
            .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)),
        InducedNorm::Two => spectral_norm(a),
    }
}

/// Largest singular value by power iteration on `AᵀA` from a fixed start.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let a = a.scale(1.0 / scale);
    let mut r = rng::stream(POWER_SEED, 0);
    let mut v: Vec<f64> = (0..a.cols()).map(|_| r.random_range(0.5..1.5)).collect();
    normalize(&mut v);
    let mut sigma = 0.0f64;
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERS {
        let u = a.matvec(&v);
        let next_sigma = norm_p(&u, 2.0);
        let mut w = a.matvec_t(&u);
        let lambda = next_sigma * next_sigma;
        residual = if lambda > 0.0 {
            w.iter()
                .zip(&v)
                .map(|(wi, vi)| (wi - lambda * vi).powi(2))
                .sum::<f64>()
                .sqrt()
                / lambda
        } else {
            0.0
        };
        let wn = norm_p(&w, 2.0);
        if wn == 0.0 {
            return Ok(next_sigma * scale);
        }
        w.iter_mut().for_each(|x| *x /= wn);
        v = w;
        if (next_sigma - sigma).abs() <= POWER_TOL * next_sigma {
            return Ok(next_sigma * scale);
        }
        sigma = next_sigma;
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_ITERS,
        residual,
    })
}

fn normalize(v: &mut [f64]) {
    let n = norm_p(v, 2.0);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Which axis the outer sum of a `(q,1)` group norm runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// Sum over rows of row `ℓ_q` norms.
    Rows,
    /// Sum over columns of column `ℓ_q` norms.
    Columns,
}

/// `(q,1)` group norm; row orientation unless asked otherwise.
pub fn group_norm_q1(a: &Matrix, q: f64, orientation: Orientation) -> Result<f64> {
    check_q(q)?;
    Ok(match orientation {
        Orientation::Rows => (0..a.rows()).map(|i| norm_p(a.row(i), q)).sum(),
        Orientation::Columns => (0..a.cols())
            .map(|j| norm_p(&a.col(j).collect::<Vec<_>>(), q))
            .sum(),
    })
}

/// Upper bounds on `𝒱_q` from norms of `∏|W_ℓ|`.
#[derive(Debug, Clone, Serialize)]
pub struct VariationBounds {
    pub q: f64,
    /// `max‖x‖_{q*} · k^{1-1/q*} · ‖∏|W|‖_{q*}` (induced).
    pub induced: LogScaled,
    /// `max‖x‖_{q*} · ‖∏|W|‖_{q,1}`, rows of the product summed.
    pub group: LogScaled,
    /// Same with columns summed; not a valid bound when `k > 1`, reported
    /// for comparison only.
    pub group_definitional: LogScaled,
    pub variation: LogScaled,
}

pub fn variation_bounds(net: &Network, data: &Dataset, q: f64) -> Result<VariationBounds> {
    if q != 1.0 && q != 2.0 {
        return Err(Error::InvalidArgument(format!(
            "variation bounds need q in {{1, 2}}, got {q}"
        )));
    }
    let qs = conjugate(q);
    let radius = data.rows().map(|x| norm_p(x, qs)).fold(0.0, f64::max);
    let k = net.output_dim() as f64;
    let (p, e) = product_abs_scaled(net);
    let scale = |m: f64| {
        if m == 0.0 || radius == 0.0 {
            LogScaled::ZERO
        } else {
            LogScaled::from_parts(m, e) * LogScaled::from_f64(radius)
        }
    };
    let k_factor = if qs.is_infinite() { k } else { k.powf(1.0 - 1.0 / qs) };
    let induced = scale(induced_norm(&p, InducedNorm::from_q(qs)?)? * k_factor);
    let group = scale(group_norm_q1(&p, q, Orientation::Rows)?);
    let group_definitional = scale(group_norm_q1(&p, q, Orientation::Columns)?);
    Ok(VariationBounds {
        q,
        induced,
        group,
        group_definitional,
        variation: variation(net, data, q)?,
    })
}

/// Per-output path norms `φ_p[j_L]` and their sum.
#[derive(Debug, Clone, Serialize)]
pub struct PathNorm {
    pub p: f64,
    pub per_output: Vec<LogScaled>,
    pub total: LogScaled,
}

/// `φ_p[j_L] = (Σ_{paths → j_L} ∏|w|^p)^{1/p}`, via entrywise `p`-th powers.
pub fn path_norm_phi(net: &Network, p: f64) -> Result<PathNorm> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("path norm exponent {p} must be ≥ 1")));
    }
    let mut v = ScaledVec::ones(net.input_dim());
    for w in net.layers() {
        let wp = if p == 1.0 {
            w.abs()
        } else if p == 2.0 {
            w.map(|x| x * x)
        } else {
            w.map(|x| x.abs().powf(p))
        };
        if !wp.is_finite() {
            return Err(Error::Overflow {
                log2: wp.max_abs().log2(),
            });
        }
        v = v.apply(&wp);
    }
    let per_output: Vec<LogScaled> = (0..v.len()).map(|j| v.get(j).powf(1.0 / p)).collect();
    let total = per_output.iter().copied().sum();
    Ok(PathNorm {
        p,
        per_output,
        total,
    })
}

/// Maximum number of paths [`enumerate_paths_oracle`] will visit.
pub const ENUMERATION_LIMIT: f64 = 1e6;

/// Brute-force path enumeration.
#[derive(Debug, Clone)]
pub struct PathEnumeration {
    /// `Σ_paths w0_{j0} ∏|w|`.
    pub variation: f64,
    /// Collapsed marginals for `ℓ = 1..L-1`.
    pub marginals: Vec<Vec<f64>>,
    /// Doubled marginals for `ℓ = 1..L-1`, layout `[(j,+)…, (j,−)…]`.
    pub doubled_marginals: Vec<Vec<f64>>,
    /// Every path `(j_0,…,j_L)` with its signed weight product `∏ w` (no `w0`).
    pub paths: Vec<(Vec<usize>, f64)>,
}

pub fn enumerate_paths_oracle(net: &Network, w: &InputWeighting) -> Result<PathEnumeration> {
    let count = net.path_count();
    if count > ENUMERATION_LIMIT {
        return Err(Error::GuardExceeded {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    if w.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: w.dim(),
            context: "input weighting",
        });
    }
    let dims = net.dims();
    let depth = net.depth();
    let mut idx = vec![0usize; depth + 1];
    let mut paths = Vec::with_capacity(count as usize);
    let mut mass = Vec::with_capacity(count as usize);
    loop {
        let mut prod = 1.0;
        for l in 1..=depth {
            prod *= net.layer(l)[(idx[l], idx[l - 1])];
        }
        mass.push(w.w0[idx[0]] * prod.abs());
        paths.push((idx.clone(), prod));
        // odometer increment, j_0 fastest
        let mut pos = 0;
        loop {
            if pos > depth {
                break;
            }
            idx[pos] += 1;
            if idx[pos] < dims[pos] {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos > depth {
            break;
        }
    }
    let variation: f64 = mass.iter().sum();
    let mut marginals: Vec<Vec<f64>> = (1..depth).map(|l| vec![0.0; dims[l]]).collect();
    let mut doubled: Vec<Vec<f64>> = (1..depth).map(|l| vec![0.0; 2 * dims[l]]).collect();
    if variation > 0.0 {
        for ((path, _), &m) in paths.iter().zip(&mass) {
            for l in 1..depth {
                let j = path[l];
                marginals[l - 1][j] += m / variation;
                let sign = Sign::of(net.layer(l + 1)[(path[l + 1], j)]);
                doubled[l - 1][sign.doubled_index(j, dims[l])] += m / variation;
            }
        }
    }
    Ok(PathEnumeration {
        variation,
        marginals,
        doubled_marginals: doubled,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{chain_111, net_a, random_network, s_a};
    use crate::net::Activation;
    use rand::SeedableRng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn input_weight_examples() {
        assert_eq!(input_weights(&s_a(), 1.0).unwrap().w0, vec![1.0, 1.0]);
        let w2 = input_weights(&s_a(), 2.0).unwrap().w0;
        assert!(w2.iter().all(|&w| (w - (2.0f64 / 3.0).sqrt()).abs() < 1e-15));
        let single = Dataset::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(input_weights(&single, 2.0).unwrap().w0, vec![3.0, 4.0]);
        assert!(input_weights(&s_a(), 0.5).is_err());
        let winf = input_weights(&s_a(), f64::INFINITY).unwrap().w0;
        assert!((winf[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn chain_examples() {
        let chain = build_chain(&net_a(), &InputWeighting::ones(2)).unwrap();
        assert_eq!(chain.prefix(1).to_vec(), vec![3.0, 7.0]);
        assert_eq!(chain.variation().to_f64(), 10.0);
        let c = build_chain(&chain_111(), &InputWeighting::ones(1)).unwrap();
        assert_eq!(c.variation().to_f64(), 6.0);
        let zero = net_a().map_layers(|_, w| w.scale(0.0)).unwrap();
        let z = build_chain(&zero, &InputWeighting::ones(2)).unwrap();
        assert!(z.is_degenerate());
        assert!(matches!(z.marginal(1, Mode::Collapsed), Err(Error::DegenerateVariation)));
        assert!(build_chain(&net_a(), &InputWeighting::ones(3)).is_err());
    }

    #[test]
    fn variation_examples() {
        assert_eq!(variation(&net_a(), &s_a(), 1.0).unwrap().to_f64(), 10.0);
        let v2 = variation(&net_a(), &s_a(), 2.0).unwrap().to_f64();
        assert!(close(v2, 10.0 * (2.0f64 / 3.0).sqrt(), 1e-14));
        assert!((v2 - 8.16497).abs() < 1e-5);
    }

    #[test]
    fn marginal_examples() {
        let w = InputWeighting::ones(2);
        let p = marginal(&net_a(), &w, 1, Mode::Collapsed).unwrap();
        assert!(close(p[0], 0.3, 1e-15) && close(p[1], 0.7, 1e-15));
        let pd = marginal(&net_a(), &w, 1, Mode::Doubled).unwrap();
        assert!(close(pd[0], 0.3, 1e-15) && close(pd[1], 0.7, 1e-15));
        assert_eq!(&pd[2..], &[0.0, 0.0]);
        let ones = Network::new(
            vec![Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]), Matrix::from_rows(&[[1.0, 1.0]])],
            Activation::Relu,
        )
        .unwrap();
        assert_eq!(marginal(&ones, &w, 1, Mode::Collapsed).unwrap(), vec![0.5, 0.5]);
        assert!(marginal(&net_a(), &w, 2, Mode::Collapsed).is_err());
    }

    #[test]
    fn renyi_examples() {
        assert_eq!(renyi_half_exp(&[1.0]), 1.0);
        assert!((renyi_half_exp(&[0.5, 0.5]) - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((renyi_half_exp(&[0.3, 0.7]) - 1.38438).abs() < 1e-5);
    }

    #[test]
    fn complexity_examples() {
        let z = path_complexity(&net_a(), &s_a(), 1.0, Mode::Doubled).unwrap();
        assert!((z - 1.19219).abs() < 1e-5);
        let one = Dataset::from_rows(&[[1.0]]).unwrap();
        assert_eq!(path_complexity(&chain_111(), &one, 1.0, Mode::Doubled).unwrap(), 1.0);
        let uniform = Network::new(
            vec![Matrix::from_fn(4, 3, |_, _| 1.0), Matrix::from_fn(1, 4, |_, _| 1.0)],
            Activation::Relu,
        )
        .unwrap();
        let data = Dataset::from_rows(&[[1.0, 1.0, 1.0]]).unwrap();
        assert!(close(path_complexity(&uniform, &data, 1.0, Mode::Collapsed).unwrap(), 1.5, 1e-15));
    }

    #[test]
    fn product_abs_examples() {
        assert_eq!(product_abs(&net_a()).unwrap(), Matrix::from_rows(&[[4.0, 6.0]]));
        let id = Network::new(vec![Matrix::identity(3), Matrix::identity(3)], Activation::Relu).unwrap();
        assert_eq!(product_abs(&id).unwrap(), Matrix::identity(3));
        let zero = net_a().map_layers(|_, w| w.scale(0.0)).unwrap();
        assert_eq!(product_abs(&zero).unwrap(), Matrix::zeros(1, 2));
        let huge = Network::new(
            (0..40).map(|_| Matrix::from_rows(&[[1e10]])).collect(),
            Activation::Relu,
        )
        .unwrap();
        assert!(matches!(product_abs(&huge), Err(Error::Overflow { .. })));
        let (m, e) = product_abs_scaled(&huge);
        assert!((LogScaled::from_parts(m[(0, 0)], e).log10() - 400.0).abs() < 1e-9);
    }

    #[test]
    fn induced_norm_examples() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(induced_norm(&a, InducedNorm::Inf).unwrap(), 7.0);
        assert_eq!(induced_norm(&a, InducedNorm::One).unwrap(), 6.0);
        let d = Matrix::from_rows(&[[3.0, 0.0], [0.0, 4.0]]);
        assert!((induced_norm(&d, InducedNorm::Two).unwrap() - 4.0).abs() < 1e-9);
        assert_eq!(induced_norm(&Matrix::zeros(2, 3), InducedNorm::Two).unwrap(), 0.0);
        assert!(InducedNorm::from_q(3.0).is_err());
    }

    #[test]
    fn spectral_matches_svd() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let r = rng.random_range(1..10);
            let c = rng.random_range(1..10);
            let m = crate::fixtures::gaussian_matrix(&mut rng, r, c);
            let na = nalgebra::DMatrix::from_row_slice(r, c, m.as_slice());
            let expect = na.singular_values().max();
            let got = spectral_norm(&m).unwrap();
            assert!((got - expect).abs() <= 1e-8 * expect, "{got} vs {expect}");
        }
    }

    #[test]
    fn group_norm_examples() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert!((group_norm_q1(&a, 2.0, Orientation::Rows).unwrap() - 7.23607).abs() < 1e-5);
        assert_eq!(group_norm_q1(&Matrix::from_rows(&[[4.0, 6.0]]), 1.0, Orientation::Rows).unwrap(), 10.0);
        assert_eq!(group_norm_q1(&Matrix::identity(2), 2.0, Orientation::Rows).unwrap(), 2.0);
        assert!(
            (group_norm_q1(&a, 2.0, Orientation::Columns).unwrap() - (10f64.sqrt() + 20f64.sqrt())).abs()
                < 1e-12
        );
    }

    #[test]
    fn variation_bound_examples() {
        let b1 = variation_bounds(&net_a(), &s_a(), 1.0).unwrap();
        assert_eq!(b1.induced.to_f64(), 10.0);
        assert_eq!(b1.group.to_f64(), 10.0);
        let b2 = variation_bounds(&net_a(), &s_a(), 2.0).unwrap();
        assert!((b2.induced.to_f64() - 2f64.sqrt() * 52f64.sqrt()).abs() < 1e-8);
        assert!((b2.group.to_f64() - 2f64.sqrt() * 52f64.sqrt()).abs() < 1e-12);
        assert!((b2.group_definitional.to_f64() - 14.142).abs() < 1e-3);
        assert!(b2.induced >= b2.variation && b2.group >= b2.variation);
        let zero = net_a().map_layers(|_, w| w.scale(0.0)).unwrap();
        let bz = variation_bounds(&zero, &s_a(), 1.0).unwrap();
        assert!(bz.induced.is_zero() && bz.group.is_zero());
        assert!(variation_bounds(&net_a(), &s_a(), 3.0).is_err());
    }

    #[test]
    fn path_norm_examples() {
        assert!((path_norm_phi(&net_a(), 2.0).unwrap().total.to_f64() - 30f64.sqrt()).abs() < 1e-12);
        assert_eq!(path_norm_phi(&net_a(), 1.0).unwrap().total.to_f64(), 10.0);
        assert!((path_norm_phi(&chain_111(), 3.0).unwrap().total.to_f64() - 6.0).abs() < 1e-12);
        assert!(path_norm_phi(&net_a(), 0.5).is_err());
    }

    #[test]
    fn oracle_examples() {
        let e = enumerate_paths_oracle(&net_a(), &InputWeighting::ones(2)).unwrap();
        assert_eq!(e.variation, 10.0);
        assert!(close(e.marginals[0][0], 0.3, 1e-15));
        assert_eq!(e.paths.len(), 4);
        let c = enumerate_paths_oracle(&chain_111(), &InputWeighting::ones(1)).unwrap();
        assert_eq!(c.paths, vec![(vec![0, 0, 0], -6.0)]);
        let deep = Network::new(
            std::iter::once(Matrix::zeros(8, 8)).chain((1..10).map(|_| Matrix::zeros(8, 8))).collect(),
            Activation::Relu,
        )
        .unwrap();
        assert!(matches!(
            enumerate_paths_oracle(&deep, &InputWeighting::ones(8)),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn chain_consistency_and_mode_ordering() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let depth = rng.random_range(2..6);
            let net = random_network(&mut rng, depth, 7, Activation::Relu);
            let data = crate::fixtures::gaussian_dataset(&mut rng, 5, net.input_dim());
            let chain = build_chain(&net, &input_weights(&data, 2.0).unwrap()).unwrap();
            let v = chain.variation();
            for l in 0..=net.depth() {
                assert!(chain.layer_mass(l).rel_diff(&v) <= 1e-10);
            }
            for l in 1..net.depth() {
                let c = renyi_half_exp(&chain.marginal(l, Mode::Collapsed).unwrap());
                let d = renyi_half_exp(&chain.marginal(l, Mode::Doubled).unwrap());
                assert!(d >= c - 1e-12);
            }
            let zc = chain.complexity(Mode::Collapsed).unwrap();
            let zd = chain.complexity(Mode::Doubled).unwrap();
            assert!(zd >= zc - 1e-12 && zc >= 1.0 - 1e-12);
            let dims = net.dims();
            let cap = (1.0 + dims[1..net.depth()].iter().map(|&w| ((2 * w) as f64).sqrt()).sum::<f64>())
                / net.depth() as f64;
            assert!(zd <= cap + 1e-12);
        }
    }

    #[test]
    fn doubled_marginals_match_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let net = random_network(&mut rng, 3, 4, Activation::Relu);
            let w = InputWeighting::ones(net.input_dim());
            let chain = build_chain(&net, &w).unwrap();
            let e = enumerate_paths_oracle(&net, &w).unwrap();
            for l in 1..net.depth() {
                let got = chain.marginal(l, Mode::Doubled).unwrap();
                for (g, o) in got.iter().zip(&e.doubled_marginals[l - 1]) {
                    assert!((g - o).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn deep_chain_does_not_overflow() {
        let layers: Vec<Matrix> = (0..1000).map(|_| Matrix::from_rows(&[[3.0, 1.0], [1.0, 3.0]])).collect();
        let net = Network::new(layers, Activation::Relu).unwrap();
        let chain = build_chain(&net, &InputWeighting::ones(2)).unwrap();
        // every layer multiplies the uniform vector by 4
        assert!((chain.variation().log2() - 2001.0).abs() < 1e-9);
        let z = chain.complexity(Mode::Doubled).unwrap();
        assert!(z > 1.0 && z.is_finite());
    }
}
