//! Margins, losses, generalisation bounds and capacity tables.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::measures::{
    induced_norm, input_weights, path_norm_phi, product_abs_scaled, group_norm_q1, InducedNorm, Mode, Orientation,
    PathChain,
};
use crate::net::{Dataset, Network};
use crate::par::{self, Exec};
use crate::rng;
use crate::sampler::{sample_paths_with, ConditionalSampler, ReconstructedNetwork, SampleOptions};
use crate::scaled::LogScaled;

/// `v_y − max_{j≠y} v_j` (`y` 0-based).
pub fn margin(v: &[f64], y: usize) -> Result<f64> {
    if v.len() < 2 {
        return Err(Error::InvalidArgument("margin needs at least two outputs".into()));
    }
    if y >= v.len() {
        return Err(Error::InvalidArgument(format!("label {} out of range 1..={}", y + 1, v.len())));
    }
    let other = v
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != y)
        .map(|(_, &x)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(v[y] - other)
}

/// `R_γ(z)`: 0 below `−γ`, `1 + z/γ` on `[−γ, 0]`, 1 above 0.
pub fn ramp(gamma: f64, z: f64) -> f64 {
    if z < -gamma {
        0.0
    } else if z > 0.0 {
        1.0
    } else {
        1.0 + z / gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Losses {
    /// `ℓ̂`: fraction with margin ≤ 0.
    pub classification: f64,
    /// `ℓ̂_γ`: fraction with margin ≤ γ.
    pub margin: f64,
    /// Mean of `R_γ(−ℳ)`.
    pub ramp: f64,
    pub gamma: f64,
}

pub fn losses_from_margins(margins: &[f64], gamma: f64) -> Result<Losses> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("γ = {gamma} must be positive")));
    }
    if margins.is_empty() {
        return Err(Error::InvalidDataset("no margins".into()));
    }
    let n = margins.len() as f64;
    let frac = |f: &dyn Fn(f64) -> bool| margins.iter().filter(|&&m| f(m)).count() as f64 / n;
    Ok(Losses {
        classification: frac(&|m| m <= 0.0),
        margin: frac(&|m| m <= gamma),
        ramp: margins.iter().map(|&m| ramp(gamma, -m)).sum::<f64>() / n,
        gamma,
    })
}

/// Raw margins of `net` on a labelled dataset.
pub fn raw_margins(net: &Network, data: &Dataset) -> Result<Vec<f64>> {
    let labels = data.labels().ok_or(Error::MissingLabels("margins"))?;
    data.check_labels(net.output_dim())?;
    let out = net.forward_batch(data)?;
    labels.iter().enumerate().map(|(i, &y)| margin(out.row(i), y)).collect()
}

pub fn losses(net: &Network, data: &Dataset, gamma: f64) -> Result<Losses> {
    losses_from_margins(&raw_margins(net, data)?, gamma)
}

/// Median of the positive margins, if any.
pub fn default_gamma(margins: &[f64]) -> Option<f64> {
    let mut pos: Vec<f64> = margins.iter().copied().filter(|&m| m > 0.0).collect();
    if pos.is_empty() {
        return None;
    }
    pos.sort_by(f64::total_cmp);
    let n = pos.len();
    Some(if n % 2 == 1 {
        pos[n / 2]
    } else {
        0.5 * (pos[n / 2 - 1] + pos[n / 2])
    })
}

pub const HISTOGRAM_BINS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Uniform bins over `[min, max]` of the values; the last bin is closed.
    pub fn uniform(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0u64; bins];
        if values.is_empty() {
            return Histogram { lo: 0.0, hi: 0.0, counts };
        }
        let width = hi - lo;
        for &v in values {
            let b = if width > 0.0 {
                (((v - lo) / width * bins as f64) as usize).min(bins - 1)
            } else {
                0
            };
            counts[b] += 1;
        }
        Histogram { lo, hi, counts }
    }

    /// `(bin_lo, bin_hi, count)` rows.
    pub fn bins(&self) -> Vec<(f64, f64, u64)> {
        let n = self.counts.len() as f64;
        let w = self.hi - self.lo;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (self.lo + w * i as f64 / n, self.lo + w * (i + 1) as f64 / n, c))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginStats {
    pub raw: Vec<f64>,
    /// `raw / 𝒱_1`.
    pub normalized: Vec<f64>,
    pub v1: LogScaled,
    pub histogram: Histogram,
}

pub fn normalized_margins(net: &Network, data: &Dataset) -> Result<MarginStats> {
    let raw = raw_margins(net, data)?;
    let v1 = PathChain::build(net, &input_weights(data, 1.0)?)?.variation();
    if v1.is_zero() {
        return Err(Error::DegenerateVariation);
    }
    let normalized: Vec<f64> = raw
        .iter()
        .map(|&m| m.signum() * LogScaled::from_f64(m.abs()).ratio(&v1))
        .collect();
    let histogram = Histogram::uniform(&normalized, HISTOGRAM_BINS);
    Ok(MarginStats {
        raw,
        normalized,
        v1,
        histogram,
    })
}

/// Inputs to the generalisation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub v: f64,
    pub zeta: f64,
    pub depth: usize,
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub gamma: f64,
    pub delta: f64,
    /// `ℓ̂_γ`.
    pub margin_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    Apriori,
    Posthoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    pub mode: BoundMode,
    pub value: f64,
    /// `value ≥ 1`.
    pub vacuous: bool,
    /// `(j1, j2, j3)` for the post-hoc bound.
    pub grid: Option<(u32, u64, u64)>,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("bound inputs: {msg}")));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("δ must lie in (0, 1)");
        }
        if !(self.gamma > 0.0) {
            return bad("γ must be positive");
        }
        if !(self.v >= 0.0) || !(self.zeta >= 0.0) {
            return bad("V and ζ must be nonnegative");
        }
        if self.depth == 0 || self.d == 0 || self.n == 0 || self.k == 0 {
            return bad("L, d, n, k must be positive");
        }
        if !(0.0..=1.0).contains(&self.margin_loss) {
            return bad("margin loss must lie in [0, 1]");
        }
        Ok(())
    }
}

pub fn generalization_bound(b: &BoundInputs, mode: BoundMode) -> Result<BoundValue> {
    b.validate()?;
    let n = b.n as f64;
    let l = b.depth as f64;
    let width = l * (l + (b.d as f64).ln() + 1.0).sqrt();
    let (value, grid) = match mode {
        BoundMode::Apriori => {
            let v = b.margin_loss
                + 8.0 / n
                + 48.0 * b.v * b.zeta * width * n.ln() / (b.gamma * n.sqrt())
                + 3.0 * ((2.0 / b.delta).ln() / (2.0 * n)).sqrt();
            (v, None)
        }
        BoundMode::Posthoc => {
            let target = n.sqrt() / b.gamma;
            let mut j1: u32 = 1;
            while 2f64.powi(j1 as i32) < target {
                j1 += 1;
            }
            let j2 = (b.v.ceil() as u64).max(1);
            let j3 = (b.zeta.ceil() as u64).max(1);
            let conf = (2.0 / b.delta).ln()
                + j1 as f64 * std::f64::consts::LN_2
                + 2.0 * (j2 as f64 + 1.0).ln()
                + 2.0 * (j3 as f64 + 1.0).ln();
            let v = b.margin_loss
                + 8.0 / n
                + 48.0 * 2f64.powi(j1 as i32) * j2 as f64 * j3 as f64 * width * n.ln() / n
                + 3.0 * (conf / (2.0 * n)).sqrt();
            (v, Some((j1, j2, j3)))
        }
    };
    Ok(BoundValue {
        mode,
        value,
        vacuous: !(value < 1.0),
        grid,
    })
}

/// One row of the capacity table.
#[derive(Debug, Clone, Serialize)]
pub struct Capacity {
    pub measure: &'static str,
    pub value: LogScaled,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityReport {
    pub rows: Vec<Capacity>,
    /// `𝒱_2 / φ_2`.
    pub v2_over_phi2: f64,
}

impl CapacityReport {
    pub fn get(&self, measure: &str) -> Option<LogScaled> {
        self.rows.iter().find(|r| r.measure == measure).map(|r| r.value)
    }
}

/// `(2,1)` norm summing column ℓ₂ norms.
fn norm_21(w: &Matrix) -> f64 {
    group_norm_q1(w, 2.0, Orientation::Columns).expect("q = 2")
}

/// Path measures next to the weight-norm products they are usually compared with.
pub fn competing_capacities(net: &Network, data: &Dataset) -> Result<CapacityReport> {
    let c1 = PathChain::build(net, &input_weights(data, 1.0)?)?;
    let c2 = PathChain::build(net, &input_weights(data, 2.0)?)?;
    let phi1 = path_norm_phi(net, 1.0)?.total;
    let phi2 = path_norm_phi(net, 2.0)?.total;
    let mut spectral = Vec::with_capacity(net.depth());
    for w in net.layers() {
        spectral.push(induced_norm(w, InducedNorm::Two)?);
    }
    let prod = |xs: &mut dyn Iterator<Item = f64>| xs.map(LogScaled::from_f64).fold(LogScaled::ONE, |a, b| a * b);
    let prod_spectral = prod(&mut spectral.iter().copied());
    let prod_frob = prod(&mut net.layers().iter().map(Matrix::frobenius));
    let mut inf = Vec::with_capacity(net.depth());
    for w in net.layers() {
        inf.push(induced_norm(w, InducedNorm::Inf)?);
    }
    let prod_inf = prod(&mut inf.into_iter());
    let (p, e) = product_abs_scaled(net);
    let abs_spectral = LogScaled::from_parts(induced_norm(&p, InducedNorm::Two)?, e);
    let abs_inf = LogScaled::from_parts(induced_norm(&p, InducedNorm::Inf)?, e);
    let rbar = net
        .layers()
        .iter()
        .zip(&spectral)
        .map(|(w, &s)| if s > 0.0 { (norm_21(w) / s).powf(2.0 / 3.0) } else { 0.0 })
        .sum::<f64>()
        / net.depth() as f64;
    let zeta = |c: &PathChain, mode| -> Result<f64> {
        if c.is_degenerate() {
            Ok(f64::NAN)
        } else {
            c.complexity(mode)
        }
    };
    let f = LogScaled::from_f64;
    let nan_safe = |x: f64| if x.is_nan() { LogScaled::ZERO } else { f(x) };
    let rows = vec![
        Capacity { measure: "V_1", value: c1.variation() },
        Capacity { measure: "V_2", value: c2.variation() },
        Capacity { measure: "zeta_1", value: nan_safe(zeta(&c1, Mode::Doubled)?) },
        Capacity { measure: "zeta_2", value: nan_safe(zeta(&c2, Mode::Doubled)?) },
        Capacity { measure: "zeta_1_collapsed", value: nan_safe(zeta(&c1, Mode::Collapsed)?) },
        Capacity { measure: "zeta_2_collapsed", value: nan_safe(zeta(&c2, Mode::Collapsed)?) },
        Capacity { measure: "phi_1", value: phi1 },
        Capacity { measure: "phi_2", value: phi2 },
        Capacity { measure: "prod_spectral", value: prod_spectral },
        Capacity { measure: "prod_frobenius", value: prod_frob },
        Capacity { measure: "prod_1_inf", value: prod_inf },
        Capacity { measure: "abs_product_spectral", value: abs_spectral },
        Capacity { measure: "abs_product_1_inf", value: abs_inf },
        Capacity { measure: "rbar", value: f(rbar) },
    ];
    let v2_over_phi2 = if phi2.is_zero() { f64::NAN } else { c2.variation().ratio(&phi2) };
    Ok(CapacityReport { rows, v2_over_phi2 })
}

/// Reconstruction accuracy and error for one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: u64,
    pub mean_acc: f64,
    pub min_acc: f64,
    pub max_acc: f64,
    /// Sample standard deviation of the per-round accuracy.
    pub acc_std: f64,
    pub rounds: usize,
    pub mse: f64,
}

pub fn sweep_accuracy_vs_m(
    net: &Network,
    data: &Dataset,
    q: f64,
    ms: &[u64],
    rounds: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<SweepRow>> {
    let labels = data.labels().ok_or(Error::MissingLabels("sweep"))?;
    data.check_labels(net.output_dim())?;
    if rounds == 0 {
        return Err(Error::InvalidArgument("need at least one round".into()));
    }
    let cs = ConditionalSampler::from_chain(PathChain::build(net, &input_weights(data, q)?)?)?;
    let exact = net.forward_batch(data)?;
    let mut rows = Vec::with_capacity(ms.len());
    for (mi, &m) in ms.iter().enumerate() {
        let results = par::map_range(exec, rounds, |r| -> Result<(f64, f64)> {
            let s = rng::derive_seed(rng::derive_seed(seed, mi as u64), r as u64);
            let opts = SampleOptions {
                exec: Exec::Sequential,
                ..SampleOptions::default()
            };
            let rec = ReconstructedNetwork::from_sampler(&cs, &sample_paths_with(&cs, m, s, opts)?)?;
            let mut correct = 0usize;
            let mut sq = 0.0;
            for (i, x) in data.rows().enumerate() {
                let y = rec.forward(x)?;
                if crate::fixtures::argmax(&y) == labels[i] {
                    correct += 1;
                }
                sq += y.iter().zip(exact.row(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            }
            Ok((correct as f64 / data.len() as f64, sq / data.len() as f64))
        });
        let results = results.into_iter().collect::<Result<Vec<_>>>()?;
        let accs: Vec<f64> = results.iter().map(|r| r.0).collect();
        let est = crate::theory::MCEstimate::from_samples(&accs);
        rows.push(SweepRow {
            m,
            mean_acc: est.mean,
            min_acc: accs.iter().copied().fold(f64::INFINITY, f64::min),
            max_acc: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            acc_std: est.std,
            rounds,
            mse: results.iter().map(|r| r.1).sum::<f64>() / rounds as f64,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{net_a, s_a};
    use crate::net::Activation;

    #[test]
    fn margin_examples() {
        assert_eq!(margin(&[0.0, 0.0], 0).unwrap(), 0.0);
        assert_eq!(margin(&[2.0, 0.5, -1.0], 0).unwrap(), 1.5);
        assert_eq!(margin(&[1.0, 3.0], 0).unwrap(), -2.0);
        assert!(margin(&[1.0], 0).is_err());
        assert!(margin(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn ramp_examples() {
        assert_eq!(ramp(1.0, -2.0), 0.0);
        assert_eq!(ramp(1.0, 0.0), 1.0);
        assert_eq!(ramp(1.0, -0.5), 0.5);
        assert_eq!(ramp(1.0, 3.0), 1.0);
    }

    #[test]
    fn loss_examples() {
        let l = losses_from_margins(&[2.0, 3.0], 1.0).unwrap();
        assert_eq!((l.classification, l.margin, l.ramp), (0.0, 0.0, 0.0));
        let l = losses_from_margins(&[0.0, 0.0, 0.0], 1.0).unwrap();
        assert_eq!((l.classification, l.margin, l.ramp), (1.0, 1.0, 1.0));
        let l = losses_from_margins(&[-1.0, 0.5, 2.0], 1.0).unwrap();
        assert!((l.classification - 1.0 / 3.0).abs() < 1e-15);
        assert!((l.margin - 2.0 / 3.0).abs() < 1e-15);
        assert!((l.ramp - 0.5).abs() < 1e-15);
        assert!(losses_from_margins(&[1.0], 0.0).is_err());
    }

    #[test]
    fn missing_labels_and_single_output_refused() {
        assert!(matches!(losses(&net_a(), &s_a(), 1.0), Err(Error::MissingLabels(_))));
        let labelled = s_a().with_labels(vec![0, 0, 0]).unwrap();
        assert!(normalized_margins(&net_a(), &labelled).is_err());
    }

    #[test]
    fn default_gamma_is_median_positive() {
        assert_eq!(default_gamma(&[-1.0, 1.0, 3.0, 2.0]), Some(2.0));
        assert_eq!(default_gamma(&[4.0, 1.0]), Some(2.5));
        assert_eq!(default_gamma(&[-1.0, 0.0]), None);
    }

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::uniform(&[0.0, 0.5, 1.0, 1.0], 4);
        assert_eq!(h.counts, vec![1, 0, 1, 2]);
        assert_eq!(h.bins()[3], (0.75, 1.0, 2));
        let flat = Histogram::uniform(&[2.0, 2.0], 64);
        assert_eq!(flat.counts.iter().sum::<u64>(), 2);
    }

    fn example_inputs() -> BoundInputs {
        BoundInputs {
            v: 10.0,
            zeta: 1.19219,
            depth: 2,
            d: 2,
            n: 10_000,
            k: 2,
            gamma: 1.0,
            delta: 0.05,
            margin_loss: 0.0,
        }
    }

    #[test]
    fn bound_examples() {
        let b = example_inputs();
        let a = generalization_bound(&b, BoundMode::Apriori).unwrap();
        assert!((a.value / 202.6188043849176 - 1.0).abs() < 1e-6);
        assert!(a.vacuous);
        let p = generalization_bound(&b, BoundMode::Posthoc).unwrap();
        assert_eq!(p.grid, Some((7, 10, 2)));
        assert!((p.value / 435.0803304657975 - 1.0).abs() < 1e-6);
        let bad = BoundInputs { delta: 2.0, ..b };
        assert!(generalization_bound(&bad, BoundMode::Apriori).is_err());
    }

    #[test]
    fn bound_third_term_scaling() {
        let b = example_inputs();
        let third = |n: usize| {
            let x = BoundInputs { n, ..b };
            let full = generalization_bound(&x, BoundMode::Apriori).unwrap().value;
            full - 8.0 / n as f64 - 3.0 * ((2.0 / x.delta).ln() / (2.0 * n as f64)).sqrt()
        };
        let ratio = third(10_000) / third(1_000_000);
        let expect = 10.0 * (10_000f64).ln() / (1_000_000f64).ln();
        assert!((ratio - expect).abs() < 1e-9);
    }

    #[test]
    fn net_a_capacities() {
        let r = competing_capacities(&net_a(), &s_a()).unwrap();
        assert!((r.get("prod_frobenius").unwrap().to_f64() - 60f64.sqrt()).abs() < 1e-12);
        assert!((r.get("prod_1_inf").unwrap().to_f64() - 14.0).abs() < 1e-12);
        assert!((r.get("abs_product_1_inf").unwrap().to_f64() - 10.0).abs() < 1e-12);
        assert!((r.get("prod_spectral").unwrap().to_f64() - 7.729).abs() < 1e-3);
        assert!((r.get("V_1").unwrap().to_f64() - 10.0).abs() < 1e-12);
        assert!(r.v2_over_phi2.is_finite());
    }

    #[test]
    fn sweep_on_single_path_is_exact() {
        let net = Network::new(
            vec![Matrix::from_rows(&[[2.0]]), Matrix::from_rows(&[[1.5], [0.0]])],
            Activation::Relu,
        )
        .unwrap();
        let data = Dataset::from_rows(&[[1.0], [2.0]]).unwrap().with_labels(vec![0, 0]).unwrap();
        let rows = sweep_accuracy_vs_m(&net, &data, 1.0, &[1, 10, 100], 3, 0, Exec::default()).unwrap();
        assert!(rows.iter().all(|r| r.mean_acc == 1.0 && r.mse < 1e-24));
    }
}
