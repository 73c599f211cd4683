//! Verification suites with fixed default sizes; shared by the CLI `verify`
//! command and the acceptance tests.

use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::fixtures::{gaussian_dataset, net_a, network_with_dims, random_network, s_a};
use crate::measures::{input_weights, variation_bounds, Mode, PathChain};
use crate::net::Activation;
use crate::par::Exec;
use crate::rng::{self, StreamRng};
use crate::sampler::{empirical_markov, sample_paths_with, ConditionalSampler, SampleOptions};
use crate::theory::{
    cardinality_log_bound, count_realized, enumerate_partitions, log_likelihood, lower_bound_instance,
    lower_bound_rhs, mc_error_with, ols_slope, partition_count, theorem3_rhs, unit_sphere_probes, MarkovCandidate,
    PROBE_COUNT,
};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub trials: usize,
    pub violations: usize,
    pub observed: serde_json::Value,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub rng_algorithm: &'static str,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Theorem3,
    LowerBound,
    Mle,
    Cardinality,
    Lemma2,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        Some(match s {
            "theorem3" => Suite::Theorem3,
            "lowerbound" => Suite::LowerBound,
            "mle" => Suite::Mle,
            "cardinality" => Suite::Cardinality,
            "lemma2" => Suite::Lemma2,
            "all" => Suite::All,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Theorem3 => "theorem3",
            Suite::LowerBound => "lowerbound",
            Suite::Mle => "mle",
            Suite::Cardinality => "cardinality",
            Suite::Lemma2 => "lemma2",
            Suite::All => "all",
        }
    }
}

/// Runs a suite with its default configuration.
pub fn run_suite(suite: Suite, seed: u64, exec: Exec) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Theorem3 => theorem3(&Theorem3Config::default(), seed, exec)?,
        Suite::LowerBound => lower_bound(&LowerBoundConfig::default(), seed, exec)?,
        Suite::Mle => mle(&MleConfig::default(), seed)?,
        Suite::Cardinality => cardinality(&CardinalityConfig::default(), seed)?,
        Suite::Lemma2 => lemma2(&Lemma2Config::default(), seed)?,
        Suite::All => {
            let mut all = Vec::new();
            for s in [Suite::Theorem3, Suite::LowerBound, Suite::Mle, Suite::Cardinality, Suite::Lemma2] {
                all.extend(run_suite(s, seed, exec)?.checks);
            }
            all
        }
    };
    Ok(SuiteReport {
        suite: suite.name().into(),
        seed,
        rng_algorithm: rng::RNG_ALGORITHM,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn suite_rng(seed: u64, tag: u64) -> StreamRng {
    rng::stream(rng::derive_seed(seed, tag), 0)
}

fn check(name: &str, trials: usize, violations: usize, observed: serde_json::Value, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: violations == 0,
        trials,
        violations,
        observed,
        detail,
    }
}

#[derive(Debug, Clone)]
pub struct Theorem3Config {
    pub nets: usize,
    pub depths: Vec<usize>,
    pub max_width: usize,
    pub points: usize,
    pub qs: Vec<f64>,
    pub ms: Vec<u64>,
    pub resamples: usize,
}

impl Default for Theorem3Config {
    fn default() -> Self {
        Theorem3Config {
            nets: 20,
            depths: vec![2, 3, 4],
            max_width: 16,
            points: 20,
            qs: vec![1.0, 2.0],
            ms: vec![100, 1000],
            resamples: 200,
        }
    }
}

/// `mean + 3·SE ≤ (VζL/√M)²` with doubled-mode `ζ`.
pub fn theorem3(cfg: &Theorem3Config, seed: u64, exec: Exec) -> Result<Vec<CheckResult>> {
    let mut rng = suite_rng(seed, 3);
    let mut rows = Vec::new();
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for i in 0..cfg.nets {
        let depth = cfg.depths[rng.random_range(0..cfg.depths.len())];
        let net = random_network(&mut rng, depth, cfg.max_width, Activation::Relu);
        let data = gaussian_dataset(&mut rng, cfg.points, net.input_dim());
        for &q in &cfg.qs {
            let chain = PathChain::build(&net, &input_weights(&data, q)?)?;
            let v = chain.variation().to_f64();
            let zeta = chain.complexity(Mode::Doubled)?;
            let cs = ConditionalSampler::from_chain(chain)?;
            for &m in &cfg.ms {
                let s = rng::derive_seed(seed, (i as u64) << 32 | (q as u64) << 24 | m);
                let est = mc_error_with(&cs, &data, m, cfg.resamples, s, exec)?;
                let rhs = theorem3_rhs(v, zeta, depth, m);
                let upper = est.mean + 3.0 * est.se();
                worst = worst.max(upper / rhs);
                if upper > rhs {
                    violations += 1;
                }
                rows.push(json!({"net": i, "dims": net.dims(), "q": q, "M": m,
                    "mean": est.mean, "se": est.se(), "rhs": rhs}));
            }
        }
    }
    let trials = rows.len();
    Ok(vec![check(
        "theorem3",
        trials,
        violations,
        json!({"max_upper_over_rhs": worst, "cases": rows}),
        format!("worst (mean + 3·SE) / bound = {worst:.4}"),
    )])
}

#[derive(Debug, Clone)]
pub struct LowerBoundConfig {
    pub d: usize,
    pub d1: usize,
    pub ms: Vec<u64>,
    pub resamples: usize,
    pub slope_ms: Vec<u64>,
    pub slope_resamples: usize,
    pub slope_range: (f64, f64),
}

impl Default for LowerBoundConfig {
    fn default() -> Self {
        LowerBoundConfig {
            d: 8,
            d1: 8,
            ms: vec![1000, 10_000],
            resamples: 500,
            slope_ms: vec![100, 1000, 10_000, 100_000],
            slope_resamples: 200,
            slope_range: (-0.65, -0.35),
        }
    }
}

/// Error floor `ξ₁²/(32M)` and the `1/√M` rate on the balanced instance.
pub fn lower_bound(cfg: &LowerBoundConfig, seed: u64, exec: Exec) -> Result<Vec<CheckResult>> {
    let inst = lower_bound_instance(cfg.d, cfg.d1)?;
    let cs = inst.sampler()?;
    let v = cs.variation().to_f64();
    let data = inst.dataset();
    let unscaled = |m: u64, r: usize, tag: u64| {
        mc_error_with(&cs, &data, m, r, rng::derive_seed(seed, tag << 40 | m), exec).map(|e| e.scaled(1.0 / (v * v)))
    };
    let mut rows = Vec::new();
    let mut violations = 0;
    for &m in &cfg.ms {
        let est = unscaled(m, cfg.resamples, 1)?;
        let rhs = lower_bound_rhs(inst.xi1, m);
        let lower = est.mean - 3.0 * est.se();
        if lower < rhs {
            violations += 1;
        }
        rows.push(json!({"M": m, "mean": est.mean, "se": est.se(), "rhs": rhs}));
    }
    let floor = check(
        "lowerbound",
        cfg.ms.len(),
        violations,
        json!({"xi1": inst.xi1, "cases": rows}),
        format!("ξ₁ = {:.6}", inst.xi1),
    );
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &m in &cfg.slope_ms {
        let est = unscaled(m, cfg.slope_resamples, 2)?;
        xs.push((m as f64).ln());
        ys.push(est.mean.sqrt().ln());
    }
    let slope = ols_slope(&xs, &ys);
    let ok = slope >= cfg.slope_range.0 && slope <= cfg.slope_range.1;
    let rate = check(
        "lowerbound_rate",
        1,
        usize::from(!ok),
        json!({"slope": slope, "log_m": xs, "log_rms": ys}),
        format!("log-log slope {slope:.4}"),
    );
    Ok(vec![floor, rate])
}

#[derive(Debug, Clone)]
pub struct MleConfig {
    pub trials: usize,
    pub candidates: usize,
    pub max_m: u64,
    pub max_width: usize,
}

impl Default for MleConfig {
    fn default() -> Self {
        MleConfig {
            trials: 20,
            candidates: 1000,
            max_m: 50,
            max_width: 6,
        }
    }
}

/// `ln ℒ(p̃) ≥ ln ℒ(candidate)` for random Markov candidates.
pub fn mle(cfg: &MleConfig, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = suite_rng(seed, 5);
    let mut violations = 0;
    let mut closest = f64::INFINITY;
    let mut trials = 0;
    for t in 0..cfg.trials {
        let depth = rng.random_range(2..=4);
        let net = random_network(&mut rng, depth, cfg.max_width, Activation::Relu);
        let data = gaussian_dataset(&mut rng, 10, net.input_dim());
        let m = rng.random_range(1..=cfg.max_m);
        let cs = ConditionalSampler::from_chain(PathChain::build(&net, &input_weights(&data, 1.0)?)?)?;
        let opts = SampleOptions {
            record_paths: true,
            exec: Exec::Sequential,
            ..SampleOptions::default()
        };
        let counts = sample_paths_with(&cs, m, rng::derive_seed(seed, t as u64), opts)?;
        let best = MarkovCandidate::from_empirical(&empirical_markov(&counts));
        let top = log_likelihood(&counts, &net, &best)?;
        for _ in 0..cfg.candidates {
            let c = MarkovCandidate::random_near(&best, &mut rng);
            let ll = log_likelihood(&counts, &net, &c)?;
            trials += 1;
            if ll > top + 1e-9 * top.abs().max(1.0) {
                violations += 1;
            }
            if ll.is_finite() {
                closest = closest.min(top - ll);
            }
        }
    }
    Ok(vec![check(
        "mle",
        trials,
        violations,
        json!({"min_gap": closest}),
        format!("smallest ln ℒ(p̃) − ln ℒ(candidate) = {closest:.3e}"),
    )])
}

#[derive(Debug, Clone)]
pub struct CardinalityConfig {
    pub ms: Vec<u64>,
    /// Random `[2, 2, 1]` networks in addition to the reference network.
    pub random_nets: usize,
    pub max_partition: usize,
}

impl Default for CardinalityConfig {
    fn default() -> Self {
        CardinalityConfig {
            ms: vec![1, 2, 3],
            random_nets: 5,
            max_partition: 30,
        }
    }
}

/// Exhaustive function counts against `exp(M(ln(de) + L ln 8))`, and the
/// partition helper against brute force.
pub fn cardinality(cfg: &CardinalityConfig, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = suite_rng(seed, 6);
    let mut nets = vec![(net_a(), s_a())];
    for _ in 0..cfg.random_nets {
        let net = network_with_dims(&mut rng, &[2, 2, 1], Activation::Relu);
        let data = gaussian_dataset(&mut rng, 5, 2);
        nets.push((net, data));
    }
    let probes = unit_sphere_probes(2, PROBE_COUNT);
    let mut rows = Vec::new();
    let mut violations = 0;
    for (i, (net, data)) in nets.iter().enumerate() {
        for &m in &cfg.ms {
            let r = count_realized(net, data, 1.0, m, &probes)?;
            let log_bound = cardinality_log_bound(m, net.depth(), net.input_dim())?;
            if (r.functions as f64).ln() > log_bound {
                violations += 1;
            }
            rows.push(json!({"net": i, "M": m, "functions": r.functions, "samples": r.samples,
                "bound": log_bound.exp()}));
        }
    }
    let counts = check(
        "cardinality",
        rows.len(),
        violations,
        json!({"cases": rows}),
        "distinct reconstructed functions by probe fingerprint".into(),
    );
    let mut bad = 0;
    let mut sizes = Vec::new();
    for k in 0..=cfg.max_partition {
        let dp = partition_count(k);
        let brute = enumerate_partitions(k).len() as u128;
        if dp != brute || dp > 1u128 << k {
            bad += 1;
        }
        sizes.push(dp);
    }
    let partitions = check(
        "partitions",
        cfg.max_partition + 1,
        bad,
        json!({"I": sizes.iter().map(|v| *v as u64).collect::<Vec<_>>()}),
        format!("I(k) ≤ 2^k for k ≤ {}", cfg.max_partition),
    );
    Ok(vec![counts, partitions])
}

#[derive(Debug, Clone)]
pub struct Lemma2Config {
    pub nets: usize,
    pub max_width: usize,
    pub points: usize,
    pub tolerance: f64,
}

impl Default for Lemma2Config {
    fn default() -> Self {
        Lemma2Config {
            nets: 100,
            max_width: 8,
            points: 10,
            tolerance: 1e-3,
        }
    }
}

/// Reference values for the two-unit example network, `(induced, group)` per `q`.
pub const LEMMA2_REFERENCE: [(f64, (f64, f64)); 2] = [(1.0, (10.0, 10.0)), (2.0, (10.198, 14.142))];

/// Both variation bounds dominate `𝒱_q` on random networks, and the example
/// network reproduces its reference values.
pub fn lemma2(cfg: &Lemma2Config, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = suite_rng(seed, 2);
    let mut violations = 0;
    let mut definitional_violations = 0;
    let mut trials = 0;
    for _ in 0..cfg.nets {
        let depth = rng.random_range(2..=4);
        let net = random_network(&mut rng, depth, cfg.max_width, Activation::Relu);
        let data = gaussian_dataset(&mut rng, cfg.points, net.input_dim());
        for q in [1.0, 2.0] {
            let b = variation_bounds(&net, &data, q)?;
            let slack = 1.0 - 1e-12;
            trials += 1;
            if b.induced.ratio(&b.variation) < slack || b.group.ratio(&b.variation) < slack {
                violations += 1;
            }
            if b.group_definitional.ratio(&b.variation) < slack {
                definitional_violations += 1;
            }
        }
    }
    let random = check(
        "lemma2_bounds",
        trials,
        violations,
        json!({"definitional_violations": definitional_violations}),
        format!(
            "column-summed (q,1) variant, reported only: {definitional_violations}/{trials} violations"
        ),
    );
    let mut observed = Vec::new();
    let mut mismatches = 0;
    for (q, (induced, group)) in LEMMA2_REFERENCE {
        let b = variation_bounds(&net_a(), &s_a(), q)?;
        let got = (b.induced.to_f64(), b.group.to_f64());
        if (got.0 - induced).abs() > cfg.tolerance || (got.1 - group).abs() > cfg.tolerance {
            mismatches += 1;
        }
        observed.push(json!({"q": q, "induced": got.0, "group": got.1,
            "group_definitional": b.group_definitional.to_f64(),
            "reference": [induced, group]}));
    }
    let reference = check(
        "lemma2_reference",
        LEMMA2_REFERENCE.len(),
        mismatches,
        json!(observed),
        "q = 2 reference group value assumes column-summed (q,1) norm; bound uses row sums".into(),
    );
    Ok(vec![random, reference])
}

/// Fails with [`Error::InvalidArgument`] on an unknown suite name.
pub fn parse_suite(s: &str) -> Result<Suite> {
    Suite::parse(s).ok_or_else(|| Error::InvalidArgument(format!("unknown suite '{s}'")))
}
