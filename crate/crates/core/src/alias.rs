//! Constant-time categorical sampling (Vose's alias method), with a linear
//! CDF scan for short rows.

use rand::Rng;

/// Rows shorter than this use a CDF scan instead of an alias table.
pub const ALIAS_MIN_LEN: usize = 8;

#[derive(Debug, Clone)]
pub struct Categorical {
    /// Probabilities after normalisation.
    probs: Vec<f64>,
    table: Table,
}

#[derive(Debug, Clone)]
enum Table {
    Scan(Vec<f64>),
    Alias { prob: Vec<f64>, alias: Vec<usize> },
}

impl Categorical {
    /// Builds a sampler from nonnegative weights. Returns `None` if every
    /// weight is zero or any weight is negative or non-finite.
    pub fn new(weights: &[f64]) -> Option<Self> {
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return None;
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let table = if probs.len() < ALIAS_MIN_LEN {
            let mut acc = 0.0;
            let mut cdf: Vec<f64> = probs
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
            // the last positive entry must catch u close to 1
            if let Some(last) = probs.iter().rposition(|&p| p > 0.0) {
                cdf[last..].iter_mut().for_each(|c| *c = f64::INFINITY);
            }
            Table::Scan(cdf)
        } else {
            build_alias(&probs)
        };
        Some(Categorical { probs, table })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.table {
            Table::Scan(cdf) => {
                let u: f64 = rng.random();
                cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
            }
            Table::Alias { prob, alias } => {
                let i = rng.random_range(0..prob.len());
                let u: f64 = rng.random();
                if u < prob[i] {
                    i
                } else {
                    alias[i]
                }
            }
        }
    }
}

fn build_alias(probs: &[f64]) -> Table {
    let n = probs.len();
    let mut scaled: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let mut prob = vec![0.0; n];
    let mut alias: Vec<usize> = (0..n).collect();
    let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
    while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
        prob[s] = scaled[s];
        alias[s] = l;
        scaled[l] = (scaled[l] + scaled[s]) - 1.0;
        if scaled[l] < 1.0 {
            large.pop();
            small.push(l);
        }
    }
    // leftovers are 1 up to rounding; zero-probability columns must never win
    for i in large.into_iter().chain(small) {
        prob[i] = if probs[i] > 0.0 { 1.0 } else { 0.0 };
        if probs[i] == 0.0 {
            alias[i] = probs.iter().position(|&p| p > 0.0).expect("positive mass");
        }
    }
    Table::Alias { prob, alias }
}
