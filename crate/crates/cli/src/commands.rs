//! Subcommand implementations.

use pathnet::analysis::{
    competing_capacities, default_gamma, generalization_bound, losses_from_margins, normalized_margins, raw_margins,
    sweep_accuracy_vs_m, BoundInputs, BoundMode,
};
use pathnet::fixtures::argmax;
use pathnet::io::{load_dataset, load_model, save_model};
use pathnet::measures::{input_weights, path_norm_phi, variation_bounds, Mode, PathChain};
use pathnet::sampler::{
    build_sampler, compression_stats, empirical_markov, sample_paths_with, ReconstructedNetwork, SampleOptions,
};
use pathnet::verify::{parse_suite, run_suite};
use pathnet::{Dataset, Exec, LogScaled, Network};
use serde_json::{json, Value};

use crate::report::{magnitude, magnitude_cell, Payload, Table};
use crate::{Command, Failure, Global, ModeArg};

pub struct Outcome {
    pub payload: Payload,
    /// Names of failing checks for `verify`.
    pub failed_checks: Option<Vec<String>>,
}

impl From<Payload> for Outcome {
    fn from(payload: Payload) -> Self {
        Outcome { payload, failed_checks: None }
    }
}

pub fn in_file(p: &std::path::Path, e: pathnet::Error) -> Failure {
    let mut f = Failure::from(e);
    f.message = format!("{}: {}", p.display(), f.message);
    f
}

fn model(g: &Global) -> Result<Network, Failure> {
    let p = g.model.as_ref().ok_or_else(|| Failure::usage("--model is required"))?;
    load_model(p).map_err(|e| in_file(p, e))
}

fn data(g: &Global) -> Result<Dataset, Failure> {
    let p = g.data.as_ref().ok_or_else(|| Failure::usage("--data is required"))?;
    load_dataset(p).map_err(|e| in_file(p, e))
}

fn model_and_data(g: &Global) -> Result<(Network, Dataset), Failure> {
    let net = model(g)?;
    let data = data(g)?;
    if data.dim() != net.input_dim() {
        return Err(Failure::usage(format!(
            "dataset has {} features but the model expects {}",
            data.dim(),
            net.input_dim()
        )));
    }
    data.check_labels(net.output_dim())?;
    Ok((net, data))
}

fn check_q(q: f64) -> Result<(), Failure> {
    if (1.0..=2.0).contains(&q) {
        Ok(())
    } else {
        Err(Failure::usage(format!("--q must lie in [1, 2], got {q}")))
    }
}

fn finite(x: LogScaled, what: &str) -> Result<f64, Failure> {
    x.try_to_f64()
        .ok_or_else(|| Failure::numeric(format!("{what} overflows f64 (log10 {:.3})", x.log10())))
}

/// Labels from the data if present, otherwise the network's own decisions.
fn with_labels(net: &Network, data: Dataset) -> Result<(Dataset, &'static str), Failure> {
    if data.labels().is_some() {
        return Ok((data, "data"));
    }
    let out = net.forward_batch(&data)?;
    let labels = (0..out.rows()).map(|i| argmax(out.row(i))).collect();
    Ok((data.with_labels(labels)?, "network"))
}

pub fn execute(cmd: &Command, g: &Global) -> Result<Outcome, Failure> {
    let exec = Exec::default();
    Ok(match cmd {
        Command::Inspect => inspect(g)?.into(),
        Command::Measures { q } => measures(g, *q)?.into(),
        Command::Sample { q, m, counts, out_model } => {
            sample(g, *q, *m, counts.as_deref(), out_model.as_deref(), exec)?.into()
        }
        Command::ReconstructEval { q, m } => reconstruct_eval(g, *q, *m, exec)?.into(),
        Command::Sweep { q, ms, rounds } => sweep(g, *q, ms, *rounds, exec)?.into(),
        Command::Margins { gamma } => margins(g, *gamma)?.into(),
        Command::Bound { gamma, delta, q, mode } => bound(g, *gamma, *delta, *q, *mode)?.into(),
        Command::Verify { suite } => verify(g, suite, exec)?,
    })
}

fn inspect(g: &Global) -> Result<Payload, Failure> {
    let net = model(g)?;
    let paths = LogScaled::from_ln(net.dims().iter().map(|&d| (d as f64).ln()).sum());
    let outputs = json!({
        "dims": net.dims(),
        "depth": net.depth(),
        "activation": net.activation(),
        "path_count": magnitude(paths),
        "parameters": net.layers().iter().map(|w| w.rows() * w.cols()).sum::<usize>(),
    });
    let mut table = Table::new(&["key", "value"]);
    let dims: Vec<String> = net.dims().iter().map(|d| d.to_string()).collect();
    table.push(["dims".into(), dims.join(" ")]);
    table.push(["activation".into(), net.activation().name().into()]);
    table.push(["path_count".into(), magnitude_cell(paths)]);
    Ok(Payload { outputs, table })
}

fn measures(g: &Global, q: f64) -> Result<Payload, Failure> {
    check_q(q)?;
    let (net, data) = model_and_data(g)?;
    let chain = PathChain::build(&net, &input_weights(&data, q)?)?;
    let v = chain.variation();
    let zeta_c = chain.complexity(Mode::Collapsed)?;
    let zeta_d = chain.complexity(Mode::Doubled)?;
    let phi1 = path_norm_phi(&net, 1.0)?;
    let phi2 = path_norm_phi(&net, 2.0)?;
    let bounds = variation_bounds(&net, &data, q)?;
    let caps = competing_capacities(&net, &data)?;
    let norms: serde_json::Map<String, Value> =
        caps.rows.iter().map(|c| (c.measure.to_string(), magnitude(c.value))).collect();
    let outputs = json!({
        "q": q,
        "V": magnitude(v),
        "zeta": { "doubled": zeta_d, "collapsed": zeta_c },
        "phi": {
            "1": { "total": magnitude(phi1.total), "per_output": phi1.per_output.iter().map(|x| magnitude(*x)).collect::<Vec<_>>() },
            "2": { "total": magnitude(phi2.total), "per_output": phi2.per_output.iter().map(|x| magnitude(*x)).collect::<Vec<_>>() },
        },
        "variation_bounds": {
            "induced": magnitude(bounds.induced),
            "group": magnitude(bounds.group),
            "group_columns": magnitude(bounds.group_definitional),
        },
        "norms": norms,
        "v2_over_phi2": caps.v2_over_phi2,
    });
    let mut table = Table::new(&["measure", "value", "log10"]);
    let mut row = |name: &str, x: LogScaled| table.push([name.to_string(), magnitude_cell(x), format!("{}", x.log10())]);
    row("V", v);
    row("zeta_doubled", LogScaled::from_f64(zeta_d));
    row("zeta_collapsed", LogScaled::from_f64(zeta_c));
    row("bound_induced", bounds.induced);
    row("bound_group", bounds.group);
    for c in &caps.rows {
        row(c.measure, c.value);
    }
    Ok(Payload { outputs, table })
}

fn sample(
    g: &Global,
    q: f64,
    m: u64,
    counts_path: Option<&std::path::Path>,
    out_model: Option<&std::path::Path>,
    exec: Exec,
) -> Result<Payload, Failure> {
    check_q(q)?;
    if m == 0 {
        return Err(Failure::usage("--M must be positive"));
    }
    let (net, data) = model_and_data(g)?;
    let cs = build_sampler(&net, &data, q)?;
    let counts = sample_paths_with(&cs, m, g.seed, SampleOptions { exec, ..SampleOptions::default() })?;
    counts.check_flow()?;
    let em = empirical_markov(&counts);
    let stats = compression_stats(&em)?;
    if let Some(p) = counts_path {
        counts.write_csv(std::fs::File::create(p)?)?;
    }
    if let Some(dir) = out_model {
        let rec = ReconstructedNetwork::from_sampler(&cs, &counts)?;
        let mut meta = std::collections::BTreeMap::new();
        meta.insert("source".into(), json!("path-sample"));
        meta.insert("q".into(), json!(q));
        meta.insert("M".into(), json!(m));
        meta.insert("seed".into(), json!(g.seed));
        meta.insert("hidden_units".into(), json!(rec.units));
        std::fs::create_dir_all(dir)?;
        save_model(dir, &rec.to_network()?, meta)?;
    }
    let outputs = json!({
        "q": q,
        "M": m,
        "V": magnitude(cs.variation()),
        "chunk_size": counts.chunk_size,
        "compression": stats,
        "counts_file": counts_path.map(|p| p.display().to_string()),
        "model_dir": out_model.map(|p| p.display().to_string()),
    });
    let mut table = Table::new(&["layer", "visited", "nnz"]);
    for (l, v) in stats.visited.iter().enumerate() {
        let nnz = if l == 0 { String::new() } else { em.layers[l - 1].len().to_string() };
        table.push([l.to_string(), v.to_string(), nnz]);
    }
    Ok(Payload { outputs, table })
}

fn reconstruct_eval(g: &Global, q: f64, m: u64, exec: Exec) -> Result<Payload, Failure> {
    check_q(q)?;
    if m == 0 {
        return Err(Failure::usage("--M must be positive"));
    }
    let (net, data) = model_and_data(g)?;
    let cs = build_sampler(&net, &data, q)?;
    let counts = sample_paths_with(&cs, m, g.seed, SampleOptions { exec, ..SampleOptions::default() })?;
    let rec = ReconstructedNetwork::from_sampler(&cs, &counts)?;
    let exact = net.forward_batch_with(&data, exec)?;
    let approx = rec.forward_batch(&data)?;
    let n = data.len();
    let k = net.output_dim();
    let mut sq = 0.0;
    let mut max_dev: f64 = 0.0;
    let mut agree = 0usize;
    let mut correct = (0usize, 0usize);
    for i in 0..n {
        let (a, b) = (exact.row(i), approx.row(i));
        for (x, y) in a.iter().zip(b) {
            sq += (x - y) * (x - y);
            max_dev = max_dev.max((x - y).abs());
        }
        let (pa, pb) = (argmax(a), argmax(b));
        agree += usize::from(pa == pb);
        if let Some(y) = data.labels() {
            correct.0 += usize::from(pa == y[i]);
            correct.1 += usize::from(pb == y[i]);
        }
    }
    let stats = compression_stats(&empirical_markov(&counts))?;
    let labelled = data.labels().is_some();
    let outputs = json!({
        "q": q,
        "M": m,
        "n": n,
        "mse": sq / (n * k) as f64,
        "max_abs_deviation": max_dev,
        "agreement": agree as f64 / n as f64,
        "accuracy_original": labelled.then(|| correct.0 as f64 / n as f64),
        "accuracy_reconstructed": labelled.then(|| correct.1 as f64 / n as f64),
        "compression": stats,
    });
    let mut table = Table::new(&["M", "mse", "max_abs_deviation", "agreement", "nnz"]);
    table.push([
        m.to_string(),
        format!("{}", outputs["mse"]),
        format!("{max_dev}"),
        format!("{}", outputs["agreement"]),
        stats.nnz.to_string(),
    ]);
    Ok(Payload { outputs, table })
}

fn sweep(g: &Global, q: f64, ms: &[u64], rounds: usize, exec: Exec) -> Result<Payload, Failure> {
    check_q(q)?;
    if ms.is_empty() || ms.contains(&0) {
        return Err(Failure::usage("--Ms needs positive sample sizes"));
    }
    let (net, data) = model_and_data(g)?;
    let (data, label_source) = with_labels(&net, data)?;
    let rows = sweep_accuracy_vs_m(&net, &data, q, ms, rounds, g.seed, exec)?;
    let mut table = Table::new(&["M", "mean_acc", "min_acc", "max_acc", "acc_std", "rounds", "mse"]);
    for r in &rows {
        table.push([
            r.m.to_string(),
            format!("{}", r.mean_acc),
            format!("{}", r.min_acc),
            format!("{}", r.max_acc),
            format!("{}", r.acc_std),
            r.rounds.to_string(),
            format!("{}", r.mse),
        ]);
    }
    let outputs = json!({ "q": q, "labels": label_source, "rows": rows });
    Ok(Payload { outputs, table })
}

fn gamma_or_default(gamma: Option<f64>, margins: &[f64]) -> Result<f64, Failure> {
    match gamma {
        Some(g) if g > 0.0 && g.is_finite() => Ok(g),
        Some(g) => Err(Failure::usage(format!("--gamma must be positive, got {g}"))),
        None => default_gamma(margins).ok_or_else(|| Failure::numeric("no positive margin to pick a default gamma")),
    }
}

fn margins(g: &Global, gamma: Option<f64>) -> Result<Payload, Failure> {
    let (net, data) = model_and_data(g)?;
    if data.labels().is_none() {
        return Err(Failure::usage("margins need a labelled dataset"));
    }
    let stats = normalized_margins(&net, &data)?;
    let gamma = gamma_or_default(gamma, &stats.raw)?;
    let losses = losses_from_margins(&stats.raw, gamma)?;
    let mut sorted = stats.normalized.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.is_empty() { f64::NAN } else { sorted[sorted.len() / 2] };
    let outputs = json!({
        "n": data.len(),
        "V1": magnitude(stats.v1),
        "gamma": gamma,
        "losses": losses,
        "median_normalized": median,
        "raw": stats.raw,
        "normalized": stats.normalized,
        "histogram": stats.histogram,
    });
    let mut table = Table::new(&["bin_lo", "bin_hi", "count"]);
    for (lo, hi, c) in stats.histogram.bins() {
        table.push([format!("{lo}"), format!("{hi}"), c.to_string()]);
    }
    Ok(Payload { outputs, table })
}

fn bound(g: &Global, gamma: Option<f64>, delta: f64, q: f64, mode: ModeArg) -> Result<Payload, Failure> {
    check_q(q)?;
    let (net, data) = model_and_data(g)?;
    if data.labels().is_none() {
        return Err(Failure::usage("bounds need a labelled dataset"));
    }
    let chain = PathChain::build(&net, &input_weights(&data, q)?)?;
    let raw = raw_margins(&net, &data)?;
    let gamma = gamma_or_default(gamma, &raw)?;
    let losses = losses_from_margins(&raw, gamma)?;
    let inputs = BoundInputs {
        v: finite(chain.variation(), "path variation")?,
        zeta: chain.complexity(Mode::Doubled)?,
        depth: net.depth(),
        d: net.input_dim(),
        n: data.len(),
        k: net.output_dim(),
        gamma,
        delta,
        margin_loss: losses.margin,
    };
    let modes: &[BoundMode] = match mode {
        ModeArg::Apriori => &[BoundMode::Apriori],
        ModeArg::Posthoc => &[BoundMode::Posthoc],
        ModeArg::Both => &[BoundMode::Apriori, BoundMode::Posthoc],
    };
    let mut values = Vec::new();
    let mut table = Table::new(&["mode", "value", "vacuous", "margin_loss", "gamma"]);
    for &m in modes {
        let b = generalization_bound(&inputs, m)?;
        table.push([
            json!(b.mode).as_str().unwrap_or_default().to_string(),
            format!("{}", b.value),
            b.vacuous.to_string(),
            format!("{}", losses.margin),
            format!("{gamma}"),
        ]);
        values.push(b);
    }
    let outputs = json!({ "inputs": inputs, "losses": losses, "bounds": values });
    Ok(Payload { outputs, table })
}

fn verify(g: &Global, suite: &str, exec: Exec) -> Result<Outcome, Failure> {
    let suite = parse_suite(suite)?;
    let report = run_suite(suite, g.seed, exec)?;
    let failed: Vec<String> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    let mut table = Table::new(&["check", "passed", "trials", "violations", "detail"]);
    for c in &report.checks {
        table.push([
            c.name.clone(),
            c.passed.to_string(),
            c.trials.to_string(),
            c.violations.to_string(),
            c.detail.clone(),
        ]);
    }
    let outputs = serde_json::to_value(&report).map_err(|e| Failure::numeric(e.to_string()))?;
    Ok(Outcome { payload: Payload { outputs, table }, failed_checks: Some(failed) })
}
