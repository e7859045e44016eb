use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use czforge::analysis::{
    campaign_losses, default_gamma_grid, fit_critical_density, gamma, run_sr_campaign, tlb, Histogram, SrCampaign,
    TargetMode,
};
use czforge::circuit::{builtin_target, emit_qasm, parse_qasm, TargetName};
use czforge::refine::{refine_pipeline, RefineConfig};
use czforge::store::{append_record, config_digest, read_jsonl, read_records, target_hash, StoreRecord};
use czforge::synthesis::{adaptive_synthesis, static_synthesis, AdaptiveConfig, EvalRecord, StaticConfig};
use czforge::{haar_random_unitary, BlockStyle, CircuitIR, CouplingMap, Entangler, LossSpec, Matrix, Template};

use crate::opts::{parse_enum, Options};

const DEFAULT_REG_WEIGHT: f64 = 5e-4;

struct Target {
    matrix: Matrix,
    name: String,
}

fn setup_workers(o: &Options) -> Result<()> {
    let n = match o.workers {
        Some(n) => Some(n),
        None => std::env::var("CZFORGE_WORKERS").ok().map(|v| v.parse::<usize>()).transpose().context("CZFORGE_WORKERS")?,
    };
    if let Some(n) = n {
        ensure!(n >= 1, "--workers must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn is_qasm_path(desc: &str) -> bool {
    desc.ends_with(".qasm") || Path::new(desc).is_file()
}

fn qubit_arg(part: Option<&str>, qubits: Option<usize>) -> Result<usize> {
    match (part.map(str::parse::<usize>).transpose().context("qubit count")?, qubits) {
        (Some(a), Some(b)) if a != b => bail!("target names {a} qubits but {b} were requested"),
        (Some(a), _) | (None, Some(a)) => Ok(a),
        (None, None) => bail!("--qubits is required for this target"),
    }
}

fn read_qasm(path: &Path) -> Result<CircuitIR> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_qasm(&text).with_context(|| format!("{} is not a QASM circuit", path.display()))
}

/// Target matrix and canonical name from a descriptor.
fn load_target(desc: &str, qubits: Option<usize>) -> Result<Target> {
    if is_qasm_path(desc) {
        let c = read_qasm(Path::new(desc))?;
        if let Some(n) = qubits {
            ensure!(n == c.num_qubits(), "{desc} has {} qubits, expected {n}", c.num_qubits());
        }
        let matrix = c.unitary();
        return Ok(Target { name: target_hash(&matrix), matrix });
    }
    if desc.starts_with("sha256:") {
        bail!("target {desc} is only known by its hash; pass --target");
    }
    let mut parts = desc.split(':');
    let head = parts.next().unwrap_or_default();
    if head == "haar" {
        let seed: u64 = parts.next().ok_or_else(|| anyhow!("write a Haar target as haar:<seed>"))?.parse().context("haar seed")?;
        let n = qubit_arg(parts.next(), qubits)?;
        return Ok(Target { matrix: haar_random_unitary(n, seed)?, name: format!("haar:{seed}:{n}") });
    }
    let name: TargetName = head.parse()?;
    let n = qubit_arg(parts.next(), qubits)?;
    Ok(Target { matrix: builtin_target(name, n)?, name: format!("{name}:{n}") })
}

fn coupling_for(o: &Options, n: usize) -> Result<CouplingMap> {
    let desc = o.topology.as_deref().unwrap_or("connected");
    let c = if Path::new(desc).is_file() {
        CouplingMap::from_json(&fs::read_to_string(desc)?).with_context(|| format!("coupling file {desc}"))?
    } else {
        CouplingMap::preset(desc, n)?
    };
    ensure!(c.num_qubits() == n, "topology has {} qubits, target has {n}", c.num_qubits());
    Ok(c)
}

fn topology_qubits(o: &Options) -> Result<Option<usize>> {
    match o.topology.as_deref() {
        Some(d) if Path::new(d).is_file() => Ok(Some(CouplingMap::from_json(&fs::read_to_string(d)?)?.num_qubits())),
        _ => Ok(None),
    }
}

fn problem(o: &Options) -> Result<(Target, CouplingMap)> {
    let desc = o.target.as_deref().context("--target is required")?;
    let target = load_target(desc, o.qubits.or(topology_qubits(o)?))?;
    let coupling = coupling_for(o, target.matrix.num_qubits())?;
    Ok((target, coupling))
}

fn loss_name(o: &Options) -> Result<&'static str> {
    match o.loss.as_deref().unwrap_or("hs") {
        "hs" | "hilbert-schmidt" => Ok("hs"),
        "relative-phase" => Ok("relative-phase"),
        other => bail!("unknown loss '{other}'"),
    }
}

fn loss_spec(o: &Options, target: &Matrix) -> Result<LossSpec> {
    Ok(match loss_name(o)? {
        "hs" => LossSpec::hilbert_schmidt(target.clone()),
        _ => LossSpec::relative_phase(target.clone()),
    })
}

fn block_style(o: &Options) -> Result<BlockStyle> {
    o.block_style.as_deref().map_or(Ok(BlockStyle::XYZ), |s| parse_enum("block style", s))
}

fn static_config(o: &Options) -> Result<StaticConfig> {
    let d = StaticConfig::default();
    let cfg = StaticConfig {
        num_samples: o.samples.unwrap_or(d.num_samples),
        num_gd_iterations: o.num_gd_iterations.unwrap_or(d.num_gd_iterations),
        learning_rate: o.learning_rate.unwrap_or(d.learning_rate),
        entry_loss: o.entry_loss.unwrap_or(d.entry_loss),
        accepted_num_cz_gates: o.accepted_num_cz_gates.or(d.accepted_num_cz_gates),
        cp_threshold: o.cp_threshold.unwrap_or(d.cp_threshold),
        target_loss: o.target_loss.unwrap_or(d.target_loss),
        num_gd_iterations_at_verification: o.num_gd_iterations_at_verification.unwrap_or(d.num_gd_iterations_at_verification),
        learning_rate_at_verification: o.learning_rate_at_verification.unwrap_or(d.learning_rate_at_verification),
        seed: o.seed.unwrap_or(d.seed),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn check_out(dir: &Path) -> Result<()> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        bail!("output directory {} is not empty", dir.display());
    }
    Ok(())
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("qasm")).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn append_jsonl(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", serde_json::to_string(v)?)?;
    Ok(())
}

fn save_decomposition(dir: &Path, index: usize, rec: &StoreRecord) -> Result<()> {
    append_record(&dir.join("decompositions.jsonl"), rec)?;
    fs::write(dir.join("qasm").join(format!("{index:04}_cz{}.qasm", rec.cz_count)), &rec.qasm)?;
    Ok(())
}

fn with_digest(mut config: Value) -> (Value, String) {
    let digest = config_digest(&config);
    config["config_digest"] = json!(digest);
    (config, digest)
}

pub fn synth_static(o: Options) -> Result<bool> {
    let o = o.resolve()?;
    let dir = o.out_dir()?.to_path_buf();
    check_out(&dir)?;
    let (target, coupling) = problem(&o)?;
    let r = o.reg_weight.unwrap_or(DEFAULT_REG_WEIGHT);
    ensure!(r >= 0.0 && r.is_finite(), "--reg-weight must be non-negative");
    let spec = loss_spec(&o, &target.matrix)?.with_reg_weight(r);
    let k = o.cp_gates.context("--cp-gates is required")?;
    let style = block_style(&o)?;
    let cfg = static_config(&o)?;
    let template = Template::new(coupling.clone(), Entangler::CP, style, k);
    template.expand()?;
    setup_workers(&o)?;

    let (config, digest) = with_digest(json!({
        "command": "synth static",
        "target": target.name,
        "topology": coupling,
        "loss": loss_name(&o)?,
        "cp_gates": k,
        "reg_weight": r,
        "block_style": style,
        "static": cfg,
    }));
    create_out(&dir)?;
    write_json(&dir.join("config.json"), &config)?;
    let out = static_synthesis(&template, &spec, &cfg)?;
    append_jsonl(
        &dir.join("log.jsonl"),
        &json!({
            "num_samples": out.num_samples,
            "num_prospective": out.num_prospective,
            "num_rejected": out.num_rejected,
            "num_verified": out.decompositions.len(),
        }),
    )?;
    for (i, d) in out.decompositions.iter().enumerate() {
        save_decomposition(&dir, i, &StoreRecord::new(d, &target.name, &coupling, &digest)?)?;
    }
    match out.decompositions.first() {
        Some(best) => println!("{} verified decompositions, best {} CZ", out.decompositions.len(), best.cz_count),
        None => println!("no verified decompositions ({} prospective)", out.num_prospective),
    }
    Ok(!out.decompositions.is_empty())
}

pub fn synth_adaptive(o: Options) -> Result<bool> {
    let o = o.resolve()?;
    let dir = o.out_dir()?.to_path_buf();
    let (target, coupling) = problem(&o)?;
    let spec = loss_spec(&o, &target.matrix)?;
    let d = AdaptiveConfig::default();
    let acfg = AdaptiveConfig {
        min_num_cp_gates: o.min_num_cp_gates.unwrap_or(d.min_num_cp_gates),
        max_num_cp_gates: o.max_num_cp_gates.unwrap_or(d.max_num_cp_gates),
        r_mean: o.r_mean.unwrap_or(d.r_mean),
        r_variance: o.r_variance.unwrap_or(d.r_variance),
        max_evals: o.max_evals.unwrap_or(d.max_evals),
        suggester: o.suggester.as_deref().map_or(Ok(d.suggester), |s| parse_enum("suggester", s))?,
        block_style: block_style(&o)?,
        goal_cz: o.goal_cz.or(d.goal_cz),
        max_verifications_per_eval: o.max_verifications_per_eval.unwrap_or(d.max_verifications_per_eval),
        sampling: static_config(&o)?,
    };
    acfg.validate()?;
    let loss = loss_name(&o)?;
    let resume_key = config_digest(&json!({
        "target": target.name,
        "topology": coupling,
        "loss": loss,
        "adaptive": AdaptiveConfig { max_evals: 0, goal_cz: None, ..acfg.clone() },
    }));

    let log_path = dir.join("log.jsonl");
    let store_path = dir.join("decompositions.jsonl");
    let (history, previous) = if o.resume && log_path.exists() {
        let old: Value = serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)?;
        ensure!(old["resume_key"] == json!(resume_key), "settings differ from the run in {}", dir.display());
        let history: Vec<EvalRecord> = read_jsonl(&log_path)?;
        ensure!(history.iter().enumerate().all(|(i, h)| h.eval_index == i), "{} is not a contiguous log", log_path.display());
        let previous = if store_path.exists() { read_records(&store_path)? } else { Vec::new() };
        (history, previous)
    } else {
        check_out(&dir)?;
        (Vec::new(), Vec::new())
    };
    setup_workers(&o)?;

    let (mut config, digest) = with_digest(json!({
        "command": "synth adaptive",
        "target": target.name,
        "topology": coupling,
        "loss": loss,
        "adaptive": acfg,
    }));
    config["resume_key"] = json!(resume_key);
    create_out(&dir)?;
    write_json(&dir.join("config.json"), &config)?;

    let incumbent = previous.iter().map(|r| r.cz_count).min();
    let mut saved = previous.len();
    let out = adaptive_synthesis(&spec, &coupling, &acfg, &history, incumbent, |rec, dec| {
        append_jsonl(&log_path, rec).map_err(|e| czforge::Error::InvalidArgument(e.to_string()))?;
        if let Some(d) = dec {
            let r = StoreRecord::new(d, &target.name, &coupling, &digest)?;
            save_decomposition(&dir, saved, &r).map_err(|e| czforge::Error::InvalidArgument(e.to_string()))?;
            saved += 1;
        }
        eprintln!("eval {:>3}  k {:>3}  r {:.2e}  score {:>8.3}  best {:?}", rec.eval_index, rec.k, rec.r, rec.score, rec.best_cz);
        Ok(())
    })?;
    let best = out.best().map(|d| d.cz_count).or(incumbent);
    match best {
        Some(b) => println!("best verified decomposition: {b} CZ{}", if out.reached_goal { " (goal reached)" } else { "" }),
        None => println!("no verified decompositions"),
    }
    Ok(best.is_some())
}

fn campaign_base(o: &Options, default_targets: usize) -> Result<(SrCampaign, Vec<usize>, u64)> {
    let n = o.qubits.or(topology_qubits(o)?).context("--qubits is required")?;
    let coupling = coupling_for(o, n)?;
    let mode: TargetMode = parse_enum("mode", o.mode.as_deref().unwrap_or("self-instance"))?;
    let mut c = SrCampaign::new(coupling, 0, mode);
    c.block_style = block_style(o)?;
    c.num_targets = o.num_targets.unwrap_or(default_targets);
    c.starts_per_target = o.starts.unwrap_or(c.starts_per_target);
    c.cutoff = o.cutoff.unwrap_or(c.cutoff);
    c.num_gd_iterations = o.num_gd_iterations.unwrap_or(c.num_gd_iterations);
    c.learning_rate = o.learning_rate.unwrap_or(c.learning_rate);
    ensure!(c.num_targets >= 1 && c.starts_per_target >= 1, "need at least one target and one start");
    ensure!(c.cutoff > 0.0, "--cutoff must be positive");
    ensure!(c.num_gd_iterations >= 1 && c.learning_rate > 0.0, "need positive iterations and learning rate");
    let k_min = o.k_min.unwrap_or(0);
    let k_max = o.k_max.unwrap_or(tlb(n as u32) as usize);
    let step = o.k_step.unwrap_or(1);
    ensure!(step >= 1 && k_min <= k_max, "need k_min <= k_max and k_step >= 1");
    Ok((c, (k_min..=k_max).step_by(step).collect(), o.seed.unwrap_or(0)))
}

#[derive(Serialize)]
struct SrRow {
    k: usize,
    target_id: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "SR")]
    sr: f64,
}

#[derive(Serialize)]
struct SrSummaryRow {
    k: usize,
    mean_sr: f64,
    std_sr: f64,
    num_targets: usize,
}

pub fn bench_sr(o: Options) -> Result<bool> {
    let o = o.resolve()?;
    let dir = o.out_dir()?.to_path_buf();
    check_out(&dir)?;
    let (base, ks, seed) = campaign_base(&o, 10)?;
    setup_workers(&o)?;
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("config.json"), &json!({ "command": "bench sr", "campaign": base, "k": ks, "seed": seed }))?;
    let mut rows = csv::Writer::from_path(dir.join("sr_targets.csv"))?;
    let mut summary = csv::Writer::from_path(dir.join("sr_summary.csv"))?;
    for &k in &ks {
        let r = run_sr_campaign(&SrCampaign { k, ..base.clone() }, seed)?;
        for t in &r.per_target {
            rows.serialize(SrRow { k, target_id: t.target_id, m: t.m, n: t.n, sr: t.sr })?;
        }
        summary.serialize(SrSummaryRow { k, mean_sr: r.mean, std_sr: r.std, num_targets: r.per_target.len() })?;
        rows.flush()?;
        summary.flush()?;
        eprintln!("k {k:>3}  SR {:.4} ± {:.4}", r.mean, r.std);
    }
    Ok(true)
}

pub fn bench_histogram(o: Options) -> Result<bool> {
    let o = o.resolve()?;
    let dir = o.out_dir()?.to_path_buf();
    check_out(&dir)?;
    let (base, ks, seed) = campaign_base(&o, 1)?;
    let bins = o.bins.unwrap_or(50);
    ensure!(bins >= 1, "--bins must be at least 1");
    setup_workers(&o)?;
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("config.json"), &json!({ "command": "bench histogram", "campaign": base, "k": ks, "bins": bins, "seed": seed }))?;
    let m = 1usize << (2 * base.coupling.num_qubits());
    for &k in &ks {
        let c = SrCampaign { k, ..base.clone() };
        let losses = campaign_losses(&c, seed)?.concat();
        let hist = Histogram::from_samples(&losses, bins);
        let l = c.template().num_params();
        let fit = fit_critical_density(&hist, m as f64, &default_gamma_grid())?;
        write_json(
            &dir.join(format!("histogram_k{k:03}.json")),
            &json!({
                "k": k,
                "m": m,
                "l": l,
                "gamma": gamma(l, m),
                "gamma_star": fit.gamma_star,
                "degenerate": fit.degenerate,
                "edges": hist.edges,
                "counts": hist.counts,
            }),
        )?;
        eprintln!("k {k:>3}  gamma {:.3}  fitted {:.3}{}", gamma(l, m), fit.gamma_star, if fit.degenerate { " (degenerate)" } else { "" });
    }
    Ok(true)
}

struct RefineItem {
    target: Target,
    topology: CouplingMap,
    circuit: CircuitIR,
    params: Vec<f64>,
    base: Option<StoreRecord>,
}

fn refine_inputs(o: &Options, input: &Path) -> Result<Vec<RefineItem>> {
    let named = |n: usize| o.target.as_deref().map(|d| load_target(d, Some(n))).transpose();
    if input.extension().is_some_and(|e| e == "qasm") {
        let circuit = read_qasm(input)?;
        let n = circuit.num_qubits();
        let target = match named(n)? {
            Some(t) => t,
            None => {
                let matrix = circuit.unitary();
                Target { name: target_hash(&matrix), matrix }
            }
        };
        let params = circuit.params().to_vec();
        return Ok(vec![RefineItem { target, topology: coupling_for(o, n)?, circuit, params, base: None }]);
    }
    let records = read_records(input).with_context(|| format!("{} is not a decomposition store", input.display()))?;
    ensure!(!records.is_empty(), "{} holds no decompositions", input.display());
    records
        .into_iter()
        .map(|rec| {
            let circuit = rec.circuit()?;
            let n = circuit.num_qubits();
            let target = match named(n)? {
                Some(t) => t,
                None => load_target(&rec.target, Some(n))?,
            };
            Ok(RefineItem { target, topology: rec.topology.clone(), params: rec.angles.clone(), circuit, base: Some(rec) })
        })
        .collect()
}

#[derive(Serialize)]
struct MetricRow {
    index: usize,
    cz_count: usize,
    cz_depth: usize,
    t_count: Option<usize>,
    t_depth: Option<usize>,
    loss: f64,
    max_denominator: Option<i64>,
    zeroed: usize,
    merged: usize,
    residual: usize,
}

pub fn refine(o: Options) -> Result<bool> {
    let o = o.resolve()?;
    let input: PathBuf = o.input.clone().context("--input is required")?;
    let dir = o.out_dir()?.to_path_buf();
    check_out(&dir)?;
    let d = RefineConfig::default();
    let rcfg = RefineConfig {
        loss_tolerance: o.loss_tolerance.unwrap_or(d.loss_tolerance),
        max_denominator: o.max_denominator.unwrap_or(d.max_denominator),
        merge_scope: o.merge_scope.as_deref().map_or(Ok(d.merge_scope), |s| parse_enum("merge scope", s))?,
        accept_loss: o.accept_loss.unwrap_or(d.accept_loss),
        refit_iterations: o.refit_iterations.unwrap_or(d.refit_iterations),
        seed: o.seed.unwrap_or(d.seed),
    };
    ensure!(rcfg.max_denominator >= 1, "--max-denominator must be at least 1");
    ensure!(rcfg.loss_tolerance > 0.0 && rcfg.accept_loss > 0.0, "loss tolerances must be positive");
    let items = refine_inputs(&o, &input)?;
    let loss = loss_name(&o)?;
    setup_workers(&o)?;

    let (config, digest) = with_digest(json!({ "command": "refine", "input": input, "loss": loss, "refine": rcfg }));
    create_out(&dir)?;
    write_json(&dir.join("config.json"), &config)?;
    let mut metrics = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let spec = loss_spec(&o, &item.target.matrix)?;
        let r = match refine_pipeline(&item.circuit, &item.params, &spec, &rcfg) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("record {i}: skipped: {e}");
                continue;
            }
        };
        let base = item.base.as_ref();
        let rec = StoreRecord {
            target: item.target.name.clone(),
            topology: item.topology.clone(),
            cz_count: r.cz_count,
            cz_depth: r.cz_depth,
            t_count: r.t_count,
            t_depth: r.t_depth,
            loss: r.loss,
            angles: r.params.clone(),
            qasm: emit_qasm(&r.circuit, &r.params)?,
            seed: base.map_or(0, |b| b.seed),
            sample_index: base.map_or(0, |b| b.sample_index),
            k: base.map_or(0, |b| b.k),
            reg_weight: base.map_or(0.0, |b| b.reg_weight),
            config_digest: digest.clone(),
        };
        append_record(&dir.join("refined.jsonl"), &rec)?;
        fs::write(dir.join("qasm").join(format!("{i:04}_refined.qasm")), &rec.qasm)?;
        if let Some(x) = &r.expanded {
            fs::write(dir.join("qasm").join(format!("{i:04}_clifford_t.qasm")), emit_qasm(x, x.params())?)?;
        }
        metrics.push(MetricRow {
            index: i,
            cz_count: r.cz_count,
            cz_depth: r.cz_depth,
            t_count: r.t_count,
            t_depth: r.t_depth,
            loss: r.loss,
            max_denominator: r.max_denominator(rcfg.max_denominator),
            zeroed: r.zeroed.len(),
            merged: r.merges.len(),
            residual: r.residual.len(),
        });
    }
    metrics.sort_by_key(|m| (m.t_depth.unwrap_or(usize::MAX), m.t_count.unwrap_or(usize::MAX), m.cz_count, m.cz_depth, m.index));
    let mut w = csv::Writer::from_path(dir.join("metrics.csv"))?;
    for m in &metrics {
        w.serialize(m)?;
    }
    w.flush()?;
    println!("refined {} of {} circuits", metrics.len(), items.len());
    Ok(!metrics.is_empty())
}

pub fn export(o: Options) -> Result<bool> {
    let o = o.resolve()?;
    let input = o.input.clone().context("--input is required")?;
    let records = read_records(&input).with_context(|| format!("{} is not a decomposition store", input.display()))?;
    if let Some(i) = o.index {
        let r = records.get(i).with_context(|| format!("no record {i} in {}", input.display()))?;
        print!("{}", r.qasm);
        return Ok(true);
    }
    let dir = o.out_dir()?.to_path_buf();
    check_out(&dir)?;
    create_out(&dir)?;
    for (i, r) in records.iter().enumerate() {
        fs::write(dir.join("qasm").join(format!("{i:04}_cz{}.qasm", r.cz_count)), &r.qasm)?;
    }
    println!("exported {} circuits", records.len());
    Ok(!records.is_empty())
}
