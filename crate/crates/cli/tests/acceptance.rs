//! Acceptance gate. Prints one PASS / FAIL / SKIP line per criterion and
//! exits non-zero when a gating criterion fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use madacc::agents::TemplateSet;
use madacc::backend::{LiveBackend, LiveConfig, MockBackend, MockScript};
use madacc::corpus::{load_essay, load_split, make_instances, read_split, strip_tags, Instance};
use madacc::domain::{AgentRole, ArgLabel, LabelDistribution};
use madacc::metrics::{f1_scores, macro_average, round1, ConfusionMatrix};
use madacc::protocol::{assign_stances, run_debate, run_pipeline, DebateConfig, Speaker};
use madacc_cli::commands::RECORDS_FILE;
use madacc_cli::{cmd_inspect, cmd_prepare, cmd_run, format_trace, Method, RunConfig, RunOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

type Criterion = (u8, &'static str, bool, Box<dyn Fn() -> Outcome>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn within(budget: Duration, started: Instant) -> Result<String, String> {
    let took = started.elapsed();
    ensure(took <= budget, || format!("took {took:?}, budget {budget:?}"))?;
    Ok(format!("{} ms", took.as_millis()))
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture_instances() -> Vec<Instance> {
    let f = fixtures();
    load_split(&f.join("corpus"), &f.join("split.txt"))
        .expect("fixture corpus loads")
        .iter()
        .flat_map(make_instances)
        .collect()
}

fn fixture_backend() -> MockBackend {
    MockBackend::new(MockScript::from_json_file(&fixtures().join("mock_script.json")).expect("mock script"))
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap()
}

fn c1_table_arithmetic() -> Check {
    let start = Instant::now();
    for (class_f1, want) in [([92.0, 74.5, 90.7], 85.7), ([90.6, 57.0, 88.0], 78.5)] {
        let got = round1(macro_average(class_f1));
        ensure(got == want, || format!("{class_f1:?} -> {got}, want {want}"))?;
    }
    within(Duration::from_secs(1), start)
}

/// Oracle: expands the matrix into individual (gold, predicted) pairs and
/// counts hits per class, without touching the library's arithmetic.
fn oracle_f1(counts: &[[u64; 3]; 3]) -> [f64; 3] {
    let mut pairs = Vec::new();
    for (g, row) in counts.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            pairs.extend(std::iter::repeat_n((g, p), n as usize));
        }
    }
    let mut out = [0.0; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let tp = pairs.iter().filter(|&&(g, p)| g == c && p == c).count() as f64;
        let predicted = pairs.iter().filter(|&&(_, p)| p == c).count() as f64;
        let actual = pairs.iter().filter(|&&(g, _)| g == c).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        *slot = if precision + recall > 0.0 {
            100.0 * 2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    out
}

fn c2_metric_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let mut checked = 0;
    while checked < 1000 {
        let mut counts = [[0u64; 3]; 3];
        for cell in counts.iter_mut().flatten() {
            *cell = rng.random_range(0..=50);
        }
        if counts.iter().flatten().sum::<u64>() == 0 {
            continue;
        }
        let report = f1_scores(&ConfusionMatrix::from_counts(counts)).map_err(|e| e.to_string())?;
        let want = oracle_f1(&counts);
        for (i, label) in ArgLabel::ALL.iter().enumerate() {
            let got = report.class(*label).f1;
            ensure((got - want[i]).abs() <= 1e-9, || format!("{counts:?} {label}: {got} vs {}", want[i]))?;
        }
        let want_macro = want.iter().sum::<f64>() / 3.0;
        ensure((report.macro_f1 - want_macro).abs() <= 1e-9, || format!("{counts:?} macro"))?;
        checked += 1;
    }
    Ok(format!("{checked} matrices, {}", within(Duration::from_secs(5), start)?))
}

fn c3_protocol_invariants() -> Check {
    let start = Instant::now();
    let instances = fixture_instances();
    ensure(instances.len() == 30, || format!("{} fixture instances", instances.len()))?;
    let backend = fixture_backend();
    let config = DebateConfig::default();
    let records = runtime()
        .block_on(run_pipeline(&instances, &config, &backend, &TemplateSet::builtin(), 4))
        .map_err(|e| e.to_string())?;
    let k = config.scheduled_turns();
    for r in records.iter().filter(|r| !r.skipped) {
        let id = &r.instance_id;
        ensure(!r.failed, || format!("{id} failed: {:?}", r.error))?;
        ensure(r.turns.len() == k, || format!("{id}: {} turns", r.turns.len()))?;
        for (i, t) in r.turns.turns().iter().enumerate() {
            let want = if i % 2 == 0 { Speaker::Proponent } else { Speaker::Opponent };
            ensure(t.speaker == want && t.index == i + 1, || format!("{id}: turn {} out of order", i + 1))?;
        }
        let stance = r.stance.ok_or_else(|| format!("{id}: no stance"))?;
        let (a, b) = r.manager_distribution.ok_or_else(|| format!("{id}: no distribution"))?.top_two();
        let same = (stance.proponent, stance.opponent) == (a, b) || (stance.proponent, stance.opponent) == (b, a);
        ensure(same && stance.proponent != stance.opponent, || format!("{id}: stance is not the top two"))?;
    }
    let want_calls = instances.len() * (2 + k);
    ensure(backend.call_count() == want_calls, || format!("{} calls, want {want_calls}", backend.call_count()))?;
    Ok(format!("{} records, {} calls, {}", records.len(), want_calls, within(Duration::from_secs(5), start)?))
}

fn c4_stance_fairness() -> Check {
    let start = Instant::now();
    let dist = LabelDistribution::from_weights([0.05, 0.20, 0.75]);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 10_000;
    let top_first = (0..n)
        .filter(|_| assign_stances(&dist, &mut rng).0.proponent == ArgLabel::Premise)
        .count();
    let freq = top_first as f64 / n as f64;
    ensure((0.48..=0.52).contains(&freq), || format!("frequency {freq}"))?;
    Ok(format!("frequency {freq:.4}, {}", within(Duration::from_secs(2), start)?))
}

fn c5_determinism() -> Check {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = RunConfig::load(&fixtures().join("madacc.toml")).map_err(|e| e.to_string())?;
    config.output_dir = tmp.path().to_path_buf();
    cmd_prepare(&config, None).map_err(|e| e.to_string())?;
    let rt = runtime();
    let mut outputs = Vec::new();
    for p in [1, 8] {
        config.apply_overrides(Some(42), Some(p))?;
        let dir = tmp.path().join(format!("p{p}"));
        let options = RunOptions { run_dir: Some(dir.clone()), quiet: true, ..RunOptions::default() };
        rt.block_on(cmd_run(&config, Method::Madacc, options)).map_err(|e| e.to_string())?;
        outputs.push(std::fs::read(dir.join(RECORDS_FILE)).map_err(|e| e.to_string())?);
    }
    ensure(!outputs[0].is_empty() && outputs[0] == outputs[1], || "records differ between parallelism 1 and 8".into())?;
    Ok(format!("{} bytes identical, {}", outputs[0].len(), within(Duration::from_secs(10), start)?))
}

fn c6_skip_boundaries() -> Check {
    let start = Instant::now();
    let instances = fixture_instances();
    let rt = runtime();

    let backend = fixture_backend();
    let config = DebateConfig { skip_threshold: 0.0, ..DebateConfig::default() };
    let records = rt
        .block_on(run_pipeline(&instances, &config, &backend, &TemplateSet::builtin(), 8))
        .map_err(|e| e.to_string())?;
    for r in &records {
        let argmax = r.manager_distribution.map(|d| d.argmax());
        ensure(r.skipped && r.verdict.as_ref().map(|v| v.label) == argmax, || format!("{} not skipped to argmax", r.instance_id))?;
    }
    let extra = backend.calls_for(AgentRole::Debater) + backend.calls_for(AgentRole::Judge);
    ensure(extra == 0, || format!("{extra} debater/judge calls at τ = 0"))?;

    let records = rt
        .block_on(run_pipeline(&instances, &DebateConfig::default(), &fixture_backend(), &TemplateSet::builtin(), 8))
        .map_err(|e| e.to_string())?;
    let skipped = records.iter().filter(|r| r.skipped).count();
    ensure(skipped == 0, || format!("{skipped} skipped at τ = 1"))?;
    Ok(format!("τ=0 all skipped, τ=1 none skipped, {}", within(Duration::from_secs(5), start)?))
}

fn c7_leak_freedom() -> Check {
    let start = Instant::now();
    let f = fixtures();
    let corpus = f.join("corpus");
    let mut n = 0;
    for id in read_split(&f.join("split.txt")).map_err(|e| e.to_string())? {
        let essay = load_essay(&corpus, &id).map_err(|e| e.to_string())?;
        let ann = std::fs::read_to_string(corpus.join(format!("{id}.ann"))).map_err(|e| e.to_string())?;
        // every label string the annotation file uses
        let label_strings: Vec<&str> = ann
            .lines()
            .filter(|l| l.starts_with('T'))
            .filter_map(|l| l.split('\t').nth(1)?.split(' ').next())
            .collect();
        for inst in make_instances(&essay) {
            for s in &label_strings {
                ensure(!inst.masked_text.contains(s), || format!("{}: masked text contains `{s}`", inst.instance_id))?;
            }
            ensure(strip_tags(&inst.masked_text) == essay.text, || format!("{}: strip mismatch", inst.instance_id))?;
            n += 1;
        }
    }
    Ok(format!("{n} instances clean, {}", within(Duration::from_secs(2), start)?))
}

fn c8_worked_example_trace() -> Check {
    let start = Instant::now();
    let script = MockScript::default()
        .rule(Some(AgentRole::Manager), "", r#"{"Premise": 0.75, "Claim": 0.20, "MajorClaim": 0.05}"#)
        .rule(Some(AgentRole::Debater), "Turn 1 ", "It gives a reason for the position stated before it.")
        .rule(Some(AgentRole::Debater), "Turn 2 ", "It opens a paragraph and the next sentences back it up.")
        .rule(Some(AgentRole::Debater), "Turn 3 ", "Its wording is that of a supporting example.")
        .rule(Some(AgentRole::Debater), "Turn 4 ", "The support runs towards it, not away from it.")
        .rule(Some(AgentRole::Judge), "", "Support flows into the unit from the sentences after it.\nLABEL: Claim");
    let backend = MockBackend::new(script);
    let instance = fixture_instances()
        .into_iter()
        .find(|i| i.gold_label == ArgLabel::Claim)
        .ok_or("no claim instance")?;
    let record = runtime()
        .block_on(run_debate(&instance, &DebateConfig::default(), &backend, &TemplateSet::builtin()))
        .map_err(|e| e.to_string())?;
    let verdict = record.verdict.as_ref().map(|v| v.label);
    ensure(verdict == Some(ArgLabel::Claim), || format!("verdict {verdict:?}"))?;
    ensure(record.turns.len() == 4, || "expected 4 turns".into())?;

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = tmp.path().join(RECORDS_FILE);
    madacc::jsonl::write_jsonl(&path, std::slice::from_ref(&record)).map_err(|e| e.to_string())?;
    let trace = cmd_inspect(&path, &record.instance_id).map_err(|e| e.to_string())?;
    ensure(trace == format_trace(&record), || "trace differs after JSONL round trip".into())?;
    let line = trace
        .lines()
        .find(|l| l.starts_with("Final Label"))
        .ok_or("no Final Label line")?;
    ensure(line == "Final Label: CLAIM", || format!("`{line}`"))?;
    Ok(format!("`{line}`, {}", within(Duration::from_secs(2), start)?))
}

const UKP_CORPUS_ENV: &str = "MADACC_UKP_CORPUS_DIR";
const UKP_SPLIT_ENV: &str = "MADACC_UKP_SPLIT_FILE";

fn c9_corpus_scale() -> Outcome {
    let (Some(dir), Some(split)) = (std::env::var_os(UKP_CORPUS_ENV), std::env::var_os(UKP_SPLIT_ENV)) else {
        return Outcome::Skip(format!("set {UKP_CORPUS_ENV} and {UKP_SPLIT_ENV} to run"));
    };
    let check = || -> Check {
        let essays = load_split(Path::new(&dir), Path::new(&split)).map_err(|e| e.to_string())?;
        let instances: usize = essays.iter().map(|e| e.components.len()).sum();
        ensure(essays.len() == 80 && instances == 1266, || {
            format!("{} essays, {instances} instances", essays.len())
        })?;
        Ok("80 essays, 1266 instances".into())
    };
    match check() {
        Ok(m) => Outcome::Pass(m),
        Err(m) => Outcome::Fail(m),
    }
}

const LIVE_ENDPOINT_ENV: &str = "MADACC_LIVE_ENDPOINT";

fn c10_live_smoke() -> Outcome {
    let Ok(endpoint) = std::env::var(LIVE_ENDPOINT_ENV) else {
        return Outcome::Skip(format!("set {LIVE_ENDPOINT_ENV} and MADACC_API_KEY to run"));
    };
    let check = || -> Check {
        let backend = LiveBackend::from_env(LiveConfig::new(endpoint)).map_err(|e| e.to_string())?;
        let instance = fixture_instances().remove(0);
        let record = runtime()
            .block_on(run_debate(&instance, &DebateConfig::default(), &backend, &TemplateSet::builtin()))
            .map_err(|e| e.to_string())?;
        let v = record.verdict.ok_or("no verdict")?;
        Ok(format!("verdict {}", v.label))
    };
    match check() {
        Ok(m) => Outcome::Pass(m),
        Err(m) => Outcome::Fail(m),
    }
}

fn gated(check: fn() -> Check) -> Outcome {
    match std::panic::catch_unwind(check) {
        Ok(Ok(m)) => Outcome::Pass(m),
        Ok(Err(m)) => Outcome::Fail(m),
        Err(_) => Outcome::Fail("panicked".into()),
    }
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        (1, "macro F1 arithmetic on published per-class scores", true, Box::new(|| gated(c1_table_arithmetic))),
        (2, "F1 matches brute-force oracle on random matrices", true, Box::new(|| gated(c2_metric_oracle))),
        (3, "protocol invariants on the 30-instance fixture", true, Box::new(|| gated(c3_protocol_invariants))),
        (4, "stance assignment fairness over 10,000 draws", true, Box::new(|| gated(c4_stance_fairness))),
        (5, "byte-identical records at parallelism 1 and 8", true, Box::new(|| gated(c5_determinism))),
        (6, "skip threshold boundaries", true, Box::new(|| gated(c6_skip_boundaries))),
        (7, "masked text leaks no labels and strips back to the essay", true, Box::new(|| gated(c7_leak_freedom))),
        (8, "scripted worked-example trace ends in a Final Label line", true, Box::new(|| gated(c8_worked_example_trace))),
        (9, "full test split has 80 essays and 1266 instances", true, Box::new(c9_corpus_scale)),
        (10, "live endpoint smoke test (non-gating)", false, Box::new(c10_live_smoke)),
    ];
    let mut failed = false;
    for (n, name, gating, run) in criteria {
        let (tag, detail) = match run() {
            Outcome::Pass(m) => ("PASS", m),
            Outcome::Fail(m) => {
                failed |= gating;
                ("FAIL", m)
            }
            Outcome::Skip(m) => ("SKIP", m),
        };
        println!("{tag} [{n:>2}] {name}: {detail}");
    }
    if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS }
}
