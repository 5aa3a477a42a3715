//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scentrec_core::domain::InterestLabel;
use scentrec_core::forage::{compare_policies, median, ForageConfig, ForageTask};
use scentrec_core::ingest::{load_manifest, Store, StoreConfig};
use scentrec_core::learn::{auc, f1, split_dataset, train, Dataset, Hyperparameters, TrainerKind};
use scentrec_core::recommend::rank_by_scent;
use scentrec_core::scent::{
    averaged_scent_ranking, discounted_scent, raw_scent, InteractionEvent, ScentConfig, SessionProfile,
};
use scentrec_core::session::Session;
use scentrec_service::{router, AppState, ServiceOptions};
use serde_json::{json, Value};
use tower::ServiceExt;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Option<Duration>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mini_corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mini-corpus")
}

fn mini_store() -> Result<Store, String> {
    let dir = mini_corpus();
    let manifest = load_manifest(&dir.join("manifest.json")).map_err(|e| e.to_string())?;
    Store::build(manifest, StoreConfig::new(dir)).map_err(|e| e.to_string())
}

fn f1_table() -> Check {
    let rows = [(0.77, 0.85, 0.81), (0.80, 0.89, 0.84), (0.81, 0.70, 0.75), (0.85, 0.74, 0.79), (0.81, 0.62, 0.70), (0.47, 0.53, 0.50)];
    let mut worst: f64 = 0.0;
    for (p, r, want) in rows {
        let got = f1(p, r);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 0.005, || format!("f1({p}, {r}) = {got:.4}, expected {want} ± 0.005"))?;
    }
    Ok(format!("6 rows, max |Δ| = {worst:.4}"))
}

fn auc_bruteforce() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let n = rng.gen_range(2..=50);
        // small score alphabet forces ties
        let levels = rng.gen_range(1..=8);
        let mut labels: Vec<InterestLabel> = (0..n).map(|_| InterestLabel::from(rng.gen_bool(0.5))).collect();
        labels[0] = InterestLabel::from(true);
        labels[1] = InterestLabel::from(false);
        labels.shuffle(&mut rng);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..levels)) / 4.0).collect();
        let (mut twice, mut pairs) = (0u64, 0u64);
        for (i, li) in labels.iter().enumerate() {
            for (j, lj) in labels.iter().enumerate() {
                if li.is_interested() && !lj.is_interested() {
                    pairs += 1;
                    twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        std::cmp::Ordering::Greater => 2,
                        std::cmp::Ordering::Equal => 1,
                        std::cmp::Ordering::Less => 0,
                    };
                }
            }
        }
        let want = twice as f64 / (2 * pairs) as f64;
        let got = auc(&labels, &scores).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("case {case}: auc {got} != brute force {want}"))?;
    }
    Ok("200 instances, exact equality".into())
}

/// Two well-separated Gaussian blobs; each point also gets a bag of
/// quantised-coordinate tokens for the text model.
fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<InterestLabel>, Vec<Vec<String>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| -> f64 {
        // Box–Muller
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut docs = Vec::with_capacity(n);
    for i in 0..n {
        let positive = i % 2 == 1;
        let c = if positive { 2.0 } else { -2.0 };
        let row = vec![c + 0.5 * gauss(&mut rng), c + 0.5 * gauss(&mut rng)];
        docs.push(row.iter().enumerate().map(|(d, x)| format!("x{d}q{}", x.floor() as i64)).collect());
        rows.push(row);
        labels.push(InterestLabel::from(positive));
    }
    (rows, labels, docs)
}

fn classifier_sanity() -> Check {
    let kinds = [TrainerKind::NaiveBayes, TrainerKind::LinearSvm, TrainerKind::RandomForest, TrainerKind::Gbt];
    let (rows, labels, docs) = blobs(200, 3);
    let data = Dataset::from_rows(rows.clone(), labels.clone()).and_then(|d| d.with_docs(docs.clone())).map_err(|e| e.to_string())?;
    let (tr, te) = split_dataset(&data, 0.67, 42).map_err(|e| e.to_string())?;
    let mut accs = Vec::new();
    for kind in kinds {
        let model = train(kind, &tr, &Hyperparameters::new(), 42).map_err(|e| e.to_string())?;
        let acc = model.evaluate(&te).map_err(|e| e.to_string())?.accuracy();
        ensure(acc >= 0.95, || format!("{kind}: separable test accuracy {acc:.3} < 0.95"))?;
        accs.push(format!("{kind}={acc:.2}"));
    }
    let mut aucs = Vec::new();
    for kind in kinds {
        let mut values = Vec::new();
        for seed in 0..10u64 {
            let mut shuffled = labels.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(100 + seed));
            let data = Dataset::from_rows(rows.clone(), shuffled).and_then(|d| d.with_docs(docs.clone())).map_err(|e| e.to_string())?;
            let (tr, te) = split_dataset(&data, 0.67, seed).map_err(|e| e.to_string())?;
            let model = train(kind, &tr, &Hyperparameters::new(), seed).map_err(|e| e.to_string())?;
            let a = model.evaluate(&te).map_err(|e| e.to_string())?.auc.ok_or("AUC undefined")?;
            values.push(a);
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        ensure((0.4..=0.6).contains(&mean), || format!("{kind}: shuffled-label mean AUC {mean:.3} outside [0.4, 0.6] ({values:?})"))?;
        aucs.push(format!("{kind}={mean:.3}"));
    }
    Ok(format!("accuracy {}; shuffled mean AUC over 10 seeds {}", accs.join(" "), aucs.join(" ")))
}

fn split_check() -> Check {
    let n = 1116;
    let mut detail = Vec::new();
    for positives in [372usize, 558, 100, 2] {
        let labels: Vec<InterestLabel> = (0..n).map(|i| InterestLabel::from(i < positives)).collect();
        let rows = (0..n).map(|i| vec![i as f64]).collect();
        let data = Dataset::from_rows(rows, labels).map_err(|e| e.to_string())?;
        let (tr, te) = split_dataset(&data, 0.67, 42).map_err(|e| e.to_string())?;
        ensure((tr.len(), te.len()) == (747, 369), || format!("sizes ({}, {}) with {positives} positives", tr.len(), te.len()))?;
        let counts = [n - positives, positives];
        for (c, (&total, &got)) in counts.iter().zip(tr.class_counts().iter()).enumerate() {
            let want = 0.67 * total as f64;
            ensure((got as f64 - want).abs() <= 1.0, || format!("class {c}: {got} train rows, proportional share {want:.2}"))?;
        }
        detail.push(format!("{positives}+:{:?}", tr.class_counts()));
    }
    Ok(format!("(747, 369); train class counts {}", detail.join(" ")))
}

fn scent_suite() -> Check {
    let store = mini_store()?;
    let corpus = store.corpus();
    let config = ScentConfig::default();
    let vocab: Vec<String> = corpus.tfidf().vocabulary().to_vec();
    let hist_dim = corpus.visual_vector(0).len();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ids: Vec<String> = corpus.ids().map(str::to_string).collect();

    let random_profile = |rng: &mut ChaCha8Rng| {
        let mut p = SessionProfile::default();
        for _ in 0..rng.gen_range(0..6) {
            let term = if rng.gen_bool(0.9) { vocab.choose(rng).unwrap().clone() } else { "unseen".to_string() };
            *p.term_weights.entry(term).or_insert(0.0) += rng.gen_range(0.1..3.0);
        }
        if rng.gen_bool(0.6) {
            let mut v: Vec<f64> = (0..hist_dim).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            p.visual_centroid = Some(v);
            p.visual_count = 1;
        }
        p.iteration = rng.gen_range(0..5);
        p
    };

    for i in 0..1000 {
        let p = random_profile(&mut rng);
        let id = ids.choose(&mut rng).unwrap();
        let s = raw_scent(&p, id, corpus, &config).map_err(|e| e.to_string())?;
        ensure((0.0..=1.0).contains(&s.raw), || format!("profile {i}: raw scent {} for {id}", s.raw))?;
    }

    for _ in 0..200 {
        let raw = rng.gen_range(1e-6..=1.0);
        let gamma = rng.gen_range(0.05..0.999);
        let mut prev = f64::INFINITY;
        for k in 0..30 {
            let d = discounted_scent(raw, k, gamma).map_err(|e| e.to_string())?;
            ensure(d < prev, || format!("discount not strictly decreasing at raw={raw} gamma={gamma} k={k}"))?;
            prev = d;
        }
    }

    for i in 0..200 {
        let p = random_profile(&mut rng);
        let base: Vec<String> = rank_by_scent(&ids, &p, corpus, &config).map_err(|e| e.to_string())?.into_iter().map(|r| r.image_id).collect();
        for c in [0.25, 0.5, 2.0, 8.0] {
            let mut q = p.clone();
            q.term_weights.values_mut().for_each(|w| *w *= c);
            let scaled: Vec<String> = rank_by_scent(&ids, &q, corpus, &config).map_err(|e| e.to_string())?.into_iter().map(|r| r.image_id).collect();
            ensure(scaled == base, || format!("profile {i}: ordering changed under scaling by {c}"))?;
        }
    }

    let images: Vec<String> = (0..6).map(|i| format!("img{i}")).collect();
    for trial in 0..50 {
        let runs: Vec<BTreeMap<String, f64>> = (0..10)
            .map(|_| {
                images
                    .iter()
                    .filter_map(|id| {
                        let keep = rng.gen_bool(0.8);
                        let v = f64::from(rng.gen_range(0..=64u32)) / 64.0;
                        keep.then(|| (id.clone(), v))
                    })
                    .collect()
            })
            .collect();
        let got = averaged_scent_ranking(&runs).map_err(|e| e.to_string())?;
        let mut means: Vec<(String, f64)> = images
            .iter()
            .filter_map(|id| {
                let seen: Vec<f64> = runs.iter().filter_map(|r| r.get(id).copied()).collect();
                (!seen.is_empty()).then(|| (id.clone(), seen.iter().sum::<f64>() / seen.len() as f64))
            })
            .collect();
        means.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let vals: Vec<f64> = means.iter().map(|m| m.1).collect();
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = sorted.len();
        let med = if m % 2 == 1 { sorted[m / 2] } else { (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0 };
        let interesting: Vec<String> = means.iter().filter(|x| x.1 >= med).map(|x| x.0.clone()).collect();
        let uninteresting: Vec<String> = means.iter().filter(|x| x.1 < med).map(|x| x.0.clone()).collect();
        ensure(got.ranked == means, || format!("trial {trial}: ranking {:?} != oracle {means:?}", got.ranked))?;
        ensure(got.interesting == interesting && got.uninteresting == uninteresting, || format!("trial {trial}: split differs"))?;
    }
    Ok("1000 raw-scent bounds, 200×30 discount steps, 200×4 scalings, 50 averaging oracles (10 runs × 6 images)".into())
}

fn foraging_comparison() -> Check {
    let store = mini_store()?;
    let corpus = store.corpus();
    let tasks = [ForageTask::new("spaghetti bolognese", "spaghetti_bolognese"), ForageTask::new("zoodles", "zoodles")];
    let config = ForageConfig::default();
    let (greedy, random, test) = compare_policies(corpus, &tasks, 50, 7, &config).map_err(|e| e.to_string())?;
    let costs = |b: &scentrec_core::forage::Batch| -> Vec<f64> {
        b.trajectories.iter().flatten().map(|t| t.cost(config.max_iters) as f64).collect()
    };
    let (mg, mr) = (median(&costs(&greedy)), median(&costs(&random)));
    ensure(costs(&greedy).len() == 100, || "expected 100 paired runs".into())?;
    ensure(mg <= mr, || format!("greedy median {mg} > random median {mr}"))?;
    ensure(test.p_value < 0.05, || format!("sign test p = {} (wins {}, losses {}, ties {})", test.p_value, test.wins, test.losses, test.ties))?;
    Ok(format!(
        "median steps greedy {mg} vs random {mr}; wins {} losses {} ties {}; p = {:.2e}",
        test.wins, test.losses, test.ties, test.p_value
    ))
}

fn check_report_schema(v: &Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("report is not an object")?;
    let model = obj.get("model").and_then(Value::as_str).ok_or("model missing")?;
    ensure(model == "gs-random-forest", || format!("model {model}"))?;
    let classes = obj.get("classes").and_then(Value::as_object).ok_or("classes missing")?;
    ensure(classes.keys().map(String::as_str).eq(["0", "1"]), || "classes must be exactly \"0\" and \"1\"".into())?;
    let mut support_total = 0;
    for (k, c) in classes {
        for key in ["precision", "recall", "f1"] {
            let x = c.get(key).and_then(Value::as_f64).ok_or_else(|| format!("classes.{k}.{key} missing"))?;
            ensure((0.0..=1.0).contains(&x), || format!("classes.{k}.{key} = {x}"))?;
        }
        support_total += c.get("support").and_then(Value::as_u64).ok_or_else(|| format!("classes.{k}.support missing"))?;
    }
    match obj.get("auc") {
        Some(Value::Null) => {}
        Some(a) => {
            let a = a.as_f64().ok_or("auc not a number")?;
            ensure((0.0..=1.0).contains(&a), || format!("auc {a}"))?;
        }
        None => return Err("auc missing".into()),
    }
    let confusion = obj.get("confusion").and_then(Value::as_array).ok_or("confusion missing")?;
    ensure(confusion.len() == 2, || "confusion must be 2×2".into())?;
    let mut cells = 0;
    for row in confusion {
        let row = row.as_array().ok_or("confusion row")?;
        ensure(row.len() == 2, || "confusion must be 2×2".into())?;
        for c in row {
            cells += c.as_u64().ok_or("confusion cell not a count")?;
        }
    }
    ensure(cells == support_total, || format!("confusion total {cells} != support total {support_total}"))?;
    ensure(obj.get("seed").and_then(Value::as_u64) == Some(42), || "seed must be 42".into())?;
    let hp = obj.get("hyperparameters").and_then(Value::as_object).ok_or("hyperparameters missing")?;
    ensure(hp.values().all(Value::is_number), || "hyperparameters must be numeric".into())?;
    Ok(())
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_scentrec")).args(args).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("scentrec {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
}

fn end_to_end() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = mini_corpus().join("manifest.json");
    let mut reports = Vec::new();
    for run in 0..2 {
        let store = tmp.path().join(format!("store{run}"));
        let report = tmp.path().join(format!("report{run}.json"));
        let (store_s, report_s) = (store.to_str().unwrap(), report.to_str().unwrap());
        run_cli(&["ingest", "--manifest", manifest.to_str().unwrap(), "--store", store_s])?;
        run_cli(&["eval", "--store", store_s, "--model", "rf", "--train-frac", "0.67", "--seed", "42", "--report", report_s])?;
        reports.push(std::fs::read(&report).map_err(|e| e.to_string())?);
    }
    let v: Value = serde_json::from_slice(&reports[0]).map_err(|e| e.to_string())?;
    check_report_schema(&v)?;
    ensure(reports[0] == reports[1], || "reports differ between runs".into())?;
    Ok(format!("schema valid, {} bytes, identical across runs", reports[0].len()))
}

async fn request(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> Result<(StatusCode, Value), String> {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .map_err(|e| e.to_string())?;
    let resp = app.clone().oneshot(req).await.map_err(|e| e.to_string())?;
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.map_err(|e| e.to_string())?;
    Ok((status, serde_json::from_slice(&bytes).map_err(|e| e.to_string())?))
}

fn engine_parity() -> Check {
    let store = mini_store()?;
    let options = ServiceOptions::for_store(&store);
    let (scent, pool) = (options.scent, options.pool_size);
    let app = router(AppState::new(store, options).map_err(|e| e.to_string())?);
    let library = mini_store()?;
    let corpus = library.corpus();
    let query = "homemade pasta";
    let events = vec![
        InteractionEvent::cue_click("zo04", "c1"),
        InteractionEvent::examine("sb11"),
        InteractionEvent::preference_select("pesto"),
        InteractionEvent::image_select("zo07"),
        InteractionEvent::cue_click("zo13", "c1"),
        InteractionEvent::skip("sb02"),
        InteractionEvent::preference_select("spiralized"),
    ];
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let served = runtime.block_on(async {
        let (status, created) = request(&app, "POST", "/api/sessions", Some(json!({ "query": query }))).await?;
        ensure(status == StatusCode::CREATED, || format!("create returned {status}"))?;
        let id = created["session_id"].as_str().ok_or("no session id")?.to_string();
        for ev in &events {
            let body = serde_json::to_value(ev).map_err(|e| e.to_string())?;
            let (status, v) = request(&app, "POST", &format!("/api/sessions/{id}/events"), Some(body)).await?;
            ensure(status == StatusCode::OK, || format!("event rejected: {v}"))?;
        }
        let (_, recs) = request(&app, "GET", &format!("/api/sessions/{id}/recommendations?k=500"), None).await?;
        Ok::<Value, String>(recs)
    })?;
    let session = Session::replay(query, &events, corpus, scent, pool).map_err(|e| e.to_string())?;
    let local = rank_by_scent(session.pool(), session.profile(), corpus, &scent).map_err(|e| e.to_string())?;
    let items = served["items"].as_array().ok_or("no items")?;
    ensure(items.len() == local.len(), || format!("{} served vs {} local items", items.len(), local.len()))?;
    for (pos, (s, l)) in items.iter().zip(&local).enumerate() {
        let sc = l.scent.ok_or("missing scent")?;
        ensure(s["image_id"] == l.image_id.as_str(), || format!("position {pos}: {} vs {}", s["image_id"], l.image_id))?;
        ensure(
            s["scent"]["discounted"].as_f64() == Some(sc.discounted)
                && s["scent"]["raw"].as_f64() == Some(sc.raw)
                && s["scent"]["text"].as_f64() == Some(sc.text_component)
                && s["scent"]["visual"].as_f64() == Some(sc.visual_component),
            || format!("position {pos}: scent differs for {}", l.image_id),
        )?;
    }
    Ok(format!("{} items identical after {} events", local.len(), events.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("f1-table-arithmetic", f1_table, Some(Duration::from_secs(1))),
        ("auc-equals-pair-counting", auc_bruteforce, Some(Duration::from_secs(5))),
        ("classifier-sanity", classifier_sanity, Some(Duration::from_secs(30))),
        ("stratified-split-1116", split_check, Some(Duration::from_secs(1))),
        ("scent-suite", scent_suite, Some(Duration::from_secs(10))),
        ("foraging-greedy-beats-random", foraging_comparison, Some(Duration::from_secs(60))),
        ("end-to-end-ingest-eval", end_to_end, Some(Duration::from_secs(60))),
        ("service-engine-parity", engine_parity, None),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if elapsed > l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
