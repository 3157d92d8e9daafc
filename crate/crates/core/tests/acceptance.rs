//! Acceptance suite: one PASS/FAIL line per criterion, with wall time.
//! Run with `cargo test -p careval --test acceptance`.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use careval::adapt::synthetic::topic_triplets;
use careval::adapt::{info_nce_loss, separation, train, LossBatch, TrainConfig};
use careval::capst::{aggregate, evaluate_captions, f1, score_video, VideoOutcome};
use careval::corpus::{load_corpus, load_predictions, write_corpus, CaptionSet, PredictionEntry};
use careval::embed_store::{
    default_ids_path, read_embeddings, write_embeddings, EmbeddingMatrix,
};
use careval::judge::{Aspect, Judge, JudgeConfig};
use careval::retrieval::{eval_retrieval, rebias, unified_score, BiasOrientation, RecallTable, Split};
use common::{
    brute_force_recall, capst6_categories, f32_rows, fixture, ids, max_rel_gradient_error, naive_info_nce,
    random_rows, rng, CAPST6_OVERALL_ACTION, CAPST6_OVERALL_OBJECT, CAPST6_SCORES, KNIFE_GT_TEMPORAL,
    KNIFE_PREDICTION,
};
use rand::seq::index::sample;
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bias(spatial: [f64; 6], temporal: [f64; 6], o: BiasOrientation) -> f64 {
    let s = RecallTable::from_r1_r5_r10(Split::Spatial, &spatial).unwrap();
    let t = RecallTable::from_r1_r5_r10(Split::Temporal, &temporal).unwrap();
    rebias(&s, &t, o).unwrap().bias_percent
}

const CLIP_B16: ([f64; 6], [f64; 6]) = (
    [45.6, 79.0, 89.2, 47.6, 80.9, 90.8],
    [30.3, 65.1, 79.8, 35.8, 71.0, 85.8],
);

fn rebias_rows() -> Check {
    let rows = [
        ("CLIP B/16", CLIP_B16.0, CLIP_B16.1, 17.75),
        (
            "CLIP L/14",
            [49.0, 81.9, 91.4, 55.4, 85.6, 93.0],
            [33.5, 70.3, 84.0, 39.7, 76.2, 87.9],
            16.52,
        ),
        (
            "Qwen2-VL 7B",
            [28.1, 61.3, 76.1, 31.6, 65.6, 80.4],
            [24.3, 61.5, 78.4, 26.4, 59.2, 76.1],
            5.28,
        ),
    ];
    let mut detail = Vec::new();
    for (model, s, t, published) in rows {
        let b = bias(s, t, BiasOrientation::Table3Compatible);
        ensure((b - published).abs() <= 0.05, || format!("{model}: {b:.4} vs {published}"))?;
        detail.push(format!("{model} {b:.2}"));
    }
    Ok(detail.join(", "))
}

fn careval(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_careval"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "careval {:?} exited {:?}: {}",
            args,
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn rebias_orientation() -> Check {
    let b = bias(CLIP_B16.0, CLIP_B16.1, BiasOrientation::Eq1Literal);
    ensure((b - 15.08).abs() < 0.005, || format!("eq1_literal gave {b:.4}"))?;
    let s = CLIP_B16.0.map(|x| x.to_string()).join(",");
    let t = CLIP_B16.1.map(|x| x.to_string()).join(",");
    for orientation in ["eq1_literal", "table3_compatible"] {
        let out = careval(&["rebias", "--spatial", &s, "--temporal", &t, "--orientation", orientation])?;
        let report: serde_json::Value = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
        let note = report["provenance"]["orientation"].as_str().unwrap_or_default();
        ensure(!note.is_empty(), || format!("{orientation} report has no orientation provenance"))?;
    }
    Ok(format!("eq1_literal {b:.2}; reports carry the orientation note"))
}

fn f1_cells() -> Check {
    let mut detail = Vec::new();
    for (r, p, expected) in [(29.1, 50.2, 36.8), (18.4, 51.1, 27.1), (21.8, 57.8, 31.7)] {
        let got = 100.0 * f1(p / 100.0, r / 100.0);
        ensure((got - expected).abs() <= 0.05, || format!("R {r} P {p}: {got:.3} vs {expected}"))?;
        detail.push(format!("{got:.2}"));
    }
    Ok(detail.join(", "))
}

fn unified_scores() -> Check {
    for (r1, f, expected) in [(25.6, 26.8, "26.2"), (17.6, 33.8, "25.7"), (77.0, 28.2, "52.6"), (78.0, 33.4, "55.7")] {
        let got = format!("{:.1}", unified_score(r1, f));
        ensure(got == expected, || format!("({r1}, {f}) gave {got}, want {expected}"))?;
    }
    Ok("4 rows exact at one decimal".into())
}

fn oracle_matches(texts: &[Vec<f64>], videos: &[Vec<f64>], ks: &[usize]) -> Result<RecallTable, String> {
    let id_list = ids("x", texts.len());
    let t = EmbeddingMatrix::from_rows(id_list.clone(), texts).map_err(|e| e.to_string())?;
    let v = EmbeddingMatrix::from_rows(id_list.clone(), videos).map_err(|e| e.to_string())?;
    let table = eval_retrieval(Split::General, &t, &v, ks).map_err(|e| e.to_string())?;
    let t2v = brute_force_recall(&id_list, texts, &id_list, videos, ks);
    let v2t = brute_force_recall(&id_list, videos, &id_list, texts, ks);
    ensure(table.t2v == t2v && table.v2t == v2t, || {
        format!("library {:?}/{:?} vs oracle {t2v:?}/{v2t:?}", table.t2v, table.v2t)
    })?;
    Ok(table)
}

fn retrieval_oracle() -> Check {
    for seed in 0..100 {
        let mut r = rng(seed);
        let n = r.gen_range(1..=64);
        let d = r.gen_range(1..=16);
        let texts = random_rows(&mut r, n, d);
        let videos = random_rows(&mut r, n, d);
        let ks: Vec<usize> = [1, 5, 10].into_iter().filter(|&k| k <= n).collect();
        oracle_matches(&texts, &videos, &ks).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    let rows = random_rows(&mut rng(1000), 32, 8);
    let identity = oracle_matches(&rows, &rows, &[1, 5, 10])?;
    ensure(identity.t2v.values().chain(identity.v2t.values()).all(|&x| x == 100.0), || {
        format!("identity gave {identity:?}")
    })?;
    let texts = vec![vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let videos = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
    let tie = oracle_matches(&texts, &videos, &[1, 3])?;
    ensure((tie.t2v[&1] - 100.0 / 3.0).abs() < 1e-12 && tie.t2v[&3] == 100.0, || {
        format!("tie fixture gave {:?}", tie.t2v)
    })?;
    Ok("100 seeds, identity, tie fixture".into())
}

fn retrieval_scale() -> Check {
    let (n, d) = (1000, 4096);
    let mut r = rng(77);
    let texts = f32_rows(random_rows(&mut r, n, d));
    let videos = f32_rows(random_rows(&mut r, n, d));
    let id_list = ids("v", n);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let load = |name: &str, rows: &[Vec<f64>]| -> Result<EmbeddingMatrix, String> {
        let m = EmbeddingMatrix::from_rows(id_list.clone(), rows).map_err(|e| e.to_string())?;
        let path = dir.path().join(name);
        write_embeddings(&m, &path, default_ids_path(&path)).map_err(|e| e.to_string())?;
        read_embeddings(&path, default_ids_path(&path)).map_err(|e| e.to_string())
    };
    let (t, v) = (load("t.emb", &texts)?, load("v.emb", &videos)?);

    let start = Instant::now();
    let table = eval_retrieval(Split::General, &t, &v, &[1, 5, 10]).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(2), || format!("took {elapsed:.2?}"))?;
    ensure(table.t2v.len() == 3 && table.v2t.len() == 3, || "missing cutoffs".into())?;

    let pick = sample(&mut r, n, 64).into_vec();
    let sub_t: Vec<Vec<f64>> = pick.iter().map(|&i| texts[i].clone()).collect();
    let sub_v: Vec<Vec<f64>> = pick.iter().map(|&i| videos[i].clone()).collect();
    oracle_matches(&sub_t, &sub_v, &[1, 5, 10]).map_err(|e| format!("64-row subsample: {e}"))?;
    Ok(format!("both directions in {:.0} ms; 64-row subsample matches oracle", elapsed.as_secs_f64() * 1e3))
}

fn loss_checks() -> Check {
    let e = |d: usize, i: usize| -> Vec<f64> { (0..d).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };
    let b = LossBatch::from_rows(&[e(2, 0)], &[e(2, 0)], &[e(2, 1)], 1.0).map_err(|e| e.to_string())?;
    let l = info_nce_loss(&b).map_err(|e| e.to_string())?;
    ensure((l - 0.3133).abs() < 5e-5, || format!("perfect-positive case gave {l}"))?;
    for (c, tau) in [(0.3f64, 0.05), (-0.8, 1.0), (0.95, 7.0)] {
        let other = vec![c, (1.0 - c * c).sqrt()];
        let b = LossBatch::from_rows(&[e(2, 0)], &[other.clone()], &[other], tau).map_err(|e| e.to_string())?;
        let l = info_nce_loss(&b).map_err(|e| e.to_string())?;
        ensure((l - 2f64.ln()).abs() < 1e-12, || format!("equal-similarity c={c} tau={tau} gave {l}"))?;
    }
    let mut r = rng(2024);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = r.gen_range(1..=8);
        let d = r.gen_range(2..=16);
        let tau = r.gen_range(0.05..2.0);
        let (a, p, ng) = (random_rows(&mut r, n, d), random_rows(&mut r, n, d), random_rows(&mut r, n, d));
        let got = info_nce_loss(&LossBatch::from_rows(&a, &p, &ng, tau).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        worst = worst.max((got - naive_info_nce(&a, &p, &ng, tau)).abs());
    }
    ensure(worst < 1e-10, || format!("naive oracle gap {worst:e}"))?;
    Ok(format!("closed forms exact; naive gap {worst:.1e} over 50 batches"))
}

fn gradient_check() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        for tau in [0.1, 0.5, 1.0] {
            worst = worst.max(max_rel_gradient_error(seed, tau));
        }
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.1e} over 20 seeds"))
}

fn toy_adaptation() -> Check {
    let triplets = topic_triplets(50, 42);
    let held_out = topic_triplets(50, 4242);
    let (enc, summary) = train(&triplets, &TrainConfig::default()).map_err(|e| e.to_string())?;
    ensure(summary.final_loss < summary.initial_loss, || {
        format!("loss {} -> {}", summary.initial_loss, summary.final_loss)
    })?;
    let sep = separation(&enc, &held_out).map_err(|e| e.to_string())?;
    ensure(sep.margin() >= 0.1, || format!("held-out margin {:.4}", sep.margin()))?;
    Ok(format!(
        "loss {:.3} -> {:.3}; held-out margin {:.3}",
        summary.initial_loss,
        summary.final_loss,
        sep.margin()
    ))
}

fn capst_end_to_end() -> Check {
    const TOL: f64 = 1e-9;
    let judge = Judge::new(JudgeConfig::mock()).map_err(|e| e.to_string())?;
    let corpus = load_corpus(fixture("capst6_corpus.jsonl")).map_err(|e| e.to_string())?;
    let preds = load_predictions(fixture("capst6_predictions.jsonl"), Some(&corpus)).map_err(|e| e.to_string())?;
    let outcomes =
        evaluate_captions(&judge, &corpus, &preds, &[Aspect::Event, Aspect::Object]).map_err(|e| e.to_string())?;
    let report = aggregate(&outcomes, &corpus).map_err(|e| e.to_string())?;

    for (id, aspect, p, r) in CAPST6_SCORES {
        let s = report
            .scores
            .iter()
            .find(|s| s.video_id == id && s.aspect.to_string() == aspect)
            .ok_or_else(|| format!("no score for {id}/{aspect}"))?;
        ensure((s.precision - p).abs() < TOL && (s.recall - r).abs() < TOL, || {
            format!("{id}/{aspect}: P {} R {} want {p} {r}", s.precision, s.recall)
        })?;
    }
    let close = |got: Option<careval::capst::Prf>, want: Option<[f64; 3]>| match (got, want) {
        (None, None) => true,
        (Some(g), Some([f, r, p])) => (g.f1 - f).abs() < TOL && (g.recall - r).abs() < TOL && (g.precision - p).abs() < TOL,
        _ => false,
    };
    for (name, action, object) in capst6_categories() {
        let pair = report.per_category.get(name).ok_or_else(|| format!("no category {name}"))?;
        ensure(close(pair.action, action) && close(pair.object, object), || format!("{name}: {pair:?}"))?;
    }
    ensure(
        close(report.overall.action, Some(CAPST6_OVERALL_ACTION))
            && close(report.overall.object, Some(CAPST6_OVERALL_OBJECT)),
        || format!("overall {:?}", report.overall),
    )?;

    let gt = CaptionSet {
        general: format!("A man in a kitchen. {KNIFE_GT_TEMPORAL}"),
        spatial: "A man in a kitchen.".into(),
        temporal: KNIFE_GT_TEMPORAL.into(),
    };
    let pred = PredictionEntry {
        id: "k".into(),
        caption: KNIFE_PREDICTION.into(),
    };
    let VideoOutcome::Scored(s) = score_video(&judge, &gt, &pred, Aspect::Event).map_err(|e| e.to_string())? else {
        return Err("knife fixture was skipped".into());
    };
    ensure(
        (s.recall - 0.5).abs() < TOL && (s.precision - 1.0 / 3.0).abs() < TOL && (s.f1 - 0.4).abs() < TOL,
        || format!("knife fixture P {} R {} F1 {}", s.precision, s.recall, s.f1),
    )?;
    Ok("6-video table exact; {A,B,C,D} fixture R 0.5 P 0.333 F1 0.400".into())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).display().to_string();
    let corpus = fixture("capst6_corpus.jsonl").display().to_string();
    let preds = fixture("capst6_predictions.jsonl").display().to_string();
    let cache = p("cache");
    let caption = |out: &str| {
        careval(&["eval-caption", "--corpus", &corpus, "--predictions", &preds, "--cache-dir", &cache, "--output", out])
    };
    // Cold cache, then two warm runs.
    caption(&p("c0.json"))?;
    caption(&p("c1.json"))?;
    caption(&p("c2.json"))?;
    let train = |ckpt: &str, out: &str| {
        careval(&[
            "train-adapt", "--synthetic", "50", "--data-seed", "42", "--held-out-synthetic", "50", "--epochs", "5",
            "--checkpoint-out", ckpt, "--output", out,
        ])
    };
    train(&p("a.ckpt"), &p("t1.json"))?;
    train(&p("a.ckpt"), &p("t2.json"))?;
    let embed = |out: &str, report: &str| {
        careval(&["embed-text", "--checkpoint", &p("a.ckpt"), "--corpus", &corpus, "--emb-out", out, "--output", report])
    };
    embed(&p("e.emb"), &p("e1.json"))?;
    let first_emb = fs::read(p("e.emb")).map_err(|e| e.to_string())?;
    embed(&p("e.emb"), &p("e2.json"))?;
    let retrieval = |out: &str| {
        careval(&["eval-retrieval", "--text-emb", &p("e.emb"), "--video-emb", &p("e.emb"), "--ks", "1,5", "--output", out])
    };
    retrieval(&p("r1.json"))?;
    retrieval(&p("r2.json"))?;

    let same = |a: &str, b: &str| -> Result<(), String> {
        let (x, y) = (fs::read(p(a)).map_err(|e| e.to_string())?, fs::read(p(b)).map_err(|e| e.to_string())?);
        ensure(x == y, || format!("{a} and {b} differ"))
    };
    same("c1.json", "c2.json")?;
    same("c0.json", "c1.json")?;
    same("t1.json", "t2.json")?;
    same("e1.json", "e2.json")?;
    same("r1.json", "r2.json")?;
    ensure(first_emb == fs::read(p("e.emb")).map_err(|e| e.to_string())?, || "embeddings differ".into())?;
    Ok("caption, training, embedding, and retrieval reports byte-identical".into())
}

fn round_trip_matrix(m: &EmbeddingMatrix, dir: &Path, name: &str) -> Result<(), String> {
    let path = dir.join(name);
    write_embeddings(m, &path, default_ids_path(&path)).map_err(|e| e.to_string())?;
    let back = read_embeddings(&path, default_ids_path(&path)).map_err(|e| e.to_string())?;
    ensure(&back == m, || format!("{name} changed on round trip"))
}

fn format_round_trips() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let one = EmbeddingMatrix::from_rows(vec!["a".into()], &[vec![-0.25]]).map_err(|e| e.to_string())?;
    round_trip_matrix(&one, dir.path(), "one.emb")?;
    let size = fs::metadata(dir.path().join("one.emb")).map_err(|e| e.to_string())?.len();
    ensure(size == 20, || format!("1x1 file is {size} bytes"))?;
    let mut r = rng(5);
    let big = EmbeddingMatrix::from_rows(ids("v", 1000), &f32_rows(random_rows(&mut r, 1000, 64)))
        .map_err(|e| e.to_string())?;
    round_trip_matrix(&big, dir.path(), "big.emb")?;
    for seed in 0..20 {
        let mut r = rng(seed);
        let (n, d) = (r.gen_range(1..50), r.gen_range(1..40));
        let m = EmbeddingMatrix::from_rows(ids("r", n), &f32_rows(random_rows(&mut r, n, d)))
            .map_err(|e| e.to_string())?;
        round_trip_matrix(&m, dir.path(), &format!("r{seed}.emb"))?;
    }
    for name in ["two_entries.jsonl", "capst6_corpus.jsonl", "bad_entries.jsonl"] {
        let entries = load_corpus(fixture(name)).map_err(|e| e.to_string())?;
        let out = dir.path().join(name);
        write_corpus(&out, &entries).map_err(|e| e.to_string())?;
        let back = load_corpus(&out).map_err(|e| e.to_string())?;
        ensure(back == entries, || format!("{name} changed on round trip"))?;
    }
    Ok("1x1 (20 bytes), 1000x64, 20 random matrices, 3 corpus fixtures".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check, Option<Duration>); 12] = [
        ("rebias-published-rows", rebias_rows, Some(Duration::from_secs(1))),
        ("rebias-orientation", rebias_orientation, None),
        ("f1-published-cells", f1_cells, None),
        ("unified-score", unified_scores, None),
        ("retrieval-oracle", retrieval_oracle, Some(Duration::from_secs(5))),
        ("retrieval-scale", retrieval_scale, None),
        ("loss-closed-forms-and-oracle", loss_checks, None),
        ("gradient-check", gradient_check, Some(Duration::from_secs(30))),
        ("toy-adaptation", toy_adaptation, Some(Duration::from_secs(60))),
        ("capst-end-to-end", capst_end_to_end, None),
        ("determinism", determinism, None),
        ("format-round-trips", format_round_trips, None),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let mut result = check();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&result, budget) {
            if elapsed > limit {
                result = Err(format!("took {elapsed:.2?}, budget {limit:?}"));
            }
        }
        let ms = elapsed.as_secs_f64() * 1e3;
        match result {
            Ok(detail) => println!("PASS {name:<30} {ms:>9.1} ms  {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name:<30} {ms:>9.1} ms  {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
