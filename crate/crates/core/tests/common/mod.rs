//! Independent reference implementations used as test oracles. These are
//! written for clarity, not speed, and share no code with the library.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use careval::adapt::{loss_gradient, NliTriplet, ToyEncoder, Vocab};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| loop {
            let r: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if r.iter().any(|x| *x != 0.0) {
                break r;
            }
        })
        .collect()
}

/// Rows rounded through `f32`, as stored on disk.
pub fn f32_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|r| r.into_iter().map(|x| x as f32 as f64).collect())
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    ab / (aa.sqrt() * bb.sqrt())
}

/// Percent of queries whose paired gallery item (same id) is among the
/// first `k` after a full stable sort by descending cosine. The stable
/// sort keeps equal scores in gallery order.
pub fn brute_force_recall(
    query_ids: &[String],
    queries: &[Vec<f64>],
    gallery_ids: &[String],
    gallery: &[Vec<f64>],
    ks: &[usize],
) -> BTreeMap<usize, f64> {
    let mut hits: BTreeMap<usize, usize> = ks.iter().map(|&k| (k, 0)).collect();
    for (qi, q) in queries.iter().enumerate() {
        let scores: Vec<f64> = gallery.iter().map(|g| cosine(q, g)).collect();
        let mut order: Vec<usize> = (0..gallery.len()).collect();
        order.sort_by(|&x, &y| scores[y].partial_cmp(&scores[x]).unwrap());
        let target = gallery_ids.iter().position(|id| *id == query_ids[qi]).unwrap();
        let position = order.iter().position(|&j| j == target).unwrap();
        for &k in ks {
            if position < k {
                *hits.get_mut(&k).unwrap() += 1;
            }
        }
    }
    hits.into_iter()
        .map(|(k, h)| (k, 100.0 * h as f64 / queries.len() as f64))
        .collect()
}

/// The contrastive loss written directly from its definition, without any
/// stabilization.
pub fn naive_info_nce(a: &[Vec<f64>], p: &[Vec<f64>], n: &[Vec<f64>], tau: f64) -> f64 {
    let count = a.len();
    let mut total = 0.0;
    for i in 0..count {
        let num = (cosine(&a[i], &p[i]) / tau).exp();
        let mut den = 0.0;
        for j in 0..count {
            den += (cosine(&a[i], &p[j]) / tau).exp();
            den += (cosine(&a[i], &n[j]) / tau).exp();
        }
        total += -(num / den).ln();
    }
    total / count as f64
}

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}


/// Hand-derived per-video scores for the six-video caption fixture:
/// (video, aspect, precision, recall). v6 has no event elements in its
/// ground truth and is skipped for that aspect.
pub const CAPST6_SCORES: [(&str, &str, f64, f64); 11] = [
    ("v1", "object", 1.0 / 3.0, 0.5),
    ("v1", "event", 0.5, 0.5),
    ("v2", "object", 0.0, 1.0),
    ("v2", "event", 2.0 / 3.0, 1.0),
    ("v3", "object", 0.5, 1.0),
    ("v3", "event", 1.0, 0.5),
    ("v4", "object", 1.0 / 3.0, 2.0 / 3.0),
    ("v4", "event", 0.0, 1.0 / 3.0),
    ("v5", "object", 0.0, 0.0),
    ("v5", "event", 0.0, 1.0),
    ("v6", "object", 0.5, 1.0),
];

/// Category means (f1, recall, precision) for action then object.
pub fn capst6_categories() -> Vec<(&'static str, Option<[f64; 3]>, Option<[f64; 3]>)> {
    vec![
        ("Household Activities", None, Some([2.0 / 3.0, 1.0, 0.5])),
        ("Personal Care", Some([0.65, 0.75, 7.0 / 12.0]), Some([0.2, 0.75, 1.0 / 6.0])),
        ("Socializing & Relaxing", Some([2.0 / 3.0, 0.5, 1.0]), Some([2.0 / 3.0, 1.0, 0.5])),
        ("Sports & Exercise", Some([0.0, 2.0 / 3.0, 0.0]), Some([2.0 / 9.0, 1.0 / 3.0, 1.0 / 6.0])),
    ]
}

/// Overall means (f1, recall, precision): action over five videos, object over six.
pub const CAPST6_OVERALL_ACTION: [f64; 3] = [59.0 / 150.0, 2.0 / 3.0, 13.0 / 30.0];
pub const CAPST6_OVERALL_OBJECT: [f64; 3] = [19.6 / 54.0, 25.0 / 36.0, 5.0 / 18.0];

pub const KNIFE_GT_TEMPORAL: &str =
    "The man picks up the knife. He cuts the melon. He washes the bowl. He dries the plate.";
pub const KNIFE_PREDICTION: &str =
    "The man picks up the knife and cuts the melon while singing loudly. The man cuts the knife. He paints the wall.";

/// Three triplets over exactly six tokens (seven vocabulary rows with the
/// unknown-token slot).
pub fn six_token_batch() -> Vec<NliTriplet> {
    vec![
        NliTriplet::new("red cat sits", "red cat runs", "blue dog sits"),
        NliTriplet::new("blue dog runs", "dog runs", "red cat"),
        NliTriplet::new("cat sits", "red sits", "blue runs dog"),
    ]
}

/// Loss recomputed from encoder outputs with the naive oracle.
pub fn oracle_loss(enc: &ToyEncoder, triplets: &[NliTriplet], tau: f64) -> f64 {
    let rows = |f: fn(&NliTriplet) -> &str| -> Vec<Vec<f64>> { triplets.iter().map(|t| enc.encode(f(t))).collect() };
    naive_info_nce(&rows(|t| &t.anchor), &rows(|t| &t.positive), &rows(|t| &t.negative), tau)
}

/// Largest relative gap between analytic gradients and central differences
/// (h = 1e-5) of the oracle loss, over every encoder parameter.
pub fn max_rel_gradient_error(seed: u64, tau: f64) -> f64 {
    let triplets = six_token_batch();
    let vocab = Vocab::build(triplets.iter().flat_map(|t| [&*t.anchor, &*t.positive, &*t.negative]));
    assert_eq!(vocab.len(), 7);
    let enc = ToyEncoder::random(vocab, 4, 0.5, &mut rng(seed));
    let (_, g) = loss_gradient(&enc, &triplets, tau).unwrap();
    let h = 1e-5;
    let n_table = enc.token_table.len();
    let mut worst = 0.0f64;
    for k in 0..n_table + enc.projection.len() {
        let bump = |delta: f64| {
            let mut e = enc.clone();
            if k < n_table {
                e.token_table[k] += delta;
            } else {
                e.projection[k - n_table] += delta;
            }
            oracle_loss(&e, &triplets, tau)
        };
        let numeric = (bump(h) - bump(-h)) / (2.0 * h);
        let analytic = if k < n_table { g.token_table[k] } else { g.projection[k - n_table] };
        let scale = numeric.abs().max(analytic.abs());
        if scale > 1e-8 {
            worst = worst.max((numeric - analytic).abs() / scale);
        } else {
            worst = worst.max((numeric - analytic).abs());
        }
    }
    worst
}
