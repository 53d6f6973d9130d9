//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints one PASS/FAIL line regardless of test output capture.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use corpusforge::classifier::{
    default_edges, select_threshold, train_classifier, BinReport, BinStat, FeatureConfig,
    LabeledDocument, LinearClassifier, TrainConfig,
};
use corpusforge::corpus::{read_records, write_jsonl, Document};
use corpusforge::dedup::{
    contaminated, dedup_documents, find_duplicates, ngram_overlap, DedupScope, LshConfig,
    MinHasher, MinHashSignature,
};
use corpusforge::eval::{
    aggregate_cyber, aggregate_weighted, ece, improvement_percent, security_benchmarks,
    BenchmarkScore, PredictionRecord,
};
use corpusforge::lm::{NGramModel, Smoothing, BOS, EOS, EOS_ID, UNK};
use corpusforge::merge::{
    dare, dare_ties, grid_search, ties_merge, MergeConfig, ParameterMap, TaskVector,
};
use corpusforge::pipeline::{run, PipelineConfig, PipelineDoc};

type Check = fn() -> String;

fn main() {
    let criteria: [(&str, Duration, Check); 9] = [
        ("aggregate arithmetic", Duration::from_secs(1), aggregate_arithmetic),
        ("minhash s-curve", Duration::from_secs(120), minhash_s_curve),
        ("dedup throughput", Duration::from_secs(180), dedup_throughput),
        ("n-gram lm", Duration::from_secs(60), ngram_lm),
        ("classifier", Duration::from_secs(5), classifier),
        ("decontamination", Duration::from_secs(60), decontamination),
        ("dare/ties", Duration::from_secs(60), dare_ties_suite),
        ("ece", Duration::from_secs(10), ece_suite),
        ("pipeline determinism", Duration::from_secs(300), pipeline_determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let line = match outcome {
            Ok(detail) if elapsed <= *budget => format!("PASS  {detail}"),
            Ok(detail) => format!("FAIL  over time budget of {budget:?}; {detail}"),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                format!("FAIL  {msg}")
            }
        };
        if line.starts_with("FAIL") {
            failed += 1;
        }
        println!("criterion {} ({name}): {line} [{:.2}s]", i + 1, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// 1. Aggregate arithmetic

const LLAMA: [f64; 7] = [0.7073, 0.6420, 0.5910, 1.2712, 0.2721, 0.8560, 0.4966];
const SEED_FINEWEB: [f64; 7] = [0.7230, 0.6676, 0.6780, 1.0912, 0.3140, 0.8660, 0.5007];
const MERGED: [f64; 7] = [0.7191, 0.6656, 0.6620, 1.1233, 0.3387, 0.8660, 0.5062];

fn row(values: [f64; 7]) -> Vec<BenchmarkScore> {
    security_benchmarks()
        .into_iter()
        .zip(values)
        .map(|(s, value)| BenchmarkScore {
            name: s.name,
            value,
            metric: s.metric,
        })
        .collect()
}

fn aggregate_arithmetic() -> String {
    let specs = security_benchmarks();
    let llama = aggregate_cyber(&row(LLAMA), &specs).unwrap();
    assert!((llama - 2.2938).abs() < 1e-9, "llama aggregate {llama}");
    assert_eq!(format!("{llama:.2}"), "2.29");
    let best = aggregate_cyber(&row(SEED_FINEWEB), &specs).unwrap();
    let gain = improvement_percent(llama, best);
    assert!((gain - 15.9).abs() <= 0.1, "improvement {gain}");
    let merged = aggregate_cyber(&row(MERGED), &specs).unwrap();
    let base = aggregate_weighted(8.3491, llama, 0.3, 0.7).unwrap();
    let ours = aggregate_weighted(8.2938, merged, 0.3, 0.7).unwrap();
    assert!((base - 4.11).abs() <= 0.005, "weighted base {base}");
    assert!((ours - 4.33).abs() <= 0.005, "weighted merged {ours}");
    format!("llama {llama:.4}, gain {gain:.2}%, weighted {base:.4} / {ours:.4}")
}

// 2. MinHash S-curve

/// Two shingle sets with Jaccard exactly `shared / (shared + 2 * own)`,
/// drawn from a namespace private to `pair`.
fn jaccard_pair(pair: usize, shared: usize, own: usize) -> (Vec<String>, Vec<String>) {
    let common = (0..shared).map(|k| format!("p{pair}c{k}"));
    let a = common
        .clone()
        .chain((0..own).map(|k| format!("p{pair}a{k}")))
        .collect();
    let b = common.chain((0..own).map(|k| format!("p{pair}b{k}"))).collect();
    (a, b)
}

fn detection_rate(cfg: &LshConfig, pairs: usize, shared: usize, own: usize) -> f64 {
    let hasher = MinHasher::new(cfg);
    let mut sigs: Vec<MinHashSignature> = Vec::with_capacity(2 * pairs);
    for p in 0..pairs {
        let (a, b) = jaccard_pair(p, shared, own);
        sigs.push(hasher.sign(2 * p as u64, a.iter().map(String::as_str)).unwrap());
        sigs.push(hasher.sign(2 * p as u64 + 1, b.iter().map(String::as_str)).unwrap());
    }
    let mut clusters = find_duplicates(&sigs, cfg).unwrap();
    for group in clusters.clusters() {
        let pair = group[0] / 2;
        assert!(group.iter().all(|id| id / 2 == pair), "pairs leaked into each other");
    }
    let hits = (0..pairs as u64)
        .filter(|&p| clusters.same_cluster(2 * p, 2 * p + 1))
        .count();
    hits as f64 / pairs as f64
}

fn minhash_s_curve() -> String {
    let cfg = LshConfig {
        seed: 2024,
        ..LshConfig::default()
    };
    assert_eq!((cfg.num_hashes, cfg.num_bands, cfg.rows_per_band), (112, 14, 8));
    let at = |j: f64| 1.0 - (1.0 - j.powi(8)).powi(14);
    // 150 / (150 + 2·25) = 0.75 and 180 / (180 + 2·10) = 0.9
    let p75 = detection_rate(&cfg, 10_000, 150, 25);
    let p90 = detection_rate(&cfg, 10_000, 180, 10);
    let exact = detection_rate(&cfg, 1_000, 200, 0);
    assert!((at(0.75) - 0.772).abs() < 5e-4);
    assert!((p75 - 0.772).abs() <= 0.02, "J=0.75 detection {p75}");
    assert!((p90 - at(0.9)).abs() <= 0.005, "J=0.9 detection {p90}");
    assert_eq!(exact, 1.0, "exact duplicates missed");
    format!("J=0.75 {p75:.4} (theory {:.4}), J=0.9 {p90:.4} (theory {:.4}), exact {exact}", at(0.75), at(0.9))
}

// 3. Dedup throughput

fn synthetic_doc(rng: &mut ChaCha8Rng, vocab: usize, words: usize) -> String {
    let mut s = String::with_capacity(words * 7);
    for i in 0..words {
        if i > 0 {
            s.push(' ');
        }
        s.push('w');
        s.push_str(&rng.gen_range(0..vocab).to_string());
    }
    s
}

fn dedup_throughput() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let mut docs: Vec<Document> = Vec::with_capacity(n);
    let mut planted = 0;
    for i in 0..n {
        let content = if i >= 1000 && i % 50 == 0 {
            planted += 1;
            let j = rng.gen_range(0..i);
            docs[j].content.clone()
        } else {
            let words = rng.gen_range(250..=350);
            synthetic_doc(&mut rng, 50_000, words)
        };
        docs.push(Document::new(format!("doc{i}"), "web", content, "2024-12-31T00:00:00"));
    }
    let avg_words = docs.iter().map(|d| d.content.split(' ').count()).sum::<usize>() as f64 / n as f64;
    let cfg = LshConfig {
        seed: 11,
        ..LshConfig::default()
    };
    let start = Instant::now();
    let (kept, report) = dedup_documents(docs, &cfg, DedupScope::Global).unwrap();
    let first = start.elapsed();
    assert!(report.removed >= planted, "removed {} of {planted} planted copies", report.removed);
    assert_eq!(report.removed, n - kept.len());
    let (again, report2) = dedup_documents(kept.clone(), &cfg, DedupScope::Global).unwrap();
    assert_eq!(report2.removed, 0, "second pass removed documents");
    assert_eq!(again, kept);
    format!(
        "{n} docs (avg {avg_words:.0} words), removed {} ({planted} planted) in {:.1}s; rerun removed 0",
        report.removed,
        first.as_secs_f64()
    )
}

// 4. N-gram LM

/// Interpolated Kneser-Ney straight from the definition: every count is a
/// fresh scan over the padded sentences.
struct KnOracle {
    order: usize,
    discount: f64,
    padded: Vec<Vec<String>>,
    vocab: Vec<String>,
}

impl KnOracle {
    fn new(sentences: &[&str], order: usize, discount: f64) -> Self {
        let mut words = BTreeSet::new();
        let padded = sentences
            .iter()
            .map(|s| {
                let mut p = vec![BOS.to_string(); order - 1];
                for w in s.split_whitespace() {
                    p.push(w.to_string());
                    words.insert(w.to_string());
                }
                p.push(EOS.to_string());
                p
            })
            .collect();
        let mut vocab: Vec<String> = words.into_iter().collect();
        vocab.push(UNK.into());
        vocab.push(EOS.into());
        KnOracle {
            order,
            discount,
            padded,
            vocab,
        }
    }

    /// Ends of every predicted position paired with each padded sentence.
    fn positions(&self) -> impl Iterator<Item = (&Vec<String>, usize)> {
        self.padded
            .iter()
            .flat_map(move |p| ((self.order - 1)..p.len()).map(move |end| (p, end)))
    }

    fn count(&self, gram: &[String]) -> f64 {
        let k = gram.len();
        if k == self.order {
            self.positions()
                .filter(|(p, end)| end + 1 >= k && p[end + 1 - k..=*end] == *gram)
                .count() as f64
        } else {
            let left: BTreeSet<&String> = self
                .positions()
                .filter(|(p, end)| *end >= k && p[end + 1 - k..=*end] == *gram)
                .map(|(p, end)| &p[end - k])
                .collect();
            left.len() as f64
        }
    }

    fn prob(&self, ctx: &[String], w: &str) -> f64 {
        let lower = if ctx.is_empty() {
            1.0 / self.vocab.len() as f64
        } else {
            self.prob(&ctx[1..], w)
        };
        let (mut denom, mut types) = (0.0, 0.0);
        for u in &self.vocab {
            let mut g = ctx.to_vec();
            g.push(u.clone());
            let c = self.count(&g);
            denom += c;
            types += f64::from(c > 0.0);
        }
        if denom == 0.0 {
            return lower;
        }
        let mut g = ctx.to_vec();
        g.push(w.to_string());
        (self.count(&g) - self.discount).max(0.0) / denom + self.discount * types / denom * lower
    }
}

fn ngram_lm() -> String {
    let m = NGramModel::train_texts(&["a a b"], 1, Smoothing::AddK { k: 1.0 }).unwrap();
    let pa = m.prob(&[], "a");
    let ppl = m.perplexity("a a").unwrap();
    assert!((pa - 0.5).abs() < 1e-12, "P(a) = {pa}");
    assert!((ppl - 2.0).abs() < 1e-12, "perplexity {ppl}");

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let corpus: Vec<String> = (0..80)
        .map(|_| {
            let len = rng.gen_range(1..9);
            (0..len)
                .map(|_| format!("t{}", rng.gen_range(0..15)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
    let mut worst: f64 = 0.0;
    for smoothing in [Smoothing::KneserNey { discount: 0.75 }, Smoothing::AddK { k: 0.5 }] {
        let m = NGramModel::train_texts(&refs, 3, smoothing).unwrap();
        let ids: Vec<u32> = (0..m.vocab().len() as u32).filter(|&i| i != EOS_ID).collect();
        for _ in 0..100 {
            let ctx: Vec<u32> = (0..2).map(|_| *ids.choose(&mut rng).unwrap()).collect();
            let total: f64 = m.predicted_ids().map(|w| m.prob_ids(&ctx, w)).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    assert!(worst <= 1e-9, "distribution off by {worst}");

    let small = ["the cat sat", "the dog sat", "a cat ran", "the cat ran home"];
    let mut kn_err: f64 = 0.0;
    let mut checked = 0;
    for order in 2..=3 {
        let m = NGramModel::train_texts(&small, order, Smoothing::KneserNey { discount: 0.75 }).unwrap();
        let oracle = KnOracle::new(&small, order, 0.75);
        let mut ctx_words: Vec<String> = oracle.vocab.iter().filter(|w| *w != EOS).cloned().collect();
        ctx_words.push(BOS.into());
        let contexts: Vec<Vec<String>> = if order == 2 {
            ctx_words.iter().map(|a| vec![a.clone()]).collect()
        } else {
            ctx_words
                .iter()
                .flat_map(|a| ctx_words.iter().map(move |b| vec![a.clone(), b.clone()]))
                .collect()
        };
        for ctx in &contexts {
            let refs: Vec<&str> = ctx.iter().map(String::as_str).collect();
            for w in &oracle.vocab {
                kn_err = kn_err.max((m.prob(&refs, w) - oracle.prob(ctx, w)).abs());
                checked += 1;
            }
        }
    }
    assert!(kn_err <= 1e-9, "Kneser-Ney differs from oracle by {kn_err}");
    format!("add-1 exact, max normalization error {worst:.1e}, KN max error {kn_err:.1e} over {checked} probabilities")
}

// 5. Classifier

fn labeled(content: &str, label: bool) -> LabeledDocument {
    LabeledDocument {
        doc: Document::new("u", "s", content, "2024-12-31T00:00:00"),
        label,
    }
}

fn classifier() -> String {
    let mut data = Vec::new();
    for i in 0..50 {
        data.push(labeled(&format!("{}exploit", "payload ".repeat(i % 4)), true));
        data.push(labeled(&format!("{}recipe", "garden ".repeat(i % 4)), false));
    }
    assert_eq!(data.len(), 100);
    let cfg = TrainConfig {
        seed: 5,
        features: FeatureConfig {
            feature_dim: 1 << 18,
            ..FeatureConfig::default()
        },
        ..TrainConfig::default()
    };
    let (a, summary) = train_classifier(&data, &cfg).unwrap();
    assert!(summary.accuracy >= 0.99, "training accuracy {}", summary.accuracy);
    let (b, _) = train_classifier(&data, &cfg).unwrap();
    let bits = |m: &LinearClassifier| -> Vec<u32> {
        m.weights.iter().map(|w| w.to_bits()).chain([m.bias.to_bits()]).collect()
    };
    assert!(bits(&a) == bits(&b), "two runs with one seed differ");

    let edges = default_edges();
    let bins = edges
        .windows(2)
        .map(|w| {
            let relevant = if w[1] >= 0.003 { 31 } else { 18 };
            BinStat {
                low: w[1],
                high: w[0],
                population: 1000,
                sampled: 50,
                relevant,
                ratio: Some(relevant as f64 / 50.0),
            }
        })
        .collect();
    let report = BinReport {
        bins,
        threshold_selected: None,
    };
    let t = select_threshold(&report, 0.5).unwrap();
    assert_eq!(t, 0.003);
    format!("toy accuracy {:.3}, bitwise reproducible, threshold {t}", summary.accuracy)
}

// 6. Decontamination

fn decontamination() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 10_000;
    let body = |rng: &mut ChaCha8Rng, prefix: char| -> Vec<String> {
        (0..rng.gen_range(80..120))
            .map(|_| format!("{prefix}{}", rng.gen_range(0..30_000)))
            .collect()
    };
    let mut a: Vec<Vec<String>> = (0..n).map(|_| body(&mut rng, 'a')).collect();
    let mut b: Vec<Vec<String>> = (0..n).map(|_| body(&mut rng, 'b')).collect();
    let mut planted = BTreeSet::new();
    // one plant per document so no plant is split by another
    let a_hosts = rand::seq::index::sample(&mut rng, n, 300).into_vec();
    let b_hosts = rand::seq::index::sample(&mut rng, n, 300).into_vec();
    for (k, (&ai, &bi)) in a_hosts.iter().zip(&b_hosts).enumerate() {
        let gram: Vec<String> = (0..13).map(|j| format!("plant{k}x{j}")).collect();
        let at = rng.gen_range(0..a[ai].len());
        let bt = rng.gen_range(0..b[bi].len());
        a[ai].splice(at..at, gram.iter().cloned());
        b[bi].splice(bt..bt, gram.iter().cloned());
        planted.insert(ai);
    }
    // 12-word overlaps must not count
    let mut near_miss = BTreeSet::new();
    for k in 0..300 {
        let gram: Vec<String> = (0..12).map(|j| format!("near{k}x{j}")).collect();
        let ai = rng.gen_range(0..n);
        a[ai].extend(gram.iter().cloned());
        b[rng.gen_range(0..n)].extend(gram);
        near_miss.insert(ai);
    }
    let a: Vec<String> = a.iter().map(|d| d.join(" ")).collect();
    let b: Vec<String> = b.iter().map(|d| d.join(" ")).collect();
    let found: BTreeSet<usize> = contaminated(&a, &b, 13).into_iter().collect();
    let report = ngram_overlap(&a, &b, 13);
    let missed = planted.difference(&found).count();
    let false_pos = found.difference(&planted).count();
    assert_eq!(missed, 0, "{missed} planted documents missed");
    assert_eq!(false_pos, 0, "{false_pos} false positives");
    assert!(report.matches.iter().all(|m| m.ngram.starts_with("plant")));
    format!(
        "{} contaminated docs found, 0 missed, 0 false positives ({} near-miss docs ignored)",
        found.len(),
        near_miss.difference(&planted).count()
    )
}

// 7. DARE / TIES

fn single(name: &str, xs: &[f32]) -> ParameterMap {
    let mut p = ParameterMap::default();
    p.entries.insert(name.into(), xs.to_vec());
    p
}

fn dare_ties_suite() -> String {
    let ones = TaskVector {
        entries: [("w".to_string(), vec![1.0; 8])].into(),
    };
    let mut sums = [0.0f64; 8];
    for seed in 0..10_000 {
        let d = dare(&ones, 0.5, seed).unwrap();
        for (s, x) in sums.iter_mut().zip(&d.entries["w"]) {
            *s += x;
        }
    }
    let bias = sums.iter().map(|s| (s / 10_000.0 - 1.0).abs()).fold(0.0, f64::max);
    assert!(bias < 0.01, "dare mean off by {bias}");

    let v1 = TaskVector {
        entries: [("w".to_string(), vec![2.0, -2.0, 1.0])].into(),
    };
    let v2 = TaskVector {
        entries: [("w".to_string(), vec![1.0, -1.0, -3.0])].into(),
    };
    let merged = ties_merge(&[(&v1, 1.0), (&v2, 1.0)], 1.0).unwrap();
    assert_eq!(merged.entries["w"], vec![1.5, -1.5, -3.0]);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut base = ParameterMap::default();
    let mut model = ParameterMap::default();
    for (name, len) in [("embed", 4096), ("head", 257)] {
        base.entries.insert(name.into(), (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect());
        model.entries.insert(name.into(), (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    let identity = MergeConfig {
        drop_prob: 0.0,
        density: 1.0,
        seed: 1,
    };
    let out = dare_ties(&base, &[(&model, 1.0)], &identity).unwrap();
    for (name, xs) in &model.entries {
        let same = xs.iter().zip(&out.entries[name]).all(|(x, y)| x.to_bits() == y.to_bits());
        assert!(same, "identity chain changed {name}");
    }

    let (zero, a, b) = (single("w", &[0.0]), single("w", &[2.0]), single("w", &[1.0]));
    let mut evaluations = 0;
    let grid = grid_search(
        &zero,
        &a,
        &b,
        |m| {
            evaluations += 1;
            let x = f64::from(m.entries["w"][0]);
            Ok(-(x - 1.75).powi(2))
        },
        0.05,
        &identity,
    )
    .unwrap();
    assert_eq!(evaluations, 11);
    assert_eq!(grid.table.len(), 11);
    assert!((grid.best.w - 0.25).abs() < 1e-12, "best w {}", grid.best.w);
    assert_eq!((grid.best.weight_a, grid.best.weight_b), (0.75, 0.25));
    format!("dare bias {bias:.4}, TIES exact, identity bitwise, grid best 0.75:0.25 after 11 points")
}

// 8. ECE

fn record(i: usize, confidence: f64, correct: bool) -> PredictionRecord {
    PredictionRecord {
        id: i.to_string(),
        predicted: corpusforge::eval::Answer::Text("x".into()),
        gold: corpusforge::eval::Answer::Text("x".into()),
        confidence: Some(confidence),
        correct: Some(correct),
    }
}

fn ece_suite() -> String {
    let hand = [(0.9, true), (0.8, true), (0.7, false), (0.6, true)];
    let recs: Vec<_> = hand.iter().enumerate().map(|(i, &(c, k))| record(i, c, k)).collect();
    let e = ece(&recs, 10).unwrap().ece;
    assert!((e - 0.35).abs() < 1e-12, "hand example {e}");

    // Per bin, the number of correct records is the rounded confidence sum,
    // so accuracy matches mean confidence up to rounding.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut stream = Vec::with_capacity(10_000);
    for bin in 0..10 {
        let confs: Vec<f64> = (0..1000)
            .map(|_| (bin as f64 + rng.gen_range(0.01..0.99)) / 10.0)
            .collect();
        let n_correct = confs.iter().sum::<f64>().round() as usize;
        let mut flags: Vec<bool> = (0..1000).map(|i| i < n_correct).collect();
        flags.shuffle(&mut rng);
        for (c, k) in confs.into_iter().zip(flags) {
            stream.push(record(stream.len(), c, k));
        }
    }
    stream.shuffle(&mut rng);
    let e2 = ece(&stream, 10).unwrap().ece;
    assert!(e2 <= 0.01, "calibrated stream ECE {e2}");
    format!("hand example {e:.2}, calibrated stream of {} records {e2:.5}", stream.len())
}

// 9. Pipeline determinism

fn pipeline_determinism() -> String {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 10_000;
    let mut docs: Vec<Document> = Vec::with_capacity(n);
    for i in 0..n {
        let source = ["web", "wiki", "forum"][i % 3];
        let content = match i % 10 {
            0 if i > 0 => docs[rng.gen_range(0..i)].content.clone(),
            1 => format!("Lorem ipsum dolor sit amet {}", synthetic_doc(&mut rng, 5000, 80)),
            2 => format!(
                "{}\nPlease read our cookie policy\nEnable JavaScript to continue",
                synthetic_doc(&mut rng, 5000, 80)
            ),
            3 => format!("Your download will begin in a few seconds. {}", synthetic_doc(&mut rng, 5000, 80)),
            4 => synthetic_doc(&mut rng, 5000, 20),
            5 | 6 => format!("security exploit malware {}", synthetic_doc(&mut rng, 5000, 90)),
            _ => synthetic_doc(&mut rng, 5000, 90),
        };
        docs.push(Document::new(format!("d{i}"), source, content, "2024-12-31T00:00:00"));
    }
    write_jsonl(&docs, dir.path().join("in.jsonl")).unwrap();

    let lm = NGramModel::train(&docs[..500], 2, Smoothing::default()).unwrap();
    lm.save(dir.path().join("lm.bin")).unwrap();
    let train: Vec<LabeledDocument> = docs[..2000]
        .iter()
        .map(|d| LabeledDocument {
            label: d.content.starts_with("security"),
            doc: d.clone(),
        })
        .collect();
    let (clf, _) = train_classifier(&train, &TrainConfig::default()).unwrap();
    clf.save(dir.path().join("clf.bin")).unwrap();

    let config = |tag: &str| {
        format!(
            r#"version = 1
seed = 99

[io]
input = "in.jsonl"
output = "out_{tag}.jsonl"
report = "report_{tag}.json"

[[stages]]
name = "c4"
kind = "c4_filter"

[[stages]]
name = "phrases"
kind = "heuristic_filter"

[[stages]]
name = "perplexity"
kind = "lm_filter"
params = {{ model = "lm.bin", thresholds = {{ default = 1e9 }} }}

[[stages]]
name = "minhash"
kind = "dedup"

[[stages]]
name = "relevance"
kind = "classify"
params = {{ model = "clf.bin" }}

[[stages]]
name = "window"
kind = "window_filter"
params = {{ score_window = [0.5, 1.0], min_doc_chars = 100 }}
"#
        )
    };
    let cfg_a = PipelineConfig::from_toml(&config("a"), dir.path()).unwrap();
    let cfg_b = PipelineConfig::from_toml(&config("b"), dir.path()).unwrap();
    let rep = run(&cfg_a).unwrap();
    run(&cfg_b).unwrap();
    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    assert!(read("out_a.jsonl") == read("out_b.jsonl"), "outputs differ");
    assert!(read("report_a.json") == read("report_b.json"), "reports differ");

    assert_eq!(rep.input.samples, n as u64);
    assert_eq!(rep.stages[0].docs_in, rep.input.samples);
    for w in rep.stages.windows(2) {
        assert_eq!(w[0].docs_out, w[1].docs_in, "{} -> {}", w[0].name, w[1].name);
        assert_eq!(w[0].tokens_out, w[1].tokens_in, "{} -> {}", w[0].name, w[1].name);
    }
    let last = rep.stages.last().unwrap();
    assert_eq!(last.docs_out, rep.output.samples);
    for s in &rep.stages {
        if let Some(f) = &s.filter {
            assert!(f.reconciles(), "{} report does not reconcile", s.name);
            assert_eq!(f.docs_in as u64, s.docs_in);
            assert_eq!(f.docs_out as u64, s.docs_out);
        }
        if let Some(d) = &s.dedup {
            assert_eq!(d.removed as u64, s.docs_in - s.docs_out);
        }
    }
    let out: Vec<PipelineDoc> = read_records(dir.path().join("out_a.jsonl")).unwrap().records;
    assert_eq!(out.len() as u64, rep.output.samples);
    assert!(out.iter().all(|d| !d.doc.content.to_lowercase().contains("lorem ipsum")));
    assert!(rep.stages.iter().all(|s| s.docs_out < s.docs_in || s.kind.as_str() == "lm_filter" || s.kind.as_str() == "classify"));
    let counts: Vec<String> = rep.stages.iter().map(|s| s.docs_out.to_string()).collect();
    format!("{n} docs -> {} stage outputs, byte-identical reruns", counts.join(" -> "))
}
