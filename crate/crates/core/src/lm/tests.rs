use super::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TINY: &[&str] = &["the cat sat", "the dog sat", "a cat ran"];

/// Interpolated Kneser-Ney computed straight from the sentences, with no
/// count tables: every count is a fresh scan of the padded corpus.
struct KnOracle {
    order: usize,
    discount: f64,
    padded: Vec<Vec<String>>,
    vocab: Vec<String>,
}

impl KnOracle {
    fn new(sentences: &[&str], order: usize, discount: f64) -> Self {
        let mut padded = Vec::new();
        let mut words = BTreeSet::new();
        for s in sentences {
            let mut p = vec![BOS.to_string(); order - 1];
            for w in s.split_whitespace() {
                p.push(w.to_string());
                words.insert(w.to_string());
            }
            p.push(EOS.to_string());
            padded.push(p);
        }
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

    fn occurrences(&self, gram: &[String]) -> usize {
        let mut n = 0;
        for p in &self.padded {
            for end in (self.order - 1)..p.len() {
                if end + 1 >= gram.len() && p[end + 1 - gram.len()..=end] == *gram {
                    n += 1;
                }
            }
        }
        n
    }

    fn left_extensions(&self, gram: &[String]) -> usize {
        let mut seen = BTreeSet::new();
        for p in &self.padded {
            for end in (self.order - 1)..p.len() {
                if end >= gram.len() && p[end + 1 - gram.len()..=end] == *gram {
                    seen.insert(p[end - gram.len()].clone());
                }
            }
        }
        seen.len()
    }

    fn count(&self, gram: &[String]) -> f64 {
        if gram.len() == self.order {
            self.occurrences(gram) as f64
        } else {
            self.left_extensions(gram) as f64
        }
    }

    fn prob(&self, ctx: &[String], w: &str) -> f64 {
        let m = ctx.len() + 1;
        let lower = if m == 1 {
            1.0 / self.vocab.len() as f64
        } else {
            self.prob(&ctx[1..], w)
        };
        let mut denom = 0.0;
        let mut types = 0.0;
        for u in &self.vocab {
            let mut g = ctx.to_vec();
            g.push(u.clone());
            let c = self.count(&g);
            denom += c;
            if c > 0.0 {
                types += 1.0;
            }
        }
        if denom == 0.0 {
            return lower;
        }
        let mut g = ctx.to_vec();
        g.push(w.to_string());
        let c = self.count(&g);
        (c - self.discount).max(0.0) / denom + self.discount * types / denom * lower
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn add_one_unigram_worked_example() {
    let m = NGramModel::train_texts(&["a a b"], 1, Smoothing::AddK { k: 1.0 }).unwrap();
    assert_eq!(m.predict_size(), 3);
    assert!((m.prob(&[], "a") - 0.5).abs() < 1e-12);
    assert!((m.prob(&[], "b") - 2.0 / 6.0).abs() < 1e-12);
    assert!((m.prob(&[], "zzz") - 1.0 / 6.0).abs() < 1e-12);
    assert!((m.perplexity("a a").unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn near_uniform_model_has_perplexity_v() {
    let v = 20;
    let text: String = (0..v).map(|i| format!("w{i} ")).collect();
    let m = NGramModel::train_texts(&[&text], 1, Smoothing::AddK { k: 1e-12 }).unwrap();
    let ppl = m.perplexity("w3 w7 w11").unwrap();
    assert!((ppl - v as f64).abs() < 1e-6, "{ppl}");
}

#[test]
fn kneser_ney_matches_oracle() {
    for order in 1..=3 {
        let m = NGramModel::train_texts(TINY, order, Smoothing::KneserNey { discount: 0.75 }).unwrap();
        if order == 1 {
            // unigram KN discounts raw counts; checked separately below
            continue;
        }
        let oracle = KnOracle::new(TINY, order, 0.75);
        let mut ctx_words = oracle.vocab.clone();
        ctx_words.push(BOS.into());
        ctx_words.retain(|w| w != EOS);
        let contexts: Vec<Vec<String>> = if order == 2 {
            ctx_words.iter().map(|a| vec![a.clone()]).collect()
        } else {
            ctx_words
                .iter()
                .flat_map(|a| ctx_words.iter().map(move |b| vec![a.clone(), b.clone()]))
                .collect()
        };
        for ctx in &contexts {
            for w in &oracle.vocab {
                let refs: Vec<&str> = ctx.iter().map(String::as_str).collect();
                let got = m.prob(&refs, w);
                let want = oracle.prob(ctx, w);
                assert!(
                    (got - want).abs() < 1e-9,
                    "order {order} P({w}|{ctx:?}) = {got}, oracle {want}"
                );
            }
        }
    }
}

#[test]
fn kneser_ney_unigram_by_hand() {
    // counts: a=2, b=1; D = 0.5; V = {a, b, <unk>}
    let m = NGramModel::train_texts(&["a a b"], 1, Smoothing::KneserNey { discount: 0.5 }).unwrap();
    let gamma = 0.5 * 2.0 / 3.0;
    assert!((m.prob(&[], "a") - (1.5 / 3.0 + gamma / 3.0)).abs() < 1e-12);
    assert!((m.prob(&[], "b") - (0.5 / 3.0 + gamma / 3.0)).abs() < 1e-12);
    assert!((m.prob(&[], "q") - gamma / 3.0).abs() < 1e-12);
}

#[test]
fn unseen_ngram_equals_backoff_times_lower_order() {
    let m = NGramModel::train_texts(TINY, 3, Smoothing::KneserNey { discount: 0.75 }).unwrap();
    let oracle = KnOracle::new(TINY, 3, 0.75);
    let v = &m.vocab;
    let ctx = [v.id("the"), v.id("cat")];
    let dog = v.id("dog");
    assert!(!m.has_entry(&[ctx[0], ctx[1], dog]));
    let lhs = m.prob_ids(&ctx, dog);
    let rhs = m.backoff(&ctx) * m.prob_ids(&ctx[1..], dog);
    assert!((lhs - rhs).abs() < 1e-15);
    // the backoff weight itself: D · N1+(the cat •) / c(the cat) = 0.75 · 1 / 1
    assert!((m.backoff(&ctx) - 0.75).abs() < 1e-12);
    let want = oracle.prob(&strings(&["the", "cat"]), "dog");
    assert!((lhs - want).abs() < 1e-9);
}

fn random_corpus(rng: &mut ChaCha8Rng, n_sent: usize, vocab: usize) -> Vec<String> {
    (0..n_sent)
        .map(|_| {
            let len = rng.gen_range(1..8);
            (0..len)
                .map(|_| format!("t{}", rng.gen_range(0..vocab)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

#[test]
fn distributions_normalize() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let corpus = random_corpus(&mut rng, 60, 12);
    let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
    for smoothing in [Smoothing::KneserNey { discount: 0.75 }, Smoothing::AddK { k: 0.5 }] {
        for order in 1..=4 {
            let m = NGramModel::train_texts(&refs, order, smoothing).unwrap();
            let ids: Vec<u32> = (0..m.vocab.len() as u32).filter(|&i| i != EOS_ID).collect();
            for _ in 0..100 {
                let ctx: Vec<u32> = (0..order - 1).map(|_| *ids.choose(&mut rng).unwrap()).collect();
                let total: f64 = m.predicted_ids().map(|w| m.prob_ids(&ctx, w)).sum();
                assert!((total - 1.0).abs() < 1e-9, "{smoothing:?} order {order}: {total}");
                assert!(m.predicted_ids().all(|w| {
                    let p = m.prob_ids(&ctx, w);
                    p > 0.0 && p <= 1.0
                }));
            }
        }
    }
}

#[test]
fn larger_k_moves_toward_uniform() {
    let corpus = ["a b a b a c", "a b c c", "b a"];
    let mut prev: Option<Vec<f64>> = None;
    for k in [0.01, 0.1, 0.5, 1.0, 2.0, 10.0] {
        let m = NGramModel::train_texts(&corpus, 2, Smoothing::AddK { k }).unwrap();
        let v = m.predict_size() as f64;
        let ps: Vec<f64> = m
            .predicted_ids()
            .map(|w| m.prob_ids(&[m.vocab.id("a")], w))
            .collect();
        if let Some(prev) = &prev {
            let max_now = ps.iter().cloned().fold(0.0, f64::max);
            let max_prev = prev.iter().cloned().fold(0.0, f64::max);
            assert!(max_now <= max_prev + 1e-15);
            for (a, b) in ps.iter().zip(prev) {
                assert!((a - 1.0 / v).abs() <= (b - 1.0 / v).abs() + 1e-15);
            }
        }
        prev = Some(ps);
    }
}

#[test]
fn training_text_beats_shuffled_text() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let subjects = ["the analyst", "an attacker", "the malware", "a server"];
    let verbs = ["scans", "patches", "exploits", "monitors"];
    let objects = ["the network", "a port", "the firewall", "an endpoint"];
    let corpus: Vec<String> = (0..200)
        .map(|_| {
            format!(
                "{} {} {}",
                subjects.choose(&mut rng).unwrap(),
                verbs.choose(&mut rng).unwrap(),
                objects.choose(&mut rng).unwrap()
            )
        })
        .collect();
    let text = corpus.join("\n");
    let m = NGramModel::train_texts(&[&text], 3, Smoothing::default()).unwrap();
    let base = m.perplexity(&text).unwrap();
    let tokens: Vec<&str> = text.split_whitespace().collect();
    for _ in 0..100 {
        let mut shuffled = tokens.clone();
        shuffled.shuffle(&mut rng);
        let lines: Vec<String> = shuffled.chunks(5).map(|c| c.join(" ")).collect();
        assert!(base <= m.perplexity(&lines.join("\n")).unwrap());
    }
}

#[test]
fn serialization_is_deterministic_and_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let corpus = random_corpus(&mut rng, 200, 30);
    let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
    for smoothing in [Smoothing::default(), Smoothing::AddK { k: 1.0 }] {
        let a = NGramModel::train_texts(&refs, 3, smoothing).unwrap();
        let b = NGramModel::train_texts(&refs, 3, smoothing).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let mut rev = refs.clone();
        rev.reverse();
        let c = NGramModel::train_texts(&rev, 3, smoothing).unwrap();
        assert_eq!(a.to_bytes(), c.to_bytes());
        let back = NGramModel::read_from(a.to_bytes().as_slice()).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.to_bytes(), a.to_bytes());
    }
    assert!(NGramModel::read_from(&b"nope"[..]).is_err());
    let bytes = NGramModel::train_texts(&refs, 2, Smoothing::default()).unwrap().to_bytes();
    assert!(NGramModel::read_from(&bytes[..bytes.len() - 3]).is_err());
}

#[test]
fn training_errors() {
    assert!(matches!(
        NGramModel::train_texts(&[" \n "], 3, Smoothing::default()),
        Err(Error::Empty(_))
    ));
    assert!(NGramModel::train_texts(&["a"], 0, Smoothing::default()).is_err());
    assert!(NGramModel::train_texts(&["a"], 2, Smoothing::KneserNey { discount: 1.0 }).is_err());
    assert!(NGramModel::train_texts(&["a"], 2, Smoothing::AddK { k: 0.0 }).is_err());
    let m = NGramModel::train_texts(&["a"], 2, Smoothing::default()).unwrap();
    assert!(m.perplexity("  ").is_err());
}

fn doc(source: &str, content: &str) -> Document {
    Document::new("u", source, content, "2024-12-31T00:00:00")
}

#[test]
fn perplexity_thresholds() {
    let corpus = ["the cat sat on the mat", "the dog sat on the mat"];
    let m = NGramModel::train_texts(&corpus, 2, Smoothing::default()).unwrap();
    let good = doc("wiki", "the cat sat on the mat");
    let bad = doc("wiki", "zebra quantum mat the on");
    let p_good = m.perplexity(&good.content).unwrap();
    let p_bad = m.perplexity(&bad.content).unwrap();
    assert!(p_good < p_bad);

    let mut th = PerplexityThresholds::default();
    th.per_source.insert("wiki".into(), (p_good + p_bad) / 2.0);
    let (kept, report) = lm_filter(vec![good.clone(), bad.clone()], &m, &th).unwrap();
    assert_eq!(kept, vec![good.clone()]);
    assert_eq!(report.docs_dropped_by_rule[rule::PERPLEXITY], 1);
    assert!(report.reconciles());

    let inf = PerplexityThresholds {
        default: Some(f64::INFINITY),
        ..Default::default()
    };
    let (kept, _) = lm_filter(vec![good.clone(), bad.clone()], &m, &inf).unwrap();
    assert_eq!(kept.len(), 2);

    let err = lm_filter(vec![doc("forum", "x")], &m, &th).unwrap_err();
    assert!(matches!(err, Error::MissingThreshold(ref s) if s == "forum"));
}

#[test]
fn threshold_comparisons() {
    let mut th = PerplexityThresholds::default();
    th.per_source.insert("s".into(), 200.0);
    assert_eq!(th.for_source("s").unwrap(), 200.0);
    assert!(150.0 <= th.for_source("s").unwrap());
    assert!(250.0 > th.for_source("s").unwrap());
    th.per_source.insert("z".into(), 0.0);
    assert!(th.validate().is_err());
}
