use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Classifier, Example};
use crate::seed::RunSeed;
use crate::types::{MutabilityLabel, Pid, OBJECT_SLOT, SUBJECT_SLOT};

/// Assigns every relation a label uniformly at random.
pub fn control_labels(relations: &[Pid], seed: RunSeed) -> BTreeMap<Pid, MutabilityLabel> {
    let sorted: BTreeSet<&Pid> = relations.iter().collect();
    let mut rng = seed.rng("control");
    sorted
        .into_iter()
        .map(|p| (p.clone(), MutabilityLabel::from_index(rng.random_range(0..2))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAccuracy {
    /// Unweighted mean over relations.
    pub macro_accuracy: f64,
    pub per_relation: BTreeMap<Pid, f64>,
    /// Whether each example was classified correctly, in input order.
    #[serde(skip)]
    pub correct: Vec<bool>,
}

/// Accuracy per relation, then averaged with equal weight per relation.
pub fn evaluate_probe(model: &dyn Classifier, test: &[Example]) -> ProbeAccuracy {
    let mut tally: BTreeMap<Pid, (usize, usize)> = BTreeMap::new();
    let mut correct = Vec::with_capacity(test.len());
    for ex in test {
        let ok = super::linear::argmax(&model.predict_proba(&ex.x)) == ex.y;
        correct.push(ok);
        let t = tally.entry(ex.relation.clone()).or_default();
        t.0 += ok as usize;
        t.1 += 1;
    }
    let per_relation: BTreeMap<Pid, f64> = tally.into_iter().map(|(p, (c, n))| (p, c as f64 / n as f64)).collect();
    let macro_accuracy = if per_relation.is_empty() {
        tracing::warn!("no test relations to evaluate");
        0.0
    } else {
        per_relation.values().sum::<f64>() / per_relation.len() as f64
    };
    ProbeAccuracy {
        macro_accuracy,
        per_relation,
        correct,
    }
}

/// Lowercased whitespace tokens of a template with its slots removed.
pub fn template_tokens(template: &str) -> Vec<String> {
    template
        .replace(SUBJECT_SLOT, " ")
        .replace(OBJECT_SLOT, " ")
        .split_whitespace()
        .map(|t| t.to_lowercase())
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .collect()
}

/// Multinomial naive Bayes with add-one smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayes {
    log_prior: Vec<f64>,
    log_likelihood: Vec<HashMap<String, f64>>,
}

impl NaiveBayes {
    pub fn fit(docs: &[(Vec<String>, usize)], classes: usize) -> Self {
        let mut doc_counts = vec![0usize; classes];
        let mut counts: Vec<HashMap<&str, usize>> = vec![HashMap::new(); classes];
        let mut totals = vec![0usize; classes];
        let mut vocab: BTreeSet<&str> = BTreeSet::new();
        for (tokens, y) in docs {
            doc_counts[*y] += 1;
            for t in tokens {
                *counts[*y].entry(t.as_str()).or_default() += 1;
                totals[*y] += 1;
                vocab.insert(t.as_str());
            }
        }
        let n = docs.len().max(1) as f64;
        let v = vocab.len() as f64;
        let log_prior = doc_counts
            .iter()
            .map(|&c| if c == 0 { f64::NEG_INFINITY } else { (c as f64 / n).ln() })
            .collect();
        let log_likelihood = (0..classes)
            .map(|c| {
                vocab
                    .iter()
                    .map(|w| {
                        let k = counts[c].get(w).copied().unwrap_or(0) as f64;
                        (w.to_string(), ((k + 1.0) / (totals[c] as f64 + v)).ln())
                    })
                    .collect()
            })
            .collect();
        NaiveBayes {
            log_prior,
            log_likelihood,
        }
    }

    /// Most probable class; out-of-vocabulary tokens are ignored and ties
    /// go to the lower class index.
    pub fn predict(&self, tokens: &[String]) -> usize {
        let scores: Vec<f64> = self
            .log_prior
            .iter()
            .zip(&self.log_likelihood)
            .map(|(prior, ll)| prior + tokens.iter().filter_map(|t| ll.get(t)).sum::<f64>())
            .collect();
        super::linear::argmax(&scores)
    }
}

/// Micro accuracy of naive Bayes trained on `train` and scored on `test`.
pub fn template_baseline(train: &[(Vec<String>, usize)], test: &[(Vec<String>, usize)], classes: usize) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let nb = NaiveBayes::fit(train, classes);
    let hits = test.iter().filter(|(t, y)| nb.predict(t) == *y).count();
    hits as f64 / test.len() as f64
}

/// Decile-style bin per value: `floor(bins * r / n)` where `r` is the
/// position of the value's first occurrence in sorted order, so equal
/// values share a bin.
pub fn frequency_bins(freqs: &[u64], bins: usize) -> Vec<usize> {
    let n = freqs.len();
    let mut sorted = freqs.to_vec();
    sorted.sort_unstable();
    freqs
        .iter()
        .map(|f| {
            let r = sorted.partition_point(|x| x < f);
            (bins * r / n).min(bins - 1)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    /// 1-based, lowest frequencies first.
    pub bin: usize,
    pub min_frequency: Option<u64>,
    pub max_frequency: Option<u64>,
    pub count: usize,
    pub accuracy: Option<f64>,
    pub immutable: usize,
    pub mutable: usize,
}

/// Accuracy and class counts per frequency bin.
pub fn frequency_bin_accuracy(correct: &[bool], freqs: &[u64], labels: &[usize], bins: usize) -> Vec<BinStat> {
    let assignment = frequency_bins(freqs, bins);
    let mut out: Vec<BinStat> = (0..bins)
        .map(|b| BinStat {
            bin: b + 1,
            min_frequency: None,
            max_frequency: None,
            count: 0,
            accuracy: None,
            immutable: 0,
            mutable: 0,
        })
        .collect();
    let mut hits = vec![0usize; bins];
    for (i, &b) in assignment.iter().enumerate() {
        let s = &mut out[b];
        s.count += 1;
        hits[b] += correct[i] as usize;
        s.min_frequency = Some(s.min_frequency.map_or(freqs[i], |m| m.min(freqs[i])));
        s.max_frequency = Some(s.max_frequency.map_or(freqs[i], |m| m.max(freqs[i])));
        if labels[i] == MutabilityLabel::Mutable.index() {
            s.mutable += 1;
        } else {
            s.immutable += 1;
        }
    }
    for (s, h) in out.iter_mut().zip(hits) {
        if s.count > 0 {
            s.accuracy = Some(h as f64 / s.count as f64);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        template_tokens(s)
    }

    #[test]
    fn control_is_relation_level_and_seeded() {
        let rels: Vec<Pid> = (1..=6).map(|i| Pid::new(format!("P{i}"))).collect();
        let a = control_labels(&rels, RunSeed(5));
        assert_eq!(a, control_labels(&rels, RunSeed(5)));
        assert_eq!(a.len(), 6);
        let mut reversed = rels.clone();
        reversed.reverse();
        assert_eq!(a, control_labels(&reversed, RunSeed(5)));
    }

    #[test]
    fn control_balance_over_seeds() {
        let rels: Vec<Pid> = (1..=6).map(|i| Pid::new(format!("P{i}"))).collect();
        let mut mutable = 0;
        for s in 0..1000 {
            mutable += control_labels(&rels, RunSeed(s))
                .values()
                .filter(|l| **l == MutabilityLabel::Mutable)
                .count();
        }
        let frac = mutable as f64 / 6000.0;
        assert!((frac - 0.5).abs() < 0.05, "{frac}");
    }

    #[test]
    fn tokens_drop_slots_and_punctuation() {
        assert_eq!(toks("The capital of [X] is [Y]."), ["the", "capital", "of", "is"]);
    }

    #[test]
    fn identical_templates_give_majority_rate() {
        let t = toks("[X] is related to [Y].");
        let train: Vec<_> = (0..10).map(|i| (t.clone(), (i < 7) as usize)).collect();
        let test: Vec<_> = (0..20).map(|i| (t.clone(), (i < 5) as usize)).collect();
        // class 1 dominates training, so everything is predicted 1
        assert_eq!(template_baseline(&train, &test, 2), 5.0 / 20.0);
    }

    #[test]
    fn leaking_word_is_exploited() {
        let imm = |s: &str| (toks(&format!("{s} [X] permanently [Y].")), 0);
        let mutb = |s: &str| (toks(&format!("{s} [X] currently [Y].")), 1);
        let train = vec![imm("a"), imm("b"), mutb("c"), mutb("d")];
        let test = vec![imm("e"), imm("f"), mutb("g"), mutb("h"), mutb("a")];
        assert_eq!(template_baseline(&train, &test, 2), 1.0);
    }

    #[test]
    fn macro_accuracy_is_unweighted() {
        struct Always(usize);
        impl Classifier for Always {
            fn predict_proba(&self, _: &[f32]) -> Vec<f64> {
                let mut p = vec![0.0; 2];
                p[self.0] = 1.0;
                p
            }
        }
        let mk = |rel: &str, y| Example {
            x: vec![0.0],
            y,
            relation: Pid::new(rel),
            frequency: 0,
        };
        let mut test: Vec<Example> = (0..10).map(|_| mk("P1", 1)).collect();
        test.extend((0..1000).map(|_| mk("P2", 0)));
        let acc = evaluate_probe(&Always(1), &test);
        assert_eq!(acc.macro_accuracy, 0.5);
        assert_eq!(acc.per_relation[&Pid::new("P1")], 1.0);
        let perfect: Vec<Example> = (0..5).map(|_| mk("P1", 1)).collect();
        assert_eq!(evaluate_probe(&Always(1), &perfect).macro_accuracy, 1.0);
    }

    #[test]
    fn distinct_frequencies_fill_bins_evenly() {
        for n in [10usize, 95, 1000, 1234] {
            let freqs: Vec<u64> = (0..n as u64).rev().collect();
            let bins = frequency_bins(&freqs, 10);
            let mut sizes = [0usize; 10];
            for b in bins {
                sizes[b] += 1;
            }
            for s in sizes {
                assert!((s as f64 - n as f64 / 10.0).abs() <= 1.0, "{n}: {sizes:?}");
            }
        }
    }

    #[test]
    fn ties_share_a_bin() {
        let bins = frequency_bins(&[5, 5, 5, 5, 1, 9], 3);
        assert_eq!(bins[0], bins[3]);
        assert_eq!(bins[4], 0);
        assert_eq!(bins[5], 2);
    }

    #[test]
    fn bin_stats() {
        let stats = frequency_bin_accuracy(&[true, false, true, true], &[1, 2, 3, 4], &[0, 1, 1, 0], 2);
        assert_eq!(stats[0].count, 2);
        assert_eq!(stats[0].accuracy, Some(0.5));
        assert_eq!((stats[0].immutable, stats[0].mutable), (1, 1));
        assert_eq!(stats[1].accuracy, Some(1.0));
        assert_eq!(stats[1].min_frequency, Some(3));
        let sparse = frequency_bin_accuracy(&[true], &[1], &[0], 3);
        assert_eq!(sparse[1].accuracy, None);
    }
}
