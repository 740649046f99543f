//! Seeded generator of labeled corpora with planted topics and a planted lexicon.
//!
//! Every document is a mix of three word sources: a topic bank (chosen per
//! document from the class's topic mixture), a signed sentiment bank, and a
//! neutral filler bank. The default specification produces four classes, two
//! of which share both their topic and their sentiment marginals and differ
//! only in how topic and polarity co-occur.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Post;
use crate::error::{Error, Result};
use crate::indicators::Lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

/// One way a document of a class can be generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMode {
    pub weight: f64,
    /// Probability of each planted topic for this mode's documents.
    pub topic_mixture: Vec<f64>,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub label: String,
    pub modes: Vec<ClassMode>,
    /// Share of tokens drawn from the sentiment bank.
    pub sentiment_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: Vec<ClassSpec>,
    pub num_topics: usize,
    pub topic_bank_size: usize,
    /// Within-bank word weights ∝ 1/rank^s; 0 gives uniform banks.
    pub zipf_exponent: f64,
    /// Words per polarity.
    pub sentiment_bank_size: usize,
    pub filler_bank_size: usize,
    /// Inclusive range of tokens per document.
    pub doc_len: (usize, usize),
    /// Share of tokens drawn from the document's topic.
    pub topic_rate: f64,
    /// Share of a document's sentiment words matching its polarity.
    pub polarity_purity: f64,
    pub train_per_class: usize,
    pub valid_per_class: usize,
    pub test_per_class: usize,
}

fn mixture(main: usize, m: usize, focus: f64) -> Vec<f64> {
    (0..m)
        .map(|k| if k == main { focus } else { (1.0 - focus) / (m - 1) as f64 })
        .collect()
}

impl SyntheticSpec {
    /// Four classes over three planted topics:
    /// topic-0 positive, topic-0 negative, and two classes over topics 1/2
    /// whose topic/polarity pairing is crossed.
    pub fn interaction() -> Self {
        let m = 3;
        let focus = 0.9;
        let mode = |t: usize, p: Polarity, w: f64| ClassMode {
            weight: w,
            topic_mixture: mixture(t, m, focus),
            polarity: p,
        };
        use Polarity::*;
        let class = |label: &str, modes: Vec<ClassMode>| ClassSpec {
            label: label.to_string(),
            modes,
            sentiment_rate: 0.2,
        };
        SyntheticSpec {
            classes: vec![
                class("topic0_pos", vec![mode(0, Positive, 1.0)]),
                class("topic0_neg", vec![mode(0, Negative, 1.0)]),
                class("crossed", vec![mode(1, Positive, 0.5), mode(2, Negative, 0.5)]),
                class("uncrossed", vec![mode(1, Negative, 0.5), mode(2, Positive, 0.5)]),
            ],
            num_topics: m,
            topic_bank_size: 250,
            zipf_exponent: 0.0,
            sentiment_bank_size: 1500,
            filler_bank_size: 60,
            doc_len: (24, 32),
            topic_rate: 0.4,
            polarity_purity: 0.9,
            train_per_class: 500,
            valid_per_class: 100,
            test_per_class: 200,
        }
    }

    /// Two topics on disjoint banks, one per class, no sentiment or filler words.
    pub fn disjoint_topics(docs_per_class: usize, bank_size: usize) -> Self {
        let class = |label: &str, t: usize| ClassSpec {
            label: label.to_string(),
            modes: vec![ClassMode {
                weight: 1.0,
                topic_mixture: mixture(t, 2, 1.0),
                polarity: Polarity::Positive,
            }],
            sentiment_rate: 0.0,
        };
        SyntheticSpec {
            classes: vec![class("bank0", 0), class("bank1", 1)],
            num_topics: 2,
            topic_bank_size: bank_size,
            zipf_exponent: 1.0,
            sentiment_bank_size: 0,
            filler_bank_size: 0,
            doc_len: (20, 30),
            topic_rate: 1.0,
            polarity_purity: 1.0,
            train_per_class: docs_per_class,
            valid_per_class: 0,
            test_per_class: 0,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.label.clone()).collect()
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.classes.is_empty() {
            return bad("no classes".into());
        }
        if self.doc_len.0 == 0 || self.doc_len.0 > self.doc_len.1 {
            return bad(format!("bad document length range {:?}", self.doc_len));
        }
        for (name, r) in [
            ("topic_rate", self.topic_rate),
            ("polarity_purity", self.polarity_purity),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} outside [0, 1]"));
            }
        }
        for c in &self.classes {
            if c.modes.is_empty() || c.modes.iter().any(|m| !(m.weight > 0.0)) {
                return bad(format!("class `{}` needs modes with positive weight", c.label));
            }
            if !(0.0..=1.0).contains(&c.sentiment_rate) || c.sentiment_rate + self.topic_rate > 1.0 + 1e-12 {
                return bad(format!("class `{}` rates exceed 1", c.label));
            }
            if c.sentiment_rate > 0.0 && self.sentiment_bank_size == 0 {
                return bad("empty sentiment bank".into());
            }
            if c.sentiment_rate + self.topic_rate < 1.0 - 1e-12 && self.filler_bank_size == 0 {
                return bad("empty filler bank".into());
            }
            for m in &c.modes {
                if m.topic_mixture.len() != self.num_topics
                    || m.topic_mixture.iter().any(|&p| p < 0.0)
                    || !(m.topic_mixture.iter().sum::<f64>() > 0.0)
                {
                    return bad(format!("class `{}` has an invalid topic mixture", c.label));
                }
            }
        }
        if self.topic_rate > 0.0 && (self.num_topics == 0 || self.topic_bank_size == 0) {
            return bad("empty topic bank".into());
        }
        Ok(())
    }
}

/// A planted topic: its bank of words and their generating probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTopic {
    pub words: Vec<String>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub labels: Vec<String>,
    pub train: Vec<Post>,
    pub valid: Vec<Post>,
    pub test: Vec<Post>,
    pub lexicon: Lexicon,
    pub topics: Vec<PlantedTopic>,
    pub positive_words: Vec<String>,
    pub negative_words: Vec<String>,
    pub filler_words: Vec<String>,
}

pub fn topic_word(topic: usize, j: usize) -> String {
    format!("tp{topic}w{j:03}")
}

struct Sampler<'a> {
    spec: &'a SyntheticSpec,
    topic_cdf: Vec<f64>,
    topics: &'a [PlantedTopic],
    pos: &'a [String],
    neg: &'a [String],
    filler: &'a [String],
}

fn draw_cdf(rng: &mut ChaCha8Rng, cdf: &[f64]) -> usize {
    let u = rng.gen::<f64>() * cdf.last().copied().unwrap_or(1.0);
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

fn cumulative(ws: &[f64]) -> Vec<f64> {
    ws.iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

impl Sampler<'_> {
    fn document(&self, rng: &mut ChaCha8Rng, class: &ClassSpec) -> Vec<String> {
        let mode_cdf = cumulative(&class.modes.iter().map(|m| m.weight).collect::<Vec<_>>());
        let mode = &class.modes[draw_cdf(rng, &mode_cdf)];
        let len = rng.gen_range(self.spec.doc_len.0..=self.spec.doc_len.1);
        let topic_cdf = cumulative(&mode.topic_mixture);
        let mut words = Vec::with_capacity(len + 1);
        for _ in 0..len {
            let u: f64 = rng.gen();
            if u < class.sentiment_rate {
                let on_polarity = rng.gen::<f64>() < self.spec.polarity_purity;
                let bank = match (mode.polarity, on_polarity) {
                    (Polarity::Positive, true) | (Polarity::Negative, false) => self.pos,
                    _ => self.neg,
                };
                words.push(bank[rng.gen_range(0..bank.len())].clone());
            } else if u < class.sentiment_rate + self.spec.topic_rate {
                let t = draw_cdf(rng, &topic_cdf);
                let j = draw_cdf(rng, &self.topic_cdf);
                words.push(self.topics[t].words[j].clone());
            } else {
                words.push(self.filler[rng.gen_range(0..self.filler.len())].clone());
            }
        }
        words
    }
}

/// Generates train/valid/test splits. Identical `(spec, seed)` pairs give identical output.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let weights: Vec<f64> = (0..spec.topic_bank_size)
        .map(|j| 1.0 / ((j + 1) as f64).powf(spec.zipf_exponent))
        .collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let topics: Vec<PlantedTopic> = (0..spec.num_topics)
        .map(|t| PlantedTopic {
            words: (0..spec.topic_bank_size).map(|j| topic_word(t, j)).collect(),
            probs: probs.clone(),
        })
        .collect();
    let pos: Vec<String> = (0..spec.sentiment_bank_size).map(|j| format!("pos{j:04}")).collect();
    let neg: Vec<String> = (0..spec.sentiment_bank_size).map(|j| format!("neg{j:04}")).collect();
    let filler: Vec<String> = (0..spec.filler_bank_size).map(|j| format!("fill{j:03}")).collect();

    let mut lexicon = Lexicon::new("planted");
    for w in &pos {
        let s = (rng.gen_range(1.0..3.0f64) * 1000.0).round() / 1000.0;
        lexicon.insert(w, s)?;
    }
    for w in &neg {
        let s = (rng.gen_range(1.0..3.0f64) * 1000.0).round() / 1000.0;
        lexicon.insert(w, -s)?;
    }

    let sampler = Sampler {
        spec,
        topic_cdf: cumulative(&probs),
        topics: &topics,
        pos: &pos,
        neg: &neg,
        filler: &filler,
    };
    let split = |name: &str, per_class: usize, rng: &mut ChaCha8Rng| {
        let mut docs = Vec::with_capacity(per_class * spec.classes.len());
        for (c, class) in spec.classes.iter().enumerate() {
            for _ in 0..per_class {
                let mut words = sampler.document(rng, class);
                words.push(".".to_string());
                docs.push((c, words.join(" ")));
            }
        }
        docs.shuffle(rng);
        docs.into_iter()
            .enumerate()
            .map(|(i, (c, text))| Post::new(format!("{name}-{i:05}"), text, Some(c), None))
            .collect::<Vec<_>>()
    };
    let train = split("train", spec.train_per_class, &mut rng);
    let valid = split("valid", spec.valid_per_class, &mut rng);
    let test = split("test", spec.test_per_class, &mut rng);

    Ok(SyntheticCorpus {
        labels: spec.labels(),
        train,
        valid,
        test,
        lexicon,
        topics,
        positive_words: pos,
        negative_words: neg,
        filler_words: filler,
    })
}
