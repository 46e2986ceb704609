use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::ClarityError;
use crate::label::ClarityLabel;
use crate::text::word_tokens;

pub const DEFAULT_PAIRS_PER_ITEM: usize = 20;

/// A training pair. `a` and `b` index the labeled input the pair came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub a: usize,
    pub b: usize,
    pub text_a: String,
    pub text_b: String,
    /// 1.0 for same-label pairs, 0.0 otherwise.
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairBatch {
    pub pairs: Vec<Pair>,
    pub seed: u64,
    /// Set in lenient mode when the input had one label, so only positive
    /// pairs exist.
    pub single_class: bool,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.target == 1.0).count()
    }
}

/// `r` partners from `pool`, without replacement until the pool is used up,
/// then cycling through it again.
fn sample_partners(pool: &[usize], r: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if pool.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(r);
    while out.len() < r {
        let mut round = pool.to_vec();
        round.shuffle(rng);
        out.extend(round.into_iter().take(r - out.len()));
    }
    out
}

/// For every item, `r_per_item` same-label partners (target 1) and
/// `r_per_item` different-label partners (target 0).
///
/// With a single label in the input, `strict` turns the missing negatives
/// into [`ClarityError::SingleClassSet`]; otherwise only positives are
/// returned and `single_class` is set.
pub fn generate_contrastive_pairs<S: AsRef<str>>(
    labeled: &[(S, ClarityLabel)],
    r_per_item: usize,
    seed: u64,
    strict: bool,
) -> Result<PairBatch, ClarityError> {
    if labeled.len() < 2 {
        return Err(ClarityError::TooFewItems(labeled.len()));
    }
    let single_class = labeled.iter().all(|(_, l)| *l == labeled[0].1);
    if single_class {
        if strict {
            return Err(ClarityError::SingleClassSet);
        }
        warn!("all items share one label; generating positive pairs only");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(labeled.len() * r_per_item * 2);
    let mut push = |a: usize, b: usize, target: f64| {
        pairs.push(Pair {
            a,
            b,
            text_a: labeled[a].0.as_ref().to_string(),
            text_b: labeled[b].0.as_ref().to_string(),
            target,
        })
    };
    for (i, (_, label)) in labeled.iter().enumerate() {
        let (same, other): (Vec<usize>, Vec<usize>) = (0..labeled.len())
            .filter(|&j| j != i)
            .partition(|&j| labeled[j].1 == *label);
        for j in sample_partners(&same, r_per_item, &mut rng) {
            push(i, j, 1.0);
        }
        for j in sample_partners(&other, r_per_item, &mut rng) {
            push(i, j, 0.0);
        }
    }
    Ok(PairBatch {
        pairs,
        seed,
        single_class,
    })
}

/// Label-free pairs for adapting an encoder to a domain corpus: each text
/// against a copy with words dropped (target 1) and against other texts
/// (target 0).
pub fn self_supervised_pairs<S: AsRef<str>>(texts: &[S], r_per_item: usize, drop_rate: f64, seed: u64) -> PairBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for (i, t) in texts.iter().enumerate() {
        let words = word_tokens(t.as_ref());
        for _ in 0..r_per_item {
            let kept: Vec<&str> = words
                .iter()
                .filter(|_| !rng.gen_bool(drop_rate))
                .map(String::as_str)
                .collect();
            let view = if kept.is_empty() {
                words.join(" ")
            } else {
                kept.join(" ")
            };
            pairs.push(Pair {
                a: i,
                b: i,
                text_a: t.as_ref().to_string(),
                text_b: view,
                target: 1.0,
            });
            if texts.len() > 1 {
                let mut j = rng.gen_range(0..texts.len() - 1);
                if j >= i {
                    j += 1;
                }
                pairs.push(Pair {
                    a: i,
                    b: j,
                    text_a: t.as_ref().to_string(),
                    text_b: texts[j].as_ref().to_string(),
                    target: 0.0,
                });
            }
        }
    }
    PairBatch {
        pairs,
        seed,
        single_class: texts.len() < 2,
    }
}
