//! Paired target/background unigram corpora for lexicon induction.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::{stream_rng, zipf_weights};
use crate::error::{Error, Result};
use crate::lexicon::VocabCounts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorporaSpec {
    pub seed: u64,
    pub vocab: usize,
    pub planted: usize,
    /// Probability multiplier of planted words in the target, before renormalizing.
    pub boost: f64,
    pub target_tokens: u64,
    pub background_tokens: u64,
    pub zipf_exponent: f64,
}

impl Default for CorporaSpec {
    fn default() -> Self {
        CorporaSpec {
            seed: 1,
            vocab: 1000,
            planted: 20,
            boost: 10.0,
            target_tokens: 1_000_000,
            background_tokens: 1_000_000,
            zipf_exponent: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpora {
    pub target: VocabCounts,
    pub background: VocabCounts,
    pub planted: Vec<String>,
    pub words: Vec<String>,
    pub background_probs: Vec<f64>,
    pub target_probs: Vec<f64>,
}

fn multinomial(rng: &mut ChaCha8Rng, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut left = n;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        let c = if left == 0 || mass <= 0.0 {
            0
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, q).expect("probability in range").sample(rng)
        };
        out.push(c);
        left -= c;
        mass -= p;
    }
    if let Some(last) = out.last_mut() {
        *last += left;
    }
    out
}

fn counts(words: &[String], c: &[u64]) -> VocabCounts {
    words.iter().zip(c).filter(|(_, &n)| n > 0).map(|(w, &n)| (w.clone(), n)).collect()
}

/// Background from a Zipf base distribution; target from the same base with
/// the planted words' probabilities multiplied by `boost`.
pub fn generate_corpora(spec: &CorporaSpec) -> Result<SyntheticCorpora> {
    if !(spec.boost > 0.0 && spec.boost.is_finite()) {
        return Err(Error::InvalidInput(format!("boost must be positive, got {}", spec.boost)));
    }
    if spec.vocab == 0 || spec.planted > spec.vocab {
        return Err(Error::InvalidInput("planted words must be a subset of a non-empty vocabulary".into()));
    }
    let words: Vec<String> = (0..spec.vocab).map(|i| format!("v{i:05}")).collect();
    let mut base = zipf_weights(spec.vocab, spec.zipf_exponent);
    let z: f64 = base.iter().sum();
    base.iter_mut().for_each(|p| *p /= z);

    let mut rng = stream_rng(spec.seed, 7);
    let mut planted_idx: Vec<usize> = sample(&mut rng, spec.vocab, spec.planted).into_vec();
    planted_idx.sort_unstable();
    let mut boosted = base.clone();
    for &i in &planted_idx {
        boosted[i] *= spec.boost;
    }
    let z: f64 = boosted.iter().sum();
    boosted.iter_mut().for_each(|p| *p /= z);

    let target = multinomial(&mut rng, spec.target_tokens, &boosted);
    let background = multinomial(&mut rng, spec.background_tokens, &base);
    Ok(SyntheticCorpora {
        target: counts(&words, &target),
        background: counts(&words, &background),
        planted: planted_idx.iter().map(|&i| words[i].clone()).collect(),
        words,
        background_probs: base,
        target_probs: boosted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_vocabulary() {
        let spec = CorporaSpec {
            target_tokens: 50_000,
            background_tokens: 40_000,
            zipf_exponent: 0.0,
            ..CorporaSpec::default()
        };
        let c = generate_corpora(&spec).unwrap();
        assert_eq!(c.target.total(), 50_000);
        assert_eq!(c.background.total(), 40_000);
        assert_eq!(c.words.len(), 1000);
        assert_eq!(c.planted.len(), 20);
    }

    #[test]
    fn unit_boost_keeps_the_distribution() {
        let c = generate_corpora(&CorporaSpec {
            boost: 1.0,
            target_tokens: 10,
            background_tokens: 10,
            ..CorporaSpec::default()
        })
        .unwrap();
        for (a, b) in c.target_probs.iter().zip(&c.background_probs) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(generate_corpora(&CorporaSpec {
            boost: 0.0,
            ..CorporaSpec::default()
        })
        .is_err());
    }
}
