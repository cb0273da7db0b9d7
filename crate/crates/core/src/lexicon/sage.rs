//! Sparse additive generative model fit: background log-probabilities plus
//! an L1-penalized deviation vector, estimated by proximal gradient ascent.

use serde::Serialize;

use super::VocabCounts;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SageOptions {
    /// L1 weight; `None` uses `sqrt(C)` where `C` is the target token total.
    pub lambda: Option<f64>,
    pub max_iter: usize,
    /// Stop once the objective improves by less than `tol * max(1, |F|)`.
    pub tol: f64,
}

impl Default for SageOptions {
    fn default() -> Self {
        SageOptions {
            lambda: None,
            max_iter: 10_000,
            tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SageModel {
    pub vocab: Vec<String>,
    /// Smoothed background log-probabilities; `exp` sums to one.
    pub background_log_prob: Vec<f64>,
    pub eta: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Objective after every accepted step, starting at `eta = 0`.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl SageModel {
    pub fn eta_of(&self, word: &str) -> Option<f64> {
        self.vocab
            .binary_search_by(|w| w.as_str().cmp(word))
            .ok()
            .map(|i| self.eta[i])
    }
}

fn log_sum_exp(m: &[f64], eta: &[f64]) -> f64 {
    let max = m
        .iter()
        .zip(eta)
        .map(|(a, b)| a + b)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = m.iter().zip(eta).map(|(a, b)| (a + b - max).exp()).sum();
    max + s.ln()
}

/// Smooth part of the objective: sum_w c_w (m_w + eta_w) - C log sum_v exp(m_v + eta_v).
pub fn log_likelihood(counts: &[f64], m: &[f64], eta: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    let linear: f64 = counts
        .iter()
        .zip(m.iter().zip(eta))
        .map(|(c, (a, b))| if *c == 0.0 { 0.0 } else { c * (a + b) })
        .sum();
    linear - total * log_sum_exp(m, eta)
}

/// Penalized objective `log_likelihood - lambda * |eta|_1`.
pub fn penalized_objective(counts: &[f64], m: &[f64], eta: &[f64], lambda: f64) -> f64 {
    log_likelihood(counts, m, eta) - lambda * eta.iter().map(|e| e.abs()).sum::<f64>()
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Add-one smoothed background log-probabilities.
pub fn smoothed_log_probs(background: &[f64]) -> Vec<f64> {
    let denom: f64 = background.iter().sum::<f64>() + background.len() as f64;
    background.iter().map(|b| ((b + 1.0) / denom).ln()).collect()
}

/// Fits deviations for aligned count vectors over `vocab`.
pub fn fit_sage_counts(vocab: Vec<String>, target: &[f64], background: &[f64], opts: SageOptions) -> Result<SageModel> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    assert_eq!(vocab.len(), target.len(), "target counts must align with vocabulary");
    assert_eq!(vocab.len(), background.len(), "background counts must align with vocabulary");
    for (i, w) in vocab.iter().enumerate() {
        if !target[i].is_finite() || !background[i].is_finite() || target[i] < 0.0 || background[i] < 0.0 {
            return Err(Error::NonFiniteCount(w.clone()));
        }
    }
    let total: f64 = target.iter().sum();
    let lambda = opts.lambda.unwrap_or_else(|| total.sqrt());
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("penalty weight {lambda} must be finite and non-negative")));
    }
    let m = smoothed_log_probs(background);
    let n = vocab.len();

    let mut eta = vec![0.0; n];
    let mut f = log_likelihood(target, &m, &eta);
    let mut objective = f;
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;
    let mut alpha = 1.0_f64;
    let mut grad = vec![0.0; n];
    let mut curvature = vec![0.0; n];
    let mut proposal = vec![0.0; n];

    while iterations < opts.max_iter {
        iterations += 1;
        let lse = log_sum_exp(&m, &eta);
        for i in 0..n {
            let p = (m[i] + eta[i] - lse).exp();
            grad[i] = target[i] - total * p;
            // diag(p) - p p^T is dominated by diag(p)
            curvature[i] = (total * p).max(1e-12);
        }

        let mut accepted = None;
        for _ in 0..80 {
            let mut linear = 0.0;
            let mut quad = 0.0;
            for i in 0..n {
                let h = alpha * curvature[i];
                proposal[i] = soft_threshold(eta[i] + grad[i] / h, lambda / h);
                let d = proposal[i] - eta[i];
                linear += grad[i] * d;
                quad += h * d * d;
            }
            if quad == 0.0 {
                accepted = Some(None);
                break;
            }
            let f_new = log_likelihood(target, &m, &proposal);
            if f_new >= f + linear - 0.5 * quad {
                accepted = Some(Some(f_new));
                break;
            }
            alpha *= 2.0;
        }

        match accepted {
            Some(Some(f_new)) => {
                let new_objective = f_new - lambda * proposal.iter().map(|e| e.abs()).sum::<f64>();
                if new_objective < objective {
                    // rounding noise at the optimum
                    converged = true;
                    break;
                }
                std::mem::swap(&mut eta, &mut proposal);
                let improvement = new_objective - objective;
                f = f_new;
                objective = new_objective;
                trace.push(objective);
                alpha = (alpha / 2.0).max(1.0);
                if improvement <= opts.tol * objective.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            // fixed point, or no step satisfies the bound within rounding
            Some(None) | None => {
                converged = true;
                break;
            }
        }
    }

    Ok(SageModel {
        vocab,
        background_log_prob: m,
        eta,
        lambda,
        iterations,
        converged,
        objective,
        objective_trace: trace,
    })
}

/// Fits deviations of `target` from `background` over their joint vocabulary.
pub fn fit_sage(target: &VocabCounts, background: &VocabCounts, opts: SageOptions) -> Result<SageModel> {
    let vocab: Vec<String> = target
        .counts()
        .keys()
        .chain(background.counts().keys())
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let t: Vec<f64> = vocab.iter().map(|w| target.count(w) as f64).collect();
    let b: Vec<f64> = vocab.iter().map(|w| background.count(w) as f64).collect();
    fit_sage_counts(vocab, &t, &b, opts)
}

/// A ranked candidate word.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub word: String,
    pub eta: f64,
}

/// Top `k` words by positive deviation, ties broken lexicographically.
pub fn select_candidates(model: &SageModel, k: usize) -> Vec<Candidate> {
    let mut ranked: Vec<Candidate> = model
        .vocab
        .iter()
        .zip(&model.eta)
        .filter(|(_, e)| **e > 0.0)
        .map(|(w, e)| Candidate {
            word: w.clone(),
            eta: *e,
        })
        .collect();
    ranked.sort_by(|a, b| b.eta.total_cmp(&a.eta).then_with(|| a.word.cmp(&b.word)));
    ranked.truncate(k);
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn identical_distributions_give_zero_deviation() {
        let counts = [400.0, 300.0, 200.0, 100.0];
        let m = fit_sage_counts(words(4), &counts, &counts, SageOptions::default()).unwrap();
        assert!(m.eta.iter().all(|e| *e == 0.0), "{:?}", m.eta);
        assert!(m.converged);
    }

    #[test]
    fn huge_penalty_gives_zero_deviation() {
        let t = [10.0, 500.0, 3.0];
        let b = [300.0, 20.0, 100.0];
        let total: f64 = t.iter().sum();
        let opts = SageOptions {
            lambda: Some(1e6 * total),
            ..Default::default()
        };
        let m = fit_sage_counts(words(3), &t, &b, opts).unwrap();
        assert!(m.eta.iter().all(|e| *e == 0.0));
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        assert!(matches!(
            fit_sage_counts(vec![], &[], &[], SageOptions::default()),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn non_finite_counts_are_rejected() {
        let err = fit_sage_counts(words(2), &[1.0, f64::NAN], &[1.0, 1.0], SageOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteCount(w) if w == "w1"));
    }

    #[test]
    fn objective_never_decreases() {
        let t = [5000.0, 100.0, 2500.0, 40.0, 900.0, 0.0];
        let b = [1000.0, 1000.0, 1000.0, 1000.0, 1000.0, 50.0];
        let m = fit_sage_counts(words(6), &t, &b, SageOptions { lambda: Some(5.0), ..Default::default() }).unwrap();
        for w in m.objective_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(m.converged);
    }

    #[test]
    fn candidates_are_positive_and_tie_broken_by_name() {
        let model = SageModel {
            vocab: vec!["b".into(), "a".into(), "c".into(), "d".into()],
            background_log_prob: vec![0.0; 4],
            eta: vec![0.5, 0.5, 0.0, -1.0],
            lambda: 1.0,
            iterations: 1,
            converged: true,
            objective: 0.0,
            objective_trace: vec![],
        };
        let c = select_candidates(&model, 300);
        assert_eq!(c.iter().map(|c| c.word.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
        assert_eq!(select_candidates(&model, 1).len(), 1);
    }
}
