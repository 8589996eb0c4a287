//! Linear-chain CRF: sequence scores, forward-algorithm normalization, exact
//! gradients via forward-backward, and masked Viterbi decoding.
//!
//! Transitions live in an (L+2)×(L+2) row-major matrix indexed
//! [from][to], with START = L and STOP = L+1. A sequence y over emissions E
//! scores s(y) = A[START][y₀] + Σ A[yᵢ₋₁][yᵢ] + Σ E[i][yᵢ] + A[yₙ₋₁][STOP],
//! and the forward recursion computes log Z = log Σ_y exp s(y) in log space.

use crate::bio::BioLabel;
use crate::error::{Error, Result};

use super::math::log_sum_exp;

/// Borrowed view of the transition matrix.
#[derive(Clone, Copy)]
pub struct Transitions<'a> {
    data: &'a [f64],
    num_labels: usize,
}

impl<'a> Transitions<'a> {
    pub fn new(data: &'a [f64], num_labels: usize) -> Self {
        debug_assert_eq!(data.len(), (num_labels + 2) * (num_labels + 2));
        Transitions { data, num_labels }
    }

    pub fn start(&self) -> usize {
        self.num_labels
    }

    pub fn stop(&self) -> usize {
        self.num_labels + 1
    }

    #[inline]
    pub fn at(&self, from: usize, to: usize) -> f64 {
        self.data[from * (self.num_labels + 2) + to]
    }
}

/// Index into the flat transition gradient for [from][to].
#[inline]
fn tidx(num_labels: usize, from: usize, to: usize) -> usize {
    from * (num_labels + 2) + to
}

/// Score of one label sequence. `labels` and `emissions` must be non-empty
/// and the same length.
pub fn sequence_score(emissions: &[Vec<f64>], trans: Transitions, labels: &[usize]) -> f64 {
    debug_assert_eq!(emissions.len(), labels.len());
    debug_assert!(!labels.is_empty());
    let mut score = trans.at(trans.start(), labels[0]) + emissions[0][labels[0]];
    for i in 1..labels.len() {
        score += trans.at(labels[i - 1], labels[i]) + emissions[i][labels[i]];
    }
    score + trans.at(labels[labels.len() - 1], trans.stop())
}

/// log Z over all label sequences, by the forward recursion in log space.
pub fn forward_log_z(emissions: &[Vec<f64>], trans: Transitions) -> f64 {
    let num_labels = trans.num_labels;
    debug_assert!(!emissions.is_empty());
    let mut alpha: Vec<f64> = (0..num_labels)
        .map(|j| trans.at(trans.start(), j) + emissions[0][j])
        .collect();
    let mut scratch = vec![0.0; num_labels];
    for emission in emissions.iter().skip(1) {
        let mut next = vec![0.0; num_labels];
        for (j, nj) in next.iter_mut().enumerate() {
            for (k, s) in scratch.iter_mut().enumerate() {
                *s = alpha[k] + trans.at(k, j);
            }
            *nj = log_sum_exp(&scratch) + emission[j];
        }
        alpha = next;
    }
    let finals: Vec<f64> = (0..num_labels)
        .map(|j| alpha[j] + trans.at(j, trans.stop()))
        .collect();
    log_sum_exp(&finals)
}

/// Negative log-likelihood of the gold sequence plus exact gradients with
/// respect to the emissions and the transition matrix (flat, (L+2)²,
/// including the START row and STOP column).
pub fn nll_and_grads(
    emissions: &[Vec<f64>],
    trans: Transitions,
    gold: &[usize],
) -> Result<(f64, Vec<Vec<f64>>, Vec<f64>)> {
    let num_labels = trans.num_labels;
    let n = emissions.len();
    if n == 0 || gold.len() != n {
        return Err(Error::Invalid(format!(
            "CRF needs n ≥ 1 with matching gold labels (n={n}, gold={})",
            gold.len()
        )));
    }
    for row in emissions {
        if row.len() != num_labels || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("emission matrix".to_string()));
        }
    }
    if gold.iter().any(|&g| g >= num_labels) {
        return Err(Error::Invalid("gold label out of range".to_string()));
    }

    // Forward and backward tables in log space.
    let mut alpha = vec![vec![0.0; num_labels]; n];
    for j in 0..num_labels {
        alpha[0][j] = trans.at(trans.start(), j) + emissions[0][j];
    }
    let mut scratch = vec![0.0; num_labels];
    for i in 1..n {
        for j in 0..num_labels {
            for (k, s) in scratch.iter_mut().enumerate() {
                *s = alpha[i - 1][k] + trans.at(k, j);
            }
            alpha[i][j] = log_sum_exp(&scratch) + emissions[i][j];
        }
    }
    let mut beta = vec![vec![0.0; num_labels]; n];
    for j in 0..num_labels {
        beta[n - 1][j] = trans.at(j, trans.stop());
    }
    for i in (0..n - 1).rev() {
        for k in 0..num_labels {
            for (j, s) in scratch.iter_mut().enumerate() {
                *s = trans.at(k, j) + emissions[i + 1][j] + beta[i + 1][j];
            }
            beta[i][k] = log_sum_exp(&scratch);
        }
    }
    let finals: Vec<f64> = (0..num_labels)
        .map(|j| alpha[n - 1][j] + trans.at(j, trans.stop()))
        .collect();
    let log_z = log_sum_exp(&finals);

    // dNLL/dE[i][j] = P(yᵢ = j) − 1{goldᵢ = j}
    let mut d_emissions = vec![vec![0.0; num_labels]; n];
    for i in 0..n {
        for j in 0..num_labels {
            d_emissions[i][j] = (alpha[i][j] + beta[i][j] - log_z).exp();
        }
        d_emissions[i][gold[i]] -= 1.0;
    }

    // dNLL/dA = expected transition counts − gold transition counts.
    let mut d_trans = vec![0.0; (num_labels + 2) * (num_labels + 2)];
    for j in 0..num_labels {
        let p = (alpha[0][j] + beta[0][j] - log_z).exp();
        d_trans[tidx(num_labels, trans.start(), j)] += p;
        let pn = (alpha[n - 1][j] + beta[n - 1][j] - log_z).exp();
        d_trans[tidx(num_labels, j, trans.stop())] += pn;
    }
    for i in 0..n - 1 {
        for k in 0..num_labels {
            for j in 0..num_labels {
                let lp = alpha[i][k] + trans.at(k, j) + emissions[i + 1][j] + beta[i + 1][j] - log_z;
                d_trans[tidx(num_labels, k, j)] += lp.exp();
            }
        }
    }
    d_trans[tidx(num_labels, trans.start(), gold[0])] -= 1.0;
    for i in 1..n {
        d_trans[tidx(num_labels, gold[i - 1], gold[i])] -= 1.0;
    }
    d_trans[tidx(num_labels, gold[n - 1], trans.stop())] -= 1.0;

    let nll = log_z - sequence_score(emissions, trans, gold);
    if !nll.is_finite() {
        return Err(Error::NonFinite("CRF loss".to_string()));
    }
    Ok((nll, d_emissions, d_trans))
}

/// Structural legality of transitions for a BIO label alphabet. Illegal
/// transitions are masked to −∞ at decode time only; training stays
/// unconstrained maximum likelihood.
#[derive(Debug, Clone)]
pub struct TransitionMask {
    num_labels: usize,
    /// legal[from][to] over the (L+2)² transition table.
    legal: Vec<bool>,
}

impl TransitionMask {
    /// Everything legal (used in tests).
    pub fn permissive(num_labels: usize) -> Self {
        TransitionMask {
            num_labels,
            legal: vec![true; (num_labels + 2) * (num_labels + 2)],
        }
    }

    /// Mask for a BIO alphabet: I-x may only follow B-x or I-x, and never
    /// starts a sequence.
    pub fn for_labels(labels: &[BioLabel]) -> Self {
        let l = labels.len();
        let start = l;
        let stop = l + 1;
        let mut legal = vec![true; (l + 2) * (l + 2)];
        let mut set = |from: usize, to: usize, v: bool| legal[from * (l + 2) + to] = v;
        for (j, to) in labels.iter().enumerate() {
            if let BioLabel::I(t_to) = to {
                // From START or O: illegal. From B-x/I-x: legal only if x matches.
                set(start, j, false);
                for (k, from) in labels.iter().enumerate() {
                    let ok = match from {
                        BioLabel::B(t_from) | BioLabel::I(t_from) => t_from == t_to,
                        BioLabel::O => false,
                    };
                    set(k, j, ok);
                }
            }
        }
        // Transitions into START and out of STOP can never be used by the
        // decoder; leave them as written.
        let _ = stop;
        TransitionMask { num_labels: l, legal }
    }

    #[inline]
    fn allows(&self, from: usize, to: usize) -> bool {
        self.legal[from * (self.num_labels + 2) + to]
    }
}

/// Highest-scoring legal label sequence and its score. Ties break toward the
/// lowest label index. Errors if every path is illegal (impossible for BIO
/// alphabets, which always allow O).
pub fn viterbi(
    emissions: &[Vec<f64>],
    trans: Transitions,
    mask: &TransitionMask,
) -> Result<(Vec<usize>, f64)> {
    let num_labels = trans.num_labels;
    if emissions.is_empty() {
        return Ok((Vec::new(), 0.0));
    }
    let n = emissions.len();
    let mut score = vec![vec![f64::NEG_INFINITY; num_labels]; n];
    let mut back = vec![vec![0usize; num_labels]; n];
    for j in 0..num_labels {
        if mask.allows(trans.start(), j) {
            score[0][j] = trans.at(trans.start(), j) + emissions[0][j];
        }
    }
    for i in 1..n {
        for j in 0..num_labels {
            let mut best = f64::NEG_INFINITY;
            let mut best_k = 0;
            for k in 0..num_labels {
                if !mask.allows(k, j) || score[i - 1][k] == f64::NEG_INFINITY {
                    continue;
                }
                let cand = score[i - 1][k] + trans.at(k, j);
                if cand > best {
                    best = cand;
                    best_k = k;
                }
            }
            if best > f64::NEG_INFINITY {
                score[i][j] = best + emissions[i][j];
                back[i][j] = best_k;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_j = usize::MAX;
    for j in 0..num_labels {
        if score[n - 1][j] == f64::NEG_INFINITY || !mask.allows(j, trans.stop()) {
            continue;
        }
        let cand = score[n - 1][j] + trans.at(j, trans.stop());
        if cand > best {
            best = cand;
            best_j = j;
        }
    }
    if best_j == usize::MAX {
        return Err(Error::Invalid("no legal label path".to_string()));
    }
    let mut path = vec![0usize; n];
    path[n - 1] = best_j;
    for i in (1..n).rev() {
        path[i - 1] = back[i][path[i]];
    }
    Ok((path, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::types::EntityType;

    fn random_instance(rng: &mut Rng, n: usize, l: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let emissions = (0..n)
            .map(|_| (0..l).map(|_| rng.uniform(-2.0, 2.0)).collect())
            .collect();
        let trans = (0..(l + 2) * (l + 2)).map(|_| rng.uniform(-1.0, 1.0)).collect();
        (emissions, trans)
    }

    /// Enumerate all lᶰ sequences.
    fn all_sequences(n: usize, l: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0..l).map(move |j| {
                        let mut s2 = s.clone();
                        s2.push(j);
                        s2
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn zero_parameters_give_uniform_nll() {
        for (n, l) in [(1, 2), (3, 4), (5, 3)] {
            let emissions = vec![vec![0.0; l]; n];
            let trans = vec![0.0; (l + 2) * (l + 2)];
            let gold = vec![0; n];
            let (nll, _, _) =
                nll_and_grads(&emissions, Transitions::new(&trans, l), &gold).unwrap();
            let expected = (n as f64) * (l as f64).ln();
            assert!((nll - expected).abs() < 1e-12, "n={n} l={l}: {nll} vs {expected}");
        }
    }

    #[test]
    fn forward_matches_brute_force_enumeration() {
        let mut rng = Rng::new(1234);
        let (emissions, trans) = random_instance(&mut rng, 4, 3);
        let tv = Transitions::new(&trans, 3);
        let brute: Vec<f64> = all_sequences(4, 3)
            .iter()
            .map(|seq| sequence_score(&emissions, tv, seq))
            .collect();
        assert_eq!(brute.len(), 81);
        let log_z = forward_log_z(&emissions, tv);
        assert!((log_z - log_sum_exp(&brute)).abs() < 1e-8);
    }

    #[test]
    fn sequence_probabilities_normalize() {
        let mut rng = Rng::new(99);
        for _ in 0..20 {
            let n = 1 + rng.below(4);
            let l = 2 + rng.below(3);
            let (emissions, trans) = random_instance(&mut rng, n, l);
            let tv = Transitions::new(&trans, l);
            let log_z = forward_log_z(&emissions, tv);
            let total: f64 = all_sequences(n, l)
                .iter()
                .map(|seq| (sequence_score(&emissions, tv, seq) - log_z).exp())
                .sum();
            assert!((total - 1.0).abs() < 1e-8, "normalization off: {total}");
        }
    }

    #[test]
    fn crf_gradients_match_finite_differences() {
        let mut rng = Rng::new(5);
        let (emissions, trans) = random_instance(&mut rng, 3, 3);
        let gold = vec![0, 2, 1];
        let loss = |e: &Vec<Vec<f64>>, t: &Vec<f64>| {
            let tv = Transitions::new(t, 3);
            forward_log_z(e, tv) - sequence_score(e, tv, &gold)
        };
        let (_, d_em, d_tr) =
            nll_and_grads(&emissions, Transitions::new(&trans, 3), &gold).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..3 {
                let mut plus = emissions.clone();
                plus[i][j] += h;
                let mut minus = emissions.clone();
                minus[i][j] -= h;
                let numeric = (loss(&plus, &trans) - loss(&minus, &trans)) / (2.0 * h);
                assert!(
                    (d_em[i][j] - numeric).abs() < 1e-7,
                    "emission grad [{i}][{j}]"
                );
            }
        }
        for idx in 0..trans.len() {
            let mut plus = trans.clone();
            plus[idx] += h;
            let mut minus = trans.clone();
            minus[idx] -= h;
            let numeric = (loss(&emissions, &plus) - loss(&emissions, &minus)) / (2.0 * h);
            assert!(
                (d_tr[idx] - numeric).abs() < 1e-7,
                "transition grad [{idx}]: {} vs {numeric}",
                d_tr[idx]
            );
        }
    }

    #[test]
    fn nll_is_nonnegative() {
        let mut rng = Rng::new(7);
        for _ in 0..50 {
            let n = 1 + rng.below(5);
            let l = 2 + rng.below(4);
            let (emissions, trans) = random_instance(&mut rng, n, l);
            let gold: Vec<usize> = (0..n).map(|_| rng.below(l)).collect();
            let (nll, _, _) =
                nll_and_grads(&emissions, Transitions::new(&trans, l), &gold).unwrap();
            assert!(nll >= -1e-10, "negative NLL {nll}");
        }
    }

    #[test]
    fn viterbi_single_token() {
        let emissions = vec![vec![0.0, 5.0, 0.0]];
        let trans = vec![0.0; 25];
        let mask = TransitionMask::permissive(3);
        let (path, _) = viterbi(&emissions, Transitions::new(&trans, 3), &mask).unwrap();
        assert_eq!(path, vec![1]);
    }

    #[test]
    fn viterbi_matches_brute_force() {
        let mut rng = Rng::new(2024);
        for _ in 0..100 {
            let n = 1 + rng.below(5);
            let l = 2 + rng.below(4);
            let (emissions, trans) = random_instance(&mut rng, n, l);
            let tv = Transitions::new(&trans, l);
            let mask = TransitionMask::permissive(l);
            let (path, score) = viterbi(&emissions, tv, &mask).unwrap();
            let best = all_sequences(n, l)
                .into_iter()
                .map(|seq| (sequence_score(&emissions, tv, &seq), seq))
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .unwrap();
            assert!((score - best.0).abs() < 1e-9);
            assert_eq!(path, best.1);
        }
    }

    #[test]
    fn mask_forbids_o_to_inside() {
        use crate::bio::BioLabel::*;
        let labels = vec![
            O,
            B(EntityType::Stroke),
            I(EntityType::Stroke),
            B(EntityType::Tumour),
            I(EntityType::Tumour),
        ];
        let mask = TransitionMask::for_labels(&labels);
        let l = labels.len();
        // Emissions try hard to produce O → I-stroke and B-stroke → I-tumour.
        let emissions = vec![
            vec![5.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 5.0, 0.0, 5.0],
            vec![0.0, 0.0, 5.0, 0.0, 5.0],
        ];
        let trans = vec![0.0; (l + 2) * (l + 2)];
        let (path, _) = viterbi(&emissions, Transitions::new(&trans, l), &mask).unwrap();
        for w in path.windows(2) {
            let from = labels[w[0]];
            let to = labels[w[1]];
            if let I(t_to) = to {
                match from {
                    B(t) | I(t) => assert_eq!(t, t_to),
                    O => panic!("O followed by I"),
                }
            }
        }
        assert!(!matches!(labels[path[0]], I(_)), "sequence starts with I");
    }

    #[test]
    fn ties_break_toward_lowest_label_index() {
        // All-zero scores: every sequence ties; expect all-zero labels.
        let emissions = vec![vec![0.0; 4]; 3];
        let trans = vec![0.0; 36];
        let mask = TransitionMask::permissive(4);
        let (path, _) = viterbi(&emissions, Transitions::new(&trans, 4), &mask).unwrap();
        assert_eq!(path, vec![0, 0, 0]);
    }

    #[test]
    fn non_finite_emissions_are_rejected() {
        let emissions = vec![vec![f64::NAN, 0.0]];
        let trans = vec![0.0; 16];
        assert!(matches!(
            nll_and_grads(&emissions, Transitions::new(&trans, 2), &[0]),
            Err(Error::NonFinite(_))
        ));
    }
}
