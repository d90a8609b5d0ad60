// SPDX-License-Identifier: MIT OR Apache-2.0

//! Expert / anti-expert logit ensembles.
//!
//! The debiased distribution is
//!
//! ```text
//! p~ = softmax(z + alpha * (z_plus - z_minus))
//!    ∝ p * (p_plus / p_minus)^alpha
//! ```
//!
//! where `z` are the target model logits, `z_plus` the expert's (trained on
//! anti-stereotypical text) and `z_minus` the anti-expert's (trained on
//! stereotypical text). The ratio `p_plus / p_minus` acts as a per-token
//! scaling coefficient, which is what [`probability_shift`] exposes.
//!
//! Several signals can be cascaded, each with its own weight; their logit
//! contributions simply add.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{
    assert_compatible, log_sum_exp, softmax, DistributionProvider, LogitVector, ProbVector,
    SharedProvider, PROB_FLOOR,
};
use crate::vocab::{Fingerprint, TextCodec, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// No debiasing: the base distribution passes through untouched.
    None,
    #[default]
    Full,
    /// Only `+z_plus` is added; anti-expert terms are zeroed.
    ExpertOnly,
    /// Only `-z_minus` is added; expert terms are zeroed.
    AntiOnly,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::None => "none",
            Mode::Full => "full",
            Mode::ExpertOnly => "expert_only",
            Mode::AntiOnly => "anti_only",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Mode::None),
            "full" => Ok(Mode::Full),
            "expert_only" => Ok(Mode::ExpertOnly),
            "anti_only" => Ok(Mode::AntiOnly),
            _ => Err(Error::InvalidArgument(format!(
                "unknown mode {s:?} (expected none, full, expert_only, anti_only)"
            ))),
        }
    }
}

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub alpha: f64,
    pub mode: Mode,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            alpha: DEFAULT_ALPHA,
            mode: Mode::Full,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be a finite value >= 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

fn check_lengths(expected: usize, others: &[usize]) -> Result<()> {
    match others.iter().find(|&&n| n != expected) {
        Some(&actual) => Err(Error::LengthMismatch { expected, actual }),
        None => Ok(()),
    }
}

/// `z + alpha * (z_plus - z_minus)`, the ensemble logits before softmax.
pub fn steered_logits(
    z: &LogitVector,
    z_plus: &LogitVector,
    z_minus: &LogitVector,
    alpha: f64,
) -> Result<Vec<f64>> {
    check_lengths(z.len(), &[z_plus.len(), z_minus.len()])?;
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    Ok(z.as_slice()
        .iter()
        .zip(z_plus.as_slice())
        .zip(z_minus.as_slice())
        .map(|((&b, &p), &m)| b + alpha * (p - m))
        .collect())
}

/// Logit-space combination: `softmax(z + alpha * (z_plus - z_minus))`.
pub fn combine_logits(
    z: &LogitVector,
    z_plus: &LogitVector,
    z_minus: &LogitVector,
    alpha: f64,
) -> Result<ProbVector> {
    Ok(softmax(&steered_logits(z, z_plus, z_minus, alpha)?))
}

/// Probability-space combination: `normalize(p * (p_plus / p_minus)^alpha)`.
/// Entries are floored at [`PROB_FLOOR`] before the ratio is taken.
pub fn combine_product_form(
    p: &ProbVector,
    p_plus: &ProbVector,
    p_minus: &ProbVector,
    alpha: f64,
) -> Result<ProbVector> {
    check_lengths(p.len(), &[p_plus.len(), p_minus.len()])?;
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    let scaled: Vec<f64> = p
        .as_slice()
        .iter()
        .zip(p_plus.as_slice())
        .zip(p_minus.as_slice())
        .map(|((&b, &e), &a)| {
            let ratio = e.max(PROB_FLOOR) / a.max(PROB_FLOOR);
            b.max(PROB_FLOOR) * ratio.powf(alpha)
        })
        .collect();
    let total: f64 = scaled.iter().sum();
    Ok(ProbVector::from_raw(scaled.into_iter().map(|x| x / total).collect()))
}

/// One debiasing signal of a cascade.
#[derive(Clone)]
pub struct SignalSpec {
    pub expert: Option<SharedProvider>,
    pub anti_expert: Option<SharedProvider>,
    pub weight: f64,
}

impl SignalSpec {
    pub fn new(expert: SharedProvider, anti_expert: SharedProvider) -> Self {
        SignalSpec {
            expert: Some(expert),
            anti_expert: Some(anti_expert),
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

impl std::fmt::Debug for SignalSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SignalSpec")
            .field("expert", &self.expert.as_ref().map(|p| p.name()))
            .field("anti_expert", &self.anti_expert.as_ref().map(|p| p.name()))
            .field("weight", &self.weight)
            .finish()
    }
}

/// A target model steered by one or more expert/anti-expert signals.
///
/// `next_logits(ctx) = z(ctx) + alpha * Σ_s w_s * (z_s_plus(ctx) - z_s_minus(ctx))`,
/// with terms dropped according to [`Mode`]. Sub-model queries for one
/// context run in parallel; the sum is taken in a fixed order.
pub struct DebiasedProvider {
    base: SharedProvider,
    // (provider, signed coefficient) in cascade order.
    terms: Vec<(SharedProvider, f64)>,
    config: EnsembleConfig,
}

impl DebiasedProvider {
    pub fn new(base: SharedProvider, signals: Vec<SignalSpec>, config: EnsembleConfig) -> Result<Self> {
        config.validate()?;
        let mut terms = Vec::new();
        for (i, s) in signals.into_iter().enumerate() {
            if s.expert.is_none() && s.anti_expert.is_none() {
                return Err(Error::InvalidArgument(format!(
                    "signal {i} has neither expert nor anti-expert"
                )));
            }
            if !(s.weight >= 0.0 && s.weight.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "signal {i} weight must be >= 0, got {}",
                    s.weight
                )));
            }
            for p in s.expert.iter().chain(s.anti_expert.iter()) {
                assert_compatible(base.as_ref(), p.as_ref())?;
            }
            let coef = config.alpha * s.weight;
            if let Some(e) = s.expert {
                if config.mode != Mode::AntiOnly {
                    terms.push((e, coef));
                }
            }
            if let Some(a) = s.anti_expert {
                if config.mode != Mode::ExpertOnly {
                    terms.push((a, -coef));
                }
            }
        }
        if config.mode == Mode::None {
            terms.clear();
        }
        Ok(DebiasedProvider { base, terms, config })
    }

    pub fn config(&self) -> EnsembleConfig {
        self.config
    }

    pub fn base(&self) -> &SharedProvider {
        &self.base
    }

    /// The additive steering vector for `context` (all zeros in mode none).
    pub fn signal(&self, context: &[TokenId]) -> Result<Vec<f64>> {
        let logits: Vec<LogitVector> = self
            .terms
            .par_iter()
            .map(|(p, _)| p.next_logits(context))
            .collect::<Result<_>>()?;
        let mut signal = vec![0.0; self.base.vocab_size()];
        for ((_, coef), z) in self.terms.iter().zip(&logits) {
            check_lengths(signal.len(), &[z.len()])?;
            for (s, &v) in signal.iter_mut().zip(z.as_slice()) {
                *s += coef * v;
            }
        }
        Ok(signal)
    }
}

impl DistributionProvider for DebiasedProvider {
    fn name(&self) -> String {
        format!("debiased({}, {}, alpha={})", self.base.name(), self.config.mode, self.config.alpha)
    }

    fn vocab_size(&self) -> usize {
        self.base.vocab_size()
    }

    fn fingerprint(&self) -> Fingerprint {
        self.base.fingerprint()
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector> {
        if self.terms.is_empty() {
            return self.base.next_logits(context);
        }
        let (base, signal) = rayon::join(|| self.base.next_logits(context), || self.signal(context));
        let base = base?;
        let signal = signal?;
        check_lengths(base.len(), &[signal.len()])?;
        LogitVector::new(
            base.into_inner()
                .into_iter()
                .zip(signal)
                .map(|(z, s)| z + s)
                .collect(),
        )
    }
}

/// One candidate row of a [`ShiftReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub token: String,
    pub id: TokenId,
    pub base_prob: f64,
    pub debiased_prob: f64,
    /// `debiased_prob - base_prob`.
    pub shift: f64,
    /// Additive logit change at this token (`alpha * (z_plus - z_minus)` for a
    /// single full signal).
    pub signal: f64,
    /// 1-based rank over the whole vocabulary, ties broken by token id.
    pub rank_before: usize,
    pub rank_after: usize,
}

/// Next-token probability shift for a set of candidates under debiasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub prompt: String,
    /// `ln Σ exp(z + signal) - ln Σ exp(z)`; a candidate gains probability
    /// iff its signal exceeds this value.
    pub log_normalizer_change: f64,
    pub rows: Vec<ShiftRow>,
}

impl ShiftReport {
    pub fn row(&self, token: &str) -> Option<&ShiftRow> {
        self.rows.iter().find(|r| r.token == token)
    }

    /// Plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = format!("prompt: {}\n", self.prompt);
        out.push_str(&format!(
            "{:<16} {:>12} {:>12} {:>12} {:>10} {:>6} {:>6}\n",
            "token", "base_prob", "debiased", "shift", "signal", "rank0", "rank1"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<16} {:>12.6} {:>12.6} {:>+12.6} {:>+10.4} {:>6} {:>6}\n",
                r.token, r.base_prob, r.debiased_prob, r.shift, r.signal, r.rank_before, r.rank_after
            ));
        }
        out
    }
}

fn ranks(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut rank = vec![0; probs.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

/// Compares base and debiased next-token distributions after `prompt`.
pub fn probability_shift(
    base: &dyn DistributionProvider,
    debiased: &dyn DistributionProvider,
    codec: &dyn TextCodec,
    prompt: &str,
    candidates: &[impl AsRef<str>],
) -> Result<ShiftReport> {
    assert_compatible(base, debiased)?;
    let mut ids = Vec::with_capacity(candidates.len());
    let mut unknown = Vec::new();
    for c in candidates {
        match codec.token_id(c.as_ref())? {
            Some(id) => ids.push(id),
            None => unknown.push(c.as_ref().to_string()),
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownTokens(unknown));
    }
    let context = codec.encode(prompt)?;
    let z = base.next_logits(&context)?;
    let z_tilde = debiased.next_logits(&context)?;
    check_lengths(z.len(), &[z_tilde.len()])?;
    let p = z.softmax();
    let p_tilde = z_tilde.softmax();
    let before = ranks(p.as_slice());
    let after = ranks(p_tilde.as_slice());
    let rows = candidates
        .iter()
        .zip(&ids)
        .map(|(c, &id)| {
            let i = id as usize;
            ShiftRow {
                token: c.as_ref().to_string(),
                id,
                base_prob: p.as_slice()[i],
                debiased_prob: p_tilde.as_slice()[i],
                shift: p_tilde.as_slice()[i] - p.as_slice()[i],
                signal: z_tilde.as_slice()[i] - z.as_slice()[i],
                rank_before: before[i],
                rank_after: after[i],
            }
        })
        .collect();
    Ok(ShiftReport {
        prompt: prompt.to_string(),
        log_normalizer_change: log_sum_exp(z_tilde.as_slice()) - log_sum_exp(z.as_slice()),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{TableProvider, UniformProvider};
    use crate::vocab::Vocabulary;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn lv(v: &[f64]) -> LogitVector {
        LogitVector::new(v.to_vec()).unwrap()
    }

    /// Independent softmax written out longhand.
    fn hand_softmax(z: &[f64]) -> Vec<f64> {
        let e: Vec<f64> = z.iter().map(|x| x.exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|x| x / s).collect()
    }

    #[test]
    fn combine_logits_hand_case() {
        let p = combine_logits(&lv(&[0.0; 3]), &lv(&[1.0, 0.0, 0.0]), &lv(&[0.0, 1.0, 0.0]), 1.0)
            .unwrap();
        let oracle = hand_softmax(&[1.0, -1.0, 0.0]);
        let frozen = [0.66524, 0.09003, 0.24473];
        for i in 0..3 {
            assert!((p.as_slice()[i] - oracle[i]).abs() < 1e-15);
            assert!((p.as_slice()[i] - frozen[i]).abs() < 1e-4);
        }
    }

    #[test]
    fn identity_cases_are_exact() {
        let z = lv(&[0.3, -1.2, 2.5, 0.0]);
        let a = lv(&[1.0, 7.0, -3.0, 0.5]);
        let b = lv(&[-2.0, 0.1, 4.0, 0.5]);
        assert_eq!(combine_logits(&z, &a, &b, 0.0).unwrap(), z.softmax());
        assert_eq!(combine_logits(&z, &a, &a, 3.7).unwrap(), z.softmax());
        let p = z.softmax();
        let pa = a.softmax();
        let pb = b.softmax();
        let q = combine_product_form(&p, &pa, &pb, 0.0).unwrap();
        for (x, y) in q.as_slice().iter().zip(p.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
        let q = combine_product_form(&p, &pa, &pa, 2.0).unwrap();
        for (x, y) in q.as_slice().iter().zip(p.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn product_form_matches_logit_form_on_hand_case() {
        let z = lv(&[0.0; 3]);
        let zp = lv(&[1.0, 0.0, 0.0]);
        let zm = lv(&[0.0, 1.0, 0.0]);
        let a = combine_logits(&z, &zp, &zm, 1.0).unwrap();
        let b = combine_product_form(&z.softmax(), &zp.softmax(), &zm.softmax(), 1.0).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let err = combine_logits(&lv(&[0.0; 3]), &lv(&[0.0; 2]), &lv(&[0.0; 3]), 1.0);
        assert!(matches!(err, Err(Error::LengthMismatch { expected: 3, actual: 2 })));
        let p = ProbVector::uniform(3);
        assert!(combine_product_form(&p, &ProbVector::uniform(4), &p, 1.0).is_err());
    }

    fn table(fp: u64, row: &[f64]) -> SharedProvider {
        let v: Vec<f64> = row.to_vec();
        Arc::new(TableProvider::new(Fingerprint(fp), [], ProbVector::new(v).unwrap()).unwrap())
    }

    #[test]
    fn debiased_provider_modes() {
        let base = table(1, &[0.4, 0.3, 0.2, 0.1]);
        let expert = table(1, &[0.1, 0.2, 0.3, 0.4]);
        let anti = table(1, &[0.25, 0.25, 0.4, 0.1]);
        let full = DebiasedProvider::new(
            base.clone(),
            vec![SignalSpec::new(expert.clone(), anti.clone())],
            EnsembleConfig { alpha: 1.5, mode: Mode::Full },
        )
        .unwrap();
        let ctx: &[TokenId] = &[];
        let z = base.next_logits(ctx).unwrap();
        let zp = expert.next_logits(ctx).unwrap();
        let zm = anti.next_logits(ctx).unwrap();
        let want = combine_logits(&z, &zp, &zm, 1.5).unwrap();
        let got = full.next_probs(ctx).unwrap();
        for (x, y) in got.as_slice().iter().zip(want.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }

        let none = DebiasedProvider::new(
            base.clone(),
            vec![SignalSpec::new(expert.clone(), anti.clone())],
            EnsembleConfig { alpha: 1.5, mode: Mode::None },
        )
        .unwrap();
        assert_eq!(none.next_logits(ctx).unwrap(), z);

        let anti_only = DebiasedProvider::new(
            base.clone(),
            vec![SignalSpec::new(expert.clone(), anti.clone())],
            EnsembleConfig { alpha: 2.0, mode: Mode::AntiOnly },
        )
        .unwrap();
        let got = anti_only.next_logits(ctx).unwrap();
        for i in 0..4 {
            let want = z.as_slice()[i] - 2.0 * zm.as_slice()[i];
            assert!((got.as_slice()[i] - want).abs() < 1e-12);
        }

        let expert_only = DebiasedProvider::new(
            base.clone(),
            vec![SignalSpec::new(expert, anti)],
            EnsembleConfig { alpha: 2.0, mode: Mode::ExpertOnly },
        )
        .unwrap();
        let got = expert_only.next_logits(ctx).unwrap();
        for i in 0..4 {
            let want = z.as_slice()[i] + 2.0 * zp.as_slice()[i];
            assert!((got.as_slice()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn absent_anti_expert_counts_as_zero() {
        let base = table(1, &[0.4, 0.3, 0.2, 0.1]);
        let expert = table(1, &[0.1, 0.2, 0.3, 0.4]);
        let spec = SignalSpec { expert: Some(expert.clone()), anti_expert: None, weight: 1.0 };
        let d = DebiasedProvider::new(base.clone(), vec![spec], EnsembleConfig::default()).unwrap();
        let got = d.next_logits(&[]).unwrap();
        let z = base.next_logits(&[]).unwrap();
        let zp = expert.next_logits(&[]).unwrap();
        for i in 0..4 {
            assert!((got.as_slice()[i] - (z.as_slice()[i] + zp.as_slice()[i])).abs() < 1e-12);
        }
        let empty = SignalSpec { expert: None, anti_expert: None, weight: 1.0 };
        assert!(DebiasedProvider::new(base, vec![empty], EnsembleConfig::default()).is_err());
    }

    #[test]
    fn cascade_linearity() {
        let base = table(1, &[0.4, 0.3, 0.2, 0.1]);
        let e = table(1, &[0.1, 0.2, 0.3, 0.4]);
        let a = table(1, &[0.25, 0.25, 0.4, 0.1]);
        let cfg = EnsembleConfig { alpha: 1.0, mode: Mode::Full };
        let one = DebiasedProvider::new(base.clone(), vec![SignalSpec::new(e.clone(), a.clone())], cfg)
            .unwrap();
        let two = DebiasedProvider::new(
            base,
            vec![
                SignalSpec::new(e.clone(), a.clone()).with_weight(0.5),
                SignalSpec::new(e, a).with_weight(0.5),
            ],
            cfg,
        )
        .unwrap();
        let x = one.next_logits(&[]).unwrap();
        let y = two.next_logits(&[]).unwrap();
        for (p, q) in x.as_slice().iter().zip(y.as_slice()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn incompatible_providers_rejected() {
        let base = table(1, &[0.5, 0.5]);
        let other = table(2, &[0.5, 0.5]);
        let err = DebiasedProvider::new(
            base.clone(),
            vec![SignalSpec::new(other, base.clone())],
            EnsembleConfig::default(),
        )
        .err()
        .unwrap();
        assert!(matches!(err, Error::Incompatible { .. }));
        assert!(DebiasedProvider::new(
            base.clone(),
            vec![SignalSpec::new(base.clone(), base)],
            EnsembleConfig { alpha: -1.0, mode: Mode::Full }
        )
        .is_err());
    }

    #[test]
    fn shift_report_zero_alpha_and_unknown_tokens() {
        let vocab = Vocabulary::build(&["doctor nurse surgeon the woman"], 1).unwrap();
        let base: SharedProvider = Arc::new(UniformProvider::for_vocab(&vocab));
        let e = Arc::new(
            TableProvider::new(vocab.fingerprint(), [], {
                let mut v = vec![0.1; 7];
                v[2] = 0.4;
                ProbVector::new(v).unwrap()
            })
            .unwrap(),
        );
        let d = DebiasedProvider::new(
            base.clone(),
            vec![SignalSpec::new(e.clone(), base.clone())],
            EnsembleConfig { alpha: 0.0, mode: Mode::Full },
        )
        .unwrap();
        let r = probability_shift(base.as_ref(), &d, &vocab, "the woman", &["doctor", "nurse"]).unwrap();
        assert!(r.rows.iter().all(|row| row.shift == 0.0 && row.signal == 0.0));
        let err = probability_shift(base.as_ref(), &d, &vocab, "the woman", &["doctor", "pilot", "chef"])
            .unwrap_err();
        assert_eq!(err.to_string(), "unknown candidate token(s): pilot, chef");
    }

    fn logits_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
        (2usize..=64).prop_flat_map(|n| {
            (
                proptest::collection::vec(-4.0f64..4.0, n),
                proptest::collection::vec(-4.0f64..4.0, n),
                proptest::collection::vec(-4.0f64..4.0, n),
                0.0f64..5.0,
            )
        })
    }

    proptest! {
        #[test]
        fn log_odds_linearity((z, zp, zm, alpha) in logits_strategy()) {
            let p = z.as_slice();
            let base = softmax(p);
            let out = combine_logits(&lv(&z), &lv(&zp), &lv(&zm), alpha).unwrap();
            let n = z.len();
            for (i, j) in [(0, n - 1), (0, 1), (n / 2, 0)] {
                let lhs = (out.as_slice()[i] / out.as_slice()[j]).ln()
                    - (base.as_slice()[i] / base.as_slice()[j]).ln();
                let rhs = alpha * ((zp[i] - zm[i]) - (zp[j] - zm[j]));
                prop_assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
            }
        }

        #[test]
        fn constant_shift_invariance((z, zp, zm, alpha) in logits_strategy(), c in -50.0f64..50.0, which in 0usize..3) {
            let shift = |v: &Vec<f64>| v.iter().map(|x| x + c).collect::<Vec<_>>();
            let (a, b, d) = match which {
                0 => (shift(&z), zp.clone(), zm.clone()),
                1 => (z.clone(), shift(&zp), zm.clone()),
                _ => (z.clone(), zp.clone(), shift(&zm)),
            };
            let x = combine_logits(&lv(&z), &lv(&zp), &lv(&zm), alpha).unwrap();
            let y = combine_logits(&lv(&a), &lv(&b), &lv(&d), alpha).unwrap();
            for (u, v) in x.as_slice().iter().zip(y.as_slice()) {
                prop_assert!((u - v).abs() < 1e-9);
            }
            prop_assert!(ProbVector::new(y.into_inner()).is_ok());
        }

        #[test]
        fn cascade_order_is_irrelevant(rows in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 5), 5), w in proptest::collection::vec(0.0f64..2.0, 2)) {
            let provs: Vec<SharedProvider> = rows.iter().map(|r| {
                let s: f64 = r.iter().sum();
                let v: Vec<f64> = r.iter().map(|x| x / s).collect();
                table(3, &v)
            }).collect();
            let cfg = EnsembleConfig { alpha: 1.3, mode: Mode::Full };
            let s1 = SignalSpec::new(provs[1].clone(), provs[2].clone()).with_weight(w[0]);
            let s2 = SignalSpec::new(provs[3].clone(), provs[4].clone()).with_weight(w[1]);
            let ab = DebiasedProvider::new(provs[0].clone(), vec![s1.clone(), s2.clone()], cfg).unwrap();
            let ba = DebiasedProvider::new(provs[0].clone(), vec![s2, s1], cfg).unwrap();
            let x = ab.next_logits(&[]).unwrap();
            let y = ba.next_logits(&[]).unwrap();
            for (u, v) in x.as_slice().iter().zip(y.as_slice()) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
