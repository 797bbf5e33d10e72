//! Trainable objects that consume a plan and report per-example costs.
//!
//! [`DecaySimLearner`] is a closed-form simulator where every cost is an
//! exact function of how many times the example was trained. It makes the
//! sampler logic testable without optimization noise. [`SoftmaxSeqLearner`]
//! is a bigram next-token predictor trained by SGD on synthetic Markov data,
//! with noise examples built by shuffling targets.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{CostAggregation, DecaySimConfig, LearnerConfig, SoftmaxSeqConfig};
use crate::ledger::SentenceId;
use crate::samplers::IterationPlan;
use crate::{round_count, Error, Result};

const GENERATION_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

pub trait Learner {
    /// Number of training examples.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trains every selected example for `epochs` epochs and returns the cost
    /// of exactly those examples.
    fn train_iteration(
        &mut self,
        plan: &IterationPlan,
        epochs: u32,
    ) -> Result<BTreeMap<SentenceId, f64>>;

    fn costs(&self, ids: &[SentenceId]) -> Result<BTreeMap<SentenceId, f64>>;

    /// Mean cost over a held-out set that never appears in a plan.
    fn dev_cost(&self) -> f64;

    fn noise_flags(&self) -> Vec<bool>;

    /// Plain-text dump of the training data, one example per line.
    fn dataset_lines(&self) -> Vec<String>;
}

fn check_ids(ids: &[SentenceId], len: usize) -> Result<()> {
    match ids.iter().find(|id| id.0 >= len) {
        Some(&bad) => Err(Error::UnknownSentence(bad)),
        None => Ok(()),
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn noise_mask<R: Rng>(n: usize, noise_fraction: f64, rng: &mut R) -> Vec<bool> {
    let n_noise = round_count(noise_fraction * n as f64).min(n);
    let mut mask = vec![false; n];
    for i in rand::seq::index::sample(rng, n, n_noise) {
        mask[i] = true;
    }
    mask
}

// ---------------------------------------------------------------------------
// Decay simulator

/// Cost curve `floor + initial * exp(-rate * n)` of one example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub initial: f64,
    pub rate: f64,
    pub floor: f64,
}

impl DecayParams {
    pub fn cost_after(&self, trainings: u32) -> f64 {
        self.floor + self.initial * (-self.rate * trainings as f64).exp()
    }

    /// Fraction of the reducible cost already removed.
    pub fn progress(&self, trainings: u32) -> f64 {
        1.0 - (-self.rate * trainings as f64).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySimLearner {
    params: Vec<DecayParams>,
    trainings: Vec<u32>,
    noise: Vec<bool>,
    /// `(initial, floor)` of the held-out examples.
    holdout: Vec<(f64, f64)>,
    aggregation: CostAggregation,
}

impl DecaySimLearner {
    pub fn new(params: Vec<DecayParams>, holdout: Vec<(f64, f64)>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidCorpus(
                "decay simulator needs at least one example".into(),
            ));
        }
        for p in &params {
            if !(p.initial > 0.0 && p.rate >= 0.0 && p.floor >= 0.0)
                || !(p.initial.is_finite() && p.rate.is_finite() && p.floor.is_finite())
            {
                return Err(Error::InvalidCorpus(format!("bad decay parameters {p:?}")));
            }
        }
        let n = params.len();
        Ok(Self {
            noise: params.iter().map(|p| p.rate == 0.0).collect(),
            params,
            trainings: vec![0; n],
            holdout,
            aggregation: CostAggregation::LastEpoch,
        })
    }

    /// Draws a mixed-learnability corpus. Noise examples never improve (rate 0).
    pub fn generate(
        config: &DecaySimConfig,
        n: usize,
        noise_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = rng_for(seed, GENERATION_STREAM);
        let noise = noise_mask(n, noise_fraction, &mut rng);
        let uniform = |rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]| {
            if hi > lo {
                rng.gen_range(lo..hi)
            } else {
                lo
            }
        };
        let params = noise
            .iter()
            .map(|&is_noise| {
                let initial = uniform(&mut rng, config.initial_cost);
                let floor = uniform(&mut rng, config.floor);
                let class: f64 = rng.gen();
                let range = if class < config.fast_fraction {
                    config.fast_rate
                } else if class < config.fast_fraction + config.medium_fraction {
                    config.medium_rate
                } else {
                    config.slow_rate
                };
                let rate = uniform(&mut rng, range);
                DecayParams {
                    initial,
                    rate: if is_noise { 0.0 } else { rate },
                    floor,
                }
            })
            .collect();
        let holdout = (0..config.holdout_size)
            .map(|_| {
                let initial = uniform(&mut rng, config.initial_cost);
                (initial, uniform(&mut rng, config.floor))
            })
            .collect();
        let mut learner = Self::new(params, holdout)?;
        learner.noise = noise;
        learner.aggregation = config.cost_aggregation;
        Ok(learner)
    }

    pub fn params(&self) -> &[DecayParams] {
        &self.params
    }

    pub fn trainings(&self) -> &[u32] {
        &self.trainings
    }

    /// Mean progress over examples that can improve at all.
    pub fn skill(&self) -> f64 {
        let (sum, count) = self
            .params
            .iter()
            .zip(&self.trainings)
            .filter(|(p, _)| p.rate > 0.0)
            .fold((0.0, 0usize), |(s, c), (p, &n)| (s + p.progress(n), c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

impl Learner for DecaySimLearner {
    fn len(&self) -> usize {
        self.params.len()
    }

    fn train_iteration(
        &mut self,
        plan: &IterationPlan,
        epochs: u32,
    ) -> Result<BTreeMap<SentenceId, f64>> {
        check_ids(&plan.selected, self.len())?;
        let mut out = BTreeMap::new();
        for &id in &plan.selected {
            let p = self.params[id.0];
            let start = self.trainings[id.0];
            let end = start + epochs;
            let cost = match self.aggregation {
                CostAggregation::LastEpoch => p.cost_after(end),
                CostAggregation::Mean => {
                    (start + 1..=end).map(|n| p.cost_after(n)).sum::<f64>() / epochs as f64
                }
            };
            self.trainings[id.0] = end;
            out.insert(id, cost);
        }
        Ok(out)
    }

    fn costs(&self, ids: &[SentenceId]) -> Result<BTreeMap<SentenceId, f64>> {
        check_ids(ids, self.len())?;
        Ok(ids
            .iter()
            .map(|&id| (id, self.params[id.0].cost_after(self.trainings[id.0])))
            .collect())
    }

    /// Held-out examples improve with the shared skill level:
    /// `floor + initial * (1 - skill)`.
    fn dev_cost(&self) -> f64 {
        if self.holdout.is_empty() {
            return 0.0;
        }
        let remaining = 1.0 - self.skill();
        self.holdout
            .iter()
            .map(|&(initial, floor)| floor + initial * remaining)
            .sum::<f64>()
            / self.holdout.len() as f64
    }

    fn noise_flags(&self) -> Vec<bool> {
        self.noise.clone()
    }

    fn dataset_lines(&self) -> Vec<String> {
        self.params
            .iter()
            .zip(&self.noise)
            .map(|(p, &noise)| format!("{}\t{} {} {}", noise as u8, p.initial, p.rate, p.floor))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Softmax next-token predictor

/// A token sequence split into (input, target) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqExample {
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
    pub source: usize,
    pub noise: bool,
}

impl SeqExample {
    pub fn from_tokens(tokens: &[usize], source: usize) -> Self {
        Self {
            inputs: tokens[..tokens.len() - 1].to_vec(),
            targets: tokens[1..].to_vec(),
            source,
            noise: false,
        }
    }

    /// The sequence as the learner sees it: first input then every target.
    pub fn tokens(&self) -> Vec<usize> {
        self.inputs
            .iter()
            .take(1)
            .chain(&self.targets)
            .copied()
            .collect()
    }
}

/// Markov source over a contiguous block of the vocabulary.
#[derive(Debug, Clone)]
struct MarkovSource {
    first_token: usize,
    width: usize,
    /// Probability of stepping to the designated successor.
    peak: f64,
    successor: Vec<usize>,
}

impl MarkovSource {
    fn sample(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut state = rng.gen_range(0..self.width);
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.first_token + state);
            state = if rng.gen::<f64>() < self.peak {
                self.successor[state]
            } else {
                rng.gen_range(0..self.width)
            };
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxSeqLearner {
    vocab: usize,
    /// Row-major `vocab x vocab` logits; row = current token.
    weights: Vec<f64>,
    learning_rate: f64,
    train: Vec<SeqExample>,
    dev: Vec<SeqExample>,
    per_token_cost: bool,
    aggregation: CostAggregation,
    #[serde(with = "crate::ledger::rng_state")]
    rng: ChaCha8Rng,
}

fn log_softmax_at(row: &[f64], target: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    row[target] - lse
}

impl SoftmaxSeqLearner {
    pub fn new(
        vocab: usize,
        train: Vec<SeqExample>,
        dev: Vec<SeqExample>,
        learning_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        if vocab < 2 {
            return Err(Error::InvalidCorpus(
                "vocabulary needs at least two tokens".into(),
            ));
        }
        if train.is_empty() {
            return Err(Error::InvalidCorpus("no training sequences".into()));
        }
        for ex in train.iter().chain(&dev) {
            if ex.inputs.len() != ex.targets.len() || ex.inputs.is_empty() {
                return Err(Error::InvalidCorpus(
                    "example needs matching nonempty inputs and targets".into(),
                ));
            }
            if ex.inputs.iter().chain(&ex.targets).any(|&t| t >= vocab) {
                return Err(Error::InvalidCorpus(format!(
                    "token outside vocabulary of {vocab}"
                )));
            }
        }
        Ok(Self {
            vocab,
            weights: vec![0.0; vocab * vocab],
            learning_rate,
            train,
            dev,
            per_token_cost: false,
            aggregation: CostAggregation::LastEpoch,
            rng: rng_for(seed, SHUFFLE_STREAM),
        })
    }

    /// Synthetic corpus from a mixture of Markov sources.
    ///
    /// The vocabulary is split into one block per source. The first
    /// `easy_sources` sources are frequent with peaked transitions; the rest
    /// are rare with flatter transitions. A `noise_fraction` of the training
    /// examples are misaligned: their targets are shuffled within the
    /// sequence. The held-out set is always clean.
    pub fn generate(
        config: &SoftmaxSeqConfig,
        n: usize,
        noise_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        if config.sources == 0 || config.vocab_size < 2 * config.sources {
            return Err(Error::config(
                "learner.vocab_size",
                "needs at least two tokens per source",
            ));
        }
        let mut rng = rng_for(seed, GENERATION_STREAM);
        let width = config.vocab_size / config.sources;
        let sources: Vec<MarkovSource> = (0..config.sources)
            .map(|s| {
                let mut successor: Vec<usize> = (0..width).collect();
                successor.shuffle(&mut rng);
                let easy = s < config.easy_sources;
                MarkovSource {
                    first_token: s * width,
                    width,
                    peak: if easy {
                        config.easy_peak
                    } else {
                        config.hard_peak
                    },
                    successor,
                }
            })
            .collect();
        let n_easy = config.easy_sources.min(config.sources);
        let n_hard = config.sources - n_easy;
        let mixture: Vec<f64> = (0..config.sources)
            .map(|s| {
                if s < n_easy {
                    (1.0 - config.hard_share) / n_easy as f64
                } else {
                    config.hard_share / n_hard as f64
                }
            })
            .collect();
        let draw = |rng: &mut ChaCha8Rng| {
            let mut u: f64 = rng.gen();
            let mut source = config.sources - 1;
            for (s, &m) in mixture.iter().enumerate() {
                if u < m {
                    source = s;
                    break;
                }
                u -= m;
            }
            SeqExample::from_tokens(&sources[source].sample(config.seq_len, rng), source)
        };

        let noise = noise_mask(n, noise_fraction, &mut rng);
        let train = noise
            .iter()
            .map(|&is_noise| {
                let mut ex = draw(&mut rng);
                if is_noise {
                    ex.targets.shuffle(&mut rng);
                    ex.noise = true;
                }
                ex
            })
            .collect();
        let dev = (0..config.dev_size).map(|_| draw(&mut rng)).collect();

        let mut learner = Self::new(config.vocab_size, train, dev, config.learning_rate, seed)?;
        learner.per_token_cost = config.per_token_cost;
        learner.aggregation = config.cost_aggregation;
        Ok(learner)
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) {
        assert_eq!(weights.len(), self.vocab * self.vocab);
        self.weights = weights;
    }

    pub fn examples(&self) -> &[SeqExample] {
        &self.train
    }

    fn row<'a>(&self, weights: &'a [f64], token: usize) -> &'a [f64] {
        &weights[token * self.vocab..(token + 1) * self.vocab]
    }

    /// Summed next-token negative log-likelihood of `example` under `weights`.
    pub fn nll_with(&self, weights: &[f64], example: &SeqExample) -> f64 {
        -example
            .inputs
            .iter()
            .zip(&example.targets)
            .map(|(&x, &y)| log_softmax_at(self.row(weights, x), y))
            .sum::<f64>()
    }

    fn reported_cost(&self, example: &SeqExample) -> f64 {
        let nll = self.nll_with(&self.weights, example).max(0.0);
        if self.per_token_cost {
            nll / example.targets.len() as f64
        } else {
            nll
        }
    }

    /// Gradient of [`nll_with`](Self::nll_with) at the current weights.
    pub fn gradient(&self, example: &SeqExample) -> Vec<f64> {
        let v = self.vocab;
        let mut grad = vec![0.0; v * v];
        for (&x, &y) in example.inputs.iter().zip(&example.targets) {
            let row = self.row(&self.weights, x);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|z| (z - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            let g = &mut grad[x * v..(x + 1) * v];
            for (gj, e) in g.iter_mut().zip(&exps) {
                *gj += e / total;
            }
            g[y] -= 1.0;
        }
        grad
    }

    fn sgd_step(&mut self, index: usize) {
        let grad = self.gradient(&self.train[index]);
        for (w, g) in self.weights.iter_mut().zip(&grad) {
            *w -= self.learning_rate * g;
        }
    }

    /// Largest relative error between the analytic gradient and central
    /// finite differences (step `1e-5`) over every weight and every training
    /// example. Intended for small instances only.
    pub fn gradient_check(&self) -> f64 {
        const STEP: f64 = 1e-5;
        let mut worst = 0.0f64;
        let mut probe = self.weights.clone();
        for example in &self.train {
            let analytic = self.gradient(example);
            for k in 0..probe.len() {
                let orig = probe[k];
                probe[k] = orig + STEP;
                let up = self.nll_with(&probe, example);
                probe[k] = orig - STEP;
                let down = self.nll_with(&probe, example);
                probe[k] = orig;
                let numeric = (up - down) / (2.0 * STEP);
                let denom = analytic[k].abs().max(numeric.abs()).max(1e-8);
                worst = worst.max((analytic[k] - numeric).abs() / denom);
            }
        }
        worst
    }
}

impl Learner for SoftmaxSeqLearner {
    fn len(&self) -> usize {
        self.train.len()
    }

    fn train_iteration(
        &mut self,
        plan: &IterationPlan,
        epochs: u32,
    ) -> Result<BTreeMap<SentenceId, f64>> {
        check_ids(&plan.selected, self.len())?;
        let mut order: Vec<usize> = plan.selected.iter().map(|id| id.0).collect();
        let mut sums: BTreeMap<SentenceId, f64> = BTreeMap::new();
        for _ in 0..epochs {
            order.shuffle(&mut self.rng);
            for &i in &order {
                self.sgd_step(i);
            }
            if self.aggregation == CostAggregation::Mean {
                for &id in &plan.selected {
                    *sums.entry(id).or_default() += self.reported_cost(&self.train[id.0]);
                }
            }
        }
        Ok(match self.aggregation {
            CostAggregation::LastEpoch => plan
                .selected
                .iter()
                .map(|&id| (id, self.reported_cost(&self.train[id.0])))
                .collect(),
            CostAggregation::Mean => sums
                .into_iter()
                .map(|(id, s)| (id, s / epochs as f64))
                .collect(),
        })
    }

    fn costs(&self, ids: &[SentenceId]) -> Result<BTreeMap<SentenceId, f64>> {
        check_ids(ids, self.len())?;
        Ok(ids
            .iter()
            .map(|&id| (id, self.reported_cost(&self.train[id.0])))
            .collect())
    }

    fn dev_cost(&self) -> f64 {
        if self.dev.is_empty() {
            return 0.0;
        }
        self.dev
            .iter()
            .map(|ex| self.nll_with(&self.weights, ex))
            .sum::<f64>()
            / self.dev.len() as f64
    }

    fn noise_flags(&self) -> Vec<bool> {
        self.train.iter().map(|ex| ex.noise).collect()
    }

    fn dataset_lines(&self) -> Vec<String> {
        self.train
            .iter()
            .map(|ex| {
                let tokens: Vec<String> = ex.tokens().iter().map(|t| t.to_string()).collect();
                format!("{}\t{}\t{}", tokens.join(" "), ex.source, ex.noise as u8)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------

/// Either built-in learner, serializable into checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)] // one per run; boxing buys nothing
pub enum AnyLearner {
    DecaySim(DecaySimLearner),
    SoftmaxSeq(SoftmaxSeqLearner),
}

impl AnyLearner {
    pub fn from_config(
        config: &LearnerConfig,
        n: usize,
        noise_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        Ok(match config {
            LearnerConfig::DecaySim(c) => {
                AnyLearner::DecaySim(DecaySimLearner::generate(c, n, noise_fraction, seed)?)
            }
            LearnerConfig::SoftmaxSeq(c) => {
                AnyLearner::SoftmaxSeq(SoftmaxSeqLearner::generate(c, n, noise_fraction, seed)?)
            }
        })
    }

    fn inner(&self) -> &dyn Learner {
        match self {
            AnyLearner::DecaySim(l) => l,
            AnyLearner::SoftmaxSeq(l) => l,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Learner {
        match self {
            AnyLearner::DecaySim(l) => l,
            AnyLearner::SoftmaxSeq(l) => l,
        }
    }
}

impl Learner for AnyLearner {
    fn len(&self) -> usize {
        self.inner().len()
    }

    fn train_iteration(
        &mut self,
        plan: &IterationPlan,
        epochs: u32,
    ) -> Result<BTreeMap<SentenceId, f64>> {
        self.inner_mut().train_iteration(plan, epochs)
    }

    fn costs(&self, ids: &[SentenceId]) -> Result<BTreeMap<SentenceId, f64>> {
        self.inner().costs(ids)
    }

    fn dev_cost(&self) -> f64 {
        self.inner().dev_cost()
    }

    fn noise_flags(&self) -> Vec<bool> {
        self.inner().noise_flags()
    }

    fn dataset_lines(&self) -> Vec<String> {
        self.inner().dataset_lines()
    }
}
