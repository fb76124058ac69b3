use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{accumulate_backward, forward, loss, sgd_step, target_distribution, EmbeddingMatrix, SparseGradient};
use crate::corpus::{CorpusIndex, Vocabulary, Window};
use crate::{Error, Result};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub n_negatives: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub min_count: u64,
    /// The learning rate decays linearly to `initial_lr * lr_floor_fraction`.
    pub lr_floor_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 300,
            n_negatives: 2,
            batch_size: 100,
            initial_lr: 0.0001,
            epochs: 1,
            seed: 0,
            min_count: crate::corpus::DEFAULT_MIN_COUNT,
            lr_floor_fraction: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.dim == 0 {
            return fail("dim must be at least 1");
        }
        if self.n_negatives == 0 {
            return fail("n_negatives must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return fail("initial_lr must be positive");
        }
        if self.min_count == 0 {
            return fail("min_count must be at least 1");
        }
        if !(0.0..1.0).contains(&self.lr_floor_fraction) {
            return fail("lr_floor_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

/// `initial_lr * max(floor_fraction, 1 - batches_done / total_batches)`
pub fn lr_schedule(initial_lr: f64, batches_done: u64, total_batches: u64, floor_fraction: f64) -> Result<f64> {
    if total_batches == 0 {
        return Err(Error::InvalidConfig("schedule needs at least one batch".into()));
    }
    if batches_done > total_batches {
        return Err(Error::InvalidConfig(format!(
            "batch {batches_done} beyond schedule of {total_batches}"
        )));
    }
    if !(0.0..1.0).contains(&floor_fraction) {
        return Err(Error::InvalidConfig("floor fraction must lie in [0, 1)".into()));
    }
    let remaining = 1.0 - batches_done as f64 / total_batches as f64;
    Ok(initial_lr * remaining.max(floor_fraction))
}

/// Position in the run; together with the matrix this is all that is needed
/// to resume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainState {
    pub seed: u64,
    pub epochs_done: u64,
    pub batches_done: u64,
    pub total_batches: u64,
}

/// One progress report, covering the examples since the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct Progress {
    pub epoch: u64,
    pub batches_done: u64,
    pub examples_seen: u64,
    pub mean_loss: f64,
    pub examples_per_sec: f64,
    pub skipped: u64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingMetrics {
    /// Mean loss of every batch, in training order. Batches where every
    /// example was skipped are recorded as NaN.
    pub batch_losses: Vec<f64>,
    pub examples: u64,
    pub skipped_examples: u64,
    pub progress: Vec<Progress>,
}

struct Interval {
    started: Instant,
    loss_sum: f64,
    examples: u64,
    skipped: u64,
}

impl Interval {
    fn new() -> Self {
        Interval {
            started: Instant::now(),
            loss_sum: 0.0,
            examples: 0,
            skipped: 0,
        }
    }
}

/// Single-threaded SGD trainer over a corpus index.
pub struct Trainer<'a> {
    index: &'a CorpusIndex,
    config: TrainConfig,
    matrix: EmbeddingMatrix,
    state: TrainState,
    windows: Vec<Window>,
    metrics: TrainingMetrics,
    progress_every: u64,
}

impl<'a> Trainer<'a> {
    /// Fresh run with a randomly initialised matrix.
    pub fn new(index: &'a CorpusIndex, vocab_size: usize, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let matrix = EmbeddingMatrix::random(vocab_size, config.dim, config.seed)?;
        let windows: Vec<Window> = index.windows().collect();
        let state = TrainState {
            seed: config.seed,
            epochs_done: 0,
            batches_done: 0,
            total_batches: config.epochs as u64 * batches_per_epoch(windows.len(), config.batch_size),
        };
        Self::assemble(index, config, matrix, state, windows)
    }

    /// Continues a run from a saved matrix and state. Resumption is only
    /// possible at an epoch boundary.
    pub fn resume(index: &'a CorpusIndex, config: TrainConfig, matrix: EmbeddingMatrix, state: TrainState) -> Result<Self> {
        config.validate()?;
        if matrix.dim() != config.dim {
            return Err(Error::InvalidConfig(format!(
                "checkpoint has dim {}, config asks for {}",
                matrix.dim(),
                config.dim
            )));
        }
        if state.seed != config.seed {
            return Err(Error::InvalidConfig("checkpoint seed differs from config seed".into()));
        }
        let windows: Vec<Window> = index.windows().collect();
        let per_epoch = batches_per_epoch(windows.len(), config.batch_size);
        if state.total_batches != config.epochs as u64 * per_epoch
            || state.batches_done != state.epochs_done * per_epoch
            || state.epochs_done > config.epochs as u64
        {
            return Err(Error::InvalidConfig(
                "checkpoint state does not match this corpus and config".into(),
            ));
        }
        Self::assemble(index, config, matrix, state, windows)
    }

    fn assemble(
        index: &'a CorpusIndex,
        config: TrainConfig,
        matrix: EmbeddingMatrix,
        state: TrainState,
        windows: Vec<Window>,
    ) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if let Some(max) = index.sentences().iter().flat_map(|s| &s.token_ids).max() {
            if *max as usize >= matrix.vocab_size() {
                return Err(Error::InvalidConfig(format!(
                    "corpus token id {max} outside a vocabulary of {}",
                    matrix.vocab_size()
                )));
            }
        }
        Ok(Trainer {
            index,
            config,
            matrix,
            state,
            windows,
            metrics: TrainingMetrics::default(),
            progress_every: 10_000,
        })
    }

    /// Report progress every `n` examples (0 disables interval reports; an
    /// end-of-epoch report is always emitted).
    pub fn with_progress_every(mut self, n: u64) -> Self {
        self.progress_every = n;
        self
    }

    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    pub fn state(&self) -> TrainState {
        self.state
    }

    pub fn metrics(&self) -> &TrainingMetrics {
        &self.metrics
    }

    pub fn num_windows(&self) -> usize {
        self.windows.len()
    }

    pub fn is_finished(&self) -> bool {
        self.state.epochs_done >= self.config.epochs as u64
    }

    pub fn into_parts(self) -> (EmbeddingMatrix, TrainingMetrics, TrainState) {
        (self.matrix, self.metrics, self.state)
    }

    /// Runs all remaining epochs.
    pub fn run(&mut self, sink: &mut dyn FnMut(&Progress)) -> Result<()> {
        while !self.is_finished() {
            self.run_epoch(sink)?;
        }
        Ok(())
    }

    /// Runs one epoch. Each epoch draws its shuffle and negatives from its
    /// own random stream, so a resumed run replays exactly.
    pub fn run_epoch(&mut self, sink: &mut dyn FnMut(&Progress)) -> Result<()> {
        if self.is_finished() {
            return Ok(());
        }
        let epoch = self.state.epochs_done;
        let mut rng = ChaCha8Rng::seed_from_u64(self.state.seed);
        rng.set_stream(epoch + 1);
        let mut order: Vec<usize> = (0..self.windows.len()).collect();
        order.shuffle(&mut rng);

        let cfg = &self.config;
        let mut grad = SparseGradient::new(cfg.dim);
        let mut interval = Interval::new();
        let mut lr = 0.0;

        for batch in order.chunks(cfg.batch_size) {
            grad.clear();
            let mut batch_loss = 0.0;
            let mut used = 0u64;
            for &w in batch {
                let window = &self.windows[w];
                let (example, _) = self.index.sample_example(window, cfg.n_negatives, &mut rng)?;
                let trace = match forward(&self.matrix, &example) {
                    Ok(trace) => trace,
                    Err(Error::ZeroVector) => {
                        interval.skipped += 1;
                        self.metrics.skipped_examples += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let target = target_distribution(example.positives.len(), example.negatives.len())?;
                batch_loss += loss(&trace, &target)?;
                accumulate_backward(&example, &trace, &target, 1.0, &mut grad)?;
                used += 1;
            }
            lr = lr_schedule(
                cfg.initial_lr,
                self.state.batches_done,
                self.state.total_batches,
                cfg.lr_floor_fraction,
            )?;
            if used > 0 {
                grad.scale(1.0 / used as f64);
                sgd_step(&mut self.matrix, &grad, lr)?;
                self.metrics.batch_losses.push(batch_loss / used as f64);
            } else {
                self.metrics.batch_losses.push(f64::NAN);
            }
            self.state.batches_done += 1;
            self.metrics.examples += used;
            interval.examples += used;
            interval.loss_sum += batch_loss;

            if self.progress_every > 0 && interval.examples + interval.skipped >= self.progress_every {
                let report = self.report(epoch, &interval, lr);
                sink(&report);
                self.metrics.progress.push(report);
                interval = Interval::new();
            }
        }
        if interval.examples + interval.skipped > 0 {
            let report = self.report(epoch, &interval, lr);
            sink(&report);
            self.metrics.progress.push(report);
        }
        self.state.epochs_done += 1;
        Ok(())
    }

    fn report(&self, epoch: u64, interval: &Interval, lr: f64) -> Progress {
        let secs = interval.started.elapsed().as_secs_f64();
        Progress {
            epoch,
            batches_done: self.state.batches_done,
            examples_seen: self.metrics.examples,
            mean_loss: if interval.examples > 0 {
                interval.loss_sum / interval.examples as f64
            } else {
                f64::NAN
            },
            examples_per_sec: if secs > 0.0 {
                interval.examples as f64 / secs
            } else {
                f64::INFINITY
            },
            skipped: interval.skipped,
            lr,
        }
    }
}

fn batches_per_epoch(windows: usize, batch_size: usize) -> u64 {
    windows.div_ceil(batch_size) as u64
}

/// Trains from scratch for `config.epochs` epochs.
pub fn train(
    index: &CorpusIndex,
    vocab: &Vocabulary,
    config: &TrainConfig,
    sink: &mut dyn FnMut(&Progress),
) -> Result<(EmbeddingMatrix, TrainingMetrics)> {
    let mut trainer = Trainer::new(index, vocab.len(), config.clone())?;
    trainer.run(sink)?;
    let (matrix, metrics, _) = trainer.into_parts();
    Ok((matrix, metrics))
}
