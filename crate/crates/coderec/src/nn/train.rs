//! Minibatch training with Nadam, seeded shuffling, early stopping and
//! best-epoch weight restoration, plus a small exhaustive grid search.

use super::layers::{cross_entropy, softmax_ce_grad, softmax_rows, Mode};
use super::optim::{Nadam, NadamConfig};
use super::{ModelConfig, Network};
use crate::rng;
use crate::{Error, Result};

/// Sub-seed stream for the per-epoch shuffle order.
const STREAM_SHUFFLE: u64 = 1;
/// Sub-seed stream for dropout masks.
const STREAM_DROPOUT: u64 = 2;

// ---------------------------------------------------------------------------
// Configuration and views
// ---------------------------------------------------------------------------

/// Training hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Consecutive epochs without sufficient validation improvement before
    /// stopping.
    pub patience: usize,
    /// Minimum absolute validation-loss improvement that resets the patience
    /// counter.
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let nadam = NadamConfig::default();
        Self {
            max_epochs: 100,
            batch_size: 128,
            learning_rate: nadam.learning_rate,
            beta1: nadam.beta1,
            beta2: nadam.beta2,
            epsilon: nadam.epsilon,
            patience: 10,
            min_delta: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::argument("max epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::argument("batch size must be at least 1"));
        }
        if self.patience == 0 {
            return Err(Error::argument("early-stop patience must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::argument("learning rate must be positive and finite"));
        }
        if !(self.min_delta.is_finite() && self.min_delta >= 0.0) {
            return Err(Error::argument("early-stop tolerance must be non-negative"));
        }
        Ok(())
    }

    fn nadam(&self) -> NadamConfig {
        NadamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Borrowed view over a flat feature matrix and its labels.
#[derive(Debug, Clone, Copy)]
pub struct DataView<'a> {
    /// `len x feature_len` row-major features.
    pub features: &'a [f32],
    pub feature_len: usize,
    pub labels: &'a [u16],
}

impl<'a> DataView<'a> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.features[i * self.feature_len..(i + 1) * self.feature_len]
    }

    fn validate(&self, net_input_len: usize, classes: usize) -> Result<()> {
        if self.feature_len == 0 || self.features.len() != self.labels.len() * self.feature_len {
            return Err(Error::argument(format!(
                "feature matrix of {} values does not factor as {} rows x {} columns",
                self.features.len(),
                self.labels.len(),
                self.feature_len
            )));
        }
        if self.feature_len != net_input_len {
            return Err(Error::argument(format!(
                "feature length {} does not match the network input length {}",
                self.feature_len, net_input_len
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| (l as usize) >= classes) {
            return Err(Error::argument(format!(
                "label {bad} is out of range for {classes} classes"
            )));
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Result of a training run; the network itself holds the best-epoch weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_val_acc: f64,
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

/// Mean loss and accuracy of `net` on the given rows, in inference mode.
pub fn evaluate(
    net: &mut Network<f32>,
    data: DataView<'_>,
    indices: &[usize],
    batch_size: usize,
) -> Result<(f64, f64)> {
    if indices.is_empty() {
        return Err(Error::argument("evaluation needs at least one sample"));
    }
    let classes = net.classes();
    let mut scratch = rng::chacha(0);
    let mut buf: Vec<f32> = Vec::with_capacity(batch_size * data.feature_len);
    let mut labels: Vec<u16> = Vec::with_capacity(batch_size);
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in indices.chunks(batch_size.max(1)) {
        buf.clear();
        labels.clear();
        for &i in chunk {
            buf.extend_from_slice(data.row(i));
            labels.push(data.labels[i]);
        }
        let mut probs = net.forward(&buf, chunk.len(), Mode::Eval, &mut scratch)?;
        softmax_rows(&mut probs, classes);
        loss_sum += cross_entropy(&probs, &labels, classes) * chunk.len() as f64;
        for (row, &label) in probs.chunks_exact(classes).zip(&labels) {
            let mut best = 0;
            for (j, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = j;
                }
            }
            if best == label as usize {
                correct += 1;
            }
        }
    }
    Ok((loss_sum / indices.len() as f64, correct as f64 / indices.len() as f64))
}

/// Trains `net` in place and leaves it holding the weights of the best
/// validation epoch.
///
/// Each epoch shuffles the training rows with a seed derived from
/// `(config seed, epoch)`, so runs are bit-reproducible. Batches with fewer
/// than 2 rows (only ever the trailing remainder) are skipped because batch
/// norm cannot form statistics on them.
pub fn train(
    net: &mut Network<f32>,
    data: DataView<'_>,
    train_idx: &[usize],
    val_idx: &[usize],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_progress(net, data, train_idx, val_idx, config, &mut |_| {})
}

/// [`train`] with a callback invoked after every completed epoch, for live
/// progress reporting on long runs.
pub fn train_with_progress(
    net: &mut Network<f32>,
    data: DataView<'_>,
    train_idx: &[usize],
    val_idx: &[usize],
    config: &TrainConfig,
    progress: &mut dyn FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    config.validate()?;
    data.validate(net.input_len(), net.classes())?;
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::argument("training and validation sets must be non-empty"));
    }
    if let Some(&bad) = train_idx.iter().chain(val_idx).find(|&&i| i >= data.len()) {
        return Err(Error::argument(format!(
            "row index {bad} is out of range for {} samples",
            data.len()
        )));
    }

    let classes = net.classes();
    let mut optimizer: Nadam<f32> = Nadam::new(config.nadam());
    let shuffle_master = rng::derive_seed(config.seed, STREAM_SHUFFLE);
    let dropout_master = rng::derive_seed(config.seed, STREAM_DROPOUT);

    let mut history = Vec::new();
    let mut best_val_loss = f64::INFINITY;
    let mut best_val_acc = 0.0;
    let mut best_epoch = 0usize;
    let mut best_state: Vec<Vec<f32>> = Vec::new();
    let mut stall = 0usize;

    let mut order = train_idx.to_vec();
    let mut buf: Vec<f32> = Vec::with_capacity(config.batch_size * data.feature_len);
    let mut labels: Vec<u16> = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.max_epochs {
        let mut shuffle_rng = rng::chacha(rng::derive_seed(shuffle_master, epoch as u64));
        rng::shuffle(&mut order, &mut shuffle_rng);
        let mut dropout_rng = rng::chacha(rng::derive_seed(dropout_master, epoch as u64));

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut seen = 0usize;
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            buf.clear();
            labels.clear();
            for &i in chunk {
                buf.extend_from_slice(data.row(i));
                labels.push(data.labels[i]);
            }
            let logits = net.forward(&buf, chunk.len(), Mode::Train, &mut dropout_rng)?;
            let mut probs = logits;
            softmax_rows(&mut probs, classes);
            let loss = cross_entropy(&probs, &labels, classes);
            if !loss.is_finite() {
                return Err(Error::training(format!("loss diverged at epoch {epoch}")));
            }
            loss_sum += loss * chunk.len() as f64;
            for (row, &label) in probs.chunks_exact(classes).zip(&labels) {
                let mut best = 0;
                for (j, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = j;
                    }
                }
                if best == label as usize {
                    correct += 1;
                }
            }
            seen += chunk.len();

            let dlogits = softmax_ce_grad(&probs, &labels, classes);
            net.zero_grads();
            net.backward(&dlogits);
            let mut params: Vec<_> = net.params_mut().into_iter().map(|(_, p)| p).collect();
            optimizer.step_params(&mut params);
        }
        if seen == 0 {
            return Err(Error::training(
                "every batch fell below the 2-row minimum batch norm needs; \
                 use a larger batch size or more training rows",
            ));
        }

        let train_loss = loss_sum / seen as f64;
        let train_acc = correct as f64 / seen as f64;
        let (val_loss, val_acc) = evaluate(net, data, val_idx, config.batch_size)?;
        if !val_loss.is_finite() {
            return Err(Error::training(format!("loss diverged at epoch {epoch}")));
        }
        let stats = EpochStats { epoch, train_loss, train_acc, val_loss, val_acc };
        progress(&stats);
        history.push(stats);

        if val_loss < best_val_loss - config.min_delta || best_state.is_empty() {
            best_val_loss = val_loss;
            best_val_acc = val_acc;
            best_epoch = epoch;
            best_state = net.export_state();
            stall = 0;
        } else {
            stall += 1;
            if stall >= config.patience {
                break;
            }
        }
    }

    net.import_state(&best_state)?;
    Ok(TrainOutcome { history, best_epoch, best_val_loss, best_val_acc })
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

/// Validation outcome for one point of a grid search.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub index: usize,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub best_epoch: usize,
}

/// Trains every architecture in `space` under the same budget and returns
/// the index with the highest validation accuracy plus the full log, one
/// entry per point.
pub fn grid_search(
    space: &[ModelConfig],
    data: DataView<'_>,
    train_idx: &[usize],
    val_idx: &[usize],
    config: &TrainConfig,
) -> Result<(usize, Vec<GridPoint>)> {
    if space.is_empty() {
        return Err(Error::argument("the architecture search space is empty"));
    }
    let mut points = Vec::with_capacity(space.len());
    let mut best = 0usize;
    for (index, model) in space.iter().enumerate() {
        let mut net = Network::<f32>::new(model, rng::derive_seed(config.seed, index as u64))?;
        let outcome = train(&mut net, data, train_idx, val_idx, config)?;
        points.push(GridPoint {
            index,
            val_loss: outcome.best_val_loss,
            val_accuracy: outcome.best_val_acc,
            best_epoch: outcome.best_epoch,
        });
        if points[index].val_accuracy > points[best].val_accuracy {
            best = index;
        }
    }
    Ok((best, points))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::super::{Activation, ConvBlockConfig};
    use super::*;
    use crate::rng::DrawExt;

    /// Two classes of 4x4x1 tensors separated by the sign of a fixed
    /// template, with mild noise.
    fn toy_data(count: usize, seed: u64) -> (Vec<f32>, Vec<u16>) {
        let mut rng = rng::chacha(seed);
        let mut features = Vec::with_capacity(count * 16);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let label = (i % 2) as u16;
            let sign = if label == 0 { 1.0 } else { -1.0 };
            for j in 0..16 {
                let template = if j % 3 == 0 { 1.0 } else { 0.4 };
                features.push((sign * template + 0.1 * rng.gaussian()) as f32);
            }
            labels.push(label);
        }
        (features, labels)
    }

    /// Two classes a linear readout cannot separate: every sample carries a
    /// random global sign, class 0 keeps the two halves of the image in
    /// agreement and class 1 flips the bottom half. Any linear functional
    /// has zero mean on both classes; detecting the flip needs a hidden
    /// nonlinearity.
    fn xor_data(count: usize, seed: u64) -> (Vec<f32>, Vec<u16>) {
        let mut rng = rng::chacha(seed);
        let mut features = Vec::with_capacity(count * 16);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let label = (i % 2) as u16;
            let s = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
            for j in 0..16 {
                let half = if j < 8 { s } else if label == 0 { s } else { -s };
                features.push((half + 0.05 * rng.gaussian()) as f32);
            }
            labels.push(label);
        }
        (features, labels)
    }

    fn toy_model() -> ModelConfig {
        ModelConfig {
            input_side: 4,
            input_channels: 1,
            conv: vec![ConvBlockConfig { kernel: 2, channels: 3, pool: 1 }],
            dense: vec![8, 2],
            dropout: 0.0,
            activation: Activation::Relu,
        }
    }

    fn toy_train_config() -> TrainConfig {
        TrainConfig { max_epochs: 50, batch_size: 8, seed: 5, ..TrainConfig::default() }
    }

    #[test]
    fn separable_toy_problem_reaches_full_training_accuracy() {
        let (features, labels) = toy_data(80, 1);
        let data = DataView { features: &features, feature_len: 16, labels: &labels };
        let train_idx: Vec<usize> = (0..60).collect();
        let val_idx: Vec<usize> = (60..80).collect();
        let mut net = Network::<f32>::new(&toy_model(), 3).unwrap();
        let outcome = train(&mut net, data, &train_idx, &val_idx, &toy_train_config()).unwrap();
        let last = outcome.history.last().unwrap();
        assert!(
            outcome.history.iter().any(|e| e.train_acc == 1.0),
            "never reached full train accuracy: final {last:?}"
        );
        // Predictions agree with the labels after restoring the best epoch.
        let classes = net.predict_classes(&features, labels.len()).unwrap();
        let agree = classes.iter().zip(&labels).filter(|(c, l)| **c == **l as usize).count();
        assert_eq!(agree, labels.len());
    }

    #[test]
    fn training_is_bit_reproducible_for_a_fixed_seed() {
        let (features, labels) = toy_data(40, 2);
        let data = DataView { features: &features, feature_len: 16, labels: &labels };
        let train_idx: Vec<usize> = (0..30).collect();
        let val_idx: Vec<usize> = (30..40).collect();
        let config = TrainConfig { max_epochs: 8, ..toy_train_config() };
        let run = || {
            let mut net = Network::<f32>::new(&toy_model(), 3).unwrap();
            let outcome = train(&mut net, data, &train_idx, &val_idx, &config).unwrap();
            (outcome, net.export_state())
        };
        let (a, wa) = run();
        let (b, wb) = run();
        assert_eq!(a, b);
        assert_eq!(wa, wb);
    }

    #[test]
    fn patience_controls_the_earliest_possible_stop() {
        let (features, labels) = toy_data(40, 3);
        let data = DataView { features: &features, feature_len: 16, labels: &labels };
        let train_idx: Vec<usize> = (0..30).collect();
        let val_idx: Vec<usize> = (30..40).collect();
        // An impossible improvement threshold: no epoch after the first ever
        // counts as better, so training runs exactly 1 + patience epochs.
        let config = TrainConfig {
            max_epochs: 100,
            min_delta: 1e9,
            ..toy_train_config()
        };
        let mut net = Network::<f32>::new(&toy_model(), 3).unwrap();
        let outcome = train(&mut net, data, &train_idx, &val_idx, &config).unwrap();
        assert_eq!(outcome.history.len(), 11);
        assert_eq!(outcome.best_epoch, 1);
        // Max epochs still wins when lower.
        let config = TrainConfig { max_epochs: 5, min_delta: 1e9, ..toy_train_config() };
        let mut net = Network::<f32>::new(&toy_model(), 3).unwrap();
        let outcome = train(&mut net, data, &train_idx, &val_idx, &config).unwrap();
        assert_eq!(outcome.history.len(), 5);
    }

    #[test]
    fn divergence_is_reported_with_the_epoch() {
        let (features, labels) = toy_data(40, 4);
        let data = DataView { features: &features, feature_len: 16, labels: &labels };
        let train_idx: Vec<usize> = (0..30).collect();
        let val_idx: Vec<usize> = (30..40).collect();
        let mut net = Network::<f32>::new(&toy_model(), 3).unwrap();
        // Poison the final-layer bias; the first forward pass then yields a
        // NaN logit. (Poisoning an early conv weight would not diverge: the
        // IEEE max in ReLU maps NaN to 0 and quietly heals the network.)
        let mut state = net.export_state();
        state.last_mut().unwrap()[0] = f32::NAN;
        net.import_state(&state).unwrap();
        let err = train(&mut net, data, &train_idx, &val_idx, &toy_train_config()).unwrap_err();
        assert!(err.to_string().contains("diverged at epoch 1"), "{err}");
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let (features, labels) = toy_data(10, 5);
        let data = DataView { features: &features, feature_len: 16, labels: &labels };
        let mut net = Network::<f32>::new(&toy_model(), 3).unwrap();
        let all: Vec<usize> = (0..10).collect();
        // Empty splits.
        assert!(train(&mut net, data, &[], &all, &toy_train_config()).is_err());
        assert!(train(&mut net, data, &all, &[], &toy_train_config()).is_err());
        // Out-of-range index.
        assert!(train(&mut net, data, &[99], &all, &toy_train_config()).is_err());
        // Batch size 1 leaves no batch-norm-compatible batches.
        let config = TrainConfig { batch_size: 1, ..toy_train_config() };
        let err = train(&mut net, data, &all, &all, &config).unwrap_err();
        assert!(err.to_string().contains("2-row minimum"), "{err}");
        // Out-of-range label.
        let bad_labels: Vec<u16> = labels.iter().map(|&l| l + 7).collect();
        let bad = DataView { features: &features, feature_len: 16, labels: &bad_labels };
        assert!(train(&mut net, bad, &all, &all, &toy_train_config()).is_err());
    }

    #[test]
    fn fixed_batch_loss_is_non_increasing_under_small_steps() {
        let (features, labels) = toy_data(16, 6);
        let mut net = Network::<f32>::new(&toy_model(), 3).unwrap();
        let mut optimizer: Nadam<f32> =
            Nadam::new(NadamConfig { learning_rate: 1e-4, ..NadamConfig::default() });
        let mut scratch = rng::chacha(0);
        let classes = 2;
        let mut losses = Vec::new();
        for _ in 0..11 {
            let logits = net.forward(&features, 16, Mode::Train, &mut scratch).unwrap();
            let mut probs = logits;
            softmax_rows(&mut probs, classes);
            losses.push(cross_entropy(&probs, &labels, classes));
            let dlogits = softmax_ce_grad(&probs, &labels, classes);
            net.zero_grads();
            net.backward(&dlogits);
            let mut params: Vec<_> = net.params_mut().into_iter().map(|(_, p)| p).collect();
            optimizer.step_params(&mut params);
        }
        for pair in losses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "loss rose: {losses:?}");
        }
    }

    #[test]
    fn grid_search_is_exhaustive_and_prefers_the_stronger_architecture() {
        let (features, labels) = xor_data(100, 7);
        let data = DataView { features: &features, feature_len: 16, labels: &labels };
        let train_idx: Vec<usize> = (0..70).collect();
        let val_idx: Vec<usize> = (70..100).collect();
        let config = TrainConfig { max_epochs: 25, ..toy_train_config() };

        assert!(grid_search(&[], data, &train_idx, &val_idx, &config).is_err());

        let singleton = [toy_model()];
        let (best, points) = grid_search(&singleton, data, &train_idx, &val_idx, &config).unwrap();
        assert_eq!(best, 0);
        assert_eq!(points.len(), 1);

        // A bare linear readout is at chance on the sign-agreement task; the
        // convolutional model separates it under the same budget.
        let stub = ModelConfig {
            input_side: 4,
            input_channels: 1,
            conv: vec![],
            dense: vec![2],
            dropout: 0.0,
            activation: Activation::Relu,
        };
        let space = [stub, toy_model()];
        let (best, points) = grid_search(&space, data, &train_idx, &val_idx, &config).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(best, 1, "{points:?}");
        assert!(points[1].val_accuracy > points[0].val_accuracy);
    }
}
