//! Unsupervised training of the assignment network: mini-batch Adam on the
//! penalty loss (no labels — the loss itself scores the network's soft
//! assignments), plus the evaluation pipeline that compares trained models
//! against the exact oracle, hyperparameter sweeps, and baseline benchmarks.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gap::{
    avg_constraint_violation_probability, objective, Assignment, GapInstance, DEFAULT_EPS,
};
use crate::loss::{loss_grad_wrt_u, loss_simplified, LossConfig, PenaltySign};
use crate::nn::{
    adam_step, assignments_from_matrix, backward, forward, init_model, predict, AdamState,
    FeatureNorm, MlpModel,
};
use crate::oracle::solve_unit_weight_exact;
use crate::seed::{stream_rng, TAG_SHUFFLE};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

/// Hyperparameters for one training run. `layer_dims` lists every layer
/// width including the I·J input and output endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub layer_dims: Vec<usize>,
    pub seed: u64,
    pub normalize_features: bool,
    pub penalty_sign: PenaltySign,
}

impl TrainConfig {
    /// Defaults for the 4-user, 4-BS scenario: 50 epochs, batch 128, λ=6,
    /// lr=1e-4, hidden stack 64→…→2048.
    pub fn four_user(seed: u64) -> Self {
        Self {
            lambda: 6.0,
            learning_rate: 1e-4,
            epochs: 50,
            batch_size: 128,
            layer_dims: vec![16, 64, 128, 256, 512, 1024, 2048, 16],
            seed,
            normalize_features: true,
            penalty_sign: PenaltySign::Corrected,
        }
    }

    /// Defaults for the 16-user, 4-BS scenario: 100 epochs, λ=10, and the
    /// deeper stack topping out at 4096 units.
    pub fn sixteen_user(seed: u64) -> Self {
        Self {
            lambda: 10.0,
            learning_rate: 1e-4,
            epochs: 100,
            batch_size: 128,
            layer_dims: vec![64, 128, 256, 512, 1024, 2048, 2048, 4096, 4096, 64],
            seed,
            normalize_features: true,
            penalty_sign: PenaltySign::Corrected,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidValue("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidValue("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidValue(format!("learning rate {}", self.learning_rate)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidValue(format!("lambda {}", self.lambda)));
        }
        if self.layer_dims.len() < 2 {
            return Err(Error::InvalidValue("layer_dims needs input and output widths".into()));
        }
        Ok(())
    }
}

/// Deterministic epoch shuffle: permute 0..n with a stream keyed by
/// `epoch_seed`, then cut into `batch_size` chunks (last one partial).
pub fn make_batches(n_examples: usize, batch_size: usize, epoch_seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_examples == 0 {
        return Err(Error::EmptyInput("dataset"));
    }
    if batch_size == 0 || batch_size > n_examples {
        return Err(Error::InvalidValue(format!(
            "batch size {batch_size} for {n_examples} examples"
        )));
    }
    let mut order: Vec<usize> = (0..n_examples).collect();
    let mut rng = stream_rng(epoch_seed, 0, TAG_SHUFFLE);
    order.shuffle(&mut rng);
    Ok(order.chunks(batch_size).map(|c| c.to_vec()).collect())
}

fn check_dataset_matches_dims(dataset: &Dataset, layer_dims: &[usize]) -> Result<()> {
    dataset.validate()?;
    let width = dataset.n_items() * dataset.n_knapsacks();
    if layer_dims.first() != Some(&width) || layer_dims.last() != Some(&width) {
        return Err(Error::DimensionMismatch(format!(
            "layer dims must start and end at {width} for a {}×{} dataset, got {:?}",
            dataset.n_items(),
            dataset.n_knapsacks(),
            layer_dims
        )));
    }
    Ok(())
}

/// Train a fresh model on `dataset`; returns the model and the per-epoch
/// mean training loss. Bit-reproducible given (dataset, cfg).
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<(MlpModel, Vec<f64>)> {
    train_with(dataset, cfg, |_, _| {})
}

/// [`train`] with a per-epoch observer `(epoch_index, mean_loss)`, for
/// progress reporting.
pub fn train_with(
    dataset: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(MlpModel, Vec<f64>)> {
    cfg.validate()?;
    check_dataset_matches_dims(dataset, &cfg.layer_dims)?;
    let n = dataset.len();
    let split = (dataset.n_items(), dataset.n_knapsacks());

    let features = dataset.feature_matrix();
    let mut model = init_model(&cfg.layer_dims, split, cfg.seed)?;
    if cfg.normalize_features {
        // Fitted once on the full training set before the first epoch; the
        // statistics ride along in the checkpoint.
        model.feature_norm = Some(FeatureNorm::fit(&features)?);
    }
    let mut adam = AdamState::new(&model);
    let loss_cfg = LossConfig::with_lambda(cfg.lambda, cfg.penalty_sign);

    // Independent shuffle stream per epoch, all derived from cfg.seed.
    let mut shuffle_master = stream_rng(cfg.seed, 0, TAG_SHUFFLE);

    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let epoch_seed: u64 = shuffle_master.gen();
        let batches = make_batches(n, cfg.batch_size.min(n), epoch_seed)?;
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in batches.iter().enumerate() {
            let x = features.select(Axis(0), batch);
            // The split-Softmax head only produces out-of-range or
            // non-finite entries when the parameters have blown up, so a
            // rejected forward output here is a divergence, not bad input.
            let (assignments, cache) = forward(&model, &x).map_err(|e| match e {
                Error::InvalidValue(_) | Error::NonFinite(_) => {
                    Error::Diverged { epoch, batch: batch_idx }
                }
                other => other,
            })?;
            let pairs: Vec<(&GapInstance, &Assignment)> = batch
                .iter()
                .zip(&assignments)
                .map(|(i, a)| (&dataset.examples[*i].instance, a))
                .collect();
            let batch_loss = loss_simplified(&pairs, &loss_cfg)?;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: batch_idx });
            }
            epoch_loss += batch_loss * batch.len() as f64;

            let dl_du = loss_grad_wrt_u(&pairs, &loss_cfg)?;
            let grads = backward(&model, &cache, &dl_du)?;
            adam_step(&mut model, &grads, &mut adam, cfg.learning_rate).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { epoch, batch: batch_idx },
                other => other,
            })?;
        }
        let mean_loss = epoch_loss / n as f64;
        loss_history.push(mean_loss);
        on_epoch(epoch, mean_loss);
    }
    Ok((model, loss_history))
}

/// Test-set summary: achieved mean objective, its percentage of the exact
/// optimum, the violation metric, and amortized per-example wall-clock
/// times (seconds) for network inference and the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mean_sum_rate: f64,
    pub pct_of_optimal: f64,
    pub avg_violation_prob: f64,
    pub mean_inference_time: f64,
    pub mean_oracle_time: f64,
    pub loss_history: Vec<f64>,
}

/// Cap on rows per inference call so evaluation of huge test sets keeps a
/// bounded working set; one chunk is also how training-sized batches run.
const PREDICT_CHUNK: usize = 2048;

/// Batched, timed inference over a whole feature matrix.
fn predict_all(model: &MlpModel, features: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
    let n = features.nrows();
    let width = model.output_dim();
    let mut u = Array2::zeros((n, width));
    let t0 = Instant::now();
    let mut row = 0;
    while row < n {
        let hi = (row + PREDICT_CHUNK).min(n);
        let chunk = features.slice(ndarray::s![row..hi, ..]).to_owned();
        let out = predict(model, &chunk)?;
        u.slice_mut(ndarray::s![row..hi, ..]).assign(&out);
        row = hi;
    }
    let per_example = t0.elapsed().as_secs_f64() / n as f64;
    Ok((u, per_example))
}

/// Score a set of soft assignments against the test set's exact optima.
/// Factored out of [`evaluate`] so alternative producers (e.g. the oracle
/// itself, as a self-consistency check) can reuse the metrics path.
pub fn metrics_from_assignments(
    test: &Dataset,
    assignments: &[Assignment],
    eps: f64,
    mean_inference_time: f64,
) -> Result<Metrics> {
    test.validate()?;
    if assignments.len() != test.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} assignments for {} test examples",
            assignments.len(),
            test.len()
        )));
    }

    let mut sum_rate = 0.0;
    let mut oracle_sum = 0.0;
    let mut oracle_time = 0.0;
    for (ex, a) in test.examples.iter().zip(assignments) {
        for (i, row) in a.u().rows().into_iter().enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidValue(format!(
                    "assignment row {i} sums to {s}, violating the one-association constraint"
                )));
            }
        }
        sum_rate += objective(&ex.instance, a)?;
        let t0 = Instant::now();
        let sol = solve_unit_weight_exact(&ex.instance)?;
        oracle_time += t0.elapsed().as_secs_f64();
        oracle_sum += sol.objective;
    }
    let n = test.len() as f64;
    let mean_sum_rate = sum_rate / n;
    let mean_oracle = oracle_sum / n;
    if mean_oracle <= 0.0 {
        return Err(Error::InvalidValue(format!(
            "oracle mean objective {mean_oracle} cannot anchor a percentage"
        )));
    }

    let instances: Vec<GapInstance> =
        test.examples.iter().map(|ex| ex.instance.clone()).collect();
    let avg_violation_prob = avg_constraint_violation_probability(&instances, assignments, eps)?;

    // A violation-free soft assignment lives inside the feasible polytope,
    // whose integral optimum the oracle attains.
    debug_assert!(
        avg_violation_prob > 0.0 || mean_sum_rate <= mean_oracle + 1e-9,
        "feasible assignments outscored the exact optimum"
    );

    Ok(Metrics {
        mean_sum_rate,
        pct_of_optimal: 100.0 * mean_sum_rate / mean_oracle,
        avg_violation_prob,
        mean_inference_time,
        mean_oracle_time: oracle_time / n,
        loss_history: Vec::new(),
    })
}

/// Run the model over the test set and compare with the exact oracle.
/// Inference is timed batched and amortized per example; the oracle is
/// timed per instance. `eps` is the capacity-violation tolerance.
pub fn evaluate(model: &MlpModel, test: &Dataset, eps: f64) -> Result<Metrics> {
    test.validate()?;
    let width = test.n_items() * test.n_knapsacks();
    if model.input_dim() != width || model.output_dim() != width {
        return Err(Error::DimensionMismatch(format!(
            "model is {}→{}, dataset needs {width}→{width}",
            model.input_dim(),
            model.output_dim()
        )));
    }
    let features = test.feature_matrix();
    let (u, mean_inference_time) = predict_all(model, &features)?;
    let assignments = assignments_from_matrix(&u, (test.n_items(), test.n_knapsacks()))?;
    metrics_from_assignments(test, &assignments, eps, mean_inference_time)
}

/// Cartesian hyperparameter grid; each point trains `repeats` models with
/// consecutive seeds and reports repeat-averaged metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub lambdas: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub epochs: Vec<usize>,
    pub repeats: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            lambdas: vec![6.0],
            learning_rates: vec![1e-4],
            epochs: vec![50],
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub lr: f64,
    pub epochs: usize,
    pub metrics: Metrics,
}

/// Train and evaluate one model per grid point. Rows appear in λ-major,
/// then lr, then epochs order. Failures carry their grid point.
pub fn sweep(
    train_set: &Dataset,
    test_set: &Dataset,
    grid: &SweepGrid,
    base: &TrainConfig,
) -> Result<Vec<SweepRow>> {
    sweep_with(train_set, test_set, grid, base, |_, _| {})
}

/// [`sweep`] with a completion observer `(row_index, &row)`.
pub fn sweep_with(
    train_set: &Dataset,
    test_set: &Dataset,
    grid: &SweepGrid,
    base: &TrainConfig,
    mut on_row: impl FnMut(usize, &SweepRow),
) -> Result<Vec<SweepRow>> {
    if grid.lambdas.is_empty() || grid.learning_rates.is_empty() || grid.epochs.is_empty() {
        return Err(Error::EmptyInput("sweep grid"));
    }
    if grid.repeats == 0 {
        return Err(Error::InvalidValue("sweep repeats must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &lambda in &grid.lambdas {
        for &lr in &grid.learning_rates {
            for &epochs in &grid.epochs {
                let point = |e: Error| Error::SweepPoint {
                    lambda,
                    lr,
                    epochs,
                    source: Box::new(e),
                };
                let mut acc: Option<Metrics> = None;
                for r in 0..grid.repeats {
                    let cfg = TrainConfig {
                        lambda,
                        learning_rate: lr,
                        epochs,
                        seed: base.seed.wrapping_add(r as u64),
                        ..base.clone()
                    };
                    let (model, history) = train(train_set, &cfg).map_err(point)?;
                    let mut m = evaluate(&model, test_set, DEFAULT_EPS).map_err(point)?;
                    m.loss_history = history;
                    acc = Some(match acc {
                        None => m,
                        Some(prev) => accumulate_metrics(prev, m),
                    });
                }
                let mut metrics = acc.expect("at least one repeat");
                scale_metrics(&mut metrics, 1.0 / grid.repeats as f64);
                let row = SweepRow { lambda, lr, epochs, metrics };
                on_row(rows.len(), &row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

fn accumulate_metrics(mut acc: Metrics, m: Metrics) -> Metrics {
    acc.mean_sum_rate += m.mean_sum_rate;
    acc.pct_of_optimal += m.pct_of_optimal;
    acc.avg_violation_prob += m.avg_violation_prob;
    acc.mean_inference_time += m.mean_inference_time;
    acc.mean_oracle_time += m.mean_oracle_time;
    for (a, l) in acc.loss_history.iter_mut().zip(m.loss_history) {
        *a += l;
    }
    acc
}

fn scale_metrics(m: &mut Metrics, factor: f64) {
    m.mean_sum_rate *= factor;
    m.pct_of_optimal *= factor;
    m.avg_violation_prob *= factor;
    m.mean_inference_time *= factor;
    m.mean_oracle_time *= factor;
    for l in &mut m.loss_history {
        *l *= factor;
    }
}

/// CSV with one row per grid point; times reported in milliseconds.
pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(
        w,
        "lambda,lr,epochs,mean_sum_rate,pct_of_optimal,avg_violation_prob,dnn_time_ms,oracle_time_ms"
    )
    .map_err(|e| Error::io(&path, e))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.lambda,
            r.lr,
            r.epochs,
            r.metrics.mean_sum_rate,
            r.metrics.pct_of_optimal,
            r.metrics.avg_violation_prob,
            r.metrics.mean_inference_time * 1e3,
            r.metrics.mean_oracle_time * 1e3
        )
        .map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Exact-versus-greedy comparison for one test example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub example: usize,
    pub oracle_objective: f64,
    pub oracle_time_ms: f64,
    pub greedy_objective: f64,
    pub greedy_time_ms: f64,
    pub greedy_pct_of_oracle: f64,
}

/// Solve every test instance with the exact oracle and the greedy baseline.
pub fn benchmark(test: &Dataset) -> Result<Vec<BenchmarkRow>> {
    test.validate()?;
    let mut rows = Vec::with_capacity(test.len());
    for (k, ex) in test.examples.iter().enumerate() {
        let exact = solve_unit_weight_exact(&ex.instance)?;
        let greedy = crate::oracle::greedy_baseline(&ex.instance)?;
        rows.push(BenchmarkRow {
            example: k,
            oracle_objective: exact.objective,
            oracle_time_ms: exact.solve_time * 1e3,
            greedy_objective: greedy.objective,
            greedy_time_ms: greedy.solve_time * 1e3,
            greedy_pct_of_oracle: if exact.objective > 0.0 {
                100.0 * greedy.objective / exact.objective
            } else {
                100.0
            },
        });
    }
    Ok(rows)
}

pub fn write_benchmark_csv(rows: &[BenchmarkRow], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(
        w,
        "example,oracle_objective,oracle_time_ms,greedy_objective,greedy_time_ms,greedy_pct_of_oracle"
    )
    .map_err(|e| Error::io(&path, e))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.example,
            r.oracle_objective,
            r.oracle_time_ms,
            r.greedy_objective,
            r.greedy_time_ms,
            r.greedy_pct_of_oracle
        )
        .map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::{check_feasibility, harden};
    use crate::wireless::{generate_dataset, NetworkConfig};

    fn tiny_dataset(n: usize, seed: u64) -> Dataset {
        generate_dataset(&NetworkConfig::default(), n, seed).unwrap()
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            lambda: 2.0,
            learning_rate: 1e-3,
            epochs: 8,
            batch_size: 16,
            layer_dims: vec![16, 32, 32, 16],
            seed: 0,
            normalize_features: true,
            penalty_sign: PenaltySign::Corrected,
        }
    }

    #[test]
    fn batches_partition_the_dataset() {
        let batches = make_batches(10_000, 128, 3).unwrap();
        assert_eq!(batches.len(), 79);
        assert!(batches[..78].iter().all(|b| b.len() == 128));
        assert_eq!(batches[78].len(), 16);
        let mut seen: Vec<usize> = batches.into_iter().flatten().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..10_000).collect::<Vec<_>>());
    }

    #[test]
    fn batches_are_deterministic_per_seed() {
        assert_eq!(make_batches(100, 7, 5).unwrap(), make_batches(100, 7, 5).unwrap());
        assert_ne!(make_batches(100, 7, 5).unwrap(), make_batches(100, 7, 6).unwrap());
    }

    #[test]
    fn batches_reject_bad_sizes() {
        assert!(make_batches(0, 1, 0).is_err());
        assert!(make_batches(10, 0, 0).is_err());
        assert!(make_batches(10, 11, 0).is_err());
    }

    #[test]
    fn training_reduces_the_loss() {
        let ds = tiny_dataset(64, 1);
        let (_, history) = train(&ds, &tiny_config()).unwrap();
        assert_eq!(history.len(), 8);
        assert!(
            history.last().unwrap() < history.first().unwrap(),
            "loss went {} -> {}",
            history.first().unwrap(),
            history.last().unwrap()
        );
    }

    #[test]
    fn training_is_bit_reproducible() {
        let ds = tiny_dataset(48, 2);
        let cfg = tiny_config();
        let (m1, h1) = train(&ds, &cfg).unwrap();
        let (m2, h2) = train(&ds, &cfg).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(m1, m2);
        let (m3, _) = train(&ds, &TrainConfig { seed: 9, ..cfg }).unwrap();
        assert_ne!(m1, m3);
    }

    #[test]
    fn zero_learning_rate_freezes_the_loss() {
        let ds = tiny_dataset(32, 3);
        let cfg = TrainConfig {
            learning_rate: f64::MIN_POSITIVE,
            epochs: 4,
            ..tiny_config()
        };
        let (_, history) = train(&ds, &cfg).unwrap();
        // Parameters move by ~1e-308 per step: the per-epoch means differ
        // only by floating-point summation order across shuffles.
        for pair in history.windows(2) {
            assert!((pair[0] - pair[1]).abs() < 1e-9 * pair[0].abs().max(1.0));
        }
    }

    #[test]
    fn exploding_learning_rate_reports_divergence() {
        let ds = tiny_dataset(32, 4);
        let cfg = TrainConfig {
            learning_rate: 1e200,
            epochs: 3,
            ..tiny_config()
        };
        match train(&ds, &cfg) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn train_rejects_mismatched_dims() {
        let ds = tiny_dataset(8, 5);
        let cfg = TrainConfig {
            layer_dims: vec![16, 32, 8],
            batch_size: 8,
            ..tiny_config()
        };
        assert!(matches!(train(&ds, &cfg), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn evaluate_scores_a_trained_model() {
        let ds = tiny_dataset(64, 6);
        let test = tiny_dataset(32, 7);
        let (model, _) = train(&ds, &tiny_config()).unwrap();
        let m = evaluate(&model, &test, 1e-9).unwrap();
        assert!(m.mean_sum_rate > 0.0);
        assert!(m.pct_of_optimal > 0.0);
        assert!((0.0..=1.0).contains(&m.avg_violation_prob));
        assert!(m.mean_inference_time > 0.0);
        assert!(m.mean_oracle_time > 0.0);
    }

    #[test]
    fn evaluate_rejects_mismatched_model() {
        let test = tiny_dataset(8, 7);
        let model = init_model(&[8, 16, 8], (4, 2), 0).unwrap();
        assert!(matches!(evaluate(&model, &test, 1e-9), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn oracle_assignments_score_one_hundred_percent() {
        let test = tiny_dataset(24, 8);
        let assignments: Vec<Assignment> = test
            .examples
            .iter()
            .map(|ex| solve_unit_weight_exact(&ex.instance).unwrap().assignment)
            .collect();
        let m = metrics_from_assignments(&test, &assignments, 1e-9, 1e-6).unwrap();
        assert!((m.pct_of_optimal - 100.0).abs() < 1e-9, "pct {}", m.pct_of_optimal);
        assert_eq!(m.avg_violation_prob, 0.0);
    }

    #[test]
    fn feasible_hardened_outputs_stay_below_oracle() {
        // Rounding the soft output can overload a BS (that is what the
        // violation metric measures); only quota-respecting roundings are
        // bounded by the constrained optimum.
        let ds = tiny_dataset(48, 9);
        let (model, _) = train(&ds, &tiny_config()).unwrap();
        let test = tiny_dataset(16, 10);
        let (u, _) = predict_all(&model, &test.feature_matrix()).unwrap();
        let soft = assignments_from_matrix(&u, (4, 4)).unwrap();
        for (ex, a) in test.examples.iter().zip(&soft) {
            let hard = harden(a);
            if !check_feasibility(&ex.instance, &hard, 0.0).unwrap().is_feasible() {
                continue;
            }
            let z = objective(&ex.instance, &hard).unwrap();
            let opt = solve_unit_weight_exact(&ex.instance).unwrap().objective;
            assert!(z <= opt + 1e-9);
        }
    }

    #[test]
    fn sweep_single_point_equals_plain_training() {
        let ds = tiny_dataset(48, 11);
        let test = tiny_dataset(16, 12);
        let base = tiny_config();
        let grid = SweepGrid {
            lambdas: vec![base.lambda],
            learning_rates: vec![base.learning_rate],
            epochs: vec![base.epochs],
            repeats: 1,
        };
        let rows = sweep(&ds, &test, &grid, &base).unwrap();
        assert_eq!(rows.len(), 1);

        let (model, history) = train(&ds, &base).unwrap();
        let direct = evaluate(&model, &test, DEFAULT_EPS).unwrap();
        assert_eq!(rows[0].metrics.mean_sum_rate, direct.mean_sum_rate);
        assert_eq!(rows[0].metrics.avg_violation_prob, direct.avg_violation_prob);
        assert_eq!(rows[0].metrics.loss_history, history);
    }

    #[test]
    fn sweep_emits_one_row_per_grid_point() {
        let ds = tiny_dataset(32, 13);
        let test = tiny_dataset(8, 14);
        let base = TrainConfig { epochs: 2, ..tiny_config() };
        let grid = SweepGrid {
            lambdas: vec![1.0, 6.0],
            learning_rates: vec![1e-3, 1e-4],
            epochs: vec![1, 2],
            repeats: 1,
        };
        let rows = sweep(&ds, &test, &grid, &base).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].lambda, 1.0);
        assert_eq!(rows[7].lambda, 6.0);
        assert_eq!(rows[1].epochs, 2);
    }

    #[test]
    fn sweep_errors_carry_their_grid_point() {
        let ds = tiny_dataset(16, 15);
        let test = tiny_dataset(8, 16);
        let base = tiny_config();
        let grid = SweepGrid {
            lambdas: vec![4.0],
            learning_rates: vec![1e200],
            epochs: vec![2],
            repeats: 1,
        };
        match sweep(&ds, &test, &grid, &base) {
            Err(Error::SweepPoint { lambda, lr, .. }) => {
                assert_eq!(lambda, 4.0);
                assert_eq!(lr, 1e200);
            }
            other => panic!("expected annotated sweep error, got {other:?}"),
        }
    }

    #[test]
    fn sweep_csv_has_expected_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let rows = vec![SweepRow {
            lambda: 6.0,
            lr: 1e-4,
            epochs: 50,
            metrics: Metrics {
                mean_sum_rate: 13.5,
                pct_of_optimal: 97.5,
                avg_violation_prob: 0.09,
                mean_inference_time: 2.5e-4,
                mean_oracle_time: 1.5e-3,
                loss_history: vec![],
            },
        }];
        write_sweep_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "lambda,lr,epochs,mean_sum_rate,pct_of_optimal,avg_violation_prob,dnn_time_ms,oracle_time_ms"
        );
        assert_eq!(lines.next().unwrap(), "6,0.0001,50,13.5,97.5,0.09,0.25,1.5");
        assert!(lines.next().is_none());
    }

    #[test]
    fn benchmark_rows_bound_greedy_by_oracle() {
        let test = tiny_dataset(16, 17);
        let rows = benchmark(&test).unwrap();
        assert_eq!(rows.len(), 16);
        for (k, r) in rows.iter().enumerate() {
            assert_eq!(r.example, k);
            assert!(r.greedy_objective <= r.oracle_objective + 1e-9);
            assert!(r.greedy_pct_of_oracle <= 100.0 + 1e-9);
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.csv");
        write_benchmark_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "example,oracle_objective,oracle_time_ms,greedy_objective,greedy_time_ms,greedy_pct_of_oracle\n"
        ));
        assert_eq!(text.lines().count(), 17);
    }

    #[test]
    fn metrics_serialize_round_trip() {
        let m = Metrics {
            mean_sum_rate: 13.6,
            pct_of_optimal: 98.1,
            avg_violation_prob: 0.094,
            mean_inference_time: 2.4e-4,
            mean_oracle_time: 2.5e-1,
            loss_history: vec![-10.0, -11.5],
        };
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.starts_with("{\"mean_sum_rate\":13.6,\"pct_of_optimal\":98.1"));
        assert_eq!(serde_json::from_str::<Metrics>(&json).unwrap(), m);
    }
}
