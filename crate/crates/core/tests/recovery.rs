//! Synthesize-then-recover integration tests: plant a model, sample it, fit,
//! and compare against the plant. Smaller instances of the checks the
//! acceptance suite runs in full.

use cpreg_core::model::CellIndex;
use cpreg_core::oracle;
use cpreg_core::predict;
use cpreg_core::rng::Rng;
use cpreg_core::schema::{Feature, FeatureKind, FeatureSchema};
use cpreg_core::solver::{self, SolverConfig};
use cpreg_core::tensor::SparseObservationTensor;

fn ordinal_schema(shape: &[usize]) -> FeatureSchema {
    FeatureSchema::new(
        shape
            .iter()
            .enumerate()
            .map(|(i, &s)| Feature {
                name: format!("x{i}"),
                kind: FeatureKind::OrdinalDiscrete,
                alphabet_size: s,
                labels: None,
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn fully_observed_rank3_recovery() {
    let shape = [6usize, 6, 6];
    let (planted, samples) = oracle::synth(&shape, 3, 71, 0.0).unwrap();
    let schema = ordinal_schema(&shape);
    let data = SparseObservationTensor::aggregate(shape.to_vec(), &samples).unwrap();
    let mut cfg = SolverConfig::new(3);
    cfg.ridge = 1e-6;
    cfg.smoothness = vec![1e-6; 3];
    cfg.restarts = 5;
    cfg.max_sweeps = 200;
    cfg.rel_tol = 1e-10;
    cfg.seed = 7;
    let (fitted, _) = solver::fit(&data, &schema, &cfg).unwrap();

    let truth = oracle::materialize(&planted).unwrap();
    let estimate = oracle::materialize(&fitted).unwrap();
    let num: f64 = truth
        .values()
        .iter()
        .zip(estimate.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den: f64 = truth.values().iter().map(|a| a * a).sum();
    let rel = (num / den).sqrt();
    assert!(rel <= 1e-3, "relative reconstruction error {rel}");
}

#[test]
fn sign_product_from_30_percent_of_cells() {
    let n = 6;
    let shape = vec![2usize; n];
    let planted = oracle::sign_product_model(n);
    let schema = ordinal_schema(&shape);
    let cells = oracle::enumerate_cells(&shape).unwrap();
    let mut rng = Rng::new(2024);
    let mut order: Vec<usize> = (0..cells.len()).collect();
    rng.shuffle(&mut order);
    let observed = &order[..(cells.len() * 3) / 10];
    let samples: Vec<(CellIndex, Vec<f64>)> = observed
        .iter()
        .map(|&i| {
            let c = cells[i].clone();
            let y = planted.eval_cell(&c).unwrap();
            (c, vec![y])
        })
        .collect();
    let data = SparseObservationTensor::aggregate(shape.clone(), &samples).unwrap();
    let mut cfg = SolverConfig::new(1);
    cfg.ridge = 1e-6;
    cfg.restarts = 5;
    cfg.max_sweeps = 300;
    cfg.rel_tol = 1e-10;
    cfg.seed = 3;
    let (fitted, _) = solver::fit(&data, &schema, &cfg).unwrap();

    let held_out: Vec<&CellIndex> = order[(cells.len() * 3) / 10..]
        .iter()
        .map(|&i| &cells[i])
        .collect();
    let preds: Vec<f64> = held_out
        .iter()
        .map(|c| fitted.eval_cell(c).unwrap())
        .collect();
    let truth: Vec<f64> = held_out
        .iter()
        .map(|c| planted.eval_cell(c).unwrap())
        .collect();
    let rmse = predict::rmse_scalar(&preds, &truth).unwrap();
    assert!(rmse <= 0.05, "held-out rmse {rmse}");
}

#[test]
fn multi_output_rank2_recovery() {
    let shape = [5usize, 4, 3];
    let (planted, samples) = oracle::synth_multi(&shape, 3, 2, 55, 0.0).unwrap();
    let schema = ordinal_schema(&shape);
    let data = SparseObservationTensor::aggregate(shape.to_vec(), &samples).unwrap();
    let mut cfg = SolverConfig::new(2);
    cfg.ridge = 1e-6;
    cfg.restarts = 5;
    cfg.max_sweeps = 300;
    cfg.rel_tol = 1e-10;
    cfg.seed = 8;
    let (fitted, _) = solver::fit_multi_output(&data, &schema, &cfg).unwrap();
    assert_eq!(fitted.n_outputs(), 3);

    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for c in oracle::enumerate_cells(&shape).unwrap() {
        preds.push(predict::predict_vector(&fitted, &c).unwrap());
        truth.push(predict::predict_vector(&planted, &c).unwrap());
    }
    let rmse = predict::rmse(&preds, &truth).unwrap();
    assert!(rmse <= 1e-2, "reconstruction rmse {rmse}");
}
