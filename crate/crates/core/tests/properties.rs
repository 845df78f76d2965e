//! Randomized cross-checks of the closed forms against the brute-force
//! oracles, plus the algebraic invariants of the factor model. The
//! acceptance suite in the CLI crate runs the same checks at larger counts.

use cpreg_core::model::{CellIndex, FactorModel};
use cpreg_core::oracle;
use cpreg_core::predict::{self, IndexEntry, PartialIndex};
use cpreg_core::quantizer::Quantizer;
use cpreg_core::rng::Rng;
use cpreg_core::schema::{Feature, FeatureKind, FeatureSchema};
use cpreg_core::solver::{self, DifferenceKind, SolverConfig};
use cpreg_core::split;
use cpreg_core::tensor::{MarginalSet, SparseObservationTensor};
use cpreg_core::Matrix;

fn idx(components: &[usize]) -> CellIndex {
    CellIndex::new(components.to_vec())
}

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

fn random_shape(rng: &mut Rng, max_modes: usize, max_size: usize) -> Vec<usize> {
    let n = 2 + rng.below(max_modes - 1);
    (0..n).map(|_| 2 + rng.below(max_size - 1)).collect()
}

fn random_model(rng: &mut Rng, shape: &[usize], rank: usize) -> FactorModel {
    let factors = shape
        .iter()
        .map(|&len| {
            let mut m = Matrix::zeros(len, rank);
            for i in 0..len {
                for f in 0..rank {
                    m.set(i, f, rng.uniform_in(-1.5, 1.5));
                }
            }
            m
        })
        .collect();
    FactorModel::new(factors, None).unwrap()
}

fn random_samples(rng: &mut Rng, shape: &[usize], count: usize) -> Vec<(CellIndex, Vec<f64>)> {
    (0..count)
        .map(|_| {
            let c: Vec<usize> = shape.iter().map(|&len| rng.below(len)).collect();
            (CellIndex::new(c), vec![rng.gaussian()])
        })
        .collect()
}

fn random_marginals(rng: &mut Rng, shape: &[usize]) -> MarginalSet {
    let ps = shape
        .iter()
        .map(|&len| {
            let raw: Vec<f64> = (0..len).map(|_| rng.uniform() + 0.05).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    MarginalSet::new(ps).unwrap()
}

#[test]
fn khatri_rao_row_matches_eval_everywhere() {
    let mut rng = Rng::new(101);
    for _ in 0..50 {
        let shape = random_shape(&mut rng, 4, 5);
        let rank = 1 + rng.below(3);
        let model = random_model(&mut rng, &shape, rank);
        let c: Vec<usize> = shape.iter().map(|&len| rng.below(len)).collect();
        let c = CellIndex::new(c);
        let full = model.eval_cell(&c).unwrap();
        for k in 0..shape.len() {
            let row = model.khatri_rao_row(&c, k).unwrap();
            let ak = model.factor(k).row(c.get(k));
            let dot: f64 = row.iter().zip(ak).map(|(a, b)| a * b).sum();
            let tol = 1e-12 * full.abs().max(1.0);
            assert!((dot - full).abs() <= tol, "mode {k}: {dot} vs {full}");
        }
    }
}

#[test]
fn basis_contraction_equals_slice() {
    let mut rng = Rng::new(103);
    for _ in 0..20 {
        let shape = random_shape(&mut rng, 4, 5);
        let model = random_model(&mut rng, &shape, 2);
        let mode = rng.below(shape.len());
        let j = rng.below(shape[mode]);
        let mut basis = vec![0.0; shape[mode]];
        basis[j] = 1.0;
        let contracted = model.mode_vector_product(mode, &basis).unwrap();
        for c in oracle::enumerate_cells(&shape).unwrap() {
            if c.get(mode) != j {
                continue;
            }
            let mut reduced = c.as_slice().to_vec();
            reduced[mode] = 0;
            let a = model.eval_cell(&c).unwrap();
            let b = contracted.eval_cell(&CellIndex::new(reduced)).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}

#[test]
fn column_permutation_and_counter_scaling_leave_eval_unchanged() {
    let mut rng = Rng::new(105);
    let shape = [3usize, 4, 2];
    let rank = 3;
    let model = random_model(&mut rng, &shape, rank);

    // Permute columns identically in every factor.
    let perm = [2usize, 0, 1];
    let permuted: Vec<Matrix> = model
        .factors()
        .iter()
        .map(|a| {
            let mut m = Matrix::zeros(a.rows(), rank);
            for i in 0..a.rows() {
                for (to, &from) in perm.iter().enumerate() {
                    m.set(i, to, a.get(i, from));
                }
            }
            m
        })
        .collect();
    let permuted = FactorModel::new(permuted, None).unwrap();

    // Scale column 1 of factor 0 by c and of factor 1 by 1/c.
    let c = 3.7;
    let mut scaled: Vec<Matrix> = model.factors().to_vec();
    for i in 0..scaled[0].rows() {
        let v = scaled[0].get(i, 1);
        scaled[0].set(i, 1, v * c);
    }
    for i in 0..scaled[1].rows() {
        let v = scaled[1].get(i, 1);
        scaled[1].set(i, 1, v / c);
    }
    let scaled = FactorModel::new(scaled, None).unwrap();

    for cell in oracle::enumerate_cells(&shape).unwrap() {
        let base = model.eval_cell(&cell).unwrap();
        let p = permuted.eval_cell(&cell).unwrap();
        let s = scaled.eval_cell(&cell).unwrap();
        let tol = 1e-12 * base.abs().max(1.0);
        assert!((p - base).abs() <= tol);
        assert!((s - base).abs() <= tol);
    }
}

#[test]
fn scaling_ambiguity_leaves_data_term_invariant() {
    let mut rng = Rng::new(107);
    let shape = [3usize, 3];
    let model = random_model(&mut rng, &shape, 2);
    let samples = random_samples(&mut rng, &shape, 12);
    let data = SparseObservationTensor::aggregate(shape.to_vec(), &samples).unwrap();
    let mut cfg = SolverConfig::new(2);
    cfg.ridge = 0.0;

    let c = 0.31;
    let mut scaled: Vec<Matrix> = model.factors().to_vec();
    for i in 0..scaled[0].rows() {
        let v = scaled[0].get(i, 0);
        scaled[0].set(i, 0, v * c);
    }
    for i in 0..scaled[1].rows() {
        let v = scaled[1].get(i, 0);
        scaled[1].set(i, 0, v / c);
    }
    let scaled = FactorModel::new(scaled, None).unwrap();
    let a = solver::objective(&model, &data, &cfg).unwrap();
    let b = solver::objective(&scaled, &data, &cfg).unwrap();
    assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} vs {b}");
}

#[test]
fn constant_row_shift_changes_no_smoothness() {
    let mut rng = Rng::new(109);
    for kind in [DifferenceKind::First, DifferenceKind::Second] {
        let a = {
            let mut m = Matrix::zeros(6, 3);
            for i in 0..6 {
                for f in 0..3 {
                    m.set(i, f, rng.gaussian());
                }
            }
            m
        };
        let before = kind.apply(&a).frob_sq();
        let mut shifted = a.clone();
        let shift = [0.7, -2.0, 0.05];
        for i in 0..6 {
            for (f, delta) in shift.iter().enumerate() {
                shifted.set(i, f, shifted.get(i, f) + delta);
            }
        }
        let after = kind.apply(&shifted).frob_sq();
        assert!((before - after).abs() <= 1e-10 * before.max(1.0));
    }
}

#[test]
fn aggregation_equivalence_constant_on_random_datasets() {
    let mut rng = Rng::new(111);
    for trial in 0..25 {
        let shape = random_shape(&mut rng, 4, 6);
        let m = 10 + rng.below(60);
        let samples = random_samples(&mut rng, &shape, m);
        let data = SparseObservationTensor::aggregate(shape.clone(), &samples).unwrap();
        let rank = 1 + rng.below(3);
        let model = random_model(&mut rng, &shape, rank);
        let mut cfg = SolverConfig::new(model.rank());
        cfg.ridge = rng.uniform_in(0.0, 0.1);
        cfg.smoothness = vec![rng.uniform_in(0.0, 0.1); shape.len()];

        let per_sample = oracle::brute_objective(&model, &samples, &cfg).unwrap();
        let aggregated = solver::objective(&model, &data, &cfg).unwrap();
        let within_cell: f64 = samples
            .iter()
            .map(|(c, y)| {
                let mean = data.get(c).unwrap().mean[0];
                (y[0] - mean) * (y[0] - mean)
            })
            .sum::<f64>()
            / samples.len() as f64;
        let lhs = per_sample;
        let rhs = aggregated + within_cell;
        assert!(
            (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
            "trial {trial}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn row_update_zeroes_the_block_gradient() {
    let mut rng = Rng::new(113);
    for trial in 0..25 {
        let shape = random_shape(&mut rng, 4, 5);
        let rank = 1 + rng.below(3);
        let mut model = random_model(&mut rng, &shape, rank);
        let count = 8 + rng.below(40);
        let samples = random_samples(&mut rng, &shape, count);
        let data = SparseObservationTensor::aggregate(shape.clone(), &samples).unwrap();
        let mut cfg = SolverConfig::new(rank);
        cfg.ridge = [0.0, 1e-3, 0.1][rng.below(3)];
        cfg.smoothness = vec![[0.0, 1e-2, 1.0][rng.below(3)]; shape.len()];
        cfg.difference = if rng.below(2) == 0 {
            DifferenceKind::First
        } else {
            DifferenceKind::Second
        };
        let mode = rng.below(shape.len());
        let row = rng.below(shape[mode]);

        let updated = solver::row_update(&model, &data, mode, row, &cfg).unwrap();

        let grad_at = |point: &[f64], model: &mut FactorModel| {
            let saved = model.factor(mode).row(row).to_vec();
            let g = oracle::fd_gradient(
                |x| {
                    model_with_row(model, mode, row, x)
                        .map(|m| solver::objective(&m, &data, &cfg).unwrap())
                        .unwrap()
                },
                point,
                1e-5,
            );
            model.factor_mut(mode).row_mut(row).copy_from_slice(&saved);
            g
        };
        let random_point: Vec<f64> = (0..rank).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let g_rand = grad_at(&random_point, &mut model);
        let g_opt = grad_at(&updated, &mut model);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(
            norm(&g_opt) <= 1e-6 * (1.0 + norm(&g_rand)),
            "trial {trial}: |g*| = {}, |g_rand| = {}",
            norm(&g_opt),
            norm(&g_rand)
        );
    }
}

fn model_with_row(
    model: &FactorModel,
    mode: usize,
    row: usize,
    values: &[f64],
) -> cpreg_core::Result<FactorModel> {
    let mut factors = model.factors().to_vec();
    factors[mode].row_mut(row).copy_from_slice(values);
    FactorModel::new(factors, model.output_factor().cloned())
}

#[test]
fn objective_trace_is_monotone_on_random_fits() {
    let mut rng = Rng::new(115);
    for trial in 0..20 {
        let shape = random_shape(&mut rng, 4, 8);
        let schema = ordinal_schema(&shape);
        let rank = 1 + rng.below(4);
        let m = 15 + rng.below(80);
        let samples = random_samples(&mut rng, &shape, m);
        let data = SparseObservationTensor::aggregate(shape.clone(), &samples).unwrap();
        let mut cfg = SolverConfig::new(rank);
        cfg.ridge = [0.0, 1e-4, 1e-2][rng.below(3)];
        cfg.smoothness = vec![[0.0, 1e-2, 0.5][rng.below(3)]; shape.len()];
        cfg.difference = if rng.below(2) == 0 {
            DifferenceKind::First
        } else {
            DifferenceKind::Second
        };
        cfg.max_sweeps = 40;
        cfg.rel_tol = 0.0;
        cfg.seed = 1000 + trial as u64;
        let (_, report) = solver::fit(&data, &schema, &cfg).unwrap();
        for w in report.objective_trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9 * w[0].abs().max(1e-12),
                "trial {trial}: {} -> {}",
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn partial_prediction_matches_enumeration() {
    let mut rng = Rng::new(117);
    for trial in 0..100 {
        let shape = random_shape(&mut rng, 4, 5);
        let rank = 1 + rng.below(3);
        let model = random_model(&mut rng, &shape, rank);
        let marginals = random_marginals(&mut rng, &shape);
        let entries: Vec<IndexEntry> = shape
            .iter()
            .map(|&len| {
                if rng.below(3) == 0 {
                    IndexEntry::Missing
                } else {
                    IndexEntry::Known(rng.below(len))
                }
            })
            .collect();
        let pidx = PartialIndex::new(entries);
        let fast = predict::predict_partial(&model, &pidx, &marginals).unwrap();
        let slow = oracle::brute_conditional_expectation(&model, &pidx, &marginals).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            assert!(
                (a - b).abs() <= 1e-12 * b.abs().max(1.0),
                "trial {trial}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn partial_prediction_is_linear_in_each_marginal() {
    let mut rng = Rng::new(119);
    let shape = [3usize, 4];
    let model = random_model(&mut rng, &shape, 2);
    let p = random_marginals(&mut rng, &shape);
    let q = random_marginals(&mut rng, &shape);
    let pidx = PartialIndex::new(vec![IndexEntry::Known(1), IndexEntry::Missing]);
    let alpha = 0.3;
    let blended = MarginalSet::new(vec![
        p.mode(0).to_vec(),
        p.mode(1)
            .iter()
            .zip(q.mode(1))
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect(),
    ])
    .unwrap();
    let fp = predict::predict_partial(&model, &pidx, &p).unwrap()[0];
    let fq = predict::predict_partial(&model, &pidx, &q).unwrap()[0];
    let fb = predict::predict_partial(&model, &pidx, &blended).unwrap()[0];
    assert!((fb - (alpha * fp + (1.0 - alpha) * fq)).abs() <= 1e-12 * fb.abs().max(1.0));
}

#[test]
fn quantizer_distortion_matches_reencoded_training_mse() {
    let mut rng = Rng::new(121);
    for _ in 0..20 {
        let n = 10 + rng.below(100);
        let values: Vec<f64> = (0..n).map(|_| rng.gaussian() * 3.0).collect();
        let levels = 2 + rng.below(6);
        match Quantizer::lloyd_max(&values, levels, 200, 0.0) {
            Ok(fit) => {
                let mse: f64 = values
                    .iter()
                    .map(|&v| {
                        let d = v - fit.quantizer.decode(fit.quantizer.encode(v));
                        d * d
                    })
                    .sum::<f64>()
                    / values.len() as f64;
                assert!((mse - fit.distortion).abs() <= 1e-12 * mse.max(1e-9));
                for w in fit.trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-15);
                }
            }
            Err(e) => panic!("unexpected lloyd-max failure: {e}"),
        }
    }
}

#[test]
fn splits_are_reproducible_partitions() {
    for seed in 0..5 {
        let (tr, te) = split::train_test_split(37, 0.8, seed).unwrap();
        let (tr2, te2) = split::train_test_split(37, 0.8, seed).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(te, te2);
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());

        let folds = split::kfold(37, 5, seed).unwrap();
        let mut seen: Vec<usize> = folds.iter().flat_map(|(_, v)| v.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..37).collect::<Vec<_>>());
    }
}

#[test]
fn fit_against_raw_and_aggregated_objectives_differ_by_constant() {
    // After any number of sweeps the fitted model's raw-sample objective must
    // equal its aggregated objective plus the model-independent constant.
    let mut rng = Rng::new(123);
    let shape = [4usize, 3, 2];
    let schema = ordinal_schema(&shape);
    let samples = random_samples(&mut rng, &shape, 60);
    let data = SparseObservationTensor::aggregate(shape.to_vec(), &samples).unwrap();
    let mut cfg = SolverConfig::new(2);
    cfg.ridge = 1e-3;
    cfg.smoothness = vec![1e-2, 1e-2, 0.0];
    cfg.max_sweeps = 25;
    let (model, report) = solver::fit(&data, &schema, &cfg).unwrap();
    let constant: f64 = samples
        .iter()
        .map(|(c, y)| {
            let mean = data.get(c).unwrap().mean[0];
            (y[0] - mean) * (y[0] - mean)
        })
        .sum::<f64>()
        / samples.len() as f64;
    let raw = oracle::brute_objective(&model, &samples, &cfg).unwrap();
    let agg = report.final_objective;
    assert!((raw - (agg + constant)).abs() <= 1e-10 * raw.abs().max(1.0));
}

mod prop {
    use super::*;
    use cpreg_core::rng::Rng as CoreRng;
    use proptest::prelude::*;

    fn arb_model() -> impl Strategy<Value = (Vec<usize>, FactorModel, u64)> {
        (2usize..5, 1usize..4, any::<u64>()).prop_map(|(n, rank, seed)| {
            let mut rng = CoreRng::new(seed);
            let shape: Vec<usize> = (0..n).map(|_| 2 + rng.below(4)).collect();
            let model = random_model(&mut rng, &shape, rank);
            (shape, model, seed)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn eval_matches_khatri_rao_contraction((shape, model, seed) in arb_model()) {
            let mut rng = CoreRng::new(seed ^ 0xABCD);
            let c: Vec<usize> = shape.iter().map(|&len| rng.below(len)).collect();
            let c = CellIndex::new(c);
            let full = model.eval_cell(&c).unwrap();
            let k = rng.below(shape.len());
            let row = model.khatri_rao_row(&c, k).unwrap();
            let dot: f64 = row
                .iter()
                .zip(model.factor(k).row(c.get(k)))
                .map(|(a, b)| a * b)
                .sum();
            prop_assert!((dot - full).abs() <= 1e-12 * full.abs().max(1.0));
        }

        #[test]
        fn quantizer_encode_is_idempotent_on_levels(
            raw in proptest::collection::vec(-100.0f64..100.0, 4..40),
            levels in 2usize..6,
        ) {
            if let Ok(fit) = Quantizer::lloyd_max(&raw, levels, 100, 0.0) {
                for (i, &l) in fit.quantizer.levels().iter().enumerate() {
                    prop_assert_eq!(fit.quantizer.encode(l), i);
                }
            }
        }

        #[test]
        fn marginal_fit_sums_to_one(
            seed in any::<u64>(),
            n in 2usize..5,
        ) {
            let mut rng = CoreRng::new(seed);
            let shape: Vec<usize> = (0..n).map(|_| 2 + rng.below(5)).collect();
            let schema = ordinal_schema(&shape);
            let samples: Vec<CellIndex> = (0..30)
                .map(|_| CellIndex::new(shape.iter().map(|&len| rng.below(len)).collect()))
                .collect();
            let m = MarginalSet::fit(&samples, &schema, 0.0).unwrap();
            for mode in 0..n {
                let total: f64 = m.mode(mode).iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn sign_benchmarks_reproduce_their_operators() {
    let product = oracle::sign_product_model(5);
    let sum = oracle::sign_sum_model(5);
    for c in oracle::enumerate_cells(&[2; 5]).unwrap() {
        let signs: Vec<f64> = c
            .as_slice()
            .iter()
            .map(|&i| if i == 0 { -1.0 } else { 1.0 })
            .collect();
        assert_eq!(
            product.eval_cell(&c).unwrap(),
            signs.iter().product::<f64>()
        );
        assert_eq!(sum.eval_cell(&c).unwrap(), signs.iter().sum::<f64>());
    }
}

#[test]
fn unseen_level_has_zero_probability_without_smoothing() {
    let schema = ordinal_schema(&[4]);
    let samples = vec![idx(&[0]), idx(&[1])];
    let m = MarginalSet::fit(&samples, &schema, 0.0).unwrap();
    assert_eq!(m.mode(0), &[0.5, 0.5, 0.0, 0.0]);
}
