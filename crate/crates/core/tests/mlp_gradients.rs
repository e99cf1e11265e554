use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadcast::eopf::{MlpModel, MlpParams};

fn batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(0.0..70.0)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|r| r.iter().sum::<f64>() / d as f64 + rng.random_range(-5.0..5.0))
        .collect();
    (rows, y)
}

/// Central differences of the model loss with step 1e-5.
fn numeric_gradient(model: &MlpModel, rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let base = model.params_flat();
    let step = 1e-5;
    (0..base.len())
        .map(|i| {
            let mut m = model.clone();
            let mut p = base.clone();
            p[i] = base[i] + step;
            m.set_params_flat(&p).unwrap();
            let up = m.loss(rows, y).unwrap();
            p[i] = base[i] - step;
            m.set_params_flat(&p).unwrap();
            let down = m.loss(rows, y).unwrap();
            (up - down) / (2.0 * step)
        })
        .collect()
}

#[test]
fn analytic_gradients_match_central_differences() {
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, y) = batch(&mut rng, 25, 4);
        let params = MlpParams {
            hidden: [6, 5],
            seed,
            ..MlpParams::default()
        };
        let mut model = MlpModel::init(&rows, &y, &params).unwrap();
        // spread weights beyond the init range to exercise curved regions
        let p: Vec<f64> = model
            .params_flat()
            .iter()
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        model.set_params_flat(&p).unwrap();

        let analytic = model.gradients(&rows, &y).unwrap().flat();
        let numeric = numeric_gradient(&model, &rows, &y);
        assert_eq!(analytic.len(), numeric.len());
        for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
            // relative error, with an absolute floor for entries near zero
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
            assert!(
                rel <= 1e-4,
                "seed {seed} param {i}: analytic {a}, numeric {n}"
            );
        }
    }
}

#[test]
fn target_scaling_moves_only_the_unscaled_view() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (rows, y) = batch(&mut rng, 30, 3);
    let c = 3.5;
    let scaled_y: Vec<f64> = y.iter().map(|v| v * c).collect();
    let params = MlpParams {
        hidden: [4, 4],
        ..MlpParams::default()
    };
    let a = MlpModel::init(&rows, &y, &params).unwrap();
    let b = MlpModel::init(&rows, &scaled_y, &params).unwrap();
    let ga = a.gradients(&rows, &y).unwrap();
    let gb = b.gradients(&rows, &scaled_y).unwrap();
    assert!((ga.output_bias() - gb.output_bias()).abs() <= 1e-12 * ga.output_bias().abs().max(1.0));

    // in target units the loss is scale^2 times the scaled loss
    let ua = ga.output_bias() * a.target_scale().powi(2);
    let ub = gb.output_bias() * b.target_scale().powi(2);
    assert!((ub / ua - c * c).abs() <= 1e-9 * c * c);
}
