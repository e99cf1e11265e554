//! Speed and congestion prediction tables, horizon sweep, boosting-round curve
//! and the predictability study.

use rayon::prelude::*;
use roadcast::baselines::{history_average, knn_predict, mlp_train, KnnParams, Weighting};
use roadcast::datahub::{
    label_congestion_for, make_label_windows, make_windows_for, split_train_test, SpeedField,
    WindowSample, WindowSpec,
};
use roadcast::gbtree::{train_regressor, BoostedEnsemble};
use roadcast::metrics::{acc, mae, precision_recall_f1, rmse, roc_auc};
use roadcast::signal::{usability_study, Factor, RoadScores};
use serde::{Deserialize, Serialize};

use crate::config::HarnessConfig;
use crate::forecast::{training_range, GbtForecaster};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    HistoryAverage,
    KnnUniform,
    KnnWeighted,
    Mlp,
    Gbt,
}

impl Model {
    pub const SPEED: [Model; 5] = [
        Model::HistoryAverage,
        Model::KnnUniform,
        Model::KnnWeighted,
        Model::Mlp,
        Model::Gbt,
    ];
    pub const CONGESTION: [Model; 4] = [
        Model::KnnUniform,
        Model::KnnWeighted,
        Model::Mlp,
        Model::Gbt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::HistoryAverage => "history-average",
            Model::KnnUniform => "knn-uniform",
            Model::KnnWeighted => "knn-weighted",
            Model::Mlp => "mlp",
            Model::Gbt => "gbt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedRow {
    pub model: String,
    pub rmse: f64,
    pub mae: f64,
    /// Accuracy over the pooled test vector of all roads.
    pub acc: f64,
    /// Mean of per-road accuracies.
    pub acc_road_mean: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub model: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub horizon_min: u32,
    pub rmse: f64,
    pub mae: f64,
    pub acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochCurve {
    /// Entry `r` is the pooled RMSE after `r` rounds.
    pub train_rmse: Vec<f64>,
    pub test_rmse: Vec<f64>,
    /// First round after which test RMSE improves by less than 0.1% over the
    /// next 10 rounds.
    pub plateau_round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsabilityEntry {
    pub factor: String,
    pub k: usize,
    pub corr_rmse: f64,
    pub corr_mae: f64,
    pub corr_acc: f64,
}

/// Most recent `cap` samples.
fn tail(samples: &[WindowSample], cap: usize) -> &[WindowSample] {
    &samples[samples.len().saturating_sub(cap)..]
}

fn speed_split(
    field: &SpeedField,
    road: usize,
    spec: WindowSpec,
    ratio: f64,
) -> Result<(Vec<WindowSample>, Vec<WindowSample>)> {
    Ok(split_train_test(
        make_windows_for(field, road, spec)?,
        ratio,
    )?)
}

fn label_split(
    field: &SpeedField,
    road: usize,
    spec: WindowSpec,
    cfg: &HarnessConfig,
) -> Result<(Vec<WindowSample>, Vec<WindowSample>)> {
    let labels = label_congestion_for(
        field,
        road,
        cfg.congestion(),
        training_range(field, cfg.train_ratio),
    )?;
    Ok(split_train_test(
        make_label_windows(field, road, spec, &labels.labels)?,
        cfg.train_ratio,
    )?)
}

/// Test-split scores of one model on one road's samples.
fn scores(
    model: Model,
    train: &[WindowSample],
    test: &[WindowSample],
    gbt: &BoostedEnsemble,
    cfg: &HarnessConfig,
    proba: bool,
) -> Result<Vec<f64>> {
    let knn = |weighting| -> Result<Vec<f64>> {
        let neighbours = tail(train, cfg.knn_max_train);
        let params = KnnParams {
            k: cfg.knn_k.min(neighbours.len()),
            weighting,
        };
        test.iter()
            .map(|s| Ok(knn_predict(neighbours, &params, &s.features)?))
            .collect()
    };
    match model {
        Model::HistoryAverage => test
            .iter()
            .map(|s| Ok(history_average(&s.features)?))
            .collect(),
        Model::KnnUniform => knn(Weighting::Uniform),
        Model::KnnWeighted => knn(Weighting::InverseDistance),
        Model::Mlp => {
            let net = mlp_train(tail(train, cfg.mlp_max_train), &cfg.mlp_params())?;
            test.iter().map(|s| Ok(net.predict(&s.features)?)).collect()
        }
        Model::Gbt if proba => test
            .iter()
            .map(|s| Ok(gbt.predict_proba(&s.features)?))
            .collect(),
        Model::Gbt => test.iter().map(|s| Ok(gbt.predict(&s.features)?)).collect(),
    }
}

fn targets(samples: &[WindowSample]) -> Vec<f64> {
    samples.iter().map(|s| s.target).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedEval {
    pub rows: Vec<SpeedRow>,
    /// Per-road GBT test errors, in field order.
    pub gbt_roads: Vec<RoadScores>,
}

pub fn eval_speed(
    field: &SpeedField,
    gbt: &GbtForecaster,
    models: &[Model],
    cfg: &HarnessConfig,
) -> Result<SpeedEval> {
    let spec = gbt.spec;
    // per road: (actuals, predictions per model)
    let per_road = (0..field.n_roads())
        .into_par_iter()
        .map(|r| {
            let (train, test) = speed_split(field, r, spec, cfg.train_ratio)?;
            let preds = models
                .iter()
                .map(|&m| scores(m, &train, &test, &gbt.speed[r], cfg, false))
                .collect::<Result<Vec<_>>>()?;
            Ok((targets(&test), preds))
        })
        .collect::<Result<Vec<_>>>()?;

    let actual: Vec<f64> = per_road
        .iter()
        .flat_map(|(a, _)| a.iter().copied())
        .collect();
    let mut rows = Vec::with_capacity(models.len());
    for (i, m) in models.iter().enumerate() {
        let pred: Vec<f64> = per_road
            .iter()
            .flat_map(|(_, p)| p[i].iter().copied())
            .collect();
        let road_acc = per_road
            .iter()
            .map(|(a, p)| acc(&p[i], a))
            .collect::<roadcast::Result<Vec<_>>>()?;
        rows.push(SpeedRow {
            model: m.name().into(),
            rmse: rmse(&pred, &actual)?,
            mae: mae(&pred, &actual)?,
            acc: acc(&pred, &actual)?,
            acc_road_mean: road_acc.iter().sum::<f64>() / road_acc.len() as f64,
            samples: pred.len(),
        });
    }
    let gbt_roads = match models.iter().position(|&m| m == Model::Gbt) {
        Some(i) => per_road
            .iter()
            .map(|(a, p)| {
                Ok(RoadScores {
                    rmse: rmse(&p[i], a)?,
                    mae: mae(&p[i], a)?,
                    acc: acc(&p[i], a)?,
                })
            })
            .collect::<roadcast::Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    Ok(SpeedEval { rows, gbt_roads })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CongestionEval {
    pub rows: Vec<ClassRow>,
    /// GBT ROC curve, thinned for plotting.
    pub gbt_roc: Vec<(f64, f64)>,
}

/// Keeps at most `max` points, always including both ends.
pub fn thin(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max || max < 2 {
        return points.to_vec();
    }
    let last = points.len() - 1;
    (0..max).map(|i| points[i * last / (max - 1)]).collect()
}

pub const ROC_POINTS: usize = 200;

/// Classifiers score congestion at `t + d`; a score of at least 0.5 counts as
/// a congested call.
pub fn eval_congestion(
    field: &SpeedField,
    gbt: &GbtForecaster,
    models: &[Model],
    cfg: &HarnessConfig,
) -> Result<CongestionEval> {
    let spec = gbt.spec;
    let per_road = (0..field.n_roads())
        .into_par_iter()
        .map(|r| {
            let (train, test) = label_split(field, r, spec, cfg)?;
            let preds = models
                .iter()
                .map(|&m| scores(m, &train, &test, &gbt.congestion[r], cfg, true))
                .collect::<Result<Vec<_>>>()?;
            Ok((targets(&test), preds))
        })
        .collect::<Result<Vec<_>>>()?;

    let labels: Vec<bool> = per_road
        .iter()
        .flat_map(|(a, _)| a.iter().map(|&y| y == 1.0))
        .collect();
    let mut rows = Vec::with_capacity(models.len());
    let mut gbt_roc = Vec::new();
    for (i, m) in models.iter().enumerate() {
        let score: Vec<f64> = per_road
            .iter()
            .flat_map(|(_, p)| p[i].iter().copied())
            .collect();
        let called: Vec<bool> = score.iter().map(|&s| s >= 0.5).collect();
        let cls = precision_recall_f1(&called, &labels)?;
        let roc = roc_auc(&score, &labels)?;
        if *m == Model::Gbt {
            gbt_roc = thin(&roc.points, ROC_POINTS);
        }
        rows.push(ClassRow {
            model: m.name().into(),
            precision: cls.precision,
            recall: cls.recall,
            f1: cls.f1,
            auc: roc.auc,
            samples: score.len(),
        });
    }
    Ok(CongestionEval { rows, gbt_roc })
}

/// GBT speed errors at each horizon, retraining per horizon.
pub fn horizon_sweep(
    field: &SpeedField,
    horizons: &[u32],
    cfg: &HarnessConfig,
) -> Result<Vec<HorizonRow>> {
    let params = cfg.boost_params();
    horizons
        .iter()
        .map(|&minutes| {
            let spec = WindowSpec::for_horizon(cfg.window_h, minutes, field.step_minutes())?;
            let per_road = (0..field.n_roads())
                .into_par_iter()
                .map(|r| {
                    let (train, test) = speed_split(field, r, spec, cfg.train_ratio)?;
                    let m = train_regressor(&train, &params)?;
                    let pred = test
                        .iter()
                        .map(|s| m.predict(&s.features))
                        .collect::<roadcast::Result<Vec<_>>>()?;
                    Ok((targets(&test), pred))
                })
                .collect::<Result<Vec<_>>>()?;
            let actual: Vec<f64> = per_road
                .iter()
                .flat_map(|(a, _)| a.iter().copied())
                .collect();
            let pred: Vec<f64> = per_road
                .iter()
                .flat_map(|(_, p)| p.iter().copied())
                .collect();
            Ok(HorizonRow {
                horizon_min: minutes,
                rmse: rmse(&pred, &actual)?,
                mae: mae(&pred, &actual)?,
                acc: acc(&pred, &actual)?,
            })
        })
        .collect()
}

pub fn plateau_round(test_rmse: &[f64]) -> Option<usize> {
    (0..test_rmse.len().saturating_sub(10))
        .find(|&r| test_rmse[r] - test_rmse[r + 10] < 1e-3 * test_rmse[r])
}

/// Pooled train and test RMSE after every boosting round up to `max_rounds`.
pub fn epoch_curve(
    field: &SpeedField,
    spec: WindowSpec,
    max_rounds: usize,
    cfg: &HarnessConfig,
) -> Result<EpochCurve> {
    let params = roadcast::gbtree::BoostParams {
        rounds: max_rounds,
        ..cfg.boost_params()
    };
    let staged_se = |m: &BoostedEnsemble, samples: &[WindowSample]| -> roadcast::Result<Vec<f64>> {
        let mut se = vec![0.0; max_rounds + 1];
        for s in samples {
            for (acc, p) in se.iter_mut().zip(m.staged_predict(&s.features)?) {
                *acc += (p - s.target).powi(2);
            }
        }
        Ok(se)
    };
    let per_road = (0..field.n_roads())
        .into_par_iter()
        .map(|r| {
            let (train, test) = speed_split(field, r, spec, cfg.train_ratio)?;
            let m = train_regressor(&train, &params)?;
            Ok((
                staged_se(&m, &train)?,
                train.len(),
                staged_se(&m, &test)?,
                test.len(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let pooled = |pick: &dyn Fn(&(Vec<f64>, usize, Vec<f64>, usize)) -> (&Vec<f64>, usize)| {
        let n: usize = per_road.iter().map(|x| pick(x).1).sum();
        (0..=max_rounds)
            .map(|round| (per_road.iter().map(|x| pick(x).0[round]).sum::<f64>() / n as f64).sqrt())
            .collect::<Vec<f64>>()
    };
    let train_rmse = pooled(&|x| (&x.0, x.1));
    let test_rmse = pooled(&|x| (&x.2, x.3));
    let plateau_round = plateau_round(&test_rmse);
    Ok(EpochCurve {
        train_rmse,
        test_rmse,
        plateau_round,
    })
}

/// Correlates SR and Bias of each road's full series with its GBT errors.
pub fn usability(
    field: &SpeedField,
    gbt_roads: &[RoadScores],
    k_list: &[usize],
) -> Result<Vec<UsabilityEntry>> {
    let series: Vec<&[f64]> = (0..field.n_roads()).map(|r| field.series(r)).collect();
    Ok(usability_study(&series, gbt_roads, k_list)?
        .into_iter()
        .map(|row| UsabilityEntry {
            factor: match row.factor {
                Factor::Sr => "SR".into(),
                Factor::Bias => "Bias".into(),
            },
            k: row.k,
            corr_rmse: row.corr_rmse,
            corr_mae: row.corr_mae,
            corr_acc: row.corr_acc,
        })
        .collect())
}
