//! Assembles stage results into CSV tables, SVG charts and one JSON summary.
//! Missing results give header-only tables and empty charts.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::chart::{line_chart, Series};
use crate::config::HarnessConfig;
use crate::navigation::{Buckets, BUCKET_LABELS};
use crate::stages::{
    write_json, write_text, EopfResults, EpochResults, NavResults, PredictResults, SweepResults,
    UsabilityResults,
};
use crate::{HarnessError, Result};

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })
}

/// Every `prefix*.json` in `dir`, in file-name order.
fn read_all<T: DeserializeOwned>(dir: &Path, prefix: &str) -> Result<Vec<T>> {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return Ok(Vec::new());
    };
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            name.starts_with(prefix) && name.ends_with(".json")
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .filter_map(|p| read_json(p).transpose())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Collected {
    pub predict: Option<PredictResults>,
    pub sweep: Option<SweepResults>,
    pub epoch: Option<EpochResults>,
    pub usability: Option<UsabilityResults>,
    pub eopf: Vec<EopfResults>,
    pub navigation: Vec<NavResults>,
}

pub fn collect(results: &Path) -> Result<Collected> {
    Ok(Collected {
        predict: read_json(&results.join("eval-predict.json"))?,
        sweep: read_json(&results.join("sweep-horizon.json"))?,
        epoch: read_json(&results.join("epoch-curve.json"))?,
        usability: read_json(&results.join("usability.json"))?,
        eopf: read_all(results, "train-eopf-")?,
        navigation: read_all(results, "eval-nav-")?,
    })
}

fn f(v: f64) -> String {
    format!("{v:.6}")
}

fn pct(v: f64) -> String {
    format!("{:.6}", 100.0 * v)
}

fn table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = format!("{header}\n");
    for row in rows {
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

fn bucket_rows<'a>(
    nav: &'a NavResults,
    left: Option<&'a Buckets>,
    right: Option<&'a Buckets>,
) -> impl Iterator<Item = Vec<String>> + 'a {
    let cell = |b: Option<&Buckets>, i: usize| b.map_or(String::new(), |b| f(b.percent[i]));
    let count =
        |b: Option<&Buckets>, i: usize| b.map_or(String::new(), |b| b.counts[i].to_string());
    BUCKET_LABELS.iter().enumerate().map(move |(i, label)| {
        vec![
            nav.predictor.clone(),
            nav.horizon_min.to_string(),
            label.to_string(),
            cell(left, i),
            cell(right, i),
            count(left, i),
            count(right, i),
        ]
    })
}

#[derive(Serialize)]
struct Summary<'a> {
    seed: u64,
    config: &'a HarnessConfig,
    results: &'a Collected,
}

/// Writes every table, chart and the summary into `out`.
pub fn emit_report(cfg: &HarnessConfig, results: &Collected, out: &Path) -> Result<()> {
    let c = results;
    let speed = c.predict.iter().flat_map(|p| &p.speed);
    write_text(
        &out.join("table1_speed.csv"),
        &table(
            "model,rmse,mae,acc,acc_road_mean,samples",
            speed.map(|r| {
                vec![
                    r.model.clone(),
                    f(r.rmse),
                    f(r.mae),
                    f(r.acc),
                    f(r.acc_road_mean),
                    r.samples.to_string(),
                ]
            }),
        ),
    )?;
    let class = c.predict.iter().flat_map(|p| &p.congestion);
    write_text(
        &out.join("table2_congestion.csv"),
        &table(
            "model,precision,recall,f1,auc,samples",
            class.map(|r| {
                vec![
                    r.model.clone(),
                    f(r.precision),
                    f(r.recall),
                    f(r.f1),
                    f(r.auc),
                    r.samples.to_string(),
                ]
            }),
        ),
    )?;
    let sweep = c.sweep.iter().flat_map(|s| &s.rows);
    write_text(
        &out.join("table3_horizon.csv"),
        &table(
            "horizon_min,rmse,mae,acc",
            sweep.map(|r| vec![r.horizon_min.to_string(), f(r.rmse), f(r.mae), f(r.acc)]),
        ),
    )?;
    let usability = c.usability.iter().flat_map(|u| &u.rows);
    write_text(
        &out.join("table4_usability.csv"),
        &table(
            "factor,k,rmse,mae,acc",
            usability.map(|r| {
                vec![
                    r.factor.clone(),
                    r.k.to_string(),
                    f(r.corr_rmse),
                    f(r.corr_mae),
                    f(r.corr_acc),
                ]
            }),
        ),
    )?;
    let epoch_rows = c.epoch.iter().flat_map(|e| {
        e.curve
            .train_rmse
            .iter()
            .zip(&e.curve.test_rmse)
            .enumerate()
            .map(|(r, (a, b))| vec![r.to_string(), f(*a), f(*b)])
    });
    write_text(
        &out.join("epoch_curve.csv"),
        &table("round,train_rmse,test_rmse", epoch_rows),
    )?;

    write_text(
        &out.join("table6_navigation.csv"),
        &table(
            "predictor,horizon_min,k_paths,requests,evaluated,skipped,naive_regret_pct,predicted_regret_pct,eopf_regret_pct,exact_match_pct,membership_violations",
            c.navigation.iter().map(|n| {
                let s = &n.summary;
                vec![
                    n.predictor.clone(),
                    n.horizon_min.to_string(),
                    n.k_paths.to_string(),
                    s.requests.to_string(),
                    s.evaluated.to_string(),
                    s.skipped.to_string(),
                    pct(s.mean_regret_naive),
                    pct(s.mean_regret_predict),
                    s.mean_regret_eopf.map_or(String::new(), pct),
                    pct(s.exact_match_rate),
                    s.membership_violations.to_string(),
                ]
            }),
        ),
    )?;
    write_text(
        &out.join("table8_eopf_change.csv"),
        &table(
            "predictor,horizon_min,bucket,better_pct,worse_pct,better_count,worse_count",
            c.navigation.iter().flat_map(|n| {
                bucket_rows(
                    n,
                    n.summary.improvement_better.as_ref(),
                    n.summary.improvement_worse.as_ref(),
                )
            }),
        ),
    )?;
    let table9 = c.navigation.iter().flat_map(|n| {
        let overall = vec![
            n.predictor.clone(),
            n.horizon_min.to_string(),
            "overall".into(),
            n.summary.mean_regret_eopf.map_or(String::new(), pct),
            pct(n.summary.mean_regret_predict),
            String::new(),
            String::new(),
        ];
        bucket_rows(
            n,
            n.summary.regret_eopf.as_ref(),
            Some(&n.summary.regret_predict),
        )
        .chain(std::iter::once(overall))
    });
    write_text(
        &out.join("table9_regret.csv"),
        &table(
            "predictor,horizon_min,bucket,eopf_pct,without_eopf_pct,eopf_count,without_eopf_count",
            table9,
        ),
    )?;

    let horizon = c
        .sweep
        .iter()
        .map(|s| {
            Series::new(
                "GBT test RMSE",
                s.rows
                    .iter()
                    .map(|r| (f64::from(r.horizon_min), r.rmse))
                    .collect(),
            )
        })
        .collect::<Vec<_>>();
    write_text(
        &out.join("horizon_sweep.svg"),
        &line_chart(
            "RMSE by prediction horizon",
            "horizon (min)",
            "RMSE",
            &horizon,
        ),
    )?;
    let epoch = c
        .epoch
        .iter()
        .flat_map(|e| {
            let pts = |v: &[f64]| v.iter().enumerate().map(|(r, &y)| (r as f64, y)).collect();
            [
                Series::new("train", pts(&e.curve.train_rmse)),
                Series::new("test", pts(&e.curve.test_rmse)),
            ]
        })
        .collect::<Vec<_>>();
    write_text(
        &out.join("epoch_curve.svg"),
        &line_chart("RMSE by boosting round", "round", "RMSE", &epoch),
    )?;
    let roc = c
        .predict
        .iter()
        .map(|p| Series::new("GBT", p.roc.clone()))
        .collect::<Vec<_>>();
    write_text(
        &out.join("roc.svg"),
        &line_chart(
            "Congestion ROC",
            "false positive rate",
            "true positive rate",
            &roc,
        ),
    )?;

    write_json(
        &out.join("summary.json"),
        &Summary {
            seed: cfg.seed,
            config: cfg,
            results: c,
        },
    )
}

pub fn report(cfg: &HarnessConfig) -> Result<()> {
    let collected = collect(&cfg.results_dir())?;
    emit_report(cfg, &collected, &cfg.out.join("report"))
}
