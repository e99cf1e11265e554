//! One function per CLI stage. Stages communicate through files under the
//! output directory: `speeds.csv` and `graph.csv`, `models/`, `results/`
//! and `report/`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roadcast::datahub::{
    gen_synthetic, interpolate_missing, load_graph_csv, load_speed_csv, read_speed_csv,
    write_graph_csv, write_speed_csv, SpeedField, WindowSpec, DEFAULT_STEP_MINUTES,
};
use roadcast::eopf::{build_training_set, train_eopf, MlpModel, SpeedCorrector};
use roadcast::router::RoadGraph;
use serde::Serialize;

use crate::config::{HarnessConfig, PredictorKind};
use crate::forecast::{
    congestion_thresholds, forecast_at, Forecaster, GbtForecaster, OracleForecaster,
    PlantedBiasForecaster,
};
use crate::navigation::{
    eval_navigation, evaluation_intervals, gen_requests, served_history, summarize, NavRequest,
    NavSetup, NavSummary, RegretRecord,
};
use crate::prediction::{self, ClassRow, EpochCurve, HorizonRow, Model, SpeedRow, UsabilityEntry};
use crate::{HarnessError, Result};

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn load_field(cfg: &HarnessConfig) -> Result<SpeedField> {
    let field = load_speed_csv(cfg.data_path())?;
    if field.is_clean() {
        Ok(field)
    } else {
        Ok(interpolate_missing(&field)?)
    }
}

pub fn load_graph(cfg: &HarnessConfig) -> Result<RoadGraph> {
    Ok(load_graph_csv(cfg.graph_path())?)
}

pub fn window_spec(
    cfg: &HarnessConfig,
    field: &SpeedField,
    horizon_min: u32,
) -> Result<WindowSpec> {
    WindowSpec::for_horizon(cfg.window_h, horizon_min, field.step_minutes())
        .map_err(|e| HarnessError::Usage(e.to_string()))
}

fn gbt_dir(cfg: &HarnessConfig, horizon_min: u32) -> PathBuf {
    cfg.models_dir().join(format!("gbt-{horizon_min}min"))
}

fn eopf_path(cfg: &HarnessConfig) -> PathBuf {
    cfg.models_dir().join(format!(
        "eopf-{}-{}min.txt",
        cfg.predictor.name(),
        cfg.horizon_min
    ))
}

fn nav_stem(cfg: &HarnessConfig) -> String {
    format!("{}-{}min", cfg.predictor.name(), cfg.horizon_min)
}

fn train_gbt(cfg: &HarnessConfig, field: &SpeedField, spec: WindowSpec) -> Result<GbtForecaster> {
    GbtForecaster::train(
        field,
        spec,
        &cfg.boost_params(),
        cfg.congestion(),
        cfg.train_ratio,
    )
}

/// Models from `train-predict` when present, otherwise freshly trained and saved.
pub fn gbt_models(
    cfg: &HarnessConfig,
    field: &SpeedField,
    spec: WindowSpec,
) -> Result<GbtForecaster> {
    let dir = gbt_dir(cfg, cfg.horizon_min);
    if dir.join("speed_0.txt").exists() {
        return GbtForecaster::load(&dir, field.n_roads(), spec);
    }
    log::info!("no saved models in {}; training", dir.display());
    let g = train_gbt(cfg, field, spec)?;
    g.save(&dir)?;
    Ok(g)
}

pub fn forecaster(
    cfg: &HarnessConfig,
    field: &SpeedField,
    spec: WindowSpec,
) -> Result<Box<dyn Forecaster>> {
    Ok(match cfg.predictor {
        PredictorKind::Gbt => Box::new(gbt_models(cfg, field, spec)?),
        PredictorKind::Oracle => Box::new(OracleForecaster {
            spec,
            thresholds: congestion_thresholds(field, cfg.congestion(), cfg.train_ratio)?,
        }),
        PredictorKind::PlantedBias => Box::new(PlantedBiasForecaster {
            spec,
            thresholds: congestion_thresholds(field, cfg.congestion(), cfg.train_ratio)?,
            c: cfg.planted_c,
        }),
    })
}

/// Drops a leading timestamp column and treats non-positive readings as
/// missing, then fills gaps.
pub fn clean_raw_speeds(text: &str) -> Result<SpeedField> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let first_cell = header
        .split(',')
        .next()
        .unwrap_or_default()
        .trim()
        .to_ascii_lowercase();
    let first_row_cell = lines
        .next()
        .and_then(|l| l.split(',').next())
        .unwrap_or_default()
        .trim();
    let has_index = matches!(
        first_cell.as_str(),
        "" | "timestamp" | "time" | "date" | "datetime"
    ) || (!first_row_cell.is_empty() && first_row_cell.parse::<f64>().is_err());
    let body = if has_index {
        text.lines()
            .map(|l| l.split_once(',').map_or("", |(_, rest)| rest))
            .collect::<Vec<_>>()
            .join("\n")
    } else {
        text.to_string()
    };
    let raw = read_speed_csv(&body, DEFAULT_STEP_MINUTES)?;
    let speeds = (0..raw.n_roads())
        .map(|r| {
            raw.series(r)
                .iter()
                .map(|&v| if v > 0.0 { v } else { f64::NAN })
                .collect()
        })
        .collect();
    let field = SpeedField::new(raw.road_ids().to_vec(), speeds, raw.step_minutes())?;
    Ok(interpolate_missing(&field)?)
}

pub fn ingest(cfg: &HarnessConfig) -> Result<()> {
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| HarnessError::Usage("ingest needs --data".into()))?;
    let text = std::fs::read_to_string(data).map_err(|e| HarnessError::io(data, e))?;
    let field = clean_raw_speeds(&text)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| HarnessError::io(&cfg.out, e))?;
    if let Some(path) = &cfg.graph {
        let graph = load_graph_csv(path)?;
        graph.align_roads(field.road_ids())?;
        write_graph_csv(&graph, cfg.out.join("graph.csv"))?;
    }
    write_speed_csv(&field, cfg.out.join("speeds.csv"))?;
    log::info!(
        "ingested {} roads x {} steps",
        field.n_roads(),
        field.n_steps()
    );
    Ok(())
}

pub fn synth(cfg: &HarnessConfig) -> Result<()> {
    let (field, graph) = gen_synthetic(cfg.synth_roads, cfg.synth_steps, cfg.seed, cfg.profile()?)
        .map_err(|e| HarnessError::Usage(e.to_string()))?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| HarnessError::io(&cfg.out, e))?;
    write_speed_csv(&field, cfg.out.join("speeds.csv"))?;
    write_graph_csv(&graph, cfg.out.join("graph.csv"))?;
    Ok(())
}

pub fn train_predict(cfg: &HarnessConfig) -> Result<()> {
    let field = load_field(cfg)?;
    let spec = window_spec(cfg, &field, cfg.horizon_min)?;
    train_gbt(cfg, &field, spec)?.save(&gbt_dir(cfg, cfg.horizon_min))
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct PredictResults {
    pub horizon_min: u32,
    pub speed: Vec<SpeedRow>,
    pub congestion: Vec<ClassRow>,
    pub roc: Vec<(f64, f64)>,
}

pub fn eval_predict(cfg: &HarnessConfig) -> Result<()> {
    let field = load_field(cfg)?;
    let spec = window_spec(cfg, &field, cfg.horizon_min)?;
    let gbt = gbt_models(cfg, &field, spec)?;
    let speed = prediction::eval_speed(&field, &gbt, &Model::SPEED, cfg)?;
    let congestion = prediction::eval_congestion(&field, &gbt, &Model::CONGESTION, cfg)?;
    write_json(
        &cfg.results_dir().join("eval-predict.json"),
        &PredictResults {
            horizon_min: cfg.horizon_min,
            speed: speed.rows,
            congestion: congestion.rows,
            roc: congestion.gbt_roc,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SweepResults {
    pub rows: Vec<HorizonRow>,
}

pub fn sweep_horizon(cfg: &HarnessConfig) -> Result<()> {
    let field = load_field(cfg)?;
    for &h in &cfg.horizons {
        window_spec(cfg, &field, h)?;
    }
    let rows = prediction::horizon_sweep(&field, &cfg.horizons, cfg)?;
    write_json(
        &cfg.results_dir().join("sweep-horizon.json"),
        &SweepResults { rows },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct EpochResults {
    pub horizon_min: u32,
    #[serde(flatten)]
    pub curve: EpochCurve,
}

pub fn epoch_curve(cfg: &HarnessConfig) -> Result<()> {
    if cfg.epoch_rounds == 0 {
        return Err(HarnessError::Usage(
            "epoch_rounds must be at least 1".into(),
        ));
    }
    let field = load_field(cfg)?;
    let spec = window_spec(cfg, &field, cfg.horizon_min)?;
    let curve = prediction::epoch_curve(&field, spec, cfg.epoch_rounds, cfg)?;
    write_json(
        &cfg.results_dir().join("epoch-curve.json"),
        &EpochResults {
            horizon_min: cfg.horizon_min,
            curve,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct UsabilityResults {
    pub horizon_min: u32,
    pub rows: Vec<UsabilityEntry>,
}

pub fn usability(cfg: &HarnessConfig) -> Result<()> {
    let field = load_field(cfg)?;
    let spec = window_spec(cfg, &field, cfg.horizon_min)?;
    let gbt = gbt_models(cfg, &field, spec)?;
    let speed = prediction::eval_speed(&field, &gbt, &[Model::Gbt], cfg)?;
    let rows = prediction::usability(&field, &speed.gbt_roads, &cfg.usability_k)?;
    write_json(
        &cfg.results_dir().join("usability.json"),
        &UsabilityResults {
            horizon_min: cfg.horizon_min,
            rows,
        },
    )
}

/// Navigation intervals split into EOPF history and evaluation, with the
/// request stream generated over all of them.
pub struct NavPlan {
    pub history: Vec<NavRequest>,
    pub evaluation: Vec<NavRequest>,
    pub history_intervals: Vec<usize>,
    pub evaluation_intervals: Vec<usize>,
}

pub fn nav_plan(
    cfg: &HarnessConfig,
    field: &SpeedField,
    graph: &RoadGraph,
    spec: WindowSpec,
) -> Result<NavPlan> {
    let intervals =
        evaluation_intervals(field.n_steps(), spec, cfg.train_ratio, cfg.nav_intervals)?;
    let n_hist = (cfg.eopf_history_frac * intervals.len() as f64 + 1e-9).floor() as usize;
    let requests = gen_requests(graph, cfg.requests_per_interval, &intervals, cfg.seed)?;
    let (history_intervals, evaluation_intervals) =
        (intervals[..n_hist].to_vec(), intervals[n_hist..].to_vec());
    let (history, evaluation) = requests
        .into_iter()
        .partition(|r| r.timestep < intervals.get(n_hist).copied().unwrap_or(usize::MAX));
    Ok(NavPlan {
        history,
        evaluation,
        history_intervals,
        evaluation_intervals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct EopfResults {
    pub predictor: String,
    pub horizon_min: u32,
    pub k_paths: usize,
    pub history_intervals: usize,
    pub history_requests: usize,
    /// Edge occurrences over every served candidate.
    pub edge_occurrences: usize,
    pub records: usize,
    pub skipped: usize,
    pub records_used: usize,
    pub final_loss: f64,
}

pub fn train_eopf_stage(cfg: &HarnessConfig) -> Result<()> {
    let field = load_field(cfg)?;
    let graph = load_graph(cfg)?;
    let spec = window_spec(cfg, &field, cfg.horizon_min)?;
    let plan = nav_plan(cfg, &field, &graph, spec)?;
    if plan.history.is_empty() {
        return Err(HarnessError::Usage(
            "eopf_history_frac leaves no history intervals".into(),
        ));
    }
    let f = forecaster(cfg, &field, spec)?;
    let forecasts = forecast_at(f.as_ref(), &field, &plan.history_intervals)?;
    let setup = NavSetup::new(&graph, &field, spec, cfg.k_paths)?;
    let served = served_history(&setup, &plan.history, &forecasts)?;
    let edge_occurrences: usize = served
        .iter()
        .flat_map(|s| &s.candidates)
        .map(Vec::len)
        .sum();
    let set = build_training_set(&served)?;
    if set.records.len() + set.skipped != edge_occurrences {
        return Err(HarnessError::Usage(format!(
            "record accounting mismatch: {} records + {} skipped != {edge_occurrences} edge occurrences",
            set.records.len(),
            set.skipped
        )));
    }
    let mut records = set.records.clone();
    if records.len() > cfg.eopf_max_records {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut keep =
            rand::seq::index::sample(&mut rng, records.len(), cfg.eopf_max_records).into_vec();
        keep.sort_unstable();
        records = keep.into_iter().map(|i| set.records[i]).collect();
    }
    let model = train_eopf(&records, &cfg.eopf_params())?;
    model.save(&eopf_path(cfg))?;
    write_json(
        &cfg.results_dir()
            .join(format!("train-eopf-{}.json", nav_stem(cfg))),
        &EopfResults {
            predictor: cfg.predictor.name().into(),
            horizon_min: cfg.horizon_min,
            k_paths: cfg.k_paths,
            history_intervals: plan.history_intervals.len(),
            history_requests: plan.history.len(),
            edge_occurrences,
            records: set.records.len(),
            skipped: set.skipped,
            records_used: records.len(),
            final_loss: model.loss_history.last().copied().unwrap_or(f64::NAN),
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct NavResults {
    pub predictor: String,
    pub horizon_min: u32,
    pub k_paths: usize,
    pub evaluation_intervals: usize,
    pub summary: NavSummary,
}

pub fn requests_csv(records: &[RegretRecord]) -> String {
    let mut s = String::from(
        "id,origin,destination,timestep,t_optimal,t_naive,t_predict,t_eopf,regret_naive,regret_predict,regret_eopf,eopf_rank\n",
    );
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for r in records {
        let q = &r.request;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            q.id,
            q.origin,
            q.destination,
            q.timestep,
            r.t_optimal,
            r.t_naive,
            r.t_predict,
            opt(r.t_eopf),
            r.regret_naive,
            r.regret_predict,
            opt(r.regret_eopf),
            r.eopf_rank.map_or(String::new(), |k| k.to_string())
        );
    }
    s
}

pub fn eval_nav(cfg: &HarnessConfig) -> Result<()> {
    let field = load_field(cfg)?;
    let graph = load_graph(cfg)?;
    let spec = window_spec(cfg, &field, cfg.horizon_min)?;
    let plan = nav_plan(cfg, &field, &graph, spec)?;
    if plan.evaluation.is_empty() {
        return Err(HarnessError::Usage(
            "eopf_history_frac leaves no evaluation intervals".into(),
        ));
    }
    let path = eopf_path(cfg);
    let eopf = if path.exists() {
        Some(MlpModel::load(&path)?)
    } else {
        log::info!(
            "no EOPF model at {}; evaluating without re-ranking",
            path.display()
        );
        None
    };
    let f = forecaster(cfg, &field, spec)?;
    let forecasts = forecast_at(f.as_ref(), &field, &plan.evaluation_intervals)?;
    let setup = NavSetup::new(&graph, &field, spec, cfg.k_paths)?;
    let outcome = eval_navigation(
        &setup,
        &plan.evaluation,
        &forecasts,
        eopf.as_ref().map(|m| m as &(dyn SpeedCorrector + Sync)),
    )?;
    let stem = nav_stem(cfg);
    write_text(
        &cfg.results_dir()
            .join(format!("eval-nav-{stem}-requests.csv")),
        &requests_csv(&outcome.records),
    )?;
    write_json(
        &cfg.results_dir().join(format!("eval-nav-{stem}.json")),
        &NavResults {
            predictor: cfg.predictor.name().into(),
            horizon_min: cfg.horizon_min,
            k_paths: cfg.k_paths,
            evaluation_intervals: plan.evaluation_intervals.len(),
            summary: summarize(&outcome),
        },
    )
}
