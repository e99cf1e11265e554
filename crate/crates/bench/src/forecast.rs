//! Per-road forecasts `(ŝ, p̂, σ̂)` at `t + d` from the window starting at `t`.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use roadcast::datahub::{
    label_congestion_for, make_label_windows, make_windows_for, split_train_test, train_len,
    CongestionConfig, SpeedField, WindowSpec,
};
use roadcast::gbtree::{
    train_classifier, train_regressor, BoostParams, BoostedEnsemble, Objective,
};
use roadcast::uncertainty::window_sigma;

use crate::{HarnessError, Result};

/// Forecast speeds are floored here so that every edge stays priceable.
pub const MIN_FORECAST_SPEED: f64 = 1.0;

/// Raw score of a classifier that saw a single class; saturates the clamped
/// probability.
const SATURATED_LOGIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadForecast {
    pub speed: f64,
    pub congestion_prob: f64,
    pub sigma: f64,
}

pub trait Forecaster: Sync {
    fn spec(&self) -> WindowSpec;

    /// One forecast per road of `field`, in field order.
    fn forecast(&self, field: &SpeedField, t: usize) -> Result<Vec<RoadForecast>>;
}

/// Forecasts at every listed window origin, computed in parallel.
pub fn forecast_at<F: Forecaster + ?Sized>(
    forecaster: &F,
    field: &SpeedField,
    origins: &[usize],
) -> Result<BTreeMap<usize, Vec<RoadForecast>>> {
    let mut unique = origins.to_vec();
    unique.sort_unstable();
    unique.dedup();
    unique
        .par_iter()
        .map(|&t| forecaster.forecast(field, t).map(|f| (t, f)))
        .collect()
}

/// Timesteps whose speeds define congestion thresholds and train models.
pub fn training_range(field: &SpeedField, ratio: f64) -> Range<usize> {
    0..train_len(field.n_steps(), ratio)
}

pub fn congestion_thresholds(
    field: &SpeedField,
    cfg: CongestionConfig,
    ratio: f64,
) -> Result<Vec<f64>> {
    (0..field.n_roads())
        .map(|r| Ok(label_congestion_for(field, r, cfg, training_range(field, ratio))?.threshold))
        .collect()
}

fn window(field: &SpeedField, road: usize, t: usize, spec: WindowSpec) -> Result<&[f64]> {
    if t + spec.d >= field.n_steps() {
        return Err(HarnessError::Usage(format!(
            "window origin {t} leaves no target inside {} steps",
            field.n_steps()
        )));
    }
    Ok(&field.series(road)[t..=t + spec.h])
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtForecaster {
    pub spec: WindowSpec,
    pub speed: Vec<BoostedEnsemble>,
    pub congestion: Vec<BoostedEnsemble>,
}

/// A classifier that always answers `positive`.
fn constant_classifier(positive: bool, params: &BoostParams, n_features: usize) -> BoostedEnsemble {
    BoostedEnsemble {
        base_score: if positive {
            SATURATED_LOGIT
        } else {
            -SATURATED_LOGIT
        },
        trees: Vec::new(),
        params: *params,
        objective: Objective::Logistic,
        n_features,
    }
}

impl GbtForecaster {
    /// Trains one speed regressor and one congestion classifier per road on
    /// its chronological training split.
    pub fn train(
        field: &SpeedField,
        spec: WindowSpec,
        params: &BoostParams,
        congestion: CongestionConfig,
        ratio: f64,
    ) -> Result<Self> {
        let range = training_range(field, ratio);
        let models = (0..field.n_roads())
            .into_par_iter()
            .map(|r| {
                let (train, _) = split_train_test(make_windows_for(field, r, spec)?, ratio)?;
                let speed = train_regressor(&train, params)?;
                let labels = label_congestion_for(field, r, congestion, range.clone())?;
                let (ctrain, _) =
                    split_train_test(make_label_windows(field, r, spec, &labels.labels)?, ratio)?;
                let class = match train_classifier(&ctrain, params) {
                    Ok(m) => m,
                    Err(roadcast::Error::SingleClass(_)) => {
                        let positive = ctrain[0].target == 1.0;
                        log::warn!(
                            "road {}: congestion labels are single-class; probability fixed at {}",
                            field.road_ids()[r],
                            u8::from(positive)
                        );
                        constant_classifier(positive, params, spec.len())
                    }
                    Err(e) => return Err(e.into()),
                };
                Ok((speed, class))
            })
            .collect::<Result<Vec<_>>>()?;
        let (speed, congestion) = models.into_iter().unzip();
        Ok(GbtForecaster {
            spec,
            speed,
            congestion,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        for (r, (s, c)) in self.speed.iter().zip(&self.congestion).enumerate() {
            s.save(&dir.join(format!("speed_{r}.txt")))?;
            c.save(&dir.join(format!("congestion_{r}.txt")))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, n_roads: usize, spec: WindowSpec) -> Result<Self> {
        let mut speed = Vec::with_capacity(n_roads);
        let mut congestion = Vec::with_capacity(n_roads);
        for r in 0..n_roads {
            for (name, out) in [("speed", &mut speed), ("congestion", &mut congestion)] {
                let m = BoostedEnsemble::load(&dir.join(format!("{name}_{r}.txt")))?;
                if m.n_features != spec.len() {
                    return Err(roadcast::Error::DimensionMismatch {
                        expected: spec.len(),
                        got: m.n_features,
                    }
                    .into());
                }
                out.push(m);
            }
        }
        Ok(GbtForecaster {
            spec,
            speed,
            congestion,
        })
    }
}

impl Forecaster for GbtForecaster {
    fn spec(&self) -> WindowSpec {
        self.spec
    }

    fn forecast(&self, field: &SpeedField, t: usize) -> Result<Vec<RoadForecast>> {
        if field.n_roads() != self.speed.len() {
            return Err(roadcast::Error::DimensionMismatch {
                expected: self.speed.len(),
                got: field.n_roads(),
            }
            .into());
        }
        (0..field.n_roads())
            .map(|r| {
                let w = window(field, r, t, self.spec)?;
                Ok(RoadForecast {
                    speed: self.speed[r].predict(w)?.max(MIN_FORECAST_SPEED),
                    congestion_prob: self.congestion[r].predict_proba(w)?,
                    sigma: window_sigma(w),
                })
            })
            .collect()
    }
}

/// Knows the realised future. Congestion probability is the realised label.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleForecaster {
    pub spec: WindowSpec,
    pub thresholds: Vec<f64>,
}

impl Forecaster for OracleForecaster {
    fn spec(&self) -> WindowSpec {
        self.spec
    }

    fn forecast(&self, field: &SpeedField, t: usize) -> Result<Vec<RoadForecast>> {
        realised(field, t, self.spec, &self.thresholds, 0.0)
    }
}

/// Realised speed plus `c` window spreads: confident where calm, optimistic
/// where volatile.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedBiasForecaster {
    pub spec: WindowSpec,
    pub thresholds: Vec<f64>,
    pub c: f64,
}

impl Forecaster for PlantedBiasForecaster {
    fn spec(&self) -> WindowSpec {
        self.spec
    }

    fn forecast(&self, field: &SpeedField, t: usize) -> Result<Vec<RoadForecast>> {
        realised(field, t, self.spec, &self.thresholds, self.c)
    }
}

fn realised(
    field: &SpeedField,
    t: usize,
    spec: WindowSpec,
    thresholds: &[f64],
    c: f64,
) -> Result<Vec<RoadForecast>> {
    if thresholds.len() != field.n_roads() {
        return Err(roadcast::Error::DimensionMismatch {
            expected: field.n_roads(),
            got: thresholds.len(),
        }
        .into());
    }
    (0..field.n_roads())
        .map(|r| {
            let sigma = window_sigma(window(field, r, t, spec)?);
            let actual = field.speed(r, t + spec.d);
            Ok(RoadForecast {
                speed: actual + c * sigma,
                congestion_prob: f64::from(u8::from(actual < thresholds[r])),
                sigma,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use roadcast::datahub::{gen_synthetic, Profile};

    #[test]
    fn oracle_returns_target_speeds() {
        let (field, _) = gen_synthetic(4, 200, 1, Profile::Smooth).unwrap();
        let spec = WindowSpec::new(3, 5).unwrap();
        let thresholds = congestion_thresholds(&field, CongestionConfig::default(), 0.8).unwrap();
        let oracle = OracleForecaster { spec, thresholds };
        let f = oracle.forecast(&field, 10).unwrap();
        for (r, rf) in f.iter().enumerate() {
            assert_eq!(rf.speed, field.speed(r, 15));
            assert!(rf.sigma >= 0.0);
        }
        assert!(oracle.forecast(&field, 195).is_err());
    }

    #[test]
    fn planted_bias_adds_scaled_spread() {
        let (field, _) = gen_synthetic(3, 200, 2, Profile::Volatile).unwrap();
        let spec = WindowSpec::new(4, 6).unwrap();
        let thresholds = congestion_thresholds(&field, CongestionConfig::default(), 0.8).unwrap();
        let planted = PlantedBiasForecaster {
            spec,
            thresholds: thresholds.clone(),
            c: 2.0,
        };
        let truth = OracleForecaster { spec, thresholds };
        let (a, b) = (
            planted.forecast(&field, 20).unwrap(),
            truth.forecast(&field, 20).unwrap(),
        );
        for (p, o) in a.iter().zip(&b) {
            assert!((p.speed - (o.speed + 2.0 * o.sigma)).abs() < 1e-12);
        }
    }

    #[test]
    fn gbt_models_round_trip_through_files() {
        let (field, _) = gen_synthetic(3, 300, 3, Profile::RushHour).unwrap();
        let spec = WindowSpec::new(5, 6).unwrap();
        let params = BoostParams {
            rounds: 5,
            ..BoostParams::default()
        };
        let g =
            GbtForecaster::train(&field, spec, &params, CongestionConfig::default(), 0.8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        g.save(dir.path()).unwrap();
        let back = GbtForecaster::load(dir.path(), 3, spec).unwrap();
        assert_eq!(back, g);
        assert!(GbtForecaster::load(dir.path(), 3, WindowSpec::new(6, 7).unwrap()).is_err());
        let f = g.forecast(&field, 40).unwrap();
        assert!(f
            .iter()
            .all(|x| x.speed >= MIN_FORECAST_SPEED && (0.0..=1.0).contains(&x.congestion_prob)));
    }
}
