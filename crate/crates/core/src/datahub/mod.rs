//! Speed matrices, windowed datasets and congestion labels.
//!
//! A [`SpeedField`] stores one row per road and one column per timestep.
//! Missing readings are held as `NaN` until [`interpolate_missing`] clears
//! them; in CSV files they are empty cells.

mod csv_io;
mod synthetic;

use std::ops::Range;

use crate::{Error, Result};

pub use csv_io::{
    load_graph_csv, load_speed_csv, read_graph_csv, read_speed_csv, write_graph_csv,
    write_speed_csv, write_speed_csv_to,
};
pub use synthetic::{gen_synthetic, Profile};

/// Marker for a missing reading.
pub const MISSING: f64 = f64::NAN;

/// Minutes per timestep of the loop-detector corpus.
pub const DEFAULT_STEP_MINUTES: u32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedField {
    road_ids: Vec<String>,
    speeds: Vec<Vec<f64>>,
    step_minutes: u32,
}

impl SpeedField {
    /// `speeds[road][t]`; every road must have the same number of steps.
    pub fn new(road_ids: Vec<String>, speeds: Vec<Vec<f64>>, step_minutes: u32) -> Result<Self> {
        if road_ids.is_empty() {
            return Err(Error::EmptyDataset("speed field has no roads".into()));
        }
        if road_ids.len() != speeds.len() {
            return Err(Error::DimensionMismatch {
                expected: road_ids.len(),
                got: speeds.len(),
            });
        }
        let n_steps = speeds[0].len();
        if n_steps < 2 {
            return Err(Error::EmptyDataset(format!(
                "speed field needs at least 2 timesteps, got {n_steps}"
            )));
        }
        if let Some(row) = speeds.iter().find(|r| r.len() != n_steps) {
            return Err(Error::DimensionMismatch {
                expected: n_steps,
                got: row.len(),
            });
        }
        if step_minutes == 0 {
            return Err(Error::invalid("step_minutes must be positive"));
        }
        Ok(SpeedField {
            road_ids,
            speeds,
            step_minutes,
        })
    }

    pub fn n_roads(&self) -> usize {
        self.road_ids.len()
    }

    pub fn n_steps(&self) -> usize {
        self.speeds[0].len()
    }

    pub fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    pub fn road_ids(&self) -> &[String] {
        &self.road_ids
    }

    pub fn road_index(&self, road: &str) -> Result<usize> {
        self.road_ids
            .iter()
            .position(|r| r == road)
            .ok_or_else(|| Error::UnknownRoad(road.to_string()))
    }

    pub fn series(&self, road: usize) -> &[f64] {
        &self.speeds[road]
    }

    pub fn speed(&self, road: usize, t: usize) -> f64 {
        self.speeds[road][t]
    }

    /// Speeds of every road at one timestep.
    pub fn snapshot(&self, t: usize) -> Vec<f64> {
        self.speeds.iter().map(|r| r[t]).collect()
    }

    /// True when every reading is finite and positive.
    pub fn is_clean(&self) -> bool {
        self.speeds
            .iter()
            .flatten()
            .all(|v| v.is_finite() && *v > 0.0)
    }

    /// Keeps only the first `n_steps` timesteps.
    pub fn truncated(&self, n_steps: usize) -> Result<Self> {
        let n = n_steps.min(self.n_steps());
        Self::new(
            self.road_ids.clone(),
            self.speeds.iter().map(|r| r[..n].to_vec()).collect(),
            self.step_minutes,
        )
    }
}

/// Window size `h` and target offset `d`: features are `x[t..=t+h]`, the
/// target is `x[t+d]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub h: usize,
    pub d: usize,
}

impl WindowSpec {
    pub fn new(h: usize, d: usize) -> Result<Self> {
        if d <= h {
            return Err(Error::invalid(format!(
                "target offset d={d} must exceed window size h={h}"
            )));
        }
        Ok(WindowSpec { h, d })
    }

    /// Offset such that the target lies `horizon_minutes` after the last
    /// reading of the window.
    pub fn for_horizon(h: usize, horizon_minutes: u32, step_minutes: u32) -> Result<Self> {
        if step_minutes == 0 || horizon_minutes == 0 || horizon_minutes % step_minutes != 0 {
            return Err(Error::invalid(format!(
                "horizon {horizon_minutes} min is not a positive multiple of the {step_minutes} min step"
            )));
        }
        Self::new(h, h + (horizon_minutes / step_minutes) as usize)
    }

    /// Length of the state vector.
    pub fn len(&self) -> usize {
        self.h + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Steps between the last reading of the window and the target.
    pub fn lead(&self) -> usize {
        self.d - self.h
    }
}

/// One supervised example: the state vector starting at `t` and the value
/// `d` steps after `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub features: Vec<f64>,
    pub target: f64,
    /// Row of the road in its [`SpeedField`].
    pub road: usize,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CongestionConfig {
    /// Percentile of training-range speeds below which a road is congested.
    pub p: f64,
}

impl Default for CongestionConfig {
    fn default() -> Self {
        CongestionConfig { p: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CongestionLabels {
    /// One label per timestep of the road.
    pub labels: Vec<bool>,
    pub threshold: f64,
}

/// Fills gaps linearly between the nearest valid readings; leading and
/// trailing gaps take the nearest valid value.
pub fn interpolate_missing(field: &SpeedField) -> Result<SpeedField> {
    let speeds = field
        .speeds
        .iter()
        .zip(&field.road_ids)
        .map(|(row, id)| fill_row(row).ok_or_else(|| Error::UnusableRoad(id.clone())))
        .collect::<Result<Vec<_>>>()?;
    SpeedField::new(field.road_ids.clone(), speeds, field.step_minutes)
}

fn fill_row(row: &[f64]) -> Option<Vec<f64>> {
    let valid: Vec<usize> = (0..row.len()).filter(|&i| row[i].is_finite()).collect();
    let (&first, &last) = (valid.first()?, valid.last()?);
    let mut out = row.to_vec();
    out[..first].fill(row[first]);
    out[last + 1..].fill(row[last]);
    for pair in valid.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let span = (b - a) as f64;
        for (i, slot) in out.iter_mut().enumerate().take(b).skip(a + 1) {
            let w = (i - a) as f64 / span;
            *slot = row[a] + w * (row[b] - row[a]);
        }
    }
    Some(out)
}

/// All regression samples of one road: one per origin `t` in
/// `0..n_steps - d`.
pub fn make_windows(field: &SpeedField, road: &str, spec: WindowSpec) -> Result<Vec<WindowSample>> {
    let road = field.road_index(road)?;
    make_windows_for(field, road, spec)
}

pub fn make_windows_for(
    field: &SpeedField,
    road: usize,
    spec: WindowSpec,
) -> Result<Vec<WindowSample>> {
    windows_with(field, road, spec, |t| field.speed(road, t))
}

/// Classification samples whose target is the 0/1 label at `t + d`.
pub fn make_label_windows(
    field: &SpeedField,
    road: usize,
    spec: WindowSpec,
    labels: &[bool],
) -> Result<Vec<WindowSample>> {
    if labels.len() != field.n_steps() {
        return Err(Error::DimensionMismatch {
            expected: field.n_steps(),
            got: labels.len(),
        });
    }
    windows_with(field, road, spec, |t| f64::from(u8::from(labels[t])))
}

fn windows_with(
    field: &SpeedField,
    road: usize,
    spec: WindowSpec,
    target: impl Fn(usize) -> f64,
) -> Result<Vec<WindowSample>> {
    let n = field.n_steps();
    if n <= spec.d {
        return Err(Error::EmptyDataset(format!(
            "{n} timesteps leave no samples for target offset {}",
            spec.d
        )));
    }
    let series = field.series(road);
    Ok((0..n - spec.d)
        .map(|t| WindowSample {
            features: series[t..=t + spec.h].to_vec(),
            target: target(t + spec.d),
            road,
            t,
        })
        .collect())
}

/// Percentile with linear interpolation between order statistics
/// (rank `p/100 * (n-1)`).
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyDataset("percentile of an empty set".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::invalid(format!("percentile {p} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Ok(sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Labels every timestep of `road` as congested when its speed is strictly
/// below the `p`-th percentile of the speeds in `threshold_source`.
pub fn label_congestion(
    field: &SpeedField,
    road: &str,
    cfg: CongestionConfig,
    threshold_source: Range<usize>,
) -> Result<CongestionLabels> {
    let road = field.road_index(road)?;
    label_congestion_for(field, road, cfg, threshold_source)
}

pub fn label_congestion_for(
    field: &SpeedField,
    road: usize,
    cfg: CongestionConfig,
    threshold_source: Range<usize>,
) -> Result<CongestionLabels> {
    if threshold_source.is_empty() || threshold_source.end > field.n_steps() {
        return Err(Error::EmptyDataset(format!(
            "threshold range {threshold_source:?} is empty or outside 0..{}",
            field.n_steps()
        )));
    }
    let series = field.series(road);
    let threshold = percentile(&series[threshold_source], cfg.p)?;
    Ok(CongestionLabels {
        labels: series.iter().map(|&v| v < threshold).collect(),
        threshold,
    })
}

/// Chronological split: the first `floor(ratio * N)` samples by origin go to
/// training.
pub fn split_train_test(
    mut samples: Vec<WindowSample>,
    ratio: f64,
) -> Result<(Vec<WindowSample>, Vec<WindowSample>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!(
            "split ratio {ratio} outside (0, 1)"
        )));
    }
    samples.sort_by_key(|s| s.t);
    let n_train = train_len(samples.len(), ratio);
    if n_train == 0 || n_train == samples.len() {
        return Err(Error::EmptyDataset(format!(
            "ratio {ratio} on {} samples leaves one side empty",
            samples.len()
        )));
    }
    let test = samples.split_off(n_train);
    Ok((samples, test))
}

/// `floor(ratio * n)`, robust to the representation error of `ratio`.
pub fn train_len(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64) + 1e-9).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(rows: Vec<Vec<f64>>) -> SpeedField {
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        SpeedField::new(ids, rows, 5).unwrap()
    }

    #[test]
    fn interior_gap_is_linear() {
        let f = interpolate_missing(&field(vec![vec![10.0, MISSING, 20.0]])).unwrap();
        assert_eq!(f.series(0), &[10.0, 15.0, 20.0]);
    }

    #[test]
    fn edge_gaps_are_flat() {
        let f = interpolate_missing(&field(vec![vec![MISSING, 8.0, MISSING]])).unwrap();
        assert_eq!(f.series(0), &[8.0, 8.0, 8.0]);
    }

    #[test]
    fn all_missing_road_is_named() {
        let f = field(vec![vec![1.0, 2.0], vec![MISSING, MISSING]]);
        match interpolate_missing(&f) {
            Err(Error::UnusableRoad(id)) => assert_eq!(id, "r1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn masked_sine_fill_stays_within_lipschitz_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let omega = 2.0 * std::f64::consts::PI / 96.0;
        let truth: Vec<f64> = (0..500)
            .map(|t| 50.0 + 10.0 * (omega * t as f64).sin())
            .collect();
        let mut masked = truth.clone();
        for v in masked.iter_mut().skip(1).take(497) {
            if rng.random_bool(0.2) {
                *v = MISSING;
            }
        }
        // the series moves at most 10*omega per step
        let lipschitz = 10.0 * omega;
        let filled = interpolate_missing(&field(vec![masked])).unwrap();
        let worst = filled
            .series(0)
            .iter()
            .zip(&truth)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < lipschitz, "{worst} >= {lipschitz}");
    }

    #[test]
    fn windows_from_definition() {
        let f = field(vec![vec![1.0, 2.0, 3.0, 4.0]]);
        let w = make_windows(&f, "r0", WindowSpec::new(1, 2).unwrap()).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(
            (w[0].features.clone(), w[0].target, w[0].t),
            (vec![1.0, 2.0], 3.0, 0)
        );
        assert_eq!(
            (w[1].features.clone(), w[1].target, w[1].t),
            (vec![2.0, 3.0], 4.0, 1)
        );
    }

    #[test]
    fn degenerate_window() {
        let f = field(vec![vec![5.0, 6.0, 7.0, 8.0, 9.0]]);
        let w = make_windows(&f, "r0", WindowSpec::new(0, 1).unwrap()).unwrap();
        assert_eq!(w.len(), 4);
        for s in &w {
            assert_eq!(s.features, vec![f.speed(0, s.t)]);
            assert_eq!(s.target, f.speed(0, s.t + 1));
        }
    }

    #[test]
    fn default_horizon_window_count() {
        let f = field(vec![vec![1.0; 2016]]);
        let spec = WindowSpec::for_horizon(11, 5, 5).unwrap();
        assert_eq!(spec, WindowSpec { h: 11, d: 12 });
        assert_eq!(make_windows_for(&f, 0, spec).unwrap().len(), 2016 - 12);
    }

    #[test]
    fn too_short_series_has_no_windows() {
        let f = field(vec![vec![1.0; 12]]);
        let err = make_windows_for(&f, 0, WindowSpec::new(11, 12).unwrap());
        assert!(matches!(err, Err(Error::EmptyDataset(_))));
        assert!(WindowSpec::new(3, 3).is_err());
        assert!(WindowSpec::for_horizon(11, 7, 5).is_err());
    }

    #[test]
    fn window_count_exhaustive() {
        for n in 2..=32usize {
            let f = field(vec![(0..n).map(|v| v as f64 + 1.0).collect()]);
            for d in 1..n {
                for h in 0..d {
                    let spec = WindowSpec::new(h, d).unwrap();
                    let w = make_windows_for(&f, 0, spec).unwrap();
                    assert_eq!(w.len(), n - d);
                    assert!(w.iter().all(|s| s.features.len() == h + 1));
                }
            }
        }
    }

    #[test]
    fn percentile_matches_sorted_oracle() {
        let values: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        // rank 9.9 between the 10th and 11th order statistics
        assert!((percentile(&values, 10.0).unwrap() - 10.9).abs() < 1e-12);
    }

    #[test]
    fn congestion_labels_use_strict_inequality() {
        let speeds: Vec<f64> = (1..=100).map(f64::from).collect();
        let f = field(vec![speeds.clone()]);
        let out = label_congestion(&f, "r0", CongestionConfig::default(), 0..100).unwrap();
        assert!((out.threshold - 10.9).abs() < 1e-12);
        for (v, l) in speeds.iter().zip(&out.labels) {
            assert_eq!(*l, *v < 10.9);
        }
        assert_eq!(out.labels.iter().filter(|&&l| l).count(), 10);

        let flat = field(vec![vec![42.0; 20]]);
        let out = label_congestion(&flat, "r0", CongestionConfig::default(), 0..20).unwrap();
        assert_eq!(out.threshold, 42.0);
        assert!(out.labels.iter().all(|&l| !l));
        assert_eq!(CongestionConfig::default().p, 10.0);
    }

    #[test]
    fn congestion_threshold_range_must_be_nonempty() {
        let f = field(vec![vec![1.0, 2.0, 3.0]]);
        assert!(label_congestion(&f, "r0", CongestionConfig::default(), 1..1).is_err());
    }

    #[test]
    fn congestion_extreme_percentiles() {
        let f = field(vec![vec![3.0, 1.0, 4.0, 1.0, 5.0, 5.0, 2.0]]);
        let zero = label_congestion_for(&f, 0, CongestionConfig { p: 0.0 }, 0..7).unwrap();
        assert!(zero.labels.iter().all(|&l| !l));
        let full = label_congestion_for(&f, 0, CongestionConfig { p: 100.0 }, 0..7).unwrap();
        let expected: Vec<bool> = f.series(0).iter().map(|&v| v != 5.0).collect();
        assert_eq!(full.labels, expected);
    }

    fn samples(n: usize) -> Vec<WindowSample> {
        (0..n)
            .map(|t| WindowSample {
                features: vec![t as f64],
                target: t as f64,
                road: 0,
                t,
            })
            .collect()
    }

    #[test]
    fn split_counts() {
        let (train, test) = split_train_test(samples(10), 0.8).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert!(train.iter().map(|s| s.t).max() < test.iter().map(|s| s.t).min());
        let (train, test) = split_train_test(samples(3), 0.5).unwrap();
        assert_eq!((train.len(), test.len()), (1, 2));
        let (train, test) = split_train_test(samples(2004), 0.8).unwrap();
        assert_eq!((train.len(), test.len()), (1603, 401));
    }

    #[test]
    fn split_rejects_empty_sides() {
        assert!(split_train_test(samples(1), 0.5).is_err());
        assert!(split_train_test(samples(10), 1.0).is_err());
        assert!(split_train_test(samples(10), 0.0).is_err());
    }

    proptest! {
        #[test]
        fn interpolation_is_idempotent(
            values in prop::collection::vec(prop::option::weighted(0.7, 1.0f64..100.0), 2..60)
        ) {
            prop_assume!(values.iter().any(Option::is_some));
            let row: Vec<f64> = values.iter().map(|v| v.unwrap_or(MISSING)).collect();
            let once = interpolate_missing(&field(vec![row])).unwrap();
            let twice = interpolate_missing(&once).unwrap();
            prop_assert!(once.is_clean());
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn split_preserves_every_sample(n in 2usize..200, ratio in 0.05f64..0.95, seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut input = samples(n);
            input.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let n_train = train_len(n, ratio);
            prop_assume!(n_train > 0 && n_train < n);
            let (train, test) = split_train_test(input, ratio).unwrap();
            let mut ts: Vec<usize> = train.iter().chain(&test).map(|s| s.t).collect();
            ts.sort_unstable();
            prop_assert_eq!(ts, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(train.len(), n_train);
        }
    }
}
