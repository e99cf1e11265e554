//! Spectral predictability factors.
//!
//! The transform uses the positive exponent `X[k] = sum_t x[t] e^{+j 2 pi t k / N}`.
//! Only magnitudes feed the factors, so the sign convention does not change
//! any result.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::metrics::pearson;
use crate::{Error, Result};

/// DFT coefficients of a real series.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm()).collect()
    }
}

/// Discrete Fourier transform. Power-of-two lengths use an iterative radix-2
/// transform; other lengths go through `rustfft`'s unnormalised inverse
/// transform, which carries the same positive exponent.
pub fn dft(x: &[f64]) -> Spectrum {
    let n = x.len();
    let coeffs = if n.is_power_of_two() {
        radix2(x)
    } else {
        mixed_radix(x)
    };
    Spectrum { coeffs }
}

fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64))
        .collect()
}

fn mixed_radix(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_inverse(x.len())
        .process(&mut buf);
    buf
}

fn radix2(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let bits = n.trailing_zeros();
    let mut a: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
    for (i, &v) in x.iter().enumerate() {
        let j = if bits == 0 {
            0
        } else {
            i.reverse_bits() >> (usize::BITS - bits)
        };
        a[j] = Complex64::new(v, 0.0);
    }
    let table = twiddles(n);
    let mut len = 2;
    while len <= n {
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for i in 0..len / 2 {
                let w = table[i * stride];
                let u = a[start + i];
                let v = a[start + i + len / 2] * w;
                a[start + i] = u + v;
                a[start + i + len / 2] = u - v;
            }
        }
        len <<= 1;
    }
    a
}

/// Share of spectral L1 mass in bins `0..=k`.
pub fn sr_factor(x: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k >= x.len() {
        return Err(Error::invalid(format!(
            "SR needs 0 < K < N, got K={k}, N={}",
            x.len()
        )));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("SR of an all-zero series is undefined"));
    }
    let mags = dft(x).magnitudes();
    let low: f64 = mags[..=k].iter().sum();
    let total: f64 = mags.iter().sum();
    Ok(low / total)
}

/// `(K-th largest - K-th smallest) / mean`.
pub fn bias_factor(x: &[f64], k: usize) -> Result<f64> {
    if k == 0 || x.len() < 2 * k {
        return Err(Error::invalid(format!(
            "Bias needs K >= 1 and at least 2K values, got K={k}, N={}",
            x.len()
        )));
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::invalid(format!(
            "Bias needs a positive mean, got {mean}"
        )));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((sorted[x.len() - k] - sorted[k - 1]) / mean)
}

/// Per-road prediction errors on the test split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadScores {
    pub rmse: f64,
    pub mae: f64,
    pub acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Sr,
    Bias,
}

/// One row of the usability table: correlation of a factor at one `K` with
/// each error metric across roads.
#[derive(Debug, Clone, PartialEq)]
pub struct UsabilityRow {
    pub factor: Factor,
    pub k: usize,
    pub corr_rmse: f64,
    pub corr_mae: f64,
    pub corr_acc: f64,
}

/// Correlates SR and Bias at every `K` with per-road RMSE, MAE and Acc. SR
/// rows come first, then Bias rows, each in `k_list` order.
pub fn usability_study(
    series: &[&[f64]],
    scores: &[RoadScores],
    k_list: &[usize],
) -> Result<Vec<UsabilityRow>> {
    if series.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: series.len(),
            got: scores.len(),
        });
    }
    if series.len() < 3 {
        return Err(Error::invalid(format!(
            "usability study needs at least 3 roads, got {}",
            series.len()
        )));
    }
    let rmse: Vec<f64> = scores.iter().map(|s| s.rmse).collect();
    let mae: Vec<f64> = scores.iter().map(|s| s.mae).collect();
    let acc: Vec<f64> = scores.iter().map(|s| s.acc).collect();

    let mut rows = Vec::with_capacity(2 * k_list.len());
    for factor in [Factor::Sr, Factor::Bias] {
        for &k in k_list {
            let values = series
                .iter()
                .map(|x| match factor {
                    Factor::Sr => sr_factor(x, k),
                    Factor::Bias => bias_factor(x, k),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(UsabilityRow {
                factor,
                k,
                corr_rmse: pearson(&values, &rmse)?,
                corr_mae: pearson(&values, &mae)?,
                corr_acc: pearson(&values, &acc)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Straight summation with freshly evaluated trigonometry.
    fn naive(x: &[f64]) -> Vec<Complex64> {
        let n = x.len() as f64;
        (0..x.len())
            .map(|k| {
                x.iter()
                    .enumerate()
                    .fold(Complex64::new(0.0, 0.0), |acc, (t, &v)| {
                        let theta = 2.0 * PI * (t as f64) * (k as f64) / n;
                        acc + Complex64::new(v * theta.cos(), v * theta.sin())
                    })
            })
            .collect()
    }

    #[test]
    fn constant_is_dc_only() {
        let s = dft(&[2.5; 4]);
        assert!((s.coeffs[0] - Complex64::new(10.0, 0.0)).norm() < 1e-12);
        for c in &s.coeffs[1..] {
            assert!(c.norm() < 1e-12);
        }
    }

    #[test]
    fn alternating_sign_is_nyquist() {
        let s = dft(&[1.0, -1.0, 1.0, -1.0]);
        let mags = s.magnitudes();
        assert!((mags[2] - 4.0).abs() < 1e-12);
        assert!(mags[0] < 1e-12 && mags[1] < 1e-12 && mags[3] < 1e-12);
    }

    #[test]
    fn positive_exponent_convention() {
        // x = delta at t=1: X[k] = e^{+j 2 pi k / N}
        let s = dft(&[0.0, 1.0, 0.0, 0.0, 0.0]);
        let expected = Complex64::from_polar(1.0, 2.0 * PI / 5.0);
        assert!((s.coeffs[1] - expected).norm() < 1e-12);
        let s = dft(&[0.0, 1.0, 0.0, 0.0]);
        assert!((s.coeffs[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn matches_naive_on_random_input() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for n in [127usize, 128] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = dft(&x);
            for (a, b) in fast.coeffs.iter().zip(naive(&x)) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn sr_of_constant_is_one() {
        for k in 1..8 {
            assert!((sr_factor(&[3.0; 16], k).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sr_of_quarter_band_tone_is_zero() {
        let x: Vec<f64> = (0..64)
            .map(|t| (2.0 * PI * 16.0 * t as f64 / 64.0).cos())
            .collect();
        assert!(sr_factor(&x, 2).unwrap() < 1e-12);
    }

    #[test]
    fn factor_errors() {
        assert!(sr_factor(&[0.0; 8], 2).is_err());
        assert!(sr_factor(&[1.0; 8], 8).is_err());
        assert!(bias_factor(&[1.0, 2.0, 3.0], 2).is_err());
        assert!(bias_factor(&[-1.0, -2.0], 1).is_err());
    }

    #[test]
    fn bias_hand_values() {
        assert_eq!(bias_factor(&[4.0; 10], 3).unwrap(), 0.0);
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((bias_factor(&x, 1).unwrap() - 9.0 / 5.5).abs() < 1e-12);
    }

    #[test]
    fn usability_needs_three_roads() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let s = RoadScores {
            rmse: 1.0,
            mae: 1.0,
            acc: 0.9,
        };
        assert!(usability_study(&[&a, &a], &[s, s], &[1]).is_err());
    }

    proptest! {
        #[test]
        fn parseval_and_conjugate_symmetry(x in prop::collection::vec(-100.0f64..100.0, 1..80)) {
            let s = dft(&x);
            let n = x.len();
            let time: f64 = x.iter().map(|v| v * v).sum();
            let freq: f64 = s.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
            prop_assert!((time - freq).abs() <= 1e-9 * time.max(1e-300));
            for k in 1..n {
                let d = s.coeffs[k] - s.coeffs[n - k].conj();
                prop_assert!(d.norm() <= 1e-9 * (1.0 + s.coeffs[k].norm()));
            }
        }

        #[test]
        fn sr_nondecreasing_in_k(x in prop::collection::vec(1.0f64..100.0, 8..64)) {
            let mut prev = 0.0;
            for k in 1..x.len() {
                let sr = sr_factor(&x, k).unwrap();
                prop_assert!(sr >= prev);
                prop_assert!(sr > 0.0 && sr <= 1.0 + 1e-12);
                prev = sr;
            }
        }

        #[test]
        fn factors_are_scale_invariant(x in prop::collection::vec(1.0f64..100.0, 8..64), c in 0.1f64..50.0) {
            let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
            let (a, b) = (sr_factor(&x, 3).unwrap(), sr_factor(&scaled, 3).unwrap());
            prop_assert!((a - b).abs() < 1e-10);
            let (a, b) = (bias_factor(&x, 2).unwrap(), bias_factor(&scaled, 2).unwrap());
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
