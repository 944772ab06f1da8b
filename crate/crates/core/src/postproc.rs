//! Post-processing of per-frame metric series into comparable fidelity
//! traces: run averaging, min-max normalisation with orientation,
//! Savitzky-Golay smoothing and summary statistics.
//!
//! Series carry gaps as `None` (frames where a metric could not be
//! evaluated, e.g. an empty cloud). Gaps are skipped by averaging, kept by
//! normalisation and smoothing, and excluded from the summaries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SG_WINDOW: usize = 11;
pub const DEFAULT_SG_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PostprocError {
    #[error("no runs to average")]
    NoRuns,
    #[error("run {run} has a different frame axis than run 0")]
    MismatchedFrames { run: usize },
    #[error("series needs at least two distinct finite values to normalise")]
    ConstantSeries,
    #[error("window must be odd and at least 3, got {0}")]
    InvalidWindow(usize),
    #[error("polynomial order {order} must be below the window length {window}")]
    InvalidOrder { window: usize, order: usize },
    #[error("series of length {len} is shorter than the window {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("series contains only gaps")]
    AllGaps,
}

/// Values indexed by frame, with gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSeries {
    pub frames: Vec<usize>,
    pub values: Vec<Option<f64>>,
}

impl FrameSeries {
    pub fn new(frames: Vec<usize>, values: Vec<Option<f64>>) -> Self {
        assert_eq!(frames.len(), values.len(), "one value per frame");
        Self { frames, values }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Element-wise mean across runs, skipping gaps. A frame missing in every
/// run stays a gap.
pub fn average_runs(runs: &[FrameSeries]) -> Result<FrameSeries, PostprocError> {
    let first = runs.first().ok_or(PostprocError::NoRuns)?;
    for (run, r) in runs.iter().enumerate().skip(1) {
        if r.frames != first.frames {
            return Err(PostprocError::MismatchedFrames { run });
        }
    }
    let values = (0..first.len())
        .map(|k| {
            // running mean: exact when all runs agree
            let (mean, count) =
                runs.iter()
                    .filter_map(|r| r.values[k])
                    .fold((0.0, 0usize), |(m, c), v| {
                        let c = c + 1;
                        (m + (v - m) / c as f64, c)
                    });
            (count > 0).then_some(mean)
        })
        .collect();
    Ok(FrameSeries::new(first.frames.clone(), values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// Distances: small raw values mean high fidelity.
    LowerIsBetter,
    /// Confidences: large raw values mean high fidelity.
    HigherIsBetter,
}

/// Min-max rescaling to [0, 1] oriented so that 1 is the best fidelity.
pub fn normalize_and_reverse(
    values: &[Option<f64>],
    orientation: Orientation,
) -> Result<Vec<Option<f64>>, PostprocError> {
    let (lo, hi) = values
        .iter()
        .flatten()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(hi > lo) {
        return Err(PostprocError::ConstantSeries);
    }
    let span = hi - lo;
    Ok(values
        .iter()
        .map(|v| {
            v.map(|v| {
                let scaled = ((v - lo) / span).clamp(0.0, 1.0);
                match orientation {
                    Orientation::LowerIsBetter => 1.0 - scaled,
                    Orientation::HigherIsBetter => scaled,
                }
            })
        })
        .collect())
}

/// Savitzky-Golay smoothing.
///
/// Every non-gap sample is replaced by the value at its own position of the
/// least-squares polynomial of degree `order` fitted over a window of
/// `window` samples. The window is centred where possible and shifted inward
/// at the series edges (a one-sided fit, no padding). Gaps inside a window
/// are left out of the fit; if fewer than `order + 1` samples remain the
/// degree drops accordingly. Gap positions stay gaps.
pub fn savitzky_golay(
    values: &[Option<f64>],
    window: usize,
    order: usize,
) -> Result<Vec<Option<f64>>, PostprocError> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(PostprocError::InvalidWindow(window));
    }
    if order >= window {
        return Err(PostprocError::InvalidOrder { window, order });
    }
    let n = values.len();
    if n < window {
        return Err(PostprocError::SeriesTooShort { len: n, window });
    }
    let half = window / 2;
    Ok((0..n)
        .map(|i| {
            values[i]?;
            let start = i.saturating_sub(half).min(n - window);
            let samples: Vec<(f64, f64)> = (start..start + window)
                .filter_map(|j| values[j].map(|y| ((j as f64 - i as f64) / half as f64, y)))
                .collect();
            let weights = fit_weights(&samples, order.min(samples.len() - 1));
            Some(weights.iter().zip(&samples).map(|(w, (_, y))| w * y).sum())
        })
        .collect())
}

/// Dense convenience wrapper over [`savitzky_golay`].
pub fn savitzky_golay_dense(
    values: &[f64],
    window: usize,
    order: usize,
) -> Result<Vec<f64>, PostprocError> {
    let wrapped: Vec<Option<f64>> = values.iter().copied().map(Some).collect();
    Ok(savitzky_golay(&wrapped, window, order)?
        .into_iter()
        .map(|v| v.expect("no gaps in, no gaps out"))
        .collect())
}

/// Weights that map the samples to the fitted polynomial's value at offset
/// zero: the first row of the Vandermonde pseudo-inverse.
fn fit_weights(samples: &[(f64, f64)], degree: usize) -> Vec<f64> {
    let a = DMatrix::from_fn(samples.len(), degree + 1, |r, c| {
        samples[r].0.powi(c as i32)
    });
    let pinv = a
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .expect("SVD with both factors computed");
    pinv.row(0).iter().copied().collect()
}

/// Population mean and standard deviation over the non-gap values.
pub fn summarize(values: &[Option<f64>]) -> Result<(f64, f64), PostprocError> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(PostprocError::AllGaps);
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// A metric's per-frame values in raw, normalised and smoothed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityTrace {
    pub metric_name: String,
    pub frames: Vec<usize>,
    pub raw: Vec<Option<f64>>,
    /// 1 is the best fidelity in the series, 0 the worst.
    pub normalized: Vec<Option<f64>>,
    pub smoothed: Vec<Option<f64>>,
    /// Mean of `normalized`.
    pub mean: f64,
    /// Population standard deviation of `normalized`.
    pub std: f64,
}

impl FidelityTrace {
    pub fn build(
        metric_name: impl Into<String>,
        series: FrameSeries,
        orientation: Orientation,
        sg_window: usize,
        sg_order: usize,
    ) -> Result<Self, PostprocError> {
        let normalized = normalize_and_reverse(&series.values, orientation)?;
        let smoothed = savitzky_golay(&normalized, sg_window, sg_order)?;
        let (mean, std) = summarize(&normalized)?;
        Ok(Self {
            metric_name: metric_name.into(),
            frames: series.frames,
            raw: series.values,
            normalized,
            smoothed,
            mean,
            std,
        })
    }

    pub fn summary(&self) -> Result<(f64, f64), PostprocError> {
        summarize(&self.normalized)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().copied().map(Some).collect()
    }

    #[test]
    fn averaging_examples() {
        let runs = [
            FrameSeries::new(vec![0, 1], dense(&[1.0, 2.0])),
            FrameSeries::new(vec![0, 1], dense(&[3.0, 4.0])),
        ];
        assert_eq!(average_runs(&runs).unwrap().values, dense(&[2.0, 3.0]));
        assert_eq!(average_runs(&runs[..1]).unwrap(), runs[0]);
        let gappy = [
            FrameSeries::new(vec![0, 1], vec![Some(1.0), None]),
            FrameSeries::new(vec![0, 1], dense(&[3.0, 4.0])),
        ];
        assert_eq!(average_runs(&gappy).unwrap().values, dense(&[2.0, 4.0]));
        let all_gap = [
            FrameSeries::new(vec![0], vec![None]),
            FrameSeries::new(vec![0], vec![None]),
        ];
        assert_eq!(average_runs(&all_gap).unwrap().values, vec![None]);
    }

    #[test]
    fn averaging_rejects_mismatched_axes() {
        let runs = [
            FrameSeries::new(vec![0, 1], dense(&[1.0, 2.0])),
            FrameSeries::new(vec![0, 2], dense(&[3.0, 4.0])),
        ];
        assert_eq!(
            average_runs(&runs),
            Err(PostprocError::MismatchedFrames { run: 1 })
        );
        assert_eq!(average_runs(&[]), Err(PostprocError::NoRuns));
    }

    #[test]
    fn normalisation_examples() {
        assert_eq!(
            normalize_and_reverse(&dense(&[2.0, 4.0, 6.0]), Orientation::LowerIsBetter).unwrap(),
            dense(&[1.0, 0.5, 0.0])
        );
        assert_eq!(
            normalize_and_reverse(&dense(&[0.2, 0.8]), Orientation::HigherIsBetter).unwrap(),
            dense(&[0.0, 1.0])
        );
        assert_eq!(
            normalize_and_reverse(&dense(&[5.0, 5.0, 5.0]), Orientation::LowerIsBetter),
            Err(PostprocError::ConstantSeries)
        );
        assert_eq!(
            normalize_and_reverse(&[None, Some(1.0)], Orientation::LowerIsBetter),
            Err(PostprocError::ConstantSeries)
        );
        assert_eq!(
            normalize_and_reverse(&[Some(1.0), None, Some(3.0)], Orientation::HigherIsBetter)
                .unwrap(),
            vec![Some(0.0), None, Some(1.0)]
        );
    }

    #[test]
    fn sg_reproduces_quadratic() {
        let p: Vec<f64> = (0..25).map(|t| (t * t - 3 * t + 1) as f64).collect();
        let out = savitzky_golay_dense(&p, 7, 2).unwrap();
        for (a, b) in p.iter().zip(&out) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn sg_keeps_constants() {
        let c = vec![4.25; 15];
        for v in savitzky_golay_dense(&c, 5, 2).unwrap() {
            assert!((v - 4.25).abs() < 1e-12);
        }
    }

    #[test]
    fn sg_center_coefficient() {
        // oracle: quadratic least squares over t = -2..2 evaluated at 0 has
        // weights (-3, 12, 17, 12, -3) / 35
        let mut impulse = vec![0.0; 11];
        impulse[5] = 1.0;
        let out = savitzky_golay_dense(&impulse, 5, 2).unwrap();
        assert!((out[5] - 17.0 / 35.0).abs() < 1e-12);
        assert!((out[4] - 12.0 / 35.0).abs() < 1e-12);
        assert!((out[3] + 3.0 / 35.0).abs() < 1e-12);
        assert!(out[2].abs() < 1e-12);
    }

    #[test]
    fn sg_argument_errors() {
        let s = dense(&[1.0; 10]);
        assert_eq!(
            savitzky_golay(&s, 4, 2),
            Err(PostprocError::InvalidWindow(4))
        );
        assert_eq!(
            savitzky_golay(&s, 1, 0),
            Err(PostprocError::InvalidWindow(1))
        );
        assert_eq!(
            savitzky_golay(&s, 5, 5),
            Err(PostprocError::InvalidOrder {
                window: 5,
                order: 5
            })
        );
        assert_eq!(
            savitzky_golay(&s, 11, 2),
            Err(PostprocError::SeriesTooShort {
                len: 10,
                window: 11
            })
        );
    }

    #[test]
    fn sg_gaps_stay_gaps_and_fit_on_neighbours() {
        let mut s: Vec<Option<f64>> = (0..15).map(|t| Some(2.0 * t as f64 + 1.0)).collect();
        s[6] = None;
        s[7] = None;
        let out = savitzky_golay(&s, 5, 1).unwrap();
        assert_eq!(out[6], None);
        assert_eq!(out[7], None);
        for (i, v) in out.iter().enumerate() {
            if let Some(v) = v {
                assert!((v - (2.0 * i as f64 + 1.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn summary_examples() {
        assert_eq!(summarize(&dense(&[0.0, 1.0])).unwrap(), (0.5, 0.5));
        assert_eq!(summarize(&dense(&[0.25, 0.75])).unwrap(), (0.5, 0.25));
        assert_eq!(summarize(&[None, Some(0.5), None]).unwrap(), (0.5, 0.0));
        assert_eq!(summarize(&[None, None]), Err(PostprocError::AllGaps));
    }

    #[test]
    fn trace_build_is_consistent() {
        let raw: Vec<f64> = (0..30).map(|t| ((t as f64) * 0.3).sin() + 2.0).collect();
        let mut values = dense(&raw);
        values[10] = None;
        let series = FrameSeries::new((0..30).collect(), values);
        let trace = FidelityTrace::build("emd", series, Orientation::LowerIsBetter, 11, 3).unwrap();
        assert_eq!(trace.frames.len(), 30);
        assert_eq!(trace.normalized.len(), 30);
        assert_eq!(trace.smoothed.len(), 30);
        assert_eq!(trace.normalized[10], None);
        assert!(trace
            .normalized
            .iter()
            .flatten()
            .all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(trace.summary().unwrap(), (trace.mean, trace.std));
    }

    fn series_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0..100.0f64, 12..40)
    }

    proptest! {
        #[test]
        fn normalisation_is_affine_invariant(v in series_strategy(), a in 0.01..50.0f64, b in -100.0..100.0f64) {
            let base = normalize_and_reverse(&dense(&v), Orientation::LowerIsBetter);
            let moved: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            let shifted = normalize_and_reverse(&dense(&moved), Orientation::LowerIsBetter);
            if let (Ok(p), Ok(q)) = (base, shifted) {
                for (x, y) in p.iter().zip(&q) {
                    prop_assert!((x.unwrap() - y.unwrap()).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn sg_is_linear(f in series_strategy(), a in -5.0..5.0f64, b in -5.0..5.0f64, seed in 0u64..1000) {
            let g: Vec<f64> = f.iter().enumerate().map(|(i, x)| (x * 0.37 + (i as f64) + seed as f64).cos() * 10.0).collect();
            let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
            let sf = savitzky_golay_dense(&f, 7, 3).unwrap();
            let sg = savitzky_golay_dense(&g, 7, 3).unwrap();
            let sc = savitzky_golay_dense(&combo, 7, 3).unwrap();
            for i in 0..f.len() {
                prop_assert!((sc[i] - (a * sf[i] + b * sg[i])).abs() < 1e-10);
            }
        }

        #[test]
        fn sg_reproduces_cubics(c in prop::array::uniform4(-2.0..2.0f64)) {
            let p: Vec<f64> = (0..30).map(|t| {
                let t = t as f64 / 10.0;
                c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t
            }).collect();
            let out = savitzky_golay_dense(&p, 11, 3).unwrap();
            for (x, y) in p.iter().zip(&out) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn averaging_identical_runs_is_exact(v in series_strategy(), k in 1usize..20) {
            let s = FrameSeries::new((0..v.len()).collect(), dense(&v));
            let runs = vec![s.clone(); k];
            prop_assert_eq!(average_runs(&runs).unwrap(), s);
        }
    }
}
