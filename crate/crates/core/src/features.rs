//! Per-second feature extraction from an aggregate power trace.
//!
//! Each sample t maps to a vector of dimension `2*w + 1`, laid out as:
//!
//! 1. the `w`-sample window of raw watts centered on t (edge-padded by
//!    repeating the first/last sample),
//! 2. the `w - 1` first differences of that window,
//! 3. `sin` and `cos` of the time-of-day angle `2π·t / 86400`.
//!
//! The window captures level, the differences capture edges (appliance
//! switch-on/off transients), and the angle encodes daily routine without a
//! discontinuity at midnight.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::trace::{PowerTrace, SECONDS_PER_DAY};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("window width must be odd and >= 1, got {0}")]
    BadWindow(usize),
    #[error("cannot featurize an empty trace")]
    EmptyTrace,
}

/// Dimension of a feature vector for window width `w`.
pub fn feature_dim(w: usize) -> usize {
    2 * w + 1
}

/// Row-major matrix of per-second feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    n_rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Build a matrix directly from row-major data; `featurize` is the
    /// public path. Only classifier tests construct matrices by hand.
    #[cfg(test)]
    pub(crate) fn from_rows(dim: usize, data: Vec<f64>) -> FeatureMatrix {
        assert!(dim > 0 && data.len() % dim == 0, "ragged row data");
        FeatureMatrix {
            dim,
            n_rows: data.len() / dim,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Compute feature vectors for every second of `samples`.
///
/// `t` indexes the second of day, so a partial trace (shorter than a day)
/// still gets correct time-of-day angles. `w` must be odd so the window has a
/// center sample.
pub fn featurize(samples: &[f64], w: usize) -> Result<FeatureMatrix, FeatureError> {
    if w == 0 || w % 2 == 0 {
        return Err(FeatureError::BadWindow(w));
    }
    if samples.is_empty() {
        return Err(FeatureError::EmptyTrace);
    }
    let dim = feature_dim(w);
    let half = w / 2;
    let n = samples.len();
    let last = n - 1;
    let mut data = Vec::with_capacity(n * dim);
    for t in 0..n {
        // Window with edge replication.
        for k in 0..w {
            let idx = (t + k).saturating_sub(half).min(last);
            data.push(samples[idx]);
        }
        // First differences of the window just written.
        let start = data.len() - w;
        for k in 1..w {
            data.push(data[start + k] - data[start + k - 1]);
        }
        let angle = TAU * t as f64 / SECONDS_PER_DAY as f64;
        data.push(angle.sin());
        data.push(angle.cos());
    }
    Ok(FeatureMatrix { dim, n_rows: n, data })
}

/// Convenience wrapper over [`featurize`] for a trace.
pub fn featurize_trace(trace: &PowerTrace, w: usize) -> Result<FeatureMatrix, FeatureError> {
    featurize(trace.samples(), w)
}

/// Per-feature affine rescaling to zero mean and unit variance, fit on
/// training data and replayed verbatim at prediction time.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    /// Fit means and standard deviations column-wise. Constant columns get
    /// scale 1 so transforming never divides by zero.
    pub fn fit(matrix: &FeatureMatrix) -> Standardizer {
        let dim = matrix.dim();
        let n = matrix.n_rows() as f64;
        let mut mean = vec![0.0; dim];
        for row in matrix.rows() {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for row in matrix.rows() {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(row) {
                let d = x - m;
                *v += d * d;
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn transform_row_into(&self, row: &[f64], out: &mut [f64]) {
        for i in 0..row.len() {
            out[i] = (row[i] - self.mean[i]) / self.scale[i];
        }
    }

    pub fn transform(&self, matrix: &mut FeatureMatrix) {
        for i in 0..matrix.n_rows() {
            let row = matrix.row_mut(i);
            for (j, x) in row.iter_mut().enumerate() {
                *x = (*x - self.mean[j]) / self.scale[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_is_2w_plus_1() {
        for w in [1, 3, 9, 21] {
            let samples = vec![0.0; 50];
            let m = featurize(&samples, w).unwrap();
            assert_eq!(m.dim(), 2 * w + 1);
            assert_eq!(m.n_rows(), 50);
        }
    }

    #[test]
    fn even_or_zero_window_rejected() {
        assert!(matches!(featurize(&[1.0], 0), Err(FeatureError::BadWindow(0))));
        assert!(matches!(featurize(&[1.0], 4), Err(FeatureError::BadWindow(4))));
    }

    #[test]
    fn matches_explicit_padded_construction() {
        // Oracle: build the padded sequence up front, then slice windows out
        // of it, rather than clamping indices on the fly.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &w in &[1usize, 3, 5, 9] {
            let n = rng.gen_range(w..200);
            let samples: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2000.0)).collect();
            let m = featurize(&samples, w).unwrap();

            let half = w / 2;
            let mut padded = vec![samples[0]; half];
            padded.extend_from_slice(&samples);
            padded.extend(std::iter::repeat(samples[n - 1]).take(half));
            for t in 0..n {
                let window = &padded[t..t + w];
                let row = m.row(t);
                assert_eq!(&row[..w], window, "window at t={t}, w={w}");
                for k in 1..w {
                    assert_eq!(row[w + k - 1], window[k] - window[k - 1], "diff {k} at t={t}");
                }
            }
        }
    }

    #[test]
    fn ramp_has_unit_diffs_in_interior() {
        let samples: Vec<f64> = (0..100).map(|t| t as f64).collect();
        let w = 5;
        let m = featurize(&samples, w).unwrap();
        let row = m.row(50);
        assert_eq!(&row[..w], &[48.0, 49.0, 50.0, 51.0, 52.0]);
        assert_eq!(&row[w..2 * w - 1], &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn time_angle_hits_known_quarters() {
        let samples = vec![0.0; SECONDS_PER_DAY];
        let m = featurize(&samples, 1).unwrap();
        let dim = m.dim();
        let check = |t: usize, sin: f64, cos: f64| {
            let row = m.row(t);
            assert!((row[dim - 2] - sin).abs() < 1e-12, "sin at t={t}");
            assert!((row[dim - 1] - cos).abs() < 1e-12, "cos at t={t}");
        };
        check(0, 0.0, 1.0);
        check(21_600, 1.0, 0.0); // 06:00
        check(43_200, 0.0, -1.0); // 12:00
        check(64_800, -1.0, 0.0); // 18:00
    }

    #[test]
    fn time_angle_is_unit_circle() {
        let samples = vec![0.0; 500];
        let m = featurize(&samples, 1).unwrap();
        for row in m.rows() {
            let (s, c) = (row[1], row[2]);
            assert!((s * s + c * c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn w1_rows_are_sample_sin_cos() {
        let samples = vec![7.0, 9.0];
        let m = featurize(&samples, 1).unwrap();
        assert_eq!(m.row(0)[0], 7.0);
        assert_eq!(m.row(1)[0], 9.0);
        assert_eq!(m.dim(), 3);
    }

    #[test]
    fn standardizer_yields_zero_mean_unit_variance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<f64> = (0..400).map(|_| rng.gen_range(0.0..1500.0)).collect();
        let mut m = featurize(&samples, 3).unwrap();
        let st = Standardizer::fit(&m);
        st.transform(&mut m);
        let n = m.n_rows() as f64;
        for j in 0..m.dim() {
            let mean: f64 = m.rows().map(|r| r[j]).sum::<f64>() / n;
            let var: f64 = m.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9, "col {j} mean {mean}");
            // Constant columns stay constant; everything else must hit unit
            // variance.
            assert!(var < 1e-9 || (var - 1.0).abs() < 1e-9, "col {j} var {var}");
        }
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let mut m = featurize(&[5.0, 5.0, 5.0, 5.0], 1).unwrap();
        let st = Standardizer::fit(&m);
        st.transform(&mut m);
        for row in m.rows() {
            assert_eq!(row[0], 0.0);
            assert!(row.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn transform_row_matches_matrix_transform() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..100.0)).collect();
        let m = featurize(&samples, 5).unwrap();
        let st = Standardizer::fit(&m);
        let mut whole = m.clone();
        st.transform(&mut whole);
        let mut buf = vec![0.0; m.dim()];
        for i in 0..m.n_rows() {
            st.transform_row_into(m.row(i), &mut buf);
            assert_eq!(&buf[..], whole.row(i));
        }
    }
}
