//! Nonparametric copula entropy and mutual information.
//!
//! Estimation happens in two steps. Each column is first mapped through its
//! empirical marginal CDF, which yields pseudo-observations from the empirical
//! copula. The differential entropy of those pseudo-observations is then
//! estimated with a k-nearest-neighbour (Kozachenko–Leonenko) estimator under
//! the max-norm. Mutual information is the negated copula entropy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;
use thiserror::Error;

/// Neighbour count used when callers do not choose one.
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CopentError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// Two rows coincide, so a k-th neighbour distance is exactly zero.
    #[error("degenerate sample: rows {row} and {duplicate_of} are identical")]
    DegenerateSample { row: usize, duplicate_of: usize },
}

/// T observations of N real variables, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    labels: Vec<String>,
}

impl SampleMatrix {
    /// Builds a matrix from row-major values.
    ///
    /// Requires at least two rows, at least one column, finite entries and
    /// one label per column.
    pub fn new(values: Vec<f64>, rows: usize, cols: usize, labels: Vec<String>) -> Result<Self, CopentError> {
        if rows < 2 {
            return Err(CopentError::InvalidInput(format!(
                "need at least 2 observations, got {rows}"
            )));
        }
        if cols < 1 {
            return Err(CopentError::InvalidInput("need at least 1 variable".into()));
        }
        if values.len() != rows * cols {
            return Err(CopentError::InvalidInput(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if labels.len() != cols {
            return Err(CopentError::InvalidInput(format!(
                "expected {cols} column labels, got {}",
                labels.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(CopentError::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self {
            values,
            rows,
            cols,
            labels,
        })
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns(columns: &[&[f64]], labels: &[&str]) -> Result<Self, CopentError> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) {
            return Err(CopentError::InvalidInput("columns have different lengths".into()));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for t in 0..rows {
            values.extend(columns.iter().map(|c| c[t]));
        }
        Self::new(values, rows, cols, labels.iter().map(|s| s.to_string()).collect())
    }

    /// Builds a matrix from a list of rows with default labels `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CopentError> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(CopentError::InvalidInput("rows have different lengths".into()));
        }
        let values = rows.iter().flatten().copied().collect();
        let labels = (0..cols).map(|i| format!("x{i}")).collect();
        Self::new(values, rows.len(), cols, labels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.cols..(t + 1) * self.cols]
    }

    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.values[t * self.cols + i]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.rows).map(|t| self.get(t, i)).collect()
    }

    /// Keeps only the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self, CopentError> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(CopentError::InvalidInput(format!(
                "column {bad} out of range for {} columns",
                self.cols
            )));
        }
        let mut values = Vec::with_capacity(self.rows * cols.len());
        for t in 0..self.rows {
            values.extend(cols.iter().map(|&c| self.get(t, c)));
        }
        let labels = cols.iter().map(|&c| self.labels[c].clone()).collect();
        Self::new(values, self.rows, cols.len(), labels)
    }

    /// Applies `f` to every entry of column `i`.
    pub fn map_column(&self, i: usize, f: impl Fn(f64) -> f64) -> Result<Self, CopentError> {
        let mut values = self.values.clone();
        for t in 0..self.rows {
            let idx = t * self.cols + i;
            values[idx] = f(values[idx]);
        }
        Self::new(values, self.rows, self.cols, self.labels.clone())
    }

    /// Adds seeded Gaussian noise with standard deviation `scale` to every
    /// entry. Only meant for heavily tied data; estimators never jitter on
    /// their own.
    pub fn jittered(&self, scale: f64, seed: u64) -> Result<Self, CopentError> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(CopentError::Parameter(format!(
                "jitter scale must be finite and non-negative, got {scale}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = self
            .values
            .iter()
            .map(|&v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v + scale * z
            })
            .collect();
        Self::new(values, self.rows, self.cols, self.labels.clone())
    }
}

/// Pseudo-observations of the empirical copula, one row per source row.
#[derive(Debug, Clone)]
pub struct CopulaSample<'a> {
    values: SampleMatrix,
    source: &'a SampleMatrix,
}

impl<'a> CopulaSample<'a> {
    pub fn values(&self) -> &SampleMatrix {
        &self.values
    }

    pub fn source(&self) -> &'a SampleMatrix {
        self.source
    }

    pub fn into_matrix(self) -> SampleMatrix {
        self.values
    }
}

/// An entropy (or mutual information) estimate in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub k: usize,
    pub n_samples: usize,
}

/// Maps every column through its empirical CDF.
///
/// Entry `(t, i)` becomes `#{s : x[s][i] <= x[t][i]} / T`, so tied values all
/// receive the largest rank of their group and the maximum is exactly 1.
pub fn empirical_copula(samples: &SampleMatrix) -> Result<CopulaSample<'_>, CopentError> {
    let t_len = samples.rows();
    let n = samples.cols();
    let denom = t_len as f64;
    let mut out = vec![0.0; t_len * n];
    for i in 0..n {
        let mut sorted = samples.column(i);
        if sorted.iter().any(|v| !v.is_finite()) {
            return Err(CopentError::InvalidInput(format!("non-finite entry in column {i}")));
        }
        sorted.sort_by(f64::total_cmp);
        for t in 0..t_len {
            let x = samples.get(t, i);
            let count = sorted.partition_point(|&v| v <= x);
            out[t * n + i] = count as f64 / denom;
        }
    }
    let values = SampleMatrix::new(out, t_len, n, samples.labels().to_vec())?;
    Ok(CopulaSample {
        values,
        source: samples,
    })
}

/// Max-norm distance from every row to its k-th nearest other row.
///
/// Exact search: rows are swept outward in order of the first coordinate and
/// a direction is abandoned once the first-coordinate gap alone reaches the
/// current k-th distance.
pub(crate) fn kth_neighbor_distances(samples: &SampleMatrix, k: usize) -> Vec<f64> {
    let t_len = samples.rows();
    let mut order: Vec<usize> = (0..t_len).collect();
    order.sort_by(|&a, &b| samples.get(a, 0).total_cmp(&samples.get(b, 0)).then(a.cmp(&b)));
    let mut position = vec![0usize; t_len];
    for (q, &row) in order.iter().enumerate() {
        position[row] = q;
    }

    let max_dist = |a: usize, b: usize| -> f64 {
        samples
            .row(a)
            .iter()
            .zip(samples.row(b))
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    };

    let mut best: Vec<f64> = Vec::with_capacity(k + 1);
    let mut out = vec![0.0; t_len];
    for (row, eps) in out.iter_mut().enumerate() {
        best.clear();
        let q = position[row];
        let x0 = samples.get(row, 0);
        let mut lo = q.checked_sub(1);
        let mut hi = if q + 1 < t_len { Some(q + 1) } else { None };
        while lo.is_some() || hi.is_some() {
            // Visit whichever side is closer along the sorted coordinate.
            let gap_lo = lo.map(|p| x0 - samples.get(order[p], 0));
            let gap_hi = hi.map(|p| samples.get(order[p], 0) - x0);
            let take_lo = match (gap_lo, gap_hi) {
                (Some(a), Some(b)) => a <= b,
                (Some(_), None) => true,
                _ => false,
            };
            let (gap, p) = if take_lo {
                (gap_lo.unwrap_or(f64::INFINITY), lo.unwrap_or(0))
            } else {
                (gap_hi.unwrap_or(f64::INFINITY), hi.unwrap_or(0))
            };
            if best.len() == k && gap >= best[k - 1] {
                break;
            }
            let d = max_dist(row, order[p]);
            if best.len() < k || d < best[k - 1] {
                let at = best.partition_point(|&b| b <= d);
                best.insert(at, d);
                best.truncate(k);
            }
            if take_lo {
                lo = p.checked_sub(1);
            } else {
                hi = if p + 1 < t_len { Some(p + 1) } else { None };
            }
        }
        *eps = best[k - 1];
    }
    out
}

fn check_k(samples: &SampleMatrix, k: usize) -> Result<(), CopentError> {
    if k == 0 || k >= samples.rows() {
        return Err(CopentError::Parameter(format!(
            "k must satisfy 1 <= k < T (k = {k}, T = {})",
            samples.rows()
        )));
    }
    Ok(())
}

/// Kozachenko–Leonenko differential entropy estimate in nats.
///
/// `H = psi(T) - psi(k) + (d/T) * sum_t ln(2 * eps_t)` with `eps_t` the
/// max-norm distance to the k-th neighbour; the max-norm unit ball has
/// volume `2^d`, which the factor 2 absorbs.
pub fn knn_entropy(samples: &SampleMatrix, k: usize) -> Result<EntropyEstimate, CopentError> {
    check_k(samples, k)?;
    let t_len = samples.rows();
    let d = samples.cols() as f64;
    let eps = kth_neighbor_distances(samples, k);
    if let Some(row) = eps.iter().position(|&e| e == 0.0) {
        let duplicate_of = (0..t_len)
            .find(|&s| s != row && samples.row(s) == samples.row(row))
            .unwrap_or(row);
        return Err(CopentError::DegenerateSample { row, duplicate_of });
    }
    let log_sum: f64 = eps.iter().map(|e| (2.0 * e).ln()).sum();
    let value = digamma(t_len as f64) - digamma(k as f64) + d * log_sum / t_len as f64;
    Ok(EntropyEstimate {
        value,
        k,
        n_samples: t_len,
    })
}

/// Copula entropy: kNN entropy of the empirical copula sample.
pub fn copula_entropy(samples: &SampleMatrix, k: usize) -> Result<EntropyEstimate, CopentError> {
    if samples.cols() < 2 {
        return Err(CopentError::InvalidInput(
            "copula entropy needs at least 2 variables".into(),
        ));
    }
    check_k(samples, k)?;
    let copula = empirical_copula(samples)?;
    knn_entropy(copula.values(), k)
}

/// Mutual information, the negated copula entropy.
pub fn mutual_information(samples: &SampleMatrix, k: usize) -> Result<EntropyEstimate, CopentError> {
    let ce = copula_entropy(samples, k)?;
    Ok(EntropyEstimate { value: -ce.value, ..ce })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> SampleMatrix {
        SampleMatrix::from_columns(&[values], &["x"]).unwrap()
    }

    #[test]
    fn copula_of_unsorted_column() {
        let m = col(&[3.0, 1.0, 2.0]);
        let u = empirical_copula(&m).unwrap();
        assert_eq!(u.values().column(0), vec![1.0, 1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn ties_share_the_maximal_rank() {
        let m = col(&[5.0, 5.0]);
        assert_eq!(empirical_copula(&m).unwrap().values().column(0), vec![1.0, 1.0]);
        let m = col(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(
            empirical_copula(&m).unwrap().values().column(0),
            vec![0.25, 0.75, 0.75, 1.0]
        );
    }

    #[test]
    fn sorted_column_maps_to_uniform_grid() {
        let m = col(&[-4.0, 0.1, 2.5, 100.0]);
        assert_eq!(
            empirical_copula(&m).unwrap().values().column(0),
            vec![0.25, 0.5, 0.75, 1.0]
        );
    }

    #[test]
    fn copula_keeps_provenance() {
        let m = col(&[1.0, 2.0, 3.0]);
        let u = empirical_copula(&m).unwrap();
        assert!(std::ptr::eq(u.source(), &m));
    }

    #[test]
    fn non_finite_input_rejected() {
        let err = SampleMatrix::from_columns(&[&[1.0, f64::NAN]], &["x"]).unwrap_err();
        assert!(matches!(err, CopentError::InvalidInput(_)));
    }

    #[test]
    fn k_must_be_below_sample_count() {
        let m = col(&[1.0, 2.0, 3.0]);
        assert!(matches!(knn_entropy(&m, 3), Err(CopentError::Parameter(_))));
        assert!(matches!(knn_entropy(&m, 0), Err(CopentError::Parameter(_))));
        assert!(knn_entropy(&m, 2).is_ok());
    }

    #[test]
    fn duplicate_rows_are_degenerate() {
        let m = SampleMatrix::from_rows(&[vec![0.0, 1.0], vec![0.3, 0.2], vec![0.0, 1.0], vec![0.9, 0.5]]).unwrap();
        match knn_entropy(&m, 1) {
            Err(CopentError::DegenerateSample { row, duplicate_of }) => {
                assert_eq!((row, duplicate_of), (0, 2));
            }
            other => panic!("expected degenerate sample, got {other:?}"),
        }
    }

    #[test]
    fn single_column_copula_entropy_rejected() {
        let m = col(&[1.0, 2.0, 3.0]);
        assert!(copula_entropy(&m, 1).is_err());
    }

    #[test]
    fn neighbour_sweep_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| {
                (0..3)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (z * 4.0).round() / 4.0 + z * 1e-3
                    })
                    .collect()
            })
            .collect();
        let m = SampleMatrix::from_rows(&rows).unwrap();
        for k in [1, 3, 7] {
            let fast = kth_neighbor_distances(&m, k);
            for (t, &eps) in fast.iter().enumerate() {
                let mut d: Vec<f64> = (0..rows.len())
                    .filter(|&s| s != t)
                    .map(|s| {
                        rows[t]
                            .iter()
                            .zip(&rows[s])
                            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
                    })
                    .collect();
                d.sort_by(f64::total_cmp);
                assert_eq!(eps, d[k - 1], "row {t}, k {k}");
            }
        }
    }

    #[test]
    fn jitter_is_seeded() {
        let m = col(&[1.0, 1.0, 1.0, 2.0]);
        let a = m.jittered(1e-6, 3).unwrap();
        let b = m.jittered(1e-6, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, m);
        assert!(m.jittered(-1.0, 3).is_err());
    }
}
