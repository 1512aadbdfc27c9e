//! Row-stochastic matrices, the coefficient of ergodicity and certificates of
//! uniform mixing over windows of matrix products.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::planar::Vec2;
use crate::{Error, Result};

/// Absolute tolerance on row sums accepted at construction.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Nonnegative square matrix whose rows sum to one, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowStochasticMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl RowStochasticMatrix {
    /// Validates and wraps row-major `entries`.
    ///
    /// Rows within [`ROW_SUM_TOLERANCE`] of one are rescaled to sum to one
    /// exactly (up to rounding); anything further off is rejected.
    pub fn new(n: usize, mut entries: Vec<f64>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::Shape { n, len: entries.len() });
        }
        for row in 0..n {
            let slice = &mut entries[row * n..(row + 1) * n];
            for (col, &value) in slice.iter().enumerate() {
                if !(value >= 0.0) || !value.is_finite() {
                    return Err(Error::NegativeEntry { row, col, value });
                }
            }
            let sum: f64 = slice.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::RowSum { row, sum });
            }
            if sum != 1.0 {
                slice.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(Self { n, entries })
    }

    /// Wraps `entries` without any check. Only for exercising the property
    /// suites against malformed input.
    #[doc(hidden)]
    pub fn from_raw_unchecked(n: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), n * n);
        Self { n, entries }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Shape { n, len: row.len() * n });
            }
            entries.extend_from_slice(row);
        }
        Self::new(n, entries)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    /// `(1/n)·11ᵀ`, the matrix that reaches consensus in one step.
    pub fn uniform(n: usize) -> Self {
        Self { n, entries: vec![1.0 / n as f64; n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &RowStochasticMatrix) -> Result<RowStochasticMatrix> {
        if rhs.n != self.n {
            return Err(Error::Dimension { expected: self.n, got: rhs.n });
        }
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for s in 0..n {
                let a = self.entries[i * n + s];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    entries[i * n + j] += a * rhs.entries[s * n + j];
                }
            }
        }
        Self::new(n, entries)
    }

    /// `(A ⊗ I₂)·x` for a stacked planar vector.
    pub fn apply_planar(&self, x: &[Vec2]) -> Result<Vec<Vec2>> {
        if x.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: x.len() });
        }
        Ok((0..self.n)
            .map(|i| {
                let mut acc = Vec2::ZERO;
                for (h, xj) in self.row(i).iter().zip(x) {
                    acc += *xj * *h;
                }
                acc
            })
            .collect())
    }

    /// Coefficient of ergodicity, half the largest L1 distance between rows.
    pub fn tau1(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let dist: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                worst = worst.max(dist);
            }
        }
        (0.5 * worst).min(1.0)
    }

    /// Coefficient of ergodicity via the row-overlap form,
    /// `1 - min_{i,j} Σ_s min(A_is, A_js)`.
    pub fn tau1_overlap(&self) -> f64 {
        let mut overlap = 1.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let o: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a.min(*b)).sum();
                overlap = overlap.min(o);
            }
        }
        (1.0 - overlap).max(0.0)
    }
}

/// Ordered product `seq[start+len-1] ··· seq[start]` (later matrices act last,
/// on the left). An empty window yields the identity.
pub fn window_product(
    seq: &[RowStochasticMatrix],
    start: usize,
    len: usize,
) -> Result<RowStochasticMatrix> {
    let first = seq.first().ok_or(Error::Window { start, len, available: 0 })?;
    if start + len > seq.len() {
        return Err(Error::Window { start, len, available: seq.len() });
    }
    let mut acc = RowStochasticMatrix::identity(first.dim());
    for m in &seq[start..start + len] {
        acc = m.mul(&acc)?;
    }
    Ok(acc)
}

/// `I - Σ + Σ·H` with `Σ = diag(sigmas)`.
pub fn sigma_modify(h: &RowStochasticMatrix, sigmas: &[f64]) -> Result<RowStochasticMatrix> {
    let n = h.dim();
    if sigmas.len() != n {
        return Err(Error::Dimension { expected: n, got: sigmas.len() });
    }
    check_sigmas(sigmas)?;
    let mut entries = Vec::with_capacity(n * n);
    for (i, &sigma) in sigmas.iter().enumerate() {
        for j in 0..n {
            let keep = if i == j { 1.0 - sigma } else { 0.0 };
            entries.push(keep + sigma * h.get(i, j));
        }
    }
    RowStochasticMatrix::new(n, entries)
}

fn check_sigmas(sigmas: &[f64]) -> Result<()> {
    for (agent, &value) in sigmas.iter().enumerate() {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::Sigma { agent, value });
        }
    }
    Ok(())
}

/// Per-instant, per-agent segment fractions `σ_{i,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSchedule {
    n: usize,
    values: Vec<Vec<f64>>,
    sigma_min: f64,
}

impl SigmaSchedule {
    /// One row of `n` values per instant; every value must lie in `(0, 1]`.
    pub fn new(n: usize, values: Vec<Vec<f64>>) -> Result<Self> {
        let mut sigma_min = 1.0f64;
        for row in &values {
            if row.len() != n {
                return Err(Error::Dimension { expected: n, got: row.len() });
            }
            check_sigmas(row)?;
            sigma_min = row.iter().fold(sigma_min, |m, &s| m.min(s));
        }
        Ok(Self { n, values, sigma_min })
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn instants(&self) -> usize {
        self.values.len()
    }

    pub fn at(&self, instant: usize) -> &[f64] {
        &self.values[instant]
    }

    /// `σ̌`, the smallest stored value (1 for an empty schedule).
    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }
}

/// Result of scanning every length-`L` window of a realized sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingCertificate {
    pub window_length: usize,
    /// `μ = 1 - max_k τ₁(H_{k+L-1}···H_k)`; nonpositive when not certified.
    pub contraction_margin: f64,
    pub windows_checked: usize,
}

impl MixingCertificate {
    pub fn is_certified(&self) -> bool {
        self.contraction_margin > 0.0
    }
}

/// Window length used when none is given: `n - 1`, at least one.
pub fn default_window(n: usize) -> usize {
    n.saturating_sub(1).max(1)
}

/// Exhaustively checks every window of length `window` in `seq`.
pub fn certify_mixing(seq: &[RowStochasticMatrix], window: usize) -> Result<MixingCertificate> {
    if window == 0 || seq.len() < window {
        return Err(Error::Window { start: 0, len: window, available: seq.len() });
    }
    let mut worst = 0.0f64;
    let windows = seq.len() - window + 1;
    for start in 0..windows {
        worst = worst.max(window_product(seq, start, window)?.tau1());
    }
    Ok(MixingCertificate {
        window_length: window,
        contraction_margin: 1.0 - worst,
        windows_checked: windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> RowStochasticMatrix {
        RowStochasticMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
            .unwrap()
    }

    /// Random row-stochastic matrix with a random sparsity pattern.
    fn random_matrix() -> impl Strategy<Value = RowStochasticMatrix> {
        (2usize..7).prop_flat_map(|n| {
            proptest::collection::vec(
                prop_oneof![Just(0.0), 0.0f64..1.0, 0.0f64..1.0],
                n * n,
            )
            .prop_map(move |mut raw| {
                for i in 0..n {
                    raw[i * n + i] += 0.05;
                    let sum: f64 = raw[i * n..(i + 1) * n].iter().sum();
                    raw[i * n..(i + 1) * n].iter_mut().for_each(|v| *v /= sum);
                }
                RowStochasticMatrix::new(n, raw).unwrap()
            })
        })
    }

    #[test]
    fn tau1_examples() {
        assert_eq!(RowStochasticMatrix::identity(2).tau1(), 1.0);
        for n in 1..6 {
            assert!(RowStochasticMatrix::uniform(n).tau1().abs() < 1e-15);
        }
        let a = m(&[&[0.5, 0.5], &[0.25, 0.75]]);
        assert!((a.tau1() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn tau1_overlap_examples() {
        assert_eq!(RowStochasticMatrix::identity(2).tau1_overlap(), 1.0);
        for n in 1..6 {
            assert!(RowStochasticMatrix::uniform(n).tau1_overlap().abs() < 1e-15);
        }
        let a = m(&[&[0.5, 0.5], &[0.25, 0.75]]);
        assert!((a.tau1_overlap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_invalid_rows() {
        assert!(matches!(
            RowStochasticMatrix::from_rows(&[vec![0.5, 0.6], vec![0.5, 0.5]]),
            Err(Error::RowSum { row: 0, .. })
        ));
        assert!(matches!(
            RowStochasticMatrix::from_rows(&[vec![1.5, -0.5], vec![0.5, 0.5]]),
            Err(Error::NegativeEntry { row: 0, col: 1, .. })
        ));
        assert!(matches!(RowStochasticMatrix::new(2, vec![1.0; 3]), Err(Error::Shape { .. })));
        assert!(RowStochasticMatrix::new(1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn construction_renormalizes_within_tolerance() {
        let a = RowStochasticMatrix::new(2, vec![0.5 + 4e-13, 0.5, 0.0, 1.0]).unwrap();
        let sum: f64 = a.row(0).iter().sum();
        assert!((sum - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn empty_window_is_identity() {
        let seq = vec![m(&[&[0.5, 0.5], &[0.25, 0.75]])];
        assert_eq!(window_product(&seq, 0, 0).unwrap(), RowStochasticMatrix::identity(2));
        assert!(window_product(&seq, 1, 1).is_err());
        assert!(window_product(&[], 0, 0).is_err());
    }

    #[test]
    fn window_product_order() {
        let a = m(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let b = m(&[&[0.0, 1.0], &[0.0, 1.0]]);
        // H_1·H_0 = b·a, every row equals a's first row
        let p = window_product(&[a.clone(), b.clone()], 0, 2).unwrap();
        assert_eq!(p, b.mul(&a).unwrap());
        assert_eq!(p.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn averaging_product_idempotent() {
        let u = RowStochasticMatrix::uniform(4);
        let p = window_product(&[u.clone(), u.clone(), u.clone()], 0, 3).unwrap();
        for (x, y) in p.as_slice().iter().zip(u.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn sigma_modify_examples() {
        let h = m(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert_eq!(sigma_modify(&h, &[1.0, 1.0]).unwrap(), h);
        let hs = sigma_modify(&h, &[0.5, 0.5]).unwrap();
        assert_eq!(hs, m(&[&[0.75, 0.25], &[0.25, 0.75]]));
        assert!(matches!(sigma_modify(&h, &[0.0, 1.0]), Err(Error::Sigma { agent: 0, .. })));
        assert!(sigma_modify(&h, &[1.0, 1.1]).is_err());
        assert!(sigma_modify(&h, &[1.0]).is_err());
    }

    #[test]
    fn certify_mixing_examples() {
        let seq = vec![RowStochasticMatrix::uniform(3); 5];
        let cert = certify_mixing(&seq, 1).unwrap();
        assert!((cert.contraction_margin - 1.0).abs() < 1e-15);
        assert_eq!(cert.windows_checked, 5);

        let seq = vec![RowStochasticMatrix::identity(3); 5];
        for window in 1..=5 {
            let cert = certify_mixing(&seq, window).unwrap();
            assert_eq!(cert.contraction_margin, 0.0);
            assert!(!cert.is_certified());
        }
        assert!(certify_mixing(&seq, 6).is_err());
        assert!(certify_mixing(&seq, 0).is_err());
    }

    #[test]
    fn schedule_tracks_minimum() {
        let s = SigmaSchedule::new(2, vec![vec![0.5, 1.0], vec![0.3, 0.9]]).unwrap();
        assert_eq!(s.sigma_min(), 0.3);
        assert_eq!(s.instants(), 2);
        assert!(SigmaSchedule::new(2, vec![vec![0.5, 0.0]]).is_err());
        assert!(SigmaSchedule::new(2, vec![vec![0.5]]).is_err());
    }

    proptest! {
        #[test]
        fn tau1_in_unit_interval_and_forms_agree(a in random_matrix()) {
            let t = a.tau1();
            prop_assert!((0.0..=1.0).contains(&t));
            prop_assert!((t - a.tau1_overlap()).abs() <= 1e-10);
        }

        #[test]
        fn sigma_modify_dominates_scaled_h(
            a in random_matrix(),
            raw in proptest::collection::vec(0.01f64..=1.0, 7),
        ) {
            let sigmas = &raw[..a.dim()];
            let sigma_min = sigmas.iter().cloned().fold(1.0, f64::min);
            let hs = sigma_modify(&a, sigmas).unwrap();
            for i in 0..a.dim() {
                for j in 0..a.dim() {
                    prop_assert!(hs.get(i, j) + 1e-15 >= sigma_min * a.get(i, j));
                }
            }
        }
    }
}
