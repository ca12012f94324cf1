//! Attention-based token importance and residual per-layer selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Matrix<T: Scalar> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parameter("matrix rows have different lengths".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            data: self.data.iter().map(|&x| x * c).collect(),
            ..self.clone()
        }
    }
}

/// Query rows of the observation window against the chunk's keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AttentionWindow<T: Scalar> {
    pub q: Matrix<T>,
    pub k: Matrix<T>,
    pub layer: usize,
}

/// `u(j) = sum_t softmax_row(Q K^T / sqrt(d))[t, j]`.
pub fn importance<T: Scalar>(w: &AttentionWindow<T>) -> Result<Vec<T>> {
    let (q, k) = (&w.q, &w.k);
    if q.rows == 0 || k.rows == 0 || q.cols == 0 || q.cols != k.cols {
        return Err(Error::Parameter(format!(
            "attention window shapes q={}x{} k={}x{} are not compatible",
            q.rows, q.cols, k.rows, k.cols
        )));
    }
    if q.data.iter().chain(&k.data).any(|x| !x.is_finite()) {
        return Err(Error::Numeric("attention window"));
    }
    let inv_sqrt_d = T::one() / T::from_usize_lossy(q.cols).sqrt();
    let mut u = vec![T::zero(); k.rows];
    let mut logits = vec![T::zero(); k.rows];
    for t in 0..q.rows {
        let qt = q.row(t);
        for (j, l) in logits.iter_mut().enumerate() {
            let dot = qt.iter().zip(k.row(j)).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
            *l = dot * inv_sqrt_d;
        }
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            z = z + *l;
        }
        for (uj, &e) in u.iter_mut().zip(&logits) {
            *uj = *uj + e / z;
        }
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("attention importance"));
    }
    Ok(u)
}

/// Mean importance over heads of one layer.
pub fn importance_heads<T: Scalar>(heads: &[AttentionWindow<T>]) -> Result<Vec<T>> {
    let Some(first) = heads.first() else {
        return Err(Error::Parameter("at least one attention head is required".into()));
    };
    let mut acc = vec![T::zero(); first.k.rows];
    for h in heads {
        let u = importance(h)?;
        if u.len() != acc.len() {
            return Err(Error::Parameter("heads disagree on the number of keys".into()));
        }
        for (a, x) in acc.iter_mut().zip(u) {
            *a = *a + x;
        }
    }
    let n = T::from_usize_lossy(heads.len());
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Sliding mean with an odd window that shrinks at the edges.
pub fn pool<T: Scalar>(u: &[T], window: usize) -> Result<Vec<T>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Parameter(format!("pooling window must be odd, got {window}")));
    }
    let half = window / 2;
    Ok((0..u.len())
        .map(|j| {
            let lo = j.saturating_sub(half);
            let hi = (j + half + 1).min(u.len());
            let sum = u[lo..hi].iter().fold(T::zero(), |a, &b| a + b);
            sum / T::from_usize_lossy(hi - lo)
        })
        .collect())
}

/// Protected indices plus the highest-importance others (ties to the smaller
/// index) up to `b`, ascending.
pub fn select_tokens<T: Scalar>(u: &[T], protected: &[usize], b: usize) -> Vec<usize> {
    let mut is_protected = vec![false; u.len()];
    for &p in protected {
        if p < u.len() {
            is_protected[p] = true;
        }
    }
    let mut kept: Vec<usize> = (0..u.len()).filter(|&i| is_protected[i]).collect();
    let residual = b.saturating_sub(kept.len());
    let mut rest: Vec<usize> = (0..u.len()).filter(|&i| !is_protected[i]).collect();
    rest.sort_by(|&a, &c| {
        u[c].partial_cmp(&u[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&c))
    });
    kept.extend(rest.into_iter().take(residual));
    kept.sort_unstable();
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn window(q: &[Vec<f64>], k: &[Vec<f64>]) -> AttentionWindow<f64> {
        AttentionWindow {
            q: Matrix::from_rows(q).unwrap(),
            k: Matrix::from_rows(k).unwrap(),
            layer: 0,
        }
    }

    #[test]
    fn uniform_logits() {
        let u = importance(&window(&vec![vec![0.0; 2]; 4], &[vec![1.0, 2.0], vec![3.0, 4.0]])).unwrap();
        for x in u {
            assert_abs_diff_eq!(x, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn small_brute_force() {
        let u = importance(&window(&[vec![1.0], vec![2.0]], &[vec![0.0], vec![1.0], vec![2.0]])).unwrap();
        let row = |q: f64| {
            let e: Vec<f64> = [0.0, 1.0, 2.0].iter().map(|k| (q * k).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(move |x| x / z)
        };
        let expected: Vec<f64> = row(1.0).zip(row(2.0)).map(|(a, b)| a + b).collect();
        for (a, b) in u.iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_non_finite_and_bad_shapes() {
        let w = window(&[vec![f64::NAN]], &[vec![1.0]]);
        assert_eq!(importance(&w).unwrap_err().kind(), "numeric");
        let w = window(&[vec![1.0, 2.0]], &[vec![1.0]]);
        assert_eq!(importance(&w).unwrap_err().kind(), "parameter");
    }

    #[test]
    fn pooling() {
        let p = pool(&[0.0, 0.0, 1.0, 0.0, 0.0], 5).unwrap();
        let expected = [1.0 / 3.0, 0.25, 0.2, 0.25, 1.0 / 3.0];
        for (a, b) in p.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        for x in pool(&[0.3; 7], 5).unwrap() {
            assert_abs_diff_eq!(x, 0.3, epsilon = 1e-15);
        }
        assert_eq!(pool(&[1.0, 2.0], 1).unwrap(), [1.0, 2.0]);
        assert!(pool(&[1.0], 4).is_err());
    }

    #[test]
    fn selection() {
        assert_eq!(select_tokens(&[0.5, 0.1, 0.9], &[], 2), [0, 2]);
        assert_eq!(select_tokens(&[1.0; 8], &[5], 3), [0, 1, 5]);
        assert_eq!(select_tokens(&[1.0, 0.0, 3.0], &[1], 1), [1]);
    }
}
