//! Banded matrices and an LU factorization with partial pivoting.
//!
//! Every operator assembled on a [`Grid`](crate::grid::Grid) couples only
//! nodes that share a cell, so with row-major node numbering the stiffness,
//! mass and Hessian matrices are banded. Row interchanges during pivoting
//! widen the upper band by at most the lower bandwidth, which the storage
//! layout reserves up front (the same scheme as LAPACK `gbtrf`).

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    /// Row-major, each row holds columns `i - lower ..= i + upper + lower`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        let width = 2 * lower + upper + 1;
        Self {
            n,
            lower,
            upper,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    #[inline]
    fn width(&self) -> usize {
        2 * self.lower + self.upper + 1
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.lower >= i && j <= i + self.upper + self.lower);
        i * self.width() + (j + self.lower - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.lower < i || j > i + self.upper {
            return 0.0;
        }
        self.data[self.offset(i, j)]
    }

    /// Adds `v` at `(i, j)`; panics if the entry lies outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.lower >= i && j <= i + self.upper,
            "entry ({i}, {j}) outside band ({}, {})",
            self.lower,
            self.upper
        );
        let k = self.offset(i, j);
        self.data[k] += v;
    }

    /// `self += s · other` for matrices of identical shape.
    pub fn axpy(&mut self, s: f64, other: &BandMatrix) {
        assert_eq!(
            (self.n, self.lower, self.upper),
            (other.n, other.lower, other.upper),
            "band shapes differ"
        );
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n).fold(0.0, |m, i| m.max(self.get(i, i).abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.lower);
            let hi = (i + self.upper + 1).min(self.n);
            *yi = (lo..hi).map(|j| self.data[self.offset(i, j)] * x[j]).sum();
        }
        y
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.lower;
        let reach = self.upper + self.lower;
        let mut pivots = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE) * 1e-4;

        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = self.data[self.offset(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.offset(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular(k));
            }
            pivots[k] = piv;
            let last_col = (k + reach).min(n - 1);
            if piv != k {
                for j in k..=last_col {
                    let a = self.offset(k, j);
                    let b = self.offset(piv, j);
                    self.data.swap(a, b);
                }
            }
            let diag = self.data[self.offset(k, k)];
            for i in k + 1..=last_row {
                let lik = self.data[self.offset(i, k)] / diag;
                let o = self.offset(i, k);
                self.data[o] = lik;
                if lik == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let ukj = self.data[self.offset(k, j)];
                    let o = self.offset(i, j);
                    self.data[o] -= lik * ukj;
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.m.n;
        let kl = self.m.lower;
        let reach = self.m.upper + self.m.lower;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                x[i] -= self.m.data[self.m.offset(i, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= self.m.data[self.m.offset(k, j)] * x[j];
            }
            x[k] = s / self.m.data[self.m.offset(k, k)];
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> (BandMatrix, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = BandMatrix::zeros(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                // weak diagonal so that pivoting actually kicks in
                let v: f64 = rng.random_range(-1.0..1.0) * if i == j { 0.01 } else { 1.0 };
                b.add(i, j, v);
                dense[i][j] = v;
            }
        }
        (b, dense)
    }

    #[test]
    fn solves_pivoted_band_system() {
        for &(n, kl, ku) in &[(1, 0, 0), (7, 1, 1), (30, 3, 2), (40, 5, 5), (12, 0, 3)] {
            let (b, dense) = random_band(n, kl, ku, n as u64);
            let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() + 0.5).collect();
            let rhs: Vec<f64> = dense.iter().map(|row| dot(row, &x_true)).collect();
            assert_eq!(b.mul_vec(&x_true), rhs);
            let x = b.clone().factor().unwrap().solve(&rhs);
            // backward error: pivoting keeps the residual at rounding level
            let scale: f64 = dense.iter().flatten().map(|v| v.abs()).sum::<f64>() * norm_inf(&x);
            for (r, f) in b.mul_vec(&x).iter().zip(&rhs) {
                assert!(
                    (r - f).abs() < 1e-13 * scale,
                    "({n}, {kl}, {ku}): {r} vs {f}"
                );
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut b = BandMatrix::zeros(3, 1, 1);
        b.add(0, 0, 1.0);
        b.add(1, 1, 1.0);
        assert!(matches!(b.factor(), Err(Error::Singular(2))));
    }
}
