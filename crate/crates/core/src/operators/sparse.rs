//! Compressed sparse row operators over the constrained space.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::num::{abs2, Complex, Real};

/// Rows at or above this dimension are processed in parallel by [`SparseOperator::apply`].
const PARALLEL_DIM: usize = 16_384;

/// Matrix entries, real where the operator allows it.
#[derive(Debug, Clone, PartialEq)]
pub enum Values<T> {
    Real(Vec<T>),
    Complex(Vec<Complex<T>>),
}

/// Square sparse matrix in CSR layout. Explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Values<T>,
    hermitian: bool,
}

impl<T: Real> SparseOperator<T> {
    /// Builds from per-row `(column, value)` lists. Columns inside a row may be
    /// unsorted and repeated; repeats are summed and zeros dropped.
    pub fn from_real_rows(dim: usize, rows: Vec<Vec<(usize, T)>>, hermitian: bool) -> Self {
        assert_eq!(rows.len(), dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = T::zero();
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v != T::zero() {
                    cols.push(c as u32);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, values: Values::Real(vals), hermitian }
    }

    pub fn from_complex_rows(dim: usize, rows: Vec<Vec<(usize, Complex<T>)>>, hermitian: bool) -> Self {
        assert_eq!(rows.len(), dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = Complex::new(T::zero(), T::zero());
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v.re != T::zero() || v.im != T::zero() {
                    cols.push(c as u32);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, values: Values::Complex(vals), hermitian }
    }

    pub fn from_diagonal(diag: Vec<T>) -> Self {
        let dim = diag.len();
        let rows = diag.into_iter().enumerate().map(|(i, v)| vec![(i, v)]).collect();
        Self::from_real_rows(dim, rows, true)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_real_rows(dim, vec![Vec::new(); dim], true)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(vec![T::one(); dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_real(&self) -> bool {
        matches!(self.values, Values::Real(_))
    }

    pub fn values(&self) -> &Values<T> {
        &self.values
    }

    fn value(&self, k: usize) -> Complex<T> {
        match &self.values {
            Values::Real(v) => Complex::new(v[k], T::zero()),
            Values::Complex(v) => v[k],
        }
    }

    /// Entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex<T>)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k] as usize, self.value(k)))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&(j as u32)) {
            Ok(off) => self.value(range.start + off),
            Err(_) => Complex::new(T::zero(), T::zero()),
        }
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        let row_ptr = &self.row_ptr;
        let cols = &self.cols;
        match &self.values {
            Values::Real(vals) => {
                let kernel = |(i, yi): (usize, &mut Complex<T>)| {
                    let mut re = T::zero();
                    let mut im = T::zero();
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        let xj = x[cols[k] as usize];
                        re += vals[k] * xj.re;
                        im += vals[k] * xj.im;
                    }
                    *yi = Complex::new(re, im);
                };
                if self.dim >= PARALLEL_DIM {
                    y.par_iter_mut().enumerate().for_each(kernel);
                } else {
                    y.iter_mut().enumerate().for_each(kernel);
                }
            }
            Values::Complex(vals) => {
                let kernel = |(i, yi): (usize, &mut Complex<T>)| {
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        acc += vals[k] * x[cols[k] as usize];
                    }
                    *yi = acc;
                };
                if self.dim >= PARALLEL_DIM {
                    y.par_iter_mut().enumerate().for_each(kernel);
                } else {
                    y.iter_mut().enumerate().for_each(kernel);
                }
            }
        }
    }

    pub fn apply_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut y = vec![Complex::new(T::zero(), T::zero()); self.dim];
        self.apply(x, &mut y);
        y
    }

    /// `<x|A|x>`.
    pub fn expectation(&self, x: &[Complex<T>]) -> Complex<T> {
        crate::num::dot(x, &self.apply_vec(x))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut counts = vec![0usize; self.dim + 1];
        for &c in &self.cols {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.dim {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut cols = vec![0u32; self.nnz()];
        let mut order = vec![0usize; self.nnz()];
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.cols[k] as usize;
                cols[next[c]] = i as u32;
                order[next[c]] = k;
                next[c] += 1;
            }
        }
        let values = match &self.values {
            Values::Real(v) => Values::Real(order.iter().map(|&k| v[k]).collect()),
            Values::Complex(v) => Values::Complex(order.iter().map(|&k| v[k].conj()).collect()),
        };
        Self { dim: self.dim, row_ptr, cols, values, hermitian: self.hermitian }
    }

    /// `max |A_ij - conj(A_ji)|`.
    pub fn hermiticity_defect(&self) -> T {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim);
        let mut worst = T::zero();
        for i in 0..self.dim {
            let mut merged: HashMap<usize, Complex<T>> = self.row(i).collect();
            for (j, v) in other.row(i) {
                *merged.entry(j).or_insert(Complex::new(T::zero(), T::zero())) -= v;
            }
            for v in merged.values() {
                worst = worst.max(abs2(*v).sqrt());
            }
        }
        worst
    }

    pub fn scaled(&self, alpha: T) -> Self {
        let values = match &self.values {
            Values::Real(v) => Values::Real(v.iter().map(|&x| x * alpha).collect()),
            Values::Complex(v) => Values::Complex(v.iter().map(|&x| x * alpha).collect()),
        };
        let mut out = Self { values, ..self.clone() };
        if alpha == T::zero() {
            out = Self::zeros(self.dim);
        }
        out
    }

    /// `alpha * self + beta * other`; stays real when both inputs are.
    pub fn combine(&self, alpha: T, other: &Self, beta: T) -> Self {
        assert_eq!(self.dim, other.dim);
        let hermitian = self.hermitian && other.hermitian;
        if self.is_real() && other.is_real() {
            let rows = (0..self.dim)
                .map(|i| {
                    self.row(i)
                        .map(|(j, v)| (j, v.re * alpha))
                        .chain(other.row(i).map(|(j, v)| (j, v.re * beta)))
                        .collect()
                })
                .collect();
            Self::from_real_rows(self.dim, rows, hermitian)
        } else {
            let rows = (0..self.dim)
                .map(|i| {
                    self.row(i)
                        .map(|(j, v)| (j, v * alpha))
                        .chain(other.row(i).map(|(j, v)| (j, v * beta)))
                        .collect()
                })
                .collect();
            Self::from_complex_rows(self.dim, rows, hermitian)
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(T::one(), other, T::one())
    }

    /// Sparse product `self * other`. The result is not flagged hermitian.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let real = self.is_real() && other.is_real();
        let product_row = |i: usize| -> Vec<(usize, Complex<T>)> {
            let mut acc: HashMap<usize, Complex<T>> = HashMap::new();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    *acc.entry(j).or_insert(Complex::new(T::zero(), T::zero())) += a * b;
                }
            }
            acc.into_iter().collect()
        };
        let rows: Vec<Vec<(usize, Complex<T>)>> = (0..self.dim).into_par_iter().map(product_row).collect();
        if real {
            let rows = rows.into_iter().map(|r| r.into_iter().map(|(j, v)| (j, v.re)).collect()).collect();
            Self::from_real_rows(self.dim, rows, false)
        } else {
            Self::from_complex_rows(self.dim, rows, false)
        }
    }

    /// `AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).combine(T::one(), &other.matmul(self), -T::one())
    }

    /// `AB + BA`.
    pub fn anticommutator(&self, other: &Self) -> Self {
        self.matmul(other).add(&other.matmul(self))
    }

    pub fn with_hermitian_flag(mut self, hermitian: bool) -> Self {
        self.hermitian = hermitian;
        self
    }

    /// Dense real matrix; imaginary parts are discarded.
    pub fn to_dense_real(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v.re;
            }
        }
        m
    }

    pub fn to_dense_complex(&self) -> DMatrix<Complex<T>> {
        let mut m = DMatrix::from_element(self.dim, self.dim, Complex::new(T::zero(), T::zero()));
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Diagonal entries.
    pub fn diagonal(&self) -> Vec<Complex<T>> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// CSV dump `row,col,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,re,im\n");
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                out.push_str(&format!("{i},{j},{:e},{:e}\n", v.re.as_f64(), v.im.as_f64()));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn merges_duplicates_and_drops_zeros() {
        let op = SparseOperator::from_real_rows(2, vec![vec![(1, 1.0), (1, -1.0), (0, 2.0)], vec![(0, 3.0)]], false);
        assert_eq!(op.nnz(), 2);
        assert_eq!(op.get(0, 0), c(2.0, 0.0));
        assert_eq!(op.get(0, 1), c(0.0, 0.0));
    }

    #[test]
    fn adjoint_and_products() {
        let a = SparseOperator::from_complex_rows(
            3,
            vec![vec![(1, c(1.0, 2.0))], vec![(2, c(0.0, -1.0))], vec![(0, c(3.0, 0.0))]],
            false,
        );
        let ad = a.adjoint();
        assert_eq!(ad.get(1, 0), c(1.0, -2.0));
        assert_eq!(ad.get(2, 1), c(0.0, 1.0));
        let x = vec![c(1.0, 0.0), c(0.5, 0.5), c(-1.0, 2.0)];
        let y = vec![c(0.0, 1.0), c(2.0, 0.0), c(1.0, 1.0)];
        let lhs = crate::num::dot(&y, &a.apply_vec(&x));
        let rhs = crate::num::dot(&ad.apply_vec(&y), &x);
        assert!((lhs - rhs).norm() < 1e-14);

        let ab = a.matmul(&ad);
        let dense = a.to_dense_complex() * ad.to_dense_complex();
        for i in 0..3 {
            for j in 0..3 {
                assert!((ab.get(i, j) - dense[(i, j)]).norm() < 1e-14);
            }
        }
        assert!(ab.hermiticity_defect() < 1e-14);
        assert!(a.hermiticity_defect() > 0.5);
    }

    #[test]
    fn commutator_of_pauli_like() {
        // [s+, s-] = sz for spin 1/2 in the (up, down) basis
        let sp = SparseOperator::from_real_rows(2, vec![vec![(1, 1.0)], vec![]], false);
        let sm = sp.adjoint();
        let sz = sp.commutator(&sm);
        assert_eq!(sz.get(0, 0), c(1.0, 0.0));
        assert_eq!(sz.get(1, 1), c(-1.0, 0.0));
        let anti = sp.anticommutator(&sm);
        assert!(anti.max_abs_diff(&SparseOperator::identity(2)) < 1e-15);
    }
}
