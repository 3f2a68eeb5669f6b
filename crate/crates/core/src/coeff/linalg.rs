//! Exact linear algebra over a [`Scalar`] field.

use std::collections::BTreeMap;

use super::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, S::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix");
        Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j).add_ref(&a.mul_ref(other.get(k, j)));
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        (0..self.rows)
            .map(|i| {
                let mut acc = S::zero();
                for j in 0..self.cols {
                    acc.add_assign_ref(&self.get(i, j).mul_ref(&v[j]));
                }
                acc
            })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// Reduced row echelon form and the pivot columns.
    pub fn rref(&self) -> (Self, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.get(i, c).is_zero()) else {
                continue;
            };
            if p != r {
                for j in 0..m.cols {
                    m.data.swap(p * m.cols + j, r * m.cols + j);
                }
            }
            let inv = m.get(r, c).inv().expect("pivot is nonzero");
            for j in 0..m.cols {
                let v = m.get(r, j).mul_ref(&inv);
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i == r || m.get(i, c).is_zero() {
                    continue;
                }
                let f = m.get(i, c).clone();
                for j in 0..m.cols {
                    let v = m.get(i, j).sub_ref(&f.mul_ref(m.get(r, j)));
                    m.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of `{v : M v = 0}`.
    pub fn nullspace(&self) -> Vec<Vec<S>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![S::zero(); self.cols];
                v[f] = S::one();
                for (row, &p) in pivots.iter().enumerate() {
                    v[p] = r.get(row, f).neg_ref();
                }
                v
            })
            .collect()
    }

    /// Some solution of `M x = b`, free variables set to zero.
    pub fn solve(&self, b: &[S]) -> Option<Vec<S>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = Self::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug.set(i, j, self.get(i, j).clone());
            }
            aug.set(i, self.cols, b[i].clone());
        }
        let (r, pivots) = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![S::zero(); self.cols];
        for (row, &p) in pivots.iter().enumerate() {
            x[p] = r.get(row, self.cols).clone();
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Self> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut aug = Self::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.get(i, j).clone());
            }
            aug.set(i, n + i, S::one());
        }
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        let mut inv = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv.set(i, j, r.get(i, n + j).clone());
            }
        }
        Some(inv)
    }
}

/// Sparse linear system assembled one equation at a time.
///
/// Rows are kept monic with their pivot at the smallest column; an equation
/// that reduces to `0 = c ≠ 0` is reported as inconsistent.
#[derive(Clone, Debug)]
pub struct SparseSystem<S: Scalar> {
    nvars: usize,
    rows: BTreeMap<usize, (BTreeMap<usize, S>, S)>,
}

/// An equation that contradicts the ones already accepted.
#[derive(Clone, Debug, PartialEq)]
pub struct Inconsistent<S: Scalar> {
    pub residual: S,
}

impl<S: Scalar> SparseSystem<S> {
    pub fn new(nvars: usize) -> Self {
        SparseSystem { nvars, rows: BTreeMap::new() }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Add `Σ coeffs[c]·x_c = rhs`.
    pub fn add_equation(
        &mut self,
        mut coeffs: BTreeMap<usize, S>,
        mut rhs: S,
    ) -> Result<(), Inconsistent<S>> {
        coeffs.retain(|_, v| !v.is_zero());
        loop {
            let Some((&c, lead)) = coeffs.iter().next() else {
                return if rhs.is_zero() { Ok(()) } else { Err(Inconsistent { residual: rhs }) };
            };
            match self.rows.get(&c) {
                Some((row, r)) => {
                    let f = lead.clone();
                    for (k, v) in row {
                        let e = coeffs.entry(*k).or_insert_with(S::zero);
                        *e = e.sub_ref(&f.mul_ref(v));
                        if e.is_zero() {
                            coeffs.remove(k);
                        }
                    }
                    rhs = rhs.sub_ref(&f.mul_ref(r));
                }
                None => {
                    let inv = lead.inv().expect("nonzero lead");
                    for v in coeffs.values_mut() {
                        *v = v.mul_ref(&inv);
                    }
                    self.rows.insert(c, (coeffs, rhs.mul_ref(&inv)));
                    return Ok(());
                }
            }
        }
    }

    /// A solution with all free variables zero.
    pub fn solve(&self) -> Vec<S> {
        let mut x = vec![S::zero(); self.nvars];
        for (&p, (row, rhs)) in self.rows.iter().rev() {
            let mut v = rhs.clone();
            for (&c, a) in row.range(p + 1..) {
                v = v.sub_ref(&a.mul_ref(&x[c]));
            }
            x[p] = v;
        }
        x
    }

    pub fn pivots(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }
}
