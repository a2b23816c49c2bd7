/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from a row-major dense buffer, dropping exact zeros.
    pub fn from_dense(nrows: usize, ncols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), nrows * ncols);
        let mut triplets = Vec::new();
        for i in 0..nrows {
            for j in 0..ncols {
                let v = data[i * ncols + j];
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, triplets)
    }

    /// Builds from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "entry ({i},{j}) outside {nrows}x{ncols}");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `y += A' x`.
    pub fn tmul_add(&self, x: &[f64], y: &mut [f64]) {
        for (i, &xi) in x.iter().enumerate().take(self.nrows) {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
    }

    /// Sorted union of column indices appearing in rows `range`.
    pub fn column_support(&self, range: std::ops::Range<usize>) -> Vec<usize> {
        let mut cols: Vec<usize> = range.flat_map(|i| self.row(i).0.iter().copied()).collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * self.ncols];
        for (i, j, v) in self.triplets() {
            out[i * self.ncols + j] = v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_match_dense() {
        let dense = [1.0, 0.0, 2.0, 0.0, -3.0, 0.0];
        let m = SparseMatrix::from_dense(2, 3, &dense);
        assert_eq!(m.nnz(), 3);
        let mut y = [0.0; 2];
        m.mul_vec(&[1.0, 2.0, 3.0], &mut y);
        assert_eq!(y, [7.0, -6.0]);
        let mut t = [0.0; 3];
        m.tmul_add(&[1.0, 1.0], &mut t);
        assert_eq!(t, [1.0, -3.0, 2.0]);
        assert_eq!(m.to_dense(), dense);
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(1, 2, vec![(0, 1, 1.0), (0, 1, 2.5), (0, 0, 1.0)]);
        assert_eq!(m.to_dense(), vec![1.0, 3.5]);
        assert_eq!(m.column_support(0..1), vec![0, 1]);
    }
}
