//! Compressed sparse storage of the coupling matrix.
//!
//! The matrix is kept in both column-major (CSC) and row-major (CSR) form.
//! The coordinate loop needs the rows hit by one column, while the dense
//! baselines and the metrics want row access for `A x`.
//!
//! LIBSVM files index features from 1; in memory everything is 0-based.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    row_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
    col_sq_norms: Vec<f64>,
    row_support: Vec<usize>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets in any order.
    ///
    /// Explicit zeros are dropped. A repeated `(row, col)` pair is an error
    /// rather than being summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(j, i, v) in &triplets {
            if j >= nrows {
                return Err(Error::IndexOutOfRange {
                    what: "row",
                    index: j,
                    size: nrows,
                });
            }
            if i >= ncols {
                return Err(Error::IndexOutOfRange {
                    what: "column",
                    index: i,
                    size: ncols,
                });
            }
            if v.is_nan() {
                return Err(Error::Nan("sparse matrix entry"));
            }
        }
        triplets.retain(|t| t.2 != 0.0);
        triplets.sort_unstable_by_key(|&(j, i, _)| (j, i));
        for w in triplets.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::InvalidParameter(format!(
                    "duplicate entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }

        let nnz = triplets.len();
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut row_idx = Vec::with_capacity(nnz);
        let mut row_val = Vec::with_capacity(nnz);
        for &(j, i, v) in &triplets {
            row_ptr[j + 1] += 1;
            row_idx.push(i);
            row_val.push(v);
        }
        for j in 0..nrows {
            row_ptr[j + 1] += row_ptr[j];
        }
        Ok(Self::from_csr_parts(nrows, ncols, row_ptr, row_idx, row_val))
    }

    /// Dense row-major input, mostly for tests and small examples.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (j, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::Dimension {
                    what: "dense row",
                    expected: ncols,
                    got: row.len(),
                });
            }
            for (i, &v) in row.iter().enumerate() {
                triplets.push((j, i, v));
            }
        }
        Self::from_triplets(nrows, ncols, triplets)
    }

    // Row indices must already be sorted and unique within each row, with no zeros.
    fn from_csr_parts(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        row_val: Vec<f64>,
    ) -> Self {
        let nnz = row_idx.len();
        let mut col_ptr = vec![0usize; ncols + 1];
        for &i in &row_idx {
            col_ptr[i + 1] += 1;
        }
        for i in 0..ncols {
            col_ptr[i + 1] += col_ptr[i];
        }
        let mut next = col_ptr.clone();
        let mut col_idx = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        // Scanning rows in order keeps row indices sorted inside each column.
        for j in 0..nrows {
            for k in row_ptr[j]..row_ptr[j + 1] {
                let i = row_idx[k];
                col_idx[next[i]] = j;
                col_val[next[i]] = row_val[k];
                next[i] += 1;
            }
        }
        let col_sq_norms = (0..ncols)
            .map(|i| {
                col_val[col_ptr[i]..col_ptr[i + 1]]
                    .iter()
                    .map(|v| v * v)
                    .sum()
            })
            .collect();
        let row_support = (0..nrows).map(|j| row_ptr[j + 1] - row_ptr[j]).collect();
        SparseMatrix {
            nrows,
            ncols,
            col_ptr,
            col_idx,
            col_val,
            row_ptr,
            row_idx,
            row_val,
            col_sq_norms,
            row_support,
        }
    }

    /// Number of rows (dual dimension `m`).
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    /// Number of columns (primal dimension `n`).
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Row indices and values of column `i`. Panics if `i` is out of range.
    #[inline]
    pub fn col(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[i]..self.col_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.col_val[r])
    }

    /// Column indices and values of row `j`. Panics if `j` is out of range.
    #[inline]
    pub fn row(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[j]..self.row_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.row_val[r])
    }

    pub fn col_nnz(&self, i: usize) -> usize {
        self.col_ptr[i + 1] - self.col_ptr[i]
    }

    pub fn col_sq_norms(&self) -> &[f64] {
        &self.col_sq_norms
    }

    pub fn col_sq_norm(&self, i: usize) -> f64 {
        self.col_sq_norms[i]
    }

    /// `|I(j)|` for every row.
    pub fn row_support(&self) -> &[usize] {
        &self.row_support
    }

    pub fn max_col_nnz(&self) -> usize {
        (0..self.ncols).map(|i| self.col_nnz(i)).max().unwrap_or(0)
    }

    /// Calls `visit(j, A[j, i])` for every stored entry of column `i`, in
    /// increasing row order.
    pub fn col_gather<F: FnMut(usize, f64)>(&self, i: usize, mut visit: F) -> Result<()> {
        self.check_col(i)?;
        let (rows, vals) = self.col(i);
        for (&j, &v) in rows.iter().zip(vals) {
            visit(j, v);
        }
        Ok(())
    }

    /// `a[j] += delta * A[j, i]` over the support of column `i`.
    pub fn col_axpy(&self, i: usize, delta: f64, a: &mut [f64]) -> Result<()> {
        self.check_col(i)?;
        check_len("col_axpy target", self.nrows, a.len())?;
        let (rows, vals) = self.col(i);
        for (&j, &v) in rows.iter().zip(vals) {
            a[j] += delta * v;
        }
        Ok(())
    }

    /// `A x` using the row-major copy.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("matvec input", self.ncols, x.len())?;
        let mut out = vec![0.0; self.nrows];
        self.matvec_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(j);
            *o = cols.iter().zip(vals).map(|(&i, &v)| v * x[i]).sum();
        }
    }

    /// `Aᵀ y` using the column-major copy.
    pub fn mat_t_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("mat_t_vec input", self.nrows, y.len())?;
        let mut out = vec![0.0; self.ncols];
        self.mat_t_vec_into(y, &mut out);
        Ok(out)
    }

    pub(crate) fn mat_t_vec_into(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (rows, vals) = self.col(i);
            *o = rows.iter().zip(vals).map(|(&j, &v)| v * y[j]).sum();
        }
    }

    /// All stored entries as `(row, col, value)`, sorted by row then column.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for j in 0..self.nrows {
            let (cols, vals) = self.row(j);
            out.extend(cols.iter().zip(vals).map(|(&i, &v)| (j, i, v)));
        }
        out
    }

    /// The same entries read from the column-major copy, sorted the same way.
    pub fn triplets_from_csc(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.ncols {
            let (rows, vals) = self.col(i);
            out.extend(rows.iter().zip(vals).map(|(&j, &v)| (j, i, v)));
        }
        out.sort_unstable_by_key(|&(j, i, _)| (j, i));
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (j, i, v) in self.triplets() {
            d[j][i] = v;
        }
        d
    }

    /// Operator 2-norm estimate by power iteration on `AᵀA`.
    ///
    /// Stops after `max_iter` rounds or when the relative change of the
    /// estimate drops below `tol`.
    pub fn spectral_norm(&self, max_iter: usize, tol: f64) -> f64 {
        if self.nnz() == 0 {
            return 0.0;
        }
        // Deterministic, non-degenerate start.
        let mut v: Vec<f64> = (0..self.ncols)
            .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_749_895).fract())
            .collect();
        normalize(&mut v);
        let mut av = vec![0.0; self.nrows];
        let mut w = vec![0.0; self.ncols];
        let mut est = 0.0;
        for _ in 0..max_iter {
            self.matvec_into(&v, &mut av);
            self.mat_t_vec_into(&av, &mut w);
            let nrm = norm2(&w);
            if nrm == 0.0 {
                return 0.0;
            }
            let next = nrm.sqrt();
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / nrm;
            }
            let done = (next - est).abs() <= tol * next;
            est = next;
            if done {
                break;
            }
        }
        est
    }

    fn check_col(&self, i: usize) -> Result<()> {
        if i >= self.ncols {
            return Err(Error::IndexOutOfRange {
                what: "column",
                index: i,
                size: self.ncols,
            });
        }
        Ok(())
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Reads LIBSVM / SVMlight text: one sample per line, `<label> (<index>:<value>)*`.
///
/// Feature indices are 1-based and must be strictly increasing within a line.
/// Anything after `#` is a comment. Blank lines are skipped. Row `k` of the
/// returned matrix holds the `k`-th data line, and the column count is the
/// largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<(SparseMatrix, Vec<f64>)> {
    let mut labels = Vec::new();
    let mut triplets = Vec::new();
    let mut ncols = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = match line.find('#') {
            Some(p) => &line[..p],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad label {label_tok:?}"),
        })?;
        let row = labels.len();
        labels.push(label);

        let mut prev: usize = 0;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected index:value, got {tok:?}"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad index {idx_s:?}"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad value {val_s:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Format {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if idx <= prev {
                return Err(Error::Format {
                    line: lineno,
                    msg: format!("index {idx} does not increase (previous {prev})"),
                });
            }
            if val.is_nan() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "NaN value".into(),
                });
            }
            prev = idx;
            ncols = ncols.max(idx);
            triplets.push((row, idx - 1, val));
        }
    }
    let a = SparseMatrix::from_triplets(labels.len(), ncols, triplets)?;
    Ok((a, labels))
}

/// Writes `a` and `labels` in the format read by [`parse_libsvm`].
pub fn write_libsvm<W: Write>(a: &SparseMatrix, labels: &[f64], mut w: W) -> Result<()> {
    check_len("labels", a.nrows(), labels.len())?;
    for (j, &label) in labels.iter().enumerate() {
        write!(w, "{label}")?;
        let (cols, vals) = a.row(j);
        for (&i, &v) in cols.iter().zip(vals) {
            write!(w, " {}:{}", i + 1, v)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub matrix: SparseMatrix,
    pub labels: Vec<f64>,
    /// Original index of each kept row.
    pub kept_rows: Vec<usize>,
    /// Original index of each kept column.
    pub kept_cols: Vec<usize>,
}

/// Drops all-zero rows and columns, then scales every row to unit norm.
pub fn preprocess(a: &SparseMatrix, labels: &[f64]) -> Result<Preprocessed> {
    check_len("labels", a.nrows(), labels.len())?;
    let kept_rows: Vec<usize> = (0..a.nrows()).filter(|&j| a.row_support[j] > 0).collect();
    let kept_cols: Vec<usize> = (0..a.ncols()).filter(|&i| a.col_nnz(i) > 0).collect();
    let mut col_map = vec![usize::MAX; a.ncols()];
    for (new, &old) in kept_cols.iter().enumerate() {
        col_map[old] = new;
    }

    let mut row_ptr = Vec::with_capacity(kept_rows.len() + 1);
    row_ptr.push(0);
    let mut row_idx = Vec::with_capacity(a.nnz());
    let mut row_val = Vec::with_capacity(a.nnz());
    for &j in &kept_rows {
        let (cols, vals) = a.row(j);
        let nrm = norm2(vals);
        for (&i, &v) in cols.iter().zip(vals) {
            row_idx.push(col_map[i]);
            row_val.push(v / nrm);
        }
        row_ptr.push(row_idx.len());
    }
    let matrix =
        SparseMatrix::from_csr_parts(kept_rows.len(), kept_cols.len(), row_ptr, row_idx, row_val);
    let labels = kept_rows.iter().map(|&j| labels[j]).collect();
    Ok(Preprocessed {
        matrix,
        labels,
        kept_rows,
        kept_cols,
    })
}

/// `m × n` matrix whose entries are nonzero independently with probability
/// `density`, values uniform in `[-1, 1)`.
///
/// With `cover` set, every empty row and column then receives one extra
/// entry at a random position, so the result has no zero rows or columns.
pub fn random_sparse<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    density: f64,
    cover: bool,
    rng: &mut R,
) -> Result<SparseMatrix> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidParameter(format!(
            "density must lie in [0, 1], got {density}"
        )));
    }
    let mut hit = vec![false; m * n];
    let mut triplets = Vec::new();
    let value = |rng: &mut R| loop {
        let v: f64 = rng.gen_range(-1.0..1.0);
        if v != 0.0 {
            return v;
        }
    };
    for j in 0..m {
        for i in 0..n {
            if rng.gen::<f64>() < density {
                hit[j * n + i] = true;
                triplets.push((j, i, value(rng)));
            }
        }
    }
    if cover && m > 0 && n > 0 {
        let mut row_has = vec![false; m];
        let mut col_has = vec![false; n];
        for &(j, i, _) in &triplets {
            row_has[j] = true;
            col_has[i] = true;
        }
        for j in 0..m {
            if !row_has[j] {
                let i = rng.gen_range(0..n);
                hit[j * n + i] = true;
                col_has[i] = true;
                triplets.push((j, i, value(rng)));
            }
        }
        for i in 0..n {
            if !col_has[i] {
                let j = rng.gen_range(0..m);
                if !hit[j * n + i] {
                    hit[j * n + i] = true;
                    triplets.push((j, i, value(rng)));
                }
            }
        }
    }
    SparseMatrix::from_triplets(m, n, triplets)
}
