//! Dense real matrices and the handful of kernels the convergence checks need:
//! determinants, order-preserving submatrices, the Moore–Penrose pseudoinverse,
//! symmetric rank decompositions, Schur complements and column-space tests.
//!
//! Element access through `matrix[(i, j)]` is 0-based like any Rust container.
//! Everything that selects rows or columns by position ([`IndexSet`],
//! [`Matrix::replace_column`]) is 1-based.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Eigenvalues (or singular values) below `DEFAULT_RANK_TOL * max` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Symmetry check: `‖A − Aᵀ‖_max ≤ DEFAULT_SYMMETRY_TOL · (1 + ‖A‖_max)`.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-9;

/// Dense real matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix(DMatrix<f64>);

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Matrix(DMatrix::zeros(nrows, ncols))
    }

    pub fn identity(n: usize) -> Self {
        Matrix(DMatrix::identity(n, n))
    }

    /// Builds a matrix from a closure over 0-based `(row, col)`.
    pub fn from_fn(nrows: usize, ncols: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Matrix(DMatrix::from_fn(nrows, ncols, f))
    }

    /// Entries in row-major order.
    pub fn from_row_major(nrows: usize, ncols: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != nrows * ncols {
            return Err(Error::Dimension(format!(
                "{} entries cannot fill a {nrows}x{ncols} matrix",
                entries.len()
            )));
        }
        Self::checked(DMatrix::from_row_slice(nrows, ncols, entries))
    }

    /// Rejects ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(Error::Dimension(format!(
                    "ragged rows: row {} has {} entries, expected {ncols}",
                    i + 1,
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(nrows, ncols, &entries)
    }

    /// A single column.
    pub fn column_vector(entries: &[f64]) -> Result<Self> {
        Self::from_row_major(entries.len(), 1, entries)
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        Matrix::from_fn(n, n, |i, j| if i == j { entries[i] } else { 0.0 })
    }

    fn checked(inner: DMatrix<f64>) -> Result<Self> {
        if let Some(pos) = inner.iter().position(|x| !x.is_finite()) {
            // nalgebra storage is column-major
            let (row, col) = (pos % inner.nrows(), pos / inner.nrows());
            return Err(Error::NonFinite { row: row + 1, col: col + 1 });
        }
        Ok(Matrix(inner))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn as_nalgebra(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<f64> {
        self.0
    }

    pub fn row_major(&self) -> Vec<f64> {
        self.to_rows().into_iter().flatten().collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// Column `j` (1-based) as a vector.
    pub fn column(&self, j: usize) -> Result<Vec<f64>> {
        check_index(j, self.ncols())?;
        Ok(self.0.column(j - 1).iter().copied().collect())
    }

    pub fn transpose(&self) -> Self {
        Matrix(self.0.transpose())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Matrix(&self.0 * factor)
    }

    /// `‖A‖_max`, the largest absolute entry (0 for empty matrices).
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// `‖A − Aᵀ‖_max`.
    pub fn asymmetry(&self) -> Result<f64> {
        require_square(self, "asymmetry")?;
        Ok((&self.0 - self.0.transpose()).amax())
    }

    pub fn ensure_symmetric(&self, tol: f64) -> Result<()> {
        let asymmetry = self.asymmetry()?;
        let tolerance = tol * (1.0 + self.max_abs());
        if asymmetry > tolerance {
            return Err(Error::NotSymmetric { asymmetry, tolerance });
        }
        Ok(())
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Result<Self> {
        require_square(self, "symmetrize")?;
        Ok(Matrix((&self.0 + self.0.transpose()) * 0.5))
    }

    /// `[self | other]`.
    pub fn hstack(&self, other: &Matrix) -> Result<Self> {
        if self.nrows() != other.nrows() {
            return Err(Error::Dimension(format!(
                "cannot concatenate {}x{} and {}x{} side by side",
                self.nrows(),
                self.ncols(),
                other.nrows(),
                other.ncols()
            )));
        }
        let (n, a, b) = (self.nrows(), self.ncols(), other.ncols());
        Ok(Matrix::from_fn(n, a + b, |i, j| {
            if j < a {
                self.0[(i, j)]
            } else {
                other.0[(i, j - a)]
            }
        }))
    }

    /// Copy with column `j` (1-based) replaced by `column`.
    pub fn replace_column(&self, j: usize, column: &[f64]) -> Result<Self> {
        check_index(j, self.ncols())?;
        if column.len() != self.nrows() {
            return Err(Error::Dimension(format!(
                "replacement column has {} entries, matrix has {} rows",
                column.len(),
                self.nrows()
            )));
        }
        let mut out = self.clone();
        for (i, &x) in column.iter().enumerate() {
            out.0[(i, j - 1)] = x;
        }
        Ok(out)
    }

    /// Inverse via LU; fails on numerically singular input.
    pub fn inverse(&self) -> Result<Self> {
        require_square(self, "inverse")?;
        ensure_nonsingular(self)?;
        self.0.clone().try_inverse().map(Matrix).ok_or(Error::Singular)
    }

    /// Solves `self · X = rhs`.
    pub fn solve(&self, rhs: &Matrix) -> Result<Self> {
        require_square(self, "solve")?;
        if rhs.nrows() != self.nrows() {
            return Err(Error::Dimension(format!(
                "right-hand side has {} rows, system has {}",
                rhs.nrows(),
                self.nrows()
            )));
        }
        ensure_nonsingular(self)?;
        self.0.clone().lu().solve(&rhs.0).map(Matrix).ok_or(Error::Singular)
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.nrows() == 0 || self.ncols() == 0 {
            return Vec::new();
        }
        thin_svd(&self.0).1
    }

    /// Number of singular values above `rank_tol · σ_max`.
    pub fn numerical_rank(&self, rank_tol: f64) -> usize {
        let s = self.singular_values();
        let Some(&top) = s.first() else { return 0 };
        if top == 0.0 {
            return 0;
        }
        s.iter().filter(|&&x| x > rank_tol * top).count()
    }
}

impl From<DMatrix<f64>> for Matrix {
    fn from(inner: DMatrix<f64>) -> Self {
        Matrix(inner)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut f64 {
        &mut self.0[idx]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        Matrix(&self.0 + &rhs.0)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        Matrix(&self.0 - &rhs.0)
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        Matrix(&self.0 * &rhs.0)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        Matrix(-&self.0)
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.nrows() {
            let row: Vec<String> = (0..self.ncols()).map(|j| format!("{}", self.0[(i, j)])).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RowsRepr {
    rows: Vec<Vec<f64>>,
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RowsRepr { rows: self.to_rows() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = RowsRepr::deserialize(deserializer)?;
        Matrix::from_rows(&repr.rows).map_err(serde::de::Error::custom)
    }
}

/// Matrix file formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    /// `{"rows": [[...], ...]}`
    Json,
    /// One row per line, comma-separated, no header.
    Csv,
}

impl MatrixFormat {
    /// `.csv` files are CSV; everything else is read as JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Json,
        }
    }
}

impl Matrix {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("matrices always serialize")
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("CSV line {}: {e}", i + 1)))?;
            let row = record
                .iter()
                .map(|field| {
                    field
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("CSV line {}: '{field}' is not a number", i + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Matrix::from_rows(&rows)
    }

    pub fn to_csv_string(&self) -> String {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for row in self.to_rows() {
            writer
                .write_record(row.iter().map(|x| x.to_string()))
                .expect("writing to memory cannot fail");
        }
        String::from_utf8(writer.into_inner().expect("in-memory buffer")).expect("ASCII output")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match MatrixFormat::from_path(path) {
            MatrixFormat::Json => Self::from_json_str(&text),
            MatrixFormat::Csv => Self::from_csv_str(&text),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = match MatrixFormat::from_path(path) {
            MatrixFormat::Json => self.to_json_string(),
            MatrixFormat::Csv => self.to_csv_string(),
        };
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn require_square(a: &Matrix, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "{what} needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn check_index(index: usize, bound: usize) -> Result<()> {
    if index == 0 || index > bound {
        return Err(Error::IndexOutOfRange { index, bound });
    }
    Ok(())
}

fn ensure_nonsingular(a: &Matrix) -> Result<()> {
    let n = a.nrows();
    if n == 0 {
        return Ok(());
    }
    let s = a.singular_values();
    let (top, bottom) = (s[0], s[n - 1]);
    if top == 0.0 || bottom <= n as f64 * f64::EPSILON * top {
        return Err(Error::Singular);
    }
    Ok(())
}

/// Strictly increasing set of 1-based indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::InvalidIndexSet("indices are 1-based; 0 is not allowed".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidIndexSet(format!(
                "indices must be strictly increasing, got {indices:?}"
            )));
        }
        Ok(IndexSet(indices))
    }

    pub fn empty() -> Self {
        IndexSet(Vec::new())
    }

    /// `{lo, lo+1, ..., hi}`; empty when `hi < lo`.
    pub fn range(lo: usize, hi: usize) -> Result<Self> {
        Self::new((lo..=hi).collect())
    }

    /// `{1, ..., p}`.
    pub fn full(p: usize) -> Self {
        IndexSet((1..=p).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// `s(α) = Σ_{a∈α} a`.
    pub fn index_sum(&self) -> usize {
        self.0.iter().sum()
    }

    /// `(−1)^{s(α)}`.
    pub fn sign(&self) -> f64 {
        if self.index_sum() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        self.iter().all(|i| !other.contains(i))
    }

    /// `{1..p} ∖ self`.
    pub fn complement(&self, p: usize) -> Self {
        IndexSet((1..=p).filter(|i| !self.contains(*i)).collect())
    }

    pub fn check_bound(&self, bound: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last > bound => Err(Error::IndexOutOfRange { index: last, bound }),
            _ => Ok(()),
        }
    }

    fn zero_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i - 1).collect()
    }
}

impl TryFrom<Vec<usize>> for IndexSet {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        IndexSet::new(v)
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Vec<usize> {
        s.0
    }
}

/// Parses comma-separated 1-based indices such as `2,3,4`. Order in the
/// input is irrelevant; duplicates are rejected.
impl FromStr for IndexSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut indices = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let i: usize = part
                .parse()
                .map_err(|_| Error::Parse(format!("'{part}' is not a positive integer index")))?;
            indices.push(i);
        }
        indices.sort_unstable();
        let before = indices.len();
        indices.dedup();
        if indices.len() != before {
            return Err(Error::InvalidIndexSet(format!("duplicate index in '{s}'")));
        }
        IndexSet::new(indices)
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Determinant by LU with partial pivoting. The empty matrix has determinant 1.
pub fn det(a: &Matrix) -> Result<f64> {
    require_square(a, "determinant")?;
    if a.nrows() == 0 {
        return Ok(1.0);
    }
    Ok(a.0.clone().lu().determinant())
}

/// `A_{rows, cols}` with the ascending order of both index sets preserved.
pub fn submatrix(a: &Matrix, rows: &IndexSet, cols: &IndexSet) -> Result<Matrix> {
    rows.check_bound(a.nrows())?;
    cols.check_bound(a.ncols())?;
    let (r, c) = (rows.zero_based(), cols.zero_based());
    Ok(Matrix::from_fn(r.len(), c.len(), |i, j| a.0[(r[i], c[j])]))
}

/// Thin SVD `A = U diag(s) Vᵀ` with `s` descending. Computed by faer: the
/// nalgebra 0.35 SVD returns inconsistent factors on some rank-deficient
/// wide inputs.
fn thin_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let x = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = x.thin_svd().expect("SVD of a finite matrix");
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let k = m.min(n);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| fs[j].total_cmp(&fs[i]).then(i.cmp(&j)));
    let u = DMatrix::from_fn(m, k, |i, c| fu[(i, order[c])]);
    let v = DMatrix::from_fn(n, k, |i, c| fv[(i, order[c])]);
    (u, order.iter().map(|&i| fs[i]).collect(), v)
}

/// Moore–Penrose pseudoinverse with singular values below
/// [`DEFAULT_RANK_TOL`]` · σ_max` treated as zero.
pub fn pseudoinverse(a: &Matrix) -> Matrix {
    pseudoinverse_with_tol(a, DEFAULT_RANK_TOL)
}

pub fn pseudoinverse_with_tol(a: &Matrix, rank_tol: f64) -> Matrix {
    let (m, n) = a.shape();
    if m == 0 || n == 0 || a.max_abs() == 0.0 {
        return Matrix::zeros(n, m);
    }
    let (u, sv, v) = thin_svd(&a.0);
    let cutoff = rank_tol * sv[0];
    let mut out = DMatrix::zeros(n, m);
    for (idx, &s) in sv.iter().enumerate() {
        if s > cutoff {
            out += (v.column(idx) * u.column(idx).transpose()) / s;
        }
    }
    Matrix(out)
}

/// Symmetric rank decomposition `A = U B Uᵀ` with `U` of full column rank
/// and `B` invertible.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankDecomposition {
    u: Matrix,
    b: Matrix,
}

impl RankDecomposition {
    /// Validates `U` (k×r, full column rank) and `B` (r×r, invertible).
    pub fn from_parts(u: Matrix, b: Matrix) -> Result<Self> {
        let r = u.ncols();
        if b.shape() != (r, r) {
            return Err(Error::Dimension(format!(
                "B must be {r}x{r} to match U, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if u.numerical_rank(DEFAULT_RANK_TOL) != r {
            return Err(Error::Input("U does not have full column rank".into()));
        }
        if r > 0 {
            ensure_nonsingular(&b)?;
        }
        Ok(RankDecomposition { u, b })
    }

    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    /// `U B Uᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        &(&self.u * &self.b) * &self.u.transpose()
    }

    /// Replaces `U` by `U C` and `B` by `C⁻¹ B C⁻ᵀ`; the product is unchanged.
    pub fn change_basis(&self, c: &Matrix) -> Result<Self> {
        let r = self.rank();
        if c.shape() != (r, r) {
            return Err(Error::Dimension(format!("basis change must be {r}x{r}")));
        }
        if r == 0 {
            return Ok(self.clone());
        }
        let c_inv = c.inverse()?;
        let u = &self.u * c;
        let b = &(&c_inv * &self.b) * &c_inv.transpose();
        Ok(RankDecomposition { u, b })
    }

    /// The same decomposition expressed in the reduced echelon basis of
    /// `im(U)`: every pivot row of `U` becomes a unit row. The echelon basis
    /// depends only on the column space, so functionals of `U` evaluated in
    /// it do not depend on how the decomposition was obtained.
    pub fn to_echelon(&self) -> Result<Self> {
        if self.rank() == 0 {
            return Ok(self.clone());
        }
        let echelon = column_echelon_basis(&self.u)?;
        let c = &pseudoinverse(&self.u) * &echelon;
        self.change_basis(&c)
    }
}

/// General rank factorization `A = U B Vᵀ` (no symmetry assumed).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankFactorization {
    pub u: Matrix,
    pub b: Matrix,
    pub v: Matrix,
}

impl RankFactorization {
    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn reconstruct(&self) -> Matrix {
        &(&self.u * &self.b) * &self.v.transpose()
    }

    /// Both `U` and `V` moved to their reduced echelon bases.
    pub fn to_echelon(&self) -> Result<Self> {
        if self.rank() == 0 {
            return Ok(self.clone());
        }
        let eu = column_echelon_basis(&self.u)?;
        let ev = column_echelon_basis(&self.v)?;
        let cu = &pseudoinverse(&self.u) * &eu;
        let cv = &pseudoinverse(&self.v) * &ev;
        let b = &(&cu.inverse()? * &self.b) * &cv.inverse()?.transpose();
        Ok(RankFactorization { u: eu, b, v: ev })
    }
}

/// Reduced echelon basis of the column space of `u` (which must have full
/// column rank): the transpose of the reduced row echelon form of `uᵀ`.
pub fn column_echelon_basis(u: &Matrix) -> Result<Matrix> {
    const PIVOT_TOL: f64 = 1e-6;
    let (k, r) = u.shape();
    let mut rows = u.0.transpose();
    let scale = u.max_abs();
    let mut lead = 0;
    for col in 0..k {
        if lead == r {
            break;
        }
        let (best, best_abs) = (lead..r)
            .map(|i| (i, rows[(i, col)].abs()))
            .fold((lead, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_abs <= PIVOT_TOL * scale {
            continue;
        }
        rows.swap_rows(lead, best);
        let pivot = rows[(lead, col)];
        for j in 0..k {
            rows[(lead, j)] /= pivot;
        }
        for i in 0..r {
            if i != lead {
                let factor = rows[(i, col)];
                if factor != 0.0 {
                    for j in 0..k {
                        rows[(i, j)] -= factor * rows[(lead, j)];
                    }
                }
            }
        }
        lead += 1;
    }
    if lead < r {
        return Err(Error::Input("basis does not have full column rank".into()));
    }
    Ok(Matrix(rows.transpose()))
}

/// Eigendecomposition-based `A = U B Uᵀ`: `U` holds the orthonormal
/// eigenvectors whose eigenvalues exceed `rank_tol · max|λ|` in magnitude,
/// `B` the diagonal of those eigenvalues (largest magnitude first). The zero
/// matrix yields empty `k×0` and `0×0` factors.
pub fn symmetric_rank_decomposition(a: &Matrix, rank_tol: f64) -> Result<RankDecomposition> {
    require_square(a, "symmetric rank decomposition")?;
    a.ensure_symmetric(DEFAULT_SYMMETRY_TOL)?;
    let k = a.nrows();
    if k == 0 || a.max_abs() == 0.0 {
        return Ok(RankDecomposition { u: Matrix::zeros(k, 0), b: Matrix::zeros(0, 0) });
    }
    let eig = a.symmetrized()?.0.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let mut kept: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i].abs() > rank_tol * top).collect();
    kept.sort_by(|&i, &j| eig.eigenvalues[j].abs().total_cmp(&eig.eigenvalues[i].abs()).then(i.cmp(&j)));
    let r = kept.len();
    let mut u = DMatrix::zeros(k, r);
    for (c, &idx) in kept.iter().enumerate() {
        let col = eig.eigenvectors.column(idx);
        // sign convention: largest-magnitude component positive
        let pivot = col.iter().fold(0.0f64, |acc, &x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        u.set_column(c, &(col * sign));
    }
    let b = Matrix::diagonal(&kept.iter().map(|&i| eig.eigenvalues[i]).collect::<Vec<_>>());
    Ok(RankDecomposition { u: Matrix(u), b })
}

/// SVD-based `A = U B Vᵀ` keeping singular values above `rank_tol · σ_max`.
pub fn rank_factorization(a: &Matrix, rank_tol: f64) -> Result<RankFactorization> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 || a.max_abs() == 0.0 {
        return Ok(RankFactorization {
            u: Matrix::zeros(m, 0),
            b: Matrix::zeros(0, 0),
            v: Matrix::zeros(n, 0),
        });
    }
    let (u, s, v) = thin_svd(&a.0);
    let kept: Vec<usize> = (0..s.len()).filter(|&i| s[i] > rank_tol * s[0]).collect();
    let pick = |src: &DMatrix<f64>| {
        let mut out = DMatrix::zeros(src.nrows(), kept.len());
        for (c, &idx) in kept.iter().enumerate() {
            out.set_column(c, &src.column(idx));
        }
        Matrix(out)
    };
    Ok(RankFactorization {
        u: pick(&u),
        b: Matrix::diagonal(&kept.iter().map(|&i| s[i]).collect::<Vec<_>>()),
        v: pick(&v),
    })
}

/// How `Σ_{S,S}` is inverted inside a Schur complement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SchurInverse {
    /// Moore–Penrose pseudoinverse with the given relative rank cutoff.
    MoorePenrose { rank_tol: f64 },
    /// True inverse; numerically singular `Σ_{S,S}` is an error.
    Exact,
}

impl SchurInverse {
    pub fn pseudo() -> Self {
        SchurInverse::MoorePenrose { rank_tol: DEFAULT_RANK_TOL }
    }
}

/// `Σ_{R|S} = Σ_{R,R} − Σ_{R,S} (Σ_{S,S})^{+ or −1} Σ_{S,R}`.
pub fn conditional_covariance(sigma: &Matrix, s: &IndexSet, r: &IndexSet, inverse: SchurInverse) -> Result<Matrix> {
    require_square(sigma, "conditional covariance")?;
    let p = sigma.nrows();
    s.check_bound(p)?;
    r.check_bound(p)?;
    if !s.is_disjoint(r) {
        return Err(Error::InvalidIndexSet(format!("conditioning set {s} and target set {r} overlap")));
    }
    let srr = submatrix(sigma, r, r)?;
    if s.is_empty() {
        return Ok(srr);
    }
    let sss = submatrix(sigma, s, s)?;
    let ssr = submatrix(sigma, s, r)?;
    let srs = submatrix(sigma, r, s)?;
    let correction = match inverse {
        SchurInverse::MoorePenrose { rank_tol } => &(&srs * &pseudoinverse_with_tol(&sss, rank_tol)) * &ssr,
        SchurInverse::Exact => &srs * &sss.solve(&ssr)?,
    };
    Ok(&srr - &correction)
}

/// `‖(I − P) B‖_max` where `P` projects onto the numerical column space of `A`.
pub fn column_space_residual(a: &Matrix, bcols: &Matrix, rank_tol: f64) -> Result<f64> {
    if a.nrows() != bcols.nrows() {
        return Err(Error::Dimension(format!(
            "column-space test needs equal row counts, got {} and {}",
            a.nrows(),
            bcols.nrows()
        )));
    }
    let basis = rank_factorization(a, rank_tol)?.u;
    let projected = &basis * &(&basis.transpose() * bcols);
    Ok((bcols - &projected).max_abs())
}

/// `im(B) ⊆ im(A)`, decided as `‖(I − A A⁺) B‖_max ≤ tol · (1 + ‖B‖_max)`.
pub fn column_space_contains(a: &Matrix, bcols: &Matrix, tol: f64) -> Result<bool> {
    let residual = column_space_residual(a, bcols, DEFAULT_RANK_TOL)?;
    Ok(residual <= tol * (1.0 + bcols.max_abs()))
}
