//! Executable form of the convergence criterion for Schur complements along
//! `Σ^(m) = Σ + Σ^(1,∞)/m + o(1/m)` with a singular limit `Σ`:
//!
//! * (i) `f(U, Σ^(1,∞)_{S,S}) ≠ 0` for a rank decomposition `Σ_{S,S} = U B Uᵀ`,
//! * (ii) `im(Σ_{S,R}) ⊆ im(Σ_{S,S})`,
//!
//! together imply `Σ^(m)_{R|S} → Σ_{R|S}` with the pseudoinverse on the right.

use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::asymptotics::{f, f_asy_extended};
use crate::error::{Error, Result};
use crate::lyapunov::{solve_lyapunov, StableMatrix};
use crate::matrix::{
    column_space_contains, conditional_covariance, det, pseudoinverse, rank_factorization, submatrix,
    symmetric_rank_decomposition, IndexSet, Matrix, RankDecomposition, SchurInverse, DEFAULT_RANK_TOL,
    DEFAULT_SYMMETRY_TOL,
};

/// `{10², 10³, 10⁴, 10⁵, 10⁶}`.
pub const DEFAULT_M_GRID: [f64; 5] = [1e2, 1e3, 1e4, 1e5, 1e6];

/// Numerical thresholds of the checker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Relative eigenvalue / singular value cutoff for ranks and pseudoinverses.
    pub rank_tol: f64,
    /// Condition (i) holds when `|f| > f_rel_tol · ‖Σ^(1,∞)_{S,S}‖_max^{k−r}`.
    pub f_rel_tol: f64,
    /// Relative symmetry tolerance for family members.
    pub symmetry_tol: f64,
    /// Relative residual allowed in the image inclusion of condition (ii).
    pub column_space_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_tol: DEFAULT_RANK_TOL,
            f_rel_tol: 1e-8,
            symmetry_tol: DEFAULT_SYMMETRY_TOL,
            column_space_tol: 1e-8,
        }
    }
}

/// Eigenvalues of an extracted limit may dip this far (relative) below zero.
const PSD_TOL: f64 = 1e-6;

/// Where a family's members come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExplicitSeries,
    LyapunovGenerated,
    UserSequence,
}

/// `m ↦ Σ^(m)`.
pub type Generator = Arc<dyn Fn(f64) -> Result<Matrix> + Send + Sync>;

/// `Σ` and `Σ^(1,∞)` recovered from a generator, with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesExtraction {
    pub sigma: Matrix,
    pub sigma_first_order: Matrix,
    /// Grid point whose three-point fit was kept.
    pub chosen_m: f64,
    /// `(m, ‖Σ^(m) − Σ − Σ^(1,∞)/m‖_max)` over the grid.
    pub residuals: Vec<(f64, f64)>,
}

fn validate_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::Input("grid values must be positive and finite".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    Ok(sorted)
}

/// Recovers `(Σ, Σ^(1,∞))` from `m ↦ Σ^(m)`.
///
/// At every grid point the generator is sampled at `m`, `2m` and `4m` and the
/// quadratic in `t = 1/m` through the three samples gives `Σ ≈ P(0)` and
/// `Σ^(1,∞) ≈ P'(0)`. Truncation error falls with `m` while roundoff in
/// `P'(0)` grows like `m`, so the estimate kept is the one agreeing best with
/// its neighbour on the grid. The residual `‖Σ^(m) − Σ − Σ^(1,∞)/m‖_max`
/// must then be `o(1/m)`: `m · residual` has to shrink by a factor of 0.6
/// between consecutive grid points unless it sits at the roundoff floor.
pub fn extract_series(evaluate: &dyn Fn(f64) -> Result<Matrix>, grid: &[f64]) -> Result<SeriesExtraction> {
    let grid = validate_grid(grid)?;
    if grid.len() < 3 || grid[grid.len() - 1] / grid[0] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::Extraction(
            "the grid needs at least 3 values spanning at least two decades".into(),
        ));
    }
    let mut samples = Vec::with_capacity(grid.len());
    let mut estimates = Vec::with_capacity(grid.len());
    for &m in &grid {
        let x0 = evaluate(m)?;
        let x1 = evaluate(2.0 * m)?;
        let x2 = evaluate(4.0 * m)?;
        if x1.shape() != x0.shape() || x2.shape() != x0.shape() {
            return Err(Error::Dimension("generator changed shape along the grid".into()));
        }
        // Lagrange weights of the nodes t, t/2, t/4 for the value and the slope at 0
        let limit = &(&x0.scale(1.0 / 3.0) - &x1.scale(2.0)) + &x2.scale(8.0 / 3.0);
        let slope = (&(&x1.scale(10.0) - &x0.scale(2.0)) - &x2.scale(8.0)).scale(m);
        estimates.push((limit, slope));
        samples.push(x0);
    }
    let mut best = grid.len() - 1;
    let mut best_gap = f64::INFINITY;
    for i in 1..grid.len() {
        let gap = (&estimates[i].1 - &estimates[i - 1].1)
            .max_abs()
            .max((&estimates[i].0 - &estimates[i - 1].0).max_abs());
        if gap < best_gap {
            best_gap = gap;
            best = i;
        }
    }
    let (sigma, first) = estimates.swap_remove(best);
    let (sigma, first) = if sigma.is_square() {
        (sigma.symmetrized()?, first.symmetrized()?)
    } else {
        (sigma, first)
    };
    let residuals: Vec<(f64, f64)> = grid
        .iter()
        .zip(&samples)
        .map(|(&m, x)| (m, (&(x - &sigma) - &first.scale(1.0 / m)).max_abs()))
        .collect();
    let floor = 1e-9 * (1.0 + sigma.max_abs() + first.max_abs());
    for pair in residuals.windows(2) {
        let ((ma, ra), (mb, rb)) = (pair[0], pair[1]);
        if rb > floor && mb * rb > 0.6 * ma * ra {
            return Err(Error::Extraction(format!(
                "remainder is not o(1/m): m·residual goes from {:e} at m = {ma} to {:e} at m = {mb}",
                ma * ra,
                mb * rb
            )));
        }
    }
    Ok(SeriesExtraction { sigma, sigma_first_order: first, chosen_m: grid[best], residuals })
}

/// A sequence `m ↦ Σ^(m)` of symmetric matrices with its limit `Σ` and
/// first-order coefficient `Σ^(1,∞)`.
#[derive(Clone)]
pub struct PerturbationFamily {
    sigma_limit: Matrix,
    sigma_first_order: Matrix,
    evaluate: Generator,
    provenance: Provenance,
    extraction: Option<SeriesExtraction>,
}

impl fmt::Debug for PerturbationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbationFamily")
            .field("p", &self.p())
            .field("sigma_limit", &self.sigma_limit)
            .field("sigma_first_order", &self.sigma_first_order)
            .field("provenance", &self.provenance)
            .finish_non_exhaustive()
    }
}

fn validate_pair(sigma: &Matrix, sigma1: &Matrix, symmetry_tol: f64) -> Result<()> {
    if !sigma.is_square() || sigma.shape() != sigma1.shape() {
        return Err(Error::Dimension(format!(
            "Σ ({}x{}) and Σ^(1,∞) ({}x{}) must be square of equal size",
            sigma.nrows(),
            sigma.ncols(),
            sigma1.nrows(),
            sigma1.ncols()
        )));
    }
    sigma.ensure_symmetric(symmetry_tol)?;
    sigma1.ensure_symmetric(symmetry_tol)?;
    if sigma.nrows() > 0 {
        let min_eig = sigma.symmetrized()?.into_nalgebra().symmetric_eigenvalues().min();
        if min_eig < -PSD_TOL * (1.0 + sigma.max_abs()) {
            return Err(Error::Input(format!(
                "limit Σ is not positive semidefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
    }
    Ok(())
}

impl PerturbationFamily {
    /// `Σ^(m) = Σ + Σ^(1,∞)/m`.
    pub fn explicit_series(sigma: Matrix, sigma1: Matrix) -> Result<Self> {
        Self::linear(sigma, sigma1, Provenance::ExplicitSeries)
    }

    /// `Σ^(m) = Σ + Σ^(1,∞)/m` for matrices read from user files.
    pub fn user_sequence(sigma: Matrix, sigma1: Matrix) -> Result<Self> {
        Self::user_sequence_with_tol(sigma, sigma1, DEFAULT_SYMMETRY_TOL)
    }

    /// [`Self::user_sequence`] with a caller-chosen relative symmetry tolerance.
    pub fn user_sequence_with_tol(sigma: Matrix, sigma1: Matrix, symmetry_tol: f64) -> Result<Self> {
        Self::linear_with_tol(sigma, sigma1, Provenance::UserSequence, symmetry_tol)
    }

    fn linear(sigma: Matrix, sigma1: Matrix, provenance: Provenance) -> Result<Self> {
        Self::linear_with_tol(sigma, sigma1, provenance, DEFAULT_SYMMETRY_TOL)
    }

    fn linear_with_tol(sigma: Matrix, sigma1: Matrix, provenance: Provenance, symmetry_tol: f64) -> Result<Self> {
        validate_pair(&sigma, &sigma1, symmetry_tol)?;
        let (s0, s1) = (sigma.clone(), sigma1.clone());
        let evaluate: Generator = Arc::new(move |m| Ok(&s0 + &s1.scale(1.0 / m)));
        Ok(PerturbationFamily { sigma_limit: sigma, sigma_first_order: sigma1, evaluate, provenance, extraction: None })
    }

    /// A family whose series coefficients are known in closed form but whose
    /// members carry higher-order terms.
    pub fn with_parts(sigma: Matrix, sigma1: Matrix, evaluate: Generator, provenance: Provenance) -> Result<Self> {
        validate_pair(&sigma, &sigma1, DEFAULT_SYMMETRY_TOL)?;
        Ok(PerturbationFamily { sigma_limit: sigma, sigma_first_order: sigma1, evaluate, provenance, extraction: None })
    }

    /// Extracts `Σ` and `Σ^(1,∞)` from the generator with [`extract_series`].
    pub fn from_generator(evaluate: Generator, grid: &[f64], provenance: Provenance) -> Result<Self> {
        let extraction = extract_series(evaluate.as_ref(), grid)?;
        validate_pair(&extraction.sigma, &extraction.sigma_first_order, DEFAULT_SYMMETRY_TOL)?;
        Ok(PerturbationFamily {
            sigma_limit: extraction.sigma.clone(),
            sigma_first_order: extraction.sigma_first_order.clone(),
            evaluate,
            provenance,
            extraction: Some(extraction),
        })
    }

    /// `Σ^(m)` solves the Lyapunov equation for the stable matrix `M(m)`.
    pub fn lyapunov(m_of: impl Fn(f64) -> Matrix + Send + Sync + 'static, grid: &[f64]) -> Result<Self> {
        let evaluate: Generator = Arc::new(move |m| solve_lyapunov(&StableMatrix::new(m_of(m))?));
        Self::from_generator(evaluate, grid, Provenance::LyapunovGenerated)
    }

    pub fn p(&self) -> usize {
        self.sigma_limit.nrows()
    }

    pub fn sigma_limit(&self) -> &Matrix {
        &self.sigma_limit
    }

    pub fn sigma_first_order(&self) -> &Matrix {
        &self.sigma_first_order
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn extraction(&self) -> Option<&SeriesExtraction> {
        self.extraction.as_ref()
    }

    pub fn evaluate(&self, m: f64) -> Result<Matrix> {
        (self.evaluate)(m)
    }

    /// The `(rows, cols)` block of both series coefficients.
    pub fn block(&self, rows: &IndexSet, cols: &IndexSet) -> Result<SeriesPair> {
        Ok(SeriesPair {
            limit: submatrix(&self.sigma_limit, rows, cols)?,
            first_order: submatrix(&self.sigma_first_order, rows, cols)?,
        })
    }
}

/// Outcome of the checker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConvergesByTheorem,
    ConditionsViolated,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ConvergesByTheorem => "converges-by-theorem",
            Verdict::ConditionsViolated => "conditions-violated",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// One row of the empirical table; `error` is `None` when `Σ^(m)_{S,S}` was
/// numerically singular or the generator failed at that `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EmpiricalRow {
    pub m: f64,
    #[serde(serialize_with = "serialize_optional_float")]
    pub error: Option<f64>,
}

fn serialize_optional_float<S: Serializer>(value: &Option<f64>, serializer: S) -> std::result::Result<S::Ok, S::Error> {
    match value {
        Some(x) => serializer.serialize_f64(*x),
        None => serializer.serialize_none(),
    }
}

/// Structured verdict of [`check_theorem`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremReport {
    /// `f(U, Σ^(1,∞)_{S,S})`; `det(U)²` when `Σ_{S,S}` is invertible.
    pub condition_i_value: f64,
    pub condition_i_holds: bool,
    pub condition_ii_holds: bool,
    pub rank_r: usize,
    /// `Σ_{R|S}` with the Moore–Penrose pseudoinverse.
    pub limit_conditional: Matrix,
    pub empirical_table: Vec<EmpiricalRow>,
    pub verdict: Verdict,
    #[serde(skip)]
    pub k: usize,
    #[serde(skip)]
    pub f_tolerance: f64,
    #[serde(skip)]
    pub cond: IndexSet,
    #[serde(skip)]
    pub target: IndexSet,
}

impl fmt::Display for TheoremReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let holds = |b: bool| if b { "holds" } else { "fails" };
        writeln!(f, "verdict: {}", self.verdict)?;
        writeln!(f, "conditioning set S = {}, target set R = {}", self.cond, self.target)?;
        writeln!(f, "rank of Sigma_SS: r = {} (k = {})", self.rank_r, self.k)?;
        writeln!(
            f,
            "condition (i): f = {} ({}, tolerance {:e})",
            self.condition_i_value,
            holds(self.condition_i_holds),
            self.f_tolerance
        )?;
        writeln!(f, "condition (ii): {}", holds(self.condition_ii_holds))?;
        writeln!(f, "limit conditional covariance:")?;
        write!(f, "{}", self.limit_conditional)?;
        writeln!(f, "m, max-norm error of the Schur complement:")?;
        for row in &self.empirical_table {
            match row.error {
                Some(e) => writeln!(f, "  {} {}", row.m, e)?,
                None => writeln!(f, "  {} unavailable", row.m)?,
            }
        }
        Ok(())
    }
}

fn validate_sets(p: usize, s: &IndexSet, r: &IndexSet) -> Result<()> {
    s.check_bound(p)?;
    r.check_bound(p)?;
    if !s.is_disjoint(r) {
        return Err(Error::InvalidIndexSet(format!("S = {s} and R = {r} overlap")));
    }
    if s.len() >= p {
        return Err(Error::InvalidIndexSet(format!("|S| = {} must be smaller than p = {p}", s.len())));
    }
    Ok(())
}

fn verdict_for(value: f64, f_tol: f64, ii: bool) -> (bool, Verdict) {
    let holds = value.abs() > f_tol;
    let verdict = if !ii {
        Verdict::ConditionsViolated
    } else if value.abs() > f_tol / 10.0 && value.abs() <= 10.0 * f_tol {
        Verdict::Inconclusive
    } else if holds {
        Verdict::ConvergesByTheorem
    } else {
        Verdict::ConditionsViolated
    };
    (holds, verdict)
}

fn empirical_table(
    evaluate: &dyn Fn(f64) -> Result<Matrix>,
    limit: &Matrix,
    s: &IndexSet,
    r: &IndexSet,
    grid: &[f64],
) -> Result<Vec<EmpiricalRow>> {
    Ok(validate_grid(grid)?
        .into_iter()
        .map(|m| {
            let error = evaluate(m)
                .and_then(|sigma_m| conditional_covariance(&sigma_m, s, r, SchurInverse::Exact))
                .ok()
                .map(|schur| (&schur - limit).max_abs());
            EmpiricalRow { m, error }
        })
        .collect())
}

/// Checks conditions (i) and (ii) with `U` taken from the reduced echelon
/// basis of `im(Σ_{S,S})`, computes the limit `Σ_{R|S}` and tabulates the
/// Schur complement error along `grid`.
pub fn check_theorem(
    fam: &PerturbationFamily,
    s: &IndexSet,
    r: &IndexSet,
    grid: &[f64],
    tol: &Tolerances,
) -> Result<TheoremReport> {
    validate_sets(fam.p(), s, r)?;
    let sss = submatrix(fam.sigma_limit(), s, s)?;
    let decomposition = symmetric_rank_decomposition(&sss, tol.rank_tol)?.to_echelon()?;
    check_with(fam, s, r, grid, tol, &decomposition)
}

/// [`check_theorem`] with a caller-supplied decomposition `Σ_{S,S} = U B Uᵀ`.
pub fn check_theorem_with_decomposition(
    fam: &PerturbationFamily,
    s: &IndexSet,
    r: &IndexSet,
    grid: &[f64],
    tol: &Tolerances,
    decomposition: &RankDecomposition,
) -> Result<TheoremReport> {
    validate_sets(fam.p(), s, r)?;
    let sss = submatrix(fam.sigma_limit(), s, s)?;
    if decomposition.u().nrows() != s.len() {
        return Err(Error::Dimension(format!("U must have {} rows", s.len())));
    }
    let residual = (&decomposition.reconstruct() - &sss).max_abs();
    if residual > 1e-8 * (1.0 + sss.max_abs()) {
        return Err(Error::Input(format!("decomposition does not reproduce Σ_SS (residual {residual:e})")));
    }
    check_with(fam, s, r, grid, tol, decomposition)
}

fn check_with(
    fam: &PerturbationFamily,
    s: &IndexSet,
    r: &IndexSet,
    grid: &[f64],
    tol: &Tolerances,
    decomposition: &RankDecomposition,
) -> Result<TheoremReport> {
    let k = s.len();
    let rank = decomposition.rank();
    let g = submatrix(fam.sigma_first_order(), s, s)?;
    let (value, f_tol) = if rank == k {
        // invertible Σ_{S,S}: Schur complements are continuous, only α = ∅ remains
        (det(decomposition.u())?.powi(2), tol.f_rel_tol)
    } else {
        (f(decomposition.u(), &g)?, tol.f_rel_tol * g.max_abs().powi((k - rank) as i32))
    };
    let sss = submatrix(fam.sigma_limit(), s, s)?;
    let ssr = submatrix(fam.sigma_limit(), s, r)?;
    let ii = column_space_contains(&sss, &ssr, tol.column_space_tol)?;
    let limit = conditional_covariance(
        fam.sigma_limit(),
        s,
        r,
        SchurInverse::MoorePenrose { rank_tol: tol.rank_tol },
    )?;
    let (holds, verdict) = verdict_for(value, f_tol, ii);
    let table = empirical_table(&|m| fam.evaluate(m), &limit, s, r, grid)?;
    Ok(TheoremReport {
        condition_i_value: value,
        condition_i_holds: holds,
        condition_ii_holds: ii,
        rank_r: rank,
        limit_conditional: limit,
        empirical_table: table,
        verdict,
        k,
        f_tolerance: f_tol,
        cond: s.clone(),
        target: r.clone(),
    })
}

/// The variant without symmetry: `A^(m) = A + A^(1,∞)/m`, factorization
/// `A_{S,S} = U B Vᵀ`, condition (i) on `f_asy(U, V, A^(1,∞)_{S,S})` and
/// condition (ii) requiring both `im(A_{S,R}) ⊆ im(A_{S,S})` and
/// `im(A_{R,S}ᵀ) ⊆ im(A_{S,S}ᵀ)`.
pub fn check_theorem_asymmetric(
    a: &Matrix,
    a1: &Matrix,
    s: &IndexSet,
    r: &IndexSet,
    grid: &[f64],
    tol: &Tolerances,
) -> Result<TheoremReport> {
    if !a.is_square() || a.shape() != a1.shape() {
        return Err(Error::Dimension("A and A^(1,∞) must be square of equal size".into()));
    }
    validate_sets(a.nrows(), s, r)?;
    let k = s.len();
    let ass = submatrix(a, s, s)?;
    let factors = rank_factorization(&ass, tol.rank_tol)?.to_echelon()?;
    let rank = factors.rank();
    let g = submatrix(a1, s, s)?;
    let value = f_asy_extended(&factors.u, &factors.v, &g)?;
    let f_tol = if rank == k { tol.f_rel_tol } else { tol.f_rel_tol * g.max_abs().powi((k - rank) as i32) };
    let columns = column_space_contains(&ass, &submatrix(a, s, r)?, tol.column_space_tol)?;
    let rows = column_space_contains(&ass.transpose(), &submatrix(a, r, s)?.transpose(), tol.column_space_tol)?;
    let ii = columns && rows;
    let limit = conditional_covariance(a, s, r, SchurInverse::MoorePenrose { rank_tol: tol.rank_tol })?;
    let (holds, verdict) = verdict_for(value, f_tol, ii);
    let (a0, a1c) = (a.clone(), a1.clone());
    let table = empirical_table(&move |m| Ok(&a0 + &a1c.scale(1.0 / m)), &limit, s, r, grid)?;
    Ok(TheoremReport {
        condition_i_value: value,
        condition_i_holds: holds,
        condition_ii_holds: ii,
        rank_r: rank,
        limit_conditional: limit,
        empirical_table: table,
        verdict,
        k,
        f_tolerance: f_tol,
        cond: s.clone(),
        target: r.clone(),
    })
}

/// First two coefficients of a matrix series `X + X^(1,∞)/m + o(1/m)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesPair {
    pub limit: Matrix,
    pub first_order: Matrix,
}

impl SeriesPair {
    pub fn new(limit: Matrix, first_order: Matrix) -> Result<Self> {
        if limit.shape() != first_order.shape() {
            return Err(Error::Dimension("series coefficients must have equal shapes".into()));
        }
        Ok(SeriesPair { limit, first_order })
    }

    pub fn at(&self, m: f64) -> Matrix {
        &self.limit + &self.first_order.scale(1.0 / m)
    }
}

/// Limit of a coordinate of `A_m⁻¹ w_m` via Cramer's rule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CramerLimit {
    pub value: f64,
    /// Leading coefficient of `det(A_m[j])`.
    pub numerator_coefficient: f64,
    /// Leading coefficient of `det(A_m)`.
    pub denominator_coefficient: f64,
    /// Both determinants are of order `m^{−order}`.
    pub order: usize,
    /// `(A_m⁻¹ w_m)_j` from a direct solve at `m = CRAMER_CHECK_M`, when solvable.
    pub direct_value: Option<f64>,
}

/// `m` at which [`cramer_entry_limit`] cross-checks against a direct solve.
pub const CRAMER_CHECK_M: f64 = 1e8;

/// `lim_m (A_m⁻¹ w_m)_j = lim det(A_m[j]) / det(A_m)`, where `A_m[j]` has
/// column `j` (1-based) replaced by `w_m`.
///
/// Writing `A = U B Vᵀ` (rank `r`), both determinants are of order
/// `m^{−(k−r)}` when `w ∈ im(A)`: `A[j]` factors as `U B V_jᵀ` and the
/// expansion lemma applies to numerator and denominator alike.
pub fn cramer_entry_limit(a: &SeriesPair, w: &SeriesPair, j: usize, tol: &Tolerances) -> Result<CramerLimit> {
    let k = a.limit.nrows();
    if !a.limit.is_square() || w.limit.shape() != (k, 1) {
        return Err(Error::Dimension(format!("A must be square and w a {k}x1 column")));
    }
    let w_col = w.limit.column(1)?;
    let w1_col = w.first_order.column(1)?;
    let factors = rank_factorization(&a.limit, tol.rank_tol)?.to_echelon()?;
    let rank = factors.rank();
    let order = k - rank;
    let denominator = det(&factors.b)? * f_asy_extended(&factors.u, &factors.v, &a.first_order)?;
    let f_tol = if order == 0 {
        tol.f_rel_tol * (1.0 + a.limit.max_abs()).powi(k as i32)
    } else {
        tol.f_rel_tol * a.first_order.max_abs().powi(order as i32) * det(&factors.b)?.abs()
    };
    if !(denominator.abs() > f_tol) {
        return Err(Error::DivisionOrder { coefficient: denominator, tolerance: f_tol });
    }
    let replaced = a.limit.replace_column(j, &w_col)?;
    let replaced1 = a.first_order.replace_column(j, &w1_col)?;
    // A[j] = U X with X = U⁺ A[j] once w ∈ im(U); write X = B V_jᵀ
    let x = &pseudoinverse(&factors.u) * &replaced;
    if (&(&factors.u * &x) - &replaced).max_abs() > tol.column_space_tol * (1.0 + replaced.max_abs()) {
        return Err(Error::Input("w is not in the column space of A".into()));
    }
    let v_j = (&factors.b.inverse()? * &x).transpose();
    let numerator = det(&factors.b)? * f_asy_extended(&factors.u, &v_j, &replaced1)?;
    let direct_value = a.at(CRAMER_CHECK_M).solve(&w.at(CRAMER_CHECK_M)).ok().map(|z| z[(j - 1, 0)]);
    Ok(CramerLimit {
        value: numerator / denominator,
        numerator_coefficient: numerator,
        denominator_coefficient: denominator,
        order,
        direct_value,
    })
}
