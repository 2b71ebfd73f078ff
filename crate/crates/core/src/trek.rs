//! Toeplitz matrices `T_n = (−|i − j|)` and the trek constructions
//! `1 ← ⋯ ← s → ⋯ → p` whose Lyapunov covariances have a singular limit with
//! `Σ_{1p|S} ≠ 0` for `S = {2, …, p−1}`.

use std::fmt;

use serde::Serialize;

use crate::asymptotics::f_asy_extended;
use crate::convergence::{check_theorem, Generator, PerturbationFamily, Provenance, TheoremReport, Tolerances, Verdict};
use crate::error::{Error, Result};
use crate::lyapunov::{solve_lyapunov, StableMatrix};
use crate::matrix::{IndexSet, Matrix};

/// `T_n` with entries `−|i − j|`.
pub fn toeplitz_t(n: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Input("T_n needs n ≥ 1".into()));
    }
    Ok(Matrix::from_fn(n, n, |i, j| -(i.abs_diff(j) as f64)))
}

/// `T_n[i]`: column `i` (1-based) of `T_n` replaced by the all-ones vector.
pub fn toeplitz_replaced(n: usize, i: usize) -> Result<Matrix> {
    let t = toeplitz_t(n)?;
    if i == 0 || i > n {
        return Err(Error::Input(format!("column {i} is outside 1..={n}")));
    }
    t.replace_column(i, &vec![1.0; n])
}

fn endpoint_count(n: usize) -> i32 {
    if n == 1 {
        1
    } else {
        2
    }
}

/// `det(T_n) = 2^{n−2} (1 − n)`, which is 0 for `n = 1`.
pub fn toeplitz_det(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Input("T_n needs n ≥ 1".into()));
    }
    Ok(2f64.powi(n as i32 - 2) * (1.0 - n as f64))
}

/// `2^{n−1} (1 − n)`: twice [`toeplitz_det`] for `n ≥ 2`.
pub fn toeplitz_det_doubled_form(n: usize) -> Result<f64> {
    Ok(2.0 * toeplitz_det(n)?)
}

/// `det(T_n[i]) = 2^{n − |{1, n}|}` for `i ∈ {1, n}` and 0 otherwise.
pub fn toeplitz_det_replaced(n: usize, i: usize) -> Result<f64> {
    if n == 0 || i == 0 || i > n {
        return Err(Error::Input(format!("need 1 ≤ i ≤ n, got i = {i}, n = {n}")));
    }
    if i == 1 || i == n {
        Ok(2f64.powi(n as i32 - endpoint_count(n)))
    } else {
        Ok(0.0)
    }
}

/// Block-diagonal `U = diag(1_{n_l}, 1, 1_{n_r})` of size `k×3` (`k×2` when
/// `n_l = 0`).
pub fn trek_block_u(n_l: usize, n_r: usize) -> Result<Matrix> {
    if n_r == 0 {
        return Err(Error::Input("n_r must be at least 1".into()));
    }
    let k = n_l + 1 + n_r;
    let offset = usize::from(n_l > 0);
    Ok(Matrix::from_fn(k, 2 + offset, |i, j| {
        let block = if i < n_l {
            0
        } else if i == n_l {
            offset
        } else {
            offset + 1
        };
        if j == block {
            1.0
        } else {
            0.0
        }
    }))
}

/// Checks that `G` has the fixed blocks `T_{n_l}`, `0` and `T_{n_r}` on the
/// diagonal and zeros between the two Toeplitz blocks; the middle row and
/// column are free.
pub fn check_trek_block_structure(n_l: usize, n_r: usize, g: &Matrix) -> Result<()> {
    const TOL: f64 = 1e-12;
    let k = n_l + 1 + n_r;
    if g.shape() != (k, k) {
        return Err(Error::Dimension(format!("G must be {k}x{k}, got {}x{}", g.nrows(), g.ncols())));
    }
    let mid = n_l;
    for i in 0..k {
        for j in 0..k {
            if i == mid && j == mid {
                if g[(i, j)].abs() > TOL {
                    return Err(Error::Structure(format!("G[{0},{0}] must be 0", mid + 1)));
                }
                continue;
            }
            if i == mid || j == mid {
                continue;
            }
            let expected = match (i < mid, j < mid) {
                (true, true) | (false, false) => -(i.abs_diff(j) as f64),
                _ => 0.0,
            };
            if (g[(i, j)] - expected).abs() > TOL {
                return Err(Error::Structure(format!(
                    "G[{},{}] = {} but the block pattern requires {expected}",
                    i + 1,
                    j + 1,
                    g[(i, j)]
                )));
            }
        }
    }
    Ok(())
}

/// `f(U, G)` for the block-ones `U` of [`trek_block_u`], after verifying the
/// block structure of `G`. The square case `(n_l, n_r) = (0, 1)` gives `det(U)²`.
pub fn f_trek_block(n_l: usize, n_r: usize, g: &Matrix) -> Result<f64> {
    let u = trek_block_u(n_l, n_r)?;
    check_trek_block_structure(n_l, n_r, g)?;
    f_asy_extended(&u, &u, g)
}

/// Closed form of [`f_trek_block`]: each Toeplitz block of size `n ≥ 1`
/// contributes `2^{n−1}` and an absent left block contributes 1.
pub fn f_trek_closed_form(n_l: usize, n_r: usize) -> f64 {
    let side = |n: usize| if n == 0 { 1.0 } else { 2f64.powi(n as i32 - 1) };
    side(n_l) * side(n_r)
}

/// The exponent form `2^{k + 1 − |{1, n_l}| − |{1, n_r}|}`. It agrees with
/// [`f_trek_closed_form`] when `n_l, n_r ≥ 2` and undercounts by a factor
/// of 2 for each block of size 1 (and for an absent left block).
pub fn f_trek_exponent_form(n_l: usize, n_r: usize) -> f64 {
    let count = |n: usize| if n == 1 { 1 } else { 2 };
    let k = (n_l + 1 + n_r) as i32;
    2f64.powi(k + 1 - count(n_l) - count(n_r))
}

/// `G` with the required fixed blocks and the free middle row/column filled
/// from `fill` (length `2(k − 1)`: row entries first, then column entries).
pub fn trek_block_g(n_l: usize, n_r: usize, fill: &[f64]) -> Result<Matrix> {
    let k = n_l + 1 + n_r;
    if fill.len() != 2 * (k - 1) {
        return Err(Error::Dimension(format!("need {} free entries, got {}", 2 * (k - 1), fill.len())));
    }
    let mid = n_l;
    let others: Vec<usize> = (0..k).filter(|&i| i != mid).collect();
    let mut g = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            if i == mid || j == mid {
                continue;
            }
            if (i < mid) == (j < mid) {
                g[(i, j)] = -(i.abs_diff(j) as f64);
            }
        }
    }
    for (idx, &j) in others.iter().enumerate() {
        g[(mid, j)] = fill[idx];
        g[(j, mid)] = fill[others.len() + idx];
    }
    Ok(g)
}

/// A trek with `a_l` edges on the left branch and `a_r ≥ max(a_l, 1)` on the
/// right; nodes are numbered `1..=p` left to right and the source is `a_l + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TrekSpec {
    pub a_l: usize,
    pub a_r: usize,
}

impl TrekSpec {
    pub fn new(a_l: usize, a_r: usize) -> Result<Self> {
        if a_r == 0 {
            return Err(Error::Input("the right branch needs at least one edge".into()));
        }
        if a_r < a_l {
            return Err(Error::Input(format!(
                "expected a_r ≥ a_l (reverse the numbering), got a_l = {a_l}, a_r = {a_r}"
            )));
        }
        Ok(TrekSpec { a_l, a_r })
    }

    pub fn p(&self) -> usize {
        self.a_l + 1 + self.a_r
    }

    pub fn source(&self) -> usize {
        self.a_l + 1
    }

    /// `{2, …, p − 1}`.
    pub fn conditioning_set(&self) -> IndexSet {
        IndexSet::range(2, self.p() - 1).expect("ascending range")
    }

    /// `{1, p}`.
    pub fn target_set(&self) -> IndexSet {
        IndexSet::new(vec![1, self.p()]).expect("p ≥ 2")
    }

    pub fn case(&self) -> TrekCase {
        match (self.a_l, self.a_r) {
            (a_l, a_r) if a_l >= 2 && a_r > 2 => TrekCase::General,
            (1, a_r) if a_r > 2 => TrekCase::LeftOne,
            (0, a_r) if a_r > 2 => TrekCase::Path,
            _ => TrekCase::SmallExplicit,
        }
    }

    /// Directed edges `(from, to)`, 1-based.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let s = self.source();
        let left = (2..=s).rev().map(|j| (j, j - 1));
        let right = (s..self.p()).map(|j| (j, j + 1));
        left.chain(right).collect()
    }
}

impl fmt::Display for TrekSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.p();
        let s = self.source();
        let left: Vec<String> = (1..s).map(|j| j.to_string()).collect();
        let right: Vec<String> = (s + 1..=p).map(|j| j.to_string()).collect();
        let mut out = String::new();
        if !left.is_empty() {
            out.push_str(&left.join(" <- "));
            out.push_str(" <- ");
        }
        out.push_str(&s.to_string());
        if !right.is_empty() {
            out.push_str(" -> ");
            out.push_str(&right.join(" -> "));
        }
        f.write_str(&out)
    }
}

/// Which construction a trek falls under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrekCase {
    /// `a_l ≥ 2`, `a_r > 2`.
    General,
    /// `a_l = 1`, `a_r > 2`.
    LeftOne,
    /// `a_l = 0`, `a_r > 2`: a directed path.
    Path,
    /// `(a_l, a_r) ∈ {(2,2), (1,2), (1,1), (0,2), (0,1)}`: constant `M` with
    /// diagonal −1 and unit edge weights.
    SmallExplicit,
}

impl TrekCase {
    /// Limit of `Σ^(m)_{1p|S}` for the construction; no value is known for
    /// the small explicit instances.
    pub fn expected_limit(&self) -> Option<f64> {
        match self {
            TrekCase::General => Some(5.0 / 48.0),
            TrekCase::LeftOne => Some(0.1),
            TrekCase::Path => Some(-1.0 / 24.0),
            TrekCase::SmallExplicit => None,
        }
    }
}

impl fmt::Display for TrekCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrekCase::General => "general",
            TrekCase::LeftOne => "left-one",
            TrekCase::Path => "path",
            TrekCase::SmallExplicit => "small-explicit",
        })
    }
}

/// `M^(m)` for the trek. The diagonal entry of node `j` is −1 when `j` is a
/// sink, the source or adjacent to the source, and `−m` otherwise; the edge
/// `j → i` has weight 1 when it touches the source or a sink, `m` otherwise.
/// Small explicit treks use −1 and 1 throughout, independent of `m`.
pub fn trek_matrix(spec: &TrekSpec, m: f64) -> Matrix {
    let (p, s) = (spec.p(), spec.source());
    let small = spec.case() == TrekCase::SmallExplicit;
    let special = |j: usize| j == 1 || j == p || j.abs_diff(s) <= 1;
    let mut out = Matrix::zeros(p, p);
    for j in 1..=p {
        out[(j - 1, j - 1)] = if small || special(j) { -1.0 } else { -m };
    }
    for (from, to) in spec.edges() {
        let unit = small || from == s || to == 1 || to == p;
        out[(to - 1, from - 1)] = if unit { 1.0 } else { m };
    }
    out
}

/// `m`-grid used to extract the series of a trek family.
pub const TREK_GRID: [f64; 4] = [1e3, 1e4, 1e5, 1e6];

/// A trek together with its Lyapunov-generated covariance family.
#[derive(Clone, Debug)]
pub struct TrekModel {
    pub spec: TrekSpec,
    pub case: TrekCase,
    pub family: PerturbationFamily,
    pub cond: IndexSet,
    pub target: IndexSet,
}

/// `M^(m)` sampled at one `m`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrekSample {
    pub m: f64,
    pub matrix: Matrix,
}

/// Serializable description of a [`TrekModel`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrekSnapshot {
    pub spec: TrekSpec,
    pub case: TrekCase,
    pub samples: Vec<TrekSample>,
}

impl TrekModel {
    pub fn stable_matrix(&self, m: f64) -> Result<StableMatrix> {
        StableMatrix::new(trek_matrix(&self.spec, m))
    }

    pub fn snapshot(&self, ms: &[f64]) -> TrekSnapshot {
        TrekSnapshot {
            spec: self.spec,
            case: self.case,
            samples: ms.iter().map(|&m| TrekSample { m, matrix: trek_matrix(&self.spec, m) }).collect(),
        }
    }
}

/// Builds `M^(m)` and the covariance family `m ↦ Σ^(m)` for the trek.
pub fn build_trek_model(spec: TrekSpec) -> Result<TrekModel> {
    let case = spec.case();
    let family = if case == TrekCase::SmallExplicit {
        let m = StableMatrix::new(trek_matrix(&spec, 1.0))?;
        let sigma = solve_lyapunov(&m)?;
        let p = spec.p();
        let constant = sigma.clone();
        let evaluate: Generator = std::sync::Arc::new(move |_| Ok(constant.clone()));
        PerturbationFamily::with_parts(sigma, Matrix::zeros(p, p), evaluate, Provenance::LyapunovGenerated)?
    } else {
        PerturbationFamily::lyapunov(move |m| trek_matrix(&spec, m), &TREK_GRID)?
    };
    Ok(TrekModel { spec, case, family, cond: spec.conditioning_set(), target: spec.target_set() })
}

/// [`TheoremReport`] for a trek together with the construction's known limit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrekReport {
    pub spec: TrekSpec,
    pub case: TrekCase,
    pub expected_limit: Option<f64>,
    /// Entry `(1, p)` of the limit conditional covariance.
    pub computed_limit: f64,
    pub report: TheoremReport,
}

/// `|computed − expected|` allowed when a closed-form limit is known.
pub const TREK_LIMIT_TOL: f64 = 1e-8;
/// Limits at or below this magnitude do not count as nonzero.
pub const NONZERO_TOL: f64 = 1e-8;

impl TrekReport {
    pub fn matches_expected(&self) -> Option<bool> {
        self.expected_limit.map(|e| (self.computed_limit - e).abs() <= TREK_LIMIT_TOL)
    }

    pub fn nonzero(&self) -> bool {
        self.computed_limit.abs() > NONZERO_TOL
    }

    /// The theorem applies, the limit is nonzero and agrees with the known
    /// value where there is one.
    pub fn confirmed(&self) -> bool {
        self.report.verdict == Verdict::ConvergesByTheorem && self.nonzero() && self.matches_expected() != Some(false)
    }
}

impl fmt::Display for TrekReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trek: {} (a_l = {}, a_r = {}, case {})", self.spec, self.spec.a_l, self.spec.a_r, self.case)?;
        match self.expected_limit {
            Some(e) => writeln!(f, "expected limit Sigma_1p|S: {e}")?,
            None => writeln!(f, "expected limit Sigma_1p|S: none known")?,
        }
        writeln!(f, "computed limit Sigma_1p|S: {}", self.computed_limit)?;
        write!(f, "{}", self.report)
    }
}

/// Runs the checker on the trek family with `S = {2..p−1}` and `R = {1, p}`.
pub fn verify_trek_proposition(spec: TrekSpec) -> Result<TrekReport> {
    verify_trek_proposition_with_grid(spec, &TREK_GRID, &Tolerances::default())
}

pub fn verify_trek_proposition_with_grid(spec: TrekSpec, grid: &[f64], tol: &Tolerances) -> Result<TrekReport> {
    let model = build_trek_model(spec)?;
    let report = check_theorem(&model.family, &model.cond, &model.target, grid, tol)?;
    Ok(TrekReport {
        spec,
        case: model.case,
        expected_limit: model.case.expected_limit(),
        computed_limit: report.limit_conditional[(0, 1)],
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{column_space_residual, det, submatrix, DEFAULT_RANK_TOL};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toeplitz_examples() {
        assert_eq!(toeplitz_t(1).unwrap().row_major(), vec![0.0]);
        let t3 = Matrix::from_rows(&[[0.0, -1.0, -2.0], [-1.0, 0.0, -1.0], [-2.0, -1.0, 0.0]]).unwrap();
        assert_eq!(toeplitz_t(3).unwrap(), t3);
        let t4 = toeplitz_t(4).unwrap();
        for i in 0..4 {
            assert_eq!(t4[(i, i)], 0.0);
        }
        for i in 0..3 {
            assert_eq!(t4[(i, i + 1)], -1.0);
        }
        assert!(toeplitz_t(0).is_err());
    }

    #[test]
    fn toeplitz_determinant_examples() {
        assert_eq!(toeplitz_det(5).unwrap(), -32.0);
        assert!((det(&toeplitz_t(5).unwrap()).unwrap() + 32.0).abs() < 1e-9);
        assert_eq!(toeplitz_det_doubled_form(5).unwrap(), -64.0);
        assert_eq!(toeplitz_det(2).unwrap(), -1.0);
        assert_eq!(toeplitz_det(1).unwrap(), 0.0);
        assert_eq!(toeplitz_det_replaced(5, 1).unwrap(), 8.0);
        assert_eq!(toeplitz_det_replaced(5, 3).unwrap(), 0.0);
        assert_eq!(toeplitz_det_replaced(1, 1).unwrap(), 1.0);
        assert!(toeplitz_det_replaced(3, 4).is_err());
        assert!(toeplitz_det_replaced(3, 0).is_err());
    }

    #[test]
    fn toeplitz_closed_forms_match_elimination() {
        for n in 1..=12 {
            let closed = toeplitz_det(n).unwrap();
            let numeric = det(&toeplitz_t(n).unwrap()).unwrap();
            assert!((closed - numeric).abs() <= 1e-8 * closed.abs().max(1.0), "n = {n}");
            for i in 1..=n {
                let closed = toeplitz_det_replaced(n, i).unwrap();
                let numeric = det(&toeplitz_replaced(n, i).unwrap()).unwrap();
                assert!((closed - numeric).abs() <= 1e-8 * closed.abs().max(1.0), "n = {n}, i = {i}");
            }
        }
    }

    fn random_fill(k: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..2 * (k - 1)).map(|_| rng.gen_range(-3.0..3.0)).collect()
    }

    #[test]
    fn block_lemma_is_independent_of_free_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n_l in 0..=4 {
            for n_r in 1..=4 {
                let k = n_l + 1 + n_r;
                let a = f_trek_block(n_l, n_r, &trek_block_g(n_l, n_r, &random_fill(k, &mut rng)).unwrap()).unwrap();
                let b = f_trek_block(n_l, n_r, &trek_block_g(n_l, n_r, &random_fill(k, &mut rng)).unwrap()).unwrap();
                assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "({n_l}, {n_r}): {a} vs {b}");
                assert!((a - f_trek_closed_form(n_l, n_r)).abs() <= 1e-9 * (1.0 + a.abs()), "({n_l}, {n_r}): {a}");
            }
        }
    }

    #[test]
    fn exponent_form_agrees_away_from_unit_blocks() {
        for n_l in 2..=6 {
            for n_r in 2..=6 {
                assert_eq!(f_trek_exponent_form(n_l, n_r), f_trek_closed_form(n_l, n_r));
            }
        }
        assert_eq!(f_trek_closed_form(2, 2), 4.0);
        assert_eq!(f_trek_closed_form(1, 2), 2.0);
        assert_eq!(f_trek_exponent_form(1, 2), 4.0);
    }

    #[test]
    fn block_structure_is_enforced() {
        let mut g = trek_block_g(2, 2, &[0.0; 8]).unwrap();
        g[(0, 4)] = 1.0;
        assert!(matches!(f_trek_block(2, 2, &g), Err(Error::Structure(_))));
        let mut g = trek_block_g(2, 2, &[0.0; 8]).unwrap();
        g[(2, 2)] = 1.0;
        assert!(matches!(f_trek_block(2, 2, &g), Err(Error::Structure(_))));
    }

    #[test]
    fn spec_validation_and_routing() {
        assert!(TrekSpec::new(0, 0).is_err());
        assert!(TrekSpec::new(3, 2).is_err());
        let cases = [
            ((3, 4), TrekCase::General),
            ((2, 3), TrekCase::General),
            ((1, 3), TrekCase::LeftOne),
            ((0, 4), TrekCase::Path),
            ((2, 2), TrekCase::SmallExplicit),
            ((1, 2), TrekCase::SmallExplicit),
            ((1, 1), TrekCase::SmallExplicit),
            ((0, 2), TrekCase::SmallExplicit),
            ((0, 1), TrekCase::SmallExplicit),
        ];
        for ((a_l, a_r), case) in cases {
            assert_eq!(TrekSpec::new(a_l, a_r).unwrap().case(), case, "({a_l}, {a_r})");
        }
        assert_eq!(TrekSpec::new(1, 3).unwrap().to_string(), "1 <- 2 -> 3 -> 4 -> 5");
    }

    #[test]
    fn five_node_matrix_with_one_left_edge() {
        let m = 7.0;
        let expected = Matrix::from_rows(&[
            [-1.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, m, -m, 0.0],
            [0.0, 0.0, 0.0, 1.0, -1.0],
        ])
        .unwrap();
        assert_eq!(trek_matrix(&TrekSpec::new(1, 3).unwrap(), m), expected);
        let (stable, abscissa) = crate::lyapunov::is_stable(&expected).unwrap();
        assert!(stable && (abscissa + 1.0).abs() < 1e-6);
    }

    #[test]
    fn four_node_small_instance() {
        let expected = Matrix::from_rows(&[
            [-1.0, 1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
            [0.0, 1.0, -1.0, 0.0],
            [0.0, 0.0, 1.0, -1.0],
        ])
        .unwrap();
        let spec = TrekSpec::new(1, 2).unwrap();
        assert_eq!(trek_matrix(&spec, 10.0), expected);
        assert_eq!(trek_matrix(&spec, 1e5), expected);
    }

    #[test]
    fn general_case_pattern() {
        // a_l = 3, a_r = 4: source 4, p = 8
        let spec = TrekSpec::new(3, 4).unwrap();
        let m = 5.0;
        let x = trek_matrix(&spec, m);
        let diag: Vec<f64> = (0..8).map(|i| x[(i, i)]).collect();
        assert_eq!(diag, vec![-1.0, -m, -1.0, -1.0, -1.0, -m, -m, -1.0]);
        assert_eq!(x[(0, 1)], 1.0); // 2 → 1 reaches a sink
        assert_eq!(x[(1, 2)], m); // 3 → 2
        assert_eq!(x[(2, 3)], 1.0); // 4 → 3 leaves the source
        assert_eq!(x[(4, 3)], 1.0); // 4 → 5
        assert_eq!(x[(5, 4)], m); // 5 → 6
        assert_eq!(x[(6, 5)], m); // 6 → 7
        assert_eq!(x[(7, 6)], 1.0); // 7 → 8
        let nonzero = (0..8).flat_map(|i| (0..8).map(move |j| (i, j))).filter(|&(i, j)| x[(i, j)] != 0.0).count();
        assert_eq!(nonzero, 8 + 7);
    }

    #[test]
    fn path_matrix_drops_first_node_of_left_one_case() {
        let m = 3.0;
        let left_one = trek_matrix(&TrekSpec::new(1, 4).unwrap(), m);
        let path = trek_matrix(&TrekSpec::new(0, 4).unwrap(), m);
        let rest = IndexSet::range(2, 6).unwrap();
        assert_eq!(submatrix(&left_one, &rest, &rest).unwrap(), path);
    }

    fn hat_b_general() -> Matrix {
        Matrix::from_rows(&[
            [15.0 / 8.0, 7.0 / 8.0, 0.25, 3.0 / 8.0, 3.0 / 8.0],
            [7.0 / 8.0, 1.5, 0.5, 0.5, 3.0 / 8.0],
            [0.25, 0.5, 1.0, 0.5, 0.25],
            [3.0 / 8.0, 0.5, 0.5, 1.5, 7.0 / 8.0],
            [3.0 / 8.0, 3.0 / 8.0, 0.25, 7.0 / 8.0, 15.0 / 8.0],
        ])
        .unwrap()
    }

    fn hat_u_general(spec: &TrekSpec) -> Matrix {
        let (p, s) = (spec.p(), spec.source());
        Matrix::from_fn(p, 5, |i, j| {
            let node = i + 1;
            let block = if node == 1 {
                0
            } else if node < s {
                1
            } else if node == s {
                2
            } else if node < p {
                3
            } else {
                4
            };
            if block == j {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn general_case_limit_matches_block_display() {
        let spec = TrekSpec::new(3, 4).unwrap();
        let model = build_trek_model(spec).unwrap();
        let u = hat_u_general(&spec);
        let expected = &(&u * &hat_b_general()) * &u.transpose();
        assert!((model.family.sigma_limit() - &expected).max_abs() <= 1e-6);
    }

    #[test]
    fn general_case_first_order_blocks_are_toeplitz() {
        for (a_l, a_r) in [(2, 3), (3, 4), (2, 5), (4, 4)] {
            let spec = TrekSpec::new(a_l, a_r).unwrap();
            let model = build_trek_model(spec).unwrap();
            let s = spec.conditioning_set();
            let g = submatrix(model.family.sigma_first_order(), &s, &s).unwrap();
            let left = IndexSet::range(1, a_l - 1).unwrap();
            let right = IndexSet::range(a_l + 1, a_l + a_r - 1).unwrap();
            assert!((&submatrix(&g, &left, &left).unwrap() - &toeplitz_t(a_l - 1).unwrap()).max_abs() <= 1e-5);
            assert!((&submatrix(&g, &right, &right).unwrap() - &toeplitz_t(a_r - 1).unwrap()).max_abs() <= 1e-5);
            let sss = submatrix(model.family.sigma_limit(), &s, &s).unwrap();
            let u = trek_block_u(a_l - 1, a_r - 1).unwrap();
            assert!(column_space_residual(&u, &sss, DEFAULT_RANK_TOL).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn proposition_values() {
        let general = verify_trek_proposition(TrekSpec::new(3, 4).unwrap()).unwrap();
        assert!((general.computed_limit - 5.0 / 48.0).abs() <= 1e-8, "{general}");
        assert!(general.confirmed());
        let left_one = verify_trek_proposition(TrekSpec::new(1, 3).unwrap()).unwrap();
        assert!((left_one.computed_limit - 0.1).abs() <= 1e-8);
        assert!((left_one.report.condition_i_value - 2.0).abs() <= 1e-6);
        let path = verify_trek_proposition(TrekSpec::new(0, 4).unwrap()).unwrap();
        assert!((path.computed_limit + 1.0 / 24.0).abs() <= 1e-8);
        assert!(path.confirmed());
    }

    #[test]
    fn small_explicit_instances_have_nonzero_limits() {
        for (a_l, a_r) in [(2, 2), (1, 2), (1, 1), (0, 2), (0, 1)] {
            let report = verify_trek_proposition(TrekSpec::new(a_l, a_r).unwrap()).unwrap();
            assert_eq!(report.expected_limit, None);
            assert!(report.confirmed(), "{report}");
        }
    }

    #[test]
    fn snapshot_serializes() {
        let model = build_trek_model(TrekSpec::new(1, 3).unwrap()).unwrap();
        let json = serde_json::to_value(model.snapshot(&[7.0])).unwrap();
        assert_eq!(json["case"], "left-one");
        assert_eq!(json["spec"]["a_r"], 3);
        assert_eq!(json["samples"][0]["matrix"]["rows"][3][2], 7.0);
    }
}
