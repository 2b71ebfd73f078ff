//! The subset-sum determinant functional `f_asy` and numerical checks of the
//! leading-order expansion
//!
//! ```text
//! det(U B Vᵀ + G/m) = m^{−(k−r)} det(B) f_asy(U, V, G) + o(m^{−(k−r)})
//! ```
//!
//! for `U, V` of size `k×r` and `r < k`.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended::{self, DoubleDouble};
use crate::matrix::{det, submatrix, IndexSet, Matrix};

/// Largest `k` accepted by the subset enumeration (`C(20, 10) ≈ 1.8·10⁵` terms).
pub const MAX_K: usize = 20;

/// Acceptance bound on `ratio_error` for `r ≥ 2` at `m_probe = 10⁶`.
pub const LEADING_ORDER_TOL: f64 = 1e-3;
/// Acceptance bound on `ratio_error` for rank-1 instances, where the
/// expansion terminates after two terms.
pub const RANK_ONE_TOL: f64 = 1e-9;
/// Acceptance bound on `ratio_error` with the `o(1/m)` noise added.
pub const NOISE_TOL: f64 = 1e-2;
/// Required shrink factor of the error when `m` doubles.
pub const DECAY_FACTOR: f64 = 0.6;
/// Errors below this (relative to `1 + |coefficient|`) are at the roundoff
/// floor of the double-double evaluation and are not required to decay.
pub const ERROR_FLOOR: f64 = 1e-14;

fn sign_of(sum: usize) -> f64 {
    if sum % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_shapes(u: &Matrix, v: &Matrix, g: &Matrix) -> Result<(usize, usize)> {
    let (k, r) = u.shape();
    if v.shape() != (k, r) {
        return Err(Error::Dimension(format!(
            "U is {k}x{r} but V is {}x{}",
            v.nrows(),
            v.ncols()
        )));
    }
    if g.shape() != (k, k) {
        return Err(Error::Dimension(format!(
            "G must be {k}x{k}, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    if k > MAX_K {
        return Err(Error::Input(format!("k = {k} exceeds the enumeration limit {MAX_K}")));
    }
    Ok((k, r))
}

/// ```text
/// f_asy(U, V, G) = (−1)^{s([k−r])} Σ_{|α| = k−r} (−1)^{s(α)} det([G_{[k],α} | U]) det(V_{[k]∖α, [r]})
/// ```
///
/// Subsets are enumerated lexicographically and summed in double-double, so
/// the result is reproducible bit for bit.
pub fn f_asy(u: &Matrix, v: &Matrix, g: &Matrix) -> Result<f64> {
    let (k, r) = check_shapes(u, v, g)?;
    if r >= k {
        return Err(Error::Dimension(format!("f_asy needs r < k, got r = {r}, k = {k}")));
    }
    let all_rows = IndexSet::full(k);
    let all_cols = IndexSet::full(r);
    let mut total = DoubleDouble::ZERO;
    for alpha in (1..=k).combinations(k - r) {
        let alpha = IndexSet::new(alpha)?;
        let bordered = submatrix(g, &all_rows, &alpha)?.hstack(u)?;
        let left = det(&bordered)?;
        if left == 0.0 {
            continue;
        }
        let right = det(&submatrix(v, &alpha.complement(k), &all_cols)?)?;
        total = total + DoubleDouble::from(alpha.sign() * left * right);
    }
    Ok(sign_of((k - r) * (k - r + 1) / 2) * total.to_f64())
}

/// `f(U, G) = f_asy(U, U, G)`.
pub fn f(u: &Matrix, g: &Matrix) -> Result<f64> {
    f_asy(u, u, g)
}

/// `f_asy` extended to `r = k`: the only subset is `α = ∅` and the sum
/// collapses to `det(U) det(V)`.
pub fn f_asy_extended(u: &Matrix, v: &Matrix, g: &Matrix) -> Result<f64> {
    let (k, r) = check_shapes(u, v, g)?;
    if r == k {
        return Ok(det(u)? * det(v)?);
    }
    f_asy(u, v, g)
}

/// Classical adjugate: `Adj(G)_{ij} = (−1)^{i+j} det(G with row j and column i removed)`.
pub fn adjugate(g: &Matrix) -> Result<Matrix> {
    if !g.is_square() {
        return Err(Error::Dimension(format!(
            "adjugate needs a square matrix, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    let k = g.nrows();
    if k == 1 {
        return Ok(Matrix::identity(1));
    }
    let mut out = Matrix::zeros(k, k);
    for i in 1..=k {
        for j in 1..=k {
            let rows = IndexSet::new(vec![j])?.complement(k);
            let cols = IndexSet::new(vec![i])?.complement(k);
            out[(i - 1, j - 1)] = sign_of(i + j) * det(&submatrix(g, &rows, &cols)?)?;
        }
    }
    Ok(out)
}

fn check_lemma_inputs(u: &Matrix, v: &Matrix, b: &Matrix, g: &Matrix) -> Result<(usize, usize)> {
    let (k, r) = check_shapes(u, v, g)?;
    if b.shape() != (r, r) {
        return Err(Error::Dimension(format!(
            "B must be {r}x{r}, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    Ok((k, r))
}

/// One term of the Cauchy–Binet expansion of `det(U B Vᵀ + G/m)`, indexed by
/// the columns `α ⊆ [k]` taken from `G/m` and `β ⊆ [r]` taken from `U`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionTerm {
    pub alpha: IndexSet,
    pub beta: IndexSet,
    /// Coefficient of `m^{−|α|}`.
    pub value: f64,
}

/// All terms of
///
/// ```text
/// det(U B Vᵀ + G/m) = Σ_{α,β: |α|+|β|=k} m^{−|α|} (−1)^{⌈|α|/2⌉ + s(α)} det([G_{:,α} | U_{:,β}]) det((V Bᵀ)_{[k]∖α, β})
/// ```
///
/// obtained by writing the matrix as `[G/m | U] · [I_k ; B Vᵀ]`.
pub fn cauchy_binet_terms(u: &Matrix, b: &Matrix, v: &Matrix, g: &Matrix) -> Result<Vec<ExpansionTerm>> {
    let (k, r) = check_lemma_inputs(u, v, b, g)?;
    let vbt = v * &b.transpose();
    let all = IndexSet::full(k);
    let mut terms = Vec::new();
    for size in k.saturating_sub(r)..=k {
        for alpha in (1..=k).combinations(size) {
            let alpha = IndexSet::new(alpha)?;
            let complement = alpha.complement(k);
            for beta in (1..=r).combinations(k - size) {
                let beta = IndexSet::new(beta)?;
                let bordered = submatrix(g, &all, &alpha)?.hstack(&submatrix(u, &all, &beta)?)?;
                let lower = submatrix(&vbt, &complement, &beta)?;
                let value = sign_of(size.div_ceil(2)) * alpha.sign() * det(&bordered)? * det(&lower)?;
                terms.push(ExpansionTerm { alpha: alpha.clone(), beta, value });
            }
        }
    }
    Ok(terms)
}

/// `det(U B Vᵀ + G/m)` evaluated by summing every Cauchy–Binet term.
pub fn cauchy_binet_expansion(u: &Matrix, b: &Matrix, v: &Matrix, g: &Matrix, m: f64) -> Result<f64> {
    Ok(cauchy_binet_terms(u, b, v, g)?
        .iter()
        .map(|t| t.value * m.powi(-(t.alpha.len() as i32)))
        .sum())
}

/// Coefficients `c_0, ..., c_k` with `det(U B Vᵀ + G/m) = Σ_j c_j m^{−j}`.
/// `c_j` vanishes for `j < k − r` and `c_{k−r} = det(B) f_asy(U, V, G)`.
pub fn determinant_polynomial(u: &Matrix, b: &Matrix, v: &Matrix, g: &Matrix) -> Result<Vec<f64>> {
    let k = u.nrows();
    let mut coefficients = vec![0.0; k + 1];
    for term in cauchy_binet_terms(u, b, v, g)? {
        coefficients[term.alpha.len()] += term.value;
    }
    Ok(coefficients)
}

/// `det(U B Vᵀ + G/m + D)` in double-double, with the entries of `U B Vᵀ`
/// accumulated exactly enough that integer inputs lose nothing.
fn probe_det(u: &Matrix, b: &Matrix, v: &Matrix, g: &Matrix, m: f64, noise: Option<&Matrix>) -> f64 {
    let (k, r) = u.shape();
    let inv_m = DoubleDouble::ONE / DoubleDouble::from(m);
    // U B, then (U B) Vᵀ entrywise
    let ub: Vec<Vec<DoubleDouble>> = (0..k)
        .map(|i| {
            (0..r)
                .map(|c| {
                    (0..r).fold(DoubleDouble::ZERO, |acc, l| {
                        acc + DoubleDouble::from(u[(i, l)]) * DoubleDouble::from(b[(l, c)])
                    })
                })
                .collect()
        })
        .collect();
    extended::det(k, |i, j| {
        let low_rank = (0..r).fold(DoubleDouble::ZERO, |acc, c| acc + ub[i][c] * DoubleDouble::from(v[(j, c)]));
        let mut entry = low_rank + DoubleDouble::from(g[(i, j)]) * inv_m;
        if let Some(d) = noise {
            entry = entry + DoubleDouble::from(d[(i, j)]);
        }
        entry
    })
    .to_f64()
}

/// Outcome of a finite-`m` check of the leading-order expansion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeadingOrderResult {
    /// `k − r`.
    pub order: usize,
    /// `det(B) · f_asy(U, V, G)`.
    pub coefficient: f64,
    /// `m^{k−r} det(U B Vᵀ + G/m)` at `m = m_probe` (for `r = 1` the exact
    /// next-order term `det(G)/m` is removed first).
    pub empirical_coefficient: f64,
    /// `|empirical − coefficient| / (1 + |coefficient|)`.
    pub ratio_error: f64,
    pub m_probe: f64,
    /// The same ratio error at `2·m_probe`.
    pub ratio_error_at_double: f64,
    /// The error shrank by at least [`DECAY_FACTOR`] when `m` doubled, or both
    /// errors sit at the roundoff floor.
    pub decays: bool,
}

impl LeadingOrderResult {
    /// Pass/fail against the crate's acceptance tolerances.
    pub fn passes(&self, rank: usize) -> bool {
        if rank == 1 {
            self.ratio_error <= RANK_ONE_TOL
        } else {
            self.ratio_error <= LEADING_ORDER_TOL && self.decays
        }
    }
}

fn empirical_coefficient(u: &Matrix, b: &Matrix, v: &Matrix, g: &Matrix, m: f64, noise: Option<&Matrix>) -> Result<f64> {
    let (k, r) = u.shape();
    let mut value = probe_det(u, b, v, g, m, noise);
    if r == 1 {
        value -= det(g)? * m.powi(-(k as i32));
    }
    Ok(value * m.powi((k - r) as i32))
}

fn leading_order_check(
    u: &Matrix,
    v: &Matrix,
    b: &Matrix,
    g: &Matrix,
    m_probe: f64,
    noise: impl Fn(f64) -> Option<Matrix>,
) -> Result<LeadingOrderResult> {
    let (k, r) = check_lemma_inputs(u, v, b, g)?;
    if r >= k {
        return Err(Error::Dimension(format!("the expansion needs r < k, got r = {r}, k = {k}")));
    }
    if !(m_probe >= 10.0) {
        return Err(Error::Input(format!("m_probe must be at least 10, got {m_probe}")));
    }
    let coefficient = det(b)? * f_asy(u, v, g)?;
    let scale = 1.0 + coefficient.abs();
    let empirical = empirical_coefficient(u, b, v, g, m_probe, noise(m_probe).as_ref())?;
    let empirical_double = empirical_coefficient(u, b, v, g, 2.0 * m_probe, noise(2.0 * m_probe).as_ref())?;
    let ratio_error = (empirical - coefficient).abs() / scale;
    let ratio_error_at_double = (empirical_double - coefficient).abs() / scale;
    let decays = ratio_error_at_double <= DECAY_FACTOR * ratio_error || ratio_error.max(ratio_error_at_double) <= ERROR_FLOOR;
    Ok(LeadingOrderResult {
        order: k - r,
        coefficient,
        empirical_coefficient: empirical,
        ratio_error,
        m_probe,
        ratio_error_at_double,
        decays,
    })
}

/// Compares `m^{k−r} det(U B Vᵀ + G/m)` at `m_probe` and `2·m_probe` with the
/// predicted coefficient `det(B) f_asy(U, V, G)`.
pub fn verify_leading_order(u: &Matrix, v: &Matrix, b: &Matrix, g: &Matrix, m_probe: f64) -> Result<LeadingOrderResult> {
    leading_order_check(u, v, b, g, m_probe, |_| None)
}

/// Fixed seed of the noise direction `D₀` used by [`verify_noise_robustness`].
pub const NOISE_SEED: u64 = 0x5eed;

/// Square matrix with entries uniform in `[−1, 1]` from a seeded ChaCha stream.
pub fn noise_matrix(k: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..=1.0))
}

/// [`LeadingOrderResult`] under an `o(1/m)` perturbation, plus the size of the
/// perturbation's effect on the scaled determinant at `m` and `4m`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseRobustness {
    pub result: LeadingOrderResult,
    pub noise_scale: f64,
    /// `m^{k−r} |det(X + D(m)) − det(X)|` at `m = m_probe`.
    pub noise_contribution: f64,
    /// The same quantity at `4·m_probe`.
    pub noise_contribution_at_4m: f64,
}

impl NoiseRobustness {
    /// The noisy coefficient is within [`NOISE_TOL`], or the perturbation's
    /// effect is still above it but shrinks at the predicted `m^{−1/2}` rate
    /// (decay factor between 1.5 and 2.5 from `m` to `4m`).
    pub fn passes(&self) -> bool {
        let factor = self.noise_decay_factor();
        self.result.ratio_error <= NOISE_TOL || (1.5..=2.5).contains(&factor)
    }

    /// `noise_contribution / noise_contribution_at_4m`; `D(m) ∝ m^{−3/2}`
    /// predicts 2 to leading order.
    pub fn noise_decay_factor(&self) -> f64 {
        self.noise_contribution / self.noise_contribution_at_4m
    }
}

/// Leading-order check of `det(U B Vᵀ + G/m + D(m))` with
/// `D(m) = noise_scale · D₀ / m^{3/2}` and `D₀` from [`noise_matrix`].
pub fn verify_noise_robustness(
    u: &Matrix,
    v: &Matrix,
    b: &Matrix,
    g: &Matrix,
    noise_scale: f64,
    m_probe: f64,
) -> Result<NoiseRobustness> {
    let k = u.nrows();
    let d0 = noise_matrix(k, NOISE_SEED);
    let noise_at = |m: f64| (noise_scale != 0.0).then(|| d0.scale(noise_scale * m.powf(-1.5)));
    let result = leading_order_check(u, v, b, g, m_probe, noise_at)?;
    let contribution = |m: f64| -> f64 {
        let Some(d) = noise_at(m) else { return 0.0 };
        let order = result.order as i32;
        (probe_det(u, b, v, g, m, Some(&d)) - probe_det(u, b, v, g, m, None)).abs() * m.powi(order)
    };
    Ok(NoiseRobustness {
        noise_contribution: contribution(m_probe),
        noise_contribution_at_4m: contribution(4.0 * m_probe),
        noise_scale,
        result,
    })
}

/// Integer-entry instance of the expansion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaInstance {
    pub u: Matrix,
    pub v: Matrix,
    pub b: Matrix,
    pub g: Matrix,
}

fn integer_matrix(rng: &mut impl Rng, nrows: usize, ncols: usize, bound: i32) -> Matrix {
    Matrix::from_fn(nrows, ncols, |_, _| rng.gen_range(-bound..=bound) as f64)
}

/// Draws `U, V (k×r)`, `B (r×r)` and `G (k×k)` with entries in `[−3, 3]`,
/// redrawing until `B` is invertible and `U`, `V` have full column rank.
/// Integer data makes both checks exact: the determinants are integers.
pub fn random_lemma_instance(k: usize, r: usize, rng: &mut impl Rng) -> LemmaInstance {
    const BOUND: i32 = 3;
    let full_rank = |x: &Matrix| det(&(&x.transpose() * x)).is_ok_and(|d| d.round().abs() >= 1.0);
    loop {
        let u = integer_matrix(rng, k, r, BOUND);
        let v = integer_matrix(rng, k, r, BOUND);
        let b = integer_matrix(rng, r, r, BOUND);
        let g = integer_matrix(rng, k, k, BOUND);
        if det(&b).is_ok_and(|d| d.round().abs() >= 1.0) && full_rank(&u) && full_rank(&v) {
            return LemmaInstance { u, v, b, g };
        }
    }
}

/// Aggregate of [`run_lemma_trials`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaSummary {
    pub k: usize,
    pub r: usize,
    pub trials: usize,
    pub seed: u64,
    pub m_probe: f64,
    pub passed: usize,
    pub worst_ratio_error: f64,
    pub worst_noise_ratio_error: f64,
    /// 0-based indices of failing trials.
    pub failures: Vec<usize>,
}

impl LemmaSummary {
    pub fn all_passed(&self) -> bool {
        self.passed == self.trials
    }
}

/// Runs `trials` seeded random instances through [`verify_leading_order`] and
/// [`verify_noise_robustness`] (with `noise_scale = 1`).
pub fn run_lemma_trials(k: usize, r: usize, trials: usize, seed: u64, m_probe: f64) -> Result<LemmaSummary> {
    if r == 0 || r >= k {
        return Err(Error::Input(format!("need 1 ≤ r < k, got r = {r}, k = {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = LemmaSummary {
        k,
        r,
        trials,
        seed,
        m_probe,
        passed: 0,
        worst_ratio_error: 0.0,
        worst_noise_ratio_error: 0.0,
        failures: Vec::new(),
    };
    for trial in 0..trials {
        let inst = random_lemma_instance(k, r, &mut rng);
        let lead = verify_leading_order(&inst.u, &inst.v, &inst.b, &inst.g, m_probe)?;
        let noisy = verify_noise_robustness(&inst.u, &inst.v, &inst.b, &inst.g, 1.0, m_probe)?;
        summary.worst_ratio_error = summary.worst_ratio_error.max(lead.ratio_error);
        summary.worst_noise_ratio_error = summary.worst_noise_ratio_error.max(noisy.result.ratio_error);
        if lead.passes(r) && noisy.passes() {
            summary.passed += 1;
        } else {
            summary.failures.push(trial);
        }
    }
    Ok(summary)
}
