//! Command-line front end. [`run`] parses arguments, writes the report to
//! `out`, diagnostics to `err`, and returns the process exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::asymptotics::run_lemma_trials;
use crate::convergence::{check_theorem, PerturbationFamily, Tolerances, Verdict, DEFAULT_M_GRID};
use crate::error::{Error, Result};
use crate::lyapunov::{lyapunov_residual, random_stable, solve_lyapunov, StableMatrix};
use crate::matrix::{det, IndexSet, Matrix};
use crate::trek::{
    toeplitz_det, toeplitz_det_replaced, toeplitz_replaced, toeplitz_t, verify_trek_proposition_with_grid, TrekReport,
    TrekSpec, TREK_GRID,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

/// Leading-order probe used by the `lemma` command.
pub const LEMMA_M_PROBE: f64 = 1e6;
/// Largest `k` accepted by the `lemma` command.
pub const LEMMA_MAX_K: usize = 8;
/// Relative agreement required between closed-form and elimination
/// determinants in the `toeplitz` command.
pub const TOEPLITZ_REL_TOL: f64 = 1e-8;

const EXIT_CODES: &str = "\
Exit codes:
  0  success; the theorem's conditions hold or the construction is confirmed
  1  usage, parse or dimension error
  2  negative verdict: conditions violated, unstable matrix or failed check
  3  inconclusive: condition (i) is within a factor 10 of its tolerance";

#[derive(Debug, Parser)]
#[command(name = "condcov", version, about = "Limits of Gaussian conditional covariances along singular sequences", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Emit one JSON document instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Comma-separated m values for the empirical table.
    #[arg(long, global = true, value_name = "LIST")]
    pub m_grid: Option<String>,
    /// Relative rank / pseudoinverse cutoff.
    #[arg(long, global = true, value_name = "TOL")]
    pub tol_rank: Option<f64>,
    /// Relative threshold for condition (i).
    #[arg(long, global = true, value_name = "TOL")]
    pub tol_f: Option<f64>,
    /// Relative symmetry tolerance for input matrices.
    #[arg(long, global = true, value_name = "TOL")]
    pub tol_sym: Option<f64>,
    /// Seed for random instances.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the convergence conditions for Σ^(m) = Σ + Σ1/m.
    Check {
        /// Limit Σ (JSON or CSV).
        #[arg(long)]
        sigma: PathBuf,
        /// First-order coefficient Σ1 (JSON or CSV).
        #[arg(long)]
        sigma1: PathBuf,
        /// Conditioning set S, 1-based, comma-separated.
        #[arg(long)]
        cond: IndexSet,
        /// Target set R, 1-based, comma-separated.
        #[arg(long)]
        target: IndexSet,
    },
    /// Build the trek construction and check its limit.
    Trek {
        /// Number of edges on the left branch.
        #[arg(long)]
        left: usize,
        /// Number of edges on the right branch.
        #[arg(long)]
        right: usize,
    },
    /// Random trials of the leading-order determinant expansion.
    Lemma {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Solve M Σ + Σ Mᵀ + 2I = 0.
    Lyapunov {
        /// Stable matrix M (JSON or CSV).
        #[arg(long, conflicts_with = "random", required_unless_present = "random")]
        matrix: Option<PathBuf>,
        /// Use a seeded random stable matrix of this size instead.
        #[arg(long, value_name = "P")]
        random: Option<usize>,
    },
    /// Determinants of T_n = (−|i−j|) and of T_n with a column replaced by ones.
    Toeplitz {
        #[arg(long)]
        n: usize,
        /// 1-based column to replace by the all-ones vector.
        #[arg(long, value_name = "I")]
        replace: Option<usize>,
    },
}

impl GlobalArgs {
    fn tolerances(&self) -> Tolerances {
        let mut tol = Tolerances::default();
        if let Some(x) = self.tol_rank {
            tol.rank_tol = x;
        }
        if let Some(x) = self.tol_f {
            tol.f_rel_tol = x;
        }
        if let Some(x) = self.tol_sym {
            tol.symmetry_tol = x;
        }
        tol
    }

    fn grid(&self, default: &[f64]) -> Result<Vec<f64>> {
        match &self.m_grid {
            None => Ok(default.to_vec()),
            Some(text) => parse_grid(text),
        }
    }
}

/// Parses `"1e3,1e4,1e5"`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("invalid m value {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::Input("m values must be positive and finite".into()));
    }
    Ok(values)
}

fn exit_for(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::ConvergesByTheorem => EXIT_OK,
        Verdict::ConditionsViolated => EXIT_NEGATIVE,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// A finished command: its report in both renderings and the exit code.
struct Outcome {
    json: serde_json::Value,
    text: String,
    code: i32,
}

impl Outcome {
    fn new(report: &impl Serialize, text: String, code: i32) -> Result<Self> {
        let json = serde_json::to_value(report).map_err(|e| Error::Input(format!("serialization failed: {e}")))?;
        Ok(Outcome { json, text, code })
    }
}

#[derive(Serialize)]
struct TrekOutput<'a> {
    #[serde(flatten)]
    report: &'a TrekReport,
    matches_expected: Option<bool>,
    nonzero: bool,
    confirmed: bool,
}

#[derive(Serialize)]
struct LyapunovOutput {
    stable: bool,
    spectral_abscissa: f64,
    sigma: Option<Matrix>,
    residual: Option<f64>,
}

#[derive(Serialize)]
struct ToeplitzOutput {
    n: usize,
    replace: Option<usize>,
    closed_form: f64,
    elimination: f64,
    matches: bool,
}

fn read_matrix(path: &Path) -> Result<Matrix> {
    Matrix::read(path).map_err(|e| match e {
        Error::Io(io) => Error::Input(format!("{}: {io}", path.display())),
        other => other,
    })
}

fn cmd_check(global: &GlobalArgs, sigma: &Path, sigma1: &Path, cond: &IndexSet, target: &IndexSet) -> Result<Outcome> {
    let tol = global.tolerances();
    let family = PerturbationFamily::user_sequence_with_tol(read_matrix(sigma)?, read_matrix(sigma1)?, tol.symmetry_tol)?;
    let report = check_theorem(&family, cond, target, &global.grid(&DEFAULT_M_GRID)?, &tol)?;
    Outcome::new(&report, report.to_string(), exit_for(report.verdict))
}

fn cmd_trek(global: &GlobalArgs, left: usize, right: usize) -> Result<Outcome> {
    let spec = TrekSpec::new(left, right)?;
    let report = verify_trek_proposition_with_grid(spec, &global.grid(&TREK_GRID)?, &global.tolerances())?;
    let confirmed = report.confirmed();
    let output =
        TrekOutput { report: &report, matches_expected: report.matches_expected(), nonzero: report.nonzero(), confirmed };
    let mut text = report.to_string();
    text.push_str(&format!("nonzero limit confirmed: {confirmed}\n"));
    Outcome::new(&output, text, if confirmed { EXIT_OK } else { EXIT_NEGATIVE })
}

fn cmd_lemma(global: &GlobalArgs, k: usize, r: usize, trials: usize) -> Result<Outcome> {
    if r == 0 || r >= k || k > LEMMA_MAX_K {
        return Err(Error::Input(format!("need 1 ≤ r < k ≤ {LEMMA_MAX_K}, got k = {k}, r = {r}")));
    }
    let summary = run_lemma_trials(k, r, trials, global.seed, LEMMA_M_PROBE)?;
    let text = format!(
        "k = {}, r = {}, seed = {}, m_probe = {}\npassed {}/{}\nworst ratio_error: {}\nworst noisy ratio_error: {}\nfailing trials: {:?}\n",
        summary.k,
        summary.r,
        summary.seed,
        summary.m_probe,
        summary.passed,
        summary.trials,
        summary.worst_ratio_error,
        summary.worst_noise_ratio_error,
        summary.failures
    );
    Outcome::new(&summary, text, if summary.all_passed() { EXIT_OK } else { EXIT_NEGATIVE })
}

fn cmd_lyapunov(global: &GlobalArgs, matrix: Option<&Path>, random: Option<usize>) -> Result<Outcome> {
    let stable = match (matrix, random) {
        (Some(path), _) => StableMatrix::new(read_matrix(path)?),
        (None, Some(p)) => random_stable(p, global.seed),
        (None, None) => return Err(Error::Input("either --matrix or --random is required".into())),
    };
    let stable = match stable {
        Ok(s) => s,
        Err(Error::Unstable { abscissa }) => {
            let output = LyapunovOutput { stable: false, spectral_abscissa: abscissa, sigma: None, residual: None };
            let text = format!("matrix is not stable\nspectral abscissa: {abscissa}\n");
            return Outcome::new(&output, text, EXIT_NEGATIVE);
        }
        Err(e) => return Err(e),
    };
    let sigma = solve_lyapunov(&stable)?;
    let residual = lyapunov_residual(stable.matrix(), &sigma)?;
    let text = format!(
        "spectral abscissa: {}\nSigma:\n{}residual: {}\n",
        stable.spectral_abscissa(),
        sigma,
        residual
    );
    let output =
        LyapunovOutput { stable: true, spectral_abscissa: stable.spectral_abscissa(), sigma: Some(sigma), residual: Some(residual) };
    Outcome::new(&output, text, EXIT_OK)
}

fn cmd_toeplitz(n: usize, replace: Option<usize>) -> Result<Outcome> {
    let (closed_form, elimination) = match replace {
        None => (toeplitz_det(n)?, det(&toeplitz_t(n)?)?),
        Some(i) => (toeplitz_det_replaced(n, i)?, det(&toeplitz_replaced(n, i)?)?),
    };
    let matches = (closed_form - elimination).abs() <= TOEPLITZ_REL_TOL * closed_form.abs().max(1.0);
    let label = match replace {
        None => format!("det T_{n}"),
        Some(i) => format!("det T_{n}[{i}]"),
    };
    let mut text = format!("{label}\nclosed form: {closed_form}\nelimination: {elimination}\n");
    if !matches {
        text.push_str("MISMATCH between closed form and elimination\n");
    }
    let output = ToeplitzOutput { n, replace, closed_form, elimination, matches };
    Outcome::new(&output, text, if matches { EXIT_OK } else { EXIT_NEGATIVE })
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Check { sigma, sigma1, cond, target } => cmd_check(g, sigma, sigma1, cond, target),
        Command::Trek { left, right } => cmd_trek(g, *left, *right),
        Command::Lemma { k, r, trials } => cmd_lemma(g, *k, *r, *trials),
        Command::Lyapunov { matrix, random } => cmd_lyapunov(g, matrix.as_deref(), *random),
        Command::Toeplitz { n, replace } => cmd_toeplitz(*n, *replace),
    }
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            let written = if cli.global.json {
                serde_json::to_string_pretty(&outcome.json).map(|s| writeln!(out, "{s}")).unwrap_or(Ok(()))
            } else {
                out.write_all(outcome.text.as_bytes())
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: {e}");
                return EXIT_USAGE;
            }
            if outcome.code == EXIT_NEGATIVE {
                if let Some(a) = outcome.json.get("spectral_abscissa").filter(|_| outcome.json["stable"] == false) {
                    let _ = writeln!(err, "error: matrix is not stable (spectral abscissa {a})");
                }
            }
            outcome.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
