//! Large-`nu` asymptotics of the transition time between branches: the limit
//! parameters (occupancy shares `gamma`, visit ratios `beta`, initial-branch
//! weight `alpha`), the scenario taxonomy of the scaled limit law
//! `Z = alpha Y + (1 - alpha) W`, evaluable transform/CDF/PDF of `Z`, and the
//! escape-time constants for components with internal conflicts.
//!
//! All limit decisions are taken in exact arithmetic: rational exponents and
//! exact rational coefficient algebra, so ties (where the interesting
//! scenarios live) are decided, not guessed.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bd::AsymptoticPower;
use crate::laplace::{talbot_invert, TALBOT_NODES};
use crate::model::{enumerate_full_space, ModelError, NetworkSpec};
use crate::simulate::ks_statistic;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("source and target must lie in different components")]
    SameBranch,
    #[error("level {level} outside 1..={levels} of component {component}")]
    LevelOutOfRange {
        component: usize,
        level: usize,
        levels: usize,
    },
    #[error("law evaluation requires x >= 0, got {0}")]
    NegativeX(f64),
    #[error("numerical inversion unstable near x={x}")]
    InversionUnstable { x: f64 },
    #[error("operation needs {0}")]
    WrongScenario(String),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
}

/// Scenario labels of the limit-law taxonomy. Starred labels are structural
/// refinements of their base row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    S1a,
    S1b,
    S1bStar,
    S1c,
    S1d,
    S2a,
    S2b,
    S2bStar,
    S2bStar2,
    S2bStar3,
    S2c,
    S2cStar,
    S2d,
    S3,
}

impl Scenario {
    pub fn label(&self) -> &'static str {
        match self {
            Scenario::S1a => "1a",
            Scenario::S1b => "1b",
            Scenario::S1bStar => "1b*",
            Scenario::S1c => "1c",
            Scenario::S1d => "1d",
            Scenario::S2a => "2a",
            Scenario::S2b => "2b",
            Scenario::S2bStar => "2b*",
            Scenario::S2bStar2 => "2b**",
            Scenario::S2bStar3 => "2b***",
            Scenario::S2c => "2c",
            Scenario::S2cStar => "2c*",
            Scenario::S2d => "2d",
            Scenario::S3 => "3",
        }
    }

    /// Base row of a starred refinement; identity for plain labels.
    pub fn family(&self) -> Scenario {
        match self {
            Scenario::S1bStar => Scenario::S1b,
            Scenario::S2bStar | Scenario::S2bStar2 | Scenario::S2bStar3 => Scenario::S2b,
            Scenario::S2cStar => Scenario::S2c,
            other => *other,
        }
    }

    /// Whether the law reduces to a unit-mean exponential.
    pub fn is_unit_exponential(&self) -> bool {
        matches!(self, Scenario::S2bStar3 | Scenario::S3)
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Visit-ratio limit of a dominant branch.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaValue {
    Zero,
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, PartialEq)]
enum BetaExact {
    Zero,
    Finite(BigRational),
    Infinite,
}

/// Limit parameters of the transition `(k1,l1) -> (k2,l2)`.
#[derive(Debug, Clone)]
pub struct BranchClassification {
    pub k1: usize,
    pub l1: usize,
    pub k2: usize,
    pub l2: usize,
    /// Index set of dominant branches (positive occupancy share).
    pub dominant: Vec<usize>,
    pub non_attracting: Vec<usize>,
    pub attracting: Vec<usize>,
    pub strongly_attracting: Vec<usize>,
    pub scenario: Scenario,
    gamma_exact: Vec<BigRational>,
    beta_exact: Vec<Option<BetaExact>>,
    alpha_exact: BigRational,
}

impl BranchClassification {
    /// Occupancy share of branch `k` (zero off the dominant set).
    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma_exact[k].to_f64().unwrap()
    }

    pub fn gamma_all(&self) -> Vec<f64> {
        self.gamma_exact.iter().map(|g| g.to_f64().unwrap()).collect()
    }

    /// Visit ratio of a dominant branch, `None` off the dominant set.
    pub fn beta(&self, k: usize) -> Option<BetaValue> {
        self.beta_exact[k].as_ref().map(|b| match b {
            BetaExact::Zero => BetaValue::Zero,
            BetaExact::Finite(v) => BetaValue::Finite(v.to_f64().unwrap()),
            BetaExact::Infinite => BetaValue::Infinite,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_exact.to_f64().unwrap()
    }

    pub fn gamma_n(&self) -> f64 {
        self.non_attracting.iter().map(|&k| self.gamma(k)).sum()
    }

    pub fn gamma_a(&self) -> f64 {
        self.attracting.iter().map(|&k| self.gamma(k)).sum()
    }

    pub fn gamma_s(&self) -> f64 {
        self.strongly_attracting.iter().map(|&k| self.gamma(k)).sum()
    }

    /// Total visit ratio of the attracting set.
    pub fn beta_a(&self) -> f64 {
        self.attracting
            .iter()
            .map(|&k| match self.beta(k) {
                Some(BetaValue::Finite(v)) => v,
                _ => 0.0,
            })
            .sum()
    }

    /// `(gamma_k, beta_k)` pairs over the attracting set.
    pub fn attracting_pairs(&self) -> Vec<(f64, f64)> {
        self.attracting
            .iter()
            .map(|&k| {
                let beta = match self.beta(k) {
                    Some(BetaValue::Finite(v)) => v,
                    _ => unreachable!("attracting branches have finite beta"),
                };
                (self.gamma(k), beta)
            })
            .collect()
    }

    /// Exact normalization check: the occupancy shares of the dominant set
    /// sum to one in rational arithmetic.
    pub fn gamma_is_normalized(&self) -> bool {
        let total: BigRational = self.gamma_exact.iter().cloned().sum();
        total.is_one()
    }
}

fn big_from(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite f64")
}

fn big_pow(base: &BigRational, e: usize) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= base;
    }
    acc
}

/// Classify the transition `(k1,l1) -> (k2,l2)` of a partite network.
pub fn classify(
    spec: &NetworkSpec,
    k1: usize,
    l1: usize,
    k2: usize,
    l2: usize,
) -> Result<BranchClassification, AsymptoticsError> {
    if !spec.is_partite() {
        return Err(ModelError::AggregationInvalid.into());
    }
    if k1 == k2 {
        return Err(AsymptoticsError::SameBranch);
    }
    for (k, l) in [(k1, l1), (k2, l2)] {
        if k >= spec.k() {
            return Err(AsymptoticsError::LevelOutOfRange {
                component: k,
                level: l,
                levels: 0,
            });
        }
        if l == 0 || l > spec.size(k) {
            return Err(AsymptoticsError::LevelOutOfRange {
                component: k,
                level: l,
                levels: spec.size(k),
            });
        }
    }

    let kk = spec.k();
    let exp = |k: usize| spec.rate(k).exponent();
    let coeff = |k: usize| big_from(spec.rate(k).coefficient());
    let size = |k: usize| spec.size(k);

    // occupancy shares: branch weight f_k^{L_k} has exponent a_k L_k; the
    // maximal exponent wins, ties share mass by the coefficient c_k^{L_k}
    let e_k = |k: usize| exp(k) * Rational64::new(size(k) as i64, 1);
    let e_star = (0..kk)
        .filter(|&k| k != k2)
        .map(e_k)
        .max()
        .expect("at least one non-target branch");
    let dominant: Vec<usize> = (0..kk)
        .filter(|&k| k != k2 && e_k(k) == e_star)
        .collect();
    let dominant_weight: Vec<BigRational> = dominant
        .iter()
        .map(|&k| big_pow(&coeff(k), size(k)))
        .collect();
    let weight_total: BigRational = dominant_weight.iter().cloned().sum();
    let mut gamma_exact = vec![BigRational::zero(); kk];
    for (i, &k) in dominant.iter().enumerate() {
        gamma_exact[k] = &dominant_weight[i] / &weight_total;
    }

    // visit ratios over the dominant set: L_k f_k / (L_{k2} f_{k2})
    let mut beta_exact: Vec<Option<BetaExact>> = vec![None; kk];
    for &k in &dominant {
        let b = match exp(k).cmp(&exp(k2)) {
            std::cmp::Ordering::Less => BetaExact::Zero,
            std::cmp::Ordering::Greater => BetaExact::Infinite,
            std::cmp::Ordering::Equal => BetaExact::Finite(
                coeff(k) * BigRational::from_integer(BigInt::from(size(k)))
                    / (coeff(k2) * BigRational::from_integer(BigInt::from(size(k2)))),
            ),
        };
        beta_exact[k] = Some(b);
    }
    let mut non_attracting = Vec::new();
    let mut attracting = Vec::new();
    let mut strongly_attracting = Vec::new();
    for &k in &dominant {
        match beta_exact[k].as_ref().unwrap() {
            BetaExact::Zero => non_attracting.push(k),
            BetaExact::Finite(_) => attracting.push(k),
            BetaExact::Infinite => strongly_attracting.push(k),
        }
    }

    // initial-branch weight: compare the escape term of branch k1 with the
    // dominant-visit term, exponent first, coefficients on a tie
    let e_a = exp(k1) * Rational64::new(size(k1) as i64 - 1, 1);
    let e_b = e_star - exp(k2);
    let alpha_exact = match e_a.cmp(&e_b) {
        std::cmp::Ordering::Greater => BigRational::one(),
        std::cmp::Ordering::Less => BigRational::zero(),
        std::cmp::Ordering::Equal => {
            let c_a = big_pow(&coeff(k1), size(k1) - 1)
                / BigRational::from_integer(BigInt::from(size(k1)));
            let c_b: BigRational = weight_total.clone()
                / (coeff(k2) * BigRational::from_integer(BigInt::from(size(k2))));
            &c_a / (&c_a + &c_b)
        }
    };

    let scenario = decide_scenario(
        &alpha_exact,
        &attracting,
        &strongly_attracting,
        &gamma_exact,
        &beta_exact,
    );

    Ok(BranchClassification {
        k1,
        l1,
        k2,
        l2,
        dominant,
        non_attracting,
        attracting,
        strongly_attracting,
        scenario,
        gamma_exact,
        beta_exact,
        alpha_exact,
    })
}

fn decide_scenario(
    alpha: &BigRational,
    attracting: &[usize],
    strongly: &[usize],
    gamma: &[BigRational],
    beta: &[Option<BetaExact>],
) -> Scenario {
    let a_empty = attracting.is_empty();
    let s_empty = strongly.is_empty();
    if alpha.is_one() {
        return Scenario::S3;
    }

    // attracting-set diagnostics: the per-branch rates beta_k/gamma_k and
    // the total visit ratio
    let lambdas: Vec<BigRational> = attracting
        .iter()
        .map(|&k| match beta[k].as_ref().unwrap() {
            BetaExact::Finite(b) => b / &gamma[k],
            _ => unreachable!(),
        })
        .collect();
    let all_equal = lambdas.windows(2).all(|w| w[0] == w[1]);
    let beta_a: BigRational = attracting
        .iter()
        .map(|&k| match beta[k].as_ref().unwrap() {
            BetaExact::Finite(b) => b.clone(),
            _ => unreachable!(),
        })
        .sum();

    if alpha.is_zero() {
        return match (a_empty, s_empty) {
            (true, true) => Scenario::S1a,
            (false, true) => {
                if all_equal {
                    Scenario::S1bStar
                } else {
                    Scenario::S1b
                }
            }
            (true, false) => Scenario::S1c,
            (false, false) => Scenario::S1d,
        };
    }

    match (a_empty, s_empty) {
        (true, true) => Scenario::S2a,
        (false, true) => {
            if all_equal {
                let lambda = lambdas[0].clone();
                let ratio = (BigRational::one() - alpha) / alpha;
                if lambda == ratio {
                    if beta_a == lambda {
                        Scenario::S2bStar3
                    } else {
                        Scenario::S2bStar2
                    }
                } else {
                    Scenario::S2bStar
                }
            } else {
                Scenario::S2b
            }
        }
        (true, false) => {
            let gamma_s: BigRational = strongly.iter().map(|&k| gamma[k].clone()).sum();
            if *alpha == &gamma_s / (BigRational::one() + &gamma_s) {
                Scenario::S2cStar
            } else {
                Scenario::S2c
            }
        }
        (false, false) => Scenario::S2d,
    }
}

/// Leading power of the mean transition time: the initial-branch escape term
/// plus the dominant-visit term, summed when their exponents tie.
pub fn asym_mean_transition(
    classification: &BranchClassification,
    spec: &NetworkSpec,
) -> AsymptoticPower {
    let k1 = classification.k1;
    let k2 = classification.k2;
    let e_a = spec.rate(k1).exponent() * Rational64::new(spec.size(k1) as i64 - 1, 1);
    let c_a = spec.rate(k1).coefficient().powi(spec.size(k1) as i32 - 1) / spec.size(k1) as f64;
    let e_star = spec.rate(classification.dominant[0]).exponent()
        * Rational64::new(spec.size(classification.dominant[0]) as i64, 1);
    let e_b = e_star - spec.rate(k2).exponent();
    let c_b = classification
        .dominant
        .iter()
        .map(|&k| spec.rate(k).coefficient().powi(spec.size(k) as i32))
        .sum::<f64>()
        / (spec.size(k2) as f64 * spec.rate(k2).coefficient());
    match e_a.cmp(&e_b) {
        std::cmp::Ordering::Greater => AsymptoticPower {
            coefficient: c_a,
            exponent: e_a,
        },
        std::cmp::Ordering::Less => AsymptoticPower {
            coefficient: c_b,
            exponent: e_b,
        },
        std::cmp::Ordering::Equal => AsymptoticPower {
            coefficient: c_a + c_b,
            exponent: e_a,
        },
    }
}

/// The limiting law `Z = alpha Y + (1 - alpha) W` of the scaled transition
/// time, with evaluable transform, CDF and PDF.
#[derive(Debug, Clone)]
pub struct LimitLaw {
    alpha: f64,
    /// `(gamma_k, beta_k)` over the attracting set.
    attracting: Vec<(f64, f64)>,
    gamma_n: f64,
    gamma_s: f64,
    scenario: Scenario,
}

/// Build the limit law from a classification.
pub fn limit_law(classification: &BranchClassification) -> LimitLaw {
    LimitLaw {
        alpha: classification.alpha(),
        attracting: classification.attracting_pairs(),
        gamma_n: classification.gamma_n(),
        gamma_s: classification.gamma_s(),
        scenario: classification.scenario,
    }
}

impl LimitLaw {
    /// Law of `W` alone (the `alpha = 0` projection), used by the marked
    /// process check.
    pub fn w_law(&self) -> Result<LimitLaw, AsymptoticsError> {
        if self.attracting.is_empty() || self.gamma_s == 0.0 {
            return Err(AsymptoticsError::WrongScenario(
                "both attracting and strongly attracting branches".into(),
            ));
        }
        Ok(LimitLaw {
            alpha: 0.0,
            attracting: self.attracting.clone(),
            gamma_n: self.gamma_n,
            gamma_s: self.gamma_s,
            scenario: Scenario::S1d,
        })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma_s(&self) -> f64 {
        self.gamma_s
    }

    pub fn beta_a(&self) -> f64 {
        self.attracting.iter().map(|&(_, b)| b).sum()
    }

    /// `E Z = alpha + (1 - alpha)(1 - gamma_N)`.
    pub fn mean(&self) -> f64 {
        self.alpha + (1.0 - self.alpha) * (1.0 - self.gamma_n)
    }

    /// Point mass of `Z` at zero, `lim_{s->inf} L_Z(s)`.
    pub fn atom_at_zero(&self) -> f64 {
        if self.alpha > 0.0 || self.gamma_s > 0.0 {
            0.0
        } else {
            1.0 / (1.0 + self.beta_a())
        }
    }

    fn laplace_w_c(&self, s: Complex64) -> Complex64 {
        let mut denom = Complex64::new(1.0, 0.0) + s * self.gamma_s;
        for &(g, b) in &self.attracting {
            denom += s * g / (Complex64::new(1.0, 0.0) + s * (g / b));
        }
        denom.inv()
    }

    /// Transform of `Z` at complex `s`.
    pub fn laplace_c(&self, s: Complex64) -> Complex64 {
        self.laplace_w_c(s * (1.0 - self.alpha)) / (Complex64::new(1.0, 0.0) + s * self.alpha)
    }

    /// Transform of `Z` at real `s >= 0`.
    pub fn laplace(&self, s: f64) -> f64 {
        self.laplace_c(Complex64::new(s, 0.0)).re
    }

    /// CDF of `Z` at `x >= 0`; `cdf(0)` equals the atom.
    pub fn cdf(&self, x: f64) -> Result<f64, AsymptoticsError> {
        if x < 0.0 {
            return Err(AsymptoticsError::NegativeX(x));
        }
        let atom = self.atom_at_zero();
        if x == 0.0 {
            return Ok(atom);
        }
        let a = self.alpha;
        let value = match self.scenario {
            Scenario::S1a => 1.0,
            Scenario::S1bStar => {
                // geometric sum of equal-rate exponentials: atom q at zero
                // plus an exponential of rate q * lambda
                let q = atom;
                let lambda = self.common_attracting_rate();
                q + (1.0 - q) * exp_cdf(q * lambda, x)
            }
            Scenario::S1c => exp_cdf(1.0 / self.gamma_s, x),
            Scenario::S2a => exp_cdf(1.0 / a, x),
            Scenario::S2bStar => {
                // Exp(1/alpha) plus the scaled geometric sum: with probability
                // q only the first piece, otherwise a two-stage convolution
                let q = 1.0 / (1.0 + self.beta_a());
                let lambda = self.common_attracting_rate();
                let r2 = q * lambda / (1.0 - a);
                q * exp_cdf(1.0 / a, x) + (1.0 - q) * conv2_cdf(1.0 / a, r2, x)
            }
            Scenario::S2bStar2 => exp_cdf(1.0 / (a * (1.0 + self.beta_a())), x),
            Scenario::S2bStar3 | Scenario::S3 => exp_cdf(1.0, x),
            Scenario::S2c => conv2_cdf(1.0 / a, 1.0 / ((1.0 - a) * self.gamma_s), x),
            Scenario::S2cStar => erlang2_cdf(1.0 / a, x),
            Scenario::S1b | Scenario::S1d | Scenario::S2b | Scenario::S2d => {
                return self.cdf_by_inversion(x)
            }
        };
        Ok(value.clamp(0.0, 1.0))
    }

    /// Density of the absolutely continuous part at `x >= 0`.
    pub fn pdf(&self, x: f64) -> Result<f64, AsymptoticsError> {
        if x < 0.0 {
            return Err(AsymptoticsError::NegativeX(x));
        }
        let atom = self.atom_at_zero();
        let a = self.alpha;
        let value = match self.scenario {
            Scenario::S1a => 0.0,
            Scenario::S1bStar => {
                let q = atom;
                let lambda = self.common_attracting_rate();
                (1.0 - q) * exp_pdf(q * lambda, x)
            }
            Scenario::S1c => exp_pdf(1.0 / self.gamma_s, x),
            Scenario::S2a => exp_pdf(1.0 / a, x),
            Scenario::S2bStar => {
                let q = 1.0 / (1.0 + self.beta_a());
                let lambda = self.common_attracting_rate();
                let r2 = q * lambda / (1.0 - a);
                q * exp_pdf(1.0 / a, x) + (1.0 - q) * conv2_pdf(1.0 / a, r2, x)
            }
            Scenario::S2bStar2 => exp_pdf(1.0 / (a * (1.0 + self.beta_a())), x),
            Scenario::S2bStar3 | Scenario::S3 => exp_pdf(1.0, x),
            Scenario::S2c => conv2_pdf(1.0 / a, 1.0 / ((1.0 - a) * self.gamma_s), x),
            Scenario::S2cStar => erlang2_pdf(1.0 / a, x),
            Scenario::S1b | Scenario::S1d | Scenario::S2b | Scenario::S2d => {
                if x == 0.0 {
                    // one-sided limit; evaluate just inside the support
                    return self.pdf_by_inversion(1e-9);
                }
                return self.pdf_by_inversion(x);
            }
        };
        Ok(value.max(0.0))
    }

    fn common_attracting_rate(&self) -> f64 {
        // only called for starred rows where all beta_k/gamma_k agree
        let (g, b) = self.attracting[0];
        b / g
    }

    /// CDF through numerical inversion of the transform, regardless of the
    /// scenario's closed form. Second route for consistency checks.
    pub fn cdf_by_inversion(&self, x: f64) -> Result<f64, AsymptoticsError> {
        if x < 0.0 {
            return Err(AsymptoticsError::NegativeX(x));
        }
        let atom = self.atom_at_zero();
        if x == 0.0 {
            return Ok(atom);
        }
        let value = atom + talbot_invert(|s| (self.laplace_c(s) - atom) / s, x, TALBOT_NODES);
        if !(-1e-6..=1.0 + 1e-6).contains(&value) {
            return Err(AsymptoticsError::InversionUnstable { x });
        }
        Ok(value.clamp(0.0, 1.0))
    }

    /// Density of the continuous part through numerical inversion.
    pub fn pdf_by_inversion(&self, x: f64) -> Result<f64, AsymptoticsError> {
        if x <= 0.0 {
            return Err(AsymptoticsError::NegativeX(x));
        }
        let atom = self.atom_at_zero();
        let value = talbot_invert(|s| self.laplace_c(s) - atom, x, TALBOT_NODES);
        if value < -1e-6 {
            return Err(AsymptoticsError::InversionUnstable { x });
        }
        Ok(value.max(0.0))
    }
}

fn exp_cdf(rate: f64, x: f64) -> f64 {
    1.0 - (-rate * x).exp()
}

fn exp_pdf(rate: f64, x: f64) -> f64 {
    rate * (-rate * x).exp()
}

fn erlang2_cdf(rate: f64, x: f64) -> f64 {
    1.0 - (-rate * x).exp() * (1.0 + rate * x)
}

fn erlang2_pdf(rate: f64, x: f64) -> f64 {
    rate * rate * x * (-rate * x).exp()
}

/// CDF of the sum of two independent exponentials with rates `r1`, `r2`.
fn conv2_cdf(r1: f64, r2: f64, x: f64) -> f64 {
    if (r1 - r2).abs() <= 1e-9 * r1.max(r2) {
        return erlang2_cdf(0.5 * (r1 + r2), x);
    }
    1.0 - (r2 * (-r1 * x).exp() - r1 * (-r2 * x).exp()) / (r2 - r1)
}

fn conv2_pdf(r1: f64, r2: f64, x: f64) -> f64 {
    if (r1 - r2).abs() <= 1e-9 * r1.max(r2) {
        return erlang2_pdf(0.5 * (r1 + r2), x);
    }
    r1 * r2 * ((-r1 * x).exp() - (-r2 * x).exp()) / (r2 - r1)
}

/// Draw from the marked-process representation of `W`: an exponential window
/// of mean `gamma_S` plus hyperexponential marks arriving at rate
/// `beta_A / gamma_S` inside it. Needs both attracting and strongly
/// attracting branches.
pub fn marked_poisson_samples(
    law: &LimitLaw,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>, AsymptoticsError> {
    let w = law.w_law()?;
    let gamma_s = w.gamma_s;
    let beta_a = w.beta_a();
    let lambda = beta_a / gamma_s;
    let probs: Vec<f64> = w.attracting.iter().map(|&(_, b)| b / beta_a).collect();
    let rates: Vec<f64> = w.attracting.iter().map(|&(g, b)| b / g).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(samples);
    for _ in 0..samples {
        let window: f64 = -(1.0 - rng.gen::<f64>()).ln() * gamma_s;
        let count = sample_poisson(&mut rng, lambda * window);
        let mut total = window;
        for _ in 0..count {
            let u: f64 = rng.gen();
            let mut pick = probs.len() - 1;
            let mut acc = 0.0;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            total += -(1.0 - rng.gen::<f64>()).ln() / rates[pick];
        }
        draws.push(total);
    }
    Ok(draws)
}

/// Check the marked-process identity for `W` by simulation: KS distance
/// between the composite sample and the evaluated CDF of the `alpha = 0` law.
pub fn marked_poisson_check(
    law: &LimitLaw,
    samples: usize,
    seed: u64,
) -> Result<f64, AsymptoticsError> {
    let w = law.w_law()?;
    let mut draws = marked_poisson_samples(law, samples, seed)?;
    let cdf = |x: f64| w.cdf(x).unwrap_or(1.0);
    Ok(ks_statistic(&mut draws, cdf))
}

fn sample_poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    use rand_distr::{Distribution, Poisson};
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0)
}

/// Escape-time constants of a single component with internal conflicts.
#[derive(Debug, Clone)]
pub struct ExtensionConstants {
    /// Leading power of the largest stationary weight over feasible states.
    pub peak_weight: AsymptoticPower,
    /// Limit of (partition sum) / (peak weight).
    pub psi: f64,
    /// Smallest per-user rate exponent.
    pub eta: Rational64,
    /// Leading power of the aggregate activation rate.
    pub aggregate_rate: AsymptoticPower,
    /// Leading power of the mean escape time, `psi * peak / aggregate`.
    pub escape_mean: AsymptoticPower,
}

/// Compute the escape-time constants of one component (at most 24 users).
pub fn extension_constants(
    spec: &NetworkSpec,
    component: usize,
) -> Result<ExtensionConstants, AsymptoticsError> {
    let comp = spec.component(component).clone();
    let single = crate::model::validate_spec(vec![comp.clone()])?;
    let space = enumerate_full_space(&single)?;

    // per-state leading power: exponent = sum of user exponents, coefficient
    // = product of user coefficients
    let mut best: Option<(Rational64, f64)> = None;
    let mut by_exponent: Vec<(Rational64, f64)> = Vec::new();
    for s in space.states() {
        if s.0 == 0 {
            continue;
        }
        let mut e = Rational64::new(0, 1);
        let mut c = 1.0f64;
        for u in 0..comp.size {
            if s.0 & (1 << u) != 0 {
                let r = comp.user_rate(u);
                e += r.exponent();
                c *= r.coefficient();
            }
        }
        by_exponent.push((e, c));
        best = Some(match best {
            None => (e, c),
            Some((be, bc)) => {
                if e > be || (e == be && c > bc) {
                    (e, c)
                } else {
                    (be, bc)
                }
            }
        });
    }
    let (e_max, c_max) = best.expect("component has at least one user");
    let mut psi: f64 = by_exponent
        .iter()
        .filter(|(e, _)| *e == e_max)
        .map(|(_, c)| c / c_max)
        .sum();
    // the empty state's unit weight only matters if the peak exponent is 0,
    // which positive exponents rule out; kept for exactness
    if e_max == Rational64::new(0, 1) {
        psi += 1.0 / c_max;
    }

    let eta = (0..comp.size)
        .map(|u| comp.user_rate(u).exponent())
        .min()
        .unwrap();
    let a_f = (0..comp.size)
        .map(|u| comp.user_rate(u).exponent())
        .max()
        .unwrap();
    let c_f: f64 = (0..comp.size)
        .filter(|&u| comp.user_rate(u).exponent() == a_f)
        .map(|u| comp.user_rate(u).coefficient())
        .sum();

    Ok(ExtensionConstants {
        peak_weight: AsymptoticPower {
            coefficient: c_max,
            exponent: e_max,
        },
        psi,
        eta,
        aggregate_rate: AsymptoticPower {
            coefficient: c_f,
            exponent: a_f,
        },
        escape_mean: AsymptoticPower {
            coefficient: psi * c_max / c_f,
            exponent: e_max - a_f,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Component, PowerLawRate};

    pub fn three_part(l: [usize; 3], a: [(i64, i64); 3]) -> NetworkSpec {
        NetworkSpec::partite(&[
            (l[0], PowerLawRate::pow(a[0].0, a[0].1)),
            (l[1], PowerLawRate::pow(a[1].0, a[1].1)),
            (l[2], PowerLawRate::pow(a[2].0, a[2].1)),
        ])
        .unwrap()
    }

    fn classify_default(spec: &NetworkSpec) -> BranchClassification {
        classify(spec, 0, spec.size(0), 2, spec.size(2)).unwrap()
    }

    #[test]
    fn rejects_same_branch_and_bad_levels() {
        let spec = three_part([3, 4, 6], [(1, 1), (1, 1), (5, 3)]);
        assert!(matches!(
            classify(&spec, 1, 1, 1, 2),
            Err(AsymptoticsError::SameBranch)
        ));
        assert!(matches!(
            classify(&spec, 0, 4, 2, 1),
            Err(AsymptoticsError::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn single_attracting_branch_with_unit_ratio() {
        // L=(3,5,5), a=(1/2,1/2,1/2): dominant {2nd}, beta=1, alpha=0
        let spec = three_part([3, 5, 5], [(1, 2), (1, 2), (1, 2)]);
        let c = classify_default(&spec);
        assert_eq!(c.dominant, vec![1]);
        assert!((c.gamma(1) - 1.0).abs() < 1e-15);
        assert_eq!(c.beta(1), Some(BetaValue::Finite(1.0)));
        assert_eq!(c.alpha(), 0.0);
        assert_eq!(c.scenario, Scenario::S1bStar);
        assert_eq!(c.scenario.family(), Scenario::S1b);
    }

    #[test]
    fn strongly_attracting_with_erlang_refinement() {
        // L=(5,2,5), a=(1/2,3/2,1): S={2nd}, gamma_S=1, alpha=1/2
        let spec = three_part([5, 2, 5], [(1, 2), (3, 2), (1, 1)]);
        let c = classify_default(&spec);
        assert_eq!(c.strongly_attracting, vec![1]);
        assert!((c.gamma_s() - 1.0).abs() < 1e-15);
        assert!((c.alpha() - 0.5).abs() < 1e-15);
        assert_eq!(c.scenario, Scenario::S2cStar);
    }

    #[test]
    fn initial_branch_dominates_everything() {
        // L=(3,3,3), a=(1,3/4,3/2): alpha=1
        let spec = three_part([3, 3, 3], [(1, 1), (3, 4), (3, 2)]);
        let c = classify_default(&spec);
        assert_eq!(c.dominant, vec![0]);
        assert_eq!(c.alpha(), 1.0);
        assert_eq!(c.scenario, Scenario::S3);
        let m = asym_mean_transition(&c, &spec);
        assert!((m.coefficient - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.exponent, Rational64::new(2, 1));
    }

    #[test]
    fn homogeneous_rates_give_only_the_two_known_scenarios() {
        let rate = PowerLawRate::pow(7, 8);
        for (sizes, k1, k2) in [
            (vec![3usize, 5, 5], 0usize, 2usize),
            (vec![3, 3, 5], 0, 2),
            (vec![2, 2], 0, 1),
            (vec![4, 4, 4, 2], 3, 1),
        ] {
            let spec = NetworkSpec::homogeneous(&sizes, rate).unwrap();
            let c = classify(&spec, k1, spec.size(k1), k2, spec.size(k2)).unwrap();
            let l_star = (0..spec.k())
                .filter(|&k| k != k2)
                .map(|k| spec.size(k))
                .max()
                .unwrap();
            let in_dominant = spec.size(k1) == l_star;
            if in_dominant {
                assert_eq!(c.scenario, Scenario::S2bStar3, "sizes {sizes:?}");
                let expect = spec.size(k2) as f64
                    / (spec.size(k2) as f64 + c.dominant.len() as f64 * l_star as f64);
                assert!((c.alpha() - expect).abs() < 1e-15);
            } else {
                assert_eq!(c.scenario, Scenario::S1bStar, "sizes {sizes:?}");
                assert_eq!(c.alpha(), 0.0);
            }
            assert!(c.gamma_is_normalized());
        }
    }

    #[test]
    fn homogeneous_mean_formula() {
        // all rates nu: E T ~ (1{k1 dominant}/L* + |K*|/L_{k2}) nu^{L*-1}
        let spec = NetworkSpec::homogeneous(&[2, 2], PowerLawRate::pow(1, 1)).unwrap();
        let c = classify(&spec, 0, 2, 1, 2).unwrap();
        let m = asym_mean_transition(&c, &spec);
        assert!((m.coefficient - 1.0).abs() < 1e-15);
        assert_eq!(m.exponent, Rational64::new(1, 1));
    }

    #[test]
    fn scenario_three_transform_is_unit_exponential() {
        let spec = three_part([3, 3, 3], [(1, 1), (3, 4), (3, 2)]);
        let law = limit_law(&classify_default(&spec));
        for &s in &[0.1, 1.0, 10.0] {
            assert!((law.laplace(s) - 1.0 / (1.0 + s)).abs() < 1e-12);
        }
        assert!((law.cdf(1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn erlang_refinement_matches_closed_form() {
        let spec = three_part([5, 2, 5], [(1, 2), (3, 2), (1, 1)]);
        let law = limit_law(&classify_default(&spec));
        for &s in &[0.1, 1.0, 10.0] {
            let want = 1.0 / ((1.0 + 0.5 * s) * (1.0 + 0.5 * s));
            assert!((law.laplace(s) - want).abs() < 1e-12);
        }
        // Erlang(2, 2) pieces
        let x = 0.7;
        assert!((law.cdf(x).unwrap() - erlang2_cdf(2.0, x)).abs() < 1e-12);
        assert!((law.pdf(x).unwrap() - erlang2_pdf(2.0, x)).abs() < 1e-12);
    }

    #[test]
    fn geometric_sum_refinement_atom_and_transform() {
        // single attracting branch with beta=1, lambda=1: atom 1/2
        let spec = three_part([3, 5, 5], [(1, 2), (1, 2), (1, 2)]);
        let law = limit_law(&classify_default(&spec));
        assert!((law.atom_at_zero() - 0.5).abs() < 1e-15);
        // closing the geometric-sum transform by hand:
        // q (lambda + s) / (s + q lambda) with q = 1/2, lambda = 1
        for &s in &[0.1, 1.0, 10.0] {
            let want = 0.5 * (1.0 + s) / (s + 0.5);
            assert!((law.laplace(s) - want).abs() < 1e-12, "s={s}");
        }
        assert!((law.cdf(0.0).unwrap() - 0.5).abs() < 1e-15);
        // CDF: 1 - (1-q) e^{-q lambda x}
        let x = 1.3f64;
        let want = 1.0 - 0.5 * (-0.5 * x).exp();
        assert!((law.cdf(x).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn mean_identity_via_transform_derivative() {
        for (l, a) in [
            ([3usize, 4, 6], [(1i64, 1i64), (1, 1), (5, 3)]),
            ([3, 4, 6], [(1, 1), (3, 4), (3, 4)]),
            ([2, 4, 5], [(7, 4), (7, 8), (7, 4)]),
            ([4, 2, 6], [(3, 5), (6, 5), (3, 5)]),
        ] {
            let spec = three_part(l, a);
            let c = classify_default(&spec);
            let law = limit_law(&c);
            let h = 1e-6;
            let deriv = (law.laplace(h) - law.laplace(-h)) / (2.0 * h);
            assert!(
                (-deriv - law.mean()).abs() < 1e-6,
                "{l:?} {a:?}: {} vs {}",
                -deriv,
                law.mean()
            );
        }
    }

    #[test]
    fn inverted_cdf_matches_geometric_sum_closed_form() {
        // force the generic inversion path on a law whose closed form we know
        let spec = three_part([3, 5, 5], [(1, 2), (1, 2), (1, 2)]);
        let c = classify_default(&spec);
        let mut law = limit_law(&c);
        law.scenario = Scenario::S1b; // generic row of the same family
        let closed = limit_law(&c);
        for i in 1..=20 {
            let x = i as f64 * 0.5;
            let inv = law.cdf(x).unwrap();
            let want = closed.cdf(x).unwrap();
            assert!((inv - want).abs() < 1e-6, "x={x}: {inv} vs {want}");
        }
    }

    #[test]
    fn degenerate_law_reports_zero_mean_and_full_atom() {
        let spec = three_part([3, 4, 6], [(1, 1), (1, 1), (5, 3)]);
        let c = classify_default(&spec);
        assert_eq!(c.scenario, Scenario::S1a);
        let law = limit_law(&c);
        assert_eq!(law.atom_at_zero(), 1.0);
        assert_eq!(law.mean(), 0.0);
        assert_eq!(law.cdf(0.0).unwrap(), 1.0);
        assert_eq!(law.cdf(3.0).unwrap(), 1.0);
        assert_eq!(law.pdf(1.0).unwrap(), 0.0);
    }

    #[test]
    fn marked_process_identity_holds() {
        // config with both attracting and strongly attracting branches
        let spec = three_part([3, 4, 6], [(1, 1), (3, 4), (3, 4)]);
        let c = classify_default(&spec);
        assert_eq!(c.scenario, Scenario::S1d);
        let law = limit_law(&c);
        let ks = marked_poisson_check(&law, 200_000, 7).unwrap();
        assert!(ks <= 0.01, "ks = {ks}");
    }

    #[test]
    fn marked_process_requires_both_sets() {
        let spec = three_part([3, 3, 3], [(1, 1), (3, 4), (3, 2)]);
        let law = limit_law(&classify_default(&spec));
        assert!(matches!(
            marked_poisson_check(&law, 10, 0),
            Err(AsymptoticsError::WrongScenario(_))
        ));
    }

    #[test]
    fn extension_constants_two_free_users() {
        // two non-conflicting users at rate nu: peak nu^2, psi=1, escape nu/2
        let spec = NetworkSpec::homogeneous(&[2], PowerLawRate::pow(1, 1)).unwrap();
        let ext = extension_constants(&spec, 0).unwrap();
        assert_eq!(ext.peak_weight.exponent, Rational64::new(2, 1));
        assert!((ext.psi - 1.0).abs() < 1e-15);
        assert_eq!(ext.escape_mean.exponent, Rational64::new(1, 1));
        assert!((ext.escape_mean.coefficient - 0.5).abs() < 1e-15);
    }

    #[test]
    fn extension_constants_single_edge_component() {
        // {a,b,c} with conflict (a,b), f=nu: peaks {a,c},{b,c}: psi=2, F=3nu
        let comp = Component {
            size: 3,
            rate: PowerLawRate::pow(1, 1),
            intra_edges: vec![(0, 1)],
            user_rates: None,
        };
        let spec = crate::model::validate_spec(vec![comp]).unwrap();
        let ext = extension_constants(&spec, 0).unwrap();
        assert_eq!(ext.peak_weight.exponent, Rational64::new(2, 1));
        assert!((ext.psi - 2.0).abs() < 1e-15);
        assert_eq!(ext.eta, Rational64::new(1, 1));
        assert!((ext.escape_mean.coefficient - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ext.escape_mean.exponent, Rational64::new(1, 1));
    }

    #[test]
    fn extension_constants_single_user() {
        let spec = NetworkSpec::homogeneous(&[1], PowerLawRate::pow(1, 1)).unwrap();
        let ext = extension_constants(&spec, 0).unwrap();
        assert!((ext.psi - 1.0).abs() < 1e-15);
        assert_eq!(ext.escape_mean.exponent, Rational64::new(0, 1));
        assert!((ext.escape_mean.coefficient - 1.0).abs() < 1e-15);
    }
}
