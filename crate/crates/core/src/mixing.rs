//! Conductance, the certified mixing-time lower bound, and an exact
//! total-variation oracle on the aggregated state space.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Zero};
use thiserror::Error;

use crate::bd::AsymptoticPower;
use crate::chain::FiniteChain;
use crate::model::{star_rates, stationary_star, ModelError, NetworkSpec, StarIndex, StarState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixingError {
    #[error("subset must be nonempty")]
    EmptySubset,
    #[error("subset must be proper")]
    FullSubset,
    #[error("no branch has limiting stationary mass at most {0}")]
    NoEligibleBranch(f64),
    #[error("epsilon must lie in (0, (1-r)/2); got eps={eps}, r={r}")]
    BadEpsilon { r: f64, eps: f64 },
    #[error("state space of size {0} exceeds the cap of {1}")]
    TooLarge(usize, usize),
    #[error("bisection failed to bracket the mixing time")]
    NonConvergent,
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("chain error: {0}")]
    Chain(#[from] crate::chain::ChainError),
}

const TV_STATE_CAP: usize = 10_000;

/// Conductance of a subset: outflow over stationary mass.
#[derive(Debug, Clone)]
pub struct ConductanceReport {
    /// Stationary probability flow out of the subset.
    pub flow: f64,
    /// Stationary mass of the subset.
    pub mass: f64,
    /// `flow / mass`.
    pub phi: f64,
    /// Leading power of `phi` in `nu` when the subset is a whole branch.
    pub asymptotic: Option<AsymptoticPower>,
}

/// Exact conductance of an arbitrary proper subset of the star space.
pub fn conductance(
    spec: &NetworkSpec,
    nu: f64,
    subset: &[StarState],
) -> Result<ConductanceReport, MixingError> {
    if subset.is_empty() {
        return Err(MixingError::EmptySubset);
    }
    let index = StarIndex::new(spec);
    let mut member = vec![false; index.len()];
    for &s in subset {
        member[index.id(s)?] = true;
    }
    if member.iter().all(|&m| m) {
        return Err(MixingError::FullSubset);
    }
    let q = star_rates(spec, nu)?;
    let pi = stationary_star(spec, nu)?;
    let mut flow = 0.0;
    let mut mass = 0.0;
    for id in 0..index.len() {
        if !member[id] {
            continue;
        }
        let x = index.state(id);
        mass += pi.probs()[id];
        for (y, rate) in q.neighbors(x) {
            if !member[index.id(y).unwrap()] {
                flow += pi.probs()[id] * rate;
            }
        }
    }
    Ok(ConductanceReport {
        flow,
        mass,
        phi: flow / mass,
        asymptotic: None,
    })
}

/// Conductance of a whole branch, with its leading power
/// `L_k c_k^{1-L_k} nu^{-a_k (L_k - 1)}`.
pub fn conductance_branch(
    spec: &NetworkSpec,
    nu: f64,
    k: usize,
) -> Result<ConductanceReport, MixingError> {
    let subset: Vec<StarState> = (1..=spec.size(k)).map(|l| StarState::branch(k, l)).collect();
    let mut report = conductance(spec, nu, &subset)?;
    let rate = spec.rate(k);
    let l = spec.size(k) as i64;
    report.asymptotic = Some(AsymptoticPower {
        coefficient: spec.size(k) as f64 * rate.coefficient().powi(1 - l as i32),
        exponent: -rate.exponent() * Rational64::new(l - 1, 1),
    });
    Ok(report)
}

/// The branch with the slowest asymptotic escape among those whose limiting
/// stationary mass stays at or below `r`.
///
/// Limiting masses follow from comparing branch-weight exponents `a_k L_k`;
/// escape times are ranked by exponent `a_k (L_k - 1)`, ties by coefficient
/// `c_k^{L_k-1}/L_k`, then by lowest index.
pub fn kappa_branch(spec: &NetworkSpec, r: f64) -> Result<usize, MixingError> {
    let kk = spec.k();
    let exp_weight =
        |k: usize| spec.rate(k).exponent() * Rational64::new(spec.size(k) as i64, 1);
    let e_max = (0..kk).map(exp_weight).max().unwrap();
    let coeff = |k: usize| {
        let mut acc = BigRational::one();
        let base = BigRational::from_float(spec.rate(k).coefficient()).unwrap();
        for _ in 0..spec.size(k) {
            acc *= &base;
        }
        acc
    };
    let total: BigRational = (0..kk)
        .filter(|&k| exp_weight(k) == e_max)
        .map(coeff)
        .sum();
    let r_big = BigRational::from_float(r).ok_or(MixingError::NoEligibleBranch(r))?;

    let mut eligible = Vec::new();
    for k in 0..kk {
        let mass = if exp_weight(k) == e_max {
            coeff(k) / &total
        } else {
            BigRational::zero()
        };
        if mass <= r_big {
            eligible.push(k);
        }
    }
    if eligible.is_empty() {
        return Err(MixingError::NoEligibleBranch(r));
    }

    let escape_exp =
        |k: usize| spec.rate(k).exponent() * Rational64::new(spec.size(k) as i64 - 1, 1);
    let escape_coeff = |k: usize| {
        let mut acc = BigRational::one();
        let base = BigRational::from_float(spec.rate(k).coefficient()).unwrap();
        for _ in 0..spec.size(k) - 1 {
            acc *= &base;
        }
        acc / BigRational::from_integer(BigInt::from(spec.size(k)))
    };
    let mut best = eligible[0];
    for &k in &eligible[1..] {
        let better = match escape_exp(k).cmp(&escape_exp(best)) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => escape_coeff(k) > escape_coeff(best),
        };
        if better {
            best = k;
        }
    }
    Ok(best)
}

/// A certified lower bound on the mixing time at `nu`.
#[derive(Debug, Clone)]
pub struct MixingBound {
    pub r: f64,
    pub epsilon: f64,
    /// Bottleneck branch used for the certificate.
    pub kappa: usize,
    /// Exact branch conductance at `nu`.
    pub phi_kappa: f64,
    /// `(1 - r - 2 eps) / phi_kappa`.
    pub bound: f64,
    /// Leading power of the bound in `nu`.
    pub asymptotic: AsymptoticPower,
}

/// Certified mixing-time lower bound `(1 - r - 2 eps) / Phi(B_kappa)`.
///
/// Any subset's conductance upper-bounds the conductance profile, so the
/// bound is valid without minimizing over subsets.
pub fn mixing_lower_bound(
    spec: &NetworkSpec,
    nu: f64,
    r: f64,
    epsilon: f64,
) -> Result<MixingBound, MixingError> {
    if !(r > 0.0 && r < 1.0) || !(epsilon > 0.0 && epsilon < (1.0 - r) / 2.0) {
        return Err(MixingError::BadEpsilon { r, eps: epsilon });
    }
    let kappa = kappa_branch(spec, r)?;
    let report = conductance_branch(spec, nu, kappa)?;
    let c = 1.0 - r - 2.0 * epsilon;
    let phi_asym = report.asymptotic.expect("branch conductance has a leading power");
    Ok(MixingBound {
        r,
        epsilon,
        kappa,
        phi_kappa: report.phi,
        bound: c / report.phi,
        asymptotic: AsymptoticPower {
            coefficient: c / phi_asym.coefficient,
            exponent: -phi_asym.exponent,
        },
    })
}

/// Worst-case total-variation distance to stationarity at time `t`, from the
/// transient distribution of every start state (uniformization, truncation
/// error below 1e-10).
pub fn tv_distance(spec: &NetworkSpec, nu: f64, t: f64) -> Result<f64, MixingError> {
    let index = StarIndex::new(spec);
    if index.len() > TV_STATE_CAP {
        return Err(MixingError::TooLarge(index.len(), TV_STATE_CAP));
    }
    let chain = FiniteChain::from_star(spec, nu)?;
    let pi = stationary_star(spec, nu)?;
    let mut worst = 0.0f64;
    for start in 0..index.len() {
        let p = chain.transient_distribution(start, t, 1e-10);
        let tv = 0.5
            * p.iter()
                .zip(pi.probs())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        worst = worst.max(tv);
    }
    Ok(worst)
}

/// Exact mixing time: the first `t` with `tv_distance <= epsilon`, located by
/// doubling then bisection to relative precision 1e-6.
pub fn t_mix_exact(spec: &NetworkSpec, nu: f64, epsilon: f64) -> Result<f64, MixingError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(MixingError::NonConvergent);
    }
    if tv_distance(spec, nu, 0.0)? <= epsilon {
        return Ok(0.0);
    }
    let chain = FiniteChain::from_star(spec, nu)?;
    let mut hi = 1.0 / chain.max_total_rate();
    let mut doublings = 0;
    while tv_distance(spec, nu, hi)? > epsilon {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(MixingError::NonConvergent);
        }
    }
    let mut lo = hi / 2.0;
    if doublings == 0 {
        lo = 0.0;
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if tv_distance(spec, nu, mid)? <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
