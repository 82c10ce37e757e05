//! Exact event-driven simulation of the activity process on the aggregated
//! star space and the full independent-set space: transition-time sampling,
//! occupancy functionals, starvation estimates, and the distribution
//! statistics used to compare empirical samples against limit laws.
//!
//! Replications use counter-based RNG streams derived from a root seed, so
//! results are bit-identical regardless of how many workers run them.

use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bd::{BdBranch, BdError};
use crate::chain::{ChainError, FiniteChain};
use crate::model::{
    enumerate_full_space, star_rates, FullState, ModelError, NetworkSpec, StarIndex, StarState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("operation needs {0}")]
    WrongScenario(String),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("chain error: {0}")]
    Chain(#[from] ChainError),
    #[error("branch error: {0}")]
    Bd(#[from] BdError),
}

/// Default censoring horizon as a multiple of the exact mean transition time.
pub const DEFAULT_HORIZON_FACTOR: f64 = 1e4;

/// One transition-time experiment.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub nu: f64,
    pub replications: usize,
    pub seed: u64,
    pub source: StarState,
    pub target: StarState,
    /// Absolute time cap per replication; `None` derives
    /// `DEFAULT_HORIZON_FACTOR * exact mean`.
    pub horizon: Option<f64>,
}

/// Samples and per-path branch occupancy of a transition-time experiment.
#[derive(Debug, Clone)]
pub struct SimReport {
    /// Hitting times of the uncensored replications, in replication order.
    pub samples: Vec<f64>,
    /// Per-sample time spent in each branch (aligned with `samples`).
    pub branch_time: Vec<Vec<f64>>,
    pub censored: usize,
    pub seed: u64,
    pub nu: f64,
    pub elapsed: Duration,
}

struct StarSim {
    sizes: Vec<usize>,
    f: Vec<f64>,
    root_total: f64,
    root_cum: Vec<f64>,
}

impl StarSim {
    fn new(spec: &NetworkSpec, nu: f64) -> Result<Self, SimError> {
        let rates = star_rates(spec, nu)?;
        let sizes = spec.sizes().to_vec();
        let f: Vec<f64> = (0..spec.k()).map(|k| rates.activation(k)).collect();
        let mut root_cum = Vec::with_capacity(sizes.len());
        let mut acc = 0.0;
        for (k, &l) in sizes.iter().enumerate() {
            acc += l as f64 * f[k];
            root_cum.push(acc);
        }
        Ok(Self {
            root_total: acc,
            sizes,
            f,
            root_cum,
        })
    }

    #[inline]
    fn pick_branch(&self, u: f64) -> usize {
        let x = u * self.root_total;
        for (k, &c) in self.root_cum.iter().enumerate() {
            if x < c {
                return k;
            }
        }
        self.root_cum.len() - 1
    }
}

#[inline]
fn exp_draw(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    -(1.0 - rng.gen::<f64>()).ln() / rate
}

fn rep_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Encoded star position: `level == 0` is the root, otherwise `(branch,
/// level)`.
#[derive(Clone, Copy, PartialEq)]
struct Pos {
    branch: usize,
    level: usize,
}

impl Pos {
    fn from_state(s: StarState) -> Pos {
        match s {
            StarState::Root => Pos {
                branch: usize::MAX,
                level: 0,
            },
            StarState::Branch { component, active } => Pos {
                branch: component,
                level: active,
            },
        }
    }

    #[inline]
    fn hits(&self, target: &Pos) -> bool {
        self.level == target.level && (self.level == 0 || self.branch == target.branch)
    }
}

/// Sample the transition time from `source` to `target` over independent
/// replications; records per-branch occupancy along each path.
pub fn sample_transition(spec: &NetworkSpec, cfg: &SimConfig) -> Result<SimReport, SimError> {
    let index = StarIndex::new(spec);
    index.id(cfg.source)?;
    index.id(cfg.target)?;
    if cfg.source == cfg.target {
        return Err(SimError::InvalidConfig(
            "source equals target; the transition time is identically zero".into(),
        ));
    }
    if cfg.replications == 0 {
        return Err(SimError::InvalidConfig("need at least one replication".into()));
    }
    let sim = StarSim::new(spec, cfg.nu)?;
    let horizon = match cfg.horizon {
        Some(h) => h,
        None => {
            let mean = crate::chain::star_mean_hitting(spec, cfg.nu, cfg.source, cfg.target)?;
            DEFAULT_HORIZON_FACTOR * mean
        }
    };
    let source = Pos::from_state(cfg.source);
    let target = Pos::from_state(cfg.target);
    let k = spec.k();

    let start = Instant::now();
    let runs: Vec<Option<(f64, Vec<f64>)>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(cfg.seed, rep as u64);
            let mut pos = source;
            let mut t = 0.0f64;
            let mut occ = vec![0.0f64; k];
            loop {
                if pos.hits(&target) {
                    return Some((t, occ));
                }
                if pos.level == 0 {
                    t += exp_draw(&mut rng, sim.root_total);
                    if t > horizon {
                        return None;
                    }
                    pos = Pos {
                        branch: sim.pick_branch(rng.gen::<f64>()),
                        level: 1,
                    };
                } else {
                    let up = (sim.sizes[pos.branch] - pos.level) as f64 * sim.f[pos.branch];
                    let down = pos.level as f64;
                    let total = up + down;
                    let dt = exp_draw(&mut rng, total);
                    t += dt;
                    occ[pos.branch] += dt;
                    if t > horizon {
                        return None;
                    }
                    if rng.gen::<f64>() * total < up {
                        pos.level += 1;
                    } else {
                        pos.level -= 1;
                    }
                }
            }
        })
        .collect();

    let mut samples = Vec::with_capacity(cfg.replications);
    let mut branch_time = Vec::with_capacity(cfg.replications);
    let mut censored = 0usize;
    for run in runs {
        match run {
            Some((t, occ)) => {
                samples.push(t);
                branch_time.push(occ);
            }
            None => censored += 1,
        }
    }
    Ok(SimReport {
        samples,
        branch_time,
        censored,
        seed: cfg.seed,
        nu: cfg.nu,
        elapsed: start.elapsed(),
    })
}

/// Mean fraction of the transition time spent in each branch other than the
/// target branch `k2`.
pub fn branch_occupancy_fractions(report: &SimReport, k2: usize) -> Vec<(usize, f64)> {
    let k = report
        .branch_time
        .first()
        .map(|occ| occ.len())
        .unwrap_or(0);
    let n = report.samples.len() as f64;
    (0..k)
        .filter(|&b| b != k2)
        .map(|b| {
            let mean = report
                .samples
                .iter()
                .zip(&report.branch_time)
                .map(|(&t, occ)| if t > 0.0 { occ[b] / t } else { 0.0 })
                .sum::<f64>()
                / n;
            (b, mean)
        })
        .collect()
}

/// Starvation probability estimate with a Wilson interval.
#[derive(Debug, Clone, Copy)]
pub struct StarvationEstimate {
    pub probability: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub replications: usize,
}

/// Estimate `P(no activity in branch k2 during [0, t])` starting from
/// `source`.
pub fn estimate_starvation(
    spec: &NetworkSpec,
    nu: f64,
    k2: usize,
    t: f64,
    replications: usize,
    seed: u64,
    source: StarState,
) -> Result<StarvationEstimate, SimError> {
    if source.component() == Some(k2) {
        return Err(SimError::InvalidConfig(
            "source must lie outside the observed branch".into(),
        ));
    }
    if k2 >= spec.k() {
        return Err(SimError::InvalidConfig(format!("no branch {k2}")));
    }
    let sim = StarSim::new(spec, nu)?;
    let source = Pos::from_state(source);

    let starved: usize = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(seed, rep as u64);
            let mut pos = source;
            let mut now = 0.0f64;
            loop {
                if pos.level > 0 && pos.branch == k2 {
                    return 0usize; // entered the branch before t
                }
                let rate = if pos.level == 0 {
                    sim.root_total
                } else {
                    (sim.sizes[pos.branch] - pos.level) as f64 * sim.f[pos.branch]
                        + pos.level as f64
                };
                now += exp_draw(&mut rng, rate);
                if now >= t {
                    return 1usize; // window elapsed with zero occupancy
                }
                if pos.level == 0 {
                    pos = Pos {
                        branch: sim.pick_branch(rng.gen::<f64>()),
                        level: 1,
                    };
                } else {
                    let up = (sim.sizes[pos.branch] - pos.level) as f64 * sim.f[pos.branch];
                    let total = up + pos.level as f64;
                    if rng.gen::<f64>() * total < up {
                        pos.level += 1;
                    } else {
                        pos.level -= 1;
                    }
                }
            }
        })
        .sum();

    let (lo, hi) = wilson_interval(starved, replications, 1.96);
    Ok(StarvationEstimate {
        probability: starved as f64 / replications as f64,
        wilson_low: lo,
        wilson_high: hi,
        replications,
    })
}

/// Occupancy statistics of the source branch over a window `[0, t]`.
#[derive(Debug, Clone, Copy)]
pub struct OccupancyReport {
    /// Mean time with the whole component active.
    pub mean_full: f64,
    /// Mean residual time (time before first exit, capped at `t`).
    pub mean_residual: f64,
    /// Mean full-activity time inside the residual window.
    pub mean_full_residual: f64,
    /// Fraction of paths with `full >= (1 - delta) * t`.
    pub p_near_saturation: f64,
}

/// Measure the full-activity time `tau`, residual time `R`, and their
/// intersection `tau_res` over `[0, t]`, starting inside a branch. The
/// pathwise bound `tau_res <= min(tau, R)` is asserted on every path.
pub fn occupancy_functionals(
    spec: &NetworkSpec,
    nu: f64,
    source: StarState,
    t: f64,
    delta: f64,
    replications: usize,
    seed: u64,
) -> Result<OccupancyReport, SimError> {
    let (branch, level) = match source {
        StarState::Branch { component, active } => (component, active),
        StarState::Root => {
            return Err(SimError::InvalidConfig(
                "occupancy functionals start inside a branch".into(),
            ))
        }
    };
    let _ = level;
    let sim = StarSim::new(spec, nu)?;
    let top = spec.size(branch);
    let source = Pos::from_state(source);

    let acc: Vec<(f64, f64, f64, bool)> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(seed, rep as u64);
            let mut pos = source;
            let mut now = 0.0f64;
            let mut tau = 0.0f64;
            let mut residual = 0.0f64;
            let mut tau_res = 0.0f64;
            let mut exited = false;
            while now < t {
                let (rate, at_top, in_branch) = if pos.level == 0 {
                    (sim.root_total, false, false)
                } else {
                    let up = (sim.sizes[pos.branch] - pos.level) as f64 * sim.f[pos.branch];
                    (
                        up + pos.level as f64,
                        pos.branch == branch && pos.level == top,
                        true,
                    )
                };
                let dt = exp_draw(&mut rng, rate).min(t - now);
                if at_top {
                    tau += dt;
                    if !exited {
                        tau_res += dt;
                    }
                }
                if in_branch && !exited {
                    residual += dt;
                }
                now += dt;
                if now >= t {
                    break;
                }
                if pos.level == 0 {
                    pos = Pos {
                        branch: sim.pick_branch(rng.gen::<f64>()),
                        level: 1,
                    };
                } else {
                    let up = (sim.sizes[pos.branch] - pos.level) as f64 * sim.f[pos.branch];
                    let total = up + pos.level as f64;
                    if rng.gen::<f64>() * total < up {
                        pos.level += 1;
                    } else {
                        pos.level -= 1;
                        if pos.level == 0 {
                            exited = true;
                        }
                    }
                }
            }
            assert!(
                tau_res <= tau.min(residual) + 1e-9 * t.max(1.0),
                "pathwise occupancy bound violated"
            );
            (tau, residual, tau_res, tau >= (1.0 - delta) * t)
        })
        .collect();

    let n = replications as f64;
    Ok(OccupancyReport {
        mean_full: acc.iter().map(|a| a.0).sum::<f64>() / n,
        mean_residual: acc.iter().map(|a| a.1).sum::<f64>() / n,
        mean_full_residual: acc.iter().map(|a| a.2).sum::<f64>() / n,
        p_near_saturation: acc.iter().filter(|a| a.3).count() as f64 / n,
    })
}

/// Simulate until the branch is left for the first time (absorption at the
/// root): returns the mean full-activity time before exit and the mean exit
/// time.
pub fn residual_to_absorption(
    spec: &NetworkSpec,
    nu: f64,
    source: StarState,
    replications: usize,
    seed: u64,
) -> Result<(f64, f64), SimError> {
    let (branch, _) = match source {
        StarState::Branch { component, active } => (component, active),
        StarState::Root => {
            return Err(SimError::InvalidConfig(
                "residual time starts inside a branch".into(),
            ))
        }
    };
    let sim = StarSim::new(spec, nu)?;
    let top = spec.size(branch);
    let source = Pos::from_state(source);

    let acc: Vec<(f64, f64)> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(seed, rep as u64);
            let mut pos = source;
            let mut now = 0.0f64;
            let mut tau_res = 0.0f64;
            while pos.level > 0 {
                let up = (sim.sizes[pos.branch] - pos.level) as f64 * sim.f[pos.branch];
                let total = up + pos.level as f64;
                let dt = exp_draw(&mut rng, total);
                if pos.level == top {
                    tau_res += dt;
                }
                now += dt;
                if rng.gen::<f64>() * total < up {
                    pos.level += 1;
                } else {
                    pos.level -= 1;
                }
            }
            (tau_res, now)
        })
        .collect();

    let n = replications as f64;
    Ok((
        acc.iter().map(|a| a.0).sum::<f64>() / n,
        acc.iter().map(|a| a.1).sum::<f64>() / n,
    ))
}

/// Simulate the geometric sum of escape times from branch `k` (entered at
/// level 1) before the target branch `k2` wins the root competition, scaled
/// by its exact mean, and report the KS distance to a unit exponential per
/// `nu`. The branch must be dominant with a strictly larger rate exponent
/// than the target.
pub fn geometric_sum_limit_check(
    spec: &NetworkSpec,
    k: usize,
    k2: usize,
    nu_grid: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>, SimError> {
    if k == k2 || k >= spec.k() || k2 >= spec.k() {
        return Err(SimError::InvalidConfig("branch indices".into()));
    }
    // strong attraction: dominant exponent and faster rate growth than k2
    let e = |j: usize| spec.rate(j).exponent() * num_rational::Rational64::new(spec.size(j) as i64, 1);
    let e_star = (0..spec.k()).filter(|&j| j != k2).map(e).max().unwrap();
    if e(k) != e_star || spec.rate(k).exponent() <= spec.rate(k2).exponent() {
        return Err(SimError::WrongScenario(format!(
            "branch {k} strongly attracting for target {k2}"
        )));
    }

    let branch = BdBranch::standard(spec.size(k), spec.rate(k));
    let mut out = Vec::with_capacity(nu_grid.len());
    for (grid_i, &nu) in nu_grid.iter().enumerate() {
        let p_k = spec.size(k) as f64 * spec.rate(k).eval(nu);
        let p_k2 = spec.size(k2) as f64 * spec.rate(k2).eval(nu);
        let succ = p_k2 / (p_k + p_k2);
        let mean_n = p_k / p_k2;
        let mean_escape = branch.mean_hitting(1, 0, nu)?;
        let mean_total = mean_n * mean_escape;

        let escape = EscapeSampler::new(&branch, nu)?;
        let mut samples: Vec<f64> = (0..draws)
            .into_par_iter()
            .map(|rep| {
                let mut rng = rep_rng(seed ^ (grid_i as u64) << 32, rep as u64);
                let mut total = 0.0f64;
                // geometric number of failures before the first success
                loop {
                    if rng.gen::<f64>() < succ {
                        break;
                    }
                    total += escape.sample(&mut rng);
                }
                total / mean_total
            })
            .collect();
        let ks = ks_statistic(&mut samples, |x| 1.0 - (-x).exp());
        out.push((nu, ks));
    }
    Ok(out)
}

/// Escape-time sampler from level 1 of a branch. Levels 1 and 2 admit exact
/// constant-cost draws (single exponential, or exponential plus the two-rate
/// sum from the top); deeper branches fall back to the jump chain.
enum EscapeSampler {
    Single {
        rate: f64,
    },
    TwoLevel {
        total: f64,
        p_down: f64,
        theta: [f64; 2],
    },
    Jump {
        branch: BdBranch,
        nu: f64,
    },
}

impl EscapeSampler {
    fn new(branch: &BdBranch, nu: f64) -> Result<Self, SimError> {
        match branch.levels() {
            1 => Ok(EscapeSampler::Single {
                rate: branch.death_coeff(1),
            }),
            2 => {
                let f = branch.rate().eval(nu);
                let up = branch.birth_coeff(1) * f;
                let down = branch.death_coeff(1);
                let spectrum = branch.escape_spectrum(nu)?;
                Ok(EscapeSampler::TwoLevel {
                    total: up + down,
                    p_down: down / (up + down),
                    theta: [spectrum.eigenvalues()[0], spectrum.eigenvalues()[1]],
                })
            }
            _ => Ok(EscapeSampler::Jump {
                branch: branch.clone(),
                nu,
            }),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            EscapeSampler::Single { rate } => exp_draw(rng, *rate),
            EscapeSampler::TwoLevel {
                total,
                p_down,
                theta,
            } => {
                // from level 1: either drop straight out, or climb to the top
                // and take the spectral two-exponential route down
                let mut t = exp_draw(rng, *total);
                if rng.gen::<f64>() >= *p_down {
                    t += exp_draw(rng, theta[0]) + exp_draw(rng, theta[1]);
                }
                t
            }
            EscapeSampler::Jump { branch, nu } => {
                let f = branch.rate().eval(*nu);
                let levels = branch.levels();
                let mut level = 1usize;
                let mut t = 0.0f64;
                while level > 0 {
                    let up = if level < levels {
                        branch.birth_coeff(level) * f
                    } else {
                        0.0
                    };
                    let down = branch.death_coeff(level);
                    let total = up + down;
                    t += exp_draw(rng, total);
                    if rng.gen::<f64>() * total < up {
                        level += 1;
                    } else {
                        level -= 1;
                    }
                }
                t
            }
        }
    }
}

/// Transition-time sampling on the full independent-set space.
pub struct FullSimConfig {
    pub nu: f64,
    pub replications: usize,
    pub seed: u64,
    pub source: FullState,
    pub target: FullState,
    pub horizon: Option<f64>,
}

/// Sample the transition time from `source` to `target` on the full space.
pub fn sample_transition_full(
    spec: &NetworkSpec,
    cfg: &FullSimConfig,
) -> Result<SimReport, SimError> {
    let space = enumerate_full_space(spec)?;
    let source = space.id(cfg.source)?;
    let target = space.id(cfg.target)?;
    if source == target {
        return Err(SimError::InvalidConfig(
            "source equals target; the transition time is identically zero".into(),
        ));
    }
    // compiled transition table with cumulative rates per row
    let n = space.len();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for &s in space.states() {
        let mut cum = 0.0;
        let row = space
            .neighbors(spec, cfg.nu, s)
            .into_iter()
            .map(|(t, q)| {
                cum += q;
                (space.id(t).unwrap(), cum)
            })
            .collect();
        rows.push(row);
    }
    let totals: Vec<f64> = rows
        .iter()
        .map(|r| r.last().map(|&(_, c)| c).unwrap_or(0.0))
        .collect();
    let horizon = match cfg.horizon {
        Some(h) => h,
        None => {
            let chain = FiniteChain::from_full_space(spec, cfg.nu)?;
            DEFAULT_HORIZON_FACTOR * chain.mean_hitting_time(source, &[target])?
        }
    };
    let component_of: Vec<Option<usize>> = space
        .states()
        .iter()
        .map(|&s| space.component_of_state(s))
        .collect();
    let k = spec.k();

    let start = Instant::now();
    let runs: Vec<Option<(f64, Vec<f64>)>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(cfg.seed, rep as u64);
            let mut state = source;
            let mut t = 0.0f64;
            let mut occ = vec![0.0f64; k];
            loop {
                if state == target {
                    return Some((t, occ));
                }
                let total = totals[state];
                let dt = exp_draw(&mut rng, total);
                t += dt;
                if let Some(b) = component_of[state] {
                    occ[b] += dt;
                }
                if t > horizon {
                    return None;
                }
                let x = rng.gen::<f64>() * total;
                let row = &rows[state];
                let mut next = row[row.len() - 1].0;
                for &(id, cum) in row {
                    if x < cum {
                        next = id;
                        break;
                    }
                }
                state = next;
            }
        })
        .collect();

    let mut samples = Vec::with_capacity(cfg.replications);
    let mut branch_time = Vec::with_capacity(cfg.replications);
    let mut censored = 0usize;
    for run in runs {
        match run {
            Some((t, occ)) => {
                samples.push(t);
                branch_time.push(occ);
            }
            None => censored += 1,
        }
    }
    Ok(SimReport {
        samples,
        branch_time,
        censored,
        seed: cfg.seed,
        nu: cfg.nu,
        elapsed: start.elapsed(),
    })
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF. The
/// sample is sorted in place. Atoms of the CDF are handled exactly through
/// the two-sided comparison at every distinct sample point (samples equal to
/// an atom location count on both sides).
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    assert!(!samples.is_empty(), "KS statistic needs samples");
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0usize;
    while i < samples.len() {
        let x = samples[i];
        let mut j = i;
        while j < samples.len() && samples[j] == x {
            j += 1;
        }
        let f = cdf(x);
        let lower = i as f64 / n;
        let upper = j as f64 / n;
        d = d.max((f - lower).abs()).max((f - upper).abs());
        i = j;
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic; both samples are sorted in place.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        let fa = i as f64 / a.len() as f64;
        let fb = j as f64 / b.len() as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Histogram bins by the Freedman-Diaconis rule over a sorted copy of the
/// samples. Returns `(left, right, density)` triples.
pub fn histogram_fd(samples: &[f64]) -> Vec<(f64, f64, f64)> {
    assert!(!samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let q = |p: f64| -> f64 {
        let idx = (p * (n - 1) as f64).round() as usize;
        sorted[idx]
    };
    let iqr = q(0.75) - q(0.25);
    let lo = sorted[0];
    let hi = sorted[n - 1];
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let width = if iqr > 0.0 {
        2.0 * iqr / (n as f64).cbrt()
    } else {
        span / 10.0
    };
    let bins = ((span / width).ceil() as usize).clamp(1, 10_000);
    let width = span / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        let mut b = ((x - lo) / width) as usize;
        if b >= bins {
            b = bins - 1;
        }
        counts[b] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let left = lo + b as f64 * width;
            (left, left + width, c as f64 / (n as f64 * width))
        })
        .collect()
}
