//! Generic finite-state CTMC machinery: first-step hitting-time solves and
//! uniformized transient distributions. Used as ground truth by the
//! analytical and simulation layers.

use thiserror::Error;

use crate::model::{enumerate_full_space, star_rates, FullState, NetworkSpec, StarState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("state space of size {0} exceeds the cap of {1}")]
    TooLarge(usize, usize),
    #[error("target set is unreachable from state {0}")]
    Unreachable(usize),
    #[error("hitting-time system is singular")]
    Singular,
    #[error("invalid state index {0}")]
    BadIndex(usize),
    #[error("model error: {0}")]
    Model(#[from] crate::model::ModelError),
}

const HITTING_STATE_CAP: usize = 100_000;

/// Sparse rate matrix of a finite CTMC.
#[derive(Debug, Clone)]
pub struct FiniteChain {
    /// `rows[x]` lists `(y, q(x,y))` with `y != x` and `q > 0`.
    rows: Vec<Vec<(usize, f64)>>,
    totals: Vec<f64>,
}

impl FiniteChain {
    pub fn new(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let totals = rows
            .iter()
            .map(|r| r.iter().map(|&(_, q)| q).sum())
            .collect();
        Self { rows, totals }
    }

    /// Aggregated star-space chain of a partite network at `nu`.
    /// State ids follow `StarIndex`.
    pub fn from_star(spec: &NetworkSpec, nu: f64) -> Result<Self, ChainError> {
        let q = star_rates(spec, nu)?;
        let index = q.index().clone();
        let rows = (0..index.len())
            .map(|id| {
                q.neighbors(index.state(id))
                    .into_iter()
                    .map(|(s, rate)| (index.id(s).unwrap(), rate))
                    .collect()
            })
            .collect();
        Ok(Self::new(rows))
    }

    /// Full independent-set chain of a network at `nu`.
    /// State ids follow the enumeration order of `FullSpace`.
    pub fn from_full_space(spec: &NetworkSpec, nu: f64) -> Result<Self, ChainError> {
        let space = enumerate_full_space(spec)?;
        let rows = space
            .states()
            .iter()
            .map(|&s| {
                space
                    .neighbors(spec, nu, s)
                    .into_iter()
                    .map(|(t, rate)| (space.id(t).unwrap(), rate))
                    .collect()
            })
            .collect();
        Ok(Self::new(rows))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn total_rate(&self, x: usize) -> f64 {
        self.totals[x]
    }

    pub fn max_total_rate(&self) -> f64 {
        self.totals.iter().cloned().fold(0.0, f64::max)
    }

    fn reachable_set(&self, from: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(x) = stack.pop() {
            for &(y, _) in &self.rows[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    }

    /// Expected hitting time of `targets` from `source` by first-step analysis.
    ///
    /// Solves `(diag(Q_tot) - Q) h = 1` over non-target states with Gaussian
    /// elimination and partial pivoting.
    pub fn mean_hitting_time(&self, source: usize, targets: &[usize]) -> Result<f64, ChainError> {
        let n = self.len();
        if source >= n {
            return Err(ChainError::BadIndex(source));
        }
        if n > HITTING_STATE_CAP {
            return Err(ChainError::TooLarge(n, HITTING_STATE_CAP));
        }
        let mut is_target = vec![false; n];
        for &t in targets {
            if t >= n {
                return Err(ChainError::BadIndex(t));
            }
            is_target[t] = true;
        }
        if is_target[source] {
            return Ok(0.0);
        }
        let seen = self.reachable_set(source);
        if !targets.iter().any(|&t| seen[t]) {
            return Err(ChainError::Unreachable(source));
        }

        // dense system over reachable non-target states
        let active: Vec<usize> = (0..n).filter(|&x| seen[x] && !is_target[x]).collect();
        let pos: Vec<Option<usize>> = {
            let mut p = vec![None; n];
            for (i, &x) in active.iter().enumerate() {
                p[x] = Some(i);
            }
            p
        };
        let m = active.len();
        let mut a = vec![0.0f64; m * m];
        let mut b = vec![1.0f64; m];
        for (i, &x) in active.iter().enumerate() {
            a[i * m + i] = self.totals[x];
            for &(y, q) in &self.rows[x] {
                if let Some(j) = pos[y] {
                    a[i * m + j] -= q;
                }
                // transitions into targets contribute 0 to the RHS shift
            }
        }
        solve_dense(&mut a, &mut b, m)?;
        let i = pos[source].expect("source is active");
        Ok(b[i])
    }

    /// Distribution at time `t` started from `start`, via uniformization.
    ///
    /// The result is accurate to `tol` in total variation: the Poisson tail
    /// outside the summation window carries less than `tol` mass.
    pub fn transient_distribution(&self, start: usize, t: f64, tol: f64) -> Vec<f64> {
        let n = self.len();
        let mut p = vec![0.0f64; n];
        p[start] = 1.0;
        if t <= 0.0 {
            return p;
        }
        let lambda = self.max_total_rate() * 1.000001 + 1e-12;
        let lt = lambda * t;
        let (lo, hi, weights) = poisson_window(lt, tol);

        let mut out = vec![0.0f64; n];
        let mut cur = p;
        let mut next = vec![0.0f64; n];
        for step in 0..=hi {
            if step >= lo {
                let w = weights[step - lo];
                for (o, c) in out.iter_mut().zip(&cur) {
                    *o += w * c;
                }
            }
            if step == hi {
                break;
            }
            // one step of P = I + Q/lambda
            for (i, v) in next.iter_mut().enumerate() {
                *v = cur[i] * (1.0 - self.totals[i] / lambda);
            }
            for (i, row) in self.rows.iter().enumerate() {
                let ci = cur[i];
                if ci == 0.0 {
                    continue;
                }
                for &(j, q) in row {
                    next[j] += ci * q / lambda;
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        out
    }

    /// Probability that the chain started at `start` has not yet entered
    /// `absorbing` by time `t` (states in `absorbing` are made absorbing).
    pub fn survival_probability(&self, start: usize, absorbing: &[usize], t: f64, tol: f64) -> f64 {
        let mut rows = self.rows.clone();
        for &a in absorbing {
            rows[a].clear();
        }
        let sub = FiniteChain::new(rows);
        let p = sub.transient_distribution(start, t, tol);
        1.0 - absorbing.iter().map(|&a| p[a]).sum::<f64>()
    }
}

/// Poisson(lt) weights on a window `[lo, hi]` capturing all but `tol` mass.
fn poisson_window(lt: f64, tol: f64) -> (usize, usize, Vec<f64>) {
    // mode and a generous Chernoff-style spread
    let mode = lt.floor().max(0.0);
    let spread = (14.0 * (lt.sqrt() + 1.0) + 0.5 * tol.recip().ln().max(1.0)).ceil();
    let lo = ((mode - spread).max(0.0)) as usize;
    let hi = (mode + spread) as usize;
    // unnormalized weights by recurrence from the mode, in linear space
    let m = mode as usize;
    let len = hi - lo + 1;
    let mut w = vec![0.0f64; len];
    w[m - lo] = 1.0;
    for i in (lo..m).rev() {
        // w[i] = w[i+1] * (i+1) / lt
        let next = w[i + 1 - lo];
        w[i - lo] = next * ((i + 1) as f64) / lt;
    }
    for i in m + 1..=hi {
        w[i - lo] = w[i - 1 - lo] * lt / (i as f64);
    }
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    (lo, hi, w)
}

/// In-place Gaussian elimination with partial pivoting, `a` row-major `n x n`.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Result<(), ChainError> {
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(ChainError::Singular);
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            a[row * n + col] = 0.0;
            for j in col + 1..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for j in col + 1..n {
            acc -= a[col * n + j] * b[j];
        }
        b[col] = acc / a[col * n + col];
    }
    Ok(())
}

/// Expected hitting time on the aggregated star space.
pub fn star_mean_hitting(
    spec: &NetworkSpec,
    nu: f64,
    source: StarState,
    target: StarState,
) -> Result<f64, ChainError> {
    let chain = FiniteChain::from_star(spec, nu)?;
    let index = crate::model::StarIndex::new(spec);
    chain.mean_hitting_time(index.id(source)?, &[index.id(target)?])
}

/// Expected hitting time on the full independent-set space.
pub fn full_mean_hitting(
    spec: &NetworkSpec,
    nu: f64,
    source: FullState,
    target: FullState,
) -> Result<f64, ChainError> {
    let space = enumerate_full_space(spec)?;
    let chain = FiniteChain::from_full_space(spec, nu)?;
    chain.mean_hitting_time(space.id(source)?, &[space.id(target)?])
}
