//! Network specification and the activity-process state spaces.
//!
//! A network is a set of user components with hard-core interference across
//! components (complete partite conflict graph) and, optionally, extra
//! conflict edges inside a component. Users activate at a power-law rate
//! `c * nu^a` and deactivate at unit rate. Without intra-component edges the
//! process aggregates onto a star-shaped state space with one branch per
//! component; with them the full independent-set space is used.

use std::collections::HashMap;

use num_rational::Rational64;
use num_traits::ToPrimitive;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("network must have at least one component")]
    NoComponents,
    #[error("component {0} has no users")]
    EmptyComponent(usize),
    #[error("component {component} splits into fully interfering groups {left:?} and {right:?}")]
    NonMinimalComponent {
        component: usize,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("intra edge ({a},{b}) invalid for component {component} of size {size}")]
    BadEdge {
        component: usize,
        a: usize,
        b: usize,
        size: usize,
    },
    #[error("rate coefficient must be positive and finite, got {0}")]
    BadCoefficient(f64),
    #[error("rate exponent must be positive, got {0}")]
    BadExponent(Rational64),
    #[error("component {component} has {got} user rates, expected {expected}")]
    BadUserRates {
        component: usize,
        got: usize,
        expected: usize,
    },
    #[error("aggregated star model requires a network without intra-component edges")]
    AggregationInvalid,
    #[error("full state space with {0} users exceeds the 24-user cap")]
    TooLarge(usize),
    #[error("invalid state: {0}")]
    BadState(String),
}

/// Activation rate of the form `coefficient * nu^exponent`.
///
/// The exponent is kept as an exact rational so that all large-`nu` limits
/// reduce to decidable exponent/coefficient comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawRate {
    coefficient: f64,
    exponent: Rational64,
}

impl PowerLawRate {
    pub fn new(coefficient: f64, exponent: Rational64) -> Result<Self, ModelError> {
        if !(coefficient > 0.0) || !coefficient.is_finite() {
            return Err(ModelError::BadCoefficient(coefficient));
        }
        if exponent <= Rational64::new(0, 1) {
            return Err(ModelError::BadExponent(exponent));
        }
        Ok(Self {
            coefficient,
            exponent,
        })
    }

    /// `c * nu^(p/q)` from raw parts; panics on invalid input, so only for literals.
    pub fn from_parts(coefficient: f64, p: i64, q: i64) -> Self {
        Self::new(coefficient, Rational64::new(p, q)).expect("invalid power-law rate")
    }

    /// Plain `nu^(p/q)`.
    pub fn pow(p: i64, q: i64) -> Self {
        Self::from_parts(1.0, p, q)
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn exponent(&self) -> Rational64 {
        self.exponent
    }

    /// Evaluate `f(nu)`. Integer exponents use exact `powi`.
    pub fn eval(&self, nu: f64) -> f64 {
        debug_assert!(nu > 0.0);
        if self.exponent.is_integer() {
            self.coefficient * nu.powi(*self.exponent.numer() as i32)
        } else {
            self.coefficient * (self.exponent_f64() * nu.ln()).exp()
        }
    }

    /// `ln f(nu)`, safe against overflow of the power itself.
    pub fn log_eval(&self, nu: f64) -> f64 {
        self.coefficient.ln() + self.exponent_f64() * nu.ln()
    }

    pub fn exponent_f64(&self) -> f64 {
        self.exponent.to_f64().expect("rational exponent fits f64")
    }
}

/// One interference-free user group of the conflict graph.
#[derive(Debug, Clone)]
pub struct Component {
    pub size: usize,
    pub rate: PowerLawRate,
    /// Conflict pairs inside the component, 0-based user indices.
    pub intra_edges: Vec<(usize, usize)>,
    /// Per-user rate overrides; meaningful together with intra edges.
    pub user_rates: Option<Vec<PowerLawRate>>,
}

impl Component {
    pub fn uniform(size: usize, rate: PowerLawRate) -> Self {
        Self {
            size,
            rate,
            intra_edges: Vec::new(),
            user_rates: None,
        }
    }

    pub fn user_rate(&self, user: usize) -> PowerLawRate {
        match &self.user_rates {
            Some(rates) => rates[user],
            None => self.rate,
        }
    }
}

/// Validated network: components plus cached layout.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    components: Vec<Component>,
    sizes: Vec<usize>,
}

/// Check the component list and build a `NetworkSpec`.
///
/// Rejects empty components, malformed edges and non-minimal components: a
/// component must not admit a bipartition with full mutual interference,
/// which is equivalent to its non-conflict graph being connected.
pub fn validate_spec(components: Vec<Component>) -> Result<NetworkSpec, ModelError> {
    if components.is_empty() {
        return Err(ModelError::NoComponents);
    }
    for (k, comp) in components.iter().enumerate() {
        if comp.size == 0 {
            return Err(ModelError::EmptyComponent(k));
        }
        if let Some(rates) = &comp.user_rates {
            if rates.len() != comp.size {
                return Err(ModelError::BadUserRates {
                    component: k,
                    got: rates.len(),
                    expected: comp.size,
                });
            }
        }
        for &(a, b) in &comp.intra_edges {
            if a >= comp.size || b >= comp.size || a == b {
                return Err(ModelError::BadEdge {
                    component: k,
                    a,
                    b,
                    size: comp.size,
                });
            }
        }
        if let Some((left, right)) = split_check(comp) {
            return Err(ModelError::NonMinimalComponent {
                component: k,
                left,
                right,
            });
        }
    }
    let sizes = components.iter().map(|c| c.size).collect();
    Ok(NetworkSpec { components, sizes })
}

/// Find a bipartition with full mutual interference, if one exists.
///
/// Two users that do NOT share an intra edge can be simultaneously active, so
/// the component is splittable exactly when the complement of its intra graph
/// is disconnected; the connected component of user 0 is then one side.
fn split_check(comp: &Component) -> Option<(Vec<usize>, Vec<usize>)> {
    let n = comp.size;
    if n <= 1 {
        return None;
    }
    let mut conflict = vec![vec![false; n]; n];
    for &(a, b) in &comp.intra_edges {
        conflict[a][b] = true;
        conflict[b][a] = true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if v != u && !seen[v] && !conflict[u][v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    if seen.iter().all(|&s| s) {
        None
    } else {
        let left: Vec<usize> = (0..n).filter(|&u| seen[u]).collect();
        let right: Vec<usize> = (0..n).filter(|&u| !seen[u]).collect();
        Some((left, right))
    }
}

impl NetworkSpec {
    /// Number of components.
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, k: usize) -> usize {
        self.sizes[k]
    }

    pub fn component(&self, k: usize) -> &Component {
        &self.components[k]
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn rate(&self, k: usize) -> PowerLawRate {
        self.components[k].rate
    }

    pub fn total_users(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// True when no component carries intra edges (pure partite model).
    pub fn is_partite(&self) -> bool {
        self.components.iter().all(|c| c.intra_edges.is_empty())
    }

    /// Convenience constructor for the pure partite model with one rate per component.
    pub fn partite(sizes_and_rates: &[(usize, PowerLawRate)]) -> Result<Self, ModelError> {
        validate_spec(
            sizes_and_rates
                .iter()
                .map(|&(size, rate)| Component::uniform(size, rate))
                .collect(),
        )
    }

    /// Homogeneous partite network: all components share `rate`.
    pub fn homogeneous(sizes: &[usize], rate: PowerLawRate) -> Result<Self, ModelError> {
        Self::partite(&sizes.iter().map(|&s| (s, rate)).collect::<Vec<_>>())
    }
}

/// Aggregated state: the empty root or `active` users up in one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StarState {
    Root,
    Branch { component: usize, active: usize },
}

impl StarState {
    pub fn branch(component: usize, active: usize) -> Self {
        StarState::Branch { component, active }
    }

    pub fn component(&self) -> Option<usize> {
        match self {
            StarState::Root => None,
            StarState::Branch { component, .. } => Some(*component),
        }
    }
}

/// Dense indexing of the star space: root is 0, branch k occupies a
/// contiguous block ordered by activity level.
#[derive(Debug, Clone)]
pub struct StarIndex {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    len: usize,
}

impl StarIndex {
    pub fn new(spec: &NetworkSpec) -> Self {
        let mut offsets = Vec::with_capacity(spec.k());
        let mut next = 1usize;
        for &l in spec.sizes() {
            offsets.push(next);
            next += l;
        }
        Self {
            offsets,
            sizes: spec.sizes().to_vec(),
            len: next,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, state: StarState) -> Result<usize, ModelError> {
        match state {
            StarState::Root => Ok(0),
            StarState::Branch { component, active } => {
                if component >= self.sizes.len() || active == 0 || active > self.sizes[component] {
                    return Err(ModelError::BadState(format!("{state:?}")));
                }
                Ok(self.offsets[component] + active - 1)
            }
        }
    }

    pub fn state(&self, id: usize) -> StarState {
        if id == 0 {
            return StarState::Root;
        }
        for (k, &off) in self.offsets.iter().enumerate() {
            if id >= off && id < off + self.sizes[k] {
                return StarState::Branch {
                    component: k,
                    active: id - off + 1,
                };
            }
        }
        panic!("state id {id} out of range");
    }

    pub fn states(&self) -> impl Iterator<Item = StarState> + '_ {
        (0..self.len).map(|id| self.state(id))
    }
}

/// Transition rates of the aggregated process at a fixed `nu`.
#[derive(Debug, Clone)]
pub struct StarRates {
    index: StarIndex,
    sizes: Vec<usize>,
    f: Vec<f64>,
}

/// Build the aggregated rate structure; only valid for partite networks.
pub fn star_rates(spec: &NetworkSpec, nu: f64) -> Result<StarRates, ModelError> {
    if !spec.is_partite() {
        return Err(ModelError::AggregationInvalid);
    }
    Ok(StarRates {
        index: StarIndex::new(spec),
        sizes: spec.sizes().to_vec(),
        f: spec.components().iter().map(|c| c.rate.eval(nu)).collect(),
    })
}

impl StarRates {
    pub fn index(&self) -> &StarIndex {
        &self.index
    }

    pub fn activation(&self, k: usize) -> f64 {
        self.f[k]
    }

    /// Total activation rate out of the root, `sum_k L_k f_k`.
    pub fn root_exit_rate(&self) -> f64 {
        self.sizes
            .iter()
            .zip(&self.f)
            .map(|(&l, &f)| l as f64 * f)
            .sum()
    }

    /// Transition rate `q(from, to)`; zero off the star skeleton.
    pub fn rate(&self, from: StarState, to: StarState) -> f64 {
        match (from, to) {
            (StarState::Root, StarState::Branch { component, active }) if active == 1 => {
                self.sizes[component] as f64 * self.f[component]
            }
            (StarState::Branch { active, .. }, StarState::Root) if active == 1 => 1.0,
            (
                StarState::Branch {
                    component: k1,
                    active: l1,
                },
                StarState::Branch {
                    component: k2,
                    active: l2,
                },
            ) if k1 == k2 => {
                if l2 == l1 + 1 && l1 < self.sizes[k1] {
                    (self.sizes[k1] - l1) as f64 * self.f[k1]
                } else if l2 + 1 == l1 {
                    l1 as f64
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }

    /// Outgoing transitions of `state` as `(target, rate)` pairs.
    pub fn neighbors(&self, state: StarState) -> Vec<(StarState, f64)> {
        match state {
            StarState::Root => (0..self.sizes.len())
                .map(|k| (StarState::branch(k, 1), self.sizes[k] as f64 * self.f[k]))
                .collect(),
            StarState::Branch { component, active } => {
                let mut out = Vec::with_capacity(2);
                if active < self.sizes[component] {
                    out.push((
                        StarState::branch(component, active + 1),
                        (self.sizes[component] - active) as f64 * self.f[component],
                    ));
                }
                let down = if active == 1 {
                    StarState::Root
                } else {
                    StarState::branch(component, active - 1)
                };
                out.push((down, active as f64));
                out
            }
        }
    }
}

/// Stationary distribution over the star space.
#[derive(Debug, Clone)]
pub struct StationaryStar {
    index: StarIndex,
    pi: Vec<f64>,
}

/// Stationary law of the aggregated process, computed in log space.
pub fn stationary_star(spec: &NetworkSpec, nu: f64) -> Result<StationaryStar, ModelError> {
    if !spec.is_partite() {
        return Err(ModelError::AggregationInvalid);
    }
    let index = StarIndex::new(spec);
    let mut logw = vec![0.0f64; index.len()];
    for (k, comp) in spec.components().iter().enumerate() {
        let logf = comp.rate.log_eval(nu);
        for l in 1..=comp.size {
            let id = index.id(StarState::branch(k, l)).unwrap();
            logw[id] = log_binomial(comp.size, l) + l as f64 * logf;
        }
    }
    Ok(StationaryStar {
        index,
        pi: normalize_log_weights(&logw),
    })
}

impl StationaryStar {
    pub fn index(&self) -> &StarIndex {
        &self.index
    }

    pub fn prob(&self, state: StarState) -> f64 {
        self.pi[self.index.id(state).expect("state in index")]
    }

    pub fn probs(&self) -> &[f64] {
        &self.pi
    }

    /// Total stationary mass of branch `k`.
    pub fn branch_mass(&self, k: usize) -> f64 {
        (1..=self.index.sizes[k])
            .map(|l| self.prob(StarState::branch(k, l)))
            .sum()
    }
}

/// `ln C(n, k)`.
pub fn log_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    let mut acc = 0.0f64;
    for i in 0..k {
        acc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    acc
}

/// Exponentiate and normalize a vector of log weights.
pub fn normalize_log_weights(logw: &[f64]) -> Vec<f64> {
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logw.iter().map(|&x| (x - m).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// Activity state on the full independent-set space: one bit per user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FullState(pub u32);

impl FullState {
    pub const EMPTY: FullState = FullState(0);

    pub fn active_count(&self) -> usize {
        self.0.count_ones() as usize
    }
}

/// Enumerated independent-set space of a network, with per-user layout.
#[derive(Debug, Clone)]
pub struct FullSpace {
    states: Vec<FullState>,
    index: HashMap<u32, usize>,
    /// First global bit of each component.
    offsets: Vec<usize>,
    /// Component of each global user bit.
    user_component: Vec<usize>,
    /// Same-component conflict neighbors of each user, as a global mask.
    conflict: Vec<u32>,
}

/// Enumerate all independent sets of the conflict graph (at most one active
/// component; intra edges respected). Hard cap of 24 users.
pub fn enumerate_full_space(spec: &NetworkSpec) -> Result<FullSpace, ModelError> {
    let users = spec.total_users();
    if users > 24 {
        return Err(ModelError::TooLarge(users));
    }
    let mut offsets = Vec::with_capacity(spec.k());
    let mut user_component = Vec::with_capacity(users);
    let mut next = 0usize;
    for (k, comp) in spec.components().iter().enumerate() {
        offsets.push(next);
        for _ in 0..comp.size {
            user_component.push(k);
        }
        next += comp.size;
    }
    let mut conflict = vec![0u32; users];
    for (k, comp) in spec.components().iter().enumerate() {
        for &(a, b) in &comp.intra_edges {
            conflict[offsets[k] + a] |= 1 << (offsets[k] + b);
            conflict[offsets[k] + b] |= 1 << (offsets[k] + a);
        }
    }

    let mut states = vec![FullState::EMPTY];
    for (k, comp) in spec.components().iter().enumerate() {
        let n = comp.size;
        for local in 1u32..(1u32 << n) {
            let mask = local << offsets[k];
            let independent = (0..n).all(|u| {
                let bit = 1u32 << (offsets[k] + u);
                mask & bit == 0 || mask & conflict[offsets[k] + u] == 0
            });
            if independent {
                states.push(FullState(mask));
            }
        }
    }
    let index = states.iter().enumerate().map(|(i, s)| (s.0, i)).collect();
    Ok(FullSpace {
        states,
        index,
        offsets,
        user_component,
        conflict,
    })
}

impl FullSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn states(&self) -> &[FullState] {
        &self.states
    }

    pub fn id(&self, state: FullState) -> Result<usize, ModelError> {
        self.index
            .get(&state.0)
            .copied()
            .ok_or_else(|| ModelError::BadState(format!("{state:?}")))
    }

    pub fn state(&self, id: usize) -> FullState {
        self.states[id]
    }

    pub fn user_count(&self) -> usize {
        self.user_component.len()
    }

    pub fn component_of_user(&self, user: usize) -> usize {
        self.user_component[user]
    }

    /// Component containing the active users of `state`, if any.
    pub fn component_of_state(&self, state: FullState) -> Option<usize> {
        if state.0 == 0 {
            None
        } else {
            Some(self.user_component[state.0.trailing_zeros() as usize])
        }
    }

    /// Mask with every user of component `k` active (feasible only without
    /// intra edges in that component).
    pub fn full_component_mask(&self, spec: &NetworkSpec, k: usize) -> FullState {
        let size = spec.size(k);
        FullState((((1u64 << size) - 1) as u32) << self.offsets[k])
    }

    /// Global user id from `(component, local index)`.
    pub fn user_id(&self, component: usize, local: usize) -> usize {
        self.offsets[component] + local
    }

    /// Feasible successors of `state` with their rates at `nu`.
    pub fn neighbors(
        &self,
        spec: &NetworkSpec,
        nu: f64,
        state: FullState,
    ) -> Vec<(FullState, f64)> {
        let users = self.user_count();
        let mut out = Vec::new();
        let active_component = self.component_of_state(state);
        for u in 0..users {
            let bit = 1u32 << u;
            if state.0 & bit != 0 {
                out.push((FullState(state.0 & !bit), 1.0));
            } else {
                let k = self.user_component[u];
                let cross_blocked = active_component.map_or(false, |ak| ak != k);
                let intra_blocked = state.0 & self.conflict[u] != 0;
                if !cross_blocked && !intra_blocked {
                    let local = u - self.offsets[k];
                    let f = spec.component(k).user_rate(local).eval(nu);
                    out.push((FullState(state.0 | bit), f));
                }
            }
        }
        out
    }

    /// Stationary distribution on the full space, in log space.
    pub fn stationary(&self, spec: &NetworkSpec, nu: f64) -> Vec<f64> {
        let logw: Vec<f64> = self
            .states
            .iter()
            .map(|s| {
                let mut acc = 0.0;
                for u in 0..self.user_count() {
                    if s.0 & (1 << u) != 0 {
                        let k = self.user_component[u];
                        acc += spec
                            .component(k)
                            .user_rate(u - self.offsets[k])
                            .log_eval(nu);
                    }
                }
                acc
            })
            .collect();
        normalize_log_weights(&logw)
    }

    /// Sum of stationary mass over the nonempty states of component `k`.
    pub fn component_mass(&self, spec: &NetworkSpec, nu: f64, k: usize) -> f64 {
        let pi = self.stationary(spec, nu);
        self.states
            .iter()
            .zip(&pi)
            .filter(|(s, _)| self.component_of_state(**s) == Some(k))
            .map(|(_, &p)| p)
            .sum()
    }
}
