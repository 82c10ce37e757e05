//! Run configuration: a single TOML document with exact rational exponents
//! written as `"p/q"` strings. Unknown keys are rejected so a config echoed
//! into a report reruns identically.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use kpartite::model::{validate_spec, Component, NetworkSpec, PowerLawRate, StarState};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transition: Option<TransitionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starve: Option<StarveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix: Option<MixSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub sizes: Vec<usize>,
    /// Per-component rate exponents as exact rationals, e.g. `"3/4"`.
    pub exponents: Vec<String>,
    /// Per-component rate coefficients; defaults to all ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    /// Intra-component conflict edges (1-based user pairs).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intra: Vec<IntraSection>,
    /// Per-user rate overrides (1-based component).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rates: Vec<UserRatesSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntraSection {
    pub component: usize,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRatesSection {
    pub component: usize,
    pub exponents: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSection {
    /// 1-based `(component, level)`.
    pub source: (usize, usize),
    pub target: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Censoring horizon as a multiple of the exact mean transition time.
    #[serde(default = "default_horizon_factor")]
    pub horizon_factor: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            nu: default_nu(),
            replications: default_replications(),
            seed: 0,
            horizon_factor: default_horizon_factor(),
        }
    }
}

fn default_nu() -> f64 {
    150.0
}

fn default_replications() -> usize {
    20_000
}

fn default_horizon_factor() -> f64 {
    1e4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    /// Upper end of the evaluation grid; 0 means ten times the law mean.
    #[serde(default)]
    pub x_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

impl Default for LawSection {
    fn default() -> Self {
        Self {
            x_max: 0.0,
            points: default_points(),
        }
    }
}

fn default_points() -> usize {
    401
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarveSection {
    /// Window lengths as multiples of the mean transition time to `(k2, 1)`.
    pub omegas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixSection {
    pub r: f64,
    pub epsilon: f64,
    pub nus: Vec<f64>,
    /// Also compute the exact mixing time by uniformization.
    #[serde(default)]
    pub exact: bool,
}

pub fn parse_exponent(text: &str) -> Result<Rational64, CliError> {
    let bad = || CliError::config(format!("exponent '{text}' is not an integer or p/q rational"));
    let text = text.trim();
    if let Some((p, q)) = text.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        Ok(Rational64::new(p, q))
    } else {
        let p: i64 = text.parse().map_err(|_| bad())?;
        Ok(Rational64::new(p, 1))
    }
}

pub fn format_exponent(r: Rational64) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::config(format!("bad config: {e}")))?;
        Ok(cfg)
    }

    /// Build the validated network.
    pub fn network(&self) -> Result<NetworkSpec, CliError> {
        let n = &self.network;
        if n.sizes.len() != n.exponents.len() {
            return Err(CliError::config(
                "sizes and exponents must have the same length".into(),
            ));
        }
        let coeffs = match &n.coefficients {
            Some(c) => {
                if c.len() != n.sizes.len() {
                    return Err(CliError::config(
                        "coefficients must match the component count".into(),
                    ));
                }
                c.clone()
            }
            None => vec![1.0; n.sizes.len()],
        };
        let mut components = Vec::with_capacity(n.sizes.len());
        for (k, (&size, exp)) in n.sizes.iter().zip(&n.exponents).enumerate() {
            let rate = PowerLawRate::new(coeffs[k], parse_exponent(exp)?)
                .map_err(|e| CliError::config(format!("component {}: {e}", k + 1)))?;
            components.push(Component::uniform(size, rate));
        }
        for intra in &n.intra {
            let k = check_component(intra.component, components.len())?;
            for &(a, b) in &intra.edges {
                if a == 0 || b == 0 {
                    return Err(CliError::config("intra edges are 1-based user pairs".into()));
                }
                components[k].intra_edges.push((a - 1, b - 1));
            }
        }
        for rates in &n.rates {
            let k = check_component(rates.component, components.len())?;
            let coeffs = match &rates.coefficients {
                Some(c) => c.clone(),
                None => vec![1.0; rates.exponents.len()],
            };
            if coeffs.len() != rates.exponents.len() {
                return Err(CliError::config(format!(
                    "component {}: user coefficients must match exponents",
                    rates.component
                )));
            }
            let mut user_rates = Vec::with_capacity(rates.exponents.len());
            for (u, exp) in rates.exponents.iter().enumerate() {
                user_rates.push(
                    PowerLawRate::new(coeffs[u], parse_exponent(exp)?)
                        .map_err(|e| CliError::config(format!("user rate: {e}")))?,
                );
            }
            components[k].user_rates = Some(user_rates);
        }
        validate_spec(components).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn transition(&self) -> Result<&TransitionSection, CliError> {
        self.transition
            .as_ref()
            .ok_or_else(|| CliError::config("config needs a [transition] section".into()))
    }

    /// 0-based `(k1, l1, k2, l2)` after bounds checks.
    pub fn transition_indices(&self, spec: &NetworkSpec) -> Result<(usize, usize, usize, usize), CliError> {
        let t = self.transition()?;
        let (k1, l1) = state_indices(t.source, spec)?;
        let (k2, l2) = state_indices(t.target, spec)?;
        Ok((k1, l1, k2, l2))
    }

    pub fn source_state(&self, spec: &NetworkSpec) -> Result<StarState, CliError> {
        let t = self.transition()?;
        let (k, l) = state_indices(t.source, spec)?;
        Ok(StarState::branch(k, l))
    }

    pub fn target_state(&self, spec: &NetworkSpec) -> Result<StarState, CliError> {
        let t = self.transition()?;
        let (k, l) = state_indices(t.target, spec)?;
        Ok(StarState::branch(k, l))
    }

    pub fn run_section(&self) -> RunSection {
        self.run.clone().unwrap_or_default()
    }
}

fn check_component(one_based: usize, count: usize) -> Result<usize, CliError> {
    if one_based == 0 || one_based > count {
        return Err(CliError::config(format!(
            "component {one_based} outside 1..={count}"
        )));
    }
    Ok(one_based - 1)
}

fn state_indices(pair: (usize, usize), spec: &NetworkSpec) -> Result<(usize, usize), CliError> {
    let (k1, l) = pair;
    let k = check_component(k1, spec.k())?;
    if l == 0 || l > spec.size(k) {
        return Err(CliError::config(format!(
            "level {l} outside 1..={} of component {k1}",
            spec.size(k)
        )));
    }
    Ok((k, l))
}
