//! The six commands behind the CLI.

use serde::Serialize;

use kpartite::asymptotics::{
    asym_mean_transition, classify, limit_law, AsymptoticsError, BetaValue, BranchClassification,
    LimitLaw,
};
use kpartite::chain::star_mean_hitting;
use kpartite::mixing::{mixing_lower_bound, t_mix_exact, MixingError};
use kpartite::model::{NetworkSpec, StarState};
use kpartite::simulate::{
    branch_occupancy_fractions, estimate_starvation, histogram_fd, ks_statistic,
    sample_transition, SimConfig, SimError,
};

use crate::config::{format_exponent, RunConfig};
use crate::output::{ensure_out_dir, num, write_csv, write_report, Envelope, TOOL};
use crate::{CliError, CommonArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Maximal tolerated fraction of horizon-censored replications.
const CENSORING_LIMIT: f64 = 1e-3;

pub fn run(name: &str, args: &CommonArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::from_path(&args.config)?;
    // apply overrides before echoing the config, so a rerun from the report
    // reproduces this run exactly
    if args.nu.is_some() || args.seed.is_some() || args.reps.is_some() {
        let mut run = cfg.run_section();
        if let Some(nu) = args.nu {
            run.nu = nu;
        }
        if let Some(seed) = args.seed {
            run.seed = seed;
        }
        if let Some(reps) = args.reps {
            run.replications = reps;
        }
        cfg.run = Some(run);
        if name == "mix" {
            if let (Some(nu), Some(mix)) = (args.nu, cfg.mix.as_mut()) {
                mix.nus = vec![nu];
            }
        }
    }
    ensure_out_dir(&args.out)?;
    match name {
        "classify" => cmd_classify(&cfg, args),
        "mean" => cmd_mean(&cfg, args),
        "law" => cmd_law(&cfg, args),
        "simulate" => cmd_simulate(&cfg, args),
        "starve" => cmd_starve(&cfg, args),
        "mix" => cmd_mix(&cfg, args),
        _ => unreachable!("unknown command"),
    }
}

fn classify_from(cfg: &RunConfig, spec: &NetworkSpec) -> Result<BranchClassification, CliError> {
    let (k1, l1, k2, l2) = cfg.transition_indices(spec)?;
    classify(spec, k1, l1, k2, l2).map_err(map_asym)
}

fn map_asym(e: AsymptoticsError) -> CliError {
    match e {
        AsymptoticsError::SameBranch
        | AsymptoticsError::LevelOutOfRange { .. }
        | AsymptoticsError::Model(_) => CliError::config(e.to_string()),
        other => CliError::numeric(other.to_string()),
    }
}

fn map_sim(e: SimError) -> CliError {
    match e {
        SimError::InvalidConfig(_) | SimError::Model(_) => CliError::config(e.to_string()),
        other => CliError::numeric(other.to_string()),
    }
}

fn map_mixing(e: MixingError) -> CliError {
    match e {
        MixingError::Model(_)
        | MixingError::BadEpsilon { .. }
        | MixingError::NoEligibleBranch(_)
        | MixingError::EmptySubset
        | MixingError::FullSubset => CliError::config(e.to_string()),
        other => CliError::numeric(other.to_string()),
    }
}

fn one_based(indices: &[usize]) -> Vec<usize> {
    indices.iter().map(|&k| k + 1).collect()
}

fn beta_strings(c: &BranchClassification, k_count: usize) -> Vec<Option<String>> {
    (0..k_count)
        .map(|k| {
            c.beta(k).map(|b| match b {
                BetaValue::Zero => "0".to_string(),
                BetaValue::Infinite => "inf".to_string(),
                BetaValue::Finite(v) => format!("{v}"),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct AsymMeanOut {
    coefficient: f64,
    exponent: String,
}

#[derive(Serialize)]
struct ClassifyOut {
    source: (usize, usize),
    target: (usize, usize),
    scenario: String,
    scenario_family: String,
    alpha: f64,
    gamma: Vec<f64>,
    beta: Vec<Option<String>>,
    dominant: Vec<usize>,
    non_attracting: Vec<usize>,
    attracting: Vec<usize>,
    strongly_attracting: Vec<usize>,
    gamma_n: f64,
    gamma_a: f64,
    gamma_s: f64,
    beta_a: f64,
    asym_mean: AsymMeanOut,
    law_mean: f64,
    atom_at_zero: f64,
}

fn cmd_classify(cfg: &RunConfig, args: &CommonArgs) -> Result<(), CliError> {
    let spec = cfg.network()?;
    let c = classify_from(cfg, &spec)?;
    let mean = asym_mean_transition(&c, &spec);
    let law = limit_law(&c);
    let t = cfg.transition()?;
    let outputs = ClassifyOut {
        source: t.source,
        target: t.target,
        scenario: c.scenario.label().to_string(),
        scenario_family: c.scenario.family().label().to_string(),
        alpha: c.alpha(),
        gamma: c.gamma_all(),
        beta: beta_strings(&c, spec.k()),
        dominant: one_based(&c.dominant),
        non_attracting: one_based(&c.non_attracting),
        attracting: one_based(&c.attracting),
        strongly_attracting: one_based(&c.strongly_attracting),
        gamma_n: c.gamma_n(),
        gamma_a: c.gamma_a(),
        gamma_s: c.gamma_s(),
        beta_a: c.beta_a(),
        asym_mean: AsymMeanOut {
            coefficient: mean.coefficient,
            exponent: format_exponent(mean.exponent),
        },
        law_mean: law.mean(),
        atom_at_zero: law.atom_at_zero(),
    };
    println!(
        "scenario {} (family {}), alpha = {}, mean transition ~ {} * nu^{}",
        outputs.scenario,
        outputs.scenario_family,
        outputs.alpha,
        outputs.asym_mean.coefficient,
        outputs.asym_mean.exponent
    );
    let envelope = Envelope {
        tool: TOOL,
        version: VERSION,
        command: "classify",
        seed: cfg.run_section().seed,
        config: cfg,
        outputs,
    };
    write_report(&args.out, &envelope)?;
    Ok(())
}

#[derive(Serialize)]
struct MeanOut {
    nu: f64,
    asym: AsymMeanOut,
    asym_at_nu: f64,
    exact_mean: f64,
    ratio: f64,
}

fn cmd_mean(cfg: &RunConfig, args: &CommonArgs) -> Result<(), CliError> {
    let spec = cfg.network()?;
    let c = classify_from(cfg, &spec)?;
    let mean = asym_mean_transition(&c, &spec);
    let run = cfg.run_section();
    let exact = star_mean_hitting(
        &spec,
        run.nu,
        cfg.source_state(&spec)?,
        cfg.target_state(&spec)?,
    )
    .map_err(|e| CliError::numeric(e.to_string()))?;
    let asym_at_nu = mean.eval(run.nu);
    let outputs = MeanOut {
        nu: run.nu,
        asym: AsymMeanOut {
            coefficient: mean.coefficient,
            exponent: format_exponent(mean.exponent),
        },
        asym_at_nu,
        exact_mean: exact,
        ratio: exact / asym_at_nu,
    };
    println!(
        "exact mean {} vs asymptotic {} (ratio {})",
        outputs.exact_mean, outputs.asym_at_nu, outputs.ratio
    );
    let envelope = Envelope {
        tool: TOOL,
        version: VERSION,
        command: "mean",
        seed: run.seed,
        config: cfg,
        outputs,
    };
    write_report(&args.out, &envelope)?;
    Ok(())
}

#[derive(Serialize)]
struct LawOut {
    scenario: String,
    mean: f64,
    atom_at_zero: f64,
    x_max: f64,
    points: usize,
    law_csv: String,
}

fn law_grid(cfg: &RunConfig, law: &LimitLaw) -> (f64, usize) {
    let section = cfg.law.clone().unwrap_or_default();
    let x_max = if section.x_max > 0.0 {
        section.x_max
    } else {
        (10.0 * law.mean()).max(1.0)
    };
    (x_max, section.points.max(2))
}

fn cmd_law(cfg: &RunConfig, args: &CommonArgs) -> Result<(), CliError> {
    let spec = cfg.network()?;
    let c = classify_from(cfg, &spec)?;
    let law = limit_law(&c);
    let (x_max, points) = law_grid(cfg, &law);
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let x = x_max * i as f64 / (points - 1) as f64;
        let pdf = law.pdf(x).map_err(map_asym)?;
        let cdf = law.cdf(x).map_err(map_asym)?;
        rows.push(format!("{},{},{}", num(x), num(pdf), num(cdf)));
    }
    let preamble = vec![format!("# atom_at_zero = {}", num(law.atom_at_zero()))];
    let path = write_csv(&args.out, "law.csv", &preamble, "x,pdf,cdf", rows)?;
    println!("law table written to {}", path.display());
    let outputs = LawOut {
        scenario: law.scenario().label().to_string(),
        mean: law.mean(),
        atom_at_zero: law.atom_at_zero(),
        x_max,
        points,
        law_csv: "law.csv".into(),
    };
    let envelope = Envelope {
        tool: TOOL,
        version: VERSION,
        command: "law",
        seed: cfg.run_section().seed,
        config: cfg,
        outputs,
    };
    write_report(&args.out, &envelope)?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateOut {
    nu: f64,
    replications: usize,
    censored: usize,
    exact_mean: f64,
    scaled_sample_mean: f64,
    scenario: String,
    atom_at_zero: f64,
    /// Plain two-sided KS of the scaled samples against the law CDF.
    ks: f64,
    /// Atom-exact comparison when the law has mass at zero: empirical atom
    /// frequency (paths that never visit a dominant branch) against the atom,
    /// and the conditional KS of the remaining paths.
    #[serde(skip_serializing_if = "Option::is_none")]
    ks_atom_aware: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical_atom: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
    branch_occupancy: Vec<f64>,
    samples_csv: String,
    histogram_csv: String,
}

fn cmd_simulate(cfg: &RunConfig, args: &CommonArgs) -> Result<(), CliError> {
    let spec = cfg.network()?;
    let c = classify_from(cfg, &spec)?;
    let law = limit_law(&c);
    let run = cfg.run_section();
    let source = cfg.source_state(&spec)?;
    let target = cfg.target_state(&spec)?;
    let exact_mean = star_mean_hitting(&spec, run.nu, source, target)
        .map_err(|e| CliError::numeric(e.to_string()))?;

    let sim_cfg = SimConfig {
        nu: run.nu,
        replications: run.replications,
        seed: run.seed,
        source,
        target,
        horizon: Some(run.horizon_factor * exact_mean),
    };
    let report = sample_transition(&spec, &sim_cfg).map_err(map_sim)?;

    let scaled: Vec<f64> = report.samples.iter().map(|&t| t / exact_mean).collect();
    let mut rows = Vec::with_capacity(scaled.len());
    for &x in &scaled {
        rows.push(num(x));
    }
    write_csv(&args.out, "samples.csv", &[], "scaled_time", rows)?;
    let hist = histogram_fd(&scaled);
    write_csv(
        &args.out,
        "histogram.csv",
        &[],
        "bin_left,bin_right,density",
        hist.iter()
            .map(|&(l, r, d)| format!("{},{},{}", num(l), num(r), num(d))),
    )?;

    let mut sorted = scaled.clone();
    let ks = ks_statistic(&mut sorted, |x| law.cdf(x).unwrap_or(1.0));

    let atom = law.atom_at_zero();
    let mut warning = None;
    let mut ks_atom_aware = None;
    let mut empirical_atom = None;
    if atom > 0.0 {
        // a path realizes the atom when it never enters a dominant branch
        // other than the initial one
        let watched: Vec<usize> = c
            .dominant
            .iter()
            .cloned()
            .filter(|&k| k != c.k1)
            .collect();
        let atom_flags: Vec<bool> = report
            .branch_time
            .iter()
            .map(|occ| watched.iter().all(|&k| occ[k] == 0.0))
            .collect();
        let n_atom = atom_flags.iter().filter(|&&f| f).count();
        let q_hat = n_atom as f64 / scaled.len() as f64;
        empirical_atom = Some(q_hat);
        if atom >= 1.0 {
            warning = Some(
                "the limit law is a point mass at zero; the scaled distribution is degenerate and \
                 the plain KS statistic does not converge"
                    .into(),
            );
            ks_atom_aware = Some((q_hat - atom).abs());
        } else {
            let mut continuous: Vec<f64> = scaled
                .iter()
                .zip(&atom_flags)
                .filter(|(_, &is_atom)| !is_atom)
                .map(|(&x, _)| x)
                .collect();
            let cond_ks = if continuous.is_empty() {
                1.0
            } else {
                ks_statistic(&mut continuous, |x| {
                    ((law.cdf(x).unwrap_or(1.0) - atom) / (1.0 - atom)).clamp(0.0, 1.0)
                })
            };
            ks_atom_aware = Some(cond_ks.max((q_hat - atom).abs()));
        }
    }

    let fractions = branch_occupancy_fractions(&report, c.k2);
    let mut branch_occupancy = vec![0.0; spec.k()];
    for (k, f) in fractions {
        branch_occupancy[k] = f;
    }

    let scaled_sample_mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let outputs = SimulateOut {
        nu: run.nu,
        replications: run.replications,
        censored: report.censored,
        exact_mean,
        scaled_sample_mean,
        scenario: law.scenario().label().to_string(),
        atom_at_zero: atom,
        ks,
        ks_atom_aware,
        empirical_atom,
        warning,
        branch_occupancy,
        samples_csv: "samples.csv".into(),
        histogram_csv: "histogram.csv".into(),
    };
    println!(
        "scenario {}: {} samples, ks = {}{}",
        outputs.scenario,
        scaled.len(),
        outputs.ks,
        outputs
            .ks_atom_aware
            .map(|k| format!(" (atom-aware {k})"))
            .unwrap_or_default()
    );
    let envelope = Envelope {
        tool: TOOL,
        version: VERSION,
        command: "simulate",
        seed: run.seed,
        config: cfg,
        outputs,
    };
    write_report(&args.out, &envelope)?;

    if report.censored as f64 > CENSORING_LIMIT * run.replications as f64 {
        return Err(CliError::Censoring {
            censored: report.censored,
            total: run.replications,
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct StarveRow {
    omega: f64,
    window: f64,
    p_empirical: f64,
    wilson_low: f64,
    wilson_high: f64,
    limit_bound: f64,
}

#[derive(Serialize)]
struct StarveOut {
    nu: f64,
    replications: usize,
    /// Mean transition time to the first state of the target branch, used as
    /// the window unit.
    mean_to_target_entry: f64,
    rows: Vec<StarveRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
    table_csv: String,
}

fn cmd_starve(cfg: &RunConfig, args: &CommonArgs) -> Result<(), CliError> {
    let spec = cfg.network()?;
    let omegas = cfg
        .starve
        .as_ref()
        .ok_or_else(|| CliError::config("config needs a [starve] section".into()))?
        .omegas
        .clone();
    let run = cfg.run_section();
    let (k1, l1, k2, _) = cfg.transition_indices(&spec)?;
    // the law of the time to first enter the target branch
    let c = classify(&spec, k1, l1, k2, 1).map_err(map_asym)?;
    let law = limit_law(&c);
    let source = StarState::branch(k1, l1);
    let mean_entry = star_mean_hitting(&spec, run.nu, source, StarState::branch(k2, 1))
        .map_err(|e| CliError::numeric(e.to_string()))?;

    let mut rows = Vec::with_capacity(omegas.len());
    let mut warning = None;
    for &omega in &omegas {
        if omega < 0.0 {
            return Err(CliError::config(format!("omega {omega} must be >= 0")));
        }
        if omega >= run.horizon_factor {
            warning = Some(format!(
                "omega {omega} reaches the censoring horizon factor {}",
                run.horizon_factor
            ));
        }
        let window = omega * mean_entry;
        let est = estimate_starvation(
            &spec,
            run.nu,
            k2,
            window,
            run.replications,
            run.seed,
            source,
        )
        .map_err(map_sim)?;
        let limit_bound = if omega == 0.0 {
            1.0
        } else {
            1.0 - law.cdf(omega).map_err(map_asym)?
        };
        rows.push(StarveRow {
            omega,
            window,
            p_empirical: est.probability,
            wilson_low: est.wilson_low,
            wilson_high: est.wilson_high,
            limit_bound,
        });
    }
    let path = write_csv(
        &args.out,
        "table.csv",
        &[],
        "omega,window,p_empirical,wilson_low,wilson_high,limit_bound",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                num(r.omega),
                num(r.window),
                num(r.p_empirical),
                num(r.wilson_low),
                num(r.wilson_high),
                num(r.limit_bound)
            )
        }),
    )?;
    println!("starvation table written to {}", path.display());
    let outputs = StarveOut {
        nu: run.nu,
        replications: run.replications,
        mean_to_target_entry: mean_entry,
        rows,
        warning,
        table_csv: "table.csv".into(),
    };
    let envelope = Envelope {
        tool: TOOL,
        version: VERSION,
        command: "starve",
        seed: run.seed,
        config: cfg,
        outputs,
    };
    write_report(&args.out, &envelope)?;
    Ok(())
}

#[derive(Serialize)]
struct MixRow {
    nu: f64,
    phi_kappa: f64,
    bound: f64,
    asymptotic_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_mix: Option<f64>,
}

#[derive(Serialize)]
struct MixOut {
    kappa: usize,
    r: f64,
    epsilon: f64,
    rows: Vec<MixRow>,
    table_csv: String,
}

fn cmd_mix(cfg: &RunConfig, args: &CommonArgs) -> Result<(), CliError> {
    let spec = cfg.network()?;
    let mix = cfg
        .mix
        .as_ref()
        .ok_or_else(|| CliError::config("config needs a [mix] section".into()))?;
    let mut rows = Vec::with_capacity(mix.nus.len());
    let mut kappa = 0usize;
    for &nu in &mix.nus {
        let bound = mixing_lower_bound(&spec, nu, mix.r, mix.epsilon).map_err(map_mixing)?;
        kappa = bound.kappa;
        let t_mix = if mix.exact {
            Some(t_mix_exact(&spec, nu, mix.epsilon).map_err(map_mixing)?)
        } else {
            None
        };
        rows.push(MixRow {
            nu,
            phi_kappa: bound.phi_kappa,
            bound: bound.bound,
            asymptotic_bound: bound.asymptotic.eval(nu),
            t_mix,
        });
    }
    let path = write_csv(
        &args.out,
        "table.csv",
        &[],
        "nu,phi_kappa,bound,asymptotic_bound,t_mix",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                num(r.nu),
                num(r.phi_kappa),
                num(r.bound),
                num(r.asymptotic_bound),
                r.t_mix.map(num).unwrap_or_default()
            )
        }),
    )?;
    println!("mixing table written to {}", path.display());
    let outputs = MixOut {
        kappa: kappa + 1,
        r: mix.r,
        epsilon: mix.epsilon,
        rows,
        table_csv: "table.csv".into(),
    };
    let envelope = Envelope {
        tool: TOOL,
        version: VERSION,
        command: "mix",
        seed: cfg.run_section().seed,
        config: cfg,
        outputs,
    };
    write_report(&args.out, &envelope)?;
    Ok(())
}
