//! Subcommand implementations. Each writes its files and returns their paths.

use std::path::PathBuf;

use rayon::prelude::*;
use scatter_core::analytic::{
    confined_stationary, invariant_density, wandering_stationary, StationaryReport, Transport,
};
use scatter_core::cgf::{
    cgf_left_derivative, cgf_value, closed_slope, equilibrium_second_cumulant, green_kubo_check, implicit_slope,
    Branch, CgfQuery, GreenKubo, SecondCumulant,
};
use scatter_core::model::{chain_stationary_distribution, InverseTempProfile, ModelKind, Sign};
use scatter_core::sampling::{mean_interarrival, RngStream};
use scatter_core::selfconsistent::{continuum_error, ContinuumProfile, ProfileSolution};
use scatter_core::simulate::{
    estimate_cgf_population, estimate_empirical_cgf, run_basic, run_replicas, stream_id, CurrentSpec, EstimatorKind,
    RunOutput,
};
use scatter_core::stats::mean_and_se;
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, ModelSpec};
use crate::error::{CliError, CliResult};
use crate::output::{
    build_info, num, opt_num, write_json, BuildInfo, OutputDir, Table, BASIC_SCHEMA, CGF_SCHEMA, PROFILE_SCHEMA,
    SIMULATE_SCHEMA, SIMULATE_SUMMARY_SCHEMA, STATIONARY_SCHEMA,
};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Divides horizons and replica counts by ten.
    pub fast: bool,
}

const STREAM_RULE: &str = "(replica << 32) | tracer";

impl RunOptions {
    fn seed(&self, exp: &Experiment) -> u64 {
        self.seed.unwrap_or(exp.config.seed)
    }

    fn output(&self, exp: &Experiment) -> CliResult<OutputDir> {
        let dir = self
            .out_dir
            .clone()
            .or_else(|| exp.config.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        OutputDir::create(&dir, &exp.config.output.prefix)
    }

    fn scale_time(&self, t: f64) -> f64 {
        if self.fast {
            t / 10.0
        } else {
            t
        }
    }

    fn scale_count(&self, n: usize) -> usize {
        if self.fast {
            (n / 10).max(1)
        } else {
            n
        }
    }
}

fn need_profile(exp: &Experiment) -> CliResult<&InverseTempProfile> {
    exp.profile
        .as_ref()
        .ok_or_else(|| CliError::Validation("this command needs a profile".into()))
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    command: &'static str,
    build: BuildInfo,
    seed: u64,
    stream_rule: &'static str,
    t_end: f64,
    t_burn: f64,
    n_replicas: usize,
    config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    basic: Option<BasicSummary>,
    files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct BasicSummary {
    collisions: u64,
    collision_rate: f64,
    renewal_rate: f64,
    samples: usize,
}

fn closed_report(model: &ModelKind) -> CliResult<Option<StationaryReport>> {
    Ok(match model {
        ModelKind::Wandering { profile, n_tracers } => Some(wandering_stationary(profile, *n_tracers)?),
        ModelKind::Confined { profile } => Some(confined_stationary(profile)),
        _ => None,
    })
}

type Extract = fn(&RunOutput) -> Vec<f64>;

const QUANTITIES: [(&str, Extract); 4] = [
    ("current_rate", |o| o.ledger.current_rates()),
    ("energy_rate", |o| o.ledger.energy_rates()),
    ("collision_rate", |o| o.ledger.collision_rates()),
    ("entropy_rate", |o| vec![o.ledger.entropy_rate()]),
];

fn closed_values(r: &StationaryReport, quantity: &str) -> Vec<f64> {
    match quantity {
        "current_rate" => r.currents.clone(),
        "energy_rate" => r.energy_flows.clone(),
        "collision_rate" => r.frequencies.clone(),
        _ => vec![r.entropy_rate],
    }
}

/// Runs the configured model and writes per-replica and aggregated ledger rates.
pub fn simulate(exp: &Experiment, opts: &RunOptions) -> CliResult<Vec<PathBuf>> {
    let t_end = exp
        .config
        .t_end
        .ok_or_else(|| CliError::Validation("simulate needs t_end".into()))?;
    let t_end = opts.scale_time(t_end);
    let seed = opts.seed(exp);
    let out = opts.output(exp)?;
    let cfg = exp.config.run_config(t_end, seed);
    cfg.validate()?;
    let n_replicas = opts.scale_count(exp.config.n_replicas);
    let mut files = Vec::new();
    let mut basic = None;

    if let ModelSpec::Basic {
        beta,
        q0,
        p0,
        sample_spacing,
    } = exp.config.model
    {
        let times: Vec<f64> = (1..)
            .map(|k| k as f64 * sample_spacing)
            .take_while(|t| *t <= t_end)
            .collect();
        let mut rng = RngStream::new(seed, stream_id(0, 0));
        let run = run_basic(beta, q0, p0, t_end, &times, &mut rng)?;
        let mut table = Table::new(BASIC_SCHEMA, &["time", "q", "p", "age", "residual"]);
        for s in &run.samples {
            table.push(vec![num(s.time), num(s.q), num(s.p), num(s.age), num(s.residual)]);
        }
        let path = out.file("basic.csv");
        table.write(&path)?;
        files.push(path);
        basic = Some(BasicSummary {
            collisions: run.collisions,
            collision_rate: run.collisions as f64 / t_end,
            renewal_rate: 1.0 / mean_interarrival(beta),
            samples: run.samples.len(),
        });
    } else {
        let runs = run_replicas(&exp.model, &cfg, n_replicas)?;
        let mut table = Table::new(SIMULATE_SCHEMA, &["replica", "quantity", "index", "value"]);
        for (r, run) in runs.iter().enumerate() {
            for (name, extract) in QUANTITIES {
                for (i, v) in extract(run).into_iter().enumerate() {
                    table.push(vec![r.to_string(), name.into(), i.to_string(), num(v)]);
                }
            }
        }
        let path = out.file("simulate.csv");
        table.write(&path)?;
        files.push(path);

        let closed = closed_report(&exp.model)?;
        let mut summary = Table::new(
            SIMULATE_SUMMARY_SCHEMA,
            &["quantity", "index", "mean", "std_error", "closed_form"],
        );
        for (name, extract) in QUANTITIES {
            let per_replica: Vec<Vec<f64>> = runs.iter().map(extract).collect();
            let exact = closed.as_ref().map(|r| closed_values(r, name));
            for i in 0..per_replica[0].len() {
                let xs: Vec<f64> = per_replica.iter().map(|v| v[i]).collect();
                let (m, se) = mean_and_se(&xs);
                summary.push(vec![
                    name.into(),
                    i.to_string(),
                    num(m),
                    if xs.len() > 1 { num(se) } else { String::new() },
                    opt_num(exact.as_ref().map(|e| e[i])),
                ]);
            }
        }
        let path = out.file("simulate_summary.csv");
        summary.write(&path)?;
        files.push(path);
    }

    let json = out.file("simulate.json");
    files.push(json.clone());
    write_json(
        &json,
        &SimulateSummary {
            command: "simulate",
            build: build_info(),
            seed,
            stream_rule: STREAM_RULE,
            t_end,
            t_burn: cfg.burn_in(),
            n_replicas,
            config: &exp.config,
            basic,
            files: files.clone(),
        },
    )?;
    Ok(files)
}

fn push_series(table: &mut Table, quantity: &str, values: &[f64], formula: &str) {
    for (i, v) in values.iter().enumerate() {
        table.push(vec![quantity.into(), i.to_string(), num(*v), formula.into()]);
    }
}

/// Closed-form stationary quantities tagged with the formula that produced them.
pub fn stationary_table(model: &ModelKind) -> CliResult<Table> {
    let mut t = Table::new(STATIONARY_SCHEMA, &["quantity", "index", "value", "formula"]);
    if let Some(r) = closed_report(model)? {
        if let Some(z) = r.z_total {
            push_series(&mut t, "z_total", &[z], "wandering_normalization");
        }
        push_series(&mut t, "z_link", &r.z_links, "link_normalization");
        push_series(&mut t, "current", &r.currents, "link_current");
        push_series(&mut t, "energy_flow", &r.energy_flows, "energy_flow");
        push_series(&mut t, "entropy_rate", &[r.entropy_rate], "entropy_production");
        push_series(&mut t, "frequency", &r.frequencies, "collision_frequency");
        push_series(&mut t, "conductivity", &r.conductivities, "conductivity");
    }
    if let ModelKind::General { matrix, .. } = model {
        let nu = chain_stationary_distribution(matrix)?;
        push_series(&mut t, "chain_stationary", &nu, "chain_stationary");
    }
    let density = invariant_density(model)?;
    let masses: Vec<f64> = density
        .cells
        .iter()
        .flat_map(|c| [Sign::Plus, Sign::Minus].map(|s| c.mass(s, 0.0, f64::INFINITY)))
        .collect();
    push_series(&mut t, "cell_sign_mass", &masses, "invariant_density");
    Ok(t)
}

fn conductivities(model: &ModelKind) -> CliResult<Option<Vec<f64>>> {
    Ok(closed_report(model)?.map(|r| r.conductivities))
}

/// Rows `(n, T_n, h(n/N), κ_n)`; the continuum column is the confined
/// continuum law for confined tracers and the straight line otherwise.
pub fn profile_table(exp: &Experiment) -> CliResult<Table> {
    let profile = need_profile(exp)?;
    let temps = profile.temperatures();
    let n = profile.n_links();
    let (t_left, t_right) = (temps[0], temps[n]);
    let confined = exp.config.transport() == Some(Transport::Confined);
    let continuum = ContinuumProfile::new(t_left, t_right)?;
    let kappa = conductivities(&exp.model)?;
    let formula = match exp.solution {
        Some(ProfileSolution {
            transport: Transport::Confined,
            ..
        }) => "confined_profile",
        Some(_) => "linear_profile",
        None => "explicit",
    };
    let mut t = Table::new(
        PROFILE_SCHEMA,
        &["n", "temperature", "continuum_temperature", "conductivity", "formula"],
    );
    for (i, temp) in temps.iter().enumerate() {
        let x = i as f64 / n as f64;
        let h = if confined {
            continuum.at(x)
        } else {
            t_left + (t_right - t_left) * x
        };
        let k = kappa.as_ref().and_then(|k| k.get(i).copied());
        t.push(vec![i.to_string(), num(*temp), num(h), opt_num(k), formula.into()]);
    }
    Ok(t)
}

fn transport_of(exp: &Experiment) -> CliResult<Transport> {
    exp.config
        .transport()
        .ok_or_else(|| CliError::Validation("CGF computations need a wandering or confined model".into()))
}

/// The λ sweep with solver diagnostics, symmetry gaps and optional empirical estimates.
pub fn cgf_table(exp: &Experiment, opts: &RunOptions) -> CliResult<Table> {
    let spec = exp
        .config
        .cgf
        .as_ref()
        .ok_or_else(|| CliError::Validation("this command needs a cgf section".into()))?;
    let profile = need_profile(exp)?.clone();
    let transport = transport_of(exp)?;
    let base = CgfQuery::new(spec.link, 0.0, profile.clone(), transport)?;
    let delta = base.delta_beta();
    let solved = exp
        .lambdas
        .par_iter()
        .map(|&l| {
            let r = cgf_value(&base.with_lambda(l)?)?;
            let mirror = cgf_value(&base.with_lambda(delta - l)?)?;
            Ok((r, (r.value - mirror.value).abs()))
        })
        .collect::<scatter_core::Result<Vec<_>>>()?;

    let current = CurrentSpec {
        transport,
        profile,
        link: spec.link,
    };
    let seed = opts.seed(exp);
    let mut t = Table::new(
        CGF_SCHEMA,
        &[
            "lambda",
            "value",
            "branch",
            "root_residual",
            "quadrature_error_bound",
            "gc_mirror_gap",
            "formula",
            "estimator",
            "estimate",
            "estimate_std_error",
            "max_weight_share",
            "heavy_tail_warning",
        ],
    );
    for (k, (&l, (r, gap))) in exp.lambdas.iter().zip(solved).enumerate() {
        let formula = match r.branch {
            Branch::ZeroPlateau => "plateau",
            Branch::PositiveRoot => "cgf_root",
        };
        let mut row = vec![
            num(l),
            num(r.value),
            format!("{:?}", r.branch),
            num(r.root_residual),
            num(r.quadrature_error_bound),
            num(gap),
            formula.into(),
        ];
        match &spec.empirical {
            None => row.extend(std::iter::repeat_n(String::new(), 5)),
            Some(e) => {
                let horizon = opts.scale_time(e.horizon);
                let n = opts.scale_count(e.n_samples);
                let s = seed.wrapping_add(k as u64);
                let est = match e.estimator {
                    EstimatorKind::Direct => estimate_empirical_cgf(&current, l, horizon, n, s)?,
                    EstimatorKind::Population => {
                        estimate_cgf_population(&current, l, horizon, n, e.resample_interval, s)?
                    }
                };
                row.extend([
                    format!("{:?}", est.estimator).to_lowercase(),
                    num(est.value),
                    num(est.std_error),
                    num(est.max_weight_share),
                    est.heavy_tail_warning.to_string(),
                ]);
            }
        }
        t.push(row);
    }
    Ok(t)
}

#[derive(Debug, Serialize)]
pub struct CgfDerivatives {
    pub link: usize,
    pub delta_beta: f64,
    pub closed_slope: f64,
    pub left_derivative: f64,
    pub implicit_slope: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_cumulant: Option<SecondCumulant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub green_kubo: Option<GreenKubo>,
}

fn derivatives(exp: &Experiment) -> CliResult<Option<CgfDerivatives>> {
    let Some(spec) = &exp.config.cgf else {
        return Ok(None);
    };
    let profile = need_profile(exp)?;
    let transport = transport_of(exp)?;
    let link = spec.link;
    let uniform = profile.is_equilibrium();
    let beta = profile.beta(0);
    let n_for_curvature = match transport {
        Transport::Wandering => profile.n_links(),
        Transport::Confined => 1,
    };
    Ok(Some(CgfDerivatives {
        link,
        delta_beta: profile.beta(link + 1) - profile.beta(link),
        closed_slope: closed_slope(link, profile, transport),
        left_derivative: cgf_left_derivative(link, profile, transport)?,
        implicit_slope: implicit_slope(link, profile, transport)?,
        second_cumulant: if uniform {
            Some(equilibrium_second_cumulant(n_for_curvature, beta)?)
        } else {
            None
        },
        green_kubo: if uniform && transport == Transport::Wandering && link + 2 <= profile.n_links() {
            Some(green_kubo_check(profile.n_links(), beta, link)?)
        } else {
            None
        },
    }))
}

#[derive(Serialize)]
struct AnalyzeSummary<'a> {
    command: &'static str,
    build: BuildInfo,
    config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    stationary: Option<StationaryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<&'a ProfileSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    continuum_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cgf: Option<CgfDerivatives>,
    files: Vec<PathBuf>,
}

fn continuum_gap(exp: &Experiment) -> CliResult<Option<f64>> {
    Ok(match &exp.solution {
        Some(s) if s.transport == Transport::Confined => {
            let n = s.temperatures.len() - 1;
            Some(continuum_error(s.temperatures[0], s.temperatures[n], n)?)
        }
        _ => None,
    })
}

fn write_summary(
    exp: &Experiment,
    out: &OutputDir,
    command: &'static str,
    stationary: bool,
    cgf: bool,
    mut files: Vec<PathBuf>,
) -> CliResult<Vec<PathBuf>> {
    let json = out.file(&format!("{command}.json"));
    files.push(json.clone());
    write_json(
        &json,
        &AnalyzeSummary {
            command,
            build: build_info(),
            config: &exp.config,
            stationary: if stationary { closed_report(&exp.model)? } else { None },
            profile: exp.solution.as_ref(),
            continuum_error: continuum_gap(exp)?,
            cgf: if cgf { derivatives(exp)? } else { None },
            files: files.clone(),
        },
    )?;
    Ok(files)
}

/// Stationary report, profile table and, when configured, the CGF sweep.
pub fn analyze(exp: &Experiment, opts: &RunOptions) -> CliResult<Vec<PathBuf>> {
    need_profile(exp)?;
    let out = opts.output(exp)?;
    let mut files = Vec::new();
    let path = out.file("stationary.csv");
    stationary_table(&exp.model)?.write(&path)?;
    files.push(path);
    let path = out.file("profile.csv");
    profile_table(exp)?.write(&path)?;
    files.push(path);
    if exp.config.cgf.is_some() {
        let path = out.file("cgf.csv");
        cgf_table(exp, opts)?.write(&path)?;
        files.push(path);
    }
    write_summary(exp, &out, "analyze", true, exp.config.cgf.is_some(), files)
}

pub fn cgf(exp: &Experiment, opts: &RunOptions) -> CliResult<Vec<PathBuf>> {
    let out = opts.output(exp)?;
    let path = out.file("cgf.csv");
    cgf_table(exp, opts)?.write(&path)?;
    write_summary(exp, &out, "cgf", false, true, vec![path])
}

pub fn profile(exp: &Experiment, opts: &RunOptions) -> CliResult<Vec<PathBuf>> {
    let out = opts.output(exp)?;
    let path = out.file("profile.csv");
    profile_table(exp)?.write(&path)?;
    write_summary(exp, &out, "profile", false, false, vec![path])
}
