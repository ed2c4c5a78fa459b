//! Desk-scale acceptance suite. Every tolerance is pinned here.

use std::fmt;
use std::time::Instant;

use scatter_core::analytic::{confined_stationary, invariant_density, wandering_stationary, Transport};
use scatter_core::cgf::{
    cgf_left_derivative, cgf_value, closed_slope, equilibrium_second_cumulant, green_kubo_check, implicit_slope,
    second_cumulant_closed, Branch, CgfQuery,
};
use scatter_core::model::{InverseTempProfile, ModelKind, Sign, TransitionMatrix};
use scatter_core::sampling::{mean_interarrival, RngStream};
use scatter_core::selfconsistent::{
    confined_profile, continuum_error, finite_conductivity, local_conductivity, wandering_profile,
};
use scatter_core::simulate::{
    estimate_cgf_population, estimate_current_second_moment, estimate_empirical_cgf, run_basic, run_general,
    run_replicas, run_wandering, stream_id, BasicRun, CurrentSpec, InitialCondition, PhaseSampling, RunConfig,
};
use scatter_core::stats::{chi_square_test, ks_critical_1pct, ks_statistic, mean_and_se};
use serde::Serialize;
use statrs::function::erf::{erf, erfc};

pub const DEFAULT_SEED: u64 = 20_240_917;

const BASIC_BETA: f64 = 1.0;
const BASIC_T_END: f64 = 1e5;
const BASIC_SAMPLES: usize = 10_000;
const BASIC_RUNTIME_S: f64 = 10.0;

const WANDERING_TRACERS: usize = 32;
const WANDERING_T_END: f64 = 1e6;
const FREQUENCY_REL_TOL: f64 = 0.01;
const CURRENT_REL_TOL: f64 = 0.02;
const ENTROPY_REL_TOL: f64 = 0.05;
const WANDERING_RUNTIME_S: f64 = 60.0;

const CONFINED_REPLICAS: usize = 32;
const CONFINED_T_END: f64 = 1e6;
const ENERGY_SE_MULTIPLE: f64 = 3.0;

const ROOT_RESIDUAL_TOL: f64 = 1e-10;
const GC_TOL: f64 = 2e-10;
const GRID_RUNTIME_S: f64 = 30.0;

/// The first value is dominated by slow particles: its direct estimate is
/// informational and must raise the heavy-tail warning.
const EMPIRICAL_LAMBDAS: [f64; 2] = [-0.5, -0.2];
const EMPIRICAL_REPLICAS: usize = 10_000;
const EMPIRICAL_HORIZON: f64 = 200.0;
const RESAMPLE_INTERVAL: f64 = 1.0;
const EMPIRICAL_REL_TOL: f64 = 0.10;
const EMPIRICAL_RUNTIME_S: f64 = 300.0;

const SLOPE_REL_TOL: f64 = 1e-6;
const IMPLICIT_REL_TOL: f64 = 1e-8;

const CUMULANT_CASES: [(usize, f64); 3] = [(1, 1.0), (2, 1.0), (1, 4.0)];
const CUMULANT_REL_TOL: f64 = 1e-6;
const SECOND_MOMENT_REPLICAS: usize = 10_000;
const SECOND_MOMENT_HORIZON: f64 = 2000.0;
const SECOND_MOMENT_REL_TOL: f64 = 0.05;

const GK_CLOSED_REL_TOL: f64 = 1e-6;
const GK_NUMERIC_REL_TOL: f64 = 1e-4;

const CONTINUUM_ENDS: (f64, f64) = (1.0, 4.0);
const CONTINUUM_SIZES: [usize; 4] = [25, 50, 100, 200];
const CONTINUUM_MIN_RATE: f64 = 0.8;
const CONDUCTIVITY_REL_TOL: f64 = 0.01;
const CONTINUUM_RUNTIME_S: f64 = 5.0;

const GENERAL_TRANSMIT: f64 = 0.5;
const GENERAL_BURN_IN: f64 = 1000.0;
const GENERAL_SPACING: f64 = 20.0;
const GENERAL_SAMPLES: usize = 20_000;
const MOMENTUM_EDGES: [f64; 9] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5];
const MIN_P_VALUE: f64 = 0.01;

/// Criteria that need long simulations and are skipped by `--fast`.
pub const SLOW_CRITERIA: [u32; 4] = [3, 4, 5, 7];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Gate {
    AtMost(f64),
    AtLeast(f64),
    Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub gate: Gate,
    /// Informational checks are printed but never fail the criterion.
    pub gating: bool,
    passed: bool,
}

impl Check {
    fn at_most(label: impl Into<String>, measured: f64, tol: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            gate: Gate::AtMost(tol),
            gating: true,
            passed: measured <= tol,
        }
    }

    fn at_least(label: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            gate: Gate::AtLeast(threshold),
            gating: true,
            passed: measured >= threshold,
        }
    }

    fn holds(label: impl Into<String>, ok: bool) -> Self {
        Self {
            label: label.into(),
            measured: if ok { 1.0 } else { 0.0 },
            gate: Gate::Holds,
            gating: true,
            passed: ok,
        }
    }

    fn info(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn passed(&self) -> bool {
        self.passed
    }

    /// Replaces the tolerance by one no measurement can meet.
    fn corrupt(&mut self) {
        if self.gating {
            self.gate = match self.gate {
                Gate::AtMost(_) => Gate::AtMost(f64::NEG_INFINITY),
                Gate::AtLeast(_) => Gate::AtLeast(f64::INFINITY),
                Gate::Holds => Gate::Holds,
            };
            self.passed = false;
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = if self.gating { "" } else { "info " };
        match self.gate {
            Gate::AtMost(t) => write!(f, "{prefix}{} {:.3e} <= {:.3e}", self.label, self.measured, t),
            Gate::AtLeast(t) => write!(f, "{prefix}{} {:.4} >= {:.4}", self.label, self.measured, t),
            Gate::Holds => write!(f, "{prefix}{} {}", self.label, if self.passed { "yes" } else { "no" }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Status {
    Passed,
    Failed,
    Skipped,
    Errored(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: &'static str,
    pub status: Status,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Passed => "PASS",
            Status::Failed => "FAIL",
            Status::Skipped => "SKIP",
            Status::Errored(_) => "FAIL",
        };
        write!(f, "{tag} [{:>2}] {}", self.id, self.name)?;
        if let Status::Errored(msg) = &self.status {
            write!(f, ": error: {msg}")?;
        }
        let parts: Vec<String> = self.checks.iter().map(Check::to_string).collect();
        if !parts.is_empty() {
            write!(f, ": {}", parts.join("; "))?;
        }
        if self.status != Status::Skipped {
            write!(f, " ({:.1} s)", self.seconds)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub fast: bool,
    pub criteria: Vec<CriterionReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.criteria
            .iter()
            .all(|c| matches!(c.status, Status::Passed | Status::Skipped))
    }

    pub fn failures(&self) -> Vec<u32> {
        self.criteria
            .iter()
            .filter(|c| !matches!(c.status, Status::Passed | Status::Skipped))
            .map(|c| c.id)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub fast: bool,
    /// Criterion whose tolerances are made unattainable, to check that the
    /// harness reports failures.
    pub corrupt: Option<u32>,
    /// Run only these criteria.
    pub only: Option<Vec<u32>>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            fast: false,
            corrupt: None,
            only: None,
        }
    }
}

struct Ctx {
    seed: u64,
    fast: bool,
}

impl Ctx {
    fn seed_for(&self, id: u32) -> u64 {
        self.seed.wrapping_add(id as u64)
    }
}

type Outcome = scatter_core::Result<Vec<Check>>;

struct Criterion {
    id: u32,
    name: &'static str,
    run: fn(&Ctx) -> Outcome,
}

const CRITERIA: [Criterion; 12] = [
    Criterion {
        id: 1,
        name: "basic invariant measure",
        run: basic_invariant_measure,
    },
    Criterion {
        id: 2,
        name: "age and span laws",
        run: age_and_span,
    },
    Criterion {
        id: 3,
        name: "collision frequencies",
        run: collision_frequencies,
    },
    Criterion {
        id: 4,
        name: "stationary currents",
        run: stationary_currents,
    },
    Criterion {
        id: 5,
        name: "confined self-consistency",
        run: confined_self_consistency,
    },
    Criterion {
        id: 6,
        name: "CGF root and plateau",
        run: cgf_root_and_plateau,
    },
    Criterion {
        id: 7,
        name: "empirical CGF",
        run: empirical_cgf,
    },
    Criterion {
        id: 8,
        name: "CGF slope at the origin",
        run: cgf_slope,
    },
    Criterion {
        id: 9,
        name: "equilibrium second cumulant",
        run: second_cumulant,
    },
    Criterion {
        id: 10,
        name: "Green-Kubo relation",
        run: green_kubo,
    },
    Criterion {
        id: 11,
        name: "continuum profile",
        run: continuum_profile_limit,
    },
    Criterion {
        id: 12,
        name: "general-model invariant measure",
        run: general_invariant_measure,
    },
];

pub fn criterion_ids() -> Vec<u32> {
    CRITERIA.iter().map(|c| c.id).collect()
}

/// Runs the suite, calling `on_report` as each criterion finishes.
pub fn run_with<F: FnMut(&CriterionReport)>(opts: &VerifyOptions, mut on_report: F) -> VerifyReport {
    let ctx = Ctx {
        seed: opts.seed,
        fast: opts.fast,
    };
    let mut criteria = Vec::new();
    for c in &CRITERIA {
        if let Some(only) = &opts.only {
            if !only.contains(&c.id) {
                continue;
            }
        }
        let report = if opts.fast && SLOW_CRITERIA.contains(&c.id) {
            CriterionReport {
                id: c.id,
                name: c.name,
                status: Status::Skipped,
                checks: Vec::new(),
                seconds: 0.0,
            }
        } else {
            let start = Instant::now();
            let outcome = (c.run)(&ctx);
            let seconds = start.elapsed().as_secs_f64();
            match outcome {
                Ok(mut checks) => {
                    if opts.corrupt == Some(c.id) {
                        checks.iter_mut().for_each(Check::corrupt);
                    }
                    let ok = checks.iter().all(|k| !k.gating || k.passed);
                    CriterionReport {
                        id: c.id,
                        name: c.name,
                        status: if ok { Status::Passed } else { Status::Failed },
                        checks,
                        seconds,
                    }
                }
                Err(e) => CriterionReport {
                    id: c.id,
                    name: c.name,
                    status: Status::Errored(e.to_string()),
                    checks: Vec::new(),
                    seconds,
                },
            }
        };
        on_report(&report);
        criteria.push(report);
    }
    VerifyReport {
        seed: opts.seed,
        fast: opts.fast,
        criteria,
    }
}

pub fn run(opts: &VerifyOptions) -> VerifyReport {
    run_with(opts, |_| {})
}

fn rel_err(measured: f64, exact: f64) -> f64 {
    ((measured - exact) / exact).abs()
}

fn max_rel_err(measured: &[f64], exact: &[f64]) -> f64 {
    measured
        .iter()
        .zip(exact)
        .map(|(m, e)| rel_err(*m, *e))
        .fold(0.0, f64::max)
}

fn runtime(started: Instant, limit: f64) -> Check {
    Check::at_most("runtime [s]", started.elapsed().as_secs_f64(), limit)
}

fn basic_run(ctx: &Ctx, id: u32) -> scatter_core::Result<BasicRun> {
    let spacing = BASIC_T_END / BASIC_SAMPLES as f64;
    let times: Vec<f64> = (0..BASIC_SAMPLES).map(|k| (k as f64 + 0.5) * spacing).collect();
    let mut rng = RngStream::new(ctx.seed_for(id), stream_id(0, 0));
    run_basic(BASIC_BETA, 0.5, 1.0, BASIC_T_END, &times, &mut rng)
}

fn basic_invariant_measure(ctx: &Ctx) -> Outcome {
    let started = Instant::now();
    let run = basic_run(ctx, 1)?;
    let crit = ks_critical_1pct(run.samples.len());
    let s = (BASIC_BETA / 2.0).sqrt();
    let mut p: Vec<f64> = run.samples.iter().map(|x| x.p).collect();
    let mut q: Vec<f64> = run.samples.iter().map(|x| x.q).collect();
    Ok(vec![
        Check::at_most("KS p", ks_statistic(&mut p, |x| erf(x * s)), crit),
        Check::at_most("KS q", ks_statistic(&mut q, |x| x.clamp(0.0, 1.0)), crit),
        runtime(started, BASIC_RUNTIME_S),
    ])
}

fn age_and_span(ctx: &Ctx) -> Outcome {
    let run = basic_run(ctx, 2)?;
    let crit = ks_critical_1pct(run.samples.len());
    let mu = mean_interarrival(BASIC_BETA);
    let s = (BASIC_BETA / 2.0).sqrt();
    let span_cdf = |x: f64| if x > 0.0 { erfc(s / x) } else { 0.0 };
    let age_cdf = |x: f64| {
        if x > 0.0 {
            (x * (1.0 - (-BASIC_BETA / (2.0 * x * x)).exp()) + mu * erfc(s / x)) / mu
        } else {
            0.0
        }
    };
    let mut span: Vec<f64> = run.samples.iter().map(|x| x.age + x.residual).collect();
    let mut age: Vec<f64> = run.samples.iter().map(|x| x.age).collect();
    let mut residual: Vec<f64> = run.samples.iter().map(|x| x.residual).collect();
    let literal = ks_statistic(&mut age.clone(), span_cdf);
    Ok(vec![
        Check::at_most("KS span", ks_statistic(&mut span, span_cdf), crit),
        Check::at_most("KS age", ks_statistic(&mut age, age_cdf), crit),
        Check::at_most("KS residual", ks_statistic(&mut residual, age_cdf), crit),
        Check::at_most("KS age vs span law", literal, crit).info(),
    ])
}

fn wandering_setup() -> scatter_core::Result<InverseTempProfile> {
    wandering_profile(1.0, 2.0, 4)?.profile()
}

fn wandering_run(ctx: &Ctx, id: u32) -> scatter_core::Result<scatter_core::simulate::RunOutput> {
    let profile = wandering_setup()?;
    run_wandering(
        &profile,
        WANDERING_TRACERS,
        &RunConfig::new(WANDERING_T_END, ctx.seed_for(id)),
    )
}

fn collision_frequencies(ctx: &Ctx) -> Outcome {
    let started = Instant::now();
    let out = wandering_run(ctx, 3)?;
    let exact = wandering_stationary(&wandering_setup()?, WANDERING_TRACERS)?;
    let measured = out.ledger.collision_rates();
    Ok(vec![
        Check::at_most(
            "max rel err N/t",
            max_rel_err(&measured, &exact.frequencies),
            FREQUENCY_REL_TOL,
        ),
        runtime(started, WANDERING_RUNTIME_S),
    ])
}

fn stationary_currents(ctx: &Ctx) -> Outcome {
    let out = wandering_run(ctx, 4)?;
    let exact = wandering_stationary(&wandering_setup()?, WANDERING_TRACERS)?;
    Ok(vec![
        Check::at_most(
            "max rel err J/t",
            max_rel_err(&out.ledger.current_rates(), &exact.currents),
            CURRENT_REL_TOL,
        ),
        Check::at_most(
            "rel err S/t",
            rel_err(out.ledger.entropy_rate(), exact.entropy_rate),
            ENTROPY_REL_TOL,
        ),
    ])
}

fn confined_self_consistency(ctx: &Ctx) -> Outcome {
    let profile = confined_profile(1.0, 4.0, 8)?.profile()?;
    let model = ModelKind::Confined {
        profile: profile.clone(),
    };
    let runs = run_replicas(
        &model,
        &RunConfig::new(CONFINED_T_END, ctx.seed_for(5)),
        CONFINED_REPLICAS,
    )?;
    let n = profile.n_links();
    let mut worst_se_ratio: f64 = 0.0;
    for s in 1..n {
        let rates: Vec<f64> = runs.iter().map(|r| r.ledger.energy_rates()[s]).collect();
        let (m, se) = mean_and_se(&rates);
        worst_se_ratio = worst_se_ratio.max(m.abs() / se);
    }
    let currents: Vec<f64> = (0..n)
        .map(|l| mean_and_se(&runs.iter().map(|r| r.ledger.current_rates()[l]).collect::<Vec<_>>()).0)
        .collect();
    let exact = confined_stationary(&profile);
    Ok(vec![
        Check::at_most("max interior |E/t| / SE", worst_se_ratio, ENERGY_SE_MULTIPLE),
        Check::at_most(
            "max rel err J/t",
            max_rel_err(&currents, &exact.currents),
            CURRENT_REL_TOL,
        ),
    ])
}

fn two_bath_query(lambda: f64) -> scatter_core::Result<CgfQuery> {
    CgfQuery::new(0, lambda, InverseTempProfile::new(vec![1.0, 2.0])?, Transport::Confined)
}

/// `λ_k = −1 + 3k/42`, `k = 1..41`: interior points of `(−β_n, β_{n+1})`
/// that include both plateau edges.
fn lambda_grid() -> Vec<f64> {
    (1..=41).map(|k| -1.0 + (3 * k) as f64 / 42.0).collect()
}

fn cgf_root_and_plateau(_: &Ctx) -> Outcome {
    let started = Instant::now();
    let base = two_bath_query(0.0)?;
    let delta = base.delta_beta();
    let mut worst_residual: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let mut plateau_exact = true;
    for l in lambda_grid() {
        let r = cgf_value(&base.with_lambda(l)?)?;
        let on_plateau = (0.0..=delta).contains(&l);
        match r.branch {
            Branch::PositiveRoot => {
                worst_residual = worst_residual.max(r.root_residual);
                plateau_exact &= !on_plateau && r.value > 0.0;
            }
            Branch::ZeroPlateau => plateau_exact &= on_plateau && r.value == 0.0,
        }
        let mirror = cgf_value(&base.with_lambda(delta - l)?)?;
        worst_gap = worst_gap.max((r.value - mirror.value).abs());
    }
    Ok(vec![
        Check::at_most("max |F-1|", worst_residual, ROOT_RESIDUAL_TOL),
        Check::holds("zero exactly on [0,1]", plateau_exact),
        Check::at_most("max GC gap", worst_gap, GC_TOL),
        runtime(started, GRID_RUNTIME_S),
    ])
}

fn empirical_cgf(ctx: &Ctx) -> Outcome {
    let started = Instant::now();
    let spec = CurrentSpec {
        transport: Transport::Confined,
        profile: InverseTempProfile::new(vec![1.0, 2.0])?,
        link: 0,
    };
    let mut checks = Vec::new();
    for (i, &l) in EMPIRICAL_LAMBDAS.iter().enumerate() {
        let exact = cgf_value(&two_bath_query(l)?)?.value;
        let seed = ctx.seed_for(7).wrapping_add(1000 * i as u64);
        let pop = estimate_cgf_population(&spec, l, EMPIRICAL_HORIZON, EMPIRICAL_REPLICAS, RESAMPLE_INTERVAL, seed)?;
        checks.push(Check::at_most(
            format!("population rel err at {l}"),
            rel_err(pop.value, exact),
            EMPIRICAL_REL_TOL,
        ));
        let direct = estimate_empirical_cgf(&spec, l, EMPIRICAL_HORIZON, EMPIRICAL_REPLICAS, seed)?;
        let direct_check = Check::at_most(
            format!("direct rel err at {l}"),
            rel_err(direct.value, exact),
            EMPIRICAL_REL_TOL,
        );
        if i == 0 {
            checks.push(direct_check.info());
            checks.push(Check::holds(
                format!("heavy-tail warning at {l}"),
                direct.heavy_tail_warning,
            ));
        } else {
            checks.push(direct_check);
        }
    }
    checks.push(runtime(started, EMPIRICAL_RUNTIME_S));
    Ok(checks)
}

fn slope_cases() -> scatter_core::Result<Vec<(usize, InverseTempProfile, Transport)>> {
    let mut cases = vec![(0, InverseTempProfile::new(vec![1.0, 2.0])?, Transport::Confined)];
    let linear = wandering_setup()?;
    for link in 0..linear.n_links() {
        cases.push((link, linear.clone(), Transport::Wandering));
    }
    cases.push((
        1,
        InverseTempProfile::from_temperatures(&[1.0, 4.0, 2.0])?,
        Transport::Confined,
    ));
    Ok(cases)
}

fn cgf_slope(_: &Ctx) -> Outcome {
    let mut worst_closed: f64 = 0.0;
    let mut worst_implicit: f64 = 0.0;
    for (link, profile, transport) in slope_cases()? {
        let numeric = cgf_left_derivative(link, &profile, transport)?;
        worst_closed = worst_closed.max(rel_err(numeric, closed_slope(link, &profile, transport)));
        worst_implicit = worst_implicit.max(rel_err(numeric, implicit_slope(link, &profile, transport)?));
    }
    Ok(vec![
        Check::at_most("max rel err vs closed", worst_closed, SLOPE_REL_TOL),
        Check::at_most("max rel err vs implicit", worst_implicit, IMPLICIT_REL_TOL),
    ])
}

fn second_cumulant(ctx: &Ctx) -> Outcome {
    let mut worst: f64 = 0.0;
    for (n, beta) in CUMULANT_CASES {
        let c = equilibrium_second_cumulant(n, beta)?;
        worst = worst.max(rel_err(c.numeric, c.closed));
    }
    let mut checks = vec![Check::at_most("max rel err finite difference", worst, CUMULANT_REL_TOL)];
    if !ctx.fast {
        let spec = CurrentSpec {
            transport: Transport::Wandering,
            profile: InverseTempProfile::uniform(1.0, 1)?,
            link: 0,
        };
        let m = estimate_current_second_moment(&spec, SECOND_MOMENT_HORIZON, SECOND_MOMENT_REPLICAS, ctx.seed_for(9))?;
        checks.push(Check::at_most(
            "rel err E[J^2]/t",
            rel_err(m.value, second_cumulant_closed(1, 1.0)),
            SECOND_MOMENT_REL_TOL,
        ));
    }
    Ok(checks)
}

fn green_kubo(_: &Ctx) -> Outcome {
    let g = green_kubo_check(2, 1.0, 0)?;
    Ok(vec![
        Check::at_most("rel err lhs", rel_err(g.lhs, g.closed), GK_CLOSED_REL_TOL),
        Check::at_most("rel err rhs_mixed", rel_err(g.rhs_mixed, g.closed), GK_CLOSED_REL_TOL),
        Check::at_most(
            "rel err rhs_numeric",
            rel_err(g.rhs_numeric, g.closed),
            GK_NUMERIC_REL_TOL,
        ),
    ])
}

/// Least-squares slope of `−log₂(error)` against `log₂ N`.
fn observed_order(sizes: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.log2()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn continuum_profile_limit(_: &Ctx) -> Outcome {
    let started = Instant::now();
    let (tl, tr) = CONTINUUM_ENDS;
    let errors = CONTINUUM_SIZES
        .iter()
        .map(|&n| continuum_error(tl, tr, n))
        .collect::<scatter_core::Result<Vec<f64>>>()?;
    let n = *CONTINUUM_SIZES.last().unwrap_or(&200);
    let kappa = finite_conductivity(tl, tr, n, 0.5)?;
    let limit = local_conductivity(tl, tr, 0.5)?;
    Ok(vec![
        Check::at_least(
            "observed order",
            observed_order(&CONTINUUM_SIZES, &errors),
            CONTINUUM_MIN_RATE,
        ),
        Check::at_most("rel err kappa", rel_err(kappa, limit), CONDUCTIVITY_REL_TOL),
        runtime(started, CONTINUUM_RUNTIME_S),
    ])
}

fn general_invariant_measure(ctx: &Ctx) -> Outcome {
    let profile = InverseTempProfile::uniform(1.0, 2)?;
    let matrix = TransitionMatrix::transmit_reflect(2, GENERAL_TRANSMIT)?;
    let last = GENERAL_BURN_IN + GENERAL_SPACING * (GENERAL_SAMPLES - 1) as f64;
    let cfg = RunConfig {
        t_burn: Some(GENERAL_BURN_IN),
        initial: InitialCondition::Phase { q: 0.5, p: 1.0 },
        ..RunConfig::new(last + GENERAL_SPACING, ctx.seed_for(12))
    };
    let sampling = PhaseSampling {
        start: GENERAL_BURN_IN,
        spacing: GENERAL_SPACING,
        count: GENERAL_SAMPLES,
    };
    let run = run_general(&profile, &matrix, &cfg, Some(sampling))?;
    let density = invariant_density(&ModelKind::General { profile, matrix })?;

    let bins = MOMENTUM_EDGES.len();
    let signs = [Sign::Plus, Sign::Minus];
    let cells = density.cells.len();
    let mut observed = vec![0u64; cells * 2 * bins];
    for &(q, p) in &run.samples {
        let cell = (q.floor().max(0.0) as usize).min(cells - 1);
        let sign = usize::from(p < 0.0);
        let bin = MOMENTUM_EDGES.partition_point(|&e| e <= p.abs()) - 1;
        observed[(cell * 2 + sign) * bins + bin] += 1;
    }
    let total = run.samples.len() as f64;
    let mut expected = Vec::with_capacity(observed.len());
    for c in &density.cells {
        for s in signs {
            for (b, &lo) in MOMENTUM_EDGES.iter().enumerate() {
                let hi = MOMENTUM_EDGES.get(b + 1).copied().unwrap_or(f64::INFINITY);
                expected.push(total * c.mass(s, lo, hi));
            }
        }
    }
    let test = chi_square_test(&observed, &expected, 1)?;
    Ok(vec![Check::at_least("chi-square p-value", test.p_value, MIN_P_VALUE)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_plateau_edges() {
        let g = lambda_grid();
        assert_eq!(g.len(), 41);
        assert!(g.contains(&0.0) && g.contains(&1.0));
        assert_eq!(g.iter().filter(|l| (0.0..=1.0).contains(*l)).count(), 15);
    }

    #[test]
    fn order_of_exact_power_law() {
        let sizes = [10, 20, 40];
        let errors: Vec<f64> = sizes.iter().map(|&n| 3.0 / (n as f64).powi(2)).collect();
        assert!((observed_order(&sizes, &errors) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn corruption_fails_gating_checks_only() {
        let mut c = Check::at_most("x", 0.0, 1.0);
        assert!(c.passed());
        c.corrupt();
        assert!(!c.passed());
        let mut i = Check::at_most("y", 2.0, 1.0).info();
        i.corrupt();
        assert!(!i.gating);
    }

    #[test]
    fn fast_mode_skips_slow_criteria() {
        let r = run(&VerifyOptions {
            fast: true,
            only: Some(vec![3, 6]),
            ..VerifyOptions::default()
        });
        assert_eq!(r.criteria[0].status, Status::Skipped);
        assert_eq!(r.criteria[1].status, Status::Passed);
    }
}
