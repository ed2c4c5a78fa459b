//! Event-driven simulation of tracers among scatterers.

mod basic;
mod engine;
mod estimate;
mod ledger;

pub use basic::{run_basic, BasicRun, BasicSample};
pub use engine::{replay, EventLog, InitialCondition, Kernel, LoggedEvent, Tracer};
pub use estimate::{
    estimate_cgf_population, estimate_current_second_moment, estimate_empirical_cgf, CgfEstimate, CurrentSpec,
    EstimatorKind, SecondMoment,
};
pub use ledger::{Collision, ObservableLedger};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InverseTempProfile, ModelKind, TransitionMatrix};
use crate::sampling::RngStream;

/// Random stream owned by one tracer of one replica.
pub fn stream_id(replica: u64, tracer: u64) -> u64 {
    (replica << 32) | tracer
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub t_end: f64,
    /// Measurement starts here; defaults to 1% of `t_end`.
    pub t_burn: Option<f64>,
    /// Number of equal windows the measurement period is split into.
    pub n_batches: usize,
    pub seed: u64,
    pub replica: u64,
    pub initial: InitialCondition,
}

impl RunConfig {
    pub fn new(t_end: f64, seed: u64) -> Self {
        Self {
            t_end,
            t_burn: None,
            n_batches: 1,
            seed,
            replica: 0,
            initial: InitialCondition::Stationary,
        }
    }

    pub fn burn_in(&self) -> f64 {
        self.t_burn.unwrap_or(0.01 * self.t_end)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::Domain(format!("t_end = {} must be positive", self.t_end)));
        }
        let burn = self.burn_in();
        if !(burn >= 0.0 && burn < self.t_end) {
            return Err(Error::Domain(format!("burn-in {burn} must lie in [0, t_end)")));
        }
        if self.n_batches == 0 {
            return Err(Error::InvalidSize("at least one batch is required".into()));
        }
        Ok(())
    }

    fn boundaries(&self) -> Vec<f64> {
        let burn = self.burn_in();
        let width = (self.t_end - burn) / self.n_batches as f64;
        let mut b: Vec<f64> = (0..=self.n_batches).map(|i| burn + i as f64 * width).collect();
        b[self.n_batches] = self.t_end;
        b
    }
}

/// Ledger of the whole measurement period and of each batch window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub ledger: ObservableLedger,
    pub batches: Vec<ObservableLedger>,
}

/// Regularly spaced phase-point samples of a single tracer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSampling {
    pub start: f64,
    pub spacing: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralRun {
    pub output: RunOutput,
    pub samples: Vec<(f64, f64)>,
}

/// Per-batch ledgers and phase samples of one tracer.
type TracerRun = (Vec<ObservableLedger>, Vec<(f64, f64)>);

fn run_tracer(
    kernel: &Kernel,
    n_links: usize,
    cfg: &RunConfig,
    tracer: u64,
    sampling: Option<&PhaseSampling>,
) -> Result<TracerRun> {
    let mut rng = RngStream::new(cfg.seed, stream_id(cfg.replica, tracer));
    let mut t = Tracer::start(kernel, cfg.initial, &mut rng)?;
    let bounds = cfg.boundaries();

    let mut sample_times = sampling
        .map(|s| (0..s.count).map(move |i| s.start + i as f64 * s.spacing))
        .into_iter()
        .flatten()
        .peekable();
    let mut samples = Vec::new();
    let mut advance_to = |t: &mut Tracer, rng: &mut RngStream, stop: f64, ledger: Option<&mut ObservableLedger>| {
        let mut ledger = ledger;
        while let Some(s) = sample_times.next_if(|s| *s <= stop) {
            match ledger.as_deref_mut() {
                Some(l) => t.advance(kernel, s, rng, |c| l.record(c)),
                None => t.advance(kernel, s, rng, |_| {}),
            }
            samples.push(t.phase_at(kernel, s));
        }
        match ledger {
            Some(l) => t.advance(kernel, stop, rng, |c| l.record(c)),
            None => t.advance(kernel, stop, rng, |_| {}),
        }
    };

    advance_to(&mut t, &mut rng, bounds[0], None);
    let mut ledgers = Vec::with_capacity(cfg.n_batches);
    for w in bounds.windows(2) {
        let mut ledger = ObservableLedger::new(n_links, w[1] - w[0]);
        ledger.add_kinetic_start(t.kinetic_energy());
        advance_to(&mut t, &mut rng, w[1], Some(&mut ledger));
        ledger.add_kinetic_end(t.kinetic_energy());
        ledgers.push(ledger);
    }
    if let Some(s) = sampling {
        if samples.len() != s.count {
            return Err(Error::Domain(format!(
                "{} of {} phase samples fall after t_end",
                s.count - samples.len(),
                s.count
            )));
        }
    }
    Ok((ledgers, samples))
}

fn run_system<'a, K>(kernels: K, n_links: usize, cfg: &RunConfig) -> Result<RunOutput>
where
    K: IntoIterator<Item = &'a Kernel>,
{
    cfg.validate()?;
    let mut batches: Option<Vec<ObservableLedger>> = None;
    for (i, kernel) in kernels.into_iter().enumerate() {
        let (ledgers, _) = run_tracer(kernel, n_links, cfg, i as u64, None)?;
        match batches.as_mut() {
            None => batches = Some(ledgers),
            Some(acc) => acc.iter_mut().zip(&ledgers).for_each(|(a, b)| a.merge_tracers(b)),
        }
    }
    let batches = batches.ok_or_else(|| Error::InvalidSize("no tracers to simulate".into()))?;
    Ok(collect_batches(batches))
}

fn collect_batches(batches: Vec<ObservableLedger>) -> RunOutput {
    let mut ledger = batches[0].clone();
    for b in &batches[1..] {
        ledger.merge_window(b);
    }
    RunOutput { ledger, batches }
}

/// `n_tracers` independent wandering tracers.
pub fn run_wandering(profile: &InverseTempProfile, n_tracers: usize, cfg: &RunConfig) -> Result<RunOutput> {
    if n_tracers == 0 {
        return Err(Error::InvalidSize("at least one tracer is required".into()));
    }
    let kernel = Kernel::wandering(profile.betas())?;
    run_system(std::iter::repeat_n(&kernel, n_tracers), profile.n_links(), cfg)
}

/// One tracer in each cell, reflected by the two scatterers bounding it.
pub fn run_confined(profile: &InverseTempProfile, cfg: &RunConfig) -> Result<RunOutput> {
    if let InitialCondition::Phase { .. } = cfg.initial {
        return Err(Error::Domain("confined tracers start from their stationary law".into()));
    }
    let kernels = (0..profile.n_links())
        .map(|n| Kernel::confined(profile.betas(), n))
        .collect::<Result<Vec<_>>>()?;
    run_system(&kernels, profile.n_links(), cfg)
}

/// A single tracer driven by an arbitrary transition matrix, optionally
/// sampling its phase point.
pub fn run_general(
    profile: &InverseTempProfile,
    matrix: &TransitionMatrix,
    cfg: &RunConfig,
    sampling: Option<PhaseSampling>,
) -> Result<GeneralRun> {
    cfg.validate()?;
    if matrix.n_links() != profile.n_links() {
        return Err(Error::InvalidSize(format!(
            "matrix has {} links, profile has {}",
            matrix.n_links(),
            profile.n_links()
        )));
    }
    let kernel = Kernel::new(profile.betas().to_vec(), matrix.clone(), 0)?;
    let (ledgers, samples) = run_tracer(&kernel, profile.n_links(), cfg, 0, sampling.as_ref())?;
    Ok(GeneralRun {
        output: collect_batches(ledgers),
        samples,
    })
}

pub fn run_model(model: &ModelKind, cfg: &RunConfig) -> Result<RunOutput> {
    model.validate()?;
    match model {
        ModelKind::Basic { .. } => Err(Error::NotApplicable(
            "the basic process has no scatterer ledger; use run_basic".into(),
        )),
        ModelKind::General { profile, matrix } => Ok(run_general(profile, matrix, cfg, None)?.output),
        ModelKind::Wandering { profile, n_tracers } => run_wandering(profile, *n_tracers, cfg),
        ModelKind::Confined { profile } => run_confined(profile, cfg),
    }
}

/// Independent replicas `0..n_replicas` (offset by `cfg.replica`), run in
/// parallel and returned in replica order.
pub fn run_replicas(model: &ModelKind, cfg: &RunConfig, n_replicas: usize) -> Result<Vec<RunOutput>> {
    (0..n_replicas as u64)
        .into_par_iter()
        .map(|r| {
            let cfg = RunConfig {
                replica: cfg.replica + r,
                ..*cfg
            };
            run_model(model, &cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(RunConfig::new(0.0, 1).validate().is_err());
        let mut c = RunConfig::new(10.0, 1);
        c.t_burn = Some(10.0);
        assert!(c.validate().is_err());
        c.t_burn = Some(0.0);
        c.n_batches = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn batches_tile_the_measurement_window() {
        let p = InverseTempProfile::from_temperatures(&[1.0, 2.0, 1.5]).unwrap();
        let mut cfg = RunConfig::new(1000.0, 9);
        cfg.n_batches = 4;
        let out = run_wandering(&p, 3, &cfg).unwrap();
        assert_eq!(out.batches.len(), 4);
        assert!((out.ledger.t_elapsed - 990.0).abs() < 1e-9);
        let total: u64 = out
            .batches
            .iter()
            .map(|b| b.collision_counts().iter().sum::<u64>())
            .sum();
        assert_eq!(total, out.ledger.collision_counts().iter().sum::<u64>());
        for w in out.batches.windows(2) {
            assert_eq!(w[0].kinetic_end(), w[1].kinetic_start());
        }
    }

    #[test]
    fn general_with_wandering_matrix_reproduces_wandering() {
        let p = InverseTempProfile::from_temperatures(&[1.0, 3.0, 2.0]).unwrap();
        let cfg = RunConfig::new(5000.0, 4);
        let a = run_wandering(&p, 1, &cfg).unwrap();
        let b = run_general(&p, &TransitionMatrix::wandering(2).unwrap(), &cfg, None).unwrap();
        assert_eq!(a, b.output);
    }

    #[test]
    fn replicas_are_deterministic_and_distinct() {
        let model = ModelKind::Confined {
            profile: InverseTempProfile::uniform(1.0, 2).unwrap(),
        };
        let cfg = RunConfig::new(200.0, 5);
        let a = run_replicas(&model, &cfg, 3).unwrap();
        let b = run_replicas(&model, &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert_eq!(a[1], run_model(&model, &RunConfig { replica: 1, ..cfg }).unwrap());
    }

    #[test]
    fn phase_samples_are_counted() {
        let p = InverseTempProfile::uniform(1.0, 2).unwrap();
        let q = TransitionMatrix::transmit_reflect(2, 0.5).unwrap();
        let cfg = RunConfig::new(100.0, 1);
        let s = PhaseSampling {
            start: 10.0,
            spacing: 1.0,
            count: 50,
        };
        let run = run_general(&p, &q, &cfg, Some(s)).unwrap();
        assert_eq!(run.samples.len(), 50);
        let s = PhaseSampling {
            start: 90.0,
            spacing: 1.0,
            count: 50,
        };
        assert!(run_general(&p, &q, &cfg, Some(s)).is_err());
    }
}
