use serde::{Deserialize, Serialize};

use crate::model::Sign;
use crate::numeric::CompensatedSum;

/// One tracer–scatterer collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    pub time: f64,
    pub scatterer: usize,
    pub beta: f64,
    pub incoming_energy: f64,
    pub outgoing_energy: f64,
    /// Link traversed by the flight that just ended, with its direction.
    /// `None` for a flight that did not start at a scatterer.
    pub crossed_link: Option<(usize, Sign)>,
}

/// Observables accumulated over a time window.
///
/// `energy_exchanged[n]` is the energy handed by scatterer `n` to the tracers.
/// `link_current[n]` adds `½v²` for each flight from `n` to `n+1` and
/// subtracts it for each flight from `n+1` to `n`, counted on arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableLedger {
    pub t_elapsed: f64,
    energy: Vec<CompensatedSum>,
    current: Vec<CompensatedSum>,
    entropy: CompensatedSum,
    counts: Vec<u64>,
    kinetic_start: CompensatedSum,
    kinetic_end: CompensatedSum,
}

impl ObservableLedger {
    pub fn new(n_links: usize, t_elapsed: f64) -> Self {
        Self {
            t_elapsed,
            energy: vec![CompensatedSum::new(); n_links + 1],
            current: vec![CompensatedSum::new(); n_links],
            entropy: CompensatedSum::new(),
            counts: vec![0; n_links + 1],
            kinetic_start: CompensatedSum::new(),
            kinetic_end: CompensatedSum::new(),
        }
    }

    pub fn n_links(&self) -> usize {
        self.current.len()
    }

    #[inline]
    pub fn record(&mut self, c: &Collision) {
        let gain = c.outgoing_energy - c.incoming_energy;
        self.energy[c.scatterer].add(gain);
        self.entropy.add(-c.beta * gain);
        self.counts[c.scatterer] += 1;
        if let Some((link, sign)) = c.crossed_link {
            self.current[link].add(sign.value() * c.incoming_energy);
        }
    }

    pub fn add_kinetic_start(&mut self, e: f64) {
        self.kinetic_start.add(e);
    }

    pub fn add_kinetic_end(&mut self, e: f64) {
        self.kinetic_end.add(e);
    }

    /// Adds the observables of tracers moving during the same window.
    pub fn merge_tracers(&mut self, other: &ObservableLedger) {
        self.merge_sums(other);
    }

    /// Appends a later window of the same tracers.
    pub fn merge_window(&mut self, other: &ObservableLedger) {
        let start = self.kinetic_start;
        self.merge_sums(other);
        self.kinetic_start = start;
        self.kinetic_end = other.kinetic_end;
        self.t_elapsed += other.t_elapsed;
    }

    fn merge_sums(&mut self, other: &ObservableLedger) {
        assert_eq!(self.n_links(), other.n_links(), "ledgers of different systems");
        for (a, b) in self.energy.iter_mut().zip(&other.energy) {
            a.merge(b);
        }
        for (a, b) in self.current.iter_mut().zip(&other.current) {
            a.merge(b);
        }
        self.entropy.merge(&other.entropy);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.kinetic_start.merge(&other.kinetic_start);
        self.kinetic_end.merge(&other.kinetic_end);
    }

    pub fn energy_exchanged(&self) -> Vec<f64> {
        self.energy.iter().map(CompensatedSum::value).collect()
    }

    pub fn link_current(&self) -> Vec<f64> {
        self.current.iter().map(CompensatedSum::value).collect()
    }

    pub fn entropy_flow(&self) -> f64 {
        self.entropy.value()
    }

    pub fn collision_counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn kinetic_start(&self) -> f64 {
        self.kinetic_start.value()
    }

    pub fn kinetic_end(&self) -> f64 {
        self.kinetic_end.value()
    }

    pub fn energy_rates(&self) -> Vec<f64> {
        self.energy_exchanged().iter().map(|e| e / self.t_elapsed).collect()
    }

    pub fn current_rates(&self) -> Vec<f64> {
        self.link_current().iter().map(|j| j / self.t_elapsed).collect()
    }

    pub fn collision_rates(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.t_elapsed).collect()
    }

    pub fn entropy_rate(&self) -> f64 {
        self.entropy_flow() / self.t_elapsed
    }
}
