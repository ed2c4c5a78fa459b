use serde::{Deserialize, Serialize};

use super::ledger::Collision;
use crate::error::{Error, Result};
use crate::model::{
    chain_stationary_distribution, ChainState, Sign, StateSpace, TracerTrajectoryState, TransitionMatrix,
};
use crate::sampling::{emission_speed_from_uniform, sample_stationary_speed, RngStream};

/// How a tracer is placed at time zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// A flight drawn from the stationary law of the chain and flight times.
    Stationary,
    /// A fixed phase point in global coordinates.
    Phase { q: f64, p: f64 },
}

#[derive(Debug, Clone)]
enum RowSampler {
    Deterministic(usize),
    Discrete(Vec<(f64, usize)>),
}

impl RowSampler {
    fn new(row: &[f64]) -> Self {
        let support: Vec<(f64, usize)> = row
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, q)| *q > 0.0)
            .map(|(j, q)| (q, j))
            .collect();
        if support.len() == 1 {
            return RowSampler::Deterministic(support[0].1);
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<(f64, usize)> = support
            .into_iter()
            .map(|(q, j)| {
                acc += q;
                (acc, j)
            })
            .collect();
        let last = cumulative.len() - 1;
        cumulative[last].0 = f64::INFINITY;
        RowSampler::Discrete(cumulative)
    }

    #[inline]
    fn sample(&self, rng: &mut RngStream) -> usize {
        match self {
            RowSampler::Deterministic(j) => *j,
            RowSampler::Discrete(cum) => {
                let u = rng.uniform();
                cum.iter()
                    .find(|(c, _)| u < *c)
                    .map(|(_, j)| *j)
                    .expect("last bound is infinite")
            }
        }
    }
}

/// Transition law of one tracer: a chain on a contiguous block of scatterers
/// starting at global index `offset`.
#[derive(Debug, Clone)]
pub struct Kernel {
    offset: usize,
    betas: Vec<f64>,
    matrix: TransitionMatrix,
    rows: Vec<RowSampler>,
    nu: Vec<f64>,
}

impl Kernel {
    pub fn new(betas: Vec<f64>, matrix: TransitionMatrix, offset: usize) -> Result<Self> {
        if betas.len() != matrix.n_links() + 1 {
            return Err(Error::InvalidSize(format!(
                "{} inverse temperatures for a chain with {} links",
                betas.len(),
                matrix.n_links()
            )));
        }
        let rows = (0..matrix.size()).map(|i| RowSampler::new(matrix.row(i))).collect();
        let nu = chain_stationary_distribution(&matrix)?;
        Ok(Self {
            offset,
            betas,
            matrix,
            rows,
            nu,
        })
    }

    pub fn wandering(betas: &[f64]) -> Result<Self> {
        Self::new(betas.to_vec(), TransitionMatrix::wandering(betas.len() - 1)?, 0)
    }

    /// The tracer locked between scatterers `cell` and `cell + 1`.
    pub fn confined(betas: &[f64], cell: usize) -> Result<Self> {
        Self::new(betas[cell..cell + 2].to_vec(), TransitionMatrix::wandering(1)?, cell)
    }

    pub fn space(&self) -> StateSpace {
        self.matrix.space()
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn n_links(&self) -> usize {
        self.matrix.n_links()
    }

    pub fn beta(&self, local: usize) -> f64 {
        self.betas[local]
    }
}

/// Outcome of a collision as needed to replay it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub time: f64,
    pub next_state: ChainState,
    pub speed: f64,
}

/// Initial state and collision outcomes of one tracer, in local coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub initial: TracerTrajectoryState,
    pub initial_complete: bool,
    pub events: Vec<LoggedEvent>,
}

/// A single tracer advanced from collision to collision.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracer {
    state: TracerTrajectoryState,
    /// Whether the flight in progress departed from a scatterer.
    complete_flight: bool,
}

impl Tracer {
    pub fn start(kernel: &Kernel, initial: InitialCondition, rng: &mut RngStream) -> Result<Self> {
        match initial {
            InitialCondition::Stationary => Self::stationary(kernel, rng),
            InitialCondition::Phase { q, p } => Self::from_phase(kernel, q - kernel.offset as f64, p),
        }
    }

    fn stationary(kernel: &Kernel, rng: &mut RngStream) -> Result<Self> {
        let space = kernel.space();
        let weights: Vec<f64> = space
            .iter()
            .zip(&kernel.nu)
            .map(|(s, nu)| nu * kernel.betas[s.scatterer].sqrt())
            .collect();
        let total: f64 = weights.iter().sum();
        let u = rng.uniform() * total;
        let mut acc = 0.0;
        let mut index = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                index = i;
                break;
            }
        }
        let from = space.state(index);
        let speed = sample_stationary_speed(kernel.betas[from.scatterer], rng)?;
        let done = rng.uniform();
        let sign = from.sign.value();
        Ok(Self {
            state: TracerTrajectoryState {
                q: from.scatterer as f64 + sign * done,
                p: sign * speed,
                chain_state: from,
                next_event_time: (1.0 - done) / speed,
            },
            complete_flight: false,
        })
    }

    /// The flight through `(q, p)` is attributed to the state departing the
    /// scatterer behind the tracer.
    pub fn from_phase(kernel: &Kernel, q: f64, p: f64) -> Result<Self> {
        let n = kernel.n_links();
        if !(q.is_finite() && p.is_finite() && p != 0.0 && (0.0..=n as f64).contains(&q)) {
            return Err(Error::Domain(format!("phase point ({q}, {p}) outside [0,{n}] x R*")));
        }
        let sign = Sign::from_f64(p);
        let target = match sign {
            Sign::Plus => q.floor() + 1.0,
            Sign::Minus => q.ceil() - 1.0,
        };
        if target < 0.0 || target > n as f64 {
            return Err(Error::Domain(format!(
                "a tracer at q = {q} with p = {p} leaves the system"
            )));
        }
        let target = target as usize;
        let from = ChainState::new(
            match sign {
                Sign::Plus => target - 1,
                Sign::Minus => target + 1,
            },
            sign,
        );
        debug_assert!(kernel.space().contains(from));
        Ok(Self {
            state: TracerTrajectoryState {
                q,
                p,
                chain_state: from,
                next_event_time: (target as f64 - q) / p,
            },
            complete_flight: false,
        })
    }

    pub fn state(&self) -> &TracerTrajectoryState {
        &self.state
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.state.p * self.state.p
    }

    /// Phase point in global coordinates at time `t`, which must lie in the
    /// flight in progress.
    pub fn phase_at(&self, kernel: &Kernel, t: f64) -> (f64, f64) {
        let (q, p) = self.state.phase_at(t);
        (q + kernel.offset as f64, p)
    }

    /// Processes every collision at or before `t_stop`.
    #[inline]
    pub fn advance<F: FnMut(&Collision)>(
        &mut self,
        kernel: &Kernel,
        t_stop: f64,
        rng: &mut RngStream,
        mut on_collision: F,
    ) {
        self.advance_logged(kernel, t_stop, rng, |c, _| on_collision(c));
    }

    pub fn advance_logged<F: FnMut(&Collision, &LoggedEvent)>(
        &mut self,
        kernel: &Kernel,
        t_stop: f64,
        rng: &mut RngStream,
        mut on_collision: F,
    ) {
        let space = kernel.space();
        while self.state.next_event_time <= t_stop {
            let from = self.state.chain_state;
            let index = space.index(from).expect("tracer state lies in E");
            let next = space.state(kernel.rows[index].sample(rng));
            let target = next.scatterer;
            let beta = kernel.betas[target];
            let speed = emission_speed_from_uniform(beta, rng.uniform_open());
            let event = LoggedEvent {
                time: self.state.next_event_time,
                next_state: next,
                speed,
            };
            let collision = Collision {
                time: event.time,
                scatterer: kernel.offset + target,
                beta,
                incoming_energy: 0.5 * self.state.p * self.state.p,
                outgoing_energy: 0.5 * speed * speed,
                crossed_link: self
                    .complete_flight
                    .then(|| (kernel.offset + from.scatterer.min(target), from.sign)),
            };
            self.apply(&event);
            on_collision(&collision, &event);
        }
    }

    fn apply(&mut self, event: &LoggedEvent) {
        let sign = event.next_state.sign.value();
        self.state = TracerTrajectoryState {
            q: event.next_state.scatterer as f64,
            p: sign * event.speed,
            chain_state: event.next_state,
            next_event_time: event.time + 1.0 / event.speed,
        };
        self.complete_flight = true;
    }

    /// Runs to `t_end`, recording every collision outcome.
    pub fn record(mut self, kernel: &Kernel, t_end: f64, rng: &mut RngStream) -> EventLog {
        let mut log = EventLog {
            initial: self.state,
            initial_complete: self.complete_flight,
            events: Vec::new(),
        };
        self.advance_logged(kernel, t_end, rng, |_, e| log.events.push(*e));
        log
    }
}

/// Phase points at the given increasing `times`, rebuilt from a log without
/// drawing random numbers.
pub fn replay(kernel: &Kernel, log: &EventLog, times: &[f64]) -> Vec<(f64, f64)> {
    let mut tracer = Tracer {
        state: log.initial,
        complete_flight: log.initial_complete,
    };
    let mut events = log.events.iter().peekable();
    times
        .iter()
        .map(|&t| {
            while let Some(e) = events.next_if(|e| e.time <= t) {
                tracer.apply(e);
            }
            tracer.phase_at(kernel, t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_point_targets_the_scatterer_ahead() {
        let k = Kernel::wandering(&[1.0, 1.0, 1.0]).unwrap();
        let t = Tracer::from_phase(&k, 0.25, 2.0).unwrap();
        assert_eq!(t.state().chain_state, ChainState::new(0, Sign::Plus));
        assert_eq!(t.state().next_event_time, 0.375);
        let t = Tracer::from_phase(&k, 1.0, -1.0).unwrap();
        assert_eq!(t.state().chain_state, ChainState::new(1, Sign::Minus));
        assert_eq!(t.state().next_event_time, 1.0);
        assert!(Tracer::from_phase(&k, 2.0, 1.0).is_err());
        assert!(Tracer::from_phase(&k, 0.0, -1.0).is_err());
        assert!(Tracer::from_phase(&k, 0.5, 0.0).is_err());
    }

    #[test]
    fn boundary_reflection_and_period() {
        let k = Kernel::wandering(&[1.0, 2.0, 0.5]).unwrap();
        let mut rng = RngStream::new(3, 0);
        let mut t = Tracer::start(&k, InitialCondition::Stationary, &mut rng).unwrap();
        let mut states = Vec::new();
        let mut hits = Vec::new();
        t.advance_logged(&k, 500.0, &mut rng, |c, e| {
            states.push(e.next_state);
            hits.push(c.scatterer);
        });
        assert!(states.len() > 40);
        for (s, h) in states.iter().zip(&hits) {
            assert_eq!(s.scatterer, *h);
            if *h == 0 {
                assert_eq!(s.sign, Sign::Plus);
            }
            if *h == 2 {
                assert_eq!(s.sign, Sign::Minus);
            }
        }
        for w in states.windows(5) {
            assert_eq!(w[0], w[4]);
        }
    }

    #[test]
    fn confined_kernel_uses_global_indices() {
        let k = Kernel::confined(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        let mut rng = RngStream::new(1, 1);
        let mut t = Tracer::start(&k, InitialCondition::Stationary, &mut rng).unwrap();
        t.advance(&k, 100.0, &mut rng, |c| {
            assert!(c.scatterer == 2 || c.scatterer == 3);
            assert_eq!(c.beta, if c.scatterer == 2 { 3.0 } else { 4.0 });
            if let Some((link, _)) = c.crossed_link {
                assert_eq!(link, 2);
            }
        });
        let (q, _) = t.phase_at(&k, 100.0);
        assert!((2.0..=3.0).contains(&q));
    }

    #[test]
    fn replay_is_bitwise() {
        let q = TransitionMatrix::transmit_reflect(3, 0.4).unwrap();
        let k = Kernel::new(vec![1.0, 0.5, 2.0, 1.5], q, 0).unwrap();
        let times: Vec<f64> = (1..400).map(|i| i as f64 * 0.73).collect();

        let mut rng = RngStream::new(11, 5);
        let mut live = Tracer::from_phase(&k, 1.3, -0.8).unwrap();
        let start = live.clone();
        let mut sampled = Vec::new();
        for &t in &times {
            live.advance(&k, t, &mut rng, |_| {});
            sampled.push(live.phase_at(&k, t));
        }

        let mut rng = RngStream::new(11, 5);
        let log = start.record(&k, *times.last().unwrap(), &mut rng);
        let replayed = replay(&k, &log, &times);
        for (a, b) in sampled.iter().zip(&replayed) {
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
    }

    #[test]
    fn motion_is_affine_between_events() {
        let k = Kernel::wandering(&[1.0, 1.0]).unwrap();
        let mut rng = RngStream::new(2, 2);
        let mut t = Tracer::start(&k, InitialCondition::Stationary, &mut rng).unwrap();
        for step in 1..2000 {
            let time = step as f64 * 0.1;
            t.advance(&k, time, &mut rng, |_| {});
            let (q, p) = t.phase_at(&k, time);
            assert!((-1e-12..=1.0 + 1e-12).contains(&q));
            assert!(t.state().next_event_time > time);
            assert_eq!(p, t.state().p);
        }
    }
}
