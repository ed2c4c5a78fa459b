use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{sample_interarrival, RngStream};

/// Phase point and renewal clocks of the basic process at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicSample {
    pub time: f64,
    pub q: f64,
    pub p: f64,
    /// Time since the flight in progress left the wall.
    pub age: f64,
    /// Time until it next reaches the wall.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicRun {
    pub samples: Vec<BasicSample>,
    /// Number of wall collisions in `(0, t_end]`.
    pub collisions: u64,
    pub t_end: f64,
}

/// A particle crossing the unit box at constant speed, re-emitted at the wall
/// with a fresh speed after every crossing. `sample_times` must be sorted and
/// lie in `[0, t_end]`.
pub fn run_basic(
    beta: f64,
    q0: f64,
    p0: f64,
    t_end: f64,
    sample_times: &[f64],
    rng: &mut RngStream,
) -> Result<BasicRun> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!("beta = {beta} must be positive")));
    }
    if !((0.0..1.0).contains(&q0) && p0.is_finite() && p0 > 0.0) {
        return Err(Error::Domain(format!(
            "initial point ({q0}, {p0}) must have q in [0,1) and p > 0"
        )));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::Domain(format!("t_end = {t_end} must be positive")));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.iter().any(|t| !(0.0..=t_end).contains(t)) {
        return Err(Error::Domain(
            "sample times must be sorted and lie in [0, t_end]".into(),
        ));
    }

    let mut flight_start = -q0 / p0;
    let mut flight_end = (1.0 - q0) / p0;
    let mut speed = p0;
    let mut collisions = 0u64;
    let mut step = |until: f64, start: &mut f64, end: &mut f64, speed: &mut f64, count: &mut u64| -> Result<()> {
        while *end <= until {
            *count += 1;
            let tau = sample_interarrival(beta, rng)?;
            *start = *end;
            *end = *start + tau;
            *speed = 1.0 / tau;
        }
        Ok(())
    };

    let mut samples = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        step(t, &mut flight_start, &mut flight_end, &mut speed, &mut collisions)?;
        let age = t - flight_start;
        samples.push(BasicSample {
            time: t,
            q: age * speed,
            p: speed,
            age,
            residual: flight_end - t,
        });
    }
    step(t_end, &mut flight_start, &mut flight_end, &mut speed, &mut collisions)?;

    Ok(BasicRun {
        samples,
        collisions,
        t_end,
    })
}
