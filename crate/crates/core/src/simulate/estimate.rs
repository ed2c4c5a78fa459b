use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{InitialCondition, Kernel, Tracer};
use super::stream_id;
use crate::analytic::Transport;
use crate::cgf::CgfQuery;
use crate::error::{Error, Result};
use crate::model::InverseTempProfile;
use crate::numeric::CompensatedSum;
use crate::sampling::RngStream;
use crate::stats::{jackknife_log_mean_exp, log_mean_exp, max_weight_share, mean_and_se};

const HEAVY_TAIL_SHARE: f64 = 0.1;
const RESAMPLE_STREAM: u64 = 0xFFFF_FFFF;

/// The current through one link carried by a single tracer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentSpec {
    pub transport: Transport,
    pub profile: InverseTempProfile,
    pub link: usize,
}

impl CurrentSpec {
    fn kernel(&self) -> Result<Kernel> {
        if self.link >= self.profile.n_links() {
            return Err(Error::Domain(format!("link {} out of range", self.link)));
        }
        match self.transport {
            Transport::Wandering => Kernel::wandering(self.profile.betas()),
            Transport::Confined => Kernel::confined(self.profile.betas(), self.link),
        }
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        CgfQuery::new(self.link, lambda, self.profile.clone(), self.transport).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Direct,
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgfEstimate {
    pub estimator: EstimatorKind,
    pub value: f64,
    pub std_error: f64,
    /// Largest share of an exponential mean carried by one sample.
    pub max_weight_share: f64,
    pub heavy_tail_warning: bool,
    pub n_samples: usize,
}

fn accumulate(tracer: &mut Tracer, kernel: &Kernel, link: usize, t_stop: f64, rng: &mut RngStream) -> f64 {
    let mut j = CompensatedSum::new();
    tracer.advance(kernel, t_stop, rng, |c| {
        if let Some((l, sign)) = c.crossed_link {
            if l == link {
                j.add(sign.value() * c.incoming_energy);
            }
        }
    });
    j.value()
}

fn replica_currents(spec: &CurrentSpec, t: f64, n_replicas: usize, seed: u64) -> Result<Vec<f64>> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("horizon t = {t} must be positive")));
    }
    let kernel = spec.kernel()?;
    (0..n_replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(seed, stream_id(r, 0));
            let mut tracer = Tracer::start(&kernel, InitialCondition::Stationary, &mut rng)?;
            Ok(accumulate(&mut tracer, &kernel, spec.link, t, &mut rng))
        })
        .collect()
}

/// `(1/t) log mean exp(−λ J)` over independent stationary replicas, with a
/// jackknife error bar. Biased at finite `t`; unreliable when a few replicas
/// dominate the mean, which is flagged by `heavy_tail_warning`.
pub fn estimate_empirical_cgf(
    spec: &CurrentSpec,
    lambda: f64,
    t: f64,
    n_replicas: usize,
    seed: u64,
) -> Result<CgfEstimate> {
    spec.check_lambda(lambda)?;
    if n_replicas < 100 {
        return Err(Error::InvalidSize(format!(
            "at least 100 replicas are required, got {n_replicas}"
        )));
    }
    let xs: Vec<f64> = replica_currents(spec, t, n_replicas, seed)?
        .into_iter()
        .map(|j| -lambda * j)
        .collect();
    let share = max_weight_share(&xs);
    Ok(CgfEstimate {
        estimator: EstimatorKind::Direct,
        value: log_mean_exp(&xs) / t,
        std_error: jackknife_log_mean_exp(&xs) / t,
        max_weight_share: share,
        heavy_tail_warning: share > HEAVY_TAIL_SHARE,
        n_samples: n_replicas,
    })
}

/// Population (cloning) estimate: `n_clones` copies evolve for `dt`, are
/// weighted by `exp(−λ ΔJ)` and resampled in proportion to their weights.
/// The growth rate of the mean weight estimates the CGF.
pub fn estimate_cgf_population(
    spec: &CurrentSpec,
    lambda: f64,
    t: f64,
    n_clones: usize,
    dt: f64,
    seed: u64,
) -> Result<CgfEstimate> {
    spec.check_lambda(lambda)?;
    if n_clones < 2 {
        return Err(Error::InvalidSize("at least two clones are required".into()));
    }
    if !(dt > 0.0 && t.is_finite() && t >= dt) {
        return Err(Error::Domain(format!("need 0 < dt <= t, got dt = {dt}, t = {t}")));
    }
    let kernel = spec.kernel()?;
    let mut clones = (0..n_clones as u64)
        .map(|i| {
            let mut rng = RngStream::new(seed, stream_id(0, i));
            Tracer::start(&kernel, InitialCondition::Stationary, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let n_steps = (t / dt).ceil() as usize;
    let mut growth = Vec::with_capacity(n_steps);
    let mut worst_share: f64 = 0.0;
    for k in 0..n_steps {
        let stop = if k + 1 == n_steps { t } else { (k + 1) as f64 * dt };
        let interval = stream_id(k as u64 + 1, 0);
        let xs: Vec<f64> = clones
            .par_iter_mut()
            .enumerate()
            .map(|(i, c)| {
                let mut rng = RngStream::new(seed, interval | i as u64);
                -lambda * accumulate(c, &kernel, spec.link, stop, &mut rng)
            })
            .collect();
        growth.push((log_mean_exp(&xs), stop - k as f64 * dt));
        worst_share = worst_share.max(max_weight_share(&xs));

        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut cumulative = Vec::with_capacity(n_clones);
        let mut acc = 0.0;
        for x in &xs {
            acc += (x - max).exp();
            cumulative.push(acc);
        }
        let mut rng = RngStream::new(seed, interval | RESAMPLE_STREAM);
        let parents: Vec<usize> = (0..n_clones)
            .map(|_| {
                let u = rng.uniform() * acc;
                cumulative.partition_point(|c| *c <= u).min(n_clones - 1)
            })
            .collect();
        clones = parents.into_iter().map(|p| clones[p].clone()).collect();
    }

    let value = growth.iter().map(|(g, _)| g).sum::<f64>() / t;
    let n_blocks = growth.len().clamp(1, 10);
    let per_block = growth.len() / n_blocks;
    let blocks: Vec<f64> = growth
        .chunks(per_block)
        .take(n_blocks)
        .map(|b| b.iter().map(|(g, _)| g).sum::<f64>() / b.iter().map(|(_, d)| d).sum::<f64>())
        .collect();
    let (_, std_error) = mean_and_se(&blocks);
    Ok(CgfEstimate {
        estimator: EstimatorKind::Population,
        value,
        std_error,
        max_weight_share: worst_share,
        heavy_tail_warning: worst_share > HEAVY_TAIL_SHARE,
        n_samples: n_clones,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMoment {
    /// `E[J²]/t`.
    pub value: f64,
    pub std_error: f64,
    /// `E[J]/t`.
    pub mean_rate: f64,
}

/// `(1/t) E[J_n([0,t])²]` over independent stationary replicas.
pub fn estimate_current_second_moment(
    spec: &CurrentSpec,
    t: f64,
    n_replicas: usize,
    seed: u64,
) -> Result<SecondMoment> {
    if n_replicas < 2 {
        return Err(Error::InvalidSize("at least two replicas are required".into()));
    }
    let js = replica_currents(spec, t, n_replicas, seed)?;
    let squares: Vec<f64> = js.iter().map(|j| j * j / t).collect();
    let (value, std_error) = mean_and_se(&squares);
    Ok(SecondMoment {
        value,
        std_error,
        mean_rate: js.iter().sum::<f64>() / (n_replicas as f64 * t),
    })
}
