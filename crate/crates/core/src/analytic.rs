//! Closed-form stationary quantities for every model.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::model::{chain_stationary_distribution, ChainState, InverseTempProfile, ModelKind, Sign, TransitionMatrix};
use crate::sampling::mean_interarrival;

const SQRT_HALF_PI: f64 = 1.253_314_137_315_500_3;

/// Which tracer dynamics a profile or report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    Wandering,
    Confined,
}

/// Stationary rates. Energy flows are per scatterer and count energy handed
/// from the scatterer to the tracers, so `𝓔_n = 𝓙_n − 𝓙_{n−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub transport: Transport,
    pub n_tracers: usize,
    /// Wandering normalization; `None` for confined tracers.
    pub z_total: Option<f64>,
    /// Mean duration of a flight across each link, summed over both directions.
    pub z_links: Vec<f64>,
    pub currents: Vec<f64>,
    pub energy_flows: Vec<f64>,
    pub entropy_rate: f64,
    pub frequencies: Vec<f64>,
    pub conductivities: Vec<f64>,
}

/// `√(π/2) Σ_n (√β_{n−1} + √β_n)`: the mean period of the wandering chain.
pub fn wandering_normalization(profile: &InverseTempProfile) -> f64 {
    link_normalizations(profile).iter().sum()
}

/// `√(πβ_n/2) + √(πβ_{n+1}/2)` for every link `n`.
pub fn link_normalizations(profile: &InverseTempProfile) -> Vec<f64> {
    profile
        .betas()
        .windows(2)
        .map(|w| mean_interarrival(w[0]) + mean_interarrival(w[1]))
        .collect()
}

fn energy_flows_from_currents(currents: &[f64]) -> Vec<f64> {
    let n = currents.len();
    (0..=n)
        .map(|i| {
            let right = if i < n { currents[i] } else { 0.0 };
            let left = if i > 0 { currents[i - 1] } else { 0.0 };
            right - left
        })
        .collect()
}

fn entropy_closed_form(temps: &[f64], z: &[f64]) -> f64 {
    temps
        .windows(2)
        .zip(z)
        .map(|(w, z)| {
            let d = w[0] - w[1];
            d * d / (z * w[0] * w[1])
        })
        .sum()
}

/// Stationary report for `n_tracers` independent wandering tracers.
pub fn wandering_stationary(profile: &InverseTempProfile, n_tracers: usize) -> Result<StationaryReport> {
    if n_tracers == 0 {
        return Err(Error::InvalidSize("at least one tracer is required".into()));
    }
    let m = n_tracers as f64;
    let temps = profile.temperatures();
    let z = wandering_normalization(profile);
    let n = profile.n_links();
    let currents: Vec<f64> = temps.windows(2).map(|w| m * (w[0] - w[1]) / z).collect();
    let energy_flows = energy_flows_from_currents(&currents);
    let frequencies = (0..=n)
        .map(|i| if i == 0 || i == n { m / z } else { 2.0 * m / z })
        .collect();
    Ok(StationaryReport {
        transport: Transport::Wandering,
        n_tracers,
        z_total: Some(z),
        z_links: link_normalizations(profile),
        entropy_rate: m * entropy_closed_form(&temps, &vec![z; n]),
        currents,
        energy_flows,
        frequencies,
        conductivities: vec![m / z; n],
    })
}

/// Stationary report for one confined tracer per cell.
pub fn confined_stationary(profile: &InverseTempProfile) -> StationaryReport {
    let temps = profile.temperatures();
    let z = link_normalizations(profile);
    let n = profile.n_links();
    let currents: Vec<f64> = temps.windows(2).zip(&z).map(|(w, z)| (w[0] - w[1]) / z).collect();
    let energy_flows = energy_flows_from_currents(&currents);
    let frequencies = (0..=n)
        .map(|i| {
            let left = if i > 0 { 1.0 / z[i - 1] } else { 0.0 };
            let right = if i < n { 1.0 / z[i] } else { 0.0 };
            left + right
        })
        .collect();
    StationaryReport {
        transport: Transport::Confined,
        n_tracers: n,
        z_total: None,
        entropy_rate: entropy_closed_form(&temps, &z),
        conductivities: z.iter().map(|z| 1.0 / z).collect(),
        z_links: z,
        currents,
        energy_flows,
        frequencies,
    }
}

/// `−Σ 𝓔_n / T_n`, the entropy rate recomputed from the energy flows.
pub fn entropy_from_flows(profile: &InverseTempProfile, energy_flows: &[f64]) -> f64 {
    -energy_flows
        .iter()
        .zip(profile.betas())
        .map(|(e, b)| e * b)
        .sum::<f64>()
}

/// Velocity law of the tracers found in one unit cell `[left, left + 1]`:
/// `weight · β e^{−βp²/2}` for each sign of `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellDensity {
    pub left: usize,
    pub plus_weight: f64,
    pub plus_beta: f64,
    pub minus_weight: f64,
    pub minus_beta: f64,
}

impl CellDensity {
    pub fn density(&self, p: f64) -> f64 {
        if p > 0.0 {
            self.plus_weight * self.plus_beta * (-self.plus_beta * p * p / 2.0).exp()
        } else if p < 0.0 {
            self.minus_weight * self.minus_beta * (-self.minus_beta * p * p / 2.0).exp()
        } else {
            0.0
        }
    }

    /// Probability of the cell with `sign(p) = sign` and `|p| ∈ [lo, hi]`.
    pub fn mass(&self, sign: Sign, lo: f64, hi: f64) -> f64 {
        let (w, b) = match sign {
            Sign::Plus => (self.plus_weight, self.plus_beta),
            Sign::Minus => (self.minus_weight, self.minus_beta),
        };
        let s = (b / 2.0).sqrt();
        let upper = if hi.is_infinite() { 1.0 } else { erf(hi * s) };
        w * b * SQRT_HALF_PI / b.sqrt() * (upper - erf(lo * s))
    }

    pub fn total_mass(&self) -> f64 {
        self.mass(Sign::Plus, 0.0, f64::INFINITY) + self.mass(Sign::Minus, 0.0, f64::INFINITY)
    }
}

/// Stationary phase-space density, stored cell by cell.
///
/// For confined tracers each cell holds its own tracer and carries unit mass;
/// for the other models the whole density has unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantDensity {
    pub cells: Vec<CellDensity>,
    pub per_cell_normalized: bool,
}

impl InvariantDensity {
    pub fn cell_of(&self, q: f64) -> Option<&CellDensity> {
        if !(q >= 0.0 && q <= self.cells.len() as f64) {
            return None;
        }
        let i = (q.floor() as usize).min(self.cells.len() - 1);
        self.cells.get(i)
    }

    pub fn density(&self, q: f64, p: f64) -> f64 {
        self.cell_of(q).map_or(0.0, |c| c.density(p))
    }
}

/// Invariant density of the phase point for a model.
pub fn invariant_density(model: &ModelKind) -> Result<InvariantDensity> {
    model.validate()?;
    match model {
        ModelKind::Basic { beta } => Ok(InvariantDensity {
            cells: vec![CellDensity {
                left: 0,
                plus_weight: 1.0 / mean_interarrival(*beta),
                plus_beta: *beta,
                minus_weight: 0.0,
                minus_beta: *beta,
            }],
            per_cell_normalized: false,
        }),
        ModelKind::Wandering { profile, .. } => {
            let z = wandering_normalization(profile);
            Ok(InvariantDensity {
                cells: profile
                    .betas()
                    .windows(2)
                    .enumerate()
                    .map(|(n, w)| CellDensity {
                        left: n,
                        plus_weight: 1.0 / z,
                        plus_beta: w[0],
                        minus_weight: 1.0 / z,
                        minus_beta: w[1],
                    })
                    .collect(),
                per_cell_normalized: false,
            })
        }
        ModelKind::Confined { profile } => Ok(InvariantDensity {
            cells: profile
                .betas()
                .windows(2)
                .zip(link_normalizations(profile))
                .enumerate()
                .map(|(n, (w, z))| CellDensity {
                    left: n,
                    plus_weight: 1.0 / z,
                    plus_beta: w[0],
                    minus_weight: 1.0 / z,
                    minus_beta: w[1],
                })
                .collect(),
            per_cell_normalized: true,
        }),
        ModelKind::General { profile, matrix } => general_density(profile, matrix),
    }
}

/// A flight from `(n, σ)` crosses the cell between `n` and `n + σ` with a
/// speed law set by `β_n`, and it occupies that cell for a time proportional
/// to its duration, so the cell weight of each sign is the chain weight of the
/// departure state.
fn general_density(profile: &InverseTempProfile, matrix: &TransitionMatrix) -> Result<InvariantDensity> {
    let nu = chain_stationary_distribution(matrix)?;
    let space = matrix.space();
    let weight = |state: ChainState| nu[space.index(state).expect("state in E")];
    let z: f64 = space
        .iter()
        .zip(&nu)
        .map(|(s, w)| w * mean_interarrival(profile.beta(s.scatterer)))
        .sum();
    let cells = (0..profile.n_links())
        .map(|n| CellDensity {
            left: n,
            plus_weight: weight(ChainState::new(n, Sign::Plus)) / z,
            plus_beta: profile.beta(n),
            minus_weight: weight(ChainState::new(n + 1, Sign::Minus)) / z,
            minus_beta: profile.beta(n + 1),
        })
        .collect();
    Ok(InvariantDensity {
        cells,
        per_cell_normalized: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{integrate_to_infinity, Tolerance};

    fn temps(t: &[f64]) -> InverseTempProfile {
        InverseTempProfile::from_temperatures(t).unwrap()
    }

    #[test]
    fn normalization_examples() {
        let z = wandering_normalization(&temps(&[1.0, 1.0]));
        assert!((z - 2.0 * (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-15);
        for n in 1..6 {
            let beta = 2.7;
            let z = wandering_normalization(&InverseTempProfile::uniform(beta, n).unwrap());
            let expect = 2.0 * n as f64 * (std::f64::consts::PI * beta / 2.0).sqrt();
            assert!((z / expect - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn wandering_current_example() {
        let r = wandering_stationary(&temps(&[2.0, 1.0]), 1).unwrap();
        let expect = 1.0 / ((std::f64::consts::PI / 2.0).sqrt() * (1.0 + 1.0 / 2f64.sqrt()));
        assert!((r.currents[0] - expect).abs() < 1e-15);
        assert!((r.currents[0] - 0.4674).abs() < 1e-4);
    }

    #[test]
    fn confined_current_example() {
        let r = confined_stationary(&temps(&[1.0, 4.0]));
        let expect = -3.0 / ((std::f64::consts::PI / 2.0).sqrt() * 1.5);
        assert!((r.currents[0] - expect).abs() < 1e-14);
        assert!((r.currents[0] + 1.5958).abs() < 1e-4);
    }

    #[test]
    fn equilibrium_is_flat() {
        let p = InverseTempProfile::uniform(1.0, 4).unwrap();
        let w = wandering_stationary(&p, 3).unwrap();
        assert!(w.currents.iter().all(|&j| j == 0.0));
        assert_eq!(w.entropy_rate, 0.0);
        let c = confined_stationary(&p);
        for k in c.conductivities {
            assert!((k - (1.0 / (2.0 * std::f64::consts::PI)).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn wandering_frequencies() {
        let p = temps(&[1.0, 1.25, 1.5, 1.75, 2.0]);
        let r = wandering_stationary(&p, 2).unwrap();
        let z = r.z_total.unwrap();
        assert_eq!(r.frequencies[0], 2.0 / z);
        assert_eq!(r.frequencies[2], 4.0 / z);
        assert_eq!(r.frequencies[4], 2.0 / z);
    }

    #[test]
    fn energy_flow_closed_forms() {
        let t = [1.0, 1.7, 1.3, 2.5];
        let p = temps(&t);
        let w = wandering_stationary(&p, 1).unwrap();
        let z = w.z_total.unwrap();
        assert!((w.energy_flows[0] - (t[0] - t[1]) / z).abs() < 1e-15);
        assert!((w.energy_flows[3] - (t[3] - t[2]) / z).abs() < 1e-15);
        for n in 1..3 {
            let e = (2.0 * t[n] - t[n - 1] - t[n + 1]) / z;
            assert!((w.energy_flows[n] - e).abs() < 1e-15);
        }
        let c = confined_stationary(&p);
        for n in 1..3 {
            let e = (t[n] - t[n - 1]) / c.z_links[n - 1] + (t[n] - t[n + 1]) / c.z_links[n];
            assert!((c.energy_flows[n] - e).abs() < 1e-15);
        }
    }

    #[test]
    fn conductivity_limit_linear_profile() {
        let n = 4000;
        let t: Vec<f64> = (0..=n).map(|i| 1.0 + i as f64 / n as f64).collect();
        let r = wandering_stationary(&temps(&t), n).unwrap();
        let limit = (2f64.sqrt() + 1.0) / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((r.conductivities[n / 2] - limit).abs() < 1e-6);
        assert!((limit - 0.4815).abs() < 1e-4);
    }

    #[test]
    fn densities_integrate_to_one() {
        let p = temps(&[1.0, 3.0, 0.5]);
        let models = [
            ModelKind::Basic { beta: 1.7 },
            ModelKind::Wandering {
                profile: p.clone(),
                n_tracers: 1,
            },
            ModelKind::General {
                profile: p.clone(),
                matrix: TransitionMatrix::transmit_reflect(2, 0.3).unwrap(),
            },
        ];
        for m in &models {
            let d = invariant_density(m).unwrap();
            let mut total = 0.0;
            for c in &d.cells {
                let plus = integrate_to_infinity(|x| c.density(x), 0.0, Tolerance::new(1e-14, 1e-14)).unwrap();
                let minus = integrate_to_infinity(|x| c.density(-x), 0.0, Tolerance::new(1e-14, 1e-14)).unwrap();
                total += plus.value + minus.value;
                assert!((plus.value + minus.value - c.total_mass()).abs() < 1e-12);
            }
            assert!((total - 1.0).abs() < 1e-10, "{m:?}: {total}");
        }
        let d = invariant_density(&ModelKind::Confined { profile: p }).unwrap();
        for c in &d.cells {
            assert!((c.total_mass() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn general_with_wandering_matrix_matches_wandering() {
        let p = temps(&[1.0, 2.0, 0.7, 1.4]);
        let g = invariant_density(&ModelKind::General {
            profile: p.clone(),
            matrix: TransitionMatrix::wandering(3).unwrap(),
        })
        .unwrap();
        let w = invariant_density(&ModelKind::Wandering {
            profile: p,
            n_tracers: 1,
        })
        .unwrap();
        for i in 0..=60 {
            let q = 3.0 * i as f64 / 60.0;
            for j in -20..=20 {
                let pp = j as f64 / 5.0;
                let a = g.density(q, pp);
                let b = w.density(q, pp);
                assert!((a - b).abs() <= 1e-12 * b.max(1e-300), "q={q} p={pp}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn basic_marginal_is_half_gaussian() {
        let d = invariant_density(&ModelKind::Basic { beta: 1.0 }).unwrap();
        for p in [0.1f64, 0.7, 2.0] {
            let expect = (2.0 / std::f64::consts::PI).sqrt() * (-p * p / 2.0).exp();
            assert!((d.density(0.3, p) - expect).abs() < 1e-15);
            assert_eq!(d.density(0.3, -p), 0.0);
        }
    }
}
