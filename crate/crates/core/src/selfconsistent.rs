//! Temperature profiles for which interior scatterers exchange no net energy.

use serde::{Deserialize, Serialize};

use crate::analytic::{confined_stationary, link_normalizations, wandering_stationary, Transport};
use crate::error::{Error, Result};
use crate::model::InverseTempProfile;
use crate::numeric::{brent, RootTolerance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSolution {
    pub temperatures: Vec<f64>,
    /// Common link flux: `T_{n+1} − T_n` over `T_n^{-1/2} + T_{n+1}^{-1/2}` for
    /// confined tracers, the temperature step for wandering tracers.
    pub flux: f64,
    /// Largest interior energy flow of the resulting stationary state.
    pub residual: f64,
    pub transport: Transport,
}

impl ProfileSolution {
    pub fn profile(&self) -> Result<InverseTempProfile> {
        InverseTempProfile::from_temperatures(&self.temperatures)
    }
}

fn check_inputs(t_left: f64, t_right: f64, n_links: usize) -> Result<()> {
    for t in [t_left, t_right] {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain(format!("temperature {t} must be positive and finite")));
        }
    }
    if n_links == 0 {
        return Err(Error::InvalidSize("at least one link is required".into()));
    }
    Ok(())
}

fn interior_residual(energy_flows: &[f64]) -> f64 {
    let n = energy_flows.len();
    energy_flows[1..n - 1].iter().fold(0.0, |m, e| m.max(e.abs()))
}

/// Linear interpolation between the reservoir temperatures.
pub fn wandering_profile(t_left: f64, t_right: f64, n_links: usize) -> Result<ProfileSolution> {
    check_inputs(t_left, t_right, n_links)?;
    let step = (t_right - t_left) / n_links as f64;
    let mut temperatures: Vec<f64> = (0..=n_links)
        .map(|n| t_left + n as f64 / n_links as f64 * (t_right - t_left))
        .collect();
    temperatures[n_links] = t_right;
    let report = wandering_stationary(&InverseTempProfile::from_temperatures(&temperatures)?, 1)?;
    Ok(ProfileSolution {
        flux: step,
        residual: interior_residual(&report.energy_flows),
        temperatures,
        transport: Transport::Wandering,
    })
}

/// Solves `x − t = c (t^{-1/2} + x^{-1/2})` for `x ≥ t`.
fn advance(t: f64, c: f64) -> Result<f64> {
    if c == 0.0 {
        return Ok(t);
    }
    let g = |x: f64| x - t - c * (t.powf(-0.5) + x.powf(-0.5));
    let hi = t + 2.0 * c / t.sqrt();
    Ok(brent(
        g,
        t,
        hi,
        RootTolerance {
            x_abs: 0.0,
            x_rel: 1e-15,
            max_iter: 200,
        },
    )?
    .x)
}

fn shoot(t_left: f64, c: f64, n_links: usize) -> Result<Vec<f64>> {
    let mut temps = Vec::with_capacity(n_links + 1);
    temps.push(t_left);
    for n in 0..n_links {
        let next = advance(temps[n], c)?;
        temps.push(next);
    }
    Ok(temps)
}

/// Increasing solution from `t_left` up to `t_right`, by shooting on the flux.
fn confined_increasing(t_left: f64, t_right: f64, n_links: usize) -> Result<(Vec<f64>, f64)> {
    if t_left == t_right {
        return Ok((vec![t_left; n_links + 1], 0.0));
    }
    let end = |c: f64| shoot(t_left, c, n_links).map(|t| t[n_links] - t_right);
    let mut hi = (t_right - t_left) / n_links as f64;
    let mut doublings = 0;
    while end(hi)? < 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 {
            return Err(Error::Solver(format!(
                "no flux reaches T_R = {t_right} from T_L = {t_left} in {n_links} links"
            )));
        }
    }
    let mut failure = None;
    let root = brent(
        |c| match end(c) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        hi,
        RootTolerance {
            x_abs: 0.0,
            x_rel: 2.0 * f64::EPSILON,
            max_iter: 300,
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let c = root?.x;
    let mut temps = shoot(t_left, c, n_links)?;
    let miss = (temps[n_links] - t_right).abs();
    if miss > 1e-12 * t_right {
        return Err(Error::Solver(format!(
            "shooting missed T_R = {t_right} by {miss:e} (flux {c})"
        )));
    }
    temps[n_links] = t_right;
    Ok((temps, c))
}

/// Self-consistent profile for confined tracers: every link carries the same
/// flux `(T_{n+1} − T_n)/(T_n^{-1/2} + T_{n+1}^{-1/2})`.
pub fn confined_profile(t_left: f64, t_right: f64, n_links: usize) -> Result<ProfileSolution> {
    check_inputs(t_left, t_right, n_links)?;
    let (temperatures, flux) = if t_right >= t_left {
        confined_increasing(t_left, t_right, n_links)?
    } else {
        let (mut t, c) = confined_increasing(t_right, t_left, n_links)?;
        t.reverse();
        (t, -c)
    };
    let report = confined_stationary(&InverseTempProfile::from_temperatures(&temperatures)?);
    Ok(ProfileSolution {
        flux,
        residual: interior_residual(&report.energy_flows),
        temperatures,
        transport: Transport::Confined,
    })
}

/// Continuum limit of the confined profile on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumProfile {
    pub t_left: f64,
    pub t_right: f64,
}

impl ContinuumProfile {
    pub fn new(t_left: f64, t_right: f64) -> Result<Self> {
        check_inputs(t_left, t_right, 1)?;
        Ok(Self { t_left, t_right })
    }

    /// `(T_L^{3/2} + x (T_R^{3/2} − T_L^{3/2}))^{2/3}`.
    pub fn at(&self, x: f64) -> f64 {
        let a = self.t_left.powf(1.5);
        let b = self.t_right.powf(1.5);
        (a + x * (b - a)).powf(2.0 / 3.0)
    }

    /// `√(h(x)/(2π))`.
    pub fn conductivity(&self, x: f64) -> f64 {
        (self.at(x) / (2.0 * std::f64::consts::PI)).sqrt()
    }
}

pub fn continuum_profile(t_left: f64, t_right: f64) -> Result<ContinuumProfile> {
    ContinuumProfile::new(t_left, t_right)
}

pub fn local_conductivity(t_left: f64, t_right: f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0, 1]")));
    }
    Ok(ContinuumProfile::new(t_left, t_right)?.conductivity(x))
}

/// `1/Z_{⌊Nx⌋}` of the self-consistent confined profile with `N` links.
pub fn finite_conductivity(t_left: f64, t_right: f64, n_links: usize, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0, 1]")));
    }
    let sol = confined_profile(t_left, t_right, n_links)?;
    let z = link_normalizations(&sol.profile()?);
    let link = ((n_links as f64 * x).floor() as usize).min(n_links - 1);
    Ok(1.0 / z[link])
}

/// `max_n |T_n − h(n/N)|` for the confined profile.
pub fn continuum_error(t_left: f64, t_right: f64, n_links: usize) -> Result<f64> {
    let sol = confined_profile(t_left, t_right, n_links)?;
    let h = ContinuumProfile::new(t_left, t_right)?;
    Ok(sol
        .temperatures
        .iter()
        .enumerate()
        .map(|(n, t)| (t - h.at(n as f64 / n_links as f64)).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_examples() {
        let s = wandering_profile(1.0, 2.0, 4).unwrap();
        assert_eq!(s.temperatures, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert!(s.residual < 1e-15);
        let flat = wandering_profile(3.0, 3.0, 5).unwrap();
        assert!(flat.temperatures.iter().all(|&t| t == 3.0));
        assert!(wandering_profile(0.0, 1.0, 3).is_err());
        assert!(wandering_profile(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn confined_flat() {
        let s = confined_profile(2.0, 2.0, 6).unwrap();
        assert!(s.temperatures.iter().all(|&t| t == 2.0));
        assert_eq!(s.flux, 0.0);
    }

    #[test]
    fn confined_two_links_by_newton() {
        let s = confined_profile(1.0, 4.0, 2).unwrap();
        // Newton on (x−1)/(1+x^{-1/2}) + (x−4)/(x^{-1/2}+1/2) = 0.
        let g = |x: f64| (x - 1.0) / (1.0 + x.powf(-0.5)) + (x - 4.0) / (x.powf(-0.5) + 0.5);
        let mut x = 2.5;
        for _ in 0..50 {
            let h = 1e-7;
            x -= g(x) / ((g(x + h) - g(x - h)) / (2.0 * h));
        }
        assert!((s.temperatures[1] - x).abs() < 1e-10);
        assert!((x - 25.0 / 9.0).abs() < 1e-10);
    }

    #[test]
    fn confined_constant_flux_and_shape() {
        let s = confined_profile(1.0, 4.0, 30).unwrap();
        let t = &s.temperatures;
        for w in t.windows(2) {
            let c = (w[1] - w[0]) / (w[0].powf(-0.5) + w[1].powf(-0.5));
            assert!((c / s.flux - 1.0).abs() < 1e-12);
        }
        for w in t.windows(3) {
            assert!(w[2] - w[1] <= w[1] - w[0] + 1e-15);
            assert!(w[1] > w[0]);
        }
        assert!(s.residual <= 1e-12);
        assert_eq!(t[0], 1.0);
        assert_eq!(t[30], 4.0);
    }

    #[test]
    fn confined_mirrored() {
        let up = confined_profile(1.0, 4.0, 9).unwrap();
        let down = confined_profile(4.0, 1.0, 9).unwrap();
        let mut rev = down.temperatures.clone();
        rev.reverse();
        assert_eq!(rev, up.temperatures);
        assert_eq!(down.flux, -up.flux);
    }

    #[test]
    fn continuum_examples() {
        let h = continuum_profile(1.0, 4.0).unwrap();
        assert!((h.at(0.0) - 1.0).abs() < 1e-15);
        assert!((h.at(1.0) - 4.0).abs() < 1e-14);
        assert!((h.at(0.5) - 4.5f64.powf(2.0 / 3.0)).abs() < 1e-15);
        assert!((h.at(0.5) - 2.7257).abs() < 1e-4);
        let flat = continuum_profile(2.0, 2.0).unwrap();
        assert!((flat.at(0.37) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn continuum_solves_the_flux_equation() {
        use crate::numeric::richardson;
        let h = continuum_profile(1.0, 4.0).unwrap();
        let derivative = |x: f64| {
            let est: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
                .iter()
                .map(|d| (h.at(x + d) - h.at(x - d)) / (2.0 * d))
                .collect();
            richardson(&est, 2, 2)
        };
        let flux: Vec<f64> = (1..40)
            .map(|i| {
                let x = i as f64 / 40.0;
                h.at(x).sqrt() * derivative(x)
            })
            .collect();
        for w in flux.windows(2) {
            assert!((w[1] - w[0]).abs() * 40.0 < 1e-8, "{w:?}");
        }
    }

    #[test]
    fn conductivity_examples() {
        let k = local_conductivity(1.0, 1.0, 0.3).unwrap();
        assert!((k - (1.0 / (2.0 * std::f64::consts::PI)).sqrt()).abs() < 1e-15);
        let k = local_conductivity(1.0, 4.0, 1.0).unwrap();
        assert!((k - 0.7979).abs() < 1e-4);
        let finite = finite_conductivity(1.0, 4.0, 200, 0.5).unwrap();
        assert!((finite / local_conductivity(1.0, 4.0, 0.5).unwrap() - 1.0).abs() < 0.01);
    }

    #[test]
    fn continuum_error_at_hundred_links() {
        assert!(continuum_error(1.0, 4.0, 100).unwrap() <= 0.02);
    }
}
