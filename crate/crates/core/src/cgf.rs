//! Cumulant generating function of the time-integrated link current.
//!
//! `f_n(λ)` is zero on the plateau `[min(0,Δβ), max(0,Δβ)]` and otherwise the
//! unique `ε > 0` with `F_n(λ, ε) = 1`, where `F_n` is a product of factors
//! `C(β, Δ, λ, ε) = β ∫ v exp(−ε/v − (β + λΔ) v²/2) dv`.
//!
//! Scaling `v = u/√a` gives `C = (β/a)·I(ε√a)` with
//! `I(s) = ∫ u exp(−s/u − u²/2) du` and `I(0) = 1`.

use serde::{Deserialize, Serialize};

use crate::analytic::{link_normalizations, wandering_normalization, Transport};
use crate::error::{Error, Result};
use crate::model::InverseTempProfile;
use crate::numeric::{brent, extrapolate, integrate, integrate_to_infinity, richardson, RootTolerance, Tolerance};

const QUAD_TOL: Tolerance = Tolerance::new(1e-15, 1e-13);
const DEFICIT_CUTOFF: f64 = 0.5;

/// Sign of the current picked up by a flight from a given chain state.
pub type Orientation = i32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgfQuery {
    pub link: usize,
    pub lambda: f64,
    pub profile: InverseTempProfile,
    pub transport: Transport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    PositiveRoot,
    ZeroPlateau,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgfResult {
    pub value: f64,
    pub branch: Branch,
    /// `|F − 1|` at the returned value; zero on the plateau.
    pub root_residual: f64,
    /// Quadrature error bound on `F` at the returned value.
    pub quadrature_error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Factor {
    beta: f64,
    delta: Orientation,
    count: u32,
}

impl CgfQuery {
    pub fn new(link: usize, lambda: f64, profile: InverseTempProfile, transport: Transport) -> Result<Self> {
        let q = Self {
            link,
            lambda,
            profile,
            transport,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.profile.n_links();
        if self.link >= n {
            return Err(Error::Domain(format!("link {} out of range 0..{n}", self.link)));
        }
        let (lo, hi) = self.domain();
        if !(self.lambda > lo && self.lambda < hi) {
            return Err(Error::Domain(format!(
                "lambda = {} outside the admissible interval ({lo}, {hi})",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Open interval `(−β_n, β_{n+1})` on which the moment exists.
    pub fn domain(&self) -> (f64, f64) {
        (-self.profile.beta(self.link), self.profile.beta(self.link + 1))
    }

    /// Closed interval on which the CGF vanishes.
    pub fn plateau(&self) -> (f64, f64) {
        let d = self.delta_beta();
        (d.min(0.0), d.max(0.0))
    }

    /// `β_{n+1} − β_n`.
    pub fn delta_beta(&self) -> f64 {
        self.profile.beta(self.link + 1) - self.profile.beta(self.link)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.link, lambda, self.profile.clone(), self.transport)
    }

    fn factors(&self) -> Vec<Factor> {
        let n = self.link;
        let betas = self.profile.betas();
        let mut out = vec![
            Factor {
                beta: betas[n],
                delta: 1,
                count: 1,
            },
            Factor {
                beta: betas[n + 1],
                delta: -1,
                count: 1,
            },
        ];
        if self.transport == Transport::Confined {
            return out;
        }
        let last = betas.len() - 1;
        for (i, &beta) in betas.iter().enumerate() {
            let states = if i == 0 || i == last { 1 } else { 2 };
            let used = u32::from(i == n) + u32::from(i == n + 1);
            let count = states - used;
            if count == 0 {
                continue;
            }
            match out.iter_mut().find(|f| f.delta == 0 && f.beta == beta) {
                Some(f) => f.count += count,
                None => out.push(Factor { beta, delta: 0, count }),
            }
        }
        out
    }
}

/// Positive root of `u³ − u − s = 0`, the mode of `u exp(−s/u − u²/2)`.
fn mode(s: f64) -> f64 {
    let mut u = 1.0 + s.cbrt();
    for _ in 0..100 {
        let step = (u * u * u - u - s) / (3.0 * u * u - 1.0);
        let next = u - step;
        if next >= u || next.is_nan() {
            break;
        }
        u = next;
    }
    u
}

/// `ln I(s)` with its absolute error bound, by quadrature of the integrand
/// rescaled by its peak value.
fn log_i_direct(s: f64) -> Result<(f64, f64)> {
    let peak = mode(s);
    let log_peak = peak.ln() - s / peak - peak * peak / 2.0;
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        (u.ln() - s / u - u * u / 2.0 - log_peak).exp()
    };
    let left = integrate(g, 0.0, peak, QUAD_TOL)?;
    let right = integrate_to_infinity(g, peak, QUAD_TOL)?;
    let total = left.value + right.value;
    Ok((log_peak + total.ln(), (left.abs_error + right.abs_error) / total))
}

/// `I(s) − 1 = −∫ u e^{−u²/2} (1 − e^{−s/u}) du`, accurate for small `s`.
fn i_deficit(s: f64) -> Result<(f64, f64)> {
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        u * (-u * u / 2.0).exp() * (-(-s / u).exp_m1())
    };
    let left = integrate(g, 0.0, 1.0, QUAD_TOL)?;
    let right = integrate_to_infinity(g, 1.0, QUAD_TOL)?;
    Ok((-(left.value + right.value), left.abs_error + right.abs_error))
}

fn log_i(s: f64) -> Result<(f64, f64)> {
    if s == 0.0 {
        Ok((0.0, 0.0))
    } else if s < DEFICIT_CUTOFF {
        let (g, err) = i_deficit(s)?;
        Ok((g.ln_1p(), err / (1.0 + g)))
    } else {
        log_i_direct(s)
    }
}

fn effective_a(beta: f64, delta: Orientation, lambda: f64) -> Result<f64> {
    let a = beta + lambda * delta as f64;
    if a > 0.0 && a.is_finite() {
        Ok(a)
    } else {
        Err(Error::Divergent(format!(
            "beta + lambda*delta = {a} is not positive (beta = {beta}, delta = {delta}, lambda = {lambda})"
        )))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps >= 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon = {eps} must be finite and nonnegative")))
    }
}

/// `β ∫_0^∞ v exp(−ε/v − (β + λΔ) v²/2) dv` by adaptive quadrature.
pub fn c_factor(beta: f64, delta: Orientation, lambda: f64, eps: f64) -> Result<f64> {
    Ok(c_factor_with_error(beta, delta, lambda, eps)?.0)
}

/// [`c_factor`] together with an absolute error bound.
pub fn c_factor_with_error(beta: f64, delta: Orientation, lambda: f64, eps: f64) -> Result<(f64, f64)> {
    if !(-1..=1).contains(&delta) {
        return Err(Error::Domain(format!("orientation must be -1, 0 or 1, got {delta}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta = {beta} must be positive")));
    }
    check_eps(eps)?;
    let a = effective_a(beta, delta, lambda)?;
    let (log_i, rel_err) = log_i_direct(eps * a.sqrt())?;
    let value = beta / a * log_i.exp();
    Ok((value, value * rel_err))
}

/// `F_n(λ, ε)` as the product of its factors, each by direct quadrature.
pub fn big_f(query: &CgfQuery, eps: f64) -> Result<f64> {
    Ok(big_f_with_error(query, eps)?.0)
}

fn big_f_with_error(query: &CgfQuery, eps: f64) -> Result<(f64, f64)> {
    query.validate()?;
    check_eps(eps)?;
    let mut value = 1.0;
    let mut rel = 0.0;
    for f in query.factors() {
        let (c, err) = c_factor_with_error(f.beta, f.delta, query.lambda, eps)?;
        value *= c.powi(f.count as i32);
        rel += f.count as f64 * err / c;
    }
    Ok((value, value * rel))
}

/// `ln F_n(λ, ε)`, using a cancellation-free form when `ε√a` is small.
pub fn log_big_f(query: &CgfQuery, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let mut total = 0.0;
    for f in query.factors() {
        let a = effective_a(f.beta, f.delta, query.lambda)?;
        let log_ratio = if f.delta == 0 {
            0.0
        } else {
            -(query.lambda * f.delta as f64 / f.beta).ln_1p()
        };
        let (li, _) = log_i(eps * a.sqrt())?;
        total += f.count as f64 * (log_ratio + li);
    }
    Ok(total)
}

pub fn cgf_value(query: &CgfQuery) -> Result<CgfResult> {
    query.validate()?;
    let (p_lo, p_hi) = query.plateau();
    if query.lambda >= p_lo && query.lambda <= p_hi {
        return Ok(CgfResult {
            value: 0.0,
            branch: Branch::ZeroPlateau,
            root_residual: 0.0,
            quadrature_error_bound: 0.0,
        });
    }

    let g = |eps: f64| log_big_f(query, eps);
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut g_hi = g(hi)?;
    let mut doublings = 0;
    while g_hi > 0.0 {
        lo = hi;
        hi *= 2.0;
        g_hi = g(hi)?;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Solver(format!(
                "could not bracket the root for lambda = {}",
                query.lambda
            )));
        }
    }

    let mut failure = None;
    let root = brent(
        |eps| match g(eps) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        RootTolerance {
            x_abs: 1e-300,
            x_rel: 2.0 * f64::EPSILON,
            max_iter: 500,
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let root = root?;
    if root.x <= 0.0 {
        return Err(Error::Solver(format!(
            "non-positive root off the plateau at lambda = {}",
            query.lambda
        )));
    }
    let (f, err) = big_f_with_error(query, root.x)?;
    Ok(CgfResult {
        value: root.x,
        branch: Branch::PositiveRoot,
        root_residual: (f - 1.0).abs(),
        quadrature_error_bound: err,
    })
}

fn link_mean_period(profile: &InverseTempProfile, link: usize, transport: Transport) -> f64 {
    match transport {
        Transport::Wandering => wandering_normalization(profile),
        Transport::Confined => link_normalizations(profile)[link],
    }
}

fn cgf_at(link: usize, profile: &InverseTempProfile, transport: Transport, lambda: f64) -> Result<f64> {
    Ok(cgf_value(&CgfQuery::new(link, lambda, profile.clone(), transport)?)?.value)
}

/// Slope of the CGF at `λ = 0` from the side where it is not identically
/// zero, by extrapolated one-sided differences.
///
/// `I(s)` carries an `s² ln s` term, so the difference quotients expand in
/// `h ln h, h, h² ln h, h²`, and all four are eliminated.
///
/// Equals `−𝓙_n` for a single tracer.
pub fn cgf_left_derivative(link: usize, profile: &InverseTempProfile, transport: Transport) -> Result<f64> {
    if link >= profile.n_links() {
        return Err(Error::Domain(format!("link {link} out of range")));
    }
    let beta_n = profile.beta(link);
    // When β_n > β_{n+1} the plateau sits left of zero and the slope lives on the right.
    let side = if beta_n > profile.beta(link + 1) { 1.0 } else { -1.0 };
    let h = 1e-3 * beta_n;
    let steps = [h, h / 2.0, h / 4.0, h / 8.0, h / 16.0];
    let estimates = steps
        .iter()
        .map(|&step| Ok(side * cgf_at(link, profile, transport, side * step)? / step))
        .collect::<Result<Vec<f64>>>()?;
    extrapolate(
        &steps,
        &estimates,
        &[|h| h * h.ln(), |h| h, |h| h * h * h.ln(), |h| h * h],
    )
    .ok_or_else(|| Error::Solver("singular extrapolation system".into()))
}

/// `−(∂F/∂λ)/(∂F/∂ε)` at `(0, 0)`, each partial derivative obtained by
/// quadrature of the differentiated factor integrands.
pub fn implicit_slope(link: usize, profile: &InverseTempProfile, transport: Transport) -> Result<f64> {
    let query = CgfQuery::new(link, 0.0, profile.clone(), transport)?;
    let mut d_lambda = 0.0;
    let mut d_eps = 0.0;
    for f in query.factors() {
        let beta = f.beta;
        let count = f.count as f64;
        if f.delta != 0 {
            // ∂C/∂λ = −(Δ/2) β ∫ v³ e^{−βv²/2} dv
            let m3 = integrate_to_infinity(|v| v * v * v * (-beta * v * v / 2.0).exp(), 0.0, QUAD_TOL)?;
            d_lambda += count * (-(f.delta as f64) / 2.0) * beta * m3.value;
        }
        // ∂C/∂ε = −β ∫ e^{−βv²/2} dv
        let m0 = integrate_to_infinity(|v| (-beta * v * v / 2.0).exp(), 0.0, QUAD_TOL)?;
        d_eps += count * (-beta * m0.value);
    }
    Ok(-d_lambda / d_eps)
}

/// Closed slope `−(T_n − T_{n+1})/Z` of the CGF at the origin.
pub fn closed_slope(link: usize, profile: &InverseTempProfile, transport: Transport) -> f64 {
    -(profile.temperature(link) - profile.temperature(link + 1)) / link_mean_period(profile, link, transport)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondCumulant {
    pub closed: f64,
    pub numeric: f64,
}

/// `(1/N) √(2/(πβ⁵))`.
pub fn second_cumulant_closed(n_links: usize, beta: f64) -> f64 {
    (2.0 / (std::f64::consts::PI * beta.powi(5))).sqrt() / n_links as f64
}

/// Curvature of the equilibrium CGF at the origin for wandering tracers, closed
/// and by extrapolated central differences with error terms `h² ln h, h²`.
pub fn equilibrium_second_cumulant(n_links: usize, beta: f64) -> Result<SecondCumulant> {
    let profile = InverseTempProfile::uniform(beta, n_links)?;
    let h = 0.0125 * beta;
    let steps = [h, h / 2.0, h / 4.0];
    let estimates = steps
        .iter()
        .map(|&step| {
            let plus = cgf_at(0, &profile, Transport::Wandering, step)?;
            let minus = cgf_at(0, &profile, Transport::Wandering, -step)?;
            Ok((plus + minus) / (step * step))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SecondCumulant {
        closed: second_cumulant_closed(n_links, beta),
        numeric: extrapolate(&steps, &estimates, &[|h| h * h * h.ln(), |h| h * h])
            .ok_or_else(|| Error::Solver("singular extrapolation system".into()))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenKubo {
    /// Curvature of the CGF at the origin, by finite differences.
    pub lhs: f64,
    /// `−2 ∂_{Δβ}` of the closed slope, by finite differences in `Δβ`.
    pub rhs_mixed: f64,
    pub closed: f64,
    /// `−2 ∂_{Δβ}` of the numerically differentiated CGF slope.
    pub rhs_numeric: f64,
}

/// Profile with `β_n = β − Δβ/2`, `β_{n+1} = β + Δβ/2`, all others `β`.
pub fn perturbed_profile(n_links: usize, beta: f64, link: usize, delta_beta: f64) -> Result<InverseTempProfile> {
    let mut betas = vec![beta; n_links + 1];
    betas[link] = beta - delta_beta / 2.0;
    betas[link + 1] = beta + delta_beta / 2.0;
    InverseTempProfile::new(betas)
}

pub fn green_kubo_check(n_links: usize, beta: f64, link: usize) -> Result<GreenKubo> {
    if n_links < 2 {
        return Err(Error::NotApplicable(
            "the Green-Kubo check needs at least two links".into(),
        ));
    }
    if link + 2 > n_links {
        return Err(Error::Domain(format!("link {link} must lie in 0..={}", n_links - 2)));
    }
    let lhs = equilibrium_second_cumulant(n_links, beta)?.numeric;

    let slope = |db: f64| -> Result<f64> {
        Ok(closed_slope(
            link,
            &perturbed_profile(n_links, beta, link, db)?,
            Transport::Wandering,
        ))
    };
    let d = 1e-3 * beta;
    let central = [d, d / 2.0, d / 4.0]
        .iter()
        .map(|&s| Ok((slope(s)? - slope(-s)?) / (2.0 * s)))
        .collect::<Result<Vec<f64>>>()?;
    let rhs_mixed = -2.0 * richardson(&central, 2, 2);

    let numeric_slope = |db: f64| -> Result<f64> {
        cgf_left_derivative(link, &perturbed_profile(n_links, beta, link, db)?, Transport::Wandering)
    };
    let d = 1e-2 * beta;
    let at_zero = numeric_slope(0.0)?;
    let one_sided = [d, d / 2.0, d / 4.0]
        .iter()
        .map(|&s| Ok((numeric_slope(s)? - at_zero) / s))
        .collect::<Result<Vec<f64>>>()?;
    let rhs_numeric = -2.0 * richardson(&one_sided, 1, 1);

    Ok(GreenKubo {
        lhs,
        rhs_mixed,
        closed: second_cumulant_closed(n_links, beta),
        rhs_numeric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(b0: f64, b1: f64) -> InverseTempProfile {
        InverseTempProfile::new(vec![b0, b1]).unwrap()
    }

    fn query(lambda: f64) -> CgfQuery {
        CgfQuery::new(0, lambda, pair(1.0, 2.0), Transport::Wandering).unwrap()
    }

    #[test]
    fn mode_solves_cubic() {
        for s in [0.0, 1e-8, 0.3, 1.0, 10.0, 1e4] {
            let u = mode(s);
            assert!((u * u * u - u - s).abs() <= 1e-12 * (1.0 + s), "s = {s}");
        }
    }

    #[test]
    fn c_factor_at_zero_eps_is_closed_form() {
        for &(beta, delta, lambda) in &[
            (1.0, 0, 5.0),
            (1.0, 1, 0.3),
            (2.0, -1, 1.5),
            (0.3, 1, -0.2),
            (4.0, -1, -7.0),
        ] {
            let c = c_factor(beta, delta, lambda, 0.0).unwrap();
            let exact = beta / (beta + lambda * delta as f64);
            assert!(
                (c / exact - 1.0).abs() < 1e-11,
                "{beta} {delta} {lambda}: {c} vs {exact}"
            );
        }
        assert!((c_factor(1.0, 0, 123.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn c_factor_rejects_divergent() {
        assert!(matches!(c_factor(1.0, 1, -1.0, 0.5), Err(Error::Divergent(_))));
        assert!(matches!(c_factor(1.0, -1, 2.0, 0.5), Err(Error::Divergent(_))));
    }

    #[test]
    fn deficit_and_direct_forms_agree() {
        for s in [0.05, 0.2, 0.49, 0.51, 0.8] {
            let (direct, _) = log_i_direct(s).unwrap();
            let (g, _) = i_deficit(s).unwrap();
            assert!((direct - g.ln_1p()).abs() < 1e-13, "s = {s}");
        }
    }

    #[test]
    fn big_f_at_zero_eps() {
        for lambda in [-0.7, -0.2, 0.4, 1.3, 1.9] {
            let q = query(lambda);
            let f = big_f(&q, 0.0).unwrap();
            let exact = 1.0 * 2.0 / ((1.0 + lambda) * (2.0 - lambda));
            assert!((f / exact - 1.0).abs() < 1e-12);
            assert!((log_big_f(&q, 0.0).unwrap() - exact.ln()).abs() < 1e-14);
        }
        assert!((big_f(&query(0.0), 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn big_f_decreases_in_eps() {
        let q = CgfQuery::new(
            1,
            -0.3,
            InverseTempProfile::new(vec![1.0, 1.5, 2.0, 0.8]).unwrap(),
            Transport::Wandering,
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..20 {
            let f = big_f(&q, 0.1 * i as f64).unwrap();
            assert!(f < prev);
            prev = f;
        }
    }

    #[test]
    fn factor_counts_cover_the_state_space() {
        let p = InverseTempProfile::new(vec![1.0, 1.5, 2.0, 0.8]).unwrap();
        for link in 0..3 {
            let q = CgfQuery::new(link, 0.1, p.clone(), Transport::Wandering).unwrap();
            let total: u32 = q.factors().iter().map(|f| f.count).sum();
            assert_eq!(total, 6);
        }
        let q = CgfQuery::new(1, 0.1, p, Transport::Confined).unwrap();
        assert_eq!(q.factors().len(), 2);
    }

    #[test]
    fn domain_is_open() {
        let p = pair(1.0, 2.0);
        assert!(CgfQuery::new(0, -1.0, p.clone(), Transport::Wandering).is_err());
        assert!(CgfQuery::new(0, 2.0, p.clone(), Transport::Wandering).is_err());
        assert!(CgfQuery::new(1, 0.0, p, Transport::Wandering).is_err());
    }

    #[test]
    fn plateau_and_root_branches() {
        let r = cgf_value(&query(0.5)).unwrap();
        assert_eq!(r.branch, Branch::ZeroPlateau);
        assert_eq!(r.value, 0.0);
        for lambda in [0.0, 1.0] {
            assert_eq!(cgf_value(&query(lambda)).unwrap().value, 0.0);
        }
        for lambda in [-0.5, -0.2, 1.2, 1.5] {
            let r = cgf_value(&query(lambda)).unwrap();
            assert_eq!(r.branch, Branch::PositiveRoot);
            assert!(r.value > 0.0);
            assert!(r.root_residual <= 1e-10);
        }
    }

    #[test]
    fn reference_roots() {
        // Independently computed values of the root for β = (1, 2).
        let r = cgf_value(&query(-0.5)).unwrap().value;
        assert!((r - 0.189_739_712_205_570_37).abs() < 1e-9);
        let r = cgf_value(&query(-0.2)).unwrap().value;
        assert!((r - 0.045_475_888_732_825_584).abs() < 1e-9);
    }

    #[test]
    fn gallavotti_cohen_symmetry() {
        for lambda in [-0.9, -0.5, -0.2, -0.01] {
            let a = cgf_value(&query(lambda)).unwrap().value;
            let b = cgf_value(&query(1.0 - lambda)).unwrap().value;
            assert!((a - b).abs() <= 2e-10, "{lambda}: {a} vs {b}");
        }
    }

    #[test]
    fn equilibrium_is_even_and_positive() {
        let p = InverseTempProfile::uniform(1.0, 2).unwrap();
        let f = |l| cgf_value(&CgfQuery::new(1, l, p.clone(), Transport::Wandering).unwrap()).unwrap();
        assert_eq!(f(0.0).value, 0.0);
        let a = f(0.3);
        let b = f(-0.3);
        assert_eq!(a.branch, Branch::PositiveRoot);
        assert!(a.value > 0.0);
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn left_derivative_matches_current() {
        let p = InverseTempProfile::from_temperatures(&[2.0, 1.0]).unwrap();
        let d = cgf_left_derivative(0, &p, Transport::Wandering).unwrap();
        let closed = closed_slope(0, &p, Transport::Wandering);
        assert!((closed + 0.4674).abs() < 1e-4);
        assert!((d / closed - 1.0).abs() < 1e-6, "{d} vs {closed}");
        let implicit = implicit_slope(0, &p, Transport::Wandering).unwrap();
        assert!((implicit - closed).abs() < 1e-8 * closed.abs());
    }

    #[test]
    fn left_derivative_mirrored_orientation() {
        let p = InverseTempProfile::from_temperatures(&[1.0, 1.5, 3.0]).unwrap();
        for link in 0..2 {
            let d = cgf_left_derivative(link, &p, Transport::Wandering).unwrap();
            let closed = closed_slope(link, &p, Transport::Wandering);
            assert!(closed > 0.0);
            assert!((d / closed - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn left_derivative_at_equilibrium_vanishes() {
        let p = InverseTempProfile::uniform(1.0, 1).unwrap();
        assert!(cgf_left_derivative(0, &p, Transport::Wandering).unwrap().abs() < 1e-8);
    }

    #[test]
    fn second_cumulant_examples() {
        let frac = (2.0 / std::f64::consts::PI).sqrt();
        for &(n, beta, expect) in &[(1, 1.0, frac), (2, 1.0, frac / 2.0), (1, 4.0, frac / 32.0)] {
            let c = equilibrium_second_cumulant(n, beta).unwrap();
            assert!((c.closed / expect - 1.0).abs() < 1e-14);
            assert!((c.numeric / c.closed - 1.0).abs() < 1e-6, "{n} {beta}: {c:?}");
        }
    }

    #[test]
    fn green_kubo() {
        let g = green_kubo_check(2, 1.0, 0).unwrap();
        assert!((g.closed - 0.39894).abs() < 1e-5);
        assert!((g.lhs / g.closed - 1.0).abs() < 1e-6);
        assert!((g.rhs_mixed / g.closed - 1.0).abs() < 1e-6, "{g:?}");
        assert!((g.rhs_numeric / g.closed - 1.0).abs() < 1e-4, "{g:?}");
        assert!(matches!(green_kubo_check(1, 1.0, 0), Err(Error::NotApplicable(_))));
    }
}
