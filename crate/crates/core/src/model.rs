//! State spaces, temperature profiles and embedded Markov chains.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-12;
const DENSE_LIMIT: usize = 64;

/// Inverse temperatures `β_0..β_N` of the scatterers, one per lattice site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct InverseTempProfile {
    betas: Vec<f64>,
}

impl InverseTempProfile {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::InvalidSize(format!(
                "a profile needs at least two scatterers, got {}",
                betas.len()
            )));
        }
        if let Some((i, b)) = betas.iter().enumerate().find(|(_, b)| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::Domain(format!(
                "beta[{i}] = {b} is not a positive finite number"
            )));
        }
        Ok(Self { betas })
    }

    pub fn from_temperatures(temps: &[f64]) -> Result<Self> {
        if let Some((i, t)) = temps.iter().enumerate().find(|(_, t)| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::Domain(format!(
                "temperature[{i}] = {t} is not a positive finite number"
            )));
        }
        Self::new(temps.iter().map(|t| 1.0 / t).collect())
    }

    /// Every scatterer at the same inverse temperature.
    pub fn uniform(beta: f64, n_links: usize) -> Result<Self> {
        Self::new(vec![beta; n_links + 1])
    }

    /// Number of links `N`; scatterers are indexed `0..=N`.
    pub fn n_links(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.betas[n]
    }

    pub fn temperature(&self, n: usize) -> f64 {
        1.0 / self.betas[n]
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.betas.iter().map(|b| 1.0 / b).collect()
    }

    /// The same profile read from right to left.
    pub fn reversed(&self) -> Self {
        let mut betas = self.betas.clone();
        betas.reverse();
        Self { betas }
    }

    pub fn is_equilibrium(&self) -> bool {
        self.betas.iter().all(|b| *b == self.betas[0])
    }
}

impl TryFrom<Vec<f64>> for InverseTempProfile {
    type Error = Error;

    fn try_from(betas: Vec<f64>) -> Result<Self> {
        Self::new(betas)
    }
}

impl From<InverseTempProfile> for Vec<f64> {
    fn from(p: InverseTempProfile) -> Self {
        p.betas
    }
}

/// Direction of departure from a scatterer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_f64(x: f64) -> Self {
        if x >= 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// A point `(n, σ)` of the embedded chain: the tracer leaves scatterer `n`
/// moving in direction `σ`, so its next collision is with scatterer `n + σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainState {
    pub scatterer: usize,
    pub sign: Sign,
}

impl ChainState {
    pub const fn new(scatterer: usize, sign: Sign) -> Self {
        Self { scatterer, sign }
    }

    /// The scatterer the tracer travels towards.
    pub fn target(self) -> usize {
        match self.sign {
            Sign::Plus => self.scatterer + 1,
            Sign::Minus => self.scatterer - 1,
        }
    }
}

impl fmt::Display for ChainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sign {
            Sign::Plus => '+',
            Sign::Minus => '-',
        };
        write!(f, "({},{s}1)", self.scatterer)
    }
}

/// The finite set `E` of admissible chain states for `N` links, enumerated as
/// `(0,+),(1,+),…,(N−1,+),(N,−),(N−1,−),…,(1,−)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    n_links: usize,
}

impl StateSpace {
    pub fn new(n_links: usize) -> Result<Self> {
        if n_links == 0 {
            return Err(Error::InvalidSize("the state space needs at least one link".into()));
        }
        Ok(Self { n_links })
    }

    pub fn n_links(&self) -> usize {
        self.n_links
    }

    pub fn len(&self) -> usize {
        2 * self.n_links
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, index: usize) -> ChainState {
        assert!(index < self.len(), "state index {index} out of range");
        let n = self.n_links;
        let scatterer = n - n.abs_diff(index);
        let sign = if index < n { Sign::Plus } else { Sign::Minus };
        ChainState { scatterer, sign }
    }

    pub fn index(&self, state: ChainState) -> Option<usize> {
        let n = self.n_links;
        match state.sign {
            Sign::Plus if state.scatterer < n => Some(state.scatterer),
            Sign::Minus if state.scatterer >= 1 && state.scatterer <= n => Some(2 * n - state.scatterer),
            _ => None,
        }
    }

    pub fn contains(&self, state: ChainState) -> bool {
        self.index(state).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = ChainState> + '_ {
        (0..self.len()).map(move |i| self.state(i))
    }
}

/// Row-stochastic matrix on `E`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRows", into = "MatrixRows")]
pub struct TransitionMatrix {
    space: StateSpace,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// Validates stochasticity, geometric admissibility and irreducibility.
    ///
    /// From state `(n, σ)` only states sitting at scatterer `n + σ` may receive
    /// mass; this forces reflection at both ends of the array.
    pub fn new(n_links: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let space = StateSpace::new(n_links)?;
        let size = space.len();
        if rows.len() != size || rows.iter().any(|r| r.len() != size) {
            return Err(Error::InvalidSize(format!(
                "transition matrix for {n_links} links must be {size}x{size}"
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            let from = space.state(i);
            let mut sum = 0.0;
            for (j, &q) in row.iter().enumerate() {
                if !(q.is_finite() && q >= 0.0) {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i},{j}) = {q} is not a probability"
                    )));
                }
                let to = space.state(j);
                if q > 0.0 && to.scatterer != from.target() {
                    return Err(Error::InvalidMatrix(format!(
                        "{from} cannot move to {to}: the tracer next reaches scatterer {}",
                        from.target()
                    )));
                }
                sum += q;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidMatrix(format!("row {from} sums to {sum}")));
            }
        }
        let entries = rows.into_iter().flatten().collect();
        let matrix = Self { space, entries };
        matrix.check_irreducible()?;
        Ok(matrix)
    }

    /// Deterministic transmission through interior scatterers and reflection
    /// at `0` and `N`: the unit cyclic shift of `E`.
    pub fn wandering(n_links: usize) -> Result<Self> {
        let space = StateSpace::new(n_links)?;
        let size = space.len();
        let mut entries = vec![0.0; size * size];
        for i in 0..size {
            entries[i * size + (i + 1) % size] = 1.0;
        }
        Ok(Self { space, entries })
    }

    /// At each interior scatterer the tracer is transmitted with probability
    /// `transmit` and reflected otherwise.
    pub fn transmit_reflect(n_links: usize, transmit: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmit) {
            return Err(Error::Domain(format!(
                "transmission probability {transmit} outside [0,1]"
            )));
        }
        let space = StateSpace::new(n_links)?;
        let size = space.len();
        let mut rows = vec![vec![0.0; size]; size];
        for (i, row) in rows.iter_mut().enumerate() {
            let from = space.state(i);
            let m = from.target();
            if m == 0 || m == n_links {
                let to = ChainState::new(m, if m == 0 { Sign::Plus } else { Sign::Minus });
                row[space.index(to).unwrap()] = 1.0;
            } else {
                row[space.index(ChainState::new(m, from.sign)).unwrap()] += transmit;
                row[space.index(ChainState::new(m, from.sign.flip())).unwrap()] += 1.0 - transmit;
            }
        }
        Self::new(n_links, rows)
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn n_links(&self) -> usize {
        self.space.n_links()
    }

    pub fn size(&self) -> usize {
        self.space.len()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.size() + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        let s = self.size();
        &self.entries[from * s..(from + 1) * s]
    }

    /// Row vector times matrix.
    pub fn apply_left(&self, v: &[f64]) -> Vec<f64> {
        let s = self.size();
        let mut out = vec![0.0; s];
        for (i, vi) in v.iter().enumerate() {
            if *vi == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += vi * self.entries[i * s + j];
            }
        }
        out
    }

    pub fn is_deterministic(&self) -> bool {
        self.entries.iter().all(|&q| q == 0.0 || q == 1.0)
    }

    fn check_irreducible(&self) -> Result<()> {
        let s = self.size();
        let reach = |forward: bool| {
            let mut seen = vec![false; s];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(i) = queue.pop_front() {
                for (j, visited) in seen.iter_mut().enumerate() {
                    let q = if forward { self.get(i, j) } else { self.get(j, i) };
                    if q > 0.0 && !*visited {
                        *visited = true;
                        queue.push_back(j);
                    }
                }
            }
            seen
        };
        for forward in [true, false] {
            if let Some(j) = reach(forward).iter().position(|r| !r) {
                let state = self.space.state(j);
                return Err(Error::Reducible(if forward {
                    format!("{state} is not reachable from {}", self.space.state(0))
                } else {
                    format!("{} is not reachable from {state}", self.space.state(0))
                }));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRows {
    n_links: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRows> for TransitionMatrix {
    type Error = Error;

    fn try_from(raw: MatrixRows) -> Result<Self> {
        Self::new(raw.n_links, raw.rows)
    }
}

impl From<TransitionMatrix> for MatrixRows {
    fn from(q: TransitionMatrix) -> Self {
        let s = q.size();
        MatrixRows {
            n_links: q.n_links(),
            rows: q.entries.chunks(s).map(<[f64]>::to_vec).collect(),
        }
    }
}

/// Unique invariant probability vector `ν = νQ` of an irreducible chain.
pub fn chain_stationary_distribution(q: &TransitionMatrix) -> Result<Vec<f64>> {
    q.check_irreducible()?;
    let nu = if q.size() <= DENSE_LIMIT {
        dense_stationary(q)?
    } else {
        power_stationary(q)?
    };
    let residual = stationary_residual(q, &nu);
    if residual >= STATIONARY_TOL {
        return Err(Error::Solver(format!(
            "stationary residual {residual:e} exceeds {STATIONARY_TOL:e}"
        )));
    }
    Ok(nu)
}

/// `‖νQ − ν‖_∞`.
pub fn stationary_residual(q: &TransitionMatrix, nu: &[f64]) -> f64 {
    q.apply_left(nu)
        .iter()
        .zip(nu)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn dense_stationary(q: &TransitionMatrix) -> Result<Vec<f64>> {
    let s = q.size();
    // Rows 0..s-1 of (Qᵀ − I)ν = 0, last row replaced by Σν = 1.
    let mut a = DMatrix::<f64>::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            a[(i, j)] = q.get(j, i) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..s {
        a[(s - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(s);
    rhs[s - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular stationary system".into()))?;
    let mut nu: Vec<f64> = sol.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|x| *x /= total);
    Ok(nu)
}

fn power_stationary(q: &TransitionMatrix) -> Result<Vec<f64>> {
    let s = q.size();
    let mut nu = vec![1.0 / s as f64; s];
    // The lazy chain (Q + I)/2 is aperiodic with the same invariant vector.
    for _ in 0..10_000_000 {
        let step = q.apply_left(&nu);
        let next: Vec<f64> = step.iter().zip(&nu).map(|(a, b)| 0.5 * (a + b)).collect();
        let change = next.iter().zip(&nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        nu = next;
        if change < 1e-16 {
            let total: f64 = nu.iter().sum();
            nu.iter_mut().for_each(|x| *x /= total);
            return Ok(nu);
        }
    }
    Err(Error::Solver("power iteration did not converge".into()))
}

/// Continuous phase point of a tracer and its renewal bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracerTrajectoryState {
    /// Position in `[0, N]`.
    pub q: f64,
    /// Signed velocity.
    pub p: f64,
    /// Departure state of the flight in progress.
    pub chain_state: ChainState,
    pub next_event_time: f64,
}

impl TracerTrajectoryState {
    /// Phase point at time `t` within the current flight.
    pub fn phase_at(&self, t: f64) -> (f64, f64) {
        let target = self.chain_state.target() as f64;
        (target - self.p * (self.next_event_time - t), self.p)
    }
}

/// The four model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    Basic {
        beta: f64,
    },
    General {
        profile: InverseTempProfile,
        matrix: TransitionMatrix,
    },
    Wandering {
        profile: InverseTempProfile,
        n_tracers: usize,
    },
    Confined {
        profile: InverseTempProfile,
    },
}

impl ModelKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelKind::Basic { beta } => {
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err(Error::Domain(format!("beta = {beta} must be positive")));
                }
            }
            ModelKind::General { profile, matrix } => {
                if matrix.n_links() != profile.n_links() {
                    return Err(Error::InvalidSize(format!(
                        "matrix has {} links, profile has {}",
                        matrix.n_links(),
                        profile.n_links()
                    )));
                }
            }
            ModelKind::Wandering { n_tracers, .. } => {
                if *n_tracers == 0 {
                    return Err(Error::InvalidSize("at least one tracer is required".into()));
                }
            }
            ModelKind::Confined { .. } => {}
        }
        Ok(())
    }

    /// Number of tracers moving in the system.
    pub fn n_tracers(&self) -> usize {
        match self {
            ModelKind::Basic { .. } | ModelKind::General { .. } => 1,
            ModelKind::Wandering { n_tracers, .. } => *n_tracers,
            ModelKind::Confined { profile } => profile.n_links(),
        }
    }
}

/// Wandering matrix followed for `steps` moves from state index `start`.
pub fn wandering_walk(space: StateSpace, start: usize, steps: usize) -> ChainState {
    space.state((start + steps) % space.len())
}

/// Scatterer reached after `k` moves from `(n0, σ0)` in the wandering chain,
/// via the folding map `f(i) = N − |N − i|`.
pub fn wandering_scatterer_closed_form(n_links: usize, start: ChainState, k: usize) -> usize {
    let two_n = 2 * n_links as i64;
    let raw = start.scatterer as i64 + start.sign.value() as i64 * k as i64;
    let folded = raw.abs() % two_n;
    (n_links as i64 - (n_links as i64 - folded).abs()) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: usize, sign: i32) -> ChainState {
        ChainState::new(n, if sign > 0 { Sign::Plus } else { Sign::Minus })
    }

    #[test]
    fn profile_rejects_bad_input() {
        assert!(InverseTempProfile::new(vec![1.0]).is_err());
        assert!(InverseTempProfile::new(vec![1.0, 0.0]).is_err());
        assert!(InverseTempProfile::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(InverseTempProfile::from_temperatures(&[1.0, -2.0]).is_err());
        let p = InverseTempProfile::from_temperatures(&[2.0, 1.0, 0.5]).unwrap();
        assert_eq!(p.betas(), &[0.5, 1.0, 2.0]);
        assert_eq!(p.n_links(), 2);
    }

    #[test]
    fn state_order() {
        let e = StateSpace::new(3).unwrap();
        let listed: Vec<_> = e.iter().collect();
        assert_eq!(listed, vec![s(0, 1), s(1, 1), s(2, 1), s(3, -1), s(2, -1), s(1, -1)]);
        for (i, st) in listed.iter().enumerate() {
            assert_eq!(e.index(*st), Some(i));
        }
        assert_eq!(e.index(s(0, -1)), None);
        assert_eq!(e.index(s(3, 1)), None);
    }

    #[test]
    fn wandering_requires_a_link() {
        assert!(matches!(TransitionMatrix::wandering(0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn wandering_single_link_swaps() {
        let q = TransitionMatrix::wandering(1).unwrap();
        let e = q.space();
        assert_eq!(e.iter().collect::<Vec<_>>(), vec![s(0, 1), s(1, -1)]);
        assert_eq!(q.get(0, 1), 1.0);
        assert_eq!(q.get(1, 0), 1.0);
    }

    #[test]
    fn wandering_two_links_four_cycle() {
        let q = TransitionMatrix::wandering(2).unwrap();
        let e = q.space();
        let mut i = e.index(s(0, 1)).unwrap();
        let mut seen = vec![e.state(i)];
        for _ in 0..4 {
            i = q.row(i).iter().position(|&x| x == 1.0).unwrap();
            seen.push(e.state(i));
        }
        assert_eq!(seen, vec![s(0, 1), s(1, 1), s(2, -1), s(1, -1), s(0, 1)]);
    }

    #[test]
    fn wandering_passes_validation() {
        for n in 1..6 {
            let w = TransitionMatrix::wandering(n).unwrap();
            let rows: Vec<Vec<f64>> = (0..w.size()).map(|i| w.row(i).to_vec()).collect();
            assert_eq!(TransitionMatrix::new(n, rows).unwrap(), w);
        }
    }

    #[test]
    fn closed_form_walk_matches_matrix() {
        for n in 1..7 {
            let e = StateSpace::new(n).unwrap();
            for start in 0..e.len() {
                for k in 0..=4 * n {
                    let walked = wandering_walk(e, start, k);
                    assert_eq!(walked.scatterer, wandering_scatterer_closed_form(n, e.state(start), k));
                }
            }
        }
    }

    #[test]
    fn rejects_non_adjacent_mass() {
        // From (0,+) the tracer must land on scatterer 1.
        let rows = vec![
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
        ];
        assert!(matches!(TransitionMatrix::new(2, rows), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn rejects_bad_row_sum() {
        let rows = vec![vec![0.0, 0.9], vec![1.0, 0.0]];
        assert!(matches!(TransitionMatrix::new(1, rows), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn rejects_reducible() {
        // N=2: reflection at scatterer 1 from both sides splits E in two.
        let rows = vec![
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
        ];
        assert!(matches!(TransitionMatrix::new(2, rows), Err(Error::Reducible(_))));
    }

    #[test]
    fn stationary_uniform_for_wandering() {
        for n in [1, 2, 5, 33, 40] {
            let q = TransitionMatrix::wandering(n).unwrap();
            let nu = chain_stationary_distribution(&q).unwrap();
            for x in &nu {
                assert!((x - 1.0 / (2 * n) as f64).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn transmit_reflect_half_is_uniform() {
        let q = TransitionMatrix::transmit_reflect(2, 0.5).unwrap();
        let e = q.space();
        let from = e.index(s(0, 1)).unwrap();
        assert_eq!(q.get(from, e.index(s(1, 1)).unwrap()), 0.5);
        assert_eq!(q.get(from, e.index(s(1, -1)).unwrap()), 0.5);
        let nu = chain_stationary_distribution(&q).unwrap();
        for x in nu {
            assert!((x - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn model_kind_validation() {
        let p = InverseTempProfile::uniform(1.0, 2).unwrap();
        let bad = ModelKind::General {
            profile: p.clone(),
            matrix: TransitionMatrix::wandering(3).unwrap(),
        };
        assert!(bad.validate().is_err());
        assert!(ModelKind::Wandering {
            profile: p.clone(),
            n_tracers: 0
        }
        .validate()
        .is_err());
        assert_eq!(ModelKind::Confined { profile: p }.n_tracers(), 2);
    }
}
