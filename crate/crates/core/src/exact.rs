//! Brute-force oracle for tiny systems: every contour, the exact
//! stationary vector, transition matrices, total-variation curves and
//! spectral gaps.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dynamics::{ChainKind, Direction, Parity, StepContext, SweepOrder};
use crate::error::{Result, SosError};
use crate::model::{energy, Contour, ModelParams};

/// Largest `(H + 1)^n` that [`enumerate`] accepts.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;
/// Largest state count for dense `S x S` matrices (about 2 GB of f64).
pub const DENSE_LIMIT: usize = 16_384;

#[derive(Debug, Clone)]
pub struct ExactChain {
    params: ModelParams,
    base: u64,
    states: Vec<Contour>,
    /// Radix code -> state index, `u32::MAX` where the code is not a valid contour.
    lookup: Vec<u32>,
    stationary: Vec<f64>,
}

/// All contours allowed by `params`, with `mu ∝ exp(-beta * energy)`.
pub fn enumerate(params: &ModelParams) -> Result<ExactChain> {
    let cap = params.cap().ok_or_else(|| {
        SosError::Argument("exact enumeration needs a bounded height mode".into())
    })?;
    let n = params.n();
    let base = u64::from(cap) + 1;
    let total = u128::from(base)
        .checked_pow(n as u32)
        .filter(|&t| t <= ENUMERATION_LIMIT)
        .ok_or(SosError::StateSpaceTooLarge {
            states: u128::from(base).saturating_pow(n as u32),
            limit: ENUMERATION_LIMIT,
        })? as usize;
    let mut lookup = vec![u32::MAX; total];
    let mut states = Vec::new();
    let mut energies = Vec::new();
    for (code, slot) in lookup.iter_mut().enumerate() {
        let heights = decode(code as u64, base, n);
        if heights
            .iter()
            .enumerate()
            .any(|(i, &h)| params.is_pinned(i) && h != 0)
        {
            continue;
        }
        let c = Contour::new(heights);
        energies.push(energy(&c, params)?);
        *slot = states.len() as u32;
        states.push(c);
    }
    let e_min = energies.iter().copied().min().unwrap_or(0);
    let weights: Vec<f64> = energies
        .iter()
        .map(|&e| (-params.beta() * (e - e_min) as f64).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let stationary = weights.into_iter().map(|w| w / z).collect();
    Ok(ExactChain {
        params: params.clone(),
        base,
        states,
        lookup,
        stationary,
    })
}

fn decode(mut code: u64, base: u64, n: usize) -> Vec<u32> {
    // most significant digit is position 0, so codes run in lexicographic order
    let mut heights = vec![0u32; n];
    for h in heights.iter_mut().rev() {
        *h = (code % base) as u32;
        code /= base;
    }
    heights
}

impl ExactChain {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn states(&self) -> &[Contour] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn index_of(&self, heights: &[u32]) -> Option<usize> {
        if heights.len() != self.params.n() {
            return None;
        }
        let mut code = 0u64;
        for &h in heights {
            if u64::from(h) >= self.base {
                return None;
            }
            code = code * self.base + u64::from(h);
        }
        match self.lookup[code as usize] {
            u32::MAX => None,
            i => Some(i as usize),
        }
    }

    pub fn bottom_index(&self) -> usize {
        self.index_of(Contour::bottom(&self.params).heights())
            .expect("bottom contour is always valid")
    }

    /// Index of the pointwise-largest contour (pinned sites stay at zero).
    pub fn top_index(&self) -> usize {
        let cap = self.params.cap().unwrap_or(0);
        let heights: Vec<u32> = (0..self.params.n())
            .map(|i| if self.params.is_pinned(i) { 0 } else { cap })
            .collect();
        self.index_of(&heights)
            .expect("top contour is always valid")
    }

    /// Expectation of `f` under the stationary law.
    pub fn expect<F: Fn(&Contour) -> f64>(&self, f: F) -> f64 {
        self.states
            .iter()
            .zip(&self.stationary)
            .map(|(c, &m)| m * f(c))
            .sum()
    }

    /// Nonzero entries of one single-site row, `(target, probability)`.
    pub fn ss_row(&self, state: usize, ctx: &StepContext) -> Vec<(usize, f64)> {
        let n = self.params.n();
        let cap = self.params.cap().unwrap_or(0);
        let mut heights = self.states[state].heights().to_vec();
        let mut row = Vec::with_capacity(2 * n + 1);
        let mut stay = 1.0;
        for i in 0..n {
            if ctx.is_pinned(i) {
                continue;
            }
            let h = heights[i];
            for dir in [Direction::Down, Direction::Up] {
                let target = match dir {
                    Direction::Down if h > 0 => h - 1,
                    Direction::Up if h < cap => h + 1,
                    _ => continue,
                };
                let p = ctx.ss_threshold(&heights, i, dir) / (2.0 * n as f64);
                heights[i] = target;
                row.push((self.index_of(&heights).expect("neighbour state"), p));
                heights[i] = h;
                stay -= p;
            }
        }
        row.push((state, stay));
        row
    }

    /// Column resample at `index` from `state`, `(target, probability)`.
    pub fn column_row(&self, state: usize, index: usize, ctx: &StepContext) -> Vec<(usize, f64)> {
        if ctx.is_pinned(index) {
            return vec![(state, 1.0)];
        }
        let cap = self.params.cap().unwrap_or(0);
        let mut heights = self.states[state].heights().to_vec();
        let (a, b) = ctx.neighbor_range(&heights, index);
        let law = ctx.law(a, b);
        (0..=cap)
            .map(|h| {
                heights[index] = h;
                (self.index_of(&heights).expect("column state"), law.prob(h))
            })
            .collect()
    }

    /// `(P g)(eta)` for the chain `kind`, without materializing `P`.
    pub fn apply(&self, kind: &ChainKind, g: &[f64]) -> Result<Vec<f64>> {
        let ctx = StepContext::new(&self.params);
        let n = self.params.n();
        match kind {
            ChainKind::SingleSite => Ok((0..self.len())
                .map(|s| self.ss_row(s, &ctx).iter().map(|&(t, p)| p * g[t]).sum())
                .collect()),
            ChainKind::Column => Ok((0..self.len())
                .map(|s| {
                    (0..n)
                        .map(|i| {
                            self.column_row(s, i, &ctx)
                                .iter()
                                .map(|&(t, p)| p * g[t])
                                .sum::<f64>()
                        })
                        .sum::<f64>()
                        / n as f64
                })
                .collect()),
            ChainKind::Parallel(order) => {
                let [first, second] = order.sweeps();
                // as operators on functions, (P_1 P_2) g = P_1 (P_2 g)
                Ok(self.apply_sweep(first, &self.apply_sweep(second, g, &ctx), &ctx))
            }
            ChainKind::Pinned { .. } => Err(SosError::Argument(
                "exact chains take pins from their parameters".into(),
            )),
        }
    }

    /// `P_par g = (P_O P_E g + P_E P_O g) / 2`.
    pub fn apply_parallel_average(&self, g: &[f64]) -> Vec<f64> {
        let ctx = StepContext::new(&self.params);
        let oe = self.apply_sweep(Parity::Odd, &self.apply_sweep(Parity::Even, g, &ctx), &ctx);
        let eo = self.apply_sweep(Parity::Even, &self.apply_sweep(Parity::Odd, g, &ctx), &ctx);
        oe.iter().zip(&eo).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    fn apply_sweep(&self, parity: Parity, g: &[f64], ctx: &StepContext) -> Vec<f64> {
        // same-parity columns see only frozen neighbours, so the sweep is the
        // product of the individual column operators in any order
        let mut out = g.to_vec();
        let first = if parity == Parity::Odd { 0 } else { 1 };
        for i in (first..self.params.n()).step_by(2) {
            out = (0..self.len())
                .map(|s| {
                    self.column_row(s, i, ctx)
                        .iter()
                        .map(|&(t, p)| p * out[t])
                        .sum()
                })
                .collect();
        }
        out
    }

    fn check_dense(&self) -> Result<()> {
        if self.len() > DENSE_LIMIT {
            return Err(SosError::StateSpaceTooLarge {
                states: self.len() as u128,
                limit: DENSE_LIMIT as u128,
            });
        }
        Ok(())
    }

    fn sweep_matrix(&self, parity: Parity, ctx: &StepContext) -> DMatrix<f64> {
        let s = self.len();
        let mut m = DMatrix::<f64>::identity(s, s);
        let first = if parity == Parity::Odd { 0 } else { 1 };
        for i in (first..self.params.n()).step_by(2) {
            let mut k = DMatrix::<f64>::zeros(s, s);
            for row in 0..s {
                for (t, p) in self.column_row(row, i, ctx) {
                    k[(row, t)] += p;
                }
            }
            m *= k;
        }
        m
    }
}

/// Dense one-step matrix. `Parallel` gives the mixture of the two sweep orders.
pub fn transition_matrix(kind: &ChainKind, chain: &ExactChain) -> Result<DMatrix<f64>> {
    chain.check_dense()?;
    let s = chain.len();
    let n = chain.params.n();
    let ctx = StepContext::new(&chain.params);
    let mut m = DMatrix::<f64>::zeros(s, s);
    match kind {
        ChainKind::SingleSite => {
            for row in 0..s {
                for (t, p) in chain.ss_row(row, &ctx) {
                    m[(row, t)] += p;
                }
            }
        }
        ChainKind::Column => {
            for row in 0..s {
                for i in 0..n {
                    for (t, p) in chain.column_row(row, i, &ctx) {
                        m[(row, t)] += p / n as f64;
                    }
                }
            }
        }
        ChainKind::Parallel(_) => {
            let po = chain.sweep_matrix(Parity::Odd, &ctx);
            let pe = chain.sweep_matrix(Parity::Even, &ctx);
            m = (&po * &pe + &pe * &po) * 0.5;
        }
        ChainKind::Pinned { .. } => {
            return Err(SosError::Argument(
                "exact chains take pins from their parameters".into(),
            ))
        }
    }
    Ok(m)
}

/// One sweep order of the parallel chain, `P_O P_E` or `P_E P_O`.
pub fn ordered_parallel_matrix(order: SweepOrder, chain: &ExactChain) -> Result<DMatrix<f64>> {
    chain.check_dense()?;
    let ctx = StepContext::new(&chain.params);
    let [first, second] = order.sweeps();
    Ok(chain.sweep_matrix(first, &ctx) * chain.sweep_matrix(second, &ctx))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixCheck {
    pub max_row_sum_error: f64,
    pub max_balance_residual: f64,
    pub max_stationarity_residual: f64,
    pub min_entry: f64,
}

impl MatrixCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_row_sum_error <= tol
            && self.max_balance_residual <= tol
            && self.max_stationarity_residual <= tol
            && self.min_entry >= -tol
    }
}

/// Row sums, detailed balance and `mu P = mu` residuals.
pub fn check_matrix(matrix: &DMatrix<f64>, stationary: &[f64]) -> MatrixCheck {
    let s = stationary.len();
    let mut row_err = 0.0f64;
    let mut balance = 0.0f64;
    let mut min_entry = f64::INFINITY;
    for i in 0..s {
        let mut sum = 0.0;
        for j in 0..s {
            let p = matrix[(i, j)];
            sum += p;
            min_entry = min_entry.min(p);
            let r = (stationary[i] * p - stationary[j] * matrix[(j, i)]).abs();
            balance = balance.max(r);
        }
        row_err = row_err.max((sum - 1.0).abs());
    }
    let mu = DVector::from_column_slice(stationary);
    let mu_p = matrix.tr_mul(&mu);
    let stat = (mu_p - mu).amax();
    MatrixCheck {
        max_row_sum_error: row_err,
        max_balance_residual: balance,
        max_stationarity_residual: stat,
        min_entry,
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `TV(nu_t, mu)` for `t = 0..=t_max` starting from `start`.
pub fn tv_curve(
    matrix: &DMatrix<f64>,
    stationary: &[f64],
    start: &[f64],
    t_max: usize,
) -> Result<Vec<f64>> {
    let total: f64 = start.iter().sum();
    if start.len() != stationary.len()
        || (total - 1.0).abs() > 1e-9
        || start.iter().any(|&p| p < 0.0)
    {
        return Err(SosError::Argument(
            "start must be a probability vector".into(),
        ));
    }
    let mut nu = DVector::from_column_slice(start);
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(total_variation(nu.as_slice(), stationary));
    for _ in 0..t_max {
        nu = matrix.tr_mul(&nu);
        out.push(total_variation(nu.as_slice(), stationary));
    }
    Ok(out)
}

pub fn point_mass(len: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

/// First `t` at which both extreme starts are within `eps` of `mu`, or
/// `None` if that does not happen by `t_max`.
pub fn tau(
    matrix: &DMatrix<f64>,
    chain: &ExactChain,
    eps: f64,
    t_max: usize,
) -> Result<Option<usize>> {
    let mut worst: Option<usize> = Some(0);
    for start in [chain.top_index(), chain.bottom_index()] {
        let curve = tv_curve(
            matrix,
            chain.stationary(),
            &point_mass(chain.len(), start),
            t_max,
        )?;
        let hit = curve.iter().position(|&d| d <= eps);
        worst = match (worst, hit) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
    }
    Ok(worst)
}

/// `1 - lambda_2` of a reversible matrix, through `D^{1/2} P D^{-1/2}`.
pub fn spectral_gap_exact(matrix: &DMatrix<f64>, stationary: &[f64]) -> Result<f64> {
    let s = stationary.len();
    if matrix.nrows() != s || matrix.ncols() != s {
        return Err(SosError::Argument(
            "matrix and stationary vector disagree in size".into(),
        ));
    }
    let check = check_matrix(matrix, stationary);
    if check.max_balance_residual > 1e-10 {
        return Err(SosError::NonReversible(check.max_balance_residual));
    }
    if s == 1 {
        return Ok(1.0);
    }
    let root: Vec<f64> = stationary.iter().map(|m| m.sqrt()).collect();
    let sym = DMatrix::from_fn(s, s, |i, j| {
        let a = root[i] / root[j] * matrix[(i, j)];
        let b = root[j] / root[i] * matrix[(j, i)];
        0.5 * (a + b)
    });
    let mut eig: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(1.0 - eig[1])
}

/// CSV of the stationary vector: `state,heights,mass`.
pub fn stationary_csv(chain: &ExactChain) -> String {
    let mut out = String::from("state,heights,mass\n");
    for (i, (c, m)) in chain.states().iter().zip(chain.stationary()).enumerate() {
        let hs: Vec<String> = c.heights().iter().map(|h| h.to_string()).collect();
        out.push_str(&format!("{i},{},{m:.17e}\n", hs.join(" ")));
    }
    out
}

/// CSV of a total-variation curve: `t,tv`.
pub fn tv_csv(curve: &[f64]) -> String {
    let mut out = String::from("t,tv\n");
    for (t, d) in curve.iter().enumerate() {
        out.push_str(&format!("{t},{d:.17e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn params(n: usize, beta: f64) -> ModelParams {
        ModelParams::new(n, beta).unwrap()
    }

    #[test]
    fn two_state_chain() {
        let p = params(1, LN_2);
        let chain = enumerate(&p).unwrap();
        assert_eq!(chain.len(), 2);
        assert!((chain.stationary()[0] - 0.8).abs() < 1e-15);
        let ss = transition_matrix(&ChainKind::SingleSite, &chain).unwrap();
        assert!((ss[(0, 1)] - 1.0 / 16.0).abs() < 1e-15);
        assert!((ss[(1, 0)] - 0.25).abs() < 1e-15);
        let gap = spectral_gap_exact(&ss, chain.stationary()).unwrap();
        assert!((gap - 5.0 / 16.0).abs() < 1e-14);
        let col = transition_matrix(&ChainKind::Column, &chain).unwrap();
        assert!((spectral_gap_exact(&col, chain.stationary()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_site_stationary() {
        let chain = enumerate(&params(2, LN_2)).unwrap();
        assert_eq!(chain.len(), 9);
        assert!((chain.stationary()[chain.bottom_index()] - 16.0 / 33.0).abs() < 1e-15);
    }

    #[test]
    fn pinned_enumeration() {
        let p = params(3, 1.0).with_pinned_spacing(2).unwrap();
        let chain = enumerate(&p).unwrap();
        assert_eq!(chain.len(), 16);
        assert!(chain.states().iter().all(|c| c.heights()[1] == 0));
        assert_eq!(chain.states()[chain.top_index()].heights(), &[3, 0, 3]);
    }

    #[test]
    fn guard_rejects_large_spaces() {
        assert!(matches!(
            enumerate(&params(8, 1.0)),
            Err(SosError::StateSpaceTooLarge { .. })
        ));
        assert!(enumerate(&params(2, 1.0).unbounded()).is_err());
    }

    #[test]
    fn all_kinds_reversible_small() {
        for beta in [0.3, LN_2, 3.0] {
            for n in 1..=3 {
                let chain = enumerate(&params(n, beta)).unwrap();
                for kind in [
                    ChainKind::SingleSite,
                    ChainKind::Column,
                    ChainKind::Parallel(SweepOrder::OddEven),
                ] {
                    let m = transition_matrix(&kind, &chain).unwrap();
                    let check = check_matrix(&m, chain.stationary());
                    assert!(check.passes(1e-12), "{kind} n={n} beta={beta}: {check:?}");
                }
            }
        }
    }

    #[test]
    fn operator_application_matches_dense() {
        let chain = enumerate(&params(3, 0.7)).unwrap();
        let g: Vec<f64> = (0..chain.len()).map(|i| ((i * 7) % 11) as f64).collect();
        for kind in [
            ChainKind::SingleSite,
            ChainKind::Column,
            ChainKind::Parallel(SweepOrder::EvenOdd),
        ] {
            let dense = match kind {
                ChainKind::Parallel(order) => ordered_parallel_matrix(order, &chain).unwrap(),
                _ => transition_matrix(&kind, &chain).unwrap(),
            };
            let want = &dense * DVector::from_column_slice(&g);
            let got = chain.apply(&kind, &g).unwrap();
            for (a, b) in got.iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let par = transition_matrix(&ChainKind::Parallel(SweepOrder::OddEven), &chain).unwrap();
        let want = &par * DVector::from_column_slice(&g);
        for (a, b) in chain.apply_parallel_average(&g).iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tv_curve_starts_and_decreases() {
        let chain = enumerate(&params(2, 1.0)).unwrap();
        let m = transition_matrix(&ChainKind::SingleSite, &chain).unwrap();
        let top = chain.top_index();
        let curve = tv_curve(&m, chain.stationary(), &point_mass(chain.len(), top), 400).unwrap();
        assert!((curve[0] - (1.0 - chain.stationary()[top])).abs() < 1e-15);
        for w in curve.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        let t_mix = tau(&m, &chain, 0.5 / std::f64::consts::E, 10_000)
            .unwrap()
            .unwrap();
        let t_small = tau(&m, &chain, 1e-3, 100_000).unwrap().unwrap();
        let factor = (1e3f64).ln().ceil() as usize;
        assert!(t_small <= factor * t_mix);
    }

    #[test]
    fn non_reversible_is_rejected() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let mu = [1.0 / 3.0; 3];
        assert!(matches!(
            spectral_gap_exact(&m, &mu),
            Err(SosError::NonReversible(_))
        ));
    }
}
