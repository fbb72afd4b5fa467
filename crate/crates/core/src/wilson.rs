//! Wilson eigenvector weights, the weighted distance between ordered
//! contours, and the antisymmetric test function used to bound the
//! spectral gap from above.

use crate::dynamics::{ChainKind, Direction, StepContext};
use crate::equilibrium::{Restriction, TransferTables};
use crate::error::{Result, SosError};
use crate::exact::enumerate;
use crate::model::{leq, Contour, ModelParams};
use crate::rng::stream;

/// `w(i) = sin(pi i / (n + 1))` for `i = 1..n`, the positive eigenvector of
/// the discrete Laplacian with zero boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct WilsonWeights {
    w: Vec<f64>,
    lambda: f64,
    w_min: f64,
}

impl WilsonWeights {
    pub fn new(n: usize) -> Self {
        let h = std::f64::consts::PI / (n as f64 + 1.0);
        let w: Vec<f64> = (1..=n).map(|i| (h * i as f64).sin()).collect();
        // 1 - cos h, without the cancellation
        let s = (0.5 * h).sin();
        let lambda = 2.0 * s * s;
        let w_min = w.first().copied().unwrap_or(0.0);
        Self { w, lambda, w_min }
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn w_min(&self) -> f64 {
        self.w_min
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// Largest `|Δw(i) - λ w(i)|` with `Δg(i) = g(i) - (g(i-1) + g(i+1)) / 2`.
    pub fn laplacian_residual(&self) -> f64 {
        let n = self.w.len();
        let at = |j: isize| -> f64 {
            if j < 0 || j as usize >= n {
                0.0
            } else {
                self.w[j as usize]
            }
        };
        (0..n as isize)
            .map(|i| {
                let lap = at(i) - 0.5 * (at(i - 1) + at(i + 1));
                (lap - self.lambda * at(i)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[inline]
    pub fn distance_unchecked(&self, lower: &[u32], upper: &[u32]) -> f64 {
        self.w
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(&w, (&l, &u))| w * f64::from(u.abs_diff(l)))
            .sum()
    }
}

pub fn weights(n: usize) -> Result<WilsonWeights> {
    if n == 0 {
        return Err(SosError::Argument("n must be at least 1".into()));
    }
    Ok(WilsonWeights::new(n))
}

/// `sum_i w(i) (upper(i) - lower(i))` for an ordered pair.
pub fn distance(lower: &Contour, upper: &Contour, weights: &WilsonWeights) -> Result<f64> {
    if lower.len() != weights.n() {
        return Err(SosError::Argument(format!(
            "contour length {} does not match weights for n = {}",
            lower.len(),
            weights.n()
        )));
    }
    if !leq(lower, upper)? {
        return Err(SosError::Argument(
            "distance requires an ordered pair".into(),
        ));
    }
    Ok(weights.distance_unchecked(lower.heights(), upper.heights()))
}

/// `f(eta) = sum_i w(i) (eta(i+1) - eta(i-1))` with boundary heights at the ends.
pub fn gap_test_function(contour: &Contour, params: &ModelParams, weights: &WilsonWeights) -> f64 {
    test_function_of(contour.heights(), params, weights.w())
}

#[inline]
pub(crate) fn test_function_of(heights: &[u32], params: &ModelParams, w: &[f64]) -> f64 {
    let n = heights.len();
    let at = |j: usize| -> f64 {
        // j is the 0-based extended index: 0 is the left boundary, n + 1 the right
        if j == 0 {
            f64::from(params.boundary_left())
        } else if j == n + 1 {
            f64::from(params.boundary_right())
        } else {
            f64::from(heights[j - 1])
        }
    };
    (1..=n).map(|i| w[i - 1] * (at(i + 1) - at(i - 1))).sum()
}

/// Largest `n` for [`GapMode::Exact`].
pub const EXACT_GAP_MAX_N: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMode {
    /// Enumerate every contour (`n <= 6`).
    Exact,
    /// Average exact per-contour Dirichlet terms over exact equilibrium draws.
    MonteCarlo { samples: usize, seed: u64 },
}

/// `∂f/∂eta(i) = w(i-1) - w(i+1)`, with `w(0) = w(n+1) = 0`.
fn coefficients(w: &[f64]) -> Vec<f64> {
    let n = w.len();
    (0..n)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { w[i - 1] };
            let right = if i + 1 == n { 0.0 } else { w[i + 1] };
            left - right
        })
        .collect()
}

/// Rayleigh quotient `<f, (I - P) f>_mu / Var_mu(f)` of the test function,
/// an upper bound on the spectral gap of `kind`. Parallel kinds use the
/// reversible mixture of both sweep orders.
pub fn gap_upper_bound(kind: &ChainKind, params: &ModelParams, mode: GapMode) -> Result<f64> {
    let (base, params) = kind.resolve(params)?;
    if params.n() < 2 {
        return Err(SosError::Degenerate(
            "with one site the test function is identically zero".into(),
        ));
    }
    let weights = WilsonWeights::new(params.n());
    let (dirichlet, variance) = match mode {
        GapMode::Exact => exact_terms(&base, &params, &weights)?,
        GapMode::MonteCarlo { samples, seed } => {
            montecarlo_terms(&base, &params, &weights, samples, seed)?
        }
    };
    if !(variance > 1e-300) {
        return Err(SosError::Degenerate(
            "test function has zero variance".into(),
        ));
    }
    Ok(dirichlet / variance)
}

fn exact_terms(
    kind: &ChainKind,
    params: &ModelParams,
    weights: &WilsonWeights,
) -> Result<(f64, f64)> {
    if params.n() > EXACT_GAP_MAX_N {
        return Err(SosError::StateSpaceTooLarge {
            states: u128::from(params.cap().unwrap_or(u32::MAX))
                .saturating_add(1)
                .saturating_pow(params.n() as u32),
            limit: crate::exact::ENUMERATION_LIMIT,
        });
    }
    let chain = enumerate(params)?;
    let f: Vec<f64> = chain
        .states()
        .iter()
        .map(|c| test_function_of(c.heights(), params, weights.w()))
        .collect();
    let pf = match kind {
        ChainKind::Parallel(_) => chain.apply_parallel_average(&f),
        other => chain.apply(other, &f)?,
    };
    let mu = chain.stationary();
    let mean: f64 = mu.iter().zip(&f).map(|(m, v)| m * v).sum();
    let second: f64 = mu.iter().zip(&f).map(|(m, v)| m * v * v).sum();
    let dirichlet: f64 = (0..f.len()).map(|s| mu[s] * f[s] * (f[s] - pf[s])).sum();
    Ok((dirichlet, second - mean * mean))
}

/// Exact Dirichlet contribution `½ sum_y P(eta, y) (f(y) - f(eta))^2` of
/// one contour. For the parallel mixture the per-contour term is
/// `f^2 - (P_O f)(P_E f)`, whose mean is the Dirichlet form.
pub fn local_dirichlet(
    kind: &ChainKind,
    heights: &[u32],
    params: &ModelParams,
    weights: &WilsonWeights,
) -> Result<f64> {
    let ctx = StepContext::new(params);
    let coef = coefficients(weights.w());
    let n = params.n();
    let cap = params
        .cap()
        .ok_or_else(|| SosError::Argument("Dirichlet terms need a bounded height mode".into()))?;
    let moments = |i: usize| -> (f64, f64) {
        // conditional mean and E[(h - eta(i))^2]
        let (a, b) = ctx.neighbor_range(heights, i);
        let law = ctx.law(a, b);
        let h0 = f64::from(heights[i]);
        let (mut m, mut s) = (0.0, 0.0);
        for h in 0..=cap {
            let p = law.prob(h);
            m += p * f64::from(h);
            s += p * (f64::from(h) - h0).powi(2);
        }
        (m, s)
    };
    match kind {
        ChainKind::SingleSite => {
            let mut total = 0.0;
            for i in 0..n {
                if ctx.is_pinned(i) {
                    continue;
                }
                let h = heights[i];
                for dir in [Direction::Down, Direction::Up] {
                    let possible = match dir {
                        Direction::Down => h > 0,
                        Direction::Up => h < cap,
                    };
                    if possible {
                        total += ctx.ss_threshold(heights, i, dir) / (2.0 * n as f64)
                            * coef[i]
                            * coef[i];
                    }
                }
            }
            Ok(0.5 * total)
        }
        ChainKind::Column => {
            let total: f64 = (0..n)
                .filter(|&i| !ctx.is_pinned(i))
                .map(|i| coef[i] * coef[i] * moments(i).1)
                .sum();
            Ok(0.5 * total / n as f64)
        }
        ChainKind::Parallel(_) => {
            let f = test_function_of(heights, params, weights.w());
            let (mut po, mut pe) = (f, f);
            for i in (0..n).filter(|&i| !ctx.is_pinned(i)) {
                let shift = coef[i] * (moments(i).0 - f64::from(heights[i]));
                if i % 2 == 0 {
                    po += shift;
                } else {
                    pe += shift;
                }
            }
            Ok(f * f - po * pe)
        }
        ChainKind::Pinned { .. } => Err(SosError::Argument("resolve pinned kinds first".into())),
    }
}

fn montecarlo_terms(
    kind: &ChainKind,
    params: &ModelParams,
    weights: &WilsonWeights,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(SosError::Argument(
            "at least two samples are required".into(),
        ));
    }
    let tables = TransferTables::new(params, &Restriction::none())?;
    let mut rng = stream(seed, 0);
    let (mut sum_d, mut sum_f, mut sum_f2) = (0.0, 0.0, 0.0);
    for _ in 0..samples {
        let c = tables.sample(&mut rng);
        let f = test_function_of(c.heights(), params, weights.w());
        sum_d += local_dirichlet(kind, c.heights(), params, weights)?;
        sum_f += f;
        sum_f2 += f * f;
    }
    let m = samples as f64;
    let mean = sum_f / m;
    let var = (sum_f2 - m * mean * mean) / (m - 1.0);
    Ok((sum_d / m, var))
}
