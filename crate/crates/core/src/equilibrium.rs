//! Transfer-matrix engine: exact partition sums, event probabilities and
//! exact (conditioned) sampling from the Gibbs law.
//!
//! Forward tables hold `ln Z_i(h)`, the log weight of all partial contours
//! `eta(1..i)` ending at height `h`, including the left boundary edge. One
//! step convolves with the two-sided kernel `e^{-beta |h - h'|}`, which the
//! left/right geometric recursions do in `O(H)`. A gradient cap switches to
//! a direct windowed sum.

use rand::Rng;

use crate::error::{Result, SosError};
use crate::model::{Contour, HeightMode, ModelParams};
use crate::rng::stream;

/// Constraints on the contours counted by a table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Restriction {
    /// Per-position lower bounds; empty means none.
    pub min_height: Vec<u32>,
    /// Upper bound on every height, on top of the model cap.
    pub max_height: Option<u32>,
    /// Every edge, boundary edges included, must satisfy `|Δ| < gradient_cap`.
    pub gradient_cap: Option<u32>,
}

impl Restriction {
    pub fn none() -> Self {
        Self::default()
    }

    /// The event `A_h`: every height at least `h`.
    pub fn at_least(n: usize, h: u32) -> Self {
        Self {
            min_height: vec![h; n],
            ..Self::default()
        }
    }

    /// `eta(index) >= h` only.
    pub fn site_at_least(n: usize, index: usize, h: u32) -> Self {
        let mut min_height = vec![0; n];
        min_height[index] = h;
        Self {
            min_height,
            ..Self::default()
        }
    }

    pub fn at_most(level: u32) -> Self {
        Self {
            max_height: Some(level),
            ..Self::default()
        }
    }

    pub fn gradient_below(cap: u32) -> Self {
        Self {
            gradient_cap: Some(cap),
            ..Self::default()
        }
    }
}

/// Height cap used for the tables: the model cap, or in unbounded mode
/// `max(n, boundaries) + ⌈(20 / beta) ln n⌉`.
pub fn truncation_cap(params: &ModelParams) -> u32 {
    match params.height_mode() {
        HeightMode::Bounded { cap } => cap,
        HeightMode::Unbounded => {
            let n = params.n().max(2) as f64;
            let base = (params.n() as u32)
                .max(params.boundary_left())
                .max(params.boundary_right());
            base + ((20.0 / params.beta()) * n.ln()).ceil() as u32
        }
    }
}

/// Natural log of an upper bound on the Gibbs mass of contours exceeding
/// `cap` in the unbounded model, relative to the truncated weight
/// `exp(log_total)`. Any such contour has energy at least
/// `E0 = 2 (cap + 1) - bL - bR`, and at most `2^{n+1} C(E + n, n)` increment
/// vectors have absolute sum `E`.
pub fn log_tail_bound(params: &ModelParams, cap: u32, log_total: f64) -> f64 {
    let n = params.n() as f64;
    let beta = params.beta();
    let e0 = (2.0 * (f64::from(cap) + 1.0)
        - f64::from(params.boundary_left())
        - f64::from(params.boundary_right()))
    .max(0.0);
    let log_term =
        |e: f64| -> f64 { (n + 1.0) * std::f64::consts::LN_2 + ln_choose(e + n, n) - beta * e };
    // terms are log-concave in E, so once the ratio drops below one the rest
    // is dominated by a geometric series
    let mut acc = f64::NEG_INFINITY;
    let mut e = e0;
    loop {
        let t = log_term(e);
        let ratio = ((e + n + 1.0) / (e + 1.0)).ln() - beta;
        if ratio < -1e-3 {
            let tail = t - (-ratio.exp()).ln_1p();
            acc = log_add(acc, tail);
            break;
        }
        acc = log_add(acc, t);
        e += 1.0;
    }
    acc - log_total
}

fn ln_choose(a: f64, b: f64) -> f64 {
    ln_gamma(a + 1.0) - ln_gamma(b + 1.0) - ln_gamma(a - b + 1.0)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, valid for x > 0.5
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `out[h'] = sum_h f[h] q^{|h - h'|}` over `h' in [lo2, hi2]`, with the
/// sum restricted to `|h - h'| < cap` when a cap is given.
fn convolve(f: &[f64], lo: u32, lo2: u32, hi2: u32, q: f64, cap: Option<u32>) -> Vec<f64> {
    let hi = lo + f.len() as u32 - 1;
    let span = hi.max(hi2) - lo.min(lo2);
    match cap {
        Some(g) if g <= span => {
            let reach = g - 1;
            let mut qp = vec![1.0; reach as usize + 1];
            for k in 1..qp.len() {
                qp[k] = qp[k - 1] * q;
            }
            (lo2..=hi2)
                .map(|t| {
                    let from = t.saturating_sub(reach).max(lo);
                    let to = (t + reach).min(hi);
                    if from > to {
                        return 0.0;
                    }
                    (from..=to)
                        .map(|h| f[(h - lo) as usize] * qp[h.abs_diff(t) as usize])
                        .sum()
                })
                .collect()
        }
        _ => {
            let base = lo.min(lo2);
            let top = hi.max(hi2);
            let len = (top - base + 1) as usize;
            let at = |k: usize| -> f64 {
                let h = base + k as u32;
                if h < lo || h > hi {
                    0.0
                } else {
                    f[(h - lo) as usize]
                }
            };
            let mut left = vec![0.0; len];
            let mut acc = 0.0;
            for (k, l) in left.iter_mut().enumerate() {
                acc = at(k) + q * acc;
                *l = acc;
            }
            let mut right = vec![0.0; len];
            let mut acc = 0.0;
            for k in (0..len).rev() {
                right[k] = acc;
                acc = q * (at(k) + acc);
            }
            (lo2..=hi2)
                .map(|t| {
                    let k = (t - base) as usize;
                    left[k] + right[k]
                })
                .collect()
        }
    }
}

/// Log-domain wrapper of [`convolve`].
fn convolve_log(logf: &[f64], lo: u32, lo2: u32, hi2: u32, q: f64, cap: Option<u32>) -> Vec<f64> {
    let m = logf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return vec![f64::NEG_INFINITY; (hi2 - lo2 + 1) as usize];
    }
    let f: Vec<f64> = logf.iter().map(|&v| (v - m).exp()).collect();
    convolve(&f, lo, lo2, hi2, q, cap)
        .into_iter()
        .map(|v| {
            if v > 0.0 {
                v.ln() + m
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

fn edge_allowed(a: u32, b: u32, cap: Option<u32>) -> bool {
    cap.is_none_or(|g| a.abs_diff(b) < g)
}

/// Forward partial sums for one restriction.
#[derive(Debug, Clone)]
pub struct TransferTables {
    params: ModelParams,
    restriction: Restriction,
    cap: u32,
    lo: Vec<u32>,
    hi: Vec<u32>,
    log_forward: Vec<Vec<f64>>,
    log_total: f64,
}

pub fn build_tables(params: &ModelParams, restriction: &Restriction) -> Result<TransferTables> {
    TransferTables::new(params, restriction)
}

impl TransferTables {
    pub fn new(params: &ModelParams, restriction: &Restriction) -> Result<Self> {
        let n = params.n();
        if !restriction.min_height.is_empty() && restriction.min_height.len() != n {
            return Err(SosError::Argument(format!(
                "restriction has {} lower bounds for n = {n}",
                restriction.min_height.len()
            )));
        }
        if restriction.gradient_cap == Some(0) {
            return Err(SosError::EmptyStateSpace(
                "gradient cap 0 admits nothing".into(),
            ));
        }
        let cap = truncation_cap(params);
        let top = restriction.max_height.map_or(cap, |m| m.min(cap));
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for i in 0..n {
            let l = restriction.min_height.get(i).copied().unwrap_or(0);
            let h = if params.is_pinned(i) { 0 } else { top };
            if l > h {
                return Err(SosError::EmptyStateSpace(format!(
                    "no admissible height at position {}",
                    i + 1
                )));
            }
            lo.push(l);
            hi.push(h);
        }
        let beta = params.beta();
        let q = (-beta).exp();
        let g = restriction.gradient_cap;
        let bl = params.boundary_left();
        let br = params.boundary_right();
        let mut log_forward: Vec<Vec<f64>> = Vec::with_capacity(n);
        let first: Vec<f64> = (lo[0]..=hi[0])
            .map(|h| {
                if edge_allowed(bl, h, g) {
                    -beta * f64::from(bl.abs_diff(h))
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        log_forward.push(first);
        for i in 1..n {
            let next = convolve_log(&log_forward[i - 1], lo[i - 1], lo[i], hi[i], q, g);
            log_forward.push(next);
        }
        let last = &log_forward[n - 1];
        let log_total = (lo[n - 1]..=hi[n - 1])
            .zip(last)
            .filter(|(h, _)| edge_allowed(*h, br, g))
            .map(|(h, &v)| v - beta * f64::from(h.abs_diff(br)))
            .fold(f64::NEG_INFINITY, log_add);
        if log_total == f64::NEG_INFINITY {
            return Err(SosError::EmptyStateSpace(
                "no contour satisfies the restriction".into(),
            ));
        }
        Ok(Self {
            params: params.clone(),
            restriction: restriction.clone(),
            cap,
            lo,
            hi,
            log_forward,
            log_total,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn restriction(&self) -> &Restriction {
        &self.restriction
    }

    /// Height cap of the tables (the truncation level in unbounded mode).
    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn is_truncated(&self) -> bool {
        self.params.cap().is_none()
    }

    /// `ln` of the total Gibbs weight `sum exp(-beta * energy)`.
    pub fn log_total(&self) -> f64 {
        self.log_total
    }

    pub fn total(&self) -> f64 {
        self.log_total.exp()
    }

    /// `ln Z_i(h)` for 0-based position `i`; `-inf` outside the allowed range.
    pub fn log_forward(&self, i: usize, h: u32) -> f64 {
        if h < self.lo[i] || h > self.hi[i] {
            f64::NEG_INFINITY
        } else {
            self.log_forward[i][(h - self.lo[i]) as usize]
        }
    }

    /// Exact draw from the restricted Gibbs law, by backward sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Contour {
        let n = self.params.n();
        let beta = self.params.beta();
        let g = self.restriction.gradient_cap;
        let mut heights = vec![0u32; n];
        let mut next = self.params.boundary_right();
        let mut weights = Vec::new();
        for i in (0..n).rev() {
            weights.clear();
            let table = &self.log_forward[i];
            let mut m = f64::NEG_INFINITY;
            for (k, &v) in table.iter().enumerate() {
                let h = self.lo[i] + k as u32;
                let lw = if edge_allowed(h, next, g) {
                    v - beta * f64::from(h.abs_diff(next))
                } else {
                    f64::NEG_INFINITY
                };
                m = m.max(lw);
                weights.push(lw);
            }
            let mut total = 0.0;
            for w in weights.iter_mut() {
                *w = (*w - m).exp();
                total += *w;
            }
            let r = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = weights.len() - 1;
            for (k, &w) in weights.iter().enumerate() {
                acc += w;
                if r < acc {
                    pick = k;
                    break;
                }
            }
            // guard against rounding landing on a zero-weight tail entry
            while weights[pick] == 0.0 && pick > 0 {
                pick -= 1;
            }
            heights[i] = self.lo[i] + pick as u32;
            next = heights[i];
        }
        Contour::new(heights)
    }

    /// `ln` of an upper bound on the relative mass lost to truncation; `None` when bounded.
    pub fn log_truncation_bound(&self) -> Option<f64> {
        self.is_truncated()
            .then(|| log_tail_bound(&self.params, self.cap, self.log_total))
    }
}

/// Events with exact probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    /// `A_h`: every height at least `h`.
    AtLeast(u32),
    /// `B_d`: some edge, boundary edges included, with `|Δ| >= d`.
    Gradient(u32),
    /// Some height strictly above `level` (the complement of `C`).
    Exceed(u32),
    /// `eta(index) >= height`, 0-based index.
    Marginal { index: usize, height: u32 },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::AtLeast(_) => "A",
            Event::Gradient(_) => "B",
            Event::Exceed(_) => "C-exceed",
            Event::Marginal { .. } => "marginal",
        }
    }

    pub fn parameter(&self) -> String {
        match self {
            Event::AtLeast(h) => h.to_string(),
            Event::Gradient(d) => d.to_string(),
            Event::Exceed(l) => l.to_string(),
            Event::Marginal { index, height } => format!("{}:{height}", index + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventProbability {
    pub probability: f64,
    pub log_probability: f64,
    /// Logged truncation error bound in unbounded mode.
    pub log_truncation_bound: Option<f64>,
}

impl EventProbability {
    fn from_log(log_probability: f64, bound: Option<f64>) -> Self {
        Self {
            probability: log_probability.exp(),
            log_probability,
            log_truncation_bound: bound,
        }
    }
}

/// Log weight of a restricted space, `-inf` when it is empty.
fn restricted_log_total(params: &ModelParams, restriction: &Restriction) -> Result<f64> {
    match TransferTables::new(params, restriction) {
        Ok(t) => Ok(t.log_total()),
        Err(SosError::EmptyStateSpace(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// `out[t] = ln sum_h e^{logf[h] - beta |h - t|}` over `|h - t| >= d`, by
/// direct summation.
fn far_convolve_log(logf: &[f64], lo: u32, lo2: u32, hi2: u32, beta: f64, d: u32) -> Vec<f64> {
    (lo2..=hi2)
        .map(|t| {
            logf.iter()
                .enumerate()
                .map(|(k, &v)| (lo + k as u32, v))
                .filter(|(h, _)| h.abs_diff(t) >= d)
                .map(|(h, v)| v - beta * f64::from(h.abs_diff(t)))
                .fold(f64::NEG_INFINITY, log_add)
        })
        .collect()
}

/// Log weight of `B_d`, accumulated directly so small probabilities keep
/// full relative precision. `hit` holds partial contours that already have
/// a steep edge, `clear` those that do not.
fn log_gradient_weight(full: &TransferTables, d: u32) -> f64 {
    let params = full.params();
    let beta = params.beta();
    let q = (-beta).exp();
    let n = params.n();
    let bl = params.boundary_left();
    // forward rows of the gradient-capped weights; the capped total may be
    // empty even where these prefixes are not
    let mut clear: Vec<f64> = (full.lo[0]..=full.hi[0])
        .map(|h| {
            if bl.abs_diff(h) < d {
                -beta * f64::from(bl.abs_diff(h))
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let mut hit: Vec<f64> = (full.lo[0]..=full.hi[0])
        .map(|h| {
            if bl.abs_diff(h) >= d {
                -beta * f64::from(bl.abs_diff(h))
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    for i in 1..n {
        let (lo, lo2, hi2) = (full.lo[i - 1], full.lo[i], full.hi[i]);
        let carried = convolve_log(&hit, lo, lo2, hi2, q, None);
        let fresh = far_convolve_log(&clear, lo, lo2, hi2, beta, d);
        hit = carried
            .into_iter()
            .zip(fresh)
            .map(|(a, b)| log_add(a, b))
            .collect();
        clear = convolve_log(&clear, lo, lo2, hi2, q, Some(d));
    }
    let br = params.boundary_right();
    let last = n - 1;
    let carried = convolve_log(&hit, full.lo[last], br, br, q, None)[0];
    let fresh = far_convolve_log(&clear, full.lo[last], br, br, beta, d)[0];
    log_add(carried, fresh)
}

/// Log weight of contours with some height above `level`, accumulated
/// directly as in [`log_gradient_weight`].
fn log_exceed_weight(full: &TransferTables, level: u32) -> f64 {
    let params = full.params();
    let beta = params.beta();
    let q = (-beta).exp();
    let n = params.n();
    let pick = |i: usize, from_all: &[f64], from_hit: &[f64]| -> Vec<f64> {
        (full.lo[i]..=full.hi[i])
            .enumerate()
            .map(|(k, h)| if h > level { from_all[k] } else { from_hit[k] })
            .collect()
    };
    let none = vec![f64::NEG_INFINITY; (full.hi[0] - full.lo[0] + 1) as usize];
    let mut hit = pick(0, &full.log_forward[0], &none);
    for i in 1..n {
        let carried = convolve_log(&hit, full.lo[i - 1], full.lo[i], full.hi[i], q, None);
        hit = pick(i, &full.log_forward[i], &carried);
    }
    let br = params.boundary_right();
    convolve_log(&hit, full.lo[n - 1], br, br, q, None)[0]
}

pub fn event_prob(event: Event, params: &ModelParams) -> Result<EventProbability> {
    let full = TransferTables::new(params, &Restriction::none())?;
    event_prob_with(event, &full)
}

/// [`event_prob`] reusing already-built unrestricted tables.
pub fn event_prob_with(event: Event, full: &TransferTables) -> Result<EventProbability> {
    if full.restriction() != &Restriction::none() {
        return Err(SosError::Argument(
            "event probabilities need unrestricted tables".into(),
        ));
    }
    let params = full.params();
    let n = params.n();
    let z = full.log_total();
    let bound = full.log_truncation_bound();
    let log_p = match event {
        Event::AtLeast(h) => restricted_log_total(params, &Restriction::at_least(n, h))? - z,
        Event::Marginal { index, height } => {
            if index >= n {
                return Err(SosError::Argument(format!(
                    "position {index} outside [0, {n})"
                )));
            }
            restricted_log_total(params, &Restriction::site_at_least(n, index, height))? - z
        }
        Event::Gradient(d) => {
            if d == 0 {
                0.0
            } else {
                log_gradient_weight(full, d) - z
            }
        }
        Event::Exceed(level) => log_exceed_weight(full, level) - z,
    };
    Ok(EventProbability::from_log(log_p.min(0.0), bound))
}

/// What an exact draw is conditioned on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Conditioning {
    None,
    /// The event `A_h`.
    AtLeast(u32),
    /// Every `m`-th position pinned at zero.
    Pinned(usize),
}

impl Conditioning {
    pub fn tables(&self, params: &ModelParams) -> Result<TransferTables> {
        match self {
            Conditioning::None => TransferTables::new(params, &Restriction::none()),
            Conditioning::AtLeast(h) => {
                TransferTables::new(params, &Restriction::at_least(params.n(), *h))
            }
            Conditioning::Pinned(m) => TransferTables::new(
                &params.clone().with_pinned_spacing(*m)?,
                &Restriction::none(),
            ),
        }
    }
}

/// One exact draw on stream `(seed, 0)`.
pub fn sample_exact(
    params: &ModelParams,
    conditioning: &Conditioning,
    seed: u64,
) -> Result<Contour> {
    let tables = conditioning.tables(params)?;
    Ok(tables.sample(&mut stream(seed, 0)))
}

/// Exact mean and variance of the mean height `(1/n) sum_i eta(i)`.
///
/// The forward recursion carries the weight, the weighted partial sum and
/// the weighted squared partial sum at each end height.
pub fn mean_height_moments(params: &ModelParams, restriction: &Restriction) -> Result<(f64, f64)> {
    let tables = TransferTables::new(params, restriction)?;
    let n = params.n();
    let beta = params.beta();
    let q = (-beta).exp();
    let g = restriction.gradient_cap;
    let (lo, hi) = (&tables.lo, &tables.hi);
    let bl = params.boundary_left();
    let br = params.boundary_right();
    let mut w0: Vec<f64> = (lo[0]..=hi[0])
        .map(|h| {
            if edge_allowed(bl, h, g) {
                q.powf(f64::from(bl.abs_diff(h)))
            } else {
                0.0
            }
        })
        .collect();
    let heights0: Vec<f64> = (lo[0]..=hi[0]).map(f64::from).collect();
    let mut w1: Vec<f64> = w0.iter().zip(&heights0).map(|(w, h)| w * h).collect();
    let mut w2: Vec<f64> = w0.iter().zip(&heights0).map(|(w, h)| w * h * h).collect();
    for i in 1..n {
        let s = w0.iter().copied().fold(0.0, f64::max);
        if s > 0.0 {
            for v in w0.iter_mut().chain(w1.iter_mut()).chain(w2.iter_mut()) {
                *v /= s;
            }
        }
        let k0 = convolve(&w0, lo[i - 1], lo[i], hi[i], q, g);
        let k1 = convolve(&w1, lo[i - 1], lo[i], hi[i], q, g);
        let k2 = convolve(&w2, lo[i - 1], lo[i], hi[i], q, g);
        let hs: Vec<f64> = (lo[i]..=hi[i]).map(f64::from).collect();
        w2 = (0..hs.len())
            .map(|k| k2[k] + 2.0 * hs[k] * k1[k] + hs[k] * hs[k] * k0[k])
            .collect();
        w1 = (0..hs.len()).map(|k| k1[k] + hs[k] * k0[k]).collect();
        w0 = k0;
    }
    let (mut z, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (k, h) in (lo[n - 1]..=hi[n - 1]).enumerate() {
        if !edge_allowed(h, br, g) {
            continue;
        }
        let f = q.powf(f64::from(h.abs_diff(br)));
        z += f * w0[k];
        s1 += f * w1[k];
        s2 += f * w2[k];
    }
    let mean_sum = s1 / z;
    let var_sum = (s2 / z - mean_sum * mean_sum).max(0.0);
    let nf = n as f64;
    Ok((mean_sum / nf, var_sum / (nf * nf)))
}

/// `P(max_i eta(i) <= k)` for `k = 0..=cap`.
pub fn max_height_cdf(params: &ModelParams) -> Result<Vec<f64>> {
    let full = TransferTables::new(params, &Restriction::none())?;
    (0..=full.cap())
        .map(|k| {
            Ok(
                (restricted_log_total(params, &Restriction::at_most(k))? - full.log_total())
                    .exp()
                    .min(1.0),
            )
        })
        .collect()
}

/// Mean and variance of the maximum height.
pub fn max_height_moments(params: &ModelParams) -> Result<(f64, f64)> {
    let cdf = max_height_cdf(params)?;
    let (mut m1, mut m2, mut prev) = (0.0, 0.0, 0.0);
    for (k, &c) in cdf.iter().enumerate() {
        let p = (c - prev).max(0.0);
        m1 += p * k as f64;
        m2 += p * (k * k) as f64;
        prev = c;
    }
    Ok((m1, (m2 - m1 * m1).max(0.0)))
}

/// CSV rows `event,parameter,probability,log_probability`.
pub fn events_csv(rows: &[(Event, EventProbability)]) -> String {
    let mut out = String::from("event,parameter,probability,log_probability\n");
    for (e, p) in rows {
        out.push_str(&format!(
            "{},{},{:.17e},{:.17e}\n",
            e.name(),
            e.parameter(),
            p.probability,
            p.log_probability
        ));
    }
    out
}
