//! The single-column conditional law and its closed forms.
//!
//! Given neighbour heights with minimum `a` and maximum `b`, the height at a
//! column is uniform on `[a, b]` and decays by `x = e^{-2 beta}` per unit
//! outside it, truncated at 0 below and at the cap (if any) above. With
//! `S_m = sum_{j=1}^m x^j` and `T_m = (sum_{j=1}^m j x^j) / S_m`, the
//! normaliser is `e^{-beta (b - a)} (S_a + (b - a + 1) + S_{H - b})` and the
//! mean is `(a + b)/2 + eps(a, b)` whenever `a + b <= H`.
//!
//! All tail sums are evaluated in closed form (`expm1` based), never by
//! summation, so nothing cancels at large `beta`.

use crate::error::{Result, SosError};
use crate::model::ModelParams;

/// Length of a geometric tail: a finite number of terms or the full series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailLength {
    Finite(u32),
    Infinite,
}

/// Closed-form geometric sums in `x = e^{-2 beta}`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Geometric {
    beta: f64,
    x: f64,
    one_minus_x: f64,
    s_inf: f64,
}

impl Geometric {
    pub(crate) fn new(beta: f64) -> Self {
        let x = (-2.0 * beta).exp();
        let one_minus_x = -(-2.0 * beta).exp_m1();
        Self {
            beta,
            x,
            one_minus_x,
            s_inf: x / one_minus_x,
        }
    }

    #[inline]
    pub(crate) fn x(&self) -> f64 {
        self.x
    }

    /// `x^m`.
    #[inline]
    pub(crate) fn pow(&self, m: u32) -> f64 {
        (-2.0 * self.beta * f64::from(m)).exp()
    }

    /// `1 - x^m`.
    #[inline]
    fn one_minus_pow(&self, m: u32) -> f64 {
        -(-2.0 * self.beta * f64::from(m)).exp_m1()
    }

    #[inline]
    pub(crate) fn s(&self, m: u32) -> f64 {
        self.s_inf * self.one_minus_pow(m)
    }

    #[inline]
    pub(crate) fn s_tail(&self, m: TailLength) -> f64 {
        match m {
            TailLength::Finite(m) => self.s(m),
            TailLength::Infinite => self.s_inf,
        }
    }

    /// `T_m`, with the convention `T_0 = 0`.
    pub(crate) fn t(&self, m: TailLength) -> f64 {
        match m {
            TailLength::Finite(0) => 0.0,
            TailLength::Finite(m) => {
                let mf = f64::from(m);
                1.0 / self.one_minus_x - mf * self.pow(m) / self.one_minus_pow(m)
            }
            TailLength::Infinite => 1.0 / self.one_minus_x,
        }
    }
}

/// `S_m`, `T_m` and `S_inf` for one tail length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailSums {
    pub m: TailLength,
    pub s_m: f64,
    pub t_m: f64,
    pub s_inf: f64,
}

impl TailSums {
    pub fn new(beta: f64, m: TailLength) -> Self {
        let g = Geometric::new(beta);
        Self {
            m,
            s_m: g.s_tail(m),
            t_m: g.t(m),
            s_inf: g.s_inf,
        }
    }
}

/// The law of a freshly resampled column given neighbour range `[a, b]`.
#[derive(Debug, Clone, Copy)]
pub struct ConditionalLaw {
    a: u32,
    b: u32,
    cap: Option<u32>,
    geo: Geometric,
    /// Normaliser `e^{-beta (b - a)} (S_low + (b - a + 1) + S_high)`.
    pub z: f64,
    /// `S_a`: mass below `a`, relative to the uniform block.
    pub s_low: f64,
    /// `S_{H - b}` (or `S_inf`): mass above `b`, relative to the uniform block.
    pub s_high: f64,
    /// Total relative mass `s_low + (b - a + 1) + s_high`.
    total: f64,
}

impl ConditionalLaw {
    pub fn new(a: u32, b: u32, params: &ModelParams) -> Result<Self> {
        if a > b {
            return Err(SosError::Argument(format!(
                "conditional law needs a <= b, got a = {a}, b = {b}"
            )));
        }
        if let Some(cap) = params.cap() {
            if b > cap {
                return Err(SosError::Argument(format!(
                    "neighbour height {b} exceeds cap {cap}"
                )));
            }
        }
        Ok(Self::new_unchecked(a, b, params.cap(), params.beta()))
    }

    #[inline]
    pub(crate) fn new_unchecked(a: u32, b: u32, cap: Option<u32>, beta: f64) -> Self {
        let geo = Geometric::new(beta);
        Self::with_geometric(a, b, cap, geo)
    }

    #[inline]
    pub(crate) fn with_geometric(a: u32, b: u32, cap: Option<u32>, geo: Geometric) -> Self {
        let s_low = geo.s(a);
        let s_high = geo.s_tail(upper_tail(b, cap));
        let block = f64::from(b - a + 1);
        let total = s_low + block + s_high;
        let z = (-geo.beta * f64::from(b - a)).exp() * total;
        Self {
            a,
            b,
            cap,
            geo,
            z,
            s_low,
            s_high,
            total,
        }
    }

    pub fn a(&self) -> u32 {
        self.a
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    /// Largest height with positive mass, `None` in unbounded mode.
    pub fn max_height(&self) -> Option<u32> {
        self.cap
    }

    /// Mass at `j` relative to the uniform block.
    fn relative_weight(&self, j: u32) -> f64 {
        if let Some(cap) = self.cap {
            if j > cap {
                return 0.0;
            }
        }
        if j < self.a {
            self.geo.pow(self.a - j)
        } else if j <= self.b {
            1.0
        } else {
            self.geo.pow(j - self.b)
        }
    }

    pub fn prob(&self, j: u32) -> f64 {
        self.relative_weight(j) / self.total
    }

    /// Relative cumulative mass `sum_{j <= k}`.
    fn relative_cdf(&self, k: u32) -> f64 {
        let (a, b) = (self.a, self.b);
        if k < a {
            // sum_{d=a-k}^{a} x^d = x^{a-k} (1 - x^{k+1}) / (1 - x)
            self.geo.pow(a - k) * self.geo.one_minus_pow(k + 1) / self.geo.one_minus_x
        } else if k <= b {
            self.s_low + f64::from(k - a + 1)
        } else {
            let above = match self.cap {
                Some(cap) => (k.min(cap)) - b,
                None => k - b,
            };
            self.s_low + f64::from(b - a + 1) + self.geo.s(above)
        }
    }

    pub fn cdf(&self, k: u32) -> f64 {
        self.relative_cdf(k) / self.total
    }

    /// Inverse CDF: `min { k : cdf(k) >= r }`.
    ///
    /// Nondecreasing in `r`, and in `(a, b)` for fixed `r`; this is what
    /// makes the column coupling monotone.
    pub fn sample(&self, r: f64) -> u32 {
        debug_assert!((0.0..1.0).contains(&r), "r = {r} outside [0, 1)");
        let t = r * self.total;
        let (a, b) = (self.a, self.b);
        let beta2 = 2.0 * self.geo.beta;
        let max_k = self.cap.unwrap_or(u32::MAX - 1);
        let mut k = if a > 0 && t <= self.s_low {
            // G(a-1-q) = S_inf (x^q - x^a) >= t  <=>  q <= -ln(t / S_inf + x^a) / 2beta
            let arg = t / self.geo.s_inf + self.geo.pow(a);
            let q = (-arg.ln() / beta2).floor();
            let q = if q.is_nan() {
                0.0
            } else {
                q.clamp(0.0, f64::from(a - 1))
            };
            a - 1 - q as u32
        } else if t <= self.s_low + f64::from(b - a + 1) {
            let offset = (t - self.s_low).ceil() - 1.0;
            a + offset.clamp(0.0, f64::from(b - a)) as u32
        } else {
            let v = t - self.s_low - f64::from(b - a + 1);
            let y = 1.0 - v / self.geo.s_inf;
            let limit = f64::from(max_k - b);
            let m = if y > 0.0 {
                (-y.ln() / beta2).ceil().clamp(1.0, limit.max(1.0))
            } else {
                limit.max(1.0)
            };
            (b + m as u32).min(max_k)
        };
        while k > 0 && self.relative_cdf(k - 1) >= t {
            k -= 1;
        }
        while k < max_k && self.relative_cdf(k) < t {
            k += 1;
        }
        k
    }

    /// Mean by direct summation over the support.
    pub fn mean_direct(&self) -> f64 {
        let upper = match self.cap {
            Some(cap) => cap,
            None => {
                // terms (b + k) x^k beyond this point are below 1e-20 relative
                let x = self.geo.x;
                let mut k = 1u32;
                let mut term = x;
                while term * (f64::from(self.b) + f64::from(k)) > 1e-20 * self.total {
                    k += 1;
                    term *= x;
                }
                self.b + k
            }
        };
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..=upper {
            let w = self.relative_weight(j);
            num += f64::from(j) * w;
            den += w;
        }
        num / den
    }

    /// Mean from the closed forms, reflecting `a -> H - a` when `a + b > H`.
    pub fn mean_closed(&self) -> f64 {
        let mid = 0.5 * (f64::from(self.a) + f64::from(self.b));
        match self.cap {
            Some(cap) if self.a + self.b > cap => {
                mid - epsilon_raw(cap - self.b, cap - self.a, Some(cap), self.geo)
            }
            _ => mid + epsilon_raw(self.a, self.b, self.cap, self.geo),
        }
    }
}

#[inline]
fn upper_tail(b: u32, cap: Option<u32>) -> TailLength {
    match cap {
        Some(cap) => TailLength::Finite(cap - b),
        None => TailLength::Infinite,
    }
}

/// `eps(a, b) = Pr[eta > a + b] ((a + b)/2 + T_{H - (a + b)})`, caller ensures `a + b <= H`.
fn epsilon_raw(a: u32, b: u32, cap: Option<u32>, geo: Geometric) -> f64 {
    let rest = match cap {
        Some(cap) => TailLength::Finite(cap - a - b),
        None => TailLength::Infinite,
    };
    let denom = geo.s(a) + f64::from(b - a + 1) + geo.s_tail(upper_tail(b, cap));
    let p_above = geo.pow(a) * geo.s_tail(rest) / denom;
    p_above * (0.5 * (f64::from(a) + f64::from(b)) + geo.t(rest))
}

pub fn conditional_law(a: u32, b: u32, params: &ModelParams) -> Result<ConditionalLaw> {
    ConditionalLaw::new(a, b, params)
}

/// Deterministic inverse-CDF draw from `law` driven by `r` in `[0, 1)`.
pub fn conditional_cdf_sample(law: &ConditionalLaw, r: f64) -> Result<u32> {
    if !(0.0..1.0).contains(&r) {
        return Err(SosError::Argument(format!("r = {r} outside [0, 1)")));
    }
    Ok(law.sample(r))
}

pub fn conditional_mean_direct(a: u32, b: u32, params: &ModelParams) -> Result<f64> {
    Ok(ConditionalLaw::new(a, b, params)?.mean_direct())
}

/// The entropy-repulsion term of the conditional mean.
///
/// Defined for `a <= b` and, with a cap `H`, `a + b <= H`; the mirrored
/// case is reached through [`mean_sandwich`] or [`ConditionalLaw::mean_closed`].
pub fn epsilon(a: u32, b: u32, params: &ModelParams) -> Result<f64> {
    if a > b {
        return Err(SosError::Argument(format!(
            "epsilon needs a <= b, got ({a}, {b})"
        )));
    }
    if let Some(cap) = params.cap() {
        if u64::from(a) + u64::from(b) > u64::from(cap) {
            return Err(SosError::Domain(format!(
                "a + b = {} exceeds the cap {cap}",
                u64::from(a) + u64::from(b)
            )));
        }
    }
    Ok(epsilon_raw(
        a,
        b,
        params.cap(),
        Geometric::new(params.beta()),
    ))
}

/// Compares the conditional means of an ordered pair of columns.
///
/// The upper copy sees neighbour range `[a_upper, b_upper]`, the lower copy
/// `[c_lower, d_lower]`. Returns `(E[upper] - E[lower], midpoint gap)`; the
/// first component always lies in `[0, midpoint gap]`.
pub fn mean_sandwich(
    a_upper: u32,
    b_upper: u32,
    c_lower: u32,
    d_lower: u32,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    let lo = a_upper.min(d_lower);
    let hi = a_upper.max(d_lower);
    if !(c_lower <= lo && hi <= b_upper) {
        return Err(SosError::Argument(format!(
            "need c <= min(a, d) <= max(a, d) <= b, got a={a_upper} b={b_upper} c={c_lower} d={d_lower}"
        )));
    }
    let upper = ConditionalLaw::new(a_upper, b_upper, params)?;
    let lower = ConditionalLaw::new(c_lower, d_lower, params)?;
    let diff = upper.mean_closed() - lower.mean_closed();
    let mid = 0.5 * (f64::from(a_upper) + f64::from(b_upper))
        - 0.5 * (f64::from(c_lower) + f64::from(d_lower));
    Ok((diff, mid))
}

impl ModelParams {
    /// Shorthand for [`conditional_law`].
    pub fn law(&self, a: u32, b: u32) -> Result<ConditionalLaw> {
        ConditionalLaw::new(a, b, self)
    }
}
