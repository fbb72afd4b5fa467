//! Censored single-site runs: epochs in which only odd or only even
//! positions may move, with a log of visits to the gradient event `B`.

use rand::Rng;

use crate::dynamics::{Parity, StepContext, UpdateDraw};
use crate::equilibrium::Conditioning;
use crate::error::{Result, SosError};
use crate::model::{Contour, ModelParams};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochPattern {
    OddOnly,
    EvenOnly,
    Free,
    /// Every update is discarded.
    Frozen,
}

impl EpochPattern {
    fn admits(self, index: usize) -> bool {
        match self {
            EpochPattern::OddOnly => Parity::of_index(index) == Parity::Odd,
            EpochPattern::EvenOnly => Parity::of_index(index) == Parity::Even,
            EpochPattern::Free => true,
            EpochPattern::Frozen => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensorSchedule {
    pub patterns: Vec<EpochPattern>,
    pub epoch_length: u64,
    /// Gradient threshold `d` of the event `B`.
    pub threshold: u32,
}

/// `⌈4 ln n⌉`, at least 1.
pub fn default_threshold(n: usize) -> u32 {
    ((4.0 * (n.max(1) as f64).ln()).ceil() as u32).max(1)
}

impl CensorSchedule {
    pub fn new(patterns: Vec<EpochPattern>, epoch_length: u64, threshold: u32) -> Result<Self> {
        if patterns.is_empty() || epoch_length == 0 || threshold == 0 {
            return Err(SosError::Argument(
                "a schedule needs at least one epoch, positive epoch length and threshold".into(),
            ));
        }
        Ok(Self {
            patterns,
            epoch_length,
            threshold,
        })
    }

    /// `epochs` epochs alternating between the two parities, starting with `first`.
    pub fn alternating(
        epochs: usize,
        epoch_length: u64,
        first: Parity,
        threshold: u32,
    ) -> Result<Self> {
        let pattern = |k: usize| {
            let p = if k.is_multiple_of(2) { first } else { first.other() };
            match p {
                Parity::Odd => EpochPattern::OddOnly,
                Parity::Even => EpochPattern::EvenOnly,
            }
        };
        Self::new((0..epochs).map(pattern).collect(), epoch_length, threshold)
    }

    pub fn epochs(&self) -> usize {
        self.patterns.len()
    }

    pub fn total_steps(&self) -> Result<u64> {
        (self.patterns.len() as u64)
            .checked_mul(self.epoch_length)
            .ok_or(SosError::Overflow)
    }
}

/// Asymptotic epoch bookkeeping for an event `A` with `mu(A) = exp(log_mu_a)`:
/// `D = ⌈ln 1/mu(A)⌉`, total length `2 n^3 D^2 ln^8 n`, `n^2 ln^2 n` epochs
/// of `2 n D^2 ln^6 n` steps and gradient threshold `D ln^2 n`. Housed for
/// reference; the values are far beyond desk-scale run lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochConstants {
    pub d: f64,
    pub total_steps: f64,
    pub epochs: f64,
    pub epoch_length: f64,
    pub gradient_threshold: f64,
}

pub fn epoch_constants(n: usize, log_mu_a: f64) -> Result<EpochConstants> {
    if n < 2 || log_mu_a > 0.0 || log_mu_a.is_nan() {
        return Err(SosError::Argument("need n >= 2 and mu(A) in (0, 1]".into()));
    }
    let nf = n as f64;
    let l = nf.ln();
    let d = (-log_mu_a).ceil().max(1.0);
    Ok(EpochConstants {
        d,
        total_steps: 2.0 * nf.powi(3) * d * d * l.powi(8),
        epochs: nf * nf * l * l,
        epoch_length: 2.0 * nf * d * d * l.powi(6),
        gradient_threshold: d * l * l,
    })
}

/// Law of the starting contour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StartLaw {
    Equilibrium,
    /// Equilibrium conditioned on `A_h`.
    AtLeast(u32),
    /// Equilibrium of the chain pinned every `m` sites.
    Pinned(usize),
    Fixed(Contour),
}

impl StartLaw {
    pub fn draw<R: Rng + ?Sized>(&self, params: &ModelParams, rng: &mut R) -> Result<Contour> {
        let conditioning = match self {
            StartLaw::Fixed(c) => {
                c.validate(params)?;
                return Ok(c.clone());
            }
            StartLaw::Equilibrium => Conditioning::None,
            StartLaw::AtLeast(h) => Conditioning::AtLeast(*h),
            StartLaw::Pinned(m) => Conditioning::Pinned(*m),
        };
        Ok(conditioning.tables(params)?.sample(rng))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradientLog {
    /// Number of times `t = 0..=T` at which the contour lies in `B`.
    pub visits: u64,
    pub first_visit: Option<u64>,
    pub applied: u64,
    pub censored: u64,
    /// Per-epoch visit counts.
    pub epoch_visits: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensoredRun {
    pub start: Contour,
    pub final_contour: Contour,
    pub log: GradientLog,
}

/// Number of edges, boundary edges included, with `|Δ| >= d`.
fn steep_edges(heights: &[u32], params: &ModelParams, d: u32) -> usize {
    crate::model::edge_heights(heights, params)
        .filter(|(l, r)| l.abs_diff(*r) >= d)
        .count()
}

fn edge_steep(heights: &[u32], params: &ModelParams, edge: usize, d: u32) -> bool {
    let n = heights.len();
    let left = if edge == 0 {
        params.boundary_left()
    } else {
        heights[edge - 1]
    };
    let right = if edge == n {
        params.boundary_right()
    } else {
        heights[edge]
    };
    left.abs_diff(right) >= d
}

/// Draws a start from `start`, then replays `schedule` with uniformly
/// random single-site updates, discarding those its epoch censors.
pub fn censored_run(
    schedule: &CensorSchedule,
    start: &StartLaw,
    seed: u64,
    params: &ModelParams,
) -> Result<CensoredRun> {
    let mut rng = stream(seed, 0);
    let first = start.draw(params, &mut rng)?;
    let ctx = StepContext::new(params);
    let d = schedule.threshold;
    let mut heights = first.heights().to_vec();
    let mut steep = steep_edges(&heights, params, d);
    let mut log = GradientLog {
        visits: u64::from(steep > 0),
        first_visit: (steep > 0).then_some(0),
        applied: 0,
        censored: 0,
        epoch_visits: vec![0; schedule.epochs()],
    };
    let mut t = 0u64;
    for (e, pattern) in schedule.patterns.iter().enumerate() {
        for _ in 0..schedule.epoch_length {
            t += 1;
            let draw = UpdateDraw::random(&mut rng, params.n());
            if pattern.admits(draw.index) {
                let i = draw.index;
                let before = usize::from(edge_steep(&heights, params, i, d))
                    + usize::from(edge_steep(&heights, params, i + 1, d));
                ctx.ss_update(&mut heights, &draw);
                let after = usize::from(edge_steep(&heights, params, i, d))
                    + usize::from(edge_steep(&heights, params, i + 1, d));
                steep = steep + after - before;
                log.applied += 1;
            } else {
                log.censored += 1;
            }
            if steep > 0 {
                log.visits += 1;
                log.epoch_visits[e] += 1;
                log.first_visit.get_or_insert(t);
            }
        }
    }
    Ok(CensoredRun {
        start: first,
        final_contour: Contour::new(heights),
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, beta: f64) -> ModelParams {
        ModelParams::new(n, beta).unwrap()
    }

    #[test]
    fn frozen_schedule_returns_start() {
        let p = params(6, 0.8);
        let s = CensorSchedule::new(vec![EpochPattern::Frozen; 3], 100, 3).unwrap();
        let r = censored_run(&s, &StartLaw::Equilibrium, 4, &p).unwrap();
        assert_eq!(r.start, r.final_contour);
        assert_eq!(r.log.applied, 0);
        assert_eq!(r.log.censored, 300);
    }

    #[test]
    fn odd_epochs_leave_even_sites_alone() {
        let p = params(7, 0.6);
        let start = Contour::new(vec![1, 2, 3, 4, 3, 2, 1]);
        let s = CensorSchedule::new(vec![EpochPattern::OddOnly], 5_000, 3).unwrap();
        let r = censored_run(&s, &StartLaw::Fixed(start.clone()), 9, &p).unwrap();
        for i in (1..7).step_by(2) {
            assert_eq!(r.final_contour.heights()[i], start.heights()[i]);
        }
        assert!(r.log.applied > 0 && r.log.censored > 0);
    }

    #[test]
    fn incremental_steep_count_matches_recount() {
        let p = params(5, 0.2);
        let s = CensorSchedule::alternating(6, 500, Parity::Even, 2).unwrap();
        let r = censored_run(&s, &StartLaw::Equilibrium, 12, &p).unwrap();
        // replay by brute force
        let mut rng = stream(12, 0);
        let first = StartLaw::Equilibrium.draw(&p, &mut rng).unwrap();
        assert_eq!(first, r.start);
        let ctx = StepContext::new(&p);
        let mut h = first.into_heights();
        let mut visits = u64::from(steep_edges(&h, &p, 2) > 0);
        for pat in &s.patterns {
            for _ in 0..s.epoch_length {
                let draw = UpdateDraw::random(&mut rng, 5);
                if pat.admits(draw.index) {
                    ctx.ss_update(&mut h, &draw);
                }
                visits += u64::from(steep_edges(&h, &p, 2) > 0);
            }
        }
        assert_eq!(visits, r.log.visits);
        assert_eq!(h, r.final_contour.heights());
    }

    #[test]
    fn threshold_default() {
        assert_eq!(default_threshold(1), 1);
        assert_eq!(default_threshold(16), 12);
    }

    #[test]
    fn epoch_constants_multiply_out() {
        let c = epoch_constants(64, -3.2).unwrap();
        assert_eq!(c.d, 4.0);
        assert!((c.epochs * c.epoch_length / c.total_steps - 1.0).abs() < 1e-12);
    }
}
