//! Single-site, column and parallel Glauber dynamics.
//!
//! A single-site update is driven by `(index, direction, u)`: `direction`
//! is a fair coin and the proposed `±1` move is accepted iff `u < 2 p±`,
//! with `p± = 1/4` or `e^{-2 beta}/4` depending on where the height sits
//! relative to its neighbour range. A column update resamples the height by
//! inverse CDF with `u` playing the role of `r`. Because the same draw can be
//! fed to any number of copies, these are also the grand couplings.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Result, SosError};
use crate::law::{ConditionalLaw, Geometric};
use crate::model::{Contour, ModelParams};
use crate::rng::{stream, SimRng};
use crate::wilson::WilsonWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

/// Randomness of one update at one position.
///
/// Single-site updates read `direction` and `u`; column updates read only
/// `u`, as the inverse-CDF variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateDraw {
    pub index: usize,
    pub direction: Direction,
    pub u: f64,
}

impl UpdateDraw {
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        let index = rng.gen_range(0..n);
        let direction = if rng.gen::<bool>() {
            Direction::Up
        } else {
            Direction::Down
        };
        Self {
            index,
            direction,
            u: rng.gen::<f64>(),
        }
    }
}

/// Parity of a lattice position (1-based), so `Odd` covers indices 0, 2, 4, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of_index(index: usize) -> Self {
        if index.is_multiple_of(2) {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn other(self) -> Self {
        match self {
            Parity::Odd => Parity::Even,
            Parity::Even => Parity::Odd,
        }
    }

    fn first_index(self) -> usize {
        match self {
            Parity::Odd => 0,
            Parity::Even => 1,
        }
    }
}

/// Order of the two sweeps in one step of the parallel chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrder {
    OddEven,
    EvenOdd,
}

impl SweepOrder {
    pub fn sweeps(self) -> [Parity; 2] {
        match self {
            SweepOrder::OddEven => [Parity::Odd, Parity::Even],
            SweepOrder::EvenOdd => [Parity::Even, Parity::Odd],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainKind {
    SingleSite,
    Column,
    /// One step is a pair of parity sweeps in the given order.
    Parallel(SweepOrder),
    /// `base` with every `spacing`-th position held at zero.
    Pinned {
        spacing: usize,
        base: Box<ChainKind>,
    },
}

impl ChainKind {
    pub fn pinned(spacing: usize, base: ChainKind) -> Self {
        ChainKind::Pinned {
            spacing,
            base: Box::new(base),
        }
    }

    /// The unpinned chain and the parameters it runs with.
    pub fn resolve(&self, params: &ModelParams) -> Result<(ChainKind, ModelParams)> {
        match self {
            ChainKind::Pinned { spacing, base } => {
                if matches!(**base, ChainKind::Pinned { .. }) {
                    return Err(SosError::Argument("nested pinned chain kinds".into()));
                }
                Ok((
                    (**base).clone(),
                    params.clone().with_pinned_spacing(*spacing)?,
                ))
            }
            other => Ok((other.clone(), params.clone())),
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ChainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainKind::SingleSite => write!(f, "single-site"),
            ChainKind::Column => write!(f, "column"),
            ChainKind::Parallel(SweepOrder::OddEven) => write!(f, "parallel-oe"),
            ChainKind::Parallel(SweepOrder::EvenOdd) => write!(f, "parallel-eo"),
            ChainKind::Pinned { spacing, base } => write!(f, "pinned{spacing}-{base}"),
        }
    }
}

impl FromStr for ChainKind {
    type Err = SosError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-site" | "ss" | "single_site" => Ok(ChainKind::SingleSite),
            "column" | "col" => Ok(ChainKind::Column),
            "parallel" | "parallel-oe" | "oe" => Ok(ChainKind::Parallel(SweepOrder::OddEven)),
            "parallel-eo" | "eo" => Ok(ChainKind::Parallel(SweepOrder::EvenOdd)),
            other => {
                // pinned<m>-<base>
                if let Some(rest) = other.strip_prefix("pinned") {
                    if let Some((m, base)) = rest.split_once('-') {
                        let spacing = m.parse::<usize>().map_err(|_| {
                            SosError::Argument(format!("bad pin spacing in `{other}`"))
                        })?;
                        return Ok(ChainKind::pinned(spacing, base.parse()?));
                    }
                }
                Err(SosError::Argument(format!("unknown chain kind `{other}`")))
            }
        }
    }
}

/// Precomputed per-model constants for the in-place update kernels.
#[derive(Debug, Clone)]
pub struct StepContext {
    n: usize,
    cap: Option<u32>,
    max_height: u32,
    geo: Geometric,
    /// `2 p` for the damped move, i.e. `e^{-2 beta} / 2`.
    damped_threshold: f64,
    pinned: Vec<bool>,
    boundary_left: u32,
    boundary_right: u32,
}

impl StepContext {
    pub fn new(params: &ModelParams) -> Self {
        let geo = Geometric::new(params.beta());
        Self {
            n: params.n(),
            cap: params.cap(),
            max_height: params.cap().unwrap_or(u32::MAX - 1),
            geo,
            damped_threshold: 0.5 * geo.x(),
            pinned: (0..params.n()).map(|i| params.is_pinned(i)).collect(),
            boundary_left: params.boundary_left(),
            boundary_right: params.boundary_right(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_pinned(&self, index: usize) -> bool {
        self.pinned[index]
    }

    #[inline]
    pub fn neighbor_range(&self, heights: &[u32], index: usize) -> (u32, u32) {
        let left = if index == 0 {
            self.boundary_left
        } else {
            heights[index - 1]
        };
        let right = if index + 1 == self.n {
            self.boundary_right
        } else {
            heights[index + 1]
        };
        if left <= right {
            (left, right)
        } else {
            (right, left)
        }
    }

    #[inline]
    pub(crate) fn law(&self, a: u32, b: u32) -> ConditionalLaw {
        ConditionalLaw::with_geometric(a, b, self.cap, self.geo)
    }

    /// Acceptance threshold for a single-site move at `index`: the move in
    /// `direction` is made iff `u` is below it (and it is not clamped).
    #[inline]
    pub fn ss_threshold(&self, heights: &[u32], index: usize, direction: Direction) -> f64 {
        let (a, b) = self.neighbor_range(heights, index);
        let h = heights[index];
        let damped = match direction {
            Direction::Down => h <= a,
            Direction::Up => h >= b,
        };
        if damped {
            self.damped_threshold
        } else {
            0.5
        }
    }

    /// Single-site update in place. Returns the new height at `draw.index`.
    #[inline]
    pub fn ss_update(&self, heights: &mut [u32], draw: &UpdateDraw) -> u32 {
        let i = draw.index;
        let h = heights[i];
        if self.pinned[i] {
            return h;
        }
        let accept = draw.u < self.ss_threshold(heights, i, draw.direction);
        let new = match draw.direction {
            Direction::Down if accept && h > 0 => h - 1,
            Direction::Up if accept && h < self.max_height => h + 1,
            _ => h,
        };
        heights[i] = new;
        new
    }

    /// Column update in place: inverse-CDF resample with `u` as `r`.
    #[inline]
    pub fn col_update(&self, heights: &mut [u32], index: usize, u: f64) -> u32 {
        if self.pinned[index] {
            return heights[index];
        }
        let (a, b) = self.neighbor_range(heights, index);
        let new = self.law(a, b).sample(u);
        heights[index] = new;
        new
    }

    /// Column updates at every position of `parity`, position `i` using `rs[i]`.
    pub fn sweep_update(&self, heights: &mut [u32], parity: Parity, rs: &[f64]) {
        // positions of one parity are never adjacent, so in-place order is irrelevant
        let mut i = parity.first_index();
        while i < self.n {
            self.col_update(heights, i, rs[i]);
            i += 2;
        }
    }
}

fn checked_draw(contour: &Contour, draw: &UpdateDraw, params: &ModelParams) -> Result<()> {
    contour.validate(params)?;
    if draw.index >= params.n() {
        return Err(SosError::Argument(format!(
            "update index {} outside [0, {})",
            draw.index,
            params.n()
        )));
    }
    if !(0.0..1.0).contains(&draw.u) {
        return Err(SosError::Argument(format!("u = {} outside [0, 1)", draw.u)));
    }
    Ok(())
}

/// One single-site heat-bath step. Pinned positions are self-loops.
pub fn ss_step(contour: &Contour, draw: &UpdateDraw, params: &ModelParams) -> Result<Contour> {
    checked_draw(contour, draw, params)?;
    let mut next = contour.clone();
    StepContext::new(params).ss_update(next.heights_mut(), draw);
    Ok(next)
}

/// One column step: the height at `draw.index` is resampled from its conditional law.
pub fn col_step(contour: &Contour, draw: &UpdateDraw, params: &ModelParams) -> Result<Contour> {
    checked_draw(contour, draw, params)?;
    let mut next = contour.clone();
    StepContext::new(params).col_update(next.heights_mut(), draw.index, draw.u);
    Ok(next)
}

/// Independent column updates at all positions of one parity.
pub fn par_sweep<R: Rng + ?Sized>(
    contour: &Contour,
    parity: Parity,
    rng: &mut R,
    params: &ModelParams,
) -> Result<Contour> {
    contour.validate(params)?;
    let rs: Vec<f64> = (0..params.n()).map(|_| rng.gen::<f64>()).collect();
    let mut next = contour.clone();
    StepContext::new(params).sweep_update(next.heights_mut(), parity, &rs);
    Ok(next)
}

/// A chain ready to run: kind, parameters and update kernels.
#[derive(Debug, Clone)]
pub struct Chain {
    kind: ChainKind,
    params: ModelParams,
    ctx: StepContext,
    buffer: Vec<f64>,
}

impl Chain {
    pub fn new(kind: &ChainKind, params: &ModelParams) -> Result<Self> {
        let (kind, params) = kind.resolve(params)?;
        let ctx = StepContext::new(&params);
        let buffer = vec![0.0; params.n()];
        Ok(Self {
            kind,
            params,
            ctx,
            buffer,
        })
    }

    pub fn kind(&self) -> &ChainKind {
        &self.kind
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn context(&self) -> &StepContext {
        &self.ctx
    }

    /// One step of the chain, in place.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&mut self, heights: &mut [u32], rng: &mut R) {
        match self.kind {
            ChainKind::SingleSite => {
                let draw = UpdateDraw::random(rng, self.ctx.n);
                self.ctx.ss_update(heights, &draw);
            }
            ChainKind::Column => {
                let draw = UpdateDraw::random(rng, self.ctx.n);
                self.ctx.col_update(heights, draw.index, draw.u);
            }
            ChainKind::Parallel(order) => {
                for parity in order.sweeps() {
                    for r in self.buffer.iter_mut() {
                        *r = rng.gen();
                    }
                    self.ctx.sweep_update(heights, parity, &self.buffer);
                }
            }
            ChainKind::Pinned { .. } => unreachable!("pinned kinds are resolved on construction"),
        }
    }
}

/// Observable recorded along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Statistic {
    MeanHeight,
    MaxHeight,
    MaxGradient,
    /// Wilson-weighted distance `sum_i w(i) |eta(i) - ref(i)|`.
    Distance(Contour),
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::MeanHeight => "mean-height",
            Statistic::MaxHeight => "max-height",
            Statistic::MaxGradient => "max-gradient",
            Statistic::Distance(_) => "distance",
        }
    }

    /// Parses a statistic name; `distance` is measured from `reference`.
    pub fn parse(name: &str, reference: &Contour) -> Result<Self> {
        match name {
            "mean-height" | "mean" => Ok(Statistic::MeanHeight),
            "max-height" | "max" => Ok(Statistic::MaxHeight),
            "max-gradient" | "gradient" => Ok(Statistic::MaxGradient),
            "distance" => Ok(Statistic::Distance(reference.clone())),
            other => Err(SosError::UnknownStatistic(other.to_string())),
        }
    }

    pub fn evaluate(&self, heights: &[u32], params: &ModelParams, weights: &WilsonWeights) -> f64 {
        match self {
            Statistic::MeanHeight => {
                heights.iter().map(|&h| f64::from(h)).sum::<f64>() / heights.len() as f64
            }
            Statistic::MaxHeight => f64::from(heights.iter().copied().max().unwrap_or(0)),
            Statistic::MaxGradient => f64::from(
                crate::model::edge_heights(heights, params)
                    .map(|(l, r)| l.abs_diff(r))
                    .max()
                    .unwrap_or(0),
            ),
            Statistic::Distance(reference) => heights
                .iter()
                .zip(reference.heights())
                .zip(weights.w())
                .map(|((&h, &r), &w)| w * f64::from(h.abs_diff(r)))
                .sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordOptions {
    pub statistics: Vec<Statistic>,
    /// Record every `stride` steps; `None` means every `n^2` steps.
    pub stride: Option<u64>,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self {
            statistics: vec![Statistic::MeanHeight],
            stride: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatSample {
    pub step: u64,
    pub statistic: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub kind: ChainKind,
    pub steps: u64,
    pub final_contour: Contour,
    pub series: Vec<StatSample>,
}

impl TrajectorySummary {
    pub fn values(&self, statistic: &str) -> Vec<(u64, f64)> {
        self.series
            .iter()
            .filter(|s| s.statistic == statistic)
            .map(|s| (s.step, s.value))
            .collect()
    }

    /// CSV body (`step,statistic,value`) with header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,statistic,value\n");
        for s in &self.series {
            out.push_str(&format!("{},{},{}\n", s.step, s.statistic, s.value));
        }
        out
    }
}

/// Runs `steps` steps of `kind` from `start` on stream `(seed, 0)`.
pub fn run_chain(
    kind: &ChainKind,
    start: &Contour,
    steps: u64,
    seed: u64,
    params: &ModelParams,
    record: &RecordOptions,
) -> Result<TrajectorySummary> {
    let mut rng = stream(seed, 0);
    run_chain_with(kind, start, steps, &mut rng, params, record)
}

/// [`run_chain`] on a caller-supplied stream.
pub fn run_chain_with(
    kind: &ChainKind,
    start: &Contour,
    steps: u64,
    rng: &mut SimRng,
    params: &ModelParams,
    record: &RecordOptions,
) -> Result<TrajectorySummary> {
    let mut chain = Chain::new(kind, params)?;
    start.validate(chain.params())?;
    let n = params.n() as u64;
    let stride = match record.stride {
        Some(0) => return Err(SosError::Argument("record stride must be positive".into())),
        Some(s) => s,
        None => n.checked_mul(n).ok_or(SosError::Overflow)?,
    };
    let weights = WilsonWeights::new(params.n());
    let mut heights = start.heights().to_vec();
    let mut series = Vec::new();
    let push = |step: u64, heights: &[u32], series: &mut Vec<StatSample>| {
        for stat in &record.statistics {
            series.push(StatSample {
                step,
                statistic: stat.name(),
                value: stat.evaluate(heights, params, &weights),
            });
        }
    };
    push(0, &heights, &mut series);
    let mut t = 0u64;
    while t < steps {
        chain.step(&mut heights, rng);
        t = t.checked_add(1).ok_or(SosError::Overflow)?;
        if t.is_multiple_of(stride) || t == steps {
            push(t, &heights, &mut series);
        }
    }
    Ok(TrajectorySummary {
        kind: kind.clone(),
        steps,
        final_contour: Contour::new(heights),
        series,
    })
}
