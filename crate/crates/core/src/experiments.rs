//! Desk-scale scaling experiments: coalescence sweeps, band-hitting
//! relaxation times, the top-down descent, the pinned doubling schedule and
//! the single-column walk.
//!
//! Replica `k` of a sweep point at size `n` runs on stream
//! `(seed, (n << 32) | k)`, so adding sizes or replicas never reuses a stream.

use rand::Rng;
use rayon::prelude::*;

use crate::censored::StartLaw;
use crate::coupling::{coalescence_time_with, default_budget, CoalescenceResult, CoupledRun};
use crate::dynamics::{Chain, ChainKind, Direction, StepContext, UpdateDraw};
use crate::equilibrium::{max_height_moments, mean_height_moments, Restriction};
use crate::error::{Result, SosError};
use crate::law::ConditionalLaw;
use crate::model::{Contour, ModelParams};
use crate::rng::{stream, SimRng};

pub const DEFAULT_BETAS: [f64; 3] = [0.5, 1.0, 2.0];
/// Fewest replicas per point for a reported fit.
pub const MIN_FIT_REPLICAS: usize = 16;

pub fn replica_stream(seed: u64, n: usize, replica: usize) -> SimRng {
    stream(seed, ((n as u64) << 32) | replica as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
    /// Residual standard error of the log-log regression.
    pub residual_se: f64,
    pub points: usize,
}

/// Least squares of `ln y` on `ln x`.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(SosError::Argument(
            "a fit needs at least two paired points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(SosError::Argument(
            "log-log fits need positive finite values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SosError::Argument("a fit needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let residual_se = if lx.len() > 2 {
        (rss / (k - 2.0)).sqrt()
    } else {
        0.0
    };
    Ok(PowerFit {
        slope,
        intercept,
        slope_se: residual_se / sxx.sqrt(),
        residual_se,
        points: lx.len(),
    })
}

/// [`fit_log_log`] that drops the smallest `x` when it lies more than three
/// prediction standard errors from the fit to the other points (at least
/// three of which must remain). Returns the fit and whether it dropped.
pub fn fit_excluding_transient(xs: &[f64], ys: &[f64]) -> Result<(PowerFit, bool)> {
    let fit = fit_log_log(xs, ys)?;
    if xs.len() < 4 {
        return Ok((fit, false));
    }
    let first = xs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let keep = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .filter(|(i, _)| *i != first)
            .map(|(_, &x)| x)
            .collect()
    };
    let (rx, ry) = (keep(xs), keep(ys));
    let rest = fit_log_log(&rx, &ry)?;
    let lx: Vec<f64> = rx.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let x0 = xs[first].ln();
    let pred_se = rest.residual_se * (1.0 + 1.0 / k + (x0 - mx).powi(2) / sxx).sqrt();
    let resid = ys[first].ln() - rest.intercept - rest.slope * x0;
    if resid.abs() > 3.0 * pred_se {
        return Ok((rest, true));
    }
    Ok((fit, false))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Interquartile range, linear interpolation between order statistics.
pub fn iqr(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| -> f64 {
        if v.is_empty() {
            return f64::NAN;
        }
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    };
    q(0.75) - q(0.25)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub n: usize,
    pub median: f64,
    pub iqr: f64,
    pub replicas: usize,
    pub timed_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    pub points: Vec<ScalingPoint>,
    /// Present only with at least three points of [`MIN_FIT_REPLICAS`] replicas.
    pub fit: Option<PowerFit>,
    pub excluded_smallest: bool,
    /// Some point had at least half of its replicas time out, so its median is a lower bound.
    pub partial: bool,
}

impl ScalingResult {
    pub fn from_samples(samples: &[(usize, Vec<f64>, usize)]) -> Result<Self> {
        let points: Vec<ScalingPoint> = samples
            .iter()
            .map(|(n, values, timed_out)| ScalingPoint {
                n: *n,
                median: median(values),
                iqr: iqr(values),
                replicas: values.len(),
                timed_out: *timed_out,
            })
            .collect();
        let partial = points.iter().any(|p| 2 * p.timed_out >= p.replicas);
        let usable = points.len() >= 3
            && points
                .iter()
                .all(|p| p.replicas >= MIN_FIT_REPLICAS && p.median > 0.0);
        let (fit, excluded_smallest) = if usable {
            let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.median).collect();
            let (f, e) = fit_excluding_transient(&xs, &ys)?;
            (Some(f), e)
        } else {
            (None, false)
        };
        Ok(Self {
            points,
            fit,
            excluded_smallest,
            partial,
        })
    }

    /// CSV rows `n,median,iqr,replicas,timed_out,slope,slope_se`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,median,iqr,replicas,timed_out,slope,slope_se\n");
        let (slope, se) = self.fit.map_or((String::new(), String::new()), |f| {
            (format!("{:.6}", f.slope), format!("{:.6}", f.slope_se))
        });
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{slope},{se}\n",
                p.n, p.median, p.iqr, p.replicas, p.timed_out
            ));
        }
        out
    }
}

/// Model parameters as a function of `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsTemplate {
    pub beta: f64,
    /// Height cap; `None` means the cap equals `n`.
    pub cap: Option<u32>,
}

impl ParamsTemplate {
    pub fn new(beta: f64) -> Self {
        Self { beta, cap: None }
    }

    pub fn at(&self, n: usize) -> Result<ModelParams> {
        let p = ModelParams::new(n, self.beta)?;
        match self.cap {
            Some(c) => p.with_cap(c),
            None => Ok(p),
        }
    }
}

fn check_sizes(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return Err(SosError::Argument(
            "n list must be nonempty, positive and ascending".into(),
        ));
    }
    Ok(())
}

/// Coalescence times of `replicas` coupled runs at one size.
pub fn coalescence_replicas(
    kind: &ChainKind,
    params: &ModelParams,
    replicas: usize,
    seed: u64,
    t_max: Option<u64>,
) -> Result<Vec<CoalescenceResult>> {
    let n = params.n();
    (0..replicas)
        .into_par_iter()
        .map(|k| coalescence_time_with(kind, params, &mut replica_stream(seed, n, k), t_max))
        .collect()
}

/// Coalescence medians over `n_list` and their log-log fit.
pub fn scaling_sweep(
    kind: &ChainKind,
    n_list: &[usize],
    replicas: usize,
    seed: u64,
    template: &ParamsTemplate,
    t_max: Option<u64>,
) -> Result<ScalingResult> {
    check_sizes(n_list)?;
    let mut samples = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let results = coalescence_replicas(kind, &template.at(n)?, replicas, seed, t_max)?;
        let timed_out = results.iter().filter(|r| r.timed_out).count();
        let values = results.iter().map(|r| r.steps as f64).collect();
        samples.push((n, values, timed_out));
    }
    ScalingResult::from_samples(&samples)
}

/// Where a relaxation run starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RelaxStart {
    Top,
    Bottom,
    /// Exact draw from equilibrium conditioned on `A_h`.
    AtLeast(u32),
    /// Exact draw from the equilibrium pinned every `m` sites.
    PinnedEquilibrium(usize),
    Fixed(Contour),
}

impl RelaxStart {
    pub fn draw<R: Rng + ?Sized>(&self, params: &ModelParams, rng: &mut R) -> Result<Contour> {
        match self {
            RelaxStart::Top => Contour::top(params),
            RelaxStart::Bottom => Ok(Contour::bottom(params)),
            RelaxStart::AtLeast(h) => StartLaw::AtLeast(*h).draw(params, rng),
            RelaxStart::PinnedEquilibrium(m) => StartLaw::Pinned(*m).draw(params, rng),
            RelaxStart::Fixed(c) => StartLaw::Fixed(c.clone()).draw(params, rng),
        }
    }
}

/// Statistics usable for band hitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandStatistic {
    MeanHeight,
    MaxHeight,
}

impl BandStatistic {
    pub fn name(self) -> &'static str {
        match self {
            BandStatistic::MeanHeight => "mean-height",
            BandStatistic::MaxHeight => "max-height",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mean-height" | "mean" => Ok(BandStatistic::MeanHeight),
            "max-height" | "max" => Ok(BandStatistic::MaxHeight),
            other => Err(SosError::UnknownStatistic(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Exact equilibrium mean ± 2 standard deviations of `statistic`.
pub fn equilibrium_band(statistic: BandStatistic, params: &ModelParams) -> Result<Band> {
    let (mean, var) = match statistic {
        BandStatistic::MeanHeight => mean_height_moments(params, &Restriction::none())?,
        BandStatistic::MaxHeight => max_height_moments(params)?,
    };
    let sd = var.sqrt();
    Ok(Band {
        lo: mean - 2.0 * sd,
        hi: mean + 2.0 * sd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationResult {
    /// First time the statistic entered the band and stayed for the dwell window,
    /// or the budget when `timed_out`.
    pub hitting_time: u64,
    pub timed_out: bool,
    pub band: Band,
    pub start_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct RelaxOptions {
    /// Defaults to `n^2`.
    pub dwell: Option<u64>,
    /// Defaults to the coalescence budget of the kind.
    pub budget: Option<u64>,
    /// Defaults to the exact equilibrium band of the chain's target law.
    pub band: Option<Band>,
}


/// Running value of a band statistic with O(1) mean updates.
struct Tracker {
    statistic: BandStatistic,
    sum: u64,
    n: f64,
}

impl Tracker {
    fn new(statistic: BandStatistic, heights: &[u32]) -> Self {
        Self {
            statistic,
            sum: heights.iter().map(|&h| u64::from(h)).sum(),
            n: heights.len() as f64,
        }
    }

    fn value(&self, heights: &[u32]) -> f64 {
        match self.statistic {
            BandStatistic::MeanHeight => self.sum as f64 / self.n,
            BandStatistic::MaxHeight => f64::from(heights.iter().copied().max().unwrap_or(0)),
        }
    }
}

/// Runs `kind` from `start` until `statistic` enters `band` and stays
/// there for the dwell window.
pub fn relaxation_experiment(
    start: &RelaxStart,
    kind: &ChainKind,
    statistic: BandStatistic,
    params: &ModelParams,
    seed: u64,
    options: &RelaxOptions,
) -> Result<RelaxationResult> {
    relaxation_with(
        start,
        kind,
        statistic,
        params,
        &mut stream(seed, 0),
        options,
    )
}

pub fn relaxation_with(
    start: &RelaxStart,
    kind: &ChainKind,
    statistic: BandStatistic,
    params: &ModelParams,
    rng: &mut SimRng,
    options: &RelaxOptions,
) -> Result<RelaxationResult> {
    relax(start, kind, statistic, params, rng, options).map(|(r, _)| r)
}

/// The relaxation run and the contour it stopped at.
fn relax(
    start: &RelaxStart,
    kind: &ChainKind,
    statistic: BandStatistic,
    params: &ModelParams,
    rng: &mut SimRng,
    options: &RelaxOptions,
) -> Result<(RelaxationResult, Contour)> {
    let mut chain = Chain::new(kind, params)?;
    let target = chain.params().clone();
    let band = match options.band {
        Some(b) => b,
        None => equilibrium_band(statistic, &target)?,
    };
    let n = params.n() as u64;
    let dwell = options.dwell.unwrap_or(n * n);
    let budget = options
        .budget
        .unwrap_or_else(|| default_budget(kind, params.n()));
    let first = start.draw(params, rng)?;
    first.validate(&target)?;
    let mut heights = first.into_heights();
    let mut tracker = Tracker::new(statistic, &heights);
    let start_value = tracker.value(&heights);
    // the max statistic costs O(n), so it is read every n steps
    let stride = match statistic {
        BandStatistic::MeanHeight => 1,
        BandStatistic::MaxHeight => n.max(1),
    };
    let mut entered: Option<u64> = band.contains(start_value).then_some(0);
    let single = matches!(chain.kind(), ChainKind::SingleSite | ChainKind::Column);
    let mut t = 0u64;
    loop {
        if let Some(e) = entered {
            if t - e >= dwell {
                let r = RelaxationResult {
                    hitting_time: e,
                    timed_out: false,
                    band,
                    start_value,
                };
                return Ok((r, Contour::new(heights)));
            }
        }
        if t >= budget {
            let r = RelaxationResult {
                hitting_time: budget,
                timed_out: true,
                band,
                start_value,
            };
            return Ok((r, Contour::new(heights)));
        }
        if single {
            let draw = UpdateDraw::random(rng, params.n());
            let old = heights[draw.index];
            match chain.kind() {
                ChainKind::SingleSite => chain.context().ss_update(&mut heights, &draw),
                _ => chain.context().col_update(&mut heights, draw.index, draw.u),
            };
            tracker.sum = tracker.sum + u64::from(heights[draw.index]) - u64::from(old);
        } else {
            chain.step(&mut heights, rng);
            tracker.sum = heights.iter().map(|&h| u64::from(h)).sum();
        }
        t += 1;
        if t.is_multiple_of(stride) {
            let inside = band.contains(tracker.value(&heights));
            entered = match (entered, inside) {
                (None, true) => Some(t),
                (Some(_), false) => None,
                (e, _) => e,
            };
        }
    }
}

/// Relaxation hitting times over `n_list` and their fit. `start_for(n)`
/// gives the start at each size.
pub fn relaxation_sweep<F>(
    start_for: F,
    kind: &ChainKind,
    statistic: BandStatistic,
    n_list: &[usize],
    replicas: usize,
    seed: u64,
    template: &ParamsTemplate,
) -> Result<ScalingResult>
where
    F: Fn(usize) -> RelaxStart + Sync,
{
    check_sizes(n_list)?;
    let mut samples = Vec::new();
    for &n in n_list {
        let params = template.at(n)?;
        let (_, target) = kind.resolve(&params)?;
        let band = equilibrium_band(statistic, &target)?;
        let options = RelaxOptions {
            band: Some(band),
            ..RelaxOptions::default()
        };
        let start = start_for(n);
        let results: Vec<RelaxationResult> = (0..replicas)
            .into_par_iter()
            .map(|k| {
                relaxation_with(
                    &start,
                    kind,
                    statistic,
                    &params,
                    &mut replica_stream(seed, n, k),
                    &options,
                )
            })
            .collect::<Result<_>>()?;
        let timed_out = results.iter().filter(|r| r.timed_out).count();
        // a hit at time 0 cannot enter a log-log fit
        let values = results
            .iter()
            .map(|r| (r.hitting_time as f64).max(1.0))
            .collect();
        samples.push((n, values, timed_out));
    }
    ScalingResult::from_samples(&samples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentProfile {
    /// `(t, max height, mean height)` every `stride` steps.
    pub series: Vec<(u64, u32, f64)>,
    /// `(level, first time the max height is at or below it)` for levels `n - k ⌈√n⌉`.
    pub stage_times: Vec<(u32, Option<u64>)>,
    /// Mean-height band hit from the top.
    pub band_time: RelaxationResult,
}

/// Top-down run recording the max and mean height and per-level crossing times.
pub fn descent_profile(
    params: &ModelParams,
    kind: &ChainKind,
    seed: u64,
    budget: Option<u64>,
) -> Result<DescentProfile> {
    let cap = params
        .cap()
        .ok_or_else(|| SosError::Argument("the descent starts from the top contour".into()))?;
    let n = params.n();
    let step_level = (n as f64).sqrt().ceil() as u32;
    let mut levels = Vec::new();
    let mut level = cap;
    while level >= step_level {
        level -= step_level;
        levels.push(level);
    }
    let budget = budget.unwrap_or_else(|| default_budget(kind, n));
    let band = equilibrium_band(BandStatistic::MeanHeight, params)?;
    let band_time = relaxation_experiment(
        &RelaxStart::Top,
        kind,
        BandStatistic::MeanHeight,
        params,
        seed,
        &RelaxOptions {
            band: Some(band),
            budget: Some(budget),
            dwell: None,
        },
    )?;
    // the profile replays the same stream, so its times match band_time
    let mut rng = stream(seed, 0);
    let mut chain = Chain::new(kind, params)?;
    let mut heights = Contour::top(params)?.into_heights();
    let stride = (n * n) as u64;
    let horizon = if band_time.timed_out {
        budget
    } else {
        band_time.hitting_time.saturating_add(stride)
    };
    let mut series = Vec::new();
    let mut stage_times: Vec<(u32, Option<u64>)> = levels.iter().map(|&l| (l, None)).collect();
    let record = |t: u64, h: &[u32], series: &mut Vec<(u64, u32, f64)>| {
        let max = h.iter().copied().max().unwrap_or(0);
        let mean = h.iter().map(|&v| f64::from(v)).sum::<f64>() / h.len() as f64;
        series.push((t, max, mean));
    };
    record(0, &heights, &mut series);
    let mut t = 0u64;
    while t < horizon {
        chain.step(&mut heights, &mut rng);
        t += 1;
        if t.is_multiple_of(n as u64) {
            let max = heights.iter().copied().max().unwrap_or(0);
            for (l, hit) in stage_times.iter_mut() {
                if hit.is_none() && max <= *l {
                    *hit = Some(t);
                }
            }
        }
        if t.is_multiple_of(stride) {
            record(t, &heights, &mut series);
        }
    }
    Ok(DescentProfile {
        series,
        stage_times,
        band_time,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublingStage {
    /// Pin spacing of the stage; `None` for the final unpinned stage.
    pub spacing: Option<usize>,
    pub result: RelaxationResult,
}

/// From the bottom contour, run the chain pinned every 2, 4, 8, ... sites,
/// each stage until the mean height settles in that stage's equilibrium
/// band, then the unpinned chain. Each stage starts where the last ended.
pub fn doubling_schedule(
    params: &ModelParams,
    base: &ChainKind,
    seed: u64,
    stage_budget: Option<u64>,
) -> Result<Vec<DoublingStage>> {
    if matches!(base, ChainKind::Pinned { .. }) {
        return Err(SosError::Argument(
            "the doubling schedule pins the base kind itself".into(),
        ));
    }
    let n = params.n();
    let mut spacings = Vec::new();
    let mut m = 2;
    while m <= n {
        spacings.push(Some(m));
        m *= 2;
    }
    spacings.push(None);
    let mut rng = stream(seed, 0);
    let mut current = Contour::bottom(params);
    let mut stages = Vec::new();
    for spacing in spacings {
        let kind = match spacing {
            Some(m) => ChainKind::pinned(m, base.clone()),
            None => base.clone(),
        };
        let (_, target) = kind.resolve(params)?;
        let options = RelaxOptions {
            band: Some(equilibrium_band(BandStatistic::MeanHeight, &target)?),
            budget: Some(stage_budget.unwrap_or_else(|| default_budget(base, n))),
            dwell: None,
        };
        let (result, end) = relax(
            &RelaxStart::Fixed(current.clone()),
            &kind,
            BandStatistic::MeanHeight,
            params,
            &mut rng,
            &options,
        )?;
        current = end;
        stages.push(DoublingStage { spacing, result });
    }
    Ok(stages)
}

/// Bottom, equilibrium and top copies under shared draws; returns the mean
/// heights `(t, bottom, equilibrium, top)` every `stride` steps. Fails if
/// the order between copies is ever broken.
pub fn sandwich_check(
    kind: &ChainKind,
    params: &ModelParams,
    seed: u64,
    steps: u64,
    stride: u64,
) -> Result<Vec<(u64, f64, f64, f64)>> {
    if stride == 0 {
        return Err(SosError::Argument("stride must be positive".into()));
    }
    let mut rng = stream(seed, 0);
    let (_, target) = kind.resolve(params)?;
    let middle = StartLaw::Equilibrium.draw(&target, &mut rng)?;
    let top = crate::coupling::CoupledPair::extremes(&target)?;
    let copies = vec![top.lower().clone(), middle, top.upper().clone()];
    let mut run = CoupledRun::new(kind, params, copies)?;
    let mean = |h: &[u32]| h.iter().map(|&v| f64::from(v)).sum::<f64>() / h.len() as f64;
    let mut out = vec![(0, mean(run.copy(0)), mean(run.copy(1)), mean(run.copy(2)))];
    for t in 1..=steps {
        run.step(&mut rng)?;
        if t % stride == 0 {
            out.push((t, mean(run.copy(0)), mean(run.copy(1)), mean(run.copy(2))));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnWalkResult {
    /// Updates until the empirical law is within 1/4 of the exact law, or
    /// the budget when `timed_out`.
    pub steps: u64,
    pub timed_out: bool,
    pub final_tv: f64,
}

/// Single-site updates at one column with frozen neighbours `a <= b`,
/// starting `ell` above `b`. `replicas` independent walks estimate the law
/// at each time; the estimate is compared with the exact conditional law.
pub fn column_walk_check(
    a: u32,
    b: u32,
    ell: u32,
    beta: f64,
    replicas: usize,
    seed: u64,
    budget: u64,
) -> Result<ColumnWalkResult> {
    if a > b {
        return Err(SosError::Argument("need a <= b".into()));
    }
    if replicas == 0 {
        return Err(SosError::Argument("need at least one replica".into()));
    }
    let params = ModelParams::new(1, beta)?
        .unbounded()
        .with_boundaries(a, b)?;
    let ctx = StepContext::new(&params);
    let law = ConditionalLaw::new(a, b, &params)?;
    let start = b + ell;
    // heights beyond `top` carry less than 1e-15 of the exact law
    let x = params.decay();
    let tail = (1e-15f64.ln() / x.ln()).ceil() as u32;
    let top = start.max(b + tail) + 1;
    let exact: Vec<f64> = (0..=top).map(|h| law.prob(h)).collect();
    let mut rng = stream(seed, 0);
    let mut walkers = vec![start; replicas];
    let mut counts = vec![0usize; top as usize + 2];
    let tv = |counts: &[usize]| -> f64 {
        let r = replicas as f64;
        let mut d = 0.0;
        let mut seen = 0.0;
        for (h, &p) in exact.iter().enumerate() {
            let e = counts[h] as f64 / r;
            d += (e - p).abs();
            seen += e;
        }
        // walkers above `top` and exact mass above it
        d += (1.0 - seen).max(0.0) + (1.0 - exact.iter().sum::<f64>()).max(0.0);
        0.5 * d
    };
    let mut t = 0u64;
    loop {
        counts.iter_mut().for_each(|c| *c = 0);
        for &h in &walkers {
            if let Some(c) = counts.get_mut(h as usize) {
                *c += 1;
            }
        }
        let d = tv(&counts);
        if d < 0.25 {
            return Ok(ColumnWalkResult {
                steps: t,
                timed_out: false,
                final_tv: d,
            });
        }
        if t >= budget {
            return Ok(ColumnWalkResult {
                steps: budget,
                timed_out: true,
                final_tv: d,
            });
        }
        for h in walkers.iter_mut() {
            let direction = if rng.gen::<bool>() {
                Direction::Up
            } else {
                Direction::Down
            };
            let draw = UpdateDraw {
                index: 0,
                direction,
                u: rng.gen(),
            };
            let mut cell = [*h];
            ctx.ss_update(&mut cell, &draw);
            *h = cell[0];
        }
        t += 1;
    }
}
