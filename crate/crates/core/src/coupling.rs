//! Grand coupling of two copies under shared randomness, coalescence from
//! the extreme contours, and the exact one-step drift of the Wilson distance.

use rand::Rng;

use crate::dynamics::{ChainKind, Parity, StepContext, UpdateDraw};
use crate::error::{Result, SosError};
use crate::model::{leq, Contour, ModelParams};
use crate::rng::{stream, SimRng};
use crate::wilson::WilsonWeights;

/// Two contours with `lower ⪯ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    lower: Contour,
    upper: Contour,
}

impl CoupledPair {
    pub fn new(lower: Contour, upper: Contour, params: &ModelParams) -> Result<Self> {
        lower.validate(params)?;
        upper.validate(params)?;
        if !leq(&lower, &upper)? {
            return Err(SosError::Argument(
                "coupled pair must satisfy lower ⪯ upper".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    /// `(⊥, ⊤)` for `params`, pinned sites at zero in both.
    pub fn extremes(params: &ModelParams) -> Result<Self> {
        let lower = Contour::bottom(params);
        let cap = params
            .cap()
            .ok_or_else(|| SosError::Argument("the unbounded model has no top contour".into()))?;
        let upper = Contour::new(
            (0..params.n())
                .map(|i| if params.is_pinned(i) { 0 } else { cap })
                .collect(),
        );
        Self::new(lower, upper, params)
    }

    pub fn lower(&self) -> &Contour {
        &self.lower
    }

    pub fn upper(&self) -> &Contour {
        &self.upper
    }

    pub fn is_coalesced(&self) -> bool {
        self.lower == self.upper
    }
}

fn check_order(lower: &[u32], upper: &[u32], index: usize, step: u64) -> Result<()> {
    if lower[index] > upper[index] {
        return Err(SosError::OrderViolated {
            step,
            position: index + 1,
        });
    }
    Ok(())
}

/// Both copies take the single-site or column update `draw`.
pub fn grand_step(
    pair: &CoupledPair,
    draw: &UpdateDraw,
    kind: &ChainKind,
    params: &ModelParams,
) -> Result<CoupledPair> {
    let (base, params) = kind.resolve(params)?;
    pair.lower.validate(&params)?;
    pair.upper.validate(&params)?;
    if draw.index >= params.n() || !(0.0..1.0).contains(&draw.u) {
        return Err(SosError::Argument("update draw out of range".into()));
    }
    let ctx = StepContext::new(&params);
    let mut lower = pair.lower.heights().to_vec();
    let mut upper = pair.upper.heights().to_vec();
    match base {
        ChainKind::SingleSite => {
            ctx.ss_update(&mut lower, draw);
            ctx.ss_update(&mut upper, draw);
        }
        ChainKind::Column => {
            ctx.col_update(&mut lower, draw.index, draw.u);
            ctx.col_update(&mut upper, draw.index, draw.u);
        }
        _ => {
            return Err(SosError::Argument(
                "grand_step takes single-site or column kinds; use grand_sweep".into(),
            ))
        }
    }
    check_order(&lower, &upper, draw.index, 1)?;
    Ok(CoupledPair {
        lower: Contour::new(lower),
        upper: Contour::new(upper),
    })
}

/// Both copies take the same parity sweep with shared `rs`.
pub fn grand_sweep(
    pair: &CoupledPair,
    parity: Parity,
    rs: &[f64],
    params: &ModelParams,
) -> Result<CoupledPair> {
    if rs.len() != params.n() {
        return Err(SosError::Argument(
            "one uniform per position is required".into(),
        ));
    }
    let ctx = StepContext::new(params);
    let mut lower = pair.lower.heights().to_vec();
    let mut upper = pair.upper.heights().to_vec();
    ctx.sweep_update(&mut lower, parity, rs);
    ctx.sweep_update(&mut upper, parity, rs);
    for i in 0..params.n() {
        check_order(&lower, &upper, i, 1)?;
    }
    Ok(CoupledPair {
        lower: Contour::new(lower),
        upper: Contour::new(upper),
    })
}

/// In-place coupled evolution of any number of copies, tracking how many
/// positions of the first and last copies differ.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    base: ChainKind,
    ctx: StepContext,
    copies: Vec<Vec<u32>>,
    mismatches: usize,
    steps: u64,
    buffer: Vec<f64>,
}

impl CoupledRun {
    /// `copies` must be ordered, first lowest; pinned kinds are resolved here.
    pub fn new(kind: &ChainKind, params: &ModelParams, copies: Vec<Contour>) -> Result<Self> {
        let (base, params) = kind.resolve(params)?;
        if copies.len() < 2 {
            return Err(SosError::Argument(
                "a coupled run needs at least two copies".into(),
            ));
        }
        for w in copies.windows(2) {
            w[0].validate(&params)?;
            w[1].validate(&params)?;
            if !leq(&w[0], &w[1])? {
                return Err(SosError::Argument("coupled copies must be ordered".into()));
            }
        }
        let copies: Vec<Vec<u32>> = copies.into_iter().map(Contour::into_heights).collect();
        let last = copies.len() - 1;
        let mismatches = copies[0]
            .iter()
            .zip(&copies[last])
            .filter(|(a, b)| a != b)
            .count();
        let n = params.n();
        Ok(Self {
            base,
            ctx: StepContext::new(&params),
            copies,
            mismatches,
            steps: 0,
            buffer: vec![0.0; n],
        })
    }

    pub fn extremes(kind: &ChainKind, params: &ModelParams) -> Result<Self> {
        let (_, resolved) = kind.resolve(params)?;
        let pair = CoupledPair::extremes(&resolved)?;
        Self::new(kind, params, vec![pair.lower, pair.upper])
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_coalesced(&self) -> bool {
        self.mismatches == 0
    }

    pub fn copy(&self, k: usize) -> &[u32] {
        &self.copies[k]
    }

    fn refresh(&mut self, index: usize) -> Result<()> {
        let last = self.copies.len() - 1;
        for k in 0..last {
            check_order(&self.copies[k], &self.copies[k + 1], index, self.steps)?;
        }
        Ok(())
    }

    /// One coupled step; fails if the order between copies breaks.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.steps = self.steps.checked_add(1).ok_or(SosError::Overflow)?;
        let last = self.copies.len() - 1;
        match self.base {
            ChainKind::SingleSite | ChainKind::Column => {
                let draw = UpdateDraw::random(rng, self.ctx.n());
                let i = draw.index;
                let before = self.copies[0][i] != self.copies[last][i];
                for c in self.copies.iter_mut() {
                    if self.base == ChainKind::SingleSite {
                        self.ctx.ss_update(c, &draw);
                    } else {
                        self.ctx.col_update(c, i, draw.u);
                    }
                }
                self.refresh(i)?;
                let after = self.copies[0][i] != self.copies[last][i];
                self.mismatches = self.mismatches + usize::from(after) - usize::from(before);
            }
            ChainKind::Parallel(order) => {
                for parity in order.sweeps() {
                    for r in self.buffer.iter_mut() {
                        *r = rng.gen();
                    }
                    for c in self.copies.iter_mut() {
                        self.ctx.sweep_update(c, parity, &self.buffer);
                    }
                }
                for i in 0..self.ctx.n() {
                    self.refresh(i)?;
                }
                self.mismatches = self.copies[0]
                    .iter()
                    .zip(&self.copies[last])
                    .filter(|(a, b)| a != b)
                    .count();
            }
            ChainKind::Pinned { .. } => unreachable!("resolved on construction"),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoalescenceResult {
    /// Coalescence step, or the budget when `timed_out`.
    pub steps: u64,
    pub timed_out: bool,
}

/// `64 n^3 ln n` for column and parallel kinds, `64 n^3.5 ln n` for single-site.
pub fn default_budget(kind: &ChainKind, n: usize) -> u64 {
    let nf = n as f64;
    let log = nf.ln().max(1.0);
    let base = match kind {
        ChainKind::Pinned { base, .. } => base.as_ref(),
        other => other,
    };
    let t = match base {
        ChainKind::SingleSite => 64.0 * nf.powf(3.5) * log,
        _ => 64.0 * nf.powi(3) * log,
    };
    t.ceil().min(u64::MAX as f64) as u64
}

/// First time the coupled copies from `(⊥, ⊤)` agree, on stream `(seed, 0)`.
pub fn coalescence_time(
    kind: &ChainKind,
    params: &ModelParams,
    seed: u64,
    t_max: Option<u64>,
) -> Result<CoalescenceResult> {
    coalescence_time_with(kind, params, &mut stream(seed, 0), t_max)
}

pub fn coalescence_time_with(
    kind: &ChainKind,
    params: &ModelParams,
    rng: &mut SimRng,
    t_max: Option<u64>,
) -> Result<CoalescenceResult> {
    let budget = t_max.unwrap_or_else(|| default_budget(kind, params.n()));
    if budget == 0 {
        return Err(SosError::Argument("t_max must be at least 1".into()));
    }
    let mut run = CoupledRun::extremes(kind, params)?;
    while !run.is_coalesced() {
        if run.steps() >= budget {
            return Ok(CoalescenceResult {
                steps: budget,
                timed_out: true,
            });
        }
        run.step(rng)?;
    }
    Ok(CoalescenceResult {
        steps: run.steps(),
        timed_out: false,
    })
}

/// `E[D(t+1) - D(t) | pair]` for one column update, exactly.
pub fn exact_pair_drift(
    pair: &CoupledPair,
    params: &ModelParams,
    weights: &WilsonWeights,
) -> Result<f64> {
    let n = params.n();
    if weights.n() != n {
        return Err(SosError::Argument("weights do not match n".into()));
    }
    let ctx = StepContext::new(params);
    let lo = pair.lower.heights();
    let hi = pair.upper.heights();
    let mut drift = 0.0;
    for i in 0..n {
        if ctx.is_pinned(i) {
            continue;
        }
        let (a, b) = ctx.neighbor_range(hi, i);
        let (c, d) = ctx.neighbor_range(lo, i);
        let mean_hi = ctx.law(a, b).mean_direct();
        let mean_lo = ctx.law(c, d).mean_direct();
        let gap_now = f64::from(hi[i] - lo[i]);
        drift += weights.w()[i] * ((mean_hi - mean_lo) - gap_now);
    }
    Ok(drift / n as f64)
}

/// CSV rows `kind,n,beta,seed,steps,timed_out`.
pub fn coalescence_csv(rows: &[(ChainKind, usize, f64, u64, CoalescenceResult)]) -> String {
    let mut out = String::from("kind,n,beta,seed,steps,timed_out\n");
    for (kind, n, beta, seed, r) in rows {
        out.push_str(&format!(
            "{kind},{n},{beta},{seed},{},{}\n",
            r.steps, r.timed_out
        ));
    }
    out
}
