//! Model parameters, contours and the Gibbs weight.
//!
//! Positions are addressed by zero-based index throughout the crate: index
//! `i` is lattice position `i + 1`, and the two boundary heights sit at
//! positions `0` and `n + 1`.

use std::fmt;

use crate::error::{Result, SosError};

/// Allowed height set of every interior position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeightMode {
    /// Heights in `[0, cap]`.
    Bounded { cap: u32 },
    /// Heights in the natural numbers.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    n: usize,
    beta: f64,
    height_mode: HeightMode,
    boundary_left: u32,
    boundary_right: u32,
    pinned: Vec<bool>,
}

impl ModelParams {
    /// The `n x n` model: cap `n`, zero boundaries, nothing pinned.
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(SosError::Validation("n must be at least 1".into()));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(SosError::Validation(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        let cap = u32::try_from(n)
            .map_err(|_| SosError::Validation(format!("n = {n} does not fit a height")))?;
        Ok(Self {
            n,
            beta,
            height_mode: HeightMode::Bounded { cap },
            boundary_left: 0,
            boundary_right: 0,
            pinned: vec![false; n],
        })
    }

    pub fn with_cap(mut self, cap: u32) -> Result<Self> {
        self.height_mode = HeightMode::Bounded { cap };
        self.validate()?;
        Ok(self)
    }

    pub fn unbounded(mut self) -> Self {
        self.height_mode = HeightMode::Unbounded;
        self
    }

    pub fn with_height_mode(mut self, mode: HeightMode) -> Result<Self> {
        self.height_mode = mode;
        self.validate()?;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(SosError::Validation(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn with_boundaries(mut self, left: u32, right: u32) -> Result<Self> {
        self.boundary_left = left;
        self.boundary_right = right;
        self.validate()?;
        Ok(self)
    }

    /// Pins the given zero-based indices to height 0.
    pub fn with_pinned<I: IntoIterator<Item = usize>>(mut self, indices: I) -> Result<Self> {
        let mut pinned = vec![false; self.n];
        for i in indices {
            if i >= self.n {
                return Err(SosError::Validation(format!(
                    "pinned index {i} outside [0, {})",
                    self.n
                )));
            }
            pinned[i] = true;
        }
        self.pinned = pinned;
        Ok(self)
    }

    /// Pins every position `j * spacing`, `j = 1..=n / spacing`.
    pub fn with_pinned_spacing(self, spacing: usize) -> Result<Self> {
        if spacing == 0 {
            return Err(SosError::Validation("pin spacing must be positive".into()));
        }
        let n = self.n;
        self.with_pinned((1..=n / spacing).map(|j| j * spacing - 1))
    }

    fn validate(&self) -> Result<()> {
        if let HeightMode::Bounded { cap } = self.height_mode {
            if self.boundary_left > cap || self.boundary_right > cap {
                return Err(SosError::Validation(format!(
                    "boundary heights ({}, {}) exceed cap {cap}",
                    self.boundary_left, self.boundary_right
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn height_mode(&self) -> HeightMode {
        self.height_mode
    }

    /// The height cap, or `None` in unbounded mode.
    pub fn cap(&self) -> Option<u32> {
        match self.height_mode {
            HeightMode::Bounded { cap } => Some(cap),
            HeightMode::Unbounded => None,
        }
    }

    pub fn boundary_left(&self) -> u32 {
        self.boundary_left
    }

    pub fn boundary_right(&self) -> u32 {
        self.boundary_right
    }

    pub fn is_pinned(&self, index: usize) -> bool {
        self.pinned[index]
    }

    pub fn pinned_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.pinned
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| p.then_some(i))
    }

    pub fn has_pins(&self) -> bool {
        self.pinned.iter().any(|&p| p)
    }

    /// `e^{-2 beta}`, the per-unit decay of the conditional law outside `[a, b]`.
    pub fn decay(&self) -> f64 {
        (-2.0 * self.beta).exp()
    }

    /// Min and max of the two neighbour heights of `index`.
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

    /// Short `key=value` description used in CSV comment rows.
    pub fn describe(&self) -> String {
        let mode = match self.height_mode {
            HeightMode::Bounded { cap } => format!("bounded cap={cap}"),
            HeightMode::Unbounded => "unbounded".to_string(),
        };
        let pins: Vec<String> = self.pinned_indices().map(|i| (i + 1).to_string()).collect();
        format!(
            "n={} beta={} heights={} boundary=({},{}) pinned=[{}]",
            self.n,
            self.beta,
            mode,
            self.boundary_left,
            self.boundary_right,
            pins.join(";")
        )
    }
}

/// One SOS configuration: the `n` interior heights.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Contour {
    heights: Vec<u32>,
}

impl Contour {
    pub fn new(heights: Vec<u32>) -> Self {
        Self { heights }
    }

    /// Checked constructor.
    pub fn from_heights(heights: Vec<u32>, params: &ModelParams) -> Result<Self> {
        let c = Self { heights };
        c.validate(params)?;
        Ok(c)
    }

    /// The minimal contour: all heights zero.
    pub fn bottom(params: &ModelParams) -> Self {
        Self {
            heights: vec![0; params.n()],
        }
    }

    /// The maximal contour: every unpinned height at the cap.
    pub fn top(params: &ModelParams) -> Result<Self> {
        let cap = params.cap().ok_or_else(|| {
            SosError::Argument("the maximal contour needs a bounded height set".into())
        })?;
        Ok(Self::filled(params, cap))
    }

    /// Every unpinned height set to `h`.
    pub fn filled(params: &ModelParams, h: u32) -> Self {
        let heights = (0..params.n())
            .map(|i| if params.is_pinned(i) { 0 } else { h })
            .collect();
        Self { heights }
    }

    pub fn heights(&self) -> &[u32] {
        &self.heights
    }

    pub fn heights_mut(&mut self) -> &mut [u32] {
        &mut self.heights
    }

    pub fn into_heights(self) -> Vec<u32> {
        self.heights
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.heights.len() != params.n() {
            return Err(SosError::Validation(format!(
                "contour has {} heights, model has n = {}",
                self.heights.len(),
                params.n()
            )));
        }
        if let Some(cap) = params.cap() {
            if let Some((i, &h)) = self.heights.iter().enumerate().find(|(_, &h)| h > cap) {
                return Err(SosError::Validation(format!(
                    "height {h} at position {} exceeds cap {cap}",
                    i + 1
                )));
            }
        }
        if let Some(i) = params.pinned_indices().find(|&i| self.heights[i] != 0) {
            return Err(SosError::Validation(format!(
                "pinned position {} has height {}",
                i + 1,
                self.heights[i]
            )));
        }
        Ok(())
    }

    pub fn sum(&self) -> u64 {
        self.heights.iter().map(|&h| u64::from(h)).sum()
    }

    pub fn mean_height(&self) -> f64 {
        self.sum() as f64 / self.heights.len() as f64
    }

    pub fn max_height(&self) -> u32 {
        self.heights.iter().copied().max().unwrap_or(0)
    }

    /// Largest `|eta(i+1) - eta(i)|` over all `n + 1` edges, boundaries included.
    pub fn max_gradient(&self, params: &ModelParams) -> u32 {
        edge_heights(&self.heights, params)
            .map(|(l, r)| l.abs_diff(r))
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for Contour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.heights.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Consecutive height pairs `(eta(i-1), eta(i))` for `i = 1..=n+1`.
pub(crate) fn edge_heights<'a>(
    heights: &'a [u32],
    params: &ModelParams,
) -> impl Iterator<Item = (u32, u32)> + 'a {
    let bl = params.boundary_left();
    let br = params.boundary_right();
    let n = heights.len();
    (0..=n).map(move |i| {
        let left = if i == 0 { bl } else { heights[i - 1] };
        let right = if i == n { br } else { heights[i] };
        (left, right)
    })
}

/// `sum_{i=1}^{n+1} |eta(i-1) - eta(i)|` with the boundary heights substituted.
pub fn energy(contour: &Contour, params: &ModelParams) -> Result<u64> {
    contour.validate(params)?;
    Ok(edge_heights(contour.heights(), params)
        .map(|(l, r)| u64::from(l.abs_diff(r)))
        .sum())
}

/// Unnormalised log Gibbs weight `-beta * energy`.
pub fn log_gibbs_weight(contour: &Contour, params: &ModelParams) -> Result<f64> {
    Ok(-params.beta() * energy(contour, params)? as f64)
}

/// The pointwise partial order `eta <= xi`.
pub fn leq(lower: &Contour, upper: &Contour) -> Result<bool> {
    if lower.len() != upper.len() {
        return Err(SosError::Validation(format!(
            "cannot compare contours of lengths {} and {}",
            lower.len(),
            upper.len()
        )));
    }
    Ok(lower
        .heights()
        .iter()
        .zip(upper.heights())
        .all(|(l, u)| l <= u))
}
