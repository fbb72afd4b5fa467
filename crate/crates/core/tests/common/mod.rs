//! Independent oracles shared by the integration tests. Nothing here calls
//! into the closed forms or tables it is used to check.
#![allow(dead_code)]

use sos_core::{Contour, ModelParams};

/// Mass of height `j` under the conditional law, unnormalized.
pub fn column_weight(j: u32, a: u32, b: u32, beta: f64) -> f64 {
    (-beta * (f64::from(j.abs_diff(a)) + f64::from(j.abs_diff(b)))).exp()
}

/// Mean of the conditional law by direct summation over `0..=cap`.
pub fn column_mean(a: u32, b: u32, cap: u32, beta: f64) -> f64 {
    let (mut z, mut m) = (0.0, 0.0);
    for j in 0..=cap {
        let w = column_weight(j, a, b, beta);
        z += w;
        m += w * f64::from(j);
    }
    m / z
}

/// Every height vector in `[0, cap]^n`, lexicographic.
pub fn all_contours(n: usize, cap: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for prefix in &out {
            for h in 0..=cap {
                let mut v = prefix.clone();
                v.push(h);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

pub fn brute_energy(h: &[u32], left: u32, right: u32) -> u32 {
    let mut ext = vec![left];
    ext.extend_from_slice(h);
    ext.push(right);
    ext.windows(2).map(|w| w[0].abs_diff(w[1])).sum()
}

pub fn brute_gradient(h: &[u32], left: u32, right: u32) -> u32 {
    let mut ext = vec![left];
    ext.extend_from_slice(h);
    ext.push(right);
    ext.windows(2)
        .map(|w| w[0].abs_diff(w[1]))
        .max()
        .unwrap_or(0)
}

/// `(contours, Gibbs weights)` for `params`, pins respected.
pub fn brute_law(params: &ModelParams) -> (Vec<Vec<u32>>, Vec<f64>) {
    let cap = params.cap().expect("bounded");
    let states: Vec<Vec<u32>> = all_contours(params.n(), cap)
        .into_iter()
        .filter(|h| params.pinned_indices().all(|i| h[i] == 0))
        .collect();
    let weights = states
        .iter()
        .map(|h| {
            let e = brute_energy(h, params.boundary_left(), params.boundary_right());
            (-params.beta() * f64::from(e)).exp()
        })
        .collect();
    (states, weights)
}

/// Pearson statistic after pooling cells with expected count below 5.
/// Returns `(statistic, degrees of freedom)`.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> (f64, usize) {
    let total: u64 = counts.iter().sum();
    let t = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * t;
        if e < 5.0 {
            pooled_obs += c as f64;
            pooled_exp += e;
        } else {
            cells.push((c as f64, e));
        }
    }
    if pooled_exp > 0.0 {
        if pooled_exp >= 5.0 || cells.is_empty() {
            cells.push((pooled_obs, pooled_exp));
        } else {
            // fold a small pooled cell into the smallest regular cell
            let k = (0..cells.len())
                .min_by(|&i, &j| cells[i].1.total_cmp(&cells[j].1))
                .unwrap();
            cells[k].0 += pooled_obs;
            cells[k].1 += pooled_exp;
        }
    }
    let stat = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    (stat, cells.len().saturating_sub(1))
}

/// `chi2 <= df + 4 sqrt(2 df)`, the 4-sigma normal approximation.
pub fn chi_square_passes(stat: f64, df: usize) -> bool {
    let d = df as f64;
    stat <= d + 4.0 * (2.0 * d).sqrt()
}

pub fn contour(h: &[u32]) -> Contour {
    Contour::new(h.to_vec())
}
