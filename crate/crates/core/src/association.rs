//! User to AP association under per-AP capacity.
//!
//! Maximizes the summed DL rate over assignments where AP `j` serves at most
//! `V_j` users and every served user gets at least `R_min`. Solved exactly as
//! a rectangular assignment problem (users against AP slots) with the
//! Hungarian method. Users that cannot be placed are flagged, not dropped.

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Association {
    /// Serving AP per user; `None` for infeasible users.
    pub serving: Vec<Option<usize>>,
    /// AP with the highest DL rate per user, whether or not it serves them.
    pub best_ap: Vec<usize>,
}

impl Association {
    pub fn is_feasible(&self, user: usize) -> bool {
        self.serving[user].is_some()
    }

    pub fn infeasible_users(&self) -> Vec<usize> {
        (0..self.serving.len()).filter(|&u| self.serving[u].is_none()).collect()
    }

    /// Serving AP, or the best-rate AP for infeasible users.
    pub fn reporting_ap(&self, user: usize) -> usize {
        self.serving[user].unwrap_or(self.best_ap[user])
    }

    pub fn load(&self, n_aps: usize) -> Vec<usize> {
        let mut load = vec![0; n_aps];
        for j in self.serving.iter().flatten() {
            load[*j] += 1;
        }
        load
    }

    pub fn total_rate<T: Real>(&self, rates: &[Vec<T>]) -> T {
        self.serving
            .iter()
            .enumerate()
            .filter_map(|(u, j)| j.map(|j| rates[u][j]))
            .fold(T::zero(), |a, b| a + b)
    }
}

/// Associates users with the scenario's capacity `v_cap` and `r_min`.
pub fn associate_users<T: Real>(scenario: &Scenario<T>, dl_rates: &[Vec<T>]) -> Result<Association> {
    let caps = vec![scenario.params.v_cap; scenario.n_aps()];
    associate_with_caps(dl_rates, &caps, scenario.params.r_min)
}

/// `dl_rates[user][ap]` in bits/s.
pub fn associate_with_caps<T: Real>(dl_rates: &[Vec<T>], caps: &[usize], r_min: T) -> Result<Association> {
    let n_users = dl_rates.len();
    let n_aps = caps.len();
    for row in dl_rates {
        if row.len() != n_aps {
            return Err(Error::dims("association rate table", n_aps, row.len()));
        }
        if row.iter().any(|r| !to_f64(*r).is_finite()) {
            return Err(Error::NonFinite("association rate"));
        }
    }
    let best_ap = dl_rates
        .iter()
        .map(|row| {
            let mut best = 0;
            for (j, r) in row.iter().enumerate() {
                if *r > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();

    let slots: Vec<usize> = caps
        .iter()
        .enumerate()
        .flat_map(|(j, &c)| std::iter::repeat_n(j, c))
        .collect();
    let scale = dl_rates
        .iter()
        .flatten()
        .map(|r| to_f64(*r))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let valid = |u: usize, j: usize| dl_rates[u][j] >= r_min && n_aps > 0;
    // One dummy "unassigned" column per user keeps the problem rectangular.
    let cols = slots.len() + n_users;
    let cost: Vec<Vec<f64>> = (0..n_users)
        .map(|u| {
            (0..cols)
                .map(|c| match slots.get(c) {
                    Some(&j) if valid(u, j) => -to_f64(dl_rates[u][j]) / scale,
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    let matched = min_cost_assignment(&cost);
    let serving = matched
        .into_iter()
        .enumerate()
        .map(|(u, c)| slots.get(c).copied().filter(|&j| valid(u, j)))
        .collect();
    Ok(Association { serving, best_ap })
}

/// Row-to-column assignment minimizing total cost, `rows <= cols`.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    // Potentials and matching with 1-based sentinel column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}
