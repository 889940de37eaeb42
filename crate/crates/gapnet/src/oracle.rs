//! Exact and baseline GAP solvers used as ground-truth benchmarks.
//!
//! For the unit-weight, integer-capacity instances produced by the wireless
//! mapping, the constraint matrix is a transportation polytope, so the exact
//! integral optimum is obtained by replicating each knapsack into one column
//! per capacity unit and solving the resulting linear sum assignment problem.

use crate::error::{Error, Result};
use crate::gap::{check_feasibility, objective, Assignment, GapInstance};
use ndarray::Array2;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    HungarianExpansion,
    BruteForce,
    Greedy,
}

/// A solver's hard assignment together with its objective value and
/// wall-clock solve time in seconds.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub assignment: Assignment,
    pub objective: f64,
    pub solve_time: f64,
    pub method: SolveMethod,
}

/// Minimum-cost perfect matching on a square cost matrix via shortest
/// augmenting paths with potentials, O(n³). Returns `perm` with row i
/// matched to column `perm[i]`.
pub fn hungarian(cost: &Array2<f64>) -> Result<Vec<usize>> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(Error::DimensionMismatch(format!("cost matrix must be square, got {n}×{m}")));
    }
    if n == 0 {
        return Err(Error::EmptyInput("cost matrix"));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("cost entry".into()));
    }

    // 1-indexed potentials/matching; p[j] is the row matched to column j,
    // with row 0 and column 0 as virtual staging slots.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
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
            for j in 0..=n {
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

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    Ok(perm)
}

/// Exact optimum for unit-weight instances with positive integer capacities:
/// each knapsack becomes min(c_j, I) identical columns, surplus columns are
/// absorbed by zero-profit padding rows, and a min-cost matching on the
/// negated profits yields the maximum-profit assignment.
pub fn solve_unit_weight_exact(inst: &GapInstance) -> Result<OracleSolution> {
    let start = Instant::now();
    if !inst.has_unit_weights() {
        return Err(Error::InvalidValue("expansion solver requires all weights = 1".into()));
    }
    let n_items = inst.n_items();
    let mut total_capacity = 0.0f64;
    for (j, c) in inst.capacities().iter().enumerate() {
        if c.fract() != 0.0 {
            return Err(Error::InvalidValue(format!(
                "expansion solver requires integer capacities, knapsack {j} has {c}"
            )));
        }
        total_capacity += c;
    }
    if total_capacity < n_items as f64 {
        return Err(Error::Infeasible(format!(
            "total capacity {total_capacity} cannot hold {n_items} items"
        )));
    }

    // A knapsack never takes more than I items, so cap its replicas at I.
    let mut column_knapsack = Vec::new();
    for (j, c) in inst.capacities().iter().enumerate() {
        let replicas = (*c as usize).min(n_items);
        column_knapsack.extend(std::iter::repeat_n(j, replicas));
    }
    let side = column_knapsack.len(); // ≥ n_items since total capacity ≥ I

    let mut cost = Array2::zeros((side, side));
    for i in 0..n_items {
        for (col, &j) in column_knapsack.iter().enumerate() {
            cost[[i, col]] = -inst.profits()[[i, j]];
        }
    }
    let perm = hungarian(&cost)?;

    let choices: Vec<usize> = (0..n_items).map(|i| column_knapsack[perm[i]]).collect();
    let assignment = Assignment::from_indices(&choices, inst.n_knapsacks())?;
    let objective = objective(inst, &assignment)?;
    Ok(OracleSolution {
        assignment,
        objective,
        solve_time: start.elapsed().as_secs_f64(),
        method: SolveMethod::HungarianExpansion,
    })
}

/// Exhaustive depth-first search over all J^I assignments with capacity and
/// profit-bound pruning. Guarded by `limit` on the raw search-space size.
/// Ties resolve to the first maximum in depth-first order (items ascending,
/// knapsacks ascending), which makes the result deterministic.
pub fn solve_brute_force(inst: &GapInstance, limit: u64) -> Result<OracleSolution> {
    let start = Instant::now();
    let n_items = inst.n_items();
    let n_knapsacks = inst.n_knapsacks();
    if (n_knapsacks as u64)
        .checked_pow(n_items as u32)
        .filter(|s| *s <= limit)
        .is_none()
    {
        return Err(Error::TooLarge(format!(
            "{n_knapsacks}^{n_items} assignments exceed the limit of {limit}"
        )));
    }

    // Best profit achievable from item i onward, for bound pruning.
    let mut suffix_best = vec![0.0f64; n_items + 1];
    for i in (0..n_items).rev() {
        let row_max = inst
            .profits()
            .row(i)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        suffix_best[i] = suffix_best[i + 1] + row_max;
    }

    struct Dfs<'a> {
        inst: &'a GapInstance,
        suffix_best: &'a [f64],
        choices: Vec<usize>,
        remaining: Vec<f64>,
        best_profit: f64,
        best_choices: Option<Vec<usize>>,
    }

    impl Dfs<'_> {
        fn run(&mut self, item: usize, profit: f64) {
            if item == self.inst.n_items() {
                if profit > self.best_profit || self.best_choices.is_none() {
                    self.best_profit = profit;
                    self.best_choices = Some(self.choices.clone());
                }
                return;
            }
            if self.best_choices.is_some() && profit + self.suffix_best[item] <= self.best_profit {
                return;
            }
            for j in 0..self.inst.n_knapsacks() {
                let w = self.inst.weights()[[item, j]];
                if w <= self.remaining[j] {
                    self.remaining[j] -= w;
                    self.choices.push(j);
                    self.run(item + 1, profit + self.inst.profits()[[item, j]]);
                    self.choices.pop();
                    self.remaining[j] += w;
                }
            }
        }
    }

    let mut dfs = Dfs {
        inst,
        suffix_best: &suffix_best,
        choices: Vec::with_capacity(n_items),
        remaining: inst.capacities().to_vec(),
        best_profit: f64::NEG_INFINITY,
        best_choices: None,
    };
    dfs.run(0, 0.0);

    let choices = dfs
        .best_choices
        .ok_or_else(|| Error::Infeasible("no assignment satisfies the capacities".into()))?;
    let assignment = Assignment::from_indices(&choices, n_knapsacks)?;
    let objective = objective(inst, &assignment)?;
    Ok(OracleSolution {
        assignment,
        objective,
        solve_time: start.elapsed().as_secs_f64(),
        method: SolveMethod::BruteForce,
    })
}

/// Regret-ordered greedy heuristic for unit-weight instances: items are
/// processed in descending (best − second-best) profit regret and take their
/// most profitable knapsack with residual capacity. Ties break by item
/// index, then knapsack index.
pub fn greedy_baseline(inst: &GapInstance) -> Result<OracleSolution> {
    let start = Instant::now();
    if !inst.has_unit_weights() {
        return Err(Error::InvalidValue("greedy baseline requires all weights = 1".into()));
    }
    let n_items = inst.n_items();
    let n_knapsacks = inst.n_knapsacks();

    let mut order: Vec<usize> = (0..n_items).collect();
    let regret = |i: usize| -> f64 {
        let row = inst.profits().row(i);
        let mut best = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for &p in row.iter() {
            if p > best {
                second = best;
                best = p;
            } else if p > second {
                second = p;
            }
        }
        if second.is_finite() { best - second } else { best }
    };
    order.sort_by(|&a, &b| regret(b).partial_cmp(&regret(a)).unwrap().then(a.cmp(&b)));

    let mut remaining = inst.capacities().to_vec();
    let mut choices = vec![0usize; n_items];
    for &i in &order {
        let mut best: Option<usize> = None;
        for (j, r) in remaining.iter().enumerate() {
            if *r >= 1.0 && best.is_none_or(|b| inst.profits()[[i, j]] > inst.profits()[[i, b]]) {
                best = Some(j);
            }
        }
        let j = best.ok_or_else(|| {
            Error::Infeasible(format!("greedy ran out of capacity at item {i}"))
        })?;
        remaining[j] -= 1.0;
        choices[i] = j;
    }

    let assignment = Assignment::from_indices(&choices, n_knapsacks)?;
    let objective = objective(inst, &assignment)?;
    Ok(OracleSolution {
        assignment,
        objective,
        solve_time: start.elapsed().as_secs_f64(),
        method: SolveMethod::Greedy,
    })
}

/// Shared invariant of every solver: the returned assignment is exactly
/// feasible (C1–C3 at eps = 0) and the stored objective matches it.
pub fn validate_solution(inst: &GapInstance, sol: &OracleSolution) -> Result<()> {
    let report = check_feasibility(inst, &sol.assignment, 0.0)?;
    if !report.is_feasible() {
        return Err(Error::InvalidValue(format!("{:?} returned an infeasible assignment", sol.method)));
    }
    let z = objective(inst, &sol.assignment)?;
    if z != sol.objective {
        return Err(Error::InvalidValue(format!(
            "{:?} objective {z} does not match stored {}",
            sol.method, sol.objective
        )));
    }
    Ok(())
}
