//! Unsupervised penalty losses over mini-batches of (instance, assignment)
//! pairs, and the exact loss gradient with respect to the assignment matrix.
//!
//! The full form penalizes both broken row-stochasticity and capacity
//! overruns; the simplified form drops the row term because a split-Softmax
//! head satisfies it by construction, leaving
//! L = mean[ −Z + λ · Σ_j P_j ].

use crate::error::{Error, Result};
use crate::gap::{knapsack_loads, objective, Assignment, GapInstance};
use ndarray::{Array2, Axis};
use std::str::FromStr;

/// Direction of the capacity penalty P_j.
///
/// `Corrected` (the default) penalizes load above capacity,
/// P_j = ReLU(load_j − c_j), which is the direction that incentivizes
/// feasibility. `AsPrinted` is the literal published form,
/// P_j = ReLU(c_j − load_j), retained for side-by-side comparison even
/// though it penalizes *under*-loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltySign {
    AsPrinted,
    #[default]
    Corrected,
}

impl FromStr for PenaltySign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "printed" | "as_printed" => Ok(PenaltySign::AsPrinted),
            "corrected" => Ok(PenaltySign::Corrected),
            other => Err(Error::InvalidValue(format!(
                "unknown penalty sign {other:?}, expected \"printed\" or \"corrected\""
            ))),
        }
    }
}

/// Penalty weights: `lambda1` scales the row-stochasticity term and
/// `lambda2` the capacity term of the full loss; `lambda` is the single
/// weight of the simplified loss. The two forms agree on row-stochastic
/// assignments exactly when `lambda == lambda2` (`lambda1` is then
/// irrelevant).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda: f64,
    pub penalty_sign: PenaltySign,
}

impl LossConfig {
    /// Simplified-form configuration with a single penalty weight, mirrored
    /// into `lambda2` so both loss forms agree.
    pub fn with_lambda(lambda: f64, penalty_sign: PenaltySign) -> Self {
        Self { lambda1: 0.0, lambda2: lambda, lambda, penalty_sign }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda", self.lambda),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidValue(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn capacity_penalty(inst: &GapInstance, a: &Assignment, sign: PenaltySign) -> Result<f64> {
    let loads = knapsack_loads(inst, a)?;
    let sum = loads
        .iter()
        .zip(inst.capacities().iter())
        .map(|(load, cap)| match sign {
            PenaltySign::Corrected => (load - cap).max(0.0),
            PenaltySign::AsPrinted => (cap - load).max(0.0),
        })
        .sum();
    Ok(sum)
}

/// Full penalty loss:
/// mean over the batch of −Z + λ₁·Σ_i ReLU(1 − Σ_j u_{i,j}) + λ₂·Σ_j P_j.
pub fn loss_full(batch: &[(&GapInstance, &Assignment)], cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(Error::EmptyInput("loss batch"));
    }
    let mut total = 0.0;
    for (inst, a) in batch {
        let z = objective(inst, a)?;
        let row_deficit: f64 = a
            .u()
            .sum_axis(Axis(1))
            .iter()
            .map(|s| (1.0 - s).max(0.0))
            .sum();
        let cap = capacity_penalty(inst, a, cfg.penalty_sign)?;
        total += -z + cfg.lambda1 * row_deficit + cfg.lambda2 * cap;
    }
    Ok(total / batch.len() as f64)
}

/// Simplified penalty loss: mean over the batch of −Z + λ·Σ_j P_j.
/// Intended for split-Softmax outputs, whose rows sum to 1 so the full
/// form's row term vanishes.
pub fn loss_simplified(batch: &[(&GapInstance, &Assignment)], cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(Error::EmptyInput("loss batch"));
    }
    let mut total = 0.0;
    for (inst, a) in batch {
        let z = objective(inst, a)?;
        let cap = capacity_penalty(inst, a, cfg.penalty_sign)?;
        total += -z + cfg.lambda * cap;
    }
    Ok(total / batch.len() as f64)
}

/// Exact gradient of [`loss_simplified`] with respect to every u_{i,j},
/// flattened row-major per example (row e, column i·J + j):
///
/// ∂L/∂u_{i,j} = (1/B)·[ −p_{i,j} + λ·w_{i,j}·𝟙(load_j > c_j) ]   (corrected)
/// ∂L/∂u_{i,j} = (1/B)·[ −p_{i,j} − λ·w_{i,j}·𝟙(load_j < c_j) ]   (as printed)
///
/// The indicator is 0 at load = capacity, matching the ReLU subgradient
/// convention used everywhere else in the crate.
pub fn loss_grad_wrt_u(
    batch: &[(&GapInstance, &Assignment)],
    cfg: &LossConfig,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(Error::EmptyInput("loss batch"));
    }
    let (n_items, n_knapsacks) = batch[0].0.profits().dim();
    let width = n_items * n_knapsacks;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = Array2::zeros((batch.len(), width));
    for (e, (inst, a)) in batch.iter().enumerate() {
        if inst.profits().dim() != (n_items, n_knapsacks) {
            return Err(Error::DimensionMismatch(format!(
                "batch mixes {:?} and {:?} instances",
                (n_items, n_knapsacks),
                inst.profits().dim()
            )));
        }
        let loads = knapsack_loads(inst, a)?;
        let mut row = grad.row_mut(e);
        for i in 0..n_items {
            for j in 0..n_knapsacks {
                let p = inst.profits()[[i, j]];
                let w = inst.weights()[[i, j]];
                let cap = inst.capacities()[j];
                let penalty = match cfg.penalty_sign {
                    PenaltySign::Corrected => {
                        if loads[j] > cap {
                            cfg.lambda * w
                        } else {
                            0.0
                        }
                    }
                    PenaltySign::AsPrinted => {
                        if loads[j] < cap {
                            -cfg.lambda * w
                        } else {
                            0.0
                        }
                    }
                };
                row[i * n_knapsacks + j] = scale * (-p + penalty);
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2, Array2};

    fn pairs<'a>(
        insts: &'a [GapInstance],
        assigns: &'a [Assignment],
    ) -> Vec<(&'a GapInstance, &'a Assignment)> {
        insts.iter().zip(assigns.iter()).collect()
    }

    #[test]
    fn full_loss_row_term_vanishes_for_row_stochastic_u() {
        let inst = GapInstance::with_unit_weights(
            arr2(&[[2.0, 1.0], [1.0, 2.0]]),
            arr1(&[1.0, 1.0]),
        )
        .unwrap();
        let a = Assignment::soft(arr2(&[[0.3, 0.7], [0.6, 0.4]])).unwrap();
        let low = LossConfig { lambda1: 0.0, ..LossConfig::with_lambda(2.0, PenaltySign::Corrected) };
        let high = LossConfig { lambda1: 1e6, ..low };
        let insts = [inst];
        let assigns = [a];
        let l0 = loss_full(&pairs(&insts, &assigns), &low).unwrap();
        let l1 = loss_full(&pairs(&insts, &assigns), &high).unwrap();
        assert!((l0 - l1).abs() < 1e-9);
    }

    #[test]
    fn full_loss_hand_evaluated_overload_case() {
        // Z = 2; corrected penalties ReLU(2−1) + ReLU(0−1) = 1; λ₂ = 6.
        let inst = GapInstance::with_unit_weights(Array2::ones((2, 2)), arr1(&[1.0, 1.0])).unwrap();
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [1.0, 0.0]])).unwrap();
        let cfg = LossConfig { lambda1: 0.0, lambda2: 6.0, lambda: 6.0, penalty_sign: PenaltySign::Corrected };
        let insts = [inst];
        let assigns = [a];
        assert_eq!(loss_full(&pairs(&insts, &assigns), &cfg).unwrap(), 4.0);
    }

    #[test]
    fn zero_weights_reduce_loss_to_negated_mean_objective() {
        let inst = GapInstance::with_unit_weights(
            arr2(&[[2.0, 1.0], [1.0, 3.0]]),
            arr1(&[1.0, 1.0]),
        )
        .unwrap();
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        let cfg = LossConfig { lambda1: 0.0, lambda2: 0.0, lambda: 0.0, penalty_sign: PenaltySign::Corrected };
        let insts = [inst];
        let assigns = [a];
        assert_eq!(loss_full(&pairs(&insts, &assigns), &cfg).unwrap(), -5.0);
        assert_eq!(loss_simplified(&pairs(&insts, &assigns), &cfg).unwrap(), -5.0);
    }

    #[test]
    fn simplified_equals_full_on_row_stochastic_input() {
        let inst = GapInstance::with_unit_weights(
            arr2(&[[2.0, 1.0], [1.0, 2.0]]),
            arr1(&[1.0, 1.0]),
        )
        .unwrap();
        let a = Assignment::soft(arr2(&[[0.9, 0.1], [0.8, 0.2]])).unwrap();
        let cfg = LossConfig { lambda1: 123.0, ..LossConfig::with_lambda(5.0, PenaltySign::Corrected) };
        let insts = [inst];
        let assigns = [a];
        let full = loss_full(&pairs(&insts, &assigns), &cfg).unwrap();
        let simplified = loss_simplified(&pairs(&insts, &assigns), &cfg).unwrap();
        assert!((full - simplified).abs() < 1e-12);
    }

    #[test]
    fn feasible_hard_assignment_costs_exactly_negative_objective() {
        let inst = GapInstance::with_unit_weights(
            arr2(&[[2.0, 1.0], [1.0, 3.0]]),
            arr1(&[1.0, 1.0]),
        )
        .unwrap();
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        let cfg = LossConfig::with_lambda(7.0, PenaltySign::Corrected);
        let insts = [inst];
        let assigns = [a];
        assert_eq!(loss_simplified(&pairs(&insts, &assigns), &cfg).unwrap(), -5.0);
    }

    #[test]
    fn capacity_term_grows_with_lambda_for_fixed_violating_input() {
        let inst = GapInstance::with_unit_weights(Array2::ones((2, 2)), arr1(&[1.0, 1.0])).unwrap();
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [1.0, 0.0]])).unwrap();
        let insts = [inst];
        let assigns = [a];
        let mut last = f64::NEG_INFINITY;
        for lambda in [0.0, 1.0, 4.0, 10.0] {
            let cfg = LossConfig::with_lambda(lambda, PenaltySign::Corrected);
            let l = loss_simplified(&pairs(&insts, &assigns), &cfg).unwrap();
            assert!(l >= last);
            last = l;
        }
    }

    #[test]
    fn gradient_is_scaled_negative_profit_when_penalty_inactive() {
        let inst = GapInstance::with_unit_weights(
            arr2(&[[2.0, 1.0], [1.0, 3.0]]),
            arr1(&[2.0, 2.0]),
        )
        .unwrap();
        // Loads (1, 1) sit strictly below capacity 2.
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        let insts = [inst.clone(), inst];
        let assigns = [a.clone(), a];
        for lambda in [0.0, 9.0] {
            let cfg = LossConfig::with_lambda(lambda, PenaltySign::Corrected);
            let g = loss_grad_wrt_u(&pairs(&insts, &assigns), &cfg).unwrap();
            let expected = [-1.0, -0.5, -0.5, -1.5];
            for e in 0..2 {
                for (k, want) in expected.iter().enumerate() {
                    assert_eq!(g[[e, k]], *want);
                }
            }
        }
    }

    #[test]
    fn gradient_adds_lambda_weight_on_overloaded_knapsacks() {
        let inst = GapInstance::with_unit_weights(Array2::ones((2, 2)), arr1(&[1.0, 1.0])).unwrap();
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [1.0, 0.0]])).unwrap();
        let cfg = LossConfig::with_lambda(6.0, PenaltySign::Corrected);
        let insts = [inst];
        let assigns = [a];
        let g = loss_grad_wrt_u(&pairs(&insts, &assigns), &cfg).unwrap();
        // Knapsack 0 is overloaded: columns i·2+0 get −1 + 6 = 5.
        assert_eq!(g.row(0).to_vec(), vec![5.0, -1.0, 5.0, -1.0]);
    }

    #[test]
    fn printed_sign_rewards_loading_underfull_knapsacks() {
        let inst = GapInstance::with_unit_weights(Array2::ones((2, 2)), arr1(&[1.0, 1.0])).unwrap();
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [1.0, 0.0]])).unwrap();
        let cfg = LossConfig::with_lambda(6.0, PenaltySign::AsPrinted);
        let insts = [inst];
        let assigns = [a];
        let g = loss_grad_wrt_u(&pairs(&insts, &assigns), &cfg).unwrap();
        // Knapsack 1 is under capacity: its columns get −1 − 6 = −7.
        assert_eq!(g.row(0).to_vec(), vec![-1.0, -7.0, -1.0, -7.0]);
    }

    #[test]
    fn gradient_matches_central_differences_away_from_kinks() {
        use rand::Rng;
        let mut rng = crate::seed::stream_rng(21, 0, 99);
        let h = 1e-6;
        for _ in 0..20 {
            let profits = Array2::from_shape_fn((3, 2), |_| rng.gen_range(0.0..5.0));
            let inst = GapInstance::with_unit_weights(profits, arr1(&[2.0, 2.0])).unwrap();
            let u = Array2::from_shape_fn((3, 2), |_| rng.gen_range(0.01..0.99));
            let a = Assignment::soft(u.clone()).unwrap();
            let cfg = LossConfig::with_lambda(3.0, PenaltySign::Corrected);

            // Skip draws that land within h of a capacity kink.
            let loads = knapsack_loads(&inst, &a).unwrap();
            if loads
                .iter()
                .zip(inst.capacities().iter())
                .any(|(l, c)| (l - c).abs() < 10.0 * h)
            {
                continue;
            }

            let insts = [inst.clone()];
            let assigns = [a.clone()];
            let g = loss_grad_wrt_u(&pairs(&insts, &assigns), &cfg).unwrap();
            for i in 0..3 {
                for j in 0..2 {
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[[i, j]] += h;
                    dn[[i, j]] -= h;
                    let au = [Assignment::soft(up).unwrap()];
                    let ad = [Assignment::soft(dn).unwrap()];
                    let lu = loss_simplified(&pairs(&insts, &au), &cfg).unwrap();
                    let ld = loss_simplified(&pairs(&insts, &ad), &cfg).unwrap();
                    let fd = (lu - ld) / (2.0 * h);
                    assert!(
                        (fd - g[[0, i * 2 + j]]).abs() <= 1e-6 * fd.abs().max(1.0),
                        "fd {fd} vs analytic {}",
                        g[[0, i * 2 + j]]
                    );
                }
            }
        }
    }

    #[test]
    fn losses_reject_empty_batches_and_bad_weights() {
        let cfg = LossConfig::with_lambda(1.0, PenaltySign::Corrected);
        assert!(matches!(loss_full(&[], &cfg), Err(Error::EmptyInput(_))));
        assert!(matches!(loss_simplified(&[], &cfg), Err(Error::EmptyInput(_))));
        assert!(matches!(loss_grad_wrt_u(&[], &cfg), Err(Error::EmptyInput(_))));

        let bad = LossConfig { lambda: -1.0, ..cfg };
        let inst = GapInstance::with_unit_weights(Array2::ones((1, 1)), arr1(&[1.0])).unwrap();
        let a = Assignment::hard(arr2(&[[1.0]])).unwrap();
        let insts = [inst];
        let assigns = [a];
        assert!(loss_simplified(&pairs(&insts, &assigns), &bad).is_err());
    }

    #[test]
    fn penalty_sign_parses_from_cli_spellings() {
        assert_eq!("printed".parse::<PenaltySign>().unwrap(), PenaltySign::AsPrinted);
        assert_eq!("corrected".parse::<PenaltySign>().unwrap(), PenaltySign::Corrected);
        assert!("upside_down".parse::<PenaltySign>().is_err());
    }
}
