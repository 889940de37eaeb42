//! Generalized assignment problem: instances, assignments, the objective,
//! feasibility checks, and the averaged capacity-violation metric.
//!
//! An instance assigns I items to J knapsacks. The objective is
//! Z = Σ_{i,j} u_{i,j} p_{i,j}, subject to each item going to exactly one
//! knapsack (C1), each knapsack's weighted load staying within capacity
//! (C2), and u being binary (C3).

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, Axis};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Default capacity tolerance for feasibility checks and the violation
/// metric: continuous softmax outputs need a small numeric slack.
pub const DEFAULT_EPS: f64 = 1e-6;

/// One GAP instance: I×J profit and weight matrices plus J capacities.
///
/// Construction validates the invariants (finite profits, weights ≥ 0,
/// capacities > 0, consistent shapes); the accessors expose read-only views.
#[derive(Debug, Clone, PartialEq)]
pub struct GapInstance {
    profits: Array2<f64>,
    weights: Array2<f64>,
    capacities: Array1<f64>,
}

impl GapInstance {
    pub fn new(
        profits: Array2<f64>,
        weights: Array2<f64>,
        capacities: Array1<f64>,
    ) -> Result<Self> {
        let (n_items, n_knapsacks) = profits.dim();
        if n_items == 0 || n_knapsacks == 0 {
            return Err(Error::InvalidValue("instance must have at least one item and one knapsack".into()));
        }
        if weights.dim() != (n_items, n_knapsacks) {
            return Err(Error::DimensionMismatch(format!(
                "weights {:?} vs profits {:?}",
                weights.dim(),
                profits.dim()
            )));
        }
        if capacities.len() != n_knapsacks {
            return Err(Error::DimensionMismatch(format!(
                "capacities length {} vs {} knapsacks",
                capacities.len(),
                n_knapsacks
            )));
        }
        if profits.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("profit entry".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidValue("weights must be finite and non-negative".into()));
        }
        if capacities.iter().any(|c| !c.is_finite() || *c <= 0.0) {
            return Err(Error::InvalidValue("capacities must be finite and positive".into()));
        }
        Ok(Self { profits, weights, capacities })
    }

    /// Instance with all weights 1, the structure produced by the
    /// user-association mapping (capacity = per-knapsack quota).
    pub fn with_unit_weights(profits: Array2<f64>, capacities: Array1<f64>) -> Result<Self> {
        let weights = Array2::ones(profits.dim());
        Self::new(profits, weights, capacities)
    }

    pub fn n_items(&self) -> usize {
        self.profits.nrows()
    }

    pub fn n_knapsacks(&self) -> usize {
        self.profits.ncols()
    }

    pub fn profits(&self) -> &Array2<f64> {
        &self.profits
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn capacities(&self) -> &Array1<f64> {
        &self.capacities
    }

    /// True when every weight is exactly 1 (required by the expansion and
    /// greedy solvers).
    pub fn has_unit_weights(&self) -> bool {
        self.weights.iter().all(|w| *w == 1.0)
    }
}

/// Wire format: dimensions plus row-major flattened matrices.
#[derive(Serialize, Deserialize)]
struct GapInstanceRepr {
    #[serde(rename = "I")]
    n_items: usize,
    #[serde(rename = "J")]
    n_knapsacks: usize,
    profits: Vec<f64>,
    weights: Vec<f64>,
    capacities: Vec<f64>,
}

impl Serialize for GapInstance {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        GapInstanceRepr {
            n_items: self.n_items(),
            n_knapsacks: self.n_knapsacks(),
            profits: self.profits.iter().copied().collect(),
            weights: self.weights.iter().copied().collect(),
            capacities: self.capacities.to_vec(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GapInstance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = GapInstanceRepr::deserialize(deserializer)?;
        let shape = (repr.n_items, repr.n_knapsacks);
        let profits = Array2::from_shape_vec(shape, repr.profits)
            .map_err(|e| D::Error::custom(format!("profits: {e}")))?;
        let weights = Array2::from_shape_vec(shape, repr.weights)
            .map_err(|e| D::Error::custom(format!("weights: {e}")))?;
        let capacities = Array1::from_vec(repr.capacities);
        GapInstance::new(profits, weights, capacities).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentMode {
    Soft,
    Hard,
}

/// An I×J association matrix u.
///
/// `soft` accepts any finite matrix with entries in [0, 1]; row-stochasticity
/// (C1) is *reported* by [`check_feasibility`], not enforced here, so that
/// degenerate matrices (e.g. all zeros) can still be scored and penalized.
/// `hard` additionally requires binary entries with exactly one 1 per row,
/// i.e. C1 and C3 hold exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    u: Array2<f64>,
    mode: AssignmentMode,
}

impl Assignment {
    pub fn soft(u: Array2<f64>) -> Result<Self> {
        if u.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
            return Err(Error::InvalidValue("assignment entries must be finite and in [0, 1]".into()));
        }
        Ok(Self { u, mode: AssignmentMode::Soft })
    }

    pub fn hard(u: Array2<f64>) -> Result<Self> {
        if u.iter().any(|x| *x != 0.0 && *x != 1.0) {
            return Err(Error::InvalidValue("hard assignment entries must be 0 or 1".into()));
        }
        for (i, row) in u.rows().into_iter().enumerate() {
            let ones = row.iter().filter(|x| **x == 1.0).count();
            if ones != 1 {
                return Err(Error::InvalidValue(format!(
                    "hard assignment row {i} has {ones} ones, expected exactly 1"
                )));
            }
        }
        Ok(Self { u, mode: AssignmentMode::Hard })
    }

    /// Hard assignment from a per-item knapsack index.
    pub fn from_indices(choices: &[usize], n_knapsacks: usize) -> Result<Self> {
        let mut u = Array2::zeros((choices.len(), n_knapsacks));
        for (i, &j) in choices.iter().enumerate() {
            if j >= n_knapsacks {
                return Err(Error::InvalidValue(format!(
                    "item {i} assigned to knapsack {j}, only {n_knapsacks} exist"
                )));
            }
            u[[i, j]] = 1.0;
        }
        Self::hard(u)
    }

    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    pub fn mode(&self) -> AssignmentMode {
        self.mode
    }

    pub fn n_items(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_knapsacks(&self) -> usize {
        self.u.ncols()
    }
}

/// Per-constraint outcome of [`check_feasibility`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityReport {
    /// Every row sum within eps of 1.
    pub c1_ok: bool,
    /// Per knapsack: load ≤ capacity + eps.
    pub c2_ok_per_knapsack: Vec<bool>,
    /// Every entry within eps of {0, 1}.
    pub c3_ok: bool,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.c1_ok && self.c3_ok && self.c2_ok_per_knapsack.iter().all(|ok| *ok)
    }
}

fn check_dims(inst: &GapInstance, a: &Assignment) -> Result<()> {
    if inst.profits().dim() != a.u().dim() {
        return Err(Error::DimensionMismatch(format!(
            "instance {:?} vs assignment {:?}",
            inst.profits().dim(),
            a.u().dim()
        )));
    }
    Ok(())
}

/// Total profit Z = Σ_{i,j} u_{i,j} p_{i,j}.
pub fn objective(inst: &GapInstance, a: &Assignment) -> Result<f64> {
    check_dims(inst, a)?;
    Ok((inst.profits() * a.u()).sum())
}

/// Per-knapsack weighted load: load_j = Σ_i w_{i,j} u_{i,j}.
pub fn knapsack_loads(inst: &GapInstance, a: &Assignment) -> Result<Array1<f64>> {
    check_dims(inst, a)?;
    Ok((inst.weights() * a.u()).sum_axis(Axis(0)))
}

/// Evaluate C1–C3 within tolerance `eps` (eps ≥ 0; hard assignments pass
/// exactly at eps = 0, continuous outputs need a small positive slack).
pub fn check_feasibility(inst: &GapInstance, a: &Assignment, eps: f64) -> Result<FeasibilityReport> {
    check_dims(inst, a)?;
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidValue("eps must be finite and non-negative".into()));
    }
    let c1_ok = a
        .u()
        .sum_axis(Axis(1))
        .iter()
        .all(|s| (s - 1.0).abs() <= eps);
    let loads = knapsack_loads(inst, a)?;
    let c2_ok_per_knapsack = loads
        .iter()
        .zip(inst.capacities().iter())
        .map(|(load, cap)| *load <= cap + eps)
        .collect();
    let c3_ok = a
        .u()
        .iter()
        .all(|x| x.abs() <= eps || (x - 1.0).abs() <= eps);
    Ok(FeasibilityReport { c1_ok, c2_ok_per_knapsack, c3_ok })
}

/// Round each row to its argmax (ties to the lowest knapsack index). The
/// result satisfies C1 and C3 exactly, and hard inputs pass through
/// unchanged.
pub fn harden(a: &Assignment) -> Assignment {
    let (n_items, n_knapsacks) = a.u().dim();
    let mut u = Array2::zeros((n_items, n_knapsacks));
    for (i, row) in a.u().rows().into_iter().enumerate() {
        let mut best = 0;
        for (j, x) in row.iter().enumerate() {
            if *x > row[best] {
                best = j;
            }
        }
        u[[i, best]] = 1.0;
    }
    Assignment { u, mode: AssignmentMode::Hard }
}

/// Mean over knapsacks of the per-knapsack fraction of examples whose load
/// exceeds capacity by more than `eps`.
pub fn avg_constraint_violation_probability(
    instances: &[GapInstance],
    assignments: &[Assignment],
    eps: f64,
) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::EmptyInput("violation metric needs at least one example"));
    }
    if instances.len() != assignments.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} instances vs {} assignments",
            instances.len(),
            assignments.len()
        )));
    }
    let n_knapsacks = instances[0].n_knapsacks();
    let mut violation_counts = vec![0usize; n_knapsacks];
    for (inst, a) in instances.iter().zip(assignments) {
        if inst.n_knapsacks() != n_knapsacks {
            return Err(Error::DimensionMismatch(format!(
                "examples mix {} and {} knapsacks",
                n_knapsacks,
                inst.n_knapsacks()
            )));
        }
        let loads = knapsack_loads(inst, a)?;
        for (count, (load, cap)) in violation_counts
            .iter_mut()
            .zip(loads.iter().zip(inst.capacities().iter()))
        {
            if *load > cap + eps {
                *count += 1;
            }
        }
    }
    let n = instances.len() as f64;
    let mean = violation_counts
        .iter()
        .map(|c| *c as f64 / n)
        .sum::<f64>()
        / n_knapsacks as f64;
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    fn inst_2x2(profits: [[f64; 2]; 2], weights: [[f64; 2]; 2], caps: [f64; 2]) -> GapInstance {
        GapInstance::new(arr2(&profits), arr2(&weights), arr1(&caps)).unwrap()
    }

    #[test]
    fn objective_picks_matrix_diagonal() {
        let inst = inst_2x2([[5.0, 1.0], [2.0, 4.0]], [[1.0; 2]; 2], [1.0, 1.0]);
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        assert_eq!(objective(&inst, &a).unwrap(), 9.0);
    }

    #[test]
    fn objective_of_zero_matrix_is_zero() {
        let inst = inst_2x2([[5.0, 1.0], [2.0, 4.0]], [[1.0; 2]; 2], [1.0, 1.0]);
        let a = Assignment::soft(Array2::zeros((2, 2))).unwrap();
        assert_eq!(objective(&inst, &a).unwrap(), 0.0);
    }

    #[test]
    fn objective_of_unit_profits_counts_items() {
        // Row-stochastic u against all-one profits sums to the item count.
        let profits = Array2::from_elem((4, 3), 1.0);
        let inst = GapInstance::with_unit_weights(profits, arr1(&[4.0, 4.0, 4.0])).unwrap();
        let u = Array2::from_elem((4, 3), 1.0 / 3.0);
        let a = Assignment::soft(u).unwrap();
        assert!((objective(&inst, &a).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn objective_rejects_dimension_mismatch() {
        let inst = inst_2x2([[1.0; 2]; 2], [[1.0; 2]; 2], [1.0, 1.0]);
        let a = Assignment::soft(Array2::zeros((3, 2))).unwrap();
        assert!(matches!(objective(&inst, &a), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn loads_are_weighted_column_sums() {
        let inst = inst_2x2([[0.0; 2]; 2], [[1.0; 2]; 2], [2.0, 2.0]);
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [1.0, 0.0]])).unwrap();
        assert_eq!(knapsack_loads(&inst, &a).unwrap(), arr1(&[2.0, 0.0]));

        let inst = inst_2x2([[0.0; 2]; 2], [[2.0, 1.0], [1.0, 3.0]], [5.0, 5.0]);
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        assert_eq!(knapsack_loads(&inst, &a).unwrap(), arr1(&[2.0, 3.0]));
    }

    #[test]
    fn loads_of_zero_assignment_are_zero() {
        let inst = inst_2x2([[0.0; 2]; 2], [[2.0, 1.0], [1.0, 3.0]], [5.0, 5.0]);
        let a = Assignment::soft(Array2::zeros((2, 2))).unwrap();
        assert_eq!(knapsack_loads(&inst, &a).unwrap(), arr1(&[0.0, 0.0]));
    }

    #[test]
    fn feasibility_all_pass_on_permutation() {
        let inst = inst_2x2([[1.0; 2]; 2], [[1.0; 2]; 2], [1.0, 1.0]);
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        let report = check_feasibility(&inst, &a, 1e-9).unwrap();
        assert!(report.c1_ok && report.c3_ok);
        assert_eq!(report.c2_ok_per_knapsack, vec![true, true]);
        assert!(report.is_feasible());
    }

    #[test]
    fn feasibility_flags_overloaded_knapsack() {
        let inst = inst_2x2([[1.0; 2]; 2], [[1.0; 2]; 2], [1.0, 1.0]);
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [1.0, 0.0]])).unwrap();
        let report = check_feasibility(&inst, &a, 1e-9).unwrap();
        assert_eq!(report.c2_ok_per_knapsack, vec![false, true]);
        assert!(!report.is_feasible());
    }

    #[test]
    fn feasibility_uniform_soft_hits_capacity_at_equality() {
        // u = 1/J everywhere with c_j = I/J: loads equal capacity exactly.
        let profits = Array2::zeros((4, 2));
        let inst = GapInstance::with_unit_weights(profits, arr1(&[2.0, 2.0])).unwrap();
        let a = Assignment::soft(Array2::from_elem((4, 2), 0.5)).unwrap();
        let report = check_feasibility(&inst, &a, 1e-9).unwrap();
        assert_eq!(report.c2_ok_per_knapsack, vec![true, true]);
        assert!(report.c1_ok);
        assert!(!report.c3_ok);
    }

    #[test]
    fn feasibility_accepts_eps_zero_for_hard_assignments() {
        let inst = inst_2x2([[1.0; 2]; 2], [[1.0; 2]; 2], [1.0, 1.0]);
        let a = Assignment::hard(arr2(&[[0.0, 1.0], [1.0, 0.0]])).unwrap();
        assert!(check_feasibility(&inst, &a, 0.0).unwrap().is_feasible());
    }

    #[test]
    fn harden_takes_row_argmax() {
        let a = Assignment::soft(arr2(&[[0.2, 0.7, 0.1]])).unwrap();
        assert_eq!(harden(&a).u(), &arr2(&[[0.0, 1.0, 0.0]]));
    }

    #[test]
    fn harden_breaks_ties_toward_lowest_index() {
        let a = Assignment::soft(arr2(&[[0.5, 0.5]])).unwrap();
        assert_eq!(harden(&a).u(), &arr2(&[[1.0, 0.0]]));
    }

    #[test]
    fn harden_is_idempotent_on_hard_input() {
        let a = Assignment::hard(arr2(&[[0.0, 1.0], [1.0, 0.0]])).unwrap();
        let h = harden(&a);
        assert_eq!(h.u(), a.u());
        assert_eq!(h.mode(), AssignmentMode::Hard);
    }

    #[test]
    fn violation_metric_zero_when_all_feasible() {
        let inst = inst_2x2([[1.0; 2]; 2], [[1.0; 2]; 2], [1.0, 1.0]);
        let a = Assignment::hard(arr2(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        let v = avg_constraint_violation_probability(
            &[inst.clone(), inst],
            &[a.clone(), a],
            1e-9,
        )
        .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn violation_metric_one_when_everything_violates() {
        let inst = inst_2x2([[1.0; 2]; 2], [[3.0; 2]; 2], [1.0, 1.0]);
        let a = Assignment::soft(Array2::from_elem((2, 2), 1.0)).unwrap();
        let v = avg_constraint_violation_probability(&[inst], &[a], 1e-9).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn violation_metric_averages_per_knapsack_fractions() {
        // Example 1 overloads knapsack 0 only; example 2 is feasible:
        // per-knapsack fractions (1/2, 0) average to 0.25.
        let inst = inst_2x2([[1.0; 2]; 2], [[1.0; 2]; 2], [1.0, 1.0]);
        let bad = Assignment::hard(arr2(&[[1.0, 0.0], [1.0, 0.0]])).unwrap();
        let good = Assignment::hard(arr2(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        let v = avg_constraint_violation_probability(
            &[inst.clone(), inst],
            &[bad, good],
            1e-9,
        )
        .unwrap();
        assert_eq!(v, 0.25);
    }

    #[test]
    fn violation_metric_rejects_empty_input() {
        assert!(matches!(
            avg_constraint_violation_probability(&[], &[], 1e-9),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn instance_validation_rejects_bad_inputs() {
        let p = arr2(&[[1.0, 2.0]]);
        assert!(GapInstance::new(p.clone(), arr2(&[[1.0, -1.0]]), arr1(&[1.0, 1.0])).is_err());
        assert!(GapInstance::new(p.clone(), arr2(&[[1.0, 1.0]]), arr1(&[0.0, 1.0])).is_err());
        assert!(GapInstance::new(arr2(&[[f64::NAN, 2.0]]), arr2(&[[1.0, 1.0]]), arr1(&[1.0, 1.0])).is_err());
        assert!(GapInstance::new(p, arr2(&[[1.0, 1.0], [1.0, 1.0]]), arr1(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn hard_constructor_rejects_multiple_ones_per_row() {
        assert!(Assignment::hard(arr2(&[[1.0, 1.0]])).is_err());
        assert!(Assignment::hard(arr2(&[[0.0, 0.0]])).is_err());
        assert!(Assignment::hard(arr2(&[[0.5, 0.5]])).is_err());
    }

    #[test]
    fn instance_json_round_trips_with_flat_matrices() {
        let inst = inst_2x2([[5.0, 1.5], [2.0, 4.0]], [[1.0; 2]; 2], [1.0, 2.0]);
        let json = serde_json::to_string(&inst).unwrap();
        assert!(json.starts_with(r#"{"I":2,"J":2,"profits":[5.0,1.5,2.0,4.0]"#));
        let back: GapInstance = serde_json::from_str(&json).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn instance_json_rejects_wrong_lengths() {
        let bad = r#"{"I":2,"J":2,"profits":[1.0,2.0,3.0],"weights":[1,1,1,1],"capacities":[1,1]}"#;
        assert!(serde_json::from_str::<GapInstance>(bad).is_err());
    }
}
