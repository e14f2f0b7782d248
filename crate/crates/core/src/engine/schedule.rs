use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-iteration requested order, grouped into stages of constant order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSchedule {
    stage_orders: Vec<usize>,
    stage_lengths: Vec<usize>,
    per_iteration: Vec<usize>,
}

impl DegreeSchedule {
    fn from_stages(stage_orders: Vec<usize>, stage_lengths: Vec<usize>) -> Self {
        let per_iteration = stage_orders
            .iter()
            .zip(&stage_lengths)
            .flat_map(|(&q, &len)| std::iter::repeat_n(q, len))
            .collect();
        Self {
            stage_orders,
            stage_lengths,
            per_iteration,
        }
    }

    pub fn stage_orders(&self) -> &[usize] {
        &self.stage_orders
    }

    pub fn stage_lengths(&self) -> &[usize] {
        &self.stage_lengths
    }

    pub fn per_iteration(&self) -> &[usize] {
        &self.per_iteration
    }

    pub fn total_iterations(&self) -> usize {
        self.per_iteration.len()
    }

    pub fn max_order(&self) -> usize {
        self.stage_orders.last().copied().unwrap_or(0)
    }

    /// Requested order at iteration `t`; the last order is held past the end.
    pub fn order_at(&self, t: usize) -> usize {
        self.per_iteration
            .get(t)
            .or(self.per_iteration.last())
            .copied()
            .unwrap_or(1)
    }

    pub fn in_final_stage(&self, t: usize) -> bool {
        t >= self.final_stage_start()
    }

    fn final_stage_start(&self) -> usize {
        self.stage_lengths[..self.stage_lengths.len() - 1].iter().sum()
    }

    /// Completed iterations before a rebound guard may fire: once the top order
    /// is reached, and never inside the first stage. Rises while the order is
    /// still climbing are transients of the continuation, not overfitting.
    pub fn guard_start(&self) -> usize {
        self.final_stage_start().max(self.stage_lengths[0])
    }
}

/// Increasing orders `1..=D` with non-increasing stage lengths summing to
/// `t_max`. When `t_max = D (D + 1) / 2` the lengths are exactly `D, D-1, ..., 1`.
///
/// Lengths are `floor(t_max (D - q + 1) / (D (D + 1) / 2))`, the remainder is
/// handed out one per stage from the first, and any empty stage is then filled
/// by taking from the longest ones. If `t_max < D` the top order is lowered to
/// `t_max` so every stage gets at least one iteration.
pub fn build_schedule(max_order: usize, t_max: usize) -> Result<DegreeSchedule> {
    if max_order == 0 || t_max == 0 {
        return Err(Error::InvalidArgument(
            "schedule needs max_order >= 1 and t_max >= 1".into(),
        ));
    }
    let d = max_order.min(t_max);
    let tri = d * (d + 1) / 2;
    let mut lengths: Vec<usize> = (1..=d).map(|q| t_max * (d - q + 1) / tri).collect();
    let assigned: usize = lengths.iter().sum();
    for len in lengths.iter_mut().take(t_max - assigned) {
        *len += 1;
    }
    for len in lengths.iter_mut() {
        if *len == 0 {
            *len = 1;
        }
    }
    let mut excess = lengths.iter().sum::<usize>() - t_max;
    while excess > 0 {
        let max = *lengths.iter().max().expect("non-empty");
        // Last occurrence of the maximum keeps the sequence non-increasing.
        let pos = lengths.iter().rposition(|&l| l == max).expect("present");
        lengths[pos] -= 1;
        excess -= 1;
    }
    Ok(DegreeSchedule::from_stages((1..=d).collect(), lengths))
}

/// A single stage holding `order` for all `t_max` iterations.
pub fn fixed_schedule(order: usize, t_max: usize) -> Result<DegreeSchedule> {
    if order == 0 || t_max == 0 {
        return Err(Error::InvalidArgument(
            "fixed schedule needs order >= 1 and t_max >= 1".into(),
        ));
    }
    Ok(DegreeSchedule::from_stages(vec![order], vec![t_max]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn triangular_budget_is_exact() {
        let s = build_schedule(10, 55).unwrap();
        assert_eq!(s.stage_lengths(), &[10, 9, 8, 7, 6, 5, 4, 3, 2, 1]);
        assert_eq!(s.order_at(0), 1);
        assert_eq!(s.order_at(9), 1);
        assert_eq!(s.order_at(10), 2);
        assert_eq!(s.order_at(54), 10);
        assert!(s.in_final_stage(54) && !s.in_final_stage(53));
        assert_eq!(s.guard_start(), 54);
        assert_eq!(fixed_schedule(2, 30).unwrap().guard_start(), 30);
        assert_eq!(build_schedule(2, 3).unwrap().guard_start(), 2);
    }

    #[test]
    fn single_order_schedule() {
        let s = build_schedule(1, 7).unwrap();
        assert_eq!(s.stage_lengths(), &[7]);
        assert!(s.per_iteration().iter().all(|&q| q == 1));
    }

    #[test]
    fn scaled_triangular_weights() {
        assert_eq!(build_schedule(3, 12).unwrap().stage_lengths(), &[6, 4, 2]);
        assert_eq!(
            build_schedule(10, 100).unwrap().stage_lengths(),
            &[19, 17, 15, 13, 11, 9, 7, 5, 3, 1]
        );
        // Floors leave a zero stage; repair takes from the longest stage.
        assert_eq!(build_schedule(3, 4).unwrap().stage_lengths(), &[2, 1, 1]);
    }

    #[test]
    fn short_budget_lowers_top_order() {
        let s = build_schedule(10, 4).unwrap();
        assert_eq!(s.stage_orders(), &[1, 2, 3, 4]);
        assert_eq!(s.stage_lengths(), &[1, 1, 1, 1]);
    }

    #[test]
    fn invalid_arguments() {
        assert!(build_schedule(0, 5).is_err());
        assert!(build_schedule(3, 0).is_err());
        assert!(fixed_schedule(0, 5).is_err());
    }

    proptest! {
        #[test]
        fn lengths_are_valid(d in 1usize..15, t in 1usize..300) {
            let s = build_schedule(d, t).unwrap();
            let l = s.stage_lengths();
            prop_assert_eq!(l.iter().sum::<usize>(), t);
            prop_assert!(l.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(l.iter().all(|&x| x >= 1));
            prop_assert!(s.per_iteration().windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(s.per_iteration()[0], 1);
            prop_assert_eq!(*s.per_iteration().last().unwrap(), d.min(t));
        }
    }
}
