use serde::{Deserialize, Serialize};

/// Dense state-action value table, row-major by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self::filled(num_states, num_actions, 0.0)
    }

    pub fn filled(num_states: usize, num_actions: usize, value: f64) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![value; num_states * num_actions],
        }
    }

    /// Builds a table from `rows[s][a]`. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let num_states = rows.len();
        let num_actions = rows.first().map_or(0, Vec::len);
        assert!(
            rows.iter().all(|r| r.len() == num_actions),
            "ragged Q rows"
        );
        Self {
            num_states,
            num_actions,
            values: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn same_shape(&self, other: &QTable) -> bool {
        self.num_states == other.num_states && self.num_actions == other.num_actions
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    #[inline]
    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.num_actions + action] = value;
    }

    #[inline]
    pub fn row(&self, state: usize) -> &[f64] {
        let start = state * self.num_actions;
        &self.values[start..start + self.num_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values
            .chunks(self.num_actions)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// `max_a Q(s, a)`.
    #[inline]
    pub fn max_value(&self, state: usize) -> f64 {
        self.row(state)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action with lowest-index tie-break.
    #[inline]
    pub fn greedy_action(&self, state: usize) -> usize {
        argmax(self.row(state))
    }

    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.num_states).map(|s| self.greedy_action(s)).collect()
    }

    pub fn state_values(&self) -> Vec<f64> {
        (0..self.num_states).map(|s| self.max_value(s)).collect()
    }

    /// Mean absolute entrywise difference.
    pub fn mean_abs_diff(&self, other: &QTable) -> f64 {
        debug_assert!(self.same_shape(other));
        let total: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum();
        total / self.values.len() as f64
    }

    /// Sup-norm distance.
    pub fn sup_diff(&self, other: &QTable) -> f64 {
        debug_assert!(self.same_shape(other));
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Index of the largest entry; the lowest index wins ties.
#[inline]
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 1.0]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
        assert_eq!(argmax(&[3.0]), 0);
    }

    #[test]
    fn rows_round_trip_and_metrics() {
        let q = QTable::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]]);
        assert_eq!(q.get(1, 0), -1.0);
        assert_eq!(q.max_value(0), 2.0);
        assert_eq!(q.greedy_policy(), vec![1, 1]);
        assert_eq!(q.to_rows(), vec![vec![1.0, 2.0], vec![-1.0, 0.5]]);
        let z = QTable::zeros(2, 2);
        assert_eq!(q.mean_abs_diff(&z), 1.125);
        assert_eq!(q.sup_diff(&z), 2.0);
    }
}
