use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::design::Allocation;

/// Result of a solve: the allocation, its objective value, which closed form
/// (or numerical method) produced it, and named diagnostics such as `mu`,
/// `y1..y3` or `kkt_residual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub allocation: Allocation,
    pub objective: f64,
    pub case_label: String,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl SolveReport {
    pub fn new(allocation: Allocation, objective: f64, case_label: impl Into<String>) -> Self {
        Self { allocation, objective, case_label: case_label.into(), diagnostics: BTreeMap::new() }
    }

    /// Records a diagnostic; non-finite values are dropped so the report
    /// always serializes.
    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.insert(key, value);
        self
    }

    pub fn insert(&mut self, key: &str, value: f64) {
        if value.is_finite() {
            self.diagnostics.insert(key.to_string(), value);
        }
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    /// Maps an allocation computed in sorted order back to input order:
    /// sorted position `k` holds input index `perm[k]`.
    pub(crate) fn unsort(mut self, perm: &[usize]) -> Self {
        let sorted = self.allocation.as_slice();
        let mut p = vec![0.0; sorted.len()];
        for (k, &i) in perm.iter().enumerate() {
            p[i] = sorted[k];
        }
        self.allocation = Allocation::new(p).expect("permutation preserves the simplex");
        self
    }
}
