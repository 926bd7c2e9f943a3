//! Observed data and intervention-design containers.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// An N×n matrix of real observations with named columns.
///
/// Values are stored row-major. `standardized` records whether the columns
/// have been centered and scaled; scoring works either way, but the default
/// pipelines standardize globally across all experimental conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedDataset {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    pub var_names: Vec<String>,
    pub standardized: bool,
}

impl ObservedDataset {
    /// Builds a dataset from row-major values, checking shape and finiteness.
    pub fn new(values: Vec<f64>, n_rows: usize, var_names: Vec<String>) -> Result<Self> {
        let n_cols = var_names.len();
        if n_cols == 0 {
            return Err(Error::Dimension("dataset needs at least one column".into()));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::Dimension(format!(
                "expected {} values for a {}x{} matrix, got {}",
                n_rows * n_cols,
                n_rows,
                n_cols,
                values.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i / n_cols,
                    col: i % n_cols,
                });
            }
        }
        Ok(ObservedDataset {
            values,
            n_rows,
            n_cols,
            var_names,
            standardized: false,
        })
    }

    /// Convenience constructor with generated column names `x0..x{n-1}`.
    pub fn from_rows(rows: &[Vec<f64>], n_cols: usize) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::Dimension(format!(
                    "row has {} entries, expected {}",
                    r.len(),
                    n_cols
                )));
            }
            values.extend_from_slice(r);
        }
        let names = (0..n_cols).map(|j| format!("x{j}")).collect();
        ObservedDataset::new(values, rows.len(), names)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Reorders rows; used by tests for permutation-invariance checks.
    pub fn permuted_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_rows {
            return Err(Error::Dimension("permutation length mismatch".into()));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for &r in order {
            values.extend_from_slice(self.row(r));
        }
        Ok(ObservedDataset {
            values,
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            var_names: self.var_names.clone(),
            standardized: self.standardized,
        })
    }
}

/// Per-row on/off states of `m` named interventions, with optional known
/// target sets (observed-node indices) per intervention.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionDesign {
    pub m: usize,
    pub labels: Vec<String>,
    /// Row-major N×m matrix of 0/1 states.
    row_states: Vec<u8>,
    n_rows: usize,
    /// Intervention index -> set of observed-node indices, when targets are known.
    pub known_targets: Option<BTreeMap<usize, Vec<usize>>>,
}

impl InterventionDesign {
    pub fn new(
        labels: Vec<String>,
        row_states: Vec<u8>,
        n_rows: usize,
        known_targets: Option<BTreeMap<usize, Vec<usize>>>,
    ) -> Result<Self> {
        let m = labels.len();
        if row_states.len() != n_rows * m {
            return Err(Error::Dimension(format!(
                "expected {} design entries for {} rows x {} interventions, got {}",
                n_rows * m,
                n_rows,
                m,
                row_states.len()
            )));
        }
        for (i, &s) in row_states.iter().enumerate() {
            if s > 1 {
                return Err(Error::NonBinary {
                    row: i / m.max(1),
                    col: i % m.max(1),
                });
            }
        }
        if let Some(t) = &known_targets {
            for (&j, _) in t {
                if j >= m {
                    return Err(Error::Dimension(format!(
                        "known_targets references intervention {j} but m = {m}"
                    )));
                }
            }
        }
        Ok(InterventionDesign {
            m,
            labels,
            row_states,
            n_rows,
            known_targets,
        })
    }

    /// A purely observational design: zero interventions.
    pub fn observational(n_rows: usize) -> Self {
        InterventionDesign {
            m: 0,
            labels: Vec::new(),
            row_states: Vec::new(),
            n_rows,
            known_targets: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// State of intervention `j` in row `row`.
    #[inline]
    pub fn state(&self, row: usize, j: usize) -> u8 {
        self.row_states[row * self.m + j]
    }

    /// True when no intervention is active in `row`.
    pub fn row_is_observational(&self, row: usize) -> bool {
        (0..self.m).all(|j| self.state(row, j) == 0)
    }

    pub fn permuted_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_rows {
            return Err(Error::Dimension("permutation length mismatch".into()));
        }
        let mut states = Vec::with_capacity(self.row_states.len());
        for &r in order {
            states.extend_from_slice(&self.row_states[r * self.m..(r + 1) * self.m]);
        }
        Ok(InterventionDesign {
            m: self.m,
            labels: self.labels.clone(),
            row_states: states,
            n_rows: self.n_rows,
            known_targets: self.known_targets.clone(),
        })
    }
}

/// Checks that a dataset and a design are mutually consistent.
pub fn validate_dataset(data: &ObservedDataset, design: &InterventionDesign) -> Result<()> {
    if data.n_rows() != design.n_rows() {
        return Err(Error::Dimension(format!(
            "row count mismatch: dataset has {} rows, design has {}",
            data.n_rows(),
            design.n_rows()
        )));
    }
    if let Some(targets) = &design.known_targets {
        for (j, nodes) in targets {
            for &v in nodes {
                if v >= data.n_cols() {
                    return Err(Error::Dimension(format!(
                        "intervention {j} targets node {v} but dataset has {} columns",
                        data.n_cols()
                    )));
                }
            }
        }
    }
    // Constructors already reject non-finite values and non-binary states;
    // re-check here so hand-assembled structs cannot sneak through.
    for (i, v) in data.values().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: i / data.n_cols(),
                col: i % data.n_cols(),
            });
        }
    }
    Ok(())
}

/// Result of standardization: the new dataset plus indices of columns that
/// had zero variance and were only centered.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub data: ObservedDataset,
    pub zero_variance_cols: Vec<usize>,
}

/// Centers each column to mean 0 and scales to sample standard deviation 1
/// (denominator N−1). Standardization is global across all experimental
/// conditions, never per-condition. Zero-variance columns are centered only
/// and reported back to the caller.
pub fn standardize(data: &ObservedDataset) -> Result<Standardized> {
    let n = data.n_rows();
    let p = data.n_cols();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "standardization needs at least two rows".into(),
        ));
    }
    let mut values = data.values().to_vec();
    let mut zero_var = Vec::new();
    for j in 0..p {
        let mean = (0..n).map(|i| values[i * p + j]).sum::<f64>() / n as f64;
        let ss = (0..n)
            .map(|i| {
                let d = values[i * p + j] - mean;
                d * d
            })
            .sum::<f64>();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        if sd < 1e-12 {
            zero_var.push(j);
            for i in 0..n {
                values[i * p + j] -= mean;
            }
        } else {
            for i in 0..n {
                values[i * p + j] = (values[i * p + j] - mean) / sd;
            }
        }
    }
    let mut out = ObservedDataset::new(values, n, data.var_names.clone())?;
    out.standardized = true;
    Ok(Standardized {
        data: out,
        zero_variance_cols: zero_var,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset(rows: &[Vec<f64>], n_cols: usize) -> ObservedDataset {
        ObservedDataset::from_rows(rows, n_cols).unwrap()
    }

    #[test]
    fn validate_accepts_consistent_shapes() {
        let data = dataset(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], 2);
        let design =
            InterventionDesign::new(vec!["i1".into()], vec![0, 1, 0], 3, None).unwrap();
        validate_dataset(&data, &design).unwrap();
    }

    #[test]
    fn validate_rejects_row_count_mismatch() {
        let data = dataset(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], 2);
        let design =
            InterventionDesign::new(vec!["i1".into()], vec![0, 1, 0, 1], 4, None).unwrap();
        let err = validate_dataset(&data, &design).unwrap_err();
        assert!(err.to_string().contains("row count mismatch"));
    }

    #[test]
    fn constructor_reports_non_finite_coordinates() {
        let err = ObservedDataset::new(vec![1.0, f64::NAN, 3.0, 4.0], 2, names(2)).unwrap_err();
        match err {
            Error::NonFinite { row, col } => {
                assert_eq!((row, col), (0, 1));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn design_rejects_non_binary_entries() {
        let err = InterventionDesign::new(vec!["a".into()], vec![0, 2], 2, None).unwrap_err();
        assert!(matches!(err, Error::NonBinary { row: 1, col: 0 }));
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn standardize_two_points() {
        let data = dataset(&[vec![1.0], vec![3.0]], 1);
        let s = standardize(&data).unwrap();
        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        assert!((s.data.value(0, 0) + inv_sqrt2).abs() < 1e-12);
        assert!((s.data.value(1, 0) - inv_sqrt2).abs() < 1e-12);
        assert!(s.zero_variance_cols.is_empty());
        assert!(s.data.standardized);
    }

    #[test]
    fn standardize_constant_column_centers_and_warns() {
        let data = dataset(&[vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]], 2);
        let s = standardize(&data).unwrap();
        assert_eq!(s.zero_variance_cols, vec![0]);
        for i in 0..3 {
            assert_eq!(s.data.value(i, 0), 0.0);
        }
    }

    #[test]
    fn standardize_rejects_single_row() {
        let data = dataset(&[vec![1.0]], 1);
        assert!(standardize(&data).is_err());
    }

    proptest! {
        #[test]
        fn standardize_is_idempotent(raw in proptest::collection::vec(-50.0f64..50.0, 6..40)) {
            let rows: Vec<Vec<f64>> = raw.chunks(2).filter(|c| c.len() == 2).map(|c| c.to_vec()).collect();
            prop_assume!(rows.len() >= 3);
            let data = dataset(&rows, 2);
            let once = standardize(&data).unwrap().data;
            let twice = standardize(&once).unwrap().data;
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn standardized_columns_have_unit_moments(raw in proptest::collection::vec(-50.0f64..50.0, 9..60)) {
            let rows: Vec<Vec<f64>> = raw.chunks(3).filter(|c| c.len() == 3).map(|c| c.to_vec()).collect();
            prop_assume!(rows.len() >= 3);
            let data = dataset(&rows, 3);
            let s = standardize(&data).unwrap();
            let n = s.data.n_rows() as f64;
            for j in 0..3 {
                if s.zero_variance_cols.contains(&j) { continue; }
                let mean: f64 = (0..s.data.n_rows()).map(|i| s.data.value(i, j)).sum::<f64>() / n;
                let var: f64 = (0..s.data.n_rows()).map(|i| (s.data.value(i, j) - mean).powi(2)).sum::<f64>() / (n - 1.0);
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            }
        }
    }
}
