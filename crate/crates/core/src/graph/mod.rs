//! Weighted digraphs, Laplacians and piecewise-constant graph signals.
//!
//! Arc convention: `a_ij > 0` means an arc from `j` to `i`, i.e. agent `i`
//! listens to agent `j`.

mod certify;
mod connectivity;
mod signal;

pub use certify::{
    certify_cut_balance, certify_cut_balance_signal, certify_cut_balance_with, certify_isc_proxy, certify_static,
    certify_type_symmetry, certify_type_symmetry_signal, certify_uqsc, certify_usc,
    certify_windows, CertificateKind, CertificateParameters, ConnectivityCertificate,
    Connectivity, Verdict, WindowCheck, Witness, MAX_EXHAUSTIVE_NODES,
};
pub use connectivity::{
    quasi_strongly_connected, reachable_from, scc_decomposition, spanning_root,
    strongly_connected, SccDecomposition,
};
pub use signal::{GraphSignal, SignedSignal};

use crate::error::{Error, Result};

/// Nonnegative `n x n` weight matrix with zero diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    n: usize,
    weights: Vec<f64>,
}

impl WeightedDigraph {
    pub fn new(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::InvalidGraph(format!(
                "expected {} weights for n = {n}, got {}",
                n * n,
                weights.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "weight a[{i}][{j}] = {w} is not a finite nonnegative number"
                    )));
                }
                if i == j && w != 0.0 {
                    return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
                }
            }
        }
        Ok(Self { n, weights })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::InvalidGraph(format!("row {bad} has wrong length")));
        }
        Self::new(n, rows.concat())
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            weights: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `a_ij`: weight with which `i` listens to `j`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// Whether the arc `from -> to` is present.
    #[inline]
    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        self.weight(to, from) > 0.0
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_positive_weight(&self) -> Option<f64> {
        self.weights
            .iter()
            .copied()
            .filter(|&w| w > 0.0)
            .reduce(f64::min)
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, w: f64) {
        debug_assert!(i != j && w >= 0.0);
        self.weights[i * self.n + j] = w;
    }

    pub(crate) fn add_scaled(&mut self, other: &WeightedDigraph, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += scale * b;
        }
    }

    /// Applies `f` to every off-diagonal weight.
    pub fn map_weights(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = self.n;
        let weights = self
            .weights
            .iter()
            .enumerate()
            .map(|(k, &w)| if k / n == k % n { 0.0 } else { f(w) })
            .collect();
        Self::new(n, weights)
    }
}

/// Laplacian `L[A]` with `l_ij = -a_ij` off the diagonal and
/// `l_ii = sum_{j != i} a_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    n: usize,
    entries: Vec<f64>,
    adjacency: Vec<f64>,
}

impl LaplacianMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// `L x`, evaluated as `sum_j a_ij (x_i - x_j)` so that `L 1 = 0` holds
    /// exactly in floating point.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let row = &self.adjacency[i * n..(i + 1) * n];
                row.iter()
                    .zip(x)
                    .map(|(&a, &xj)| if a > 0.0 { a * (x[i] - xj) } else { 0.0 })
                    .sum()
            })
            .collect()
    }
}

pub fn laplacian_of(g: &WeightedDigraph) -> LaplacianMatrix {
    let n = g.n();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            if i != j {
                let a = g.weight(i, j);
                entries[i * n + j] = -a;
                degree += a;
            }
        }
        entries[i * n + i] = degree;
    }
    LaplacianMatrix {
        n,
        entries,
        adjacency: g.as_slice().to_vec(),
    }
}

/// Keeps weights `>= delta`, zeroes the rest.
pub fn truncate(g: &WeightedDigraph, delta: f64) -> Result<WeightedDigraph> {
    if !(delta > 0.0) {
        return Err(Error::NonPositiveThreshold(delta));
    }
    Ok(truncate_unchecked(g, delta))
}

pub(crate) fn truncate_unchecked(g: &WeightedDigraph, delta: f64) -> WeightedDigraph {
    WeightedDigraph {
        n: g.n,
        weights: g
            .weights
            .iter()
            .map(|&w| if w >= delta { w } else { 0.0 })
            .collect(),
    }
}

/// Writes `-(L x)` for a stacked state with `dim` coordinates per agent:
/// `out_i = sum_j a_ij (x_j - x_i)`.
#[inline]
pub fn laplacian_flow_into(g: &WeightedDigraph, x: &[f64], dim: usize, out: &mut [f64]) {
    let n = g.n();
    debug_assert_eq!(x.len(), n * dim);
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..n {
        let row = g.row(i);
        let xi = &x[i * dim..(i + 1) * dim];
        let oi = &mut out[i * dim..(i + 1) * dim];
        for (j, &a) in row.iter().enumerate() {
            if a > 0.0 {
                let xj = &x[j * dim..(j + 1) * dim];
                for c in 0..dim {
                    oi[c] += a * (xj[c] - xi[c]);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(rows: &[&[f64]]) -> WeightedDigraph {
        WeightedDigraph::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn laplacian_examples() {
        let l = laplacian_of(&g(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert_eq!(l.as_slice(), &[1.0, -1.0, -1.0, 1.0]);

        let l = laplacian_of(&WeightedDigraph::zeros(3));
        assert!(l.as_slice().iter().all(|&v| v == 0.0));

        let l = laplacian_of(&g(&[&[0.0, 2.0, 0.0], &[0.0, 0.0, 3.0], &[1.0, 0.0, 0.0]]));
        assert_eq!(
            l.as_slice(),
            &[2.0, -2.0, 0.0, 0.0, 3.0, -3.0, -1.0, 0.0, 1.0]
        );
    }

    #[test]
    fn rejects_invalid_graphs() {
        assert!(WeightedDigraph::new(2, vec![1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(WeightedDigraph::new(2, vec![0.0, -1.0, 0.0, 0.0]).is_err());
        assert!(WeightedDigraph::new(2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(WeightedDigraph::new(2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn truncation_examples() {
        let a = g(&[&[0.0, 0.5], &[2.0, 0.0]]);
        assert_eq!(truncate(&a, 1.0).unwrap(), g(&[&[0.0, 0.0], &[2.0, 0.0]]));
        assert_eq!(truncate(&a, 0.1).unwrap(), a);
        assert_eq!(truncate(&a, 5.0).unwrap(), WeightedDigraph::zeros(2));
        assert!(matches!(truncate(&a, 0.0), Err(Error::NonPositiveThreshold(_))));
        assert!(truncate(&a, -1.0).is_err());
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = WeightedDigraph> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(
                prop_oneof![Just(0.0), 0.0..10.0f64, 1e-6..1e6f64],
                n * n,
            )
            .prop_map(move |mut w| {
                for i in 0..n {
                    w[i * n + i] = 0.0;
                }
                WeightedDigraph::new(n, w).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn laplacian_annihilates_ones(a in arb_graph(12)) {
            let l = laplacian_of(&a);
            let ones = vec![1.0; a.n()];
            prop_assert!(l.apply(&ones).iter().all(|&v| v == 0.0));
            for i in 0..a.n() {
                prop_assert!(l.entry(i, i) >= 0.0);
                for j in 0..a.n() {
                    if i != j { prop_assert!(l.entry(i, j) <= 0.0); }
                }
            }
        }

        #[test]
        fn truncation_is_idempotent(a in arb_graph(8), delta in 1e-3..20.0f64) {
            let once = truncate(&a, delta).unwrap();
            prop_assert_eq!(truncate(&once, delta).unwrap(), once);
        }

        #[test]
        fn flow_matches_laplacian(a in arb_graph(6), x in proptest::collection::vec(-5.0..5.0f64, 6)) {
            let n = a.n();
            let x = &x[..n];
            let mut out = vec![0.0; n];
            laplacian_flow_into(&a, x, 1, &mut out);
            let lx = laplacian_of(&a).apply(x);
            for i in 0..n {
                prop_assert!((out[i] + lx[i]).abs() <= 1e-9 * (1.0 + lx[i].abs()));
            }
        }
    }
}
