//! Directed communication graphs, row-stochastic mixing weights and the
//! spectral quantities the convergence constants depend on.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Eigenvalues at or below this are treated as zero.
pub const EIGEN_TOLERANCE: f64 = 1e-9;

/// Row sums of a weight matrix must be within this of one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A directed graph stored as in-neighbor sets: `in_neighbors[i]` holds every
/// `j` with an edge `j → i`, i.e. the agents whose messages `i` receives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiGraph {
    n: usize,
    in_neighbors: Vec<BTreeSet<usize>>,
}

impl DiGraph {
    /// Builds a graph from 0-based `(src, dst)` pairs. Self-loops and
    /// duplicate edges are rejected.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one agent".into()));
        }
        let mut in_neighbors = vec![BTreeSet::new(); n];
        for &(src, dst) in edges {
            if src >= n || dst >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {src} -> {dst} out of range for {n} agents"
                )));
            }
            if src == dst {
                return Err(Error::InvalidGraph(format!("self-loop on agent {src}")));
            }
            if !in_neighbors[dst].insert(src) {
                return Err(Error::InvalidGraph(format!("duplicate edge {src} -> {dst}")));
            }
        }
        Ok(Self { n, in_neighbors })
    }

    /// Directed ring `0 → 1 → … → n-1 → 0`.
    pub fn ring(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::new(n, &edges).expect("ring is well formed")
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn in_neighbors(&self, i: usize) -> &BTreeSet<usize> {
        &self.in_neighbors[i]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<_> = self
            .in_neighbors
            .iter()
            .enumerate()
            .flat_map(|(dst, srcs)| srcs.iter().map(move |&src| (src, dst)))
            .collect();
        edges.sort_unstable();
        edges
    }

    pub fn max_in_degree(&self) -> usize {
        self.in_neighbors.iter().map(BTreeSet::len).max().unwrap_or(0)
    }

    /// Relabels agent `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(s, d)| (perm[s], perm[d]))
            .collect();
        Self::new(self.n, &edges)
    }

    /// Parses the plain-text edge list: first non-comment line is `n`, every
    /// following line is `src dst` with 1-based agent ids.
    pub fn parse_edge_list(text: &str, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (first, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing agent count".into()))?;
        let n: usize = header
            .parse()
            .map_err(|_| parse_err(first, format!("bad agent count {header:?}")))?;
        let mut edges = Vec::new();
        for (line, l) in lines {
            let ids: Vec<&str> = l.split_whitespace().collect();
            if ids.len() != 2 {
                return Err(parse_err(line, format!("expected `src dst`, got {l:?}")));
            }
            let id = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(v) if (1..=n).contains(&v) => Ok(v - 1),
                    _ => Err(parse_err(line, format!("agent id {s:?} not in 1..={n}"))),
                }
            };
            edges.push((id(ids[0])?, id(ids[1])?));
        }
        Self::new(n, &edges).map_err(|e| parse_err(0, e.to_string()))
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text, path)
    }

    /// Inverse of [`DiGraph::parse_edge_list`].
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for (s, d) in self.edges() {
            let _ = writeln!(out, "{} {}", s + 1, d + 1);
        }
        out
    }

    /// Erdős–Rényi digraph where each ordered pair is an edge with
    /// probability `p`, redrawn until strongly connected. Attempt `t` draws
    /// from the `(seed, Graph, 0, t)` stream.
    pub fn random_strongly_connected(n: usize, p: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("random graph needs n >= 2".into()));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!("edge probability {p} not in (0, 1]")));
        }
        const MAX_ATTEMPTS: u64 = 10_000;
        for attempt in 0..MAX_ATTEMPTS {
            let mut rng = rng::stream(seed, Purpose::Graph, 0, attempt);
            let mut edges = Vec::new();
            for src in 0..n {
                for dst in 0..n {
                    if src != dst && rng.gen::<f64>() < p {
                        edges.push((src, dst));
                    }
                }
            }
            let g = Self::new(n, &edges)?;
            if check_strong_connectivity(&g) {
                return Ok(g);
            }
        }
        Err(Error::InvalidParameter(format!(
            "no strongly connected graph with n={n}, p={p} after {MAX_ATTEMPTS} draws"
        )))
    }
}

/// True iff every agent reaches every other agent along directed edges.
pub fn check_strong_connectivity(g: &DiGraph) -> bool {
    let n = g.agents();
    let mut out_neighbors = vec![Vec::new(); n];
    for (i, srcs) in g.in_neighbors.iter().enumerate() {
        for &j in srcs {
            out_neighbors[j].push(i);
        }
    }
    let reaches_all = |adj: &dyn Fn(usize) -> Vec<usize>| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for u in adj(v) {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    // forward reachability from 0 along out-edges, backward along in-edges
    reaches_all(&|v| out_neighbors[v].clone())
        && reaches_all(&|v| g.in_neighbors[v].iter().copied().collect())
}

/// A nonnegative row-stochastic mixing matrix with its sparse row view
/// (diagonal included) cached for the simulation loop.
#[derive(Clone, Debug)]
pub struct WeightMatrix {
    dense: DMatrix<f64>,
    sparse_rows: Vec<Vec<(usize, f64)>>,
}

impl WeightMatrix {
    /// Validates an arbitrary matrix: square, nonnegative, rows summing to 1.
    pub fn from_dense(w: DMatrix<f64>) -> Result<Self> {
        if w.nrows() != w.ncols() || w.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "weight matrix must be square and nonempty, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        for (i, row) in w.row_iter().enumerate() {
            if row.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("row {i} has a negative or non-finite weight")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidParameter(format!("row {i} sums to {s}, not 1")));
            }
        }
        let sparse_rows = w
            .row_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        Ok(Self { dense: w, sparse_rows })
    }

    pub fn agents(&self) -> usize {
        self.dense.nrows()
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.dense
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dense[(i, j)]
    }

    /// Nonzero `(column, weight)` pairs of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.sparse_rows[i]
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.dense
            .row_iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Row-major CSV, full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.dense.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// `W_ij = 1 / max_i |N_i^-|` for each in-neighbor `j`, remaining mass on the
/// diagonal.
pub fn build_row_stochastic_weights(g: &DiGraph) -> Result<WeightMatrix> {
    if !check_strong_connectivity(g) {
        return Err(Error::NotStronglyConnected);
    }
    let n = g.agents();
    let mut w = DMatrix::zeros(n, n);
    let max_deg = g.max_in_degree();
    if max_deg > 0 {
        let weight = 1.0 / max_deg as f64;
        for i in 0..n {
            let mut off = 0.0;
            for &j in g.in_neighbors(i) {
                w[(i, j)] = weight;
                off += weight;
            }
            w[(i, i)] = 1.0 - off;
        }
    } else {
        w[(0, 0)] = 1.0;
    }
    // 1 - k/m can leave a rounding residue on the diagonal; clamp tiny negatives
    for i in 0..n {
        if w[(i, i)].abs() < 1e-15 {
            w[(i, i)] = 0.0;
        }
    }
    WeightMatrix::from_dense(w)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralQuantities {
    /// ‖I − W‖_F
    pub fro_i_minus_w: f64,
    /// Smallest eigenvalue above [`EIGEN_TOLERANCE`] of the symmetric part of `I − W`.
    pub lambda_min_tilde: f64,
}

pub fn spectral_quantities(w: &WeightMatrix) -> Result<SpectralQuantities> {
    let n = w.agents();
    let lap = DMatrix::<f64>::identity(n, n) - w.dense();
    let fro_i_minus_w = lap.norm();
    let sym = (&lap + lap.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lambda_min_tilde = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|&v| v > EIGEN_TOLERANCE)
        .fold(f64::INFINITY, f64::min);
    if !lambda_min_tilde.is_finite() {
        return Err(Error::DegenerateSpectrum {
            tolerance: EIGEN_TOLERANCE,
        });
    }
    Ok(SpectralQuantities {
        fro_i_minus_w,
        lambda_min_tilde,
    })
}
