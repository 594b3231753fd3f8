//! Weighted graphs, their Laplacians, and the exact-spectrum oracle.
//!
//! Networks are undirected weighted graphs with nonnegative couplings and no
//! self-loops. The Laplacian L = D − W (degree matrix minus adjacency) has
//! zero row sums by construction; for a symmetric adjacency it is positive
//! semidefinite, its smallest eigenvalue is 0, and the multiplicity of 0
//! equals the number of connected components.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Symmetric weighted adjacency with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    w: DMatrix<f64>,
}

impl WeightedGraph {
    /// Wraps an adjacency matrix, checking symmetry, a zero diagonal and
    /// nonnegative weights.
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::InvalidArgument(format!(
                "adjacency must be square, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        let n = w.nrows();
        for i in 0..n {
            if w[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "self-loop at node {i}: diagonal entry {}",
                    w[(i, i)]
                )));
            }
            for j in 0..n {
                let wij = w[(i, j)];
                if !wij.is_finite() || wij < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "weight at ({i},{j}) must be finite and nonnegative, got {wij}"
                    )));
                }
                if (wij - w[(j, i)]).abs() != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "adjacency not symmetric at ({i},{j}): {} vs {}",
                        wij,
                        w[(j, i)]
                    )));
                }
            }
        }
        Ok(Self { w })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Number of unordered node pairs with nonzero weight.
    pub fn edge_count(&self) -> usize {
        let n = self.n();
        let mut count = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.w[(i, j)] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// Serializes as CSV with one undirected edge per line: `i,j,weight` with
    /// i < j. Zero-weight pairs are omitted.
    pub fn to_edge_list_csv(&self) -> String {
        let mut out = String::from("i,j,weight\n");
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.w[(i, j)];
                if w != 0.0 {
                    out.push_str(&format!("{i},{j},{w}\n"));
                }
            }
        }
        out
    }

    /// Parses the edge-list CSV produced by [`to_edge_list_csv`]. The node
    /// count is explicit because isolated nodes leave no trace in the list.
    ///
    /// [`to_edge_list_csv`]: WeightedGraph::to_edge_list_csv
    pub fn from_edge_list_csv(text: &str, n: usize) -> Result<Self> {
        let mut w = DMatrix::zeros(n, n);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("i,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::InvalidArgument(format!(
                    "edge list line {}: expected `i,j,weight`, got {line:?}",
                    lineno + 1
                )));
            }
            let parse_idx = |s: &str| -> Result<usize> {
                s.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!(
                        "edge list line {}: bad node index {s:?}",
                        lineno + 1
                    ))
                })
            };
            let i = parse_idx(fields[0])?;
            let j = parse_idx(fields[1])?;
            let weight: f64 = fields[2].trim().parse().map_err(|_| {
                Error::InvalidArgument(format!(
                    "edge list line {}: bad weight {:?}",
                    lineno + 1,
                    fields[2]
                ))
            })?;
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge list line {}: node index out of range for n={n}",
                    lineno + 1
                )));
            }
            if i == j {
                return Err(Error::InvalidArgument(format!(
                    "edge list line {}: self-loop on node {i}",
                    lineno + 1
                )));
            }
            w[(i, j)] = weight;
            w[(j, i)] = weight;
        }
        Self::new(w)
    }

    /// Laplacian L = D − W.
    pub fn laplacian(&self) -> Laplacian {
        let n = self.n();
        let mut l = -self.w.clone();
        for i in 0..n {
            l[(i, i)] = self.w.row(i).sum();
        }
        Laplacian { l }
    }
}

/// Graph Laplacian, kept separate from the adjacency so downstream code can
/// state what it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    l: DMatrix<f64>,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }
}

/// Erdos-Renyi graph on `n` nodes: each pair is linked with probability
/// `p_edge`, and every present edge gets an independent Uniform[0,1) weight.
///
/// The draw order is fixed (pairs in lexicographic order, coin before
/// weight), so a seed pins the graph exactly.
pub fn erdos_renyi_weighted(n: usize, p_edge: f64, seed: u64) -> Result<WeightedGraph> {
    if n == 0 {
        return Err(Error::InvalidArgument("graph needs at least one node".into()));
    }
    if !(0.0..=1.0).contains(&p_edge) {
        return Err(Error::InvalidArgument(format!(
            "edge probability must lie in [0,1], got {p_edge}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p_edge) {
                let weight: f64 = rng.random_range(0.0..1.0);
                w[(i, j)] = weight;
                w[(j, i)] = weight;
            }
        }
    }
    WeightedGraph::new(w)
}

/// Complete graph on `n` nodes with independent Uniform[0,1) weights on every
/// pair. Same fixed draw order as [`erdos_renyi_weighted`].
pub fn dense_uniform_graph(n: usize, seed: u64) -> Result<WeightedGraph> {
    if n == 0 {
        return Err(Error::InvalidArgument("graph needs at least one node".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let weight: f64 = rng.random_range(0.0..1.0);
            w[(i, j)] = weight;
            w[(j, i)] = weight;
        }
    }
    WeightedGraph::new(w)
}

/// Real eigenvalues sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSpectrum {
    values: Vec<f64>,
}

impl RealSpectrum {
    /// Wraps raw eigenvalues, sorting them ascending.
    pub fn from_values(mut values: Vec<f64>) -> RealSpectrum {
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        RealSpectrum { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// k-th raw spectral moment, mean of eigenvalue k-th powers. k = 0 gives 1.
    pub fn moment(&self, k: usize) -> f64 {
        if self.values.is_empty() {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        let sum: f64 = self.values.iter().map(|v| v.powi(k as i32)).sum();
        sum / self.values.len() as f64
    }
}

/// Eigenvalues of a symmetric Laplacian, sorted ascending.
///
/// Uses a symmetric eigensolver when the matrix is exactly symmetric and a
/// Schur decomposition otherwise; in the latter case eigenvalues whose
/// imaginary part exceeds `1e-10 * ||L||` are rejected as non-real.
pub fn exact_spectrum(laplacian: &Laplacian) -> Result<RealSpectrum> {
    let l = laplacian.matrix();
    let scale = l.norm().max(1.0);
    let mut values: Vec<f64> = if l == &l.transpose() {
        let eig = nalgebra::SymmetricEigen::try_new(l.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
        eig.eigenvalues.iter().copied().collect()
    } else {
        let schur = nalgebra::Schur::try_new(l.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
        let complex = schur.complex_eigenvalues();
        let mut out = Vec::with_capacity(complex.len());
        for z in complex.iter() {
            if z.im.abs() > 1e-10 * scale {
                return Err(Error::Numerical(format!(
                    "eigenvalue {z} has imaginary part beyond tolerance; matrix is not \
                     effectively symmetric"
                )));
            }
            out.push(z.re);
        }
        out
    };
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(RealSpectrum { values })
}

/// tr(M^k) / dim(M), the k-th spectral moment without an eigendecomposition.
/// k = 0 returns 1 by convention.
pub fn spectral_moment(m: &DMatrix<f64>, k: usize) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!(
            "spectral moment needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidArgument("empty matrix has no moments".into()));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let mut acc = m.clone();
    for _ in 1..k {
        acc = &acc * m;
    }
    Ok(acc.trace() / m.nrows() as f64)
}
