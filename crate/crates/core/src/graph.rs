//! Weighted undirected graphs: validated construction, Laplacians, the three
//! benchmark graph families, and a plain-text edge-list interchange format.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed;

const SYMMETRY_TOL: f64 = 1e-12;
const MAX_CONNECT_RETRIES: usize = 32;
const ROLE_GRAPH_RETRY: u64 = 0x47;

/// Undirected weighted graph with nonnegative weights and no self-loops.
/// Connectivity is computed at construction and reported, never enforced.
#[derive(Debug, Clone)]
pub struct Graph {
    weights: DMatrix<f64>,
    connected: bool,
}

impl Graph {
    /// Validates a weight matrix: square, symmetric within `1e-12`,
    /// nonnegative, zero diagonal.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = weights.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        for j in 0..cols {
            for i in 0..rows {
                let w = weights[(i, j)];
                if i == j && w != 0.0 {
                    return Err(Error::SelfLoop { vertex: i, weight: w });
                }
                if w < 0.0 {
                    return Err(Error::NegativeWeight {
                        row: i,
                        col: j,
                        weight: w,
                    });
                }
                if i < j {
                    let wt = weights[(j, i)];
                    if (w - wt).abs() > SYMMETRY_TOL {
                        return Err(Error::NonSymmetric {
                            row: i,
                            col: j,
                            a: w,
                            b: wt,
                        });
                    }
                }
            }
        }
        let connected = is_connected(&weights);
        Ok(Graph { weights, connected })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Weighted degree of every vertex (row sums of the weight matrix).
    pub fn degrees(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(n, |i, _| self.weights.row(i).sum())
    }

    /// Number of undirected edges (nonzero upper-triangle entries).
    pub fn edge_count(&self) -> usize {
        let n = self.n();
        let mut count = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.weights[(i, j)] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// Serializes to the edge-list format: first line is the vertex count,
    /// then one `u v w` line per edge with `u < v`, ascending.
    pub fn to_edge_list(&self) -> String {
        let n = self.n();
        let mut out = format!("{n}\n");
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.weights[(i, j)];
                if w != 0.0 {
                    out.push_str(&format!("{i} {j} {w}\n"));
                }
            }
        }
        out
    }

    /// Parses the edge-list format produced by [`Graph::to_edge_list`].
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let n: usize = header
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad vertex count line: {header:?}")))?;
        let mut weights = DMatrix::zeros(n, n);
        for (idx, line) in lines {
            let mut parts = line.split_whitespace();
            let (u, v, w) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(u), Some(v), Some(w), None) => (u, v, w),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected `u v w`, got {line:?}",
                        idx + 1
                    )))
                }
            };
            let u: usize = u
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad vertex {u:?}", idx + 1)))?;
            let v: usize = v
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad vertex {v:?}", idx + 1)))?;
            let w: f64 = w
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad weight {w:?}", idx + 1)))?;
            for &vertex in [u, v].iter() {
                if vertex >= n {
                    return Err(Error::IndexOutOfRange { index: vertex, n });
                }
            }
            weights[(u, v)] = w;
            weights[(v, u)] = w;
        }
        Graph::from_weights(weights)
    }
}

/// Degree vector together with the combinatorial Laplacian `L = D - A`.
#[derive(Debug, Clone)]
pub struct DegreeLaplacian {
    degrees: DVector<f64>,
    matrix: DMatrix<f64>,
}

impl DegreeLaplacian {
    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Combinatorial Laplacian of a graph. Row sums vanish by construction.
pub fn laplacian(graph: &Graph) -> DegreeLaplacian {
    let degrees = graph.degrees();
    let mut matrix = -graph.weights().clone();
    for i in 0..graph.n() {
        matrix[(i, i)] = degrees[i];
    }
    DegreeLaplacian { degrees, matrix }
}

fn is_connected(weights: &DMatrix<f64>) -> bool {
    let n = weights.nrows();
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut reached = 1;
    while let Some(v) = stack.pop() {
        for u in 0..n {
            if !seen[u] && weights[(v, u)] != 0.0 {
                seen[u] = true;
                reached += 1;
                stack.push(u);
            }
        }
    }
    reached == n
}

/// Random sensor graph: `n` points uniform in the unit square, each connected
/// to its `k` nearest neighbors (symmetrized by union) with Gaussian kernel
/// weights `exp(-d^2 / (2 theta^2))`, `theta` the mean kept-edge distance.
/// Regenerates with derived seeds until connected, up to a bounded number of
/// attempts.
pub fn gen_sensor_knn(n: usize, k: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidParameter("sensor graph needs n >= 1".into()));
    }
    if n > 1 && (k == 0 || k >= n) {
        return Err(Error::InvalidParameter(format!(
            "sensor graph needs 1 <= k < n, got k = {k}, n = {n}"
        )));
    }
    retry_until_connected(seed, |attempt_seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(attempt_seed);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let mut adjacency = vec![false; n * n];
        let mut kept_distances = Vec::new();
        for i in 0..n {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| {
                dist2(points[i], points[a])
                    .partial_cmp(&dist2(points[i], points[b]))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            for &j in order.iter().take(k) {
                if !adjacency[i * n + j] {
                    adjacency[i * n + j] = true;
                    adjacency[j * n + i] = true;
                    kept_distances.push(dist2(points[i], points[j]).sqrt());
                }
            }
        }
        let theta = if kept_distances.is_empty() {
            1.0
        } else {
            (kept_distances.iter().sum::<f64>() / kept_distances.len() as f64).max(1e-12)
        };
        let mut weights = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if adjacency[i * n + j] {
                    let d2 = dist2(points[i], points[j]);
                    let w = (-d2 / (2.0 * theta * theta)).exp();
                    weights[(i, j)] = w;
                    weights[(j, i)] = w;
                }
            }
        }
        Graph::from_weights(weights)
    })
}

/// Erdos-Renyi graph with unit weights: every pair joined independently with
/// probability `p`. Regenerates with derived seeds until connected.
pub fn gen_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidParameter("ER graph needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "ER edge probability must lie in [0, 1], got {p}"
        )));
    }
    retry_until_connected(seed, |attempt_seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(attempt_seed);
        let mut weights = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    weights[(i, j)] = 1.0;
                    weights[(j, i)] = 1.0;
                }
            }
        }
        Graph::from_weights(weights)
    })
}

/// Deterministic 2d lattice with unit weights; vertex `(r, c)` has index
/// `r * cols + c`.
pub fn gen_grid2d(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter(
            "grid needs rows >= 1 and cols >= 1".into(),
        ));
    }
    let n = rows * cols;
    let mut weights = DMatrix::zeros(n, n);
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                weights[(v, v + 1)] = 1.0;
                weights[(v + 1, v)] = 1.0;
            }
            if r + 1 < rows {
                let u = v + cols;
                weights[(v, u)] = 1.0;
                weights[(u, v)] = 1.0;
            }
        }
    }
    Graph::from_weights(weights)
}

fn retry_until_connected<F>(seed: u64, mut generate: F) -> Result<Graph>
where
    F: FnMut(u64) -> Result<Graph>,
{
    for attempt in 0..MAX_CONNECT_RETRIES {
        let attempt_seed = if attempt == 0 {
            seed
        } else {
            seed::mix(seed, attempt as u64, ROLE_GRAPH_RETRY)
        };
        let graph = generate(attempt_seed)?;
        if graph.is_connected() {
            return Ok(graph);
        }
    }
    Err(Error::DisconnectedAfterRetries {
        attempts: MAX_CONNECT_RETRIES,
    })
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}
