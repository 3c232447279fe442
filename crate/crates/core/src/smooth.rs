//! Graph smoothing.
//!
//! The raw ball-query adjacency `A` is directional: a sparse-region point uses
//! the full radius while a dense-region point stops at its k-th neighbor. The
//! smoothing pipeline is
//!
//! * [`symmetric_refine`]: `A_sym = ⌊(A + Aᵀ)/2⌋`, i.e. keep mutual edges only,
//! * [`symmetric_normalize`]: `Ã = D^{-1/2} A_sym D^{-1/2}`,
//! * [`smooth`]: `S_T = Σ_{t=0}^{T} (αÃ)^t`, a truncated von Neumann kernel,
//! * [`reselect_neighborhoods`]: top-K of every row of `S_T`.
//!
//! [`oracle`] holds the exact kernel and walk enumeration used to check them.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cloud::{dist2, PointCloud};
use crate::config::{check_alpha, SmoothingConfig};
use crate::construct::ball_query_all;
use crate::error::{Error, Result};
use crate::index::SpatialIndex;
use crate::neighbors::NeighborList;
use crate::par;
use crate::sparse::{hex, SparseAdjacency};

/// Keeps `(i, j)` iff both `a_ij` and `a_ji` are set.
///
/// On binary input this is exactly the elementwise floor of `(A + Aᵀ)/2`. Self
/// loops survive since both directions of `(i, i)` are the same entry.
pub fn symmetric_refine(adj: &SparseAdjacency) -> Result<SparseAdjacency> {
    adj.require_binary()?;
    let t = adj.transpose();
    let rows = par::map_indices(adj.n(), |i| {
        let (a, _) = adj.row(i);
        let (b, _) = t.row(i);
        let mut out = Vec::with_capacity(a.len().min(b.len()));
        let (mut x, mut y) = (0, 0);
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                Ordering::Less => x += 1,
                Ordering::Greater => y += 1,
                Ordering::Equal => {
                    out.push((a[x], 1.0));
                    x += 1;
                    y += 1;
                }
            }
        }
        out
    });
    SparseAdjacency::from_rows(adj.n(), rows, true)
}

/// `ã_ij = 1/√(d_i d_j)` with `d_i` the nonzero count of row `i` (self loop included).
///
/// Rows with no entries stay empty.
pub fn symmetric_normalize(adj_sym: &SparseAdjacency) -> Result<SparseAdjacency> {
    if !adj_sym.is_symmetric() {
        return Err(Error::InvalidAdjacency(
            "symmetric normalization needs a symmetric adjacency".into(),
        ));
    }
    adj_sym.require_binary()?;
    let degree: Vec<f64> = (0..adj_sym.n()).map(|i| adj_sym.row_nnz(i) as f64).collect();
    let rows = (0..adj_sym.n())
        .map(|i| {
            let (cols, _) = adj_sym.row(i);
            cols.iter()
                .map(|&j| (j, 1.0 / (degree[i] * degree[j]).sqrt()))
                .collect()
        })
        .collect();
    SparseAdjacency::from_rows(adj_sym.n(), rows, true)
}

/// Reference digests of the inputs a [`SmoothedGraph`] was computed from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub adjacency_sha256: String,
    pub config_sha256: String,
}

/// `S_T` together with the parameters that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedGraph {
    pub s_matrix: SparseAdjacency,
    pub order: usize,
    pub alpha: f64,
    pub provenance: Provenance,
}

impl SmoothedGraph {
    /// Checks the structural guarantees of `S_T`: symmetric, nonnegative, diagonal
    /// at least 1 and at least as large as every other entry of its row.
    ///
    /// The last property needs self loops in the normalized adjacency.
    pub fn check_invariants(&self) -> Result<()> {
        let s = &self.s_matrix;
        if !s.is_symmetric() {
            return Err(Error::Invariant("S_T is not flagged symmetric".into()));
        }
        for i in 0..s.n() {
            let diag = s.get(i, i).unwrap_or(0.0);
            if diag < 1.0 {
                return Err(Error::Invariant(format!("S_T({i},{i}) = {diag} < 1")));
            }
            let (cols, vals) = s.row(i);
            for (&j, &w) in cols.iter().zip(vals) {
                if w < 0.0 {
                    return Err(Error::Invariant(format!("S_T({i},{j}) = {w} is negative")));
                }
                if j != i && w > diag {
                    return Err(Error::Invariant(format!(
                        "S_T({i},{j}) = {w} exceeds the diagonal {diag}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct RowScratch {
    acc: Vec<f64>,
    mark: Vec<bool>,
    touched: Vec<usize>,
}

impl RowScratch {
    fn new(n: usize) -> Self {
        Self {
            acc: vec![0.0; n],
            mark: vec![false; n],
            touched: Vec::new(),
        }
    }
}

/// `alpha · A · P`, row by row. Each output row accumulates in a fixed column
/// order, so the result does not depend on how rows are scheduled.
fn scaled_product(
    a: &SparseAdjacency,
    alpha: f64,
    p: &SparseAdjacency,
    prune: f64,
) -> Result<SparseAdjacency> {
    let n = a.n();
    let rows = par::map_indices_with(
        n,
        || RowScratch::new(n),
        |s, i| {
            let (a_cols, a_vals) = a.row(i);
            for (&k, &a_ik) in a_cols.iter().zip(a_vals) {
                let w = alpha * a_ik;
                let (p_cols, p_vals) = p.row(k);
                for (&j, &p_kj) in p_cols.iter().zip(p_vals) {
                    if !s.mark[j] {
                        s.mark[j] = true;
                        s.touched.push(j);
                    }
                    s.acc[j] += w * p_kj;
                }
            }
            s.touched.sort_unstable();
            let mut row = Vec::with_capacity(s.touched.len());
            for &j in &s.touched {
                let v = s.acc[j];
                s.acc[j] = 0.0;
                s.mark[j] = false;
                // Underflow can produce exact zeros, which are never stored.
                if v > 0.0 && v >= prune {
                    row.push((j, v));
                }
            }
            s.touched.clear();
            row
        },
    );
    SparseAdjacency::from_rows(n, rows, false)
}

fn add(x: &SparseAdjacency, y: &SparseAdjacency) -> Result<SparseAdjacency> {
    let rows = par::map_indices(x.n(), |i| {
        let (xc, xv) = x.row(i);
        let (yc, yv) = y.row(i);
        let mut out = Vec::with_capacity(xc.len() + yc.len());
        let (mut a, mut b) = (0, 0);
        while a < xc.len() || b < yc.len() {
            let ord = match (xc.get(a), yc.get(b)) {
                (Some(ca), Some(cb)) => ca.cmp(cb),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    out.push((xc[a], xv[a]));
                    a += 1;
                }
                Ordering::Greater => {
                    out.push((yc[b], yv[b]));
                    b += 1;
                }
                Ordering::Equal => {
                    out.push((xc[a], xv[a] + yv[b]));
                    a += 1;
                    b += 1;
                }
            }
        }
        out
    });
    SparseAdjacency::from_rows(x.n(), rows, false)
}

/// Averages `m` with its transpose over the union pattern. Only needed when
/// pruning may have dropped one side of a mirrored pair.
fn symmetrize_mean(m: &SparseAdjacency) -> Result<SparseAdjacency> {
    let sum = add(m, &m.transpose())?;
    let rows = (0..sum.n())
        .map(|i| {
            let (c, v) = sum.row(i);
            c.iter().zip(v).map(|(&j, &w)| (j, 0.5 * w)).collect()
        })
        .collect();
    SparseAdjacency::from_rows(sum.n(), rows, true)
}

/// `S_T = Σ_{t=0}^{T} (αÃ)^t` by iterated multiply-accumulate
/// `P_{t+1} = αÃ·P_t`, `S ← S + P_{t+1}`, starting from `P_0 = S = I`.
pub fn smooth(adj_norm: &SparseAdjacency, cfg: &SmoothingConfig) -> Result<SmoothedGraph> {
    check_alpha(cfg.alpha)?;
    if !adj_norm.is_symmetric() {
        return Err(Error::InvalidAdjacency(
            "smoothing needs a symmetric normalized adjacency".into(),
        ));
    }
    let n = adj_norm.n();
    let mut power = SparseAdjacency::identity(n);
    let mut sum = SparseAdjacency::identity(n);
    for _ in 0..cfg.order {
        power = scaled_product(adj_norm, cfg.alpha, &power, cfg.prune)?;
        sum = add(&sum, &power)?;
    }
    let s_matrix = if cfg.prune > 0.0 {
        symmetrize_mean(&sum)?
    } else {
        let (n, rows) = (sum.n(), (0..sum.n()).map(|i| row_vec(&sum, i)).collect());
        SparseAdjacency::from_rows(n, rows, true)?
    };
    Ok(SmoothedGraph {
        s_matrix,
        order: cfg.order,
        alpha: cfg.alpha,
        provenance: Provenance {
            adjacency_sha256: adj_norm.content_hash(),
            config_sha256: config_digest(cfg),
        },
    })
}

fn row_vec(m: &SparseAdjacency, i: usize) -> Vec<(usize, f64)> {
    let (c, v) = m.row(i);
    c.iter().copied().zip(v.iter().copied()).collect()
}

fn config_digest(cfg: &SmoothingConfig) -> String {
    let mut h = Sha256::new();
    h.update(cfg.alpha.to_bits().to_le_bytes());
    h.update((cfg.order as u64).to_le_bytes());
    h.update(cfg.prune.to_bits().to_le_bytes());
    hex(&h.finalize())
}

/// The `top_k` largest entries of every row of `S_T`: the optimized neighborhoods `N′(i)`.
///
/// Lists are ordered by descending weight. Equal weights fall back to the
/// point itself first, then smaller Euclidean distance to `p_i`, then smaller index.
pub fn reselect_neighborhoods(
    sg: &SmoothedGraph,
    cloud: &PointCloud,
    top_k: usize,
) -> Result<NeighborList> {
    let s = &sg.s_matrix;
    if s.n() != cloud.len() {
        return Err(Error::Shape {
            what: "smoothed graph size vs cloud",
            expected: cloud.len(),
            found: s.n(),
        });
    }
    if top_k == 0 {
        return Err(Error::InvalidConfig("top_k must be at least 1".into()));
    }
    let lists = par::map_indices(s.n(), |i| {
        let (cols, vals) = s.row(i);
        let p = cloud.point(i);
        let mut entries: Vec<(usize, f64, f64)> = cols
            .iter()
            .zip(vals)
            .map(|(&j, &w)| (j, w, dist2(p, cloud.point(j))))
            .collect();
        entries.sort_unstable_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then((a.0 != i).cmp(&(b.0 != i)))
                .then(a.2.total_cmp(&b.2))
                .then(a.0.cmp(&b.0))
        });
        entries.truncate(top_k);
        entries.into_iter().map(|e| e.0).collect()
    });
    NeighborList::new(lists, top_k)
}

/// Degree-pattern role of a node in a directed adjacency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRole {
    /// `d_out < d_in <= k`.
    BoundaryLike,
    /// `d_out > k` and `d_in = k`.
    JunctionLike,
    Interior,
}

/// Labels each node from its row count `d_out` and column count `d_in`.
pub fn boundary_junction_classify(adj: &SparseAdjacency, k: usize) -> Vec<NodeRole> {
    let d_in = adj.column_counts();
    (0..adj.n())
        .map(|i| {
            let d_out = adj.row_nnz(i);
            if d_out < d_in[i] && d_in[i] <= k {
                NodeRole::BoundaryLike
            } else if d_out > k && d_in[i] == k {
                NodeRole::JunctionLike
            } else {
                NodeRole::Interior
            }
        })
        .collect()
}

/// Every intermediate of the smoothing pipeline for one cloud.
#[derive(Clone, Debug)]
pub struct Optimized {
    pub raw: NeighborList,
    pub adjacency: SparseAdjacency,
    pub refined: SparseAdjacency,
    pub normalized: SparseAdjacency,
    pub smoothed: SmoothedGraph,
    pub neighbors: NeighborList,
}

/// Ball query, refinement, normalization, smoothing and reselection in one call.
pub fn optimize(cloud: &PointCloud, cfg: &SmoothingConfig) -> Result<Optimized> {
    cfg.validate()?;
    let index = SpatialIndex::build(cloud);
    let raw = ball_query_all(&index, cfg)?;
    let adjacency = raw.to_adjacency();
    let refined = symmetric_refine(&adjacency)?;
    let normalized = symmetric_normalize(&refined)?;
    let smoothed = smooth(&normalized, cfg)?;
    let neighbors = reselect_neighborhoods(&smoothed, cloud, cfg.top_k)?;
    Ok(Optimized {
        raw,
        adjacency,
        refined,
        normalized,
        smoothed,
        neighbors,
    })
}

/// Exact references for the smoothing operators. Dense and guarded to small sizes.
pub mod oracle {
    use nalgebra::DMatrix;

    use super::*;

    pub const KERNEL_LIMIT: usize = 512;
    pub const PATH_SUM_MAX_N: usize = 64;
    pub const PATH_SUM_MAX_LEN: usize = 4;

    /// `K = (I − αÃ)^{-1}` by dense LU solve.
    pub fn exact_von_neumann(adj_norm: &SparseAdjacency, alpha: f64) -> Result<DMatrix<f64>> {
        check_alpha(alpha)?;
        let n = adj_norm.n();
        if n > KERNEL_LIMIT {
            return Err(Error::SizeGuard {
                what: "exact_von_neumann",
                size: n,
                limit: KERNEL_LIMIT,
            });
        }
        let mut m = DMatrix::<f64>::identity(n, n);
        for (i, j, w) in adj_norm.triplets() {
            m[(i, j)] -= alpha * w;
        }
        m.lu()
            .solve(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::Invariant("I − αÃ is singular".into()))
    }

    /// Sum over all walks of exactly `len` steps from `i` to `j` of the product
    /// of edge weights along the walk; equals `(Ã^len)_ij`.
    pub fn path_sum(adj_norm: &SparseAdjacency, i: usize, j: usize, len: usize) -> Result<f64> {
        let n = adj_norm.n();
        if n > PATH_SUM_MAX_N {
            return Err(Error::SizeGuard {
                what: "path_sum dimension",
                size: n,
                limit: PATH_SUM_MAX_N,
            });
        }
        if len > PATH_SUM_MAX_LEN {
            return Err(Error::SizeGuard {
                what: "path_sum walk length",
                size: len,
                limit: PATH_SUM_MAX_LEN,
            });
        }
        if i >= n || j >= n {
            return Err(Error::out_of_range("node index", format!("({i}, {j}) with n = {n}")));
        }
        Ok(walks(adj_norm, i, j, len, 1.0))
    }

    fn walks(adj: &SparseAdjacency, at: usize, target: usize, left: usize, weight: f64) -> f64 {
        if left == 0 {
            return if at == target { weight } else { 0.0 };
        }
        let (cols, vals) = adj.row(at);
        cols.iter()
            .zip(vals)
            .map(|(&next, &w)| walks(adj, next, target, left - 1, weight * w))
            .sum()
    }
}
