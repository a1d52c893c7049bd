//! Isomap: k-nearest-neighbor graph, shortest-path geodesics and classical
//! MDS, plus the end-to-end charting pipeline.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::channel::{Chart, ChannelDataset, DistanceMatrix, Points};
use crate::distance::{build_distance_matrix, Measure};
use crate::error::{Error, Result, Stage};
use crate::linalg::{leading_eigenpairs, SolverOptions, SymMatrix};

/// Undirected weighted graph; adjacency lists are sorted by neighbor index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl NeighborhoodGraph {
    /// Builds a graph from undirected edges; duplicate edges collapse.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); node_count];
        for &(i, j, w) in edges {
            if i >= node_count || j >= node_count || i == j {
                return Err(Error::Domain(format!("invalid edge ({i}, {j})")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Domain(format!("edge ({i}, {j}) has weight {w}")));
            }
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for list in &mut adjacency {
            list.sort_by_key(|e| e.0);
            list.dedup_by_key(|e| e.0);
        }
        Ok(Self { adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search_by_key(&j, |e| e.0).is_ok()
    }

    /// Component label per node; labels are numbered by lowest member.
    pub fn component_labels(&self) -> (Vec<usize>, usize) {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    pub fn component_sizes(&self) -> Vec<usize> {
        let (label, count) = self.component_labels();
        let mut sizes = vec![0; count];
        label.iter().for_each(|&l| sizes[l] += 1);
        sizes
    }

    pub fn is_connected(&self) -> bool {
        self.component_labels().1 <= 1
    }

    fn insert_edge(&mut self, i: usize, j: usize, w: f64) {
        for (a, b) in [(i, j), (j, i)] {
            let list = &mut self.adjacency[a];
            if let Err(pos) = list.binary_search_by_key(&b, |e| e.0) {
                list.insert(pos, (b, w));
            }
        }
    }
}

/// Total order on candidate edges: weight, then lower endpoint, then upper.
fn edge_key_cmp(a: (f64, usize, usize), b: (f64, usize, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

fn edge_key(d: f64, i: usize, j: usize) -> (f64, usize, usize) {
    (d, i.min(j), i.max(j))
}

/// Each node links to its `k` nearest others (ties to the smaller index);
/// the graph keeps an edge if either endpoint selected it.
pub fn knn_graph(distances: &DistanceMatrix, k: usize) -> Result<NeighborhoodGraph> {
    let n = distances.size();
    if k == 0 || k >= n {
        return Err(Error::Domain(format!(
            "neighbor count k={k} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let chosen = crate::exec::map_range(n, |i| {
        let row = distances.row(i);
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let by_distance = |a: &usize, b: &usize| row[*a].total_cmp(&row[*b]).then(a.cmp(b));
        if k < others.len() {
            others.select_nth_unstable_by(k - 1, by_distance);
            others.truncate(k);
        }
        others
    });
    let mut adjacency = vec![Vec::new(); n];
    for (i, list) in chosen.iter().enumerate() {
        for &j in list {
            let w = distances.get(i, j);
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
    }
    for list in &mut adjacency {
        list.sort_by_key(|e| e.0);
        list.dedup_by_key(|e| e.0);
    }
    Ok(NeighborhoodGraph { adjacency })
}

/// What to do when the neighborhood graph falls apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConnectivityPolicy {
    /// Join components with minimal-distance edges.
    #[default]
    Bridge,
    /// Report the component sizes as an error.
    Fail,
}

impl ConnectivityPolicy {
    pub fn name(self) -> &'static str {
        match self {
            ConnectivityPolicy::Bridge => "bridge",
            ConnectivityPolicy::Fail => "fail",
        }
    }
}

impl FromStr for ConnectivityPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bridge" => Ok(ConnectivityPolicy::Bridge),
            "fail" => Ok(ConnectivityPolicy::Fail),
            other => Err(Error::Domain(format!(
                "unknown connectivity policy `{other}` (expected bridge or fail)"
            ))),
        }
    }
}

impl std::fmt::Display for ConnectivityPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Makes the graph connected according to `policy`.
///
/// Bridging repeatedly adds the globally shortest edge joining two different
/// components, which is a minimum spanning tree over the components. It is
/// computed Prim-style in `O(N^2)` time and `O(N)` memory.
pub fn ensure_connected(
    mut graph: NeighborhoodGraph,
    distances: &DistanceMatrix,
    policy: ConnectivityPolicy,
) -> Result<NeighborhoodGraph> {
    let n = graph.node_count();
    if distances.size() != n {
        return Err(Error::Domain(format!(
            "graph has {n} nodes but the distance matrix has size {}",
            distances.size()
        )));
    }
    let (label, count) = graph.component_labels();
    if count <= 1 {
        return Ok(graph);
    }
    if policy == ConnectivityPolicy::Fail {
        return Err(Error::Disconnected {
            sizes: graph.component_sizes(),
        });
    }
    let mut members = vec![Vec::new(); count];
    for (i, &l) in label.iter().enumerate() {
        members[l].push(i);
    }
    let mut in_tree = vec![false; count];
    // best[v]: cheapest edge from node v to the tree
    let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; n];
    let relax = |added: usize, in_tree: &[bool], best: &mut [Option<(f64, usize, usize)>]| {
        for &u in &members[added] {
            let row = distances.row(u);
            for v in 0..n {
                if in_tree[label[v]] {
                    continue;
                }
                let cand = edge_key(row[v], u, v);
                if best[v].is_none_or(|b| edge_key_cmp(cand, b) == Ordering::Less) {
                    best[v] = Some(cand);
                }
            }
        }
    };
    in_tree[0] = true;
    relax(0, &in_tree, &mut best);
    for _ in 1..count {
        let (d, a, b) = best
            .iter()
            .enumerate()
            .filter(|(v, _)| !in_tree[label[*v]])
            .filter_map(|(_, e)| *e)
            .min_by(|x, y| edge_key_cmp(*x, *y))
            .expect("a component outside the tree has candidate edges");
        graph.insert_edge(a, b, d);
        let added = if in_tree[label[a]] { label[b] } else { label[a] };
        in_tree[added] = true;
        relax(added, &in_tree, &mut best);
    }
    Ok(graph)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn dijkstra(graph: &NeighborhoodGraph, source: usize) -> Vec<f64> {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse(HeapEntry(0.0, source)));
    while let Some(Reverse(HeapEntry(d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in graph.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse(HeapEntry(nd, v)));
            }
        }
    }
    dist
}

/// All-pairs shortest path lengths by Dijkstra from every node.
///
/// Entry `(i, j)` with `i < j` is taken from the search rooted at `i` and
/// mirrored, so the result is exactly symmetric.
pub fn geodesic_distances(graph: &NeighborhoodGraph) -> Result<DistanceMatrix> {
    let n = graph.node_count();
    if !graph.is_connected() {
        return Err(Error::Disconnected {
            sizes: graph.component_sizes(),
        });
    }
    let rows = crate::exec::map_range(n, |i| dijkstra(graph, i));
    let mut values = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        for j in (i + 1)..n {
            values[i * n + j] = row[j];
            values[j * n + i] = row[j];
        }
    }
    DistanceMatrix::from_values(n, values)
}

/// Output of classical MDS.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingResult {
    pub chart: Chart,
    /// Leading eigenvalues of the centered Gram matrix, descending, clipped at 0.
    pub eigenvalues: Vec<f64>,
    /// `sqrt(sum (D - D_chart)^2 / sum D^2)` over all pairs.
    pub geodesic_stress: f64,
    /// Set when a leading eigenvalue was negative before clipping.
    pub negative_eigenvalues_clipped: bool,
    pub iterations: usize,
}

/// Double-centered Gram matrix `B = -1/2 J (D∘D) J`.
pub fn centered_gram(distances: &DistanceMatrix) -> SymMatrix {
    let n = distances.size();
    let sq: Vec<f64> = distances.values().iter().map(|d| d * d).collect();
    let row_mean: Vec<f64> = sq.chunks(n.max(1)).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut b = vec![0.0; n * n];
    crate::exec::for_each_row(&mut b, n, |i, row| {
        for (j, x) in row.iter_mut().enumerate() {
            *x = -0.5 * (sq[i * n + j] - (row_mean[i] + row_mean[j]) + grand);
        }
    });
    SymMatrix::new(n, b).expect("square by construction")
}

/// Embeds a distance matrix in `target_dim` dimensions.
pub fn classical_mds(distances: &DistanceMatrix, target_dim: usize) -> Result<EmbeddingResult> {
    let n = distances.size();
    if target_dim == 0 || target_dim >= n {
        return Err(Error::Domain(format!(
            "chart dimension {target_dim} must lie in 1..{n}"
        )));
    }
    let b = centered_gram(distances);
    let pairs = leading_eigenpairs(&b, target_dim, SolverOptions::default())?;
    let negative = pairs.values.iter().any(|&v| v < 0.0);
    let eigenvalues: Vec<f64> = pairs.values.iter().map(|v| v.max(0.0)).collect();
    let mut data = vec![0.0; n * target_dim];
    for (c, (lambda, v)) in eigenvalues.iter().zip(&pairs.vectors).enumerate() {
        let s = lambda.sqrt();
        for i in 0..n {
            data[i * target_dim + c] = s * v[i];
        }
    }
    let mut points = Points::new(target_dim, data)?;
    center_columns(&mut points);
    let chart = Chart::new(points)?;
    let geodesic_stress = stress(distances, chart.points());
    Ok(EmbeddingResult {
        chart,
        eigenvalues,
        geodesic_stress,
        negative_eigenvalues_clipped: negative,
        iterations: pairs.iterations,
    })
}

/// Removes the residual column means left by the iterative eigensolver.
fn center_columns(points: &mut Points) {
    let means = points.column_means();
    let dim = points.dim();
    let mut data = points.as_slice().to_vec();
    for row in data.chunks_mut(dim) {
        for (x, m) in row.iter_mut().zip(&means) {
            *x -= m;
        }
    }
    *points = Points::new(dim, data).expect("same shape");
}

fn stress(distances: &DistanceMatrix, chart: &Points) -> f64 {
    let n = distances.size();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = distances.get(i, j);
            let e = d - chart.distance(i, j);
            num += e * e;
            den += d * d;
        }
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}

/// Parameters of [`chart_channels`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartParams {
    pub dim: usize,
    pub k: usize,
    pub measure: Measure,
    pub connectivity: ConnectivityPolicy,
}

impl Default for ChartParams {
    fn default() -> Self {
        Self {
            dim: 2,
            k: 30,
            measure: Measure::PhaseInsensitive,
            connectivity: ConnectivityPolicy::Bridge,
        }
    }
}

/// Channel charting: pairwise distances, neighborhood graph, geodesics, MDS.
pub fn chart_channels(dataset: &ChannelDataset, params: &ChartParams) -> Result<EmbeddingResult> {
    chart_channels_timed(dataset, params, |_, _| {})
}

/// [`chart_channels`] reporting the wall time of each completed stage.
/// Errors carry the label of the stage that failed.
pub fn chart_channels_timed(
    dataset: &ChannelDataset,
    params: &ChartParams,
    mut on_stage: impl FnMut(Stage, Duration),
) -> Result<EmbeddingResult> {
    let mut timed = |stage: Stage, start: Instant| on_stage(stage, start.elapsed());

    let t = Instant::now();
    let distances = build_distance_matrix(dataset, params.measure).map_err(|e| e.at(Stage::Distance))?;
    timed(Stage::Distance, t);

    let t = Instant::now();
    let graph = knn_graph(&distances, params.k)
        .and_then(|g| ensure_connected(g, &distances, params.connectivity))
        .map_err(|e| e.at(Stage::Graph))?;
    timed(Stage::Graph, t);

    let t = Instant::now();
    let geodesics = geodesic_distances(&graph).map_err(|e| e.at(Stage::Geodesics))?;
    drop(graph);
    timed(Stage::Geodesics, t);

    let t = Instant::now();
    let result = classical_mds(&geodesics, params.dim).map_err(|e| e.at(Stage::Mds))?;
    timed(Stage::Mds, t);
    Ok(result)
}
