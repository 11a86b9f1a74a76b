use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fuzzy::membership;
use super::{build_fuzzy_graph, fit_curve, knn_graph, knn_query, smooth_knn, Edge, FuzzyGraph, Metric};
use crate::math::{cos, powf, sin, sqrt};
use crate::{rng, Error, Matrix, Result};

const INIT_SCALE: f64 = 10.0;
const POWER_ITERATIONS: usize = 500;
const SPECTRAL_GUARD: usize = 10;
const TRANSFORM_EPOCHS: usize = 30;
const TRANSFORM_ALPHA: f64 = 0.25;
const CLIP: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    #[default]
    Spectral,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub n_epochs: usize,
    pub metric: Metric,
    pub init: InitMethod,
    pub out_dims: usize,
    pub seed: u64,
    pub negative_sample_rate: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 15,
            min_dist: 0.1,
            n_epochs: 200,
            metric: Metric::Euclidean,
            init: InitMethod::Spectral,
            out_dims: 2,
            seed: 0,
            negative_sample_rate: 5,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors < 2 {
            return Err(Error::config("n_neighbors must be >= 2"));
        }
        if !(self.out_dims == 2 || self.out_dims == 3) {
            return Err(Error::config("out_dims must be 2 or 3"));
        }
        // spread is fixed at 1
        if !(self.min_dist > 0.0 && self.min_dist < 1.0) {
            return Err(Error::config("min_dist must lie in (0, 1)"));
        }
        if self.negative_sample_rate == 0 {
            return Err(Error::config("negative_sample_rate must be >= 1"));
        }
        Ok(())
    }
}

/// A fitted layout together with everything needed to place new points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: Matrix,
    pub a: f64,
    pub b: f64,
    pub config: EmbeddingConfig,
    pub train_inputs: Matrix,
    pub graph: FuzzyGraph,
    /// False when spectral initialization fell back to random.
    pub spectral_converged: bool,
}

/// kNN graph, fuzzy graph and layout in one call.
pub fn fit_embedding(x: &Matrix, config: &EmbeddingConfig) -> Result<Embedding> {
    config.validate()?;
    let k = config.n_neighbors.min(x.rows().saturating_sub(1));
    let graph = build_fuzzy_graph(&knn_graph(x, k, config.metric)?);
    embed(x, graph, config)
}

pub fn embed(x: &Matrix, graph: FuzzyGraph, config: &EmbeddingConfig) -> Result<Embedding> {
    config.validate()?;
    if graph.n != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            actual: graph.n,
        });
    }
    let (a, b) = fit_curve(config.min_dist);
    let mut rng = rng::seeded(config.seed);
    let (mut coords, spectral_converged) = match config.init {
        InitMethod::Spectral => match spectral_init(&graph, config.out_dims, &mut rng) {
            Some(c) => (c, true),
            None => (random_init(graph.n, config.out_dims, &mut rng), false),
        },
        InitMethod::Random => (random_init(graph.n, config.out_dims, &mut rng), true),
    };
    optimize_layout(&mut coords, &graph, a, b, config, &mut rng);
    Ok(Embedding {
        coords,
        a,
        b,
        config: config.clone(),
        train_inputs: x.clone(),
        graph,
        spectral_converged,
    })
}

fn random_init(n: usize, dims: usize, rng: &mut rng::SeededRng) -> Matrix {
    let data = (0..n * dims)
        .map(|_| rng.random_range(-INIT_SCALE..INIT_SCALE))
        .collect();
    Matrix::from_vec(n, dims, data).expect("shape")
}

/// Spectral-like initial layout scaled to `[-10, 10]`.
///
/// A connected graph is laid out by the leading non-trivial eigenvectors of
/// its normalized adjacency `D^-1/2 W D^-1/2`. When the graph falls apart,
/// each connected component gets its own eigenvector layout, shrunk to fit
/// around a separate anchor point. `None` if any eigenvector computation
/// fails to converge within 500 iterations.
pub fn spectral_init(graph: &FuzzyGraph, dims: usize, rng: &mut rng::SeededRng) -> Option<Matrix> {
    let n = graph.n;
    let (comp, n_comp) = components(graph);
    let mut coords = if n_comp == 1 {
        eigen_layout(n, &graph.edges, dims, rng)?
    } else {
        let anchors = anchors(n_comp, dims);
        let mut coords = Matrix::zeros(n, dims);
        let mut local_index = vec![0usize; n];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
        for i in 0..n {
            local_index[i] = members[comp[i]].len();
            members[comp[i]].push(i);
        }
        let mut sub_edges: Vec<Vec<Edge>> = vec![Vec::new(); n_comp];
        for e in &graph.edges {
            sub_edges[comp[e.i]].push(Edge {
                i: local_index[e.i],
                j: local_index[e.j],
                weight: e.weight,
            });
        }
        for (c, m) in members.iter().enumerate() {
            let local = if m.len() > dims + 1 {
                eigen_layout(m.len(), &sub_edges[c], dims, rng)?
            } else {
                let data = (0..m.len() * dims).map(|_| rng.random_range(-1.0..1.0)).collect();
                Matrix::from_vec(m.len(), dims, data).expect("shape")
            };
            let radius = (0..n_comp)
                .filter(|&o| o != c)
                .map(|o| crate::math::euclidean(&anchors[c], &anchors[o]) / 2.0)
                .fold(f64::INFINITY, f64::min);
            let max = local.as_slice().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            let scale = if max > 0.0 { radius / max } else { 0.0 };
            for (r, &i) in m.iter().enumerate() {
                for d in 0..dims {
                    coords.set(i, d, anchors[c][d] + scale * local.get(r, d));
                }
            }
        }
        coords
    };
    let max = coords.as_slice().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let scale = if max > 0.0 { INIT_SCALE / max } else { 0.0 };
    for v in coords.as_mut_slice() {
        // small jitter separates points that share a coordinate
        *v = *v * scale + rng.random_range(-1e-4..1e-4);
    }
    Some(coords)
}

/// Connected-component id per vertex, numbered by smallest member.
fn components(graph: &FuzzyGraph) -> (Vec<usize>, usize) {
    let mut parent: Vec<usize> = (0..graph.n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for e in &graph.edges {
        let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut id = vec![usize::MAX; graph.n];
    let mut comp = vec![0; graph.n];
    let mut count = 0;
    for i in 0..graph.n {
        let root = find(&mut parent, i);
        if id[root] == usize::MAX {
            id[root] = count;
            count += 1;
        }
        comp[i] = id[root];
    }
    (comp, count)
}

/// Component anchors: the signed unit axes while they last, else evenly
/// spaced on the unit circle of the first two axes.
fn anchors(count: usize, dims: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|c| {
            let mut v = vec![0.0; dims];
            if count <= 2 * dims {
                v[c / 2] = if c % 2 == 0 { 1.0 } else { -1.0 };
            } else {
                let angle = 2.0 * core::f64::consts::PI * c as f64 / count as f64;
                v[0] = cos(angle);
                v[1] = sin(angle);
            }
            v
        })
        .collect()
}

/// Leading non-trivial eigenvectors of a connected graph's normalized
/// adjacency, by block power iteration on `(I + A) / 2` over a few more
/// vectors than requested. Each step is deflated against the trivial
/// eigenvector and followed by a Rayleigh-Ritz rotation. Converged once the
/// requested Ritz values move by less than 1e-10 between steps.
fn eigen_layout(n: usize, edges: &[Edge], dims: usize, rng: &mut rng::SeededRng) -> Option<Matrix> {
    if n <= dims + 1 {
        return None;
    }
    let p = (dims + SPECTRAL_GUARD).min(n - 1);
    let mut degree = vec![0.0; n];
    for e in edges {
        degree[e.i] += e.weight;
        degree[e.j] += e.weight;
    }
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / sqrt(d) } else { 0.0 })
        .collect();
    let apply = |v: &[f64], out: &mut [f64]| {
        for (o, x) in out.iter_mut().zip(v) {
            *o = 0.5 * x;
        }
        for e in edges {
            let w = 0.5 * e.weight * inv_sqrt[e.i] * inv_sqrt[e.j];
            out[e.i] += w * v[e.j];
            out[e.j] += w * v[e.i];
        }
    };
    let mut trivial: Vec<f64> = degree.iter().map(|d| sqrt(*d)).collect();
    if normalize(&mut trivial) == 0.0 {
        return None;
    }

    let mut block: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    if !orthonormalize(&mut block, &trivial) {
        return None;
    }
    let mut images = vec![vec![0.0; n]; p];
    let mut prev: Vec<f64> = vec![f64::INFINITY; dims];
    let mut converged = false;
    for _it in 0..POWER_ITERATIONS {
        for (v, out) in block.iter().zip(images.iter_mut()) {
            apply(v, out);
        }
        let mut h = vec![0.0; p * p];
        for i in 0..p {
            for j in i..p {
                let v = dot(&block[i], &images[j]);
                h[i * p + j] = v;
                h[j * p + i] = v;
            }
        }
        let (values, vectors) = super::pca::jacobi_eigen(h, p);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        block = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (r, img) in images.iter().enumerate() {
                    let w = vectors[r * p + c];
                    v.iter_mut().zip(img).for_each(|(a, b)| *a += w * b);
                }
                v
            })
            .collect();
        if !orthonormalize(&mut block, &trivial) {
            return None;
        }
        let ritz: Vec<f64> = order[..dims].iter().map(|&c| values[c]).collect();
        let shift = ritz.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev = ritz;
        if shift < 1e-10 {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }

    let mut coords = Matrix::zeros(n, dims);
    for (c, v) in block[..dims].iter().enumerate() {
        for (i, x) in v.iter().enumerate() {
            coords.set(i, c, *x);
        }
    }
    Some(coords)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = sqrt(dot(v, v));
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Modified Gram-Schmidt against `fixed` and the earlier vectors. False if
/// the block loses rank.
fn orthonormalize(block: &mut [Vec<f64>], fixed: &[f64]) -> bool {
    for i in 0..block.len() {
        let (done, rest) = block.split_at_mut(i);
        let v = &mut rest[0];
        for u in core::iter::once(fixed).chain(done.iter().map(|u| u.as_slice())) {
            let p = dot(v, u);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        if normalize(v) < 1e-12 {
            return false;
        }
    }
    true
}

#[inline]
fn clip(v: f64) -> f64 {
    v.clamp(-CLIP, CLIP)
}

#[inline]
fn attraction_coef(d2: f64, a: f64, b: f64) -> f64 {
    if d2 > 0.0 {
        -2.0 * a * b * powf(d2, b - 1.0) / (a * powf(d2, b) + 1.0)
    } else {
        0.0
    }
}

fn optimize_layout(
    coords: &mut Matrix,
    graph: &FuzzyGraph,
    a: f64,
    b: f64,
    config: &EmbeddingConfig,
    rng: &mut rng::SeededRng,
) {
    let n_epochs = config.n_epochs;
    if n_epochs == 0 || graph.edges.is_empty() {
        return;
    }
    let n = graph.n;
    let dims = coords.cols();
    let max_w = graph.edges.iter().fold(0.0_f64, |m, e| m.max(e.weight));
    // Edges too weak to be sampled even once are dropped.
    let edges: Vec<_> = graph
        .edges
        .iter()
        .filter(|e| e.weight >= max_w / n_epochs as f64)
        .collect();
    let period: Vec<f64> = edges.iter().map(|e| max_w / e.weight).collect();
    let mut next_due = period.clone();
    let mut delta = vec![0.0; dims];

    for epoch in 0..n_epochs {
        let alpha = 1.0 - epoch as f64 / n_epochs as f64;
        let now = (epoch + 1) as f64;
        for (ei, e) in edges.iter().enumerate() {
            if next_due[ei] > now {
                continue;
            }
            next_due[ei] += period[ei];
            for (head, tail) in [(e.i, e.j), (e.j, e.i)] {
                let d2 = crate::math::squared_euclidean(coords.row(head), coords.row(tail));
                let coef = attraction_coef(d2, a, b);
                for c in 0..dims {
                    delta[c] = clip(coef * (coords.get(head, c) - coords.get(tail, c))) * alpha;
                }
                for c in 0..dims {
                    coords.row_mut(head)[c] += delta[c];
                    coords.row_mut(tail)[c] -= delta[c];
                }
                for _ in 0..config.negative_sample_rate {
                    let other = rng.random_range(0..n);
                    if other == head {
                        continue;
                    }
                    let d2 = crate::math::squared_euclidean(coords.row(head), coords.row(other));
                    let coef = if d2 > 0.0 {
                        2.0 * b / ((0.001 + d2) * (a * powf(d2, b) + 1.0))
                    } else {
                        0.0
                    };
                    for c in 0..dims {
                        let g = if coef > 0.0 {
                            clip(coef * (coords.get(head, c) - coords.get(other, c)))
                        } else {
                            CLIP
                        };
                        coords.row_mut(head)[c] += g * alpha;
                    }
                }
            }
        }
    }
}

/// Places new datapoints in an existing layout without moving it.
///
/// Each point starts at the membership-weighted mean of its nearest training
/// points' coordinates and is refined by attraction-only epochs toward them.
pub fn transform_new(e: &Embedding, x_new: &Matrix) -> Result<Matrix> {
    let dims = e.coords.cols();
    if x_new.rows() == 0 {
        return Ok(Matrix::zeros(0, dims));
    }
    if x_new.cols() != e.train_inputs.cols() {
        return Err(Error::Dimension {
            expected: e.train_inputs.cols(),
            actual: x_new.cols(),
        });
    }
    let k = e.config.n_neighbors.min(e.train_inputs.rows());
    let mut out = Matrix::zeros(x_new.rows(), dims);
    for (row, q) in x_new.iter_rows().enumerate() {
        let nbrs = knn_query(&e.train_inputs, q, k, e.config.metric);
        let dists: Vec<f64> = nbrs.iter().map(|n| n.distance).collect();
        let (rho, sigma) = smooth_knn(&dists, k.max(2));
        let mut weights: Vec<f64> = dists.iter().map(|d| membership(*d, rho, sigma)).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        } else {
            weights.iter_mut().for_each(|w| *w = 1.0 / k as f64);
        }

        let mut y = vec![0.0; dims];
        for (nb, w) in nbrs.iter().zip(&weights) {
            for (yc, tc) in y.iter_mut().zip(e.coords.row(nb.index)) {
                *yc += w * tc;
            }
        }
        for epoch in 0..TRANSFORM_EPOCHS {
            let alpha = TRANSFORM_ALPHA * (1.0 - epoch as f64 / TRANSFORM_EPOCHS as f64);
            for (nb, w) in nbrs.iter().zip(&weights) {
                let target = e.coords.row(nb.index);
                let d2 = crate::math::squared_euclidean(&y, target);
                let coef = attraction_coef(d2, e.a, e.b);
                for c in 0..dims {
                    y[c] += clip(coef * (y[c] - target[c])) * alpha * w;
                }
            }
        }
        out.row_mut(row).copy_from_slice(&y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimred::{separation_ratio, trustworthiness};
    use crate::ingest::two_blobs;

    fn cfg() -> EmbeddingConfig {
        EmbeddingConfig {
            n_epochs: 100,
            seed: 7,
            ..EmbeddingConfig::default()
        }
    }

    #[test]
    fn separates_two_blobs() {
        let (x, labels) = two_blobs(300, 10, 1).unwrap();
        let e = fit_embedding(&x, &cfg()).unwrap();
        assert!(e.spectral_converged);
        assert!(separation_ratio(&e.coords, &labels).unwrap() > 3.0);
        assert!(trustworthiness(&x, &e.coords, 10).unwrap() > 0.9);
    }

    #[test]
    fn deterministic_under_seed() {
        let (x, _) = two_blobs(120, 5, 2).unwrap();
        let a = fit_embedding(&x, &cfg()).unwrap();
        let b = fit_embedding(&x, &cfg()).unwrap();
        assert_eq!(a.coords, b.coords);
        let other = fit_embedding(&x, &EmbeddingConfig { seed: 8, ..cfg() }).unwrap();
        assert_ne!(a.coords, other.coords);
    }

    #[test]
    fn zero_epochs_keeps_initialization() {
        let (x, _) = two_blobs(80, 4, 3).unwrap();
        let c = EmbeddingConfig {
            n_epochs: 0,
            init: InitMethod::Random,
            ..cfg()
        };
        let e = fit_embedding(&x, &c).unwrap();
        let mut r = rng::seeded(c.seed);
        assert_eq!(e.coords, random_init(80, 2, &mut r));
        assert!(e.coords.as_slice().iter().all(|v| v.abs() <= INIT_SCALE));
    }

    #[test]
    fn spectral_init_is_bounded() {
        let (x, _) = two_blobs(100, 4, 4).unwrap();
        let g = build_fuzzy_graph(&knn_graph(&x, 10, Metric::Euclidean).unwrap());
        let c = spectral_init(&g, 3, &mut rng::seeded(0)).unwrap();
        assert_eq!((c.rows(), c.cols()), (100, 3));
        assert!(c.as_slice().iter().all(|v| v.abs() <= INIT_SCALE + 1e-3));
    }

    #[test]
    fn three_dimensional_output() {
        let (x, _) = two_blobs(60, 4, 5).unwrap();
        let e = fit_embedding(&x, &EmbeddingConfig { out_dims: 3, ..cfg() }).unwrap();
        assert_eq!(e.coords.cols(), 3);
    }

    #[test]
    fn rejects_bad_config() {
        let (x, _) = two_blobs(20, 3, 0).unwrap();
        for c in [
            EmbeddingConfig { out_dims: 4, ..cfg() },
            EmbeddingConfig { n_neighbors: 1, ..cfg() },
            EmbeddingConfig { min_dist: 0.0, ..cfg() },
            EmbeddingConfig { negative_sample_rate: 0, ..cfg() },
        ] {
            assert!(fit_embedding(&x, &c).is_err());
        }
    }

    #[test]
    fn new_points_land_in_their_blob() {
        let (x, labels) = two_blobs(400, 6, 6).unwrap();
        let train: Vec<usize> = (0..400).filter(|i| i % 10 != 0).collect();
        let held: Vec<usize> = (0..400).filter(|i| i % 10 == 0).collect();
        let e = fit_embedding(&x.select_rows(&train), &cfg()).unwrap();
        let placed = transform_new(&e, &x.select_rows(&held)).unwrap();
        let mut hits = 0;
        for (r, &i) in held.iter().enumerate() {
            let nb = knn_query(&e.coords, placed.row(r), 1, Metric::Euclidean)[0].index;
            hits += usize::from(labels[train[nb]] == labels[i]);
        }
        assert_eq!(hits, held.len());
        assert_eq!(transform_new(&e, &x.select_rows(&held)).unwrap(), placed);
    }

    #[test]
    fn transform_edge_cases() {
        let (x, _) = two_blobs(40, 3, 9).unwrap();
        let e = fit_embedding(&x, &cfg()).unwrap();
        assert_eq!(transform_new(&e, &Matrix::zeros(0, 3)).unwrap().rows(), 0);
        assert!(transform_new(&e, &Matrix::zeros(1, 2)).is_err());
        let before = e.coords.clone();
        transform_new(&e, &x).unwrap();
        assert_eq!(e.coords, before);
    }
}
