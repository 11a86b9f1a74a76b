//! Slow, direct reference implementations and the seeded instance families
//! they are checked on. Each `check_*` returns the number of instances
//! compared, or a description of the first disagreement.

#![allow(dead_code)]

use hydrodiag_core::autoenc::{grad_check, Activation, Layer, Mlp};
use hydrodiag_core::cluster::{agglomerative_with_merges, dbscan, kmeans, Linkage, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
use hydrodiag_core::dimred::{knn_graph, Metric};
use hydrodiag_core::rng::seeded;
use hydrodiag_core::Matrix;
use rand::Rng;

fn dist(a: &[f64], b: &[f64], metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
    }
}

fn random_points(rng: &mut impl Rng, n: usize, d: usize, grid: bool) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    if grid {
                        rng.random_range(0..8) as f64 * 0.25
                    } else {
                        rng.random_range(0.0..1.0)
                    }
                })
                .collect()
        })
        .collect()
}

fn matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

/// Sorts every other point by (distance, index) and keeps the first `k`.
pub fn knn_oracle(x: &[Vec<f64>], k: usize, metric: Metric) -> Vec<Vec<(usize, f64)>> {
    (0..x.len())
        .map(|i| {
            let mut all: Vec<(usize, f64)> = (0..x.len()).filter(|&j| j != i).map(|j| (j, dist(&x[i], &x[j], metric))).collect();
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            all.truncate(k);
            all
        })
        .collect()
}

pub fn check_knn(instances: usize) -> Result<usize, String> {
    let mut rng = seeded(1001);
    for t in 0..instances {
        let n = rng.random_range(2..=300);
        let d = rng.random_range(1..=5);
        let k = rng.random_range(1..n.min(25));
        let metric = if t % 3 == 2 { Metric::Manhattan } else { Metric::Euclidean };
        let x = random_points(&mut rng, n, d, t % 2 == 1);
        let got = knn_graph(&matrix(&x), k, metric).map_err(|e| e.to_string())?;
        let want = knn_oracle(&x, k, metric);
        for i in 0..n {
            let g: Vec<usize> = got.neighbors[i].iter().map(|nb| nb.index).collect();
            let w: Vec<usize> = want[i].iter().map(|p| p.0).collect();
            if g != w {
                return Err(format!("instance {t}, row {i}: {g:?} vs {w:?}"));
            }
            for (nb, p) in got.neighbors[i].iter().zip(&want[i]) {
                if (nb.distance - p.1).abs() > 1e-12 {
                    return Err(format!("instance {t}, row {i}: distance {} vs {}", nb.distance, p.1));
                }
            }
        }
    }
    Ok(instances)
}

/// Textbook DBSCAN by neighborhood expansion from each unvisited point, after
/// which every border point is moved to the cluster of its nearest core point
/// (ties to the core point with lexicographically smallest coordinates).
pub fn dbscan_oracle(x: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = x.len();
    let region = |p: usize| -> Vec<usize> { (0..n).filter(|&q| dist(&x[p], &x[q], Metric::Euclidean) <= eps).collect() };
    let mut label = vec![-2i32; n]; // -2 unvisited
    let mut cluster = 0;
    for p in 0..n {
        if label[p] != -2 {
            continue;
        }
        let seeds = region(p);
        if seeds.len() < min_pts {
            label[p] = -1;
            continue;
        }
        label[p] = cluster;
        let mut queue = seeds;
        let mut at = 0;
        while at < queue.len() {
            let q = queue[at];
            at += 1;
            if label[q] == -1 {
                label[q] = cluster;
            }
            if label[q] != -2 {
                continue;
            }
            label[q] = cluster;
            let more = region(q);
            if more.len() >= min_pts {
                queue.extend(more);
            }
        }
        cluster += 1;
    }
    let core: Vec<bool> = (0..n).map(|p| region(p).len() >= min_pts).collect();
    let mut out = label.clone();
    for p in 0..n {
        if core[p] || label[p] == -1 {
            continue;
        }
        let mut cores: Vec<usize> = region(p).into_iter().filter(|&q| core[q]).collect();
        cores.sort_by(|&a, &b| {
            let da = dist(&x[p], &x[a], Metric::Euclidean);
            let db = dist(&x[p], &x[b], Metric::Euclidean);
            da.partial_cmp(&db).unwrap().then_with(|| x[a].partial_cmp(&x[b]).unwrap())
        });
        out[p] = cores.first().map_or(-1, |&q| label[q]);
    }
    out
}

fn dbscan_instance(rng: &mut impl Rng, t: usize) -> (Vec<Vec<f64>>, f64, usize) {
    let n = rng.random_range(1..=200);
    let d = rng.random_range(1..=3);
    let grid = t % 4 == 3;
    let n_centers = rng.random_range(1..=4);
    let centers = random_points(rng, n_centers, d, false);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            if grid || rng.random_range(0.0..1.0) < 0.2 {
                random_points(rng, 1, d, grid).remove(0)
            } else {
                let c = &centers[rng.random_range(0..centers.len())];
                c.iter().map(|v| v + rng.random_range(-0.08..0.08)).collect()
            }
        })
        .collect();
    let eps = if grid { 0.25 * rng.random_range(1..=3) as f64 } else { rng.random_range(0.02..0.2) };
    (x, eps, rng.random_range(1..=6))
}

pub fn check_dbscan(instances: usize) -> Result<usize, String> {
    let mut rng = seeded(2002);
    for t in 0..instances {
        let (x, eps, min_pts) = dbscan_instance(&mut rng, t);
        let got = dbscan(&matrix(&x), eps, min_pts).map_err(|e| e.to_string())?;
        let want = dbscan_oracle(&x, eps, min_pts);
        if got.labels != want {
            return Err(format!("instance {t} (eps {eps}, min_pts {min_pts}): {:?} vs {want:?}", got.labels));
        }
    }
    Ok(instances)
}

/// Shuffles rows and checks that every pair of rows is co-clustered (and
/// noise) exactly as before.
pub fn check_dbscan_permutation(instances: usize, shuffles: usize) -> Result<usize, String> {
    use rand::seq::SliceRandom;
    let mut rng = seeded(2003);
    for t in 0..instances {
        let (x, eps, min_pts) = dbscan_instance(&mut rng, t);
        let base = dbscan(&matrix(&x), eps, min_pts).map_err(|e| e.to_string())?.labels;
        for _ in 0..shuffles {
            let mut perm: Vec<usize> = (0..x.len()).collect();
            perm.shuffle(&mut rng);
            let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
            let got = dbscan(&matrix(&shuffled), eps, min_pts).map_err(|e| e.to_string())?.labels;
            for a in 0..perm.len() {
                if (got[a] == -1) != (base[perm[a]] == -1) {
                    return Err(format!("instance {t}: noise status of row {} changed", perm[a]));
                }
                for b in 0..perm.len() {
                    let same_got = got[a] != -1 && got[a] == got[b];
                    let same_base = base[perm[a]] != -1 && base[perm[a]] == base[perm[b]];
                    if same_got != same_base {
                        return Err(format!("instance {t}: rows {} and {} split differently", perm[a], perm[b]));
                    }
                }
            }
        }
    }
    Ok(instances)
}

/// Ward clustering recomputing every pairwise merge cost from the member
/// lists at each step. Returns `(slot a, slot b, height)` per merge and the
/// final clusters' slot per row.
pub fn ward_oracle(x: &[Vec<f64>], k: usize) -> (Vec<(usize, usize, f64)>, Vec<usize>) {
    let n = x.len();
    let d = x[0].len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let centroid = |m: &[usize]| -> Vec<f64> { (0..d).map(|c| m.iter().map(|&i| x[i][c]).sum::<f64>() / m.len() as f64).collect() };
    let mut merges = Vec::new();
    while clusters.len() > k {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let (ca, cb) = (centroid(&clusters[a]), centroid(&clusters[b]));
                let (na, nb) = (clusters[a].len() as f64, clusters[b].len() as f64);
                let sq: f64 = ca.iter().zip(&cb).map(|(p, q)| (p - q) * (p - q)).sum();
                let cost = na * nb / (na + nb) * sq;
                if best.is_none_or(|bst| cost < bst.0) {
                    best = Some((cost, a, b));
                }
            }
        }
        let (cost, a, b) = best.unwrap();
        let moved = clusters.remove(b);
        let slot_a = clusters[a][0];
        merges.push((slot_a, moved[0], (2.0 * cost).sqrt()));
        clusters[a].extend(moved);
        clusters[a].sort_unstable();
        clusters.sort_by_key(|m| m[0]);
    }
    let mut slot = vec![0; n];
    for m in &clusters {
        for &i in m {
            slot[i] = m[0];
        }
    }
    (merges, slot)
}

pub fn check_ward(instances: usize) -> Result<usize, String> {
    let mut rng = seeded(3003);
    for t in 0..instances {
        let n = rng.random_range(2..=50);
        let d = rng.random_range(1..=4);
        let k = rng.random_range(1..=n.min(5));
        let x = random_points(&mut rng, n, d, false);
        let (assignment, merges) = agglomerative_with_merges(&matrix(&x), k, Linkage::Ward).map_err(|e| e.to_string())?;
        let (want, slots) = ward_oracle(&x, k);
        if merges.len() != want.len() {
            return Err(format!("instance {t}: {} merges vs {}", merges.len(), want.len()));
        }
        for (s, (m, w)) in merges.iter().zip(&want).enumerate() {
            if (m.a, m.b) != (w.0, w.1) || (m.height - w.2).abs() > 1e-9 * w.2.max(1.0) {
                return Err(format!("instance {t}, merge {s}: ({}, {}, {}) vs {w:?}", m.a, m.b, m.height));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if (assignment.labels[i] == assignment.labels[j]) != (slots[i] == slots[j]) {
                    return Err(format!("instance {t}: rows {i} and {j} grouped differently"));
                }
            }
        }
    }
    Ok(instances)
}

/// Lowest within-cluster sum of squares over every assignment of rows to
/// `k` non-empty clusters.
pub fn kmeans_exhaustive(x: &[Vec<f64>], k: usize) -> f64 {
    let n = x.len();
    let d = x[0].len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        if sizes.iter().all(|&s| s > 0) {
            let mut sse = 0.0;
            for c in 0..k {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                for j in 0..d {
                    let mean = members.iter().map(|&i| x[i][j]).sum::<f64>() / members.len() as f64;
                    sse += members.iter().map(|&i| (x[i][j] - mean).powi(2)).sum::<f64>();
                }
            }
            best = best.min(sse);
        }
        let mut pos = 0;
        while pos < n && labels[pos] == k - 1 {
            labels[pos] = 0;
            pos += 1;
        }
        if pos == n {
            return best;
        }
        labels[pos] += 1;
    }
}

pub fn check_kmeans(instances: usize) -> Result<usize, String> {
    let mut rng = seeded(4004);
    for t in 0..instances {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(1..=3.min(n));
        let d = rng.random_range(1..=3);
        let x = random_points(&mut rng, n, d, t % 2 == 1);
        let (model, _) = kmeans(&matrix(&x), k, t as u64, DEFAULT_MAX_ITER, DEFAULT_RESTARTS).map_err(|e| e.to_string())?;
        let want = kmeans_exhaustive(&x, k);
        if (model.inertia - want).abs() > 1e-9 * want.max(1e-12) + 1e-12 {
            return Err(format!("instance {t} (n {n}, k {k}): inertia {} vs optimum {want}", model.inertia));
        }
        if model.inertia_history.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-9) + 1e-12) {
            return Err(format!("instance {t}: inertia increased: {:?}", model.inertia_history));
        }
    }
    Ok(instances)
}

/// Random tanh networks `d -> h1 [-> h2] -> d` with nonzero biases.
pub fn random_tanh_net(rng: &mut impl Rng) -> Mlp {
    let d = rng.random_range(1..=5);
    let hidden: Vec<usize> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(1..=6)).collect();
    let mut widths = vec![d];
    widths.extend(&hidden);
    widths.push(d);
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| Layer {
            inputs: w[0],
            outputs: w[1],
            weights: (0..w[0] * w[1]).map(|_| rng.random_range(-1.0..1.0)).collect(),
            bias: (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect(),
            activation: if i + 2 == widths.len() { Activation::Identity } else { Activation::Tanh },
        })
        .collect();
    Mlp::from_layers(layers).unwrap()
}

/// Largest relative error over `nets` random networks.
pub fn check_gradients(nets: usize) -> (f64, usize) {
    let mut rng = seeded(5005);
    let mut worst: f64 = 0.0;
    for _ in 0..nets {
        let m = random_tanh_net(&mut rng);
        let x: Vec<f64> = (0..m.input_width()).map(|_| rng.random_range(0.0..1.0)).collect();
        worst = worst.max(grad_check(&m, &x, 1e-5));
    }
    (worst, nets)
}
