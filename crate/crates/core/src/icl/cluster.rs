//! k-medoids (PAM) with silhouette model selection.

/// Symmetric pairwise Euclidean distances.
pub fn distance_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Medoid indices in ascending order.
    pub medoids: Vec<usize>,
    /// Cluster (position in `medoids`) of every point.
    pub assignment: Vec<usize>,
    pub cost: f64,
}

fn assign(d: &[Vec<f64>], medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let assignment = (0..d.len())
        .map(|i| {
            let (c, v) = medoids
                .iter()
                .enumerate()
                .map(|(c, &m)| (c, d[i][m]))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one medoid");
            cost += v;
            c
        })
        .collect();
    (assignment, cost)
}

fn total_cost(d: &[Vec<f64>], medoids: &[usize]) -> f64 {
    (0..d.len()).map(|i| medoids.iter().map(|&m| d[i][m]).fold(f64::INFINITY, f64::min)).sum()
}

/// PAM: greedy BUILD then best-improvement SWAP to a local optimum.
/// Ties resolve to the lowest index, so the result is deterministic.
pub fn pam(d: &[Vec<f64>], k: usize) -> Clustering {
    let n = d.len();
    let k = k.clamp(1, n.max(1));
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    while medoids.len() < k {
        let best = (0..n)
            .filter(|i| !medoids.contains(i))
            .map(|c| {
                let mut trial = medoids.clone();
                trial.push(c);
                (c, total_cost(d, &trial))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("candidate left");
        medoids.push(best.0);
    }
    let mut cost = total_cost(d, &medoids);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..k {
            for c in (0..n).filter(|c| !medoids.contains(c)) {
                let mut trial = medoids.clone();
                trial[slot] = c;
                let t = total_cost(d, &trial);
                if t < cost - 1e-12 && best.is_none_or(|b| t < b.2) {
                    best = Some((slot, c, t));
                }
            }
        }
        match best {
            Some((slot, c, t)) => {
                medoids[slot] = c;
                cost = t;
            }
            None => break,
        }
    }
    medoids.sort_unstable();
    let (assignment, cost) = assign(d, &medoids);
    Clustering { medoids, assignment, cost }
}

/// Mean silhouette; points in singleton clusters score 0.
pub fn silhouette(d: &[Vec<f64>], assignment: &[usize], k: usize) -> f64 {
    let n = d.len();
    if n == 0 {
        return 0.0;
    }
    let sizes: Vec<usize> = (0..k).map(|c| assignment.iter().filter(|&&a| a == c).count()).collect();
    let total: f64 = (0..n)
        .map(|i| {
            let own = assignment[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                sums[assignment[j]] += d[i][j];
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                return 0.0;
            }
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .sum();
    total / n as f64
}

/// PAM for every k in `[2, min(20, n/2)]`, keeping the best mean
/// silhouette (smaller k on ties).
pub fn select_k(d: &[Vec<f64>]) -> (Clustering, f64) {
    let n = d.len();
    let hi = (n / 2).clamp(2, 20);
    let mut best: Option<(Clustering, f64)> = None;
    for k in 2..=hi {
        let c = pam(d, k);
        let s = silhouette(d, &c.assignment, k);
        if best.as_ref().is_none_or(|b| s > b.1 + 1e-12) {
            best = Some((c, s));
        }
    }
    best.expect("range is non-empty")
}
