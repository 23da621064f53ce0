//! Deterministic k-means with farthest-point initialization.

/// Result of [`kmeans`]: `assignment[i]` is the cluster of point `i` and
/// each centroid is the mean of its members.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f32>>,
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeds: the first point, then repeatedly the point farthest from every
/// chosen seed (lowest index among ties).
pub fn farthest_point_init<P: AsRef<[f32]>>(points: &[P], k: usize) -> Vec<usize> {
    if points.is_empty() || k == 0 {
        return Vec::new();
    }
    let pts: Vec<Vec<f64>> = points.iter().map(|p| widen(p.as_ref())).collect();
    let mut seeds = vec![0];
    let mut nearest: Vec<f64> = pts.iter().map(|p| sq_dist(p, &pts[0])).collect();
    while seeds.len() < k.min(pts.len()) {
        let mut best = 0;
        for (i, &d) in nearest.iter().enumerate() {
            if d > nearest[best] {
                best = i;
            }
        }
        seeds.push(best);
        for (n, p) in nearest.iter_mut().zip(&pts) {
            *n = n.min(sq_dist(p, &pts[best]));
        }
    }
    seeds
}

/// Lloyd iterations from [`farthest_point_init`] seeds, stopping when the
/// assignment no longer changes or after `max_iter` updates. Empty clusters
/// keep their previous centroid. `k` is capped at the number of points.
pub fn kmeans<P: AsRef<[f32]>>(points: &[P], k: usize, max_iter: usize) -> KMeans {
    let k = k.min(points.len());
    if k == 0 {
        return KMeans {
            centroids: Vec::new(),
            assignment: vec![0; points.len()],
            iterations: 0,
        };
    }
    let pts: Vec<Vec<f64>> = points.iter().map(|p| widen(p.as_ref())).collect();
    let dim = pts[0].len();
    let mut centroids: Vec<Vec<f64>> = farthest_point_init(points, k)
        .into_iter()
        .map(|i| pts[i].clone())
        .collect();
    let mut assignment: Vec<usize> = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        let next: Vec<usize> = pts.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
        iterations += 1;
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in pts.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    KMeans {
        centroids: centroids
            .into_iter()
            .map(|c| c.into_iter().map(|x| x as f32).collect())
            .collect(),
        assignment,
        iterations,
    }
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_dist(p, cen);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn widen(p: &[f32]) -> Vec<f64> {
    p.iter().map(|&x| f64::from(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_give_their_value() {
        let pts = vec![vec![1.5f32, -2.0]; 5];
        let km = kmeans(&pts, 1, 20);
        assert_eq!(km.centroids, vec![vec![1.5, -2.0]]);
    }

    #[test]
    fn two_blobs_separate() {
        let pts = vec![vec![0.0f32], vec![0.1], vec![10.0], vec![10.2]];
        let km = kmeans(&pts, 2, 20);
        assert_eq!(km.assignment, vec![0, 0, 1, 1]);
        assert!((km.centroids[1][0] - 10.1).abs() < 1e-6);
    }
}
