//! Lloyd's k-means with k-means++ seeding, used to find identity clusters in
//! `z_what` space.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = dist2(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

const MAX_ITERS: usize = 100;

pub fn cluster_zwhat(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k-means needs k > 0".into()));
    }
    if points.len() < k {
        return Err(Error::InvalidArgument(format!(
            "k-means needs at least k={k} points, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();

    // k-means++ seeding: first center uniform, the rest proportional to
    // squared distance from the nearest chosen center.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.gen_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All mass on chosen centers (duplicate points): fall back to uniform.
            rng.gen_range(0..points.len())
        } else {
            let mut u = rng.gen_range(0.0..total);
            let mut idx = points.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        };
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, centers.last().unwrap()));
        }
    }

    let mut assignments = vec![0usize; points.len()];
    let mut iterations = 0;
    for iter in 0..MAX_ITERS {
        iterations = iter + 1;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (a, _) = nearest(p, &centers);
            if assignments[i] != a {
                assignments[i] = a;
                changed = true;
            }
        }
        if !changed && iter > 0 {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, (sum, count)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            // Empty clusters keep their previous center.
            if *count > 0 {
                for (cv, sv) in c.iter_mut().zip(sum) {
                    *cv = sv / *count as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }

    Ok(KMeansResult {
        centers,
        assignments,
        iterations,
    })
}
