//! Mutual Information Gap estimator over equal-width histograms.
//!
//! Latent dimensions and ground-truth factors are both discretized into the
//! same number of equal-width bins; mutual information comes from the joint
//! histogram. The score for a factor is the normalized gap between the two
//! most informative latent dimensions, averaged over factors with nonzero
//! entropy.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct MigReport {
    pub score: f64,
    /// `mi[j][k]` = I(latent j; factor k) in nats.
    pub mi: Vec<Vec<f64>>,
    pub factor_entropies: Vec<f64>,
    /// Factors skipped because they are constant (zero entropy).
    pub skipped_factors: Vec<usize>,
}

fn discretize_column(data: &Tensor, col: usize, bins: usize) -> Vec<usize> {
    let n = data.rows();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in 0..n {
        let v = data.get(r, col);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let width = hi - lo;
    (0..n)
        .map(|r| {
            if width <= 0.0 {
                0
            } else {
                let frac = (data.get(r, col) - lo) / width;
                ((frac * bins as f64) as usize).min(bins - 1)
            }
        })
        .collect()
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

fn mutual_information(a: &[usize], b: &[usize], bins: usize) -> f64 {
    let n = a.len();
    let mut joint = vec![0usize; bins * bins];
    let mut ma = vec![0usize; bins];
    let mut mb = vec![0usize; bins];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * bins + y] += 1;
        ma[x] += 1;
        mb[y] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for x in 0..bins {
        for y in 0..bins {
            let c = joint[x * bins + y];
            if c == 0 {
                continue;
            }
            let pxy = c as f64 / nf;
            let px = ma[x] as f64 / nf;
            let py = mb[y] as f64 / nf;
            mi += pxy * (pxy / (px * py)).ln();
        }
    }
    mi.max(0.0)
}

/// Rows are samples; `latents` is `n x d_z`, `factors` is `n x d_f`.
pub fn mig_score(latents: &Tensor, factors: &Tensor, bins: usize) -> Result<MigReport> {
    if latents.rows() != factors.rows() {
        return Err(Error::InvalidArgument(format!(
            "mig: {} latent rows vs {} factor rows",
            latents.rows(),
            factors.rows()
        )));
    }
    if latents.cols() < 2 {
        return Err(Error::InvalidArgument(
            "mig needs at least 2 latent dimensions".into(),
        ));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument("mig needs at least 2 bins".into()));
    }
    let n = latents.rows();
    let dz = latents.cols();
    let df = factors.cols();

    let z_disc: Vec<Vec<usize>> = (0..dz).map(|j| discretize_column(latents, j, bins)).collect();
    let f_disc: Vec<Vec<usize>> = (0..df).map(|k| discretize_column(factors, k, bins)).collect();

    let mut mi = vec![vec![0.0; df]; dz];
    for (j, zd) in z_disc.iter().enumerate() {
        for (k, fd) in f_disc.iter().enumerate() {
            mi[j][k] = mutual_information(zd, fd, bins);
        }
    }

    let mut factor_entropies = Vec::with_capacity(df);
    let mut skipped = Vec::new();
    let mut gaps = Vec::new();
    for (k, fd) in f_disc.iter().enumerate() {
        let mut counts = vec![0usize; bins];
        for &b in fd {
            counts[b] += 1;
        }
        let h = entropy(&counts, n);
        factor_entropies.push(h);
        if h <= 0.0 {
            skipped.push(k);
            continue;
        }
        let mut col: Vec<f64> = (0..dz).map(|j| mi[j][k]).collect();
        col.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        gaps.push((col[0] - col[1]) / h);
    }
    if gaps.is_empty() {
        return Err(Error::InvalidArgument(
            "mig: every factor is constant".into(),
        ));
    }
    Ok(MigReport {
        score: gaps.iter().sum::<f64>() / gaps.len() as f64,
        mi,
        factor_entropies,
        skipped_factors: skipped,
    })
}
