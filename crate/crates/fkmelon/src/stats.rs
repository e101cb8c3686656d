//! Small statistical helpers shared by the experiment harness.

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n > 0);
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Bernoulli frequency with standard error; `hits` successes out of `trials`.
pub fn freq_stderr(hits: u64, trials: u64) -> (f64, f64) {
    assert!(trials > 0);
    let p = hits as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    (p, se)
}

/// Result of a linear least-squares fit: coefficients and their standard
/// errors from the inverse normal matrix.
#[derive(Clone, Debug)]
pub struct LinearFit {
    pub coeffs: Vec<f64>,
    pub stderrs: Vec<f64>,
}

/// Weighted least squares: minimizes `sum_k w_k (y_k - sum_j c_j x_kj)^2`.
///
/// Weights should be inverse variances of the observations; the reported
/// standard errors are then the usual `sqrt(diag((X^T W X)^{-1}))`.
pub fn weighted_least_squares(rows: &[Vec<f64>], ys: &[f64], ws: &[f64]) -> LinearFit {
    let n = rows.len();
    assert!(n > 0 && n == ys.len() && n == ws.len());
    let p = rows[0].len();
    assert!(rows.iter().all(|r| r.len() == p) && n >= p);

    let mut xtx = vec![vec![0.0f64; p]; p];
    let mut xty = vec![0.0f64; p];
    for k in 0..n {
        for i in 0..p {
            xty[i] += ws[k] * rows[k][i] * ys[k];
            for j in 0..p {
                xtx[i][j] += ws[k] * rows[k][i] * rows[k][j];
            }
        }
    }

    // Gauss-Jordan inversion of the (small) normal matrix.
    let mut aug = vec![vec![0.0f64; 2 * p]; p];
    for i in 0..p {
        aug[i][..p].copy_from_slice(&xtx[i]);
        aug[i][p + i] = 1.0;
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&a, &b| aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap())
            .unwrap();
        aug.swap(col, pivot);
        let d = aug[col][col];
        assert!(d.abs() > 1e-12, "singular design matrix");
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        for row in 0..p {
            if row != col {
                let f = aug[row][col];
                for j in 0..2 * p {
                    aug[row][j] -= f * aug[col][j];
                }
            }
        }
    }
    let inv: Vec<Vec<f64>> = aug.into_iter().map(|r| r[p..].to_vec()).collect();

    let coeffs: Vec<f64> =
        (0..p).map(|i| (0..p).map(|j| inv[i][j] * xty[j]).sum()).collect();
    let stderrs: Vec<f64> = (0..p).map(|i| inv[i][i].max(0.0).sqrt()).collect();
    LinearFit { coeffs, stderrs }
}

/// Ordinary least squares for `y = a + b x`; returns ((a, b), (se_a, se_b))
/// with residual-based errors.
pub fn ols_line(xs: &[f64], ys: &[f64]) -> ((f64, f64), (f64, f64)) {
    let n = xs.len() as f64;
    assert!(xs.len() == ys.len() && xs.len() >= 2);
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let dof = (n - 2.0).max(1.0);
    let s2: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - a - b * x;
            r * r
        })
        .sum::<f64>()
        / dof;
    let se_b = (s2 / sxx).sqrt();
    let se_a = (s2 * (1.0 / n + mx * mx / sxx)).sqrt();
    ((a, b), (se_a, se_b))
}

/// Median of a sample (averaging the central pair for even sizes).
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wls_recovers_exact_line() {
        let rows: Vec<Vec<f64>> = (0..6).map(|k| vec![1.0, k as f64]).collect();
        let ys: Vec<f64> = (0..6).map(|k| 2.5 - 0.75 * k as f64).collect();
        let ws = vec![1.0; 6];
        let fit = weighted_least_squares(&rows, &ys, &ws);
        assert!((fit.coeffs[0] - 2.5).abs() < 1e-10);
        assert!((fit.coeffs[1] + 0.75).abs() < 1e-10);
    }

    #[test]
    fn wls_three_parameter_model() {
        // y = 1 - 0.3 n - 2 log n, recovered exactly from 5 points.
        let ns = [8.0f64, 12.0, 16.0, 24.0, 32.0];
        let rows: Vec<Vec<f64>> = ns.iter().map(|&n| vec![1.0, -n, -n.ln()]).collect();
        let ys: Vec<f64> = ns.iter().map(|&n| 1.0 - 0.3 * n - 2.0 * n.ln()).collect();
        let fit = weighted_least_squares(&rows, &ys, &[1.0; 5]);
        assert!((fit.coeffs[0] - 1.0).abs() < 1e-8);
        assert!((fit.coeffs[1] - 0.3).abs() < 1e-8);
        assert!((fit.coeffs[2] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn ols_matches_hand_computation() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let ((a, b), _) = ols_line(&xs, &ys);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
