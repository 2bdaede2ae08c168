//! Reference implementations for tests. Each one avoids the production code
//! path it checks: no Cholesky, no shared distance code, no shared sums.
//! Correctness over speed throughout.

/// Great-circle distance via the atan2 form of the haversine.
pub fn haversine_km(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    const R: f64 = 6371.0088;
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * R * a.sqrt().atan2((1.0 - a).sqrt())
}

pub fn gaussian_weight(d_km: f64, h_km: f64) -> f64 {
    (-(d_km * d_km) / (h_km * h_km)).exp()
}

/// Least squares via Householder QR of `x` (n x p, n >= p, full column rank).
pub fn qr_ols(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let p = x[0].len();
    let mut a: Vec<Vec<f64>> = x.to_vec();
    let mut b = y.to_vec();
    for k in 0..p {
        let norm = (k..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..p {
            let s: f64 = (k..n).map(|i| v[i - k] * a[i][j]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..n {
                a[i][j] -= s * v[i - k];
            }
        }
        let s: f64 = (k..n).map(|i| v[i - k] * b[i]).sum::<f64>() * 2.0 / vnorm2;
        for i in k..n {
            b[i] -= s * v[i - k];
        }
    }
    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = (k + 1..p).map(|j| a[k][j] * beta[j]).sum();
        beta[k] = (b[k] - s) / a[k][k];
    }
    beta
}

/// Weighted least squares by scaling rows with sqrt(w) and calling [`qr_ols`].
pub fn qr_wls(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let sx: Vec<Vec<f64>> = x
        .iter()
        .zip(w)
        .map(|(r, wi)| r.iter().map(|v| v * wi.sqrt()).collect())
        .collect();
    let sy: Vec<f64> = y.iter().zip(w).map(|(v, wi)| v * wi.sqrt()).collect();
    qr_ols(&sx, &sy)
}

/// The weighted squared loss sum_j w_j (y_j - x_j . beta)^2.
pub fn wls_loss(x: &[Vec<f64>], y: &[f64], w: &[f64], beta: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(w)
        .map(|((r, yi), wi)| {
            let e = yi - r.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
            wi * e * e
        })
        .sum()
}

/// Minimises the weighted squared loss by plain gradient descent from zero.
///
/// The gradient is accumulated row by row. The step is 1/L, where L is a
/// Gershgorin bound on the largest Hessian eigenvalue, so every step decreases
/// the loss. Stops when an iteration no longer moves beta.
pub fn gd_wls(x: &[Vec<f64>], y: &[f64], w: &[f64], max_iter: usize) -> Vec<f64> {
    let p = x[0].len();
    let mut hess = vec![vec![0.0; p]; p];
    for (r, wi) in x.iter().zip(w) {
        for a in 0..p {
            for b in 0..p {
                hess[a][b] += 2.0 * wi * r[a] * r[b];
            }
        }
    }
    let lip = hess.iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lip;
    let mut beta = vec![0.0; p];
    for _ in 0..max_iter {
        let mut grad = vec![0.0; p];
        for ((r, yi), wi) in x.iter().zip(y).zip(w) {
            let e = r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() - yi;
            for a in 0..p {
                grad[a] += 2.0 * wi * e * r[a];
            }
        }
        let mut moved = false;
        for a in 0..p {
            let next = beta[a] - step * grad[a];
            moved |= next != beta[a];
            beta[a] = next;
        }
        if !moved {
            break;
        }
    }
    beta
}

/// Sum of squared leave-one-out errors for a Gaussian-kernel local regression,
/// refitting from scratch on the reduced data for every row.
/// `locs` are (lon, lat) pairs.
pub fn brute_loo(locs: &[(f64, f64)], x: &[Vec<f64>], y: &[f64], h_km: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..y.len() {
        let keep: Vec<usize> = (0..y.len()).filter(|&j| j != i).collect();
        let xs: Vec<Vec<f64>> = keep.iter().map(|&j| x[j].clone()).collect();
        let ys: Vec<f64> = keep.iter().map(|&j| y[j]).collect();
        let ws: Vec<f64> = keep
            .iter()
            .map(|&j| gaussian_weight(haversine_km(locs[i].0, locs[i].1, locs[j].0, locs[j].1), h_km))
            .collect();
        let beta = qr_wls(&xs, &ys, &ws);
        let pred: f64 = x[i].iter().zip(&beta).map(|(a, b)| a * b).sum();
        total += (y[i] - pred).powi(2);
    }
    total
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson r by the raw-sums formula.
pub fn pearson_direct(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

pub fn r_squared_direct(actual: &[f64], predicted: &[f64]) -> f64 {
    let m = mean(actual);
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    let ss_tot: f64 = actual.iter().map(|a| (a - m).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// Counts of values in half-open bins `[edges[k], edges[k+1])`, with the
/// maximum value falling into the last bin.
pub fn histogram_direct(values: &[f64], edges: &[f64]) -> Vec<u64> {
    let last = edges.len() - 2;
    (0..=last)
        .map(|k| {
            values
                .iter()
                .filter(|&&v| (v >= edges[k] && v < edges[k + 1]) || (k == last && v == edges[k + 1]))
                .count() as u64
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
