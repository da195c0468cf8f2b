//! Slow reference implementations, written independently of the library.

use repscope_core::data_model::Matrix;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Singular values of `w` from the eigenvalues of the smaller Gram matrix.
pub fn singular_values(w: &Matrix) -> Vec<f64> {
    let (k, d) = w.shape();
    let gram: Vec<Vec<f64>> = if k <= d {
        (0..k)
            .map(|i| (0..k).map(|j| (0..d).map(|c| w.get(i, c) * w.get(j, c)).sum()).collect())
            .collect()
    } else {
        (0..d)
            .map(|i| (0..d).map(|j| (0..k).map(|r| w.get(r, i) * w.get(r, j)).sum()).collect())
            .collect()
    };
    jacobi_eigenvalues(&gram).into_iter().map(|e| e.max(0.0).sqrt()).collect()
}

/// Average precision by walking down the ranking: mean of precision@rank at
/// every positive.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Insertion sort keeps equal scores in index order.
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && scores[order[j - 1]] < scores[order[j]] {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        if positive[idx] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    total / hits as f64
}

/// Double loop over directions and samples: sigma_i / sum(sigma) times the
/// mean absolute cosine between each sample and v_i.
pub fn importance(sigmas: &[f64], directions: &[Vec<f64>], acts: &Matrix) -> Vec<f64> {
    let total: f64 = sigmas.iter().sum();
    let mut out = Vec::new();
    for (s, v) in sigmas.iter().zip(directions) {
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut acc = 0.0;
        for n in 0..acts.nrows() {
            let a = acts.row(n);
            let mut dot = 0.0;
            let mut an = 0.0;
            for j in 0..a.len() {
                dot += a[j] * v[j];
                an += a[j] * a[j];
            }
            acc += (dot / (an.sqrt() * vn)).abs();
        }
        out.push(s / total * acc / acts.nrows() as f64);
    }
    out
}

fn centered_gram(x: &Matrix) -> Vec<Vec<f64>> {
    let n = x.nrows();
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let row_mean: Vec<f64> = k.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let all = row_mean.iter().sum::<f64>() / n as f64;
    (0..n)
        .map(|i| (0..n).map(|j| k[i][j] - row_mean[i] - row_mean[j] + all).collect())
        .collect()
}

/// Linear CKA through centered Gram matrices: tr(KcLc)/sqrt(tr(KcKc)tr(LcLc)).
pub fn cka_gram(a: &Matrix, b: &Matrix) -> f64 {
    let ka = centered_gram(a);
    let kb = centered_gram(b);
    let tr = |x: &[Vec<f64>], y: &[Vec<f64>]| -> f64 {
        x.iter().zip(y).map(|(rx, ry)| rx.iter().zip(ry).map(|(p, q)| p * q).sum::<f64>()).sum()
    };
    tr(&ka, &kb) / (tr(&ka, &ka) * tr(&kb, &kb)).sqrt()
}

/// Population excess-free kurtosis of one row, two-pass.
pub fn row_kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    m4 / (var * var)
}
