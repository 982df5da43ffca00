//! Independent reference implementations shared by the integration tests.
//! None of these call into the numerical code they are used to check.

#![allow(dead_code)]

use nmtune::rng::Rng;
use nmtune::Matrix;

pub fn gaussian(rng: &mut Rng, m: usize, d: usize) -> Matrix {
    Matrix::from_fn(m, d, |_, _| rng.normal())
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let total: f64 = a.iter().flatten().map(|v| v * v).sum();
        if off <= 1e-32 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

/// Singular values as square roots of the eigenvalues of the smaller Gram
/// matrix (FᵀF or FFᵀ).
pub fn gram_singular_values(f: &Matrix) -> Vec<f64> {
    let (m, d) = f.shape();
    let tall = m >= d;
    let n = m.min(d);
    let entry = |i: usize, j: usize| -> f64 {
        if tall {
            (0..m).map(|k| f[(k, i)] * f[(k, j)]).sum()
        } else {
            (0..d).map(|k| f[(i, k)] * f[(j, k)]).sum()
        }
    };
    let g: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| entry(i, j)).collect()).collect();
    symmetric_eigenvalues(g).into_iter().map(|l| l.max(0.0).sqrt()).collect()
}

/// Training accuracy of a multinomial logistic regression fitted by
/// full-batch gradient descent on standardized features.
pub fn logistic_regression_accuracy(x: &Matrix, y: &[u32], classes: usize) -> f64 {
    let (m, d) = x.shape();
    let mean: Vec<f64> = (0..d).map(|j| (0..m).map(|i| x[(i, j)]).sum::<f64>() / m as f64).collect();
    let sd: Vec<f64> = (0..d)
        .map(|j| ((0..m).map(|i| (x[(i, j)] - mean[j]).powi(2)).sum::<f64>() / m as f64).sqrt().max(1e-12))
        .collect();
    let xs: Vec<Vec<f64>> = (0..m).map(|i| (0..d).map(|j| (x[(i, j)] - mean[j]) / sd[j]).collect()).collect();
    let mut w = vec![vec![0.0; classes]; d + 1];
    let scores = |w: &Vec<Vec<f64>>, row: &[f64]| -> Vec<f64> {
        (0..classes).map(|c| w[d][c] + row.iter().enumerate().map(|(j, v)| v * w[j][c]).sum::<f64>()).collect()
    };
    for _ in 0..500 {
        let mut grad = vec![vec![0.0; classes]; d + 1];
        for (row, &label) in xs.iter().zip(y) {
            let s = scores(&w, row);
            let top = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = s.iter().map(|v| (v - top).exp()).collect();
            let z: f64 = e.iter().sum();
            for c in 0..classes {
                let g = e[c] / z - if c == label as usize { 1.0 } else { 0.0 };
                for j in 0..d {
                    grad[j][c] += g * row[j];
                }
                grad[d][c] += g;
            }
        }
        for j in 0..=d {
            for c in 0..classes {
                w[j][c] -= 0.5 * grad[j][c] / m as f64;
            }
        }
    }
    let correct = xs
        .iter()
        .zip(y)
        .filter(|(row, &label)| {
            let s = scores(&w, row);
            let best = (0..classes).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
            best == label as usize
        })
        .count();
    correct as f64 / m as f64
}
