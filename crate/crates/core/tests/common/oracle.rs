//! Brute-force reference implementations, written straight from the
//! definitions with no shared code from the library.

#![allow(dead_code)]

/// Corrected generalized band depth of `x` against `sample`, one pair at a time.
pub fn cgbd(x: &[f64], sample: &[Vec<f64>]) -> f64 {
    let n = sample.len();
    let g = x.len() as f64;
    let mut total = 0.0;
    for i1 in 0..n {
        for i2 in (i1 + 1)..n {
            let (a, b) = (&sample[i1], &sample[i2]);
            let in_a: Vec<bool> = (0..x.len()).map(|t| b[t] - a[t] >= 0.0).collect();
            let l = in_a.iter().filter(|v| **v).count() as f64 / g;
            let mut measure = 0.0;
            for t in 0..x.len() {
                let hit = if l >= 0.5 {
                    in_a[t] && a[t] <= x[t] && x[t] <= b[t]
                } else {
                    a[t] - b[t] >= 0.0 && b[t] <= x[t] && x[t] <= a[t]
                };
                if hit {
                    measure += 1.0;
                }
            }
            total += measure / g;
        }
    }
    total * 2.0 / (n * (n - 1)) as f64
}

/// Modified band depth: average share of the domain inside each pairwise band.
pub fn mbd(x: &[f64], sample: &[Vec<f64>]) -> f64 {
    let n = sample.len();
    let g = x.len() as f64;
    let mut total = 0.0;
    for i1 in 0..n {
        for i2 in (i1 + 1)..n {
            let inside = (0..x.len())
                .filter(|&t| {
                    let lo = sample[i1][t].min(sample[i2][t]);
                    let hi = sample[i1][t].max(sample[i2][t]);
                    lo <= x[t] && x[t] <= hi
                })
                .count();
            total += inside as f64 / g;
        }
    }
    total * 2.0 / (n * (n - 1)) as f64
}

/// `S (S' W^-1 S)^-1 S' W^-1 r` via dense normal equations and Gaussian
/// elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn gls(s: &[Vec<f64>], w: &[f64], r: &[f64]) -> Vec<f64> {
    let rows = s.len();
    let m = s[0].len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for j in 0..m {
        for k in 0..m {
            a[j][k] = (0..rows).map(|i| s[i][j] * s[i][k] / w[i]).sum();
        }
        a[j][m] = (0..rows).map(|i| s[i][j] * r[i] / w[i]).sum();
    }
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in 0..m {
            if row != col {
                let f = a[row][col] / a[col][col];
                for c in col..=m {
                    a[row][c] -= f * a[col][c];
                }
            }
        }
    }
    let b: Vec<f64> = (0..m).map(|j| a[j][m] / a[j][j]).collect();
    (0..rows)
        .map(|i| (0..m).map(|j| s[i][j] * b[j]).sum())
        .collect()
}
