//! Independent reference implementations used as test oracles. Nothing here
//! calls into the crate's numeric kernels.
#![allow(dead_code)]

use rand::Rng;

/// Minimum total cost over every injective pairing of the smaller side into
/// the larger, by exhaustive enumeration.
pub fn brute_force_min_cost(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let m = cost[0].len();
    let transposed = n > m;
    let (small, large) = if transposed { (m, n) } else { (n, m) };
    let at = |i: usize, j: usize| if transposed { cost[j][i] } else { cost[i][j] };
    let mut used = vec![false; large];
    let mut best = f64::INFINITY;
    fn go(
        i: usize,
        small: usize,
        acc: f64,
        used: &mut [bool],
        best: &mut f64,
        at: &dyn Fn(usize, usize) -> f64,
    ) {
        if i == small {
            *best = best.min(acc);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(i + 1, small, acc + at(i, j), used, best, at);
                used[j] = false;
            }
        }
    }
    go(0, small, 0.0, &mut used, &mut best, &at);
    best
}

pub type Dense = Vec<Vec<f64>>;

pub fn dense_zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn dense_eye(n: usize) -> Dense {
    let mut m = dense_zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn dense_diag(d: &[f64]) -> Dense {
    let mut m = dense_zeros(d.len(), d.len());
    for (i, v) in d.iter().enumerate() {
        m[i][i] = *v;
    }
    m
}

pub fn dense_mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    assert_eq!(a[0].len(), k);
    let mut out = dense_zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn dense_t(a: &Dense) -> Dense {
    let mut out = dense_zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

pub fn dense_add(a: &Dense, b: &Dense, sign: f64) -> Dense {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + sign * y).collect())
        .collect()
}

pub fn dense_mv(a: &Dense, v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn dense_sym(a: &Dense) -> Dense {
    let n = a.len();
    let mut out = a.clone();
    for i in 0..n {
        for j in 0..n {
            out[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    out
}

/// Gauss–Jordan elimination with partial pivoting.
pub fn dense_inv(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        assert!(d != 0.0, "singular");
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// The constant-velocity box filter written out directly.
pub struct RefKalman {
    pub f: Dense,
    pub h: Dense,
    pub q: Dense,
    pub r: Dense,
}

impl RefKalman {
    pub fn new(q: &[f64], r: &[f64]) -> Self {
        let mut f = dense_eye(7);
        for i in 0..3 {
            f[i][i + 4] = 1.0;
        }
        let mut h = dense_zeros(4, 7);
        for i in 0..4 {
            h[i][i] = 1.0;
        }
        RefKalman {
            f,
            h,
            q: dense_diag(q),
            r: dense_diag(r),
        }
    }

    pub fn predict(&self, x: &[f64], p: &Dense) -> (Vec<f64>, Dense) {
        let mut x = x.to_vec();
        if x[2] + x[6] <= 0.0 {
            x[6] = 0.0;
        }
        let x = dense_mv(&self.f, &x);
        let p = dense_add(&dense_mul(&dense_mul(&self.f, p), &dense_t(&self.f)), &self.q, 1.0);
        (x, dense_sym(&p))
    }

    pub fn update(&self, x: &[f64], p: &Dense, z: &[f64]) -> (Vec<f64>, Dense) {
        let hx = dense_mv(&self.h, x);
        let y: Vec<f64> = z.iter().zip(&hx).map(|(a, b)| a - b).collect();
        let ht = dense_t(&self.h);
        let s = dense_sym(&dense_add(&dense_mul(&dense_mul(&self.h, p), &ht), &self.r, 1.0));
        let k = dense_mul(&dense_mul(p, &ht), &dense_inv(&s));
        let ky = dense_mv(&k, &y);
        let x: Vec<f64> = x.iter().zip(&ky).map(|(a, b)| a + b).collect();
        let ikh = dense_add(&dense_eye(7), &dense_mul(&k, &self.h), -1.0);
        (x, dense_sym(&dense_mul(&ikh, p)))
    }
}

/// A random symmetric positive definite matrix `M·Mᵀ + n·I`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Dense {
    let m: Dense = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0) * scale).collect())
        .collect();
    let mut a = dense_mul(&m, &dense_t(&m));
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += n as f64 * scale * scale * 0.1 + 1e-3;
    }
    a
}

pub fn max_abs_diff_dense(a: &Dense, b: &[f64], cols: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((v - b[i * cols + j]).abs());
        }
    }
    worst
}
