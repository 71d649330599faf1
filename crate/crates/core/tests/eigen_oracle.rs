//! Eigenvalues checked against roots of the characteristic polynomial,
//! located by sign changes of det(A - λI) and refined by bisection.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specpts_core::spectral::{sym_eigen, sym_eigenvalues};

fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let m = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= m * a[c][k];
            }
        }
    }
    d
}

fn char_poly(a: &[Vec<f64>], x: f64) -> f64 {
    let mut b = a.to_vec();
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= x;
    }
    det(b)
}

fn oracle_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let r = (0..n).map(|i| a[i].iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max) + 1.0;
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut prev_x = -r;
    let mut prev = char_poly(a, prev_x);
    for k in 1..=steps {
        let x = -r + 2.0 * r * k as f64 / steps as f64;
        let v = char_poly(a, x);
        if prev == 0.0 {
            roots.push(prev_x);
        } else if prev.signum() != v.signum() && v != 0.0 {
            let (mut lo, mut hi, mut flo) = (prev_x, x, prev);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = char_poly(a, mid);
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev = v;
    }
    roots
}

#[test]
fn random_symmetric_6x6_matches_characteristic_roots() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 6;
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        let expect = oracle_eigenvalues(&a);
        assert_eq!(expect.len(), n, "seed {seed}: roots {expect:?}");
        let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
        let got = sym_eigenvalues(&m).unwrap();
        for (x, y) in got.values().iter().zip(&expect) {
            assert!((x - y).abs() < 1e-9, "seed {seed}: {x} vs {y}");
        }
    }
}

#[test]
fn eigenvectors_are_orthonormal_and_have_small_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 9;
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let a = &b + b.transpose();
    let e = sym_eigen(&a).unwrap();
    let v = &e.vectors;
    let orth = v.transpose() * v - DMatrix::identity(n, n);
    assert!(orth.amax() < 1e-12);
    for k in 0..n {
        let col = v.column(k);
        let r = &a * col - col * e.spectrum.values()[k];
        assert!(r.amax() < 1e-12);
    }
}
