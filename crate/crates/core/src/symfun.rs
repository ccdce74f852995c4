//! Symmetric-function algebra of principal curvatures.
//!
//! The speed of the flow is the quotient `Q_k = S_k / S_{k-1}` of
//! consecutive elementary symmetric polynomials
//!
//! ```text
//! S_0 = 1,     S_k = sum_{i_1 < ... < i_k} lambda_{i_1} ... lambda_{i_k}.
//! ```
//!
//! Its partial derivatives in principal-curvature coordinates are, with
//! `S_{j;i}` the j-th elementary symmetric polynomial of lambda with the
//! i-th entry deleted,
//!
//! ```text
//! D_i Q_k = (S_{k-1;i}^2 - S_{k;i} S_{k-2;i}) / S_{k-1}^2
//! ```
//!
//! and on the positive cone the sharp bounds hold:
//!
//! ```text
//! n^-2 Q_k^2 lambda_max^-2  <=  D_i Q_k  <=  1            (uniform parabolicity)
//! D_i Q_k  <=  lambda_i^-2 Q_k^2
//! k/(n-k+1) Q_k^2  <=  |A|^2_k  <=  n Q_k^2               (|A|^2_k = sum D_i Q_k lambda_i^2)
//! ```
//!
//! `Q_k` is concave and homogeneous of degree one, so its second-derivative
//! quadratic form on symmetric matrices is non-positive and vanishes in the
//! radial direction.

use crate::error::{Error, Result};

/// Relative floor defining "S_{k-1} positive": S_{k-1} must exceed
/// `ADMISSIBILITY_FLOOR * (1 + lambda_max^{k-1})`.
pub const ADMISSIBILITY_FLOOR: f64 = 1e-14;

/// Entries below `-NEGATIVE_ENTRY_TOL * (1 + lambda_max)` are rejected by the
/// derivative operations. The slack absorbs the discrete convexity epsilon of
/// frames assembled from grid data.
const NEGATIVE_ENTRY_TOL: f64 = 1e-8;

/// Relative gap under which two eigenvalues count as coincident in the
/// concavity quadratic form.
const COINCIDENT_REL_TOL: f64 = 1e-9;

/// Relative residual of synthetic division beyond which the deleted
/// polynomial is recomputed by a direct product.
const DEFLATION_RESIDUAL_TOL: f64 = 1e-9;

/// Principal curvatures at a point, the argument of every symmetric-function
/// formula in this module.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureVector {
    values: Vec<f64>,
}

impl CurvatureVector {
    /// Panics if `values` is empty.
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "curvature vector needs n >= 1");
        Self { values }
    }

    /// The constant vector (c, ..., c) of length n.
    pub fn constant(c: f64, n: usize) -> Self {
        Self::new(vec![c; n])
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.values.iter().map(|v| c * v).collect())
    }
}

/// Everything the flow needs about Q_k at one point.
#[derive(Debug, Clone)]
pub struct SymmetricFunctionReport {
    /// S_0..S_n.
    pub s: Vec<f64>,
    pub qk: f64,
    /// D_i Q_k, i = 1..n.
    pub grad_qk: Vec<f64>,
    /// |A|^2_k = sum_i D_i Q_k lambda_i^2.
    pub a2k: f64,
    pub lambda_max: f64,
}

/// S_0..S_n by the stable product expansion of prod_i (1 + lambda_i x).
pub fn elementary_sym(lambda: &CurvatureVector) -> Vec<f64> {
    let n = lambda.n();
    let mut s = vec![0.0; n + 1];
    s[0] = 1.0;
    for (m, &l) in lambda.values().iter().enumerate() {
        // degree grows by one per factor; update from the top down
        for j in (1..=m + 1).rev() {
            s[j] += l * s[j - 1];
        }
    }
    s
}

/// Deleted polynomials S_{0;i}..S_{n-1;i} (lambda_i removed), by synthetic
/// division of the full product polynomial by (1 + lambda_i x). Falls back to
/// a direct product when the division residual betrays cancellation.
pub fn deleted_sym(lambda: &CurvatureVector, s_full: &[f64], i: usize) -> Vec<f64> {
    let n = lambda.n();
    debug_assert_eq!(s_full.len(), n + 1);
    let li = lambda.values()[i];
    let mut d = vec![0.0; n];
    d[0] = 1.0;
    for j in 1..n {
        d[j] = s_full[j] - li * d[j - 1];
    }
    let residual = s_full[n] - li * d[n - 1];
    let scale = s_full[n].abs() + li.abs() * d[n - 1].abs() + f64::MIN_POSITIVE;
    if residual.abs() > DEFLATION_RESIDUAL_TOL * scale {
        return product_without(lambda, &[i]);
    }
    d
}

/// Direct product expansion skipping the listed indices.
fn product_without(lambda: &CurvatureVector, skip: &[usize]) -> Vec<f64> {
    let n = lambda.n() - skip.len();
    let mut s = vec![0.0; n + 1];
    s[0] = 1.0;
    let mut deg = 0;
    for (m, &l) in lambda.values().iter().enumerate() {
        if skip.contains(&m) {
            continue;
        }
        deg += 1;
        for j in (1..=deg).rev() {
            s[j] += l * s[j - 1];
        }
    }
    s
}

/// Doubly-deleted polynomials S_{0;ij}..S_{n-2;ij}, i != j.
fn deleted2_sym(lambda: &CurvatureVector, d_i: &[f64], i: usize, j: usize) -> Vec<f64> {
    debug_assert_ne!(i, j);
    let n = lambda.n();
    let lj = lambda.values()[j];
    let mut d = vec![0.0; n - 1];
    d[0] = 1.0;
    for m in 1..n - 1 {
        d[m] = d_i[m] - lj * d[m - 1];
    }
    if n >= 2 {
        let residual = d_i[n - 1] - lj * d[n - 2];
        let scale = d_i[n - 1].abs() + lj.abs() * d[n - 2].abs() + f64::MIN_POSITIVE;
        if residual.abs() > DEFLATION_RESIDUAL_TOL * scale {
            return product_without(lambda, &[i, j]);
        }
    }
    d
}

/// Coefficient lookup treating out-of-range degrees as zero.
#[inline]
fn coeff(s: &[f64], j: isize) -> f64 {
    if j < 0 || j as usize >= s.len() {
        0.0
    } else {
        s[j as usize]
    }
}

pub fn admissibility_floor(k: usize, lambda_max: f64) -> f64 {
    ADMISSIBILITY_FLOOR * (1.0 + lambda_max.max(0.0).powi(k as i32 - 1))
}

fn check_s_km1(lambda: &CurvatureVector, s: &[f64], k: usize) -> Result<()> {
    let floor = admissibility_floor(k, lambda.lambda_max());
    if s[k - 1] <= floor {
        return Err(Error::NonAdmissible {
            k,
            s_km1: s[k - 1],
            floor,
        });
    }
    Ok(())
}

fn check_nonnegative(lambda: &CurvatureVector, k: usize) -> Result<()> {
    let tol = NEGATIVE_ENTRY_TOL * (1.0 + lambda.lambda_max().abs());
    if let Some(&bad) = lambda.values().iter().find(|v| **v < -tol) {
        return Err(Error::NonAdmissible {
            k,
            s_km1: bad,
            floor: -tol,
        });
    }
    Ok(())
}

fn assert_k(lambda: &CurvatureVector, k: usize) {
    assert!(k >= 1 && k <= lambda.n(), "require 1 <= k <= n");
}

/// The quotient speed Q_k = S_k / S_{k-1}. Degree-one homogeneous.
pub fn qk(lambda: &CurvatureVector, k: usize) -> Result<f64> {
    assert_k(lambda, k);
    let s = elementary_sym(lambda);
    check_s_km1(lambda, &s, k)?;
    Ok(s[k] / s[k - 1])
}

/// All partial derivatives D_i Q_k. For k = 1 this is the all-ones vector.
pub fn grad_qk(lambda: &CurvatureVector, k: usize) -> Result<Vec<f64>> {
    assert_k(lambda, k);
    check_nonnegative(lambda, k)?;
    let s = elementary_sym(lambda);
    check_s_km1(lambda, &s, k)?;
    Ok(grad_from_parts(lambda, &s, k))
}

fn grad_from_parts(lambda: &CurvatureVector, s: &[f64], k: usize) -> Vec<f64> {
    let n = lambda.n();
    let denom = s[k - 1] * s[k - 1];
    (0..n)
        .map(|i| {
            let di = deleted_sym(lambda, s, i);
            let skm1 = coeff(&di, k as isize - 1);
            let sk = coeff(&di, k as isize);
            let skm2 = coeff(&di, k as isize - 2);
            (skm1 * skm1 - sk * skm2) / denom
        })
        .collect()
}

/// |A|^2_k = sum_i D_i Q_k lambda_i^2.
pub fn a2k(lambda: &CurvatureVector, k: usize) -> Result<f64> {
    let grad = grad_qk(lambda, k)?;
    Ok(grad
        .iter()
        .zip(lambda.values())
        .map(|(d, l)| d * l * l)
        .sum())
}

/// Full report for one curvature vector.
pub fn report(lambda: &CurvatureVector, k: usize) -> Result<SymmetricFunctionReport> {
    assert_k(lambda, k);
    check_nonnegative(lambda, k)?;
    report_extended(lambda, k)
}

/// Like [`report`], but on the larger cone {S_{k-1} > 0} with mixed-sign
/// curvatures allowed. The graph stepper uses this for the boundary layer
/// next to frozen Dirichlet data, where the surface dips out of the convex
/// cone while the speed quotient stays well defined.
pub fn report_extended(lambda: &CurvatureVector, k: usize) -> Result<SymmetricFunctionReport> {
    assert_k(lambda, k);
    let s = elementary_sym(lambda);
    check_s_km1(lambda, &s, k)?;
    let qk = s[k] / s[k - 1];
    let grad_qk = grad_from_parts(lambda, &s, k);
    let a2k = grad_qk
        .iter()
        .zip(lambda.values())
        .map(|(d, l)| d * l * l)
        .sum();
    Ok(SymmetricFunctionReport {
        s,
        qk,
        grad_qk,
        a2k,
        lambda_max: lambda.lambda_max(),
    })
}

/// Second derivatives D_ij Q_k (n x n, row-major), by analytic
/// differentiation of the deleted-polynomial formula for D_i Q_k:
///
/// ```text
/// D_ii Q_k = -2 D_i Q_k S_{k-2;i} / S_{k-1}
/// D_ij Q_k = (2 S_{k-1;i} S_{k-2;ij} - S_{k-1;ij} S_{k-2;i} - S_{k;i} S_{k-3;ij}) / S_{k-1}^2
///            - 2 S_{k-2;j} D_i Q_k / S_{k-1}                                  (i != j)
/// ```
pub fn hess_qk(lambda: &CurvatureVector, k: usize) -> Result<Vec<f64>> {
    assert_k(lambda, k);
    check_nonnegative(lambda, k)?;
    let n = lambda.n();
    let s = elementary_sym(lambda);
    check_s_km1(lambda, &s, k)?;
    let skm1_full = s[k - 1];
    let denom2 = skm1_full * skm1_full;

    let deleted: Vec<Vec<f64>> = (0..n).map(|i| deleted_sym(lambda, &s, i)).collect();
    let grad: Vec<f64> = (0..n)
        .map(|i| {
            let di = &deleted[i];
            (coeff(di, k as isize - 1) * coeff(di, k as isize - 1)
                - coeff(di, k as isize) * coeff(di, k as isize - 2))
                / denom2
        })
        .collect();

    let mut h = vec![0.0; n * n];
    for i in 0..n {
        let di = &deleted[i];
        h[i * n + i] = -2.0 * grad[i] * coeff(di, k as isize - 2) / skm1_full;
        for j in 0..n {
            if i == j {
                continue;
            }
            let dij = deleted2_sym(lambda, di, i, j);
            let term = 2.0 * coeff(di, k as isize - 1) * coeff(&dij, k as isize - 2)
                - coeff(&dij, k as isize - 1) * coeff(di, k as isize - 2)
                - coeff(di, k as isize) * coeff(&dij, k as isize - 3);
            h[i * n + j] =
                term / denom2 - 2.0 * coeff(&deleted[j], k as isize - 2) * grad[i] / skm1_full;
        }
    }
    Ok(h)
}

/// Second-derivative quadratic form of Q_k on symmetric matrices at a
/// diagonal point:
///
/// ```text
/// sum_{i,j} D_ij Q_k V_ii V_jj + sum_{i != j} (D_i Q_k - D_j Q_k)/(lambda_i - lambda_j) V_ij^2
/// ```
///
/// Coincident eigenvalues replace the difference quotient by its analytic
/// limit `D_ii Q_k - D_ij Q_k`. Non-positive on the positive cone by
/// concavity; zero in the radial direction V = diag(lambda).
///
/// `v` is the symmetric matrix in row-major order (n x n entries).
pub fn concavity_quadratic_form(lambda: &CurvatureVector, k: usize, v: &[f64]) -> Result<f64> {
    let n = lambda.n();
    assert_eq!(v.len(), n * n, "V must be n x n");
    let grad = grad_qk(lambda, k)?;
    let hess = hess_qk(lambda, k)?;
    let lam = lambda.values();

    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += hess[i * n + j] * v[i * n + i] * v[j * n + j];
        }
    }
    let scale = lambda.lambda_max().abs().max(1e-30);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let gap = lam[i] - lam[j];
            let quotient = if gap.abs() <= COINCIDENT_REL_TOL * scale {
                hess[i * n + i] - hess[i * n + j]
            } else {
                (grad[i] - grad[j]) / gap
            };
            total += quotient * v[i * n + j] * v[i * n + j];
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::SplitMix64;
    use proptest::prelude::*;

    /// Brute-force oracle: S_j by explicit subset enumeration.
    fn elementary_sym_bruteforce(lambda: &[f64]) -> Vec<f64> {
        let n = lambda.len();
        let mut s = vec![0.0; n + 1];
        for mask in 0u32..(1u32 << n) {
            let mut prod = 1.0;
            let mut count = 0;
            for (i, &l) in lambda.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    prod *= l;
                    count += 1;
                }
            }
            s[count] += prod;
        }
        s
    }

    fn binomial(n: usize, k: usize) -> f64 {
        if k > n {
            return 0.0;
        }
        let mut r = 1.0;
        for i in 0..k {
            r = r * (n - i) as f64 / (i + 1) as f64;
        }
        r
    }

    fn random_admissible(rng: &mut SplitMix64, n: usize, lo: f64, hi: f64) -> CurvatureVector {
        let mut v: Vec<f64> = (0..n).map(|_| rng.uniform(lo, hi)).collect();
        // occasionally force a coincident pair to exercise the limit paths
        if n >= 2 && rng.next_f64() < 0.1 {
            v[1] = v[0];
        }
        CurvatureVector::new(v)
    }

    #[test]
    fn elementary_sym_of_1_2_3() {
        let s = elementary_sym(&CurvatureVector::new(vec![1.0, 2.0, 3.0]));
        assert_eq!(s, vec![1.0, 6.0, 11.0, 6.0]);
    }

    #[test]
    fn elementary_sym_constant_is_binomial() {
        for n in 1..=8 {
            let c = 0.7;
            let s = elementary_sym(&CurvatureVector::constant(c, n));
            for (j, &sj) in s.iter().enumerate() {
                let expect = binomial(n, j) * c.powi(j as i32);
                assert!((sj - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn elementary_sym_matches_bruteforce_n20() {
        let mut rng = SplitMix64::new(0x51);
        for _ in 0..5 {
            let v: Vec<f64> = (0..20).map(|_| rng.uniform(0.0, 5.0)).collect();
            let fast = elementary_sym(&CurvatureVector::new(v.clone()));
            let slow = elementary_sym_bruteforce(&v);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn deleted_sym_matches_direct_product() {
        let mut rng = SplitMix64::new(0x52);
        for n in 2..=12 {
            let lam = random_admissible(&mut rng, n, 0.01, 8.0);
            let s = elementary_sym(&lam);
            for i in 0..n {
                let d = deleted_sym(&lam, &s, i);
                let direct = product_without(&lam, &[i]);
                for (a, b) in d.iter().zip(&direct) {
                    assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn qk_simple_values() {
        let l = CurvatureVector::constant(1.0, 3);
        assert!((qk(&l, 2).unwrap() - 1.0).abs() < 1e-15);

        // constant 1/rho: Q_k = ((n-k+1)/k)/rho
        for n in 1..=6 {
            for k in 1..=n {
                let rho = 2.5;
                let l = CurvatureVector::constant(1.0 / rho, n);
                let expect = (n - k + 1) as f64 / k as f64 / rho;
                assert!((qk(&l, k).unwrap() - expect).abs() < 1e-14);
            }
        }

        let l = CurvatureVector::new(vec![1.0, 2.0, 3.0]);
        assert!((qk(&l, 2).unwrap() - 11.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn qk_refuses_vanishing_s_km1() {
        let l = CurvatureVector::new(vec![0.0, 0.0, 0.0]);
        assert!(matches!(qk(&l, 2), Err(Error::NonAdmissible { .. })));
    }

    #[test]
    fn grad_qk_k1_is_ones() {
        let l = CurvatureVector::new(vec![0.3, 1.7, 4.0, 0.9]);
        let g = grad_qk(&l, 1).unwrap();
        for d in g {
            assert!((d - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn grad_qk_equal_entries_k2() {
        let l = CurvatureVector::constant(1.0, 3);
        let g = grad_qk(&l, 2).unwrap();
        for d in g {
            assert!((d - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    /// Central finite difference of qk, the independent gradient oracle.
    fn grad_fd(lambda: &CurvatureVector, k: usize, h: f64) -> Vec<f64> {
        let n = lambda.n();
        (0..n)
            .map(|i| {
                let mut up = lambda.values().to_vec();
                let mut dn = lambda.values().to_vec();
                up[i] += h;
                dn[i] -= h;
                (qk(&CurvatureVector::new(up), k).unwrap()
                    - qk(&CurvatureVector::new(dn), k).unwrap())
                    / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn grad_qk_matches_finite_differences() {
        let mut rng = SplitMix64::new(0x53);
        for _ in 0..200 {
            let n = 1 + rng.below(6);
            let k = 1 + rng.below(n);
            let lam = random_admissible(&mut rng, n, 0.1, 10.0);
            let g = grad_qk(&lam, k).unwrap();
            let fd = grad_fd(&lam, k, 1e-6);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-8, "n={n} k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn a2k_values_and_bounds() {
        let l = CurvatureVector::new(vec![0.5, 1.5, 2.5]);
        let expect: f64 = l.values().iter().map(|x| x * x).sum();
        assert!((a2k(&l, 1).unwrap() - expect).abs() < 1e-13);

        // lambda = (1,1,1), k=2: |A|^2_2 = 1, bounds [Q^2, 3 Q^2] = [1, 3]
        let l = CurvatureVector::constant(1.0, 3);
        assert!((a2k(&l, 2).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inequality_suite_small_sample() {
        // (2.1), (2.2), (2.3) on random admissible vectors
        let mut rng = SplitMix64::new(0x54);
        for _ in 0..2000 {
            let n = 1 + rng.below(6);
            let k = 1 + rng.below(n);
            let lam = random_admissible(&mut rng, n, 0.01, 4.0);
            let rep = report(&lam, k).unwrap();
            let q2 = rep.qk * rep.qk;
            let lmax = rep.lambda_max;
            for (i, &d) in rep.grad_qk.iter().enumerate() {
                let lower = q2 / ((n * n) as f64 * lmax * lmax);
                assert!(d >= lower - 1e-12 * lower.max(1.0));
                assert!(d <= 1.0 + 1e-12);
                let li = lam.values()[i];
                let cap = q2 / (li * li);
                assert!(d <= cap + 1e-12 * cap.max(1.0));
            }
            let low = k as f64 / (n - k + 1) as f64 * q2;
            let high = n as f64 * q2;
            assert!(rep.a2k >= low - 1e-12 * low.max(1.0));
            assert!(rep.a2k <= high + 1e-12 * high.max(1.0));
        }
    }

    #[test]
    fn hess_symmetric_and_matches_fd() {
        let mut rng = SplitMix64::new(0x55);
        for _ in 0..60 {
            let n = 2 + rng.below(4);
            let k = 1 + rng.below(n);
            let lam = random_admissible(&mut rng, n, 0.2, 4.0);
            let h = hess_qk(&lam, k).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert!(
                        (h[i * n + j] - h[j * n + i]).abs() <= 1e-9 * (1.0 + h[i * n + j].abs()),
                        "hessian asymmetric"
                    );
                }
            }
            // finite differences of the gradient
            let eps = 1e-5;
            for j in 0..n {
                let mut up = lam.values().to_vec();
                let mut dn = lam.values().to_vec();
                up[j] += eps;
                dn[j] -= eps;
                let gu = grad_qk(&CurvatureVector::new(up), k).unwrap();
                let gd = grad_qk(&CurvatureVector::new(dn), k).unwrap();
                for i in 0..n {
                    let fd = (gu[i] - gd[i]) / (2.0 * eps);
                    assert!(
                        (h[i * n + j] - fd).abs() <= 2e-5 * (1.0 + fd.abs()),
                        "n={n} k={k} H[{i}{j}]={} fd={fd}",
                        h[i * n + j]
                    );
                }
            }
        }
    }

    #[test]
    fn hess_radial_direction_vanishes() {
        // gradient is homogeneous of degree zero: H lambda = 0
        let mut rng = SplitMix64::new(0x56);
        for _ in 0..100 {
            let n = 2 + rng.below(5);
            let k = 1 + rng.below(n);
            let lam = random_admissible(&mut rng, n, 0.1, 5.0);
            let h = hess_qk(&lam, k).unwrap();
            for i in 0..n {
                let dot: f64 = (0..n).map(|j| h[i * n + j] * lam.values()[j]).sum();
                let scale: f64 = (0..n).map(|j| (h[i * n + j] * lam.values()[j]).abs()).sum();
                assert!(dot.abs() <= 1e-10 * scale.max(1.0), "row {i}: {dot}");
            }
        }
    }

    #[test]
    fn concavity_k1_vanishes() {
        let l = CurvatureVector::new(vec![0.4, 1.1, 2.2]);
        let v = vec![0.3, -0.5, 0.1, -0.5, 0.9, 0.2, 0.1, 0.2, -0.7];
        let q = concavity_quadratic_form(&l, 1, &v).unwrap();
        assert!(q.abs() < 1e-14);
    }

    #[test]
    fn concavity_radial_direction_vanishes() {
        let l = CurvatureVector::new(vec![0.5, 1.0, 2.0]);
        let n = 3;
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = l.values()[i];
        }
        let q = concavity_quadratic_form(&l, 2, &v).unwrap();
        assert!(q.abs() < 1e-12, "{q}");
    }

    #[test]
    fn concavity_nonpositive_random() {
        let mut rng = SplitMix64::new(0x57);
        for _ in 0..2000 {
            let n = 1 + rng.below(6);
            let k = 1 + rng.below(n);
            let lam = random_admissible(&mut rng, n, 0.05, 4.0);
            let mut v = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let x = rng.uniform(-1.0, 1.0);
                    v[i * n + j] = x;
                    v[j * n + i] = x;
                }
            }
            let q = concavity_quadratic_form(&lam, k, &v).unwrap();
            assert!(q <= 1e-10, "n={n} k={k} q={q}");
        }
    }

    #[test]
    fn concavity_handles_coincident_pairs() {
        // exactly equal eigenvalues take the analytic-limit path
        let l = CurvatureVector::new(vec![1.0, 1.0, 2.0]);
        let mut v = vec![0.0; 9];
        v[0 * 3 + 1] = 1.0;
        v[1 * 3 + 0] = 1.0;
        let q = concavity_quadratic_form(&l, 2, &v).unwrap();
        // compare against a nearly-coincident evaluation
        let l2 = CurvatureVector::new(vec![1.0 + 1e-7, 1.0, 2.0]);
        let q2 = concavity_quadratic_form(&l2, 2, &v).unwrap();
        assert!((q - q2).abs() < 1e-5, "{q} vs {q2}");
        assert!(q <= 1e-10);
    }

    proptest! {
        #[test]
        fn qk_homogeneous_degree_one(
            vals in proptest::collection::vec(0.1f64..5.0, 1..6),
            c in 0.1f64..10.0,
            kk in 0usize..6,
        ) {
            let lam = CurvatureVector::new(vals);
            let k = 1 + kk % lam.n();
            let q1 = qk(&lam, k).unwrap();
            let q2 = qk(&lam.scale(c), k).unwrap();
            prop_assert!((q2 - c * q1).abs() <= 1e-12 * (1.0 + (c * q1).abs()));
        }

        #[test]
        fn grad_homogeneous_degree_zero(
            vals in proptest::collection::vec(0.1f64..5.0, 1..6),
            c in 0.1f64..10.0,
            kk in 0usize..6,
        ) {
            let lam = CurvatureVector::new(vals);
            let k = 1 + kk % lam.n();
            let g1 = grad_qk(&lam, k).unwrap();
            let g2 = grad_qk(&lam.scale(c), k).unwrap();
            for (a, b) in g1.iter().zip(&g2) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn euler_relation(
            vals in proptest::collection::vec(0.1f64..5.0, 1..6),
            kk in 0usize..6,
        ) {
            let lam = CurvatureVector::new(vals);
            let k = 1 + kk % lam.n();
            let g = grad_qk(&lam, k).unwrap();
            let q = qk(&lam, k).unwrap();
            let dot: f64 = g.iter().zip(lam.values()).map(|(d, l)| d * l).sum();
            prop_assert!((dot - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }
}
