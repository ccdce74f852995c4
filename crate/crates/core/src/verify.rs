//! Randomized verification sweeps over the symmetric-function inequalities
//! and the closed-form oracles. Deterministic for a fixed seed.

use crate::oracle::{existence_time_lower_bound, BallSolution};
use crate::symfun::{self, CurvatureVector};
use crate::util::SplitMix64;

/// Normalized violation threshold for the algebraic inequalities.
pub const INEQUALITY_TOL: f64 = 1e-12;
/// One-sided threshold for the concavity quadratic form.
pub const CONCAVITY_TOL: f64 = 1e-10;
/// Max absolute error allowed between grad Q_k and central differences.
pub const GRADIENT_FD_TOL: f64 = 1e-7;
/// Central-difference step of the gradient consistency check.
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    /// Samples per (n, k) pair.
    pub samples: usize,
    pub nmax: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            nmax: 6,
            seed: 0x5eed,
        }
    }
}

/// Worst normalized violations observed across the sweep. All inequalities
/// hold exactly in real arithmetic; the recorded numbers bound the floating
/// point slack.
#[derive(Debug, Clone, Copy)]
pub struct InequalityReport {
    pub samples_per_pair: usize,
    pub nmax: usize,
    /// n^-2 Q_k^2 lambda_max^-2 <= D_i Q_k
    pub uniform_lower: f64,
    /// D_i Q_k <= 1
    pub uniform_upper: f64,
    /// D_i Q_k <= lambda_i^-2 Q_k^2
    pub parabolic_cap: f64,
    /// k/(n-k+1) Q_k^2 <= |A|^2_k
    pub reaction_lower: f64,
    /// |A|^2_k <= n Q_k^2
    pub reaction_upper: f64,
    /// Largest concavity quadratic-form value (should be <= 0).
    pub concavity_max: f64,
    /// Max |grad Q_k - central difference| over 1000 samples.
    pub gradient_fd_max_err: f64,
}

impl InequalityReport {
    pub fn pass(&self) -> bool {
        self.uniform_lower <= INEQUALITY_TOL
            && self.uniform_upper <= INEQUALITY_TOL
            && self.parabolic_cap <= INEQUALITY_TOL
            && self.reaction_lower <= INEQUALITY_TOL
            && self.reaction_upper <= INEQUALITY_TOL
            && self.concavity_max <= CONCAVITY_TOL
            && self.gradient_fd_max_err <= GRADIENT_FD_TOL
    }
}

fn violation(lhs: f64, rhs: f64) -> f64 {
    // how far lhs exceeds rhs, relative to the larger scale
    (lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0)
}

fn sample_lambda(rng: &mut SplitMix64, n: usize, lo: f64, hi: f64) -> CurvatureVector {
    let mut v: Vec<f64> = (0..n).map(|_| rng.uniform(lo, hi)).collect();
    if n >= 2 && rng.next_f64() < 0.1 {
        v[1] = v[0];
    }
    CurvatureVector::new(v)
}

pub fn inequality_sweep(cfg: &VerifyConfig) -> InequalityReport {
    let mut rng = SplitMix64::new(cfg.seed);
    let mut rep = InequalityReport {
        samples_per_pair: cfg.samples,
        nmax: cfg.nmax,
        uniform_lower: f64::NEG_INFINITY,
        uniform_upper: f64::NEG_INFINITY,
        parabolic_cap: f64::NEG_INFINITY,
        reaction_lower: f64::NEG_INFINITY,
        reaction_upper: f64::NEG_INFINITY,
        concavity_max: f64::NEG_INFINITY,
        gradient_fd_max_err: 0.0,
    };
    for n in 1..=cfg.nmax {
        for k in 1..=n {
            for _ in 0..cfg.samples {
                let lam = sample_lambda(&mut rng, n, 0.02, 4.0);
                let r = symfun::report(&lam, k).expect("positive cone is admissible");
                let q2 = r.qk * r.qk;
                let lmax = r.lambda_max;
                for (i, &d) in r.grad_qk.iter().enumerate() {
                    let lower = q2 / ((n * n) as f64 * lmax * lmax);
                    rep.uniform_lower = rep.uniform_lower.max(violation(lower, d));
                    rep.uniform_upper = rep.uniform_upper.max(violation(d, 1.0));
                    let li = lam.values()[i];
                    rep.parabolic_cap = rep.parabolic_cap.max(violation(d, q2 / (li * li)));
                }
                let low = k as f64 / (n - k + 1) as f64 * q2;
                let high = n as f64 * q2;
                rep.reaction_lower = rep.reaction_lower.max(violation(low, r.a2k));
                rep.reaction_upper = rep.reaction_upper.max(violation(r.a2k, high));
            }
            // concavity fuzz on a slightly safer cone
            for _ in 0..cfg.samples / 10 {
                let lam = sample_lambda(&mut rng, n, 0.05, 4.0);
                let mut v = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..=i {
                        let x = rng.uniform(-1.0, 1.0);
                        v[i * n + j] = x;
                        v[j * n + i] = x;
                    }
                }
                let q = symfun::concavity_quadratic_form(&lam, k, &v)
                    .expect("positive cone is admissible");
                rep.concavity_max = rep.concavity_max.max(q);
            }
        }
    }
    rep.gradient_fd_max_err = gradient_consistency(1000, cfg.seed ^ 0x9e37);
    rep
}

/// Max absolute deviation between grad Q_k and central differences of Q_k
/// with step 1e-6, over random admissible vectors in [0.1, 10]^n.
pub fn gradient_consistency(samples: usize, seed: u64) -> f64 {
    let mut rng = SplitMix64::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let n = 1 + rng.below(6);
        let k = 1 + rng.below(n);
        let lam = sample_lambda(&mut rng, n, 0.1, 10.0);
        let grad = symfun::grad_qk(&lam, k).unwrap();
        for i in 0..n {
            let mut up = lam.values().to_vec();
            let mut dn = lam.values().to_vec();
            up[i] += FD_STEP;
            dn[i] -= FD_STEP;
            let fd = (symfun::qk(&CurvatureVector::new(up), k).unwrap()
                - symfun::qk(&CurvatureVector::new(dn), k).unwrap())
                / (2.0 * FD_STEP);
            worst = worst.max((grad[i] - fd).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy)]
pub struct OracleReport {
    /// Max |rho'(t) + Q_k(1/rho)| over sampled times and (n, k).
    pub ode_max_err: f64,
    /// Extinction time monotone increasing in k and decreasing in n.
    pub monotone_ok: bool,
}

impl OracleReport {
    pub fn pass(&self) -> bool {
        self.ode_max_err <= 1e-8 && self.monotone_ok
    }
}

pub fn oracle_checks() -> OracleReport {
    let mut ode_max_err = 0.0f64;
    for n in 1..=6usize {
        for k in 1..=n {
            let sol = BallSolution::new(0.0, 1.7, n, k);
            for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let t = frac * sol.extinction_time() * 0.99;
                let h = 1e-6;
                let d = (sol.radius(t + h).unwrap() - sol.radius(t - h).unwrap()) / (2.0 * h);
                let rho = sol.radius(t).unwrap();
                let speed =
                    symfun::qk(&CurvatureVector::constant(1.0 / rho, n), k).unwrap();
                ode_max_err = ode_max_err.max((d + speed).abs());
            }
        }
    }
    let mut monotone_ok = true;
    for n in 1..=6usize {
        for k in 1..n {
            if existence_time_lower_bound(1.0, n, k + 1) <= existence_time_lower_bound(1.0, n, k) {
                monotone_ok = false;
            }
        }
    }
    for n in 2..=6usize {
        if existence_time_lower_bound(1.0, n, 1) >= existence_time_lower_bound(1.0, n - 1, 1) {
            monotone_ok = false;
        }
    }
    OracleReport {
        ode_max_err,
        monotone_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_sweep_passes() {
        let cfg = VerifyConfig {
            samples: 500,
            nmax: 4,
            seed: 1,
        };
        let rep = inequality_sweep(&cfg);
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = VerifyConfig {
            samples: 200,
            nmax: 3,
            seed: 77,
        };
        let a = inequality_sweep(&cfg);
        let b = inequality_sweep(&cfg);
        assert_eq!(a.uniform_lower, b.uniform_lower);
        assert_eq!(a.concavity_max, b.concavity_max);
        assert_eq!(a.gradient_fd_max_err, b.gradient_fd_max_err);
    }

    #[test]
    fn oracle_report_passes() {
        let rep = oracle_checks();
        assert!(rep.pass(), "{rep:?}");
    }
}
