//! Closed-form overlap integrals between cluster pairs and the surrogate
//! diagonal assembled from them.
//!
//! Each integral has the form ∫ w̃(g₁,g₂) q(y) dy with
//! w̃ = √(π_{g₁}φ_{g₁} π_{g₂}φ_{g₂}). Completing the square turns √(φ₁φ₂)
//! into a single Gaussian in y times a separation kill term, so the
//! integrals reduce to Gaussian moments:
//!
//!   w̃(y) = C · φ(y | m, s²),
//!   C  = √(π₁π₂) √(2σ₁σ₂/(σ₁²+σ₂²)) exp{−(γ₁−γ₂)²/(4(σ₁²+σ₂²))},
//!   m  = (γ₁σ₂² + γ₂σ₁²)/(σ₁²+σ₂²),   s² = 2σ₁²σ₂²/(σ₁²+σ₂²).

use crate::error::{Error, Result};
use crate::params::ClrParams;

use super::SurrogateDiag;

struct OverlapParts {
    c: f64,
    s2: f64,
    /// m − γ₁, the offset of the product-Gaussian mean from cluster g₁.
    u: f64,
}

fn overlap_parts(params: &ClrParams, x: &[f64], g1: usize, g2: usize) -> OverlapParts {
    let gamma1 = params.mean(g1, x);
    let gamma2 = params.mean(g2, x);
    let (v1, v2) = (params.sigma2()[g1], params.sigma2()[g2]);
    let (p1, p2) = (params.pi()[g1], params.pi()[g2]);
    let ssum = v1 + v2;
    let diff = gamma1 - gamma2;
    let c = (p1 * p2).sqrt()
        * (2.0 * v1.sqrt() * v2.sqrt() / ssum).sqrt()
        * (-diff * diff / (4.0 * ssum)).exp();
    OverlapParts {
        c,
        s2: 2.0 * v1 * v2 / ssum,
        u: v1 * (gamma2 - gamma1) / ssum,
    }
}

fn check_pair(params: &ClrParams, g1: usize, g2: usize) -> Result<()> {
    if g1 == g2 {
        return Err(Error::SameCluster { g: g1 });
    }
    let g = params.g_count();
    if g1 >= g || g2 >= g {
        return Err(Error::InvalidClusterCount { g: g1.max(g2) });
    }
    Ok(())
}

/// diag(xxᵀ) · ∫ w̃(g₁,g₂) Δ²_{β,g₁} dy with Δ_{β,g} = (y−γ_g)/σ²_g,
/// as a length-(p+1) vector.
pub fn f1(x: &[f64], params: &ClrParams, g1: usize, g2: usize) -> Result<Vec<f64>> {
    check_pair(params, g1, g2)?;
    let parts = overlap_parts(params, x, g1, g2);
    let v1 = params.sigma2()[g1];
    // E[(Y−γ₁)²] under N(m, s²) is s² + u²
    let scalar = parts.c * (parts.s2 + parts.u * parts.u) / (v1 * v1);
    Ok(x.iter().map(|&xi| xi * xi * scalar).collect())
}

/// ∫ w̃(g₁,g₂) Δ²_{σ²,g₁} dy with Δ_{σ²,g} = ((y−γ_g)² − σ²_g)/(2σ⁴_g).
///
/// With T = Y − γ₁ ~ N(u, s²):
/// E[(T²−σ₁²)²] = u⁴ + 6u²s² + 3s⁴ − 2σ₁²(u²+s²) + σ₁⁴.
pub fn f2(x: &[f64], params: &ClrParams, g1: usize, g2: usize) -> Result<f64> {
    check_pair(params, g1, g2)?;
    let parts = overlap_parts(params, x, g1, g2);
    let v1 = params.sigma2()[g1];
    let (u2, s2) = (parts.u * parts.u, parts.s2);
    let quartic = u2 * u2 + 6.0 * u2 * s2 + 3.0 * s2 * s2 - 2.0 * v1 * (u2 + s2) + v1 * v1;
    Ok(parts.c * quartic / (4.0 * v1 * v1 * v1 * v1))
}

/// ∫ w̃(g₁,g₂) dy, the Bhattacharyya-type overlap mass.
pub fn f3(x: &[f64], params: &ClrParams, g1: usize, g2: usize) -> Result<f64> {
    check_pair(params, g1, g2)?;
    Ok(overlap_parts(params, x, g1, g2).c)
}

/// Assemble the surrogate diagonal Q from the overlap integrals:
/// Q_{β_g} = ½ Σ_{g*≠g} f1(g,g*), Q_{σ²_g} = ½ Σ_{g*≠g} f2(g,g*), and
/// Q_{π_g} = ½ Σ_{g*≠g} f3(g,g*)/π_g² + ½ Σ_{g*≠G} f3(G,g*)/π_G²
///           + f3(g,G)/(π_g π_G).
///
/// For a single cluster there are no cross terms and the zero vector is
/// returned.
pub fn surrogate_q(x: &[f64], params: &ClrParams) -> Result<SurrogateDiag> {
    let g_count = params.g_count();
    let d = params.theta_dim();
    let p = params.p();
    let mut q = vec![0.0; d];
    if g_count == 1 {
        return Ok(SurrogateDiag { q });
    }
    for g in 0..g_count {
        let mut beta_acc = vec![0.0; p + 1];
        let mut sigma_acc = 0.0;
        for other in 0..g_count {
            if other == g {
                continue;
            }
            for (acc, v) in beta_acc.iter_mut().zip(f1(x, params, g, other)?) {
                *acc += v;
            }
            sigma_acc += f2(x, params, g, other)?;
        }
        let off = params.beta_offset(g);
        for (j, v) in beta_acc.iter().enumerate() {
            q[off + j] = 0.5 * v;
        }
        q[params.sigma2_offset(g)] = 0.5 * sigma_acc;
    }
    let last = g_count - 1;
    let pi = params.pi();
    // the Σ_{g*≠G} f3(G,g*)/π_G² term is shared by every π entry
    let mut last_sum = 0.0;
    for other in 0..g_count {
        if other != last {
            last_sum += f3(x, params, last, other)?;
        }
    }
    let shared = 0.5 * last_sum / (pi[last] * pi[last]);
    for g in 0..g_count - 1 {
        let mut own = 0.0;
        for other in 0..g_count {
            if other != g {
                own += f3(x, params, g, other)?;
            }
        }
        q[params.pi_offset(g)] =
            0.5 * own / (pi[g] * pi[g]) + shared + f3(x, params, g, last)? / (pi[g] * pi[last]);
    }
    Ok(SurrogateDiag { q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::quad::{integrate_windows, merge_windows, QuadControls};
    use crate::math::log_normal_pdf;
    use rand::Rng;

    fn w_tilde(y: f64, x: &[f64], params: &ClrParams, g1: usize, g2: usize) -> f64 {
        let l1 = params.pi()[g1].ln() + log_normal_pdf(y, params.mean(g1, x), params.sigma2()[g1]);
        let l2 = params.pi()[g2].ln() + log_normal_pdf(y, params.mean(g2, x), params.sigma2()[g2]);
        (0.5 * (l1 + l2)).exp()
    }

    fn oracle_windows(x: &[f64], params: &ClrParams, g1: usize, g2: usize) -> Vec<(f64, f64)> {
        let mut spans = Vec::new();
        for g in [g1, g2] {
            let gamma = params.mean(g, x);
            let s = params.sigma2()[g].sqrt();
            spans.push((gamma - 15.0 * s, gamma + 15.0 * s));
        }
        merge_windows(spans)
    }

    fn quad_oracle<Q: Fn(f64) -> f64>(
        x: &[f64],
        params: &ClrParams,
        g1: usize,
        g2: usize,
        weight: Q,
    ) -> f64 {
        let f = |y: f64| w_tilde(y, x, params, g1, g2) * weight(y);
        let controls = QuadControls {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_intervals: 1024,
        };
        integrate_windows(&f, &oracle_windows(x, params, g1, g2), &controls)
            .unwrap()
            .value
    }

    fn two_cluster(beta: [[f64; 2]; 2], sigma2: [f64; 2], pi: [f64; 2]) -> ClrParams {
        ClrParams::new(
            vec![beta[0].to_vec(), beta[1].to_vec()],
            sigma2.to_vec(),
            pi.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn f1_identical_clusters_reduces_to_variance_ratio() {
        let params = two_cluster([[1.0, 2.0], [1.0, 2.0]], [1.5, 1.5], [0.3, 0.7]);
        let x = [1.0, -0.5];
        let got = f1(&x, &params, 0, 1).unwrap();
        let scale = (0.3f64 * 0.7).sqrt() / 1.5;
        for (j, &v) in got.iter().enumerate() {
            assert!((v - x[j] * x[j] * scale).abs() < 1e-14);
        }
    }

    #[test]
    fn f2_identical_clusters_is_central_fourth_moment() {
        let params = two_cluster([[0.0, 1.0], [0.0, 1.0]], [2.0, 2.0], [0.4, 0.6]);
        let got = f2(&[1.0, 0.3], &params, 0, 1).unwrap();
        let expected = (0.4f64 * 0.6).sqrt() / (2.0 * 2.0 * 2.0);
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn f3_examples() {
        let same = two_cluster([[0.0, 1.0], [0.0, 1.0]], [1.0, 1.0], [0.25, 0.75]);
        let got = f3(&[1.0, 2.0], &same, 0, 1).unwrap();
        assert!((got - (0.25f64 * 0.75).sqrt()).abs() < 1e-14);

        // σ₁²=1, σ₂²=16 (σ₂=4), equal means: √(π₁π₂)·√(2·1·4/17)
        let mixed = two_cluster([[0.0, 0.0], [0.0, 0.0]], [1.0, 16.0], [0.5, 0.5]);
        let got = f3(&[1.0, 1.0], &mixed, 0, 1).unwrap();
        let expected = 0.5 * (8.0f64 / 17.0).sqrt();
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn large_separation_kills_everything() {
        let params = two_cluster([[0.0, 0.0], [100.0, 0.0]], [1.0, 1.0], [0.5, 0.5]);
        let x = [1.0, 0.0];
        for v in f1(&x, &params, 0, 1).unwrap() {
            assert!(v < 1e-300);
        }
        assert!(f2(&x, &params, 0, 1).unwrap() < 1e-300);
        assert!(f3(&x, &params, 0, 1).unwrap() < 1e-300);
    }

    #[test]
    fn same_cluster_pair_is_rejected() {
        let params = two_cluster([[0.0, 0.0], [1.0, 1.0]], [1.0, 1.0], [0.5, 0.5]);
        assert!(matches!(
            f1(&[1.0, 0.0], &params, 1, 1),
            Err(Error::SameCluster { g: 1 })
        ));
        assert!(f2(&[1.0, 0.0], &params, 0, 0).is_err());
        assert!(f3(&[1.0, 0.0], &params, 0, 0).is_err());
    }

    fn random_params(rng: &mut impl Rng, g: usize, p: usize) -> ClrParams {
        let beta: Vec<Vec<f64>> = (0..g)
            .map(|_| (0..=p).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let sigma2: Vec<f64> = (0..g).map(|_| rng.random_range(0.3..3.0)).collect();
        let raw: Vec<f64> = (0..g).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let pi = raw.iter().map(|v| v / total).collect();
        ClrParams::new(beta, sigma2, pi).unwrap()
    }

    #[test]
    fn closed_forms_match_quadrature_on_random_instances() {
        let mut rng = crate::rng::RngSpec::new(555).rng();
        for _ in 0..60 {
            let g = rng.random_range(2..=3usize);
            let p = rng.random_range(1..=2usize);
            let params = random_params(&mut rng, g, p);
            let mut x = vec![1.0];
            for _ in 0..p {
                x.push(rng.random_range(-2.0..2.0));
            }
            let g1 = rng.random_range(0..g);
            let g2 = (g1 + 1 + rng.random_range(0..g - 1)) % g;
            let gam1 = params.mean(g1, &x);
            let s1sq = params.sigma2()[g1];

            let got1 = f1(&x, &params, g1, g2).unwrap();
            let want1_scalar = quad_oracle(&x, &params, g1, g2, |y| {
                let d = y - gam1;
                d * d / (s1sq * s1sq)
            });
            for (j, &v) in got1.iter().enumerate() {
                let want = x[j] * x[j] * want1_scalar;
                assert!(
                    (v - want).abs() <= 1e-8 * want.abs().max(1e-12),
                    "f1[{j}] {v} vs {want}"
                );
            }

            let got2 = f2(&x, &params, g1, g2).unwrap();
            let want2 = quad_oracle(&x, &params, g1, g2, |y| {
                let d = y - gam1;
                let delta = (d * d - s1sq) / (2.0 * s1sq * s1sq);
                delta * delta
            });
            assert!(
                (got2 - want2).abs() <= 1e-8 * want2.abs().max(1e-12),
                "f2 {got2} vs {want2}"
            );

            let got3 = f3(&x, &params, g1, g2).unwrap();
            let want3 = quad_oracle(&x, &params, g1, g2, |_| 1.0);
            assert!(
                (got3 - want3).abs() <= 1e-10 * want3.abs().max(1e-12),
                "f3 {got3} vs {want3}"
            );
        }
    }

    #[test]
    fn surrogate_hand_assembly_for_identical_clusters() {
        // identical clusters, π = (½,½), x = (1,0): Q_β = ½·f1 = ¼σ⁻²·diag(xxᵀ)
        let s2 = 2.0;
        let params = two_cluster([[1.0, -1.0], [1.0, -1.0]], [s2, s2], [0.5, 0.5]);
        let x = [1.0, 0.0];
        let q = surrogate_q(&x, &params).unwrap();
        assert!((q.q[0] - 0.25 / s2).abs() < 1e-14);
        assert!(q.q[1].abs() < 1e-300); // x₂ = 0
                                        // σ² entries: ½·f2 = ½·√(π₁π₂)/(2σ⁴) = 1/(8σ⁴)
        let sig_expected = 0.125 / (s2 * s2);
        assert!((q.q[params.sigma2_offset(0)] - sig_expected).abs() < 1e-14);
        // π entry: ½·1/π₁² + ½·1/π₂² + 1/(π₁π₂), all with f3 = ½
        let f3v = 0.5;
        let pi_expected = 0.5 * f3v / 0.25 + 0.5 * f3v / 0.25 + f3v / 0.25;
        assert!((q.q[params.pi_offset(0)] - pi_expected).abs() < 1e-12);
    }

    #[test]
    fn surrogate_is_nonnegative_and_vanishes_with_separation() {
        let far = two_cluster([[0.0, 0.0], [100.0, 0.0]], [1.0, 1.0], [0.5, 0.5]);
        let q = surrogate_q(&[1.0, 0.5], &far).unwrap();
        for &v in &q.q {
            assert!(v >= 0.0);
            assert!(v < 1e-200);
        }

        let mut rng = crate::rng::RngSpec::new(9).rng();
        for _ in 0..30 {
            let params = random_params(&mut rng, 3, 2);
            let x = [
                1.0,
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ];
            let q = surrogate_q(&x, &params).unwrap();
            assert_eq!(q.q.len(), params.theta_dim());
            for &v in &q.q {
                assert!(v >= 0.0 && v.is_finite());
            }
        }
    }

    #[test]
    fn surrogate_single_cluster_is_zero() {
        let params = ClrParams::new(vec![vec![0.0, 1.0]], vec![1.0], vec![1.0]).unwrap();
        let q = surrogate_q(&[1.0, 2.0], &params).unwrap();
        assert_eq!(q.q, vec![0.0; 3]);
    }

    #[test]
    fn separation_kill_dominates_polynomial_growth() {
        // entries of Q at covariate magnitude t·√(2 log N) decay monotonically
        // to zero once t passes a threshold
        let params = two_cluster([[0.0, 1.0], [0.0, -1.0]], [1.0, 1.0], [0.5, 0.5]);
        let n_full: f64 = 1e6;
        let scale = (2.0 * n_full.ln()).sqrt();
        let mut last: Option<Vec<f64>> = None;
        for t in 2..=10 {
            let x = [1.0, t as f64 * scale];
            let q = surrogate_q(&x, &params).unwrap().q;
            if let Some(prev) = &last {
                for (a, b) in q.iter().zip(prev) {
                    assert!(a <= b, "entry grew past the threshold: {a} > {b}");
                }
            }
            last = Some(q);
        }
        let final_q = last.unwrap();
        assert!(final_q.iter().all(|&v| v < 1e-12));
    }
}
