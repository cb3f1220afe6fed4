use mpg::distributions::{AngularGaussian, ClipInterval, ClippedGaussian, DiagGaussian, UnitVector};
use mpg::envs::{Platform2D, PlatformConfig};
use mpg::nn::{Mlp, MlpSpec};
use mpg::policy::{log_softmax, softmax};
use mpg::special::{m_function, m_ratio};
use mpg::trainer::{compute_returns, StepEnd};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn platform_reward_bounded_by_step(x in -1.5f64..1.5, y in -1.5f64..1.5, angle in 0.0f64..std::f64::consts::TAU) {
        let env = Platform2D::<f64>::new(PlatformConfig::default()).unwrap();
        let dir = UnitVector::from_angle(angle);
        let r = env.transition(&[x, y], dir.as_slice(), 0).unwrap();
        prop_assert!(r.reward.abs() <= 0.1 + 1e-12);
    }

    #[test]
    fn m_function_recurrence_and_positivity(alpha in -8.0f64..8.0, k in 2usize..12) {
        let m = |d| m_function(d, alpha).unwrap();
        prop_assert!(m(k) > 0.0);
        prop_assert!(close(m(k), alpha * m(k - 1) + (k as f64 - 1.0) * m(k - 2), 1e-9));
        let ratio = m_ratio(k, alpha).unwrap();
        prop_assert!(close(ratio, (k as f64 - 1.0) * m(k - 2) / m(k - 1), 1e-9));
    }

    #[test]
    fn angular_scores_finite_and_decompose(
        m0 in -5.0f64..5.0, m1 in -5.0f64..5.0, sigma in 0.05f64..3.0,
        a0 in -3.0f64..3.0, a1 in -3.0f64..3.0,
    ) {
        prop_assume!(a0.hypot(a1) > 1e-3);
        let base = DiagGaussian::new(vec![m0, m1], sigma).unwrap();
        let ang = AngularGaussian::new(base.clone()).unwrap();
        let a = [a0, a1];
        let x = UnitVector::normalize(&a).unwrap();
        prop_assert!(ang.log_density(&x).unwrap().is_finite());
        let s_ang = ang.score(&x).unwrap();
        let s_rad = ang.radial_score(&a).unwrap();
        let s_full = base.score(&a).unwrap();
        prop_assert!(s_ang.is_finite() && s_rad.is_finite());
        for (f, (p, q)) in s_full.to_flat().iter().zip(s_ang.to_flat().iter().zip(s_rad.to_flat())) {
            prop_assert!(close(*f, p + q, 1e-8), "{} vs {} + {}", f, p, q);
        }
    }

    #[test]
    fn clipped_density_and_score_finite(m in -20.0f64..20.0, sigma in 0.01f64..5.0, lo in -3.0f64..0.0, w in 0.01f64..4.0, u in 0.0f64..1.0) {
        let iv = ClipInterval::new(lo, lo + w).unwrap();
        let dist = ClippedGaussian::new(DiagGaussian::new(vec![m], sigma).unwrap(), iv).unwrap();
        // Endpoint densities are point masses, so their logs are at most 0.
        for b in [iv.lo(), iv.hi()] {
            prop_assert!(dist.log_density(b).unwrap() <= 0.0);
            prop_assert!(dist.score(b).unwrap().is_finite());
        }
        let inner = iv.clip(lo + u * w);
        prop_assert!(dist.log_density(inner).unwrap().is_finite());
        prop_assert!(dist.score(inner).unwrap().is_finite());
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-300.0f64..300.0, 1..8)) {
        let p = softmax(&logits);
        let lp = log_softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (pi, li) in p.iter().zip(&lp) {
            prop_assert!(*pi >= 0.0 && li.is_finite());
            prop_assert!((pi - li.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn mlp_backward_linear_in_upstream(seed in 0u64..1000, x0 in -2.0f64..2.0, x1 in -2.0f64..2.0, u in prop::collection::vec(-1.0f64..1.0, 4)) {
        let net = Mlp::<f64>::new(MlpSpec::tanh(2, 6, 2, 2, seed).unwrap());
        let x = [x0, x1];
        let g1 = net.backward(&x, &u[..2]).unwrap();
        let g2 = net.backward(&x, &u[2..]).unwrap();
        let g12 = net.backward(&x, &[u[0] + u[2], u[1] + u[3]]).unwrap();
        for i in 0..g12.len() {
            prop_assert!((g12[i] - g1[i] - g2[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn returns_bounded_by_geometric_sum(rewards in prop::collection::vec(-0.1f64..0.1, 1..40), gamma in 0.0f64..0.999, terminal_at in 0usize..40) {
        let ends: Vec<StepEnd<f64>> = (0..rewards.len())
            .map(|t| if t == terminal_at { StepEnd::Terminal } else { StepEnd::Continue })
            .collect();
        let ret = compute_returns(&rewards, &ends, gamma, 0.0).unwrap();
        let bound = 0.1 / (1.0 - gamma) + 1e-12;
        for (t, r) in ret.iter().enumerate() {
            prop_assert!(r.abs() <= bound);
            let next = if t + 1 < ret.len() && t != terminal_at { ret[t + 1] } else { 0.0 };
            prop_assert!((r - (rewards[t] + gamma * next)).abs() < 1e-12);
        }
    }
}
