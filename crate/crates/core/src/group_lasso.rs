//! Group-lasso penalty over per-state parameter groups.
//!
//! `penalty = lambda * sum_g sqrt(dim(g)) * ||w_g||_2`. The classifier head
//! belongs to no group and is never penalized here.

use alloc::vec::Vec;

use crate::model::{GroupRef, RationalModel};
use crate::numeric::l2_norm;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PenaltyConfig {
    pub lambda: f64,
}

impl PenaltyConfig {
    pub fn new(lambda: f64) -> crate::Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(crate::Error::InvalidConfig(alloc::format!(
                "regularization strength must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(PenaltyConfig { lambda })
    }
}

/// Group norm of one group, `(wfsa, state, ||w_g||_2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupNorm {
    pub wfsa: usize,
    pub state: usize,
    pub norm: f64,
}

/// `sum_g sqrt(dim(g)) * ||w_g||_2` over arbitrary groups.
pub fn unscaled_penalty<'a, I>(groups: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    groups
        .into_iter()
        .map(|g| libm::sqrt(g.len() as f64) * l2_norm(g))
        .sum()
}

pub fn penalty(groups: &[GroupRef<'_>], config: PenaltyConfig) -> f64 {
    if config.lambda == 0.0 {
        return 0.0;
    }
    config.lambda * unscaled_penalty(groups.iter().map(|g| g.values))
}

/// Subgradient of [`penalty`] for one group, written into `out`.
///
/// At the kink (`||w_g|| = 0`) the zero vector is returned.
pub fn group_subgradient(values: &[f64], lambda: f64, out: &mut [f64]) {
    let norm = l2_norm(values);
    if norm == 0.0 || lambda == 0.0 {
        out.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let scale = lambda * libm::sqrt(values.len() as f64) / norm;
    for (o, v) in out.iter_mut().zip(values) {
        *o = scale * v;
    }
}

/// Subgradient of the penalty in model layout; the classifier entries are zero.
pub fn penalty_subgradient(model: &RationalModel, config: PenaltyConfig) -> RationalModel {
    let mut grad = model.zeros_like();
    add_penalty_subgradient(model, config, &mut grad);
    grad
}

/// Adds the penalty subgradient into an existing gradient buffer.
pub fn add_penalty_subgradient(model: &RationalModel, config: PenaltyConfig, grad: &mut RationalModel) {
    if config.lambda == 0.0 {
        return;
    }
    let mut scratch = alloc::vec![0.0; model.group_dim()];
    for (g, out) in model.group_view().iter().zip(grad.group_view_mut()) {
        group_subgradient(g.values, config.lambda, &mut scratch);
        for (o, s) in out.values.iter_mut().zip(&scratch) {
            *o += s;
        }
    }
}

/// Raw (unweighted) l2 norm of each group, in group-view order.
pub fn group_norms(groups: &[GroupRef<'_>]) -> Vec<GroupNorm> {
    groups
        .iter()
        .map(|g| GroupNorm {
            wfsa: g.wfsa,
            state: g.state,
            norm: l2_norm(g.values),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::finite_diff_grad;
    use core::convert::Infallible;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(seed: u64) -> RationalModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = RationalModel::zeros(3, &[4, 2, 1]).unwrap();
        m.params_mut().iter_mut().for_each(|p| *p = rng.random_range(-1.0..1.0));
        m
    }

    #[test]
    fn zero_model_has_zero_penalty() {
        let m = RationalModel::zeros(3, &[2, 2]).unwrap();
        assert_eq!(penalty(&m.group_view(), PenaltyConfig { lambda: 5.0 }), 0.0);
        assert!(group_norms(&m.group_view()).iter().all(|g| g.norm == 0.0));
    }

    #[test]
    fn hand_evaluated_group() {
        let values = [0.5; 8];
        let groups = [GroupRef { wfsa: 0, state: 1, values: &values }];
        assert!((penalty(&groups, PenaltyConfig { lambda: 1.0 }) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_is_zero() {
        let m = random_model(1);
        assert_eq!(penalty(&m.group_view(), PenaltyConfig { lambda: 0.0 }), 0.0);
        assert!(penalty_subgradient(&m, PenaltyConfig { lambda: 0.0 })
            .params()
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn negative_lambda_rejected() {
        assert!(PenaltyConfig::new(-1.0).is_err());
        assert!(PenaltyConfig::new(f64::NAN).is_err());
        assert!(PenaltyConfig::new(0.0).is_ok());
    }

    #[test]
    fn pythagorean_norm_and_permutation() {
        let a = [3.0, 4.0];
        let b = [4.0, 3.0];
        let groups = [
            GroupRef { wfsa: 0, state: 1, values: &a },
            GroupRef { wfsa: 0, state: 2, values: &b },
        ];
        let norms = group_norms(&groups);
        assert_eq!(norms[0].norm, 5.0);
        assert_eq!(norms[1].norm, 5.0);
    }

    #[test]
    fn zero_group_zero_subgradient() {
        let mut out = [1.0; 4];
        group_subgradient(&[0.0; 4], 2.0, &mut out);
        assert_eq!(out, [0.0; 4]);
    }

    #[test]
    fn subgradient_norm_is_lambda_sqrt_dim() {
        let m = random_model(2);
        let lambda = 0.37;
        let grad = penalty_subgradient(&m, PenaltyConfig { lambda });
        for g in grad.group_view() {
            let expected = lambda * libm::sqrt(g.values.len() as f64);
            assert!((l2_norm(g.values) - expected).abs() < 1e-12);
        }
        assert!(grad.classifier_weight().iter().all(|&x| x == 0.0));
        assert_eq!(grad.classifier_bias(), 0.0);
    }

    #[test]
    fn subgradient_matches_finite_differences() {
        let m = random_model(3);
        let lambda = 0.8;
        let (d, lengths) = (m.d_emb(), m.lengths().to_vec());
        let numeric = finite_diff_grad(
            |p| {
                let mm = RationalModel::from_params(d, &lengths, p.to_vec()).unwrap();
                Ok::<_, Infallible>(penalty(&mm.group_view(), PenaltyConfig { lambda }))
            },
            m.params(),
            1e-6,
        )
        .unwrap();
        let grad = penalty_subgradient(&m, PenaltyConfig { lambda });
        for (a, b) in grad.params().iter().zip(&numeric) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn singleton_groups_reduce_to_lasso() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let values: Vec<f64> = (0..20).map(|_| rng.random_range(-3.0..3.0)).collect();
        let lambda = 0.6;
        let group = unscaled_penalty(values.iter().map(core::slice::from_ref)) * lambda;
        let lasso: f64 = lambda * values.iter().map(|v| v.abs()).sum::<f64>();
        assert!((group - lasso).abs() < 1e-12);
    }

    #[test]
    fn positive_homogeneity() {
        let m = random_model(5);
        let base = penalty(&m.group_view(), PenaltyConfig { lambda: 1.3 });
        for alpha in [-2.5, -1.0, 0.0, 0.5, 3.0] {
            let mut scaled = m.clone();
            scaled.params_mut().iter_mut().for_each(|p| *p *= alpha);
            let p = penalty(&scaled.group_view(), PenaltyConfig { lambda: 1.3 });
            assert!((p - libm::fabs(alpha) * base).abs() <= 1e-12 * base.max(1.0));
        }
    }

    #[test]
    fn subgradient_descent_shrinks_every_group() {
        let mut m = random_model(6);
        let config = PenaltyConfig { lambda: 1.0 };
        let step = 1e-3;
        let mut prev: Vec<f64> = group_norms(&m.group_view()).iter().map(|g| g.norm).collect();
        for _ in 0..100 {
            let g = penalty_subgradient(&m, config);
            for (p, d) in m.params_mut().iter_mut().zip(g.params()) {
                *p -= step * d;
            }
            let norms: Vec<f64> = group_norms(&m.group_view()).iter().map(|g| g.norm).collect();
            for (n, p) in norms.iter().zip(&prev) {
                assert!(n < p || *p == 0.0);
            }
            prev = norms;
        }
    }
}
