//! Ground-truth treatment-effect models and the target estimand.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SupergeoError};
use crate::geo_data::GeoAggregates;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Homogeneous,
    /// theta_g = theta0 + c * Z_g / mean(Z)
    Proportional,
    /// theta_g = theta0 + U[-h, h], drawn once per geo
    UniformNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectModel {
    pub kind: EffectKind,
    pub theta0: f64,
    pub c: f64,
    pub noise_halfwidth: f64,
    pub seed: u64,
}

impl EffectModel {
    pub fn homogeneous(theta0: f64) -> Self {
        EffectModel {
            kind: EffectKind::Homogeneous,
            theta0,
            c: 0.0,
            noise_halfwidth: 0.0,
            seed: 0,
        }
    }

    pub fn proportional(theta0: f64, c: f64) -> Self {
        EffectModel {
            kind: EffectKind::Proportional,
            theta0,
            c,
            noise_halfwidth: 0.0,
            seed: 0,
        }
    }

    pub fn uniform_noise(theta0: f64, halfwidth: f64, seed: u64) -> Self {
        EffectModel {
            kind: EffectKind::UniformNoise,
            theta0,
            c: 0.0,
            noise_halfwidth: halfwidth,
            seed,
        }
    }
}

impl Default for EffectModel {
    fn default() -> Self {
        EffectModel::homogeneous(1.0)
    }
}

/// The weighted-average iROAS the experiment targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimand {
    pub theta: f64,
    pub weights: Vec<f64>,
}

/// Per-geo theta values in aggregate order. The uniform-noise draw is fixed
/// per geo so the potential outcomes do not change across iterations.
pub fn make_effects(model: &EffectModel, aggs: &[GeoAggregates]) -> Result<Vec<f64>> {
    match model.kind {
        EffectKind::Homogeneous => Ok(vec![model.theta0; aggs.len()]),
        EffectKind::Proportional => {
            let mean_z: f64 =
                aggs.iter().map(|a| a.pretest_response).sum::<f64>() / aggs.len() as f64;
            if mean_z == 0.0 {
                return Err(SupergeoError::ZeroMeanZ);
            }
            Ok(aggs
                .iter()
                .map(|a| model.theta0 + model.c * a.pretest_response / mean_z)
                .collect())
        }
        EffectKind::UniformNoise => Ok((0..aggs.len())
            .map(|g| {
                let u = rng::uniform(model.seed, g as u64);
                model.theta0 + model.noise_halfwidth * (2.0 * u - 1.0)
            })
            .collect()),
    }
}

/// theta = sum(theta_g * w_g) / sum(w_g), with w_g the initial spends.
pub fn target_theta(theta_g: &[f64], weights: &[f64]) -> Result<Estimand> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(SupergeoError::ZeroWeights);
    }
    let theta = theta_g
        .iter()
        .zip(weights)
        .map(|(t, w)| t * w)
        .sum::<f64>()
        / total;
    Ok(Estimand {
        theta,
        weights: weights.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_data::GeoId;

    fn aggs(zs: &[f64]) -> Vec<GeoAggregates> {
        zs.iter()
            .enumerate()
            .map(|(i, &z)| GeoAggregates {
                geo: GeoId::new(format!("g{i}")),
                pretest_response: z,
                test_response: z,
                pretest_spend: 1.0,
                test_spend: 1.0,
                initial_spend: 1.0,
            })
            .collect()
    }

    #[test]
    fn homogeneous_is_constant() {
        let thetas = make_effects(&EffectModel::homogeneous(1.0), &aggs(&[1.0, 5.0, 9.0])).unwrap();
        assert_eq!(thetas, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn proportional_at_the_mean() {
        let a = aggs(&[2.0, 2.0, 2.0]);
        let thetas = make_effects(&EffectModel::proportional(1.0, 0.2), &a).unwrap();
        for t in thetas {
            assert!((t - 1.2).abs() < 1e-15);
        }
        let zeros = aggs(&[0.0, 0.0]);
        assert!(matches!(
            make_effects(&EffectModel::proportional(1.0, 0.2), &zeros),
            Err(SupergeoError::ZeroMeanZ)
        ));
    }

    #[test]
    fn uniform_noise_stays_in_range_and_is_seeded() {
        let a = aggs(&(0..50).map(|i| i as f64 + 1.0).collect::<Vec<_>>());
        let model = EffectModel::uniform_noise(1.0, 0.25, 11);
        let t1 = make_effects(&model, &a).unwrap();
        let t2 = make_effects(&model, &a).unwrap();
        assert_eq!(t1, t2);
        assert!(t1.iter().all(|&t| (0.75..=1.25).contains(&t)));
    }

    #[test]
    fn target_theta_weighted_mean() {
        assert_eq!(target_theta(&[1.0, 3.0], &[1.0, 1.0]).unwrap().theta, 2.0);
        assert_eq!(target_theta(&[1.0, 2.0], &[3.0, 1.0]).unwrap().theta, 1.25);
        // homogeneous is weight-free
        let t = target_theta(&[7.0, 7.0], &[0.1, 9.0]).unwrap().theta;
        assert!((t - 7.0).abs() < 1e-12);
        assert!(matches!(
            target_theta(&[1.0], &[0.0]),
            Err(SupergeoError::ZeroWeights)
        ));
    }

    #[test]
    fn centering_identity() {
        // sum (theta_g - theta) * w_g = 0 for every model
        let a = aggs(&[1.0, 4.0, 2.0, 8.0]);
        let weights = [3.0, 1.0, 5.0, 2.0];
        for model in [
            EffectModel::homogeneous(1.0),
            EffectModel::proportional(1.0, 0.2),
            EffectModel::uniform_noise(1.0, 0.25, 3),
        ] {
            let thetas = make_effects(&model, &a).unwrap();
            let est = target_theta(&thetas, &weights).unwrap();
            let resid: f64 = thetas
                .iter()
                .zip(&weights)
                .map(|(t, w)| (t - est.theta) * w)
                .sum();
            let scale: f64 = thetas.iter().zip(&weights).map(|(t, w)| (t * w).abs()).sum();
            assert!(resid.abs() <= 1e-12 * scale, "resid={resid}");
        }
    }
}
