//! Object-centric scene encoders.
//!
//! A scene is encoded as an unordered set of per-object latents
//! `(z_what, z_where, z_depth)`. Ground-truth mode emits exact one-hot
//! identities and positions; noisy mode emulates the output pathologies of a
//! learned detector (identity/position noise, misdetections, spurious
//! detections, and averaging of repeated encodings of the first observation).

mod kmeans;
mod mig;

pub use kmeans::{cluster_zwhat, KMeansResult};
pub use mig::{mig_score, MigReport};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{EnvState, GoalState, Vec2};
use crate::error::{Error, Result};

/// One entity's latent: identity/appearance vector, 2D position, depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectLatent {
    pub what: Vec<f64>,
    pub pos: Vec2,
    pub depth: f64,
}

impl ObjectLatent {
    pub fn what_dist(&self, other_what: &[f64]) -> f64 {
        debug_assert_eq!(self.what.len(), other_what.len());
        self.what
            .iter()
            .zip(other_what)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Unordered set of latents; order is reshuffled on every encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRepr {
    pub latents: Vec<ObjectLatent>,
}

impl SceneRepr {
    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }
}

/// Emulation knobs for detector-like output noise.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub where_sigma: f64,
    pub what_sigma: f64,
    /// Per-object per-step misdetection probability.
    pub p_dropout: f64,
    /// Per-step probability of one spurious detection.
    pub p_spurious: f64,
    /// Number of independent encodings averaged for the first observation of
    /// an episode (and for goal scenes).
    pub stabilize_samples: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            where_sigma: 0.01,
            what_sigma: 0.05,
            p_dropout: 0.02,
            p_spurious: 0.02,
            stabilize_samples: 5,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p_dropout) || !(0.0..1.0).contains(&self.p_spurious) {
            return Err(Error::Config("noise probabilities must be in [0,1)".into()));
        }
        if self.where_sigma < 0.0 || self.what_sigma < 0.0 {
            return Err(Error::Config("noise sigmas must be >= 0".into()));
        }
        if self.stabilize_samples == 0 {
            return Err(Error::Config("stabilize_samples must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ReprMode {
    Gt,
    Noisy(NoiseConfig),
}

/// Scene encoder. `what_dim` is the identity-vector width; object `i` maps
/// to one-hot index `i` and the arm always maps to the last index, so agents
/// trained with a given `what_dim` transfer to environments with fewer
/// objects.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Encoder {
    pub what_dim: usize,
    pub mode: ReprMode,
}

impl Encoder {
    pub fn gt(what_dim: usize) -> Self {
        Encoder {
            what_dim,
            mode: ReprMode::Gt,
        }
    }

    pub fn noisy(what_dim: usize, noise: NoiseConfig) -> Self {
        Encoder {
            what_dim,
            mode: ReprMode::Noisy(noise),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.what_dim + 3
    }

    fn one_hot(&self, index: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.what_dim];
        v[index] = 1.0;
        v
    }

    fn arm_index(&self) -> usize {
        self.what_dim - 1
    }

    /// Entity list of a state: objects by identity, then the arm.
    fn entities(&self, arm: Vec2, objects: &[Vec2]) -> Vec<(usize, Vec2)> {
        assert!(
            objects.len() < self.what_dim,
            "what_dim {} too small for {} objects + arm",
            self.what_dim,
            objects.len()
        );
        let mut out: Vec<(usize, Vec2)> = objects.iter().copied().enumerate().collect();
        out.push((self.arm_index(), arm));
        out
    }

    pub fn encode(&self, state: &EnvState, rng: &mut impl Rng, is_first_obs: bool) -> SceneRepr {
        self.encode_entities(state.arm, &state.objects, rng, is_first_obs)
    }

    /// Encode a goal state the same way observations are encoded; goal
    /// scenes get the stabilized (first-observation) treatment. The arm
    /// entity appears only when the goal specifies an arm target.
    pub fn encode_goal(&self, goal: &GoalState, rng: &mut impl Rng) -> SceneRepr {
        match goal.arm {
            Some(arm) => self.encode_entities(arm, &goal.objects, rng, true),
            None => {
                let entities: Vec<(usize, Vec2)> =
                    goal.objects.iter().copied().enumerate().collect();
                self.encode_listed(&entities, rng, true)
            }
        }
    }

    fn encode_entities(
        &self,
        arm: Vec2,
        objects: &[Vec2],
        rng: &mut impl Rng,
        is_first_obs: bool,
    ) -> SceneRepr {
        let entities = self.entities(arm, objects);
        self.encode_listed(&entities, rng, is_first_obs)
    }

    fn encode_listed(
        &self,
        entities: &[(usize, Vec2)],
        rng: &mut impl Rng,
        is_first_obs: bool,
    ) -> SceneRepr {
        let mut latents = match &self.mode {
            ReprMode::Gt => entities
                .iter()
                .map(|&(id, pos)| ObjectLatent {
                    what: self.one_hot(id),
                    pos,
                    depth: 0.0,
                })
                .collect::<Vec<_>>(),
            ReprMode::Noisy(noise) => self.encode_noisy(entities, noise, rng, is_first_obs),
        };
        latents.shuffle(rng);
        SceneRepr { latents }
    }

    fn encode_noisy(
        &self,
        entities: &[(usize, Vec2)],
        noise: &NoiseConfig,
        rng: &mut impl Rng,
        is_first_obs: bool,
    ) -> Vec<ObjectLatent> {
        let mut latents = Vec::with_capacity(entities.len() + 1);
        for &(id, pos) in entities {
            if rng.gen::<f64>() < noise.p_dropout {
                continue;
            }
            // The first observation of an episode is encoded several times
            // and averaged, which shrinks the noise and drops transients.
            let samples = if is_first_obs {
                noise.stabilize_samples
            } else {
                1
            };
            let mut what = self.one_hot(id);
            let mut wn = vec![0.0; self.what_dim];
            let mut px = 0.0;
            let mut py = 0.0;
            for _ in 0..samples {
                for w in wn.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *w += z * noise.what_sigma;
                }
                let zx: f64 = rng.sample(StandardNormal);
                let zy: f64 = rng.sample(StandardNormal);
                px += pos.x + zx * noise.where_sigma;
                py += pos.y + zy * noise.where_sigma;
            }
            for (w, n) in what.iter_mut().zip(&wn) {
                *w += n / samples as f64;
            }
            latents.push(ObjectLatent {
                what,
                pos: Vec2::new(px / samples as f64, py / samples as f64),
                depth: 0.0,
            });
        }
        // Spurious detections do not persist across encodings, so they never
        // survive first-observation stabilization.
        if !is_first_obs && rng.gen::<f64>() < noise.p_spurious {
            let mut dir: Vec<f64> = (0..self.what_dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            for v in dir.iter_mut() {
                *v /= norm;
            }
            latents.push(ObjectLatent {
                what: dir,
                pos: Vec2::new(rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0)),
                depth: 0.0,
            });
        }
        latents
    }
}

/// Fixed-length position vector from a set of latents: each cluster slot, in
/// center order, takes the `z_where` of the latent whose `z_what` is nearest
/// that center; pairing is greedy by ascending distance, each latent used at
/// most once; unmatched slots are imputed zeros.
pub fn vectorize_where(scene: &SceneRepr, centers: &[Vec<f64>]) -> Vec<f64> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ci, center) in centers.iter().enumerate() {
        for (li, latent) in scene.latents.iter().enumerate() {
            pairs.push((latent.what_dist(center), ci, li));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut cluster_taken = vec![false; centers.len()];
    let mut latent_taken = vec![false; scene.latents.len()];
    let mut out = vec![0.0; 2 * centers.len()];
    for (_, ci, li) in pairs {
        if cluster_taken[ci] || latent_taken[li] {
            continue;
        }
        cluster_taken[ci] = true;
        latent_taken[li] = true;
        out[2 * ci] = scene.latents[li].pos.x;
        out[2 * ci + 1] = scene.latents[li].pos.y;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{reset, EnvConfig, Task};
    use crate::rng::{stream_rng, Stream};

    fn sorted_multiset(scene: &SceneRepr) -> Vec<String> {
        let mut v: Vec<String> = scene.latents.iter().map(|l| format!("{:?}", l)).collect();
        v.sort();
        v
    }

    #[test]
    fn gt_encoding_one_hot_and_cardinality() {
        let cfg = EnvConfig::new(Task::Rearrange, 2);
        let state = reset(&cfg, &mut stream_rng(0, Stream::EnvReset)).unwrap();
        let enc = Encoder::gt(3);
        let mut rng = stream_rng(0, Stream::Encoder);
        let scene = enc.encode(&state, &mut rng, true);
        assert_eq!(scene.len(), 3);
        for l in &scene.latents {
            assert_eq!(l.what.len(), 3);
            assert_eq!(l.what.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(l.what.iter().filter(|&&v| v == 0.0).count(), 2);
            assert_eq!(l.depth, 0.0);
        }
        // Arm latent carries the exact arm position.
        let arm = scene
            .latents
            .iter()
            .find(|l| l.what[2] == 1.0)
            .expect("arm latent");
        assert_eq!(arm.pos, state.arm);
    }

    #[test]
    fn reencoding_is_same_multiset_possibly_reordered() {
        let cfg = EnvConfig::new(Task::Rearrange, 3);
        let state = reset(&cfg, &mut stream_rng(5, Stream::EnvReset)).unwrap();
        let enc = Encoder::gt(4);
        let mut rng = stream_rng(9, Stream::Encoder);
        let a = enc.encode(&state, &mut rng, false);
        let b = enc.encode(&state, &mut rng, false);
        assert_eq!(sorted_multiset(&a), sorted_multiset(&b));
    }

    #[test]
    fn zero_noise_degenerates_to_gt() {
        let cfg = EnvConfig::new(Task::Rearrange, 2);
        let state = reset(&cfg, &mut stream_rng(1, Stream::EnvReset)).unwrap();
        let noise = NoiseConfig {
            where_sigma: 0.0,
            what_sigma: 0.0,
            p_dropout: 0.0,
            p_spurious: 0.0,
            stabilize_samples: 5,
        };
        let gt = Encoder::gt(3);
        let noisy = Encoder::noisy(3, noise);
        let a = gt.encode(&state, &mut stream_rng(2, Stream::Encoder), false);
        let b = noisy.encode(&state, &mut stream_rng(3, Stream::Encoder), false);
        assert_eq!(sorted_multiset(&a), sorted_multiset(&b));
    }

    #[test]
    fn noisy_position_std_matches_sigma() {
        let cfg = EnvConfig::new(Task::Rearrange, 1);
        let state = reset(&cfg, &mut stream_rng(2, Stream::EnvReset)).unwrap();
        let noise = NoiseConfig {
            where_sigma: 0.01,
            what_sigma: 0.0,
            p_dropout: 0.0,
            p_spurious: 0.0,
            stabilize_samples: 5,
        };
        let enc = Encoder::noisy(2, noise);
        let mut rng = stream_rng(3, Stream::Encoder);
        let n = 10_000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let scene = enc.encode(&state, &mut rng, false);
            let obj = scene.latents.iter().find(|l| l.what[0] > 0.5).unwrap();
            xs.push(obj.pos.x - state.objects[0].x);
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = (xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        assert!(
            (std - 0.01).abs() / 0.01 < 0.10,
            "per-coordinate std {std} not within 10% of 0.01"
        );
    }

    #[test]
    fn full_dropout_leaves_at_most_spurious() {
        let cfg = EnvConfig::new(Task::Rearrange, 2);
        let state = reset(&cfg, &mut stream_rng(4, Stream::EnvReset)).unwrap();
        let noise = NoiseConfig {
            p_dropout: 0.999_999_999,
            p_spurious: 0.0,
            ..NoiseConfig::default()
        };
        let enc = Encoder::noisy(3, noise);
        let mut rng = stream_rng(5, Stream::Encoder);
        let scene = enc.encode(&state, &mut rng, false);
        assert!(scene.is_empty());
    }

    #[test]
    fn first_obs_stabilization_shrinks_noise_and_blocks_spurious() {
        let cfg = EnvConfig::new(Task::Rearrange, 1);
        let state = reset(&cfg, &mut stream_rng(6, Stream::EnvReset)).unwrap();
        let noise = NoiseConfig {
            where_sigma: 0.02,
            what_sigma: 0.0,
            p_dropout: 0.0,
            p_spurious: 0.9,
            stabilize_samples: 5,
        };
        let enc = Encoder::noisy(2, noise);
        let mut rng = stream_rng(7, Stream::Encoder);
        let n = 4000;
        let mut errs = Vec::new();
        for _ in 0..n {
            let scene = enc.encode(&state, &mut rng, true);
            assert_eq!(scene.len(), 2, "spurious latent survived stabilization");
            let obj = scene.latents.iter().find(|l| l.what[0] > 0.5).unwrap();
            errs.push(obj.pos.x - state.objects[0].x);
        }
        let mean = errs.iter().sum::<f64>() / n as f64;
        let std = (errs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        let expected = 0.02 / (5.0f64).sqrt();
        assert!(
            (std - expected).abs() / expected < 0.15,
            "stabilized std {std} vs expected {expected}"
        );
    }

    #[test]
    fn vectorize_where_recovers_gt_positions() {
        let cfg = EnvConfig::new(Task::Rearrange, 2);
        let state = reset(&cfg, &mut stream_rng(8, Stream::EnvReset)).unwrap();
        let enc = Encoder::gt(3);
        let scene = enc.encode(&state, &mut stream_rng(9, Stream::Encoder), false);
        // Clusters at the exact one-hots, in identity order.
        let centers: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let mut v = vec![0.0; 3];
                v[i] = 1.0;
                v
            })
            .collect();
        let vec = vectorize_where(&scene, &centers);
        assert_eq!(vec.len(), 6);
        assert_eq!(vec[0], state.objects[0].x);
        assert_eq!(vec[1], state.objects[0].y);
        assert_eq!(vec[2], state.objects[1].x);
        assert_eq!(vec[3], state.objects[1].y);
        assert_eq!(vec[4], state.arm.x);
        assert_eq!(vec[5], state.arm.y);
    }

    #[test]
    fn vectorize_where_imputes_zeros_and_ignores_spurious() {
        let centers: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let mut v = vec![0.0; 3];
                v[i] = 1.0;
                v
            })
            .collect();
        // Object 1 missing: its slot stays zero.
        let scene = SceneRepr {
            latents: vec![
                ObjectLatent {
                    what: vec![1.0, 0.0, 0.0],
                    pos: Vec2::new(0.3, 0.4),
                    depth: 0.0,
                },
                ObjectLatent {
                    what: vec![0.0, 0.0, 1.0],
                    pos: Vec2::new(0.9, 0.1),
                    depth: 0.0,
                },
            ],
        };
        let v = vectorize_where(&scene, &centers);
        assert_eq!(v, vec![0.3, 0.4, 0.0, 0.0, 0.9, 0.1]);

        // A spurious latent far from every center is left unmatched once all
        // clusters are taken.
        let mut with_spurious = scene.clone();
        with_spurious.latents.push(ObjectLatent {
            what: vec![0.0, 1.0, 0.0],
            pos: Vec2::new(0.5, 0.5),
            depth: 0.0,
        });
        with_spurious.latents.push(ObjectLatent {
            what: vec![5.0, 5.0, 5.0],
            pos: Vec2::new(0.7, 0.7),
            depth: 0.0,
        });
        let v = vectorize_where(&with_spurious, &centers);
        assert_eq!(v, vec![0.3, 0.4, 0.5, 0.5, 0.9, 0.1]);
    }
}
