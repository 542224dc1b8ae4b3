use std::sync::Arc;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::flight_dynamics::{Action, LatencyConfig};
use crate::rng::stream;
use crate::splat_scene::synth;

fn small_scene() -> SceneAssets {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cloud = synth::random_box(200, &mut rng, synth::BoxParams::default());
    let cloud = crate::splat_scene::apply_transform(
        &cloud,
        &crate::splat_scene::SceneTransform::new(
            1.0,
            nalgebra::UnitQuaternion::identity(),
            Vector3::new(2.0, 0.0, -2.5),
        )
        .unwrap(),
    );
    SceneAssets::from_cloud(cloud, Some(&[]), 0.1, 0.2, 0.0)
}

fn open_scene() -> SceneAssets {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    SceneAssets::from_cloud(synth::open_field(&mut rng), None, 0.1, 0.2, 0.0)
}

#[test]
fn resets_start_free_and_inside_region() {
    let scene = open_scene();
    let cfg = Arc::new(EnvConfig::default());
    let mut env = NavEnv::new(scene, cfg.clone(), stream(1, "env", 0)).unwrap();
    let ep = cfg.episode;
    for _ in 0..1000 {
        env.reset_state_for_test().unwrap();
        let p = env.state().position;
        for k in 0..3 {
            assert!(p[k] >= ep.start_min[k] && p[k] <= ep.start_max[k]);
        }
        assert!(!env.map().is_occupied(&p));
        assert_eq!(env.state().velocity, Vector3::zeros());
        let (r, pch, _) = env.state().orientation.euler_angles();
        assert!(r.abs() < 1e-12 && pch.abs() < 1e-12);
        let fov = env.camera().fov_x_deg();
        assert!((67.0 - 1e-9..=106.0 + 1e-9).contains(&fov));
    }
}

#[test]
fn occupied_start_region_is_a_configuration_error() {
    let pts: Vec<Vector3<f64>> = (0..11)
        .flat_map(|i| {
            (0..11).flat_map(move |j| {
                (0..5).map(move |k| Vector3::new(-0.5 + 0.1 * i as f64, -0.5 + 0.1 * j as f64, 0.8 + 0.1 * k as f64))
            })
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cloud = synth::random_box(10, &mut rng, synth::BoxParams::default());
    let scene = SceneAssets::from_cloud(cloud, Some(&pts), 0.1, 0.2, 0.0);
    let err = NavEnv::new(scene, Arc::new(EnvConfig::default()), stream(0, "env", 0)).unwrap_err();
    assert!(matches!(err, EnvError::NoFreeStart { tries: 1000 }));
}

#[test]
fn batch_of_one_equals_single_step() {
    let scene = small_scene();
    let cfg = Arc::new(EnvConfig::default());
    let mut single = NavEnv::new(scene.clone(), cfg.clone(), stream(3, "env", 0)).unwrap();
    let mut batch = VecEnv::from_envs(vec![single.clone()]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let a = Policy::Random.act(&single, &mut rng);
        let s = single.step(&a).unwrap();
        let b = batch.step_batch(&[a]).unwrap().pop().unwrap();
        assert_eq!(s, b);
    }
}

#[test]
fn permuting_envs_permutes_results() {
    let scene = small_scene();
    let v = VecEnv::new(scene, EnvConfig::default(), 3, 11).unwrap();
    let envs = v.into_envs();
    let mut a = VecEnv::from_envs(envs.clone()).unwrap();
    let mut b = VecEnv::from_envs(vec![envs[2].clone(), envs[0].clone(), envs[1].clone()]).unwrap();
    let acts = [
        Action::new(0.2, 0.1, -0.1, 0.0),
        Action::new(-0.1, 0.0, 0.3, 0.5),
        Action::ZERO,
    ];
    for _ in 0..10 {
        let ra = a.step_batch(&acts).unwrap();
        let rb = b.step_batch(&[acts[2], acts[0], acts[1]]).unwrap();
        assert_eq!(ra[0], rb[1]);
        assert_eq!(ra[1], rb[2]);
        assert_eq!(ra[2], rb[0]);
    }
}

#[test]
fn terminated_envs_auto_reset() {
    let scene = small_scene();
    let mut cfg = EnvConfig::default();
    cfg.episode.max_steps = 5;
    let mut v = VecEnv::new(scene, cfg, 1, 2).unwrap();
    for i in 1..=5 {
        let r = v.step_batch(&[Action::ZERO]).unwrap().pop().unwrap();
        if i < 5 {
            assert_eq!(r.termination, Termination::Running);
            assert!(!r.info.reset);
        } else {
            assert_eq!(r.termination, Termination::Timeout);
            assert!(r.info.reset);
            assert_eq!(r.info.episode_steps, 5);
            assert_eq!(v.envs()[0].steps(), 0);
            assert_eq!(v.envs()[0].episode(), 1);
        }
    }
}

#[test]
fn depth_only_in_privileged_mode() {
    let scene = small_scene();
    let mut env = NavEnv::new(scene.clone(), Arc::new(EnvConfig::default()), stream(0, "env", 0)).unwrap();
    let o = env.reset().unwrap();
    assert!(o.depth.is_none());
    assert_eq!((o.rgb.height, o.rgb.width, o.rgb.channels), (60, 80, 3));
    let cfg = EnvConfig {
        privileged: true,
        ..Default::default()
    };
    let mut env = NavEnv::new(scene, Arc::new(cfg), stream(0, "env", 0)).unwrap();
    let o = env.reset().unwrap();
    let d = o.depth.unwrap();
    assert_eq!((d.height, d.width, d.channels), (60, 80, 1));
    assert!(d.data.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(o.rgb.data.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn perception_noise_does_not_touch_physics() {
    let scene = small_scene();
    let base = EnvConfig {
        latency: LatencyConfig::disabled(),
        color: None,
        fov_range: None,
        ..Default::default()
    };
    let quiet = EnvConfig {
        perception: PerceptionNoiseConfig {
            enabled: false,
            ..Default::default()
        },
        ..base.clone()
    };
    let mut a = NavEnv::new(scene.clone(), Arc::new(base), stream(8, "env", 0)).unwrap();
    let mut b = NavEnv::new(scene, Arc::new(quiet), stream(8, "env", 0)).unwrap();
    let act = Action::new(0.1, 0.2, -0.1, 0.3);
    let mut differs = false;
    for _ in 0..20 {
        let ra = a.step(&act).unwrap();
        let rb = b.step(&act).unwrap();
        assert_eq!(a.state(), b.state());
        assert_eq!(ra.reward, rb.reward);
        differs |= ra.obs.state != rb.obs.state;
    }
    assert!(differs);
}

#[test]
fn observation_invariants_hold_along_a_rollout() {
    let scene = small_scene();
    let mut v = VecEnv::new(scene, EnvConfig::default(), 2, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let acts: Vec<Action> = v.envs().iter().map(|e| Policy::Random.act(e, &mut rng)).collect();
        for r in v.step_batch(&acts).unwrap() {
            let s = &r.obs.state;
            assert_eq!(s.len(), STATE_DIM);
            let m = nalgebra::Matrix3::from_row_slice(&s[3..12]);
            assert!((m.transpose() * m - nalgebra::Matrix3::identity()).abs().max() < 1e-5);
            let n = (s[12] * s[12] + s[13] * s[13] + s[14] * s[14]).sqrt();
            assert!((n - 1.0).abs() < 1e-6 || n == 0.0);
            assert!(r.obs.rgb.data.iter().all(|x| x.is_finite()));
            let sum: f64 = r.info.breakdown.weighted.to_array().iter().sum();
            assert_eq!(sum, r.reward);
        }
    }
}

#[test]
fn goto_reaches_goal_in_open_field() {
    let scene = open_scene();
    let mut env = NavEnv::new(scene, Arc::new(EnvConfig::default()), stream(21, "env", 0)).unwrap();
    let p = Policy::parse("goto").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    loop {
        let a = p.act(&env, &mut rng);
        let r = env.step(&a).unwrap();
        if r.termination.is_done() {
            assert_eq!(r.termination, Termination::Success, "{:?}", r.info);
            break;
        }
    }
}
