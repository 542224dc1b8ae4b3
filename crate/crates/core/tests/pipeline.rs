use splatnav::config::{synthetic_cloud, EngineConfig, SyntheticScene};
use splatnav::flight_dynamics::Action;
use splatnav::nav_env::{Policy, VecEnv};
use splatnav::rasterizer::{render, Pose, RenderMode};
use splatnav::rng::stream;
use splatnav::splat_scene::{load_ply, save_ply};

fn rollout(cfg: &EngineConfig, seed: u64, steps: usize) -> Vec<(f64, [f64; 3])> {
    let scene = cfg.load_scene(seed).unwrap();
    let mut envs = VecEnv::new(scene, cfg.env.clone(), 3, seed).unwrap();
    let mut rngs: Vec<_> = (0..3).map(|i| stream(seed, "policy", i)).collect();
    let mut out = Vec::new();
    for _ in 0..steps {
        let actions: Vec<Action> = envs
            .envs()
            .iter()
            .zip(rngs.iter_mut())
            .map(|(e, r)| Policy::Random.act(e, r))
            .collect();
        for r in envs.step_batch(&actions).unwrap() {
            assert!(r.info.fault.is_none());
            out.push((r.reward, r.info.position));
        }
    }
    out
}

#[test]
fn bundle_config_drives_a_deterministic_rollout() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = synthetic_cloud(SyntheticScene::PillarForest { pillars: 6 }, 4);
    std::fs::create_dir(dir.path().join("forest")).unwrap();
    save_ply(&cloud, dir.path().join("forest/scene.ply")).unwrap();
    std::fs::write(dir.path().join("forest/scene.cfg"), "[env]\nmax_steps = 30\n").unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "[scene]\nbundle = forest\n\n[env]\nmax_steps = 40  # overrides the bundle\n",
    )
    .unwrap();

    let cfg = EngineConfig::load(dir.path().join("run.cfg")).unwrap();
    assert_eq!(cfg.env.episode.max_steps, 40);
    let scene = cfg.load_scene(0).unwrap();
    assert_eq!(scene.cloud.len(), cloud.len());
    // PLY stores f32.
    for (a, b) in scene.cloud.means().iter().zip(cloud.means()) {
        assert!((0..3).all(|k| (a[k] - b[k]).abs() < 1e-5));
    }

    let a = rollout(&cfg, 9, 90);
    assert_eq!(a, rollout(&cfg, 9, 90));
    assert_ne!(a, rollout(&cfg, 10, 90));
}

#[test]
fn ply_round_trip_renders_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = synthetic_cloud(SyntheticScene::RandomBox { gaussians: 300 }, 2);
    let path = dir.path().join("box.ply");
    save_ply(&cloud, &path).unwrap();
    let back = load_ply(&path).unwrap();
    let cfg = EngineConfig::default();
    let (cam, s) = (cfg.env.camera, cfg.env.render);
    let a = render(&cloud, &cam, &Pose::default(), RenderMode::Rgbd, &s);
    let b = render(&back, &cam, &Pose::default(), RenderMode::Rgbd, &s);
    let (ra, rb) = (a.rgb.unwrap(), b.rgb.unwrap());
    assert!(ra.max_abs_diff(&rb) < 1e-5, "{}", ra.max_abs_diff(&rb));
    assert!(a.depth.unwrap().max_abs_diff(&b.depth.unwrap()) < 1e-4);
}
