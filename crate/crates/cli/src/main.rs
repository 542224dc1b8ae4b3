use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde_json::json;
use splatnav::config::{synthetic_cloud, EngineConfig, SyntheticScene};
use splatnav::domain_adapt::{
    domain_labels, read_features, score_features, train_da, write_features, DaError, FeatureDump,
};
use splatnav::flight_dynamics::Action;
use splatnav::nav_env::{EnvError, Policy, RewardComponents, Termination, VecEnv};
use splatnav::rasterizer::{
    forward_mount, importance_scores, orbit_poses, psnr, render, render_batch, write_pgm16, write_ppm, Binning,
    CameraModel, Pose, RenderMode, RenderSettings,
};
use splatnav::rng::stream;
use splatnav::splat_scene::{keep_count, prune, save_ply, GaussianCloud};

#[derive(Parser)]
#[command(
    name = "splatnav",
    version,
    about = "Gaussian splatting renderer and quadrotor navigation simulator"
)]
struct Cli {
    /// Root seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one view to PPM (rgb) or 16-bit PGM (depth, millimeters).
    Render {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Body pose `x,y,z,qw,qx,qy,qz`; the camera looks along body +x.
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Rgb)]
        mode: ModeArg,
        #[arg(long, value_enum)]
        binning: Option<BinningArg>,
    },
    /// Render random views in batch and report frames per second.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        views: usize,
        #[arg(long, value_enum)]
        binning: Option<BinningArg>,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
    },
    /// Score Gaussians by importance over random views and keep the best.
    Prune {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        views: usize,
        #[arg(long)]
        keep: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run scripted-policy episodes and log every step as JSON lines.
    Rollout {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PolicyArg::Goto)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Environments stepped together.
        #[arg(long, default_value_t = 1)]
        envs: usize,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Train the domain-adaptation demo, or score external feature dumps.
    DaDemo {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        report: PathBuf,
        /// Score `source.bin target.bin` instead of training.
        #[arg(long, num_args = 2, value_names = ["SOURCE", "TARGET"])]
        features: Option<Vec<PathBuf>>,
        /// Write held-out encoder features of both domains into this directory.
        #[arg(long)]
        dump_features: Option<PathBuf>,
    },
    /// Write a synthetic scene bundle (scene.ply and scene.cfg).
    Synth {
        #[arg(long, value_enum)]
        kind: SynthArg,
        #[arg(long, default_value_t = 10_000)]
        gaussians: usize,
        #[arg(long, default_value_t = 12)]
        pillars: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Rgb,
    Depth,
}

#[derive(Clone, Copy, ValueEnum)]
enum BinningArg {
    Square,
    Exact,
}

impl From<BinningArg> for Binning {
    fn from(b: BinningArg) -> Self {
        match b {
            BinningArg::Square => Binning::Square,
            BinningArg::Exact => Binning::Exact,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Goto,
    Hover,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthArg {
    OpenField,
    PillarForest,
    RandomBox,
}

/// Exit code 2 for bad input, 1 for failures while running.
enum Failure {
    Usage(String),
    Runtime(String),
}

type CliResult = Result<(), Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn env_failure(e: EnvError) -> Failure {
    match e {
        EnvError::Argument(_) => usage(e),
        _ => runtime(e),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig, Failure> {
    match path {
        Some(p) => EngineConfig::load(p).map_err(usage),
        None => Ok(EngineConfig::default()),
    }
}

fn settings(cfg: &EngineConfig, binning: Option<BinningArg>) -> RenderSettings {
    let mut s = cfg.env.render;
    if let Some(b) = binning {
        s.binning = b.into();
    }
    s
}

fn parse_pose(text: &str, mount_pitch_deg: f64) -> Result<Pose, Failure> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--pose: expected 7 comma-separated numbers, got `{text}`")))?;
    if v.len() != 7 || v.iter().any(|x| !x.is_finite()) {
        return Err(usage(format!(
            "--pose: expected 7 finite values x,y,z,qw,qx,qy,qz, got {}",
            v.len()
        )));
    }
    let q = Quaternion::new(v[3], v[4], v[5], v[6]);
    if q.norm() < 1e-9 {
        return Err(usage("--pose: quaternion has zero norm"));
    }
    Ok(Pose::from_body(
        Vector3::new(v[0], v[1], v[2]),
        &UnitQuaternion::from_quaternion(q),
        &forward_mount(mount_pitch_deg),
    ))
}

fn cmd_render(
    config: Option<&Path>,
    pose: &str,
    out: &Path,
    mode: ModeArg,
    binning: Option<BinningArg>,
    seed: u64,
) -> CliResult {
    let cfg = load_config(config)?;
    let pose = parse_pose(pose, cfg.env.mount_pitch_deg)?;
    let scene = cfg.load_scene(seed).map_err(usage)?;
    let s = settings(&cfg, binning);
    let mode = match mode {
        ModeArg::Rgb => RenderMode::Rgb,
        ModeArg::Depth => RenderMode::Depth,
    };
    let t = Instant::now();
    let view = render(&scene.cloud, &cfg.env.camera, &pose, mode, &s);
    let ms = t.elapsed().as_secs_f64() * 1e3;
    let mut w = create(out)?;
    let written = match (view.rgb, view.depth) {
        (Some(rgb), _) => write_ppm(&rgb, &mut w),
        (None, Some(depth)) => write_pgm16(&depth, &mut w),
        (None, None) => unreachable!("render mode requests an image"),
    };
    written
        .and_then(|_| w.flush())
        .map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    println!("render_ms={ms:.3}");
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn cmd_bench(config: Option<&Path>, views: usize, binning: Option<BinningArg>, repeat: usize, seed: u64) -> CliResult {
    if views == 0 || repeat == 0 {
        return Err(usage("--views and --repeat must be at least 1"));
    }
    let cfg = load_config(config)?;
    let scene = cfg.load_scene(seed).map_err(usage)?;
    let s = settings(&cfg, binning);
    let poses = orbit_poses(&scene.cloud, views, &mut stream(seed, "bench", 0));
    let cams = vec![cfg.env.camera; views];
    let mut fps = Vec::with_capacity(repeat);
    for _ in 0..repeat {
        let t = Instant::now();
        render_batch(&[&scene.cloud], &cams, &poses, RenderMode::Rgb, &s).map_err(runtime)?;
        fps.push(views as f64 / t.elapsed().as_secs_f64());
    }
    let name = match s.binning {
        Binning::Square => "square",
        Binning::Exact => "exact",
    };
    println!("views,gaussians,binning,fps");
    println!("{views},{},{name},{:.1}", scene.cloud.len(), median(fps));
    Ok(())
}

fn mean_psnr(
    reference: &GaussianCloud,
    candidate: &GaussianCloud,
    cam: &CameraModel,
    poses: &[Pose],
    s: &RenderSettings,
) -> Result<f64, Failure> {
    let cams = vec![*cam; poses.len()];
    let a = render_batch(&[reference], &cams, poses, RenderMode::Rgb, s).map_err(runtime)?;
    let b = render_batch(&[candidate], &cams, poses, RenderMode::Rgb, s).map_err(runtime)?;
    let total: f64 = a
        .iter()
        .zip(&b)
        .map(|(x, y)| psnr(x.rgb.as_ref().unwrap(), y.rgb.as_ref().unwrap()).min(100.0))
        .sum();
    Ok(total / poses.len() as f64)
}

fn cmd_prune(config: Option<&Path>, views: usize, keep: f64, out: &Path, seed: u64) -> CliResult {
    if !(keep > 0.0 && keep <= 1.0) {
        return Err(usage(format!("--keep must lie in (0, 1], got {keep}")));
    }
    if views == 0 {
        return Err(usage("--views must be at least 1"));
    }
    let cfg = load_config(config)?;
    let scene = cfg.load_scene(seed).map_err(usage)?;
    let cloud = &*scene.cloud;
    let s = cfg.env.render;
    let cam = cfg.env.camera;
    let train: Vec<(CameraModel, Pose)> = orbit_poses(cloud, views, &mut stream(seed, "prune", 0))
        .into_iter()
        .map(|p| (cam, p))
        .collect();
    let scores = importance_scores(cloud, &train, &s).map_err(runtime)?;
    let pruned = prune(cloud, &scores, keep).map_err(runtime)?;

    // Random baseline keeping the same number of Gaussians.
    let mut rng = stream(seed, "prune", 2);
    let random_scores: Vec<f64> = (0..cloud.len()).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
    let baseline = prune(cloud, &random_scores, keep).map_err(runtime)?;

    let held_out = orbit_poses(cloud, 8, &mut stream(seed, "prune", 1));
    let psnr_importance = mean_psnr(cloud, &pruned, &cam, &held_out, &s)?;
    let psnr_random = mean_psnr(cloud, &baseline, &cam, &held_out, &s)?;
    save_ply(&pruned, out).map_err(runtime)?;
    debug_assert_eq!(pruned.len(), keep_count(cloud.len(), keep));
    println!("before,after,psnr_importance,psnr_random");
    println!("{},{},{psnr_importance:.3},{psnr_random:.3}", cloud.len(), pruned.len());
    Ok(())
}

fn components_json(c: &RewardComponents) -> serde_json::Value {
    let map: serde_json::Map<String, serde_json::Value> = RewardComponents::NAMES
        .iter()
        .zip(c.to_array())
        .map(|(k, v)| (k.to_string(), json!(v)))
        .collect();
    serde_json::Value::Object(map)
}

fn cmd_rollout(
    config: Option<&Path>,
    policy: PolicyArg,
    episodes: usize,
    envs: usize,
    log: Option<&Path>,
    seed: u64,
) -> CliResult {
    if episodes == 0 || envs == 0 {
        return Err(usage("--episodes and --envs must be at least 1"));
    }
    let cfg = load_config(config)?;
    let scene = cfg.load_scene(seed).map_err(usage)?;
    let policy = match policy {
        PolicyArg::Goto => Policy::Goto(Default::default()),
        PolicyArg::Hover => Policy::Hover,
        PolicyArg::Random => Policy::Random,
    };
    let mut vec_env = VecEnv::new(scene, cfg.env.clone(), envs, seed).map_err(env_failure)?;
    let mut rngs: Vec<_> = (0..envs as u64).map(|i| stream(seed, "policy", i)).collect();
    let mut log = log.map(create).transpose()?;

    let mut counts = [0usize; 5];
    let mut reward_sum = 0.0;
    let mut episode_reward = vec![0.0; envs];
    let mut finished = 0;
    let t = Instant::now();
    while finished < episodes {
        let actions: Vec<Action> = vec_env
            .envs()
            .iter()
            .zip(rngs.iter_mut())
            .map(|(env, rng)| policy.act(env, rng))
            .collect();
        let results = vec_env.step_batch(&actions).map_err(env_failure)?;
        for (i, (r, a)) in results.iter().zip(&actions).enumerate() {
            episode_reward[i] += r.reward;
            if let Some(w) = log.as_mut() {
                let mut line = json!({
                    "env": i,
                    "episode": r.info.episode,
                    "step": r.info.episode_steps,
                    "action": a.to_array(),
                    "applied_action": r.info.applied_action.to_array(),
                    "position": r.info.position,
                    "reward": r.reward,
                    "components": components_json(&r.info.breakdown.weighted),
                    "termination": r.termination.as_str(),
                    "reset": r.info.reset,
                });
                if let Some(f) = &r.info.fault {
                    line["fault"] = json!(f);
                }
                writeln!(w, "{line}").map_err(runtime)?;
            }
            if r.termination.is_done() && finished < episodes {
                finished += 1;
                reward_sum += episode_reward[i];
                let slot = match r.termination {
                    Termination::Success => 0,
                    Termination::Collision => 1,
                    Termination::CrashZ => 2,
                    Termination::Timeout => 3,
                    _ => 4,
                };
                counts[slot] += 1;
            }
            if r.termination.is_done() {
                episode_reward[i] = 0.0;
            }
        }
    }
    if let Some(mut w) = log {
        w.flush().map_err(runtime)?;
    }
    println!("episodes,success,collision,crash_z,timeout,fault,mean_reward");
    println!(
        "{episodes},{},{},{},{},{},{:.6}",
        counts[0],
        counts[1],
        counts[2],
        counts[3],
        counts[4],
        reward_sum / episodes as f64
    );
    eprintln!("elapsed_s={:.3}", t.elapsed().as_secs_f64());
    if counts[4] > 0 {
        return Err(runtime(format!("{} episodes ended in a simulation fault", counts[4])));
    }
    Ok(())
}

fn da_failure(e: DaError) -> Failure {
    match e {
        DaError::Diverged { .. } | DaError::Io { .. } => runtime(e),
        _ => usage(e),
    }
}

fn score_dumps(paths: &[PathBuf], report: &Path, cfg: &EngineConfig, seed: u64) -> CliResult {
    let read = |p: &PathBuf| read_features(p).map_err(usage);
    let (source, target) = (read(&paths[0])?, read(&paths[1])?);
    if source.features.ncols() != target.features.ncols() {
        return Err(usage(format!(
            "feature widths differ: {} vs {}",
            source.features.ncols(),
            target.features.ncols()
        )));
    }
    let (ns, nt) = (source.features.nrows(), target.features.nrows());
    let mut all = nalgebra::DMatrix::zeros(ns + nt, source.features.ncols());
    all.rows_mut(0, ns).copy_from(&source.features);
    all.rows_mut(ns, nt).copy_from(&target.features);
    let labels = domain_labels(ns, nt);
    let (g, probe) = score_features(&all, &labels, cfg.da.probe_train_fraction, seed).map_err(da_failure)?;
    let csv = format!(
        "n_source,n_target,dim,gsi,probe_acc\n{ns},{nt},{},{g:.6},{probe:.6}\n",
        all.ncols()
    );
    std::fs::write(report, &csv).map_err(|e| runtime(format!("{}: {e}", report.display())))?;
    print!("{csv}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_da_demo(
    config: Option<&Path>,
    epochs: Option<usize>,
    lambda: Option<f64>,
    report: &Path,
    features: Option<&[PathBuf]>,
    dump: Option<&Path>,
    seed: u64,
) -> CliResult {
    let mut cfg = load_config(config)?;
    if let Some(paths) = features {
        return score_dumps(paths, report, &cfg, seed);
    }
    if let Some(e) = epochs {
        cfg.da.epochs = e;
    }
    if let Some(l) = lambda {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(usage(format!("--lambda must be a non-negative number, got {l}")));
        }
        cfg.da.lambda_grl = l;
    }
    let trained = match train_da(&cfg.da, seed) {
        Ok(t) => t,
        Err(DaError::Diverged { epoch, report: partial }) => {
            let _ = partial.write_csv(report);
            return Err(runtime(format!(
                "training diverged at epoch {epoch}; partial report written"
            )));
        }
        Err(e) => return Err(da_failure(e)),
    };
    trained
        .report
        .write_csv(report)
        .map_err(|e| runtime(format!("{}: {e}", report.display())))?;
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
        for (name, data, label) in [
            ("source.bin", &trained.data.source_test, 1u8),
            ("target.bin", &trained.data.target_test, 0u8),
        ] {
            let features = trained.network.features(&data.x);
            let n = features.nrows();
            write_features(
                &dir.join(name),
                &FeatureDump {
                    features,
                    labels: vec![label; n],
                },
            )
            .map_err(da_failure)?;
        }
    }
    let m = trained.report.last();
    println!("epoch,L_DA,disc_acc,gsi,probe_acc,task_loss");
    println!(
        "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
        m.epoch, m.da_loss, m.disc_acc, m.gsi, m.probe_acc, m.task_loss
    );
    Ok(())
}

fn cmd_synth(kind: SynthArg, gaussians: usize, pillars: usize, out: &Path, seed: u64) -> CliResult {
    let (kind, cfg) = match kind {
        SynthArg::OpenField => (SyntheticScene::OpenField, "[env]\ngoal = 3, 0, 1\n"),
        SynthArg::PillarForest => (SyntheticScene::PillarForest { pillars }, "[env]\ngoal = 7, 0, 1\n"),
        SynthArg::RandomBox => (SyntheticScene::RandomBox { gaussians }, "[render]\nbinning = exact\n"),
    };
    let cloud = synthetic_cloud(kind, seed);
    std::fs::create_dir_all(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    save_ply(&cloud, out.join("scene.ply")).map_err(runtime)?;
    std::fs::write(out.join("scene.cfg"), cfg).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    println!("gaussians={}", cloud.len());
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let seed = cli.seed;
    match cli.command {
        Command::Render {
            config,
            pose,
            out,
            mode,
            binning,
        } => cmd_render(config.as_deref(), &pose, &out, mode, binning, seed),
        Command::Bench {
            config,
            views,
            binning,
            repeat,
        } => cmd_bench(config.as_deref(), views, binning, repeat, seed),
        Command::Prune {
            config,
            views,
            keep,
            out,
        } => cmd_prune(config.as_deref(), views, keep, &out, seed),
        Command::Rollout {
            config,
            policy,
            episodes,
            envs,
            log,
        } => cmd_rollout(config.as_deref(), policy, episodes, envs, log.as_deref(), seed),
        Command::DaDemo {
            config,
            epochs,
            lambda,
            report,
            features,
            dump_features,
        } => cmd_da_demo(
            config.as_deref(),
            epochs,
            lambda,
            &report,
            features.as_deref(),
            dump_features.as_deref(),
            seed,
        ),
        Command::Synth {
            kind,
            gaussians,
            pillars,
            out,
        } => cmd_synth(kind, gaussians, pillars, &out, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
