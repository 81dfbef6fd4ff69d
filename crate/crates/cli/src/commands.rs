use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use crowdnav::data::{
    generate_synthetic, load_trajectories, read_manifest, segment_episodes, write_manifest,
    write_trajectories, EpisodeSpec, LoadOptions, Segment, TrajectoryDataset, GRID_HZ,
};
use crowdnav::policy::{load_policy, save_policy, train, ActMode};
use crowdnav::sim::{
    evaluate, parse_trace, write_metrics_csv, write_trace, HiCrowdEnv, HiCrowdPlanner, MpcPlanner, OrcaPlanner,
    Planner,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{PlannerKind, PolicyMode, RunConfig};
use crate::{plot, Classify, Cli, Command, ExportFormat, Failure};

pub const TRAJECTORIES: &str = "trajectories.txt";
pub const SEGMENTS: &str = "segments.json";
pub const EPISODES: &str = "episodes.txt";
pub const TRAIN_EPISODES: &str = "train_episodes.txt";
pub const POLICY: &str = "policy.bin";
pub const CURVE: &str = "curve.csv";

pub fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).usage()?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cfg.resolve_out_dir(cli.out.as_deref());
    match cli.command {
        Command::GenData { input, frame_rate, episodes, setting } => {
            if input.is_some() {
                cfg.data.input = input;
            }
            if let Some(r) = frame_rate {
                cfg.data.load.frame_rate = r;
            }
            if let Some(n) = episodes {
                cfg.data.episodes = n;
            }
            if let Some(s) = setting {
                cfg.data.setting = s;
            }
            gen_data(&cfg, &out)
        }
        Command::Train { data, lambda_f, transitions, setting } => {
            if let Some(l) = lambda_f {
                cfg.sim.reward.lambda_f = l.parse().expect("preset values are numbers");
            }
            if let Some(n) = transitions {
                cfg.train.sac.total_transitions = n;
            }
            if let Some(s) = setting {
                cfg.train.setting = s;
            }
            cmd_train(&cfg, data.as_deref().unwrap_or(&out), &out)
        }
        Command::Eval { data, planner, checkpoint, episodes, jobs, mode } => {
            if let Some(p) = planner {
                cfg.eval.planner = p;
            }
            if checkpoint.is_some() {
                cfg.eval.checkpoint = checkpoint;
            }
            if let Some(j) = jobs {
                cfg.eval.jobs = j;
            }
            if let Some(m) = mode {
                cfg.eval.mode = m;
            }
            let data = data.unwrap_or_else(|| out.clone());
            let manifest = episodes.unwrap_or_else(|| data.join(EPISODES));
            cmd_eval(&cfg, &data, &manifest, &out)
        }
        Command::Export { trace, format, output } => {
            let output = output.unwrap_or_else(|| {
                trace.with_extension(match format {
                    ExportFormat::Svg => "svg",
                    ExportFormat::Trace => "trace.jsonl",
                })
            });
            cmd_export(&cfg, &trace, format, &output)
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display())).runtime()
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), Failure> {
    let file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display())).runtime()?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).with_context(|| format!("cannot write {}", path.display())).runtime()
}

fn gen_data(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let d = &cfg.data;
    let ds = match &d.input {
        Some(p) => load_trajectories(p, &d.load).data()?,
        None => generate_synthetic(&d.synthetic, cfg.seed).data()?,
    };
    let segments = segment_episodes(&ds, &d.segment);
    if segments.is_empty() {
        return Err(Failure::Data(anyhow!(
            "no segment holds at least {} pedestrians for {} s",
            d.segment.min_peds,
            d.segment.min_duration
        )));
    }
    // streams 4 and 5 keep the manifests independent of the generator
    let sample = |n: usize, stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        HiCrowdEnv::sample_pool(&segments, d.setting, &d.sampling, n, &mut rng).data()
    };
    let specs = sample(d.episodes, 4)?;
    let train_specs = sample(d.train_episodes, 5)?;

    create_dir(out)?;
    write_file(&out.join(TRAJECTORIES), |w| write_trajectories(&ds, w))?;
    write_file(&out.join(SEGMENTS), |w| {
        serde_json::to_writer_pretty(&mut *w, &segments)?;
        writeln!(w)
    })?;
    write_file(&out.join(EPISODES), |w| write_manifest(&specs, w))?;
    write_file(&out.join(TRAIN_EPISODES), |w| write_manifest(&train_specs, w))?;
    eprintln!(
        "{} frames, {} segments, {} test / {} training episodes -> {}",
        ds.frames.len(),
        segments.len(),
        specs.len(),
        train_specs.len(),
        out.display()
    );
    Ok(())
}

fn load_data(dir: &Path) -> Result<(Arc<TrajectoryDataset>, Vec<Segment>), Failure> {
    let ds = load_trajectories(&dir.join(TRAJECTORIES), &LoadOptions { frame_rate: GRID_HZ })
        .context("run gen-data first")
        .data()?;
    let path = dir.join(SEGMENTS);
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display())).data()?;
    let segments: Vec<Segment> =
        serde_json::from_str(&text).with_context(|| format!("invalid {}", path.display())).data()?;
    Ok((Arc::new(ds), segments))
}

fn read_specs(path: &Path) -> Result<Vec<EpisodeSpec>, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).data()?;
    let specs = read_manifest(&text).with_context(|| format!("invalid manifest {}", path.display())).data()?;
    if specs.is_empty() {
        return Err(Failure::Data(anyhow!("manifest {} lists no episodes", path.display())));
    }
    Ok(specs)
}

fn cmd_train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<(), Failure> {
    cfg.train.sac.validate().usage()?;
    let (ds, _) = load_data(data)?;
    let pool: Vec<EpisodeSpec> = read_specs(&data.join(TRAIN_EPISODES))?
        .into_iter()
        .map(|s| EpisodeSpec { setting: cfg.train.setting, ..s })
        .collect();
    let mut env = HiCrowdEnv::new(ds, pool, cfg.sim.clone(), cfg.train.obs, cfg.seed).data()?;
    create_dir(out)?;
    let result = train(&mut env, &cfg.train.sac, cfg.seed, |p| {
        eprintln!("{:>8} transitions  return {:>9.3}  task {:>9.3}", p.transitions, p.avg_return, p.avg_task_return)
    })
    .runtime()?;

    let meta = serde_json::json!({
        "seed": cfg.seed,
        "setting": cfg.train.setting,
        "lambda_f": cfg.sim.reward.lambda_f,
        "sac": cfg.train.sac,
        "episodes": result.episodes,
        "updates": result.updates,
    });
    let path = out.join(POLICY);
    save_policy(&path, &result.policy, meta).with_context(|| format!("cannot write {}", path.display())).runtime()?;
    write_file(&out.join(CURVE), |w| {
        writeln!(w, "transitions,avg_return,avg_task_return,episodes")?;
        for p in &result.curve {
            writeln!(w, "{},{},{},{}", p.transitions, p.avg_return, p.avg_task_return, p.episodes)?;
        }
        Ok(())
    })?;
    if result.skipped_updates > 0 {
        eprintln!("warning: {} updates skipped on non-finite losses", result.skipped_updates);
    }
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, data: &Path, manifest: &Path, out: &Path) -> Result<(), Failure> {
    if cfg.eval.jobs == 0 {
        return Err(Failure::Usage(anyhow!("--jobs must be at least 1")));
    }
    let policy = match cfg.eval.planner {
        PlannerKind::Hicrowd => {
            let path = cfg
                .eval
                .checkpoint
                .as_ref()
                .ok_or_else(|| Failure::Usage(anyhow!("the hicrowd planner needs --checkpoint")))?;
            let (p, _) = load_policy(path).with_context(|| format!("cannot load {}", path.display())).data()?;
            if p.obs != cfg.train.obs {
                eprintln!("note: checkpoint observation encoding differs from the config; using the checkpoint's");
            }
            Some(p)
        }
        _ => None,
    };
    let (ds, _) = load_data(data)?;
    let specs: Vec<EpisodeSpec> = read_specs(manifest)?
        .into_iter()
        .map(|s| EpisodeSpec { seed: s.seed.wrapping_add(cfg.seed), ..s })
        .collect();

    let mode = match cfg.eval.mode {
        PolicyMode::Deterministic => ActMode::Deterministic,
        PolicyMode::Stochastic => ActMode::Stochastic,
    };
    let kind = cfg.eval.planner;
    let mpc = cfg.sim.mpc.clone();
    let orca = OrcaPlanner {
        params: cfg.sim.orca,
        robot_radius: cfg.sim.robot_radius,
        ped_radius: cfg.sim.ped_radius,
        ..OrcaPlanner::default()
    };
    let make = move || -> Box<dyn Planner> {
        match kind {
            PlannerKind::Hicrowd => {
                Box::new(HiCrowdPlanner::new(policy.clone().expect("loaded above"), mpc.clone(), mode))
            }
            PlannerKind::Mpc => Box::new(MpcPlanner { params: mpc.clone() }),
            PlannerKind::Orca => Box::new(orca.clone()),
        }
    };
    let result = evaluate(&make, &specs, ds, &cfg.sim, cfg.eval.jobs);
    let records: Vec<_> = result.results.into_iter().collect::<Result<_, _>>().runtime()?;
    let table = result.table.ok_or_else(|| Failure::Runtime(anyhow!("no episode completed")))?;

    let name = kind.name();
    let traces = out.join(format!("traces_{name}"));
    create_dir(&traces)?;
    for (k, r) in records.iter().enumerate() {
        write_file(&traces.join(trace_name(k)), |w| write_trace(r, w))?;
    }
    write_file(&out.join(format!("metrics_{name}.csv")), |w| write_metrics_csv(&[(name, &table)], w))?;
    eprintln!(
        "{name}: {} episodes  SR {:.3}  CR {:.3}  TR {:.3}  FF {:.4}",
        table.episodes, table.sr, table.cr, table.tr, table.ff
    );
    Ok(())
}

pub fn trace_name(k: usize) -> String {
    format!("episode_{k:04}.jsonl")
}

fn cmd_export(cfg: &RunConfig, trace: &Path, format: ExportFormat, output: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(trace).with_context(|| format!("cannot read {}", trace.display())).data()?;
    let record = parse_trace(&text).with_context(|| format!("invalid trace {}", trace.display())).data()?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    match format {
        ExportFormat::Svg => {
            let svg = plot::render_svg(&record, &cfg.sim.grouping).runtime()?;
            write_file(output, |w| w.write_all(svg.as_bytes()))
        }
        ExportFormat::Trace => write_file(output, |w| write_trace(&record, w)),
    }
}

