use std::iter;

use aqurate_core::device::{characterize_with_trace, CharacterizationPoint};
use aqurate_core::io;
use aqurate_core::pipeline::{run_trial, FrameContext, SummaryRow};
use aqurate_core::scaling::{aqr_reference, back_solve, bundled_entries, published_table, render_table};
use aqurate_core::{
    calibrate, output_probability, run_experiment, table_report, ClockConfig, ExperimentConfig, StaircaseProtocol,
};
use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::output::OutDir;
use crate::{
    CalibrateArgs, CharacterizeArgs, Cli, CliError, CliResult, Command, CommonArgs, ExperimentArgs, ReplayArgs,
    ScalingArgs,
};

/// Runs a parsed command line. `args` is recorded in the manifest;
/// `embedded_config` replaces `--config` when replaying.
pub fn execute(cli: Cli, args: Vec<String>, embedded_config: Option<String>) -> CliResult<()> {
    if let Command::Replay(r) = &cli.command {
        return replay(r, &cli.common);
    }
    let cfg = match (embedded_config, &cli.common.config) {
        (Some(text), _) => RunConfig::parse(&text)?,
        (None, Some(path)) => RunConfig::load(path)?,
        (None, None) => RunConfig::default(),
    };
    let seed = cli.common.seed.unwrap_or(cfg.experiment.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(match cli.common.jobs {
            Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
            Some(n) => n,
            None => 0,
        })
        .build()
        .map_err(CliError::runtime)?;

    let mut out = pool.install(|| match &cli.command {
        Command::Characterize(a) => characterize(a, &cfg, seed, &cli.common),
        Command::Calibrate(a) => calibrate_cmd(a, &cfg, seed, &cli.common),
        Command::Experiment(a) => experiment(a, &cfg, seed, &cli.common),
        Command::Scaling(a) => scaling(a, &cli.common),
        Command::Replay(_) => unreachable!("handled above"),
    })?;

    let files = out
        .written()
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: cli.command.name().to_string(),
        seed,
        out_dir: cli.common.out.display().to_string(),
        config_path: cli.common.config.as_ref().map(|p| p.display().to_string()),
        args,
        config: cfg.source,
        files,
    };
    out.write_text(MANIFEST_FILE, &manifest.to_toml()?)?;
    Ok(())
}

fn replay(r: &ReplayArgs, common: &CommonArgs) -> CliResult<()> {
    let manifest = RunManifest::load(&r.manifest)?;
    let argv = iter::once("aqurate".to_string()).chain(manifest.args.iter().cloned());
    let mut cli = Cli::try_parse_from(argv).map_err(|e| CliError::Config(format!("manifest arguments: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Config("a manifest cannot record a replay".into()));
    }
    cli.common.out = common.out.clone();
    cli.common.jobs = common.jobs;
    execute(cli, manifest.args, manifest.config)
}

fn characterize(a: &CharacterizeArgs, cfg: &RunConfig, seed: u64, common: &CommonArgs) -> CliResult<OutDir> {
    let dev = cfg.experiment.device;
    dev.validate().map_err(CliError::config)?;
    let clock = cfg.experiment.clock();
    clock.validate().map_err(CliError::config)?;
    if !(a.dwell_ns > 0.0 && a.dwell_ns.is_finite()) {
        return Err(CliError::Config("--dwell-ns must be positive".into()));
    }
    let protocol = StaircaseProtocol {
        step_volts: a.grid_step,
        dwell_s: a.dwell_ns * 1e-9,
    };
    let grid = protocol.grid(dev.vdd).map_err(CliError::config)?;

    let (points, trace) = if a.analytic {
        let pts = grid
            .iter()
            .map(|&vin| {
                Ok(CharacterizationPoint {
                    vin,
                    probability: output_probability(vin, &dev)?,
                    n_samples: 0,
                })
            })
            .collect::<aqurate_core::Result<Vec<_>>>()
            .map_err(CliError::runtime)?;
        (pts, None)
    } else {
        let samples = a.samples.unwrap_or_else(|| protocol.samples_per_step(&clock));
        if samples == 0 {
            return Err(CliError::Config("--samples must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pts, tr) = characterize_with_trace(&grid, samples, &clock, &dev, &mut rng).map_err(CliError::runtime)?;
        (pts, Some(tr))
    };

    let mut out = OutDir::create(&common.out)?;
    out.write("characterization.csv", |w| io::write_characterization(w, &points))?;
    if let Some(tr) = &trace {
        out.write("staircase.csv", |w| io::write_staircase(w, tr, clock.f_clk))?;
    }
    println!("vin_volts  probability");
    for p in &points {
        println!("{:>9.3}  {:.4}", p.vin, p.probability);
    }
    Ok(out)
}

fn calibrate_cmd(a: &CalibrateArgs, cfg: &RunConfig, seed: u64, common: &CommonArgs) -> CliResult<OutDir> {
    let e = &cfg.experiment;
    let step = a.grid_step.unwrap_or(e.calibration_step);
    let samples = if a.analytic {
        0
    } else {
        a.samples.unwrap_or(e.calibration_samples)
    };
    e.device.validate().map_err(CliError::config)?;
    let clock: ClockConfig = e.clock();
    clock.validate().map_err(CliError::config)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Config("--grid-step must be positive".into()));
    }
    // Same stream as the calibration built inside `experiment`.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let cal = calibrate(&e.device, step, samples, &clock, &mut rng).map_err(CliError::runtime)?;
    let mut out = OutDir::create(&common.out)?;
    out.write("calibration.csv", |w| io::write_calibration(w, &cal))?;
    println!(
        "{} calibration points, {}",
        cal.points().len(),
        if samples == 0 {
            "analytic".to_string()
        } else {
            format!("{samples} cycles each")
        }
    );
    Ok(out)
}

fn apply_overrides(a: &ExperimentArgs, base: &ExperimentConfig, seed: u64) -> ExperimentConfig {
    let mut c = base.clone();
    c.seed = seed;
    if let Some(r) = &a.rates {
        c.rates = r.clone();
    }
    if let Some(s) = &a.solvers {
        c.solvers = s.clone();
    }
    if let Some(v) = a.trials {
        c.trials = v;
    }
    if let Some(v) = a.frames {
        c.frames = v;
    }
    if let Some(v) = a.warmup_frames {
        c.warmup_frames = v;
    }
    if let Some(v) = a.n {
        c.n = v;
    }
    if let Some(v) = a.snr_db {
        c.snr_db = Some(v);
    }
    if a.noiseless {
        c.snr_db = None;
    }
    if let Some(v) = a.kappa {
        c.policy.kappa = v;
    }
    c
}

fn experiment(a: &ExperimentArgs, cfg: &RunConfig, seed: u64, common: &CommonArgs) -> CliResult<OutDir> {
    let c = apply_overrides(a, &cfg.experiment, seed);
    c.validate().map_err(CliError::config)?;
    if a.dump_trial >= c.trials {
        return Err(CliError::Config(format!(
            "--dump-trial {} is out of range for {} trials",
            a.dump_trial, c.trials
        )));
    }
    let report = run_experiment(&c).map_err(CliError::runtime)?;
    let ctx = FrameContext::from_config(&c).map_err(CliError::runtime)?;
    let dump = run_trial(&c, &ctx, 0, a.dump_trial).map_err(CliError::runtime)?;
    let last = dump.frames.last().expect("validated frames >= 1");
    let traces: Vec<_> = dump.frames.iter().map(|f| f.trace.clone()).collect();

    let mut out = OutDir::create(&common.out)?;
    out.write("results.csv", |w| io::write_results(w, &report.rows))?;
    out.write("frames.csv", |w| io::write_frames(w, &report.rows))?;
    out.write("summary.csv", |w| io::write_summary(w, &report.summary))?;
    out.write("signal.csv", |w| io::write_signal(w, &dump.signal))?;
    out.write("measurements.csv", |w| io::write_measurements(w, &last.measurements))?;
    out.write("aclk_trace.csv", |w| io::write_traces(w, &traces))?;
    print_summary(&report.summary);
    Ok(out)
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:<8} {:>6} {:>12} {:>10} {:>9}",
        "solver", "rate", "mean_error", "std_error", "mean_m"
    );
    for s in rows {
        println!(
            "{:<8} {:>6.3} {:>12.5} {:>10.5} {:>9.1}",
            s.algorithm.to_string(),
            s.sparsity_rate,
            s.mean_normalized_error,
            s.std_error,
            s.mean_m
        );
    }
}

fn read_file(path: &std::path::Path) -> CliResult<std::fs::File> {
    std::fs::File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))
}

fn scaling(a: &ScalingArgs, common: &CommonArgs) -> CliResult<OutDir> {
    let reference = aqr_reference();
    if a.inverse {
        let rows = match &a.published {
            Some(p) => io::read_published(read_file(p)?).map_err(CliError::config)?,
            None => published_table(),
        };
        let entries = rows
            .iter()
            .map(|r| back_solve(r, &reference))
            .collect::<aqurate_core::Result<Vec<_>>>()
            .map_err(CliError::config)?;
        let mut out = OutDir::create(&common.out)?;
        out.write("back_solved.csv", |w| io::write_back_solved(w, &entries))?;
        for e in &entries {
            let fmt = |v: Option<f64>, unit: &str| v.map_or("N/A".to_string(), |x| format!("{x:.6e}{unit}"));
            println!(
                "{:<12} power {}  area {}  ({})",
                e.name,
                fmt(e.power_watts, " W"),
                fmt(e.area, ""),
                io::BACK_SOLVED_NOTE
            );
        }
        return Ok(out);
    }
    let entries = match &a.entries {
        Some(p) => io::read_entries(read_file(p)?).map_err(CliError::config)?,
        None => bundled_entries(),
    };
    let rows = table_report(&entries, &reference).map_err(CliError::config)?;
    let table = render_table(&rows);
    let mut out = OutDir::create(&common.out)?;
    out.write("report.csv", |w| io::write_report(w, &rows))?;
    out.write_text("table.txt", &table)?;
    print!("{table}");
    Ok(out)
}
