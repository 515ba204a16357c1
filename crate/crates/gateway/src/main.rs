use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rescuesim_core::bus::{BusRegion, MemoryMap};
use rescuesim_core::clock::ScaledClock;
use rescuesim_core::detection::DetectionRules;
use rescuesim_core::display::icons::write_icon_set;
use rescuesim_core::graph::{load_graph, validate};
use rescuesim_core::text::{generate_asset_pack, Palette};
use rescuesim_core::vitals::{synth_scenario, Profile, Pump, ThresholdRules};
use rescuesim_gateway::config::DEFAULT_PORT;
use rescuesim_gateway::{run, GraphSource, RunConfig, ScenarioSource};

#[derive(Parser)]
#[command(name = "rescuesim", version, about = "Rescue-wearable simulator")]
struct Cli {
    #[command(subcommand)]
    command: Top,
}

#[derive(Subcommand)]
enum Top {
    /// Treatment-path graphs.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// The shared memory region.
    #[command(subcommand)]
    Bus(BusCmd),
    /// Vitals scenarios.
    #[command(subcommand)]
    Feed(FeedCmd),
    /// Pre-rendered text and icon bitmaps.
    #[command(subcommand)]
    Assets(AssetsCmd),
    /// The full simulator.
    #[command(subcommand)]
    Sim(SimCmd),
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Prints every rule violation; exits 0 only for a valid graph.
    Validate { file: PathBuf },
}

#[derive(Subcommand)]
enum BusCmd {
    /// Replays a scenario into a fresh region and prints it.
    Dump {
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        /// Replay samples up to this scenario time, in seconds.
        #[arg(long, default_value_t = 0.0)]
        until: f64,
        /// Consume these slots before dumping.
        #[arg(long)]
        consume: Vec<String>,
    },
}

#[derive(Subcommand)]
enum FeedCmd {
    /// Replays a scenario onto a bus and prints each publish.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Prints a synthetic scenario.
    Synth {
        #[arg(long)]
        profile: Profile,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 120)]
        secs: u32,
    },
}

#[derive(Subcommand)]
enum AssetsCmd {
    /// Renders every corpus line in every color.
    Generate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "white")]
        colors: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes the icon set.
    Icons {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SimCmd {
    Run(SimArgs),
}

#[derive(Args)]
struct SimArgs {
    /// Graph file, optionally `file=<group id>`; repeat for more paths.
    #[arg(long, required = true)]
    graph: Vec<String>,
    /// Scenario file or `synth:<profile>[:<seed>[:<seconds>]]`.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long)]
    headless: bool,
    #[arg(long, requires = "headless")]
    script: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
    /// Battery percent lost per hour of simulated time.
    #[arg(long, default_value_t = 12.0)]
    battery_drain: f64,
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn graph_validate(file: &Path) -> Result<bool> {
    let graph = load_graph(&read(file)?)?;
    let violations = validate(&graph);
    for v in &violations {
        println!("{}: {v}", v.rule_id());
    }
    if violations.is_empty() {
        println!("{}: ok", file.display());
    }
    Ok(violations.is_empty())
}

fn bus_dump(map: Option<PathBuf>, scenario: Option<String>, until: f64, consume: &[String]) -> Result<()> {
    let map = match map {
        Some(p) => MemoryMap::parse(&read(&p)?)?,
        None => MemoryMap::default(),
    };
    let bus = BusRegion::new(map);
    if let Some(s) = scenario {
        let scenario = s.parse::<ScenarioSource>()?.load()?;
        let (rules, detection) = (ThresholdRules::default(), DetectionRules::default());
        let mut pump = Pump::new(&bus, &rules, Some(&detection));
        pump.publish_patient(&scenario);
        for sample in scenario.samples.iter().take_while(|s| s.t <= until) {
            pump.publish_sample(sample);
        }
    }
    for slot in consume {
        bus.consume(slot)?;
    }
    print!("{}", bus.dump());
    Ok(())
}

fn feed_run(scenario: &str, speed: f64) -> Result<()> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err("speed must be positive".into());
    }
    let scenario = scenario.parse::<ScenarioSource>()?.load()?;
    let bus = BusRegion::new(MemoryMap::default());
    let (rules, detection) = (ThresholdRules::default(), DetectionRules::default());
    let mut pump = Pump::new(&bus, &rules, Some(&detection));
    let clock = ScaledClock::new(speed);
    let mut stdout = io::stdout().lock();
    pump.run(&scenario, &clock, |e| {
        writeln!(stdout, "{}", serde_json::to_string(e).expect("effects serialize")).is_ok()
    });
    Ok(())
}

fn assets_generate(corpus: &Path, colors: &str, out: &Path) -> Result<()> {
    let palette: Palette = colors.parse()?;
    let report = generate_asset_pack(&read(corpus)?, &palette, out)?;
    for r in report.failures() {
        eprintln!("line {}: {}", r.line, r.error.as_deref().unwrap_or_default());
    }
    println!(
        "{} assets, {} new, {} failed",
        report.rows.len(),
        report.written,
        report.failures().count()
    );
    Ok(())
}

fn sim_run(args: SimArgs) -> Result<()> {
    let graphs = args
        .graph
        .iter()
        .map(|g| g.parse::<GraphSource>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let config = RunConfig {
        graphs,
        scenario: args.scenario.parse()?,
        speed: args.speed,
        port: args.port,
        headless: args.headless,
        script: args.script,
        log: args.log,
        battery_drain: args.battery_drain,
    };
    let stop = Arc::new(AtomicBool::new(false));
    if !config.headless {
        let flag = stop.clone();
        ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed))?;
    }
    run(&config, stop, &mut io::stdout().lock())?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match Cli::parse().command {
        Top::Graph(GraphCmd::Validate { file }) => graph_validate(&file),
        Top::Bus(BusCmd::Dump {
            map,
            scenario,
            until,
            consume,
        }) => bus_dump(map, scenario, until, &consume).map(|_| true),
        Top::Feed(FeedCmd::Run { scenario, speed }) => feed_run(&scenario, speed).map(|_| true),
        Top::Feed(FeedCmd::Synth { profile, seed, secs }) => {
            print!("{}", synth_scenario(seed, secs, profile).to_text());
            Ok(true)
        }
        Top::Assets(AssetsCmd::Generate { corpus, colors, out }) => {
            assets_generate(&corpus, &colors, &out).map(|_| true)
        }
        Top::Assets(AssetsCmd::Icons { out }) => write_icon_set(&out)
            .map(|rows| println!("{} icons written to {}", rows.len(), out.display()))
            .map(|_| true)
            .map_err(Into::into),
        Top::Sim(SimCmd::Run(args)) => sim_run(args).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
