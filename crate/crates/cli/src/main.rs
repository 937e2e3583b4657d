use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use lanegame::field::total_field;
use lanegame::trace::{write_comparison_csv, write_metrics, write_trace_csv};
use lanegame::{
    resolve_scenario, run_simulation, summarize, DrivingStyle, EquilibriumKind, Obstacle, RunMetrics, ScenarioConfig, ScenarioError,
    SimError,
};

/// Style-aware game-theoretic lane-change simulator.
#[derive(Parser)]
#[command(name = "lanegame", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one style and strategy; writes a CSV trace and a metrics file next to it.
    Run {
        /// Bundled scenario name (scenario_a, scenario_b) or path to a JSON file.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "normal")]
        style: DrivingStyle,
        /// nash or stackelberg; defaults to the scenario's own setting.
        #[arg(long)]
        strategy: Option<EquilibriumKind>,
        /// Trace CSV path; metrics go to the same path with a `.metrics.txt` suffix.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every style under both strategies and print a comparison table.
    Batch {
        #[arg(long)]
        scenario: String,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory receiving one trace per run.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Sample the initial potential field over a station × offset grid as CSV.
    FieldDump {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        /// Station step (m).
        #[arg(long, default_value_t = 1.0)]
        ds: f64,
        /// Lateral offset step (m).
        #[arg(long, default_value_t = 0.25)]
        dl: f64,
        /// Station range; defaults to the stretch around the vehicles.
        #[arg(long)]
        s_min: Option<f64>,
        #[arg(long)]
        s_max: Option<f64>,
    },
    /// Check a scenario file without running it.
    Validate {
        /// Bundled scenario name or path.
        scenario: String,
    },
}

/// Failure categories and their exit codes; 2 is left to clap for usage errors.
#[derive(Debug)]
enum Failure {
    Config(ScenarioError),
    Sim(SimError),
    Aborted(String),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 3,
            Failure::Sim(_) | Failure::Aborted(_) => 4,
            Failure::Io(_) => 5,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Sim(e) => write!(f, "{e}"),
            Failure::Aborted(why) => write!(f, "run aborted: {why}"),
            Failure::Io(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Config(e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Scenario(e) => Failure::Config(e),
            e => Failure::Sim(e),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn metrics_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".metrics.txt");
    out.with_file_name(name)
}

fn run(scenario: &str, style: DrivingStyle, strategy: Option<EquilibriumKind>, out: &Path) -> Result<(), Failure> {
    let cfg = resolve_scenario(scenario)?;
    let strategy = strategy.unwrap_or(cfg.strategy);
    let trace = run_simulation(&cfg, style, strategy)?;
    let mut w = create(out)?;
    write_trace_csv(&trace, &mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", out.display()))?;
    let metrics = summarize(&trace);
    let mpath = metrics_path(out);
    let mut mw = create(&mpath)?;
    write_metrics(&metrics, &mut mw).and_then(|_| mw.flush()).with_context(|| format!("writing {}", mpath.display()))?;
    let stdout = io::stdout();
    write_metrics(&metrics, stdout.lock()).context("writing to stdout")?;
    match trace.aborted {
        Some(why) => Err(Failure::Aborted(why)),
        None => Ok(()),
    }
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|v| format!("{v:.digits$}")).unwrap_or_else(|| "-".into())
}

fn print_table(cfg: &ScenarioConfig, runs: &[(String, String, RunMetrics)]) {
    println!("{}", cfg.name);
    let roles: Vec<String> = runs
        .iter()
        .flat_map(|(_, _, m)| m.gap_at_tc.keys().map(|r| r.to_string()))
        .fold(Vec::new(), |mut acc, r| {
            if !acc.contains(&r) {
                acc.push(r);
            }
            acc
        });
    let mut header = format!("{:<13} {:<12} {:>6} {:>5}", "style", "strategy", "t_c", "sigma");
    for r in &roles {
        header += &format!(" {:>9}", format!("gap {r}"));
    }
    header += &format!(" {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "v_EC", "safety", "comfort", "effic.", "total", "min d");
    println!("{header}");
    for (style, strategy, m) in runs {
        let mut line = format!(
            "{style:<13} {strategy:<12} {:>6} {:>5}",
            fmt_opt(m.t_c, 2),
            m.sigma.map(|s| s.to_string()).unwrap_or_else(|| "-".into())
        );
        for r in &roles {
            let g = m.gap_at_tc.iter().find(|(k, _)| k.to_string() == *r).map(|(_, g)| *g);
            line += &format!(" {:>9}", fmt_opt(g, 2));
        }
        line += &format!(
            " {:>8} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.2}",
            fmt_opt(m.ego_speed_at_tc, 2),
            m.rms_safety,
            m.rms_comfort,
            m.rms_efficiency,
            m.rms_total,
            m.min_distance
        );
        println!("{line}");
    }
}

fn batch(scenario: &str, out: Option<&Path>, trace_dir: Option<&Path>) -> Result<(), Failure> {
    let cfg = resolve_scenario(scenario)?;
    let mut runs = Vec::new();
    let mut aborted = Vec::new();
    for strategy in [EquilibriumKind::Nash, EquilibriumKind::Stackelberg] {
        for style in DrivingStyle::ALL {
            let trace = run_simulation(&cfg, style, strategy)?;
            if let Some(dir) = trace_dir {
                let path = dir.join(format!("{}_{style}_{strategy}.csv", cfg.name));
                let mut w = create(&path)?;
                write_trace_csv(&trace, &mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(why) = &trace.aborted {
                aborted.push(format!("{style}/{strategy}: {why}"));
            }
            runs.push((style.to_string(), strategy.to_string(), summarize(&trace)));
        }
    }
    print_table(&cfg, &runs);
    if let Some(path) = out {
        let mut w = create(path)?;
        write_comparison_csv(&runs, &mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;
    }
    if aborted.is_empty() {
        Ok(())
    } else {
        Err(Failure::Aborted(aborted.join("; ")))
    }
}

struct Grid {
    ds: f64,
    dl: f64,
    s_min: Option<f64>,
    s_max: Option<f64>,
}

fn field_dump(scenario: &str, out: &Path, grid: Grid) -> Result<(), Failure> {
    let cfg = resolve_scenario(scenario)?;
    let road = &cfg.road;
    if !(grid.ds > 0.0 && grid.dl > 0.0) {
        return Err(Failure::Config(ScenarioError::Invalid {
            path: "field-dump".into(),
            message: "grid steps must be positive".into(),
        }));
    }
    let mut stations = Vec::new();
    let obstacles: Vec<Obstacle> = cfg
        .vehicles
        .iter()
        .map(|v| {
            let f = road.to_frenet(v.position[0], v.position[1]);
            stations.push(f.station);
            (v, f)
        })
        .filter(|(v, _)| v.role != lanegame::Role::EC)
        .map(|(v, f)| Obstacle { x: v.position[0], y: v.position[1], heading: road.heading_at(f.station), speed: v.speed })
        .collect();
    let lo = stations.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = stations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s_min = grid.s_min.unwrap_or(lo - 30.0).max(0.0);
    let s_max = grid.s_max.unwrap_or(hi + 60.0).min(road.length);
    let mut w = create(out)?;
    let mut write = || -> io::Result<usize> {
        writeln!(w, "station,offset,x,y,field")?;
        let mut n = 0;
        let ns = ((s_max - s_min) / grid.ds + 1e-9).floor() as usize;
        for i in 0..=ns {
            let s = s_min + i as f64 * grid.ds;
            let (right, left) = road.lateral_extent(s);
            let nl = ((left - right + 2.0) / grid.dl + 1e-9).floor() as usize;
            for j in 0..=nl {
                let l = right - 1.0 + j as f64 * grid.dl;
                let (x, y) = road.to_global(s, l);
                let v = total_field(x, y, &obstacles, road, &cfg.field).map_err(|e| io::Error::other(e.to_string()))?;
                writeln!(w, "{s},{l},{x},{y},{v}")?;
                n += 1;
            }
        }
        w.flush()?;
        Ok(n)
    };
    let n = write().with_context(|| format!("writing {}", out.display()))?;
    println!("{n} samples written to {}", out.display());
    Ok(())
}

fn validate(scenario: &str) -> Result<(), Failure> {
    let cfg = resolve_scenario(scenario)?;
    let roles: Vec<String> = cfg.vehicles.iter().map(|v| v.role.to_string()).collect();
    println!(
        "ok: {} ({} lanes, {} vehicles: {}, {} s at dt {} s)",
        if cfg.name.is_empty() { scenario } else { &cfg.name },
        cfg.road.lane_count,
        roles.len(),
        roles.join(" "),
        cfg.duration,
        cfg.dt
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            // value errors come without usage text; add it so every flag error shows one
            let msg = e.render().to_string();
            eprint!("{msg}");
            if !msg.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Run { scenario, style, strategy, out } => run(&scenario, style, strategy, &out),
        Command::Batch { scenario, out, trace_dir } => batch(&scenario, out.as_deref(), trace_dir.as_deref()),
        Command::FieldDump { scenario, out, ds, dl, s_min, s_max } => field_dump(&scenario, &out, Grid { ds, dl, s_min, s_max }),
        Command::Validate { scenario } => validate(&scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
