use clap::{Args, Parser, Subcommand};
use diskfem::error::Error;
use diskfem::experiments::{emit, parse_np_list, run, ExperimentConfig, ExperimentOutput, Format};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "diskfem", version, about = "hp-FEM model problems on disks, annuli and cylinders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Piecewise-constant Helmholtz coefficient with a manufactured plane-wave solution.
    PlaneWave(Common),
    /// Indefinite Helmholtz with discontinuous data; self-convergence.
    HighFrequency(Common),
    /// Crank–Nicolson for the harmonic oscillator.
    Schrodinger(Common),
    /// Mode-coupled operator on an annulus.
    Anisotropic(Common),
    /// Point singularity r^{-3/2}: single cell vs graded meshes.
    SingularSource(Common),
    /// Cylinder via ADI.
    Cylinder(Common),
    /// Convergence tables only, for any experiment.
    Convergence {
        #[arg(long)]
        experiment: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Comma list of breakpoints, `uniform:{n}`, `geometric:{ratio,n}` or `graded:{N}`.
    #[arg(long)]
    mesh: Option<String>,
    /// N_p values: comma list or `a..b:step`.
    #[arg(long)]
    np: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    /// Full-size parameters (slow).
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra numeric parameter, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn build(name: &str, c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let mut cfg = ExperimentConfig::from_key_values(&format!("experiment={name}\n{text}"))?;
            cfg.experiment = name.to_string();
            cfg
        }
        None => ExperimentConfig::new(name)?,
    };
    if let Some(m) = &c.mesh {
        cfg.mesh = Some(m.clone());
    }
    if let Some(np) = &c.np {
        cfg.np = parse_np_list(np)?;
    }
    if let Some(e) = c.epsilon {
        cfg.epsilon = e;
    }
    if let Some(t) = c.theta {
        cfg.theta = t;
    }
    cfg.out = c.out.clone();
    cfg.format = c.format.parse()?;
    cfg.paper_scale |= c.paper_scale;
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects key=value, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Error> {
    let (cfg, tables_only) = match &cli.command {
        Command::PlaneWave(c) => (build("plane-wave", c)?, false),
        Command::HighFrequency(c) => (build("high-frequency", c)?, false),
        Command::Schrodinger(c) => (build("schrodinger", c)?, false),
        Command::Anisotropic(c) => (build("anisotropic", c)?, false),
        Command::SingularSource(c) => (build("singular-source", c)?, false),
        Command::Cylinder(c) => (build("cylinder", c)?, false),
        Command::Convergence { experiment, common } => (build(experiment, common)?, true),
    };
    let mut output = run(&cfg)?;
    if tables_only {
        output = ExperimentOutput { name: output.name, convergence: output.convergence, time_steps: output.time_steps, metrics: output.metrics, ..Default::default() };
    }
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    for (study, rows) in &output.convergence {
        for r in rows {
            eprintln!("{study}: np={} dofs={} linf_error={:.3e} wall_ms={:.1}", r.np, r.dofs, r.linf_error, r.wall_ms);
        }
    }
    let files = emit(&output, cfg.format, &cfg.out)?;
    for f in files {
        println!("{}", f.display());
    }
    if cfg.format == Format::Json {
        eprintln!("metrics: {}", serde_json::to_string(&output.metrics).unwrap_or_default());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
