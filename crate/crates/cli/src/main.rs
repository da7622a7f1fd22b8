use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sphereflow::config::{demo_config, RunConfig, VfeRoute};
use sphereflow::lift::BranchPolicy;
use sphereflow::nls::NlsScheme;
use sphereflow::pipeline::{export_run, run_pipeline, RunArtifacts, Stage};
use sphereflow::{Error, Result};

#[derive(Parser)]
#[command(name = "sphereflow", version, about = "Schrödinger flow of closed curves on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lift the initial curve and export its frame data at t = 0.
    Lift(RunArgs),
    /// Evolve the curve and export snapshots and diagnostics.
    Solve(RunArgs),
    /// Evolve, then apply a Bäcklund transformation.
    Backlund {
        #[command(flatten)]
        run: RunArgs,
        /// Pole as "re,im".
        #[arg(long, value_parser = parse_pair)]
        alpha: Option<[f64; 2]>,
        /// Line vector as "re0,im0,re1,im1".
        #[arg(long, value_parser = parse_quad)]
        line: Option<[[f64; 2]; 2]>,
    },
    /// Build a vortex filament from the flow or from a filament seed.
    Vfe {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_parser = ["flow", "sym"])]
        route: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Evolve and print the diagnostics table.
    Diagnose(RunArgs),
    /// Run a named preset.
    Demo {
        name: String,
        #[arg(long, env = "SPHEREFLOW_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Library curve name or sample file.
    #[arg(long)]
    curve: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    #[arg(long)]
    snapshots: Option<usize>,
    #[arg(long = "output-from")]
    output_from: Option<f64>,
    #[arg(long, value_parser = ["split_step", "implicit_spectral"])]
    scheme: Option<String>,
    #[arg(long, value_parser = ["projective", "alternate"])]
    branch: Option<String>,
    #[arg(long = "tol-fp")]
    tol_fp: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long)]
    dealias: bool,
    /// Output directory.
    #[arg(long, env = "SPHEREFLOW_OUT")]
    out: Option<PathBuf>,
    /// Record wall-clock time in the manifest.
    #[arg(long = "wall-clock")]
    wall_clock: bool,
}

fn parse_floats<const K: usize>(s: &str) -> std::result::Result<[f64; K], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {K} comma-separated numbers, got {}", v.len()))
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    parse_floats::<2>(s)
}

fn parse_quad(s: &str) -> std::result::Result<[[f64; 2]; 2], String> {
    let v = parse_floats::<4>(s)?;
    Ok([[v[0], v[1]], [v[2], v[3]]])
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_toml_str(&std::fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.curve {
            cfg.curve = v.clone();
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.t_final {
            cfg.t_final = v;
        }
        if let Some(v) = self.snapshots {
            cfg.snapshots = v;
        }
        if let Some(v) = self.output_from {
            cfg.output_from = v;
        }
        if let Some(v) = &self.scheme {
            cfg.scheme = if v == "implicit_spectral" { NlsScheme::ImplicitSpectral } else { NlsScheme::SplitStep };
        }
        if let Some(v) = &self.branch {
            cfg.branch = if v == "alternate" { BranchPolicy::Alternate } else { BranchPolicy::Projective };
        }
        if let Some(v) = self.tol_fp {
            cfg.tol_fp = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if self.dealias {
            cfg.dealias = true;
        }
        if let Some(v) = &self.out {
            cfg.output = v.clone();
        }
        if self.wall_clock {
            cfg.deterministic = false;
        }
        Ok(cfg)
    }
}

fn summary(art: &RunArtifacts) {
    let r = &art.report;
    println!("curve            {}", art.source.name);
    println!("c0               {:.12}", art.c0);
    println!("branch sign      {}", art.branch_sign);
    println!("snapshots        {}", art.curves.len());
    println!("energy drift     {:.3e}", r.max_energy_drift());
    println!("mass drift       {:.3e}", r.max_h1_drift());
    if let Some(e) = &r.error {
        println!("sup error        {:.3e}", e.global_sup);
    }
    if let Some(p) = r.pde_residual {
        println!("pde residual     {p:.3e}");
    }
    if let Some(bt) = &art.backlund {
        println!("bt sphere dev    {:.3e}", bt.sphere_deviation);
        println!("bt nls residual  {:.3e}", bt.nls_residual);
    }
    if let Some(v) = &art.vfe {
        for w in &v.warnings {
            eprintln!("warning: NonClosedWarning at t = {}: |mean| = {:.3e}", w.t, w.mean);
        }
    }
    for f in &r.flags {
        eprintln!("warning: {f}");
    }
}

fn table(art: &RunArtifacts) {
    print!("{}", sphereflow::pipeline::diagnostics_csv(art));
}

fn execute(cfg: RunConfig, stage: Stage, print_table: bool) -> Result<()> {
    let art = run_pipeline(&cfg, stage)?;
    export_run(&art, &cfg.output)?;
    if print_table {
        table(&art);
    } else {
        summary(&art);
        println!("output           {}", cfg.output.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lift(a) => execute(a.config()?, Stage::Lift, false),
        Command::Solve(a) => execute(a.config()?, Stage::Full, false),
        Command::Diagnose(a) => execute(a.config()?, Stage::Full, true),
        Command::Backlund { run, alpha, line } => {
            let mut cfg = run.config()?;
            let mut b = cfg.backlund.take().unwrap_or_default();
            if let Some(a) = alpha {
                b.alpha = a;
            }
            if let Some(v) = line {
                b.v = v;
            }
            cfg.backlund = Some(b);
            execute(cfg, Stage::Full, false)
        }
        Command::Vfe { run, route, delta } => {
            let mut cfg = run.config()?;
            let mut v = cfg.vfe.take().unwrap_or_default();
            if let Some(r) = route {
                v.route = if r == "sym" { VfeRoute::Sym } else { VfeRoute::Flow };
            }
            if let Some(d) = delta {
                v.delta = d;
            }
            cfg.vfe = Some(v);
            execute(cfg, Stage::Full, false)
        }
        Command::Demo { name, out } => {
            let mut cfg = demo_config(&name)?;
            if let Some(o) = out {
                cfg.output = o;
            }
            execute(cfg, Stage::Full, false)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
