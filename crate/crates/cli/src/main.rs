use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nslimit::diagnostics::Mode;
use nslimit::exec::{configure_threads, Execution};
use nslimit::harness::suites::{corrector_suite, tensor_suite, thermo_suite, SuiteReport};
use nslimit::harness::{render_report, run_case, run_sweep, CaseSpec, Config, SweepResult};
use nslimit::layer::{write_scalings_csv, CutoffProfile};

#[derive(Parser)]
#[command(
    name = "nslimit",
    version,
    about = "Inviscid-limit laboratory for compressible Navier-Stokes in a channel"
)]
struct Cli {
    /// Worker threads; 1 runs the sequential path, 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single case and write its diagnostics.
    Run(RunArgs),
    /// Run an eps sweep from a TOML configuration.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corrector norm scalings and the plug-flow closed form.
    VerifyCorrector {
        /// Also write the fitted rows to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relative-entropy properties.
    VerifyThermo {
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Stress positivity and coercivity.
    VerifyTensor {
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        /// Random fields in the coercivity estimate.
        #[arg(long, default_value_t = 50)]
        coercivity_trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a sweep.json as a table.
    Report { path: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_mode, default_value = "noslip")]
    mode: Mode,
    #[arg(long)]
    eps: f64,
    /// Wall friction; defaults to sqrt(eps) for navier.
    #[arg(long)]
    beta: Option<f64>,
    /// Initial perturbation size; defaults to sqrt(eps).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Strip constant.
    #[arg(long)]
    c: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    t_final: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    /// Fixed wall-normal stretch instead of the resolution rule.
    #[arg(long)]
    stretch: Option<f64>,
    #[arg(long)]
    reference: Option<String>,
    #[arg(long, value_parser = parse_cutoff)]
    cutoff: Option<CutoffProfile>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "noslip" => Ok(Mode::NoSlip),
        "navier" => Ok(Mode::Navier),
        _ => Err(format!("unknown mode {s:?} (noslip, navier)")),
    }
}

fn parse_cutoff(s: &str) -> Result<CutoffProfile, String> {
    CutoffProfile::from_name(s).map_err(|e| e.to_string())
}

fn case_spec(a: &RunArgs) -> CaseSpec {
    let mut cfg = Config::new(a.mode);
    if let Some(v) = a.gamma {
        cfg.gas.gamma = v;
    }
    if let Some(v) = a.mu {
        cfg.viscosity.mu = v;
    }
    if let Some(v) = a.eta {
        cfg.viscosity.eta = v;
    }
    if let Some(v) = a.c {
        cfg.grid.c = v;
    }
    if let Some(v) = a.t_final {
        cfg.sweep.t_final = v;
    }
    if let Some(v) = a.nx {
        cfg.grid.nx = v;
    }
    if let Some(v) = a.ny {
        cfg.grid.ny = v;
    }
    cfg.grid.stretch = a.stretch;
    if let Some(v) = &a.reference {
        cfg.reference.name = v.clone();
    }
    if let Some(v) = a.cutoff {
        cfg.reference.cutoff = v;
    }
    if let Some(v) = a.record_every {
        cfg.sweep.record_every = v;
    }
    let mut spec = CaseSpec::from_config(&cfg, a.eps);
    if let (Some(b), Mode::Navier) = (a.beta, a.mode) {
        spec.beta = b;
    }
    if let Some(d) = a.delta {
        spec.delta = d;
    }
    spec
}

fn cmd_run(a: &RunArgs, exec: Execution) -> Result<ExitCode> {
    if a.beta.is_some() && a.mode == Mode::NoSlip {
        bail!("--beta only applies to --mode navier");
    }
    let spec = case_spec(a);
    let res = run_case(&spec, exec, a.out.as_deref())?;
    let summary = res.case_summary();
    if let Some(dir) = &a.out {
        let f = BufWriter::new(File::create(dir.join("case.json"))?);
        serde_json::to_writer_pretty(f, &serde_json::json!({ "spec": spec, "summary": summary }))?;
    }
    println!(
        "{} eps={:.3e}: {} steps, sup E_rel {:.4e}, Kato {:.4e}, min slack {:.4e}, mass drift {:.2e} ({:.1} s)",
        spec.mode.name(),
        spec.eps,
        summary.steps,
        summary.sup_relative_energy,
        summary.kato_functional_cum,
        summary.min_inequality_residual,
        summary.max_mass_drift,
        res.elapsed.as_secs_f64()
    );
    Ok(match res.failure {
        None => ExitCode::SUCCESS,
        Some(f) => {
            eprintln!("run aborted: {f}");
            ExitCode::from(1)
        }
    })
}

fn cmd_sweep(config: &Path, out: Option<PathBuf>, exec: Execution) -> Result<ExitCode> {
    let cfg = Config::load(config).with_context(|| format!("loading {}", config.display()))?;
    let out = out.or_else(|| cfg.output.dir.clone());
    let result = run_sweep(&cfg, exec, out.as_deref())?;
    print!("{}", render_report(&result));
    if !result.all_ok() {
        return Ok(ExitCode::from(1));
    }
    let code = result.verdict.map_or(0, |v| v.verdict.exit_code());
    Ok(ExitCode::from(code as u8))
}

fn suite_exit(rep: &SuiteReport) -> ExitCode {
    print!("{}", rep.render());
    if rep.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let exec = configure_threads(cli.threads);
    match cli.command {
        Command::Run(a) => cmd_run(&a, exec),
        Command::Sweep { config, out } => cmd_sweep(&config, out, exec),
        Command::VerifyCorrector { out } => {
            let (rep, rows) = corrector_suite(exec)?;
            if let Some(p) = out {
                write_scalings_csv(&rows, BufWriter::new(File::create(&p)?))?;
            }
            Ok(suite_exit(&rep))
        }
        Command::VerifyThermo { trials, seed } => Ok(suite_exit(&thermo_suite(trials, seed)?)),
        Command::VerifyTensor {
            trials,
            coercivity_trials,
            seed,
        } => Ok(suite_exit(&tensor_suite(
            trials,
            coercivity_trials,
            seed,
            exec,
        )?)),
        Command::Report { path } => {
            let result =
                SweepResult::load(&path).with_context(|| format!("reading {}", path.display()))?;
            print!("{}", render_report(&result));
            Ok(ExitCode::SUCCESS)
        }
    }
}
