use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cvbell::config::RunConfig;
use cvbell::figures::fig2_tables;
use cvbell::mc::{acquisition_time, run_protocol};
use cvbell::output::{Cell, Format, Table};
use cvbell::validate::run_validation;
use cvbell::{chsh, optimize_lambda, sweep, BellResult, Error, ExperimentParams, Result};

#[derive(Parser)]
#[command(name = "cvbell", version, about = "CHSH tests with photon-subtracted squeezed light and homodyne detection")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file (a directory for fig2); stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Overrides the Monte Carlo and validation seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, env = "CVBELL_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Correlators, S and heralding probability at one operating point.
    Chsh,
    /// Data for the four panels of the S figure.
    Fig2,
    /// S along one parameter axis.
    Sweep,
    /// Squeezing that maximizes S.
    Optimize,
    /// Monte Carlo run of the event-ready protocol.
    Mc,
    /// Cross-checks between the Gaussian, Fock and Monte Carlo routes.
    Validate,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Validation(_) => 4,
        Error::Io(_) => 5,
        _ => 3,
    }
}

fn load_config(global: &GlobalArgs) -> Result<(RunConfig, Format)> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.mc.seed = seed;
        config.validate.seed = seed;
    }
    if let Some(out) = &global.out {
        config.output.path = Some(out.clone());
    }
    let format = match &global.format {
        Some(f) => f.parse()?,
        None => config.output.format,
    };
    Ok((config, format))
}

fn emit(table: &Table, path: Option<&Path>, format: Format) -> Result<()> {
    match path {
        Some(p) => table.write(p, format),
        None => {
            print!("{}", table.render(format)?);
            Ok(())
        }
    }
}

const CORRELATOR_COLUMNS: [&str; 4] = ["E11", "E12", "E21", "E22"];

fn params_cells(p: &ExperimentParams) -> Vec<Cell> {
    vec![p.lambda.into(), p.transmittance.into(), p.eta.into(), p.eta_bhd.into()]
}

fn bell_cells(r: &BellResult) -> Vec<Cell> {
    let e = r.correlators;
    vec![
        e[0][0].into(),
        e[0][1].into(),
        e[1][0].into(),
        e[1][1].into(),
        r.s.into(),
        r.success_prob.into(),
    ]
}

fn header(prefix: &[&'static str], suffix: &[&'static str]) -> Vec<&'static str> {
    prefix.iter().chain(suffix).copied().collect()
}

fn cmd_chsh(config: &RunConfig, format: Format) -> Result<()> {
    let params = config.experiment_params()?;
    let result = chsh(&params)?;
    let cols = header(&["lambda", "transmittance", "eta", "eta_bhd"], &CORRELATOR_COLUMNS);
    let mut table = Table::new(&header(&cols, &["S", "P"]));
    table.push([params_cells(&params), bell_cells(&result)].concat());
    emit(&table, config.output.path.as_deref(), format)
}

fn cmd_sweep(config: &RunConfig, format: Format) -> Result<()> {
    let (section, fixed) = config.sweep_inputs()?;
    let rows = sweep(section.axis, &section.grid().points(), &fixed);
    let cols = header(&[section.axis.name()], &CORRELATOR_COLUMNS);
    let mut table = Table::new(&header(&cols, &["S", "P", "error"]));
    for row in rows {
        let mut cells = vec![row.value.into()];
        match &row.outcome {
            Ok(r) => {
                cells.extend(bell_cells(r));
                cells.push(Cell::Empty);
            }
            Err(e) => {
                cells.extend(std::iter::repeat_n(Cell::Empty, 6));
                cells.push(e.to_string().into());
            }
        }
        table.push(cells);
    }
    emit(&table, config.output.path.as_deref(), format)
}

fn cmd_optimize(config: &RunConfig, format: Format) -> Result<()> {
    let (t, eta, eta_bhd, angles) = config.optimize_inputs()?;
    let opt = optimize_lambda(t, eta, eta_bhd, angles)?;
    let mut table = Table::new(&["transmittance", "eta", "eta_bhd", "lambda_opt", "lambda_opt_T", "S_max"]);
    table.push(vec![
        t.into(),
        eta.into(),
        eta_bhd.into(),
        opt.lambda.into(),
        (opt.lambda * t).into(),
        opt.s_max.into(),
    ]);
    emit(&table, config.output.path.as_deref(), format)
}

fn cmd_fig2(config: &RunConfig, format: Format) -> Result<()> {
    let tables = fig2_tables(&config.fig2)?;
    let dir = config.output.path.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    for (stem, table) in tables.files() {
        let path = dir.join(format!("{stem}.{format}"));
        table.write(&path, format)?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_mc(config: &RunConfig, format: Format) -> Result<()> {
    let protocol = config.protocol_config()?;
    let expected = chsh(&protocol.params)?;
    let result = run_protocol(&protocol)?;
    let t_acq = acquisition_time(
        expected.success_prob,
        protocol.rep_rate,
        config.mc.target_stderr,
        &expected,
        protocol.angle_choice_probs,
    )
    .ok();
    let mut table = Table::new(&[
        "lambda",
        "transmittance",
        "eta",
        "eta_bhd",
        "seed",
        "events",
        "pulses",
        "sim_time",
        "events_per_second",
        "P_hat",
        "N11",
        "N12",
        "N21",
        "N22",
        "E11",
        "E12",
        "E21",
        "E22",
        "S_hat",
        "stderr_S",
        "S_closed",
        "acquisition_time",
    ]);
    let mut cells = params_cells(&protocol.params);
    cells.push(Cell::Int(protocol.seed as i64));
    cells.push(Cell::Int(result.events as i64));
    cells.push(Cell::Int(result.pulses as i64));
    cells.extend([
        result.wall_sim_time.into(),
        result.events_per_second().into(),
        result.p_hat.into(),
    ]);
    let counts = result.correlator_counts.iter().flatten();
    cells.extend(counts.clone().map(|t| Cell::Int(t.events as i64)));
    cells.extend(counts.map(|t| Cell::from(t.estimate())));
    cells.extend([
        Cell::from(result.s_hat),
        Cell::from(result.stderr_s),
        expected.s.into(),
        Cell::from(t_acq),
    ]);
    table.push(cells);
    emit(&table, config.output.path.as_deref(), format)
}

fn cmd_validate(config: &RunConfig, format: Format) -> Result<()> {
    let report = run_validation(&config.validate, config.n_trunc())?;
    emit(&report.to_table(), config.output.path.as_deref(), format)?;
    let failures = report.failures();
    if failures.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failures.iter().map(|c| c.name.as_str()).collect();
        Err(Error::Validation(names.join(", ")))
    }
}

fn run(cli: Cli) -> Result<()> {
    let (config, format) = load_config(&cli.global)?;
    if let Some(threads) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Chsh => cmd_chsh(&config, format),
        Command::Fig2 => cmd_fig2(&config, format),
        Command::Sweep => cmd_sweep(&config, format),
        Command::Optimize => cmd_optimize(&config, format),
        Command::Mc => cmd_mc(&config, format),
        Command::Validate => cmd_validate(&config, format),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cvbell: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
