mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kakinuma::diagnostics::report;
use kakinuma::elliptic::Model;
use kakinuma::evolution::{simulate, Initial, Sample, Scheme, SimConfig};
use kakinuma::lintheory::{convergence_order_scan, dispersion_table, Dispersion};
use kakinuma::stability::StabilityContext;
use kakinuma::{field, selftest, CanonicalState, Config, Error, Result, State};

use io::{fmt, Run, StateFile};

#[derive(Parser)]
#[command(name = "kakinuma", version, about = "Two-layer interfacial wave model on a periodic domain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration; the built-in default is used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct Wave {
    /// mode number of the generated linear wave
    #[arg(long, default_value_t = 1)]
    wave_mode: u32,
    /// interface amplitude of the generated wave; defaults to 0.01·h1
    #[arg(long)]
    wave_amplitude: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Phase-speed table and accuracy-order scan
    Dispersion {
        #[command(flatten)]
        common: Common,
        /// largest wavenumber in the table; defaults to the grid's largest resolved wavenumber
        #[arg(long)]
        xi_max: Option<f64>,
        /// number of table rows
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Compatibility-consistent initial data from canonical variables
    Prepare {
        #[command(flatten)]
        common: Common,
        /// canonical state CSV (x, zeta, phi); a linear wave is generated when omitted
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        wave: Wave,
    },
    /// Time integration with diagnostics
    Simulate {
        #[command(flatten)]
        common: Common,
        /// state CSV, canonical (x, zeta, phi) or full (x, zeta, phi1_*, phi2_*)
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "canonical")]
        scheme: Scheme,
        /// direct scheme: re-solve the compatibility conditions every n steps (0 = never)
        #[arg(long, default_value_t = 0)]
        reproject_every: usize,
        #[command(flatten)]
        wave: Wave,
    },
    /// Diagnostics of a state file or a directory of snapshots
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long, required_unless_present = "series")]
        state: Option<PathBuf>,
        /// also write stability.csv with (x, a, margin)
        #[arg(long)]
        stability: bool,
        /// directory of state_*.csv snapshots; writes series.csv
        #[arg(long, conflicts_with = "state")]
        series: Option<PathBuf>,
    },
    /// Invariant suite; exits 4 on any failure
    Selftest {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Lib(Error),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParams(_) => 1,
        Error::NonCavitation { .. } | Error::StabilityViolated { .. } => 3,
        _ => 2,
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::from_path(p),
        None => Ok(Config::default()),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("KAKINUMA_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("KAKINUMA_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))
}

fn linear_wave(cfg: &Config, wave: &Wave) -> Result<CanonicalState> {
    let grid = cfg.grid()?;
    let params = cfg.model_params()?;
    if wave.wave_mode == 0 || 2 * wave.wave_mode as usize >= grid.points {
        return Err(Error::Config(format!("wave mode {} is not resolved on {} points", wave.wave_mode, grid.points)));
    }
    let amp = wave.wave_amplitude.unwrap_or(0.01 * cfg.h1);
    let k = grid.wavenumber(wave.wave_mode as i64);
    let c = Dispersion::new(&params).c_k2(k).sqrt();
    let b = (params.rho2 - params.rho1) * params.grav * amp / (k * c);
    Ok(CanonicalState { zeta: grid.sample(|x| amp * (k * x).cos()), phi: grid.sample(|x| b * (k * x).sin()) })
}

fn dispersion(common: &Common, xi_max: Option<f64>, points: usize) -> std::result::Result<(), Failure> {
    let cfg = load_config(common.config.as_deref())?;
    let params = cfg.model_params()?;
    let grid = cfg.grid()?;
    if points < 2 {
        return Err(Error::Config("--points must be at least 2".into()).into());
    }
    let xi_max = xi_max.unwrap_or(grid.wavenumber(grid.points as i64 / 2 - 1));
    if !(xi_max.is_finite() && xi_max > 0.0) {
        return Err(Error::Config(format!("--xi-max must be positive, got {xi_max}")).into());
    }
    let run = Run::start("dispersion", common.config.clone(), &cfg, &common.out, &[])?;
    let xis: Vec<f64> = (1..=points).map(|i| xi_max * i as f64 / points as f64).collect();
    let table = dispersion_table(&params, &xis);
    io::write_csv(
        &common.out.join("dispersion.csv"),
        &["xi", "cK2", "cIW2", "cSW2", "rel_error"].map(String::from),
        table.iter().map(|s| vec![fmt(s.xi), fmt(s.c_k2), fmt(s.c_iw2), fmt(s.c_sw2), fmt(s.rel_error())]),
    )?;
    let h = cfg.h1.min(cfg.h2);
    let note = match convergence_order_scan(&params, 1e-2 / h, 1e-1 / h, 20) {
        Ok(scan) => {
            io::write_csv(
                &common.out.join("order_scan.csv"),
                &["xi", "scale", "error"].map(String::from),
                scan.points.iter().map(|p| vec![fmt(p.xi), fmt(p.scale), fmt(p.error)]),
            )?;
            println!("fitted order {:.4}", scan.slope);
            format!("fitted order {}", fmt(scan.slope))
        }
        Err(e @ Error::DegenerateFit { .. }) => {
            eprintln!("order scan skipped: {e}");
            format!("order scan skipped: {e}")
        }
        Err(e) => return Err(e.into()),
    };
    run.finish(Some(note))?;
    Ok(())
}

fn prepare(common: &Common, input: Option<&Path>, wave: &Wave) -> std::result::Result<(), Failure> {
    let cfg = load_config(common.config.as_deref())?;
    let model = Model::from_config(&cfg)?;
    let p = &model.params;
    let canon = match input {
        Some(path) => match io::read_state(path, model.m(), p.n_upper + 1, p.p_list.len())? {
            StateFile::Canonical(c) => c,
            StateFile::Kakinuma(_) => {
                return Err(Error::Config(format!("{}: prepare expects a canonical state (x, zeta, phi)", path.display())).into())
            }
        },
        None => linear_wave(&cfg, wave)?,
    };
    let inputs: Vec<&Path> = input.into_iter().collect();
    let run = Run::start("prepare", common.config.clone(), &cfg, &common.out, &inputs)?;
    let geo = model.geometry(&canon.zeta)?;
    let (state, sol) = model.prepare_with_geometry(&geo, &canon.phi, None)?;
    io::write_state(&common.out.join("state.csv"), &model.sp.grid().x(), &state)?;
    run.finish(Some(format!("{} solver iterations", sol.iterations)))?;
    Ok(())
}

fn initial_from(model: &Model, cfg: &Config, input: Option<&Path>, wave: &Wave) -> Result<Initial> {
    let p = &model.params;
    Ok(match input {
        Some(path) => match io::read_state(path, model.m(), p.n_upper + 1, p.p_list.len())? {
            StateFile::Canonical(c) => Initial::Canonical(c),
            StateFile::Kakinuma(s) => Initial::Kakinuma(s),
        },
        None => Initial::Canonical(linear_wave(cfg, wave)?),
    })
}

fn simulate_cmd(
    common: &Common,
    input: Option<&Path>,
    scheme: Scheme,
    reproject_every: usize,
    wave: &Wave,
) -> std::result::Result<(), Failure> {
    let cfg = load_config(common.config.as_deref())?;
    let model = Model::from_config(&cfg)?;
    let initial = initial_from(&model, &cfg, input, wave)?;
    let inputs: Vec<&Path> = input.into_iter().collect();
    let run = Run::start("simulate", common.config.clone(), &cfg, &common.out, &inputs)?;
    let sim = SimConfig::from_config(&cfg, scheme, reproject_every);
    let x = model.sp.grid().x();
    let mut write_err: Option<Error> = None;
    let mut observer = |t: f64, st: &State| {
        if write_err.is_none() {
            if let Err(e) = io::write_state(&common.out.join(format!("state_{t:012.6}.csv")), &x, st) {
                write_err = Some(e);
            }
        }
    };
    let res = simulate(&model, initial, &sim, &mut observer)?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    io::write_csv(&common.out.join("series.csv"), &io::report_header(), res.reports.iter().map(io::report_row))?;
    io::write_local_laws(&common.out.join("local_laws.csv"), &res.local_laws)?;
    let note = match &res.abort {
        Some(e) => format!("aborted after {} steps at t = {}: {e}", res.steps, fmt(res.final_time)),
        None => format!("{} steps to t = {}", res.steps, fmt(res.final_time)),
    };
    run.finish(Some(note))?;
    match res.abort {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn kakinuma_state(model: &Model, sf: StateFile) -> Result<State> {
    match sf {
        StateFile::Kakinuma(s) => Ok(s),
        StateFile::Canonical(c) => model.prepare_initial_data(&c),
    }
}

/// Time stamp from `state_<t>.csv`.
fn snapshot_time(path: &Path) -> Option<f64> {
    let name = path.file_name()?.to_str()?;
    name.strip_prefix("state_")?.strip_suffix(".csv")?.parse().ok()
}

fn diagnose(
    common: &Common,
    state: Option<&Path>,
    stability: bool,
    series: Option<&Path>,
) -> std::result::Result<(), Failure> {
    let cfg = load_config(common.config.as_deref())?;
    let model = Model::from_config(&cfg)?;
    let p = &model.params;
    let (n1, n2) = (p.n_upper + 1, p.p_list.len());
    if let Some(dir) = series {
        let mut snaps: Vec<(f64, PathBuf)> = std::fs::read_dir(dir)
            .map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter_map(|p| snapshot_time(&p).map(|t| (t, p)))
            .collect();
        if snaps.is_empty() {
            return Err(Error::Config(format!("{}: no state_*.csv snapshots", dir.display())).into());
        }
        snaps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let inputs: Vec<&Path> = snaps.iter().map(|(_, p)| p.as_path()).collect();
        let run = Run::start("diagnose", common.config.clone(), &cfg, &common.out, &inputs)?;
        let mut rows = Vec::new();
        for (t, path) in &snaps {
            let st = kakinuma_state(&model, io::read_state(path, model.m(), n1, n2)?)?;
            rows.push(io::report_row(&report(&model, &Sample::new(&model, *t, st, cfg.epsilon)?)?));
        }
        io::write_csv(&common.out.join("series.csv"), &io::report_header(), rows)?;
        run.finish(Some(format!("{} snapshots", snaps.len())))?;
        return Ok(());
    }
    let path = state.expect("clap enforces --state or --series");
    let st = kakinuma_state(&model, io::read_state(path, model.m(), n1, n2)?)?;
    let run = Run::start("diagnose", common.config.clone(), &cfg, &common.out, &[path])?;
    let sample = Sample::new(&model, 0.0, st, cfg.epsilon)?;
    let rep = report(&model, &sample)?;
    let header = io::report_header();
    let row = io::report_row(&rep);
    println!("{}", header.join(","));
    println!("{}", row.join(","));
    io::write_csv(&common.out.join("diagnostics.csv"), &header, [row])?;
    if stability {
        let geo = model.geometry(&sample.state.zeta)?;
        let ctx = StabilityContext::new(&geo, &sample.state, &sample.derivs);
        let x = model.sp.grid().x();
        io::write_csv(
            &common.out.join("stability.csv"),
            &["x", "a", "margin"].map(String::from),
            (0..x.len()).map(|n| vec![fmt(x[n]), fmt(ctx.a[n]), fmt(ctx.margin[n])]),
        )?;
        println!("minimum margin {}", fmt(field::min(&ctx.margin)));
    }
    run.finish(None)?;
    Ok(())
}

fn selftest_cmd(config: Option<&Path>) -> std::result::Result<(), Failure> {
    let cfg = load_config(config)?;
    let checks = selftest::run(&cfg)?;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(failed.join(", ")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e));
    }
    let out = match &cli.command {
        Command::Dispersion { common, xi_max, points } => dispersion(common, *xi_max, *points),
        Command::Prepare { common, input, wave } => prepare(common, input.as_deref(), wave),
        Command::Simulate { common, input, scheme, reproject_every, wave } => {
            simulate_cmd(common, input.as_deref(), *scheme, *reproject_every, wave)
        }
        Command::Diagnose { common, state, stability, series } => {
            diagnose(common, state.as_deref(), *stability, series.as_deref())
        }
        Command::Selftest { config } => selftest_cmd(config.as_deref()),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Invariant(names)) => {
            eprintln!("invariant failure: {names}");
            ExitCode::from(4)
        }
    }
}
