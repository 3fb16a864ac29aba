use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ncleaf::config::Config;
use ncleaf::nc_torus::{default_smoothing, powers_rieffel_projection};
use ncleaf::periods::{build_lift, LiftResult, PeriodGroup, GOLDEN};
use ncleaf::suites::{run_suite, Suite};
use ncleaf::torus::{orbit_density_horizon, orbit_distance_field};

const PROJECTION_RESIDUAL_BOUND: f64 = 1e-3;
const ORBIT_GRID: usize = 200;

#[derive(Parser, Debug)]
#[command(name = "ncleaf", version, about = "Period analysis and verification suites for the irrational rotation groupoid")]
struct Cli {
    /// Numeric rotation number.
    #[arg(long, global = true, conflicts_with = "lambda_preset")]
    lambda: Option<f64>,
    #[arg(long, global = true, value_enum)]
    lambda_preset: Option<Preset>,
    /// Fourier modes per torus direction (projection: bandlimit of the main row).
    #[arg(long, global = true)]
    bandlimit: Option<i32>,
    /// Gauss-Legendre points per time panel.
    #[arg(long, global = true)]
    quad_order: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Multiplies every tolerance.
    #[arg(long, global = true, default_value_t = 1.0, alias = "tolerance")]
    tolerance_scale: f64,
    /// Also write the report to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit JSON records instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Golden,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Discreteness verdict and lift of a period group read from a JSON file.
    QuantizeCheck { file: PathBuf },
    /// Runs a verification suite; one JSON line per check.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
    },
    /// Builds the Powers-Rieffel projection and sweeps bandlimits.
    Projection,
    /// Orbit density horizon for a given δ and its grid verification.
    Orbit {
        #[arg(long, allow_hyphen_values = true)]
        delta: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Algebra,
    Groupoid,
    Diffeology,
    Phi,
    Density,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Algebra => Suite::Algebra,
            SuiteArg::Groupoid => Suite::Groupoid,
            SuiteArg::Diffeology => Suite::Diffeology,
            SuiteArg::Phi => Suite::Phi,
            SuiteArg::Density => Suite::Density,
            SuiteArg::All => Suite::All,
        }
    }
}

struct Outcome {
    lines: Vec<String>,
    code: u8,
}

fn usage_error(msg: impl std::fmt::Display) -> Outcome {
    Outcome { lines: vec![format!("error: {msg}")], code: 2 }
}

fn config_from(cli: &Cli) -> Config {
    let mut cfg = Config::default();
    cfg.lambda = match (cli.lambda, cli.lambda_preset) {
        (Some(l), _) => l,
        (None, Some(Preset::Golden)) | (None, None) => GOLDEN,
    };
    if let Some(b) = cli.bandlimit {
        cfg.bandlimit = b;
    }
    if let Some(k) = cli.quad_order {
        cfg.quad = cfg.quad.with_order(k);
    }
    cfg.seed = cli.seed;
    cfg.tolerance_scale = cli.tolerance_scale;
    cfg
}

fn describe_lift(lift: &LiftResult) -> String {
    if lift.torus_dimension == 0 {
        return "discrete; trivial".into();
    }
    if let Some(g) = &lift.cyclic_generator {
        return format!("discrete; circle case; generator {g}");
    }
    let basis = lift.lattice_basis.as_deref().unwrap_or_default();
    let standard = basis.len() == 2
        && basis.iter().enumerate().all(|(i, v)| v.iter().enumerate().all(|(j, x)| x.to_string() == if i == j { "1" } else { "0" }));
    let lattice = if standard {
        "ℤ×λℤ".to_string()
    } else {
        basis.iter().map(|[a, b]| format!("({a}, {b})")).collect::<Vec<_>>().join(" ")
    };
    format!("dense; lift: torus dimension {}; lattice {lattice}", lift.torus_dimension)
}

fn quantize_check(cli: &Cli, cfg: &Config, file: &PathBuf) -> Outcome {
    let text = match fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => return usage_error(format!("{}: {e}", file.display())),
    };
    let group = match PeriodGroup::from_json(&text, cfg.lambda) {
        Ok(g) => g,
        Err(e) => return usage_error(e),
    };
    let lift = build_lift(&group);
    let lines = if cli.json {
        vec![json!({"verdict": describe_lift(&lift), "lift": lift, "config": cfg}).to_string()]
    } else {
        let s = &lift.sequence_description;
        vec![describe_lift(&lift), format!("sequence: 0 -> {} -> {} -> {} -> 0", s.kernel, s.middle, s.quotient)]
    };
    Outcome { lines, code: 0 }
}

fn verify(cfg: &Config, suite: Suite) -> Outcome {
    let reports = run_suite(suite, cfg);
    let code = if reports.iter().all(|r| r.passed()) { 0 } else { 1 };
    Outcome { lines: reports.iter().map(|r| r.to_json()).collect(), code }
}

fn projection(cli: &Cli, cfg: &Config) -> Outcome {
    let main = cli.bandlimit.map_or(48, |b| b.max(1) as usize);
    let mut sweep: Vec<usize> = vec![16, 32, 48];
    if !sweep.contains(&main) {
        sweep.push(main);
        sweep.sort_unstable();
    }
    let smoothing = default_smoothing(cfg.lambda);
    let mut rows = Vec::new();
    for b in &sweep {
        match powers_rieffel_projection(cfg.lambda, smoothing, *b, f64::INFINITY) {
            Ok(p) => rows.push(p),
            Err(e) => return usage_error(e),
        }
    }
    let chosen = rows.iter().find(|p| p.bandlimit == main).expect("main bandlimit is in the sweep");
    let bound = PROJECTION_RESIDUAL_BOUND * cfg.tolerance_scale;
    let code = if chosen.residual <= bound { 0 } else { 1 };
    let lines = if cli.json {
        let sweep: Vec<_> = rows.iter().map(|p| json!({"bandlimit": p.bandlimit, "residual": p.residual, "trace": p.trace})).collect();
        vec![json!({
            "lambda": cfg.lambda,
            "bandlimit": main,
            "trace": chosen.trace,
            "residual": chosen.residual,
            "residual_bound": bound,
            "sweep": sweep,
            "config": cfg,
        })
        .to_string()]
    } else {
        let mut lines = vec![
            format!("lambda     {:.16}", cfg.lambda),
            format!("bandlimit  {main}"),
            format!("trace      {:.16}", chosen.trace),
            format!("residual   {:.6e} (bound {bound:.1e})", chosen.residual),
            "bandlimit  residual        |trace - lambda|".into(),
        ];
        lines.extend(rows.iter().map(|p| format!("{:>9}  {:.6e}  {:.3e}", p.bandlimit, p.residual, (p.trace - cfg.lambda).abs())));
        lines
    };
    Outcome { lines, code }
}

fn orbit(cli: &Cli, cfg: &Config, delta: f64) -> Outcome {
    let horizon = match orbit_density_horizon(delta, cfg.lambda) {
        Ok(t) => t,
        Err(e) => return usage_error(e),
    };
    let max_distance = orbit_distance_field(horizon, ORBIT_GRID, cfg.lambda);
    let code = if max_distance <= delta { 0 } else { 1 };
    let lines = if cli.json {
        vec![json!({"delta": delta, "horizon": horizon, "max_distance": max_distance, "grid": ORBIT_GRID, "config": cfg}).to_string()]
    } else {
        vec![format!("horizon T = {horizon}"), format!("max distance on {ORBIT_GRID}x{ORBIT_GRID} grid = {max_distance:.6e} (delta {delta})")]
    };
    Outcome { lines, code }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = config_from(&cli);
    if !(cfg.lambda > 0.0 && cfg.lambda < 1.0) {
        eprintln!("error: --lambda must lie in (0, 1)");
        return ExitCode::from(2);
    }
    let outcome = match &cli.command {
        Command::QuantizeCheck { file } => quantize_check(&cli, &cfg, file),
        Command::Verify { suite } => verify(&cfg, (*suite).into()),
        Command::Projection => projection(&cli, &cfg),
        Command::Orbit { delta } => orbit(&cli, &cfg, *delta),
    };
    let text: String = outcome.lines.iter().map(|l| format!("{l}\n")).collect();
    if outcome.code == 2 {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
    if let Some(path) = &cli.out {
        if let Err(e) = fs::File::create(path).and_then(|mut f| f.write_all(text.as_bytes())) {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    ExitCode::from(outcome.code)
}
