use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use smoothfwd::experiment::{
    aggregate, convergence_csv, default_sqrt_ratios, extrapolate, fig3_patterns, loo_csv, loo_summary_csv, run_loo,
    run_scenario, CurveReport, DayOptions, Extrapolation, LooConfig, MarketData, ScenarioOutcome, ScenarioSpec,
    SpreadSpec, CONVERGENCE_HEADER, DEFAULT_SPREADS,
};
use smoothfwd::market::DEFAULT_NOMINAL;
use smoothfwd::{CalendarDate, SmoothnessWeights, SolverParams, Termination};

#[derive(Parser)]
#[command(name = "smoothfwd", version, about = "Fit smooth positive forward-rate curves to coupon-bond quotes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one curve and write curve.csv and report.json.
    BuildCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_date)]
        date: CalendarDate,
        /// Extend the exported curve by this many stages past the last payment.
        #[arg(long)]
        extend: Option<usize>,
    },
    /// Leave-one-out prediction sweep; writes loo.csv and loo_summary.csv.
    Loo {
        #[command(flatten)]
        common: Common,
        /// Dates to include (repeatable); all quote dates when omitted.
        #[arg(long, value_parser = parse_date)]
        date: Vec<CalendarDate>,
        /// sqrt(gamma/phi) grid points (repeatable, `inf` allowed).
        #[arg(long = "sqrt-ratio", value_parser = parse_ratio)]
        sqrt_ratio: Vec<f64>,
        /// Uniform spreads to sweep (repeatable).
        #[arg(long = "sweep-spread")]
        sweep_spread: Vec<f64>,
        /// Only leave out these bonds (repeatable).
        #[arg(long = "leave-out")]
        leave_out: Vec<String>,
    },
    /// Objective value per Newton iteration for each date; writes convergence.csv.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_date)]
        date: Vec<CalendarDate>,
    },
    /// Named spread patterns on one date; writes one directory per pattern.
    Scenario {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_date)]
        date: CalendarDate,
        /// Patterns to run (repeatable): a = all pinned, b = 5% with two pinned, c = 1%.
        #[arg(long, value_enum)]
        pattern: Vec<Pattern>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Pattern {
    A,
    B,
    C,
}

#[derive(Clone, Copy, ValueEnum)]
enum Basis {
    #[value(name = "365")]
    Act365,
    #[value(name = "360")]
    Act360,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtrapolationArg {
    Constant,
    W,
}

impl From<ExtrapolationArg> for Extrapolation {
    fn from(a: ExtrapolationArg) -> Self {
        match a {
            ExtrapolationArg::Constant => Extrapolation::Constant,
            ExtrapolationArg::W => Extrapolation::WGenerated,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Bond table (id,maturity,coupon_pct); bundled sample when omitted.
    #[arg(long)]
    bonds: Option<PathBuf>,
    /// Quote table (date,bond_id,rate_pct); bundled sample when omitted.
    #[arg(long)]
    quotes: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_NOMINAL)]
    nominal: f64,
    /// First-difference weight (year^3).
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Second-difference weight (year^5).
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    /// Width of every bond's log-price interval.
    #[arg(long, default_value_t = 0.01)]
    spread: f64,
    /// Per-bond spread, as BOND=VALUE (repeatable).
    #[arg(long = "spread-override", value_parser = parse_override)]
    spread_override: Vec<(String, f64)>,
    #[arg(long)]
    no_positivity: bool,
    /// Tail extension for the longest bond or the exported curve.
    #[arg(long, value_enum)]
    extrapolation: Option<ExtrapolationArg>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Solver parameters as TOML; unspecified keys keep their defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Always damp the step to beta times the boundary ratio.
    #[arg(long)]
    strict_paper_step: bool,
    #[arg(long, value_enum, default_value = "365")]
    day_year_basis: Basis,
    /// Business days between quote date and settlement.
    #[arg(long, default_value_t = 0)]
    settlement_lag: u32,
}

impl Common {
    fn data(&self) -> Result<MarketData> {
        Ok(match (&self.bonds, &self.quotes) {
            (None, None) if self.nominal == DEFAULT_NOMINAL => MarketData::sample(),
            (None, None) => MarketData::from_texts(
                smoothfwd::experiment::SAMPLE_BONDS_CSV,
                smoothfwd::experiment::SAMPLE_QUOTES_CSV,
                self.nominal,
            )?,
            (Some(b), Some(q)) => MarketData::load(b, q, self.nominal)?,
            _ => bail!("--bonds and --quotes must be given together"),
        })
    }

    fn params(&self) -> Result<SolverParams> {
        let mut p = match &self.params {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                SolverParams::from_toml_str(&text)?
            }
            None => SolverParams::default(),
        };
        if self.strict_paper_step {
            p.strict_paper_step = true;
        }
        if self.no_positivity {
            p.positivity_enabled = false;
        }
        p.validate()?;
        Ok(p)
    }

    fn spreads(&self) -> SpreadSpec {
        self.spread_override
            .iter()
            .fold(SpreadSpec::uniform(self.spread), |s, (id, v)| s.with_override(id, *v))
    }

    fn weights(&self) -> Result<SmoothnessWeights<f64>> {
        Ok(SmoothnessWeights::new(self.gamma, self.phi)?)
    }

    fn day_options(&self) -> Result<DayOptions> {
        Ok(DayOptions {
            weights: self.weights()?,
            positivity: !self.no_positivity,
            days_per_year: match self.day_year_basis {
                Basis::Act365 => 365.0,
                Basis::Act360 => 360.0,
            },
            settlement_lag: self.settlement_lag,
            ..DayOptions::default()
        })
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn parse_date(s: &str) -> Result<CalendarDate, String> {
    CalendarDate::parse_any(s).map_err(|e| e.to_string())
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| e.to_string()),
    }
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (id, v) = s.rsplit_once('=').ok_or_else(|| format!("expected BOND=VALUE, got {s:?}"))?;
    let v = v.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?;
    Ok((id.trim().to_string(), v))
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes curve.csv and report.json for one solved scenario into `dir`.
fn export(dir: &Path, date: CalendarDate, out: &ScenarioOutcome, common: &Common, extend: Option<usize>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut curve = out.solution.curve.clone();
    if let Some(extra) = extend.filter(|&k| k > 0) {
        let mode = common.extrapolation.map(Extrapolation::from).unwrap_or(Extrapolation::WGenerated);
        let target = curve.n() + extra;
        curve = extrapolate(&curve, &out.day.problem, mode, target, &common.params()?)?;
    }
    write(dir.join("curve.csv"), &curve.to_csv())?;
    write(dir.join("report.json"), &CurveReport::new(date, &out.day, &out.solution)?.to_json())
}

fn summary(label: &str, out: &ScenarioOutcome) {
    let r = &out.solution.report;
    println!(
        "{label}: {} after {} iterations, W = {:.6e}, eps = {:.1e}, min f = {:.6}",
        serde_json::to_value(r.termination).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        r.iterations,
        r.w,
        r.eps,
        out.solution.curve.min()
    );
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::BuildCurve { common, date, extend } => {
            let data = common.data()?;
            let spec = ScenarioSpec::new(date, common.weights()?, common.spreads(), !common.no_positivity);
            let out = run_scenario(&data, &spec, &common.day_options()?, &common.params()?)?;
            export(common.out_dir()?, date, &out, &common, extend)?;
            summary(&date.to_string(), &out);
            if out.solution.report.termination == Termination::MaxIterations {
                eprintln!("iteration limit reached before the termination test passed");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Scenario { common, date, pattern } => {
            let data = common.data()?;
            let patterns = fig3_patterns();
            let chosen: Vec<_> = if pattern.is_empty() {
                patterns
            } else {
                pattern
                    .iter()
                    .map(|p| patterns[match p {
                        Pattern::A => 0,
                        Pattern::B => 1,
                        Pattern::C => 2,
                    }]
                    .clone())
                    .collect()
            };
            let dir = common.out_dir()?.to_path_buf();
            for pat in chosen {
                let spec = ScenarioSpec::new(date, common.weights()?, pat.spreads.clone(), !common.no_positivity);
                let out = run_scenario(&data, &spec, &common.day_options()?, &common.params()?)?;
                export(&dir.join(pat.name), date, &out, &common, None)?;
                summary(pat.name, &out);
            }
        }
        Command::Convergence { common, date } => {
            let data = common.data()?;
            let dates = if date.is_empty() { data.dates() } else { date };
            let mut csv = format!("{CONVERGENCE_HEADER}\n");
            for d in dates {
                let spec = ScenarioSpec::new(d, common.weights()?, common.spreads(), !common.no_positivity);
                let out = run_scenario(&data, &spec, &common.day_options()?, &common.params()?)?;
                csv.push_str(&convergence_csv(d, &out.solution.report, false));
                summary(&d.to_string(), &out);
            }
            write(common.out_dir()?.join("convergence.csv"), &csv)?;
        }
        Command::Loo { common, date, sqrt_ratio, sweep_spread, leave_out } => {
            let data = common.data()?;
            let mut cfg = LooConfig::new(if date.is_empty() { data.dates() } else { date });
            cfg.sqrt_ratios = if sqrt_ratio.is_empty() { default_sqrt_ratios() } else { sqrt_ratio };
            cfg.spreads = if sweep_spread.is_empty() { DEFAULT_SPREADS.to_vec() } else { sweep_spread };
            if let Some(mode) = common.extrapolation {
                cfg.extrapolations = vec![mode.into()];
            }
            if !leave_out.is_empty() {
                cfg.bonds = Some(leave_out);
            }
            cfg.opts = common.day_options()?;
            cfg.params = common.params()?;
            let rows = run_loo(&data, &cfg);
            let dir = common.out_dir()?;
            write(dir.join("loo.csv"), &loo_csv(&rows))?;
            write(dir.join("loo_summary.csv"), &loo_summary_csv(&aggregate(&rows)))?;
            let failed = rows.iter().filter(|r| !r.is_solved()).count();
            println!("{} cells, {failed} not solved", rows.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
