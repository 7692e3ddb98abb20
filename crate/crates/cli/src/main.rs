use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aikawa_core::aikawa::{lower_aikawa_threshold, upper_aikawa_threshold, DepthPair, Level, ThresholdParams};
use aikawa_core::assouad::{envelope_csv, lower_codim, ratio_samples_with, upper_codim, SampleParams};
use aikawa_core::fractal::{generate, FractalSpec};
use aikawa_core::hardy::{
    hardy_check, holefill_check, main_theorem_report, mazya_constant, mazya_summary, mazya_trial_sides, nearest_member,
    test_battery, EnergyParams, GridFunction, MainParams,
};
use aikawa_core::measure::doubling_report;
use aikawa_core::sampling;
use aikawa_core::truncation::{admissible_pairs, find_big_piece_ball, truncate, verify_big_piece};
use aikawa_core::{Ball, Error, Geometry, GridSet};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "aikawa", version, about = "Assouad codimensions, Aikawa thresholds and fractional Hardy checks on grid sets")]
struct Cli {
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a test set and write it as a grid file.
    Generate(GenerateArgs),
    /// Lower and upper Assouad codimension estimates.
    Codim(CodimArgs),
    /// Lower Aikawa threshold across a depth pair.
    AikawaLower(ThresholdArgs),
    /// Upper Aikawa threshold across a depth pair.
    AikawaUpper(ThresholdArgs),
    /// Truncate a set to a ball and check the big-piece property.
    Truncate(TruncateArgs),
    /// Maz'ya truncation inequality on random Lipschitz functions.
    Mazya(MazyaArgs),
    /// Holefilling constants for functions vanishing on a truncation.
    Holefill(HolefillArgs),
    /// Local Hardy constant and its drift across a depth pair.
    Hardy(HardyArgs),
    /// Upper threshold against upper codimension, with the Hardy battery.
    VerifyMain(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Args)]
struct OutputArgs {
    /// Output prefix; files are `<prefix>.<command>.json` and `.csv`.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Args)]
struct InputArgs {
    /// Grid file, or a set spec such as `cantor:8` or `union(a;b)`.
    input: String,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    centers: usize,
    #[arg(long, default_value_t = 64)]
    scales: usize,
    /// Diameter used for scale ranges; defaults to diam(E), or the grid side for a single cell.
    #[arg(long)]
    diameter: Option<f64>,
}

#[derive(Args)]
struct PairArgs {
    /// Consecutive depths `k k+1`.
    #[arg(long, num_args = 2, value_names = ["K", "K1"])]
    depth_pair: Option<Vec<u32>>,
    /// Coarsening factor that turns a grid file into the coarser level.
    #[arg(long, default_value_t = 3)]
    factor: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Cantor,
    Carpet,
    Hyperplane,
    Point,
    Full,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, required_unless_present = "spec")]
    kind: Option<Kind>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Grid side for grid kinds; `2^depth + 1` when omitted.
    #[arg(long)]
    side: Option<usize>,
    #[arg(long, default_value_t = 0)]
    axis: usize,
    /// Full set spec instead of `--kind`.
    #[arg(long, conflicts_with = "kind")]
    spec: Option<String>,
    /// Grid file to write.
    #[arg(short = 'o', long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Args)]
struct CodimArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    sample: SampleArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    sample: SampleArgs,
    /// Number of exponents in the grid `(0, top]`.
    #[arg(long, default_value_t = 40)]
    alphas: usize,
    /// Top of the exponent grid; defaults to the dimension.
    #[arg(long)]
    top: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct BallArgs {
    /// Base point, comma separated; defaults to a seeded cell of E.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    z: Option<Vec<f64>>,
    /// Truncation radius.
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Args)]
struct TruncateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    ball: BallArgs,
    #[arg(long)]
    seed: u64,
    /// Admissible `(x, m)` pairs for the big-piece search.
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    /// Also write every stage as `<prefix>.stage<k>`.
    #[arg(long)]
    save_stages: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct EnergyArgs {
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Args)]
struct MazyaArgs {
    /// Cells per side of the full grid.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[command(flatten)]
    energy: EnergyArgs,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct HolefillArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    ball: BallArgs,
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, default_value_t = 2.0)]
    kappa: f64,
    #[command(flatten)]
    energy: EnergyArgs,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Largest constant the sweep may report.
    #[arg(long, default_value_t = 1024.0)]
    cap: f64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct HardyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    ball: BallArgs,
    #[command(flatten)]
    energy: EnergyArgs,
    #[arg(long, default_value_t = 1.2)]
    q: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    sample: SampleArgs,
    /// Hardy parameters `s:p:q`; repeatable.
    #[arg(long, default_values_t = ["0.5:2:1.2".to_string()])]
    sweep: Vec<String>,
    /// Test functions per Hardy run besides the canonical one.
    #[arg(long, default_value_t = 8)]
    trials: usize,
    /// Hardy truncation radius; defaults to four coarse cells.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    no_hardy: bool,
    /// Largest accepted |alpha_hat - q_hat|.
    #[arg(long, default_value_t = 0.1)]
    tolerance: f64,
    #[command(flatten)]
    out: OutputArgs,
}

enum Input {
    File { set: GridSet, name: String },
    Spec(FractalSpec),
}

impl Input {
    fn load(arg: &str) -> Result<Self> {
        let path = Path::new(arg);
        if path.is_file() {
            let bytes = fs::read(path).with_context(|| format!("reading {arg}"))?;
            let set = GridSet::from_bytes(&bytes).with_context(|| format!("reading {arg}"))?;
            let name = path.with_extension("").to_string_lossy().into_owned();
            return Ok(Input::File { set, name });
        }
        if arg.contains(':') || arg.contains('(') {
            return Ok(Input::Spec(arg.parse().with_context(|| format!("parsing set spec {arg:?}"))?));
        }
        bail!("no such file: {arg}")
    }

    fn set(&self) -> Result<GridSet> {
        match self {
            Input::File { set, .. } => Ok(set.clone()),
            Input::Spec(spec) => Ok(generate(spec)?),
        }
    }

    fn default_prefix(&self) -> String {
        match self {
            Input::File { name, .. } => name.clone(),
            Input::Spec(spec) => spec.to_string().chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect(),
        }
    }

    fn pair(&self, args: &PairArgs) -> Result<(DepthPair, [u32; 2])> {
        let depths = match &args.depth_pair {
            Some(d) => {
                if d[1] != d[0] + 1 {
                    bail!("depth pair must be consecutive, got {} {}", d[0], d[1]);
                }
                Some([d[0], d[1]])
            }
            None => None,
        };
        let (coarse, fine, depths) = match self {
            Input::File { set, .. } => {
                let depths = depths.unwrap_or([0, 1]);
                (set.coarsen(args.factor)?, set.clone(), depths)
            }
            Input::Spec(spec) => {
                let depths = match depths {
                    Some(d) => d,
                    None => {
                        let d = spec_depth(spec).filter(|&d| d > 0).ok_or_else(|| {
                            anyhow::anyhow!("cannot infer a depth for {spec}; pass --depth-pair")
                        })?;
                        [d - 1, d]
                    }
                };
                (generate(&spec.at_depth(depths[0]))?, generate(&spec.at_depth(depths[1]))?, depths)
            }
        };
        let coarse = Level::new(GridSet::full(coarse.geometry().clone()), coarse, depths[0])?;
        let fine = Level::new(GridSet::full(fine.geometry().clone()), fine, depths[1])?;
        Ok((DepthPair::new(coarse, fine)?, depths))
    }
}

fn spec_depth(spec: &FractalSpec) -> Option<u32> {
    let from_side = |side: usize| (side > 1 && (side - 1).is_power_of_two()).then(|| (side - 1).trailing_zeros());
    match spec {
        FractalSpec::Cantor { depth } | FractalSpec::Carpet { depth } => Some(*depth),
        FractalSpec::Hyperplane { side, .. } | FractalSpec::Point { side, .. } | FractalSpec::Full { side, .. } => {
            from_side(*side)
        }
        FractalSpec::Union(parts) => parts.first().and_then(spec_depth),
        FractalSpec::Product(a, _) => spec_depth(a),
    }
}

fn sample_params(args: &SampleArgs, e: &GridSet) -> SampleParams {
    let sample = SampleParams::new(args.centers, args.scales, args.seed);
    match args.diameter {
        Some(d) => sample.with_diameter(d),
        None if e.count() == 1 => {
            let g = e.geometry();
            sample.with_diameter(g.shape().iter().copied().max().unwrap_or(1) as f64 * g.cell())
        }
        None => sample,
    }
}

struct Sink {
    prefix: String,
    command: &'static str,
    format: Format,
}

impl Sink {
    fn new(out: &OutputArgs, input: &Input, command: &'static str) -> Self {
        let prefix = out.output.as_ref().map_or_else(|| input.default_prefix(), |p| p.to_string_lossy().into_owned());
        Self { prefix, command, format: out.format }
    }

    fn path(&self, ext: &str) -> String {
        format!("{}.{}.{}", self.prefix, self.command, ext)
    }

    fn write(&self, report: &impl Serialize, csv: &str) -> Result<()> {
        if self.format != Format::Csv {
            let mut text = serde_json::to_string_pretty(report)?;
            text.push('\n');
            fs::write(self.path("json"), text).with_context(|| format!("writing {}", self.path("json")))?;
        }
        if self.format != Format::Json {
            fs::write(self.path("csv"), csv).with_context(|| format!("writing {}", self.path("csv")))?;
        }
        Ok(())
    }
}

/// Whether the mathematical check behind a command passed.
#[derive(PartialEq, Eq)]
enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn from(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<Verdict> {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Codim(a) => cmd_codim(a),
        Command::AikawaLower(a) => cmd_threshold(a, false),
        Command::AikawaUpper(a) => cmd_threshold(a, true),
        Command::Truncate(a) => cmd_truncate(a),
        Command::Mazya(a) => cmd_mazya(a),
        Command::Holefill(a) => cmd_holefill(a),
        Command::Hardy(a) => cmd_hardy(a),
        Command::VerifyMain(a) => cmd_verify(a),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<Verdict> {
    let spec: FractalSpec = match (&a.spec, a.kind) {
        (Some(s), _) => s.parse()?,
        (None, Some(kind)) => {
            let side = || -> Result<usize> {
                match (a.side, a.depth) {
                    (Some(s), _) => Ok(s),
                    (None, Some(d)) if d < 40 => Ok((1usize << d) + 1),
                    _ => bail!("grid kinds need --side or --depth"),
                }
            };
            let depth = || a.depth.ok_or_else(|| anyhow::anyhow!("--depth is required for self-similar kinds"));
            match kind {
                Kind::Cantor => FractalSpec::Cantor { depth: depth()? },
                Kind::Carpet => FractalSpec::Carpet { depth: depth()? },
                Kind::Hyperplane => FractalSpec::Hyperplane { dim: a.dim, axis: a.axis, side: side()? },
                Kind::Point => FractalSpec::Point { dim: a.dim, side: side()?, at: None },
                Kind::Full => FractalSpec::Full { dim: a.dim, side: side()? },
            }
        }
        (None, None) => bail!("pass --kind or --spec"),
    };
    let set = generate(&spec)?;
    set.save(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    let g = set.geometry();
    let report = json!({
        "spec": spec.to_string(),
        "path": a.output.to_string_lossy(),
        "shape": g.shape(),
        "cell": g.cell(),
        "origin": g.origin(),
        "cells": set.count(),
        "diameter": set.diameter(),
    });
    let mut csv = String::new();
    for ax in 0..g.dim() {
        let _ = write!(csv, "{}x{ax}", if ax > 0 { "," } else { "" });
    }
    csv.push('\n');
    for c in set.iter() {
        let line: Vec<String> = g.center(c).iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(csv, "{}", line.join(","));
    }
    let sink = Sink { prefix: a.output.with_extension("").to_string_lossy().into_owned(), command: "generate", format: a.format };
    sink.write(&report, &csv)?;
    Ok(Verdict::Pass)
}

fn cmd_codim(a: CodimArgs) -> Result<Verdict> {
    let input = Input::load(&a.input.input)?;
    let e = input.set()?;
    let space = GridSet::full(e.geometry().clone());
    let sample = sample_params(&a.sample, &e);
    let samples = ratio_samples_with(&space, &e, &sample)?;
    let lower = lower_codim(&samples)?;
    let upper = upper_codim(&samples)?;
    let doubling = doubling_report(&space, a.sample.centers, a.sample.seed)?;
    let report = json!({
        "input": a.input.input,
        "lower": lower,
        "upper": upper,
        "doubling": doubling,
        "samples": samples.len(),
        "centers": a.sample.centers,
        "scales": a.sample.scales,
        "seed": a.sample.seed,
    });
    Sink::new(&a.out, &input, "codim").write(&report, &envelope_csv(&samples))?;
    Ok(Verdict::Pass)
}

fn cmd_threshold(a: ThresholdArgs, upper: bool) -> Result<Verdict> {
    let input = Input::load(&a.input.input)?;
    let (pair, depths) = input.pair(&a.pair)?;
    let sample = sample_params(&a.sample, &pair.coarse.set);
    let dim = pair.fine.space.dim();
    let mut params = if upper { ThresholdParams::upper(dim, sample) } else { ThresholdParams::lower(dim, sample) };
    params.alphas = ThresholdParams::alpha_grid(a.top.unwrap_or(dim as f64), a.alphas);
    let command = if upper { "aikawa-upper" } else { "aikawa-lower" };
    let sink = Sink::new(&a.out, &input, command);
    let result = if upper { upper_aikawa_threshold(&pair, &params) } else { lower_aikawa_threshold(&pair, &params) };
    match result {
        Ok(fit) => {
            let report = json!({
                "input": a.input.input,
                "depth_pair": depths,
                "fit": fit,
                "cutoff": fit.table.cutoff,
                "growth": fit.table.growth,
            });
            sink.write(&report, &fit.table.to_csv())?;
            Ok(Verdict::Pass)
        }
        Err(Error::InconclusiveThreshold(table)) => {
            let report = json!({
                "input": a.input.input,
                "depth_pair": depths,
                "error": "inconclusive threshold",
                "cutoff": table.cutoff,
                "growth": table.growth,
            });
            sink.write(&report, &table.to_csv())?;
            Ok(Verdict::Fail)
        }
        Err(e) => Err(e.into()),
    }
}

fn base_point(ball: &BallArgs, e: &GridSet, seed: u64) -> Result<Vec<f64>> {
    let g = e.geometry();
    Ok(match &ball.z {
        Some(z) => g.center(nearest_member(e, z)?),
        None => {
            let cells = e.cells();
            if cells.is_empty() {
                bail!("the set is empty");
            }
            g.center(sampling::choose(&cells, 1, seed)[0])
        }
    })
}

fn cmd_truncate(a: TruncateArgs) -> Result<Verdict> {
    let input = Input::load(&a.input.input)?;
    let e = input.set()?;
    let space = GridSet::full(e.geometry().clone());
    let z = base_point(&a.ball, &e, a.seed)?;
    let r = a.ball.r.unwrap_or_else(|| (e.diameter() / 4.0).max(4.0 * e.cell()));
    let t = truncate(&space, &e, &z, r)?;
    let violations = t.violations();
    let mut failures = Vec::new();
    let pairs = if a.pairs > 0 { admissible_pairs(&t, a.pairs, sampling::derive_seed(a.seed, 1)) } else { Vec::new() };
    for (x, m) in &pairs {
        match find_big_piece_ball(&t, x, *m) {
            Ok(b) if verify_big_piece(&t, &b) => {}
            Ok(b) => failures.push(format!("ball at y={:?} for x={x:?}, m={m} fails re-check", b.y)),
            Err(e) => failures.push(e.to_string()),
        }
    }
    let sink = Sink::new(&a.out, &input, "truncate");
    if a.save_stages {
        t.save_stages(&sink.prefix)?;
    }
    let report = json!({
        "input": a.input.input,
        "z": t.z,
        "r": t.r,
        "stages": t.stages.iter().map(GridSet::count).collect::<Vec<_>>(),
        "f_cells": t.f.count(),
        "violations": violations,
        "big_pieces": { "checked": pairs.len(), "failures": failures },
    });
    let mut csv = String::from("stage,cells\n");
    for (k, s) in t.stages.iter().enumerate() {
        let _ = writeln!(csv, "{k},{}", s.count());
    }
    sink.write(&report, &csv)?;
    Ok(Verdict::from(violations.is_empty() && failures.is_empty()))
}

fn cmd_mazya(a: MazyaArgs) -> Result<Verdict> {
    if a.grid < 2 || a.dim == 0 {
        bail!("--grid must be >= 2 and --dim >= 1");
    }
    let params = EnergyParams::new(a.energy.s, a.energy.p, None)?;
    let geom = Geometry::unit(vec![a.grid; a.dim])?;
    let space = GridSet::full(geom);
    let half = a.grid as f64 / 2.0;
    let ball = Ball::new(vec![half; a.dim], half)?;
    let sides = mazya_trial_sides(&space, &ball, &params, a.trials, a.seed)?;
    let cert = mazya_summary(&sides, space.cell(), &params);
    let failures = sides.iter().filter(|&&(l, r)| !(l <= cert.constant * r)).count();
    let report = json!({
        "certificate": cert,
        "constant": mazya_constant(params.p),
        "trials": a.trials,
        "failures": failures,
        "grid": a.grid,
        "dim": a.dim,
        "seed": a.seed,
    });
    let mut csv = String::from("trial,lhs,rhs_raw,ratio\n");
    for (t, (l, r)) in sides.iter().enumerate() {
        let _ = writeln!(csv, "{t},{l:?},{r:?},{:?}", l / r);
    }
    let sink = Sink { prefix: a.out.output.map_or_else(|| format!("grid{}", a.grid), |p| p.to_string_lossy().into_owned()), command: "mazya", format: a.out.format };
    sink.write(&report, &csv)?;
    Ok(Verdict::from(failures == 0 && cert.pass))
}

fn cmd_holefill(a: HolefillArgs) -> Result<Verdict> {
    let input = Input::load(&a.input.input)?;
    let e = input.set()?;
    let space = GridSet::full(e.geometry().clone());
    let params = EnergyParams::new(a.energy.s, a.energy.p, None)?;
    let z = base_point(&a.ball, &e, a.seed)?;
    let r = a.ball.r.unwrap_or(4.0 * e.cell());
    let t = truncate(&space, &e, &z, r)?;
    let battery = test_battery(&Ball::new(z.clone(), a.sigma * a.kappa * r)?, r, a.trials, a.seed);
    let us = battery.iter().map(|b| b.evaluate(&space, &e, &t.f, r)).collect::<aikawa_core::Result<Vec<GridFunction>>>()?;
    let rep = holefill_check(&space, &e, &us, &z, r, a.sigma, a.kappa, &params, a.cap)?;
    let mut csv = String::from("c2,c1\n");
    for (c2, c1) in &rep.sweep {
        let _ = writeln!(csv, "{c2:?},{c1:?}");
    }
    let report = json!({ "input": a.input.input, "z": z, "r": r, "sigma": a.sigma, "kappa": a.kappa, "report": rep });
    Sink::new(&a.out, &input, "holefill").write(&report, &csv)?;
    Ok(Verdict::from(rep.certificate.pass))
}

fn cmd_hardy(a: HardyArgs) -> Result<Verdict> {
    let input = Input::load(&a.input.input)?;
    let (pair, depths) = input.pair(&a.pair)?;
    let params = EnergyParams::new(a.energy.s, a.energy.p, Some(a.q))?;
    let z = base_point(&a.ball, &pair.coarse.set, a.seed)?;
    let r = a.ball.r.unwrap_or(4.0 * pair.coarse.cell());
    let st = hardy_check(&pair, &z, r, &params, a.trials, a.seed)?;
    let mut csv = String::from("function,coarse_quotient,fine_quotient\n");
    let show = |q: &Option<f64>| q.map_or_else(String::new, |v| format!("{v:?}"));
    for (i, (c, f)) in st.coarse.quotients.iter().zip(&st.fine.quotients).enumerate() {
        let _ = writeln!(csv, "{i},{},{}", show(c), show(f));
    }
    let pass = st.certificate.pass;
    let report = json!({ "input": a.input.input, "depth_pair": depths, "z": z, "r": r, "stability": st });
    Sink::new(&a.out, &input, "hardy").write(&report, &csv)?;
    Ok(Verdict::from(pass))
}

fn parse_sweep(items: &[String]) -> Result<Vec<EnergyParams>> {
    items
        .iter()
        .map(|s| {
            let v: Vec<f64> = s
                .split(':')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("bad sweep entry {s:?}, expected s:p:q"))?;
            if v.len() != 3 {
                bail!("bad sweep entry {s:?}, expected s:p:q");
            }
            Ok(EnergyParams::new(v[0], v[1], Some(v[2]))?)
        })
        .collect()
}

fn cmd_verify(a: VerifyArgs) -> Result<Verdict> {
    let input = Input::load(&a.input.input)?;
    let (pair, depths) = input.pair(&a.pair)?;
    let sweep = if a.no_hardy { Vec::new() } else { parse_sweep(&a.sweep)? };
    let params = MainParams {
        sample: sample_params(&a.sample, &pair.coarse.set),
        sweep,
        hardy_trials: a.trials,
        hardy_radius: a.r,
    };
    let rep = main_theorem_report(&pair, &params);
    let pass = rep.pass() && rep.abs_diff.is_some_and(|d| d <= a.tolerance);
    let mut csv = String::from("alpha,growth,passes\n");
    if let Some(t) = &rep.threshold {
        for (al, g, p) in &t.table.growth {
            let _ = writeln!(csv, "{al:?},{g:?},{p}");
        }
    }
    let report = json!({
        "input": a.input.input,
        "depth_pair": depths,
        "alpha_hat": rep.alpha_hat,
        "q_hat": rep.q_hat,
        "abs_diff": rep.abs_diff,
        "tolerance": a.tolerance,
        "pass": pass,
        "report": rep,
    });
    Sink::new(&a.out, &input, "verify-main").write(&report, &csv)?;
    Ok(Verdict::from(pass))
}
