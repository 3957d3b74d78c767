use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use ou_design::design::{self, Objective, SearchConfig};
use ou_design::fisher;
use ou_design::io::{self, DesignFile};
use ou_design::model::ConditionDOptions;
use ou_design::oracle;
use ou_design::report::{self, RowStatus, RunManifest};
use ou_design::sim::{self, SimulationConfig};
use ou_design::verify::{self, VerifyOptions};
use ou_design::{CovarianceParams, Error, Region};

const EXIT_RUNTIME: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ou-design",
    version,
    about = "Exact designs for the Ornstein–Uhlenbeck sheet"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Correlation decay along t.
    #[arg(long, global = true, default_value_t = 1.0)]
    alpha: f64,
    /// Correlation decay along s.
    #[arg(long, global = true, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    sigma: f64,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, global = true, env = "OU_DESIGN_SEED", default_value_t = 0)]
    seed: u64,
    /// Accept monotone designs whose first point has a zero or negative coordinate.
    #[arg(long, global = true)]
    allow_nonpositive_origin: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Pretty,
}

#[derive(Subcommand)]
enum Command {
    /// Information summary of a design file.
    Info {
        #[arg(long)]
        design: PathBuf,
        /// Reference M_theta for the efficiency column.
        #[arg(long)]
        reference: Option<f64>,
    },
    /// Equidistant design maximizing the trend information.
    OptimalTrend {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        region: RegionArgs,
        /// Write the design file here.
        #[arg(long)]
        design_out: Option<PathBuf>,
    },
    /// M_theta, Phi and Psi of geometric progression designs over (0,1]^2.
    Surface {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        resolution: usize,
        #[arg(long, default_value_t = 1.0)]
        t_span: f64,
        #[arg(long, default_value_t = 1.0)]
        s_span: f64,
    },
    /// Multistart simplex search over monotone designs.
    Search {
        #[arg(long, default_value = "psi")]
        objective: Objective,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long, default_value_t = 20)]
        starts: usize,
        #[arg(long, default_value_t = 20_000)]
        max_iterations: usize,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
        /// Smallest admissible skewed increment.
        #[arg(long, default_value_t = 1e-6)]
        floor: f64,
        #[arg(long)]
        design_out: Option<PathBuf>,
    },
    /// Draw field samples at the points of a design.
    Simulate {
        #[arg(long)]
        design: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 1)]
        replications: usize,
    },
    /// Compare simulated estimator spread with the information formulas.
    FisherCheck {
        #[arg(long)]
        design: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 10_000)]
        replications: usize,
        /// How many replications also fit (alpha, beta) by maximum likelihood.
        #[arg(long, default_value_t = 0)]
        ml_replications: usize,
    },
    /// Run the oracle, inverse, gradient and Kronecker suites.
    Verify {
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Perturb the closed forms; every suite must then fail.
        #[arg(long)]
        self_test: bool,
    },
    /// Published numbers next to their recomputation.
    Tables,
}

#[derive(Args)]
struct RegionArgs {
    /// Design region as s_lo,s_hi,t_lo,t_hi.
    #[arg(long, default_value = "0,1,0,1", value_parser = parse_region)]
    region: [f64; 4],
    /// Shrink the region by this margin on every side.
    #[arg(long)]
    strict_interior: Option<f64>,
}

fn parse_region(text: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = text
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected 4 comma-separated numbers, got {}", v.len()))
}

impl RegionArgs {
    fn region(&self) -> Result<Region, Error> {
        let r = Region::new(self.region[0], self.region[1], self.region[2], self.region[3])?;
        match self.strict_interior {
            Some(m) => r.shrink(m),
            None => Ok(r),
        }
    }

    fn describe(&self) -> String {
        let mut s = format!("{:?}", self.region);
        if let Some(m) = self.strict_interior {
            s.push_str(&format!(" shrunk by {m}"));
        }
        s
    }
}

enum Failure {
    Input(String),
    Runtime(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotPositiveDefinite { .. } | Error::SizeCap { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// A rectangular result with its manifest.
struct Output {
    manifest: RunManifest,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Output {
    fn new(manifest: RunManifest, header: &[&str]) -> Self {
        Self {
            manifest,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn render(&self, format: Format) -> Result<String, Failure> {
        let mut out = self.manifest.render();
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.header)
                    .map_err(|e| Failure::Runtime(e.to_string()))?;
                for r in &self.rows {
                    w.write_record(r).map_err(|e| Failure::Runtime(e.to_string()))?;
                }
                let bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
                out.push_str(&String::from_utf8(bytes).expect("utf-8 csv"));
            }
            Format::Pretty => {
                let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
                for r in &self.rows {
                    for (w, c) in widths.iter_mut().zip(r) {
                        *w = (*w).max(c.chars().count());
                    }
                }
                let line = |cells: &[String]| -> String {
                    let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                    parts.join("  ").trim_end().to_string() + "\n"
                };
                out.push_str(&line(&self.header));
                for r in &self.rows {
                    out.push_str(&line(r));
                }
            }
        }
        Ok(out)
    }
}

/// Shortest round-trip text, in exponent form for very small or large values.
fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn sha256_file(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

struct Ctx<'a> {
    common: &'a Common,
    params: CovarianceParams,
}

impl Ctx<'_> {
    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(
            command,
            humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
        )
        .param("alpha", self.params.alpha())
        .param("beta", self.params.beta())
        .param("sigma", self.params.sigma())
    }

    fn opts(&self) -> ConditionDOptions {
        ConditionDOptions {
            allow_nonpositive_origin: self.common.allow_nonpositive_origin,
        }
    }

    fn read_design(&self, path: &Path, manifest: &mut RunManifest) -> Result<DesignFile, Failure> {
        manifest.inputs.push((path.display().to_string(), sha256_file(path)?));
        Ok(io::read_design_file(path, self.opts())?)
    }

    fn emit(&self, output: &Output) -> CmdResult {
        let text = output.render(self.common.format)?;
        match &self.common.out {
            Some(path) => write_text(path, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn cmd_info(ctx: &Ctx, path: &Path, reference: Option<f64>) -> CmdResult {
    let mut manifest = ctx.manifest("info");
    let design = ctx.read_design(path, &mut manifest)?;
    let p = &ctx.params;
    match &design {
        DesignFile::Monotone(m) => {
            let r = fisher::evaluate(m, p, reference)?;
            let mut out = Output::new(
                manifest,
                &[
                    "type",
                    "n",
                    "lambda",
                    "m_theta",
                    "m_alpha",
                    "m_beta",
                    "m_alpha_beta",
                    "phi",
                    "psi",
                    "efficiency",
                ],
            );
            out.push(vec![
                "monotone".into(),
                r.n.to_string(),
                num(r.lambda),
                num(r.m_theta),
                num(r.fisher.m_alpha),
                num(r.fisher.m_beta),
                num(r.fisher.m_alpha_beta),
                num(r.fisher.phi),
                num(r.psi),
                opt_num(r.efficiency),
            ]);
            ctx.emit(&out)
        }
        other => {
            let m_theta = match other {
                DesignFile::Grid(g) => oracle::grid_trend_information(g, p)?,
                _ => oracle::trend_information_oracle(&other.points(), p)?,
            };
            let notice = format!(
                "{} design: oracle-only, trend information computed by matrix solve",
                other.kind()
            );
            eprintln!("notice: {notice}");
            manifest = manifest.param("notice", notice);
            let eff = reference.map(|r| design::efficiency(m_theta, r)).transpose()?;
            let mut out = Output::new(manifest, &["type", "n", "m_theta", "efficiency"]);
            out.push(vec![
                other.kind().into(),
                other.len().to_string(),
                num(m_theta),
                opt_num(eff),
            ]);
            ctx.emit(&out)
        }
    }
}

fn report_row(kind: &str, r: &fisher::DesignReport) -> Vec<String> {
    vec![
        kind.into(),
        r.n.to_string(),
        num(r.lambda),
        num(r.m_theta),
        num(r.fisher.m_alpha),
        num(r.fisher.m_beta),
        num(r.fisher.m_alpha_beta),
        num(r.fisher.phi),
        num(r.psi),
    ]
}

const REPORT_HEADER: [&str; 9] = [
    "type",
    "n",
    "lambda",
    "m_theta",
    "m_alpha",
    "m_beta",
    "m_alpha_beta",
    "phi",
    "psi",
];

fn cmd_optimal_trend(ctx: &Ctx, n: usize, region: &RegionArgs, design_out: Option<&Path>) -> CmdResult {
    let des = design::optimal_trend_design(n, &region.region()?)?;
    let manifest = ctx
        .manifest("optimal-trend")
        .param("n", n)
        .param("region", region.describe());
    if let Some(path) = design_out {
        write_text(path, &io::write_design(&DesignFile::Monotone(des.clone())))?;
    }
    let r = fisher::evaluate(&des, &ctx.params, None)?;
    let mut out = Output::new(manifest, &REPORT_HEADER);
    out.push(report_row("monotone", &r));
    ctx.emit(&out)
}

fn cmd_surface(ctx: &Ctx, n: usize, resolution: usize, spans: (f64, f64)) -> CmdResult {
    let rows = design::geometric_surface(n, &ctx.params, resolution, spans)?;
    let manifest = ctx
        .manifest("surface")
        .param("n", n)
        .param("resolution", resolution)
        .param("t_span", spans.0)
        .param("s_span", spans.1);
    let mut out = Output::new(manifest, &["r1", "r2", "m_theta", "phi", "psi"]);
    for r in rows {
        out.push(vec![num(r.r1), num(r.r2), num(r.m_theta), num(r.phi), num(r.psi)]);
    }
    ctx.emit(&out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_search(
    ctx: &Ctx,
    objective: Objective,
    n: usize,
    region: &RegionArgs,
    starts: usize,
    max_iterations: usize,
    tolerance: f64,
    floor: f64,
    design_out: Option<&Path>,
) -> CmdResult {
    let mut cfg = SearchConfig::new(objective, n, region.region()?);
    cfg.starts = starts;
    cfg.max_iterations = max_iterations;
    cfg.tolerance = tolerance;
    cfg.floor = floor;
    cfg.seed = ctx.common.seed;
    let res = design::search(&cfg, &ctx.params)?;

    let mut manifest = ctx
        .manifest("search")
        .param("objective", objective)
        .param("n", n)
        .param("region", region.describe())
        .param("starts", starts)
        .param("floor", floor)
        .param("best_value", res.best_value)
        .param("best_run", res.best_run)
        .param("critical_family_hits", res.critical_family_hits.len())
        .param("no_improvement", res.no_improvement);
    manifest.seeds.push(cfg.seed);
    for h in &res.critical_family_hits {
        manifest = manifest.param(
            "critical_hit",
            format!(
                "run={} kind={:?} value={:e} gradient_norm={:e} proportionality_deviation={:e}",
                h.run, h.kind, h.value, h.gradient_norm, h.proportionality_deviation
            ),
        );
    }
    if res.no_improvement {
        eprintln!("notice: no start improved on its initial design");
    }
    if let Some(path) = design_out {
        write_text(path, &io::write_design(&DesignFile::Monotone(res.best_design.clone())))?;
    }
    let mut out = Output::new(
        manifest,
        &[
            "run",
            "start_value",
            "final_value",
            "iterations",
            "evaluations",
            "restarts",
            "converged",
            "improved",
            "at_floor",
            "t_sum_at_span",
            "s_sum_at_span",
        ],
    );
    for r in &res.runs {
        out.push(vec![
            r.run.to_string(),
            num(r.start_value),
            num(r.final_value),
            r.iterations.to_string(),
            r.evaluations.to_string(),
            r.restarts.to_string(),
            r.converged.to_string(),
            r.improved.to_string(),
            r.boundary.at_floor.iter().filter(|&&b| b).count().to_string(),
            r.boundary.t_sum_at_span.to_string(),
            r.boundary.s_sum_at_span.to_string(),
        ]);
    }
    ctx.emit(&out)
}

fn sim_manifest(ctx: &Ctx, command: &str, replications: usize, theta: f64) -> RunManifest {
    let mut m = ctx
        .manifest(command)
        .param("generator", sim::GENERATOR)
        .param("replications", replications)
        .param("theta", theta);
    m.seeds.push(ctx.common.seed);
    m
}

fn cmd_simulate(ctx: &Ctx, path: &Path, theta: f64, replications: usize) -> CmdResult {
    if replications == 0 {
        return Err(Failure::Input("replications must be >= 1".into()));
    }
    let mut manifest = sim_manifest(ctx, "simulate", replications, theta);
    let design = ctx.read_design(path, &mut manifest)?;
    let points = design.points();
    let sampler = sim::FieldSampler::new(&points, &ctx.params)?;
    let mut out = Output::new(manifest, &["replication", "point", "s", "t", "y"]);
    for rep in 0..replications {
        let y = sampler.sample(theta, &mut sim::replication_rng(ctx.common.seed, rep as u64));
        for (i, (p, v)) in points.iter().zip(&y).enumerate() {
            out.push(vec![rep.to_string(), (i + 1).to_string(), num(p.s), num(p.t), num(*v)]);
        }
    }
    ctx.emit(&out)
}

fn cmd_fisher_check(ctx: &Ctx, path: &Path, theta: f64, replications: usize, ml_replications: usize) -> CmdResult {
    let mut manifest = sim_manifest(ctx, "fisher-check", replications, theta).param("ml_replications", ml_replications);
    let design = ctx.read_design(path, &mut manifest)?;
    let DesignFile::Monotone(des) = design else {
        return Err(Failure::Input("fisher-check needs a monotone design".into()));
    };
    let mut cfg = SimulationConfig::new(ctx.common.seed, replications, theta, ctx.params)?;
    cfg.ml_replications = ml_replications;
    cfg.validate()?;
    let r = sim::empirical_fisher_check(&des, &cfg)?;
    let mut out = Output::new(manifest, &["quantity", "empirical", "standard_error", "theory"]);
    out.push(vec![
        "theta_mean".into(),
        num(r.theta_mean),
        num(r.theta_variance.sqrt() / (replications as f64).sqrt()),
        num(theta),
    ]);
    out.push(vec![
        "theta_variance".into(),
        num(r.theta_variance),
        num(r.theta_variance_se),
        num(r.theta_variance_theory),
    ]);
    if ml_replications > 0 {
        let emp = r.rate_covariance;
        let th = r.rate_covariance_theory;
        let cell = |m: Option<[[f64; 2]; 2]>, i: usize, j: usize| opt_num(m.map(|m| m[i][j]));
        out.push(vec![
            "ml_failed".into(),
            r.ml_failed.to_string(),
            String::new(),
            String::new(),
        ]);
        out.push(vec![
            "alpha_mean".into(),
            opt_num(r.alpha_mean),
            String::new(),
            num(ctx.params.alpha()),
        ]);
        out.push(vec![
            "beta_mean".into(),
            opt_num(r.beta_mean),
            String::new(),
            num(ctx.params.beta()),
        ]);
        for (name, i, j) in [("var_alpha", 0, 0), ("var_beta", 1, 1), ("cov_alpha_beta", 0, 1)] {
            out.push(vec![name.into(), cell(emp, i, j), String::new(), cell(th, i, j)]);
        }
    }
    ctx.emit(&out)
}

fn cmd_verify(ctx: &Ctx, n_max: usize, trials: usize, self_test: bool) -> CmdResult {
    let opts = VerifyOptions {
        n_max,
        trials,
        seed: ctx.common.seed,
        self_test,
    };
    let suites = verify::run(&opts)?;
    let mut manifest = ctx
        .manifest("verify")
        .param("n_max", n_max)
        .param("trials", trials)
        .param("self_test", self_test);
    manifest.seeds.push(opts.seed);
    let mut out = Output::new(manifest, &["suite", "trials", "max_error", "tolerance", "status"]);
    for s in &suites {
        out.push(vec![
            s.name.into(),
            s.trials.to_string(),
            num(s.max_error),
            num(s.tolerance),
            if s.passed { "pass" } else { "fail" }.into(),
        ]);
    }
    ctx.emit(&out)?;
    let failed: Vec<&str> = suites.iter().filter(|s| !s.passed).map(|s| s.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("failed suites: {}", failed.join(", "))))
    }
}

fn status_name(s: RowStatus) -> &'static str {
    match s {
        RowStatus::Match => "match",
        RowStatus::Mismatch => "mismatch",
        RowStatus::Annotated => "annotated",
        RowStatus::Unavailable => "unavailable",
    }
}

fn cmd_tables(ctx: &Ctx) -> CmdResult {
    let rows = report::tables()?;
    let mut out = Output::new(
        ctx.manifest("tables"),
        &[
            "section",
            "quantity",
            "published",
            "recomputed",
            "difference",
            "tolerance",
            "status",
            "note",
        ],
    );
    for r in &rows {
        out.push(vec![
            r.section.into(),
            r.quantity.clone(),
            r.printed.unwrap_or_default().into(),
            opt_num(r.recomputed),
            opt_num(r.difference),
            opt_num(r.tolerance),
            status_name(r.status).into(),
            r.note.clone(),
        ]);
    }
    ctx.emit(&out)?;
    if rows.iter().any(|r| r.status == RowStatus::Mismatch) {
        return Err(Failure::Verification(
            "recomputed values disagree with the printed ones".into(),
        ));
    }
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    let c = &cli.common;
    let ctx = Ctx {
        common: c,
        params: CovarianceParams::new(c.alpha, c.beta, c.sigma)?,
    };
    match &cli.command {
        Command::Info { design, reference } => cmd_info(&ctx, design, *reference),
        Command::OptimalTrend { n, region, design_out } => cmd_optimal_trend(&ctx, *n, region, design_out.as_deref()),
        Command::Surface {
            n,
            resolution,
            t_span,
            s_span,
        } => cmd_surface(&ctx, *n, *resolution, (*t_span, *s_span)),
        Command::Search {
            objective,
            n,
            region,
            starts,
            max_iterations,
            tolerance,
            floor,
            design_out,
        } => cmd_search(
            &ctx,
            *objective,
            *n,
            region,
            *starts,
            *max_iterations,
            *tolerance,
            *floor,
            design_out.as_deref(),
        ),
        Command::Simulate {
            design,
            theta,
            replications,
        } => cmd_simulate(&ctx, design, *theta, *replications),
        Command::FisherCheck {
            design,
            theta,
            replications,
            ml_replications,
        } => cmd_fisher_check(&ctx, design, *theta, *replications, *ml_replications),
        Command::Verify {
            n_max,
            trials,
            self_test,
        } => cmd_verify(&ctx, *n_max, *trials, *self_test),
        Command::Tables => cmd_tables(&ctx),
    }
}

fn fail(kind: &str, msg: impl Display, code: u8) -> ExitCode {
    eprintln!("{kind}: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => fail("input error", m, EXIT_INPUT),
        Err(Failure::Runtime(m)) => fail("error", m, EXIT_RUNTIME),
        Err(Failure::Verification(m)) => fail("verification failed", m, EXIT_VERIFY),
    }
}
