use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use warpfin::campaign::{evaluate_samples, report_from_samples, PointValues};
use warpfin::{
    oracle_compare, point_report, preset_names, scan_convexity, CampaignSpec, CheckKind, CurvatureReport, Domain,
    EvalPoint, FamilySpec, MetricFamily,
};

/// Curvature verification for warped-product Finsler metrics
/// `F = |ȳ| √φ(y⁰/|ȳ|, |x̄|)`.
///
/// Function arguments (--h, --G, --f, --g, --b, --kernel) are expressions in
/// one variable using + - * / ^, sqrt, exp, ln, arctan, pi and e.
/// Exit codes: 0 pass, 1 check failure, 2 usage or domain error.
#[derive(Parser, Debug)]
#[command(name = "warpfin", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a randomized verification campaign.
    Verify(VerifyArgs),
    /// Scan strong convexity over a (z, r) grid.
    ScanConvexity(ScanArgs),
    /// Dump every closed-form quantity at one point.
    Point(PointArgs),
    /// Compare closed forms with finite-difference oracles.
    Oracle(OracleArgs),
    /// List the built-in presets.
    Presets,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyKind {
    GFamily,
    Randers,
    Gc,
    Flat,
    Custom,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct FamilyArgs {
    /// Named preset (see `warpfin presets`).
    #[arg(long, conflicts_with = "family")]
    preset: Option<String>,
    /// Family kind built from the function flags.
    #[arg(long, value_enum)]
    family: Option<FamilyKind>,
    /// Warp h(r) of the G-family.
    #[arg(long)]
    h: Option<String>,
    /// Profile G(t) of the G-family or flat family.
    #[arg(long = "G")]
    big_g: Option<String>,
    /// Randers f(r).
    #[arg(long)]
    f: Option<String>,
    /// Randers g(r), also the warp of the G_c family.
    #[arg(long)]
    g: Option<String>,
    /// Randers b(r), usually a constant.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// Kernel k(t) > 0 of the G_c family.
    #[arg(long)]
    kernel: Option<String>,
    /// Constant c of the G_c family.
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
    /// φ(z, r) for the custom family.
    #[arg(long)]
    phi: Option<String>,
}

impl FamilyArgs {
    fn given(&self) -> bool {
        self.preset.is_some() || self.family.is_some()
    }

    fn spec(&self) -> Result<FamilySpec> {
        let need = |v: &Option<String>, flag: &str| -> Result<String> {
            v.clone().ok_or_else(|| anyhow!("--{flag} is required for this family"))
        };
        if let Some(name) = &self.preset {
            return Ok(FamilySpec::Preset { name: name.clone() });
        }
        Ok(match self.family {
            Some(FamilyKind::GFamily) => FamilySpec::GFamily {
                h: need(&self.h, "h")?,
                profile: need(&self.big_g, "G")?,
            },
            Some(FamilyKind::Randers) => FamilySpec::Randers {
                f: need(&self.f, "f")?,
                g: need(&self.g, "g")?,
                b: need(&self.b, "b")?,
            },
            Some(FamilyKind::Gc) => FamilySpec::Gc {
                kernel: need(&self.kernel, "kernel")?,
                c: self.c.ok_or_else(|| anyhow!("--c is required for this family"))?,
                g: need(&self.g, "g")?,
            },
            Some(FamilyKind::Flat) => FamilySpec::Flat {
                profile: self.big_g.clone().unwrap_or_else(|| "sqrt(t^2+1)".into()),
            },
            Some(FamilyKind::Custom) => FamilySpec::Custom {
                phi: need(&self.phi, "phi")?,
            },
            None => bail!("either --preset or --family is required"),
        })
    }
}

#[derive(Args, Debug, Clone)]
struct CampaignArgs {
    /// JSON campaign spec; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    /// Sampled radius range `a,b`.
    #[arg(long, value_parser = parse_pair)]
    r_range: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    y0_range: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_pair)]
    ybar_range: Option<(f64, f64)>,
    #[arg(long)]
    tol_douglas: Option<f64>,
    #[arg(long)]
    tol_douglas_ode: Option<f64>,
    #[arg(long)]
    tol_berwald: Option<f64>,
    #[arg(long)]
    tol_landsberg: Option<f64>,
    #[arg(long)]
    tol_ricci: Option<f64>,
    #[arg(long)]
    tol_projflat: Option<f64>,
    #[arg(long)]
    tol_oracle: Option<f64>,
    #[arg(long)]
    tol_hessian: Option<f64>,
    /// Fail with exit code 2 if any sampled point cannot be evaluated.
    #[arg(long)]
    strict: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    campaign: CampaignArgs,
    /// Comma-separated: douglas, berwald, landsberg, ricci, projflat, convexity, oracle.
    #[arg(long, value_delimiter = ',')]
    checks: Vec<String>,
    /// Also write per-point values as CSV.
    #[arg(long)]
    per_point: Option<PathBuf>,
    /// Leave runtime_ms out of the report.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    campaign: CampaignArgs,
    #[arg(long, allow_hyphen_values = true)]
    z_min: Option<f64>,
    #[arg(long)]
    z_max: Option<f64>,
    #[arg(long)]
    z_count: Option<usize>,
    #[arg(long)]
    r_count: Option<usize>,
}

#[derive(Args, Debug)]
struct PointArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    x0: f64,
    /// Comma-separated x̄.
    #[arg(long, allow_hyphen_values = true)]
    xbar: String,
    #[arg(long, allow_hyphen_values = true)]
    y0: f64,
    /// Comma-separated ȳ.
    #[arg(long, allow_hyphen_values = true)]
    ybar: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    campaign: CampaignArgs,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let v = parse_list(s)?;
    match v.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected two comma-separated numbers, got '{s}'")),
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect()
}

fn build_spec(family: &FamilyArgs, c: &CampaignArgs) -> Result<CampaignSpec> {
    let mut spec = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<CampaignSpec>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => CampaignSpec::default(),
    };
    if family.given() {
        spec.family = family.spec()?;
    } else if c.config.is_none() {
        bail!("either --preset, --family or --config is required");
    }
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(spec.n, c.n);
    set!(spec.samples, c.samples);
    set!(spec.seed, c.seed);
    set!(spec.rho, c.rho);
    set!(spec.y0_range, c.y0_range);
    set!(spec.ybar_range, c.ybar_range);
    set!(spec.tolerances.douglas, c.tol_douglas);
    set!(spec.tolerances.douglas_ode, c.tol_douglas_ode);
    set!(spec.tolerances.berwald, c.tol_berwald);
    set!(spec.tolerances.landsberg, c.tol_landsberg);
    set!(spec.tolerances.ricci, c.tol_ricci);
    set!(spec.tolerances.projflat, c.tol_projflat);
    set!(spec.tolerances.oracle, c.tol_oracle);
    set!(spec.tolerances.oracle_hessian, c.tol_hessian);
    if c.r_min.is_some() {
        spec.r_min = c.r_min;
    }
    if c.r_range.is_some() {
        spec.r_range = c.r_range;
    }
    spec.strict |= c.strict;
    spec.validate()?;
    Ok(spec)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn checks_csv(report: &CurvatureReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "sup_norm", "tolerance", "pass", "evaluated", "worst_index"])?;
    for c in &report.checks {
        w.write_record([
            c.name.clone(),
            format!("{:e}", c.sup_norm),
            format!("{:e}", c.tolerance),
            c.pass.to_string(),
            c.evaluated.to_string(),
            c.worst_point.as_ref().map(|p| p.index.to_string()).unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn per_point_csv(path: &Path, report: &CurvatureReport, samples: &[PointValues], n: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
    let mut header = vec!["index".to_string(), "x0".into()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("y0".into());
    header.extend((1..=n).map(|i| format!("y{i}")));
    header.extend(names.iter().map(|s| s.to_string()));
    header.push("error".into());
    w.write_record(&header)?;
    for s in samples {
        let mut row = vec![s.index.to_string(), s.point.x0.to_string()];
        row.extend(s.point.xbar.iter().map(|v| v.to_string()));
        row.push(s.point.y0.to_string());
        row.extend(s.point.ybar.iter().map(|v| v.to_string()));
        row.extend(
            names
                .iter()
                .map(|k| s.values.get(*k).map(|v| format!("{v:e}")).unwrap_or_default()),
        );
        row.push(s.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<bool> {
    let mut spec = build_spec(&args.family, &args.campaign)?;
    if !args.checks.is_empty() {
        spec.checks = args
            .checks
            .iter()
            .map(|c| CheckKind::parse(c.trim()))
            .collect::<warpfin::Result<_>>()?;
    }
    let start = Instant::now();
    let family = spec.build_family()?;
    let samples = evaluate_samples(&family, &spec)?;
    let mut report = report_from_samples(&spec, &samples)?;
    if !args.no_timing {
        report.runtime_ms = Some(start.elapsed().as_millis() as u64);
    }
    if let Some(path) = &args.per_point {
        per_point_csv(path, &report, &samples, spec.n)?;
    }
    let text = match args.campaign.format {
        Format::Json => report.to_json(),
        Format::Csv => checks_csv(&report)?,
    };
    emit(&args.campaign.out, &text)?;
    Ok(report.pass)
}

fn cmd_scan(args: ScanArgs) -> Result<bool> {
    let mut spec = build_spec(&args.family, &args.campaign)?;
    if let Some(v) = args.z_min {
        spec.scan.z_min = v;
    }
    if let Some(v) = args.z_max {
        spec.scan.z_max = v;
    }
    if let Some(v) = args.z_count {
        spec.scan.z_count = v;
    }
    if let Some(v) = args.r_count {
        spec.scan.r_count = v;
    }
    let report = scan_convexity(&spec)?;
    let text = match args.campaign.format {
        Format::Json => serde_json::to_string_pretty(&report)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["z", "r", "reason"])?;
            for f in &report.convexity.failures {
                w.write_record([f.z.to_string(), f.r.to_string(), f.reason.clone()])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
    };
    emit(&args.campaign.out, &text)?;
    Ok(report.pass)
}

fn cmd_point(args: PointArgs) -> Result<bool> {
    let spec = args.family.spec()?;
    let domain = Domain::new(args.rho.unwrap_or(1.0), args.r_min)?;
    let family = MetricFamily::from_spec(&spec, domain)?;
    let xbar = parse_list(&args.xbar).map_err(|e| anyhow!("--xbar: {e}"))?;
    let ybar = parse_list(&args.ybar).map_err(|e| anyhow!("--ybar: {e}"))?;
    let point = EvalPoint::new(args.x0, xbar, args.y0, ybar)?;
    let report = point_report(&family, &point)?;
    emit(&args.out, &serde_json::to_string_pretty(&report)?)?;
    Ok(true)
}

fn cmd_oracle(args: OracleArgs) -> Result<bool> {
    let spec = build_spec(&args.family, &args.campaign)?;
    let report = oracle_compare(&spec)?;
    let text = match args.campaign.format {
        Format::Json => serde_json::to_string_pretty(&report)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["tensor", "A", "B", "C", "D", "max_rel_dev"])?;
            for c in &report.components {
                let mut row = vec![c.tensor.clone()];
                row.extend(c.index.iter().map(|i| i.to_string()));
                row.push(format!("{:e}", c.max_rel_dev));
                w.write_record(&row)?;
            }
            String::from_utf8(w.into_inner()?)?
        }
    };
    emit(&args.campaign.out, &text)?;
    Ok(report.report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::ScanConvexity(a) => cmd_scan(a),
        Command::Point(a) => cmd_point(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
