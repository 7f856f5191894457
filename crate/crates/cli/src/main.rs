//! `csiq` — Monte Carlo simulator and analysis CLI for UPA CSI quantizers.
//!
//! Subcommands:
//!   narrowband  run a single-tone quantizer campaign
//!   wideband    run a two-level multi-tone quantizer campaign
//!   allocate    exhaustive feedback-bit allocation sweep
//!   analyze     closed-form gain tables, optionally vs Monte Carlo
//!   compare     aligned multi-scheme comparison over an array sweep
//!   selftest    quick end-to-end sanity checks
//!
//! Campaign commands require --trials, --seed and --out. Exit code is 0 on
//! success; failures print one machine-readable JSON error line to stderr.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use csiq::analysis::{
    allocate_feedback, analytic_report, expected_gain, gamma_sq, gbc_closed, order_stat_gain,
};
use csiq::channel::{DelayProfile, UpaGeometry};
use csiq::harness::{
    compare, config_from_kv, export_to_path, proposed_unnormalized_gain, run_trials,
    ExperimentConfig, ExperimentMode, ExportFormat, GainReport, KvConfig, NarrowbandScheme,
};
use csiq::narrowband::FeedbackAllocation;
use csiq::wideband::{wideband_overhead, WidebandAllocation};
use csiq::{Error, Result};

#[derive(Parser)]
#[command(name = "csiq", version, about = "UPA CSI quantizer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a narrowband (single-tone) quantizer campaign.
    Narrowband(NarrowbandArgs),
    /// Run a wideband (multi-tone, two-level) quantizer campaign.
    Wideband(WidebandArgs),
    /// Search feedback-bit allocations over a budget/array sweep.
    Allocate(AllocateArgs),
    /// Closed-form gain tables, optionally against Monte Carlo estimates.
    Analyze(AnalyzeArgs),
    /// Compare schemes over a common array sweep.
    Compare(CompareArgs),
    /// Quick sanity checks; exits nonzero on any failure.
    Selftest,
}

#[derive(Args)]
struct CommonRun {
    /// Trial count.
    #[arg(long)]
    trials: usize,
    /// Master seed; trials use independent substreams.
    #[arg(long)]
    seed: u64,
    /// Output path.
    #[arg(long)]
    out: PathBuf,
    /// Output format: csv or jsonl.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Optional flat key=value config file (flags override it).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario label for report rows.
    #[arg(long, default_value = "experiment")]
    scenario: String,
}

#[derive(Args)]
struct GeometryArgs {
    /// Vertical antenna count.
    #[arg(long)]
    m_v: Option<usize>,
    /// Horizontal antenna count.
    #[arg(long)]
    m_h: Option<usize>,
    /// Vertical spacing in carrier wavelengths.
    #[arg(long)]
    d_v: Option<f64>,
    /// Horizontal spacing in carrier wavelengths.
    #[arg(long)]
    d_h: Option<f64>,
    /// Per-trial path counts, comma separated (uniformly drawn).
    #[arg(long)]
    p_set: Option<String>,
    /// Uniform delay spread in microseconds (0 disables).
    #[arg(long)]
    delay_max_us: Option<f64>,
}

#[derive(Args)]
struct NarrowbandArgs {
    #[command(flatten)]
    run: CommonRun,
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Scheme: proposed | kp | enhanced-kp, or a preset
    /// (prop-n-i, prop-n-ii, prop-n-iii, enh-kp-i, enh-kp-ii, kp).
    #[arg(long)]
    scheme: Option<String>,
    /// First-round DFT bits per axis.
    #[arg(long)]
    b1: Option<u32>,
    /// Second-beam DFT bits per axis.
    #[arg(long)]
    b2: Option<u32>,
    /// Combiner codebook bits.
    #[arg(long)]
    bc: Option<u32>,
    /// KP baseline total budget.
    #[arg(long)]
    b_total: Option<u32>,
}

#[derive(Args)]
struct WidebandArgs {
    #[command(flatten)]
    run: CommonRun,
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Total tone count W.
    #[arg(long)]
    w_total: Option<usize>,
    /// Subcarrier spacing in Hz.
    #[arg(long)]
    spacing_hz: Option<f64>,
    /// Carrier frequency in Hz.
    #[arg(long)]
    fc_hz: Option<f64>,
    /// Wideband resource blocks L.
    #[arg(long)]
    l_blocks: Option<usize>,
    /// Narrowband resource blocks per wideband RB, R.
    #[arg(long)]
    r_blocks: Option<usize>,
    #[arg(long)]
    bw1: Option<u32>,
    #[arg(long)]
    bw2: Option<u32>,
    #[arg(long)]
    bn1: Option<u32>,
    #[arg(long)]
    bn2: Option<u32>,
    #[arg(long)]
    bc: Option<u32>,
}

#[derive(Args)]
struct AllocateArgs {
    /// Total budgets, comma separated (e.g. 16,20).
    #[arg(long)]
    b_total: String,
    /// Array sweep, e.g. 4x4,8x8,12x12.
    #[arg(long)]
    arrays: String,
    #[arg(long, default_value = "3,4,5")]
    p_set: String,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Array sweep, e.g. 8x8,12x12.
    #[arg(long)]
    arrays: String,
    /// Allocation as b1,b2,...:bc — e.g. 5,4:2. Repeatable.
    #[arg(long = "alloc", required = true)]
    allocs: Vec<String>,
    #[arg(long, default_value = "3,4,5")]
    p_set: String,
    /// Monte Carlo trials for the empirical column (0 = analytic only;
    /// only two-beam allocations have an empirical path).
    #[arg(long, default_value_t = 0)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Schemes: comma-separated preset names (prop-n-i, enh-kp-i, kp, ...)
    /// or wideband:BW1,BW2,BN1,BN2,BC:W,L,R[,spacing_hz,fc_hz].
    #[arg(long)]
    schemes: String,
    /// Array sweep, e.g. 4x4,8x8,12x12,16x16.
    #[arg(long)]
    arrays: String,
    #[arg(long, default_value = "3,4,5")]
    p_set: String,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = error_kind(&err);
            let line = serde_json::json!({ "error": { "kind": kind, "message": err.to_string() } });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::InvalidDimension(_) => "invalid-dimension",
        Error::InvalidInput(_) => "invalid-input",
        Error::Config { .. } => "config",
        Error::DegenerateBeamSet { .. } => "degenerate-beamset",
        Error::ExhaustedCodebook => "exhausted-codebook",
        Error::NumericalDomain(_) => "numerical-domain",
        Error::InfeasiblePacking { .. } => "infeasible-packing",
        Error::InsufficientBeams { .. } => "insufficient-beams",
        Error::InfeasibleBudget(_) => "infeasible-budget",
        Error::MisalignedSweeps(_) => "misaligned-sweeps",
        Error::Payload(_) => "payload",
        Error::Io(_) => "io",
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Narrowband(args) => narrowband(args),
        Command::Wideband(args) => wideband(args),
        Command::Allocate(args) => allocate(args),
        Command::Analyze(args) => analyze(args),
        Command::Compare(args) => run_compare(args),
        Command::Selftest => selftest(),
    }
}

/// Loads the optional config file and overlays CLI values on top.
fn base_kv(run: &CommonRun, geom: &GeometryArgs) -> Result<KvConfig> {
    let mut kv = match &run.config {
        Some(path) => KvConfig::parse(&std::fs::read_to_string(path)?)?,
        None => KvConfig::default(),
    };
    kv.set("run.trials", run.trials.to_string());
    kv.set("run.seed", run.seed.to_string());
    kv.set("run.scenario", run.scenario.clone());
    if let Some(v) = geom.m_v {
        kv.set("geometry.m_v", v.to_string());
    }
    if let Some(v) = geom.m_h {
        kv.set("geometry.m_h", v.to_string());
    }
    if let Some(v) = geom.d_v {
        kv.set("geometry.d_v", v.to_string());
    }
    if let Some(v) = geom.d_h {
        kv.set("geometry.d_h", v.to_string());
    }
    if let Some(v) = &geom.p_set {
        kv.set("channel.p_set", v.clone());
    }
    if let Some(v) = geom.delay_max_us {
        kv.set("channel.delay_max_us", v.to_string());
    }
    Ok(kv)
}

fn write_report(report: &GainReport, run: &CommonRun) -> Result<()> {
    let format: ExportFormat = run.format.parse()?;
    export_to_path(report, format, &run.out)?;
    println!("wrote {} row(s) to {}", report.rows.len(), run.out.display());
    Ok(())
}

fn narrowband(args: NarrowbandArgs) -> Result<()> {
    let mut kv = base_kv(&args.run, &args.geometry)?;
    if let Some(scheme) = &args.scheme {
        kv.set("scheme.kind", scheme.clone());
    }
    if let Some(v) = args.b1 {
        kv.set("scheme.b1", v.to_string());
    }
    if let Some(v) = args.b2 {
        kv.set("scheme.b2", v.to_string());
    }
    if let Some(v) = args.bc {
        kv.set("scheme.b_c", v.to_string());
    }
    if let Some(v) = args.b_total {
        kv.set("scheme.b_total", v.to_string());
    }
    if kv.get("scheme.kind").is_none() {
        return Err(Error::Config { field: "scheme.kind".into(), message: "missing (pass --scheme)".into() });
    }
    let config = config_from_kv(&kv)?;
    warn_if_wideband_mode(&config)?;
    let row = run_trials(&config)?;
    println!(
        "{}: mean normalized gain {:.5} (stderr {:.5}) over {} trials, {} feedback bits",
        row.scheme, row.mean_gain, row.stderr, row.trials, row.b_total
    );
    write_report(&GainReport { rows: vec![row] }, &args.run)
}

fn warn_if_wideband_mode(config: &ExperimentConfig) -> Result<()> {
    if matches!(config.mode, ExperimentMode::Wideband { .. }) {
        return Err(Error::Config {
            field: "scheme.kind".into(),
            message: "config file describes a wideband run; use the `wideband` subcommand".into(),
        });
    }
    Ok(())
}

fn wideband(args: WidebandArgs) -> Result<()> {
    let mut kv = base_kv(&args.run, &args.geometry)?;
    kv.set("scheme.kind", "wideband".into());
    let pairs: [(&str, Option<String>); 10] = [
        ("wideband.w_total", args.w_total.map(|v| v.to_string())),
        ("wideband.spacing_hz", args.spacing_hz.map(|v| v.to_string())),
        ("wideband.f_c_hz", args.fc_hz.map(|v| v.to_string())),
        ("wideband.l_blocks", args.l_blocks.map(|v| v.to_string())),
        ("wideband.r_blocks", args.r_blocks.map(|v| v.to_string())),
        ("wideband.b_w1", args.bw1.map(|v| v.to_string())),
        ("wideband.b_w2", args.bw2.map(|v| v.to_string())),
        ("wideband.b_n1", args.bn1.map(|v| v.to_string())),
        ("wideband.b_n2", args.bn2.map(|v| v.to_string())),
        ("wideband.b_c", args.bc.map(|v| v.to_string())),
    ];
    for (key, value) in pairs {
        if let Some(v) = value {
            kv.set(key, v);
        }
    }
    let config = config_from_kv(&kv)?;
    if let ExperimentMode::Wideband { grid, alloc } = &config.mode {
        println!(
            "wideband overhead: {} bits over {} tones ({} wideband RBs x {} narrowband RBs)",
            wideband_overhead(grid, alloc.b_w1, alloc.b_w2, alloc.b_n1),
            grid.w_total,
            grid.l_blocks,
            grid.r_blocks
        );
    }
    let row = run_trials(&config)?;
    println!(
        "{}: mean per-tone normalized gain {:.5} (stderr {:.5}) over {} trials",
        row.scheme, row.mean_gain, row.stderr, row.trials
    );
    write_report(&GainReport { rows: vec![row] }, &args.run)
}

fn parse_usize_list(raw: &str, field: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|tok| {
            tok.trim().parse::<usize>().map_err(|_| Error::Config {
                field: field.into(),
                message: format!("cannot parse `{tok}`"),
            })
        })
        .collect()
}

fn parse_arrays(raw: &str) -> Result<Vec<UpaGeometry>> {
    raw.split(',')
        .map(|tok| {
            let (v, h) = tok.trim().split_once('x').ok_or_else(|| Error::Config {
                field: "arrays".into(),
                message: format!("expected MxN, got `{tok}`"),
            })?;
            let m_v = v.parse::<usize>().map_err(|_| Error::Config {
                field: "arrays".into(),
                message: format!("bad row count `{v}`"),
            })?;
            let m_h = h.parse::<usize>().map_err(|_| Error::Config {
                field: "arrays".into(),
                message: format!("bad column count `{h}`"),
            })?;
            UpaGeometry::new(m_v, m_h, 0.5, 0.5)
        })
        .collect()
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    })
}

fn allocate(args: AllocateArgs) -> Result<()> {
    let budgets = parse_usize_list(&args.b_total, "b_total")?;
    let arrays = parse_arrays(&args.arrays)?;
    let p_set = parse_usize_list(&args.p_set, "p_set")?;
    let mut out = open_out(&args.out)?;
    writeln!(out, "b_total,m_v,m_h,n_beams,bits,b_c,objective")?;
    for &bt in &budgets {
        for geom in &arrays {
            let res = allocate_feedback(geom, bt as u32, &p_set)?;
            let bits = res
                .allocation
                .bits_per_beam()
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join("|");
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                bt,
                geom.m_v,
                geom.m_h,
                res.n_beams,
                bits,
                res.allocation.b_c(),
                res.objective
            )?;
        }
    }
    Ok(())
}

fn parse_alloc(raw: &str) -> Result<FeedbackAllocation> {
    let (beams, bc) = raw.split_once(':').ok_or_else(|| Error::Config {
        field: "alloc".into(),
        message: format!("expected bits:bc, e.g. 5,4:2 — got `{raw}`"),
    })?;
    let bits: Vec<u32> = beams
        .split(',')
        .map(|tok| {
            tok.trim().parse::<u32>().map_err(|_| Error::Config {
                field: "alloc".into(),
                message: format!("bad beam bits `{tok}`"),
            })
        })
        .collect::<Result<_>>()?;
    let b_c = bc.trim().parse::<u32>().map_err(|_| Error::Config {
        field: "alloc".into(),
        message: format!("bad combiner bits `{bc}`"),
    })?;
    Ok(FeedbackAllocation::new(bits, b_c))
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let arrays = parse_arrays(&args.arrays)?;
    let p_set = parse_usize_list(&args.p_set, "p_set")?;
    let allocs: Vec<FeedbackAllocation> =
        args.allocs.iter().map(|raw| parse_alloc(raw)).collect::<Result<_>>()?;
    let mut out = open_out(&args.out)?;
    writeln!(
        out,
        "m_v,m_h,p_count,n_beams,bits,b_c,g_bq,g_bc,g_total,empirical_gain,empirical_stderr,spacing_warning,combining_proxy"
    )?;
    for geom in &arrays {
        let report = analytic_report(geom, &allocs, &p_set);
        if report.spacing_warning {
            eprintln!(
                "warning: {}x{} spacing (d_v={}, d_h={}) breaks the half-wavelength assumption behind the closed forms",
                geom.m_v, geom.m_h, geom.d_v, geom.d_h
            );
        }
        for row in &report.rows {
            // Optional Monte Carlo column for two-beam allocations, on the
            // same unnormalized scale as the closed forms.
            let empirical = if args.trials > 0 && row.n_beams == 2 {
                match proposed_unnormalized_gain(
                    geom,
                    row.bits_per_beam[0],
                    row.bits_per_beam[1],
                    row.b_c,
                    row.p_count,
                    args.trials,
                    args.seed,
                ) {
                    Ok((mean, se)) => format!("{mean},{se}"),
                    Err(_) => ",".into(),
                }
            } else {
                ",".into()
            };
            let bits = row
                .bits_per_beam
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join("|");
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                row.m_v,
                row.m_h,
                row.p_count,
                row.n_beams,
                bits,
                row.b_c,
                row.g_bq,
                row.g_bc,
                row.g_total,
                empirical,
                report.spacing_warning,
                report.combining_proxy_used
            )?;
        }
    }
    Ok(())
}

enum CompareScheme {
    Narrowband(NarrowbandScheme),
    Wideband { alloc: WidebandAllocation, w: usize, l: usize, r: usize, spacing: f64, f_c: f64 },
}

fn parse_scheme(tok: &str) -> Result<CompareScheme> {
    if let Some(s) = NarrowbandScheme::preset(tok) {
        return Ok(CompareScheme::Narrowband(s));
    }
    if let Some(rest) = tok.strip_prefix("wideband:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 2 {
            return Err(Error::Config {
                field: "schemes".into(),
                message: format!("expected wideband:BW1,BW2,BN1,BN2,BC:W,L,R — got `{tok}`"),
            });
        }
        let bits = parse_usize_list(parts[0], "schemes")?;
        let dims = parse_usize_list(parts[1], "schemes")?;
        if bits.len() != 5 || !(dims.len() == 3 || dims.len() == 5) {
            return Err(Error::Config {
                field: "schemes".into(),
                message: "wideband scheme needs 5 bit fields and 3 grid fields".into(),
            });
        }
        let alloc = WidebandAllocation::new(
            bits[0] as u32,
            bits[1] as u32,
            bits[2] as u32,
            bits[3] as u32,
            bits[4] as u32,
        )?;
        return Ok(CompareScheme::Wideband {
            alloc,
            w: dims[0],
            l: dims[1],
            r: dims[2],
            spacing: if dims.len() == 5 { dims[3] as f64 } else { 15e3 },
            f_c: if dims.len() == 5 { dims[4] as f64 } else { 2e9 },
        });
    }
    Err(Error::Config {
        field: "schemes".into(),
        message: format!("unknown scheme `{tok}` (presets: prop-n-i/ii/iii, enh-kp-i/ii, kp)"),
    })
}

fn run_compare(args: CompareArgs) -> Result<()> {
    let arrays = parse_arrays(&args.arrays)?;
    let p_set = parse_usize_list(&args.p_set, "p_set")?;
    // Wideband scheme tokens contain commas, so `;` separates schemes when
    // present; plain preset lists may use either.
    let sep = if args.schemes.contains(';') { ';' } else { ',' };
    let schemes: Vec<CompareScheme> = args
        .schemes
        .split(sep)
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(parse_scheme)
        .collect::<Result<_>>()?;
    if schemes.is_empty() {
        return Err(Error::Config { field: "schemes".into(), message: "empty".into() });
    }

    let mut groups: Vec<Vec<ExperimentConfig>> = Vec::new();
    for scheme in &schemes {
        let mut group = Vec::new();
        for geom in &arrays {
            let mode = match scheme {
                CompareScheme::Narrowband(s) => ExperimentMode::Narrowband { scheme: *s },
                CompareScheme::Wideband { alloc, w, l, r, spacing, f_c } => ExperimentMode::Wideband {
                    grid: csiq::channel::WidebandGrid::new(*w, *spacing, *f_c, *l, *r)?,
                    alloc: *alloc,
                },
            };
            group.push(ExperimentConfig {
                scenario: "compare".into(),
                geometry: *geom,
                p_set: p_set.clone(),
                delay_profile: match scheme {
                    CompareScheme::Wideband { .. } => DelayProfile::default(),
                    CompareScheme::Narrowband(_) => DelayProfile::Zero,
                },
                mode,
                trials: args.trials,
                seed: args.seed,
            });
        }
        groups.push(group);
    }
    let table = compare(&groups)?;

    // Human-readable table on stdout.
    print!("{:>9}", "array");
    for col in &table.columns {
        print!("  {:>28}", col.scheme);
    }
    println!();
    for (gi, (m_v, m_h)) in table.geometries.iter().enumerate() {
        print!("{:>9}", format!("{m_v}x{m_h}"));
        for col in &table.columns {
            print!("  {:>20.5} ±{:.5}", col.mean_gains[gi], col.stderrs[gi]);
        }
        println!();
    }
    println!("budgets:");
    for col in &table.columns {
        match col.vector_evals {
            Some(v) => println!("  {:<30} feedback {} bits, {} vector evals", col.scheme, col.feedback_bits, v),
            None => println!("  {:<30} feedback {} bits (whole band)", col.scheme, col.feedback_bits),
        }
    }

    // Long-format CSV.
    let mut out = std::fs::File::create(&args.out)?;
    writeln!(out, "m_v,m_h,scheme,feedback_bits,vector_evals,mean_gain,stderr")?;
    for (gi, (m_v, m_h)) in table.geometries.iter().enumerate() {
        for col in &table.columns {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                m_v,
                m_h,
                col.scheme,
                col.feedback_bits,
                col.vector_evals.map(|v| v.to_string()).unwrap_or_default(),
                col.mean_gains[gi],
                col.stderrs[gi]
            )?;
        }
    }
    println!("wrote comparison CSV to {}", args.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn array_and_alloc_parsing() {
        let arrays = parse_arrays("4x4, 8x8").unwrap();
        assert_eq!(arrays.len(), 2);
        assert_eq!((arrays[1].m_v, arrays[1].m_h), (8, 8));
        assert!(parse_arrays("4by4").is_err());

        let alloc = parse_alloc("5,4:2").unwrap();
        assert_eq!(alloc.bits_per_beam(), &[5, 4]);
        assert_eq!(alloc.b_c(), 2);
        assert!(parse_alloc("5,4").is_err());
    }

    #[test]
    fn scheme_parsing() {
        assert!(matches!(
            parse_scheme("prop-n-i").unwrap(),
            CompareScheme::Narrowband(NarrowbandScheme::Proposed { b1: 5, b2: 4, b_c: 2 })
        ));
        match parse_scheme("wideband:5,5,3,2,2:600,4,2").unwrap() {
            CompareScheme::Wideband { alloc, w, l, r, .. } => {
                assert_eq!((alloc.b_w1, alloc.b_n1), (5, 3));
                assert_eq!((w, l, r), (600, 4, 2));
            }
            _ => panic!("expected wideband scheme"),
        }
        assert!(parse_scheme("bogus").is_err());
    }
}

fn selftest() -> Result<()> {
    use csiq::analysis::{complexity_budget, BudgetScheme};
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "[PASS]" } else { "[FAIL]" });
        if !ok {
            failures += 1;
        }
    };

    check(
        "budget table rows",
        complexity_budget(BudgetScheme::Proposed { b1: 5, b2: 4, b_c: 2 }) == (21, 3072)
            && complexity_budget(BudgetScheme::Kp { b1: 11 }) == (22, 4096)
            && complexity_budget(BudgetScheme::EnhancedKp { b1: 5, b2: 5 }) == (22, 2176),
    );
    check("order statistics", {
        (order_stat_gain(3, 1).unwrap() - 11.0 / 6.0).abs() < 1e-12
            && (order_stat_gain(5, 2).unwrap() - 77.0 / 60.0).abs() < 1e-12
    });
    check("combining gain limits", {
        (gbc_closed(1) - 0.5).abs() < 1e-12 && (gbc_closed(4) - 0.9502).abs() < 1e-4
    });
    check("dft correlation limit", (gamma_sq(4, 20) - 1.0).abs() < 1e-6);

    // Small deterministic campaign, twice.
    let geom = UpaGeometry::new(4, 4, 0.5, 0.5).unwrap();
    let config = ExperimentConfig {
        scenario: "selftest".into(),
        geometry: geom,
        p_set: vec![3, 4, 5],
        delay_profile: DelayProfile::Zero,
        mode: ExperimentMode::Narrowband {
            scheme: NarrowbandScheme::Proposed { b1: 3, b2: 2, b_c: 2 },
        },
        trials: 64,
        seed: 2024,
    };
    let a = run_trials(&config)?;
    let b = run_trials(&config)?;
    check("seeded campaign deterministic", a.mean_gain == b.mean_gain && a.stderr == b.stderr);
    check(
        "normalized gain in range",
        a.mean_gain > 0.0 && a.mean_gain <= 1.0 && a.stderr >= 0.0,
    );
    check("expected gain consistency", {
        let alloc = FeedbackAllocation::new(vec![4, 3], 2);
        let g = expected_gain(3, &alloc, &geom);
        g > 0.0 && (g - csiq::analysis::gbq_lower(3, &[4, 3], &geom) * gbc_closed(4)).abs() < 1e-12
    });

    if failures > 0 {
        return Err(Error::InvalidInput(format!("{failures} selftest check(s) failed")));
    }
    println!("selftest: all checks passed");
    Ok(())
}
