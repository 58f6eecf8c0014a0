//! Command-line front end: binds the library modules into reproduction
//! recipes and emits machine-readable artifacts (JSON, CSV, PGM).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use boundsim::expsim::{
    measurement_budget, probabilities_from_counts, reconstruct, retroactive_mix,
    simulate_mcp_counts, simulate_tomography_counts, tomography_settings, NoiseModel,
};
use boundsim::mubs::{mub_family, verify_mub};
use boundsim::numkernel::{fidelity, NumError, HERM_TOL};
use boundsim::search::{
    analyze_bound_region, horodecki_sweep, optimize_witness, scan_slice, CellClass, ClassifiedGrid,
    OptimizeBudget, SliceSpec,
};
use boundsim::simplex::{
    coeffs_from_family, equivalent_variants, ppt_min_eig_coeffs, state_from_coeffs, FamilyParams,
    SimplexCoeffs,
};
use boundsim::witness::{report_from_tables, LabelingMode, McpEvaluator};

#[derive(Parser)]
#[command(
    name = "boundsim",
    version,
    about = "Bound-entanglement detection for bipartite qudits: MUB witness, PPT, scans, and experiment simulation"
)]
struct Cli {
    /// JSON file supplying defaults for any option; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed for statistical subcommands.
    #[arg(long, global = true, env = "BOUNDSIM_SEED")]
    seed: Option<u64>,
    /// Worker threads for scan/optimize (results are independent of N).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Construct and verify a complete family of mutually unbiased bases.
    Mubs(MubsArgs),
    /// Expand a family member into its simplex coefficient table.
    State(StateArgs),
    /// Evaluate the MUB correlation sum and witness 2 - I_{d+1}.
    Witness(WitnessArgs),
    /// Minimum eigenvalue of the partial transpose.
    Ppt(StateArgs),
    /// Classify a 2D slice through the d=3 simplex.
    Scan(ScanArgs),
    /// Minimize the witness over the family under physicality + PPT.
    Optimize(OptimizeArgs),
    /// Sweep the Horodecki-state parameter.
    Horodecki(HorodeckiArgs),
    /// Simulate the photon-counting experiment.
    Simulate(SimulateArgs),
    /// Emit the overcomplete tomography settings.
    Tomography(TomographyArgs),
    /// Enumerate the 72 unitarily equivalent protocol variants.
    Variants(StateArgs),
    /// Measurement-budget formulas N_QST, N_MCP1, N_MCP2.
    Budget(BudgetArgs),
}

#[derive(clap::Args)]
struct OutputArgs {
    /// Write the JSON report here (default: stdout).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write a CSV artifact here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(clap::Args)]
struct MubsArgs {
    #[arg(long)]
    d: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(clap::Args)]
struct StateArgs {
    #[arg(long)]
    d: Option<usize>,
    /// Family parameters q1,q2,q3[,q4].
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    /// JSON file with an explicit coefficient table {"d":..,"c":[..]}.
    #[arg(long)]
    state_file: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelingArg {
    /// Fixed relabeling from the d=3 reference protocol.
    Methods,
    /// Per-basis-pair maximization over outcome relabelings.
    Max,
}

impl LabelingArg {
    fn mode(self) -> LabelingMode {
        match self {
            LabelingArg::Methods => LabelingMode::MethodsD3,
            LabelingArg::Max => LabelingMode::Maximize,
        }
    }
}

#[derive(clap::Args)]
struct WitnessArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, value_enum)]
    labeling: Option<LabelingArg>,
}

#[derive(clap::Args)]
struct ScanArgs {
    #[arg(long, allow_hyphen_values = true)]
    q3: Option<f64>,
    /// q1 window as lo,hi.
    #[arg(long, allow_hyphen_values = true)]
    q1_range: Option<String>,
    /// q2 window as lo,hi.
    #[arg(long, allow_hyphen_values = true)]
    q2_range: Option<String>,
    /// Grid points per axis.
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, value_enum)]
    labeling: Option<LabelingArg>,
    /// Write a P5 heatmap of the classification here.
    #[arg(long)]
    pgm: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(clap::Args)]
struct OptimizeArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_enum)]
    labeling: Option<LabelingArg>,
    /// Coarse-grid points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Local-descent starting points.
    #[arg(long)]
    starts: Option<usize>,
    /// Nelder-Mead iterations per start.
    #[arg(long)]
    iters: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(clap::Args)]
struct HorodeckiArgs {
    /// Lambda window as lo,hi (within [0, 5]).
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, value_enum)]
    labeling: Option<LabelingArg>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Protocol {
    Mcp,
    Tomography,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[command(flatten)]
    state: StateArgs,
    /// Counting model as peak,background.
    #[arg(long, allow_hyphen_values = true)]
    noise: Option<String>,
    #[arg(long, value_enum)]
    protocol: Option<Protocol>,
    #[arg(long, value_enum)]
    labeling: Option<LabelingArg>,
}

#[derive(clap::Args)]
struct TomographyArgs {
    #[arg(long)]
    d: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(clap::Args)]
struct BudgetArgs {
    #[arg(long)]
    d: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

// ---------------------------------------------------------------------------
// Config file + option resolution
// ---------------------------------------------------------------------------

struct Config(serde_json::Map<String, Value>);

impl Config {
    fn load(path: &Option<PathBuf>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Config(Default::default()));
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let value: Value =
            serde_json::from_str(&text).with_context(|| "config is not valid JSON")?;
        match value {
            Value::Object(map) => Ok(Config(map)),
            _ => bail!("config must be a JSON object"),
        }
    }

    fn usize(&self, key: &str) -> Option<usize> {
        self.0.get(key).and_then(Value::as_u64).map(|v| v as usize)
    }

    fn u64(&self, key: &str) -> Option<u64> {
        self.0.get(key).and_then(Value::as_u64)
    }

    fn f64(&self, key: &str) -> Option<f64> {
        self.0.get(key).and_then(Value::as_f64)
    }

    fn string(&self, key: &str) -> Option<String> {
        self.0.get(key).and_then(Value::as_str).map(str::to_owned)
    }
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        bail!("{what} must be two comma-separated numbers, got {text:?}");
    }
    Ok((
        parts[0].trim().parse().with_context(|| format!("bad {what}"))?,
        parts[1].trim().parse().with_context(|| format!("bad {what}"))?,
    ))
}

fn parse_q(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("bad family parameter {s:?}"))
        })
        .collect()
}

/// Resolves the state input: exactly one of family parameters or an explicit
/// coefficient file.
fn load_coeffs(args: &StateArgs, cfg: &Config) -> Result<SimplexCoeffs> {
    let q = args.q.clone().or_else(|| cfg.string("q"));
    let file = args.state_file.clone().or_else(|| cfg.string("state_file").map(Into::into));
    match (q, file) {
        (Some(_), Some(_)) => bail!("--q and --state-file are mutually exclusive"),
        (None, None) => bail!("either --q or --state-file is required"),
        (Some(q), None) => {
            let vals = parse_q(&q)?;
            let d = args.d.or_else(|| cfg.usize("d")).unwrap_or(3);
            let params = match (d, vals.as_slice()) {
                (3, [q1, q2, q3]) => FamilyParams::new3(*q1, *q2, *q3),
                (3, _) => bail!("d=3 takes exactly q1,q2,q3"),
                (_, [q1, q2, q3, q4]) => FamilyParams {
                    d,
                    q1: *q1,
                    q2: *q2,
                    q3: *q3,
                    q4: Some(*q4),
                },
                _ => bail!("d={d} takes exactly q1,q2,q3,q4"),
            };
            Ok(coeffs_from_family(&params)?)
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("cannot read state file {}", path.display()))?;
            let coeffs: SimplexCoeffs =
                serde_json::from_str(&text).context("state file is not a coefficient table")?;
            if coeffs.c.len() != coeffs.d * coeffs.d {
                bail!(
                    "coefficient table has {} entries for d={}",
                    coeffs.c.len(),
                    coeffs.d
                );
            }
            Ok(coeffs)
        }
    }
}

// ---------------------------------------------------------------------------
// Artifact emission
// ---------------------------------------------------------------------------

/// 12 significant digits, '.' decimal, locale-free.
fn fmt_f(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{:.11e}", x)
}

fn emit_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => {
            fs::write(p, text.as_bytes())
                .with_context(|| format!("cannot write {}", p.display()))?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn emit_csv(path: &Option<PathBuf>, header: &str, rows: &[String]) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    fs::write(path, out.as_bytes()).with_context(|| format!("cannot write {}", path.display()))
}

fn class_gray(class: CellClass) -> u8 {
    match class {
        CellClass::Unphysical => 0,
        CellClass::FreeEntangled => 85,
        CellClass::SeparableOrUndetected => 170,
        CellClass::BoundEntangled => 255,
    }
}

fn write_pgm(path: &Path, grid: &ClassifiedGrid) -> Result<()> {
    let n = grid.spec.resolution;
    let mut out = Vec::with_capacity(n * n + 32);
    out.extend_from_slice(format!("P5\n{n} {n}\n255\n").as_bytes());
    // Top row = largest q2 so the image matches plot orientation.
    for iy in (0..n).rev() {
        for ix in 0..n {
            out.push(class_gray(grid.cell(iy, ix).class));
        }
    }
    let mut f =
        fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    f.write_all(&out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Subcommand drivers
// ---------------------------------------------------------------------------

fn run_mubs(args: &MubsArgs, cfg: &Config) -> Result<()> {
    let d = args.d.or_else(|| cfg.usize("d")).unwrap_or(3);
    let fam = mub_family(d)?;
    let report = verify_mub(&fam);
    let bases: Vec<Vec<Vec<[f64; 2]>>> = fam
        .bases
        .iter()
        .map(|b| {
            b.iter()
                .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
                .collect()
        })
        .collect();
    emit_json(
        &args.out.json,
        &json!({
            "d": d,
            "bases": fam.bases.len(),
            "verification": report,
            "vectors": bases,
        }),
    )?;
    let mut rows = Vec::new();
    for (b, basis) in fam.bases.iter().enumerate() {
        for (v, ket) in basis.iter().enumerate() {
            for (c, z) in ket.iter().enumerate() {
                rows.push(format!("{b},{v},{c},{},{}", fmt_f(z.re), fmt_f(z.im)));
            }
        }
    }
    emit_csv(&args.out.csv, "basis,vector,component,re,im", &rows)
}

fn run_state(args: &StateArgs, cfg: &Config) -> Result<()> {
    let coeffs = load_coeffs(args, cfg)?;
    let rho = state_from_coeffs(&coeffs)?;
    let spectrum = boundsim::numkernel::herm_eigvals(&rho, HERM_TOL)?;
    let min_pt = ppt_min_eig_coeffs(&coeffs)?;
    emit_json(
        &args.out.json,
        &json!({
            "d": coeffs.d,
            "coeffs": coeffs,
            "sum": coeffs.sum(),
            "min_coeff": coeffs.min(),
            "physical": coeffs.is_physical(1e-10),
            "spectrum": spectrum.values,
            "min_pt_eig": min_pt,
            "ppt": min_pt >= boundsim::search::PPT_FEASIBLE_TOL,
        }),
    )?;
    let d = coeffs.d;
    let mut rows = Vec::new();
    for k in 0..d {
        for l in 0..d {
            rows.push(format!("{k},{l},{}", fmt_f(coeffs.get(k, l))));
        }
    }
    emit_csv(&args.out.csv, "k,l,c", &rows)
}

fn run_witness(args: &WitnessArgs, cfg: &Config) -> Result<()> {
    let coeffs = load_coeffs(&args.state, cfg)?;
    let mode = resolve_labeling(args.labeling, cfg, LabelingArg::Methods);
    let fam = mub_family(coeffs.d)?;
    let report = McpEvaluator::new(&fam)?.eval(&coeffs, &mode)?;
    emit_json(&args.state.out.json, &report)?;
    let rows: Vec<String> = report
        .c_values
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{i},{}", fmt_f(*c)))
        .collect();
    emit_csv(&args.state.out.csv, "basis,correlation", &rows)
}

fn run_ppt(args: &StateArgs, cfg: &Config) -> Result<()> {
    let coeffs = load_coeffs(args, cfg)?;
    let min_pt = ppt_min_eig_coeffs(&coeffs)?;
    emit_json(
        &args.out.json,
        &json!({
            "d": coeffs.d,
            "min_pt_eig": min_pt,
            "ppt": min_pt >= boundsim::search::PPT_FEASIBLE_TOL,
        }),
    )
}

fn resolve_labeling(flag: Option<LabelingArg>, cfg: &Config, default: LabelingArg) -> LabelingMode {
    flag.or_else(|| match cfg.string("labeling").as_deref() {
        Some("methods") => Some(LabelingArg::Methods),
        Some("max") => Some(LabelingArg::Max),
        _ => None,
    })
    .unwrap_or(default)
    .mode()
}

fn run_scan(args: &ScanArgs, cfg: &Config) -> Result<()> {
    let q1_range = match args.q1_range.clone().or_else(|| cfg.string("q1_range")) {
        Some(t) => parse_pair(&t, "--q1-range")?,
        None => (-1.0, 1.0),
    };
    let q2_range = match args.q2_range.clone().or_else(|| cfg.string("q2_range")) {
        Some(t) => parse_pair(&t, "--q2-range")?,
        None => (-2.4, -0.8),
    };
    let spec = SliceSpec {
        q3: args.q3.or_else(|| cfg.f64("q3")).unwrap_or(-0.5776),
        q1_range,
        q2_range,
        resolution: args.resolution.or_else(|| cfg.usize("resolution")).unwrap_or(200),
    };
    let mode = resolve_labeling(args.labeling, cfg, LabelingArg::Methods);
    let grid = scan_slice(&spec, &mode)?;
    let region = analyze_bound_region(&grid);
    let mut per_class = [0usize; 4];
    for cell in &grid.cells {
        per_class[match cell.class {
            CellClass::Unphysical => 0,
            CellClass::SeparableOrUndetected => 1,
            CellClass::FreeEntangled => 2,
            CellClass::BoundEntangled => 3,
        }] += 1;
    }
    emit_json(
        &args.out.json,
        &json!({
            "spec": spec,
            "cells": grid.cells.len(),
            "unphysical": per_class[0],
            "separable_or_undetected": per_class[1],
            "free_entangled": per_class[2],
            "bound_entangled": per_class[3],
            "region": region,
        }),
    )?;
    let rows: Vec<String> = grid
        .cells
        .iter()
        .map(|c| {
            format!(
                "{},{},{},{},{}",
                fmt_f(c.q1),
                fmt_f(c.q2),
                c.class.label(),
                fmt_f(c.witness),
                fmt_f(c.min_pt_eig)
            )
        })
        .collect();
    emit_csv(&args.out.csv, "q1,q2,class,witness,min_pt_eig", &rows)?;
    if let Some(pgm) = &args.pgm {
        write_pgm(pgm, &grid)?;
    }
    Ok(())
}

fn run_optimize(args: &OptimizeArgs, cfg: &Config) -> Result<()> {
    let d = args.d.or_else(|| cfg.usize("d")).unwrap_or(3);
    let mode = resolve_labeling(args.labeling, cfg, LabelingArg::Max);
    let defaults = OptimizeBudget::default();
    let budget = OptimizeBudget {
        grid_resolution: args.grid.or_else(|| cfg.usize("grid")).unwrap_or(defaults.grid_resolution),
        refine_starts: args.starts.or_else(|| cfg.usize("starts")).unwrap_or(defaults.refine_starts),
        refine_iters: args.iters.or_else(|| cfg.usize("iters")).unwrap_or(defaults.refine_iters),
    };
    let result = optimize_witness(d, &mode, &budget)?;
    emit_json(&args.out.json, &result)?;
    let rows: Vec<String> = result
        .trace
        .iter()
        .enumerate()
        .map(|(i, w)| format!("{i},{}", fmt_f(*w)))
        .collect();
    emit_csv(&args.out.csv, "stage,best_witness", &rows)
}

fn run_horodecki(args: &HorodeckiArgs, cfg: &Config) -> Result<()> {
    let (lo, hi) = match args.range.clone().or_else(|| cfg.string("range")) {
        Some(t) => parse_pair(&t, "--range")?,
        None => (0.0, 5.0),
    };
    let step = args.step.or_else(|| cfg.f64("step")).unwrap_or(0.05);
    let mode = resolve_labeling(args.labeling, cfg, LabelingArg::Max);
    let points = horodecki_sweep(lo, hi, step, &mode)?;
    emit_json(&args.out.json, &points)?;
    let rows: Vec<String> = points
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{}",
                fmt_f(p.lambda),
                fmt_f(p.min_pt_eig),
                fmt_f(p.witness),
                p.ppt,
                p.bound_entangled
            )
        })
        .collect();
    emit_csv(
        &args.out.csv,
        "lambda,min_pt_eig,witness,ppt,bound_entangled",
        &rows,
    )
}

fn parse_noise(text: Option<String>, cfg: &Config, seed: u64) -> Result<NoiseModel> {
    let text = text.or_else(|| cfg.string("noise"));
    let (peak, background) = match text {
        Some(t) => parse_pair(&t, "--noise")?,
        None => (1500.0, 5.0),
    };
    Ok(NoiseModel::new(peak, background, seed)?)
}

fn run_simulate(args: &SimulateArgs, cfg: &Config, seed: u64) -> Result<()> {
    let coeffs = load_coeffs(&args.state, cfg)?;
    let noise = parse_noise(args.noise.clone(), cfg, seed)?;
    let protocol = args.protocol.unwrap_or(match cfg.string("protocol").as_deref() {
        Some("tomography") => Protocol::Tomography,
        _ => Protocol::Mcp,
    });
    let fam = mub_family(coeffs.d)?;
    match protocol {
        Protocol::Mcp => {
            let mode = resolve_labeling(args.labeling, cfg, LabelingArg::Methods);
            let records = retroactive_mix(&simulate_mcp_counts(&fam, &noise)?, &coeffs)?;
            let d = coeffs.d;
            let mut tables = Vec::with_capacity(fam.bases.len());
            for m in 0..fam.bases.len() {
                let gamma: Vec<f64> = records[m * d * d..(m + 1) * d * d]
                    .iter()
                    .map(|r| r.mixed)
                    .collect();
                tables.push(probabilities_from_counts(&gamma)?);
            }
            let report = report_from_tables(d, &tables, &mode)?;
            emit_json(
                &args.state.out.json,
                &json!({ "noise": noise, "protocol": "mcp", "report": report }),
            )?;
            let rows: Vec<String> = records
                .iter()
                .map(|r| {
                    let per: Vec<String> =
                        r.per_state.iter().map(|c| c.to_string()).collect();
                    format!("{},{},{}", r.setting, per.join(","), fmt_f(r.mixed))
                })
                .collect();
            let per_cols: Vec<String> =
                (0..d * d).map(|i| format!("gamma_{}_{}", i / d, i % d)).collect();
            emit_csv(
                &args.state.out.csv,
                &format!("setting,{},mixed", per_cols.join(",")),
                &rows,
            )
        }
        Protocol::Tomography => {
            let rho = state_from_coeffs(&coeffs)?;
            let set = tomography_settings(coeffs.d);
            let counts = simulate_tomography_counts(&rho, &set, &noise)?;
            let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            let rec = reconstruct(&set, &as_f, &noise)?;
            let fid = fidelity(&rec, &rho)?;
            emit_json(
                &args.state.out.json,
                &json!({
                    "noise": noise,
                    "protocol": "tomography",
                    "settings": set.pair_count(),
                    "fidelity": fid,
                    "budget": measurement_budget(coeffs.d),
                }),
            )?;
            let rows: Vec<String> = counts
                .iter()
                .enumerate()
                .map(|(s, c)| format!("{s},{c}"))
                .collect();
            emit_csv(&args.state.out.csv, "setting,count", &rows)
        }
    }
}

fn run_tomography(args: &TomographyArgs, cfg: &Config) -> Result<()> {
    let d = args.d.or_else(|| cfg.usize("d")).unwrap_or(3);
    if d < 2 {
        bail!("--d must be at least 2");
    }
    let set = tomography_settings(d);
    let kets: Vec<Vec<[f64; 2]>> = set
        .kets
        .iter()
        .map(|k| k.iter().map(|z| [z.re, z.im]).collect())
        .collect();
    emit_json(
        &args.out.json,
        &json!({
            "d": d,
            "kets_per_side": set.kets.len(),
            "pair_settings": set.pair_count(),
            "budget": measurement_budget(d),
            "kets": kets,
        }),
    )?;
    let mut rows = Vec::new();
    for (i, ket) in set.kets.iter().enumerate() {
        for (c, z) in ket.iter().enumerate() {
            rows.push(format!("{i},{c},{},{}", fmt_f(z.re), fmt_f(z.im)));
        }
    }
    emit_csv(&args.out.csv, "ket,component,re,im", &rows)
}

fn run_variants(args: &StateArgs, cfg: &Config) -> Result<()> {
    let coeffs = load_coeffs(args, cfg)?;
    if coeffs.d != 3 {
        bail!("variant enumeration is defined for d=3");
    }
    let params = family_params_of(args, cfg)?;
    let variants = equivalent_variants(&params)?;
    let fam = mub_family(3)?;
    let eval = McpEvaluator::new(&fam)?;
    #[derive(Serialize)]
    struct Row<'a> {
        index: usize,
        #[serde(flatten)]
        variant: &'a boundsim::simplex::Variant,
        witness: f64,
        min_pt_eig: f64,
    }
    let mut json_rows = Vec::new();
    let mut csv_rows = Vec::new();
    for (index, v) in variants.iter().enumerate() {
        let witness = eval
            .eval(&v.coeffs, &LabelingMode::Maximize)?
            .witness
            .ok_or_else(|| anyhow!("incomplete family"))?;
        let min_pt_eig = ppt_min_eig_coeffs(&v.coeffs)?;
        csv_rows.push(format!(
            "{index},{}{},{}{},{},{}",
            v.vertex.k,
            v.vertex.l,
            v.line[1].k,
            v.line[1].l,
            fmt_f(witness),
            fmt_f(min_pt_eig)
        ));
        json_rows.push(serde_json::to_value(Row {
            index,
            variant: v,
            witness,
            min_pt_eig,
        })?);
    }
    emit_json(&args.out.json, &json_rows)?;
    emit_csv(
        &args.out.csv,
        "index,vertex,line_direction,witness,min_pt_eig",
        &csv_rows,
    )
}

/// Re-derives the family parameters for subcommands that need them rather
/// than the expanded table.
fn family_params_of(args: &StateArgs, cfg: &Config) -> Result<FamilyParams> {
    let q = args
        .q
        .clone()
        .or_else(|| cfg.string("q"))
        .ok_or_else(|| anyhow!("this subcommand needs family parameters (--q)"))?;
    let vals = parse_q(&q)?;
    match vals.as_slice() {
        [q1, q2, q3] => Ok(FamilyParams::new3(*q1, *q2, *q3)),
        _ => bail!("expected q1,q2,q3"),
    }
}

fn run_budget(args: &BudgetArgs, cfg: &Config) -> Result<()> {
    let d = args.d.or_else(|| cfg.usize("d")).unwrap_or(3);
    if d < 2 {
        bail!("--d must be at least 2");
    }
    let b = measurement_budget(d);
    emit_json(&args.out.json, &json!({ "d": d, "budget": b }))?;
    emit_csv(
        &args.out.csv,
        "n_qst,n_mcp1,n_mcp2",
        &[format!("{},{},{}", b.n_qst, b.n_mcp1, b.n_mcp2)],
    )?;
    if args.out.json.is_some() {
        println!("{},{},{}", b.n_qst, b.n_mcp1, b.n_mcp2);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = Config::load(&cli.config)?;
    if let Some(threads) = cli.threads.or_else(|| cfg.usize("threads")) {
        if threads > 0 {
            // Ignore "already initialized": only the first builder wins.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    let seed = cli.seed.or_else(|| cfg.u64("seed")).unwrap_or(0);
    match &cli.cmd {
        Cmd::Mubs(a) => run_mubs(a, &cfg),
        Cmd::State(a) => run_state(a, &cfg),
        Cmd::Witness(a) => run_witness(a, &cfg),
        Cmd::Ppt(a) => run_ppt(a, &cfg),
        Cmd::Scan(a) => run_scan(a, &cfg),
        Cmd::Optimize(a) => run_optimize(a, &cfg),
        Cmd::Horodecki(a) => run_horodecki(a, &cfg),
        Cmd::Simulate(a) => run_simulate(a, &cfg, seed),
        Cmd::Tomography(a) => run_tomography(a, &cfg),
        Cmd::Variants(a) => run_variants(a, &cfg),
        Cmd::Budget(a) => run_budget(a, &cfg),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err:#}");
        // Numerical failures exit 3, validation problems exit 2.
        let numerical = err.chain().any(|c| c.downcast_ref::<NumError>().is_some());
        std::process::exit(if numerical { 3 } else { 2 });
    }
}
