use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cuspforge_core::assembly::{assemble, ManifoldAssembly, Region};
use cuspforge_core::entropy::{
    bw_bound, entropy_chain_report, model_volume_entropy, rescale_bound, rescale_eps_for, EntropyCertificate,
    DEFAULT_SEED,
};
use cuspforge_core::oracle::{oracle_equivalence, OracleSample, FD_STEP};
use cuspforge_core::warp::{
    certify_pinching, make_cutoff_with, sectional_curvatures, tube_profile, CurvatureBounds, CutoffProfile,
    CutoffSearch, PinchingCertificate, Verdict, PINCHING_TOL,
};
use serde::Serialize;

use crate::config::{load_config, LoadedConfig, RunConfig, RunMode, ToleranceSection};
use crate::svg::{self, Panel, Series};
use crate::{Cli, Command, Flags, OUT_ENV};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

pub const CUTOFF_COLUMNS: [&str; 11] =
    ["t", "s", "s'", "s''", "c", "c'", "c''", "K_t_phi", "K_t_U", "K_phi_U", "K_U_V"];
pub const DEFAULT_EPS: f64 = 0.1;
pub const DEFAULT_DIM: usize = 4;
pub const ORACLE_SAMPLES: usize = 100;
pub const ORACLE_TOL: f64 = 1e-5;
pub const ORACLE_SYMMETRY_TOL: f64 = 1e-6;
/// Allowed distance of the model entropy from `n - 1`.
pub const MODEL_ENTROPY_TOL: f64 = 0.1;

pub fn dispatch(cli: &Cli) -> Result<Outcome> {
    let f = &cli.flags;
    match &cli.command {
        Command::Cutoff => cmd_cutoff(f),
        Command::Assemble => cmd_assemble(f),
        Command::Sweep => cmd_sweep(f),
        Command::Entropy { r_max } => cmd_entropy(f, *r_max),
        Command::OracleCheck => cmd_oracle_check(f),
    }
}

/// `CUSPFORGE_OUT`, then `--out`, then the config's `out_dir`, then `./cuspforge-out`.
pub fn resolve_out_dir(flags: &Flags, cfg: Option<&LoadedConfig>) -> PathBuf {
    if let Some(v) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(v);
    }
    if let Some(o) = &flags.out {
        return o.clone();
    }
    if let Some(c) = cfg {
        if let Some(d) = &c.config.out_dir {
            return c.base_dir().join(d);
        }
    }
    PathBuf::from("cuspforge-out")
}

fn prepare_out(flags: &Flags, cfg: Option<&LoadedConfig>) -> Result<PathBuf> {
    let dir = resolve_out_dir(flags, cfg);
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
    log::info!("wrote {}", p.display());
    Ok(p)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(dir, name, &s)
}

fn single_eps(flags: &Flags) -> Result<Option<f64>> {
    match flags.eps.as_slice() {
        [] => Ok(None),
        [e] => Ok(Some(*e)),
        _ => bail!("this command takes a single --eps value"),
    }
}

/// Loads `--config` and folds the command-line overrides into it.
pub fn load_with_overrides(flags: &Flags, path: &Path) -> Result<LoadedConfig> {
    let mut cfg = load_config(path)?;
    apply_overrides(&mut cfg.config, flags)?;
    cfg.config.validate().with_context(|| format!("in {}", path.display()))?;
    Ok(cfg)
}

fn apply_overrides(c: &mut RunConfig, flags: &Flags) -> Result<()> {
    if let Some(e) = single_eps(flags)? {
        c.eps = e;
    }
    if let Some(n) = flags.dim {
        c.dimension = n;
    }
    if let Some(s) = flags.samples {
        c.monte_carlo.samples = s;
    }
    if let Some(s) = flags.seed {
        c.monte_carlo.seed = s;
    }
    c.options.allow_dim3 |= flags.allow_dim3;
    c.options.paper_generator_swap |= flags.paper_generator_swap;
    Ok(())
}

fn require_config(flags: &Flags, cmd: &str) -> Result<LoadedConfig> {
    let p = flags.config.as_ref().ok_or_else(|| anyhow!("{cmd} needs --config PATH"))?;
    load_with_overrides(flags, p)
}

// ---------------------------------------------------------------- cutoff

#[derive(Debug, Serialize)]
pub struct CsvSelfCheck {
    pub rows: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub target: (f64, f64),
    pub tol: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Serialize)]
pub struct CutoffReport {
    pub eps: f64,
    pub n: usize,
    pub cutoff: CutoffProfile,
    /// Closed-form `(max |phi'|, max |phi''|)`.
    pub derivative_bounds: (f64, f64),
    pub csv_step: f64,
    pub pinching: PinchingCertificate,
    /// The same profile against `[-1, 0]`; failing here shows the budget is used.
    pub unbudgeted: PinchingCertificate,
    pub csv_check: CsvSelfCheck,
    pub verdict: Verdict,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Profile grid on `[0, r_eps + 2]` in the CSV column layout.
pub fn cutoff_csv(cut: &CutoffProfile, n: usize, step: f64) -> Result<String> {
    let w = tube_profile(cut);
    let reach = cut.r_eps + 2.0;
    let rows = (reach / step).ceil() as usize;
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(CUTOFF_COLUMNS)?;
    for i in 0..=rows {
        let t = if i == rows { reach } else { step * i as f64 };
        let v = w.values(t)?;
        let k = sectional_curvatures(&w, t, n)?;
        wr.write_record([
            t.to_string(),
            v.s.to_string(),
            v.ds.to_string(),
            v.d2s.to_string(),
            v.c.to_string(),
            v.dc.to_string(),
            v.d2c.to_string(),
            fmt_opt(k.k_t_phi),
            k.k_t_u.to_string(),
            fmt_opt(k.k_phi_u),
            fmt_opt(k.k_u_v),
        ])?;
    }
    Ok(String::from_utf8(wr.into_inner()?)?)
}

/// Re-reads a cutoff CSV and checks every curvature cell against `[lo, hi]`.
pub fn check_cutoff_csv(path: &Path, lo: f64, hi: f64, tol: f64) -> Result<CsvSelfCheck> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = rd.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CUTOFF_COLUMNS {
        bail!("unexpected columns in {}: {:?}", path.display(), header);
    }
    let (mut k_min, mut k_max, mut rows) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    for rec in rd.records() {
        let rec = rec?;
        rows += 1;
        for cell in rec.iter().skip(7).filter(|c| !c.is_empty()) {
            let k: f64 = cell.parse().with_context(|| format!("bad curvature cell {cell:?}"))?;
            k_min = k_min.min(k);
            k_max = k_max.max(k);
        }
    }
    let ok = rows > 0 && k_min >= lo - tol && k_max <= hi + tol;
    Ok(CsvSelfCheck { rows, k_min, k_max, target: (lo, hi), tol, verdict: Verdict::from_bool(ok) })
}

pub fn cutoff_svg(cut: &CutoffProfile, n: usize, step: f64) -> Result<String> {
    let w = tube_profile(cut);
    let reach = cut.r_eps + 2.0;
    let rows = (reach / step).ceil() as usize;
    let ts: Vec<f64> = (0..=rows).map(|i| if i == rows { reach } else { step * i as f64 }).collect();
    let mut phi = Vec::new();
    let mut s_n = Vec::new();
    let mut c_n = Vec::new();
    let mut ks: [Vec<(f64, f64)>; 4] = Default::default();
    for &t in &ts {
        let v = w.values(t)?;
        phi.push((t, cut.eval(t)));
        s_n.push((t, 2.0 * v.s * (-t).exp()));
        c_n.push((t, 2.0 * v.c * (-t).exp()));
        let k = sectional_curvatures(&w, t, n)?;
        for (slot, val) in ks.iter_mut().zip([k.k_t_phi, Some(k.k_t_u), k.k_phi_u, k.k_u_v]) {
            if let Some(val) = val {
                slot.push((t, val));
            }
        }
    }
    let warp = Panel {
        title: format!("cutoff and normalized warps, eps = {}, r_eps = {:.4}", cut.eps_budget, cut.r_eps),
        x_range: (0.0, reach),
        y_range: (0.0, 2.0),
        series: vec![
            Series { label: "phi".into(), color: "#1f77b4", points: phi },
            Series { label: "2 s e^-t".into(), color: "#d62728", points: s_n },
            Series { label: "2 c e^-t".into(), color: "#2ca02c", points: c_n },
        ],
        guides: vec![1.0],
    };
    let names = ["K_t_phi", "K_t_U", "K_phi_U", "K_U_V"];
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let curv = Panel {
        title: format!("sectional curvatures, n = {n}"),
        x_range: (0.0, reach),
        y_range: (-1.0 - cut.eps_budget - 0.05, 0.05),
        series: ks
            .into_iter()
            .zip(names.iter().zip(colors))
            .filter(|(p, _)| !p.is_empty())
            .map(|(points, (label, color))| Series { label: (*label).into(), color, points })
            .collect(),
        guides: vec![-1.0 - cut.eps_budget, -1.0, 0.0],
    };
    Ok(svg::render(&[warp, curv]))
}

pub fn run_cutoff(eps: f64, n: usize, tol: &ToleranceSection, out: &Path) -> Result<CutoffReport> {
    if n < 3 {
        bail!("dimension must be >= 3, got {n}");
    }
    if !(tol.csv_step > 0.0) {
        bail!("csv_step must be > 0");
    }
    let search = CutoffSearch { r_ceiling: tol.r_ceiling, grid_step: tol.pinching_grid_step, ..CutoffSearch::default() };
    let cut = make_cutoff_with(eps, &search).with_context(|| format!("no cutoff for eps = {eps}"))?;
    let w = tube_profile(&cut);
    let interval = (0.0, cut.r_eps + 2.0);
    let pinching = certify_pinching(&w, n, interval, CurvatureBounds::pinched(eps, PINCHING_TOL), tol.pinching_grid_step)?;
    let unbudgeted =
        certify_pinching(&w, n, interval, CurvatureBounds::new(-1.0, 0.0, PINCHING_TOL), tol.pinching_grid_step)?;
    let csv_path = write_file(out, "cutoff.csv", &cutoff_csv(&cut, n, tol.csv_step)?)?;
    write_file(out, "cutoff.svg", &cutoff_svg(&cut, n, tol.csv_step)?)?;
    let csv_check = check_cutoff_csv(&csv_path, -1.0 - eps, 0.0, PINCHING_TOL)?;
    let verdict = Verdict::from_bool(pinching.passed() && csv_check.verdict == Verdict::Pass);
    let report = CutoffReport {
        eps,
        n,
        cutoff: cut,
        derivative_bounds: cut.derivative_bounds(),
        csv_step: tol.csv_step,
        pinching,
        unbudgeted,
        csv_check,
        verdict,
    };
    write_json(out, "cutoff.json", &report)?;
    Ok(report)
}

fn cmd_cutoff(flags: &Flags) -> Result<Outcome> {
    let cfg = flags.config.as_ref().map(|p| load_with_overrides(flags, p)).transpose()?;
    let (eps, n, tol) = match &cfg {
        Some(c) => (c.config.eps, c.config.dimension, c.config.tolerances.clone()),
        None => (
            single_eps(flags)?.unwrap_or(DEFAULT_EPS),
            flags.dim.unwrap_or(DEFAULT_DIM),
            ToleranceSection::default(),
        ),
    };
    if !(eps > 0.0 && eps <= 1.0) {
        bail!("eps must lie in (0, 1], got {eps}");
    }
    let out = prepare_out(flags, cfg.as_ref())?;
    let r = run_cutoff(eps, n, &tol, &out)?;
    println!(
        "cutoff eps = {eps}, n = {n}: r_eps = {}, K in [{}, {}], verdict {:?}",
        r.cutoff.r_eps, r.pinching.k_min_margined, r.pinching.k_max_margined, r.verdict
    );
    Ok(Outcome::from_bool(r.verdict == Verdict::Pass))
}

// -------------------------------------------------------------- assemble

#[derive(Debug, Clone, Serialize)]
pub struct LatticeRecord {
    pub file: String,
    pub basis: Vec<Vec<f64>>,
    pub covolume: f64,
}

/// Everything one pipeline run produces, with the config that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct AssemblyReport {
    pub tool: String,
    pub version: String,
    pub config_file: String,
    pub config: RunConfig,
    pub lattices: Vec<LatticeRecord>,
    pub assembly: ManifoldAssembly,
    /// Absent when pinching was not certified.
    pub entropy: Option<EntropyCertificate>,
    /// Ball-volume growth rate of hyperbolic space, for core-only runs.
    pub model_entropy: Option<f64>,
    pub entropy_chain: String,
    pub verdict: Verdict,
}

fn lattice_records(cfg: &LoadedConfig) -> Vec<LatticeRecord> {
    cfg.config
        .lattices
        .iter()
        .zip(&cfg.lattices)
        .map(|(p, l)| LatticeRecord {
            file: p.display().to_string(),
            basis: l.basis_vectors(),
            covolume: l.covolume(),
        })
        .collect()
}

/// `assemble`, `bw_bound` and `rescale_bound` for one config at budget `eps`.
pub fn run_pipeline(cfg: &LoadedConfig, eps: f64) -> Result<AssemblyReport> {
    let c = &cfg.config;
    let core_volume = c.core_volume.ok_or_else(|| anyhow!("config needs core_volume"))?;
    let (mode, cusps, model) = match c.mode {
        RunMode::Close | RunMode::Double => (c.mode.assembly_mode().unwrap(), cfg.lattices.as_slice(), None),
        RunMode::EntropyOnly => (
            cuspforge_core::assembly::AssemblyMode::Close,
            &[][..],
            Some(model_volume_entropy(c.dimension, 30.0)?),
        ),
        RunMode::CutoffOnly => bail!("mode cutoff-only has no assembly; use the cutoff command"),
    };
    let a = assemble(core_volume, cusps, eps, c.dimension, mode, &c.assembly_options())?;
    let entropy = if a.pinching_passed() {
        let raw = bw_bound(&a, c.monte_carlo.samples, c.monte_carlo.seed)?;
        Some(rescale_bound(&raw, rescale_eps_for(&a))?)
    } else {
        None
    };
    let chain = entropy_chain_report(entropy.as_ref(), &a);
    let mut config = c.clone();
    config.eps = eps;
    Ok(AssemblyReport {
        tool: "cuspforge".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_file: cfg.path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        config,
        lattices: lattice_records(cfg),
        verdict: a.verdict,
        assembly: a,
        entropy,
        model_entropy: model,
        entropy_chain: chain,
    })
}

fn region_rows(a: &ManifoldAssembly) -> Result<String> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["region", "copy", "cusp", "volume", "constant_curvature_volume", "pinching"])?;
    for r in &a.regions {
        let (kind, copy, cusp) = match r {
            Region::Core { copy, .. } => ("core", copy.to_string(), String::new()),
            Region::CuspRemnant(c) => ("cusp_remnant", c.copy.to_string(), c.cusp_index.to_string()),
            Region::Tube(t) => ("tube", String::new(), t.cusp_index.to_string()),
            Region::Channel(c) => ("channel", String::new(), c.cusp_index.to_string()),
        };
        let pin = r.pinching().map(|p| format!("{:?}", p.verdict).to_lowercase()).unwrap_or_default();
        wr.write_record([
            kind.to_string(),
            copy,
            cusp,
            r.volume().to_string(),
            r.constant_curvature_volume().to_string(),
            pin,
        ])?;
    }
    Ok(String::from_utf8(wr.into_inner()?)?)
}

fn summary_line(r: &AssemblyReport) -> String {
    let a = &r.assembly;
    let bound = r.entropy.as_ref().map(|e| e.bound_after.to_string()).unwrap_or_else(|| "refused".into());
    format!(
        "{:?} n = {}, eps = {}: vol = {}, W = {}, K in [{}, {}], witness rank {}, h_v >= {}, verdict {:?}",
        a.mode,
        a.n,
        a.eps,
        a.total_volume,
        a.w_fraction,
        a.checks.curvature.value.0,
        a.checks.curvature.value.1,
        a.max_witness_rank(),
        bound,
        a.verdict
    )
}

fn cmd_assemble(flags: &Flags) -> Result<Outcome> {
    let cfg = require_config(flags, "assemble")?;
    let out = prepare_out(flags, Some(&cfg))?;
    if cfg.config.mode == RunMode::CutoffOnly {
        let c = &cfg.config;
        let r = run_cutoff(c.eps, c.dimension, &c.tolerances, &out)?;
        return Ok(Outcome::from_bool(r.verdict == Verdict::Pass));
    }
    let report = run_pipeline(&cfg, cfg.config.eps)?;
    write_json(&out, "report.json", &report)?;
    write_file(&out, "entropy_chain.txt", &report.entropy_chain)?;
    write_file(&out, "regions.csv", &region_rows(&report.assembly)?)?;
    println!("{}", summary_line(&report));
    Ok(Outcome::from_bool(report.verdict == Verdict::Pass))
}

// ----------------------------------------------------------------- sweep

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub r_eps: Option<f64>,
    pub t0: Vec<f64>,
    pub tube_volumes: Vec<f64>,
    pub w_fraction: f64,
    pub bound_after: Option<f64>,
    pub eps_bar: Option<f64>,
    pub verdict: Verdict,
}

impl SweepRow {
    pub fn from_report(r: &AssemblyReport) -> Self {
        let a = &r.assembly;
        let t0 = a.tubes().map(|t| t.t0.t0).chain(a.channels().map(|c| c.t0)).collect();
        let vols = a.tubes().map(|t| t.volume.value).chain(a.channels().map(|c| c.volume.value)).collect();
        SweepRow {
            eps: a.eps,
            r_eps: a.r_eps,
            t0,
            tube_volumes: vols,
            w_fraction: a.w_fraction,
            bound_after: r.entropy.as_ref().map(|e| e.bound_after),
            eps_bar: r.entropy.as_ref().map(|e| e.eps_bar),
            verdict: r.verdict,
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["eps", "r_eps", "t0", "tube_volumes", "W_fraction", "bound_after", "eps_bar", "verdict"])?;
    for r in rows {
        wr.write_record([
            r.eps.to_string(),
            fmt_opt(r.r_eps),
            join(&r.t0),
            join(&r.tube_volumes),
            r.w_fraction.to_string(),
            fmt_opt(r.bound_after),
            fmt_opt(r.eps_bar),
            format!("{:?}", r.verdict).to_lowercase(),
        ])?;
    }
    Ok(String::from_utf8(wr.into_inner()?)?)
}

pub fn run_sweep(cfg: &LoadedConfig, eps_list: &[f64]) -> Result<Vec<AssemblyReport>> {
    if eps_list.is_empty() {
        bail!("sweep needs at least one --eps value");
    }
    eps_list
        .iter()
        .map(|&e| {
            let mut c = cfg.clone();
            c.config.eps = e;
            c.config.validate()?;
            run_pipeline(&c, e).with_context(|| format!("pipeline at eps = {e}"))
        })
        .collect()
}

fn cmd_sweep(flags: &Flags) -> Result<Outcome> {
    if flags.eps.is_empty() {
        bail!("sweep needs at least one --eps value");
    }
    let path = flags.config.as_ref().ok_or_else(|| anyhow!("sweep needs --config PATH"))?;
    let single = Flags { eps: Vec::new(), ..flags.clone() };
    let cfg = load_with_overrides(&single, path)?;
    let out = prepare_out(flags, Some(&cfg))?;
    let reports = run_sweep(&cfg, &flags.eps)?;
    let rows: Vec<SweepRow> = reports.iter().map(SweepRow::from_report).collect();
    write_file(&out, "sweep.csv", &sweep_csv(&rows)?)?;
    write_json(&out, "sweep.json", &reports)?;
    for r in &reports {
        println!("{}", summary_line(r));
    }
    Ok(Outcome::from_bool(reports.iter().all(|r| r.verdict == Verdict::Pass)))
}

// --------------------------------------------------------------- entropy

#[derive(Debug, Serialize)]
pub struct EntropyDocument {
    pub tool: String,
    pub version: String,
    pub config_file: String,
    pub config: RunConfig,
    pub certificate: Option<EntropyCertificate>,
    pub entropy_chain: String,
    pub verdict: Verdict,
}

#[derive(Debug, Serialize)]
pub struct ModelEntropyReport {
    pub n: usize,
    pub r_max: f64,
    pub value: f64,
    pub limit: f64,
    pub tol: f64,
    /// `(r, estimate)` for integer radii from 10 to `r_max`.
    pub convergence: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

pub fn run_model_entropy(n: usize, r_max: f64) -> Result<ModelEntropyReport> {
    let value = model_volume_entropy(n, r_max)?;
    let mut convergence = Vec::new();
    let mut r = 10.0;
    while r < r_max {
        convergence.push((r, model_volume_entropy(n, r)?));
        r += 1.0;
    }
    convergence.push((r_max, value));
    let limit = (n - 1) as f64;
    Ok(ModelEntropyReport {
        n,
        r_max,
        value,
        limit,
        tol: MODEL_ENTROPY_TOL,
        convergence,
        verdict: Verdict::from_bool((value - limit).abs() <= MODEL_ENTROPY_TOL),
    })
}

fn cmd_entropy(flags: &Flags, r_max: f64) -> Result<Outcome> {
    let Some(path) = flags.config.as_ref() else {
        let n = flags.dim.unwrap_or(DEFAULT_DIM);
        let out = prepare_out(flags, None)?;
        let r = run_model_entropy(n, r_max)?;
        write_json(&out, "model_entropy.json", &r)?;
        println!("model volume entropy n = {n}, r = {r_max}: {} (limit {})", r.value, r.limit);
        return Ok(Outcome::from_bool(r.verdict == Verdict::Pass));
    };
    let cfg = load_with_overrides(flags, path)?;
    let out = prepare_out(flags, Some(&cfg))?;
    let r = run_pipeline(&cfg, cfg.config.eps)?;
    let ok = r.entropy.as_ref().is_some_and(EntropyCertificate::meets_target);
    let doc = EntropyDocument {
        tool: r.tool.clone(),
        version: r.version.clone(),
        config_file: r.config_file.clone(),
        config: r.config.clone(),
        certificate: r.entropy.clone(),
        entropy_chain: r.entropy_chain.clone(),
        verdict: Verdict::from_bool(ok),
    };
    write_json(&out, "entropy.json", &doc)?;
    write_file(&out, "entropy_chain.txt", &r.entropy_chain)?;
    print!("{}", r.entropy_chain);
    Ok(Outcome::from_bool(ok))
}

// ---------------------------------------------------------- oracle-check

#[derive(Debug, Serialize)]
pub struct OracleSummary {
    pub eps: f64,
    pub r_eps: f64,
    pub samples: usize,
    pub seed: u64,
    pub fd_step: f64,
    pub max_abs_error: f64,
    pub max_symmetry_defect: f64,
    pub tol: f64,
    pub symmetry_tol: f64,
    pub verdict: Verdict,
}

pub fn run_oracle_check(eps: f64, samples: usize, seed: u64) -> Result<(OracleSummary, Vec<OracleSample>)> {
    let cut = make_cutoff_with(eps, &CutoffSearch::default())?;
    let rows = oracle_equivalence(&cut, samples, seed, FD_STEP)?;
    let max_abs_error = rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
    let max_symmetry_defect = rows.iter().map(|r| r.symmetry_defect).fold(0.0, f64::max);
    let ok = max_abs_error <= ORACLE_TOL && max_symmetry_defect <= ORACLE_SYMMETRY_TOL;
    let summary = OracleSummary {
        eps,
        r_eps: cut.r_eps,
        samples,
        seed,
        fd_step: FD_STEP,
        max_abs_error,
        max_symmetry_defect,
        tol: ORACLE_TOL,
        symmetry_tol: ORACLE_SYMMETRY_TOL,
        verdict: Verdict::from_bool(ok),
    };
    Ok((summary, rows))
}

fn cmd_oracle_check(flags: &Flags) -> Result<Outcome> {
    let eps = single_eps(flags)?.unwrap_or(DEFAULT_EPS);
    let samples = flags.samples.unwrap_or(ORACLE_SAMPLES);
    let seed = flags.seed.unwrap_or(DEFAULT_SEED);
    let out = prepare_out(flags, None)?;
    let (summary, rows) = run_oracle_check(eps, samples, seed)?;
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["profile", "n", "t", "closed_form", "finite_difference", "abs_error", "symmetry_defect"])?;
    for r in &rows {
        wr.write_record([
            r.profile.clone(),
            r.n.to_string(),
            r.t.to_string(),
            r.closed_form.to_string(),
            r.finite_difference.to_string(),
            r.abs_error.to_string(),
            r.symmetry_defect.to_string(),
        ])?;
    }
    write_file(&out, "oracle_check.csv", &String::from_utf8(wr.into_inner()?)?)?;
    write_json(&out, "oracle_check.json", &summary)?;
    println!(
        "oracle check: {} samples, max |closed form - finite difference| = {:e}, verdict {:?}",
        samples, summary.max_abs_error, summary.verdict
    );
    Ok(Outcome::from_bool(summary.verdict == Verdict::Pass))
}
