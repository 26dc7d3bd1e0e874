//! Command-line front end. `run` is the whole program minus process exit,
//! so tests drive it in-process.

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::harness::{
    certify_elementary, certify_g3p, certify_lemma, certify_measure_3p, certify_ppp, falsify_pointwise_3p, CertificationBundle,
    G3pCase, IneqId,
};
use crate::kato::{
    default_times, kato_class_probe, kato_norm_jump_with, kato_norm_measure_with, KatoNormCurve, KatoOpts, ThresholdSchedule,
    Verdict,
};
use crate::kernel::{psi_gamma, q_eval, surrogate_band};
use crate::montecarlo::{estimate_density, McOpts};
use crate::pipeline::{run_compare, run_series, CompareSetup, SeriesSetup};
use crate::report::{series_csv, series_table, summarize, BinaryTable, Csv, Report, Status};

use config::{
    parse_geometry, parse_jump, parse_mu, parse_point, CertifySection, ConfigFile, KatoSection, KatoTarget,
    McSection, Model, ModelInput,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Exit code of an error: malformed input is a usage error, everything
/// the numerics raise is a numeric error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Unsupported(_) | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_NUMERIC,
    }
}

#[derive(Debug, Parser)]
#[command(name = "fklab", version, about = "Heat kernels of non-local Feynman-Kac semigroups: kernels, norms, series, simulation")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[arg(long, global = true)]
    pub d: Option<usize>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub c0: Option<f64>,
    /// Mass of the relativistic preset.
    #[arg(long, global = true)]
    pub m: Option<f64>,
    /// whole | half | ball:R | exterior:R | interval:a,b | intervals:a,b;c,d | JSON
    #[arg(long, global = true)]
    pub geometry: Option<String>,
    /// zero | const:v | box:v:lo,hi | JSON
    #[arg(long, global = true)]
    pub mu: Option<String>,
    /// zero | power-cap:a,beta | const:v[:cutoff] | JSON
    #[arg(long, global = true)]
    pub jump: Option<String>,
    /// Replaces every command seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "FKLAB_WORKERS")]
    pub workers: Option<usize>,
    /// Directory for the JSON report and data files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Reference kernel, boundary factor and band on a grid.
    Kernel(KernelArgs),
    /// Kato-type norm curve of mu or F.
    Kato(KatoArgs),
    /// Perturbation series with its certificates.
    Series(SeriesArgs),
    /// Monte Carlo density estimate.
    Mc(McArgs),
    /// Inequality certification sweeps.
    Certify(CertifyArgs),
    /// Series against Monte Carlo, bin by bin.
    Compare(CompareArgs),
    /// Summarize a JSON report or binary table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub t: Vec<f64>,
    /// Points as comma-separated coordinates.
    #[arg(long, num_args = 1..)]
    pub x: Vec<String>,
    #[arg(long, num_args = 1..)]
    pub y: Vec<String>,
}

#[derive(Debug, Args)]
pub struct KatoArgs {
    /// measure | jump | combined
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub times: Vec<f64>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub fast: bool,
}

#[derive(Debug, Args, Default)]
pub struct SeriesFlags {
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub t_span: Option<f64>,
    #[arg(long)]
    pub n_times: Option<usize>,
    #[arg(long)]
    pub nx: Option<usize>,
    /// lo,hi
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c4: Option<f64>,
    /// The bound `M` on `q_D / p^0` near the diagonal.
    #[arg(long = "bound-m")]
    pub bound_m: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    #[command(flatten)]
    pub series: SeriesFlags,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub eps_factor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Inequality names or `all`.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub ineq: Vec<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub probes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub series: SeriesFlags,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub time_index: Option<usize>,
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Grid node indices of the start points.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub starts: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A JSON report or a binary table.
    pub input: PathBuf,
}

/// What a command hands back for printing and writing.
pub struct Outcome {
    pub report: Report,
    pub text: String,
    pub csv: Option<Csv>,
    pub table: Option<BinaryTable>,
}

impl Outcome {
    fn passed(&self) -> bool {
        self.report.status == Status::Pass
    }
}

/// Resolved configuration echoed in every report.
#[derive(Debug, Serialize)]
struct Echo<'a, S: Serialize> {
    model: &'a Model,
    workers: usize,
    #[serde(flatten)]
    section: S,
}

/// Parses `args`, runs, prints, and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(&cli) {
        Ok(o) => {
            let shown = if cli.common.json { o.report.to_json() } else { o.text.clone() };
            let _ = out.write_all(shown.as_bytes());
            if let Some(dir) = &cli.common.out {
                if let Err(e) = write_outputs(dir, &o) {
                    let _ = writeln!(err, "error: {e}");
                    return exit_code(&e);
                }
            }
            if o.passed() {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn write_outputs(dir: &Path, o: &Outcome) -> Result<()> {
    let name = o.report.command.as_str();
    o.report.write(&dir.join(format!("{name}.json")))?;
    if let Some(c) = &o.csv {
        c.write(&dir.join(format!("{name}.csv")))?;
    }
    if let Some(t) = &o.table {
        t.write(&dir.join(format!("{name}.fklt")))?;
    }
    Ok(())
}

struct Ctx {
    file: ConfigFile,
    workers: usize,
}

fn setup(common: &Common) -> Result<Ctx> {
    let file = match &common.config {
        Some(p) => ConfigFile::read(p)?,
        None => ConfigFile::default(),
    };
    let workers = common.workers.or(file.workers).unwrap_or(0);
    if workers > 0 {
        // a second build in the same process is refused; the first pool stays
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    Ok(Ctx { workers: rayon::current_num_threads(), file })
}

fn model(common: &Common, file: &ConfigFile) -> Result<Model> {
    let mut inp = ModelInput::from_file(file);
    macro_rules! over {
        ($($f:ident),*) => { $(if common.$f.is_some() { inp.$f = common.$f.clone(); })* };
    }
    over!(preset, d, alpha, gamma, c0, m);
    let d = inp.d.unwrap_or(if inp.preset.as_deref() == Some("drift") { 2 } else { 1 });
    if let Some(g) = &common.geometry {
        inp.geometry = Some(parse_geometry(g, d)?);
    }
    if let Some(s) = &common.mu {
        inp.mu = Some(parse_mu(s, d)?);
    }
    if let Some(s) = &common.jump {
        inp.jump = Some(parse_jump(s)?);
    }
    inp.resolve()
}

fn execute(cli: &Cli) -> Result<Outcome> {
    if let Cmd::Report(a) = &cli.cmd {
        return cmd_report(&a.input);
    }
    let ctx = setup(&cli.common)?;
    let m = model(&cli.common, &ctx.file)?;
    let seed = cli.common.seed.or(ctx.file.seed);
    match &cli.cmd {
        Cmd::Kernel(a) => cmd_kernel(&ctx, &m, a),
        Cmd::Kato(a) => cmd_kato(&ctx, &m, a),
        Cmd::Series(a) => cmd_series(&ctx, &m, &a.series),
        Cmd::Mc(a) => cmd_mc(&ctx, &m, a, seed),
        Cmd::Certify(a) => cmd_certify(&ctx, &m, a, seed),
        Cmd::Compare(a) => cmd_compare(&ctx, &m, a, seed),
        Cmd::Report(_) => unreachable!(),
    }
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn cmd_kernel(ctx: &Ctx, m: &Model, a: &KernelArgs) -> Result<Outcome> {
    let d = m.params.d;
    let mut sec = ctx.file.kernel.clone();
    if !a.t.is_empty() {
        sec.times = a.t.clone();
    }
    if !a.x.is_empty() {
        sec.x = a.x.iter().map(|s| parse_point(s, d)).collect::<Result<_>>()?;
    }
    if !a.y.is_empty() {
        sec.y = a.y.iter().map(|s| parse_point(s, d)).collect::<Result<_>>()?;
    }
    if sec.times.is_empty() || sec.x.is_empty() || sec.y.is_empty() {
        return Err(Error::Config("kernel needs at least one t, x and y".into()));
    }
    for p in sec.x.iter().chain(&sec.y) {
        if p.len() != d {
            return Err(Error::Config(format!("point {p:?} does not have {d} coordinates")));
        }
        if !m.geometry.contains(p) {
            return Err(Error::Domain(format!("point {p:?} lies outside the domain")));
        }
    }
    let mut csv = Csv::new(&["t", "x", "y", "q", "psi", "lower", "upper"]);
    let mut rows = Vec::new();
    for &t in &sec.times {
        for x in &sec.x {
            for y in &sec.y {
                let q = q_eval(&m.params, t, x, y)?;
                let psi = psi_gamma(&m.params, &m.geometry, t, x, y)?;
                // the band is only asserted up to t = 1
                let (lo, hi) = if t <= 1.0 { surrogate_band(&m.params, &m.geometry, t, x, y)? } else { (f64::NAN, f64::NAN) };
                if d == 1 {
                    csv.push(vec![t, x[0], y[0], q, psi, lo, hi]);
                }
                rows.push(json!({"t": t, "x": x, "y": y, "q": q, "psi": psi, "lower": lo, "upper": hi}));
            }
        }
    }
    let text = if d == 1 {
        csv.render()
    } else {
        // multi-dimensional points do not fit one CSV cell; list them
        let mut s = String::from("t,x,y,q,psi,lower,upper\n");
        for r in &rows {
            s.push_str(&format!("{},{:?},{:?},{},{},{},{}\n", r["t"], r["x"], r["y"], r["q"], r["psi"], r["lower"], r["upper"]));
        }
        s
    };
    let echo = Echo { model: m, workers: ctx.workers, section: json!({ "kernel": sec }) };
    let report = Report::new("kernel", &echo, Status::Pass, &json!({ "rows": rows }))?;
    Ok(Outcome { report, text, csv: (d == 1).then_some(csv), table: None })
}

fn cmd_kato(ctx: &Ctx, m: &Model, a: &KatoArgs) -> Result<Outcome> {
    let mut sec: KatoSection = ctx.file.kato.clone();
    if let Some(t) = &a.target {
        sec.target = Some(KatoTarget::parse(t)?);
    }
    if !a.times.is_empty() {
        sec.times = a.times.clone();
    }
    if let Some(l) = a.levels {
        sec.levels = l;
    }
    sec.fast |= a.fast;
    let target = sec.target.unwrap_or(match (m.mu.is_zero(), m.jump.is_zero()) {
        (false, true) => KatoTarget::Measure,
        (true, false) => KatoTarget::Jump,
        _ => KatoTarget::Combined,
    });
    sec.target = Some(target);
    if sec.times.is_empty() {
        sec.times = default_times(sec.levels);
    }
    let opts = if sec.fast { KatoOpts::fast() } else { KatoOpts::default() };
    let mu_abs = m.mu.abs();
    let f_abs = crate::measure::JumpFunctionalSpec { bound: m.jump.bound.abs(), ..m.jump.clone() };
    let eval = |t: f64| -> Result<f64> {
        let a = if target == KatoTarget::Jump { 0.0 } else { kato_norm_measure_with(&m.params, &m.geometry, &mu_abs, t, &opts)?.value };
        let b = if target == KatoTarget::Measure { 0.0 } else { kato_norm_jump_with(&m.params, &m.geometry, &f_abs, t, &opts)?.value };
        Ok(a + b)
    };
    let curve = KatoNormCurve::sample(&sec.times, eval)?;
    let verdict = kato_class_probe(&curve, &ThresholdSchedule::default());
    let per_t: Vec<f64> = curve.points.iter().map(|p| p.1 / p.0).collect();
    let mut csv = Csv::new(&["t", "norm"]);
    for p in &curve.points {
        csv.push(vec![p.0, p.1]);
    }
    let body = json!({
        "target": target,
        "curve": curve.points,
        "tail_slope": curve.tail_slope,
        "monotonicity_defect": curve.monotonicity_defect(),
        "norm_over_t": per_t,
        "verdict": verdict,
    });
    let echo = Echo { model: m, workers: ctx.workers, section: json!({ "kato": sec }) };
    let report = Report::new("kato", &echo, status(verdict != Verdict::OutOfClass), &body)?;
    let text = format!("{}verdict {:?}\n", csv.render(), verdict);
    Ok(Outcome { report, text, csv: Some(csv), table: None })
}

fn series_setup(file: &SeriesSetup, f: &SeriesFlags) -> Result<SeriesSetup> {
    let mut s = file.clone();
    if f.t_max.is_some() {
        s.t_max = f.t_max;
    }
    if let Some(v) = f.t_span {
        s.t_span = v;
    }
    if let Some(v) = f.n_times {
        s.n_times = v;
    }
    if let Some(v) = f.nx {
        s.nx = v;
    }
    if let Some(w) = &f.window {
        let v: Vec<f64> = w.split(',').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| {
            Error::Config(format!("window '{w}' is not lo,hi"))
        })?;
        if v.len() != 2 {
            return Err(Error::Config(format!("window '{w}' is not lo,hi")));
        }
        s.window = Some((v[0], v[1]));
    }
    if let Some(v) = f.k_max {
        s.k_max = v;
    }
    if f.c1.is_some() {
        s.c1 = f.c1;
    }
    if f.c4.is_some() {
        s.c4 = f.c4;
    }
    if f.bound_m.is_some() {
        s.m = f.bound_m;
    }
    Ok(s)
}

fn series_text(o: &crate::pipeline::SeriesOutcome) -> String {
    let r = &o.result;
    let mut s = format!(
        "provenance        {:?}\nt1                {:e}\norders            {}\nconverged         {}\nmax sum |p^k|/p0  {:.10}\nsum bound         {:.10}\n",
        r.provenance,
        o.horizon.t1,
        r.terms.len(),
        r.converged,
        r.max_abs_ratio_sum(),
        o.sum_bound
    );
    for (t, l) in r.grid.times.iter().zip(&o.lambdas) {
        s.push_str(&format!("lambda(t={t:.4e})  {l:.6e}\n"));
    }
    s.push_str(&format!(
        "term violations   {}\nupper violations  {}\nlower bound       {}\nlower violations  {}\npassed            {}\n",
        o.term_violations.len(),
        o.upper_violations.len(),
        o.lower.map(|l| format!("2^-{:.6e}", l.k)).unwrap_or_else(|| o.lower_refusal.clone().unwrap_or_default()),
        o.lower_violations.len(),
        o.passed
    ));
    s
}

fn cmd_series(ctx: &Ctx, m: &Model, f: &SeriesFlags) -> Result<Outcome> {
    let setup = series_setup(&ctx.file.series, f)?;
    let o = run_series(&m.params, &m.geometry, &m.mu, &m.jump, &setup, &KatoOpts::default())?;
    let echo = Echo { model: m, workers: ctx.workers, section: json!({ "series": setup }) };
    let report = Report::new("series", &echo, status(o.passed), &o)?;
    Ok(Outcome { text: series_text(&o), csv: Some(series_csv(&o.result)), table: Some(series_table(&o.result)), report })
}

fn cmd_mc(ctx: &Ctx, m: &Model, a: &McArgs, seed: Option<u64>) -> Result<Outcome> {
    let mut sec: McSection = ctx.file.mc.clone();
    if let Some(v) = a.t {
        sec.t = v;
    }
    if let Some(x) = &a.x {
        sec.x = parse_point(x, m.params.d)?;
    }
    if sec.x.is_empty() {
        sec.x = vec![0.0; m.params.d];
    }
    if a.lo.is_some() {
        sec.lo = a.lo;
    }
    if a.hi.is_some() {
        sec.hi = a.hi;
    }
    if let Some(v) = a.bins {
        sec.bins = v;
    }
    if let Some(v) = a.paths {
        sec.n_paths = v;
    }
    if let Some(v) = a.eps_factor {
        sec.eps_factor = v;
    }
    if let Some(s) = seed {
        sec.seed = s;
    }
    let w = 6.0 * sec.t.powf(1.0 / m.params.alpha);
    let lo = *sec.lo.get_or_insert(sec.x.first().copied().unwrap_or(0.0) - w);
    let hi = *sec.hi.get_or_insert(sec.x.first().copied().unwrap_or(0.0) + w);
    if sec.bins == 0 || !(hi > lo) {
        return Err(Error::Config("mc needs bins > 0 and hi > lo".into()));
    }
    let edges: Vec<f64> = (0..=sec.bins).map(|i| lo + (hi - lo) * i as f64 / sec.bins as f64).collect();
    let mut opts = McOpts::new(sec.n_paths, sec.seed);
    opts.path.eps_factor = sec.eps_factor;
    let est = estimate_density(&m.params, &m.geometry, &m.mu, &m.jump, sec.t, &sec.x, &edges, &opts)?;
    let mut csv = Csv::new(&["center", "value", "stderr"]);
    for i in 0..est.values.len() {
        csv.push(vec![est.centers[i], est.values[i], est.stderr[i]]);
    }
    let echo = Echo { model: m, workers: ctx.workers, section: json!({ "mc": sec }) };
    let report = Report::new("mc", &echo, Status::Pass, &est)?;
    Ok(Outcome { text: csv.render(), csv: Some(csv), table: None, report })
}

fn certify_ids(names: &[String]) -> Result<Vec<IneqId>> {
    let mut ids = Vec::new();
    for n in names {
        if n == "all" {
            ids.extend(IneqId::ALL);
        } else {
            ids.push(IneqId::parse(n)?);
        }
    }
    ids.sort();
    ids.dedup();
    Ok(ids)
}

fn cmd_certify(ctx: &Ctx, m: &Model, a: &CertifyArgs, seed: Option<u64>) -> Result<Outcome> {
    let mut sec: CertifySection = ctx.file.certify.clone();
    if !a.ineq.is_empty() {
        sec.ineqs = a.ineq.clone();
    }
    if let Some(v) = a.n {
        sec.n_samples = v;
    }
    if let Some(v) = a.budget {
        sec.refine_budget = v;
    }
    if let Some(v) = a.starts {
        sec.refine_starts = v;
    }
    if let Some(v) = a.probes {
        sec.probes = v;
    }
    if let Some(s) = seed {
        sec.seed = s;
    }
    let ids = certify_ids(&sec.ineqs)?;
    let every = sec.ineqs.iter().any(|n| n == "all");
    let opts = sec.opts();
    let (p, g) = (&m.params, &m.geometry);
    let mut bundle = CertificationBundle::default();
    let mut skipped = Vec::new();
    let mut elementary_done = false;
    for id in &ids {
        let got = match id {
            IneqId::ClipIdentity | IneqId::ClipProduct | IneqId::RatioSandwich | IneqId::QSandwich => {
                if elementary_done {
                    continue;
                }
                elementary_done = true;
                certify_elementary(p, g, &opts).map(|v| v.into_iter().filter(|r| ids.contains(&r.id)).collect())
            }
            IneqId::Ppp => certify_ppp(p, &opts).map(|r| vec![r]),
            IneqId::BoundaryTransfer | IneqId::ThreeP | IneqId::JumpTransfer => certify_lemma(p, *id, g, &opts).map(|r| vec![r]),
            IneqId::Measure3p => certify_measure_3p(p, g, &m.mu, &opts).map(|r| vec![r]),
            IneqId::Jump3pA => certify_g3p(p, g, &m.jump, G3pCase::A, &opts).map(|r| vec![r]),
            IneqId::Jump3pB => certify_g3p(p, g, &m.jump, G3pCase::B, &opts).map(|r| vec![r]),
            IneqId::Jump3pC => certify_g3p(p, g, &m.jump, G3pCase::C, &opts).map(|r| vec![r]),
            IneqId::PointwiseBoundary3p => falsify_pointwise_3p(p, g, &opts).map(|r| vec![r.0]),
        };
        match got {
            Ok(v) => bundle.reports.extend(v),
            // `all` runs what applies to this model and lists the rest
            Err(e @ (Error::Unsupported(_) | Error::Domain(_))) if every => skipped.push(json!({"id": id.name(), "reason": e.to_string()})),
            Err(e) => return Err(e),
        }
    }
    let ok = bundle.explicit_passed();
    let mut text = bundle.table();
    for s in &skipped {
        text.push_str(&format!("skipped {} ({})\n", s["id"].as_str().unwrap_or(""), s["reason"].as_str().unwrap_or("")));
    }
    let body = json!({ "explicit_passed": ok, "reports": bundle.reports, "skipped": skipped });
    let echo = Echo { model: m, workers: ctx.workers, section: json!({ "certify": sec }) };
    let report = Report::new("certify", &echo, status(ok), &body)?;
    Ok(Outcome { report, text, csv: None, table: None })
}

fn cmd_compare(ctx: &Ctx, m: &Model, a: &CompareArgs, seed: Option<u64>) -> Result<Outcome> {
    let setup = series_setup(&ctx.file.series, &a.series)?;
    let mut cmp: CompareSetup = ctx.file.compare.clone();
    if let Some(v) = a.paths {
        cmp.n_paths = v;
    }
    if let Some(v) = a.bins {
        cmp.bins = v;
    }
    if a.time_index.is_some() {
        cmp.time_index = a.time_index;
    }
    if let Some(v) = a.half_width {
        cmp.half_width = v;
    }
    if !a.starts.is_empty() {
        cmp.starts = a.starts.clone();
    }
    if let Some(s) = seed {
        cmp.seed = s;
    }
    let series = run_series(&m.params, &m.geometry, &m.mu, &m.jump, &setup, &KatoOpts::default())?;
    let o = run_compare(&m.params, &m.geometry, &m.mu, &m.jump, &series, &cmp)?;
    let mut csv = Csv::new(&["x", "t", "center", "mc", "stderr", "series", "agree"]);
    let mut text = format!("mode {:?}, band factor {}\n", o.mode, o.band_factor);
    if let Some(p) = o.passthrough {
        text.push_str(&format!("passthrough q = p0: {p}\n"));
    }
    for c in &o.comparisons {
        for i in 0..c.series.len() {
            let agree = !c.disagreements.iter().any(|d| d.0 == i);
            csv.push(vec![c.x, c.t, c.estimate.centers[i], c.estimate.values[i], c.estimate.stderr[i], c.series[i], agree as u8 as f64]);
        }
    }
    text.push_str(&csv.render());
    text.push_str(&format!("series passed {}\nagreement {}\n", series.passed, o.passed));
    let body = json!({
        "series": {
            "t1": series.horizon.t1,
            "passed": series.passed,
            "max_abs_ratio_sum": series.result.max_abs_ratio_sum(),
            "sum_bound": series.sum_bound,
            "lambdas": series.lambdas,
        },
        "comparison": o,
    });
    let echo = Echo { model: m, workers: ctx.workers, section: json!({ "series": setup, "compare": cmp }) };
    let report = Report::new("compare", &echo, status(o.passed), &body)?;
    Ok(Outcome { report, text, csv: Some(csv), table: None })
}

fn cmd_report(path: &Path) -> Result<Outcome> {
    let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(crate::report::TABLE_MAGIC) {
        let t = BinaryTable::from_bytes(&bytes)?;
        let mut text = format!("table {}\n", t.meta);
        for (n, v) in &t.blocks {
            text.push_str(&format!("{n:<24}{} values\n", v.len()));
        }
        let body = json!({ "meta": t.meta, "blocks": t.blocks.iter().map(|b| json!({"name": b.0, "len": b.1.len()})).collect::<Vec<_>>() });
        let report = Report::new("report", &json!({ "input": path }), Status::Pass, &body)?;
        return Ok(Outcome { report, text, csv: None, table: None });
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::Config(format!("{} is neither a report nor a table", path.display())))?;
    let r = Report::parse(&text)?;
    let summary = summarize(&r);
    let report = Report::new("report", &json!({ "input": path }), r.status, &json!({ "summary": summary, "source": r }))?;
    Ok(Outcome { report, text: summary, csv: None, table: None })
}
