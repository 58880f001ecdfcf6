//! CSV datasets, run artifacts and the trace plot.
//!
//! Every table is a headed CSV with a label column first. Labels are
//! sanitized to `[A-Za-z0-9_]` on write so no quoting is ever needed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;

use crate::analysis::{
    posterior_summary, probabilistic_coherence, relevant_categories, CoherenceReport, CoherenceScope,
    ParamSummary, SummaryRow, SummaryTable, DEFAULT_COHERENCE_M, DEFAULT_MIN_RATIO,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::inference::{convergence_summary, ConvergenceSummary};
use crate::model::{CountData, CovariateMatrix, Hyperparams, Trace};
use crate::simgen::SimTruth;
use crate::vanilla::is_retained;

pub const INTERCEPT: &str = "intercept";

pub const ARTIFACT_FILES: [&str; 9] = [
    "model.meta",
    "phi_mean.csv",
    "theta_mean.csv",
    "beta_summary.csv",
    "n_draws.csv",
    "trace.csv",
    "trace.svg",
    "coherence.csv",
    "relevant.txt",
];

/// Replace every character outside `[A-Za-z0-9_]` with `_`.
pub fn sanitize_label(label: &str) -> String {
    let s: String = label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

/// Six significant digits, plain notation where it stays short.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let digits = (5 - exp).max(0) as usize;
        let s = format!("{v:.digits$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { &s };
        if s == "-0" {
            "0".into()
        } else {
            s.into()
        }
    } else {
        format!("{v:.5e}")
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            parse_err(path, line, format!("expected {expected_len} fields, found {len}"))
        }
        other => parse_err(path, line, format!("{other:?}")),
    }
}

/// A headed table: row labels, column names and parsed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTable<T> {
    pub label_header: String,
    pub row_labels: Vec<String>,
    pub columns: Vec<String>,
    pub values: Array2<T>,
}

/// Read a CSV whose first column holds row labels. `parse` turns one cell
/// into a value or a message; errors carry the file line.
pub fn read_table<T: Clone + Default>(
    path: &Path,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<LabeledTable<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.is_empty() {
        return Err(parse_err(path, 1, "missing header"));
    }
    let label_header = header[0].to_string();
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut row_labels = Vec::new();
    let mut cells = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let label = rec[0].to_string();
        if !seen.insert(label.clone()) {
            return Err(parse_err(path, line, format!("duplicate row label `{label}`")));
        }
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let v = parse(cell).map_err(|m| parse_err(path, line, format!("column `{}`: {m}", columns[j])))?;
            cells.push(v);
        }
        row_labels.push(label);
    }
    let values = Array2::from_shape_vec((row_labels.len(), columns.len()), cells).expect("rectangular csv");
    Ok(LabeledTable { label_header, row_labels, columns, values })
}

fn parse_count(cell: &str) -> std::result::Result<u32, String> {
    let v: i64 = cell.parse().map_err(|_| format!("`{cell}` is not an integer"))?;
    if v < 0 {
        return Err(format!("negative count {v}"));
    }
    u32::try_from(v).map_err(|_| format!("count {v} too large"))
}

fn parse_real(cell: &str) -> std::result::Result<f64, String> {
    let v: f64 = cell.parse().map_err(|_| format!("`{cell}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value `{cell}`"));
    }
    Ok(v)
}

fn parse_parsable<T: FromStr>(cell: &str) -> std::result::Result<T, String> {
    cell.parse().map_err(|_| format!("cannot parse `{cell}`"))
}

pub fn load_counts(path: &Path) -> Result<CountData> {
    let t = read_table(path, parse_count)?;
    CountData::new(t.values, t.columns, t.row_labels)
}

/// Covariate table as written, plus an intercept column when requested.
pub fn load_covariates(path: &Path, intercept: bool) -> Result<(Vec<String>, CovariateMatrix)> {
    let t = read_table(path, parse_real)?;
    let x = CovariateMatrix::new(t.values, t.columns)?;
    Ok((t.row_labels, if intercept { x.with_intercept() } else { x }))
}

/// Counts and covariates, the covariate rows reordered to the count rows.
pub fn load_dataset(counts_path: &Path, covariates_path: &Path, intercept: bool) -> Result<(CountData, CovariateMatrix)> {
    let data = load_counts(counts_path)?;
    let (ids, x) = load_covariates(covariates_path, intercept)?;
    let x = align_rows(&data.instance_ids, &ids, &x, covariates_path)?;
    if let Some(extra) = ids.iter().find(|id| !data.instance_ids.contains(id)) {
        return Err(Error::MissingInstance(extra.clone(), counts_path.display().to_string()));
    }
    Ok((data, x))
}

/// Rows of `x` (labelled `ids`) in the order of `wanted`.
fn align_rows(wanted: &[String], ids: &[String], x: &CovariateMatrix, source: &Path) -> Result<CovariateMatrix> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut design = Array2::zeros((wanted.len(), x.n_cols()));
    for (l, id) in wanted.iter().enumerate() {
        let &i = index
            .get(id.as_str())
            .ok_or_else(|| Error::MissingInstance(id.clone(), source.display().to_string()))?;
        design.row_mut(l).assign(&x.row(i));
    }
    CovariateMatrix::new(design, x.column_names.clone())
}

/// Columns of `x` in the order of `names`.
pub fn select_columns(x: &CovariateMatrix, names: &[String]) -> Result<CovariateMatrix> {
    let mut design = Array2::zeros((x.n_rows(), names.len()));
    for (j, name) in names.iter().enumerate() {
        let src = x
            .column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidData(format!("covariate `{name}` missing")))?;
        design.column_mut(j).assign(&x.design.column(src));
    }
    CovariateMatrix::new(design, names.to_vec())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn header(label: &str, columns: impl IntoIterator<Item = impl AsRef<str>>) -> String {
    let mut h = sanitize_label(label);
    for c in columns {
        h.push(',');
        h.push_str(&sanitize_label(c.as_ref()));
    }
    h.push('\n');
    h
}

fn matrix_csv<T>(
    label: &str,
    rows: &[String],
    columns: &[String],
    m: &Array2<T>,
    fmt: impl Fn(&T) -> String,
) -> String {
    let mut out = header(label, columns);
    for (r, row) in rows.iter().zip(m.rows()) {
        out.push_str(&sanitize_label(r));
        for v in row {
            out.push(',');
            out.push_str(&fmt(v));
        }
        out.push('\n');
    }
    out
}

pub fn write_counts(path: &Path, data: &CountData) -> Result<()> {
    write_file(
        path,
        &matrix_csv("instance_id", &data.instance_ids, &data.category_names, &data.counts, |c| c.to_string()),
    )
}

/// Covariates as `instance_id,<cov>...`; an intercept column is dropped.
pub fn write_covariates(path: &Path, ids: &[String], x: &CovariateMatrix) -> Result<()> {
    let keep: Vec<String> = x.column_names.iter().filter(|c| *c != INTERCEPT).cloned().collect();
    let x = select_columns(x, &keep)?;
    write_file(path, &matrix_csv("instance_id", ids, &keep, &x.design, |v| format_sig(*v)))
}

fn cluster_labels(k: usize) -> Vec<String> {
    (1..=k).map(|c| c.to_string()).collect()
}

fn cluster_columns(k: usize) -> Vec<String> {
    (1..=k).map(|c| format!("cluster_{c}")).collect()
}

/// Everything derived from a trace that the artifact set records.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummaries {
    pub beta: SummaryTable,
    pub coherence: Vec<CoherenceReport>,
    pub relevant: Vec<Vec<usize>>,
    pub convergence: ConvergenceSummary,
    pub category_names: Vec<String>,
    pub instance_ids: Vec<String>,
    pub hp: Hyperparams,
    pub intercept: bool,
}

impl RunSummaries {
    pub fn compute(trace: &Trace, data: &CountData, x: &CovariateMatrix, hp: &Hyperparams, exec: Exec) -> Result<Self> {
        let phi = trace.phi_mean();
        let m = DEFAULT_COHERENCE_M.min(data.n_categories());
        let coherence = [CoherenceScope::AssignedInstances, CoherenceScope::WholeCorpus]
            .into_iter()
            .map(|scope| probabilistic_coherence(&phi, data, &trace.theta_mean, m, scope, exec))
            .collect::<Result<_>>()?;
        Ok(Self {
            beta: posterior_summary(&trace.beta_draws, &x.column_names, hp.ci_level)?,
            coherence,
            relevant: relevant_categories(&phi, DEFAULT_MIN_RATIO),
            convergence: convergence_summary(trace)?,
            category_names: data.category_names.clone(),
            instance_ids: data.instance_ids.clone(),
            hp: hp.clone(),
            intercept: x.column_names.first().is_some_and(|c| c == INTERCEPT),
        })
    }
}

/// Output directory of a fit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
}

impl RunArtifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    /// Artifact files not present on disk.
    pub fn missing(&self) -> Vec<&'static str> {
        ARTIFACT_FILES.iter().copied().filter(|f| !self.path(f).is_file()).collect()
    }
}

fn scope_name(scope: CoherenceScope) -> &'static str {
    match scope {
        CoherenceScope::AssignedInstances => "assigned",
        CoherenceScope::WholeCorpus => "whole_corpus",
    }
}

fn meta_text(trace: &Trace, sm: &RunSummaries) -> String {
    let gamma = if sm.hp.gamma.iter().all(|&g| g == sm.hp.gamma[0]) {
        format_sig(sm.hp.gamma[0])
    } else {
        sm.hp.gamma.iter().map(|&g| format_sig(g)).collect::<Vec<_>>().join(",")
    };
    let covariates: Vec<String> = sm.beta.rows.iter().filter(|r| r.cluster == 0).map(|r| sanitize_label(&r.covariate)).collect();
    let entries = [
        ("format", "1".to_string()),
        ("mode", trace.meta.mode.as_str().into()),
        ("seed", trace.meta.seed.to_string()),
        ("iters", trace.meta.iters.to_string()),
        ("burnin", trace.meta.burnin.to_string()),
        ("thin", trace.meta.thin.to_string()),
        ("retained", trace.n_retained().to_string()),
        ("k", sm.hp.k.to_string()),
        ("instances", sm.instance_ids.len().to_string()),
        ("categories", sm.category_names.len().to_string()),
        ("gamma", gamma),
        ("prior_var", format_sig(sm.hp.prior_var)),
        ("n0", format_sig(sm.hp.n_upper)),
        ("ci", format_sig(sm.hp.ci_level)),
        ("intercept", sm.intercept.to_string()),
        ("covariates", covariates.join(",")),
        ("clamp_events", trace.clamp_events.to_string()),
        ("convergence_flagged", sm.convergence.flagged.to_string()),
        ("split_half_diff", format_sig(sm.convergence.split_half_diff)),
        ("second_half_se", format_sig(sm.convergence.second_half_se)),
    ];
    entries.iter().fold(String::new(), |mut s, (k, v)| {
        let _ = writeln!(s, "{k}={v}");
        s
    })
}

/// Write every file of the artifact set into `out_dir` (created if needed).
pub fn write_artifacts(trace: &Trace, sm: &RunSummaries, out_dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let art = RunArtifacts::new(out_dir);
    let k = sm.hp.k;

    write_file(&art.path("model.meta"), &meta_text(trace, sm))?;
    write_file(
        &art.path("phi_mean.csv"),
        &matrix_csv("cluster", &cluster_labels(k), &sm.category_names, &trace.phi_mean(), |v| format_sig(*v)),
    )?;
    write_file(
        &art.path("theta_mean.csv"),
        &matrix_csv("instance_id", &sm.instance_ids, &cluster_columns(k), &trace.theta_mean, |v| format_sig(*v)),
    )?;

    let mut beta = String::from("cluster,covariate,mean,ci_lower,ci_upper,significant\n");
    for r in &sm.beta.rows {
        let s = &r.summary;
        let _ = writeln!(
            beta,
            "{},{},{},{},{},{}",
            r.cluster + 1,
            sanitize_label(&r.covariate),
            format_sig(s.mean),
            format_sig(s.lower),
            format_sig(s.upper),
            s.significant
        );
    }
    write_file(&art.path("beta_summary.csv"), &beta)?;

    let mut draws = String::from("draw,iteration,overdispersion\n");
    let iterations = (1..=trace.meta.iters).filter(|&t| is_retained(t, trace.meta.burnin, trace.meta.thin));
    for (i, (t, n)) in iterations.zip(&trace.n_draws).enumerate() {
        let _ = writeln!(draws, "{},{t},{}", i + 1, format_sig(*n));
    }
    write_file(&art.path("n_draws.csv"), &draws)?;

    let mut tr = String::from("iteration,log_density\n");
    for (t, v) in trace.logdens.iter().enumerate() {
        let _ = writeln!(tr, "{},{}", t + 1, format_sig(*v));
    }
    write_file(&art.path("trace.csv"), &tr)?;
    render_trace_svg(&trace.logdens, &art.path("trace.svg"))?;

    let mut coh = String::from("scope,cluster,m,coherence\n");
    for rep in &sm.coherence {
        let scope = scope_name(rep.scope);
        for (c, v) in rep.per_cluster.iter().enumerate() {
            let _ = writeln!(coh, "{scope},{},{},{}", c + 1, rep.m, format_sig(*v));
        }
        let _ = writeln!(coh, "{scope},total,{},{}", rep.m, format_sig(rep.total));
    }
    write_file(&art.path("coherence.csv"), &coh)?;

    let mut rel = String::new();
    for (c, cats) in sm.relevant.iter().enumerate() {
        let names: Vec<String> = cats.iter().map(|&s| sanitize_label(&sm.category_names[s])).collect();
        let _ = writeln!(rel, "cluster {}: {}", c + 1, names.join(" "));
    }
    write_file(&art.path("relevant.txt"), &rel)?;
    Ok(art)
}

pub fn read_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut meta = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| parse_err(path, i as u64 + 1, "expected key=value"))?;
        meta.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(meta)
}

/// A fitted model reloaded from its artifact directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub meta: BTreeMap<String, String>,
    pub phi_mean: Array2<f64>,
    pub category_names: Vec<String>,
    pub theta_mean: Array2<f64>,
    pub instance_ids: Vec<String>,
    pub beta: SummaryTable,
    /// K×d coefficient means, columns in `covariate_names` order.
    pub beta_mean: Array2<f64>,
    pub covariate_names: Vec<String>,
    pub intercept: bool,
}

impl SavedModel {
    pub fn meta_value<T: FromStr>(&self, key: &str) -> Result<T> {
        self.meta
            .get(key)
            .ok_or_else(|| Error::InvalidData(format!("model.meta lacks `{key}`")))?
            .parse()
            .map_err(|_| Error::InvalidData(format!("model.meta has a malformed `{key}`")))
    }
}

fn read_beta_summary(path: &Path) -> Result<(SummaryTable, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(["cluster", "covariate", "mean", "ci_lower", "ci_upper", "significant"]) {
        return Err(parse_err(path, 1, "unexpected beta_summary header"));
    }
    let mut rows = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |j: usize| -> Result<f64> { parse_real(&rec[j]).map_err(|m| parse_err(path, line, m)) };
        let cluster: usize = parse_parsable(&rec[0]).map_err(|m| parse_err(path, line, m))?;
        if cluster == 0 {
            return Err(parse_err(path, line, "clusters are numbered from 1"));
        }
        let covariate = rec[1].to_string();
        if !names.contains(&covariate) {
            names.push(covariate.clone());
        }
        let significant: bool = parse_parsable(&rec[5]).map_err(|m| parse_err(path, line, m))?;
        rows.push(SummaryRow {
            cluster: cluster - 1,
            covariate,
            summary: ParamSummary { mean: field(2)?, lower: field(3)?, upper: field(4)?, significant },
        });
    }
    Ok((SummaryTable { level: f64::NAN, rows }, names))
}

pub fn load_model(dir: &Path) -> Result<SavedModel> {
    let art = RunArtifacts::new(dir);
    let meta = read_meta(&art.path("model.meta"))?;
    let phi = read_table(&art.path("phi_mean.csv"), parse_real)?;
    let theta = read_table(&art.path("theta_mean.csv"), parse_real)?;
    let (mut beta, covariate_names) = read_beta_summary(&art.path("beta_summary.csv"))?;
    let k = phi.values.nrows();
    if theta.values.ncols() != k {
        return Err(Error::DimensionMismatch(format!("phi has {k} clusters, theta {}", theta.values.ncols())));
    }
    let mut beta_mean = Array2::from_elem((k, covariate_names.len()), f64::NAN);
    for r in &beta.rows {
        let j = covariate_names.iter().position(|c| *c == r.covariate).expect("collected above");
        if r.cluster >= k {
            return Err(Error::DimensionMismatch(format!("beta row for cluster {} of {k}", r.cluster + 1)));
        }
        beta_mean[[r.cluster, j]] = r.summary.mean;
    }
    if beta_mean.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidData("beta_summary does not cover every cluster and covariate".into()));
    }
    if let Some(ci) = meta.get("ci").and_then(|v| v.parse().ok()) {
        beta.level = ci;
    }
    let intercept = meta.get("intercept").is_some_and(|v| v == "true");
    Ok(SavedModel {
        meta,
        phi_mean: phi.values,
        category_names: phi.columns,
        theta_mean: theta.values,
        instance_ids: theta.row_labels,
        beta,
        beta_mean,
        covariate_names,
        intercept,
    })
}

/// Expected counts table `instance_id,<categories>`.
pub fn write_predictions(path: &Path, ids: &[String], categories: &[String], pred: &Array2<f64>) -> Result<()> {
    write_file(path, &matrix_csv("instance_id", ids, categories, pred, |v| format_sig(*v)))
}

/// Simulated dataset in the loader's formats plus truth files:
/// `counts.csv`, `covariates.csv`, `truth_phi.csv`, `truth_beta.csv`,
/// `truth_theta.csv`, `truth_expected.csv`, `truth.meta`. A non-empty
/// `prefix` is prepended to every file name.
pub fn write_simulation(dir: &Path, prefix: &str, truth: &SimTruth, extra_meta: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = |name: &str| dir.join(format!("{prefix}{name}"));
    let data = &truth.data;
    let k = truth.phi_true.nrows();
    write_counts(&p("counts.csv"), data)?;
    write_covariates(&p("covariates.csv"), &data.instance_ids, &truth.x)?;
    let fmt = |v: &f64| format_sig(*v);
    write_file(&p("truth_phi.csv"), &matrix_csv("cluster", &cluster_labels(k), &data.category_names, &truth.phi_true, fmt))?;
    write_file(&p("truth_beta.csv"), &matrix_csv("cluster", &cluster_labels(k), &truth.x.column_names, &truth.beta_true, fmt))?;
    write_file(&p("truth_theta.csv"), &matrix_csv("instance_id", &data.instance_ids, &cluster_columns(k), &truth.theta_true, fmt))?;
    write_file(&p("truth_expected.csv"), &matrix_csv("instance_id", &data.instance_ids, &data.category_names, &truth.expected, fmt))?;
    let mut meta = format!("seed={}\n", truth.seed);
    for (key, v) in extra_meta {
        let _ = writeln!(meta, "{key}={v}");
    }
    let pure: Vec<String> = truth.pure_instances.iter().map(|&l| sanitize_label(&data.instance_ids[l])).collect();
    let _ = writeln!(meta, "pure_instances={}", pure.join(","));
    write_file(&p("truth.meta"), &meta)
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 400.0;
const MARGIN_L: f64 = 90.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;

/// Line plot of a log-density series as standalone SVG markup.
pub fn trace_svg(series: &[f64]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::InvalidData("cannot plot an empty trace".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("trace series".into()));
    }
    let (lo, hi) = series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let n = series.len();
    let (x0, x1) = (MARGIN_L, SVG_W - MARGIN_R);
    let (y0, y1) = (SVG_H - MARGIN_B, MARGIN_T);
    let px = |i: usize| if n == 1 { (x0 + x1) / 2.0 } else { x0 + (x1 - x0) * i as f64 / (n - 1) as f64 };
    let py = |v: f64| if hi > lo { y0 + (y1 - y0) * (v - lo) / (hi - lo) } else { (y0 + y1) / 2.0 };
    let mut points: Vec<(f64, f64)> = series.iter().enumerate().map(|(i, &v)| (px(i), py(v))).collect();
    if n == 1 {
        // A single value still draws as a short horizontal segment.
        points = vec![(x0, points[0].1), (x1, points[0].1)];
    }
    let pts = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect::<Vec<_>>().join(" ");
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1">"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="12" fill="black">"#);
    let _ = writeln!(s, r#"<text x="{x0}" y="{}" text-anchor="middle">1</text>"#, y0 + 18.0);
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" text-anchor="middle">{n}</text>"#, y0 + 18.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">iteration</text>"#, (x0 + x1) / 2.0, SVG_H - 10.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 6.0, py(lo) + 4.0, format_sig(lo));
    if hi > lo {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 6.0, py(hi) + 4.0, format_sig(hi));
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">log density</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{pts}"/>"#);
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

pub fn render_trace_svg(series: &[f64], path: &Path) -> Result<()> {
    write_file(path, &trace_svg(series)?)
}
