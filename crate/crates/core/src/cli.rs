//! Experiment runner: one CSV row per (scheme, decomposition, Δt) cell,
//! an order-fit table in oracle mode, and a run manifest.
//!
//! Cells are computed independently (possibly in parallel) and written in
//! the fixed order scheme, decomposition, Δt, so the CSV body depends only
//! on the configuration and seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Mode};
use crate::error::{Error, Result};
use crate::estimators::{estimate_coefficients, normalize_per_site, site_divisor, EprReport, Estimate};
use crate::exec::{with_threads, Execution};
use crate::kmc::KmcEngine;
use crate::lattice::DecompositionKind;
use crate::oracle::{self, least_squares_slope};
use crate::splitting::{sample_chain, SchemeKind};

pub const CSV_HEADER: [&str; 18] = [
    "scheme",
    "decomposition",
    "width",
    "N1",
    "N2",
    "dt",
    "p",
    "A_hat",
    "A_se",
    "D_hat",
    "D_se",
    "epr_leading",
    "epr_se",
    "epr_oracle",
    "rer_oracle",
    "disc_oracle",
    "n_samples",
    "seed",
];
pub const RESULTS_FILE: &str = "results.csv";
pub const ORDER_FITS_FILE: &str = "order_fits.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Oracle values at one cell, per site like the sampled columns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleValues {
    pub epr: f64,
    pub rer: f64,
    pub discrepancy: f64,
}

/// One result row. Estimates and oracle values are divided by the model's
/// per-site divisor.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub scheme: SchemeKind,
    pub decomposition: DecompositionKind,
    pub width: usize,
    pub n1: usize,
    pub n2: usize,
    pub dt: f64,
    pub p: usize,
    /// Sampled report, or the exact coefficients in oracle-only mode.
    pub a: Option<Estimate>,
    pub d: Option<Estimate>,
    pub epr_leading: Option<Estimate>,
    pub oracle: Option<OracleValues>,
    pub n_samples: Option<usize>,
    pub seed: u64,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl Row {
    pub fn record(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        vec![
            self.scheme.name().to_string(),
            self.decomposition.name().to_string(),
            self.width.to_string(),
            self.n1.to_string(),
            self.n2.to_string(),
            num(self.dt),
            self.p.to_string(),
            opt(self.a.map(|e| e.value)),
            opt(self.a.map(|e| e.se)),
            opt(self.d.map(|e| e.value)),
            opt(self.d.map(|e| e.se)),
            opt(self.epr_leading.map(|e| e.value)),
            opt(self.epr_leading.map(|e| e.se)),
            opt(self.oracle.map(|o| o.epr)),
            opt(self.oracle.map(|o| o.rer)),
            opt(self.oracle.map(|o| o.discrepancy)),
            self.n_samples.map(|n| n.to_string()).unwrap_or_default(),
            self.seed.to_string(),
        ]
    }
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    scheme: SchemeKind,
    decomposition: DecompositionKind,
    dt: f64,
}

fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &scheme in &cfg.schemes {
        for &decomposition in &cfg.decompositions {
            for &dt in &cfg.dt {
                out.push(Cell { scheme, decomposition, dt });
            }
        }
    }
    out
}

/// Sampled report for one cell, normalized per site.
pub fn sample_report(
    cfg: &ExperimentConfig,
    exec: Execution,
    scheme: SchemeKind,
    decomposition: DecompositionKind,
    dt: f64,
) -> Result<EprReport> {
    let dec = cfg.decomposition(decomposition)?;
    let spec = cfg.scheme(scheme, dt)?;
    let start = cfg.initial_state();
    let mut engine = KmcEngine::new(&cfg.model, &dec, start.clone(), cfg.seed);
    let sample = sample_chain(&spec, &mut engine, start, cfg.n_steps, cfg.burn_in, cfg.seed)?;
    let est = estimate_coefficients(exec, &sample, &cfg.model, &dec, &spec, cfg.batches)?;
    let report = EprReport::new(&sample, &dec, &cfg.model, est)?;
    Ok(normalize_per_site(&report, &cfg.model, dec.lattice()))
}

fn compute_cell(cfg: &ExperimentConfig, exec: Execution, cell: Cell) -> Result<Row> {
    let dec = cfg.decomposition(cell.decomposition)?;
    let spec = cfg.scheme(cell.scheme, cell.dt)?;
    let p = spec.local_error_order().expect("exact schemes are rejected by the config");
    let div = site_divisor(&cfg.model, dec.lattice());
    let mut row = Row {
        scheme: cell.scheme,
        decomposition: cell.decomposition,
        width: cfg.width,
        n1: cfg.n1,
        n2: cfg.n2,
        dt: cell.dt,
        p,
        a: None,
        d: None,
        epr_leading: None,
        oracle: None,
        n_samples: None,
        seed: cfg.seed,
    };
    if cfg.mode.oracle() {
        let chain = oracle::build_dense(&cfg.model, &dec)?;
        let an = oracle::analyze(&chain, &spec)?;
        row.oracle = Some(OracleValues {
            epr: an.epr / div,
            rer: an.rer / div,
            discrepancy: an.discrepancy / div,
        });
        if !cfg.mode.samples() {
            let exact = oracle::exact_coefficients(&chain, &spec, &an.mu)?;
            let scale = cell.dt.powi(p as i32 - 1) / div;
            row.a = Some(Estimate::exact(exact.a / div));
            row.d = Some(Estimate::exact(exact.d / div));
            row.epr_leading = Some(Estimate::exact((exact.a + exact.d) * scale));
        }
    }
    if cfg.mode.samples() {
        let r = sample_report(cfg, exec, cell.scheme, cell.decomposition, cell.dt)?;
        row.a = Some(r.a);
        row.d = Some(r.d);
        row.epr_leading = Some(r.epr_leading());
        row.n_samples = Some(r.n_samples);
    }
    Ok(row)
}

/// Computes every cell. The first failing cell (in output order) ends the
/// list; its error is returned alongside the rows before it.
pub fn compute(cfg: &ExperimentConfig, exec: Execution) -> (Vec<Row>, Option<Error>) {
    let cells = cells(cfg);
    let results = exec.map(&cells, |&c| {
        compute_cell(cfg, exec, c).map_err(|e| Error::Cell {
            cell: format!("scheme={} decomposition={} dt={}", c.scheme.name(), c.decomposition.name(), c.dt),
            source: Box::new(e),
        })
    });
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => return (rows, Some(e)),
        }
    }
    (rows, None)
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for row in rows {
        w.write_record(row.record()).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of log EPR against log Δt per (scheme, decomposition).
#[derive(Clone, Debug, PartialEq)]
pub struct OrderFitRow {
    pub scheme: SchemeKind,
    pub decomposition: DecompositionKind,
    pub points: usize,
    /// `None` when the split commutes (every EPR below 1e-10) or with fewer
    /// than two time steps.
    pub slope: Option<f64>,
}

pub fn order_fits(rows: &[Row]) -> Vec<OrderFitRow> {
    let mut keys: Vec<(SchemeKind, DecompositionKind)> = Vec::new();
    for r in rows {
        if r.oracle.is_some() && !keys.contains(&(r.scheme, r.decomposition)) {
            keys.push((r.scheme, r.decomposition));
        }
    }
    keys.into_iter()
        .map(|(scheme, decomposition)| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.scheme == scheme && r.decomposition == decomposition)
                .filter_map(|r| r.oracle.map(|o| (r.dt, o.epr)))
                .collect();
            let slope = (pts.len() >= 2 && pts.iter().any(|&(_, e)| e >= 1e-10)).then(|| {
                let logs: Vec<(f64, f64)> = pts.iter().map(|&(d, e)| (d.ln(), e.max(f64::MIN_POSITIVE).ln())).collect();
                least_squares_slope(&logs)
            });
            OrderFitRow {
                scheme,
                decomposition,
                points: pts.len(),
                slope,
            }
        })
        .collect()
}

fn write_order_fits(path: &Path, fits: &[OrderFitRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["scheme", "decomposition", "n_points", "slope"]).map_err(io)?;
    for f in fits {
        w.write_record([
            f.scheme.name().to_string(),
            f.decomposition.name().to_string(),
            f.points.to_string(),
            f.slope.map(num).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub mode: String,
    pub threads: Option<usize>,
    pub wall_time_seconds: f64,
    pub rows: usize,
    pub status: String,
    pub error: Option<String>,
    /// The configuration text as given, before command-line overrides.
    pub config: String,
}

pub fn version_string() -> String {
    format!("splitkmc-{}", env!("CARGO_PKG_VERSION"))
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Command-line overrides of configuration fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub rows: Vec<Row>,
    pub manifest: Manifest,
}

/// Parses `config_text`, applies `overrides`, runs every cell and writes
/// the result files. Rows finished before a failure are still written.
pub fn run(config_text: &str, overrides: &Overrides) -> Result<RunSummary> {
    let started = Instant::now();
    let mut cfg = ExperimentConfig::from_toml(config_text)?;
    if let Some(mode) = overrides.mode {
        cfg.mode = mode;
        cfg = cfg.revalidated()?;
    }
    if let Some(out) = &overrides.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    fs::create_dir_all(&cfg.output)?;

    let (rows, failure) = with_threads(overrides.threads, |exec| compute(&cfg, exec));
    finish(&cfg, config_text, overrides.threads, started, rows, failure)
}

/// Writes whatever rows exist and the manifest, then reports `failure`.
fn finish(
    cfg: &ExperimentConfig,
    config_text: &str,
    threads: Option<usize>,
    started: Instant,
    rows: Vec<Row>,
    failure: Option<Error>,
) -> Result<RunSummary> {
    let mut file = fs::File::create(cfg.output.join(RESULTS_FILE))?;
    write_csv(&mut file, &rows)?;
    file.sync_all()?;
    if cfg.mode.oracle() {
        write_order_fits(&cfg.output.join(ORDER_FITS_FILE), &order_fits(&rows))?;
    }
    let manifest = Manifest {
        version: version_string(),
        config_sha256: sha256_hex(config_text),
        seed: cfg.seed,
        mode: cfg.mode.name().to_string(),
        threads,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        rows: rows.len(),
        status: if failure.is_some() { "failed" } else { "ok" }.to_string(),
        error: failure.as_ref().map(ToString::to_string),
        config: config_text.to_string(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(cfg.output.join(MANIFEST_FILE), text)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RunSummary {
        out_dir: cfg.output.clone(),
        rows,
        manifest,
    })
}

/// Signed difference of two per-site leading EPR estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    /// `EPR(first) - EPR(second)` with quadrature-combined SE.
    pub difference: Estimate,
    /// `|difference| > 3 SE`.
    pub significant: bool,
}

pub fn compare(first: &EprReport, second: &EprReport) -> Result<Comparison> {
    let mismatch = |what: &str| Err(Error::IncompatibleReports(format!("{what} differs")));
    if first.model != second.model {
        return mismatch("model");
    }
    if (first.n1, first.n2) != (second.n1, second.n2) {
        return mismatch("lattice");
    }
    if first.dt != second.dt {
        return mismatch("time step");
    }
    if first.normalization != second.normalization {
        return mismatch("normalization");
    }
    let (a, b) = (first.epr_leading(), second.epr_leading());
    let difference = Estimate {
        value: a.value - b.value,
        se: a.se.hypot(b.se),
    };
    Ok(Comparison {
        difference,
        significant: difference.value.abs() > 3.0 * difference.se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
model = "adsorption"
n1 = 2
n2 = 2
decompositions = ["blocks", "stripes"]
width = 1
schemes = ["lie", "strang"]
dt = [0.05, 0.1]
n_steps = 400
seed = 11
"#;

    fn run_in(dir: &Path, text: &str, threads: Option<usize>, mode: Option<Mode>) -> Result<RunSummary> {
        run(
            text,
            &Overrides {
                out: Some(dir.to_path_buf()),
                threads,
                mode,
                ..Overrides::default()
            },
        )
    }

    #[test]
    fn header_is_exact() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "scheme,decomposition,width,N1,N2,dt,p,A_hat,A_se,D_hat,D_se,epr_leading,epr_se,epr_oracle,rer_oracle,disc_oracle,n_samples,seed\n"
        );
    }

    #[test]
    fn sample_run_writes_rows_in_order_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_in(dir.path(), SMALL, Some(1), None).unwrap();
        assert_eq!(s.rows.len(), 8);
        assert_eq!(s.rows[0].scheme, SchemeKind::Lie);
        assert_eq!(s.rows[2].decomposition, DecompositionKind::Stripes);
        assert_eq!(s.rows[1].dt, 0.1);
        assert!(s.rows.iter().all(|r| r.oracle.is_none() && r.n_samples == Some(360)));
        let first = fs::read(dir.path().join(RESULTS_FILE)).unwrap();
        let again = tempfile::tempdir().unwrap();
        run_in(again.path(), SMALL, Some(2), None).unwrap();
        assert_eq!(first, fs::read(again.path().join(RESULTS_FILE)).unwrap());
        let manifest = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(manifest.contains(&sha256_hex(SMALL)));
        assert!(manifest.contains("status = \"ok\""));
    }

    #[test]
    fn oracle_mode_fills_oracle_columns_and_fits() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_in(dir.path(), SMALL, None, Some(Mode::Oracle)).unwrap();
        for r in &s.rows {
            let o = r.oracle.unwrap();
            assert!(r.n_samples.is_none());
            assert!((o.epr - (o.rer + o.discrepancy)).abs() < 1e-9);
        }
        let fits = fs::read_to_string(dir.path().join(ORDER_FITS_FILE)).unwrap();
        assert_eq!(fits.lines().count(), 5);
    }

    #[test]
    fn validation_errors_come_before_work() {
        let dir = tempfile::tempdir().unwrap();
        let bad = SMALL.replace("dt = [0.05, 0.1]", "dt = []");
        let e = run_in(dir.path(), &bad, None, None).unwrap_err();
        assert_eq!(e.kind(), "config");
        assert!(!dir.path().join(RESULTS_FILE).exists());
    }

    #[test]
    fn failing_cell_keeps_earlier_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::from_toml(SMALL).unwrap();
        cfg.output = dir.path().to_path_buf();
        let (rows, _) = compute(&cfg, Execution::Sequential);
        let failure = Error::Cell {
            cell: "scheme=lie decomposition=blocks dt=0.1".into(),
            source: Box::new(Error::NotConverged { residual: 1.0 }),
        };
        let e = finish(&cfg, SMALL, None, Instant::now(), rows[..3].to_vec(), Some(failure.clone())).unwrap_err();
        assert_eq!(e, failure);
        assert_eq!(e.kind(), "not_converged");
        let body = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
        assert_eq!(body.lines().count(), 4);
        let manifest = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(manifest.contains("status = \"failed\""));
        assert!(manifest.contains("dt=0.1"));
    }

    fn report(scheme: SchemeKind, value: f64, se: f64) -> EprReport {
        EprReport {
            scheme,
            model: "adsorption",
            decomposition: "blocks".into(),
            width: 2,
            n1: 8,
            n2: 8,
            dt: 0.05,
            p: 2,
            a: Estimate::default(),
            d: Estimate::default(),
            sum: Estimate { value, se },
            normalization: 8.0,
            n_samples: 100,
            burn_in: 10,
            seed: 0,
        }
    }

    #[test]
    fn compare_with_itself_is_zero() {
        let r = report(SchemeKind::Lie, 2.0, 0.1);
        let c = compare(&r, &r).unwrap();
        assert_eq!(c.difference.value, 0.0);
        assert!((c.difference.se - 0.1 * 0.05 * 2f64.sqrt()).abs() < 1e-15);
        assert!(!c.significant);
        let s = report(SchemeKind::Strang, 0.0, 0.1);
        assert!(compare(&r, &s).unwrap().significant);
        let mut other = s.clone();
        other.dt = 0.1;
        assert!(matches!(compare(&r, &other), Err(Error::IncompatibleReports(_))));
    }
}
