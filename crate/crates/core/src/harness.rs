//! Monte Carlo sweeps comparing reconstruction methods across bit depths and
//! bit budgets.
//!
//! A cell is a pair `(b, budget)` with `M = budget / b` measurements. For
//! every trial of a cell, all methods see the same signal, matrix and
//! quantized measurements. Cells where `2K >= M` have no valid default step
//! size and are emitted as skipped rows.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::distance;
use crate::quantizer::Quantizer;
use crate::recon::{self, ReconConfig};
use crate::signal_model::{derive_seed, gen_gaussian_matrix, gen_sparse_signal, snr_db};

/// SNR used in place of `+inf` when averaging.
pub const SNR_CAP_DB: f64 = 150.0;

const TRIAL_HEADER: [&str; 8] = [
    "method",
    "b",
    "M",
    "budget",
    "trial",
    "snr_db",
    "iterations",
    "terminated_by",
];
const AGGREGATE_MARKER: &str = "# aggregates";
const AGGREGATE_HEADER: [&str; 6] = ["method", "b", "budget", "mean_snr_db", "std_snr_db", "n"];

/// Residual tolerance handed to the BPDN solver.
pub const BPDN_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Iht,
    Qiht,
    Bpdn,
    /// Single thresholding, 1-bit only.
    Ht,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Iht, Method::Qiht, Method::Bpdn, Method::Ht];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Iht => "iht",
            Method::Qiht => "qiht",
            Method::Bpdn => "bpdn",
            Method::Ht => "ht",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "iht" => Ok(Method::Iht),
            "qiht" => Ok(Method::Qiht),
            "bpdn" => Ok(Method::Bpdn),
            "ht" => Ok(Method::Ht),
            other => invalid(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentGrid {
    pub n: usize,
    pub k: usize,
    pub bits_list: Vec<u32>,
    pub budgets: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            n: 1024,
            k: 16,
            bits_list: (1..=5).collect(),
            budgets: (1..=20).map(|i| 64 * i).collect(),
            trials: 100,
            master_seed: 0,
            methods: vec![Method::Iht, Method::Qiht, Method::Bpdn],
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return invalid(format!("k must lie in 1..=n (k={}, n={})", self.k, self.n));
        }
        if self.trials == 0 {
            return invalid("trials must be positive");
        }
        if self.methods.is_empty() || self.bits_list.is_empty() || self.budgets.is_empty() {
            return invalid("methods, bits and budgets must be non-empty");
        }
        for &b in &self.bits_list {
            if b == 0 || b > crate::quantizer::MAX_BITS {
                return invalid(format!("bit depth {b} out of range"));
            }
            for &budget in &self.budgets {
                if budget < b as usize {
                    return invalid(format!("budget {budget} gives no measurements at b={b}"));
                }
            }
        }
        Ok(())
    }

    /// Parses a flat `key = value` file. Recognized keys are `n`, `k`, `bits`,
    /// `budgets`, `trials`, `seed` and `methods`; lists are comma-separated.
    /// Blank lines and lines starting with `#` are ignored, missing keys keep
    /// their defaults.
    pub fn parse_config(text: &str) -> Result<Self> {
        let mut grid = ExperimentGrid::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return invalid(format!("line {}: expected key = value", lineno + 1));
            };
            let (key, value) = (key.trim(), value.trim());
            let ctx = |e: Error| {
                let msg = match e {
                    Error::InvalidArgument(m) => m,
                    other => other.to_string(),
                };
                Error::InvalidArgument(format!("line {}: {key}: {msg}", lineno + 1))
            };
            match key {
                "n" => grid.n = parse_num(value).map_err(ctx)?,
                "k" => grid.k = parse_num(value).map_err(ctx)?,
                "trials" => grid.trials = parse_num(value).map_err(ctx)?,
                "seed" => grid.master_seed = parse_num(value).map_err(ctx)?,
                "bits" => grid.bits_list = parse_list(value).map_err(ctx)?,
                "budgets" => grid.budgets = parse_list(value).map_err(ctx)?,
                "methods" => grid.methods = parse_list(value).map_err(ctx)?,
                _ => return invalid(format!("line {}: unknown key {key:?}", lineno + 1)),
            }
        }
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_config(&fs::read_to_string(path)?)
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T> {
    s.parse()
        .or_else(|_| invalid(format!("cannot parse {s:?}")))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse()
                .or_else(|_| invalid(format!("cannot parse {p:?}")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    /// `2K >= M`, no run.
    Skipped,
    /// The method rejected the cell or failed to converge.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub method: Method,
    pub b: u32,
    pub m: usize,
    pub budget: usize,
    pub trial: usize,
    /// NaN unless `status` is `Ok`.
    pub snr_db: f64,
    pub iterations: usize,
    /// `tolerance` or `max_iters` for the iterative methods, `converged`
    /// for BPDN, `closed_form` for single thresholding, and `skipped` or
    /// `error` for flagged rows.
    pub terminated_by: String,
    pub status: RowStatus,
    /// Error message for failed rows.
    pub note: Option<String>,
}

impl TrialRow {
    /// Exact recovery; averaged at [`SNR_CAP_DB`].
    pub fn is_capped(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    fn flagged(method: Method, b: u32, budget: usize, trial: usize, status: RowStatus) -> Self {
        TrialRow {
            method,
            b,
            m: budget / b as usize,
            budget,
            trial,
            snr_db: f64::NAN,
            iterations: 0,
            terminated_by: match status {
                RowStatus::Skipped => "skipped".into(),
                _ => "error".into(),
            },
            status,
            note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub method: Method,
    pub b: u32,
    pub budget: usize,
    pub mean_snr_db: f64,
    /// Sample standard deviation, 0 for a single trial.
    pub std_snr_db: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResultTable {
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl ResultTable {
    /// Builds the table and its aggregates from trial rows. Only `Ok` rows
    /// enter the aggregates, with `+inf` counted as [`SNR_CAP_DB`].
    pub fn from_rows(rows: Vec<TrialRow>) -> Self {
        let mut groups: Vec<((Method, u32, usize), Vec<f64>)> = Vec::new();
        let mut index: HashMap<(Method, u32, usize), usize> = HashMap::new();
        for row in rows.iter().filter(|r| r.status == RowStatus::Ok) {
            let key = (row.method, row.b, row.budget);
            let slot = *index.entry(key).or_insert_with(|| {
                groups.push((key, Vec::new()));
                groups.len() - 1
            });
            groups[slot].1.push(row.snr_db.min(SNR_CAP_DB));
        }
        groups.sort_by_key(|(key, _)| *key);
        let aggregates = groups
            .into_iter()
            .map(|((method, b, budget), snrs)| {
                let (mean, std) = mean_std(&snrs);
                AggregateRow {
                    method,
                    b,
                    budget,
                    mean_snr_db: mean,
                    std_snr_db: std,
                    n: snrs.len(),
                }
            })
            .collect();
        ResultTable { rows, aggregates }
    }

    pub fn aggregate(&self, method: Method, b: u32, budget: usize) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.b == b && a.budget == budget)
    }

    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out)
            .expect("writing to memory cannot fail");
        String::from_utf8(out).expect("csv output is UTF-8")
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(sink);
        w.write_record(TRIAL_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.method.as_str(),
                &r.b.to_string(),
                &r.m.to_string(),
                &r.budget.to_string(),
                &r.trial.to_string(),
                &format_sig(r.snr_db),
                &r.iterations.to_string(),
                &r.terminated_by,
            ])?;
        }
        w.write_record([AGGREGATE_MARKER])?;
        w.write_record(AGGREGATE_HEADER)?;
        for a in &self.aggregates {
            w.write_record([
                a.method.as_str(),
                &a.b.to_string(),
                &a.budget.to_string(),
                &format_sig(a.mean_snr_db),
                &format_sig(a.std_snr_db),
                &a.n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads back the output of [`ResultTable::to_csv`]. Rows come back with
    /// status inferred from `terminated_by`, and without error notes.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut records = reader.records();
        match records.next() {
            Some(Ok(h)) if h.iter().eq(TRIAL_HEADER) => {}
            _ => return invalid("missing trial header"),
        }
        let mut table = ResultTable::default();
        let mut in_aggregates = false;
        for record in records {
            let record = record?;
            let f: Vec<&str> = record.iter().collect();
            if f == [AGGREGATE_MARKER] {
                in_aggregates = true;
                continue;
            }
            if in_aggregates {
                if record.iter().eq(AGGREGATE_HEADER) {
                    continue;
                }
                let [method, b, budget, mean, std, n] = f[..] else {
                    return invalid(format!("malformed aggregate record {f:?}"));
                };
                table.aggregates.push(AggregateRow {
                    method: method.parse()?,
                    b: parse_num(b)?,
                    budget: parse_num(budget)?,
                    mean_snr_db: parse_num(mean)?,
                    std_snr_db: parse_num(std)?,
                    n: parse_num(n)?,
                });
            } else {
                let [method, b, m, budget, trial, snr, iters, term] = f[..] else {
                    return invalid(format!("malformed row {f:?}"));
                };
                let status = match term {
                    "skipped" => RowStatus::Skipped,
                    "error" => RowStatus::Failed,
                    _ => RowStatus::Ok,
                };
                table.rows.push(TrialRow {
                    method: method.parse()?,
                    b: parse_num(b)?,
                    m: parse_num(m)?,
                    budget: parse_num(budget)?,
                    trial: parse_num(trial)?,
                    snr_db: parse_num(snr)?,
                    iterations: parse_num(iters)?,
                    terminated_by: term.to_string(),
                    status,
                    note: None,
                });
            }
        }
        Ok(table)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `%g`-style formatting with 6 significant digits.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    };
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    let (mantissa, exp) = match s.find('e') {
        Some(i) => s.split_at(i),
        None => (s, ""),
    };
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    format!("{mantissa}{exp}")
}

pub fn export_csv(table: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    table.write_csv(fs::File::create(path)?)
}

/// Seed shared by all methods for one `(b, budget, trial)`.
pub fn cell_seed(master_seed: u64, b: u32, budget: usize, trial: usize) -> u64 {
    derive_seed(&[master_seed, b as u64, budget as u64, trial as u64])
}

/// One trial's problem instance.
pub struct Instance {
    pub x0: Vec<f64>,
    pub phi: crate::signal_model::SensingMatrix,
    pub y: Vec<f64>,
    /// `||Phi x0 - y||`, the oracle noise level given to BPDN.
    pub epsilon: f64,
}

impl Instance {
    /// Draws `x0` and an `m x n` matrix from `seed` and quantizes `Phi x0`.
    pub fn new(n: usize, k: usize, m: usize, quantizer: &Quantizer, seed: u64) -> Result<Self> {
        let x0 = gen_sparse_signal(n, k, derive_seed(&[seed, 0]))?.into_values();
        let phi = gen_gaussian_matrix(m, n, derive_seed(&[seed, 1]))?;
        let z = phi.apply(&x0)?;
        let y = quantizer.quantize_vector(&z)?;
        let epsilon = distance(&z, &y);
        Ok(Instance {
            x0,
            phi,
            y,
            epsilon,
        })
    }

    /// The instance of trial `trial` in cell `(quantizer.bits(), budget)`.
    pub fn generate(
        grid: &ExperimentGrid,
        quantizer: &Quantizer,
        budget: usize,
        trial: usize,
    ) -> Result<Self> {
        let b = quantizer.bits();
        let seed = cell_seed(grid.master_seed, b, budget, trial);
        Self::new(grid.n, grid.k, budget / b as usize, quantizer, seed)
    }
}

/// Runs one method on one instance.
pub fn run_method(
    instance: &Instance,
    quantizer: &Quantizer,
    method: Method,
    sparsity: usize,
) -> Result<(Vec<f64>, usize, String)> {
    let Instance { phi, y, .. } = instance;
    let cfg = || ReconConfig::with_default_step(phi.rows(), sparsity);
    Ok(match method {
        Method::Iht => {
            let r = recon::iht(phi, y, cfg()?)?;
            (r.estimate, r.iterations, r.terminated_by.as_str().into())
        }
        Method::Qiht => {
            let r = recon::qiht(phi, y, quantizer, cfg()?)?;
            (r.estimate, r.iterations, r.terminated_by.as_str().into())
        }
        Method::Bpdn => {
            let s = recon::bpdn(phi, y, instance.epsilon, BPDN_TOLERANCE)?;
            (s.estimate, s.iterations, "converged".into())
        }
        Method::Ht => {
            let x = recon::single_threshold_estimate(phi, y, quantizer, sparsity)?;
            (x, 1, "closed_form".into())
        }
    })
}

fn cell_rows(
    grid: &ExperimentGrid,
    quantizer: &Quantizer,
    budget: usize,
    trial: usize,
) -> Vec<TrialRow> {
    let b = quantizer.bits();
    let m = budget / b as usize;
    if 2 * grid.k >= m {
        return grid
            .methods
            .iter()
            .map(|&method| TrialRow::flagged(method, b, budget, trial, RowStatus::Skipped))
            .collect();
    }
    let instance = match Instance::generate(grid, quantizer, budget, trial) {
        Ok(instance) => instance,
        Err(e) => {
            return grid
                .methods
                .iter()
                .map(|&method| {
                    let mut row = TrialRow::flagged(method, b, budget, trial, RowStatus::Failed);
                    row.note = Some(e.to_string());
                    row
                })
                .collect()
        }
    };
    grid.methods
        .iter()
        .map(|&method| {
            let outcome = run_method(&instance, quantizer, method, grid.k)
                .and_then(|(x, iters, term)| Ok((snr_db(&instance.x0, &x)?, iters, term)));
            match outcome {
                Ok((snr, iterations, terminated_by)) => TrialRow {
                    method,
                    b,
                    m,
                    budget,
                    trial,
                    snr_db: snr,
                    iterations,
                    terminated_by,
                    status: RowStatus::Ok,
                    note: None,
                },
                Err(e) => {
                    let mut row = TrialRow::flagged(method, b, budget, trial, RowStatus::Failed);
                    row.note = Some(e.to_string());
                    row
                }
            }
        })
        .collect()
}

/// Runs a single `(method, b, budget, trial)` cell.
///
/// Single thresholding at `b >= 2` is an invalid argument; other method
/// failures and `2K >= M` come back as flagged rows.
pub fn run_cell(
    grid: &ExperimentGrid,
    method: Method,
    b: u32,
    budget: usize,
    trial: usize,
) -> Result<TrialRow> {
    if method == Method::Ht && b != 1 {
        return invalid(format!("single thresholding needs b = 1, got b = {b}"));
    }
    if budget < b as usize {
        return invalid(format!("budget {budget} gives no measurements at b={b}"));
    }
    let quantizer = Quantizer::optimal(b)?;
    let one = ExperimentGrid {
        methods: vec![method],
        ..grid.clone()
    };
    Ok(cell_rows(&one, &quantizer, budget, trial).remove(0))
}

/// Runs every `(b, budget, trial)` of the grid. Rows are ordered by
/// `(b, budget, trial, method)` whatever the thread count.
pub fn run_grid(grid: &ExperimentGrid) -> Result<ResultTable> {
    grid.validate()?;
    let quantizers: HashMap<u32, Quantizer> = grid
        .bits_list
        .iter()
        .map(|&b| Ok((b, Quantizer::optimal(b)?)))
        .collect::<Result<_>>()?;
    let mut tasks: Vec<(u32, usize, usize)> = Vec::new();
    for &b in &grid.bits_list {
        for &budget in &grid.budgets {
            for trial in 0..grid.trials {
                tasks.push((b, budget, trial));
            }
        }
    }
    let rows: Vec<TrialRow> = tasks
        .par_iter()
        .flat_map_iter(|&(b, budget, trial)| cell_rows(grid, &quantizers[&b], budget, trial))
        .collect();
    Ok(ResultTable::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> ExperimentGrid {
        ExperimentGrid {
            n: 128,
            k: 4,
            bits_list: vec![1, 2],
            budgets: vec![16, 128],
            trials: 3,
            master_seed: 11,
            methods: vec![Method::Iht, Method::Qiht],
        }
    }

    #[test]
    fn format_sig_examples() {
        assert_eq!(format_sig(12.3456789), "12.3457");
        assert_eq!(format_sig(-0.000123456789), "-0.000123457");
        assert_eq!(format_sig(1234567.0), "1.23457e6");
        assert_eq!(format_sig(2.0), "2");
        assert_eq!(format_sig(f64::INFINITY), "inf");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn default_grid_matches_protocol() {
        let g = ExperimentGrid::default();
        assert_eq!(g.budgets.len(), 20);
        assert_eq!((g.budgets[0], g.budgets[19]), (64, 1280));
        assert_eq!(g.bits_list, vec![1, 2, 3, 4, 5]);
        assert_eq!(g.trials, 100);
    }

    #[test]
    fn qiht_one_bit_cell() {
        let grid = ExperimentGrid::default();
        let row = run_cell(&grid, Method::Qiht, 1, 1024, 0).unwrap();
        assert_eq!(row.m, 1024);
        assert_eq!(row.status, RowStatus::Ok);
        assert!(row.snr_db.is_finite() && row.snr_db > 0.0);
    }

    #[test]
    fn measurements_are_levels() {
        let grid = ExperimentGrid::default();
        let q = Quantizer::optimal(1).unwrap();
        let inst = Instance::generate(&grid, &q, 1024, 0).unwrap();
        assert_eq!(inst.y.len(), 1024);
        assert!(inst.y.iter().all(|v| v.abs() == crate::quantizer::q0()));
    }

    #[test]
    fn ht_rejected_above_one_bit() {
        let grid = small_grid();
        assert!(matches!(
            run_cell(&grid, Method::Ht, 2, 128, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert_eq!(
            run_cell(&grid, Method::Ht, 1, 128, 0).unwrap().status,
            RowStatus::Ok
        );
    }

    #[test]
    fn cells_are_deterministic_and_skipped_when_too_small() {
        let grid = small_grid();
        let a = run_cell(&grid, Method::Iht, 2, 128, 1).unwrap();
        let b = run_cell(&grid, Method::Iht, 2, 128, 1).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let s = run_cell(&grid, Method::Qiht, 2, 16, 0).unwrap();
        assert_eq!(s.status, RowStatus::Skipped);
        assert_eq!(s.m, 8);
    }

    #[test]
    fn grid_rows_and_aggregates() {
        let grid = small_grid();
        let table = run_grid(&grid).unwrap();
        assert_eq!(table.rows.len(), 2 * 2 * 3 * 2);
        assert!(table
            .rows
            .iter()
            .all(|r| r.m == r.budget / r.b as usize && r.b as usize * r.m <= r.budget));
        let skipped = table
            .rows
            .iter()
            .filter(|r| r.status == RowStatus::Skipped)
            .count();
        // Only b = 2 at budget 16 (M = 8) falls below 2K.
        assert_eq!(skipped, 3 * 2);
        for agg in &table.aggregates {
            let snrs: Vec<f64> = table
                .rows
                .iter()
                .filter(|r| r.method == agg.method && r.b == agg.b && r.budget == agg.budget)
                .map(|r| r.snr_db.min(SNR_CAP_DB))
                .collect();
            assert_eq!(agg.n, snrs.len());
            let mean = snrs.iter().sum::<f64>() / snrs.len() as f64;
            assert!((agg.mean_snr_db - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn paired_design_shares_instances() {
        let grid = small_grid();
        let q = Quantizer::optimal(2).unwrap();
        let a = Instance::generate(&grid, &q, 128, 2).unwrap();
        let b = Instance::generate(&grid, &q, 128, 2).unwrap();
        assert_eq!(a.x0, b.x0);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn single_trial_aggregates_equal_rows() {
        let grid = ExperimentGrid {
            trials: 1,
            ..small_grid()
        };
        let table = run_grid(&grid).unwrap();
        for agg in &table.aggregates {
            let row = table
                .rows
                .iter()
                .find(|r| r.method == agg.method && r.b == agg.b && r.budget == agg.budget)
                .unwrap();
            assert_eq!(agg.mean_snr_db, row.snr_db.min(SNR_CAP_DB));
            assert_eq!(agg.std_snr_db, 0.0);
        }
    }

    #[test]
    fn infinite_snr_is_capped_in_aggregates() {
        let row = |snr: f64, trial| TrialRow {
            method: Method::Iht,
            b: 1,
            m: 64,
            budget: 64,
            trial,
            snr_db: snr,
            iterations: 3,
            terminated_by: "tolerance".into(),
            status: RowStatus::Ok,
            note: None,
        };
        let table = ResultTable::from_rows(vec![row(f64::INFINITY, 0), row(50.0, 1)]);
        assert!(table.rows[0].is_capped());
        assert_eq!(table.aggregates[0].mean_snr_db, 100.0);
        assert!(table.to_csv().contains(",inf,3,tolerance\n"));
    }

    #[test]
    fn empty_table_csv_is_headers_only() {
        assert_eq!(
            ResultTable::default().to_csv(),
            "method,b,M,budget,trial,snr_db,iterations,terminated_by\n\
             # aggregates\nmethod,b,budget,mean_snr_db,std_snr_db,n\n"
        );
    }

    #[test]
    fn config_parsing() {
        let grid = ExperimentGrid::parse_config(
            "# small sweep\nn = 256\nk=8\nbits = 1, 2\nbudgets = 128,256\ntrials = 5\nseed = 3\nmethods = qiht, ht\n",
        )
        .unwrap();
        assert_eq!(grid.n, 256);
        assert_eq!(grid.bits_list, vec![1, 2]);
        assert_eq!(grid.methods, vec![Method::Qiht, Method::Ht]);
        assert_eq!(grid.master_seed, 3);
        for bad in [
            "n = x",
            "foo = 1",
            "methods = lasso",
            "bits",
            "trials = 0",
            "k = 2000",
        ] {
            assert!(ExperimentGrid::parse_config(bad).is_err(), "{bad}");
        }
    }
}
