//! File ingestion and serialization for summary statistics.
//!
//! Marginal inputs are TSV (outcome: `snp`, `beta`, `se`; exposure: `snp`
//! followed by `beta_<id>`/`se_<id>` pairs) plus square correlation CSVs
//! with identifier headers. Joint statistics round-trip through a single
//! JSON document with row-major nested arrays.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sumstats::{JointSummaryStats, MarginalSummaryStats};

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path_str(path),
        line,
        message: message.into(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path_str(path),
        source,
    }
}

fn record_line(record: &csv::StringRecord, fallback: usize) -> usize {
    record
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback)
}

fn parse_float(path: &Path, line: usize, column: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("column `{column}`: cannot parse `{raw}` as a number")))
}

/// One row of an outcome summary file.
#[derive(Debug)]
pub struct OutcomeTable {
    pub snp_ids: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
}

/// Parse the outcome TSV (`snp`, `beta`, `se`, header required).
pub fn read_outcome_tsv(path: &Path) -> Result<OutcomeTable> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let expected = ["snp", "beta", "se"];
    for name in expected {
        if !headers.iter().any(|h| h == name) {
            return Err(parse_err(path, 1, format!("missing required column `{name}`")));
        }
    }
    let idx = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (snp_i, beta_i, se_i) = (idx("snp"), idx("beta"), idx("se"));

    let mut out = OutcomeTable {
        snp_ids: Vec::new(),
        beta: Vec::new(),
        se: Vec::new(),
    };
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, row + 2, e.to_string()))?;
        let line = record_line(&record, row + 2);
        let field = |i: usize, name: &str| -> Result<&str> {
            record
                .get(i)
                .ok_or_else(|| parse_err(path, line, format!("missing `{name}` field")))
        };
        out.snp_ids.push(field(snp_i, "snp")?.to_string());
        out.beta.push(parse_float(path, line, "beta", field(beta_i, "beta")?)?);
        out.se.push(parse_float(path, line, "se", field(se_i, "se")?)?);
    }
    if out.snp_ids.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    Ok(out)
}

/// Exposure summary table: `beta` and `se` are m×d in file row order.
#[derive(Debug)]
pub struct ExposureTable {
    pub snp_ids: Vec<String>,
    pub covariate_ids: Vec<String>,
    pub beta: DMatrix<f64>,
    pub se: DMatrix<f64>,
}

/// Parse the exposure TSV: `snp` column, then `beta_<id>`/`se_<id>` pairs.
pub fn read_exposure_tsv(path: &Path) -> Result<ExposureTable> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if headers.get(0) != Some("snp") {
        return Err(parse_err(path, 1, "first column must be `snp`"));
    }
    let mut covariate_ids = Vec::new();
    let mut beta_cols = Vec::new();
    let mut se_cols = Vec::new();
    for (i, name) in headers.iter().enumerate().skip(1) {
        if let Some(id) = name.strip_prefix("beta_") {
            covariate_ids.push(id.to_string());
            beta_cols.push(i);
        } else if let Some(id) = name.strip_prefix("se_") {
            let expect = covariate_ids.last().map(String::as_str);
            if expect != Some(id) {
                return Err(parse_err(
                    path,
                    1,
                    format!("column `se_{id}` does not follow a matching `beta_{id}` column"),
                ));
            }
            se_cols.push(i);
        } else {
            return Err(parse_err(
                path,
                1,
                format!("unexpected column `{name}`; expected beta_<id>/se_<id> pairs"),
            ));
        }
    }
    if covariate_ids.is_empty() {
        return Err(parse_err(path, 1, "no beta_<id> columns found"));
    }
    if se_cols.len() != beta_cols.len() {
        return Err(parse_err(path, 1, "unpaired beta_<id> column (missing se_<id>)"));
    }

    let d = covariate_ids.len();
    let mut snp_ids = Vec::new();
    let mut beta_rows: Vec<f64> = Vec::new();
    let mut se_rows: Vec<f64> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, row + 2, e.to_string()))?;
        let line = record_line(&record, row + 2);
        snp_ids.push(
            record
                .get(0)
                .ok_or_else(|| parse_err(path, line, "missing `snp` field"))?
                .to_string(),
        );
        for k in 0..d {
            let name = format!("beta_{}", covariate_ids[k]);
            let raw = record
                .get(beta_cols[k])
                .ok_or_else(|| parse_err(path, line, format!("missing `{name}` field")))?;
            beta_rows.push(parse_float(path, line, &name, raw)?);
            let name = format!("se_{}", covariate_ids[k]);
            let raw = record
                .get(se_cols[k])
                .ok_or_else(|| parse_err(path, line, format!("missing `{name}` field")))?;
            se_rows.push(parse_float(path, line, &name, raw)?);
        }
    }
    if snp_ids.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    let m = snp_ids.len();
    Ok(ExposureTable {
        snp_ids,
        covariate_ids,
        beta: DMatrix::from_row_slice(m, d, &beta_rows),
        se: DMatrix::from_row_slice(m, d, &se_rows),
    })
}

/// Parse a square correlation CSV with an identifier header row and a
/// leading identifier column.
pub fn read_correlation_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b',')
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if headers.len() < 2 {
        return Err(parse_err(path, 1, "expected identifier header row"));
    }
    let ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let k = ids.len();
    let mut values = Vec::with_capacity(k * k);
    let mut row_ids = Vec::with_capacity(k);
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, row + 2, e.to_string()))?;
        let line = record_line(&record, row + 2);
        if record.len() != k + 1 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", k + 1, record.len()),
            ));
        }
        row_ids.push(record.get(0).unwrap().to_string());
        for j in 0..k {
            values.push(parse_float(path, line, &ids[j], record.get(j + 1).unwrap())?);
        }
    }
    if row_ids.len() != k {
        return Err(parse_err(
            path,
            1,
            format!("matrix is {}x{k}, expected square", row_ids.len()),
        ));
    }
    if row_ids != ids {
        return Err(parse_err(path, 1, "row identifiers do not match column header order"));
    }
    Ok((ids, DMatrix::from_row_slice(k, k, &values)))
}

/// Reorder a correlation matrix read from file so its rows/columns follow
/// `wanted`. The file may contain extra identifiers; missing ones fail.
fn align_correlation(
    wanted: &[String],
    file_ids: &[String],
    mat: &DMatrix<f64>,
    path: &Path,
) -> Result<DMatrix<f64>> {
    let lookup: std::collections::HashMap<&str, usize> = file_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut index = Vec::with_capacity(wanted.len());
    for id in wanted {
        match lookup.get(id.as_str()) {
            Some(&i) => index.push(i),
            None => {
                return Err(parse_err(
                    path,
                    1,
                    format!("identifier `{id}` not present in correlation matrix"),
                ))
            }
        }
    }
    Ok(DMatrix::from_fn(wanted.len(), wanted.len(), |i, j| {
        mat[(index[i], index[j])]
    }))
}

/// Correlation-matrix inputs for [`assemble_marginal`]: either one shared
/// instrument LD matrix or separate per-study matrices.
pub enum LdInput<'a> {
    Shared(&'a Path),
    Separate { outcome: &'a Path, exposure: &'a Path },
}

/// Assemble a validated [`MarginalSummaryStats`] from parsed files.
///
/// `df_corrected` treats the file standard errors as n−2-corrected (the
/// usual GWAS convention) and rescales them to the uncorrected units used
/// by the conversion: se² × (n − 2) of the owning study.
pub fn assemble_marginal(
    outcome_path: &Path,
    exposure_path: &Path,
    ld: LdInput<'_>,
    x_corr_path: &Path,
    n_a: usize,
    n_b: usize,
    df_corrected: bool,
) -> Result<MarginalSummaryStats> {
    let outcome = read_outcome_tsv(outcome_path)?;
    let exposure = read_exposure_tsv(exposure_path)?;
    if outcome.snp_ids != exposure.snp_ids {
        return Err(Error::dim(format!(
            "outcome file lists {} SNPs but exposure file lists {}; identifiers must match in order",
            outcome.snp_ids.len(),
            exposure.snp_ids.len()
        )));
    }
    if df_corrected && (n_a <= 2 || n_b <= 2) {
        return Err(Error::invalid("--df-corrected requires sample sizes above 2"));
    }

    let (m_za, m_zb) = match ld {
        LdInput::Shared(path) => {
            let (ids, mat) = read_correlation_csv(path)?;
            let aligned = align_correlation(&outcome.snp_ids, &ids, &mat, path)?;
            (aligned.clone(), aligned)
        }
        LdInput::Separate { outcome: pa, exposure: pb } => {
            let (ids_a, mat_a) = read_correlation_csv(pa)?;
            let (ids_b, mat_b) = read_correlation_csv(pb)?;
            (
                align_correlation(&outcome.snp_ids, &ids_a, &mat_a, pa)?,
                align_correlation(&outcome.snp_ids, &ids_b, &mat_b, pb)?,
            )
        }
    };
    let (x_ids, x_mat) = read_correlation_csv(x_corr_path)?;
    let m_x = align_correlation(&exposure.covariate_ids, &x_ids, &x_mat, x_corr_path)?;

    let scale_a = if df_corrected { (n_a - 2) as f64 } else { 1.0 };
    let scale_b = if df_corrected { (n_b - 2) as f64 } else { 1.0 };
    let sigma_eta_sq = DVector::from_fn(outcome.beta.len(), |i, _| outcome.se[i].powi(2) * scale_a);
    let sigma_h_sq = exposure.se.map(|s| s * s * scale_b);
    let eta = DVector::from_vec(outcome.beta.clone());

    MarginalSummaryStats::new(
        eta,
        sigma_eta_sq,
        exposure.beta.clone(),
        sigma_h_sq,
        m_za,
        m_zb,
        m_x,
        n_a,
        n_b,
        outcome.snp_ids,
        exposure.covariate_ids,
    )
}

#[derive(Serialize, Deserialize)]
struct JointJson {
    pi: Vec<f64>,
    sigma_pi: Vec<Vec<f64>>,
    big_pi: Vec<Vec<f64>>,
    sigma_big_pi: Vec<Vec<f64>>,
    n_a: u64,
    n_b: u64,
    snp_ids: Vec<String>,
    covariate_ids: Vec<String>,
}

fn matrix_rows(mat: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..mat.nrows())
        .map(|i| (0..mat.ncols()).map(|j| mat[(i, j)]).collect())
        .collect()
}

fn rows_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::invalid(format!("{what} is empty")));
    }
    let ncols = rows[0].len();
    for r in rows {
        if r.len() != ncols {
            return Err(Error::invalid(format!("{what} rows have unequal lengths")));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Serialize joint summary statistics to the JSON interchange document.
pub fn write_joint_json<W: Write>(joint: &JointSummaryStats, writer: W) -> Result<()> {
    let doc = JointJson {
        pi: joint.pi().iter().copied().collect(),
        sigma_pi: matrix_rows(joint.sigma_pi()),
        big_pi: matrix_rows(joint.big_pi()),
        sigma_big_pi: matrix_rows(joint.sigma_big_pi()),
        n_a: joint.n_a() as u64,
        n_b: joint.n_b() as u64,
        snp_ids: joint.snp_ids().to_vec(),
        covariate_ids: joint.covariate_ids().to_vec(),
    };
    serde_json::to_writer(writer, &doc).map_err(|e| Error::invalid(format!("json write: {e}")))
}

pub fn write_joint_json_file(joint: &JointSummaryStats, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    write_joint_json(joint, BufWriter::new(file))
}

/// Parse and validate joint summary statistics from the JSON document.
pub fn read_joint_json<R: std::io::Read>(reader: R) -> Result<JointSummaryStats> {
    let doc: JointJson =
        serde_json::from_reader(reader).map_err(|e| Error::invalid(format!("json parse: {e}")))?;
    JointSummaryStats::new(
        DVector::from_vec(doc.pi),
        rows_matrix(&doc.sigma_pi, "sigma_pi")?,
        rows_matrix(&doc.big_pi, "big_pi")?,
        rows_matrix(&doc.sigma_big_pi, "sigma_big_pi")?,
        doc.n_a as usize,
        doc.n_b as usize,
        doc.snp_ids,
        doc.covariate_ids,
    )
}

pub fn read_joint_json_file(path: &Path) -> Result<JointSummaryStats> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_joint_json(BufReader::new(file))
}

fn write_correlation_csv(path: &Path, ids: &[String], mat: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let mut run = || -> std::io::Result<()> {
        write!(out, "id")?;
        for id in ids {
            write!(out, ",{id}")?;
        }
        writeln!(out)?;
        for (i, id) in ids.iter().enumerate() {
            write!(out, "{id}")?;
            for j in 0..ids.len() {
                write!(out, ",{}", mat[(i, j)])?;
            }
            writeln!(out)?;
        }
        Ok(())
    };
    run().map_err(|e| io_err(path, e))
}

/// Export marginal statistics in the ingestion format: outcome TSV,
/// exposure TSV, instrument correlation CSVs and covariate correlation CSV.
/// Standard errors are written in the same uncorrected units stored here.
pub fn write_marginal_files(
    marg: &MarginalSummaryStats,
    outcome_path: &Path,
    exposure_path: &Path,
    ld_outcome_path: &Path,
    ld_exposure_path: &Path,
    x_corr_path: &Path,
) -> Result<()> {
    {
        let path = outcome_path;
        let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
        let mut run = || -> std::io::Result<()> {
            writeln!(out, "snp\tbeta\tse")?;
            for i in 0..marg.m() {
                writeln!(
                    out,
                    "{}\t{}\t{}",
                    marg.snp_ids()[i],
                    marg.eta()[i],
                    marg.sigma_eta_sq()[i].sqrt()
                )?;
            }
            Ok(())
        };
        run().map_err(|e| io_err(path, e))?;
    }
    {
        let path = exposure_path;
        let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
        let mut run = || -> std::io::Result<()> {
            write!(out, "snp")?;
            for id in marg.covariate_ids() {
                write!(out, "\tbeta_{id}\tse_{id}")?;
            }
            writeln!(out)?;
            for i in 0..marg.m() {
                write!(out, "{}", marg.snp_ids()[i])?;
                for k in 0..marg.d() {
                    write!(
                        out,
                        "\t{}\t{}",
                        marg.h()[(i, k)],
                        marg.sigma_h_sq()[(i, k)].sqrt()
                    )?;
                }
                writeln!(out)?;
            }
            Ok(())
        };
        run().map_err(|e| io_err(path, e))?;
    }
    write_correlation_csv(ld_outcome_path, marg.snp_ids(), marg.m_za())?;
    write_correlation_csv(ld_exposure_path, marg.snp_ids(), marg.m_zb())?;
    write_correlation_csv(x_corr_path, marg.covariate_ids(), marg.m_x())?;
    Ok(())
}
