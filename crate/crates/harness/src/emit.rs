//! CSV and JSON output with a fixed column order.
//!
//! Floats are written with 17 significant digits (`1.2345678901234567e0`)
//! so every value parses back to the same `f64`. Non-finite values are
//! spelled `nan`, `inf` and `-inf` in both formats.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::metrics::{ReplicateRow, SummaryRow};

pub const REPLICATE_COLUMNS: [&str; 14] = [
    "experiment",
    "strategy",
    "gamma",
    "replicate",
    "seed",
    "scheme",
    "ok",
    "error",
    "n_iterations",
    "log_evidence",
    "sq_error",
    "ks",
    "pooled_ess",
    "wall_clock_s",
];

pub const SUMMARY_COLUMNS: [&str; 13] = [
    "experiment",
    "strategy",
    "gamma",
    "scheme",
    "n_ok",
    "n_failed",
    "log_evidence_mean",
    "log_evidence_var",
    "mse",
    "ks_mean",
    "ks_std",
    "pooled_ess_mean",
    "wall_clock_mean_s",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn parse_float(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| HarnessError::config(format!("not a number: {s:?}")))
}

fn parse_field<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| HarnessError::config(format!("cannot parse field {s:?}")))
}

/// Serde adapter keeping non-finite floats representable in JSON.
pub mod json_float {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::format_float(*v))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("not a number: {other:?}"))),
            },
        }
    }
}

fn replicate_record(r: &ReplicateRow) -> Vec<String> {
    vec![
        r.experiment.clone(),
        r.strategy.clone(),
        format_float(r.gamma),
        r.replicate.to_string(),
        r.seed.to_string(),
        r.scheme.clone(),
        r.ok.to_string(),
        r.error.clone(),
        r.n_iterations.to_string(),
        format_float(r.log_evidence),
        format_float(r.sq_error),
        format_float(r.ks),
        format_float(r.pooled_ess),
        format_float(r.wall_clock_s),
    ]
}

fn summary_record(s: &SummaryRow) -> Vec<String> {
    vec![
        s.experiment.clone(),
        s.strategy.clone(),
        format_float(s.gamma),
        s.scheme.clone(),
        s.n_ok.to_string(),
        s.n_failed.to_string(),
        format_float(s.log_evidence_mean),
        format_float(s.log_evidence_var),
        format_float(s.mse),
        format_float(s.ks_mean),
        format_float(s.ks_std),
        format_float(s.pooled_ess_mean),
        format_float(s.wall_clock_mean_s),
    ]
}

fn write_csv<W: Write>(out: W, header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for rec in records {
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

pub fn write_replicates_csv<W: Write>(out: W, rows: &[ReplicateRow]) -> Result<()> {
    write_csv(out, &REPLICATE_COLUMNS, rows.iter().map(replicate_record))
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    write_csv(out, &SUMMARY_COLUMNS, rows.iter().map(summary_record))
}

fn read_records<R: std::io::Read>(input: R, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(HarnessError::config(format!("unexpected CSV header {found:?}")));
    }
    Ok(r.records().collect::<std::result::Result<_, _>>()?)
}

pub fn read_replicates_csv<R: std::io::Read>(input: R) -> Result<Vec<ReplicateRow>> {
    read_records(input, &REPLICATE_COLUMNS)?
        .iter()
        .map(|f| {
            Ok(ReplicateRow {
                experiment: f[0].to_string(),
                strategy: f[1].to_string(),
                gamma: parse_float(&f[2])?,
                replicate: parse_field(&f[3])?,
                seed: parse_field(&f[4])?,
                scheme: f[5].to_string(),
                ok: parse_field(&f[6])?,
                error: f[7].to_string(),
                n_iterations: parse_field(&f[8])?,
                log_evidence: parse_float(&f[9])?,
                sq_error: parse_float(&f[10])?,
                ks: parse_float(&f[11])?,
                pooled_ess: parse_float(&f[12])?,
                wall_clock_s: parse_float(&f[13])?,
            })
        })
        .collect()
}

pub fn read_summary_csv<R: std::io::Read>(input: R) -> Result<Vec<SummaryRow>> {
    read_records(input, &SUMMARY_COLUMNS)?
        .iter()
        .map(|f| {
            Ok(SummaryRow {
                experiment: f[0].to_string(),
                strategy: f[1].to_string(),
                gamma: parse_float(&f[2])?,
                scheme: f[3].to_string(),
                n_ok: parse_field(&f[4])?,
                n_failed: parse_field(&f[5])?,
                log_evidence_mean: parse_float(&f[6])?,
                log_evidence_var: parse_float(&f[7])?,
                mse: parse_float(&f[8])?,
                ks_mean: parse_float(&f[9])?,
                ks_std: parse_float(&f[10])?,
                pooled_ess_mean: parse_float(&f[11])?,
                wall_clock_mean_s: parse_float(&f[12])?,
            })
        })
        .collect()
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| HarnessError::io(path, e))
}

/// Writes `<id>_summary.<ext>` and `<id>_replicates.<ext>` into `dir`,
/// creating it if needed. Returns the two paths.
pub fn emit(
    dir: &Path,
    id: &str,
    summary: &[SummaryRow],
    replicates: &[ReplicateRow],
    format: Format,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let ext = format.extension();
    let sp = dir.join(format!("{id}_summary.{ext}"));
    let rp = dir.join(format!("{id}_replicates.{ext}"));
    match format {
        Format::Csv => {
            write_summary_csv(create(&sp)?, summary)?;
            write_replicates_csv(create(&rp)?, replicates)?;
        }
        Format::Json => {
            write_text(&sp, &to_json(summary)?)?;
            write_text(&rp, &to_json(replicates)?)?;
        }
    }
    Ok((sp, rp))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
