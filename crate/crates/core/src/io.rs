//! File formats: item banks, rules, block layouts, estimates and run manifests.
//!
//! Every CSV is comma-separated UTF-8 with a header row. Floats are written
//! in shortest round-trip form, so reading a file back reproduces the
//! values exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::blocks::{BankError, BankItem, BankRole, ItemBank, ItemId};
use crate::estimation::{AbilityEstimate, FitStatus};
use crate::irt::ItemParams;
use crate::metrics::{ItemEfficiency, OverallSummary};
use crate::sim::{ArmFit, DesignArm, ReplicateResult};

pub const BUNDLED_CALIBRATION: &str = include_str!("../data/calibration_true.csv");
pub const BUNDLED_OPERATIONAL: &str = include_str!("../data/operational_synthetic.csv");

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error("{0}")]
    Schema(String),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.to_path_buf(), source }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(file_err(path))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(file_err(path))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankRow {
    item_id: u32,
    a: f64,
    b: f64,
    c: f64,
}

fn csv_rows<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>, IoError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(IoError::from)
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    // serde only emits the header together with the first record
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| IoError::Schema(e.to_string()))
}

/// Parses an `item_id,a,b,c` bank. Extra or missing columns are errors.
pub fn parse_bank<R: Read>(reader: R, role: BankRole) -> Result<ItemBank, IoError> {
    let rows: Vec<BankRow> = csv_rows(reader)?;
    let items = rows
        .into_iter()
        .map(|r| BankItem { id: ItemId(r.item_id), params: ItemParams { a: r.a, b: r.b, c: r.c } })
        .collect();
    Ok(ItemBank::new(items, role)?)
}

pub fn read_bank(path: &Path, role: BankRole) -> Result<ItemBank, IoError> {
    parse_bank(fs::File::open(path).map_err(file_err(path))?, role)
}

pub fn bank_csv(bank: &ItemBank) -> Result<Vec<u8>, IoError> {
    let rows: Vec<BankRow> = bank
        .items()
        .iter()
        .map(|it| BankRow { item_id: it.id.0, a: it.params.a, b: it.params.b, c: it.params.c })
        .collect();
    csv_bytes(&rows, &["item_id", "a", "b", "c"])
}

pub fn bundled_calibration_bank() -> ItemBank {
    parse_bank(BUNDLED_CALIBRATION.as_bytes(), BankRole::Calibration).expect("bundled calibration bank parses")
}

pub fn bundled_operational_bank() -> ItemBank {
    parse_bank(BUNDLED_OPERATIONAL.as_bytes(), BankRole::Operational).expect("bundled operational bank parses")
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, IoError> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// One fitted item under one design in one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateRow {
    pub replicate: usize,
    pub item_id: ItemId,
    pub design: DesignArm,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub status: FitStatus,
    pub n_responses: usize,
    pub iterations: usize,
}

pub const ESTIMATE_HEADER: [&str; 9] =
    ["replicate", "item_id", "design", "a", "b", "c", "status", "n_responses", "iterations"];

pub fn estimate_rows(replicates: &[ReplicateResult]) -> Vec<EstimateRow> {
    replicates
        .iter()
        .flat_map(|r| {
            r.fits.iter().map(move |f| EstimateRow {
                replicate: r.replicate,
                item_id: f.item_id,
                design: f.arm,
                a: f.estimate.a,
                b: f.estimate.b,
                c: f.estimate.c,
                status: f.status,
                n_responses: f.n_responses,
                iterations: f.iterations,
            })
        })
        .collect()
}

pub fn estimates_csv(rows: &[EstimateRow]) -> Result<Vec<u8>, IoError> {
    csv_bytes(rows, &ESTIMATE_HEADER)
}

pub fn read_estimates(path: &Path) -> Result<Vec<EstimateRow>, IoError> {
    csv_rows(fs::File::open(path).map_err(file_err(path))?)
}

/// Regroups estimate rows into replicates, in replicate order.
pub fn replicates_from_rows(rows: &[EstimateRow]) -> Vec<ReplicateResult> {
    let mut out: Vec<ReplicateResult> = Vec::new();
    let mut sorted = rows.to_vec();
    sorted.sort_by_key(|r| r.replicate);
    for r in sorted {
        if out.last().map(|x| x.replicate) != Some(r.replicate) {
            out.push(ReplicateResult { replicate: r.replicate, fits: Vec::new() });
        }
        out.last_mut().expect("pushed above").fits.push(ArmFit {
            item_id: r.item_id,
            arm: r.design,
            estimate: ItemParams { a: r.a, b: r.b, c: r.c },
            status: r.status,
            n_responses: r.n_responses,
            iterations: r.iterations,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbilityRow {
    pub examinee: usize,
    pub theta: f64,
}

pub fn abilities_csv(thetas: &[f64]) -> Result<Vec<u8>, IoError> {
    let rows: Vec<AbilityRow> =
        thetas.iter().enumerate().map(|(examinee, &theta)| AbilityRow { examinee, theta }).collect();
    csv_bytes(&rows, &["examinee", "theta"])
}

pub fn read_abilities(path: &Path) -> Result<Vec<f64>, IoError> {
    let rows: Vec<AbilityRow> = csv_rows(fs::File::open(path).map_err(file_err(path))?)?;
    Ok(rows.into_iter().map(|r| r.theta).collect())
}

pub fn ability_estimates_csv(est: &[AbilityEstimate]) -> Result<Vec<u8>, IoError> {
    csv_bytes(est, &["examinee", "raw", "normalized"])
}

pub fn efficiencies_csv(rows: &[ItemEfficiency]) -> Result<Vec<u8>, IoError> {
    csv_bytes(rows, &["item_id", "block", "position", "re_d", "re_cc", "re_a"])
}

pub fn read_efficiencies(path: &Path) -> Result<Vec<ItemEfficiency>, IoError> {
    csv_rows(fs::File::open(path).map_err(file_err(path))?)
}

/// Per-item results in the layout `Block, Pos, RE_D, RE_CC, RE_A, a, b, c, Item`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemTableRow {
    #[serde(rename = "Block")]
    pub block: usize,
    #[serde(rename = "Pos")]
    pub position: usize,
    #[serde(rename = "RE_D")]
    pub re_d: f64,
    #[serde(rename = "RE_CC")]
    pub re_cc: f64,
    #[serde(rename = "RE_A")]
    pub re_a: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(rename = "Item")]
    pub item: ItemId,
    /// Replicates dropped because either design's fit was unusable.
    pub excluded: usize,
}

pub fn item_table_csv(rows: &[ItemTableRow]) -> Result<Vec<u8>, IoError> {
    csv_bytes(rows, &["Block", "Pos", "RE_D", "RE_CC", "RE_A", "a", "b", "c", "Item", "excluded"])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallRow {
    pub case: String,
    pub re_d: f64,
    pub re_cc: f64,
    pub re_a: f64,
    pub items: usize,
    /// Bootstrap interval for `re_d`, when replicates are available.
    pub re_d_lo: Option<f64>,
    pub re_d_hi: Option<f64>,
}

impl OverallRow {
    pub fn new(case: &str, s: &OverallSummary) -> Self {
        OverallRow {
            case: case.to_string(),
            re_d: s.re_d,
            re_cc: s.re_cc,
            re_a: s.re_a,
            items: s.items,
            re_d_lo: None,
            re_d_hi: None,
        }
    }
}

pub fn overall_csv(rows: &[OverallRow]) -> Result<Vec<u8>, IoError> {
    csv_bytes(rows, &["case", "re_d", "re_cc", "re_a", "items", "re_d_lo", "re_d_hi"])
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(name: impl Into<String>, bytes: &[u8]) -> Self {
        FileDigest { name: name.into(), sha256: sha256_hex(bytes) }
    }
}

/// What a command read and wrote. Holds no timings so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub master_seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Collects output files so the manifest can list their digests.
#[derive(Debug, Default)]
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<FileDigest>,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self, IoError> {
        fs::create_dir_all(dir).map_err(file_err(dir))?;
        Ok(OutputSet { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, IoError> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).map_err(file_err(&path))?;
        f.write_all(bytes).map_err(file_err(&path))?;
        self.written.push(FileDigest::of(name, bytes));
        Ok(path)
    }

    pub fn digests(&self) -> &[FileDigest] {
        &self.written
    }
}
