//! Partitioned columnar persistence.
//!
//! Tables live in a small self-contained columnar container: a JSON schema
//! block (column names, dtypes and feature-group annotations) followed by one
//! contiguous block per column, with per-column byte offsets in the header.
//! Reading a column subset seeks straight to the wanted blocks — no full-file
//! scan. Datasets are laid out hive-style as
//! `route_id=<id>/date=<iso>/part-0.pccol`, and partition listing prunes by
//! route and date range before touching any file.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAGIC: &[u8; 8] = b"PCCOL01\0";

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a columnar file (bad magic)")]
    BadMagic,
    #[error("malformed schema: {0}")]
    BadSchema(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("column length {got} does not match table rows {rows}")]
    LengthMismatch { got: usize, rows: usize },
    #[error("bad partition directory name: {0}")]
    BadPartition(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F64,
    I64,
    Str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub dtype: DType,
    /// Feature-group annotation embedded in the schema.
    pub group: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    F64(Vec<f64>),
    I64(Vec<i64>),
    Str(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::F64(v) => v.len(),
            ColumnData::I64(v) => v.len(),
            ColumnData::Str(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dtype(&self) -> DType {
        match self {
            ColumnData::F64(_) => DType::F64,
            ColumnData::I64(_) => DType::I64,
            ColumnData::Str(_) => DType::Str,
        }
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match self {
            ColumnData::F64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<&[i64]> {
        match self {
            ColumnData::I64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str_col(&self) -> Option<&[String]> {
        match self {
            ColumnData::Str(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<(ColumnSpec, ColumnData)>,
    pub n_rows: usize,
}

impl Table {
    pub fn new(n_rows: usize) -> Self {
        Self { columns: Vec::new(), n_rows }
    }

    pub fn push(&mut self, name: &str, group: &str, data: ColumnData) -> Result<(), StorageError> {
        if data.len() != self.n_rows {
            return Err(StorageError::LengthMismatch { got: data.len(), rows: self.n_rows });
        }
        self.columns.push((ColumnSpec { name: name.into(), dtype: data.dtype(), group: group.into() }, data));
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        self.columns.iter().find(|(s, _)| s.name == name).map(|(_, d)| d)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    n_rows: usize,
    columns: Vec<ColumnSpec>,
    /// Byte offset of each column block, relative to the data section start.
    offsets: Vec<u64>,
    lengths: Vec<u64>,
}

fn encode_column(data: &ColumnData) -> Vec<u8> {
    let mut buf = Vec::new();
    match data {
        ColumnData::F64(v) => {
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        ColumnData::I64(v) => {
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        ColumnData::Str(v) => {
            // Dictionary block then u32 codes.
            let mut dict: Vec<&str> = v.iter().map(|s| s.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
            dict.sort_unstable();
            buf.extend_from_slice(&(dict.len() as u32).to_le_bytes());
            for s in &dict {
                buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
                buf.extend_from_slice(s.as_bytes());
            }
            for s in v {
                let code = dict.binary_search(&s.as_str()).expect("dict covers all values") as u32;
                buf.extend_from_slice(&code.to_le_bytes());
            }
        }
    }
    buf
}

fn decode_column(spec: &ColumnSpec, n_rows: usize, bytes: &[u8]) -> Result<ColumnData, StorageError> {
    let bad = |m: &str| StorageError::BadSchema(format!("column {}: {m}", spec.name));
    match spec.dtype {
        DType::F64 => {
            if bytes.len() != n_rows * 8 {
                return Err(bad("wrong block size"));
            }
            Ok(ColumnData::F64(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()))
        }
        DType::I64 => {
            if bytes.len() != n_rows * 8 {
                return Err(bad("wrong block size"));
            }
            Ok(ColumnData::I64(bytes.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap())).collect()))
        }
        DType::Str => {
            let mut at = 0usize;
            let take_u32 = |at: &mut usize| -> Result<u32, StorageError> {
                let end = *at + 4;
                if end > bytes.len() {
                    return Err(bad("truncated dictionary"));
                }
                let v = u32::from_le_bytes(bytes[*at..end].try_into().unwrap());
                *at = end;
                Ok(v)
            };
            let dict_len = take_u32(&mut at)? as usize;
            let mut dict = Vec::with_capacity(dict_len);
            for _ in 0..dict_len {
                let len = take_u32(&mut at)? as usize;
                let end = at + len;
                if end > bytes.len() {
                    return Err(bad("truncated dictionary entry"));
                }
                dict.push(String::from_utf8(bytes[at..end].to_vec()).map_err(|_| bad("non-utf8 dictionary"))?);
                at = end;
            }
            let mut out = Vec::with_capacity(n_rows);
            for _ in 0..n_rows {
                let code = take_u32(&mut at)? as usize;
                let s = dict.get(code).ok_or_else(|| bad("code out of range"))?;
                out.push(s.clone());
            }
            Ok(ColumnData::Str(out))
        }
    }
}

/// Writes a table to one container file (atomically via a temp sibling).
pub fn write_table(path: &Path, table: &Table) -> Result<(), StorageError> {
    let blocks: Vec<Vec<u8>> = table.columns.iter().map(|(_, d)| encode_column(d)).collect();
    let mut offsets = Vec::with_capacity(blocks.len());
    let mut lengths = Vec::with_capacity(blocks.len());
    let mut at = 0u64;
    for b in &blocks {
        offsets.push(at);
        lengths.push(b.len() as u64);
        at += b.len() as u64;
    }
    let header = Header {
        n_rows: table.n_rows,
        columns: table.columns.iter().map(|(s, _)| s.clone()).collect(),
        offsets,
        lengths,
    };
    let header_json = serde_json::to_vec(&header).expect("serializable");
    let tmp = path.with_extension("pccol.tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(MAGIC)?;
        f.write_all(&(header_json.len() as u64).to_le_bytes())?;
        f.write_all(&header_json)?;
        for b in &blocks {
            f.write_all(b)?;
        }
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn read_header(f: &mut File) -> Result<(Header, u64), StorageError> {
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(StorageError::BadMagic);
    }
    let mut len8 = [0u8; 8];
    f.read_exact(&mut len8)?;
    let hlen = u64::from_le_bytes(len8);
    let mut hjson = vec![0u8; hlen as usize];
    f.read_exact(&mut hjson)?;
    let header: Header =
        serde_json::from_slice(&hjson).map_err(|e| StorageError::BadSchema(e.to_string()))?;
    Ok((header, 16 + hlen))
}

/// Schema without touching any column block.
pub fn read_schema(path: &Path) -> Result<(Vec<ColumnSpec>, usize), StorageError> {
    let mut f = File::open(path)?;
    let (header, _) = read_header(&mut f)?;
    Ok((header.columns, header.n_rows))
}

/// Reads only the named columns (in the given order), seeking past everything
/// else. Returns the table plus the number of data-section bytes actually
/// read, which the tests use to prove column projection skips unrequested
/// blocks.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<(Table, u64), StorageError> {
    let mut f = File::open(path)?;
    let (header, data_start) = read_header(&mut f)?;
    let mut table = Table::new(header.n_rows);
    let mut bytes_read = 0u64;
    for &name in names {
        let idx = header
            .columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| StorageError::UnknownColumn(name.into()))?;
        let spec = header.columns[idx].clone();
        f.seek(SeekFrom::Start(data_start + header.offsets[idx]))?;
        let mut block = vec![0u8; header.lengths[idx] as usize];
        f.read_exact(&mut block)?;
        bytes_read += header.lengths[idx];
        let data = decode_column(&spec, header.n_rows, &block)?;
        table.columns.push((spec, data));
    }
    Ok((table, bytes_read))
}

/// Reads every column.
pub fn read_table(path: &Path) -> Result<Table, StorageError> {
    let (specs, _) = read_schema(path)?;
    let names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    Ok(read_columns(path, &names)?.0)
}

fn escape_partition_value(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    for c in v.chars() {
        match c {
            '/' | '=' | '%' | '\\' => out.push_str(&format!("%{:02X}", c as u32)),
            _ => out.push(c),
        }
    }
    out
}

fn unescape_partition_value(v: &str) -> Result<String, StorageError> {
    let bytes = v.as_bytes();
    let mut out = String::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            if i + 2 >= bytes.len() + 1 {
                return Err(StorageError::BadPartition(v.into()));
            }
            let hexpart = std::str::from_utf8(&bytes[i + 1..i + 3]).map_err(|_| StorageError::BadPartition(v.into()))?;
            let code = u8::from_str_radix(hexpart, 16).map_err(|_| StorageError::BadPartition(v.into()))?;
            out.push(code as char);
            i += 3;
        } else {
            out.push(bytes[i] as char);
            i += 1;
        }
    }
    Ok(out)
}

/// `root/route_id=<id>/date=<iso>` partition directory.
pub fn partition_dir(root: &Path, route_id: &str, date: NaiveDate) -> PathBuf {
    root.join(format!("route_id={}", escape_partition_value(route_id)))
        .join(format!("date={date}"))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Partition {
    pub route_id: String,
    pub date: NaiveDate,
    pub path: PathBuf,
}

/// Lists partition files under the hive layout, pruning by route set and
/// date range **before** descending into non-matching directories.
pub fn list_partitions(
    root: &Path,
    routes: Option<&BTreeSet<String>>,
    date_range: Option<(NaiveDate, NaiveDate)>,
) -> Result<Vec<Partition>, StorageError> {
    let mut out = Vec::new();
    if !root.exists() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(raw) = name.strip_prefix("route_id=") else {
            continue;
        };
        let route_id = unescape_partition_value(raw)?;
        if let Some(filter) = routes {
            if !filter.contains(&route_id) {
                continue; // pruned without reading the subtree
            }
        }
        for dentry in std::fs::read_dir(entry.path())? {
            let dentry = dentry?;
            if !dentry.file_type()?.is_dir() {
                continue;
            }
            let dname = dentry.file_name().to_string_lossy().into_owned();
            let Some(iso) = dname.strip_prefix("date=") else {
                continue;
            };
            let date: NaiveDate = iso.parse().map_err(|_| StorageError::BadPartition(dname.clone()))?;
            if let Some((lo, hi)) = date_range {
                if date < lo || date > hi {
                    continue;
                }
            }
            for fentry in std::fs::read_dir(dentry.path())? {
                let fentry = fentry?;
                let fname = fentry.file_name().to_string_lossy().into_owned();
                if fname.starts_with("part-") && fname.ends_with(".pccol") {
                    out.push(Partition { route_id: route_id.clone(), date, path: fentry.path() });
                }
            }
        }
    }
    out.sort();
    Ok(out)
}
