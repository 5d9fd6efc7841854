//! Dataset files.
//!
//! JSON Lines is the native format: an optional first line
//! `{"meta":{...}}` with string values in key order, then one bag per line
//! with fields in the fixed order `id, label, tag?, instances, truth`.
//! Floats are written by [`crate::fmt::fmt_f64`], so saving is canonical and
//! loading a saved file reproduces the dataset exactly.
//!
//! CSV is a flat fallback with header `bag_id,label,f1,...,fd` and one row
//! per instance; truths and tags are not representable there.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use super::{Bag, Instance, InstanceRole, MilDataset};
use crate::error::{Error, Result};
use crate::fmt::fmt_f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Jsonl,
    Csv,
}

impl DataFormat {
    /// Guesses the format from the file extension; anything but `.csv` is JSON Lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BagRecord {
    id: String,
    label: u8,
    #[serde(default)]
    tag: Option<String>,
    instances: Vec<Vec<f64>>,
    #[serde(default)]
    truth: Option<Vec<InstanceRole>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaRecord {
    meta: BTreeMap<String, String>,
}

pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<MilDataset> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut ds = match format {
        DataFormat::Jsonl => read_jsonl(reader)?,
        DataFormat::Csv => read_csv(reader)?,
    };
    ds.set_source(path.to_path_buf());
    Ok(ds)
}

pub fn save_dataset(dataset: &MilDataset, path: impl AsRef<Path>, format: DataFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_dataset(dataset, &mut out, format)?;
    out.flush()?;
    Ok(())
}

pub fn write_dataset(dataset: &MilDataset, out: &mut impl Write, format: DataFormat) -> Result<()> {
    match format {
        DataFormat::Jsonl => write_jsonl(dataset, out),
        DataFormat::Csv => write_csv(dataset, out),
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization")
}

fn write_jsonl(dataset: &MilDataset, out: &mut impl Write) -> Result<()> {
    if !dataset.meta().is_empty() {
        let body: Vec<String> = dataset
            .meta()
            .iter()
            .map(|(k, v)| format!("{}:{}", json_str(k), json_str(v)))
            .collect();
        writeln!(out, "{{\"meta\":{{{}}}}}", body.join(","))?;
    }
    let mut line = String::new();
    for bag in dataset.bags() {
        line.clear();
        write!(line, "{{\"id\":{},\"label\":{}", json_str(bag.id()), bag.label()).unwrap();
        if let Some(tag) = bag.tag() {
            write!(line, ",\"tag\":{}", json_str(tag)).unwrap();
        }
        line.push_str(",\"instances\":[");
        for (i, inst) in bag.instances().iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push('[');
            for (j, v) in inst.features.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&fmt_f64(*v));
            }
            line.push(']');
        }
        line.push_str("],\"truth\":");
        if bag.instances().iter().all(|i| i.truth == InstanceRole::Unknown) {
            line.push_str("null");
        } else {
            line.push('[');
            for (i, inst) in bag.instances().iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                write!(line, "\"{}\"", inst.truth.as_str()).unwrap();
            }
            line.push(']');
        }
        line.push('}');
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn read_jsonl(reader: impl BufRead) -> Result<MilDataset> {
    let mut bags = Vec::new();
    let mut meta = BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| Error::Parse { line: lineno, message: e.to_string() };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(parse_err)?;
        if value.get("meta").is_some() {
            if !bags.is_empty() || !meta.is_empty() {
                return Err(Error::Parse { line: lineno, message: "meta record must be the first line".into() });
            }
            let record: MetaRecord = serde_json::from_value(value).map_err(parse_err)?;
            meta = record.meta;
            continue;
        }
        let record: BagRecord = serde_json::from_value(value).map_err(parse_err)?;
        let instances = match record.truth {
            Some(truth) if truth.len() != record.instances.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("{} truths for {} instances", truth.len(), record.instances.len()),
                })
            }
            Some(truth) => record
                .instances
                .into_iter()
                .zip(truth)
                .map(|(f, t)| Instance::with_truth(f, t))
                .collect(),
            None => record.instances.into_iter().map(Instance::new).collect::<Vec<_>>(),
        };
        let mut bag = Bag::new(record.id, instances, record.label).map_err(|e| match e {
            Error::DimMismatch { .. } => e,
            other => Error::Parse { line: lineno, message: other.to_string() },
        })?;
        if let Some(tag) = record.tag {
            bag = bag.with_tag(tag);
        }
        match dim {
            None => dim = Some(bag.dim()),
            Some(d) if d != bag.dim() => return Err(Error::DimMismatch { expected: d, found: bag.dim() }),
            _ => {}
        }
        bags.push(bag);
    }
    MilDataset::with_meta(bags, meta)
}

fn write_csv(dataset: &MilDataset, out: &mut impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["bag_id".to_string(), "label".to_string()];
    header.extend((1..=dataset.dim()).map(|i| format!("f{i}")));
    w.write_record(&header).map_err(csv_io)?;
    for bag in dataset.bags() {
        for inst in bag.instances() {
            let mut row = vec![bag.id().to_string(), bag.label().to_string()];
            row.extend(inst.features.iter().map(|v| fmt_f64(*v)));
            w.write_record(&row).map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn read_csv(reader: impl BufRead) -> Result<MilDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    if header.len() < 3 || &header[0] != "bag_id" || &header[1] != "label" {
        return Err(Error::Parse { line: 1, message: "expected header bag_id,label,f1,...".into() });
    }
    let dim = header.len() - 2;

    // Rows of one bag need not be contiguous; bags keep first-appearance order.
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, (u8, Vec<Instance>)> = BTreeMap::new();
    for (idx, record) in rdr.records().enumerate() {
        let lineno = idx + 2;
        let record = record.map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
        if record.len() != header.len() {
            return Err(Error::DimMismatch { expected: dim, found: record.len().saturating_sub(2) });
        }
        let id = record[0].to_string();
        let label: u8 = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line: lineno, message: format!("bad label `{}`", &record[1]) })?;
        let features = record
            .iter()
            .skip(2)
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
        let entry = grouped.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (label, Vec::new())
        });
        if entry.0 != label {
            return Err(Error::Parse { line: lineno, message: format!("bag `{id}` has conflicting labels") });
        }
        entry.1.push(Instance::new(features));
    }
    let bags = order
        .into_iter()
        .map(|id| {
            let (label, instances) = grouped.remove(&id).expect("grouped bag");
            Bag::new(id, instances, label)
        })
        .collect::<Result<Vec<_>>>()?;
    MilDataset::new(bags)
}
