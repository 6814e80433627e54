use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::models::{LinkVolume, MeasurementRecord};
use crate::{Error, Result};

/// Record field a counter column feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterField {
    L1l2LoadBytes,
    L1l2StoreBytes,
    L2l3LoadBytes,
    L2l3StoreBytes,
    L3memLoadBytes,
    L3memStoreBytes,
    FpInstructions,
    LoadInstructions,
    StoreInstructions,
    Cycles,
    /// Cachelines of work the other columns are totals over.
    WorkCachelines,
}

/// Maps counter export columns onto record fields. Every column of the
/// export must be mapped or listed in `ignore`.
///
/// ```toml
/// label = "hsw 200^3"
/// ignore = ["Runtime (RDTSC) [s]"]
/// [columns]
/// "L2 load data volume [B]" = "l1l2_load_bytes"
/// "CL updates" = "work_cachelines"
/// ```
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterMapping {
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub ignore: Vec<String>,
    pub columns: BTreeMap<String, CounterField>,
}

pub fn load_counter_mapping(path: impl AsRef<Path>) -> Result<CounterMapping> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Counters(format!("{}: {e}", path.display())))
}

/// Reads a one-row counter export into a measurement record. Totals are
/// divided by the `work_cachelines` column when it is mapped; otherwise the
/// values are taken as per-cacheline already.
pub fn ingest_counters(path: impl AsRef<Path>, mapping: &CounterMapping) -> Result<MeasurementRecord> {
    let path = path.as_ref();
    let err = |m: String| Error::Counters(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(err("file is empty".into()));
    }
    let unknown: Vec<&str> = headers
        .iter()
        .filter(|h| !mapping.columns.contains_key(*h) && !mapping.ignore.iter().any(|i| i == h))
        .collect();
    if !unknown.is_empty() {
        return Err(err(format!(
            "unmapped columns {unknown:?}; map them or list them under `ignore` (columns: {:?})",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = reader.records();
    let row = rows
        .next()
        .ok_or_else(|| err("no data row".into()))?
        .map_err(|e| err(e.to_string()))?;
    if rows.next().is_some() {
        return Err(err("expected exactly one data row".into()));
    }

    let mut values: BTreeMap<CounterField, f64> = BTreeMap::new();
    for (h, cell) in headers.iter().zip(row.iter()) {
        let Some(field) = mapping.columns.get(h) else {
            continue;
        };
        if cell.is_empty() {
            continue;
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| err(format!("column `{h}`: `{cell}` is not a number")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(err(format!("column `{h}`: {v} is not a non-negative count")));
        }
        if values.insert(*field, v).is_some() {
            return Err(err(format!("field {field:?} is mapped from more than one column")));
        }
    }
    let scale = match values.remove(&CounterField::WorkCachelines) {
        Some(w) if w > 0.0 => w,
        Some(_) => return Err(err("work_cachelines must be positive".into())),
        None => 1.0,
    };
    let get = |f: CounterField| values.get(&f).map(|v| v / scale);
    let link = |load: CounterField, store: CounterField| match (get(load), get(store)) {
        (None, None) => None,
        (l, s) => Some(LinkVolume {
            load_bytes: l.unwrap_or(0.0),
            store_bytes: s.unwrap_or(0.0),
        }),
    };
    use CounterField::*;
    let label = if mapping.label.is_empty() {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    } else {
        mapping.label.clone()
    };
    let record = MeasurementRecord {
        label,
        l1l2: link(L1l2LoadBytes, L1l2StoreBytes),
        l2l3: link(L2l3LoadBytes, L2l3StoreBytes),
        l3mem: link(L3memLoadBytes, L3memStoreBytes),
        fp_instructions: get(FpInstructions),
        load_instructions: get(LoadInstructions),
        store_instructions: get(StoreInstructions),
        cycles_per_cl: get(Cycles),
    };
    if record.is_empty() && record.cycles_per_cl.is_none() {
        return Err(err("no mapped counter has a value".into()));
    }
    Ok(record)
}
