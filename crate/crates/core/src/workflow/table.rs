use serde::{Deserialize, Serialize};

use crate::models::EcmTerms;
use crate::{Error, Result};

/// Column order of the main report table.
pub const REPORT_HEADER: [&str; 14] = [
    "N^3",
    "Benchmark cycl",
    "ECM LC Tol",
    "ECM LC Tnol",
    "ECM LC Tl1l2",
    "ECM LC Tl2l3",
    "ECM LC Tl3mem",
    "Roofline LC cycl",
    "ECM CS Tol",
    "ECM CS Tnol",
    "ECM CS Tl1l2",
    "ECM CS Tl2l3",
    "ECM CS Tl3mem",
    "Roofline CS cycl",
];

/// A numeric table with optional cells, as written to and read from CSV.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Csv(format!(
                "row with {} cells does not match the {}-column schema",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Values of one column, `None` when the column is absent.
    pub fn values(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.column(name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| Error::Csv(e.to_string()))?;
        for row in &self.rows {
            if row.len() != self.header.len() {
                return Err(Error::Csv("rows do not share one schema".into()));
            }
            w.write_record(row.iter().map(|v| cell(*v)))
                .map_err(|e| Error::Csv(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header: Vec<String> = r
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut table = Table {
            header,
            rows: Vec::new(),
        };
        for (n, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            let row = rec
                .iter()
                .map(|c| {
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>()
                            .map(Some)
                            .map_err(|_| Error::Csv(format!("row {}: `{c}` is not a number", n + 2)))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(row)?;
        }
        Ok(table)
    }
}

/// One grid size of the main report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub benchmark_cycles: Option<f64>,
    pub ecm_lc: Option<EcmTerms>,
    pub roofline_lc: Option<f64>,
    pub ecm_cs: Option<EcmTerms>,
    pub roofline_cs: Option<f64>,
}

fn terms_cells(t: &Option<EcmTerms>) -> [Option<f64>; 5] {
    match t {
        Some(t) => t.as_array().map(Some),
        None => [None; 5],
    }
}

fn terms_from(cells: &[Option<f64>]) -> Result<Option<EcmTerms>> {
    match cells.iter().filter(|c| c.is_some()).count() {
        0 => Ok(None),
        5 => {
            let v: Vec<f64> = cells.iter().map(|c| c.unwrap()).collect();
            Ok(Some(EcmTerms::new(v[0], v[1], v[2], v[3], v[4])))
        }
        _ => Err(Error::Csv("ECM terms are partially filled".into())),
    }
}

pub fn report_table(rows: &[ReportRow]) -> Result<Table> {
    let mut t = Table::new(&REPORT_HEADER);
    for r in rows {
        let mut cells = vec![Some(r.n as f64), r.benchmark_cycles];
        cells.extend(terms_cells(&r.ecm_lc));
        cells.push(r.roofline_lc);
        cells.extend(terms_cells(&r.ecm_cs));
        cells.push(r.roofline_cs);
        t.push(cells)?;
    }
    Ok(t)
}

pub fn write_csv(rows: &[ReportRow]) -> Result<String> {
    report_table(rows)?.to_csv()
}

pub fn read_csv(text: &str) -> Result<Vec<ReportRow>> {
    let t = Table::from_csv(text)?;
    if t.header != REPORT_HEADER {
        return Err(Error::Csv(format!("unexpected header {:?}", t.header)));
    }
    t.rows
        .iter()
        .map(|r| {
            let n = r[0].ok_or_else(|| Error::Csv("missing grid size".into()))?;
            Ok(ReportRow {
                n: n as usize,
                benchmark_cycles: r[1],
                ecm_lc: terms_from(&r[2..7])?,
                roofline_lc: r[7],
                ecm_cs: terms_from(&r[8..13])?,
                roofline_cs: r[13],
            })
        })
        .collect()
}
