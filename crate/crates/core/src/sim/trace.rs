//! Logged signals and their CSV form.

use std::io::{Read, Write};

use super::config::SimConfig;
use super::SimError;

/// Column order of the trace CSV.
pub const TRACE_COLUMNS: [&str; 25] = [
    "t",
    "load_torque",
    "speed_ref",
    "speed_actual",
    "speed_rad",
    "te",
    "ia",
    "ib",
    "ic",
    "ea",
    "eb",
    "ec",
    "emf_norm_a",
    "emf_norm_b",
    "emf_norm_c",
    "hall_a",
    "hall_b",
    "hall_c",
    "pwm_a",
    "pwm_b",
    "pwm_c",
    "pwm_d",
    "pwm_e",
    "pwm_f",
    "duty",
];

const FIRST_BINARY: usize = 15;
const LAST_BINARY: usize = 23;

/// One time-stamped sample of every logged signal.
///
/// Speeds are logged twice: `speed_ref`/`speed_actual` in rpm and
/// `speed_rad` in rad/s. `emf_norm_*` hold the three-level EMF pattern
/// (`-1`, `0`, `+1`), `pwm_a..pwm_f` the six commutation gate commands.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceRecord {
    pub t: f64,
    pub load_torque: f64,
    pub speed_ref: f64,
    pub speed_actual: f64,
    pub speed_rad: f64,
    pub te: f64,
    pub currents: [f64; 3],
    pub emfs: [f64; 3],
    pub emf_norm: [f64; 3],
    pub hall: [u8; 3],
    pub pwm: [u8; 6],
    pub duty: f64,
}

impl TraceRecord {
    /// Values in `TRACE_COLUMNS` order.
    pub fn values(&self) -> [f64; 25] {
        let mut v = [0.0; 25];
        v[0] = self.t;
        v[1] = self.load_torque;
        v[2] = self.speed_ref;
        v[3] = self.speed_actual;
        v[4] = self.speed_rad;
        v[5] = self.te;
        v[6..9].copy_from_slice(&self.currents);
        v[9..12].copy_from_slice(&self.emfs);
        v[12..15].copy_from_slice(&self.emf_norm);
        for (k, h) in self.hall.iter().enumerate() {
            v[15 + k] = *h as f64;
        }
        for (k, p) in self.pwm.iter().enumerate() {
            v[18 + k] = *p as f64;
        }
        v[24] = self.duty;
        v
    }

    fn from_values(v: &[f64; 25]) -> Self {
        Self {
            t: v[0],
            load_torque: v[1],
            speed_ref: v[2],
            speed_actual: v[3],
            speed_rad: v[4],
            te: v[5],
            currents: [v[6], v[7], v[8]],
            emfs: [v[9], v[10], v[11]],
            emf_norm: [v[12], v[13], v[14]],
            hall: [0, 1, 2].map(|k| v[15 + k] as u8),
            pwm: [0, 1, 2, 3, 4, 5].map(|k| v[18 + k] as u8),
            duty: v[24],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Config that produced the trace; absent for imported traces.
    pub config: Option<SimConfig>,
}

/// Named numeric columns, as consumed by the dataset builders.
pub trait ColumnSource {
    fn column(&self, name: &str) -> Option<Vec<f64>>;
    fn row_count(&self) -> usize;
}

impl ColumnSource for Trace {
    fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = TRACE_COLUMNS.iter().position(|c| *c == name)?;
        Some(self.records.iter().map(|r| r.values()[idx]).collect())
    }

    fn row_count(&self) -> usize {
        self.records.len()
    }
}

/// Formats with nine significant digits, fixed notation for moderate
/// magnitudes and exponent notation otherwise.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_fraction(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_fraction(mantissa.to_string()))
    }
}

fn trim_fraction(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn export_csv<W: Write>(trace: &Trace, mut out: W) -> Result<(), SimError> {
    if trace.records.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    let mut line = TRACE_COLUMNS.join(",");
    line.push('\n');
    out.write_all(line.as_bytes())?;
    for record in &trace.records {
        line.clear();
        for (k, v) in record.values().iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            if (FIRST_BINARY..=LAST_BINARY).contains(&k) {
                line.push(if *v != 0.0 { '1' } else { '0' });
            } else {
                line.push_str(&format_sig9(*v));
            }
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn import_csv<R: Read>(source: R) -> Result<Trace, SimError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| SimError::ParseFailure {
            row: 0,
            column: String::new(),
            detail: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != TRACE_COLUMNS {
        return Err(SimError::SchemaMismatch {
            expected: TRACE_COLUMNS.join(","),
            found: header.join(","),
        });
    }

    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let row = row + 1;
        let fields = result.map_err(|e| SimError::ParseFailure {
            row,
            column: String::new(),
            detail: e.to_string(),
        })?;
        let mut values = [0.0; 25];
        for (k, value) in values.iter_mut().enumerate() {
            let raw = fields.get(k).unwrap_or("").trim();
            let parsed: f64 = raw.parse().map_err(|_| SimError::ParseFailure {
                row,
                column: TRACE_COLUMNS[k].to_string(),
                detail: format!("`{raw}` is not a number"),
            })?;
            if (FIRST_BINARY..=LAST_BINARY).contains(&k) && parsed != 0.0 && parsed != 1.0 {
                return Err(SimError::ParseFailure {
                    row,
                    column: TRACE_COLUMNS[k].to_string(),
                    detail: format!("`{raw}` is not binary"),
                });
            }
            *value = parsed;
        }
        records.push(TraceRecord::from_values(&values));
    }
    Ok(Trace {
        records,
        config: None,
    })
}

/// Any CSV with a header row, read as numeric columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColumnTable {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl ColumnTable {
    pub fn read_csv<R: Read>(source: R) -> Result<Self, SimError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(source);
        let names: Vec<String> = reader
            .headers()
            .map_err(|e| SimError::ParseFailure {
                row: 0,
                column: String::new(),
                detail: e.to_string(),
            })?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (row, result) in reader.records().enumerate() {
            let row = row + 1;
            let fields = result.map_err(|e| SimError::ParseFailure {
                row,
                column: String::new(),
                detail: e.to_string(),
            })?;
            for (k, column) in columns.iter_mut().enumerate() {
                let raw = fields.get(k).unwrap_or("").trim();
                column.push(raw.parse().map_err(|_| SimError::ParseFailure {
                    row,
                    column: names[k].clone(),
                    detail: format!("`{raw}` is not a number"),
                })?);
            }
        }
        Ok(Self { names, columns })
    }
}

impl ColumnSource for ColumnTable {
    fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.names.iter().position(|n| n == name)?;
        Some(self.columns[idx].clone())
    }

    fn row_count(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}
