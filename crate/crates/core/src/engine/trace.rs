//! Simulation traces and their CSV form.
//!
//! Columns are `step,timestamp,utilization` followed by `<name>.rate` for
//! every strategy and, for PID strategies, the controller breakdown
//! `<name>.u_error,<name>.u_p,<name>.u_i,<name>.u_i_raw,<name>.u_d,<name>.controller_error`.
//! Decimals are written in canonical 18-digit form.

use std::io::{Read, Write};

use serde::Serialize;

use crate::numerics::Decimal;
use crate::pid::ControllerBreakdown;
use crate::strategy::StateSnapshot;

use super::EngineError;

pub const BREAKDOWN_FIELDS: [&str; 6] = ["u_error", "u_p", "u_i", "u_i_raw", "u_d", "controller_error"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub rate: Decimal,
    pub breakdown: Option<ControllerBreakdown>,
}

impl Cell {
    /// `(field name, value)` pairs in column order.
    pub fn fields(&self) -> Vec<(&'static str, Decimal)> {
        let mut out = vec![("rate", self.rate)];
        if let Some(b) = &self.breakdown {
            out.extend([
                ("u_error", b.u_error),
                ("u_p", b.u_p),
                ("u_i", b.u_i),
                ("u_i_raw", b.u_i_raw),
                ("u_d", b.u_d),
                ("controller_error", b.controller_error),
            ]);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: u32,
    pub timestamp: u64,
    pub utilization: Decimal,
    /// One cell per strategy, in [`SimTrace::strategies`] order.
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceColumn {
    pub name: String,
    pub has_breakdown: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SimTrace {
    pub strategies: Vec<TraceColumn>,
    pub rows: Vec<TraceRow>,
    /// State of each strategy after the last row; empty for traces read from CSV.
    #[serde(skip)]
    pub final_states: Vec<StateSnapshot>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn strategy_index(&self, name: &str) -> Option<usize> {
        self.strategies.iter().position(|c| c.name == name)
    }

    /// Rate of the named strategy at a 1-based step.
    pub fn rate_at(&self, name: &str, step: u32) -> Option<Decimal> {
        let idx = self.strategy_index(name)?;
        self.rows.iter().find(|r| r.step == step).map(|r| r.cells[idx].rate)
    }

    pub fn rates(&self, name: &str) -> Option<Vec<Decimal>> {
        let idx = self.strategy_index(name)?;
        Some(self.rows.iter().map(|r| r.cells[idx].rate).collect())
    }

    pub fn cell(&self, name: &str, step: u32) -> Option<&Cell> {
        let idx = self.strategy_index(name)?;
        self.rows.iter().find(|r| r.step == step).map(|r| &r.cells[idx])
    }

    /// Number of steps with utilization strictly above `threshold`.
    pub fn time_above(&self, threshold: Decimal) -> usize {
        self.rows.iter().filter(|r| r.utilization > threshold).count()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["step".to_string(), "timestamp".into(), "utilization".into()];
        for col in &self.strategies {
            h.push(format!("{}.rate", col.name));
            if col.has_breakdown {
                h.extend(BREAKDOWN_FIELDS.iter().map(|f| format!("{}.{f}", col.name)));
            }
        }
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EngineError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(self.header()).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![row.step.to_string(), row.timestamp.to_string(), row.utilization.to_string()];
            for cell in &row.cells {
                rec.extend(cell.fields().into_iter().map(|(_, v)| v.to_string()));
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| EngineError::Io(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Parses a trace; errors carry the 1-based line number.
    pub fn read_csv<R: Read>(input: R) -> Result<SimTrace, EngineError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = r.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        let strategies = parse_header(&header)?;
        let width = header.len();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            if rec.len() != width {
                return Err(parse_err(line, format!("expected {width} fields, found {}", rec.len())));
            }
            let int = |idx: usize| -> Result<u64, EngineError> {
                rec[idx].parse::<u64>().map_err(|_| parse_err(line, format!("bad integer {:?}", &rec[idx])))
            };
            let dec = |idx: usize| -> Result<Decimal, EngineError> {
                rec[idx].parse::<Decimal>().map_err(|_| parse_err(line, format!("bad decimal {:?}", &rec[idx])))
            };
            let step = u32::try_from(int(0)?).map_err(|_| parse_err(line, "step out of range".into()))?;
            let mut col = 3;
            let mut cells = Vec::with_capacity(strategies.len());
            for s in &strategies {
                let rate = dec(col)?;
                col += 1;
                let breakdown = if s.has_breakdown {
                    let v: Vec<Decimal> = (col..col + 6).map(dec).collect::<Result<_, _>>()?;
                    col += 6;
                    Some(ControllerBreakdown {
                        u_error: v[0],
                        u_p: v[1],
                        u_i: v[2],
                        u_i_raw: v[3],
                        u_d: v[4],
                        controller_error: v[5],
                        rate,
                    })
                } else {
                    None
                };
                cells.push(Cell { rate, breakdown });
            }
            rows.push(TraceRow { step, timestamp: int(1)?, utilization: dec(2)?, cells });
        }
        Ok(SimTrace { strategies, rows, final_states: Vec::new() })
    }
}

fn csv_err(e: csv::Error) -> EngineError {
    EngineError::Io(e.to_string())
}

fn parse_err(line: usize, message: String) -> EngineError {
    EngineError::Parse { line, message }
}

fn parse_header(header: &csv::StringRecord) -> Result<Vec<TraceColumn>, EngineError> {
    let fixed = ["step", "timestamp", "utilization"];
    if header.len() < 4 || header.iter().take(3).ne(fixed) {
        return Err(parse_err(1, "header must start with step,timestamp,utilization and name a strategy".into()));
    }
    let mut cols: Vec<TraceColumn> = Vec::new();
    let mut i = 3;
    while i < header.len() {
        let (name, field) = header[i]
            .rsplit_once('.')
            .ok_or_else(|| parse_err(1, format!("column {:?} is not <strategy>.<field>", &header[i])))?;
        if field != "rate" {
            return Err(parse_err(1, format!("expected {name}.rate, found {:?}", &header[i])));
        }
        let expected: Vec<String> = BREAKDOWN_FIELDS.iter().map(|f| format!("{name}.{f}")).collect();
        let has_breakdown = header.len() >= i + 7 && header.iter().skip(i + 1).take(6).eq(expected.iter().map(String::as_str));
        cols.push(TraceColumn { name: name.to_string(), has_breakdown });
        i += if has_breakdown { 7 } else { 1 };
    }
    Ok(cols)
}
