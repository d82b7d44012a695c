//! CSV reading and writing against a `Schema`.

use std::io::{Read, Write};
use std::path::Path;

use mixfill_core::table::{Cell, ColumnKind, TableError};
use mixfill_core::MixedTable;

use crate::schema::Schema;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected column `{expected}` at position {position}, found `{found}`")]
    HeaderMismatch {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("row {row} has {found} fields, expected {expected}")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: `{value}` is not a listed level")]
    UnknownLevel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("table invariant violated: {0}")]
    Table(#[from] TableError),
}

/// Reads an RFC 4180 CSV with a header row. Row numbers in errors are
/// 1-based and count the header.
pub fn read_table<R: Read>(reader: R, schema: &Schema) -> Result<MixedTable, IoError> {
    let tokens = schema.missing_tokens();
    let columns = schema.to_columns();
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    for (i, col) in columns.iter().enumerate() {
        let found = header.get(i).unwrap_or("");
        if found != col.name {
            return Err(IoError::HeaderMismatch {
                position: i,
                expected: col.name.clone(),
                found: found.to_string(),
            });
        }
    }
    if header.len() != columns.len() {
        return Err(IoError::RowWidth {
            row: 1,
            expected: columns.len(),
            found: header.len(),
        });
    }
    let mut cells = Vec::new();
    let mut n_rows = 0usize;
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = idx + 2;
        if record.len() != columns.len() {
            return Err(IoError::RowWidth {
                row,
                expected: columns.len(),
                found: record.len(),
            });
        }
        for (c, field) in record.iter().enumerate() {
            let col = &columns[c];
            if tokens.iter().any(|t| t == field) {
                cells.push(Cell::Missing);
                continue;
            }
            cells.push(match &col.kind {
                ColumnKind::Quantitative => match field.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() => Cell::Number(v),
                    _ => {
                        return Err(IoError::BadNumber {
                            row,
                            column: col.name.clone(),
                            value: field.to_string(),
                        })
                    }
                },
                ColumnKind::Categorical { levels, .. } => {
                    match levels.iter().position(|l| l == field) {
                        Some(l) => Cell::Level(l),
                        None => {
                            return Err(IoError::UnknownLevel {
                                row,
                                column: col.name.clone(),
                                value: field.to_string(),
                            })
                        }
                    }
                }
            });
        }
        n_rows += 1;
    }
    Ok(MixedTable::new(columns, n_rows, cells)?)
}

/// Writes the table with its header; missing cells become `missing_token`.
pub fn write_table<W: Write>(
    table: &MixedTable,
    writer: W,
    missing_token: &str,
) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(table.columns().iter().map(|c| c.name.as_str()))?;
    for r in 0..table.n_rows() {
        let mut record = Vec::with_capacity(table.n_cols());
        for c in 0..table.n_cols() {
            record.push(match table.cell(r, c) {
                Cell::Missing => missing_token.to_string(),
                Cell::Number(v) => format_number(*v),
                Cell::Level(l) => match &table.column(c).kind {
                    ColumnKind::Categorical { levels, .. } => levels[*l].clone(),
                    ColumnKind::Quantitative => unreachable!("level in quantitative column"),
                },
            });
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Shortest representation that round-trips through `f64` parsing.
fn format_number(v: f64) -> String {
    let mut s = format!("{v}");
    if s.parse::<f64>() != Ok(v) {
        s = format!("{v:?}");
    }
    s
}

pub fn read_table_path(path: &Path, schema: &Schema) -> Result<MixedTable, IoError> {
    read_table(std::fs::File::open(path)?, schema)
}

pub fn write_table_path(
    table: &MixedTable,
    path: &Path,
    missing_token: &str,
) -> Result<(), IoError> {
    write_table(table, std::fs::File::create(path)?, missing_token)
}
