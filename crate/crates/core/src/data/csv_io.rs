//! CSV ingestion and export of survey records.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::schema::{AttributeKind, Record, Schema, Value};
use crate::error::{Error, Result};

/// Name of the optional record-identifier column.
pub const ID_COLUMN: &str = "id";

#[derive(Clone, Debug)]
pub struct Ingested {
    pub records: Vec<Record>,
    /// Rows dropped because a cell was empty or unparsable.
    pub dropped: usize,
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Ingested> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, schema)
}

/// Read records from CSV. Columns are matched to attributes by header name in
/// any order; unknown columns are ignored. Categorical cells are resolved
/// through the schema's label map first and as integer indices otherwise.
pub fn ingest_reader<R: Read>(reader: R, schema: &Schema) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();

    let mut columns = Vec::with_capacity(schema.len());
    let mut missing = Vec::new();
    for attr in &schema.attributes {
        match position.get(attr.name.as_str()) {
            Some(&i) => columns.push(i),
            None => missing.push(attr.name.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::HeaderMismatch(format!("missing columns: {}", missing.join(", "))));
    }
    let id_column = position.get(ID_COLUMN).copied();

    let label_maps: Vec<Option<HashMap<&str, usize>>> = schema
        .attributes
        .iter()
        .map(|a| match &a.kind {
            AttributeKind::Categorical {
                labels: Some(labels), ..
            } => Some(labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect()),
            _ => None,
        })
        .collect();

    let mut records = Vec::new();
    let mut dropped = 0;
    for (row, result) in rdr.records().enumerate() {
        let row_record = result?;
        let id = match id_column.and_then(|c| row_record.get(c)) {
            Some(cell) => match cell.trim().parse::<u64>() {
                Ok(id) => id,
                Err(_) => {
                    dropped += 1;
                    continue;
                }
            },
            None => row as u64,
        };
        let parsed: Option<Vec<Value>> = schema
            .attributes
            .iter()
            .enumerate()
            .map(|(j, attr)| {
                let cell = row_record.get(columns[j])?.trim();
                if cell.is_empty() {
                    return None;
                }
                match &attr.kind {
                    AttributeKind::Categorical { cardinality, .. } => {
                        let idx = label_maps[j]
                            .as_ref()
                            .and_then(|m| m.get(cell).copied())
                            .or_else(|| cell.parse::<usize>().ok())?;
                        (idx < *cardinality).then_some(Value::Cat(idx))
                    }
                    AttributeKind::Numerical { .. } => {
                        let x = cell.parse::<f64>().ok()?;
                        x.is_finite().then_some(Value::Num(x))
                    }
                }
            })
            .collect();
        match parsed {
            Some(values) => records.push(Record { id, values }),
            None => dropped += 1,
        }
    }
    if records.is_empty() {
        return Err(Error::NoRows { dropped });
    }
    Ok(Ingested { records, dropped })
}

/// Format a value the way ingestion reads it back.
pub fn format_value(schema: &Schema, attribute: usize, value: Value) -> String {
    match (&schema.attributes[attribute].kind, value) {
        (
            AttributeKind::Categorical {
                labels: Some(labels), ..
            },
            Value::Cat(c),
        ) => labels.get(c).cloned().unwrap_or_else(|| c.to_string()),
        (_, Value::Cat(c)) => c.to_string(),
        (_, Value::Num(x)) => x.to_string(),
    }
}

/// Write records with an `id` column, optional extra leading columns, and one
/// column per attribute.
pub fn write_records<W: Write>(
    writer: W,
    schema: &Schema,
    records: &[Record],
    extra: Option<(&str, &[u64])>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![ID_COLUMN.to_string()];
    if let Some((name, _)) = extra {
        header.push(name.to_string());
    }
    header.extend(schema.attributes.iter().map(|a| a.name.clone()));
    wtr.write_record(&header)?;
    for (k, r) in records.iter().enumerate() {
        let mut row = vec![r.id.to_string()];
        if let Some((_, values)) = extra {
            row.push(values[k].to_string());
        }
        row.extend(r.values.iter().enumerate().map(|(j, &v)| format_value(schema, j, v)));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_records_file(
    path: impl AsRef<Path>,
    schema: &Schema,
    records: &[Record],
    extra: Option<(&str, &[u64])>,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(std::io::BufWriter::new(file), schema, records, extra)
}
