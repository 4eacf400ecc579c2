use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{Field, FeatureKind, Schema, TabularDataset, CATEGORICAL_INFERENCE_LIMIT};
use crate::error::{Error, Result};

/// Tokens read as a missing cell, compared case-insensitively after trimming.
/// The empty string is also missing.
pub const NA_TOKENS: [&str; 2] = ["NA", "NaN"];

fn is_na(token: &str) -> bool {
    let t = token.trim();
    t.is_empty() || NA_TOKENS.iter().any(|na| t.eq_ignore_ascii_case(na))
}

fn parse_number(token: &str) -> Option<f64> {
    token.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

pub fn load_csv(path: impl AsRef<Path>, schema_hint: Option<&Schema>) -> Result<TabularDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema_hint)
}

/// Parses CSV text with a mandatory header row.
///
/// Without a hint, a column whose tokens are all numeric becomes categorical
/// when every token is written as an integer and there are at most
/// [`CATEGORICAL_INFERENCE_LIMIT`] distinct values (but at least two);
/// otherwise continuous. A column holding any non-numeric token is
/// categorical with a sorted label dictionary.
pub fn read_csv<R: Read>(reader: R, schema_hint: Option<&Schema>) -> Result<TabularDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let width = header.len();
    if let Some(hint) = schema_hint {
        if hint.len() != width {
            return Err(Error::Schema(format!(
                "schema has {} columns but the CSV header has {width}",
                hint.len()
            )));
        }
        for (f, h) in hint.fields().iter().zip(&header) {
            if &f.name != h {
                return Err(Error::Schema(format!(
                    "schema column {:?} does not match CSV header {h:?}",
                    f.name
                )));
            }
        }
    }

    let mut tokens: Vec<Vec<String>> = vec![Vec::new(); width];
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::RowLength {
                row: r + 1,
                expected: width,
                found: record.len(),
            });
        }
        for (col, tok) in tokens.iter_mut().zip(record.iter()) {
            col.push(tok.to_string());
        }
    }

    let mut fields = Vec::with_capacity(width);
    let mut columns = Vec::with_capacity(width);
    for (j, (name, col)) in header.iter().zip(&tokens).enumerate() {
        let (field, values) = match schema_hint.map(|s| s.field(j)) {
            Some(f) => parse_hinted(j, f, col)?,
            None => parse_inferred(name, col),
        };
        fields.push(field);
        columns.push(values);
    }
    TabularDataset::from_columns(Schema::new(fields)?, columns)
}

fn parse_hinted(j: usize, field: &Field, col: &[String]) -> Result<(Field, Vec<Option<f64>>)> {
    match field.kind {
        FeatureKind::Continuous => {
            let mut values = Vec::with_capacity(col.len());
            for (i, tok) in col.iter().enumerate() {
                if is_na(tok) {
                    values.push(None);
                    continue;
                }
                let x = parse_number(tok).ok_or_else(|| Error::BadNumber {
                    row: i + 1,
                    col: j,
                    name: field.name.clone(),
                    token: tok.clone(),
                })?;
                values.push(Some(x));
            }
            Ok((Field::continuous(field.name.clone()), values))
        }
        FeatureKind::Categorical { cardinality } => {
            let present: Vec<&str> = col.iter().filter(|t| !is_na(t)).map(|t| t.trim()).collect();
            let label_code = |t: &str| {
                field.labels.iter().position(|l| l == t).or_else(|| {
                    let x = parse_number(t)?;
                    field.labels.iter().position(|l| parse_number(l) == Some(x))
                })
            };
            if !field.labels.is_empty() && present.iter().all(|t| label_code(t).is_some()) {
                let values = col
                    .iter()
                    .map(|t| if is_na(t) { None } else { label_code(t.trim()).map(|c| c as f64) })
                    .collect();
                return Ok((field.clone(), values));
            }
            let direct = present.iter().all(|t| {
                parse_number(t).is_some_and(|x| x.fract() == 0.0 && x >= 0.0 && x < cardinality as f64)
            });
            if direct {
                let values = col.iter().map(|t| if is_na(t) { None } else { parse_number(t) }).collect();
                return Ok((Field::categorical(field.name.clone(), cardinality), values));
            }
            let (mut labels, values) = dictionary_encode(col);
            if labels.len() > cardinality as usize {
                return Err(Error::Schema(format!(
                    "column {:?} has {} distinct labels but declared cardinality {cardinality}",
                    field.name,
                    labels.len()
                )));
            }
            for code in labels.len() as u32..cardinality {
                labels.push(code.to_string());
            }
            let f = Field {
                name: field.name.clone(),
                kind: field.kind,
                labels,
            };
            Ok((f, values))
        }
    }
}

fn parse_inferred(name: &str, col: &[String]) -> (Field, Vec<Option<f64>>) {
    let numeric: Option<Vec<Option<f64>>> = col
        .iter()
        .map(|t| if is_na(t) { Some(None) } else { parse_number(t).map(Some) })
        .collect();
    match numeric {
        Some(values) => {
            let mut distinct: Vec<f64> = values.iter().flatten().copied().collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let integral = col.iter().filter(|t| !is_na(t)).all(|t| t.trim().parse::<i64>().is_ok());
            if integral && (2..=CATEGORICAL_INFERENCE_LIMIT).contains(&distinct.len()) {
                let (labels, codes) = dictionary_encode(col);
                (Field::with_labels(name, labels), codes)
            } else {
                (Field::continuous(name), values)
            }
        }
        None => {
            let (labels, codes) = dictionary_encode(col);
            let field = if labels.len() >= 2 {
                Field::with_labels(name, labels)
            } else {
                // A single text label cannot form a valid categorical column;
                // let schema validation report it.
                Field {
                    name: name.to_string(),
                    kind: FeatureKind::Categorical {
                        cardinality: labels.len() as u32,
                    },
                    labels,
                }
            };
            (field, codes)
        }
    }
}

/// Maps tokens to codes over a sorted label dictionary: numeric order when
/// every label parses as a number, lexicographic otherwise. The first
/// spelling seen for a numeric value becomes its label.
fn dictionary_encode(col: &[String]) -> (Vec<String>, Vec<Option<f64>>) {
    let present: Vec<&str> = col.iter().filter(|t| !is_na(t)).map(|t| t.trim()).collect();
    let labels: Vec<String> = if present.iter().all(|t| parse_number(t).is_some()) {
        let mut by_value: Vec<(f64, &str)> = Vec::new();
        for t in &present {
            let x = parse_number(t).unwrap();
            if !by_value.iter().any(|(v, _)| *v == x) {
                by_value.push((x, t));
            }
        }
        by_value.sort_by(|a, b| a.0.total_cmp(&b.0));
        by_value.into_iter().map(|(_, t)| t.to_string()).collect()
    } else {
        let mut l: Vec<String> = present.iter().map(|t| t.to_string()).collect();
        l.sort();
        l.dedup();
        l
    };
    let numeric_labels = labels.iter().all(|l| parse_number(l).is_some());
    let lookup: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(k, l)| (l.as_str(), k)).collect();
    let codes = col
        .iter()
        .map(|t| {
            if is_na(t) {
                return None;
            }
            let t = t.trim();
            let code = match lookup.get(t) {
                Some(&k) => k,
                None if numeric_labels => {
                    let x = parse_number(t).unwrap();
                    labels.iter().position(|l| parse_number(l) == Some(x)).unwrap()
                }
                None => unreachable!("label {t:?} missing from its own dictionary"),
            };
            Some(code as f64)
        })
        .collect();
    (labels, codes)
}

/// Reads a sidecar schema: one `name,kind[,cardinality]` line per column,
/// where kind is `continuous` or `categorical`. Blank lines and lines
/// starting with `#` are skipped.
pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut fields = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |msg: &str| Error::Schema(format!("schema line {}: {msg}", n + 1));
        let field = match parts.as_slice() {
            [name, kind] if kind.eq_ignore_ascii_case("continuous") => Field::continuous(*name),
            [name, kind, card] if kind.eq_ignore_ascii_case("categorical") => {
                let c: u32 = card.parse().map_err(|_| bad("cardinality is not an integer"))?;
                Field::categorical(*name, c)
            }
            [_, kind] if kind.eq_ignore_ascii_case("categorical") => {
                return Err(bad("categorical columns need a cardinality"))
            }
            _ => return Err(bad("expected name,kind[,cardinality]")),
        };
        fields.push(field);
    }
    Schema::new(fields)
}

pub fn save_csv(data: &TabularDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(data, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the header and every row. Missing cells are empty; continuous
/// values use the shortest representation that round-trips exactly.
pub fn write_csv<W: Write>(data: &TabularDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let schema = data.schema();
    w.write_record(schema.fields().iter().map(|f| f.name.as_str()))?;
    let mut record = Vec::with_capacity(schema.len());
    for i in 0..data.n_rows() {
        record.clear();
        for (j, field) in schema.fields().iter().enumerate() {
            let cell = match data.value(i, j) {
                None => String::new(),
                Some(x) => match field.kind {
                    FeatureKind::Continuous => format!("{x:?}"),
                    FeatureKind::Categorical { .. } => field.label(x as u32),
                },
            };
            record.push(cell);
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
