//! ARFF reader and writer (dense format, numeric and nominal attributes).

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{AttributeKind, Cell, ClassAttribute, Dataset, DatasetError, Row};

#[derive(Debug, Clone, Default)]
pub struct ArffOptions {
    /// Name of the class attribute; the last declared attribute when unset.
    pub class_attribute: Option<String>,
}

pub fn parse_arff(input: &[u8]) -> Result<Dataset, DatasetError> {
    parse_arff_with(input, &ArffOptions::default())
}

struct Declared {
    name: String,
    kind: AttributeKind,
    lookup: HashMap<String, u32>,
}

pub fn parse_arff_with(input: &[u8], options: &ArffOptions) -> Result<Dataset, DatasetError> {
    let text = std::str::from_utf8(input).map_err(|e| DatasetError::Parse {
        line: 1 + input[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "input is not valid UTF-8".into(),
    })?;
    if text.trim().is_empty() {
        return Err(DatasetError::EmptyInput);
    }

    let mut relation: Option<String> = None;
    let mut declared: Vec<Declared> = Vec::new();
    let mut lines = text.lines().enumerate();
    let mut in_data = false;

    for (i, raw) in lines.by_ref() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let err = |message: String| DatasetError::Parse { line: line_no, message };
        let (keyword, rest) = split_keyword(line);
        match keyword.to_ascii_lowercase().as_str() {
            "@relation" => {
                let (name, _) = read_token(rest).map_err(err)?;
                relation = Some(name);
            }
            "@attribute" => {
                if relation.is_none() {
                    return Err(err("@attribute before @relation".into()));
                }
                let (name, type_spec) = read_token(rest).map_err(err)?;
                let type_spec = type_spec.trim();
                let kind = if type_spec.starts_with('{') {
                    let inner = type_spec
                        .strip_prefix('{')
                        .and_then(|s| s.trim_end().strip_suffix('}'))
                        .ok_or_else(|| err(format!("unterminated nominal list for `{name}`")))?;
                    let labels = split_values(inner).map_err(err)?;
                    if labels.is_empty() {
                        return Err(err(format!("nominal attribute `{name}` declares no labels")));
                    }
                    let mut seen = HashMap::new();
                    for (pos, label) in labels.iter().enumerate() {
                        if seen.insert(label.clone(), pos).is_some() {
                            return Err(err(format!("duplicate label `{label}` in `{name}`")));
                        }
                    }
                    AttributeKind::Nominal(labels)
                } else {
                    match type_spec.to_ascii_lowercase().as_str() {
                        "numeric" | "real" | "integer" => AttributeKind::Numeric,
                        other if other.starts_with("string") || other.starts_with("date") => {
                            return Err(DatasetError::Unsupported(format!(
                                "line {line_no}: attribute type `{type_spec}`"
                            )))
                        }
                        _ => return Err(err(format!("unknown attribute type `{type_spec}`"))),
                    }
                };
                let lookup = kind
                    .labels()
                    .iter()
                    .enumerate()
                    .map(|(p, l)| (l.clone(), p as u32))
                    .collect();
                declared.push(Declared { name, kind, lookup });
            }
            "@data" => {
                if declared.is_empty() {
                    return Err(err("@data before any @attribute".into()));
                }
                in_data = true;
                break;
            }
            _ => return Err(err(format!("unexpected header line `{line}`"))),
        }
    }
    if !in_data {
        return Err(DatasetError::Parse {
            line: text.lines().count(),
            message: "missing @data section".into(),
        });
    }

    let class_pos = match &options.class_attribute {
        Some(name) => declared
            .iter()
            .position(|d| &d.name == name)
            .ok_or_else(|| DatasetError::ClassNotFound(name.clone()))?,
        None => declared.len() - 1,
    };
    let class_numeric = !declared[class_pos].kind.is_nominal();
    let mut numeric_class_labels: Vec<String> = Vec::new();
    let mut numeric_class_lookup: HashMap<String, u32> = HashMap::new();

    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let err = |message: String| DatasetError::Parse { line: line_no, message };
        if line.starts_with('{') {
            return Err(DatasetError::Unsupported(format!("line {line_no}: sparse ARFF rows")));
        }
        let values = split_values(line).map_err(err)?;
        if values.len() != declared.len() {
            return Err(DatasetError::Arity {
                line: line_no,
                expected: declared.len(),
                found: values.len(),
            });
        }
        let mut cells = Vec::with_capacity(declared.len() - 1);
        let mut class = 0u32;
        for (pos, (value, decl)) in values.iter().zip(&declared).enumerate() {
            if pos == class_pos {
                if value == "?" {
                    return Err(err("class value is missing".into()));
                }
                class = if class_numeric {
                    parse_number(value).map_err(err)?;
                    let next = numeric_class_labels.len() as u32;
                    *numeric_class_lookup.entry(value.clone()).or_insert_with(|| {
                        numeric_class_labels.push(value.clone());
                        next
                    })
                } else {
                    *decl
                        .lookup
                        .get(value.as_str())
                        .ok_or_else(|| err(format!("label `{value}` not declared for `{}`", decl.name)))?
                };
                continue;
            }
            cells.push(parse_cell(value, decl).map_err(err)?);
        }
        rows.push(Row { cells, class });
    }

    let class_decl = &declared[class_pos];
    let class = ClassAttribute {
        name: class_decl.name.clone(),
        labels: if class_numeric {
            numeric_class_labels
        } else {
            class_decl.kind.labels().to_vec()
        },
        declared_numeric: class_numeric,
    };
    let attributes = declared
        .iter()
        .enumerate()
        .filter(|(pos, _)| *pos != class_pos)
        .map(|(_, d)| (d.name.clone(), d.kind.clone()))
        .collect();
    Ok(Dataset::new(relation.unwrap_or_default(), attributes, class, rows))
}

fn parse_cell(value: &str, decl: &Declared) -> Result<Cell, String> {
    if value == "?" {
        return Ok(Cell::Missing);
    }
    match &decl.kind {
        AttributeKind::Numeric => parse_number(value).map(Cell::Numeric),
        AttributeKind::Nominal(_) => decl
            .lookup
            .get(value)
            .map(|&i| Cell::Nominal(i))
            .ok_or_else(|| format!("label `{value}` not declared for `{}`", decl.name)),
    }
}

pub(super) fn parse_number(value: &str) -> Result<f64, String> {
    let looks_numeric = value
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'));
    match value.parse::<f64>() {
        Ok(v) if looks_numeric && v.is_finite() => Ok(v),
        _ => Err(format!("`{value}` is not a finite number")),
    }
}

fn split_keyword(line: &str) -> (&str, &str) {
    match line.find(char::is_whitespace) {
        Some(pos) => (&line[..pos], &line[pos..]),
        None => (line, ""),
    }
}

/// Reads one possibly-quoted token, returning it and the remaining text.
fn read_token(s: &str) -> Result<(String, &str), String> {
    let s = s.trim_start();
    let mut chars = s.char_indices();
    match chars.next() {
        None => Err("expected a name".into()),
        Some((_, q @ ('\'' | '"'))) => {
            let mut out = String::new();
            let mut escaped = false;
            for (pos, c) in chars {
                if escaped {
                    out.push(c);
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    return Ok((out, &s[pos + c.len_utf8()..]));
                } else {
                    out.push(c);
                }
            }
            Err("unterminated quote".into())
        }
        Some(_) => {
            let end = s.find(|c: char| c.is_whitespace() || c == '{').unwrap_or(s.len());
            Ok((s[..end].to_string(), &s[end..]))
        }
    }
}

/// Splits a comma-separated list, honouring single and double quotes.
/// Unquoted values are whitespace-trimmed.
fn split_values(s: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut quoted = false;
    let mut escaped = false;
    for c in s.chars() {
        if let Some(q) = quote {
            if escaped {
                current.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            } else {
                current.push(c);
            }
            continue;
        }
        match c {
            '\'' | '"' if current.trim().is_empty() => {
                current.clear();
                quote = Some(c);
                quoted = true;
            }
            ',' => {
                out.push(finish(&mut current, quoted));
                quoted = false;
            }
            _ => current.push(c),
        }
    }
    if quote.is_some() {
        return Err("unterminated quote".into());
    }
    if !current.trim().is_empty() || quoted || !out.is_empty() {
        out.push(finish(&mut current, quoted));
    }
    Ok(out)
}

fn finish(current: &mut String, quoted: bool) -> String {
    let value = if quoted {
        current.trim_end().to_string()
    } else {
        current.trim().to_string()
    };
    current.clear();
    value
}

fn quote_if_needed(s: &str) -> String {
    let plain = !s.is_empty()
        && s != "?"
        && !s
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, ',' | '\'' | '"' | '%' | '{' | '}' | '\\'));
    if plain {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
    }
}

/// Serializes `ds` as dense ARFF with the class attribute declared last.
pub fn write_arff(ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "@relation {}", quote_if_needed(&ds.source_name));
    out.push('\n');
    for attr in &ds.attributes {
        let _ = match &attr.kind {
            AttributeKind::Numeric => {
                writeln!(out, "@attribute {} numeric", quote_if_needed(&attr.name))
            }
            AttributeKind::Nominal(labels) => writeln!(
                out,
                "@attribute {} {{{}}}",
                quote_if_needed(&attr.name),
                labels.iter().map(|l| quote_if_needed(l)).collect::<Vec<_>>().join(",")
            ),
        };
    }
    if ds.class.declared_numeric {
        let _ = writeln!(out, "@attribute {} numeric", quote_if_needed(&ds.class.name));
    } else {
        let _ = writeln!(
            out,
            "@attribute {} {{{}}}",
            quote_if_needed(&ds.class.name),
            ds.class
                .labels
                .iter()
                .map(|l| quote_if_needed(l))
                .collect::<Vec<_>>()
                .join(",")
        );
    }
    out.push_str("\n@data\n");
    for row in &ds.rows {
        for (cell, attr) in row.cells.iter().zip(&ds.attributes) {
            match cell {
                Cell::Missing => out.push('?'),
                Cell::Numeric(v) => {
                    let _ = write!(out, "{v}");
                }
                Cell::Nominal(i) => out.push_str(&quote_if_needed(&attr.kind.labels()[*i as usize])),
            }
            out.push(',');
        }
        out.push_str(&quote_if_needed(&ds.class.labels[row.class as usize]));
        out.push('\n');
    }
    out
}
