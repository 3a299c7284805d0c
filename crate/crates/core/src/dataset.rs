//! KPI dataset IO: an ARFF subset and CSV, plus seeded train/test splitting.
//!
//! A [`Dataset`] is a generic relation (declared attributes plus rows). KPI
//! work goes through [`Dataset::to_records`] / [`Dataset::from_records`],
//! which map columns onto the fixed eight-attribute schema by name.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Read;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kpi::{normalize_name, Attribute, CounterRecord, DerivedKpis, DiagnosisClass, KpiRecord, NUM_ATTRIBUTES};
use crate::scalar::Scalar;

pub const CELL_ID_COLUMN: &str = "cell_id";
pub const DIAGNOSIS_COLUMN: &str = "diagnosis";
pub const DEFAULT_RELATION: &str = "cell_performance";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttributeKind {
    Numeric,
    Text,
    Nominal(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeDecl {
    pub name: String,
    pub kind: AttributeKind,
}

impl AttributeDecl {
    pub fn new(name: impl Into<String>, kind: AttributeKind) -> Self {
        AttributeDecl { name: name.into(), kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value<T = f64> {
    Num(T),
    Text(String),
}

impl<T: Scalar> Value<T> {
    pub fn as_num(&self) -> Option<T> {
        match self {
            Value::Num(v) => Some(*v),
            Value::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            Value::Num(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset<T = f64> {
    pub relation_name: String,
    pub attributes: Vec<AttributeDecl>,
    pub rows: Vec<Vec<Value<T>>>,
    /// Source path or `"generated"`. Not part of equality.
    pub provenance: String,
}

impl<T: Scalar> PartialEq for Dataset<T> {
    fn eq(&self, other: &Self) -> bool {
        self.relation_name == other.relation_name
            && self.attributes == other.attributes
            && self.rows == other.rows
    }
}

/// Train fraction and shuffle seed for [`split`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl<T: Scalar> Dataset<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        let key = normalize_name(name);
        self.attributes.iter().position(|a| normalize_name(&a.name) == key)
    }

    /// Checks row arity, numeric finiteness and nominal membership.
    pub fn validate(&self) -> Result<()> {
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.attributes.len() {
                return Err(Error::validation(format!(
                    "row {} has {} values, schema declares {}",
                    r + 1,
                    row.len(),
                    self.attributes.len()
                )));
            }
            for (decl, value) in self.attributes.iter().zip(row) {
                check_value(decl, value).map_err(|msg| Error::validation(format!("row {}: {msg}", r + 1)))?;
            }
        }
        Ok(())
    }

    /// Builds a KPI relation: `cell_id`, the eight attributes in schema order
    /// and, when every record carries one, a nominal `diagnosis` column.
    pub fn from_records(relation: &str, records: &[KpiRecord<T>]) -> Result<Self> {
        let labeled = records.iter().filter(|r| r.diagnosis.is_some()).count();
        if labeled != 0 && labeled != records.len() {
            return Err(Error::validation(format!(
                "{} of {} records are unlabeled; missing diagnoses cannot be written",
                records.len() - labeled,
                records.len()
            )));
        }
        let with_diagnosis = labeled > 0;
        let mut attributes = vec![AttributeDecl::new(CELL_ID_COLUMN, AttributeKind::Text)];
        attributes.extend(Attribute::ALL.iter().map(|a| AttributeDecl::new(a.name(), AttributeKind::Numeric)));
        if with_diagnosis {
            let mut values: Vec<String> = DiagnosisClass::LABELS.iter().map(|c| c.as_str().to_string()).collect();
            if records.iter().any(|r| r.diagnosis == Some(DiagnosisClass::Unclassified)) {
                values.push(DiagnosisClass::Unclassified.as_str().to_string());
            }
            attributes.push(AttributeDecl::new(DIAGNOSIS_COLUMN, AttributeKind::Nominal(values)));
        }
        let rows = records
            .iter()
            .map(|r| {
                let mut row = Vec::with_capacity(attributes.len());
                row.push(Value::Text(r.cell_id.clone()));
                row.extend(r.values().into_iter().map(Value::Num));
                if let Some(d) = r.diagnosis {
                    row.push(Value::Text(d.as_str().to_string()));
                }
                row
            })
            .collect();
        Ok(Dataset {
            relation_name: relation.to_string(),
            attributes,
            rows,
            provenance: "generated".to_string(),
        })
    }

    /// Maps columns onto the KPI schema. Every numeric attribute must be
    /// present; `cell_id` and `diagnosis` are optional. Rows without a
    /// `cell_id` column get `cell-<n>` (1-based row number).
    pub fn to_records(&self) -> Result<Vec<KpiRecord<T>>> {
        let mut attr_cols = [usize::MAX; NUM_ATTRIBUTES];
        let mut cell_col = None;
        let mut diag_col = None;
        for (i, decl) in self.attributes.iter().enumerate() {
            let key = normalize_name(&decl.name);
            if key == CELL_ID_COLUMN {
                cell_col = Some(i);
            } else if key == DIAGNOSIS_COLUMN {
                diag_col = Some(i);
            } else if let Some(a) = Attribute::from_name(&decl.name) {
                if decl.kind != AttributeKind::Numeric {
                    return Err(Error::validation(format!("attribute {} must be numeric", decl.name)));
                }
                if attr_cols[a.index()] != usize::MAX {
                    return Err(Error::validation(format!("attribute {a} declared twice")));
                }
                attr_cols[a.index()] = i;
            } else {
                return Err(Error::validation(format!("unknown attribute `{}` in KPI schema", decl.name)));
            }
        }
        if let Some(missing) = Attribute::ALL.iter().find(|a| attr_cols[a.index()] == usize::MAX) {
            return Err(Error::validation(format!("missing attribute {missing}")));
        }
        self.validate()?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let cell_id = match cell_col {
                    Some(c) => match &row[c] {
                        Value::Text(s) => s.clone(),
                        Value::Num(v) => v.to_string(),
                    },
                    None => format!("cell-{}", r + 1),
                };
                let values = attr_cols.map(|c| row[c].as_num().unwrap_or_else(T::nan));
                let mut rec = KpiRecord::from_values(cell_id, values);
                if let Some(c) = diag_col {
                    let text = row[c]
                        .as_text()
                        .ok_or_else(|| Error::validation(format!("row {}: diagnosis must be text", r + 1)))?;
                    rec.diagnosis = Some(text.parse()?);
                }
                rec.validate()?;
                Ok(rec)
            })
            .collect()
    }
}

fn check_value<T: Scalar>(decl: &AttributeDecl, value: &Value<T>) -> std::result::Result<(), String> {
    match (&decl.kind, value) {
        (AttributeKind::Numeric, Value::Num(v)) if v.is_finite() => Ok(()),
        (AttributeKind::Numeric, Value::Num(v)) => Err(format!("{}: non-finite value {v}", decl.name)),
        (AttributeKind::Numeric, Value::Text(s)) => Err(format!("{}: expected number, got `{s}`", decl.name)),
        (AttributeKind::Text, Value::Text(_)) => Ok(()),
        (AttributeKind::Nominal(set), Value::Text(s)) if set.contains(s) => Ok(()),
        (AttributeKind::Nominal(set), Value::Text(s)) => {
            Err(format!("{}: `{s}` not in {{{}}}", decl.name, set.join(",")))
        }
        (_, Value::Num(v)) => Err(format!("{}: expected text, got number {v}", decl.name)),
    }
}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    quoted: bool,
}

/// Splits on commas outside single or double quotes; quotes are removed and
/// backslash escapes inside quotes resolved.
fn tokenize(line: &str) -> std::result::Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        let mut text = String::new();
        let mut quoted = false;
        if let Some(&q) = chars.peek().filter(|&&c| c == '\'' || c == '"') {
            quoted = true;
            chars.next();
            let mut closed = false;
            while let Some(c) = chars.next() {
                if c == '\\' {
                    match chars.next() {
                        Some(e) => text.push(e),
                        None => return Err("dangling escape".into()),
                    }
                } else if c == q {
                    closed = true;
                    break;
                } else {
                    text.push(c);
                }
            }
            if !closed {
                return Err("unterminated quote".into());
            }
            while chars.peek().is_some_and(|c| c.is_whitespace()) {
                chars.next();
            }
            match chars.next() {
                None => {
                    out.push(Token { text, quoted });
                    return Ok(out);
                }
                Some(',') => {}
                Some(c) => return Err(format!("unexpected `{c}` after quoted value")),
            }
        } else {
            let mut ended = true;
            for c in chars.by_ref() {
                if c == ',' {
                    ended = false;
                    break;
                }
                text.push(c);
            }
            out.push(Token {
                text: text.trim().to_string(),
                quoted,
            });
            if ended {
                return Ok(out);
            }
            continue;
        }
        out.push(Token { text, quoted });
    }
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s == "?"
        || s.chars()
            .any(|c| c.is_whitespace() || matches!(c, ',' | '\'' | '"' | '%' | '{' | '}' | '\\'))
}

fn quote(s: &str) -> String {
    if needs_quotes(s) {
        let mut q = String::with_capacity(s.len() + 2);
        q.push('\'');
        for c in s.chars() {
            if c == '\'' || c == '\\' {
                q.push('\\');
            }
            q.push(c);
        }
        q.push('\'');
        q
    } else {
        s.to_string()
    }
}

/// Splits `@keyword rest` where the first word of `rest` may be quoted.
fn split_name(rest: &str) -> std::result::Result<(String, &str), String> {
    let rest = rest.trim_start();
    if let Some(q) = rest.chars().next().filter(|&c| c == '\'' || c == '"') {
        let body = &rest[1..];
        let mut name = String::new();
        let mut escaped = false;
        for (i, c) in body.char_indices() {
            if escaped {
                name.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                return Ok((name, &body[i + 1..]));
            } else {
                name.push(c);
            }
        }
        Err("unterminated quoted name".into())
    } else {
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        if end == 0 {
            return Err("missing name".into());
        }
        Ok((rest[..end].to_string(), &rest[end..]))
    }
}

fn parse_kind(spec: &str) -> std::result::Result<AttributeKind, String> {
    let spec = spec.trim();
    if let Some(inner) = spec.strip_prefix('{') {
        let inner = inner.strip_suffix('}').ok_or("nominal value set missing closing `}`")?;
        let values: Vec<String> = tokenize(inner)?.into_iter().map(|t| t.text).collect();
        if values.iter().any(String::is_empty) {
            return Err("empty nominal value".into());
        }
        return Ok(AttributeKind::Nominal(values));
    }
    match spec.to_ascii_lowercase().as_str() {
        "numeric" | "real" | "integer" => Ok(AttributeKind::Numeric),
        "string" => Ok(AttributeKind::Text),
        other => Err(format!("unsupported attribute kind `{other}`")),
    }
}

/// Parses the supported ARFF subset from text.
pub fn parse_arff<T: Scalar>(text: &str) -> Result<Dataset<T>> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut relation = None;
    let mut attributes: Vec<AttributeDecl> = Vec::new();
    let mut rows = Vec::new();
    let mut in_data = false;
    let mut missing = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if !in_data {
            if !line.starts_with('@') {
                return Err(Error::at_line(lineno, "expected a declaration before @data"));
            }
            let keyword_end = line.find(char::is_whitespace).unwrap_or(line.len());
            let keyword = line[..keyword_end].to_ascii_lowercase();
            let rest = &line[keyword_end..];
            match keyword.as_str() {
                "@relation" => {
                    let (name, tail) = split_name(rest).map_err(|m| Error::at_line(lineno, m))?;
                    if !tail.trim().is_empty() {
                        return Err(Error::at_line(lineno, "trailing text after relation name"));
                    }
                    relation = Some(name);
                }
                "@attribute" => {
                    let (name, kind) = split_name(rest).map_err(|m| Error::at_line(lineno, m))?;
                    let kind = parse_kind(kind).map_err(|m| Error::at_line(lineno, m))?;
                    attributes.push(AttributeDecl { name, kind });
                }
                "@data" => {
                    if attributes.is_empty() {
                        return Err(Error::at_line(lineno, "@data before any @attribute"));
                    }
                    in_data = true;
                }
                other => return Err(Error::at_line(lineno, format!("unsupported declaration `{other}`"))),
            }
            continue;
        }

        let tokens = tokenize(line).map_err(|m| Error::at_line(lineno, m))?;
        if tokens.len() != attributes.len() {
            return Err(Error::at_line(
                lineno,
                format!("row has {} values, schema declares {}", tokens.len(), attributes.len()),
            ));
        }
        let mut row = Vec::with_capacity(tokens.len());
        for (col, (tok, decl)) in tokens.into_iter().zip(&attributes).enumerate() {
            if !tok.quoted && tok.text == "?" {
                missing += 1;
                row.push(Value::Text(tok.text));
                continue;
            }
            let value = match decl.kind {
                AttributeKind::Numeric => match T::parse_text(&tok.text).filter(|v| v.is_finite()) {
                    Some(v) if !tok.quoted => Value::Num(v),
                    _ => {
                        return Err(Error::parse(
                            format!("line {lineno}, column {}", col + 1),
                            format!("invalid number `{}` for {}", tok.text, decl.name),
                        ))
                    }
                },
                _ => Value::Text(tok.text),
            };
            check_value(decl, &value).map_err(|m| Error::at_line(lineno, m))?;
            row.push(value);
        }
        rows.push(row);
    }

    if missing > 0 {
        return Err(Error::validation(format!(
            "{missing} missing value(s) (`?`) found; missing values are not supported"
        )));
    }
    if !in_data {
        return Err(Error::parse("end of input", "no @data section"));
    }
    Ok(Dataset {
        relation_name: relation.ok_or_else(|| Error::parse("header", "missing @relation"))?,
        attributes,
        rows,
        provenance: String::new(),
    })
}

pub fn read_arff<T: Scalar>(mut source: impl Read) -> Result<Dataset<T>> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    parse_arff(&text)
}

/// Renders the dataset as ARFF text with LF line endings.
pub fn write_arff<T: Scalar>(d: &Dataset<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "@relation {}", quote(&d.relation_name));
    out.push('\n');
    for a in &d.attributes {
        let kind = match &a.kind {
            AttributeKind::Numeric => "numeric".to_string(),
            AttributeKind::Text => "string".to_string(),
            AttributeKind::Nominal(values) => {
                let items: Vec<String> = values
                    .iter()
                    .map(|v| {
                        if v.chars().any(|c| matches!(c, ',' | '\'' | '"' | '{' | '}' | '\\')) {
                            quote(v)
                        } else {
                            v.clone()
                        }
                    })
                    .collect();
                format!("{{{}}}", items.join(","))
            }
        };
        let _ = writeln!(out, "@attribute {} {kind}", quote(&a.name));
    }
    out.push_str("\n@data\n");
    for row in &d.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|v| match v {
                Value::Num(x) => x.to_string(),
                Value::Text(s) => quote(s),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn csv_error(e: csv::Error) -> Error {
    let location = e
        .position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| "csv input".to_string());
    Error::parse(location, e.to_string())
}

/// Reads a KPI CSV. With a header, columns are matched by name (`cell_id`,
/// the eight attributes under any accepted alias, `diagnosis`); without one,
/// 8 columns are the attributes in schema order, 9 add a trailing diagnosis
/// and 10 add a leading `cell_id`.
pub fn read_csv<T: Scalar>(source: impl Read, has_header: bool) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(source);

    let names: Vec<String> = if has_header {
        reader.headers().map_err(csv_error)?.iter().map(str::to_string).collect()
    } else {
        Vec::new()
    };
    let mut records = reader.records();
    let mut first = None;
    let width = if has_header {
        names.len()
    } else {
        match records.next() {
            Some(r) => {
                let r = r.map_err(csv_error)?;
                let w = r.len();
                first = Some(r);
                w
            }
            None => NUM_ATTRIBUTES,
        }
    };

    let mut attributes = Vec::with_capacity(width);
    if has_header {
        let mut seen = BTreeSet::new();
        for name in &names {
            let key = normalize_name(name);
            let decl = if key == CELL_ID_COLUMN {
                AttributeDecl::new(CELL_ID_COLUMN, AttributeKind::Text)
            } else if key == DIAGNOSIS_COLUMN {
                AttributeDecl::new(DIAGNOSIS_COLUMN, AttributeKind::Text)
            } else if let Some(a) = Attribute::from_name(name) {
                AttributeDecl::new(a.name(), AttributeKind::Numeric)
            } else {
                return Err(Error::parse("header", format!("unknown column `{name}`")));
            };
            if !seen.insert(decl.name.clone()) {
                return Err(Error::parse("header", format!("duplicate column `{name}`")));
            }
            attributes.push(decl);
        }
    } else {
        let (lead, trail) = match width {
            8 => (false, false),
            9 => (false, true),
            10 => (true, true),
            w => {
                return Err(Error::parse(
                    "row 1",
                    format!("expected 8, 9 or 10 columns without a header, found {w}"),
                ))
            }
        };
        if lead {
            attributes.push(AttributeDecl::new(CELL_ID_COLUMN, AttributeKind::Text));
        }
        attributes.extend(Attribute::ALL.iter().map(|a| AttributeDecl::new(a.name(), AttributeKind::Numeric)));
        if trail {
            attributes.push(AttributeDecl::new(DIAGNOSIS_COLUMN, AttributeKind::Text));
        }
    }

    let mut rows = Vec::new();
    let diag_col = attributes.iter().position(|a| a.name == DIAGNOSIS_COLUMN);
    for (r, rec) in first.into_iter().map(Ok).chain(records).enumerate() {
        let rec = rec.map_err(csv_error)?;
        let rowno = r + 1;
        if rec.len() != attributes.len() {
            return Err(Error::parse(
                format!("row {rowno}"),
                format!("{} values, expected {}", rec.len(), attributes.len()),
            ));
        }
        let mut row = Vec::with_capacity(rec.len());
        for (c, (field, decl)) in rec.iter().zip(&attributes).enumerate() {
            let value = match decl.kind {
                AttributeKind::Numeric => match T::parse_text(field).filter(|v| v.is_finite()) {
                    Some(v) => Value::Num(v),
                    None => {
                        return Err(Error::parse(
                            format!("row {rowno}, column {}", c + 1),
                            format!("invalid number `{field}` for {}", decl.name),
                        ))
                    }
                },
                _ if Some(c) == diag_col => {
                    let class: DiagnosisClass = field
                        .parse()
                        .map_err(|_| Error::parse(format!("row {rowno}, column {}", c + 1), format!("unknown diagnosis `{field}`")))?;
                    Value::Text(class.as_str().to_string())
                }
                _ => Value::Text(field.to_string()),
            };
            row.push(value);
        }
        rows.push(row);
    }

    if let Some(c) = diag_col {
        let present: BTreeSet<DiagnosisClass> = rows
            .iter()
            .filter_map(|row| row[c].as_text().and_then(|s| s.parse().ok()))
            .collect();
        let mut values: Vec<String> = DiagnosisClass::LABELS.iter().map(|d| d.as_str().to_string()).collect();
        if present.contains(&DiagnosisClass::Unclassified) {
            values.push(DiagnosisClass::Unclassified.as_str().to_string());
        }
        attributes[c].kind = AttributeKind::Nominal(values);
    }

    Ok(Dataset {
        relation_name: DEFAULT_RELATION.to_string(),
        attributes,
        rows,
        provenance: String::new(),
    })
}

pub fn write_csv<T: Scalar>(d: &Dataset<T>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(d.attributes.iter().map(|a| a.name.as_str())).map_err(csv_error)?;
    for row in &d.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|v| match v {
                Value::Num(x) => x.to_string(),
                Value::Text(s) => s.clone(),
            })
            .collect();
        w.write_record(&cells).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::validation(e.to_string()))
}

/// True when the first non-empty line names at least one known column, so
/// the file is read with a header.
pub fn csv_has_header(text: &str) -> bool {
    let Some(line) = text.lines().find(|l| !l.trim().is_empty()) else {
        return false;
    };
    line.split(',').any(|field| {
        let name = field.trim().trim_matches('"');
        let key = normalize_name(name);
        key == CELL_ID_COLUMN || key == DIAGNOSIS_COLUMN || Attribute::from_name(name).is_some()
    })
}

const COUNTER_COLUMNS: [&str; 8] = ["cell_id", "ca", "cf", "cs", "te", "oe", "sdcch_attempts", "sdcch_successes"];

fn counter_column(name: &str) -> Option<usize> {
    let key = normalize_name(name);
    let key = match key.as_str() {
        "sdcchsa" => "sdcch_attempts",
        "ssdcch" => "sdcch_successes",
        other => other,
    };
    COUNTER_COLUMNS.iter().position(|c| *c == key)
}

/// Reads raw counters from a CSV with a header naming `cell_id`, `ca`, `cf`,
/// `cs`, `te`, `oe`, `sdcch_attempts` (or `sdcchsa`) and `sdcch_successes`
/// (or `ssdcch`), in any order.
pub fn read_counters_csv<T: Scalar>(source: impl Read) -> Result<Vec<CounterRecord<T>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = reader.headers().map_err(csv_error)?.clone();
    let mut cols = [usize::MAX; 8];
    for (i, name) in header.iter().enumerate() {
        let c = counter_column(name).ok_or_else(|| Error::parse("header", format!("unknown column `{name}`")))?;
        cols[c] = i;
    }
    if let Some(missing) = cols.iter().position(|&c| c == usize::MAX) {
        return Err(Error::parse("header", format!("missing column `{}`", COUNTER_COLUMNS[missing])));
    }
    reader
        .records()
        .enumerate()
        .map(|(r, rec)| {
            let rec = rec.map_err(csv_error)?;
            let at = |c: usize| format!("row {}, column {}", r + 1, cols[c] + 1);
            let field = |c: usize| rec.get(cols[c]).unwrap_or("");
            let count = |c: usize| -> Result<u64> {
                field(c)
                    .parse()
                    .map_err(|_| Error::parse(at(c), format!("invalid count `{}` for {}", field(c), COUNTER_COLUMNS[c])))
            };
            let erlang = |c: usize| -> Result<T> {
                T::parse_text(field(c))
                    .ok_or_else(|| Error::parse(at(c), format!("invalid traffic `{}` for {}", field(c), COUNTER_COLUMNS[c])))
            };
            Ok(CounterRecord {
                cell_id: field(0).to_string(),
                ca: count(1)?,
                cf: count(2)?,
                cs: count(3)?,
                te: erlang(4)?,
                oe: erlang(5)?,
                sdcch_attempts: count(6)?,
                sdcch_successes: count(7)?,
            })
        })
        .collect()
}

/// `cell_id,csr,dcr,tr,sdcchsr` rows.
pub fn write_kpis_csv<T: Scalar>(rows: &[(String, DerivedKpis<T>)]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["cell_id", "csr", "dcr", "tr", "sdcchsr"]).map_err(csv_error)?;
    for (id, k) in rows {
        w.write_record([id.clone(), k.csr.to_string(), k.dcr.to_string(), k.tr.to_string(), k.sdcchsr.to_string()])
            .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::validation(e.to_string()))
}

/// Seeded shuffle partition. `train` takes `round(train_fraction * N)` rows;
/// both halves keep the original row order.
pub fn split<T: Scalar>(d: &Dataset<T>, s: SplitSpec) -> Result<(Dataset<T>, Dataset<T>)> {
    if d.is_empty() {
        return Err(Error::validation("cannot split an empty dataset"));
    }
    if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) {
        return Err(Error::validation(format!(
            "train fraction must lie in (0, 1), got {}",
            s.train_fraction
        )));
    }
    let n = d.len();
    let n_train = (s.train_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(s.seed));
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let part = |want: bool| Dataset {
        relation_name: d.relation_name.clone(),
        attributes: d.attributes.clone(),
        rows: d
            .rows
            .iter()
            .zip(&in_train)
            .filter(|(_, &t)| t == want)
            .map(|(row, _)| row.clone())
            .collect(),
        provenance: d.provenance.clone(),
    };
    Ok((part(true), part(false)))
}
