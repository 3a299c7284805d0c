//! Reading and writing datasets, rule files and reports.

use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use kpidiag::dataset::{csv_has_header, parse_arff, read_csv, write_arff, write_csv, Dataset};
use kpidiag::rules::{default_ruleset, load_ruleset, RuleSet};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Arff,
    Csv,
}

fn format_of_path(path: &Path) -> Option<Format> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "arff" => Some(Format::Arff),
        "csv" => Some(Format::Csv),
        _ => None,
    }
}

fn sniff(text: &str) -> Format {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or_default();
    if first.starts_with('%') || first.starts_with('@') {
        Format::Arff
    } else {
        Format::Csv
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

/// Reads a KPI dataset; the format comes from `format`, else the extension,
/// else the file content.
pub fn read_dataset(path: &Path, format: Option<Format>) -> Result<Dataset, CliError> {
    let text = read_text(path)?;
    let format = format.or_else(|| format_of_path(path)).unwrap_or_else(|| sniff(&text));
    let mut data = match format {
        Format::Arff => parse_arff(&text),
        Format::Csv => read_csv(text.as_bytes(), csv_has_header(&text)),
    }
    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    data.provenance = path.display().to_string();
    Ok(data)
}

pub fn render_dataset(data: &Dataset, format: Format) -> Result<String, CliError> {
    match format {
        Format::Arff => Ok(write_arff(data)),
        Format::Csv => write_csv(data).map_err(|e| CliError::Internal(e.to_string())),
    }
}

/// Writes a dataset to `out` (format from `format`, else the extension,
/// else ARFF) or to standard output.
pub fn write_dataset(data: &Dataset, out: Option<&Path>, format: Option<Format>) -> Result<(), CliError> {
    let format = format
        .or_else(|| out.and_then(format_of_path))
        .unwrap_or(Format::Arff);
    emit(out, &render_dataset(data, format)?)
}

/// Writes `body` to `path`, or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, body: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, body),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::Internal(format!("cannot write to standard output: {e}")))
        }
    }
}

pub fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

/// `default` selects the built-in rule set; anything else is a rule file.
pub fn load_rules(spec: &str) -> Result<RuleSet, CliError> {
    if spec.eq_ignore_ascii_case("default") {
        return Ok(default_ruleset());
    }
    let path = Path::new(spec);
    load_ruleset(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
