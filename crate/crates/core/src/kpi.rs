//! Domain vocabulary: raw counters, derived KPIs, the per-cell KPI record and
//! the diagnosis labels with their cause groups.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Raw per-cell counters for one measurement period.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterRecord<T = f64> {
    pub cell_id: String,
    /// Call seizure attempts.
    pub ca: u64,
    /// Call failures among seized calls.
    pub cf: u64,
    /// Call successes.
    pub cs: u64,
    /// Incoming traffic, Erlang.
    pub te: T,
    /// Outgoing traffic, Erlang.
    pub oe: T,
    pub sdcch_attempts: u64,
    pub sdcch_successes: u64,
}

impl<T: Scalar> CounterRecord<T> {
    pub fn validate(&self) -> Result<()> {
        if self.cs > self.ca {
            return Err(Error::validation(format!(
                "cell {}: CS ({}) exceeds CA ({})",
                self.cell_id, self.cs, self.ca
            )));
        }
        if self.sdcch_successes > self.sdcch_attempts {
            return Err(Error::validation(format!(
                "cell {}: SSDCCH ({}) exceeds SDCCHSA ({})",
                self.cell_id, self.sdcch_successes, self.sdcch_attempts
            )));
        }
        for (name, v) in [("TE", self.te), ("OE", self.oe)] {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::validation(format!(
                    "cell {}: {name} must be finite and non-negative, got {v}",
                    self.cell_id
                )));
            }
        }
        Ok(())
    }
}

/// Call success rate, dropped call rate, traffic rate and SDCCH success rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedKpis<T = f64> {
    pub csr: T,
    pub dcr: T,
    pub tr: T,
    pub sdcchsr: T,
}

/// Ratio KPIs in percent: CSR = CS/CA, DCR = CF/CS, SDCCHSR = SSDCCH/SDCCHSA;
/// TR = TE + OE in Erlang.
pub fn derive_kpis<T: Scalar>(c: &CounterRecord<T>) -> Result<DerivedKpis<T>> {
    for (name, denom) in [("CA", c.ca), ("CS", c.cs), ("SDCCHSA", c.sdcch_attempts)] {
        if denom == 0 {
            return Err(Error::Derivation(name.to_string()));
        }
    }
    c.validate()?;
    let pct = |num: u64, den: u64| T::lit(100.0) * T::lit(num as f64) / T::lit(den as f64);
    Ok(DerivedKpis {
        csr: pct(c.cs, c.ca),
        dcr: pct(c.cf, c.cs),
        tr: c.te + c.oe,
        sdcchsr: pct(c.sdcch_successes, c.sdcch_attempts),
    })
}

/// The eight numeric KPI attributes, in schema order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    TchCallDropRate,
    HandoverSuccessSeizure,
    SdcchDrops,
    Rab,
    HandoverAttempts,
    HandoverFailuresRate,
    HandoverSuccessRate,
    TchDropSuddenLostCon,
}

pub const NUM_ATTRIBUTES: usize = 8;

impl Attribute {
    pub const ALL: [Attribute; NUM_ATTRIBUTES] = [
        Attribute::TchCallDropRate,
        Attribute::HandoverSuccessSeizure,
        Attribute::SdcchDrops,
        Attribute::Rab,
        Attribute::HandoverAttempts,
        Attribute::HandoverFailuresRate,
        Attribute::HandoverSuccessRate,
        Attribute::TchDropSuddenLostCon,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Column name used in every file this crate writes.
    pub fn name(self) -> &'static str {
        match self {
            Attribute::TchCallDropRate => "tch_call_drop_rate",
            Attribute::HandoverSuccessSeizure => "handover_success_seizure",
            Attribute::SdcchDrops => "sdcch_drops",
            Attribute::Rab => "rab",
            Attribute::HandoverAttempts => "handover_attempts",
            Attribute::HandoverFailuresRate => "handover_failures_rate",
            Attribute::HandoverSuccessRate => "handover_success_rate",
            Attribute::TchDropSuddenLostCon => "tch_drop_sudden_lost_con",
        }
    }

    /// Short code used in rule files.
    pub fn code(self) -> &'static str {
        match self {
            Attribute::TchCallDropRate => "TCHCDR",
            Attribute::HandoverSuccessSeizure => "HSS",
            Attribute::SdcchDrops => "SDCCHD",
            Attribute::Rab => "RAB",
            Attribute::HandoverAttempts => "HA",
            Attribute::HandoverFailuresRate => "HF",
            Attribute::HandoverSuccessRate => "HSR",
            Attribute::TchDropSuddenLostCon => "TCHSDLC",
        }
    }

    fn aliases(self) -> &'static [&'static str] {
        match self {
            Attribute::TchCallDropRate => &[
                "Traffic Channel Call drop rate",
                "TCH Call Drop Rate",
                "TCHCallDropRate",
                "TCHCallDropR",
            ],
            Attribute::HandoverSuccessSeizure => &["Handover Success Seizure"],
            Attribute::SdcchDrops => &["SDCCH Drops"],
            Attribute::Rab => &["Radio Access Barrier", "Radio Access Bearer"],
            Attribute::HandoverAttempts => &["Handover Attempts"],
            Attribute::HandoverFailuresRate => &[
                "Handovers Failures Rate",
                "Handover Failures Rate",
                "Handover failures",
                "HandFailures",
                "HFR",
            ],
            Attribute::HandoverSuccessRate => &["Handover Success Rate", "HandoverSuccessRate"],
            Attribute::TchDropSuddenLostCon => &[
                "TCHDropSuddenLostCon",
                "TCH Dropped Suddenly Lost Connection",
            ],
        }
    }

    /// Resolves a column or rule-file name. Case-insensitive; spaces, hyphens
    /// and underscores are interchangeable.
    pub fn from_name(name: &str) -> Option<Attribute> {
        let key = normalize_name(name);
        Attribute::ALL.into_iter().find(|a| {
            normalize_name(a.name()) == key
                || normalize_name(a.code()) == key
                || a.aliases().iter().any(|alias| normalize_name(alias) == key)
        })
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn normalize_name(name: &str) -> String {
    name.trim()
        .chars()
        .map(|c| match c {
            ' ' | '-' => '_',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

/// Diagnosis label attached to a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiagnosisClass {
    ClassA,
    ClassB,
    ClassC,
    Optimised,
    Unclassified,
}

/// Number of trainable labels (everything except `Unclassified`).
pub const NUM_CLASSES: usize = 4;

impl DiagnosisClass {
    pub const ALL: [DiagnosisClass; 5] = [
        DiagnosisClass::ClassA,
        DiagnosisClass::ClassB,
        DiagnosisClass::ClassC,
        DiagnosisClass::Optimised,
        DiagnosisClass::Unclassified,
    ];

    /// Trainable labels in the fixed reporting order.
    pub const LABELS: [DiagnosisClass; NUM_CLASSES] = [
        DiagnosisClass::ClassA,
        DiagnosisClass::ClassB,
        DiagnosisClass::ClassC,
        DiagnosisClass::Optimised,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosisClass::ClassA => "Class A",
            DiagnosisClass::ClassB => "Class B",
            DiagnosisClass::ClassC => "Class C",
            DiagnosisClass::Optimised => "Optimised",
            DiagnosisClass::Unclassified => "Unclassified",
        }
    }

    /// Position in [`DiagnosisClass::LABELS`]; `None` for `Unclassified`.
    pub fn label_index(self) -> Option<usize> {
        match self {
            DiagnosisClass::Unclassified => None,
            other => Some(other as usize),
        }
    }

    pub fn from_label_index(i: usize) -> DiagnosisClass {
        DiagnosisClass::LABELS[i]
    }
}

impl fmt::Display for DiagnosisClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DiagnosisClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = normalize_name(s.trim().trim_matches(|c| c == '"' || c == '\''));
        let found = match key.as_str() {
            "class_a" | "a" => DiagnosisClass::ClassA,
            "class_b" | "b" => DiagnosisClass::ClassB,
            "class_c" | "c" => DiagnosisClass::ClassC,
            "optimised" | "optimized" | "class_d" | "d" => DiagnosisClass::Optimised,
            "unclassified" => DiagnosisClass::Unclassified,
            _ => return Err(Error::validation(format!("unknown diagnosis class `{s}`"))),
        };
        Ok(found)
    }
}

/// Group of malfunction causes used when reporting diagnoses per area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CauseGroup {
    Gca,
    Gcb,
    Gcc,
    Gcd,
}

impl CauseGroup {
    pub const ALL: [CauseGroup; 4] = [CauseGroup::Gca, CauseGroup::Gcb, CauseGroup::Gcc, CauseGroup::Gcd];

    pub fn as_str(self) -> &'static str {
        match self {
            CauseGroup::Gca => "GCA",
            CauseGroup::Gcb => "GCB",
            CauseGroup::Gcc => "GCC",
            CauseGroup::Gcd => "GCD",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            CauseGroup::Gca => "call setup success and dropped call optimisation errors",
            CauseGroup::Gcb => "traffic issues",
            CauseGroup::Gcc => "symptom-specific faults (handover, congestion)",
            CauseGroup::Gcd => "no fault detected (optimised)",
        }
    }
}

impl fmt::Display for CauseGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn class_to_group(d: DiagnosisClass) -> Result<CauseGroup> {
    match d {
        DiagnosisClass::ClassA => Ok(CauseGroup::Gca),
        DiagnosisClass::ClassB => Ok(CauseGroup::Gcb),
        DiagnosisClass::ClassC => Ok(CauseGroup::Gcc),
        DiagnosisClass::Optimised => Ok(CauseGroup::Gcd),
        DiagnosisClass::Unclassified => Err(Error::Mapping(d.to_string())),
    }
}

/// One cell's KPI vector plus its optional diagnosis.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiRecord<T = f64> {
    pub cell_id: String,
    pub tch_call_drop_rate: T,
    pub handover_success_seizure: T,
    pub sdcch_drops: T,
    pub rab: T,
    pub handover_attempts: T,
    pub handover_failures_rate: T,
    pub handover_success_rate: T,
    pub tch_drop_sudden_lost_con: T,
    pub diagnosis: Option<DiagnosisClass>,
}

impl<T: Scalar> KpiRecord<T> {
    /// Builds a record from values in [`Attribute::ALL`] order.
    pub fn from_values(cell_id: impl Into<String>, values: [T; NUM_ATTRIBUTES]) -> Self {
        let [tcdr, hss, sdd, rab, ha, hf, hsr, sdlc] = values;
        KpiRecord {
            cell_id: cell_id.into(),
            tch_call_drop_rate: tcdr,
            handover_success_seizure: hss,
            sdcch_drops: sdd,
            rab,
            handover_attempts: ha,
            handover_failures_rate: hf,
            handover_success_rate: hsr,
            tch_drop_sudden_lost_con: sdlc,
            diagnosis: None,
        }
    }

    pub fn with_diagnosis(mut self, d: DiagnosisClass) -> Self {
        self.diagnosis = Some(d);
        self
    }

    pub fn get(&self, a: Attribute) -> T {
        match a {
            Attribute::TchCallDropRate => self.tch_call_drop_rate,
            Attribute::HandoverSuccessSeizure => self.handover_success_seizure,
            Attribute::SdcchDrops => self.sdcch_drops,
            Attribute::Rab => self.rab,
            Attribute::HandoverAttempts => self.handover_attempts,
            Attribute::HandoverFailuresRate => self.handover_failures_rate,
            Attribute::HandoverSuccessRate => self.handover_success_rate,
            Attribute::TchDropSuddenLostCon => self.tch_drop_sudden_lost_con,
        }
    }

    pub fn set(&mut self, a: Attribute, v: T) {
        let slot = match a {
            Attribute::TchCallDropRate => &mut self.tch_call_drop_rate,
            Attribute::HandoverSuccessSeizure => &mut self.handover_success_seizure,
            Attribute::SdcchDrops => &mut self.sdcch_drops,
            Attribute::Rab => &mut self.rab,
            Attribute::HandoverAttempts => &mut self.handover_attempts,
            Attribute::HandoverFailuresRate => &mut self.handover_failures_rate,
            Attribute::HandoverSuccessRate => &mut self.handover_success_rate,
            Attribute::TchDropSuddenLostCon => &mut self.tch_drop_sudden_lost_con,
        };
        *slot = v;
    }

    pub fn values(&self) -> [T; NUM_ATTRIBUTES] {
        Attribute::ALL.map(|a| self.get(a))
    }

    /// Every numeric attribute finite and non-negative.
    pub fn validate(&self) -> Result<()> {
        for a in Attribute::ALL {
            let v = self.get(a);
            if !v.is_finite() || v < T::zero() {
                return Err(Error::validation(format!(
                    "cell {}: attribute {a} must be finite and non-negative, got {v}",
                    self.cell_id
                )));
            }
        }
        Ok(())
    }
}
