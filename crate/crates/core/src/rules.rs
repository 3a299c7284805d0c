//! Ordered threshold rules over KPI attributes, first match wins.
//!
//! Also hosts the rule-file format and the reachability analysis that shows
//! which rules can never fire because earlier rules cover their region.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::kpi::{Attribute, DiagnosisClass, KpiRecord, NUM_ATTRIBUTES};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Le,
    Lt,
    Gt,
    Ge,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Lt => "<",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn holds<T: Scalar>(self, value: T, threshold: T) -> bool {
        match self {
            Comparator::Le => value <= threshold,
            Comparator::Lt => value < threshold,
            Comparator::Gt => value > threshold,
            Comparator::Ge => value >= threshold,
        }
    }

    /// The comparator accepting exactly the values this one rejects.
    pub fn negate(self) -> Comparator {
        match self {
            Comparator::Le => Comparator::Gt,
            Comparator::Lt => Comparator::Ge,
            Comparator::Gt => Comparator::Le,
            Comparator::Ge => Comparator::Lt,
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, Comparator::Le | Comparator::Lt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleAtom<T = f64> {
    pub attribute: Attribute,
    pub comparator: Comparator,
    pub threshold: T,
}

impl<T: Scalar> RuleAtom<T> {
    pub fn new(attribute: Attribute, comparator: Comparator, threshold: T) -> Self {
        RuleAtom {
            attribute,
            comparator,
            threshold,
        }
    }

    pub fn holds(&self, r: &KpiRecord<T>) -> bool {
        self.comparator.holds(r.get(self.attribute), self.threshold)
    }
}

impl<T: Scalar> fmt::Display for RuleAtom<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.attribute.code(), self.comparator.symbol(), self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRule<T = f64> {
    pub rule_id: String,
    pub guard: Vec<RuleAtom<T>>,
    pub outcome: DiagnosisClass,
}

impl<T: Scalar> DiagnosticRule<T> {
    pub fn new(rule_id: impl Into<String>, guard: Vec<RuleAtom<T>>, outcome: DiagnosisClass) -> Self {
        DiagnosticRule {
            rule_id: rule_id.into(),
            guard,
            outcome,
        }
    }

    /// Whether the guard alone accepts the record, ignoring rule order.
    pub fn matches(&self, r: &KpiRecord<T>) -> bool {
        self.guard.iter().all(|a| a.holds(r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet<T = f64> {
    rules: Vec<DiagnosticRule<T>>,
    version: String,
    /// First rule referencing each attribute, for error reporting.
    first_ref: [Option<usize>; NUM_ATTRIBUTES],
}

impl<T: Scalar> RuleSet<T> {
    pub fn new(rules: Vec<DiagnosticRule<T>>, version: impl Into<String>) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::validation("rule set has no rules"));
        }
        let mut ids = BTreeSet::new();
        let mut first_ref = [None; NUM_ATTRIBUTES];
        for (i, rule) in rules.iter().enumerate() {
            if !ids.insert(rule.rule_id.as_str()) {
                return Err(Error::validation(format!("duplicate rule id {}", rule.rule_id)));
            }
            if rule.guard.is_empty() {
                return Err(Error::validation(format!("rule {} has an empty guard", rule.rule_id)));
            }
            if rule.outcome == DiagnosisClass::Unclassified {
                return Err(Error::validation(format!(
                    "rule {} cannot have outcome Unclassified",
                    rule.rule_id
                )));
            }
            for atom in &rule.guard {
                if !atom.threshold.is_finite() {
                    return Err(Error::validation(format!("rule {}: non-finite threshold", rule.rule_id)));
                }
                first_ref[atom.attribute.index()].get_or_insert(i);
            }
        }
        Ok(RuleSet {
            rules,
            version: version.into(),
            first_ref,
        })
    }

    pub fn rules(&self) -> &[DiagnosticRule<T>] {
        &self.rules
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Attributes that appear in at least one guard.
    pub fn referenced_attributes(&self) -> Vec<Attribute> {
        Attribute::ALL
            .into_iter()
            .filter(|a| self.first_ref[a.index()].is_some())
            .collect()
    }

    /// Index of the first rule whose guard accepts `r`, if any.
    pub fn first_match(&self, r: &KpiRecord<T>) -> Result<Option<usize>> {
        for a in Attribute::ALL {
            if let Some(i) = self.first_ref[a.index()] {
                if !r.get(a).is_finite() {
                    return Err(Error::Rule {
                        rule_id: self.rules[i].rule_id.clone(),
                        attribute: a.name().to_string(),
                    });
                }
            }
        }
        Ok(self.rules.iter().position(|rule| rule.matches(r)))
    }
}

/// Outcome of the first matching rule, `Unclassified` when none matches.
pub fn classify<T: Scalar>(r: &KpiRecord<T>, rs: &RuleSet<T>) -> Result<DiagnosisClass> {
    Ok(rs
        .first_match(r)?
        .map_or(DiagnosisClass::Unclassified, |i| rs.rules[i].outcome))
}

/// The canonical 13-branch expansion of the published diagnostic rules, in
/// transcription order. Branch ids carry the source rule number; a letter
/// suffix marks the IF/ELSE branches of one source rule.
pub fn default_ruleset<T: Scalar>() -> RuleSet<T> {
    use Attribute::{HandoverFailuresRate as Hf, HandoverSuccessRate as Hsr, Rab, TchCallDropRate as Tcdr, TchDropSuddenLostCon as Sdlc};
    use Comparator::*;
    use DiagnosisClass::*;
    let a = |attr, cmp, t: f64| RuleAtom::new(attr, cmp, T::lit(t));
    let rules = vec![
        DiagnosticRule::new("R1", vec![a(Hsr, Le, 71.23), a(Tcdr, Le, 7.42), a(Hf, Lt, 22.17)], ClassA),
        DiagnosticRule::new("R2a", vec![a(Hsr, Le, 71.23), a(Tcdr, Le, 7.42), a(Hf, Ge, 22.17), a(Rab, Gt, 3.0)], ClassB),
        DiagnosticRule::new("R2b", vec![a(Hsr, Le, 71.23), a(Tcdr, Le, 7.42), a(Hf, Ge, 22.17), a(Rab, Le, 3.0)], ClassA),
        DiagnosticRule::new("R3a", vec![a(Hsr, Gt, 57.99), a(Tcdr, Gt, 1.18)], Optimised),
        DiagnosticRule::new("R3b", vec![a(Hsr, Gt, 57.99), a(Tcdr, Le, 1.18)], ClassC),
        DiagnosticRule::new("R4", vec![a(Hsr, Le, 57.99), a(Hf, Gt, 3.69)], ClassC),
        DiagnosticRule::new("R5a", vec![a(Hsr, Le, 57.99), a(Hf, Le, 3.69), a(Hsr, Gt, 25.15)], ClassA),
        DiagnosticRule::new("R5b", vec![a(Hsr, Le, 57.99), a(Hf, Le, 3.69), a(Hsr, Le, 25.15)], ClassC),
        DiagnosticRule::new("R6a", vec![a(Rab, Le, 6.0), a(Tcdr, Le, 7.65)], ClassC),
        DiagnosticRule::new("R6b", vec![a(Rab, Le, 6.0), a(Tcdr, Gt, 7.65)], ClassA),
        DiagnosticRule::new("R7a", vec![a(Rab, Gt, 6.0), a(Sdlc, Gt, 26.0)], ClassB),
        DiagnosticRule::new("R7b", vec![a(Rab, Gt, 6.0), a(Sdlc, Le, 26.0), a(Hf, Le, 2.87)], ClassB),
        DiagnosticRule::new("R8", vec![a(Rab, Gt, 6.0), a(Sdlc, Le, 26.0), a(Hf, Gt, 2.87)], ClassC),
    ];
    RuleSet::new(rules, "canonical-13").expect("default rules are well formed")
}

/// Source-rule family of a branch id: `R6b` -> `R6`.
pub fn rule_family(rule_id: &str) -> &str {
    rule_id.trim_end_matches(|c: char| c.is_ascii_lowercase())
}

/// Renders the rule file format:
/// `RULE <id>: IF <attr> <op> <num> [AND ...] THEN <class>`.
pub fn save_ruleset<T: Scalar>(rs: &RuleSet<T>) -> String {
    let mut out = String::from("# diagnostic rules, first match wins\n");
    out.push_str(&format!("VERSION {}\n", rs.version));
    for rule in &rs.rules {
        let guard: Vec<String> = rule.guard.iter().map(ToString::to_string).collect();
        out.push_str(&format!("RULE {}: IF {} THEN {}\n", rule.rule_id, guard.join(" AND "), rule.outcome));
    }
    out
}

fn strip_keyword<'a>(s: &'a str, keyword: &str) -> Option<&'a str> {
    let head = s.get(..keyword.len())?;
    if head.eq_ignore_ascii_case(keyword) {
        let rest = &s[keyword.len()..];
        if rest.is_empty() || rest.starts_with(char::is_whitespace) {
            return Some(rest.trim_start());
        }
    }
    None
}

/// Splits on a case-insensitive keyword surrounded by whitespace.
fn split_keyword<'a>(s: &'a str, keyword: &str) -> Vec<&'a str> {
    let upper = s.to_ascii_uppercase();
    let needle = format!(" {keyword} ");
    let mut parts = Vec::new();
    let mut start = 0;
    while let Some(pos) = upper[start..].find(&needle) {
        parts.push(s[start..start + pos].trim());
        start += pos + needle.len();
    }
    parts.push(s[start..].trim());
    parts
}

fn parse_atom<T: Scalar>(text: &str) -> std::result::Result<RuleAtom<T>, String> {
    const OPS: [(&str, Comparator); 6] = [
        ("<=", Comparator::Le),
        (">=", Comparator::Ge),
        ("≤", Comparator::Le),
        ("≥", Comparator::Ge),
        ("<", Comparator::Lt),
        (">", Comparator::Gt),
    ];
    let (pos, op, comparator) = OPS
        .iter()
        .filter_map(|&(op, c)| text.find(op).map(|p| (p, op, c)))
        .min_by_key(|&(p, op, _)| (p, std::cmp::Reverse(op.len())))
        .ok_or_else(|| format!("no comparator in `{text}`"))?;
    let name = text[..pos].trim();
    let number = text[pos + op.len()..].trim();
    let attribute = Attribute::from_name(name).ok_or_else(|| format!("unknown attribute `{name}`"))?;
    let threshold = T::parse_text(number)
        .filter(|t| t.is_finite())
        .ok_or_else(|| format!("invalid threshold `{number}`"))?;
    Ok(RuleAtom::new(attribute, comparator, threshold))
}

pub fn load_ruleset<T: Scalar>(text: &str) -> Result<RuleSet<T>> {
    let mut version = String::from("unversioned");
    let mut rules = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(v) = strip_keyword(line, "VERSION") {
            version = v.to_string();
            continue;
        }
        let body = strip_keyword(line, "RULE").ok_or_else(|| Error::at_line(lineno, "expected RULE or VERSION"))?;
        let (id, body) = body
            .split_once(':')
            .ok_or_else(|| Error::at_line(lineno, "missing `:` after rule id"))?;
        let id = id.trim();
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(Error::at_line(lineno, format!("invalid rule id `{id}`")));
        }
        let body = strip_keyword(body.trim(), "IF").ok_or_else(|| Error::at_line(lineno, "missing IF"))?;
        let parts = split_keyword(body, "THEN");
        let [guard_text, class_text] = parts[..] else {
            return Err(Error::at_line(lineno, "expected exactly one THEN"));
        };
        let guard = split_keyword(guard_text, "AND")
            .into_iter()
            .map(parse_atom)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|m| Error::at_line(lineno, m))?;
        let outcome: DiagnosisClass = class_text
            .parse()
            .map_err(|_| Error::at_line(lineno, format!("unknown class `{class_text}`")))?;
        rules.push(DiagnosticRule::new(id, guard, outcome));
    }
    RuleSet::new(rules, version)
}

/// Closed per-attribute ranges over which reachability is analysed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<T = f64> {
    pub ranges: [(T, T); NUM_ATTRIBUTES],
}

impl<T: Scalar> Bounds<T> {
    pub fn new(ranges: [(T, T); NUM_ATTRIBUTES]) -> Result<Self> {
        for (a, (lo, hi)) in Attribute::ALL.iter().zip(ranges) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::validation(format!("invalid range [{lo}, {hi}] for {a}")));
            }
        }
        Ok(Bounds { ranges })
    }

    /// Ranges that cover every rule threshold and every published cluster
    /// profile value.
    pub fn broad() -> Self {
        let r = |lo: f64, hi: f64| (T::lit(lo), T::lit(hi));
        Bounds {
            ranges: [
                r(0.0, 10.0),   // tch_call_drop_rate
                r(0.0, 100.0),  // handover_success_seizure
                r(0.0, 100.0),  // sdcch_drops
                r(0.0, 130.0),  // rab
                r(0.0, 8000.0), // handover_attempts
                r(0.0, 70.0),   // handover_failures_rate
                r(0.0, 120.0),  // handover_success_rate
                r(0.0, 140.0),  // tch_drop_sudden_lost_con
            ],
        }
    }

    pub fn range(&self, a: Attribute) -> (T, T) {
        self.ranges[a.index()]
    }

    pub fn midpoint_record(&self, cell_id: impl Into<String>) -> KpiRecord<T> {
        let two = T::lit(2.0);
        KpiRecord::from_values(cell_id, self.ranges.map(|(lo, hi)| (lo + hi) / two))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bound<T> {
    value: T,
    inclusive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Interval<T> {
    lo: Bound<T>,
    hi: Bound<T>,
}

impl<T: Scalar> Interval<T> {
    fn closed(lo: T, hi: T) -> Self {
        Interval {
            lo: Bound { value: lo, inclusive: true },
            hi: Bound { value: hi, inclusive: true },
        }
    }

    fn is_empty(&self) -> bool {
        self.lo.value > self.hi.value
            || (self.lo.value == self.hi.value && !(self.lo.inclusive && self.hi.inclusive))
    }

    fn tighten_lo(&mut self, b: Bound<T>) {
        if b.value > self.lo.value || (b.value == self.lo.value && !b.inclusive) {
            self.lo = b;
        }
    }

    fn tighten_hi(&mut self, b: Bound<T>) {
        if b.value < self.hi.value || (b.value == self.hi.value && !b.inclusive) {
            self.hi = b;
        }
    }

    fn intersect(mut self, other: &Interval<T>) -> Self {
        self.tighten_lo(other.lo);
        self.tighten_hi(other.hi);
        self
    }

    fn apply(&mut self, cmp: Comparator, t: T) {
        let inclusive = matches!(cmp, Comparator::Le | Comparator::Ge);
        let b = Bound { value: t, inclusive };
        if cmp.is_upper() {
            self.tighten_hi(b);
        } else {
            self.tighten_lo(b);
        }
    }

    fn sample(&self) -> T {
        if self.lo.value == self.hi.value {
            self.lo.value
        } else {
            (self.lo.value + self.hi.value) / T::lit(2.0)
        }
    }
}

type Region<T> = [Interval<T>; NUM_ATTRIBUTES];

fn rule_region<T: Scalar>(rule: &DiagnosticRule<T>, bounds: &Bounds<T>) -> Region<T> {
    let mut region = bounds.ranges.map(|(lo, hi)| Interval::closed(lo, hi));
    for atom in &rule.guard {
        region[atom.attribute.index()].apply(atom.comparator, atom.threshold);
    }
    region
}

fn region_is_empty<T: Scalar>(r: &Region<T>) -> bool {
    r.iter().any(Interval::is_empty)
}

/// `a \ b` as a list of disjoint regions.
fn subtract<T: Scalar>(a: &Region<T>, b: &Region<T>) -> Vec<Region<T>> {
    let mut out = Vec::new();
    let mut rest = *a;
    for d in 0..NUM_ATTRIBUTES {
        let cut = b[d];
        let below = Interval {
            lo: rest[d].lo,
            hi: Bound { value: cut.lo.value, inclusive: !cut.lo.inclusive },
        }
        .intersect(&rest[d]);
        if !below.is_empty() {
            let mut piece = rest;
            piece[d] = below;
            out.push(piece);
        }
        let above = Interval {
            lo: Bound { value: cut.hi.value, inclusive: !cut.hi.inclusive },
            hi: rest[d].hi,
        }
        .intersect(&rest[d]);
        if !above.is_empty() {
            let mut piece = rest;
            piece[d] = above;
            out.push(piece);
        }
        rest[d] = rest[d].intersect(&cut);
        if rest[d].is_empty() {
            break;
        }
    }
    out
}

/// Part of each rule's guard region, within `bounds`, not already claimed by
/// an earlier rule.
fn live_regions<T: Scalar>(rs: &RuleSet<T>, bounds: &Bounds<T>, index: usize) -> Vec<Region<T>> {
    let own = rule_region(&rs.rules[index], bounds);
    if region_is_empty(&own) {
        return Vec::new();
    }
    let mut live = vec![own];
    for earlier in &rs.rules[..index] {
        let cut = rule_region(earlier, bounds);
        if region_is_empty(&cut) {
            continue;
        }
        live = live.iter().flat_map(|r| subtract(r, &cut)).collect();
        if live.is_empty() {
            break;
        }
    }
    live
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleReachability<T = f64> {
    pub rule_id: String,
    pub reachable: bool,
    /// A record inside `bounds` whose first match is this rule.
    pub witness: Option<KpiRecord<T>>,
}

/// Exact reachability under first-match order, by subtracting the guard
/// regions of earlier rules from each rule's own region.
pub fn analyze_reachability<T: Scalar>(rs: &RuleSet<T>, bounds: &Bounds<T>) -> Vec<RuleReachability<T>> {
    (0..rs.len())
        .map(|i| {
            let rule = &rs.rules[i];
            let witness = live_regions(rs, bounds, i).first().map(|region| {
                KpiRecord::from_values(format!("witness-{}", rule.rule_id), region.map(|iv| iv.sample()))
            });
            RuleReachability {
                rule_id: rule.rule_id.clone(),
                reachable: witness.is_some(),
                witness,
            }
        })
        .collect()
}

/// A record placed `eps` inside a rule's guard.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchWitness<T = f64> {
    pub record: KpiRecord<T>,
    /// True when the record's first match under the whole rule set is this
    /// rule; false when earlier rules shadow every such placement.
    pub first_match: bool,
}

const WITNESS_SEARCH_LIMIT: usize = 2_000_000;

/// Searches threshold-adjacent values for a record inside rule `index` that
/// is matched first by that rule. Values `eps` inside the rule's own atoms are
/// tried first; when earlier rules shadow all of those, the search widens to
/// the rule set's whole threshold grid within the guard region.
pub fn branch_witness<T: Scalar>(rs: &RuleSet<T>, index: usize, eps: T, bounds: &Bounds<T>) -> Option<BranchWitness<T>> {
    let rule = rs.rules.get(index)?;
    let region = rule_region(rule, bounds);
    if region_is_empty(&region) {
        return None;
    }
    let referenced = rs.referenced_attributes();
    let grid = threshold_grid(rs, bounds, eps);
    let inside = |iv: &Interval<T>, v: T| {
        let lo_ok = if iv.lo.inclusive { v >= iv.lo.value } else { v > iv.lo.value };
        let hi_ok = if iv.hi.inclusive { v <= iv.hi.value } else { v < iv.hi.value };
        lo_ok && hi_ok
    };
    let own: Vec<Vec<T>> = Attribute::ALL
        .iter()
        .map(|&a| {
            rule.guard
                .iter()
                .filter(|atom| atom.attribute == a)
                .map(|atom| if atom.comparator.is_upper() { atom.threshold - eps } else { atom.threshold + eps })
                .filter(|&v| inside(&region[a.index()], v))
                .collect()
        })
        .collect();
    let free = |a: Attribute| -> Vec<T> {
        if referenced.contains(&a) {
            grid[a.index()].iter().copied().filter(|&v| inside(&region[a.index()], v)).collect()
        } else {
            vec![region[a.index()].sample()]
        }
    };
    let strict: Vec<Vec<T>> = Attribute::ALL
        .iter()
        .map(|&a| if own[a.index()].is_empty() { free(a) } else { own[a.index()].clone() })
        .collect();
    let relaxed: Vec<Vec<T>> = Attribute::ALL
        .iter()
        .map(|&a| {
            let mut c = own[a.index()].clone();
            c.extend(free(a).into_iter().filter(|v| !own[a.index()].contains(v)));
            if c.is_empty() {
                c.push(region[a.index()].sample());
            }
            c
        })
        .collect();

    let id = format!("witness-{}", rule.rule_id);
    if !live_regions(rs, bounds, index).is_empty() {
        for candidates in [&strict, &relaxed] {
            if let Some(record) = search_first_match(rs, index, candidates, &id) {
                return Some(BranchWitness { record, first_match: true });
            }
        }
    }
    let values = std::array::from_fn(|d| strict[d].first().copied().unwrap_or_else(|| region[d].sample()));
    Some(BranchWitness {
        record: KpiRecord::from_values(id, values),
        first_match: false,
    })
}

fn search_first_match<T: Scalar>(rs: &RuleSet<T>, index: usize, candidates: &[Vec<T>], id: &str) -> Option<KpiRecord<T>> {
    if candidates.iter().any(Vec::is_empty) {
        return None;
    }
    let total = candidates
        .iter()
        .try_fold(1usize, |acc, c| acc.checked_mul(c.len()))
        .filter(|&t| t <= WITNESS_SEARCH_LIMIT)?;
    let mut odometer = [0usize; NUM_ATTRIBUTES];
    for _ in 0..total {
        let values = std::array::from_fn(|d| candidates[d][odometer[d]]);
        let record = KpiRecord::from_values(id, values);
        if rs.first_match(&record).ok().flatten() == Some(index) {
            return Some(record);
        }
        for d in (0..NUM_ATTRIBUTES).rev() {
            odometer[d] += 1;
            if odometer[d] < candidates[d].len() {
                break;
            }
            odometer[d] = 0;
        }
    }
    None
}

/// Per attribute: every threshold +/- `eps`, the range ends and the
/// midpoints between consecutive points, restricted to the bounds.
pub fn threshold_grid<T: Scalar>(rs: &RuleSet<T>, bounds: &Bounds<T>, eps: T) -> [Vec<T>; NUM_ATTRIBUTES] {
    std::array::from_fn(|d| {
        let a = Attribute::ALL[d];
        let (lo, hi) = bounds.ranges[d];
        let mut points = vec![lo, hi];
        for rule in &rs.rules {
            for atom in rule.guard.iter().filter(|atom| atom.attribute == a) {
                points.push(atom.threshold - eps);
                points.push(atom.threshold + eps);
            }
        }
        points.retain(|&v| v >= lo && v <= hi);
        points.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        points.dedup();
        let mids: Vec<T> = points.windows(2).map(|w| (w[0] + w[1]) / T::lit(2.0)).collect();
        points.extend(mids);
        points.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        points.dedup();
        points
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use DiagnosisClass::*;

    fn rec(hsr: f64, tcdr: f64, hf: f64, rab: f64, sdlc: f64) -> KpiRecord {
        let mut r = KpiRecord::from_values("t", [0.0; NUM_ATTRIBUTES]);
        r.handover_success_rate = hsr;
        r.tch_call_drop_rate = tcdr;
        r.handover_failures_rate = hf;
        r.rab = rab;
        r.tch_drop_sudden_lost_con = sdlc;
        r
    }

    #[test]
    fn published_examples() {
        let rs = default_ruleset::<f64>();
        assert_eq!(classify(&rec(70.0, 7.0, 20.0, 0.0, 0.0), &rs).unwrap(), ClassA);
        assert_eq!(classify(&rec(70.0, 7.0, 25.0, 4.0, 0.0), &rs).unwrap(), ClassB);
        assert_eq!(classify(&rec(60.0, 2.0, 0.0, 0.0, 0.0), &rs).unwrap(), ClassA);
        assert_eq!(classify(&rec(80.0, 2.0, 0.0, 0.0, 0.0), &rs).unwrap(), Optimised);
        assert_eq!(classify(&rec(80.0, 1.0, 0.0, 0.0, 0.0), &rs).unwrap(), ClassC);
        assert_eq!(classify(&rec(50.0, 9.0, 3.0, 0.0, 0.0), &rs).unwrap(), ClassA);
        assert_eq!(classify(&rec(20.0, 9.0, 3.0, 0.0, 0.0), &rs).unwrap(), ClassC);
    }

    #[test]
    fn default_shape() {
        let rs = default_ruleset::<f64>();
        assert_eq!(rs.len(), 13);
        let first = &rs.rules()[0];
        assert_eq!(first.outcome, ClassA);
        assert_eq!(
            first.guard,
            vec![
                RuleAtom::new(Attribute::HandoverSuccessRate, Comparator::Le, 71.23),
                RuleAtom::new(Attribute::TchCallDropRate, Comparator::Le, 7.42),
                RuleAtom::new(Attribute::HandoverFailuresRate, Comparator::Lt, 22.17),
            ]
        );
        let r7 = rs.rules().iter().find(|r| r.rule_id == "R7a").unwrap();
        assert_eq!(r7.outcome, ClassB);
        assert_eq!(r7.guard[1], RuleAtom::new(Attribute::TchDropSuddenLostCon, Comparator::Gt, 26.0));
        let r6 = rs.rules().iter().find(|r| r.rule_id == "R6b").unwrap();
        assert_eq!(r6.outcome, ClassA);
        assert_eq!(r6.guard[1], RuleAtom::new(Attribute::TchCallDropRate, Comparator::Gt, 7.65));
    }

    #[test]
    fn non_finite_attribute_is_rule_error() {
        let rs = default_ruleset::<f64>();
        let mut r = rec(70.0, 7.0, 20.0, 0.0, 0.0);
        r.rab = f64::NAN;
        assert!(matches!(classify(&r, &rs), Err(Error::Rule { rule_id, attribute }) if rule_id == "R2a" && attribute == "rab"));
        // unreferenced attributes are not inspected
        let mut r = rec(70.0, 7.0, 20.0, 0.0, 0.0);
        r.sdcch_drops = f64::NAN;
        assert!(classify(&r, &rs).is_ok());
    }

    #[test]
    fn no_match_is_unclassified() {
        let rs = RuleSet::new(
            vec![DiagnosticRule::new("only", vec![RuleAtom::new(Attribute::Rab, Comparator::Gt, 50.0)], ClassB)],
            "t",
        )
        .unwrap();
        assert_eq!(classify(&rec(0.0, 0.0, 0.0, 10.0, 0.0), &rs).unwrap(), Unclassified);
    }

    #[test]
    fn file_round_trip_and_errors() {
        let rs = default_ruleset::<f64>();
        let text = save_ruleset(&rs);
        assert!(text.contains("RULE R1: IF HSR <= 71.23 AND TCHCDR <= 7.42 AND HF < 22.17 THEN Class A\n"));
        assert_eq!(load_ruleset::<f64>(&text).unwrap(), rs);

        assert!(matches!(load_ruleset::<f64>("RULE x: IF HSR <= abc THEN Class A"), Err(Error::Parse { .. })));
        assert!(matches!(load_ruleset::<f64>("RULE x: IF FOO <= 1 THEN Class A"), Err(Error::Parse { .. })));
        assert!(matches!(load_ruleset::<f64>("RULE x: IF HSR <= 1 THEN Class Q"), Err(Error::Parse { .. })));
        assert!(matches!(load_ruleset::<f64>("# nothing here\n"), Err(Error::Validation(_))));
        assert!(matches!(
            load_ruleset::<f64>("rule a: if hsr ≤ 1 and Handover Success Rate >= 0.5 then optimised\nRULE a: IF HSR > 1 THEN Class A"),
            Err(Error::Validation(_))
        ));
        let rs = load_ruleset::<f64>("rule a: if hsr ≤ 1 and Handover Success Rate >= 0.5 then optimised").unwrap();
        assert_eq!(rs.rules()[0].guard.len(), 2);
        assert_eq!(rs.rules()[0].guard[1].comparator, Comparator::Ge);
    }

    #[test]
    fn reachability_default() {
        let rs = default_ruleset::<f64>();
        let report = analyze_reachability(&rs, &Bounds::broad());
        let unreachable: Vec<&str> = report.iter().filter(|r| !r.reachable).map(|r| r.rule_id.as_str()).collect();
        assert_eq!(unreachable, ["R6a", "R6b", "R7a", "R7b", "R8"]);
        for (i, r) in report.iter().enumerate().filter(|(_, r)| r.reachable) {
            let w = r.witness.as_ref().unwrap();
            assert_eq!(rs.first_match(w).unwrap(), Some(i), "{}", r.rule_id);
        }
    }

    #[test]
    fn reachability_trivial_sets() {
        let rule = DiagnosticRule::new("x", vec![RuleAtom::new(Attribute::Rab, Comparator::Le, 3.0)], ClassA);
        let single = RuleSet::new(vec![rule.clone()], "t").unwrap();
        let rep = analyze_reachability(&single, &Bounds::broad());
        assert!(rep[0].reachable);
        assert!(rep[0].witness.as_ref().unwrap().rab <= 3.0);

        let mut copy = rule.clone();
        copy.rule_id = "y".into();
        let dup = RuleSet::new(vec![rule, copy], "t").unwrap();
        let rep = analyze_reachability(&dup, &Bounds::broad());
        assert!(rep[0].reachable);
        assert!(!rep[1].reachable);
        assert!(rep[1].witness.is_none());
    }

    #[test]
    fn boundary_point_is_exact() {
        // x <= 3 then x >= 3: only the point 3 is claimed first by the first rule,
        // so the second rule stays reachable above 3.
        let rs = RuleSet::new(
            vec![
                DiagnosticRule::new("a", vec![RuleAtom::new(Attribute::Rab, Comparator::Lt, 3.0)], ClassA),
                DiagnosticRule::new("b", vec![RuleAtom::new(Attribute::Rab, Comparator::Le, 3.0)], ClassB),
            ],
            "t",
        )
        .unwrap();
        let rep = analyze_reachability(&rs, &Bounds::broad());
        assert!(rep[1].reachable);
        assert_eq!(rep[1].witness.as_ref().unwrap().rab, 3.0);
    }

    #[test]
    fn witnesses_sit_inside() {
        let rs = default_ruleset::<f64>();
        let bounds = Bounds::broad();
        for (i, rule) in rs.rules().iter().enumerate() {
            let w = branch_witness(&rs, i, 0.01, &bounds).unwrap();
            assert!(rule.matches(&w.record), "{}", rule.rule_id);
            assert_eq!(w.first_match, i < 8, "{}", rule.rule_id);
        }
    }

    #[test]
    fn family() {
        assert_eq!(rule_family("R6b"), "R6");
        assert_eq!(rule_family("R8"), "R8");
    }
}
