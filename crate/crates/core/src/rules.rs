//! Ordinal decision rules over granulated tables: greedy sequential
//! covering, scoring, weighted-vote classification and the plain-text rule
//! format
//!
//! ```text
//! Rule 4. (phisz<=5.035400) & (tb<=42844.000000) => (mvv at most 1);
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{data, usage, Error, Result};
use crate::som::Discretizer;
use crate::table::{GranularTable, InformationSystem, Role, Scale};

/// Raw-unit shape of a condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutForm {
    AtMost { cut: f64 },
    AtLeast { cut: f64 },
    Between { lo: f64, hi: f64 },
}

impl CutForm {
    /// Closed raw interval; `None` marks an unbounded side.
    pub fn interval(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            CutForm::AtMost { cut } => (None, Some(cut)),
            CutForm::AtLeast { cut } => (Some(cut), None),
            CutForm::Between { lo, hi } => (Some(lo), Some(hi)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub attribute: String,
    pub form: CutForm,
    /// Granule label range `lo..=hi`; absent for rules read back from text.
    #[serde(default)]
    pub labels: Option<(u32, u32)>,
}

impl Condition {
    fn matches_label(&self, label: Option<u32>) -> bool {
        match (self.labels, label) {
            (Some((lo, hi)), Some(l)) => lo <= l && l <= hi,
            _ => false,
        }
    }
}

/// Decision part of a rule, over labels where 1 is the highest granule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "label", rename_all = "snake_case")]
pub enum Target {
    /// Labels `1..=g`.
    AtMost(u32),
    /// Labels `g..=G`.
    AtLeast(u32),
    Exactly(u32),
}

impl Target {
    pub fn contains(&self, label: u32) -> bool {
        match *self {
            Target::AtMost(g) => label <= g,
            Target::AtLeast(g) => label >= g,
            Target::Exactly(g) => label == g,
        }
    }

    /// The label a matching rule votes for.
    pub fn label(&self) -> u32 {
        match *self {
            Target::AtMost(g) | Target::AtLeast(g) | Target::Exactly(g) => g,
        }
    }

    fn union_size(&self, granules: u32) -> u32 {
        match *self {
            Target::AtMost(g) => g,
            Target::AtLeast(g) => granules.saturating_sub(g) + 1,
            Target::Exactly(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub attribute: String,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub decision: Decision,
    /// Training objects matching the conditions and the decision; zero for
    /// rules parsed from text.
    pub support: usize,
    /// `support` over the number of objects satisfying the decision.
    pub strength: f64,
}

impl Rule {
    pub fn length(&self) -> usize {
        self.conditions.len()
    }

    fn matches(&self, table: &GranularTable, row: usize, cols: &[usize]) -> bool {
        self.conditions.iter().zip(cols).all(|(c, &col)| c.matches_label(table.label(row, col)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Semantics {
    /// One target per decision class.
    Exact,
    /// Downward unions `at most g` (g < G) then upward unions `at least g`
    /// (g > 1), the latter so the lowest class can be covered.
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleConstraints {
    pub min_strength: f64,
    pub max_length: usize,
    pub max_rules: usize,
}

impl Default for RuleConstraints {
    fn default() -> Self {
        RuleConstraints { min_strength: 0.6, max_length: 2, max_rules: 5 }
    }
}

impl RuleConstraints {
    pub fn unlimited() -> Self {
        RuleConstraints { min_strength: 0.0, max_length: usize::MAX, max_rules: usize::MAX }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_strength) {
            return usage(format!("minimum strength {} outside [0, 1]", self.min_strength));
        }
        if self.max_length == 0 || self.max_rules == 0 {
            return usage("rule length and rule count limits must be positive");
        }
        Ok(())
    }

    pub fn admits(&self, rule: &Rule) -> bool {
        rule.length() <= self.max_length && rule.strength >= self.min_strength
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    /// In induction order.
    pub rules: Vec<Rule>,
    pub constraints: RuleConstraints,
    pub semantics: Semantics,
    pub decision: String,
    /// Granule count of the decision attribute.
    pub granules: u32,
    /// Training object ids not covered by any rule whose decision they meet.
    pub uncovered: Vec<usize>,
}

impl RuleSet {
    pub fn total_length(&self) -> usize {
        self.rules.iter().map(Rule::length).sum()
    }

    pub fn render(&self) -> String {
        render_rules(&self.rules)
    }
}

/// Stand-in for tables built from bare labels: label `g` of `G` sits at rank
/// value `G - g + 1`, so larger values still mean higher granules.
fn rank_discretizer(attribute: &str, granules: u32) -> Discretizer {
    let g = granules as f64;
    Discretizer {
        attribute: attribute.to_string(),
        scale: Scale::Linear,
        centers: (0..granules).map(|i| g - i as f64).collect(),
        cuts: (1..granules).map(|i| g - i as f64 + 0.5).collect(),
    }
}

fn condition_for(attribute: &str, disc: &Discretizer, lo: u32, hi: u32) -> Condition {
    let form = match disc.label_bounds(lo, hi) {
        (None, Some(cut)) => CutForm::AtMost { cut },
        (Some(cut), None) => CutForm::AtLeast { cut },
        (Some(lo), Some(hi)) => CutForm::Between { lo, hi },
        (None, None) => unreachable!("full label range is never a candidate"),
    };
    Condition { attribute: attribute.to_string(), form, labels: Some((lo, hi)) }
}

/// Object set over training rows, 64 rows per word.
#[derive(Clone, PartialEq)]
struct Bits(Vec<u64>);

impl Bits {
    fn from_fn(n: usize, f: impl Fn(usize) -> bool) -> Self {
        let mut words = vec![0u64; n.div_ceil(64)];
        for r in (0..n).filter(|&r| f(r)) {
            words[r / 64] |= 1 << (r % 64);
        }
        Bits(words)
    }

    fn full(n: usize) -> Self {
        Self::from_fn(n, |_| true)
    }

    fn has(&self, r: usize) -> bool {
        self.0[r / 64] >> (r % 64) & 1 == 1
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    /// `|self & a & b|` without materializing the intersection.
    fn count3(&self, a: &Bits, b: &Bits) -> usize {
        self.0.iter().zip(&a.0).zip(&b.0).map(|((x, y), z)| (x & y & z).count_ones() as usize).sum()
    }

    fn count2(&self, a: &Bits) -> usize {
        self.0.iter().zip(&a.0).map(|(x, y)| (x & y).count_ones() as usize).sum()
    }
}

struct Candidate {
    attr_pos: usize,
    lo: u32,
    hi: u32,
    rows: Bits,
}

fn decision_col(table: &GranularTable, d: &str) -> Result<usize> {
    match table.attr_index(d) {
        Some(c) if table.specs()[c].role == Role::Decision => Ok(c),
        Some(_) => usage(format!("`{d}` is not a decision attribute")),
        None => usage(format!("unknown decision attribute `{d}`")),
    }
}

/// Greedy sequential covering of the training objects.
///
/// Rules are grown toward the uncovered positives of the target's lower
/// approximation. Each step adds or narrows one label interval, choosing the
/// interval that keeps the most of those positives, then matches the fewest
/// negatives, then comes first in attribute and interval order; a step must
/// exclude at least one negative. Redundant conditions are dropped once the
/// rule is consistent. A rule is kept only when it matches no negative and
/// meets the strength floor; a target is abandoned at its first rejected
/// rule.
pub fn induce_cover(train: &GranularTable, d: &str, constraints: &RuleConstraints, semantics: Semantics) -> Result<RuleSet> {
    constraints.validate()?;
    let dcol = decision_col(train, d)?;
    let granules = train.granules(dcol);
    let n = train.len();
    let labels: Vec<Option<u32>> = (0..n).map(|r| train.label(r, dcol)).collect();

    let targets: Vec<Target> = match semantics {
        Semantics::Exact => (1..=granules).filter(|g| labels.contains(&Some(*g))).map(Target::Exactly).collect(),
        Semantics::Cumulative if granules == 1 => vec![Target::AtMost(1)],
        Semantics::Cumulative => (1..granules).map(Target::AtMost).chain((2..=granules).rev().map(Target::AtLeast)).collect(),
    };

    let cond_cols = train.condition_indices();
    let mut candidates = Vec::new();
    for (attr_pos, &col) in cond_cols.iter().enumerate() {
        let g = train.granules(col);
        for lo in 1..=g {
            for hi in lo..=g {
                if lo == 1 && hi == g {
                    continue;
                }
                let rows = Bits::from_fn(n, |r| matches!(train.label(r, col), Some(l) if lo <= l && l <= hi));
                candidates.push(Candidate { attr_pos, lo, hi, rows });
            }
        }
    }
    let discs: Vec<Discretizer> = cond_cols
        .iter()
        .map(|&c| {
            let name = &train.specs()[c].name;
            train.discretizer(c).cloned().unwrap_or_else(|| rank_discretizer(name, train.granules(c)))
        })
        .collect();

    let cells: Vec<Vec<Option<u32>>> = (0..n).map(|r| cond_cols.iter().map(|&c| train.label(r, c)).collect()).collect();
    let mut covered = vec![false; n];
    let mut rules = Vec::new();
    'targets: for target in targets {
        let positive = Bits::from_fn(n, |r| labels[r].is_some_and(|l| target.contains(l)));
        let negative = Bits::from_fn(n, |r| labels[r].is_some_and(|l| !target.contains(l)));
        let class_size = positive.count();
        // the lower approximation: positives no negative shares a cell with
        let certain: Vec<bool> =
            (0..n).map(|r| positive.has(r) && !(0..n).any(|o| negative.has(o) && cells[o] == cells[r])).collect();
        loop {
            if rules.len() >= constraints.max_rules {
                break 'targets;
            }
            let remaining = Bits::from_fn(n, |r| certain[r] && !covered[r]);
            if remaining.count() == 0 {
                break;
            }

            let mut matched = Bits::full(n);
            let mut chosen: Vec<usize> = Vec::new();
            while matched.count2(&negative) > 0 || chosen.is_empty() {
                let current_neg = matched.count2(&negative);
                let mut best: Option<(usize, usize, usize)> = None;
                for (i, cand) in candidates.iter().enumerate() {
                    // an attribute already in the rule may only be narrowed
                    match chosen.iter().find(|&&c| candidates[c].attr_pos == cand.attr_pos) {
                        Some(&c) if !(candidates[c].lo <= cand.lo && cand.hi <= candidates[c].hi) => continue,
                        None if chosen.len() >= constraints.max_length => continue,
                        _ => {}
                    }
                    let gain = matched.count3(&cand.rows, &remaining);
                    if gain == 0 {
                        continue;
                    }
                    let neg = matched.count3(&cand.rows, &negative);
                    if current_neg > 0 && neg >= current_neg {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((_, bg, bn)) => gain > bg || (gain == bg && neg < bn),
                    };
                    if better {
                        best = Some((i, gain, neg));
                    }
                }
                let Some((i, _, _)) = best else { break };
                matched = matched.and(&candidates[i].rows);
                chosen.retain(|&c| candidates[c].attr_pos != candidates[i].attr_pos);
                chosen.push(i);
            }

            // drop conditions the rule stays consistent without
            if matched.count2(&negative) == 0 {
                let mut i = 0;
                while chosen.len() > 1 && i < chosen.len() {
                    let without = chosen
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .fold(Bits::full(n), |acc, (_, &c)| acc.and(&candidates[c].rows));
                    if without.count2(&negative) == 0 {
                        chosen.remove(i);
                        matched = without;
                    } else {
                        i += 1;
                    }
                }
            }

            let support = matched.count2(&positive);
            let strength = support as f64 / class_size as f64;
            let acceptable = !chosen.is_empty()
                && matched.count2(&negative) == 0
                && matched.count2(&remaining) > 0
                && strength >= constraints.min_strength;
            if !acceptable {
                break;
            }
            chosen.sort_by_key(|&c| candidates[c].attr_pos);
            let conditions = chosen
                .iter()
                .map(|&c| {
                    let cand = &candidates[c];
                    let col = cond_cols[cand.attr_pos];
                    condition_for(&train.specs()[col].name, &discs[cand.attr_pos], cand.lo, cand.hi)
                })
                .collect();
            for (r, cov) in covered.iter_mut().enumerate() {
                *cov |= matched.has(r) && positive.has(r);
            }
            rules.push(Rule { conditions, decision: Decision { attribute: d.to_string(), target }, support, strength });
        }
    }

    let uncovered = (0..n).filter(|&r| labels[r].is_some() && !covered[r]).map(|r| train.ids()[r]).collect();
    Ok(RuleSet { rules, constraints: *constraints, semantics, decision: d.to_string(), granules, uncovered })
}

fn rule_columns(rule: &Rule, table: &GranularTable) -> Result<Vec<usize>> {
    rule.conditions
        .iter()
        .map(|c| table.attr_index(&c.attribute).ok_or_else(|| Error::Usage(format!("unknown attribute `{}`", c.attribute))))
        .collect()
}

/// Support and strength of `rule` on `table`.
pub fn score(rule: &Rule, table: &GranularTable) -> Result<(usize, f64)> {
    let cols = rule_columns(rule, table)?;
    let dcol = decision_col(table, &rule.decision.attribute)?;
    let mut class = 0;
    let mut support = 0;
    for r in 0..table.len() {
        let Some(l) = table.label(r, dcol) else { continue };
        if rule.decision.target.contains(l) {
            class += 1;
            if rule.matches(table, r, &cols) {
                support += 1;
            }
        }
    }
    if class == 0 {
        return data(format!("no object satisfies the decision of the rule on `{}`", rule.decision.attribute));
    }
    Ok((support, support as f64 / class as f64))
}

pub fn strength(rule: &Rule, table: &GranularTable) -> Result<f64> {
    score(rule, table).map(|(_, s)| s)
}

/// Weighted vote of the matching rules; `None` on abstention.
///
/// A rule's strength counts for every label its decision admits. The highest
/// total wins; ties go to the label backed by the smallest union, then to
/// the label more rules name as their boundary class, and otherwise abstain.
pub fn classify(rs: &RuleSet, table: &GranularTable, row: usize) -> Result<Option<u32>> {
    struct Vote {
        total: f64,
        smallest: u32,
        boundary: f64,
    }
    let mut votes: Vec<Vote> = (0..rs.granules).map(|_| Vote { total: 0.0, smallest: u32::MAX, boundary: 0.0 }).collect();
    for rule in &rs.rules {
        let cols = rule_columns(rule, table)?;
        if !rule.matches(table, row, &cols) {
            continue;
        }
        let target = rule.decision.target;
        let size = target.union_size(rs.granules);
        for (i, v) in votes.iter_mut().enumerate() {
            let label = i as u32 + 1;
            if target.contains(label) {
                v.total += rule.strength;
                v.smallest = v.smallest.min(size);
                if target.label() == label {
                    v.boundary += rule.strength;
                }
            }
        }
    }
    let mut ranked: Vec<(u32, &Vote)> = votes.iter().enumerate().filter(|(_, v)| v.smallest != u32::MAX).map(|(i, v)| (i as u32 + 1, v)).collect();
    let order = |a: &Vote, b: &Vote| {
        b.total.total_cmp(&a.total).then(a.smallest.cmp(&b.smallest)).then(b.boundary.total_cmp(&a.boundary))
    };
    ranked.sort_by(|a, b| order(a.1, b.1));
    Ok(match ranked.as_slice() {
        [] => None,
        [(l, _)] => Some(*l),
        [(_, a), (_, b), ..] if order(a, b).is_eq() => None,
        [(l, _), ..] => Some(*l),
    })
}

/// Fraction of `test` objects classified correctly; abstentions and missing
/// decisions count as errors. An empty test set scores 1.
pub fn accuracy(rs: &RuleSet, test: &GranularTable) -> Result<f64> {
    if test.is_empty() {
        log::debug!("empty test set, accuracy defined as 1");
        return Ok(1.0);
    }
    let dcol = decision_col(test, &rs.decision)?;
    let mut correct = 0;
    for r in 0..test.len() {
        if let (Some(pred), Some(actual)) = (classify(rs, test, r)?, test.label(r, dcol)) {
            if pred == actual {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

fn render_condition(out: &mut String, c: &Condition) {
    let a = &c.attribute;
    let _ = match c.form {
        CutForm::AtMost { cut } => write!(out, "({a}<={cut:.6})"),
        CutForm::AtLeast { cut } => write!(out, "({a}>={cut:.6})"),
        CutForm::Between { lo, hi } => write!(out, "({a}>={lo:.6}) & ({a}<={hi:.6})"),
    };
}

pub fn render_rule(rule: &Rule, index: usize) -> String {
    let mut out = format!("Rule {index}. ");
    for (i, c) in rule.conditions.iter().enumerate() {
        if i > 0 {
            out.push_str(" & ");
        }
        render_condition(&mut out, c);
    }
    let d = &rule.decision;
    let _ = match d.target {
        Target::AtMost(g) => write!(out, " => ({} at most {g});", d.attribute),
        Target::AtLeast(g) => write!(out, " => ({} at least {g});", d.attribute),
        Target::Exactly(g) => write!(out, " => ({} is {g});", d.attribute),
    };
    out
}

/// One rule per line, numbered from 1, LF-terminated.
pub fn render_rules(rules: &[Rule]) -> String {
    rules.iter().enumerate().map(|(i, r)| render_rule(r, i + 1) + "\n").collect()
}

fn parse_number(s: &str, line: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Data(format!("bad number `{s}` in `{line}`")))
}

/// Parses one line of the rule format, returning its index and the rule.
pub fn parse_rule(line: &str) -> Result<(usize, Rule)> {
    let bad = || Error::Data(format!("malformed rule `{line}`"));
    let rest = line.trim_end().strip_prefix("Rule ").ok_or_else(bad)?;
    let (index, rest) = rest.split_once(". ").ok_or_else(bad)?;
    let index = index.parse::<usize>().map_err(|_| bad())?;
    let (lhs, rhs) = rest.split_once(" => ").ok_or_else(bad)?;

    let mut conditions: Vec<Condition> = Vec::new();
    for part in lhs.split(" & ") {
        let inner = part.strip_prefix('(').and_then(|p| p.strip_suffix(')')).ok_or_else(bad)?;
        let (attribute, form) = if let Some((a, v)) = inner.split_once("<=") {
            (a, CutForm::AtMost { cut: parse_number(v, line)? })
        } else if let Some((a, v)) = inner.split_once(">=") {
            (a, CutForm::AtLeast { cut: parse_number(v, line)? })
        } else {
            return Err(bad());
        };
        if let Some(prev) = conditions.last_mut() {
            if prev.attribute == attribute {
                if let (CutForm::AtLeast { cut: lo }, CutForm::AtMost { cut: hi }) = (prev.form, form) {
                    prev.form = CutForm::Between { lo, hi };
                    continue;
                }
            }
        }
        conditions.push(Condition { attribute: attribute.to_string(), form, labels: None });
    }

    let inner = rhs.strip_prefix('(').and_then(|p| p.strip_suffix(");")).ok_or_else(bad)?;
    let (attribute, target) = if let Some((a, g)) = inner.split_once(" at most ") {
        (a, Target::AtMost(g.parse().map_err(|_| bad())?))
    } else if let Some((a, g)) = inner.split_once(" at least ") {
        (a, Target::AtLeast(g.parse().map_err(|_| bad())?))
    } else if let Some((a, g)) = inner.split_once(" is ") {
        (a, Target::Exactly(g.parse().map_err(|_| bad())?))
    } else {
        return Err(bad());
    };
    let rule = Rule {
        conditions,
        decision: Decision { attribute: attribute.to_string(), target },
        support: 0,
        strength: 0.0,
    };
    Ok((index, rule))
}

/// Parses a rule file, skipping blank lines.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| parse_rule(l).map(|(_, r)| r)).collect()
}
