//! Rough-set primitives: indiscernibility partitions, approximations,
//! discernibility matrices and functions, reducts and the core.
//!
//! Object sets hold object ids (not row positions). Attribute sets inside
//! Boolean formulas are bit masks over the table's condition attributes, in
//! column order, so at most 64 condition attributes are supported.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::table::InformationSystem;

pub type ObjectSet = BTreeSet<usize>;

/// Blocks of mutually indiscernible objects, ordered by their first object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    index: BTreeMap<usize, usize>,
}

impl Partition {
    fn from_blocks(blocks: Vec<Vec<usize>>) -> Self {
        let mut index = BTreeMap::new();
        for (b, block) in blocks.iter().enumerate() {
            for &id in block {
                index.insert(id, b);
            }
        }
        Partition { blocks, index }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, id: usize) -> Option<&[usize]> {
        self.index.get(&id).map(|&b| self.blocks[b].as_slice())
    }

    pub fn universe(&self) -> ObjectSet {
        self.index.keys().copied().collect()
    }

    /// True when every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.blocks.iter().all(|block| {
            let target = coarser.index.get(&block[0]);
            block.iter().all(|id| coarser.index.get(id) == target)
        })
    }
}

fn column_indices<T: InformationSystem + ?Sized>(table: &T, attrs: &[&str]) -> Result<Vec<usize>> {
    attrs
        .iter()
        .map(|a| table.attr_index(a).ok_or_else(|| crate::Error::Usage(format!("unknown attribute `{a}`"))))
        .collect()
}

/// Tolerance check: a missing cell matches anything.
fn tolerant<T: InformationSystem + ?Sized>(table: &T, a: usize, b: usize, cols: &[usize]) -> bool {
    cols.iter().all(|&c| match (table.key(a, c), table.key(b, c)) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    })
}

/// Greedy clique formation in row order. Without missing cells this yields
/// exactly the equivalence classes.
fn partition_cols<T: InformationSystem + ?Sized>(table: &T, cols: &[usize]) -> Partition {
    let n = table.len();
    let ids = table.ids();
    let mut assigned = vec![false; n];
    let mut blocks = Vec::new();
    for start in 0..n {
        if assigned[start] {
            continue;
        }
        assigned[start] = true;
        let mut rows = vec![start];
        for cand in start + 1..n {
            if !assigned[cand] && rows.iter().all(|&r| tolerant(table, r, cand, cols)) {
                assigned[cand] = true;
                rows.push(cand);
            }
        }
        blocks.push(rows.into_iter().map(|r| ids[r]).collect());
    }
    Partition::from_blocks(blocks)
}

/// Partition of the universe induced by the attributes `attrs`.
pub fn partition_by<T: InformationSystem + ?Sized>(table: &T, attrs: &[&str]) -> Result<Partition> {
    let cols = column_indices(table, attrs)?;
    Ok(partition_cols(table, &cols))
}

pub fn lower_approx(p: &Partition, x: &ObjectSet) -> ObjectSet {
    p.blocks.iter().filter(|b| b.iter().all(|id| x.contains(id))).flatten().copied().collect()
}

pub fn upper_approx(p: &Partition, x: &ObjectSet) -> ObjectSet {
    p.blocks.iter().filter(|b| b.iter().any(|id| x.contains(id))).flatten().copied().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Approximation {
    pub lower: ObjectSet,
    pub upper: ObjectSet,
    pub boundary: ObjectSet,
}

pub fn approximate(p: &Partition, x: &ObjectSet) -> Approximation {
    let lower = lower_approx(p, x);
    let upper = upper_approx(p, x);
    let boundary = upper.difference(&lower).copied().collect();
    Approximation { lower, upper, boundary }
}

/// Objects whose condition block is pure in the decision.
fn positive_region(cond: &Partition, decision: &Partition) -> ObjectSet {
    decision.blocks.iter().flat_map(|class| lower_approx(cond, &class.iter().copied().collect())).collect()
}

/// Quality of approximation of the decision by `attrs`: the fraction of
/// objects in the positive region. An empty universe scores 1.
pub fn approx_quality<T: InformationSystem + ?Sized>(table: &T, attrs: &[&str], decision: &str) -> Result<f64> {
    let cols = column_indices(table, attrs)?;
    let dcol = column_indices(table, &[decision])?;
    if table.is_empty() {
        return Ok(1.0);
    }
    let pos = positive_region(&partition_cols(table, &cols), &partition_cols(table, &dcol));
    Ok(pos.len() as f64 / table.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscernMode {
    /// Every pair of objects must stay discerned.
    Plain,
    /// Only pairs with different decisions where at least one object lies in
    /// the positive region of the full condition set.
    DecisionRelative,
}

/// Condition attributes that discern each pair of rows (`i > j`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscernibilityMatrix {
    attributes: Vec<String>,
    ids: Vec<usize>,
    /// Row-major lower triangle: entry (i, j), j < i, at i*(i-1)/2 + j.
    entries: Vec<u64>,
}

impl DiscernibilityMatrix {
    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn mask(&self, i: usize, j: usize) -> u64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0,
            std::cmp::Ordering::Less => self.mask(j, i),
            std::cmp::Ordering::Greater => self.entries[i * (i - 1) / 2 + j],
        }
    }

    /// Entry for the rows at positions `i` and `j`, as attribute names.
    pub fn entry(&self, i: usize, j: usize) -> Vec<&str> {
        names_of(&self.attributes, self.mask(i, j))
    }

    /// Entry for two object ids.
    pub fn entry_for_ids(&self, a: usize, b: usize) -> Option<Vec<&str>> {
        let i = self.ids.iter().position(|&x| x == a)?;
        let j = self.ids.iter().position(|&x| x == b)?;
        Some(self.entry(i, j))
    }

    fn nonempty_masks(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().copied().filter(|&m| m != 0)
    }
}

fn names_of(vars: &[String], mask: u64) -> Vec<&str> {
    vars.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, v)| v.as_str()).collect()
}

fn condition_columns<T: InformationSystem + ?Sized>(table: &T, limit: usize) -> Result<Vec<usize>> {
    let cols = table.condition_indices();
    if cols.len() > limit {
        return usage(format!("{} condition attributes exceed the limit of {limit}", cols.len()));
    }
    Ok(cols)
}

fn decision_column<T: InformationSystem + ?Sized>(table: &T, decision: &str) -> Result<usize> {
    match table.attr_index(decision) {
        Some(c) => Ok(c),
        None => usage(format!("unknown decision attribute `{decision}`")),
    }
}

pub fn disc_matrix<T: InformationSystem + ?Sized>(table: &T, decision: &str, mode: DiscernMode) -> Result<DiscernibilityMatrix> {
    let cols = condition_columns(table, 64)?;
    let dcol = decision_column(table, decision)?;
    let n = table.len();
    let relevant: Vec<bool> = match mode {
        DiscernMode::Plain => vec![true; n],
        DiscernMode::DecisionRelative => {
            let pos = positive_region(&partition_cols(table, &cols), &partition_cols(table, &[dcol]));
            table.ids().iter().map(|id| pos.contains(id)).collect()
        }
    };
    let mut entries = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in 0..i {
            let include = match mode {
                DiscernMode::Plain => true,
                DiscernMode::DecisionRelative => {
                    let differ = matches!((table.key(i, dcol), table.key(j, dcol)), (Some(a), Some(b)) if a != b);
                    differ && (relevant[i] || relevant[j])
                }
            };
            let mut mask = 0u64;
            if include {
                for (bit, &c) in cols.iter().enumerate() {
                    if let (Some(a), Some(b)) = (table.key(i, c), table.key(j, c)) {
                        if a != b {
                            mask |= 1 << bit;
                        }
                    }
                }
            }
            entries.push(mask);
        }
    }
    Ok(DiscernibilityMatrix {
        attributes: cols.iter().map(|&c| table.specs()[c].name.clone()).collect(),
        ids: table.ids().to_vec(),
        entries,
    })
}

/// Keeps the minimal sets of a family of bit masks, sorted by size then value.
fn absorb(mut sets: Vec<u64>) -> Vec<u64> {
    sets.sort_unstable_by_key(|&m| (m.count_ones(), m));
    sets.dedup();
    let mut kept: Vec<u64> = Vec::with_capacity(sets.len());
    for m in sets {
        if !kept.iter().any(|&k| (k & m) == k) {
            kept.push(m);
        }
    }
    kept
}

/// Discernibility function: the absorbed CNF of non-empty matrix entries and
/// its prime implicants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoolFormula {
    vars: Vec<String>,
    cnf: Vec<u64>,
    dnf: Vec<u64>,
}

impl BoolFormula {
    /// Builds the formula from clauses over `vars`, each a set of variable
    /// names. Unknown names are a usage error.
    pub fn from_clauses(vars: Vec<String>, clauses: &[Vec<&str>]) -> Result<Self> {
        if vars.len() > 64 {
            return usage("at most 64 variables");
        }
        let mut masks = Vec::with_capacity(clauses.len());
        for clause in clauses {
            let mut m = 0u64;
            for lit in clause {
                match vars.iter().position(|v| v == lit) {
                    Some(i) => m |= 1 << i,
                    None => return usage(format!("unknown variable `{lit}`")),
                }
            }
            if m != 0 {
                masks.push(m);
            }
        }
        Ok(Self::from_masks(vars, masks))
    }

    fn from_masks(vars: Vec<String>, clauses: Vec<u64>) -> Self {
        let cnf = absorb(clauses);
        let dnf = cnf_to_dnf(&cnf);
        BoolFormula { vars, cnf, dnf }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn cnf(&self) -> Vec<Vec<&str>> {
        self.cnf.iter().map(|&m| names_of(&self.vars, m)).collect()
    }

    pub fn dnf(&self) -> Vec<Vec<&str>> {
        self.dnf.iter().map(|&m| names_of(&self.vars, m)).collect()
    }

    /// Truth value under an assignment given as a bit mask of true variables.
    pub fn eval_cnf(&self, assignment: u64) -> bool {
        self.cnf.iter().all(|&c| c & assignment != 0)
    }

    pub fn eval_dnf(&self, assignment: u64) -> bool {
        self.dnf.iter().any(|&t| (t & assignment) == t)
    }

    /// Variables occurring as singleton clauses of the absorbed CNF.
    pub fn singleton_clauses(&self) -> BTreeSet<String> {
        self.cnf.iter().filter(|m| m.count_ones() == 1).flat_map(|&m| names_of(&self.vars, m)).map(String::from).collect()
    }
}

/// Distribution with absorption, shortest clauses first. For a monotone CNF
/// the surviving terms are exactly its prime implicants.
fn cnf_to_dnf(cnf: &[u64]) -> Vec<u64> {
    let mut terms = vec![0u64];
    for &clause in cnf {
        let mut next = Vec::with_capacity(terms.len() * 2);
        for &t in &terms {
            if t & clause != 0 {
                next.push(t);
            } else {
                let mut rest = clause;
                while rest != 0 {
                    let bit = rest & rest.wrapping_neg();
                    next.push(t | bit);
                    rest &= rest - 1;
                }
            }
        }
        terms = absorb(next);
    }
    terms
}

pub fn disc_function(m: &DiscernibilityMatrix) -> BoolFormula {
    BoolFormula::from_masks(m.attributes.clone(), m.nonempty_masks().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductSet {
    /// Sorted by size, then by name list.
    pub reducts: Vec<BTreeSet<String>>,
    pub core: BTreeSet<String>,
}

impl ReductSet {
    fn from_masks(vars: &[String], masks: &[u64]) -> Self {
        let mut reducts: Vec<BTreeSet<String>> =
            masks.iter().map(|&m| names_of(vars, m).into_iter().map(String::from).collect()).collect();
        reducts.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        let core = match reducts.split_first() {
            Some((first, rest)) => first.iter().filter(|a| rest.iter().all(|r| r.contains(*a))).cloned().collect(),
            None => BTreeSet::new(),
        };
        ReductSet { reducts, core }
    }

    /// Number of reducts containing `attr`.
    pub fn frequency(&self, attr: &str) -> usize {
        self.reducts.iter().filter(|r| r.contains(attr)).count()
    }

    /// One reduct per line, then `CORE: ...`.
    pub fn report(&self) -> String {
        let join = |s: &BTreeSet<String>| {
            if s.is_empty() {
                "{}".to_string()
            } else {
                s.iter().map(String::as_str).collect::<Vec<_>>().join(", ")
            }
        };
        let mut out = String::new();
        for r in &self.reducts {
            let _ = writeln!(out, "{}", join(r));
        }
        let _ = writeln!(out, "CORE: {}", join(&self.core));
        out
    }
}

/// Reducts as the prime implicants of the discernibility function.
pub fn reducts<T: InformationSystem + ?Sized>(table: &T, decision: &str, mode: DiscernMode) -> Result<ReductSet> {
    let f = disc_function(&disc_matrix(table, decision, mode)?);
    Ok(ReductSet::from_masks(&f.vars, &f.dnf))
}

const EXHAUSTIVE_LIMIT: usize = 16;

/// Brute-force reducts: the minimal condition subsets preserving the full
/// condition partition (plain) or the positive region of the decision
/// (decision-relative).
pub fn reducts_exhaustive<T: InformationSystem + ?Sized>(table: &T, decision: &str, mode: DiscernMode) -> Result<ReductSet> {
    let cols = condition_columns(table, EXHAUSTIVE_LIMIT)?;
    let dcol = decision_column(table, decision)?;
    let full = partition_cols(table, &cols);
    let dpart = partition_cols(table, &[dcol]);
    let full_pos = positive_region(&full, &dpart).len();

    let subset_cols = |mask: u64| -> Vec<usize> {
        cols.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &c)| c).collect()
    };
    let preserves = |mask: u64| -> bool {
        let p = partition_cols(table, &subset_cols(mask));
        match mode {
            DiscernMode::Plain => p.blocks.len() == full.blocks.len() && p.refines(&full),
            DiscernMode::DecisionRelative => positive_region(&p, &dpart).len() == full_pos,
        }
    };

    let mut masks: Vec<u64> = (0..1u64 << cols.len()).collect();
    masks.sort_unstable_by_key(|&m| (m.count_ones(), m));
    let mut found: Vec<u64> = Vec::new();
    for m in masks {
        if found.iter().any(|&f| (f & m) == f) {
            continue;
        }
        if preserves(m) {
            found.push(m);
        }
    }
    let vars: Vec<String> = cols.iter().map(|&c| table.specs()[c].name.clone()).collect();
    Ok(ReductSet::from_masks(&vars, &found))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{self, TABLE1_CONDITIONS};
    use crate::table::{AttributeSpec, GranularTable};

    fn set(ids: &[usize]) -> ObjectSet {
        ids.iter().copied().collect()
    }

    /// o1=(a:0,b:0|d:0), o2=(a:1,b:0|d:1), o3=(a:1,b:1|d:1), labels shifted by one.
    fn toy() -> GranularTable {
        let specs = vec![AttributeSpec::condition("a"), AttributeSpec::condition("b"), AttributeSpec::decision("d")];
        let rows = vec![
            vec![Some(1), Some(1), Some(1)],
            vec![Some(2), Some(1), Some(2)],
            vec![Some(2), Some(2), Some(2)],
        ];
        GranularTable::from_labels(specs, rows).unwrap()
    }

    fn table1_first_six() -> Partition {
        partition_by(&corpus::table1(), &TABLE1_CONDITIONS[..6]).unwrap()
    }

    #[test]
    fn table1_blocks() {
        let p = table1_first_six();
        // zero-based ids of rows {1,9} and {6,7}
        let mut multi: Vec<Vec<usize>> = p.blocks().iter().filter(|b| b.len() > 1).cloned().collect();
        multi.sort();
        assert_eq!(multi, vec![vec![0, 8], vec![5, 6]]);
        assert_eq!(p.blocks().len(), 10);
    }

    #[test]
    fn empty_and_full_attribute_sets() {
        let t = corpus::table1();
        let p = partition_by(&t, &[]).unwrap();
        assert_eq!(p.blocks(), &[(0..12).collect::<Vec<_>>()]);
        let all: Vec<&str> = t.specs().iter().map(|s| s.name.as_str()).collect();
        assert_eq!(partition_by(&t, &all).unwrap().blocks().len(), 12);
        assert!(partition_by(&t, &["nope"]).is_err());
    }

    #[test]
    fn table1_approximations() {
        let p = table1_first_six();
        let x = set(&[0, 5, 6, 8]);
        assert_eq!(lower_approx(&p, &x), x);
        assert_eq!(upper_approx(&p, &x), x);
        let x = set(&[0, 5]);
        assert!(lower_approx(&p, &x).is_empty());
        assert_eq!(upper_approx(&p, &x), set(&[0, 5, 6, 8]));
        let u = p.universe();
        assert_eq!(approximate(&p, &u), Approximation { lower: u.clone(), upper: u.clone(), boundary: set(&[]) });
    }

    #[test]
    fn quality_examples() {
        let t = toy();
        assert_eq!(approx_quality(&t, &["a"], "d").unwrap(), 1.0);
        assert_eq!(approx_quality(&t, &[], "d").unwrap(), 0.0);
    }

    #[test]
    fn missing_values_use_tolerance() {
        let specs = vec![AttributeSpec::condition("a"), AttributeSpec::condition("b"), AttributeSpec::decision("d")];
        let rows = vec![
            vec![Some(1), None, Some(1)],
            vec![Some(1), Some(2), Some(1)],
            vec![Some(1), Some(1), Some(2)],
        ];
        let t = GranularTable::from_labels(specs, rows).unwrap();
        let p = partition_by(&t, &["a", "b"]).unwrap();
        // object 0 tolerates both 1 and 2; greedy in id order attaches 1 first.
        assert_eq!(p.blocks(), &[vec![0, 1], vec![2]]);
    }

    #[test]
    fn toy_matrix_and_function() {
        let t = toy();
        let m = disc_matrix(&t, "d", DiscernMode::DecisionRelative).unwrap();
        assert_eq!(m.entry(1, 0), vec!["a"]);
        assert_eq!(m.entry(2, 0), vec!["a", "b"]);
        assert!(m.entry(2, 1).is_empty());
        assert!(m.entry(1, 1).is_empty());
        let f = disc_function(&m);
        assert_eq!(f.cnf(), vec![vec!["a"]]);
        assert_eq!(f.dnf(), vec![vec!["a"]]);
        let r = reducts(&t, "d", DiscernMode::DecisionRelative).unwrap();
        assert_eq!(r.reducts, vec![set_names(&["a"])]);
        assert_eq!(r.core, set_names(&["a"]));
        assert_eq!(reducts_exhaustive(&t, "d", DiscernMode::DecisionRelative).unwrap(), r);
    }

    fn set_names(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_objects_have_empty_entry() {
        let specs = vec![AttributeSpec::condition("a"), AttributeSpec::decision("d")];
        let t = GranularTable::from_labels(specs, vec![vec![Some(1), Some(1)], vec![Some(1), Some(1)]]).unwrap();
        let m = disc_matrix(&t, "d", DiscernMode::Plain).unwrap();
        assert!(m.entry(1, 0).is_empty());
        let f = disc_function(&m);
        assert!(f.cnf().is_empty());
        assert_eq!(f.dnf(), vec![Vec::<&str>::new()]);
        let r = reducts(&t, "d", DiscernMode::Plain).unwrap();
        assert_eq!(r.reducts, vec![BTreeSet::new()]);
        assert!(r.core.is_empty());
    }

    #[test]
    fn two_clause_dnf_against_truth_table() {
        let vars: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let f = BoolFormula::from_clauses(vars, &[vec!["a", "b"], vec!["b", "c"]]).unwrap();
        assert_eq!(f.dnf(), vec![vec!["b"], vec!["a", "c"]]);
        for assignment in 0..8u64 {
            let truth = (assignment & 0b011 != 0) && (assignment & 0b110 != 0);
            assert_eq!(f.eval_dnf(assignment), truth, "{assignment:03b}");
        }
    }

    #[test]
    fn table1_pair_six_seven() {
        let t = corpus::table1();
        let discs = crate::som::fit_table(&t, 3, 11).unwrap();
        let g = GranularTable::from_table(&t, &discs).unwrap();
        let m = disc_matrix(&g, "MVV", DiscernMode::Plain).unwrap();
        let entry = m.entry_for_ids(5, 6).unwrap();
        assert!(entry.iter().all(|a| ["Tp", "Tb"].contains(a)), "{entry:?}");
    }

    #[test]
    fn duplicated_column_never_in_same_reduct() {
        let specs = vec![
            AttributeSpec::condition("a"),
            AttributeSpec::condition("a2"),
            AttributeSpec::condition("b"),
            AttributeSpec::decision("d"),
        ];
        let rows = vec![
            vec![Some(1), Some(1), Some(1), Some(1)],
            vec![Some(2), Some(2), Some(1), Some(2)],
            vec![Some(2), Some(2), Some(2), Some(1)],
            vec![Some(1), Some(1), Some(2), Some(2)],
        ];
        let t = GranularTable::from_labels(specs, rows).unwrap();
        for mode in [DiscernMode::Plain, DiscernMode::DecisionRelative] {
            let r = reducts_exhaustive(&t, "d", mode).unwrap();
            assert!(r.reducts.iter().all(|s| !(s.contains("a") && s.contains("a2"))));
            assert!(r.reducts.iter().any(|s| s.contains("a")) && r.reducts.iter().any(|s| s.contains("a2")));
            assert_eq!(r, reducts(&t, "d", mode).unwrap());
        }
    }

    #[test]
    fn report_format() {
        let r = ReductSet { reducts: vec![set_names(&["Cb", "Phib"]), set_names(&["Cb", "Csz"])], core: set_names(&["Cb"]) };
        assert_eq!(r.report(), "Cb, Phib\nCb, Csz\nCORE: Cb\n");
    }

    #[test]
    fn exhaustive_guard() {
        let specs: Vec<AttributeSpec> =
            (0..17).map(|i| AttributeSpec::condition(format!("c{i}"))).chain([AttributeSpec::decision("d")]).collect();
        let t = GranularTable::from_labels(specs, vec![vec![Some(1); 18]]).unwrap();
        assert!(matches!(reducts_exhaustive(&t, "d", DiscernMode::Plain), Err(crate::Error::Usage(_))));
    }
}
