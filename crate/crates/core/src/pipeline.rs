//! Close-open iteration: random train/test draws ("closed world") at a rule
//! budget that is relaxed or tightened one rule at a time ("open world")
//! until held-out accuracy reaches the error level. Plus back-analysis of a
//! monitored observation against the resulting rules.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::rough::{self, DiscernMode};
use crate::rules::{self, Rule, RuleConstraints, RuleSet, Semantics};
use crate::som::{self, Discretizer};
use crate::table::{split_random, DecisionTable, GranularTable, InformationSystem, Role};

/// Stamped into every report: the loop below is one reading of the published
/// flowchart, whose branches are not spelled out.
pub const PROCEDURE: &str = "close-open reconstruction: start at budget 1; k re-splits per budget; \
on success try budget-1, after k failures budget+1; discretizers fitted once per run on the full table";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Outer runs.
    pub n: usize,
    /// Re-splits allowed at one budget before it is raised.
    pub k: usize,
    /// Required held-out accuracy.
    pub el: f64,
    pub constraints: RuleConstraints,
    pub semantics: Semantics,
    pub train_fraction: f64,
    pub granules: u32,
    /// Cap on budget changes per run; `None` means `max_rules - 1`.
    pub max_open_steps: Option<usize>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n: 1,
            k: 2,
            el: 0.8,
            constraints: RuleConstraints::default(),
            semantics: Semantics::Cumulative,
            train_fraction: 0.7,
            granules: 3,
            max_open_steps: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn open_steps(&self) -> usize {
        self.max_open_steps.unwrap_or(self.constraints.max_rules.saturating_sub(1))
    }

    /// Upper bound on iterations in one run.
    pub fn iteration_cap(&self) -> usize {
        1 + self.k * self.open_steps()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return usage("n and k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.el) {
            return usage(format!("error level {} outside [0, 1]", self.el));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return usage(format!("train fraction {} outside (0, 1]", self.train_fraction));
        }
        if self.granules < 2 {
            return usage("at least two granules per attribute");
        }
        if self.constraints.max_rules == 0 || self.constraints.max_length == 0 {
            return usage("rule limits must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub run: usize,
    pub split_seed: u64,
    pub budget: usize,
    pub accuracy: f64,
    pub rules: usize,
    pub met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRun {
    pub run: usize,
    /// Position in the report's iteration log.
    pub iteration: usize,
    pub split_seed: u64,
    pub accuracy: f64,
    pub rule_set: RuleSet,
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub discretizers: Vec<Discretizer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAttribute {
    pub attribute: String,
    pub core: bool,
    pub frequency: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub procedure: String,
    pub config: PipelineConfig,
    pub decision: String,
    pub log: Vec<Iteration>,
    pub best: BestRun,
    pub el_met: bool,
    /// Best rules in the plain-text rule format.
    pub rules_text: String,
    pub discretizer_records: Vec<String>,
    /// Decision-relative reduct ranking on the best run's granulated table.
    pub sensitivity: Vec<RankedAttribute>,
}

impl RunReport {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("malformed run report: {e}")))
    }
}

struct Attempt {
    accuracy: f64,
    rule_set: RuleSet,
    train_ids: Vec<usize>,
    test_ids: Vec<usize>,
}

fn attempt(table: &DecisionTable, granular: &GranularTable, d: &str, cfg: &PipelineConfig, budget: usize, split_seed: u64) -> Result<Attempt> {
    let (train, test) = split_random(table, cfg.train_fraction, split_seed)?;
    let train_g = granular.select_ids(train.ids());
    let test_g = granular.select_ids(test.ids());
    let constraints = RuleConstraints { max_rules: budget, ..cfg.constraints };
    let rule_set = rules::induce_cover(&train_g, d, &constraints, cfg.semantics)?;
    let accuracy = rules::accuracy(&rule_set, &test_g)?;
    Ok(Attempt { accuracy, rule_set, train_ids: train.ids().to_vec(), test_ids: test.ids().to_vec() })
}

fn better(a: &Attempt, b: &BestRun) -> bool {
    let key = |acc: f64, rs: &RuleSet| (acc, std::cmp::Reverse(rs.rules.len()), std::cmp::Reverse(rs.total_length()));
    let (ka, kb) = (key(a.accuracy, &a.rule_set), key(b.accuracy, &b.rule_set));
    ka.0 > kb.0 || (ka.0 == kb.0 && (ka.1, ka.2) > (kb.1, kb.2))
}

pub fn close_open(table: &DecisionTable, d: &str, cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    if table.is_empty() {
        return Err(Error::Data("empty table".into()));
    }
    match table.attr_index(d) {
        Some(c) if table.specs()[c].role == Role::Decision => {}
        _ => return usage(format!("`{d}` is not a decision attribute")),
    }
    let max_budget = cfg.constraints.max_rules;
    let cap = cfg.iteration_cap();

    let mut log = Vec::new();
    let mut best: Option<BestRun> = None;
    let mut best_granular: Option<GranularTable> = None;
    for run in 0..cfg.n {
        let run_seed = cfg.seed.wrapping_add(run as u64);
        let discretizers = som::fit_table(table, cfg.granules, run_seed)?;
        let granular = GranularTable::from_table(table, &discretizers)?;
        let mut splits = ChaCha8Rng::seed_from_u64(run_seed);

        let mut budget = 1usize;
        let mut failures = 0;
        let mut changes = 0;
        // budgets that already failed k times
        let mut exhausted = BTreeSet::new();
        for _ in 0..cap {
            let split_seed: u64 = splits.gen();
            let a = attempt(table, &granular, d, cfg, budget, split_seed)?;
            let met = a.accuracy >= cfg.el;
            log::debug!("run {run} seed {split_seed} budget {budget}: accuracy {:.3}, {} rules", a.accuracy, a.rule_set.rules.len());
            log.push(Iteration { run, split_seed, budget, accuracy: a.accuracy, rules: a.rule_set.rules.len(), met });
            if best.as_ref().is_none_or(|b| better(&a, b)) {
                best = Some(BestRun {
                    run,
                    iteration: log.len() - 1,
                    split_seed,
                    accuracy: a.accuracy,
                    rule_set: a.rule_set,
                    train_ids: a.train_ids,
                    test_ids: a.test_ids,
                    discretizers: discretizers.clone(),
                });
                best_granular = Some(granular.clone());
            }

            let next = if met {
                if budget == 1 || exhausted.contains(&(budget - 1)) {
                    break;
                }
                budget - 1
            } else {
                failures += 1;
                if failures < cfg.k {
                    continue;
                }
                exhausted.insert(budget);
                if budget == max_budget {
                    break;
                }
                budget + 1
            };
            changes += 1;
            if changes > cfg.open_steps() {
                break;
            }
            budget = next;
            failures = 0;
        }
    }

    let best = best.expect("at least one iteration runs");
    let granular = best_granular.expect("set with best");
    let el_met = log.iter().any(|i| i.met);
    if !el_met {
        log::warn!("error level {} not met; best accuracy {:.3}", cfg.el, best.accuracy);
    }
    Ok(RunReport {
        procedure: PROCEDURE.to_string(),
        config: cfg.clone(),
        decision: d.to_string(),
        rules_text: best.rule_set.render(),
        discretizer_records: best.discretizers.iter().map(Discretizer::to_record).collect(),
        sensitivity: sensitivity(&granular, d)?,
        log,
        best,
        el_met,
    })
}

/// Label of a monitored value. Values beyond the fitted range land in the
/// extreme granules.
pub fn granulate_observation(disc: &Discretizer, measured: f64) -> Result<u32> {
    if !disc.scale.forward(measured).is_finite() {
        return Err(Error::Data(format!("observation {measured} invalid for `{}`", disc.attribute)));
    }
    Ok(disc.assign(measured))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub attribute: String,
    /// `None` is unbounded.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo.is_none_or(|lo| v >= lo) && self.hi.is_none_or(|hi| v <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    /// 1-based position of the source rule.
    pub rule: usize,
    pub intervals: Vec<Interval>,
}

impl Bundle {
    /// True when every interval holds; attributes unknown to `value` fail.
    pub fn satisfied_by(&self, value: impl Fn(&str) -> Option<f64>) -> bool {
        self.intervals.iter().all(|i| value(&i.attribute).is_some_and(|v| i.contains(v)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub attribute: String,
    pub label: u32,
    pub bundles: Vec<Bundle>,
    pub sensitivity: Vec<RankedAttribute>,
    pub no_match: bool,
}

impl ParameterEstimate {
    pub fn satisfied_by(&self, value: impl Fn(&str) -> Option<f64>) -> bool {
        self.bundles.iter().any(|b| b.satisfied_by(&value))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Condition parts of the rules whose decision admits `label` on
/// `attribute`, each as one alternative set of raw-unit intervals.
///
/// Attribute names compare case-insensitively, since published rule listings
/// lowercase them. Attributes in `core` rank first, then by how many selected
/// rules use them.
pub fn back_analyze(rules: &[Rule], attribute: &str, label: u32, core: &BTreeSet<String>) -> Result<ParameterEstimate> {
    if rules.is_empty() {
        return usage("back-analysis needs at least one rule");
    }
    let mut bundles = Vec::new();
    for (i, rule) in rules.iter().enumerate() {
        if !rule.decision.attribute.eq_ignore_ascii_case(attribute) || !rule.decision.target.contains(label) {
            continue;
        }
        let intervals = rule
            .conditions
            .iter()
            .map(|c| {
                let (lo, hi) = c.form.interval();
                Interval { attribute: c.attribute.clone(), lo, hi }
            })
            .collect();
        bundles.push(Bundle { rule: i + 1, intervals });
    }

    let in_core = |a: &str| core.iter().any(|c| c.eq_ignore_ascii_case(a));
    let mut ranked: Vec<RankedAttribute> = Vec::new();
    for iv in bundles.iter().flat_map(|b| &b.intervals) {
        match ranked.iter_mut().find(|r| r.attribute == iv.attribute) {
            Some(r) => r.frequency += 1,
            None => ranked.push(RankedAttribute { attribute: iv.attribute.clone(), core: in_core(&iv.attribute), frequency: 1 }),
        }
    }
    sort_ranking(&mut ranked);
    Ok(ParameterEstimate {
        attribute: attribute.to_string(),
        label,
        no_match: bundles.is_empty(),
        bundles,
        sensitivity: ranked,
    })
}

fn sort_ranking(ranked: &mut [RankedAttribute]) {
    ranked.sort_by(|a, b| b.core.cmp(&a.core).then(b.frequency.cmp(&a.frequency)).then_with(|| a.attribute.cmp(&b.attribute)));
}

/// Attributes appearing in some decision-relative reduct, core first.
pub fn sensitivity<T: InformationSystem + ?Sized>(table: &T, d: &str) -> Result<Vec<RankedAttribute>> {
    let rs = rough::reducts(table, d, DiscernMode::DecisionRelative)?;
    let mut seen = BTreeSet::new();
    let mut ranked: Vec<RankedAttribute> = rs
        .reducts
        .iter()
        .flatten()
        .filter(|a| seen.insert(a.as_str()))
        .map(|a| RankedAttribute { attribute: a.clone(), core: rs.core.contains(a), frequency: rs.frequency(a) })
        .collect();
    sort_ranking(&mut ranked);
    Ok(ranked)
}
