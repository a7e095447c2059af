//! `somrst`: granulate slope-model tables, induce rules, run the close-open
//! pipeline and back-analyze monitored observations.
//!
//! Exit codes: 0 success, 1 usage, 2 data, 3 error level not met.

mod settings;

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use somrst::pipeline::{self, PipelineConfig, RunReport};
use somrst::rough::{self, DiscernMode};
use somrst::rules::{self, RuleConstraints, Semantics};
use somrst::som::{self, Discretizer};
use somrst::surrogate::{self, SurrogateRanges};
use somrst::table::{load_table, parse_schema, render_schema, DecisionTable, GranularTable, InformationSystem};
use somrst::{Error, Result};

use settings::Settings;

#[derive(Parser, Debug)]
#[command(name = "somrst", version, about = "SOM granulation and rough-set rules for slope back analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq)]
enum Command {
    /// Fit per-attribute discretizers and write the granulated table
    Discretize,
    /// Induce one rule set on the whole granulated table
    Rules,
    /// Run the close-open iteration
    Pipeline,
    /// Match an observation against a rule set
    Backanalyze,
    /// Generate a table from the planar slope model
    Surrogate,
    /// Reducts and core of the granulated table
    Reducts,
}

/// Every option can also come from the `--config` file under the same name
/// with underscores; flags win.
#[derive(Args, Debug, Default)]
struct Opts {
    #[arg(long, global = true)]
    data: Option<String>,
    #[arg(long, global = true)]
    schema: Option<String>,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Output directory; omitted means stdout
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    decision: Option<String>,

    #[arg(long, global = true)]
    n: Option<String>,
    #[arg(long, global = true)]
    k: Option<String>,
    /// Required held-out accuracy
    #[arg(long, global = true)]
    el: Option<String>,
    #[arg(long, global = true)]
    min_strength: Option<String>,
    #[arg(long, global = true)]
    max_length: Option<String>,
    #[arg(long, global = true)]
    max_rules: Option<String>,
    #[arg(long, global = true)]
    train_fraction: Option<String>,
    #[arg(long, global = true)]
    granules: Option<String>,
    #[arg(long, global = true)]
    max_open_steps: Option<String>,
    /// `cumulative` or `exact`
    #[arg(long, global = true)]
    semantics: Option<String>,

    /// Run report JSON from `pipeline`
    #[arg(long, global = true)]
    report: Option<String>,
    /// Rule file in the text rule format
    #[arg(long, global = true)]
    rules: Option<String>,
    /// Monitored value of the decision attribute, raw units
    #[arg(long, global = true)]
    observed: Option<String>,
    /// Granule label of the observation, instead of --observed
    #[arg(long, global = true)]
    label: Option<String>,

    /// `plain` or `relative`
    #[arg(long, global = true)]
    mode: Option<String>,

    #[arg(long, global = true)]
    count: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long, global = true)]
    c_min: Option<String>,
    #[arg(long, global = true)]
    c_max: Option<String>,
    #[arg(long, global = true)]
    phi_min: Option<String>,
    #[arg(long, global = true)]
    phi_max: Option<String>,
    #[arg(long, global = true)]
    theta_min: Option<String>,
    #[arg(long, global = true)]
    theta_max: Option<String>,
    #[arg(long, global = true)]
    w_min: Option<String>,
    #[arg(long, global = true)]
    w_max: Option<String>,
    #[arg(long, global = true)]
    a_min: Option<String>,
    #[arg(long, global = true)]
    a_max: Option<String>,
}

impl Opts {
    fn flags(&self) -> [(&'static str, &Option<String>); 32] {
        [
            ("data", &self.data),
            ("schema", &self.schema),
            ("seed", &self.seed),
            ("out", &self.out),
            ("decision", &self.decision),
            ("n", &self.n),
            ("k", &self.k),
            ("el", &self.el),
            ("min_strength", &self.min_strength),
            ("max_length", &self.max_length),
            ("max_rules", &self.max_rules),
            ("train_fraction", &self.train_fraction),
            ("granules", &self.granules),
            ("max_open_steps", &self.max_open_steps),
            ("semantics", &self.semantics),
            ("report", &self.report),
            ("rules", &self.rules),
            ("observed", &self.observed),
            ("label", &self.label),
            ("mode", &self.mode),
            ("count", &self.count),
            ("alpha", &self.alpha),
            ("c_min", &self.c_min),
            ("c_max", &self.c_max),
            ("phi_min", &self.phi_min),
            ("phi_max", &self.phi_max),
            ("theta_min", &self.theta_min),
            ("theta_max", &self.theta_max),
            ("w_min", &self.w_min),
            ("w_max", &self.w_max),
            ("a_min", &self.a_min),
            ("a_max", &self.a_max),
        ]
    }

    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        for (key, value) in self.flags() {
            if let Some(v) = value {
                s.set(key, v.as_str());
            }
        }
        Ok(s)
    }
}

enum Outcome {
    Done,
    NotMet,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command, &cli.opts) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotMet) => ExitCode::from(3),
        Err(e) => {
            eprintln!("somrst: {e}");
            ExitCode::from(match e {
                Error::Usage(_) => 1,
                Error::Data(_) | Error::Io(_) | Error::Json(_) => 2,
            })
        }
    }
}

fn run(command: Command, opts: &Opts) -> Result<Outcome> {
    let s = opts.settings()?;
    let known: Vec<&str> = opts.flags().iter().map(|(k, _)| *k).collect();
    for key in s.unknown(&known) {
        eprintln!("somrst: ignoring unknown setting `{key}`");
    }
    match command {
        Command::Discretize => discretize(&s),
        Command::Rules => induce(&s),
        Command::Pipeline => run_pipeline(&s),
        Command::Backanalyze => backanalyze(&s),
        Command::Surrogate => generate(&s),
        Command::Reducts => reducts(&s),
    }
}

fn read(path: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read {path}: {e}")))
}

fn load(s: &Settings) -> Result<DecisionTable> {
    let data = read(s.require("data")?)?;
    let schema = parse_schema(&read(s.require("schema")?)?)?;
    load_table(&data, &schema)
}

/// Writes `name` under the output directory, or prints it when there is none.
fn emit(s: &Settings, name: &str, contents: &str) -> Result<()> {
    match s.path("out") {
        Some(dir) => {
            fs::create_dir_all(&dir)?;
            fs::write(dir.join(name), contents)?;
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn decision(s: &Settings, table: &DecisionTable) -> Result<String> {
    if let Some(d) = s.raw("decision") {
        return Ok(d.to_string());
    }
    match table.decision_indices().as_slice() {
        [only] => Ok(table.specs()[*only].name.clone()),
        _ => Err(Error::Usage("several decision attributes; pick one with --decision".into())),
    }
}

fn constraints(s: &Settings) -> Result<RuleConstraints> {
    let d = RuleConstraints::default();
    Ok(RuleConstraints {
        min_strength: s.get_or("min_strength", d.min_strength)?,
        max_length: s.get_or("max_length", d.max_length)?,
        max_rules: s.get_or("max_rules", d.max_rules)?,
    })
}

fn semantics(s: &Settings) -> Result<Semantics> {
    match s.raw("semantics").unwrap_or("cumulative") {
        "cumulative" => Ok(Semantics::Cumulative),
        "exact" => Ok(Semantics::Exact),
        other => Err(Error::Usage(format!("unknown semantics `{other}`"))),
    }
}

fn pipeline_config(s: &Settings) -> Result<PipelineConfig> {
    let d = PipelineConfig::default();
    Ok(PipelineConfig {
        n: s.get_or("n", d.n)?,
        k: s.get_or("k", d.k)?,
        el: s.get_or("el", d.el)?,
        constraints: constraints(s)?,
        semantics: semantics(s)?,
        train_fraction: s.get_or("train_fraction", d.train_fraction)?,
        granules: s.get_or("granules", d.granules)?,
        max_open_steps: s.get("max_open_steps")?,
        seed: s.get_or("seed", d.seed)?,
    })
}

fn granulate(s: &Settings, table: &DecisionTable) -> Result<GranularTable> {
    let discs = som::fit_table(table, s.get_or("granules", 3u32)?, s.get_or("seed", 0u64)?)?;
    GranularTable::from_table(table, &discs)
}

fn discretize(s: &Settings) -> Result<Outcome> {
    let table = load(s)?;
    if table.is_empty() {
        return Err(Error::Data("table has no rows".into()));
    }
    let g = granulate(s, &table)?;
    emit(s, "discretizers.txt", &som::render_records(&g.discretizers()))?;
    if s.path("out").is_some() {
        emit(s, "granular.csv", &g.to_csv())?;
    }
    Ok(Outcome::Done)
}

fn induce(s: &Settings) -> Result<Outcome> {
    let table = load(s)?;
    let d = decision(s, &table)?;
    let g = granulate(s, &table)?;
    let rs = rules::induce_cover(&g, &d, &constraints(s)?, semantics(s)?)?;
    if !rs.uncovered.is_empty() {
        eprintln!("somrst: {} objects left uncovered: {:?}", rs.uncovered.len(), rs.uncovered);
    }
    emit(s, "rules.txt", &rs.render())?;
    Ok(Outcome::Done)
}

fn run_pipeline(s: &Settings) -> Result<Outcome> {
    let table = load(s)?;
    let d = decision(s, &table)?;
    let cfg = pipeline_config(s)?;
    let report = pipeline::close_open(&table, &d, &cfg)?;
    eprintln!(
        "somrst: {} iterations, best accuracy {:.3} with {} rules",
        report.iterations(),
        report.best.accuracy,
        report.best.rule_set.rules.len()
    );
    emit(s, "report.json", &report.to_json()?)?;
    if s.path("out").is_some() {
        emit(s, "rules.txt", &report.rules_text)?;
    }
    Ok(if report.el_met { Outcome::Done } else { Outcome::NotMet })
}

fn find_discretizer<'a>(discs: &'a [Discretizer], name: &str) -> Result<&'a Discretizer> {
    discs
        .iter()
        .find(|d| d.attribute.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Usage(format!("no discretizer for `{name}`")))
}

fn backanalyze(s: &Settings) -> Result<Outcome> {
    let (rules, attribute, discs, core) = if let Some(path) = s.raw("report") {
        let report = RunReport::from_json(&read(path)?)?;
        let core: BTreeSet<String> = report.sensitivity.iter().filter(|r| r.core).map(|r| r.attribute.clone()).collect();
        let attribute = s.raw("decision").map_or(report.decision.clone(), String::from);
        (report.best.rule_set.rules, attribute, report.best.discretizers, core)
    } else if let Some(path) = s.raw("rules") {
        let rules = rules::parse_rules(&read(path)?)?;
        let attribute = match (s.raw("decision"), rules.first()) {
            (Some(d), _) => d.to_string(),
            (None, Some(r)) => r.decision.attribute.clone(),
            (None, None) => return Err(Error::Data(format!("{path} holds no rules"))),
        };
        let (discs, core) = if s.raw("data").is_some() {
            let table = load(s)?;
            let g = granulate(s, &table)?;
            let name = table
                .specs()
                .iter()
                .find(|spec| spec.name.eq_ignore_ascii_case(&attribute))
                .map(|spec| spec.name.clone())
                .ok_or_else(|| Error::Usage(format!("`{attribute}` is not in the table")))?;
            (g.discretizers(), rough::reducts(&g, &name, DiscernMode::DecisionRelative)?.core)
        } else {
            (Vec::new(), BTreeSet::new())
        };
        (rules, attribute, discs, core)
    } else {
        return Err(Error::Usage("backanalyze needs --report or --rules".into()));
    };

    let label = match (s.get::<u32>("label")?, s.get::<f64>("observed")?) {
        (Some(l), _) => l,
        (None, Some(v)) => pipeline::granulate_observation(find_discretizer(&discs, &attribute)?, v)?,
        (None, None) => return Err(Error::Usage("backanalyze needs --observed or --label".into())),
    };
    let estimate = pipeline::back_analyze(&rules, &attribute, label, &core)?;
    if estimate.no_match {
        eprintln!("somrst: no rule admits {attribute} granule {label}");
    }
    emit(s, "estimate.json", &estimate.to_json()?)?;
    Ok(Outcome::Done)
}

fn generate(s: &Settings) -> Result<Outcome> {
    let d = SurrogateRanges::default();
    let pair = |name: &str, (lo, hi): (f64, f64)| -> Result<(f64, f64)> {
        Ok((s.get_or(&format!("{name}_min"), lo)?, s.get_or(&format!("{name}_max"), hi)?))
    };
    let ranges = SurrogateRanges {
        c: pair("c", d.c)?,
        phi: pair("phi", d.phi)?,
        theta: pair("theta", d.theta)?,
        w: pair("w", d.w)?,
        a: pair("a", d.a)?,
        alpha: s.get_or("alpha", d.alpha)?,
    };
    let table = surrogate::generate_table(&ranges, s.get_or("count", 200usize)?, s.get_or("seed", 0u64)?)?;
    emit(s, "surrogate.csv", &table.to_csv())?;
    if s.path("out").is_some() {
        emit(s, "surrogate.schema.csv", &render_schema(table.specs()))?;
    }
    Ok(Outcome::Done)
}

fn reducts(s: &Settings) -> Result<Outcome> {
    let table = load(s)?;
    let d = decision(s, &table)?;
    let mode = match s.raw("mode").unwrap_or("relative") {
        "relative" => DiscernMode::DecisionRelative,
        "plain" => DiscernMode::Plain,
        other => return Err(Error::Usage(format!("unknown mode `{other}`"))),
    };
    let g = granulate(s, &table)?;
    emit(s, "reducts.txt", &rough::reducts(&g, &d, mode)?.report())?;
    Ok(Outcome::Done)
}
