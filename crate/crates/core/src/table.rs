//! Attribute-value tables: raw forward-model runs and their granulated form.
//!
//! Rows are objects, columns are attributes. A cell is either a finite real
//! (raw table) or a granule label (granular table); `None` is the missing
//! marker, written `?` in CSV.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{data, usage, Error, Result};
use crate::som::Discretizer;

/// Token used for missing cells in CSV files.
pub const MISSING: &str = "?";

/// Attributes spanning more than this ratio (max / min) get a log10 scale when
/// the schema asks for `auto`.
const AUTO_LOG_RATIO: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Condition,
    Decision,
}

/// Transform applied to an attribute before quantization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log10,
    /// Resolved to `Linear` or `Log10` when a table is constructed.
    Auto,
}

impl Scale {
    pub fn forward(self, v: f64) -> f64 {
        match self {
            Scale::Log10 => v.log10(),
            Scale::Linear | Scale::Auto => v,
        }
    }

    pub fn inverse(self, v: f64) -> f64 {
        match self {
            Scale::Log10 => 10f64.powf(v),
            Scale::Linear | Scale::Auto => v,
        }
    }

    /// Log10 for strictly positive columns spanning more than three decades.
    pub fn suggest(values: impl IntoIterator<Item = f64>) -> Scale {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > 0.0 && hi / lo > AUTO_LOG_RATIO {
            Scale::Log10
        } else {
            Scale::Linear
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Linear => "linear",
            Scale::Log10 => "log10",
            Scale::Auto => "auto",
        })
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Scale::Linear),
            "log10" | "log" => Ok(Scale::Log10),
            "auto" | "" => Ok(Scale::Auto),
            other => data(format!("unknown scale `{other}`")),
        }
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "condition" => Ok(Role::Condition),
            "decision" => Ok(Role::Decision),
            other => data(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub role: Role,
    pub scale: Scale,
    #[serde(default)]
    pub units: String,
}

impl AttributeSpec {
    pub fn condition(name: impl Into<String>) -> Self {
        AttributeSpec { name: name.into(), role: Role::Condition, scale: Scale::Linear, units: String::new() }
    }

    pub fn decision(name: impl Into<String>) -> Self {
        AttributeSpec { name: name.into(), role: Role::Decision, scale: Scale::Linear, units: String::new() }
    }

    pub fn with_scale(mut self, scale: Scale) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = units.into();
        self
    }
}

/// Parses a schema file: CSV with header `name,role,scale,units`.
pub fn parse_schema(text: &str) -> Result<Vec<AttributeSpec>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Data(format!("schema header: {e}")))?.clone();
    let col = |key: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(key));
    let (Some(name_col), Some(role_col)) = (col("name"), col("role")) else {
        return data("schema must have `name` and `role` columns");
    };
    let scale_col = col("scale");
    let units_col = col("units");

    let mut specs = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("schema record {}: {e}", line + 1)))?;
        let field = |c: Option<usize>| c.and_then(|c| record.get(c)).unwrap_or("");
        let name = field(Some(name_col));
        if name.is_empty() {
            return data(format!("schema record {} has an empty name", line + 1));
        }
        specs.push(AttributeSpec {
            name: name.to_string(),
            role: field(Some(role_col)).parse()?,
            scale: field(scale_col).parse()?,
            units: field(units_col).to_string(),
        });
    }
    Ok(specs)
}

pub fn render_schema(specs: &[AttributeSpec]) -> String {
    let mut out = String::from("name,role,scale,units\n");
    for s in specs {
        let role = match s.role {
            Role::Condition => "condition",
            Role::Decision => "decision",
        };
        out.push_str(&format!("{},{},{},{}\n", s.name, role, s.scale, s.units));
    }
    out
}

/// Read access shared by raw and granular tables, used by the rough-set code.
pub trait InformationSystem {
    fn specs(&self) -> &[AttributeSpec];
    fn ids(&self) -> &[usize];
    /// Equality key of a cell; `None` for a missing cell.
    fn key(&self, row: usize, col: usize) -> Option<u64>;

    fn len(&self) -> usize {
        self.ids().len()
    }

    fn is_empty(&self) -> bool {
        self.ids().is_empty()
    }

    fn attr_index(&self, name: &str) -> Option<usize> {
        self.specs().iter().position(|s| s.name == name)
    }

    fn condition_indices(&self) -> Vec<usize> {
        role_indices(self.specs(), Role::Condition)
    }

    fn decision_indices(&self) -> Vec<usize> {
        role_indices(self.specs(), Role::Decision)
    }
}

fn role_indices(specs: &[AttributeSpec], role: Role) -> Vec<usize> {
    specs.iter().enumerate().filter(|(_, s)| s.role == role).map(|(i, _)| i).collect()
}

fn validate_specs(specs: &[AttributeSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in specs {
        if !seen.insert(s.name.as_str()) {
            return data(format!("duplicate attribute `{}`", s.name));
        }
    }
    if !specs.iter().any(|s| s.role == Role::Condition) {
        return data("table needs at least one condition attribute");
    }
    if !specs.iter().any(|s| s.role == Role::Decision) {
        return data("table needs at least one decision attribute");
    }
    Ok(())
}

fn validate_shape<T>(specs: &[AttributeSpec], rows: &[Vec<T>], ids: &[usize]) -> Result<()> {
    if rows.len() != ids.len() {
        return usage(format!("{} rows but {} object ids", rows.len(), ids.len()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != specs.len() {
            return data(format!("row {} has {} cells, expected {}", i + 1, row.len(), specs.len()));
        }
    }
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
        return data(format!("duplicate object id {dup}"));
    }
    Ok(())
}

/// A cell of a raw table.
pub type Cell = Option<f64>;

/// Raw decision table. Object ids are stable under projection and row
/// selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTable {
    specs: Vec<AttributeSpec>,
    rows: Vec<Vec<Cell>>,
    ids: Vec<usize>,
}

impl DecisionTable {
    pub fn new(specs: Vec<AttributeSpec>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let ids = (0..rows.len()).collect();
        Self::with_ids(specs, rows, ids)
    }

    /// Builds a table with explicit object ids. `Scale::Auto` specs are
    /// resolved from the column values.
    pub fn with_ids(mut specs: Vec<AttributeSpec>, rows: Vec<Vec<Cell>>, ids: Vec<usize>) -> Result<Self> {
        validate_specs(&specs)?;
        validate_shape(&specs, &rows, &ids)?;
        for (c, spec) in specs.iter_mut().enumerate() {
            let present = rows.iter().filter_map(|r| r[c]);
            if let Some(bad) = present.clone().find(|v| !v.is_finite()) {
                return data(format!("attribute `{}` has non-finite value {bad}", spec.name));
            }
            if spec.scale == Scale::Auto {
                spec.scale = Scale::suggest(present.clone());
            }
            if spec.scale == Scale::Log10 {
                if let Some(bad) = present.clone().find(|v| *v <= 0.0) {
                    return data(format!("log10 attribute `{}` has non-positive value {bad}", spec.name));
                }
            }
        }
        Ok(DecisionTable { specs, rows, ids })
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn spec(&self, name: &str) -> Option<&AttributeSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    pub fn column(&self, col: usize) -> Vec<Cell> {
        self.rows.iter().map(|r| r[col]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<Cell>> {
        match self.attr_index(name) {
            Some(c) => Ok(self.column(c)),
            None => usage(format!("unknown attribute `{name}`")),
        }
    }

    /// Position of an object id among the rows.
    pub fn row_of(&self, id: usize) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    /// Keeps only the named attributes, in the given order.
    pub fn project(&self, names: &[&str]) -> Result<DecisionTable> {
        let cols = names
            .iter()
            .map(|n| self.attr_index(n).ok_or_else(|| Error::Usage(format!("unknown attribute `{n}`"))))
            .collect::<Result<Vec<_>>>()?;
        let specs = cols.iter().map(|&c| self.specs[c].clone()).collect();
        let rows = self.rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
        DecisionTable::with_ids(specs, rows, self.ids.clone())
    }

    /// Keeps the rows at the given positions, in the given order.
    pub fn select_rows(&self, positions: &[usize]) -> DecisionTable {
        DecisionTable {
            specs: self.specs.clone(),
            rows: positions.iter().map(|&p| self.rows[p].clone()).collect(),
            ids: positions.iter().map(|&p| self.ids[p]).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.specs.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Some(v) => format!("{v:e}"),
                    None => MISSING.to_string(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

impl InformationSystem for DecisionTable {
    fn specs(&self) -> &[AttributeSpec] {
        &self.specs
    }

    fn ids(&self) -> &[usize] {
        &self.ids
    }

    fn key(&self, row: usize, col: usize) -> Option<u64> {
        // +0.0 and -0.0 compare equal, so they must share a key.
        self.rows[row][col].map(|v| if v == 0.0 { 0 } else { v.to_bits() })
    }
}

fn parse_cell(raw: &str, row: usize, name: &str) -> Result<Cell> {
    if raw == MISSING {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => data(format!("row {row}, column `{name}`: cannot parse `{raw}` as a number")),
    }
}

/// Reads a CSV table. Column order follows the header; every header name must
/// be described by the schema and every schema attribute must appear.
pub fn load_table(csv_text: &str, schema: &[AttributeSpec]) -> Result<DecisionTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(csv_text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Data(format!("header: {e}")))?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return data("missing header row");
    }
    let mut specs = Vec::with_capacity(headers.len());
    for h in headers.iter() {
        match schema.iter().find(|s| s.name == h) {
            Some(s) => specs.push(s.clone()),
            None => return data(format!("unknown column `{h}`")),
        }
    }
    if let Some(absent) = schema.iter().find(|s| !headers.iter().any(|h| h == s.name)) {
        return data(format!("schema attribute `{}` has no column", absent.name));
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| Error::Data(format!("row {row_no}: {e}")))?;
        if record.len() != specs.len() {
            return data(format!("row {row_no} has {} cells, expected {}", record.len(), specs.len()));
        }
        let row = record
            .iter()
            .zip(&specs)
            .map(|(raw, spec)| parse_cell(raw, row_no, &spec.name))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    DecisionTable::new(specs, rows)
}

/// Seeded random train/test partition. Both halves keep the original row
/// order.
pub fn split_random(table: &DecisionTable, train_fraction: f64, seed: u64) -> Result<(DecisionTable, DecisionTable)> {
    if table.is_empty() {
        return data("cannot split an empty table");
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return usage(format!("train fraction {train_fraction} outside (0, 1]"));
    }
    let n = table.len();
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((table.select_rows(&train), table.select_rows(&test)))
}

/// Min-max bounds of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    /// Constant columns map to 0.5.
    pub fn apply(&self, v: f64) -> f64 {
        if self.max > self.min {
            (v - self.min) / (self.max - self.min)
        } else {
            0.5
        }
    }

    pub fn invert(&self, s: f64) -> f64 {
        if self.max > self.min {
            self.min + s * (self.max - self.min)
        } else {
            self.min
        }
    }
}

/// Scales present values to [0, 1]; missing cells pass through.
pub fn scale_minmax(values: &[Cell]) -> Result<(Vec<Cell>, MinMax)> {
    let mut present = values.iter().flatten().copied().peekable();
    if present.peek().is_none() {
        return data("cannot scale a column with no values");
    }
    let (min, max) = present.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let scaler = MinMax { min, max };
    Ok((values.iter().map(|c| c.map(|v| scaler.apply(v))).collect(), scaler))
}

/// A table of granule labels (1 = highest granule).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularTable {
    specs: Vec<AttributeSpec>,
    rows: Vec<Vec<Option<u32>>>,
    ids: Vec<usize>,
    granules: Vec<u32>,
    discretizers: Vec<Option<Discretizer>>,
}

impl GranularTable {
    /// Builds a labelled table directly; each attribute's granule count is
    /// its largest label.
    pub fn from_labels(specs: Vec<AttributeSpec>, rows: Vec<Vec<Option<u32>>>) -> Result<Self> {
        let ids: Vec<usize> = (0..rows.len()).collect();
        validate_specs(&specs)?;
        validate_shape(&specs, &rows, &ids)?;
        let granules = (0..specs.len())
            .map(|c| rows.iter().filter_map(|r| r[c]).max().unwrap_or(1).max(1))
            .collect();
        if rows.iter().flatten().any(|l| *l == Some(0)) {
            return data("granule labels start at 1");
        }
        let discretizers = vec![None; specs.len()];
        Ok(GranularTable { specs, rows, ids, granules, discretizers })
    }

    /// Granulates every attribute of `table` with the discretizer of the same
    /// name.
    pub fn from_table(table: &DecisionTable, discretizers: &[Discretizer]) -> Result<Self> {
        let mut per_attr = Vec::with_capacity(table.specs.len());
        for spec in &table.specs {
            match discretizers.iter().find(|d| d.attribute == spec.name) {
                Some(d) => per_attr.push(d.clone()),
                None => return usage(format!("no discretizer for attribute `{}`", spec.name)),
            }
        }
        let rows = table
            .rows
            .iter()
            .map(|r| r.iter().zip(&per_attr).map(|(c, d)| c.map(|v| d.assign(v))).collect())
            .collect();
        Ok(GranularTable {
            specs: table.specs.clone(),
            rows,
            ids: table.ids.clone(),
            granules: per_attr.iter().map(Discretizer::granules).collect(),
            discretizers: per_attr.into_iter().map(Some).collect(),
        })
    }

    pub fn rows(&self) -> &[Vec<Option<u32>>] {
        &self.rows
    }

    pub fn label(&self, row: usize, col: usize) -> Option<u32> {
        self.rows[row][col]
    }

    pub fn granules(&self, col: usize) -> u32 {
        self.granules[col]
    }

    pub fn discretizer(&self, col: usize) -> Option<&Discretizer> {
        self.discretizers[col].as_ref()
    }

    pub fn discretizers(&self) -> Vec<Discretizer> {
        self.discretizers.iter().flatten().cloned().collect()
    }

    pub fn select_rows(&self, positions: &[usize]) -> GranularTable {
        GranularTable {
            specs: self.specs.clone(),
            rows: positions.iter().map(|&p| self.rows[p].clone()).collect(),
            ids: positions.iter().map(|&p| self.ids[p]).collect(),
            granules: self.granules.clone(),
            discretizers: self.discretizers.clone(),
        }
    }

    /// Rows whose object ids appear in `ids`, in table order.
    pub fn select_ids(&self, ids: &[usize]) -> GranularTable {
        let wanted: HashSet<usize> = ids.iter().copied().collect();
        let positions: Vec<usize> = (0..self.rows.len()).filter(|&p| wanted.contains(&self.ids[p])).collect();
        self.select_rows(&positions)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.specs.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| c.map_or_else(|| MISSING.to_string(), |l| l.to_string()))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

impl InformationSystem for GranularTable {
    fn specs(&self) -> &[AttributeSpec] {
        &self.specs
    }

    fn ids(&self) -> &[usize] {
        &self.ids
    }

    fn key(&self, row: usize, col: usize) -> Option<u64> {
        self.rows[row][col].map(u64::from)
    }
}
