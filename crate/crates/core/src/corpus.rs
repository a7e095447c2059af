//! Bundled reference data: the twelve published slope-model runs and the
//! published rule listing for the high-velocity class.

use crate::table::{load_table, parse_schema, AttributeSpec, DecisionTable};

pub const TABLE1_CSV: &str = include_str!("../data/table1.csv");
pub const TABLE1_SCHEMA: &str = include_str!("../data/table1.schema.csv");
pub const GOLDEN_RULES: &str = include_str!("../data/golden_rules.txt");

/// Rows 1..12 of the corpus carry object ids 0..11.
pub fn table1() -> DecisionTable {
    load_table(TABLE1_CSV, &table1_schema()).expect("bundled corpus parses")
}

pub fn table1_schema() -> Vec<AttributeSpec> {
    parse_schema(TABLE1_SCHEMA).expect("bundled schema parses")
}

/// Condition attributes of the corpus, in column order.
pub const TABLE1_CONDITIONS: [&str; 8] = ["Cp", "Phip", "Cb", "Phib", "Csz", "Phisz", "Tp", "Tb"];
