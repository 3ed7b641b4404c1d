//! The space of bivariate Boolean functions that define task outcomes.
//!
//! A function is identified by its truth table read as a 4-bit number, rows
//! ordered `(0,0), (0,1), (1,0), (1,1)` with the first row as the most
//! significant bit. Argument `A` is the first operand, `B` the second.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Four output bits indexed by the input pair `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TruthTable(u8);

impl TruthTable {
    /// Builds a table from its 4-bit encoding. Bits above the fourth are rejected.
    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits < 16).then_some(TruthTable(bits))
    }

    pub fn from_rows(rows: [bool; 4]) -> Self {
        let bits = rows
            .iter()
            .fold(0u8, |acc, &r| (acc << 1) | u8::from(r));
        TruthTable(bits)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn output(self, a: bool, b: bool) -> bool {
        let row = 2 * usize::from(a) + usize::from(b);
        (self.0 >> (3 - row)) & 1 == 1
    }

    pub fn rows(self) -> [bool; 4] {
        [
            self.output(false, false),
            self.output(false, true),
            self.output(true, false),
            self.output(true, true),
        ]
    }

    pub fn positive_rows(self) -> u32 {
        self.0.count_ones()
    }

    pub fn negated(self) -> Self {
        TruthTable(!self.0 & 0x0f)
    }

    /// Table obtained by swapping the roles of `A` and `B`.
    pub fn swapped(self) -> Self {
        let [r00, r01, r10, r11] = self.rows();
        TruthTable::from_rows([r00, r10, r01, r11])
    }

    pub fn depends_on_a(self) -> bool {
        [false, true]
            .iter()
            .any(|&b| self.output(false, b) != self.output(true, b))
    }

    pub fn depends_on_b(self) -> bool {
        [false, true]
            .iter()
            .any(|&a| self.output(a, false) != self.output(a, true))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FunctionClass {
    Conjunctive,
    Disjunctive,
    XorLike,
}

impl FunctionClass {
    pub const ALL: [FunctionClass; 3] = [
        FunctionClass::Conjunctive,
        FunctionClass::Disjunctive,
        FunctionClass::XorLike,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FunctionClass::Conjunctive => "conjunctive",
            FunctionClass::Disjunctive => "disjunctive",
            FunctionClass::XorLike => "xor_like",
        }
    }
}

impl fmt::Display for FunctionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifier of one of the 16 bivariate functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionId(u8);

impl FunctionId {
    pub fn new(id: u8) -> Option<Self> {
        (id < 16).then_some(FunctionId(id))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn function(self) -> BooleanFunction {
        BooleanFunction::from_id(self)
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

const NAMES: [&str; 16] = [
    "FALSE",
    "A AND B",
    "A AND NOT B",
    "A",
    "NOT A AND B",
    "B",
    "A XOR B",
    "A OR B",
    "A NOR B",
    "A XNOR B",
    "NOT B",
    "A OR NOT B",
    "NOT A",
    "NOT A OR B",
    "A NAND B",
    "TRUE",
];

const ALIASES: [(&str, u8); 6] = [
    ("AND", 1),
    ("XOR", 6),
    ("OR", 7),
    ("NOR", 8),
    ("XNOR", 9),
    ("NAND", 14),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BooleanFunction {
    id: FunctionId,
    table: TruthTable,
}

impl BooleanFunction {
    pub fn from_id(id: FunctionId) -> Self {
        BooleanFunction {
            id,
            table: TruthTable(id.0),
        }
    }

    pub fn from_table(table: TruthTable) -> Self {
        BooleanFunction {
            id: FunctionId(table.0),
            table,
        }
    }

    pub fn id(&self) -> FunctionId {
        self.id
    }

    pub fn table(&self) -> TruthTable {
        self.table
    }

    pub fn name(&self) -> &'static str {
        NAMES[usize::from(self.id.0)]
    }

    /// Class label; `None` for the constant and univariate functions.
    pub fn class(&self) -> Option<FunctionClass> {
        if !is_nontrivial(self) {
            return None;
        }
        match self.table.positive_rows() {
            1 => Some(FunctionClass::Conjunctive),
            2 => Some(FunctionClass::XorLike),
            3 => Some(FunctionClass::Disjunctive),
            _ => None,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.table.output(false, true) == self.table.output(true, false)
    }

    pub fn eval(&self, a: bool, b: bool) -> bool {
        self.table.output(a, b)
    }
}

impl fmt::Display for BooleanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown boolean function `{0}`")]
pub struct UnknownFunction(pub String);

impl FromStr for BooleanFunction {
    type Err = UnknownFunction;

    /// Accepts a numeric id, a canonical name (`"A AND NOT B"`, underscores
    /// allowed in place of spaces) or a short alias such as `XOR`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if let Ok(id) = trimmed.parse::<u8>() {
            return FunctionId::new(id)
                .map(BooleanFunction::from_id)
                .ok_or_else(|| UnknownFunction(s.to_string()));
        }
        let norm = trimmed
            .replace(['_', '-'], " ")
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_ascii_uppercase();
        if let Some(&(_, id)) = ALIASES.iter().find(|(alias, _)| *alias == norm) {
            return Ok(BooleanFunction::from_id(FunctionId(id)));
        }
        NAMES
            .iter()
            .position(|name| *name == norm)
            .map(|i| BooleanFunction::from_id(FunctionId(i as u8)))
            .ok_or_else(|| UnknownFunction(s.to_string()))
    }
}

/// All 16 bivariate functions in id order.
pub fn enumerate_all() -> Vec<BooleanFunction> {
    (0u8..16)
        .map(|id| BooleanFunction::from_id(FunctionId(id)))
        .collect()
}

/// True iff the function depends on both of its arguments.
pub fn is_nontrivial(f: &BooleanFunction) -> bool {
    f.table.depends_on_a() && f.table.depends_on_b()
}

/// The 10 functions that depend on both arguments, in id order.
pub fn nontrivial_functions() -> Vec<BooleanFunction> {
    enumerate_all().into_iter().filter(is_nontrivial).collect()
}

pub fn evaluate(f: &BooleanFunction, a: bool, b: bool) -> bool {
    f.eval(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    fn by_alias(s: &str) -> BooleanFunction {
        s.parse().unwrap()
    }

    #[test]
    fn sixteen_distinct_functions() {
        let all = enumerate_all();
        assert_eq!(all.len(), 16);
        let ids: BTreeSet<u8> = all.iter().map(|f| f.id().get()).collect();
        assert_eq!(ids, (0..16).collect());
        let tables: BTreeSet<TruthTable> = all.iter().map(|f| f.table()).collect();
        assert_eq!(tables.len(), 16);
        for f in &all {
            assert_eq!(f.table().bits(), f.id().get());
        }
    }

    #[test]
    fn id_decoding() {
        assert_eq!(
            FunctionId(0).function().table().rows(),
            [false, false, false, false]
        );
        assert_eq!(
            FunctionId(6).function().table().rows(),
            [false, true, true, false]
        );
        assert_eq!(by_alias("XOR").id().get(), 6);
    }

    #[test]
    fn nontriviality() {
        assert!(!is_nontrivial(&by_alias("TRUE")));
        assert!(!is_nontrivial(&by_alias("FALSE")));
        let a_only = BooleanFunction::from_table(TruthTable::from_rows([false, false, true, true]));
        assert_eq!(a_only.name(), "A");
        assert!(!is_nontrivial(&a_only));
        assert!(is_nontrivial(&by_alias("XOR")));
    }

    #[test]
    fn ten_nontrivial_with_class_sizes() {
        let fs = nontrivial_functions();
        assert_eq!(fs.len(), 10);
        let mut counts = BTreeMap::new();
        for f in &fs {
            *counts.entry(f.class().unwrap()).or_insert(0) += 1;
        }
        assert_eq!(counts[&FunctionClass::Conjunctive], 4);
        assert_eq!(counts[&FunctionClass::Disjunctive], 4);
        assert_eq!(counts[&FunctionClass::XorLike], 2);
        let xor_like: BTreeSet<&str> = fs
            .iter()
            .filter(|f| f.class() == Some(FunctionClass::XorLike))
            .map(|f| f.name())
            .collect();
        assert_eq!(xor_like, BTreeSet::from(["A XOR B", "A XNOR B"]));
        for f in enumerate_all() {
            assert_eq!(f.class().is_some(), is_nontrivial(&f));
        }
    }

    #[test]
    fn evaluation_examples() {
        assert!(evaluate(&by_alias("AND"), true, true));
        assert!(!evaluate(&by_alias("XOR"), true, true));
        assert!(evaluate(&by_alias("A AND NOT B"), true, false));
        assert!(!evaluate(&by_alias("A AND NOT B"), false, true));
    }

    #[test]
    fn conjunctive_and_disjunctive_are_dual() {
        for f in nontrivial_functions() {
            if f.class() == Some(FunctionClass::Conjunctive) {
                let dual = BooleanFunction::from_table(f.table().negated());
                assert_eq!(dual.class(), Some(FunctionClass::Disjunctive), "{f}");
            }
        }
    }

    #[test]
    fn symmetric_members() {
        let sym: BTreeSet<&str> = nontrivial_functions()
            .into_iter()
            .filter(|f| f.is_symmetric())
            .map(|f| f.name())
            .collect();
        let expected: BTreeSet<&str> = ["AND", "OR", "XOR", "XNOR", "NAND", "NOR"]
            .iter()
            .map(|s| by_alias(s).name())
            .collect();
        assert_eq!(sym, expected);
        for f in enumerate_all() {
            assert_eq!(f.is_symmetric(), f.table().swapped() == f.table());
        }
    }

    #[test]
    fn parse_names_and_ids() {
        for f in enumerate_all() {
            assert_eq!(f.name().parse::<BooleanFunction>().unwrap(), f);
            assert_eq!(f.id().to_string().parse::<BooleanFunction>().unwrap(), f);
        }
        assert_eq!(by_alias("a_and_not_b").name(), "A AND NOT B");
        assert!("16".parse::<BooleanFunction>().is_err());
        assert!("IMPLIES".parse::<BooleanFunction>().is_err());
    }
}
