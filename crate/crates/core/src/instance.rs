//! Instance generation: uniquely-solvable designs under the column balance
//! constraint, the operational `T_min` search, and the materials grid.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::logic::{nontrivial_functions, BooleanFunction, FunctionId};
use crate::pair::{all_pairs, choose2, Pair};

pub const DEFAULT_MAX_ATTEMPTS: u32 = 10_000;
pub const DEFAULT_MASTER_SEED: u64 = 20_250_301;
/// How far above the counting bound `t_min` searches before giving up.
pub const TMIN_SEARCH_SPAN: usize = 8;

/// Trial-by-variable bit matrix. Row `t` holds the inputs of trial `t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Design {
    n_vars: usize,
    rows: Vec<Vec<bool>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DesignError {
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("design has {trials} trials but {outputs} outputs")]
    OutputLength { trials: usize, outputs: usize },
    #[error("invalid bit character {0:?}")]
    BadBit(char),
}

impl Design {
    pub fn new(n_vars: usize, rows: Vec<Vec<bool>>) -> Result<Self, DesignError> {
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_vars) {
            return Err(DesignError::RaggedRow {
                row,
                got: r.len(),
                expected: n_vars,
            });
        }
        Ok(Design { n_vars, rows })
    }

    /// Builds a design from per-variable columns of equal length.
    pub fn from_columns(columns: &[Vec<bool>]) -> Result<Self, DesignError> {
        let n_trials = columns.first().map_or(0, Vec::len);
        if let Some((c, col)) = columns.iter().enumerate().find(|(_, c)| c.len() != n_trials) {
            return Err(DesignError::RaggedRow {
                row: c,
                got: col.len(),
                expected: n_trials,
            });
        }
        let rows = (0..n_trials)
            .map(|t| columns.iter().map(|c| c[t]).collect())
            .collect();
        Ok(Design {
            n_vars: columns.len(),
            rows,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_trials(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn get(&self, trial: usize, var: usize) -> bool {
        self.rows[trial][var]
    }

    pub fn column(&self, var: usize) -> impl Iterator<Item = bool> + '_ {
        self.rows.iter().map(move |r| r[var])
    }

    pub fn ones(&self, var: usize) -> usize {
        self.column(var).filter(|&b| b).count()
    }

    pub fn push_row(&mut self, row: Vec<bool>) -> Result<(), DesignError> {
        if row.len() != self.n_vars {
            return Err(DesignError::RaggedRow {
                row: self.rows.len(),
                got: row.len(),
                expected: self.n_vars,
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// View of the first `t` trials.
    pub fn truncated(&self, t: usize) -> Design {
        Design {
            n_vars: self.n_vars,
            rows: self.rows[..t.min(self.rows.len())].to_vec(),
        }
    }
}

pub fn bits_to_string(bits: impl IntoIterator<Item = bool>) -> String {
    bits.into_iter().map(|b| if b { '1' } else { '0' }).collect()
}

pub fn parse_bits(s: &str) -> Result<Vec<bool>, DesignError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(DesignError::BadBit(other)),
        })
        .collect()
}

/// Which planted variable binds to argument `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleOrder {
    /// `V_i` is `A`, `V_j` is `B` for truth pair `(i, j)`, `i < j`.
    Forward,
    /// `V_j` is `A`, `V_i` is `B`.
    Reversed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "InstanceRecord", try_from = "InstanceRecord")]
pub struct VatInstance {
    pub instance_id: String,
    pub function: BooleanFunction,
    pub design: Design,
    pub outputs: Vec<bool>,
    pub truth_pair: Pair,
    pub role_order: RoleOrder,
    pub seed: u64,
}

impl VatInstance {
    pub fn n_vars(&self) -> usize {
        self.design.n_vars()
    }

    pub fn n_trials(&self) -> usize {
        self.design.n_trials()
    }

    /// Variables bound to `(A, B)`.
    pub fn roles(&self) -> (usize, usize) {
        match self.role_order {
            RoleOrder::Forward => (self.truth_pair.lo(), self.truth_pair.hi()),
            RoleOrder::Reversed => (self.truth_pair.hi(), self.truth_pair.lo()),
        }
    }

    /// Checks every structural invariant, including uniqueness and balance.
    pub fn validate(&self) -> Result<(), InstanceViolation> {
        let n = self.n_vars();
        if self.outputs.len() != self.n_trials() {
            return Err(InstanceViolation::Dimensions);
        }
        if self.truth_pair.hi() >= n {
            return Err(InstanceViolation::PairOutOfRange(self.truth_pair));
        }
        let (a, b) = self.roles();
        for (t, &y) in self.outputs.iter().enumerate() {
            if self.function.eval(self.design.get(t, a), self.design.get(t, b)) != y {
                return Err(InstanceViolation::OutputMismatch { trial: t });
            }
        }
        let ones: Vec<usize> = (0..n).map(|v| self.design.ones(v)).collect();
        if let Some(v) = ones.iter().position(|&k| k == 0 || k == self.n_trials()) {
            return Err(InstanceViolation::ConstantColumn(v));
        }
        let (ci, cj) = (ones[self.truth_pair.lo()], ones[self.truth_pair.hi()]);
        if let Some(v) = ones
            .iter()
            .position(|&k| k.abs_diff(ci) > 1 && k.abs_diff(cj) > 1)
        {
            return Err(InstanceViolation::Unbalanced(v));
        }
        let consistent = check_consistent_pairs(&self.design, &self.outputs, &self.function)
            .map_err(|_| InstanceViolation::Dimensions)?;
        if consistent.len() != 1 || !consistent.contains(&self.truth_pair) {
            return Err(InstanceViolation::NotUnique(consistent.len()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceViolation {
    #[error("design and outputs disagree in length")]
    Dimensions,
    #[error("truth pair {0} out of range")]
    PairOutOfRange(Pair),
    #[error("output of trial {trial} does not follow the planted function")]
    OutputMismatch { trial: usize },
    #[error("column V{0} is constant")]
    ConstantColumn(usize),
    #[error("column V{0} violates the balance constraint")]
    Unbalanced(usize),
    #[error("{0} pairs are consistent, expected exactly the truth pair")]
    NotUnique(usize),
}

/// Line format of the instance JSONL file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance_id: String,
    pub n_vars: usize,
    pub n_trials: usize,
    pub function_id: u8,
    pub function_name: String,
    pub design: Vec<String>,
    pub outputs: String,
    pub truth_pair: Pair,
    pub role_order: RoleOrder,
    pub seed: u64,
}

impl From<VatInstance> for InstanceRecord {
    fn from(inst: VatInstance) -> Self {
        InstanceRecord {
            n_vars: inst.n_vars(),
            n_trials: inst.n_trials(),
            function_id: inst.function.id().get(),
            function_name: inst.function.name().to_string(),
            design: inst
                .design
                .rows()
                .iter()
                .map(|r| bits_to_string(r.iter().copied()))
                .collect(),
            outputs: bits_to_string(inst.outputs.iter().copied()),
            instance_id: inst.instance_id,
            truth_pair: inst.truth_pair,
            role_order: inst.role_order,
            seed: inst.seed,
        }
    }
}

impl TryFrom<InstanceRecord> for VatInstance {
    type Error = String;

    fn try_from(rec: InstanceRecord) -> Result<Self, Self::Error> {
        let function = FunctionId::new(rec.function_id)
            .ok_or_else(|| format!("function id {} out of range", rec.function_id))?
            .function();
        let rows = rec
            .design
            .iter()
            .map(|r| parse_bits(r))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let design = Design::new(rec.n_vars, rows).map_err(|e| e.to_string())?;
        if design.n_trials() != rec.n_trials {
            return Err(format!(
                "n_trials is {} but design has {} rows",
                rec.n_trials,
                design.n_trials()
            ));
        }
        let outputs = parse_bits(&rec.outputs).map_err(|e| e.to_string())?;
        if outputs.len() != rec.n_trials {
            return Err(format!(
                "outputs has {} bits, expected {}",
                outputs.len(),
                rec.n_trials
            ));
        }
        if rec.truth_pair.hi() >= rec.n_vars {
            return Err(format!("truth pair {} out of range", rec.truth_pair));
        }
        Ok(VatInstance {
            instance_id: rec.instance_id,
            function,
            design,
            outputs,
            truth_pair: rec.truth_pair,
            role_order: rec.role_order,
            seed: rec.seed,
        })
    }
}

/// Whether some argument assignment of `pair` reproduces every output.
pub fn pair_consistent(design: &Design, outputs: &[bool], f: &BooleanFunction, pair: Pair) -> bool {
    let reproduces = |a: usize, b: usize| {
        design
            .rows()
            .iter()
            .zip(outputs)
            .all(|(row, &y)| f.eval(row[a], row[b]) == y)
    };
    reproduces(pair.lo(), pair.hi()) || (!f.is_symmetric() && reproduces(pair.hi(), pair.lo()))
}

/// Every unordered pair consistent with the observed trials.
pub fn check_consistent_pairs(
    design: &Design,
    outputs: &[bool],
    f: &BooleanFunction,
) -> Result<BTreeSet<Pair>, DesignError> {
    if design.n_trials() != outputs.len() {
        return Err(DesignError::OutputLength {
            trials: design.n_trials(),
            outputs: outputs.len(),
        });
    }
    Ok(all_pairs(design.n_vars())
        .filter(|&p| pair_consistent(design, outputs, f, p))
        .collect())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenerationError {
    #[error("invalid generation parameters: {0}")]
    InvalidParameters(String),
    #[error("generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: u32, reason: FailureReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// No column can be non-constant with fewer than two trials.
    Infeasible,
    /// Every attempt produced an ambiguous design.
    RejectionBudget,
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureReason::Infeasible => f.write_str("balance constraint infeasible"),
            FailureReason::RejectionBudget => f.write_str("no uniquely identifying design sampled"),
        }
    }
}

/// Smallest `T` with `2^T >= C(N,2)`.
pub fn lower_bound_trials(n_vars: usize) -> Result<usize, GenerationError> {
    if n_vars < 3 {
        return Err(GenerationError::InvalidParameters(format!(
            "need at least 3 variables, got {n_vars}"
        )));
    }
    let hypotheses = choose2(n_vars);
    Ok(hypotheses.next_power_of_two().trailing_zeros() as usize)
}

/// Deterministic seed for a labelled coordinate tuple.
pub fn derive_seed(master: u64, domain: &str, coords: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((domain.len() as u64).to_le_bytes());
    h.update(domain.as_bytes());
    for c in coords {
        h.update(c.to_le_bytes());
    }
    let digest = h.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn random_nonconstant_column(rng: &mut impl Rng, n_trials: usize) -> Vec<bool> {
    loop {
        let col: Vec<bool> = (0..n_trials).map(|_| rng.random()).collect();
        if col.iter().any(|&b| b) && col.iter().any(|&b| !b) {
            return col;
        }
    }
}

/// Uniform draw over non-constant columns whose ones-count lies within one
/// of `ci` or `cj`.
fn random_decoy_column(rng: &mut impl Rng, n_trials: usize, ci: usize, cj: usize) -> Vec<bool> {
    let counts: Vec<usize> = (1..n_trials)
        .filter(|&k| k.abs_diff(ci) <= 1 || k.abs_diff(cj) <= 1)
        .collect();
    let weights: Vec<f64> = counts.iter().map(|&k| binomial(n_trials, k)).collect();
    // ci itself is always admissible, so the weight vector is non-empty
    let pick = WeightedIndex::new(&weights).expect("non-empty admissible counts");
    let k = counts[pick.sample(rng)];
    let mut col = vec![false; n_trials];
    for idx in rand::seq::index::sample(rng, n_trials, k) {
        col[idx] = true;
    }
    col
}

/// Samples a uniquely solvable, balanced instance by rejection.
pub fn generate_instance(
    n_vars: usize,
    n_trials: usize,
    function: BooleanFunction,
    seed: u64,
    max_attempts: u32,
) -> Result<VatInstance, GenerationError> {
    generate_counted(n_vars, n_trials, function, seed, max_attempts).map(|(inst, _)| inst)
}

/// Like [`generate_instance`], also returning the number of attempts used.
pub fn generate_counted(
    n_vars: usize,
    n_trials: usize,
    function: BooleanFunction,
    seed: u64,
    max_attempts: u32,
) -> Result<(VatInstance, u32), GenerationError> {
    lower_bound_trials(n_vars)?;
    if n_trials < 1 {
        return Err(GenerationError::InvalidParameters("need at least 1 trial".into()));
    }
    if max_attempts < 1 {
        return Err(GenerationError::InvalidParameters("max_attempts must be >= 1".into()));
    }
    if function.class().is_none() {
        return Err(GenerationError::InvalidParameters(format!(
            "function `{}` does not depend on both arguments",
            function.name()
        )));
    }
    if n_trials < 2 {
        return Err(GenerationError::GenerationFailed {
            attempts: 0,
            reason: FailureReason::Infeasible,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hypotheses = choose2(n_vars);
    let truth_pair = all_pairs(n_vars)
        .nth(rng.random_range(0..hypotheses))
        .expect("index below pair count");
    let role_order = if rng.random() {
        RoleOrder::Forward
    } else {
        RoleOrder::Reversed
    };

    for attempt in 1..=max_attempts {
        let col_i = random_nonconstant_column(&mut rng, n_trials);
        let col_j = random_nonconstant_column(&mut rng, n_trials);
        let (ci, cj) = (
            col_i.iter().filter(|&&b| b).count(),
            col_j.iter().filter(|&&b| b).count(),
        );
        let columns: Vec<Vec<bool>> = (0..n_vars)
            .map(|v| {
                if v == truth_pair.lo() {
                    col_i.clone()
                } else if v == truth_pair.hi() {
                    col_j.clone()
                } else {
                    random_decoy_column(&mut rng, n_trials, ci, cj)
                }
            })
            .collect();
        let design = Design::from_columns(&columns).expect("equal column lengths");
        let (a, b) = match role_order {
            RoleOrder::Forward => (truth_pair.lo(), truth_pair.hi()),
            RoleOrder::Reversed => (truth_pair.hi(), truth_pair.lo()),
        };
        let outputs: Vec<bool> = design
            .rows()
            .iter()
            .map(|r| function.eval(r[a], r[b]))
            .collect();

        let unique = all_pairs(n_vars)
            .filter(|&p| p != truth_pair)
            .all(|p| !pair_consistent(&design, &outputs, &function, p));
        if unique {
            let instance = VatInstance {
                instance_id: format!("f{:02}-n{:02}-t{:02}-{:016x}", function.id().get(), n_vars, n_trials, seed),
                function,
                design,
                outputs,
                truth_pair,
                role_order,
                seed,
            };
            return Ok((instance, attempt));
        }
    }
    Err(GenerationError::GenerationFailed {
        attempts: max_attempts,
        reason: FailureReason::RejectionBudget,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TminEntry {
    pub t_min: usize,
    /// Attempts the successful generation needed at `t_min`.
    pub attempts: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TminError {
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error("no T up to {max_t} produced an instance for N={n_vars}, {function}")]
    Exhausted {
        n_vars: usize,
        function: String,
        max_t: usize,
    },
}

/// Smallest `T >= lower_bound_trials(N)` at which generation succeeds within
/// `attempts_per_t` attempts.
pub fn t_min(
    n_vars: usize,
    function: BooleanFunction,
    seed: u64,
    attempts_per_t: u32,
) -> Result<TminEntry, TminError> {
    let lb = lower_bound_trials(n_vars)?;
    for t in lb..=lb + TMIN_SEARCH_SPAN {
        let t_seed = derive_seed(seed, "tmin-probe", &[t as u64]);
        match generate_counted(n_vars, t, function, t_seed, attempts_per_t) {
            Ok((_, attempts)) => return Ok(TminEntry { t_min: t, attempts }),
            Err(GenerationError::GenerationFailed { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(TminError::Exhausted {
        n_vars,
        function: function.name().to_string(),
        max_t: lb + TMIN_SEARCH_SPAN,
    })
}

/// `T_min` per `(function, N)`, computed once and reused.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TminTable {
    entries: BTreeMap<(FunctionId, usize), TminEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TminRow {
    function_id: u8,
    #[serde(rename = "N")]
    n_vars: usize,
    t_min: usize,
    attempts: u32,
}

impl TminTable {
    /// Computes every `(function, N)` cell in parallel. Each cell seeds its own search.
    pub fn compute(
        functions: &[BooleanFunction],
        n_values: &[usize],
        master_seed: u64,
        attempts_per_t: u32,
    ) -> Result<Self, TminError> {
        let cells: Vec<(BooleanFunction, usize)> = functions
            .iter()
            .flat_map(|&f| n_values.iter().map(move |&n| (f, n)))
            .collect();
        let entries = cells
            .par_iter()
            .map(|&(f, n)| {
                let seed = derive_seed(master_seed, "tmin", &[u64::from(f.id().get()), n as u64]);
                t_min(n, f, seed, attempts_per_t).map(|e| ((f.id(), n), e))
            })
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        Ok(TminTable { entries })
    }

    pub fn insert(&mut self, function: FunctionId, n_vars: usize, entry: TminEntry) {
        self.entries.insert((function, n_vars), entry);
    }

    pub fn get(&self, function: FunctionId, n_vars: usize) -> Option<TminEntry> {
        self.entries.get(&(function, n_vars)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (FunctionId, usize, TminEntry)> + '_ {
        self.entries.iter().map(|(&(f, n), &e)| (f, n, e))
    }

    /// Largest `t_min` over functions, per `N`.
    pub fn per_n_max(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for (&(_, n), e) in &self.entries {
            let slot = out.entry(n).or_insert(0);
            *slot = (*slot).max(e.t_min);
        }
        out
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        for (f, n, e) in self.iter() {
            wtr.serialize(TminRow {
                function_id: f.get(),
                n_vars: n,
                t_min: e.t_min,
                attempts: e.attempts,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self, csv::Error> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut table = TminTable::default();
        for row in rdr.deserialize() {
            let row: TminRow = row?;
            let f = FunctionId::new(row.function_id).ok_or_else(|| {
                csv::Error::from(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("function id {} out of range", row.function_id),
                ))
            })?;
            table.insert(
                f,
                row.n_vars,
                TminEntry {
                    t_min: row.t_min,
                    attempts: row.attempts,
                },
            );
        }
        Ok(table)
    }
}

/// Which `T_min` a grid cell builds its trial counts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TminConvention {
    #[default]
    PerFunction,
    /// Maximum over all requested functions at the same `N`.
    PerNMax,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterialsGrid {
    pub n_values: Vec<usize>,
    pub t_offsets: Vec<usize>,
    pub samples_per_cell: usize,
    pub function_ids: Vec<u8>,
}

impl Default for MaterialsGrid {
    fn default() -> Self {
        MaterialsGrid {
            n_values: vec![3, 4, 5, 6, 7, 8, 10, 12, 14, 16],
            t_offsets: vec![0, 1, 2, 3, 4, 5],
            samples_per_cell: 5,
            function_ids: nontrivial_functions().iter().map(|f| f.id().get()).collect(),
        }
    }
}

impl MaterialsGrid {
    pub fn cell_count(&self) -> usize {
        self.function_ids.len() * self.n_values.len() * self.t_offsets.len() * self.samples_per_cell
    }

    pub fn functions(&self) -> Result<Vec<BooleanFunction>, GenerationError> {
        self.function_ids
            .iter()
            .map(|&id| {
                FunctionId::new(id)
                    .map(FunctionId::function)
                    .filter(|f| f.class().is_some())
                    .ok_or_else(|| {
                        GenerationError::InvalidParameters(format!("function id {id} is not a grid function"))
                    })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub function_id: u8,
    pub n_vars: usize,
    pub offset: usize,
    pub replicate: usize,
}

impl Cell {
    pub fn instance_id(&self) -> String {
        format!(
            "f{:02}-n{:02}-o{}-r{}",
            self.function_id, self.n_vars, self.offset, self.replicate
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub cell: Cell,
    pub n_trials: usize,
    pub attempts: u32,
    pub failure: Option<FailureReason>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterialsReport {
    pub instances: Vec<VatInstance>,
    pub cells: Vec<CellOutcome>,
}

impl MaterialsReport {
    pub fn failures(&self) -> impl Iterator<Item = &CellOutcome> {
        self.cells.iter().filter(|c| c.failure.is_some())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaterialsError {
    #[error(transparent)]
    Parameters(#[from] GenerationError),
    #[error(transparent)]
    Tmin(#[from] TminError),
    #[error("missing T_min for function {function_id}, N={n_vars}")]
    MissingTmin { function_id: u8, n_vars: usize },
    #[error("cell {} failed after {attempts} attempts", cell.instance_id())]
    CellFailed { cell: Cell, attempts: u32 },
}

pub fn grid_cells(grid: &MaterialsGrid) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(grid.cell_count());
    for &function_id in &grid.function_ids {
        for &n_vars in &grid.n_values {
            for &offset in &grid.t_offsets {
                for replicate in 0..grid.samples_per_cell {
                    cells.push(Cell {
                        function_id,
                        n_vars,
                        offset,
                        replicate,
                    });
                }
            }
        }
    }
    cells
}

/// Generates every grid cell, recording failures instead of stopping.
pub fn generate_materials_report(
    grid: &MaterialsGrid,
    master_seed: u64,
    tmin: &TminTable,
    convention: TminConvention,
    max_attempts: u32,
) -> Result<MaterialsReport, MaterialsError> {
    let functions = grid.functions()?;
    for &n in &grid.n_values {
        lower_bound_trials(n)?;
        for f in &functions {
            if tmin.get(f.id(), n).is_none() {
                return Err(MaterialsError::MissingTmin {
                    function_id: f.id().get(),
                    n_vars: n,
                });
            }
        }
    }
    let per_n_max: BTreeMap<usize, usize> = grid
        .n_values
        .iter()
        .map(|&n| {
            let m = functions
                .iter()
                .filter_map(|f| tmin.get(f.id(), n))
                .map(|e| e.t_min)
                .max()
                .unwrap_or(0);
            (n, m)
        })
        .collect();

    let results: Vec<(CellOutcome, Option<VatInstance>)> = grid_cells(grid)
        .into_par_iter()
        .map(|cell| {
            let f = FunctionId::new(cell.function_id).expect("validated").function();
            let base = match convention {
                TminConvention::PerFunction => tmin.get(f.id(), cell.n_vars).expect("validated").t_min,
                TminConvention::PerNMax => per_n_max[&cell.n_vars],
            };
            let n_trials = base + cell.offset;
            let seed = derive_seed(
                master_seed,
                "instance",
                &[
                    u64::from(cell.function_id),
                    cell.n_vars as u64,
                    cell.offset as u64,
                    cell.replicate as u64,
                ],
            );
            match generate_counted(cell.n_vars, n_trials, f, seed, max_attempts) {
                Ok((mut inst, attempts)) => {
                    inst.instance_id = cell.instance_id();
                    let outcome = CellOutcome {
                        cell,
                        n_trials,
                        attempts,
                        failure: None,
                    };
                    (outcome, Some(inst))
                }
                Err(GenerationError::GenerationFailed { attempts, reason }) => (
                    CellOutcome {
                        cell,
                        n_trials,
                        attempts,
                        failure: Some(reason),
                    },
                    None,
                ),
                Err(e @ GenerationError::InvalidParameters(_)) => panic!("validated parameters rejected: {e}"),
            }
        })
        .collect();

    let mut report = MaterialsReport {
        instances: Vec::with_capacity(results.len()),
        cells: Vec::with_capacity(results.len()),
    };
    for (outcome, inst) in results {
        report.cells.push(outcome);
        report.instances.extend(inst);
    }
    Ok(report)
}

/// Strict variant: the first failing cell aborts generation.
pub fn generate_materials(
    grid: &MaterialsGrid,
    master_seed: u64,
    max_attempts: u32,
) -> Result<Vec<VatInstance>, MaterialsError> {
    let tmin = TminTable::compute(&grid.functions()?, &grid.n_values, master_seed, max_attempts)?;
    let report = generate_materials_report(grid, master_seed, &tmin, TminConvention::PerFunction, max_attempts)?;
    if let Some(fail) = report.failures().next() {
        return Err(MaterialsError::CellFailed {
            cell: fail.cell,
            attempts: fail.attempts,
        });
    }
    Ok(report.instances)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(name: &str) -> BooleanFunction {
        name.parse().unwrap()
    }

    fn worked_design() -> Design {
        Design::from_columns(&[
            vec![true, true, false],
            vec![true, false, true],
            vec![true, true, true],
        ])
        .unwrap()
    }

    #[test]
    fn consistent_pairs_worked_example() {
        let d = worked_design();
        let got = check_consistent_pairs(&d, &[true, false, false], &f("AND")).unwrap();
        assert_eq!(got, BTreeSet::from([Pair::new(0, 1).unwrap()]));
        let none = check_consistent_pairs(&d, &[true, true, true], &f("AND")).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn zero_trials_all_pairs_consistent() {
        let d = Design::new(5, vec![]).unwrap();
        let got = check_consistent_pairs(&d, &[], &f("XOR")).unwrap();
        assert_eq!(got.len(), 10);
    }

    #[test]
    fn dimension_mismatch() {
        let d = worked_design();
        assert!(matches!(
            check_consistent_pairs(&d, &[true], &f("AND")),
            Err(DesignError::OutputLength { .. })
        ));
    }

    #[test]
    fn asymmetric_pair_checks_both_orderings() {
        // V1 AND NOT V0 reproduces Y; V0 AND NOT V1 does not
        let d = Design::from_columns(&[vec![false, true, false], vec![true, true, false]]).unwrap();
        let y = [true, false, false];
        let got = check_consistent_pairs(&d, &y, &f("A AND NOT B")).unwrap();
        assert_eq!(got.len(), 1);
    }

    #[test]
    fn lower_bounds() {
        assert_eq!(lower_bound_trials(3).unwrap(), 2);
        assert_eq!(lower_bound_trials(4).unwrap(), 3);
        assert_eq!(lower_bound_trials(16).unwrap(), 7);
        assert!(lower_bound_trials(2).is_err());
        for n in 3..40 {
            let t = lower_bound_trials(n).unwrap();
            assert!(1usize << t >= choose2(n));
            assert!(1usize << (t - 1) < choose2(n));
        }
    }

    #[test]
    fn single_trial_cannot_generate() {
        let err = generate_instance(3, 1, f("XOR"), 7, 100).unwrap_err();
        assert!(matches!(err, GenerationError::GenerationFailed { .. }));
    }

    #[test]
    fn rejects_trivial_function() {
        let err = generate_instance(4, 4, f("A"), 7, 100).unwrap_err();
        assert!(matches!(err, GenerationError::InvalidParameters(_)));
    }

    #[test]
    fn generated_instance_is_valid() {
        let inst = generate_instance(3, 2, f("AND"), 11, DEFAULT_MAX_ATTEMPTS).unwrap();
        inst.validate().unwrap();
        let consistent = check_consistent_pairs(&inst.design, &inst.outputs, &inst.function).unwrap();
        assert_eq!(consistent, BTreeSet::from([inst.truth_pair]));
    }

    #[test]
    fn large_instance_or_clean_failure() {
        match generate_instance(16, 7, f("OR"), 1, DEFAULT_MAX_ATTEMPTS) {
            Ok(inst) => {
                inst.validate().unwrap();
                assert_eq!(inst.n_trials(), 7);
            }
            Err(e) => assert!(matches!(e, GenerationError::GenerationFailed { .. })),
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_instance(8, 6, f("A AND NOT B"), 99, DEFAULT_MAX_ATTEMPTS).unwrap();
        let b = generate_instance(8, 6, f("A AND NOT B"), 99, DEFAULT_MAX_ATTEMPTS).unwrap();
        assert_eq!(a, b);
        let c = generate_instance(8, 6, f("A AND NOT B"), 100, DEFAULT_MAX_ATTEMPTS).unwrap();
        assert_ne!(a.design, c.design);
    }

    #[test]
    fn tmin_small_n() {
        for name in ["AND", "XOR"] {
            let e = t_min(3, f(name), 5, DEFAULT_MAX_ATTEMPTS).unwrap();
            assert_eq!(e.t_min, 2, "{name}");
        }
    }

    #[test]
    fn tmin_table_csv_roundtrip() {
        let mut t = TminTable::default();
        t.insert(FunctionId::new(6).unwrap(), 10, TminEntry { t_min: 7, attempts: 12 });
        t.insert(FunctionId::new(1).unwrap(), 10, TminEntry { t_min: 8, attempts: 3 });
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("function_id,N,t_min,attempts\n"));
        assert_eq!(TminTable::read_csv(buf.as_slice()).unwrap(), t);
        assert_eq!(t.per_n_max()[&10], 8);
    }

    #[test]
    fn instance_record_roundtrip() {
        let inst = generate_instance(5, 5, f("NOT A OR B"), 3, DEFAULT_MAX_ATTEMPTS).unwrap();
        let line = serde_json::to_string(&inst).unwrap();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        for key in [
            "instance_id",
            "n_vars",
            "n_trials",
            "function_id",
            "function_name",
            "design",
            "outputs",
            "truth_pair",
            "role_order",
            "seed",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["function_name"], "NOT A OR B");
        let back: VatInstance = serde_json::from_str(&line).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn record_rejects_bad_dimensions() {
        let line = r#"{"instance_id":"x","n_vars":3,"n_trials":2,"function_id":1,"function_name":"A AND B","design":["011","10"],"outputs":"01","truth_pair":[0,1],"role_order":"forward","seed":0}"#;
        assert!(serde_json::from_str::<VatInstance>(line).is_err());
        let line = r#"{"instance_id":"x","n_vars":3,"n_trials":2,"function_id":1,"function_name":"A AND B","design":["011","102"],"outputs":"01","truth_pair":[0,1],"role_order":"forward","seed":0}"#;
        assert!(serde_json::from_str::<VatInstance>(line).is_err());
    }

    #[test]
    fn small_grid_coverage() {
        let grid = MaterialsGrid {
            n_values: vec![3, 5],
            t_offsets: vec![0, 2],
            samples_per_cell: 2,
            function_ids: vec![1, 6],
        };
        let insts = generate_materials(&grid, 42, DEFAULT_MAX_ATTEMPTS).unwrap();
        assert_eq!(insts.len(), grid.cell_count());
        let ids: BTreeSet<String> = insts.iter().map(|i| i.instance_id.clone()).collect();
        assert_eq!(ids.len(), insts.len());
        for inst in &insts {
            inst.validate().unwrap();
        }
        assert_eq!(insts, generate_materials(&grid, 42, DEFAULT_MAX_ATTEMPTS).unwrap());
    }

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let base = derive_seed(1, "instance", &[1, 2, 3, 4]);
        assert_ne!(base, derive_seed(2, "instance", &[1, 2, 3, 4]));
        assert_ne!(base, derive_seed(1, "tmin", &[1, 2, 3, 4]));
        assert_ne!(base, derive_seed(1, "instance", &[1, 2, 4, 3]));
    }
}
