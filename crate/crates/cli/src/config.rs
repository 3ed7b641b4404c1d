use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vat_core::eval::{EndpointConfig, JudgeTemplate, PromptMode, PromptTemplate};
use vat_core::instance::{MaterialsGrid, TminConvention, DEFAULT_MASTER_SEED, DEFAULT_MAX_ATTEMPTS};
use vat_core::logic::BooleanFunction;
use vat_core::stats::CostModel;

use crate::error::{CliError, CliResult};

pub const RESOLVED_CONFIG: &str = "config.resolved";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MockKind {
    /// Solves every prompt exactly.
    Oracle,
    /// Solves exactly except on XOR, where it names a wrong pair.
    WrongOnXor,
    /// Replies with the prompt text.
    Echo,
}

/// Everything a run depends on. Written to `config.resolved` in the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub master_seed: u64,
    pub grid: MaterialsGrid,
    pub max_attempts: u32,
    pub tmin_convention: TminConvention,
    pub allow_holes: bool,
    pub prompt_mode: PromptMode,
    pub prompt_template: PromptTemplate,
    pub judge_template: JudgeTemplate,
    pub endpoint: Option<EndpointConfig>,
    pub judge_endpoint: Option<EndpointConfig>,
    pub mock: Option<MockKind>,
    pub cost: CostModel,
    pub rho_log: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: DEFAULT_MASTER_SEED,
            grid: MaterialsGrid::default(),
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            tmin_convention: TminConvention::PerFunction,
            allow_holes: false,
            prompt_mode: PromptMode::Reasoning,
            prompt_template: PromptTemplate::default(),
            judge_template: JudgeTemplate::default(),
            endpoint: None,
            judge_endpoint: None,
            mock: None,
            cost: CostModel {
                c_check: 1.0,
                c_slot: 0.1,
            },
            rho_log: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        let g = &self.grid;
        if g.n_values.is_empty() || g.t_offsets.is_empty() || g.samples_per_cell == 0 || g.function_ids.is_empty() {
            return Err(CliError::Config("grid has an empty dimension".into()));
        }
        if let Some(&n) = g.n_values.iter().find(|&&n| n < 3) {
            return Err(CliError::Config(format!("grid N={n} is below 3")));
        }
        g.functions().map_err(|e| CliError::Config(e.to_string()))?;
        if self.max_attempts == 0 {
            return Err(CliError::Config("max_attempts must be positive".into()));
        }
        self.prompt_template
            .validate()
            .map_err(|e| CliError::Config(format!("prompt template: {e}")))?;
        self.judge_template
            .validate()
            .map_err(|e| CliError::Config(format!("judge template: {e}")))?;
        for ep in self.endpoint.iter().chain(&self.judge_endpoint) {
            ep.validate().map_err(CliError::Config)?;
        }
        CostModel::new(self.cost.c_check, self.cost.c_slot).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn write_resolved(&self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(dir.join(RESOLVED_CONFIG), text)?;
        Ok(())
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::Config(format!("grid {key}: cannot parse `{s}`")))
        })
        .collect()
}

/// Applies a grid override. Accepts a path to a JSON `MaterialsGrid`, or
/// `key=value` clauses separated by `;` with keys `n`, `offsets`, `samples`.
pub fn apply_grid_spec(grid: &mut MaterialsGrid, spec: &str) -> CliResult<()> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path)?;
        *grid = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{spec}: {e}")))?;
        return Ok(());
    }
    for clause in spec.split(';').map(str::trim).filter(|c| !c.is_empty()) {
        let (key, value) = clause
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("grid clause `{clause}` lacks `=`")))?;
        match key.trim() {
            "n" | "N" => grid.n_values = parse_list(key, value)?,
            "offsets" => grid.t_offsets = parse_list(key, value)?,
            "samples" => {
                grid.samples_per_cell = value
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("grid samples: cannot parse `{value}`")))?
            }
            other => return Err(CliError::Config(format!("unknown grid key `{other}`"))),
        }
    }
    Ok(())
}

/// Function ids from a comma-separated list of names or ids.
pub fn parse_functions(list: &str) -> CliResult<Vec<u8>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let f: BooleanFunction = s.parse().map_err(|e| CliError::Config(format!("{e}")))?;
            if f.class().is_none() {
                return Err(CliError::Config(format!("{} is not a two-variable function", f.name())));
            }
            Ok(f.id().get())
        })
        .collect()
}

pub fn parse_cost(spec: &str) -> CliResult<CostModel> {
    let (a, b) = spec
        .split_once(',')
        .ok_or_else(|| CliError::Config(format!("--cost expects c_check,c_slot, got `{spec}`")))?;
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Config(format!("--cost: `{s}` is not a number")))
    };
    CostModel::new(num(a)?, num(b)?).map_err(|e| CliError::Config(e.to_string()))
}

pub fn load_endpoint(path: &Path) -> CliResult<EndpointConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
