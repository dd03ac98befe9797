use std::fs;

use revkit::logic::{models, parse_formula, LogicError, ModelSet};
use revkit::modeltheory::{ModelTheoryError, RelationalStructure};
use revkit::mso::MsoError;
use revkit::order::{element_set, ElementSet, OrderError, PartialPreorder};
use revkit::postulate::{PostulateError, SearchMode};
use revkit::revision::{FaithfulStructure, Labeling, OperatorTable, Reviser, RevisionError, TableJson, Verification};
use thiserror::Error;

use crate::{OperatorArgs, SearchArgs, StructureArgs, VerifyArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("resource cap exceeded: {0}")]
    Cap(String),
}

impl CliError {
    /// 2 for usage and input errors, 3 for exceeded caps.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Cap(_) => 3,
        }
    }
}

macro_rules! input_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        }
    )*};
}
input_error!(LogicError, OrderError, serde_json::Error);

impl From<RevisionError> for CliError {
    fn from(e: RevisionError) -> Self {
        match e {
            RevisionError::TableTooLarge(_) => CliError::Cap(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<PostulateError> for CliError {
    fn from(e: PostulateError) -> Self {
        match e {
            PostulateError::SearchSpaceTooLarge { .. } => CliError::Cap(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<MsoError> for CliError {
    fn from(e: MsoError) -> Self {
        match e {
            MsoError::SearchSpaceTooLarge { .. } => CliError::Cap(e.to_string()),
            MsoError::Postulate(p) => p.into(),
            MsoError::Revision(r) => r.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ModelTheoryError> for CliError {
    fn from(e: ModelTheoryError) -> Self {
        match e {
            ModelTheoryError::EfCapExceeded { .. } | ModelTheoryError::CanonicalizationCap { .. } => {
                CliError::Cap(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

pub fn read_file(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{path}: {e}")))
}

pub fn load_order(path: &str) -> Result<PartialPreorder, CliError> {
    Ok(PartialPreorder::from_json_str(&read_file(path)?)?)
}

/// A colored graph file, or an order file read as a structure over `<=`.
pub fn load_structure(path: &str) -> Result<RelationalStructure, CliError> {
    let text = read_file(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("leq").is_some() {
        Ok(RelationalStructure::from_order(&PartialPreorder::from_json_str(&text)?))
    } else {
        Ok(RelationalStructure::from_json_str(&text)?)
    }
}

/// Number of variables for an order with `2^n` elements.
pub fn vars_of(order: &PartialPreorder) -> Result<usize, CliError> {
    let size = order.size();
    if !size.is_power_of_two() || size < 2 {
        return Err(CliError::Input(format!(
            "order has {size} elements, not 2^n with n >= 1"
        )));
    }
    Ok(size.trailing_zeros() as usize)
}

pub fn parse_int_list(text: &str) -> Result<Vec<u64>, CliError> {
    text.trim()
        .trim_start_matches(['{', '['])
        .trim_end_matches(['}', ']'])
        .split([',', ' '])
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Input(format!("`{t}` is not a non-negative integer")))
        })
        .collect()
}

fn looks_like_list(text: &str) -> bool {
    text.trim().chars().all(|c| c.is_ascii_digit() || " ,{}[]".contains(c))
}

/// A model set given as an integer list (`{1, 2}`, `1,2`, `{}`) or as a formula.
pub fn parse_model_set(text: &str, n: usize) -> Result<ModelSet, CliError> {
    if looks_like_list(text) {
        let bits = parse_int_list(text)?;
        Ok(ModelSet::from_assignments(n, bits.into_iter().map(|b| b as u32))?)
    } else {
        Ok(models(&parse_formula(text, n)?, n))
    }
}

/// `;`-separated model sets.
pub fn parse_model_sets(text: &str, n: usize) -> Result<Vec<ModelSet>, CliError> {
    text.split(';').map(|part| parse_model_set(part, n)).collect()
}

/// `;`-separated element lists.
pub fn parse_element_sets(text: &str, size: usize) -> Result<Vec<ElementSet>, CliError> {
    text.split(';')
        .map(|part| {
            let items = parse_int_list(part)?;
            if let Some(&bad) = items.iter().find(|&&v| v as usize >= size) {
                return Err(CliError::Input(format!("element {bad} out of range 0..{size}")));
            }
            Ok(element_set(size, items.into_iter().map(|v| v as usize)))
        })
        .collect()
}

pub fn parse_labeling(text: Option<&str>, n: usize) -> Result<Labeling, CliError> {
    match text {
        None => Ok(Labeling::identity(n)),
        Some(t) => {
            let bits = parse_int_list(t)?;
            Ok(Labeling::new(n, bits.into_iter().map(|b| b as u32).collect())?)
        }
    }
}

pub fn load_structure_args(args: &StructureArgs) -> Result<FaithfulStructure, CliError> {
    faithful(&args.order, args.labeling.as_deref(), args.kb.as_deref())
}

fn faithful(path: &str, labeling: Option<&str>, kb: Option<&str>) -> Result<FaithfulStructure, CliError> {
    let order = load_order(path)?;
    let n = vars_of(&order)?;
    let labeling = parse_labeling(labeling, n)?;
    Ok(match kb {
        None => FaithfulStructure::from_regular(order, labeling)?,
        Some(text) => FaithfulStructure::new(order, labeling, parse_model_set(text, n)?)?,
    })
}

pub fn load_table(path: &str) -> Result<OperatorTable, CliError> {
    let json: TableJson = serde_json::from_str(&read_file(path)?)?;
    Ok(OperatorTable::from_json(&json)?)
}

/// An operator with the knowledge base it revises.
pub enum Operator {
    Structure(FaithfulStructure),
    Table(OperatorTable, ModelSet),
}

impl Operator {
    pub fn reviser(&self) -> &dyn Reviser {
        match self {
            Operator::Structure(f) => f,
            Operator::Table(t, _) => t,
        }
    }

    pub fn kb(&self) -> &ModelSet {
        match self {
            Operator::Structure(f) => f.kb(),
            Operator::Table(_, kb) => kb,
        }
    }
}

/// With `--table` and no `--kb`, the knowledge base is the revision by the
/// full model set.
pub fn load_operator(args: &OperatorArgs) -> Result<Operator, CliError> {
    match (&args.order, &args.table) {
        (Some(order), _) => Ok(Operator::Structure(faithful(
            order,
            args.labeling.as_deref(),
            args.kb.as_deref(),
        )?)),
        (None, Some(table)) => {
            let table = load_table(table)?;
            let n = table.vars();
            let kb = match &args.kb {
                Some(text) => parse_model_set(text, n)?,
                None => table.revise(&ModelSet::full(n)),
            };
            Ok(Operator::Table(table, kb))
        }
        (None, None) => Err(CliError::Usage("one of --order or --table is required".into())),
    }
}

pub fn search_mode(args: &SearchArgs) -> Result<SearchMode, CliError> {
    match (args.samples, args.seed) {
        (Some(count), Some(seed)) => Ok(SearchMode::Sample { count, seed }),
        (Some(_), None) => Err(CliError::Usage("--samples requires --seed".into())),
        (None, _) => Ok(SearchMode::Exhaustive),
    }
}

pub fn verification(args: &VerifyArgs) -> Result<Verification, CliError> {
    match args.verify.as_str() {
        "full" => Ok(Verification::Full),
        "pairs" => Ok(Verification::PairsOnly),
        "sampled" => match (args.samples, args.seed) {
            (Some(count), Some(seed)) => Ok(Verification::Sampled { count, seed }),
            _ => Err(CliError::Usage("--verify sampled requires --samples and --seed".into())),
        },
        other => Err(CliError::Usage(format!(
            "unknown verification `{other}` (full, pairs, sampled)"
        ))),
    }
}
