//! Grid configuration files.
//!
//! Flat `key = value` lines, optionally under an `[experiment]` section.
//! Blank lines and lines starting with `#` or `;` are ignored. Lists are
//! comma-separated.
//!
//! ```text
//! family = poisson
//! [experiment]
//! M = 20
//! rho = 5
//! s = 20, 40, 60, 80
//! T = 100, 178, 316, 400
//! trials = 20
//! lambda = paper        # paper | thm2 | <number>
//! burn_in = 0
//! seed = 0
//! structure = random    # random | block_diagonal
//! value_low = -1
//! value_high = 0
//! ```
//!
//! Keys not listed keep the defaults of [`ExperimentGrid::default`].

use crate::error::{GlarError, Result};
use crate::experiments::{ExperimentGrid, LambdaRule};
use std::path::Path;
use std::str::FromStr;

pub const KEYS: [&str; 12] =
    ["family", "M", "rho", "s", "T", "trials", "lambda", "burn_in", "seed", "structure", "value_low", "value_high"];

fn parse_one<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| GlarError::ConfigParse {
        line,
        message: format!("cannot parse `{}` for key `{key}`", value.trim()),
    })
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').filter(|v| !v.trim().is_empty()).map(|v| parse_one(line, key, v)).collect()
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

pub fn parse_grid_config(text: &str) -> Result<ExperimentGrid> {
    let mut grid = ExperimentGrid::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        if let Some(section) = content.strip_prefix('[') {
            let name = section.strip_suffix(']').ok_or_else(|| GlarError::ConfigParse {
                line,
                message: format!("unterminated section header `{content}`"),
            })?;
            if name.trim() != "experiment" {
                return Err(GlarError::ConfigParse { line, message: format!("unknown section `{}`", name.trim()) });
            }
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| GlarError::ConfigParse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        match key {
            "family" => grid.family = parse_one(line, key, value)?,
            "M" => grid.dim = parse_one(line, key, value)?,
            "rho" => grid.rho = parse_one(line, key, value)?,
            "s" => grid.s_values = parse_list(line, key, value)?,
            "T" => grid.t_values = parse_list(line, key, value)?,
            "trials" => grid.trials = parse_one(line, key, value)?,
            "lambda" => {
                grid.lambda_rule = LambdaRule::parse(value).map_err(|message| GlarError::ConfigParse { line, message })?
            }
            "burn_in" => grid.burn_in = parse_one(line, key, value)?,
            "seed" => grid.base_seed = parse_one(line, key, value)?,
            "structure" => grid.structure = parse_one(line, key, value)?,
            "value_low" => grid.value_low = parse_one(line, key, value)?,
            "value_high" => grid.value_high = parse_one(line, key, value)?,
            other => {
                return Err(GlarError::ConfigParse {
                    line,
                    message: format!("unknown key `{other}` (expected one of {})", KEYS.join(", ")),
                })
            }
        }
    }
    grid.validate()?;
    Ok(grid)
}

pub fn load_grid_config(path: &Path) -> Result<ExperimentGrid> {
    parse_grid_config(&std::fs::read_to_string(path)?)
}
