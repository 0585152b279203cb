use std::path::PathBuf;
use std::str::FromStr;

use blockmt::ProcedureKind;

use crate::{usage, CliResult};

pub(crate) mod adjust;
pub(crate) mod connectome;
pub(crate) mod example2;
pub(crate) mod generate;
pub(crate) mod sweep;

pub(crate) struct Context {
    pub timestamp: u64,
    pub config: Option<PathBuf>,
    /// Standard input, read up front for commands that use it.
    pub stdin: Option<String>,
}

/// Parses a comma-separated list; empty items are errors.
pub(crate) fn parse_list<T: FromStr>(text: &str, flag: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            item.parse()
                .map_err(|_| usage(format!("--{flag}: cannot parse '{item}'")))
        })
        .collect()
}

pub(crate) fn parse_methods(text: &str) -> CliResult<Vec<ProcedureKind>> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(ProcedureKind::ALL.to_vec());
    }
    text.split(',')
        .map(|m| {
            m.trim()
                .parse::<ProcedureKind>()
                .map_err(|_| usage(format!("--method: unknown procedure '{}'", m.trim())))
        })
        .collect()
}

pub(crate) fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `a/b` with the exact counts, `0` when nothing was counted against.
pub(crate) fn ratio(num: usize, den: usize) -> String {
    if num == 0 {
        "0".to_string()
    } else {
        format!("{num}/{den}")
    }
}
