use std::fs;

use blockmt::io::fmt_f64;
use blockmt::mtp::{adjust, reject, PValueVector};
use blockmt::stats::normal_sf;
use blockmt::ProcedureKind;
use serde_json::json;

use super::{check_alpha, Context};
use crate::args::{AdjustArgs, Scale};
use crate::output::{digest_file, OutputDir};
use crate::{usage, CliError, CliResult};

struct Entry {
    line: usize,
    raw: f64,
    p: f64,
}

fn looks_like_header(line: &str) -> bool {
    line.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && line.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        && line.parse::<f64>().is_err()
}

fn parse_input(text: &str, scale: Scale) -> CliResult<Vec<Entry>> {
    let mut entries = Vec::new();
    let mut first = true;
    for (i, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let is_first = std::mem::replace(&mut first, false);
        if is_first && looks_like_header(line) {
            continue;
        }
        let fail = |detail: String| usage(format!("input line {}: {detail}", i + 1));
        let value: f64 = line
            .parse()
            .map_err(|_| fail(format!("'{line}' is not a number")))?;
        let p = match scale {
            Scale::P if (0.0..=1.0).contains(&value) => value,
            Scale::P => return Err(fail(format!("p-value {value} outside [0, 1]"))),
            Scale::Z if value.is_finite() => normal_sf(value).map_err(|e| fail(e.to_string()))?,
            Scale::Z => return Err(fail(format!("z score {value} is not finite"))),
        };
        entries.push(Entry {
            line: i + 1,
            raw: value,
            p,
        });
    }
    if entries.is_empty() {
        return Err(usage("input contains no values"));
    }
    Ok(entries)
}

pub(crate) fn run(args: &AdjustArgs, ctx: &Context) -> CliResult<String> {
    let method: ProcedureKind = args.method.parse().map_err(|_| {
        usage(format!("--method: unknown procedure '{}'", args.method))
    })?;
    check_alpha(args.alpha)?;
    let from_file = args.input.as_ref().filter(|p| p.as_os_str() != "-");
    let text = match from_file {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
        None => ctx.stdin.clone().unwrap_or_default(),
    };
    let entries = parse_input(&text, args.scale)?;
    let p: Vec<f64> = entries.iter().map(|e| e.p).collect();
    let adjusted = adjust(&p, method)?;
    let rejected = reject(&PValueVector::new(p)?, method, args.alpha)?;
    let mut flags = vec![false; entries.len()];
    for &i in &rejected {
        flags[i] = true;
    }

    let mut out = String::from(match args.scale {
        Scale::P => "line,p,adjusted,rejected\n",
        Scale::Z => "line,z,p,adjusted,rejected\n",
    });
    for ((e, adj), rej) in entries.iter().zip(&adjusted).zip(&flags) {
        let mut row = vec![e.line.to_string()];
        if args.scale == Scale::Z {
            row.push(fmt_f64(e.raw));
        }
        row.extend([fmt_f64(e.p), fmt_f64(*adj), rej.to_string()]);
        out.push_str(&row.join(","));
        out.push('\n');
    }

    if let Some(dir) = &args.out {
        let mut files = OutputDir::create(dir)?;
        files.write("adjust.csv", out.as_bytes())?;
        let mut inputs = Vec::new();
        if let Some(path) = from_file {
            inputs.push(digest_file(path)?);
        }
        if let Some(cfg) = &ctx.config {
            inputs.push(digest_file(cfg)?);
        }
        let params = json!({
            "input": from_file.map(|p| p.display().to_string()),
            "method": method,
            "alpha": args.alpha,
            "scale": match args.scale { Scale::P => "p", Scale::Z => "z" },
            "values": entries.len(),
            "rejected": rejected.len(),
        });
        files.finish("adjust", params, None, inputs, ctx.timestamp)?;
    }
    Ok(out)
}
