use std::fmt::Write as _;

use blockmt::io::{fmt_f64, fmt_opt};
use blockmt::simulator::{
    crossover_fraction_on, power_sweep, Figure, PartialModel, Strategy, SweepGrid, SweepResult,
};
use blockmt::{Execution, ProcedureKind};

use super::{check_alpha, parse_list, Context};
use crate::args::SweepArgs;
use crate::output::{digest_file, OutputDir};
use crate::{usage, CliResult};

pub(crate) const CROSSOVER_CSV_HEADER: &str =
    "delta,b,bwa_method,srw_method,mc_crossover,analytic_crossover";

fn parse_pairs(text: &str) -> CliResult<Vec<(Strategy, ProcedureKind)>> {
    text.split(',')
        .map(|item| {
            let (s, m) = item.trim().split_once(':').ok_or_else(|| {
                usage(format!("--pairs: expected strategy:method, got '{}'", item.trim()))
            })?;
            let strategy: Strategy = s.parse().map_err(|_| usage(format!("--pairs: unknown strategy '{s}'")))?;
            let method: ProcedureKind = m.parse().map_err(|_| usage(format!("--pairs: unknown procedure '{m}'")))?;
            Ok((strategy, method))
        })
        .collect()
}

pub(crate) fn build_grid(args: &SweepArgs) -> CliResult<SweepGrid> {
    let mut grid = match &args.figure {
        Some(f) => f.parse::<Figure>()?.grid(),
        None => SweepGrid::default(),
    };
    if let Some(v) = args.m_total {
        grid.m_total = v;
    }
    if let Some(v) = args.affected {
        grid.affected_regions = v;
    }
    if let Some(v) = &args.deltas {
        grid.deltas = parse_list(v, "deltas")?;
    }
    if let Some(v) = &args.block_sizes {
        grid.block_sizes = parse_list(v, "block-sizes")?;
    }
    if let Some(v) = &args.fractions {
        grid.fractions = if v.trim().eq_ignore_ascii_case("none") {
            None
        } else {
            Some(parse_list(v, "fractions")?)
        };
    }
    if let Some(v) = args.partial_divisor {
        grid.partial_divisor = v;
    }
    if let Some(v) = &args.pairs {
        grid.pairs = parse_pairs(v)?;
    }
    if let Some(v) = &args.partial_model {
        grid.partial_model = v.parse::<PartialModel>()?;
    }
    if let Some(v) = args.mu0 {
        grid.mu0 = v;
    }
    if let Some(v) = args.sigma0 {
        grid.sigma0 = v;
    }
    if let Some(v) = args.sigma1 {
        grid.sigma1 = v;
    }
    if let Some(v) = args.alpha {
        grid.alpha = v;
    }
    if let Some(v) = args.nsim {
        grid.n_sim = v;
    }
    if let Some(v) = args.seed {
        grid.seed = v;
    }
    check_alpha(grid.alpha)?;
    if grid.n_sim == 0 {
        return Err(usage("--nsim must be at least 1"));
    }
    if grid.deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(usage("--deltas must be finite and non-negative"));
    }
    if !(grid.sigma0 > 0.0 && grid.sigma1 > 0.0 && grid.mu0.is_finite()) {
        return Err(usage("--sigma0 and --sigma1 must be positive, --mu0 finite"));
    }
    Ok(grid)
}

/// Monte Carlo and analytic crossover of every (mean-BWA, SRW) pair of a
/// partially affected grid.
fn crossover_table(result: &SweepResult) -> CliResult<String> {
    let grid = &result.grid;
    let mut out = String::from(CROSSOVER_CSV_HEADER);
    out.push('\n');
    let Some(fractions) = &grid.fractions else {
        return Ok(out);
    };
    let bwa: Vec<_> = grid.pairs.iter().filter(|p| p.0 == Strategy::MeanBwa).collect();
    let srw: Vec<_> = grid.pairs.iter().filter(|p| p.0 == Strategy::Srw).collect();
    for &delta in &grid.deltas {
        for &b in &grid.block_sizes {
            let ks: Vec<usize> = fractions.iter().map(|f| (f * b as f64).round() as usize).collect();
            let analytic = crossover_fraction_on(
                delta,
                grid.alpha,
                grid.m_total / b,
                b,
                grid.m_total,
                grid.sigma0,
                grid.sigma1,
                &ks,
            )?;
            for &&(_, bm) in &bwa {
                for &&(_, sm) in &srw {
                    let mc = result.crossover(delta, b, bm, sm);
                    let _ = writeln!(
                        out,
                        "{},{b},{bm},{sm},{},{}",
                        fmt_f64(delta),
                        fmt_opt(mc),
                        fmt_opt(analytic)
                    );
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn run(args: &SweepArgs, ctx: &Context) -> CliResult<String> {
    let grid = build_grid(args)?;
    let result = power_sweep(&grid, Execution::Parallel)?;
    let mut files = OutputDir::create(&args.out)?;
    files.write("sweep.csv", result.to_csv().as_bytes())?;
    let mut json = result.to_json();
    json.push('\n');
    files.write("sweep.json", json.as_bytes())?;

    let mut report = format!("{} cells, {} replications each\n", result.cells.len(), grid.n_sim);
    if grid.fractions.is_some() {
        let table = crossover_table(&result)?;
        files.write("crossover.csv", table.as_bytes())?;
        report.push_str(&table);
    }
    let inputs = match &ctx.config {
        Some(cfg) => vec![digest_file(cfg)?],
        None => Vec::new(),
    };
    let mut params = serde_json::to_value(&grid).expect("grid serializes");
    params["figure"] = serde_json::json!(args.figure);
    files.finish("sweep", params, Some(grid.seed), inputs, ctx.timestamp)?;
    Ok(report)
}
