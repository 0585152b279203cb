use std::fmt::Write as _;

use blockmt::blockwise::{
    bwa_critical_value, run_block_analysis, srw_critical_value, AnalysisPlan, BlockAnalysis,
    BlockData, BlockPartition, BlockTest, Summary,
};
use blockmt::io::{fmt_f64, fmt_opt};
use blockmt::simulator::example2_fixture;
use blockmt::{Execution, ProcedureKind};
use serde_json::json;

use super::{check_alpha, ratio, Context};
use crate::args::Example2Args;
use crate::output::{digest_file, OutputDir};
use crate::CliResult;

fn plan(summary: Summary, alpha: f64) -> AnalysisPlan {
    AnalysisPlan {
        summary,
        test: BlockTest::OneSampleZ {
            mu0: 0.0,
            sigma0: 1.0,
        },
        method: ProcedureKind::Bonferroni,
        alpha,
    }
}

fn table_lines(out: &mut String, analysis: &BlockAnalysis) {
    if let Some(t) = analysis.table {
        let _ = writeln!(out, "  R = {}, V = {}, S = {}, T = {}, U = {}", t.r, t.v, t.s, t.t, t.u);
        let _ = writeln!(out, "  typeI = {}, typeII = {}", ratio(t.v, t.m0), ratio(t.t, t.m1));
    }
}

pub(crate) fn run(args: &Example2Args, ctx: &Context) -> CliResult<String> {
    check_alpha(args.alpha)?;
    let fx = example2_fixture();
    let alpha = args.alpha;
    let n = fx.region.len();
    let mut out = String::new();

    let singletons = BlockPartition::singletons(n, None);
    let srw = run_block_analysis(
        BlockData::OneSample(&fx.region),
        &singletons,
        &plan(Summary::Mean, alpha),
        Some(&fx.affected_regions),
        Execution::Parallel,
    )?;
    let c_srw = srw_critical_value(alpha, n, 0.0, 1.0)?;
    let _ = writeln!(out, "SRW: {n} regions, bonferroni, alpha = {}", fmt_f64(alpha));
    let _ = writeln!(out, "  critical value = {}", fmt_f64(c_srw));
    let cells: Vec<String> = srw
        .rejected
        .iter()
        .map(|&j| format!("({},{})", j / fx.cols + 1, j % fx.cols + 1))
        .collect();
    let _ = writeln!(out, "  rejected regions (row,col): {}", cells.join(" "));
    table_lines(&mut out, &srw);

    let m = fx.partition.len();
    let mut sizes = fx.partition.sizes();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes.dedup();
    let mut critical = Vec::new();
    let _ = writeln!(out, "\nBWA: {m} blocks, bonferroni, mean critical value by block size");
    for b in sizes {
        let c = bwa_critical_value(alpha, m, b, 0.0, 1.0)?;
        let _ = writeln!(out, "  b = {b}: {}", fmt_f64(c));
        critical.push(json!({"block_size": b, "critical_value": c}));
    }

    let mut bwa = Vec::new();
    for summary in [Summary::Mean, Summary::Median, Summary::Huber] {
        let analysis = run_block_analysis(
            BlockData::OneSample(&fx.region),
            &fx.partition,
            &plan(summary, alpha),
            Some(&fx.affected_blocks),
            Execution::Parallel,
        )?;
        let _ = writeln!(out, "\n{}-BWA:", summary.name());
        let _ = writeln!(out, "  block,size,statistic,z,p,adjusted,rejected,affected");
        for o in &analysis.outcomes {
            let _ = writeln!(
                out,
                "  {},{},{},{},{},{},{},{}",
                o.label,
                o.size,
                fmt_opt(o.test.summary.and_then(|s| s.scalar())),
                fmt_f64(o.test.statistic),
                fmt_f64(o.test.p_value),
                fmt_f64(o.adjusted),
                o.rejected,
                fx.affected_blocks.contains(&o.block)
            );
        }
        let labels: Vec<&str> = analysis
            .rejected
            .iter()
            .map(|&i| fx.partition.blocks()[i].label.as_str())
            .collect();
        let _ = writeln!(out, "  rejected blocks: {}", labels.join(", "));
        table_lines(&mut out, &analysis);
        bwa.push(json!({"summary": summary.name(), "analysis": analysis}));
    }

    if let Some(dir) = &args.out {
        let mut files = OutputDir::create(dir)?;
        let doc = json!({
            "alpha": alpha,
            "srw": {"critical_value": c_srw, "analysis": srw},
            "bwa_critical_values": critical,
            "bwa": bwa,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
        text.push('\n');
        files.write("example2.json", text.as_bytes())?;
        files.write("example2.txt", out.as_bytes())?;
        let inputs = match &ctx.config {
            Some(cfg) => vec![digest_file(cfg)?],
            None => Vec::new(),
        };
        files.finish("example2", json!({"alpha": alpha}), None, inputs, ctx.timestamp)?;
    }
    Ok(out)
}
