use std::path::Path;

use blockmt::blockwise::FConstant;
use blockmt::connectome::{
    blocks_from_hierarchy, choose_affected_blocks, compare_all, design_histograms, group_files,
    histograms_csv, load_group, parse_affected_blocks, results_csv, summary_csv,
    synthesize_study, synthesize_treatment_group, write_affected_blocks, AffectedBlock,
    CompareOptions, ConnectivityMatrix, ConnectomeStrategy, GroundTruth, MatrixBlocks,
    ParcellationHierarchy, SyntheticStudy,
};
use blockmt::stats::{Alternative, RngStream};
use blockmt::Execution;
use serde_json::{json, Value};

use super::{check_alpha, parse_list, parse_methods, Context};
use crate::args::{ConnectomeArgs, SynthArgs};
use crate::output::{digest_file, FileDigest, OutputDir};
use crate::{usage, CliError, CliResult};

/// Synthetic study parameters: library defaults overridden by the flags.
pub(crate) fn study_from_args(
    synth: &SynthArgs,
    include_diagonal: bool,
    seed: u64,
) -> CliResult<SyntheticStudy> {
    let mut study = SyntheticStudy {
        include_diagonal,
        seed,
        ..SyntheticStudy::default()
    };
    if let Some(v) = &synth.levels {
        study.levels = parse_list(v, "levels")?;
    }
    if let Some(v) = synth.n_controls {
        study.n_controls = v;
    }
    if let Some(v) = synth.n_treatments {
        study.n_treatments = v;
    }
    if let Some(v) = synth.delta {
        study.delta = v;
    }
    if let Some(v) = synth.affected_share {
        study.affected_share = v;
    }
    if let Some(v) = &synth.fraction_range {
        study.fraction_range = parse_range(v)?;
    }
    Ok(study)
}

fn parse_range(text: &str) -> CliResult<(f64, f64)> {
    match parse_list::<f64>(text, "fraction-range")?.as_slice() {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(usage(format!("--fraction-range: expected 'lo,hi', got '{text}'"))),
    }
}

fn parse_strategies(text: &str) -> CliResult<Vec<ConnectomeStrategy>> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(ConnectomeStrategy::ALL.to_vec());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| usage(format!("--strategy: unknown strategy '{}'", s.trim())))
        })
        .collect()
}

fn parse_options(args: &ConnectomeArgs) -> CliResult<CompareOptions> {
    check_alpha(args.alpha)?;
    let f_constant = match args.f_constant.to_ascii_lowercase().as_str() {
        "standard" => FConstant::Standard,
        "printed" => FConstant::Printed,
        other => return Err(usage(format!("--f-constant: expected standard or printed, got '{other}'"))),
    };
    let alternative = match args.alternative.to_ascii_lowercase().replace('_', "-").as_str() {
        "greater" => Alternative::Greater,
        "less" => Alternative::Less,
        "two-sided" => Alternative::TwoSided,
        other => {
            return Err(usage(format!(
                "--alternative: expected greater, less or two-sided, got '{other}'"
            )))
        }
    };
    if !args.threshold.is_finite() {
        return Err(usage("--threshold must be finite"));
    }
    Ok(CompareOptions {
        alpha: args.alpha,
        threshold: args.threshold,
        f_constant,
        alternative,
    })
}

fn digest_group(dir: &Path) -> CliResult<Vec<FileDigest>> {
    group_files(dir)?.iter().map(|p| digest_file(p)).collect()
}

struct Prepared {
    mode: &'static str,
    blocks: MatrixBlocks,
    controls: Vec<ConnectivityMatrix>,
    treatments: Vec<ConnectivityMatrix>,
    truth: Option<GroundTruth>,
    /// Affected blocks of generated treatments, written back as a file.
    generated: Option<Vec<AffectedBlock>>,
    inputs: Vec<FileDigest>,
    parameters: Value,
}

fn any_synth_flag(s: &SynthArgs) -> bool {
    s.levels.is_some()
        || s.n_controls.is_some()
        || s.n_treatments.is_some()
        || s.delta.is_some()
        || s.affected_share.is_some()
        || s.fraction_range.is_some()
}

fn prepare_synthetic(args: &ConnectomeArgs) -> CliResult<Prepared> {
    if args.controls.is_some()
        || args.treatments.is_some()
        || args.hierarchy.is_some()
        || args.affected.is_some()
        || args.truth.is_some()
        || args.block_level.is_some()
    {
        return Err(usage(
            "--synthesize cannot be combined with --controls, --treatments, --hierarchy, --block-level, --affected or --truth",
        ));
    }
    let study = study_from_args(&args.synth, args.include_diagonal, args.seed)?;
    let data = synthesize_study(&study)?;
    Ok(Prepared {
        mode: "synthetic",
        blocks: data.blocks,
        controls: data.controls,
        treatments: data.treatments,
        truth: Some(data.truth),
        generated: Some(data.affected),
        inputs: Vec::new(),
        parameters: json!({ "study": study }),
    })
}

fn prepare_files(args: &ConnectomeArgs) -> CliResult<Prepared> {
    let controls_dir = args
        .controls
        .as_ref()
        .ok_or_else(|| usage("either --synthesize or --controls is required"))?;
    let hierarchy_path = args
        .hierarchy
        .as_ref()
        .ok_or_else(|| usage("--hierarchy is required with --controls"))?;
    if args.synth.levels.is_some() || args.synth.n_controls.is_some() {
        return Err(usage("--levels and --n-controls apply to --synthesize only"));
    }
    let controls = load_group(controls_dir)?;
    let mut inputs = digest_group(controls_dir)?;
    let hierarchy = ParcellationHierarchy::load(hierarchy_path)?;
    inputs.push(digest_file(hierarchy_path)?);
    let n = controls[0].n();
    let block_level = match args.block_level {
        Some(b) => b,
        None => *hierarchy.sizes().iter().min().expect("hierarchy has levels"),
    };
    let blocks = blocks_from_hierarchy(&hierarchy, n, block_level, args.include_diagonal)
        .map_err(|e| CliError::Data(format!("{}: {e}", hierarchy_path.display())))?;

    let mut parameters = json!({
        "controls": controls_dir.display().to_string(),
        "hierarchy": hierarchy_path.display().to_string(),
        "block_level": block_level,
    });
    let (treatments, truth, generated) = match &args.treatments {
        Some(dir) => {
            if args.affected.is_some() || any_synth_flag(&args.synth) {
                return Err(usage(
                    "--affected and the effect flags apply to generated treatments; use --truth with --treatments",
                ));
            }
            let treatments = load_group(dir)?;
            let files = group_files(dir)?;
            if let Some((m, path)) = treatments.iter().zip(&files).find(|(m, _)| m.n() != n) {
                return Err(CliError::Data(format!(
                    "{}: size {} differs from the control size {n}",
                    path.display(),
                    m.n()
                )));
            }
            inputs.extend(digest_group(dir)?);
            let truth = match &args.truth {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                    inputs.push(digest_file(path)?);
                    Some(serde_json::from_str::<GroundTruth>(&text).map_err(|e| {
                        CliError::Data(format!("{}: invalid ground truth: {e}", path.display()))
                    })?)
                }
                None => None,
            };
            parameters["treatments"] = json!(dir.display().to_string());
            parameters["truth"] = json!(args.truth.as_ref().map(|p| p.display().to_string()));
            (treatments, truth, None)
        }
        None => {
            if args.truth.is_some() {
                return Err(usage("--truth requires --treatments"));
            }
            let defaults = SyntheticStudy::default();
            let delta = args.synth.delta.unwrap_or(defaults.delta);
            let n_t = args.synth.n_treatments.unwrap_or(defaults.n_treatments);
            let root = RngStream::new(args.seed);
            let affected = match &args.affected {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                    inputs.push(digest_file(path)?);
                    parse_affected_blocks(&text, &blocks).map_err(|e| {
                        CliError::Usage(format!("{}: {e}", path.display()))
                    })?
                }
                None => {
                    let share = args.synth.affected_share.unwrap_or(defaults.affected_share);
                    let range = match &args.synth.fraction_range {
                        Some(v) => parse_range(v)?,
                        None => defaults.fraction_range,
                    };
                    parameters["affected_share"] = json!(share);
                    parameters["fraction_range"] = json!(range);
                    choose_affected_blocks(&blocks, share, range, root.derive(2).seed())?
                }
            };
            let (treatments, truth) = synthesize_treatment_group(
                &controls,
                &blocks,
                &affected,
                delta,
                n_t,
                root.derive(3).seed(),
            )?;
            parameters["delta"] = json!(delta);
            parameters["n_treatments"] = json!(n_t);
            parameters["affected"] = json!(args.affected.as_ref().map(|p| p.display().to_string()));
            (treatments, Some(truth), Some(affected))
        }
    };
    Ok(Prepared {
        mode: "files",
        blocks,
        controls,
        treatments,
        truth,
        generated,
        inputs,
        parameters,
    })
}

pub(crate) fn run(args: &ConnectomeArgs, ctx: &Context) -> CliResult<String> {
    let opts = parse_options(args)?;
    let strategies = parse_strategies(&args.strategy)?;
    let methods = parse_methods(&args.method)?;
    if args.bins == 0 {
        return Err(usage("--bins must be at least 1"));
    }
    let mut prep = if args.synthesize {
        prepare_synthetic(args)?
    } else {
        prepare_files(args)?
    };
    let outcomes = compare_all(
        &prep.controls,
        &prep.treatments,
        &prep.blocks,
        &strategies,
        &methods,
        &opts,
        prep.truth.as_ref(),
        Execution::Parallel,
    )?;

    let mut files = OutputDir::create(&args.out)?;
    let doc = json!({
        "mode": prep.mode,
        "n_rois": prep.blocks.n,
        "blocks": prep.blocks.partition.len(),
        "analyzed_cells": prep.blocks.analyzed_cells(),
        "n_controls": prep.controls.len(),
        "n_treatments": prep.treatments.len(),
        "options": opts,
        "outcomes": outcomes,
        "truth": prep.truth,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("results serialize");
    text.push('\n');
    files.write("results.json", text.as_bytes())?;
    files.write(
        "results.csv",
        results_csv(&outcomes, prep.truth.as_ref(), &prep.blocks).as_bytes(),
    )?;
    let summary = summary_csv(&outcomes);
    files.write("summary.csv", summary.as_bytes())?;
    if let Some(truth) = prep.truth.as_ref().filter(|t| !t.affected.is_empty()) {
        let hist = design_histograms(&prep.blocks, truth, args.bins)?;
        files.write("histograms.csv", histograms_csv(&hist).as_bytes())?;
    }
    if let Some(affected) = &prep.generated {
        files.write(
            "affected.txt",
            write_affected_blocks(affected, &prep.blocks).as_bytes(),
        )?;
    }
    if let Some(cfg) = &ctx.config {
        prep.inputs.push(digest_file(cfg)?);
    }
    let mut params = prep.parameters;
    params["mode"] = json!(prep.mode);
    params["strategies"] = json!(strategies);
    params["methods"] = json!(methods);
    params["options"] = json!(opts);
    params["include_diagonal"] = json!(args.include_diagonal);
    params["bins"] = json!(args.bins);
    files.finish("connectome", params, Some(args.seed), prep.inputs, ctx.timestamp)?;
    Ok(summary)
}
