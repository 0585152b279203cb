use blockmt::connectome::{synthesize_study, write_affected_blocks};
use serde_json::json;

use super::connectome::study_from_args;
use super::Context;
use crate::args::GenerateArgs;
use crate::output::{digest_file, OutputDir};
use crate::CliResult;

pub(crate) fn run(args: &GenerateArgs, ctx: &Context) -> CliResult<String> {
    let study = study_from_args(&args.synth, args.include_diagonal, args.seed)?;
    let data = synthesize_study(&study)?;
    let mut files = OutputDir::create(&args.out)?;
    for (sub, prefix, group) in [
        ("controls", "control", &data.controls),
        ("treatments", "treatment", &data.treatments),
    ] {
        let width = group.len().to_string().len().max(3);
        for (i, m) in group.iter().enumerate() {
            files.write(&format!("{sub}/{prefix}_{:0width$}.csv", i + 1), m.to_text().as_bytes())?;
        }
    }
    files.write("hierarchy.csv", data.hierarchy.to_text().as_bytes())?;
    files.write(
        "affected.txt",
        write_affected_blocks(&data.affected, &data.blocks).as_bytes(),
    )?;
    let mut truth = serde_json::to_string_pretty(&data.truth).expect("truth serializes");
    truth.push('\n');
    files.write("truth.json", truth.as_bytes())?;
    let inputs = match &ctx.config {
        Some(cfg) => vec![digest_file(cfg)?],
        None => Vec::new(),
    };
    files.finish("generate", json!({ "study": study }), Some(study.seed), inputs, ctx.timestamp)?;
    Ok(format!(
        "{} controls, {} treatments, {} ROIs, {} blocks, {} affected\n",
        data.controls.len(),
        data.treatments.len(),
        data.blocks.n,
        data.blocks.partition.len(),
        data.affected.len()
    ))
}
