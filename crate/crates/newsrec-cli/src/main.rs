use std::path::Path;
use std::process::ExitCode;

use newsrec_cli::commands;
use newsrec_cli::config::RunConfig;
use newsrec_cli::error::{CliError, EXIT_CONFIG};
use serde_json::Value;

const USAGE: &str = "\
usage: newsrec <command> <config-file> [--key value]... [args]

commands:
  enrich      rewrite titles and verify entities, writing the enriched corpus
  preprocess  parse inputs and report vocabulary, sampling and coverage counts
  train       train a model, checkpointing the best dev-AUC epoch
  evaluate    score the behavior log and report AUC/MRR/nDCG (--sweep true for all prompting modes)
  predict     rank one impression's candidates: newsrec predict <config> <impression-id>
  report      render the training log as CSV and optional SVG charts (--plot true)

Any config key can be overridden with --key value. Results are JSON on
stdout; logs go to stderr. Exit codes: 0 ok, 2 configuration or input
error, 3 runtime failure.";

fn run(args: &[String]) -> Result<Value, CliError> {
    let command = args.first().map(String::as_str).unwrap_or_default();
    let Some(config_path) = args.get(1) else {
        return Err(CliError::input(format!("missing config file\n{USAGE}")));
    };

    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut positionals: Vec<&str> = Vec::new();
    let mut i = 2;
    while i < args.len() {
        if let Some(key) = args[i].strip_prefix("--") {
            let Some(value) = args.get(i + 1) else {
                return Err(CliError::input(format!("override --{key} needs a value")));
            };
            overrides.push((key.to_string(), value.clone()));
            i += 2;
        } else {
            positionals.push(&args[i]);
            i += 1;
        }
    }

    let cfg = RunConfig::load(Path::new(config_path), &overrides)?;
    let expect_no_positionals = |positionals: &[&str]| -> Result<(), CliError> {
        match positionals.first() {
            Some(extra) => Err(CliError::input(format!("unexpected argument {extra:?}"))),
            None => Ok(()),
        }
    };
    match command {
        "enrich" => {
            expect_no_positionals(&positionals)?;
            commands::cmd_enrich(&cfg)
        }
        "preprocess" => {
            expect_no_positionals(&positionals)?;
            commands::cmd_preprocess(&cfg)
        }
        "train" => {
            expect_no_positionals(&positionals)?;
            commands::cmd_train(&cfg)
        }
        "evaluate" => {
            expect_no_positionals(&positionals)?;
            commands::cmd_evaluate(&cfg)
        }
        "predict" => {
            let id = positionals
                .first()
                .ok_or_else(|| CliError::input("predict needs an impression id argument"))?;
            commands::cmd_predict(&cfg, id)
        }
        "report" => {
            expect_no_positionals(&positionals)?;
            commands::cmd_report(&cfg)
        }
        other => Err(CliError::input(format!(
            "unknown command {other:?}; expected enrich, preprocess, train, evaluate, predict or report"
        ))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();

    match args.first().map(String::as_str) {
        None => {
            eprintln!("{USAGE}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        Some("--help" | "-h" | "help") => {
            eprintln!("{USAGE}");
            return ExitCode::SUCCESS;
        }
        Some(_) => {}
    }

    match run(&args) {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("results serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
