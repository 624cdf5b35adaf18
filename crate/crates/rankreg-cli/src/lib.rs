//! Library surface of the `rankreg` binary, exposed so integration tests
//! can drive commands and replay embedded configs directly.

pub mod args;
pub mod commands;
pub mod report;

use anyhow::Result;

pub use args::{Cli, Command};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Train(a) => commands::cmd_train(&a),
        Command::Eval(a) => commands::cmd_eval(&a),
        Command::Compare(a) => commands::cmd_compare(&a),
        Command::Ablate(a) => commands::cmd_ablate(&a),
        Command::Ensemble(a) => commands::cmd_ensemble(&a),
    }
}

/// Rebuild the argv that reproduces a result document. The `config` map is
/// the document's flag echo; `auto` sentinels are skipped (defaults resolve
/// the same way), and the presence-only `--rankreg` flag is emitted only
/// when true. Output paths are supplied by the caller via `extra`.
pub fn replay_args(
    command: &str,
    config: &std::collections::BTreeMap<String, String>,
    extra: &[(&str, &str)],
) -> Vec<String> {
    let mut argv = vec!["rankreg".to_string(), command.to_string()];
    for (key, value) in config {
        if value == "auto" {
            continue;
        }
        if key == "rankreg" {
            if value == "true" {
                argv.push("--rankreg".into());
            }
            continue;
        }
        argv.push(format!("--{key}"));
        argv.push(value.clone());
    }
    for (key, value) in extra {
        argv.push(format!("--{key}"));
        argv.push((*value).to_string());
    }
    argv
}
