mod args;
mod bundle;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use outagecast::ErrorClass;

use args::{Cli, Command};
use manifest::Recorder;

fn run(cmd: &Command, rec: &mut Recorder) -> outagecast::Result<()> {
    if let Some(out) = cmd.out_dir() {
        std::fs::create_dir_all(out)?;
    }
    match cmd {
        Command::GenData(a) => commands::gen_data(a, rec),
        Command::TrainInitial(a) => commands::train_initial_cmd(a, rec),
        Command::TrainRealtime(a) => commands::train_realtime_cmd(a, rec),
        Command::Search(a) => commands::search(a, rec),
        Command::Predict(a) => commands::predict(a, rec),
        Command::Evaluate(a) => commands::evaluate(a, rec),
        Command::Attention(a) => commands::attention(a, rec),
        Command::Bigrams(a) => commands::bigrams(a, rec),
        Command::Report(a) => commands::report(a, rec),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let mut rec = Recorder::new(cli.command.name());
    let result = run(&cli.command, &mut rec);
    let outcome = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    };
    if let Some(out) = cli.command.out_dir() {
        if out.is_dir() {
            if let Err(e) = rec.finish(out, &outcome) {
                log::warn!("could not write run manifest: {e}");
            }
        }
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            })
        }
    }
}
