use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use visionguide_cli::args::{Cli, Command};
use visionguide_cli::commands::{Headline, TrainOptions};
use visionguide_cli::{commands, exit_code, RunConfig, EXIT_OK};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn print_headline(h: &Headline) {
    for r in [&h.at_one, &h.at_two] {
        println!(
            "threshold {}: precision {:.4} recall {:.4} F1 {:.4} F2 {:.4}",
            r.threshold, r.precision, r.recall, r.f1, r.f2
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::resolve(&cli.common.overrides())?;
    match cli.command {
        Command::Localise { images, raw } => {
            let summary = commands::localise(&cfg, &images, raw)?;
            for d in &summary.done {
                println!("{}: {} peaks -> {}", d.image.display(), d.peaks, d.peaks_json.display());
            }
            for (p, e) in &summary.failed {
                eprintln!("error: {}: {e:#}", p.display());
            }
            summary.into_result()?;
        }
        Command::Evaluate { dataset } => {
            let s = commands::evaluate(&cfg, &dataset)?;
            println!("{} images, curves in {}", s.per_image.len(), s.aggregate_csv.display());
            print_headline(&s.headline);
        }
        Command::Sweep { dataset } => {
            let results = commands::sweep(&cfg, &dataset)?;
            println!("{} combinations written to {}", results.len(), cfg.out.join("index.csv").display());
        }
        Command::Train {
            samples,
            model,
            trees,
            depth,
        } => {
            let opts = TrainOptions {
                n_trees: trees,
                max_depth: depth,
                model: model.unwrap_or_else(|| cfg.out.join("model.json")),
            };
            let s = commands::train(&cfg, &samples, &opts)?;
            println!(
                "trained on {} samples ({} positive), accuracy {:.4}, model {}",
                s.samples,
                s.positives,
                s.accuracy,
                s.model.display()
            );
        }
        Command::Synth(args) => {
            let written = commands::synth(&cfg, &args.into())?;
            println!("{} scenes written to {}", written.len(), cfg.out.display());
        }
    }
    Ok(())
}
