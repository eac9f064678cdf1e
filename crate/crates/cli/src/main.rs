//! Command-line front end: train classifiers, score them, and extract
//! context-dependent and context-independent explanations of stress.

mod setup;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use setup::{ModelArgs, SearchArgs, TargetChoice};
use stress_explain::corpus::{Document, Split};
use stress_explain::explain::{render_ansi, render_html, Direction, ExplanationRecord};
use stress_explain::harness::{
    emit_histograms, evaluate_classifier, run_experiment, sweep_summary, ClassificationReport, ExperimentOptions,
    ExperimentReport,
};
use stress_explain::mcts::{search, SearchOutcome};
use stress_explain::models::{save_model, Target};

#[derive(Debug, Parser)]
#[command(name = "stress-explain", version, about = "Phrase-level explanations of stress classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one classifier and save it.
    Train {
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long, value_enum)]
        target: TargetChoice,
        /// Output model file; the vocabulary is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Precision, recall, F1 and accuracy of the stress and context classifiers.
    EvalClassifier {
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Explain a single text.
    Explain {
        #[command(flatten)]
        models: ModelArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, conflicts_with = "text_file")]
        text: Option<String>,
        #[arg(long)]
        text_file: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        direction: DirectionChoice,
        /// Also write an HTML rendering here.
        #[arg(long)]
        html_out: Option<PathBuf>,
        /// Skip the highlighted rendering on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Explain every stressed test post and summarize stress and entropy.
    Experiment {
        #[command(flatten)]
        models: ModelArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Run the experiment for several alpha values.
    SweepAlpha {
        #[command(flatten)]
        models: ModelArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
        alphas: Vec<f64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DirectionChoice {
    Dep,
    Ind,
    Both,
}

enum Outcome {
    Done,
    Partial,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Train { models, target, out } => train(&models, target, &out),
        Command::EvalClassifier { models, test, out_dir } => eval_classifier(&models, &test, out_dir.as_deref()),
        Command::Explain {
            models,
            search,
            text,
            text_file,
            direction,
            html_out,
            quiet,
        } => {
            let text = match (text, text_file) {
                (Some(t), _) => t,
                (None, Some(p)) => fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?,
                (None, None) => bail!("pass --text or --text-file"),
            };
            explain(&models, &search, &text, direction, html_out.as_deref(), quiet)
        }
        Command::Experiment {
            models,
            search,
            test,
            out_dir,
            workers,
            bins,
        } => experiment(&models, &search, &test, &[search.alpha], &out_dir, workers, bins),
        Command::SweepAlpha {
            models,
            search,
            test,
            alphas,
            out_dir,
            workers,
            bins,
        } => experiment(&models, &search, &test, &alphas, &out_dir, workers, bins),
    }
}

fn train(models: &ModelArgs, target: TargetChoice, out: &Path) -> Result<Outcome> {
    let Some(path) = &models.train else {
        bail!("--train is required");
    };
    let corpus = models.corpus.load(path, Split::Train)?;
    let target = Target::from(target);
    let corpus = match target {
        Target::Stress => corpus,
        Target::Context => models.corpus.in_contexts(&corpus, None)?,
    };
    let model = models.fit(&corpus, target)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_model(&model, out)?;
    println!("saved {:?} {:?} model trained on {} documents to {}", model.kind(), target, corpus.len(), out.display());
    Ok(Outcome::Done)
}

fn print_report(name: &str, r: &ClassificationReport) {
    println!(
        "{name:<10}{:>11.3}{:>8.3}{:>8.3}{:>10.3}",
        r.precision, r.recall, r.f1, r.accuracy
    );
}

fn eval_classifier(models: &ModelArgs, test: &Path, out_dir: Option<&Path>) -> Result<Outcome> {
    let pair = models.build()?;
    let test = models.corpus.load(test, Split::Test)?;
    let context_test = models.corpus.in_contexts(&test, None)?;
    let stress = evaluate_classifier(pair.stress.as_ref(), &test, Target::Stress)?;
    let context = evaluate_classifier(pair.context.as_ref(), &context_test, Target::Context)?;
    println!("model: {}", pair.description);
    println!("{:<10}{:>11}{:>8}{:>8}{:>10}", "", "Precision", "Recall", "F1", "Accuracy");
    print_report("stress", &stress);
    print_report("context", &context);
    if stress.zero_division || context.zero_division {
        eprintln!("note: some per-class scores had a zero denominator and were set to 0");
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let body = json!({ "model": pair.description, "stress": stress, "context": context });
        fs::write(dir.join("classifier_report.json"), serde_json::to_string_pretty(&body)?)?;
    }
    Ok(Outcome::Done)
}

fn explanation_json(doc: &Document, out: &SearchOutcome) -> serde_json::Value {
    json!({
        "explanation": ExplanationRecord::new(doc, &out.best, &out.score),
        "window": out.window,
        "stats": out.stats,
    })
}

fn explain(
    models: &ModelArgs,
    search_args: &SearchArgs,
    text: &str,
    direction: DirectionChoice,
    html_out: Option<&Path>,
    quiet: bool,
) -> Result<Outcome> {
    let pair = models.build()?;
    let cfg = search_args.config(&pair, search_args.alpha)?;
    let doc = Document::new("input", text, 1, "");
    let directions = match direction {
        DirectionChoice::Dep => vec![Direction::Dependent],
        DirectionChoice::Ind => vec![Direction::Independent],
        DirectionChoice::Both => vec![Direction::Dependent, Direction::Independent],
    };
    let mut body = serde_json::Map::new();
    let mut html = String::new();
    for dir in directions {
        let out = search(&doc, &cfg.with_direction(dir))?;
        let name = match dir {
            Direction::Dependent => "dependent",
            Direction::Independent => "independent",
        };
        if !quiet {
            eprintln!("{name} (S={:.3} H={:.3} r={:.2}):", out.score.stress, out.score.entropy, out.score.proportion);
            eprintln!("  {}", render_ansi(&doc, &out.best));
        }
        html.push_str(&format!("<p class=\"{name}\">{}</p>\n", render_html(&doc, &out.best)));
        body.insert(name.into(), explanation_json(&doc, &out));
    }
    if let Some(path) = html_out {
        fs::write(path, html)?;
    }
    println!("{}", serde_json::to_string_pretty(&body)?);
    Ok(Outcome::Done)
}

fn write_report(dir: &Path, report: &ExperimentReport, bins: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    fs::write(dir.join("table.txt"), report.render_table())?;
    if !report.records.is_empty() {
        let hist = emit_histograms(report, bins)?;
        fs::write(dir.join("stress_histogram.csv"), hist.stress.to_csv())?;
        fs::write(dir.join("entropy_histogram.csv"), hist.entropy.to_csv())?;
    }
    Ok(())
}

fn experiment(
    models: &ModelArgs,
    search_args: &SearchArgs,
    test: &Path,
    alphas: &[f64],
    out_dir: &Path,
    workers: usize,
    bins: usize,
) -> Result<Outcome> {
    if bins == 0 {
        bail!("--bins must be at least 1");
    }
    let pair = models.build()?;
    let cfg = search_args.config(&pair, alphas[0])?;
    let test = models.corpus.load(test, Split::Test)?;
    let corpus = models.corpus.in_contexts(&test, Some(1))?;
    log::info!("explaining {} stressed documents", corpus.len());
    let opts = ExperimentOptions {
        workers,
        model: pair.description.clone(),
    };
    let reports = run_experiment(&corpus, &cfg, alphas, &opts)?;

    let single = reports.len() == 1;
    for report in &reports {
        let dir = if single {
            out_dir.to_path_buf()
        } else {
            out_dir.join(format!("alpha_{}", report.config.alpha))
        };
        write_report(&dir, report, bins)?;
        print!("{}", report.render_table());
    }
    if !single {
        let rows = sweep_summary(&reports);
        fs::write(out_dir.join("sweep.json"), serde_json::to_string_pretty(&rows)?)?;
        let mut csv = String::from("alpha,n,dependent_stress,independent_stress,explanation_stress,dependent_entropy,independent_entropy,entropy_gap,wilcoxon_p\n");
        println!("{:>8}{:>10}{:>10}{:>10}{:>12}", "alpha", "S", "H dep", "H ind", "gap");
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.alpha,
                r.n,
                r.dependent_stress,
                r.independent_stress,
                r.explanation_stress,
                r.dependent_entropy,
                r.independent_entropy,
                r.entropy_gap,
                r.wilcoxon_p.map(|p| p.to_string()).unwrap_or_default()
            ));
            println!(
                "{:>8}{:>10.3}{:>10.3}{:>10.3}{:>12.3}",
                r.alpha, r.explanation_stress, r.dependent_entropy, r.independent_entropy, r.entropy_gap
            );
        }
        fs::write(out_dir.join("sweep.csv"), csv)?;
    }
    let skipped: usize = reports.iter().map(|r| r.skipped.len()).sum();
    if skipped > 0 {
        eprintln!("warning: {skipped} document searches failed; see `skipped` in the reports");
        return Ok(Outcome::Partial);
    }
    Ok(Outcome::Done)
}
