use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use radical_nmt::data::read_lines;
use radical_nmt::harness::{self, ExperimentConfig};
use radical_nmt::io::{open, write_atomic};
use radical_nmt::{DecompositionTable, Error, Result};

#[derive(Parser)]
#[command(name = "radnmt", version, about = "Word, character and radical NMT toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and keep the best checkpoint by dev BLEU.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Translate a tokenized source file with a trained checkpoint.
    Translate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        beam: usize,
        /// Defaults to 2 * source length + 5, at most 100.
        #[arg(long)]
        max_len: Option<usize>,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a hypothesis file with BLEU, NIST, hLEPOR and CharacTER.
    Evaluate {
        #[arg(long)]
        hyp: PathBuf,
        /// Comma-separated reference files.
        #[arg(long, value_delimiter = ',', required = true)]
        refs: Vec<PathBuf>,
        #[arg(long)]
        case_insensitive: bool,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Train and compare all five composition settings.
    Matrix {
        #[arg(long)]
        config: PathBuf,
    },
    /// Show the character and radical decomposition of every input token.
    Decompose {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let print = |out: &mut dyn Write, text: &str| {
        out.write_all(text.as_bytes()).map_err(|e| Error::Input(format!("writing stdout: {e}")))
    };
    match cli.command {
        Command::Train { config } => {
            let config = ExperimentConfig::load(&config)?;
            let outcome = harness::train(&config)?;
            let mut text = format!(
                "trained {} for {} updates ({} pairs dropped by length)\n",
                config.setting, outcome.updates, outcome.dropped_pairs
            );
            match outcome.ledger.best_record() {
                Some(best) => {
                    text += &format!("best dev BLEU-4 {:.4} at update {}\n", best.dev_bleu, best.update);
                    if let Some(p) = outcome.best_checkpoint() {
                        text += &format!("checkpoint {}\n", p.display());
                    }
                }
                None => text += &format!("no validation ran; initial checkpoint {}\n", outcome.init_checkpoint.display()),
            }
            print(&mut out, &text)
        }
        Command::Translate { model, input, beam, max_len, output } => {
            if let Some(text) = harness::translate_file(&model, &input, output.as_deref(), beam, max_len)? {
                print(&mut out, &text)?;
            }
            Ok(())
        }
        Command::Evaluate { hyp, refs, case_insensitive, json } => {
            let report = harness::evaluate_files(&hyp, &refs, case_insensitive, &Default::default())?;
            if let Some(path) = json {
                write_atomic(&path, report.to_json().as_bytes())?;
            }
            print(&mut out, &report.to_text())
        }
        Command::Matrix { config } => {
            let config = ExperimentConfig::load(&config)?;
            let runs = harness::run_matrix(&config)?;
            print(&mut out, &harness::matrix_table(&runs))?;
            match runs.iter().find_map(|r| r.error().map(|e| (r.setting, e))) {
                Some((setting, e)) => Err(Error::Input(format!("setting {setting} failed: {e}"))),
                None => Ok(()),
            }
        }
        Command::Decompose { table, input } => {
            let table = DecompositionTable::load(open(&table)?)?;
            let mut text = String::new();
            for line in read_lines(open(&input)?, "input")? {
                for word in line.split_whitespace() {
                    let d = table.decompose_word(word)?;
                    let chars: String = d.characters.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
                    let rads: String = d.radicals.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
                    text += &format!("{word}\t{chars}\t{rads}\n");
                }
            }
            print(&mut out, &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.class(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
