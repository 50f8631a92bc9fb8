use clap::{Parser, Subcommand};
use dirac_lab::harness::{self, report::report, Config};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dirac-lab", version, about = "Scattering projections and Hadamard diagnostics for Dirac fields on 1+1 spacetimes")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run one experiment into `<out>/<family>-<hash>`
    Run {
        #[arg(long)]
        config: PathBuf,
        /// output root (default: $DIRAC_LAB_OUT, else ./runs)
        #[arg(long)]
        out: Option<PathBuf>,
        /// overrides the seed in the config
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Invariant suite on the built-in families; JSON on stdout
    Verify {
        /// also write verify.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter sweep from the `[sweep]` table
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// reuse finished points
        #[arg(long)]
        resume: bool,
    },
    /// Summarise a run directory and write its checks.csv
    Report { dir: PathBuf },
}

fn load(path: &PathBuf, seed: Option<u64>) -> dirac_lab::Result<Config> {
    let mut c = Config::load(path)?;
    if let Some(s) = seed {
        c.seed = s;
    }
    Ok(c)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: dirac_lab::Result<bool> = (|| match cli.verb {
        Verb::Run { config, out, seed } => {
            let cfg = load(&config, seed)?;
            let outcome = harness::run(&cfg, &harness::output_root(out.as_deref()))?;
            if outcome.reused {
                eprintln!("run directory already complete; nothing to do");
            }
            let rep = report(&outcome.dir)?;
            print!("{}", rep.text);
            Ok(true)
        }
        Verb::Verify { out } => {
            let rep = harness::verify();
            let json = serde_json::to_string_pretty(&rep)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("verify.json"), &json)?;
            }
            println!("{json}");
            Ok(rep.passed)
        }
        Verb::Sweep { config, out, workers, seed, resume } => {
            let cfg = load(&config, seed)?;
            let (dir, rows) = harness::sweep(&cfg, &harness::output_root(out.as_deref()), workers, resume)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            println!("{} ({} rows, {} failed)", dir.join("sweep.csv").display(), rows.len(), failed);
            Ok(true)
        }
        Verb::Report { dir } => {
            let rep = report(&dir)?;
            print!("{}", rep.text);
            Ok(rep.intact)
        }
    })();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
