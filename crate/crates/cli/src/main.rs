use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use distillab_cli::config::{ExperimentConfig, MixtureConfig};
use distillab_cli::runner::{dump_logits, eval_model_files, run_distillation, train_teacher};
use distillab_cli::sweep::{run_sweep, SweepConfig};
use distillab_cli::verify::{run_suite, Suite};
use distillab_cli::exit_code_for;
use distillab_core::datagen::{gen_mixture_split, save_dataset};
use distillab_core::{Error, Result};

/// Train, distill, and verify soft-target objectives on small classifiers.
#[derive(Parser)]
#[command(name = "distillab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Gaussian-mixture train/test CSV pair.
    GenData {
        /// Experiment config whose data.mixture section supplies defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        n_per_class: Option<usize>,
        #[arg(long)]
        test_n_per_class: Option<usize>,
        #[arg(long)]
        separation: Option<f64>,
        #[arg(long)]
        within_std: Option<f64>,
        /// Overrides the mixture seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
    /// Train the teacher network (cross entropy) from a config.
    TrainTeacher {
        #[arg(long)]
        config: PathBuf,
        /// Overrides train.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the student network under the configured objective.
    Distill {
        #[arg(long)]
        config: PathBuf,
        /// Overrides train.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write teacher logits for every sample of a dataset.
    DumpLogits {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved model on a dataset (JSON report on stdout).
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Teacher model for the transformed-teacher gap diagnostic.
        #[arg(long)]
        teacher: Option<PathBuf>,
        /// Transform exponent for the teacher diagnostic.
        #[arg(long)]
        gamma: Option<f64>,
        /// Also write per-sample entropies (id,label,H_q) to this CSV.
        #[arg(long)]
        per_sample_out: Option<PathBuf>,
    },
    /// Run a seeded verification suite; nonzero exit if it fails.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 20240)]
        seed: u64,
    },
    /// Run a grid sweep described by a sweep config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Equivalence,
    Decomposition,
    Relation,
    Gradients,
    Bounds,
    Mappings,
}

impl From<SuiteArg> for Suite {
    fn from(value: SuiteArg) -> Self {
        match value {
            SuiteArg::Equivalence => Suite::Equivalence,
            SuiteArg::Decomposition => Suite::Decomposition,
            SuiteArg::Relation => Suite::Relation,
            SuiteArg::Gradients => Suite::Gradients,
            SuiteArg::Bounds => Suite::Bounds,
            SuiteArg::Mappings => Suite::Mappings,
        }
    }
}

fn merge_mixture(
    config: Option<&ExperimentConfig>,
    k: Option<usize>,
    d: Option<usize>,
    n_per_class: Option<usize>,
    test_n_per_class: Option<usize>,
    separation: Option<f64>,
    within_std: Option<f64>,
    seed: Option<u64>,
) -> Result<MixtureConfig> {
    let base = config.and_then(|c| c.data.mixture.clone());
    let pick_usize = |flag: Option<usize>, from_cfg: Option<usize>, name: &str| {
        flag.or(from_cfg).ok_or_else(|| {
            Error::invalid_argument(format!("--{name} is required (no config value found)"))
        })
    };
    let pick_f64 = |flag: Option<f64>, from_cfg: Option<f64>, name: &str| {
        flag.or(from_cfg).ok_or_else(|| {
            Error::invalid_argument(format!("--{name} is required (no config value found)"))
        })
    };
    Ok(MixtureConfig {
        k: pick_usize(k, base.as_ref().map(|m| m.k), "k")?,
        d: pick_usize(d, base.as_ref().map(|m| m.d), "d")?,
        n_per_class: pick_usize(n_per_class, base.as_ref().map(|m| m.n_per_class), "n-per-class")?,
        test_n_per_class: pick_usize(
            test_n_per_class,
            base.as_ref().map(|m| m.test_n_per_class),
            "test-n-per-class",
        )?,
        separation: pick_f64(separation, base.as_ref().map(|m| m.separation), "separation")?,
        within_std: pick_f64(within_std, base.as_ref().map(|m| m.within_std), "within-std")?,
        seed: seed
            .or(base.as_ref().map(|m| m.seed))
            .ok_or_else(|| Error::invalid_argument("--seed is required (no config value found)"))?,
    })
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::GenData {
            config,
            k,
            d,
            n_per_class,
            test_n_per_class,
            separation,
            within_std,
            seed,
            train_out,
            test_out,
        } => {
            let loaded = config.map(ExperimentConfig::load).transpose()?;
            let mixture = merge_mixture(
                loaded.as_ref(),
                k,
                d,
                n_per_class,
                test_n_per_class,
                separation,
                within_std,
                seed,
            )?;
            let (train, test) = gen_mixture_split(&mixture.to_spec(), mixture.test_n_per_class)?;
            save_dataset(&train, &train_out)?;
            save_dataset(&test, &test_out)?;
            println!(
                "wrote {} train rows to {} and {} test rows to {}",
                train.n(),
                train_out.display(),
                test.n(),
                test_out.display()
            );
            Ok(0)
        }
        Command::TrainTeacher { config, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.train.seed = seed;
            }
            let outcome = train_teacher(&cfg)?;
            println!(
                "teacher trained: final test accuracy {:.4} (model: {})",
                outcome.final_test.accuracy,
                cfg.outputs.model_path.display()
            );
            Ok(0)
        }
        Command::Distill { config, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.train.seed = seed;
            }
            let outcome = run_distillation(&cfg)?;
            println!(
                "student trained: final test accuracy {:.4}, mean H(q) {:.4}{}",
                outcome.final_test.accuracy,
                outcome.final_test.mean_h_q,
                match outcome.final_test.mean_kl_pt_q {
                    Some(kl) => format!(", mean D(p^t_T||q) {kl:.4}"),
                    None => String::new(),
                }
            );
            Ok(0)
        }
        Command::DumpLogits { model, data, out } => {
            dump_logits(&model, &data, &out)?;
            println!("wrote logits to {}", out.display());
            Ok(0)
        }
        Command::Eval {
            model,
            data,
            teacher,
            gamma,
            per_sample_out,
        } => {
            let report = eval_model_files(
                &model,
                &data,
                teacher.as_deref(),
                gamma,
                per_sample_out.as_deref(),
            )?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            Ok(0)
        }
        Command::Verify { suite, trials, seed } => {
            let report = run_suite(suite.into(), trials, seed)?;
            println!("{}", report.render());
            Ok(if report.passed { 0 } else { 1 })
        }
        Command::Sweep { config } => {
            let cfg = SweepConfig::load(&config)?;
            let cells = run_sweep(&cfg)?;
            println!(
                "sweep finished: {cells} cells, aggregate at {}",
                cfg.aggregate_path.display()
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
