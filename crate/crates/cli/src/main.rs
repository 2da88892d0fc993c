use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use garch_omnibus_cli::commands::{
    self, AcfOptions, FitOptions, InputOptions, SimulateOptions, TestOptions,
};
use garch_omnibus_cli::error::{exit, CliError, Result};
use garch_omnibus_cli::io::emit;
use garch_omnibus_cli::Settings;

/// Bootstrap specification tests for GARCH models.
#[derive(Parser)]
#[command(name = "garch-omnibus", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit GARCH models by Gaussian QMLE.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        model: Model,
    },
    /// Bootstrap KS/CvM and Ljung-Box tests of one or more GARCH specifications.
    Test {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        boot: Boot,
    },
    /// Simulate a study design or a GARCH model with given parameters.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        /// Design 1-9.
        #[arg(long)]
        dgp: Option<String>,
        /// Parameters omega,alpha..,beta.. for the given --order.
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<String>,
        /// Series length.
        #[arg(long)]
        n: Option<String>,
    },
    /// Autocorrelations of squared data and squared standardized residuals.
    Acf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        model: Model,
        /// Largest lag reported.
        #[arg(long)]
        max_lag: Option<String>,
    },
    /// Monte Carlo rejection rates for one design and null model.
    Mc {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        boot: Boot,
        /// Design 1-9.
        #[arg(long)]
        dgp: Option<String>,
        /// Series length.
        #[arg(long)]
        n: Option<String>,
        /// Monte Carlo replications.
        #[arg(long)]
        reps: Option<String>,
        /// Nominal levels, comma separated.
        #[arg(long)]
        levels: Option<String>,
        /// `warp` or `bootstrap:B`.
        #[arg(long)]
        mode: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// key = value file with the same keys as the long flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every random stream.
    #[arg(long)]
    seed: Option<String>,
    /// CSV output path (stdout when omitted for simulate, acf and mc).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Input {
    /// CSV file with the series.
    input: Option<PathBuf>,
    /// Column name or 0-based index.
    #[arg(long)]
    column: Option<String>,
    /// `none` or `logret100`.
    #[arg(long)]
    transform: Option<String>,
}

#[derive(Args)]
struct Model {
    /// Model order p1,p2; repeatable.
    #[arg(long = "order")]
    orders: Vec<String>,
}

#[derive(Args)]
struct Boot {
    /// Bootstrap replicates.
    #[arg(long)]
    boot: Option<String>,
    /// Shrinkage bootstrap, on or off.
    #[arg(long)]
    shrink: Option<String>,
    /// Scale of the shrinkage threshold c_n = scale * n^(-1/3).
    #[arg(long)]
    cn_scale: Option<String>,
    /// Ljung-Box lags, comma separated.
    #[arg(long)]
    lbq: Option<String>,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::new(),
        };
        s.override_with("seed", self.seed.clone());
        s.override_with("out", self.out.as_ref().map(|p| p.display().to_string()));
        Ok(s)
    }
}

impl Input {
    fn apply(&self, s: &mut Settings) {
        s.override_with(
            "input",
            self.input.as_ref().map(|p| p.display().to_string()),
        );
        s.override_with("column", self.column.clone());
        s.override_with("transform", self.transform.clone());
    }
}

impl Boot {
    fn apply(&self, s: &mut Settings) {
        s.override_with("boot", self.boot.clone());
        s.override_with("shrink", self.shrink.clone());
        s.override_with("cn-scale", self.cn_scale.clone());
        s.override_with("lbq", self.lbq.clone());
    }
}

fn out_path(s: &Settings) -> Option<PathBuf> {
    s.get("out").map(PathBuf::from)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit {
            common,
            input,
            model,
        } => {
            let mut s = common.settings()?;
            input.apply(&mut s);
            s.override_with("order", model.orders);
            let series = InputOptions::from_settings(&s)?.load()?;
            let report = commands::cmd_fit(&series, &FitOptions::from_settings(&s)?)?;
            print!("{}", report.to_text());
            if let Some(p) = out_path(&s) {
                emit(Some(&p), &report.to_csv())?;
            }
            if report.fits.iter().all(|(_, f)| f.is_err()) {
                return Err(CliError::Numerical("no model could be fitted".into()));
            }
            Ok(())
        }
        Command::Test {
            common,
            input,
            model,
            boot,
        } => {
            let mut s = common.settings()?;
            input.apply(&mut s);
            boot.apply(&mut s);
            s.override_with("order", model.orders);
            let opts = TestOptions::from_settings(&s)?;
            let series = InputOptions::from_settings(&s)?.load()?;
            let report = commands::cmd_test(&series, &opts)?;
            print!("{}", report.to_text());
            if let Some(p) = out_path(&s) {
                emit(Some(&p), &report.to_csv())?;
            }
            match report.first_error() {
                Some(e) => Err(CliError::Numerical(format!(
                    "at least one null model failed: {e}"
                ))),
                None => Ok(()),
            }
        }
        Command::Simulate {
            common,
            model,
            dgp,
            phi,
            n,
        } => {
            let mut s = common.settings()?;
            s.override_with("order", model.orders);
            s.override_with("dgp", dgp);
            s.override_with("phi", phi);
            s.override_with("n", n);
            let path = commands::cmd_simulate(&SimulateOptions::from_settings(&s)?)?;
            emit(out_path(&s).as_deref(), &commands::simulation_csv(&path))
        }
        Command::Acf {
            common,
            input,
            model,
            max_lag,
        } => {
            let mut s = common.settings()?;
            input.apply(&mut s);
            s.override_with("order", model.orders);
            s.override_with("max-lag", max_lag);
            let series = InputOptions::from_settings(&s)?.load()?;
            let report = commands::cmd_acf(&series, &AcfOptions::from_settings(&s)?)?;
            match out_path(&s) {
                Some(p) => {
                    print!("{}", report.to_text());
                    emit(Some(&p), &report.to_csv())
                }
                None => emit(None, &report.to_csv()),
            }
        }
        Command::Mc {
            common,
            model,
            boot,
            dgp,
            n,
            reps,
            levels,
            mode,
        } => {
            let mut s = common.settings()?;
            boot.apply(&mut s);
            s.override_with("order", model.orders);
            s.override_with("dgp", dgp);
            s.override_with("n", n);
            s.override_with("reps", reps);
            s.override_with("levels", levels);
            s.override_with("mode", mode);
            let e = commands::experiment_from_settings(&s)?;
            let table = commands::cmd_mc(&e)?;
            match out_path(&s) {
                Some(p) => {
                    print!("{}", commands::rejection_text(&table));
                    emit(Some(&p), &table.to_csv())
                }
                None => emit(None, &table.to_csv()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::USAGE as u8
            } else {
                exit::OK as u8
            });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
