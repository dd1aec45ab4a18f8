use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use hierreg::artifact::ModelFile;
use hierreg::baselines::{ols_fit, write_ols_csv};
use hierreg::cavi::fit;
use hierreg::compare::{compare_rows, vb_summaries, write_compare_csv};
use hierreg::cv::{run_cv, write_cv_csv, CvOptions, ModelKind};
use hierreg::data::{build_grouped, load_csv, ColumnSpec, GroupedData};
use hierreg::gibbs::{gibbs_run, summarize, GibbsConfig};
use hierreg::model::{default_hyperparameters, Hyperparameters};
use hierreg::predictive::{predict_known_group, predict_new_group, predictive_interval};
use hierreg::ranking::{rank_features, rank_groups, write_ranking_csv};
use hierreg::synthetic::{simulate, write_dataset_csv, SyntheticSpec};
use hierreg::Error;

#[derive(Parser, Debug)]
#[command(name = "hierreg", version, about = "Hierarchical Bayesian regression by variational inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the variational model and write the model JSON.
    Fit(FitArgs),
    /// Fit the variational model and a Gibbs sampler; write both summaries side by side.
    CompareGibbs(CompareArgs),
    /// K-fold cross-validated rounded MSE of the requested models.
    Cv(CvArgs),
    /// Feature and group rankings from a fitted model.
    Rank(RankArgs),
    /// Student-t prediction for one input row.
    Predict(PredictArgs),
    /// Least-squares coefficient table.
    Ols(OlsArgs),
    /// Write a dataset simulated from the model.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV file
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "class")]
    group_col: String,
    #[arg(long, default_value = "difficulty")]
    target_col: String,
    /// Columns to ignore, comma separated
    #[arg(long, value_delimiter = ',', default_value = "instr")]
    exclude: Vec<String>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

#[derive(Args, Debug)]
struct HyperArgs {
    /// JSON file with hyperparameters (defaults used when absent)
    #[arg(long)]
    hyper: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5000)]
    n_iter: usize,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long, value_delimiter = ',', default_value = "vb,ols,ridge")]
    models: Vec<ModelKind>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..))]
    folds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fit OLS and ridge without an intercept
    #[arg(long)]
    no_intercept: bool,
    /// z-score features using training-fold statistics
    #[arg(long)]
    standardize: bool,
    /// Output directory for cv.json and cv.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RankArgs {
    /// Model JSON written by `fit`
    #[arg(long)]
    model: PathBuf,
    /// Output directory for features.csv and groups.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Feature values, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    x: Vec<f64>,
    /// Label of an observed group; omit for a new group
    #[arg(long)]
    group: Option<String>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Args, Debug)]
struct OlsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    no_intercept: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    groups: usize,
    #[arg(long, default_value_t = 30)]
    rows: usize,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    delta_sd: f64,
    #[arg(long, default_value_t = 0.5)]
    group_sd: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn load_data(args: &DataArgs) -> Result<GroupedData, Failure> {
    if !args.delimiter.is_ascii() {
        return Err(usage("delimiter must be a single ASCII character"));
    }
    let table = load_csv(&args.data, args.delimiter as u8)?;
    let spec = ColumnSpec {
        group_col: args.group_col.clone(),
        target_col: args.target_col.clone(),
        exclude: args.exclude.clone(),
    };
    Ok(build_grouped(&table, &spec)?)
}

fn load_hyper(args: &HyperArgs, dim: usize) -> Result<Hyperparameters, Failure> {
    let mut hyper = match &args.hyper {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => default_hyperparameters(dim)?,
    };
    if let Some(eps) = args.epsilon {
        hyper.epsilon = eps;
    }
    if let Some(max_iter) = args.max_iter {
        hyper.max_iter = max_iter;
    }
    hyper.validate_for(dim)?;
    Ok(hyper)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn numerical(e: Error) -> Failure {
    Failure {
        code: 2,
        message: e.to_string(),
    }
}

fn cmd_fit(args: &FitArgs) -> CliResult {
    let data = load_data(&args.data)?;
    let hyper = load_hyper(&args.hyper, data.dataset.num_features())?;
    let report = fit(&data.dataset, &hyper).map_err(numerical)?;
    println!("iterations: {}", report.iterations);
    println!("converged: {}", report.converged);
    println!("final_elbo: {}", report.final_elbo);
    let model = ModelFile {
        feature_names: data.dataset.feature_names.clone(),
        group_labels: data.dataset.group_labels.clone(),
        hyperparameters: hyper,
        report,
    };
    model.save(&args.out)?;
    Ok(())
}

fn cmd_compare_gibbs(args: &CompareArgs) -> CliResult {
    let data = load_data(&args.data)?;
    let ds = &data.dataset;
    let hyper = load_hyper(&args.hyper, ds.num_features())?;
    let cfg = GibbsConfig {
        n_iter: args.n_iter,
        burn_in: args.burn_in,
        thin: args.thin,
        seed: args.seed,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(usage(format!("--level must lie in (0, 1), got {}", args.level)));
    }

    let start = Instant::now();
    let report = fit(ds, &hyper).map_err(numerical)?;
    let vb_time = start.elapsed();
    let start = Instant::now();
    let run = gibbs_run(ds, &hyper, &cfg).map_err(numerical)?;
    let gibbs_time = start.elapsed();

    let vb = vb_summaries(&report.posterior, args.level)?;
    let gibbs = summarize(&run, args.level)?;
    let rows = compare_rows(&vb, &gibbs, &ds.group_labels, &ds.feature_names)?;
    let mut out = create(&args.out)?;
    write_compare_csv(&mut out, &rows)?;
    out.flush()?;
    eprintln!(
        "timing: variational {:.3} s ({} sweeps), gibbs {:.3} s ({} iterations)",
        vb_time.as_secs_f64(),
        report.iterations,
        gibbs_time.as_secs_f64(),
        cfg.n_iter
    );
    Ok(())
}

fn cmd_cv(args: &CvArgs) -> CliResult {
    let data = load_data(&args.data)?;
    let hyper = load_hyper(&args.hyper, data.dataset.num_features())?;
    let opts = CvOptions {
        folds: args.folds as usize,
        seed: args.seed,
        include_intercept: !args.no_intercept,
        standardize: args.standardize,
        ..CvOptions::new(hyper)
    };
    if data.num_rows() < opts.folds {
        return Err(usage(format!("{} rows cannot form {} folds", data.num_rows(), opts.folds)));
    }
    let mut reports = Vec::with_capacity(args.models.len());
    for &model in &args.models {
        let report = run_cv(&data, model, &opts)?;
        println!("{}: mean rounded MSE {:.4}", report.model_name, report.mean_mse);
        reports.push(report);
    }
    fs::create_dir_all(&args.out).map_err(|e| usage(format!("{}: {e}", args.out.display())))?;
    let mut json = create(&args.out.join("cv.json"))?;
    serde_json::to_writer_pretty(&mut json, &reports).map_err(Error::from)?;
    json.write_all(b"\n")?;
    json.flush()?;
    let mut table = create(&args.out.join("cv.csv"))?;
    write_cv_csv(&mut table, &reports)?;
    table.flush()?;
    Ok(())
}

fn cmd_rank(args: &RankArgs) -> CliResult {
    let model = ModelFile::load(&args.model)?;
    let post = &model.report.posterior;
    let features = rank_features(post, &model.feature_names)?;
    let groups = rank_groups(post, &model.group_labels)?;
    fs::create_dir_all(&args.out).map_err(|e| usage(format!("{}: {e}", args.out.display())))?;
    for (name, ranking) in [("features.csv", &features), ("groups.csv", &groups)] {
        let mut out = create(&args.out.join(name))?;
        write_ranking_csv(&mut out, ranking)?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> CliResult {
    let model = ModelFile::load(&args.model)?;
    let post = &model.report.posterior;
    if args.x.len() != post.dim() {
        return Err(usage(format!(
            "--x has {} values, the model expects D = {} ({})",
            args.x.len(),
            post.dim(),
            model.feature_names.join(", ")
        )));
    }
    let x = DVector::from_vec(args.x.clone());
    let (label, pred) = match &args.group {
        Some(label) => {
            let index = model.group_labels.iter().position(|g| g == label).ok_or_else(|| Failure {
                code: 2,
                message: format!("unknown group {label:?}; valid groups: {}", model.group_labels.join(", ")),
            })?;
            (label.clone(), predict_known_group(&x, index, post)?)
        }
        None => ("NEW".to_string(), predict_new_group(&x, post)?),
    };
    let (lower, upper) = predictive_interval(&pred, args.level).map_err(|e| usage(e.to_string()))?;
    let stdout = io::stdout();
    let mut writer = csv::Writer::from_writer(stdout.lock());
    let record = |w: &mut csv::Writer<_>, r: [String; 6]| w.write_record(r).map_err(Error::from);
    record(
        &mut writer,
        ["group_label", "location", "scale", "dof", "lower", "upper"].map(String::from),
    )?;
    record(
        &mut writer,
        [
            label,
            pred.location.to_string(),
            pred.scale.to_string(),
            pred.dof.to_string(),
            lower.to_string(),
            upper.to_string(),
        ],
    )?;
    writer.flush()?;
    Ok(())
}

fn cmd_ols(args: &OlsArgs) -> CliResult {
    let data = load_data(&args.data)?;
    let fit = ols_fit(&data.flat_x, &data.flat_y, !args.no_intercept)?;
    let mut out = create(&args.out)?;
    write_ols_csv(&mut out, &fit, &data.dataset.feature_names)?;
    out.flush()?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult {
    let spec = SyntheticSpec {
        groups: args.groups,
        rows_per_group: args.rows,
        dim: args.dim,
        delta_sd: args.delta_sd,
        group_sd: args.group_sd,
        noise_sd: args.noise_sd,
        seed: args.seed,
    };
    let sim = simulate(&spec).map_err(|e| usage(e.to_string()))?;
    let mut out = create(&args.out)?;
    write_dataset_csv(&mut out, &sim.dataset)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::CompareGibbs(a) => cmd_compare_gibbs(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Ols(a) => cmd_ols(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
