use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

use hierreg::artifact::ModelFile;
use hierreg::compare::read_compare_csv;
use hierreg::cv::CvReport;
use hierreg::data::turkiye_feature_names;
use hierreg::ranking::read_ranking_csv;

fn hierreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hierreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a simulated dataset and returns its path.
fn simulated(dir: &TempDir, groups: usize, dim: usize) -> PathBuf {
    let file = dir.path().join("sim.csv");
    let out = hierreg(&[
        "simulate",
        "--groups",
        &groups.to_string(),
        "--rows",
        "25",
        "--dim",
        &dim.to_string(),
        "--seed",
        "3",
        "--out",
        path(&file),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    file
}

const SIM_COLUMNS: [&str; 6] = ["--group-col", "group", "--target-col", "y", "--exclude", ""];

fn fit_model(dir: &TempDir, data: &Path, extra: &[&str]) -> (Output, PathBuf) {
    let model = dir.path().join("model.json");
    let mut args = vec!["fit", "--data", path(data)];
    args.extend(SIM_COLUMNS);
    args.extend(extra);
    args.extend(["--out", path(&model)]);
    (hierreg(&args), model)
}

#[test]
fn missing_data_is_a_usage_error() {
    let out = hierreg(&["fit", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("--data") && err.to_lowercase().contains("usage"), "{err}");
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(hierreg(&["--help"]).status.code(), Some(0));
    assert_eq!(hierreg(&["--version"]).status.code(), Some(0));
    assert_eq!(hierreg(&["cv", "--help"]).status.code(), Some(0));
}

#[test]
fn unreadable_file_exits_one() {
    let out = hierreg(&["fit", "--data", "/nonexistent/file.csv", "--out", "/tmp/never.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn one_fold_is_rejected() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 3, 2);
    let mut args = vec!["cv", "--data", path(&data), "--folds", "1", "--out", path(dir.path())];
    args.extend(SIM_COLUMNS);
    assert_eq!(hierreg(&args).status.code(), Some(1));
}

#[test]
fn non_convergent_fit_still_succeeds() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 4, 2);
    let (out, model) = fit_model(&dir, &data, &["--max-iter", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let loaded = ModelFile::load(&model).unwrap();
    assert!(!loaded.report.converged);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(json["converged"], serde_json::Value::Bool(false));
}

#[test]
fn fit_rank_predict_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 5, 3);
    let (out, model_path) = fit_model(&dir, &data, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let model = ModelFile::load(&model_path).unwrap();
    assert!(model.report.converged);
    assert_eq!(model.feature_names, vec!["x1", "x2", "x3"]);
    assert_eq!(model.group_labels[0], "group 1");

    let ranks = dir.path().join("ranks");
    let out = hierreg(&["rank", "--model", path(&model_path), "--out", path(&ranks)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut features = read_ranking_csv(fs::File::open(ranks.join("features.csv")).unwrap()).unwrap();
    features.sort();
    assert_eq!(features, model.feature_names);
    let groups = read_ranking_csv(fs::File::open(ranks.join("groups.csv")).unwrap()).unwrap();
    assert_eq!(groups.len(), 5);

    let out = hierreg(&["predict", "--model", path(&model_path), "--x", "0.5,-1,2", "--group", "group 2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "group_label,location,scale,dof,lower,upper");
    assert!(lines[1].starts_with("group 2,"));
    let dof: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(dof, 2.0 * model.report.posterior.a_n);

    let out = hierreg(&["predict", "--model", path(&model_path), "--x", "0.5,-1,2"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().lines().nth(1).unwrap().starts_with("NEW,"));

    let out = hierreg(&["predict", "--model", path(&model_path), "--x", "0.5,-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("D = 3"), "{}", stderr(&out));

    let out = hierreg(&["predict", "--model", path(&model_path), "--x", "0.5,-1,2", "--group", "group 99"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("group 5"), "{}", stderr(&out));
}

#[test]
fn cv_and_ols_artifacts_load() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 4, 2);
    let cv_dir = dir.path().join("cv");
    let mut args = vec!["cv", "--data", path(&data), "--folds", "5", "--seed", "4", "--out", path(&cv_dir)];
    args.extend(SIM_COLUMNS);
    let out = hierreg(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let reports: Vec<CvReport> = serde_json::from_str(&fs::read_to_string(cv_dir.join("cv.json")).unwrap()).unwrap();
    let names: Vec<&str> = reports.iter().map(|r| r.model_name.as_str()).collect();
    assert_eq!(names, vec!["vb", "ols", "ridge"]);
    assert!(reports.iter().all(|r| r.fold_mses.len() == 5 && r.seed == 4));
    let csv = fs::read_to_string(cv_dir.join("cv.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "fold,vb,ols,ridge");
    assert!(csv.lines().last().unwrap().starts_with("mean,"));

    let ols = dir.path().join("ols.csv");
    let mut args = vec!["ols", "--data", path(&data), "--out", path(&ols)];
    args.extend(SIM_COLUMNS);
    assert!(hierreg(&args).status.success());
    let mut reader = csv::Reader::from_path(&ols).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        vec!["item", "estimate", "std_error", "t_value", "p_value"]
    );
    let items: Vec<String> = reader.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(items, vec!["(Intercept)", "x1", "x2"]);
}

#[test]
fn compare_gibbs_table() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, 6, 2);
    let table = dir.path().join("compare.csv");
    let mut args = vec![
        "compare-gibbs",
        "--data",
        path(&data),
        "--n-iter",
        "20000",
        "--burn-in",
        "2000",
        "--seed",
        "1",
        "--out",
        path(&table),
    ];
    args.extend(SIM_COLUMNS);
    let out = hierreg(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = read_compare_csv(fs::File::open(&table).unwrap()).unwrap();
    let (c, d) = (6, 2);
    assert_eq!(rows.len(), c * d + 2 * d + 2);

    let betas: Vec<_> = rows.iter().filter(|r| r.parameter.starts_with("beta")).collect();
    let narrower = betas
        .iter()
        .filter(|r| r.vb_upper - r.vb_lower <= r.gibbs_upper - r.gibbs_lower)
        .count();
    assert!(narrower * 10 >= betas.len() * 9, "{narrower}/{}", betas.len());
}

#[test]
fn turkiye_schema_with_default_columns() {
    // Synthetic stand-in with the evaluation file's header and ordinal codes.
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("turkiye.csv");
    let mut header = vec!["instr".to_string(), "class".to_string()];
    header.extend(turkiye_feature_names().into_iter().take(2));
    header.push("difficulty".into());
    header.extend(turkiye_feature_names().into_iter().skip(2));
    let mut text = header.join(",") + "\n";
    let mut state: u64 = 12345;
    let mut next = |m: u64| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) % m
    };
    for r in 0..130 {
        let class = r % 13 + 1;
        let mut row = vec![(r % 3 + 1).to_string(), class.to_string()];
        row.push((next(3) + 1).to_string());
        row.push(next(5).to_string());
        row.push((next(5) + 1).to_string());
        row.extend((0..28).map(|_| (next(5) + 1).to_string()));
        text += &(row.join(",") + "\n");
    }
    fs::write(&file, text).unwrap();

    let model_path = dir.path().join("model.json");
    let out = hierreg(&["fit", "--data", path(&file), "--out", path(&model_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let model = ModelFile::load(&model_path).unwrap();
    assert_eq!(model.feature_names.len(), 30);
    assert_eq!(model.feature_names[..2], ["nb.repeat", "attendance"]);
    assert_eq!(model.group_labels.len(), 13);
    assert_eq!(model.group_labels[6], "class 7");
}
