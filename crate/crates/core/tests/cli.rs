use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use unmasking_trees::dataset::{load_csv, save_csv, two_moons};
use unmasking_trees::engine;

const IRIS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/iris.csv");

fn umtr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_umtr"))
        .args(args)
        .env_remove("UMTR_THREADS")
        .output()
        .expect("run umtr")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const FAST: [&str; 6] = ["--kdup", "3", "--rounds", "10", "--seed", "4"];

fn fit_iris(dir: &Path) -> std::path::PathBuf {
    let model = dir.join("iris.umtr");
    let mut args = vec!["fit", "--data", IRIS, "--out", p(&model)];
    args.extend(FAST);
    let out = umtr(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    model
}

#[test]
fn fit_writes_model_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = fit_iris(dir.path());
    let model = engine::load_model(&model_path).unwrap();
    assert_eq!(model.classifiers().len(), 5);
    assert_eq!(model.config().k_dup, 3);
    let manifest = fs::read_to_string(dir.path().join("iris.umtr.manifest.txt")).unwrap();
    for key in ["argv = ", "command = fit", "input.data.crc32 = ", "output.model.crc32 = ", "config.seed = 4", "wall_clock_seconds = "] {
        assert!(manifest.contains(key), "missing {key:?} in\n{manifest}");
    }
    let crc = format!("{:08x}", crc32fast::hash(&fs::read(&model_path).unwrap()));
    assert!(manifest.contains(&format!("output.model.crc32 = {crc}")));
}

#[test]
fn fit_with_default_settings_on_iris() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("m.umtr");
    let out = umtr(&["fit", "--data", IRIS, "--out", p(&model_path)]);
    assert_eq!(code(&out), 0);
    let model = engine::load_model(&model_path).unwrap();
    assert_eq!(model.classifiers().len(), 5);
    assert_eq!(model.config().n_bins, 20);
    assert_eq!(model.config().k_dup, 50);
    assert_eq!(model.config().top_p, 0.9);
}

#[test]
fn generate_is_reproducible_and_handles_zero_rows() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_iris(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        assert_eq!(code(&umtr(&["generate", "--model", p(&model), "--n", "50", "--seed", "7", "--out", p(path)])), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let data = load_csv(&a, None).unwrap();
    assert_eq!(data.n_rows(), 50);
    assert!(data.is_fully_observed());
    assert!(dir.path().join("a.csv.manifest.txt").exists());

    let empty = dir.path().join("empty.csv");
    assert_eq!(code(&umtr(&["generate", "--model", p(&model), "--n", "0", "--out", p(&empty)])), 0);
    assert_eq!(
        fs::read_to_string(&empty).unwrap(),
        "sepal_length,sepal_width,petal_length,petal_width,species\n"
    );
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_iris(dir.path());
    let one = dir.path().join("one.csv");
    let many = dir.path().join("many.csv");
    let env_out = Command::new(env!("CARGO_BIN_EXE_umtr"))
        .args(["generate", "--model", p(&model), "--n", "40", "--out", p(&one)])
        .env("UMTR_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&env_out), 0);
    assert!(fs::read_to_string(dir.path().join("one.csv.manifest.txt")).unwrap().contains("threads = 1"));
    assert_eq!(code(&umtr(&["--threads", "3", "generate", "--model", p(&model), "--n", "40", "--out", p(&many)])), 0);
    assert_eq!(fs::read(&one).unwrap(), fs::read(&many).unwrap());
}

#[test]
fn impute_writes_numbered_completions() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_iris(dir.path());
    let holes = dir.path().join("holes.csv");
    fs::write(
        &holes,
        "sepal_length,sepal_width,petal_length,petal_width,species\n5.1,,1.4,0.2,setosa\n,3.0,NA,,virginica\n6.0,2.9,4.5,1.5,versicolor\n",
    )
    .unwrap();
    let out_dir = dir.path().join("imp");
    let out = umtr(&["impute", "--model", p(&model), "--data", p(&holes), "--m", "3", "--seed", "2", "--out-dir", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for k in 0..3 {
        let text = fs::read_to_string(out_dir.join(format!("imputed_{k:03}.csv"))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("5.1,") && lines[1].ends_with(",1.4,0.2,setosa"));
        assert!(lines[2].ends_with(",virginica"));
        assert_eq!(lines[3], "6.0,2.9,4.5,1.5,versicolor");
    }
    assert!(!out_dir.join("imputed_003.csv").exists());
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("output.imputed.2.crc32"));
}

#[test]
fn fully_observed_input_is_copied() {
    let dir = tempfile::tempdir().unwrap();
    let data = two_moons(30, 0.1, 0).unwrap();
    let csv = dir.path().join("moons.csv");
    save_csv(&data, &csv).unwrap();
    let model = dir.path().join("moons.umtr");
    let mut args = vec!["fit", "--data", p(&csv), "--out", p(&model)];
    args.extend(FAST);
    assert_eq!(code(&umtr(&args)), 0);
    let out_dir = dir.path().join("out");
    assert_eq!(code(&umtr(&["impute", "--model", p(&model), "--data", p(&csv), "--m", "2", "--out-dir", p(&out_dir)])), 0);
    for k in 0..2 {
        assert_eq!(fs::read(out_dir.join(format!("imputed_{k:03}.csv"))).unwrap(), fs::read(&csv).unwrap());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_iris(dir.path());

    assert_eq!(code(&umtr(&["fit", "--nonsense"])), 2);
    let bad_number = dir.path().join("bad.csv");
    fs::write(&bad_number, "a,b\n1.5,2.5\n2.5,oops\n").unwrap();
    let schema = dir.path().join("bad.schema");
    fs::write(&schema, "a,continuous\nb,continuous\n").unwrap();
    let out = umtr(&["fit", "--data", p(&bad_number), "--schema", p(&schema), "--out", p(&dir.path().join("x"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("oops"));

    let empty_column = dir.path().join("empty_col.csv");
    fs::write(&empty_column, "a,b\n1.5,\n2.5,\n3.5,\n").unwrap();
    assert_eq!(code(&umtr(&["fit", "--data", p(&empty_column), "--out", p(&dir.path().join("y"))])), 3);

    let corrupt = dir.path().join("corrupt.umtr");
    let mut bytes = fs::read(&model).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xFF;
    fs::write(&corrupt, bytes).unwrap();
    let out = umtr(&["generate", "--model", p(&corrupt), "--n", "3", "--out", p(&dir.path().join("g.csv"))]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));

    let other = dir.path().join("other.csv");
    fs::write(&other, "x,y\n1,2\n").unwrap();
    let out = umtr(&["impute", "--model", p(&model), "--data", p(&other), "--out-dir", p(&dir.path().join("o"))]);
    assert_eq!(code(&out), 5);
}

#[test]
fn bench_iris_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let run = umtr(&["bench", "--suite", "iris", "--seed", "3", "--out", p(out)]);
        assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    }
    let report = fs::read_to_string(a.join("report.txt")).unwrap();
    assert_eq!(report, fs::read_to_string(b.join("report.txt")).unwrap());
    assert!(report.contains("petal_length.avg_mae = "));
    assert!(report.contains("iris.setosa.petal_length_w1 = "));
    for name in ["model.umtr", "manifest.txt", "report.csv", "truth.csv", "masked.csv", "generated.csv", "imputed_points_009.csv"] {
        assert!(a.join(name).exists(), "{name}");
    }
    assert_eq!(fs::read(a.join("imputed_points_000.csv")).unwrap(), fs::read(b.join("imputed_points_000.csv")).unwrap());
}

#[test]
fn bench_moons_writes_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("moons");
    let run = umtr(&["bench", "--suite", "moons", "--out", p(&out)]);
    assert_eq!(code(&run), 0);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("moons.imputed_on_manifold = "));
    let imputed = load_csv(out.join("imputed_points_000.csv"), None).unwrap();
    assert_eq!(imputed.n_rows(), 200);
    assert!(imputed.is_fully_observed());
    let generated = load_csv(out.join("generated.csv"), None).unwrap();
    assert_eq!(generated.n_rows(), 200);
}
