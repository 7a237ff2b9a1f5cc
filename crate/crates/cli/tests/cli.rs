use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use permci::PermutationPlan;

const FIXTURE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/fixtures/weather_synthetic.csv"
);

fn permci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permci"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

fn weather_joint(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "joint",
        "--input",
        FIXTURE,
        "--statistic",
        "two-sample",
        "--group-col",
        "region",
        "--exclude-cols",
        "station",
        "--output",
        out.to_str().unwrap(),
    ];
    if !extra.contains(&"--permutations") {
        args.extend(["--permutations", "2000"]);
    }
    args.extend(extra);
    permci(&args)
}

#[test]
fn weather_joint_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = weather_joint(&out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(
        stdout.contains("Atlantic (n=15) minus Continental (n=9)"),
        "{stdout}"
    );
    assert!(stdout.contains("K=12"));
    assert!(stdout.contains("Sidak 54.0%, Bonferroni 40.0%"), "{stdout}");

    let results = read_csv(&out.join("results.csv"));
    assert_eq!(results.len(), 13);
    assert_eq!(results[0][0], "coordinate");
    assert_eq!(results[1][0], "jan");
    assert_eq!(results[12][0], "dec");
    for row in &results[1..] {
        let (est, lo, hi): (f64, f64, f64) = (
            row[1].parse().unwrap(),
            row[2].parse().unwrap(),
            row[4].parse().unwrap(),
        );
        assert!(lo <= est && est <= hi);
        let (alo, ahi): (f64, f64) = (row[8].parse().unwrap(), row[10].parse().unwrap());
        assert!(alo <= lo && hi <= ahi, "adjusted interval must be wider");
    }
    let summary = read_csv(&out.join("summary.csv"));
    let get = |key: &str| summary.iter().find(|r| r[0] == key).unwrap()[1].clone();
    assert_eq!(get("k"), "12");
    let am: f64 = get("alpha_multiple").parse().unwrap();
    assert!((0.05..=0.6).contains(&am));
    let achieved: f64 = get("achieved_alpha_multiple").parse().unwrap();
    assert!(achieved <= 0.05 + 1.0 / 640.0);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["command"], "joint");
    assert_eq!(manifest["config"]["permutations"], 2000);
    assert_eq!(manifest["input_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest.get("output").is_none());
}

#[test]
fn reruns_are_identical_and_seed_matters() {
    let tmp = tempfile::tempdir().unwrap();
    let a = weather_joint(&tmp.path().join("a"), &["--seed", "5"]);
    let b = weather_joint(&tmp.path().join("b"), &["--seed", "5", "--threads", "3"]);
    weather_joint(&tmp.path().join("c"), &["--seed", "6"]);
    assert_eq!(a.stdout, b.stdout);
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("results.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn infinite_limits_are_encoded() {
    let tmp = tempfile::tempdir().unwrap();
    // n1 = 1: a third of all permutations keep the lone observation in place
    let input = write(tmp.path(), "tiny.csv", "g,y\na,1.0\nb,0.2\nb,-0.4\n");
    let run = |fmt: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = permci(&[
            "ci",
            "--input",
            input.to_str().unwrap(),
            "--statistic",
            "two-sample",
            "--group-col",
            "g",
            "--permutations",
            "300",
            "--format",
            fmt,
            "--output",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let json: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run("json", "j").join("results.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["intervals"][0]["lower"], "-inf");
    assert_eq!(json["intervals"][0]["upper"], "+inf");
    let rows = read_csv(&run("csv", "c").join("results.csv"));
    assert_eq!(&rows[1][2..6], &["", "true", "", "true"]);
}

#[test]
fn regression_mode_and_plan_export() {
    let tmp = tempfile::tempdir().unwrap();
    let mut text = String::from("x,y1,y2\n");
    for i in 0..12 {
        let x = i as f64;
        text += &format!(
            "{x},{},{}\n",
            2.0 * x + ((i * 7) % 5) as f64 * 0.3,
            -x + ((i * 3) % 4) as f64 * 0.5
        );
    }
    let input = write(tmp.path(), "reg.csv", &text);
    let out = tmp.path().join("out");
    let o = permci(&[
        "ci",
        "--input",
        input.to_str().unwrap(),
        "--statistic",
        "linreg",
        "--x-col",
        "x",
        "--permutations",
        "500",
        "--export-plan",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("results.csv"));
    let lo: f64 = rows[1][2].parse().unwrap();
    let hi: f64 = rows[1][4].parse().unwrap();
    assert!(lo < 2.0 && 2.0 < hi, "[{lo}, {hi}]");
    let plan = PermutationPlan::read_text(std::io::BufReader::new(
        std::fs::File::open(out.join("plan.txt")).unwrap(),
    ))
    .unwrap();
    assert_eq!((plan.n(), plan.len(), plan.seed()), (12, 500, 0));
    assert_eq!(plan, PermutationPlan::sample(12, 500, 0).unwrap());
}

#[test]
fn bootstrap_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let o = permci(&[
        "bootstrap",
        "--input",
        FIXTURE,
        "--statistic",
        "two-sample",
        "--group-col",
        "region",
        "--columns",
        "jan",
        "--permutations",
        "1000",
        "--bootstrap",
        "150",
        "--format",
        "json",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    let lim = &doc["limits"][0];
    let l = lim["lower"].as_f64().unwrap();
    assert!(
        lim["lower_interval"][0].as_f64().unwrap() <= l
            && l <= lim["lower_interval"][1].as_f64().unwrap()
    );
    assert_eq!(doc["replicates"], 150);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out_s = out.to_str().unwrap();

    let bad = write(tmp.path(), "bad.csv", "g,y\na,1\nb,oops\n");
    let o = permci(&[
        "ci",
        "--input",
        bad.to_str().unwrap(),
        "--statistic",
        "two-sample",
        "--group-col",
        "g",
        "--permutations",
        "100",
        "--output",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("line 3") && err.contains("`y`") && err.contains("oops"),
        "{err}"
    );

    let three = write(tmp.path(), "three.csv", "g,y\na,1\nb,2\nc,3\n");
    let o = permci(&[
        "ci",
        "--input",
        three.to_str().unwrap(),
        "--statistic",
        "two-sample",
        "--group-col",
        "g",
        "--permutations",
        "100",
        "--output",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(3));

    let o = permci(&[
        "ci",
        "--input",
        "/nonexistent/x.csv",
        "--statistic",
        "two-sample",
        "--group-col",
        "g",
        "--permutations",
        "100",
        "--output",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(7));

    let o = weather_joint(&out, &["--permutations", "50"]);
    assert_eq!(o.status.code(), Some(4));
    let o = weather_joint(&out, &["--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(4));
    let o = permci(&["joint", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));

    let warn = weather_joint(&out, &["--permutations", "200"]);
    assert!(warn.status.success());
    assert!(String::from_utf8_lossy(&warn.stderr).contains("warning"));
}

#[test]
fn replay_refuses_changed_input() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("w.csv");
    std::fs::copy(FIXTURE, &input).unwrap();
    let first = tmp.path().join("first");
    let o = permci(&[
        "ci",
        "--input",
        input.to_str().unwrap(),
        "--statistic",
        "two-sample",
        "--group-col",
        "region",
        "--exclude-cols",
        "station",
        "--permutations",
        "500",
        "--output",
        first.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let manifest = first.join("manifest.json");
    let again = permci(&[
        "replay",
        "--manifest",
        manifest.to_str().unwrap(),
        "--output",
        tmp.path().join("second").to_str().unwrap(),
    ]);
    assert!(again.status.success());
    assert_eq!(o.stdout, again.stdout);

    let mut text = std::fs::read_to_string(&input).unwrap();
    text.push_str("Atlantic,A99,1,1,1,1,1,1,1,1,1,1,1,1\n");
    std::fs::write(&input, text).unwrap();
    let refused = permci(&[
        "replay",
        "--manifest",
        manifest.to_str().unwrap(),
        "--output",
        tmp.path().join("third").to_str().unwrap(),
    ]);
    assert_eq!(refused.status.code(), Some(9));
}

#[test]
fn simulate_small() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let o = permci(&[
        "simulate",
        "--runs",
        "5",
        "--permutations",
        "300",
        "--rhos",
        "0.5,0.99",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_csv(&out.join("results.csv")).len(), 3);
    assert_eq!(read_csv(&out.join("replicates.csv")).len(), 11);
    assert_eq!(read_csv(&out.join("regressor.csv")).len(), 21);
}
