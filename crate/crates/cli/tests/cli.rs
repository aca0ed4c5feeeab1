use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fraclap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclap"))
        .current_dir(dir)
        .env_remove("FRACLAP_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn header_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("# {key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in header:\n{text}"))
        .to_string()
}

#[test]
fn spectrum_csv_is_stamped_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["--out-dir", "a", "spectrum", "--space", "cantor:2,2,3", "--s", "0.75"];
    assert!(fraclap(tmp.path(), &args).status.success());
    let first = fs::read(tmp.path().join("a/spectrum.csv")).unwrap();
    assert!(fraclap(tmp.path(), &args).status.success());
    assert_eq!(first, fs::read(tmp.path().join("a/spectrum.csv")).unwrap());

    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("# fraclap "));
    assert_eq!(header_value(&text, "command"), "spectrum");
    assert_eq!(header_value(&text, "config_sha256").len(), 64);
    header_value(&text, "seed").parse::<u64>().unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("index,eigenvalue"));
    assert_eq!(rows.len(), 9);
    let second_eigenvalue: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((second_eigenvalue - 1.0).abs() < 1e-10);

    assert!(fraclap(tmp.path(), &["--out-dir", "b", "spectrum", "--space", "cantor:2,2,3", "--s", "0.75"]).status.success());
    let other = fs::read_to_string(tmp.path().join("b/spectrum.csv")).unwrap();
    assert_eq!(header_value(&other, "config_sha256"), header_value(&text, "config_sha256"));

    assert!(fraclap(tmp.path(), &["--out-dir", "c", "spectrum", "--space", "cantor:2,2,3", "--s", "0.5"]).status.success());
    let changed = fs::read_to_string(tmp.path().join("c/spectrum.csv")).unwrap();
    assert_ne!(header_value(&changed, "config_sha256"), header_value(&text, "config_sha256"));
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fraclap"))
        .current_dir(tmp.path())
        .env("FRACLAP_OUT_DIR", "from-env")
        .args(["weyl", "--space", "cantor:2,2,6", "--s", "0.75", "--exact"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("from-env/weyl.json")).unwrap()).unwrap();
    assert_eq!(json["meta"]["command"], "weyl");
    assert!(json["result"].is_object());
}

#[test]
fn run_file_with_override() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        "command = \"mk\"\nseed = 5\n[args]\nspace = \"cantor:2,2,4\"\nalpha = 0.125\nphi = \"dirac:1111\"\npsi = \"dirac:2111\"\nexact = true\nout = \"from-file.json\"\n",
    )
    .unwrap();
    let o = fraclap(tmp.path(), &["--config", "run.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("from-file.json")).unwrap()).unwrap();
    assert_eq!(a["meta"]["seed"], 5);

    let o = fraclap(tmp.path(), &["--config", "run.toml", "--method", "linsolve", "--out", "override.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("override.json")).unwrap()).unwrap();
    assert_eq!(b["result"]["method"], "linsolve");
    let (da, db) = (a["result"]["distance"].as_f64().unwrap(), b["result"]["distance"].as_f64().unwrap());
    assert!((da - db).abs() <= 1e-8 * da);
}

#[test]
fn two_point_space_file() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("two.toml"),
        "kind = \"custom\"\nd_f = 1.0\nd_w = \"inf\"\n[[point]]\nid = \"a\"\nweight = 0.5\n[[point]]\nid = \"b\"\nweight = 0.5\n[[dist]]\na = \"a\"\nb = \"b\"\nvalue = 1.0\n",
    )
    .unwrap();
    assert!(fraclap(tmp.path(), &["space-validate", "--space", "two.toml"]).status.success());
    for method in ["closed", "linsolve", "sup"] {
        let o = fraclap(
            tmp.path(),
            &["mk", "--space", "two.toml", "--alpha", "0.2", "--phi", "dirac:a", "--psi", "dirac:b", "--method", method],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("mk.json")).unwrap()).unwrap();
        assert!((v["result"]["distance"].as_f64().unwrap() - 2.0).abs() < 1e-6, "{method}");
    }

    fs::write(tmp.path().join("bad.toml"), fs::read_to_string(tmp.path().join("two.toml")).unwrap().replace("0.5", "0.0")).unwrap();
    let o = fraclap(tmp.path(), &["space-validate", "--space", "bad.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("weight"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();

    let o = fraclap(p, &["commutator", "--space", "cantor:2,2,4", "--alpha", "0.3", "--beta", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("2α < β"), "{}", stderr(&o));

    let o = fraclap(p, &["mk", "--space", "cantor:2,2,4", "--alpha", "0.1", "--phi", "uniform", "--psi", "uniform", "--p", "4"]);
    assert_eq!(o.status.code(), Some(1));

    assert_eq!(fraclap(p, &["spectrum", "--s", "1"]).status.code(), Some(1));
    assert_eq!(fraclap(p, &["spectrum", "--space", "cantor:1,2,3", "--s", "1"]).status.code(), Some(1));
    assert_eq!(fraclap(p, &["spectrum", "--space", "missing.toml", "--s", "1"]).status.code(), Some(3));
    assert_eq!(fraclap(p, &["--config", "missing.toml"]).status.code(), Some(3));

    let o = fraclap(
        p,
        &["mk", "--space", "cantor:2,2,4", "--alpha", "0.125", "--phi", "dirac:1111", "--psi", "dirac:2111", "--method", "sup", "--max-iter", "2"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn crossed_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    let o = fraclap(p, &["crossed", "length", "--kind", "cantor", "--alpha", "0.2", "--radius", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(p.join("length.csv")).unwrap();
    assert!(text.lines().any(|l| l == "element,norm,length"));
    assert!(text.lines().any(|l| l == "e,0,0"));

    let run = |dir: &str| {
        let o = fraclap(
            p,
            &["--out-dir", dir, "--seed", "11", "crossed", "berezin-test", "--kind", "circle", "--alpha", "0.2", "--radius", "8", "--trials", "10"],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(p.join(dir).join("berezin.json")).unwrap()
    };
    assert_eq!(run("b1"), run("b2"));

    fs::write(p.join("f.csv"), "gamma,point,re,im\n0,pt,1,0\n2,pt,0.5,0.5\n").unwrap();
    let o = fraclap(p, &["crossed", "seminorm", "--kind", "circle", "--alpha", "0.2", "--radius", "8", "--f", "f.csv", "--p", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = fraclap(p, &["crossed", "fourier", "--kind", "cantor", "--alpha", "0.2", "--radius", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = fraclap(p, &["crossed", "seminorm", "--kind", "circle", "--alpha", "0.2", "--base", "cantor:2,2,2", "--f", "f.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_all_reports_every_criterion() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fraclap(tmp.path(), &["verify-all", "--space", "cantor:2,2,3"]);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{out}\n{}", stderr(&o));
    assert_eq!(out.lines().filter(|l| l.starts_with("criterion") && l.contains("[PASS]")).count(), 10);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("verify.json")).unwrap()).unwrap();
    assert!(v["result"].is_object() || v["result"].is_array());
}

#[test]
fn weyl_window_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fraclap(tmp.path(), &["weyl", "--space", "cantor:2,2,6", "--s", "0.75", "--exact", "--window", "0.25,0.75"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("weyl.json")).unwrap()).unwrap();
    assert_eq!(v["result"]["window"], serde_json::json!([0.25, 0.75]));
    let o = fraclap(tmp.path(), &["weyl", "--space", "cantor:2,2,6", "--s", "0.75", "--window", "0.25"]);
    assert_eq!(o.status.code(), Some(1));
}
