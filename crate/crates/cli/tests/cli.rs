use std::io::Write;
use std::process::{Command, Output};

fn olps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_olps"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn list_shows_categories_and_parameters() {
    let out = olps(&["list", "--output", "json"]);
    let cat = json(&out);
    let entries = cat.as_array().unwrap();
    let category = |name: &str| {
        entries
            .iter()
            .find(|e| e["name"] == name)
            .map(|e| e["category"].as_str().unwrap().to_string())
    };
    assert_eq!(category("up").as_deref(), Some("Follow-the-Winner"));
    assert_eq!(category("corn").as_deref(), Some("Pattern-Matching"));
    let mut cats: Vec<&str> = entries.iter().map(|e| e["category"].as_str().unwrap()).collect();
    cats.sort();
    cats.dedup();
    assert_eq!(
        cats,
        ["Benchmark", "Follow-the-Loser", "Follow-the-Winner", "Meta-Learning", "Pattern-Matching"]
    );
    let pamr = entries.iter().find(|e| e["name"] == "pamr").unwrap();
    assert!(pamr["params"].as_array().unwrap().iter().any(|p| p["key"] == "eps"));

    let table = stdout(&olps(&["list"]));
    assert!(table.contains("corn") && table.contains("Meta-Learning"));
}

#[test]
fn ucrp_on_cover_gluss_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cg86.csv");
    let gen = olps(&["generate", "--synthetic", "cg86", "--periods", "100", "--out", path.to_str().unwrap()]);
    assert!(gen.status.success());
    let report = json(&olps(&["run", "--data", path.to_str().unwrap(), "--strategy", "ucrp"]));
    let wealth = report["final_wealth"].as_f64().unwrap();
    assert!((wealth / 1.125f64.powi(50) - 1.0).abs() < 1e-9);
    assert_eq!(report["schema"], 1);
    assert_eq!(report["n"], 100);
    assert_eq!(report["m"], 2);
    assert!(report["regret"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn prices_file_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prices.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "cash,stock\n10,10\n10,20\n10,10\n10,20").unwrap();
    let report = json(&olps(&[
        "run", "--data", path.to_str().unwrap(), "--format", "prices", "--header", "--strategy", "bah",
    ]));
    assert_eq!(report["n"], 3);
    assert!((report["final_wealth"].as_f64().unwrap() - 1.5).abs() < 1e-12);
}

#[test]
fn unknown_strategy_exits_2() {
    let out = olps(&["run", "--synthetic", "cg86", "--strategy", "nosuch"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nosuch"));
    let bad_param = olps(&["run", "--synthetic", "cg86", "--strategy", "pamr", "--params", "eps=7"]);
    assert_eq!(bad_param.status.code(), Some(2));
    let unknown_key = olps(&["run", "--synthetic", "cg86", "--strategy", "eg", "--params", "speed=1"]);
    assert_eq!(unknown_key.status.code(), Some(2));
}

#[test]
fn bad_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "1,2\n0,1\n").unwrap();
    let out = olps(&["run", "--data", path.to_str().unwrap(), "--strategy", "ucrp"]);
    assert_eq!(out.status.code(), Some(3));
    std::fs::write(&path, "1,2\n1\n").unwrap();
    assert_eq!(olps(&["run", "--data", path.to_str().unwrap(), "--strategy", "ucrp"]).status.code(), Some(3));
    let missing = dir.path().join("missing.csv");
    assert_eq!(olps(&["run", "--data", missing.to_str().unwrap(), "--strategy", "ucrp"]).status.code(), Some(3));
}

#[test]
fn meta_bah_reports_expert_wealths() {
    let report = json(&olps(&[
        "run", "--synthetic", "iid", "--assets", "3", "--periods", "60", "--seed", "5", "--strategy", "meta:bah",
        "--experts", "pamr,olmar(window=3)",
    ]));
    let experts = report["expert_summaries"].as_array().unwrap();
    assert_eq!(experts.len(), 2);
    let mean = experts.iter().map(|e| e["wealth"].as_f64().unwrap()).sum::<f64>() / 2.0;
    assert!((report["final_wealth"].as_f64().unwrap() - mean).abs() < 1e-12);
    assert_eq!(report["experts"], serde_json::json!(["pamr", "olmar(window=3)"]));
}

#[test]
fn meta_params_alias() {
    let report = json(&olps(&[
        "run", "--synthetic", "cg86", "--strategy", "meta:aa", "--experts", "ucrp,pamr", "--meta-params", "eta=0.5",
    ]));
    assert_eq!(report["params"]["eta"], "0.5");
}

#[test]
fn costs_and_wealth_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wealth.csv");
    let report = json(&olps(&[
        "run", "--synthetic", "cg86", "--periods", "10", "--strategy", "pamr", "--tc-buy", "0.01", "--tc-sell", "0.01",
        "--wealth-csv", path.to_str().unwrap(),
    ]));
    assert!(report["total_costs"].as_f64().unwrap() > 0.0);
    assert_eq!(report["costs"]["gamma_buy"], 0.01);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.starts_with("period,wealth"));
}

#[test]
fn reports_are_byte_identical() {
    let args = ["run", "--synthetic", "iid", "--assets", "4", "--periods", "40", "--seed", "9", "--strategy", "up", "--params", "mode=mc,samples=200"];
    let a = olps(&args);
    let b = olps(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let all = ["run", "--synthetic", "iid", "--assets", "3", "--periods", "30", "--all", "--output", "csv"];
    let x = olps(&all);
    assert!(x.status.success(), "{}", String::from_utf8_lossy(&x.stderr));
    assert_eq!(x.stdout, olps(&all).stdout);
    assert_eq!(stdout(&x).lines().count(), 1 + 34);
}
