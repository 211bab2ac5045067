use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_regret-pricer"));
    c.env_remove("REGRET_PRICER_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write(name: &str, text: &str) -> String {
    let p = scratch(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn det_single_entry() {
    let inst = write(
        "det1.json",
        r#"{"kind":"deterministic","buyers":1,"items":1,"valuations":[[5]]}"#,
    );
    let out = scratch("det1-out.json");
    let o = run(&[
        "solve",
        "--instance",
        &inst,
        "--mode",
        "det",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("mode=det value=5 regret=none sold=1"));
    let r = json(out.to_str().unwrap());
    assert_eq!(r["revenue"], 5.0);
    assert_eq!(r["prices"][0], 5.0);
}

#[test]
fn robust_single_interval() {
    let inst = write(
        "k1.json",
        r#"{"kind":"interval","buyers":1,"items":1,"lower":[[2]],"upper":[[5]]}"#,
    );
    let out = scratch("k1-out.json");
    let o = run(&["solve", "--instance", &inst, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let r = json(out.to_str().unwrap());
    assert_eq!(r["regret"], 0.0);
    assert_eq!(r["prices"][0], 2.0);
    assert_eq!(r["cuts"], 1);
}

#[test]
fn heuristic_then_verify() {
    let inst = write(
        "h.json",
        r#"{"kind":"deterministic","buyers":2,"items":2,"valuations":[[10,9],[6,8]]}"#,
    );
    let out = scratch("h-out.json");
    let out = out.to_str().unwrap();
    let o = run(&["solve", "--instance", &inst, "--mode", "heuristic", "--out", out]);
    assert!(o.status.success());
    assert_eq!(json(out)["revenue"], 17.0);

    let ok = run(&["verify", "--instance", &inst, "--result", out]);
    assert!(ok.status.success(), "{}", stdout(&ok));

    let mut bad = json(out);
    bad["utilities"][0] = serde_json::json!(0.0);
    let bad_path = write("h-bad.json", &bad.to_string());
    let o = run(&["verify", "--instance", &inst, "--result", &bad_path]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("FAIL envy-freeness: envy constraint (buyer 0 vs bundle of buyer 1)"));
}

#[test]
fn invalid_inputs_exit_2() {
    assert_eq!(run(&["gen", "--k", "0"]).status.code(), Some(2));
    let inst = write(
        "iv.json",
        r#"{"kind":"interval","buyers":1,"items":1,"lower":[[2]],"upper":[[5]]}"#,
    );
    // det mode on an interval instance needs a scenario
    assert_eq!(
        run(&["solve", "--instance", &inst, "--mode", "det"]).status.code(),
        Some(2)
    );
    let bad = write(
        "neg.json",
        r#"{"kind":"interval","buyers":1,"items":1,"lower":[[5]],"upper":[[2]]}"#,
    );
    assert_eq!(run(&["solve", "--instance", &bad]).status.code(), Some(2));
}

#[test]
fn gen_is_reproducible() {
    let args = ["gen", "--k", "3", "--seed", "11"];
    let (a, b) = (run(&args), run(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let other = run(&["gen", "--k", "3", "--seed", "12"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn seed_falls_back_to_env() {
    let explicit = run(&["gen", "--k", "2", "--seed", "42"]);
    let from_env = bin()
        .args(["gen", "--k", "2"])
        .env("REGRET_PRICER_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(explicit.stdout, from_env.stdout);
}

#[test]
fn bench_edge_cases() {
    let o = run(&["bench", "--k-list", "", "--xmin", "1", "--xmax", "2", "--delta", "0"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).trim(),
        "K,optimal_regret,robust_revenue,robust_welfare,sold_items,time_s,reps"
    );

    let o = run(&[
        "bench",
        "--k-list",
        "2",
        "--reps",
        "1",
        "--xmin",
        "1",
        "--xmax",
        "20",
        "--delta",
        "0",
        "--no-timing",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "2");
    assert_eq!(row[1].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn verbose_logs_iterations() {
    let inst = scratch("v.json");
    let inst = inst.to_str().unwrap();
    assert!(run(&["gen", "--k", "2", "--seed", "1", "--out", inst]).status.success());
    let quiet = run(&["solve", "--instance", inst]);
    assert!(!String::from_utf8_lossy(&quiet.stderr).contains("iter="));
    let loud = run(&["--verbose", "solve", "--instance", inst]);
    assert!(String::from_utf8_lossy(&loud.stderr).contains("iter=1 lb="));
}
