use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const STRESS: &[&str] = &["scared", "panic", "worried", "overwhelmed", "hopeless", "afraid"];
const CALM: &[&str] = &["happy", "relaxed", "grateful", "fine", "peaceful", "glad"];
const CONTEXTS: &[(&str, &[&str])] = &[
    ("anxiety", &["heart", "racing", "attacks", "therapist", "breathing"]),
    ("assistance", &["rent", "landlord", "money", "bills", "eviction"]),
    ("relationships", &["boyfriend", "girlfriend", "partner", "breakup", "dating"]),
    ("ptsd", &["flashbacks", "trauma", "nightmares", "triggers", "veteran"]),
];
const FILLER: &[&str] = &["the", "and", "today", "really", "just", "week", "about", "because"];

/// Deterministic synthetic posts in the Dreaddit CSV layout.
fn write_csv(path: &Path, n: usize, offset: usize) {
    let mut w = String::from("subreddit,post_id,text,label,confidence\n");
    for i in 0..n {
        let k = i + offset;
        let (ctx, words) = CONTEXTS[k % CONTEXTS.len()];
        let stress = (k / CONTEXTS.len()) % 2;
        let mood = if stress == 1 { STRESS } else { CALM };
        let len = 30 + (k * 7) % 20;
        let toks: Vec<&str> = (0..len)
            .map(|j| match (j * 31 + k * 17) % 10 {
                0 | 1 => mood[(j + k) % mood.len()],
                2 | 3 => words[(j * 3 + k) % words.len()],
                _ => FILLER[(j * 5 + k) % FILLER.len()],
            })
            .collect();
        w.push_str(&format!("{ctx},p{k},\"{}\",{stress},0.8\n", toks.join(" ")));
    }
    fs::write(path, w).unwrap();
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stress-explain")).args(args).output().unwrap()
}

fn data() -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let test = dir.path().join("test.csv");
    write_csv(&train, 160, 0);
    write_csv(&test, 40, 1000);
    (dir, train, test)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_then_explain_with_saved_models() {
    let (dir, train, _) = data();
    let stress = dir.path().join("models/stress.json");
    let context = dir.path().join("models/context.json");
    for (target, out) in [("stress", &stress), ("context", &context)] {
        let o = run(&["train", "--train", s(&train), "--target", target, "--model", "bnb", "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(dir.path().join("models/stress.vocab.txt").exists());

    let html = dir.path().join("e.html");
    let text = "I am so scared and worried about rent money because the landlord wants the bills paid today and I panic every time I think about eviction";
    let o = run(&[
        "explain", "--stress-model", s(&stress), "--context-model", s(&context), "--text", text,
        "--iterations", "300", "--html-out", s(&html),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let body: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for dir in ["dependent", "independent"] {
        let e = &body[dir]["explanation"];
        let r = e["r"].as_f64().unwrap();
        assert!((0.2..=0.5).contains(&r), "{e}");
        assert!(e["spans"].as_array().unwrap().len() <= 3);
    }
    assert!(fs::read_to_string(&html).unwrap().contains("<mark>"));
}

#[test]
fn eval_classifier_prints_and_writes_report() {
    let (dir, train, test) = data();
    let out = dir.path().join("eval");
    let o = run(&["eval-classifier", "--train", s(&train), "--test", s(&test), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("stress") && stdout.contains("context"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("classifier_report.json")).unwrap()).unwrap();
    assert!(report["stress"]["accuracy"].as_f64().unwrap() > 0.8);
    assert_eq!(report["context"]["per_class"].as_array().unwrap().len(), 3);
}

#[test]
fn experiment_and_sweep_write_outputs() {
    let (dir, train, test) = data();
    let out = dir.path().join("exp");
    let o = run(&[
        "experiment", "--train", s(&train), "--test", s(&test), "--iterations", "200", "--workers", "2",
        "--out-dir", s(&out), "--seed", "5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "table.txt", "stress_histogram.csv", "entropy_histogram.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let first = fs::read(out.join("report.json")).unwrap();
    let o = run(&[
        "experiment", "--train", s(&train), "--test", s(&test), "--iterations", "200", "--workers", "1",
        "--out-dir", s(&out), "--seed", "5",
    ]);
    assert!(o.status.success());
    assert_eq!(first, fs::read(out.join("report.json")).unwrap());

    let sweep = dir.path().join("sweep");
    let o = run(&[
        "sweep-alpha", "--train", s(&train), "--test", s(&test), "--iterations", "100", "--alphas", "0.1,10",
        "--out-dir", s(&sweep),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(sweep.join("alpha_0.1/report.json").exists());
    assert!(sweep.join("alpha_10/table.txt").exists());
    assert_eq!(fs::read_to_string(sweep.join("sweep.csv")).unwrap().lines().count(), 3);
}

#[test]
fn partial_report_exits_one() {
    let (dir, train, test) = data();
    let mut csv = fs::read_to_string(&test).unwrap();
    csv.push_str("anxiety,short,\"too short to explain\",1,0.9\n");
    fs::write(&test, csv).unwrap();
    let out = dir.path().join("exp");
    let o = run(&["experiment", "--train", s(&train), "--test", s(&test), "--iterations", "50", "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["partial"], true);
}

#[test]
fn hard_errors_exit_two() {
    let o = run(&["eval-classifier", "--train", "/nonexistent.csv", "--test", "/nonexistent.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonexistent"));
    let o = run(&["explain", "--text", "hello"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn explain_with_external_scorers() {
    let script = format!("{}/../core/tests/fixtures/mock_scorer.py", env!("CARGO_MANIFEST_DIR"));
    let stress_cmd = format!("python3 '{script}' --labels 0,1 --mode lexicon");
    let ctx_cmd = format!("python3 '{script}' --labels anxiety,assistance,relationships --mode lexicon");
    let text = "my heart is racing and I am scared of another panic attack so I called my therapist about breathing tricks again today";
    let o = run(&[
        "explain", "--model", "external", "--scorer-cmd", &stress_cmd, "--context-scorer-cmd", &ctx_cmd, "--text", text,
        "--iterations", "100", "--quiet", "--direction", "ind",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let body: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(body["independent"]["explanation"]["H"].is_f64());
    assert!(body.get("dependent").is_none());
}
