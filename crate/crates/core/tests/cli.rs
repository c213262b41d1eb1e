//! Exit codes, output layout and sweep summaries of the `memsim` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const AGENT_HEADER: &str =
    "day,agent_id,learning,memory_model,profit,orders_completed,effective_steps,decisions_memory,decisions_learning";
const SYSTEM_HEADER: &str = "day,orders_generated,orders_delivered,orders_expired,completion_rate";
const SUMMARY_HEADER: &str =
    "learning,memory_model,seed,mean_profit,median_profit,mean_orders,mean_effective_steps,completion_rate,agent_days";

fn memsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memsim")).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("small.toml");
    let text = format!("seed = 3\nn_agents = 6\nsteps = 720\nwidth = 200\nheight = 200\n{extra}");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn run_writes_csvs_with_exact_headers_and_row_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "memory_model = \"mmdm\"\n");
    let out = tmp.path().join("out");
    let o = memsim(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let agent = fs::read_to_string(out.join("agent_daily.csv")).unwrap();
    let system = fs::read_to_string(out.join("system_daily.csv")).unwrap();
    assert_eq!(agent.lines().next(), Some(AGENT_HEADER));
    assert_eq!(system.lines().next(), Some(SYSTEM_HEADER));
    assert_eq!(agent.lines().count(), 1 + 6 * 2);
    assert_eq!(system.lines().count(), 1 + 2);
    assert!(out.join("config.toml").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        assert!(memsim(&["run", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]).status.success());
        fs::read_to_string(out.join("config.toml")).unwrap()
    };
    assert!(run("a", "17").contains("seed = 17"));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    let unknown = small_config(tmp.path(), "bogus_key = 1\n");
    assert_eq!(memsim(&["run", "--config", &unknown, "--out", out]).status.code(), Some(2));
    let range = small_config(tmp.path(), "[credibility]\ntheta_memory = 1.5\n");
    assert_eq!(memsim(&["run", "--config", &range, "--out", out]).status.code(), Some(2));
    let missing = tmp.path().join("nope.toml");
    assert_eq!(memsim(&["run", "--config", missing.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    let ok = small_config(tmp.path(), "");
    let bad_learning = memsim(&["sweep", "--config", &ok, "--learnings", "genetic", "--memories", "none", "--seeds", "1", "--out", out]);
    assert_eq!(bad_learning.status.code(), Some(2));
    let bad_seeds = memsim(&["sweep", "--config", &ok, "--learnings", "rule", "--memories", "none", "--seeds", "5..2", "--out", out]);
    assert_eq!(bad_seeds.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    assert_eq!(memsim(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(3));
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[test]
fn sweep_summary_matches_raw_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let out = tmp.path().join("sweep");
    let o = memsim(&[
        "sweep", "--config", &cfg, "--learnings", "rule,qlearning", "--memories", "none,mmdm", "--seeds", "1..2", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next(), Some(SUMMARY_HEADER));
    let summary = rows(&out.join("summary.csv"));
    assert_eq!(summary.len(), 8);
    for s in summary {
        let dir = out.join(format!("{}-{}-seed{}", s[0], s[1], s[2]));
        let agent = rows(&dir.join("agent_daily.csv"));
        let system = rows(&dir.join("system_daily.csv"));
        let col = |i: usize| agent.iter().map(|r| r[i].parse::<f64>().unwrap()).collect::<Vec<f64>>();
        let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        let generated: f64 = system.iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
        let delivered: f64 = system.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
        let expect = [
            mean(col(4)),
            median(col(4)),
            mean(col(5)),
            mean(col(6)),
            if generated == 0.0 { 0.0 } else { delivered / generated },
        ];
        for (k, e) in expect.iter().enumerate() {
            let got: f64 = s[3 + k].parse().unwrap();
            assert!((got - e).abs() < 1e-5, "{} column {}: {got} vs {e}", dir.display(), 3 + k);
        }
        assert_eq!(s[8].parse::<usize>().unwrap(), agent.len());
        assert!(agent.iter().all(|r| r[2] == s[0] && r[3] == s[1]));
    }
}

#[test]
fn validate_passes() {
    let o = memsim(&["validate"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}
