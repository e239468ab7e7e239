use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn robustcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robustcf"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_ratings(path: &Path, users: u64, items: u64) {
    let mut text = String::from("user,item,rating\n");
    for u in 0..users {
        for i in 0..items {
            if (u * 7 + i * 3) % 5 != 0 {
                text.push_str(&format!("{},{},{}\n", 100 + u, 10 + i, (u + i) % 5 + 1));
            }
        }
    }
    fs::write(path, text).unwrap();
}

#[test]
fn bound_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = robustcf(&[
        "bound",
        "--r",
        "0.1",
        "--n-max",
        "22",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let table = fs::read_to_string(dir.path().join("bnd_0.10.table")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 22);
    let last: Vec<&str> = lines[21].split_whitespace().collect();
    assert_eq!(last[0], "22");
    let v: f64 = last[1].parse().unwrap();
    assert!((v - ((1.0f64 / 0.9).ln() / 44.0).sqrt()).abs() < 1e-9);
}

#[test]
fn bound_rejects_bad_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let out = robustcf(&["bound", "--r", "1.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes() {
    let out = robustcf(&["verify", "--instances", "30", "--seed", "3"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("PASS"));
    assert!(!text.lines().any(|l| l.starts_with("FAIL")), "{text}");
}

#[test]
fn ingest_then_attack() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ratings.csv");
    let cache = dir.path().join("ratings.bin");
    let attack = dir.path().join("attack.csv");
    write_ratings(&csv, 40, 8);

    let out = robustcf(&[
        "ingest",
        "--input",
        csv.to_str().unwrap(),
        "--out",
        cache.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).starts_with("users 40 items 8"));

    let out = robustcf(&[
        "attack",
        "--data",
        cache.to_str().unwrap(),
        "--r",
        "0.2",
        "--seed",
        "9",
        "--out",
        attack.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).starts_with("profiles 10 "));
    let text = fs::read_to_string(&attack).unwrap();
    let mut users = std::collections::BTreeSet::new();
    for line in text.lines().skip(1) {
        let f: Vec<u64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(f[0] >= 140);
        assert!((10..18).contains(&f[1]));
        assert!((1..=5).contains(&f[2]));
        users.insert(f[0]);
    }
    assert_eq!(users.len(), 10);

    let again = dir.path().join("again.csv");
    robustcf(&[
        "attack",
        "--data",
        csv.to_str().unwrap(),
        "--r",
        "0.2",
        "--seed",
        "9",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(&attack).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn experiment_on_tiny_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.conf");
    fs::write(
        &config,
        "data = synthetic\nsynthetic.users = 120\nsynthetic.products = 8\nsynthetic.question_rate = 0.2\n\
         honest = 90\ntest = 30\nr = 0.2\nn_max = 4\nalgorithms = kde,knn\nknn.grid = 1..5\nreplications = 1\nseed = 5\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = robustcf(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    for name in [
        "kde_errors.table",
        "knn_errors.table",
        "kde_distortions_0.20.table",
        "summary.txt",
    ] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
    assert!(stdout(&out).contains("bound(n=4)"));

    let eval_dir = dir.path().join("eval");
    let out = robustcf(&[
        "eval",
        "--algo",
        "kde",
        "--config",
        config.to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(eval_dir.join("kde_errors.table").is_file());
    assert!(!eval_dir.join("knn_errors.table").exists());
}

#[test]
fn missing_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = robustcf(&[
        "ingest",
        "--input",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--out",
        dir.path().join("x.bin").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
