//! End-to-end runs of the `hyperstar` binary.

use std::path::Path;
use std::process::{Command, Output};

fn hyperstar(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperstar"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn train_writes_outputs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["train", "--synthetic", "--preset", "micro", "--n", "4", "--iters", "12", "--checkpoint-every", "6", "--sample-every", "6"];
    for out in ["a", "b"] {
        let o = hyperstar(&[&base[..], &["--out", out]].concat(), dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let csv = std::fs::read_to_string(dir.path().join("a/losses.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.iter().filter(|r| r.contains(",latent,")).count(), 12);
    assert_eq!(rows.iter().filter(|r| r.contains(",reference,")).count(), 12);
    assert_eq!(csv, std::fs::read_to_string(dir.path().join("b/losses.csv")).unwrap());
    for f in ["ckpt_000006.hsg2", "ckpt_000012.hsg2", "model.hsg2", "samples_000006.png", "samples_000012.png"] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }

    // resuming from the midpoint reproduces the second half
    let o = hyperstar(&["train", "--resume", "a/ckpt_000006.hsg2", "--out", "c"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let resumed = std::fs::read_to_string(dir.path().join("c/losses.csv")).unwrap();
    assert_eq!(resumed.lines().skip(1).collect::<Vec<_>>(), rows[12..]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = hyperstar(&["train", "--synthetic", "--preset", "micro", "--n", "5", "--out", "x"], d);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("divisible by n"), "{}", stderr(&o));

    std::fs::write(d.join("broken.cfg"), "preset = micro\nimage_size = banana\n").unwrap();
    let o = hyperstar(&["train", "--config", "broken.cfg", "--synthetic", "--out", "x"], d);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = hyperstar(&["train", "--data", "missing", "--preset", "micro", "--out", "x"], d);
    assert_eq!(code(&o), 3);

    std::fs::write(d.join("hot.cfg"), "preset = micro\nlr = 1e300\nlr_mapping = 1e300\n").unwrap();
    let o = hyperstar(&["train", "--config", "hot.cfg", "--synthetic", "--iters", "3", "--out", "x"], d);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("non-finite"), "{}", stderr(&o));

    let o = hyperstar(&["init-hist", "--shape", "64x64x3", "--out", "h.csv"], d);
    assert_eq!(code(&o), 2);
    assert!(!d.join("h.csv").exists());
}

#[test]
fn translate_modes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&hyperstar(&["synth-data", "--out", "data", "--size", "8", "--count", "8"], d)), 0);
    let o = hyperstar(&["train", "--data", "data", "--preset", "micro", "--n", "3", "--iters", "3", "--out", "run"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let src = "data/circle/00000.png";
    let run = |extra: &[&str], out: &str| {
        let args = [&["translate", "--checkpoint", "run/model.hsg2", "--source", src, "--domain", "1", "--out", out][..], extra].concat();
        hyperstar(&args, d)
    };
    for (seed, out) in [("1", "l1.png"), ("1", "l1b.png"), ("2", "l2.png")] {
        assert_eq!(code(&run(&["--latent", seed], out)), 0);
    }
    let bytes = |f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(bytes("l1.png"), bytes("l1b.png"));
    let (a, b) = (image::open(d.join("l1.png")).unwrap().to_rgb8(), image::open(d.join("l2.png")).unwrap().to_rgb8());
    assert_eq!(a.dimensions(), (8, 8));
    assert!(a.as_raw().iter().zip(b.as_raw()).any(|(x, y)| x != y));

    assert_eq!(code(&run(&["--reference", src], "r.png")), 0);
    assert!(d.join("r.png").exists());

    let o = hyperstar(&["translate", "--checkpoint", "run/model.hsg2", "--source", src, "--latent", "0", "--domain", "7", "--out", "z.png"], d);
    assert_eq!(code(&o), 2);
    image::RgbImage::new(5, 5).save(d.join("small.png")).unwrap();
    let o = hyperstar(&["translate", "--checkpoint", "run/model.hsg2", "--source", "small.png", "--latent", "0", "--domain", "0", "--out", "z.png"], d);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("expected 8x8"));
}

#[test]
fn report_params_savings() {
    let d = tempfile::tempdir().unwrap();
    let total = |n: &str| {
        let o = hyperstar(&["report-params", "--preset", "full", "--n", n], d.path());
        assert_eq!(code(&o), 0);
        stdout(&o).lines().find(|l| l.starts_with("total")).unwrap().to_string()
    };
    assert!(total("4").ends_with("75.03%"));
    assert!(total("3").ends_with("66.55%"));
    assert!(total("1").ends_with("0.00%"));
}

#[test]
fn grad_check_detects_faults() {
    let d = tempfile::tempdir().unwrap();
    let o = hyperstar(&["grad-check", "--scope", "layer"], d.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("checks passed"));
    let o = hyperstar(&["grad-check", "--scope", "layer", "--inject-fault"], d.path());
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn init_hist_csv() {
    let d = tempfile::tempdir().unwrap();
    let o = hyperstar(&["init-hist", "--schemes", "rand_integer_A", "--shape", "32x32x3x3", "--bins", "21", "--out", "h/one.csv"], d.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.path().join("h/one.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.starts_with("rand_integer_A,")));
    let mass: f64 = rows.iter().map(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-12);

    let o = hyperstar(&["init-hist", "--out", "all.csv"], d.path());
    assert_eq!(code(&o), 0);
    let schemes: std::collections::BTreeSet<String> = std::fs::read_to_string(d.path().join("all.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(schemes.len(), 4);
}
