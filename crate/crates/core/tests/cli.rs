use std::path::Path;
use std::process::{Command, Output};

use kbilmdm::acquisition::read_mask;
use kbilmdm::datamodel::{read_cube, CubeKind, ImageSeries};
use kbilmdm::metrics::nrmse;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kbilmdm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn phantom(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut args = vec![
        "phantom",
        "--np",
        "16",
        "--nf",
        "16",
        "--nfr",
        "12",
        "--out",
        p(&out),
    ];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    out
}

#[test]
fn eval_of_identical_files_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let x = phantom(tmp.path(), "x.kblm", &[]);
    let o = run(&[
        "eval",
        "--ref",
        p(&x),
        "--est",
        p(&x),
        "--assert-max-nrmse",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("frame,nrmse"));
    let rows: Vec<&str> = lines.filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 12);
    for (j, row) in rows.iter().enumerate() {
        let (frame, v) = row.split_once(',').unwrap();
        assert_eq!(frame.parse::<usize>().unwrap(), j);
        assert_eq!(v.parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn eval_threshold_violation_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let a = phantom(tmp.path(), "a.kblm", &["--seed", "1"]);
    let b = phantom(tmp.path(), "b.kblm", &["--seed", "2"]);
    let csv = tmp.path().join("m.csv");
    let o = run(&[
        "eval",
        "--ref",
        p(&a),
        "--est",
        p(&b),
        "--csv",
        p(&csv),
        "--assert-max-nrmse",
        "0.0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(std::fs::read_to_string(&csv)
        .unwrap()
        .starts_with("frame,nrmse\n"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(run(&["eval", "--ref"]).status.code(), Some(64));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(64));
    assert_eq!(
        run(&["--threads", "0", "eval", "--ref", "a", "--est", "b"])
            .status
            .code(),
        Some(64)
    );
}

#[test]
fn help_and_version_exit_zero() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("pipeline"));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn missing_input_names_the_path() {
    let o = run(&[
        "eval",
        "--ref",
        "/nonexistent/ref.kblm",
        "--est",
        "/nonexistent/est.kblm",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/ref.kblm"));
}

#[test]
fn invalid_config_value_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x.kblm");
    let o = run(&["phantom", "--set", "recon.zeta=-1", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("recon.zeta"));
}

#[test]
fn flags_override_config_file_and_set() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.txt");
    std::fs::write(
        &cfg,
        "# geometry\nphantom.n_p = 8\nphantom.n_f = 10\nphantom.n_fr = 6\n",
    )
    .unwrap();
    let out = tmp.path().join("x.kblm");
    let o = run(&[
        "phantom",
        "--config",
        p(&cfg),
        "--set",
        "phantom.n_f=12",
        "--nfr",
        "5",
        "--out",
        p(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let (cube, kind) = read_cube(&out).unwrap();
    assert_eq!(kind, CubeKind::Image);
    assert_eq!((cube.n_p(), cube.n_f(), cube.n_fr()), (8, 12, 5));
}

#[test]
fn export_png_is_deterministic_and_decodable() {
    let tmp = tempfile::tempdir().unwrap();
    let x = phantom(tmp.path(), "x.kblm", &[]);
    for dir in ["a", "b"] {
        let out = tmp.path().join(dir);
        let o = run(&[
            "export-png",
            "--input",
            p(&x),
            "--out-dir",
            p(&out),
            "--prefix",
            "f",
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let mut names: Vec<String> = std::fs::read_dir(tmp.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let expected: Vec<String> = (0..12).map(|j| format!("f_{j:03}.png")).collect();
    assert_eq!(names, expected);
    for name in &names {
        let a = std::fs::read(tmp.path().join("a").join(name)).unwrap();
        assert_eq!(a, std::fs::read(tmp.path().join("b").join(name)).unwrap());
        let decoder = png::Decoder::new(std::io::Cursor::new(a));
        let reader = decoder.read_info().unwrap();
        let info = reader.info();
        assert_eq!((info.width, info.height), (16, 16));
        assert_eq!(info.color_type, png::ColorType::Grayscale);
    }
}

#[test]
fn phantom_mask_recon_eval_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let x = phantom(tmp.path(), "x.kblm", &[]);
    let mask = tmp.path().join("m.kblmmask");
    let o = run(&[
        "mask",
        "--np",
        "16",
        "--nfr",
        "12",
        "--rate",
        "4",
        "--nu",
        "2",
        "--out",
        p(&mask),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let m = read_mask(&mask).unwrap();
    assert_eq!((m.n_p(), m.n_fr(), m.nu()), (16, 12, 2));

    let recon = tmp.path().join("r.kblm");
    let zf = tmp.path().join("zf.kblm");
    let diag = tmp.path().join("d.txt");
    let o = run(&[
        "recon",
        "--input",
        p(&x),
        "--mask",
        p(&mask),
        "--out",
        p(&recon),
        "--zero-filled",
        p(&zf),
        "--diagnostics",
        p(&diag),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(!std::fs::read_to_string(&diag).unwrap().is_empty());
    let o = run(&[
        "eval",
        "--ref",
        p(&x),
        "--est",
        p(&recon),
        "--assert-max-nrmse",
        "1.0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let truth = ImageSeries::new(read_cube(&x).unwrap().0);
    let r = nrmse(&truth, &ImageSeries::new(read_cube(&recon).unwrap().0)).unwrap();
    let z = nrmse(&truth, &ImageSeries::new(read_cube(&zf).unwrap().0)).unwrap();
    assert!(r < 0.5 * z, "recon {r} vs zero-filled {z}");
}

#[test]
fn small_pipeline_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = run(&[
        "--threads",
        "2",
        "pipeline",
        "--np",
        "16",
        "--nf",
        "16",
        "--nfr",
        "12",
        "--rate",
        "4",
        "--nu",
        "2",
        "--out-dir",
        p(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in [
        "config.txt",
        "phantom.kblm",
        "mask.kblmmask",
        "kspace.kblm",
        "zero_filled.kblm",
        "recon.kblm",
        "diagnostics.txt",
        "metrics.csv",
        "zero_filled_metrics.csv",
        "summary.txt",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let (_, kind) = read_cube(out.join("kspace.kblm")).unwrap();
    assert_eq!(kind, CubeKind::KSpace);
    let cfg = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(cfg.contains("phantom.n_p = 16"));
}
