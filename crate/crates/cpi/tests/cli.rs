use std::fs;
use std::io::{BufReader, Cursor};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cpi::commands::read_frames_dir;
use cpi::format::{read_frames, read_tensor, read_voxels};
use cpi::Report;
use tempfile::TempDir;

const CONFIG: &str = r#"
[optics]
s_o = 100.0
magnification = -1.0
lens_magnification = 1.0
dims_a = [16, 16]
pitch_a = 5.0
dims_b = [4, 4]
pitch_b = 40.0

[[scene.masks]]
kind = "double-slit"
depth = 110.0
grid = [48, 48]
pitch = 2.0
slit_distance = 24.0

[speckle]
grid = [16, 16]
pitch = 10.0
sigma_c = 20.0

[detector]
mode = "analog"

[run]
frames = 300
seed = 11
"#;

fn cpi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpi"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Report {
    let out = cpi(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    Report::parse(&String::from_utf8(out.stdout).unwrap()).unwrap()
}

fn code(args: &[&str]) -> i32 {
    cpi(args).status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_and_correlate_are_independent_of_workers() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", CONFIG);
    let (d1, d4) = (tmp.path().join("w1"), tmp.path().join("w4"));
    ok(&["--workers", "1", "simulate", s(&cfg), "--out", s(&d1)]);
    ok(&["--workers", "4", "simulate", s(&cfg), "--out", s(&d4)]);
    for f in ["frames_a.cpif", "frames_b.cpif", "manifest.txt"] {
        assert_eq!(
            fs::read(d1.join(f)).unwrap(),
            fs::read(d4.join(f)).unwrap(),
            "{f}"
        );
    }
    let (g1, g4) = (tmp.path().join("g1.cpig"), tmp.path().join("g4.cpig"));
    let r1 = ok(&["--workers", "1", "correlate", s(&d1), "--out", s(&g1)]);
    ok(&["--workers", "4", "correlate", s(&d1), "--out", s(&g4)]);
    assert_eq!(fs::read(&g1).unwrap(), fs::read(&g4).unwrap());
    assert_eq!(r1.get("frames"), Some("300"));
    assert_eq!(
        fs::read_to_string(tmp.path().join("g1.txt")).unwrap(),
        r1.to_string()
    );

    // Re-running into the same directory reproduces the same bytes.
    let before = fs::read(d1.join("frames_a.cpif")).unwrap();
    ok(&["--workers", "3", "simulate", s(&cfg), "--out", s(&d1)]);
    assert_eq!(fs::read(d1.join("frames_a.cpif")).unwrap(), before);
}

#[test]
fn manifest_describes_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", CONFIG);
    let dir = tmp.path().join("f");
    let r = ok(&[
        "simulate",
        s(&cfg),
        "--frames",
        "20",
        "--binary",
        "--out",
        s(&dir),
    ]);
    let manifest = Report::parse(&fs::read_to_string(dir.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(manifest, r);
    assert_eq!(r.get("frames"), Some("20"));
    assert_eq!(r.get("payload"), Some("binary"));
    assert_eq!(r.get("seed"), Some("11"));
    assert_eq!(r.get("dims_a"), Some("16x16"));
    assert!(r.get("pdp").is_some());
    assert_eq!(r.get("config_digest").unwrap().len(), 64);
    let (_, stream) = read_frames_dir(&dir).unwrap();
    assert_eq!(stream.len(), 20);
    assert_eq!(stream.meta().seed, 11);
}

#[test]
fn zero_frames_writes_only_the_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", CONFIG);
    let dir = tmp.path().join("empty");
    let r = ok(&["simulate", s(&cfg), "--frames", "0", "--out", s(&dir)]);
    assert_eq!(r.get("frames"), Some("0"));
    let names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, vec!["manifest.txt".to_string()]);
    assert_eq!(
        code(&["correlate", s(&dir), "--out", s(&tmp.path().join("g.cpig"))]),
        2
    );
}

/// Covariance of the frame files computed directly from the pixel values.
fn covariance_oracle(dir: &Path) -> Vec<f64> {
    let read = |name: &str| {
        let f = fs::File::open(dir.join(name)).unwrap();
        read_frames(&mut BufReader::new(f), 0).unwrap().1
    };
    let (a, b) = (read("frames_a.cpif"), read("frames_b.cpif"));
    let n = a.len() as f64;
    let av: Vec<Vec<f64>> = a.iter().map(|f| f.to_f64()).collect();
    let bv: Vec<Vec<f64>> = b.iter().map(|f| f.to_f64()).collect();
    let (na, nb) = (av[0].len(), bv[0].len());
    let mean = |v: &[Vec<f64>], i: usize| v.iter().map(|x| x[i]).sum::<f64>() / n;
    let ma: Vec<f64> = (0..na).map(|i| mean(&av, i)).collect();
    let mb: Vec<f64> = (0..nb).map(|i| mean(&bv, i)).collect();
    let mut out = vec![0.0; na * nb];
    for ib in 0..nb {
        for ia in 0..na {
            let c: f64 = av
                .iter()
                .zip(&bv)
                .map(|(x, y)| (x[ia] - ma[ia]) * (y[ib] - mb[ib]))
                .sum();
            out[ib * na + ia] = c / n;
        }
    }
    out
}

#[test]
fn correlate_matches_the_covariance_of_the_frames() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", CONFIG);
    let g = tmp.path().join("g.cpig");
    for mode in ["--analog", "--binary"] {
        let dir = tmp.path().join(mode.trim_start_matches('-'));
        ok(&[
            "simulate",
            s(&cfg),
            mode,
            "--frames",
            "150",
            "--out",
            s(&dir),
        ]);
        ok(&["correlate", s(&dir), "--out", s(&g)]);
        let t = read_tensor(&mut Cursor::new(fs::read(&g).unwrap())).unwrap();
        let oracle = covariance_oracle(&dir);
        let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(scale > 0.0);
        for (x, y) in t.data().iter().zip(&oracle) {
            assert!((x - y).abs() <= 1e-9 * scale, "{mode}: {x} vs {y}");
        }
    }
}

#[test]
fn refocus_stack_and_metrics() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", CONFIG);
    let dir = tmp.path().join("f");
    let g = tmp.path().join("g.cpig");
    ok(&["simulate", s(&cfg), "--out", s(&dir)]);
    ok(&["correlate", s(&dir), "--out", s(&g)]);
    let img = tmp.path().join("stack.cpif");
    let r = ok(&[
        "refocus",
        s(&g),
        "--config",
        s(&cfg),
        "--stack",
        "90..130:5",
        "--grid-depth",
        "110",
        "--out",
        s(&img),
    ]);
    assert_eq!(r.get("slices"), Some("5"));
    assert_eq!(r.get("depths"), Some("90,100,110,120,130"));
    let (_, frames) = read_frames(&mut Cursor::new(fs::read(&img).unwrap()), 0).unwrap();
    assert_eq!(frames.len(), 5);
    assert!(frames.iter().all(|f| (f.width(), f.height()) == (16, 16)));

    let m = ok(&["metrics", s(&img), "--reference", s(&img), "--frame", "2"]);
    let r: f64 = m.get("pearson").unwrap().parse().unwrap();
    assert!((r - 1.0).abs() < 1e-12, "{r}");
    let out = tmp.path().join("m.txt");
    ok(&["metrics", s(&img), "--out", s(&out)]);
    assert!(Report::parse(&fs::read_to_string(out).unwrap())
        .unwrap()
        .get("sharpness")
        .is_some());
    assert_eq!(code(&["metrics", s(&img), "--frame", "9"]), 2);
}

#[test]
fn compressive_run_reports_its_settings() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", CONFIG);
    let dir = tmp.path().join("f");
    ok(&["simulate", s(&cfg), "--out", s(&dir)]);
    let out = tmp.path().join("cs.cpif");
    let args = [
        "cs",
        s(&dir),
        "--config",
        s(&cfg),
        "--fraction",
        "0.5",
        "--depth",
        "110",
        "--downsample",
        "2",
        "--stride",
        "2",
        "--lambda",
        "cv",
        "--folds",
        "3",
        "--seed",
        "4",
        "--out",
        s(&out),
    ];
    let r = ok(&args);
    assert_eq!(r.get("frames_used"), Some("150"));
    assert_eq!(r.get("grid"), Some("8x8"));
    assert_eq!(r.get("lambda_choice"), Some("cv"));
    assert!(r.get("r_cs").is_some() && r.get("r_red").is_some());
    let first = fs::read(&out).unwrap();
    ok(&args);
    assert_eq!(fs::read(&out).unwrap(), first);

    let other = write_config(
        tmp.path(),
        "other.toml",
        &CONFIG.replace("seed = 11", "seed = 12"),
    );
    let mismatch = [
        "cs",
        s(&dir),
        "--config",
        s(&other),
        "--fraction",
        "0.5",
        "--depth",
        "110",
        "--out",
        s(&out),
    ];
    assert_eq!(code(&mismatch), 2);
    let zero = [
        "cs",
        s(&dir),
        "--config",
        s(&cfg),
        "--fraction",
        "0",
        "--depth",
        "110",
        "--out",
        s(&out),
    ];
    assert_eq!(code(&zero), 2);
}

#[test]
fn tomography_writes_a_volume() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", CONFIG);
    let free = CONFIG.replace(
        "slit_distance = 24.0",
        "slit_distance = 24.0\nbackground = 1.0",
    );
    let rcfg = write_config(tmp.path(), "ref.toml", &free);
    let (g, gr) = (tmp.path().join("g.cpig"), tmp.path().join("r.cpig"));
    for (c, t, d) in [(&cfg, &g, "f"), (&rcfg, &gr, "r")] {
        let dir = tmp.path().join(d);
        ok(&["simulate", s(c), "--out", s(&dir)]);
        ok(&["correlate", s(&dir), "--out", s(t)]);
    }
    let vol = tmp.path().join("v.cpiv");
    for solver in ["mlem", "art"] {
        let r = ok(&[
            "tomo",
            s(&g),
            "--ref",
            s(&gr),
            "--config",
            s(&cfg),
            "--grid",
            "6,6,4,20,90,130",
            "--solver",
            solver,
            "--iters",
            "5",
            "--out",
            s(&vol),
        ]);
        assert_eq!(r.get("solver"), Some(solver));
        assert_eq!(r.get("rays"), Some("4096"));
        let v = read_voxels(&mut Cursor::new(fs::read(&vol).unwrap()), 90.0).unwrap();
        assert_eq!(v.dims, (6, 6, 4));
        assert!(v.values.iter().all(|x| x.is_finite() && *x >= 0.0));
    }
    let bad = [
        "tomo",
        s(&g),
        "--ref",
        s(&gr),
        "--config",
        s(&cfg),
        "--grid",
        "6,6,4,20",
        "--out",
        s(&vol),
    ];
    assert_eq!(code(&bad), 1);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", CONFIG);
    let out = tmp.path().join("o");
    let o = s(&out);

    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(
        code(&["--workers", "0", "simulate", s(&cfg), "--out", o]),
        1
    );
    assert_eq!(
        code(&["simulate", s(&cfg), "--binary", "--analog", "--out", o]),
        1
    );
    assert_eq!(
        code(&[
            "refocus",
            "g",
            "--config",
            s(&cfg),
            "--stack",
            "1..2",
            "--out",
            o
        ]),
        1
    );
    assert_eq!(
        code(&[
            "cs",
            "f",
            "--config",
            s(&cfg),
            "--fraction",
            "0.5",
            "--depth",
            "1",
            "--lambda",
            "big",
            "--out",
            o
        ]),
        1
    );

    let bad_paths = write_config(
        tmp.path(),
        "p.toml",
        &CONFIG.replace("pitch_b = 40.0", "pitch_b = 40.0\nn_paths = 3"),
    );
    assert_eq!(code(&["simulate", s(&bad_paths), "--out", o]), 2);
    let unknown = write_config(
        tmp.path(),
        "u.toml",
        &CONFIG.replace("[run]", "[run]\ncolour = 1"),
    );
    assert_eq!(code(&["simulate", s(&unknown), "--out", o]), 2);
    let coarse = write_config(
        tmp.path(),
        "c.toml",
        &CONFIG.replace("sigma_c = 20.0", "sigma_c = 5.0"),
    );
    assert_eq!(code(&["simulate", s(&coarse), "--out", o]), 2);

    assert_eq!(
        code(&["simulate", s(&tmp.path().join("missing.toml")), "--out", o]),
        3
    );
    assert_eq!(
        code(&["correlate", s(&tmp.path().join("nowhere")), "--out", o]),
        3
    );
    let stderr =
        String::from_utf8(cpi(&["correlate", s(&tmp.path().join("nowhere")), "--out", o]).stderr)
            .unwrap();
    assert!(stderr.contains("not a frames directory"), "{stderr}");
}
