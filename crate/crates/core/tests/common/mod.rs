#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hdm::gramian::distance_matrix;
use hdm::experiments::sample_ordinal_set;
use hdm::io::{
    load_distances, load_embedding, load_summaries, save_distances, save_embedding_file, save_ordinal, save_summaries,
};
use hdm::lorentz::random_loid_points;

pub fn hdm_bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_hdm"))
}

/// Runs the CLI in `dir` so that relative paths in the recorded invocation
/// are identical across runs.
pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(hdm_bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn hdm")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

/// Complete distance file of `n` random points in `L^2`.
pub fn write_complete_distances(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let pts = random_loid_points(n, 2, seed, 1.0).unwrap();
    let d = distance_matrix(&pts).unwrap();
    let path = dir.join(name);
    save_distances(&path, &d, None, None).unwrap();
    path
}

/// Comparisons sampled from `n` random points, `2 k C(n,2)` of them.
pub fn write_ordinal(dir: &Path, name: &str, n: usize, k: usize, seed: u64) -> PathBuf {
    let pts = random_loid_points(n, 2, seed, 1.0).unwrap();
    let d = distance_matrix(&pts).unwrap();
    let set = sample_ordinal_set(&d, k, seed).unwrap();
    let path = dir.join(name);
    save_ordinal(&path, &set).unwrap();
    path
}

fn check(ok: bool, what: &str) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.to_string())
    }
}

fn expect_code(o: &Output, want: i32, what: &str) -> Result<(), String> {
    if code(o) == want {
        Ok(())
    } else {
        Err(format!(
            "{what}: exit {} (want {want}); stderr: {}",
            code(o),
            String::from_utf8_lossy(&o.stderr)
        ))
    }
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_default()
}

/// Every subcommand twice in separate directories: outputs must validate,
/// match byte for byte, record the invocation, and survive load/save.
pub fn golden_suite() -> Result<(), String> {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [(&str, Vec<&str>); 7] = [
        (
            "embed.json",
            vec!["embed", "--distances", "d.csv", "--dim", "2", "--out", "embed.json", "--svg", "embed.svg", "--seed", "7"],
        ),
        (
            "embed_loid.json",
            vec![
                "embed", "--distances", "none.csv", "--ordinal", "o.json", "--dim", "2", "--out", "embed_loid.json",
                "--model", "loid", "--eps2", "0.1", "--min-distance", "1", "--max-violations-pct", "5",
            ],
        ),
        ("complete.csv", vec!["complete", "--distances", "d.csv", "--dim", "2", "--out-hdm", "complete.csv"]),
        ("project.json", vec!["project", "--in", "z.json", "--out", "project.json"]),
        (
            "sparsity.csv",
            vec![
                "bench", "sparsity", "--n", "6", "--dim", "2", "--grid", "0,0.3", "--trials", "3", "--delta", "0.01",
                "--seed", "3", "--out", "sparsity.csv",
            ],
        ),
        ("tree.csv", vec!["bench", "tree", "--n-grid", "5,7", "--trials", "2", "--seed", "3", "--out", "tree.csv"]),
        (
            "ordinal.csv",
            vec![
                "bench", "ordinal", "--n", "8", "--dim-grid", "2,3", "--k", "2", "--zeta-grid", "0,5", "--seed", "3",
                "--out", "ordinal.csv",
            ],
        ),
    ];
    for dir in [a.path(), b.path()] {
        write_complete_distances(dir, "d.csv", 10, 21);
        std::fs::write(dir.join("none.csv"), "i,j,value\n").unwrap();
        write_ordinal(dir, "o.json", 8, 2, 22);
        std::fs::write(dir.join("z.json"), "[[1.0,0.5,0.2],[-2.0,0.0,0.0],[3.0,0.0,0.0],[0.0,-1.0,4.0]]").unwrap();
        for (out, args) in &runs {
            let o = run(dir, args);
            expect_code(&o, 0, &format!("hdm {}", args.join(" ")))?;
            let text = String::from_utf8_lossy(&read(&dir.join(out))).into_owned();
            check(text.contains(args[0]), &format!("{out} does not record its invocation"))?;
        }
    }
    for (out, _) in &runs {
        check(read(&a.path().join(out)) == read(&b.path().join(out)), &format!("{out} differs between runs"))?;
    }
    check(
        read(&a.path().join("embed.svg")) == read(&b.path().join("embed.svg")),
        "svg differs between runs",
    )?;

    let dir = a.path();
    for name in ["embed.json", "embed_loid.json", "project.json"] {
        let f = load_embedding(&dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let copy = dir.join(format!("copy_{name}"));
        save_embedding_file(&copy, &f).map_err(|e| e.to_string())?;
        check(read(&copy) == read(&dir.join(name)), &format!("{name} does not round-trip bitwise"))?;
    }
    let e = load_embedding(&dir.join("embed.json")).unwrap();
    check(e.n == 10 && e.dim == 2, "embed.json has the wrong shape")?;
    let err = e.provenance.reconstruction_error.unwrap_or(f64::INFINITY);
    check(err <= 1e-2, &format!("reconstruction error {err} > 1e-2"))?;
    check(e.provenance.seed == Some(7), "seed missing from provenance")?;
    check(
        e.points.iter().all(|p| p.iter().map(|v| v * v).sum::<f64>() < 1.0),
        "poincare points outside the disk",
    )?;
    let p = load_embedding(&dir.join("project.json")).unwrap();
    check(p.multipliers.as_ref().is_some_and(|m| m.len() == 4), "project.json lacks multipliers")?;

    let (d, mask) = load_distances(&dir.join("complete.csv")).map_err(|e| e.to_string())?;
    check(d.n() == 10 && mask.count() == 45, "complete.csv is not a full 10-point matrix")?;
    let copy = dir.join("copy_complete.csv");
    save_distances(&copy, &d, Some(&mask), None).unwrap();
    let strip = |b: Vec<u8>| -> String {
        String::from_utf8_lossy(&b).lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
    };
    check(
        strip(read(&copy)) == strip(read(&dir.join("complete.csv"))),
        "distance file does not round-trip bitwise",
    )?;

    for name in ["sparsity.csv", "tree.csv", "ordinal.csv"] {
        let rows = load_summaries(&dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
        check(!rows.is_empty(), &format!("{name} is empty"))?;
        let text = String::from_utf8_lossy(&read(&dir.join(name))).into_owned();
        let comment = text.lines().next().unwrap().trim_start_matches("# ").to_string();
        let copy = dir.join(format!("copy_{name}"));
        save_summaries(&copy, &rows, Some(&comment)).unwrap();
        check(read(&copy) == read(&dir.join(name)), &format!("{name} does not round-trip bitwise"))?;
    }
    let rows = load_summaries(&dir.join("sparsity.csv")).unwrap();
    check(rows[0].success_rate == Some(1.0), "complete data is not always recovered")?;
    Ok(())
}
