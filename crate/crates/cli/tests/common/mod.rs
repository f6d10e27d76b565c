#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::Array2;

pub fn xdep<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_xdep"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("xdep binary runs")
}

pub fn checked(out: Output) -> Output {
    assert!(
        out.status.success(),
        "xdep failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

/// Writes `values` (rows = time, columns = stations) as an observation CSV.
pub fn write_observations(path: &Path, coords: &[[f64; 2]], values: &Array2<f64>) {
    let mut text = String::from("station,x,y,t,value\n");
    for (j, c) in coords.iter().enumerate() {
        for t in 0..values.nrows() {
            let v = values[[t, j]];
            if v.is_nan() {
                writeln!(text, "s{j},{},{},{t},NA", c[0], c[1]).unwrap();
            } else {
                writeln!(text, "s{j},{},{},{t},{v}", c[0], c[1]).unwrap();
            }
        }
    }
    std::fs::write(path, text).unwrap();
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

/// Simulation config for small two-class corpora.
pub fn small_simulate(sites: usize, ad: u64, ai: u64, n_reps: usize) -> serde_json::Value {
    serde_json::json!({
        "simulate": {
            "scenario": 3,
            "sites": sites,
            "counts": [
                {"family": "BrownResnick", "count": ad},
                {"family": "InvBrownResnick", "count": ai}
            ],
            "n_reps": n_reps
        }
    })
}
