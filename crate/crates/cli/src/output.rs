use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use kacfick::SolverReport;

/// 17 significant digits; round-trips every finite double.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn profile_csv(report: &SolverReport) -> String {
    let grid = report.m.grid();
    let mut s = String::from("x,m,m0,h,p\n");
    for i in 0..grid.n_nodes() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            real(grid.x(i)),
            real(report.m[i]),
            real(report.m0[i]),
            real(report.h[i]),
            real(report.p[i])
        );
    }
    s
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    write_text(dir, name, &text)
}
