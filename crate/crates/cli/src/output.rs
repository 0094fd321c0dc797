//! Atomic file output in CSV, JSON and gnuplot form.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Writes `contents` to a temporary file beside `path`, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(dir, e))?;
    tmp.write_all(contents).map_err(|e| io_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Prints to stdout. A closed pipe (e.g. `| head`) is not an error.
pub fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(CliError::Io(format!("stdout: {e}")))
        }
        _ => Ok(()),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Seventeen significant digits, enough to round-trip any double.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(num).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn plot_script_path(path: &Path) -> PathBuf {
    path.with_extension("gp")
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// gnuplot script for an MSF curve: kappa against mu_max with the
/// stability boundary at 1.
pub fn msf_plot_script(csv_path: &Path, title: &str) -> String {
    let data = file_name(csv_path);
    let png = file_name(&csv_path.with_extension("png"));
    let mut s = String::new();
    let _ = writeln!(s, "set terminal pngcairo size 900,520");
    let _ = writeln!(s, "set output '{png}'");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel 'effective coupling kappa = K lambda'");
    let _ = writeln!(s, "set ylabel 'max Floquet multiplier |mu|'");
    let _ = writeln!(s, "set key top right");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(
        s,
        "plot '{data}' using 1:2 skip 1 with linespoints pt 7 ps 0.5 title 'mu_max', 1 with lines dt 2 lc rgb 'red' title 'stability boundary'"
    );
    s
}

/// gnuplot script for a network run: first state coordinate of every node,
/// and the synchronization error on a log scale.
pub fn simulate_plot_script(csv_path: &Path, nodes: usize, dim: usize, activation: f64) -> String {
    let data = file_name(csv_path);
    let png = file_name(&csv_path.with_extension("png"));
    let mut s = String::new();
    let _ = writeln!(s, "set terminal pngcairo size 900,700");
    let _ = writeln!(s, "set output '{png}'");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set multiplot layout 2,1");
    let _ = writeln!(s, "set xlabel 't'");
    let _ = writeln!(s, "set ylabel 'x_{{i1}}'");
    let _ = writeln!(
        s,
        "set arrow from {activation},graph 0 to {activation},graph 1 nohead dt 3"
    );
    let curves: Vec<String> = (0..nodes)
        .map(|i| {
            format!(
                "'{data}' using 1:{} skip 1 with lines title 'node {}'",
                3 + i * dim,
                i + 1
            )
        })
        .collect();
    let _ = writeln!(s, "plot {}", curves.join(", "));
    let _ = writeln!(s, "set logscale y");
    let _ = writeln!(s, "set ylabel 'sync error'");
    let _ = writeln!(
        s,
        "plot '{data}' using 1:($2 > 0 ? $2 : 1e-18) skip 1 with lines title 'e(t)'"
    );
    let _ = writeln!(s, "unset multiplot");
    s
}
