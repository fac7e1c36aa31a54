use std::fmt::Write;

use impc_core::numerics::{DenseMatrix, DenseVector};
use impc_core::{LatencyStats, TrackingMetrics};

use crate::csv_out::fmt_g;

pub fn vector(v: &DenseVector) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_g(*x)).collect();
    format!("({})", parts.join(", "))
}

pub fn matrix(m: &DenseMatrix) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| {
            let parts: Vec<String> = r.iter().map(|x| fmt_g(*x)).collect();
            format!("[{}]", parts.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

pub fn verdict(certified: bool) -> &'static str {
    if certified {
        "CERTIFIED"
    } else {
        "NOT CERTIFIED"
    }
}

pub fn tracking(out: &mut String, m: &TrackingMetrics) {
    let settling = match m.settling_time {
        Some(t) => format!("{} s", fmt_g(t)),
        None => "not reached".into(),
    };
    let _ = writeln!(
        out,
        "  tracking: ISE = {:.6e}, final relative error = {:.3e}, 2% settling time = {settling}",
        m.ise, m.final_error
    );
}

pub fn latency_line(out: &mut String, label: &str, s: &LatencyStats) {
    let _ = writeln!(
        out,
        "{label:<22}{:>12.4}{:>14.4}{:>12.4}{:>10}",
        s.mean * 1e3,
        s.median * 1e3,
        s.p95 * 1e3,
        s.count
    );
}

pub fn latency_header(out: &mut String) {
    let _ = writeln!(out, "{:<22}{:>12}{:>14}{:>12}{:>10}", "controller", "mean [ms]", "median [ms]", "p95 [ms]", "samples");
}

/// Processor model, logical CPU count and platform.
pub fn hardware_note() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown processor".into());
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{cpu}, {cpus} logical CPU(s), {}/{}; timings are single-threaded wall clock",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

/// gnuplot script plotting states and inputs of every written trajectory.
pub fn gnuplot_script(files: &[(String, String)], n: usize, m: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set terminal pngcairo size 900,{}", 300 * (n + m));
    let _ = writeln!(s, "set output 'trajectories.png'");
    let _ = writeln!(s, "set multiplot layout {},1", n + m);
    let _ = writeln!(s, "set xlabel 't [s]'");
    for col in 0..n + m {
        let name = if col < n { format!("x{}", col + 1) } else { format!("u{}", col - n + 1) };
        let _ = writeln!(s, "set ylabel '{name}'");
        let series: Vec<String> = files
            .iter()
            .map(|(file, title)| format!("'{file}' using 1:{} with lines title '{title}'", col + 2))
            .collect();
        let _ = writeln!(s, "plot {}", series.join(", \\\n     "));
    }
    let _ = writeln!(s, "unset multiplot");
    s
}
