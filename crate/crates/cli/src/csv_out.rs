use std::path::Path;

use anyhow::{bail, Context};
use impc_core::SimLog;

/// `%.12g`: 12 significant digits, trailing zeros dropped, scientific
/// notation outside `[1e-4, 1e12)`.
pub fn fmt_g(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=m).map(|i| format!("u{i}")));
    h.extend(
        [
            "norm_z",
            "norm_mu",
            "norm_lambda",
            "S_flow",
            "S_plant",
            "V_lyap",
            "w_flow",
            "w_plant",
            "q_bound",
            "eq_feas",
        ]
        .map(String::from),
    );
    h
}

pub fn write_log(path: &Path, log: &SimLog) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(header(log.n(), log.m()))?;
    for i in 0..log.len() {
        let s = &log.storage[i];
        let mut row = vec![log.times[i]];
        row.extend(log.x[i].iter());
        row.extend(log.u[i].iter());
        row.extend([
            log.norm_z[i],
            log.norm_mu[i],
            log.norm_lambda[i],
            s.s_flow,
            s.s_plant,
            s.v_lyap,
            s.w_flow,
            s.w_plant,
            s.q_bound,
            log.eq_feas[i],
        ]);
        w.write_record(row.iter().map(|v| fmt_g(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Re-read a written trajectory and check the header, row widths, finiteness
/// and strictly increasing time. Returns the number of data rows.
pub fn validate(path: &Path, n: usize, m: usize) -> anyhow::Result<usize> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("cannot read back {}", path.display()))?;
    let expected = header(n, m);
    let found: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if found != expected {
        bail!("{}: unexpected header {:?}", path.display(), found.join(","));
    }
    let mut last_t = f64::NEG_INFINITY;
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != expected.len() {
            bail!("{}: row {} has {} fields, expected {}", path.display(), i + 1, rec.len(), expected.len());
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .with_context(|| format!("{}: row {}: '{field}' is not a number", path.display(), i + 1))?;
            if !v.is_finite() {
                bail!("{}: row {} has a non-finite entry", path.display(), i + 1);
            }
        }
        let t: f64 = rec[0].parse()?;
        if t <= last_t {
            bail!("{}: time is not increasing at row {}", path.display(), i + 1);
        }
        last_t = t;
        rows += 1;
    }
    if rows == 0 {
        bail!("{}: no data rows", path.display());
    }
    Ok(rows)
}
