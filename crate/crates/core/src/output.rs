//! Artifact serialization: the windowed `series.csv`, per-step `steps.csv`,
//! agent diagnostics, JSON documents and atomic file writes.
//!
//! `series.csv` columns, in order:
//!
//! | column | unit |
//! |---|---|
//! | `window_start` | step index of the first step in the window |
//! | `u_mean` | mean demand intercept |
//! | `joint_q` | mean joint quantity |
//! | `joint_profit` | mean joint profit per step |
//! | `collusive_q`, `nash_q`, `walras_q` | window-mean reference joint quantities |
//! | `collusive_profit`, `nash_profit`, `walras_profit` | window-mean reference joint profits |
//! | `price` | mean market price |
//! | `collusive_regret` | cumulative collusive regret at the end of the window |
//! | `steps` | number of steps in the window |
//! | `q_<i>` | mean quantity of firm `i` |
//! | `profit_<i>` | mean profit of firm `i` |
//!
//! Floats carry 9 significant digits; lines end with `\n`.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::engine::{AgentDiagnostics, StepRecord, Trace, WindowRecord};

pub const SERIES_FIXED_COLUMNS: [&str; 13] = [
    "window_start",
    "u_mean",
    "joint_q",
    "joint_profit",
    "collusive_q",
    "nash_q",
    "walras_q",
    "collusive_profit",
    "nash_profit",
    "walras_profit",
    "price",
    "collusive_regret",
    "steps",
];

/// Formats a float rounded to 9 significant digits, shortest form.
pub fn fmt_f64(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        "0".to_owned()
    } else {
        rounded.to_string()
    }
}

pub fn series_header(n_firms: usize) -> String {
    let mut cols: Vec<String> = SERIES_FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend((0..n_firms).map(|i| format!("q_{i}")));
    cols.extend((0..n_firms).map(|i| format!("profit_{i}")));
    cols.join(",")
}

pub fn write_series_csv<W: Write>(trace: &Trace, mut out: W) -> io::Result<()> {
    let n = trace.config.market.n();
    writeln!(out, "{}", series_header(n))?;
    let regret = crate::metrics::windowed_collusive_regret(&trace.windows);
    for (w, cum) in trace.windows.iter().zip(regret) {
        write_window_row(&mut out, w, cum)?;
    }
    Ok(())
}

fn write_window_row<W: Write>(out: &mut W, w: &WindowRecord, regret: f64) -> io::Result<()> {
    let mut row = vec![w.start.to_string()];
    row.extend(
        [
            w.u_mean,
            w.joint_q,
            w.joint_profit,
            w.collusive_q,
            w.nash_q,
            w.walras_q,
            w.collusive_profit,
            w.nash_profit,
            w.walras_profit,
            w.price,
            regret,
        ]
        .into_iter()
        .map(fmt_f64),
    );
    row.push(w.steps.to_string());
    row.extend(w.firm_q.iter().copied().map(fmt_f64));
    row.extend(w.firm_profit.iter().copied().map(fmt_f64));
    writeln!(out, "{}", row.join(","))
}

/// Per-step log, same leading layout as `series.csv` minus the window columns.
pub fn write_steps_csv<W: Write>(steps: &[StepRecord], n_firms: usize, mut out: W) -> io::Result<()> {
    let mut cols = vec![
        "t", "u", "joint_q", "joint_profit", "collusive_q", "nash_q", "walras_q", "collusive_profit",
        "nash_profit", "walras_profit", "price",
    ]
    .into_iter()
    .map(str::to_owned)
    .collect::<Vec<_>>();
    cols.extend((0..n_firms).map(|i| format!("q_{i}")));
    cols.extend((0..n_firms).map(|i| format!("profit_{i}")));
    writeln!(out, "{}", cols.join(","))?;
    for s in steps {
        let mut row = vec![s.t.to_string(), fmt_f64(s.u), s.joint_q.to_string()];
        row.extend(
            [
                s.joint_profit,
                s.refs.collusive_joint_q,
                s.refs.nash_joint_q,
                s.refs.walrasian_joint_q,
                s.refs.collusive_joint_profit,
                s.refs.nash_joint_profit,
                s.refs.walrasian_joint_profit,
                s.price,
            ]
            .into_iter()
            .map(fmt_f64),
        );
        row.extend(s.quantities.iter().map(u32::to_string));
        row.extend(s.profits.iter().copied().map(fmt_f64));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_diagnostics_csv<W: Write>(diag: &[AgentDiagnostics], mut out: W) -> io::Result<()> {
    writeln!(out, "t,epsilon,alpha,sigma_hat")?;
    for (t, d) in diag.iter().enumerate() {
        let sigma = d.sigma_hat.map(fmt_f64).unwrap_or_default();
        writeln!(out, "{t},{},{},{sigma}", fmt_f64(d.epsilon), fmt_f64(d.alpha))?;
    }
    Ok(())
}

/// Writes `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn to_json_bytes<T: serde::Serialize>(value: &T) -> io::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(fmt_f64(4.0), "4");
        assert_eq!(fmt_f64(-0.0), "0");
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(24.261226388649), "24.2612264");
        assert_eq!(fmt_f64(123456789.4), "123456789");
        assert_eq!(fmt_f64(-20.0), "-20");
        assert_eq!(fmt_f64(1.0 / 3.0), "0.333333333");
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            series_header(2),
            "window_start,u_mean,joint_q,joint_profit,collusive_q,nash_q,walras_q,collusive_profit,\
             nash_profit,walras_profit,price,collusive_regret,steps,q_0,q_1,profit_0,profit_1"
        );
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
