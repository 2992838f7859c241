//! Plot-ready CSV files: per-snapshot `(n, a, f)` tables and moment time series.
//!
//! Floats are written with 17 significant digits, which reproduces every
//! `f64` exactly on reading.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{ModelParams, N_MIN};
use crate::state::SimState;
use crate::stepper::TrajectoryRecord;

const TIME_TAG: &str = "# time=";

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn snapshot_string(state: &SimState, params: &ModelParams) -> String {
    let mut s = String::with_capacity(state.as_slice().len() * 48);
    s.push_str(TIME_TAG);
    s.push_str(&fmt(state.time));
    s.push_str("\nn,a,f\n");
    for n in N_MIN..=state.n_max() {
        for (i, v) in state.class_values(n).enumerate() {
            s.push_str(&format!("{n},{},{}\n", fmt(params.grid.node(i)), fmt(v)));
        }
    }
    s
}

pub fn write_snapshot(path: impl AsRef<Path>, state: &SimState, params: &ModelParams) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, snapshot_string(state, params)).map_err(|e| Error::io(path, e))
}

/// Parse a snapshot onto the grid of `params`. Missing entries are zero;
/// negative or non-finite densities and off-grid points are rejected.
pub fn parse_snapshot(text: &str, params: &ModelParams, origin: &str) -> Result<SimState> {
    let bad = |message: String| Error::Format {
        path: origin.to_string(),
        message,
    };
    let mut state = SimState::zeros(params);
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some(t) = line.strip_prefix(TIME_TAG) {
            state.time = t.trim().parse().map_err(|_| bad(format!("bad time tag {t:?}")))?;
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let da = params.grid.delta_a;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 3 {
            return Err(bad(format!("row {row}: expected 3 columns")));
        }
        let n: usize = rec[0].parse().map_err(|_| bad(format!("row {row}: bad class {:?}", &rec[0])))?;
        let a: f64 = rec[1].parse().map_err(|_| bad(format!("row {row}: bad area {:?}", &rec[1])))?;
        let f: f64 = rec[2].parse().map_err(|_| bad(format!("row {row}: bad density {:?}", &rec[2])))?;
        if !(N_MIN..=params.n0).contains(&n) {
            return Err(bad(format!("row {row}: class {n} outside 2..={}", params.n0)));
        }
        let x = a / da;
        let i = x.round();
        if i < 0.0 || i as usize >= params.grid.num_nodes || (x - i).abs() > 1e-6 {
            return Err(bad(format!("row {row}: area {a} is not a grid node")));
        }
        if !f.is_finite() || f < 0.0 {
            return Err(Error::Inadmissible(format!("{origin} row {row}: density {f} must be finite and non-negative")));
        }
        state.set(n, i as usize, f);
    }
    Ok(state)
}

pub fn read_snapshot(path: impl AsRef<Path>, params: &ModelParams) -> Result<SimState> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot(&text, params, &path.display().to_string())
}

const SERIES_HEADER: [&str; 16] = [
    "t", "N", "A", "P", "M", "R", "gamma_n", "gamma_d", "gamma", "gamma_step", "gamma_bar", "flat_norm", "min_value",
    "overflow", "outflow", "edges",
];

pub fn write_time_series(path: impl AsRef<Path>, rec: &TrajectoryRecord) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let wrap = |e: csv::Error| Error::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    w.write_record(SERIES_HEADER).map_err(wrap)?;
    for j in 0..rec.len() {
        let m = &rec.moments[j];
        let row = [
            rec.times[j],
            m.count,
            m.area,
            m.defect,
            m.edge_moment,
            m.remainder,
            m.gamma_n,
            m.gamma_d,
            rec.gamma[j],
            rec.gamma_step[j],
            rec.gamma_bar[j],
            rec.flat_norm[j],
            rec.min_value[j],
            rec.overflow[j],
            rec.outflow[j].iter().sum(),
            m.edges,
        ];
        w.write_record(row.iter().map(|v| fmt(*v))).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Write any serialisable report as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::AreaGrid;

    fn params() -> ModelParams {
        ModelParams::truncated(0.7, 9, AreaGrid::new(0.1, 12).unwrap()).unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let p = params();
        let mut s = SimState::from_fn(&p, |n, a| (n as f64).sqrt() * (a * 1.37).sin().abs() / 3.0 + 1e-300);
        s.time = 0.1 + 0.2;
        let back = parse_snapshot(&snapshot_string(&s, &p), &p, "mem").unwrap();
        assert_eq!(back.time.to_bits(), s.time.to_bits());
        for (a, b) in back.as_slice().iter().zip(s.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn negative_entry_rejected() {
        let p = params();
        let text = "n,a,f\n3,0.2,-1e-3\n";
        assert!(matches!(parse_snapshot(text, &p, "mem"), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn off_grid_rejected() {
        let p = params();
        assert!(matches!(parse_snapshot("n,a,f\n3,0.25,1\n", &p, "mem"), Err(Error::Format { .. })));
        assert!(matches!(parse_snapshot("n,a,f\n12,0.2,1\n", &p, "mem"), Err(Error::Format { .. })));
    }

    #[test]
    fn sparse_table_fills_zero() {
        let p = params();
        let s = parse_snapshot("# custom\nn,a,f\n5,0.3,2.5\n", &p, "mem").unwrap();
        assert_eq!(s.get(5, 3), 2.5);
        assert_eq!(s.as_slice().iter().filter(|&&v| v != 0.0).count(), 1);
    }
}
