//! Append-only CSV metrics emission with a fixed header row.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Result, SimError};
use crate::N_PHASES;

pub const METRICS_HEADER: &str = "step,sim_time,wall_seconds,mlups,front_z,\
phase_fraction_1,phase_fraction_2,phase_fraction_3,phase_fraction_4,\
terms_skipped,staggered_reuses";

/// One metrics emission. `wall_seconds` and `mlups` cover the interval
/// since the previous row; counters are cumulative.
#[derive(Debug, Clone, Copy)]
pub struct MetricsRow {
    pub step: u64,
    pub sim_time: f64,
    pub wall_seconds: f64,
    pub mlups: f64,
    /// Empty column when the window holds no interface.
    pub front_z: Option<i64>,
    pub phase_fractions: [f64; N_PHASES],
    pub terms_skipped: u64,
    pub staggered_reuses: u64,
}

pub struct MetricsWriter {
    path: PathBuf,
    file: std::io::BufWriter<std::fs::File>,
}

impl MetricsWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = std::fs::File::create(&path).map_err(|e| SimError::io(&path, e))?;
        let mut w = MetricsWriter {
            path,
            file: std::io::BufWriter::new(file),
        };
        w.line(METRICS_HEADER)?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.file, "{s}").map_err(|e| SimError::io(&self.path, e))
    }

    pub fn append(&mut self, r: &MetricsRow) -> Result<()> {
        let front = r.front_z.map_or(String::new(), |z| z.to_string());
        let f = r.phase_fractions;
        let row = format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.sim_time,
            r.wall_seconds,
            r.mlups,
            front,
            f[0],
            f[1],
            f[2],
            f[3],
            r.terms_skipped,
            r.staggered_reuses
        );
        self.line(&row)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.file.flush().map_err(|e| SimError::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_recomputable_and_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        {
            let mut w = MetricsWriter::create(&path).unwrap();
            let cells = 64.0 * 64.0 * 64.0;
            for i in 1..=3u64 {
                let steps_since_last = 10.0;
                let wall = 0.5 * i as f64;
                w.append(&MetricsRow {
                    step: 10 * i,
                    sim_time: 0.1 * i as f64,
                    wall_seconds: wall,
                    mlups: cells * steps_since_last / wall / 1e6,
                    front_z: Some(42),
                    phase_fractions: [0.25, 0.25, 0.3, 0.2],
                    terms_skipped: 100 * i,
                    staggered_reuses: 7 * i,
                })
                .unwrap();
            }
            w.flush().unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), METRICS_HEADER);
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 11);
            // The throughput column is consistent with its neighbors.
            let wall: f64 = cols[2].parse().unwrap();
            let mlups: f64 = cols[3].parse().unwrap();
            assert!((mlups - 64.0f64.powi(3) * 10.0 / wall / 1e6).abs() < 1e-9);
            // The front column is constant for this quiescent series.
            assert_eq!(cols[4], "42");
            // Phase fractions sum to one.
            let sum: f64 = cols[5..9].iter().map(|c| c.parse::<f64>().unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn missing_front_leaves_an_empty_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let mut w = MetricsWriter::create(&path).unwrap();
        w.append(&MetricsRow {
            step: 0,
            sim_time: 0.0,
            wall_seconds: 0.0,
            mlups: 0.0,
            front_z: None,
            phase_fractions: [0.0, 0.0, 0.0, 1.0],
            terms_skipped: 0,
            staggered_reuses: 0,
        })
        .unwrap();
        w.flush().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert!(row.contains(",,"), "{row}");
    }
}
