use std::fs;
use std::path::{Path, PathBuf};

use faer::c64;
use serde::Serialize;

use crate::Result;

/// Round-trip float formatting used in every CSV cell.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// `re` and `im` cells of a complex value.
pub fn complex(z: c64) -> [String; 2] {
    [float(z.re), float(z.im)]
}

/// Collects the files of one run under a common directory and prefix.
pub struct Sink {
    dir: PathBuf,
    prefix: String,
    pub written: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path, prefix: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Sink { dir: dir.to_path_buf(), prefix: prefix.to_string(), written: Vec::new() })
    }

    fn path(&mut self, suffix: &str) -> PathBuf {
        let name = format!("{}_{suffix}", self.prefix);
        self.written.push(name.clone());
        self.dir.join(name)
    }

    pub fn csv(&mut self, suffix: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path(suffix);
        let mut w = csv::Writer::from_path(&path).map_err(csv_error)?;
        w.write_record(header).map_err(csv_error)?;
        for r in rows {
            w.write_record(r).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<()> {
        let path = self.path(suffix);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Config(e.to_string()))?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => crate::Error::Io(io),
        other => crate::Error::Config(format!("csv: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02e23] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(opt_float(None), "");
    }
}
