use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| CliError::io(&path, e))?;
        w.write_record(header).map_err(|e| CliError::io(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| CliError::io(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        f.write_all(body.as_bytes())
            .map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Gnuplot `nonuniform matrix` layout: the first row is the column count
/// followed by the second-axis values, each further row is one first-axis
/// value followed by its cells. Missing values are written as `NaN`.
pub fn matrix(xs: &[f64], ys: &[f64], value: impl Fn(usize, usize) -> Option<f64>) -> String {
    let mut out = String::new();
    out.push_str(&ys.len().to_string());
    for y in ys {
        out.push(' ');
        out.push_str(&num(*y));
    }
    out.push('\n');
    for (i, x) in xs.iter().enumerate() {
        out.push_str(&num(*x));
        for j in 0..ys.len() {
            out.push(' ');
            out.push_str(&value(i, j).map_or_else(|| "NaN".to_string(), num));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [
            0.0,
            -0.0,
            1.0,
            0.1,
            -3.0,
            1e-7,
            5e-5,
            4e5,
            1.0 / 3.0,
            f64::MAX,
            f64::MIN_POSITIVE,
            123456789.125,
        ] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(num(1e-7), "1e-7");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(opt(None), "");
    }

    #[test]
    fn matrix_layout() {
        let m = matrix(&[1.0, 2.0], &[0.5], |i, _| (i == 0).then_some(3.0));
        assert_eq!(m, "1 0.5\n1 3\n2 NaN\n");
    }
}
