//! Versioned text checkpoint shared by both models.
//!
//! ```text
//! pawfuse-checkpoint 1
//! kind <model kind>
//! config <single-line JSON>
//! params <count>
//! param <name> <rows> <cols>
//! <row 0 values, space separated>
//! ...
//! end
//! ```
//!
//! Values are written in shortest round-trip exponent form, so a
//! save/load cycle is exact and identical weights give identical bytes.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::autodiff::{Matrix, ParamSet};
use crate::error::{Error, Result};

const MAGIC: &str = "pawfuse-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub config: serde_json::Value,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{MAGIC} {FORMAT_VERSION}")?;
        writeln!(w, "kind {}", self.kind)?;
        writeln!(w, "config {}", serde_json::to_string(&self.config)?)?;
        writeln!(w, "params {}", self.params.len())?;
        for (name, m) in self.params.iter() {
            writeln!(w, "param {name} {} {}", m.rows(), m.cols())?;
            for r in 0..m.rows() {
                let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:e}")).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Checkpoint(format!("unexpected end of file, expected {what}")))
        };

        let header = next("header")?;
        match header.split_once(' ') {
            Some((MAGIC, v)) if v.parse() == Ok(FORMAT_VERSION) => {}
            _ => return Err(Error::Checkpoint(format!("unsupported header `{header}`"))),
        }
        let kind = field(&next("kind")?, "kind")?.to_string();
        let config = serde_json::from_str(field(&next("config")?, "config")?)?;
        let count: usize = parse(field(&next("params")?, "params")?)?;

        let mut params = ParamSet::new();
        for _ in 0..count {
            let decl = next("param")?;
            let parts: Vec<&str> = field(&decl, "param")?.split(' ').collect();
            let [name, rows, cols] = parts[..] else {
                return Err(Error::Checkpoint(format!("bad param line `{decl}`")));
            };
            let (rows, cols): (usize, usize) = (parse(rows)?, parse(cols)?);
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let line = next("matrix row")?;
                let row: Vec<f64> = line.split(' ').map(parse).collect::<Result<_>>()?;
                if row.len() != cols {
                    return Err(Error::Checkpoint(format!(
                        "`{name}`: row has {} values, expected {cols}",
                        row.len()
                    )));
                }
                data.extend(row);
            }
            let m = Matrix::new(rows, cols, data)
                .map_err(|e| Error::Checkpoint(format!("`{name}`: {e}")))?;
            if params.insert(name, m).is_some() {
                return Err(Error::Checkpoint(format!("`{name}` declared twice")));
            }
        }
        if next("end")? != "end" {
            return Err(Error::Checkpoint("missing end marker".into()));
        }
        Ok(Self {
            kind,
            config,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }
}

fn field<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Checkpoint(format!("expected `{key}` line, got `{line}`")))
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Checkpoint(format!("cannot parse `{s}`")))
}
