//! Versioned text format for a trained model.
//!
//! The reservoir itself is not stored: its generation spec and seed rebuild
//! it exactly. Floats are written with 17 significant digits so every weight
//! round-trips bit for bit.
//!
//! ```text
//! rescomp-model 1
//! backend esn
//! esn.nodes 100
//! ...
//! include_input false
//! readout.lambda 1.0000000000000000e-6
//! readout.outputs 1
//! readout.width 101
//! weights <width values>          # one line per output
//! normalization.input <offset> <scale>
//! normalization.target <offset> <scale>
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::backend::BackendSpec;
use crate::esn::{EsnConfig, Nonlinearity};
use crate::qrc::QrcConfig;
use crate::readout::Readout;
use crate::reservoir::{Reservoir, ReservoirKind};
use crate::tasks::Normalization;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "rescomp-model";

#[derive(Debug, Error, PartialEq)]
pub enum BundleError {
    #[error("unsupported model format version {found} (expected {FORMAT_VERSION})")]
    Version { found: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model/backend mismatch: {0}")]
    Mismatch(String),
    #[error("cannot access model file: {0}")]
    Io(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub backend: BackendSpec,
    pub include_input: bool,
    pub readout: Readout,
    pub input_normalization: Normalization,
    pub target_normalization: Normalization,
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

impl ModelBundle {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(s, "backend {}", self.backend.kind().as_str());
        match &self.backend {
            BackendSpec::Esn(c) => {
                let _ = writeln!(s, "esn.nodes {}", c.nodes);
                let _ = writeln!(s, "esn.input_dim {}", c.input_dim);
                let _ = writeln!(s, "esn.spectral_radius {}", f(c.spectral_radius));
                let _ = writeln!(s, "esn.input_scaling {}", f(c.input_scaling));
                let _ = writeln!(s, "esn.connectivity {}", f(c.connectivity));
                let _ = writeln!(s, "esn.leak_rate {}", f(c.leak_rate));
                let _ = writeln!(s, "esn.nonlinearity {}", c.nonlinearity.as_str());
                let _ = writeln!(s, "esn.seed {}", c.seed);
            }
            BackendSpec::Qrc(c) => {
                let _ = writeln!(s, "qrc.qubits {}", c.qubits);
                let _ = writeln!(s, "qrc.tau {}", f(c.tau));
                let _ = writeln!(s, "qrc.virtual_nodes {}", c.virtual_nodes);
                let _ = writeln!(s, "qrc.coupling_scale {}", f(c.coupling_scale));
                let _ = writeln!(s, "qrc.field {}", f(c.field));
                let _ = writeln!(s, "qrc.seed {}", c.seed);
            }
        }
        let w = self.readout.weights();
        let _ = writeln!(s, "include_input {}", self.include_input);
        let _ = writeln!(s, "readout.lambda {}", f(self.readout.lambda()));
        let _ = writeln!(s, "readout.outputs {}", w.nrows());
        let _ = writeln!(s, "readout.width {}", w.ncols());
        for r in 0..w.nrows() {
            let row: Vec<String> = (0..w.ncols()).map(|c| f(w[(r, c)])).collect();
            let _ = writeln!(s, "weights {}", row.join(" "));
        }
        for (name, n) in [
            ("input", self.input_normalization),
            ("target", self.target_normalization),
        ] {
            let _ = writeln!(s, "normalization.{name} {} {}", f(n.offset), f(n.scale));
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self, BundleError> {
        let mut cur = Cursor::new(text);
        let (line, header) = cur.next_line("format header")?;
        match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            [MAGIC, v] if *v == FORMAT_VERSION.to_string() => {}
            [MAGIC, v] => return Err(BundleError::Version { found: v.to_string() }),
            _ => return Err(parse_err(line, format!("expected `{MAGIC} {FORMAT_VERSION}` header"))),
        }
        let kind = cur.field("backend")?;
        let backend = match kind.1.as_str() {
            "esn" => BackendSpec::Esn(EsnConfig {
                nodes: cur.value("esn.nodes")?,
                input_dim: cur.value("esn.input_dim")?,
                spectral_radius: cur.value("esn.spectral_radius")?,
                input_scaling: cur.value("esn.input_scaling")?,
                connectivity: cur.value("esn.connectivity")?,
                leak_rate: cur.value("esn.leak_rate")?,
                nonlinearity: {
                    let (line, v) = cur.field("esn.nonlinearity")?;
                    match v.as_str() {
                        "tanh" => Nonlinearity::Tanh,
                        "identity" => Nonlinearity::Identity,
                        other => return Err(parse_err(line, format!("unknown nonlinearity `{other}`"))),
                    }
                },
                seed: cur.value("esn.seed")?,
            }),
            "qrc" => BackendSpec::Qrc(QrcConfig {
                qubits: cur.value("qrc.qubits")?,
                tau: cur.value("qrc.tau")?,
                virtual_nodes: cur.value("qrc.virtual_nodes")?,
                coupling_scale: cur.value("qrc.coupling_scale")?,
                field: cur.value("qrc.field")?,
                seed: cur.value("qrc.seed")?,
            }),
            other => return Err(parse_err(kind.0, format!("unknown backend `{other}`"))),
        };
        let include_input: bool = cur.value("include_input")?;
        let lambda: f64 = cur.value("readout.lambda")?;
        let outputs: usize = cur.value("readout.outputs")?;
        let width: usize = cur.value("readout.width")?;
        let mut weights = DMatrix::zeros(outputs, width);
        for r in 0..outputs {
            let (line, row) = cur.field("weights")?;
            let values: Vec<&str> = row.split_whitespace().collect();
            if values.len() != width {
                return Err(parse_err(
                    line,
                    format!("expected {width} weights, found {}", values.len()),
                ));
            }
            for (c, v) in values.iter().enumerate() {
                weights[(r, c)] = parse_num(line, v)?;
            }
        }
        let input_normalization = cur.normalization("normalization.input")?;
        let target_normalization = cur.normalization("normalization.target")?;
        let (line, end) = cur.next_line("end")?;
        if end != "end" {
            return Err(parse_err(line, format!("expected `end`, found `{end}`")));
        }
        let readout = Readout::from_weights(weights, lambda).map_err(|e| parse_err(line, e.to_string()))?;
        Ok(ModelBundle {
            backend,
            include_input,
            readout,
            input_normalization,
            target_normalization,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), BundleError> {
        std::fs::write(path, self.to_text()).map_err(|e| BundleError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, BundleError> {
        let text = std::fs::read_to_string(path).map_err(|e| BundleError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Rebuilds the reservoir and checks the readout fits it.
    pub fn rebuild(&self) -> Result<crate::Backend, BundleError> {
        let backend = self.backend.build().map_err(|e| BundleError::Mismatch(e.to_string()))?;
        let d = backend.descriptor();
        let extra = if self.include_input {
            backend.input_dimension()
        } else {
            0
        };
        let expected = d.readout_dimension + extra + 1;
        if self.readout.input_width() != expected {
            return Err(BundleError::Mismatch(format!(
                "readout width {} but rebuilt {} backend needs {expected}",
                self.readout.input_width(),
                d.kind.as_str()
            )));
        }
        Ok(backend)
    }

    /// Checks the bundle against the backend a config would build.
    pub fn check_compatible(&self, spec: &BackendSpec) -> Result<(), BundleError> {
        let (mine, theirs) = (self.backend.kind(), spec.kind());
        if mine != theirs {
            return Err(BundleError::Mismatch(format!(
                "model backend is {} but config backend is {}",
                mine.as_str(),
                theirs.as_str()
            )));
        }
        let dims = |s: &BackendSpec| match s {
            BackendSpec::Esn(c) => (ReservoirKind::ClassicalEsn, c.nodes, c.input_dim),
            BackendSpec::Qrc(c) => (ReservoirKind::Quantum, c.readout_dimension(), 1),
        };
        let (a, b) = (dims(&self.backend), dims(spec));
        if a != b {
            return Err(BundleError::Mismatch(format!(
                "model readout/input dimensions {}/{} differ from config {}/{}",
                a.1, a.2, b.1, b.2
            )));
        }
        Ok(())
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> BundleError {
    BundleError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(line: usize, v: &str) -> Result<T, BundleError> {
    v.parse()
        .map_err(|_| parse_err(line, format!("corrupted numeric field `{v}`")))
}

struct Cursor<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor {
            lines: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_line(&mut self, expected: &str) -> Result<(usize, String), BundleError> {
        match self.lines.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l.trim().to_string()))
            }
            None => Err(parse_err(
                self.last + 1,
                format!("unexpected end of file, expected `{expected}`"),
            )),
        }
    }

    fn field(&mut self, key: &str) -> Result<(usize, String), BundleError> {
        let (line, text) = self.next_line(key)?;
        match text.split_once(' ') {
            Some((k, rest)) if k == key => Ok((line, rest.trim().to_string())),
            _ => Err(parse_err(line, format!("expected `{key}`, found `{text}`"))),
        }
    }

    fn value<T: FromStr>(&mut self, key: &str) -> Result<T, BundleError> {
        let (line, v) = self.field(key)?;
        parse_num(line, &v)
    }

    fn normalization(&mut self, key: &str) -> Result<Normalization, BundleError> {
        let (line, v) = self.field(key)?;
        match v.split_whitespace().collect::<Vec<_>>().as_slice() {
            [o, s] => Ok(Normalization {
                offset: parse_num(line, o)?,
                scale: parse_num(line, s)?,
            }),
            _ => Err(parse_err(line, "expected `<offset> <scale>`")),
        }
    }
}
