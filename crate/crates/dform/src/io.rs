//! Field files: a one-line JSON header followed by the raw little-endian
//! component payload.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::ncomp;
use crate::charts::{Chart, Grid};
use crate::error::{Error, Result};
use crate::field::{Domain, DoubleFormField};

pub const FORMAT: &str = "DFF";
pub const VERSION: u32 = 1;
pub const ORDERING: &str = "lex-I-major";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartHeader {
    pub kind: String,
    pub dim: usize,
    pub kappa: f64,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub chart: ChartHeader,
    pub grid: GridHeader,
    pub degrees: [usize; 2],
    pub ordering: String,
}

impl Header {
    pub fn for_field(f: &DoubleFormField) -> Self {
        let c = &f.domain.chart;
        Self {
            format: FORMAT.into(),
            version: VERSION,
            chart: ChartHeader {
                kind: "conformal".into(),
                dim: c.dim,
                kappa: c.kappa,
                bounds: c.bounds.iter().map(|&(a, b)| [a, b]).collect(),
            },
            grid: GridHeader { shape: f.domain.grid.shape.clone() },
            degrees: [f.k, f.m],
            ordering: ORDERING.into(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(Error::Format(format!("unknown format {:?}", self.format)));
        }
        if self.version != VERSION {
            return Err(Error::Format(format!("unsupported version {}", self.version)));
        }
        if self.chart.kind != "conformal" {
            return Err(Error::Format(format!("unknown chart kind {:?}", self.chart.kind)));
        }
        if self.ordering != ORDERING {
            return Err(Error::Format(format!("unknown ordering {:?}", self.ordering)));
        }
        let d = self.chart.dim;
        if self.grid.shape.len() != d || self.chart.bounds.len() != d {
            return Err(Error::Format("chart and grid dimensions disagree".into()));
        }
        if self.degrees[0] > d || self.degrees[1] > d {
            return Err(Error::DegreeOverflow { k: self.degrees[0], m: self.degrees[1], dim: d });
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Arc<Domain>> {
        self.check()?;
        let chart = Chart::new(self.chart.dim, self.chart.kappa, self.chart.bounds.iter().map(|b| (b[0], b[1])).collect())?;
        let grid = Grid::new(&chart, self.grid.shape.clone())?;
        Domain::new(chart, grid)
    }

    pub fn payload_len(&self) -> usize {
        let d = self.chart.dim;
        self.grid.shape.iter().product::<usize>() * ncomp(d, self.degrees[0], self.degrees[1]) * 8
    }
}

/// A decoded field file. The header text is kept verbatim so that writing
/// a file back reproduces it byte for byte.
#[derive(Clone, Debug)]
pub struct FieldFile {
    pub header: Header,
    header_text: String,
    pub field: DoubleFormField,
}

impl FieldFile {
    pub fn new(field: DoubleFormField) -> Self {
        let header = Header::for_field(&field);
        let header_text = serde_json::to_string(&header).expect("header serializes");
        Self { header, header_text, field }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Format("missing header line".into()))?;
        let header_text = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Format("header is not UTF-8".into()))?.to_string();
        let header: Header = serde_json::from_str(&header_text).map_err(|e| Error::Format(format!("header: {e}")))?;
        let domain = header.domain()?;
        let payload = &bytes[nl + 1..];
        if payload.len() != header.payload_len() {
            return Err(Error::Format(format!("payload has {} bytes, header implies {}", payload.len(), header.payload_len())));
        }
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let field = DoubleFormField::from_data(&domain, header.degrees[0], header.degrees[1], data)?;
        Ok(Self { header, header_text, field })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.header_text.len() + 1 + self.field.data.len() * 8);
        out.extend_from_slice(self.header_text.as_bytes());
        out.push(b'\n');
        for v in &self.field.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

pub fn read_field(path: &Path) -> Result<DoubleFormField> {
    Ok(FieldFile::decode(&fs::read(path)?)?.field)
}

pub fn write_field(path: &Path, field: &DoubleFormField) -> Result<()> {
    write_atomic(path, &FieldFile::new(field.clone()).encode())
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidValue(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}
