//! Self-describing array files and CSV cuts.
//!
//! Layout: the magic line `GHOSTSIM-ARRAY 1\n`, a little-endian `u64` byte
//! count, a JSON header of that length, then the payload as little-endian
//! `f64` in row-major order of `shape`.

use crate::error::{Error, Result};
use crate::lattice::{Plane, PlaneKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8] = b"GHOSTSIM-ARRAY 1\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisScale {
    pub name: String,
    /// Sample spacing in plane units.
    pub step: f64,
    /// Length of one plane unit in metres.
    pub unit_m: f64,
    /// Coordinate of sample 0 in plane units.
    pub origin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayHeader {
    /// What the file holds: `estimate`, `oracle`, `reconstruction`, `gain`, ...
    pub kind: String,
    /// `[components, ny, nx]`.
    pub shape: Vec<usize>,
    /// Name of each leading-axis component.
    pub components: Vec<String>,
    /// `near` or `far`.
    pub plane: String,
    pub axes: Vec<AxisScale>,
    pub geometry: String,
    pub estimator: Option<String>,
    pub shots: u64,
    pub seed: u64,
    pub config_hash: String,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl ArrayHeader {
    /// Header for `components` maps on the lattice of `plane`.
    pub fn for_plane(kind: &str, components: &[&str], plane: &Plane, nx: usize, ny: usize) -> Self {
        let axis = |name: &str, i: usize, n: usize| AxisScale {
            name: name.into(),
            step: plane.step[i],
            unit_m: plane.unit,
            origin: plane.coord(0, n, i),
        };
        Self {
            kind: kind.into(),
            shape: vec![components.len(), ny, nx],
            components: components.iter().map(|s| s.to_string()).collect(),
            plane: match plane.kind {
                PlaneKind::Near => "near".into(),
                PlaneKind::Far => "far".into(),
            },
            axes: vec![axis("x", 0, nx), axis("y", 1, ny)],
            geometry: String::new(),
            estimator: None,
            shots: 0,
            seed: 0,
            config_hash: String::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn plane_kind(&self) -> Result<PlaneKind> {
        match self.plane.as_str() {
            "near" => Ok(PlaneKind::Near),
            "far" => Ok(PlaneKind::Far),
            other => Err(Error::Comparison(format!("unknown plane tag {other:?}"))),
        }
    }

    /// The lattice plane described by the axis scales.
    pub fn plane(&self) -> Result<Plane> {
        let step = |i: usize| self.axes.get(i).map(|a| a.step).unwrap_or(1.0);
        Ok(Plane {
            kind: self.plane_kind()?,
            step: [step(0), step(1)],
            unit: self.axes.first().map(|a| a.unit_m).unwrap_or(1.0),
        })
    }

    pub fn nx(&self) -> usize {
        self.shape.get(2).copied().unwrap_or(0)
    }

    pub fn ny(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFile {
    pub header: ArrayHeader,
    pub data: Vec<f64>,
}

impl ArrayFile {
    pub fn new(header: ArrayHeader, components: &[&[f64]]) -> Result<Self> {
        let per = header.shape.iter().skip(1).product::<usize>();
        if components.len() != header.shape[0] || components.iter().any(|c| c.len() != per) {
            return Err(Error::Numeric("array components do not match the declared shape".into()));
        }
        let data = components.iter().flat_map(|c| c.iter().copied()).collect();
        Ok(Self { header, data })
    }

    pub fn component(&self, name: &str) -> Option<&[f64]> {
        let per = self.header.shape.iter().skip(1).product::<usize>();
        let i = self.header.components.iter().position(|c| c == name)?;
        Some(&self.data[i * per..(i + 1) * per])
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_vec_pretty(&self.header)
            .map_err(|e| Error::Numeric(format!("cannot encode array header: {e}")))?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&(header.len() as u64).to_le_bytes())?;
        out.write_all(&header)?;
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let bad = |msg: &str| Error::Comparison(format!("{}: {msg}", path.display()));
        if !bytes.starts_with(MAGIC) {
            return Err(bad("not a ghostsim array file"));
        }
        let mut pos = MAGIC.len();
        let len_bytes: [u8; 8] = bytes
            .get(pos..pos + 8)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| bad("truncated header length"))?;
        let hlen = u64::from_le_bytes(len_bytes) as usize;
        pos += 8;
        let hbytes = bytes.get(pos..pos + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: ArrayHeader =
            serde_json::from_slice(hbytes).map_err(|e| bad(&format!("invalid header: {e}")))?;
        pos += hlen;
        let count: usize = header.shape.iter().product();
        let payload = &bytes[pos..];
        if payload.len() != count * 8 {
            return Err(bad("payload size does not match the shape"));
        }
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight")))
            .collect();
        Ok(Self { header, data })
    }
}

/// Write a 1-D cut: a coordinate column followed by named value columns.
pub fn write_csv(path: &Path, coord_name: &str, coords: &[f64], columns: &[(&str, &[f64])]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let mut head = vec![coord_name.to_string()];
    head.extend(columns.iter().map(|(n, _)| n.to_string()));
    w.write_record(&head).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for (i, x) in coords.iter().enumerate() {
        let mut row = vec![format!("{x:.10e}")];
        row.extend(columns.iter().map(|(_, c)| format!("{:.10e}", c[i])));
        w.write_record(&row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let plane = Plane { kind: PlaneKind::Far, step: [0.05, 1.0], unit: 3.3e-4 };
        let mut h = ArrayHeader::for_plane("estimate", &["real", "imag"], &plane, 4, 1);
        h.shots = 12;
        h.seed = 7;
        h.config_hash = "abc".into();
        h.meta.insert("x1".into(), serde_json::json!(-8.6));
        let f = ArrayFile::new(h, &[&[1.0, 2.0, 3.0, 4.0], &[-1.0, 0.5, 0.25, 1e-300]]).unwrap();
        let p = dir.path().join("a.gsa");
        f.write(&p).unwrap();
        let g = ArrayFile::read(&p).unwrap();
        assert_eq!(f, g);
        assert_eq!(g.component("imag").unwrap()[1], 0.5);
        assert_eq!(g.header.plane().unwrap(), plane);
        assert_eq!(g.header.axes[0].origin, -0.1);
    }

    #[test]
    fn shape_mismatch_and_garbage_are_rejected() {
        let plane = Plane { kind: PlaneKind::Near, step: [1.0, 1.0], unit: 1.0 };
        let h = ArrayHeader::for_plane("x", &["real"], &plane, 3, 1);
        assert!(ArrayFile::new(h, &[&[1.0]]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk");
        std::fs::write(&p, b"hello").unwrap();
        assert!(matches!(ArrayFile::read(&p), Err(Error::Comparison(_))));
    }

    #[test]
    fn csv_cut_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cut.csv");
        write_csv(&p, "x", &[0.0, 1.0], &[("re", &[1.0, 2.0]), ("im", &[0.0, -1.0])]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,re,im");
        assert_eq!(lines.len(), 3);
    }
}
