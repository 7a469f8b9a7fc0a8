//! On-disk formats: binary `LCF2` fields with a key=value sidecar, and the
//! two-column radial CSV.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{Field2D, Grid2D, RadialGrid, RadialProfile};
use crate::error::{Error, Result};

pub const LCF2_MAGIC: &[u8; 4] = b"LCF2";
pub const LCF2_VERSION: u32 = 1;
pub const RADIAL_HEADER: &str = "# logchoquard radial v1";

pub fn encode_lcf2(f: &Field2D) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(48 + 8 * g.len());
    out.extend_from_slice(LCF2_MAGIC);
    out.extend_from_slice(&LCF2_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.nx as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny as u32).to_le_bytes());
    for v in [g.lx, g.ly, g.x0, g.y0] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_lcf2(bytes: &[u8]) -> Result<Field2D> {
    let mut cur = bytes;
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(|_| Error::Format("truncated LCF2 header".into()))?;
    if &magic != LCF2_MAGIC {
        return Err(Error::Format("bad magic, not an LCF2 file".into()));
    }
    let mut u32s = [0u32; 3];
    for v in u32s.iter_mut() {
        let mut b = [0u8; 4];
        cur.read_exact(&mut b).map_err(|_| Error::Format("truncated LCF2 header".into()))?;
        *v = u32::from_le_bytes(b);
    }
    if u32s[0] != LCF2_VERSION {
        return Err(Error::Format(format!("unsupported LCF2 version {}", u32s[0])));
    }
    let mut f64s = [0f64; 4];
    for v in f64s.iter_mut() {
        let mut b = [0u8; 8];
        cur.read_exact(&mut b).map_err(|_| Error::Format("truncated LCF2 header".into()))?;
        *v = f64::from_le_bytes(b);
    }
    let grid = Grid2D::with_center(u32s[1] as usize, u32s[2] as usize, f64s[0], f64s[1], f64s[2], f64s[3])?;
    if cur.len() != 8 * grid.len() {
        return Err(Error::Format(format!("LCF2 payload has {} bytes, expected {}", cur.len(), 8 * grid.len())));
    }
    let values = cur.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    Field2D::new(grid, values)
}

/// Path of the metadata sidecar belonging to a field file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Provenance attached to a written field.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldMeta {
    pub created_by: String,
    pub operation: String,
    pub params: BTreeMap<String, String>,
}

impl FieldMeta {
    pub fn new(operation: &str) -> Self {
        FieldMeta {
            created_by: format!("logchoquard {}", env!("CARGO_PKG_VERSION")),
            operation: operation.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("created_by = {}\noperation = {}\n", self.created_by, self.operation);
        for (k, v) in &self.params {
            s.push_str(&format!("params.{k} = {v}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = FieldMeta::default();
        for kv in parse_key_values(text)? {
            match kv.0.as_str() {
                "created_by" => m.created_by = kv.1,
                "operation" => m.operation = kv.1,
                k => match k.strip_prefix("params.") {
                    Some(p) => {
                        m.params.insert(p.to_string(), kv.1);
                    }
                    None => return Err(Error::Format(format!("unknown metadata key `{k}`"))),
                },
            }
        }
        Ok(m)
    }
}

/// Parse flat `key = value` text; `#` starts a comment line.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| Error::Format(format!("line {}: expected key = value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Write `f` as LCF2 plus its sidecar.
pub fn write_field(path: &Path, f: &Field2D, meta: &FieldMeta) -> Result<()> {
    fs::write(path, encode_lcf2(f))?;
    fs::write(sidecar_path(path), meta.to_text())?;
    Ok(())
}

/// Read an LCF2 field; the sidecar is returned when present.
pub fn read_field(path: &Path) -> Result<(Field2D, Option<FieldMeta>)> {
    let f = decode_lcf2(&fs::read(path)?)?;
    let side = sidecar_path(path);
    let meta = if side.exists() { Some(FieldMeta::parse(&fs::read_to_string(side)?)?) } else { None };
    Ok((f, meta))
}

/// RFC 4180 layout with CRLF records: the format header, then `comments`
/// (each written as a `#` line), then `r,u` and the rows.
pub fn write_radial_csv<W: Write>(w: W, p: &RadialProfile, comments: &[&str]) -> Result<()> {
    let mut w = BufWriter::new(w);
    write!(w, "{RADIAL_HEADER}\r\n")?;
    for c in comments {
        write!(w, "# {}\r\n", c.trim_start_matches('#').trim())?;
    }
    write!(w, "r,u\r\n")?;
    for (r, u) in p.grid().nodes().iter().zip(p.values()) {
        write!(w, "{r:e},{u:e}\r\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a radial CSV; `rmax` is taken half a spacing past the last node,
/// which reproduces the cell-centred grids written by this crate.
pub fn read_radial_csv<R: Read>(r: R) -> Result<RadialProfile> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or_else(|| Error::Format("empty radial file".into()))??;
    if first.trim() != RADIAL_HEADER {
        return Err(Error::Format(format!("expected header `{RADIAL_HEADER}`")));
    }
    let mut rs = Vec::new();
    let mut us = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "r,u" {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| Error::Format(format!("line {}: expected r,u", n + 2)))?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Format(format!("line {}: {e}", n + 2)));
        rs.push(parse(a)?);
        us.push(parse(b)?);
    }
    if rs.len() < 2 {
        return Err(Error::Format("radial file has too few rows".into()));
    }
    let k = rs.len();
    let rmax = rs[k - 1] + 0.5 * (rs[k - 1] - rs[k - 2]);
    RadialProfile::new(RadialGrid::from_nodes(rs, rmax)?, us)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcf2_roundtrip_is_bit_exact() {
        let g = Grid2D::with_center(16, 18, 2.0, 3.5, 0.25, -1.0).unwrap();
        let f = Field2D::from_fn(g, |x, y| (x * 3.1).sin() + y.exp());
        let bytes = encode_lcf2(&f);
        assert_eq!(&bytes[..4], b"LCF2");
        assert_eq!(bytes.len(), 48 + 8 * 16 * 18);
        let back = decode_lcf2(&bytes).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn lcf2_rejects_garbage() {
        assert!(decode_lcf2(b"LCF1").is_err());
        let g = Grid2D::square(16, 1.0).unwrap();
        let mut b = encode_lcf2(&Field2D::zeros(g));
        b.pop();
        assert!(decode_lcf2(&b).is_err());
    }

    #[test]
    fn sidecar_roundtrip() {
        let m = FieldMeta::new("convolve").param("T", 40.0).param("eps", 0.1);
        assert_eq!(FieldMeta::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn radial_csv_roundtrip() {
        let g = RadialGrid::uniform(32, 4.0).unwrap();
        let p = RadialProfile::from_fn(g, |r| (-r * r).exp()).unwrap();
        let mut buf = Vec::new();
        write_radial_csv(&mut buf, &p, &["made by a test"]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# logchoquard radial v1\r\n# made by a test\r\nr,u\r\n"));
        assert_eq!(text.matches("\r\n").count(), text.matches('\n').count());
        let back = read_radial_csv(&buf[..]).unwrap();
        assert_eq!(back.values(), p.values());
        assert!((back.grid().rmax() - 4.0).abs() < 1e-12);
    }
}
