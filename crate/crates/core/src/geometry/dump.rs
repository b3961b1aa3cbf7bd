//! Binary field dumps.
//!
//! Layout: `b"JFLB"`, `version: u32`, `mode: u8`, `ndims: u8`, then `ndims`
//! dimensions as `u32`, then every node value as an `f64`, row-major. All
//! integers and floats are little-endian.

use std::io::{Read, Write};
use std::path::Path;

use super::field::ScalarField;
use super::grid::{Grid, Mode};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"JFLB";
pub const VERSION: u32 = 1;

pub fn write_field<W: Write>(field: &ScalarField, mut w: W) -> Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[grid.mode().code(), grid.ndims() as u8])?;
    for &d in grid.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<ScalarField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Dump(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Dump(format!("unsupported version {version}")));
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head)?;
    let mode = Mode::from_code(head[0]).ok_or_else(|| Error::Dump(format!("unknown mode {}", head[0])))?;
    let ndims = head[1] as usize;
    if ndims != mode.ndims() {
        return Err(Error::Dump(format!("mode {mode} with {ndims} dimensions")));
    }
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        r.read_exact(&mut word)?;
        dims.push(u32::from_le_bytes(word) as usize);
    }
    if dims.iter().any(|&d| d != dims[0]) {
        return Err(Error::Dump(format!("non-uniform dimensions {dims:?}")));
    }
    let grid = Grid::new(mode, dims[0]).map_err(|e| Error::Dump(e.to_string()))?;
    let mut values = Vec::with_capacity(grid.len());
    let mut buf = [0u8; 8];
    for _ in 0..grid.len() {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    ScalarField::new(&grid, values)
}

pub fn save(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_field(field, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ScalarField> {
    let file = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let grid = Grid::reduced(8).unwrap();
        let f = ScalarField::from_fn(&grid, |x| x[0] - 2.0 * x[1]).unwrap();
        let mut bytes = Vec::new();
        write_field(&f, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"JFLB");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(bytes[8], 0);
        assert_eq!(bytes[9], 2);
        assert_eq!(&bytes[10..14], &8u32.to_le_bytes());
        assert_eq!(&bytes[14..18], &8u32.to_le_bytes());
        assert_eq!(bytes.len(), 18 + 64 * 8);
        // node (0, 1) is x2 = 1/8
        assert_eq!(&bytes[26..34], &(-0.25f64).to_le_bytes());
        let back = read_field(&bytes[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_field(&b"JFLX\x01\0\0\0"[..]), Err(Error::Dump(_))));
        let mut bytes = b"JFLB".to_vec();
        bytes.extend(2u32.to_le_bytes());
        assert!(matches!(read_field(&bytes[..]), Err(Error::Dump(_))));
    }
}
