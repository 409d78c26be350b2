//! Binary and CSV field files.
//!
//! Binary layout (little endian): 8-byte magic `DMAGFLD1`, `u32` dim,
//! `u64` n_per_side, `f64` spacing, `u64` seed, three `i64` shift
//! components, then `n_per_side^dim` `f64` values in row-major order.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Grid, PotentialField};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DMAGFLD1";

/// Contents of a field file: everything except the generating model.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub grid: Grid,
    pub seed: u64,
    pub shift: [i64; 3],
    pub values: Vec<f64>,
}

pub fn write_field<W: Write>(field: &PotentialField, mut w: W) -> Result<()> {
    let g = &field.grid;
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(g.dim() as u32)?;
    w.write_u64::<LittleEndian>(g.n_per_side() as u64)?;
    w.write_f64::<LittleEndian>(g.spacing())?;
    w.write_u64::<LittleEndian>(field.seed)?;
    for k in field.shift {
        w.write_i64::<LittleEndian>(k)?;
    }
    for &v in &field.values {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<FieldFile> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a field file (bad magic)".into()));
    }
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let n = r.read_u64::<LittleEndian>()? as usize;
    let spacing = r.read_f64::<LittleEndian>()?;
    let grid = Grid::with_spacing(dim, spacing, n).map_err(|e| Error::Format(e.to_string()))?;
    let seed = r.read_u64::<LittleEndian>()?;
    let mut shift = [0i64; 3];
    for k in shift.iter_mut() {
        *k = r.read_i64::<LittleEndian>()?;
    }
    let mut values = vec![0.0; grid.len()];
    r.read_f64_into::<LittleEndian>(&mut values)
        .map_err(|e| Error::Format(format!("truncated field data: {e}")))?;
    Ok(FieldFile { grid, seed, shift, values })
}

/// One row per node: coordinates followed by the value.
pub fn write_field_csv<W: Write>(field: &PotentialField, mut w: W) -> Result<()> {
    let dim = field.grid.dim();
    let names = ["x1", "x2", "x3"];
    writeln!(w, "{},value", names[..dim].join(","))?;
    for (i, v) in field.values.iter().enumerate() {
        let x = field.grid.coord(i);
        let cs: Vec<String> = x[..dim].iter().map(|c| format!("{c:.17e}")).collect();
        writeln!(w, "{},{v:.17e}", cs.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{CouplingLaw, PotentialModel, Profile};

    #[test]
    fn binary_roundtrip_is_bit_exact() {
        let g = Grid::new(2, 5.0, 9).unwrap();
        let m = PotentialModel::Alloy {
            profile: Profile::cosine(1.0),
            coupling: CouplingLaw::Uniform { low: -1.0, high: 1.0 },
        };
        let f = PotentialField::sample_shifted(&g, &m, 99, [1, -2, 0]).unwrap();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back.seed, 99);
        assert_eq!(back.shift, [1, -2, 0]);
        assert_eq!(back.grid.n_per_side(), 9);
        assert!(back.values.iter().zip(&f.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_field(&b"NOTAFIELD_______"[..]).is_err());
    }
}
