//! Kernel field serialization: flat little-endian binary and CSV.

use std::io::{Read, Write};
use std::path::Path;

use super::{DiscreteField, GridSpec, KernelField};
use crate::coefficients::Variant;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"KBKF";
const VERSION: u32 = 1;

/// Writes the header (dims, grid, source, time, variant) followed by the
/// component arrays (component-major, f64 little-endian).
pub fn write_kernel_binary(w: &mut impl Write, kf: &KernelField) -> Result<()> {
    let g = kf.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.d as u32).to_le_bytes())?;
    w.write_all(&(kf.m() as u32).to_le_bytes())?;
    w.write_all(&g.radius.to_le_bytes())?;
    w.write_all(&g.mesh.to_le_bytes())?;
    w.write_all(&(kf.source_node as u64).to_le_bytes())?;
    w.write_all(&(kf.k as u32).to_le_bytes())?;
    w.write_all(&[kf.variant.code()])?;
    w.write_all(&kf.time().to_le_bytes())?;
    w.write_all(&kf.mollifier_width.to_le_bytes())?;
    w.write_all(&(kf.field.values.len() as u64).to_le_bytes())?;
    for h in 0..kf.m() {
        for v in kf.column(h) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_kernel_binary(r: &mut impl Read) -> Result<KernelField> {
    if &take::<4>(r)? != MAGIC {
        return Err(Error::Format("not a kernel field file".into()));
    }
    let version = u32::from_le_bytes(take(r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported kernel file version {version}")));
    }
    let d = u32::from_le_bytes(take(r)?) as usize;
    let m = u32::from_le_bytes(take(r)?) as usize;
    let radius = f64::from_le_bytes(take(r)?);
    let mesh = f64::from_le_bytes(take(r)?);
    let source_node = u64::from_le_bytes(take(r)?) as usize;
    let k = u32::from_le_bytes(take(r)?) as usize;
    let [code] = take::<1>(r)?;
    let variant = Variant::from_code(code).ok_or_else(|| Error::Format(format!("unknown variant code {code}")))?;
    let time = f64::from_le_bytes(take(r)?);
    let mollifier_width = f64::from_le_bytes(take(r)?);
    let len = u64::from_le_bytes(take(r)?) as usize;
    let grid = GridSpec::new(d, radius, mesh)?;
    let nodes = grid.num_nodes();
    if m == 0 || len != nodes * m || source_node >= nodes || k >= m {
        return Err(Error::Format("kernel file header is inconsistent".into()));
    }
    let mut values = vec![0.0; len];
    for h in 0..m {
        for p in 0..nodes {
            values[p * m + h] = f64::from_le_bytes(take(r)?);
        }
    }
    Ok(KernelField {
        source_node,
        source: grid.coords(source_node),
        k,
        variant,
        mollifier_width,
        field: DiscreteField { grid, m, values, time },
    })
}

/// One row per node: coordinates then the m columns.
pub fn write_kernel_csv(w: &mut impl Write, kf: &KernelField) -> Result<()> {
    let g = kf.grid();
    let mut head: Vec<String> = (1..=g.d).map(|a| format!("x{a}")).collect();
    head.extend((1..=kf.m()).map(|h| format!("p_{h}{}", kf.k + 1)));
    writeln!(w, "{}", head.join(","))?;
    for p in 0..g.num_nodes() {
        let mut row: Vec<String> = g.coords(p).iter().map(|v| format!("{v}")).collect();
        row.extend((0..kf.m()).map(|h| format!("{:e}", kf.get(p, h))));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn save_kernel(path: &Path, kf: &KernelField) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_kernel_binary(&mut f, kf)?;
    f.flush()?;
    Ok(())
}

pub fn load_kernel(path: &Path) -> Result<KernelField> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_kernel_binary(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let grid = GridSpec::new(1, 1.0, 0.25).unwrap();
        let field = DiscreteField::from_fn(grid, 2, |x, h| x[0] + h as f64).unwrap();
        let kf = KernelField {
            source_node: 3,
            source: grid.coords(3),
            k: 1,
            variant: Variant::PAdjoint,
            mollifier_width: 0.5,
            field: DiscreteField { time: 0.25, ..field },
        };
        let mut buf = Vec::new();
        write_kernel_binary(&mut buf, &kf).unwrap();
        assert_eq!(buf.len(), 69 + 8 * 14);
        let back = read_kernel_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, kf);
        buf[0] = b'X';
        assert!(matches!(read_kernel_binary(&mut buf.as_slice()), Err(Error::Format(_))));
        let mut csv = Vec::new();
        write_kernel_csv(&mut csv, &kf).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("x1,p_12,p_22\n-0.75,"));
    }
}
