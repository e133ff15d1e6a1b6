// Field snapshots: one ASCII header line
//
//     PFCFIELD 1 <nx> <ny> <lx> <ly> <t>\n
//
// followed by nx*ny little-endian f64 values in row-major (x-fastest) order.
// Floats in the header are printed in shortest-round-trip form, so
// write -> read is bit-exact on every platform.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

const MAGIC: &str = "PFCFIELD";
const VERSION: &str = "1";

pub fn write_snapshot(field: &Field, t: f64, path: &Path) -> Result<()> {
    let grid = field.grid();
    let mut buf = Vec::with_capacity(64 + 8 * grid.cells());
    writeln!(
        &mut buf,
        "{MAGIC} {VERSION} {} {} {:e} {:e} {:e}",
        grid.nx(),
        grid.ny(),
        grid.lx(),
        grid.ly(),
        t
    )?;
    for &v in field.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf)?;
    Ok(())
}

fn bad(offset: usize, msg: impl Into<String>) -> Error {
    Error::Snapshot {
        offset: offset as u64,
        msg: msg.into(),
    }
}

pub fn read_snapshot(path: &Path) -> Result<(Field, f64)> {
    let bytes = std::fs::read(path)?;
    parse_snapshot(&bytes)
}

pub fn parse_snapshot(bytes: &[u8]) -> Result<(Field, f64)> {
    let header_end = bytes
        .iter()
        .take(256)
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad(0, "missing header line terminator"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|e| bad(e.valid_up_to(), "header is not valid ASCII"))?;
    let tok: Vec<&str> = header.split_ascii_whitespace().collect();
    if tok.len() != 7 {
        return Err(bad(0, format!("expected 7 header fields, got {}", tok.len())));
    }
    if tok[0] != MAGIC {
        return Err(bad(0, format!("bad magic {:?}", tok[0])));
    }
    if tok[1] != VERSION {
        return Err(bad(0, format!("unsupported version {:?}", tok[1])));
    }
    let nx: usize = tok[2]
        .parse()
        .map_err(|_| bad(0, format!("bad nx {:?}", tok[2])))?;
    let ny: usize = tok[3]
        .parse()
        .map_err(|_| bad(0, format!("bad ny {:?}", tok[3])))?;
    let lx: f64 = tok[4]
        .parse()
        .map_err(|_| bad(0, format!("bad lx {:?}", tok[4])))?;
    let ly: f64 = tok[5]
        .parse()
        .map_err(|_| bad(0, format!("bad ly {:?}", tok[5])))?;
    let t: f64 = tok[6]
        .parse()
        .map_err(|_| bad(0, format!("bad t {:?}", tok[6])))?;
    let grid = GridSpec::new(nx, ny, lx, ly)
        .map_err(|e| bad(0, format!("header describes an invalid grid: {e}")))?;

    let payload = &bytes[header_end + 1..];
    let want = grid.cells() * 8;
    if payload.len() != want {
        return Err(bad(
            header_end + 1,
            format!("payload is {} bytes, expected {want}", payload.len()),
        ));
    }
    let mut field = Field::zeros(grid);
    for (i, (chunk, out)) in payload
        .chunks_exact(8)
        .zip(field.as_mut_slice())
        .enumerate()
    {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunks_exact(8)"));
        if v.is_nan() {
            return Err(bad(header_end + 1 + 8 * i, format!("cell {i} is NaN")));
        }
        *out = v;
    }
    Ok((field, t))
}
