use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::geometry::{OrganizedCloud, Point3};

/// Header comment carrying the grid size: `comment organized <w> <h>`.
pub const PLY_ORGANIZED_COMMENT: &str = "organized";

/// Writes an ASCII PLY with `x y z valid` per vertex in row-major order.
/// Invalid cells are written as `0 0 0 0`.
pub fn write_ply(mut w: impl Write, cloud: &OrganizedCloud) -> Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "comment {} {} {}", PLY_ORGANIZED_COMMENT, cloud.width(), cloud.height())?;
    writeln!(w, "element vertex {}", cloud.len())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "property uchar valid")?;
    writeln!(w, "end_header")?;
    for (p, &ok) in cloud.points().iter().zip(cloud.valid()) {
        if ok {
            // shortest round-trip representation
            writeln!(w, "{:?} {:?} {:?} 1", p.x, p.y, p.z)?;
        } else {
            writeln!(w, "0 0 0 0")?;
        }
    }
    Ok(())
}

pub fn read_ply(reader: impl Read) -> Result<OrganizedCloud> {
    let r = BufReader::new(reader);
    let mut lines = r.lines();
    let mut next_line = || -> Result<String> {
        lines.next().ok_or_else(|| Error::Format("unexpected end of PLY".into()))?.map_err(Error::from)
    };
    if next_line()?.trim() != "ply" {
        return Err(Error::Format("missing ply magic".into()));
    }
    let mut grid = None;
    let mut count = None;
    let mut props: Vec<String> = Vec::new();
    loop {
        let line = next_line()?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => return Err(Error::Format(format!("unsupported PLY format {other}"))),
            ["comment", tag, w, h] if *tag == PLY_ORGANIZED_COMMENT => {
                grid = Some((parse::<usize>(w)?, parse::<usize>(h)?));
            }
            ["comment", ..] | [] => {}
            ["element", "vertex", n] => count = Some(parse::<usize>(n)?),
            ["element", other, ..] => return Err(Error::Format(format!("unexpected element {other}"))),
            ["property", _ty, name] => props.push(name.to_string()),
            ["end_header"] => break,
            _ => return Err(Error::Format(format!("bad PLY header line {line:?}"))),
        }
    }
    let (width, height) = grid.ok_or_else(|| Error::Format("missing `comment organized <w> <h>`".into()))?;
    let count = count.ok_or_else(|| Error::Format("missing vertex element".into()))?;
    if count != width * height {
        return Err(Error::Format(format!("{count} vertices for a {width}x{height} grid")));
    }
    let col = |name: &str| props.iter().position(|p| p == name).ok_or_else(|| Error::Format(format!("missing property {name}")));
    let (ix, iy, iz, iv) = (col("x")?, col("y")?, col("z")?, col("valid")?);

    let mut points = Vec::with_capacity(count);
    let mut valid = Vec::with_capacity(count);
    for _ in 0..count {
        let line = next_line()?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != props.len() {
            return Err(Error::Format(format!("vertex line {line:?} has {} fields", f.len())));
        }
        let ok = parse::<u8>(f[iv])? != 0;
        let p = Point3::new(parse(f[ix])?, parse(f[iy])?, parse(f[iz])?);
        points.push(if ok { p } else { Point3::origin() });
        valid.push(ok);
    }
    OrganizedCloud::new(width, height, points, valid).map_err(|e| Error::Format(e.to_string()))
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Format(format!("cannot parse {s:?}")))
}
