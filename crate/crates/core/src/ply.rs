//! ASCII PLY import/export for [`PointCloud`].
//!
//! Vertices carry `x y z` as `double`, optionally `nx ny nz` as `double` and
//! an optional `uchar mask`.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::{GeometryError, PointCloud, Vec3};

#[derive(Debug, Error)]
pub enum PlyError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> PlyError {
    PlyError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn write_ply<W: Write>(cloud: &PointCloud, mut out: W) -> io::Result<()> {
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(out, "property double {axis}")?;
    }
    if cloud.normals().is_some() {
        for axis in ["nx", "ny", "nz"] {
            writeln!(out, "property double {axis}")?;
        }
    }
    if cloud.mask().is_some() {
        writeln!(out, "property uchar mask")?;
    }
    writeln!(out, "end_header")?;
    for i in 0..cloud.len() {
        let p = cloud.point(i);
        // {:?} on f64 prints the shortest representation that round-trips
        write!(out, "{:?} {:?} {:?}", p.x, p.y, p.z)?;
        if let Some(ns) = cloud.normals() {
            let n = ns[i];
            write!(out, " {:?} {:?} {:?}", n.x, n.y, n.z)?;
        }
        if let Some(m) = cloud.mask() {
            write!(out, " {}", u8::from(m[i]))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> io::Result<()> {
    let file = fs::File::create(path)?;
    let mut w = io::BufWriter::new(file);
    write_ply(cloud, &mut w)?;
    w.flush()
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud, PlyError> {
    read_ply(fs::File::open(path)?)
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    X,
    Y,
    Z,
    Nx,
    Ny,
    Nz,
    Mask,
    Other,
}

pub fn read_ply<R: Read>(input: R) -> Result<PointCloud, PlyError> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines().enumerate();

    match lines.next() {
        Some((_, Ok(l))) if l.trim() == "ply" => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => return Err(parse_err(1, "missing 'ply' magic")),
    }

    let mut vertex_count: Option<usize> = None;
    let mut in_vertex = false;
    let mut fields = Vec::new();
    for (n, line) in lines.by_ref() {
        let line = line?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => {}
            ["format", ..] => return Err(parse_err(n + 1, "only ascii PLY is supported")),
            ["comment", ..] | [] => {}
            ["element", "vertex", count] => {
                vertex_count = Some(
                    count
                        .parse()
                        .map_err(|_| parse_err(n + 1, "bad vertex count"))?,
                );
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", _ty, name] if in_vertex => fields.push(match *name {
                "x" => Field::X,
                "y" => Field::Y,
                "z" => Field::Z,
                "nx" => Field::Nx,
                "ny" => Field::Ny,
                "nz" => Field::Nz,
                "mask" => Field::Mask,
                _ => Field::Other,
            }),
            ["property", ..] => {}
            ["end_header"] => break,
            _ => return Err(parse_err(n + 1, format!("unexpected header line '{line}'"))),
        }
    }
    let count = vertex_count.ok_or_else(|| parse_err(0, "no vertex element"))?;
    for required in [Field::X, Field::Y, Field::Z] {
        if !fields.contains(&required) {
            return Err(parse_err(0, "vertex element lacks x/y/z"));
        }
    }
    let has_normals = [Field::Nx, Field::Ny, Field::Nz]
        .iter()
        .all(|f| fields.contains(f));
    let has_mask = fields.contains(&Field::Mask);

    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::new();
    let mut mask = Vec::new();
    for _ in 0..count {
        let (n, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, "fewer vertices than declared"))?;
        let line = line?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(n + 1, e.to_string()))?;
        if vals.len() != fields.len() {
            return Err(parse_err(n + 1, "wrong number of vertex values"));
        }
        let mut p = Vec3::zeros();
        let mut nrm = Vec3::zeros();
        let mut m = false;
        for (f, v) in fields.iter().zip(vals) {
            match f {
                Field::X => p.x = v,
                Field::Y => p.y = v,
                Field::Z => p.z = v,
                Field::Nx => nrm.x = v,
                Field::Ny => nrm.y = v,
                Field::Nz => nrm.z = v,
                Field::Mask => m = v != 0.0,
                Field::Other => {}
            }
        }
        points.push(p);
        if has_normals {
            normals.push(nrm);
        }
        if has_mask {
            mask.push(m);
        }
    }
    let mut cloud = PointCloud::new(points)?;
    if has_normals {
        cloud = cloud.with_normals(normals)?;
    }
    if has_mask {
        cloud = cloud.with_mask(mask)?;
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_exact(
            pts in prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 1..40),
            with_mask in any::<bool>(),
        ) {
            let n = pts.len();
            let mut cloud = PointCloud::from_points(pts).unwrap();
            let normals: Vec<Vec3> = (0..n).map(|i| {
                let a = i as f64 * 0.37;
                Vec3::new(a.cos(), a.sin(), 0.0)
            }).collect();
            cloud = cloud.with_normals(normals).unwrap();
            if with_mask {
                cloud = cloud.with_mask((0..n).map(|i| i % 3 == 0).collect()).unwrap();
            }
            let mut buf = Vec::new();
            write_ply(&cloud, &mut buf).unwrap();
            let back = read_ply(buf.as_slice()).unwrap();
            prop_assert_eq!(back, cloud);
        }
    }

    #[test]
    fn rejects_binary() {
        let src = "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(read_ply(src.as_bytes()).is_err());
    }

    #[test]
    fn reads_points_only() {
        let src = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nend_header\n0 0 0\n1 2 3\n";
        let c = read_ply(src.as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.normals().is_none());
        assert_eq!(*c.point(1), Vec3::new(1.0, 2.0, 3.0));
    }
}
