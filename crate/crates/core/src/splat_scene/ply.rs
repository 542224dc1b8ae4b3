//! Binary little-endian PLY in the common 3DGS vertex layout.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use super::{GaussianCloud, SceneError, ShRest};

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Stream(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing property: {0}")]
    MissingProperty(String),
    #[error("non-finite value in gaussian {index}")]
    NonFinite { index: usize },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => f64::from(b[0] as i8),
            Self::U8 => f64::from(b[0]),
            Self::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            Self::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            Self::I32 => f64::from(i32::from_le_bytes(b[..4].try_into().unwrap())),
            Self::U32 => f64::from(u32::from_le_bytes(b[..4].try_into().unwrap())),
            Self::F32 => f64::from(f32::from_le_bytes(b[..4].try_into().unwrap())),
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Header {
    vertex_count: usize,
    /// (name, type, byte offset within a vertex record)
    properties: Vec<(String, Scalar, usize)>,
    stride: usize,
}

impl Header {
    fn offset(&self, name: &str) -> Option<(Scalar, usize)> {
        self.properties
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, t, o)| (*t, *o))
    }

    fn require(&self, name: &str) -> Result<(Scalar, usize), PlyError> {
        self.offset(name)
            .ok_or_else(|| PlyError::MissingProperty(name.to_string()))
    }
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Header, PlyError> {
    let mut line = String::new();
    let mut next = |line: &mut String| -> Result<(), PlyError> {
        line.clear();
        if r.read_line(line)? == 0 {
            return Err(PlyError::Parse("unexpected end of header".into()));
        }
        Ok(())
    };

    next(&mut line)?;
    if line.trim_end() != "ply" {
        return Err(PlyError::Parse("missing 'ply' magic".into()));
    }

    let mut format_ok = false;
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut seen_vertex = false;
    let mut properties = Vec::new();
    let mut stride = 0;
    loop {
        next(&mut line)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["format", fmt, _version] => {
                if *fmt != "binary_little_endian" {
                    return Err(PlyError::Parse(format!("unsupported format: {fmt}")));
                }
                format_ok = true;
            }
            ["element", name, count] => {
                if seen_vertex && *name != "vertex" {
                    in_vertex = false;
                    continue;
                }
                if *name == "vertex" {
                    if seen_vertex {
                        return Err(PlyError::Parse("duplicate vertex element".into()));
                    }
                    let n = count
                        .parse()
                        .map_err(|_| PlyError::Parse(format!("bad vertex count: {count}")))?;
                    vertex_count = Some(n);
                    in_vertex = true;
                    seen_vertex = true;
                } else {
                    return Err(PlyError::Parse(format!("element '{name}' precedes the vertex element")));
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(PlyError::Parse("list properties are not supported".into()));
            }
            ["property", ty, name] => {
                if in_vertex {
                    let scalar =
                        Scalar::parse(ty).ok_or_else(|| PlyError::Parse(format!("unknown property type: {ty}")))?;
                    properties.push((name.to_string(), scalar, stride));
                    stride += scalar.size();
                }
            }
            ["property", ..] => {}
            _ => {
                return Err(PlyError::Parse(format!(
                    "unrecognized header line: {}",
                    line.trim_end()
                )))
            }
        }
    }
    if !format_ok {
        return Err(PlyError::Parse("missing or unsupported format line".into()));
    }
    let vertex_count = vertex_count.ok_or_else(|| PlyError::Parse("no vertex element".into()))?;
    Ok(Header {
        vertex_count,
        properties,
        stride,
    })
}

fn read_body<R: Read>(r: &mut R, header: &Header) -> Result<Vec<u8>, PlyError> {
    let mut body = vec![0u8; header.vertex_count * header.stride];
    r.read_exact(&mut body)
        .map_err(|_| PlyError::Parse("vertex data shorter than declared".into()))?;
    Ok(body)
}

fn open(path: &Path) -> Result<BufReader<File>, PlyError> {
    File::open(path).map(BufReader::new).map_err(|source| PlyError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<GaussianCloud, PlyError> {
    read_ply(&mut open(path.as_ref())?)
}

/// Reads a Gaussian cloud from any buffered reader positioned at the header.
pub fn read_ply<R: BufRead>(r: &mut R) -> Result<GaussianCloud, PlyError> {
    let header = read_header(r)?;

    let mut fields = Vec::new();
    for name in ["x", "y", "z"]
        .into_iter()
        .map(String::from)
        .chain((0..3).map(|i| format!("f_dc_{i}")))
        .chain(std::iter::once("opacity".to_string()))
        .chain((0..3).map(|i| format!("scale_{i}")))
        .chain((0..4).map(|i| format!("rot_{i}")))
    {
        fields.push(header.require(&name)?);
    }

    let rest_count = (0..)
        .take_while(|i| header.offset(&format!("f_rest_{i}")).is_some())
        .count();
    let rest: Vec<(Scalar, usize)> = (0..rest_count)
        .map(|i| header.offset(&format!("f_rest_{i}")).unwrap())
        .collect();
    if rest_count != 0 && ![9, 24, 45].contains(&rest_count) {
        return Err(PlyError::Parse(format!(
            "unexpected number of f_rest properties: {rest_count}"
        )));
    }

    let body = read_body(r, &header)?;
    let n = header.vertex_count;
    let mut means = Vec::with_capacity(n);
    let mut dc = Vec::with_capacity(n);
    let mut opac = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    let mut rots = Vec::with_capacity(n);
    let mut rest_data = Vec::with_capacity(n * rest_count);
    let mut vals = [0.0f64; 14];
    for rec in body.chunks_exact(header.stride.max(1)).take(n) {
        for (v, (t, off)) in vals.iter_mut().zip(&fields) {
            *v = t.read(&rec[*off..]);
        }
        means.push([vals[0], vals[1], vals[2]]);
        dc.push([vals[3], vals[4], vals[5]]);
        opac.push(vals[6]);
        scales.push([vals[7], vals[8], vals[9]]);
        rots.push([vals[10], vals[11], vals[12], vals[13]]);
        rest_data.extend(rest.iter().map(|(t, off)| t.read(&rec[*off..])));
    }

    let sh_rest = if rest_count > 0 {
        Some(ShRest::new(rest_count / 3, rest_data)?)
    } else {
        None
    };
    GaussianCloud::new(means, scales, rots, opac, dc, sh_rest).map_err(|e| match e {
        SceneError::NonFinite { index } => PlyError::NonFinite { index },
        other => PlyError::Scene(other),
    })
}

/// Reads only the `x, y, z` properties of the vertex element.
pub fn load_points_ply(path: impl AsRef<Path>) -> Result<Vec<Vector3<f64>>, PlyError> {
    let mut r = open(path.as_ref())?;
    let header = read_header(&mut r)?;
    let xyz = [header.require("x")?, header.require("y")?, header.require("z")?];
    let body = read_body(&mut r, &header)?;
    Ok(body
        .chunks_exact(header.stride.max(1))
        .take(header.vertex_count)
        .map(|rec| Vector3::from(xyz.map(|(t, off)| t.read(&rec[off..]))))
        .collect())
}

pub fn save_ply(cloud: &GaussianCloud, path: impl AsRef<Path>) -> Result<(), PlyError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| PlyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    write_ply(cloud, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_ply<W: Write>(cloud: &GaussianCloud, w: &mut W) -> Result<(), PlyError> {
    let rest_count = cloud.sh_rest().map_or(0, |r| r.stride());
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for name in ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"] {
        writeln!(w, "property float {name}")?;
    }
    for i in 0..rest_count {
        writeln!(w, "property float f_rest_{i}")?;
    }
    writeln!(w, "property float opacity")?;
    for i in 0..3 {
        writeln!(w, "property float scale_{i}")?;
    }
    for i in 0..4 {
        writeln!(w, "property float rot_{i}")?;
    }
    writeln!(w, "end_header")?;

    let mut rec: Vec<u8> = Vec::with_capacity(4 * (17 + rest_count));
    for i in 0..cloud.len() {
        rec.clear();
        let mut put = |v: f64| rec.extend_from_slice(&(v as f32).to_le_bytes());
        cloud.means()[i].iter().for_each(|&v| put(v));
        (0..3).for_each(|_| put(0.0));
        cloud.sh_dc()[i].iter().for_each(|&v| put(v));
        if let Some(rest) = cloud.sh_rest() {
            rest.get(i).iter().for_each(|&v| put(v));
        }
        put(cloud.opacity_logits()[i]);
        cloud.log_scales()[i].iter().for_each(|&v| put(v));
        cloud.rotations()[i].iter().for_each(|&v| put(v));
        w.write_all(&rec)?;
    }
    Ok(())
}
