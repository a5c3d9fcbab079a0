//! OBJ and PLY readers, PLY/OBJ writers and per-vertex intensity files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, LittleEndian, ReadBytesExt};

use super::{MeshError, TriangleMesh};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self, MeshError> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            other => Err(MeshError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Load and validate a triangle mesh. Positions are kept exactly as read.
pub fn load_mesh<T: Real>(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<TriangleMesh<T>, MeshError> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let mut reader = BufReader::new(File::open(path)?);
    let (positions, faces) = match format {
        MeshFormat::Obj => parse_obj(reader)?,
        MeshFormat::Ply => parse_ply(&mut reader)?,
    };
    let positions = positions.into_iter().map(|p| p.map(T::c)).collect();
    TriangleMesh::new(positions, faces)
}

type RawMesh = (Vec<[f64; 3]>, Vec<[usize; 3]>);

fn parse_err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

pub fn parse_obj(reader: impl BufRead) -> Result<RawMesh, MeshError> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let line = line.split('#').next().unwrap_or("");
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let coords: Vec<f64> = tok
                    .map(|t| t.parse::<f64>().map_err(|e| parse_err(line_no, e.to_string())))
                    .collect::<Result<_, _>>()?;
                if coords.len() < 3 {
                    return Err(parse_err(line_no, "vertex needs three coordinates"));
                }
                positions.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let idx: Vec<usize> = tok
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| parse_err(line_no, format!("bad index `{t}`")))?;
                        let resolved = if i > 0 { i - 1 } else { positions.len() as i64 + i };
                        if i == 0 || resolved < 0 {
                            return Err(parse_err(line_no, format!("index `{t}` out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() != 3 {
                    return Err(MeshError::PolygonFace { line: line_no, count: idx.len() });
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    Ok((positions, faces))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => PlyType::I8,
            "uchar" | "uint8" => PlyType::U8,
            "short" | "int16" => PlyType::I16,
            "ushort" | "uint16" => PlyType::U16,
            "int" | "int32" => PlyType::I32,
            "uint" | "uint32" => PlyType::U32,
            "float" | "float32" => PlyType::F32,
            "double" | "float64" => PlyType::F64,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
enum PlyProperty {
    Scalar { name: String, ty: PlyType },
    List { name: String, count: PlyType, item: PlyType },
}

#[derive(Debug, Clone)]
struct PlyElement {
    name: String,
    count: usize,
    props: Vec<PlyProperty>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyEncoding {
    Ascii,
    Little,
    Big,
}

fn read_binary<R: Read + ?Sized>(r: &mut R, ty: PlyType, enc: PlyEncoding) -> std::io::Result<f64> {
    macro_rules! rd {
        ($m:ident) => {
            match enc {
                PlyEncoding::Big => r.$m::<BigEndian>()? as f64,
                _ => r.$m::<LittleEndian>()? as f64,
            }
        };
    }
    Ok(match ty {
        PlyType::I8 => r.read_i8()? as f64,
        PlyType::U8 => r.read_u8()? as f64,
        PlyType::I16 => rd!(read_i16),
        PlyType::U16 => rd!(read_u16),
        PlyType::I32 => rd!(read_i32),
        PlyType::U32 => rd!(read_u32),
        PlyType::F32 => rd!(read_f32),
        PlyType::F64 => rd!(read_f64),
    })
}

pub fn parse_ply(reader: &mut impl BufRead) -> Result<RawMesh, MeshError> {
    let mut line = String::new();
    let mut line_no = 0;
    let mut next_line = |reader: &mut dyn BufRead, line: &mut String| -> Result<usize, MeshError> {
        line.clear();
        line_no += 1;
        if reader.read_line(line)? == 0 {
            return Err(parse_err(line_no, "unexpected end of header"));
        }
        Ok(line_no)
    };

    let n = next_line(reader, &mut line)?;
    if line.trim() != "ply" {
        return Err(parse_err(n, "missing `ply` magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let n = next_line(reader, &mut line)?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", fmt, _] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::Little,
                    "binary_big_endian" => PlyEncoding::Big,
                    other => return Err(parse_err(n, format!("unknown format `{other}`"))),
                })
            }
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count.parse().map_err(|_| parse_err(n, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", cnt, item, name] => {
                let el = elements.last_mut().ok_or_else(|| parse_err(n, "property before element"))?;
                let count = PlyType::parse(cnt).ok_or_else(|| parse_err(n, "bad list count type"))?;
                let item = PlyType::parse(item).ok_or_else(|| parse_err(n, "bad list item type"))?;
                el.props.push(PlyProperty::List { name: name.to_string(), count, item });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| parse_err(n, "property before element"))?;
                let ty = PlyType::parse(ty).ok_or_else(|| parse_err(n, format!("bad property type `{ty}`")))?;
                el.props.push(PlyProperty::Scalar { name: name.to_string(), ty });
            }
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(parse_err(n, format!("unexpected header line `{}`", line.trim()))),
        }
    }
    let encoding = encoding.ok_or_else(|| parse_err(line_no, "missing format line"))?;

    let mut positions = Vec::new();
    let mut faces = Vec::new();
    let mut ascii_tokens: Vec<String> = Vec::new();
    if encoding == PlyEncoding::Ascii {
        let mut rest = String::new();
        reader.read_to_string(&mut rest)?;
        ascii_tokens = rest.split_whitespace().map(str::to_string).collect();
    }
    let mut cursor = 0usize;
    let mut read_value = |reader: &mut dyn BufRead, ty: PlyType| -> Result<f64, MeshError> {
        match encoding {
            PlyEncoding::Ascii => {
                let t = ascii_tokens.get(cursor).ok_or_else(|| parse_err(0, "truncated ascii body"))?;
                cursor += 1;
                t.parse::<f64>().map_err(|_| parse_err(0, format!("bad number `{t}`")))
            }
            enc => read_binary(reader, ty, enc).map_err(MeshError::from),
        }
    };

    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [None; 3];
            for prop in &el.props {
                match prop {
                    PlyProperty::Scalar { name, ty } => {
                        let v = read_value(reader, *ty)?;
                        if el.name == "vertex" {
                            match name.as_str() {
                                "x" => xyz[0] = Some(v),
                                "y" => xyz[1] = Some(v),
                                "z" => xyz[2] = Some(v),
                                _ => {}
                            }
                        }
                    }
                    PlyProperty::List { name, count, item } => {
                        let len = read_value(reader, *count)? as usize;
                        let mut items = Vec::with_capacity(len);
                        for _ in 0..len {
                            items.push(read_value(reader, *item)?);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            if len != 3 {
                                return Err(MeshError::PolygonFace { line: 0, count: len });
                            }
                            if items.iter().any(|&i| i < 0.0) {
                                return Err(parse_err(0, "negative face index"));
                            }
                            faces.push([items[0] as usize, items[1] as usize, items[2] as usize]);
                        }
                    }
                }
            }
            if el.name == "vertex" {
                match xyz {
                    [Some(x), Some(y), Some(z)] => positions.push([x, y, z]),
                    _ => return Err(parse_err(0, "vertex element lacks x, y, z")),
                }
            }
        }
    }
    Ok((positions, faces))
}

/// ASCII PLY with optional per-vertex RGB and an optional extra per-vertex
/// scalar property (e.g. a density column).
pub fn write_ply<T: Real>(
    path: impl AsRef<Path>,
    mesh: &TriangleMesh<T>,
    colors: Option<&[[u8; 3]]>,
    scalar: Option<(&str, &[f64])>,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.n_vertices())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    if colors.is_some() {
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
    }
    if let Some((name, _)) = scalar {
        writeln!(w, "property double {name}")?;
    }
    writeln!(w, "element face {}", mesh.n_faces())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for (v, p) in mesh.positions().iter().enumerate() {
        write!(w, "{} {} {}", p[0].f64(), p[1].f64(), p[2].f64())?;
        if let Some(c) = colors {
            write!(w, " {} {} {}", c[v][0], c[v][1], c[v][2])?;
        }
        if let Some((_, s)) = scalar {
            write!(w, " {}", s[v])?;
        }
        writeln!(w)?;
    }
    for f in mesh.faces() {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    w.flush()
}

pub fn write_obj<T: Real>(path: impl AsRef<Path>, mesh: &TriangleMesh<T>) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in mesh.positions() {
        writeln!(w, "v {} {} {}", p[0].f64(), p[1].f64(), p[2].f64())?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    w.flush()
}

/// One float per line, vertex order = file order.
pub fn read_intensities(path: impl AsRef<Path>, n_vertices: usize) -> Result<Vec<f64>, MeshError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::with_capacity(n_vertices);
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse::<f64>().map_err(|e| parse_err(k + 1, e.to_string()))?);
    }
    if out.len() != n_vertices {
        return Err(MeshError::IntensityCount { got: out.len(), expected: n_vertices });
    }
    Ok(out)
}
