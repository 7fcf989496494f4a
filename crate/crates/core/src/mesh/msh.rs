//! ASCII Gmsh 2.2 reader and writer.
//!
//! Only 3-node triangles (type 2) and 4-node tetrahedra (type 4) are accepted
//! as volume elements. Points (15) and lines (1) are skipped, and in a
//! tetrahedral file triangles are accepted only when they coincide with
//! boundary facets of the tetrahedra. Boundary facets are always inferred
//! from the volume connectivity.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{facet_key, Mesh, MeshError};

pub fn read_msh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_msh(&text)
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), MeshError> {
        let last = self.last;
        self.next()
            .ok_or_else(|| parse_err(last + 1, format!("unexpected end of file, expected {what}")))
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T, MeshError> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid number '{tok}'")))
}

pub fn parse_msh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let mut node_index: HashMap<usize, usize> = HashMap::new();
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut tris: Vec<([usize; 3], usize)> = Vec::new();
    let mut tets: Vec<[usize; 4]> = Vec::new();
    let mut saw_format = false;
    let mut saw_nodes = false;
    let mut saw_elements = false;

    while let Some((ln, line)) = lines.next() {
        match line {
            "$MeshFormat" => {
                let (fl, fmt) = lines.expect("format line")?;
                let mut it = fmt.split_whitespace();
                let version = it.next().unwrap_or("");
                let file_type: u32 = parse_num(it.next().unwrap_or(""), fl)?;
                if !version.starts_with("2.") {
                    return Err(parse_err(
                        fl,
                        format!("unsupported format version {version}"),
                    ));
                }
                if file_type != 0 {
                    return Err(parse_err(fl, "binary files are not supported"));
                }
                let (el, end) = lines.expect("$EndMeshFormat")?;
                if end != "$EndMeshFormat" {
                    return Err(parse_err(el, "expected $EndMeshFormat"));
                }
                saw_format = true;
            }
            "$Nodes" => {
                let (cl, count) = lines.expect("node count")?;
                let count: usize = parse_num(count, cl)?;
                vertices.reserve(count);
                for _ in 0..count {
                    let (nl, node) = lines.expect("node")?;
                    let tok: Vec<&str> = node.split_whitespace().collect();
                    if tok.len() != 4 {
                        return Err(parse_err(nl, "expected 'id x y z'"));
                    }
                    let id: usize = parse_num(tok[0], nl)?;
                    let x = [
                        parse_num(tok[1], nl)?,
                        parse_num(tok[2], nl)?,
                        parse_num(tok[3], nl)?,
                    ];
                    if node_index.insert(id, vertices.len()).is_some() {
                        return Err(parse_err(nl, format!("duplicate node id {id}")));
                    }
                    vertices.push(x);
                }
                let (el, end) = lines.expect("$EndNodes")?;
                if end != "$EndNodes" {
                    return Err(parse_err(el, "expected $EndNodes"));
                }
                saw_nodes = true;
            }
            "$Elements" => {
                if !saw_nodes {
                    return Err(parse_err(ln, "$Elements before $Nodes"));
                }
                let (cl, count) = lines.expect("element count")?;
                let count: usize = parse_num(count, cl)?;
                for _ in 0..count {
                    let (el, elem) = lines.expect("element")?;
                    let tok: Vec<usize> = elem
                        .split_whitespace()
                        .map(|t| parse_num(t, el))
                        .collect::<Result<_, _>>()?;
                    if tok.len() < 3 {
                        return Err(parse_err(el, "truncated element record"));
                    }
                    let (etype, ntags) = (tok[1], tok[2]);
                    let nodes = tok.get(3 + ntags..).unwrap_or(&[]);
                    let lookup = |id: &usize| {
                        node_index
                            .get(id)
                            .copied()
                            .ok_or_else(|| parse_err(el, format!("unknown node id {id}")))
                    };
                    let expected = match etype {
                        15 => 1,
                        1 => 2,
                        2 => 3,
                        4 => 4,
                        other => {
                            return Err(MeshError::UnsupportedElement(format!(
                                "gmsh element type {other} on line {el}"
                            )))
                        }
                    };
                    if nodes.len() != expected {
                        return Err(parse_err(
                            el,
                            format!("element type {etype} needs {expected} nodes"),
                        ));
                    }
                    match etype {
                        2 => {
                            let v = [lookup(&nodes[0])?, lookup(&nodes[1])?, lookup(&nodes[2])?];
                            tris.push((v, el));
                        }
                        4 => tets.push([
                            lookup(&nodes[0])?,
                            lookup(&nodes[1])?,
                            lookup(&nodes[2])?,
                            lookup(&nodes[3])?,
                        ]),
                        _ => {}
                    }
                }
                let (el, end) = lines.expect("$EndElements")?;
                if end != "$EndElements" {
                    return Err(parse_err(el, "expected $EndElements"));
                }
                saw_elements = true;
            }
            other if other.starts_with('$') => {
                // skip unknown sections such as $PhysicalNames
                let end = format!("$End{}", &other[1..]);
                loop {
                    let (_, l) = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            _ => return Err(parse_err(ln, format!("unexpected content '{line}'"))),
        }
    }
    if !saw_format {
        return Err(parse_err(lines.last, "missing $MeshFormat section"));
    }
    if !saw_elements {
        return Err(parse_err(lines.last, "missing $Elements section"));
    }

    if !tets.is_empty() {
        let mesh = Mesh::new(3, vertices, tets)?;
        let boundary: HashSet<_> = mesh
            .boundary_facets()
            .iter()
            .map(|&f| mesh.facet_key(f))
            .collect();
        for (tri, line) in &tris {
            if !boundary.contains(&facet_key(tri)) {
                return Err(MeshError::UnsupportedElement(format!(
                    "triangle on line {line} is a volume element in a tetrahedral mesh"
                )));
            }
        }
        Ok(mesh)
    } else if !tris.is_empty() {
        if vertices.iter().any(|v| v[2] != 0.0) {
            return Err(MeshError::UnsupportedElement(
                "triangle mesh is not planar (z != 0)".into(),
            ));
        }
        Mesh::new(
            2,
            vertices,
            tris.into_iter()
                .map(|(t, _)| [t[0], t[1], t[2], usize::MAX])
                .collect(),
        )
    } else {
        Err(MeshError::UnsupportedElement(
            "no triangles or tetrahedra in file".into(),
        ))
    }
}

/// Writes the volume elements of `mesh` as ASCII Gmsh 2.2.
pub fn write_msh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.n_vertices());
    for (i, v) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{} {:e} {:e} {:e}", i + 1, v[0], v[1], v[2]);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(s, "{}", mesh.n_elements());
    let etype = if mesh.dim() == 3 { 4 } else { 2 };
    for e in 0..mesh.n_elements() {
        let _ = write!(s, "{} {etype} 2 0 0", e + 1);
        for &v in mesh.element(e) {
            let _ = write!(s, " {}", v + 1);
        }
        s.push('\n');
    }
    s.push_str("$EndElements\n");
    std::fs::write(path, s)?;
    Ok(())
}
