//! Legacy ASCII VTK output (`UNSTRUCTURED_GRID`, tetra cells).

use super::Mesh;
use crate::scalar::Real;
use std::io::{self, Write};

/// A field sampled at the mesh vertices.
#[derive(Debug, Clone)]
pub enum NodalField<T> {
    Scalar { name: String, values: Vec<T> },
    Vector { name: String, values: Vec<[T; 3]> },
}

impl<T> NodalField<T> {
    fn len(&self) -> usize {
        match self {
            NodalField::Scalar { values, .. } => values.len(),
            NodalField::Vector { values, .. } => values.len(),
        }
    }
}

const VTK_TETRA: u8 = 10;

pub fn write_vtk<T: Real, W: Write>(mesh: &Mesh<T>, fields: &[NodalField<T>], mut out: W) -> io::Result<()> {
    for f in fields {
        if f.len() != mesh.num_vertices() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "nodal field length does not match vertex count",
            ));
        }
    }
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "msc mesh n={}", mesh.n())?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_vertices())?;
    for p in mesh.vertices() {
        writeln!(out, "{} {} {}", p[0], p[1], p[2])?;
    }
    let nt = mesh.num_tets();
    writeln!(out, "CELLS {} {}", nt, 5 * nt)?;
    for t in mesh.tets() {
        writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(out, "CELL_TYPES {}", nt)?;
    for _ in 0..nt {
        writeln!(out, "{}", VTK_TETRA)?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_vertices())?;
    }
    for f in fields {
        match f {
            NodalField::Scalar { name, values } => {
                writeln!(out, "SCALARS {} double 1", name)?;
                writeln!(out, "LOOKUP_TABLE default")?;
                for v in values {
                    writeln!(out, "{:e}", v)?;
                }
            }
            NodalField::Vector { name, values } => {
                writeln!(out, "VECTORS {} double", name)?;
                for v in values {
                    writeln!(out, "{:e} {:e} {:e}", v[0], v[1], v[2])?;
                }
            }
        }
    }
    Ok(())
}
