//! Plain-text zonation files.
//!
//! ```text
//! REFIND-ZONES 1
//! <nx> <ny> <n_zones>            grid meshes, then ny rows of nx indices
//! 0 0 <n_zones> <n_cells>        other meshes, then one line of indices
//! ```

use crate::error::{invalid, Error, Result};
use crate::zonation::{Mesh, Zonation};

const MAGIC: &str = "REFIND-ZONES";
const VERSION: usize = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZoneFile {
    pub zonation: Zonation,
    /// `(nx, ny)` for grid meshes.
    pub grid: Option<(usize, usize)>,
}

pub fn write_zonation(z: &Zonation, mesh: &Mesh) -> Result<String> {
    if z.n_cells() != mesh.n_cells() {
        return Err(invalid("zonation does not match the mesh"));
    }
    let mut out = format!("{MAGIC} {VERSION}\n");
    let join = |cells: &[usize]| cells.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    match mesh.grid_dims() {
        Some((nx, ny)) => {
            out.push_str(&format!("{nx} {ny} {}\n", z.n_zones()));
            for row in z.assignment().chunks(nx) {
                out.push_str(&join(row));
                out.push('\n');
            }
        }
        None => {
            out.push_str(&format!("0 0 {} {}\n", z.n_zones(), z.n_cells()));
            out.push_str(&join(z.assignment()));
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn read_zonation(text: &str) -> Result<ZoneFile> {
    let mut tokens = text.split_ascii_whitespace().map(|t| (t, t.as_ptr() as usize - text.as_ptr() as usize));
    let mut next = |what: &str| -> Result<(&str, usize)> {
        tokens.next().ok_or_else(|| Error::Parse {
            offset: text.len(),
            message: format!("unexpected end of file, expected {what}"),
        })
    };
    let number = |(tok, at): (&str, usize), what: &str| -> Result<usize> {
        tok.parse().map_err(|_| Error::Parse { offset: at, message: format!("expected {what}, found {tok:?}") })
    };

    let (magic, at) = next("header")?;
    if magic != MAGIC {
        return Err(Error::Parse { offset: at, message: format!("expected {MAGIC}") });
    }
    let version = next("version")?;
    if number(version, "version")? != VERSION {
        return Err(Error::Parse { offset: version.1, message: "unsupported version".into() });
    }
    let nx = number(next("nx")?, "nx")?;
    let ny = number(next("ny")?, "ny")?;
    let zones_tok = next("zone count")?;
    let n_zones = number(zones_tok, "zone count")?;
    let (grid, n_cells) = match (nx, ny) {
        (0, 0) => (None, number(next("cell count")?, "cell count")?),
        (0, _) | (_, 0) => {
            return Err(Error::Parse { offset: zones_tok.1, message: "grid dimensions must be positive".into() })
        }
        _ => (Some((nx, ny)), nx * ny),
    };

    let mut zone_of = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let tok = next("zone index")?;
        zone_of.push(number(tok, "zone index")?);
    }
    if let Some((_, at)) = tokens.next() {
        return Err(Error::Parse { offset: at, message: "trailing data".into() });
    }
    let zonation =
        Zonation::new(zone_of, n_zones).map_err(|e| Error::Parse { offset: zones_tok.1, message: e.to_string() })?;
    Ok(ZoneFile { zonation, grid })
}
