//! Legacy VTK writer for cell data on the fine grid.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `STRUCTURED_POINTS` with one `SCALARS` block per field; every field
/// holds `n·n` cell values, x fastest.
pub fn write_cell_fields(
    path: &Path,
    n: usize,
    title: &str,
    fields: &[(&str, &[f64])],
) -> Result<()> {
    std::fs::write(path, cell_fields_string(n, title, fields)?).map_err(|e| Error::io(path, e))
}

pub fn cell_fields_string(n: usize, title: &str, fields: &[(&str, &[f64])]) -> Result<String> {
    let h = 1.0 / n as f64;
    let mut s = String::new();
    let _ = write!(
        s,
        "# vtk DataFile Version 3.0\n{}\nASCII\nDATASET STRUCTURED_POINTS\n\
         DIMENSIONS {} {} 1\nORIGIN 0 0 0\nSPACING {h:e} {h:e} 1\nCELL_DATA {}\n",
        title.lines().next().unwrap_or(""),
        n + 1,
        n + 1,
        n * n
    );
    for (name, values) in fields {
        if values.len() != n * n {
            return Err(Error::Internal(format!(
                "VTK field {name} has {} values, expected {}",
                values.len(),
                n * n
            )));
        }
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values.iter() {
            let _ = writeln!(s, "{v:e}");
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_counts() {
        let s = cell_fields_string(2, "t", &[("k", &[1.0, 2.0, 3.0, 4.0])]).unwrap();
        assert!(s.contains("DIMENSIONS 3 3 1"));
        assert!(s.contains("CELL_DATA 4"));
        assert_eq!(s.lines().filter(|l| l.parse::<f64>().is_ok()).count(), 4);
        assert!(cell_fields_string(2, "t", &[("k", &[1.0])]).is_err());
    }
}
