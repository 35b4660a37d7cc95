//! Dumps of the offline objects: κ, κ̃, partition of unity and basis functions.

use std::path::Path;

use crate::assembly::FineOperators;
use crate::cem::CemVelocityBasis;
use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::lab::config::ExperimentConfig;
use crate::lab::field_file::{Encoding, FieldFile};
use crate::lab::medium::load_medium;
use crate::lab::metrics::velocity_magnitude;
use crate::lab::vtk;
use crate::pou::solve_pou;
use crate::spectral::AuxiliarySpace;

/// Writes the offline fields of the first sweep point of `cfg` and returns
/// the list of files created.
pub fn write_structure_fields(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (nc, j, l) = (cfg.n_coarse[0], cfg.n_basis[0], cfg.layers[0]);
    let g = GridHierarchy::new(cfg.n_fine, nc)?;
    let n = g.n_fine();
    let medium = load_medium(&g, &cfg.medium, cfg.seed)?;
    let pou = solve_pou(&g, &medium, cfg.gradient_sampling)?;
    let mut ops = FineOperators::assemble(&g, &medium)?;
    ops.set_s_weight(&g, &pou.kappa_tilde)?;
    let aux = AuxiliarySpace::build(&g, &ops, j)?;
    let cem = CemVelocityBasis::build(&g, &ops, &aux, l)?;

    let mut written = Vec::new();
    let mut save = |name: String, f: FieldFile| -> Result<()> {
        f.write(&dir.join(&name), Encoding::Ascii)?;
        written.push(name);
        Ok(())
    };
    save(
        "kappa.field".into(),
        FieldFile::new(n, n, "kappa", medium.kappa.clone())?,
    )?;
    save(
        "kappa_tilde.field".into(),
        FieldFile::new(n, n, "kappa-tilde", pou.kappa_tilde.clone())?,
    )?;
    save(
        "chi_sum.field".into(),
        FieldFile::new(n + 1, n + 1, "chi-sum", pou.sum_field())?,
    )?;
    let center = g.interior_node_at(nc / 2, nc / 2).expect("n_coarse ≥ 2");
    save(
        format!("chi_{center}.field"),
        FieldFile::new(n + 1, n + 1, "chi", pou.chi_field(center))?,
    )?;
    let element = g.element_index(nc / 2, nc / 2);
    let mut speeds = Vec::new();
    for col in aux.element_columns(element) {
        let psi = cem.psi_field(col, g.num_edges());
        let speed = velocity_magnitude(&g, &psi);
        save(
            format!("psi_e{element}_j{}.field", col - aux.offsets[element]),
            FieldFile::new(n, n, "velocity-magnitude", speed.clone())?,
        )?;
        let mut p = vec![0.0; g.num_cells()];
        let sp = &aux.spectra[element];
        for (&c, &v) in sp
            .cells
            .iter()
            .zip(&sp.eigenvectors[col - aux.offsets[element]])
        {
            p[c] = v;
        }
        save(
            format!("p_e{element}_j{}.field", col - aux.offsets[element]),
            FieldFile::new(n, n, "pressure", p)?,
        )?;
        speeds.push(speed);
    }
    if cfg.vtk {
        let name = "structures.vtk".to_string();
        let mut fields: Vec<(String, &[f64])> = vec![
            ("kappa".into(), &medium.kappa[..]),
            ("kappa_tilde".into(), &pou.kappa_tilde[..]),
        ];
        for (k, s) in speeds.iter().enumerate() {
            fields.push((format!("psi_{k}"), &s[..]));
        }
        let refs: Vec<(&str, &[f64])> = fields.iter().map(|(a, b)| (a.as_str(), *b)).collect();
        vtk::write_cell_fields(&dir.join(&name), n, "offline fields", &refs)?;
        written.push(name);
    }
    Ok(written)
}
