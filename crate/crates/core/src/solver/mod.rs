//! Finite-difference discretization on uniform box grids and the damped
//! Newton solver with admissibility line search and source homotopy.

mod grid;
mod linear;
mod newton;
mod operator;

pub use grid::GridField;
pub use linear::LinearMethod;
pub use newton::{harmonic_extension, solve, solve_traced, DampingRecord, InitMode, SolveOptions, SolveReport, StageRecord};
pub use operator::{assemble_linearized, discrete_jet, residual, DiscreteJet, LinearizedOperator, OperatorVariant};
pub(crate) use operator::{check_grid, node_derivatives};

use crate::error::{Error, Result};
use crate::model::{NodalTable, ProblemSpec, ScalarField, SourceB};
use crate::symfun::{matrix_cone_classify, ConeLabel};

/// Source tabulated as `S_k[W_h(u*)]` at the interior nodes of the grid, so
/// that the grid sample of `u*` solves the discrete problem exactly.
pub fn manufactured_b_discrete(prob: &ProblemSpec, u_star: &ScalarField, m: &[usize]) -> Result<SourceB> {
    let u = GridField::from_scalar(&prob.domain, m, u_star)?;
    let jet = discrete_jet(&u, prob)?;
    let mut values = vec![f64::NAN; u.len()];
    for (i, &node) in jet.nodes.iter().enumerate() {
        let cone = matrix_cone_classify(&jet.w[i], prob.k, 0.0)?;
        if cone.label != ConeLabel::Interior {
            let (j, margin) = cone.worst();
            return Err(Error::InadmissibleAt { x: u.coord(node), j, margin });
        }
        values[node] = cone.margins[prob.k - 1];
    }
    let table = NodalTable { lo: u.lo.clone(), h: u.h(), m: u.m.clone(), values };
    Ok(SourceB::nodal(&format!("discrete_manufactured({})", u_star.id), table))
}

#[cfg(test)]
mod tests;
