//! Numerical audits of the a priori estimate machinery on computed fields:
//! second-derivative bound shape, interior and boundary barriers, the
//! double-normal decomposition at the boundary, the diagonal-frame
//! tangential identity and trace ellipticity.

mod barrier;
mod boundary;
mod estimate;
mod stencil;

pub use barrier::{
    boundary_barrier_audit, boundary_barrier_sweep, interior_barrier_audit, BarrierParams, BoundaryContext, BoundaryEntry,
    BoundarySweep, BoundarySweepResult, Face, InteriorAudit, InteriorEntry, Side, DEFAULT_C_CAP, DEFAULT_EPS1_LIST,
    DEFAULT_K_LIST,
};
pub use boundary::{boundary_decomposition_check, decompose, tangential_frame_check, trace_ellipticity_check, Decomposition};
pub use estimate::{auxiliary_probe, d2_stats, AuxiliaryProbe, EstimateAudit};

use crate::model::CoefficientA;

/// Index of the largest value, first one on ties.
pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if !(v > values[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Radius of the covering balls, `1 / (2 n max |D_{p_k} A_ij|)`, with the
/// maximum taken over the supplied samples. `None` when `A` does not depend
/// on `p` at those samples.
pub fn covering_radius(a: &CoefficientA, samples: &[(Vec<f64>, f64, Vec<f64>)]) -> crate::Result<Option<f64>> {
    let mut max = 0.0f64;
    for (x, z, p) in samples {
        let jet = a.jet(x, *z, p, 1)?;
        for m in &jet.dp {
            max = max.max(m.amax());
        }
    }
    let n = samples.first().map_or(0, |s| s.0.len());
    Ok((max > 0.0).then(|| 1.0 / (2.0 * n as f64 * max)))
}

#[cfg(test)]
mod tests;
