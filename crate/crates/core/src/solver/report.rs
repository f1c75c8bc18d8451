use std::io::Write;

use crate::network::{NodeKind, ThermalNetwork};
use crate::num::Real;
use crate::provenance::Provenance;

use super::SolveResult;

/// Net heat flowing from each boundary node into the network, W.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxReport {
    pub inflow: Vec<(String, f64)>,
    pub total_dissipation: f64,
}

impl FluxReport {
    pub fn inflow_from(&self, label: &str) -> Option<f64> {
        self.inflow
            .iter()
            .find(|(l, _)| l == label)
            .map(|&(_, f)| f)
    }

    /// Heat a boundary absorbs from the network, W.
    pub fn absorbed_by(&self, label: &str) -> Option<f64> {
        self.inflow_from(label).map(|f| -f)
    }

    /// `sum of boundary inflows + total dissipation`; zero for an exact
    /// steady state, and equal to the summed residual otherwise.
    pub fn closure(&self) -> f64 {
        self.inflow.iter().map(|(_, f)| f).sum::<f64>() + self.total_dissipation
    }
}

pub fn flux_report<R: Real>(net: &ThermalNetwork<R>, result: &SolveResult<R>) -> FluxReport {
    let inflow = net
        .nodes()
        .iter()
        .zip(&result.flux_balance)
        .filter(|(n, _)| n.is_boundary())
        .map(|(n, f)| (n.label.clone(), -f.to_f64_lossy()))
        .collect();
    FluxReport {
        inflow,
        total_dissipation: net.total_dissipation().to_f64_lossy(),
    }
}

/// Writes `node,label,kind,T_K,flux_W` rows after the provenance header.
pub fn write_solve_csv<R: Real, W: Write>(
    net: &ThermalNetwork<R>,
    result: &SolveResult<R>,
    provenance: &Provenance,
    mut out: W,
) -> std::io::Result<()> {
    provenance.write(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "label", "kind", "T_K", "flux_W"])?;
    for (i, n) in net.nodes().iter().enumerate() {
        let kind = match n.kind {
            NodeKind::Boundary { .. } => "boundary",
            NodeKind::Diffusion { .. } => "diffusion",
        };
        w.write_record([
            i.to_string(),
            n.label.clone(),
            kind.to_string(),
            format!("{:.9}", result.temperatures[i].to_f64_lossy()),
            format!("{:.6e}", result.flux_balance[i].to_f64_lossy()),
        ])?;
    }
    w.flush()
}
