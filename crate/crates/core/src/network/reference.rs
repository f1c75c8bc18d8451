//! Thermal network of the reference instrument built on top of the
//! reference scene's radiative couplings.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{nodes, MeshedScene};
use crate::num::Real;
use crate::viewfactor::ViewFactorMatrix;

use super::{
    gr_from_viewfactors, with_mli, Conductor, ConductorKind, MaterialTable, NetworkError,
    NetworkProvenance, Node, NodeId, ThermalNetwork,
};

/// Labels of the nodes the reference network adds to the scene's nodes.
pub mod labels {
    pub const SPACE: &str = "space";
    pub const SC_INTERIOR: &str = "sc_interior";
    pub const CCD: &str = "ccd";
    pub const MIRROR1: &str = "mirror1";
    pub const MIRROR2: &str = "mirror2";
    pub const CHIP: &str = "chip";

    /// Strut `s` where it passes shield `k`.
    pub fn strut_point(s: usize, k: usize) -> String {
        format!("strut{s}_p{k}")
    }

    /// Far end of segment `k` of strut `s`, before its end fitting.
    pub fn segment_end(s: usize, k: usize) -> String {
        format!("strut{s}_seg{k}")
    }
}

/// Conduction along the body of each strut segment, in series with the
/// end-fitting coupling `gl_st_st`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    /// Cross-section, m^2; 0 leaves only the end-fitting couplings.
    pub area: f64,
    pub length: f64,
    /// Built-in material name or path to a CSV table.
    pub material: String,
}

/// Strut couplings, W/K. Each strut runs from the spacecraft interior
/// through one segment per shield gap to the bench; segment joints couple
/// to the shield they pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrutSpec {
    pub gl_st_st: f64,
    pub gl_st_rs: f64,
    pub gl_st_ob: f64,
    pub segment: SegmentSpec,
}

impl Default for StrutSpec {
    fn default() -> Self {
        StrutSpec {
            gl_st_st: 0.05,
            gl_st_rs: 0.05,
            gl_st_ob: 0.05,
            segment: SegmentSpec {
                area: 1e-3,
                length: 0.1,
                material: "gfrp".into(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChipPlacement {
    /// Mounted on the outermost shield (the one nearest the spacecraft).
    BelowOuterShield,
    Bench,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceNetworkParams {
    pub t_sc_exterior: f64,
    pub t_sc_interior: f64,
    pub t_space: f64,
    pub strut: StrutSpec,
    /// Harness cross-section, m^2; 0 removes the harness.
    pub harness_area: f64,
    pub harness_length: f64,
    pub harness_material: String,
    /// Electrical dissipation of the CCD head, W.
    pub ccd_q: f64,
    /// Optical dissipation, W, split evenly over the two cavity mirrors.
    pub optics_q: f64,
    pub chip_q: f64,
    pub chip: ChipPlacement,
    pub ccd_mount_gl: f64,
    pub mirror_mount_gl: f64,
    pub chip_mount_gl: f64,
    /// MLI layers on the spacecraft-facing side of every shield.
    pub mli_layers: u32,
    /// Drops struts, harness and all dissipation.
    pub radiative_only: bool,
}

impl Default for ReferenceNetworkParams {
    fn default() -> Self {
        ReferenceNetworkParams {
            t_sc_exterior: 120.0,
            t_sc_interior: 300.0,
            t_space: 3.0,
            strut: StrutSpec::default(),
            harness_area: 0.1e-6,
            harness_length: 0.5,
            harness_material: "stainless_304".into(),
            ccd_q: 1e-3,
            optics_q: 0.2e-3,
            chip_q: 10e-3,
            chip: ChipPlacement::BelowOuterShield,
            ccd_mount_gl: 0.01,
            mirror_mount_gl: 0.002,
            chip_mount_gl: 0.01,
            mli_layers: 3,
            radiative_only: false,
        }
    }
}

fn material<R: Real>(name: &str) -> Result<Arc<MaterialTable<R>>, NetworkError> {
    let t = if name.ends_with(".csv") {
        MaterialTable::load(std::path::Path::new(name))?
    } else {
        MaterialTable::builtin(name)?
    };
    Ok(Arc::new(t))
}

struct Builder<R: Real> {
    nodes: Vec<Node<R>>,
    conductors: Vec<Conductor<R>>,
}

impl<R: Real> Builder<R> {
    fn add(&mut self, node: Node<R>) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() - 1)
    }

    fn id(&self, label: &str) -> Result<NodeId, NetworkError> {
        self.nodes
            .iter()
            .position(|n| n.label == label)
            .map(NodeId)
            .ok_or_else(|| NetworkError::UnknownNode(label.into()))
    }

    fn direct(&mut self, a: NodeId, b: NodeId, gl: f64) {
        self.conductors.push(Conductor::direct(a, b, R::lit(gl)));
    }
}

/// Assembles the reference network.
///
/// Scene nodes keep their scene order and become diffusion nodes, except the
/// spacecraft exterior which is a boundary. Then come SPACE, the spacecraft
/// interior, the lumped CCD, mirror and chip nodes and the strut chain nodes.
/// The harness runs from the spacecraft interior to the bench node, which is
/// where the CCD head is mounted.
pub fn build_reference_network<R: Real>(
    scene: &MeshedScene,
    f: &ViewFactorMatrix,
    p: &ReferenceNetworkParams,
) -> Result<ThermalNetwork<R>, NetworkError> {
    for (name, v) in [
        ("t_sc_exterior", p.t_sc_exterior),
        ("t_sc_interior", p.t_sc_interior),
        ("t_space", p.t_space),
        ("harness_length", p.harness_length),
        ("ccd_mount_gl", p.ccd_mount_gl),
        ("mirror_mount_gl", p.mirror_mount_gl),
        ("chip_mount_gl", p.chip_mount_gl),
        ("strut.gl_st_st", p.strut.gl_st_st),
        ("strut.gl_st_rs", p.strut.gl_st_rs),
        ("strut.gl_st_ob", p.strut.gl_st_ob),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(NetworkError::File(format!("{name} must be > 0, got {v}")));
        }
    }
    for (name, v) in [
        ("harness_area", p.harness_area),
        ("ccd_q", p.ccd_q),
        ("optics_q", p.optics_q),
        ("chip_q", p.chip_q),
        ("strut.segment.area", p.strut.segment.area),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(NetworkError::File(format!("{name} must be >= 0, got {v}")));
        }
    }

    let names = scene.node_names();
    let n_shields = (1..)
        .take_while(|&k| names.contains(&nodes::shield(k)))
        .count();
    let n_struts = (1..)
        .take_while(|&k| names.contains(&nodes::strut_top(k)))
        .count();
    for required in [nodes::SC_EXTERIOR, nodes::BENCH] {
        if !names.iter().any(|n| n == required) {
            return Err(NetworkError::UnknownNode(required.into()));
        }
    }
    if n_shields == 0 {
        return Err(NetworkError::UnknownNode(nodes::shield(1)));
    }

    let mut b = Builder {
        nodes: Vec::new(),
        conductors: Vec::new(),
    };
    for name in names {
        b.add(if name == nodes::SC_EXTERIOR {
            Node::boundary(name.clone(), R::lit(p.t_sc_exterior))
        } else {
            Node::diffusion(name.clone(), R::zero())
        });
    }
    let node_map: Vec<NodeId> = (0..names.len()).map(NodeId).collect();
    let space = b.add(Node::boundary(labels::SPACE, R::lit(p.t_space)));
    let interior = b.add(Node::boundary(labels::SC_INTERIOR, R::lit(p.t_sc_interior)));

    let q = |x: f64| {
        if p.radiative_only {
            R::zero()
        } else {
            R::lit(x)
        }
    };
    let bench = b.id(nodes::BENCH)?;
    let ccd = b.add(Node::diffusion(labels::CCD, q(p.ccd_q)));
    b.direct(ccd, bench, p.ccd_mount_gl);
    for m in [labels::MIRROR1, labels::MIRROR2] {
        let id = b.add(Node::diffusion(m, q(0.5 * p.optics_q)));
        b.direct(id, bench, p.mirror_mount_gl);
    }
    let host = match p.chip {
        ChipPlacement::BelowOuterShield => b.id(&nodes::shield(1))?,
        ChipPlacement::Bench => bench,
    };
    let chip = b.add(Node::diffusion(labels::CHIP, q(p.chip_q)));
    b.direct(chip, host, p.chip_mount_gl);

    if !p.radiative_only {
        let seg = &p.strut.segment;
        let segment = if seg.area > 0.0 {
            Some((seg, material::<R>(&seg.material)?))
        } else {
            None
        };
        for s in 1..=n_struts {
            let top = b.id(&nodes::strut_top(s))?;
            let mut prev = interior;
            for k in 1..=n_shields + 1 {
                let next = if k <= n_shields {
                    b.add(Node::diffusion(labels::strut_point(s, k), R::zero()))
                } else {
                    top
                };
                let start = match &segment {
                    Some((spec, mat)) => {
                        let end = b.add(Node::diffusion(labels::segment_end(s, k), R::zero()));
                        b.conductors.push(Conductor {
                            a: prev,
                            b: end,
                            kind: ConductorKind::Geometric {
                                area: R::lit(spec.area),
                                length: R::lit(spec.length),
                                material: mat.clone(),
                            },
                        });
                        end
                    }
                    None => prev,
                };
                b.direct(start, next, p.strut.gl_st_st);
                if k <= n_shields {
                    let shield = b.id(&nodes::shield(k))?;
                    b.direct(next, shield, p.strut.gl_st_rs);
                }
                prev = next;
            }
            b.direct(top, bench, p.strut.gl_st_ob);
        }
        if p.harness_area > 0.0 {
            b.conductors.push(Conductor {
                a: interior,
                b: bench,
                kind: ConductorKind::Geometric {
                    area: R::lit(p.harness_area),
                    length: R::lit(p.harness_length),
                    material: material(&p.harness_material)?,
                },
            });
        }
    }

    let optical = with_mli(scene, p.mli_layers, |n| n.starts_with("shield"))?;
    let radiation = gr_from_viewfactors(&optical, f, &node_map, space)?;
    let budget = f.budget();
    Ok(
        ThermalNetwork::new(b.nodes, b.conductors, radiation)?.with_provenance(NetworkProvenance {
            scene_hash: optical.content_hash(),
            seed: budget.seed,
            rays_per_side: budget.rays_per_side,
        }),
    )
}
