//! Thermal node network: diffusion and boundary nodes joined by conductive
//! (GL, W/K) and radiative (GR, m^2) couplings, with dissipation loads.

mod file;
mod material;
mod radiation;
mod reference;

pub use file::{ConductorSpec, NetworkFile, NodeSpec, RadiationSpec};
pub use material::{MaterialTable, BUILTIN_MATERIALS};
pub use radiation::{gr_from_viewfactors, mli_emissivity, with_mli};
pub use reference::{
    build_reference_network, labels, ChipPlacement, ReferenceNetworkParams, SegmentSpec, StrutSpec,
};

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("material table: {0}")]
    Material(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("duplicate node label {0:?}")]
    DuplicateNode(String),
    #[error("invalid node {label:?}: {why}")]
    InvalidNode { label: String, why: String },
    #[error("invalid coupling between {a:?} and {b:?}: {why}")]
    InvalidCoupling { a: String, b: String, why: String },
    #[error("node {0:?} has no conductive or radiative path to a boundary node")]
    Disconnected(String),
    #[error("series conductance needs at least one positive value")]
    EmptySeries,
    #[error("view factors: {0}")]
    ViewFactors(String),
    #[error("network file: {0}")]
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind<R: Real> {
    /// Free temperature with dissipation `q`, W.
    Diffusion { q: R },
    /// Fixed temperature, K.
    Boundary { t: R },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<R: Real> {
    pub label: String,
    pub kind: NodeKind<R>,
}

impl<R: Real> Node<R> {
    pub fn diffusion(label: impl Into<String>, q: R) -> Self {
        Node {
            label: label.into(),
            kind: NodeKind::Diffusion { q },
        }
    }

    pub fn boundary(label: impl Into<String>, t: R) -> Self {
        Node {
            label: label.into(),
            kind: NodeKind::Boundary { t },
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self.kind, NodeKind::Boundary { .. })
    }

    pub fn dissipation(&self) -> R {
        match self.kind {
            NodeKind::Diffusion { q } => q,
            NodeKind::Boundary { .. } => R::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConductorKind<R: Real> {
    /// Fixed conductance, W/K.
    Direct(R),
    /// Cross-section `area` (m^2) over `length` (m) of a tabulated material.
    Geometric {
        area: R,
        length: R,
        material: Arc<MaterialTable<R>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conductor<R: Real> {
    pub a: NodeId,
    pub b: NodeId,
    pub kind: ConductorKind<R>,
}

impl<R: Real> Conductor<R> {
    pub fn direct(a: NodeId, b: NodeId, gl: R) -> Self {
        Conductor {
            a,
            b,
            kind: ConductorKind::Direct(gl),
        }
    }

    /// Heat flowing into the node at temperature `ti` from the node at `tj`, W.
    ///
    /// Geometric conductors use the conductivity integral,
    /// `(A/d) (K(tj) - K(ti))`, which equals `GL (tj - ti)` with `GL` from
    /// [`gl_from_geometry`].
    #[inline]
    pub fn flow(&self, ti: R, tj: R) -> R {
        match &self.kind {
            ConductorKind::Direct(g) => *g * (tj - ti),
            ConductorKind::Geometric {
                area,
                length,
                material,
            } => *area / *length * (material.integral(tj) - material.integral(ti)),
        }
    }

    /// Derivative of [`Conductor::flow`] with respect to `tj`; the derivative
    /// with respect to `ti` is minus the same expression evaluated at `ti`.
    #[inline]
    pub fn dflow(&self, t: R) -> R {
        match &self.kind {
            ConductorKind::Direct(g) => *g,
            ConductorKind::Geometric {
                area,
                length,
                material,
            } => *area / *length * material.kappa(t),
        }
    }

    /// Effective conductance at the given end temperatures, W/K.
    pub fn gl(&self, ti: R, tj: R) -> R {
        match &self.kind {
            ConductorKind::Direct(g) => *g,
            ConductorKind::Geometric {
                area,
                length,
                material,
            } => *area / *length * material.mean_kappa(ti, tj),
        }
    }

    /// True if either end temperature lies outside the material table.
    pub fn clamped(&self, ti: R, tj: R) -> bool {
        match &self.kind {
            ConductorKind::Direct(_) => false,
            ConductorKind::Geometric { material, .. } => {
                !(material.in_range(ti) && material.in_range(tj))
            }
        }
    }
}

/// `GL = (A/d) * mean conductivity over [ti, tj]`, W/K. Direct conductors
/// return their fixed value. Temperatures outside the material table use the
/// end-of-table conductivity and log a warning.
pub fn gl_from_geometry<R: Real>(c: &Conductor<R>, ti: R, tj: R) -> R {
    if c.clamped(ti, tj) {
        log::warn!(
            "conductor temperature ({ti}, {tj}) outside material table; conductivity clamped"
        );
    }
    c.gl(ti, tj)
}

/// Conductance of resistors in series: `1/GL = sum 1/GL_k`.
pub fn series_gl<R: Real>(gls: &[R]) -> Result<R, NetworkError> {
    if gls.is_empty() || gls.iter().any(|&g| !(g > R::zero())) {
        return Err(NetworkError::EmptySeries);
    }
    let inv: R = gls.iter().map(|&g| R::one() / g).sum();
    Ok(R::one() / inv)
}

/// Radiative coupling `GR`, m^2. Stored once per unordered node pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadExchange<R: Real> {
    pub a: NodeId,
    pub b: NodeId,
    pub gr: R,
}

/// Where the radiative couplings came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NetworkProvenance {
    pub scene_hash: String,
    pub seed: u64,
    pub rays_per_side: u64,
}

/// Validated, immutable thermal network.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalNetwork<R: Real> {
    nodes: Vec<Node<R>>,
    conductors: Vec<Conductor<R>>,
    radiation: Vec<RadExchange<R>>,
    provenance: Option<NetworkProvenance>,
}

impl<R: Real> ThermalNetwork<R> {
    /// Checks labels, node values, coupling references and that every
    /// diffusion node reaches a boundary through non-zero couplings.
    pub fn new(
        nodes: Vec<Node<R>>,
        conductors: Vec<Conductor<R>>,
        radiation: Vec<RadExchange<R>>,
    ) -> Result<Self, NetworkError> {
        let net = ThermalNetwork {
            nodes,
            conductors,
            radiation,
            provenance: None,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn with_provenance(mut self, p: NetworkProvenance) -> Self {
        self.provenance = Some(p);
        self
    }

    fn validate(&self) -> Result<(), NetworkError> {
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            if self.nodes[..i].iter().any(|o| o.label == node.label) {
                return Err(NetworkError::DuplicateNode(node.label.clone()));
            }
            let bad = |why: &str| NetworkError::InvalidNode {
                label: node.label.clone(),
                why: why.into(),
            };
            match node.kind {
                NodeKind::Boundary { t } if !(t > R::zero() && t.is_finite()) => {
                    return Err(bad("boundary temperature must be > 0 K"))
                }
                NodeKind::Diffusion { q } if !(q >= R::zero() && q.is_finite()) => {
                    return Err(bad("dissipation must be >= 0 W"))
                }
                _ => {}
            }
        }
        let label = |id: NodeId| {
            self.nodes
                .get(id.0)
                .map(|n| n.label.clone())
                .unwrap_or_else(|| id.to_string())
        };
        let check_pair = |a: NodeId, b: NodeId, ok: bool, why: &str| {
            if a.0 >= n || b.0 >= n {
                return Err(NetworkError::UnknownNode(label(if a.0 >= n {
                    a
                } else {
                    b
                })));
            }
            if a == b {
                return Err(NetworkError::InvalidCoupling {
                    a: label(a),
                    b: label(b),
                    why: "a coupling needs two distinct nodes".into(),
                });
            }
            if !ok {
                return Err(NetworkError::InvalidCoupling {
                    a: label(a),
                    b: label(b),
                    why: why.into(),
                });
            }
            Ok(())
        };
        for c in &self.conductors {
            let ok = match &c.kind {
                ConductorKind::Direct(g) => *g > R::zero() && g.is_finite(),
                ConductorKind::Geometric { area, length, .. } => {
                    *area > R::zero()
                        && *length > R::zero()
                        && area.is_finite()
                        && length.is_finite()
                }
            };
            check_pair(c.a, c.b, ok, "conductance, area and length must be > 0")?;
        }
        for r in &self.radiation {
            check_pair(
                r.a,
                r.b,
                r.gr >= R::zero() && r.gr.is_finite(),
                "GR must be >= 0",
            )?;
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<(), NetworkError> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        let edges = self.conductors.iter().map(|c| (c.a, c.b)).chain(
            self.radiation
                .iter()
                .filter(|r| r.gr > R::zero())
                .map(|r| (r.a, r.b)),
        );
        for (a, b) in edges {
            adj[a.0].push(b.0);
            adj[b.0].push(a.0);
        }
        let mut seen: Vec<bool> = self.nodes.iter().map(|n| n.is_boundary()).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| seen[i]).collect();
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(NetworkError::Disconnected(self.nodes[i].label.clone())),
            None => Ok(()),
        }
    }

    pub fn nodes(&self) -> &[Node<R>] {
        &self.nodes
    }

    pub fn conductors(&self) -> &[Conductor<R>] {
        &self.conductors
    }

    pub fn radiation(&self) -> &[RadExchange<R>] {
        &self.radiation
    }

    pub fn provenance(&self) -> Option<&NetworkProvenance> {
        self.provenance.as_ref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_id(&self, label: &str) -> Result<NodeId, NetworkError> {
        self.nodes
            .iter()
            .position(|n| n.label == label)
            .map(NodeId)
            .ok_or_else(|| NetworkError::UnknownNode(label.to_string()))
    }

    pub fn node(&self, id: NodeId) -> &Node<R> {
        &self.nodes[id.0]
    }

    /// Total dissipation over all diffusion nodes, W.
    pub fn total_dissipation(&self) -> R {
        self.nodes.iter().map(|n| n.dissipation()).sum()
    }

    /// GR between two nodes, summed over stored entries.
    pub fn gr_between(&self, a: NodeId, b: NodeId) -> R {
        self.radiation
            .iter()
            .filter(|r| (r.a == a && r.b == b) || (r.a == b && r.b == a))
            .map(|r| r.gr)
            .sum()
    }

    /// Copy with the dissipation of a diffusion node replaced.
    pub fn with_dissipation(&self, label: &str, q: R) -> Result<Self, NetworkError> {
        let id = self.node_id(label)?;
        let mut out = self.clone();
        match &mut out.nodes[id.0].kind {
            NodeKind::Diffusion { q: old } => *old = q,
            NodeKind::Boundary { .. } => {
                return Err(NetworkError::InvalidNode {
                    label: label.into(),
                    why: "boundary nodes carry no dissipation".into(),
                })
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Copy with every dissipation set to zero.
    pub fn without_dissipation(&self) -> Self {
        let mut out = self.clone();
        for n in &mut out.nodes {
            if let NodeKind::Diffusion { q } = &mut n.kind {
                *q = R::zero();
            }
        }
        out
    }

    /// Copy with a boundary node's temperature replaced.
    pub fn with_boundary(&self, label: &str, t: R) -> Result<Self, NetworkError> {
        let id = self.node_id(label)?;
        let mut out = self.clone();
        match &mut out.nodes[id.0].kind {
            NodeKind::Boundary { t: old } => *old = t,
            NodeKind::Diffusion { .. } => {
                return Err(NetworkError::InvalidNode {
                    label: label.into(),
                    why: "not a boundary node".into(),
                })
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Copy without any radiative coupling to `label`.
    pub fn without_radiation_to(&self, label: &str) -> Result<Self, NetworkError> {
        let id = self.node_id(label)?;
        let mut out = self.clone();
        out.radiation.retain(|r| r.a != id && r.b != id);
        out.validate()?;
        Ok(out)
    }

    /// Converts every value to another scalar type.
    pub fn cast<S: Real>(&self) -> ThermalNetwork<S> {
        let c = |x: R| S::lit(x.to_f64_lossy());
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node {
                label: n.label.clone(),
                kind: match n.kind {
                    NodeKind::Diffusion { q } => NodeKind::Diffusion { q: c(q) },
                    NodeKind::Boundary { t } => NodeKind::Boundary { t: c(t) },
                },
            })
            .collect();
        let conductors = self
            .conductors
            .iter()
            .map(|k| Conductor {
                a: k.a,
                b: k.b,
                kind: match &k.kind {
                    ConductorKind::Direct(g) => ConductorKind::Direct(c(*g)),
                    ConductorKind::Geometric {
                        area,
                        length,
                        material,
                    } => ConductorKind::Geometric {
                        area: c(*area),
                        length: c(*length),
                        material: Arc::new(material.cast()),
                    },
                },
            })
            .collect();
        let radiation = self
            .radiation
            .iter()
            .map(|r| RadExchange {
                a: r.a,
                b: r.b,
                gr: c(r.gr),
            })
            .collect();
        ThermalNetwork {
            nodes,
            conductors,
            radiation,
            provenance: self.provenance.clone(),
        }
    }
}
