use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Optical properties of one side of a facet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideProperties {
    pub emissivity: f64,
}

impl SideProperties {
    pub fn new(emissivity: f64) -> Result<Self, GeometryError> {
        let s = SideProperties { emissivity };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if (0.0..=1.0).contains(&self.emissivity) {
            Ok(())
        } else {
            Err(GeometryError::InvalidEmissivity(self.emissivity))
        }
    }
}

/// Which face of a facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Front,
    Back,
}

/// Planar polygon with three or four vertices, ordered counter-clockwise
/// when seen from the front side.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: Vec<Vec3>,
    pub area: f64,
    /// Unit normal pointing out of the front side.
    pub normal: Vec3,
    pub front: SideProperties,
    pub back: SideProperties,
    /// Index into the owning scene's node table.
    pub node: usize,
}

const COPLANAR_TOL: f64 = 1e-9;

impl Facet {
    /// Builds a facet from a polygon, reversing the winding if needed so the
    /// normal agrees with `front_hint`.
    pub fn from_polygon(
        mut vertices: Vec<Vec3>,
        front_hint: Vec3,
        front: SideProperties,
        back: SideProperties,
    ) -> Result<Facet, GeometryError> {
        if !(3..=4).contains(&vertices.len()) {
            return Err(GeometryError::Degenerate(format!(
                "facet with {} vertices",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::Degenerate("non-finite vertex".into()));
        }
        let mut newell = newell(&vertices);
        if newell.dot(front_hint) < 0.0 {
            vertices.reverse();
            newell = -newell;
        }
        let area = 0.5 * newell.norm();
        let normal = newell
            .normalized()
            .ok_or_else(|| GeometryError::Degenerate("zero-area facet".into()))?;
        if area <= 0.0 {
            return Err(GeometryError::Degenerate("zero-area facet".into()));
        }
        let c = centroid(&vertices);
        for v in &vertices {
            if (*v - c).dot(normal).abs() > COPLANAR_TOL {
                return Err(GeometryError::NonCoplanar);
            }
        }
        front.validate()?;
        back.validate()?;
        Ok(Facet {
            vertices,
            area,
            normal,
            front,
            back,
            node: 0,
        })
    }

    pub fn side(&self, side: Side) -> &SideProperties {
        match side {
            Side::Front => &self.front,
            Side::Back => &self.back,
        }
    }

    pub fn centroid(&self) -> Vec3 {
        centroid(&self.vertices)
    }

    /// Fan triangulation from the first vertex.
    pub fn triangles(&self) -> impl Iterator<Item = [Vec3; 3]> + '_ {
        let v = &self.vertices;
        (1..v.len() - 1).map(move |i| [v[0], v[i], v[i + 1]])
    }
}

fn newell(v: &[Vec3]) -> Vec3 {
    let mut n = Vec3::ZERO;
    for i in 0..v.len() {
        let a = v[i];
        let b = v[(i + 1) % v.len()];
        n += Vec3::new(
            (a.y - b.y) * (a.z + b.z),
            (a.z - b.z) * (a.x + b.x),
            (a.x - b.x) * (a.y + b.y),
        );
    }
    n
}

fn centroid(v: &[Vec3]) -> Vec3 {
    let mut c = Vec3::ZERO;
    for p in v {
        c += *p;
    }
    c / v.len() as f64
}

/// Analytic surface shapes the scene is assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Front side faces along `normal`.
    Disk {
        center: Vec3,
        radius: f64,
        normal: Vec3,
    },
    /// Lateral surface of a cone frustum. The lower ring sits at `origin`,
    /// the upper ring at `origin + height * axis`. Front side faces away
    /// from the axis. `height = 0` gives a flat annulus.
    ConeFrustum {
        origin: Vec3,
        axis: Vec3,
        r_lower: f64,
        r_upper: f64,
        height: f64,
    },
    /// Front side faces along `edge1 x edge2`.
    Rectangle {
        corner: Vec3,
        edge1: Vec3,
        edge2: Vec3,
    },
    /// Closed parallelepiped; front sides face outward.
    Box { corner: Vec3, edges: [Vec3; 3] },
    /// Closed sphere; front sides face outward.
    SphereProbe { center: Vec3, radius: f64 },
}

impl Shape {
    /// Exact area of the analytic surface.
    pub fn analytic_area(&self) -> f64 {
        match *self {
            Shape::Disk { radius, .. } => PI * radius * radius,
            Shape::ConeFrustum {
                r_lower,
                r_upper,
                height,
                ..
            } => PI * (r_lower + r_upper) * height.hypot(r_upper - r_lower),
            Shape::Rectangle { edge1, edge2, .. } => edge1.cross(edge2).norm(),
            Shape::Box {
                edges: [a, b, c], ..
            } => 2.0 * (a.cross(b).norm() + b.cross(c).norm() + c.cross(a).norm()),
            Shape::SphereProbe { radius, .. } => 4.0 * PI * radius * radius,
        }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let bad = |s: &str| Err(GeometryError::Degenerate(s.to_string()));
        match *self {
            Shape::Disk {
                center,
                radius,
                normal,
            } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return bad("disk radius must be positive");
                }
                if !center.is_finite() || normal.normalized().is_none() {
                    return bad("disk center/normal invalid");
                }
            }
            Shape::ConeFrustum {
                origin,
                axis,
                r_lower,
                r_upper,
                height,
            } => {
                if !(r_lower > 0.0 && r_upper > 0.0 && r_lower.is_finite() && r_upper.is_finite()) {
                    return bad("frustum radii must be positive");
                }
                if !(height >= 0.0 && height.is_finite()) {
                    return bad("frustum height must be non-negative");
                }
                if height == 0.0 && r_lower == r_upper {
                    return bad("frustum has zero slant");
                }
                if !origin.is_finite() || axis.normalized().is_none() {
                    return bad("frustum origin/axis invalid");
                }
            }
            Shape::Rectangle {
                corner,
                edge1,
                edge2,
            } => {
                if !corner.is_finite() || !(edge1.cross(edge2).norm() > 0.0) {
                    return bad("rectangle edges degenerate");
                }
                if edge1.dot(edge2).abs() > 1e-12 * edge1.norm() * edge2.norm() {
                    return bad("rectangle edges not orthogonal");
                }
            }
            Shape::Box {
                corner,
                edges: [a, b, c],
            } => {
                if !corner.is_finite() || !(a.cross(b).dot(c).abs() > 0.0) {
                    return bad("box edges degenerate");
                }
            }
            Shape::SphereProbe { center, radius } => {
                if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
                    return bad("sphere radius must be positive");
                }
            }
        }
        Ok(())
    }
}

/// Segment counts along the two parametric directions of a shape.
///
/// Disk: azimuthal x radial. Frustum: azimuthal x axial. Rectangle and box
/// faces: along first edge x along second edge. Sphere: azimuthal x polar.
/// Azimuthal counts below 3 (and polar counts below 2) are raised to that
/// minimum, since fewer segments cannot bound a polygon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshDensity(pub usize, pub usize);

impl MeshDensity {
    pub const DEFAULT_REVOLVED: MeshDensity = MeshDensity(24, 4);
    pub const DEFAULT_FLAT: MeshDensity = MeshDensity(4, 4);
}

/// Marks part of a primitive's front side with different optical properties.
/// The `fraction` of facets (by count, rounded) whose centroids lie closest
/// to `center` receive `coated`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoatingPatch {
    pub fraction: f64,
    pub center: Vec3,
    pub coated: SideProperties,
}

/// One analytic shape with its optical properties, mesh density and the
/// thermal node it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePrimitive {
    pub shape: Shape,
    pub front: SideProperties,
    pub back: SideProperties,
    pub mesh: MeshDensity,
    pub node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coating: Option<CoatingPatch>,
    /// Free-form label used to find primitives again (e.g. `"bench_top"`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl SurfacePrimitive {
    pub fn new(shape: Shape, front: SideProperties, back: SideProperties, node: &str) -> Self {
        let mesh = match shape {
            Shape::Disk { .. } | Shape::ConeFrustum { .. } => MeshDensity::DEFAULT_REVOLVED,
            Shape::SphereProbe { .. } => MeshDensity(12, 6),
            _ => MeshDensity::DEFAULT_FLAT,
        };
        SurfacePrimitive {
            shape,
            front,
            back,
            mesh,
            node: node.to_string(),
            coating: None,
            tag: None,
        }
    }

    pub fn with_mesh(mut self, mesh: MeshDensity) -> Self {
        self.mesh = mesh;
        self
    }

    pub fn with_tag(mut self, tag: &str) -> Self {
        self.tag = Some(tag.to_string());
        self
    }

    pub fn with_coating(mut self, coating: CoatingPatch) -> Self {
        self.coating = Some(coating);
        self
    }
}

/// Meshes a primitive into planar facets. Facet `node` indices are left at
/// zero; [`super::MeshedScene`] assigns them.
///
/// Revolved shapes and spheres are meshed area-preserving: ring radii are
/// scaled so the polygonal surface has the analytic area.
pub fn mesh_primitive(p: &SurfacePrimitive) -> Result<Vec<Facet>, GeometryError> {
    p.shape.validate()?;
    p.front.validate()?;
    p.back.validate()?;
    if p.mesh.0 == 0 || p.mesh.1 == 0 {
        return Err(GeometryError::Degenerate("mesh counts must be >= 1".into()));
    }
    let (f, b) = (p.front, p.back);
    let mut facets = match p.shape {
        Shape::Disk {
            center,
            radius,
            normal,
        } => {
            let n = normal.normalized().unwrap();
            revolve(center, n, 0.0, radius, 0.0, p.mesh, f, b, Hint::Fixed(n))?
        }
        Shape::ConeFrustum {
            origin,
            axis,
            r_lower,
            r_upper,
            height,
        } => {
            let a = axis.normalized().unwrap();
            revolve(
                origin,
                a,
                r_lower,
                r_upper,
                height,
                p.mesh,
                f,
                b,
                Hint::Outward,
            )?
        }
        Shape::Rectangle {
            corner,
            edge1,
            edge2,
        } => grid(corner, edge1, edge2, p.mesh, edge1.cross(edge2), f, b)?,
        Shape::Box {
            corner,
            edges: [a, b_, c],
        } => {
            let centre = corner + 0.5 * (a + b_ + c);
            let mut out = Vec::new();
            for (o, e1, e2) in [
                (corner, a, b_),
                (corner + c, a, b_),
                (corner, b_, c),
                (corner + a, b_, c),
                (corner, c, a),
                (corner + b_, c, a),
            ] {
                let face_centre = o + 0.5 * (e1 + e2);
                out.extend(grid(o, e1, e2, p.mesh, face_centre - centre, f, b)?);
            }
            out
        }
        Shape::SphereProbe { center, radius } => sphere(center, radius, p.mesh, f, b)?,
    };
    if let Some(c) = &p.coating {
        apply_coating(&mut facets, c)?;
    }
    Ok(facets)
}

fn apply_coating(facets: &mut [Facet], c: &CoatingPatch) -> Result<(), GeometryError> {
    if !(0.0..=1.0).contains(&c.fraction) {
        return Err(GeometryError::InvalidCoatingFraction(c.fraction));
    }
    c.coated.validate()?;
    let mut order: Vec<usize> = (0..facets.len()).collect();
    let dist: Vec<f64> = facets
        .iter()
        .map(|f| (f.centroid() - c.center).norm())
        .collect();
    // Stable sort: equidistant facets keep mesh order.
    order.sort_by(|&i, &j| dist[i].total_cmp(&dist[j]));
    let count = (c.fraction * facets.len() as f64).round() as usize;
    for &i in order.iter().take(count) {
        facets[i].front = c.coated;
    }
    Ok(())
}

enum Hint {
    Fixed(Vec3),
    Outward,
}

/// Surface of revolution between radii `r0` (at the origin) and `r1` (at
/// `height` along the axis).
#[allow(clippy::too_many_arguments)]
fn revolve(
    origin: Vec3,
    axis: Vec3,
    r0: f64,
    r1: f64,
    height: f64,
    mesh: MeshDensity,
    front: SideProperties,
    back: SideProperties,
    hint: Hint,
) -> Result<Vec<Facet>, GeometryError> {
    let nu = mesh.0.max(3);
    let nv = mesh.1;
    let scale = area_preserving_scale(nu, r0, r1, height);
    let (u, v) = axis.orthonormal_basis();
    let point = |k: usize, j: usize| {
        let t = k as f64 / nv as f64;
        let rho = scale * (r0 + (r1 - r0) * t);
        let th = 2.0 * PI * (j % nu) as f64 / nu as f64;
        origin + axis * (height * t) + (u * th.cos() + v * th.sin()) * rho
    };
    let mut out = Vec::with_capacity(nu * nv);
    for k in 0..nv {
        for j in 0..nu {
            let mid = 2.0 * PI * (j as f64 + 0.5) / nu as f64;
            let radial = u * mid.cos() + v * mid.sin();
            let h = match hint {
                Hint::Fixed(n) => n,
                Hint::Outward => radial * height - axis * (r1 - r0),
            };
            let verts = if k == 0 && r0 == 0.0 {
                vec![point(0, 0), point(1, j), point(1, j + 1)]
            } else {
                vec![
                    point(k, j),
                    point(k, j + 1),
                    point(k + 1, j + 1),
                    point(k + 1, j),
                ]
            };
            out.push(Facet::from_polygon(verts, h, front, back)?);
        }
    }
    Ok(out)
}

/// Radial scale making an `nu`-gon frustum match the circular frustum's area.
fn area_preserving_scale(nu: usize, r0: f64, r1: f64, height: f64) -> f64 {
    let target = PI * (r0 + r1) * height.hypot(r1 - r0);
    let (s_half, c_half) = (PI / nu as f64).sin_cos();
    let area = |s: f64| nu as f64 * s_half * s * (r0 + r1) * height.hypot(s * c_half * (r1 - r0));
    let (mut lo, mut hi) = (1.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if area(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn grid(
    corner: Vec3,
    e1: Vec3,
    e2: Vec3,
    mesh: MeshDensity,
    hint: Vec3,
    front: SideProperties,
    back: SideProperties,
) -> Result<Vec<Facet>, GeometryError> {
    let (nu, nv) = (mesh.0, mesh.1);
    let p = |i: usize, j: usize| corner + e1 * (i as f64 / nu as f64) + e2 * (j as f64 / nv as f64);
    let mut out = Vec::with_capacity(nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            let verts = vec![p(i, j), p(i + 1, j), p(i + 1, j + 1), p(i, j + 1)];
            out.push(Facet::from_polygon(verts, hint, front, back)?);
        }
    }
    Ok(out)
}

fn sphere(
    center: Vec3,
    radius: f64,
    mesh: MeshDensity,
    front: SideProperties,
    back: SideProperties,
) -> Result<Vec<Facet>, GeometryError> {
    let nu = mesh.0.max(3);
    let nv = mesh.1.max(2);
    let unit = |k: usize, j: usize| {
        let th = PI * k as f64 / nv as f64;
        let ph = 2.0 * PI * (j % nu) as f64 / nu as f64;
        Vec3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos())
    };
    let mut polys = Vec::with_capacity(nu * nv);
    for k in 0..nv {
        for j in 0..nu {
            let poly = if k == 0 {
                vec![unit(0, 0), unit(1, j), unit(1, j + 1)]
            } else if k == nv - 1 {
                vec![unit(k, j), unit(k, j + 1), unit(nv, 0)]
            } else {
                vec![
                    unit(k, j),
                    unit(k, j + 1),
                    unit(k + 1, j + 1),
                    unit(k + 1, j),
                ]
            };
            polys.push(poly);
        }
    }
    // Area of the unit polyhedron fixes the radius that matches 4 pi r^2.
    let unit_area: f64 = polys.iter().map(|p| 0.5 * newell(p).norm()).sum();
    let r = radius * (4.0 * PI / unit_area).sqrt();
    polys
        .into_iter()
        .map(|p| {
            let c = centroid(&p);
            let verts = p.into_iter().map(|q| center + q * r).collect();
            Facet::from_polygon(verts, c, front, back)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn black() -> SideProperties {
        SideProperties::new(1.0).unwrap()
    }

    fn prim(shape: Shape, mesh: MeshDensity) -> SurfacePrimitive {
        SurfacePrimitive::new(shape, black(), black(), "n").with_mesh(mesh)
    }

    fn total_area(f: &[Facet]) -> f64 {
        f.iter().map(|f| f.area).sum()
    }

    #[test]
    fn single_segment_disk_keeps_area() {
        let d = Shape::Disk {
            center: Vec3::ZERO,
            radius: 0.7,
            normal: Vec3::Z,
        };
        let f = mesh_primitive(&prim(d, MeshDensity(1, 1))).unwrap();
        assert!((total_area(&f) - PI * 0.49).abs() < 1e-9);
        assert!(f.iter().all(|f| f.normal.dot(Vec3::Z) > 0.999_999));
    }

    #[test]
    fn rectangle_subdivides_uniformly() {
        let r = Shape::Rectangle {
            corner: Vec3::ZERO,
            edge1: Vec3::new(0.2, 0.0, 0.0),
            edge2: Vec3::new(0.0, 0.2, 0.0),
        };
        let f = mesh_primitive(&prim(r, MeshDensity(4, 4))).unwrap();
        assert_eq!(f.len(), 16);
        for facet in &f {
            assert!((facet.area - 0.0025).abs() < 1e-15);
            assert!((facet.normal.z - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn frustum_area_matches_closed_form() {
        let h = 0.2 * 20f64.to_radians().tan();
        let s = Shape::ConeFrustum {
            origin: Vec3::ZERO,
            axis: Vec3::Z,
            r_lower: 0.7,
            r_upper: 0.9,
            height: h,
        };
        let oracle = PI * (0.7 + 0.9) * (h * h + 0.04f64).sqrt();
        let f = mesh_primitive(&prim(s.clone(), MeshDensity::DEFAULT_REVOLVED)).unwrap();
        assert!((total_area(&f) / oracle - 1.0).abs() < 5e-3);
        // Outward side faces away from the axis and down for an upward-opening cone.
        for facet in &f {
            let c = facet.centroid();
            let radial = Vec3::new(c.x, c.y, 0.0);
            assert!(facet.normal.dot(radial) > 0.0);
            assert!(facet.normal.z < 0.0);
        }
    }

    #[test]
    fn flat_annulus_is_accepted() {
        let s = Shape::ConeFrustum {
            origin: Vec3::ZERO,
            axis: Vec3::Z,
            r_lower: 0.15,
            r_upper: 0.7,
            height: 0.0,
        };
        let f = mesh_primitive(&prim(s.clone(), MeshDensity(24, 4))).unwrap();
        assert!((total_area(&f) / s.analytic_area() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_and_box_areas() {
        let s = Shape::SphereProbe {
            center: Vec3::new(1.0, 2.0, 3.0),
            radius: 0.02,
        };
        let f = mesh_primitive(&prim(s.clone(), MeshDensity(12, 6))).unwrap();
        assert!((total_area(&f) / s.analytic_area() - 1.0).abs() < 1e-9);
        for facet in &f {
            assert!(
                facet
                    .normal
                    .dot(facet.centroid() - Vec3::new(1.0, 2.0, 3.0))
                    > 0.0
            );
        }
        let b = Shape::Box {
            corner: Vec3::ZERO,
            edges: [
                Vec3::new(0.2, 0.0, 0.0),
                Vec3::new(0.0, 0.2, 0.0),
                Vec3::new(0.0, 0.0, 0.02),
            ],
        };
        let f = mesh_primitive(&prim(b.clone(), MeshDensity(4, 4))).unwrap();
        assert_eq!(f.len(), 96);
        assert!((total_area(&f) - b.analytic_area()).abs() < 1e-12);
        let centre = Vec3::new(0.1, 0.1, 0.01);
        assert!(f.iter().all(|x| x.normal.dot(x.centroid() - centre) > 0.0));
    }

    #[test]
    fn area_converges_with_density() {
        let s = Shape::ConeFrustum {
            origin: Vec3::ZERO,
            axis: Vec3::Z,
            r_lower: 0.15,
            r_upper: 0.7,
            height: 0.3,
        };
        for n in [3, 6, 24, 96] {
            let f = mesh_primitive(&prim(s.clone(), MeshDensity(n, 2))).unwrap();
            assert!(
                (total_area(&f) / s.analytic_area() - 1.0).abs() < 1e-6,
                "n={n}"
            );
        }
    }

    #[test]
    fn degenerate_shapes_are_rejected() {
        let d = Shape::Disk {
            center: Vec3::ZERO,
            radius: 0.0,
            normal: Vec3::Z,
        };
        assert!(matches!(
            mesh_primitive(&prim(d, MeshDensity(4, 1))),
            Err(GeometryError::Degenerate(_))
        ));
        let r = Shape::Rectangle {
            corner: Vec3::ZERO,
            edge1: Vec3::ZERO,
            edge2: Vec3::Y,
        };
        assert!(mesh_primitive(&prim(r, MeshDensity(1, 1))).is_err());
        assert!(SideProperties::new(1.2).is_err());
    }

    #[test]
    fn coating_selects_central_facets() {
        let r = Shape::Rectangle {
            corner: Vec3::new(-0.1, -0.1, 0.0),
            edge1: Vec3::new(0.2, 0.0, 0.0),
            edge2: Vec3::new(0.0, 0.2, 0.0),
        };
        let gold = SideProperties::new(0.04).unwrap();
        let p = prim(r, MeshDensity(4, 4)).with_coating(CoatingPatch {
            fraction: 0.25,
            center: Vec3::ZERO,
            coated: gold,
        });
        let f = mesh_primitive(&p).unwrap();
        let coated: Vec<_> = f.iter().filter(|x| x.front == gold).collect();
        assert_eq!(coated.len(), 4);
        assert!(coated.iter().all(|x| x.centroid().norm() < 0.04));
    }
}
