//! Exact nearest-triangle queries over a triangle mesh.

use crate::body_model::BodyMesh;
use crate::error::{precondition, Result};
use crate::math::{Aabb, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct BvhNode {
    pub bounds: Aabb,
    /// Child node indices for interior nodes.
    pub children: Option<(usize, usize)>,
    /// Range into [`MeshBvh::triangles`] for leaves.
    pub start: usize,
    pub count: usize,
}

/// Bounding-volume hierarchy over the triangles of one mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshBvh {
    pub nodes: Vec<BvhNode>,
    /// Triangle indices, grouped by leaf.
    pub triangles: Vec<usize>,
}

/// Closest point on a triangle with its barycentric coordinates.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

/// Result of a nearest-surface query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceCorrespondence {
    pub query: Vec3,
    pub triangle: usize,
    pub barycentric: [f64; 3],
    pub closest: Vec3,
    /// Unsigned distance from `query` to `closest`.
    pub distance: f64,
}

impl MeshBvh {
    pub fn build(mesh: &BodyMesh) -> Result<Self> {
        if mesh.faces.is_empty() {
            return Err(precondition("cannot build a BVH over an empty mesh"));
        }
        let boxes: Vec<Aabb> = (0..mesh.faces.len()).map(|f| Aabb::from_points(&mesh.triangle(f))).collect();
        let centroids: Vec<Vec3> = (0..mesh.faces.len())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                (a + b + c) / 3.0
            })
            .collect();
        let mut bvh = MeshBvh {
            nodes: Vec::new(),
            triangles: (0..mesh.faces.len()).collect(),
        };
        bvh.split(0, mesh.faces.len(), &boxes, &centroids);
        Ok(bvh)
    }

    fn split(&mut self, start: usize, end: usize, boxes: &[Aabb], centroids: &[Vec3]) -> usize {
        let idx = self.nodes.len();
        let bounds = self.triangles[start..end].iter().fold(Aabb::empty(), |acc, t| acc.union(&boxes[*t]));
        self.nodes.push(BvhNode {
            bounds,
            children: None,
            start,
            count: end - start,
        });
        if end - start <= LEAF_SIZE {
            return idx;
        }
        let cb = Aabb::from_points(self.triangles[start..end].iter().map(|t| &centroids[*t]));
        let ext = cb.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        self.triangles[start..end].sort_by(|a, b| centroids[*a][axis].total_cmp(&centroids[*b][axis]).then(a.cmp(b)));
        let left = self.split(start, mid, boxes, centroids);
        let right = self.split(mid, end, boxes, centroids);
        let node = &mut self.nodes[idx];
        node.children = Some((left, right));
        node.count = 0;
        idx
    }

    /// Exact nearest point on `mesh`; ties go to the lowest triangle index.
    pub fn nearest(&self, p: &Vec3, mesh: &BodyMesh) -> SurfaceCorrespondence {
        let mut best = (f64::INFINITY, usize::MAX, Vec3::zeros(), [0.0; 3]);
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            // slack keeps boxes whose boundary touches the current best
            // point despite rounding, so ties resolve by index
            if node.bounds.distance_squared(p) > best.0 * (1.0 + 1e-9) {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    let dl = self.nodes[l].bounds.distance_squared(p);
                    let dr = self.nodes[r].bounds.distance_squared(p);
                    // visit the closer child first
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
                None => {
                    for &t in &self.triangles[node.start..node.start + node.count] {
                        let [a, b, c] = mesh.triangle(t);
                        let (q, bary) = closest_point_on_triangle(p, &a, &b, &c);
                        let d2 = (p - q).norm_squared();
                        if d2 < best.0 || (d2 == best.0 && t < best.1) {
                            best = (d2, t, q, bary);
                        }
                    }
                }
            }
        }
        SurfaceCorrespondence {
            query: *p,
            triangle: best.1,
            barycentric: best.3,
            closest: best.2,
            distance: best.0.sqrt(),
        }
    }
}

/// Nearest surface point of `mesh` to `p`.
pub fn nearest_surface(p: &Vec3, mesh: &BodyMesh, bvh: &MeshBvh) -> Result<SurfaceCorrespondence> {
    if mesh.faces.is_empty() {
        return Err(precondition("nearest-surface query on an empty mesh"));
    }
    Ok(bvh.nearest(p, mesh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body_model::synthetic::humanoid_rig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(p: &Vec3, mesh: &BodyMesh) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for t in 0..mesh.faces.len() {
            let [a, b, c] = mesh.triangle(t);
            let (q, _) = closest_point_on_triangle(p, &a, &b, &c);
            let d2 = (p - q).norm_squared();
            if d2 < best.0 {
                best = (d2, t);
            }
        }
        (best.0.sqrt(), best.1)
    }

    #[test]
    fn every_triangle_sits_in_exactly_one_leaf() {
        let mesh = humanoid_rig().template_mesh();
        let bvh = MeshBvh::build(&mesh).unwrap();
        let mut seen = vec![0; mesh.faces.len()];
        for node in bvh.nodes.iter().filter(|n| n.children.is_none()) {
            for t in &bvh.triangles[node.start..node.start + node.count] {
                seen[*t] += 1;
                assert!(node.bounds.contains_box(&Aabb::from_points(&mesh.triangle(*t))));
            }
        }
        assert!(seen.iter().all(|c| *c == 1));
        for node in &bvh.nodes {
            if let Some((l, r)) = node.children {
                assert!(node.bounds.contains_box(&bvh.nodes[l].bounds));
                assert!(node.bounds.contains_box(&bvh.nodes[r].bounds));
            }
        }
    }

    #[test]
    fn matches_exhaustive_scan() {
        let mesh = humanoid_rig().template_mesh();
        let bvh = MeshBvh::build(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5));
            let c = nearest_surface(&p, &mesh, &bvh).unwrap();
            let (d, t) = brute_force(&p, &mesh);
            assert!((c.distance - d).abs() < 1e-9);
            assert_eq!(c.triangle, t);
            let s: f64 = c.barycentric.iter().sum();
            assert!((s - 1.0).abs() < 1e-6 && c.barycentric.iter().all(|b| *b >= 0.0));
        }
    }

    #[test]
    fn vertex_query_has_unit_mass_on_that_vertex() {
        let mesh = humanoid_rig().template_mesh();
        let bvh = MeshBvh::build(&mesh).unwrap();
        for v in (0..mesh.vertices.len()).step_by(37) {
            let c = bvh.nearest(&mesh.vertices[v], &mesh);
            assert_eq!(c.distance, 0.0);
            let k = mesh.faces[c.triangle].iter().position(|i| *i as usize == v).expect("triangle touches the vertex");
            assert_eq!(c.barycentric[k], 1.0);
        }
    }

    #[test]
    fn interior_projection_matches_closed_form() {
        let (a, b, c) = (Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0));
        let (q, bary) = closest_point_on_triangle(&Vec3::new(0.2, 0.3, 0.7), &a, &b, &c);
        assert!((q - Vec3::new(0.2, 0.3, 0.0)).norm() < 1e-15);
        assert!((bary[0] - 0.5).abs() < 1e-15 && (bary[1] - 0.2).abs() < 1e-15 && (bary[2] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn empty_mesh_is_rejected() {
        let mesh = BodyMesh { vertices: vec![], faces: vec![] };
        assert!(MeshBvh::build(&mesh).is_err());
    }
}
