//! Capsule and box primitives, configuration and motion-segment collision checks.

use serde::{Deserialize, Serialize};

use crate::arm_models::{capsules_from_origins, fk_unchecked, JointConfig, RobotGeometry, DOF};
use crate::error::Result;
use crate::Vec3;

/// Default joint-space resolution (max-norm, rad) for edge checks.
pub const DEFAULT_EDGE_STEP: f64 = 0.05;

const PARALLEL_EPS: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub p0: Vec3,
    pub p1: Vec3,
    pub radius: f64,
}

impl Capsule {
    fn bounding_sphere(&self) -> (Vec3, f64) {
        let c = (self.p0 + self.p1) * 0.5;
        (c, (self.p1 - self.p0).norm() * 0.5 + self.radius)
    }
}

/// Axis-aligned box obstacle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min_corner: Vec3,
    pub max_corner: Vec3,
}

impl Aabb {
    pub fn new(min_corner: Vec3, max_corner: Vec3) -> Self {
        debug_assert!((0..3).all(|i| min_corner[i] <= max_corner[i]));
        Self {
            min_corner,
            max_corner,
        }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min_corner[i] <= self.max_corner[i])
    }

    pub fn center(&self) -> Vec3 {
        (self.min_corner + self.max_corner) * 0.5
    }

    pub fn half_extents(&self) -> Vec3 {
        (self.max_corner - self.min_corner) * 0.5
    }

    pub fn point_distance(&self, p: &Vec3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min_corner[i] {
                self.min_corner[i] - p[i]
            } else if p[i] > self.max_corner[i] {
                p[i] - self.max_corner[i]
            } else {
                0.0
            };
            s += v * v;
        }
        s.sqrt()
    }
}

pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 <= PARALLEL_EPS {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&d) / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

/// Exact minimum distance between the closed segments `a0-a1` and `b0-b1`.
pub fn segment_segment_distance(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> f64 {
    let d1 = a1 - a0;
    let d2 = b1 - b0;
    let r = a0 - b0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);

    let (s, t);
    if a <= PARALLEL_EPS && e <= PARALLEL_EPS {
        return r.norm();
    }
    if a <= PARALLEL_EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= PARALLEL_EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > PARALLEL_EPS * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = a0 + d1 * s;
    let c2 = b0 + d2 * t;
    (c1 - c2).norm()
}

/// Strict overlap test; tangent capsules do not collide.
pub fn capsules_collide(a: &Capsule, b: &Capsule) -> bool {
    let reach = a.radius + b.radius;
    let (ca, ra) = a.bounding_sphere();
    let (cb, rb) = b.bounding_sphere();
    if (ca - cb).norm() >= ra + rb {
        return false;
    }
    segment_segment_distance(&a.p0, &a.p1, &b.p0, &b.p1) < reach
}

/// Minimum distance from the segment `p0-p1` to the box.
///
/// The squared distance along the segment is a convex piecewise quadratic
/// whose breakpoints are the slab crossings; each piece is minimized in
/// closed form.
pub fn segment_box_distance(p0: &Vec3, p1: &Vec3, b: &Aabb) -> f64 {
    let d = p1 - p0;
    let mut breaks = [0.0f64; 8];
    let mut n = 0;
    breaks[n] = 0.0;
    n += 1;
    for i in 0..3 {
        if d[i].abs() > PARALLEL_EPS {
            for bound in [b.min_corner[i], b.max_corner[i]] {
                let t = (bound - p0[i]) / d[i];
                if t > 0.0 && t < 1.0 {
                    breaks[n] = t;
                    n += 1;
                }
            }
        }
    }
    breaks[n] = 1.0;
    n += 1;
    let breaks = &mut breaks[..n];
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mut best = f64::INFINITY;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        // g(t) = qa t^2 + qb t + qc on this piece
        let (mut qa, mut qb, mut qc) = (0.0, 0.0, 0.0);
        for i in 0..3 {
            let x = p0[i] + d[i] * mid;
            let off = if x < b.min_corner[i] {
                p0[i] - b.min_corner[i]
            } else if x > b.max_corner[i] {
                p0[i] - b.max_corner[i]
            } else {
                continue;
            };
            qa += d[i] * d[i];
            qb += 2.0 * d[i] * off;
            qc += off * off;
        }
        let eval = |t: f64| (qa * t + qb) * t + qc;
        let mut m = eval(lo).min(eval(hi));
        if qa > 0.0 {
            let t = -qb / (2.0 * qa);
            if t > lo && t < hi {
                m = m.min(eval(t));
            }
        }
        best = best.min(m);
    }
    best.max(0.0).sqrt()
}

pub fn capsule_box_collide(c: &Capsule, b: &Aabb) -> bool {
    let (center, r) = c.bounding_sphere();
    if b.point_distance(&center) >= r {
        return false;
    }
    segment_box_distance(&c.p0, &c.p1, b) < c.radius
}

/// Non-adjacent link pairs of the default arm.
pub fn default_self_collision_pairs() -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    for i in 0..DOF {
        for j in i + 2..DOF {
            out.push([i, j]);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub robot: RobotGeometry,
    #[serde(default)]
    pub static_boxes: Vec<Aabb>,
    #[serde(default)]
    pub human_capsules: Vec<Capsule>,
    #[serde(default = "default_self_collision_pairs")]
    pub self_collision_pairs: Vec<[usize; 2]>,
}

impl Scene {
    pub fn new(robot: RobotGeometry) -> Self {
        Self {
            robot,
            static_boxes: Vec::new(),
            human_capsules: Vec::new(),
            self_collision_pairs: default_self_collision_pairs(),
        }
    }

    pub fn with_boxes(mut self, boxes: Vec<Aabb>) -> Self {
        self.static_boxes = boxes;
        self
    }

    pub fn with_human(mut self, capsules: Vec<Capsule>) -> Self {
        self.human_capsules = capsules;
        self
    }

    /// Same scene with the human capsules removed.
    pub fn without_human(&self) -> Self {
        Self {
            robot: self.robot.clone(),
            static_boxes: self.static_boxes.clone(),
            human_capsules: Vec::new(),
            self_collision_pairs: self.self_collision_pairs.clone(),
        }
    }

    fn links_in_collision(&self, links: &[Capsule; DOF]) -> bool {
        for link in links {
            if self.static_boxes.iter().any(|b| capsule_box_collide(link, b)) {
                return true;
            }
            if self.human_capsules.iter().any(|h| capsules_collide(link, h)) {
                return true;
            }
        }
        self.self_collision_pairs
            .iter()
            .any(|&[i, j]| capsules_collide(&links[i], &links[j]))
    }

    /// Smallest gap between a link and a box or human capsule, or half the gap
    /// between a self-collision pair (both links move). Negative on overlap.
    pub fn clearance(&self, links: &[Capsule; DOF]) -> f64 {
        self.clearance_capped(links, f64::INFINITY)
    }

    /// `min(clearance, cap)`; obstacles whose bounding spheres are already
    /// farther than the running minimum are skipped.
    pub fn clearance_capped(&self, links: &[Capsule; DOF], cap: f64) -> f64 {
        let spheres = links.map(|l| l.bounding_sphere());
        let mut c = cap;
        for (link, (lc, lr)) in links.iter().zip(&spheres) {
            for b in &self.static_boxes {
                if b.point_distance(lc) - lr < c {
                    c = c.min(segment_box_distance(&link.p0, &link.p1, b) - link.radius);
                }
            }
            for h in &self.human_capsules {
                let (hc, hr) = h.bounding_sphere();
                if (lc - hc).norm() - lr - hr < c {
                    c = c.min(segment_segment_distance(&link.p0, &link.p1, &h.p0, &h.p1) - link.radius - h.radius);
                }
            }
        }
        for &[i, j] in &self.self_collision_pairs {
            let (a, b) = (&links[i], &links[j]);
            let ((ca, ra), (cb, rb)) = (spheres[i], spheres[j]);
            if 0.5 * ((ca - cb).norm() - ra - rb) < c {
                c = c.min(0.5 * (segment_segment_distance(&a.p0, &a.p1, &b.p0, &b.p1) - a.radius - b.radius));
            }
        }
        c
    }

    /// Link capsules for a configuration already known to be within limits.
    pub(crate) fn links_unchecked(&self, config: &JointConfig) -> [Capsule; DOF] {
        capsules_from_origins(&fk_unchecked(config, &self.robot), &self.robot)
    }

    pub(crate) fn config_in_collision_unchecked(&self, config: &JointConfig) -> bool {
        self.links_in_collision(&self.links_unchecked(config))
    }
}

/// True iff any link touches a box, a human capsule, or a declared self-collision partner.
pub fn config_in_collision(config: &JointConfig, scene: &Scene) -> Result<bool> {
    scene.robot.check_limits(config)?;
    Ok(scene.config_in_collision_unchecked(config))
}

/// Number of interpolation intervals: the smallest power of two with
/// spacing at most `step`, so halving the step nests the sample set.
pub fn edge_subdivisions(a: &JointConfig, b: &JointConfig, step: f64) -> usize {
    let dist = a.max_norm_distance(b);
    let mut n = 1usize;
    while dist / (n as f64) > step {
        n *= 2;
    }
    n
}

/// Checks the straight joint-space motion from `a` to `b`, endpoints included.
pub fn edge_in_collision(a: &JointConfig, b: &JointConfig, scene: &Scene, step: f64) -> Result<bool> {
    assert!(step > 0.0, "edge step must be positive");
    scene.robot.check_limits(a)?;
    scene.robot.check_limits(b)?;
    Ok(edge_in_collision_unchecked(a, b, scene, step))
}

pub(crate) fn edge_in_collision_unchecked(a: &JointConfig, b: &JointConfig, scene: &Scene, step: f64) -> bool {
    if scene.config_in_collision_unchecked(a) || scene.config_in_collision_unchecked(b) {
        return true;
    }
    let n = edge_subdivisions(a, b, step);
    // coarse-to-fine order finds blocked midpoints early
    let mut stride = n;
    while stride > 1 {
        let half = stride / 2;
        let mut i = half;
        while i < n {
            if scene.config_in_collision_unchecked(&a.lerp(b, i as f64 / n as f64)) {
                return true;
            }
            i += stride;
        }
        stride = half;
    }
    false
}

/// Per-joint bound on how far any link point moves per radian: the summed
/// DH offsets downstream of the joint.
pub fn sweep_radii(robot: &RobotGeometry) -> [f64; DOF] {
    let mut r = [0.0; DOF];
    let mut acc = 0.0;
    for i in (0..DOF).rev() {
        acc += robot.dh_rows[i].a.abs() + robot.dh_rows[i].d.abs();
        r[i] = acc;
    }
    r
}

const CERTIFY_MAX_EVALS: usize = 1 << 12;
const CERTIFY_MIN_SPAN: f64 = 1e-9;

/// Proves the whole straight motion free, not just the points sampled at
/// `step`. Slower than [`edge_in_collision`]; meant for accepted edges.
pub fn edge_certified(a: &JointConfig, b: &JointConfig, scene: &Scene, step: f64) -> bool {
    edge_free(a, b, scene, edge_subdivisions(a, b, step))
}

/// Samples `n + 1` evenly spaced configurations (endpoints, then coarse to
/// fine so blocked midpoints show up early), then certifies each gap: a
/// sample with clearance `c` is safe for any motion that moves no link point
/// farther than `c`, and link displacement is bounded by
/// `Σ |Δq_i| · sweep_radii[i]`. Gaps the two neighbours do not cover are
/// bisected; grazing contacts that exhaust the budget count as blocked.
fn edge_free(a: &JointConfig, b: &JointConfig, scene: &Scene, n: usize) -> bool {
    let radii = sweep_radii(&scene.robot);
    let full: f64 = b.sub(a).iter().zip(&radii).map(|(d, r)| d.abs() * r).sum();
    let gap = full / n as f64;
    let at = |t: f64, cap: f64| scene.clearance_capped(&scene.links_unchecked(&a.lerp(b, t)), cap);

    let mut c = vec![0.0; n + 1];
    let mut order = vec![0, n];
    let mut stride = n;
    while stride > 1 {
        let half = stride / 2;
        order.extend((half..n).step_by(stride));
        stride = half;
    }
    for i in order {
        c[i] = at(i as f64 / n as f64, gap);
        if c[i] < 0.0 {
            return false;
        }
    }
    if full == 0.0 {
        return true;
    }

    let mut evals = 0;
    for i in 0..n {
        let mut stack = vec![(i as f64 / n as f64, (i + 1) as f64 / n as f64, c[i], c[i + 1])];
        while let Some((s, t, cs, ct)) = stack.pop() {
            let need = (t - s) * full;
            if cs + ct > need {
                continue;
            }
            evals += 1;
            if evals > CERTIFY_MAX_EVALS || t - s < CERTIFY_MIN_SPAN {
                return false;
            }
            let m = 0.5 * (s + t);
            let cm = at(m, 0.5 * need);
            if cm < 0.0 {
                return false;
            }
            stack.push((m, t, cm, ct));
            stack.push((s, m, cs, cm));
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm_models::forward_kinematics;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn rand_point(rng: &mut impl Rng) -> Vec3 {
        v(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    #[test]
    fn segment_distance_basics() {
        let a0 = v(0.0, 0.0, 0.0);
        let a1 = v(1.0, 0.0, 0.0);
        assert_eq!(segment_segment_distance(&a0, &a1, &a0, &a1), 0.0);
        let d = segment_segment_distance(&a0, &a1, &v(0.0, 0.0, 1.0), &v(1.0, 0.0, 1.0));
        assert!((d - 1.0).abs() < 1e-15);
        // crossing segments
        let d = segment_segment_distance(&v(-1.0, 0.0, 0.0), &v(1.0, 0.0, 0.0), &v(0.0, -1.0, 0.0), &v(0.0, 1.0, 0.0));
        assert_eq!(d, 0.0);
        // degenerate point vs segment
        let d = segment_segment_distance(&v(0.5, 2.0, 0.0), &v(0.5, 2.0, 0.0), &a0, &a1);
        assert!((d - 2.0).abs() < 1e-15);
    }

    fn grid_oracle(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3, n: usize) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..=n {
            let p = a0 + (a1 - a0) * (i as f64 / n as f64);
            for j in 0..=n {
                let q = b0 + (b1 - b0) * (j as f64 / n as f64);
                best = best.min((p - q).norm_squared());
            }
        }
        best.sqrt()
    }

    #[test]
    fn segment_distance_matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..60 {
            let (a0, a1, b0, b1) = (rand_point(&mut rng), rand_point(&mut rng), rand_point(&mut rng), rand_point(&mut rng));
            let d = segment_segment_distance(&a0, &a1, &b0, &b1);
            let o = grid_oracle(&a0, &a1, &b0, &b1, 400);
            assert!(d <= o + 1e-12);
            assert!((d - o).abs() < 2e-3 * 2.5, "{d} vs {o}");
            let sym = segment_segment_distance(&b0, &b1, &a0, &a1);
            assert!((d - sym).abs() < 1e-12);
        }
    }

    #[test]
    fn capsule_boundary_is_free() {
        let r = 1.0;
        let mk = |z: f64| Capsule {
            p0: v(0.0, 0.0, z),
            p1: v(1.0, 0.0, z),
            radius: r,
        };
        assert!(capsules_collide(&mk(0.0), &mk(1.5)));
        assert!(!capsules_collide(&mk(0.0), &mk(2.5)));
        assert!(!capsules_collide(&mk(0.0), &mk(2.0)));
    }

    #[test]
    fn capsule_box_cases() {
        let b = Aabb::new(v(0.0, 0.0, 0.0), v(1.0, 1.0, 1.0));
        let far = Capsule {
            p0: v(0.0, 0.0, 3.0),
            p1: v(1.0, 1.0, 3.0),
            radius: 0.5,
        };
        assert!(!capsule_box_collide(&far, &b));
        let through = Capsule {
            p0: v(-1.0, 0.5, 0.5),
            p1: v(2.0, 0.5, 0.5),
            radius: 0.01,
        };
        assert!(capsule_box_collide(&through, &b));
        let near_edge = Capsule {
            p0: v(1.1, 1.1, 0.5),
            p1: v(1.1, 1.1, 0.6),
            radius: 0.15,
        };
        assert!(capsule_box_collide(&near_edge, &b));
    }

    #[test]
    fn segment_box_matches_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let c = rand_point(&mut rng);
            let h = v(rng.random_range(0.0..0.5), rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
            let b = Aabb::new(c - h, c + h);
            let (p0, p1) = (rand_point(&mut rng) * 1.5, rand_point(&mut rng) * 1.5);
            let d = segment_box_distance(&p0, &p1, &b);
            let o = (0..=2000)
                .map(|i| b.point_distance(&(p0 + (p1 - p0) * (i as f64 / 2000.0))))
                .fold(f64::INFINITY, f64::min);
            assert!(d <= o + 1e-12);
            assert!(o - d < 2e-3, "{d} vs {o}");
        }
    }

    fn empty_scene() -> Scene {
        Scene::new(RobotGeometry::default())
    }

    #[test]
    fn empty_scene_never_collides_at_home() {
        let scene = empty_scene();
        assert!(!config_in_collision(&JointConfig::zeros(), &scene).unwrap());
    }

    #[test]
    fn human_on_link_collides() {
        let robot = RobotGeometry::default();
        let fk = forward_kinematics(&JointConfig::zeros(), &robot).unwrap();
        let scene = empty_scene().with_human(vec![Capsule {
            p0: fk[3],
            p1: fk[3] + v(0.0, 0.0, 0.1),
            radius: 0.05,
        }]);
        assert!(config_in_collision(&JointConfig::zeros(), &scene).unwrap());
    }

    #[test]
    fn edge_detects_blocked_midpoint() {
        let a = JointConfig([-1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = JointConfig([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        // at q0 = 0 the forearm lies on the +x axis at z = 0.4
        let scene = empty_scene().with_boxes(vec![Aabb::new(v(0.5, -0.02, 0.42), v(0.55, 0.02, 0.5))]);
        assert!(!config_in_collision(&a, &scene).unwrap());
        assert!(!config_in_collision(&b, &scene).unwrap());
        assert!(edge_in_collision(&a, &b, &scene, 0.05).unwrap());
        assert!(!edge_in_collision(&a, &a, &scene, 0.05).unwrap());
    }

    #[test]
    fn edge_refinement_never_clears_a_hit() {
        let robot = RobotGeometry::default();
        let scene = Scene::new(robot.clone()).with_boxes(vec![
            Aabb::new(v(-1.0, -1.0, -0.1), v(1.0, 1.0, 0.0)),
            Aabb::new(v(0.3, 0.2, 0.0), v(0.5, 0.4, 0.3)),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut hits = 0;
        for _ in 0..100 {
            let a = JointConfig(std::array::from_fn(|_| rng.random_range(-3.0..3.0)));
            let b = JointConfig(std::array::from_fn(|_| rng.random_range(-3.0..3.0)));
            let s = 0.2;
            let coarse = edge_in_collision(&a, &b, &scene, s).unwrap();
            let fine = edge_in_collision(&a, &b, &scene, s / 2.0).unwrap();
            if coarse {
                hits += 1;
                assert!(fine);
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn edge_of_identical_configs_equals_point_check() {
        let robot = RobotGeometry::default();
        let scene = Scene::new(robot).with_boxes(vec![Aabb::new(v(-1.0, -1.0, -0.1), v(1.0, 1.0, 0.05))]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let q = JointConfig(std::array::from_fn(|_| rng.random_range(-3.0..3.0)));
            assert_eq!(
                edge_in_collision(&q, &q, &scene, 0.05).unwrap(),
                config_in_collision(&q, &scene).unwrap()
            );
        }
    }

    fn cluttered_scene() -> Scene {
        empty_scene().with_boxes(vec![
            Aabb::new(v(0.3, -0.3, 0.0), v(0.5, -0.1, 0.35)),
            Aabb::new(v(-0.4, 0.2, 0.0), v(-0.2, 0.45, 0.5)),
            Aabb::new(v(0.1, 0.35, 0.5), v(0.3, 0.55, 0.7)),
        ])
    }

    #[test]
    fn clearance_sign_matches_point_check() {
        let scene = cluttered_scene().with_human(vec![Capsule {
            p0: v(0.5, 0.3, 0.3),
            p1: v(0.5, 0.5, 0.6),
            radius: 0.06,
        }]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let q = JointConfig(std::array::from_fn(|_| rng.random_range(-PI..PI)));
            let c = scene.clearance(&scene.links_unchecked(&q));
            if c.abs() > 1e-12 {
                assert_eq!(c < 0.0, scene.config_in_collision_unchecked(&q), "{q:?} {c}");
            }
        }
    }

    #[test]
    fn sweep_radii_bound_link_motion() {
        let robot = RobotGeometry::default();
        let r = sweep_radii(&robot);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let a = JointConfig(std::array::from_fn(|_| rng.random_range(-PI..PI)));
            let b = a.add(&std::array::from_fn(|_| rng.random_range(-0.05..0.05)));
            let bound: f64 = b.sub(&a).iter().zip(&r).map(|(d, ri)| d.abs() * ri).sum();
            let pa = fk_unchecked(&a, &robot);
            let pb = fk_unchecked(&b, &robot);
            for (x, y) in pa.iter().zip(&pb) {
                assert!((x - y).norm() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn blocked_edge_is_never_certified() {
        let a = JointConfig([-1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = JointConfig([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let scene = empty_scene().with_boxes(vec![Aabb::new(v(0.5, -0.02, 0.42), v(0.55, 0.02, 0.5))]);
        assert!(!edge_certified(&a, &b, &scene, 0.05));
        assert!(edge_certified(&a, &b, &empty_scene(), 0.05));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn accepted_edges_survive_dense_sampling(
            a in proptest::array::uniform6(-PI..PI),
            d in proptest::array::uniform6(-0.6f64..0.6),
        ) {
            let scene = cluttered_scene();
            let a = JointConfig(a);
            let b = scene.robot.clamp_to_limits(&a.add(&d));
            if edge_certified(&a, &b, &scene, 0.05) {
                for k in 0..=400 {
                    proptest::prop_assert!(!scene.config_in_collision_unchecked(&a.lerp(&b, k as f64 / 400.0)));
                }
            }
        }
    }
}
