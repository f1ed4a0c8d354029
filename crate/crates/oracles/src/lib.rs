//! Independent reference implementations used only by tests.
//!
//! Everything here is deliberately brute force or closed form and shares no
//! algorithm code with the production crate beyond its geometry and graph
//! container types: costs are re-derived from scratch so the oracle stays an
//! independent check.

use arsim::geometry::Pose;
use arsim::graph::{EdgeKind, NodeId, PoseGraph};
use nalgebra::{Vector2, Vector3};
use num_complex::Complex64;

/// Grid description for one free planar pose.
#[derive(Debug, Clone)]
pub struct PoseGrid {
    pub x: (f64, f64, usize),
    pub y: (f64, f64, usize),
    pub yaw: (f64, f64, usize),
}

impl PoseGrid {
    pub fn cells(&self) -> usize {
        self.x.2 * self.y.2 * self.yaw.2
    }

    fn value(range: (f64, f64, usize), idx: usize) -> f64 {
        if range.2 <= 1 {
            return range.0;
        }
        range.0 + (range.1 - range.0) * idx as f64 / (range.2 - 1) as f64
    }

    pub fn resolution(&self) -> (f64, f64, f64) {
        let step = |r: (f64, f64, usize)| {
            if r.2 <= 1 {
                0.0
            } else {
                (r.1 - r.0) / (r.2 - 1) as f64
            }
        };
        (step(self.x), step(self.y), step(self.yaw))
    }
}

/// A tiny planar pose-graph problem solved by exhaustive grid search.
/// The first pose is fixed; each remaining pose ranges over its grid.
#[derive(Debug, Clone)]
pub struct TinyPlanarProblem {
    pub fixed: Pose,
    pub grids: Vec<PoseGrid>,
    /// (from, to, measurement, info_trans, info_rot, weight); indices into
    /// the pose list where 0 is the fixed pose.
    pub edges: Vec<(usize, usize, Pose, f64, f64, f64)>,
}

impl TinyPlanarProblem {
    pub fn search_space(&self) -> usize {
        self.grids.iter().map(|g| g.cells()).product()
    }
}

/// Hand-evaluated edge cost, written out entrywise so it cannot share a
/// code path with the production cost:
/// `weight * (it * |p_j - p_i - R_i p|^2 + ir * |R_j - R_i R|_F^2)`.
fn edge_cost_planar(
    xi: (f64, f64, f64),
    xj: (f64, f64, f64),
    z: &Pose,
    info_t: f64,
    info_r: f64,
    weight: f64,
) -> f64 {
    let (xi_x, xi_y, xi_th) = xi;
    let (xj_x, xj_y, xj_th) = xj;
    let (s, c) = xi_th.sin_cos();
    // R_i * p_bar in the plane (z component of p_bar is carried unrotated).
    let rx = c * z.position.x - s * z.position.y;
    let ry = s * z.position.x + c * z.position.y;
    let dt_x = xj_x - xi_x - rx;
    let dt_y = xj_y - xi_y - ry;
    let dt_z = -z.position.z;
    let trans = dt_x * dt_x + dt_y * dt_y + dt_z * dt_z;

    // ||Rz(xj_th) - Rz(xi_th) * R_bar||_F^2 for planar rotations reduces to
    // 4 * (1 - cos(xj_th - xi_th - yaw(R_bar))).
    let dyaw = xj_th - xi_th - z.rotation.yaw();
    let rot = 4.0 * (1.0 - dyaw.cos());
    weight * (info_t * trans + info_r * rot)
}

/// Exhaustive minimization of the trajectory-error cost over the grids.
/// Returns the best pose assignment (including the fixed pose) and its cost.
pub fn brute_force_pgo(problem: &TinyPlanarProblem) -> (Vec<Pose>, f64) {
    assert!(
        problem.search_space() <= 1_000_000,
        "search space too large: {}",
        problem.search_space()
    );
    let n_free = problem.grids.len();
    let mut best_cost = f64::INFINITY;
    let mut best: Vec<(f64, f64, f64)> = Vec::new();

    let mut indices = vec![(0usize, 0usize, 0usize); n_free];
    let fixed = (
        problem.fixed.position.x,
        problem.fixed.position.y,
        problem.fixed.rotation.yaw(),
    );

    loop {
        let assignment: Vec<(f64, f64, f64)> = indices
            .iter()
            .zip(&problem.grids)
            .map(|((ix, iy, it), g)| {
                (
                    PoseGrid::value(g.x, *ix),
                    PoseGrid::value(g.y, *iy),
                    PoseGrid::value(g.yaw, *it),
                )
            })
            .collect();
        let pose_of = |k: usize| if k == 0 { fixed } else { assignment[k - 1] };
        let mut cost = 0.0;
        for (from, to, z, it, ir, w) in &problem.edges {
            cost += edge_cost_planar(pose_of(*from), pose_of(*to), z, *it, *ir, *w);
            if cost >= best_cost {
                break;
            }
        }
        if cost < best_cost {
            best_cost = cost;
            best = assignment.clone();
        }

        // Odometer-style advance over the joint grid.
        let mut k = 0;
        loop {
            if k == n_free {
                let mut poses = vec![problem.fixed];
                poses.extend(best.iter().map(|(x, y, th)| Pose::from_xy_yaw(*x, *y, *th)));
                return (poses, best_cost);
            }
            let g = &problem.grids[k];
            indices[k].0 += 1;
            if indices[k].0 < g.x.2 {
                break;
            }
            indices[k].0 = 0;
            indices[k].1 += 1;
            if indices[k].1 < g.y.2 {
                break;
            }
            indices[k].1 = 0;
            indices[k].2 += 1;
            if indices[k].2 < g.yaw.2 {
                break;
            }
            indices[k].2 = 0;
            k += 1;
        }
    }
}

/// Build a `PoseGraph` holding the same problem, for running the production
/// optimizer against the oracle.
pub fn problem_to_graph(problem: &TinyPlanarProblem, initial: &[Pose]) -> PoseGraph {
    let id = |k: usize| NodeId::new(0, k as u32);
    let mut g = PoseGraph::new(id(0), problem.fixed);
    for (k, pose) in initial.iter().enumerate().skip(1) {
        g.add_node(id(k), *pose).unwrap();
    }
    for (from, to, z, it, ir, w) in &problem.edges {
        g.add_edge(
            arsim::graph::MeasurementEdge::new(
                id(*from),
                id(*to),
                *z,
                *it,
                *ir,
                EdgeKind::Odometry,
            )
            .with_weight(*w),
        )
        .unwrap();
    }
    g
}

/// Geometry of a single propagation path for the closed-form CSI oracle.
#[derive(Debug, Clone)]
pub struct SinglePathGeometry {
    pub source: Vector3<f64>,
    pub arc_center: Vector3<f64>,
    pub start_heading: f64,
    pub turn: f64,
    pub count: usize,
    pub antenna_separation: f64,
    pub wavelength: f64,
}

/// Exact per-snapshot channel ratio for one path: antennas at
/// `center ± R(heading) r/2` on the body x axis, ratio
/// `exp(-i 2 pi (d1 - d2) / lambda)`. Path gain cancels in the ratio.
pub fn analytic_single_path_ratio(geom: &SinglePathGeometry) -> Vec<Complex64> {
    let half = geom.antenna_separation / 2.0;
    let k = 2.0 * std::f64::consts::PI / geom.wavelength;
    let step = geom.turn / geom.count as f64;
    (0..geom.count)
        .map(|s| {
            let heading = geom.start_heading + s as f64 * step;
            let offset = Vector3::new(heading.cos() * half, heading.sin() * half, 0.0);
            let d1 = (geom.source - (geom.arc_center + offset)).norm();
            let d2 = (geom.source - (geom.arc_center - offset)).norm();
            Complex64::cis(-k * (d1 - d2))
        })
        .collect()
}

/// Mirror of a point across the vertical line x = line_x; image-method helper
/// for channel geometry checks.
pub fn mirror_across_vertical_line(p: Vector2<f64>, line_x: f64) -> Vector2<f64> {
    Vector2::new(2.0 * line_x - p.x, p.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consistent_measurements_pick_the_truth_cell() {
        let z = Pose::from_xy_yaw(1.0, 0.0, 0.0);
        let problem = TinyPlanarProblem {
            fixed: Pose::identity(),
            grids: vec![PoseGrid {
                x: (0.0, 2.0, 21),
                y: (-1.0, 1.0, 21),
                yaw: (-0.5, 0.5, 11),
            }],
            edges: vec![(0, 1, z, 1.0, 1.0, 1.0)],
        };
        let (poses, cost) = brute_force_pgo(&problem);
        assert!(cost < 1e-12);
        assert!((poses[1].position - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn zero_separation_means_unit_ratio() {
        let geom = SinglePathGeometry {
            source: Vector3::new(4.0, 1.0, 0.0),
            arc_center: Vector3::zeros(),
            start_heading: 0.2,
            turn: std::f64::consts::FRAC_PI_2,
            count: 16,
            antenna_separation: 0.0,
            wavelength: 0.06,
        };
        for r in analytic_single_path_ratio(&geom) {
            assert!((r - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn mirrored_source_conjugates_the_pattern() {
        let base = SinglePathGeometry {
            source: Vector3::new(5.0, 2.0, 0.0),
            arc_center: Vector3::new(1.0, -0.5, 0.0),
            start_heading: -std::f64::consts::FRAC_PI_4,
            turn: std::f64::consts::FRAC_PI_2,
            count: 24,
            antenna_separation: 0.22,
            wavelength: 0.06,
        };
        // Point-reflecting the source through the arc center swaps the two
        // antenna distances at every snapshot, conjugating every ratio.
        let mirrored = SinglePathGeometry {
            source: base.arc_center * 2.0 - base.source,
            ..base.clone()
        };
        let a = analytic_single_path_ratio(&base);
        let b = analytic_single_path_ratio(&mirrored);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y.conj()).norm() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn planar_cost_matches_hand_value() {
        // One edge, estimates 1 m apart, measurement identity: cost 1.
        let cost = edge_cost_planar(
            (0.0, 0.0, 0.0),
            (1.0, 0.0, 0.0),
            &Pose::identity(),
            1.0,
            1.0,
            1.0,
        );
        assert!((cost - 1.0).abs() < 1e-12);
        // Pure quarter-turn rotation mismatch: 4 (1 - cos(pi/2)) = 4.
        let cost = edge_cost_planar(
            (0.0, 0.0, 0.0),
            (0.0, 0.0, std::f64::consts::FRAC_PI_2),
            &Pose::identity(),
            1.0,
            1.0,
            1.0,
        );
        assert!((cost - 4.0).abs() < 1e-12);
    }
}
