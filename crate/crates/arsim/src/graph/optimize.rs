//! Damped Gauss-Newton (Levenberg-Marquardt style) solver for the
//! trajectory-error cost, with odometry spanning-tree initialization and the
//! anchor node held fixed.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, Vector3};

use super::{translation_residual, EdgeKind, ErrorScope, MeasurementEdge, NodeId, PoseGraph};
use crate::error::{Error, Result};
use crate::geometry::{compose, Pose, Rotation};

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub max_iterations: usize,
    /// Stop once the relative cost decrease of an accepted step falls below this.
    pub rel_tol: f64,
    pub initial_lambda: f64,
    /// Start from odometry propagated out of the anchor when that beats the
    /// input estimates. Disable to exercise pure descent from the input.
    pub tree_init: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            max_iterations: 100,
            rel_tol: 1e-8,
            initial_lambda: 1e-4,
            tree_init: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after the starting point and after every accepted step;
    /// non-increasing by the damping contract.
    pub cost_trace: Vec<f64>,
}

/// Minimize the trajectory-error cost with default options.
pub fn optimize(graph: &PoseGraph) -> Result<(PoseGraph, OptimizeReport)> {
    optimize_with(graph, &OptimizeOptions::default())
}

/// Minimize the trajectory-error cost. The input graph is left untouched; the
/// returned graph carries the optimized estimates with the anchor pose copied
/// through bit-for-bit. Accepted steps never increase the cost.
pub fn optimize_with(
    graph: &PoseGraph,
    opts: &OptimizeOptions,
) -> Result<(PoseGraph, OptimizeReport)> {
    if !graph.contains(graph.anchor()) {
        return Err(Error::MissingAnchor(graph.anchor()));
    }
    let initial_cost = graph.trajectory_error(ErrorScope::All);
    let mut work = graph.clone();

    // Connectivity check doubles as the tree initialization.
    let tree = spanning_tree_estimates(graph)?;
    if opts.tree_init {
        let mut candidate = graph.clone();
        for (id, pose) in &tree {
            candidate.set_pose(*id, *pose)?;
        }
        if candidate.trajectory_error(ErrorScope::All) < initial_cost {
            work = candidate;
        }
    }

    // Order state blocks by (step, robot): odometry, same-tick inter-robot
    // edges, and deployment edges then couple only nearby blocks, which keeps
    // the normal equations banded and the factorization close to linear.
    let mut order: Vec<NodeId> = work
        .nodes()
        .map(|(id, _)| *id)
        .filter(|id| *id != work.anchor())
        .collect();
    order.sort_by_key(|id| (id.step, id.robot));
    let index: BTreeMap<NodeId, usize> = order
        .into_iter()
        .enumerate()
        .map(|(k, id)| (id, k))
        .collect();
    let dim = 6 * index.len();

    // Half bandwidth in scalar coordinates.
    let mut band = 5usize;
    for e in work.edges() {
        if let (Some(a), Some(b)) = (index.get(&e.from), index.get(&e.to)) {
            let span = 6 * a.abs_diff(*b) + 5;
            band = band.max(span);
        }
    }
    let banded_cheaper = dim > 60 && (band + 1) * (band + 1) < dim * dim / 3;

    let mut cost = work.trajectory_error(ErrorScope::All);
    let mut cost_trace = vec![cost];
    let mut lambda = opts.initial_lambda;
    let mut iterations = 0;
    let mut converged = dim == 0 || cost < 1e-14;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let delta = if banded_cheaper {
            let (h, b) = assemble_banded(&work, &index, dim, band);
            // Damped solve; bump lambda until the factorization succeeds.
            loop {
                match h.factor_damped(lambda) {
                    Some(chol) => break chol.solve(&b),
                    None => {
                        lambda *= 10.0;
                        if lambda > 1e14 {
                            break DVector::zeros(dim);
                        }
                    }
                }
            }
        } else {
            let (h, b) = assemble_normal_equations(&work, &index, dim);
            loop {
                let mut damped = h.clone();
                for d in 0..dim {
                    let diag = h[(d, d)].max(1e-12);
                    damped[(d, d)] = h[(d, d)] + lambda * diag;
                }
                match damped.cholesky() {
                    Some(chol) => break chol.solve(&(-&b)),
                    None => {
                        lambda *= 10.0;
                        if lambda > 1e14 {
                            break DVector::zeros(dim);
                        }
                    }
                }
            }
        };
        if delta.norm() == 0.0 {
            break;
        }

        let trial = apply_step(&work, &index, &delta);
        let trial_cost = trial.trajectory_error(ErrorScope::All);
        if trial_cost <= cost {
            let rel = if cost > 0.0 {
                (cost - trial_cost) / cost
            } else {
                0.0
            };
            work = trial;
            cost = trial_cost;
            cost_trace.push(cost);
            lambda = (lambda / 3.0).max(1e-12);
            if rel < opts.rel_tol || cost < 1e-14 {
                converged = true;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e14 {
                break;
            }
        }
    }

    // Gauge fixing: the returned anchor pose is the input one, untouched.
    work.set_pose(graph.anchor(), *graph.pose(graph.anchor()).unwrap())?;
    let final_cost = work.trajectory_error(ErrorScope::All);
    Ok((
        work,
        OptimizeReport {
            initial_cost,
            final_cost,
            iterations,
            converged,
            cost_trace,
        },
    ))
}

/// Propagate measurements from the anchor over a spanning tree, preferring
/// odometry edges. Errors when some node cannot be reached.
fn spanning_tree_estimates(graph: &PoseGraph) -> Result<BTreeMap<NodeId, Pose>> {
    // node -> (edge index, traversed forward?)
    let mut adjacency: BTreeMap<NodeId, Vec<(usize, bool)>> = BTreeMap::new();
    for (idx, e) in graph.edges().iter().enumerate() {
        adjacency.entry(e.from).or_default().push((idx, true));
        adjacency.entry(e.to).or_default().push((idx, false));
    }
    for list in adjacency.values_mut() {
        list.sort_by_key(|(idx, _)| {
            let kind = match graph.edges()[*idx].kind {
                EdgeKind::Odometry => 0usize,
                EdgeKind::InterRobot => 1,
            };
            (kind, *idx)
        });
    }

    let anchor = graph.anchor();
    let mut estimates = BTreeMap::new();
    estimates.insert(anchor, *graph.pose(anchor).unwrap());
    let mut frontier = vec![anchor];
    while let Some(u) = frontier.pop() {
        let here = estimates[&u];
        if let Some(list) = adjacency.get(&u) {
            for (idx, forward) in list {
                let e = &graph.edges()[*idx];
                let (v, pose) = if *forward {
                    (e.to, compose(&here, &e.z_bar))
                } else {
                    (e.from, compose(&here, &e.z_bar.inverse()))
                };
                if let std::collections::btree_map::Entry::Vacant(e) = estimates.entry(v) {
                    e.insert(pose);
                    frontier.push(v);
                }
            }
        }
    }
    if estimates.len() != graph.node_count() {
        let missing = graph
            .nodes()
            .map(|(id, _)| *id)
            .find(|id| !estimates.contains_key(id))
            .unwrap();
        return Err(Error::Disconnected(missing));
    }
    Ok(estimates)
}

/// Column-major flattening of a 3x3 matrix.
fn vec9(m: &Matrix3<f64>) -> SVector<f64, 9> {
    SVector::<f64, 9>::from_iterator(m.iter().copied())
}

fn basis_skew(k: usize) -> Matrix3<f64> {
    let mut e = Vector3::zeros();
    e[k] = 1.0;
    Matrix3::new(0.0, -e.z, e.y, e.z, 0.0, -e.x, -e.y, e.x, 0.0)
}

fn assemble_normal_equations(
    graph: &PoseGraph,
    index: &BTreeMap<NodeId, usize>,
    dim: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    for_each_edge_blocks(
        graph,
        index,
        |ka, kb, block| {
            for rr in 0..6 {
                for cc in 0..6 {
                    h[(6 * ka + rr, 6 * kb + cc)] += block[(rr, cc)];
                }
            }
        },
        |ka, jtr| {
            for d in 0..6 {
                b[6 * ka + d] += jtr[d];
            }
        },
    );
    (h, b)
}

/// Normal equations packed as a symmetric lower band plus the right-hand
/// side `-b`: column j holds H[j..=j+band, j].
struct BandedNormal {
    dim: usize,
    band: usize,
    packed: Vec<f64>,
}

struct BandedCholesky {
    dim: usize,
    band: usize,
    l: Vec<f64>,
}

impl BandedNormal {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.band + 1) + (i - j)
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        if i >= j {
            let k = self.idx(i, j);
            self.packed[k] += v;
        }
    }

    /// In-place banded Cholesky of H + lambda diag(H); None when the damped
    /// matrix is not positive definite.
    fn factor_damped(&self, lambda: f64) -> Option<BandedCholesky> {
        let (dim, band) = (self.dim, self.band);
        let mut l = self.packed.clone();
        let at = |l: &Vec<f64>, i: usize, j: usize| l[j * (band + 1) + (i - j)];
        for j in 0..dim {
            let d = self.packed[j * (band + 1)];
            l[j * (band + 1)] = d + lambda * d.max(1e-12);
        }
        for j in 0..dim {
            let start = j.saturating_sub(band);
            let mut sum = at(&l, j, j);
            for k in start..j {
                if j - k <= band {
                    let v = at(&l, j, k);
                    sum -= v * v;
                }
            }
            if sum <= 1e-300 {
                return None;
            }
            let diag = sum.sqrt();
            l[j * (band + 1)] = diag;
            let last = (j + band).min(dim - 1);
            for i in (j + 1)..=last {
                let mut s = at(&l, i, j);
                let kstart = start.max(i.saturating_sub(band));
                for k in kstart..j {
                    s -= at(&l, i, k) * at(&l, j, k);
                }
                l[j * (band + 1) + (i - j)] = s / diag;
            }
        }
        Some(BandedCholesky { dim, band, l })
    }
}

impl BandedCholesky {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[j * (self.band + 1) + (i - j)]
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let (dim, band) = (self.dim, self.band);
        let mut y = DVector::zeros(dim);
        for i in 0..dim {
            let start = i.saturating_sub(band);
            let mut s = rhs[i];
            for k in start..i {
                s -= self.at(i, k) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        let mut x = DVector::zeros(dim);
        for i in (0..dim).rev() {
            let last = (i + band).min(dim - 1);
            let mut s = y[i];
            for k in (i + 1)..=last {
                s -= self.at(k, i) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }
}

/// Banded twin of `assemble_normal_equations`; returns the packed matrix and
/// the negated gradient so the solve yields the step directly.
fn assemble_banded(
    graph: &PoseGraph,
    index: &BTreeMap<NodeId, usize>,
    dim: usize,
    band: usize,
) -> (BandedNormal, DVector<f64>) {
    let mut h = BandedNormal {
        dim,
        band,
        packed: vec![0.0; dim * (band + 1)],
    };
    let mut b = DVector::<f64>::zeros(dim);
    for_each_edge_blocks(
        graph,
        index,
        |ka, kb, block| {
            for rr in 0..6 {
                for cc in 0..6 {
                    h.add(6 * ka + rr, 6 * kb + cc, block[(rr, cc)]);
                }
            }
        },
        |ka, jtr| {
            for d in 0..6 {
                b[6 * ka + d] += jtr[d];
            }
        },
    );
    (h, -b)
}

/// Shared edge-block walk used by both assemblies.
fn for_each_edge_blocks<FH, FB>(
    graph: &PoseGraph,
    index: &BTreeMap<NodeId, usize>,
    mut on_block: FH,
    mut on_rhs: FB,
) where
    FH: FnMut(usize, usize, &SMatrix<f64, 6, 6>),
    FB: FnMut(usize, &SVector<f64, 6>),
{
    for e in graph.edges() {
        let x_i = graph.pose(e.from).unwrap();
        let x_j = graph.pose(e.to).unwrap();
        let (r, w, j_i, j_j) = edge_linearization(e, x_i, x_j);
        let ki = index.get(&e.from).copied();
        let kj = index.get(&e.to).copied();
        let blocks = [(ki, &j_i), (kj, &j_j)];
        for (ka, ja) in blocks.iter() {
            let Some(ka) = ka else { continue };
            let wja = scale_rows(ja, &w);
            let jtr = ja.transpose() * component_mul(&w, &r);
            on_rhs(*ka, &jtr);
            for (kb, jb) in blocks.iter() {
                let Some(kb) = kb else { continue };
                let block = wja.transpose() * *jb;
                on_block(*ka, *kb, &block);
            }
        }
    }
}

/// Residual, row weights, and the two 12x6 Jacobian blocks of one edge.
fn edge_linearization(
    e: &MeasurementEdge,
    x_i: &Pose,
    x_j: &Pose,
) -> (
    SVector<f64, 12>,
    SVector<f64, 12>,
    SMatrix<f64, 12, 6>,
    SMatrix<f64, 12, 6>,
) {
    let w_t = e.weight * e.info_trans;
    let w_r = e.weight * e.info_rot;

    let r_t = translation_residual(e, x_i, x_j);
    let rot_target = x_i.rotation.mul(&e.z_bar.rotation);
    let r_rot = vec9(&(x_j.rotation.matrix() - rot_target.matrix()));
    let mut r = SVector::<f64, 12>::zeros();
    r.fixed_rows_mut::<3>(0).copy_from(&r_t);
    r.fixed_rows_mut::<9>(3).copy_from(&r_rot);

    let mut j_i = SMatrix::<f64, 12, 6>::zeros();
    let mut j_j = SMatrix::<f64, 12, 6>::zeros();
    j_i.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(-Matrix3::identity()));
    j_j.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&Matrix3::identity());
    let ri = x_i.rotation.matrix();
    let rj = x_j.rotation.matrix();
    let zbar_r = e.z_bar.rotation.matrix();
    let p_bar = e.z_bar.position;
    let skew_p = Matrix3::new(
        0.0, -p_bar.z, p_bar.y, p_bar.z, 0.0, -p_bar.x, -p_bar.y, p_bar.x, 0.0,
    );
    j_i.fixed_view_mut::<3, 3>(0, 3).copy_from(&(ri * skew_p));
    for k in 0..3 {
        let gk = basis_skew(k);
        let di = -(ri * gk * zbar_r);
        let dj = rj * gk;
        j_i.fixed_view_mut::<9, 1>(3, 3 + k).copy_from(&vec9(&di));
        j_j.fixed_view_mut::<9, 1>(3, 3 + k).copy_from(&vec9(&dj));
    }

    let mut w = SVector::<f64, 12>::zeros();
    for d in 0..3 {
        w[d] = w_t;
    }
    for d in 3..12 {
        w[d] = w_r;
    }
    (r, w, j_i, j_j)
}

fn scale_rows(j: &SMatrix<f64, 12, 6>, w: &SVector<f64, 12>) -> SMatrix<f64, 12, 6> {
    let mut out = *j;
    for r in 0..12 {
        for c in 0..6 {
            out[(r, c)] *= w[r];
        }
    }
    out
}

fn component_mul(w: &SVector<f64, 12>, r: &SVector<f64, 12>) -> SVector<f64, 12> {
    let mut out = *r;
    for d in 0..12 {
        out[d] *= w[d];
    }
    out
}

fn apply_step(
    graph: &PoseGraph,
    index: &BTreeMap<NodeId, usize>,
    delta: &DVector<f64>,
) -> PoseGraph {
    let mut out = graph.clone();
    for (id, k) in index {
        let pose = graph.pose(*id).unwrap();
        let dp = Vector3::new(delta[6 * k], delta[6 * k + 1], delta[6 * k + 2]);
        let dw = Vector3::new(delta[6 * k + 3], delta[6 * k + 4], delta[6 * k + 5]);
        let updated = Pose::new(
            pose.rotation.mul(&Rotation::exp(dw)).renormalized(),
            pose.position + dp,
        );
        out.set_pose(*id, updated).unwrap();
    }
    out
}
