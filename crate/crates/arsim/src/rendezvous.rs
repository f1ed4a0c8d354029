//! Error monitoring, partner selection, and AOA-guided rendezvous.
//!
//! Each exploring robot watches the trajectory error of its unreconciled
//! measurement window. Past the threshold it broadcasts requests to its
//! radio neighbors; each neighbor offers itself to the requester it hears
//! best, requesters pick the partner with the lowest service discrepancy,
//! and the chosen partner drives in along the gradient of a Mahalanobis
//! edge cost built from the AOA profile, gathering relative-pose
//! measurements until enough exist to jointly optimize.

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::aoa::{compute_profile, extract_peaks, PeakSet};
use crate::channel::{propagation_paths, synthesize_csi, ArcSpec};
use crate::error::{Error, Result};
use crate::geometry::relative_pose;
use crate::graph::{ErrorScope, RobotId};
use crate::outlier::reweight_edge;
use crate::sim::{Mode, RendezvousEvent, World};

/// Tunables of the monitoring and rendezvous loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RendezvousParams {
    /// Trajectory-error threshold that triggers a rendezvous request.
    pub delta: f64,
    /// Observations to gather before optimizing.
    pub kappa: usize,
    /// Rate bump applied while the link already satisfies the desired rate.
    pub epsilon: f64,
    /// Profile noise scale in the guidance matrix Lambda = diag(1/s^2, 1);
    /// must be below 1 (the link carries more signal than noise).
    pub sigma_profile: f64,
    /// Safety bound on adaptive-walk iterations per rendezvous.
    pub max_steps: usize,
}

impl Default for RendezvousParams {
    fn default() -> Self {
        RendezvousParams {
            delta: 10.0,
            kappa: 9,
            epsilon: 0.5,
            sigma_profile: 0.5,
            max_steps: 40,
        }
    }
}

impl RendezvousParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta <= 0.0 || self.epsilon <= 0.0 {
            return Err(Error::Config("delta and epsilon must be positive".into()));
        }
        if self.kappa < 1 {
            return Err(Error::Config("kappa must be at least 1".into()));
        }
        if !(0.0 < self.sigma_profile && self.sigma_profile < 1.0) {
            return Err(Error::Config("sigma_profile must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// The requester-server relation a discrepancy is computed over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceLink {
    pub requester: RobotId,
    pub server: RobotId,
    /// Requester's desired data rate.
    pub q: f64,
    /// Requester's priority.
    pub alpha: f64,
    /// Rate the link currently supports.
    pub rho: f64,
}

/// Normalized service shortfall: `max(alpha (q - rho) / q, 0)`. Zero means
/// the server already satisfies the requester's desired rate.
pub fn service_discrepancy(link: &ServiceLink) -> f64 {
    (link.alpha * (link.q - link.rho) / link.q).max(0.0)
}

/// Inter-robot protocol message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Message {
    pub sender: RobotId,
    pub receiver: RobotId,
    pub body: MessageBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MessageBody {
    /// Rendezvous request carrying the requester's trajectory error.
    Request {
        err: f64,
    },
    /// Acceptance carrying the link rate and the server's own error.
    Accept {
        rho: f64,
        err: f64,
    },
    Reject,
}

/// What a server knows when answering requests: its own id and error, and
/// the measured link quality toward each requester.
#[derive(Debug, Clone)]
pub struct AcceptContext {
    pub self_id: RobotId,
    pub self_err: f64,
    /// (requester, esnr_db, rho) per incoming request, same order as the
    /// requests slice.
    pub links: Vec<(RobotId, f64, f64)>,
}

/// Serve the requester heard best: highest ESNR wins, with the requesters'
/// trajectory error (higher first, most in need) breaking ties. Returns one
/// accept and a reject for everyone else.
pub fn neighbor_accept_policy(requests: &[Message], ctx: &AcceptContext) -> Vec<Message> {
    assert!(!requests.is_empty());
    assert_eq!(requests.len(), ctx.links.len());
    let mut best: Option<(usize, f64, f64)> = None; // (index, esnr, requester err)
    for (k, m) in requests.iter().enumerate() {
        let MessageBody::Request { err } = m.body else {
            continue;
        };
        let esnr = ctx.links[k].1;
        let better = match best {
            None => true,
            Some((_, be, berr)) => esnr > be || (esnr == be && err > berr),
        };
        if better {
            best = Some((k, esnr, err));
        }
    }
    let chosen = best.expect("at least one request").0;
    requests
        .iter()
        .enumerate()
        .map(|(k, m)| Message {
            sender: ctx.self_id,
            receiver: m.sender,
            body: if k == chosen {
                MessageBody::Accept {
                    rho: ctx.links[k].2,
                    err: ctx.self_err,
                }
            } else {
                MessageBody::Reject
            },
        })
        .collect()
}

/// One acceptance as seen by the requester.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptOffer {
    pub server: RobotId,
    pub rho: f64,
    /// The server's own trajectory error (tie-breaker).
    pub err: f64,
}

/// Pick the partner with minimal service discrepancy; ties go to the partner
/// with the lower own trajectory error. Empty offers mean no partner this
/// tick (the monitor retries next tick).
pub fn select_partner(offers: &[AcceptOffer], q: f64, alpha: f64) -> Option<RobotId> {
    let mut best: Option<(RobotId, f64, f64)> = None;
    for o in offers {
        let w = service_discrepancy(&ServiceLink {
            requester: 0,
            server: o.server,
            q,
            alpha,
            rho: o.rho,
        });
        let better = match best {
            None => true,
            Some((_, bw, berr)) => w < bw || (w == bw && o.err < berr),
        };
        if better {
            best = Some((o.server, w, o.err));
        }
    }
    best.map(|(id, _, _)| id)
}

/// Navigation state derived from one AOA profile: the unit vector toward the
/// strongest arrival (in the world plane), the anisotropic weighting matrix
/// `M = Q diag(1/s^2, 1) Q'`, and the virtual target the mover descends
/// toward.
#[derive(Debug, Clone, PartialEq)]
pub struct AoaGuidance {
    pub v_max: Vector2<f64>,
    pub m: Matrix2<f64>,
    pub virtual_target: Vector2<f64>,
}

/// Build guidance from profile peaks whose azimuths are already expressed in
/// the world frame (rotate body-frame peaks by the mover's heading estimate
/// first). `sigma` is the profile noise scale, below 1.
pub fn build_guidance(
    peaks: &PeakSet,
    p_j: Vector2<f64>,
    w_ij: f64,
    sigma: f64,
) -> Result<AoaGuidance> {
    let top = peaks.top().ok_or(Error::EmptyPeaks)?;
    let v = Vector2::new(top.theta.cos(), top.theta.sin());
    let v_perp = Vector2::new(-v.y, v.x);
    let lambda = Matrix2::new(1.0 / (sigma * sigma), 0.0, 0.0, 1.0);
    let q = Matrix2::from_columns(&[v, v_perp]);
    let m = q * lambda * q.transpose();
    Ok(AoaGuidance {
        v_max: v,
        m,
        virtual_target: p_j + v * w_ij,
    })
}

/// Mahalanobis edge cost `(p' - p)' M (p' - p)`.
pub fn edge_cost(g: &AoaGuidance, p: Vector2<f64>) -> f64 {
    let d = g.virtual_target - p;
    (d.transpose() * g.m * d)[(0, 0)]
}

/// One descent step on the edge cost: `p + w * M (p' - p)`. With the virtual
/// target built from the same `w`, the displacement is `w^2 / sigma^2` along
/// the arrival direction.
pub fn gradient_step(g: &AoaGuidance, p_j: Vector2<f64>, w_ij: f64) -> Vector2<f64> {
    let gradient = g.m * (g.virtual_target - p_j);
    p_j + gradient * w_ij
}

/// Outcome of one robot's monitor tick.
#[derive(Debug)]
pub enum MonitorAction {
    /// Error at or below threshold; keep exploring.
    BelowThreshold { err: f64 },
    /// Over threshold but nobody in radio range; retry next tick.
    NoNeighbors,
    /// Over threshold, requests sent, no acceptance; retry next tick.
    NoAccepts,
    /// A rendezvous ran.
    Rendezvous(RendezvousEvent),
}

/// Run the error-monitor phase for every robot, honoring the multi-request
/// semantics: requests from all over-threshold robots go out first, every
/// neighbor (requester or not) offers itself to the requester it hears best,
/// and episodes run in ascending requester order. A robot takes part in at
/// most one episode per tick; requesters whose partner is already engaged
/// retry next tick.
pub fn monitor_phase(world: &mut World) -> Result<()> {
    let n = world.cfg.n_robots;
    let delta = world.cfg.rendezvous.delta;
    let errs: Vec<f64> = (0..n).map(|id| world.monitor_error(id)).collect();
    let requesters: Vec<RobotId> = (0..n).filter(|id| errs[*id as usize] > delta).collect();
    if requesters.is_empty() {
        return Ok(());
    }

    let mut inbox: Vec<Vec<Message>> = vec![Vec::new(); n as usize];
    for &r in &requesters {
        let neighbors = world.neighbors(r);
        if neighbors.is_empty() {
            world.retries += 1;
        }
        for s in neighbors {
            inbox[s as usize].push(Message {
                sender: r,
                receiver: s,
                body: MessageBody::Request {
                    err: errs[r as usize],
                },
            });
        }
    }

    // Each robot with requests offers itself to the requester it hears best.
    let mut offers: Vec<Vec<AcceptOffer>> = vec![Vec::new(); n as usize];
    for s in 0..n {
        if inbox[s as usize].is_empty() {
            continue;
        }
        let requests = inbox[s as usize].clone();
        let links: Vec<(RobotId, f64, f64)> = requests
            .iter()
            .map(|m| {
                let rho = world.measure_rate(s, m.sender);
                // Rate is monotone in ESNR, so it stands in for the ESNR
                // comparison as well.
                (m.sender, rho, rho)
            })
            .collect();
        let ctx = AcceptContext {
            self_id: s,
            self_err: errs[s as usize],
            links,
        };
        for reply in neighbor_accept_policy(&requests, &ctx) {
            if let MessageBody::Accept { rho, err } = reply.body {
                offers[reply.receiver as usize].push(AcceptOffer {
                    server: reply.sender,
                    rho,
                    err,
                });
            }
        }
    }

    // Requesters select partners and run episodes, ascending id.
    let mut engaged: std::collections::BTreeSet<RobotId> = std::collections::BTreeSet::new();
    for &r in &requesters {
        if engaged.contains(&r) {
            world.retries += 1;
            continue;
        }
        let free: Vec<AcceptOffer> = offers[r as usize]
            .iter()
            .filter(|o| !engaged.contains(&o.server))
            .copied()
            .collect();
        if free.is_empty() {
            world.retries += 1;
            continue;
        }
        let q = world.agents[r as usize].q;
        let alpha = world.agents[r as usize].alpha;
        let partner = select_partner(&free, q, alpha).expect("offers non-empty");
        engaged.insert(r);
        engaged.insert(partner);
        let event = active_rendezvous(world, r, partner)?;
        world.events.push(event);
    }
    Ok(())
}

/// Single-robot variant of the monitor: computes the robot's windowed error
/// and, past the threshold, runs the request/accept/select/rendezvous chain
/// against the current world state.
pub fn error_monitor_tick(world: &mut World, robot: RobotId) -> Result<MonitorAction> {
    let err = world.monitor_error(robot);
    if err <= world.cfg.rendezvous.delta {
        return Ok(MonitorAction::BelowThreshold { err });
    }
    let neighbors = world.neighbors(robot);
    if neighbors.is_empty() {
        world.retries += 1;
        return Ok(MonitorAction::NoNeighbors);
    }
    let mut offers = Vec::new();
    for s in neighbors {
        let rho = world.measure_rate(s, robot);
        let request = Message {
            sender: robot,
            receiver: s,
            body: MessageBody::Request { err },
        };
        let ctx = AcceptContext {
            self_id: s,
            self_err: world.monitor_error(s),
            links: vec![(robot, rho, rho)],
        };
        for reply in neighbor_accept_policy(&[request], &ctx) {
            if let MessageBody::Accept { rho, err } = reply.body {
                offers.push(AcceptOffer {
                    server: reply.sender,
                    rho,
                    err,
                });
            }
        }
    }
    if offers.is_empty() {
        world.retries += 1;
        return Ok(MonitorAction::NoAccepts);
    }
    let q = world.agents[robot as usize].q;
    let alpha = world.agents[robot as usize].alpha;
    let partner = select_partner(&offers, q, alpha).expect("offers non-empty");
    let event = active_rendezvous(world, robot, partner)?;
    world.events.push(event.clone());
    Ok(MonitorAction::Rendezvous(event))
}

/// The adaptive walk: the stationary requester `anchor` is approached by
/// `mover`, which senses an AOA profile each iteration, descends the
/// communication edge cost, and once inside sensor range parks and gathers
/// relative-pose measurements (validating each against that iteration's
/// profile when outlier rejection is on). Ends by jointly optimizing the
/// merged graph of both robots.
pub fn active_rendezvous(
    world: &mut World,
    anchor: RobotId,
    mover: RobotId,
) -> Result<RendezvousEvent> {
    let params = world.cfg.rendezvous;
    world.agents[anchor as usize].mode = Mode::RendezvousAnchor;
    world.agents[mover as usize].mode = Mode::RendezvousMover;

    let anchor_window = world.agents[anchor as usize].window_start;
    let pre_err = world.monitor_error(anchor);

    // The mover's motion during the episode accumulates into one odometry
    // segment, booked when it first needs a node (or at episode end).
    let est_start = world.agents[mover as usize].est_pose;
    let true_start = world.agents[mover as usize].true_pose;
    let mut traveled = 0.0_f64;
    let mut node_created = false;

    let mut q_i = world.agents[anchor as usize].q;
    let alpha_i = world.agents[anchor as usize].alpha;
    let mut w_history = Vec::new();
    let mut gathered = 0usize;
    let mut steps = 0usize;

    while steps < params.max_steps && gathered < params.kappa {
        steps += 1;
        let rho = world.measure_rate(mover, anchor);
        let w = service_discrepancy(&ServiceLink {
            requester: anchor,
            server: mover,
            q: q_i,
            alpha: alpha_i,
            rho,
        });
        w_history.push(w);

        // Quarter-turn sensing at the mover; the anchor transmits.
        let tx = world.agents[anchor as usize].true_pose.position;
        let rx = world.agents[mover as usize].true_pose;
        let paths = propagation_paths(&world.cfg.radio, tx, rx.position, &world.cfg.obstacles);
        let arc = ArcSpec {
            center: rx.position,
            start_heading: rx.rotation.yaw(),
            turn: std::f64::consts::FRAC_PI_2,
            count: world.cfg.snapshots_per_turn,
            heading_jitter_std: world.cfg.heading_jitter,
        };
        let snaps = synthesize_csi(&world.cfg.radio, &paths, &arc, &mut world.streams.channel);
        let dist = (world.agents[mover as usize].true_pose.position
            - world.agents[anchor as usize].true_pose.position)
            .norm();
        // Out of sensor range only the in-plane azimuth steers the walk, so a
        // thin polar band suffices; the full grid runs where edges get
        // validated.
        let grid = if dist <= world.cfg.sensor_range {
            world.cfg.grid.clone()
        } else {
            crate::aoa::GridSpec {
                phi_max: world.cfg.grid.phi_min
                    + world
                        .cfg
                        .grid
                        .phi_step
                        .min(world.cfg.grid.phi_max - world.cfg.grid.phi_min),
                ..world.cfg.grid.clone()
            }
        };
        let peaks = match compute_profile(&snaps, &grid) {
            Ok(profile) => {
                if world.cfg.capture_profiles && steps == 1 {
                    world.profiles.push(crate::sim::CapturedProfile {
                        tick: world.tick,
                        requester: anchor,
                        partner: mover,
                        profile: profile.clone(),
                    });
                }
                extract_peaks(&profile, world.cfg.n_peaks)
            }
            Err(_) => PeakSet {
                peaks: Vec::new(),
                n_kept: world.cfg.n_peaks,
            },
        };
        if dist <= world.cfg.sensor_range {
            // Park and gather: book the pending motion as a node first so the
            // measurement hangs off the mover's true position.
            if !node_created {
                world.advance_node(mover, traveled.max(world.cfg.step_length * 0.01));
                node_created = true;
            }
            let idx = world.record_inter_edge(mover, anchor);
            gathered += 1;
            if world.cfg.outlier_rejection && !peaks.is_empty() {
                let (reweighted, validation) =
                    reweight_edge(&world.graph.edges()[idx], &peaks, &world.cfg.aoa);
                world.graph.set_edge_weight(idx, reweighted.weight);
                world.validations[idx] = validation;
            }
        } else if !peaks.is_empty() && w > 0.0 {
            // Approach: convert the top peak to the world frame through the
            // mover's heading estimate and descend the edge cost.
            let est_now = mover_running_estimate(
                &est_start,
                &true_start,
                &world.agents[mover as usize].true_pose,
            );
            let world_peaks = peaks.rotated_azimuth(est_now.rotation.yaw());
            let p_est = Vector2::new(est_now.position.x, est_now.position.y);
            let guidance = build_guidance(&world_peaks, p_est, w, params.sigma_profile)?;
            let target = gradient_step(&guidance, p_est, w);
            traveled += world.move_true(mover, target - p_est, world.cfg.step_length);
        }

        // Rate update after moving; raise the bar while it is satisfied so
        // the mover keeps improving the link until enough edges exist.
        let rho_after = world.measure_rate(mover, anchor);
        if q_i <= rho_after {
            q_i = rho_after + params.epsilon;
        }
    }

    if !node_created && traveled > 0.0 {
        world.advance_node(mover, traveled);
    }

    world.joint_optimize(anchor, mover)?;
    let post_err = world
        .graph
        .trajectory_error(ErrorScope::RobotSince(anchor, anchor_window));
    world.agents[anchor as usize].q = world.cfg.q_default;

    Ok(RendezvousEvent {
        tick: world.tick,
        kind: "active",
        requester: anchor,
        partner: mover,
        w_history,
        steps,
        edges: gathered,
        pre_err,
        post_err,
        incomplete: gathered < params.kappa,
    })
}

/// The mover's dead-reckoned estimate during an episode: its estimate at
/// episode start composed with the motion since (segment noise is booked
/// when the node is created).
fn mover_running_estimate(
    est_start: &crate::geometry::Pose,
    true_start: &crate::geometry::Pose,
    true_now: &crate::geometry::Pose,
) -> crate::geometry::Pose {
    crate::geometry::compose(est_start, &relative_pose(true_start, true_now))
}
