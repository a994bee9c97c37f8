use nalgebra::{Matrix2x3, Matrix3, Vector3};

use super::{SimConfig, Vec2, NUM_JOINTS};

/// Named material points on the arm and tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyPoint {
    /// Second joint (end of link 0).
    Elbow,
    /// Third joint (end of link 1).
    Wrist,
    /// End effector; the hammer grasp point `x_g`.
    Grasp,
    /// Auxiliary handle point `x_m` (handle midpoint).
    Aux,
    /// Hammer head `x_f`.
    Head,
    /// Centre of mass of link `k`.
    LinkCom(usize),
}

/// One `coef · u(θ_link + offset)` summand of a point position.
#[derive(Debug, Clone, Copy)]
struct Term {
    coef: f64,
    link: usize,
    offset: f64,
}

const NO_TERM: Term = Term {
    coef: 0.0,
    link: 0,
    offset: 0.0,
};

#[derive(Debug, Clone, Copy)]
struct Chain {
    terms: [Term; 4],
    len: usize,
}

impl Chain {
    fn new(cfg: &SimConfig, point: BodyPoint) -> Self {
        let l = cfg.link_lengths;
        let mut terms = [NO_TERM; 4];
        let mut len = 0;
        let mut push = |coef: f64, link: usize, offset: f64| {
            terms[len] = Term { coef, link, offset };
            len += 1;
        };
        let full_links = |push: &mut dyn FnMut(f64, usize, f64), n: usize| {
            for (k, &lk) in l.iter().enumerate().take(n) {
                push(lk, k, 0.0);
            }
        };
        match point {
            BodyPoint::Elbow => full_links(&mut push, 1),
            BodyPoint::Wrist => full_links(&mut push, 2),
            BodyPoint::Grasp => full_links(&mut push, 3),
            BodyPoint::Aux => {
                full_links(&mut push, 3);
                push(0.5 * cfg.hammer_length, 2, cfg.grip_angle);
            }
            BodyPoint::Head => {
                full_links(&mut push, 3);
                push(cfg.hammer_length, 2, cfg.grip_angle);
            }
            BodyPoint::LinkCom(k) => {
                assert!(k < NUM_JOINTS, "link index {k}");
                full_links(&mut push, k);
                push(0.5 * l[k], k, 0.0);
            }
        }
        Self { terms, len }
    }

    fn terms(&self) -> &[Term] {
        &self.terms[..self.len]
    }
}

pub fn absolute_angles(q: &[f64; NUM_JOINTS]) -> [f64; NUM_JOINTS] {
    [q[0], q[0] + q[1], q[0] + q[1] + q[2]]
}

/// Absolute angle of the hammer handle.
pub fn tool_angle(q: &[f64; NUM_JOINTS], cfg: &SimConfig) -> f64 {
    absolute_angles(q)[2] + cfg.grip_angle
}

#[inline]
fn unit(a: f64) -> Vec2 {
    let (s, c) = a.sin_cos();
    Vec2::new(c, s)
}

#[inline]
fn unit_perp(a: f64) -> Vec2 {
    let (s, c) = a.sin_cos();
    Vec2::new(-s, c)
}

pub fn point_position(q: &[f64; NUM_JOINTS], cfg: &SimConfig, point: BodyPoint) -> Vec2 {
    let th = absolute_angles(q);
    Chain::new(cfg, point)
        .terms()
        .iter()
        .fold(cfg.base(), |p, t| p + t.coef * unit(th[t.link] + t.offset))
}

/// `∂p/∂q` for a body point.
pub fn keypoint_jacobian(q: &[f64; NUM_JOINTS], cfg: &SimConfig, point: BodyPoint) -> Matrix2x3<f64> {
    let th = absolute_angles(q);
    let mut jac = Matrix2x3::zeros();
    for t in Chain::new(cfg, point).terms() {
        let d = t.coef * unit_perp(th[t.link] + t.offset);
        // Absolute angle `link` depends on every joint up to and including it.
        for i in 0..=t.link {
            jac[(0, i)] += d.x;
            jac[(1, i)] += d.y;
        }
    }
    jac
}

/// Velocity-product acceleration `J̇·q̇` of a body point.
pub fn point_bias_acceleration(
    q: &[f64; NUM_JOINTS],
    qdot: &[f64; NUM_JOINTS],
    cfg: &SimConfig,
    point: BodyPoint,
) -> Vec2 {
    let th = absolute_angles(q);
    let w = absolute_angles(qdot);
    Chain::new(cfg, point)
        .terms()
        .iter()
        .fold(Vec2::zeros(), |a, t| {
            a - t.coef * w[t.link] * w[t.link] * unit(th[t.link] + t.offset)
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPoints {
    pub base: Vec2,
    pub elbow: Vec2,
    pub wrist: Vec2,
    pub grasp: Vec2,
    pub aux: Vec2,
    pub head: Vec2,
}

impl ArmPoints {
    /// Polyline segments: three links then the handle.
    pub fn segments(&self) -> [(Vec2, Vec2); 4] {
        [
            (self.base, self.elbow),
            (self.elbow, self.wrist),
            (self.wrist, self.grasp),
            (self.grasp, self.head),
        ]
    }
}

pub fn arm_points(q: &[f64; NUM_JOINTS], cfg: &SimConfig) -> ArmPoints {
    let th = absolute_angles(q);
    let l = cfg.link_lengths;
    let base = cfg.base();
    let elbow = base + l[0] * unit(th[0]);
    let wrist = elbow + l[1] * unit(th[1]);
    let grasp = wrist + l[2] * unit(th[2]);
    let handle = unit(th[2] + cfg.grip_angle);
    ArmPoints {
        base,
        elbow,
        wrist,
        grasp,
        aux: grasp + 0.5 * cfg.hammer_length * handle,
        head: grasp + cfg.hammer_length * handle,
    }
}

/// Tool keypoints and end-effector orientation for a joint configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolPose {
    pub x_g: Vec2,
    pub x_f: Vec2,
    pub x_m: Vec2,
    pub ee_orientation: f64,
}

pub fn forward_kinematics(q: &[f64; NUM_JOINTS], cfg: &SimConfig) -> ToolPose {
    let pts = arm_points(q, cfg);
    ToolPose {
        x_g: pts.grasp,
        x_f: pts.head,
        x_m: pts.aux,
        ee_orientation: absolute_angles(q)[2],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IkTarget {
    Point {
        point: BodyPoint,
        target: Vec2,
        weight: f64,
    },
    /// Absolute handle angle.
    ToolAngle { target: f64, weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub q: [f64; NUM_JOINTS],
    /// Weighted residual norm at the returned configuration.
    pub residual: f64,
    pub iterations: usize,
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r <= -std::f64::consts::PI {
        r + two_pi
    } else {
        r
    }
}

/// Damped least squares: `Δq = (JᵀJ + λ²I)⁻¹ Jᵀ e`, iterated from `init`
/// until the step falls below `tol`. With more residual rows than joints the
/// fixed point is the weighted least-squares fit.
pub fn ik_damped_least_squares(
    cfg: &SimConfig,
    targets: &[IkTarget],
    init: [f64; NUM_JOINTS],
    damping: f64,
    max_iters: usize,
    tol: f64,
) -> IkSolution {
    let mut q = init;
    let residual_of = |q: &[f64; NUM_JOINTS]| -> f64 {
        targets
            .iter()
            .map(|t| match *t {
                IkTarget::Point {
                    point,
                    target,
                    weight,
                } => weight * weight * (target - point_position(q, cfg, point)).norm_squared(),
                IkTarget::ToolAngle { target, weight } => {
                    let e = wrap_angle(target - tool_angle(q, cfg));
                    weight * weight * e * e
                }
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jte = Vector3::<f64>::zeros();
        for t in targets {
            match *t {
                IkTarget::Point {
                    point,
                    target,
                    weight,
                } => {
                    let j = keypoint_jacobian(&q, cfg, point) * weight;
                    let e = (target - point_position(&q, cfg, point)) * weight;
                    jtj += j.transpose() * j;
                    jte += j.transpose() * e;
                }
                IkTarget::ToolAngle { target, weight } => {
                    let e = wrap_angle(target - tool_angle(&q, cfg)) * weight;
                    let j = Vector3::new(weight, weight, weight);
                    jtj += j * j.transpose();
                    jte += j * e;
                }
            }
        }
        jtj += Matrix3::identity() * (damping * damping);
        let Some(dq) = jtj.cholesky().map(|c| c.solve(&jte)) else {
            break;
        };
        for (qi, d) in q.iter_mut().zip(dq.iter()) {
            *qi += d;
        }
        if dq.norm() < tol {
            break;
        }
    }
    IkSolution {
        residual: residual_of(&q),
        q,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_base_cfg() -> SimConfig {
        SimConfig {
            link_lengths: [0.3, 0.3, 0.15],
            base_position: [0.0, 0.0],
            ..SimConfig::default()
        }
    }

    #[test]
    fn extended_chain_reaches_sum_of_lengths() {
        let cfg = unit_base_cfg();
        let pose = forward_kinematics(&[0.0; 3], &cfg);
        assert!((pose.x_g - Vec2::new(0.75, 0.0)).norm() < 1e-15);
        assert_eq!(pose.ee_orientation, 0.0);
    }

    #[test]
    fn hammer_is_rigidly_attached() {
        let cfg = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let q = [
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ];
            let p = forward_kinematics(&q, &cfg);
            assert!(((p.x_f - p.x_g).norm() - cfg.hammer_length).abs() < 1e-12);
            assert!(((p.x_m - p.x_g).norm() - 0.5 * cfg.hammer_length).abs() < 1e-12);
            assert!(((p.x_f - p.x_m).norm() - 0.5 * cfg.hammer_length).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_and_direct_positions_agree() {
        let cfg = SimConfig::default();
        let q = [0.4, -1.1, 0.7];
        let pts = arm_points(&q, &cfg);
        assert!((point_position(&q, &cfg, BodyPoint::Head) - pts.head).norm() < 1e-14);
        assert!((point_position(&q, &cfg, BodyPoint::Aux) - pts.aux).norm() < 1e-14);
        assert!((point_position(&q, &cfg, BodyPoint::Wrist) - pts.wrist).norm() < 1e-14);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let cfg = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = 1e-6;
        for _ in 0..200 {
            let q = [
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ];
            for point in [
                BodyPoint::Elbow,
                BodyPoint::Wrist,
                BodyPoint::Grasp,
                BodyPoint::Aux,
                BodyPoint::Head,
                BodyPoint::LinkCom(1),
            ] {
                let jac = keypoint_jacobian(&q, &cfg, point);
                for i in 0..3 {
                    let mut qp = q;
                    qp[i] += h;
                    let mut qm = q;
                    qm[i] -= h;
                    let fd = (point_position(&qp, &cfg, point) - point_position(&qm, &cfg, point))
                        / (2.0 * h);
                    let col = jac.column(i);
                    let err = (fd - col).norm() / col.norm().max(1e-3);
                    assert!(err <= 1e-5, "{point:?} joint {i}: {err}");
                }
            }
        }
    }

    #[test]
    fn bias_acceleration_matches_second_difference() {
        // With constant joint velocity, p̈ along the path is exactly J̇q̇.
        let cfg = SimConfig::default();
        let q = [0.3, -0.8, 0.5];
        let qd = [1.2, -0.7, 2.0];
        let h = 1e-4;
        let at = |s: f64| {
            let qs = [q[0] + s * qd[0], q[1] + s * qd[1], q[2] + s * qd[2]];
            point_position(&qs, &cfg, BodyPoint::Head)
        };
        let fd = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
        let a = point_bias_acceleration(&q, &qd, &cfg, BodyPoint::Head);
        assert!((fd - a).norm() < 1e-5 * a.norm().max(1.0));
    }

    #[test]
    fn home_pose_holds_gripper_vertical() {
        let cfg = SimConfig::default();
        let pose = forward_kinematics(&cfg.home_pose, &cfg);
        assert!((pose.ee_orientation + std::f64::consts::FRAC_PI_2).abs() < 1e-3);
        assert!(pose.x_f.y > cfg.table_height + 0.2);
    }

    #[test]
    fn ik_recovers_configuration() {
        let cfg = SimConfig::default();
        let truth = [1.4, -1.8, -1.0];
        let pts = arm_points(&truth, &cfg);
        let targets = [
            IkTarget::Point {
                point: BodyPoint::Elbow,
                target: pts.elbow,
                weight: 1.0,
            },
            IkTarget::Point {
                point: BodyPoint::Grasp,
                target: pts.grasp,
                weight: 1.0,
            },
            IkTarget::Point {
                point: BodyPoint::Head,
                target: pts.head,
                weight: 1.0,
            },
        ];
        let sol = ik_damped_least_squares(&cfg, &targets, cfg.home_pose, 1e-3, 200, 1e-12);
        for i in 0..3 {
            assert!((sol.q[i] - truth[i]).abs() < 1e-8);
        }
        assert!(sol.residual < 1e-10);
    }

    #[test]
    fn angle_wrapping() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }
}
