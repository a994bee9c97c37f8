//! Rigid-body dynamics `M(q)·q̈ + h(q, q̇) = τ` of the arm-plus-hammer chain.
//!
//! Links are uniform rods; the hammer head is a point mass and the handle is
//! massless.

use nalgebra::{Matrix3, Vector3};

use super::kinematics::{keypoint_jacobian, point_bias_acceleration, point_position, BodyPoint};
use super::{SimConfig, Vec2, NUM_JOINTS};

fn bodies(cfg: &SimConfig) -> [(BodyPoint, f64); NUM_JOINTS + 1] {
    [
        (BodyPoint::LinkCom(0), cfg.link_masses[0]),
        (BodyPoint::LinkCom(1), cfg.link_masses[1]),
        (BodyPoint::LinkCom(2), cfg.link_masses[2]),
        (BodyPoint::Head, cfg.hammer_head_mass),
    ]
}

fn rod_inertia(cfg: &SimConfig, k: usize) -> f64 {
    cfg.link_masses[k] * cfg.link_lengths[k] * cfg.link_lengths[k] / 12.0
}

pub fn mass_matrix(q: &[f64; NUM_JOINTS], cfg: &SimConfig) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for (point, mass) in bodies(cfg) {
        let j = keypoint_jacobian(q, cfg, point);
        m += mass * j.transpose() * j;
    }
    // Rotational part: link k turns with every joint i ≤ k.
    for k in 0..NUM_JOINTS {
        let inertia = rod_inertia(cfg, k);
        for i in 0..=k {
            for j in 0..=k {
                m[(i, j)] += inertia;
            }
        }
    }
    m
}

/// Coriolis, centrifugal and gravity terms.
pub fn bias_forces(q: &[f64; NUM_JOINTS], qdot: &[f64; NUM_JOINTS], cfg: &SimConfig) -> Vector3<f64> {
    let gravity = Vec2::new(0.0, -cfg.gravity);
    let mut h = Vector3::zeros();
    for (point, mass) in bodies(cfg) {
        let j = keypoint_jacobian(q, cfg, point);
        let a = point_bias_acceleration(q, qdot, cfg, point);
        h += mass * j.transpose() * (a - gravity);
    }
    h
}

/// Kinetic plus gravitational potential energy (potential zero at `y = 0`).
pub fn mechanical_energy(q: &[f64; NUM_JOINTS], qdot: &[f64; NUM_JOINTS], cfg: &SimConfig) -> f64 {
    let v = Vector3::from_column_slice(qdot);
    let kinetic = 0.5 * v.dot(&(mass_matrix(q, cfg) * v));
    let potential: f64 = bodies(cfg)
        .iter()
        .map(|&(point, mass)| mass * cfg.gravity * point_position(q, cfg, point).y)
        .sum();
    kinetic + potential
}

/// Joint accelerations for applied joint torques.
pub fn forward_dynamics(
    q: &[f64; NUM_JOINTS],
    qdot: &[f64; NUM_JOINTS],
    tau: &[f64; NUM_JOINTS],
    cfg: &SimConfig,
) -> [f64; NUM_JOINTS] {
    let m = mass_matrix(q, cfg);
    let rhs = Vector3::from_column_slice(tau)
        - bias_forces(q, qdot, cfg)
        - Vector3::new(
            cfg.joint_damping[0] * qdot[0],
            cfg.joint_damping[1] * qdot[1],
            cfg.joint_damping[2] * qdot[2],
        );
    let qdd = m
        .cholesky()
        .expect("mass matrix is positive definite")
        .solve(&rhs);
    [qdd[0], qdd[1], qdd[2]]
}
