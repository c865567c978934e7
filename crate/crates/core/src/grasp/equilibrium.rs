use nalgebra::{DMatrix, DVector, Vector3};

use super::{nnls, GraspError, RigidContact};

/// Sides of the linearized friction cone.
pub const PYRAMID_SIDES: usize = 8;

const FEASIBLE: f64 = 1e-6;
/// Row weight on prescribed normal forces. Kept moderate for conditioning;
/// the targets are shifted by the leftover error until it vanishes, so the
/// normals end up hard and an infeasible load shows up in the equilibrium
/// residual instead.
const NORMAL_WEIGHT: f64 = 10.0;
const NORMAL_PASSES: usize = 200;

/// Friction half-angle atan(mu).
pub fn friction_angle(mu: f64) -> f64 {
    mu.atan()
}

/// Whether a force pushing on a surface with outward normal `normal` lies
/// within the friction cone, by the angle between it and the inward normal.
pub fn in_friction_cone(force: &Vector3<f64>, normal: &Vector3<f64>, mu: f64) -> bool {
    let f = force.norm();
    if f == 0.0 {
        return true;
    }
    let inward = -normal;
    let angle = (inward.dot(force) / f).clamp(-1.0, 1.0).acos();
    angle <= friction_angle(mu) + 1e-9
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    pub feasible: bool,
    /// Force applied by each pad to the object, N.
    pub forces: Vec<Vector3<f64>>,
    /// |sum of contact forces + external force|, N.
    pub force_residual: f64,
    /// |sum of moments about the centre of mass + external moment|, N m.
    pub moment_residual: f64,
    /// Largest deviation from prescribed normal forces, N (0 when free).
    pub normal_residual: f64,
}

/// Tangent basis at a contact, the first axis along the tangential part of
/// `load` when it has one.
fn tangent_basis(push: &Vector3<f64>, load: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let lt = load - push * push.dot(load);
    let t1 = if lt.norm() > 1e-12 * load.norm().max(f64::MIN_POSITIVE) && lt.norm() > 0.0 {
        lt.normalize()
    } else {
        let k = push.iamin();
        let mut e = Vector3::zeros();
        e[k] = 1.0;
        push.cross(&e).normalize()
    };
    (t1, push.cross(&t1))
}

/// Contact forces balancing the external wrench `(force, moment)` (about the
/// centre of mass), each inside an inscribed 8-sided friction pyramid.
///
/// The pyramids are turned so one edge lies along the tangential part of the
/// load the contacts must carry, which makes the linearization exact for a
/// load in that direction. With `normals` given, the pushing component of
/// each contact force is held at the prescribed value.
///
/// Solved as non-negative least squares on the pyramid edge weights; the
/// result is feasible when all residuals are below 1e-6.
pub fn solve_wrench(
    contacts: &[RigidContact],
    mu: f64,
    force: &Vector3<f64>,
    moment: &Vector3<f64>,
    normals: Option<&[f64]>,
) -> Result<EquilibriumSolution, GraspError> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(GraspError::InvalidArgument("friction coefficient must be non-negative".into()));
    }
    if let Some(n) = normals {
        if n.len() != contacts.len() {
            return Err(GraspError::InvalidArgument("one prescribed normal force per contact required".into()));
        }
        if n.iter().any(|&f| !(f >= 0.0)) {
            return Err(GraspError::InvalidArgument("prescribed normal forces must be non-negative".into()));
        }
    }
    let k = contacts.len();
    if k == 0 {
        let fr = force.norm();
        let mr = moment.norm();
        return Ok(EquilibriumSolution {
            feasible: fr < FEASIBLE && mr < FEASIBLE,
            forces: vec![],
            force_residual: fr,
            moment_residual: mr,
            normal_residual: 0.0,
        });
    }
    let lever = contacts.iter().map(|c| c.position.norm()).fold(0.0, f64::max).max(1e-3);
    let rows = 6 + if normals.is_some() { k } else { 0 };
    let cols = PYRAMID_SIDES * k;
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    let load = -force;
    let mut generators = Vec::with_capacity(cols);
    for (i, c) in contacts.iter().enumerate() {
        let push = -c.normal;
        let (t1, t2) = tangent_basis(&push, &load);
        for j in 0..PYRAMID_SIDES {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / PYRAMID_SIDES as f64;
            let g = push + (t1 * phi.cos() + t2 * phi.sin()) * mu;
            let m = c.position.cross(&g) / lever;
            let col = PYRAMID_SIDES * i + j;
            for r in 0..3 {
                a[(r, col)] = g[r];
                a[(3 + r, col)] = m[r];
            }
            if normals.is_some() {
                a[(6 + i, col)] = NORMAL_WEIGHT;
            }
            generators.push(g);
        }
    }
    for r in 0..3 {
        b[r] = -force[r];
        b[3 + r] = -moment[r] / lever;
    }
    let alpha = match normals {
        None => nnls(&a, &b),
        Some(n) => {
            let scale = n.iter().fold(force.norm(), |m, &f| m.max(f)).max(1.0);
            let mut target = n.to_vec();
            let mut alpha = DVector::zeros(cols);
            for _ in 0..NORMAL_PASSES {
                for i in 0..k {
                    b[6 + i] = NORMAL_WEIGHT * target[i];
                }
                alpha = nnls(&a, &b);
                let mut worst: f64 = 0.0;
                for i in 0..k {
                    let got: f64 = alpha.rows(PYRAMID_SIDES * i, PYRAMID_SIDES).sum();
                    target[i] += n[i] - got;
                    worst = worst.max((n[i] - got).abs());
                }
                if worst < 1e-12 * scale {
                    break;
                }
            }
            alpha
        }
    };
    let forces: Vec<Vector3<f64>> = (0..k)
        .map(|i| (0..PYRAMID_SIDES).map(|j| generators[PYRAMID_SIDES * i + j] * alpha[PYRAMID_SIDES * i + j]).sum())
        .collect();
    let total: Vector3<f64> = forces.iter().sum();
    let torque: Vector3<f64> = contacts.iter().zip(&forces).map(|(c, f)| c.position.cross(f)).sum();
    let force_residual = (total + force).norm();
    let moment_residual = (torque + moment).norm();
    let normal_residual = match normals {
        Some(n) => contacts
            .iter()
            .zip(&forces)
            .zip(n)
            .map(|((c, f), &target)| (-c.normal.dot(f) - target).abs())
            .fold(0.0, f64::max),
        None => 0.0,
    };
    Ok(EquilibriumSolution {
        feasible: force_residual < FEASIBLE && moment_residual < FEASIBLE && normal_residual < FEASIBLE,
        forces,
        force_residual,
        moment_residual,
        normal_residual,
    })
}

/// Static equilibrium of an object of mass `mass` under gravity `g` held by
/// hard-finger point contacts with friction `mu`.
pub fn grasp_equilibrium(
    contacts: &[RigidContact],
    mu: f64,
    mass: f64,
    g: &Vector3<f64>,
) -> Result<EquilibriumSolution, GraspError> {
    solve_wrench(contacts, mu, &(g * mass), &Vector3::zeros(), None)
}
