//! Elliptic projections with a nudging term:
//! `κ(∇u_h, ∇v) + μ(I_H u_h, I_H v) = κ(∇u, ∇v) + μ(I_H u, I_H v)`,
//! and the analogous Stokes form with a divergence constraint.

use super::exact::{ScalarField, VectorField};
use super::scalar::{PinSource, PinnedOperator};
use super::stokes::SaddleSystem;
use crate::assembly::{gradient_load, stiffness_matrix};
use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::linalg::SparseMatrix;
use crate::observation::{NudgingMode, ObservationOperator};

/// The function being projected.
pub enum ProjectionTarget<'a> {
    Scalar(&'a dyn ScalarField),
    Vector(&'a dyn VectorField),
    /// A member of the space itself.
    Discrete(&'a [f64]),
}

struct Assembled {
    matrix: SparseMatrix,
    rhs: Vec<f64>,
    /// Target values at every boundary DOF (blocked index, value).
    boundary: Vec<(usize, f64)>,
}

fn assemble(space: &FeSpace, obs: Option<&ObservationOperator>, coeff: f64, target: &ProjectionTarget) -> Result<Assembled> {
    let comps = space.components();
    let a = stiffness_matrix(space, coeff)?;
    let mut rhs = match target {
        ProjectionTarget::Scalar(f) if comps == 1 => gradient_load(space, |x, y| [f.grad(x, y, 0.0); 2], coeff)?,
        ProjectionTarget::Vector(f) if comps == 2 => gradient_load(space, |x, y| f.jacobian(x, y, 0.0), coeff)?,
        ProjectionTarget::Discrete(u) => a.matvec(u)?,
        _ => return Err(Error::InvalidInput("projection target does not match the space".into())),
    };
    let mut matrix = a;
    if let Some(obs) = obs {
        if obs.mode() == NudgingMode::Direct {
            return Err(Error::InfiniteNudging);
        }
        if obs.mu() > 0.0 {
            let averages = match target {
                ProjectionTarget::Scalar(f) => obs.averages_of(|x, y, _| [f.value(x, y, 0.0); 2], 0.0)?,
                ProjectionTarget::Vector(f) => obs.averages_of(|x, y, _| f.value(x, y, 0.0), 0.0)?,
                ProjectionTarget::Discrete(u) => obs.apply_ih(u)?,
            };
            let (n, r) = obs.nudging_contribution(&averages)?;
            matrix = SparseMatrix::linear_combination(&[(1.0, &matrix), (1.0, &n)])?;
            rhs.iter_mut().zip(&r).for_each(|(x, y)| *x += y);
        }
    }
    let ns = space.n_scalar_dofs();
    let mut boundary = std::collections::BTreeMap::new();
    for m in space.markers() {
        for &d in space.boundary_dofs(m)? {
            let [x, y] = space.dof_coords()[d];
            for comp in 0..comps {
                let v = match target {
                    ProjectionTarget::Scalar(f) => f.value(x, y, 0.0),
                    ProjectionTarget::Vector(f) => f.value(x, y, 0.0)[comp],
                    ProjectionTarget::Discrete(u) => u[comp * ns + d],
                };
                boundary.insert(comp * ns + d, v);
            }
        }
    }
    Ok(Assembled {
        matrix,
        rhs,
        boundary: boundary.into_iter().collect(),
    })
}

fn pinned(boundary: &[(usize, f64)]) -> (std::collections::BTreeMap<usize, PinSource>, Vec<f64>) {
    let pins = boundary.iter().map(|&(d, v)| (d, PinSource::Fixed(v))).collect();
    (pins, boundary.iter().map(|&(_, v)| v).collect())
}

/// CDA Poisson projection with the target's own boundary values.
/// `obs = None` gives the Ritz projection.
pub fn cda_poisson_projection(
    space: &FeSpace,
    obs: Option<&ObservationOperator>,
    kappa: f64,
    target: ProjectionTarget,
) -> Result<Vec<f64>> {
    if space.components() != 1 {
        return Err(Error::InvalidInput("Poisson projection needs a scalar space".into()));
    }
    let sys = assemble(space, obs, kappa, &target)?;
    let (pins, values) = pinned(&sys.boundary);
    PinnedOperator::new(&sys.matrix, &pins)?.solve(sys.rhs, &values)
}

/// CDA Stokes projection of a divergence-free target, with mean-zero
/// pressure. Returns `(velocity, pressure)`.
pub fn cda_stokes_projection(
    vspace: &FeSpace,
    pspace: &FeSpace,
    obs: Option<&ObservationOperator>,
    nu: f64,
    target: ProjectionTarget,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sys = assemble(vspace, obs, nu, &target)?;
    let saddle = SaddleSystem::new(vspace, pspace, true)?;
    let (pins, values) = pinned(&sys.boundary);
    let op = PinnedOperator::new(&saddle.assemble(&sys.matrix)?, &pins)?;
    let x = op.solve(saddle.extend_rhs(sys.rhs), &values)?;
    Ok(saddle.split(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::exact::Rotation;
    use crate::mesh::{Mesh, Rect};
    use crate::observation::CoarseGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn obs_for(space: &FeSpace, mu: f64) -> Option<ObservationOperator> {
        (mu > 0.0).then(|| {
            let grid = Arc::new(CoarseGrid::new(space.mesh(), 0.25).unwrap());
            ObservationOperator::new(space, grid, mu, NudgingMode::Galerkin).unwrap()
        })
    }

    #[test]
    fn space_members_are_reproduced() {
        let mesh = Arc::new(Mesh::uniform_rect(8, 8, Rect::UNIT).unwrap());
        let space = FeSpace::new(mesh, 2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u: Vec<f64> = (0..space.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for mu in [0.0, 1.0, 1e8] {
            let obs = obs_for(&space, mu);
            let p = cda_poisson_projection(&space, obs.as_ref(), 1.0, ProjectionTarget::Discrete(&u)).unwrap();
            let err = p.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "mu {mu}: {err}");
        }
    }

    #[test]
    fn rotation_is_reproduced_by_the_stokes_projection() {
        let mesh = Arc::new(Mesh::uniform_rect(4, 4, Rect::UNIT).unwrap());
        let v = FeSpace::new(mesh.clone(), 2, 2).unwrap();
        let p = FeSpace::new(mesh, 1, 1).unwrap();
        let exact = v.interpolate_vector(|x, y, _| [-y, x], 0.0).unwrap();
        for mu in [0.0, 1.0, 1e8] {
            let obs = obs_for(&v, mu);
            let (u, _) = cda_stokes_projection(&v, &p, obs.as_ref(), 1.0, ProjectionTarget::Vector(&Rotation)).unwrap();
            let err = u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "mu {mu}: {err}");
        }
    }

    #[test]
    fn mismatched_target_rejected() {
        let mesh = Arc::new(Mesh::uniform_rect(2, 2, Rect::UNIT).unwrap());
        let s = FeSpace::new(mesh, 1, 1).unwrap();
        assert!(cda_poisson_projection(&s, None, 1.0, ProjectionTarget::Vector(&Rotation)).is_err());
    }
}
