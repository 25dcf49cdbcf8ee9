use super::{FeError, FeFunction, FeSpace, FieldKind, QuadratureRule, VectorFunction};
use crate::assembly::{assemble_real, DofSet, FormKind};
use crate::fespace::ElementGeometry;
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, PrimalPreconditioner, SchurPreconditioner, SchurSolver, SolverMethod, SolverReport};
use std::sync::Arc;

/// Field to project. Pointwise sources supply the Jacobian
/// `jac[i][j] = ∂A_i/∂x_j`.
pub enum RitzSource<'a, T: Real> {
    Pointwise(&'a dyn Fn([T; 3]) -> [[T; 3]; 3]),
    Discrete(&'a VectorFunction<T>),
}

/// `D(u, v) = (∇×u, ∇×v) + (∇·u, ∇·v)` on the free dofs of a vector space,
/// assembled directly from the two forms (full component coupling).
pub fn d_form_matrix_coupled<T: Real>(space: &FeSpace<T>) -> Result<CsrMatrix<T>, FeError> {
    let curl = assemble_real(FormKind::CurlCurl, space, space, DofSet::Free).map_err(shape)?;
    let div = assemble_real(FormKind::DivDiv, space, space, DofSet::Free).map_err(shape)?;
    Ok(CsrMatrix::linear_combination(&[(T::one(), &curl), (T::one(), &div)])?)
}

/// `D` on the free dofs of the tangential space of the unit cube.
///
/// For fields with vanishing tangential trace on flat faces,
/// `‖∇×u‖² + ‖∇·u‖² = ‖∇u‖²`, so `D` coincides with the component-wise
/// vector Laplacian form, which has a block-diagonal pattern.
pub fn d_form_matrix<T: Real>(space: &FeSpace<T>) -> Result<CsrMatrix<T>, FeError> {
    if space.kind() != FieldKind::Vector3 {
        return Err(FeError::Shape("D form needs a vector space".into()));
    }
    assemble_real(FormKind::VectorStiffness, space, space, DofSet::Free).map_err(shape)
}

fn shape(e: crate::assembly::AssemblyError) -> FeError {
    match e {
        crate::assembly::AssemblyError::Matrix(s) => FeError::Solver(s),
        other => FeError::Shape(other.to_string()),
    }
}

/// Right-hand side `D(A, v)` over all dofs of the vector space.
fn d_load<T: Real>(space: &FeSpace<T>, jac: &dyn Fn([T; 3]) -> [[T; 3]; 3]) -> Vec<T> {
    let rule = QuadratureRule::degree6();
    let tab = space.element().tabulate(&rule);
    let mesh = space.mesh();
    let n = space.nodes_per_element();
    let mut grads = vec![[T::zero(); 3]; n];
    let mut out = vec![T::zero(); space.num_dofs()];
    for t in 0..mesh.num_tets() {
        let geo = ElementGeometry::new(mesh, t);
        let scale = geo.weight_scale();
        let nodes = space.element_nodes(t);
        for (q, p) in rule.points().iter().enumerate() {
            let j = jac(geo.point(p));
            let curl = [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]];
            let div = j[0][0] + j[1][1] + j[2][2];
            let w = rule.weights()[q] * scale;
            tab.gradients(q, &geo, &mut grads);
            for (a, &node) in nodes.iter().enumerate() {
                let g = grads[a];
                // curl(N e_d) = ∇N × e_d
                let c = [
                    [T::zero(), -g[2], g[1]],
                    [g[2], T::zero(), -g[0]],
                    [-g[1], g[0], T::zero()],
                ];
                for d in 0..3 {
                    let cd = [c[0][d], c[1][d], c[2][d]];
                    let v = curl[0] * cd[0] + curl[1] * cd[1] + curl[2] * cd[2] + div * g[d];
                    out[3 * node + d] += w * v;
                }
            }
        }
    }
    out
}

/// Projection `π_h A` onto the tangential quadratic space with
/// `D(A − π_h A, v) = 0` for discretely divergence-free `v`, realized by the
/// saddle system with multipliers in `mult`. Holds the factored blocks so
/// several fields can be projected on one mesh.
pub struct RitzProjector<T: Real> {
    space: Arc<FeSpace<T>>,
    d: CsrMatrix<T>,
    solver: SchurSolver<T>,
}

impl<T: Real> RitzProjector<T> {
    pub fn new(space: &Arc<FeSpace<T>>, mult: &FeSpace<T>, method: SolverMethod) -> Result<Self, FeError> {
        if space.kind() != FieldKind::Vector3 || mult.components() != 1 || !space.same_mesh(mult) {
            return Err(FeError::Shape(
                "Ritz projection needs a vector space and a scalar multiplier space".into(),
            ));
        }
        let d = d_form_matrix(space)?;
        let b = assemble_real(FormKind::DivPairing, space, mult, DofSet::Free).map_err(shape)?;
        let mp = assemble_real(FormKind::ScalarMass, mult, mult, DofSet::Free).map_err(shape)?;
        let primal = match method {
            SolverMethod::Direct => PrimalPreconditioner::factor(d.clone())?,
            SolverMethod::Iterative => PrimalPreconditioner::jacobi(&d),
        };
        let schur = SchurPreconditioner::new(T::zero(), T::one(), None, mp)?;
        Ok(RitzProjector {
            space: space.clone(),
            d,
            solver: SchurSolver::new(b, primal, schur)?,
        })
    }

    pub fn project(&self, source: RitzSource<'_, T>, tol: f64) -> Result<(VectorFunction<T>, SolverReport), FeError> {
        let space = &self.space;
        let rhs_full = match source {
            RitzSource::Pointwise(jac) => d_load(space, jac),
            RitzSource::Discrete(f) => {
                if !Arc::ptr_eq(f.space(), space) {
                    return Err(FeError::Shape("source field lives on another space".into()));
                }
                let curl = assemble_real(FormKind::CurlCurl, space, space, DofSet::All).map_err(shape)?;
                let div = assemble_real(FormKind::DivDiv, space, space, DofSet::All).map_err(shape)?;
                let mut r = curl.mul_vec(f.coeffs());
                for (ri, di) in r.iter_mut().zip(div.mul_vec(f.coeffs())) {
                    *ri += di;
                }
                r
            }
        };
        let rhs = space.restrict(&rhs_full);
        let g = vec![T::zero(); self.solver.num_multipliers()];
        let (u, _p, report) = self.solver.solve(&self.d, &rhs, &g, tol)?;
        Ok((FeFunction::from_free(space.clone(), &u)?, report))
    }
}

/// One-off projection; see [`RitzProjector`].
pub fn ritz_project_vector<T: Real>(
    space: &Arc<FeSpace<T>>,
    mult: &FeSpace<T>,
    source: RitzSource<'_, T>,
    method: SolverMethod,
    tol: f64,
) -> Result<(VectorFunction<T>, SolverReport), FeError> {
    RitzProjector::new(space, mult, method)?.project(source, tol)
}
