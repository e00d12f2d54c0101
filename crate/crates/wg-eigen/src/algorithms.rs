//! The three eigensolver drivers: the direct WG eigensolve, and the two-grid
//! and two-space corrections that trade most of the fine eigensolve for one
//! fine linear solve plus a Rayleigh quotient.
//!
//! Two-grid: solve the eigenproblem on a coarse mesh, refine, solve
//! `a_s(u~, v) = lambda_H b_w(u_H, v)` on the fine mesh, and return the
//! Rayleigh quotient of the correction. Two-space does the same on one mesh
//! with a low-degree eigensolve feeding a high-degree correction.

use std::sync::Arc;
use std::time::Instant;

use crate::assembly::{assemble_cross_mass, AssembledForms};
use crate::error::AlgorithmError;
use crate::mesh::Mesh;
use crate::solver::{eigensolve, EigenMode, PencilEigen, SpdSolver};
use crate::space::{WeakFunction, WgSpace};

/// Default algebraic tolerance; far below the discretization error of every
/// mesh this crate is meant for.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Guard eigenpairs requested beyond the largest wanted index, so that a
/// cluster straddling the last index is fully resolved.
const CLUSTER_SLACK: usize = 3;

/// Eigenpairs of one WG eigensolve, ascending, with `||u||_b = 1`.
pub struct EigenResult {
    pub values: Vec<f64>,
    pub eigenfunctions: Vec<WeakFunction>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Cluster ids; eigenvalues closer than the solver's relative gap share one.
    pub clusters: Vec<usize>,
}

impl EigenResult {
    fn from_pencil(space: &Arc<WgSpace>, pencil: PencilEigen) -> Result<Self, AlgorithmError> {
        let eigenfunctions = pencil
            .vectors
            .into_iter()
            .map(|v| WeakFunction::from_coeffs(space.clone(), v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            values: pencil.values,
            eigenfunctions,
            residuals: pencil.residuals,
            iterations: pencil.iterations,
            clusters: pencil.clusters,
        })
    }
}

/// A direct WG eigensolve together with the space and forms it ran on.
pub struct DirectSolve {
    pub space: Arc<WgSpace>,
    pub forms: AssembledForms,
    pub eigen: EigenResult,
    pub wall_time: f64,
}

/// Assembles the forms of degree `k` with the given stabilization exponent
/// and returns the `nev` smallest eigenpairs.
pub fn direct_wg(
    mesh: &Arc<Mesh>,
    k: usize,
    epsilon: f64,
    nev: usize,
    tol: f64,
) -> Result<DirectSolve, AlgorithmError> {
    let start = Instant::now();
    let space = WgSpace::new(mesh.clone(), k)?;
    let forms = AssembledForms::new(&space, epsilon)?;
    let pencil = eigensolve(
        forms.a(),
        forms.b(),
        space.num_interior_dofs(),
        nev,
        tol,
        EigenMode::CondensedShiftInvert,
    )?;
    let eigen = EigenResult::from_pencil(&space, pencil)?;
    Ok(DirectSolve {
        space,
        forms,
        eigen,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Per-index timing breakdown of a correction.
#[derive(Clone, Copy, Debug, Default)]
pub struct CorrectionTimings {
    /// Base (coarse or low-degree) assembly plus eigensolve, shared by all
    /// indices of a run.
    pub coarse_solve: f64,
    /// Cross-mass transfer of the base eigenfunction.
    pub transfer: f64,
    /// Fine triangular solve (the shared factorization time is reported in
    /// [`CorrectionRun::fine_setup_time`]).
    pub fine_solve: f64,
    /// Rayleigh quotient evaluation.
    pub quotient: f64,
}

/// One corrected eigenpair.
pub struct AcceleratedResult {
    /// 1-based eigenvalue index this correction belongs to.
    pub index: usize,
    /// The base eigenvalue fed into the correction.
    pub base_value: f64,
    /// The Rayleigh quotient of the corrected eigenfunction.
    pub value: f64,
    /// The corrected eigenfunction, renormalized to `||u||_b = 1` for
    /// reporting (the quotient is computed before renormalization).
    pub eigenfunction: WeakFunction,
    pub timings: CorrectionTimings,
}

/// A full two-grid or two-space run: the base eigensolve plus one corrected
/// pair per requested index, sharing the fine factorization.
pub struct CorrectionRun {
    pub base_space: Arc<WgSpace>,
    pub base_eigen: EigenResult,
    pub fine_space: Arc<WgSpace>,
    pub fine_forms: AssembledForms,
    pub results: Vec<AcceleratedResult>,
    pub coarse_time: f64,
    /// Fine assembly plus factorization, shared by all indices.
    pub fine_setup_time: f64,
    pub total_time: f64,
}

/// `u^T A u / u^T B u`, the Rayleigh quotient in the assembled forms.
pub fn rayleigh_quotient(forms: &AssembledForms, u: &WeakFunction) -> Result<f64, AlgorithmError> {
    let denom = forms.b_quad(u.coeffs());
    if denom <= 0.0 {
        return Err(AlgorithmError::DegenerateCorrection);
    }
    Ok(forms.a_quad(u.coeffs()) / denom)
}

/// Step 2 and 3 of the correction algorithms: one fine linear solve against
/// the transferred base eigenpair, then the Rayleigh quotient. Exposed so the
/// same-space fixed point can be exercised directly.
pub fn correct_eigenpair(
    base_value: f64,
    base_function: &WeakFunction,
    fine_space: &Arc<WgSpace>,
    fine_forms: &AssembledForms,
    fine_solver: &SpdSolver,
    tol: f64,
) -> Result<(f64, WeakFunction, CorrectionTimings), AlgorithmError> {
    let mut timings = CorrectionTimings::default();

    let t0 = Instant::now();
    let mut rhs = assemble_cross_mass(base_function, fine_space)?;
    rhs *= base_value;
    timings.transfer = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let corrected = fine_solver.solve(&rhs, tol)?;
    timings.fine_solve = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let denom = fine_forms.b_quad(&corrected);
    if !denom.is_finite() || denom <= 0.0 {
        return Err(AlgorithmError::DegenerateCorrection);
    }
    let value = fine_forms.a_quad(&corrected) / denom;
    timings.quotient = t0.elapsed().as_secs_f64();

    let normalized = corrected / denom.sqrt();
    let u = WeakFunction::from_coeffs(fine_space.clone(), normalized)?;
    Ok((value, u, timings))
}

fn correction_run(
    base_space: Arc<WgSpace>,
    fine_space: Arc<WgSpace>,
    epsilon: f64,
    indices: &[usize],
    tol: f64,
) -> Result<CorrectionRun, AlgorithmError> {
    let total_start = Instant::now();
    let max_index = *indices.iter().max().ok_or(AlgorithmError::ZeroIndex)?;
    if indices.contains(&0) {
        return Err(AlgorithmError::ZeroIndex);
    }

    // Step 1: base eigensolve with cluster slack.
    let t0 = Instant::now();
    let base_forms = AssembledForms::new(&base_space, epsilon)?;
    let nev = (max_index + CLUSTER_SLACK).min(base_space.num_interior_dofs());
    let pencil = eigensolve(
        base_forms.a(),
        base_forms.b(),
        base_space.num_interior_dofs(),
        nev,
        tol,
        EigenMode::CondensedShiftInvert,
    )?;
    let base_eigen = EigenResult::from_pencil(&base_space, pencil)?;
    let coarse_time = t0.elapsed().as_secs_f64();

    // Shared fine setup: assembly and factorization.
    let t0 = Instant::now();
    let fine_forms = AssembledForms::new(&fine_space, epsilon)?;
    let fine_solver = SpdSolver::new(fine_forms.a())?;
    let fine_setup_time = t0.elapsed().as_secs_f64();

    let mut results = Vec::with_capacity(indices.len());
    for &index in indices {
        let base_value = base_eigen.values[index - 1];
        let base_function = &base_eigen.eigenfunctions[index - 1];
        let (value, eigenfunction, mut timings) = correct_eigenpair(
            base_value,
            base_function,
            &fine_space,
            &fine_forms,
            &fine_solver,
            tol,
        )?;
        timings.coarse_solve = coarse_time;
        debug_assert!(value > 0.0);
        results.push(AcceleratedResult {
            index,
            base_value,
            value,
            eigenfunction,
            timings,
        });
    }

    Ok(CorrectionRun {
        base_space,
        base_eigen,
        fine_space,
        fine_forms,
        results,
        coarse_time,
        fine_setup_time,
        total_time: total_start.elapsed().as_secs_f64(),
    })
}

/// Two-grid correction: coarse eigensolve, `refinements` rounds of uniform
/// red refinement, one fine solve per requested index, Rayleigh quotients.
pub fn two_grid(
    coarse_mesh: &Arc<Mesh>,
    refinements: u32,
    k: usize,
    epsilon: f64,
    indices: &[usize],
    tol: f64,
) -> Result<CorrectionRun, AlgorithmError> {
    if refinements == 0 {
        return Err(AlgorithmError::ZeroRefinements);
    }
    let mut fine = coarse_mesh.refine_uniform();
    for _ in 1..refinements {
        fine = fine.refine_uniform();
    }
    let fine_mesh = Arc::new(fine);
    let base_space = WgSpace::new(coarse_mesh.clone(), k)?;
    let fine_space = WgSpace::new(fine_mesh, k)?;
    correction_run(base_space, fine_space, epsilon, indices, tol)
}

/// Two-space correction on one mesh: eigensolve at degree `k1`, correction
/// and quotient at degree `k2 >= k1`.
pub fn two_space(
    mesh: &Arc<Mesh>,
    k1: usize,
    k2: usize,
    epsilon: f64,
    indices: &[usize],
    tol: f64,
) -> Result<CorrectionRun, AlgorithmError> {
    if k1 > k2 {
        return Err(AlgorithmError::Assembly(
            crate::error::AssemblyError::DegreeMismatch {
                trial: k1,
                test: k2,
            },
        ));
    }
    let base_space = WgSpace::new(mesh.clone(), k1)?;
    let fine_space = WgSpace::new(mesh.clone(), k2)?;
    correction_run(base_space, fine_space, epsilon, indices, tol)
}
