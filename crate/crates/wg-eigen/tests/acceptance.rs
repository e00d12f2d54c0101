//! End-to-end acceptance suite: one test per criterion, each printing a
//! PASS line with the measured quantities (visible under `--nocapture`;
//! always shown on failure).
//!
//! The tests share a lock so the runtime budgets and the timing comparison
//! are measured without contention from sibling tests.

use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use nalgebra::DVector;
use wg_eigen::algorithms::{correct_eigenpair, direct_wg, two_grid, two_space};
use wg_eigen::analysis::{
    conforming_interpolant, eigenfunction_error, interior_interpolant_gap, loglog_slope, ErrorNorm,
    ExactSpectrum, OrderOutcome, ScalarField, VNorm,
};
use wg_eigen::assembly::{local_weak_gradient, AssembledForms};
use wg_eigen::experiment::{preset_by_name, run};
use wg_eigen::mesh::{Diagonal, Mesh};
use wg_eigen::solver::{eigensolve, EigenMode, SpdSolver};
use wg_eigen::space::{eval_flux, project_q0, project_qbold, WeakFunction, WgSpace};

fn gate() -> std::sync::MutexGuard<'static, ()> {
    static GATE: OnceLock<Mutex<()>> = OnceLock::new();
    GATE.get_or_init(|| Mutex::new(()))
        .lock()
        .unwrap_or_else(|e| e.into_inner())
}

const FIRST_SIX: [f64; 6] = [2.0, 5.0, 5.0, 8.0, 10.0, 10.0];

fn exact_six() -> Vec<f64> {
    use std::f64::consts::PI;
    FIRST_SIX.iter().map(|c| c * PI * PI).collect()
}

/// Criterion 1: the direct scheme at k=1, eps=0 stays below every exact
/// eigenvalue on h in {1/8, 1/16, 1/32} and converges at second order
/// (per-index log-log slope within [1.7, 2.3]); runtime under 30 s.
#[test]
fn criterion_1_direct_lower_bounds_and_order() {
    let _lock = gate();
    let start = Instant::now();
    let exact = exact_six();
    let steps: Vec<f64> = [8.0, 16.0, 32.0].iter().map(|n| 1.0 / n).collect();
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); 6];
    for n in [8usize, 16, 32] {
        let mesh = Arc::new(Mesh::unit_square(n, Diagonal::RightUp).unwrap());
        let direct = direct_wg(&mesh, 1, 0.0, 6, 1e-10).unwrap();
        for j in 0..6 {
            let err = exact[j] - direct.eigen.values[j];
            assert!(
                err >= 0.0,
                "lower bound violated at n={n}, j={}: {err:.3e}",
                j + 1
            );
            errors[j].push(err);
        }
    }
    let mut slopes = Vec::new();
    for series in &errors {
        let slope = loglog_slope(&steps, series);
        assert!(
            (1.7..=2.3).contains(&slope),
            "order {slope:.3} outside [1.7, 2.3]"
        );
        slopes.push(slope);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "runtime {elapsed:.1}s exceeds 30s");
    println!(
        "criterion 1 (direct lower bounds, k=1): PASS — all 18 errors nonnegative, slopes {:?}, {elapsed:.1}s",
        slopes.iter().map(|s| format!("{s:.2}")).collect::<Vec<_>>()
    );
}

/// Reference eigenvalue errors of the first reproduction table.
const TABLE1_ERRORS: [[f64; 3]; 6] = [
    [2.1554e-1, 1.3006e-2, 8.0627e-4],
    [1.3687, 8.2219e-2, 4.8684e-3],
    [1.3687, 7.8229e-2, 4.8240e-3],
    [3.1148, 2.0798e-1, 1.2318e-2],
    [4.3750, 3.0337e-1, 1.8860e-2],
    [4.0896, 3.0980e-1, 1.8206e-2],
];
const TABLE1_ORDERS: [[f64; 2]; 6] = [
    [4.0507, 4.0118],
    [4.0572, 4.0780],
    [4.1290, 4.0194],
    [3.9046, 4.0776],
    [3.8501, 4.0077],
    [3.7225, 4.0889],
];

/// Criterion 2: two-grid k=1, eps=0, h=H^2 over (1/4,1/16)..(1/16,1/256):
/// every error positive, orders within +-0.35 of the reference orders, error
/// magnitudes within a factor 2.5 of the reference entries; under 5 minutes.
#[test]
fn criterion_2_table1_reproduction() {
    let _lock = gate();
    let start = Instant::now();
    let config = preset_by_name("table1", false).unwrap();
    let table = run(&config).unwrap();
    for j in 1..=6usize {
        let errors = table.eig_errors(j);
        assert_eq!(errors.len(), 3);
        for (level, (err, reference)) in errors.iter().zip(&TABLE1_ERRORS[j - 1]).enumerate() {
            assert!(
                *err > 0.0,
                "j={j} level {level}: error {err:.3e} not positive"
            );
            let ratio = err / reference;
            assert!(
                (1.0 / 2.5..=2.5).contains(&ratio),
                "j={j} level {level}: |error| {err:.4e} vs reference {reference:.4e} (ratio {ratio:.2})"
            );
        }
        for (pair, order) in table.orders_lambda(j).iter().enumerate() {
            let value = order.value().expect("no sign flips expected");
            let reference = TABLE1_ORDERS[j - 1][pair];
            assert!(
                (value - reference).abs() <= 0.35,
                "j={j} pair {pair}: order {value:.4} vs reference {reference:.4}"
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "runtime {elapsed:.1}s exceeds 5 minutes");
    println!("criterion 2 (two-grid reproduction, k=1 eps=0): PASS — 18 errors, 12 orders in band, {elapsed:.1}s");
}

/// Criterion 3: the eps=0.1 variant converges at order ~ 4 - 2 eps; all
/// orders inside [3.86 - 0.35, 3.91 + 0.35].
#[test]
fn criterion_3_table2_epsilon_reduces_order() {
    let _lock = gate();
    let start = Instant::now();
    let config = preset_by_name("table2", false).unwrap();
    let table = run(&config).unwrap();
    let band = (3.86 - 0.35)..=(3.91 + 0.35);
    let mut measured = Vec::new();
    for j in 1..=6usize {
        for order in table.orders_lambda(j) {
            let value = order.value().expect("no sign flips expected");
            assert!(
                band.contains(&value),
                "j={j}: order {value:.4} outside {band:?}"
            );
            measured.push(value);
        }
        for err in table.eig_errors(j) {
            assert!(err > 0.0, "j={j}: lower bound violated");
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "criterion 3 (two-grid, k=1 eps=0.1): PASS — orders {:.3}..{:.3} inside [3.51, 4.26], {elapsed:.1}s",
        measured.iter().cloned().fold(f64::INFINITY, f64::min),
        measured.iter().cloned().fold(0.0, f64::max)
    );
}

/// Criterion 4: k=2, eps=0.1, h=H^2, levels (1/4,1/16), (1/8,1/64):
/// eigenvalue orders within [7.5, 8.5] +- 0.35, eigenfunction orders within
/// [3.9, 4.2] +- 0.35, and the accelerated values overshoot (negative error)
/// for j >= 2 on both levels; under 10 minutes.
#[test]
fn criterion_4_tables_3_4() {
    let _lock = gate();
    let start = Instant::now();
    let config = preset_by_name("table3_4", false).unwrap();
    assert_eq!(config.schedule.len(), 2, "desk-scale schedule");
    let table = run(&config).unwrap();
    for j in 1..=6usize {
        let errors = table.eig_errors(j);
        if j >= 2 {
            for (level, err) in errors.iter().enumerate() {
                assert!(
                    *err < 0.0,
                    "j={j} level {level}: expected negative error, got {err:.3e}"
                );
            }
        }
        let order = table.orders_lambda(j)[0].value().expect("same-sign errors");
        assert!(
            (7.5 - 0.35..=8.5 + 0.35).contains(&order),
            "j={j}: eigenvalue order {order:.3}"
        );
        let fun_order = table.orders_fun(j)[0].value().expect("positive norms");
        assert!(
            (3.9 - 0.35..=4.2 + 0.35).contains(&fun_order),
            "j={j}: eigenfunction order {fun_order:.3}"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 600.0, "runtime {elapsed:.1}s exceeds 10 minutes");
    println!("criterion 4 (two-grid, k=2 eps=0.1, h=H^2): PASS — signs and 12 orders in band, {elapsed:.1}s");
}

/// Reference first-pair orders of the h=H^{3/2} table (the j=6 entry is
/// preasymptotic in the reference too).
const TABLE6_ORDERS: [f64; 6] = [5.8177, 5.4029, 5.2734, 6.0098, 5.9126, 3.8403];
const TABLE7_ORDERS: [f64; 6] = [3.0218, 3.2151, 3.2102, 3.5265, 3.4653, 3.4520];

/// Criterion 5: k=2, eps=0.1, h=H^{3/2}, levels (1/4,1/8), (1/16,1/64):
/// orders agree with the reference table within +-0.35 per index (sign-flip
/// pairs are flagged and omitted, matching the reference sign changes), and
/// the well-resolved indices 1..3 sit inside the widened [5.3, 6.0] band.
#[test]
fn criterion_5_tables_6_7() {
    let _lock = gate();
    let start = Instant::now();
    let config = preset_by_name("table6_7", false).unwrap();
    let table = run(&config).unwrap();
    for j in 1..=6usize {
        match table.orders_lambda(j)[0] {
            OrderOutcome::Value(order) => {
                let reference = TABLE6_ORDERS[j - 1];
                assert!(
                    (order - reference).abs() <= 0.35,
                    "j={j}: eigenvalue order {order:.3} vs reference {reference:.3}"
                );
                if j <= 3 {
                    assert!(
                        (5.3 - 0.35..=6.0 + 0.35).contains(&order),
                        "j={j}: order {order:.3} outside widened band"
                    );
                }
            }
            OrderOutcome::SignFlip => {
                // The reference table changes sign across this pair for
                // j = 4, 5 as well (negative at the coarse level).
                assert!(j == 4 || j == 5, "unexpected sign flip at j={j}");
            }
            OrderOutcome::ZeroError => panic!("exact zero error at j={j}"),
        }
        let fun_order = table.orders_fun(j)[0].value().expect("positive norms");
        let reference = TABLE7_ORDERS[j - 1];
        assert!(
            (fun_order - reference).abs() <= 0.35 && (2.9 - 0.35..=3.5 + 0.35).contains(&fun_order),
            "j={j}: eigenfunction order {fun_order:.3} vs reference {reference:.3}"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    println!("criterion 5 (two-grid, k=2 eps=0.1, h=H^1.5): PASS — orders track the reference, {elapsed:.1}s");
}

/// Criterion 6: two-space k1=1, k2=2, eps=0.2: the first-eigenvalue error
/// decays with log-log slope >= 3.0 over h = 1/8..1/64 and stays a lower
/// bound at every level.
#[test]
fn criterion_6_two_space_rate_and_bounds() {
    let _lock = gate();
    let start = Instant::now();
    let config = preset_by_name("fig1_2", false).unwrap();
    let table = run(&config).unwrap();
    for j in 1..=6usize {
        for (level, err) in table.eig_errors(j).iter().enumerate() {
            assert!(
                *err >= 0.0,
                "j={j} level {level}: lower bound violated ({err:.3e})"
            );
        }
    }
    // Slope over the four finest levels (1/8 .. 1/64).
    let steps: Vec<f64> = table.steps()[1..].to_vec();
    let errors: Vec<f64> = table.eig_errors(1)[1..].to_vec();
    let slope = loglog_slope(&steps, &errors);
    assert!(slope >= 3.0, "slope {slope:.3} below 3.0");
    let elapsed = start.elapsed().as_secs_f64();
    println!("criterion 6 (two-space, k1=1 k2=2 eps=0.2): PASS — slope {slope:.3} >= 3.0, bounds hold, {elapsed:.1}s");
}

/// Criterion 7: L-shape two-grid values increase strictly across levels for
/// all six indices, and the finest first eigenvalue lands within 1e-2
/// relative of the reference 9.6383056544; under 5 minutes.
#[test]
fn criterion_7_l_shape_trend() {
    let _lock = gate();
    let start = Instant::now();
    let config = preset_by_name("table8", false).unwrap();
    let table = run(&config).unwrap();
    for j in 1..=6usize {
        assert!(
            table.monotone_increasing(j),
            "lambda_{j} not strictly increasing"
        );
    }
    let lambda1 = *table.lambdas(1).last().unwrap();
    let reference = 9.6383056544;
    let rel = (lambda1 - reference).abs() / reference;
    assert!(
        rel < 1e-2,
        "lambda_1 = {lambda1:.10} vs {reference} (rel {rel:.2e})"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "runtime {elapsed:.1}s exceeds 5 minutes");
    println!("criterion 7 (L-shape trend): PASS — all six increasing, lambda_1 rel diff {rel:.2e}, {elapsed:.1}s");
}

/// Criterion 8: shift-invert matches the dense-pencil oracle to 1e-8
/// relative on every test mesh below 2000 unknowns, and the same-space
/// correction is a fixed point to 1e-10.
#[test]
fn criterion_8_oracle_equivalence_and_fixed_points() {
    let _lock = gate();
    let start = Instant::now();
    let meshes: Vec<(Arc<Mesh>, usize)> = vec![
        (
            Arc::new(Mesh::unit_square(1, Diagonal::RightUp).unwrap()),
            1,
        ),
        (
            Arc::new(Mesh::unit_square(2, Diagonal::RightUp).unwrap()),
            1,
        ),
        (
            Arc::new(Mesh::unit_square(4, Diagonal::RightUp).unwrap()),
            1,
        ),
        (
            Arc::new(Mesh::unit_square(4, Diagonal::RightUp).unwrap()),
            2,
        ),
        (
            Arc::new(Mesh::unit_square(8, Diagonal::RightDown).unwrap()),
            2,
        ),
        (
            Arc::new(Mesh::unit_square(2, Diagonal::Crisscross).unwrap()),
            2,
        ),
        (Arc::new(Mesh::l_shape(2, Diagonal::RightUp).unwrap()), 1),
        (Arc::new(Mesh::l_shape(2, Diagonal::RightUp).unwrap()), 2),
    ];
    let mut compared = 0;
    for (mesh, k) in &meshes {
        let space = WgSpace::new(mesh.clone(), *k).unwrap();
        assert!(
            space.num_dofs() <= 2000,
            "test mesh too large for the oracle gate"
        );
        for eps in [0.0, 0.1] {
            let forms = AssembledForms::new(&space, eps).unwrap();
            let nev = 6.min(space.num_interior_dofs());
            let si = eigensolve(
                forms.a(),
                forms.b(),
                space.num_interior_dofs(),
                nev,
                1e-10,
                EigenMode::CondensedShiftInvert,
            )
            .unwrap();
            let dense = eigensolve(
                forms.a(),
                forms.b(),
                space.num_interior_dofs(),
                nev,
                1e-10,
                EigenMode::DenseOracle,
            )
            .unwrap();
            for i in 0..nev {
                let rel = (si.values[i] - dense.values[i]).abs() / dense.values[i];
                assert!(
                    rel <= 1e-8,
                    "k={k}, eps={eps}, index {i}: rel gap {rel:.2e}"
                );
                compared += 1;
            }
        }
    }

    // Fixed points: feeding a converged pair through the correction leaves
    // it unchanged, for both the same-space and equal-degree routes.
    let mesh = Arc::new(Mesh::unit_square(4, Diagonal::RightUp).unwrap());
    let direct = direct_wg(&mesh, 2, 0.1, 2, 1e-12).unwrap();
    let solver = SpdSolver::new(direct.forms.a()).unwrap();
    for j in 0..2 {
        let (value, function, _) = correct_eigenpair(
            direct.eigen.values[j],
            &direct.eigen.eigenfunctions[j],
            &direct.space,
            &direct.forms,
            &solver,
            1e-12,
        )
        .unwrap();
        let rel = (value - direct.eigen.values[j]).abs() / direct.eigen.values[j];
        assert!(rel <= 1e-10, "fixed-point value drift {rel:.2e}");
        let mut diff = function.coeffs().clone();
        if diff.dot(direct.eigen.eigenfunctions[j].coeffs()) < 0.0 {
            diff = -diff;
        }
        diff -= direct.eigen.eigenfunctions[j].coeffs();
        let drift = direct.forms.b_quad(&diff).sqrt();
        assert!(drift <= 1e-9, "fixed-point vector drift {drift:.2e}");
    }
    let ts = two_space(&mesh, 2, 2, 0.1, &[1], 1e-12).unwrap();
    let rel = (ts.results[0].value - ts.base_eigen.values[0]).abs() / ts.base_eigen.values[0];
    assert!(rel <= 1e-10, "two-space equal-degree drift {rel:.2e}");

    let elapsed = start.elapsed().as_secs_f64();
    println!("criterion 8 (oracle equivalence): PASS — {compared} eigenvalues matched to 1e-8, fixed points hold, {elapsed:.1}s");
}

/// Criterion 9: the property suite — assembly symmetry and definiteness,
/// projection idempotence and orthogonality, the commuting identity, the
/// interpolant bounds across refinement, and eigenfunction-error invariance
/// under cluster rotation.
#[test]
fn criterion_9_property_suite() {
    let _lock = gate();
    let start = Instant::now();

    // Assembly: bit symmetry, SPD stiffness, PSD mass with zero edge block.
    let mesh = Arc::new(Mesh::unit_square(3, Diagonal::Crisscross).unwrap());
    let space = WgSpace::new(mesh, 2).unwrap();
    let forms = AssembledForms::new(&space, 0.1).unwrap();
    let dense_a = {
        let mut m = nalgebra::DMatrix::<f64>::zeros(space.num_dofs(), space.num_dofs());
        let sym = forms.a().symbolic();
        for j in 0..space.num_dofs() {
            for p in sym.col_ptr()[j]..sym.col_ptr()[j + 1] {
                m[(sym.row_idx()[p], j)] += forms.a().val()[p];
            }
        }
        m
    };
    assert_eq!(
        (&dense_a - dense_a.transpose()).abs().max(),
        0.0,
        "A not bit-symmetric"
    );
    let eig_a = nalgebra::SymmetricEigen::new(dense_a);
    assert!(eig_a.eigenvalues.min() > 0.0, "A not positive definite");
    let mut edge_only = DVector::zeros(space.num_dofs());
    for i in space.num_interior_dofs()..space.num_dofs() {
        edge_only[i] = 1.0;
    }
    assert_eq!(forms.b_quad(&edge_only), 0.0);
    let mut probe = DVector::zeros(space.num_dofs());
    for (i, x) in probe.iter_mut().enumerate() {
        *x = (((i * 31) % 17) as f64) / 17.0 - 0.4;
    }
    assert!(forms.b_quad(&probe) >= 0.0);

    // Projections: idempotence and orthogonality on a generic function.
    let f = |x: [f64; 2]| (2.3 * x[0]).sin() * (1.2 + x[1]).powi(2);
    let q0 = project_q0(&f, &space).unwrap();
    let mut wf = WeakFunction::zero(space.clone());
    wf.coeffs_mut().rows_mut(0, q0.len()).copy_from(&q0);
    let rule = wg_eigen::quadrature::triangle_rule(2 * space.degree() + 6).unwrap();
    for t in 0..space.mesh().num_triangles() {
        let map = space.element_map(t);
        let mut residual: DVector<f64> = DVector::zeros(space.interior_dim());
        let mut norm_f: f64 = 0.0;
        for (w, p) in rule.weights.iter().zip(&rule.points) {
            let x = map.to_physical(*p);
            let phi = space.interior_basis().eval(*p) * map.scale();
            residual.axpy(w * map.det() * (f(x) - wf.eval_interior(t, x)), &phi, 1.0);
            norm_f += w * map.det() * f(x) * f(x);
        }
        assert!(
            residual.amax() <= 1e-10 * norm_f.sqrt(),
            "projection orthogonality violated on element {t}"
        );
    }
    // Idempotence: projecting the projected interior part changes nothing.
    let mut again = DVector::zeros(space.num_interior_dofs());
    for t in 0..space.mesh().num_triangles() {
        let map = space.element_map(t);
        let mut load = DVector::zeros(space.interior_dim());
        for (w, p) in rule.weights.iter().zip(&rule.points) {
            let x = map.to_physical(*p);
            let phi = space.interior_basis().eval(*p) * map.scale();
            load.axpy(w * map.det() * wf.eval_interior(t, x), &phi, 1.0);
        }
        again
            .rows_mut(t * space.interior_dim(), space.interior_dim())
            .copy_from(&load);
    }
    assert!((again - q0).amax() <= 1e-12, "projection not idempotent");

    // Commuting identity grad_w(Q_h u) = Qbold(grad u) on single elements.
    for coords in [
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        [[0.2, 0.1], [1.1, 0.4], [0.3, 1.2]],
    ] {
        let mesh = Arc::new(Mesh::from_raw(coords.to_vec(), vec![[0, 1, 2]]).unwrap());
        let space = WgSpace::new(mesh, 3).unwrap();
        let u = |x: [f64; 2]| x[0] * x[0] * x[1];
        let grad_u = |x: [f64; 2]| [2.0 * x[0] * x[1], x[0] * x[0]];
        let wg = local_weak_gradient(&space, 0).unwrap();
        let idim = space.interior_dim();
        let edim = space.edge_dim();
        let q0 = project_q0(&u, &space).unwrap();
        let mut local = DVector::zeros(idim + 3 * edim);
        local.rows_mut(0, idim).copy_from(&q0.rows(0, idim));
        let erule = wg_eigen::quadrature::edge_rule(2 * space.degree() + 6).unwrap();
        for le in 0..3 {
            let e = space.mesh().triangle_edges(0)[le];
            let [a, b] = space.mesh().edge(e).vertices;
            let (pa, pb) = (space.mesh().vertex(a), space.mesh().vertex(b));
            let len = space.mesh().edge_length(e);
            for (w, t01) in erule.weights.iter().zip(&erule.points) {
                let x = [pa[0] + t01 * (pb[0] - pa[0]), pa[1] + t01 * (pb[1] - pa[1])];
                let vals = space.edge_basis().eval(*t01);
                for r in 0..edim {
                    local[idim + le * edim + r] += w * u(x) * len.sqrt() * vals[r];
                }
            }
        }
        let lhs = wg.apply(&local);
        let rhs = project_qbold(&grad_u, &space, 0).unwrap();
        let map = space.element_map(0);
        for p in [[0.25, 0.25], [0.1, 0.7], [0.55, 0.2]] {
            let x = map.to_physical(p);
            let a = eval_flux(&space, 0, &lhs, x);
            let b = eval_flux(&space, 0, &rhs, x);
            assert!(
                (a[0] - b[0]).abs() <= 1e-11 && (a[1] - b[1]).abs() <= 1e-11,
                "commuting identity violated: {a:?} vs {b:?}"
            );
        }
    }

    // Interpolant bounds: sampled constants stable (within 10%) across three
    // refinement levels.
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let mut rng = StdRng::seed_from_u64(1234);
    let mut c1_levels = Vec::new();
    let mut c2_levels = Vec::new();
    for n in [8usize, 16, 32] {
        let mesh = Arc::new(Mesh::unit_square(n, Diagonal::RightUp).unwrap());
        let space = WgSpace::new(mesh.clone(), 1).unwrap();
        let vnorm = VNorm::new(&space).unwrap();
        let mut c1: f64 = 0.0;
        let mut c2: f64 = 0.0;
        for _ in 0..25 {
            let coeffs = DVector::from_fn(space.num_dofs(), |_, _| rng.random::<f64>() - 0.5);
            let v = WeakFunction::from_coeffs(space.clone(), coeffs).unwrap();
            let p1 = conforming_interpolant(&v);
            let nv = vnorm.eval(&v);
            c1 = c1.max(p1.h1_seminorm() / nv);
            c2 = c2.max(interior_interpolant_gap(&v, &p1) / (mesh.h() * nv));
        }
        c1_levels.push(c1);
        c2_levels.push(c2);
    }
    for levels in [&c1_levels, &c2_levels] {
        for pair in levels.windows(2) {
            assert!(
                pair[1] <= 1.10 * pair[0],
                "interpolant constant grew: {levels:?}"
            );
        }
    }

    // Eigenfunction error invariance under rotation of a degenerate cluster.
    let mesh = Arc::new(Mesh::unit_square(8, Diagonal::RightUp).unwrap());
    let direct = direct_wg(&mesh, 1, 0.0, 3, 1e-10).unwrap();
    let spectrum = ExactSpectrum::unit_square(6);
    let group = spectrum.group_at(2).unwrap();
    let base = eigenfunction_error(
        &direct.forms,
        &direct.eigen.eigenfunctions[2],
        &group.functions,
        ErrorNorm::TripleBar,
    )
    .unwrap();
    for angle in [0.7f64, 2.1] {
        let (c, s) = (angle.cos(), angle.sin());
        let (f0, f1) = (group.functions[0].clone(), group.functions[1].clone());
        let g0: ScalarField = {
            let (f0, f1) = (f0.clone(), f1.clone());
            Arc::new(move |x| c * f0(x) + s * f1(x))
        };
        let g1: ScalarField = Arc::new(move |x| -s * f0(x) + c * f1(x));
        let rotated = vec![g0, g1];
        let err = eigenfunction_error(
            &direct.forms,
            &direct.eigen.eigenfunctions[2],
            &rotated,
            ErrorNorm::TripleBar,
        )
        .unwrap();
        assert!(
            (err - base).abs() <= 1e-10 * base.max(1e-10),
            "rotation changed the error"
        );
    }

    let elapsed = start.elapsed().as_secs_f64();
    println!("criterion 9 (property suite): PASS — symmetry/definiteness, projections, commuting, interpolant, rotation, {elapsed:.1}s");
}

/// Criterion 10: one two-grid correction (H=1/4, h=1/16, k=2) takes less
/// than 0.7x the direct solve at h=1/16 with nev=6 (best of three after a
/// warm-up).
#[test]
fn criterion_10_two_grid_is_faster() {
    let _lock = gate();
    let coarse = Arc::new(Mesh::unit_square(4, Diagonal::RightUp).unwrap());
    let fine = Arc::new(Mesh::unit_square(16, Diagonal::RightUp).unwrap());
    // Warm-up both paths once.
    let _ = two_grid(&coarse, 2, 2, 0.0, &[1], 1e-10).unwrap();
    let _ = direct_wg(&fine, 2, 0.0, 6, 1e-10).unwrap();
    let mut best_two_grid = f64::INFINITY;
    let mut best_direct = f64::INFINITY;
    for _ in 0..3 {
        let t0 = Instant::now();
        let run = two_grid(&coarse, 2, 2, 0.0, &[1], 1e-10).unwrap();
        best_two_grid = best_two_grid.min(t0.elapsed().as_secs_f64());
        assert_eq!(run.results.len(), 1);

        let t0 = Instant::now();
        let direct = direct_wg(&fine, 2, 0.0, 6, 1e-10).unwrap();
        best_direct = best_direct.min(t0.elapsed().as_secs_f64());
        assert_eq!(direct.eigen.values.len(), 6);
    }
    let ratio = best_two_grid / best_direct;
    assert!(
        ratio < 0.7,
        "two-grid {best_two_grid:.3}s vs direct {best_direct:.3}s (ratio {ratio:.2})"
    );
    println!(
        "criterion 10 (acceleration): PASS — two-grid {best_two_grid:.3}s vs direct {best_direct:.3}s (ratio {ratio:.2})"
    );
}
