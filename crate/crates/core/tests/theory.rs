//! Slower, statistical checks that sit between the unit tests and the
//! acceptance suite.

use mfcore::diagnostics::{classify_rate, procrustes_distance, residual_leakage, weak_opt_residual, RateVerdict, Termination};
use mfcore::init::{self, InitSpec};
use mfcore::matcore::{self, Matrix};
use mfcore::nora::{self, nora_init, nora_plus_step, LinearFinetuneProblem, NoraConfig};
use mfcore::problems::{parse_spectrum, Problem, TargetSpec};
use mfcore::solvers::{self, IterState, Method, Schedule, SolverConfig};

fn ep_desk() -> Vec<f64> {
    parse_spectrum("lin:1.0,-0.01,19,0.01").unwrap()
}

fn up_desk() -> Vec<f64> {
    parse_spectrum("lin:1.0,-0.01,37,0.05,0.025,0.01").unwrap()
}

fn percentile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    v[((v.len() - 1) as f64 * q).floor() as usize]
}

#[test]
fn sketch_sigma_min_stays_away_from_zero() {
    for (spec, r) in [(ep_desk(), 20), (up_desk(), 20)] {
        let p = Problem::from_spec(&TargetSpec::symmetric(100, spec, 11), r).unwrap();
        let smin: Vec<f64> = (0..200)
            .map(|s| {
                let x0 = init::initialize(&p, &InitSpec::nystrom(1.0, 5000 + s)).unwrap().x0;
                *matcore::singular_values(&x0).unwrap().last().unwrap()
            })
            .collect();
        let p1 = percentile(smin, 0.01);
        println!("r_A={} r={r}: 1st percentile of σ_min(x0) = {p1:.3e}", p.r_a);
        assert!(p1 > 0.0);
    }
}

#[test]
fn rank_ok_over_seeds() {
    let p = Problem::from_spec(&TargetSpec::symmetric(100, ep_desk(), 3), 10).unwrap();
    for s in 0..100 {
        assert!(init::initialize(&p, &InitSpec::nystrom(1.0, s)).unwrap().rank_ok, "seed {s}");
    }
}

#[test]
fn small_perturbation_degrades_to_linear() {
    let p = Problem::from_spec(&TargetSpec::symmetric(100, ep_desk(), 0), 20).unwrap();
    let start = init::initialize(&p, &InitSpec::perturbed(1.0, 1e-3, 7)).unwrap();
    let cfg = SolverConfig::new(Method::ScaledGd, Schedule::Fixed { eta: 0.5 }, 200, 1e-12);
    let tr = solvers::run(&p, &start, &cfg).unwrap();
    let est = classify_rate(&tr.errors(), p.a.norm()).unwrap();
    assert_eq!(est.verdict, RateVerdict::Linear, "{est:?}");
}

#[test]
fn gd_small_step_is_monotone() {
    let p = Problem::from_spec(&TargetSpec::symmetric(100, ep_desk(), 0), 20).unwrap();
    let start = init::initialize(&p, &InitSpec::small(1e-3, 1)).unwrap();
    let cfg = SolverConfig::new(Method::Gd, Schedule::Fixed { eta: 0.01 }, 100, 1e-12);
    let e = solvers::run(&p, &start, &cfg).unwrap().errors();
    assert_eq!(e.len(), 101);
    assert!(e.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn top_factor_is_weakly_optimal() {
    let p = Problem::from_spec(&TargetSpec::symmetric(30, up_desk()[..12].to_vec(), 2), 5).unwrap();
    let x = Matrix::from_fn(30, 5, |i, j| p.u[(i, j)] * p.sigma[j].sqrt());
    let a_pinv = matcore::pinv(&p.a).unwrap();
    assert!(weak_opt_residual(&x, None, &a_pinv) <= 1e-10);
}

#[test]
fn asym_diag_one_step() {
    let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
    let p = Problem::from_matrix(a.clone(), 2, mfcore::problems::Kind::Asymmetric).unwrap();
    let start = init::initialize(&p, &InitSpec::nystrom(1.0, 9)).unwrap();
    let st = solvers::scaledgd_asym_step(&IterState::new(start.x0, start.y0), &a, 1.0, solvers::Mode::Inverse).unwrap();
    assert!((&st.x * st.y.unwrap().transpose() - a).norm() <= 1e-10);
}

// Distance to the aligned optimum, raw and up to rotation.
#[test]
fn up_distance_to_aligned_optimum() {
    let mut fitted: f64 = 0.0;
    for r in [2usize, 4, 8, 16] {
        let p = Problem::from_spec(&TargetSpec::symmetric(100, up_desk(), 0), r).unwrap();
        let start = init::initialize(&p, &InitSpec::nystrom(1.0, 100 + r as u64)).unwrap();
        let cfg = SolverConfig::new(Method::ScaledGd, Schedule::default_decay(), 4000, 1e-6);
        let tr = solvers::run(&p, &start, &cfg).unwrap();
        assert_eq!(tr.termination, Termination::Converged, "r={r}");
        let x_star = Matrix::from_fn(100, r, |i, j| p.u[(i, j)] * p.sigma[j].sqrt());
        let raw = (&tr.final_x - &x_star).norm();
        let rot = procrustes_distance(&tr.final_x, &x_star);
        let c = rot / (r as f64).powf(0.75);
        println!("r={r:2}: raw {raw:.4e}, procrustes {rot:.4e}, ratio/r^0.75 {c:.4e}");
        assert!(rot <= raw + 1e-12);
        assert!(c.is_finite());
        fitted = fitted.max(c);
    }
    println!("fitted C' = {fitted:.4e}");
}

#[test]
fn nora_sketch_stays_in_pretrained_range() {
    let u = matcore::gaussian(6, 1, 1.0, 1).unwrap();
    let v = matcore::gaussian(5, 1, 1.0, 2).unwrap();
    let w0 = &u * v.transpose();
    let prob = LinearFinetuneProblem::new(w0.clone(), w0 * 2.0, 2).unwrap();
    let (x0, _) = nora_init(&prob, 0.1, 3).unwrap();
    let q = u.normalize();
    assert!(residual_leakage(&x0, &q) <= 1e-12);
}

#[test]
fn nora_optimum_is_fixed() {
    let prob = nora::toy_problem(8, 6, 2, &[1.0, 0.5], 5).unwrap();
    let d = matcore::svd(&prob.a_eff()).unwrap();
    let x = Matrix::from_fn(8, 2, |i, j| d.u[(i, j)] * d.s[j]);
    let y = d.v.clone();
    let st = IterState::new(x.clone(), Some(y.clone()));
    let next = nora_plus_step(&st, &prob, &NoraConfig::default(), 3).unwrap();
    assert!((&next.x - &x).norm() <= 1e-12);
    assert!((next.y.unwrap() - y).norm() <= 1e-12);
}

#[test]
fn nora_plus_reaches_tolerance_on_toy() {
    let spectrum = [1.0, 0.7, 0.4, 0.2];
    let prob = nora::toy_problem(32, 32, 4, &spectrum, 0).unwrap();
    let scale = prob.a_eff().norm();
    let cfg = NoraConfig { tol: 1e-6 * scale, seed: 100, max_iters: 1000, ..NoraConfig::default() };
    let tr = nora::run_nora(&prob, &cfg, nora::Variant::NoraPlus).unwrap();
    assert_eq!(tr.termination, Termination::Converged);
    // linear, not stuck: the last 100 steps shrink the error by well over 10×
    let e = tr.errors();
    assert!(e[e.len() - 1] * 10.0 <= e[e.len() - 101]);
}
