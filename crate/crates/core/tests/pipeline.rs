use std::f64::consts::PI;

use spectral_bm_core::semigroup::{
    feynman_kac_estimate, partition_function_diagonal, partition_function_spectral,
    trotter_propagate, PathSamplerConfig, TrotterPlan,
};
use spectral_bm_core::verify::{bm_eigen_verify, volume_bm_verify, BmOptions, BmReport};
use spectral_bm_core::*;

fn unit_square() -> ConvexBody {
    ConvexBody::aabb(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
}

#[test]
fn ground_state_is_an_eigenfunction_of_the_semigroup() {
    let body = unit_square();
    let grid = GridSpec::for_body(&body, 48).unwrap();
    let op = assemble(
        &body,
        &Matrix::identity(2),
        &Potential::constant(2, 0.0),
        &grid,
    )
    .unwrap();
    let sp = smallest_eigenpairs(&op, 1, &EigenOptions::with_tol(1e-10)).unwrap();
    assert!((sp.lambda1() - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 1e-3);

    let t = 0.05;
    let psi = sp.ground_state();
    let out = trotter_propagate(&op, psi, &TrotterPlan::new(t, 20)).unwrap();
    let mut expect = psi.clone();
    let decay = (-t * sp.lambda1()).exp();
    expect.values.iter_mut().for_each(|v| *v *= decay);
    assert!(out.l2_distance(&expect) / expect.norm() < 1e-2);
}

#[test]
fn trace_modes_agree_on_the_interval() {
    let body = ConvexBody::interval(0.0, 1.0).unwrap();
    let grid = GridSpec::for_body(&body, 64).unwrap();
    let op = assemble(
        &body,
        &Matrix::identity(1),
        &Potential::constant(1, 0.0),
        &grid,
    )
    .unwrap();
    let sp = smallest_eigenpairs(&op, op.len(), &EigenOptions::with_tol(1e-10)).unwrap();
    let t = 0.25;
    let s = partition_function_spectral(&sp.eigenvalues, t).unwrap();
    let d = partition_function_diagonal(&op, &TrotterPlan::new(t, 25), 1).unwrap();
    assert_eq!(d.mode, "diagonal");
    let oracle: f64 = (1..400).map(|k| (-t * (k as f64 * PI).powi(2)).exp()).sum();
    assert!((s.value - oracle).abs() / oracle < 1e-3);
    assert!((d.value - s.value).abs() / s.value < 1e-2);
}

#[test]
fn feynman_kac_matches_the_spectral_expansion() {
    // Interval (0,1), V = 0, f = 1: u(t,x) = Σ_odd 4/(kπ) sin(kπx) e^{-k²π²t}.
    let body = ConvexBody::interval(0.0, 1.0).unwrap();
    let t = 0.1;
    let oracle: f64 = (0..200)
        .map(|j| {
            let k = (2 * j + 1) as f64;
            4.0 / (k * PI) * (k * PI * 0.5).sin() * (-k * k * PI * PI * t).exp()
        })
        .sum();
    let est = feynman_kac_estimate(
        &body,
        &Matrix::identity(1),
        &Potential::constant(1, 0.0),
        &|_| 1.0,
        &[0.5],
        t,
        &PathSamplerConfig::new(100, 20000, 3),
    )
    .unwrap();
    assert!(
        (est.mean - oracle).abs() < 4.0 * est.stderr + 2e-3,
        "{} vs {oracle}",
        est.mean
    );
}

#[test]
fn bm_sweep_between_scaled_squares() {
    let b0 = unit_square();
    let b1 = ConvexBody::aabb(&[0.0, 0.0], &[2.0, 2.0]).unwrap();
    let opts = BmOptions {
        cells: 48,
        ..BmOptions::default()
    };
    let rep = bm_eigen_verify(
        &b0,
        &b1,
        &Matrix::identity(2),
        &Potential::constant(2, 0.0),
        &opts,
    )
    .unwrap();
    assert!(rep.pass, "{:?}", rep.failure);
    // Homothetic squares: λ(r) = 2π²/(1+r)², so the chord defects are known.
    let exact = |r: f64| 2.0 * PI * PI / (1.0 + r).powi(2);
    for (&r, d) in rep.r_grid.iter().zip(&rep.chord_defects) {
        let want = (1.0 - r) * exact(0.0) + r * exact(1.0) - exact(r);
        assert!(
            (d - want).abs() < 2e-2 * want.max(1.0),
            "r={r}: {d} vs {want}"
        );
    }
    assert_eq!(rep.order, 2);
    let json = serde_json::to_value(&rep).unwrap();
    assert_eq!(json["r_grid"].as_array().unwrap().len(), 5);
    let _: fn(&BmReport) -> f64 = BmReport::worst_chord;
}

#[test]
fn volume_bm_for_triangles() {
    let b0 = ConvexBody::polytope(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let b1 = ConvexBody::polytope(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]]).unwrap();
    let rep = volume_bm_verify(&b0, &b1, &[0.0, 0.5, 1.0]).unwrap();
    assert!(rep.pass);
}

#[test]
fn bodies_round_trip_through_json() {
    let bodies = [
        unit_square(),
        ConvexBody::ball(vec![0.0, 0.0, 0.0], 1.5).unwrap(),
        ConvexBody::interval(-1.0, 2.0).unwrap(),
    ];
    for b in bodies {
        let s = serde_json::to_string(&b).unwrap();
        let back: ConvexBody = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
        assert_eq!(back.dim(), b.dim());
    }
    let opts: BmOptions = serde_json::from_str(r#"{"r_grid": [0, 1], "cells": 16}"#).unwrap();
    assert_eq!(opts.cells, 16);
    assert!(serde_json::from_str::<BmOptions>(r#"{"cell": 16}"#).is_err());
}
