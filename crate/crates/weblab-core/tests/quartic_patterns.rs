//! End-to-end splitting patterns of the rank curves for the three webs:
//! frame transport traces the arcs for the Cartesian and bipolar webs,
//! the relation basis traces them for the tangent web.

use weblab_core::conics::{ConfocalFamily, Point};
use weblab_core::frobenius::{
    displayed_moving_conic, displayed_moving_line, fixed_conic_from_moving,
    fixed_line_from_moving, frame_arc_points, transport_many, FrameState, SystemKind,
};
use weblab_core::ode::OdeOptions;
use weblab_core::quartic::{
    classify, fit_component, ClassifyTolerances, ComponentKind, ProjectivePoint, SplitPattern,
};
use weblab_core::rank::{extract_basis, lie_arcs, CollocationConfig};
use weblab_core::web::{SampleBox, Web};

fn fam() -> ConfocalFamily {
    ConfocalFamily::new(2.0, 1.0).unwrap()
}

/// Serpentine waypoints through the off-axis part of the box.
fn serpentine() -> Vec<Point> {
    let xs = [0.7, 1.1, 1.5, 1.9, 2.3];
    let ys = [0.7, 1.05, 1.4, 1.75];
    let mut path = Vec::new();
    for (j, &y) in ys.iter().enumerate() {
        let row: Vec<Point> = xs.iter().map(|&x| Point::new(x, y)).collect();
        if j % 2 == 0 {
            path.extend(row);
        } else {
            path.extend(row.into_iter().rev());
        }
    }
    path
}

fn tight_opts() -> OdeOptions {
    OdeOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        ..OdeOptions::default()
    }
}

fn collect_arcs(kind: SystemKind) -> (Vec<FrameState>, [Vec<ProjectivePoint>; 4], Vec<Point>) {
    let f = fam();
    let path = serpentine();
    let init = FrameState::identity_frame(path[0]);
    let states = transport_many(kind, f, &path, &init, &tight_opts()).unwrap();
    let mut arcs: [Vec<ProjectivePoint>; 4] = Default::default();
    for state in &states {
        let pts = frame_arc_points(kind, state, f).unwrap();
        for (arc, p) in arcs.iter_mut().zip(pts) {
            arc.push(p);
        }
    }
    (states, arcs, path)
}

fn max_pairwise_distance(points: &[ProjectivePoint]) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            worst = worst.max(points[i].distance(points[j]));
        }
    }
    worst
}

#[test]
fn cartesian_rank_curve_is_conic_plus_two_lines() {
    let (_, arcs, _) = collect_arcs(SystemKind::Cartesian);
    let report = classify(
        &arcs,
        SplitPattern::ConicAndTwoLines,
        &ClassifyTolerances::default(),
    )
    .unwrap();
    assert!(report.all_passed(), "{:#?}", report.incidences);
}

#[test]
fn cartesian_moving_lines_pull_back_to_fixed_lines() {
    let f = fam();
    let (states, arcs, path) = collect_arcs(SystemKind::Cartesian);
    for fol in [2usize, 3] {
        // the fixed-space image of the displayed moving line must be the
        // same line at every waypoint, and must carry the arc
        let fixed: Vec<ProjectivePoint> = states
            .iter()
            .zip(&path)
            .map(|(st, &p)| {
                let m = displayed_moving_line(SystemKind::Cartesian, fol, p, f)
                    .unwrap()
                    .unwrap();
                let a = fixed_line_from_moving(st, m).unwrap();
                ProjectivePoint::new(a[0], a[1], a[2]).unwrap()
            })
            .collect();
        let drift = max_pairwise_distance(&fixed);
        assert!(drift < 1e-8, "foliation {fol}: moving line drifts by {drift:.3e}");
        let line = fit_component(&arcs[fol], ComponentKind::Line).unwrap();
        let fit_pt = ProjectivePoint::new(
            line.coefficients[0],
            line.coefficients[1],
            line.coefficients[2],
        )
        .unwrap();
        let agree = fixed[0].distance(fit_pt);
        assert!(
            agree < 1e-8,
            "foliation {fol}: displayed line differs from the fitted one by {agree:.3e}"
        );
    }
}

#[test]
fn cartesian_moving_conic_is_a_fixed_conic_through_the_net_arcs() {
    let f = fam();
    let (states, arcs, path) = collect_arcs(SystemKind::Cartesian);
    let mut fixed_conics = Vec::new();
    for (st, &p) in states.iter().zip(&path) {
        let cm = displayed_moving_conic(p, f).unwrap();
        let a = fixed_conic_from_moving(st, &cm).unwrap();
        // normalize to unit Frobenius norm with a sign convention
        let norm = a.norm();
        let mut a = a / norm;
        let lead = a
            .iter()
            .find(|v| v.abs() > 1e-12)
            .copied()
            .unwrap_or(1.0);
        if lead < 0.0 {
            a = -a;
        }
        fixed_conics.push(a);
    }
    let mut drift = 0.0_f64;
    for c in &fixed_conics[1..] {
        drift = drift.max((c - fixed_conics[0]).norm());
    }
    assert!(drift < 1e-8, "moving conic drifts by {drift:.3e}");
    // both net arcs lie on it
    let c = &fixed_conics[0];
    for arc in &arcs[..2] {
        for p in arc {
            let v = nalgebra::Vector3::new(p.x, p.y, p.z);
            let r = (v.transpose() * c * v)[(0, 0)].abs();
            assert!(r < 1e-8, "net arc point off the conic by {r:.3e}");
        }
    }
}

#[test]
fn bipolar_rank_curve_is_four_lines_in_general_position() {
    let (_, arcs, _) = collect_arcs(SystemKind::Bipolar);
    let report = classify(
        &arcs,
        SplitPattern::FourLinesGeneralPosition,
        &ClassifyTolerances::default(),
    )
    .unwrap();
    assert!(report.all_passed(), "{:#?}", report.incidences);
}

#[test]
fn bipolar_moving_lines_pull_back_to_fixed_lines() {
    let f = fam();
    let (states, arcs, path) = collect_arcs(SystemKind::Bipolar);
    for fol in 0..4 {
        let fixed: Vec<ProjectivePoint> = states
            .iter()
            .zip(&path)
            .map(|(st, &p)| {
                let m = displayed_moving_line(SystemKind::Bipolar, fol, p, f)
                    .unwrap()
                    .unwrap();
                let a = fixed_line_from_moving(st, m).unwrap();
                ProjectivePoint::new(a[0], a[1], a[2]).unwrap()
            })
            .collect();
        let drift = max_pairwise_distance(&fixed);
        assert!(drift < 1e-8, "foliation {fol}: moving line drifts by {drift:.3e}");
        let line = fit_component(&arcs[fol], ComponentKind::Line).unwrap();
        let fit_pt = ProjectivePoint::new(
            line.coefficients[0],
            line.coefficients[1],
            line.coefficients[2],
        )
        .unwrap();
        assert!(
            fixed[0].distance(fit_pt) < 1e-8,
            "foliation {fol}: displayed line differs from the fitted one"
        );
    }
}

#[test]
fn vertical_arc_point_is_projectively_constant_along_vertical_leaves() {
    // transporting straight up a vertical leaf must keep the vertical
    // foliation's arc point fixed: it depends only on the leaf
    let f = fam();
    let path: Vec<Point> = (0..=10).map(|i| Point::new(1.2, 0.7 + 0.1 * i as f64)).collect();
    let init = FrameState::identity_frame(path[0]);
    let states = transport_many(SystemKind::Cartesian, f, &path, &init, &tight_opts()).unwrap();
    let pts: Vec<ProjectivePoint> = states
        .iter()
        .map(|st| frame_arc_points(SystemKind::Cartesian, st, f).unwrap()[2])
        .collect();
    let drift = max_pairwise_distance(&pts);
    assert!(drift < 1e-6, "vertical arc point drifts by {drift:.3e} along its leaf");
}

#[test]
fn tangent_rank_curve_is_a_harmonic_concurrent_pencil() {
    let f = fam();
    let bbox = SampleBox::new(0.3, 2.5, 0.3, 2.0);
    let web = Web::confocal_tangent(f, 0.0, bbox, 0.05).unwrap();
    let cfg = CollocationConfig {
        degree: 8,
        samples: 700,
        gap_threshold: 1e3,
        seed: 42,
        transforms: Vec::new(),
    };
    let basis = extract_basis(&web, &cfg).unwrap();
    assert_eq!(basis.densities.len(), 3);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(17);
    let samples = web.sample_points(16, &mut rng).unwrap();
    let arcs_v = lie_arcs(&basis, &web, &samples).unwrap();
    let arcs: [Vec<ProjectivePoint>; 4] = std::array::from_fn(|i| arcs_v[i].clone());
    let report = classify(
        &arcs,
        SplitPattern::FourConcurrentHarmonic,
        &ClassifyTolerances::default(),
    )
    .unwrap();
    assert!(report.all_passed(), "{:#?}", report.incidences);
}
