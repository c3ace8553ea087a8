use cliffbif::bifurcation::{
    continue_branch, diagram, properness_violations, BifurcationInstant, ContinuationConfig,
    Direction, Termination,
};

fn window(a_min: f64) -> ContinuationConfig {
    ContinuationConfig {
        a_min,
        ds_max: 0.05,
        ..ContinuationConfig::default()
    }
}

#[test]
fn branches_up_to_two_crossings_are_disjoint() {
    let d = diagram(&[(1, 1), (1, 2), (3, 2)], &window(0.2), 3).unwrap();
    assert!(d.disjoint, "min distance {}", d.min_distance);
    for lb in &d.branches {
        let expected = lb.instant.expected_invariants();
        assert!(lb.all_points().all(|p| p.invariants() == expected));
        assert!(lb.positive.points.iter().all(|p| p.s > 0.0));
        assert!(lb.negative.points.iter().all(|p| p.s < 0.0));
        assert_eq!(lb.positive.termination, Termination::ReachedAMin);
    }
    assert!(
        properness_violations(d.branches.iter().flat_map(|b| b.all_points()), 0.999).is_empty()
    );
}

#[test]
fn branch_three_two_leaves_the_trivial_branch_to_the_left() {
    let inst = BifurcationInstant::new(3, 2).unwrap();
    let cfg = ContinuationConfig {
        max_points: 12,
        ..window(0.2)
    };
    let b = continue_branch(&inst, Direction::Positive, &cfg);
    assert_eq!(b.points.len(), 12);
    assert!(b.points.last().unwrap().a < inst.a_jk);
    assert!(b.points.iter().all(|p| p.f_residual.abs() <= 1e-8));
}

#[test]
fn mirrored_directions_agree() {
    let inst = BifurcationInstant::new(1, 1).unwrap();
    let cfg = ContinuationConfig {
        max_points: 20,
        ..window(0.25)
    };
    let p = continue_branch(&inst, Direction::Positive, &cfg);
    let n = continue_branch(&inst, Direction::Negative, &cfg);
    for (x, y) in p.points.iter().zip(&n.points) {
        assert!((x.a - y.a).abs() < 1e-8 && (x.s + y.s).abs() < 1e-8);
    }
}
