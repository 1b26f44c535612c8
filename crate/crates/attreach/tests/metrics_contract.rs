//! Contract tests for the metric layer: shooting solver against a
//! forward-construction oracle, conservation along geodesic flow, and the
//! ordering semantics of ball inclusion.

use attreach::metrics::{
    ball_contains, ball_inclusion, geodesic_distance_q, geodesic_flow, p_distance,
    product_distance, MetricBall, MetricError, MetricPair, SpdMatrix, State,
};
use attreach::so3::{bi_invariant_distance, exp_so3, log_so3, Mat3, Rotation, Vec3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
    let angle = rng.gen_range(0.0..2.5);
    exp_so3(&(angle * random_unit(rng)))
}

/// Random SPD matrix with eigenvalues in [1/sqrt(cond), sqrt(cond)].
fn random_spd(rng: &mut ChaCha8Rng, cond: f64) -> SpdMatrix {
    let basis = random_rotation(rng);
    let half = cond.sqrt();
    let eigs = Vec3::new(
        rng.gen_range(1.0 / half..half),
        rng.gen_range(1.0 / half..half),
        rng.gen_range(1.0 / half..half),
    );
    let m = basis.matrix() * Mat3::from_diagonal(&eigs) * basis.matrix().transpose();
    SpdMatrix::new(0.5 * (m + m.transpose())).unwrap()
}

#[test]
fn shooting_recovers_forward_constructed_velocity() {
    // Deep-interior draws only: short constructed geodesics on mildly
    // anisotropic metrics, where the connecting geodesic is unique. Near
    // the cut locus two branches of nearly equal length coexist and the
    // solver contract does not pick between them.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let q = random_spd(&mut rng, 16.0);
        let r1 = random_rotation(&mut rng);
        let w0 = rng.gen_range(0.05..0.5) * random_unit(&mut rng);
        let len = w0.dot(&(q.matrix() * w0)).sqrt();
        if len > 0.9 {
            continue;
        }
        let r2 = geodesic_flow(&q, &r1, &w0, 1.0).rotation;
        let d = geodesic_distance_q(&q, &r1, &r2).unwrap();
        assert!(
            (d - len).abs() < 1e-7,
            "distance {d} vs constructed length {len}"
        );
        let w_found = attreach::metrics::shoot_velocity(
            &attreach::metrics::ShootingConfig::default(),
            &q,
            &r1,
            &r2,
        )
        .unwrap();
        assert!(
            (w_found - w0).norm() < 1e-6,
            "recovered velocity off by {:.3e}",
            (w_found - w0).norm()
        );
    }
}

#[test]
fn distance_never_exceeds_subgroup_path_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let q = random_spd(&mut rng, 30.0);
        let r1 = random_rotation(&mut rng);
        let r2 = &r1 * &exp_so3(&(rng.gen_range(0.05..1.2) * random_unit(&mut rng)));
        let w = log_so3(&r1.between(&r2)).unwrap();
        let subgroup_len = w.dot(&(q.matrix() * w)).sqrt();
        match geodesic_distance_q(&q, &r1, &r2) {
            Ok(d) => assert!(
                d <= subgroup_len + 1e-6,
                "distance {d} exceeds subgroup length {subgroup_len}"
            ),
            Err(MetricError::BeyondShootingRadius { .. }) => {}
            Err(e) => panic!("unexpected shooting failure: {e}"),
        }
    }
}

#[test]
fn distance_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let q = random_spd(&mut rng, 20.0);
        let r1 = random_rotation(&mut rng);
        let r2 = &r1 * &exp_so3(&(rng.gen_range(0.1..1.0) * random_unit(&mut rng)));
        let d12 = geodesic_distance_q(&q, &r1, &r2).unwrap();
        let d21 = geodesic_distance_q(&q, &r2, &r1).unwrap();
        assert!((d12 - d21).abs() < 1e-7, "asymmetry {d12} vs {d21}");
    }
}

#[test]
fn geodesic_flow_conserves_quadratic_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let q = random_spd(&mut rng, 100.0);
        let r0 = random_rotation(&mut rng);
        let w0 = rng.gen_range(0.2..1.5) * random_unit(&mut rng);
        let end = geodesic_flow(&q, &r0, &w0, 1.0);
        assert!(
            end.energy_drift < 1e-9,
            "conserved-form drift {:.3e}",
            end.energy_drift
        );
    }
}

#[test]
fn flow_time_scaling_matches_velocity_scaling() {
    // gamma_{w}(t/2) == gamma_{w/2}(t) scaled: endpoint at t=0.5 with w
    // equals endpoint at t=1 with w/2.
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let q = random_spd(&mut rng, 40.0);
    let r0 = random_rotation(&mut rng);
    let w0 = Vec3::new(0.4, -0.7, 0.2);
    let a = geodesic_flow(&q, &r0, &w0, 0.5).rotation;
    let b = geodesic_flow(&q, &r0, &(0.5 * w0), 1.0).rotation;
    assert!((a.matrix() - b.matrix()).norm() < 1e-9);
}

#[test]
fn product_distance_combines_factors_in_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let m = MetricPair::new(random_spd(&mut rng, 10.0), random_spd(&mut rng, 10.0));
    let r1 = random_rotation(&mut rng);
    let r2 = &r1 * &exp_so3(&Vec3::new(0.2, 0.1, -0.3));
    let o1 = Vec3::new(0.5, -0.2, 0.8);
    let o2 = Vec3::new(0.4, 0.1, 0.6);
    let s1 = State::new(r1, o1);
    let s2 = State::new(r2, o2);
    let dq = geodesic_distance_q(&m.q, &r1, &r2).unwrap();
    let dp = p_distance(&m.p, &o1, &o2);
    let d = product_distance(&m, &s1, &s2).unwrap();
    assert!((d - (dq * dq + dp * dp).sqrt()).abs() < 1e-10);
}

#[test]
fn inclusion_predicts_sampled_membership() {
    // Q1 >= Q2, P1 >= P2: every state inside the fine-metric ball lies in
    // the coarse-metric ball of equal center and radius.
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..10 {
        let q2 = random_spd(&mut rng, 8.0);
        let p2 = random_spd(&mut rng, 8.0);
        let bump_q = random_spd(&mut rng, 4.0);
        let bump_p = random_spd(&mut rng, 4.0);
        let q1 = SpdMatrix::new(q2.matrix() + 0.3 * bump_q.matrix()).unwrap();
        let p1 = SpdMatrix::new(p2.matrix() + 0.3 * bump_p.matrix()).unwrap();
        let fine = MetricPair::new(q1, p1);
        let coarse = MetricPair::new(q2, p2);
        assert!(ball_inclusion(&fine, &coarse));
        assert!(!ball_inclusion(&coarse, &fine));

        let center = State::new(random_rotation(&mut rng), Vec3::new(0.1, -0.4, 0.3));
        let radius = 0.25;
        let fine_ball = MetricBall::new(center, radius, fine);
        let coarse_ball = MetricBall::new(center, radius, coarse);
        for _ in 0..20 {
            let dr = rng.gen_range(0.0..radius) * random_unit(&mut rng);
            let dv = rng.gen_range(0.0..radius) * random_unit(&mut rng);
            let s = State::new(&center.r * &exp_so3(&dr), center.omega + dv);
            if ball_contains(&fine_ball, &s).unwrap() {
                assert!(ball_contains(&coarse_ball, &s).unwrap());
            }
        }
    }
}

#[test]
fn identity_metric_distance_is_bi_invariant_angle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let q = SpdMatrix::identity();
    for _ in 0..10 {
        let r1 = random_rotation(&mut rng);
        let r2 = &r1 * &exp_so3(&(rng.gen_range(0.01..1.5) * random_unit(&mut rng)));
        let d = geodesic_distance_q(&q, &r1, &r2).unwrap();
        assert!((d - bi_invariant_distance(&r1, &r2)).abs() < 1e-8);
    }
}
