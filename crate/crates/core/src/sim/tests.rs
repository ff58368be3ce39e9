use super::*;
use crate::math::transform;
use crate::model::{stock_character, JointSpec, Primitive, PrimitiveShape};
use approx::assert_relative_eq;
use nalgebra::UnitQuaternion;

fn free_box_model() -> BodyModel {
    BodyModel::single_link(
        "box",
        PrimitiveShape::Box {
            width: 0.2,
            height: 0.2,
            depth: 0.2,
        },
        1.0,
    )
}

/// Point-mass pendulum: a tiny dense capsule at distance L below a spherical
/// joint anchored to the (fixed) base.
fn pendulum_model(length: f64) -> BodyModel {
    let anchor = PrimitiveShape::Box {
        width: 0.05,
        height: 0.05,
        depth: 0.05,
    };
    let bob = PrimitiveShape::Capsule {
        radius: 0.01,
        length: 0.02,
    };
    BodyModel {
        link_names: vec!["anchor".into(), "rod".into()],
        primitives: vec![
            Primitive::new(anchor, 0, crate::math::identity(), 1.0),
            Primitive::new(
                bob,
                1,
                transform(UnitQuaternion::identity(), Vec3::new(0.0, -length, 0.0)),
                1.0,
            ),
        ],
        joints: vec![JointSpec {
            name: "pivot".into(),
            parent_link: 0,
            child_link: 1,
            frame_in_parent: crate::math::identity(),
            frame_in_child: crate::math::identity(),
            limits: [(-3.1, 3.1); 3],
            torque_limit: [1000.0; 3],
        }],
        base_link: 0,
        landmark_attachments: vec![],
    }
}

#[test]
fn torques_zero_at_equilibrium() {
    let model = stock_character(70.0);
    let state = SimState::zero(&model);
    let target = ControlTarget::new(state.q.clone()).unwrap();
    let mech = Mechanism::new(&model).unwrap();
    let tau = compute_torques(&state, &target, &SimConfig::default(), &mech.torque_limits).unwrap();
    assert_relative_eq!(tau.norm(), 0.0);
}

#[test]
fn torque_matches_published_gain_arithmetic() {
    // kp = 4.0, error 0.1 rad, zero velocity: tau = 0.4 N m on that axis.
    let model = stock_character(70.0);
    let state = SimState::zero(&model);
    let mut q = state.q.clone();
    q[0] += 0.1;
    let target = ControlTarget::new(q).unwrap();
    let mech = Mechanism::new(&model).unwrap();
    let cfg = SimConfig::default();
    assert_relative_eq!(cfg.kp, 4.0);
    assert_relative_eq!(cfg.kd, 0.3);
    let tau = compute_torques(&state, &target, &cfg, &mech.torque_limits).unwrap();
    assert_relative_eq!(tau[0], 0.4, epsilon = 1e-12);
    for i in 1..tau.len() {
        assert_relative_eq!(tau[i], 0.0);
    }
}

#[test]
fn torque_saturates_at_limit() {
    let model = stock_character(70.0);
    let state = SimState::zero(&model);
    let mut q = state.q.clone();
    q[0] += 3.0; // wrap keeps this at 3.0 rad; kp * 3 = 12 exceeds a 10 limit
    let target = ControlTarget::new(q).unwrap();
    let mech = Mechanism::new(&model).unwrap();
    let mut limits = mech.torque_limits.clone();
    limits[0] = 10.0;
    let tau = compute_torques(&state, &target, &SimConfig::default(), &limits).unwrap();
    assert_relative_eq!(tau[0], 10.0, epsilon = 1e-12);
}

#[test]
fn ballistic_velocity_change() {
    let model = free_box_model();
    let cfg = SimConfig::default();
    let engine = Engine::new(&model, cfg, Scene::empty()).unwrap();
    let mut state = SimState::zero(&model);
    state.base_position = Vec3::new(0.0, 100.0, 0.0);
    let clip = engine.simulate(&state, None, 1.0).unwrap();
    let v_end = clip.states.last().unwrap().base_lin_vel;
    assert_relative_eq!(v_end.y, -9.8, epsilon = 1e-6);
    assert_relative_eq!(v_end.x, 0.0, epsilon = 1e-9);
}

#[test]
fn pendulum_small_angle_period() {
    // Simple pendulum, L = 1 m, amplitude 0.05 rad: period within 1% of
    // 2 pi sqrt(L/g) over 10 periods.
    let length = 1.0;
    let model = pendulum_model(length);
    let cfg = SimConfig {
        kp: 0.0,
        kd: 0.0,
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg, Scene::empty()).unwrap().with_fixed_base();
    let mut state = SimState::zero(&model);
    state.set_joint_q(0, Vec3::new(0.05, 0.0, 0.0));

    // Count sign changes of the joint angle over 10 expected periods.
    let expected = 2.0 * std::f64::consts::PI * (length / 9.8_f64).sqrt();
    let total_time = 10.0 * expected;
    let steps = (total_time / engine.cfg.dt).ceil() as usize;
    let mut crossings: Vec<f64> = Vec::new();
    let mut prev = state.joint_q(0).x;
    for k in 0..steps {
        let (next, _) = engine.step(&state, None).unwrap();
        state = next;
        let cur = state.joint_q(0).x;
        if prev > 0.0 && cur <= 0.0 {
            // Linear interpolation of the crossing time.
            let t = (k as f64 + prev / (prev - cur)) * engine.cfg.dt;
            crossings.push(t);
        }
        prev = cur;
    }
    assert!(crossings.len() >= 10, "only {} crossings", crossings.len());
    let measured = (crossings[9] - crossings[0]) / 9.0;
    let rel = (measured - expected).abs() / expected;
    assert!(
        rel < 0.01,
        "period {measured:.4} vs {expected:.4} ({:.2}% off)",
        rel * 100.0
    );
}

#[test]
fn box_rests_on_plane_without_drift() {
    let model = free_box_model();
    let cfg = SimConfig::default();
    let engine = Engine::new(&model, cfg, Scene::ground(GroundPlane::default())).unwrap();
    let mut state = SimState::zero(&model);
    state.base_position = Vec3::new(0.0, 0.1, 0.0); // bottom exactly on plane
    let mut max_pen = 0.0_f64;
    let steps = (2.0 / engine.cfg.dt).round() as usize;
    for _ in 0..steps {
        let (next, info) = engine.step(&state, None).unwrap();
        state = next;
        max_pen = max_pen.max(info.contact.max_penetration);
        assert!(info.contact.min_normal_impulse >= 0.0);
        assert!(info.contact.max_cone_violation <= 1e-9);
    }
    assert!(
        max_pen <= engine.cfg.contact_slop + 0.002,
        "max penetration {max_pen}"
    );
    let drift = (state.base_position - Vec3::new(0.0, 0.1, 0.0)).xz().norm();
    assert!(drift <= 1e-3, "horizontal drift {drift}");
}

#[test]
fn momentum_conserved_without_external_forces() {
    // Gravity off, passive joints, gentle motion: linear and angular
    // momentum drift below 1e-6 relative per simulated second (the
    // discretization floor scales with (w dt)^2, so gentle test motion keeps
    // it visible above a genuine momentum leak).
    let model = stock_character(70.0);
    let cfg = SimConfig {
        gravity: 0.0,
        kp: 0.0,
        kd: 0.0,
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg, Scene::empty()).unwrap();
    let mut state = SimState::zero(&model);
    state.base_position = Vec3::new(0.0, 2.0, 0.0);
    state.base_lin_vel = Vec3::new(0.015, 0.005, -0.01);
    state.base_ang_vel = Vec3::new(0.005, 0.01, -0.008);
    for j in 0..model.joints.len() {
        state.set_joint_qd(j, Vec3::new(0.005, -0.004, 0.006));
    }

    let mech = &engine.mech;
    let u0 = mech.velocity_from_state(&state);
    let cache0 = mech.kinematics(&model, &state, &u0);
    let m0 = mech.momentum(&cache0);

    let steps = (1.0 / engine.cfg.dt).round() as usize;
    for _ in 0..steps {
        let (next, _) = engine.step(&state, None).unwrap();
        state = next;
    }
    let u1 = mech.velocity_from_state(&state);
    let cache1 = mech.kinematics(&model, &state, &u1);
    let m1 = mech.momentum(&cache1);

    let lin_rel = (m1.lin - m0.lin).norm() / m0.lin.norm();
    let ang_rel = (m1.ang - m0.ang).norm() / m0.ang.norm();
    assert!(lin_rel < 1e-6, "linear momentum drift {lin_rel:.3e}/s");
    assert!(ang_rel < 1e-6, "angular momentum drift {ang_rel:.3e}/s");
}

#[test]
fn passive_chain_energy_drift_below_one_percent_per_second() {
    // Free fall (no contact), passive chain with internal swinging.
    let model = stock_character(70.0);
    let cfg = SimConfig {
        kp: 0.0,
        kd: 0.0,
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg, Scene::empty()).unwrap();
    let mut state = SimState::zero(&model);
    state.base_position = Vec3::new(0.0, 50.0, 0.0);
    for j in 0..model.joints.len() {
        state.set_joint_q(j, Vec3::new(0.2, -0.1, 0.15));
        state.set_joint_qd(j, Vec3::new(0.5, 0.3, -0.4));
    }

    let g = Vec3::new(0.0, -9.8, 0.0);
    let mech = &engine.mech;
    let energy = |s: &SimState| {
        let u = mech.velocity_from_state(s);
        let cache = mech.kinematics(&model, s, &u);
        mech.kinetic_energy(&cache) + mech.potential_energy(&cache, &g)
    };
    let e0 = energy(&state);
    let steps = (1.0 / engine.cfg.dt).round() as usize;
    for _ in 0..steps {
        let (next, _) = engine.step(&state, None).unwrap();
        state = next;
    }
    let e1 = energy(&state);
    let rel = (e1 - e0).abs() / e0.abs().max(1.0);
    assert!(rel < 0.01, "energy drift {:.3}%/s", rel * 100.0);
}

#[test]
fn zero_gravity_equilibrium_rollout() {
    let model = stock_character(70.0);
    let cfg = SimConfig {
        gravity: 0.0,
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg, Scene::empty()).unwrap();
    let mut s0 = SimState::zero(&model);
    s0.base_position = Vec3::new(0.0, 1.0, 0.0);
    let controls =
        ControlTrajectory::constant(&s0.q, 1.0, crate::spline::DEFAULT_KNOT_INTERVAL).unwrap();
    let clip = engine.simulate(&s0, Some(&controls), 1.0).unwrap();
    let last = clip.states.last().unwrap();
    assert!((last.base_position - s0.base_position).norm() < 1e-6);
    assert!((&last.q - &s0.q).norm() < 1e-6);
}

#[test]
fn knee_converges_toward_constant_target() {
    // Gravity off, constant offset target on one knee: steady-state error
    // below 0.05 rad.
    let model = stock_character(70.0);
    let cfg = SimConfig {
        gravity: 0.0,
        kp: 40.0,
        kd: 4.0,
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg, Scene::empty()).unwrap();
    let mut s0 = SimState::zero(&model);
    s0.base_position = Vec3::new(0.0, 1.0, 0.0);
    let knee = model.joints.iter().position(|j| j.name == "knee_l").unwrap();
    let mut target_q = s0.q.clone();
    target_q[3 * knee] = 0.6;
    let controls =
        ControlTrajectory::constant(&target_q, 3.0, crate::spline::DEFAULT_KNOT_INTERVAL).unwrap();
    let clip = engine.simulate(&s0, Some(&controls), 3.0).unwrap();
    let last = clip.states.last().unwrap();
    let err = (last.joint_q(knee).x - 0.6).abs();
    assert!(err < 0.05, "steady-state knee error {err}");
}

#[test]
fn character_drop_lands_without_deep_penetration() {
    // Stock character dropped from 0.5 m above standing height: must land
    // and never sink a foot below slop + 2 mm at any recorded frame.
    let model = stock_character(70.0);
    let cfg = SimConfig {
        kp: 300.0,
        kd: 30.0,
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg, Scene::ground(GroundPlane::default())).unwrap();
    let mut s0 = SimState::zero(&model);
    // Standing height: ankle 0.06 above sole, legs 0.84, hips 0.05 below base.
    s0.base_position = Vec3::new(0.0, 0.95 + 0.5, 0.0);
    let controls =
        ControlTrajectory::constant(&s0.q, 2.0, crate::spline::DEFAULT_KNOT_INTERVAL).unwrap();
    let clip = engine.simulate(&s0, Some(&controls), 2.0).unwrap();

    let (lf, rf) = model.foot_links().unwrap();
    let fk = crate::kinematics::FkContext::new(&model);
    let plane = GroundPlane::default();
    let mut lowest = f64::INFINITY;
    for state in &clip.states {
        let res = fk.run(state).unwrap();
        for link in [lf, rf] {
            for cand in &engine.mech.contacts[link] {
                let p = (res.link_poses[link] * nalgebra::Point3::from(cand.local)).coords;
                lowest = lowest.min(plane.signed_distance(&p) - cand.radius);
            }
        }
    }
    assert!(
        lowest >= -(engine.cfg.contact_slop + 0.002),
        "foot sank to {lowest}"
    );
    // It actually landed: base ends well below the drop height.
    assert!(clip.states.last().unwrap().base_position.y < 1.2);
}

#[test]
fn quaternion_norm_preserved() {
    let model = stock_character(70.0);
    let cfg = SimConfig {
        kp: 300.0,
        kd: 30.0,
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg, Scene::ground(GroundPlane::default())).unwrap();
    let mut state = SimState::zero(&model);
    state.base_position = Vec3::new(0.0, 1.2, 0.0);
    state.base_ang_vel = Vec3::new(0.4, 0.8, -0.3);
    for _ in 0..400 {
        let (next, _) = engine.step(&state, None).unwrap();
        state = next;
        let norm = state.base_orientation.coords.norm();
        assert!((norm - 1.0).abs() < 1e-9, "quaternion norm {norm}");
    }
}

#[test]
fn rollouts_are_bit_deterministic() {
    let model = stock_character(70.0);
    let cfg = SimConfig {
        kp: 300.0,
        kd: 30.0,
        ..SimConfig::default()
    };
    let engine = Engine::new(&model, cfg, Scene::ground(GroundPlane::default())).unwrap();
    let mut s0 = SimState::zero(&model);
    s0.base_position = Vec3::new(0.0, 1.1, 0.0);
    let controls =
        ControlTrajectory::constant(&s0.q, 1.0, crate::spline::DEFAULT_KNOT_INTERVAL).unwrap();
    let a = engine.simulate(&s0, Some(&controls), 1.0).unwrap();
    let b = engine.simulate(&s0, Some(&controls), 1.0).unwrap();
    for (sa, sb) in a.states.iter().zip(b.states.iter()) {
        assert_eq!(sa.base_position, sb.base_position);
        assert_eq!(sa.q, sb.q);
        assert_eq!(sa.qd, sb.qd);
    }
}

#[test]
fn soft_floor_allows_deeper_settling_than_rigid() {
    let model = free_box_model();
    let cfg = SimConfig::default();
    let rigid = Engine::new(&model, cfg, Scene::ground(GroundPlane::default())).unwrap();
    let mut soft_plane = GroundPlane::default();
    soft_plane.stiffness = Some(2000.0);
    soft_plane.damping = 50.0;
    let soft = Engine::new(&model, cfg, Scene::ground(soft_plane)).unwrap();

    // Start resting on the surface so both settle without an impact phase.
    let mut s0 = SimState::zero(&model);
    s0.base_position = Vec3::new(0.0, 0.1, 0.0);
    let settle = |engine: &Engine| -> f64 {
        let mut state = s0.clone();
        for _ in 0..(2.0 / cfg.dt) as usize {
            let (next, _) = engine.step(&state, None).unwrap();
            state = next;
        }
        state.base_position.y
    };
    let y_rigid = settle(&rigid);
    let y_soft = settle(&soft);
    // Spring equilibrium: k x = m g -> x = 9.8/2000 ~ 4.9 mm below the
    // surface, clearly deeper than the rigid slop.
    assert!(
        y_soft < y_rigid - 0.002,
        "soft floor {y_soft} vs rigid {y_rigid}"
    );
    assert!(y_soft > 0.08, "soft floor collapsed: {y_soft}");
}

#[test]
fn character_rests_on_static_box() {
    let model = free_box_model();
    let cfg = SimConfig::default();
    let scene = Scene {
        plane: Some(GroundPlane::default()),
        boxes: vec![StaticBox {
            pose: transform(UnitQuaternion::identity(), Vec3::new(0.0, 0.25, 0.0)),
            half_extents: Vec3::new(0.5, 0.25, 0.5),
            friction: 0.8,
        }],
    };
    let engine = Engine::new(&model, cfg, scene).unwrap();
    let mut state = SimState::zero(&model);
    state.base_position = Vec3::new(0.0, 0.75, 0.0); // resting on top of the box
    for _ in 0..(1.0 / cfg.dt) as usize {
        let (next, _) = engine.step(&state, None).unwrap();
        state = next;
    }
    assert!(
        (state.base_position.y - 0.6).abs() < 0.01,
        "box top rest height {} (expected ~0.6)",
        state.base_position.y
    );
}

#[test]
fn foot_contact_trivial_cases() {
    let model = stock_character(70.0);
    let plane = GroundPlane::default();
    let mut standing = SimState::zero(&model);
    standing.base_position = Vec3::new(0.0, 0.95, 0.0);
    let clip_standing =
        MotionClip::from_states(&model, vec![standing.clone()], 1.0 / 25.0).unwrap();
    let flags = detect_foot_contacts(
        &clip_standing,
        &model,
        &plane,
        CONTACT_DISTANCE_KINEMATIC,
        CONTACT_MIN_VERTICES,
    )
    .unwrap();
    assert_eq!(flags[0], [true, true], "feet on plane should be in contact");

    let mut hovering = standing.clone();
    hovering.base_position.y += 0.1;
    let clip_hover = MotionClip::from_states(&model, vec![hovering], 1.0 / 25.0).unwrap();
    let flags = detect_foot_contacts(
        &clip_hover,
        &model,
        &plane,
        CONTACT_DISTANCE_KINEMATIC,
        CONTACT_MIN_VERTICES,
    )
    .unwrap();
    assert_eq!(flags[0], [false, false], "feet 0.1 m up should be free");
}

#[test]
fn foot_contact_flips_at_descent_frame() {
    // Constructed descent: the character lowers through the threshold at a
    // known frame.
    let model = stock_character(70.0);
    let plane = GroundPlane::default();
    let mut states = Vec::new();
    for t in 0..30 {
        let mut s = SimState::zero(&model);
        // Starts 50 mm above standing height, descends 5 mm per frame.
        s.base_position = Vec3::new(0.0, 0.95 + 0.05 - 0.005 * t as f64, 0.0);
        states.push(s);
    }
    let clip = MotionClip::from_states(&model, states, 1.0 / 25.0).unwrap();
    let flags = detect_foot_contacts(
        &clip,
        &model,
        &plane,
        CONTACT_DISTANCE_KINEMATIC,
        CONTACT_MIN_VERTICES,
    )
    .unwrap();
    // Sole reaches d <= 0.005 when 0.05 - 0.005 t <= 0.005, i.e. frame 9.
    for (t, f) in flags.iter().enumerate() {
        let expect = t >= 9;
        assert_eq!(f[0], expect, "frame {t}");
        assert_eq!(f[1], expect, "frame {t}");
    }
}
