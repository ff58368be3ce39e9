fn main() {
    use physmotion::sim::*;
    use physmotion::model::stock_character;
    use physmotion::state::SimState;
    use physmotion::math::Vec3;
    use physmotion::plane::GroundPlane;
    let model = stock_character(70.0);
    let cfg = SimConfig { kp: 300.0, kd: 30.0, ..SimConfig::default() };
    let engine = Engine::new(&model, cfg, Scene::ground(GroundPlane::default())).unwrap();
    let mut state = SimState::zero(&model);
    state.base_position = Vec3::new(0.0, 1.2, 0.0);
    state.base_ang_vel = Vec3::new(0.4, 0.8, -0.3);
    for k in 0..400 {
        match engine.step(&state, None) {
            Ok((next, info)) => {
                state = next;
                if k % 50 == 0 {
                    println!("step {k}: base y {:.3} qnorm dev {:.2e} contacts {}", state.base_position.y,
                        (state.base_orientation.coords.norm()-1.0).abs(), info.contact.contact_count);
                }
            }
            Err(e) => {
                println!("FAILED at step {k}: {e}");
                println!("base pos {:?} vel {:?}", state.base_position, state.base_lin_vel);
                println!("q finite: {}", state.q.iter().all(|v| v.is_finite()));
                let mx = state.q.iter().cloned().fold(0.0f64, |a,b| a.max(b.abs()));
                println!("max |q| {mx}");
                let mv = state.qd.iter().cloned().fold(0.0f64, |a,b| a.max(b.abs()));
                println!("max |qd| {mv}");
                break;
            }
        }
    }
}
