//! Dev tool: grid-searches arm joint angles for paddle stances used as the
//! built-in reference poses. Run manually:
//!
//!     cargo test -p rally-core --test pose_explorer -- --ignored --nocapture

use nalgebra::Vector3;
use rally_core::sim::{PhysicsParams, RobotModel};

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Rejects poses within 8% of any joint range end (keeps the joint-margin
/// style penalty silent at reset) plus collisions and backward normals.
fn stance_cost(
    model: &RobotModel,
    q: &[f64; 8],
    target: &Vector3<f64>,
    target_normal: &Vector3<f64>,
    ignore_x: bool,
) -> Option<f64> {
    for (qi, joint) in q.iter().zip(&model.joints) {
        let margin = 0.08 * (joint.limits[1] - joint.limits[0]);
        if *qi < joint.limits[0] + margin || *qi > joint.limits[1] - margin {
            return None;
        }
    }
    let chain = model.chain();
    let flags = chain.collision_flags(q, &PhysicsParams::default());
    if flags.table || flags.self_collision {
        return None;
    }
    let (center, normal) = chain.paddle_pose(q);
    let mut diff = center - target;
    if ignore_x {
        diff.x = 0.0;
    }
    let align = normal.dot(&target_normal.normalize());
    if align < 0.3 {
        return None;
    }
    Some(diff.norm_squared() + 0.8 * (1.0 - align) * (1.0 - align))
}

#[test]
#[ignore]
fn explore_center_pose() {
    let model = RobotModel::default();
    let target = Vector3::new(0.0, -1.45, 0.35);
    let normal = Vector3::new(0.0, 0.9, 0.44);
    let mut best: Vec<(f64, [f64; 8])> = Vec::new();
    for &q1 in &[0.3, 0.5, 0.7] {
        for &t1 in &linspace(-1.7, 1.1, 57) {
            for &t2 in &linspace(-1.7, 1.1, 57) {
                for &t3 in &linspace(-1.9, 1.9, 77) {
                    let q = [0.0, q1, 0.0, t1, t2, 0.0, t3, 0.0];
                    if let Some(cost) = stance_cost(&model, &q, &target, &normal, false) {
                        best.push((cost, q));
                    }
                }
            }
        }
    }
    best.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (cost, q) in best.iter().take(5) {
        let (c, n) = model.chain().paddle_pose(q);
        println!("cost {cost:.5} q {q:?}\n  center {c:?} normal {n:?}");
    }
}

#[test]
#[ignore]
fn explore_forehand_pose() {
    let model = RobotModel::default();
    let target = Vector3::new(0.0, -1.45, 0.35); // x adjusted via the gantry
    let normal = Vector3::new(0.0, 0.9, 0.44);
    let mut best: Vec<(f64, [f64; 8])> = Vec::new();
    for &q1 in &[0.3, 0.5, 0.7] {
        for &yaw in &[-0.7, -0.5, -0.35] {
            for &roll in &[-0.7, -0.5, 0.5, 0.7] {
                for &t1 in &linspace(-1.7, 1.1, 41) {
                    for &t2 in &linspace(-1.7, 1.1, 41) {
                        for &t3 in &linspace(-1.9, 1.9, 53) {
                            let q = [0.0, q1, yaw, t1, t2, roll, t3, 0.0];
                            if let Some(cost) = stance_cost(&model, &q, &target, &normal, true) {
                                best.push((cost, q));
                            }
                        }
                    }
                }
            }
        }
    }
    best.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (cost, q) in best.iter().take(8) {
        let (c, n) = model.chain().paddle_pose(q);
        println!("cost {cost:.5} q {q:?}\n  center {c:?} normal {n:?}");
    }
}

#[test]
#[ignore]
fn probe_ball_corridor() {
    use rally_core::rng::rng_for;
    use rally_core::sim::{sample_throw, step_ball, BallDistribution, BallState};

    let physics = PhysicsParams::default();
    let dist = BallDistribution::default();
    let mut rng = rng_for(1234, &[0]);
    let plane_y = -1.35;
    let mut crossings: Vec<(f64, f64)> = Vec::new();
    for _ in 0..300 {
        let throw = sample_throw(&dist, &physics, &mut rng).unwrap();
        let mut ball = BallState::new(throw.start, throw.velocity);
        let mut bounced = false;
        let mut prev = ball;
        for _ in 0..4000 {
            let (next, ev) = step_ball(&ball, 1e-3, &physics);
            if ev.bounce.is_some() {
                bounced = true;
            }
            if bounced && prev.position.y > plane_y && next.position.y <= plane_y {
                let f = (prev.position.y - plane_y) / (prev.position.y - next.position.y);
                let x = prev.position.x + (next.position.x - prev.position.x) * f;
                let z = prev.position.z + (next.position.z - prev.position.z) * f;
                crossings.push((x, z));
                break;
            }
            prev = next;
            ball = next;
            if !ball.live {
                break;
            }
        }
    }
    let n = crossings.len() as f64;
    let mx = crossings.iter().map(|c| c.0).sum::<f64>() / n;
    let mz = crossings.iter().map(|c| c.1).sum::<f64>() / n;
    let zmin = crossings.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let zmax = crossings.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let xmin = crossings.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let xmax = crossings.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    println!(
        "{} crossings at y={plane_y}: x mean {mx:.3} range [{xmin:.3}, {xmax:.3}], z mean {mz:.3} range [{zmin:.3}, {zmax:.3}]",
        crossings.len()
    );
}
