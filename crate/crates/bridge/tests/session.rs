use assembly_bridge::{Command, Param, Session, SimStatus};
use assembly_core::{EventKind, Pose64, Scenario64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn session(name: &str) -> Session {
    Session::new(Scenario64::load(name).unwrap(), 0).unwrap()
}

#[test]
fn fresh_session_snapshot_is_step_zero() {
    let s = session("arrow4");
    let snap = s.snapshot();
    assert_eq!(snap.step, 0);
    assert_eq!(snap.sim_status, SimStatus::Running);
    assert_eq!(snap.hands.len(), 2);
    assert_eq!(snap.components.len(), 4);
    assert!((snap.normalized_loss - 1.0).abs() < 1e-12);
    for c in &snap.components {
        assert_eq!(c.at_goal, c.goal_loss <= 1e-4);
    }
}

#[test]
fn pause_then_three_single_steps() {
    let mut s = session("arrow4");
    for _ in 0..5 {
        s.tick().unwrap();
    }
    assert!(s.submit(1, Command::Pause).is_accepted());
    s.tick().unwrap();
    let at = s.world().step;
    assert_eq!(s.snapshot().sim_status, SimStatus::Paused);
    s.tick().unwrap();
    assert_eq!(s.world().step, at);
    for k in 0..3 {
        assert!(s.submit(2 + k, Command::SingleStep).is_accepted());
    }
    assert_eq!(s.tick().unwrap(), 3);
    assert_eq!(s.world().step, at + 3);
    s.tick().unwrap();
    assert_eq!(s.world().step, at + 3);
    s.submit(9, Command::Resume);
    s.tick().unwrap();
    assert_eq!(s.world().step, at + 4);
}

#[test]
fn reset_with_same_seed_is_reproducible() {
    let mut s = session("ramp8");
    s.submit(0, Command::Pause);
    s.submit(1, Command::Reset { seed: 7 });
    s.tick().unwrap();
    let first = s.snapshot();
    s.submit(2, Command::Resume);
    for _ in 0..40 {
        s.tick().unwrap();
    }
    s.submit(3, Command::Pause);
    s.submit(4, Command::Reset { seed: 7 });
    s.tick().unwrap();
    assert_eq!(s.snapshot(), first);
    assert_eq!(first.step, 0);
    assert_eq!(first.log_len, 0);
}

#[test]
fn bad_commands_rejected() {
    let mut s = session("arrow4");
    let ack = s.submit(
        5,
        Command::MoveComponent {
            id: 4,
            pose: Pose64::identity(),
        },
    );
    assert!(!ack.is_accepted());
    assert_eq!(ack.ack_seq, Some(5));
    assert!(ack.reason.unwrap().starts_with("id"));
}

#[test]
fn move_while_paused_lands_on_next_step() {
    let mut s = session("arrow4");
    s.submit(0, Command::Pause);
    s.tick().unwrap();
    let target = Pose64::planar(0.3, 0.3, 0.5).unwrap();
    s.submit(1, Command::MoveComponent { id: 2, pose: target });
    s.tick().unwrap();
    assert_ne!(s.world().components[2], target);
    s.submit(2, Command::SingleStep);
    s.tick().unwrap();
    assert_eq!(s.world().components[2], target);
    let rec = s.log().of_kind(EventKind::Disturbance).next().unwrap();
    assert_eq!(rec.component, Some(2));
}

#[test]
fn set_param_changes_threshold() {
    let mut s = session("arrow4");
    s.submit(0, Command::SetParam { name: Param::EpsilonG, value: 100.0 });
    s.tick().unwrap();
    assert!(s.snapshot().components.iter().all(|c| c.at_goal));
    assert_eq!(s.snapshot().sim_status, SimStatus::Converged);
}

fn run_until_converged(s: &mut Session, budget: u64) -> bool {
    for _ in 0..budget {
        if s.snapshot().sim_status == SimStatus::Converged {
            return true;
        }
        s.tick().unwrap();
    }
    s.snapshot().sim_status == SimStatus::Converged
}

/// Drag an assembled beam somewhere on the table twenty times; each time the
/// loss must spike and then return to the goal.
#[test]
fn recovers_from_twenty_operator_moves() {
    let mut s = session("arrow4");
    assert!(run_until_converged(&mut s, 6000));
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..20u64 {
        let id = rng.random_range(0..4usize);
        let pose = Pose64::planar(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-3.1..3.1),
        )
        .unwrap();
        let before = s.log().count(EventKind::Disturbance);
        assert!(s.submit(k, Command::MoveComponent { id, pose }).is_accepted());
        s.tick().unwrap();
        assert_eq!(s.log().count(EventKind::Disturbance), before + 1);
        let spiked = s.snapshot().total_loss;
        assert!(spiked > 1e-4, "move {k} did not disturb anything");
        let t0 = s.world().step;
        assert!(run_until_converged(&mut s, 6000), "move {k} did not recover");
        assert!(s.world().step > t0);
        let snap = s.snapshot();
        assert!(snap.total_loss < 0.05 * spiked);
    }
}
