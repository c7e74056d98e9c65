//! Independent oracles for the numeric kernels: closed-form forward
//! kinematics, the algebraic circle through synthesized points, and byte
//! comparison of codec round trips.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use proptest::prelude::*;
use rand::Rng;
use taskseq_core::concept::{ActorRole, PropertyValue};
use taskseq_core::engines::{inverse_kinematics, IkError};
use taskseq_core::tasks::{build_model, circle_fit, CircleFitError};
use taskseq_core::wire::{decode_state, encode_state};
use taskseq_core::world::{
    Attachment, AttachmentParent, JointVector, ObjectState, Surface, WorldState,
};
use taskseq_core::{seed, Pose};

/// Closed-form end-effector pose of links (1, 1, 0.5).
fn fk_oracle(q: [f64; 3]) -> (f64, f64, f64) {
    let (a, b, c) = (q[0], q[0] + q[1], q[0] + q[1] + q[2]);
    let x = a.cos() + b.cos() + 0.5 * c.cos();
    let y = a.sin() + b.sin() + 0.5 * c.sin();
    (x, y, c)
}

fn wrap(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

fn residual(q: [f64; 3], target: (f64, f64, f64)) -> f64 {
    let (x, y, t) = fk_oracle(q);
    (x - target.0).hypot(y - target.1) + wrap(t - target.2).abs()
}

#[test]
fn ik_residual_on_random_reachable_targets() {
    let started = Instant::now();
    let mut rng = seed::rng(0x1c);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let q_true = [
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
        ];
        let target = fk_oracle(q_true);
        let pose = Pose::new(target.0, target.1, wrap(target.2));
        let start = JointVector([
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
        ]);
        let q = inverse_kinematics(&pose, &start).expect("reachable target");
        worst = worst.max(residual(q.0, target));
    }
    assert!(worst <= 1e-6, "worst residual {worst}");
    assert!(started.elapsed().as_secs() <= 30);
}

#[test]
fn ik_examples() {
    let q = inverse_kinematics(&Pose::new(2.5, 0.0, 0.0), &JointVector([0.0; 3])).unwrap();
    assert!(residual(q.0, (2.5, 0.0, 0.0)) <= 1e-6);
    let q = inverse_kinematics(&Pose::new(1.5, 1.0, 0.0), &JointVector([0.1, 0.1, 0.1])).unwrap();
    assert!(residual(q.0, (1.5, 1.0, 0.0)) <= 1e-6);
    assert_eq!(
        inverse_kinematics(&Pose::new(3.5, 0.0, 0.0), &JointVector([0.0; 3])),
        Err(IkError::Unreachable)
    );
}

#[test]
fn circle_fit_exact_on_noiseless_points() {
    let mut rng = seed::rng(5);
    for _ in 0..200 {
        let c = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let r = rng.random_range(0.1..3.0);
        let a0 = rng.random_range(-PI..PI);
        let span = rng.random_range(0.3..2.0 * PI);
        let n = rng.random_range(3..20);
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let a = a0 + span * i as f64 / n as f64;
                [c[0] + r * a.cos(), c[1] + r * a.sin()]
            })
            .collect();
        let (fc, fr) = circle_fit(&pts).unwrap();
        assert!((fc[0] - c[0]).abs() < 1e-6 && (fc[1] - c[1]).abs() < 1e-6);
        assert!((fr - r).abs() < 1e-6);
    }
    let five: Vec<[f64; 2]> = (0..5)
        .map(|i| {
            let a = i as f64 * 1.1;
            [1.0 + 0.7 * a.cos(), 1.0 + 0.7 * a.sin()]
        })
        .collect();
    let (c, r) = circle_fit(&five).unwrap();
    assert!((c[0] - 1.0).abs() < 1e-6 && (c[1] - 1.0).abs() < 1e-6 && (r - 0.7).abs() < 1e-6);
    assert_eq!(
        circle_fit(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]),
        Err(CircleFitError::IllConditioned)
    );
}

#[test]
fn width_sampling_mean() {
    let model = build_model("grasp", &BTreeMap::new()).unwrap();
    let n = 10_000;
    let mean = (0..n)
        .map(|s| {
            model
                .sample_actor_configuration(s)
                .get(ActorRole::TargetObject, "width")
                .unwrap()
        })
        .sum::<f64>()
        / n as f64;
    assert!((mean - 0.08).abs() <= 0.002, "{mean}");

    let mut fixed = model.clone();
    fixed
        .override_actor(ActorRole::TargetObject, "width", PropertyValue::Range([0.08, 0.08]))
        .unwrap();
    for s in 0..20 {
        assert_eq!(
            fixed.sample_actor_configuration(s).get(ActorRole::TargetObject, "width"),
            Some(0.08)
        );
    }
    assert_eq!(model.sample_actor_configuration(9), model.sample_actor_configuration(9));
}

fn real() -> impl Strategy<Value = f64> {
    prop_oneof![
        -10.0..10.0f64,
        Just(0.0),
        Just(-0.0),
        Just(0.1),
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
    ]
}

fn pose() -> impl Strategy<Value = Pose> {
    (real(), real(), -PI..PI).prop_map(|(x, y, t)| Pose::new(x, y, t))
}

fn object() -> impl Strategy<Value = ObjectState> {
    (pose(), real(), 0.0..0.2f64, 0.0..10.0f64, any::<bool>()).prop_map(|(pose, height, width, mass, crushed)| {
        ObjectState {
            pose,
            height,
            width,
            mass,
            crushed,
        }
    })
}

prop_compose! {
    fn world()(
        q in prop::array::uniform3(-PI..PI),
        ee in pose(),
        ee_height in real(),
        aperture in 0.0..0.15f64,
        objects in prop::collection::btree_map("[a-z]{1,6}", object(), 0..4),
        surface in (real(), real(), 0.0..1.0f64, 0.0..1.0f64, real()),
        wrist in 0.0..100.0f64,
        contacts in any::<[bool; 2]>(),
        torques in prop::array::uniform2(0.0..20.0f64),
        sigma in 0.0..0.1f64,
        time_step in any::<u64>(),
        hinge in (pose(), 0.1..2.0f64),
    ) -> WorldState {
        let mut w = WorldState::empty(JointVector(q), ee, 0.15);
        w.ee_height = ee_height;
        w.aperture = aperture;
        w.surfaces.insert("table".into(), Surface {
            center: [surface.0, surface.1],
            half_extents: [surface.2, surface.3],
            elevation: surface.4,
        });
        let ids: Vec<String> = objects.keys().cloned().collect();
        w.objects = objects;
        if let Some(first) = ids.first() {
            w.target = Some(first.clone());
            w.attach(Attachment {
                child: first.clone(),
                parent: AttachmentParent::EnvironmentRigid { hinge: hinge.0, radius: hinge.1 },
            });
        }
        if let Some(second) = ids.get(1) {
            w.attach(Attachment {
                child: second.clone(),
                parent: AttachmentParent::EnvironmentResting { surface: "table".into() },
            });
        }
        w.wrist_force = wrist;
        w.jaw_contacts = contacts;
        w.jaw_torques = torques;
        w.distance_sigma = sigma;
        w.time_step = time_step;
        w
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn codec_round_trip_is_identity(w in world()) {
        let bytes = encode_state(&w).unwrap();
        let back = decode_state(&bytes).unwrap();
        prop_assert_eq!(&back, &w);
        // Bit-level equality, including signed zeros.
        prop_assert_eq!(back.ee.x.to_bits(), w.ee.x.to_bits());
        prop_assert_eq!(back.ee_height.to_bits(), w.ee_height.to_bits());
        prop_assert_eq!(encode_state(&back).unwrap(), bytes);
    }
}
