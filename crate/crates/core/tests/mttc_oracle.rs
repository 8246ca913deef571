use lanegraph::risk::mttc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-3;
const HORIZON: f64 = 120.0;

/// Steps both vehicles forward 1 ms at a time and reports the first step at which
/// the follower has reached the leader.
fn integrate(gap: f64, vf: f64, vl: f64, af: f64, al: f64) -> Option<f64> {
    let (mut xf, mut xl, mut vf, mut vl) = (0.0, gap, vf, vl);
    let steps = (HORIZON / STEP) as usize;
    for k in 1..=steps {
        xf += vf * STEP + 0.5 * af * STEP * STEP;
        xl += vl * STEP + 0.5 * al * STEP * STEP;
        vf += af * STEP;
        vl += al * STEP;
        if xf >= xl {
            return Some(k as f64 * STEP);
        }
    }
    None
}

#[test]
fn closed_form_matches_kinematic_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut collisions = 0;
    for case in 0..1000 {
        let gap = rng.gen_range(0.5..60.0);
        let vl = rng.gen_range(0.0..25.0);
        let vf = vl + rng.gen_range(-8.0..8.0);
        let al = rng.gen_range(-3.0..3.0);
        let af = al + rng.gen_range(-3.0..3.0);
        let closed = mttc(gap, vf, vl, af, al).unwrap();
        let oracle = integrate(gap, vf, vl, af, al);
        match oracle {
            Some(t) => {
                collisions += 1;
                assert!(
                    (closed - t).abs() <= 0.01,
                    "case {case}: closed form {closed}, oracle {t} (gap {gap}, vf {vf}, vl {vl}, af {af}, al {al})"
                );
            }
            None => assert!(
                closed > HORIZON - 0.01,
                "case {case}: closed form {closed} but no contact within {HORIZON} s"
            ),
        }
    }
    assert!(collisions > 200, "too few colliding cases ({collisions}) to be informative");
}

#[test]
fn worked_examples() {
    assert_eq!(mttc(10.0, 5.0, 0.0, 0.0, 0.0).unwrap(), 2.0);
    let t = mttc(10.0, 0.0, 0.0, 2.0, 0.0).unwrap();
    assert!((t - 10f64.sqrt()).abs() < 1e-12);
    let oracle = integrate(10.0, 0.0, 0.0, 2.0, 0.0).unwrap();
    assert!((t - oracle).abs() <= 0.01);
    assert_eq!(mttc(10.0, 0.0, 3.0, 0.0, 0.0).unwrap(), f64::INFINITY);
}

#[test]
fn single_precision_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let gap: f64 = rng.gen_range(1.0..40.0);
        let dv: f64 = rng.gen_range(-5.0..5.0);
        let da: f64 = rng.gen_range(-2.0..2.0);
        let d = mttc(gap, dv, 0.0, da, 0.0).unwrap();
        let s = mttc(gap as f32, dv as f32, 0.0, da as f32, 0.0).unwrap();
        if d.is_finite() && d < 60.0 {
            assert!((d - s as f64).abs() < 1e-2 * d.max(1.0), "{d} vs {s}");
        }
    }
}
