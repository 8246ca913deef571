use lanegraph::policy::{PolicyMeta, PolicyNet};
use lanegraph::ppo::{clipped_loss, gae, LossConfig, LossSample, RolloutBuffer};
use lanegraph::risk::RiskVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct double sum over each step's remaining episode.
fn gae_oracle(r: &[f64], v: &[f64], done: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| {
            let terminal = done[t] || t + 1 == n;
            let next = if terminal { 0.0 } else { v[t + 1] };
            r[t] + gamma * next - v[t]
        })
        .collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for l in 0..n - t {
                sum += (gamma * lambda).powi(l as i32) * delta[t + l];
                if done[t + l] {
                    break;
                }
            }
            sum
        })
        .collect()
}

#[test]
fn gae_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let n = 50;
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..20.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let done: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.1)).collect();
        let (gamma, lambda) = (rng.gen_range(0.8..1.0), rng.gen_range(0.8..1.0));
        let (adv, ret) = gae(&r, &v, &done, gamma, lambda);
        let oracle = gae_oracle(&r, &v, &done, gamma, lambda);
        for t in 0..n {
            assert!((adv[t] - oracle[t]).abs() < 1e-10, "step {t}: {} vs {}", adv[t], oracle[t]);
            assert!((ret[t] - (oracle[t] + v[t])).abs() < 1e-10);
        }
    }
}

#[test]
fn gae_worked_examples() {
    let (a, _) = gae(&[1.0f64], &[0.0], &[true], 1.0, 1.0);
    assert_eq!(a, vec![1.0]);
    let (a, _) = gae(&[0.0f64; 6], &[0.0; 6], &[false, true, false, false, false, true], 0.99, 0.95);
    assert!(a.iter().all(|&x| x == 0.0));
}

#[test]
fn normalised_buffer_advantages() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut buf = RolloutBuffer::<f64>::default();
    for t in 0..64 {
        buf.push(vec![0.0; 3], 0, 0.0, rng.gen_range(0.0..3.0), rng.gen_range(-1.0..1.0), t % 9 == 8);
    }
    buf.compute_advantages(0.99, 0.95).unwrap();
    let n = buf.len() as f64;
    let mean = buf.advantages.iter().sum::<f64>() / n;
    let std = (buf.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 1e-6);
    assert!((std - 1.0).abs() < 1e-9);
    // advantages never leak across an episode boundary
    let oracle = gae_oracle(&buf.rewards, &buf.values, &buf.dones, 0.99, 0.95);
    for (a, o) in buf.raw_advantages.iter().zip(&oracle) {
        assert!((a - o).abs() < 1e-10);
    }
}

fn random_net(rng: &mut ChaCha8Rng) -> PolicyNet<f64> {
    let mut net = PolicyNet::<f64>::zeros(PolicyMeta::default());
    let flat: Vec<f64> = (0..net.param_count()).map(|_| rng.gen_range(-0.5..0.5)).collect();
    net.set_flat(&flat);
    net
}

fn random_risk(rng: &mut ChaCha8Rng) -> RiskVector {
    let mut r = RiskVector::zeros(4);
    let mut inv: Vec<f64> = (0..4).map(|_| if rng.gen_bool(0.7) { rng.gen_range(0.0..2.0) } else { 0.0 }).collect();
    inv.sort_by(|a, b| b.total_cmp(a));
    for (i, &x) in inv.iter().enumerate() {
        r.inverse[i] = x;
        r.bv_ahead[i] = x > 0.0 && rng.gen_bool(0.5);
    }
    r.mttc = inv.iter().filter(|&&x| x > 0.0).map(|x| 1.0 / x).collect();
    r
}

struct Batch {
    xs: Vec<Vec<f64>>,
    actions: Vec<usize>,
    old: Vec<f64>,
    adv: Vec<f64>,
    ret: Vec<f64>,
}

impl Batch {
    fn samples(&self) -> Vec<LossSample<'_, f64>> {
        (0..self.xs.len())
            .map(|i| LossSample {
                x: &self.xs[i],
                action: self.actions[i],
                old_log_prob: self.old[i],
                advantage: self.adv[i],
                ret: self.ret[i],
            })
            .collect()
    }
}

/// Old log-probs place each ratio either well inside or well outside the clip range,
/// away from the kinks of the clipped objective.
fn random_batch(net: &PolicyNet<f64>, rng: &mut ChaCha8Rng, clip: f64) -> Batch {
    let n = rng.gen_range(3..10);
    let mut b = Batch {
        xs: Vec::new(),
        actions: Vec::new(),
        old: Vec::new(),
        adv: Vec::new(),
        ret: Vec::new(),
    };
    for _ in 0..n {
        let x = net.features(&random_risk(rng));
        let a = rng.gen_range(0..18);
        let lp = net.eval_actor(&x).log_probs[a];
        let ratio: f64 = match rng.gen_range(0..3) {
            0 => rng.gen_range(1.0 - clip * 0.8..1.0 + clip * 0.8),
            1 => rng.gen_range(1.0 + clip * 1.3..1.0 + clip * 3.0),
            _ => rng.gen_range(1.0 - clip * 3.0..1.0 - clip * 1.3).max(0.05),
        };
        b.xs.push(x);
        b.actions.push(a);
        b.old.push(lp - ratio.ln());
        b.adv.push(rng.gen_range(-2.0..2.0));
        b.ret.push(rng.gen_range(-3.0..3.0));
    }
    b
}

#[test]
fn full_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cfg = LossConfig::default();
    let h = 1e-6;
    let mut checked = 0;
    for _ in 0..20 {
        let net = random_net(&mut rng);
        let batch = random_batch(&net, &mut rng, cfg.clip);
        let samples = batch.samples();
        let out = clipped_loss(&net, &samples, &cfg);
        let flat = net.flat();
        for k in 0..flat.len() {
            let mut p = flat.clone();
            p[k] += h;
            let mut plus = net.clone();
            plus.set_flat(&p);
            p[k] -= 2.0 * h;
            let mut minus = net.clone();
            minus.set_flat(&p);
            let fd = (clipped_loss(&plus, &samples, &cfg).total - clipped_loss(&minus, &samples, &cfg).total) / (2.0 * h);
            let g = out.grad[k];
            // the floor sits above the rounding noise of differencing an O(10) loss
            let scale = g.abs().max(fd.abs()).max(1e-5);
            assert!((g - fd).abs() / scale < 1e-4, "param {k}: analytic {g} vs fd {fd}");
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn single_precision_loss_tracks_double() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = random_net(&mut rng);
    let batch = random_batch(&net, &mut rng, 0.2);
    let d = clipped_loss(&net, &batch.samples(), &LossConfig::default());
    let net32: PolicyNet<f32> = net.cast();
    let xs: Vec<Vec<f32>> = batch.xs.iter().map(|x| x.iter().map(|&v| v as f32).collect()).collect();
    let samples: Vec<LossSample<'_, f32>> = (0..xs.len())
        .map(|i| LossSample {
            x: &xs[i],
            action: batch.actions[i],
            old_log_prob: batch.old[i] as f32,
            advantage: batch.adv[i] as f32,
            ret: batch.ret[i] as f32,
        })
        .collect();
    let s = clipped_loss(&net32, &samples, &LossConfig::default());
    assert!((d.total - s.total as f64).abs() < 1e-4 * d.total.abs().max(1.0));
}

proptest! {
    #[test]
    fn clip_fraction_bounds(seed in 0u64..1000, clip in 0.05f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&mut rng);
        let batch = random_batch(&net, &mut rng, clip);
        let cfg = LossConfig { clip, ..LossConfig::default() };
        let out = clipped_loss(&net, &batch.samples(), &cfg);
        prop_assert!((0.0..=1.0).contains(&out.clip_fraction));
        let widest = batch.samples().iter().map(|s| {
            let lp = net.eval_actor(s.x).log_probs[s.action];
            ((lp - s.old_log_prob).exp() - 1.0).abs()
        }).fold(0.0, f64::max);
        let wide = LossConfig { clip: (widest + 1e-9).min(0.999), ..cfg };
        if widest < 0.999 {
            prop_assert_eq!(clipped_loss(&net, &batch.samples(), &wide).clip_fraction, 0.0);
        }
    }
}
