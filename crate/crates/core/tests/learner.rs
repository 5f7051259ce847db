mod common;

use std::sync::Arc;

use intentmap::learner::{
    argmax, double_dqn_targets, epsilon_at, loss_and_gradients, read_checkpoint, select_action, sync_target,
    train_on_batch, train_step, write_checkpoint, ActionIndex, CheckpointHeader, FcnNet, NetworkSpec, QFunction, QValueMap,
    ReplayBuffer, Scale, TrainConfig, Transition, POLICY_MAGIC,
};
use intentmap::perception::StateTensor;
use intentmap::Result;
use rand::Rng;

use common::*;

struct Stub {
    value: f64,
    peak: Option<usize>,
}

impl QFunction<f64> for Stub {
    fn q_values(&self, states: &[&StateTensor<f64>]) -> Result<Vec<QValueMap<f64>>> {
        Ok(states
            .iter()
            .map(|s| {
                let mut data = vec![self.value; 2 * s.size() * s.size()];
                if let Some(p) = self.peak {
                    data[p] = self.value + 1.0;
                }
                QValueMap::from_raw(2, s.size(), data).unwrap()
            })
            .collect())
    }
}

fn transition(state: StateTensor<f64>, action: ActionIndex, reward: f64, terminal: bool) -> Transition<f64> {
    let s = Arc::new(state);
    Transition {
        state: s.clone(),
        action,
        reward,
        next_state: s,
        terminal,
        intention_target: None,
    }
}

#[test]
fn double_dqn_targets_match_hand_evaluation() {
    let s = StateTensor::zeros(1, 4);
    let a = ActionIndex::new(0, 0, 0);
    let batch = [transition(s.clone(), a, 0.0, false), transition(s.clone(), a, -0.25, false)];
    let refs: Vec<_> = batch.iter().collect();
    let online = Stub { value: 0.0, peak: Some(7) };
    let target = Stub { value: 0.5, peak: None };
    let y = double_dqn_targets(&refs, &online, &target, 0.85).unwrap();
    assert!((y[0] - 0.425).abs() < 1e-9 && (y[1] - 0.175).abs() < 1e-9, "{y:?}");

    let terminal = [transition(s.clone(), a, 1.0, true)];
    let refs: Vec<_> = terminal.iter().collect();
    assert_eq!(double_dqn_targets(&refs, &online, &target, 0.85).unwrap(), vec![1.0]);
    let y = double_dqn_targets(&[&batch[1]], &online, &target, 0.0).unwrap();
    assert_eq!(y, vec![-0.25]);
}

#[test]
fn online_argmax_selects_the_target_entry() {
    // The target network is read at the online network's argmax, not its own.
    let s = StateTensor::zeros(1, 3);
    let t = transition(s, ActionIndex::new(0, 0, 0), 0.0, false);
    struct Ramp;
    impl QFunction<f64> for Ramp {
        fn q_values(&self, states: &[&StateTensor<f64>]) -> Result<Vec<QValueMap<f64>>> {
            Ok(states.iter().map(|_| QValueMap::from_raw(1, 3, (0..9).map(|v| v as f64).collect()).unwrap()).collect())
        }
    }
    let online = Stub { value: 0.0, peak: Some(2) };
    let y = double_dqn_targets(&[&t], &online, &Ramp, 1.0).unwrap();
    assert_eq!(y, vec![2.0]);
}

#[test]
fn greedy_selection_and_ties() {
    let mut r = rng(0);
    let mut data = vec![0.0f32; 2 * 8 * 8];
    data[ActionIndex::new(1, 3, 7).linear(8)] = 5.0;
    let q = QValueMap::from_raw(2, 8, data.clone()).unwrap();
    assert_eq!(select_action(&q, 0.0, &mut r).unwrap(), ActionIndex::new(1, 3, 7));
    data[ActionIndex::new(0, 5, 1).linear(8)] = 5.0;
    let q = QValueMap::from_raw(2, 8, data).unwrap();
    for _ in 0..10 {
        assert_eq!(select_action(&q, 0.0, &mut r).unwrap(), ActionIndex::new(0, 5, 1));
    }
    assert!(select_action(&q, 1.5, &mut r).is_err());
}

#[test]
fn random_selection_is_uniform() {
    let mut r = rng(11);
    let q = QValueMap::<f32>::zeros(2, 8);
    let n = 100_000;
    let mut counts = vec![0usize; 128];
    for _ in 0..n {
        counts[select_action(&q, 1.0, &mut r).unwrap().linear(8)] += 1;
    }
    let expected = n as f64 / 128.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 127 degrees of freedom; 0.999 quantile is about 181.
    assert!(chi2 < 181.0, "chi2 = {chi2}");
    let sigma = (expected * (1.0 - 1.0 / 128.0)).sqrt();
    assert!(counts.iter().all(|&c| (c as f64 - expected).abs() < 4.0 * sigma));
}

#[test]
fn loss_gradients_match_finite_differences() {
    let mut r = rng(3);
    let mut net = FcnNet::<f64>::new(probe_spec(3, 2), 5).unwrap();
    let batch: Vec<_> = (0..3)
        .map(|_| {
            let a = ActionIndex::new(r.gen_range(0..2), r.gen_range(0..7), r.gen_range(0..7));
            transition(random_state(&mut r, 3, 7), a, 0.0, true)
        })
        .collect();
    let refs: Vec<_> = batch.iter().collect();
    let targets = [0.3, -0.4, 2.5];
    loss_and_gradients(&mut net, &refs, &targets).unwrap();
    let analytic: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad.clone()).collect();
    let pairs = finite_difference_pairs(
        &mut net,
        |n| loss_and_gradients(n, &refs, &targets).unwrap(),
        &analytic,
        60,
        &mut r,
    );
    for (a, n) in pairs {
        assert!(relative_error(a, n) < 1e-4, "analytic {a} numeric {n}");
    }
}

#[test]
fn forward_is_deterministic_and_smooth() {
    let net = FcnNet::<f64>::new(NetworkSpec::for_scale(Scale::Desk, 4, 2), 1).unwrap();
    let z = StateTensor::zeros(4, 11);
    assert_eq!(net.forward(&[&z]).unwrap(), net.forward(&[&z]).unwrap());
    let mut r = rng(2);
    let s = random_state(&mut r, 4, 11);
    let mut data = s.data().to_vec();
    data[60] += 1e-3;
    let s2 = StateTensor::from_raw(4, 11, data).unwrap();
    let (q1, q2) = (net.forward(&[&s]).unwrap(), net.forward(&[&s2]).unwrap());
    let diff = q1[0].data().iter().zip(q2[0].data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff > 0.0 && diff < 1e-1, "{diff}");
}

#[test]
fn repeated_updates_fit_a_frozen_batch() {
    let mut r = rng(4);
    let mut net = FcnNet::<f32>::new(NetworkSpec::for_scale(Scale::Desk, 4, 2), 2).unwrap();
    let target = net.clone();
    let batch: Vec<_> = (0..32)
        .map(|_| {
            let s = random_state(&mut r, 4, 11).cast::<f32>();
            let a = ActionIndex::new(r.gen_range(0..2), r.gen_range(0..11), r.gen_range(0..11));
            let reward = r.gen_range(-1.0..1.0);
            let s = Arc::new(s);
            Transition {
                state: s.clone(),
                action: a,
                reward,
                next_state: s,
                terminal: true,
                intention_target: None,
            }
        })
        .collect();
    let refs: Vec<_> = batch.iter().collect();
    let cfg = TrainConfig::default();
    let losses: Vec<f64> = (0..50).map(|_| train_on_batch(&mut net, &target, &refs, &cfg, 0.85).unwrap()).collect();
    assert!(losses[49] * 10.0 < losses[0], "{} -> {}", losses[0], losses[49]);
}

#[test]
fn train_step_respects_gates() {
    let cfg = TrainConfig {
        total_steps: 4000,
        ..TrainConfig::default()
    };
    let mut net = FcnNet::<f32>::new(NetworkSpec::for_scale(Scale::Desk, 1, 1), 0).unwrap();
    let target = net.clone();
    let mut buf = ReplayBuffer::new(100);
    let s = Arc::new(StateTensor::zeros(1, 5));
    let push = |buf: &mut ReplayBuffer<f32>| {
        buf.push(Transition {
            state: s.clone(),
            action: ActionIndex::new(0, 2, 2),
            reward: 0.0,
            next_state: s.clone(),
            terminal: false,
            intention_target: None,
        })
        .unwrap()
    };
    for _ in 0..31 {
        push(&mut buf);
    }
    let mut r = rng(0);
    assert!(train_step(&buf, &mut net, &target, &cfg, 200, 0.85, &mut r).unwrap().is_none());
    push(&mut buf);
    assert!(train_step(&buf, &mut net, &target, &cfg, 201, 0.85, &mut r).unwrap().is_none());
    assert!(train_step(&buf, &mut net, &target, &cfg, 100, 0.85, &mut r).unwrap().is_none());
    let out = train_step(&buf, &mut net, &target, &cfg, 204, 0.85, &mut r).unwrap().unwrap();
    assert_eq!(out.indices.len(), 32);
}

#[test]
fn schedules() {
    let cfg = TrainConfig {
        total_steps: 5000,
        ..TrainConfig::default()
    };
    assert_eq!(cfg.prefill_steps(), 125);
    assert_eq!(epsilon_at(0, &cfg), 1.0);
    assert_eq!(epsilon_at(500, &cfg), 0.01);
    assert!((epsilon_at(250, &cfg) - 0.505).abs() < 1e-12);
    let syncs: Vec<u64> = (1..=5000).filter(|&s| cfg.is_sync_step(s)).collect();
    assert_eq!(syncs, vec![1000, 2000, 3000, 4000, 5000]);
}

#[test]
fn target_sync_copies_exactly() {
    let cfg = TrainConfig::default();
    let mut online = FcnNet::<f32>::new(NetworkSpec::for_scale(Scale::Desk, 2, 1), 1).unwrap();
    let mut target = FcnNet::<f32>::new(NetworkSpec::for_scale(Scale::Desk, 2, 1), 2).unwrap();
    assert!(!sync_target(&online, &mut target, 999, &cfg));
    assert!(!online.same_values(&target));
    assert!(sync_target(&online, &mut target, 1000, &cfg));
    assert!(online.same_values(&target));
    let mut r = rng(1);
    let t = {
        let s = Arc::new(random_state(&mut r, 2, 9).cast::<f32>());
        Transition {
            state: s.clone(),
            action: ActionIndex::new(0, 1, 1),
            reward: 1.0,
            next_state: s,
            terminal: true,
            intention_target: None,
        }
    };
    train_on_batch(&mut online, &target, &[&t], &cfg, 0.85).unwrap();
    assert!(!online.same_values(&target));
}

#[test]
fn checkpoint_rejects_mismatched_header() {
    let net = FcnNet::<f32>::new(NetworkSpec::for_scale(Scale::Desk, 3, 2), 0).unwrap();
    let mut bytes = Vec::new();
    write_checkpoint(POLICY_MAGIC, &net, &serde_json::Value::Null, &mut bytes).unwrap();
    let (back, _) = read_checkpoint::<f32, _>(POLICY_MAGIC, bytes.as_slice()).unwrap();
    let s = StateTensor::zeros(3, 9);
    assert_eq!(back.forward(&[&s]).unwrap(), net.forward(&[&s]).unwrap());
    // Rewrite the header so the first tensor's declared length is wrong.
    let len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let mut header: CheckpointHeader = serde_json::from_slice(&bytes[9..9 + len]).unwrap();
    header.tensors[0].len -= 1;
    let json = serde_json::to_vec(&header).unwrap();
    let mut tampered = bytes[..5].to_vec();
    tampered.extend_from_slice(&(json.len() as u32).to_le_bytes());
    tampered.extend_from_slice(&json);
    tampered.extend_from_slice(&bytes[9 + len..]);
    assert!(read_checkpoint::<f32, _>(POLICY_MAGIC, tampered.as_slice()).is_err());
    let q = net.forward(&[&s]).unwrap();
    assert!(argmax(&q[0]).is_ok());
}
