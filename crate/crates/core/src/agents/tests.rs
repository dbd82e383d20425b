use super::policy::{gaussian_entropy, gaussian_log_prob};
use super::*;
use crate::dataset::{EpisodeData, StateShape};
use crate::physics::{Reduction, VelocityMode};
use crate::rng::{substream, uniform};
use crate::vecmath;

fn tiny_shape() -> StateShape {
    StateShape {
        window: 2,
        assets: 2,
        features: 5,
    }
}

fn tiny_config(algorithm: Algorithm, seed: u64) -> AgentConfig {
    let mut cfg = AgentConfig::defaults_for(algorithm);
    cfg.hidden = vec![4];
    cfg.batch_size = 4;
    cfg.learning_starts = 4;
    cfg.minibatch_size = 4;
    cfg.n_steps = 8;
    cfg.n_epochs = 2;
    cfg.seed = seed;
    cfg
}

fn random_state(rng: &mut rand_chacha::ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| uniform::<f64>(rng) * 2.0 - 1.0).collect()
}

/// Synthetic episode with mildly trending relatives.
fn tiny_episode(seed: u64, steps: usize) -> EpisodeData<f64> {
    let shape = tiny_shape();
    let mut rng = substream(seed, "episode");
    let states = (0..steps)
        .map(|_| random_state(&mut rng, shape.flat_len()))
        .collect();
    let relatives = (0..steps)
        .map(|_| {
            (0..shape.assets)
                .map(|_| 0.95 + 0.1 * uniform::<f64>(&mut rng))
                .collect()
        })
        .collect();
    let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
    EpisodeData {
        shape,
        dates: (0..steps)
            .map(|i| start + chrono::Duration::days(i as i64))
            .collect(),
        states,
        relatives,
        prices: (0..steps).map(|_| vec![100.0; shape.assets]).collect(),
    }
}

#[test]
fn polyak_cases() {
    let shape = tiny_shape();
    let mut cfg = tiny_config(Algorithm::Ddpg, 1);
    for (tau, expect_online) in [(1.0, true), (0.5, false)] {
        cfg.tau = tau;
        let mut agent = Agent::<f64>::new(cfg.clone(), shape).unwrap();
        // push the online actor away from the target
        let mut params = Vec::new();
        agent.actor.export_params(&mut params);
        let bumped: Vec<f64> = params.iter().map(|p| p + 2.0).collect();
        agent.actor.import_params(&bumped);
        agent.polyak_actor();
        let mut target = Vec::new();
        agent.actor_target.as_ref().unwrap().export_params(&mut target);
        for ((&t, &online), &orig) in target.iter().zip(&bumped).zip(&params) {
            let want = tau * online + (1.0 - tau) * orig;
            assert!((t - want).abs() < 1e-12);
            if expect_online {
                assert_eq!(t, online);
            }
        }
    }
    // tau -> 0 is ruled out by validation; frozen targets use the blend form
    let blended = 0.0 * 2.0 + (1.0 - 0.0) * 5.0_f64;
    assert_eq!(blended, 5.0);
    // direct midpoint case
    assert_eq!(0.5 * 2.0 + (1.0 - 0.5) * 0.0, 1.0);
}

#[test]
fn act_is_deterministic_and_near_uniform_at_init() {
    let shape = tiny_shape();
    for algorithm in Algorithm::ALL {
        let mut agent = Agent::<f64>::new(tiny_config(algorithm, 7), shape).unwrap();
        let state = vec![0.1; shape.flat_len()];
        let a = agent.act(&state, false).unwrap();
        let b = agent.act(&state, false).unwrap();
        assert_eq!(a.weights.values(), b.weights.values(), "{algorithm:?}");
        // fresh spline coefficients are near zero, so outputs are close to
        // symmetric and the softmax is near uniform
        for &w in a.weights.values() {
            assert!((w - 0.5).abs() < 0.2, "{algorithm:?}: {w}");
        }
    }
}

#[test]
fn act_outputs_stay_on_simplex() {
    let shape = tiny_shape();
    let mut rng = substream(3, "simplex");
    for algorithm in [Algorithm::DdpgPinn, Algorithm::PpoPinn] {
        let mut agent = Agent::<f64>::new(tiny_config(algorithm, 11), shape).unwrap();
        for i in 0..1000 {
            let state = random_state(&mut rng, shape.flat_len());
            let out = agent.act(&state, i % 2 == 0).unwrap();
            let total = vecmath::sum(out.weights.values());
            assert!((total - 1.0).abs() < 1e-9);
            assert!(out.weights.values().iter().all(|&w| w >= 0.0));
        }
    }
}

/// Independent oracle for the off-policy actor gradient: finite differences
/// of the frozen-tracker loss the implementation differentiates.
fn fd_check_actor_gradients(algorithm: Algorithm, reduction: Reduction) {
    let shape = tiny_shape();
    let mut cfg = tiny_config(algorithm, 21);
    cfg.physics.lambda_base = 1.0;
    let agent = Agent::<f64>::new(cfg, shape).unwrap();
    let mut rng = substream(5, "fd-batch");
    let states: Vec<Vec<f64>> = (0..4).map(|_| random_state(&mut rng, shape.flat_len())).collect();
    let next_states: Vec<Vec<f64>> = (0..4).map(|_| random_state(&mut rng, shape.flat_len())).collect();
    let state_refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let next_refs: Vec<&[f64]> = next_states.iter().map(|s| s.as_slice()).collect();

    let mut probe = Agent::<f64>::new(tiny_config(algorithm, 21), shape).unwrap();
    let (grads, outcome) = probe
        .actor_physics_gradients(&state_refs, &next_refs, reduction)
        .unwrap();

    // freeze the trackers and weight exactly as the implementation used them
    let mu_a = probe.actor_ema.mean;
    let denom_a = (probe.actor_ema.var + probe.physics.epsilon).sqrt();
    let mu_p = probe.phys_ema.mean;
    let denom_p = (probe.phys_ema.var + probe.physics.epsilon).sqrt();
    let lambda = outcome.lambda.unwrap_or(0.0);
    let pinn = algorithm.is_pinn();
    let clamp = probe.physics.loss_clamp;
    let mass = probe.physics.mass;
    let dt = probe.physics.dt;
    let eps = probe.physics.epsilon;

    let loss_of = |actor: &crate::kan::KanNetwork<f64>| -> f64 {
        let batch = state_refs.len() as f64;
        let m = shape.assets;
        let mut actor_term = 0.0;
        let mut actions = Vec::new();
        for s in &state_refs {
            let raw = actor.forward(s).unwrap();
            let a = vecmath::softmax(&raw);
            let mut critic_in = s.to_vec();
            critic_in.extend_from_slice(&a);
            let q = agent.critics[0].forward(&critic_in).unwrap()[0];
            actor_term += -(q - mu_a) / denom_a / batch;
            actions.push(a);
        }
        if !pinn {
            return actor_term;
        }
        // physics branch with frozen normalization
        let mut alpha = Vec::new();
        for (s, ns) in state_refs.iter().zip(&next_refs) {
            let p_t = crate::physics::last_step_prices(s, shape.window, shape.assets, shape.features, 3);
            let p_n = crate::physics::last_step_prices(ns, shape.window, shape.assets, shape.features, 3);
            for (a, b) in p_t.iter().zip(&p_n) {
                alpha.push(((b - a) / (a + eps)) / dt);
            }
        }
        let phys_norm_mean = match reduction {
            Reduction::Scalar => {
                let mut acc = 0.0;
                for (i, a) in actions.iter().flatten().enumerate() {
                    let d = a / mass - alpha[i];
                    acc += d * d;
                }
                let mut raw = acc / (batch * m as f64);
                if let Some((lo, hi)) = clamp {
                    raw = raw.max(lo).min(hi);
                }
                (raw - mu_p) / denom_p
            }
            Reduction::PerSample => {
                let mut norms = Vec::new();
                for (s_idx, a) in actions.iter().enumerate() {
                    let mut acc = 0.0;
                    for i in 0..m {
                        let d = a[i] / mass - alpha[s_idx * m + i];
                        acc += d * d;
                    }
                    let mut raw = acc / m as f64;
                    if let Some((lo, hi)) = clamp {
                        raw = raw.max(lo).min(hi);
                    }
                    norms.push((raw - mu_p) / denom_p);
                }
                vecmath::mean(&norms)
            }
        };
        actor_term + lambda * phys_norm_mean
    };

    let mut params = Vec::new();
    agent.actor.export_params(&mut params);
    let mut work = agent.actor.clone();
    let h = 1e-5;
    let mut checked = 0;
    for d in (0..params.len()).step_by(7) {
        let mut plus = params.clone();
        let mut minus = params.clone();
        plus[d] += h;
        minus[d] -= h;
        work.import_params(&plus);
        let up = loss_of(&work);
        work.import_params(&minus);
        let down = loss_of(&work);
        let fd = (up - down) / (2.0 * h);
        let got = grads[d];
        let tol = 1e-6 + 1e-4 * fd.abs().max(got.abs());
        assert!(
            (fd - got).abs() < tol,
            "{algorithm:?} param {d}: fd {fd} vs analytic {got}"
        );
        checked += 1;
    }
    assert!(checked > 30);
}

#[test]
fn ddpg_actor_gradients_match_finite_differences() {
    fd_check_actor_gradients(Algorithm::Ddpg, Reduction::Scalar);
    fd_check_actor_gradients(Algorithm::DdpgPinn, Reduction::Scalar);
}

#[test]
fn td3_actor_gradients_match_finite_differences() {
    fd_check_actor_gradients(Algorithm::Td3Pinn, Reduction::PerSample);
}

#[test]
fn lambda_floor_applies_when_lambda_base_is_zero() {
    let shape = tiny_shape();
    let mut cfg = tiny_config(Algorithm::DdpgPinn, 33);
    cfg.physics.lambda_base = 0.0;
    let mut agent = Agent::<f64>::new(cfg, shape).unwrap();
    let mut rng = substream(6, "floor");
    let states: Vec<Vec<f64>> = (0..4).map(|_| random_state(&mut rng, shape.flat_len())).collect();
    let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let out = agent
        .actor_physics_update(&refs, &refs, Reduction::Scalar)
        .unwrap();
    assert_eq!(out.lambda, Some(0.1));
}

/// Craft next states whose close-feature velocities equal the actor's own
/// softmax outputs: the physics residual is exactly zero, the raw loss is
/// zero, and the actor gradient collapses to the vanilla (critic-only) one.
#[test]
fn zero_residual_batch_leaves_only_the_actor_term() {
    let shape = tiny_shape();
    let price_idx = crate::marketdata::PRICE_FEATURE_INDEX;
    let cfg = tiny_config(Algorithm::DdpgPinn, 34);
    let mut rng = substream(9, "zero-residual");
    let states: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            (0..shape.flat_len())
                .map(|_| 0.75 + 0.5 * uniform::<f64>(&mut rng))
                .collect()
        })
        .collect();
    // one deterministic actor pass to learn the actions this batch produces
    let mut scout = Agent::<f64>::new(cfg.clone(), shape).unwrap();
    let actions: Vec<Vec<f64>> = states
        .iter()
        .map(|s| scout.act(s, false).unwrap().weights.values().to_vec())
        .collect();
    let eps = scout.physics.epsilon;
    let dt = scout.physics.dt;
    let base = (shape.window - 1) * shape.assets * shape.features;
    let next_states: Vec<Vec<f64>> = states
        .iter()
        .zip(&actions)
        .map(|(s, a)| {
            let mut ns = s.clone();
            for i in 0..shape.assets {
                let idx = base + i * shape.features + price_idx;
                // (p_next - p) / (p + eps) / dt == a_i / mass
                ns[idx] = s[idx] + a[i] * dt * (s[idx] + eps);
            }
            ns
        })
        .collect();
    let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let next_refs: Vec<&[f64]> = next_states.iter().map(|s| s.as_slice()).collect();

    let mut pinn = Agent::<f64>::new(cfg.clone(), shape).unwrap();
    let (pinn_grads, out) = pinn
        .actor_physics_gradients(&refs, &next_refs, Reduction::Scalar)
        .unwrap();
    assert!(out.physics_raw.unwrap() < 1e-20, "raw {:?}", out.physics_raw);
    // first update seeds the physics EMA at the raw value, so the
    // normalized term is exactly zero and only the actor term remains
    assert_eq!(out.physics_norm, Some(0.0));

    let mut vanilla_cfg = cfg;
    vanilla_cfg.algorithm = Algorithm::Ddpg;
    let mut vanilla = Agent::<f64>::new(vanilla_cfg, shape).unwrap();
    let (vanilla_grads, _) = vanilla
        .actor_physics_gradients(&refs, &next_refs, Reduction::Scalar)
        .unwrap();
    // the crafted velocities match to rounding, so the physics gradient is
    // beneath float noise and the assembled gradients coincide
    for (a, b) in pinn_grads.iter().zip(&vanilla_grads) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn identical_actions_and_states_give_zero_velocity_physics() {
    // with s_{t+1} = s_t the observed acceleration vanishes and the raw
    // physics loss is the mean squared action
    let shape = tiny_shape();
    let mut agent = Agent::<f64>::new(tiny_config(Algorithm::DdpgPinn, 35), shape).unwrap();
    let mut rng = substream(8, "zerovel");
    let states: Vec<Vec<f64>> = (0..4).map(|_| random_state(&mut rng, shape.flat_len())).collect();
    let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let (_, out) = agent
        .actor_physics_gradients(&refs, &refs, Reduction::Scalar)
        .unwrap();
    // actions are softmax outputs; with two assets near uniform the raw MSE
    // is around 0.25, certainly within the clamp and strictly positive
    let raw = out.physics_raw.unwrap();
    assert!(raw > 0.0 && raw < 10.0);
}

#[test]
fn off_policy_update_is_deterministic() {
    let shape = tiny_shape();
    let data = tiny_episode(40, 16);
    let run = |seed: u64| -> Vec<f64> {
        let mut agent = Agent::<f64>::new(tiny_config(Algorithm::DdpgPinn, seed), shape).unwrap();
        let res = train(
            &mut agent,
            &data,
            &TrainOptions {
                total_steps: 10,
                ..Default::default()
            },
        )
        .unwrap();
        let mut params = Vec::new();
        agent.actor.export_params(&mut params);
        assert!(!res.log.rows.is_empty());
        params
    };
    let a = run(99);
    let b = run(99);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    let c = run(100);
    assert!(a.iter().zip(&c).any(|(x, y)| x.to_bits() != y.to_bits()));
}

#[test]
fn td3_actor_updates_only_on_delay_steps() {
    let shape = tiny_shape();
    let data = tiny_episode(41, 16);
    let mut cfg = tiny_config(Algorithm::Td3Pinn, 50);
    cfg.policy_delay = 2;
    let mut agent = Agent::<f64>::new(cfg, shape).unwrap();
    let mut replay = ReplayBuffer::new(64);
    for k in 0..8 {
        replay.push(Transition {
            state: data.states[k].clone(),
            action: vec![0.5, 0.5],
            reward: 0.01,
            next_state: data.next_state(k).to_vec(),
            done: false,
        });
    }
    let mut before = Vec::new();
    agent.actor.export_params(&mut before);
    // update 1: count becomes 1, 1 % 2 != 0 -> actor untouched
    let m1 = agent.update_off_policy(&replay).unwrap();
    let mut after1 = Vec::new();
    agent.actor.export_params(&mut after1);
    assert_eq!(before, after1);
    assert!(m1.actor_loss.is_none());
    assert!(m1.critic_loss.is_some());
    // update 2: count becomes 2 -> actor moves
    let m2 = agent.update_off_policy(&replay).unwrap();
    let mut after2 = Vec::new();
    agent.actor.export_params(&mut after2);
    assert_ne!(after1, after2);
    assert!(m2.actor_loss.is_some());
}

#[test]
fn td3_noiseless_target_equals_target_actor_output() {
    let shape = tiny_shape();
    let mut cfg = tiny_config(Algorithm::Td3, 51);
    cfg.target_noise_std = 0.0;
    cfg.target_noise_clip = 0.0;
    let agent = Agent::<f64>::new(cfg, shape).unwrap();
    let state = vec![0.3; shape.flat_len()];
    // with zero noise the smoothed target action reduces to the plain
    // softmax of the target actor's raw output
    let raw = agent.actor_target.as_ref().unwrap().forward(&state).unwrap();
    let direct = vecmath::softmax(&raw);
    let noisy: Vec<f64> = raw
        .iter()
        .map(|&r| r + (0.0_f64 * 1.23).clamp(-0.0, 0.0))
        .collect();
    assert_eq!(vecmath::softmax(&noisy), direct);
}

#[test]
fn twin_critics_tie_gives_min_equal_to_either() {
    let shape = tiny_shape();
    let mut agent = Agent::<f64>::new(tiny_config(Algorithm::Td3, 52), shape).unwrap();
    let mut params = Vec::new();
    agent.critics[0].export_params(&mut params);
    agent.critics[1].import_params(&params);
    let mut input = vec![0.2; shape.flat_len()];
    input.extend_from_slice(&[0.5, 0.5]);
    let q1 = agent.critics[0].forward(&input).unwrap()[0];
    let q2 = agent.critics[1].forward(&input).unwrap()[0];
    assert_eq!(q1, q2);
    assert_eq!(q1.min(q2), q1);
}

/// Build a prepared rollout from an episode using the agent's own policy.
fn collect_rollout(agent: &mut Agent<f64>, data: &EpisodeData<f64>, n: usize) -> RolloutBuffer<f64> {
    let mut env = data.to_env(0.0025, 1000.0);
    let mut rollout = RolloutBuffer::new();
    for k in 0..n {
        let act = agent.act(&data.states[k], true).unwrap();
        let out = env.step(&act.weights).unwrap();
        rollout.push(RolloutStep {
            state: data.states[k].clone(),
            raw_action: act.raw.clone(),
            action: act.weights.values().to_vec(),
            reward: out.reward,
            next_state: data.next_state(k).to_vec(),
            done: data.is_terminal(k),
            value: act.value.unwrap(),
            log_prob: act.log_prob.unwrap(),
        });
    }
    let bootstrap = agent.value_of(data.next_state(n - 1)).unwrap();
    rollout
        .prepare(bootstrap, agent.cfg.gamma, agent.cfg.gae_lambda)
        .unwrap();
    rollout
}

#[test]
fn ppo_first_pass_ratio_is_one_and_loss_is_negative_mean_advantage() {
    let shape = tiny_shape();
    let data = tiny_episode(60, 16);
    let mut cfg = tiny_config(Algorithm::Ppo, 61);
    cfg.n_epochs = 1;
    cfg.minibatch_size = 8;
    cfg.target_kl = None;
    let mut agent = Agent::<f64>::new(cfg, shape).unwrap();
    let rollout = collect_rollout(&mut agent, &data, 8);
    // fresh policy: ratios are exactly one, so the clipped and unclipped
    // surrogates coincide and the loss is -mean(normalized advantages) = 0
    let rows = agent.update_on_policy(&rollout).unwrap();
    assert_eq!(rows.len(), 1);
    let pl = rows[0].policy_loss.unwrap();
    assert!(pl.abs() < 1e-12, "policy loss {pl}");
    assert!(rows[0].approx_kl.unwrap().abs() < 1e-12);
}

#[test]
fn ppo_equal_advantages_normalize_to_zero_loss() {
    let adv = [0.5_f64; 6];
    let m = vecmath::mean(&adv);
    let s = vecmath::std_dev(&adv);
    let normalized: Vec<f64> = adv.iter().map(|a| (a - m) / (s + 1e-8)).collect();
    assert!(normalized.iter().all(|&a| a == 0.0));
}

#[test]
fn ppo_physics_loss_with_static_states_is_mean_squared_action() {
    let shape = tiny_shape();
    let data = {
        let mut d = tiny_episode(62, 16);
        // make every next state equal the current one
        let s0 = d.states[0].clone();
        for s in d.states.iter_mut() {
            *s = s0.clone();
        }
        d
    };
    let mut cfg = tiny_config(Algorithm::PpoPinn, 63);
    cfg.n_epochs = 1;
    cfg.minibatch_size = 8;
    cfg.target_kl = None;
    let mut agent = Agent::<f64>::new(cfg, shape).unwrap();
    let rollout = collect_rollout(&mut agent, &data, 8);
    let expected: f64 = {
        let total: f64 = rollout
            .steps()
            .iter()
            .flat_map(|s| s.action.iter())
            .map(|&a| a * a)
            .sum();
        total / (8.0 * shape.assets as f64)
    };
    let rows = agent.update_on_policy(&rollout).unwrap();
    let got = rows[0].physics_raw.unwrap();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn ppo_early_stops_on_kl_breach() {
    let shape = tiny_shape();
    let data = tiny_episode(64, 16);
    let mut cfg = tiny_config(Algorithm::Ppo, 65);
    cfg.n_epochs = 4;
    cfg.minibatch_size = 4;
    cfg.target_kl = Some(1e-12);
    cfg.actor_lr = 0.5; // huge steps force an immediate KL breach
    let mut agent = Agent::<f64>::new(cfg, shape).unwrap();
    let rollout = collect_rollout(&mut agent, &data, 8);
    let mut before = Vec::new();
    agent.actor.export_params(&mut before);
    let rows = agent.update_on_policy(&rollout).unwrap();
    // first minibatch has ratio 1 (kl 0) and is applied; the second sees
    // the moved policy and trips the gate before applying
    assert_eq!(rows.len(), 1);
    let mut after = Vec::new();
    agent.actor.export_params(&mut after);
    assert_ne!(before, after);
    let update_count_after = agent.update_count;
    assert_eq!(update_count_after, 1);
}

/// FD oracle over the joint on-policy parameter group for A2C.
#[test]
fn a2c_gradients_match_finite_differences() {
    let shape = tiny_shape();
    let data = tiny_episode(70, 16);
    let mut cfg = tiny_config(Algorithm::A2cPinn, 71);
    cfg.ent_coef = 0.01;
    let mut agent = Agent::<f64>::new(cfg.clone(), shape).unwrap();
    let rollout = collect_rollout(&mut agent, &data, 8);

    // analytic gradient: replicate a2c_update's assembly without stepping
    let mut probe = Agent::<f64>::new(cfg.clone(), shape).unwrap();
    let adv: Vec<f64> = {
        let raw = rollout.advantages();
        let m = vecmath::mean(raw);
        let s = vecmath::std_dev(raw);
        raw.iter().map(|&a| (a - m) / (s + 1e-8)).collect()
    };
    let returns = rollout.returns().to_vec();
    let group0 = probe.actor_group_export();

    // loss as a pure function of the group parameters (physics term is
    // constant in the parameters and can be dropped for the FD check)
    let b = rollout.len() as f64;
    let loss_of = |agent: &mut Agent<f64>, group: &[f64]| -> f64 {
        agent.actor_group_import(group);
        let mut policy = 0.0;
        let mut value = 0.0;
        let mut logps = Vec::new();
        for (s_idx, step) in rollout.steps().iter().enumerate() {
            let mu = agent.actor.forward(&step.state).unwrap();
            let v = agent.critics[0].forward(&step.state).unwrap()[0];
            let lp = gaussian_log_prob(&step.raw_action, &mu, &agent.log_std);
            policy += -adv[s_idx] * lp / b;
            value += (v - returns[s_idx]) * (v - returns[s_idx]) / b;
            logps.push(lp);
        }
        let ent: f64 = -gaussian_entropy(&agent.log_std);
        policy + agent.cfg.vf_coef * value + agent.cfg.ent_coef * ent
    };

    // capture the analytic gradient via a tiny wrapper: recompute the same
    // assembly a2c_update performs, but keep the vector
    let grads = {
        let a = Agent::<f64>::new(cfg, shape).unwrap();
        let na = a.actor.param_count();
        let nc = a.critics[0].param_count();
        let mut grads = vec![0.0; na + nc + a.log_std.len()];
        for (s_idx, step) in rollout.steps().iter().enumerate() {
            let (mu, a_cache) = a.actor.forward_cached(&step.state).unwrap();
            let (_, c_cache) = a.critics[0].forward_cached(&step.state).unwrap();
            let d_logp = -adv[s_idx] / b;
            let (d_mu, d_ls) = super::policy::gaussian_log_prob_grads(&step.raw_action, &mu, &a.log_std);
            let g_mu: Vec<f64> = d_mu.iter().map(|&g| g * d_logp).collect();
            a.actor.backward(&a_cache, &g_mu, Some(&mut grads[..na])).unwrap();
            for d in 0..a.log_std.len() {
                grads[na + nc + d] += d_logp * d_ls[d] - a.cfg.ent_coef / b;
            }
            let v = a.critics[0].forward(&step.state).unwrap()[0];
            let dv = a.cfg.vf_coef * 2.0 * (v - returns[s_idx]) / b;
            a.critics[0].backward(&c_cache, &[dv], Some(&mut grads[na..na + nc])).unwrap();
        }
        grads
    };

    let h = 1e-5;
    for d in (0..group0.len()).step_by(11) {
        let mut plus = group0.clone();
        let mut minus = group0.clone();
        plus[d] += h;
        minus[d] -= h;
        let up = loss_of(&mut probe, &plus);
        let down = loss_of(&mut probe, &minus);
        let fd = (up - down) / (2.0 * h);
        let got = grads[d];
        let tol = 1e-6 + 1e-4 * fd.abs().max(got.abs());
        assert!((fd - got).abs() < tol, "param {d}: fd {fd} vs {got}");
    }
}

#[test]
fn a2c_dynamic_scale_matches_magnitude_ratio() {
    let shape = tiny_shape();
    let data = tiny_episode(72, 16);
    let mut agent = Agent::<f64>::new(tiny_config(Algorithm::A2cPinn, 73), shape).unwrap();
    let rollout = collect_rollout(&mut agent, &data, 8);
    let rows = agent.update_on_policy(&rollout).unwrap();
    let m = &rows[0];
    let scale = m.lambda.unwrap() / agent.cfg.physics.lambda_base;
    let expected = m.policy_loss.unwrap().abs() / (m.physics_raw.unwrap().abs() + 1e-8);
    assert!((scale - expected).abs() < 1e-9, "{scale} vs {expected}");
}

#[test]
fn vanilla_and_pinn_share_rng_streams_until_first_update() {
    let shape = tiny_shape();
    let data = tiny_episode(80, 24);
    let run = |algorithm: Algorithm| -> Vec<Vec<f64>> {
        let mut agent = Agent::<f64>::new(tiny_config(algorithm, 81), shape).unwrap();
        let mut env = data.to_env(0.0025, 1000.0);
        (0..10)
            .map(|k| {
                let a = agent.act(&data.states[k], true).unwrap();
                env.step(&a.weights).unwrap();
                a.weights.values().to_vec()
            })
            .collect()
    };
    let vanilla = run(Algorithm::Ddpg);
    let pinn = run(Algorithm::DdpgPinn);
    assert_eq!(vanilla, pinn);
}

#[test]
fn train_zero_steps_emits_initial_checkpoint_only() {
    let shape = tiny_shape();
    let data = tiny_episode(82, 16);
    let mut agent = Agent::<f64>::new(tiny_config(Algorithm::A2c, 83), shape).unwrap();
    let res = train(&mut agent, &data, &TrainOptions::default()).unwrap();
    assert_eq!(res.checkpoints.len(), 1);
    assert_eq!(res.checkpoints[0].0, "init");
    assert!(res.log.rows.is_empty());
}

#[test]
fn train_log_csv_schema_differs_between_pinn_and_vanilla() {
    let log = TrainLog {
        algorithm: Algorithm::DdpgPinn,
        rows: vec![],
    };
    assert!(log.columns().contains(&"lambda_adapt"));
    assert!(log.columns().contains(&"vol_ema"));
    let log = TrainLog {
        algorithm: Algorithm::Ddpg,
        rows: vec![],
    };
    assert!(!log.columns().contains(&"lambda_adapt"));
    assert!(!log.columns().contains(&"vol_ema"));
    let log = TrainLog {
        algorithm: Algorithm::PpoPinn,
        rows: vec![],
    };
    assert!(log.columns().contains(&"physics_raw"));
}

#[test]
fn checkpoint_round_trip_preserves_behavior() {
    let shape = tiny_shape();
    let data = tiny_episode(90, 16);
    let cfg = tiny_config(Algorithm::Td3Pinn, 91);
    let mut agent = Agent::<f64>::new(cfg.clone(), shape).unwrap();
    train(
        &mut agent,
        &data,
        &TrainOptions {
            total_steps: 12,
            ..Default::default()
        },
    )
    .unwrap();
    let ckpt = agent.to_checkpoint();
    let json = serde_json::to_string(&ckpt).unwrap();
    let restored: Checkpoint = serde_json::from_str(&json).unwrap();
    let mut twin = Agent::<f64>::from_checkpoint(cfg, &restored).unwrap();
    let state = vec![0.25; shape.flat_len()];
    let a = agent.act(&state, false).unwrap();
    let b = twin.act(&state, false).unwrap();
    assert!(a
        .weights
        .values()
        .iter()
        .zip(b.weights.values())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
    // mismatched algorithm is rejected
    let bad = Agent::<f64>::from_checkpoint(tiny_config(Algorithm::Ddpg, 91), &agent.to_checkpoint());
    assert!(matches!(bad, Err(AgentError::CheckpointShapeMismatch(_))));
}

#[test]
fn physics_mode_defaults_follow_algorithm_family() {
    assert_eq!(
        AgentConfig::defaults_for(Algorithm::DdpgPinn).physics.mode,
        VelocityMode::PriceMode
    );
    assert_eq!(
        AgentConfig::defaults_for(Algorithm::PpoPinn).physics.mode,
        VelocityMode::FeatureMean
    );
    assert_eq!(
        AgentConfig::defaults_for(Algorithm::A2cPinn).physics.loss_clamp,
        Some((-10.0, 10.0))
    );
    assert_eq!(
        AgentConfig::defaults_for(Algorithm::Td3Pinn).physics.loss_clamp,
        Some((0.0, 10.0))
    );
    assert!(AgentConfig::defaults_for(Algorithm::PpoPinn).physics.loss_clamp.is_none());
}

/// The whole agent stack is generic over the scalar; run one act/update
/// cycle in single precision.
#[test]
fn f32_agent_acts_and_updates() {
    let shape = tiny_shape();
    let mut cfg = tiny_config(Algorithm::DdpgPinn, 3);
    cfg.batch_size = 4;
    let mut agent = Agent::<f32>::new(cfg, shape).unwrap();
    let mut rng = substream(99, "f32");
    let mut replay = ReplayBuffer::new(16);
    for _ in 0..6 {
        let state: Vec<f32> = (0..shape.flat_len())
            .map(|_| uniform::<f32>(&mut rng))
            .collect();
        let out = agent.act(&state, true).unwrap();
        assert!((vecmath::sum(out.weights.values()) - 1.0).abs() < 1e-6);
        replay.push(Transition {
            state: state.clone(),
            action: out.weights.values().to_vec(),
            reward: 0.01,
            next_state: state,
            done: false,
        });
    }
    let metrics = agent.update_off_policy(&replay).unwrap();
    assert!(metrics.critic_loss.unwrap().is_finite());
}

#[test]
fn config_validation_rejects_bad_values() {
    let mut cfg = tiny_config(Algorithm::Ddpg, 1);
    cfg.gamma = 1.0;
    assert!(cfg.validate().is_err());
    let mut cfg = tiny_config(Algorithm::Ddpg, 1);
    cfg.tau = 0.0;
    assert!(cfg.validate().is_err());
    let mut cfg = tiny_config(Algorithm::Ddpg, 1);
    cfg.physics.ema_beta = 1.5;
    assert!(cfg.validate().is_err());
}
