//! Property bodies shared by the invariant suite and the acceptance run.

use fbp_core::loss::temporal_cross_entropy;
use fbp_core::neuron::layer_spike_times;
use fbp_core::transport::{init_feedback, DualParams, TransportLedger, TransportStrategy, Transporter};
use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{build, membrane, threshold, LayerCase, NetCase};

type Check = Result<(), TestCaseError>;

pub fn strategy() -> impl Strategy<Value = TransportStrategy> {
    use TransportStrategy::*;
    let phi = 1u64..6;
    prop_oneof![
        Just(FullEveryIteration),
        phi.clone().prop_map(|phi| FrozenPeriodic { phi }),
        (phi.clone(), prop_oneof![Just(1.0), Just(10.0), Just(100.0 / 3.0), Just(50.0), Just(100.0)])
            .prop_map(|(phi, k)| TopKChange { phi, k }),
        (phi.clone(), 0.0f64..=1.0).prop_map(|(phi, p)| RandomSample { phi, p }),
        (1e-3f64..1.0).prop_map(|beta| ChangeWeighted { beta }),
        Just(SignFeedbackAlignment),
        Just(SignSymmetry),
        phi.clone().prop_map(|phi| FrozenSignSymmetry { phi }),
        phi.prop_map(|phi| FrozenWithSignSharing { phi }),
    ]
}

pub fn ledger_case() -> impl Strategy<Value = (TransportStrategy, (usize, usize, usize), u64, u64)> {
    (strategy(), (1usize..6, 1usize..6, 1usize..6), 1u64..40, any::<u64>())
}

pub fn grad_case() -> impl Strategy<Value = (Vec<f64>, prop::sample::Index)> {
    (proptest::collection::vec(0.0f64..10.0, 2..20), any::<prop::sample::Index>())
}

pub fn top_k_case() -> impl Strategy<Value = (usize, u32, u64)> {
    (1usize..400, 1u32..=100, any::<u64>())
}

fn writes_values(s: &TransportStrategy) -> bool {
    use TransportStrategy::*;
    !matches!(s, SignFeedbackAlignment | SignSymmetry | FrozenSignSymmetry { .. })
}

pub fn window(case: &NetCase) -> Check {
    let net = build(case);
    let fp = net.forward(&case.weights, case.inputs.view()).unwrap();
    for l in 1..case.sizes.len() {
        let times = fp.neuron_times(l);
        // one spike time per neuron and sample
        prop_assert_eq!(times.dim(), (case.inputs.nrows(), case.sizes[l]));
        let (lo, hi) = (case.tw * l as f64, case.tw * (l + 1) as f64);
        for &t in times {
            prop_assert!(t.is_infinite() || (lo..=hi).contains(&t), "layer {} time {}", l, t);
        }
    }
    Ok(())
}

pub fn first_crossing(case: &LayerCase) -> Check {
    let LayerCase { layer, tw, ref inputs, ref weights, outputs } = *case;
    let times = layer_spike_times(inputs, weights, outputs, layer, tw).unwrap();
    let (start, end) = (tw * layer as f64, tw * (layer + 1) as f64);
    let scale: f64 = 1.0 + weights.iter().map(|w| w.abs()).sum::<f64>() * end;
    for (j, &t) in times.iter().enumerate() {
        let gap = |s: f64| membrane(inputs, weights, outputs, j, s) - threshold(layer, s, tw);
        if t.is_infinite() {
            prop_assert!(gap(start) < 0.0);
            prop_assert!(gap(end) <= 1e-9 * scale);
        } else if t == start {
            prop_assert!(gap(start) >= 0.0);
        } else {
            prop_assert!(gap(start) < 0.0);
            prop_assert!(gap(t).abs() <= 1e-9 * scale, "gap {} at {}", gap(t), t);
        }
    }
    Ok(())
}

pub fn grad_zero_sum((times, pick): &(Vec<f64>, prop::sample::Index)) -> Check {
    let target = pick.index(times.len());
    let out = temporal_cross_entropy(times, target).unwrap();
    prop_assert!(out.loss >= 0.0);
    prop_assert!(out.output_grad.iter().sum::<f64>().abs() <= 1e-12);
    Ok(())
}

pub fn ledger_replay(&(strat, shape, iterations, seed): &(TransportStrategy, (usize, usize, usize), u64, u64)) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let w = vec![
        Array2::from_shape_simple_fn((shape.0, shape.1), || noise.sample(&mut rng)),
        Array2::from_shape_simple_fn((shape.1, shape.2), || noise.sample(&mut rng)),
    ];
    let (mut p, mags) = init_feedback(&strat, w, &mut rng);
    let mut tr = Transporter::from_seed(strat, mags, seed ^ 1).unwrap();
    let mut ledger = TransportLedger::new(2);
    for it in 1..=iterations {
        // continuous noise makes W differ from every snapshot entry
        for l in &mut p.forward {
            l.mapv_inplace(|x| x + noise.sample(&mut rng));
        }
        let before: DualParams = p.clone();
        let prev = ledger.clone();
        tr.apply(&mut p, it, &mut ledger);

        prop_assert!(ledger.transport_events >= prev.transport_events);
        prop_assert!(ledger.values_moved >= prev.values_moved);
        prop_assert!(ledger.signs_moved >= prev.signs_moved);
        prop_assert!(ledger.signs_moved_all >= prev.signs_moved_all);
        prop_assert!(ledger.signs_moved <= ledger.signs_moved_all);
        prop_assert!(ledger.transport_events <= it);
        prop_assert_eq!(ledger.values_moved, ledger.per_layer.iter().map(|l| l.values_moved).sum::<u64>());
        prop_assert_eq!(ledger.signs_moved, ledger.per_layer.iter().map(|l| l.signs_moved).sum::<u64>());

        let mut rewritten = 0u64;
        for l in 0..2 {
            for ((&s_new, &s_old), (&w_now, &b)) in p.snapshot[l].iter().zip(&before.snapshot[l])
                .zip(p.forward[l].iter().zip(&p.feedback[l]))
            {
                if s_new != s_old {
                    rewritten += 1;
                    prop_assert_eq!(s_new, w_now);
                    prop_assert_eq!(b, w_now);
                }
            }
            if writes_values(&strat) && !matches!(strat, TransportStrategy::FrozenWithSignSharing { .. }) {
                prop_assert_eq!(&p.feedback[l], &p.snapshot[l]);
            }
        }
        prop_assert_eq!(ledger.values_moved - prev.values_moved, rewritten);
    }
    Ok(())
}

pub fn top_k_exact(&(n, k, seed): &(usize, u32, u64)) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    // coarse values produce plenty of ties
    let snap = Array2::from_shape_simple_fn((1, n), || (noise.sample(&mut rng) * 4.0f64).round() / 4.0);
    let w = Array2::from_shape_simple_fn((1, n), || (noise.sample(&mut rng) * 4.0f64).round() / 4.0);
    let mut p = DualParams::symmetric(vec![snap.clone()]);
    p.forward[0].assign(&w);
    let strat = TransportStrategy::TopKChange { phi: 1, k: k as f64 };
    let mut tr = Transporter::from_seed(strat, None, 0).unwrap();
    let mut ledger = TransportLedger::new(1);
    tr.apply(&mut p, 1, &mut ledger);

    let count = (k as usize * n).div_ceil(100);
    let mut order: Vec<usize> = (0..n).collect();
    let delta: Vec<f64> = (0..n).map(|i| (w[[0, i]] - snap[[0, i]]).abs()).collect();
    order.sort_by(|&a, &b| delta[b].partial_cmp(&delta[a]).unwrap().then(a.cmp(&b)));
    let mut expect = snap.clone();
    for &i in &order[..count] {
        expect[[0, i]] = w[[0, i]];
    }
    prop_assert_eq!(ledger.values_moved, count as u64);
    prop_assert_eq!(&p.snapshot[0], &expect);
    prop_assert_eq!(&p.feedback[0], &expect);
    Ok(())
}
