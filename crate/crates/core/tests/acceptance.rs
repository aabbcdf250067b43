//! End-to-end acceptance checks. Every criterion prints one `PASS`/`FAIL`
//! line with the measured quantities; the binary exits nonzero if any fail.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nncrn_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

mod common;
use common::{random_network, random_shape};

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

fn sp(s: &str) -> Species {
    Species::named(s)
}

fn iris() -> LabeledDataset {
    load_iris(concat!(env!("CARGO_MANIFEST_DIR"), "/data/iris.csv")).unwrap()
}

struct IrisRun {
    net: BinaryNetwork,
    accuracy: f64,
    train_time: Duration,
}

fn iris_run() -> &'static IrisRun {
    static RUN: OnceLock<IrisRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let cfg = TrainConfig {
            hidden: vec![8],
            epochs: 10_000,
            dropout_keep: 0.9,
            seed: 0,
            ..TrainConfig::default()
        };
        let rep = train(&iris(), &cfg).unwrap();
        let accuracy = evaluate(&rep.network, &iris()).unwrap();
        assert_eq!(accuracy, rep.best_accuracy);
        IrisRun {
            net: rep.network,
            accuracy,
            train_time: start.elapsed(),
        }
    })
}

fn criterion_1_relu_gadget() -> Outcome {
    let gadget = Crn::from_text("output 1 Y+ Y-\nrxn: X1+ -> M + Y+ @ 1\nrxn: M + X1- -> Y- @ 1\n").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<(f64, f64)> = (0..1000)
        .map(|_| (rng.random_range(0.0..=10.0), rng.random_range(0.0..=10.0)))
        .collect();
    let cfg = SimConfig::default();
    let start = Instant::now();
    let results: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(xp, xm)| {
            let mut crn = gadget.clone();
            crn.set_conc(sp("X1+"), xp);
            crn.set_conc(sp("X1-"), xm);
            let tr = simulate(&crn, &[], &cfg).unwrap();
            let y = readout(&tr, &crn).unwrap().values[0];
            ((y - (xp - xm).max(0.0)).abs(), xp - xm)
        })
        .collect();
    let elapsed = start.elapsed();
    let bad: Vec<&(f64, f64)> = results.iter().filter(|(e, _)| *e > 1e-4).collect();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let widest_bad_gap = bad.iter().map(|(_, d)| d.abs()).fold(0.0, f64::max);
    report(
        1,
        "ReLU gadget",
        bad.is_empty() && elapsed < Duration::from_secs(10),
        format!(
            "{}/1000 within 1e-4, worst error {worst:.3e}, failures all have |x+ - x-| <= {widest_bad_gap:.3}, {:.2}s",
            1000 - bad.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2_min_reaction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pairs: Vec<(f64, f64)> = (0..100)
        .map(|_| (rng.random_range(0.0..=10.0), rng.random_range(0.0..=10.0)))
        .collect();
    let mut fails = Vec::new();
    let mut worst: f64 = 0.0;
    for k in [0.1, 1.0, 10.0] {
        for &(a, b) in &pairs {
            let mut crn = Crn::from_text(&format!("rxn: A + B -> C @ {k}")).unwrap();
            crn.set_conc(sp("A"), a);
            crn.set_conc(sp("B"), b);
            let tr = simulate(&crn, &[], &SimConfig::default().with_t_end(50.0 / k)).unwrap();
            let err = (tr.final_state()[&sp("C")] - a.min(b)).abs();
            worst = worst.max(err);
            if err > 1e-4 {
                fails.push((k, (a - b).abs()));
            }
        }
    }
    let widest = fails.iter().map(|f| f.1).fold(0.0, f64::max);
    report(
        2,
        "min reaction",
        fails.is_empty(),
        format!(
            "{}/300 within 1e-4, worst error {worst:.3e}, failures all have |a - b| <= {widest:.3}",
            300 - fails.len()
        ),
    )
}

fn worked_example(b1: [f64; 3], b2: f64) -> BinaryNetwork {
    BinaryNetwork::new(
        2,
        vec![
            BinaryLayer::new(vec![vec![1, 1, 1], vec![-1, -1, -1]], b1.to_vec(), Activation::Relu).unwrap(),
            BinaryLayer::new(vec![vec![1], vec![1], vec![-1]], vec![b2], Activation::Linear).unwrap(),
        ],
    )
    .unwrap()
}

fn reaction_set(crn: &Crn) -> BTreeSet<String> {
    crn.reactions.iter().map(|r| r.to_string()).collect()
}

fn strings(v: &[&str]) -> BTreeSet<String> {
    v.iter().map(|s| format!("{s} @ 1")).collect()
}

fn criterion_3_worked_example() -> Outcome {
    // hidden layer is layer 2 and the output Y is H3,1
    let compiled_expected = strings(&[
        "X1+ -> I2,1+ + I2,2+ + I2,3+",
        "X1- -> I2,1- + I2,2- + I2,3-",
        "X2+ -> I2,1- + I2,2- + I2,3-",
        "X2- -> I2,1+ + I2,2+ + I2,3+",
        "I2,1+ -> M2,1 + H2,1+",
        "I2,1- + M2,1 -> H2,1-",
        "I2,2+ -> M2,2 + H2,2+",
        "I2,2- + M2,2 -> H2,2-",
        "I2,3+ -> M2,3 + H2,3+",
        "I2,3- + M2,3 -> H2,3-",
        "H2,1+ -> H3,1+",
        "H2,1- -> H3,1-",
        "H2,2+ -> H3,1+",
        "H2,2- -> H3,1-",
        "H2,3+ -> H3,1-",
        "H2,3- -> H3,1+",
    ]);
    let reduced_expected = strings(&[
        "X1+ -> M2,1 + M2,2 + M2,3 + H3,1+",
        "X1- -> I2,1- + I2,2- + I2,3-",
        "X2+ -> I2,1- + I2,2- + I2,3-",
        "X2- -> M2,1 + M2,2 + M2,3 + H3,1+",
        "I2,1- + M2,1 -> H3,1-",
        "I2,2- + M2,2 -> H3,1-",
        "I2,3- + M2,3 -> H3,1+",
    ]);

    let crn = compile(&worked_example([0.0; 3], 0.0)).unwrap();
    let red = reduce(&crn).unwrap();
    let compiled_ok = crn.reactions.len() == 16 && reaction_set(&crn) == compiled_expected;
    let reduced_ok = red.reactions.len() == 7 && reaction_set(&red) == reduced_expected;

    // concentration bookkeeping with nonzero biases:
    // m_i += i_i⁺(0); y⁺ += i_1⁺(0) + i_2⁺(0); y⁻ += i_3⁺(0); then the smaller of y± is zeroed
    let (b1, b2) = ([0.5, -1.0, 2.0], 0.25);
    let biased = compile(&worked_example(b1, b2)).unwrap();
    let i_plus: Vec<f64> = (1..=3).map(|j| biased.conc(&Species::intermediate(2, j, Sign::Plus))).collect();
    let i_minus: Vec<f64> = (1..=3).map(|j| biased.conc(&Species::intermediate(2, j, Sign::Minus))).collect();
    let mut y_plus = biased.conc(&sp("H3,1+")) + i_plus[0] + i_plus[1];
    let mut y_minus = biased.conc(&sp("H3,1-")) + i_plus[2];
    let common = y_plus.min(y_minus);
    y_plus -= common;
    y_minus -= common;
    let mut expected: BTreeMap<Species, f64> = BTreeMap::new();
    for j in 0..3 {
        expected.insert(Species::mem(2, j + 1), i_plus[j]);
        expected.insert(Species::intermediate(2, j + 1, Sign::Minus), i_minus[j]);
    }
    expected.insert(sp("H3,1+"), y_plus);
    expected.insert(sp("H3,1-"), y_minus);
    expected.retain(|_, v| *v != 0.0);
    let reduced_biased = reduce(&biased).unwrap();
    let conc_ok = reduced_biased.init == expected;
    let value_ok = biased.conc(&sp("H3,1+")) == 0.25
        && y_plus - y_minus == worked_example(b1, b2).forward(&[0.0, 0.0]).unwrap()[0];

    report(
        3,
        "worked example",
        compiled_ok && reduced_ok && conc_ok && value_ok,
        format!(
            "compiled 16/16 match: {compiled_ok}, reduced 7/7 match: {reduced_ok}, \
             concentrations match: {conc_ok} ({:?}), bias value consistent: {value_ok}",
            reduced_biased.init.iter().map(|(s, v)| format!("{s}={v}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_4_reaction_counts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut lines = Vec::new();
    let mut ok = true;
    for (shape, want) in [(vec![4, 8, 3], 40), (vec![196, 512, 512, 10], 4488), (vec![10, 32, 4], 148)] {
        let net = random_network(&shape, 1.0, &mut rng);
        let crn = compile(&net).unwrap();
        let red = reduce(&crn).unwrap();
        let relu: usize = shape[1..shape.len() - 1].iter().sum();
        let formula = 2 * shape[0] + relu;
        let stats = red.stats();
        let good = crn.reactions.len() == want
            && reaction_count_unoptimized(&shape) == want
            && red.reactions.len() == formula
            && reaction_count_reduced(&shape) == formula
            && stats.unimolecular == 2 * shape[0]
            && stats.bimolecular == relu;
        ok &= good;
        lines.push(format!("{shape:?}: {} -> {}", crn.reactions.len(), red.reactions.len()));
    }
    let iris_reduced = reduce(&compile(&random_network(&[4, 8, 3], 1.0, &mut rng)).unwrap()).unwrap();
    ok &= iris_reduced.reactions.len() == 16;
    report(4, "reaction counts", ok, lines.join(", "))
}

fn criterion_5_iris_end_to_end() -> Outcome {
    let start = Instant::now();
    let run = iris_run();
    let data = iris();
    let crn = compile(&run.net).unwrap();
    let red = reduce(&crn).unwrap();
    let cfg = SimConfig::default();
    let full = verify(&run.net, &crn, &data, &cfg).unwrap();
    let reduced = verify(&run.net, &red, &data, &cfg).unwrap();
    let faster = full
        .examples
        .iter()
        .zip(&reduced.examples)
        .filter(|(a, b)| b.stop_time.unwrap() < a.stop_time.unwrap())
        .count();
    let both_at_end = full
        .examples
        .iter()
        .zip(&reduced.examples)
        .filter(|(a, b)| !a.steady && !b.steady)
        .count();
    let over = |r: &VerificationReport| r.examples.iter().filter(|e| e.max_err > 1e-3).count();
    // smallest |pre-activation| over hidden units, for examples outside 1e-3
    let hidden = &run.net.layers()[0];
    let nearest_zero = |raw: &[f64]| {
        let x = run.net.prepare_input(raw);
        (0..hidden.fan_out())
            .map(|j| {
                let d: f64 = hidden.bias()[j]
                    + (0..hidden.fan_in()).map(|i| f64::from(hidden.weight(i, j)) * x[i]).sum::<f64>();
                d.abs()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let tail_gap = full
        .examples
        .iter()
        .chain(&reduced.examples)
        .filter(|e| e.max_err > 1e-3)
        .map(|e| nearest_zero(&data.features()[e.index]))
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();

    let acc_ok = run.accuracy >= 0.9;
    let agree_ok = full.agreements() == 150 && reduced.agreements() == 150;
    let err_ok = full.max_err <= 1e-3 && reduced.max_err <= 1e-3;
    let faster_ok = faster as f64 >= 0.9 * 150.0;
    let time_ok = elapsed < Duration::from_secs(600);
    report(
        5,
        "IRIS end to end",
        acc_ok && agree_ok && err_ok && faster_ok && time_ok,
        format!(
            "accuracy {:.4}; agreement {}/150 unoptimized, {}/150 reduced; max value error {:.3e} / {:.3e} \
             ({} / {} examples above 1e-3, each with a hidden pre-activation within {tail_gap:.3} of 0); reduced stops strictly earlier on {faster}/150 \
             (neither reaches steady state on {both_at_end}); training {:.1}s, total {:.1}s",
            run.accuracy,
            full.agreements(),
            reduced.agreements(),
            full.max_err,
            reduced.max_err,
            over(&full),
            over(&reduced),
            run.train_time.as_secs_f64(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6_rate_independence() -> Outcome {
    let run = iris_run();
    let data = iris();
    let red = reduce(&compile(&run.net).unwrap()).unwrap();
    let mut changed = 0;
    let mut worst: f64 = 0.0;
    let mut over = 0;
    for seed in 0..20 {
        let crn = randomize_rates(&red, seed, 0.1, 10.0).unwrap();
        let cfg = SimConfig::default().with_t_end(50.0 / min_rate(&crn));
        let rep = verify(&run.net, &crn, &data, &cfg).unwrap();
        changed += 150 - rep.agreements();
        worst = worst.max(rep.max_err);
        over += rep.examples.iter().filter(|e| e.max_err > 1e-3).count();
    }
    report(
        6,
        "rate independence",
        changed == 0 && worst <= 1e-3,
        format!(
            "20 randomizations x 150 examples: {changed} classifications changed, \
             worst value error {worst:.3e}, {over}/3000 runs above 1e-3"
        ),
    )
}

fn criterion_7_reduction_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = SimConfig::default();
    let mut cases = 0;
    let mut not_slower = 0;
    let mut mismatched = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let shape = random_shape(3, 5, &mut rng);
        let net = random_network(&shape, 1.0, &mut rng);
        let crn = compile(&net).unwrap();
        let red = reduce(&crn).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..shape[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = simulate(&crn, &x, &cfg).unwrap();
            let b = simulate(&red, &x, &cfg).unwrap();
            let ra = readout(&a, &crn).unwrap();
            let rb = readout(&b, &red).unwrap();
            let err = ra.values.iter().zip(&rb.values).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            worst = worst.max(err);
            mismatched += usize::from(err > 1e-3);
            not_slower += usize::from(b.stop_time <= a.stop_time);
            cases += 1;
        }
    }
    let ok = mismatched == 0 && not_slower as f64 >= 0.9 * cases as f64;
    report(
        7,
        "reduction equivalence",
        ok,
        format!(
            "{}/{cases} outputs agree within 1e-3 (worst {worst:.3e}); \
             reduced stop time <= original on {not_slower}/{cases}",
            cases - mismatched
        ),
    )
}

fn criterion_8_integrator() -> Outcome {
    let crn = Crn::from_text("init A 1\nrxn: A -> B @ 1").unwrap();
    let run = |atol: f64, rtol: f64| {
        let cfg = SimConfig {
            atol,
            rtol,
            steady_state: 0.0,
            samples: 11,
            ..SimConfig::default().with_t_end(10.0)
        };
        let tr = simulate(&crn, &[], &cfg).unwrap();
        let a = tr.column(&sp("A")).unwrap();
        [1usize, 5, 10]
            .iter()
            .map(|&k| {
                assert_eq!(tr.times[k], k as f64);
                (a[k] - (-(k as f64)).exp()).abs()
            })
            .fold(0.0, f64::max)
    };
    let tight = run(1e-12, 1e-10);
    let default = run(1e-9, 1e-6);
    report(
        8,
        "integrator",
        tight <= 1e-8,
        format!("max |a(t) - e^-t| at t in {{1,5,10}}: {tight:.3e} at atol 1e-12/rtol 1e-10 ({default:.3e} at default tolerances)"),
    )
}

fn criterion_9_synthetic_pipeline() -> Outcome {
    let spec = SyntheticSpec::default();
    let synth = make_synthetic(&spec, 9).unwrap();
    let (train_set, test_set) = synth.data.split(100, 9);
    let cfg = TrainConfig {
        hidden: vec![32],
        epochs: 300,
        seed: 9,
        ..TrainConfig::default()
    };
    let rep = train(&train_set, &cfg).unwrap();
    let acc = evaluate(&rep.network, &test_set).unwrap();
    let crn = compile(&rep.network).unwrap();
    let red = reduce(&crn).unwrap();
    let counts_ok = crn.reactions.len() == 148 && red.reactions.len() == 2 * 10 + 32;
    let sim = SimConfig::default();
    let full = verify(&rep.network, &crn, &test_set, &sim).unwrap();
    let reduced = verify(&rep.network, &red, &test_set, &sim).unwrap();
    report(
        9,
        "synthetic 10-32-4 pipeline",
        acc >= 0.99 && full.agreements() == 100 && reduced.agreements() == 100 && counts_ok,
        format!(
            "test accuracy {acc:.3}; agreement {}/100 unoptimized, {}/100 reduced; reactions {} -> {}",
            full.agreements(),
            reduced.agreements(),
            crn.reactions.len(),
            red.reactions.len()
        ),
    )
}

fn main() {
    let criteria: [fn() -> Outcome; 9] = [
        criterion_1_relu_gadget,
        criterion_2_min_reaction,
        criterion_3_worked_example,
        criterion_4_reaction_counts,
        criterion_5_iris_end_to_end,
        criterion_6_rate_independence,
        criterion_7_reduction_equivalence,
        criterion_8_integrator,
        criterion_9_synthetic_pipeline,
    ];
    let mut failed = 0;
    for run in criteria {
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {} ({}): {}", o.id, o.name, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
