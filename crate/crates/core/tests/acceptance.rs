//! Acceptance report: one PASS/FAIL/SKIP line per criterion with the
//! measured value and its pinned tolerance.
//!
//! Datasets are read from `$SPIKEPLAST_DATA/<name>` or `<workspace>/data/<name>`.
//! `SPIKEPLAST_LONG=1` adds the multi-hour full-dataset runs.
//! `SPIKEPLAST_ACCEPTANCE_STRICT=1` makes any FAIL exit non-zero; by default
//! only the deterministic invariants gate the exit status.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spikeplast::data::{small_sample_subset, DatasetId, RawDataset, Split};
use spikeplast::layers::competition::{asf_filter, atb_fc_update, wta_select};
use spikeplast::layers::{Mechanisms, WtaScope};
use spikeplast::oracle::{dense_respond, unbatched_stdp, StdpEpisode};
use spikeplast::pipeline::{
    standard_ablations, train_and_evaluate, train_layerwise, Checkpoint, Network, NetworkSpec, TrainConfig,
};
use spikeplast::plasticity::{
    apply_stb_update, normalize_conv, normalize_fc, window_stdp, StdpConfig, TraceState, UpdateAccumulator,
};
use spikeplast::seed;

const SEEDS: [u64; 3] = [0, 1, 2];
/// Reported small-sample accuracies for 20, 10, 5 and 1 samples per class.
const SMALL_SAMPLE_TARGETS: [(usize, f64); 4] = [(20, 0.8145), (10, 0.7544), (5, 0.7288), (1, 0.5145)];
const SMALL_SAMPLE_TOLERANCE: f64 = 0.04;
const PROXY_TRAIN: usize = 5000;
const PROXY_FC_EPOCHS: usize = 1;
const PROXY_TARGET: f64 = 0.90;
const FULL_MNIST_TARGET: f64 = 0.96;
const FASHION_TARGET: f64 = 0.83;
const FASHION_PROXY_MIN: f64 = 0.80;
const CIFAR_TARGET: f64 = 0.35;
const ABLATION_NOISE: f64 = -0.01;
const ABLATION_SPREAD: f64 = 0.05;

#[derive(Clone, Copy, PartialEq)]
enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Report {
    lines: Vec<(Verdict, bool, String)>,
}

impl Report {
    fn record(&mut self, verdict: Verdict, gating: bool, id: &str, detail: String, started: Instant) {
        let tag = match verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "SKIP",
        };
        let line = format!("{tag} {id}: {detail} [{:.0}s]", started.elapsed().as_secs_f64());
        println!("{line}");
        self.lines.push((verdict, gating, line));
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn data_root() -> PathBuf {
    std::env::var_os("SPIKEPLAST_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn load(id: DatasetId) -> Option<(RawDataset, RawDataset)> {
    let dir = data_root().join(id.name());
    let train = id.load(&dir, Split::Train).ok()?;
    let test = id.load(&dir, Split::Test).ok()?;
    Some((train, test))
}

fn flag(name: &str) -> bool {
    std::env::var(name).map(|v| v == "1").unwrap_or(false)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt_accs(v: &[f64]) -> String {
    v.iter().map(|a| format!("{:.4}", a)).collect::<Vec<_>>().join(", ")
}

fn accuracy(spec: NetworkSpec, train: &RawDataset, test: &RawDataset, cfg: TrainConfig) -> f64 {
    train_and_evaluate(spec, train, test, &cfg).expect("run").test.accuracy
}

// ---------------------------------------------------------------- invariants

fn max_trace_window_error(rng: &mut ChaCha8Rng) -> f64 {
    let lambda = StdpConfig::default().lambda_plus;
    let tau = StdpConfig::default().tau_plus();
    let mut worst: f64 = 0.0;
    for case in 0..300 {
        // half the cases with many presynaptic spikes and no offset, half with
        // one presynaptic spike before every post spike and the usual offset
        let (pre, offset): (Vec<u32>, f64) = if case % 2 == 0 {
            ((0..60).filter(|_| rng.gen_bool(0.2)).collect(), 0.0)
        } else {
            (vec![rng.gen_range(0..10)], 0.3)
        };
        let first = pre.first().copied().unwrap_or(0);
        let post: Vec<u32> = (first + 1..60).filter(|_| rng.gen_bool(0.2)).collect();
        let mut trace = TraceState::new(1, lambda);
        let mut total = 0.0;
        for t in 0..60 {
            if post.contains(&t) {
                total += lambda * trace.values[0] - offset;
            }
            trace.step_spikes(&[pre.contains(&t)]);
        }
        worst = worst.max((total - window_stdp(&pre, &post, 1.0, tau, offset)).abs());
    }
    worst
}

fn max_stb_error(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (nb, steps, fan_in, units) = (rng.gen_range(1..5), rng.gen_range(1..12), rng.gen_range(1..7), rng.gen_range(1..5));
        let episodes: Vec<StdpEpisode> = (0..nb)
            .map(|_| StdpEpisode {
                pre: (0..steps).map(|_| (0..fan_in).map(|_| rng.gen::<f64>()).collect()).collect(),
                post: (0..steps).map(|_| (0..units).filter(|_| rng.gen_bool(0.3)).collect()).collect(),
            })
            .collect();
        let weights: Vec<f64> = (0..units * fan_in).map(|_| rng.gen()).collect();
        let mut acc = UpdateAccumulator::new(units, fan_in);
        for ep in &episodes {
            let mut trace = TraceState::new(fan_in, 0.99);
            for (pre, posts) in ep.pre.iter().zip(&ep.post) {
                trace.step(pre);
                for &j in posts {
                    acc.accumulate(j, &trace.values, 0.3).unwrap();
                }
            }
        }
        let cfg = StdpConfig { n_batch: nb, t_batch: steps, ..StdpConfig::default() };
        let mut got = weights.clone();
        apply_stb_update(&mut got, &mut acc, &cfg).unwrap();
        let want = unbatched_stdp(&weights, fan_in, &episodes, 0.99, 0.3, nb, steps);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }
    worst
}

fn max_normalization_error(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(4..200);
        let a = rng.gen_range(0.01..2.0);
        let mut fc: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        normalize_fc(&mut fc, n, a).unwrap();
        worst = worst.max((mean(&fc) - a).abs());
        let mut again = fc.clone();
        normalize_fc(&mut again, n, a).unwrap();
        worst = fc.iter().zip(&again).fold(worst, |m, (x, y)| m.max((x - y).abs()));

        let mut conv: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        normalize_conv(&mut conv, n, a).unwrap();
        let m = mean(&conv);
        let std = (conv.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        worst = worst.max(m.abs()).max((std - a).abs());
        let mut again = conv.clone();
        normalize_conv(&mut again, n, a).unwrap();
        worst = conv.iter().zip(&again).fold(worst, |m, (x, y)| m.max((x - y).abs()));
    }
    worst
}

fn asf_violations(rng: &mut ChaCha8Rng) -> usize {
    let mut bad = 0;
    for _ in 0..2000 {
        let thr = rng.gen_range(0.01..50.0);
        let (alpha, beta) = (rng.gen_range(0.01..50.0), rng.gen_range(-10.0..10.0));
        let (a, b): (f64, f64) = (rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let (fa, fb) = (asf_filter(a.min(b), thr, alpha, beta).unwrap(), asf_filter(a.max(b), thr, alpha, beta).unwrap());
        bad += (fa > fb || !(0.0..=thr).contains(&fa) || !(0.0..=thr).contains(&fb)) as usize;
    }
    bad
}

/// Largest deviation of a winner count from `n/k`, in binomial sigmas, and
/// the number of draws that did not keep exactly one firing neuron.
fn wta_statistics(rng: &mut ChaCha8Rng) -> (f64, usize) {
    let trials = 10_000;
    let mut worst: f64 = 0.0;
    let mut cardinality_errors = 0;
    for pattern in [vec![1usize, 4], vec![0, 2, 5], vec![1, 3, 4, 6, 9], (0..8).collect()] {
        let k = pattern.len();
        let mut wins = [0usize; 10];
        for _ in 0..trials {
            let mut spikes = [false; 10];
            pattern.iter().for_each(|&i| spikes[i] = true);
            let w = wta_select(&mut spikes, rng.gen()).unwrap();
            cardinality_errors += (spikes.iter().filter(|&&s| s).count() != 1 || !pattern.contains(&w)) as usize;
            wins[w] += 1;
        }
        let p = 1.0 / k as f64;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for &i in &pattern {
            worst = worst.max((wins[i] as f64 - trials as f64 * p).abs() / sigma);
        }
    }
    (worst, cardinality_errors)
}

fn ceiling_violations(rng: &mut ChaCha8Rng) -> usize {
    let mut bad = 0;
    for _ in 0..2000 {
        let n = rng.gen_range(1..40);
        let theta_init = rng.gen_range(0.5..20.0);
        let gamma = theta_init + rng.gen_range(0.0..10.0);
        let alpha_plus = rng.gen_range(0.0001..0.5);
        let mut theta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..8.0)).collect();
        let counts: Vec<u32> = (0..n).map(|_| rng.gen_range(0..300)).collect();
        let raised = theta.iter().zip(&counts).map(|(t, &c)| t + alpha_plus * c as f64).fold(0.0, f64::max);
        atb_fc_update(&mut theta, &counts, theta_init, alpha_plus, gamma);
        let top = theta.iter().map(|t| theta_init + t).fold(f64::MIN, f64::max);
        let exceeded = theta_init + raised > gamma;
        bad += (theta.iter().any(|&t| t < 0.0) || (exceeded && (top > gamma || gamma - top > 1e-12))) as usize;
    }
    bad
}

fn oracle_mismatches(rng: &mut ChaCha8Rng) -> (usize, usize) {
    let (mut bad, mut active) = (0, 0);
    for _ in 0..100 {
        let kernel = rng.gen_range(2..5);
        let atb = rng.gen_bool(0.7);
        let theta_init = rng.gen_range(0.5..4.0);
        let spec = NetworkSpec {
            in_channels: rng.gen_range(1..3),
            in_height: rng.gen_range(kernel + 1..12),
            in_width: rng.gen_range(kernel + 1..12),
            kernel,
            conv_channels: rng.gen_range(1..6),
            fc_neurons: rng.gen_range(1..16),
            timesteps: rng.gen_range(1..30),
            theta_init,
            gamma: theta_init + rng.gen_range(0.0..3.0),
            tau_mem_conv: rng.gen_range(1.5..20.0),
            tau_mem_fc: rng.gen_range(1.5..20.0),
            a_minus_fc: rng.gen_range(0.05..1.0),
            mechanisms: Mechanisms { asf: atb && rng.gen_bool(0.6), alic: rng.gen_bool(0.7), atb },
            conv_wta: if rng.gen_bool(0.5) { WtaScope::Layer } else { WtaScope::Position },
            fc_competition: rng.gen_bool(0.8),
            ..NetworkSpec::mnist()
        };
        let mut net = Network::init(spec, rng.gen()).unwrap();
        net.fc.theta_plus.iter_mut().for_each(|t| *t = rng.gen_range(0.0..1.0));
        let image: Vec<f64> = (0..net.spec.input_len()).map(|_| rng.gen::<u8>() as f64 / 255.0).collect();
        let s: u64 = rng.gen();
        let dense = dense_respond(&net, &image, s);
        let pooled = net.conv_pooled_counts(&image, seed::derive(s, 1, 0)).unwrap();
        let counts = net.respond(&image, s).unwrap();
        bad += (pooled != dense.pooled_counts || counts != dense.fc_counts) as usize;
        active += (counts.iter().sum::<u32>() > 0) as usize;
    }
    (bad, active)
}

fn determinism_holds() -> bool {
    let data = common::synthetic(3, 11);
    let cfg = TrainConfig { conv_epochs: 1, fc_epochs: 2, seed: 4 };
    let bytes = || {
        let net = train_layerwise(common::tiny_spec(), &data, &cfg, |_, _| Ok(())).unwrap();
        Checkpoint { network: net, seed: 4, conv_epochs_done: 1, fc_epochs_done: 2, votes: None }.to_bytes()
    };
    bytes() == bytes()
}

fn criterion_invariants(report: &mut Report) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let trace = max_trace_window_error(&mut rng);
    let stb = max_stb_error(&mut rng);
    let norm = max_normalization_error(&mut rng);
    let asf = asf_violations(&mut rng);
    let (wta_sigma, wta_card) = wta_statistics(&mut rng);
    let ceiling = ceiling_violations(&mut rng);
    let (oracle_bad, oracle_active) = oracle_mismatches(&mut rng);
    let deterministic = determinism_holds();
    let ok = trace <= 1e-9
        && stb <= 1e-12
        && norm <= 1e-9
        && asf == 0
        && wta_sigma <= 3.0
        && wta_card == 0
        && ceiling == 0
        && oracle_bad == 0
        && deterministic;
    report.record(
        verdict(ok),
        true,
        "C6 invariants",
        format!(
            "trace/window {trace:.1e} (<=1e-9), stb/unbatched {stb:.1e} (<=1e-12), normalization {norm:.1e} (<=1e-9), \
             asf violations {asf}, wta max dev {wta_sigma:.2} sigma (<=3) with {wta_card} cardinality errors, \
             ceiling violations {ceiling}, dense-oracle mismatches {oracle_bad}/100 ({oracle_active} spiking), \
             seeded runs identical {deterministic}"
        ),
        started,
    );
}

// ------------------------------------------------------------------ datasets

fn kernel_similarity(net: &Network) -> f64 {
    let rows: Vec<&[f64]> = net.conv.weight_slice().chunks(net.conv.geometry().fan_in()).collect();
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut sims = Vec::new();
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            let dot: f64 = rows[a].iter().zip(rows[b]).map(|(x, y)| x * y).sum();
            sims.push((dot / (norm(rows[a]) * norm(rows[b]))).abs());
        }
    }
    mean(&sims)
}

fn criterion_diversity(report: &mut Report, train: &RawDataset) {
    let started = Instant::now();
    let conv_only = |seed| TrainConfig { conv_epochs: TrainConfig::default().conv_epochs, fc_epochs: 0, seed };
    let mut on = Vec::new();
    let mut off = Vec::new();
    for seed in SEEDS {
        let subset = small_sample_subset(train, 20, seed).unwrap();
        let spec = NetworkSpec::mnist();
        let no_alic = NetworkSpec { mechanisms: Mechanisms { alic: false, ..spec.mechanisms }, ..spec.clone() };
        on.push(kernel_similarity(&train_layerwise(spec, &subset, &conv_only(seed), |_, _| Ok(())).unwrap()));
        off.push(kernel_similarity(&train_layerwise(no_alic, &subset, &conv_only(seed), |_, _| Ok(())).unwrap()));
    }
    let (m_on, m_off) = (mean(&on), mean(&off));
    report.record(
        verdict(m_on < m_off),
        false,
        "C7 kernel diversity",
        format!("mean |cos| with inhibition {m_on:.4} [{}] vs without {m_off:.4} [{}] (need with < without)", fmt_accs(&on), fmt_accs(&off)),
        started,
    );
}

/// Returns the 20-per-class accuracies so the ablation can reuse them as
/// its baseline.
fn criterion_small_sample(report: &mut Report, train: &RawDataset, test: &RawDataset) -> Vec<f64> {
    let mut baseline = Vec::new();
    for (per_class, target) in SMALL_SAMPLE_TARGETS {
        let started = Instant::now();
        let accs: Vec<f64> = SEEDS
            .iter()
            .map(|&seed| {
                let subset = small_sample_subset(train, per_class, seed).unwrap();
                accuracy(NetworkSpec::mnist(), &subset, test, TrainConfig { seed, ..TrainConfig::default() })
            })
            .collect();
        let m = mean(&accs);
        report.record(
            verdict((m - target).abs() <= SMALL_SAMPLE_TOLERANCE),
            false,
            &format!("C1 small-sample MNIST {per_class}/class"),
            format!("mean {m:.4} [{}] vs {target:.4} +- {SMALL_SAMPLE_TOLERANCE} on {} test images", fmt_accs(&accs), test.len()),
            started,
        );
        if per_class == 20 {
            baseline = accs;
        }
    }
    baseline
}

fn criterion_ablation(report: &mut Report, train: &RawDataset, test: &RawDataset, baseline: Vec<f64>) {
    let started = Instant::now();
    let mut means = Vec::new();
    let mut names = Vec::new();
    for (name, mechanisms) in standard_ablations() {
        let accs = if name == "baseline" && !baseline.is_empty() {
            baseline.clone()
        } else {
            SEEDS
                .iter()
                .map(|&seed| {
                    let subset = small_sample_subset(train, 20, seed).unwrap();
                    let spec = NetworkSpec { mechanisms, ..NetworkSpec::mnist() };
                    accuracy(spec, &subset, test, TrainConfig { seed, ..TrainConfig::default() })
                })
                .collect()
        };
        names.push(format!("{name} {:.4}", mean(&accs)));
        means.push(mean(&accs));
    }
    let ordered = means.windows(2).all(|w| w[0] - w[1] >= ABLATION_NOISE);
    let spread = means[0] - means[means.len() - 1];
    report.record(
        verdict(ordered && spread >= ABLATION_SPREAD),
        false,
        "C5 ablation ordering",
        format!(
            "{} (each step >= {ABLATION_NOISE}, spread {spread:.4} >= {ABLATION_SPREAD})",
            names.join(" > ")
        ),
        started,
    );
}

fn criterion_mnist_proxy(report: &mut Report, train: &RawDataset, test: &RawDataset) {
    let started = Instant::now();
    let subset = train.head(PROXY_TRAIN);
    let cfg = TrainConfig { fc_epochs: PROXY_FC_EPOCHS, ..TrainConfig::default() };
    let acc = accuracy(NetworkSpec::mnist(), &subset, test, cfg);
    report.record(
        verdict(acc >= PROXY_TARGET),
        false,
        "C2 MNIST proxy",
        format!("first {PROXY_TRAIN} training images, {PROXY_FC_EPOCHS} FC epoch: {acc:.4} (need >= {PROXY_TARGET})"),
        started,
    );
}

fn long_run(report: &mut Report, id: &str, dataset: DatasetId, spec: NetworkSpec, target: f64) -> Option<spikeplast::pipeline::MetricsRecord> {
    let started = Instant::now();
    if !flag("SPIKEPLAST_LONG") {
        report.record(Verdict::Skip, false, id, "multi-hour run; set SPIKEPLAST_LONG=1".into(), started);
        return None;
    }
    let Some((train, test)) = load(dataset) else {
        report.record(Verdict::Skip, false, id, format!("no {} data under {}", dataset.name(), data_root().display()), started);
        return None;
    };
    let out = train_and_evaluate(spec, &train, &test, &TrainConfig::default()).expect("run");
    report.record(verdict(out.test.accuracy >= target), false, id, format!("{:.4} (need >= {target})", out.test.accuracy), started);
    Some(out.test)
}

fn main() {
    let mut report = Report { lines: Vec::new() };
    println!("acceptance report (data root {})", data_root().display());
    criterion_invariants(&mut report);

    match load(DatasetId::Mnist) {
        Some((train, test)) => {
            criterion_diversity(&mut report, &train);
            let baseline = criterion_small_sample(&mut report, &train, &test);
            criterion_ablation(&mut report, &train, &test, baseline);
            criterion_mnist_proxy(&mut report, &train, &test);
        }
        None => {
            for id in ["C7 kernel diversity", "C1 small-sample MNIST", "C5 ablation ordering", "C2 MNIST proxy"] {
                report.record(Verdict::Skip, false, id, format!("no MNIST under {}", data_root().display()), Instant::now());
            }
        }
    }
    long_run(&mut report, "C2 full MNIST", DatasetId::Mnist, NetworkSpec::mnist(), FULL_MNIST_TARGET);
    let fashion = long_run(&mut report, "C3 FashionMNIST", DatasetId::Fashion, NetworkSpec::fashion(), FASHION_TARGET);
    let started = Instant::now();
    match fashion {
        Some(m) if m.accuracy >= FASHION_PROXY_MIN => {
            let worst = m.worst_classes(4);
            let ok = worst.iter().all(|c| [0, 2, 4, 6].contains(c));
            report.record(verdict(ok), false, "C3 FashionMNIST worst classes", format!("{worst:?} (need within [0, 2, 4, 6])"), started);
        }
        Some(m) => report.record(
            Verdict::Skip,
            false,
            "C3 FashionMNIST worst classes",
            format!("needs a run >= {FASHION_PROXY_MIN}, got {:.4}", m.accuracy),
            started,
        ),
        None => report.record(Verdict::Skip, false, "C3 FashionMNIST worst classes", "no FashionMNIST run".into(), started),
    }
    long_run(&mut report, "C4 CIFAR-10", DatasetId::Cifar10, NetworkSpec::cifar10(), CIFAR_TARGET);

    let passed = report.lines.iter().filter(|l| l.0 == Verdict::Pass).count();
    let failed = report.lines.iter().filter(|l| l.0 == Verdict::Fail).count();
    let skipped = report.lines.iter().filter(|l| l.0 == Verdict::Skip).count();
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    let strict = flag("SPIKEPLAST_ACCEPTANCE_STRICT");
    let gating_failure = report.lines.iter().any(|(v, gating, _)| *v == Verdict::Fail && (*gating || strict));
    if gating_failure {
        std::process::exit(1);
    }
}
