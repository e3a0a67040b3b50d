//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers. Run with
//! `cargo test -p musim --test acceptance -- --nocapture`.

use std::collections::BTreeMap;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use musim::engine::{self, select_users_fifo, QueueView, SimConfig};
use musim::framing::FramingConstants;
use musim::overhead::SoundingConfig;
use musim::sweep::{make_figure_config, run_sweep, write_csv, Figure, SweepRow, SweepSpec};
use musim::traffic::{PacketSizeModel, SizeSampler, TrafficMode, TrafficProfile, TrafficSource};

/// Analytical closed form for the backlogged fixed-512-byte baseline,
/// written out from the framing and overhead timelines (independent of the
/// library's own arithmetic).
fn closed_form_backlogged_goodput(n_streams: f64, agg: f64) -> f64 {
    // Framing: subframe = 4 + 36 + (512 + 20 + 8) + 4 = 584 bytes (aligned).
    let subframe_bytes = 584.0;
    let data_airtime = agg * subframe_bytes * 8.0 / 54e6;
    // Sounding timeline at 24 Mb/s control rate with 44 us PHY preambles.
    let sifs = 16e-6;
    let ndpa = 44e-6 + 25.0 * 8.0 / 24e6;
    let feedback_bits = 16.0 * (3.0 * 7.0 + 3.0 * 5.0) + 8.0;
    let feedback = 44e-6 + (28.0 * 8.0 + feedback_bits) / 24e6;
    let poll = 44e-6 + 21.0 * 8.0 / 24e6;
    let ba = 44e-6 + 32.0 * 8.0 / 24e6;
    let sounding =
        ndpa + sifs + 44e-6 + n_streams * (sifs + feedback) + (n_streams - 1.0) * (poll + sifs);
    let overhead = sounding + 44e-6 + n_streams * (sifs + ba);
    let payload_bits = n_streams * agg * 512.0 * 8.0;
    payload_bits / (overhead + data_airtime)
}

fn shrink(mut spec: SweepSpec, horizon_s: f64) -> SweepSpec {
    spec.base.horizon_s = horizon_s;
    spec.base.warmup_s = Some(horizon_s * 0.1);
    spec
}

/// Mean throughput (Mb/s) per (agg, value) cell.
fn mean_tput(rows: &[SweepRow]) -> BTreeMap<(u32, u64), f64> {
    let mut acc: BTreeMap<(u32, u64), (f64, usize)> = BTreeMap::new();
    for row in rows {
        let cell = acc
            .entry((row.agg, row.value.to_bits()))
            .or_insert((0.0, 0));
        cell.0 += row.metrics.throughput_bps / 1e6;
        cell.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect()
}

fn curve(means: &BTreeMap<(u32, u64), f64>, agg: u32, values: &[f64]) -> Vec<(f64, f64)> {
    values
        .iter()
        .map(|v| (*v, means[&(agg, v.to_bits())]))
        .collect()
}

#[test]
fn criterion_1_backlogged_closed_form() {
    let spec = make_figure_config(Figure::Fig5);
    let mut cfg = spec.base.clone();
    cfg.traffic.size_model = PacketSizeModel::fixed(0, 1024).unwrap();
    cfg.max_agg = 40;
    let out = engine::run(&cfg).unwrap();
    let expected = closed_form_backlogged_goodput(4.0, 40.0);
    let got = out.metrics.throughput_bps;
    let rel = (got - expected).abs() / expected;
    assert!(
        rel < 1e-3,
        "simulated {got:.0} vs closed form {expected:.0} (rel {rel:.2e})"
    );
    assert_eq!(out.metrics.delay_fraction, 0.0);
    println!(
        "criterion 1 PASS: backlogged goodput {:.3} Mb/s matches closed form {:.3} Mb/s (rel err {:.2e} < 1e-3)",
        got / 1e6,
        expected / 1e6,
        rel
    );
}

#[test]
fn criterion_2_variance_sweep_anchor() {
    let mut spec = shrink(make_figure_config(Figure::Fig5), 12.0);
    spec.agg_rates = vec![10, 40];
    let values = spec.values.clone();
    let rows = run_sweep(&spec, None, None).unwrap();
    let means = mean_tput(&rows);

    // Mean throughput must not increase with the extreme weight (0.5% noise).
    for &agg in &[10u32, 40] {
        let pts = curve(&means, agg, &values);
        for ((w0, t0), (w1, t1)) in pts.iter().tuple_windows() {
            assert!(
                *t1 <= t0 * 1.005,
                "agg {agg}: throughput rose from {t0:.2} (w={w0}) to {t1:.2} (w={w1})"
            );
        }
    }

    let drop40 = means[&(40, 0f64.to_bits())] - means[&(40, 0.5f64.to_bits())];
    let drop10 = means[&(10, 0f64.to_bits())] - means[&(10, 0.5f64.to_bits())];
    assert!(
        (3.0..=20.0).contains(&drop40),
        "agg-40 drop {drop40:.2} Mb/s outside [3, 20]"
    );
    assert!(
        drop10 < drop40,
        "agg-10 drop {drop10:.2} not below agg-40 drop {drop40:.2}"
    );
    println!(
        "criterion 2 PASS: w 0 -> 0.5 drops agg-40 by {drop40:.2} Mb/s (in [3, 20]) and agg-10 by {drop10:.2} Mb/s (smaller)"
    );
}

#[test]
fn criterion_3_correlation_sweep_properties() {
    let mut spec = shrink(make_figure_config(Figure::Fig6), 12.0);
    spec.agg_rates = vec![10, 40];
    let values = spec.values.clone();
    let rows = run_sweep(&spec, None, None).unwrap();
    let means = mean_tput(&rows);

    for &agg in &[10u32, 40] {
        let pts = curve(&means, agg, &values);
        // Non-increasing in the correlation coefficient, 1% noise allowance.
        for ((c0, t0), (c1, t1)) in pts.iter().tuple_windows() {
            assert!(
                *t1 <= t0 * 1.01,
                "agg {agg}: throughput rose from {t0:.2} (C={c0}) to {t1:.2} (C={c1})"
            );
        }
        // Saturation: consecutive points at C >= agg differ by < 2%.
        for ((c0, t0), (c1, t1)) in pts.iter().filter(|(c, _)| *c >= agg as f64).tuple_windows() {
            let rel = (t1 - t0).abs() / t0;
            assert!(
                rel < 0.02,
                "agg {agg}: saturation violated between C={c0} and C={c1} ({rel:.3})"
            );
        }
    }

    let drop = |agg: u32| means[&(agg, 0f64.to_bits())] - means[&(agg, 40f64.to_bits())];
    let (d10, d40) = (drop(10), drop(40));
    assert!(
        d40 > d10,
        "agg-40 drop {d40:.2} not above agg-10 drop {d10:.2}"
    );
    println!(
        "criterion 3 PASS: throughput non-increasing in C; saturated past C = agg; drop agg-40 {d40:.2} Mb/s > agg-10 {d10:.2} Mb/s"
    );
}

#[test]
fn criterion_4_burstiness_sweep_shape() {
    let spec = make_figure_config(Figure::Fig7);
    let values = spec.values.clone();
    let rows = run_sweep(&spec, None, None).unwrap();
    let means = mean_tput(&rows);
    let mean_df: BTreeMap<(u32, u64), f64> = {
        let mut acc: BTreeMap<(u32, u64), (f64, usize)> = BTreeMap::new();
        for row in &rows {
            let cell = acc
                .entry((row.agg, row.value.to_bits()))
                .or_insert((0.0, 0));
            cell.0 += row.metrics.delay_fraction;
            cell.1 += 1;
        }
        acc.into_iter()
            .map(|(k, (sum, n))| (k, sum / n as f64))
            .collect()
    };
    let ratios: Vec<f64> = values.iter().copied().filter(|v| *v >= 1.0).collect();

    // (a) the lowest aggregation rate stays flat with zero delay fraction.
    let t10 = curve(&means, 10, &ratios);
    let lo = t10.iter().map(|(_, t)| *t).fold(f64::INFINITY, f64::min);
    let hi = t10.iter().map(|(_, t)| *t).fold(0.0, f64::max);
    let flatness = (hi - lo) / hi;
    assert!(flatness < 0.03, "agg-10 varies {:.2}%", flatness * 100.0);
    for row in rows.iter().filter(|r| r.agg == 10) {
        assert_eq!(
            row.metrics.delay_fraction, 0.0,
            "agg-10 delay fraction nonzero at ratio {} seed {}",
            row.value, row.seed
        );
    }

    // (b) higher aggregation transitions at a lower ratio.
    let transition = |agg: u32| {
        ratios
            .iter()
            .copied()
            .find(|r| mean_df[&(agg, r.to_bits())] > 1e-6)
            .expect("transition inside the swept range")
    };
    let (t40, t20) = (transition(40), transition(20));
    assert!(
        t40 < t20,
        "agg-40 transition {t40} not below agg-20 transition {t20}"
    );

    // (c) the curves nearly coincide at the largest ratio.
    let last = *ratios.last().unwrap();
    let (m20, m40) = (means[&(20, last.to_bits())], means[&(40, last.to_bits())]);
    let coincide = (m20 - m40).abs() / m20.max(m40);
    assert!(coincide < 0.10, "agg-20/40 differ {:.2}%", coincide * 100.0);

    // (d) agg-40 drop at ratio 27 relative to its flat region.
    let flat: Vec<f64> = ratios
        .iter()
        .filter(|r| **r < t40)
        .map(|r| means[&(40, r.to_bits())])
        .collect();
    let flat_mean = flat.iter().sum::<f64>() / flat.len() as f64;
    let drop = flat_mean - means[&(40, 27f64.to_bits())];
    assert!(
        (20.0..=60.0).contains(&drop),
        "agg-40 drop at ratio 27 is {drop:.2} Mb/s, outside [20, 60]"
    );

    // (e) post-transition decline is close to linear.
    let mut fits = Vec::new();
    for &agg in &[20u32, 40] {
        let tr = transition(agg);
        let pts: Vec<(f64, f64)> = ratios
            .iter()
            .filter(|r| **r >= tr)
            .map(|r| (*r, means[&(agg, r.to_bits())]))
            .collect();
        assert!(pts.len() >= 2, "need at least two post-transition points");
        let n = pts.len() as f64;
        let mx = pts.iter().map(|(x, _)| x).sum::<f64>() / n;
        let my = pts.iter().map(|(_, y)| y).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        let syy: f64 = pts.iter().map(|(_, y)| (y - my) * (y - my)).sum();
        let r2 = sxy * sxy / (sxx * syy);
        assert!(r2 >= 0.9, "agg {agg}: linear fit R^2 = {r2:.3}");
        fits.push((agg, r2));
    }

    // The backlogged sentinel reproduces the fixed-size closed form.
    let sentinel = means[&(40, 0f64.to_bits())];
    let expected = closed_form_backlogged_goodput(4.0, 40.0) / 1e6;
    assert!((sentinel - expected).abs() / expected < 1e-3);

    println!(
        "criterion 4 PASS: agg-10 flat ({:.2}% spread, delay fraction 0 throughout); transitions agg-40 at {t40} < agg-20 at {t20}; \
         largest-ratio gap {:.2}%; agg-40 drop at 27 = {drop:.2} Mb/s (in [20, 60]); post-transition R^2 {:?}",
        flatness * 100.0,
        coincide * 100.0,
        fits.iter().map(|(a, r)| format!("agg{a}={r:.3}")).collect::<Vec<_>>()
    );
}

#[test]
fn criterion_5_invariant_suite() {
    // Conservation, throughput bound, delay-fraction range on bursty runs.
    let fig7 = make_figure_config(Figure::Fig7);
    let mut checked = 0usize;
    for ratio in [5.0, 21.0, 27.0] {
        let cfg = fig7.configure(ratio, 40, 3).unwrap();
        let out = engine::run(&cfg).unwrap();
        let m = &out.metrics;
        assert!(m.delivered_payload_bits <= m.generated_payload_bits);
        assert!(m.throughput_bps < 4.0 * 54e6);
        assert!((0.0..=1.0).contains(&m.delay_fraction));
        checked += 1;

        // Time accounting closes: window = sum of durations + sum of delays,
        // up to one truncated cycle per window boundary.
        let (t0, t1) = (cfg.warmup(), cfg.horizon_s);
        let mut durations = 0.0;
        let mut delays = 0.0;
        let mut max_cycle = 0.0f64;
        for c in out
            .cycles
            .iter()
            .filter(|c| c.tx_end_s > t0 && c.tx_end_s <= t1)
        {
            durations += c.duration_s();
            delays += c.delay_s.min(c.tx_start_s - t0).max(0.0);
            max_cycle = max_cycle.max(c.duration_s() + c.delay_s);
        }
        let gap = ((t1 - t0) - durations - delays).abs();
        assert!(
            gap <= 2.0 * max_cycle,
            "ratio {ratio}: accounting gap {gap:.6} s exceeds two boundary cycles"
        );
    }

    // Subframe 4-alignment over random payloads.
    let fc = FramingConstants::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let payload: u32 = rng.random_range(0..65_536);
        assert_eq!(fc.subframe_len(payload) % 4, 0);
    }

    // Determinism: identical spec -> byte-identical CSV.
    let mut spec = shrink(make_figure_config(Figure::Fig5), 1.0);
    spec.values = vec![0.0, 0.5];
    spec.agg_rates = vec![40];
    spec.seeds = vec![1, 2];
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    write_csv(&run_sweep(&spec, None, None).unwrap(), &mut csv_a).unwrap();
    write_csv(&run_sweep(&spec, Some(2), None).unwrap(), &mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);

    println!(
        "criterion 5 PASS: conservation/bounds on {checked} bursty runs, time accounting closes, \
         10^4 subframes 4-aligned, same-seed CSV byte-identical"
    );
}

#[test]
fn criterion_6_oracle_equivalence() {
    // select_users_fifo against a brute-force all-subsets oracle.
    let brute_force = |views: &[QueueView], m: usize, threshold: usize| -> Option<Vec<u32>> {
        let ready: Vec<&QueueView> = views.iter().filter(|v| v.queue_len >= threshold).collect();
        if ready.len() < m {
            return None;
        }
        ready
            .iter()
            .combinations(m)
            .map(|combo| {
                let mut keys: Vec<(f64, u32)> = combo
                    .iter()
                    .map(|v| (v.head_arrival_s, v.user_id))
                    .collect();
                keys.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                keys
            })
            .min_by(|a, b| {
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
                    .find(|o| *o != std::cmp::Ordering::Equal)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|keys| keys.into_iter().map(|(_, id)| id).collect())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let n_users = rng.random_range(4..=12usize);
        let views: Vec<QueueView> = (0..n_users)
            .map(|uid| QueueView {
                user_id: uid as u32,
                queue_len: rng.random_range(0..90usize),
                head_arrival_s: f64::from(rng.random_range(0..8u32)) * 1e-3,
            })
            .collect();
        assert_eq!(
            select_users_fifo(&views, 4, 40),
            brute_force(&views, 4, 40),
            "disagreement on {views:?}"
        );
    }

    // Packet-size moments at 10^6 samples, three standard errors.
    let n = 1_000_000usize;
    for &w in &[0.1, 0.25, 0.5] {
        let model = PacketSizeModel::three_point(0, 1024, w).unwrap();
        let mut sampler = SizeSampler::new(model);
        let mut r = ChaCha8Rng::seed_from_u64(1234);
        let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let x = f64::from(sampler.sample(&mut r)) / 1024.0;
            sum += x;
            sum_sq += (x - 0.5) * (x - 0.5);
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = sum_sq / nf;
        let se_mean = (w / 2.0).sqrt() / nf.sqrt();
        let se_var = ((w / 8.0 - (w / 2.0) * (w / 2.0)) / nf).sqrt();
        assert!((mean - 0.5).abs() <= 3.0 * se_mean, "w={w} mean {mean}");
        assert!((var - w / 2.0).abs() <= 3.0 * se_var, "w={w} var {var}");
    }

    // ON/OFF long-run rate across 10^3 seeds x 100 s.
    let fc = FramingConstants::default();
    let profile = TrafficProfile {
        mode: TrafficMode::OnOff,
        size_model: PacketSizeModel::fixed(0, 1024).unwrap(),
        mean_on_s: 0.010,
        mean_off_s: 0.260,
        peak_rate_bps: 54e6,
    };
    let horizon = 100.0;
    let seeds = 1000u64;
    let mut msdu_bits = 0.0f64;
    for seed in 0..seeds {
        let source: TrafficSource = profile.source(0, 10_000 + seed);
        let mut stream = source.stream(&fc);
        while let Some(p) = stream.next_arrival() {
            if p.arrival_time_s >= horizon {
                break;
            }
            msdu_bits += f64::from((p.payload_bytes + 28) * 8);
        }
    }
    let rate = msdu_bits / (horizon * seeds as f64);
    let expected = 54e6 / 27.0;
    let rel = (rate - expected).abs() / expected;
    assert!(rel < 0.05, "rate {rate:.0} vs {expected:.0} ({rel:.3})");

    println!(
        "criterion 6 PASS: scheduler matches brute force on 10^3 states; size moments within 3 SE at 10^6 samples; \
         ON/OFF rate {:.3} Mb/s vs peak/27 = {:.3} Mb/s ({:.2}% off)",
        rate / 1e6,
        expected / 1e6,
        rel * 100.0
    );
}

/// Extra guard used by the invariant suite: backlogged fixed-size runs keep
/// every cycle identical, so wasted airtime must be exactly zero.
#[test]
fn backlogged_fixed_size_wastes_nothing() {
    let spec = make_figure_config(Figure::Fig5);
    let mut cfg: SimConfig = spec.base.clone();
    cfg.horizon_s = 2.0;
    cfg.warmup_s = Some(0.2);
    cfg.traffic.size_model = PacketSizeModel::fixed(0, 1024).unwrap();
    let out = engine::run(&cfg).unwrap();
    assert_eq!(out.metrics.wasted_airtime_fraction, 0.0);
    let overhead = SoundingConfig::default().cycle_overhead(4).unwrap();
    for cycle in &out.cycles {
        assert!(cycle.duration_s() >= overhead);
    }
}
