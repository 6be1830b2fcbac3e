//! One PASS/FAIL line per acceptance criterion. Runs without the test
//! harness so the report always prints; exits non-zero if any line fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hodm_core::blockchannel::{los_block_gain, reflection_path_block_gain, BlockChannel, GainOptions};
use hodm_core::capacity::{find_instantaneous_level, waterfill};
use hodm_core::geometry::{
    build_element_channel, los_gain, path_offsets, path_reflection_coefficient, DelayIndexing, ElementChannel,
    FrameTiming, PathSet, ReflectionPath, UcaGeometry,
};
use hodm_core::modem::{
    add_cyclic_prefix, apply_channel, compensate_per_path, hodm_demodulate, hodm_modulate, ReceivedFrame, SymbolGrid,
};
use hodm_core::random::{complex_gaussian, task_rng};
use hodm_sim::{Axis, CurveArtifact, Experiment, ExperimentConfig};
use num_complex::Complex64;

const CP: usize = 4;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within(v: Verdict, start: Instant, limit: Duration) -> Verdict {
    let t = start.elapsed();
    let pass = v.pass && t < limit;
    verdict(pass, format!("{}; {:.2} s (limit {} s)", v.detail, t.as_secs_f64(), limit.as_secs()))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped(name: &str) -> ExperimentConfig {
    let text = std::fs::read_to_string(configs_dir().join(format!("{name}.toml"))).expect("shipped config");
    ExperimentConfig::from_toml(&text).expect("valid shipped config")
}

fn unit(l: i64, m: usize, nn: usize, mm: usize) -> SymbolGrid {
    let mut s = SymbolGrid::zeros(nn, mm);
    s.set(l, m, Complex64::new(1.0, 0.0));
    s
}

/// Demodulated response to a unit symbol on block (l, m), noiseless.
fn probe(ch: &ElementChannel, l: i64, m: usize) -> SymbolGrid {
    let tx = add_cyclic_prefix(&hodm_modulate(&unit(l, m, ch.num_elements(), ch.num_subcarriers())), CP).unwrap();
    hodm_demodulate(&apply_channel(ch, &tx, 0.0, 0).unwrap())
}

fn transform_identity() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (k, n) in [4usize, 8, 16].into_iter().enumerate() {
        for i in 0..100u64 {
            let mut rng = task_rng(11, (k as u64) << 32 | i);
            let s = SymbolGrid::from_fn(n, n, |_, _| complex_gaussian(&mut rng, 1.0));
            let x = hodm_modulate(&s);
            let rx = ReceivedFrame::new(x.num_elements(), x.body_len(), x.body_samples(), 0.0).unwrap();
            let back = hodm_demodulate(&rx);
            for (a, b) in s.values().iter().zip(back.values()) {
                worst = worst.max((a - b).norm());
            }
        }
    }
    within(
        verdict(worst < 1e-10, format!("max |error| {worst:.2e} over 300 grids (tol 1e-10)")),
        start,
        Duration::from_secs(1),
    )
}

/// (1/N) Σ_v Σ_n h_{v,n} e^{jl(φ_n − φ_v)} straight from the element gains.
fn los_double_sum(g: &UcaGeometry, l: i64, lam: f64) -> Complex64 {
    let nn = g.num_elements();
    let phi = |i: usize| 2.0 * PI * i as f64 / nn as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for v in 0..nn {
        for n in 0..nn {
            acc += los_gain(g, v, n, lam) * Complex64::from_polar(1.0, l as f64 * (phi(n) - phi(v)));
        }
    }
    acc / nn as f64
}

fn los_oracle() -> Verdict {
    let start = Instant::now();
    let t = FrameTiming::new(8, 60e9, 5e6, CP).unwrap();
    let opts = GainOptions::default();
    let errors = |r: f64, d: f64, nn: usize| -> Vec<f64> {
        let g = UcaGeometry::new(nn, r, r, d, 1.0).unwrap();
        let mut out = Vec::new();
        for l in -3i64..=3 {
            for m in [0, 4, 7] {
                let lam = t.wavelength(m);
                let sum = los_double_sum(&g, l, lam);
                out.push((los_block_gain(&g, l, lam, opts).unwrap() - sum).norm() / sum.norm());
            }
        }
        out
    };
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    // default array: the finite-N error is already at rounding level
    let small = errors(0.05, 3.0, 64);
    // wide array, large Bessel argument: the truncation error is visible,
    // so convergence in N can be checked block by block
    let (wide64, wide128) = (errors(0.38, 4.0, 64), errors(0.38, 4.0, 128));
    let shrinks = wide64.iter().zip(&wide128).all(|(a, b)| b < a);
    let worst = max(&small).max(max(&wide64));
    within(
        verdict(
            worst < 0.02 && shrinks,
            format!(
                "max rel error at N=64 {:.2e} (r=0.05 m, D=3 m) and {:.2e} (r=0.38 m, D=4 m), tol 2e-2; \
                 error(128) < error(64) on all 21 blocks of the wide array: {shrinks} (max {:.2e})",
                max(&small),
                max(&wide64),
                max(&wide128)
            ),
        ),
        start,
        Duration::from_secs(10),
    )
}

fn pipeline_oracle() -> Verdict {
    let start = Instant::now();
    let nn = 64;
    let g = UcaGeometry::new(nn, 0.05, 0.05, 3.0, 1.0).unwrap();
    let t = FrameTiming::new(32, 60e9, 50e6, CP).unwrap();
    let d = 0.5;
    let ps = PathSet {
        include_los: true,
        reflections: (1..=3).map(|k| ReflectionPath::uniform(k, d, 15.0).unwrap()).collect(),
    };
    let raw = build_element_channel(&g, &ps, &t, DelayIndexing::Literal).unwrap();
    let ch = compensate_per_path(&raw, &g, d, &t);
    let blocks = BlockChannel::compute(&g, &ps, &t, DelayIndexing::Literal, GainOptions::default()).unwrap();
    let mut worst = 0.0f64;
    for l in -3i64..=3 {
        for m in 0..32 {
            let want = blocks.gain(l, m);
            let got = probe(&ch, l, m).get(l, m);
            worst = worst.max((got - want).norm() / want.norm());
        }
    }
    within(
        verdict(
            worst < 0.03,
            format!("max rel error {worst:.2e} over l in -3..3, all 32 subcarriers, N=64 (tol 3e-2)"),
        ),
        start,
        Duration::from_secs(30),
    )
}

fn leakage(ch: &ElementChannel, blocks: &[(i64, usize)]) -> f64 {
    let (mut on, mut total) = (0.0, 0.0);
    for &(l, m) in blocks {
        let y = probe(ch, l, m);
        on += y.get(l, m).norm_sqr();
        total += y.energy();
    }
    (total - on) / total
}

fn compensation() -> Verdict {
    let nn = 64;
    let g = UcaGeometry::new(nn, 0.05, 0.05, 3.0, 1.0).unwrap();
    let t = FrameTiming::new(8, 60e9, 5e6, CP).unwrap();
    let ps = PathSet { include_los: false, reflections: vec![ReflectionPath::new(vec![0.5], vec![15.0]).unwrap()] };
    let raw = build_element_channel(&g, &ps, &t, DelayIndexing::Literal).unwrap();
    let blocks: Vec<(i64, usize)> = (-4..=4).flat_map(|l| (0..8).map(move |m| (l, m))).collect();
    let before = leakage(&raw, &blocks);
    let after = leakage(&compensate_per_path(&raw, &g, 0.5, &t), &blocks);
    verdict(
        before > 0.05 && after < 0.01,
        format!(
            "off-block energy {:.2}% uncompensated (need > 5%), {:.2e}% compensated (need < 1%)",
            100.0 * before,
            100.0 * after
        ),
    )
}

fn snr_loss_anchor() -> Verdict {
    let start = Instant::now();
    let mut cfg = shipped("snr-loss");
    cfg.sweep_values = vec![10.0];
    cfg.series_values = vec![0.01, 0.5];
    assert!(cfg.mc_draws >= 10_000);
    let a = Experiment::SnrLoss.run(&cfg).unwrap();
    let small = a.points("rho=0.01")[0];
    let large = a.points("rho=0.5")[0];
    let ok = (large.1 - 6.7).abs() <= 0.5 && (small.1 - 0.7).abs() <= 0.5;
    within(
        verdict(
            ok,
            format!(
                "at 10 dB, {} draws: rho=0.5 -> {:.3} dB (target 6.7 +/- 0.5), rho=0.01 -> {:.4} dB (target 0.7 +/- 0.5)",
                cfg.mc_draws, large.1, small.1
            ),
        ),
        start,
        Duration::from_secs(30),
    )
}

/// Best capacity over every active set: a set S forces the common level
/// (P + Σ_S σ²/g)/|S|; among the feasible ones the best is the optimum.
fn exhaustive(inv: &[f64], budget: f64) -> f64 {
    let n = inv.len();
    let mut best = 0.0f64;
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let level = (budget + members.iter().map(|&i| inv[i]).sum::<f64>()) / members.len() as f64;
        if members.iter().any(|&i| level < inv[i]) {
            continue;
        }
        best = best.max(members.iter().map(|&i| (level / inv[i]).log2()).sum());
    }
    best
}

fn waterfilling() -> Verdict {
    let start = Instant::now();
    let (mut cap_err, mut kkt_err) = (0.0f64, 0.0f64);
    let mut count = 0;
    for n in 1..=8usize {
        for i in 0..50u64 {
            let mut rng = task_rng(23, (n as u64) << 32 | i);
            let h: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let s2: Vec<f64> = (0..n).map(|_| 0.1 + complex_gaussian(&mut rng, 1.0).norm_sqr()).collect();
            let budget = 0.05 + 5.0 * complex_gaussian(&mut rng, 1.0).norm_sqr();
            let level = find_instantaneous_level(&h, &s2, budget).unwrap();
            let a = waterfill(&h, &s2, level).unwrap();
            let inv: Vec<f64> = h.iter().zip(&s2).map(|(h, s)| s / h.norm_sqr()).collect();
            cap_err = cap_err.max((a.capacity - exhaustive(&inv, budget)).abs());
            kkt_err = kkt_err.max((a.powers.iter().sum::<f64>() - budget).abs() / budget);
            for (p, iv) in a.powers.iter().zip(&inv) {
                let k = if *p > 0.0 { (iv + p - level).abs() } else { (level - iv).max(0.0) };
                kkt_err = kkt_err.max(k / level);
            }
            count += 1;
        }
    }
    within(
        verdict(
            cap_err < 1e-6 && kkt_err < 1e-9,
            format!("{count} instances of 1..8 blocks: max |C - C_exhaustive| {cap_err:.2e} bits (tol 1e-6), max KKT residual {kkt_err:.2e} (tol 1e-9)"),
        ),
        start,
        Duration::from_secs(10),
    )
}

/// Points whose successive differences exceed three combined standard
/// errors.
fn rises(points: &[(f64, f64, f64)]) -> bool {
    points.windows(2).all(|w| w[1].1 - w[0].1 > 3.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt())
}

fn capacity_at(cfg: &ExperimentConfig) -> Vec<(f64, f64, f64)> {
    let a = Experiment::Capacity.run(cfg).unwrap();
    a.points(a.series()[0])
}

/// Capacity at each SNR as `vary` moves through `values`; true if it rises
/// by more than 3σ at every step and every SNR.
fn monotone_in(base: &ExperimentConfig, values: &[f64], vary: impl Fn(&mut ExperimentConfig, f64)) -> bool {
    let curves: Vec<Vec<(f64, f64, f64)>> = values
        .iter()
        .map(|&v| {
            let mut c = base.clone();
            c.series_axis = None;
            c.series_values.clear();
            vary(&mut c, v);
            capacity_at(&c)
        })
        .collect();
    (0..curves[0].len()).all(|i| rises(&curves.iter().map(|c| c[i]).collect::<Vec<_>>()))
}

fn orderings() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, pass: bool| {
        ok &= pass;
        parts.push(format!("{name} {}", if pass { "ok" } else { "FAILED" }));
    };

    // LoS above every reflection across the distance sweep
    let d = Experiment::GainVsDistance.run(&shipped("gain-vs-distance")).unwrap();
    let los = d.points("los");
    let refl = d.series().into_iter().filter(|s| *s != "los" && *s != "total").collect::<Vec<_>>();
    check("LoS > reflections at every D", refl.iter().all(|s| los.iter().zip(d.points(s)).all(|(l, r)| l.1 > r.1)));

    // each path's block gain scales with N
    let cfg = shipped("gain-vs-modes");
    let mut worst = 0.0f64;
    let gains = |nn: usize| {
        let mut c = cfg.clone();
        c.num_elements = nn;
        c.total_paths = 13;
        let g = c.geometry().unwrap();
        let t = c.timing().unwrap();
        let ps = c.paths().unwrap();
        let lam = t.wavelength(c.subcarrier);
        let opts = GainOptions { include_4pi: c.include_4pi };
        let offs = path_offsets(&g, &ps, &t, c.indexing());
        let mut out = vec![los_block_gain(&g, c.mode, lam, opts).unwrap().norm()];
        for (i, p) in ps.reflections.iter().enumerate() {
            let r = path_reflection_coefficient(&g, p).unwrap();
            out.push(
                reflection_path_block_gain(&g, p, r, c.mode, c.subcarrier, c.num_subcarriers, lam, offs[i], opts)
                    .unwrap()
                    .norm(),
            );
        }
        out
    };
    for (a, b) in gains(8).iter().zip(gains(16)) {
        worst = worst.max((b / a / 2.0 - 1.0).abs());
    }
    check(&format!("per-path |h|(N=16)/|h|(N=8) within {:.1e} of 2", worst), worst < 0.01);

    // more paths, more gain on the configured low mode
    let m = Experiment::GainVsModes.run(&cfg).unwrap();
    let series = m.series();
    let gain_paths =
        (0..cfg.sweep_values.len()).all(|i| series.windows(2).all(|w| m.points(w[1])[i].1 >= m.points(w[0])[i].1));
    check(&format!("|h| mode {} rises with L_p {:?}", cfg.mode, cfg.series_values), gain_paths);

    let cap = shipped("capacity");
    check(
        "C rises with N = M",
        monotone_in(&cap, &[8.0, 16.0, 32.0], |c, v| {
            c.num_elements = v as usize;
            c.num_subcarriers = v as usize;
        }),
    );
    let base16 = shipped("capacity-paths");
    check("C rises with N at M = 16", monotone_in(&base16, &[8.0, 16.0, 32.0], |c, v| c.num_elements = v as usize));
    check("C rises with M at N = 16", monotone_in(&base16, &[8.0, 16.0, 32.0], |c, v| c.num_subcarriers = v as usize));
    check("C rises with L_p", monotone_in(&base16, &[1.0, 4.0, 7.0, 10.0], |c, v| c.total_paths = v as usize));

    // HODM above OFDM at N = M = 16, every SNR, 3σ
    let mut cmp = shipped("capacity-compare");
    cmp.series_axis = Some(Axis::Subcarriers);
    cmp.series_values = vec![16.0];
    let a = Experiment::CapacityCompare.run(&cmp).unwrap();
    let hodm = a.points("hodm subcarriers=16");
    let ofdm = a.points("ofdm subcarriers=16");
    let snrs: Vec<f64> = hodm.iter().map(|p| p.0).collect();
    let above = snrs == [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
        && hodm.iter().zip(&ofdm).all(|(h, o)| h.1 - o.1 > 3.0 * (h.2.powi(2) + o.2.powi(2)).sqrt());
    check("C_HODM > C_OFDM at 0..30 dB", above);

    within(verdict(ok, parts.join("; ")), start, Duration::from_secs(120))
}

/// Every shipped config through the binary, keyed by file stem.
fn run_suite(out: &Path, threads: &str) -> Vec<(String, Vec<u8>)> {
    let mut names: Vec<String> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|stem| {
            let sub = stem.strip_suffix("-paths").unwrap_or(&stem).to_string();
            let dir = out.join(&stem);
            let status = Command::new(env!("CARGO_BIN_EXE_hodm-sim"))
                .args([sub.as_str(), "--config"])
                .arg(configs_dir().join(format!("{stem}.toml")))
                .arg("--out")
                .arg(&dir)
                .args(["--seed", "42", "--threads", threads])
                .output()
                .unwrap();
            assert!(status.status.success(), "{stem}: {}", String::from_utf8_lossy(&status.stderr));
            let file = dir.join(format!("{sub}.csv"));
            CurveArtifact::read(&file).unwrap();
            (stem, std::fs::read(file).unwrap())
        })
        .collect()
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let one = run_suite(&tmp.path().join("a"), "1");
    let four = run_suite(&tmp.path().join("b"), "4");
    let again = run_suite(&tmp.path().join("c"), "4");
    let differ: Vec<&str> = one
        .iter()
        .zip(&four)
        .zip(&again)
        .filter(|((a, b), c)| a.1 != b.1 || b.1 != c.1)
        .map(|((a, _), _)| a.0.as_str())
        .collect();
    verdict(
        differ.is_empty() && one.len() == 9,
        format!("{} CSVs byte-identical across --threads 1, 4, 4 with --seed 42; differing: {differ:?}", one.len()),
    )
}

fn main() {
    let checks: [(&str, fn() -> Verdict); 8] = [
        ("transform identity", transform_identity),
        ("LoS closed form vs double sum", los_oracle),
        ("reflection closed form vs pipeline", pipeline_oracle),
        ("compensation efficacy", compensation),
        ("SNR loss anchor", snr_loss_anchor),
        ("water-filling optimality", waterfilling),
        ("ordering claims", orderings),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in checks.iter().enumerate() {
        let v = f();
        if !v.pass {
            failed += 1;
        }
        println!("criterion {} {name}: {} - {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("{} of {} criteria pass", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
