//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p permstat --test acceptance`.

use std::process::Command;
use std::time::Instant;

use permstat::bench::{run_experiment, summarize, ExperimentConfig, ExperimentRecord};
use permstat::cross::cross_ed_test;
use permstat::matrix::euclidean_distance_matrix;
use permstat::perm::{
    efficient_perm_test, permutation_indexes, precomputed_perm_test, standard_perm_test,
    standard_permuted_matrices, BaseMatrices, PermutationStream, ScriptedDraws, YxStorage,
};
use permstat::statistic::{energy_statistic, mmd_biased_statistic};
use permstat::{DataMatrix, PairwiseMatrix, StatisticKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DataMatrix {
    let v = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
    DataMatrix::new(n, p, v).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut entries = 0usize;
    for instance in 0..200 {
        let n_x = rng.random_range(2..=12);
        let n_y = rng.random_range(2..=12);
        let p = rng.random_range(1..=4);
        let b = rng.random_range(1..=50);
        let x = random_matrix(&mut rng, n_x, p);
        let y = random_matrix(&mut rng, n_y, p);
        let stream = PermutationStream::new(instance);
        for kind in [StatisticKind::EnergyDistance, StatisticKind::MmdBiasedSquared] {
            let s = standard_perm_test(&x, &y, b, &stream, kind, None).map_err(|e| e.to_string())?;
            let pc = precomputed_perm_test(&x, &y, b, &stream, kind, None).map_err(|e| e.to_string())?;
            let e = efficient_perm_test(&x, &y, b, &stream, kind, None).map_err(|e| e.to_string())?;
            for other in [&pc, &e] {
                worst = worst.max(rel_err(s.observed, other.observed));
                for (u, v) in s.null_sample.iter().zip(&other.null_sample) {
                    worst = worst.max(rel_err(*u, *v));
                    entries += 1;
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        worst <= 1e-10 && secs < 60.0,
        format!("{entries} null entries compared, max relative error {worst:.2e}, {secs:.2}s"),
    )
}

/// Position of each reconstructed row within the standard back-end's row order.
fn reorder(
    reconstructed: &PairwiseMatrix,
    standard: &PairwiseMatrix,
    rows: &[usize],
    cols: &[usize],
) -> bool {
    (0..rows.len()).all(|a| (0..cols.len()).all(|c| reconstructed.get(a, c) == standard.get(rows[a], cols[c])))
}

fn golden_indexes() -> Outcome {
    let (n_x, n_y) = (5, 4);
    let draws = ScriptedDraws::one_based(&[&[7, 4, 5, 6, 2]]);
    let set = permutation_indexes(n_x, n_y, &draws, 0).map_err(|e| e.to_string())?;
    let one = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<_>>();
    let range1 = |r: std::ops::Range<usize>| (r.start + 1..r.end + 1).collect::<Vec<_>>();
    let mut problems = Vec::new();
    let expect = [
        ("i1", one(&set.i1), vec![4, 5, 2]),
        ("i2", one(&set.i2), vec![2, 1]),
        ("j1", one(&set.j1), vec![1, 3]),
        ("j2", one(&set.j2), vec![3, 4]),
        ("i1 dest", range1(set.i1_dest()), vec![1, 2, 3]),
        ("i2 dest", range1(set.i2_dest()), vec![4, 5]),
        ("j1 dest", range1(set.j1_dest()), vec![1, 2]),
        ("j2 dest", range1(set.j2_dest()), vec![3, 4]),
    ];
    for (name, got, want) in &expect {
        if got != want {
            problems.push(format!("{name} = {got:?}, expected {want:?}"));
        }
    }

    // pooled row order of the reconstructed groups versus the standard draw order
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_matrix(&mut rng, n_x, 3);
    let y = random_matrix(&mut rng, n_y, 3);
    let p1: Vec<usize> = vec![6, 3, 4, 5, 1];
    let p2: Vec<usize> = vec![0, 2, 7, 8];
    let eff_x: Vec<usize> = set.i1.iter().copied().chain(set.i2.iter().map(|k| k + n_x)).collect();
    let eff_y: Vec<usize> = set.j1.iter().copied().chain(set.j2.iter().map(|k| k + n_x)).collect();
    let pos = |order: &[usize], pooled: &[usize]| -> Vec<usize> {
        pooled.iter().map(|r| order.iter().position(|o| o == r).unwrap()).collect()
    };
    let (rx, ry) = (pos(&p1, &eff_x), pos(&p2, &eff_y));

    let mut worst = 0.0f64;
    for kind in [StatisticKind::EnergyDistance, StatisticKind::MmdBiasedSquared] {
        let std_m = standard_permuted_matrices(&x, &y, &p1, kind, Some(1.3)).map_err(|e| e.to_string())?;
        let base = match kind {
            StatisticKind::EnergyDistance => BaseMatrices::new(
                euclidean_distance_matrix(&x, &x).unwrap(),
                euclidean_distance_matrix(&y, &y).unwrap(),
                euclidean_distance_matrix(&x, &y).unwrap(),
                YxStorage::Transposed,
            ),
            StatisticKind::MmdBiasedSquared => {
                let k = |a: &DataMatrix, b: &DataMatrix| permstat::matrix::gaussian_kernel_matrix(a, b, 1.3).unwrap();
                BaseMatrices::new(k(&x, &x), k(&y, &y), k(&x, &y), YxStorage::Transposed)
            }
        }
        .map_err(|e| e.to_string())?;
        let eff_m = base.reconstruct(&set);
        let name = kind.short_name();
        if !reorder(&eff_m.xx, &std_m.xx, &rx, &rx) {
            problems.push(format!("{name}: X*X* block mismatch"));
        }
        if !reorder(&eff_m.yy, &std_m.yy, &ry, &ry) {
            problems.push(format!("{name}: Y*Y* block mismatch"));
        }
        if !reorder(&eff_m.xy, &std_m.xy, &rx, &ry) {
            problems.push(format!("{name}: X*Y* block mismatch"));
        }
        let s = std_m.statistic(kind);
        let e = eff_m.statistic(kind);
        worst = worst.max((s - e).abs());
    }
    if worst > 1e-12 {
        problems.push(format!("statistic differs by {worst:.2e}"));
    }
    if problems.is_empty() {
        Ok(format!("index sets and destinations exact, matrices match, |ED* diff| = {worst:.1e}"))
    } else {
        Err(problems.join("; "))
    }
}

fn records_for(recs: &[ExperimentRecord], backend: &str) -> Vec<f64> {
    recs.iter().filter(|r| r.backend.name() == backend).map(|r| r.p_value).collect()
}

fn null_calibration() -> Outcome {
    let cfg = ExperimentConfig::parse(
        r#"{"kind": "NullCalibration", "grid": [{"n_x": 50, "n_y": 50, "p": 10}],
            "b": 200, "replications": 500, "backends": ["efficient", "cross_ed"],
            "seed": 20240601, "alpha": 0.05}"#,
    )
    .map_err(|e| e.to_string())?;
    let recs = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for backend in ["efficient", "cross_ed"] {
        let ps = records_for(&recs, backend);
        let rate = ps.iter().filter(|&&p| p <= 0.05).count() as f64 / ps.len() as f64;
        let mut bins = [0usize; 10];
        for p in &ps {
            bins[((p * 10.0).ceil() as usize).clamp(1, 10) - 1] += 1;
        }
        let bins_ok = bins.iter().all(|&c| (20..=80).contains(&c));
        ok &= (0.02..=0.09).contains(&rate) && bins_ok;
        parts.push(format!("{backend}: rate {rate:.3}, deciles {bins:?}"));
    }
    check(ok, parts.join("; "))
}

fn power_ordering() -> Outcome {
    let cfg = ExperimentConfig::parse(
        r#"{"kind": "PowerCurve", "grid": [{"n_x": 100, "n_y": 100, "p": 50, "j": 5, "epsilon": 0.4}],
            "b": 200, "replications": 200, "backends": ["efficient", "cross_ed"],
            "seed": 7, "alpha": 0.05}"#,
    )
    .map_err(|e| e.to_string())?;
    let recs = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let rows = summarize(&recs, cfg.alpha).map_err(|e| e.to_string())?;
    let perm = rows.iter().find(|r| r.backend.name() == "efficient").unwrap().power;
    let cross = rows.iter().find(|r| r.backend.name() == "cross_ed").unwrap().power;
    check(
        perm - cross >= -0.03 && perm >= 0.5,
        format!("permutation power {perm:.3}, cross power {cross:.3}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time_it<T>(repeats: usize, mut f: impl FnMut() -> T) -> Vec<f64> {
    (0..repeats)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(f());
            t.elapsed().as_secs_f64()
        })
        .collect()
}

fn timing_ordering() -> Outcome {
    let x = permstat::data::sample_gaussian(200, 500, None, 1).unwrap();
    let y = permstat::data::sample_gaussian(200, 500, None, 2).unwrap();
    let stream = PermutationStream::new(3);
    let ed = StatisticKind::EnergyDistance;
    let b = 200;
    let efficient = median(time_it(5, || efficient_perm_test(&x, &y, b, &stream, ed, None).unwrap()));
    let precomputed = median(time_it(5, || precomputed_perm_test(&x, &y, b, &stream, ed, None).unwrap()));
    let standard = median(time_it(1, || standard_perm_test(&x, &y, b, &stream, ed, None).unwrap()));
    let cross = median(time_it(5, || cross_ed_test(&x, &y).unwrap()));
    check(
        efficient <= 0.25 * standard && efficient <= 1.1 * precomputed && cross <= efficient,
        format!(
            "standard {standard:.3}s, precomputed {precomputed:.3}s, efficient {efficient:.3}s, cross {cross:.4}s \
             (efficient/standard {:.3}, efficient/precomputed {:.3})",
            efficient / standard,
            efficient / precomputed
        ),
    )
}

fn scaling_shapes() -> Outcome {
    let t = |n: usize, p: usize| {
        let x = permstat::data::sample_gaussian(n, p, None, n as u64 + p as u64).unwrap();
        let times = time_it(5, || euclidean_distance_matrix(&x, &x).unwrap());
        times.into_iter().fold(f64::INFINITY, f64::min)
    };
    let n_ratio = t(400, 200) / t(200, 200);
    let p_ratio = t(300, 800) / t(300, 400);
    check(
        (2.5..=6.0).contains(&n_ratio) && (1.4..=3.0).contains(&p_ratio),
        format!("doubling n: x{n_ratio:.2}, doubling p: x{p_ratio:.2}"),
    )
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]) * (a[k] - b[k]);
    }
    s.sqrt()
}

fn brute_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut w_ed, mut w_mmd, mut w_x, mut w_xs) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let p = rng.random_range(1..=4);
        let (n_x, n_y) = (rng.random_range(4..=10), rng.random_range(4..=10));
        let x = random_matrix(&mut rng, n_x, p);
        let y = random_matrix(&mut rng, n_y, p);
        let bw = rng.random_range(0.3..3.0);
        let k = |a: &[f64], b: &[f64]| (-dist(a, b) * dist(a, b) / (2.0 * bw * bw)).exp();

        // energy distance and biased MMD^2 by explicit double loops
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        let (mut kxy, mut kxx, mut kyy) = (0.0, 0.0, 0.0);
        for i in 0..n_x {
            for j in 0..n_y {
                sxy += dist(x.row(i), y.row(j));
                kxy += k(x.row(i), y.row(j));
            }
            for i2 in 0..n_x {
                sxx += dist(x.row(i), x.row(i2));
                kxx += k(x.row(i), x.row(i2));
            }
        }
        for j in 0..n_y {
            for j2 in 0..n_y {
                syy += dist(y.row(j), y.row(j2));
                kyy += k(y.row(j), y.row(j2));
            }
        }
        let (nx, ny) = (n_x as f64, n_y as f64);
        let ed_brute = 2.0 * sxy / (nx * ny) - sxx / (nx * nx) - syy / (ny * ny);
        let mmd_brute = kxx / (nx * nx) + kyy / (ny * ny) - 2.0 * kxy / (nx * ny);

        let d = |a: &DataMatrix, b: &DataMatrix| euclidean_distance_matrix(a, b).unwrap();
        let ed = energy_statistic(&d(&x, &y), &d(&x, &x), &d(&y, &y)).unwrap();
        let g = |a: &DataMatrix, b: &DataMatrix| permstat::matrix::gaussian_kernel_matrix(a, b, bw).unwrap();
        let mmd = mmd_biased_statistic(&g(&x, &x), &g(&y, &y), &g(&x, &y)).unwrap();
        w_ed = w_ed.max(rel_err(ed, ed_brute));
        w_mmd = w_mmd.max(rel_err(mmd, mmd_brute));

        // cross-ED: average of the four-sample kernel over all index tuples
        let (nx1, ny1) = (n_x / 2, n_y / 2);
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..nx1 {
            for i2 in nx1..n_x {
                for j in 0..ny1 {
                    for j2 in ny1..n_y {
                        let (a, a2, c, c2) = (x.row(i), x.row(i2), y.row(j), y.row(j2));
                        total += dist(a, c2) - dist(a, a2) - dist(c, c2) + dist(c, a2);
                        count += 1;
                    }
                }
            }
        }
        let u_brute = total / count as f64;
        let r = cross_ed_test(&x, &y).map_err(|e| e.to_string())?;
        w_x = w_x.max(rel_err(r.u_hat, u_brute));

        // studentizing scale from per-row averages
        let mut u_x = 0.0;
        for i in 0..nx1 {
            for j in ny1..n_y {
                u_x += dist(x.row(i), y.row(j)) / (nx1 * (n_y - ny1)) as f64;
            }
            for i2 in nx1..n_x {
                u_x -= dist(x.row(i), x.row(i2)) / (nx1 * (n_x - nx1)) as f64;
            }
        }
        let mut u_y = 0.0;
        for j in 0..ny1 {
            for j2 in ny1..n_y {
                u_y += dist(y.row(j), y.row(j2)) / (ny1 * (n_y - ny1)) as f64;
            }
            for i2 in nx1..n_x {
                u_y -= dist(y.row(j), x.row(i2)) / (ny1 * (n_x - nx1)) as f64;
            }
        }
        let mut sx = 0.0;
        for i in 0..nx1 {
            let plus: f64 = (ny1..n_y).map(|j2| dist(x.row(i), y.row(j2))).sum::<f64>() / (n_y - ny1) as f64;
            let minus: f64 = (nx1..n_x).map(|i2| dist(x.row(i), x.row(i2))).sum::<f64>() / (n_x - nx1) as f64;
            sx += (plus - minus - u_x).powi(2);
        }
        sx /= nx1 as f64;
        let mut sy = 0.0;
        for j in 0..ny1 {
            let plus: f64 = (ny1..n_y).map(|j2| dist(y.row(j), y.row(j2))).sum::<f64>() / (n_y - ny1) as f64;
            let minus: f64 = (nx1..n_x).map(|i2| dist(y.row(j), x.row(i2))).sum::<f64>() / (n_x - nx1) as f64;
            sy += (plus - minus - u_y).powi(2);
        }
        sy /= ny1 as f64;
        let sigma_brute = (sx / nx1 as f64 + sy / ny1 as f64).sqrt();
        w_xs = w_xs.max(rel_err(r.sigma_hat, sigma_brute));

    }
    check(
        w_ed <= 1e-10 && w_mmd <= 1e-10 && w_x <= 1e-10 && w_xs <= 1e-10,
        format!(
            "50 instances: max rel err ED {w_ed:.1e}, MMD {w_mmd:.1e}, cross-ED {w_x:.1e} (scale {w_xs:.1e})"
        ),
    )
}

fn cli_determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_permstat");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |args: &[&str], threads: &str| -> Result<String, String> {
        let o = Command::new(exe)
            .args(args)
            .args(["--threads", threads])
            .current_dir(dir.path())
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)));
        }
        Ok(String::from_utf8_lossy(&o.stdout).into_owned())
    };
    run(&["simulate", "--n", "40", "--p", "6", "--j", "2", "--epsilon", "0.3", "--seed", "8", "--out", "x.csv", "y.csv"], "1")?;
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"kind": "PowerCurve", "grid": [{"n_x": 20, "n_y": 20, "p": 4, "j": 1, "epsilon": 0.5}],
            "b": 49, "replications": 8, "backends": ["standard", "precomputed", "efficient", "cross_ed"],
            "seed": 2, "alpha": 0.05}"#,
    )
    .map_err(|e| e.to_string())?;

    // wall-clock fields are the only non-numeric-output lines that may differ
    let strip_report = |s: String| {
        s.lines()
            .filter(|l| !l.starts_with("elapsed_s"))
            .map(|l| {
                serde_json::from_str::<serde_json::Value>(l)
                    .ok()
                    .and_then(|mut v| {
                        v.as_object_mut()?.remove("elapsed_s");
                        Some(v.to_string())
                    })
                    .unwrap_or_else(|| l.to_string())
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let strip_records = |path: &std::path::Path| -> Result<String, String> {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        Ok(text
            .lines()
            .map(|l| {
                let cells: Vec<&str> = l.split(',').collect();
                [&cells[..9], &cells[10..]].concat().join(",")
            })
            .collect::<Vec<_>>()
            .join("\n"))
    };

    let commands: Vec<Vec<&str>> = vec![
        vec!["test", "x.csv", "y.csv", "--seed", "5"],
        vec!["test", "x.csv", "y.csv", "--seed", "5", "--backend", "standard", "--statistic", "mmd", "--json"],
        vec!["test", "x.csv", "y.csv", "--seed", "5", "--backend", "precomputed", "-b", "99"],
        vec!["test", "x.csv", "y.csv", "--backend", "cross", "--statistic", "mmd"],
    ];
    let mut compared = 0;
    for cmd in &commands {
        let base = strip_report(run(cmd, "1")?);
        for t in ["2", "4"] {
            if strip_report(run(cmd, t)?) != base {
                return Err(format!("{cmd:?} output differs with --threads {t}"));
            }
            compared += 1;
        }
    }
    let mut base = None;
    for t in ["1", "2", "4"] {
        let out = format!("rec{t}.csv");
        run(&["bench", "--config", "cfg.json", "--out", &out], t)?;
        let recs = strip_records(&dir.path().join(&out))?;
        match &base {
            None => base = Some(recs),
            Some(b) if *b != recs => return Err(format!("bench records differ with --threads {t}")),
            Some(_) => compared += 1,
        }
    }
    Ok(format!("{compared} repeated invocations byte-identical apart from elapsed time"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 back-end equivalence", equivalence),
        ("2 golden index sets and reconstruction", golden_indexes),
        ("3 null calibration", null_calibration),
        ("4 power ordering", power_ordering),
        ("5 timing ordering", timing_ordering),
        ("6 scaling shapes", scaling_shapes),
        ("7 brute-force statistic oracles", brute_oracles),
        ("8 CLI determinism across thread counts", cli_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let started = Instant::now();
        let outcome = f();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
