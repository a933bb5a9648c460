//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use uepmm::cli::run;
use uepmm::output::{read_csv, Record};
use uepmm::{run_analytic, run_monte_carlo, ExperimentConfig};
use uepmm_core::coding::{encode, Family, UepCode, WindowDistribution};
use uepmm_core::decoding::decodable_set;
use uepmm_core::galois::{Field, FieldSpec};
use uepmm_core::importance::ClassMap;
use uepmm_core::synth::{gen_gradient_like, sparsity, SparseGaussianSpec};
use uepmm_core::tensor::{assemble, loss, multiply_all, split, BlockPartition};
use uepmm_core::Matrix;

type Check = Result<String, String>;
type Named = (&'static str, fn() -> Check);

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn cli_records(args: &[&str]) -> Result<Vec<Record>, String> {
    cli_bytes(args).and_then(|b| read_csv(b.as_slice()).map_err(|e| e.to_string()))
}

fn cli_bytes(args: &[&str]) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let mut full = vec!["uepmm"];
    full.extend_from_slice(args);
    match run(full, &mut out) {
        0 => Ok(out),
        code => Err(format!("uepmm {args:?} exited with {code}")),
    }
}

fn lookup(recs: &[Record], t: f64, metric: &str) -> Result<f64, String> {
    recs.iter()
        .find(|r| (r.t - t).abs() < 1e-9 && r.metric == metric)
        .map(|r| r.value)
        .ok_or_else(|| format!("no {metric} at t={t}"))
}

/// Compare `(t, metric, expected)` triples within `tol`.
fn expect(recs: &[Record], points: &[(f64, &str, f64)], tol: f64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for &(t, metric, want) in points {
        let got = lookup(recs, t, metric)?;
        let err = (got - want).abs();
        if err > tol {
            return Err(format!("{metric} at {t}: got {got}, want {want} (tol {tol})"));
        }
        worst = worst.max(err);
    }
    Ok(worst)
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() > limit_s {
        Err(format!("took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64()))
    } else {
        Ok(())
    }
}

fn now_decode_probabilities() -> Check {
    let start = Instant::now();
    let path = config("three_tier_rxc.json");
    let recs = cli_records(&["analyze", "decode-prob", "--config", path.to_str().unwrap()])?;
    let worst = expect(
        &recs,
        &[
            (3.0, "decode_prob_class_1", 0.064),
            (3.0, "decode_prob_class_2", 0.042875),
            (3.0, "decode_prob_class_3", 0.015625),
            (4.0, "decode_prob_class_1", 0.1792),
        ],
        1e-9,
    )?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("max error {worst:.1e} in {:.3} s", start.elapsed().as_secs_f64()))
}

fn ew_decode_probabilities() -> Check {
    let start = Instant::now();
    let path = config("three_tier_rxc_ew.json");
    let recs = cli_records(&["analyze", "decode-prob", "--config", path.to_str().unwrap()])?;
    let exact = expect(
        &recs,
        &[(3.0, "decode_prob_class_1", 0.064), (9.0, "decode_prob_class_1", 1.0), (8.0, "decode_prob_class_3", 0.0)],
        1e-9,
    )?;
    let approx = expect(&recs, &[(6.0, "decode_prob_class_2", 0.10534)], 1e-3)?;
    within(start.elapsed(), 30.0)?;
    Ok(format!("errors {exact:.1e} / {approx:.1e} in {:.2} s", start.elapsed().as_secs_f64()))
}

fn analytic_rxc_curves() -> Check {
    let start = Instant::now();
    let now = cli_records(&["analyze", "loss", "--config", config("three_tier_rxc.json").to_str().unwrap()])?;
    let ew = cli_records(&["analyze", "loss", "--config", config("three_tier_rxc_ew.json").to_str().unwrap()])?;
    let a = expect(&now, &[(0.45, "normalized_loss", 0.171875), (1.05, "normalized_loss", 0.008275)], 1e-3)?;
    let b = expect(&ew, &[(0.825, "normalized_loss", 0.000905)], 1e-3)?;
    within(start.elapsed(), 5.0)?;
    Ok(format!("max error {:.1e} in {:.2} s", a.max(b), start.elapsed().as_secs_f64()))
}

fn mds_baseline() -> Check {
    let recs = cli_records(&["analyze", "loss", "--config", config("three_tier_rxc_mds.json").to_str().unwrap()])?;
    let worst = expect(&recs, &[(0.45, "normalized_loss", 0.184923), (0.975, "normalized_loss", 8.033e-5)], 1e-5)?;
    Ok(format!("max error {worst:.1e}"))
}

fn monte_carlo_agreement() -> Check {
    let start = Instant::now();
    let cfg = ExperimentConfig::load(&config("three_tier_rxc.json")).map_err(|e| e.to_string())?;
    if cfg.trials != 10_000 || cfg.code.field != FieldSpec::gf65536() {
        return Err("config is not 10^4 trials over GF(2^16)".into());
    }
    let mc = run_monte_carlo(&cfg).map_err(|e| e.to_string())?;
    let an = run_analytic(&cfg).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..mc.curve.len() {
        let (m, a, se) = (mc.curve.normalized_loss[i], an.curve.normalized_loss[i], mc.curve.stderr[i]);
        let tol = (3.0 * se).max(1e-12);
        if (m - a).abs() > tol {
            return Err(format!("t={}: simulated {m} vs analytic {a}, 3 sd = {tol}", mc.curve.times[i]));
        }
        if se > 0.0 {
            worst = worst.max((m - a).abs() / se);
        }
    }
    within(start.elapsed(), 120.0)?;
    Ok(format!(
        "{} grid points, worst |z| = {worst:.2}, {:.1} s",
        mc.curve.len(),
        start.elapsed().as_secs_f64()
    ))
}

fn cxr_bound_dominance() -> Check {
    let cfg = ExperimentConfig::load(&config("three_tier_cxr.json")).map_err(|e| e.to_string())?;
    let mc = run_monte_carlo(&cfg).map_err(|e| e.to_string())?;
    let bound = run_analytic(&cfg).map_err(|e| e.to_string())?.bound.ok_or("no bound for c×r")?;
    let mut min_gap = f64::INFINITY;
    for (i, (&m, &b)) in mc.curve.normalized_loss.iter().zip(&bound).enumerate() {
        if m > b {
            return Err(format!("t={}: simulated {m} exceeds bound {b}", mc.curve.times[i]));
        }
        min_gap = min_gap.min(b - m);
    }
    if (bound[0] - 9.0033).abs() > 0.01 {
        return Err(format!("bound at t=0 is {}, want 9.0033 ± 0.01", bound[0]));
    }
    if min_gap <= 0.0 {
        return Err("bound is tight somewhere on the grid".into());
    }
    Ok(format!("bound(0) = {}, smallest gap {min_gap:.3e}", bound[0]))
}

fn proof_step_inequalities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57);
    let mut violations = 0;
    for _ in 0..1000 {
        let m = rng.random_range(2..=6);
        let (u, h, q) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=4));
        let part = BlockPartition::cxr(m, u, h, q).map_err(|e| e.to_string())?;
        let (ar, ac) = part.a_shape();
        let (br, bc) = part.b_shape();
        let scale: Vec<f64> = (0..m).map(|_| 10f64.powi(rng.random_range(-2..=2))).collect();
        let a = Matrix::from_fn(ar, ac, |_, c| scale[c / h] * rng.random_range(-1.0..1.0));
        let b = Matrix::from_fn(br, bc, |_, _| rng.random_range(-1.0..1.0));
        let (ab, bb) = split(&a, &b, &part).map_err(|e| e.to_string())?;
        let terms = multiply_all(&ab, &bb, &part).map_err(|e| e.to_string())?;
        let c = a.matmul(&b).map_err(|e| e.to_string())?;
        let got: Vec<bool> = (0..m).map(|_| rng.random_bool(0.5)).collect();
        let c_hat = assemble(
            terms.iter().enumerate().filter(|(j, _)| got[*j]).map(|(j, t)| (part.position(j), t)),
            &part,
        )
        .map_err(|e| e.to_string())?;
        let lhs = loss(&c, &c_hat).map_err(|e| e.to_string())?;
        let missing: Vec<&Matrix> = terms.iter().zip(&got).filter(|(_, g)| !**g).map(|(t, _)| t).collect();
        let tri = missing.iter().map(|t| t.frobenius()).sum::<f64>().powi(2);
        let cs = missing.len() as f64 * missing.iter().map(|t| t.frobenius_sq()).sum::<f64>();
        let full = m as f64 * terms.iter().map(|t| t.frobenius_sq()).sum::<f64>();
        let slack = 1e-9 * (1.0 + full);
        if lhs > tri + slack || tri > cs + slack || cs > full + slack {
            violations += 1;
        }
    }
    if violations > 0 {
        return Err(format!("{violations} violations in 1000 instances"));
    }
    Ok("0 violations in 1000 instances".into())
}

/// Every vector in the GF(p) span of `rows`, by enumerating all coefficient
/// tuples.
fn span_contains_units(rows: &[Vec<u32>], p: u32, cols: usize) -> Vec<bool> {
    let mut found = vec![false; cols];
    let n = rows.len();
    let mut coef = vec![0u32; n];
    loop {
        let v: Vec<u32> = (0..cols).map(|c| (0..n).map(|r| coef[r] * rows[r][c]).sum::<u32>() % p).collect();
        if let Some(j) = (0..cols).find(|&j| v[j] == 1 && (0..cols).all(|i| i == j || v[i] == 0)) {
            found[j] = true;
        }
        let mut i = 0;
        while i < n {
            coef[i] += 1;
            if coef[i] < p {
                break;
            }
            coef[i] = 0;
            i += 1;
        }
        if i == n {
            return found;
        }
    }
}

fn decoder_oracle_equivalence() -> Check {
    let p = 7;
    let field = Field::new(FieldSpec::prime(p)).map_err(|e| e.to_string())?;
    let part = BlockPartition::rxc(2, 2, 1, 1, 1).map_err(|e| e.to_string())?;
    let classes = ClassMap::contiguous(&[2, 2]).map_err(|e| e.to_string())?;
    let gamma = WindowDistribution::new(vec![0.5, 0.5]).map_err(|e| e.to_string())?;
    let code: UepCode<f64> = UepCode::new(Family::Now, part, classes, Some(gamma), 6)
        .map_err(|e| e.to_string())?
        .with_field(FieldSpec::prime(p));
    let (mut subsets, mut mismatches) = (0, 0);
    for seed in 0..20 {
        let packets = encode(&code, &field, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(|e| e.to_string())?;
        for mask in 0u32..64 {
            let chosen: Vec<_> = (0..6).filter(|i| mask >> i & 1 == 1).map(|i| &packets[i]).collect();
            let rank = decodable_set(&code, &field, chosen.iter().copied());
            let rows: Vec<Vec<u32>> = chosen.iter().map(|pk| pk.coeffs.iter().map(|c| c.value()).collect()).collect();
            let brute = span_contains_units(&rows, p, 4);
            subsets += 1;
            if rank != brute {
                mismatches += 1;
            }
        }
    }
    if mismatches > 0 {
        return Err(format!("{mismatches} of {subsets} subsets disagree"));
    }
    Ok(format!("{subsets} subsets over 20 instances agree"))
}

fn thread_determinism() -> Check {
    let path = config("three_tier_rxc.json");
    let p = path.to_str().unwrap();
    let one = cli_bytes(&["simulate", "--config", p, "--seed", "11", "--threads", "1"])?;
    let eight = cli_bytes(&["simulate", "--config", p, "--seed", "11", "--threads", "8"])?;
    if one != eight {
        return Err("CSV differs between 1 and 8 threads".into());
    }
    Ok(format!("{} identical bytes", one.len()))
}

fn sparsity_table() -> Check {
    let presets = [
        ("gradient 1", SparseGaussianSpec::gradient_layer(1), 0.5009),
        ("gradient 2", SparseGaussianSpec::gradient_layer(2), 0.5909),
        ("gradient 3", SparseGaussianSpec::gradient_layer(3), 0.5797),
        ("weight 1", SparseGaussianSpec::weight_layer(1), 0.0015),
        ("weight 2", SparseGaussianSpec::weight_layer(2), 0.0011),
        ("weight 3", SparseGaussianSpec::weight_layer(3), 0.0010),
        ("input 2", SparseGaussianSpec::input_layer(2), 0.3311),
        ("input 3", SparseGaussianSpec::input_layer(3), 0.3863),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for (name, spec, want) in presets {
        let spec: SparseGaussianSpec<f64> = spec.ok_or(format!("missing preset {name}"))?;
        let m = gen_gradient_like(&spec, 400, 500, &mut rng).map_err(|e| e.to_string())?;
        let err = (sparsity(&m) - want).abs();
        if err > 0.01 {
            return Err(format!("{name}: sparsity {} vs {want}", sparsity(&m)));
        }
        worst = worst.max(err);
    }
    Ok(format!("8 presets, max deviation {worst:.4}"))
}

/// Mean and variance of `N(mu, var)` restricted to positive values.
fn positive_part_moments(mu: f64, var: f64) -> (f64, f64) {
    let sd = var.sqrt();
    let alpha = -mu / sd;
    let n = Normal::standard();
    let lambda = n.pdf(alpha) / (1.0 - n.cdf(alpha));
    (mu + sd * lambda, var * (1.0 + alpha * lambda - lambda * lambda))
}

fn fitted_moments() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut specs: Vec<(String, SparseGaussianSpec<f64>)> = Vec::new();
    for l in 1..=3 {
        specs.push((format!("gradient {l}"), SparseGaussianSpec::gradient_layer(l).unwrap()));
        specs.push((format!("weight {l}"), SparseGaussianSpec::weight_layer(l).unwrap()));
    }
    for l in 2..=3 {
        specs.push((format!("input {l}"), SparseGaussianSpec::input_layer(l).unwrap()));
    }
    let mut worst = 0.0f64;
    for (name, spec) in specs {
        let m = gen_gradient_like(&spec, 400, 500, &mut rng).map_err(|e| e.to_string())?;
        let x: Vec<f64> = m.data().iter().copied().filter(|&v| v != 0.0).collect();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        let (want_mean, want_var) =
            if spec.rectify { positive_part_moments(spec.mean, spec.variance) } else { (spec.mean, spec.variance) };
        let z_mean = (mean - want_mean) / (want_var / n).sqrt();
        let z_var = (var - want_var) / ((m4 - var * var) / n).sqrt();
        if z_mean.abs() > 3.0 || z_var.abs() > 3.0 {
            return Err(format!("{name}: z(mean) = {z_mean:.2}, z(var) = {z_var:.2}"));
        }
        worst = worst.max(z_mean.abs()).max(z_var.abs());
    }
    Ok(format!("8 fits, worst |z| = {worst:.2}"))
}

fn main() {
    let checks: [Named; 11] = [
        ("1 now decoding probabilities", now_decode_probabilities),
        ("2 ew decoding probabilities", ew_decode_probabilities),
        ("3 analytic r×c loss curves", analytic_rxc_curves),
        ("4 mds baseline", mds_baseline),
        ("5 monte-carlo matches analytic", monte_carlo_agreement),
        ("6 c×r bound dominates simulation", cxr_bound_dominance),
        ("7 bound proof inequalities", proof_step_inequalities),
        ("8 rank oracle matches span enumeration", decoder_oracle_equivalence),
        ("9 thread-count determinism", thread_determinism),
        ("g1 generator sparsity", sparsity_table),
        ("g2 generator fitted moments", fitted_moments),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
