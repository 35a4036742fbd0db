//! Acceptance criteria. Each test prints one PASS/FAIL line; run with
//! `cargo test -p layersep --test acceptance -- --nocapture` to see them.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use layersep::cli;
use layersep::esra::{esra_solve, esra_solve_observed, EsraParams};
use layersep::fgp::{fgp_solve, grad_h, prox_objective, ProxParams};
use layersep::grid::{div_adjoint, grad_forward, DualPair, Image, LayerVector};
use layersep::io::write_pgm;
use layersep::mixing::{grad_f, lipschitz_f, objective_f, ProblemInstance};
use layersep::oracle::{
    accelerated_projected_gradient_trajectory, grid_search_reference, prox_subgradient_reference,
    top_mixing_eigenpair, OracleConfig,
};
use layersep::synth::{exact_targets, synthetic_layers};

fn report(id: &str, name: &str, limit: Duration, run: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let result = run();
    let elapsed = start.elapsed();
    let result = result.and_then(|detail| {
        if elapsed <= limit {
            Ok(detail)
        } else {
            Err(format!("{detail}; runtime {elapsed:.2?} exceeds {limit:?}"))
        }
    });
    match &result {
        Ok(detail) => println!("[PASS] {id} {name}: {detail} ({elapsed:.2?})"),
        Err(detail) => println!("[FAIL] {id} {name}: {detail} ({elapsed:.2?})"),
    }
    if let Err(detail) = result {
        panic!("{id} {name} failed: {detail}");
    }
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, lo: f64, hi: f64) -> Image {
    Image::new(h, w, (0..h * w).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn random_pair(rng: &mut ChaCha8Rng, h: usize, w: usize, lo: f64, hi: f64) -> DualPair {
    let (np, nq) = DualPair::component_lens(h, w);
    DualPair::new(
        h,
        w,
        (0..np).map(|_| rng.gen_range(lo..hi)).collect(),
        (0..nq).map(|_| rng.gen_range(lo..hi)).collect(),
    )
    .unwrap()
}

fn random_layers(rng: &mut ChaCha8Rng, count: usize, h: usize, w: usize) -> LayerVector {
    LayerVector::new(
        (0..count)
            .map(|_| random_image(rng, h, w, -1.0, 2.0))
            .collect(),
    )
    .unwrap()
}

fn layer_diff_norm(a: &LayerVector, b: &LayerVector) -> f64 {
    a.to_flat()
        .iter()
        .zip(b.to_flat())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn pair_diff_norm(a: &DualPair, b: &DualPair) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Noisy instance whose optimum is not the ground truth.
fn perturbed_instance(seed: u64, h: usize, w: usize, m: usize, lambda: f64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = LayerVector::new(synthetic_layers(h, w, m + 1, seed)).unwrap();
    let coeffs: Vec<f64> = (0..m).map(|i| 0.7 - 0.1 * i as f64).collect();
    let mixtures = layersep::mixing::apply_mixing(&truth, &coeffs)
        .unwrap()
        .into_iter()
        .map(|mix| {
            let noisy = mix
                .as_slice()
                .iter()
                .map(|v| (v + rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0))
                .collect();
            Image::new(h, w, noisy).unwrap()
        })
        .collect();
    let mut jitter = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&x| if rng.gen_bool(0.2) { x + rng.gen_range(-0.2..0.2) } else { x })
            .collect()
    };
    let targets = exact_targets(truth.layers())
        .into_iter()
        .map(|t| DualPair::new(h, w, jitter(t.p()), jitter(t.q())).unwrap())
        .collect();
    ProblemInstance::new(mixtures, coeffs, targets, lambda).unwrap()
}

#[test]
fn c01_adjointness() {
    report("C1", "adjointness", Duration::from_secs(1), || {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let h = rng.gen_range(1..=16);
            let w = rng.gen_range(1..=16);
            let l = random_image(&mut rng, h, w, -1.0, 1.0);
            let pq = random_pair(&mut rng, h, w, -1.0, 1.0);
            let lhs = div_adjoint(&pq).dot(&l);
            let rhs = pq.dot(&grad_forward(&l));
            let rel = (lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs()));
            worst = worst.max(rel);
        }
        if worst <= 1e-12 {
            Ok(format!("max relative error {worst:.2e} over 200 draws"))
        } else {
            Err(format!("max relative error {worst:.2e} > 1e-12"))
        }
    });
}

#[test]
fn c02_operator_norm_bound() {
    report("C2", "operator norm", Duration::from_secs(1), || {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bound = 8f64.sqrt();
        let mut worst: f64 = 0.0;
        let mut violations = 0;
        for k in 0..1000 {
            let h = rng.gen_range(1..=16);
            let w = rng.gen_range(1..=16);
            // Half the probes use a checkerboard, the direction that comes
            // closest to the bound.
            let x = if k % 2 == 0 {
                random_image(&mut rng, h, w, -1.0, 1.0)
            } else {
                Image::new(
                    h,
                    w,
                    (0..h * w)
                        .map(|i| if (i / w + i % w) % 2 == 0 { 1.0 } else { -1.0 })
                        .collect(),
                )
                .unwrap()
            };
            let ratio = grad_forward(&x).norm() / x.norm();
            worst = worst.max(ratio);
            if ratio > bound {
                violations += 1;
            }
        }
        if violations == 0 {
            Ok(format!("max ratio {worst:.6} ≤ √8 = {bound:.6}"))
        } else {
            Err(format!("{violations} violations, max ratio {worst}"))
        }
    });
}

#[test]
fn c03_lipschitz_of_data_gradient() {
    report("C3", "Lipschitz of grad f", Duration::from_secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeff_sets: [&[f64]; 4] = [&[1.0], &[0.7, 0.6], &[0.3, -0.9, 0.5], &[2.0, 0.1]];
        let mut notes = Vec::new();
        for coeffs in coeff_sets {
            let m = coeffs.len();
            let (h, w) = (6, 5);
            let inst = ProblemInstance::new(
                (0..m).map(|_| random_image(&mut rng, h, w, 0.0, 1.0)).collect(),
                coeffs.to_vec(),
                vec![DualPair::zeros(h, w); m + 1],
                0.0,
            )
            .unwrap();
            let lf = lipschitz_f(coeffs);
            let ratio = |x: &LayerVector, y: &LayerVector| {
                let gx = grad_f(x, &inst).unwrap();
                let gy = grad_f(y, &inst).unwrap();
                layer_diff_norm(&gx, &gy) / layer_diff_norm(x, y)
            };
            let mut max_random: f64 = 0.0;
            for _ in 0..200 {
                let x = random_layers(&mut rng, m + 1, h, w);
                let y = random_layers(&mut rng, m + 1, h, w);
                let r = ratio(&x, &y);
                if r > lf + 1e-9 {
                    return Err(format!("ratio {r} exceeds {lf} for a={coeffs:?}"));
                }
                max_random = max_random.max(r);
            }
            let (_, dir) = top_mixing_eigenpair(coeffs, h, w, 500, 7);
            let y = random_layers(&mut rng, m + 1, h, w);
            let shifted: Vec<f64> = y
                .to_flat()
                .iter()
                .zip(&dir)
                .map(|(a, v)| a + 0.5 * v)
                .collect();
            let x = LayerVector::new(
                shifted
                    .chunks(h * w)
                    .map(|c| Image::new(h, w, c.to_vec()).unwrap())
                    .collect(),
            )
            .unwrap();
            let top = ratio(&x, &y);
            if top > lf + 1e-9 || top < 0.99 * lf {
                return Err(format!(
                    "eigen-direction ratio {top} outside [0.99·{lf}, {lf}] for a={coeffs:?}"
                ));
            }
            notes.push(format!("a={coeffs:?}: L={lf:.4} top={top:.6}"));
        }
        Ok(notes.join("; "))
    });
}

#[test]
fn c04_lipschitz_of_dual_gradient() {
    report("C4", "Lipschitz of grad H", Duration::from_secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut notes = Vec::new();
        for beta in [0.05, 0.2, 1.0] {
            let bound = 8.0 * beta * beta;
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                let h = rng.gen_range(1..=12);
                let w = rng.gen_range(2..=12);
                let d = random_image(&mut rng, h, w, -0.5, 1.5);
                let e = random_pair(&mut rng, h, w, -1.0, 1.0);
                let a = random_pair(&mut rng, h, w, -3.0, 3.0);
                let b = random_pair(&mut rng, h, w, -3.0, 3.0);
                let ga = grad_h(&a, &d, beta, &e).unwrap();
                let gb = grad_h(&b, &d, beta, &e).unwrap();
                let r = pair_diff_norm(&ga, &gb) / pair_diff_norm(&a, &b);
                worst = worst.max(r);
                if r > bound + 1e-9 {
                    return Err(format!("beta={beta}: ratio {r} > 8β² = {bound}"));
                }
            }
            notes.push(format!("β={beta}: max {worst:.3e} ≤ {bound:.3e}"));
        }
        Ok(notes.join("; "))
    });
}

#[test]
fn c05_fgp_closed_form_cases() {
    report("C5", "FGP closed form", Duration::from_secs(1), || {
        let params = ProxParams::new(0.1).with_iters(2000).with_tol(0.0);
        let cases = [
            ([0.8, 0.2], 0.0, [0.7, 0.3]),
            ([0.5, 0.5], 0.4, [0.4, 0.6]),
        ];
        let mut worst: f64 = 0.0;
        for (d, e, expect) in cases {
            let d = Image::new(1, 2, d.to_vec()).unwrap();
            let e = DualPair::new(1, 2, vec![], vec![e]).unwrap();
            let sol = fgp_solve(&d, &e, &params).map_err(|e| e.to_string())?.solution;
            for (a, b) in sol.as_slice().iter().zip(expect) {
                worst = worst.max((a - b).abs());
            }
        }
        if worst <= 1e-6 {
            Ok(format!("max deviation {worst:.2e}"))
        } else {
            Err(format!("max deviation {worst:.2e} > 1e-6"))
        }
    });
}

#[test]
fn c06_fgp_against_reference_solvers() {
    report("C6", "FGP vs reference solvers", Duration::from_secs(300), || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let fgp = ProxParams::new(0.0).with_iters(2000).with_tol(0.0);
        let mut worst_sub: f64 = 0.0;
        for k in 0..50 {
            let h = rng.gen_range(1..=4);
            let w = rng.gen_range(1..=4);
            let beta = if k % 2 == 0 { 0.05 } else { 0.2 };
            let d = random_image(&mut rng, h, w, -0.5, 1.5);
            let e = random_pair(&mut rng, h, w, -1.0, 1.0);
            let params = ProxParams { beta, ..fgp.clone() };
            let ours = fgp_solve(&d, &e, &params).unwrap().solution;
            let cfg = OracleConfig {
                seed: k,
                ..OracleConfig::default()
            };
            let reference = prox_subgradient_reference(&d, &e, beta, &cfg).unwrap();
            let f_ours = prox_objective(&ours, &d, beta, &e).unwrap();
            let f_ref = prox_objective(&reference, &d, beta, &e).unwrap();
            let diff = (f_ours - f_ref).abs();
            worst_sub = worst_sub.max(diff);
            if diff > 1e-3 {
                return Err(format!(
                    "instance {k} ({h}x{w}, β={beta}): FGP {f_ours} vs subgradient {f_ref}"
                ));
            }
        }

        let shapes = [(1, 1), (1, 2), (2, 1), (1, 3), (3, 1)];
        let mut worst_grid: f64 = 0.0;
        for k in 0..20 {
            let (h, w) = shapes[k % shapes.len()];
            let beta = if k % 2 == 0 { 0.05 } else { 0.2 };
            let resolution = if h * w <= 2 { 2001 } else { 201 };
            let spacing = 1.0 / (resolution - 1) as f64;
            let d = random_image(&mut rng, h, w, -0.5, 1.5);
            let e = random_pair(&mut rng, h, w, -1.0, 1.0);
            let params = ProxParams { beta, ..fgp.clone() };
            let ours = fgp_solve(&d, &e, &params).unwrap().solution;
            let grid = grid_search_reference(&d, &e, beta, resolution).unwrap();
            let f_ours = prox_objective(&ours, &d, beta, &e).unwrap();
            let f_grid = prox_objective(&grid, &d, beta, &e).unwrap();
            worst_grid = worst_grid.max(f_grid - f_ours);
            if f_ours > f_grid + 1e-9 || f_grid - f_ours > spacing {
                return Err(format!(
                    "grid instance {k} ({h}x{w}): FGP {f_ours} vs grid {f_grid} (spacing {spacing})"
                ));
            }
        }
        Ok(format!(
            "max |ΔF| vs subgradient {worst_sub:.2e}; max F_grid − F_fgp {worst_grid:.2e}"
        ))
    });
}

#[test]
fn c07_duality_gap_at_termination() {
    report("C7", "duality gap", Duration::from_secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        let mut notes = String::new();
        for k in 0..10 {
            let beta = if k % 2 == 0 { 0.05 } else { 0.2 };
            let d = random_image(&mut rng, 8, 8, -0.5, 1.5);
            let e = random_pair(&mut rng, 8, 8, -1.0, 1.0);
            let params = ProxParams::new(beta).with_iters(100_000).with_tol(1e-4);
            let res = fgp_solve(&d, &e, &params).unwrap();
            let primal = prox_objective(&res.solution, &d, beta, &e).unwrap();
            let allowed = 1e-3 * (1.0 + primal.abs());
            if res.duality_gap > allowed || res.duality_gap < -1e-9 {
                return Err(format!(
                    "instance {k}: gap {} vs allowed {allowed} after {} iterations",
                    res.duality_gap, res.iters_used
                ));
            }
            worst = worst.max(res.duality_gap / allowed);

            if k == 0 {
                let gap_at = |n: usize| {
                    fgp_solve(&d, &e, &ProxParams::new(beta).with_iters(n).with_tol(0.0))
                        .unwrap()
                        .duality_gap
                };
                let (g10, g20, g40) = (gap_at(10), gap_at(20), gap_at(40));
                if !(g10 >= g20 && g20 >= g40) {
                    return Err(format!("gap not decreasing: {g10} {g20} {g40}"));
                }
                notes = format!("; trend k=10,20,40: {g10:.2e} {g20:.2e} {g40:.2e}");
            }
        }
        Ok(format!("max gap/allowed {worst:.3}{notes}"))
    });
}

#[test]
fn c08_esra_rate_envelope() {
    report("C8", "ESRA O(1/k²) envelope", Duration::from_secs(120), || {
        let inst = perturbed_instance(8, 8, 8, 2, 0.05);
        let params = EsraParams::default();
        let step = params.resolve_step(inst.coeffs()).unwrap();
        let (_, trace) = esra_solve(&inst, &params).unwrap();

        let reference = EsraParams {
            total_iters: 10_000,
            fgp_iters: 2000,
            fgp_tol: 1e-10,
            warm_start: true,
            workers: Some(1),
            ..EsraParams::default()
        };
        let (l_star, ref_trace) = esra_solve(&inst, &reference).unwrap();
        let f_star = ref_trace
            .objectives()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let dist_sq = l_star.norm_sq();
        let mut tightest: f64 = 0.0;
        for rec in &trace.records {
            let k = rec.iter as f64;
            let bound = 2.0 * step * dist_sq / ((k + 1.0) * (k + 1.0));
            let excess = rec.objective.total - f_star;
            if excess > bound {
                return Err(format!(
                    "k={}: F−F* = {excess:.3e} exceeds envelope {bound:.3e}",
                    rec.iter
                ));
            }
            tightest = tightest.max(excess / bound);
        }
        let first = trace.records.first().unwrap().objective.total;
        let last = trace.records.last().unwrap().objective.total;
        Ok(format!(
            "F* = {f_star:.6e}, F(l_1) = {first:.4e}, F(l_100) = {last:.6e}, max (F−F*)/envelope = {tightest:.3}"
        ))
    });
}

#[test]
fn c09_zero_penalty_matches_reference() {
    report("C9", "λ=0 equivalence", Duration::from_secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst: f64 = 0.0;
        for k in 0..10 {
            let h = rng.gen_range(1..=8);
            let w = rng.gen_range(1..=8);
            let m = rng.gen_range(1..=3);
            let inst = ProblemInstance::new(
                (0..m).map(|_| random_image(&mut rng, h, w, 0.0, 1.0)).collect(),
                (0..m).map(|_| rng.gen_range(0.1..1.0)).collect(),
                vec![DualPair::zeros(h, w); m + 1],
                0.0,
            )
            .unwrap();
            let params = EsraParams {
                workers: Some(1 + k % 3),
                ..EsraParams::default()
            };
            let reference = accelerated_projected_gradient_trajectory(&inst, &params).unwrap();
            let mut ours = Vec::new();
            esra_solve_observed(&inst, &params, |_, l| ours.push(l.clone())).unwrap();
            if ours.len() != reference.len() {
                return Err(format!("trajectory lengths {} vs {}", ours.len(), reference.len()));
            }
            for (a, b) in ours.iter().zip(&reference) {
                worst = worst.max(a.max_abs_diff(b));
            }
        }
        if worst <= 1e-12 {
            Ok(format!("max iterate deviation {worst:.2e}"))
        } else {
            Err(format!("max iterate deviation {worst:.2e} > 1e-12"))
        }
    });
}

const GOLDEN: &str = include_str!("golden/e2e_rmse.csv");
const E2E_SEED: u64 = 20240611;

/// Runs synth → recover → eval in `dir` and returns the eval CSV body.
fn end_to_end(dir: &Path, workers: usize) -> Result<String, String> {
    let truth_dir = dir.join("input");
    fs::create_dir_all(&truth_dir).unwrap();
    let mut truth_paths = Vec::new();
    for (i, layer) in synthetic_layers(32, 32, 3, E2E_SEED).iter().enumerate() {
        let path = truth_dir.join(format!("layer_{i}.pgm"));
        write_pgm(&path, layer, 255).unwrap();
        truth_paths.push(path.display().to_string());
    }
    let synth_dir = dir.join("synth");
    let mut args = vec!["layersep".to_string(), "synth".into(), "--truth".into()];
    args.extend(truth_paths);
    args.extend([
        "--coeffs".into(),
        "0.7,0.6".into(),
        "--out".into(),
        synth_dir.display().to_string(),
    ]);
    let out = cli::run(&args);
    if out.exit_code != 0 {
        return Err(format!("synth failed: {}", out.stderr));
    }
    let trace = dir.join("trace.csv");
    let out = cli::run([
        "layersep".to_string(),
        "recover".into(),
        "--config".into(),
        synth_dir.join(cli::MANIFEST_NAME).display().to_string(),
        "--lambda".into(),
        "0.05".into(),
        "--workers".into(),
        workers.to_string(),
        "--trace".into(),
        trace.display().to_string(),
    ]);
    if out.exit_code != 0 {
        return Err(format!("recover failed: {}", out.stderr));
    }
    let rows = fs::read_to_string(&trace).unwrap().lines().count();
    if rows != 101 {
        return Err(format!("trace has {rows} lines, expected 101"));
    }
    let out = cli::run([
        "layersep".to_string(),
        "eval".into(),
        synth_dir.join("recovered").display().to_string(),
        synth_dir.join("truth").display().to_string(),
    ]);
    if out.exit_code != 0 {
        return Err(format!("eval failed: {}", out.stderr));
    }
    Ok(out.stdout)
}

fn parse_rmse(csv: &str) -> Vec<(String, f64)> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut cols = l.split(',');
            let name = cols.next().unwrap().to_string();
            let rmse = cols.next().unwrap().parse().unwrap();
            (name, rmse)
        })
        .collect()
}

#[test]
fn c10_end_to_end_golden_run() {
    report("C10", "end-to-end golden run", Duration::from_secs(60), || {
        let dir = tempfile::tempdir().unwrap();
        let eval = end_to_end(dir.path(), 2)?;
        let measured = parse_rmse(&eval);
        let golden: Vec<(String, f64, f64)> = GOLDEN
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| {
                let cols: Vec<&str> = l.split(',').collect();
                (
                    cols[0].to_string(),
                    cols[1].parse().unwrap(),
                    cols[2].parse().unwrap(),
                )
            })
            .collect();
        if measured.len() != golden.len() {
            return Err(format!("measured {measured:?} vs golden {golden:?}"));
        }
        let mut notes = Vec::new();
        for ((name, rmse), (g_name, g_rmse, threshold)) in measured.iter().zip(&golden) {
            if name != g_name {
                return Err(format!("layer {name} vs golden {g_name}"));
            }
            if rmse >= threshold {
                return Err(format!("{name}: RMSE {rmse} not below threshold {threshold}"));
            }
            if (rmse - g_rmse).abs() > 1e-9 {
                return Err(format!("{name}: RMSE {rmse:.17e} differs from archived {g_rmse:.17e}"));
            }
            notes.push(format!("{name} {rmse:.6e} < {threshold}"));
        }
        Ok(notes.join(", "))
    });
}

#[test]
fn c11_parallel_determinism() {
    report("C11", "parallel determinism", Duration::from_secs(60), || {
        let inst = perturbed_instance(11, 24, 24, 3, 0.05);
        let mut runs = Vec::new();
        for workers in [1, 2, 4] {
            let params = EsraParams {
                workers: Some(workers),
                ..EsraParams::default()
            };
            let (layers, trace) = esra_solve(&inst, &params).unwrap();
            let objectives: Vec<_> = trace
                .records
                .iter()
                .map(|r| (r.iter, r.objective, r.fgp_iters.clone()))
                .collect();
            runs.push((workers, layers, objectives));
        }
        let (_, base_layers, base_trace) = &runs[0];
        for (workers, layers, trace) in &runs[1..] {
            let same_bits = base_layers
                .to_flat()
                .iter()
                .zip(layers.to_flat())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            if !same_bits {
                return Err(format!("layers differ between 1 and {workers} workers"));
            }
            if trace != base_trace {
                return Err(format!("traces differ between 1 and {workers} workers"));
            }
        }
        let final_obj = objective_f(base_layers, &inst).unwrap().total;

        let d1 = tempfile::tempdir().unwrap();
        let d4 = tempfile::tempdir().unwrap();
        let e1 = end_to_end(d1.path(), 1)?;
        let e4 = end_to_end(d4.path(), 4)?;
        if e1 != e4 {
            return Err("eval output differs between 1 and 4 workers".into());
        }
        for name in ["transmitted.pgm", "reflection_1.pgm", "reflection_2.pgm"] {
            let a = fs::read(d1.path().join("synth/recovered").join(name)).unwrap();
            let b = fs::read(d4.path().join("synth/recovered").join(name)).unwrap();
            if a != b {
                return Err(format!("{name} differs between 1 and 4 workers"));
            }
        }
        Ok(format!(
            "workers 1,2,4 bitwise identical (final F = {final_obj:.6e}); CLI outputs identical"
        ))
    });
}
