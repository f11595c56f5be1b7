//! Acceptance suite. Each test prints one `[PASS]` or `[FAIL]` line and then
//! asserts the same verdict.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use bandlab::concentration::{
    classical_matrix, modified_matrix, plateau_scan, trace_identities, PlateauOptions, Region,
};
use bandlab::density::{default_probe_centers, density_estimate};
use bandlab::families::{
    extract_separated_subfamily, make_grid_family, make_random_family, perturb_family, TriangularFamily,
};
use bandlab::fekete::{
    approximate_fekete, candidate_set, default_cap_panel, default_function_panel, dilated_bandwidth,
    dilated_family_check, equidistribution_test, fekete_family, fekete_from_candidates, log_abs_det,
    product_property_check, FeketeOptions, LagrangeBasis,
};
use bandlab::kernels::{bernstein_ratio, decay_fit, Filter, Kernel, KernelSpec, Reproducer};
use bandlab::manifold::{eigenbasis, global_quadrature, EigenBasis, Manifold, Point};
use bandlab::sampling::{frame_bounds, is_empirically_mz, min_norm_interpolant, sampling_table, MZ_SPREAD_FACTOR};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn verdict(name: &str, pass: bool, detail: &str) {
    let line = format!("[{}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "{name}: {detail}");
}

fn torus() -> Manifold {
    Manifold::Torus2
}

fn sphere() -> Manifold {
    Manifold::Sphere2
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn lattice_count(l: f64) -> usize {
    let r2 = (l / std::f64::consts::TAU).powi(2);
    let r = r2.sqrt().ceil() as i64;
    let mut n = 0;
    for a in -r..=r {
        for b in -r..=r {
            if ((a * a + b * b) as f64) <= r2 {
                n += 1;
            }
        }
    }
    n
}

#[test]
fn spectral_counting() {
    let start = Instant::now();
    let mut bad = Vec::new();
    for l in [7.0, 13.0, 25.0, 40.0, 60.0] {
        let k = eigenbasis(&torus(), l).unwrap().len();
        if k != lattice_count(l) {
            bad.push(format!("torus L={l}: {k} vs {}", lattice_count(l)));
        }
    }
    for l in [1.5, 2.0, 7.0, 13.0, 25.0, 40.0, 60.0] {
        let mut lstar = 0u64;
        while ((lstar + 1) * (lstar + 2)) as f64 <= l * l {
            lstar += 1;
        }
        let k = eigenbasis(&sphere(), l).unwrap().len();
        if k as u64 != (lstar + 1).pow(2) {
            bad.push(format!("sphere L={l}: {k} vs {}", (lstar + 1).pow(2)));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("k_13 = {}, k_60 = {}, {:.3}s {}", lattice_count(13.0), lattice_count(60.0), secs, bad.join("; "));
    verdict("spectral counting", bad.is_empty() && secs < 1.0, &detail);
}

fn gram_error(basis: &EigenBasis) -> f64 {
    let rule = global_quadrature(basis.manifold(), basis.bandwidth()).unwrap();
    let mut phi = basis.evaluation_matrix(&rule.nodes);
    let plain = phi.clone();
    for (mut row, w) in phi.row_iter_mut().zip(&rule.weights) {
        row *= *w;
    }
    let g = plain.tr_mul(&phi);
    (g - DMatrix::identity(basis.len(), basis.len())).amax()
}

#[test]
fn orthonormality_and_reproduction() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst_gram = 0.0f64;
    let mut worst_rep = 0.0f64;
    let cases: Vec<(Manifold, f64)> = vec![
        (torus(), 40.0),
        (sphere(), 40.0),
        (Manifold::Circle, 40.0),
        ("product(torus2,circle)".parse().unwrap(), 20.0),
    ];
    let mut notes = Vec::new();
    for (m, l) in &cases {
        let basis = eigenbasis(m, *l).unwrap();
        let g = gram_error(&basis);
        let rep = Reproducer::new(&basis).unwrap();
        let mut r = 0.0f64;
        for _ in 0..100 {
            let c = gaussian(&mut rng, basis.len());
            let z = m.random_point(&mut rng);
            let direct = basis.evaluate_function(&c, &z);
            r = r.max((rep.reproduce(&c, &z).unwrap() - direct).abs() / (1.0 + direct.abs()));
        }
        worst_gram = worst_gram.max(g);
        worst_rep = worst_rep.max(r);
        notes.push(format!("{m}@{l}: gram {g:.1e}, reproduce {r:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_gram < 1e-10 && worst_rep < 1e-10 && secs < 30.0;
    verdict("orthonormality and reproduction", pass, &format!("{} ({secs:.1}s)", notes.join(", ")));
}

#[test]
fn hormander_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut homog = 0.0f64;
    for m in [torus(), sphere()] {
        for l in [20.0, 40.0] {
            let k = Kernel::new(&m, KernelSpec::sharp(l)).unwrap();
            for _ in 0..20 {
                let z = m.random_point(&mut rng);
                let v = k.diagonal(&z) * m.total_volume() / k.basis().len() as f64;
                homog = homog.max((v - 1.0).abs());
            }
        }
    }
    let mut ratios = Vec::new();
    for l in [40.0, 60.0, 80.0] {
        let kt = eigenbasis(&torus(), l).unwrap().len() as f64;
        ratios.push(kt * std::f64::consts::TAU.powi(2) / (std::f64::consts::PI * l * l));
        let ks = eigenbasis(&sphere(), l).unwrap().len() as f64;
        ratios.push(ks * std::f64::consts::TAU.powi(2) / (4.0 * std::f64::consts::PI * std::f64::consts::PI * l * l));
    }
    let pass = homog < 1e-9 && ratios.iter().all(|r| (0.7..=1.3).contains(r));
    verdict(
        "Hormander diagonal",
        pass,
        &format!("max |K(z,z) vol/k_L - 1| = {homog:.1e}, Weyl ratios {ratios:.4?}"),
    );
}

#[test]
fn kernel_decay() {
    let start = Instant::now();
    let ls = [20.0, 40.0, 80.0];
    let smooth = decay_fit(&torus(), Filter::Smooth(0.3), &ls, 3).unwrap();
    let sharp = decay_fit(&torus(), Filter::Sharp, &ls, 3).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let c = |f: &bandlab::kernels::DecayFit| f.levels.iter().map(|l| l.constant).collect::<Vec<_>>();
    let pass = smooth.spread() <= 4.0 && sharp.spread() > 4.0 && secs < 120.0;
    verdict(
        "kernel decay",
        pass,
        &format!(
            "smooth C_3 {:.3?} spread {:.2} (<= 4); sharp control C_3 {:.3?} spread {:.2} (needs > 4); {secs:.1}s",
            c(&smooth),
            smooth.spread(),
            c(&sharp),
            sharp.spread()
        ),
    );
}

#[test]
fn bernstein_inequality() {
    let r20 = bernstein_ratio(&torus(), 20.0, 50, 42).unwrap();
    let r40 = bernstein_ratio(&torus(), 40.0, 50, 43).unwrap();
    verdict(
        "Bernstein ratio",
        r20 <= 1.05 && r40 <= 1.05,
        &format!("max ||grad f|| / (L ||f||) = {r20:.4} at L=20, {r40:.4} at L=40"),
    );
}

#[test]
fn mz_exactness_and_interpolation() {
    let basis = eigenbasis(&torus(), 7.0).unwrap();
    let lattice: Vec<Point> = (0..25).map(|i| Point::torus((i / 5) as f64 / 5.0, (i % 5) as f64 / 5.0)).collect();
    let fb = frame_bounds(&basis, &lattice);
    let exact = (fb.lower - 5.0).abs() < 1e-9 && (fb.upper - 5.0).abs() < 1e-9;

    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (m, l) in [(torus(), 13.0), (sphere(), 6.0)] {
        let nodes = approximate_fekete(&m, l, &FeketeOptions::default()).unwrap().nodes;
        let b = eigenbasis(&m, l).unwrap();
        let c = gaussian(&mut rng, b.len());
        let values: Vec<f64> = nodes.iter().map(|z| b.evaluate_function(&c, z)).collect();
        let itp = min_norm_interpolant(&b, &nodes, &values).unwrap();
        let err = itp.basis_coefficients.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
    }
    verdict(
        "M-Z exactness and interpolation recovery",
        exact && worst < 1e-8,
        &format!("5x5 lattice at L=7: A = {}, B = {}; unisolvent recovery error {worst:.1e}", fb.lower, fb.upper),
    );
}

fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(m.clone()).eigenvalues;
    (e.min(), e.max())
}

#[test]
fn concentration_integrity() {
    let basis = eigenbasis(&torus(), 40.0).unwrap();
    let region = Region::ball(torus().reference_point(), 0.2);
    let d = classical_matrix(&basis, &region).unwrap();
    let t = modified_matrix(&basis, 0.2, &region).unwrap();
    let (dlo, dhi) = eigen_range(&d);
    let (tlo, thi) = eigen_range(&t);
    let in_range = [dlo, tlo].iter().all(|&x| x >= -1e-8) && [dhi, thi].iter().all(|&x| x <= 1.0 + 1e-8);
    let tr = trace_identities(&basis, 0.2, &region).unwrap();
    let e1 = (tr.t1_matrix - tr.t1_kernel).abs();
    let e2 = (tr.t2_matrix - tr.t2_kernel).abs();
    let whole = classical_matrix(&basis, &Region::Whole).unwrap().trace();
    let ew = (whole - basis.len() as f64).abs();
    verdict(
        "concentration integrity",
        in_range && e1 < 1e-6 && e2 < 1e-6 && ew < 1e-9,
        &format!(
            "spectra D [{dlo:.1e}, {dhi:.6}] T [{tlo:.1e}, {thi:.6}]; |T1 diff| {e1:.1e}, |T2 diff| {e2:.1e}; tr over M - k_L = {ew:.1e}"
        ),
    );
}

#[test]
fn plateau_behavior() {
    let start = Instant::now();
    let opts = PlateauOptions::default();
    let a = plateau_scan(&torus(), None, &[40.0, 60.0], &[6.0, 8.0], &opts).unwrap();
    let lo = (1.0 - opts.eps).powi(2) - 0.1;
    let ratios: Vec<f64> = a.rows.iter().map(|r| r.trace_ratio).collect();
    let ratio_ok = ratios.iter().all(|r| (lo..=1.1).contains(r));
    let b = plateau_scan(&torus(), None, &[60.0], &[4.0, 6.0, 8.0, 10.0], &opts).unwrap();
    let scaled: Vec<f64> = b.rows.iter().map(|r| r.gap() / r.r).collect();
    let spread = scaled.iter().copied().fold(f64::MIN, f64::max) / scaled.iter().copied().fold(f64::MAX, f64::min);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "plateau behavior",
        ratio_ok && spread <= 3.0 && secs < 600.0,
        &format!(
            "trace ratios {ratios:.4?} in [{lo:.2}, 1.1]; (T1-T2)/R at L=60 {scaled:.3?}, spread {spread:.2}; {secs:.1}s"
        ),
    );
}

#[test]
fn density_calibration() {
    let ls = [40.0, 60.0, 80.0];
    let nu = 1.0 / (2.0 * std::f64::consts::PI.sqrt());
    let fam = make_grid_family(&torus(), &ls, nu).unwrap();
    let rep = density_estimate(&fam, &ls, &[6.0, 8.0, 10.0], &default_probe_centers(&fam)).unwrap();
    let ok = |x: f64| (0.8..=1.2).contains(&x);
    verdict(
        "density estimator calibration",
        ok(rep.dminus) && ok(rep.dplus),
        &format!("lattice nu = 1/(2 sqrt pi): D- = {:.4}, D+ = {:.4}, target [0.8, 1.2]", rep.dminus, rep.dplus),
    );
}

fn family_suite(ls: &[f64]) -> Vec<(String, TriangularFamily)> {
    let m = torus();
    let mut out = Vec::new();
    for nu in [0.15, 0.2, 0.25, 0.35, 0.5, 0.75] {
        out.push((format!("lattice nu={nu}"), make_grid_family(&m, ls, nu).unwrap()));
    }
    for (nu, seed) in [(0.35, 1), (0.75, 2)] {
        out.push((format!("random nu={nu}"), make_random_family(&m, ls, nu, seed).unwrap()));
    }
    for nu in [0.5, 0.75] {
        let grid = make_grid_family(&m, ls, nu).unwrap();
        out.push((format!("perturbed nu={nu}"), perturb_family(&grid, 0.2, 5).unwrap()));
    }
    let dense = make_random_family(&m, ls, 0.75, 9).unwrap();
    for s in [1.0, 2.0] {
        out.push((format!("separated s={s}"), extract_separated_subfamily(&dense, s).unwrap()));
    }
    out
}

#[test]
fn density_theorem_surrogate() {
    let ls = [40.0, 60.0, 80.0];
    let rs = [6.0, 8.0, 10.0];
    let mut violations = Vec::new();
    let mut certified = Vec::new();
    let mut riesz = Vec::new();
    for (name, fam) in family_suite(&ls) {
        let rows = sampling_table(&fam).unwrap();
        let rep = density_estimate(&fam, &ls, &rs, &default_probe_centers(&fam)).unwrap();
        if is_empirically_mz(&rows, MZ_SPREAD_FACTOR) {
            certified.push(format!("{name} (D- {:.2})", rep.dminus));
            if rep.dminus < 0.8 {
                violations.push(format!("{name}: M-Z but D- = {:.3}", rep.dminus));
            }
        }
        let a = rows.iter().map(|r| r.riesz.map_or(0.0, |b| b.lower)).fold(f64::INFINITY, f64::min);
        if a >= 0.1 {
            riesz.push(format!("{name} (D+ {:.2})", rep.dplus));
            if rep.dplus > 1.2 {
                violations.push(format!("{name}: Riesz a = {a:.3} but D+ = {:.3}", rep.dplus));
            }
        }
    }
    verdict(
        "density theorem surrogate",
        violations.is_empty(),
        &format!(
            "M-Z certified: [{}]; Riesz >= 0.1: [{}]; violations: [{}]",
            certified.join(", "),
            riesz.join(", "),
            violations.join("; ")
        ),
    );
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

fn exhaustive_max(basis: &EigenBasis, candidates: &[Point]) -> f64 {
    let phi = basis.evaluation_matrix(candidates);
    let k = basis.len();
    let mut best = f64::NEG_INFINITY;
    combinations(candidates.len(), k, &mut |idx| {
        let sub = DMatrix::from_fn(k, k, |r, c| phi[(idx[r], c)]);
        let d = sub.determinant().abs();
        if d > 0.0 {
            best = best.max(d.ln());
        }
    });
    best
}

#[test]
fn fekete_tiny_instance_optimality() {
    let mut details = Vec::new();
    let mut pass = true;
    for (m, l, n) in [(torus(), 7.0, 12usize), (sphere(), 2.0, 50)] {
        let basis = eigenbasis(&m, l).unwrap();
        let cands = candidate_set(&m, n, 42);
        let best = exhaustive_max(&basis, &cands);
        let got = fekete_from_candidates(&basis, &cands, 20).unwrap().log_det;
        let ok = (got - best).abs() <= 1e-9 * best.abs().max(1.0);
        pass &= ok;
        details.push(format!("{m} L={l} k={} n={n}: exchange {got:.12}, exhaustive {best:.12}", basis.len()));
    }
    verdict("Fekete tiny-instance optimality", pass, &details.join("; "));
}

#[test]
fn fekete_structure() {
    let ls = [10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0];
    let mut s0 = f64::INFINITY;
    let mut kron = 0.0f64;
    let mut monotone = true;
    let mut replay = 0.0f64;
    let mut notes = Vec::new();
    for (m, grid) in [(torus(), &ls[..]), (sphere(), &ls[..5])] {
        let mut ms = f64::INFINITY;
        for &l in grid {
            let r = approximate_fekete(&m, l, &FeketeOptions::default()).unwrap();
            ms = ms.min(r.separation);
            let basis = eigenbasis(&m, l).unwrap();
            let lag = LagrangeBasis::new(basis.clone(), r.nodes.clone()).unwrap();
            for (i, z) in r.nodes.iter().enumerate() {
                for (j, v) in lag.values(z).iter().enumerate() {
                    kron = kron.max((v - if i == j { 1.0 } else { 0.0 }).abs());
                }
            }
            monotone &= r.log_det_history.windows(2).all(|w| w[1] >= w[0]);
            // replay the accepted swaps with determinants computed from scratch
            let cands = candidate_set(&m, r.candidate_count, FeketeOptions::default().seed);
            let phi = basis.evaluation_matrix(&cands);
            let mut idx = r.initial_indices.clone();
            let det = |idx: &[usize]| log_abs_det(&DMatrix::from_fn(idx.len(), idx.len(), |a, b| phi[(idx[a], b)]));
            let mut prev = det(&idx);
            replay = replay.max((prev - r.log_det_history[0]).abs());
            for (step, &(slot, cand)) in r.swaps.iter().enumerate() {
                idx[slot] = cand;
                let next = det(&idx);
                monotone &= next >= prev;
                replay = replay.max((next - r.log_det_history[step + 1]).abs());
                prev = next;
            }
        }
        notes.push(format!("{m} s0 = {ms:.3}"));
        s0 = s0.min(ms);
    }
    verdict(
        "Fekete structure",
        s0 >= 0.1 && kron < 1e-8 && monotone && replay < 1e-6,
        &format!(
            "{}; max |l_i(z_j) - delta_ij| = {kron:.1e}; log|det| monotone: {monotone}, replay drift {replay:.1e}",
            notes.join(", ")
        ),
    );
}

#[test]
fn dilated_fekete() {
    let eps = 0.3;
    let ls = [15.0, 20.0, 25.0];
    let mut needed: Vec<f64> = ls.to_vec();
    for &l in &ls {
        needed.push(dilated_bandwidth(l, eps));
        needed.push(dilated_bandwidth(l, -eps));
    }
    needed.sort_by(f64::total_cmp);
    needed.dedup();
    let (fam, _) = fekete_family(&torus(), &needed, &FeketeOptions::default()).unwrap();
    let rows = dilated_family_check(&fam, &ls, eps).unwrap();
    let pass = rows.iter().all(|r| r.frame.lower > 1e-10 && r.riesz.lower > 1e-10);
    let d: Vec<String> = rows
        .iter()
        .map(|r| format!("L={} A={:.3} a={:.3}", r.bandwidth, r.frame.lower, r.riesz.lower))
        .collect();
    verdict("dilated Fekete families", pass, &format!("levels {needed:?}; {}", d.join(", ")));
}

#[test]
fn equidistribution() {
    let ls = [10.0, 20.0, 40.0];
    let (fam, _) = fekete_family(&torus(), &ls, &FeketeOptions::default()).unwrap();
    let rows = equidistribution_test(&fam, &ls, &default_cap_panel(&torus()), &default_function_panel(&torus()).unwrap())
        .unwrap();
    let (first, last) = (&rows[0], &rows[2]);
    let disc = last.discrepancy < first.discrepancy;
    let worse: Vec<usize> = (0..first.moment_errors.len())
        .filter(|&i| !(last.moment_errors[i] < first.moment_errors[i]))
        .map(|i| i + 1)
        .collect();
    let mass = rows.iter().all(|r| r.mass_error == 0.0);
    verdict(
        "equidistribution",
        disc && worse.is_empty() && mass,
        &format!(
            "discrepancy {:.4} -> {:.4}; moment errors L=10 {:.4?} L=40 {:.4?}; not improved: {worse:?}; mass errors zero: {mass}",
            first.discrepancy, last.discrepancy, first.moment_errors, last.moment_errors
        ),
    );
}

#[test]
fn admissibility() {
    let grid: Vec<f64> = (1..=100).map(|i| i as f64 * 0.05).collect();
    let c = |m: &Manifold, l: f64| product_property_check(m, l, 0.25, &grid, 3, 42).unwrap().constant;
    let product: Manifold = "product(torus2,circle)".parse().unwrap();
    let t20 = c(&torus(), 20.0);
    let t80 = c(&torus(), 80.0);
    let c20 = c(&Manifold::Circle, 20.0);
    let c80 = c(&Manifold::Circle, 80.0);
    let p20 = c(&product, 20.0);
    let factor = t20.zip(c20).map(|(a, b)| a.max(b));
    let pass = t20.is_some_and(|x| x <= 2.5)
        && t80.is_some_and(|x| x <= 2.5)
        && c20.is_some_and(|x| x <= 1.0)
        && c80.is_some_and(|x| x <= 1.0)
        && p20.zip(factor).is_some_and(|(p, f)| p <= 2.0 * f);
    verdict(
        "admissibility",
        pass,
        &format!("eps = 0.25: torus C(20) {t20:?}, C(80) {t80:?}; circle C(20) {c20:?}, C(80) {c80:?}; torus2 x circle C(20) {p20:?}"),
    );
}

fn run_cli(args: &[&str], dir: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_bandlab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn determinism() {
    let runs: [&[&str]; 9] = [
        &["spectrum", "--L", "13,40"],
        &["kernel", "--L", "10,20", "--trials", "5"],
        &["mz", "--L", "10,15", "--family", "random", "--nu", "0.8"],
        &["interp", "--L", "8", "--family", "fekete"],
        &["concentration", "--L", "20", "--R", "3,4"],
        &["density", "--L", "20,30", "--R", "3,4", "--family", "perturbed"],
        &["fekete", "--L", "10,14", "--dilation", "0.3"],
        &["equidist", "--L", "6,10"],
        &["admissible", "--L", "10", "--manifold", "circle"],
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    for args in runs {
        let a = tmp.path().join(format!("{}_a", args[0]));
        let b = tmp.path().join(format!("{}_b", args[0]));
        if !(run_cli(args, &a) && run_cli(args, &b)) || data_files(&a) != data_files(&b) {
            differing.push(args[0]);
        }
    }
    verdict(
        "determinism",
        differing.is_empty(),
        &format!("9 subcommands run twice; differing or failed: {differing:?}"),
    );
}
