//! Subcommand pipelines. Each one fills an [`Output`] and returns its JSON
//! summary, which is written as `summary.json`.

use std::fs::File;
use std::io::BufReader;

use bandlab::concentration::{classical_matrix_with, cutoff_weights, modify, plateau_scan, spectrum, PlateauOptions, Region};
use bandlab::density::{counting_mass, default_probe_centers, density_estimate};
use bandlab::families::{
    extract_separated_subfamily, format_family, make_grid_family, make_random_family, parse_family, perturb_family,
    TriangularFamily,
};
use bandlab::fekete::{
    default_cap_panel, default_function_panel, dilated_bandwidth, dilated_family_check, equidistribution_test,
    fekete_family, product_property_check, FeketeOptions, FeketeResult,
};
use bandlab::kernels::{bernstein_ratio, decay_fit, decay_probe_pairs, Kernel, KernelSpec};
use bandlab::manifold::{eigenbasis, BallResolution, Manifold};
use bandlab::sampling::{is_empirically_mz, min_norm_interpolant, sampling_table};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

use crate::config::Config;
use crate::output::{num, nums, Cell, Output};
use crate::CliError;

pub const SUBCOMMANDS: &[(&str, &str)] = &[
    ("spectrum", "dimensions k_L, top frequencies and Weyl ratios"),
    ("kernel", "kernel decay constants, diagonal and Bernstein ratios"),
    ("mz", "frame and Riesz bounds of a point family"),
    ("interp", "min-norm interpolation of random band-limited functions"),
    ("concentration", "concentration spectra, trace plateaus and Landau counts"),
    ("density", "Beurling-Landau density estimates of a point family"),
    ("fekete", "approximate Fekete families and dilated bounds"),
    ("equidist", "cap discrepancy and moment errors of Fekete families"),
    ("admissible", "product-property constant C"),
];

pub fn run(name: &str, cfg: &Config, out: &mut Output) -> Result<Value, CliError> {
    let m = cfg.manifold()?;
    match name {
        "spectrum" => spectrum_cmd(&m, cfg, out),
        "kernel" => kernel_cmd(&m, cfg, out),
        "mz" => mz_cmd(&m, cfg, out),
        "interp" => interp_cmd(&m, cfg, out),
        "concentration" => concentration_cmd(&m, cfg, out),
        "density" => density_cmd(&m, cfg, out),
        "fekete" => fekete_cmd(&m, cfg, out),
        "equidist" => equidist_cmd(&m, cfg, out),
        "admissible" => admissible_cmd(&m, cfg, out),
        _ => unreachable!("clap rejects unknown subcommands"),
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

fn unit_ball_volume(m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0,
        _ => std::f64::consts::TAU / m as f64 * unit_ball_volume(m - 2),
    }
}

fn fekete_options(cfg: &Config) -> FeketeOptions {
    FeketeOptions {
        candidate_count: cfg.candidates,
        exchange_rounds: cfg.exchange_rounds,
        seed: cfg.seed,
    }
}

fn build_family(m: &Manifold, cfg: &Config, out: &mut Output) -> Result<TriangularFamily, CliError> {
    let ls = &cfg.bandwidths;
    let family = out.stage("family", || -> Result<TriangularFamily, CliError> {
        if let Some(path) = &cfg.family_file {
            let file = File::open(path).map_err(CliError::Io)?;
            return Ok(parse_family(m, BufReader::new(file))?);
        }
        Ok(match cfg.family.as_str() {
            "grid" => make_grid_family(m, ls, cfg.nu)?,
            "random" => make_random_family(m, ls, cfg.nu, cfg.seed)?,
            "perturbed" => perturb_family(&make_grid_family(m, ls, cfg.nu)?, cfg.perturb, cfg.seed)?,
            _ => fekete_family(m, ls, &fekete_options(cfg))?.0,
        })
    })?;
    if cfg.separate > 0.0 {
        return Ok(extract_separated_subfamily(&family, cfg.separate)?);
    }
    Ok(family)
}

fn spectrum_cmd(m: &Manifold, cfg: &Config, out: &mut Output) -> Result<Value, CliError> {
    let dim = m.dimension();
    let weyl = |l: f64, k: usize| {
        k as f64 * std::f64::consts::TAU.powi(dim as i32) / (m.total_volume() * unit_ball_volume(dim) * l.powi(dim as i32))
    };
    let mut rows = Vec::new();
    let mut eig_rows = Vec::new();
    let mut levels = Vec::new();
    for &l in &cfg.bandwidths {
        let basis = out.stage(&format!("basis L={l}"), || eigenbasis(m, l))?;
        let freqs: Vec<f64> = basis.frequencies().collect();
        let top = freqs.iter().copied().fold(0.0, f64::max);
        let ratio = weyl(l, basis.len());
        for (i, f) in freqs.iter().enumerate() {
            eig_rows.push(vec![Cell::from(l), Cell::from(i), Cell::from(*f)]);
        }
        rows.push(vec![Cell::from(l), Cell::from(basis.len()), Cell::from(top), Cell::from(ratio)]);
        levels.push(json!({"L": num(l), "k_L": basis.len(), "lambda_max": num(top), "weyl_ratio": num(ratio)}));
    }
    out.csv("spectrum.csv", &header(&["L", "k_L", "lambda_max", "weyl_ratio"]), rows);
    out.csv("eigenvalues.csv", &header(&["L", "index", "lambda"]), eig_rows);
    out.plot(
        "weyl.txt",
        levels.iter().map(|v| (v["L"].as_f64().unwrap_or(f64::NAN), v["k_L"].as_f64().unwrap_or(f64::NAN))),
    );
    let last = levels.last().cloned().unwrap_or(Value::Null);
    Ok(json!({
        "manifold": m.to_string(),
        "k_L": last["k_L"],
        "lambda_max": last["lambda_max"],
        "levels": levels,
    }))
}

fn kernel_cmd(m: &Manifold, cfg: &Config, out: &mut Output) -> Result<Value, CliError> {
    let filter = cfg.filter()?;
    let fit = out.stage("decay fit", || decay_fit(m, filter, &cfg.bandwidths, cfg.exponent))?;
    let center = m.reference_point();
    let mut rows = Vec::new();
    let mut bern = Vec::new();
    for level in &fit.levels {
        let l = level.bandwidth;
        let kernel = Kernel::new(m, KernelSpec::new(filter, l))?;
        let diag = kernel.diagonal(&center) * m.total_volume() / kernel.basis().len() as f64;
        let b = out.stage(&format!("bernstein L={l}"), || bernstein_ratio(m, l, cfg.trials, cfg.seed))?;
        bern.push(b);
        rows.push(vec![
            Cell::from(l),
            Cell::from(kernel.basis().len()),
            Cell::from(level.constant),
            Cell::from(level.samples.len()),
            Cell::from(diag),
            Cell::from(b),
        ]);
    }
    out.csv(
        "kernel.csv",
        &header(&["L", "k_L", "decay_constant", "probe_pairs", "normalized_diagonal", "bernstein_ratio"]),
        rows,
    );
    if let Some(level) = fit.levels.last() {
        // ray profile from the reference point, normalized by the diagonal
        let pairs = decay_probe_pairs(m);
        let kernel = Kernel::new(m, KernelSpec::new(filter, level.bandwidth))?;
        let d0 = kernel.diagonal(&center);
        let mut profile: Vec<(f64, f64)> = pairs
            .iter()
            .zip(&level.samples)
            .filter(|((z, _), _)| *z == center)
            .map(|(_, &(d, v))| (d, v / d0))
            .collect();
        profile.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        out.plot("profile.txt", profile);
    }
    out.plot("decay.txt", fit.levels.iter().map(|l| (l.bandwidth, l.constant)));
    let constants: Vec<f64> = fit.levels.iter().map(|l| l.constant).collect();
    Ok(json!({
        "manifold": m.to_string(),
        "filter": cfg.filter,
        "exponent": fit.exponent,
        "constants": nums(&constants),
        "spread": num(fit.spread()),
        "bernstein_max": num(bern.iter().copied().fold(0.0, f64::max)),
    }))
}

fn mz_cmd(m: &Manifold, cfg: &Config, out: &mut Output) -> Result<Value, CliError> {
    let family = build_family(m, cfg, out)?;
    let rows = out.stage("sampling table", || sampling_table(&family))?;
    let wanted: Vec<_> = rows.iter().filter(|r| cfg.bandwidths.contains(&r.bandwidth)).cloned().collect();
    let cells = wanted
        .iter()
        .map(|r| {
            vec![
                Cell::from(r.bandwidth),
                Cell::from(r.k_l),
                Cell::from(r.m_l),
                Cell::from(r.frame.lower),
                Cell::from(r.frame.upper),
                Cell::from(r.frame.condition()),
                Cell::from(r.riesz.map_or(f64::NAN, |b| b.lower)),
                Cell::from(r.riesz.map_or(f64::NAN, |b| b.upper)),
                Cell::from(r.separation),
                Cell::from(r.mesh),
            ]
        })
        .collect();
    out.csv(
        "mz.csv",
        &header(&["L", "k_L", "m_L", "A", "B", "B_over_A", "riesz_a", "riesz_b", "separation", "mesh"]),
        cells,
    );
    out.plot("frame_lower.txt", wanted.iter().map(|r| (r.bandwidth, r.frame.lower)));
    out.plot("frame_upper.txt", wanted.iter().map(|r| (r.bandwidth, r.frame.upper)));
    out.text("family.txt", format_family(&family));
    Ok(json!({
        "manifold": m.to_string(),
        "provenance": family.provenance().to_string(),
        "empirically_mz": is_empirically_mz(&wanted, cfg.mz_factor),
        "min_lower": num(wanted.iter().map(|r| r.frame.lower).fold(f64::INFINITY, f64::min)),
        "max_upper": num(wanted.iter().map(|r| r.frame.upper).fold(0.0, f64::max)),
    }))
}

fn interp_cmd(m: &Manifold, cfg: &Config, out: &mut Output) -> Result<Value, CliError> {
    let family = build_family(m, cfg, out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &l in &cfg.bandwidths {
        let basis = eigenbasis(m, l)?;
        let points = family.points(l)?;
        let coeffs = DVector::from_iterator(basis.len(), (0..basis.len()).map(|_| StandardNormal.sample(&mut rng)));
        let values = basis.evaluation_matrix(points) * &coeffs;
        let itp = out.stage(&format!("interpolate L={l}"), || {
            min_norm_interpolant(&basis, points, values.as_slice())
        })?;
        let err = itp
            .basis_coefficients
            .iter()
            .zip(coeffs.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(itp.residual);
        rows.push(vec![
            Cell::from(l),
            Cell::from(basis.len()),
            Cell::from(points.len()),
            Cell::from(err),
            Cell::from(itp.residual),
            Cell::from(itp.norm_squared),
            Cell::from(itp.degenerate),
        ]);
    }
    out.csv(
        "interp.csv",
        &header(&["L", "k_L", "m_L", "coefficient_error", "residual", "norm_squared", "degenerate"]),
        rows,
    );
    Ok(json!({"manifold": m.to_string(), "max_residual": num(worst)}))
}

fn concentration_cmd(m: &Manifold, cfg: &Config, out: &mut Output) -> Result<Value, CliError> {
    let family = build_family(m, cfg, out)?;
    let options = PlateauOptions {
        eps: cfg.eps,
        gammas: cfg.gammas.clone(),
        deltas: cfg.deltas.clone(),
        t: cfg.t,
        rho: cfg.rho,
        center: None,
    };
    let report = out.stage("plateau scan", || {
        plateau_scan(m, Some(&family), &cfg.bandwidths, &cfg.radii, &options)
    })?;
    let mut cols = vec!["L".to_string(), "R".into(), "k_L".into(), "T1".into(), "T2".into(), "trace_ratio".into(), "gap".into()];
    cols.extend(cfg.gammas.iter().map(|g| format!("count_above_{g}")));
    cols.extend(["t".to_string(), "N_plus".into(), "n_minus".into()]);
    cols.extend(cfg.deltas.iter().map(|d| format!("dilated_count_{d}")));
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![
                Cell::from(r.bandwidth),
                Cell::from(r.r),
                Cell::from(r.k_l),
                Cell::from(r.t1),
                Cell::from(r.t2),
                Cell::from(r.trace_ratio),
                Cell::from(r.gap()),
            ];
            row.extend(r.counts.iter().map(|&c| Cell::from(c)));
            match &r.landau {
                Some(lc) => {
                    row.extend([Cell::from(lc.t), Cell::from(lc.n_plus), Cell::from(lc.n_minus)]);
                    row.extend(lc.dilated_counts.iter().map(|&c| Cell::from(c)));
                }
                None => row.extend((0..3 + cfg.deltas.len()).map(|_| Cell::from(""))),
            }
            row
        })
        .collect();
    out.csv("plateau.csv", &cols, rows);
    out.csv(
        "gap_fits.csv",
        &header(&["L", "exponent", "constant", "spread"]),
        report
            .fits
            .iter()
            .map(|f| vec![Cell::from(f.bandwidth), Cell::from(f.exponent), Cell::from(f.constant), Cell::from(f.spread)])
            .collect(),
    );
    let l = cfg.bandwidths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r = cfg.radii.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let eig = out.stage("spectrum", || -> Result<Vec<f64>, CliError> {
        let basis = eigenbasis(m, l)?;
        let region = Region::ball(m.reference_point(), r / l);
        let resolution = BallResolution {
            radial: cfg.ball_radial,
            angular: cfg.ball_angular,
        };
        let d = classical_matrix_with(&basis, &region, resolution)?;
        let beta = cutoff_weights(&basis, cfg.eps);
        Ok(spectrum(&modify(&d, &beta))?.eigenvalues)
    })?;
    out.plot("eigenvalues.txt", eig.iter().enumerate().map(|(i, &x)| (i as f64, x)));
    let ratios: Vec<f64> = report.rows.iter().map(|r| r.trace_ratio).collect();
    Ok(json!({
        "manifold": m.to_string(),
        "eps": num(cfg.eps),
        "trace_ratio_min": num(ratios.iter().copied().fold(f64::INFINITY, f64::min)),
        "trace_ratio_max": num(ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        "gap_spreads": nums(&report.fits.iter().map(|f| f.spread).collect::<Vec<_>>()),
        "spectrum_L": num(l),
        "spectrum_R": num(r),
    }))
}

fn density_cmd(m: &Manifold, cfg: &Config, out: &mut Output) -> Result<Value, CliError> {
    let family = build_family(m, cfg, out)?;
    let centers = default_probe_centers(&family);
    let report = out.stage("density", || density_estimate(&family, &cfg.bandwidths, &cfg.radii, &centers))?;
    out.csv(
        "density.csv",
        &header(&["center", "R", "L", "ratio"]),
        report
            .cells
            .iter()
            .map(|c| vec![Cell::from(c.center), Cell::from(c.r), Cell::from(c.bandwidth), Cell::from(c.ratio)])
            .collect(),
    );
    let r = cfg.radii.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut by_l = Vec::new();
    for &l in &cfg.bandwidths {
        let vals: Vec<f64> = report.cells.iter().filter(|c| c.r == r && c.bandwidth == l).map(|c| c.ratio).collect();
        by_l.push((l, vals.iter().sum::<f64>() / vals.len() as f64));
    }
    out.plot("mean_ratio.txt", by_l);
    let masses = cfg
        .bandwidths
        .iter()
        .map(|&l| counting_mass(&family, l))
        .collect::<bandlab::Result<Vec<_>>>()?;
    Ok(json!({
        "manifold": m.to_string(),
        "provenance": family.provenance().to_string(),
        "D_minus": num(report.dminus),
        "D_plus": num(report.dplus),
        "D_minus_r_first": num(report.dminus_r_first),
        "D_plus_r_first": num(report.dplus_r_first),
        "counting_mass": nums(&masses),
    }))
}

fn fekete_rows(results: &[FeketeResult]) -> Vec<Vec<Cell>> {
    results
        .iter()
        .map(|r| {
            vec![
                Cell::from(r.bandwidth),
                Cell::from(r.nodes.len()),
                Cell::from(r.candidate_count),
                Cell::from(r.log_det),
                Cell::from(r.exchange_passes),
                Cell::from(r.swaps.len()),
                Cell::from(r.separation),
                Cell::from(r.lagrange_sup),
            ]
        })
        .collect()
}

fn fekete_cmd(m: &Manifold, cfg: &Config, out: &mut Output) -> Result<Value, CliError> {
    let mut needed = cfg.bandwidths.clone();
    if cfg.dilation > 0.0 {
        for &l in &cfg.bandwidths {
            needed.push(dilated_bandwidth(l, cfg.dilation));
            needed.push(dilated_bandwidth(l, -cfg.dilation));
        }
    }
    needed.sort_by(f64::total_cmp);
    needed.dedup();
    let (family, results) = out.stage("fekete", || fekete_family(m, &needed, &fekete_options(cfg)))?;
    out.csv(
        "fekete.csv",
        &header(&["L", "k_L", "candidates", "log_det", "exchange_passes", "swaps", "separation", "lagrange_sup"]),
        fekete_rows(&results),
    );
    out.text("nodes.txt", format_family(&family));
    if let Some(r) = results.last() {
        out.plot("log_det_history.txt", r.log_det_history.iter().enumerate().map(|(i, &v)| (i as f64, v)));
    }
    let mut summary = json!({
        "manifold": m.to_string(),
        "candidate_set": results.first().map(|r| r.candidate_set.clone()),
        "separation_min": num(results.iter().map(|r| r.separation).fold(f64::INFINITY, f64::min)),
        "lagrange_sup_max": num(results.iter().map(|r| r.lagrange_sup).fold(0.0, f64::max)),
    });
    if cfg.dilation > 0.0 {
        let rows = out.stage("dilation", || dilated_family_check(&family, &cfg.bandwidths, cfg.dilation))?;
        out.csv(
            "dilated.csv",
            &header(&["L", "m_plus", "A", "B", "m_minus", "riesz_a", "riesz_b"]),
            rows.iter()
                .map(|r| {
                    vec![
                        Cell::from(r.bandwidth),
                        Cell::from(r.m_plus),
                        Cell::from(r.frame.lower),
                        Cell::from(r.frame.upper),
                        Cell::from(r.m_minus),
                        Cell::from(r.riesz.lower),
                        Cell::from(r.riesz.upper),
                    ]
                })
                .collect(),
        );
        summary["dilated_min_A"] = num(rows.iter().map(|r| r.frame.lower).fold(f64::INFINITY, f64::min));
        summary["dilated_min_a"] = num(rows.iter().map(|r| r.riesz.lower).fold(f64::INFINITY, f64::min));
    }
    Ok(summary)
}

fn equidist_cmd(m: &Manifold, cfg: &Config, out: &mut Output) -> Result<Value, CliError> {
    let (family, results) = out.stage("fekete", || fekete_family(m, &cfg.bandwidths, &fekete_options(cfg)))?;
    let panel = default_function_panel(m)?;
    let caps = default_cap_panel(m);
    let rows = out.stage("equidistribution", || equidistribution_test(&family, &cfg.bandwidths, &caps, &panel))?;
    let mut cols = header(&["L", "discrepancy"]);
    cols.extend((1..=panel.len()).map(|i| format!("moment_err_{i}")));
    cols.push("mass_error".into());
    out.csv(
        "equidist.csv",
        &cols,
        rows.iter()
            .map(|r| {
                let mut row = vec![Cell::from(r.bandwidth), Cell::from(r.discrepancy)];
                row.extend(r.moment_errors.iter().map(|&e| Cell::from(e)));
                row.push(Cell::from(r.mass_error));
                row
            })
            .collect(),
    );
    out.csv(
        "fekete.csv",
        &header(&["L", "k_L", "candidates", "log_det", "exchange_passes", "swaps", "separation", "lagrange_sup"]),
        fekete_rows(&results),
    );
    out.text("nodes.txt", format_family(&family));
    out.plot("discrepancy.txt", rows.iter().map(|r| (r.bandwidth, r.discrepancy)));
    Ok(json!({
        "manifold": m.to_string(),
        "panel_size": panel.len(),
        "caps": caps.len(),
        "discrepancy": nums(&rows.iter().map(|r| r.discrepancy).collect::<Vec<_>>()),
        "max_mass_error": num(rows.iter().map(|r| r.mass_error).fold(0.0, f64::max)),
    }))
}

fn admissible_cmd(m: &Manifold, cfg: &Config, out: &mut Output) -> Result<Value, CliError> {
    let grid = cfg.c_grid();
    let mut rows = Vec::new();
    let mut levels = Vec::new();
    let mut last = Value::Null;
    for &l in &cfg.bandwidths {
        let rep = out.stage(&format!("product L={l}"), || {
            product_property_check(m, l, cfg.eps, &grid, cfg.samples, cfg.seed)
        })?;
        for &(c, res) in &rep.residuals {
            rows.push(vec![Cell::from(l), Cell::from(c), Cell::from(res)]);
        }
        last = rep.constant.map_or(Value::Null, num);
        levels.push(json!({"L": num(l), "C": last}));
        if l == cfg.bandwidths[cfg.bandwidths.len() - 1] {
            out.plot("residuals.txt", rep.residuals.iter().copied());
        }
    }
    out.csv("admissible.csv", &header(&["L", "C", "residual"]), rows);
    Ok(json!({
        "manifold": m.to_string(),
        "eps": num(cfg.eps),
        "C": last,
        "levels": levels,
    }))
}
