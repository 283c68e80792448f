//! Command implementations. Each returns the process exit code:
//! 0 pass, 1 quantitative fail, 2 usage/config error, 3 numeric failure
//! (the error-to-code mapping happens in `main`).

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;

use diskray::bundle::BundleGrid;
use diskray::io::{self, Provenance, RayManifestEntry};
use diskray::metric::MetricField;
use diskray::transform::{
    assemble_forward, inflow_samples, xray, ForwardBasis, PixelBasis, Target, TransformKind,
};
use diskray::verify::{
    self, simplicity_report, tolerances, MollifyStudy, SimplicityOptions, SimplicityReport,
    VerificationReport,
};
use diskray::{Error, Result};

use crate::config::ExperimentConfig;

pub struct Context {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub out_dir: PathBuf,
    pub golden: Option<String>,
}

impl Context {
    pub fn new(config: ExperimentConfig, golden: Option<String>) -> Result<Self> {
        let out_dir = PathBuf::from(&config.out);
        fs::create_dir_all(&out_dir)?;
        let provenance = Provenance::new(config.hash());
        Ok(Context {
            config,
            provenance,
            out_dir,
            golden,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<()> {
        #[derive(serde::Serialize)]
        struct Wrapper<'a, T> {
            config_hash: &'a str,
            version: &'a str,
            #[serde(flatten)]
            payload: &'a T,
        }
        let text = serde_json::to_string_pretty(&Wrapper {
            config_hash: &self.provenance.config_hash,
            version: &self.provenance.version,
            payload: value,
        })?;
        fs::write(self.path(name), text + "\n")?;
        Ok(())
    }
}

/// Half resolution of the configured grid, floored at the minimum.
fn half_grid(grid: (usize, usize, usize)) -> (usize, usize, usize) {
    (
        (grid.0 / 2).max(8),
        (grid.1 / 2).max(8),
        (grid.2 / 2).max(8),
    )
}

fn is_flat(metric: &MetricField) -> bool {
    metric.id() == "euclidean"
}

pub fn cmd_simplicity(ctx: &Context) -> Result<i32> {
    let metric = ctx.config.build_metric()?;
    let opts = SimplicityOptions {
        b1_rays: ctx.config.rays,
        seed: ctx.config.seed,
        ..Default::default()
    };
    let report = simplicity_report(&metric, &opts)?;
    ctx.write_json("simplicity.json", &report)?;
    fs::write(ctx.path("simplicity.txt"), simplicity_text(&report, ctx))?;
    if let Some(golden) = &ctx.golden {
        if let Some(code) = compare_simplicity_golden(golden, &report)? {
            return Ok(code);
        }
    }
    println!("{}", simplicity_text(&report, ctx));
    Ok(if report.all_pass { 0 } else { 1 })
}

fn simplicity_text(report: &SimplicityReport, ctx: &Context) -> String {
    let line = |name: &str, c: &diskray::verify::ConditionReport| {
        format!(
            "{:<4} {:<12} value {:>12.5e}  {}\n",
            name,
            format!("{:?}", c.verdict),
            c.value,
            c.detail
        )
    };
    let mut out = format!(
        "simplicity report for {} (config {})\n",
        report.metric_id, ctx.provenance.config_hash
    );
    out += &line("B1", &report.b1);
    out += &line("B2", &report.b2);
    out += &line("B3", &report.b3);
    out += &format!(
        "conjugate distance: {}\n",
        report
            .conjugate_distance
            .map_or("none detected".to_string(), |d| format!("{d:.5}")),
    );
    out += &format!(
        "boundary curvature range: [{:.4e}, {:.4e}]\n",
        report.sff_min, report.sff_max
    );
    out
}

fn compare_simplicity_golden(path: &str, report: &SimplicityReport) -> Result<Option<i32>> {
    if !Path::new(path).exists() {
        fs::write(path, serde_json::to_string_pretty(report)? + "\n")?;
        eprintln!("golden baseline created at {path}");
        return Ok(None);
    }
    let baseline: SimplicityReport = serde_json::from_str(&fs::read_to_string(path)?)?;
    let same = baseline.b1.verdict == report.b1.verdict
        && baseline.b2.verdict == report.b2.verdict
        && baseline.b3.verdict == report.b3.verdict;
    if !same {
        eprintln!("golden mismatch: verdicts changed against {path}");
        return Ok(Some(1));
    }
    Ok(None)
}

/// Verification checks runnable from the command line.
pub const ALL_CHECKS: [&str; 5] = ["pestov", "commutator", "cancellation", "santalo", "mollify"];

#[derive(serde::Serialize)]
struct VerifyOutput {
    reports: Vec<VerificationReport>,
    mollify: Option<MollifyStudy>,
}

pub fn cmd_verify(ctx: &Context, checks: &[String]) -> Result<i32> {
    let metric = ctx.config.build_metric()?;
    let requested: Vec<&str> = if checks.is_empty() {
        ALL_CHECKS.to_vec()
    } else {
        checks.iter().map(|s| s.as_str()).collect()
    };
    for c in &requested {
        if !ALL_CHECKS.contains(c) {
            return Err(Error::usage(format!(
                "unknown check '{c}'; expected one of {ALL_CHECKS:?}"
            )));
        }
    }
    let grid_res = ctx.config.grid;
    let resolutions = [half_grid(grid_res), grid_res];
    let mut reports = Vec::new();
    let mut mollify = None;

    for check in &requested {
        match *check {
            "pestov" => {
                let tol = if is_flat(&metric) {
                    tolerances::PESTOV_REL_TOL_FLAT
                } else {
                    tolerances::PESTOV_REL_TOL_CURVED
                };
                reports.push(verify::pestov_residual(&metric, &resolutions, tol, |g| {
                    g.scalar_from_polar(true, |r, _, psi| (1.0 - r * r) * psi.sin())
                })?);
            }
            "commutator" => {
                let tol = if is_flat(&metric) {
                    tolerances::COMMUTATOR_REL_TOL_FLAT
                } else {
                    tolerances::COMMUTATOR_REL_TOL_ROUGH
                };
                reports.push(verify::commutator_check(
                    &metric,
                    &resolutions,
                    tol,
                    |g| {
                        g.scalar_from_polar(true, |r, phi, psi| {
                            (1.0 - r * r) * (0.7 + r * phi.cos() + psi.sin())
                        })
                    },
                    |g| {
                        g.section_from_fn(|x, v| {
                            (1.0 + 0.5 * x.x + 0.3 * x.y) * (0.8 + 0.4 * v.x) + 0.25 * v.x * v.y
                        })
                    },
                )?);
            }
            "cancellation" => {
                reports.push(verify::oneform_cancellation(
                    &metric,
                    &resolutions,
                    tolerances::CANCELLATION_REL_TOL_CLOSED,
                    |_| (1.0, 0.0),
                )?);
            }
            "santalo" => {
                let grid = BundleGrid::new(&metric, grid_res.0, grid_res.1, grid_res.2)?;
                let rays = inflow_samples(&metric, ctx.config.rays.0, ctx.config.rays.1)?;
                let field = grid.lift_scalar(false, |_| 1.0);
                reports.push(verify::santalo_check(
                    &metric,
                    &grid,
                    &rays,
                    &field,
                    tolerances::SANTALO_REL_TOL_CONST,
                )?);
            }
            "mollify" => {
                let study = verify::mollify_study(&metric, &ctx.config.alphas)?;
                write_mollify_csv(ctx, &study)?;
                mollify = Some(study);
            }
            _ => unreachable!(),
        }
    }

    let mut all_pass = reports.iter().all(|r| r.pass);
    if let Some(study) = &mollify {
        all_pass &= study.monotone;
    }
    let output = VerifyOutput {
        reports: reports.clone(),
        mollify: mollify.clone(),
    };
    ctx.write_json("verify.json", &output)?;
    let mut text = String::new();
    for r in &reports {
        text += &r.one_line();
        text.push('\n');
    }
    if let Some(study) = &mollify {
        text += &format!(
            "mollify study on {}: monotone decrease = {}\n",
            study.metric_id, study.monotone
        );
    }
    fs::write(ctx.path("verify.txt"), &text)?;
    print!("{text}");

    if let Some(golden) = &ctx.golden {
        if let Some(code) = compare_verify_golden(golden, &reports)? {
            return Ok(code);
        }
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn compare_verify_golden(path: &str, reports: &[VerificationReport]) -> Result<Option<i32>> {
    if !Path::new(path).exists() {
        fs::write(path, serde_json::to_string_pretty(reports)? + "\n")?;
        eprintln!("golden baseline created at {path}");
        return Ok(None);
    }
    let baseline: Vec<VerificationReport> = serde_json::from_str(&fs::read_to_string(path)?)?;
    for report in reports {
        let Some(base) = baseline.iter().find(|b| b.check_id == report.check_id) else {
            continue;
        };
        if (report.residual_rel - base.residual_rel).abs() > report.tolerance {
            eprintln!(
                "golden mismatch on {}: residual {:.3e} vs baseline {:.3e} (tol {:.1e})",
                report.check_id, report.residual_rel, base.residual_rel, report.tolerance
            );
            return Ok(Some(1));
        }
    }
    Ok(None)
}

fn write_mollify_csv(ctx: &Context, study: &MollifyStudy) -> Result<()> {
    let mut text = format!(
        "# config_hash={},version={}\n",
        ctx.provenance.config_hash, ctx.provenance.version
    );
    text += "alpha";
    for label in &study.norm_labels {
        text += &format!(",{label}");
    }
    text.push('\n');
    for (i, alpha) in study.alphas.iter().enumerate() {
        text += &format!("{alpha}");
        for v in &study.distances[i] {
            text += &format!(",{v}");
        }
        text.push('\n');
    }
    fs::write(ctx.path("mollify_study.csv"), text)?;
    Ok(())
}

/// The default scalar phantom: smooth, boundary-vanishing.
fn phantom(x: Vector2<f64>) -> f64 {
    1.0 - x.norm_squared()
}

pub fn cmd_transform(ctx: &Context, dump_rays: Option<usize>) -> Result<i32> {
    let metric = ctx.config.build_metric()?;
    let rays = inflow_samples(&metric, ctx.config.rays.0, ctx.config.rays.1)?;
    let values = xray(&metric, &Target::Scalar(&phantom), &rays)?;
    let data: Vec<f64> = values.iter().map(|v| v.value).collect();
    io::write_sinogram(ctx.path("sinogram.csv"), &rays, &data, &ctx.provenance)?;

    if let Some(n) = dump_rays {
        let opts = diskray::geodesic::IntegrationOptions::default();
        let mut manifest = Vec::new();
        for ray in rays.iter().take(n) {
            let path = diskray::geodesic::integrate_geodesic(&metric, ray.x, ray.v, &opts)?;
            let file = format!("ray_{:05}.csv", ray.ray_id);
            io::write_ray_dump(ctx.path(&file), &metric, &path, &ctx.provenance)?;
            manifest.push(RayManifestEntry {
                ray_id: ray.ray_id,
                x: [ray.x.x, ray.x.y],
                v: [ray.v.x, ray.v.y],
                status: format!("{:?}", path.status),
                tau: path.tau_plus,
                file,
            });
        }
        io::write_ray_manifest(ctx.path("rays.json"), &manifest, &ctx.provenance)?;
    }
    let dropped = values.iter().filter(|v| !v.exited).count();
    println!(
        "sinogram: {} rays ({} dropped) -> {}",
        rays.len(),
        dropped,
        ctx.path("sinogram.csv").display()
    );
    Ok(0)
}

#[derive(serde::Serialize)]
struct InvertSummary {
    rays: usize,
    columns: usize,
    lambda_reg: f64,
    relative_l2_error: f64,
    bound: f64,
    pass: bool,
}

pub fn cmd_invert(ctx: &Context) -> Result<i32> {
    let metric = ctx.config.build_metric()?;
    let rays = inflow_samples(&metric, ctx.config.rays.0, ctx.config.rays.1)?;
    let basis = PixelBasis::clipped(ctx.config.basis, ctx.config.min_coverage)?;
    let matrix = assemble_forward(
        &metric,
        &rays,
        &ForwardBasis::Pixel(&basis),
        TransformKind::Scalar,
    )?;
    io::write_matrix(
        ctx.path("forward.bin"),
        ctx.path("forward.json"),
        &matrix,
        &ctx.provenance,
    )?;
    let data: Vec<f64> = xray(&metric, &Target::Scalar(&phantom), &rays)?
        .iter()
        .map(|v| v.value)
        .collect();
    io::write_sinogram(ctx.path("sinogram.csv"), &rays, &data, &ctx.provenance)?;
    let coeffs = diskray::transform::reconstruct(&matrix, &data, ctx.config.lambda_reg)?;
    let truth = basis.project(phantom);
    let err = basis.relative_l2_error(&coeffs, &truth);

    let mut recon_csv = format!(
        "# config_hash={},version={}\ncell_x,cell_y,value,truth\n",
        ctx.provenance.config_hash, ctx.provenance.version
    );
    for col in 0..basis.len() {
        let c = basis.center(col);
        recon_csv += &format!("{},{},{},{}\n", c.x, c.y, coeffs[col], truth[col]);
    }
    fs::write(ctx.path("reconstruction.csv"), recon_csv)?;

    let summary = InvertSummary {
        rays: rays.len(),
        columns: basis.len(),
        lambda_reg: ctx.config.lambda_reg,
        relative_l2_error: err,
        bound: ctx.config.recon_error_bound,
        pass: err <= ctx.config.recon_error_bound,
    };
    ctx.write_json("invert.json", &summary)?;
    println!(
        "reconstruction error {:.3}% (bound {:.1}%) -> {}",
        100.0 * err,
        100.0 * ctx.config.recon_error_bound,
        if summary.pass { "pass" } else { "FAIL" }
    );
    Ok(if summary.pass { 0 } else { 1 })
}

pub fn cmd_mollify_study(ctx: &Context) -> Result<i32> {
    let metric = ctx.config.build_metric()?;
    let study = verify::mollify_study(&metric, &ctx.config.alphas)?;
    write_mollify_csv(ctx, &study)?;
    ctx.write_json("mollify_study.json", &study)?;
    println!(
        "mollify study on {}: monotone = {}",
        study.metric_id, study.monotone
    );
    Ok(if study.monotone { 0 } else { 1 })
}
