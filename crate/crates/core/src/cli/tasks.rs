use faer::{c64, Mat};
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{RunConfig, Task};
use super::output::{complex, float, opt_float, Sink};
use crate::discretize::{self, convergence_gap, pt_residual, Discretization, DiscretizedOperator};
use crate::eigensolve::{self, parity_classify, reality_verdict_values};
use crate::linalg::{self, frobenius};
use crate::perturbation::{
    coefficient_drift, locate_exceptional, perturbation_matrix, rspe_coefficients, rspe_reality_check,
    track_branches, TrackOptions, ROUNDOFF_FACTOR,
};
use crate::potentials::{confinement_audit, parity_audit, theorem22_applicable, OperatorFamily, SchrodingerFamily};
use crate::stability::{
    distance_sweep, energy_constant, numerical_range_boundary, spectral_projection_op, stability_check,
    theorem21_bound, Contour, Restriction, Side,
};
use crate::verify::{verify_all, SuiteOptions};
use crate::Result;

/// Eigenvalues compared against the coarse discretization when none is configured.
const DEFAULT_K: usize = 5;
const DEFAULT_TOL: f64 = 1e-8;
const PARITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct ErrorScale {
    pub value: f64,
    /// `roundoff_floor`, `convergence_gap` or `not_applicable`.
    pub source: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub value: Value,
    pub tolerance: Option<f64>,
}

impl Verdict {
    fn new(name: impl Into<String>, value: impl Serialize, tolerance: Option<f64>) -> Self {
        Verdict { name: name.into(), value: json!(value), tolerance }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub task: &'static str,
    pub family: String,
    pub config: Value,
    pub seed: u64,
    pub discretization: Option<Discretization>,
    pub coarse_discretization: Option<Discretization>,
    pub error_scale: ErrorScale,
    pub verdicts: Vec<Verdict>,
    pub results: Value,
    pub warnings: Vec<String>,
    /// Task-level failure that still produced a report.
    pub error: Option<String>,
    pub files: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    family: OperatorFamily,
    disc: Option<Discretization>,
    seed: u64,
    sink: Sink,
    verdicts: Vec<Verdict>,
    warnings: Vec<String>,
    error_scale: ErrorScale,
    error: Option<String>,
}

impl Ctx<'_> {
    fn build(&mut self, eps: f64) -> Result<DiscretizedOperator> {
        let op = discretize::build(&self.family, eps, self.disc.as_ref())?;
        self.warnings.extend(op.warnings.iter().cloned());
        Ok(op)
    }

    fn roundoff(&mut self, op: &DiscretizedOperator) -> f64 {
        let v = ROUNDOFF_FACTOR * f64::EPSILON * frobenius(op.matrix.as_ref());
        self.error_scale = ErrorScale { value: v, source: "roundoff_floor" };
        v
    }

    /// Roundoff floor, raised to the cross-resolution gap when a coarse
    /// discretization is configured.
    fn error_estimate(&mut self, op: &DiscretizedOperator, k: usize) -> Result<f64> {
        let floor = self.roundoff(op);
        if let (Some(fine), Some(coarse)) = (self.disc.as_ref(), self.cfg.coarse_discretization.as_ref()) {
            let gap = convergence_gap(&self.family, op.epsilon, fine, coarse, k)?;
            if !gap.ambiguous.is_empty() {
                self.warnings.push(format!("ambiguous cross-resolution pairing for indices {:?}", gap.ambiguous));
            }
            if gap.error_scale > floor {
                self.error_scale = ErrorScale { value: gap.error_scale, source: "convergence_gap" };
            }
        }
        Ok(self.error_scale.value)
    }
}

/// Runs one configured task, writing its files under `out_dir`. Returns the
/// report; `report.error` is set for task-level failures that still produced output.
pub fn run(cfg: &RunConfig, raw: &Value, out_dir: &std::path::Path, seed_override: Option<u64>) -> Result<RunReport> {
    let family = cfg.family()?;
    let disc = cfg.discretization(&family)?;
    let seed = seed_override.or(cfg.seed).unwrap_or(0);
    let prefix = cfg.output.clone().unwrap_or_else(|| cfg.task.as_str().to_string());
    let mut ctx = Ctx {
        cfg,
        family,
        disc,
        seed,
        sink: Sink::new(out_dir, &prefix)?,
        verdicts: Vec::new(),
        warnings: Vec::new(),
        error_scale: ErrorScale { value: 0.0, source: "not_applicable" },
        error: None,
    };
    let results = match cfg.task {
        Task::Spectrum => spectrum(&mut ctx)?,
        Task::Track => track(&mut ctx)?,
        Task::Rspe => rspe(&mut ctx)?,
        Task::Project => project(&mut ctx)?,
        Task::Stability => stability(&mut ctx)?,
        Task::Numrange => numrange(&mut ctx)?,
        Task::Verify => verify(&mut ctx)?,
        Task::Audit => audit(&mut ctx)?,
    };
    ctx.warnings.dedup();
    let mut report = RunReport {
        task: cfg.task.as_str(),
        family: ctx.family.label().to_string(),
        config: raw.clone(),
        seed,
        discretization: ctx.disc,
        coarse_discretization: cfg.coarse_discretization,
        error_scale: ctx.error_scale.clone(),
        verdicts: ctx.verdicts,
        results,
        warnings: ctx.warnings,
        error: ctx.error,
        files: Vec::new(),
    };
    report.files = ctx.sink.written.clone();
    ctx.sink.json("report.json", &report)?;
    Ok(report)
}

fn spectrum(ctx: &mut Ctx) -> Result<Value> {
    let eps = ctx.cfg.single_epsilon()?;
    let op = ctx.build(eps)?;
    let spec = eigensolve::eig(&op)?;
    let k = ctx.cfg.k.unwrap_or(DEFAULT_K).min(spec.len());
    let err = ctx.error_estimate(&op, k)?;
    let values = spec.values();
    let reality = reality_verdict_values(&values, err);
    let mut rows = Vec::with_capacity(spec.len());
    for (i, p) in spec.pairs.iter().enumerate() {
        let parity = parity_classify(&p.right_vector, &op.parity, PARITY_TOL);
        let [re, im] = complex(p.value);
        rows.push(vec![
            i.to_string(),
            re,
            im,
            float(p.residual),
            reality.verdicts[i].as_str().to_string(),
            format!("{:?}", parity.class).to_lowercase(),
            float(parity.score),
        ]);
    }
    ctx.sink.csv("spectrum.csv", &["index", "re", "im", "residual", "verdict", "parity", "parity_score"], &rows)?;
    let pt = op.pt_residual();
    ctx.verdicts.push(Verdict::new("all_real", reality.all_real(), Some(err)));
    ctx.verdicts.push(Verdict::new("conjugate_pairs", reality.pair_count(), Some(err)));
    ctx.verdicts.push(Verdict::new("pt_residual_small", pt <= 1e-12, Some(1e-12)));
    Ok(json!({
        "epsilon": eps,
        "size": op.size(),
        "pt_residual": pt,
        "max_residual": spec.max_residual(),
        "lowest": values.iter().take(k).map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "conjugate_closure_defect": eigensolve::conjugate_closure_defect(&values),
    }))
}

fn track(ctx: &mut Ctx) -> Result<Value> {
    let grid = ctx.cfg.epsilon_grid(&ctx.family)?;
    let dim = discretize::build(&ctx.family, 0.0, ctx.disc.as_ref())?.size();
    let k = ctx.cfg.k.unwrap_or(DEFAULT_K).min(dim);
    let opts = TrackOptions { coarse: ctx.cfg.coarse_discretization, ..TrackOptions::default() };
    let report = track_branches(&ctx.family, &grid, ctx.disc.as_ref(), k, &opts)?;
    let mut rows = Vec::new();
    for b in &report.branches {
        for i in 0..b.values.len() {
            let [re, im] = complex(b.values[i]);
            rows.push(vec![
                float(b.epsilon_grid[i]),
                b.id.to_string(),
                re,
                im,
                float(b.residuals[i]),
                b.verdicts[i].as_str().to_string(),
                b.node_flags[i].label(),
            ]);
        }
    }
    ctx.sink.csv("branches.csv", &["epsilon", "branch_id", "re", "im", "residual", "verdict", "flags"], &rows)?;
    let max_err = report.error_bounds.iter().copied().fold(0.0, f64::max);
    ctx.error_scale = ErrorScale {
        value: max_err,
        source: if ctx.cfg.coarse_discretization.is_some() { "convergence_gap" } else { "roundoff_floor" },
    };
    for b in &report.branches {
        ctx.verdicts.push(Verdict::new(format!("branch{}_reality_window", b.id), b.reality_window, Some(max_err)));
    }
    let branches: Vec<Value> = report
        .branches
        .iter()
        .map(|b| {
            json!({
                "id": b.id,
                "nodes": b.values.len(),
                "reality_window": b.reality_window,
                "flags": b.flags.label(),
                "min_match_confidence": b.match_confidence.iter().copied().fold(1.0, f64::min),
            })
        })
        .collect();
    let mut out = json!({
        "k": k,
        "grid_nodes": report.epsilon_grid.len(),
        "refinement_nodes": report.epsilon_grid.len() - grid.len(),
        "branches": branches,
        "entrants": report.entrants,
        "max_error_bound": max_err,
        "max_closure_defect": report.closure_defects.iter().copied().fold(0.0, f64::max),
    });
    if let Some([lo, hi]) = ctx.cfg.interval {
        let pair = ctx.cfg.pair.unwrap_or([0, 1]);
        let tol = ctx.cfg.tol.unwrap_or(1e-10);
        match locate_exceptional(&ctx.family, ctx.disc.as_ref(), pair, lo, hi, tol) {
            Ok(p) => {
                ctx.verdicts.push(Verdict::new("transition_kind", p.kind, Some(crate::perturbation::COALESCENCE_THRESHOLD)));
                out["exceptional_point"] = json!(p);
            }
            Err(e) => {
                out["exceptional_point"] = Value::Null;
                ctx.error = Some(e.to_string());
            }
        }
    }
    Ok(out)
}

fn rspe(ctx: &mut Ctx) -> Result<Value> {
    let e = ctx.cfg.require_e()?;
    let order = ctx.cfg.order.unwrap_or(4);
    let tol = ctx.cfg.tol.unwrap_or(DEFAULT_TOL);
    let op = ctx.build(0.0)?;
    let w = perturbation_matrix(&ctx.family, ctx.disc.as_ref())?;
    let series = rspe_coefficients(&op, w.as_ref(), e, order)?;
    ctx.roundoff(&op);
    let mut drift = None;
    if let Some(coarse) = ctx.cfg.coarse_discretization {
        let cop = discretize::build(&ctx.family, 0.0, Some(&coarse))?;
        let cw = perturbation_matrix(&ctx.family, Some(&coarse))?;
        let cs = rspe_coefficients(&cop, cw.as_ref(), series.base_eigenvalue, order)?;
        let d = coefficient_drift(&series, &cs);
        ctx.error_scale = ErrorScale { value: d, source: "convergence_gap" };
        drift = Some(d);
    }
    let tolerance = tol.max(drift.unwrap_or(0.0));
    let check = rspe_reality_check(&series, tolerance);
    ctx.warnings.extend(series.warnings.iter().cloned());
    ctx.verdicts.push(Verdict::new("series", check.verdict.as_str(), Some(check.tolerance)));
    let a: Vec<[f64; 2]> = series.all_coefficients().iter().map(|z| [z.re, z.im]).collect();
    let body = json!({
        "a": a,
        "growth_ratios": check.growth_ratios,
        "verdict": check.verdict.as_str(),
        "tolerance": check.tolerance,
        "max_imaginary": check.max_imaginary,
        "ratios_increasing": check.ratios_increasing,
        "order": series.order,
        "requested_order": series.requested_order,
        "biorthogonality": series.biorthogonality,
        "drift": drift,
    });
    ctx.sink.json("rspe.json", &body)?;
    Ok(body)
}

fn project(ctx: &mut Ctx) -> Result<Value> {
    let e = ctx.cfg.require_e()?;
    let r = ctx.cfg.r.ok_or_else(|| crate::Error::Config("task `project` needs `r`".into()))?;
    let eps = ctx.cfg.single_epsilon()?;
    let op = ctx.build(eps)?;
    ctx.roundoff(&op);
    let res = spectral_projection_op(&op, &Contour::new(e, r, 64)?)?;
    ctx.verdicts.push(Verdict::new("rank", res.rank, None));
    ctx.verdicts.push(Verdict::new("idempotent", res.idempotency_defect <= 1e-8, Some(1e-8)));
    Ok(json!({
        "epsilon": eps,
        "center": [e.re, e.im],
        "radius": r,
        "rank": res.rank,
        "singular_values": res.singular_values,
        "idempotency_defect": res.idempotency_defect,
        "quadrature_estimate": res.quadrature_estimate,
        "n_nodes": res.n_nodes,
        "enclosed": res.enclosed,
    }))
}

fn stability(ctx: &mut Ctx) -> Result<Value> {
    let e = ctx.cfg.require_e()?;
    let r = ctx.cfg.r.ok_or_else(|| crate::Error::Config("task `stability` needs `r`".into()))?;
    let eps = ctx
        .cfg
        .epsilons
        .clone()
        .ok_or_else(|| crate::Error::Config("task `stability` needs `epsilons`".into()))?;
    let report = stability_check(&ctx.family, e, r, &eps, ctx.disc.as_ref())?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            vec![
                float(row.epsilon),
                row.rank.map(|x| x.to_string()).unwrap_or_default(),
                opt_float(row.proj_diff_norm),
                opt_float(row.idempotency_defect),
                opt_float(row.quadrature_estimate),
                row.status.to_string(),
                row.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    ctx.sink.csv(
        "stability.csv",
        &["epsilon", "rank", "proj_diff_norm", "idempotency_defect", "quadrature_estimate", "status", "error"],
        &rows,
    )?;
    ctx.error_scale = ErrorScale { value: report.noise_floor, source: "quadrature_estimate" };
    ctx.verdicts.push(Verdict::new("stability", report.verdict.as_str(), Some(report.noise_floor)));
    ctx.sink.json("stability.json", &report)?;
    Ok(json!({ "rank0": report.rank0, "verdict": report.verdict.as_str(), "decay_ratio": report.decay_ratio }))
}

fn numrange(ctx: &mut Ctx) -> Result<Value> {
    let eps = ctx.cfg.single_epsilon()?;
    let op = ctx.build(eps)?;
    let err = ctx.roundoff(&op);
    let n_angles = ctx.cfg.n_angles.unwrap_or(128);
    let restriction = ctx.cfg.restriction.map(|r| r.restriction()).unwrap_or(Restriction::Full);
    let b = numerical_range_boundary(&op, n_angles, restriction)?;
    let rows: Vec<Vec<String>> = (0..b.angles.len())
        .map(|i| {
            let [re, im] = complex(b.support_points[i]);
            vec![float(b.angles[i]), float(b.support_values[i]), re, im]
        })
        .collect();
    ctx.sink.csv("numrange.csv", &["angle", "support_value", "re", "im"], &rows)?;
    let convex = b.is_convex(1e-9);
    ctx.verdicts.push(Verdict::new("convex", convex, Some(1e-9)));
    let mut out = json!({
        "epsilon": eps,
        "restriction": restriction,
        "subspace_dim": b.subspace_dim,
        "min_real_part": b.min_real_part(),
    });
    if restriction == Restriction::Full && op.size() <= linalg::DENSE_SVD_LIMIT {
        let values = eigensolve::eigenvalues(&op)?;
        let worst = values.iter().map(|&z| b.outer_distance(z)).fold(0.0, f64::max);
        let tol = 1e-9 * values.iter().map(|z| z.norm()).fold(1.0, f64::max) + err;
        ctx.verdicts.push(Verdict::new("spectrum_inside", worst <= tol, Some(tol)));
        out["max_eigenvalue_outside"] = json!(worst);
    }
    if let Some(cuts) = &ctx.cfg.cuts {
        let z = ctx.cfg.z.map(|v| v.value()).unwrap_or(c64::new(0.0, 0.0));
        let side = ctx.cfg.side.map(|s| s.side()).unwrap_or(Side::Both);
        let sweep = distance_sweep(&op, z, cuts, side)?;
        let rows: Vec<Vec<String>> =
            sweep.cuts.iter().zip(&sweep.bounds).map(|(c, d)| vec![float(*c), float(*d)]).collect();
        ctx.sink.csv("distance.csv", &["cut", "distance_bound"], &rows)?;
        ctx.verdicts.push(Verdict::new("distance_nondecreasing", sweep.nondecreasing, None));
        out["distance_sweep"] = json!(sweep);
    }
    Ok(out)
}

fn verify(ctx: &mut Ctx) -> Result<Value> {
    let report = verify_all(&SuiteOptions { only: ctx.cfg.only.clone(), inject_pt_sign_error: false });
    for o in &report.outcomes {
        eprintln!("{}", o.line());
        ctx.verdicts.push(Verdict::new(format!("criterion{}", o.id), o.passed, None));
    }
    ctx.warnings.extend(report.warnings.iter().cloned());
    if !report.all_passed() {
        ctx.error = Some("acceptance criteria failed".into());
    }
    // Timings stay out of the files so that reruns are byte-identical.
    let outcomes: Vec<Value> = report
        .outcomes
        .iter()
        .map(|o| json!({ "id": o.id, "title": o.title, "passed": o.passed, "measured": o.measured }))
        .collect();
    Ok(json!({ "outcomes": outcomes }))
}

fn audit(ctx: &mut Ctx) -> Result<Value> {
    let eps = ctx.cfg.single_epsilon()?;
    let mut out = json!({ "epsilon": eps });
    let op = ctx.build(eps)?;
    ctx.roundoff(&op);
    let pt = pt_residual(op.matrix.as_ref(), &op.parity);
    out["pt_residual"] = json!(pt);
    if ctx.family.is_pt_symmetric() {
        ctx.verdicts.push(Verdict::new("pt_symmetric", pt <= 1e-12, Some(1e-12)));
    } else {
        ctx.warnings.push("family is not PT-symmetric; the PT residual is informational".into());
    }
    match ctx.family.variant.clone() {
        crate::potentials::Variant::Schrodinger(sch) => {
            if let SchrodingerFamily::Affine { v, w } = &sch {
                out["parity_v"] = json!(parity_audit(v, 200)?);
                out["parity_w"] = json!(parity_audit(w, 200)?);
                match theorem22_applicable(v, w) {
                    Ok(r) => {
                        ctx.verdicts.push(Verdict::new("reality_theorem_applicable", r.applicable, None));
                        out["reality_theorem"] = json!(r);
                    }
                    Err(e) => out["reality_theorem"] = json!({ "applicable": false, "violation": e.to_string() }),
                }
            }
            let x_max = op.grid().map(|g| g.half_width).unwrap_or(10.0);
            let conf = confinement_audit(&ctx.family, eps, x_max, 200)?;
            ctx.verdicts.push(Verdict::new("confinement_monotone", conf.monotone_growth, Some(1e-12)));
            out["confinement"] = json!(conf);
            if op.grid().is_some() {
                let ec = energy_constant(&op, 200, ctx.seed)?;
                out["energy_constant"] = json!(ec);
            }
        }
        crate::potentials::Variant::Matrix(m) => {
            // H(ε) = H0 + εW with W = i·W_s, W_s the symmetric factor of the bound.
            let i = c64::new(0.0, 1.0);
            let ws = Mat::from_fn(m.dim(), m.dim(), |r, c| -i * m.w[(r, c)]);
            match theorem21_bound(m.h0.as_ref(), ws.as_ref(), m.p.as_ref()) {
                Ok(b) => {
                    ctx.verdicts.push(Verdict::new("parity_ok", b.parity_ok, None));
                    ctx.verdicts.push(Verdict::new("reality_bound", b.g_bound, None));
                    out["reality_bound"] = json!(b);
                }
                Err(e) => out["reality_bound"] = json!({ "violation": e.to_string() }),
            }
        }
    }
    if let (Some(fine), Some(coarse)) = (ctx.disc, ctx.cfg.coarse_discretization) {
        let k = ctx.cfg.k.unwrap_or(DEFAULT_K);
        let gap = convergence_gap(&ctx.family, eps, &fine, &coarse, k)?;
        ctx.error_scale = ErrorScale { value: gap.error_scale, source: "convergence_gap" };
        out["convergence_gap"] = json!({ "gaps": gap.gaps, "ambiguous": gap.ambiguous, "error_scale": gap.error_scale });
    }
    Ok(out)
}
