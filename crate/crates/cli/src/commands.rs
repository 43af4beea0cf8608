use rayon::prelude::*;
use serde_json::{json, Map, Value};

use qfim3d::beam::{numeric_overlap, AnalyticPsf, BeamSpec, Displacement, FdSteps, PsfFactory};
use qfim3d::fisher::{scaled_agreement, FisherMatrix};
use qfim3d::grid::{moments, GeneratorMoments};
use qfim3d::oracle::{
    default_steps, oracle_single_emitter, oracle_two_emitter, refinement_discrepancy,
    REFINEMENT_TOL,
};
use qfim3d::single::{
    cfi_direct_gaussian, cfi_direct_numeric, gamma_localisation, lg_ratio_table, qfim_localisation,
};
use qfim3d::two_emitter::{
    closed_form, closed_form_gaussian, compatibility, compatibility_subset, condition_check,
    two_emitter_subspace, CompatibilityReport, ConditionCheck, TwoEmitterInfo, TwoEmitterParams,
    GAMMA_ZERO,
};

use crate::config::{linspace, Method, RunConfig};
use crate::output::{num, Cell, Report, Table};
use crate::CliError;

/// Agreement target between the three two-emitter paths, in the frame where
/// the reference QFIm has unit diagonal.
pub const AGREEMENT_TOL: f64 = 1e-4;
/// Scaled entries below this in both matrices are not compared.
pub const AGREEMENT_FLOOR: f64 = 1e-8;
/// Relative slack for `F ≤ QFI` and the Table 1 ratios.
pub const BOUND_SLACK: f64 = 1e-6;
/// Limit-check tolerances: relative on non-zero entries, scaled on Γ.
pub const LIMIT_TOL: f64 = 1e-2;
pub const LIMIT_GAMMA_TOL: f64 = 1e-3;

fn matrix_json(m: &FisherMatrix) -> Value {
    let n = m.dim();
    let rows: Vec<Value> = (0..n)
        .map(|i| Value::Array((0..n).map(|j| num(m.get(i, j))).collect()))
        .collect();
    json!({ "labels": m.labels(), "entries": rows })
}

fn push_matrix(table: &mut Table, name: &str, m: &FisherMatrix) {
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            table.push(vec![
                name.into(),
                m.labels()[i].as_str().into(),
                m.labels()[j].as_str().into(),
                m.get(i, j).into(),
            ]);
        }
    }
}

fn push_scalar(table: &mut Table, name: &str, v: f64) {
    table.push(vec![name.into(), "".into(), "".into(), v.into()]);
}

/// Largest `|Γ_ij|/√(Q_ii Q_jj)`.
fn scaled_max(gamma: &FisherMatrix, q: &FisherMatrix) -> f64 {
    let d = q.diagonal();
    let mut worst = 0.0f64;
    for i in 0..gamma.dim() {
        for j in 0..gamma.dim() {
            let s = (d[i] * d[j]).sqrt();
            if s > 0.0 {
                worst = worst.max(gamma.get(i, j).abs() / s);
            }
        }
    }
    worst
}

/// Largest `|a_ij − b_ij|/√(d_i d_j)`: the absolute difference in the frame
/// where `diag(d)` is the identity.
pub fn scaled_difference(a: &FisherMatrix, b: &FisherMatrix, d: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            worst = worst.max((a.get(i, j) - b.get(i, j)).abs() / (d[i] * d[j]).sqrt());
        }
    }
    worst
}

/// Positive semidefinite after scaling to unit diagonal.
fn scaled_psd(q: &FisherMatrix) -> bool {
    let d: Vec<f64> = q
        .diagonal()
        .iter()
        .map(|&v| if v > 0.0 { v.sqrt().recip() } else { 1.0 })
        .collect();
    let n = q.dim();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| q.get(i, j) * d[i] * d[j]);
    m.symmetric_eigenvalues().iter().all(|&v| v >= -1e-9)
}

fn beam_json(spec: &BeamSpec) -> Value {
    json!({
        "family": if spec.is_gaussian() { "gaussian" } else { "lg" },
        "w0": num(spec.w0),
        "lambda": num(spec.lambda),
        "p": spec.p,
        "l": spec.l,
        "k": num(spec.k()),
        "rayleigh_range": num(spec.rayleigh_range()),
    })
}

pub fn single_qfim(cfg: &RunConfig) -> Result<Report, CliError> {
    let spec = cfg.spec()?;
    let psf = AnalyticPsf::new(spec, cfg.grid(&spec, 0.0, 0.0)?)?;
    let psi = psf.reference()?;
    let (q, method) = match cfg.method {
        Method::ClosedForm if spec.is_gaussian() => (
            qfim_localisation(&GeneratorMoments::gaussian(spec.w0, spec.k()))?,
            "closed-form",
        ),
        Method::ClosedForm | Method::Subspace => {
            (qfim_localisation(&moments(&psi))?, "grid-moments")
        }
        Method::Oracle => (
            oracle_single_emitter(&psf, Displacement::default(), default_steps(psf.scales()))?.q,
            "oracle",
        ),
    };
    let gamma = gamma_localisation(&psi)?;
    let gamma_scaled = scaled_max(&gamma, &q);
    let gaussian_xx = 4.0 / (spec.w0 * spec.w0);

    let mut table = Table::new(&["quantity", "row", "col", "value"]);
    push_matrix(&mut table, "Q", &q);
    push_matrix(&mut table, "Gamma", &gamma);

    let mut doc = Map::new();
    doc.insert("beam".into(), beam_json(&spec));
    doc.insert("method".into(), json!(method));
    doc.insert("qfim".into(), matrix_json(&q));
    doc.insert("qfim_xx".into(), num(q.get(0, 0)));
    doc.insert("qfim_yy".into(), num(q.get(1, 1)));
    doc.insert("qfim_zz".into(), num(q.get(2, 2)));
    doc.insert("transverse_ratio".into(), num(q.get(0, 0) / gaussian_xx));
    doc.insert("gamma".into(), matrix_json(&gamma));
    doc.insert("gamma_scaled_max".into(), num(gamma_scaled));
    doc.insert("gamma_zero".into(), json!(gamma_scaled < GAMMA_ZERO));

    let mut report = Report::new("single-qfim", table);
    report.failed = gamma_scaled >= GAMMA_ZERO;
    if cfg.refine && method != "closed-form" {
        let fine = psf.refined()?;
        let qf = match cfg.method {
            Method::Oracle => {
                oracle_single_emitter(&fine, Displacement::default(), default_steps(fine.scales()))?
                    .q
            }
            _ => qfim_localisation(&moments(&fine.reference()?))?,
        };
        let change = scaled_difference(&q, &qf, &q.diagonal());
        report.diagnose("refinement_change", num(change));
        report.failed |= change > REFINEMENT_TOL;
    }
    report.document = Some(doc);
    Ok(report)
}

pub fn cfi_sweep(cfg: &RunConfig) -> Result<Report, CliError> {
    let spec = cfg.spec()?;
    let (w0, zr) = (spec.w0, spec.rayleigh_range());
    let zs = linspace(cfg.z_min, cfg.z_max, cfg.z_steps);
    let gaussian = spec.is_gaussian();
    let numeric = cfg.numeric || !gaussian;
    let max_z = cfg.z_min.abs().max(cfg.z_max.abs()) * zr;
    let psf = if numeric {
        Some(AnalyticPsf::new(spec, cfg.grid(&spec, 0.0, max_z)?)?)
    } else {
        None
    };
    let qfi = match &psf {
        Some(psf) if !gaussian => qfim_localisation(&moments(&psf.reference()?))?,
        _ => qfim_localisation(&GeneratorMoments::gaussian(w0, spec.k()))?,
    };
    let steps = FdSteps::default_for((w0, zr));

    let rows: Vec<(f64, Option<FisherMatrix>, Option<FisherMatrix>)> = zs
        .par_iter()
        .map(|&z| {
            let exact = if gaussian {
                Some(cfi_direct_gaussian(&spec, z * zr)?)
            } else {
                None
            };
            let grid = match &psf {
                Some(psf) => Some(cfi_direct_numeric(
                    psf,
                    Displacement::default(),
                    z * zr,
                    steps,
                )?),
                None => None,
            };
            Ok((z, exact, grid))
        })
        .collect::<Result<_, qfim3d::Error>>()?;

    let mut columns = vec!["z", "F_xx", "F_yy", "F_zz", "QFI_xx", "QFI_zz"];
    let with_num = gaussian && numeric;
    if with_num {
        columns.extend(["F_xx_num", "F_yy_num", "F_zz_num"]);
    }
    let mut table = Table::new(&columns);
    let (qxx, qzz) = (qfi.get(0, 0), qfi.get(2, 2));
    let mut violations = 0usize;
    let mut worst_num = 0.0f64;
    for (z, exact, grid) in &rows {
        let f = exact.as_ref().or(grid.as_ref()).expect("one CFI source");
        let mut row: Vec<Cell> = vec![
            (z * zr).into(),
            f.get(0, 0).into(),
            f.get(1, 1).into(),
            f.get(2, 2).into(),
            qxx.into(),
            qzz.into(),
        ];
        let mut check = vec![
            (f.get(0, 0), qxx),
            (f.get(1, 1), qfi.get(1, 1)),
            (f.get(2, 2), qzz),
        ];
        if with_num {
            let g = grid.as_ref().expect("numeric requested");
            row.extend([g.get(0, 0).into(), g.get(1, 1).into(), g.get(2, 2).into()]);
            check.extend([
                (g.get(0, 0), qxx),
                (g.get(1, 1), qfi.get(1, 1)),
                (g.get(2, 2), qzz),
            ]);
            for i in 0..3 {
                let scale = if i == 2 { qzz } else { qxx };
                worst_num = worst_num.max((g.get(i, i) - f.get(i, i)).abs() / scale);
            }
        }
        violations += check
            .iter()
            .filter(|(fv, qv)| *fv > qv * (1.0 + BOUND_SLACK))
            .count();
        table.push(row);
    }

    let mut report = Report::new("cfi-sweep", table);
    let argmax = |col: &str| -> f64 {
        let v = report.table.column(col).expect("numeric column");
        let i = (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        zs[i] * zr
    };
    let (zx, zz) = (argmax("F_xx"), argmax("F_zz"));
    report.diagnose(
        "cfi_source",
        json!(if gaussian { "closed-form" } else { "numeric" }),
    );
    report.diagnose("argmax_F_xx_z", num(zx));
    report.diagnose("argmax_F_zz_z", num(zz));
    report.diagnose("bound_violations", json!(violations));
    if with_num {
        report.diagnose("numeric_vs_closed_form", num(worst_num));
    }
    report.failed = violations > 0;

    if cfg.refine {
        if let Some(psf) = &psf {
            let fine = psf.refined()?;
            let probes = [zs[0], zs[zs.len() / 2], zs[zs.len() - 1]];
            let mut change = 0.0f64;
            for z in probes {
                let a = cfi_direct_numeric(psf, Displacement::default(), z * zr, steps)?;
                let b = cfi_direct_numeric(&fine, Displacement::default(), z * zr, steps)?;
                let scale = a.diagonal().into_iter().fold(0.0, f64::max);
                for i in 0..3 {
                    change = change.max((a.get(i, i) - b.get(i, i)).abs() / scale);
                }
            }
            report.diagnose("refinement_change", num(change));
            report.failed |= change > REFINEMENT_TOL;
        }
    }
    Ok(report)
}

pub fn lg_table(cfg: &RunConfig) -> Result<Report, CliError> {
    let ratios = lg_ratio_table(cfg.w0, cfg.lambda, cfg.p_max, cfg.l_max, cfg.nx)?;
    let mut columns = vec!["p".to_string()];
    columns.extend((0..=cfg.l_max).map(|l| format!("l{l}")));
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new(&refs);
    let mut worst = 0.0f64;
    for (p, row) in ratios.iter().enumerate() {
        let mut cells: Vec<Cell> = vec![(p as f64).into()];
        for (l, &v) in row.iter().enumerate() {
            let expected = (2 * p + l + 1) as f64;
            worst = worst.max((v - expected).abs() / expected);
            cells.push(v.into());
        }
        table.push(cells);
    }
    let mut report = Report::new("lg-table", table);
    report.diagnose("max_deviation_from_mode_order", num(worst));
    report.failed = worst > BOUND_SLACK;
    Ok(report)
}

/// QFIm and Γ of a two-emitter configuration by the chosen method, with
/// the diagnostics that method produces.
pub fn two_emitter_info(
    cfg: &RunConfig,
    spec: &BeamSpec,
    params: &TwoEmitterParams,
    method: Method,
) -> Result<(TwoEmitterInfo, Map<String, Value>), CliError> {
    let mut diag = Map::new();
    if method == Method::ClosedForm && spec.is_gaussian() {
        return Ok((closed_form_gaussian(spec, params)?, diag));
    }
    let (e1, e2) = params.emitters();
    let max_x = e1.x.abs().max(e2.x.abs());
    let max_z = e1.z.abs().max(e2.z.abs());
    let psf = AnalyticPsf::new(*spec, cfg.grid(spec, max_x, max_z)?)?;
    let info = match method {
        Method::ClosedForm => {
            let m = moments(&psf.reference()?);
            let o = numeric_overlap(&psf, params.s, params.t, FdSteps::default_for(psf.scales()))?;
            closed_form(&m, &o, params.q)?
        }
        Method::Subspace => two_emitter_subspace(&psf, params)?,
        Method::Oracle => {
            let r = oracle_two_emitter(&psf, params, default_steps(psf.scales()))?;
            if cfg.refine {
                let fine = psf.refined()?;
                let rf = oracle_two_emitter(&fine, params, default_steps(fine.scales()))?;
                diag.insert(
                    "refinement_change".into(),
                    num(refinement_discrepancy(&r, &rf)),
                );
            }
            TwoEmitterInfo {
                q: r.q,
                gamma: r.gamma,
                limit: false,
            }
        }
    };
    Ok((info, diag))
}

fn condition_for(
    cfg: &RunConfig,
    spec: &BeamSpec,
    params: &TwoEmitterParams,
) -> Result<ConditionCheck, CliError> {
    if spec.is_gaussian() {
        let o = qfim3d::beam::gaussian_overlap(spec, params.s, params.t)?;
        return Ok(condition_check(
            &GeneratorMoments::gaussian(spec.w0, spec.k()),
            &o,
        ));
    }
    let psf = AnalyticPsf::new(*spec, cfg.grid(spec, params.s.abs(), params.t.abs())?)?;
    let m = moments(&psf.reference()?);
    let o = numeric_overlap(&psf, params.s, params.t, FdSteps::default_for(psf.scales()))?;
    Ok(condition_check(&m, &o))
}

fn compat_json(r: &CompatibilityReport) -> Value {
    json!({
        "r_value": num(r.r_value),
        "trace_q_inv": num(r.trace_q_inv),
        "gap_upper": num(r.gap_upper),
        "retained_rank": r.retained_rank,
        "gamma_zero": r.gamma_zero,
    })
}

pub fn two_qfim(cfg: &RunConfig) -> Result<Report, CliError> {
    let spec = cfg.spec()?;
    let (w0, zr) = (spec.w0, spec.rayleigh_range());
    let params = TwoEmitterParams::new(cfg.x0 * w0, cfg.s * w0, cfg.z0 * zr, cfg.t * zr, cfg.q)?;
    let (info, diag) = two_emitter_info(cfg, &spec, &params, cfg.method)?;
    let full = compatibility(&info.q, &info.gamma)?;
    let known = compatibility_subset(&info.q, &info.gamma, &[0, 1, 2, 3])?;
    let cond = condition_for(cfg, &spec, &params)?;
    let psd = scaled_psd(&info.q);

    let mut table = Table::new(&["quantity", "row", "col", "value"]);
    push_matrix(&mut table, "Q", &info.q);
    push_matrix(&mut table, "Gamma", &info.gamma);
    push_scalar(&mut table, "r_value", full.r_value);
    push_scalar(&mut table, "r_value_q_known", known.r_value);
    push_scalar(&mut table, "gap_upper", full.gap_upper);
    push_scalar(&mut table, "condition_residual", cond.residual);

    let mut doc = Map::new();
    doc.insert("beam".into(), beam_json(&spec));
    doc.insert("method".into(), serde_json::to_value(cfg.method)?);
    doc.insert(
        "params".into(),
        json!({
            "x0": num(params.x0), "s": num(params.s), "z0": num(params.z0),
            "t": num(params.t), "q": num(params.q),
        }),
    );
    doc.insert("limit".into(), json!(info.limit));
    doc.insert("qfim".into(), matrix_json(&info.q));
    doc.insert("gamma".into(), matrix_json(&info.gamma));
    doc.insert("qfim_psd".into(), json!(psd));
    doc.insert("compatibility".into(), compat_json(&full));
    doc.insert("compatibility_q_known".into(), compat_json(&known));
    doc.insert(
        "condition".into(),
        json!({ "residual": num(cond.residual), "holds": cond.holds }),
    );

    let mut report = Report::new("two-qfim", table);
    report.failed = !psd || !(0.0..=1.0 + 1e-9).contains(&full.r_value);
    if let Some(change) = diag.get("refinement_change").and_then(Value::as_f64) {
        report.failed |= change > REFINEMENT_TOL;
    }
    report.diagnostics = diag;
    report.document = Some(doc);
    Ok(report)
}

/// One cell of the ℜ map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapCell {
    /// Separations in metres.
    pub s: f64,
    pub t: f64,
    pub r_value: f64,
    pub q_psd: bool,
    /// Largest `|Γ_ij + Γ_ji|`, zero by construction.
    pub gamma_asymmetry: f64,
}

/// ℜ over the configured `(s, t)` rectangle, `s` outer and `t` inner.
pub fn r_map_cells(cfg: &RunConfig) -> Result<Vec<MapCell>, CliError> {
    let spec = cfg.spec()?;
    let (w0, zr) = (spec.w0, spec.rayleigh_range());
    let ss = linspace(cfg.s_min, cfg.s_max, cfg.s_steps);
    let ts = linspace(cfg.t_min, cfg.t_max, cfg.t_steps);
    let idx: &[usize] = if cfg.estimate_q {
        &[0, 1, 2, 3, 4]
    } else {
        &[0, 1, 2, 3]
    };
    let points: Vec<(f64, f64)> = ss
        .iter()
        .flat_map(|&s| ts.iter().map(move |&t| (s, t)))
        .collect();
    points
        .par_iter()
        .map(|&(s, t)| {
            let params = TwoEmitterParams::separated(s * w0, t * zr, cfg.q)?;
            let (info, _) = two_emitter_info(cfg, &spec, &params, cfg.method)?;
            let r = compatibility_subset(&info.q, &info.gamma, idx)?;
            let g = info.gamma.entries();
            Ok(MapCell {
                s: s * w0,
                t: t * zr,
                r_value: r.r_value,
                q_psd: scaled_psd(&info.q),
                gamma_asymmetry: (g + g.transpose()).amax(),
            })
        })
        .collect()
}

pub fn r_map(cfg: &RunConfig) -> Result<Report, CliError> {
    let cells = r_map_cells(cfg)?;
    let mut table = Table::new(&["s", "t", "r_value"]);
    for c in &cells {
        table.push(vec![c.s.into(), c.t.into(), c.r_value.into()]);
    }
    let out_of_range = cells
        .iter()
        .filter(|c| !(0.0..=1.0 + 1e-9).contains(&c.r_value))
        .count();
    let not_psd = cells.iter().filter(|c| !c.q_psd).count();
    let asym = cells.iter().map(|c| c.gamma_asymmetry).fold(0.0, f64::max);
    let (lo, hi) = cells
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c.r_value), hi.max(c.r_value))
        });
    let mut report = Report::new("r-map", table);
    report.diagnose("q_estimated", json!(cfg.estimate_q));
    report.diagnose("r_min", num(lo));
    report.diagnose("r_max", num(hi));
    report.diagnose("r_out_of_range", json!(out_of_range));
    report.diagnose("q_not_psd", json!(not_psd));
    report.diagnose("gamma_asymmetry", num(asym));
    report.failed = out_of_range > 0 || not_psd > 0 || asym > 0.0;
    Ok(report)
}

/// Coincident-emitter QFIm built from the generator moments alone.
pub fn limit_matrix(m: &GeneratorMoments, q: f64) -> nalgebra::DMatrix<f64> {
    let (p2, v, c) = (m.p * m.p, m.g_variance, 1.0 - 2.0 * q);
    let mut out = nalgebra::DMatrix::zeros(5, 5);
    for (i, j, val) in [
        (0, 0, 4.0 * p2),
        (0, 1, 2.0 * p2 * c),
        (1, 1, p2),
        (2, 2, 4.0 * v),
        (2, 3, 2.0 * v * c),
        (3, 3, v),
    ] {
        out[(i, j)] = val;
        out[(j, i)] = val;
    }
    out
}

pub fn limit_check(cfg: &RunConfig) -> Result<Report, CliError> {
    let spec = cfg.spec()?;
    let (w0, zr) = (spec.w0, spec.rayleigh_range());
    let params = TwoEmitterParams::separated(cfg.epsilon * w0, cfg.epsilon * zr, cfg.q)?;
    let (info, _) = two_emitter_info(cfg, &spec, &params, cfg.method)?;
    let m = if spec.is_gaussian() {
        GeneratorMoments::gaussian(w0, spec.k())
    } else {
        let psf = AnalyticPsf::new(spec, cfg.grid(&spec, 0.0, 0.0)?)?;
        moments(&psf.reference()?)
    };
    let expected = limit_matrix(&m, cfg.q);
    // natural scale of each parameter: √(limit Q_ii) for positions, 1 for q
    let scale: Vec<f64> = (0..5)
        .map(|i| {
            if expected[(i, i)] > 0.0 {
                expected[(i, i)].sqrt()
            } else {
                1.0
            }
        })
        .collect();

    let mut table = Table::new(&["quantity", "row", "col", "computed", "limit", "deviation"]);
    let labels = info.q.labels().to_vec();
    let mut worst_q = 0.0f64;
    let mut worst_g = 0.0f64;
    for i in 0..5 {
        for j in i..5 {
            let (got, want) = (info.q.get(i, j), expected[(i, j)]);
            let dev = if want != 0.0 {
                (got - want).abs() / want.abs()
            } else {
                got.abs() / (scale[i] * scale[j])
            };
            worst_q = worst_q.max(dev);
            table.push(vec![
                "Q".into(),
                labels[i].as_str().into(),
                labels[j].as_str().into(),
                got.into(),
                want.into(),
                dev.into(),
            ]);
        }
    }
    for i in 0..5 {
        for j in i + 1..5 {
            let got = info.gamma.get(i, j);
            let dev = got.abs() / (scale[i] * scale[j]);
            worst_g = worst_g.max(dev);
            table.push(vec![
                "Gamma".into(),
                labels[i].as_str().into(),
                labels[j].as_str().into(),
                got.into(),
                0.0.into(),
                dev.into(),
            ]);
        }
    }
    let mut report = Report::new("limit-check", table);
    report.diagnose("epsilon", num(cfg.epsilon));
    report.diagnose("worst_q_deviation", num(worst_q));
    report.diagnose("worst_gamma_scaled", num(worst_g));
    report.diagnose("limit_branch", json!(info.limit));
    report.failed = worst_q > LIMIT_TOL || worst_g > LIMIT_GAMMA_TOL;
    Ok(report)
}

/// `(s [w0], t [z_r], q)` points checked by `validate`. The full lattice
/// adds zero-separation edges but never the coincident corner, where the
/// state changes rank.
pub fn validation_lattice(full: bool) -> Vec<(f64, f64, f64)> {
    let (ss, ts, qs): (&[f64], &[f64], &[f64]) = if full {
        (
            &[0.0, 0.2, 1.0, 2.0, 3.0],
            &[0.0, 0.1, 0.5, 1.0, 2.0],
            &[0.1, 0.3, 0.5],
        )
    } else {
        (&[0.0, 0.2, 3.0], &[0.0, 0.5], &[0.3])
    };
    let mut out = Vec::new();
    for &s in ss {
        for &t in ts {
            if s == 0.0 && t == 0.0 {
                continue;
            }
            for &q in qs {
                out.push((s, t, q));
            }
        }
    }
    out
}

/// Outcome of the three-path comparison at one lattice point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathAgreement {
    pub s: f64,
    pub t: f64,
    pub q: f64,
    pub subspace_q: f64,
    pub subspace_gamma: f64,
    pub oracle_q: f64,
    pub oracle_gamma: f64,
}

impl PathAgreement {
    pub fn worst(&self) -> f64 {
        self.subspace_q
            .max(self.subspace_gamma)
            .max(self.oracle_q)
            .max(self.oracle_gamma)
    }

    pub fn passes(&self) -> bool {
        self.worst() <= AGREEMENT_TOL
    }
}

/// Closed form (analytic for Gaussian beams, grid overlaps otherwise)
/// against the subspace and oracle paths over the lattice.
pub fn validate_cells(cfg: &RunConfig) -> Result<Vec<PathAgreement>, CliError> {
    let spec = cfg.spec()?;
    let (w0, zr) = (spec.w0, spec.rayleigh_range());
    let lattice = validation_lattice(cfg.full);
    let max_s = lattice.iter().map(|p| p.0).fold(0.0, f64::max) * w0;
    let max_t = lattice.iter().map(|p| p.1).fold(0.0, f64::max) * zr;
    let psf = AnalyticPsf::new(spec, cfg.grid(&spec, 0.5 * max_s, 0.5 * max_t)?)?;
    let steps = default_steps(psf.scales());
    lattice
        .par_iter()
        .map(|&(s, t, q)| {
            let params = TwoEmitterParams::separated(s * w0, t * zr, q)?;
            let (reference, _) = two_emitter_info(cfg, &spec, &params, Method::ClosedForm)?;
            let sub = two_emitter_subspace(&psf, &params)?;
            let ora = oracle_two_emitter(&psf, &params, steps)?;
            let d = reference.q.diagonal();
            let cmp = |a: &FisherMatrix, b: &FisherMatrix| {
                scaled_agreement(a.entries(), b.entries(), &d, AGREEMENT_FLOOR).worst_relative
            };
            Ok(PathAgreement {
                s: s * w0,
                t: t * zr,
                q,
                subspace_q: cmp(&sub.q, &reference.q),
                subspace_gamma: cmp(&sub.gamma, &reference.gamma),
                oracle_q: cmp(&ora.q, &reference.q),
                oracle_gamma: cmp(&ora.gamma, &reference.gamma),
            })
        })
        .collect()
}

pub fn validate(cfg: &RunConfig) -> Result<Report, CliError> {
    let cells = validate_cells(cfg)?;
    let mut table = Table::new(&[
        "s",
        "t",
        "q",
        "subspace_q",
        "subspace_gamma",
        "oracle_q",
        "oracle_gamma",
        "pass",
    ]);
    for c in &cells {
        table.push(vec![
            c.s.into(),
            c.t.into(),
            c.q.into(),
            c.subspace_q.into(),
            c.subspace_gamma.into(),
            c.oracle_q.into(),
            c.oracle_gamma.into(),
            (if c.passes() { 1.0 } else { 0.0 }).into(),
        ]);
    }
    let failures = cells.iter().filter(|c| !c.passes()).count();
    let worst = cells.iter().map(PathAgreement::worst).fold(0.0, f64::max);
    let mut report = Report::new("validate", table);
    report.diagnose("points", json!(cells.len()));
    report.diagnose("failures", json!(failures));
    report.diagnose("worst_relative", num(worst));
    report.diagnose("tolerance", num(AGREEMENT_TOL));
    report.failed = failures > 0;
    Ok(report)
}
