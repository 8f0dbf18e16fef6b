//! Re-derives every recorded check from the written artifacts. Nothing
//! from the construction run is trusted except the files themselves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ordercomplete::jets::{sample_component, Cell, PiecewisePolyFile};
use ordercomplete::nlsc::order_convergence_check;
use ordercomplete::solver::i_cell_owner;
use ordercomplete::{GridDomain, GridFunction, PdeSystem, PiecewisePoly};

use crate::report::*;
use crate::{io_err, parse_spec, CliError};

/// Relative slack when comparing recomputed margins with recorded ones.
const MARGIN_RTOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    /// Every recomputed check passes and matches the record.
    pub pass: bool,
    pub report: String,
}

fn cert_err(msg: impl Into<String>) -> CliError {
    CliError::Certificate(msg.into())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn load_poly(dir: &Path, name: &str) -> Result<PiecewisePoly, CliError> {
    let path = dir.join(name);
    let file: PiecewisePolyFile = serde_json::from_str(&read(&path)?)
        .map_err(|e| cert_err(format!("{}: {e}", path.display())))?;
    PiecewisePoly::from_file(&file).map_err(|e| cert_err(format!("{}: {e}", path.display())))
}

struct Comparer {
    mismatches: Vec<String>,
}

impl Comparer {
    fn close(a: f64, b: f64) -> bool {
        a == b || (a - b).abs() <= MARGIN_RTOL * (1.0 + a.abs().max(b.abs()))
    }

    fn num(&mut self, what: &str, recorded: f64, recomputed: f64) {
        if !Self::close(recorded, recomputed) {
            self.mismatches.push(format!(
                "{what}: recorded {recorded:e}, recomputed {recomputed:e}"
            ));
        }
    }

    fn opt(&mut self, what: &str, recorded: Option<f64>, recomputed: f64) {
        match (recorded, finite(recomputed)) {
            (None, None) => {}
            (Some(a), Some(b)) => self.num(what, a, b),
            _ => self.mismatches.push(format!(
                "{what}: recorded {recorded:?}, recomputed {recomputed:e}"
            )),
        }
    }

    fn flag(&mut self, what: &str, recorded: bool, recomputed: bool) {
        if recorded != recomputed {
            self.mismatches.push(format!(
                "{what}: recorded {recorded}, recomputed {recomputed}"
            ));
        }
    }
}

/// Checks `dir/certificate.json` against the other artifacts in `dir`.
///
/// Tampering or any disagreement between record and recomputation is an
/// error; a consistent record of a failed run yields `pass == false`.
pub fn verify(dir: &Path) -> Result<VerifyOutcome, CliError> {
    let cert_path = dir.join(CERTIFICATE_FILE);
    let cert: CertificateFile = serde_json::from_str(&read(&cert_path)?)
        .map_err(|e| cert_err(format!("{}: {e}", cert_path.display())))?;
    if cert.schema != SCHEMA {
        return Err(cert_err(format!("unsupported schema {}", cert.schema)));
    }
    let spec_path: PathBuf = dir.join(&cert.spec_file);
    let loaded = parse_spec(&spec_path, read(&spec_path)?).map_err(|e| cert_err(e.to_string()))?;
    let sys = &loaded.system;
    let grid = GridDomain::new(
        sys.lo().to_vec(),
        sys.hi().to_vec(),
        cert.config.resolution.clone(),
    )
    .map_err(|e| cert_err(format!("recorded resolution: {e}")))?;
    let mut cmp = Comparer {
        mismatches: Vec::new(),
    };

    // global pair
    let lower = load_poly(dir, &cert.global_pair.lower_file)?;
    let upper = load_poly(dir, &cert.global_pair.upper_file)?;
    for p in [&lower, &upper] {
        if !p.domain().same_geometry(&grid) || p.signature() != sys.signature() {
            return Err(cert_err("pair file does not match the problem geometry"));
        }
    }
    let pair_pass = check_pair(sys, &lower, &upper, &cert.global_pair, &mut cmp)?;

    // stages
    if cert.stages.len() != cert.config.stages {
        return Err(cert_err(format!(
            "{} stage records for N = {}",
            cert.stages.len(),
            cert.config.stages
        )));
    }
    let mut vs = Vec::with_capacity(cert.stages.len());
    let mut stages_pass = true;
    for (k, rec) in cert.stages.iter().enumerate() {
        if rec.n != k + 1 {
            return Err(cert_err(format!("stage record {k} has n = {}", rec.n)));
        }
        let v = load_poly(dir, &rec.file)?;
        if !v.domain().same_geometry(&grid) || v.signature() != sys.signature() {
            return Err(cert_err(format!(
                "{} does not match the problem geometry",
                rec.file
            )));
        }
        let prev = k.checked_sub(1).map(|j| &cert.stages[j]);
        stages_pass &= check_stage(sys, &v, rec, prev, cert.config.gamma, &mut cmp)?;
        vs.push(v);
    }

    // order checks on the common grid
    let mut common = grid.clone();
    for v in &vs {
        common = common
            .union_skeleton(v.domain())
            .map_err(|e| cert_err(e.to_string()))?;
    }
    let common = Arc::new(common);
    let bands_monotone = check_bands(sys, &vs, &cert, &common, &mut cmp)?;
    let (ops_pass, residual) = check_operator(sys, &vs, &cert, &common, &mut cmp)?;
    cmp.num("final residual", cert.final_residual, residual);
    let direct = residual < cert.config.gamma / cert.config.stages as f64;

    let verdict = pair_pass && stages_pass && bands_monotone && ops_pass && direct;
    cmp.flag("verdict", cert.verdict, verdict);
    if !cmp.mismatches.is_empty() {
        return Err(cert_err(format!(
            "{} recorded value(s) disagree with the artifacts; first: {}",
            cmp.mismatches.len(),
            cmp.mismatches[0]
        )));
    }
    let mut report = String::new();
    let _ = writeln!(
        report,
        "recomputed {} stage(s) on {} grid points",
        vs.len(),
        common.len()
    );
    let _ = writeln!(
        report,
        "global pair {}",
        if pair_pass { "pass" } else { "FAIL" }
    );
    let _ = writeln!(
        report,
        "stage inequalities {}",
        if stages_pass { "pass" } else { "FAIL" }
    );
    let _ = writeln!(
        report,
        "band monotonicity {}",
        if bands_monotone { "pass" } else { "FAIL" }
    );
    let _ = writeln!(
        report,
        "operator order convergence {}",
        if ops_pass { "pass" } else { "FAIL" }
    );
    let _ = writeln!(
        report,
        "final residual {residual:.3e} {}",
        if direct { "< γ/N" } else { ">= γ/N" }
    );
    let _ = writeln!(
        report,
        "verdict: {}",
        if verdict {
            "PASS (evidence, not proof)"
        } else {
            "FAIL"
        }
    );
    Ok(VerifyOutcome {
        pass: verdict,
        report,
    })
}

fn check_pair(
    sys: &PdeSystem,
    lower: &PiecewisePoly,
    upper: &PiecewisePoly,
    rec: &PairRecord,
    cmp: &mut Comparer,
) -> Result<bool, CliError> {
    let dom = Arc::new(
        lower
            .domain()
            .union_skeleton(upper.domain())
            .map_err(|e| cert_err(e.to_string()))?,
    );
    let err = |e: ordercomplete::pde::PdeError| cert_err(e.to_string());
    let tu = sys.apply_operator(lower, &dom).map_err(err)?;
    let tv = sys.apply_operator(upper, &dom).map_err(err)?;
    let f = sys.sample_rhs(&dom).map_err(err)?;
    let eps = rec.eps;
    let mut m = [f64::INFINITY; 4];
    let (mut points, mut strict) = (0, true);
    for j in 0..sys.k() {
        for p in (0..dom.len()).filter(|&p| !dom.is_skeleton(p)) {
            let (fv, u, v) = (f[j].value(p), tu[j].value(p), tv[j].value(p));
            m[0] = m[0].min(u - (fv - eps));
            m[1] = m[1].min(fv - u);
            m[2] = m[2].min(v - fv);
            m[3] = m[3].min(fv + eps - v);
            strict &= fv - eps < u && u < fv && fv < v && v < fv + eps;
            points += 1;
        }
    }
    let pass = strict && points > 0;
    cmp.opt("pair lower floor", rec.lower_floor, m[0]);
    cmp.opt("pair lower ceiling", rec.lower_ceiling, m[1]);
    cmp.opt("pair upper floor", rec.upper_floor, m[2]);
    cmp.opt("pair upper ceiling", rec.upper_ceiling, m[3]);
    cmp.flag("pair pass", rec.pass, pass);
    if rec.points != points || rec.cells != lower.cells().len() {
        cmp.mismatches.push(format!(
            "pair sizes: recorded {} points, recomputed {points}",
            rec.points
        ));
    }
    Ok(pass)
}

fn check_stage(
    sys: &PdeSystem,
    v: &PiecewisePoly,
    rec: &StageRecord,
    prev: Option<&StageRecord>,
    gamma: f64,
    cmp: &mut Comparer,
) -> Result<bool, CliError> {
    let cells = rec.i_cells.len();
    let dim = sys.jet_dim();
    let shaped = |b: &Vec<Vec<f64>>| b.len() == cells && b.iter().all(|r| r.len() == dim);
    if !(shaped(&rec.lower) && shaped(&rec.upper) && rec.eps.len() == cells) {
        return Err(cert_err(format!(
            "stage {}: band tables do not match its {cells} I-cells",
            rec.n
        )));
    }
    let tag = |what: &str| format!("stage {} {what}", rec.n);
    let n = rec.n as f64;
    let slack = gamma / n;
    let dom = v.domain().clone();
    let i_cells: Vec<Cell> = rec
        .i_cells
        .iter()
        .map(|c| Cell::new(c.lo.clone(), c.hi.clone()))
        .collect();
    let owner =
        i_cell_owner(&i_cells, &dom).map_err(|e| cert_err(format!("stage {}: {e}", rec.n)))?;
    let err = |e: ordercomplete::pde::PdeError| cert_err(e.to_string());
    let t = sys.apply_operator(v, &dom).map_err(err)?;
    let f = sys.sample_rhs(&dom).map_err(err)?;

    let (mut lo, mut hi, mut bracket) = (f64::INFINITY, f64::INFINITY, true);
    for j in 0..sys.k() {
        for p in (0..dom.len()).filter(|&p| !dom.is_skeleton(p)) {
            let (tv, fv) = (t[j].value(p), f[j].value(p));
            lo = lo.min(tv - (fv - slack));
            hi = hi.min(fv - tv);
            bracket &= fv - slack < tv && tv < fv;
        }
    }

    let (mut nesting, mut nested) = (f64::INFINITY, true);
    if let Some(p) = prev {
        if p.i_cells != rec.i_cells {
            return Err(cert_err(format!(
                "stage {}: I-tiling differs from stage {}",
                rec.n, p.n
            )));
        }
        for i in 0..cells {
            for s in 0..dim {
                let (l0, l1, u0, u1) = (
                    p.lower[i][s],
                    rec.lower[i][s],
                    p.upper[i][s],
                    rec.upper[i][s],
                );
                nesting = nesting.min(l1 - l0).min(u0 - u1);
                nested &= l0 < l1 && u1 < u0;
            }
        }
    }

    let (mut containment, mut contained) = (f64::INFINITY, true);
    let mut jet = vec![0.0; dim];
    for p in (0..dom.len()).filter(|&p| !dom.is_skeleton(p)) {
        if !v.jet_at(p, &mut jet) {
            continue;
        }
        let i = owner[p]
            .ok_or_else(|| cert_err(format!("stage {}: point {p} has no I-cell", rec.n)))?;
        for (s, &d) in jet.iter().enumerate() {
            let (l, u) = (rec.lower[i][s], rec.upper[i][s]);
            containment = containment.min(d - l).min(u - d);
            contained &= l <= d && d <= u;
        }
    }

    let (mut width_margin, mut width_ratio, mut narrow) = (f64::INFINITY, 0.0f64, true);
    let mut widths = vec![0.0f64; dim];
    for i in 0..cells {
        let bound = 4.0 * rec.eps[i] / n;
        for s in 0..dim {
            let w = rec.upper[i][s] - rec.lower[i][s];
            widths[s] = widths[s].max(w);
            width_margin = width_margin.min(bound - w);
            width_ratio = width_ratio.max(w / bound);
            narrow &= w < bound;
        }
    }

    let m = &rec.margins;
    cmp.opt(&tag("bracket lower margin"), m.bracket_lower, lo);
    cmp.opt(&tag("bracket upper margin"), m.bracket_upper, hi);
    cmp.opt(&tag("nesting margin"), m.nesting, nesting);
    cmp.opt(&tag("containment margin"), m.containment, containment);
    cmp.opt(&tag("width margin"), m.width_margin, width_margin);
    cmp.num(&tag("width ratio"), m.width_ratio, width_ratio);
    for (s, (&a, &b)) in rec.band_widths.iter().zip(&widths).enumerate() {
        cmp.num(&tag(&format!("band width {s}")), a, b);
    }
    cmp.flag(&tag("bracket"), rec.bracket, bracket);
    cmp.flag(&tag("nesting and containment"), rec.nested, nested && contained);
    cmp.flag(&tag("width bound"), rec.narrow, narrow);
    Ok(bracket && nested && contained && narrow)
}

fn band(
    rec: &StageRecord,
    slot: usize,
    owner: &[Option<usize>],
    grid: &Arc<GridDomain>,
) -> Result<(GridFunction, GridFunction), CliError> {
    let pick = |b: &Vec<Vec<f64>>| {
        let vals = owner
            .iter()
            .map(|o| o.map_or(0.0, |i| b[i][slot]))
            .collect();
        GridFunction::new(grid.clone(), vals)
            .map(|g| ordercomplete::nlsc::normalize(&g))
            .map_err(|e| cert_err(e.to_string()))
    };
    Ok((pick(&rec.lower)?, pick(&rec.upper)?))
}

fn record_order(cmp: &mut Comparer, rec: &OrderRecord, c: &ordercomplete::nlsc::OrderCertificate) {
    cmp.flag(&format!("{} monotone", rec.label), rec.monotone, c.monotone);
    cmp.opt(&format!("{} sup gap", rec.label), rec.sup_gap, c.sup_gap);
    cmp.opt(&format!("{} inf gap", rec.label), rec.inf_gap, c.inf_gap);
    cmp.flag(&format!("{} pass", rec.label), rec.pass, c.pass);
}

fn check_bands(
    sys: &PdeSystem,
    vs: &[PiecewisePoly],
    cert: &CertificateFile,
    common: &Arc<GridDomain>,
    cmp: &mut Comparer,
) -> Result<bool, CliError> {
    let set = sys.set();
    if cert.band_checks.len() != set.dim() {
        return Err(cert_err(
            "band check count does not match the jet dimension",
        ));
    }
    let owners = cert
        .stages
        .iter()
        .map(|s| {
            let cells: Vec<Cell> = s
                .i_cells
                .iter()
                .map(|c| Cell::new(c.lo.clone(), c.hi.clone()))
                .collect();
            i_cell_owner(&cells, common).map_err(|e| cert_err(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut monotone = true;
    for (slot, rec) in cert.band_checks.iter().enumerate() {
        let (component, alpha) = set.unslot(slot);
        let (mut seq, mut lam, mut mu) = (Vec::new(), Vec::new(), Vec::new());
        for ((v, s), owner) in vs.iter().zip(&cert.stages).zip(&owners) {
            seq.push(
                sample_component(v, component, alpha, common)
                    .map_err(|e| cert_err(e.to_string()))?,
            );
            let (l, u) = band(s, slot, owner, common)?;
            lam.push(l);
            mu.push(u);
        }
        let u = seq.last().expect("at least one stage").clone();
        let c = order_convergence_check(&seq, &lam, &mu, &u, Some(rec.tol))
            .map_err(|e| cert_err(e.to_string()))?;
        record_order(cmp, rec, &c);
        monotone &= c.monotone;
    }
    Ok(monotone)
}

fn check_operator(
    sys: &PdeSystem,
    vs: &[PiecewisePoly],
    cert: &CertificateFile,
    common: &Arc<GridDomain>,
    cmp: &mut Comparer,
) -> Result<(bool, f64), CliError> {
    if cert.operator_checks.len() != sys.k() {
        return Err(cert_err(
            "operator check count does not match the number of equations",
        ));
    }
    let err = |e: ordercomplete::pde::PdeError| cert_err(e.to_string());
    let f = sys.sample_rhs(common).map_err(err)?;
    let images = vs
        .iter()
        .map(|v| sys.apply_operator(v, common).map_err(err))
        .collect::<Result<Vec<_>, _>>()?;
    let gamma = cert.config.gamma;
    let (mut pass, mut residual) = (true, 0.0f64);
    for (j, rec) in cert.operator_checks.iter().enumerate() {
        let seq: Vec<GridFunction> = images.iter().map(|t| t[j].clone()).collect();
        let lam = (1..=vs.len())
            .map(|n| f[j].map(|v| v - gamma / n as f64))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| cert_err(e.to_string()))?;
        let mu = vec![f[j].clone(); vs.len()];
        let tol = gamma / vs.len() as f64 + 1e-8 * (1.0 + f[j].sup_norm());
        cmp.num(&format!("{} tol", rec.label), rec.tol, tol);
        let c = order_convergence_check(&seq, &lam, &mu, &f[j], Some(tol))
            .map_err(|e| cert_err(e.to_string()))?;
        record_order(cmp, rec, &c);
        pass &= c.pass;
        for p in (0..common.len()).filter(|&p| !common.is_skeleton(p)) {
            residual = residual.max((images[vs.len() - 1][j].value(p) - f[j].value(p)).abs());
        }
    }
    Ok((pass, residual))
}
