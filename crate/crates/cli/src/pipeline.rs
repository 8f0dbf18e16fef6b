use std::fmt::Write as _;
use std::path::PathBuf;

use ordercomplete::analysis::{
    compare_reference, nested_limit_check, IntervalSequence, LimitVerdict,
};
use ordercomplete::jets::sample_component;
use ordercomplete::nlsc::write_csv;
use ordercomplete::pde::{check_assumption_interior, ProbeOptions};
use ordercomplete::solver::{
    default_delta, global_pair, run_scheme, tile_domain, GlobalPair, JetSolveOptions,
    SchemeOptions, SchemeResult,
};
use ordercomplete::{GridDomain, Interval, OrderInterval};

use crate::report::*;
use crate::{exit, io_err, load_spec, verify, write_atomic, CliError, LoadedSpec, RunConfig};

/// Jet search box half-width used by the assumption probe.
const PROBE_RADIUS: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub verdict: bool,
    pub out: PathBuf,
    pub summary: String,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.verdict {
            exit::PASS
        } else {
            exit::CERTIFICATE
        }
    }
}

/// Runs the whole pipeline and writes its artifacts into `cfg.out`, or
/// with `verify_only` re-checks what is already there.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    if cfg.verify_only {
        let v = verify(&cfg.out)?;
        return Ok(RunOutcome {
            verdict: v.pass,
            out: cfg.out.clone(),
            summary: v.report,
        });
    }
    cfg.validate()?;
    let loaded = load_spec(&cfg.spec)?;
    let sys = &loaded.system;
    let n = sys.signature().n;
    let res = cfg.grid.or(loaded.spec.grid).unwrap_or(64);
    if res < 8 {
        return Err(CliError::Usage(format!(
            "grid resolution must be at least 8, got {res}"
        )));
    }
    let grid = GridDomain::uniform(sys.lo().to_vec(), sys.hi().to_vec(), res)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let probe = ProbeOptions {
        seed: cfg.seed,
        ..ProbeOptions::default()
    };
    let jet = JetSolveOptions {
        seed: cfg.seed,
        ..JetSolveOptions::default()
    };
    let delta = default_delta(&grid);

    let assumption = if cfg.skip_assumption_check {
        None
    } else {
        Some(probe_assumption(&loaded, &grid, delta, &probe)?)
    };
    let pair = global_pair(sys, &grid, cfg.gamma, Some(delta), &jet)?;
    let opts = SchemeOptions {
        gamma: cfg.gamma,
        stages: cfg.stages,
        eps_max: cfg.eps_max,
        delta: Some(delta),
        band_tol: None,
        jet,
        probe,
    };
    let result = run_scheme(sys, &grid, &opts, loaded.exact.as_ref())?;

    std::fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    let config = ConfigRecord {
        gamma: cfg.gamma,
        stages: cfg.stages,
        eps_max: cfg.eps_max,
        seed: cfg.seed,
        resolution: vec![res; n],
        delta,
    };
    let cert = build_certificate(&loaded, config, assumption, &pair, &result)?;
    write_artifacts(cfg, &loaded, &pair, &result, &cert)?;
    let summary = summary(&cert);
    write_atomic(&cfg.out.join(SUMMARY_FILE), summary.as_bytes())?;
    Ok(RunOutcome {
        verdict: cert.verdict,
        out: cfg.out.clone(),
        summary,
    })
}

fn probe_assumption(
    loaded: &LoadedSpec,
    grid: &GridDomain,
    delta: f64,
    probe: &ProbeOptions,
) -> Result<AssumptionRecord, CliError> {
    let sys = &loaded.system;
    let tiling = tile_domain(grid, delta, 2)?;
    let trial = vec![Interval::new(-PROBE_RADIUS, PROBE_RADIUS).expect("ordered"); sys.jet_dim()];
    let mut rec = AssumptionRecord {
        points: 0,
        supported: 0,
        min_radius: f64::INFINITY,
        heuristic: true,
    };
    for a in &tiling.anchors {
        let v = check_assumption_interior(sys, a, &trial, probe)
            .map_err(|e| CliError::Construction(e.to_string()))?;
        rec.points += 1;
        rec.min_radius = rec.min_radius.min(v.radius);
        if !v.supported {
            return Err(CliError::Construction(format!(
                "assumption check (heuristic) fails at x = {a:?}: F(x, ·) over the jet box does not surround f(x) \
                 (signed image radius {:.3e}, worst direction {:?})",
                v.radius, v.worst_direction
            )));
        }
        rec.supported += 1;
    }
    Ok(rec)
}

fn order_record(label: String, c: &ordercomplete::nlsc::OrderCertificate) -> OrderRecord {
    OrderRecord {
        label,
        monotone: c.monotone,
        sup_gap: finite(c.sup_gap),
        inf_gap: finite(c.inf_gap),
        tol: c.tol,
        pass: c.pass,
    }
}

fn build_certificate(
    loaded: &LoadedSpec,
    config: ConfigRecord,
    assumption: Option<AssumptionRecord>,
    pair: &GlobalPair,
    result: &SchemeResult,
) -> Result<CertificateFile, CliError> {
    let sys = &loaded.system;
    let set = sys.set();
    let pc = &pair.certificate;
    let global_pair = PairRecord {
        eps: pc.eps,
        lower_file: "pair_lower.json".into(),
        upper_file: "pair_upper.json".into(),
        cells: pair.lower.cells().len(),
        lower_floor: finite(pc.lower_floor),
        lower_ceiling: finite(pc.lower_ceiling),
        upper_floor: finite(pc.upper_floor),
        upper_ceiling: finite(pc.upper_ceiling),
        points: pc.points,
        pass: pc.pass,
    };
    let stages = result
        .stages
        .iter()
        .map(|s| {
            let c = &s.certificate;
            let mut j_cells = vec![0; s.i_cells.len()];
            for &p in &s.parent {
                j_cells[p] += 1;
            }
            let band_widths = (0..set.dim())
                .map(|slot| {
                    s.lower
                        .iter()
                        .zip(&s.upper)
                        .map(|(l, u)| u[slot] - l[slot])
                        .fold(0.0, f64::max)
                })
                .collect();
            StageRecord {
                n: s.n,
                file: stage_file(s.n),
                i_cells: s
                    .i_cells
                    .iter()
                    .map(|c| CellBox {
                        lo: c.lo.clone(),
                        hi: c.hi.clone(),
                    })
                    .collect(),
                eps: s.eps.clone(),
                anchor_jets: s.anchor_jets.clone(),
                lower: s.lower.clone(),
                upper: s.upper.clone(),
                j_cells,
                margins: StageMargins {
                    bracket_lower: finite(c.bracket_lower),
                    bracket_upper: finite(c.bracket_upper),
                    nesting: finite(c.nesting),
                    containment: finite(c.containment),
                    width_margin: finite(c.width_margin),
                    width_ratio: c.width_ratio,
                },
                band_widths,
                bracket: c.bracket,
                nested: c.nested,
                narrow: c.narrow,
            }
        })
        .collect();
    let band_checks = result
        .band_checks
        .iter()
        .map(|b| order_record(set.label(b.slot), &b.certificate))
        .collect();
    let operator_checks = result
        .operator_checks
        .iter()
        .enumerate()
        .map(|(j, c)| order_record(format!("F{}", j + 1), c))
        .collect();

    let reference = match &loaded.exact {
        Some(u) => {
            let r =
                compare_reference(result, u).map_err(|e| CliError::Construction(e.to_string()))?;
            Some(ReferenceRecord {
                labels: r.labels,
                distances: r.distances,
                contained: r.contained,
            })
        }
        None => None,
    };

    // nested bands, judged against the final width bound 4 ε_max / N
    let terms = result
        .stages
        .iter()
        .map(|s| {
            (0..set.dim())
                .map(|slot| {
                    let (l, u) = s.band(slot, &result.grid)?;
                    Ok(OrderInterval::new(l, u)
                        .map_err(ordercomplete::solver::SolverError::from)?)
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let seq = IntervalSequence::new(terms).map_err(|e| CliError::Construction(e.to_string()))?;
    let eps_max = result.stages[0].eps.iter().cloned().fold(0.0, f64::max);
    let tol = 4.0 * eps_max / result.stages.len() as f64;
    let limits = nested_limit_check(&seq, tol)
        .map_err(|e| CliError::Construction(e.to_string()))?
        .iter()
        .enumerate()
        .map(|(slot, v)| LimitRecord {
            label: set.label(slot),
            tol,
            converges: v.converges(),
            max_width: match v {
                LimitVerdict::Converges { max_width, .. }
                | LimitVerdict::Slow { max_width, .. } => *max_width,
            },
        })
        .collect();

    let mut failures = result.failures.clone();
    if !pc.pass {
        failures.insert(0, "global pair violates the strict bracket".into());
    }
    Ok(CertificateFile {
        schema: SCHEMA,
        spec_file: SPEC_FILE.into(),
        config,
        assumption,
        global_pair,
        stages,
        band_checks,
        operator_checks,
        final_residual: result.final_residual,
        reference,
        limits,
        verdict: pc.pass && result.verdict,
        failures,
    })
}

fn json<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn write_artifacts(
    cfg: &RunConfig,
    loaded: &LoadedSpec,
    pair: &GlobalPair,
    result: &SchemeResult,
    cert: &CertificateFile,
) -> Result<(), CliError> {
    let out = &cfg.out;
    write_atomic(&out.join(SPEC_FILE), loaded.text.as_bytes())?;
    write_atomic(
        &out.join(&cert.global_pair.lower_file),
        &json(&pair.lower.to_file()),
    )?;
    write_atomic(
        &out.join(&cert.global_pair.upper_file),
        &json(&pair.upper.to_file()),
    )?;
    for s in &result.stages {
        write_atomic(&out.join(stage_file(s.n)), &json(&s.v.to_file()))?;
    }
    if cfg.emit_samples {
        let dir = out.join("samples");
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let sys = &loaded.system;
        let set = sys.set();
        let csv_err = |e: ordercomplete::jets::JetError| CliError::Construction(e.to_string());
        for (j, f) in result.f.iter().enumerate() {
            write_atomic(
                &dir.join(format!("f{}.csv", j + 1)),
                write_csv(f).as_bytes(),
            )?;
        }
        for s in &result.stages {
            for slot in 0..set.dim() {
                let (i, alpha) = set.unslot(slot);
                let name = file_label(&set.label(slot));
                let d = sample_component(&s.v, i, alpha, &result.grid).map_err(csv_err)?;
                let (l, u) = s.band(slot, &result.grid)?;
                write_atomic(
                    &dir.join(format!("stage{}_D_{name}.csv", s.n)),
                    write_csv(&d).as_bytes(),
                )?;
                write_atomic(
                    &dir.join(format!("stage{}_lambda_{name}.csv", s.n)),
                    write_csv(&l).as_bytes(),
                )?;
                write_atomic(
                    &dir.join(format!("stage{}_mu_{name}.csv", s.n)),
                    write_csv(&u).as_bytes(),
                )?;
            }
            let t = sys
                .apply_operator(&s.v, &result.grid)
                .map_err(|e| CliError::Construction(e.to_string()))?;
            for (j, tj) in t.iter().enumerate() {
                write_atomic(
                    &dir.join(format!("stage{}_T{}.csv", s.n, j + 1)),
                    write_csv(tj).as_bytes(),
                )?;
            }
        }
    }
    write_atomic(&out.join(CERTIFICATE_FILE), &json(cert))
}

fn opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.3e}"))
}

/// Human-readable report. Passing checks are evidence, not proof.
pub(crate) fn summary(c: &CertificateFile) -> String {
    let mut s = String::new();
    let verdict = if c.verdict {
        "PASS (evidence, not proof)"
    } else {
        "FAIL"
    };
    let _ = writeln!(s, "verdict: {verdict}");
    match &c.assumption {
        Some(a) => {
            let _ = writeln!(
                s,
                "assumption probe: HEURISTIC, supported at {}/{} anchors, smallest image radius {:.3e}",
                a.supported, a.points, a.min_radius
            );
        }
        None => {
            let _ = writeln!(s, "assumption probe: skipped");
        }
    }
    let _ = writeln!(
        s,
        "config: gamma = {}, N = {}, eps_max = {}, grid = {:?}, delta = {:.4}, seed = {}",
        c.config.gamma,
        c.config.stages,
        c.config.eps_max,
        c.config.resolution,
        c.config.delta,
        c.config.seed
    );
    let p = &c.global_pair;
    let _ = writeln!(
        s,
        "global pair (eps = {}): {} on {} points, {} cells; margins {} {} {} {}",
        p.eps,
        if p.pass { "pass" } else { "FAIL" },
        p.points,
        p.cells,
        opt(p.lower_floor),
        opt(p.lower_ceiling),
        opt(p.upper_floor),
        opt(p.upper_ceiling)
    );
    for st in &c.stages {
        let flag = |b: bool| if b { "pass" } else { "FAIL" };
        let _ = writeln!(
            s,
            "stage {}: bracket {} [{} / {}], nesting {} [{} / {}], width {} [ratio {:.4}], {} J-cells",
            st.n,
            flag(st.bracket),
            opt(st.margins.bracket_lower),
            opt(st.margins.bracket_upper),
            flag(st.nested),
            opt(st.margins.nesting),
            opt(st.margins.containment),
            flag(st.narrow),
            st.margins.width_ratio,
            st.j_cells.iter().sum::<usize>()
        );
    }
    for b in &c.band_checks {
        let _ = writeln!(
            s,
            "band {}: monotone {}, gaps {} / {} (tol {:.1e}, gap test {})",
            b.label,
            b.monotone,
            opt(b.sup_gap),
            opt(b.inf_gap),
            b.tol,
            if b.pass { "pass" } else { "not met" }
        );
    }
    for o in &c.operator_checks {
        let _ = writeln!(
            s,
            "T V_n -> f for {}: {}",
            o.label,
            if o.pass { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(s, "final residual ‖T V_N - f‖∞ = {:.3e}", c.final_residual);
    if let Some(r) = &c.reference {
        let _ = writeln!(s, "reference solution inside every band: {}", r.contained);
    }
    for f in &c.failures {
        let _ = writeln!(s, "failure: {f}");
    }
    s
}
