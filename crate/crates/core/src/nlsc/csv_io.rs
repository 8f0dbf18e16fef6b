//! CSV form of a [`GridFunction`]: `x1,...,xn,value,skeleton`, one row per
//! grid point, infinities written as `+inf` / `-inf`.

use std::sync::Arc;

use super::{GridDomain, GridFunction, NlscError};

fn fmt_value(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

fn parse_value(s: &str) -> Result<f64, NlscError> {
    match s.trim() {
        "+inf" | "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t
            .parse()
            .map_err(|_| NlscError::Csv(format!("bad number {t:?}"))),
    }
}

pub fn write_csv(u: &GridFunction) -> String {
    let d = u.domain();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=d.dim()).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    header.push("skeleton".into());
    w.write_record(&header).expect("in-memory write");
    for p in 0..d.len() {
        let mut row: Vec<String> = d.point(p).into_iter().map(fmt_value).collect();
        row.push(fmt_value(u.value(p)));
        row.push(if d.is_skeleton(p) { "1" } else { "0" }.into());
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Rebuilds the grid from the distinct coordinates on each axis.
pub fn read_csv(text: &str) -> Result<GridFunction, NlscError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| NlscError::Csv(e.to_string()))?
        .clone();
    let cols = header.len();
    if cols < 3 || &header[cols - 2] != "value" || &header[cols - 1] != "skeleton" {
        return Err(NlscError::Csv(
            "header must be x1,...,xn,value,skeleton".into(),
        ));
    }
    let n = cols - 2;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| NlscError::Csv(e.to_string()))?;
        let x = (0..n)
            .map(|i| parse_value(&rec[i]))
            .collect::<Result<Vec<_>, _>>()?;
        let v = parse_value(&rec[n])?;
        let s = match rec[n + 1].trim() {
            "0" => false,
            "1" => true,
            other => return Err(NlscError::Csv(format!("bad skeleton flag {other:?}"))),
        };
        rows.push((x, v, s));
    }
    let mut axes: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (x, _, _) in &rows {
        for (a, &c) in x.iter().enumerate() {
            axes[a].push(c);
        }
    }
    for a in axes.iter_mut() {
        a.sort_by(f64::total_cmp);
        a.dedup();
    }
    let lo = axes
        .iter()
        .map(|a| a.first().copied().unwrap_or(0.0))
        .collect();
    let hi = axes
        .iter()
        .map(|a| a.last().copied().unwrap_or(0.0))
        .collect();
    let res = axes.iter().map(Vec::len).collect();
    let grid = GridDomain::new(lo, hi, res)?;
    if rows.len() != grid.len() {
        return Err(NlscError::Csv(format!(
            "{} rows for a grid of {} points",
            rows.len(),
            grid.len()
        )));
    }
    let mut values = vec![f64::NAN; grid.len()];
    let mut skeleton = vec![false; grid.len()];
    for (x, v, s) in rows {
        let idx: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(a, &c)| grid.nearest_index(a, c))
            .collect();
        if idx
            .iter()
            .enumerate()
            .any(|(a, &i)| grid.coord(a, i) != x[a])
        {
            return Err(NlscError::Csv(format!(
                "point {x:?} is not on a uniform grid"
            )));
        }
        let p = grid.flat(&idx);
        if !values[p].is_nan() {
            return Err(NlscError::Csv(format!("duplicate grid point {x:?}")));
        }
        values[p] = v;
        skeleton[p] = s;
    }
    let grid = grid.with_skeleton(skeleton)?;
    GridFunction::new(Arc::new(grid), values)
}
