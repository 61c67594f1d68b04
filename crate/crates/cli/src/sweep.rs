//! Parameter sweeps and their CSV form.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use dicke_fcs::analytics::{scaling_regime, RegimeThresholds};
use dicke_fcs::fcs::{cumulants_eigenvalue, cumulants_resolvent, EigenvalueOptions, METHOD_TOLERANCE};
use dicke_fcs::model::effective_occupation;
use dicke_fcs::{ReservoirLabel, SystemParams};

use crate::args::{Method, SweepArgs, SweepVar};
use crate::error::{CliError, CliResult};
use crate::scenario::{build, is_single_bath, Config};

pub const HEADER: [&str; 12] = [
    "sweep_var", "N", "nS", "nD", "gammaS", "gammaD", "C1", "C2", "C3", "C4", "sigmaN", "regime",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub sweep: f64,
    pub n_atoms: usize,
    pub n_s: f64,
    pub n_d: f64,
    pub gamma_s: f64,
    pub gamma_d: f64,
    pub cumulants: [Option<f64>; 4],
    pub sigma_n: f64,
    pub regime: &'static str,
    /// Largest eigenvalue/resolvent discrepancy when both were computed.
    pub discrepancy: Option<f64>,
}

impl Row {
    fn record(&self) -> Vec<String> {
        let num = |v: f64| format!("{v:.16e}");
        let mut out = vec![
            num(self.sweep),
            self.n_atoms.to_string(),
            num(self.n_s),
            num(self.n_d),
            num(self.gamma_s),
            num(self.gamma_d),
        ];
        out.extend(self.cumulants.iter().map(|c| c.map(num).unwrap_or_default()));
        out.push(num(self.sigma_n));
        out.push(self.regime.to_string());
        out
    }
}

/// `1,3` -> `[1, 3]`; `none` or an empty string -> `[]`.
pub fn parse_orders(text: &str) -> CliResult<Vec<usize>> {
    let text = text.trim();
    if text.is_empty() || text.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    let mut orders = text
        .split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(k) if (1..=4).contains(&k) => Ok(k),
            _ => Err(CliError::usage(format!("--orders: `{s}` is not an order in 1..=4"))),
        })
        .collect::<CliResult<Vec<_>>>()?;
    orders.sort_unstable();
    orders.dedup();
    Ok(orders)
}

pub fn grid(log: Option<&[f64]>, lin: Option<&[f64]>, points: usize) -> CliResult<Vec<f64>> {
    if points < 2 {
        return Err(CliError::usage("--points must be at least 2"));
    }
    let last = (points - 1) as f64;
    match (log, lin) {
        (Some(&[a, b]), None) => {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(CliError::usage("--log endpoints must be finite and > 0"));
            }
            let (la, lb) = (a.log10(), b.log10());
            Ok((0..points)
                .map(|i| 10f64.powf(la + (lb - la) * i as f64 / last))
                .collect())
        }
        (None, Some(&[a, b])) => {
            if !(a.is_finite() && b.is_finite()) {
                return Err(CliError::usage("--lin endpoints must be finite"));
            }
            Ok((0..points).map(|i| a + (b - a) * i as f64 / last).collect())
        }
        _ => Err(CliError::usage("give exactly one of --log FROM TO or --lin FROM TO")),
    }
}

fn check_domain(var: SweepVar, values: &[f64]) -> CliResult<()> {
    let name = var_name(var);
    for &v in values {
        let ok = match var {
            SweepVar::NS | SweepVar::ND | SweepVar::GammaS | SweepVar::GammaD => v >= 0.0,
            SweepVar::TS | SweepVar::TD => v > 0.0,
            SweepVar::N => v >= 1.0 && (v - v.round()).abs() <= 1e-9 * v,
        };
        if !ok {
            return Err(CliError::usage(format!("grid value {v} is outside the domain of {name}")));
        }
    }
    Ok(())
}

fn var_name(var: SweepVar) -> &'static str {
    match var {
        SweepVar::NS => "nS",
        SweepVar::ND => "nD",
        SweepVar::N => "N",
        SweepVar::GammaS => "gammaS",
        SweepVar::GammaD => "gammaD",
        SweepVar::TS => "TS",
        SweepVar::TD => "TD",
    }
}

/// One grid point: the swept value and the scenario it produces.
struct Task {
    sweep: f64,
    params: SystemParams,
}

fn tasks(args: &SweepArgs, config: &Config) -> CliResult<Vec<Task>> {
    let base = config.fill(&args.system)?;
    if is_single_bath(&base) {
        return Err(CliError::usage("sweeps need a source/drain scenario"));
    }
    let values = grid(args.log.as_deref(), args.lin.as_deref(), args.points)?;
    check_domain(args.var, &values)?;
    let sizes = match (args.var, base.n.is_empty()) {
        (SweepVar::N, true) => Vec::new(),
        (SweepVar::N, false) => return Err(CliError::usage("--N cannot be fixed while sweeping N")),
        (_, true) => vec![1],
        (_, false) => base.n.clone(),
    };
    let mut out = Vec::new();
    let mut point = |n: usize, v: f64| -> CliResult<()> {
        let mut a = base.clone();
        match args.var {
            SweepVar::NS => (a.n_s, a.t_s) = (Some(v), None),
            SweepVar::ND => (a.n_d, a.t_d) = (Some(v), None),
            SweepVar::TS => (a.n_s, a.t_s) = (None, Some(v)),
            SweepVar::TD => (a.n_d, a.t_d) = (None, Some(v)),
            SweepVar::GammaS => a.gamma_s = Some(v),
            SweepVar::GammaD => a.gamma_d = Some(v),
            SweepVar::N => {}
        }
        out.push(Task {
            sweep: v,
            params: build(&a, n)?,
        });
        Ok(())
    };
    if args.var == SweepVar::N {
        for &v in &values {
            point(v.round() as usize, v)?;
        }
    } else {
        for &n in &sizes {
            for &v in &values {
                point(n, v)?;
            }
        }
    }
    out.sort_by(|a, b| {
        a.params
            .n_atoms()
            .cmp(&b.params.n_atoms())
            .then(a.sweep.total_cmp(&b.sweep))
    });
    Ok(out)
}

fn relative(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

fn evaluate(task: &Task, orders: &[usize], method: Method) -> CliResult<(Row, Vec<String>)> {
    let p = &task.params;
    let (s, d) = (p.source()?, p.drain()?);
    let bath = effective_occupation(p)?;
    let regime = scaling_regime(p.n_atoms(), bath.n_m, RegimeThresholds::default())?;
    let mut warnings = Vec::new();
    let mut cumulants = [None; 4];
    let mut discrepancy = None;
    if let Some(&top) = orders.last() {
        let counted = ReservoirLabel::Drain;
        let run = |m: Method| match m {
            Method::Eig => cumulants_eigenvalue(p, counted, top, &EigenvalueOptions::default()),
            _ => cumulants_resolvent(p, counted, top),
        };
        let primary = run(if method == Method::Eig { Method::Eig } else { Method::Res });
        let label = format!("N={} at {:e}", p.n_atoms(), task.sweep);
        match &primary {
            Ok(set) => {
                for &k in orders {
                    cumulants[k - 1] = Some(set.c(k));
                }
            }
            Err(e) => warnings.push(format!("{label}: {e}")),
        }
        if method == Method::Both {
            match (run(Method::Eig), &primary) {
                (Ok(eig), Ok(res)) => {
                    let scale = res.values().iter().map(|v| v.abs()).fold(f64::MIN_POSITIVE, f64::max);
                    let worst = orders
                        .iter()
                        .map(|&k| relative(eig.c(k), res.c(k), 1e-3 * scale))
                        .fold(0.0, f64::max);
                    discrepancy = Some(worst);
                }
                (Err(e), _) => warnings.push(format!("{label}: eigenvalue route: {e}")),
                _ => {}
            }
        }
    }
    let row = Row {
        sweep: task.sweep,
        n_atoms: p.n_atoms(),
        n_s: s.occupation,
        n_d: d.occupation,
        gamma_s: s.gamma,
        gamma_d: d.gamma,
        cumulants,
        sigma_n: regime.sigma_n,
        regime: regime.regime.as_str(),
        discrepancy,
    };
    Ok((row, warnings))
}

/// Compute every grid point in parallel; rows come back in grid order.
pub fn run_sweep(args: &SweepArgs, config: &Config) -> CliResult<Vec<Row>> {
    let orders = parse_orders(&args.orders)?;
    let method = args.method.unwrap_or(Method::Res);
    let tasks = tasks(args, config)?;
    let results: Vec<CliResult<(Row, Vec<String>)>> =
        tasks.par_iter().map(|t| evaluate(t, &orders, method)).collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let (row, warnings) = r?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn emit_csv<W: Write>(rows: &[Row], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(rows: &[Row], path: Option<&Path>) -> CliResult<()> {
    if rows.is_empty() {
        return Err(CliError::usage("sweep produced no rows"));
    }
    let io = |path: &Path, e: csv::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    match path {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            emit_csv(rows, std::io::BufWriter::new(file)).map_err(|e| io(path, e))
        }
        None => emit_csv(rows, std::io::stdout().lock()).map_err(|e| io(Path::new("<stdout>"), e)),
    }
}

/// Fail when `--method both` found the routes disagreeing.
pub fn check_discrepancies(rows: &[Row]) -> CliResult<()> {
    let worst = rows
        .iter()
        .filter_map(|r| r.discrepancy.map(|d| (d, r)))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    if let Some((d, row)) = worst {
        eprintln!("largest method discrepancy: {d:.3e} (N={}, sweep={:e})", row.n_atoms, row.sweep);
        if d > METHOD_TOLERANCE {
            return Err(CliError::validation(
                "method agreement",
                format!("relative discrepancy {d:.3e} > {METHOD_TOLERANCE:e}"),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_hits_endpoints() {
        let g = grid(Some(&[1e-3, 1e6]), None, 91).unwrap();
        assert_eq!(g.len(), 91);
        assert!((g[0] - 1e-3).abs() < 1e-18);
        assert!((g[90] / 1e6 - 1.0).abs() < 1e-12);
        assert!((g[30] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(grid(Some(&[0.0, 1.0]), None, 3).is_err());
        assert!(grid(None, Some(&[0.0, 1.0]), 1).is_err());
        assert!(grid(None, None, 3).is_err());
    }

    #[test]
    fn orders_parse() {
        assert_eq!(parse_orders("3,1,3").unwrap(), vec![1, 3]);
        assert!(parse_orders("none").unwrap().is_empty());
        assert!(parse_orders("").unwrap().is_empty());
        assert!(parse_orders("5").is_err());
    }

    #[test]
    fn empty_fields_for_missing_cumulants() {
        let row = Row {
            sweep: 1.0,
            n_atoms: 2,
            n_s: 1.0,
            n_d: 0.0,
            gamma_s: 1.0,
            gamma_d: 1.0,
            cumulants: [Some(0.5), None, None, None],
            sigma_n: 1.5,
            regime: "crossover",
            discrepancy: None,
        };
        let mut buf = Vec::new();
        emit_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line.split(',').count(), 12);
        assert!(line.contains(",5.0000000000000000e-1,,,,"));
    }
}
