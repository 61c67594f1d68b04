use std::io::Write;
use std::path::Path;

use dicke_fcs::analytics::{
    current_closed_form, equilibrium_cumulants_high_t, equilibrium_moments, scaling_regime,
    thermal_conductance, RegimeThresholds,
};
use dicke_fcs::fcs::{
    cross_validate, cumulants_eigenvalue, cumulants_resolvent, current_numeric, CumulantSet,
    EigenvalueOptions, METHOD_TOLERANCE,
};
use dicke_fcs::fluctuation::{fluctuation_theorem_check, symmetry_check};
use dicke_fcs::model::{effective_occupation, stationary_distribution};
use dicke_fcs::oracle::{build_full_generator, oracle_current_and_cumulants};
use dicke_fcs::transient::{
    evolve_populations, finite_bandwidth_distribution, flash_rate, pn_distribution,
    propagate_n_resolved, windowed_distribution, NResolvedState, TransientOptions,
};
use dicke_fcs::{ReservoirLabel, SystemParams};

use crate::args::{
    CumulantArgs, EquilibriumArgs, Initial, Method, PointArgs, TransientMode, VerifyFtArgs,
};
use crate::error::{CliError, CliResult};
use crate::scenario::{build, counted_label, inverse_temperatures, single_n, Config};

fn point(args: &PointArgs, config: &Config) -> CliResult<(SystemParams, ReservoirLabel)> {
    let system = config.fill(&args.system)?;
    let params = build(&system, single_n(&system)?)?;
    let counted = counted_label(args.counted, &params);
    params.reservoir(counted)?;
    Ok((params, counted))
}

fn relative(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

/// Discrepancy floor for cumulants that vanish by symmetry.
fn floor_of(set: &CumulantSet) -> f64 {
    1e-3 * set.values().iter().map(|v| v.abs()).fold(f64::MIN_POSITIVE, f64::max)
}

fn label(r: ReservoirLabel) -> &'static str {
    match r {
        ReservoirLabel::Source => "source",
        ReservoirLabel::Drain => "drain",
        ReservoirLabel::Single => "single",
    }
}

pub fn current(args: &PointArgs, config: &Config) -> CliResult<()> {
    let (params, counted) = point(args, config)?;
    let bath = effective_occupation(&params)?;
    let regime = scaling_regime(params.n_atoms(), bath.n_m, RegimeThresholds::default())?;
    println!("N = {}", params.n_atoms());
    println!("n_M = {}", bath.n_m);
    if params.source().is_ok() {
        println!("current = {}", current_closed_form(&params)?);
    }
    println!("current ({}, numeric) = {}", label(counted), current_numeric(&params, counted)?);
    println!("sigma_N = {}", regime.sigma_n);
    println!("sigma_N / N = {}", regime.sigma_n / params.n_atoms() as f64);
    println!("regime = {}", regime.regime.as_str());
    Ok(())
}

pub fn cumulants(args: &CumulantArgs, config: &Config) -> CliResult<()> {
    let (params, counted) = point(&args.point, config)?;
    let method = args.method.unwrap_or(Method::Res);
    let order = args.order;
    let eig = || cumulants_eigenvalue(&params, counted, order, &EigenvalueOptions::default());
    println!("N = {}  counted = {}", params.n_atoms(), label(counted));
    match method {
        Method::Res | Method::Eig => {
            let set = if method == Method::Res {
                cumulants_resolvent(&params, counted, order)?
            } else {
                eig()?
            };
            println!("method = {}", set.method.as_str());
            for k in 1..=order {
                match set.shift(k) {
                    Some(s) => println!("C{k} = {:.16e}  (error {:.1e}, S{k} = {s:.16e})", set.c(k), set.error(k)),
                    None => println!("C{k} = {:.16e}  (error {:.1e})", set.c(k), set.error(k)),
                }
            }
            Ok(())
        }
        Method::Both => {
            let res = cumulants_resolvent(&params, counted, order)?;
            let eig = eig()?;
            let floor = floor_of(&res);
            let mut worst = (0.0, 0);
            println!("k  resolvent  eigenvalue  relative discrepancy");
            for k in 1..=order {
                let d = relative(eig.c(k), res.c(k), floor);
                if d > worst.0 {
                    worst = (d, k);
                }
                println!("{k}  {:.16e}  {:.16e}  {d:.3e}", res.c(k), eig.c(k));
            }
            if worst.0 > METHOD_TOLERANCE {
                return Err(CliError::validation(
                    format!("C{}", worst.1),
                    format!("methods differ by {:.3e} > {METHOD_TOLERANCE:e}", worst.0),
                ));
            }
            Ok(())
        }
    }
}

fn initial_state(params: &SystemParams, initial: Initial) -> CliResult<Vec<f64>> {
    let n = params.n_atoms();
    Ok(match initial {
        Initial::Excited => {
            let mut rho = vec![0.0; n + 1];
            rho[n] = 1.0;
            rho
        }
        Initial::Ground => {
            let mut rho = vec![0.0; n + 1];
            rho[0] = 1.0;
            rho
        }
        Initial::Stationary => stationary_distribution(params)?,
    })
}

fn open(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            Ok(Box::new(std::io::BufWriter::new(file)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn write_pairs(path: Option<&Path>, header: [&str; 2], rows: &[(String, f64)]) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Io {
        path: path.unwrap_or(Path::new("<stdout>")).to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_writer(open(path)?);
    w.write_record(header).map_err(io)?;
    for (a, b) in rows {
        w.write_record([a.clone(), format!("{b:.16e}")]).map_err(io)?;
    }
    w.flush().map_err(|e| io(e.into()))
}

pub fn transient(mode: &TransientMode, config: &Config) -> CliResult<()> {
    match mode {
        TransientMode::Pn {
            point: p,
            t,
            initial,
            out,
        } => {
            let (params, counted) = point(p, config)?;
            let rho = initial_state(&params, *initial)?;
            let options = TransientOptions {
                counted: Some(counted),
                ..Default::default()
            };
            let state = propagate_n_resolved(&NResolvedState::from_populations(&rho)?, &params, *t, &options)?;
            let pn = pn_distribution(&state);
            let rows: Vec<_> = pn.iter().map(|(n, p)| (n.to_string(), p)).collect();
            write_pairs(out.as_deref(), ["n", "probability"], &rows)?;
            if out.is_some() {
                let k = pn.cumulants(2);
                println!("t = {t}  total = {:.16e}  mean = {:.16e}  variance = {:.16e}", pn.total(), k[0], k[1]);
            }
            Ok(())
        }
        TransientMode::Flash {
            point: p,
            t_max,
            points,
            out,
        } => {
            let (params, counted) = point(p, config)?;
            if *points < 2 || !(t_max.is_finite() && *t_max > 0.0) {
                return Err(CliError::usage("flash needs --t-max > 0 and --points >= 2"));
            }
            let times: Vec<f64> = (0..*points)
                .map(|i| t_max * i as f64 / (*points - 1) as f64)
                .collect();
            let rates = flash_rate(&params, &times, Some(counted))?;
            let rows: Vec<_> = times
                .iter()
                .zip(rates)
                .map(|(t, r)| (format!("{t:.16e}"), r))
                .collect();
            write_pairs(out.as_deref(), ["t", "rate"], &rows)
        }
        TransientMode::Window {
            point: p,
            t,
            resolution,
            initial,
        } => {
            let (params, counted) = point(p, config)?;
            let rho = evolve_populations(&params, &initial_state(&params, *initial)?, *t)?;
            let options = TransientOptions {
                counted: Some(counted),
                ..Default::default()
            };
            let chain = windowed_distribution(&params, &rho, *resolution, &options)?;
            let quad = finite_bandwidth_distribution(
                &params,
                &rho,
                *resolution,
                chain.n_min()..=chain.n_max(),
                Some(counted),
            )?;
            println!("n  quadrature  count-resolved");
            let mut worst = 0.0f64;
            for ((n, a), b) in chain.iter().zip(&quad) {
                worst = worst.max((a - b).abs());
                println!("{n}  {b:.16e}  {a:.16e}");
            }
            println!("max difference = {worst:.3e}");
            if worst > 1e-7 {
                return Err(CliError::validation("windowed P_n", format!("routes differ by {worst:.3e}")));
            }
            Ok(())
        }
    }
}

pub fn equilibrium(args: &EquilibriumArgs, config: &Config) -> CliResult<()> {
    let n = match args.n {
        Some(n) => n,
        None => config.get("N")?.unwrap_or(1),
    };
    let t = args.t.map_or_else(|| config.get("T"), |v| Ok(Some(v)))?.unwrap_or(1.0);
    let omega = args.omega.map_or_else(|| config.get("omega"), |v| Ok(Some(v)))?.unwrap_or(1.0);
    let gs = args.gamma_s.map_or_else(|| config.get("gammaS"), |v| Ok(Some(v)))?.unwrap_or(1.0);
    let gd = args.gamma_d.map_or_else(|| config.get("gammaD"), |v| Ok(Some(v)))?.unwrap_or(1.0);
    if !(t > 0.0 && t.is_finite()) {
        return Err(CliError::usage(format!("--T must be finite and > 0, got {t}")));
    }
    let x = omega / t;
    let m: Vec<f64> = (1..=4)
        .map(|k| equilibrium_moments(n, x, k))
        .collect::<Result<_, _>>()?;
    let k = [
        m[0],
        m[1] - m[0] * m[0],
        m[2] - 3.0 * m[1] * m[0] + 2.0 * m[0].powi(3),
        m[3] - 4.0 * m[2] * m[0] - 3.0 * m[1] * m[1] + 12.0 * m[1] * m[0] * m[0] - 6.0 * m[0].powi(4),
    ];
    let high = equilibrium_cumulants_high_t(n)?;
    println!("N = {n}  T = {t}  omega = {omega}");
    println!("k  <n^k>  cumulant  high-T limit");
    for i in 0..4 {
        println!("{}  {:.16e}  {:.16e}  {:.16e}", i + 1, m[i], k[i], high[i]);
    }
    let g = thermal_conductance(n, omega, t, gs, gd)?;
    println!("thermal conductance = {:.16e}", g.exact);
    println!("  high-T form = {:.16e}", g.high_temperature);
    println!("  low-T form = {:.16e}", g.low_temperature);
    Ok(())
}

pub fn verify_ft(args: &VerifyFtArgs, config: &Config) -> CliResult<()> {
    let (params, counted) = point(&args.point, config)?;
    if args.nmax < 1 {
        return Err(CliError::usage("--nmax must be >= 1"));
    }
    let system = config.fill(&args.point.system)?;
    let chi: Vec<f64> = (0..13).map(|i| -3.0 + 0.5 * i as f64).collect();
    let sym = symmetry_check(&params, &chi, counted, inverse_temperatures(&system))?;
    println!("counted = {}", label(counted));
    println!("affinity A = {:.16e}", sym.affinity);
    if let Some(a) = sym.thermal_affinity {
        println!("Omega (beta_S - beta_D) = {a:.16e}");
    }
    println!("polynomial symmetry violation = {:.3e}", sym.polynomial_violation);
    match sym.eigenvalue_violation {
        Some(v) => println!("eigenvalue symmetry violation = {v:.3e} ({} points)", sym.tracked_points),
        None => println!("eigenvalue symmetry: no point could be tracked"),
    }
    let ft = fluctuation_theorem_check(&params, args.t, 1..=args.nmax, counted)?;
    println!("t = {}  predicted slope = {:.16e}", ft.time, ft.slope);
    println!("n  ln(P_n/P_-n)  predicted");
    for (n, r) in &ft.log_ratios {
        println!("{n}  {r:.16e}  {:.16e}", ft.slope * *n as f64);
    }
    println!("max deviation = {:.3e}", ft.max_deviation);

    if sym.polynomial_violation > 1e-8 {
        return Err(CliError::validation("polynomial symmetry", format!("{:.3e}", sym.polynomial_violation)));
    }
    if let Some(v) = sym.eigenvalue_violation.filter(|v| *v > 1e-8) {
        return Err(CliError::validation("eigenvalue symmetry", format!("{v:.3e}")));
    }
    if let Some(a) = sym.thermal_affinity {
        if relative(sym.affinity, a, 1e-300) > 1e-10 {
            return Err(CliError::validation("thermal affinity", format!("{} vs {a}", sym.affinity)));
        }
    }
    if ft.max_deviation > args.tolerance {
        return Err(CliError::validation(
            "fluctuation theorem",
            format!("deviation {:.3e} > {:e}", ft.max_deviation, args.tolerance),
        ));
    }
    Ok(())
}

struct OracleReport {
    cumulant_discrepancy: f64,
    population_discrepancy: f64,
}

fn oracle_compare(params: &SystemParams, counted: ReservoirLabel, verbose: bool) -> CliResult<OracleReport> {
    let full = oracle_current_and_cumulants(params, counted)?;
    let ladder = cumulants_resolvent(params, counted, 4)?;
    let floor = floor_of(&ladder);
    let mut cumulant_discrepancy = 0.0f64;
    if verbose {
        println!("k  full space  ladder  relative discrepancy");
    }
    for k in 1..=4 {
        let d = relative(full.c(k), ladder.c(k), floor);
        cumulant_discrepancy = cumulant_discrepancy.max(d);
        if verbose {
            println!("{k}  {:.16e}  {:.16e}  {d:.3e}", full.c(k), ladder.c(k));
        }
    }
    let dicke = build_full_generator(params, counted)?.dicke_populations();
    let geometric = stationary_distribution(params)?;
    let population_discrepancy = dicke
        .iter()
        .zip(&geometric)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if verbose {
        println!("stationary Dicke populations vs ladder: max difference {population_discrepancy:.3e}");
    }
    Ok(OracleReport {
        cumulant_discrepancy,
        population_discrepancy,
    })
}

const ORACLE_CUMULANT_TOLERANCE: f64 = 1e-6;
const ORACLE_POPULATION_TOLERANCE: f64 = 1e-8;

pub fn oracle(args: &PointArgs, config: &Config) -> CliResult<()> {
    let (params, counted) = point(args, config)?;
    let r = oracle_compare(&params, counted, true)?;
    if r.cumulant_discrepancy > ORACLE_CUMULANT_TOLERANCE {
        return Err(CliError::validation("oracle cumulants", format!("{:.3e}", r.cumulant_discrepancy)));
    }
    if r.population_discrepancy > ORACLE_POPULATION_TOLERANCE {
        return Err(CliError::validation("oracle populations", format!("{:.3e}", r.population_discrepancy)));
    }
    Ok(())
}

pub fn selftest() -> CliResult<()> {
    let mut failures = Vec::new();
    let mut report = |name: String, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures.push(name);
        }
    };

    let p = SystemParams::two_terminal(2, 1.0, 2.0, 1.0, 0.0)?;
    let c = current_closed_form(&p)?;
    report("current N=2 nS=2".into(), (c - 6.0 / 7.0).abs() < 1e-14, format!("{c} vs 6/7"));

    let biases = [(2.0, 0.0), (1e-4, 0.0), (5.0, 1.0), (0.3, 3.0), (1e3, 1e3)];
    for n in [1, 2, 3, 4, 8, 16] {
        for (gs, gd) in [(1.0, 1.0), (0.5, 2.0)] {
            for (ns, nd) in biases {
                let p = SystemParams::two_terminal(n, gs, ns, gd, nd)?;
                let name = format!("cross-validate N={n} gS={gs} gD={gd} nS={ns} nD={nd}");
                match cross_validate(&p) {
                    Ok(v) => {
                        let detail = match v.first_failure() {
                            Some(c) => format!("{} off by {:.3e}", c.quantity, c.discrepancy),
                            None => format!("method discrepancy {:.3e}", v.max_method_discrepancy()),
                        };
                        report(name, v.passed(), detail);
                    }
                    Err(e) => report(name, false, e.to_string()),
                }
            }
        }
    }

    for n in 1..=3 {
        for (ns, nd) in [(2.0, 0.0), (0.7, 1.9)] {
            let p = SystemParams::two_terminal(n, 0.8, ns, 1.3, nd)?;
            let name = format!("oracle N={n} nS={ns} nD={nd}");
            match oracle_compare(&p, ReservoirLabel::Drain, false) {
                Ok(r) => report(
                    name,
                    r.cumulant_discrepancy <= ORACLE_CUMULANT_TOLERANCE
                        && r.population_discrepancy <= ORACLE_POPULATION_TOLERANCE,
                    format!(
                        "cumulants {:.3e}, populations {:.3e}",
                        r.cumulant_discrepancy, r.population_discrepancy
                    ),
                ),
                Err(e) => report(name, false, e.to_string()),
            }
        }
    }

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::validation(
            "selftest",
            format!("{} check(s) failed, first: {}", failures.len(), failures[0]),
        ))
    }
}
