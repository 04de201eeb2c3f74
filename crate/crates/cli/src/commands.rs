use std::collections::BTreeMap;

use nopa_bell::analytics::{self, ch_closed_form};
use nopa_bell::bell::{self, BellSettings, Combination, OptimizerConfig};
use nopa_bell::fock::{Cutoff, FockConfig};
use nopa_bell::mc::{self, DetectorModel, EstimateWithError, Sampler};
use nopa_bell::{ComplexAmplitude, PhasePoint, SqueezingParam};
use serde_json::{json, Value};

use crate::output::{emit, json_bytes, num, sig17, Cell, Column, Format, Table};
use crate::{
    ChGridArgs, CliError, Displacements, EvalArgs, McArgs, OptimizeArgs, PhaseGridArgs, Quantity, SettingsSource,
};

const AMPLITUDE: &str = "coherent amplitude";
const DIMENSIONLESS: &str = "dimensionless";
const DENSITY: &str = "per phase-space volume";
const PROBABILITY: &str = "probability";
const INTENSITY: &str = "mean photon number";

type Params = BTreeMap<String, Value>;

fn squeezing(r: f64) -> Result<SqueezingParam, CliError> {
    Ok(SqueezingParam::new(r)?)
}

fn range_error(msg: String) -> CliError {
    CliError::Lib(nopa_bell::Error::InvalidInput(msg))
}

/// `n` points from `lo` to `hi`, both ends included.
pub fn linspace(lo: f64, hi: f64, n: usize, flag: &str) -> Result<Vec<f64>, CliError> {
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(range_error(format!("{flag}: need finite bounds with min ≤ max, got [{lo}, {hi}]")));
    }
    if n == 0 || (n == 1 && lo != hi) {
        return Err(range_error(format!("{flag}: need at least 2 points for [{lo}, {hi}], got {n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect())
}

impl Displacements {
    fn settings(&self) -> BellSettings {
        BellSettings {
            alpha: self.alpha.unwrap_or(ComplexAmplitude::ZERO),
            alpha_prime: self.alpha_prime.unwrap_or(ComplexAmplitude::ZERO),
            beta: self.beta.unwrap_or(ComplexAmplitude::ZERO),
            beta_prime: self.beta_prime.unwrap_or(ComplexAmplitude::ZERO),
        }
    }

    fn any(&self) -> bool {
        self.alpha.is_some() || self.beta.is_some() || self.alpha_prime.is_some() || self.beta_prime.is_some()
    }

    fn any_prime(&self) -> bool {
        self.alpha_prime.is_some() || self.beta_prime.is_some()
    }
}

fn settings_params(p: &mut Params, s: &BellSettings, with_primes: bool) {
    p.insert("alpha".into(), json!(s.alpha.to_string()));
    p.insert("beta".into(), json!(s.beta.to_string()));
    if with_primes {
        p.insert("alpha_prime".into(), json!(s.alpha_prime.to_string()));
        p.insert("beta_prime".into(), json!(s.beta_prime.to_string()));
    }
}

fn formula(q: Quantity) -> &'static str {
    match q {
        Quantity::Wigner => "(4/pi^2) exp(-e^{2r}|alpha-beta*|^2 - e^{-2r}|alpha+beta*|^2)",
        Quantity::Qfunc => "exp(-|alpha|^2 - |beta|^2 + 2 tanh(r) Re(alpha beta)) / (pi^2 cosh^2 r)",
        Quantity::Parity => "exp(-e^{2r}|alpha-beta*|^2 - e^{-2r}|alpha+beta*|^2)",
        Quantity::NocountJoint => "pi^2 Q(alpha, beta)",
        Quantity::NocountSingle => "exp(-|x|^2 / cosh^2 r) / cosh^2 r",
        Quantity::Ch => "p_ab(a',b') + p_ab(a',b) + p_ab(a,b') - p_ab(a,b) - p_a(a') - p_b(b')",
        Quantity::Chsh => "E(a',b') + E(a',b) + E(a,b') - E(a,b)",
    }
}

fn quantity_name(q: Quantity) -> &'static str {
    match q {
        Quantity::Wigner => "wigner",
        Quantity::Qfunc => "qfunc",
        Quantity::Parity => "parity",
        Quantity::NocountJoint => "nocount-joint",
        Quantity::NocountSingle => "nocount-single",
        Quantity::Ch => "ch",
        Quantity::Chsh => "chsh",
    }
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let q = a.quantity;
    let r = squeezing(a.r)?;
    let bell_quantity = matches!(q, Quantity::Ch | Quantity::Chsh);
    if !bell_quantity {
        if a.intensity.is_some() || a.settings != SettingsSource::Explicit || a.disp.any_prime() {
            return Err(CliError::Usage(format!(
                "--J, --settings, --alpha-prime and --beta-prime apply only to ch and chsh, not {}",
                quantity_name(q)
            )));
        }
    } else if (a.intensity.is_some() || a.settings == SettingsSource::Optimized) && a.disp.any() {
        return Err(CliError::Usage(
            "--J and --settings optimized replace the displacement flags; give one or the other".into(),
        ));
    } else if a.intensity.is_some() && a.settings == SettingsSource::Optimized {
        return Err(CliError::Usage("--J conflicts with --settings optimized".into()));
    }

    let mut params = Params::new();
    params.insert("quantity".into(), json!(quantity_name(q)));
    params.insert("r".into(), num(r.value()));

    let mut outputs: Vec<(&str, &str, f64)> = Vec::new();
    if bell_quantity {
        let combination = if q == Quantity::Ch { Combination::Ch } else { Combination::Chsh };
        let settings = if let Some(j) = a.intensity {
            params.insert("J".into(), num(j));
            BellSettings::restricted(j)?
        } else if a.settings == SettingsSource::Optimized {
            params.insert("settings".into(), json!("optimized"));
            bell::optimize(r, combination, &OptimizerConfig::default())?.settings
        } else {
            a.disp.settings()
        };
        settings_params(&mut params, &settings, true);
        let value = match (combination, a.intensity) {
            (Combination::Ch, Some(j)) => ch_closed_form(r, j)?,
            (Combination::Ch, None) => bell::ch_general(r, &settings)?,
            (Combination::Chsh, _) => bell::chsh_combination(r, &settings)?,
        };
        let (lo, hi) = combination.bounds();
        params.insert("bound_low".into(), num(lo));
        params.insert("bound_high".into(), num(hi));
        outputs.push((quantity_name(q), if q == Quantity::Ch { PROBABILITY } else { DIMENSIONLESS }, value));
    } else {
        let s = a.disp.settings();
        settings_params(&mut params, &s, false);
        let p = PhasePoint::new(s.alpha, s.beta);
        match q {
            Quantity::Wigner => outputs.push(("wigner", DENSITY, analytics::wigner(r, p)?)),
            Quantity::Qfunc => outputs.push(("qfunc", DENSITY, analytics::qfunc(r, p)?)),
            Quantity::Parity => outputs.push(("parity", DIMENSIONLESS, analytics::parity_correlation(r, p)?)),
            Quantity::NocountJoint => outputs.push(("p_ab", PROBABILITY, analytics::nocount_joint(r, p)?)),
            Quantity::NocountSingle => {
                outputs.push(("p_a", PROBABILITY, analytics::nocount_single_a(r, s.alpha)?));
                outputs.push(("p_b", PROBABILITY, analytics::nocount_single_b(r, s.beta)?));
            }
            Quantity::Ch | Quantity::Chsh => unreachable!(),
        }
    }

    let format = a.output.format.unwrap_or(Format::Text);
    let bytes = match format {
        Format::Text => outputs.iter().map(|(_, _, v)| sig17(*v) + "\n").collect::<String>().into_bytes(),
        Format::Json => {
            let mut obj = params.clone();
            obj.insert("formula".into(), json!(formula(q)));
            for (name, _, v) in &outputs {
                obj.insert((*name).into(), num(*v));
            }
            json_bytes(&obj)?
        }
        Format::Csv => {
            let mut cols = Vec::new();
            let mut row = Vec::new();
            for (k, v) in &params {
                let unit = match k.as_str() {
                    "r" => DIMENSIONLESS,
                    "J" => INTENSITY,
                    "bound_low" | "bound_high" => {
                        if q == Quantity::Ch {
                            PROBABILITY
                        } else {
                            DIMENSIONLESS
                        }
                    }
                    "quantity" | "settings" => "label",
                    _ => AMPLITUDE,
                };
                cols.push(Column::new(k, unit));
                row.push(match v {
                    Value::Number(n) => Cell::Num(n.as_f64().unwrap()),
                    Value::String(s) => Cell::Text(s.clone()),
                    other => Cell::Text(other.to_string()),
                });
            }
            for (name, unit, v) in &outputs {
                cols.push(Column::new(name, unit));
                row.push(Cell::Num(*v));
            }
            let mut t = Table::new(cols);
            t.push(row);
            t.render(Format::Csv, Value::Null)?
        }
    };
    emit(&bytes, a.output.out.as_deref(), params, None)
}

#[derive(Debug, Clone, Copy)]
pub enum PhaseFunction {
    Wigner,
    Q,
}

pub fn phase_grid(a: PhaseGridArgs, which: PhaseFunction) -> Result<(), CliError> {
    let r = squeezing(a.r)?;
    let axis = linspace(a.grid_min, a.grid_max, a.grid_points, "--grid-*")?;
    let name = match which {
        PhaseFunction::Wigner => "wigner",
        PhaseFunction::Q => "qfunc",
    };
    let mut table =
        Table::new(vec![Column::new("alpha", AMPLITUDE), Column::new("beta", AMPLITUDE), Column::new(name, DENSITY)]);
    for &x in &axis {
        for &y in &axis {
            let p = PhasePoint::real(x, y)?;
            let v = match which {
                PhaseFunction::Wigner => analytics::wigner(r, p)?,
                PhaseFunction::Q => analytics::qfunc(r, p)?,
            };
            table.push(vec![Cell::Num(x), Cell::Num(y), Cell::Num(v)]);
        }
    }
    let mut params = Params::new();
    params.insert("function".into(), json!(name));
    params.insert("r".into(), num(r.value()));
    params.insert("grid_min".into(), num(a.grid_min));
    params.insert("grid_max".into(), num(a.grid_max));
    params.insert("grid_points".into(), json!(a.grid_points));
    let format = a.output.format.unwrap_or(Format::Csv);
    let bytes = table.render(format, json!(params))?;
    emit(&bytes, a.output.out.as_deref(), params, None)
}

struct ChGrid {
    r: Vec<SqueezingParam>,
    j: Vec<f64>,
    params: Params,
}

fn ch_grid(a: &ChGridArgs) -> Result<ChGrid, CliError> {
    let r =
        linspace(a.r_min, a.r_max, a.r_points, "--r-*")?.into_iter().map(squeezing).collect::<Result<Vec<_>, _>>()?;
    let j = linspace(a.j_min, a.j_max, a.j_points, "--j-*")?;
    if j[0] < 0.0 {
        return Err(range_error(format!("--j-min must be non-negative, got {}", a.j_min)));
    }
    let mut params = Params::new();
    params.insert("j_min".into(), num(a.j_min));
    params.insert("j_max".into(), num(a.j_max));
    params.insert("j_points".into(), json!(a.j_points));
    params.insert("r_min".into(), num(a.r_min));
    params.insert("r_max".into(), num(a.r_max));
    params.insert("r_points".into(), json!(a.r_points));
    Ok(ChGrid { r, j, params })
}

/// Rows are ordered by `r`, then `J`. `ch_clipped` repeats `ch_raw` where
/// it exceeds the local bound 0 and is NaN elsewhere.
pub fn fig4(a: ChGridArgs) -> Result<(), CliError> {
    let grid = ch_grid(&a)?;
    let values = bell::ch_scan(&grid.r, &grid.j)?;
    let mut table = Table::new(vec![
        Column::new("J", INTENSITY),
        Column::new("r", DIMENSIONLESS),
        Column::new("ch_raw", PROBABILITY),
        Column::new("ch_clipped", PROBABILITY),
    ]);
    for (r, row) in grid.r.iter().zip(&values) {
        for (&j, &v) in grid.j.iter().zip(row) {
            let clipped = if v > 0.0 { v } else { f64::NAN };
            table.push(vec![Cell::Num(j), Cell::Num(r.value()), Cell::Num(v), Cell::Num(clipped)]);
        }
    }
    let format = a.output.format.unwrap_or(Format::Csv);
    let bytes = table.render(format, json!(grid.params))?;
    emit(&bytes, a.output.out.as_deref(), grid.params, None)
}

/// Per `r`: the grid maximum (ties to the smaller `J`) and the maximum
/// refined by line search.
pub fn scan_ch(a: ChGridArgs) -> Result<(), CliError> {
    let grid = ch_grid(&a)?;
    let values = bell::ch_scan(&grid.r, &grid.j)?;
    let mut table = Table::new(vec![
        Column::new("r", DIMENSIONLESS),
        Column::new("j_grid", INTENSITY),
        Column::new("ch_grid", PROBABILITY),
        Column::new("j_star", INTENSITY),
        Column::new("ch_max", PROBABILITY),
        Column::new("violated", "bool"),
    ]);
    for (&r, row) in grid.r.iter().zip(&values) {
        let i = bell::argmax_first(row).unwrap_or(0);
        let best = bell::ch_max_over_J(r)?;
        table.push(vec![
            Cell::Num(r.value()),
            Cell::Num(grid.j[i]),
            Cell::Num(row[i]),
            Cell::Num(best.intensity),
            Cell::Num(best.value),
            Cell::Text(Combination::Ch.violates(best.value).to_string()),
        ]);
    }
    let format = a.output.format.unwrap_or(Format::Csv);
    let bytes = table.render(format, json!(grid.params))?;
    emit(&bytes, a.output.out.as_deref(), grid.params, None)
}

pub fn optimize(a: OptimizeArgs) -> Result<(), CliError> {
    let r = squeezing(a.r)?;
    if a.ftol.is_nan() || a.ftol < 0.0 {
        return Err(range_error(format!("--ftol must be non-negative, got {}", a.ftol)));
    }
    let cfg = OptimizerConfig { max_iter: a.max_iter, ftol: a.ftol };
    let report = bell::optimize(r, a.combination, &cfg)?;
    let mut params = Params::new();
    params.insert("r".into(), num(r.value()));
    params.insert("combination".into(), json!(a.combination.to_string()));
    params.insert("max_iter".into(), json!(a.max_iter));
    params.insert("ftol".into(), num(a.ftol));

    let bytes = match a.output.format.unwrap_or(Format::Json) {
        Format::Json => json_bytes(&report)?,
        Format::Text => {
            let s = &report.settings;
            let rs = &report.refined.settings;
            let mut out = format!(
                "combination {}\nr {}\nvalue {}\nbounds [{}, {}]\nviolated {}\nintensity {}\n",
                report.combination,
                sig17(r.value()),
                sig17(report.value),
                sig17(report.bound_low),
                sig17(report.bound_high),
                report.violated,
                sig17(report.intensity),
            );
            if let Some(v) = report.analytic_value {
                out += &format!("analytic_value {}\n", sig17(v));
            }
            out += &format!(
                "settings alpha={} alpha_prime={} beta={} beta_prime={}\n",
                s.alpha, s.alpha_prime, s.beta, s.beta_prime
            );
            out += &format!(
                "refined_value {}\nrefined_violated {}\nrefined_settings alpha={} alpha_prime={} beta={} beta_prime={}\n",
                sig17(report.refined.value),
                report.refined.violated,
                rs.alpha,
                rs.alpha_prime,
                rs.beta,
                rs.beta_prime
            );
            out += &format!("converged {}\n", report.converged);
            if let Some(m) = &report.message {
                out += &format!("message {m}\n");
            }
            out.into_bytes()
        }
        Format::Csv => {
            let mut t = Table::new(vec![Column::new("iteration", "count"), Column::new("value", DIMENSIONLESS)]);
            for p in &report.optimizer_trace {
                t.push(vec![Cell::Int(p.iteration as u64), Cell::Num(p.value)]);
            }
            t.render(Format::Csv, Value::Null)?
        }
    };
    emit(&bytes, a.output.out.as_deref(), params, None)
}

struct Row {
    name: String,
    estimate: EstimateWithError,
    target: f64,
}

pub fn mc(a: McArgs) -> Result<(), CliError> {
    let r = squeezing(a.r)?;
    if a.trials == 0 {
        return Err(range_error("--trials must be positive".into()));
    }
    if a.tol.is_nan() || a.tol <= 0.0 {
        return Err(range_error(format!("--tol must be positive, got {}", a.tol)));
    }
    let detector = match (a.combination, a.detector) {
        (Some(c), d) => {
            let needed = match c {
                Combination::Chsh => DetectorModel::NumberResolving,
                Combination::Ch => DetectorModel::BinaryNoCount,
            };
            if d.is_some_and(|d| d != needed) {
                return Err(CliError::Usage(format!("--combination {c} needs --detector {needed}")));
            }
            needed
        }
        (None, d) => {
            if a.disp.any_prime() {
                return Err(CliError::Usage("--alpha-prime and --beta-prime need --combination".into()));
            }
            d.unwrap_or(DetectorModel::NumberResolving)
        }
    };
    let fock = FockConfig { cutoff: a.cutoff, tol: a.tol };
    let settings = a.disp.settings();

    let mut rows = Vec::new();
    if let Some(c) = a.combination {
        let est = mc::mc_bell(r, &settings, c, a.trials, a.seed, &fock)?;
        let points = settings.joint_points();
        let target = match c {
            Combination::Chsh => bell::chsh_combination(r, &settings)?,
            Combination::Ch => bell::ch_general(r, &settings)?,
        };
        rows.push(Row { name: c.to_string(), estimate: est.estimate, target });
        for (k, term) in est.terms.iter().enumerate() {
            let target = match (c, k) {
                (Combination::Chsh, _) => analytics::parity_correlation(r, points[k])?,
                (Combination::Ch, 0..=3) => analytics::nocount_joint(r, points[k])?,
                (Combination::Ch, 4) => analytics::nocount_single_a(r, settings.alpha_prime)?,
                _ => analytics::nocount_single_b(r, settings.beta_prime)?,
            };
            rows.push(Row { name: term.label.clone(), estimate: term.estimate, target });
        }
    } else {
        let dist = fock.distribution(r, settings.alpha, settings.beta)?;
        let tally = Sampler::new(&dist, a.tol)?.tally(a.seed, a.trials);
        let p = PhasePoint::new(settings.alpha, settings.beta);
        match detector {
            DetectorModel::NumberResolving => rows.push(Row {
                name: "E".into(),
                estimate: tally.parity(a.seed),
                target: analytics::parity_correlation(r, p)?,
            }),
            DetectorModel::BinaryNoCount => {
                let est = tally.nocount(a.seed);
                rows.push(Row { name: "p_ab".into(), estimate: est.joint, target: analytics::nocount_joint(r, p)? });
                rows.push(Row {
                    name: "p_a".into(),
                    estimate: est.a,
                    target: analytics::nocount_single_a(r, p.alpha)?,
                });
                rows.push(Row { name: "p_b".into(), estimate: est.b, target: analytics::nocount_single_b(r, p.beta)? });
            }
        }
    }

    let mut params = Params::new();
    params.insert("r".into(), num(r.value()));
    params.insert("detector".into(), json!(detector.to_string()));
    params.insert("trials".into(), json!(a.trials));
    params.insert("seed".into(), json!(a.seed));
    params.insert("cutoff".into(), json!(a.cutoff.to_string()));
    params.insert("tol".into(), num(a.tol));
    settings_params(&mut params, &settings, a.combination.is_some());
    if let Some(c) = a.combination {
        params.insert("combination".into(), json!(c.to_string()));
    }
    if let Cutoff::Auto = a.cutoff {
        if a.combination.is_none() {
            params
                .insert("cutoff_used".into(), json!(fock.resolve(r, settings.alpha.norm().max(settings.beta.norm()))?));
        }
    }

    let bytes = match a.output.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut obj = params.clone();
            let estimates: Vec<Value> = rows
                .iter()
                .map(|row| {
                    json!({
                        "name": row.name,
                        "value": num(row.estimate.value),
                        "std_error": num(row.estimate.std_error),
                        "n_trials": row.estimate.n_trials,
                        "seed": row.estimate.seed,
                        "target": num(row.target),
                        "z_score": num(row.estimate.z_score(row.target)),
                    })
                })
                .collect();
            obj.insert("estimates".into(), Value::Array(estimates));
            json_bytes(&obj)?
        }
        Format::Text => rows
            .iter()
            .map(|row| {
                format!(
                    "{} {} ± {} (target {}, z {})\n",
                    row.name,
                    sig17(row.estimate.value),
                    sig17(row.estimate.std_error),
                    sig17(row.target),
                    sig17(row.estimate.z_score(row.target))
                )
            })
            .collect::<String>()
            .into_bytes(),
        Format::Csv => {
            let unit = match detector {
                DetectorModel::NumberResolving => DIMENSIONLESS,
                DetectorModel::BinaryNoCount => PROBABILITY,
            };
            let mut t = Table::new(vec![
                Column::new("name", "label"),
                Column::new("value", unit),
                Column::new("std_error", unit),
                Column::new("n_trials", "count"),
                Column::new("seed", "u64"),
                Column::new("target", unit),
                Column::new("z_score", "standard errors"),
            ]);
            for row in &rows {
                t.push(vec![
                    Cell::Text(row.name.clone()),
                    Cell::Num(row.estimate.value),
                    Cell::Num(row.estimate.std_error),
                    Cell::Int(row.estimate.n_trials),
                    Cell::Int(row.estimate.seed),
                    Cell::Num(row.target),
                    Cell::Num(row.estimate.z_score(row.target)),
                ]);
            }
            t.render(Format::Csv, Value::Null)?
        }
    };
    emit(&bytes, a.output.out.as_deref(), params, Some(a.seed))
}
