use anyhow::Context;
use num_complex::Complex64;
use toda_kdq::csv::CsvTable;
use toda_kdq::iso_flow::{functional_csv, integrability_check, monotonicity_check, IsoFlowState};
use toda_kdq::kdq::{markov_stieltjes, multi_nevanlinna_check, nevanlinna_ray, KdqPoint, PseudoPositiveMeasure};
use toda_kdq::pseudo_toda::{component_trajectory_csv, total_hamiltonian_csv, PseudoTodaState};
use toda_kdq::sphere::{HarmonicIndex, SphereDirection};
use toda_kdq::toda::{integrate_toda, spectral_solve as moser_solve, trajectory_csv, Trajectory};

use crate::formats::{check_schema, read_input, time_grid, write_output, NevanlinnaFile, StateFile, TransformFile, Versioned};
use crate::{NumericFailure, Options};

/// Derivative tolerance of the monotonicity check, before `--tol` scaling.
pub const ISO_DERIVATIVE_TOL: f64 = 1e-8;

fn emit_csv(opts: &Options, table: &CsvTable) -> anyhow::Result<()> {
    write_output(opts.output.as_deref(), &table.to_csv_string())
}

fn emit_json<T: serde::Serialize>(opts: &Options, body: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(&Versioned { schema: crate::formats::SCHEMA, body })?;
    text.push('\n');
    write_output(opts.output.as_deref(), &text)
}

pub fn simulate_1d(opts: &Options) -> anyhow::Result<()> {
    let file: StateFile = read_input(opts)?;
    check_schema(file.schema)?;
    let traj = integrate_toda(&file.state, opts.t_final.unwrap_or(5.0), opts.dt.unwrap_or(1e-3))?;
    emit_csv(opts, &trajectory_csv(&traj)?)
}

pub fn spectral_solve(opts: &Options) -> anyhow::Result<()> {
    let file: StateFile = read_input(opts)?;
    check_schema(file.schema)?;
    let times = time_grid(opts.t_final.unwrap_or(5.0), opts.dt.unwrap_or(0.1));
    let states = times.iter().map(|&t| moser_solve(&file.state, t)).collect::<Result<Vec<_>, _>>()?;
    emit_csv(opts, &trajectory_csv(&Trajectory { times, states })?)
}

pub fn simulate_pseudo(opts: &Options, component: Option<(usize, usize)>) -> anyhow::Result<()> {
    let state: PseudoTodaState = read_input(opts)?;
    let times = time_grid(opts.t_final.unwrap_or(10.0), opts.dt.unwrap_or(0.1));
    let table = match component {
        Some((k, ell)) => component_trajectory_csv(&state, HarmonicIndex { k, ell }, &times)?,
        None => total_hamiltonian_csv(&state, &times),
    };
    emit_csv(opts, &table)
}

pub fn transform_eval(opts: &Options) -> anyhow::Result<()> {
    let file: TransformFile = read_input(opts)?;
    check_schema(file.schema)?;
    let n = file.measure.n();
    let mut header = vec!["zeta_re".to_string(), "zeta_im".to_string()];
    header.extend((1..=n).map(|i| format!("theta_{i}")));
    header.extend(["value_re", "value_im", "tail_bound"].map(String::from));
    let mut table = CsvTable::new(header);
    for (i, pt) in file.points.iter().enumerate() {
        let theta = SphereDirection::new(&pt.theta).with_context(|| format!("point {i}"))?;
        let p = KdqPoint::new(Complex64::new(pt.zeta[0], pt.zeta[1]), theta).with_context(|| format!("point {i}"))?;
        let v = markov_stieltjes(&file.measure, &p).with_context(|| format!("point {i}"))?;
        let mut row = vec![p.zeta().re, p.zeta().im];
        row.extend_from_slice(p.theta().coords());
        row.extend([v.value.re, v.value.im, v.tail_bound]);
        table.push_floats(&row);
    }
    emit_csv(opts, &table)
}

pub fn nevanlinna_check(opts: &Options) -> anyhow::Result<()> {
    match read_input::<NevanlinnaFile>(opts)? {
        NevanlinnaFile::OneDim { schema, measure, order, y } => {
            check_schema(schema)?;
            emit_json(opts, &measure.nevanlinna_limit_check(order, &y)?)
        }
        NevanlinnaFile::Kdq { schema, kdq_measure, k, ell, order, moduli } => {
            check_schema(schema)?;
            let idx = HarmonicIndex { k, ell };
            let degree = opts.quad_degree.map_or(kdq_measure.k_max() + k, |d| d as usize);
            emit_json(opts, &multi_nevanlinna_check(&kdq_measure, idx, order, &nevanlinna_ray(&moduli), degree)?)
        }
    }
}

pub fn iso_flow(opts: &Options) -> anyhow::Result<()> {
    let mu: PseudoPositiveMeasure = read_input(opts)?;
    let state = IsoFlowState::from_measure(&mu)?;
    let times = time_grid(opts.t_final.unwrap_or(10.0), opts.dt.unwrap_or(0.1));
    let rep = monotonicity_check(&state, &times)?;
    let integ = integrability_check(&state, 1.0)?;
    eprintln!(
        "integrability: total {:e}, rate {}, divergence trend {}",
        integ.total,
        integ.rate.map_or("n/a".to_string(), |r| format!("{r:e}")),
        integ.divergence_trend
    );
    emit_csv(opts, &functional_csv(&rep))?;
    let tol = ISO_DERIVATIVE_TOL * opts.tol.unwrap_or(1.0);
    if !rep.monotone {
        return Err(NumericFailure("integrability functional increased along the flow".into()).into());
    }
    if rep.max_derivative_error > tol {
        return Err(NumericFailure(format!(
            "derivative identity off by {:e} (tolerance {tol:e})",
            rep.max_derivative_error
        ))
        .into());
    }
    Ok(())
}
