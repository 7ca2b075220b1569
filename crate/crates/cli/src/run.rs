//! One function per command, each turning a config into [`Artifacts`].

use potlab::capacity::{
    cover_capacity_with, equilibrium_solve, operator_norm_estimate, superadditivity_check, CellCover, Disc,
    OpNormOptions, PointCloud, SolverOptions,
};
use potlab::constructions::{cantor_build, generation_ladder, CantorSpec, BlockSpec};
use potlab::diagnostics::{
    diff_test, second_order_test, thm1_characterization, thm67_ratio_probe, DiffMode, DiffOptions, DiffReport,
    ProbeOptions, ProbeSetup,
};
use potlab::measures::io;
use potlab::potentials::{pv_classify, PvTolerance};
use potlab::{KernelSpec, Ladder, SignedAtomicMeasure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use toml::{Table, Value};

use crate::config::{Command, LadderConfig, LoadedConfig, PointsConfig, Tolerances};
use crate::error::CliError;
use crate::output::{Artifacts, Cell, CsvTable};
use crate::source::{build, check_family, Built};

pub fn execute(cfg: &LoadedConfig) -> Result<Artifacts, CliError> {
    match cfg.config.command {
        Command::Capacity => capacity(cfg),
        Command::Equilibrium => equilibrium(cfg),
        Command::Cantor => cantor(cfg),
        Command::Diagnose | Command::SecondOrder => diagnose(cfg),
        Command::PvSweep => pv_sweep(cfg),
        Command::OpnormSweep => opnorm_sweep(cfg),
        Command::Lemma8 => lemma8(cfg),
        Command::Counterexample => counterexample(cfg),
    }
}

/// Snake-case name of a unit enum variant.
fn label<T: Serialize>(v: &T) -> String {
    match Value::try_from(v) {
        Ok(Value::String(s)) => s,
        _ => "unknown".into(),
    }
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
}

fn int(v: usize) -> Value {
    Value::Integer(v as i64)
}

fn solver(t: &Tolerances) -> SolverOptions {
    SolverOptions::with_tol(t.solver)
}

fn pv_tolerance(t: &Tolerances) -> PvTolerance {
    PvTolerance {
        rel: t.pv_rel,
        floor: t.pv_floor,
        window: t.pv_window,
        divergence_factor: t.pv_divergence,
    }
}

fn coord_header(prefix: &[&str], dim: usize, suffix: &[&str]) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain((0..dim).map(|i| format!("x{i}")))
        .chain(suffix.iter().map(|s| s.to_string()))
        .collect()
}

fn measure_of(cfg: &LoadedConfig) -> Result<Built, CliError> {
    let src = cfg.config.measure.as_ref().ok_or_else(|| CliError::config("missing [measure] section"))?;
    build(src, cfg)
}

fn ladder_of(cfg: &LoadedConfig, built: &Built) -> Result<Ladder, CliError> {
    let l = cfg.config.ladder.as_ref().ok_or_else(|| CliError::config("missing [ladder] section"))?;
    Ok(match l {
        LadderConfig::Geometric { start, ratio, rungs } => Ladder::geometric(*start, *ratio, *rungs)?,
        LadderConfig::Dyadic { start } => Ladder::dyadic(*start)?,
        LadderConfig::Explicit { scales } => Ladder::new(scales.clone())?,
        LadderConfig::Generations { from, to } => {
            let seq = built
                .sigmas
                .as_ref()
                .ok_or_else(|| CliError::config("a generations ladder needs a Cantor or counterexample measure"))?;
            generation_ladder(seq, *from, *to)?
        }
    })
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.iter().map(|c| c / n).collect();
        }
    }
}

fn points_of(cfg: &LoadedConfig, mu: &SignedAtomicMeasure, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>, CliError> {
    let p = cfg.config.points.as_ref().ok_or_else(|| CliError::config("missing [points] section"))?;
    let pts = match p {
        PointsConfig::Explicit { coords } => coords.clone(),
        PointsConfig::SampleAtoms { count } => {
            if mu.is_empty() {
                return Err(CliError::config("cannot sample atoms of an empty measure"));
            }
            (0..*count)
                .map(|_| mu.location(rng.gen_range(0..mu.len())).to_vec())
                .collect()
        }
        PointsConfig::OnSphere { centre, radius, count } => (0..*count)
            .map(|_| {
                unit_vector(rng, centre.len())
                    .iter()
                    .zip(centre)
                    .map(|(u, c)| c + radius * u)
                    .collect()
            })
            .collect(),
    };
    if pts.is_empty() {
        return Err(CliError::config("no evaluation points"));
    }
    if let Some(bad) = pts.iter().position(|x| x.len() != mu.dim()) {
        return Err(CliError::config(format!(
            "point {bad} has {} coordinates, the measure lives in dimension {}",
            pts[bad].len(),
            mu.dim()
        )));
    }
    Ok(pts)
}

fn capacity(cfg: &LoadedConfig) -> Result<Artifacts, CliError> {
    let s = cfg.config.capacity.as_ref().expect("checked at load");
    let dim = s.centre.len();
    let k = KernelSpec::for_dim(dim)?;
    let h = s.radius / s.cells_per_radius;
    let cover = CellCover::ball(&s.centre, s.radius, h)?;
    let eq = cover_capacity_with(&cover, k, solver(&cfg.config.tolerances))?;
    let boundary = cover.subset(cover.boundary_cells());
    let reference = match k {
        KernelSpec::Log => 1.0 / (1.0 / s.radius).ln(),
        _ => s.radius.powi(dim as i32 - 2),
    };

    let mut a = Artifacts::default();
    let r = &mut a.results;
    r.insert("capacity".into(), eq.capacity.into());
    r.insert("energy".into(), eq.energy.into());
    r.insert("reference_capacity".into(), reference.into());
    r.insert("relative_error".into(), ((eq.capacity - reference) / reference).into());
    r.insert("cells".into(), int(cover.len()));
    r.insert("boundary_cells".into(), int(boundary.len()));
    r.insert("h".into(), h.into());
    r.insert("iterations".into(), int(eq.iterations));
    r.insert("residual".into(), eq.residual.into());
    r.insert("converged".into(), eq.converged.into());

    let mut t = CsvTable::new(coord_header(&["index"], dim, &["weight"]));
    let centres = boundary.centres();
    for (i, w) in eq.weights.iter().enumerate() {
        let mut row: Vec<Cell> = vec![i.into()];
        row.extend(centres[i * dim..(i + 1) * dim].iter().map(|&c| c.into()));
        row.push((*w).into());
        t.push(row);
    }
    a.tables.push(("weights.csv".into(), t));
    a.plots.push((
        "weights.dat".into(),
        eq.weights.iter().enumerate().map(|(i, &w)| (i as f64, w)).collect(),
    ));
    Ok(a)
}

fn equilibrium(cfg: &LoadedConfig) -> Result<Artifacts, CliError> {
    let mu = measure_of(cfg)?.measure;
    let dim = mu.dim();
    let k = KernelSpec::for_dim(dim)?;
    let cloud = PointCloud::from_measure(&mu)?;
    let eq = equilibrium_solve(&cloud, k, solver(&cfg.config.tolerances))?;

    let mut a = Artifacts::default();
    let r = &mut a.results;
    r.insert("points".into(), int(cloud.len()));
    r.insert("capacity".into(), eq.capacity.into());
    r.insert("energy".into(), eq.energy.into());
    r.insert("initial_energy".into(), eq.initial_energy.into());
    r.insert("iterations".into(), int(eq.iterations));
    r.insert("residual".into(), eq.residual.into());
    r.insert("converged".into(), eq.converged.into());

    let mut t = CsvTable::new(coord_header(&["index"], dim, &["weight"]));
    for (i, w) in eq.weights.iter().enumerate() {
        let mut row: Vec<Cell> = vec![i.into()];
        row.extend(cloud.point(i).iter().map(|&c| c.into()));
        row.push((*w).into());
        t.push(row);
    }
    a.tables.push(("weights.csv".into(), t));
    a.plots.push((
        "weights.dat".into(),
        eq.weights.iter().enumerate().map(|(i, &w)| (cloud.point(i)[0], w)).collect(),
    ));
    Ok(a)
}

fn cantor(cfg: &LoadedConfig) -> Result<Artifacts, CliError> {
    let s = cfg.config.cantor.as_ref().expect("checked at load");
    check_family(s.family)?;
    let c = cantor_build(CantorSpec {
        family: s.family,
        generation: s.generation,
    })?;
    let n = s.generation;

    let mut a = Artifacts::default();
    let r = &mut a.results;
    r.insert("generation".into(), int(n));
    r.insert("atoms".into(), int(c.measure.len()));
    r.insert("total_mass".into(), c.measure.total_mass().into());
    r.insert("sigma".into(), c.sigmas.sigma(n).into());
    r.insert("log_inv_sigma".into(), c.sigmas.log_inv(n).into());

    let mut t = CsvTable::new(["generation", "sigma", "log_inv_sigma", "lambda"]);
    for j in 0..=n {
        let lambda = if j == 0 { f64::NAN } else { c.sigmas.lambda(j) };
        t.push(vec![j.into(), c.sigmas.sigma(j).into(), c.sigmas.log_inv(j).into(), lambda.into()]);
    }
    a.tables.push(("sigmas.csv".into(), t));
    a.plots.push((
        "sigmas.dat".into(),
        (0..=n).map(|j| (j as f64, c.sigmas.log_inv(j))).collect(),
    ));
    let json = io::to_json(&c.measure);
    let tagged = format!("{{\"config_sha256\":\"{}\",{}", cfg.hash, &json[1..]);
    a.files.push(("measure.json".into(), tagged));
    Ok(a)
}

fn rung_rows(t: &mut CsvTable, id: usize, report: &DiffReport) {
    let verdict = label(&report.verdict);
    for (j, s) in report.rungs.iter().enumerate() {
        t.push(vec![
            id.into(),
            j.into(),
            s.r.into(),
            s.h.into(),
            s.ratio.into(),
            s.weak.value.into(),
            s.weak.t_star.into(),
            s.ball_capacity.into(),
            s.cells.into(),
            s.dropped.into(),
            verdict.as_str().into(),
        ]);
    }
}

fn count_labels(labels: &[String]) -> Table {
    let mut counts = Table::new();
    for l in labels {
        let e = counts.entry(l.clone()).or_insert(Value::Integer(0));
        if let Value::Integer(n) = e {
            *n += 1;
        }
    }
    counts
}

fn diagnose(cfg: &LoadedConfig) -> Result<Artifacts, CliError> {
    let d = cfg.config.diagnose.as_ref().expect("checked at load");
    let built = measure_of(cfg)?;
    let mu = &built.measure;
    let ladder = ladder_of(cfg, &built)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.config.seed);
    let points = points_of(cfg, mu, &mut rng)?;
    let k = KernelSpec::for_dim(mu.dim())?;
    let t = &cfg.config.tolerances;
    let opts = DiffOptions {
        cells_per_radius: d.cells_per_radius,
        eps_min: d.eps_min,
        solver: solver(t),
        pv: pv_tolerance(t),
    };
    if d.characterize && (d.mode != DiffMode::Capacity || mu.dim() < 3) {
        return Err(CliError::config("diagnose.characterize needs capacity mode and d >= 3"));
    }

    let mut a = Artifacts::default();
    let mut table = CsvTable::new([
        "point", "rung", "r", "h", "ratio", "weak_norm", "t_star", "ball_capacity", "cells", "dropped", "verdict",
    ]);
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for (id, x) in points.iter().enumerate() {
        let mut entry = Table::new();
        entry.insert("id".into(), int(id));
        entry.insert("point".into(), floats(x));
        let report = if d.characterize {
            let rec = thm1_characterization(mu, x, &ladder, opts)?;
            entry.insert("density_trend".into(), label(&rec.density.verdict).into());
            entry.insert("pv_verdict".into(), label(&rec.pv.verdict).into());
            entry.insert("consistent".into(), rec.consistent_with_diff_test.into());
            rec.diff
        } else if cfg.config.command == Command::SecondOrder {
            second_order_test(mu, k, x, &ladder, d.mode, opts)?
        } else {
            diff_test(mu, k, x, &ladder, d.mode, opts)?
        };
        entry.insert("verdict".into(), label(&report.verdict).into());
        entry.insert("gradient_pv".into(), label(&report.gradient_pv).into());
        entry.insert("gradient".into(), floats(&report.model.gradient));
        entry.insert("ratios".into(), floats(&report.ratios()));
        if let Some(density) = report.density {
            entry.insert("density".into(), density.into());
            entry.insert("density_flagged".into(), report.density_flagged.into());
        }
        verdicts.push(label(&report.verdict));
        rung_rows(&mut table, id, &report);
        a.plots.push((
            format!("ratios_{id}.dat"),
            report.rungs.iter().map(|s| (s.r, s.ratio)).collect(),
        ));
        rows.push(Value::Table(entry));
    }
    a.results.insert("mode".into(), label(&d.mode).into());
    a.results.insert("verdict_counts".into(), Value::Table(count_labels(&verdicts)));
    a.results.insert("points".into(), Value::Array(rows));
    a.tables.push(("rungs.csv".into(), table));
    Ok(a)
}

fn pv_sweep(cfg: &LoadedConfig) -> Result<Artifacts, CliError> {
    let built = measure_of(cfg)?;
    let mu = &built.measure;
    let ladder = ladder_of(cfg, &built)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.config.seed);
    let points = points_of(cfg, mu, &mut rng)?;
    let tol = pv_tolerance(&cfg.config.tolerances);
    let dim = mu.dim();

    let mut a = Artifacts::default();
    let header: Vec<String> = ["point", "rung", "eps"]
        .iter()
        .map(|s| s.to_string())
        .chain((0..dim).map(|i| format!("r{i}")))
        .chain(["norm".to_string()])
        .collect();
    let mut table = CsvTable::new(header);
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for (id, x) in points.iter().enumerate() {
        let rep = pv_classify(mu, x, &ladder, tol)?;
        let mut plot = Vec::new();
        for (j, (eps, v)) in rep.scales.iter().zip(&rep.values).enumerate() {
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            let mut row: Vec<Cell> = vec![id.into(), j.into(), (*eps).into()];
            row.extend(v.iter().map(|&c| c.into()));
            row.push(norm.into());
            table.push(row);
            plot.push((*eps, norm));
        }
        let mut entry = Table::new();
        entry.insert("id".into(), int(id));
        entry.insert("point".into(), floats(x));
        entry.insert("verdict".into(), label(&rep.verdict).into());
        entry.insert("oscillation".into(), rep.oscillation.into());
        verdicts.push(label(&rep.verdict));
        rows.push(Value::Table(entry));
        a.plots.push((format!("pv_{id}.dat"), plot));
    }
    a.results.insert("verdict_counts".into(), Value::Table(count_labels(&verdicts)));
    a.results.insert("points".into(), Value::Array(rows));
    a.tables.push(("pv.csv".into(), table));
    Ok(a)
}

fn opnorm_sweep(cfg: &LoadedConfig) -> Result<Artifacts, CliError> {
    let s = cfg.config.opnorm.as_ref().expect("checked at load");
    check_family(s.family)?;
    let opts = OpNormOptions {
        tol: cfg.config.tolerances.opnorm,
        max_iter: s.max_iter,
        seed: cfg.config.seed,
        ..OpNormOptions::default()
    };
    let mut a = Artifacts::default();
    let mut table = CsvTable::new(["generation", "atoms", "eps", "norm", "iterations", "residual", "converged"]);
    let mut plot = Vec::new();
    let mut norms = Vec::new();
    for &g in &s.generations {
        let c = cantor_build(CantorSpec {
            family: s.family,
            generation: g,
        })?;
        let eps = s.eps_factor * c.sigmas.sigma(g);
        let est = operator_norm_estimate(&c.measure, eps, opts)?;
        table.push(vec![
            g.into(),
            c.measure.len().into(),
            eps.into(),
            est.norm.into(),
            est.iterations.into(),
            est.residual.into(),
            est.converged.into(),
        ]);
        plot.push((g as f64, est.norm));
        norms.push(est.norm);
    }
    a.results.insert("generations".into(), Value::Array(s.generations.iter().map(|&g| int(g)).collect()));
    a.results.insert("norms".into(), floats(&norms));
    a.results.insert("growth".into(), (norms[norms.len() - 1] / norms[0]).into());
    a.tables.push(("opnorm.csv".into(), table));
    a.plots.push(("opnorm.dat".into(), plot));
    Ok(a)
}

fn lemma8(cfg: &LoadedConfig) -> Result<Artifacts, CliError> {
    let s = cfg.config.lemma8.as_ref().expect("checked at load");
    let discs: Vec<Disc> = s
        .discs
        .iter()
        .map(|d| Disc {
            centre: d.centre,
            radius: d.radius,
        })
        .collect();
    let rep = superadditivity_check(&discs)?;
    let mut a = Artifacts::default();
    let r = &mut a.results;
    r.insert("ratio".into(), rep.ratio.into());
    r.insert("union_capacity".into(), rep.union_capacity.into());
    r.insert("sum_of_capacities".into(), rep.disc_capacities.iter().sum::<f64>().into());
    r.insert("sigma".into(), rep.sigma.into());
    r.insert("delta".into(), rep.delta.into());
    r.insert("hypothesis_holds".into(), rep.hypothesis_holds.into());
    r.insert("h".into(), rep.h.into());
    let mut table = CsvTable::new(["index", "cx", "cy", "radius", "capacity"]);
    for (i, (d, c)) in discs.iter().zip(&rep.disc_capacities).enumerate() {
        table.push(vec![i.into(), d.centre[0].into(), d.centre[1].into(), d.radius.into(), (*c).into()]);
    }
    a.tables.push(("discs.csv".into(), table));
    a.plots.push((
        "discs.dat".into(),
        rep.disc_capacities.iter().enumerate().map(|(i, &c)| (i as f64, c)).collect(),
    ));
    Ok(a)
}

fn counterexample(cfg: &LoadedConfig) -> Result<Artifacts, CliError> {
    let s = cfg.config.counterexample.as_ref().expect("checked at load");
    check_family(s.family)?;
    let setup = ProbeSetup {
        kind: s.construction,
        spec: BlockSpec {
            family: s.family,
            levels: s.levels.clone(),
        },
    };
    let digits = match &s.digits {
        Some(d) => d.clone(),
        None => {
            let factor = match s.construction {
                potlab::diagnostics::CounterexampleKind::Thm6 => 1,
                potlab::diagnostics::CounterexampleKind::Thm7 => 2,
            };
            let deepest = s.levels.iter().map(|&(n, big_n)| factor * big_n + n).max().unwrap_or(0);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.config.seed);
            (0..deepest + 16).map(|_| rng.gen_range(0..4u8)).collect()
        }
    };
    let opts = ProbeOptions {
        cells_per_radius: s.cells_per_radius,
        zoom_doublings: s.zoom_doublings,
        solver: solver(&cfg.config.tolerances),
    };
    let rungs = thm67_ratio_probe(&setup, &digits, &s.ks, opts)?;

    let mut a = Artifacts::default();
    let mut table = CsvTable::new([
        "k",
        "big_n",
        "log_inv_radius",
        "blocks_in_window",
        "grid_sup",
        "zoom_sup",
        "t_star",
        "ball_capacity",
        "ratio",
        "predicted",
    ]);
    for p in &rungs {
        table.push(vec![
            p.k.into(),
            p.big_n.into(),
            p.log_inv_radius.into(),
            p.blocks_in_window.into(),
            p.grid_sup.into(),
            p.zoom_sup.into(),
            p.t_star.into(),
            p.ball_capacity.into(),
            p.ratio.into(),
            p.predicted.into(),
        ]);
    }
    let ratios: Vec<f64> = rungs.iter().map(|p| p.ratio).collect();
    let predicted: Vec<f64> = rungs.iter().map(|p| p.predicted).collect();
    a.results.insert("mode".into(), label(&s.construction.mode()).into());
    a.results.insert("ks".into(), Value::Array(s.ks.iter().map(|&k| int(k)).collect()));
    a.results.insert("digits".into(), Value::Array(digits.iter().map(|&d| int(d as usize)).collect()));
    a.results.insert("ratios".into(), floats(&ratios));
    a.results.insert("predicted".into(), floats(&predicted));
    a.results.insert("growth".into(), (ratios[ratios.len() - 1] / ratios[0]).into());
    a.tables.push(("probe.csv".into(), table));
    a.plots.push((
        "probe.dat".into(),
        rungs.iter().map(|p| (p.k as f64, p.ratio)).collect(),
    ));
    Ok(a)
}
