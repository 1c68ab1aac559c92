//! CSV emission. Headers are fixed per format version; floats use the
//! shortest representation that parses back to the same value.

use std::fmt::Write as _;
use std::path::Path;

use crate::backend::BackendSpec;
use crate::diagnostics::DiagnosticsReport;
use crate::experiment::ExperimentOutcome;

use super::config::PointConfig;
use super::CliError;

pub const METRICS_HEADER: &[&str] = &[
    "point",
    "seed",
    "task",
    "length",
    "horizon",
    "delay",
    "period",
    "task_seed",
    "backend",
    "backend_seed",
    "nodes",
    "spectral_radius",
    "input_scaling",
    "connectivity",
    "leak_rate",
    "nonlinearity",
    "qubits",
    "tau",
    "virtual_nodes",
    "coupling_scale",
    "field",
    "lambda",
    "washout",
    "train_fraction",
    "include_input",
    "train_nmse",
    "test_nmse",
    "test_r2",
    "persistence_nmse",
    "regenerations",
];

pub const DIAGNOSTICS_HEADER: &[&str] = &[
    "esp_convergence_step",
    "esp_final_distance",
    "separation_score",
    "reproducibility_score",
    "memory_capacity",
];

pub fn num(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn metrics_row(point: &PointConfig, outcome: &ExperimentOutcome) -> Vec<String> {
    let e = &point.experiment;
    let t = &e.task;
    let m = &outcome.metrics;
    let blank = String::new;
    let (esn, qrc): (Vec<String>, Vec<String>) = match &e.backend {
        BackendSpec::Esn(c) => (
            vec![
                c.nodes.to_string(),
                num(c.spectral_radius),
                num(c.input_scaling),
                num(c.connectivity),
                num(c.leak_rate),
                c.nonlinearity.as_str().to_string(),
            ],
            vec![blank(); 5],
        ),
        BackendSpec::Qrc(c) => (
            vec![blank(); 6],
            vec![
                c.qubits.to_string(),
                num(c.tau),
                c.virtual_nodes.to_string(),
                num(c.coupling_scale),
                num(c.field),
            ],
        ),
    };
    let mut row = vec![
        point.index.to_string(),
        point.seed.to_string(),
        t.kind.as_str().to_string(),
        t.length.to_string(),
        t.horizon.to_string(),
        t.delay.to_string(),
        num(t.period),
        t.seed.to_string(),
        e.backend.kind().as_str().to_string(),
        e.backend.seed().to_string(),
    ];
    row.extend(esn);
    row.extend(qrc);
    row.extend([
        num(m.lambda),
        m.washout.to_string(),
        num(e.train_fraction),
        e.include_input.to_string(),
        num(m.train_nmse),
        num(m.test_nmse),
        num(m.test_r2),
        num(m.persistence_nmse),
        m.regenerations.to_string(),
    ]);
    row
}

fn push_row(s: &mut String, cells: &[String]) {
    let _ = writeln!(s, "{}", cells.join(","));
}

fn header(cells: &[&str]) -> Vec<String> {
    cells.iter().map(|c| c.to_string()).collect()
}

pub fn metrics_csv(rows: &[(PointConfig, ExperimentOutcome)]) -> String {
    let mut s = String::new();
    push_row(&mut s, &header(METRICS_HEADER));
    for (p, o) in rows {
        push_row(&mut s, &metrics_row(p, o));
    }
    s
}

/// `point,step,target_<c>,prediction_<c>...` over each test segment.
pub fn predictions_csv(rows: &[(usize, usize, &crate::TimeSeries, &crate::TimeSeries)]) -> String {
    let channels = rows.first().map_or(1, |r| r.2.channels());
    let mut head = vec!["point".to_string(), "step".to_string()];
    for c in 0..channels {
        head.push(format!("target_{c}"));
        head.push(format!("prediction_{c}"));
    }
    let mut s = String::new();
    push_row(&mut s, &head);
    for &(point, start, target, prediction) in rows {
        for t in 0..prediction.len() {
            let mut cells = vec![point.to_string(), (start + t).to_string()];
            for c in 0..channels {
                cells.push(num(target.data()[(start + t, c)]));
                cells.push(num(prediction.data()[(t, c)]));
            }
            push_row(&mut s, &cells);
        }
    }
    s
}

/// `point,step,x0..x<K-1>`; narrower points leave trailing cells empty.
pub fn states_csv(rows: &[(PointConfig, ExperimentOutcome)]) -> String {
    let width = rows.iter().map(|(_, o)| o.trajectory.dimension()).max().unwrap_or(0);
    let mut head = vec!["point".to_string(), "step".to_string()];
    head.extend((0..width).map(|j| format!("x{j}")));
    let mut s = String::new();
    push_row(&mut s, &head);
    for (p, o) in rows {
        let states = o.trajectory.states();
        for t in 0..states.nrows() {
            let mut cells = vec![p.index.to_string(), t.to_string()];
            cells.extend((0..width).map(|j| {
                if j < states.ncols() {
                    num(states[(t, j)])
                } else {
                    String::new()
                }
            }));
            push_row(&mut s, &cells);
        }
    }
    s
}

pub fn diagnostics_csv(report: &DiagnosticsReport) -> String {
    let mut s = String::new();
    push_row(&mut s, &header(DIAGNOSTICS_HEADER));
    push_row(
        &mut s,
        &[
            report
                .esp_convergence_step
                .map_or_else(|| "none".to_string(), |v| v.to_string()),
            num(report.esp_final_distance),
            num(report.separation_score),
            num(report.reproducibility_score),
            num(report.memory_capacity),
        ],
    );
    s
}

pub fn memory_profile_csv(profile: &[f64]) -> String {
    let mut s = String::from("delay,r2\n");
    for (i, r) in profile.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, num(*r));
    }
    s
}

pub fn task_csv(data: &crate::tasks::TaskData) -> String {
    let mut s = String::from("step,input_0,target_0\n");
    for t in 0..data.input.len() {
        let _ = writeln!(
            s,
            "{},{},{}",
            t,
            num(data.input.data()[(t, 0)]),
            num(data.target.data()[(t, 0)])
        );
    }
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
