// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{Check, ScenarioOutput};
use crate::error::Result;
use crate::linalg::Vector;
use crate::model_zoo::{RotatedToyNet, ToyNet};
use crate::patching::patch_1d;
use crate::report::{format_g17, CsvTable};

/// Exact-identity tolerance for the toy closed forms.
pub const TOY_TOL: f64 = 1e-12;

/// A hidden-layer network the toy scenario can patch.
trait Hidden {
    fn hidden(&self, x: f64) -> Vector<f64>;
    fn readout(&self, h: &Vector<f64>) -> f64;
}

impl Hidden for ToyNet<f64> {
    fn hidden(&self, x: f64) -> Vector<f64> {
        ToyNet::hidden(self, x)
    }
    fn readout(&self, h: &Vector<f64>) -> f64 {
        ToyNet::readout(self, h)
    }
}

impl Hidden for RotatedToyNet<f64> {
    fn hidden(&self, x: f64) -> Vector<f64> {
        RotatedToyNet::hidden(self, x)
    }
    fn readout(&self, h: &Vector<f64>) -> f64 {
        RotatedToyNet::readout(self, h)
    }
}

/// Output of `net` on `x` with its hidden layer patched along `v` from `x'`.
fn patched_output<N: Hidden>(net: &N, x: f64, x_src: f64, v: &Vector<f64>) -> Result<f64> {
    let h = patch_1d(&net.hidden(x), &net.hidden(x_src), v)?;
    Ok(net.readout(&h))
}

/// Named directions in the network's own hidden coordinates, with the
/// value the patched output must take: `true` for `x'`, `false` for `x`.
struct Column {
    name: &'static str,
    v: Vector<f64>,
    expects_source: bool,
}

fn unit(c: [f64; 3]) -> Vector<f64> {
    Vector::from_f64(&c).normalized().expect("nonzero constant")
}

fn standard_columns() -> Vec<Column> {
    vec![
        Column { name: "e3_patch", v: unit([0.0, 0.0, 1.0]), expects_source: true },
        Column { name: "v_illusory_patch", v: unit([1.0, 1.0, 0.0]), expects_source: true },
        Column { name: "e1_only", v: unit([1.0, 0.0, 0.0]), expects_source: false },
        Column { name: "e2_only", v: unit([0.0, 1.0, 0.0]), expects_source: false },
    ]
}

#[derive(Serialize)]
struct ToyReport {
    rotated: bool,
    grid_points: usize,
    rows: usize,
    max_error: Vec<(String, f64)>,
}

type PatchedNet<'a> = dyn Fn(f64, f64, &Vector<f64>) -> Result<f64> + 'a;

pub fn run_toy(config: &ExperimentConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let c = config.resolved();
    let (n, lo, hi) = (c.grid_points.unwrap_or(21), c.grid_min.unwrap_or(-5.0), c.grid_max.unwrap_or(5.0));
    let rotated = c.rotated.unwrap_or(false);
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();

    let mut columns = standard_columns();
    let base = ToyNet::<f64>::canonical();
    let rot = RotatedToyNet::<f64>::canonical();
    if rotated {
        // The same patches expressed in rotated coordinates, plus the
        // rotated axes in their new roles: d1 carries the signal, d2 is
        // disconnected, d3 dormant.
        for col in &mut columns {
            col.v = rot.to_rotated(&col.v);
        }
        columns.push(Column { name: "d1_patch", v: unit([1.0, 0.0, 0.0]), expects_source: true });
        columns.push(Column { name: "d2_only", v: unit([0.0, 1.0, 0.0]), expects_source: false });
        columns.push(Column { name: "d3_only", v: unit([0.0, 0.0, 1.0]), expects_source: false });
    }
    let net: &PatchedNet = if rotated {
        &|x, xs, v| patched_output(&rot, x, xs, v)
    } else {
        &|x, xs, v| patched_output(&base, x, xs, v)
    };
    let clean = |x: f64| if rotated { rot.forward(x).1 } else { base.forward(x).1 };

    let mut header = vec!["x", "x_prime", "no_patch"];
    header.extend(columns.iter().map(|c| c.name));
    let mut table = CsvTable::new(&header);
    let mut max_err = vec![0.0f64; columns.len() + 1];
    let mut same_row_spread = 0.0f64;
    for &x in &grid {
        for &xs in &grid {
            let y0 = clean(x);
            max_err[0] = max_err[0].max((y0 - x).abs());
            let mut cells = vec![format_g17(x), format_g17(xs), format_g17(y0)];
            for (j, col) in columns.iter().enumerate() {
                let y = net(x, xs, &col.v)?;
                let want = if col.expects_source { xs } else { x };
                max_err[j + 1] = max_err[j + 1].max((y - want).abs());
                if x == xs {
                    same_row_spread = same_row_spread.max((y - y0).abs());
                }
                cells.push(format_g17(y));
            }
            table.push_row(cells);
        }
    }

    let mut out = ScenarioOutput::default();
    let names: Vec<&str> = std::iter::once("no_patch").chain(columns.iter().map(|c| c.name)).collect();
    for (j, name) in names.iter().enumerate() {
        let target = if j == 0 || !columns[j - 1].expects_source { "x" } else { "x_prime" };
        out.check(Check::new(
            format!("{name}_equals_{target}"),
            max_err[j] < TOY_TOL,
            format!("max |error| = {:e} over {} grid pairs", max_err[j], n * n),
        ));
    }
    out.check(Check::new(
        "diagonal_rows_identical",
        same_row_spread < TOY_TOL,
        format!("max spread on x = x' rows = {same_row_spread:e}"),
    ));
    if rotated {
        let r = rot.read_weights();
        let h1 = rot.hidden(1.0);
        let roles = r[1].abs() < TOY_TOL && h1[2].abs() < TOY_TOL && r[0].abs() > 0.5 && h1[0].abs() > 0.5;
        out.check(Check::new(
            "rotated_roles",
            roles,
            format!("read weights {:?}, hidden(1) {:?}", r.to_f64(), h1.to_f64()),
        ));
    }
    let file = if rotated { "toy_rotated.csv" } else { "toy.csv" };
    out.csv(file, &table);
    out.json(
        "toy_report.json",
        &ToyReport {
            rotated,
            grid_points: n,
            rows: table.len(),
            max_error: names.iter().map(|s| s.to_string()).zip(max_err.iter().copied()).collect(),
        },
    )?;
    Ok(out)
}
