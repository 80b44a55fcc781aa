//! Data behind the four panels of the Bell-parameter figure, as long-format
//! tables `(axis value, series, value)`.

use rayon::prelude::*;

use crate::bell::{sweep, ExperimentParams, SweepAxis};
use crate::conditioning::{antidiagonal_direction, wigner_cut};
use crate::config::{Fig2Section, Grid};
use crate::error::Result;
use crate::output::{Cell, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Tables {
    /// (a) Wigner function along `x_B = -x_A`, `p_A = p_B = 0`.
    pub wigner: Table,
    /// (b) S against squeezing, ideal detectors.
    pub lambda: Table,
    /// (c) S against APD efficiency at fixed `lambda T`.
    pub eta: Table,
    /// (d) S against homodyne efficiency at fixed `lambda T`.
    pub eta_bhd: Table,
}

impl Fig2Tables {
    /// File stems paired with their tables, in panel order.
    pub fn files(&self) -> [(&'static str, &Table); 4] {
        [
            ("fig2a_wigner", &self.wigner),
            ("fig2b_lambda", &self.lambda),
            ("fig2c_eta", &self.eta),
            ("fig2d_eta_bhd", &self.eta_bhd),
        ]
    }
}

fn series_label(t: f64) -> String {
    format!("T={t}")
}

fn s_panel(axis: SweepAxis, grid: &Grid, bases: &[(String, ExperimentParams)]) -> Table {
    let mut table = Table::new(&[axis.name(), "series", "S"]);
    let points = grid.points();
    let curves: Vec<_> = bases
        .par_iter()
        .map(|(label, base)| (label, sweep(axis, &points, base)))
        .collect();
    for (label, rows) in curves {
        for row in rows {
            let s = row.outcome.as_ref().ok().map(|r| r.s);
            table.push(vec![row.value.into(), label.as_str().into(), Cell::from(s)]);
        }
    }
    table
}

pub fn fig2_tables(cfg: &Fig2Section) -> Result<Fig2Tables> {
    let a = ExperimentParams::new(cfg.wigner_lambda, cfg.wigner_transmittance, cfg.wigner_eta, 1.0)?;
    let state = a.conditional_state()?;
    let cut = wigner_cut(&state, &antidiagonal_direction(), &cfg.wigner_offsets.points())?;
    let mut wigner = Table::new(&["offset", "series", "W"]);
    for (s, w) in cut {
        wigner.push(vec![s.into(), "W".into(), w.into()]);
    }

    let mut ideal = Vec::new();
    let mut fixed_apd = Vec::new();
    let mut fixed_bhd = Vec::new();
    for &t in &cfg.transmittances {
        let lambda = cfg.product / t;
        ideal.push((series_label(t), ExperimentParams::new(cfg.lambda.min, t, 1.0, 1.0)?));
        fixed_apd.push((series_label(t), ExperimentParams::new(lambda, t, cfg.eta.min, 1.0)?));
        fixed_bhd.push((series_label(t), ExperimentParams::new(lambda, t, cfg.eta_fixed, cfg.eta_bhd.min)?));
    }
    Ok(Fig2Tables {
        wigner,
        lambda: s_panel(SweepAxis::Lambda, &cfg.lambda, &ideal),
        eta: s_panel(SweepAxis::Eta, &cfg.eta, &fixed_apd),
        eta_bhd: s_panel(SweepAxis::EtaBhd, &cfg.eta_bhd, &fixed_bhd),
    })
}

/// Values of one series, in row order.
pub fn series(table: &Table, label: &str) -> Vec<(f64, Option<f64>)> {
    table
        .rows
        .iter()
        .filter(|r| r[1] == Cell::Text(label.to_owned()))
        .map(|r| {
            let x = match r[0] {
                Cell::Num(x) => x,
                _ => f64::NAN,
            };
            let y = match r[2] {
                Cell::Num(y) => Some(y),
                _ => None,
            };
            (x, y)
        })
        .collect()
}
