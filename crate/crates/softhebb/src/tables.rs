//! CSV outputs. Column layouts are listed in `docs/formats.md`.

use std::fs::File;
use std::path::Path;

use serde::Serialize;
use softhebb_core::adversarial::CurvePoint;
use softhebb_core::eval::{LossTrace, NeuronLabelMap, NoisePoint, INVALID_LABEL};

use crate::error::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

#[derive(Serialize)]
struct TraceRow {
    step: u64,
    running_loss: Option<f64>,
    running_loss_smoothed: Option<f64>,
    test_loss: Option<f64>,
    seed: u64,
}

/// One row per step. `running_loss` at step `t` is the loss on the `t`-th
/// sample before the update it drives; `test_loss` at step `t` is measured
/// after `t` updates, so both describe the same state. The test column is
/// blank between measurements and the final row may carry only a test loss.
pub fn write_loss_trace(path: &Path, trace: &LossTrace, seed: u64) -> Result<()> {
    let mut w = writer(path)?;
    let mut tests = trace.test_step.iter().zip(&trace.test_loss).peekable();
    let emit = |w: &mut csv::Writer<File>, step, running: Option<(f64, f64)>, test| {
        w.serialize(TraceRow {
            step,
            running_loss: running.map(|r| r.0),
            running_loss_smoothed: running.map(|r| r.1),
            test_loss: test,
            seed,
        })
    };
    for i in 0..trace.step.len() {
        let step = trace.step[i];
        while let Some((&t, &l)) = tests.peek() {
            if t >= step {
                break;
            }
            emit(&mut w, t, None, Some(l))?;
            tests.next();
        }
        let test = tests.next_if(|(&t, _)| t == step).map(|(_, &l)| l);
        emit(&mut w, step, Some((trace.running_loss[i], trace.running_smoothed[i])), test)?;
    }
    for (&t, &l) in tests {
        emit(&mut w, t, None, Some(l))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `seed, metric, value, n_samples`; `n_samples` is 0 where it does not apply.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct MetricRow {
    pub seed: u64,
    pub metric: String,
    pub value: f64,
    pub n_samples: usize,
}

pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_noise(path: &Path, points: &[NoisePoint], seed: u64) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sigma", "accuracy", "n_samples", "seed"])?;
    for p in points {
        w.write_record([p.sigma.to_string(), p.accuracy.to_string(), p.samples.to_string(), seed.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_robustness(path: &Path, points: &[CurvePoint], seed: u64) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epsilon", "accuracy", "n", "seed"])?;
    for p in points {
        w.write_record([p.epsilon.to_string(), p.accuracy.to_string(), p.samples.to_string(), seed.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `neuron, label, wins_0 … wins_{C−1}`; an unlabeled neuron has label `-1`.
pub fn write_label_map(path: &Path, map: &NeuronLabelMap) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["neuron".to_string(), "label".to_string()];
    header.extend((0..map.classes()).map(|c| format!("wins_{c}")));
    w.write_record(&header)?;
    for k in 0..map.neurons() {
        let label = match map.label_of[k] {
            INVALID_LABEL => "-1".to_string(),
            l => l.to_string(),
        };
        let mut row = vec![k.to_string(), label];
        row.extend((0..map.classes()).map(|c| map.wins(k, c).to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Header plus numeric columns; blank cells become `None`.
pub fn read_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in r.records() {
        let rec = rec?;
        for (c, cell) in rec.iter().enumerate().take(header.len()) {
            let v = if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| Error::format(path, format!("non-numeric cell `{cell}`")))?)
            };
            cols[c].push(v);
        }
    }
    Ok((header, cols))
}
