use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One logging event. Loss fields average the gradient steps since the
/// previous record and are `null` when the term was not built.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub episodes: u64,
    pub gradient_steps: u64,
    /// Mean return of the training episodes finished since the last record.
    pub train_return: Option<f64>,
    pub eval_return_mean: Option<f64>,
    pub eval_return_std: Option<f64>,
    pub d_im: Option<f64>,
    pub d_rm: Option<f64>,
    pub f_dm: Option<f64>,
    pub critic: Option<f64>,
    pub actor: Option<f64>,
    pub alpha: Option<f64>,
    /// Most recent adaptive factor.
    pub delta: Option<f64>,
    pub probe_r2: Option<f64>,
    pub wall_clock: Option<f64>,
}

/// Losses of a single gradient step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepLosses {
    pub critic: f64,
    pub actor: f64,
    pub alpha: f64,
    pub d_im: Option<f64>,
    pub d_rm: Option<f64>,
    pub f_dm: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default)]
struct Mean {
    sum: f64,
    n: u64,
}

impl Mean {
    fn add(&mut self, v: Option<f64>) {
        if let Some(v) = v {
            self.sum += v;
            self.n += 1;
        }
    }

    fn take(&mut self) -> Option<f64> {
        let out = (self.n > 0).then(|| self.sum / self.n as f64);
        *self = Self::default();
        out
    }
}

/// Running means between records.
#[derive(Clone, Debug, Default)]
pub(crate) struct Accumulator {
    critic: Mean,
    actor: Mean,
    d_im: Mean,
    d_rm: Mean,
    f_dm: Mean,
    returns: Mean,
    alpha: Option<f64>,
    delta: Option<f64>,
}

impl Accumulator {
    pub fn add_step(&mut self, l: &StepLosses) {
        self.critic.add(Some(l.critic));
        self.actor.add(Some(l.actor));
        self.d_im.add(l.d_im);
        self.d_rm.add(l.d_rm);
        self.f_dm.add(l.f_dm);
        self.alpha = Some(l.alpha);
        if l.delta.is_some() {
            self.delta = l.delta;
        }
    }

    pub fn add_return(&mut self, r: f64) {
        self.returns.add(Some(r));
    }

    /// Fills the loss and return fields and resets the means. `alpha` and
    /// `delta` keep their latest values.
    pub fn drain_into(&mut self, rec: &mut MetricsRecord) {
        rec.critic = self.critic.take();
        rec.actor = self.actor.take();
        rec.d_im = self.d_im.take();
        rec.d_rm = self.d_rm.take();
        rec.f_dm = self.f_dm.take();
        rec.train_return = self.returns.take();
        rec.alpha = self.alpha;
        rec.delta = self.delta;
    }
}

/// JSON-lines writer, flushed after every record.
pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn write(&mut self, rec: &MetricsRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Parses a JSONL metrics file.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absent_losses_serialize_as_null() {
        let rec = MetricsRecord {
            step: 3,
            critic: Some(1.5),
            ..MetricsRecord::default()
        };
        let v: serde_json::Value = serde_json::to_value(&rec).unwrap();
        assert_eq!(v["d_im"], serde_json::Value::Null);
        assert_eq!(v["critic"], 1.5);
    }

    #[test]
    fn accumulator_averages_and_resets() {
        let mut acc = Accumulator::default();
        for (c, d) in [(1.0, Some(0.5)), (3.0, None)] {
            acc.add_step(&StepLosses {
                critic: c,
                d_im: d,
                delta: Some(0.9),
                ..StepLosses::default()
            });
        }
        let mut rec = MetricsRecord::default();
        acc.drain_into(&mut rec);
        assert_eq!(rec.critic, Some(2.0));
        assert_eq!(rec.d_im, Some(0.5));
        assert_eq!(rec.d_rm, None);
        assert_eq!(rec.delta, Some(0.9));
        acc.drain_into(&mut rec);
        assert_eq!(rec.critic, None);
        assert_eq!(rec.delta, Some(0.9));
    }

    #[test]
    fn writer_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mut w = MetricsWriter::create(&path).unwrap();
        let recs = vec![
            MetricsRecord {
                step: 1,
                ..MetricsRecord::default()
            },
            MetricsRecord {
                step: 2,
                delta: Some(1.2),
                ..MetricsRecord::default()
            },
        ];
        for r in &recs {
            w.write(r).unwrap();
        }
        assert_eq!(read_metrics(&path).unwrap(), recs);
    }
}
