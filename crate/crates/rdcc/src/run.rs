//! Timed training, evaluation reports and batch prediction.

use std::time::Instant;

use rayon::prelude::*;
use rdcc_core::corpus::{evaluate, Counts, Document, EvalReport};
use rdcc_core::dictionary::Lexicon;
use rdcc_core::trainer::{predict, EpochStats, TrainConfig, Trainer};
use rdcc_core::{EntitySpan, EntityType, Model};

use crate::Result;

/// Name of the environment switch that pins every stage to one thread.
pub const DETERMINISM_VAR: &str = "RDCC_DETERMINISM";

pub fn determinism_requested() -> bool {
    std::env::var(DETERMINISM_VAR).is_ok_and(|v| v == "1")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub stats: EpochStats,
    /// Wall-clock time of the epoch.
    pub seconds: f64,
}

/// Trains for `config.epochs` epochs, calling `on_epoch` after each one.
pub fn train_timed(
    corpus: &[Document],
    lexicon: &Lexicon,
    config: TrainConfig,
    mut on_epoch: impl FnMut(&HistoryRow),
) -> Result<(Model, Vec<HistoryRow>)> {
    let epochs = config.epochs;
    let mut trainer = Trainer::new(corpus, lexicon, config)?;
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let start = Instant::now();
        let stats = trainer.run_epoch()?;
        let row = HistoryRow {
            stats,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&row);
        history.push(row);
    }
    Ok((trainer.finish()?, history))
}

pub fn history_csv(history: &[HistoryRow]) -> String {
    let mut out = String::from("epoch,mean_loss,seconds\n");
    for r in history {
        out.push_str(&format!("{},{},{:.6}\n", r.stats.epoch, r.stats.mean_loss, r.seconds));
    }
    out
}

/// Predictions for every text, in input order. Texts are decoded in
/// parallel unless determinism mode pins the work to one thread.
pub fn predict_all(model: &Model, lexicon: &Lexicon, texts: &[String]) -> Result<Vec<Vec<EntitySpan>>> {
    let one = |t: &String| predict(model, lexicon, t);
    let out: rdcc_core::Result<Vec<_>> = if determinism_requested() {
        texts.iter().map(one).collect()
    } else {
        texts.par_iter().map(one).collect()
    };
    Ok(out?)
}

/// Gold and predicted documents must cover the same texts in the same order.
pub fn evaluate_documents(gold: &[Document], pred: &[Document]) -> Result<EvalReport> {
    if let Some(i) = gold.iter().zip(pred).position(|(g, p)| g.text != p.text) {
        return Err(crate::Error::Usage(format!("record {} has different text in gold and prediction", i + 1)));
    }
    let g: Vec<Vec<EntitySpan>> = gold.iter().map(|d| d.entities.clone()).collect();
    let p: Vec<Vec<EntitySpan>> = pred.iter().map(|d| d.entities.clone()).collect();
    Ok(evaluate(&g, &p)?)
}

fn rows(report: &EvalReport) -> Vec<(&'static str, &Counts)> {
    let mut out: Vec<(&'static str, &Counts)> = EntityType::ALL.iter().map(|&t| (t.name(), report.for_type(t))).collect();
    out.push(("micro", &report.micro));
    out
}

pub fn report_table(report: &EvalReport) -> String {
    let mut out = format!(
        "{:<10} {:>9} {:>9} {:>9} {:>6} {:>6} {:>6}\n",
        "type", "precision", "recall", "f1", "tp", "fp", "fn"
    );
    for (name, c) in rows(report) {
        out.push_str(&format!(
            "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>6} {:>6} {:>6}\n",
            name,
            c.precision(),
            c.recall(),
            c.f1(),
            c.true_pos,
            c.false_pos,
            c.false_neg
        ));
    }
    out
}

pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("type,precision,recall,f1,tp,fp,fn\n");
    for (name, c) in rows(report) {
        out.push_str(&format!(
            "{name},{:.4},{:.4},{:.4},{},{},{}\n",
            c.precision(),
            c.recall(),
            c.f1(),
            c.true_pos,
            c.false_pos,
            c.false_neg
        ));
    }
    out
}
