use std::collections::BTreeMap;
use std::path::PathBuf;

use lrt_core::io::{read_file, read_label_file};
use lrt_core::metrics::{AbsentPolicy, ClassIou, ConfusionMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::exit::{to_json, CliError, Code};
use crate::project::{config, list_files, stem};
use crate::tensors::write_text;
use crate::EvalArgs;

#[derive(Serialize)]
struct EvalReport {
    per_class_iou: Vec<ClassIou>,
    miou: f64,
    /// Confusion counts, rows ground truth, columns prediction.
    counts: Vec<Vec<u64>>,
    scored_samples: u64,
    absent: AbsentPolicy,
    pairs: usize,
}

fn by_stem(files: Vec<PathBuf>) -> BTreeMap<String, PathBuf> {
    files.into_iter().map(|p| (stem(&p), p)).collect()
}

pub fn run(a: &EvalArgs) -> Result<(), CliError> {
    let cfg = config(&a.config)?;
    let pred = by_stem(list_files(&a.pred, "label")?);
    let gt = by_stem(list_files(&a.gt, "label")?);
    let unpaired: Vec<&str> = pred
        .keys()
        .filter(|k| !gt.contains_key(*k))
        .chain(gt.keys().filter(|k| !pred.contains_key(*k)))
        .map(String::as_str)
        .collect();
    if !unpaired.is_empty() {
        return Err(CliError::new(Code::Pairing, format!("unpaired label files: {}", unpaired.join(", "))));
    }
    if gt.is_empty() {
        return Err(CliError::new(Code::Pairing, format!("no .label files in {}", a.gt.display())));
    }

    let c = cfg.remap.num_classes();
    let pairs: Vec<(&PathBuf, &PathBuf)> = gt.iter().map(|(k, g)| (&pred[k], g)).collect();
    let partial: Vec<Result<ConfusionMatrix, CliError>> = pairs
        .par_iter()
        .map(|&(p, g)| {
            let gb = read_file(g).map_err(|e| CliError::input(g, e))?;
            let count = gb.len() / 4;
            let gl = read_label_file(&gb, &cfg.remap, count).map_err(|e| CliError::input(g, e))?;
            let pb = read_file(p).map_err(|e| CliError::input(p, e))?;
            let pl = read_label_file(&pb, &cfg.remap, count).map_err(|e| CliError::input(p, e))?;
            let mut m = ConfusionMatrix::new(c).map_err(|e| CliError::config(&a.config, e))?;
            m.accumulate(&gl, &pl).map_err(|e| CliError::input(p, e))?;
            Ok(m)
        })
        .collect();
    let mut total = ConfusionMatrix::new(c).map_err(|e| CliError::config(&a.config, e))?;
    for m in partial {
        total.merge(&m?).expect("same class count");
    }

    let absent = if a.zero_absent {
        AbsentPolicy::Zero
    } else {
        AbsentPolicy::Exclude
    };
    let iou = total
        .iou_report(absent)
        .map_err(|e| CliError::new(Code::Partial, format!("nothing to score: {e}")))?
        .with_names(&cfg.class_names);
    eprint!("{}", iou.to_table());
    let report = EvalReport {
        counts: (0..c).map(|g| (0..c).map(|p| total.get(g, p)).collect()).collect(),
        per_class_iou: iou.per_class,
        miou: iou.miou,
        scored_samples: iou.scored_samples,
        absent,
        pairs: pairs.len(),
    };
    let json = to_json(&report)?;
    if let Some(out) = &a.out {
        write_text(out, &json).map_err(|e| CliError::new(Code::Io, e.to_string()))?;
    }
    println!("{json}");
    Ok(())
}
