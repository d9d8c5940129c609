//! Balanced JSONL export of labeled windows for classifier fine-tuning.

use base64::Engine;
use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{augment, encode_window_wav, AudioError, AudioStore, AugmentConfig};
use crate::rng::rng_for;
use crate::timeline::ExampleSpec;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("need {needed} negatives to balance, dataset has {available}")]
    InsufficientNegatives { needed: usize, available: usize },
    #[error(transparent)]
    Audio(#[from] AudioError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub audio_b64: String,
    /// `"P"` or `"N"`.
    pub label: String,
}

/// Every positive plus as many negatives drawn without replacement, in
/// shuffled order. No positives means no records. Augmentation, when given, applies per record from a
/// stream keyed by the record's position.
pub fn finetune_records(
    examples: &[ExampleSpec],
    store: &AudioStore,
    seed: u64,
    augmentation: Option<&AugmentConfig>,
) -> Result<Vec<FinetuneRecord>, ExportError> {
    let positives: Vec<&ExampleSpec> = examples.iter().filter(|e| e.label.is_positive()).collect();
    let negatives: Vec<&ExampleSpec> = examples.iter().filter(|e| !e.label.is_positive()).collect();
    if negatives.len() < positives.len() {
        return Err(ExportError::InsufficientNegatives {
            needed: positives.len(),
            available: negatives.len(),
        });
    }
    let mut rng = rng_for(seed, &["export"]);
    let mut chosen: Vec<&ExampleSpec> = negatives.choose_multiple(&mut rng, positives.len()).copied().collect();
    chosen.extend(positives);
    chosen.shuffle(&mut rng);
    chosen
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let mut w = store.window(ex)?;
            if let Some(cfg) = augmentation {
                let mut arng = rng_for(seed, &["export-augment", &i.to_string()]);
                w = augment(&w, cfg, &mut arng)?;
            }
            Ok(FinetuneRecord {
                audio_b64: base64::engine::general_purpose::STANDARD.encode(encode_window_wav(&w)),
                label: ex.label.token().to_string(),
            })
        })
        .collect()
}

pub fn export_finetune(
    examples: &[ExampleSpec],
    store: &AudioStore,
    seed: u64,
    augmentation: Option<&AugmentConfig>,
) -> Result<Vec<u8>, ExportError> {
    let mut out = Vec::new();
    for rec in finetune_records(examples, store, seed, augmentation)? {
        serde_json::to_writer(&mut out, &rec).expect("record serializes");
        out.push(b'\n');
    }
    Ok(out)
}
