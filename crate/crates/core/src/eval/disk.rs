//! Corpus and prediction directories: one subdirectory per item holding
//! `design.png`, `bg.png`, `sticker.png`, `text.png`, `protocol.json` and
//! `meta.json` (predictions need only the protocol and the two layers).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::protocol::{parse_protocol, serialize_protocol};
use crate::raster::{read_png, write_png};

use super::{CorpusItem, CorpusKnobs, EvalError, Prediction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMeta {
    pub seed: u64,
    pub index: usize,
    pub width: u32,
    pub height: u32,
    pub knobs: CorpusKnobs,
}

pub fn write_item(dir: impl AsRef<Path>, item: &CorpusItem, meta: &ItemMeta) -> Result<(), EvalError> {
    let d = dir.as_ref().join(&item.id);
    fs::create_dir_all(&d)?;
    write_png(d.join("design.png"), &item.design)?;
    write_png(d.join("bg.png"), &item.background)?;
    write_png(d.join("sticker.png"), &item.sticker)?;
    write_png(d.join("text.png"), &item.text_layer)?;
    fs::write(d.join("protocol.json"), serialize_protocol(&item.text_protocol)?)?;
    fs::write(d.join("meta.json"), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

fn item_dirs(dir: &Path) -> Result<Vec<(String, std::path::PathBuf)>, EvalError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            out.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

/// Reads every item directory under `dir`, sorted by id. Masks are rederived
/// from the layers and the stored design must equal their composite.
pub fn read_corpus(dir: impl AsRef<Path>) -> Result<Vec<CorpusItem>, EvalError> {
    let mut items = Vec::new();
    for (id, d) in item_dirs(dir.as_ref())? {
        let protocol = parse_protocol(&fs::read(d.join("protocol.json"))?)?;
        let item = CorpusItem::assemble(
            id.clone(),
            read_png(d.join("bg.png"))?,
            read_png(d.join("sticker.png"))?,
            protocol,
            read_png(d.join("text.png"))?,
        )?;
        if read_png(d.join("design.png"))? != item.design {
            return Err(EvalError::CorruptItem(id));
        }
        items.push(item);
    }
    Ok(items)
}

pub fn write_prediction(dir: impl AsRef<Path>, id: &str, pred: &Prediction) -> Result<(), EvalError> {
    let d = dir.as_ref().join(id);
    fs::create_dir_all(&d)?;
    fs::write(d.join("protocol.json"), serialize_protocol(&pred.protocol)?)?;
    write_png(d.join("sticker.png"), &pred.sticker)?;
    write_png(d.join("bg.png"), &pred.background)?;
    Ok(())
}

pub fn read_predictions(dir: impl AsRef<Path>) -> Result<BTreeMap<String, Prediction>, EvalError> {
    let mut out = BTreeMap::new();
    for (id, d) in item_dirs(dir.as_ref())? {
        let pred = Prediction {
            protocol: parse_protocol(&fs::read(d.join("protocol.json"))?)?,
            sticker: read_png(d.join("sticker.png"))?,
            background: read_png(d.join("bg.png"))?,
        };
        out.insert(id, pred);
    }
    Ok(out)
}
