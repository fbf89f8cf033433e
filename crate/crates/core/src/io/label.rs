use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw 32-bit semantic id → training class id. Unmapped ids become class 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRemap {
    table: BTreeMap<u32, u32>,
    num_classes: usize,
}

impl LabelRemap {
    pub fn new(table: BTreeMap<u32, u32>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::schema(
                "labels.num_classes",
                format!("need at least 2 classes, got {num_classes}"),
            ));
        }
        if let Some((raw, &class)) = table.iter().find(|(_, &c)| c as usize >= num_classes) {
            return Err(Error::schema(
                format!("labels.remap.{raw}"),
                format!("class {class} >= num_classes {num_classes}"),
            ));
        }
        Ok(Self { table, num_classes })
    }

    /// Maps every raw id `< num_classes` onto itself.
    pub fn identity(num_classes: usize) -> Self {
        let table = (0..num_classes as u32).map(|c| (c, c)).collect();
        Self::new(table, num_classes).expect("identity table is in range")
    }

    #[inline]
    pub fn map(&self, raw: u32) -> u32 {
        self.table.get(&raw).copied().unwrap_or(0)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn table(&self) -> &BTreeMap<u32, u32> {
        &self.table
    }
}

#[inline]
pub fn split_label(v: u32) -> (u16, u16) {
    ((v & 0xFFFF) as u16, (v >> 16) as u16)
}

#[inline]
pub fn pack_label(semantic: u16, instance: u16) -> u32 {
    semantic as u32 | ((instance as u32) << 16)
}

/// Decodes a `.label` file of `count` little-endian `u32` values; the lower
/// 16 bits are the semantic id (remapped), the upper 16 bits the instance id
/// (discarded).
pub fn read_label_file(bytes: &[u8], remap: &LabelRemap, count: usize) -> Result<Vec<u32>> {
    if bytes.len() != 4 * count {
        return Err(Error::Length(format!(
            "label file of {} bytes, expected {} for {count} points",
            bytes.len(),
            4 * count
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| {
            let (sem, _inst) = split_label(u32::from_le_bytes(b.try_into().unwrap()));
            remap.map(sem as u32)
        })
        .collect())
}

/// Raw label words, one per point.
pub fn write_label_file(raw: &[u32]) -> Vec<u8> {
    raw.iter().flat_map(|v| v.to_le_bytes()).collect()
}
