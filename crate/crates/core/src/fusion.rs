//! Temporal fusion of per-frame visual token grids.
//!
//! A clip sampled at `F` frames yields `F` grids of `T` tokens of width `D`.
//! Concatenation keeps all `F·T` tokens in temporal order; averaging
//! collapses the frame axis to `T` tokens.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tokens produced by a patch grid with no class token.
pub fn visual_token_count(height: u64, width: u64, patch: u64) -> Result<u64> {
    if patch == 0 {
        return Err(Error::InvalidTensor("patch size must be positive".into()));
    }
    if height == 0 || width == 0 {
        return Err(Error::InvalidTensor("image dimensions must be positive".into()));
    }
    for (what, value) in [("height", height), ("width", width)] {
        if value % patch != 0 {
            return Err(Error::NotDivisible { what, value, patch });
        }
    }
    Ok((height / patch) * (width / patch))
}

/// `frames × tokens_per_frame × dim` values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTokenBlock {
    frames: usize,
    tokens_per_frame: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FrameTokenBlock {
    pub fn new(frames: usize, tokens_per_frame: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if frames == 0 || tokens_per_frame == 0 || dim == 0 {
            return Err(Error::InvalidTensor(format!(
                "shape {frames}x{tokens_per_frame}x{dim} has a zero axis"
            )));
        }
        let expected = frames
            .checked_mul(tokens_per_frame)
            .and_then(|n| n.checked_mul(dim))
            .ok_or_else(|| Error::InvalidTensor("shape overflows".into()))?;
        if values.len() != expected {
            return Err(Error::InvalidTensor(format!(
                "expected {expected} values for {frames}x{tokens_per_frame}x{dim}, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frame token block".into()));
        }
        Ok(Self {
            frames,
            tokens_per_frame,
            dim,
            values,
        })
    }

    /// Stacks equally shaped `T × D` frame grids in the given order.
    pub fn from_frames(frames: &[Vec<f64>], tokens_per_frame: usize, dim: usize) -> Result<Self> {
        let values = frames.iter().flatten().copied().collect();
        Self::new(frames.len(), tokens_per_frame, dim, values)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn tokens_per_frame(&self) -> usize {
        self.tokens_per_frame
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn frame_len(&self) -> usize {
        self.tokens_per_frame * self.dim
    }

    pub fn frame(&self, index: usize) -> &[f64] {
        let len = self.frame_len();
        &self.values[index * len..(index + 1) * len]
    }

    /// Same block with frames reordered so output frame `i` is input
    /// frame `order[i]`.
    pub fn permute_frames(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.frames];
        if order.len() != self.frames || order.iter().any(|&i| i >= self.frames || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidTensor("frame order is not a permutation".into()));
        }
        let values = order.iter().flat_map(|&i| self.frame(i).iter().copied()).collect();
        Self::new(self.frames, self.tokens_per_frame, self.dim, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Average,
    Concat,
}

/// `len × dim` fused token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedTokens {
    pub len: usize,
    pub dim: usize,
    pub values: Vec<f64>,
    pub mode: FusionMode,
}

impl FusedTokens {
    pub fn row(&self, index: usize) -> &[f64] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }

    /// Splits a concatenation back into frames of `tokens_per_frame` rows.
    pub fn unconcat(&self, tokens_per_frame: usize) -> Result<FrameTokenBlock> {
        if self.mode != FusionMode::Concat || tokens_per_frame == 0 || !self.len.is_multiple_of(tokens_per_frame) {
            return Err(Error::InvalidTensor(format!(
                "cannot split {} {:?} tokens into frames of {tokens_per_frame}",
                self.len, self.mode
            )));
        }
        FrameTokenBlock::new(self.len / tokens_per_frame, tokens_per_frame, self.dim, self.values.clone())
    }
}

pub fn fuse_concat(block: &FrameTokenBlock) -> FusedTokens {
    FusedTokens {
        len: block.frames * block.tokens_per_frame,
        dim: block.dim,
        values: block.values.clone(),
        mode: FusionMode::Concat,
    }
}

pub fn fuse_average(block: &FrameTokenBlock) -> FusedTokens {
    let frame_len = block.frame_len();
    let mut column = Vec::with_capacity(block.frames);
    let values = (0..frame_len)
        .map(|pos| {
            column.clear();
            column.extend((0..block.frames).map(|f| block.values[f * frame_len + pos]));
            // summed in sorted order so the mean does not depend on frame order
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / block.frames as f64
        })
        .collect();
    FusedTokens {
        len: block.tokens_per_frame,
        dim: block.dim,
        values,
        mode: FusionMode::Average,
    }
}

pub fn fuse(block: &FrameTokenBlock, mode: FusionMode) -> FusedTokens {
    match mode {
        FusionMode::Average => fuse_average(block),
        FusionMode::Concat => fuse_concat(block),
    }
}

/// Binary tensor file: three little-endian `u64` (F, T, D) followed by
/// `F·T·D` little-endian `f32` in row-major order.
pub fn read_tensor<R: Read>(mut reader: R) -> Result<FrameTokenBlock> {
    let mut header = [0u8; 24];
    reader
        .read_exact(&mut header)
        .map_err(|e| Error::InvalidTensor(format!("header: {e}")))?;
    let dims: Vec<u64> = header
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let [frames, tokens, dim] = [dims[0], dims[1], dims[2]].map(|d| usize::try_from(d).unwrap_or(usize::MAX));
    let count = frames
        .checked_mul(tokens)
        .and_then(|n| n.checked_mul(dim))
        .filter(|&n| n <= isize::MAX as usize / 4)
        .ok_or_else(|| Error::InvalidTensor(format!("shape {frames}x{tokens}x{dim} too large")))?;
    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::InvalidTensor(format!("payload: {e}")))?;
    if payload.len() != count * 4 {
        return Err(Error::InvalidTensor(format!(
            "payload has {} bytes, shape {frames}x{tokens}x{dim} needs {}",
            payload.len(),
            count * 4
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    FrameTokenBlock::new(frames, tokens, dim, values)
}

pub fn write_tensor<W: Write>(mut writer: W, frames: usize, tokens: usize, dim: usize, values: &[f64]) -> std::io::Result<()> {
    for d in [frames, tokens, dim] {
        writer.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in values {
        writer.write_all(&(v as f32).to_le_bytes())?;
    }
    writer.flush()
}

pub fn load_tensor(path: &Path) -> Result<FrameTokenBlock> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensor(std::io::BufReader::new(file))
}

/// Writes fused tokens as a one-frame tensor of shape `1 × len × dim`.
pub fn save_fused(path: &Path, fused: &FusedTokens) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_tensor(std::io::BufWriter::new(file), 1, fused.len, fused.dim, &fused.values).map_err(|e| Error::io(path, e))
}
