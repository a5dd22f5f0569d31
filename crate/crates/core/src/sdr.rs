//! Sparse distributed representations and k-winners-take-all selection.
//!
//! An [`Sdr`] is stored as a sorted list of active indices rather than a dense
//! bitmask: every consumer iterates the active bits only.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{invalid_arg, Error, Result};

/// A sparse binary vector of fixed dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sdr {
    dimension: usize,
    active: Vec<usize>,
}

impl Sdr {
    /// Builds an SDR from arbitrary (possibly unsorted, duplicated) indices.
    pub fn new(dimension: usize, mut active: Vec<usize>) -> Result<Self> {
        if dimension == 0 {
            return invalid_arg("sdr dimension must be positive");
        }
        active.sort_unstable();
        active.dedup();
        if let Some(&last) = active.last() {
            if last >= dimension {
                return invalid_arg(format!("index {last} out of range for dimension {dimension}"));
            }
        }
        Ok(Self { dimension, active })
    }

    pub fn empty(dimension: usize) -> Result<Self> {
        Self::new(dimension, Vec::new())
    }

    /// Builds an SDR from a dense binary slice (nonzero entries are active).
    pub fn from_dense<T: Copy + Default + PartialEq>(dense: &[T]) -> Result<Self> {
        let active = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != T::default())
            .map(|(i, _)| i)
            .collect();
        Self::new(dense.len(), active)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.active.binary_search(&index).is_ok()
    }

    pub fn to_dense(&self) -> Vec<u8> {
        let mut dense = vec![0u8; self.dimension];
        for &i in &self.active {
            dense[i] = 1;
        }
        dense
    }

    /// Number of shared active bits.
    pub fn overlap(&self, other: &Sdr) -> Result<usize> {
        if self.dimension != other.dimension {
            return invalid_arg(format!(
                "overlap of sdrs with dimensions {} and {}",
                self.dimension, other.dimension
            ));
        }
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.active.len() && j < other.active.len() {
            match self.active[i].cmp(&other.active[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(n)
    }

    /// Writes `dimension`, then the index count and the indices (u32, little endian).
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_u32::<LittleEndian>(self.dimension as u32)?;
        w.write_u32::<LittleEndian>(self.active.len() as u32)?;
        for &i in &self.active {
            w.write_u32::<LittleEndian>(i as u32)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let dimension = r.read_u32::<LittleEndian>()? as usize;
        let n = r.read_u32::<LittleEndian>()? as usize;
        if n > dimension {
            return Err(Error::Parse(format!("sdr with {n} active bits in dimension {dimension}")));
        }
        let mut active = Vec::with_capacity(n);
        for _ in 0..n {
            active.push(r.read_u32::<LittleEndian>()? as usize);
        }
        if active.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Parse("sdr indices are not strictly increasing".into()));
        }
        Self::new(dimension, active).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Indices of the `k` highest scores as an SDR over `scores.len()`.
///
/// Ties are broken by lowest index. Returns `min(k, scores.len())` winners.
pub fn kwta(scores: &[f64], k: usize) -> Result<Sdr> {
    if scores.is_empty() {
        return invalid_arg("kwta on empty scores");
    }
    if k == 0 {
        return invalid_arg("kwta requires k >= 1");
    }
    Ok(Sdr {
        dimension: scores.len(),
        active: top_k_indices(scores, k),
    })
}

/// Sorted indices of the top `k` entries, lowest index first among equals.
pub(crate) fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let k = k.min(scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let cmp = |a: &usize, b: &usize| {
        scores[*b]
            .partial_cmp(&scores[*a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    };
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable();
    order
}
