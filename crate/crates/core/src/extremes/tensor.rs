use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::estimators::{empirical_chi, empirical_chibar, UniformScores};
use crate::nn::Tensor3;
use crate::{Error, Result};

/// Magic bytes of the binary tensor record.
pub const TENSOR_MAGIC: &[u8; 4] = b"XDT1";

/// Pairwise `χ̂_u` and `χ̄̂_u` planes: the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceTensor {
    pub u: f64,
    pub chi: Array2<f64>,
    pub chibar: Array2<f64>,
}

/// Cells whose estimates needed a continuity correction or had no value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub corrected: Vec<(usize, usize)>,
    pub undefined: Vec<(usize, usize)>,
}

impl QualityReport {
    pub fn is_clean(&self) -> bool {
        self.corrected.is_empty() && self.undefined.is_empty()
    }
}

impl DependenceTensor {
    pub fn d(&self) -> usize {
        self.chi.nrows()
    }

    /// Channel-last `(d, d, 2)` network input: channel 0 is `χ̂`, channel 1 is `χ̄̂`.
    pub fn to_input(&self) -> Tensor3 {
        let d = self.d();
        let mut data = Vec::with_capacity(d * d * 2);
        for (a, b) in self.chi.iter().zip(self.chibar.iter()) {
            data.push(*a);
            data.push(*b);
        }
        Tensor3::new(d, d, 2, data).expect("tensor planes are d x d")
    }

    /// Byte length of one encoded record for `d` sites.
    pub fn encoded_len(d: usize) -> usize {
        4 + 8 + 4 + 2 * d * d * 8
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let d = u32::try_from(self.d()).map_err(|_| Error::Shape("tensor too large".into()))?;
        w.write_all(TENSOR_MAGIC)?;
        w.write_all(&self.u.to_le_bytes())?;
        w.write_all(&d.to_le_bytes())?;
        for v in self.chi.iter().chain(self.chibar.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(Self::encoded_len(self.d()));
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != TENSOR_MAGIC {
            return Err(Error::Format(format!("bad tensor magic {magic:?}")));
        }
        let mut b8 = [0u8; 8];
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b8).map_err(truncated)?;
        let u = f64::from_le_bytes(b8);
        r.read_exact(&mut b4).map_err(truncated)?;
        let d = u32::from_le_bytes(b4) as usize;
        let mut plane = |r: &mut R| -> Result<Array2<f64>> {
            let mut data = Vec::with_capacity(d * d);
            for _ in 0..d * d {
                r.read_exact(&mut b8).map_err(truncated)?;
                data.push(f64::from_le_bytes(b8));
            }
            Ok(Array2::from_shape_vec((d, d), data).expect("d*d values"))
        };
        let chi = plane(&mut r)?;
        let chibar = plane(&mut r)?;
        Ok(Self { u, chi, chibar })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    /// Symmetry, unit diagonal and clamped ranges.
    pub fn check_invariants(&self) -> Result<()> {
        let d = self.d();
        for i in 0..d {
            if self.chi[[i, i]] != 1.0 || self.chibar[[i, i]] != 1.0 {
                return Err(Error::Domain(format!("diagonal cell {i} is not 1")));
            }
            for j in 0..d {
                let (c, cb) = (self.chi[[i, j]], self.chibar[[i, j]]);
                if c != self.chi[[j, i]] || cb != self.chibar[[j, i]] {
                    return Err(Error::Domain(format!("cell ({i},{j}) is not symmetric")));
                }
                if !(0.0..=1.0).contains(&c) || !(-1.0..=1.0).contains(&cb) {
                    return Err(Error::Domain(format!("cell ({i},{j}) out of range: {c}, {cb}")));
                }
            }
        }
        Ok(())
    }
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated tensor record".into())
    } else {
        Error::Io(e)
    }
}

/// Fills both planes from uniform scores, computing each unordered pair once
/// with column order as stored (`i < j`).
pub fn dependence_tensor(scores: &UniformScores, u: f64) -> Result<(DependenceTensor, QualityReport)> {
    let d = scores.n_sites();
    if d < 2 {
        return Err(Error::Shape(format!("a dependence tensor needs at least 2 sites, got {d}")));
    }
    let mut chi = Array2::from_elem((d, d), 1.0);
    let mut chibar = Array2::from_elem((d, d), 1.0);
    let mut report = QualityReport::default();
    for i in 0..d {
        for j in (i + 1)..d {
            let (s, t) = (scores.column(i), scores.column(j));
            let a = empirical_chi(s, t, u)?;
            let b = empirical_chibar(s, t, u)?;
            chi[[i, j]] = a.value;
            chi[[j, i]] = a.value;
            chibar[[i, j]] = b.value;
            chibar[[j, i]] = b.value;
            if a.corrected || b.corrected {
                report.corrected.push((i, j));
            }
            if a.undefined || b.undefined {
                report.undefined.push((i, j));
            }
        }
    }
    Ok((DependenceTensor { u, chi, chibar }, report))
}
