//! Connected-component labeling of binary volumes.

use std::collections::VecDeque;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Volume3, VolumeKind};

/// Voxel neighborhood: faces (6), faces and edges (18), or the full 3×3×3 cube (26).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Six,
    Eighteen,
    #[default]
    TwentySix,
}

impl Connectivity {
    pub fn neighbor_count(self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// Offsets of the neighborhood, excluding the center.
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let max_nonzero = match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        };
        let mut out = Vec::with_capacity(self.neighbor_count() as usize);
        for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let nonzero = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
                    if nonzero > 0 && nonzero <= max_nonzero {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(n: u8) -> std::result::Result<Self, String> {
        match n {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            _ => Err(format!("connectivity must be 6, 18 or 26, got {n}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        c.neighbor_count()
    }
}

impl FromStr for Connectivity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let n: u8 = s.trim().parse().map_err(|_| format!("invalid connectivity {s:?}"))?;
        Connectivity::try_from(n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub dims: [usize; 3],
    /// 0 is background, components are numbered from 1.
    pub labels: Vec<u32>,
    pub component_count: usize,
    /// `component_voxel_counts[k]` is the size of component `k + 1`.
    pub component_voxel_counts: Vec<usize>,
}

impl ComponentLabeling {
    /// Linear voxel indices of every component, in label order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .component_voxel_counts
            .iter()
            .map(|&n| Vec::with_capacity(n))
            .collect();
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push(i);
            }
        }
        out
    }
}

/// Labels maximal connected sets of 1-voxels.
///
/// Labels are assigned in ascending order of each component's first voxel
/// in x-fastest raster order.
pub fn connected_components(vol: &Volume3, connectivity: Connectivity) -> Result<ComponentLabeling> {
    vol.require_kind(VolumeKind::Binary)?;
    let dims = vol.dims();
    let [nx, ny, nz] = dims;
    let data = vol.data();
    let offsets = connectivity.offsets();

    let mut labels = vec![0u32; data.len()];
    let mut counts = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..data.len() {
        if data[start] == 0.0 || labels[start] != 0 {
            continue;
        }
        let label = u32::try_from(counts.len() + 1)
            .map_err(|_| Error::InvalidVolume("too many components".into()))?;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0usize;

        while let Some(idx) = queue.pop_front() {
            size += 1;
            let x = (idx % nx) as isize;
            let y = ((idx / nx) % ny) as isize;
            let z = (idx / (nx * ny)) as isize;
            for &[dx, dy, dz] in &offsets {
                let (qx, qy, qz) = (x + dx, y + dy, z + dz);
                if qx < 0 || qy < 0 || qz < 0 || qx >= nx as isize || qy >= ny as isize || qz >= nz as isize {
                    continue;
                }
                let q = qx as usize + nx * (qy as usize + ny * qz as usize);
                if data[q] != 0.0 && labels[q] == 0 {
                    labels[q] = label;
                    queue.push_back(q);
                }
            }
        }
        counts.push(size);
    }

    Ok(ComponentLabeling {
        dims,
        labels,
        component_count: counts.len(),
        component_voxel_counts: counts,
    })
}
