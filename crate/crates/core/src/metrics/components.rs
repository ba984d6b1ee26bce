//! Connected-component labelling of binary masks (two-pass union-find).

use serde::{Deserialize, Serialize};

use crate::volume::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Face neighbours.
    Six,
    /// Face and edge neighbours.
    Eighteen,
    /// Face, edge and corner neighbours.
    TwentySix,
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(format!("connectivity must be 6, 18 or 26, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }
}

impl Connectivity {
    /// Neighbour offsets that precede a voxel in raster order.
    fn backward_offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for dz in -1..=0i64 {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let before = dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0)));
                    if !before {
                        continue;
                    }
                    let nonzero = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
                    let keep = match self {
                        Connectivity::Six => nonzero == 1,
                        Connectivity::Eighteen => nonzero <= 2,
                        Connectivity::TwentySix => true,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> Self {
        // slot 0 is background
        Self { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so the final ids follow raster order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub dims: [usize; 3],
    /// 0 for background, otherwise 1..=count.
    pub labels: Vec<u32>,
    pub count: usize,
    /// Voxel count of component `i + 1`.
    pub sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn voxels(&self, id: u32) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == id)
            .map(|(i, _)| i)
    }

    pub fn volume_mm3(&self, id: u32, spacing: [f64; 3]) -> f64 {
        self.sizes[id as usize - 1] as f64 * spacing.iter().product::<f64>()
    }

    pub fn mask(&self, id: u32) -> BinaryMask {
        BinaryMask::new(self.dims, self.labels.iter().map(|&l| l == id).collect()).expect("dims match")
    }
}

/// Ids are assigned in raster order of each component's first voxel.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabeling {
    let dims = mask.dims();
    let [nx, ny, nz] = dims;
    let offsets = connectivity.backward_offsets();
    let mut provisional = vec![0u32; mask.data().len()];
    let mut uf = UnionFind::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * (y + ny * z);
                if !mask.data()[i] {
                    continue;
                }
                let mut current = 0u32;
                for o in &offsets {
                    let (qx, qy, qz) = (x as i64 + o[0], y as i64 + o[1], z as i64 + o[2]);
                    if qx < 0 || qy < 0 || qz < 0 || qx >= nx as i64 || qy >= ny as i64 {
                        continue;
                    }
                    let l = provisional[qx as usize + nx * (qy as usize + ny * qz as usize)];
                    if l == 0 {
                        continue;
                    }
                    if current == 0 {
                        current = l;
                    } else if l != current {
                        uf.union(current, l);
                    }
                }
                provisional[i] = if current == 0 { uf.make() } else { current };
            }
        }
    }
    // compact roots to 1..=count in order of first appearance
    let mut remap = vec![0u32; uf.parent.len()];
    let mut count = 0u32;
    let mut sizes = Vec::new();
    let mut labels = provisional;
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = uf.find(*l) as usize;
        if remap[root] == 0 {
            count += 1;
            remap[root] = count;
            sizes.push(0);
        }
        *l = remap[root];
        sizes[*l as usize - 1] += 1;
    }
    ComponentLabeling {
        dims,
        labels,
        count: count as usize,
        sizes,
    }
}
