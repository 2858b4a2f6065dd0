//! Indexing on the discrete torus (Z/LZ)^d.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Torus {
    pub l: usize,
    pub d: usize,
}

impl Torus {
    pub fn new(l: usize, d: usize) -> Self {
        assert!(l >= 2 && d >= 1, "torus needs l >= 2, d >= 1");
        Torus { l, d }
    }

    pub fn n_sites(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Number of directed nearest-neighbour bonds per orientation class,
    /// i.e. sites * dimensions (one bond (i, i+e_k) per site and axis).
    pub fn n_edges(&self) -> usize {
        self.n_sites() * self.d
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut c = vec![0usize; self.d];
        let mut s = site;
        for k in 0..self.d {
            c[k] = s % self.l;
            s /= self.l;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        let mut s = 0usize;
        for k in (0..self.d).rev() {
            s = s * self.l + (coords[k] % self.l);
        }
        s
    }

    /// Neighbour of `site` along `axis` in direction `sign` (+1 or -1).
    pub fn neighbor(&self, site: usize, axis: usize, sign: i8) -> usize {
        let stride = self.l.pow(axis as u32);
        let along = (site / stride) % self.l;
        let base = site - along * stride;
        let next = if sign > 0 {
            (along + 1) % self.l
        } else {
            (along + self.l - 1) % self.l
        };
        base + next * stride
    }

    /// Macroscopic coordinate i/L in [0,1)^d of a site.
    pub fn point(&self, site: usize) -> Vec<f64> {
        self.coords(site)
            .into_iter()
            .map(|c| c as f64 / self.l as f64)
            .collect()
    }
}
