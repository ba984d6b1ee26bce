//! Multiplicative MRI bias field `B(x) = exp(P(x))`, with `P` a polynomial of
//! total degree `order` in coordinates normalised to [-1, 1] per axis.

use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use crate::case::Case;
use crate::error::{Error, Result};
use crate::volume::Volume3D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiasFieldParams {
    pub order: u32,
    /// Every coefficient is drawn uniformly from this range.
    pub coefficients: [f64; 2],
}

impl Default for BiasFieldParams {
    fn default() -> Self {
        Self {
            order: 3,
            coefficients: [-0.3, 0.3],
        }
    }
}

impl BiasFieldParams {
    pub fn validate(&self) -> Result<()> {
        if self.coefficients[0] <= self.coefficients[1] && self.coefficients.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid bias coefficient range {:?}", self.coefficients)))
        }
    }
}

/// Exponents `(i, j, k)` with `i + j + k <= order`, in the order coefficients
/// are drawn: `i` outermost, then `j`, then `k`.
pub fn monomials(order: u32) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for i in 0..=order {
        for j in 0..=order - i {
            for k in 0..=order - i - j {
                out.push([i, j, k]);
            }
        }
    }
    out
}

/// Normalised coordinate of voxel `i` on an axis of `n` voxels.
pub fn normalized_coord(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * i as f64 / (n - 1) as f64 - 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasField {
    pub order: u32,
    /// One coefficient per entry of [`monomials`].
    pub coefficients: Vec<f64>,
}

impl BiasField {
    pub fn new(order: u32, coefficients: Vec<f64>) -> Result<Self> {
        let expected = monomials(order).len();
        if coefficients.len() != expected {
            return Err(Error::Config(format!(
                "order {order} needs {expected} coefficients, got {}",
                coefficients.len()
            )));
        }
        Ok(Self { order, coefficients })
    }

    pub fn sample(params: &BiasFieldParams, rng: &mut RngStream) -> Self {
        let [lo, hi] = params.coefficients;
        let coefficients = monomials(params.order).iter().map(|_| rng.uniform(lo, hi)).collect();
        Self {
            order: params.order,
            coefficients,
        }
    }

    /// Polynomial value at normalised coordinates.
    pub fn log_gain(&self, p: [f64; 3]) -> f64 {
        monomials(self.order)
            .iter()
            .zip(&self.coefficients)
            .map(|(e, c)| c * p[0].powi(e[0] as i32) * p[1].powi(e[1] as i32) * p[2].powi(e[2] as i32))
            .sum()
    }

    /// Dense multiplicative field on `dims`.
    pub fn field(&self, dims: [usize; 3]) -> Vec<f64> {
        let terms = monomials(self.order);
        let pow_table = |n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| {
                    let c = normalized_coord(i, n);
                    (0..=self.order).map(|e| c.powi(e as i32)).collect()
                })
                .collect()
        };
        let (px, py, pz) = (pow_table(dims[0]), pow_table(dims[1]), pow_table(dims[2]));
        let mut out = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let p: f64 = terms
                        .iter()
                        .zip(&self.coefficients)
                        .map(|(e, c)| c * px[x][e[0] as usize] * py[y][e[1] as usize] * pz[z][e[2] as usize])
                        .sum();
                    out.push(p.exp());
                }
            }
        }
        out
    }

    pub fn apply(&self, vol: &Volume3D) -> Volume3D {
        if self.coefficients.iter().all(|&c| c == 0.0) {
            return vol.clone();
        }
        let f = self.field(vol.dims());
        vol.with_data(vol.data().iter().zip(f).map(|(v, b)| v * b).collect())
    }
}

/// Independent field per modality; the segmentation is passed through.
pub fn random_bias_field(case: &Case, params: &BiasFieldParams, rng: &mut RngStream) -> Case {
    let mut out = case.clone();
    for vol in out.modalities.iter_mut() {
        *vol = BiasField::sample(params, rng).apply(vol);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(0).len(), 1);
        assert_eq!(monomials(1), vec![[0, 0, 0], [0, 0, 1], [0, 1, 0], [1, 0, 0]]);
        assert_eq!(monomials(3).len(), 20);
    }

    #[test]
    fn zero_coefficients_leave_image_unchanged() {
        let g = Grid::new([5, 4, 3], [1.0; 3]).unwrap();
        let v = Volume3D::intensity(g, (0..60).map(|i| i as f64 * 1.25).collect()).unwrap();
        let b = BiasField::new(3, vec![0.0; 20]).unwrap();
        assert!(b.apply(&v).bitwise_eq(&v));
        assert!(b.field([5, 4, 3]).iter().all(|&x| x == 1.0));
    }

    #[test]
    fn linear_x_term() {
        // order 1, coefficient c on x: unchanged at normalised x = 0, scaled by exp(c) at x = 1
        let c = 0.2;
        let b = BiasField::new(1, vec![0.0, 0.0, 0.0, c]).unwrap();
        let dims = [5, 3, 3];
        let f = b.field(dims);
        let g = Grid::new(dims, [1.0; 3]).unwrap();
        for z in 0..3 {
            for y in 0..3 {
                assert_eq!(f[g.index(2, y, z)], 1.0);
                assert!((f[g.index(4, y, z)] - c.exp()).abs() < 1e-15);
                assert!((f[g.index(0, y, z)] - (-c).exp()).abs() < 1e-15);
                assert!((f[g.index(3, y, z)] - (0.5 * c).exp()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn field_is_positive_and_matches_pointwise_evaluation() {
        let mut rng = RngStream::from_seed(5);
        let params = BiasFieldParams {
            order: 3,
            coefficients: [-2.0, 2.0],
        };
        let b = BiasField::sample(&params, &mut rng);
        let dims = [6, 5, 4];
        let f = b.field(dims);
        let g = Grid::new(dims, [1.0; 3]).unwrap();
        for (i, &v) in f.iter().enumerate() {
            assert!(v > 0.0);
            let [x, y, z] = g.coords(i);
            let p = [normalized_coord(x, 6), normalized_coord(y, 5), normalized_coord(z, 4)];
            assert!((v.ln() - b.log_gain(p)).abs() < 1e-12);
        }
    }
}
