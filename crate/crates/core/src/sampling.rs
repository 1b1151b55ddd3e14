//! Seeded low-discrepancy sampling of bounded regions around the origin.
//!
//! Points come from a Halton sequence with a Cranley–Patterson shift drawn
//! from the seed, mapped onto the region. Point `i` depends only on
//! `(region, seed, i)`, so scans can be split across workers freely.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::norm;

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131,
];

/// Default inner radius excluded around the origin.
pub const DEFAULT_R_MIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// Annulus `r_min ≤ ‖x‖ ≤ radius`.
    Ball { dim: usize, radius: f64, r_min: f64 },
    /// Cube `|x_i| ≤ half_width`, points closer than `r_min` pushed out radially.
    Box {
        dim: usize,
        half_width: f64,
        r_min: f64,
    },
    /// Product `‖x_head‖ ≤ head_radius`, `‖x_tail‖ ≤ tail_radius`, with
    /// `x_head` the first `head_dim` coordinates.
    Split {
        head_dim: usize,
        tail_dim: usize,
        head_radius: f64,
        tail_radius: f64,
        r_min: f64,
    },
}

impl Region {
    pub fn ball(dim: usize, radius: f64) -> Self {
        Region::Ball {
            dim,
            radius,
            r_min: DEFAULT_R_MIN,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Region::Ball { dim, .. } | Region::Box { dim, .. } => dim,
            Region::Split {
                head_dim, tail_dim, ..
            } => head_dim + tail_dim,
        }
    }

    pub fn r_min(&self) -> f64 {
        match *self {
            Region::Ball { r_min, .. }
            | Region::Box { r_min, .. }
            | Region::Split { r_min, .. } => r_min,
        }
    }

    fn halton_dims(&self) -> usize {
        match *self {
            Region::Ball { dim, .. } => dim + 1,
            Region::Box { dim, .. } => dim,
            Region::Split {
                head_dim, tail_dim, ..
            } => head_dim + tail_dim + 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Region::Ball { dim, radius, r_min } => dim > 0 && r_min > 0.0 && radius > r_min,
            Region::Box {
                dim,
                half_width,
                r_min,
            } => dim > 0 && r_min > 0.0 && half_width > r_min,
            Region::Split {
                head_dim,
                tail_dim,
                head_radius,
                tail_radius,
                r_min,
            } => {
                head_dim > 0
                    && tail_dim > 0
                    && r_min > 0.0
                    && head_radius > 0.0
                    && tail_radius > 0.0
            }
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "degenerate sampling region {self:?}"
            )));
        }
        if self.halton_dims() > PRIMES.len() {
            return Err(Error::InvalidArgument(format!(
                "region dimension {} exceeds the sampler limit",
                self.dim()
            )));
        }
        Ok(())
    }

    /// Whether `x` lies in the region (with a small slack for rounding).
    pub fn contains(&self, x: &[f64]) -> bool {
        let slack = 1e-12;
        let r = norm(x);
        match *self {
            Region::Ball { radius, r_min, .. } => {
                r >= r_min * (1.0 - slack) && r <= radius * (1.0 + slack)
            }
            Region::Box {
                half_width, r_min, ..
            } => {
                r >= r_min * (1.0 - slack)
                    && x.iter().all(|v| v.abs() <= half_width * (1.0 + slack))
            }
            Region::Split {
                head_dim,
                head_radius,
                tail_radius,
                r_min,
                ..
            } => {
                r >= r_min * (1.0 - slack)
                    && norm(&x[..head_dim]) <= head_radius * (1.0 + slack)
                    && norm(&x[head_dim..]) <= tail_radius * (1.0 + slack)
            }
        }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// Deterministic point generator for a region and seed.
#[derive(Clone, Debug)]
pub struct Sampler {
    region: Region,
    shift: Vec<f64>,
    normal: Normal,
}

impl Sampler {
    pub fn new(region: Region, seed: u64) -> Result<Self> {
        region.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..region.halton_dims())
            .map(|_| rng.random::<f64>())
            .collect();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        Ok(Sampler {
            region,
            shift,
            normal,
        })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    fn unit(&self, i: u64, d: usize) -> f64 {
        let u = radical_inverse(i + 1, PRIMES[d]) + self.shift[d];
        let u = u - u.floor();
        u.clamp(1e-15, 1.0 - 1e-15)
    }

    fn ball_point(&self, i: u64, first_dim: usize, dim: usize, r_lo: f64, r_hi: f64) -> Vec<f64> {
        let mut dir: Vec<f64> = (0..dim)
            .map(|d| self.normal.inverse_cdf(self.unit(i, first_dim + d)))
            .collect();
        let len = norm(&dir);
        if len == 0.0 {
            dir[0] = 1.0;
        } else {
            dir.iter_mut().for_each(|v| *v /= len);
        }
        let u = self.unit(i, first_dim + dim);
        let k = dim as f64;
        let r = (r_lo.powf(k) + u * (r_hi.powf(k) - r_lo.powf(k))).powf(1.0 / k);
        dir.iter().map(|v| v * r).collect()
    }

    /// The `i`-th point.
    pub fn point(&self, i: u64) -> Vec<f64> {
        match self.region {
            Region::Ball { dim, radius, r_min } => self.ball_point(i, 0, dim, r_min, radius),
            Region::Box {
                dim,
                half_width,
                r_min,
            } => {
                let x: Vec<f64> = (0..dim)
                    .map(|d| (2.0 * self.unit(i, d) - 1.0) * half_width)
                    .collect();
                push_out(x, r_min)
            }
            Region::Split {
                head_dim,
                tail_dim,
                head_radius,
                tail_radius,
                r_min,
            } => {
                let mut x = self.ball_point(i, 0, head_dim, 0.0, head_radius);
                x.extend(self.ball_point(i, head_dim + 1, tail_dim, 0.0, tail_radius));
                push_out(x, r_min)
            }
        }
    }

    pub fn points(&self, count: usize) -> Vec<Vec<f64>> {
        (0..count as u64).map(|i| self.point(i)).collect()
    }
}

fn push_out(mut x: Vec<f64>, r_min: f64) -> Vec<f64> {
    let r = norm(&x);
    if r < r_min {
        if r == 0.0 {
            x[0] = r_min;
        } else {
            x.iter_mut().for_each(|v| *v *= r_min / r);
        }
    }
    x
}
