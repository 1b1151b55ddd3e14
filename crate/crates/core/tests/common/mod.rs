//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's differentiation or bracket code.

#![allow(dead_code, clippy::needless_range_loop)]

use oscstab::scalar::Scalar;
use oscstab::vecfield::{IndexPair, SmoothFields, VectorFieldSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Quadratic fields `f_k(x) = c_k + A_k x + Σ_ab B_k[r][a][b] x_a x_b` on
/// `R³` with two inputs.
#[derive(Clone, Debug)]
pub struct PolySystem {
    pub c: [[f64; 3]; 2],
    pub a: [[[f64; 3]; 3]; 2],
    pub b: [[[[f64; 3]; 3]; 3]; 2],
}

impl PolySystem {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = || rng.random_range(-1.0..1.0);
        let mut c = [[0.0; 3]; 2];
        let mut a = [[[0.0; 3]; 3]; 2];
        let mut b = [[[[0.0; 3]; 3]; 3]; 2];
        for k in 0..2 {
            for r in 0..3 {
                c[k][r] = 0.2 * u();
                for s in 0..3 {
                    a[k][r][s] = u();
                    for t in 0..3 {
                        b[k][r][s][t] = 0.5 * u();
                    }
                }
            }
            c[k][k] += 1.0;
        }
        PolySystem { c, a, b }
    }

    pub fn eval(&self, k: usize, x: &[f64]) -> Vec<f64> {
        self.field::<f64>(k, x)
    }

    pub fn system(&self) -> VectorFieldSystem {
        VectorFieldSystem::new("poly", self.clone(), vec![IndexPair::new(0, 1)]).unwrap()
    }
}

impl SmoothFields for PolySystem {
    fn state_dim(&self) -> usize {
        3
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn field<S: Scalar>(&self, k: usize, x: &[S]) -> Vec<S> {
        (0..3)
            .map(|r| {
                let mut acc = S::from_f64(self.c[k][r]);
                for s in 0..3 {
                    acc += x[s].scale(self.a[k][r][s]);
                    for t in 0..3 {
                        acc += (x[s] * x[t]).scale(self.b[k][r][s][t]);
                    }
                }
                acc
            })
            .collect()
    }
}

/// Heisenberg fields `f_1 = (1, 0, −x_2/2)`, `f_2 = (0, 1, x_1/2)`.
#[derive(Clone, Copy, Debug)]
pub struct Heisenberg;

impl SmoothFields for Heisenberg {
    fn state_dim(&self) -> usize {
        3
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn field<S: Scalar>(&self, k: usize, x: &[S]) -> Vec<S> {
        match k {
            0 => vec![S::one(), S::zero(), x[1].scale(-0.5)],
            _ => vec![S::zero(), S::one(), x[0].scale(0.5)],
        }
    }
}

pub fn heisenberg() -> VectorFieldSystem {
    VectorFieldSystem::new("heisenberg", Heisenberg, vec![IndexPair::new(0, 1)]).unwrap()
}

/// Central-difference Jacobian, row-major.
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let mut jac = vec![0.0; n * n];
    for c in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[c] += h;
        xm[c] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        for r in 0..n {
            jac[r * n + c] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    jac
}

/// `[f, g] = Dg·f − Df·g` by central differences.
pub fn fd_bracket(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    g: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    let n = x.len();
    let (jf, jg) = (fd_jacobian(f, x, h), fd_jacobian(g, x, h));
    let (fx, gx) = (f(x), g(x));
    (0..n)
        .map(|r| {
            (0..n)
                .map(|c| jg[r * n + c] * fx[c] - jf[r * n + c] * gx[c])
                .sum()
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Fields of the ten-dimensional Brockett integrator written out entry by
/// entry.
pub fn brockett_field(k: usize, x: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; 10];
    f[k] = 1.0;
    match k {
        0 => {
            f[4] = -x[1];
            f[5] = -x[2];
            f[6] = -x[3];
        }
        1 => {
            f[4] = x[0];
            f[7] = -x[2];
            f[8] = -x[3];
        }
        2 => {
            f[5] = x[0];
            f[7] = x[1];
            f[9] = -x[3];
        }
        _ => {
            f[6] = x[0];
            f[8] = x[1];
            f[9] = x[2];
        }
    }
    f
}

pub const BROCKETT_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// `V = ½Σ_{k<4} x_k² + 1/(2p) Σ_{c≥4} |x_c|^{2p}`.
pub fn brockett_v(p: f64, x: &[f64]) -> f64 {
    0.5 * x[..4].iter().map(|v| v * v).sum::<f64>()
        + x[4..].iter().map(|v| v.abs().powf(2.0 * p)).sum::<f64>() / (2.0 * p)
}

pub fn brockett_grad_v(p: f64, x: &[f64]) -> Vec<f64> {
    (0..10)
        .map(|i| {
            if i < 4 {
                x[i]
            } else {
                x[i].signum() * x[i].abs().powf(2.0 * p - 1.0)
            }
        })
        .collect()
}

/// Averaged certificate `∇V·(g_0 + γ²Σ[g_i, g_j])` with every bracket of
/// the gain-weighted fields taken by finite differences. Valid away from
/// the coordinate hyperplanes `x_c = 0`, `c ≥ 4`.
pub fn brockett_w_fd(p: f64, gamma: f64, x: &[f64]) -> f64 {
    let vt = |y: &[f64], idx: usize| {
        let v = y[4 + idx];
        -0.5 * v.signum() * v.abs().powf(2.0 * p - 1.0)
    };
    let grad = brockett_grad_v(p, x);
    let mut total = 0.0;
    for k in 0..4 {
        let f = brockett_field(k, x);
        total += -x[k] * grad.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
    }
    for (idx, &(i, j)) in BROCKETT_PAIRS.iter().enumerate() {
        let gi = move |y: &[f64]| {
            let s = vt(y, idx).abs().sqrt();
            brockett_field(i, y)
                .into_iter()
                .map(|v| s * v)
                .collect::<Vec<_>>()
        };
        let gj = move |y: &[f64]| {
            let w = vt(y, idx);
            let s = w.abs().sqrt() * w.signum();
            brockett_field(j, y)
                .into_iter()
                .map(|v| s * v)
                .collect::<Vec<_>>()
        };
        let b = fd_bracket(&gi, &gj, x, 1e-6);
        total += gamma * gamma * grad.iter().zip(&b).map(|(a, c)| a * c).sum::<f64>();
    }
    total
}

pub fn random_point(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-radius..radius)).collect()
}
