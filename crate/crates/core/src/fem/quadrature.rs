//! Collapsed Gauss–Legendre rules on the reference simplex.

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, refined by Newton on P_n
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - t);
        w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// Points in barycentric coordinates and weights on the reference simplex;
/// weights sum to the reference measure `1/d!`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub dim: usize,
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Rule exact for polynomials of total degree `degree` on a `dim`-simplex
    /// (`dim` in 1..=3).
    pub fn simplex(dim: usize, degree: usize) -> Self {
        let n = (degree + dim).div_ceil(2).max(1);
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match dim {
            1 => {
                for i in 0..n {
                    points.push([1.0 - x[i], x[i], 0.0, 0.0]);
                    weights.push(w[i]);
                }
            }
            2 => {
                for i in 0..n {
                    for j in 0..n {
                        let (u, v) = (x[i], x[j]);
                        let (px, py) = (u, v * (1.0 - u));
                        points.push([1.0 - px - py, px, py, 0.0]);
                        weights.push(w[i] * w[j] * (1.0 - u));
                    }
                }
            }
            3 => {
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let (u, v, s) = (x[i], x[j], x[k]);
                            let px = u;
                            let py = v * (1.0 - u);
                            let pz = s * (1.0 - u) * (1.0 - v);
                            points.push([1.0 - px - py - pz, px, py, pz]);
                            weights.push(w[i] * w[j] * w[k] * (1.0 - u).powi(2) * (1.0 - v));
                        }
                    }
                }
            }
            d => panic!("no simplex rule for dimension {d}"),
        }
        Self {
            dim,
            points,
            weights,
        }
    }

    pub fn reference_measure(&self) -> f64 {
        match self.dim {
            1 => 1.0,
            2 => 0.5,
            _ => 1.0 / 6.0,
        }
    }
}
