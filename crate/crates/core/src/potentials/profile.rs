use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Single-site shape `u`. All shapes are non-negative, bounded and compactly
/// supported; `height` scales the whole profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    /// `exp(-|x|^2 / (2 width^2))` cut off at `radius`.
    Gaussian { width: f64, radius: f64, height: f64 },
    /// Indicator of the half-open unit cell `[-1/2, 1/2)^d`.
    BoxIndicator { height: f64 },
    /// `(1 + cos(pi |x| / radius)) / 2` inside the ball of `radius`.
    CosineBump { radius: f64, height: f64 },
}

impl Profile {
    pub fn cosine(radius: f64) -> Self {
        Profile::CosineBump { radius, height: 1.0 }
    }

    pub fn height(&self) -> f64 {
        match *self {
            Profile::Gaussian { height, .. }
            | Profile::BoxIndicator { height }
            | Profile::CosineBump { height, .. } => height,
        }
    }

    /// Radius in the sup-norm outside of which the profile vanishes.
    pub fn box_radius(&self) -> f64 {
        match *self {
            Profile::Gaussian { radius, .. } | Profile::CosineBump { radius, .. } => radius,
            Profile::BoxIndicator { .. } => 0.5,
        }
    }

    /// Euclidean support radius.
    pub fn support_radius(&self, dim: usize) -> f64 {
        match *self {
            Profile::BoxIndicator { .. } => 0.5 * (dim as f64).sqrt(),
            _ => self.box_radius(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.height().abs()
    }

    pub fn validate(&self) -> crate::Result<()> {
        let ok = match *self {
            Profile::Gaussian { width, radius, height } => {
                width > 0.0 && radius > 0.0 && height.is_finite()
            }
            Profile::BoxIndicator { height } => height.is_finite(),
            Profile::CosineBump { radius, height } => radius > 0.0 && height.is_finite(),
        };
        crate::error::ensure(ok, || format!("malformed profile {self:?}"))
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match *self {
            Profile::Gaussian { width, radius, height } => {
                let r2: f64 = y.iter().map(|v| v * v).sum();
                if r2 > radius * radius {
                    0.0
                } else {
                    height * (-r2 / (2.0 * width * width)).exp()
                }
            }
            Profile::BoxIndicator { height } => {
                if y.iter().all(|&v| (-0.5..0.5).contains(&v)) {
                    height
                } else {
                    0.0
                }
            }
            Profile::CosineBump { radius, height } => {
                let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r >= radius {
                    0.0
                } else {
                    height * 0.5 * (1.0 + (PI * r / radius).cos())
                }
            }
        }
    }

    /// `∫ u` over `R^dim`.
    pub fn integral(&self, dim: usize) -> f64 {
        let d = dim as f64;
        match *self {
            Profile::BoxIndicator { height } => height,
            Profile::Gaussian { width, radius, height } => {
                // radial integral of exp(-r²/2w²) r^{d-1} on [0, radius]
                let s = sphere_area(dim);
                height * s * radial_quad(|r| (-r * r / (2.0 * width * width)).exp() * r.powf(d - 1.0), radius)
            }
            Profile::CosineBump { radius, height } => {
                let s = sphere_area(dim);
                height * s * radial_quad(|r| 0.5 * (1.0 + (PI * r / radius).cos()) * r.powf(d - 1.0), radius)
            }
        }
    }

    /// Upper bound on the number of unit-lattice sites whose profile can be
    /// non-zero at a single point.
    pub fn max_overlap(&self, dim: usize) -> usize {
        let per_axis = (2.0 * self.box_radius()).floor() as usize + 1;
        per_axis.pow(dim as u32)
    }
}

fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

fn radial_quad(f: impl Fn(f64) -> f64, r: f64) -> f64 {
    // composite Simpson, plenty for smooth compact profiles
    let n = 2000;
    let h = r / n as f64;
    let mut s = f(0.0) + f(r);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(k as f64 * h);
    }
    s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_indicator_is_half_open() {
        let p = Profile::BoxIndicator { height: 1.0 };
        assert_eq!(p.eval(&[-0.5, 0.0]), 1.0);
        assert_eq!(p.eval(&[0.5, 0.0]), 0.0);
        assert_eq!(p.integral(2), 1.0);
    }

    #[test]
    fn cosine_integral_1d() {
        // ∫_{-r}^{r} (1 + cos(pi x / r))/2 dx = r
        let p = Profile::cosine(1.5);
        assert!((p.integral(1) - 1.5).abs() < 1e-10);
        assert_eq!(p.eval(&[0.0]), 1.0);
        assert_eq!(p.eval(&[1.5]), 0.0);
    }

    #[test]
    fn overlap_counts() {
        assert_eq!(Profile::BoxIndicator { height: 1.0 }.max_overlap(2), 4);
        assert_eq!(Profile::cosine(1.0).max_overlap(1), 3);
    }
}
