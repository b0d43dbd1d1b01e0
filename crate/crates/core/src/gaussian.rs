//! Closed-form error-ket norms for (product) Gaussian packets.
//!
//! On one axis every error ket of a Gaussian has the form
//! `e^{ip₀x/ℏ} g(y) P(y)` with `y = x − q₀`, `g` the Gaussian envelope and `P`
//! a complex polynomial. Position factors multiply `P` by `(y + q₀ − a)`;
//! momentum factors map `P ↦ (p₀ − b)P − iℏ(P′ − yP/(2Δq²))`. The norm is then
//! a finite sum of Gaussian moments `E[y^{2m}] = (2m−1)!! Δq^{2m}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub center_q: f64,
    pub center_p: f64,
    pub width: f64,
}

impl GaussianPacket {
    pub fn new(center_q: f64, center_p: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::config(format!("Gaussian width must be positive, got {width}")));
        }
        Ok(Self { center_q, center_p, width })
    }

    /// Exact momentum standard deviation `ℏ/(2Δq)`.
    pub fn momentum_width(&self, hbar: f64) -> f64 {
        hbar / (2.0 * self.width)
    }
}

/// `(2m − 1)!!` as a float, with `(−1)!! = 1`.
pub fn double_factorial_odd(m: u32) -> f64 {
    (1..=m).map(|k| f64::from(2 * k - 1)).product()
}

/// Norm² of `(â_n − c_n)⋯(â_1 − c_1)|g⟩` for one Gaussian axis. `factors`
/// lists `(is_momentum, center)` in application order.
pub fn axis_ket_norm_sq(packet: &GaussianPacket, factors: &[(bool, f64)], hbar: f64) -> f64 {
    let s2 = packet.width * packet.width;
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for &(is_momentum, center) in factors {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        if is_momentum {
            let shift = packet.center_p - center;
            let ih = Complex64::new(0.0, hbar);
            for (k, &c) in poly.iter().enumerate() {
                next[k] += c * shift;
                if k > 0 {
                    next[k - 1] -= ih * c * k as f64;
                }
                next[k + 1] += ih * c / (2.0 * s2);
            }
        } else {
            let shift = packet.center_q - center;
            for (k, &c) in poly.iter().enumerate() {
                next[k + 1] += c;
                next[k] += c * shift;
            }
        }
        poly = next;
    }
    let mut total = 0.0;
    for (j, a) in poly.iter().enumerate() {
        for (k, b) in poly.iter().enumerate() {
            if (j + k) % 2 == 0 {
                let m = ((j + k) / 2) as u32;
                total += (a.conj() * b).re * double_factorial_odd(m) * s2.powi(m as i32);
            }
        }
    }
    total
}

/// Norm² of a mixed error ket on a product Gaussian; `order` lists canonical
/// variable indices in application order, `centers` their classical values.
pub fn product_ket_norm_sq(packets: &[GaussianPacket], order: &[usize], centers: &[f64], hbar: f64) -> Result<f64> {
    let n = packets.len();
    if centers.len() != 2 * n {
        return Err(Error::invalid("one classical value per canonical variable is required"));
    }
    let mut per_axis: Vec<Vec<(bool, f64)>> = vec![Vec::new(); n];
    for &v in order {
        if v >= 2 * n {
            return Err(Error::invalid(format!("variable {v} outside a {}-variable phase space", 2 * n)));
        }
        per_axis[v % n].push((v >= n, centers[v]));
    }
    Ok(packets
        .iter()
        .zip(&per_axis)
        .map(|(g, f)| axis_ket_norm_sq(g, f, hbar))
        .product())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_moments() {
        let g = GaussianPacket::new(0.2, -1.0, 0.7).unwrap();
        for m in 1..=6u32 {
            let q: Vec<_> = (0..m).map(|_| (false, 0.2)).collect();
            let want = double_factorial_odd(m) * 0.7f64.powi(2 * m as i32);
            assert!((axis_ket_norm_sq(&g, &q, 1.0) / want - 1.0).abs() < 1e-13);
            let p: Vec<_> = (0..m).map(|_| (true, -1.0)).collect();
            let want = double_factorial_odd(m) * g.momentum_width(1.0).powi(2 * m as i32);
            assert!((axis_ket_norm_sq(&g, &p, 1.0) / want - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn offset_center_adds_bias() {
        let g = GaussianPacket::new(0.0, 0.0, 0.5).unwrap();
        let v = axis_ket_norm_sq(&g, &[(false, 1.0)], 1.0);
        assert!((v - (0.25 + 1.0)).abs() < 1e-14);
        let v = axis_ket_norm_sq(&g, &[(true, 2.0)], 1.0);
        assert!((v - (1.0 + 4.0)).abs() < 1e-14);
    }

    #[test]
    fn double_factorials() {
        assert_eq!(double_factorial_odd(0), 1.0);
        assert_eq!(double_factorial_odd(3), 15.0);
        assert_eq!(double_factorial_odd(10), 654_729_075.0);
    }
}
