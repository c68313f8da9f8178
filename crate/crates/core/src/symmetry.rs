use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::Zero;
use serde::Serialize;

use crate::field::ComplexField;
use crate::scalar::Real;

#[derive(Clone, Debug, Serialize)]
pub struct CylindricalReport {
    pub cylindrical: bool,
    /// Largest in-bin standard deviation relative to the sup norm.
    pub deviation: f64,
    pub bins: usize,
}

/// Tests whether `f` depends only on `x1` and `|x_bar|`.
///
/// Within each `x1` slice, samples are grouped by their exact transverse
/// radius (lattice points on the same circle) inside the inscribed disk, and
/// the spread of each group is measured.
pub fn is_cylindrical<T: Real>(f: &ComplexField<T>, tol: f64) -> CylindricalReport {
    let grid = f.grid();
    let n = grid.n;
    let sup = f.sup_norm().as_f64();
    if sup == 0.0 {
        return CylindricalReport {
            cylindrical: true,
            deviation: 0.0,
            bins: 0,
        };
    }
    let h2 = grid.spacing(1).as_f64();
    let h3 = grid.spacing(2).as_f64();
    let same_spacing = (h2 - h3).abs() <= 1e-12 * h2.max(h3);
    let disk = (n[1] / 2) as f64 * h2;
    let disk = disk.min((n[2] / 2) as f64 * h3);

    let mut worst = 0.0f64;
    let mut bins = 0;
    for i1 in 0..n[0] {
        let mut groups: BTreeMap<u64, Vec<Complex<f64>>> = BTreeMap::new();
        for i2 in 0..n[1] {
            let o2 = i2 as i64 - (n[1] / 2) as i64;
            for i3 in 0..n[2] {
                let o3 = i3 as i64 - (n[2] / 2) as i64;
                let r2 = (o2 as f64 * h2).powi(2) + (o3 as f64 * h3).powi(2);
                if r2 > disk * disk {
                    continue;
                }
                let key = if same_spacing {
                    (o2 * o2 + o3 * o3) as u64
                } else {
                    // twelve significant digits identify a circle
                    (r2 * 1e12 / (h2 * h2 + h3 * h3)).round() as u64
                };
                let v = f.values()[grid.index(i1, i2, i3)];
                let v = Complex::new(v.re.as_f64(), v.im.as_f64());
                groups.entry(key).or_default().push(v);
            }
        }
        for members in groups.values() {
            if members.len() < 2 {
                continue;
            }
            bins += 1;
            let c = members.len() as f64;
            let mean = members.iter().fold(Complex::zero(), |a, v| a + v) / c;
            let var = members.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / c;
            worst = worst.max(var.sqrt());
        }
    }
    let deviation = worst / sup;
    CylindricalReport {
        cylindrical: deviation <= tol,
        deviation,
        bins,
    }
}

/// Relative L2 distance between `f` and its reflection `x1 -> -x1`.
pub fn x1_parity_defect<T: Real>(f: &ComplexField<T>) -> f64 {
    let grid = f.grid();
    let n = grid.n;
    let mut diff = 0.0f64;
    let mut norm = 0.0f64;
    for i1 in 0..n[0] {
        let m1 = (n[0] - i1) % n[0];
        for i2 in 0..n[1] {
            for i3 in 0..n[2] {
                let a = f.values()[grid.index(i1, i2, i3)];
                let b = f.values()[grid.index(m1, i2, i3)];
                diff += (a - b).norm_sqr().as_f64();
                norm += a.norm_sqr().as_f64();
            }
        }
    }
    if norm == 0.0 {
        0.0
    } else {
        (diff / norm).sqrt()
    }
}
