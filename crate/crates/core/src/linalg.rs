//! Small dense vector helpers.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn dot_int(a: &[f64], z: &[i64]) -> f64 {
    a.iter().zip(z).map(|(x, &y)| x * y as f64).sum()
}

pub fn to_f64(z: &[i64]) -> Vec<f64> {
    z.iter().map(|&v| v as f64).collect()
}
