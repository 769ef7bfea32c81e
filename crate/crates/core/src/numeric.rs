//! Small scalar helpers shared by graph construction, the model and training.

/// `log Σ exp(x)` with max-subtraction. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

pub fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|&x| x - lse).collect()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[inline]
pub fn leaky_relu(z: f64, slope: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        slope * z
    }
}

#[inline]
pub fn leaky_relu_grad(z: f64, slope: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        slope
    }
}

#[inline]
pub fn elu(z: f64, alpha: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        alpha * z.exp_m1()
    }
}

#[inline]
pub fn elu_grad(z: f64, alpha: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        alpha * z.exp()
    }
}
