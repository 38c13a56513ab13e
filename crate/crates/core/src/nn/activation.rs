use super::Tensor;

/// Negative-side slope used unless configured otherwise.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

pub fn leaky_relu(x: &Tensor, alpha: f64) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { alpha * v })
}

/// The derivative at exactly 0 is taken to be `alpha`.
pub fn leaky_relu_backward(pre: &Tensor, upstream: &Tensor, alpha: f64) -> Tensor {
    let mut g = upstream.clone();
    for (gv, &p) in g.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *gv *= alpha;
        }
    }
    g
}
