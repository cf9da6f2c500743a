use super::tensor::CTensor;
use crate::error::{Error, Result};

/// `max(Re, 0) + j max(Im, 0)`, elementwise.
pub fn cvrelu(input: &CTensor) -> CTensor {
    let mut out = input.clone();
    out.re.mapv_inplace(|v| v.max(0.0));
    out.im.mapv_inplace(|v| v.max(0.0));
    out
}

/// Each part passes its gradient where its own pre-activation was positive.
pub fn cvrelu_backward(pre_activation: &CTensor, grad_out: &CTensor) -> Result<CTensor> {
    if !pre_activation.same_shape(grad_out) {
        return Err(Error::ShapeMismatch("cvrelu gradient shape differs from input".into()));
    }
    let mut g = grad_out.clone();
    ndarray::Zip::from(&mut g.re).and(&pre_activation.re).for_each(|g, &x| {
        if x <= 0.0 {
            *g = 0.0
        }
    });
    ndarray::Zip::from(&mut g.im).and(&pre_activation.im).for_each(|g, &x| {
        if x <= 0.0 {
            *g = 0.0
        }
    });
    Ok(g)
}
