use crate::error::{invalid, Error, Result};
use crate::kernels::{
    depthwise3x3_backward, depthwise3x3_forward, grouped3x3_backward, grouped3x3_forward,
    pointwise_backward, pointwise_forward,
};
use crate::params::CpwcParams;
use crate::tensor::{Element, Shape, Tensor};

/// Gradients of a CPWC block, banks shaped like [`CpwcParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct CpwcGrads<T> {
    pub input: Tensor<T>,
    pub pwc: Option<Vec<T>>,
    pub stage1: Option<Vec<T>>,
    pub stage2: Option<Vec<T>>,
}

impl<T: Element> CpwcGrads<T> {
    /// Present weight-bank gradients in pwc, stage-1, stage-2 order.
    pub fn banks(&self) -> Vec<&Vec<T>> {
        [&self.pwc, &self.stage1, &self.stage2]
            .into_iter()
            .filter_map(Option::as_ref)
            .collect()
    }
}

fn check_input<T: Element>(x: &Tensor<T>, p: &CpwcParams<T>) -> Result<Shape> {
    let s = x.shape();
    if s.c != p.in_channels() {
        return invalid(format!(
            "input has {} channels but the block expects {}",
            s.c,
            p.in_channels()
        ));
    }
    let st = p.stride();
    Shape::new(s.n, p.out_channels(), (s.h - 1) / st + 1, (s.w - 1) / st + 1)
}

/// Stage-1 output alone (zero-valued for variants without stage 1).
pub fn cpwc_stage1<T: Element>(x: &Tensor<T>, p: &CpwcParams<T>) -> Result<Tensor<T>> {
    let os = check_input(x, p)?;
    match &p.stage1 {
        Some(w) => grouped3x3_forward(x, p.plan().groups(), w, p.stride()),
        None => Ok(Tensor::zeros(os)),
    }
}

/// `pwc(x) + stage1(x) + stage2(stage1(x))`, with disabled paths omitted.
///
/// The pointwise path and stage 1 use the block's stride; stage 2 runs at
/// stride 1 on the stage-1 output so all three paths share one shape.
pub fn cpwc_forward<T: Element>(x: &Tensor<T>, p: &CpwcParams<T>) -> Result<Tensor<T>> {
    let os = check_input(x, p)?;
    let mut out = match &p.pwc {
        Some(w) => pointwise_forward(x, w, p.out_channels(), p.stride())?,
        None => Tensor::zeros(os),
    };
    if let Some(w1) = &p.stage1 {
        let s1 = grouped3x3_forward(x, p.plan().groups(), w1, p.stride())?;
        if let Some(w2) = &p.stage2 {
            out.add_assign(&depthwise3x3_forward(&s1, w2, 1)?)?;
        }
        out.add_assign(&s1)?;
    }
    Ok(out)
}

/// Exact gradients of [`cpwc_forward`] for the cotangent `grad_out`.
///
/// Stage-1 weights receive gradient both directly and through stage 2.
pub fn cpwc_backward<T: Element>(
    x: &Tensor<T>,
    p: &CpwcParams<T>,
    grad_out: &Tensor<T>,
) -> Result<CpwcGrads<T>> {
    let os = check_input(x, p)?;
    if grad_out.shape() != os {
        return Err(Error::ShapeMismatch {
            expected: os.to_string(),
            actual: grad_out.shape().to_string(),
        });
    }
    let mut gx = Tensor::zeros(x.shape());
    let mut grads = CpwcGrads {
        input: Tensor::zeros(x.shape()),
        pwc: None,
        stage1: None,
        stage2: None,
    };
    if let Some(w) = &p.pwc {
        let (g, gw) = pointwise_backward(x, w, p.out_channels(), p.stride(), grad_out)?;
        gx.add_assign(&g)?;
        grads.pwc = Some(gw);
    }
    if let Some(w1) = &p.stage1 {
        let groups = p.plan().groups();
        let mut g_s1 = grad_out.clone();
        if let Some(w2) = &p.stage2 {
            let s1 = grouped3x3_forward(x, groups, w1, p.stride())?;
            let (g, gw2) = depthwise3x3_backward(&s1, w2, 1, grad_out)?;
            g_s1.add_assign(&g)?;
            grads.stage2 = Some(gw2);
        }
        let (g, gw1) = grouped3x3_backward(x, groups, w1, p.stride(), &g_s1)?;
        gx.add_assign(&g)?;
        grads.stage1 = Some(gw1);
    }
    grads.input = gx;
    Ok(grads)
}
