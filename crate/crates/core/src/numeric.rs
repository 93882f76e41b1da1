//! Scalar primitives shared by the rest of the crate.

use alloc::vec::Vec;

/// Largest `f64` strictly below one.
const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    /// `+1.0` or `-1.0`.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_sign(value: i64) -> Option<Label> {
        match value {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }

    /// The label a logit predicts; ties go to the positive class.
    pub fn predict(logit: f64) -> Label {
        if logit >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

/// Logistic function, evaluated on the branch that cannot overflow.
///
/// The result is kept inside the open interval (0, 1) even where the exact
/// value rounds to 0 or 1 in double precision.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, ONE_BELOW)
}

/// `log(1 + exp(-label * score))` without overflow.
#[inline]
pub fn logistic_loss(score: f64, label: Label) -> f64 {
    let margin = label.sign() * score;
    if margin > 0.0 {
        libm::log1p(libm::exp(-margin))
    } else {
        -margin + libm::log1p(libm::exp(margin))
    }
}

/// Derivative of [`logistic_loss`] with respect to `score`.
#[inline]
pub fn logistic_loss_slope(score: f64, label: Label) -> f64 {
    let y = label.sign();
    -y * sigmoid_unclamped(-y * score)
}

// The loss slope must reach exactly zero for saturated margins.
#[inline]
fn sigmoid_unclamped(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn l2_norm(values: &[f64]) -> f64 {
    libm::sqrt(values.iter().map(|v| v * v).sum::<f64>())
}

/// Central finite differences of `f` at `params`, one coordinate at a time.
///
/// Errors returned by `f` at any perturbed point are propagated unchanged.
pub fn finite_diff_grad<F, E>(mut f: F, params: &[f64], h: f64) -> Result<Vec<f64>, E>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    assert!(h > 0.0, "finite difference step must be positive");
    let mut point = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        point[i] = params[i] + h;
        let plus = f(&point)?;
        point[i] = params[i] - h;
        let minus = f(&point)?;
        point[i] = params[i];
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}
