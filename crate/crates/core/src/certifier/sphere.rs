//! Intersecting the segment from the projection point (inside the ball) to the
//! LP point (outside it) with the unit sphere.

use alloc::vec::Vec;

use crate::vector::{dot64, norm64};

/// Norm error tolerated on the closed-form result before the exact root is
/// used instead.
const ON_SPHERE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereError {
    /// The two points coincide, so there is no direction.
    Degenerate,
    /// `x_proj` is outside the ball or `x_lp` inside it.
    Precondition,
}

/// Step from `x_proj` along the unit direction `u` to the unit sphere,
/// taking the non-negative root of `|x_proj + t u|^2 = 1`.
pub fn exact_step(x_proj: &[f64], u: &[f64]) -> f64 {
    let b = dot64(x_proj, u);
    let c = (dot64(x_proj, x_proj) - 1.0).min(0.0);
    let disc = libm::sqrt(b * b - c);
    if b > 0.0 {
        // -b + sqrt(b^2 - c) without cancellation
        -c / (b + disc)
    } else {
        disc - b
    }
}

/// Point where the segment from `x_proj` towards `x_lp` leaves the unit ball.
///
/// First tries the closed form
/// `x_proj + u * sqrt((1 - |x_proj|^2) (1 - cos^2(x_proj, x_lp)))`; when that
/// lands off the sphere, the exact quadratic root is used.
pub fn combine_to_sphere(x_proj: &[f64], x_lp: &[f64]) -> Result<Vec<f64>, SphereError> {
    let p2 = dot64(x_proj, x_proj);
    if p2 > (1.0 + 1e-9) * (1.0 + 1e-9) || dot64(x_lp, x_lp) < 1.0 {
        return Err(SphereError::Precondition);
    }
    let diff: Vec<f64> = x_lp.iter().zip(x_proj).map(|(l, p)| l - p).collect();
    let len = norm64(&diff);
    if len < 1e-12 {
        return Err(SphereError::Degenerate);
    }
    let u: Vec<f64> = diff.iter().map(|v| v / len).collect();

    let (np, nl) = (libm::sqrt(p2), norm64(x_lp));
    let cos = if np > 0.0 { dot64(x_proj, x_lp) / (np * nl) } else { 0.0 };
    let s = libm::sqrt(((1.0 - p2) * (1.0 - cos * cos)).max(0.0));
    let x: Vec<f64> = x_proj.iter().zip(&u).map(|(p, ui)| p + s * ui).collect();
    if (norm64(&x) - 1.0).abs() <= ON_SPHERE {
        return Ok(x);
    }
    let t = exact_step(x_proj, &u);
    Ok(x_proj.iter().zip(&u).map(|(p, ui)| p + t * ui).collect())
}
