//! Attenuation functions on the closed unit disk and their X-ray transforms.
//!
//! A line is identified by its offset `s` and normal direction
//! `tau = (cos theta, sin theta)`; it is `{x : <x, tau> = s}`. The chord inside
//! the disk is parametrized as `x = s * tau + t * tau_perp` with
//! `|t| <= sqrt(1 - s^2)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

pub const DEFAULT_QUAD_ORDER: usize = 32;

/// A line through the disk, `0 <= s <= 1`, `0 <= theta < 2 pi`.
///
/// `s = 0` is accepted so diameters can be evaluated; it is a measure-zero
/// boundary of the line space and the grid assigns it to the first row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineCoord {
    s: f64,
    theta: f64,
}

impl LineCoord {
    /// `theta` is reduced modulo `2 pi`.
    pub fn new(s: f64, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(format!("line offset s={s} outside [0, 1]")));
        }
        if !theta.is_finite() {
            return Err(Error::invalid("line angle must be finite"));
        }
        let mut theta = theta.rem_euclid(TAU);
        if theta >= TAU {
            theta = 0.0;
        }
        Ok(Self { s, theta })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Point on the chord at parameter `t`.
    pub fn point(&self, t: f64) -> [f64; 2] {
        let (sin, cos) = self.theta.sin_cos();
        [self.s * cos - t * sin, self.s * sin + t * cos]
    }
}

/// Parameter range `(t_lo, t_hi)` of the chord `L_y ∩ D`.
pub fn chord_interval(line: &LineCoord) -> (f64, f64) {
    let h = half_chord(line.s);
    (-h, h)
}

fn half_chord(s: f64) -> f64 {
    (1.0 - s * s).max(0.0).sqrt()
}

/// Builtin attenuation families.
///
/// All three are strictly positive and Lipschitz on the closed disk. The
/// constant disk and radial parabola have closed-form transforms; the bump is
/// integrated numerically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Phantom {
    /// `f(x) = c`.
    Constant { c: f64 },
    /// `f(x) = alpha + beta (1 - |x|^2)`.
    Parabola { alpha: f64, beta: f64 },
    /// `f(x) = base + amplitude * exp(-|x - center|^2 / (2 width^2))`.
    Bump {
        base: f64,
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
}

impl Phantom {
    pub fn constant(c: f64) -> Result<Self> {
        let p = Phantom::Constant { c };
        p.validate()?;
        Ok(p)
    }

    pub fn parabola(alpha: f64, beta: f64) -> Result<Self> {
        let p = Phantom::Parabola { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn bump(base: f64, amplitude: f64, center: [f64; 2], width: f64) -> Result<Self> {
        let p = Phantom::Bump {
            base,
            amplitude,
            center,
            width,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |cond: bool, msg: &str| {
            if cond {
                Ok(())
            } else {
                Err(Error::invalid(format!("{}: {msg}", self.name())))
            }
        };
        match *self {
            Phantom::Constant { c } => ok(c.is_finite() && c > 0.0, "requires c > 0"),
            Phantom::Parabola { alpha, beta } => {
                ok(alpha.is_finite() && alpha > 0.0, "requires alpha > 0")?;
                ok(beta.is_finite() && beta >= 0.0, "requires beta >= 0")
            }
            Phantom::Bump {
                base,
                amplitude,
                center,
                width,
            } => {
                ok(base.is_finite() && base > 0.0, "requires base > 0")?;
                ok(
                    amplitude.is_finite() && amplitude >= 0.0,
                    "requires amplitude >= 0",
                )?;
                ok(width.is_finite() && width > 0.0, "requires width > 0")?;
                ok(
                    center.iter().all(|c| c.is_finite()) && center[0].hypot(center[1]) < 1.0,
                    "requires a center inside the disk",
                )
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Phantom::Constant { .. } => "constant",
            Phantom::Parabola { .. } => "parabola",
            Phantom::Bump { .. } => "bump",
        }
    }

    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        match *self {
            Phantom::Constant { c } => c,
            Phantom::Parabola { alpha, beta } => alpha + beta * (1.0 - x[0] * x[0] - x[1] * x[1]),
            Phantom::Bump {
                base,
                amplitude,
                center,
                width,
            } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                base + amplitude * (-(dx * dx + dy * dy) / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn lipschitz_bound(&self) -> f64 {
        match *self {
            Phantom::Constant { .. } => 0.0,
            Phantom::Parabola { beta, .. } => 2.0 * beta,
            // max of r exp(-r^2 / 2w^2) / w^2 is at r = w
            Phantom::Bump {
                amplitude, width, ..
            } => amplitude * (-0.5f64).exp() / width,
        }
    }

    pub fn sup_bound(&self) -> f64 {
        match *self {
            Phantom::Constant { c } => c,
            Phantom::Parabola { alpha, beta } => alpha + beta,
            Phantom::Bump {
                base, amplitude, ..
            } => base + amplitude,
        }
    }

    pub fn inf_bound(&self) -> f64 {
        match *self {
            Phantom::Constant { c } => c,
            Phantom::Parabola { alpha, .. } => alpha,
            Phantom::Bump { base, .. } => base,
        }
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self, Phantom::Bump { .. })
    }

    /// Exact line integral, when the family admits one.
    pub fn closed_form_transform(&self, line: &LineCoord) -> Option<f64> {
        let h = half_chord(line.s);
        match *self {
            Phantom::Constant { c } => Some(2.0 * c * h),
            Phantom::Parabola { alpha, beta } => {
                Some(2.0 * alpha * h + 4.0 * beta / 3.0 * h * h * h)
            }
            Phantom::Bump { .. } => None,
        }
    }

    /// Gauss-Legendre integral of `f` along the chord, ignoring any closed form.
    pub fn chord_quadrature(&self, line: &LineCoord, rule: &GaussLegendre) -> f64 {
        let (lo, hi) = chord_interval(line);
        if hi <= lo {
            return 0.0;
        }
        rule.integrate(lo, hi, |t| self.evaluate(line.point(t)))
    }
}

/// `Xf(line)`: the closed form when available, otherwise chord quadrature of
/// order `quad_order`. Clamped to `[0, 2 sup f]`.
pub fn xray_transform(phantom: &Phantom, line: &LineCoord, quad_order: usize) -> Result<f64> {
    if quad_order < 2 {
        return Err(Error::invalid(format!(
            "quadrature order must be >= 2, got {quad_order}"
        )));
    }
    let raw = match phantom.closed_form_transform(line) {
        Some(v) => v,
        None => phantom.chord_quadrature(line, &GaussLegendre::new(quad_order)?),
    };
    Ok(raw.clamp(0.0, 2.0 * phantom.sup_bound()))
}

/// Reusable evaluator that builds the quadrature rule once.
#[derive(Clone, Debug)]
pub struct Projector {
    phantom: Phantom,
    rule: GaussLegendre,
}

impl Projector {
    pub fn new(phantom: Phantom, quad_order: usize) -> Result<Self> {
        phantom.validate()?;
        Ok(Self {
            phantom,
            rule: GaussLegendre::new(quad_order)?,
        })
    }

    pub fn phantom(&self) -> &Phantom {
        &self.phantom
    }

    pub fn transform(&self, line: &LineCoord) -> f64 {
        let raw = match self.phantom.closed_form_transform(line) {
            Some(v) => v,
            None => self.phantom.chord_quadrature(line, &self.rule),
        };
        raw.clamp(0.0, 2.0 * self.phantom.sup_bound())
    }

    /// Transform at raw `(s, theta)`; `s` is clamped into `[0, 1]`.
    pub fn transform_at(&self, s: f64, theta: f64) -> f64 {
        let line = LineCoord {
            s: s.clamp(0.0, 1.0),
            theta,
        };
        self.transform(&line)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub phantom: Phantom,
    pub inf: f64,
    pub sup: f64,
    pub lipschitz: f64,
    pub closed_form: bool,
}

impl CatalogEntry {
    fn new(id: &'static str, phantom: Phantom) -> Self {
        Self {
            id,
            inf: phantom.inf_bound(),
            sup: phantom.sup_bound(),
            lipschitz: phantom.lipschitz_bound(),
            closed_form: phantom.has_closed_form(),
            phantom,
        }
    }
}

/// Named reference phantoms.
pub fn builtin_phantoms() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry::new("constant", Phantom::Constant { c: 1.0 }),
        CatalogEntry::new(
            "parabola",
            Phantom::Parabola {
                alpha: 0.5,
                beta: 0.5,
            },
        ),
        CatalogEntry::new(
            "bump",
            Phantom::Bump {
                base: 0.3,
                amplitude: 0.7,
                center: [0.3, -0.2],
                width: 0.25,
            },
        ),
    ]
}

/// Peak value of `Xf` over all lines: the transform of a diameter is at most
/// `2 sup f`, and for the radial families it is attained at `s = 0`.
pub fn transform_sup_bound(phantom: &Phantom) -> f64 {
    match phantom {
        Phantom::Constant { c } => 2.0 * c,
        Phantom::Parabola { alpha, beta } => 2.0 * alpha + 4.0 * beta / 3.0,
        Phantom::Bump { .. } => 2.0 * phantom.sup_bound(),
    }
}
